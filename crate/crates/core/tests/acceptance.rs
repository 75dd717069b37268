//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every criterion is checked against an oracle written here, independently
//! of the library code path it audits. Tolerances are fixed constants below.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radnet::approximation::{atom_center, random_expansion, rate_table, to_rqnn, RateSetup};
use radnet::field::Grid;
use radnet::inverse::{
    forward_map, gauss_newton, perturb_params, pseudo_inverse, reference_bumps, GaussNewtonOptions,
    LinearOperator, DEFAULT_SVD_REL_TOL,
};
use radnet::networks::{grad_dnn_w11, grad_rqnn, DeepParams, ScalarLayer};
use radnet::phantom::{build_shepp_logan_gqnn, rasterize};
use radnet::rng::substream;
use radnet::wavelets::{
    check_ati_item1, check_ati_item2, check_ati_mass, check_double_lipschitz, hessian_bound,
    verify_geometric_floor, AtIQuintuple, RadialKernelSystem, SamplingPlan, SigmoidKernelConstants,
};
use radnet::{ActivationProfile, NetworkParams, RadialParams};

const GRAD_REL_TOL: f64 = 1e-6;
const GRAD_SAMPLES: usize = 50;
const GRAD_RUNTIME_S: f64 = 10.0;
const MASS_TOL: f64 = 1e-6;
const MASS_RUNTIME_S: f64 = 60.0;
const ATI_SAMPLES: usize = 10_000;
const ATI_RUNTIME_S: f64 = 300.0;
const HESSIAN_REL_SLACK: f64 = 1e-4;
const HESSIAN_POINTS: usize = 100;
const RATE_N: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
const RATE_RUNTIME_S: f64 = 300.0;
const CONVERSION_TOL: f64 = 1e-10;
const GN_PARAM_TOL: f64 = 1e-10;
const GN_MAX_ITER: usize = 8;
const GN_MIN_ORDER: f64 = 1.7;
const PINV_TOL: f64 = 1e-10;
const FLOOR_SAMPLES: usize = 10_000;

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(-f(2h) + 8 f(h) - 8 f(-h) + f(-2h)) / 12h`.
fn diff4(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let act = ActivationProfile::sigmoid();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-3;
    let mut worst_rqnn = 0.0f64;
    for s in 0..GRAD_SAMPLES {
        let n = 1 + s % 3;
        let m = 3;
        let p = RadialParams {
            alpha: (0..m).map(|_| rng.random_range(-2.0..2.0)).collect(),
            w: (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
            xi: (0..m).map(|_| rng.random_range(-2.0..-0.2)).collect(),
            theta: (0..m).map(|_| rng.random_range(0.0..2.0)).collect(),
        };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = grad_rqnn(&p, &act, &x).unwrap();
        let net = NetworkParams::Rqnn(p);
        let base = net.flatten();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for i in 0..base.len() {
            let fd = diff4(
                |d| {
                    let mut q = base.clone();
                    q[i] += d;
                    net.with_flat(&q).unwrap().eval(&act, &x).unwrap()
                },
                h,
            );
            num = num.max((g[i] - fd).abs());
            den = den.max(fd.abs());
        }
        worst_rqnn = worst_rqnn.max(num / den);
    }
    let mut worst_dnn = 0.0f64;
    for _ in 0..GRAD_SAMPLES {
        let mut layer = |m: usize| ScalarLayer {
            alpha: (0..m).map(|_| rng.random_range(-2.0..2.0)).collect(),
            w: (0..m).map(|_| rng.random_range(-2.0..2.0)).collect(),
            theta: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let (l1, l2) = (layer(3), layer(3));
        let p = DeepParams::new(l1, l2).unwrap();
        let x = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let g = grad_dnn_w11(&p, &act, x).unwrap();
        // Flat layout [alpha1; alpha2; w1; w2; theta1; theta2]: w_{1,1} sits
        // after both alpha blocks.
        let w11 = 3 + 3;
        let base = p.flatten();
        let fd = diff4(
            |d| {
                let mut q = base.clone();
                q[w11] += d;
                DeepParams::unflatten(3, 3, &q).unwrap().eval(&act, x)
            },
            h,
        );
        worst_dnn = worst_dnn.max((g - fd).abs() / fd.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        passed: worst_rqnn <= GRAD_REL_TOL && worst_dnn <= GRAD_REL_TOL && secs < GRAD_RUNTIME_S,
        detail: format!(
            "max rel err RQNN {worst_rqnn:.2e}, DNN4 {worst_dnn:.2e} (tol {GRAD_REL_TOL:e}, {GRAD_SAMPLES} samples each) in {secs:.2} s (< {GRAD_RUNTIME_S} s)"
        ),
    }
}

/// Trapezoid rule over `y + [-L, L]^n` on `m` nodes per axis; spectrally
/// accurate for the smooth, rapidly decaying kernels here.
fn trapezoid_mass(f: impl Fn(&[f64]) -> f64, y: &[f64], half: f64, m: usize) -> f64 {
    let n = y.len();
    let h = 2.0 * half / m as f64;
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for d in 0..n {
            x[d] = y[d] - half + h * idx[d] as f64;
        }
        total += f(&x);
        let mut d = 0;
        loop {
            if d == n {
                return total * h.powi(n as i32);
            }
            idx[d] += 1;
            if idx[d] <= m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut worst_lib = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut lib_violations = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [1usize, 2] {
        let sys = RadialKernelSystem::sigmoid(n).unwrap();
        let plan = SamplingPlan::default().with_k_range(-2, 4);
        let rep = check_ati_mass(&sys, &plan, 5, MASS_TOL).unwrap();
        lib_violations += rep.violations;
        worst_lib = worst_lib.max(rep.empirical_c);
        for k in -2..=4 {
            for _ in 0..5 {
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let scale = 2f64.powf(k as f64 / n as f64);
                let kernel = |x: &[f64]| {
                    2f64.powi(k) * sys.c_n * sigmoid(1.0 - scale * scale * dist2(x, &y))
                };
                let m = if n == 1 { 4000 } else { 400 };
                let mass = trapezoid_mass(kernel, &y, 8.0 / scale, m);
                worst_oracle = worst_oracle.max((mass - 1.0).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        passed: lib_violations == 0
            && worst_lib <= MASS_TOL
            && worst_oracle <= MASS_TOL
            && secs < MASS_RUNTIME_S,
        detail: format!(
            "max |mass - 1|: library {worst_lib:.1e}, trapezoid oracle {worst_oracle:.1e} (tol {MASS_TOL:e}), k in -2..=4, n in {{1,2}}, 5 y each, {secs:.1} s"
        ),
    }
}

/// Independent sampler for the three inequalities, using a direct kernel
/// formula. Returns violations per inequality.
fn ati_oracle(sys: &RadialKernelSystem, c: [f64; 3], samples: usize, seed: u64) -> [usize; 3] {
    let n = sys.n;
    let ni = n as i32;
    let eps = 1.0 / n as f64;
    let s_k = |k: i32, x: &[f64], y: &[f64]| {
        let scale2 = 4f64.powf(k as f64 / n as f64);
        2f64.powi(k) * sys.c_n * sigmoid(1.0 - scale2 * dist2(x, y))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        v.into_iter().map(|a| a / norm).collect()
    };
    let shift = |rng: &mut ChaCha8Rng, base: &[f64], len: f64| -> Vec<f64> {
        let d = dir(rng);
        base.iter().zip(&d).map(|(b, e)| b + len * e).collect()
    };
    let mut bad = [0usize; 3];
    for _ in 0..samples {
        let k = rng.random_range(-3..=8);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let width = 2f64.powf(-(k as f64) / n as f64);
        let r = width
            * if rng.random::<bool>() {
                rng.random_range(0.0..4.0)
            } else {
                10f64.powf(rng.random_range(-3.0..1.5))
            };
        let x = shift(&mut rng, &y, r);
        let d = dist2(&x, &y).sqrt();
        let dd = 2f64.powi(-k) + d.powi(ni);
        let base = 2f64.powf(-(k as f64) * eps) / dd.powf(1.0 + eps);
        let sxy = s_k(k, &x, &y);
        if sxy.abs() > c[0] * base * (1.0 + 1e-12) {
            bad[0] += 1;
        }
        // Item (ii): |x - x'|^n <= 2^-n D.
        let rho2 = (2f64.powi(-ni) * dd).powf(eps) * rng.random::<f64>();
        let xp = shift(&mut rng, &x, rho2);
        let dx = dist2(&x, &xp).sqrt();
        let rhs = c[1] * (dx.powi(ni) / dd).powf(eps) * base;
        let (a, b) = (sxy, s_k(k, &xp, &y));
        if (a - b).abs() > rhs * (1.0 + 1e-12) + 4.0 * f64::EPSILON * (a.abs() + b.abs()) {
            bad[1] += 1;
        }
        // Double Lipschitz: max(|x - x'|, |y - y'|)^n <= 3^-n D.
        let rho3 = (3f64.powi(-ni) * dd).powf(eps);
        let (tx, ty): (f64, f64) = (rng.random(), rng.random());
        let xq = shift(&mut rng, &x, rho3 * tx);
        let yq = shift(&mut rng, &y, rho3 * ty);
        let fx = (dist2(&x, &xq).sqrt().powi(ni) / dd).powf(eps);
        let fy = (dist2(&y, &yq).sqrt().powi(ni) / dd).powf(eps);
        let s = [sxy, s_k(k, &xq, &y), s_k(k, &x, &yq), s_k(k, &xq, &yq)];
        let lhs = (s[0] - s[1] - s[2] + s[3]).abs();
        let noise = 6.0 * f64::EPSILON * s.iter().map(|v| v.abs()).sum::<f64>();
        if lhs > c[2] * fx * fy * base * (1.0 + 1e-12) + noise {
            bad[2] += 1;
        }
    }
    bad
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = vec![];
    for n in [1usize, 2] {
        let sys = RadialKernelSystem::sigmoid(n)
            .unwrap()
            .with_decay_constant();
        let c_sigma = sys.c_sigma();
        let consts = SigmoidKernelConstants::new(n, sys.c_n, c_sigma);
        let quint = AtIQuintuple::for_radial(n, sys.c_n, c_sigma).unwrap();
        let inv_n = 1.0 / n as f64;
        ok &= quint.epsilon == inv_n
            && quint.zeta == inv_n
            && quint.c_rho == 1.0
            && quint.c_a == 2f64.powi(-(n as i32))
            && quint.tilde_c_a == 3f64.powi(-(n as i32));
        ok &= (consts.item1 - sys.c_n * c_sigma).abs() <= 1e-12 * consts.item1
            && (consts.item2 - 2f64.powi(n as i32 + 2) * sys.c_n * c_sigma).abs()
                <= 1e-12 * consts.item2
            && (consts.double_lipschitz - 8.0 * 3f64.powi(n as i32 + 3) * sys.c_n * c_sigma).abs()
                <= 1e-12 * consts.double_lipschitz;
        let plan = SamplingPlan::default().with_samples(ATI_SAMPLES);
        let reps = [
            check_ati_item1(&sys, &quint.with_c(consts.item1), &plan).unwrap(),
            check_ati_item2(&sys, &quint.with_c(consts.item2), &plan).unwrap(),
            check_double_lipschitz(&sys, &quint.with_tilde_c(consts.double_lipschitz), &plan)
                .unwrap(),
        ];
        for r in &reps {
            ok &= r.violations == 0 && r.samples >= ATI_SAMPLES;
        }
        let oracle = ati_oracle(
            &sys,
            [consts.item1, consts.item2, consts.double_lipschitz],
            ATI_SAMPLES,
            30 + n as u64,
        );
        ok &= oracle == [0, 0, 0];
        parts.push(format!(
            "n={n}: C_sigma {c_sigma:.3}, library viol {}/{}/{} over {}/{}/{} tuples, oracle viol {}/{}/{}",
            reps[0].violations,
            reps[1].violations,
            reps[2].violations,
            reps[0].samples,
            reps[1].samples,
            reps[2].samples,
            oracle[0],
            oracle[1],
            oracle[2]
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < ATI_RUNTIME_S;
    Verdict {
        passed: ok,
        detail: format!("{}; {secs:.1} s", parts.join("; ")),
    }
}

/// Richardson-extrapolated central-difference Hessian.
fn fd_hessian(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let at = |h: f64| {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let e = |di: f64, dj: f64| {
                    let mut y = x.to_vec();
                    y[i] += di;
                    y[j] += dj;
                    f(&y)
                };
                m[(i, j)] = if i == j {
                    (e(h, 0.0) - 2.0 * f(x) + e(-h, 0.0)) / (h * h)
                } else {
                    (e(h, h) - e(h, -h) - e(-h, h) + e(-h, -h)) / (4.0 * h * h)
                };
            }
        }
        m
    };
    (at(h) * 4.0 - at(2.0 * h)) / 3.0
}

fn criterion_4() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=3usize {
        let sys = RadialKernelSystem::sigmoid(n).unwrap();
        let phi = |x: &[f64]| sys.c_n * sigmoid(1.0 - x.iter().map(|v| v * v).sum::<f64>());
        for _ in 0..HESSIAN_POINTS {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.5..2.5)).collect();
            let hess = fd_hessian(&phi, &x, 1e-3);
            let norm = SymmetricEigen::new(hess)
                .eigenvalues
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = hessian_bound(&sys.profile(), &x);
            worst = worst.max(norm / bound - 1.0);
        }
    }
    Verdict {
        passed: worst <= HESSIAN_REL_SLACK,
        detail: format!(
            "max (|FD Hessian| / bound - 1) = {worst:.2e} (allowed {HESSIAN_REL_SLACK:e}), {HESSIAN_POINTS} points each for n = 1, 2, 3"
        ),
    }
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_agreement = 0.0f64;
    let mut runs = 0;
    for (n, seeds) in [(1usize, 10u64), (2, 5)] {
        let sys = RadialKernelSystem::sigmoid(n).unwrap();
        let setup = RateSetup::standard(n).unwrap();
        let expected_cells = if n == 1 { 1024 } else { 256 };
        ok &= setup.grid.shape.iter().all(|&s| s == expected_cells);
        let grid = &setup.grid;
        let vol = grid.cell_volume();
        for seed in 0..seeds {
            let exp =
                random_expansion(&setup.dict, 64, &mut substream(seed, "rate-expansion")).unwrap();
            ok &= exp.len() == 64;
            let fields: Vec<Vec<f64>> = exp
                .terms()
                .iter()
                .map(|t| {
                    let c = atom_center(&t.atom, n).unwrap();
                    let k = t.atom.k as f64;
                    let (s1, s0) = (4f64.powf(k / n as f64), 4f64.powf((k - 1.0) / n as f64));
                    (0..grid.len())
                        .map(|i| {
                            let d2 = dist2(&grid.node(i), &c);
                            let sk = 2f64.powf(k) * sys.c_n * sigmoid(1.0 - s1 * d2);
                            let skm = 2f64.powf(k - 1.0) * sys.c_n * sigmoid(1.0 - s0 * d2);
                            2f64.powf(-0.5 * k) * (sk - skm)
                        })
                        .collect()
                })
                .collect();
            let l1: f64 = exp.terms().iter().map(|t| t.beta.abs()).sum();
            let mut order: Vec<usize> = (0..exp.len()).collect();
            order.sort_by(|&a, &b| {
                exp.terms()[b]
                    .beta
                    .abs()
                    .total_cmp(&exp.terms()[a].beta.abs())
            });
            let lib = rate_table(&sys, &exp, grid, &RATE_N).unwrap();
            for (row, &nt) in lib.iter().zip(&RATE_N) {
                let mut resid = vec![0.0; grid.len()];
                for &j in &order[nt.min(order.len())..] {
                    let beta = exp.terms()[j].beta;
                    resid
                        .iter_mut()
                        .zip(&fields[j])
                        .for_each(|(r, v)| *r += beta * v);
                }
                let err = (resid.iter().map(|r| r * r).sum::<f64>() * vol).sqrt();
                let bound = l1 / ((nt + 1) as f64).sqrt();
                ok &= err <= bound && row.l2_error <= row.bound;
                worst_ratio = worst_ratio.max(err / bound);
                worst_agreement = worst_agreement.max((err - row.l2_error).abs() / bound);
                runs += 1;
            }
        }
    }
    ok &= worst_agreement <= 1e-9;
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < RATE_RUNTIME_S;
    Verdict {
        passed: ok,
        detail: format!(
            "{runs} (expansion, N) pairs, max error/bound {worst_ratio:.3}, library vs oracle {worst_agreement:.1e}, {secs:.1} s"
        ),
    }
}

fn criterion_6() -> Verdict {
    let act = ActivationProfile::sigmoid();
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [1usize, 2] {
        let sys = RadialKernelSystem::sigmoid(n).unwrap();
        let setup = RateSetup::standard(n).unwrap();
        for e in 0..10u64 {
            let count = 1 + (e as usize * 7) % 30;
            let exp =
                random_expansion(&setup.dict, count, &mut substream(e, "conversion")).unwrap();
            let net = to_rqnn(&sys, &exp).unwrap();
            ok &= net.neurons() == 2 * exp.len();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
                let direct: f64 = exp
                    .terms()
                    .iter()
                    .map(|t| {
                        let c: Vec<f64> = t
                            .atom
                            .j
                            .iter()
                            .map(|&j| j as f64 * 2f64.powf(-(t.atom.k as f64) / n as f64))
                            .collect();
                        let k = t.atom.k as f64;
                        let d2 = dist2(&x, &c);
                        let sk =
                            2f64.powf(k) * sys.c_n * sigmoid(1.0 - 4f64.powf(k / n as f64) * d2);
                        let skm = 2f64.powf(k - 1.0)
                            * sys.c_n
                            * sigmoid(1.0 - 4f64.powf((k - 1.0) / n as f64) * d2);
                        t.beta * 2f64.powf(-0.5 * k) * (sk - skm)
                    })
                    .sum();
                worst = worst.max((net.eval(&act, &x).unwrap() - direct).abs());
            }
        }
    }
    ok &= worst <= CONVERSION_TOL;
    Verdict {
        passed: ok,
        detail: format!(
            "max |RQNN - expansion| {worst:.1e} (tol {CONVERSION_TOL:e}) at 1000 points x 10 expansions, n = 1, 2; neuron count 2N"
        ),
    }
}

/// Least squares fit of `log e_(k+1) = log C + q log e_k` over the
/// contraction phase.
fn fit_order(errors: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = errors
        .windows(2)
        .filter(|w| w[1] < w[0] && w[1] > floor)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pts.len() < 2 {
        // One contraction step: the order is its log ratio against the
        // unit-constant model.
        return pts.first().map(|(a, b)| b / a);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

fn matched_error(p: &[f64], truth: &RadialParams) -> f64 {
    let q = RadialParams::unflatten(1, 2, p).unwrap();
    let straight = dist2(&q.flatten(), &truth.flatten()).sqrt();
    let swapped = dist2(&q.permuted(&[1, 0]).flatten(), &truth.flatten()).sqrt();
    straight.min(swapped)
}

fn criterion_7() -> Verdict {
    let act = ActivationProfile::sigmoid();
    let truth = reference_bumps();
    let grid = Grid::midpoint_box(&[0.0], &[1.0], 200).unwrap();
    let opts = GaussNewtonOptions {
        max_iter: 12,
        stop_tol: 1e-15,
        ..Default::default()
    };
    let mut ok = true;
    let mut parts = vec![];
    for op in [
        LinearOperator::identity(grid.clone()),
        LinearOperator::cumulative_integration(grid.clone()),
    ] {
        let y = forward_map(&op, &truth, &act).unwrap();
        let p0 = perturb_params(&truth, 1e-3, &mut substream(42, "gauss-newton-start"));
        let start_err = matched_error(&p0.flatten(), &truth);
        let trace = gauss_newton(&op, &act, &y, &p0, &opts, Some(&truth)).unwrap();
        let errors: Vec<f64> = trace
            .records
            .iter()
            .map(|r| matched_error(&r.p, &truth))
            .collect();
        let hit = errors.iter().position(|&e| e < GN_PARAM_TOL);
        let q = fit_order(&errors, 1e-13);
        let this_ok = (start_err - 1e-3).abs() < 1e-12
            && hit.is_some_and(|i| i <= GN_MAX_ITER)
            && q.is_some_and(|q| q >= GN_MIN_ORDER);
        ok &= this_ok;
        parts.push(format!(
            "{}: e < {GN_PARAM_TOL:e} at iteration {}, q = {}",
            op.name(),
            hit.map_or("never".into(), |i| i.to_string()),
            q.map_or("n/a".into(), |q| format!("{q:.2}"))
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let (m, n) = (rng.random_range(1..=9), rng.random_range(1..=7));
        let mut a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        if t % 3 == 0 && n > 1 {
            // Rank-deficient: duplicate a column.
            let c = a.column(0).into_owned();
            a.set_column(n - 1, &c);
        }
        let p = pseudo_inverse(&a, DEFAULT_SVD_REL_TOL);
        let scale = a.norm().max(1.0) * p.norm().max(1.0);
        let axioms = [
            (&a * &p * &a - &a).norm(),
            (&p * &a * &p - &p).norm(),
            (&a * &p - (&a * &p).transpose()).norm(),
            (&p * &a - (&p * &a).transpose()).norm(),
        ];
        worst = worst.max(axioms.iter().fold(0.0f64, |m, v| m.max(*v)) / scale);
    }
    ok &= worst <= PINV_TOL;
    parts.push(format!(
        "pinv axioms max rel residual {worst:.1e} on 100 matrices"
    ));
    Verdict {
        passed: ok,
        detail: parts.join("; "),
    }
}

struct OracleEllipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    phi: f64,
    rho: f64,
}

impl OracleEllipse {
    fn level(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.phi.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }
}

fn oracle_ellipses() -> Vec<OracleEllipse> {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/shepp_logan.csv"
    ))
    .unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|c| c.trim().parse().unwrap()).collect();
            OracleEllipse {
                cx: v[0],
                cy: v[1],
                a: v[2],
                b: v[3],
                phi: v[4].to_radians(),
                rho: v[5],
            }
        })
        .collect()
}

fn criterion_8() -> Verdict {
    let res = 256;
    let net = build_shepp_logan_gqnn().unwrap();
    let field = rasterize(&net, &ActivationProfile::heaviside(), res).unwrap();
    let ellipses = oracle_ellipses();
    let value = |x: f64, y: f64| -> f64 {
        ellipses
            .iter()
            .filter(|e| e.level(x, y) <= 1.0)
            .map(|e| e.rho)
            .sum()
    };
    let inside =
        |x: f64, y: f64| -> Vec<bool> { ellipses.iter().map(|e| e.level(x, y) <= 1.0).collect() };
    // Pixel size in phantom coordinates.
    let h = 2.0 / res as f64;
    let (mut compared, mut mismatches, mut band) = (0usize, 0usize, 0usize);
    for i in 0..field.grid.len() {
        let u = field.grid.node(i);
        let (x, y) = (2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0);
        let here = inside(x, y);
        let near_edge = [-1.0, 0.0, 1.0].iter().any(|&sx| {
            [-1.0, 0.0, 1.0]
                .iter()
                .any(|&sy| inside(x + sx * h, y + sy * h) != here)
        });
        if near_edge {
            band += 1;
            continue;
        }
        compared += 1;
        if field.values[i] != value(x, y) {
            mismatches += 1;
        }
    }
    let ok = net.neurons() == 10
        && net.param_count() == 80
        && ellipses.len() == 10
        && mismatches == 0
        && compared > 0;
    Verdict {
        passed: ok,
        detail: format!(
            "{res}x{res}: {mismatches} mismatches over {compared} nodes off the boundary band ({band} band nodes), 10 neurons, 80 parameters"
        ),
    }
}

fn criterion_9() -> Verdict {
    let mut ok = true;
    let mut lib_total = 0;
    let mut oracle_bad = 0;
    let mut checked = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=3usize {
        let ni = n as i32;
        for k in [-2, 0, 3] {
            let rep = verify_geometric_floor(n, k, FLOOR_SAMPLES, 42);
            ok &= rep.triples >= FLOOR_SAMPLES && rep.quadruples >= FLOOR_SAMPLES;
            lib_total += rep.violations();
            let two_k = 2f64.powi(-k);
            let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
                v.into_iter().map(|a| a / s).collect()
            };
            let mut drawn = 0;
            while drawn < FLOOR_SAMPLES {
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let d = two_k.powf(1.0 / n as f64) * rng.random_range(1.0..20.0);
                let e = unit(&mut rng);
                let x: Vec<f64> = y.iter().zip(&e).map(|(a, b)| a + d * b).collect();
                let dn = d.powi(ni);
                if dn < two_k {
                    continue;
                }
                drawn += 1;
                let along = |base: &[f64], dir: &[f64], len: f64| -> Vec<f64> {
                    base.iter().zip(dir).map(|(a, b)| a + len * b).collect()
                };
                // Triple: |x - x'|^n <= 2^-n (2^-k + |x - y|^n).
                let r2 = (2f64.powi(-ni) * (two_k + dn)).powf(1.0 / n as f64);
                let toward: Vec<f64> = e.iter().map(|v| -v).collect();
                let dx = if rng.random::<bool>() {
                    toward.clone()
                } else {
                    unit(&mut rng)
                };
                let xp = along(&x, &dx, r2 * rng.random::<f64>());
                // Quadruple: max(|x - x'|, |y - y'|)^n <= 3^-n (2^-k + |x - y|^n).
                let r3 = (3f64.powi(-ni) * (two_k + dn)).powf(1.0 / n as f64);
                let xq = along(&x, &toward, r3 * rng.random::<f64>());
                let yq = along(&y, &e, r3 * rng.random::<f64>());
                for step in 0..=10 {
                    let t = step as f64 / 10.0;
                    let pt: Vec<f64> = x.iter().zip(&xp).map(|(a, b)| a + t * (b - a)).collect();
                    let lhs = dist2(&pt, &y).sqrt().powi(ni);
                    let rhs = 2f64.powi(-ni) * dn - 2f64.powi(-ni) * two_k;
                    checked += 1;
                    if lhs < rhs - 1e-12 * dn {
                        oracle_bad += 1;
                    }
                    for step_y in 0..=10 {
                        let s = step_y as f64 / 10.0;
                        let p: Vec<f64> = (0..n)
                            .map(|i| x[i] + t * (xq[i] - x[i]) - y[i] - s * (yq[i] - y[i]))
                            .collect();
                        let lhs = p.iter().map(|v| v * v).sum::<f64>().sqrt().powi(ni);
                        let rhs = 3f64.powi(-ni) * dn - 3f64.powi(-ni) * 2.0 * two_k;
                        checked += 1;
                        if lhs < rhs - 1e-12 * dn {
                            oracle_bad += 1;
                        }
                    }
                }
            }
        }
    }
    ok &= lib_total == 0 && oracle_bad == 0;
    Verdict {
        passed: ok,
        detail: format!(
            "library violations {lib_total}, oracle violations {oracle_bad} over {checked} segment points; {FLOOR_SAMPLES} tuples per (n, k), n = 1, 2, 3, k in {{-2, 0, 3}}"
        ),
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient audit", criterion_1),
        ("kernel mass", criterion_2),
        ("AtI certification", criterion_3),
        ("Hessian bound", criterion_4),
        ("N-term rate", criterion_5),
        ("RQNN conversion", criterion_6),
        ("Gauss-Newton convergence", criterion_7),
        ("Shepp-Logan exactness", criterion_8),
        ("Jensen floors", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} {} {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
