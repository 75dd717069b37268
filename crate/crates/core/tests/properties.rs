//! Property tests for invariants that must hold for arbitrary inputs.

use proptest::prelude::*;

use radnet::activation::{decay_samples, verify_decay};
use radnet::approximation::{synthesize, FrameExpansion, FrameTerm, WaveletAtom};
use radnet::field::{Grid, SampledField};
use radnet::inverse::{apply_operator, LinearOperator};
use radnet::networks::{
    complete_square, AffineParams, DeepParams, MatrixConstrainedParams, QuadraticParams,
    ScalarLayer,
};
use radnet::wavelets::{eval_s, RadialKernelSystem};
use radnet::{ActivationProfile, NetworkParams, RadialParams};

const N_MAX: usize = 3;

fn vecf(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

/// `(n, neurons, alpha, w, xi, theta)` with `xi < 0`.
fn radial() -> impl Strategy<Value = (usize, RadialParams)> {
    (1..=N_MAX, 1usize..5).prop_flat_map(|(n, m)| {
        (
            vecf(m, -2.0, 2.0),
            vecf(m * n, -2.0, 2.0),
            vecf(m, -3.0, -0.1),
            vecf(m, -1.0, 2.0),
        )
            .prop_map(move |(alpha, w, xi, theta)| {
                let w = w.chunks(n).map(<[f64]>::to_vec).collect();
                (n, RadialParams::new(alpha, w, xi, theta).unwrap())
            })
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vecf(n, -2.0, 2.0)
}

/// One network of every family with matching shapes.
fn all_families(n: usize, p: &RadialParams, a: &[f64]) -> Vec<NetworkParams> {
    let m = p.neurons();
    let affine = AffineParams::new(p.alpha.clone(), p.w.clone(), p.theta.clone()).unwrap();
    let mats: Vec<Vec<f64>> = (0..m)
        .map(|j| a[j * n * n..(j + 1) * n * n].to_vec())
        .collect();
    vec![
        NetworkParams::Alnn(affine.clone()),
        NetworkParams::Gqnn(
            QuadraticParams::new(p.alpha.clone(), p.w.clone(), mats.clone(), p.theta.clone())
                .unwrap(),
        ),
        NetworkParams::Mcnn(
            MatrixConstrainedParams::new(
                p.alpha.clone(),
                p.w.clone(),
                p.xi.clone(),
                p.theta.clone(),
                mats,
            )
            .unwrap(),
        ),
        NetworkParams::Rqnn(p.clone()),
        NetworkParams::Sbqnn(affine.clone()),
        NetworkParams::Cunn(affine),
    ]
}

fn identity(n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_round_trips_for_every_family((n, p) in radial(), a in vecf(4 * N_MAX * N_MAX, -1.0, 1.0)) {
        for net in all_families(n, &p, &a) {
            let flat = net.flatten();
            prop_assert_eq!(flat.len(), net.param_count());
            let back = net.with_flat(&flat).unwrap();
            prop_assert_eq!(back.flatten(), flat);
            let text = net.to_json().unwrap();
            prop_assert_eq!(NetworkParams::from_json(&text).unwrap(), net);
        }
    }

    #[test]
    fn neuron_permutation_leaves_output_unchanged((n, p) in radial(), x in point(N_MAX), rot in 0usize..5) {
        let x = &x[..n];
        let m = p.neurons();
        let perm: Vec<usize> = (0..m).map(|j| (j + rot) % m).collect();
        let act = ActivationProfile::sigmoid();
        let a = p.eval(&act, x).unwrap();
        let b = p.permuted(&perm).eval(&act, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
    }

    #[test]
    fn gqnn_with_zero_matrix_is_alnn((n, p) in radial(), x in point(N_MAX)) {
        let x = &x[..n];
        let act = ActivationProfile::sigmoid();
        let m = p.neurons();
        let alnn = NetworkParams::Alnn(AffineParams::new(p.alpha.clone(), p.w.clone(), p.theta.clone()).unwrap());
        let gqnn = NetworkParams::Gqnn(
            QuadraticParams::new(p.alpha.clone(), p.w.clone(), vec![vec![0.0; n * n]; m], p.theta.clone()).unwrap(),
        );
        prop_assert!((alnn.eval(&act, x).unwrap() - gqnn.eval(&act, x).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn mcnn_with_identity_is_rqnn((n, p) in radial(), x in point(N_MAX)) {
        let x = &x[..n];
        let act = ActivationProfile::sigmoid();
        let mcnn = NetworkParams::Mcnn(
            MatrixConstrainedParams::new(
                p.alpha.clone(),
                p.w.clone(),
                p.xi.clone(),
                p.theta.clone(),
                vec![identity(n); p.neurons()],
            )
            .unwrap(),
        );
        let rqnn = NetworkParams::Rqnn(p);
        prop_assert!((mcnn.eval(&act, x).unwrap() - rqnn.eval(&act, x).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn completed_square_matches_decision_function(
        w in vecf(N_MAX, -3.0, 3.0),
        xi in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64],
        theta in -2.0..2.0f64,
        x in point(N_MAX),
    ) {
        let form = complete_square(&w, xi, theta).unwrap();
        let direct = xi * x.iter().map(|v| v * v).sum::<f64>() + w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + theta;
        let scale = 1.0 + direct.abs() + form.kappa.abs();
        prop_assert!((form.eval(&x) - direct).abs() <= 1e-12 * scale);
    }

    #[test]
    fn kernels_are_scale_covariant(n in 1..=N_MAX, k in -3i32..6, x in point(N_MAX), y in point(N_MAX)) {
        let sys = RadialKernelSystem::sigmoid(n).unwrap();
        let (x, y) = (&x[..n], &y[..n]);
        let c = 2f64.powf(1.0 / n as f64);
        let xs: Vec<f64> = x.iter().map(|v| c * v).collect();
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let lhs = eval_s(&sys, k + 1, x, y);
        let rhs = 2.0 * eval_s(&sys, k, &xs, &ys);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
    }

    #[test]
    fn kernels_are_translation_invariant(n in 1..=N_MAX, k in -3i32..6, x in point(N_MAX), y in point(N_MAX), t in point(N_MAX)) {
        let sys = RadialKernelSystem::sigmoid(n).unwrap();
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(&t).map(|(a, b)| a + b).collect() };
        let (x, y) = (&x[..n], &y[..n]);
        let a = eval_s(&sys, k, x, y);
        let b = eval_s(&sys, k, &shift(x), &shift(y));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn operators_are_linear(
        a in vecf(32, -1.0, 1.0),
        b in vecf(32, -1.0, 1.0),
        s in -3.0..3.0f64,
        which in 0usize..3,
    ) {
        let grid = Grid::midpoint_box(&[0.0], &[1.0], 32).unwrap();
        let op = match which {
            0 => LinearOperator::identity(grid.clone()),
            1 => LinearOperator::cumulative_integration(grid.clone()),
            _ => LinearOperator::gaussian_blur(grid.clone(), 0.07).unwrap(),
        };
        let fa = SampledField::new(grid.clone(), a).unwrap();
        let fb = SampledField::new(grid, b).unwrap();
        let combined = apply_operator(&op, &fa.add(&fb.scaled(s)).unwrap()).unwrap();
        let separate = apply_operator(&op, &fa).unwrap().add(&apply_operator(&op, &fb).unwrap().scaled(s)).unwrap();
        for (u, v) in combined.values.iter().zip(&separate.values) {
            prop_assert!((u - v).abs() <= 1e-13);
        }
    }

    #[test]
    fn synthesis_is_linear(b1 in -2.0..2.0f64, b2 in -2.0..2.0f64, k1 in 0i32..3, k2 in 0i32..3, j1 in -3i64..3, j2 in -3i64..3) {
        prop_assume!((k1, j1) != (k2, j2));
        let sys = RadialKernelSystem::sigmoid(1).unwrap();
        let grid = Grid::midpoint_box(&[-8.0], &[8.0], 256).unwrap();
        let t1 = FrameTerm { atom: WaveletAtom::new(k1, vec![j1]), beta: b1 };
        let t2 = FrameTerm { atom: WaveletAtom::new(k2, vec![j2]), beta: b2 };
        let both = synthesize(&sys, &FrameExpansion::new(vec![t1.clone(), t2.clone()]).unwrap(), &grid).unwrap();
        let one = synthesize(&sys, &FrameExpansion::new(vec![t1]).unwrap(), &grid).unwrap();
        let two = synthesize(&sys, &FrameExpansion::new(vec![t2]).unwrap(), &grid).unwrap();
        for ((s, a), b) in both.values.iter().zip(&one.values).zip(&two.values) {
            prop_assert!((s - a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn deep_network_flatten_round_trips(v in vecf(15, -2.0, 2.0)) {
        let layer = |o: usize, m: usize| ScalarLayer {
            alpha: v[o..o + m].to_vec(),
            w: v[o + m..o + 2 * m].to_vec(),
            theta: v[o + 2 * m..o + 3 * m].to_vec(),
        };
        let p = DeepParams::new(layer(0, 3), layer(9, 2)).unwrap();
        let flat = p.flatten();
        prop_assert_eq!(DeepParams::unflatten(3, 2, &flat).unwrap(), p.clone());
        prop_assert_eq!(flat[p.w11_index()], p.layer1.w[0]);
    }

    #[test]
    fn decay_estimate_grows_with_the_sample_set(extra in vecf(20, 0.0, 12.0), n in 1..=N_MAX, i in 0u8..3) {
        let act = ActivationProfile::sigmoid();
        let base = decay_samples(1.0, n, i);
        let mut more = base.clone();
        more.extend(extra);
        let a = verify_decay(&act, 1.0, n, i, &base).empirical_c;
        let b = verify_decay(&act, 1.0, n, i, &more).empirical_c;
        prop_assert!(b >= a);
    }
}

#[test]
fn sigmoid_derivatives_are_uniformly_bounded() {
    use rand::{Rng, SeedableRng};
    let act = ActivationProfile::sigmoid();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut sup = [0.0f64; 3];
    for _ in 0..100_000 {
        let s = rng.random_range(-40.0..40.0);
        for (i, m) in sup.iter_mut().enumerate() {
            *m = m.max(act.eval(s, i as u8).unwrap().abs());
        }
    }
    assert!(sup[0] <= 1.0 && sup[1] <= 0.25 && sup[2] <= 0.1, "{sup:?}");
}
