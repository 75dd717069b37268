//! Circular scaling kernels and wavelets built from one activation, plus
//! numerical certification of the approximation-to-the-identity (AtI)
//! inequalities they satisfy.
//!
//! With `phi(x) = C_n sigma(r^2 - |x|^2)` normalized to unit mass,
//!
//! ```text
//! S_k(x, y)   = 2^k phi(2^(k/n) (x - y))
//! psi_k(x, y) = 2^(-k/2) (S_k(x, y) - S_(k-1)(x, y))
//! ```
//!
//! The checkers sample tuples at random (plus deterministic stress points)
//! and count violations of each inequality for a supplied constant. They
//! never prove anything; they certify that no counterexample was found
//! among the tuples drawn.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{decay_constant, ActivationProfile};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, midpoint_box_adaptive, unit_ball_volume};
use crate::rng::chunk_stream;

/// Absolute tolerance used for the radial normalizing integral.
pub const NORMALIZER_TOL: f64 = 1e-13;

/// Relative slack on every inequality comparison, covering rounding in the
/// right-hand side.
pub const COMPARISON_REL_TOL: f64 = 1e-12;

/// `phi(x) = C_n sigma(r^2 - |x|^2)` together with everything needed to
/// evaluate the kernel family built from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialKernelSystem {
    pub act: ActivationProfile,
    pub r: f64,
    pub n: usize,
    pub c_n: f64,
    /// Half-width `R` of a box around the centre outside which `phi` carries
    /// less than [`NORMALIZER_TOL`] of its mass.
    pub box_half_width: f64,
}

impl RadialKernelSystem {
    pub fn new(act: ActivationProfile, r: f64, n: usize) -> Result<Self> {
        if !(r > 0.0) || n == 0 {
            return Err(Error::InvalidParams(format!(
                "need r > 0 and n >= 1 (got r = {r}, n = {n})"
            )));
        }
        let (mass, box_half_width) = radial_mass(&act, r, n, NORMALIZER_TOL)?;
        Ok(Self {
            act,
            r,
            n,
            c_n: 1.0 / mass,
            box_half_width,
        })
    }

    pub fn sigmoid(n: usize) -> Result<Self> {
        Self::new(ActivationProfile::sigmoid(), 1.0, n)
    }

    /// `C_sigma`: taken from the activation if attached, otherwise estimated.
    pub fn c_sigma(&self) -> f64 {
        self.act
            .c_sigma
            .unwrap_or_else(|| decay_constant(&self.act, self.r, self.n))
    }

    /// Attaches the empirical decay constant to the activation.
    pub fn with_decay_constant(mut self) -> Self {
        self.act = self.act.clone().with_decay_constant(self.r, self.n);
        self
    }

    /// `phi` as a function of `|x|^2`.
    #[inline]
    pub fn phi_sq(&self, t2: f64) -> f64 {
        self.c_n * self.act.value(self.r * self.r - t2)
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        self.phi_sq(sq_norm(x))
    }

    /// `S_k` as a function of `|x - y|^2`.
    #[inline]
    pub fn s_sq(&self, k: i32, d2: f64) -> f64 {
        let scale2 = 2f64.powf(2.0 * k as f64 / self.n as f64);
        2f64.powi(k) * self.phi_sq(scale2 * d2)
    }

    /// Radial profile of `phi` in the variable `t = |x|^2`.
    pub fn profile(&self) -> PhiProfile<'_> {
        PhiProfile { sys: self }
    }
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[inline]
fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `1 / C_n = integral of sigma(r^2 - |x|^2)` over R^n, via the radial
/// integral `int_0^inf sigma(r^2 - t^2) n omega_n t^(n-1) dt`.
pub fn compute_normalizer(act: &ActivationProfile, r: f64, n: usize, tol: f64) -> Result<f64> {
    radial_mass(act, r, n, tol).map(|(mass, _)| 1.0 / mass)
}

/// Mass of `sigma(r^2 - |x|^2)` and a radius beyond which the remaining mass
/// is below `tol`.
fn radial_mass(act: &ActivationProfile, r: f64, n: usize, tol: f64) -> Result<(f64, f64)> {
    let surface = n as f64 * unit_ball_volume(n);
    let density = |t: f64| act.value(r * r - t * t) * surface * t.powi(n as i32 - 1);
    let seg_tol = tol / 64.0;
    let mut total = integrate(density, 0.0, r, seg_tol)?;
    let mut segments = vec![];
    let (mut lo, mut width) = (r, 1.0);
    loop {
        let part = integrate(density, lo, lo + width, seg_tol)?;
        total += part;
        segments.push((lo, lo + width, part));
        lo += width;
        width *= 2.0;
        if part.abs() < seg_tol {
            break;
        }
        if segments.len() > 48 {
            return Err(Error::NonIntegrable(format!(
                "radial tail of sigma(r^2 - t^2) still {part:e} on [{}, {lo}]",
                lo - width / 2.0
            )));
        }
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonIntegrable(format!(
            "kernel mass {total} is not positive"
        )));
    }
    // Shrink the radius in quarter steps while the dropped tail stays small.
    let end = lo;
    let mut radius = end;
    let mut step_r = r;
    while step_r < end {
        let tail = integrate(density, step_r, end, seg_tol)?;
        if tail.abs() < tol {
            radius = step_r;
            break;
        }
        step_r += 0.25;
    }
    Ok((total, radius))
}

/// A family of kernels `S_k(x, y)` on R^n indexed by scale `k`.
pub trait Kernel: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, k: i32, x: &[f64], y: &[f64]) -> f64;
}

impl Kernel for RadialKernelSystem {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, k: i32, x: &[f64], y: &[f64]) -> f64 {
        self.s_sq(k, dist2(x, y))
    }
}

/// `S_k(x, y) = 2^k phi(2^(k/n) (x - y))`.
pub fn eval_s(sys: &RadialKernelSystem, k: i32, x: &[f64], y: &[f64]) -> f64 {
    sys.s_sq(k, dist2(x, y))
}

/// `psi_k(x, y) = 2^(-k/2) (S_k(x, y) - S_(k-1)(x, y))`.
pub fn eval_psi(sys: &RadialKernelSystem, k: i32, x: &[f64], y: &[f64]) -> f64 {
    let d2 = dist2(x, y);
    2f64.powf(-0.5 * k as f64) * (sys.s_sq(k, d2) - sys.s_sq(k - 1, d2))
}

/// A scalar profile `h_s` with two derivatives; `h(x) = h_s(|x|^2)`.
pub trait RadialProfile {
    fn d0(&self, t: f64) -> f64;
    fn d1(&self, t: f64) -> f64;
    fn d2(&self, t: f64) -> f64;
}

/// `h_s(t) = C_n sigma(r^2 - t)`, so `h(x) = phi(x)`.
#[derive(Debug, Clone, Copy)]
pub struct PhiProfile<'a> {
    sys: &'a RadialKernelSystem,
}

impl RadialProfile for PhiProfile<'_> {
    fn d0(&self, t: f64) -> f64 {
        self.sys.c_n * self.sys.act.value(self.sys.r * self.sys.r - t)
    }

    fn d1(&self, t: f64) -> f64 {
        -self.sys.c_n * self.sys.act.eval_raw(self.sys.r * self.sys.r - t, 1)
    }

    fn d2(&self, t: f64) -> f64 {
        self.sys.c_n * self.sys.act.eval_raw(self.sys.r * self.sys.r - t, 2)
    }
}

/// A profile given by three closures.
pub struct ClosureProfile<A, B, C>(pub A, pub B, pub C);

impl<A, B, C> RadialProfile for ClosureProfile<A, B, C>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    fn d0(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    fn d1(&self, t: f64) -> f64 {
        (self.1)(t)
    }

    fn d2(&self, t: f64) -> f64 {
        (self.2)(t)
    }
}

/// Spectral norm of the Hessian of `h(x) = h_s(|x|^2)`:
/// `max(|4 |x|^2 h_s'' + 2 h_s'|, |2 h_s'|)` evaluated at `|x|^2`.
///
/// The Hessian is `2 h_s' I + 4 h_s'' x x^T`, whose eigenvalues are
/// `2 h_s'` (multiplicity n-1) and `2 h_s' + 4 |x|^2 h_s''`, so the value is
/// exact for `n >= 2` and an upper bound for `n = 1`.
pub fn hessian_bound(h: &impl RadialProfile, x: &[f64]) -> f64 {
    let t = sq_norm(x);
    let d1 = h.d1(t);
    (4.0 * t * h.d2(t) + 2.0 * d1).abs().max((2.0 * d1).abs())
}

/// Constants of an AtI together with the double Lipschitz pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtIQuintuple {
    pub epsilon: f64,
    pub zeta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_rho")]
    pub c_rho: f64,
    #[serde(rename = "C_A")]
    pub c_a: f64,
    #[serde(rename = "tilde_C")]
    pub tilde_c: f64,
    #[serde(rename = "tilde_C_A")]
    pub tilde_c_a: f64,
}

impl AtIQuintuple {
    /// Validates `0 < epsilon, zeta <= 1/n`, `0 < C_A < 1`, `0 < tilde_C_A < 1/2`
    /// and positivity of the remaining constants.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        epsilon: f64,
        zeta: f64,
        c: f64,
        c_rho: f64,
        c_a: f64,
        tilde_c: f64,
        tilde_c_a: f64,
    ) -> Result<Self> {
        let inv_n = 1.0 / n as f64;
        let mut bad = vec![];
        if !(epsilon > 0.0 && epsilon <= inv_n) {
            bad.push(format!("epsilon = {epsilon} not in (0, 1/n]"));
        }
        if !(zeta > 0.0 && zeta <= inv_n) {
            bad.push(format!("zeta = {zeta} not in (0, 1/n]"));
        }
        if !(c_a > 0.0 && c_a < 1.0) {
            bad.push(format!("C_A = {c_a} not in (0, 1)"));
        }
        if !(tilde_c_a > 0.0 && tilde_c_a < 0.5) {
            bad.push(format!("tilde_C_A = {tilde_c_a} not in (0, 1/2)"));
        }
        for (name, v) in [("C", c), ("C_rho", c_rho), ("tilde_C", tilde_c)] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} = {v} must be positive and finite"));
            }
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParams(bad.join("; ")));
        }
        Ok(Self {
            epsilon,
            zeta,
            c,
            c_rho,
            c_a,
            tilde_c,
            tilde_c_a,
        })
    }

    /// The constants proved for the radial kernel family:
    /// `epsilon = zeta = 1/n`, `C_rho = 1`, `C_A = 2^-n`, `tilde_C_A = 3^-n`,
    /// `C = 2^(n+2) C_n C_sigma` (covers items i and ii) and
    /// `tilde_C = 2^3 3^(n+3) C_n C_sigma`.
    pub fn for_radial(n: usize, c_n: f64, c_sigma: f64) -> Result<Self> {
        let c = SigmoidKernelConstants::new(n, c_n, c_sigma);
        let inv_n = 1.0 / n as f64;
        Self::new(
            n,
            inv_n,
            inv_n,
            c.item2,
            1.0,
            2f64.powi(-(n as i32)),
            c.double_lipschitz,
            3f64.powi(-(n as i32)),
        )
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_tilde_c(mut self, tilde_c: f64) -> Self {
        self.tilde_c = tilde_c;
        self
    }
}

/// The three constants proved for the radial kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidKernelConstants {
    /// `C_n C_sigma`.
    pub item1: f64,
    /// `2^(n+2) C_n C_sigma`.
    pub item2: f64,
    /// `2^3 3^(n+3) C_n C_sigma`.
    pub double_lipschitz: f64,
}

impl SigmoidKernelConstants {
    pub fn new(n: usize, c_n: f64, c_sigma: f64) -> Self {
        let base = c_n * c_sigma;
        Self {
            item1: base,
            item2: 2f64.powi(n as i32 + 2) * base,
            double_lipschitz: 8.0 * 3f64.powi(n as i32 + 3) * base,
        }
    }
}

/// Where and how densely the checkers sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub k_min: i32,
    pub k_max: i32,
    /// Number of admissible random tuples (stress points come on top).
    pub samples: usize,
    pub seed: u64,
    /// Anchor points `y` are drawn uniformly from `[-b, b]^n`.
    pub anchor_half_width: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            k_min: -3,
            k_max: 8,
            samples: 10_000,
            seed: 42,
            anchor_half_width: 2.0,
        }
    }
}

impl SamplingPlan {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_k_range(mut self, k_min: i32, k_max: i32) -> Self {
        self.k_min = k_min;
        self.k_max = k_max;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k_min > self.k_max {
            return Err(Error::InvalidParams(format!(
                "empty k range [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

/// One offending tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSample {
    pub k: i32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_prime: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_prime: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub item: String,
    /// Tuples tested (admissible random draws plus stress points).
    pub samples: usize,
    pub violations: usize,
    /// Smallest constant that would have made every tested tuple pass.
    #[serde(rename = "empirical_C")]
    pub empirical_c: f64,
    pub constants_used: BTreeMap<String, f64>,
    pub seed: u64,
    /// Random draws rejected because they violated the admissibility
    /// constraint.
    pub excluded: usize,
    /// Up to [`MAX_EXAMPLES`] violating tuples.
    pub examples: Vec<ViolationSample>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const MAX_EXAMPLES: usize = 8;
const CHUNK: usize = 512;

#[derive(Default)]
struct Tally {
    samples: usize,
    violations: usize,
    excluded: usize,
    max_ratio: f64,
    examples: Vec<ViolationSample>,
}

impl Tally {
    /// Records `lhs <= c * unit` where `unit` is the right-hand side with the
    /// constant divided out and `noise` the rounding error of `lhs`.
    fn record(
        &mut self,
        c: f64,
        lhs: f64,
        unit: f64,
        noise: f64,
        sample: impl FnOnce(f64) -> ViolationSample,
    ) {
        self.samples += 1;
        if unit > 0.0 {
            self.max_ratio = self.max_ratio.max(lhs / unit);
        } else if lhs > noise {
            self.max_ratio = f64::INFINITY;
        }
        let bound = c * unit * (1.0 + COMPARISON_REL_TOL) + noise;
        if !(lhs <= bound) {
            self.violations += 1;
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(sample(c * unit));
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.samples += other.samples;
        self.violations += other.violations;
        self.excluded += other.excluded;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        for e in other.examples {
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(e);
            }
        }
        self
    }
}

/// Runs `draw` over deterministic chunks of the sample budget in parallel and
/// merges the tallies in chunk order.
fn run_chunks(
    plan: &SamplingPlan,
    name: &str,
    draw: impl Fn(&mut ChaCha20Rng, usize, &mut Tally) + Sync,
) -> Tally {
    let chunks = plan.samples.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_stream(plan.seed, name, c as u64);
            let quota = CHUNK.min(plan.samples - c * CHUNK);
            let mut t = Tally::default();
            draw(&mut rng, quota, &mut t);
            t
        })
        .collect();
    tallies.into_iter().fold(Tally::default(), Tally::merge)
}

fn random_direction(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = sq_norm(&v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

fn offset(base: &[f64], dir: &[f64], len: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + len * d).collect()
}

/// Draws `(k, y, x)`: `y` uniform in the anchor box, `x - y` with a random
/// direction and a length that is zero, log-uniform or uniform on the
/// kernel's natural scale `2^(-k/n)`.
fn draw_pair(rng: &mut ChaCha20Rng, plan: &SamplingPlan, n: usize) -> (i32, Vec<f64>, Vec<f64>) {
    let k = rng.random_range(plan.k_min..=plan.k_max);
    let b = plan.anchor_half_width;
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-b..=b)).collect();
    let scale = 2f64.powf(-(k as f64) / n as f64);
    let u: f64 = rng.random();
    let len = if u < 0.05 {
        0.0
    } else if u < 0.55 {
        scale * 10f64.powf(rng.random_range(-3.0..1.5))
    } else {
        scale * rng.random_range(0.0..4.0)
    };
    let dir = random_direction(rng, n);
    let x = offset(&y, &dir, len);
    (k, y, x)
}

/// Length of a perturbation relative to the admissible radius `rho`: exactly
/// on the boundary, log-uniform below it, or uniform up to `1.2 rho` (so some
/// draws are rejected and counted as excluded).
fn draw_perturbation(rng: &mut ChaCha20Rng, rho: f64) -> f64 {
    let u: f64 = rng.random();
    if u < 0.15 {
        rho * (1.0 - 1e-12)
    } else if u < 0.4 {
        1.2 * rho * rng.random::<f64>()
    } else {
        rho * 10f64.powf(rng.random_range(-6.0..0.0))
    }
}

/// Deterministic `|x - y|` values, in units of `2^(-k/n)`, used for stress points.
const STRESS_RADII: [f64; 16] = [
    0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 10.0, 30.0, 100.0,
];

/// `D = 2^-k + C_rho |x - y|^n`.
#[inline]
fn denom(k: i32, c_rho: f64, d: f64, n: usize) -> f64 {
    2f64.powi(-k) + c_rho * d.powi(n as i32)
}

fn constants_map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn finish(
    item: &str,
    plan: &SamplingPlan,
    t: Tally,
    constants: BTreeMap<String, f64>,
) -> InequalityReport {
    InequalityReport {
        item: item.to_string(),
        samples: t.samples,
        violations: t.violations,
        empirical_c: t.max_ratio,
        constants_used: constants,
        seed: plan.seed,
        excluded: t.excluded,
        examples: t.examples,
    }
}

/// Item (i): `|S_k(x, y)| <= C 2^(-k eps) / (2^-k + C_rho |x - y|^n)^(1 + eps)`.
pub fn check_ati_item1(
    kernel: &impl Kernel,
    quint: &AtIQuintuple,
    plan: &SamplingPlan,
) -> Result<InequalityReport> {
    plan.validate()?;
    let n = kernel.dim();
    let check = |t: &mut Tally, k: i32, x: &[f64], y: &[f64]| {
        let d = dist2(x, y).sqrt();
        let dd = denom(k, quint.c_rho, d, n);
        let unit = 2f64.powf(-(k as f64) * quint.epsilon) / dd.powf(1.0 + quint.epsilon);
        let lhs = kernel.eval(k, x, y).abs();
        t.record(quint.c, lhs, unit, 0.0, |rhs| ViolationSample {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
            x_prime: None,
            y_prime: None,
            lhs,
            rhs,
        });
    };
    let mut tally = run_chunks(plan, "ati-item1", |rng, quota, t| {
        for _ in 0..quota {
            let (k, y, x) = draw_pair(rng, plan, n);
            check(t, k, &x, &y);
        }
    });
    let mut stress = Tally::default();
    let y = vec![0.0; n];
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    for k in plan.k_min..=plan.k_max {
        let scale = 2f64.powf(-(k as f64) / n as f64);
        for rad in STRESS_RADII {
            check(&mut stress, k, &offset(&y, &e0, rad * scale), &y);
        }
    }
    tally = tally.merge(stress);
    Ok(finish(
        "item-i",
        plan,
        tally,
        constants_map(&[
            ("epsilon", quint.epsilon),
            ("C", quint.c),
            ("C_rho", quint.c_rho),
        ]),
    ))
}

/// Item (ii): for triples with `C_rho |x - x'|^n <= C_A (2^-k + C_rho |x - y|^n)`,
/// `|S_k(x, y) - S_k(x', y)| <= C (C_rho |x - x'|^n / D)^zeta 2^(-k eps) / D^(1 + eps)`.
pub fn check_ati_item2(
    kernel: &impl Kernel,
    quint: &AtIQuintuple,
    plan: &SamplingPlan,
) -> Result<InequalityReport> {
    plan.validate()?;
    let n = kernel.dim();
    let check = |t: &mut Tally, k: i32, x: &[f64], xp: &[f64], y: &[f64]| {
        let d = dist2(x, y).sqrt();
        let dx = dist2(x, xp).sqrt();
        let dd = denom(k, quint.c_rho, d, n);
        let unit = (quint.c_rho * dx.powi(n as i32) / dd).powf(quint.zeta)
            * 2f64.powf(-(k as f64) * quint.epsilon)
            / dd.powf(1.0 + quint.epsilon);
        let (a, b) = (kernel.eval(k, x, y), kernel.eval(k, xp, y));
        let lhs = (a - b).abs();
        let noise = 4.0 * f64::EPSILON * (a.abs() + b.abs());
        t.record(quint.c, lhs, unit, noise, |rhs| ViolationSample {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
            x_prime: Some(xp.to_vec()),
            y_prime: None,
            lhs,
            rhs,
        });
    };
    let admissible_radius = |k: i32, d: f64| {
        (quint.c_a * denom(k, quint.c_rho, d, n) / quint.c_rho).powf(1.0 / n as f64)
    };
    let admissible = |k: i32, d: f64, dx: f64| {
        quint.c_rho * dx.powi(n as i32) <= quint.c_a * denom(k, quint.c_rho, d, n)
    };
    let mut tally = run_chunks(plan, "ati-item2", |rng, quota, t| {
        let mut accepted = 0;
        while accepted < quota {
            let (k, y, x) = draw_pair(rng, plan, n);
            let d = dist2(&x, &y).sqrt();
            let len = draw_perturbation(rng, admissible_radius(k, d));
            if !admissible(k, d, len) {
                t.excluded += 1;
                continue;
            }
            let dir = random_direction(rng, n);
            let xp = offset(&x, &dir, len);
            if !admissible(k, d, dist2(&x, &xp).sqrt()) {
                t.excluded += 1;
                continue;
            }
            check(t, k, &x, &xp, &y);
            accepted += 1;
        }
    });
    // Stress points: x on an axis, x' at the extreme admissible distance,
    // moving straight towards or away from y.
    let mut stress = Tally::default();
    let y = vec![0.0; n];
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    for k in plan.k_min..=plan.k_max {
        let scale = 2f64.powf(-(k as f64) / n as f64);
        for rad in STRESS_RADII {
            let d = rad * scale;
            let x = offset(&y, &e0, d);
            let rho = admissible_radius(k, d) * (1.0 - 1e-12);
            for sign in [-1.0, 1.0] {
                for frac in [1.0, 0.5, 1e-3] {
                    let xp = offset(&x, &e0, sign * frac * rho);
                    check(&mut stress, k, &x, &xp, &y);
                }
            }
        }
    }
    tally = tally.merge(stress);
    Ok(finish(
        "item-ii",
        plan,
        tally,
        constants_map(&[
            ("epsilon", quint.epsilon),
            ("zeta", quint.zeta),
            ("C", quint.c),
            ("C_rho", quint.c_rho),
            ("C_A", quint.c_a),
        ]),
    ))
}

/// Double Lipschitz condition: for quadruples with
/// `C_rho max(|x - x'|^n, |y - y'|^n) <= tilde_C_A D`,
/// `|S(x,y) - S(x',y) - S(x,y') + S(x',y')|
///   <= tilde_C (C_rho |x-x'|^n / D)^zeta (C_rho |y-y'|^n / D)^zeta 2^(-k eps) / D^(1+eps)`.
pub fn check_double_lipschitz(
    kernel: &impl Kernel,
    quint: &AtIQuintuple,
    plan: &SamplingPlan,
) -> Result<InequalityReport> {
    plan.validate()?;
    let n = kernel.dim();
    let check = |t: &mut Tally, k: i32, x: &[f64], xp: &[f64], y: &[f64], yp: &[f64]| {
        let d = dist2(x, y).sqrt();
        let dd = denom(k, quint.c_rho, d, n);
        let fx = (quint.c_rho * dist2(x, xp).sqrt().powi(n as i32) / dd).powf(quint.zeta);
        let fy = (quint.c_rho * dist2(y, yp).sqrt().powi(n as i32) / dd).powf(quint.zeta);
        let unit = fx * fy * 2f64.powf(-(k as f64) * quint.epsilon) / dd.powf(1.0 + quint.epsilon);
        let s = [
            kernel.eval(k, x, y),
            kernel.eval(k, xp, y),
            kernel.eval(k, x, yp),
            kernel.eval(k, xp, yp),
        ];
        let lhs = (s[0] - s[1] - s[2] + s[3]).abs();
        let noise = 6.0 * f64::EPSILON * s.iter().map(|v| v.abs()).sum::<f64>();
        t.record(quint.tilde_c, lhs, unit, noise, |rhs| ViolationSample {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
            x_prime: Some(xp.to_vec()),
            y_prime: Some(yp.to_vec()),
            lhs,
            rhs,
        });
    };
    let admissible_radius = |k: i32, d: f64| {
        (quint.tilde_c_a * denom(k, quint.c_rho, d, n) / quint.c_rho).powf(1.0 / n as f64)
    };
    let admissible = |k: i32, d: f64, a: f64, b: f64| {
        quint.c_rho * a.max(b).powi(n as i32) <= quint.tilde_c_a * denom(k, quint.c_rho, d, n)
    };
    let mut tally = run_chunks(plan, "ati-double-lipschitz", |rng, quota, t| {
        let mut accepted = 0;
        while accepted < quota {
            let (k, y, x) = draw_pair(rng, plan, n);
            let d = dist2(&x, &y).sqrt();
            let rho = admissible_radius(k, d);
            // Second differences vanish like |dx| |dy|; keep both offsets
            // well above the rounding floor of the four kernel values.
            let lx = draw_perturbation(rng, rho).max(1e-4 * rho);
            let ly = draw_perturbation(rng, rho).max(1e-4 * rho);
            if !admissible(k, d, lx, ly) {
                t.excluded += 1;
                continue;
            }
            let (ux, uy) = (random_direction(rng, n), random_direction(rng, n));
            let (xp, yp) = (offset(&x, &ux, lx), offset(&y, &uy, ly));
            if !admissible(k, d, dist2(&x, &xp).sqrt(), dist2(&y, &yp).sqrt()) {
                t.excluded += 1;
                continue;
            }
            check(t, k, &x, &xp, &y, &yp);
            accepted += 1;
        }
    });
    let mut stress = Tally::default();
    let y = vec![0.0; n];
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    for k in plan.k_min..=plan.k_max {
        let scale = 2f64.powf(-(k as f64) / n as f64);
        for rad in STRESS_RADII {
            let d = rad * scale;
            let x = offset(&y, &e0, d);
            let rho = admissible_radius(k, d) * (1.0 - 1e-12);
            for (sx, sy) in [(-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (1.0, 1.0)] {
                for frac in [1.0, 0.3] {
                    let xp = offset(&x, &e0, sx * frac * rho);
                    let yp = offset(&y, &e0, sy * frac * rho);
                    check(&mut stress, k, &x, &xp, &y, &yp);
                }
            }
        }
    }
    tally = tally.merge(stress);
    Ok(finish(
        "double-lipschitz",
        plan,
        tally,
        constants_map(&[
            ("epsilon", quint.epsilon),
            ("zeta", quint.zeta),
            ("tilde_C", quint.tilde_c),
            ("C_rho", quint.c_rho),
            ("tilde_C_A", quint.tilde_c_a),
        ]),
    ))
}

/// Mass of `S_k(., y)` by the tensor midpoint rule over
/// `y +- R 2^(-k/n)`, refined until two successive estimates agree to `tol/10`.
pub fn kernel_mass(sys: &RadialKernelSystem, k: i32, y: &[f64], tol: f64) -> Result<f64> {
    let half = sys.box_half_width * 2f64.powf(-(k as f64) / sys.n as f64);
    let lo: Vec<f64> = y.iter().map(|c| c - half).collect();
    let hi: Vec<f64> = y.iter().map(|c| c + half).collect();
    let (start, max) = match sys.n {
        1 => (64, 1 << 20),
        2 => (32, 4096),
        _ => (16, 256),
    };
    midpoint_box_adaptive(&|x: &[f64]| eval_s(sys, k, x, y), &lo, &hi, tol, start, max)
}

/// Item (iii): `|int S_k(x, y) dx - 1| <= tol` for `y` drawn from the anchor
/// box. `empirical_C` holds the largest deviation.
pub fn check_ati_mass(
    sys: &RadialKernelSystem,
    plan: &SamplingPlan,
    anchors: usize,
    tol: f64,
) -> Result<InequalityReport> {
    plan.validate()?;
    let mut rng = crate::rng::substream(plan.seed, "ati-mass");
    let b = plan.anchor_half_width;
    let ys: Vec<Vec<f64>> = (0..anchors)
        .map(|_| (0..sys.n).map(|_| rng.random_range(-b..=b)).collect())
        .collect();
    let jobs: Vec<(i32, &Vec<f64>)> = (plan.k_min..=plan.k_max)
        .flat_map(|k| ys.iter().map(move |y| (k, y)))
        .collect();
    let masses: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|(k, y)| kernel_mass(sys, *k, y, tol * 1e-2))
        .collect();
    let mut t = Tally::default();
    for ((k, y), m) in jobs.iter().zip(masses) {
        let dev = (m? - 1.0).abs();
        t.samples += 1;
        t.max_ratio = t.max_ratio.max(dev);
        if dev > tol {
            t.violations += 1;
            if t.examples.len() < MAX_EXAMPLES {
                t.examples.push(ViolationSample {
                    k: *k,
                    x: vec![],
                    y: y.to_vec(),
                    x_prime: None,
                    y_prime: None,
                    lhs: dev,
                    rhs: tol,
                });
            }
        }
    }
    Ok(finish(
        "item-iii-mass",
        plan,
        t,
        constants_map(&[("tol", tol)]),
    ))
}

/// Outcome of [`verify_geometric_floor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricFloorReport {
    pub n: usize,
    pub k: i32,
    pub triples: usize,
    pub triple_violations: usize,
    pub quadruples: usize,
    pub quadruple_violations: usize,
    pub jensen_checks: usize,
    pub jensen_violations: usize,
    /// Smallest observed `lhs - rhs`, relative to `|x - y|^n`.
    pub min_relative_slack: f64,
    pub excluded: usize,
}

impl GeometricFloorReport {
    pub fn violations(&self) -> usize {
        self.triple_violations + self.quadruple_violations + self.jensen_violations
    }
}

/// Checks the segment floors for admissible tuples with `|x - y|^n >= 2^-k`:
///
/// ```text
/// |x + t(x' - x) - y|^n                    >= 2^-n |x - y|^n - 2^-n 2^-k
/// |x + s(x' - x) - y - t(y' - y)|^n        >= 3^-n |x - y|^n - 3^-n 2^(1-k)
/// ```
///
/// for `s, t` on a grid over `[0, 1]`, along with the scalar power-mean
/// inequalities `a^n + b^n >= 2^(1-n)(a+b)^n` and
/// `a^n + b^n + c^n >= 3^(1-n)(a+b+c)^n` they rest on. `samples` admissible
/// triples and as many quadruples are drawn.
pub fn verify_geometric_floor(n: usize, k: i32, samples: usize, seed: u64) -> GeometricFloorReport {
    let ni = n as i32;
    let two_k = 2f64.powi(-k);
    let c_a = 2f64.powi(-ni);
    let tc_a = 3f64.powi(-ni);
    let t_grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let s_grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let holds =
        |lhs: f64, rhs: f64, scale: f64| lhs >= rhs - 1e-12 * scale.max(lhs.abs()).max(rhs.abs());
    let mut rng = crate::rng::substream(seed, &format!("geometric-floor-{n}-{k}"));
    let mut report = GeometricFloorReport {
        n,
        k,
        triples: 0,
        triple_violations: 0,
        quadruples: 0,
        quadruple_violations: 0,
        jensen_checks: 0,
        jensen_violations: 0,
        min_relative_slack: f64::INFINITY,
        excluded: 0,
    };
    let scale = two_k.powf(1.0 / n as f64);
    let draw_xy = |rng: &mut ChaCha20Rng| {
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = scale * 10f64.powf(rng.random_range(0.0..2.0));
        let dir = random_direction(rng, n);
        let x = offset(&y, &dir, d);
        (x, y, d)
    };
    // Direction of a perturbation: random, or straight at y (the extremal
    // case for the floor).
    let pick_dir = |rng: &mut ChaCha20Rng, x: &[f64], y: &[f64], d: f64| -> Vec<f64> {
        if rng.random::<f64>() < 0.3 && d > 0.0 {
            y.iter().zip(x).map(|(a, b)| (a - b) / d).collect()
        } else {
            random_direction(rng, n)
        }
    };
    while report.triples < samples {
        let (x, y, d) = draw_xy(&mut rng);
        let dn = d.powi(ni);
        if dn < two_k {
            report.excluded += 1;
            continue;
        }
        let rho = (c_a * (two_k + dn)).powf(1.0 / n as f64);
        let len = draw_perturbation(&mut rng, rho);
        if len.powi(ni) > c_a * (two_k + dn) {
            report.excluded += 1;
            continue;
        }
        let dir = pick_dir(&mut rng, &x, &y, d);
        let xp = offset(&x, &dir, len);
        report.triples += 1;
        let rhs = c_a * dn - c_a * two_k;
        let mut bad = false;
        for &t in &t_grid {
            let z: Vec<f64> = x.iter().zip(&xp).map(|(a, b)| a + t * (b - a)).collect();
            let lhs = dist2(&z, &y).sqrt().powi(ni);
            report.min_relative_slack = report.min_relative_slack.min((lhs - rhs) / dn);
            bad |= !holds(lhs, rhs, dn);
        }
        report.triple_violations += bad as usize;
    }
    while report.quadruples < samples {
        let (x, y, d) = draw_xy(&mut rng);
        let dn = d.powi(ni);
        if dn < two_k {
            report.excluded += 1;
            continue;
        }
        let rho = (tc_a * (two_k + dn)).powf(1.0 / n as f64);
        let (lx, ly) = (
            draw_perturbation(&mut rng, rho),
            draw_perturbation(&mut rng, rho),
        );
        if lx.max(ly).powi(ni) > tc_a * (two_k + dn) {
            report.excluded += 1;
            continue;
        }
        let ux = pick_dir(&mut rng, &x, &y, d);
        let uy: Vec<f64> = pick_dir(&mut rng, &y, &x, d);
        let xp = offset(&x, &ux, lx);
        let yp = offset(&y, &uy, ly);
        report.quadruples += 1;
        let rhs = tc_a * dn - tc_a * 2.0 * two_k;
        let mut bad = false;
        for &s in &s_grid {
            for &t in &s_grid {
                let lhs = (0..n)
                    .map(|i| {
                        let v = x[i] + s * (xp[i] - x[i]) - y[i] - t * (yp[i] - y[i]);
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt()
                    .powi(ni);
                report.min_relative_slack = report.min_relative_slack.min((lhs - rhs) / dn);
                bad |= !holds(lhs, rhs, dn);
            }
        }
        report.quadruple_violations += bad as usize;
    }
    for _ in 0..samples {
        let (a, b, c): (f64, f64, f64) = (
            rng.random_range(0.0..4.0),
            rng.random_range(0.0..4.0),
            rng.random_range(0.0..4.0),
        );
        let two = a.powi(ni) + b.powi(ni);
        let two_rhs = 2f64.powi(1 - ni) * (a + b).powi(ni);
        let three = two + c.powi(ni);
        let three_rhs = 3f64.powi(1 - ni) * (a + b + c).powi(ni);
        report.jensen_checks += 2;
        report.jensen_violations +=
            !holds(two, two_rhs, two) as usize + !holds(three, three_rhs, three) as usize;
    }
    report
}
