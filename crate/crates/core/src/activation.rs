//! Scalar activation functions with derivatives up to order two, and the
//! sampled decay check that the radial kernel construction relies on.
//!
//! Every smooth activation here has uniformly bounded derivatives through
//! order two. The heaviside step is only meant for exact indicator networks
//! (the Shepp-Logan phantom) and refuses derivative queries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tabulated activation interpolated by a natural cubic spline.
///
/// Outside the knot range the value is held constant and both derivatives
/// vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableActivation {
    knots: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    second: Vec<f64>,
}

impl TableActivation {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: knots.len(),
                got: values.len(),
            });
        }
        if knots.len() < 2 {
            return Err(Error::InvalidParams(
                "activation table needs at least two knots".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(
                "activation table knots must be strictly increasing".into(),
            ));
        }
        let second = natural_spline_second_derivatives(&knots, &values);
        Ok(Self {
            knots,
            values,
            second,
        })
    }

    /// A table holding `value` at every knot, i.e. a constant activation.
    pub fn constant(value: f64) -> Self {
        Self::new(vec![-1.0, 1.0], vec![value, value]).expect("two increasing knots")
    }

    fn ensure_second(&mut self) {
        if self.second.len() != self.knots.len() {
            self.second = natural_spline_second_derivatives(&self.knots, &self.values);
        }
    }

    fn eval(&self, s: f64, order: u8) -> f64 {
        let n = self.knots.len();
        if s <= self.knots[0] {
            return if order == 0 { self.values[0] } else { 0.0 };
        }
        if s >= self.knots[n - 1] {
            return if order == 0 { self.values[n - 1] } else { 0.0 };
        }
        let i = match self.knots.partition_point(|&k| k <= s) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let h = x1 - x0;
        let a = (x1 - s) / h;
        let b = (s - x0) / h;
        match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            1 => {
                (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
                    + (3.0 * b * b - 1.0) * h * m1 / 6.0
            }
            _ => a * m0 + b * m1,
        }
    }
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let c = h1 / 6.0;
        let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = c / denom;
        d_prime[i] = (d - a * d_prime[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// Which scalar function an [`ActivationProfile`] evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    /// `1 / (1 + exp(-s))`.
    Sigmoid,
    /// Standard normal CDF; its left tail decays like a Gaussian.
    GaussianTail,
    /// `1{s >= 0}`, closed at zero.
    Heaviside,
    UserTable(TableActivation),
}

/// A scalar activation with derivative evaluators and decay metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub kind: ActivationKind,
    /// Empirical decay constant, filled in by [`ActivationProfile::with_decay_constant`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_sigma: Option<f64>,
}

impl ActivationProfile {
    pub fn new(kind: ActivationKind) -> Self {
        let kind = match kind {
            ActivationKind::UserTable(mut t) => {
                t.ensure_second();
                ActivationKind::UserTable(t)
            }
            k => k,
        };
        Self {
            kind,
            c_sigma: None,
        }
    }

    pub fn sigmoid() -> Self {
        Self::new(ActivationKind::Sigmoid)
    }

    pub fn gaussian_tail() -> Self {
        Self::new(ActivationKind::GaussianTail)
    }

    pub fn heaviside() -> Self {
        Self::new(ActivationKind::Heaviside)
    }

    pub fn table(table: TableActivation) -> Self {
        Self::new(ActivationKind::UserTable(table))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::GaussianTail => "gaussian-tail",
            ActivationKind::Heaviside => "heaviside",
            ActivationKind::UserTable(_) => "user-table",
        }
    }

    /// Highest derivative order that may be queried: 0 for heaviside, 2 otherwise.
    pub fn smoothness_order(&self) -> u8 {
        match self.kind {
            ActivationKind::Heaviside => 0,
            _ => 2,
        }
    }

    /// Fails with [`Error::DerivativeUnavailable`] unless derivatives up to
    /// `order` exist.
    pub fn require_order(&self, order: u8) -> Result<()> {
        if order > self.smoothness_order() {
            Err(Error::DerivativeUnavailable {
                activation: self.name(),
                order,
                smoothness: self.smoothness_order(),
            })
        } else {
            Ok(())
        }
    }

    /// `sigma^(order)(s)` for `order` in `0..=2`.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::DerivativeUnavailable {
                activation: self.name(),
                order,
                smoothness: self.smoothness_order(),
            });
        }
        self.require_order(order)?;
        Ok(self.eval_raw(s, order))
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        self.eval_raw(s, 0)
    }

    /// Unchecked evaluation; callers guarantee `order <= smoothness_order()`.
    #[inline]
    pub(crate) fn eval_raw(&self, s: f64, order: u8) -> f64 {
        match &self.kind {
            ActivationKind::Sigmoid => {
                let (p, q) = sigmoid_pair(s);
                match order {
                    0 => p,
                    1 => p * q,
                    _ => p * q * (q - p),
                }
            }
            ActivationKind::GaussianTail => {
                let pdf = (-0.5 * s * s).exp() / (2.0 * std::f64::consts::PI).sqrt();
                match order {
                    0 => 0.5 * libm::erfc(-s / std::f64::consts::SQRT_2),
                    1 => pdf,
                    _ => -s * pdf,
                }
            }
            ActivationKind::Heaviside => {
                if order == 0 {
                    if s >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.0
                }
            }
            ActivationKind::UserTable(t) => t.eval(s, order),
        }
    }

    /// Attach the empirical decay constant for radius `r` in dimension `n`
    /// (see [`decay_constant`]).
    pub fn with_decay_constant(mut self, r: f64, n: usize) -> Self {
        self.c_sigma = Some(decay_constant(&self, r, n));
        self
    }
}

/// `(sigmoid(s), 1 - sigmoid(s))`, both computed without cancellation.
#[inline]
fn sigmoid_pair(s: f64) -> (f64, f64) {
    if s >= 0.0 {
        let e = (-s).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = s.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// Result of [`verify_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub holds: bool,
    pub empirical_c: f64,
}

/// Tolerance on how much the last tenth of the sampled range may raise the
/// running maximum.
pub const DECAY_STABILIZATION_TOL: f64 = 1e-12;

fn decay_weight(t: f64, n: usize, i: u8) -> f64 {
    let n_f = n as f64;
    (1.0 + t.abs().powi(n as i32)).powf(1.0 + (2.0 * i as f64 + 1.0) / n_f)
}

/// Samples `|sigma^(i)(r^2 - t^2)| (1 + |t|^n)^(1 + (2i+1)/n)` and reports its
/// maximum. The bound is taken to hold when the maximum is finite and the
/// samples in the last 10% of the `t` range raise it by no more than
/// [`DECAY_STABILIZATION_TOL`].
pub fn verify_decay(
    act: &ActivationProfile,
    r: f64,
    n: usize,
    i: u8,
    t_samples: &[f64],
) -> DecayReport {
    if i > act.smoothness_order() || t_samples.is_empty() {
        return DecayReport {
            holds: false,
            empirical_c: f64::INFINITY,
        };
    }
    let t_max = t_samples.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let cutoff = 0.9 * t_max;
    let mut early = 0.0f64;
    let mut overall = 0.0f64;
    for &t in t_samples {
        let v = act.eval_raw(r * r - t * t, i).abs() * decay_weight(t, n, i);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        overall = overall.max(v);
        if t.abs() < cutoff {
            early = early.max(v);
        }
    }
    DecayReport {
        holds: overall.is_finite() && overall - early <= DECAY_STABILIZATION_TOL,
        empirical_c: overall,
    }
}

/// Upper end `T` of the sampling range, chosen so that
/// `(1 + T^n)^(-1 - (2i+1)/n) < 1e-9`.
pub fn decay_horizon(n: usize, i: u8) -> f64 {
    let p = 1.0 + (2.0 * i as f64 + 1.0) / n as f64;
    let base = 1e9f64.powf(1.0 / p) - 1.0;
    1.01 * base.powf(1.0 / n as f64)
}

/// Default `t` samples for [`verify_decay`]: a fine uniform grid around the
/// transition region, a geometric sweep out to [`decay_horizon`], and a dense
/// block in the last tenth of the range.
pub fn decay_samples(r: f64, n: usize, i: u8) -> Vec<f64> {
    let horizon = decay_horizon(n, i);
    let near = (r + 8.0).min(horizon);
    let mut t: Vec<f64> = (0..=((near / 1e-3) as usize))
        .map(|k| k as f64 * 1e-3)
        .collect();
    if horizon > near {
        let steps = 2000;
        let ratio = (horizon / near).powf(1.0 / steps as f64);
        t.extend((1..=steps).map(|k| near * ratio.powi(k)));
        t.extend((0..200).map(|k| horizon * (0.9 + 0.1 * k as f64 / 200.0)));
    }
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup();
    t
}

/// Estimate of `C_sigma`: the largest empirical constant over derivative
/// orders 0..=smoothness_order, each refined by a golden-section search
/// around its best sample.
pub fn decay_constant(act: &ActivationProfile, r: f64, n: usize) -> f64 {
    (0..=act.smoothness_order())
        .map(|i| {
            let samples = decay_samples(r, n, i);
            let report = verify_decay(act, r, n, i, &samples);
            if !report.empirical_c.is_finite() {
                return f64::INFINITY;
            }
            let f = |t: f64| act.eval_raw(r * r - t * t, i).abs() * decay_weight(t, n, i);
            let best = samples
                .iter()
                .copied()
                .max_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
                .unwrap_or(0.0);
            let refined = golden_max(f, (best - 2e-3).max(0.0), best + 2e-3);
            report.empirical_c.max(refined)
        })
        .fold(0.0, f64::max)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(0.5 * (a + b)).max(f(a)).max(f(b))
}
