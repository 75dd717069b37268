//! Shallow network families with generalized decision functions.
//!
//! Every family evaluates `sum_j alpha_j * sigma(d_j(x))` and differs only in
//! the decision function `d_j`:
//!
//! | family | decision function                   | flat layout                 | length        |
//! |--------|-------------------------------------|-----------------------------|---------------|
//! | ALNN   | `w.x + theta`                       | `[alpha; w; theta]`         | `(n+2)N`      |
//! | GQNN   | `w.x + x^T A x + theta`             | `[alpha; w; A; theta]`      | `(n^2+n+2)N`  |
//! | MCNN   | `w.x + xi x^T A x + theta`, A fixed | `[alpha; w; xi; theta]`     | `(n+3)N`      |
//! | RQNN   | `w.x + xi |x|^2 + theta`            | `[alpha; w; xi; theta]`     | `(n+3)N`      |
//! | SBQNN  | `sum_i w_i sgn(x_i) x_i^2 + theta`  | `[alpha; w; theta]`         | `(n+2)N`      |
//! | CUNN   | `sum_i w_i x_i^3 + theta`           | `[alpha; w; theta]`         | `(n+2)N`      |
//!
//! plus a four-layer scalar network (`Dnn4`) used to contrast the chain-rule
//! structure of deep derivatives with the shallow radial case.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationProfile;
use crate::error::{Error, Result};

/// Network family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Alnn,
    Gqnn,
    Mcnn,
    Rqnn,
    Sbqnn,
    Cunn,
    Dnn4,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Alnn => "ALNN",
            Family::Gqnn => "GQNN",
            Family::Mcnn => "MCNN",
            Family::Rqnn => "RQNN",
            Family::Sbqnn => "SBQNN",
            Family::Cunn => "CUNN",
            Family::Dnn4 => "DNN4",
        }
    }
}

/// Parameters shared by the families with a plain `(alpha, w, theta)` block
/// per neuron (ALNN, SBQNN, CUNN).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams {
    pub alpha: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

/// GQNN parameters. Each `a[j]` is a symmetric `n x n` matrix in row-major
/// order; only `x^T A x` is observable so the antisymmetric part is dropped
/// on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParams {
    pub alpha: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

/// MCNN parameters: the matrices are fixed, only their scale `xi` varies.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConstrainedParams {
    pub alpha: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
    pub fixed_a: Vec<Vec<f64>>,
}

/// RQNN parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialParams {
    pub alpha: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
}

/// One scalar layer of the four-layer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarLayer {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ScalarLayer {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Four-layer network on scalar inputs:
/// `x -> sum_j2 alpha2 sigma(w2 * rho(x) + theta2)` with
/// `rho(x) = sum_j1 alpha1 sigma(w1 x + theta1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepParams {
    pub layer1: ScalarLayer,
    pub layer2: ScalarLayer,
}

/// The parametrization of a network from any supported family.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkParams {
    Alnn(AffineParams),
    Gqnn(QuadraticParams),
    Mcnn(MatrixConstrainedParams),
    Rqnn(RadialParams),
    Sbqnn(AffineParams),
    Cunn(AffineParams),
    Dnn4(DeepParams),
}

fn symmetrize(a: &[f64], n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    s
}

fn quad_form(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[i * n + j] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    dot(x, x)
}

/// `sgn(0) = 0`.
#[inline]
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_lengths(
    n_neurons: usize,
    n: usize,
    alpha: &[f64],
    w: &[Vec<f64>],
    theta: &[f64],
) -> Result<()> {
    if alpha.len() != n_neurons {
        return Err(Error::DimensionMismatch {
            expected: n_neurons,
            got: alpha.len(),
        });
    }
    if theta.len() != n_neurons {
        return Err(Error::DimensionMismatch {
            expected: n_neurons,
            got: theta.len(),
        });
    }
    if w.len() != n_neurons {
        return Err(Error::DimensionMismatch {
            expected: n_neurons,
            got: w.len(),
        });
    }
    if let Some(bad) = w.iter().find(|wj| wj.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    Ok(())
}

impl AffineParams {
    pub fn new(alpha: Vec<f64>, w: Vec<Vec<f64>>, theta: Vec<f64>) -> Result<Self> {
        let n = w.first().map_or(0, Vec::len);
        check_lengths(alpha.len(), n, &alpha, &w, &theta)?;
        Ok(Self { alpha, w, theta })
    }
}

impl QuadraticParams {
    pub fn new(
        alpha: Vec<f64>,
        w: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let n = w.first().map_or(0, Vec::len);
        check_lengths(alpha.len(), n, &alpha, &w, &theta)?;
        if a.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: a.len(),
            });
        }
        if let Some(bad) = a.iter().find(|m| m.len() != n * n) {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: bad.len(),
            });
        }
        let a = a.iter().map(|m| symmetrize(m, n)).collect();
        Ok(Self { alpha, w, a, theta })
    }
}

impl MatrixConstrainedParams {
    pub fn new(
        alpha: Vec<f64>,
        w: Vec<Vec<f64>>,
        xi: Vec<f64>,
        theta: Vec<f64>,
        fixed_a: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = w.first().map_or(0, Vec::len);
        check_lengths(alpha.len(), n, &alpha, &w, &theta)?;
        if xi.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: xi.len(),
            });
        }
        if fixed_a.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: fixed_a.len(),
            });
        }
        if let Some(bad) = fixed_a.iter().find(|m| m.len() != n * n) {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: bad.len(),
            });
        }
        let fixed_a = fixed_a.iter().map(|m| symmetrize(m, n)).collect();
        Ok(Self {
            alpha,
            w,
            xi,
            theta,
            fixed_a,
        })
    }
}

impl RadialParams {
    pub fn new(alpha: Vec<f64>, w: Vec<Vec<f64>>, xi: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let n = w.first().map_or(0, Vec::len);
        check_lengths(alpha.len(), n, &alpha, &w, &theta)?;
        if xi.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: xi.len(),
            });
        }
        Ok(Self {
            alpha,
            w,
            xi,
            theta,
        })
    }

    /// A network with no neurons in dimension `n`; evaluates to zero.
    pub fn empty() -> Self {
        Self {
            alpha: vec![],
            w: vec![],
            xi: vec![],
            theta: vec![],
        }
    }

    pub fn neurons(&self) -> usize {
        self.alpha.len()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.w.first().map(Vec::len)
    }

    /// Decision function `nu_j(x) = w_j.x + xi_j |x|^2 + theta_j`.
    #[inline]
    pub fn decision(&self, j: usize, x: &[f64]) -> f64 {
        dot(&self.w[j], x) + self.xi[j] * sq_norm(x) + self.theta[j]
    }

    pub fn eval(&self, act: &ActivationProfile, x: &[f64]) -> Result<f64> {
        if let Some(n) = self.input_dim() {
            if n != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        Ok(self.eval_unchecked(act, x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, act: &ActivationProfile, x: &[f64]) -> f64 {
        let r2 = sq_norm(x);
        (0..self.neurons())
            .map(|j| {
                self.alpha[j] * act.value(dot(&self.w[j], x) + self.xi[j] * r2 + self.theta[j])
            })
            .sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut p = self.alpha.clone();
        self.w.iter().for_each(|wj| p.extend_from_slice(wj));
        p.extend_from_slice(&self.xi);
        p.extend_from_slice(&self.theta);
        p
    }

    pub fn unflatten(n: usize, neurons: usize, flat: &[f64]) -> Result<Self> {
        let expected = (n + 3) * neurons;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        let alpha = flat[..neurons].to_vec();
        let w = (0..neurons)
            .map(|j| flat[neurons + j * n..neurons + (j + 1) * n].to_vec())
            .collect();
        let off = neurons * (n + 1);
        let xi = flat[off..off + neurons].to_vec();
        let theta = flat[off + neurons..].to_vec();
        Ok(Self {
            alpha,
            w,
            xi,
            theta,
        })
    }

    /// Block of neuron `j` in the flat vector: `(alpha, w.., xi, theta)`.
    pub fn neuron_block(&self, j: usize) -> Vec<f64> {
        let mut b = vec![self.alpha[j]];
        b.extend_from_slice(&self.w[j]);
        b.push(self.xi[j]);
        b.push(self.theta[j]);
        b
    }

    /// Reorders neurons so that new neuron `i` is old neuron `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            alpha: perm.iter().map(|&j| self.alpha[j]).collect(),
            w: perm.iter().map(|&j| self.w[j].clone()).collect(),
            xi: perm.iter().map(|&j| self.xi[j]).collect(),
            theta: perm.iter().map(|&j| self.theta[j]).collect(),
        }
    }
}

impl DeepParams {
    pub fn new(layer1: ScalarLayer, layer2: ScalarLayer) -> Result<Self> {
        for l in [&layer1, &layer2] {
            if l.w.len() != l.len() || l.theta.len() != l.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.len(),
                    got: l.w.len().min(l.theta.len()),
                });
            }
        }
        Ok(Self { layer1, layer2 })
    }

    /// `rho(x) = sum_j1 alpha1 sigma(w1 x + theta1)`.
    pub fn inner(&self, act: &ActivationProfile, x: f64) -> f64 {
        let l = &self.layer1;
        (0..l.len())
            .map(|j| l.alpha[j] * act.value(l.w[j] * x + l.theta[j]))
            .sum()
    }

    pub fn eval(&self, act: &ActivationProfile, x: f64) -> f64 {
        let rho = self.inner(act, x);
        let l = &self.layer2;
        (0..l.len())
            .map(|j| l.alpha[j] * act.value(l.w[j] * rho + l.theta[j]))
            .sum()
    }

    /// Flat layout `[alpha1; alpha2; w1; w2; theta1; theta2]`.
    pub fn flatten(&self) -> Vec<f64> {
        let (a, b) = (&self.layer1, &self.layer2);
        [&a.alpha, &b.alpha, &a.w, &b.w, &a.theta, &b.theta]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    /// Position of the first-layer weight `w_{1,1}` in [`DeepParams::flatten`].
    pub fn w11_index(&self) -> usize {
        self.layer1.len() + self.layer2.len()
    }

    pub fn unflatten(n1: usize, n2: usize, flat: &[f64]) -> Result<Self> {
        let m = n1 + n2;
        if flat.len() != 3 * m {
            return Err(Error::DimensionMismatch {
                expected: 3 * m,
                got: flat.len(),
            });
        }
        let part = |k: usize, first: bool| -> Vec<f64> {
            let base = k * m + if first { 0 } else { n1 };
            let len = if first { n1 } else { n2 };
            flat[base..base + len].to_vec()
        };
        Ok(Self {
            layer1: ScalarLayer {
                alpha: part(0, true),
                w: part(1, true),
                theta: part(2, true),
            },
            layer2: ScalarLayer {
                alpha: part(0, false),
                w: part(1, false),
                theta: part(2, false),
            },
        })
    }
}

impl NetworkParams {
    pub fn family(&self) -> Family {
        match self {
            NetworkParams::Alnn(_) => Family::Alnn,
            NetworkParams::Gqnn(_) => Family::Gqnn,
            NetworkParams::Mcnn(_) => Family::Mcnn,
            NetworkParams::Rqnn(_) => Family::Rqnn,
            NetworkParams::Sbqnn(_) => Family::Sbqnn,
            NetworkParams::Cunn(_) => Family::Cunn,
            NetworkParams::Dnn4(_) => Family::Dnn4,
        }
    }

    /// Input dimension `n` (1 for `Dnn4`; `None` for an empty shallow network).
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            NetworkParams::Alnn(p) | NetworkParams::Sbqnn(p) | NetworkParams::Cunn(p) => {
                p.w.first().map(Vec::len)
            }
            NetworkParams::Gqnn(p) => p.w.first().map(Vec::len),
            NetworkParams::Mcnn(p) => p.w.first().map(Vec::len),
            NetworkParams::Rqnn(p) => p.input_dim(),
            NetworkParams::Dnn4(_) => Some(1),
        }
    }

    /// Number of neurons `N` (first + second layer for `Dnn4`).
    pub fn neurons(&self) -> usize {
        match self {
            NetworkParams::Alnn(p) | NetworkParams::Sbqnn(p) | NetworkParams::Cunn(p) => {
                p.alpha.len()
            }
            NetworkParams::Gqnn(p) => p.alpha.len(),
            NetworkParams::Mcnn(p) => p.alpha.len(),
            NetworkParams::Rqnn(p) => p.neurons(),
            NetworkParams::Dnn4(p) => p.layer1.len() + p.layer2.len(),
        }
    }

    /// Length `n*` of the flat parametrization vector.
    pub fn param_count(&self) -> usize {
        let n = self.input_dim().unwrap_or(0);
        let big_n = self.neurons();
        match self.family() {
            Family::Alnn | Family::Sbqnn | Family::Cunn => (n + 2) * big_n,
            Family::Gqnn => (n * n + n + 2) * big_n,
            Family::Mcnn | Family::Rqnn => (n + 3) * big_n,
            Family::Dnn4 => 3 * big_n,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            NetworkParams::Alnn(p) | NetworkParams::Sbqnn(p) | NetworkParams::Cunn(p) => {
                let mut v = p.alpha.clone();
                p.w.iter().for_each(|w| v.extend_from_slice(w));
                v.extend_from_slice(&p.theta);
                v
            }
            NetworkParams::Gqnn(p) => {
                let mut v = p.alpha.clone();
                p.w.iter().for_each(|w| v.extend_from_slice(w));
                p.a.iter().for_each(|a| v.extend_from_slice(a));
                v.extend_from_slice(&p.theta);
                v
            }
            NetworkParams::Mcnn(p) => {
                let mut v = p.alpha.clone();
                p.w.iter().for_each(|w| v.extend_from_slice(w));
                v.extend_from_slice(&p.xi);
                v.extend_from_slice(&p.theta);
                v
            }
            NetworkParams::Rqnn(p) => p.flatten(),
            NetworkParams::Dnn4(p) => p.flatten(),
        }
    }

    /// Same structure (family, dimensions, fixed matrices) with the trainable
    /// parameters replaced by `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        let n = self.input_dim().unwrap_or(0);
        let m = self.neurons();
        let take_w = |off: usize| -> Vec<Vec<f64>> {
            (0..m)
                .map(|j| flat[off + j * n..off + (j + 1) * n].to_vec())
                .collect()
        };
        Ok(match self {
            NetworkParams::Alnn(_) | NetworkParams::Sbqnn(_) | NetworkParams::Cunn(_) => {
                let p = AffineParams {
                    alpha: flat[..m].to_vec(),
                    w: take_w(m),
                    theta: flat[m * (n + 1)..].to_vec(),
                };
                match self.family() {
                    Family::Alnn => NetworkParams::Alnn(p),
                    Family::Sbqnn => NetworkParams::Sbqnn(p),
                    _ => NetworkParams::Cunn(p),
                }
            }
            NetworkParams::Gqnn(_) => {
                let a_off = m * (n + 1);
                let a = (0..m)
                    .map(|j| symmetrize(&flat[a_off + j * n * n..a_off + (j + 1) * n * n], n))
                    .collect();
                NetworkParams::Gqnn(QuadraticParams {
                    alpha: flat[..m].to_vec(),
                    w: take_w(m),
                    a,
                    theta: flat[a_off + m * n * n..].to_vec(),
                })
            }
            NetworkParams::Mcnn(old) => {
                let off = m * (n + 1);
                NetworkParams::Mcnn(MatrixConstrainedParams {
                    alpha: flat[..m].to_vec(),
                    w: take_w(m),
                    xi: flat[off..off + m].to_vec(),
                    theta: flat[off + m..].to_vec(),
                    fixed_a: old.fixed_a.clone(),
                })
            }
            NetworkParams::Rqnn(_) => NetworkParams::Rqnn(RadialParams::unflatten(n, m, flat)?),
            NetworkParams::Dnn4(p) => {
                NetworkParams::Dnn4(DeepParams::unflatten(p.layer1.len(), p.layer2.len(), flat)?)
            }
        })
    }

    /// `Psi[p](x)`.
    pub fn eval(&self, act: &ActivationProfile, x: &[f64]) -> Result<f64> {
        if let Some(n) = self.input_dim() {
            if n != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        Ok(self.eval_unchecked(act, x))
    }

    pub(crate) fn eval_unchecked(&self, act: &ActivationProfile, x: &[f64]) -> f64 {
        match self {
            NetworkParams::Alnn(p) => (0..p.alpha.len())
                .map(|j| p.alpha[j] * act.value(dot(&p.w[j], x) + p.theta[j]))
                .sum(),
            NetworkParams::Gqnn(p) => (0..p.alpha.len())
                .map(|j| {
                    p.alpha[j] * act.value(dot(&p.w[j], x) + quad_form(&p.a[j], x) + p.theta[j])
                })
                .sum(),
            NetworkParams::Mcnn(p) => (0..p.alpha.len())
                .map(|j| {
                    p.alpha[j]
                        * act.value(
                            dot(&p.w[j], x) + p.xi[j] * quad_form(&p.fixed_a[j], x) + p.theta[j],
                        )
                })
                .sum(),
            NetworkParams::Rqnn(p) => p.eval_unchecked(act, x),
            NetworkParams::Sbqnn(p) => (0..p.alpha.len())
                .map(|j| {
                    let d: f64 = p.w[j]
                        .iter()
                        .zip(x)
                        .map(|(w, xi)| w * sgn(*xi) * xi * xi)
                        .sum();
                    p.alpha[j] * act.value(d + p.theta[j])
                })
                .sum(),
            NetworkParams::Cunn(p) => (0..p.alpha.len())
                .map(|j| {
                    let d: f64 = p.w[j].iter().zip(x).map(|(w, xi)| w * xi * xi * xi).sum();
                    p.alpha[j] * act.value(d + p.theta[j])
                })
                .sum(),
            NetworkParams::Dnn4(p) => p.eval(act, x[0]),
        }
    }

    /// Fourth-order central finite-difference gradient with respect to the
    /// flat parameters, for families without an analytic gradient.
    pub fn fd_gradient(&self, act: &ActivationProfile, x: &[f64], step: f64) -> Result<Vec<f64>> {
        act.require_order(1)?;
        let base = self.flatten();
        let mut p = base.clone();
        (0..base.len())
            .map(|i| {
                let d = central_difference(
                    |h| {
                        p[i] = base[i] + h;
                        self.with_flat(&p)?.eval(act, x)
                    },
                    step,
                );
                p[i] = base[i];
                d
            })
            .collect()
    }
}

/// `(-f(2h) + 8 f(h) - 8 f(-h) + f(-2h)) / 12h`.
fn central_difference(mut f: impl FnMut(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
}

/// Analytic gradient of an RQNN with respect to `[alpha; w; xi; theta]`:
/// `sigma(nu_s)`, `alpha_s sigma'(nu_s) x_t`, `alpha_s sigma'(nu_s) |x|^2`
/// and `alpha_s sigma'(nu_s)` respectively.
pub fn grad_rqnn(params: &RadialParams, act: &ActivationProfile, x: &[f64]) -> Result<Vec<f64>> {
    act.require_order(2)?;
    let m = params.neurons();
    let n = x.len();
    if let Some(d) = params.input_dim() {
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: n,
            });
        }
    }
    let mut g = vec![0.0; (n + 3) * m];
    grad_rqnn_into(params, act, x, &mut g);
    Ok(g)
}

pub(crate) fn grad_rqnn_into(
    params: &RadialParams,
    act: &ActivationProfile,
    x: &[f64],
    g: &mut [f64],
) {
    let m = params.neurons();
    let n = x.len();
    let r2 = sq_norm(x);
    for s in 0..m {
        let nu = dot(&params.w[s], x) + params.xi[s] * r2 + params.theta[s];
        let common = params.alpha[s] * act.eval_raw(nu, 1);
        g[s] = act.eval_raw(nu, 0);
        for t in 0..n {
            g[m + s * n + t] = common * x[t];
        }
        g[m * (n + 1) + s] = common * r2;
        g[m * (n + 2) + s] = common;
    }
}

/// Derivative of the four-layer network with respect to the first-layer
/// weight `w_{1,1}`:
/// `alpha_{1,1} x sum_j2 alpha_{j2,2} w_{j2,2} sigma'(w_{j2,2} rho + theta_{j2,2}) sigma'(w_{1,1} x + theta_{1,1})`.
pub fn grad_dnn_w11(params: &DeepParams, act: &ActivationProfile, x: f64) -> Result<f64> {
    act.require_order(2)?;
    let l1 = &params.layer1;
    let l2 = &params.layer2;
    if l1.is_empty() {
        return Err(Error::InvalidParams("first layer has no neurons".into()));
    }
    let rho = params.inner(act, x);
    let outer: f64 = (0..l2.len())
        .map(|j| l2.alpha[j] * l2.w[j] * act.eval_raw(l2.w[j] * rho + l2.theta[j], 1))
        .sum();
    Ok(l1.alpha[0] * x * outer * act.eval_raw(l1.w[0] * x + l1.theta[0], 1))
}

/// `nu(x) = xi |x - center|^2 + kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCanonicalForm {
    pub center: Vec<f64>,
    pub kappa: f64,
    pub xi: f64,
}

impl RadialCanonicalForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.xi * d2 + self.kappa
    }
}

/// Rewrites `xi |x|^2 + w.x + theta` as `xi |x - y|^2 + kappa` with
/// `y = -w / (2 xi)` and `kappa = theta - |w|^2 / (4 xi)`.
pub fn complete_square(w_hat: &[f64], xi: f64, theta: f64) -> Result<RadialCanonicalForm> {
    if xi == 0.0 {
        return Err(Error::ZeroCurvature);
    }
    Ok(RadialCanonicalForm {
        center: w_hat.iter().map(|w| -w / (2.0 * xi)).collect(),
        kappa: theta - sq_norm(w_hat) / (4.0 * xi),
        xi,
    })
}

/// Per-neuron status of the sphere constraint `xi >= 0, kappa <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronConstraint {
    pub passes: bool,
    /// `xi == 0`: the neuron is affine and passes vacuously.
    pub affine: bool,
    pub kappa: Option<f64>,
}

pub fn check_rqnn_constraint(params: &RadialParams) -> Vec<NeuronConstraint> {
    (0..params.neurons())
        .map(|j| {
            let xi = params.xi[j];
            if xi == 0.0 {
                return NeuronConstraint {
                    passes: true,
                    affine: true,
                    kappa: None,
                };
            }
            let kappa = complete_square(&params.w[j], xi, params.theta[j])
                .expect("xi is nonzero")
                .kappa;
            NeuronConstraint {
                passes: xi >= 0.0 && kappa <= 0.0,
                affine: false,
                kappa: Some(kappa),
            }
        })
        .collect()
}

/// JSON form of [`NetworkParams`]:
/// `{family, n, N, alpha, w, A, xi, theta, fixed_A, layer1, layer2}` with
/// only the fields relevant to the family present. Matrices are nested row
/// arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub family: Family,
    pub n: usize,
    #[serde(rename = "N")]
    pub neurons: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, rename = "fixed_A", skip_serializing_if = "Option::is_none")]
    pub fixed_a: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer1: Option<ScalarLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer2: Option<ScalarLayer>,
}

fn to_rows(m: &[f64], n: usize) -> Vec<Vec<f64>> {
    m.chunks(n.max(1)).map(<[f64]>::to_vec).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

impl From<&NetworkParams> for NetworkDocument {
    fn from(p: &NetworkParams) -> Self {
        let mut doc = NetworkDocument {
            family: p.family(),
            n: p.input_dim().unwrap_or(0),
            neurons: p.neurons(),
            alpha: None,
            w: None,
            a: None,
            xi: None,
            theta: None,
            fixed_a: None,
            layer1: None,
            layer2: None,
        };
        let n = doc.n;
        match p {
            NetworkParams::Alnn(q) | NetworkParams::Sbqnn(q) | NetworkParams::Cunn(q) => {
                doc.alpha = Some(q.alpha.clone());
                doc.w = Some(q.w.clone());
                doc.theta = Some(q.theta.clone());
            }
            NetworkParams::Gqnn(q) => {
                doc.alpha = Some(q.alpha.clone());
                doc.w = Some(q.w.clone());
                doc.a = Some(q.a.iter().map(|m| to_rows(m, n)).collect());
                doc.theta = Some(q.theta.clone());
            }
            NetworkParams::Mcnn(q) => {
                doc.alpha = Some(q.alpha.clone());
                doc.w = Some(q.w.clone());
                doc.xi = Some(q.xi.clone());
                doc.theta = Some(q.theta.clone());
                doc.fixed_a = Some(q.fixed_a.iter().map(|m| to_rows(m, n)).collect());
            }
            NetworkParams::Rqnn(q) => {
                doc.alpha = Some(q.alpha.clone());
                doc.w = Some(q.w.clone());
                doc.xi = Some(q.xi.clone());
                doc.theta = Some(q.theta.clone());
            }
            NetworkParams::Dnn4(q) => {
                doc.layer1 = Some(q.layer1.clone());
                doc.layer2 = Some(q.layer2.clone());
            }
        }
        doc
    }
}

impl TryFrom<NetworkDocument> for NetworkParams {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        let missing = |f: &str| {
            Error::InvalidParams(format!("{} document lacks field {f}", doc.family.as_str()))
        };
        let alpha = doc.alpha.clone().unwrap_or_default();
        let w = doc.w.clone().unwrap_or_default();
        let theta = doc.theta.clone().unwrap_or_default();
        let params = match doc.family {
            Family::Alnn | Family::Sbqnn | Family::Cunn => {
                if doc.alpha.is_none() || doc.w.is_none() || doc.theta.is_none() {
                    return Err(missing("alpha/w/theta"));
                }
                let p = AffineParams::new(alpha, w, theta)?;
                match doc.family {
                    Family::Alnn => NetworkParams::Alnn(p),
                    Family::Sbqnn => NetworkParams::Sbqnn(p),
                    _ => NetworkParams::Cunn(p),
                }
            }
            Family::Gqnn => {
                let a = doc.a.as_ref().ok_or_else(|| missing("A"))?;
                NetworkParams::Gqnn(QuadraticParams::new(
                    alpha,
                    w,
                    a.iter().map(|m| from_rows(m)).collect(),
                    theta,
                )?)
            }
            Family::Mcnn => {
                let xi = doc.xi.clone().ok_or_else(|| missing("xi"))?;
                let fa = doc.fixed_a.as_ref().ok_or_else(|| missing("fixed_A"))?;
                NetworkParams::Mcnn(MatrixConstrainedParams::new(
                    alpha,
                    w,
                    xi,
                    theta,
                    fa.iter().map(|m| from_rows(m)).collect(),
                )?)
            }
            Family::Rqnn => {
                let xi = doc.xi.clone().ok_or_else(|| missing("xi"))?;
                NetworkParams::Rqnn(RadialParams::new(alpha, w, xi, theta)?)
            }
            Family::Dnn4 => {
                let l1 = doc.layer1.clone().ok_or_else(|| missing("layer1"))?;
                let l2 = doc.layer2.clone().ok_or_else(|| missing("layer2"))?;
                NetworkParams::Dnn4(DeepParams::new(l1, l2)?)
            }
        };
        if params.neurons() != doc.neurons {
            return Err(Error::DimensionMismatch {
                expected: doc.neurons,
                got: params.neurons(),
            });
        }
        if params.neurons() > 0 && params.input_dim() != Some(doc.n) {
            return Err(Error::DimensionMismatch {
                expected: doc.n,
                got: params.input_dim().unwrap_or(0),
            });
        }
        Ok(params)
    }
}

impl NetworkParams {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// Random RQNN: `alpha, w ~ N(0, 1)`, `xi ~ -U(0.5, 2)`, `theta ~ U(0.5, 2)`,
/// i.e. bumps of moderate width near the origin.
pub fn random_radial_params(n: usize, neurons: usize, rng: &mut impl Rng) -> RadialParams {
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let alpha = (0..neurons).map(|_| normal()).collect();
    let w = (0..neurons)
        .map(|_| (0..n).map(|_| normal()).collect())
        .collect();
    RadialParams {
        alpha,
        w,
        xi: (0..neurons).map(|_| -rng.random_range(0.5..2.0)).collect(),
        theta: (0..neurons).map(|_| rng.random_range(0.5..2.0)).collect(),
    }
}

/// Random four-layer network with all weights and biases `N(0, 1)`.
pub fn random_deep_params(n1: usize, n2: usize, rng: &mut impl Rng) -> DeepParams {
    let mut layer = |m: usize| ScalarLayer {
        alpha: (0..m).map(|_| StandardNormal.sample(rng)).collect(),
        w: (0..m).map(|_| StandardNormal.sample(rng)).collect(),
        theta: (0..m).map(|_| StandardNormal.sample(rng)).collect(),
    };
    let layer1 = layer(n1);
    let layer2 = layer(n2);
    DeepParams { layer1, layer2 }
}

/// Outcome of comparing analytic derivatives against central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    pub family: Family,
    pub samples: usize,
    /// `max |g - g_fd|_inf / |g_fd|_inf` over the samples.
    pub max_rel_err: f64,
    pub step: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Audits [`grad_rqnn`] on `samples` random networks with `neurons` neurons
/// on `R^n`, each at a random `x` in `[-1, 1]^n`.
pub fn audit_rqnn_gradient(
    act: &ActivationProfile,
    n: usize,
    neurons: usize,
    samples: usize,
    step: f64,
    rng: &mut impl Rng,
) -> Result<GradientAudit> {
    act.require_order(2)?;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let p = random_radial_params(n, neurons, rng);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = grad_rqnn(&p, act, &x)?;
        let fd = NetworkParams::Rqnn(p).fd_gradient(act, &x, step)?;
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(inf_norm(&diff) / inf_norm(&fd));
    }
    Ok(GradientAudit {
        family: Family::Rqnn,
        samples,
        max_rel_err: worst,
        step,
    })
}

/// Audits [`grad_dnn_w11`] on `samples` random `(n1, n2)` networks, each at
/// a random `x` with `0.5 <= |x| <= 2` (the derivative vanishes at `x = 0`).
pub fn audit_dnn_gradient(
    act: &ActivationProfile,
    n1: usize,
    n2: usize,
    samples: usize,
    step: f64,
    rng: &mut impl Rng,
) -> Result<GradientAudit> {
    act.require_order(2)?;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let p = random_deep_params(n1, n2, rng);
        let x = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let g = grad_dnn_w11(&p, act, x)?;
        let idx = p.w11_index();
        let mut flat = p.flatten();
        let base = flat[idx];
        let fd = central_difference(
            |h| {
                flat[idx] = base + h;
                Ok(DeepParams::unflatten(n1, n2, &flat)?.eval(act, x))
            },
            step,
        )?;
        worst = worst.max((g - fd).abs() / fd.abs());
    }
    Ok(GradientAudit {
        family: Family::Dnn4,
        samples,
        max_rel_err: worst,
        step,
    })
}
