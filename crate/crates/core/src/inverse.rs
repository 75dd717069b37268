//! Linear inverse problems on the RQNN manifold: solve `F(Psi[p]) = y` for
//! the parameters `p` with the Gauss-Newton iteration
//! `p <- p - J(p)^+ (F(Psi[p]) - y)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationProfile;
use crate::error::{Error, Result};
use crate::field::{fmt_f64, write_atomic, Grid, SampledField};
use crate::networks::{check_rqnn_constraint, grad_rqnn_into, RadialParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OperatorKind {
    Identity,
    /// Running midpoint sum `h * sum_(m <= i) f_m` along the first axis.
    CumulativeIntegration,
    /// Separable convolution with a sampled Gaussian of standard deviation
    /// `width`, normalized to unit sum and zero-padded at the borders.
    GaussianBlur {
        width: f64,
    },
    /// Row-major `range.len() x domain.len()` matrix.
    UserMatrix {
        data: Vec<f64>,
    },
}

/// A linear map between sampled fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOperator {
    pub kind: OperatorKind,
    pub domain: Grid,
    pub range: Grid,
}

impl LinearOperator {
    pub fn identity(grid: Grid) -> Self {
        Self {
            kind: OperatorKind::Identity,
            range: grid.clone(),
            domain: grid,
        }
    }

    pub fn cumulative_integration(grid: Grid) -> Self {
        Self {
            kind: OperatorKind::CumulativeIntegration,
            range: grid.clone(),
            domain: grid,
        }
    }

    pub fn gaussian_blur(grid: Grid, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParams(format!(
                "blur width must be positive, got {width}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::GaussianBlur { width },
            range: grid.clone(),
            domain: grid,
        })
    }

    pub fn user_matrix(domain: Grid, range: Grid, matrix: &DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != range.len() || matrix.ncols() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: range.len() * domain.len(),
                got: matrix.len(),
            });
        }
        let data = (0..matrix.nrows())
            .flat_map(|i| (0..matrix.ncols()).map(move |j| matrix[(i, j)]))
            .collect();
        Ok(Self {
            kind: OperatorKind::UserMatrix { data },
            domain,
            range,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            OperatorKind::Identity => "identity",
            OperatorKind::CumulativeIntegration => "cumulative-integration",
            OperatorKind::GaussianBlur { .. } => "gaussian-blur",
            OperatorKind::UserMatrix { .. } => "user-matrix",
        }
    }

    /// Applies the operator to raw node values on the domain grid.
    fn apply_values(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.domain;
        match &self.kind {
            OperatorKind::Identity => v.to_vec(),
            OperatorKind::CumulativeIntegration => {
                let stride = g.stride(0);
                let h = g.spacing[0];
                let mut out = v.to_vec();
                for i in 1..g.shape[0] {
                    for r in 0..stride {
                        out[i * stride + r] = out[(i - 1) * stride + r] + v[i * stride + r];
                    }
                }
                out.iter_mut().for_each(|x| *x *= h);
                out
            }
            OperatorKind::GaussianBlur { width } => {
                let mut cur = v.to_vec();
                for d in 0..g.dim() {
                    let h = g.spacing[d];
                    let m = (4.0 * width / h).ceil() as isize;
                    let mut taps: Vec<f64> = (-m..=m)
                        .map(|i| (-0.5 * (i as f64 * h / width).powi(2)).exp())
                        .collect();
                    let s: f64 = taps.iter().sum();
                    taps.iter_mut().for_each(|t| *t /= s);
                    let stride = g.stride(d);
                    let len = g.shape[d] as isize;
                    let mut next = vec![0.0; cur.len()];
                    for (flat, out) in next.iter_mut().enumerate() {
                        let i = ((flat / stride) % g.shape[d]) as isize;
                        let base = flat as isize - i * stride as isize;
                        let mut acc = 0.0;
                        for (t, w) in taps.iter().enumerate() {
                            let src = i + t as isize - m;
                            if (0..len).contains(&src) {
                                acc += w * cur[(base + src * stride as isize) as usize];
                            }
                        }
                        *out = acc;
                    }
                    cur = next;
                }
                cur
            }
            OperatorKind::UserMatrix { data } => {
                let cols = g.len();
                data.chunks(cols)
                    .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                    .collect()
            }
        }
    }
}

/// `F f`.
pub fn apply_operator(op: &LinearOperator, f: &SampledField) -> Result<SampledField> {
    if f.grid != op.domain {
        return Err(Error::GridMismatch(format!(
            "field grid differs from the domain of the {} operator",
            op.name()
        )));
    }
    SampledField::new(op.range.clone(), op.apply_values(&f.values))
}

/// `F(Psi[p])` with `Psi[p]` sampled on the operator's domain grid.
pub fn forward_map(
    op: &LinearOperator,
    params: &RadialParams,
    act: &ActivationProfile,
) -> Result<SampledField> {
    if let Some(n) = params.input_dim() {
        if n != op.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.domain.dim(),
                got: n,
            });
        }
    }
    let sampled = SampledField::from_fn(op.domain.clone(), |x| params.eval_unchecked(act, x));
    apply_operator(op, &sampled)
}

/// Jacobian of [`forward_map`] with respect to the flat parameters
/// `[alpha; w; xi; theta]`: column `s` is `F` applied to the sampled
/// `s`-th component of the analytic RQNN gradient.
pub fn assemble_jacobian(
    op: &LinearOperator,
    params: &RadialParams,
    act: &ActivationProfile,
) -> Result<DMatrix<f64>> {
    act.require_order(2)?;
    let n = op.domain.dim();
    if let Some(d) = params.input_dim() {
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d,
            });
        }
    }
    let cols = (n + 3) * params.neurons();
    let nodes = op.domain.len();
    // Row-major gradients per node.
    let grads: Vec<f64> = (0..nodes)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = op.domain.node(i);
            let mut g = vec![0.0; cols];
            grad_rqnn_into(params, act, &x, &mut g);
            g
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..cols)
        .into_par_iter()
        .map(|s| {
            let col: Vec<f64> = (0..nodes).map(|i| grads[i * cols + s]).collect();
            op.apply_values(&col)
        })
        .collect();
    Ok(DMatrix::from_fn(op.range.len(), cols, |i, j| columns[j][i]))
}

/// Result of one Moore-Penrose solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PinvStep {
    pub step: DVector<f64>,
    pub rank: usize,
    /// Every singular value fell below the cutoff; `step` is zero.
    pub zero_rank: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// Singular values below `svd_rel_tol * sigma_max` count as zero.
pub const DEFAULT_SVD_REL_TOL: f64 = 1e-10;

/// Minimum-norm least-squares solution `J^+ residual` by SVD.
pub fn pinv_step(j: &DMatrix<f64>, residual: &DVector<f64>, svd_rel_tol: f64) -> Result<PinvStep> {
    if j.is_empty() {
        return Err(Error::InvalidParams("empty Jacobian".into()));
    }
    if residual.len() != j.nrows() {
        return Err(Error::DimensionMismatch {
            expected: j.nrows(),
            got: residual.len(),
        });
    }
    let svd = j.clone().svd(true, true);
    let (u, vt) = (
        svd.u.as_ref().expect("u requested"),
        svd.v_t.as_ref().expect("v_t requested"),
    );
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = svd_rel_tol * sigma_max;
    let mut step = DVector::zeros(j.ncols());
    let mut rank = 0;
    for (i, &s) in sv.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coef = u.column(i).dot(residual) / s;
            step += vt.row(i).transpose() * coef;
        }
    }
    Ok(PinvStep {
        step,
        rank,
        zero_rank: rank == 0,
        sigma_min,
        sigma_max,
    })
}

/// `J^+` as a matrix, with the same truncation as [`pinv_step`].
pub fn pseudo_inverse(j: &DMatrix<f64>, svd_rel_tol: f64) -> DMatrix<f64> {
    let svd = j.clone().svd(true, true);
    let (u, vt) = (
        svd.u.as_ref().expect("u requested"),
        svd.v_t.as_ref().expect("v_t requested"),
    );
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(j.ncols(), j.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > svd_rel_tol * sigma_max && s > 0.0 {
            out += vt.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceDiagnostic {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub condition: f64,
    pub rank_at_tol: usize,
}

/// Singular value summary of `J`; finite-grid stand-in for linear
/// independence of the neuron functions and their derivatives.
pub fn independence_diagnostic(j: &DMatrix<f64>, svd_rel_tol: f64) -> IndependenceDiagnostic {
    let sv = j.singular_values();
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    IndependenceDiagnostic {
        sigma_min,
        sigma_max,
        condition: sigma_max / sigma_min,
        rank_at_tol: sv
            .iter()
            .filter(|&&s| s > svd_rel_tol * sigma_max && s > 0.0)
            .count(),
    }
}

/// `min over permutations pi of |p - pi(p_ref)|`, where permutations act on
/// whole neuron blocks `(alpha_j, w_j, xi_j, theta_j)`.
pub fn matched_param_error(p: &RadialParams, reference: &RadialParams) -> Result<f64> {
    if p.neurons() != reference.neurons() {
        return Err(Error::DimensionMismatch {
            expected: reference.neurons(),
            got: p.neurons(),
        });
    }
    let m = p.neurons();
    let blocks: Vec<Vec<f64>> = (0..m).map(|j| p.neuron_block(j)).collect();
    let refs: Vec<Vec<f64>> = (0..m).map(|j| reference.neuron_block(j)).collect();
    let cost: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| {
            refs.iter()
                .map(|r| b.iter().zip(r).map(|(x, y)| (x - y) * (x - y)).sum())
                .collect()
        })
        .collect();
    let total = if m <= 6 {
        exhaustive_assignment(&cost)
    } else {
        hungarian(&cost)
    };
    Ok(total.sqrt())
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if row == cost.len() {
            *best = acc;
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    if cost.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(m^3)).
pub fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let m = cost.len();
    if m == 0 {
        return 0.0;
    }
    let (mut u, mut v) = (vec![0.0; m + 1], vec![0.0; m + 1]);
    let mut way = vec![0usize; m + 1];
    let mut matched = vec![0usize; m + 1];
    for i in 1..=m {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).map(|j| cost[matched[j] - 1][j - 1]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub p: Vec<f64>,
    pub residual_norm: f64,
    pub param_error: Option<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rank: usize,
    /// Norm of the step taken from this iterate (0 for the final one).
    pub step_norm: f64,
    /// Per neuron: does the iterate satisfy `xi >= 0, kappa <= 0`? Reported
    /// only; the iteration does not enforce it.
    pub constraint_ok: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussNewtonTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl GaussNewtonTrace {
    pub fn param_errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.param_error).collect()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// First iteration whose parameter error is below `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.param_error.is_some_and(|e| e < tol))
            .map(|r| r.iteration)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,residual_norm,param_error,sigma_min,sigma_max,step_norm\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration,
                fmt_f64(r.residual_norm),
                r.param_error.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.sigma_min),
                fmt_f64(r.sigma_max),
                fmt_f64(r.step_norm)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussNewtonOptions {
    pub max_iter: usize,
    pub svd_rel_tol: f64,
    /// Stop once the residual L2 norm falls below this.
    pub stop_tol: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            svd_rel_tol: DEFAULT_SVD_REL_TOL,
            stop_tol: 1e-13,
        }
    }
}

/// Ratio `sigma_min / sigma_max` below which the Jacobian is declared
/// rank-collapsed.
pub const RANK_COLLAPSE_RATIO: f64 = 1e-14;

/// Gauss-Newton iteration for `F(Psi[p]) = y` from `p0`. With `reference`
/// given, each record carries the neuron-permutation-matched distance to it.
pub fn gauss_newton(
    op: &LinearOperator,
    act: &ActivationProfile,
    y: &SampledField,
    p0: &RadialParams,
    opts: &GaussNewtonOptions,
    reference: Option<&RadialParams>,
) -> Result<GaussNewtonTrace> {
    act.require_order(2)?;
    if y.grid != op.range {
        return Err(Error::GridMismatch(
            "data do not live on the operator's range grid".into(),
        ));
    }
    if p0.flatten().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(
            "starting parameters must be finite".into(),
        ));
    }
    let n = op.domain.dim();
    let m = p0.neurons();
    let weight = y.grid.cell_volume().sqrt();
    let y_norm = y.l2_norm();
    let mut p = p0.clone();
    let mut trace = GaussNewtonTrace {
        records: vec![],
        converged: false,
    };
    for k in 0..=opts.max_iter {
        let res_field = forward_map(op, &p, act)?.sub(y)?;
        let residual_norm = res_field.l2_norm();
        let param_error = reference.map(|r| matched_param_error(&p, r)).transpose()?;
        let jac = assemble_jacobian(op, &p, act)?;
        let diag = independence_diagnostic(&jac, opts.svd_rel_tol);
        let mut record = IterationRecord {
            iteration: k,
            p: p.flatten(),
            residual_norm,
            param_error,
            sigma_min: diag.sigma_min * weight,
            sigma_max: diag.sigma_max * weight,
            rank: diag.rank_at_tol,
            step_norm: 0.0,
            constraint_ok: check_rqnn_constraint(&p).iter().map(|c| c.passes).collect(),
        };
        if !residual_norm.is_finite() {
            trace.records.push(record);
            return Err(Error::Diverged {
                iteration: k,
                trace: Box::new(trace),
            });
        }
        if residual_norm < opts.stop_tol {
            trace.records.push(record);
            trace.converged = true;
            return Ok(trace);
        }
        if k >= 5 {
            let earlier = trace.records[k - 5].residual_norm;
            if residual_norm > 10.0 * earlier && residual_norm > 1e-8 * (1.0 + y_norm) {
                trace.records.push(record);
                return Err(Error::Diverged {
                    iteration: k,
                    trace: Box::new(trace),
                });
            }
        }
        if diag.sigma_min < RANK_COLLAPSE_RATIO * diag.sigma_max {
            trace.records.push(record);
            let ratio = diag.sigma_min / diag.sigma_max;
            return Err(Error::RankCollapse {
                iteration: k,
                ratio,
                trace: Box::new(trace),
            });
        }
        if k == opts.max_iter {
            trace.records.push(record);
            break;
        }
        let r = DVector::from_vec(res_field.values);
        let step = pinv_step(&jac, &r, opts.svd_rel_tol)?.step;
        record.step_norm = step.norm();
        trace.records.push(record);
        let flat: Vec<f64> = p
            .flatten()
            .iter()
            .zip(step.iter())
            .map(|(a, s)| a - s)
            .collect();
        p = RadialParams::unflatten(n, m, &flat)?;
    }
    Ok(trace)
}

/// Least-squares fit of `log e_(k+1) = log C + q log e_k` over the
/// contraction phase: consecutive pairs with `e_(k+1) < e_k` and
/// `e_(k+1) > floor`. Returns `(q, C, pairs used)`, or `None` with fewer than
/// two pairs.
pub fn fit_convergence_order(errors: &[f64], floor: f64) -> Option<(f64, f64, usize)> {
    let pairs: Vec<(f64, f64)> = errors
        .windows(2)
        .filter(|w| w[1] < w[0] && w[1] > floor && w[0] > 0.0)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let len = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let q = sxy / sxx;
    Some((q, (my - q * mx).exp(), pairs.len()))
}

/// Two-neuron network on `[0, 1]` used for the convergence experiments:
/// sharp radial bumps centred at 0.3 and 0.7.
pub fn reference_bumps() -> RadialParams {
    let neuron =
        |alpha: f64, xi: f64, c: f64, kappa: f64| (alpha, -2.0 * xi * c, xi, kappa + xi * c * c);
    let (a1, w1, x1, t1) = neuron(1.0, -30.0, 0.3, 2.0);
    let (a2, w2, x2, t2) = neuron(-0.8, -25.0, 0.7, 1.5);
    RadialParams {
        alpha: vec![a1, a2],
        w: vec![vec![w1], vec![w2]],
        xi: vec![x1, x2],
        theta: vec![t1, t2],
    }
}

/// `p` moved by `size` in flat-parameter space along a standard-normal
/// random direction.
pub fn perturb_params(p: &RadialParams, size: f64, rng: &mut impl Rng) -> RadialParams {
    let flat = p.flatten();
    let dir: Vec<f64> = flat.iter().map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let moved: Vec<f64> = flat
        .iter()
        .zip(&dir)
        .map(|(a, d)| a + size * d / norm)
        .collect();
    RadialParams::unflatten(p.input_dim().unwrap_or(1), p.neurons(), &moved).expect("same shape")
}
