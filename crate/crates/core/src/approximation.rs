//! Finite expansions in the discrete radial wavelet frame, N-term
//! approximation, and exact conversion of expansions into RQNNs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::networks::RadialParams;
use crate::wavelets::{eval_psi, RadialKernelSystem};

/// Frame element `psi_(k, y)` with centre `y = 2^(-k/n) j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WaveletAtom {
    pub k: i32,
    pub j: Vec<i64>,
}

impl WaveletAtom {
    pub fn new(k: i32, j: Vec<i64>) -> Self {
        Self { k, j }
    }

    pub fn dim(&self) -> usize {
        self.j.len()
    }
}

/// `2^(-k/n) j`.
pub fn atom_center(atom: &WaveletAtom, n: usize) -> Result<Vec<f64>> {
    if atom.j.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: atom.j.len(),
        });
    }
    let s = 2f64.powf(-(atom.k as f64) / n as f64);
    Ok(atom.j.iter().map(|&j| s * j as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTerm {
    #[serde(flatten)]
    pub atom: WaveletAtom,
    pub beta: f64,
}

/// A finite expansion `sum beta_(k,j) psi_(k, 2^(-k/n) j)` with distinct atoms.
/// Serializes as `[{k, j, beta}, ...]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameExpansion {
    terms: Vec<FrameTerm>,
}

impl FrameExpansion {
    pub fn new(terms: Vec<FrameTerm>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = terms.iter().find(|t| !seen.insert(&t.atom)) {
            return Err(Error::InvalidParams(format!(
                "atom (k = {}, j = {:?}) appears twice",
                dup.atom.k, dup.atom.j
            )));
        }
        if let Some(first) = terms.first() {
            let n = first.atom.dim();
            if let Some(bad) = terms.iter().find(|t| t.atom.dim() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: bad.atom.dim(),
                });
            }
        }
        Ok(Self { terms })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(atom: WaveletAtom, beta: f64) -> Self {
        Self {
            terms: vec![FrameTerm { atom, beta }],
        }
    }

    pub fn terms(&self) -> &[FrameTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn k_max(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.atom.k).max()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| FrameTerm {
                    atom: t.atom.clone(),
                    beta: c * t.beta,
                })
                .collect(),
        }
    }

    /// `self - other`, merging coefficients of shared atoms.
    pub fn difference(&self, other: &Self) -> Self {
        let mut map: BTreeMap<WaveletAtom, f64> = BTreeMap::new();
        for t in &self.terms {
            *map.entry(t.atom.clone()).or_default() += t.beta;
        }
        for t in &other.terms {
            *map.entry(t.atom.clone()).or_default() -= t.beta;
        }
        Self {
            terms: map
                .into_iter()
                .filter(|(_, b)| *b != 0.0)
                .map(|(atom, beta)| FrameTerm { atom, beta })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Vec<FrameTerm> = serde_json::from_str(s)?;
        Self::new(raw)
    }
}

/// Pointwise `sum beta psi_(k, y(atom))` on the grid nodes.
pub fn synthesize(
    sys: &RadialKernelSystem,
    exp: &FrameExpansion,
    grid: &Grid,
) -> Result<SampledField> {
    if grid.dim() != sys.n {
        return Err(Error::DimensionMismatch {
            expected: sys.n,
            got: grid.dim(),
        });
    }
    let atoms: Vec<(i32, Vec<f64>, f64)> = exp
        .terms
        .iter()
        .map(|t| Ok((t.atom.k, atom_center(&t.atom, sys.n)?, t.beta)))
        .collect::<Result<_>>()?;
    Ok(SampledField::from_fn(grid.clone(), |x| {
        atoms
            .iter()
            .map(|(k, y, b)| b * eval_psi(sys, *k, x, y))
            .sum()
    }))
}

/// `sum |beta|`: the cost of this particular representation, which bounds
/// the frame's L1-type norm of the synthesized function from above.
pub fn coefficient_l1(exp: &FrameExpansion) -> f64 {
    exp.terms.iter().map(|t| t.beta.abs()).sum()
}

/// Keeps the `n_terms` coefficients of largest magnitude. Ties go to the
/// lexicographically smaller `(k, j)`; the result is sorted the same way.
pub fn greedy_n_term(exp: &FrameExpansion, n_terms: usize) -> FrameExpansion {
    let mut terms = exp.terms.clone();
    terms.sort_by(|a, b| {
        b.beta
            .abs()
            .total_cmp(&a.beta.abs())
            .then_with(|| a.atom.cmp(&b.atom))
    });
    terms.truncate(n_terms);
    terms.sort_by(|a, b| a.atom.cmp(&b.atom));
    FrameExpansion { terms }
}

/// Grid spacing needed to resolve scale `k` in dimension `n`: `2^(-k/n) / 4`.
pub fn required_spacing(k: i32, n: usize) -> f64 {
    2f64.powf(-(k as f64) / n as f64) / 4.0
}

fn check_resolution(grid: &Grid, k_max: i32, n: usize) -> Result<()> {
    let required = required_spacing(k_max, n);
    if grid.max_spacing() > required {
        return Err(Error::GridTooCoarse {
            spacing: grid.max_spacing(),
            k_max,
            required,
        });
    }
    Ok(())
}

/// Quadrature L2 norm of `synthesize(full) - synthesize(approx)`.
pub fn l2_error(
    sys: &RadialKernelSystem,
    full: &FrameExpansion,
    approx: &FrameExpansion,
    grid: &Grid,
) -> Result<f64> {
    let diff = full.difference(approx);
    if let Some(k) = full.k_max().into_iter().chain(approx.k_max()).max() {
        check_resolution(grid, k, sys.n)?;
    }
    Ok(synthesize(sys, &diff, grid)?.l2_norm())
}

/// Converts an expansion into an RQNN with two neurons per atom:
///
/// ```text
/// A: alpha =  C_n beta 2^(k/2),     xi = -4^(k/n)
/// B: alpha = -C_n beta 2^(k/2 - 1), xi = -4^((k-1)/n)
/// ```
///
/// both centred at `y`, stored as `w = -2 xi y`, `theta = r^2 + xi |y|^2` so
/// that each neuron reads `sigma(r^2 + xi |x - y|^2)`.
pub fn to_rqnn(sys: &RadialKernelSystem, exp: &FrameExpansion) -> Result<RadialParams> {
    let n = sys.n;
    let r2 = sys.r * sys.r;
    let mut p = RadialParams::empty();
    for t in &exp.terms {
        let y = atom_center(&t.atom, n)?;
        let k = t.atom.k as f64;
        let y2: f64 = y.iter().map(|v| v * v).sum();
        for (alpha, xi) in [
            (
                sys.c_n * t.beta * 2f64.powf(k / 2.0),
                -(4f64.powf(k / n as f64)),
            ),
            (
                -sys.c_n * t.beta * 2f64.powf(k / 2.0 - 1.0),
                -(4f64.powf((k - 1.0) / n as f64)),
            ),
        ] {
            p.alpha.push(alpha);
            p.w.push(y.iter().map(|c| -2.0 * xi * c).collect());
            p.xi.push(xi);
            p.theta.push(r2 + xi * y2);
        }
    }
    Ok(p)
}

/// Atoms `(k, j)` with `k_min <= k <= k_max` and centre in the box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryBounds {
    pub k_min: i32,
    pub k_max: i32,
    pub center_lo: Vec<f64>,
    pub center_hi: Vec<f64>,
}

impl DictionaryBounds {
    pub fn atoms(&self) -> Vec<WaveletAtom> {
        let n = self.center_lo.len();
        let mut out = vec![];
        for k in self.k_min..=self.k_max {
            let inv = 2f64.powf(k as f64 / n as f64);
            let ranges: Vec<(i64, i64)> = self
                .center_lo
                .iter()
                .zip(&self.center_hi)
                .map(|(lo, hi)| {
                    (
                        (lo * inv - 1e-9).ceil() as i64,
                        (hi * inv + 1e-9).floor() as i64,
                    )
                })
                .collect();
            if ranges.iter().any(|(a, b)| a > b) {
                continue;
            }
            let mut j: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                out.push(WaveletAtom::new(k, j.clone()));
                for d in (0..n).rev() {
                    if j[d] < ranges[d].1 {
                        j[d] += 1;
                        for e in d + 1..n {
                            j[e] = ranges[e].0;
                        }
                        continue 'outer;
                    }
                }
                break;
            }
        }
        out
    }
}

/// Relative threshold below which matching pursuit treats the residual as
/// orthogonal to the dictionary.
pub const PURSUIT_STOP_REL: f64 = 1e-13;

/// Matching pursuit over the dictionary: `iterations` times, select the atom
/// maximizing `|<res, psi>| / |psi|`, take `beta = <res, psi> / |psi|^2`
/// and subtract. Repeated selections of one atom accumulate into a single
/// coefficient, so the result may hold fewer than `iterations` terms.
pub fn analyze_greedy(
    sys: &RadialKernelSystem,
    f: &SampledField,
    dict: &DictionaryBounds,
    iterations: usize,
) -> Result<FrameExpansion> {
    if f.grid.dim() != sys.n || dict.center_lo.len() != sys.n || dict.center_hi.len() != sys.n {
        return Err(Error::DimensionMismatch {
            expected: sys.n,
            got: f.grid.dim(),
        });
    }
    let atoms = dict.atoms();
    if atoms.is_empty() {
        return Err(Error::DictionaryEmpty);
    }
    check_resolution(&f.grid, dict.k_max, sys.n)?;
    let h = f.grid.cell_volume();
    let fields: Vec<Vec<f64>> = atoms
        .par_iter()
        .map(|a| {
            let exp = FrameExpansion::single(a.clone(), 1.0);
            synthesize(sys, &exp, &f.grid).map(|s| s.values)
        })
        .collect::<Result<_>>()?;
    let norms2: Vec<f64> = fields
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>() * h)
        .collect();
    let stop = PURSUIT_STOP_REL * f.l2_norm();
    let mut residual = f.values.clone();
    let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
    for _ in 0..iterations {
        let (best, ip, score) = fields
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                let ip = v.iter().zip(&residual).map(|(a, b)| a * b).sum::<f64>() * h;
                let score = if norms2[i] > 0.0 {
                    ip.abs() / norms2[i].sqrt()
                } else {
                    0.0
                };
                (i, ip, score)
            })
            .reduce(
                || (usize::MAX, 0.0, -1.0),
                |a, b| {
                    if b.2 > a.2 || (b.2 == a.2 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            );
        if !(score > stop) {
            break;
        }
        let beta = ip / norms2[best];
        *coeffs.entry(best).or_default() += beta;
        residual
            .iter_mut()
            .zip(&fields[best])
            .for_each(|(r, v)| *r -= beta * v);
    }
    FrameExpansion::new(
        coeffs
            .into_iter()
            .filter(|(_, b)| *b != 0.0)
            .map(|(i, beta)| FrameTerm {
                atom: atoms[i].clone(),
                beta,
            })
            .collect(),
    )
}

/// Random expansion with `count` distinct atoms drawn from `dict` and
/// coefficients `+-10^u`, `u` uniform in `[-2, 0]`.
pub fn random_expansion(
    dict: &DictionaryBounds,
    count: usize,
    rng: &mut impl Rng,
) -> Result<FrameExpansion> {
    let mut atoms = dict.atoms();
    if atoms.len() < count {
        return Err(Error::InvalidParams(format!(
            "dictionary has {} atoms, {count} requested",
            atoms.len()
        )));
    }
    atoms.shuffle(rng);
    atoms.truncate(count);
    atoms.sort();
    FrameExpansion::new(
        atoms
            .into_iter()
            .map(|atom| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                FrameTerm {
                    atom,
                    beta: sign * 10f64.powf(rng.random_range(-2.0..0.0)),
                }
            })
            .collect(),
    )
}

/// Dictionary and evaluation grid for rate experiments. The grid covers the
/// widest kernel in the expansion and resolves the finest scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSetup {
    pub dict: DictionaryBounds,
    pub grid: Grid,
}

impl RateSetup {
    /// n = 1: `k in [0, 3]`, centres in `[-2, 2]`, 1024 nodes on `[-14, 14]`.
    /// n = 2: `k in [1, 4]`, centres in `[-2, 2]^2`, 256^2 nodes on `[-8, 8]^2`.
    pub fn standard(n: usize) -> Result<Self> {
        let (k_min, k_max, half, cells) = match n {
            1 => (0, 3, 14.0, 1024),
            2 => (1, 4, 8.0, 256),
            _ => {
                return Err(Error::InvalidParams(format!(
                    "no standard rate setup for n = {n}"
                )))
            }
        };
        Ok(Self {
            dict: DictionaryBounds {
                k_min,
                k_max,
                center_lo: vec![-2.0; n],
                center_hi: vec![2.0; n],
            },
            grid: Grid::midpoint_box(&vec![-half; n], &vec![half; n], cells)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n_terms: usize,
    pub l2_error: f64,
    pub bound: f64,
}

impl RateRow {
    pub fn holds(&self) -> bool {
        self.l2_error <= self.bound
    }
}

/// Greedy N-term errors against `sum|beta| (N+1)^(-1/2)` for each `N`.
pub fn rate_table(
    sys: &RadialKernelSystem,
    exp: &FrameExpansion,
    grid: &Grid,
    ns: &[usize],
) -> Result<Vec<RateRow>> {
    let l1 = coefficient_l1(exp);
    ns.iter()
        .map(|&n_terms| {
            let approx = greedy_n_term(exp, n_terms);
            Ok(RateRow {
                n_terms,
                l2_error: l2_error(sys, exp, &approx, grid)?,
                bound: l1 / ((n_terms + 1) as f64).sqrt(),
            })
        })
        .collect()
}
