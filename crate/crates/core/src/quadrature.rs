//! One-dimensional adaptive Gauss-Kronrod quadrature and tensor midpoint
//! rules over boxes in R^n.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. Only interior points are evaluated.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..20_000 {
        let (total, err): (f64, f64) = panels
            .iter()
            .fold((0.0, 0.0), |(t, e), p| (t + p.2 .0, e + p.2 .1));
        if !total.is_finite() {
            return Err(Error::NonIntegrable("integrand is not finite".into()));
        }
        if err <= tol {
            return Ok(total);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
    Err(Error::NonIntegrable(format!(
        "adaptive quadrature on [{a}, {b}] did not reach tolerance {tol}"
    )))
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    std::f64::consts::PI.powf(h) / libm::tgamma(h + 1.0)
}

/// Tensor midpoint rule with `cells` cells per axis over `[lo, hi]`.
pub fn midpoint_box(
    f: &(impl Fn(&[f64]) -> f64 + Sync),
    lo: &[f64],
    hi: &[f64],
    cells: usize,
) -> f64 {
    use rayon::prelude::*;
    let n = lo.len();
    let h: Vec<f64> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (b - a) / cells as f64)
        .collect();
    let cell_volume: f64 = h.iter().product();
    let outer = cells;
    let inner = cells.pow(n as u32 - 1);
    let sum: f64 = (0..outer)
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; n];
            x[0] = lo[0] + (i0 as f64 + 0.5) * h[0];
            let mut acc = 0.0;
            for flat in 0..inner {
                let mut rem = flat;
                for d in (1..n).rev() {
                    let id = rem % cells;
                    rem /= cells;
                    x[d] = lo[d] + (id as f64 + 0.5) * h[d];
                }
                acc += f(&x);
            }
            acc
        })
        .sum();
    sum * cell_volume
}

/// Tensor midpoint rule refined by halving the step until two successive
/// estimates differ by less than `tol / 10`.
pub fn midpoint_box_adaptive(
    f: &(impl Fn(&[f64]) -> f64 + Sync),
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    start_cells: usize,
    max_cells: usize,
) -> Result<f64> {
    let mut cells = start_cells.max(2);
    let mut prev = midpoint_box(f, lo, hi, cells);
    while cells * 2 <= max_cells {
        cells *= 2;
        let next = midpoint_box(f, lo, hi, cells);
        if (next - prev).abs() < tol / 10.0 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonIntegrable(format!(
        "midpoint rule did not settle to {tol} within {max_cells} cells per axis"
    )))
}
