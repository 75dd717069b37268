//! The Shepp-Logan phantom as a ten-neuron GQNN with heaviside activation.
//!
//! An ellipse with centre `c`, semi-axes `(a, b)` and counter-clockwise
//! rotation `phi` is `{x : Q(x) <= 1}` with `Q(x) = (x - c)^T M (x - c)`,
//! `M = R^T diag(a^-2, b^-2) R`. Expanding `1 - Q(x)` gives a quadratic
//! decision function, so `intensity * H(1 - Q(x))` is exactly one neuron.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationProfile;
use crate::error::{Error, Result};
use crate::field::{write_atomic, Grid, SampledField};
use crate::networks::{NetworkParams, QuadraticParams};

const SHEPP_LOGAN_CSV: &str = include_str!("../fixtures/shepp_logan.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub rotation_deg: f64,
    pub intensity: f64,
}

#[derive(Debug, Deserialize)]
struct EllipseRow {
    center_x: f64,
    center_y: f64,
    a: f64,
    b: f64,
    rotation_deg: f64,
    intensity: f64,
}

impl EllipseSpec {
    pub fn new(
        center: [f64; 2],
        semi_axes: [f64; 2],
        rotation_deg: f64,
        intensity: f64,
    ) -> Result<Self> {
        if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
            return Err(Error::InvalidParams(format!(
                "semi-axes must be positive, got {semi_axes:?}"
            )));
        }
        Ok(Self {
            center,
            semi_axes,
            rotation_deg,
            intensity,
        })
    }

    /// `M = R^T D R`, row-major.
    pub fn shape_matrix(&self) -> [f64; 4] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (da, db) = (self.semi_axes[0].powi(-2), self.semi_axes[1].powi(-2));
        // R maps world offsets into the ellipse frame: rows (c, s) and (-s, c).
        let m00 = c * c * da + s * s * db;
        let m01 = c * s * (da - db);
        let m11 = s * s * da + c * c * db;
        [m00, m01, m01, m11]
    }

    /// `Q(x) = (x - c)^T M (x - c)`.
    pub fn quadratic_form(&self, x: [f64; 2]) -> f64 {
        let m = self.shape_matrix();
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        m[0] * d[0] * d[0] + 2.0 * m[1] * d[0] * d[1] + m[3] * d[1] * d[1]
    }

    /// Largest eigenvalue of `M`: `max(a^-2, b^-2)`.
    pub fn max_curvature(&self) -> f64 {
        self.semi_axes[0].powi(-2).max(self.semi_axes[1].powi(-2))
    }
}

/// One GQNN neuron `(alpha, w, A, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticNeuron {
    pub alpha: f64,
    pub w: [f64; 2],
    pub a: [f64; 4],
    pub theta: f64,
}

/// `A = -M`, `w = 2 M c`, `theta = 1 - c^T M c`, `alpha = intensity`, so the
/// neuron with heaviside activation is `intensity * 1{Q(x) <= 1}`.
pub fn ellipse_to_neuron(e: &EllipseSpec) -> QuadraticNeuron {
    let m = e.shape_matrix();
    let c = e.center;
    let mc = [m[0] * c[0] + m[1] * c[1], m[2] * c[0] + m[3] * c[1]];
    QuadraticNeuron {
        alpha: e.intensity,
        w: [2.0 * mc[0], 2.0 * mc[1]],
        a: [-m[0], -m[1], -m[2], -m[3]],
        theta: 1.0 - (c[0] * mc[0] + c[1] * mc[1]),
    }
}

/// Parses an ellipse table with columns
/// `center_x, center_y, a, b, rotation_deg, intensity`.
pub fn parse_ellipses(text: &str) -> Result<Vec<EllipseSpec>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<EllipseRow>()
        .map(|row| {
            let r = row?;
            EllipseSpec::new(
                [r.center_x, r.center_y],
                [r.a, r.b],
                r.rotation_deg,
                r.intensity,
            )
        })
        .collect()
}

pub fn load_ellipses(path: &Path) -> Result<Vec<EllipseSpec>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::FixtureMissing(format!("{}: {e}", path.display())))?;
    parse_ellipses(&text)
}

/// The ten Shepp-Logan ellipses on `[-1, 1]^2`.
pub fn shepp_logan_ellipses() -> Vec<EllipseSpec> {
    parse_ellipses(SHEPP_LOGAN_CSV).expect("bundled fixture parses")
}

pub fn ellipses_to_gqnn(ellipses: &[EllipseSpec]) -> Result<NetworkParams> {
    let neurons: Vec<QuadraticNeuron> = ellipses.iter().map(ellipse_to_neuron).collect();
    Ok(NetworkParams::Gqnn(QuadraticParams::new(
        neurons.iter().map(|q| q.alpha).collect(),
        neurons.iter().map(|q| q.w.to_vec()).collect(),
        neurons.iter().map(|q| q.a.to_vec()).collect(),
        neurons.iter().map(|q| q.theta).collect(),
    )?))
}

/// Shepp-Logan phantom as a GQNN with one neuron per ellipse.
pub fn build_shepp_logan_gqnn() -> Result<NetworkParams> {
    ellipses_to_gqnn(&shepp_logan_ellipses())
}

/// Pixel-centre grid with `resolution` cells per side on `[0, 1]^2`.
pub fn unit_square_grid(resolution: usize) -> Result<Grid> {
    Grid::midpoint_box(&[0.0, 0.0], &[1.0, 1.0], resolution)
}

/// `[0, 1]^2 -> [-1, 1]^2`.
#[inline]
pub fn to_phantom_coords(u: &[f64]) -> [f64; 2] {
    [2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0]
}

/// Samples the network at the pixel centres of `[0, 1]^2`, mapped onto the
/// phantom domain `[-1, 1]^2`.
pub fn rasterize(
    params: &NetworkParams,
    act: &ActivationProfile,
    resolution: usize,
) -> Result<SampledField> {
    if params.input_dim() != Some(2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: params.input_dim().unwrap_or(0),
        });
    }
    let grid = unit_square_grid(resolution)?;
    Ok(SampledField::from_fn(grid, |u| {
        params.eval_unchecked(act, &to_phantom_coords(u))
    }))
}

/// Nodes that lie within one pixel diagonal of some ellipse boundary, where
/// membership is not robust to a sub-pixel shift. Uses
/// `|Q(x + v) - Q(x)| <= |grad Q(x)| |v| + lambda_max |v|^2`.
pub fn boundary_band(ellipses: &[EllipseSpec], grid: &Grid) -> Vec<bool> {
    let delta = 2.0 * grid.spacing.iter().map(|h| h * h).sum::<f64>().sqrt();
    (0..grid.len())
        .map(|i| {
            let x = to_phantom_coords(&grid.node(i));
            ellipses.iter().any(|e| {
                let m = e.shape_matrix();
                let d = [x[0] - e.center[0], x[1] - e.center[1]];
                let g = [
                    2.0 * (m[0] * d[0] + m[1] * d[1]),
                    2.0 * (m[2] * d[0] + m[3] * d[1]),
                ];
                let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                (e.quadratic_form(x) - 1.0).abs()
                    <= gnorm * delta + e.max_curvature() * delta * delta
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mismatch_count: usize,
    pub mismatch_fraction: f64,
    pub max_abs_diff: f64,
    pub boundary_excluded_count: usize,
}

/// Exact (bitwise) comparison of two rasters, skipping nodes where `exclude`
/// is true.
pub fn compare_fields(
    a: &SampledField,
    b: &SampledField,
    exclude: Option<&[bool]>,
) -> Result<ComparisonReport> {
    if a.values.len() != b.values.len() || a.grid.shape != b.grid.shape {
        return Err(Error::ResolutionMismatch(a.values.len(), b.values.len()));
    }
    if let Some(mask) = exclude {
        if mask.len() != a.values.len() {
            return Err(Error::ResolutionMismatch(a.values.len(), mask.len()));
        }
    }
    let mut report = ComparisonReport {
        mismatch_count: 0,
        mismatch_fraction: 0.0,
        max_abs_diff: 0.0,
        boundary_excluded_count: 0,
    };
    let mut compared = 0usize;
    for (i, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        if exclude.is_some_and(|m| m[i]) {
            report.boundary_excluded_count += 1;
            continue;
        }
        compared += 1;
        if x.to_bits() != y.to_bits() {
            report.mismatch_count += 1;
        }
        report.max_abs_diff = report.max_abs_diff.max((x - y).abs());
    }
    if compared > 0 {
        report.mismatch_fraction = report.mismatch_count as f64 / compared as f64;
    }
    Ok(report)
}

/// Scaling used when writing a raster as 16-bit grey levels:
/// `level = round((value - min) / (max - min) * 65535)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmScaling {
    pub min: f64,
    pub max: f64,
    pub maxval: u16,
}

/// Binary 16-bit PGM (big-endian samples). Rows run from the top of the
/// square (`u1 = 1`) downwards; columns follow `u0`. The affine scaling goes
/// to a JSON sidecar at `<path>.json`.
pub fn write_pgm(field: &SampledField, path: &Path) -> Result<PgmScaling> {
    if field.grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: field.grid.dim(),
        });
    }
    let (w, h) = (field.grid.shape[0], field.grid.shape[1]);
    let min = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for row in (0..h).rev() {
        for col in 0..w {
            let v = field.values[col * field.grid.stride(0) + row];
            let level = ((v - min) / span * 65535.0).round().clamp(0.0, 65535.0) as u16;
            bytes.extend_from_slice(&level.to_be_bytes());
        }
    }
    write_atomic(path, &bytes)?;
    let scaling = PgmScaling {
        min,
        max,
        maxval: u16::MAX,
    };
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    write_atomic(Path::new(&sidecar), &serde_json::to_vec_pretty(&scaling)?)?;
    Ok(scaling)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disc_neuron() {
        let e = EllipseSpec::new([0.0, 0.0], [1.0, 1.0], 0.0, 1.0).unwrap();
        let q = ellipse_to_neuron(&e);
        assert_eq!(q.a, [-1.0, 0.0, 0.0, -1.0]);
        assert_eq!(q.w, [0.0, 0.0]);
        assert_eq!(q.theta, 1.0);
        let net = ellipses_to_gqnn(&[e]).unwrap();
        let h = ActivationProfile::heaviside();
        assert_eq!(net.eval(&h, &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(net.eval(&h, &[2.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn translated_disc() {
        let e = EllipseSpec::new([0.5, 0.0], [0.2, 0.2], 0.0, 1.0).unwrap();
        let net = ellipses_to_gqnn(&[e]).unwrap();
        assert_eq!(
            net.eval(&ActivationProfile::heaviside(), &[0.5, 0.0])
                .unwrap(),
            1.0
        );
        assert_eq!(e.quadratic_form([0.5, 0.0]), 0.0);
    }

    #[test]
    fn rotated_boundary() {
        let e = EllipseSpec::new([0.1, -0.2], [0.4, 0.2], 45.0, 1.0).unwrap();
        let (s, c) = 45f64.to_radians().sin_cos();
        for i in 0..36 {
            let t = i as f64 * std::f64::consts::PI / 18.0;
            let (lx, ly) = (0.4 * t.cos(), 0.2 * t.sin());
            let x = [0.1 + c * lx - s * ly, -0.2 + s * lx + c * ly];
            assert!((e.quadratic_form(x) - 1.0).abs() < 1e-12);
            let q = ellipse_to_neuron(&e);
            let dec = q.w[0] * x[0]
                + q.w[1] * x[1]
                + q.a[0] * x[0] * x[0]
                + 2.0 * q.a[1] * x[0] * x[1]
                + q.a[3] * x[1] * x[1]
                + q.theta;
            assert!(dec.abs() < 1e-12);
        }
    }

    #[test]
    fn fixture_has_ten_ellipses() {
        let net = build_shepp_logan_gqnn().unwrap();
        assert_eq!(net.neurons(), 10);
        assert_eq!(net.param_count(), 80);
        assert!(matches!(
            load_ellipses(Path::new("/nonexistent/table.csv")),
            Err(Error::FixtureMissing(_))
        ));
    }

    #[test]
    fn self_comparison_is_clean() {
        let net = build_shepp_logan_gqnn().unwrap();
        let a = rasterize(&net, &ActivationProfile::heaviside(), 32).unwrap();
        let rep = compare_fields(&a, &a, None).unwrap();
        assert_eq!(rep.mismatch_count, 0);
        assert_eq!(rep.max_abs_diff, 0.0);
        let b = a.scaled(1.0);
        let mut c = b.clone();
        c.values[5] += 0.25;
        let rep = compare_fields(&a, &c, None).unwrap();
        assert_eq!(rep.mismatch_count, 1);
        assert_eq!(rep.max_abs_diff, 0.25);
        let small = rasterize(&net, &ActivationProfile::heaviside(), 16).unwrap();
        assert!(matches!(
            compare_fields(&a, &small, None),
            Err(Error::ResolutionMismatch(..))
        ));
    }

    #[test]
    fn pgm_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let net = build_shepp_logan_gqnn().unwrap();
        let f = rasterize(&net, &ActivationProfile::heaviside(), 16).unwrap();
        let p = dir.path().join("p.pgm");
        let s = write_pgm(&f, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n16 16\n65535\n"));
        assert_eq!(bytes.len(), b"P5\n16 16\n65535\n".len() + 16 * 16 * 2);
        assert_eq!(s.min, 0.0);
    }
}
