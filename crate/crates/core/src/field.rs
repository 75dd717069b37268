//! Uniform tensor grids and functions sampled on them.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid: node `i` along axis `d` sits at
/// `origin[d] + i * spacing[d]`. Flat indices are row-major (last axis
/// fastest). Each node carries the quadrature weight `prod(spacing)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if origin.len() != spacing.len() || origin.len() != shape.len() || origin.is_empty() {
            return Err(Error::InvalidParams(
                "grid origin, spacing and shape must share a nonzero dimension".into(),
            ));
        }
        if spacing.iter().any(|h| !(*h > 0.0)) || shape.contains(&0) {
            return Err(Error::InvalidParams(
                "grid spacing must be positive and shape nonzero".into(),
            ));
        }
        Ok(Self {
            origin,
            spacing,
            shape,
        })
    }

    /// Cell-centred grid on the box `[lo, hi]` with `cells` cells per axis,
    /// i.e. the midpoint rule.
    pub fn midpoint_box(lo: &[f64], hi: &[f64], cells: usize) -> Result<Self> {
        let spacing: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) / cells as f64)
            .collect();
        let origin = lo.iter().zip(&spacing).map(|(a, h)| a + 0.5 * h).collect();
        Self::new(origin, spacing, vec![cells; lo.len()])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    /// Multi-index of a flat index.
    pub fn index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for d in (0..self.dim()).rev() {
            let i = rem % self.shape[d];
            rem /= self.shape[d];
            out[d] = self.origin[d] + i as f64 * self.spacing[d];
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(flat, &mut x);
        x
    }

    /// Row-major stride of axis `d`.
    pub fn stride(&self, d: usize) -> usize {
        self.shape[d + 1..].iter().product()
    }
}

/// A function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every node, in parallel.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let n = grid.dim();
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |x, i| {
                    grid.node_into(i, x);
                    f(x)
                },
            )
            .collect();
        Self { grid, values }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Quadrature inner product `sum(a * b) * cell_volume`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Headered CSV: one row per node, columns `x0..x{n-1},value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        let header: Vec<String> = (0..self.grid.dim())
            .map(|d| format!("x{d}"))
            .chain(std::iter::once("value".to_string()))
            .collect();
        writeln!(buf, "{}", header.join(","))?;
        let mut x = vec![0.0; self.grid.dim()];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.node_into(i, &mut x);
            let row: Vec<String> = x
                .iter()
                .chain(std::iter::once(v))
                .map(|c| fmt_f64(*c))
                .collect();
            writeln!(buf, "{}", row.join(","))?;
        }
        write_atomic(path, &buf)
    }

    /// Little-endian f64 values in row-major order plus a JSON sidecar
    /// `{origin, spacing, shape}` at `<path>.json`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        write_atomic(path, &bytes)?;
        let sidecar = serde_json::to_vec_pretty(&self.grid)?;
        write_atomic(&sidecar_path(path), &sidecar)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let grid: Grid = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        let bytes = std::fs::read(path)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(grid, values)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Floating-point text format used by every CSV writer: 17 significant
/// digits, `.` as decimal separator.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
