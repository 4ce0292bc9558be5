//! Uniform grids, sampled snapshots and the plain-text table format used for
//! initial data, snapshots, masks and surface dumps.
//!
//! A table file starts with `#`-prefixed header lines carrying `n`, `N`, `L`
//! and `t`, then one column-name line, then one row per grid sample in
//! row-major order (last axis fastest). Coordinates come first, the sampled
//! value(s) last. Floats are written in shortest round-trip form so a
//! written table reads back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::neumaier_sum;
use crate::solver::RunDiagnostics;

/// Uniform, origin-centred tensor grid on `[-L, L]^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::param("n", format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::param("half_width", format!("must be positive, got {half_width}")));
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(Error::param(
                "points",
                format!("points per axis must be odd and >= 3, got {points}"),
            ));
        }
        Ok(Self {
            dim,
            half_width,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    /// Total number of samples, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of axis index `i`; exactly antisymmetric about the centre.
    pub fn coord(&self, i: usize) -> f64 {
        let c = (self.points - 1) / 2;
        (i as f64 - c as f64) * self.spacing()
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Per-axis indices of a flat index (unused axes are 0).
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.points, flat % self.points],
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.points + idx[1],
        }
    }

    /// Physical location of a sample; only the first `dim` entries are used.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(flat);
        match self.dim {
            1 => [self.coord(i), 0.0],
            _ => [self.coord(i), self.coord(j)],
        }
    }

    pub fn radius(&self, flat: usize) -> f64 {
        let p = self.point(flat);
        p[..self.dim].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Axis neighbours (2n-neighbourhood) of a flat index inside the grid.
    pub fn neighbors(&self, flat: usize) -> impl Iterator<Item = usize> + '_ {
        let idx = self.multi_index(flat);
        let last = self.points - 1;
        (0..self.dim).flat_map(move |axis| {
            let mut out = [None, None];
            if idx[axis] > 0 {
                let mut lo = idx;
                lo[axis] -= 1;
                out[0] = Some(self.flat_index(lo));
            }
            if idx[axis] < last {
                let mut hi = idx;
                hi[axis] += 1;
                out[1] = Some(self.flat_index(hi));
            }
            out.into_iter().flatten()
        })
    }

    /// True for samples on the outermost layer of the grid.
    pub fn is_edge(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        idx[..self.dim]
            .iter()
            .any(|&i| i == 0 || i == self.points - 1)
    }

    /// Same domain at half the spacing; every sample of `self` is kept.
    pub fn refined(&self) -> Result<Grid> {
        Grid::new(self.dim, self.half_width, 2 * self.points - 1)
    }
}

/// One nonnegative snapshot `u(., t)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInitialData(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, t, values })
    }

    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                f(&p[..grid.dim()])
            })
            .collect();
        Self { grid, t, values }
    }

    pub fn constant(grid: Grid, t: f64, c: f64) -> Self {
        Self {
            grid,
            t,
            values: vec![c; grid.len()],
        }
    }

    /// Discrete mass `sum u_i dx^n`.
    pub fn mass(&self) -> f64 {
        neumaier_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Centered-difference gradient of `g(u)` at a sample, one-sided on the
    /// outer layer.
    pub(crate) fn gradient_of(&self, values: &[f64], flat: usize) -> [f64; 2] {
        let grid = &self.grid;
        let dx = grid.spacing();
        let idx = grid.multi_index(flat);
        let last = grid.points_per_axis() - 1;
        let mut g = [0.0; 2];
        for (axis, slot) in g.iter_mut().enumerate().take(grid.dim()) {
            let at = |k: usize| {
                let mut i = idx;
                i[axis] = k;
                values[grid.flat_index(i)]
            };
            let i = idx[axis];
            *slot = if i == 0 {
                (at(1) - at(0)) / dx
            } else if i == last {
                (at(last) - at(last - 1)) / dx
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * dx)
            };
        }
        g
    }

    /// Standard (2n+1)-point Laplacian; `None` on the outer layer.
    pub(crate) fn laplacian_of(&self, values: &[f64], flat: usize) -> Option<f64> {
        let grid = &self.grid;
        if grid.is_edge(flat) {
            return None;
        }
        let dx2 = grid.spacing().powi(2);
        let idx = grid.multi_index(flat);
        let centre = values[flat];
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let mut lo = idx;
            lo[axis] -= 1;
            let mut hi = idx;
            hi[axis] += 1;
            acc += values[grid.flat_index(hi)] - 2.0 * centre + values[grid.flat_index(lo)];
        }
        Some(acc / dx2)
    }

    pub fn write_table(&self, path: impl AsRef<Path>) -> Result<()> {
        write_columns(path, &self.grid, self.t, &["u"], &[&self.values])
    }

    pub fn read_table(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_table(&text).map_err(|reason| Error::Table {
            path: path.to_path_buf(),
            reason,
        })
    }
}

/// Ordered snapshots of one run together with the exponent that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub m: f64,
    pub eta: f64,
    pub snapshots: Vec<Field>,
    pub diagnostics: Option<RunDiagnostics>,
}

impl Trajectory {
    pub fn grid(&self) -> Option<&Grid> {
        self.snapshots.first().map(|f| &f.grid)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> Option<&Field> {
        self.snapshots.last()
    }
}

/// Render a grid table with one or more value columns.
pub fn render_columns(grid: &Grid, t: f64, names: &[&str], columns: &[&[f64]]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n {}", grid.dim());
    let _ = writeln!(out, "# N {}", grid.points_per_axis());
    let _ = writeln!(out, "# L {:e}", grid.half_width());
    let _ = writeln!(out, "# t {t:e}");
    let axes = ["x", "y"];
    let header: Vec<&str> = axes[..grid.dim()].iter().copied().chain(names.iter().copied()).collect();
    let _ = writeln!(out, "{}", header.join(" "));
    for k in 0..grid.len() {
        let p = grid.point(k);
        for x in &p[..grid.dim()] {
            let _ = write!(out, "{x:e} ");
        }
        let row: Vec<String> = columns.iter().map(|c| format!("{:e}", c[k])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_columns(
    path: impl AsRef<Path>,
    grid: &Grid,
    t: f64,
    names: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_columns(grid, t, names, columns)).map_err(|e| Error::io(path, e))
}

fn parse_table(text: &str) -> std::result::Result<Field, String> {
    let mut dim = None;
    let mut points = None;
    let mut half_width = None;
    let mut t = None;
    let mut values = Vec::new();
    let mut coords = Vec::new();
    let mut saw_columns = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            let (Some(key), Some(val)) = (it.next(), it.next()) else {
                continue;
            };
            let bad = |_| format!("line {}: bad header value `{val}`", lineno + 1);
            match key {
                "n" => dim = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "N" => points = Some(val.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "L" => half_width = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "t" => t = Some(val.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                _ => {}
            }
            continue;
        }
        if !saw_columns {
            saw_columns = true;
            if line.split_whitespace().any(|tok| tok.parse::<f64>().is_err()) {
                continue;
            }
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        let d = dim.ok_or("data before `# n` header")?;
        if nums.len() < d + 1 {
            return Err(format!("line {}: expected at least {} columns", lineno + 1, d + 1));
        }
        coords.push([nums[0], if d > 1 { nums[1] } else { 0.0 }]);
        values.push(*nums.last().expect("nonempty row"));
    }
    let dim = dim.ok_or("missing `# n` header")?;
    let points = points.ok_or("missing `# N` header")?;
    let half_width = half_width.ok_or("missing `# L` header")?;
    let t = t.unwrap_or(0.0);
    let grid = Grid::new(dim, half_width, points).map_err(|e| e.to_string())?;
    if values.len() != grid.len() {
        return Err(format!("expected {} rows, found {}", grid.len(), values.len()));
    }
    let tol = 1e-9 * grid.spacing();
    for (k, c) in coords.iter().enumerate() {
        let p = grid.point(k);
        if (0..dim).any(|a| (p[a] - c[a]).abs() > tol) {
            return Err(format!("row {k} coordinates do not match the grid"));
        }
    }
    Ok(Field { grid, t, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_even_points() {
        assert!(Grid::new(1, 1.0, 400).is_err());
        assert!(Grid::new(3, 1.0, 11).is_err());
        assert!(Grid::new(1, 0.0, 11).is_err());
    }

    #[test]
    fn grid_is_symmetric_with_origin_sample() {
        let g = Grid::new(1, 4.0, 401).unwrap();
        assert_eq!(g.coord(200), 0.0);
        for i in 0..401 {
            assert_eq!(g.coord(i), -g.coord(400 - i));
        }
        assert_eq!(g.coord(0), -4.0);
        assert!((g.spacing() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn neighbors_in_2d() {
        let g = Grid::new(2, 1.0, 5).unwrap();
        let corner: Vec<_> = g.neighbors(0).collect();
        assert_eq!(corner.len(), 2);
        let centre = g.flat_index([2, 2]);
        let mut n: Vec<_> = g.neighbors(centre).collect();
        n.sort();
        assert_eq!(n, vec![7, 11, 13, 17]);
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let g = Grid::new(2, 1.5, 7).unwrap();
        let f = Field::from_fn(g, 0.3, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0) / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        f.write_table(&p).unwrap();
        let back = Field::read_table(&p).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn table_rejects_wrong_row_count() {
        let text = "# n 1\n# N 3\n# L 1\n# t 0\nx u\n-1 0\n0 1\n";
        assert!(parse_table(text).is_err());
    }
}
