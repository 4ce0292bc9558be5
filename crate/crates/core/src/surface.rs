//! Graph surface of `phi = u^beta`: induced metric against the flat one and
//! the classical residual of the equation satisfied by `phi`,
//!
//! ```text
//! phi_t = m [ phi^((m-1)/beta) Δphi + ((m-beta)/beta) phi^((m-beta-1)/beta) |grad phi|^2 ]
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{write_columns, Field, Trajectory};
use crate::free_boundary::{default_threshold, positivity_set, PositivityMask};
use crate::harness::{params, CheckReport, SeriesRow};
use crate::numerics::linear_fit;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceField {
    pub beta: f64,
    pub h: f64,
    /// `beta - h`.
    pub epsilon: f64,
    pub threshold: f64,
    pub base: Field,
    pub phi: Vec<f64>,
    pub grad_phi: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub location: usize,
    /// `(ds)^2 / (drho)^2` along the gradient direction, `1 + |grad phi|^2`.
    pub ratio: f64,
}

impl SurfaceField {
    pub fn metric_samples(&self) -> Vec<MetricSample> {
        self.grad_phi
            .iter()
            .enumerate()
            .map(|(location, g)| MetricSample {
                location,
                ratio: 1.0 + g[0] * g[0] + g[1] * g[1],
            })
            .collect()
    }

    /// `max |grad phi|^2`, computed directly so tiny values keep their precision.
    pub fn max_ratio_excess(&self) -> f64 {
        self.grad_phi
            .iter()
            .map(|g| g[0] * g[0] + g[1] * g[1])
            .fold(0.0, f64::max)
    }

    /// Dump `phi`, `|grad phi|` and the metric ratio as a table.
    pub fn write_table(&self, path: impl AsRef<Path>) -> Result<()> {
        let grad: Vec<f64> = self.grad_phi.iter().map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt()).collect();
        let ratio: Vec<f64> = self.metric_samples().iter().map(|s| s.ratio).collect();
        write_columns(
            path,
            &self.base.grid,
            self.base.t,
            &["phi", "grad_phi", "ratio"],
            &[&self.phi, &grad, &ratio],
        )
    }
}

/// `phi = u^beta` with `phi = 0` wherever `u` is at or below `threshold`.
pub fn build_surface(field: &Field, beta: f64, h: f64, threshold: f64) -> Result<SurfaceField> {
    if !(beta > h) {
        return Err(Error::param("beta", format!("need beta > h = {h}, got {beta}")));
    }
    if !(threshold > 0.0) {
        return Err(Error::param("threshold", "must be positive"));
    }
    let phi: Vec<f64> = field
        .values
        .iter()
        .map(|&u| if u > threshold { u.powf(beta) } else { 0.0 })
        .collect();
    let grad_phi = (0..field.grid.len()).map(|k| field.gradient_of(&phi, k)).collect();
    Ok(SurfaceField {
        beta,
        h,
        epsilon: beta - h,
        threshold,
        base: field.clone(),
        phi,
        grad_phi,
    })
}

/// Surfaces for every snapshot, thresholded relative to the first snapshot's sup.
pub fn build_surfaces(tr: &Trajectory, beta: f64, h: f64) -> Result<Vec<SurfaceField>> {
    let first = tr
        .snapshots
        .first()
        .ok_or_else(|| Error::Insufficient("trajectory has no snapshots".into()))?;
    let threshold = default_threshold(first.sup());
    tr.snapshots.iter().map(|f| build_surface(f, beta, h, threshold)).collect()
}

/// Predicted decay exponent of `max (ratio - 1)`: `-2 n eps / (n(m-1)+2) - 1`.
pub fn pinch_exponent(m: f64, n: usize, epsilon: f64) -> f64 {
    let n = n as f64;
    -2.0 * n * epsilon / (n * (m - 1.0) + 2.0) - 1.0
}

/// Log-log fit of `max (ratio - 1)` against `t`, compared with the predicted
/// exponent. The statistic is `|fitted - predicted| / |predicted|` with bound
/// 0.15; the series carries `max (ratio - 1)` against `C4 t^p`, `C4` fitted
/// at the first snapshot.
pub fn metric_pinch(surfaces: &[SurfaceField], m: f64, n: usize) -> Result<CheckReport> {
    if surfaces.len() < 4 {
        return Err(Error::Insufficient(format!(
            "metric pinch regression needs at least 4 snapshots, got {}",
            surfaces.len()
        )));
    }
    if surfaces.iter().any(|s| !(s.base.t > 0.0)) {
        return Err(Error::param("t", "metric pinch needs t > 0"));
    }
    let (t_first, t_last) = (surfaces[0].base.t, surfaces[surfaces.len() - 1].base.t);
    if t_last < 10.0 * t_first {
        return Err(Error::Insufficient("metric pinch regression needs a decade of t".into()));
    }
    let epsilon = surfaces[0].epsilon;
    let predicted = pinch_exponent(m, n, epsilon);
    let excess: Vec<f64> = surfaces.iter().map(SurfaceField::max_ratio_excess).collect();
    if excess.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Insufficient("flat surface: ratio - 1 vanishes at some snapshot".into()));
    }
    let xs: Vec<f64> = surfaces.iter().map(|s| s.base.t.ln()).collect();
    let ys: Vec<f64> = excess.iter().map(|e| e.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let c4 = excess[0] / t_first.powf(predicted);
    let series = surfaces
        .iter()
        .zip(&excess)
        .map(|(s, &e)| {
            let bound = c4 * s.base.t.powf(predicted);
            SeriesRow {
                t: s.base.t,
                statistic: e,
                bound,
                margin: bound - e,
            }
        })
        .collect();
    let stat = (fit.slope - predicted).abs() / predicted.abs();
    let grid = surfaces[0].base.grid;
    let p = params(&[
        ("m", m),
        ("n", n as f64),
        ("N", grid.points_per_axis() as f64),
        ("L", grid.half_width()),
        ("beta", surfaces[0].beta),
        ("h", surfaces[0].h),
        ("t0", t_first),
        ("t1", t_last),
        ("C4", c4),
        ("exponent_fitted", fit.slope),
        ("exponent_predicted", predicted),
    ]);
    Ok(CheckReport::upper("metric_pinch", p, stat, 0.15, 0.0).with_series(series))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual {
    pub t: f64,
    /// Max over cells whose whole neighbourhood is positive now and before.
    pub interior: f64,
    /// Max over cells within three cells of the discrete interface.
    pub near_interface: f64,
}

fn transformed_rhs(phi: &[f64], field: &Field, k: usize, m: f64, beta: f64) -> Option<f64> {
    let p = phi[k];
    if p == 0.0 {
        // every term carries a positive power of phi
        return field.laplacian_of(phi, k).map(|_| 0.0);
    }
    let lap = field.laplacian_of(phi, k)?;
    let g = field.gradient_of(phi, k);
    let g2 = g[0] * g[0] + g[1] * g[1];
    Some(m * (p.powf((m - 1.0) / beta) * lap + (m - beta) / beta * p.powf((m - beta - 1.0) / beta) * g2))
}

fn band(mask: &PositivityMask, width: usize) -> Vec<bool> {
    let grid = &mask.grid;
    let mut near = vec![false; grid.len()];
    let n = grid.points_per_axis() as isize;
    let w = width as isize;
    for k in mask.boundary_cells() {
        let idx = grid.multi_index(k);
        let span_y = if grid.dim() == 2 { -w..=w } else { 0..=0 };
        for dy in span_y {
            for dx in -w..=w {
                let (i, j) = (idx[0] as isize + dx, idx[1] as isize + dy);
                if i >= 0 && i < n && j >= 0 && (grid.dim() == 1 || j < n) {
                    near[grid.flat_index([i as usize, j as usize])] = true;
                }
            }
        }
    }
    near
}

/// Residuals of the transformed equation at every snapshot with neighbours
/// on both sides in time, using three-point time differences.
pub fn pde_residuals(tr: &Trajectory, beta: f64, m: f64, h: f64) -> Result<Vec<PdeResidual>> {
    if !(beta > 2.0 * h) {
        return Err(Error::param("beta", format!("need beta > 2h = {}, got {beta}", 2.0 * h)));
    }
    if tr.snapshots.len() < 3 {
        return Err(Error::Insufficient("residual needs at least 3 snapshots".into()));
    }
    let threshold = default_threshold(tr.snapshots[0].sup());
    let phis: Vec<Vec<f64>> = tr
        .snapshots
        .iter()
        .map(|f| f.values.iter().map(|&u| if u > threshold { u.powf(beta) } else { 0.0 }).collect())
        .collect();
    let mut out = Vec::new();
    for i in 1..tr.snapshots.len() - 1 {
        let (prev, cur, next) = (&tr.snapshots[i - 1], &tr.snapshots[i], &tr.snapshots[i + 1]);
        let (ha, hb) = (cur.t - prev.t, next.t - cur.t);
        let mask = positivity_set(cur, threshold)?;
        let earlier = positivity_set(prev, threshold)?;
        let interior_now = mask.interior_cells(1);
        let near = band(&mask, 3);
        let residual = |k: usize| -> Option<f64> {
            let dphi = -hb / (ha * (ha + hb)) * phis[i - 1][k] + (hb - ha) / (ha * hb) * phis[i][k]
                + ha / (hb * (ha + hb)) * phis[i + 1][k];
            transformed_rhs(&phis[i], cur, k, m, beta).map(|rhs| (dphi - rhs).abs())
        };
        let interior = interior_now
            .iter()
            .filter(|&&k| earlier.flags[k] && cur.grid.neighbors(k).all(|j| earlier.flags[j]))
            .filter_map(|&k| residual(k))
            .fold(0.0, f64::max);
        let near_interface = (0..cur.grid.len())
            .filter(|&k| near[k])
            .filter_map(residual)
            .fold(0.0, f64::max);
        out.push(PdeResidual {
            t: cur.t,
            interior,
            near_interface,
        });
    }
    Ok(out)
}

/// Interior residual of the transformed equation with a first-order
/// allowance `dx`; the near-interface maximum is carried in the params.
pub fn transformed_pde_residual(tr: &Trajectory, beta: f64, m: f64, h: f64) -> Result<CheckReport> {
    let rows = pde_residuals(tr, beta, m, h)?;
    let grid = *tr.grid().expect("nonempty");
    let interior = rows.iter().map(|r| r.interior).fold(0.0, f64::max);
    let near = rows.iter().map(|r| r.near_interface).fold(0.0, f64::max);
    let series = rows
        .iter()
        .map(|r| SeriesRow {
            t: r.t,
            statistic: r.interior,
            bound: 0.0,
            margin: -r.interior,
        })
        .collect();
    let p = params(&[
        ("m", m),
        ("beta", beta),
        ("h", h),
        ("n", grid.dim() as f64),
        ("N", grid.points_per_axis() as f64),
        ("L", grid.half_width()),
        ("near_interface", near),
    ]);
    Ok(CheckReport::upper("transformed_pde", p, interior, 0.0, grid.spacing()).with_series(series))
}
