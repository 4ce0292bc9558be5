//! Positivity sets, support radii and interface behaviour of `u^beta`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{write_columns, Field, Grid, Trajectory};
use crate::harness::CheckReport;

/// Relative positivity cutoff, multiplied by the data bound `M`.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-10;

pub fn default_threshold(sup: f64) -> f64 {
    DEFAULT_RELATIVE_THRESHOLD * sup
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityMask {
    pub grid: Grid,
    pub t: f64,
    pub flags: Vec<bool>,
    pub threshold: f64,
}

impl PositivityMask {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.flags.iter().any(|f| *f)
    }

    pub fn is_full(&self) -> bool {
        self.flags.iter().all(|f| *f)
    }

    /// Flagged cells with at least one unflagged 2n-neighbour.
    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| self.flags[k] && self.grid.neighbors(k).any(|j| !self.flags[j]))
            .collect()
    }

    /// Flagged cells whose whole `margin`-cell box is flagged.
    pub fn interior_cells(&self, margin: usize) -> Vec<usize> {
        let n = self.grid.points_per_axis() as isize;
        let dim = self.grid.dim();
        let m = margin as isize;
        (0..self.grid.len())
            .filter(|&k| {
                if !self.flags[k] {
                    return false;
                }
                let idx = self.grid.multi_index(k);
                let span_y = if dim == 2 { -m..=m } else { 0..=0 };
                span_y.into_iter().all(|dy| {
                    (-m..=m).all(|dx| {
                        let i = idx[0] as isize + dx;
                        let j = idx[1] as isize + dy;
                        if i < 0 || i >= n || j < 0 || (dim == 2 && j >= n) {
                            return false;
                        }
                        self.flags[self.grid.flat_index([i as usize, j as usize])]
                    })
                })
            })
            .collect()
    }

    pub fn write_table(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let col: Vec<f64> = self.flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        write_columns(path, &self.grid, self.t, &["flag"], &[&col])
    }
}

pub fn positivity_set(field: &Field, threshold: f64) -> Result<PositivityMask> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::param("threshold", format!("must be positive, got {threshold}")));
    }
    Ok(PositivityMask {
        grid: field.grid,
        t: field.t,
        flags: field.values.iter().map(|&v| v > threshold).collect(),
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportStats {
    pub radius: f64,
    pub boundary_cells: Vec<usize>,
}

pub fn support_radius_numeric(mask: &PositivityMask) -> Result<SupportStats> {
    if mask.is_empty() {
        return Err(Error::Insufficient(format!("empty positivity set at t = {}", mask.t)));
    }
    let radius = (0..mask.grid.len())
        .filter(|&k| mask.flags[k])
        .map(|k| mask.grid.radius(k))
        .fold(0.0, f64::max);
    Ok(SupportStats {
        radius,
        boundary_cells: mask.boundary_cells(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceViolation {
    pub t_from: f64,
    pub t_to: f64,
    pub cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReport {
    pub threshold: f64,
    pub violations: Vec<PersistenceViolation>,
}

impl PersistenceReport {
    pub fn nested(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_check(&self, params: BTreeMap<String, f64>) -> CheckReport {
        CheckReport::upper("persistence", params, self.violations.len() as f64, 0.0, 0.0)
    }
}

/// Every cell positive at one snapshot must stay positive at all later ones.
pub fn persistence_check(trajectory: &Trajectory, threshold: f64) -> Result<PersistenceReport> {
    if trajectory.snapshots.len() < 2 {
        return Err(Error::Insufficient("persistence needs at least two snapshots".into()));
    }
    let masks = trajectory
        .snapshots
        .iter()
        .map(|f| positivity_set(f, threshold))
        .collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    for pair in masks.windows(2) {
        for (k, (&a, &b)) in pair[0].flags.iter().zip(&pair[1].flags).enumerate() {
            if a && !b {
                violations.push(PersistenceViolation {
                    t_from: pair[0].t,
                    t_to: pair[1].t,
                    cell: k,
                });
            }
        }
    }
    Ok(PersistenceReport { threshold, violations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangencyProfile {
    /// Max centered-difference `|grad u^beta|` over interface cells.
    pub max_gradient: f64,
    /// `beta > h`, the regime where the gradient should vanish at the interface.
    pub in_hypothesis: bool,
}

pub fn tangency_profile(field: &Field, beta: f64, mask: &PositivityMask, h: f64) -> Result<TangencyProfile> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    if mask.grid != field.grid {
        return Err(Error::param("mask", "mask and field live on different grids"));
    }
    let phi: Vec<f64> = field.values.iter().map(|&u| u.max(0.0).powf(beta)).collect();
    let max_gradient = mask
        .boundary_cells()
        .into_iter()
        .map(|k| {
            let g = field.gradient_of(&phi, k);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(TangencyProfile {
        max_gradient,
        in_hypothesis: beta > h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::BarenblattSpec;
    use approx::assert_abs_diff_eq;

    fn spec() -> BarenblattSpec {
        BarenblattSpec::new(2.0, 1, 1.0 / 12.0, 0.0).unwrap()
    }

    #[test]
    fn barenblatt_support_radius() {
        let grid = Grid::new(1, 4.0, 401).unwrap();
        for (t, r) in [(1.0, 1.0), (8.0, 2.0)] {
            let f = spec().sample(&grid, t).unwrap();
            let mask = positivity_set(&f, default_threshold(1.0 / 12.0)).unwrap();
            let stats = support_radius_numeric(&mask).unwrap();
            assert_abs_diff_eq!(stats.radius, r, epsilon = grid.spacing() + 1e-12);
            assert_eq!(stats.boundary_cells.len(), 2);
            for &k in &stats.boundary_cells {
                assert!((grid.radius(k) - r).abs() <= grid.spacing() + 1e-12);
            }
        }
    }

    #[test]
    fn full_and_empty_masks() {
        let grid = Grid::new(2, 4.0, 9).unwrap();
        let mask = positivity_set(&Field::constant(grid, 0.0, 1.0), 1e-10).unwrap();
        assert!(mask.is_full());
        let stats = support_radius_numeric(&mask).unwrap();
        assert_abs_diff_eq!(stats.radius, 4.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert!(stats.boundary_cells.is_empty());
        let zero = positivity_set(&Field::constant(grid, 0.0, 0.0), 1e-10).unwrap();
        assert!(zero.is_empty());
        assert!(support_radius_numeric(&zero).is_err());
        assert!(positivity_set(&Field::constant(grid, 0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn truncated_trajectory_violates_persistence() {
        let grid = Grid::new(1, 4.0, 201).unwrap();
        let mut tr = spec().trajectory(&grid, &[1.0, 2.0, 4.0]).unwrap();
        assert!(persistence_check(&tr, 1e-12).unwrap().nested());
        tr.snapshots[2].values[100] = 0.0;
        let report = persistence_check(&tr, 1e-12).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].cell, 100);
        assert!(!report.to_check(BTreeMap::new()).pass);
    }

    #[test]
    fn tangency_vanishes_only_above_h() {
        let mut prev = f64::INFINITY;
        let mut lipschitz = Vec::new();
        for n in [201, 401, 801] {
            let grid = Grid::new(1, 4.0, n).unwrap();
            let f = spec().sample(&grid, 1.0).unwrap();
            let mask = positivity_set(&f, 1e-14).unwrap();
            let p = tangency_profile(&f, 2.0, &mask, 1.5).unwrap();
            assert!(p.in_hypothesis);
            assert!(p.max_gradient <= prev / 1.9);
            prev = p.max_gradient;
            let q = tangency_profile(&f, 1.0, &mask, 1.5).unwrap();
            assert!(!q.in_hypothesis);
            lipschitz.push(q.max_gradient);
        }
        // edge slope r/(6t) = 1/6, halved by the one-sided average at the last cell
        for g in lipschitz {
            assert!(g > 0.05);
        }
    }
}
