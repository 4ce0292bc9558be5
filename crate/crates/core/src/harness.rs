//! Numerical checks of the a priori estimates, each producing a [`CheckReport`].
//!
//! Upper-bound checks pass iff `statistic <= bound + tolerance` and report
//! `margin = bound - statistic`; lower-bound checks pass iff
//! `statistic >= bound - tolerance` with `margin = statistic - bound`, so a
//! nonnegative margin always means the inequality held without slack.
//! Names starting with `control.` are negative controls expected to fail.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{barenblatt_constants, chi_lower_bound, gradient_bound_constant};
use crate::error::{Error, Result};
use crate::field::{Field, Grid, Trajectory};
use crate::free_boundary::{default_threshold, positivity_set, support_radius_numeric};
use crate::numerics::{least_squares, neumaier_sum};
use crate::solver::{solve_heat, solve_pme, PmeProblem, SchemeConfig};

pub const CONTROL_PREFIX: &str = "control.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Upper,
    Lower,
}

/// One row of a per-check table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub statistic: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub statistic: f64,
    pub bound: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
}

impl CheckReport {
    pub fn new(
        name: impl Into<String>,
        sense: Sense,
        params: BTreeMap<String, f64>,
        statistic: f64,
        bound: f64,
        tolerance: f64,
    ) -> Self {
        let (margin, pass) = match sense {
            Sense::Upper => (bound - statistic, statistic <= bound + tolerance),
            Sense::Lower => (statistic - bound, statistic >= bound - tolerance),
        };
        Self {
            name: name.into(),
            params,
            statistic,
            bound,
            margin,
            tolerance,
            pass,
            series: Vec::new(),
        }
    }

    pub fn upper(name: impl Into<String>, params: BTreeMap<String, f64>, statistic: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, Sense::Upper, params, statistic, bound, tolerance)
    }

    pub fn lower(name: impl Into<String>, params: BTreeMap<String, f64>, statistic: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, Sense::Lower, params, statistic, bound, tolerance)
    }

    pub fn with_series(mut self, series: Vec<SeriesRow>) -> Self {
        self.series = series;
        self
    }

    /// Rename as a negative control.
    pub fn into_control(mut self) -> Self {
        if !self.is_control() {
            self.name = format!("{CONTROL_PREFIX}{}", self.name);
        }
        self
    }

    pub fn is_control(&self) -> bool {
        self.name.starts_with(CONTROL_PREFIX)
    }

    /// A regular check that passed or a control that failed.
    pub fn as_expected(&self) -> bool {
        self.pass != self.is_control()
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn grid_params(grid: &Grid, out: &mut BTreeMap<String, f64>) {
    out.insert("n".into(), grid.dim() as f64);
    out.insert("N".into(), grid.points_per_axis() as f64);
    out.insert("L".into(), grid.half_width());
}

fn trajectory_params(tr: &Trajectory, extra: &[(&str, f64)]) -> Result<BTreeMap<String, f64>> {
    let grid = tr
        .grid()
        .ok_or_else(|| Error::Insufficient("trajectory has no snapshots".into()))?;
    let mut p = params(&[("m", tr.m), ("eta", tr.eta)]);
    grid_params(grid, &mut p);
    let times = tr.times();
    p.insert("t0".into(), times[0]);
    p.insert("t1".into(), *times.last().expect("nonempty"));
    p.extend(params(extra));
    Ok(p)
}

fn field_params(f: &Field, extra: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let mut p = params(&[("t", f.t)]);
    grid_params(&f.grid, &mut p);
    p.extend(params(extra));
    p
}

fn row(sense: Sense, t: f64, statistic: f64, bound: f64) -> SeriesRow {
    let margin = match sense {
        Sense::Upper => bound - statistic,
        Sense::Lower => statistic - bound,
    };
    SeriesRow { t, statistic, bound, margin }
}

fn require_snapshots(tr: &Trajectory, k: usize, what: &str) -> Result<()> {
    if tr.snapshots.len() < k {
        return Err(Error::Insufficient(format!(
            "{what} needs at least {k} snapshots, got {}",
            tr.snapshots.len()
        )));
    }
    Ok(())
}

/// Max relative deviation of the discrete mass from the first snapshot.
pub fn check_mass(tr: &Trajectory) -> Result<CheckReport> {
    require_snapshots(tr, 1, "check_mass")?;
    let m0 = tr.snapshots[0].mass();
    if m0 <= 0.0 {
        return Err(Error::InvalidInitialData("zero initial mass".into()));
    }
    let series: Vec<SeriesRow> = tr
        .snapshots
        .iter()
        .map(|f| row(Sense::Upper, f.t, (f.mass() - m0).abs() / m0, 0.0))
        .collect();
    let stat = series.iter().map(|r| r.statistic).fold(0.0, f64::max);
    Ok(CheckReport::upper("mass", trajectory_params(tr, &[])?, stat, 0.0, 1e-12).with_series(series))
}

/// One-sided time-derivative bound `u_t >= -u / ((m-1) t)` with forward
/// differences between consecutive snapshots.
pub fn check_ab_time(tr: &Trajectory, m: f64) -> Result<CheckReport> {
    if !(m > 1.0) {
        return Err(Error::param("m", format!("need m > 1, got {m}")));
    }
    require_snapshots(tr, 2, "check_ab_time")?;
    let mut series = Vec::new();
    let mut tolerance: f64 = 0.0;
    for pair in tr.snapshots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.t <= 0.0 {
            continue;
        }
        let dt = b.t - a.t;
        let stat = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&u, &v)| (v - u) / dt + u / ((m - 1.0) * a.t))
            .fold(f64::INFINITY, f64::min);
        let sup = a.sup();
        tolerance = tolerance.max(dt * sup / (a.t * a.t) + 1e-12 * sup / a.t);
        series.push(row(Sense::Lower, a.t, stat, 0.0));
    }
    if series.is_empty() {
        return Err(Error::Insufficient("no snapshot pair with t > 0".into()));
    }
    let stat = series.iter().map(|r| r.statistic).fold(f64::INFINITY, f64::min);
    let p = trajectory_params(tr, &[("m_label", m)])?;
    Ok(CheckReport::lower("ab_time", p, stat, 0.0, tolerance).with_series(series))
}

/// Interior values of `Δp + n / ((n(m-1)+2) t)`, `p = m/(m-1) u^(m-1)`,
/// skipping cells within two cells of the interface.
pub fn ab_pressure_residuals(field: &Field, m: f64, n: usize) -> Result<Vec<f64>> {
    let params = barenblatt_constants(m, n)?;
    if !(field.t > 0.0) {
        return Err(Error::param("t", "pressure bound needs t > 0"));
    }
    let sup = field.sup();
    if sup <= 0.0 {
        return Ok(Vec::new());
    }
    let p: Vec<f64> = field.values.iter().map(|&u| m / (m - 1.0) * u.powf(m - 1.0)).collect();
    let mask = positivity_set(field, default_threshold(sup))?;
    Ok(mask
        .interior_cells(2)
        .into_iter()
        .filter_map(|k| field.laplacian_of(&p, k))
        .map(|lap| lap + params.lambda / field.t)
        .collect())
}

pub fn check_ab_pressure(field: &Field, m: f64, n: usize) -> Result<CheckReport> {
    let residuals = ab_pressure_residuals(field, m, n)?;
    let stat = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let stat = if stat.is_finite() { stat } else { 0.0 };
    let tol = 5.0 * field.grid.spacing().powi(2);
    let p = field_params(field, &[("m", m)]);
    Ok(CheckReport::lower("ab_pressure", p, stat, 0.0, tol).with_series(vec![row(Sense::Lower, field.t, stat, 0.0)]))
}

/// The pressure bound over every snapshot with `t > 0`.
pub fn check_ab_pressure_trajectory(tr: &Trajectory, n: usize) -> Result<CheckReport> {
    require_snapshots(tr, 1, "check_ab_pressure")?;
    let mut series = Vec::new();
    let mut tol: f64 = 0.0;
    for f in tr.snapshots.iter().filter(|f| f.t > 0.0) {
        let r = check_ab_pressure(f, tr.m, n)?;
        tol = tol.max(r.tolerance);
        series.extend(r.series);
    }
    if series.is_empty() {
        return Err(Error::Insufficient("no snapshot with t > 0".into()));
    }
    let stat = series.iter().map(|r| r.statistic).fold(f64::INFINITY, f64::min);
    Ok(CheckReport::lower("ab_pressure", trajectory_params(tr, &[])?, stat, 0.0, tol).with_series(series))
}

/// `max |grad u^h|^2 C1 t <= 1`.
pub fn check_gradient_bound(field: &Field, m: f64, h: f64, sup: f64) -> Result<CheckReport> {
    let c1 = gradient_bound_constant(m, h, sup)?;
    if !(field.t > 0.0) {
        return Err(Error::param("t", "gradient bound needs t > 0"));
    }
    let uh: Vec<f64> = field.values.iter().map(|&u| u.max(0.0).powf(h)).collect();
    let max_sq = (0..field.grid.len())
        .map(|k| {
            let g = field.gradient_of(&uh, k);
            g[0] * g[0] + g[1] * g[1]
        })
        .fold(0.0, f64::max);
    let stat = max_sq * c1 * field.t;
    let p = field_params(field, &[("m", m), ("h", h), ("M", sup)]);
    Ok(CheckReport::upper("gradient_bound", p, stat, 1.0, field.grid.spacing())
        .with_series(vec![row(Sense::Upper, field.t, stat, 1.0)]))
}

/// The gradient bound over every snapshot of a trajectory.
pub fn check_gradient_bound_trajectory(tr: &Trajectory, h: f64, sup: f64) -> Result<CheckReport> {
    require_snapshots(tr, 1, "check_gradient_bound")?;
    let mut series = Vec::new();
    let mut tol: f64 = 0.0;
    for f in tr.snapshots.iter().filter(|f| f.t > 0.0) {
        let r = check_gradient_bound(f, tr.m, h, sup)?;
        tol = tol.max(r.tolerance);
        series.extend(r.series);
    }
    let stat = series.iter().map(|r| r.statistic).fold(0.0, f64::max);
    let p = trajectory_params(tr, &[("h", h), ("M", sup)])?;
    Ok(CheckReport::upper("gradient_bound", p, stat, 1.0, tol).with_series(series))
}

/// The same snapshot with its clock moved to `t`.
pub fn relabel_time(field: &Field, t: f64) -> Field {
    Field { t, ..field.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub h: f64,
    pub nu_hat: f64,
    pub sample_count: usize,
}

pub const DEFAULT_RANDOM_PAIRS: usize = 100_000;

/// Sup of `|u(p1) - u(p2)| / (|x1 - x2|^(1/h) + |t1 - t2|^(1/(2h)))` over all
/// adjacent pairs in space and time plus `random_pairs` seeded far pairs,
/// restricted to `|x| <= radius` and `t >= tau`.
pub fn holder_quotient(
    tr: &Trajectory,
    h: f64,
    tau: f64,
    radius: f64,
    seed: u64,
    random_pairs: usize,
) -> Result<HolderEstimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("need h > 0, got {h}")));
    }
    let grid = *tr
        .grid()
        .ok_or_else(|| Error::Insufficient("trajectory has no snapshots".into()))?;
    let snaps: Vec<&Field> = tr.snapshots.iter().filter(|f| f.t >= tau).collect();
    let cells: Vec<usize> = (0..grid.len()).filter(|&k| grid.radius(k) <= radius).collect();
    if snaps.is_empty() || cells.is_empty() {
        return Err(Error::Insufficient("no samples with t >= tau and |x| <= K".into()));
    }
    let inside: Vec<bool> = (0..grid.len()).map(|k| grid.radius(k) <= radius).collect();
    let (ix, it) = (1.0 / h, 1.0 / (2.0 * h));
    let quotient = |a: &Field, ka: usize, b: &Field, kb: usize| {
        let (pa, pb) = (grid.point(ka), grid.point(kb));
        let dist = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let den = dist.powf(ix) + (a.t - b.t).abs().powf(it);
        if den > 0.0 {
            (a.values[ka] - b.values[kb]).abs() / den
        } else {
            0.0
        }
    };

    let mut nu: f64 = 0.0;
    let mut count = 0usize;
    for f in &snaps {
        for &k in &cells {
            for j in grid.neighbors(k).filter(|&j| j > k && inside[j]) {
                nu = nu.max(quotient(f, k, f, j));
                count += 1;
            }
        }
    }
    for pair in snaps.windows(2) {
        for &k in &cells {
            nu = nu.max(quotient(pair[0], k, pair[1], k));
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_pairs {
        let (sa, sb) = (rng.random_range(0..snaps.len()), rng.random_range(0..snaps.len()));
        let (ka, kb) = (cells[rng.random_range(0..cells.len())], cells[rng.random_range(0..cells.len())]);
        nu = nu.max(quotient(snaps[sa], ka, snaps[sb], kb));
        count += 1;
    }
    Ok(HolderEstimate {
        h,
        nu_hat: nu,
        sample_count: count,
    })
}

/// Relative change of `nu_hat` under one grid refinement, bounded by 20%.
pub fn holder_stability(coarse: &HolderEstimate, fine: &HolderEstimate, extra: &[(&str, f64)]) -> CheckReport {
    let stat = if coarse.nu_hat > 0.0 {
        (fine.nu_hat - coarse.nu_hat).abs() / coarse.nu_hat
    } else if fine.nu_hat > 0.0 {
        f64::MAX
    } else {
        0.0
    };
    let mut p = params(&[("h", coarse.h), ("nu_coarse", coarse.nu_hat), ("nu_fine", fine.nu_hat)]);
    p.extend(params(extra));
    CheckReport::upper("holder", p, stat, 0.2, 0.0)
}

/// `sup u * t^lambda` must not exceed 1.05 times its first-snapshot value.
pub fn check_decay(tr: &Trajectory, m: f64, n: usize) -> Result<CheckReport> {
    require_snapshots(tr, 2, "check_decay")?;
    let lambda = n as f64 / (n as f64 * (m - 1.0) + 2.0);
    let snaps: Vec<&Field> = tr.snapshots.iter().filter(|f| f.t > 0.0).collect();
    let (first, last) = match (snaps.first(), snaps.last()) {
        (Some(a), Some(b)) if b.t >= 10.0 * a.t => (a.t, b.t),
        _ => {
            return Err(Error::Insufficient(
                "check_decay needs positive snapshot times spanning a decade".into(),
            ))
        }
    };
    let values: Vec<(f64, f64)> = snaps.iter().map(|f| (f.t, f.sup() * f.t.powf(lambda))).collect();
    let bound = 1.05 * values[0].1;
    let series: Vec<SeriesRow> = values.iter().map(|&(t, s)| row(Sense::Upper, t, s, bound)).collect();
    let stat = values.iter().map(|v| v.1).fold(0.0, f64::max);
    let p = trajectory_params(tr, &[("m_label", m), ("t_first", first), ("t_last", last)])?;
    Ok(CheckReport::upper("decay", p, stat, bound, 0.0).with_series(series))
}

/// `(t, numerical support radius, chi(t))` for every snapshot with `t > 0`.
pub fn propagation_profile(tr: &Trajectory, m: f64, n: usize, mass: f64) -> Result<Vec<(f64, f64, f64)>> {
    require_snapshots(tr, 1, "check_propagation")?;
    let threshold = default_threshold(tr.snapshots[0].sup());
    tr.snapshots
        .iter()
        .filter(|f| f.t > 0.0)
        .map(|f| {
            let mask = positivity_set(f, threshold)?;
            let radius = support_radius_numeric(&mask)?.radius;
            Ok((f.t, radius, chi_lower_bound(f.t, m, n, mass)?))
        })
        .collect()
}

/// Numerical support radius against the lower bound `chi(t)`.
pub fn check_propagation(tr: &Trajectory, m: f64, n: usize, mass: f64) -> Result<CheckReport> {
    let profile = propagation_profile(tr, m, n, mass)?;
    if profile.is_empty() {
        return Err(Error::Insufficient("no snapshot with t > 0".into()));
    }
    let series: Vec<SeriesRow> = profile
        .iter()
        .map(|&(t, r, chi)| row(Sense::Lower, t, r - chi, 0.0))
        .collect();
    let stat = series.iter().map(|r| r.statistic).fold(f64::INFINITY, f64::min);
    let dx = tr.grid().expect("nonempty").spacing();
    let p = trajectory_params(tr, &[("mass", mass)])?;
    Ok(CheckReport::lower("propagation", p, stat, 0.0, dx).with_series(series))
}

/// `int_{|x| <= k} (v - u)^2` at every common snapshot with `t > t0`.
pub fn heat_distance_series(u: &Trajectory, v: &Trajectory, k: f64) -> Result<Vec<(f64, f64)>> {
    if u.snapshots.len() != v.snapshots.len() || u.grid() != v.grid() {
        return Err(Error::param("trajectories", "porous-medium and heat runs must share grid and snapshots"));
    }
    let grid = *u.grid().ok_or_else(|| Error::Insufficient("empty trajectory".into()))?;
    let t0 = u.snapshots[0].t;
    let inside: Vec<usize> = (0..grid.len()).filter(|&i| grid.radius(i) <= k).collect();
    Ok(u.snapshots
        .iter()
        .zip(&v.snapshots)
        .filter(|(a, _)| a.t > t0)
        .map(|(a, b)| {
            let d = neumaier_sum(inside.iter().map(|&i| (b.values[i] - a.values[i]).powi(2)));
            (a.t, d * grid.cell_volume())
        })
        .collect())
}

fn distance_report(m: f64, k: f64, t1: f64, series: &[(f64, f64)], c_star: f64) -> CheckReport {
    let bound = c_star * ((m - 1.0) + 1.0 / k);
    let rows: Vec<SeriesRow> = series.iter().map(|&(t, d)| row(Sense::Upper, t, d, bound)).collect();
    let stat = series.iter().map(|s| s.1).fold(0.0, f64::max);
    CheckReport::upper("heat_distance", params(&[("m", m), ("k", k), ("T", t1)]), stat, bound, 0.0).with_series(rows)
}

/// L2 distance to the heat solution from the same data over `(t0, t1]`, with
/// the bound `c_star ((m-1) + 1/k)`.
pub fn l2_distance_heat(
    m: f64,
    k: f64,
    problem: &PmeProblem,
    grid: &Grid,
    config: &SchemeConfig,
    c_star: f64,
) -> Result<CheckReport> {
    let u = solve_pme(&PmeProblem { m, ..problem.clone() }, grid, config)?;
    let v = solve_heat(problem, grid, config)?;
    let series = heat_distance_series(&u, &v, k)?;
    Ok(distance_report(m, k, problem.t1, &series, c_star))
}

/// Sweep `l2_distance_heat` over exponents `ms` and radii `ks`.
///
/// `C*` is the smallest constant that makes every bound hold. Two extra
/// reports follow: `heat_trend` counts failures of strict decrease as
/// `m -> 1` at each fixed `k`, and `heat_fit` is the relative residual of
/// the affine model `a (m-1) + b/k + c`.
pub fn heat_closeness_sweep(
    ms: &[f64],
    ks: &[f64],
    problem: &PmeProblem,
    grid: &Grid,
    config: &SchemeConfig,
) -> Result<Vec<CheckReport>> {
    if ms.is_empty() || ks.is_empty() {
        return Err(Error::param("m_values", "sweep needs at least one m and one k"));
    }
    if let Some(m) = ms.iter().find(|m| !(**m >= 1.0)) {
        return Err(Error::param("m_values", format!("need m >= 1, got {m}")));
    }
    let v = solve_heat(problem, grid, config)?;
    let runs = ms
        .par_iter()
        .map(|&m| solve_pme(&PmeProblem { m, ..problem.clone() }, grid, config))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (&m, u) in ms.iter().zip(&runs) {
        for &k in ks {
            let series = heat_distance_series(u, &v, k)?;
            let stat = series.iter().map(|s| s.1).fold(0.0, f64::max);
            cells.push((m, k, series, stat));
        }
    }
    let c_star = cells
        .iter()
        .map(|(m, k, _, s)| s / ((m - 1.0) + 1.0 / k))
        .fold(0.0, f64::max);
    let mut reports: Vec<CheckReport> = cells
        .iter()
        .map(|(m, k, series, _)| distance_report(*m, *k, problem.t1, series, c_star))
        .collect();

    let mut violations = 0usize;
    for &k in ks {
        let mut by_m: Vec<(f64, f64)> = cells.iter().filter(|c| c.1 == k).map(|c| (c.0, c.3)).collect();
        by_m.sort_by(|a, b| b.0.total_cmp(&a.0));
        violations += by_m.windows(2).filter(|w| !(w[1].1 < w[0].1)).count();
    }
    let base = params(&[("T", problem.t1), ("c_star", c_star)]);
    reports.push(CheckReport::upper("heat_trend", base.clone(), violations as f64, 0.0, 0.0));

    let design: Vec<Vec<f64>> = cells.iter().map(|(m, k, _, _)| vec![m - 1.0, 1.0 / k, 1.0]).collect();
    let y: Vec<f64> = cells.iter().map(|c| c.3).collect();
    let (coef, resid) = least_squares(&design, &y)?;
    let mut p = base;
    p.extend(params(&[("a", coef[0]), ("b", coef[1]), ("c", coef[2])]));
    reports.push(CheckReport::upper("heat_fit", p, resid, FIT_RESIDUAL_BOUND, 0.0));
    Ok(reports)
}

/// Relative residual allowed for the affine heat-closeness model.
pub const FIT_RESIDUAL_BOUND: f64 = 0.25;

/// Merge reports in the deterministic `(name, m)` order.
pub fn sort_reports(reports: &mut [CheckReport]) {
    reports.sort_by(|a, b| {
        a.name
            .cmp(&b.name)
            .then_with(|| a.param("m").unwrap_or(f64::NAN).total_cmp(&b.param("m").unwrap_or(f64::NAN)))
    });
}
