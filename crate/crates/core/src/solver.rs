//! Explicit conservative finite-difference solver for `u_t = Δ(u^m)` with
//! lifted initial data `u_0 + eta`, plus the matching linear heat solver.
//!
//! The update is in flux form,
//!
//! ```text
//! u_i <- u_i + dt/dx^2 * sum_axis [(w_{i+1} - w_i) - (w_i - w_{i-1})],  w = u^m
//! ```
//!
//! so with zero-flux boundaries the discrete mass `sum u_i dx^n` telescopes
//! and is conserved to rounding. Positivity and the discrete maximum
//! principle hold under `dt <= dx^2 / (2 n m (M + eta)^(m-1))`.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{barenblatt_constants, BarenblattSpec};
use crate::error::{Error, Result};
use crate::field::{Field, Grid, Trajectory};
use crate::numerics::neumaier_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Mirror ghost cells; no flux through the outer faces.
    #[default]
    ZeroFlux,
    /// Ghost cells held at zero; mass can leave the domain.
    ZeroValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub cfl_safety: f64,
    pub boundary: Boundary,
    pub dt_override: Option<f64>,
    /// Abort once any outer-layer cell exceeds `eta` by more than this
    /// multiple of `M`; `None` disables the monitor.
    pub boundary_tolerance: Option<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            cfl_safety: 0.9,
            boundary: Boundary::ZeroFlux,
            dt_override: None,
            boundary_tolerance: Some(1e-12),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Source-type profile `B(x, t0 + offset; C)`.
    Barenblatt { c: f64, offset: f64 },
    /// `amplitude * exp(-|x|^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `amplitude * (1 - |x|^2/radius^2)_+^2`.
    Bump { amplitude: f64, radius: f64 },
    /// Samples read from a table file on the run grid.
    File(PathBuf),
    /// Samples given directly.
    Samples(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmeProblem {
    pub m: f64,
    pub eta: f64,
    pub initial: InitialCondition,
    /// Declared bound `M` on the initial data; `None` takes the sampled sup.
    pub sup: Option<f64>,
    pub t0: f64,
    pub t1: f64,
    pub snapshot_times: Vec<f64>,
}

impl PmeProblem {
    pub fn new(m: f64, initial: InitialCondition, t0: f64, t1: f64) -> Self {
        Self {
            m,
            eta: 0.0,
            initial,
            sup: None,
            t0,
            t1,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_sup(mut self, sup: f64) -> Self {
        self.sup = Some(sup);
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// The analytic solution matching a Barenblatt initial condition.
    pub fn barenblatt_spec(&self, n: usize) -> Option<BarenblattSpec> {
        match self.initial {
            InitialCondition::Barenblatt { c, offset } => BarenblattSpec::new(self.m, n, c, offset).ok(),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m >= 1.0) {
            return Err(Error::param("m", format!("need m >= 1, got {}", self.m)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::param("eta", format!("need eta >= 0, got {}", self.eta)));
        }
        if !(self.t0 >= 0.0 && self.t1 > self.t0) {
            return Err(Error::param(
                "t1",
                format!("need t1 > t0 >= 0, got t0 = {}, t1 = {}", self.t0, self.t1),
            ));
        }
        if let Some(sup) = self.sup {
            if !(sup.is_finite() && sup > 0.0) {
                return Err(Error::param("M", format!("declared sup must be positive, got {sup}")));
            }
        }
        Ok(())
    }

    /// Snapshot times, defaulting to `[t0, t1]`.
    fn schedule(&self) -> Result<Vec<f64>> {
        if self.snapshot_times.is_empty() {
            return Ok(vec![self.t0, self.t1]);
        }
        let times = &self.snapshot_times;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("snapshot_times", "must be strictly increasing"));
        }
        if times[0] < self.t0 || *times.last().expect("nonempty") > self.t1 {
            return Err(Error::param("snapshot_times", "must lie within [t0, t1]"));
        }
        Ok(times.clone())
    }
}

/// Running diagnostics of one solver run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub dt: f64,
    pub steps: usize,
    pub initial_mass: f64,
    pub max_relative_mass_drift: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub max_boundary_excess: f64,
}

fn initial_values(problem: &PmeProblem, grid: &Grid) -> Result<Field> {
    let t0 = problem.t0;
    let field = match &problem.initial {
        InitialCondition::Barenblatt { c, offset } => {
            let spec = BarenblattSpec::new(problem.m.max(1.0 + 1e-12), grid.dim(), *c, *offset)?;
            if problem.m <= 1.0 {
                return Err(Error::param("m", "Barenblatt initial data needs m > 1"));
            }
            spec.sample(grid, t0)?
        }
        InitialCondition::Gaussian { amplitude, width } => {
            if !(*width > 0.0 && *amplitude > 0.0) {
                return Err(Error::param("initial", "gaussian needs positive amplitude and width"));
            }
            Field::from_fn(*grid, t0, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            })
        }
        InitialCondition::Bump { amplitude, radius } => {
            if !(*radius > 0.0 && *amplitude > 0.0) {
                return Err(Error::param("initial", "bump needs positive amplitude and radius"));
            }
            Field::from_fn(*grid, t0, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (1.0 - r2 / (radius * radius)).max(0.0).powi(2)
            })
        }
        InitialCondition::File(path) => {
            let f = Field::read_table(path)?;
            if f.grid != *grid {
                return Err(Error::InvalidInitialData(format!(
                    "{} is sampled on a different grid",
                    path.display()
                )));
            }
            Field { t: t0, ..f }
        }
        InitialCondition::Samples(f) => {
            if f.grid != *grid {
                return Err(Error::InvalidInitialData("samples are on a different grid".into()));
            }
            Field { t: t0, ..f.clone() }
        }
    };
    if let Some((k, v)) = field
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::InvalidInitialData(format!("sample {k} is {v}; data must be >= 0")));
    }
    Ok(field)
}

fn declared_sup(problem: &PmeProblem, data: &Field) -> Result<f64> {
    let sampled = data.sup();
    match problem.sup {
        Some(m) if sampled > m * (1.0 + 1e-12) => Err(Error::InvalidInitialData(format!(
            "initial sup {sampled} exceeds declared M = {m}"
        ))),
        Some(m) => Ok(m),
        None => Ok(sampled),
    }
}

/// Initial field `u_0 + eta` at `t = t0`.
pub fn build_initial(problem: &PmeProblem, grid: &Grid) -> Result<Field> {
    problem.validate()?;
    let mut field = initial_values(problem, grid)?;
    declared_sup(problem, &field)?;
    if field.mass() <= 0.0 {
        return Err(Error::InvalidInitialData("initial data has zero mass".into()));
    }
    if problem.eta > 0.0 {
        field.values.iter_mut().for_each(|v| *v += problem.eta);
    }
    Ok(field)
}

/// Largest stable explicit step for the frozen diffusivity `m (M+eta)^(m-1)`.
pub fn stable_timestep(problem: &PmeProblem, grid: &Grid, config: &SchemeConfig) -> Result<f64> {
    problem.validate()?;
    if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
        return Err(Error::param(
            "cfl_safety",
            format!("must lie in (0, 1], got {}", config.cfl_safety),
        ));
    }
    let sup = declared_sup(problem, &initial_values(problem, grid)?)?;
    let bound = cfl_bound(problem.m, sup + problem.eta, grid, config.cfl_safety);
    match config.dt_override {
        Some(dt) if !(dt > 0.0) => Err(Error::param("dt_override", "must be positive")),
        Some(dt) if dt > bound * (1.0 + 1e-12) => Err(Error::param(
            "dt_override",
            format!("{dt:e} exceeds the stability bound {bound:e}"),
        )),
        Some(dt) => Ok(dt),
        None => Ok(bound),
    }
}

fn cfl_bound(m: f64, top: f64, grid: &Grid, safety: f64) -> f64 {
    let diffusivity = m * top.powf(m - 1.0);
    safety * grid.spacing().powi(2) / (2.0 * grid.dim() as f64 * diffusivity)
}

#[inline]
fn power(u: f64, m: f64) -> f64 {
    if m == 1.0 {
        u
    } else if m == 2.0 {
        u * u
    } else if m == 3.0 {
        u * u * u
    } else {
        u.powf(m)
    }
}

/// Scratch-buffer stepping engine shared by `step` and the solvers.
struct Stepper {
    grid: Grid,
    m: f64,
    boundary: Boundary,
    w: Vec<f64>,
    next: Vec<f64>,
}

impl Stepper {
    fn new(grid: Grid, m: f64, boundary: Boundary) -> Self {
        Self {
            grid,
            m,
            boundary,
            w: vec![0.0; grid.len()],
            next: vec![0.0; grid.len()],
        }
    }

    /// One explicit step in place; returns the first offending cell if the
    /// update left the admissible range.
    fn advance(&mut self, u: &mut Vec<f64>, dt: f64) -> std::result::Result<(), (usize, f64)> {
        let m = self.m;
        for (w, &v) in self.w.iter_mut().zip(u.iter()) {
            *w = power(v, m);
        }
        let r = dt / self.grid.spacing().powi(2);
        let n = self.grid.points_per_axis();
        let w = &self.w;
        let ghost = |inside: f64| match self.boundary {
            Boundary::ZeroFlux => inside,
            Boundary::ZeroValue => 0.0,
        };
        match self.grid.dim() {
            1 => {
                for i in 0..n {
                    let wc = w[i];
                    let left = if i > 0 { w[i - 1] } else { ghost(wc) };
                    let right = if i + 1 < n { w[i + 1] } else { ghost(wc) };
                    self.next[i] = u[i] + r * ((right - wc) - (wc - left));
                }
            }
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        let k = i * n + j;
                        let wc = w[k];
                        let up = if i > 0 { w[k - n] } else { ghost(wc) };
                        let down = if i + 1 < n { w[k + n] } else { ghost(wc) };
                        let left = if j > 0 { w[k - 1] } else { ghost(wc) };
                        let right = if j + 1 < n { w[k + 1] } else { ghost(wc) };
                        let flux = ((down - wc) - (wc - up)) + ((right - wc) - (wc - left));
                        self.next[k] = u[k] + r * flux;
                    }
                }
            }
        }
        std::mem::swap(u, &mut self.next);
        match u.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            Some(k) => Err((k, u[k])),
            None => Ok(()),
        }
    }
}

/// One explicit step of the porous-medium stencil (linear heat stencil when
/// `m == 1`).
pub fn step(field: &Field, m: f64, dt: f64, config: &SchemeConfig) -> Result<Field> {
    if !(m >= 1.0) {
        return Err(Error::param("m", format!("need m >= 1, got {m}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    let mut stepper = Stepper::new(field.grid, m, config.boundary);
    let mut values = field.values.clone();
    stepper
        .advance(&mut values, dt)
        .map_err(|(cell, value)| Error::Unstable {
            t: field.t + dt,
            step: 1,
            cell,
            value,
        })?;
    Field::new(field.grid, field.t + dt, values)
}

/// Support radius of compactly supported data via comparison with a
/// dominating source-type solution; `None` when no finite bound applies.
fn predicted_support_radius(problem: &PmeProblem, data: &Field, sup: f64) -> Option<f64> {
    if problem.m <= 1.0 || problem.eta > 0.0 {
        return None;
    }
    let grid = &data.grid;
    let elapsed = problem.t1 - problem.t0;
    if let Some(spec) = problem.barenblatt_spec(grid.dim()) {
        return spec.support_radius(problem.t1).ok();
    }
    if matches!(problem.initial, InitialCondition::Gaussian { .. }) {
        return None;
    }
    let r0 = (0..grid.len())
        .filter(|&k| data.values[k] > 0.0)
        .map(|k| grid.radius(k))
        .fold(0.0, f64::max)
        + grid.spacing();
    let p = barenblatt_constants(problem.m, grid.dim()).ok()?;
    // B(., tau; C) >= sup on |x| <= r0 once C = kappa r0^2 tau^(-2 mu) + (sup tau^lambda)^(m-1)
    (-60..=60)
        .map(|k| 10f64.powf(k as f64 / 10.0))
        .map(|tau| {
            let c = p.kappa * r0 * r0 * tau.powf(-2.0 * p.mu) + (sup * tau.powf(p.lambda)).powf(problem.m - 1.0);
            (c / p.kappa).sqrt() * (tau + elapsed).powf(p.mu)
        })
        .min_by(f64::total_cmp)
}

/// Domain half-width with a 2x margin over the predicted support radius at `t1`.
pub fn suggest_half_width(problem: &PmeProblem, grid: &Grid) -> Result<Option<f64>> {
    let data = initial_values(problem, grid)?;
    let sup = declared_sup(problem, &data)?;
    Ok(predicted_support_radius(problem, &data, sup).map(|r| 2.0 * r))
}

fn run(problem: &PmeProblem, grid: &Grid, config: &SchemeConfig, m: f64) -> Result<Trajectory> {
    let initial = build_initial(problem, grid)?;
    let raw = initial_values(problem, grid)?;
    let sup = declared_sup(problem, &raw)?;
    let dt_max = stable_timestep(&PmeProblem { m, ..problem.clone() }, grid, config)?;
    let schedule = problem.schedule()?;

    if let Some(radius) = predicted_support_radius(&PmeProblem { m, ..problem.clone() }, &raw, sup) {
        if radius + 2.0 * grid.spacing() >= grid.half_width() {
            return Err(Error::DomainTooSmall {
                t: problem.t1,
                radius,
                half_width: grid.half_width(),
            });
        }
    }

    let mass0 = initial.mass();
    let mut diag = RunDiagnostics {
        dt: dt_max,
        initial_mass: mass0,
        min_value: initial.min(),
        max_value: initial.sup(),
        ..Default::default()
    };
    let edges: Vec<usize> = (0..grid.len()).filter(|&k| grid.is_edge(k)).collect();
    let mut stepper = Stepper::new(*grid, m, config.boundary);
    let mut values = initial.values.clone();
    let mut t = problem.t0;
    let mut snapshots = Vec::with_capacity(schedule.len());

    for &target in &schedule {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let start = t;
            for s in 0..steps {
                stepper.advance(&mut values, h).map_err(|(cell, value)| Error::Unstable {
                    t: start + (s + 1) as f64 * h,
                    step: diag.steps + 1,
                    cell,
                    value,
                })?;
                diag.steps += 1;
                if let Some(tol) = config.boundary_tolerance {
                    let excess = edges
                        .iter()
                        .map(|&k| values[k] - problem.eta)
                        .fold(0.0, f64::max);
                    diag.max_boundary_excess = diag.max_boundary_excess.max(excess);
                    if excess > tol * sup {
                        let radius = (0..grid.len())
                            .filter(|&k| values[k] - problem.eta > tol * sup)
                            .map(|k| grid.radius(k))
                            .fold(0.0, f64::max);
                        return Err(Error::DomainTooSmall {
                            t: start + (s + 1) as f64 * h,
                            radius,
                            half_width: grid.half_width(),
                        });
                    }
                }
            }
            t = target;
        }
        let mass = neumaier_sum(values.iter().copied()) * grid.cell_volume();
        diag.max_relative_mass_drift = diag.max_relative_mass_drift.max((mass - mass0).abs() / mass0);
        let field = Field::new(*grid, t, values.clone())?;
        diag.min_value = diag.min_value.min(field.min());
        diag.max_value = diag.max_value.max(field.sup());
        snapshots.push(field);
    }

    Ok(Trajectory {
        m,
        eta: problem.eta,
        snapshots,
        diagnostics: Some(diag),
    })
}

/// Solve the lifted porous-medium problem; `m == 1` runs the heat stencil.
pub fn solve_pme(problem: &PmeProblem, grid: &Grid, config: &SchemeConfig) -> Result<Trajectory> {
    run(problem, grid, config, problem.m)
}

/// Solve `v_t = Δv` from the same initial data as `problem`.
pub fn solve_heat(problem: &PmeProblem, grid: &Grid, config: &SchemeConfig) -> Result<Trajectory> {
    let heat = PmeProblem {
        m: 1.0,
        ..problem.clone()
    };
    run(&heat, grid, config, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaContinuation {
    /// Run at the smallest regularization level.
    pub trajectory: Trajectory,
    /// `|u_{eta_j} - u_{eta_{j+1}}|_{L1}` at `t1`.
    pub differences: Vec<f64>,
    /// Whether every snapshot pair satisfied `u_{eta_j} >= u_{eta_{j+1}}`.
    pub ordered: bool,
}

/// Run the solver for each `eta` of a strictly decreasing positive sequence,
/// sharing one time step so the discrete comparison principle applies.
pub fn eta_continuation(
    problem: &PmeProblem,
    grid: &Grid,
    config: &SchemeConfig,
    etas: &[f64],
) -> Result<EtaContinuation> {
    if etas.is_empty() {
        return Err(Error::param("etas", "need at least one regularization level"));
    }
    if etas.iter().any(|e| !(*e > 0.0)) || etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("etas", "must be positive and strictly decreasing"));
    }
    let dt = match config.dt_override {
        Some(dt) => dt,
        None => stable_timestep(&problem.clone().with_eta(etas[0]), grid, config)?,
    };
    let shared = SchemeConfig {
        dt_override: Some(dt),
        ..*config
    };
    let runs = etas
        .par_iter()
        .map(|&eta| solve_pme(&problem.clone().with_eta(eta), grid, &shared))
        .collect::<Result<Vec<_>>>()?;

    let dv = grid.cell_volume();
    let differences: Vec<f64> = runs
        .windows(2)
        .map(|pair| {
            let (a, b) = (pair[0].last().expect("snapshot"), pair[1].last().expect("snapshot"));
            neumaier_sum(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs())) * dv
        })
        .collect();
    let ordered = runs.windows(2).all(|pair| {
        pair[0]
            .snapshots
            .iter()
            .zip(&pair[1].snapshots)
            .all(|(a, b)| a.values.iter().zip(&b.values).all(|(x, y)| x >= y))
    });
    if let Some(w) = differences.windows(2).find(|w| w[1] >= w[0]) {
        return Err(Error::NotConverging(format!(
            "successive L1 differences {:e} then {:e}",
            w[0], w[1]
        )));
    }
    let trajectory = runs.into_iter().last().expect("nonempty");
    Ok(EtaContinuation {
        trajectory,
        differences,
        ordered,
    })
}
