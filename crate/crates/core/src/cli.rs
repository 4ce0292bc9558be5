//! Command-line front end.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::analytic::{chi_lower_bound, BarenblattSpec};
use crate::config::{InitialKind, RunConfig, Snapshots};
use crate::error::{Error, Result};
use crate::field::{render_columns, Field, Grid, Trajectory};
use crate::free_boundary::{persistence_check, positivity_set, tangency_profile};
use crate::harness::{self, params, CheckReport};
use crate::inequalities::{poincare_ratio, pow_diff_sweep, TestFunctionKind, TestFunctionSpec};
use crate::report::emit_report;
use crate::solver::{eta_continuation, solve_pme, PmeProblem};
use crate::surface::{build_surfaces, metric_pinch, transformed_pde_residual};

#[derive(Debug, Parser)]
#[command(name = "pmelab", version, about = "Porous medium equation solver and estimate checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the solver and write snapshot tables.
    Simulate,
    /// Run the solver and the configured checks; exit 1 on unexpected outcomes.
    Verify,
    /// Tabulate the source-type solution: support radius, chi(t), profiles.
    Barenblatt,
    /// Sweep the L2 distance to the heat solution over m.
    CompareHeat,
    /// Run the inequality property kit.
    Inequalities,
}

#[derive(Debug, Default, clap::Args)]
pub struct Overrides {
    /// TOML run configuration; defaults to the Barenblatt regression run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub m: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Barenblatt mass; replaces `initial.params.c`.
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    /// Snapshot times, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Check names, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// One regularization level, or a decreasing sequence for continuation.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(mass) = self.mass {
            if cfg.initial.kind != InitialKind::Barenblatt {
                return Err(Error::Config {
                    field: "--mass".into(),
                    reason: "only applies to barenblatt initial data".into(),
                });
            }
            cfg.initial.params.remove("c");
            cfg.initial.params.insert("mass".into(), mass);
        }
        if let Some(times) = &self.t {
            if times.is_empty() {
                return Err(Error::Config {
                    field: "--t".into(),
                    reason: "need at least one time".into(),
                });
            }
            cfg.time.t0 = times[0];
            cfg.time.t1 = *times.last().expect("nonempty");
            cfg.time.snapshots = Snapshots::Times(times.clone());
        }
        if let Some(checks) = &self.checks {
            cfg.checks = checks.clone();
        }
        if let Some(eta) = &self.eta {
            match eta.as_slice() {
                [single] => {
                    cfg.eta = *single;
                    cfg.eta_sequence.clear();
                }
                seq => cfg.eta_sequence = seq.to_vec(),
            }
        }
        if let Some(points) = self.grid {
            cfg.grid.points = points;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

/// Run the configured problem, with eta-continuation when a sequence is given.
pub fn run_solver(cfg: &RunConfig, grid: &Grid) -> Result<(Trajectory, Vec<f64>)> {
    let problem = cfg.problem()?;
    if cfg.eta_sequence.is_empty() {
        Ok((solve_pme(&problem, grid, &cfg.scheme())?, Vec::new()))
    } else {
        let out = eta_continuation(&problem, grid, &cfg.scheme(), &cfg.eta_sequence)?;
        Ok((out.trajectory, out.differences))
    }
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn simulate(cfg: &RunConfig) -> Result<i32> {
    let grid = cfg.grid()?;
    let (tr, diffs) = run_solver(cfg, &grid)?;
    let dir = cfg.output.dir.join("snapshots");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (i, f) in tr.snapshots.iter().enumerate() {
        f.write_table(dir.join(format!("snapshot_{i:04}.tsv")))?;
    }
    let diag = serde_json::json!({
        "diagnostics": tr.diagnostics,
        "eta": tr.eta,
        "eta_differences": diffs,
        "times": tr.times(),
    });
    let text = serde_json::to_string_pretty(&diag).expect("plain data") + "\n";
    write(cfg.output.dir.join("diagnostics.json"), &text)?;
    println!("wrote {} snapshots to {}", tr.snapshots.len(), dir.display());
    Ok(0)
}

/// Solver output at `N` and `2N - 1` points, built on first use.
struct Runs<'a> {
    cfg: &'a RunConfig,
    coarse: Trajectory,
    fine: Option<Trajectory>,
}

impl Runs<'_> {
    fn fine(&mut self) -> Result<&Trajectory> {
        if self.fine.is_none() {
            let grid = self.cfg.grid()?.refined()?;
            self.fine = Some(run_solver(self.cfg, &grid)?.0);
        }
        Ok(self.fine.as_ref().expect("just built"))
    }
}

/// Execute every configured check on a solver run.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckReport>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let (coarse, _) = run_solver(cfg, &grid)?;
    let mut runs = Runs {
        cfg,
        coarse,
        fine: None,
    };
    let first = runs.coarse.snapshots[0].clone();
    let sup = first.sup();
    let threshold = cfg.threshold.positivity * sup;
    let (m, n) = (cfg.m, cfg.n);
    let mut reports = Vec::new();
    for check in &cfg.checks {
        let tr = &runs.coarse;
        match check.as_str() {
            "mass" => reports.push(harness::check_mass(tr)?),
            "ab_time" => reports.push(harness::check_ab_time(tr, m)?),
            "ab_pressure" => reports.push(harness::check_ab_pressure_trajectory(tr, n)?),
            "gradient_bound" => reports.push(harness::check_gradient_bound_trajectory(tr, cfg.holder_h()?, sup)?),
            "decay" => reports.push(harness::check_decay(tr, m, n)?),
            "propagation" => reports.push(harness::check_propagation(tr, m, n, first.mass())?),
            "persistence" => {
                let p = params(&[("m", m), ("threshold", threshold)]);
                reports.push(persistence_check(tr, threshold)?.to_check(p));
            }
            "metric_pinch" => {
                let beta = cfg.beta.expect("validated");
                let surfaces = build_surfaces(tr, beta, cfg.holder_h()?)?;
                let positive: Vec<_> = surfaces.into_iter().filter(|s| s.base.t > 0.0).collect();
                reports.push(metric_pinch(&positive, m, n)?);
            }
            "transformed_pde" => {
                reports.push(transformed_pde_residual(tr, cfg.beta.expect("validated"), m, cfg.holder_h()?)?)
            }
            "heat_distance" => {
                let problem = cfg.problem()?;
                reports.extend(harness::heat_closeness_sweep(
                    &cfg.heat.m_values,
                    &cfg.heat.k,
                    &problem,
                    &grid,
                    &cfg.scheme(),
                )?);
            }
            "holder" | "control.holder" => {
                let h = if check == "holder" { cfg.holder_h()? } else { cfg.control_holder_h() };
                let (tau, radius) = holder_window(cfg, tr);
                let pairs = cfg.holder.pairs.unwrap_or(harness::DEFAULT_RANDOM_PAIRS);
                let a = harness::holder_quotient(tr, h, tau, radius, cfg.seed, pairs)?;
                let b = harness::holder_quotient(runs.fine()?, h, tau, radius, cfg.seed, pairs)?;
                let mut r = harness::holder_stability(&a, &b, &[("m", m), ("K", radius), ("tau", tau)]);
                if check != "holder" {
                    r = r.into_control();
                }
                reports.push(r);
            }
            "tangency" => {
                let (beta, h) = (cfg.beta.expect("validated"), cfg.holder_h()?);
                let profile = |f: &Field| -> Result<f64> {
                    let mask = positivity_set(f, threshold)?;
                    Ok(tangency_profile(f, beta, &mask, h)?.max_gradient)
                };
                let g0 = profile(tr.last().expect("nonempty"))?;
                let g1 = profile(runs.fine()?.last().expect("nonempty"))?;
                let stat = if g0 > 0.0 { g1 / g0 } else { 0.0 };
                let p = params(&[("m", m), ("beta", beta), ("h", h), ("coarse", g0), ("fine", g1)]);
                reports.push(CheckReport::upper("tangency", p, stat, 0.5, 0.05));
            }
            "control.ab_time" => {
                reports.push(harness::check_ab_time(tr, cfg.control_label_m()?)?.into_control());
            }
            "control.gradient_bound" => {
                let late = runs.coarse.last().expect("nonempty").t * 100.0;
                let frozen = harness::relabel_time(&first, late.max(1.0));
                let r = harness::check_gradient_bound(&frozen, m, cfg.holder_h()?, sup)?;
                reports.push(r.into_control());
            }
            other => unreachable!("validated check name {other}"),
        }
    }
    Ok(reports)
}

fn holder_window(cfg: &RunConfig, tr: &Trajectory) -> (f64, f64) {
    let tau = tr.snapshots.iter().map(|f| f.t).find(|t| *t > 0.0).unwrap_or(cfg.time.t1);
    let radius = cfg.holder.radius.unwrap_or(cfg.domain.half_width);
    (tau, radius)
}

fn print_reports(reports: &[CheckReport]) -> i32 {
    let mut status = 0;
    for r in reports {
        let verdict = match (r.pass, r.is_control()) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "PASS (control failed as expected)",
            (true, true) => "FAIL (control passed)",
        };
        println!(
            "{verdict:<5} {:<24} statistic={:e} bound={:e} tolerance={:e}",
            r.name, r.statistic, r.bound, r.tolerance
        );
        if !r.as_expected() {
            status = 1;
        }
    }
    status
}

fn finish(cfg: &RunConfig, reports: Vec<CheckReport>) -> Result<i32> {
    let mut reports = reports;
    harness::sort_reports(&mut reports);
    emit_report(&reports, &cfg.output.dir)?;
    Ok(print_reports(&reports))
}

fn barenblatt(cfg: &RunConfig) -> Result<i32> {
    let offset = 0.0;
    let spec = match (cfg.initial.params.get("mass"), cfg.initial.params.get("c")) {
        (Some(&mass), _) => BarenblattSpec::with_mass(cfg.m, cfg.n, mass, offset)?,
        (None, Some(&c)) => BarenblattSpec::new(cfg.m, cfg.n, c, offset)?,
        (None, None) => BarenblattSpec::with_mass(cfg.m, cfg.n, 1.0, offset)?,
    };
    let mass = spec.mass()?;
    let times = cfg.snapshot_times();
    let mut cols: [Vec<f64>; 6] = Default::default();
    for &t in &times {
        let radius = spec.support_radius(t)?;
        let chi = chi_lower_bound(t, cfg.m, cfg.n, mass)?;
        for (c, v) in cols.iter_mut().zip([t, radius, chi, radius / chi, spec.center_value(t)?, mass]) {
            c.push(v);
        }
    }
    let mut text = String::from("t\tradius\tchi\tratio\tcenter\tmass\n");
    for i in 0..times.len() {
        let row: Vec<String> = cols.iter().map(|c| format!("{:e}", c[i])).collect();
        text.push_str(&row.join("\t"));
        text.push('\n');
    }
    write(cfg.output.dir.join("barenblatt.tsv"), &text)?;
    print!("{text}");
    let grid = cfg.grid()?;
    for (i, &t) in times.iter().enumerate() {
        let f = spec.sample(&grid, t)?;
        let body = render_columns(&grid, t, &["u"], &[&f.values]);
        write(cfg.output.dir.join("profiles").join(format!("profile_{i:04}.tsv")), &body)?;
    }
    Ok(0)
}

fn compare_heat(cfg: &RunConfig) -> Result<i32> {
    let mut cfg = cfg.clone();
    cfg.checks = vec!["heat_distance".into()];
    cfg.validate()?;
    let problem: PmeProblem = cfg.problem()?;
    let reports = harness::heat_closeness_sweep(&cfg.heat.m_values, &cfg.heat.k, &problem, &cfg.grid()?, &cfg.scheme())?;
    finish(&cfg, reports)
}

/// Cases in the randomized power-difference sweep.
pub const POW_DIFF_CASES: usize = 1_000_000;

/// Seeded random bumps in the 2D Poincaré sweep.
pub const RANDOM_BUMPS: u64 = 100;

fn inequalities(cfg: &RunConfig) -> Result<i32> {
    let sweep = pow_diff_sweep(POW_DIFF_CASES, cfg.seed);
    let mut reports = vec![CheckReport::upper(
        "pow_diff",
        params(&[("cases", sweep.cases as f64), ("equalities", sweep.equalities as f64), ("seed", cfg.seed as f64)]),
        sweep.violations as f64,
        0.0,
        0.0,
    )];
    for (name, kind) in [
        ("poincare.polynomial", TestFunctionKind::PolynomialBump),
        ("poincare.cosine", TestFunctionKind::CosineBump),
    ] {
        let r = poincare_ratio(&TestFunctionSpec::new(kind, 1.0, 1))?;
        let p = params(&[("rho", 1.0), ("n", 1.0), ("l2", r.l2_norm), ("grad", r.grad_norm)]);
        reports.push(CheckReport::upper(name, p, r.ratio, 1.0, 1e-3));
    }
    let worst = (0..RANDOM_BUMPS)
        .map(|k| {
            let kind = TestFunctionKind::RandomSmooth {
                seed: cfg.seed.wrapping_add(k),
                modes: 6,
            };
            poincare_ratio(&TestFunctionSpec::new(kind, 1.0, 2)).map(|r| r.ratio)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let p = params(&[("rho", 1.0), ("n", 2.0), ("count", RANDOM_BUMPS as f64), ("seed", cfg.seed as f64)]);
    reports.push(CheckReport::upper("poincare.random", p, worst, 1.0, 1e-3));
    finish(cfg, reports)
}

/// Dispatch a parsed command line; returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Simulate => {
            cfg.validate()?;
            simulate(&cfg)
        }
        Command::Verify => {
            let reports = run_checks(&cfg)?;
            finish(&cfg, reports)
        }
        Command::Barenblatt => {
            if !(cfg.m > 1.0) {
                return Err(Error::Config {
                    field: "m".into(),
                    reason: "source-type solution needs m > 1".into(),
                });
            }
            barenblatt(&cfg)
        }
        Command::CompareHeat => compare_heat(&cfg),
        Command::Inequalities => inequalities(&cfg),
    }
}
