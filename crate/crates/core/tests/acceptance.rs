//! Acceptance runner: one line per criterion, exit status nonzero when the set
//! of failing criteria differs from `KNOWN_FAILURES`.

use std::process::ExitCode;
use std::time::Instant;

use pmelab::analytic::{chi_lower_bound, gradient_bound_constant, BarenblattSpec};
use pmelab::field::{Grid, Trajectory};
use pmelab::free_boundary::{default_threshold, positivity_set, tangency_profile};
use pmelab::harness::{self, CheckReport};
use pmelab::inequalities::{poincare_ratio, pow_diff_sweep, TestFunctionKind, TestFunctionSpec};
use pmelab::solver::{solve_pme, InitialCondition, PmeProblem, SchemeConfig};
use pmelab::surface::{build_surfaces, metric_pinch, pde_residuals};
use pmelab::Result;

/// Criteria that fail as stated. The metric-flattening exponent is only an
/// upper bound on the decay rate; the source-type solution decays faster.
const KNOWN_FAILURES: &[u32] = &[8];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Result<Self> {
        Ok(Self { pass, detail })
    }
}

fn regression_spec() -> BarenblattSpec {
    BarenblattSpec::new(2.0, 1, 1.0 / 12.0, 0.0).expect("valid")
}

fn regression_run(points: usize) -> Result<Trajectory> {
    let grid = Grid::new(1, 4.0, points)?;
    let problem = PmeProblem::new(2.0, InitialCondition::Barenblatt { c: 1.0 / 12.0, offset: 0.0 }, 1.0, 2.0)
        .with_snapshots((0..=10).map(|i| 1.0 + 0.1 * i as f64).collect());
    solve_pme(&problem, &grid, &SchemeConfig::default())
}

fn l1_error(tr: &Trajectory) -> Result<f64> {
    let last = tr.last().expect("snapshots");
    let exact = regression_spec().sample(&last.grid, last.t)?;
    let dx = last.grid.spacing();
    Ok(last.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx)
}

fn barenblatt_regression() -> Result<Outcome> {
    let start = Instant::now();
    let coarse = regression_run(401)?;
    let seconds = start.elapsed().as_secs_f64();
    let fine = regression_run(801)?;
    let mass = regression_spec().mass()?;
    let (e0, e1) = (l1_error(&coarse)?, l1_error(&fine)?);
    let ratio = e0 / e1;
    Outcome::new(
        e0 <= 0.02 * mass && ratio >= 3.0 && seconds <= 60.0,
        format!("L1 error {:.3e} ({:.3}% of mass), refinement ratio {ratio:.2}, {seconds:.2}s", e0, 100.0 * e0 / mass),
    )
}

fn mass_conservation() -> Result<Outcome> {
    let tr = regression_run(401)?;
    let report = harness::check_mass(&tr)?;
    let drift = tr.diagnostics.as_ref().expect("solver run").max_relative_mass_drift;
    Outcome::new(
        report.pass && drift <= 1e-12,
        format!("max relative drift {drift:.2e} over every step, {:.2e} at snapshots", report.statistic),
    )
}

fn pressure_identity() -> Result<Outcome> {
    let grid = Grid::new(1, 4.0, 401)?;
    let tol = 5.0 * grid.spacing().powi(2);
    let mut worst: f64 = 0.0;
    for t in [1.0, 2.0, 4.0] {
        let f = regression_spec().sample(&grid, t)?;
        let r = harness::ab_pressure_residuals(&f, 2.0, 1)?;
        if r.is_empty() {
            return Outcome::new(false, format!("no interior cells at t = {t}"));
        }
        worst = r.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Outcome::new(worst <= tol, format!("max |residual| {worst:.2e} against {tol:.2e}"))
}

fn gradient_bound() -> Result<Outcome> {
    let tr = regression_run(401)?;
    let sup = tr.snapshots[0].sup();
    let c1 = gradient_bound_constant(2.0, 1.5, sup)?;
    let oracle = 4.0 / 9.0 / (sup * sup);
    let report = harness::check_gradient_bound_trajectory(&tr, 1.5, sup)?;
    let dx = tr.grid().expect("snapshots").spacing();
    Outcome::new(
        (c1 - oracle).abs() <= 1e-12 * oracle && report.statistic <= 1.0 + dx,
        format!("statistic {:.4} against 1 + dx = {:.4}", report.statistic, 1.0 + dx),
    )
}

fn propagation() -> Result<Outcome> {
    const RATIO: f64 = 2.62;
    let spec = BarenblattSpec::with_mass(2.0, 1, 1.0, 0.0)?;
    let times: Vec<f64> = (0..=6).map(|k| 2f64.powi(k)).collect();
    let grid = Grid::new(1, 10.0, 801)?;
    let problem = PmeProblem::new(2.0, InitialCondition::Barenblatt { c: spec.c, offset: 0.0 }, 1.0, 64.0)
        .with_snapshots(times.clone());
    let tr = solve_pme(&problem, &grid, &SchemeConfig::default())?;
    let report = harness::check_propagation(&tr, 2.0, 1, 1.0)?;
    let dx = grid.spacing();
    let mut ratio_dev: f64 = 0.0;
    let mut below: usize = 0;
    for (t, radius, chi) in harness::propagation_profile(&tr, 2.0, 1, 1.0)? {
        if radius < chi - dx {
            below += 1;
        }
        let exact = spec.support_radius(t)? / chi_lower_bound(t, 2.0, 1, 1.0)?;
        for r in [exact, radius / chi] {
            ratio_dev = ratio_dev.max((r - RATIO).abs() / RATIO);
        }
    }
    Outcome::new(
        report.pass && below == 0 && ratio_dev <= 0.03,
        format!(
            "min margin {:.3}, {below} snapshots below chi - dx, ratio deviation {:.2}%",
            report.margin,
            100.0 * ratio_dev
        ),
    )
}

fn heat_closeness() -> Result<Outcome> {
    let grid = Grid::new(1, 15.0, 601)?;
    let gaussian = InitialCondition::Gaussian {
        amplitude: 1.0,
        width: std::f64::consts::FRAC_1_SQRT_2,
    };
    let problem = PmeProblem::new(1.5, gaussian, 0.0, 1.0).with_snapshots((0..=20).map(|i| i as f64 / 20.0).collect());
    let ms = [1.5, 1.25, 1.1, 1.0];
    let reports = harness::heat_closeness_sweep(&ms, &[10.0], &problem, &grid, &SchemeConfig::default())?;
    let stat = |m: f64| {
        reports
            .iter()
            .find(|r| r.name == "heat_distance" && r.param("m") == Some(m))
            .map(|r| r.statistic)
            .expect("one report per m")
    };
    let s: Vec<f64> = ms.iter().map(|&m| stat(m)).collect();
    let decreasing = s[..3].windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        decreasing && s[3] <= f64::EPSILON,
        format!("statistics {:.3e}, {:.3e}, {:.3e}; m = 1 gives {:e}", s[0], s[1], s[2], s[3]),
    )
}

fn tangency_and_transformed_pde() -> Result<Outcome> {
    const BETA: f64 = 3.5;
    const H: f64 = 1.5;
    let spec = regression_spec();
    let mut grid = Grid::new(1, 4.0, 201)?;
    let (mut gradients, mut interior, mut near) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..4 {
        let dx = grid.spacing();
        let dt = 2.0 * dx * dx;
        let tr = spec.trajectory(&grid, &[8.0 - dt, 8.0, 8.0 + dt])?;
        let f = &tr.snapshots[1];
        let mask = positivity_set(f, default_threshold(f.sup()))?;
        gradients.push(tangency_profile(f, BETA, &mask, H)?.max_gradient);
        let r = pde_residuals(&tr, BETA, 2.0, H)?;
        interior.push(r[0].interior);
        near.push(r[0].near_interface);
        grid = grid.refined()?;
    }
    let ratios = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| w[0] / w[1]).collect() };
    let (tg, ir) = (ratios(&gradients), ratios(&interior));
    let near_ok = near.windows(2).all(|w| w[1] < w[0]);
    let pass = tg.iter().all(|r| *r >= 1.8) && ir.iter().all(|r| (3.0..=5.0).contains(r)) && near_ok;
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ");
    Outcome::new(
        pass,
        format!(
            "tangency ratios {}; interior ratios {}; near-interface {:.2e} -> {:.2e}",
            fmt(&tg),
            fmt(&ir),
            near[0],
            near[near.len() - 1]
        ),
    )
}

fn metric_flattening() -> Result<Outcome> {
    let times: Vec<f64> = (0..=8).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let grid = Grid::new(1, 4.0, 401)?;
    let problem = PmeProblem::new(2.0, InitialCondition::Barenblatt { c: 1.0 / 12.0, offset: 0.0 }, 1.0, 16.0)
        .with_snapshots(times);
    let tr = solve_pme(&problem, &grid, &SchemeConfig::default())?;
    let report = metric_pinch(&build_surfaces(&tr, 2.0, 1.5)?, 2.0, 1)?;
    let (fitted, predicted) = (
        report.param("exponent_fitted").expect("set"),
        report.param("exponent_predicted").expect("set"),
    );
    Outcome::new(
        report.pass,
        format!(
            "fitted exponent {fitted:.4} against {predicted:.4}, relative deviation {:.3} (bound 0.15)",
            report.statistic
        ),
    )
}

fn inequality_kit() -> Result<Outcome> {
    let sweep = pow_diff_sweep(1_000_000, 0);
    let poly = poincare_ratio(&TestFunctionSpec::new(TestFunctionKind::PolynomialBump, 1.0, 1))?;
    let cosine = poincare_ratio(&TestFunctionSpec::new(TestFunctionKind::CosineBump, 1.0, 1))?;
    let quad_err = [
        (poly.l2_norm.powi(2) - 16.0 / 15.0).abs(),
        (poly.grad_norm.powi(2) - 8.0 / 3.0).abs(),
        (poly.ratio - 0.4f64.sqrt()).abs(),
        (cosine.l2_norm.powi(2) - 1.0).abs(),
        (cosine.grad_norm.powi(2) - std::f64::consts::PI.powi(2) / 4.0).abs(),
        (cosine.ratio - 2.0 / std::f64::consts::PI).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let mut dilation: f64 = 0.0;
    for kind in [TestFunctionKind::PolynomialBump, TestFunctionKind::CosineBump] {
        let unit = poincare_ratio(&TestFunctionSpec::new(kind.clone(), 1.0, 1))?.ratio;
        for rho in [0.25, 3.0, 40.0] {
            let r = poincare_ratio(&TestFunctionSpec::new(kind.clone(), rho, 1))?.ratio;
            dilation = dilation.max((r - rho * unit).abs() / (rho * unit));
        }
    }
    Outcome::new(
        sweep.violations == 0 && quad_err <= 1e-6 && poly.holds && cosine.holds && dilation <= 1e-10,
        format!(
            "{} violations in {} cases; quadrature error {quad_err:.1e}; dilation error {dilation:.1e}",
            sweep.violations, sweep.cases
        ),
    )
}

fn negative_controls() -> Result<Outcome> {
    let grid = Grid::new(1, 4.0, 201)?;
    let problem = PmeProblem::new(2.0, InitialCondition::Barenblatt { c: 1.0 / 12.0, offset: 0.0 }, 1.0, 2.0)
        .with_snapshots((0..=20).map(|i| 1.0 + 0.05 * i as f64).collect());
    let config = SchemeConfig::default();
    let coarse = solve_pme(&problem, &grid, &config)?;
    let fine = solve_pme(&problem, &grid.refined()?, &config)?;
    let first = &coarse.snapshots[0];

    // exponent label 1 + 2/lambda instead of the true m = 2
    let mislabel = harness::check_ab_time(&coarse, 7.0)?;
    let late = harness::relabel_time(first, 100.0 * coarse.last().expect("snapshots").t);
    let frozen = harness::check_gradient_bound(&late, 2.0, 1.5, first.sup())?;
    let h = 0.5;
    let a = harness::holder_quotient(&coarse, h, 1.0, 4.0, 0, harness::DEFAULT_RANDOM_PAIRS)?;
    let b = harness::holder_quotient(&fine, h, 1.0, 4.0, 0, harness::DEFAULT_RANDOM_PAIRS)?;
    let holder = harness::holder_stability(&a, &b, &[("m", 2.0)]);
    let all: [(&str, &CheckReport); 3] = [("mislabel", &mislabel), ("frozen", &frozen), ("holder", &holder)];
    let detail = all
        .iter()
        .map(|(n, r)| format!("{n} {}", if r.pass { "passed" } else { "failed" }))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(all.iter().all(|(_, r)| !r.pass), detail)
}

type Criterion = fn() -> Result<Outcome>;

const CRITERIA: [(u32, &str, Criterion); 10] = [
    (1, "source-type regression", barenblatt_regression),
    (2, "mass conservation", mass_conservation),
    (3, "pressure equality case", pressure_identity),
    (4, "gradient bound", gradient_bound),
    (5, "support propagation", propagation),
    (6, "heat closeness trend", heat_closeness),
    (7, "tangency and transformed equation", tangency_and_transformed_pde),
    (8, "metric flattening", metric_flattening),
    (9, "inequality kit", inequality_kit),
    (10, "negative controls", negative_controls),
];

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for (id, name, run) in CRITERIA {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let verdict = match (outcome.pass, KNOWN_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known)",
        };
        println!(
            "criterion {id:>2} {verdict:<12} {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {} passed, {} failed",
        CRITERIA.len() - failed.len(),
        failed.len()
    );
    if failed != KNOWN_FAILURES {
        println!("acceptance: failing set {failed:?} differs from the known set {KNOWN_FAILURES:?}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
