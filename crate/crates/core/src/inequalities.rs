//! Property kit for `|a - b|^beta <= |a^beta - b^beta|` (`beta > 1`) and the
//! Poincaré inequality `|u|_{L2(B_rho)} <= rho |grad u|_{L2(B_rho)}` for
//! functions vanishing on the sphere.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{composite_simpson, neumaier_sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowDiff {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn pow_diff_holds(a: f64, b: f64, beta: f64) -> Result<PowDiff> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::param("a, b", format!("need finite a, b >= 0, got {a}, {b}")));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("need beta > 1, got {beta}")));
    }
    let lhs = (a - b).abs().powf(beta);
    let (pa, pb) = (a.powf(beta), b.powf(beta));
    let rhs = (pa - pb).abs();
    // a few ulps of the larger power absorb rounding in pow and the subtraction
    let slack = 8.0 * f64::EPSILON * pa.max(pb);
    Ok(PowDiff {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cases: usize,
    pub violations: usize,
    pub equalities: usize,
}

/// Seeded sweep over `a, b` uniform in `[0, 10]` and `beta` uniform in `(1, 8]`.
pub fn pow_diff_sweep(cases: usize, seed: u64) -> SweepSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = SweepSummary {
        cases,
        violations: 0,
        equalities: 0,
    };
    for _ in 0..cases {
        let a = rng.random_range(0.0..=10.0);
        let b = rng.random_range(0.0..=10.0);
        let beta = 8.0 - rng.random_range(0.0..7.0);
        let r = pow_diff_holds(a, b, beta).expect("sampled inside the domain");
        summary.violations += usize::from(!r.holds);
        summary.equalities += usize::from(r.lhs == r.rhs);
    }
    summary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunctionKind {
    /// `1 - |y|^2`.
    PolynomialBump,
    /// `cos(pi |y| / 2)`.
    CosineBump,
    /// `(1 - |y|^2) * (1 + sum_j a_j cos(w_j . y + p_j))` with seeded modes.
    RandomSmooth { seed: u64, modes: usize },
}

/// Test function `u(x) = amplitude * f(x / rho)` on the ball of radius `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub kind: TestFunctionKind,
    pub rho: f64,
    pub n: usize,
    /// Intervals per axis (radial and angular in 2D).
    pub samples: usize,
    pub amplitude: f64,
}

impl TestFunctionSpec {
    pub fn new(kind: TestFunctionKind, rho: f64, n: usize) -> Self {
        let samples = if n == 1 { 2000 } else { 500 };
        Self {
            kind,
            rho,
            n,
            samples,
            amplitude: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.n == 1 || self.n == 2) {
            return Err(Error::param("n", format!("dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param("rho", format!("must be positive, got {}", self.rho)));
        }
        let min = if self.n == 1 { 1000 } else { 500 };
        if self.samples < min {
            return Err(Error::param("samples", format!("need at least {min} per axis, got {}", self.samples)));
        }
        if !(self.amplitude.is_finite() && self.amplitude != 0.0) {
            return Err(Error::param("amplitude", "must be finite and nonzero"));
        }
        Ok(())
    }
}

struct Modes(Vec<(f64, [f64; 2], f64)>);

impl Modes {
    fn draw(seed: u64, count: usize, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Modes(
            (0..count)
                .map(|_| {
                    let a = rng.random_range(-0.5..0.5);
                    let w0 = rng.random_range(-4.0..4.0);
                    let w1 = if n == 2 { rng.random_range(-4.0..4.0) } else { 0.0 };
                    (a, [w0, w1], rng.random_range(0.0..2.0 * PI))
                })
                .collect(),
        )
    }

    /// Series value and gradient at `y`.
    fn eval(&self, y: [f64; 2]) -> (f64, [f64; 2]) {
        let mut g = 1.0;
        let mut dg = [0.0; 2];
        for (a, w, p) in &self.0 {
            let arg = w[0] * y[0] + w[1] * y[1] + p;
            g += a * arg.cos();
            let s = -a * arg.sin();
            dg[0] += s * w[0];
            dg[1] += s * w[1];
        }
        (g, dg)
    }
}

/// `f(y)` and `grad f(y)` on the unit ball.
fn unit_profile(kind: &TestFunctionKind, modes: Option<&Modes>, y: [f64; 2]) -> (f64, [f64; 2]) {
    let r2 = y[0] * y[0] + y[1] * y[1];
    match kind {
        TestFunctionKind::PolynomialBump => (1.0 - r2, [-2.0 * y[0], -2.0 * y[1]]),
        TestFunctionKind::CosineBump => {
            let r = r2.sqrt();
            let v = (0.5 * PI * r).cos();
            if r == 0.0 {
                return (v, [0.0, 0.0]);
            }
            let d = -0.5 * PI * (0.5 * PI * r).sin() / r;
            (v, [d * y[0], d * y[1]])
        }
        TestFunctionKind::RandomSmooth { .. } => {
            let (g, dg) = modes.expect("modes drawn for random kind").eval(y);
            let b = 1.0 - r2;
            (b * g, [-2.0 * y[0] * g + b * dg[0], -2.0 * y[1] * g + b * dg[1]])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareResult {
    pub l2_norm: f64,
    pub grad_norm: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Relative size of boundary values tolerated before a function is rejected.
const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Quadrature of `|u|^2` and `|grad u|^2` on the ball for an arbitrary
/// `u(x) -> (value, gradient)`.
pub fn poincare_ratio_with(
    n: usize,
    rho: f64,
    samples: usize,
    u: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Sync,
) -> Result<PoincareResult> {
    let (l2, h1, scale, edge) = match n {
        1 => {
            let l2 = composite_simpson(|x| u([x, 0.0]).0.powi(2), -rho, rho, samples);
            let h1 = composite_simpson(|x| u([x, 0.0]).1[0].powi(2), -rho, rho, samples);
            let scale = (0..=samples)
                .map(|i| u([-rho + 2.0 * rho * i as f64 / samples as f64, 0.0]).0.abs())
                .fold(0.0, f64::max);
            let edge = u([-rho, 0.0]).0.abs().max(u([rho, 0.0]).0.abs());
            (l2, h1, scale, edge)
        }
        2 => {
            let dtheta = 2.0 * PI / samples as f64;
            let angles: Vec<f64> = (0..samples).map(|j| j as f64 * dtheta).collect();
            let radial = |pick: &(dyn Fn((f64, [f64; 2])) -> f64 + Sync)| {
                let per_angle: Vec<f64> = angles
                    .par_iter()
                    .map(|&th| {
                        let (c, s) = (th.cos(), th.sin());
                        composite_simpson(|r| r * pick(u([r * c, r * s])), 0.0, rho, samples)
                    })
                    .collect();
                neumaier_sum(per_angle) * dtheta
            };
            let l2 = radial(&|(v, _)| v * v);
            let h1 = radial(&|(_, g)| g[0] * g[0] + g[1] * g[1]);
            let scale = angles
                .iter()
                .flat_map(|&th| (0..=20).map(move |i| (th, rho * i as f64 / 20.0)))
                .map(|(th, r)| u([r * th.cos(), r * th.sin()]).0.abs())
                .fold(0.0, f64::max);
            let edge = angles
                .iter()
                .map(|&th| u([rho * th.cos(), rho * th.sin()]).0.abs())
                .fold(0.0, f64::max);
            (l2, h1, scale, edge)
        }
        _ => return Err(Error::param("n", format!("dimension must be 1 or 2, got {n}"))),
    };
    if edge > BOUNDARY_TOLERANCE * scale {
        return Err(Error::InvalidInitialData(format!(
            "test function is {edge:e} on the boundary (max {scale:e})"
        )));
    }
    if !(h1 > 0.0 && h1.is_finite() && l2.is_finite()) {
        return Err(Error::InvalidInitialData("test function has no finite nonzero gradient norm".into()));
    }
    let (l2_norm, grad_norm) = (l2.sqrt(), h1.sqrt());
    let ratio = l2_norm / grad_norm;
    Ok(PoincareResult {
        l2_norm,
        grad_norm,
        ratio,
        holds: ratio <= rho * (1.0 + 1e-3),
    })
}

pub fn poincare_ratio(spec: &TestFunctionSpec) -> Result<PoincareResult> {
    spec.validate()?;
    let modes = match spec.kind {
        TestFunctionKind::RandomSmooth { seed, modes } => Some(Modes::draw(seed, modes, spec.n)),
        _ => None,
    };
    let (rho, amp) = (spec.rho, spec.amplitude);
    poincare_ratio_with(spec.n, rho, spec.samples, |x| {
        let (v, g) = unit_profile(&spec.kind, modes.as_ref(), [x[0] / rho, x[1] / rho]);
        (amp * v, [amp * g[0] / rho, amp * g[1] / rho])
    })
}
