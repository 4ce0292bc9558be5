//! Closed-form reference objects: the source-type (Barenblatt) solution, the
//! exact heat solution, the propagation lower bound `chi(t)`, the admissible
//! Hölder exponent rule and the explicit gradient-bound constant.
//!
//! Everything here is a pure function of its inputs.

use std::f64::consts::PI;

use libm::tgamma as gamma;

use crate::error::{Error, Result};
use crate::field::{Field, Grid, Trajectory};
use crate::numerics::{adaptive_simpson, gauss_legendre16, normal_mass, normal_pdf};

/// Relative tolerance for the mass quadrature.
pub const MASS_QUADRATURE_TOL: f64 = 1e-10;

/// Self-similarity exponents of the source-type solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarParams {
    /// Amplitude decay exponent, `n / (n(m-1) + 2)`.
    pub lambda: f64,
    /// Spreading exponent, `lambda / n`.
    pub mu: f64,
    /// Profile coefficient, `lambda (m-1) / (2 m n)`.
    pub kappa: f64,
}

fn check_exponent(m: f64) -> Result<()> {
    if !(m.is_finite() && m > 1.0) {
        return Err(Error::param("m", format!("need m > 1 (degenerate regime), got {m}")));
    }
    Ok(())
}

fn check_dim(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::param("n", "dimension must be >= 1"));
    }
    Ok(())
}

pub fn barenblatt_constants(m: f64, n: usize) -> Result<SelfSimilarParams> {
    check_exponent(m)?;
    check_dim(n)?;
    let nf = n as f64;
    let lambda = nf / (nf * (m - 1.0) + 2.0);
    Ok(SelfSimilarParams {
        lambda,
        mu: lambda / nf,
        kappa: lambda * (m - 1.0) / (2.0 * m * nf),
    })
}

/// Source-type solution `B(x, t; C)` evaluated on the shifted clock
/// `t + t0`, so that `t0 > 0` gives a bounded profile at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattSpec {
    pub m: f64,
    pub n: usize,
    pub c: f64,
    pub t0: f64,
}

impl BarenblattSpec {
    pub const DEFAULT_OFFSET: f64 = 1.0;

    pub fn new(m: f64, n: usize, c: f64, t0: f64) -> Result<Self> {
        check_exponent(m)?;
        check_dim(n)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::param("C", format!("profile constant must be positive, got {c}")));
        }
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::param("t0", format!("time offset must be >= 0, got {t0}")));
        }
        Ok(Self { m, n, c, t0 })
    }

    /// Spec whose total mass equals `mass`. The mass scales exactly as
    /// `C^(1/(m-1) + n/2)`, so one quadrature at `C = 1` fixes the map.
    pub fn with_mass(m: f64, n: usize, mass: f64, t0: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::param("mass", format!("must be positive, got {mass}")));
        }
        let unit = Self::new(m, n, 1.0, t0)?.mass()?;
        let power = 1.0 / (m - 1.0) + n as f64 / 2.0;
        Self::new(m, n, (mass / unit).powf(1.0 / power), t0)
    }

    pub fn params(&self) -> SelfSimilarParams {
        barenblatt_constants(self.m, self.n).expect("validated at construction")
    }

    fn clock(&self, t: f64) -> Result<f64> {
        let tc = t + self.t0;
        if !(tc.is_finite() && tc > 0.0) {
            return Err(Error::param("t", format!("need t + t0 > 0, got {tc}")));
        }
        Ok(tc)
    }

    fn profile(&self, r2: f64, tc: f64) -> f64 {
        let p = self.params();
        let base = self.c - p.kappa * r2 / tc.powf(2.0 * p.mu);
        if base <= 0.0 {
            0.0
        } else {
            tc.powf(-p.lambda) * base.powf(1.0 / (self.m - 1.0))
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        let tc = self.clock(t)?;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Ok(self.profile(r2, tc))
    }

    /// Exact time derivative `B_t`; zero outside the support.
    pub fn time_derivative(&self, x: &[f64], t: f64) -> Result<f64> {
        let tc = self.clock(t)?;
        let p = self.params();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let base = self.c - p.kappa * r2 / tc.powf(2.0 * p.mu);
        if base <= 0.0 {
            return Ok(0.0);
        }
        let e = 1.0 / (self.m - 1.0);
        let dbase = 2.0 * p.mu * p.kappa * r2 * tc.powf(-2.0 * p.mu - 1.0);
        Ok(-p.lambda * tc.powf(-p.lambda - 1.0) * base.powf(e)
            + tc.powf(-p.lambda) * e * base.powf(e - 1.0) * dbase)
    }

    pub fn support_radius(&self, t: f64) -> Result<f64> {
        let tc = self.clock(t)?;
        let p = self.params();
        Ok(tc.powf(p.mu) * (self.c / p.kappa).sqrt())
    }

    pub fn center_value(&self, t: f64) -> Result<f64> {
        let tc = self.clock(t)?;
        Ok(self.profile(0.0, tc))
    }

    /// Total mass, by adaptive quadrature over the support ball.
    pub fn mass(&self) -> Result<f64> {
        self.mass_on_clock(1.0)
    }

    /// Mass evaluated from the profile at time `t`; equal to [`Self::mass`]
    /// for every admissible `t`.
    pub fn mass_at(&self, t: f64) -> Result<f64> {
        let tc = self.clock(t)?;
        self.mass_on_clock(tc)
    }

    fn mass_on_clock(&self, tc: f64) -> Result<f64> {
        let p = self.params();
        let radius = tc.powf(p.mu) * (self.c / p.kappa).sqrt();
        let n = self.n as f64;
        let sphere = 2.0 * PI.powf(n / 2.0) / gamma(n / 2.0);
        let amp = tc.powf(-p.lambda) * self.c.powf(1.0 / (self.m - 1.0));
        let e = 2.0 / (self.m - 1.0) + 1.0;
        // r = R sin(theta) turns the edge behaviour into a smooth power of cos
        let integrand = |theta: f64| {
            let (s, c) = theta.sin_cos();
            c.max(0.0).powf(e) * (radius * s).powi(self.n as i32 - 1)
        };
        let integral = adaptive_simpson(integrand, 0.0, PI / 2.0, MASS_QUADRATURE_TOL * 1e-2)?;
        Ok(sphere * amp * radius * integral)
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> Result<Field> {
        if grid.dim() != self.n {
            return Err(Error::param(
                "n",
                format!("grid dimension {} does not match spec dimension {}", grid.dim(), self.n),
            ));
        }
        let tc = self.clock(t)?;
        Ok(Field::from_fn(*grid, t, |x| {
            self.profile(x.iter().map(|v| v * v).sum(), tc)
        }))
    }

    /// The exact solution sampled at each requested time.
    pub fn trajectory(&self, grid: &Grid, times: &[f64]) -> Result<Trajectory> {
        let snapshots = times
            .iter()
            .map(|&t| self.sample(grid, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            m: self.m,
            eta: 0.0,
            snapshots,
            diagnostics: None,
        })
    }
}

/// Lower bound `chi(t)` on the outer radius of the positivity set for data of
/// the given mass.
pub fn chi_lower_bound(t: f64, m: f64, n: usize, mass: f64) -> Result<f64> {
    check_exponent(m)?;
    check_dim(n)?;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::param("mass", format!("must be positive, got {mass}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    let nf = n as f64;
    let inner = (m - 1.0)
        * PI.powf((1.0 - m) * nf / 2.0)
        * gamma(1.0 + nf / 2.0).powf(m - 1.0)
        * mass.powf(m - 1.0)
        * t;
    Ok(inner.powf(1.0 / (2.0 + (m - 1.0) * nf)))
}

/// Admissible Hölder parameter `h` and the exponents `1/h`, `1/(2h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderSpec {
    pub m: f64,
    pub h: f64,
    pub inv_h: f64,
    pub inv_2h: f64,
}

impl HolderSpec {
    fn from_h(m: f64, h: f64) -> Self {
        Self {
            m,
            h,
            inv_h: 1.0 / h,
            inv_2h: 0.5 / h,
        }
    }
}

/// `h = 1` for `1 < m < 2`; for `m >= 2` the caller's choice in the open
/// interval `(m-1, m)`, defaulting to the midpoint `m - 1/2`.
pub fn holder_exponent_rule(m: f64, choice: Option<f64>) -> Result<HolderSpec> {
    check_exponent(m)?;
    if m < 2.0 {
        return match choice {
            None | Some(1.0) => Ok(HolderSpec::from_h(m, 1.0)),
            Some(h) => Err(Error::param("h", format!("for 1 < m < 2 h must be 1, got {h}"))),
        };
    }
    let h = choice.unwrap_or(m - 0.5);
    if !(h > m - 1.0 && h < m) {
        return Err(Error::param(
            "h",
            format!("need h in the open interval ({}, {m}), got {h}", m - 1.0),
        ));
    }
    Ok(HolderSpec::from_h(m, h))
}

/// Explicit constant `C1` of the gradient bound `|grad u^h|^2 <= 1/(C1 t)`,
/// with `q = m/h`.
pub fn gradient_bound_constant(m: f64, h: f64, sup: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(sup.is_finite() && sup > 0.0) {
        return Err(Error::param("M", format!("sup of initial data must be positive, got {sup}")));
    }
    let q = m / h;
    let q_max = m / (m - 1.0);
    if !(q > 1.0 && q < q_max) {
        return Err(Error::param(
            "h",
            format!("q = m/h = {q} outside (1, {q_max}); h must lie in ({}, {m})", m - 1.0),
        ));
    }
    Ok(2.0 * m * ((q - 1.0) * (q - 1.0 - q / m)).abs() * sup.powf(m - 2.0 * m / q - 1.0))
}

/// Per-node weights `W_i(x) = int hat_i(xi) G(x - xi) dxi` of the 1D heat
/// kernel with variance `2t` against the piecewise-linear interpolant.
fn heat_axis_weights(nodes: &[f64], x: f64, sigma: f64) -> Vec<f64> {
    let h = nodes[1] - nodes[0];
    let mut w = vec![0.0; nodes.len()];
    for k in 0..nodes.len() - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let gap = if a > x {
            a - x
        } else if b < x {
            x - b
        } else {
            0.0
        };
        let (left, right) = if gap / sigma > 6.0 {
            // far panel: positive-weight quadrature keeps both pieces positive
            let (mid, half) = (0.5 * (a + b), 0.5 * h);
            gauss_legendre16().iter().fold((0.0, 0.0), |(l, r), &(s, wt)| {
                let xi = mid + half * s;
                let g = normal_pdf((x - xi) / sigma) / sigma * wt * half;
                (l + g * (b - xi) / h, r + g * (xi - a) / h)
            })
        } else {
            let (za, zb) = (a - x, b - x);
            let i0 = normal_mass(za / sigma, zb / sigma);
            let i1 = sigma * (normal_pdf(za / sigma) - normal_pdf(zb / sigma));
            let right = ((i1 - za * i0) / h).max(0.0);
            ((i0 - right).max(0.0), right)
        };
        w[k] += left;
        w[k + 1] += right;
    }
    w
}

fn check_heat_input(initial: &Field, t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("heat evaluation needs t > 0, got {t}")));
    }
    if initial.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInitialData("initial data must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Exact solution of the heat equation at elapsed time `t`, started from the
/// piecewise-(bi)linear interpolant of `initial` (zero outside the grid),
/// using the kernel `(4 pi t)^(-n/2) exp(-|x|^2 / 4t)`.
pub fn heat_exact_eval(x: &[f64], t: f64, initial: &Field) -> Result<f64> {
    check_heat_input(initial, t)?;
    let grid = &initial.grid;
    if x.len() != grid.dim() {
        return Err(Error::param("x", "point dimension does not match the grid"));
    }
    let sigma = (2.0 * t).sqrt();
    let nodes = grid.axis_coords();
    let wx = heat_axis_weights(&nodes, x[0], sigma);
    let value = match grid.dim() {
        1 => initial.values.iter().zip(&wx).map(|(u, w)| u * w).sum(),
        _ => {
            let wy = heat_axis_weights(&nodes, x[1], sigma);
            let n = grid.points_per_axis();
            (0..n)
                .map(|i| {
                    let row = &initial.values[i * n..(i + 1) * n];
                    wx[i] * row.iter().zip(&wy).map(|(u, w)| u * w).sum::<f64>()
                })
                .sum()
        }
    };
    Ok(value)
}

/// [`heat_exact_eval`] at every grid sample; the result carries time
/// `initial.t + t`.
pub fn heat_exact_field(initial: &Field, t: f64) -> Result<Field> {
    check_heat_input(initial, t)?;
    let grid = initial.grid;
    let sigma = (2.0 * t).sqrt();
    let nodes = grid.axis_coords();
    let weights: Vec<Vec<f64>> = nodes.iter().map(|&x| heat_axis_weights(&nodes, x, sigma)).collect();
    let n = grid.points_per_axis();
    let values = match grid.dim() {
        1 => weights
            .iter()
            .map(|w| initial.values.iter().zip(w).map(|(u, w)| u * w).sum())
            .collect(),
        _ => {
            // contract the second axis first, then the first
            let mut partial = vec![0.0; n * n];
            for i in 0..n {
                let row = &initial.values[i * n..(i + 1) * n];
                for (l, wy) in weights.iter().enumerate() {
                    partial[i * n + l] = row.iter().zip(wy).map(|(u, w)| u * w).sum();
                }
            }
            let mut out = vec![0.0; n * n];
            for (k, wx) in weights.iter().enumerate() {
                for l in 0..n {
                    out[k * n + l] = (0..n).map(|i| wx[i] * partial[i * n + l]).sum();
                }
            }
            out
        }
    };
    Field::new(grid, initial.t + t, values)
}
