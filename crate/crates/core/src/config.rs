//! TOML run configuration.
//!
//! ```toml
//! m = 2.0
//! n = 1
//! checks = ["mass", "ab_time", "propagation"]
//!
//! [domain]
//! half_width = 4.0
//!
//! [grid]
//! points = 401
//!
//! [time]
//! t0 = 1.0
//! t1 = 2.0
//! snapshots = 11          # or an explicit list of times
//!
//! [initial]
//! kind = "barenblatt"     # barenblatt | gaussian | bump | file
//! params = { c = 0.08333333333333333, offset = 0.0 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::{barenblatt_constants, holder_exponent_rule, BarenblattSpec};
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::solver::{Boundary, InitialCondition, PmeProblem, SchemeConfig};

/// Every check name `verify` understands.
pub const CHECK_NAMES: &[&str] = &[
    "mass",
    "ab_time",
    "ab_pressure",
    "gradient_bound",
    "holder",
    "decay",
    "propagation",
    "persistence",
    "tangency",
    "metric_pinch",
    "transformed_pde",
    "heat_distance",
    "control.ab_time",
    "control.gradient_bound",
    "control.holder",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Snapshots {
    Count(usize),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: Snapshots,
    #[serde(default)]
    pub spacing: Spacing,
}

fn default_snapshots() -> Snapshots {
    Snapshots::Count(2)
}

/// How a snapshot count is spread over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Barenblatt,
    Gaussian,
    Bump,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    pub h: Option<f64>,
    /// Radius `K` of the scanned ball; defaults to the domain half-width.
    pub radius: Option<f64>,
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    /// Positivity cutoff relative to the data bound `M`.
    pub positivity: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self { positivity: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSection {
    #[serde(default = "default_k")]
    pub k: Vec<f64>,
    #[serde(default = "default_m_values")]
    pub m_values: Vec<f64>,
}

fn default_k() -> Vec<f64> {
    vec![10.0]
}

fn default_m_values() -> Vec<f64> {
    vec![1.5, 1.25, 1.1, 1.0]
}

impl Default for HeatSection {
    fn default() -> Self {
        Self {
            k: default_k(),
            m_values: default_m_values(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

fn default_cfl() -> f64 {
    0.9
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            cfl_safety: default_cfl(),
            boundary: Boundary::ZeroFlux,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub m: f64,
    pub n: usize,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub eta_sequence: Vec<f64>,
    pub domain: Domain,
    pub grid: GridSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub holder: HolderSection,
    pub beta: Option<f64>,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
    /// Exponent label used by the mislabelled-`m` control.
    pub label_m: Option<f64>,
    #[serde(default)]
    pub heat: HeatSection,
    #[serde(default)]
    pub scheme: SchemeSection,
}

fn bad(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl Default for RunConfig {
    /// The Barenblatt regression run: `m = 2`, `C = 1/12`, `t` from 1 to 2.
    fn default() -> Self {
        Self {
            m: 2.0,
            n: 1,
            eta: 0.0,
            eta_sequence: Vec::new(),
            domain: Domain { half_width: 4.0 },
            grid: GridSection { points: 401 },
            time: TimeSection {
                t0: 1.0,
                t1: 2.0,
                snapshots: Snapshots::Count(11),
                spacing: Spacing::Linear,
            },
            initial: InitialSection {
                kind: InitialKind::Barenblatt,
                params: [("c".to_string(), 1.0 / 12.0), ("offset".to_string(), 0.0)].into(),
                file: None,
            },
            checks: ["mass", "ab_time", "gradient_bound", "propagation", "persistence"]
                .map(String::from)
                .to_vec(),
            holder: HolderSection::default(),
            beta: None,
            threshold: ThresholdSection::default(),
            seed: 0,
            output: OutputSection::default(),
            label_m: None,
            heat: HeatSection::default(),
            scheme: SchemeSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "<document>".into());
            bad(&field, e.message().trim().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative data files resolve against the config's directory
        if let (Some(file), Some(dir)) = (cfg.initial.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.domain.half_width, self.grid.points)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let (t0, t1) = (self.time.t0, self.time.t1);
        match &self.time.snapshots {
            Snapshots::Times(ts) => ts.clone(),
            Snapshots::Count(k) => {
                let k = (*k).max(2);
                let mut out: Vec<f64> = (0..k)
                    .map(|i| {
                        let s = i as f64 / (k - 1) as f64;
                        match self.time.spacing {
                            Spacing::Linear => t0 + s * (t1 - t0),
                            Spacing::Geometric => t0 * (t1 / t0).powf(s),
                        }
                    })
                    .collect();
                out[0] = t0;
                out[k - 1] = t1;
                out
            }
        }
    }

    fn param(&self, key: &str) -> Option<f64> {
        self.initial.params.get(key).copied()
    }

    fn param_or(&self, key: &str, default: f64) -> f64 {
        self.param(key).unwrap_or(default)
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let allowed: &[&str] = match self.initial.kind {
            InitialKind::Barenblatt => &["c", "mass", "offset"],
            InitialKind::Gaussian => &["amplitude", "width"],
            InitialKind::Bump => &["amplitude", "radius"],
            InitialKind::File => &[],
        };
        if let Some(k) = self.initial.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(bad(
                &format!("initial.params.{k}"),
                format!("not a parameter of this kind; expected one of {allowed:?}"),
            ));
        }
        Ok(match self.initial.kind {
            InitialKind::Barenblatt => {
                let offset = self.param_or("offset", BarenblattSpec::DEFAULT_OFFSET);
                let c = match (self.param("c"), self.param("mass")) {
                    (Some(_), Some(_)) => return Err(bad("initial.params", "give either c or mass, not both")),
                    (Some(c), None) => c,
                    (None, Some(mass)) => BarenblattSpec::with_mass(self.m, self.n, mass, offset)
                        .map_err(|e| bad("initial.params.mass", e.to_string()))?
                        .c,
                    (None, None) => return Err(bad("initial.params", "barenblatt needs c or mass")),
                };
                InitialCondition::Barenblatt { c, offset }
            }
            InitialKind::Gaussian => InitialCondition::Gaussian {
                amplitude: self.param_or("amplitude", 1.0),
                width: self.param_or("width", std::f64::consts::FRAC_1_SQRT_2),
            },
            InitialKind::Bump => InitialCondition::Bump {
                amplitude: self.param_or("amplitude", 1.0),
                radius: self.param_or("radius", 1.0),
            },
            InitialKind::File => InitialCondition::File(
                self.initial
                    .file
                    .clone()
                    .ok_or_else(|| bad("initial.file", "required when kind = \"file\""))?,
            ),
        })
    }

    pub fn problem(&self) -> Result<PmeProblem> {
        Ok(PmeProblem::new(self.m, self.initial_condition()?, self.time.t0, self.time.t1)
            .with_eta(self.eta)
            .with_snapshots(self.snapshot_times()))
    }

    pub fn scheme(&self) -> SchemeConfig {
        SchemeConfig {
            cfl_safety: self.scheme.cfl_safety,
            boundary: self.scheme.boundary,
            ..SchemeConfig::default()
        }
    }

    /// Hölder exponent from `holder.h`, or the midpoint of the admissible range.
    pub fn holder_h(&self) -> Result<f64> {
        holder_exponent_rule(self.m, self.holder.h)
            .map(|s| s.h)
            .map_err(|e| bad("holder.h", e.to_string()))
    }

    pub fn wants(&self, check: &str) -> bool {
        self.checks.iter().any(|c| c == check)
    }

    /// Validate every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m >= 1.0) {
            return Err(bad("m", format!("need m >= 1, got {}", self.m)));
        }
        if !(self.n == 1 || self.n == 2) {
            return Err(bad("n", format!("dimension must be 1 or 2, got {}", self.n)));
        }
        if !(self.domain.half_width > 0.0 && self.domain.half_width.is_finite()) {
            return Err(bad("domain.half_width", "must be positive"));
        }
        if self.grid.points < 3 || self.grid.points.is_multiple_of(2) {
            return Err(bad("grid.points", format!("must be odd and >= 3, got {}", self.grid.points)));
        }
        if !(self.time.t0 >= 0.0 && self.time.t1 > self.time.t0) {
            return Err(bad("time.t1", format!("need t1 > t0 >= 0, got t0 = {}, t1 = {}", self.time.t0, self.time.t1)));
        }
        if self.time.spacing == Spacing::Geometric && self.time.t0 <= 0.0 {
            return Err(bad("time.spacing", "geometric spacing needs t0 > 0"));
        }
        let times = self.snapshot_times();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("time.snapshots", "must be strictly increasing"));
        }
        if times.first().is_some_and(|t| *t < self.time.t0) || times.last().is_some_and(|t| *t > self.time.t1) {
            return Err(bad("time.snapshots", "must lie within [t0, t1]"));
        }
        if !(self.eta >= 0.0) {
            return Err(bad("eta", "must be >= 0"));
        }
        if self.eta_sequence.iter().any(|e| !(*e > 0.0)) || self.eta_sequence.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("eta_sequence", "must be positive and strictly decreasing"));
        }
        if !(self.threshold.positivity > 0.0) {
            return Err(bad("threshold.positivity", "must be positive"));
        }
        if !(self.scheme.cfl_safety > 0.0 && self.scheme.cfl_safety <= 1.0) {
            return Err(bad("scheme.cfl_safety", "must lie in (0, 1]"));
        }
        if self.initial.kind == InitialKind::Barenblatt && self.m <= 1.0 {
            return Err(bad("initial.kind", "barenblatt data needs m > 1"));
        }
        self.initial_condition()?;
        for c in &self.checks {
            if !CHECK_NAMES.contains(&c.as_str()) {
                return Err(bad("checks", format!("unknown check `{c}`; known: {}", CHECK_NAMES.join(", "))));
            }
        }
        let needs_pme = ["ab_time", "ab_pressure", "gradient_bound", "control.ab_time", "control.gradient_bound"];
        if self.m <= 1.0 {
            if let Some(c) = self.checks.iter().find(|c| needs_pme.contains(&c.as_str())) {
                return Err(bad("checks", format!("`{c}` needs m > 1")));
            }
        }
        let h = if self.wants("gradient_bound") || self.wants("holder") || self.wants("tangency") || self.beta.is_some() {
            Some(self.holder_h()?)
        } else {
            None
        };
        if self.wants("gradient_bound") || self.wants("control.gradient_bound") {
            let h = self.holder_h()?;
            if !(h > self.m - 1.0 && h < self.m) {
                return Err(bad("holder.h", format!("gradient bound needs h in ({}, {})", self.m - 1.0, self.m)));
            }
        }
        let need_beta = ["tangency", "metric_pinch", "transformed_pde"];
        if let Some(c) = self.checks.iter().find(|c| need_beta.contains(&c.as_str())) {
            let beta = self.beta.ok_or_else(|| bad("beta", format!("required by check `{c}`")))?;
            let h = h.expect("computed when beta is set");
            if !(beta > h) {
                return Err(bad("beta", format!("need beta > h = {h}, got {beta}")));
            }
            if self.wants("transformed_pde") && !(beta > 2.0 * h) {
                return Err(bad("beta", format!("transformed_pde needs beta > 2h = {}, got {beta}", 2.0 * h)));
            }
        }
        let positive: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0).collect();
        let decade = positive.first().zip(positive.last()).is_some_and(|(a, b)| *b >= 10.0 * a);
        for c in ["decay", "metric_pinch"] {
            if self.wants(c) && !decade {
                return Err(bad("time.snapshots", format!("`{c}` needs positive snapshot times spanning a decade")));
            }
        }
        if self.wants("metric_pinch") && positive.len() < 4 {
            return Err(bad("time.snapshots", "`metric_pinch` needs at least 4 snapshots"));
        }
        if self.wants("transformed_pde") && times.len() < 3 {
            return Err(bad("time.snapshots", "`transformed_pde` needs at least 3 snapshots"));
        }
        if self.wants("heat_distance") {
            if self.heat.k.is_empty() || self.heat.k.iter().any(|k| !(*k > 0.0)) {
                return Err(bad("heat.k", "need positive radii"));
            }
            if self.heat.m_values.is_empty() || self.heat.m_values.iter().any(|m| !(*m >= 1.0)) {
                return Err(bad("heat.m_values", "need exponents >= 1"));
            }
        }
        if let Some(l) = self.label_m {
            if !(l > 1.0) {
                return Err(bad("label_m", "must exceed 1"));
            }
        }
        Ok(())
    }

    /// Label for the mislabelled-exponent control: large enough that the
    /// source-type solution's centre violates the one-sided bound.
    pub fn control_label_m(&self) -> Result<f64> {
        match self.label_m {
            Some(l) => Ok(l),
            None => Ok(1.0 + 2.0 / barenblatt_constants(self.m, self.n)?.lambda),
        }
    }

    /// Super-critical Hölder exponent for the control: `1/h` exceeds the
    /// interface exponent `1/(m-1)` (or 1 for `m <= 2`).
    pub fn control_holder_h(&self) -> f64 {
        0.5 * (self.m - 1.0).clamp(1e-3, 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
m = 2.0
n = 1
checks = ["mass", "propagation"]

[domain]
half_width = 4.0

[grid]
points = 401

[time]
t0 = 1.0
t1 = 2.0
snapshots = [1.0, 1.5, 2.0]

[initial]
kind = "barenblatt"
params = { c = 0.08333333333333333, offset = 0.0 }
"#;

    #[test]
    fn parses_sample() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.snapshot_times(), vec![1.0, 1.5, 2.0]);
        assert_eq!(cfg.initial_condition().unwrap(), InitialCondition::Barenblatt { c: 1.0 / 12.0, offset: 0.0 });
    }

    #[test]
    fn default_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let even = SAMPLE.replace("points = 401", "points = 400");
        let err = RunConfig::from_toml(&even).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "grid.points"), "{err}");

        let unknown = SAMPLE.replace("\"propagation\"", "\"nope\"");
        let err = RunConfig::from_toml(&unknown).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "checks"));

        let typo = SAMPLE.replace("half_width", "halfwidth");
        let err = RunConfig::from_toml(&typo).unwrap_err();
        assert!(err.to_string().contains("halfwidth"), "{err}");

        let beta = SAMPLE.replace("\"propagation\"", "\"transformed_pde\"");
        let mut cfg = RunConfig::from_toml(&beta).unwrap();
        assert!(matches!(cfg.validate().unwrap_err(), Error::Config { ref field, .. } if field == "beta"));
        cfg.beta = Some(2.5);
        assert!(cfg.validate().is_err());
        cfg.beta = Some(3.5);
        cfg.validate().unwrap();

        let param = SAMPLE.replace("offset = 0.0", "width = 1.0");
        let err = RunConfig::from_toml(&param).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "initial.params.width"));
    }

    #[test]
    fn geometric_snapshots() {
        let cfg = RunConfig {
            time: TimeSection {
                t0: 1.0,
                t1: 16.0,
                snapshots: Snapshots::Count(5),
                spacing: Spacing::Geometric,
            },
            ..RunConfig::default()
        };
        let t = cfg.snapshot_times();
        assert_eq!(t[0], 1.0);
        assert_eq!(t[4], 16.0);
        assert!((t[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn control_label_breaks_the_bound() {
        // centre of the source solution has u_t / u = -lambda / t
        let cfg = RunConfig::default();
        let label = cfg.control_label_m().unwrap();
        let lambda = barenblatt_constants(2.0, 1).unwrap().lambda;
        assert!(1.0 / (label - 1.0) < lambda);
    }
}
