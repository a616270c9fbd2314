//! Experiment configuration: TOML tables with dotted-key overrides.
//!
//! ```toml
//! [problem]
//! flux = "quartic"
//! entropy = "remark12"
//! u_minus = 1.0
//! epsilon = 0.05
//! lambda = 0.25
//!
//! [perturbation]
//! kind = "bump"
//! amplitude = 0.3
//! center = 0.0
//! width = 5.0
//! ```

use crate::calculus::FluxEntropyPair;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pde::Perturbation;
use crate::profile::{solve_profile, ShockProfile};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "defaults::flux")]
    pub flux: String,
    #[serde(default = "defaults::entropy")]
    pub entropy: String,
    #[serde(default = "defaults::u_minus")]
    pub u_minus: f64,
    /// Shock strength `u_- - u_+`; required by everything except the hypothesis scan.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::delta0")]
    pub delta0: f64,
    #[serde(default = "defaults::theta")]
    pub theta: f64,
    /// Truncation level `delta1` for the near/far split diagnostics.
    #[serde(default = "defaults::truncation_level")]
    pub truncation_level: f64,
    #[serde(default = "defaults::profile_tol")]
    pub profile_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width of the computational domain; derived from the profile when absent.
    pub half_width: Option<f64>,
    /// Odd node count; derived from `resolution` when absent.
    pub points: Option<usize>,
    /// Nodes per tail length `1/kappa`.
    #[serde(default = "defaults::resolution")]
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "defaults::t_final")]
    pub t_final: f64,
    #[serde(default = "defaults::dt_safety")]
    pub dt_safety: f64,
    /// Record a snapshot every this many base steps.
    #[serde(default = "defaults::snapshot_every")]
    pub snapshot_every: usize,
    /// Advance the shift with Heun instead of Euler.
    #[serde(default)]
    pub shift_heun: bool,
    /// Maximum depth of step halving at switching events.
    #[serde(default = "defaults::max_halvings")]
    pub max_halvings: u32,
    /// Sign changes of `B` below this size do not trigger halving.
    #[serde(default = "defaults::event_floor")]
    pub event_floor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: None,
            points: None,
            resolution: defaults::resolution(),
        }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: defaults::t_final(),
            dt_safety: defaults::dt_safety(),
            snapshot_every: defaults::snapshot_every(),
            shift_heun: false,
            max_halvings: defaults::max_halvings(),
            event_floor: defaults::event_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::assert_theorem")]
    pub assert_theorem: bool,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            assert_theorem: defaults::assert_theorem(),
            output_dir: defaults::output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default = "defaults::perturbation")]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub run: RunConfig,
}

mod defaults {
    use crate::pde::Perturbation;

    pub fn flux() -> String {
        "quartic".into()
    }
    pub fn entropy() -> String {
        "remark12".into()
    }
    pub fn u_minus() -> f64 {
        1.0
    }
    pub fn lambda() -> f64 {
        0.25
    }
    pub fn delta0() -> f64 {
        0.3
    }
    pub fn theta() -> f64 {
        1.0
    }
    pub fn truncation_level() -> f64 {
        0.5
    }
    pub fn profile_tol() -> f64 {
        1e-12
    }
    pub fn resolution() -> f64 {
        40.0
    }
    pub fn t_final() -> f64 {
        50.0
    }
    pub fn dt_safety() -> f64 {
        0.9
    }
    pub fn snapshot_every() -> usize {
        1
    }
    pub fn max_halvings() -> u32 {
        2
    }
    pub fn event_floor() -> f64 {
        1e-8
    }
    pub fn assert_theorem() -> bool {
        false
    }
    pub fn output_dir() -> String {
        "out".into()
    }
    pub fn perturbation() -> Perturbation {
        Perturbation::Bump {
            amplitude: 0.3,
            center: 0.0,
            width: 5.0,
        }
    }
}

/// 1-based line of the first assignment to `key` in `text`, if any.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(leaf)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Parse an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::InvalidConfig(format!("empty override key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parse TOML text, apply `key=value` overrides (dotted keys), and validate.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let cfg = Self::parse(text, overrides)?;
        cfg.validate().map_err(|e| cfg.anchor(text, e))?;
        Ok(cfg)
    }

    /// As [`ExperimentConfig::from_toml_str`] with only the flux-entropy pair checked.
    pub fn from_toml_str_unchecked(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let cfg = Self::parse(text, overrides)?;
        cfg.validate_pair().map_err(|e| cfg.anchor(text, e))?;
        Ok(cfg)
    }

    fn anchor(&self, text: &str, e: Error) -> Error {
        match (&e, self.offending_key(&e)) {
            (Error::InvalidConfig(msg), Some(key)) => match line_of(text, key) {
                Some(line) => Error::InvalidConfig(format!("line {line}: {msg}")),
                None => e,
            },
            _ => e,
        }
    }

    fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string().trim_end().to_string()))?;
        if !table.contains_key("perturbation") {
            // partial overrides of the perturbation start from the default recipe
            let seed =
                toml::Value::try_from(defaults::perturbation()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            table.insert("perturbation".into(), seed);
        }
        table
            .entry("problem")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        for (k, v) in overrides {
            set_dotted(&mut table, k, parse_value(v))?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string().trim_end().to_string()))
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Validated shock strength.
    pub fn epsilon(&self) -> f64 {
        self.problem.epsilon.expect("validated configuration has epsilon")
    }

    /// Checks that do not involve the shock: the pair, `theta` and `u_minus`.
    pub fn validate_pair(&self) -> Result<()> {
        let p = &self.problem;
        if !(p.theta > 0.0) {
            return Err(Error::InvalidConfig(format!("theta must be positive, got {}", p.theta)));
        }
        if !p.u_minus.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "u_minus must be finite, got {}",
                p.u_minus
            )));
        }
        FluxEntropyPair::named(&p.flux, &p.entropy)?;
        Ok(())
    }

    /// Configuration built from overrides alone.
    pub fn from_overrides(overrides: &[(String, String)]) -> Result<Self> {
        Self::from_toml_str("", overrides)
    }

    fn offending_key(&self, e: &Error) -> Option<&'static str> {
        let Error::InvalidConfig(msg) = e else { return None };
        let first = msg.split_whitespace().next()?;
        [
            "epsilon",
            "lambda",
            "delta0",
            "theta",
            "u_minus",
            "half_width",
            "points",
            "resolution",
            "t_final",
            "dt_safety",
            "snapshot_every",
            "truncation_level",
            "profile_tol",
            "event_floor",
        ]
        .into_iter()
        .find(|k| *k == first)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let Some(eps) = p.epsilon else {
            return bad("epsilon is required".into());
        };
        if !(eps > 0.0) || !eps.is_finite() {
            return bad(format!("epsilon must be positive, got {eps}"));
        }
        if !(p.lambda > 0.0 && p.lambda < 1.0) {
            return bad(format!("lambda must lie in (0, 1), got {}", p.lambda));
        }
        if !(p.delta0 > 0.0 && p.delta0 < 1.0) {
            return bad(format!("delta0 must lie in (0, 1), got {}", p.delta0));
        }
        if self.run.assert_theorem && !(eps / p.lambda < p.delta0 && p.lambda < p.delta0) {
            return bad(format!(
                "epsilon/lambda < delta0 and lambda < delta0 are required when assert_theorem is set \
                 (epsilon/lambda = {}, lambda = {}, delta0 = {})",
                eps / p.lambda,
                p.lambda,
                p.delta0
            ));
        }
        self.validate_pair()?;
        if !(p.truncation_level > 0.0) {
            return bad(format!("truncation_level must be positive, got {}", p.truncation_level));
        }
        if !(p.profile_tol > 0.0 && p.profile_tol < 1e-3) {
            return bad(format!("profile_tol must lie in (0, 1e-3), got {}", p.profile_tol));
        }
        if let Some(l) = self.grid.half_width {
            if !(l * eps >= 8.0) {
                return bad(format!("half_width * epsilon must be at least 8, got {}", l * eps));
            }
        }
        if let Some(n) = self.grid.points {
            if n < 5 || n % 2 == 0 {
                return bad(format!("points must be odd and at least 5, got {n}"));
            }
        }
        if !(self.grid.resolution >= 4.0) {
            return bad(format!(
                "resolution must be at least 4 nodes per tail length, got {}",
                self.grid.resolution
            ));
        }
        let t = &self.time;
        if !(t.t_final > 0.0) || !t.t_final.is_finite() {
            return bad(format!("t_final must be positive, got {}", t.t_final));
        }
        if !(t.dt_safety > 0.0 && t.dt_safety <= 1.0) {
            return bad(format!("dt_safety must lie in (0, 1], got {}", t.dt_safety));
        }
        if t.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        if !(t.event_floor >= 0.0) {
            return bad(format!("event_floor must be nonnegative, got {}", t.event_floor));
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<FluxEntropyPair> {
        FluxEntropyPair::named(&self.problem.flux, &self.problem.entropy)
    }

    /// Profile with the configured weight amplitude.
    pub fn profile(&self) -> Result<ShockProfile> {
        let p = &self.problem;
        Ok(solve_profile(&self.pair()?, p.u_minus, self.epsilon(), None, p.profile_tol)?.with_lambda(p.lambda))
    }

    /// Computational grid resolving the profile tails.
    pub fn grid_for(&self, profile: &ShockProfile) -> Result<Grid> {
        let (kl, kr) = profile.tail_rates();
        let kappa = kl.min(kr);
        let half_width = self
            .grid
            .half_width
            .unwrap_or_else(|| (8.0 / self.epsilon()).max(25.0 / kappa));
        if half_width * kappa < 10.0 {
            return Err(Error::InvalidConfig(format!(
                "half_width {half_width} leaves the profile tails unresolved (kappa * half_width = {})",
                half_width * kappa
            )));
        }
        let grid = match self.grid.points {
            Some(n) => Grid::new(half_width, n)?,
            None => Grid::with_spacing(half_width, 1.0 / (self.grid.resolution * kappa))?,
        };
        if grid.h() * kappa > 0.25 {
            return Err(Error::InvalidConfig(format!(
                "points: spacing {} is too coarse for tail length {}",
                grid.h(),
                1.0 / kappa
            )));
        }
        Ok(grid)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::io::hash_json(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
