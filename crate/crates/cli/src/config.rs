//! Experiment configuration files.
//!
//! A configuration is a TOML document with a top-level `kind` and one
//! section for that kind. Unknown keys are rejected, and the whole file is
//! parsed and checked before anything runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Test,
    Estimation,
    Mixture,
    Em,
    RgCurve,
    Trials,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Test => "test",
            Kind::Estimation => "estimation",
            Kind::Mixture => "mixture",
            Kind::Em => "em",
            Kind::RgCurve => "rg_curve",
            Kind::Trials => "trials",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Integer grid `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: i64,
    pub hi: i64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { lo: 1, hi: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeutralModeConfig {
    #[default]
    Tautology,
    OwnRow,
}

/// Classes with Gaussian observation densities, for `test` and
/// `estimation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub prior: Vec<f64>,
    pub centers: Vec<f64>,
    pub stddevs: Vec<f64>,
    /// Starting boundaries, one fewer than the number of hypotheses.
    pub init_boundaries: Vec<f64>,
    /// Label index of a neutral hypothesis, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral: Option<usize>,
    #[serde(default)]
    pub neutral_mode: NeutralModeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    #[default]
    ExactGrid,
    WeightedMoments,
}

/// Mixture fit from `start` to the mixture `truth`, each component given as
/// `[center, stddev, weight]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub truth: Vec<[f64; 3]>,
    pub start: Vec<[f64; 3]>,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default = "default_max_right_steps")]
    pub max_right_steps: usize,
}

fn default_max_right_steps() -> usize {
    cm_core::mixture::DEFAULT_MAX_RIGHT_STEPS
}

/// One parametric R(G) sweep. Exactly one of `payoff` (`[i][j]`, bits),
/// `channel` (`P(y_j|x_i)` as `[j][i]`, payoff from its matched semantic
/// channel) or `distortion` (`[i][j]`) is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgConfig {
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<Vec<Vec<f64>>>,
    pub s_min: f64,
    pub s_max: f64,
    pub s_count: usize,
}

impl RgConfig {
    pub fn s_values(&self) -> Vec<f64> {
        match self.s_count {
            0 => Vec::new(),
            1 => vec![self.s_min],
            n => (0..n)
                .map(|k| self.s_min + (self.s_max - self.s_min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsConfig {
    pub count: usize,
    #[serde(default = "default_max_right_steps")]
    pub max_right_steps: usize,
    /// Also run EM on every scenario.
    #[serde(default)]
    pub include_em: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Convergence threshold on `H(Q||P)`, in bits.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rg: Option<RgConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_tol() -> f64 {
    cm_core::mixture::DEFAULT_TOL
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks that the section matching `kind` is present and that no other
    /// run section is.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(CliError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.grid.lo >= self.grid.hi {
            return Err(CliError::Config("grid needs lo < hi".into()));
        }
        let present = [
            ("test", self.test.is_some()),
            ("mixture", self.mixture.is_some()),
            ("rg", self.rg.is_some()),
            ("trials", self.trials.is_some()),
        ];
        let wanted = match self.kind {
            Kind::Test | Kind::Estimation => "test",
            Kind::Mixture | Kind::Em => "mixture",
            Kind::RgCurve => "rg",
            Kind::Trials => "trials",
        };
        for (name, is_present) in present {
            if name == wanted && !is_present {
                return Err(CliError::Config(format!(
                    "kind = \"{}\" needs a [{name}] section",
                    self.kind.as_str()
                )));
            }
            if name != wanted && is_present {
                return Err(CliError::Config(format!(
                    "[{name}] section is not used by kind = \"{}\"",
                    self.kind.as_str()
                )));
            }
        }
        if let Some(rg) = &self.rg {
            let sources = [rg.payoff.is_some(), rg.channel.is_some(), rg.distortion.is_some()];
            if sources.iter().filter(|&&b| b).count() != 1 {
                return Err(CliError::Config(
                    "[rg] needs exactly one of payoff, channel, distortion".into(),
                ));
            }
            if rg.s_count == 0 {
                return Err(CliError::Config("[rg] s_count must be positive".into()));
            }
        }
        if let Some(test) = &self.test {
            let n = test.prior.len() + usize::from(test.neutral.is_some());
            if test.init_boundaries.len() + 1 != n {
                return Err(CliError::Config(format!(
                    "[test] {n} hypotheses need {} init_boundaries",
                    n.saturating_sub(1)
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIXTURE: &str = r#"
kind = "mixture"
tol = 0.001

[mixture]
truth = [[35.0, 8.0, 0.7], [65.0, 12.0, 0.3]]
start = [[30.0, 15.0, 0.5], [70.0, 15.0, 0.5]]
"#;

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::parse(MIXTURE).unwrap();
        assert_eq!(c.kind, Kind::Mixture);
        assert_eq!(c.grid, GridConfig { lo: 1, hi: 100 });
        assert_eq!(c.seed, 0);
        let m = c.mixture.unwrap();
        assert_eq!(m.method, MethodConfig::ExactGrid);
        assert_eq!(m.max_right_steps, 200);
        assert_eq!(c.output.format, Format::Csv);
    }

    #[test]
    fn round_trip() {
        let texts = [
            MIXTURE.to_string(),
            r#"
kind = "test"
seed = 4
[grid]
lo = 0
hi = 50
[test]
prior = [0.8, 0.2]
centers = [30.0, 70.0]
stddevs = [15.0, 10.0]
init_boundaries = [50.0, 60.0]
neutral = 1
neutral_mode = "own_row"
[output]
dir = "out"
format = "json"
"#
            .to_string(),
            r#"
kind = "rg_curve"
[rg]
prior = [0.5, 0.5]
payoff = [[0.7, -1.5], [-1.5, 0.7]]
s_min = -3.0
s_max = 3.0
s_count = 25
"#
            .to_string(),
            r#"
kind = "trials"
seed = 7
[trials]
count = 10
include_em = true
threads = 2
"#
            .to_string(),
        ];
        for text in texts {
            let first = ExperimentConfig::parse(&text).unwrap();
            let second = ExperimentConfig::parse(&first.to_toml().unwrap()).unwrap();
            assert_eq!(first, second);
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = MIXTURE.replace("tol = 0.001", "tol = 0.001\ncolour = \"red\"");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
        let text = MIXTURE.replace("[mixture]", "[mixture]\nspeed = 3");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn rejects_missing_or_extra_sections() {
        assert!(ExperimentConfig::parse("kind = \"em\"").is_err());
        let text = format!("{MIXTURE}\n[trials]\ncount = 3\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn rejects_bad_boundary_count() {
        let text = r#"
kind = "test"
[test]
prior = [0.5, 0.35, 0.15]
centers = [20.0, 50.0, 80.0]
stddevs = [15.0, 10.0, 10.0]
init_boundaries = [50.0]
"#;
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn linear_s_grid() {
        let rg = RgConfig {
            prior: vec![0.5, 0.5],
            payoff: None,
            channel: None,
            distortion: None,
            s_min: 0.0,
            s_max: 2.0,
            s_count: 5,
        };
        assert_eq!(rg.s_values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
