//! Experiment configuration (TOML).
//!
//! See `docs/config.md` for the schema. A config resolves into one
//! [`GeneratorConfig`] per `(k, replication)` pair; coordinates in the file
//! are 1-based, everything in memory is 0-based.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{
    first_one_rest_gaussian, treatment_theta, GeneratorConfig, GeneratorKind, NonadaptiveLaw,
};
use crate::model::{Method, ModelSpec};

use super::seeds::{derive_seed, THETA_TAG};

/// How the true parameter vector is set for each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    /// `θ*_1 = 0`, `θ*_{2:d} = 1/√(d−1)`.
    Treatment,
    /// `θ*_1 = 1`, the rest i.i.d. `N(0, 1)`, redrawn per replication.
    FirstOneRestGaussian,
    /// Every coordinate equal to `value`.
    Constant {
        value: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: usize,
    /// Adaptivity degree; replaced by each entry of `k_grid` when present.
    pub k: usize,
    pub sigma: f64,
    #[serde(default)]
    pub p_exploit: f64,
    #[serde(default)]
    pub nonadaptive_law: NonadaptiveLaw,
    pub theta: ThetaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Ols {},
    CenteredOls {},
    Tale {
        /// Weight-schedule origin; `log log n` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    ConcentrationCi {},
    WDecorrelation {
        /// Fixed regularizer; calibrated from i.i.d. designs when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default = "default_calibration_draws")]
        calibration_draws: usize,
    },
}

fn default_calibration_draws() -> usize {
    1000
}

impl EstimatorConfig {
    pub fn method(&self) -> Method {
        match self {
            EstimatorConfig::Ols {} => Method::Ols,
            EstimatorConfig::CenteredOls {} => Method::CenteredOls,
            EstimatorConfig::Tale { .. } => Method::Tale,
            EstimatorConfig::ConcentrationCi {} => Method::ConcentrationCi,
            EstimatorConfig::WDecorrelation { .. } => Method::WDecorrelation,
        }
    }
}

/// Whether estimators use the true noise level or estimate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Known,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub n_reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<usize>>,
    /// 1-based coordinates to report.
    #[serde(default = "default_targets")]
    pub targets: Vec<usize>,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Write per-estimator wall time into `runtime_ms` (makes the CSV
    /// non-reproducible byte for byte).
    #[serde(default)]
    pub record_timing: bool,
    pub output_dir: PathBuf,
    pub generator: GeneratorSection,
    pub estimators: Vec<EstimatorConfig>,
}

fn default_targets() -> Vec<usize> {
    vec![1]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The adaptivity degrees this experiment sweeps.
    pub fn k_values(&self) -> Vec<usize> {
        match &self.k_grid {
            Some(grid) => grid.clone(),
            None => vec![self.generator.k],
        }
    }

    /// 0-based target coordinates.
    pub fn target_coords(&self) -> Vec<usize> {
        self.targets.iter().map(|t| t - 1).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.name.trim().is_empty() {
            return cfg_err("name must not be empty".into());
        }
        if self.n_reps == 0 {
            return cfg_err("n_reps must be at least 1".into());
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return cfg_err(format!("alpha_grid entries must lie in (0, 1), got {a}"));
        }
        if self.estimators.is_empty() {
            return cfg_err("at least one estimator is required".into());
        }
        let mut seen = Vec::new();
        for e in &self.estimators {
            let m = e.method();
            if seen.contains(&m) {
                return cfg_err(format!("estimator {m} listed twice"));
            }
            seen.push(m);
            match e {
                EstimatorConfig::Tale { s0: Some(s0) } if !(*s0 > 0.0 && s0.is_finite()) => {
                    return cfg_err(format!("tale s0 must be positive, got {s0}"));
                }
                EstimatorConfig::WDecorrelation {
                    lambda,
                    calibration_draws,
                } => {
                    if let Some(l) = lambda {
                        if !(*l > 0.0 && l.is_finite()) {
                            return cfg_err(format!(
                                "w_decorrelation lambda must be positive, got {l}"
                            ));
                        }
                    } else if *calibration_draws < 100 {
                        return cfg_err(format!(
                            "calibration_draws must be at least 100, got {calibration_draws}"
                        ));
                    }
                }
                _ => {}
            }
        }
        let g = &self.generator;
        if self.targets.is_empty() {
            return cfg_err("targets must not be empty".into());
        }
        if let Some(t) = self.targets.iter().find(|&&t| t == 0 || t > g.d) {
            return cfg_err(format!("target {t} outside 1..={}", g.d));
        }
        if let ThetaSpec::Explicit { values } = &g.theta {
            if values.len() != g.d {
                return cfg_err(format!(
                    "explicit theta has {} entries but d = {}",
                    values.len(),
                    g.d
                ));
            }
        }
        if self.k_grid.as_ref().is_some_and(|k| k.is_empty()) {
            return cfg_err("k_grid must not be empty when given".into());
        }
        for k in self.k_values() {
            if k >= g.d && g.kind != GeneratorKind::Iid {
                return cfg_err(format!("k = {k} must be below d = {}", g.d));
            }
            let gen = self.generator_config(k, 0)?;
            gen.validate().map_err(|e| Error::Config(e.to_string()))?;
            let adaptive = if g.kind == GeneratorKind::Iid { 0 } else { k };
            if seen.contains(&Method::Tale) && adaptive != 1 {
                return cfg_err(format!(
                    "tale needs exactly one adaptive coordinate, k = {adaptive}"
                ));
            }
        }
        Ok(())
    }

    /// Generator settings for replication `rep` at adaptivity `k`.
    pub fn generator_config(&self, k: usize, rep: usize) -> Result<GeneratorConfig> {
        let g = &self.generator;
        let seed = derive_seed(self.master_seed, k as u64, rep as u64);
        let theta = match &g.theta {
            ThetaSpec::Treatment => {
                if g.d < 2 {
                    return Err(Error::Config("treatment theta needs d >= 2".into()));
                }
                treatment_theta(g.d)
            }
            ThetaSpec::FirstOneRestGaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, THETA_TAG, 0));
                first_one_rest_gaussian(g.d, &mut rng)
            }
            ThetaSpec::Constant { value } => vec![*value; g.d],
            ThetaSpec::Explicit { values } => values.clone(),
        };
        let spec = ModelSpec {
            theta_star: theta,
            sigma: g.sigma,
            n: g.n,
            d: g.d,
            k,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(GeneratorConfig {
            kind: g.kind,
            spec,
            p_exploit: g.p_exploit,
            nonadaptive_law: g.nonadaptive_law,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
n_reps = 10
master_seed = 7
alpha_grid = [0.1, 0.05]
output_dir = "out/demo"

[generator]
kind = "treatment_assignment"
n = 200
d = 5
k = 1
sigma = 0.3
p_exploit = 0.8
theta = { kind = "treatment" }

[[estimators]]
method = "tale"

[[estimators]]
method = "w_decorrelation"
lambda = 2.0
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.targets, vec![1]);
        assert_eq!(cfg.noise, NoiseMode::Known);
        assert_eq!(cfg.estimators.len(), 2);
        assert_eq!(
            cfg.estimators[1],
            EstimatorConfig::WDecorrelation {
                lambda: Some(2.0),
                calibration_draws: 1000
            }
        );
        let gen = cfg.generator_config(1, 3).unwrap();
        assert_eq!(gen.spec.theta_star[0], 0.0);
        assert_ne!(gen.seed, cfg.generator_config(1, 4).unwrap().seed);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            SAMPLE.replace("n_reps = 10", "n_reps = 0"),
            SAMPLE.replace("[0.1, 0.05]", "[1.5]"),
            SAMPLE.replace("k = 1", "k = 2"),
            SAMPLE.replace("lambda = 2.0", "lambda = -1.0"),
            SAMPLE.replace("name = \"demo\"", "name = \"demo\"\nbogus = 1"),
            SAMPLE.replace("master_seed = 7", "master_seed = 7\ntargets = [6]"),
            SAMPLE.replace("method = \"tale\"", "method = \"ridge\""),
            SAMPLE.replace(
                "method = \"tale\"",
                "method = \"tale\"\n\n[[estimators]]\nmethod = \"ols\"\nlambda = 1.0",
            ),
            SAMPLE.replace("n = 200", "n = 4"),
            "not toml at all [".to_string(),
        ];
        for text in cases {
            assert!(
                matches!(
                    ExperimentConfig::from_toml_str(&text),
                    Err(Error::Config(_))
                ),
                "accepted:\n{text}"
            );
        }
    }

    #[test]
    fn tale_forbidden_for_multiple_adaptive_columns() {
        let text = SAMPLE
            .replace("treatment_assignment", "k_adaptive_greedy")
            .replace("master_seed = 7", "master_seed = 7\nk_grid = [1, 2]");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn gaussian_theta_redrawn_per_replication() {
        let text = SAMPLE
            .replace("treatment_assignment", "k_adaptive_greedy")
            .replace(
                "{ kind = \"treatment\" }",
                "{ kind = \"first_one_rest_gaussian\" }",
            )
            .replace("method = \"tale\"", "method = \"centered_ols\"");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let a = cfg.generator_config(1, 0).unwrap();
        let b = cfg.generator_config(1, 1).unwrap();
        assert_eq!(a.spec.theta_star[0], 1.0);
        assert_eq!(b.spec.theta_star[0], 1.0);
        assert_ne!(a.spec.theta_star[1], b.spec.theta_star[1]);
        assert_eq!(a, cfg.generator_config(1, 0).unwrap());
    }
}
