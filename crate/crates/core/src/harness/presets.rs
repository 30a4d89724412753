//! Built-in experiment presets.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::generators::{GeneratorKind, NonadaptiveLaw};

use super::config::{EstimatorConfig, ExperimentConfig, GeneratorSection, NoiseMode, ThetaSpec};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "fig1",
        description: "k-adaptive greedy sweep, n=1000, d=300, k=2..200 step 3, 20 reps; OLS vs centered OLS scaled-MSE",
    },
    Preset {
        name: "fig2-low",
        description: "treatment assignment, n=1000, d=10, sigma=0.3, p=0.8, 1000 reps; coverage and width of all interval methods",
    },
    Preset {
        name: "fig2-high",
        description: "treatment assignment, n=500, d=50, sigma=0.3, p=0.8, 1000 reps; coverage and width of all interval methods",
    },
    Preset {
        name: "iid-baseline",
        description: "i.i.d. Gaussian design, n=200, d=5, sigma=1, 5000 reps; OLS scaled-MSE on the first two coordinates",
    },
];

const ALPHA_GRID: [f64; 11] = [0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

fn interval_methods() -> Vec<EstimatorConfig> {
    vec![
        EstimatorConfig::Tale { s0: None },
        EstimatorConfig::Ols {},
        EstimatorConfig::ConcentrationCi {},
        EstimatorConfig::WDecorrelation {
            lambda: None,
            calibration_draws: 1000,
        },
    ]
}

fn treatment(name: &str, n: usize, d: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        n_reps: 1000,
        master_seed: 20240601,
        alpha_grid: ALPHA_GRID.to_vec(),
        k_grid: None,
        targets: vec![1],
        noise: NoiseMode::Known,
        record_timing: false,
        output_dir: PathBuf::from("results").join(name),
        generator: GeneratorSection {
            kind: GeneratorKind::TreatmentAssignment,
            n,
            d,
            k: 1,
            sigma: 0.3,
            p_exploit: 0.8,
            nonadaptive_law: NonadaptiveLaw::StandardGaussian,
            theta: ThetaSpec::Treatment,
        },
        estimators: interval_methods(),
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig1" => ExperimentConfig {
            name: "fig1".into(),
            n_reps: 20,
            master_seed: 20240601,
            alpha_grid: Vec::new(),
            k_grid: Some((2..=200).step_by(3).collect()),
            targets: vec![1],
            noise: NoiseMode::Known,
            record_timing: false,
            output_dir: PathBuf::from("results/fig1"),
            generator: GeneratorSection {
                kind: GeneratorKind::KAdaptiveGreedy,
                n: 1000,
                d: 300,
                k: 2,
                sigma: 1.0,
                p_exploit: 0.8,
                nonadaptive_law: NonadaptiveLaw::ShiftedSphere,
                theta: ThetaSpec::FirstOneRestGaussian,
            },
            estimators: vec![EstimatorConfig::Ols {}, EstimatorConfig::CenteredOls {}],
        },
        "fig2-low" => treatment("fig2-low", 1000, 10),
        "fig2-high" => treatment("fig2-high", 500, 50),
        "iid-baseline" => ExperimentConfig {
            name: "iid-baseline".into(),
            n_reps: 5000,
            master_seed: 20240601,
            alpha_grid: vec![0.1],
            k_grid: None,
            targets: vec![1, 2],
            noise: NoiseMode::Known,
            record_timing: false,
            output_dir: PathBuf::from("results/iid-baseline"),
            generator: GeneratorSection {
                kind: GeneratorKind::Iid,
                n: 200,
                d: 5,
                k: 0,
                sigma: 1.0,
                p_exploit: 0.0,
                nonadaptive_law: NonadaptiveLaw::StandardGaussian,
                theta: ThetaSpec::Constant { value: 1.0 },
            },
            estimators: vec![EstimatorConfig::Ols {}],
        },
        other => {
            let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            return Err(Error::Config(format!(
                "unknown preset '{other}' (available: {})",
                known.join(", ")
            )));
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
