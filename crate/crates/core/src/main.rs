use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adaptinf::estimators::{
    centered_ols, concentration_ci, default_s0, ols_report, tale_estimate, w_decorrelation,
    SigmaHat, TaleConfig,
};
use adaptinf::generators::generate;
use adaptinf::harness::dataset::{read_dataset, write_dataset, write_dataset_csv};
use adaptinf::harness::output::{fmt_float, parse_summary_csv, write_summary};
use adaptinf::harness::presets::{preset, PRESETS};
use adaptinf::harness::{run_experiment, ExperimentConfig, RunOptions};
use adaptinf::{Error, EstimateReport, Method, Result};

/// Inference for linear models fit on adaptively collected data.
#[derive(Parser)]
#[command(name = "adaptinf", version)]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (see `adaptinf presets`).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_path(path),
            (None, Some(name)) => preset(name),
            (None, None) => Err(Error::Config(
                "either --config or --preset is required".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset from an experiment's generator.
    Generate {
        #[command(flatten)]
        source: Source,
        /// Seed for this dataset (defaults to replication 0 of the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Adaptivity degree (defaults to the first value of the config).
        #[arg(long)]
        k: Option<usize>,
        /// Output CSV; stdout when absent (no sidecar is written then).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one estimator on a dataset CSV.
    Estimate {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        dataset: PathBuf,
        /// 1-based adaptive columns, overriding the sidecar.
        #[arg(long, value_delimiter = ',')]
        adaptive_cols: Option<Vec<usize>>,
        /// 1-based coordinates to report (all by default).
        #[arg(long, value_delimiter = ',')]
        target: Option<Vec<usize>>,
        /// Interval levels alpha (for the concentration method: delta).
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        alpha: Vec<f64>,
        /// Known noise level; estimated from residuals when absent.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        s0: Option<f64>,
        /// W-decorrelation regularizer (required for that method).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment and write its result files.
    Experiment {
        #[command(flatten)]
        source: Source,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Concatenate summary.csv files from several runs.
    Report {
        /// Run directories or summary.csv files.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets, or print one as a config file.
    Presets {
        #[arg(long)]
        emit: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            source,
            seed,
            k,
            out,
        } => {
            let cfg = source.load()?;
            let k = k.unwrap_or(cfg.k_values()[0]);
            let mut gen = cfg.generator_config(k, 0)?;
            if let Some(s) = seed {
                gen.seed = s;
            }
            gen.validate().map_err(|e| Error::Config(e.to_string()))?;
            let ds = generate(&gen)?;
            match out {
                Some(path) => write_dataset(&path, &ds)?,
                None => write_dataset_csv(std::io::stdout().lock(), &ds)?,
            }
            Ok(())
        }
        Command::Estimate {
            method,
            dataset,
            adaptive_cols,
            target,
            alpha,
            sigma,
            s0,
            lambda,
            out,
        } => {
            let ds = read_dataset(&dataset, adaptive_cols.as_deref())?;
            let sigma = sigma.map_or(SigmaHat::Residual, SigmaHat::Plugin);
            let targets: Option<Vec<usize>> = target
                .map(|t| {
                    t.iter()
                        .map(|&c| {
                            if c == 0 || c > ds.d() {
                                Err(Error::InvalidInput(format!(
                                    "target {c} outside 1..={}",
                                    ds.d()
                                )))
                            } else {
                                Ok(c - 1)
                            }
                        })
                        .collect()
                })
                .transpose()?;
            let report = match method {
                Method::Ols => ols_report(&ds, &alpha, sigma)?,
                Method::CenteredOls => centered_ols(&ds, &alpha, sigma)?,
                Method::Tale => {
                    let cfg = TaleConfig {
                        s0: s0.unwrap_or_else(|| default_s0(ds.n())),
                        sigma_hat: sigma,
                        alpha_levels: alpha.clone(),
                    };
                    tale_estimate(&ds, &cfg)?.to_report()
                }
                Method::ConcentrationCi => {
                    let t = match targets.as_deref() {
                        Some([t]) => *t,
                        Some(_) => {
                            return Err(Error::InvalidInput(
                                "concentration_ci takes a single --target".into(),
                            ))
                        }
                        None => ds.adaptive_idx().first().copied().unwrap_or(0),
                    };
                    concentration_ci(&ds, t, &alpha, sigma)?
                }
                Method::WDecorrelation => {
                    let lambda = lambda
                        .ok_or_else(|| Error::Config("w_decorrelation needs --lambda".into()))?;
                    w_decorrelation(&ds, lambda, &alpha, sigma)?
                }
            };
            write_report(output(out.as_deref())?, &report, targets.as_deref())
        }
        Command::Experiment {
            source,
            seed,
            out,
            reps,
            jobs,
        } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(r) = reps {
                cfg.n_reps = r;
            }
            if let Some(dir) = &out {
                cfg.output_dir = dir.clone();
            }
            cfg.validate()?;
            let opts = RunOptions {
                jobs,
                quiet: cli.quiet,
            };
            let dir = run_experiment(&cfg, None, &opts)?;
            if !cli.quiet {
                eprintln!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Report { runs, out } => {
            let mut rows = Vec::new();
            for run in runs {
                let path = if run.is_dir() {
                    run.join("summary.csv")
                } else {
                    run
                };
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                rows.extend(parse_summary_csv(&text)?);
            }
            write_summary(output(out.as_deref())?, &rows)
        }
        Command::Presets { emit } => {
            let mut stdout = std::io::stdout().lock();
            match emit {
                Some(name) => write!(stdout, "{}", preset(&name)?.to_toml_string()?)?,
                None => {
                    for p in &PRESETS {
                        writeln!(stdout, "{:<14}{}", p.name, p.description)?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn write_report(out: Box<dyn Write>, r: &EstimateReport, targets: Option<&[usize]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "coord",
        "estimate",
        "stderr",
        "alpha",
        "ci_lo",
        "ci_hi",
        "sigma_hat",
    ])?;
    for (pos, &coord) in r.target_idx.iter().enumerate() {
        if targets.is_some_and(|t| !t.contains(&coord)) {
            continue;
        }
        let se = r
            .stderr
            .as_ref()
            .map(|s| fmt_float(s[pos]))
            .unwrap_or_default();
        let head = [
            r.method.to_string(),
            (coord + 1).to_string(),
            fmt_float(r.estimate[pos]),
            se,
        ];
        if r.intervals.is_empty() {
            w.write_record(head.iter().cloned().chain([
                String::new(),
                String::new(),
                String::new(),
                fmt_float(r.sigma_hat),
            ]))?;
        }
        for set in &r.intervals {
            w.write_record(head.iter().cloned().chain([
                fmt_float(set.alpha),
                fmt_float(set.lower[pos]),
                fmt_float(set.upper[pos]),
                fmt_float(r.sigma_hat),
            ]))?;
        }
    }
    w.flush()?;
    Ok(())
}
