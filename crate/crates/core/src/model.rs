//! Linear-model data types shared by generators, estimators and the harness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth of a simulated linear model `y = Xθ* + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub theta_star: Vec<f64>,
    /// Noise standard deviation. Zero is accepted and yields noiseless data.
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    /// Number of adaptive coordinates.
    pub k: usize,
}

impl ModelSpec {
    pub fn new(theta_star: Vec<f64>, sigma: f64, n: usize, k: usize) -> Result<Self> {
        let spec = Self {
            d: theta_star.len(),
            theta_star,
            sigma,
            n,
            k,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_star.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "theta_star has length {} but d = {}",
                self.theta_star.len(),
                self.d
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidInput("d must be positive".into()));
        }
        if self.k > self.d {
            return Err(Error::InvalidInput(format!(
                "k = {} exceeds d = {}",
                self.k, self.d
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        if self.theta_star.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("theta_star must be finite".into()));
        }
        Ok(())
    }
}

/// Provenance of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub generator: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

/// Covariates and responses of a `(k, d)`-adaptive sample. Row `i` of `x`
/// was collected at time `i`; `adaptive_idx` lists the (0-based) columns
/// that may depend on the past.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    adaptive_idx: Vec<usize>,
    pub meta: GenerationMeta,
}

impl AdaptiveDataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        adaptive_idx: Vec<usize>,
        meta: GenerationMeta,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "X has {} rows but y has length {}",
                x.nrows(),
                y.len()
            )));
        }
        let d = x.ncols();
        for (pos, &j) in adaptive_idx.iter().enumerate() {
            if j >= d {
                return Err(Error::InvalidInput(format!(
                    "adaptive index {j} out of range for d = {d}"
                )));
            }
            if adaptive_idx[..pos].contains(&j) {
                return Err(Error::InvalidInput(format!(
                    "adaptive index {j} listed twice"
                )));
            }
        }
        Ok(Self {
            x,
            y,
            adaptive_idx,
            meta,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn adaptive_idx(&self) -> &[usize] {
        &self.adaptive_idx
    }

    pub fn nonadaptive_idx(&self) -> Vec<usize> {
        crate::linalg::complement(self.d(), &self.adaptive_idx)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.adaptive_idx.len()
    }

    pub fn x_ad(&self) -> DMatrix<f64> {
        self.x.select_columns(&self.adaptive_idx)
    }

    pub fn x_nad(&self) -> DMatrix<f64> {
        self.x.select_columns(&self.nonadaptive_idx())
    }

    /// Same data with a different declared adaptive set.
    pub fn with_adaptive_idx(&self, adaptive_idx: Vec<usize>) -> Result<Self> {
        Self::new(
            self.x.clone(),
            self.y.clone(),
            adaptive_idx,
            self.meta.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    CenteredOls,
    Tale,
    ConcentrationCi,
    WDecorrelation,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ols,
        Method::CenteredOls,
        Method::Tale,
        Method::ConcentrationCi,
        Method::WDecorrelation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::CenteredOls => "centered_ols",
            Method::Tale => "tale",
            Method::ConcentrationCi => "concentration_ci",
            Method::WDecorrelation => "w_decorrelation",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "ols" => Ok(Method::Ols),
            "centered_ols" | "cols" => Ok(Method::CenteredOls),
            "tale" => Ok(Method::Tale),
            "concentration_ci" | "concentration" => Ok(Method::ConcentrationCi),
            "w_decorrelation" | "wdecorrelation" | "wdecorr" => Ok(Method::WDecorrelation),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Confidence intervals at one level `alpha`, aligned with
/// [`EstimateReport::estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    pub alpha: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Output of one estimator on one dataset. `estimate[i]` refers to
/// coordinate `target_idx[i]` of θ.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub estimate: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub intervals: Vec<IntervalSet>,
    pub target_idx: Vec<usize>,
    /// Noise level used to build standard errors and intervals.
    pub sigma_hat: f64,
}

impl EstimateReport {
    pub fn interval(&self, alpha: f64) -> Option<&IntervalSet> {
        self.intervals.iter().find(|s| alpha_eq(s.alpha, alpha))
    }

    /// Position of coordinate `coord` within `estimate`.
    pub fn position(&self, coord: usize) -> Option<usize> {
        self.target_idx.iter().position(|&j| j == coord)
    }
}

/// Two alpha levels are the same level if they agree to 1e-12.
pub fn alpha_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// One confidence interval for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Per-coordinate outcome of one estimator in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordOutcome {
    /// 0-based coordinate index.
    pub coord: usize,
    pub truth: f64,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub intervals: Vec<Interval>,
    pub scaled_mse: Option<f64>,
}

impl CoordOutcome {
    /// `(θ̂ − θ*) / stderr`.
    pub fn pivot(&self) -> Option<f64> {
        match self.stderr {
            Some(se) if se > 0.0 => Some((self.estimate - self.truth) / se),
            Some(_) if self.estimate == self.truth => Some(0.0),
            _ => None,
        }
    }

    pub fn interval(&self, alpha: f64) -> Option<&Interval> {
        self.intervals.iter().find(|i| alpha_eq(i.alpha, alpha))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub coords: Vec<CoordOutcome>,
    pub sigma_hat: f64,
    pub runtime_ms: Option<f64>,
}

/// Everything one replication produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub k: usize,
    pub rep_index: usize,
    pub outcomes: Vec<MethodOutcome>,
}

impl ReplicationRecord {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    pub fn coord(&self, method: Method, coord: usize) -> Option<&CoordOutcome> {
        self.outcome(method)?
            .coords
            .iter()
            .find(|c| c.coord == coord)
    }
}
