//! Seeded simulators for `(k, d)`-adaptive linear-model data.
//!
//! Three designs are provided:
//!
//! - [`gen_iid`]: every row i.i.d. from a non-adaptive law (the `(0, d)` case).
//! - [`gen_treatment_assignment`]: one binary treatment column assigned
//!   ε-greedily on the sign of the running OLS estimate of its effect.
//! - [`gen_k_adaptive_greedy`]: the same rule applied independently to each
//!   of `k` adaptive columns, with non-adaptive covariates on the sphere.
//!
//! Randomness is split into three ChaCha streams derived from one seed
//! (covariates, noise, assignment coins). The non-adaptive covariates are
//! therefore identical across noise seeds, and under `p_exploit = 0` the
//! whole design is.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_least_squares;
use crate::model::{AdaptiveDataset, GenerationMeta, ModelSpec};

const COVARIATE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const ASSIGNMENT_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Iid,
    TreatmentAssignment,
    KAdaptiveGreedy,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Iid => "iid",
            GeneratorKind::TreatmentAssignment => "treatment_assignment",
            GeneratorKind::KAdaptiveGreedy => "k_adaptive_greedy",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "iid" => Ok(GeneratorKind::Iid),
            "treatment_assignment" | "treatment" => Ok(GeneratorKind::TreatmentAssignment),
            "k_adaptive_greedy" | "greedy" => Ok(GeneratorKind::KAdaptiveGreedy),
            _ => Err(Error::Config(format!("unknown generator '{s}'"))),
        }
    }
}

/// Distribution of the non-adaptive covariate block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonadaptiveLaw {
    #[default]
    StandardGaussian,
    /// Uniform on the unit sphere of the block's dimension.
    UniformSphere,
    /// Uniform on the sphere plus a mean vector drawn once per dataset from
    /// `N(1, I)`.
    ShiftedSphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub spec: ModelSpec,
    /// Probability of following the greedy sign rule (otherwise explore).
    pub p_exploit: f64,
    #[serde(default)]
    pub nonadaptive_law: NonadaptiveLaw,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(0.0..=1.0).contains(&self.p_exploit) {
            return Err(Error::InvalidInput(format!(
                "p_exploit must lie in [0, 1], got {}",
                self.p_exploit
            )));
        }
        let ModelSpec { n, d, k, .. } = self.spec;
        match self.kind {
            GeneratorKind::Iid => {}
            GeneratorKind::TreatmentAssignment => {
                if k != 1 {
                    return Err(Error::InvalidInput(format!(
                        "treatment assignment needs k = 1, got {k}"
                    )));
                }
                if d < 2 || n <= d {
                    return Err(Error::InvalidInput(format!(
                        "treatment assignment needs d >= 2 and n > d (n = {n}, d = {d})"
                    )));
                }
            }
            GeneratorKind::KAdaptiveGreedy => {
                if k == 0 || k >= d {
                    return Err(Error::InvalidInput(format!(
                        "k-adaptive greedy needs 1 <= k < d (k = {k}, d = {d})"
                    )));
                }
                if n <= d {
                    return Err(Error::InvalidInput(format!(
                        "k-adaptive greedy needs n > d (n = {n}, d = {d})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Seeds of the three independent random streams of a generator run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub covariates: u64,
    pub noise: u64,
    pub assignment: u64,
}

impl SeedStreams {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            covariates: seed,
            noise: seed,
            assignment: seed,
        }
    }

    fn rngs(&self) -> (ChaCha8Rng, ChaCha8Rng, ChaCha8Rng) {
        (
            stream_rng(self.covariates, COVARIATE_STREAM),
            stream_rng(self.noise, NOISE_STREAM),
            stream_rng(self.assignment, ASSIGNMENT_STREAM),
        )
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate a dataset according to `cfg.kind`, seeded by `cfg.seed`.
pub fn generate(cfg: &GeneratorConfig) -> Result<AdaptiveDataset> {
    generate_with_streams(cfg, SeedStreams::from_seed(cfg.seed))
}

pub fn generate_with_streams(cfg: &GeneratorConfig, seeds: SeedStreams) -> Result<AdaptiveDataset> {
    cfg.validate()?;
    match cfg.kind {
        GeneratorKind::Iid => iid_impl(cfg, seeds),
        GeneratorKind::TreatmentAssignment | GeneratorKind::KAdaptiveGreedy => {
            greedy_impl(cfg, seeds)
        }
    }
}

pub fn gen_iid(cfg: &GeneratorConfig) -> Result<AdaptiveDataset> {
    expect_kind(cfg, GeneratorKind::Iid)?;
    generate(cfg)
}

pub fn gen_treatment_assignment(cfg: &GeneratorConfig) -> Result<AdaptiveDataset> {
    expect_kind(cfg, GeneratorKind::TreatmentAssignment)?;
    generate(cfg)
}

pub fn gen_k_adaptive_greedy(cfg: &GeneratorConfig) -> Result<AdaptiveDataset> {
    expect_kind(cfg, GeneratorKind::KAdaptiveGreedy)?;
    generate(cfg)
}

fn expect_kind(cfg: &GeneratorConfig, kind: GeneratorKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::InvalidInput(format!(
            "generator config has kind {} but {} was requested",
            cfg.kind, kind
        )));
    }
    Ok(())
}

/// Sampler for one non-adaptive row block.
struct NonadaptiveSampler {
    law: NonadaptiveLaw,
    dim: usize,
    shift: Option<Vec<f64>>,
}

impl NonadaptiveSampler {
    fn new<R: Rng>(law: NonadaptiveLaw, dim: usize, rng: &mut R) -> Self {
        let shift = match law {
            NonadaptiveLaw::ShiftedSphere => Some(
                (0..dim)
                    .map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            ),
            _ => None,
        };
        Self { law, dim, shift }
    }

    fn fill<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if matches!(
            self.law,
            NonadaptiveLaw::UniformSphere | NonadaptiveLaw::ShiftedSphere
        ) {
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|v| *v /= norm);
            }
        }
        if let Some(shift) = &self.shift {
            out.iter_mut().zip(shift).for_each(|(v, s)| *v += s);
        }
    }
}

fn meta(cfg: &GeneratorConfig) -> GenerationMeta {
    let mut params = BTreeMap::new();
    params.insert("n".to_string(), cfg.spec.n as f64);
    params.insert("d".to_string(), cfg.spec.d as f64);
    params.insert("k".to_string(), cfg.spec.k as f64);
    params.insert("sigma".to_string(), cfg.spec.sigma);
    params.insert("p_exploit".to_string(), cfg.p_exploit);
    GenerationMeta {
        generator: cfg.kind.as_str().to_string(),
        params,
        seed: Some(cfg.seed),
    }
}

fn iid_impl(cfg: &GeneratorConfig, seeds: SeedStreams) -> Result<AdaptiveDataset> {
    let (mut cov_rng, mut noise_rng, _) = seeds.rngs();
    let ModelSpec { n, d, sigma, .. } = cfg.spec;
    let sampler = NonadaptiveSampler::new(cfg.nonadaptive_law, d, &mut cov_rng);
    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    let mut row = vec![0.0; d];
    for i in 0..n {
        sampler.fill(&mut cov_rng, &mut row);
        let eps: f64 = noise_rng.sample(StandardNormal);
        y[i] = dot(&row, &cfg.spec.theta_star) + sigma * eps;
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    AdaptiveDataset::new(x, y, Vec::new(), meta(cfg))
}

fn greedy_impl(cfg: &GeneratorConfig, seeds: SeedStreams) -> Result<AdaptiveDataset> {
    let (mut cov_rng, mut noise_rng, mut coin_rng) = seeds.rngs();
    let ModelSpec { n, d, k, sigma, .. } = cfg.spec;
    let sampler = NonadaptiveSampler::new(cfg.nonadaptive_law, d - k, &mut cov_rng);
    let warmup_rows = d + 1;

    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    let mut row = vec![0.0; d];
    let mut tracker = RunningOls::new(d);

    for i in 0..n {
        sampler.fill(&mut cov_rng, &mut row[k..]);
        let prior = if i >= warmup_rows {
            tracker.estimate()
        } else {
            None
        };
        for j in 0..k {
            let coin: f64 = coin_rng.random();
            row[j] = match prior {
                Some(theta) => {
                    if coin < cfg.p_exploit {
                        indicator(theta[j] > 0.0)
                    } else {
                        1.0
                    }
                }
                // A single treatment column starts fully on; several adaptive
                // columns need distinct warm-up values to be identifiable.
                None if k == 1 => 1.0,
                None => indicator(coin < 0.5),
            };
        }
        let eps: f64 = noise_rng.sample(StandardNormal);
        let yi = dot(&row, &cfg.spec.theta_star) + sigma * eps;
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
        y[i] = yi;
        tracker.push(&row, yi);
    }
    AdaptiveDataset::new(x, y, (0..k).collect(), meta(cfg))
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Full-history OLS maintained by recursive (Sherman–Morrison) updates,
/// re-solved exactly by QR every `refresh_every` rows to stop drift.
struct RunningOls {
    d: usize,
    rows: Vec<f64>,
    ys: Vec<f64>,
    state: Option<RlsState>,
    since_refresh: usize,
    refresh_every: usize,
}

struct RlsState {
    gram_inv: DMatrix<f64>,
    theta: DVector<f64>,
}

impl RunningOls {
    fn new(d: usize) -> Self {
        Self {
            d,
            rows: Vec::new(),
            ys: Vec::new(),
            state: None,
            since_refresh: 0,
            refresh_every: d.max(32),
        }
    }

    fn len(&self) -> usize {
        self.ys.len()
    }

    fn estimate(&self) -> Option<&DVector<f64>> {
        self.state.as_ref().map(|s| &s.theta)
    }

    fn push(&mut self, row: &[f64], y: f64) {
        self.rows.extend_from_slice(row);
        self.ys.push(y);
        if self.len() <= self.d {
            return;
        }
        match &mut self.state {
            Some(state) if self.since_refresh < self.refresh_every => {
                let x = DVector::from_column_slice(row);
                let px = &state.gram_inv * &x;
                let denom = 1.0 + x.dot(&px);
                let gain = &px / denom;
                let resid = y - x.dot(&state.theta);
                state.theta += &gain * resid;
                state.gram_inv -= &gain * px.transpose();
                self.since_refresh += 1;
            }
            _ => self.refit(),
        }
    }

    fn refit(&mut self) {
        let n = self.len();
        let x = DMatrix::from_row_slice(n, self.d, &self.rows);
        let y = DVector::from_column_slice(&self.ys);
        self.state = solve_least_squares(&x, &y).ok().map(|fit| RlsState {
            gram_inv: fit.gram_inverse,
            theta: fit.coefficients,
        });
        self.since_refresh = 0;
    }
}

/// One covariate matrix with i.i.d. rows drawn from the design family of
/// `cfg`: the non-adaptive law on the non-adaptive block and independent
/// fair `{0, 1}` draws on the adaptive columns.
pub fn draw_iid_design<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> DMatrix<f64> {
    let ModelSpec { n, d, .. } = cfg.spec;
    let k = match cfg.kind {
        GeneratorKind::Iid => 0,
        _ => cfg.spec.k,
    };
    let sampler = NonadaptiveSampler::new(cfg.nonadaptive_law, d - k, rng);
    let mut x = DMatrix::zeros(n, d);
    let mut row = vec![0.0; d];
    for i in 0..n {
        for v in row[..k].iter_mut() {
            *v = indicator(rng.random::<f64>() < 0.5);
        }
        sampler.fill(rng, &mut row[k..]);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    x
}

/// The treatment-assignment model used for inference experiments:
/// `θ*_1 = 0` and `θ*_{2:d} = 1/√(d−1)`.
pub fn treatment_theta(d: usize) -> Vec<f64> {
    let mut theta = vec![1.0 / ((d - 1) as f64).sqrt(); d];
    theta[0] = 0.0;
    theta
}

/// `θ*_1 = 1`, remaining coordinates i.i.d. `N(0, 1)` drawn from `rng`.
pub fn first_one_rest_gaussian<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    theta[0] = 1.0;
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn treatment_cfg(n: usize, d: usize, p: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            kind: GeneratorKind::TreatmentAssignment,
            spec: ModelSpec::new(treatment_theta(d), 0.3, n, 1).unwrap(),
            p_exploit: p,
            nonadaptive_law: NonadaptiveLaw::StandardGaussian,
            seed,
        }
    }

    fn iid_cfg(n: usize, d: usize, sigma: f64, law: NonadaptiveLaw, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            kind: GeneratorKind::Iid,
            spec: ModelSpec::new((0..d).map(|j| j as f64 - 1.0).collect(), sigma, n, 0).unwrap(),
            p_exploit: 0.0,
            nonadaptive_law: law,
            seed,
        }
    }

    #[test]
    fn iid_noiseless_response_is_exact() {
        let cfg = iid_cfg(50, 4, 0.0, NonadaptiveLaw::StandardGaussian, 3);
        let ds = gen_iid(&cfg).unwrap();
        let theta = DVector::from_vec(cfg.spec.theta_star.clone());
        assert_eq!(ds.x() * theta, *ds.y());
        assert!(ds.adaptive_idx().is_empty());
    }

    #[test]
    fn iid_moments() {
        let n = 10_000;
        let ds = gen_iid(&iid_cfg(n, 3, 1.0, NonadaptiveLaw::StandardGaussian, 11)).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        for col in ds.x().column_iter() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < tol, "mean {mean}");
            assert!((var - 1.0).abs() < 0.1, "var {var}");
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = treatment_cfg(300, 5, 0.8, 42);
        let a = gen_treatment_assignment(&cfg).unwrap();
        let b = gen_treatment_assignment(&cfg).unwrap();
        assert_eq!(a, b);
        let c = gen_treatment_assignment(&GeneratorConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn pure_exploration_gives_all_ones() {
        let ds = gen_treatment_assignment(&treatment_cfg(200, 4, 0.0, 5)).unwrap();
        assert!(ds.x().column(0).iter().all(|&v| v == 1.0));
        assert_eq!(ds.adaptive_idx(), &[0]);
    }

    #[test]
    fn treatment_column_is_binary_and_warm_up_is_on() {
        let d = 6;
        let ds = gen_treatment_assignment(&treatment_cfg(400, d, 0.8, 9)).unwrap();
        let col = ds.x().column(0);
        assert!(col.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(col.iter().take(d + 1).all(|&v| v == 1.0));
        // with theta_1 = 0 the greedy rule switches the treatment off sometimes
        assert!(col.iter().any(|&v| v == 0.0));
    }

    #[test]
    fn single_adaptive_coordinate_matches_treatment_design() {
        let t = treatment_cfg(250, 5, 0.8, 17);
        let g = GeneratorConfig {
            kind: GeneratorKind::KAdaptiveGreedy,
            ..t.clone()
        };
        let a = generate(&t).unwrap();
        let b = generate(&g).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
    }

    #[test]
    fn sphere_rows_have_unit_norm() {
        let d = 12;
        let k = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = GeneratorConfig {
            kind: GeneratorKind::KAdaptiveGreedy,
            spec: ModelSpec::new(first_one_rest_gaussian(d, &mut rng), 1.0, 100, k).unwrap(),
            p_exploit: 0.8,
            nonadaptive_law: NonadaptiveLaw::UniformSphere,
            seed: 1,
        };
        let ds = gen_k_adaptive_greedy(&cfg).unwrap();
        assert_eq!(ds.adaptive_idx(), &[0, 1, 2]);
        for i in 0..ds.n() {
            let norm: f64 = (k..d).map(|j| ds.x()[(i, j)].powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!((0..k).all(|j| ds.x()[(i, j)] == 0.0 || ds.x()[(i, j)] == 1.0));
        }
    }

    #[test]
    fn nonadaptive_block_ignores_noise_seed() {
        let cfg = treatment_cfg(200, 5, 0.8, 7);
        let base = SeedStreams::from_seed(7);
        let other = SeedStreams { noise: 99, ..base };
        let a = generate_with_streams(&cfg, base).unwrap();
        let b = generate_with_streams(&cfg, other).unwrap();
        assert_eq!(a.x_nad(), b.x_nad());
        assert_ne!(a.y(), b.y());

        let explore = treatment_cfg(200, 5, 0.0, 7);
        let a = generate_with_streams(&explore, base).unwrap();
        let b = generate_with_streams(&explore, other).unwrap();
        assert_eq!(a.x(), b.x());
    }

    #[test]
    fn config_validation() {
        let mut cfg = treatment_cfg(100, 5, 0.8, 1);
        cfg.spec.k = 2;
        assert!(generate(&cfg).is_err());
        let mut cfg = treatment_cfg(5, 5, 0.8, 1);
        cfg.spec.n = 5;
        assert!(generate(&cfg).is_err());
        let cfg = GeneratorConfig {
            p_exploit: 1.5,
            ..treatment_cfg(100, 5, 0.8, 1)
        };
        assert!(generate(&cfg).is_err());
        let cfg = GeneratorConfig {
            kind: GeneratorKind::KAdaptiveGreedy,
            spec: ModelSpec::new(vec![1.0; 4], 1.0, 50, 4).unwrap(),
            p_exploit: 0.5,
            nonadaptive_law: NonadaptiveLaw::UniformSphere,
            seed: 0,
        };
        assert!(generate(&cfg).is_err());
        assert!(gen_iid(&treatment_cfg(100, 5, 0.8, 1)).is_err());
    }

    #[test]
    fn running_ols_tracks_exact_fit() {
        let cfg = iid_cfg(120, 4, 1.0, NonadaptiveLaw::StandardGaussian, 2);
        let ds = gen_iid(&cfg).unwrap();
        let mut tracker = RunningOls::new(4);
        for i in 0..ds.n() {
            let row: Vec<f64> = ds.x().row(i).iter().copied().collect();
            tracker.push(&row, ds.y()[i]);
        }
        let exact = solve_least_squares(ds.x(), ds.y()).unwrap();
        let diff = (tracker.estimate().unwrap() - &exact.coefficients).amax();
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn shifted_sphere_has_nonzero_mean() {
        let cfg = iid_cfg(2000, 3, 1.0, NonadaptiveLaw::ShiftedSphere, 4);
        let ds = gen_iid(&cfg).unwrap();
        let means: Vec<f64> = ds.x().column_iter().map(|c| c.mean()).collect();
        assert!(means.iter().any(|m| m.abs() > 0.1), "{means:?}");
    }
}
