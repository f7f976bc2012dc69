//! Finite-sample simulation of `Ŝ` under heteroskedastic linear models.
//!
//! Covariates are `N(0, Σ_X)` with identity diagonal blocks and every
//! nuisance/target cross covariance equal to `ρ²/(m₀m₁)`. Outcomes are
//! `Yᵢ = β Σ_j X_{i,target j} + εᵢ` where, by default, `εᵢ` is a gamma draw
//! with shape `a` and rate `sqrt(a / x²)` on the first target covariate `x`,
//! centered by its mean `sqrt(a)|x|`, so that `E(ε | X) = 0` and
//! `Var(ε | X) = x²`. Each replicate fits the linear family with an
//! intercept (counted in `m`) and records `Ŝ` against `β₀ = 0`.
//!
//! Replicate `r` draws from a ChaCha stream seeded by a SplitMix64 hash of
//! `(base_seed, config id, r)`; results are collected in replicate order so
//! they do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::effectsize::analyze;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::models::{fit_linear, Dataset};
use crate::SCHEMA_VERSION;

/// Reference design grid.
pub const DESIGN_N: [usize; 6] = [25, 50, 100, 250, 500, 1000];
pub const DESIGN_S: [f64; 5] = [0.0, 0.1, 0.25, 0.4, 0.6];
pub const DESIGN_RHO_SQ: [f64; 2] = [0.0, 0.6];
pub const DESIGN_M0: [usize; 2] = [2, 5];
pub const DESIGN_M1: [usize; 3] = [1, 3, 5];
pub const DESIGN_SHAPE: [f64; 2] = [0.5, 10.0];
pub const REFERENCE_REPLICATES: usize = 1000;
pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_CALIBRATION_N: usize = 1_000_000;

/// Error distribution of the outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    /// Centered gamma with the configured shape; `Var(ε | X) = x²` on the
    /// first target covariate.
    Gamma,
    /// Homoskedastic normal errors (correctly specified linear model).
    Normal { sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub s_target: f64,
    pub rho_sq: f64,
    pub m0: usize,
    pub m1: usize,
    /// Gamma shape `a`.
    pub shape: f64,
    pub n_replicates: usize,
    pub base_seed: u64,
    pub errors: ErrorModel,
    /// Size of the single draw used to calibrate `β`.
    pub calibration_n: usize,
}

impl SimConfig {
    pub fn new(n: usize, s_target: f64, rho_sq: f64, m0: usize, m1: usize, shape: f64) -> Self {
        SimConfig {
            n,
            s_target,
            rho_sq,
            m0,
            m1,
            shape,
            n_replicates: DEFAULT_REPLICATES,
            base_seed: 0,
            errors: ErrorModel::Gamma,
            calibration_n: DEFAULT_CALIBRATION_N,
        }
    }

    pub fn with_replicates(mut self, r: usize) -> Self {
        self.n_replicates = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_errors(mut self, errors: ErrorModel) -> Self {
        self.errors = errors;
        self
    }

    pub fn with_calibration_n(mut self, n: usize) -> Self {
        self.calibration_n = n;
        self
    }

    /// Number of fitted parameters, intercept included.
    pub fn m(&self) -> usize {
        1 + self.m0 + self.m1
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 == 0 {
            return Err(Error::Config("m1 must be >= 1".into()));
        }
        if self.n <= self.m() {
            return Err(Error::Config(format!(
                "n = {} must exceed m0 + m1 + 1 = {}",
                self.n,
                self.m()
            )));
        }
        if self.calibration_n <= self.m() {
            return Err(Error::Config("calibration sample too small".into()));
        }
        if !self.s_target.is_finite() || self.s_target < 0.0 {
            return Err(Error::Config(format!("s_target must be >= 0, got {}", self.s_target)));
        }
        if !self.rho_sq.is_finite() || self.rho_sq < 0.0 {
            return Err(Error::Config(format!("rho_sq must be >= 0, got {}", self.rho_sq)));
        }
        if self.m0 == 0 && self.rho_sq != 0.0 {
            return Err(Error::Config("rho_sq > 0 needs at least one nuisance covariate".into()));
        }
        if !self.shape.is_finite() || self.shape <= 0.0 {
            return Err(Error::Config(format!("gamma shape must be > 0, got {}", self.shape)));
        }
        if let ErrorModel::Normal { sd } = self.errors {
            if !sd.is_finite() || sd <= 0.0 {
                return Err(Error::Config(format!("error sd must be > 0, got {sd}")));
            }
        }
        if self.n_replicates == 0 {
            return Err(Error::Config("n_replicates must be >= 1".into()));
        }
        Ok(())
    }

    /// Settings outside the reference design grid.
    pub fn extensions(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !DESIGN_N.contains(&self.n) {
            out.push("n");
        }
        if !DESIGN_S.contains(&self.s_target) {
            out.push("s_target");
        }
        if !DESIGN_RHO_SQ.contains(&self.rho_sq) {
            out.push("rho_sq");
        }
        if !DESIGN_M0.contains(&self.m0) {
            out.push("m0");
        }
        if !DESIGN_M1.contains(&self.m1) {
            out.push("m1");
        }
        if !DESIGN_SHAPE.contains(&self.shape) {
            out.push("shape");
        }
        if self.errors != ErrorModel::Gamma {
            out.push("errors");
        }
        out
    }

    /// Stable identifier of the data-generating design. Replicate counts are
    /// excluded so that a longer run extends a shorter one.
    pub fn config_id(&self) -> String {
        format!("n{}_{}", self.n, self.design_id())
    }

    /// Identifier of everything the calibration draw depends on (not `n`,
    /// not `s_target`).
    fn calibration_id(&self) -> String {
        format!("cal{}_{}", self.calibration_n, self.design_id_without_s())
    }

    fn design_id(&self) -> String {
        format!("s{}_{}", self.s_target, self.design_id_without_s())
    }

    fn design_id_without_s(&self) -> String {
        let errors = match self.errors {
            ErrorModel::Gamma => format!("gamma{}", self.shape),
            ErrorModel::Normal { sd } => format!("normal{sd}"),
        };
        format!("rho{}_m0{}_m1{}_{}", self.rho_sq, self.m0, self.m1, errors)
    }

    /// `Σ_X` with identity diagonal blocks and constant cross blocks.
    pub fn covariate_covariance(&self) -> Matrix<f64> {
        let p = self.m0 + self.m1;
        let cross = if self.m0 == 0 {
            0.0
        } else {
            self.rho_sq / (self.m0 * self.m1) as f64
        };
        Matrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else if (i < self.m0) != (j < self.m0) {
                cross
            } else {
                0.0
            }
        })
    }

    fn covariate_factor(&self) -> Result<Cholesky<f64>> {
        self.covariate_covariance().cholesky().map_err(|_| {
            Error::Config(format!(
                "covariate covariance is not positive definite (rho_sq = {}, m0 = {}, m1 = {})",
                self.rho_sq, self.m0, self.m1
            ))
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of replicate `r` for a design.
pub fn replicate_seed(base_seed: u64, config_id: &str, r: usize) -> u64 {
    let key = splitmix64(base_seed ^ fnv1a(config_id));
    splitmix64(key.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_covariates<R: Rng>(config: &SimConfig, n: usize, factor: &Cholesky<f64>, rng: &mut R) -> Matrix<f64> {
    let p = config.m0 + config.m1;
    let mut x = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        loop {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let row = factor.lower_mul(&z);
            // The error scale depends on the first target column; an exact
            // zero would make the gamma rate infinite.
            if row[config.m0] != 0.0 {
                x.row_mut(i).copy_from_slice(&row);
                break;
            }
        }
    }
    x
}

fn sample_outcome<R: Rng>(x: &Matrix<f64>, beta: f64, config: &SimConfig, rng: &mut R) -> Result<Vec<f64>> {
    let (m0, m1) = (config.m0, config.m1);
    if x.cols() != m0 + m1 {
        return Err(Error::Config(format!(
            "covariate matrix has {} columns, expected {}",
            x.cols(),
            m0 + m1
        )));
    }
    if !beta.is_finite() {
        return Err(Error::Config("beta must be finite".into()));
    }
    let unit_gamma = Gamma::new(config.shape, 1.0)
        .map_err(|e| Error::Config(format!("gamma shape {}: {e}", config.shape)))?;
    let sqrt_a = config.shape.sqrt();
    let mut y = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mean = beta * row[m0..].iter().sum::<f64>();
        let eps = match config.errors {
            ErrorModel::Gamma => {
                let scale = row[m0].abs() / sqrt_a;
                if scale == 0.0 {
                    return Err(Error::Config(format!("zero error scale at row {i}")));
                }
                // scale · Gamma(a, 1) has rate sqrt(a/x²) and mean sqrt(a)|x|.
                scale * (unit_gamma.sample(rng) - config.shape)
            }
            ErrorModel::Normal { sd } => sd * rng.sample::<f64, _>(StandardNormal),
        };
        y.push(mean + eps);
    }
    Ok(y)
}

/// `n × (m₀ + m₁)` covariates for the configuration, nuisance columns first.
pub fn generate_covariates(config: &SimConfig, seed: u64) -> Result<Matrix<f64>> {
    generate_covariates_n(config, config.n, seed)
}

/// As [`generate_covariates`] with an explicit row count.
pub fn generate_covariates_n(config: &SimConfig, n: usize, seed: u64) -> Result<Matrix<f64>> {
    let factor = config.covariate_factor()?;
    Ok(sample_covariates(config, n, &factor, &mut substream(seed, 0)))
}

/// Outcomes for covariates `x` at coefficient `beta`.
pub fn generate_outcome(x: &Matrix<f64>, beta: f64, config: &SimConfig, seed: u64) -> Result<Vec<f64>> {
    sample_outcome(x, beta, config, &mut substream(seed, 1))
}

fn split_dataset(x: Matrix<f64>, y: Vec<f64>, m0: usize, m1: usize) -> Result<Dataset<f64>> {
    let nuisance = x.columns(0, m0);
    let target = x.columns(m0, m1);
    drop(x);
    Dataset::new(y, nuisance, target, vec![], vec![])
}

/// `sqrt(1ᵀ Σ_β⁻¹ 1)` estimated from one large draw at `β = 1`. Because the
/// errors do not depend on `β`, `S = β` times this value.
pub fn calibration_scale(config: &SimConfig) -> Result<f64> {
    let mut cal = config.clone();
    cal.s_target = 1.0;
    cal.validate()?;
    let seed = replicate_seed(config.base_seed, &config.calibration_id(), 0);
    let x = generate_covariates_n(config, config.calibration_n, seed)?;
    let y = generate_outcome(&x, 1.0, config, seed)?;
    let data = split_dataset(x, y, config.m0, config.m1)?;
    let model = fit_linear(&data)?;
    drop(data);
    let analysis = analyze(&model, None)?;
    let chol = analysis.covariance.sigma_beta.cholesky()?;
    let ones = vec![1.0; config.m1];
    let q = chol.quadratic_form_inv(&ones);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::CovarianceSingular("calibration covariance is degenerate".into()));
    }
    Ok(q.sqrt())
}

/// Coefficient giving population index `s_target`.
pub fn calibrate_beta(config: &SimConfig) -> Result<f64> {
    config.validate()?;
    if config.s_target == 0.0 {
        return Ok(0.0);
    }
    Ok(config.s_target / calibration_scale(config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub s_hat: Option<f64>,
    pub t_squared: Option<f64>,
    pub s_sq_untruncated: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub n_ok: usize,
    pub failures: usize,
    pub mean_s_hat: f64,
    /// `mean(Ŝ) − s_target`.
    pub bias: f64,
    /// Sample standard deviation of `Ŝ`.
    pub se: f64,
}

impl SimSummary {
    fn from_records(records: &[ReplicateRecord], s_target: f64) -> Self {
        let vals: Vec<f64> = records.iter().filter_map(|r| r.s_hat).collect();
        let k = vals.len();
        let mean = if k == 0 {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / k as f64
        };
        let se = if k < 2 {
            f64::NAN
        } else {
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64).sqrt()
        };
        SimSummary {
            n_ok: k,
            failures: records.len() - k,
            mean_s_hat: mean,
            bias: mean - s_target,
            se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub config_id: String,
    pub beta: f64,
    pub replicates: Vec<ReplicateRecord>,
    pub summary: SimSummary,
}

impl SimResult {
    /// Summary recomputed from the stored replicate values.
    pub fn recompute_summary(&self) -> SimSummary {
        SimSummary::from_records(&self.replicates, self.config.s_target)
    }

    pub fn s_hat_values(&self) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.s_hat).collect()
    }

    /// One row per replicate.
    pub fn replicates_csv(&self) -> String {
        let mut out = String::from("replicate,seed,s_hat,t_squared,s_sq_untruncated,status\n");
        for r in &self.replicates {
            let f = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => csv_quote(e),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.replicate,
                r.seed,
                f(r.s_hat),
                f(r.t_squared),
                f(r.s_sq_untruncated),
                status
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "config_id": self.config_id,
            "config": self.config,
            "extensions": self.config.extensions(),
            "beta": self.beta,
            "summary": self.summary,
            "metadata": {
                "fitted_model": "linear with intercept",
                "m": self.config.m(),
                "m_counts_intercept": true,
                "beta0": "zero",
                "gamma_errors_centered": "analytic mean sqrt(a)|x| subtracted",
                "error_scale_column": self.config.m0 + 1,
            }
        })
    }

    pub const SUMMARY_CSV_HEADER: &'static str =
        "config_id,n,s_target,rho_sq,m0,m1,shape,errors,n_replicates,base_seed,beta,n_ok,failures,mean_s_hat,bias,se";

    pub fn summary_csv_row(&self) -> String {
        let c = &self.config;
        let errors = match c.errors {
            ErrorModel::Gamma => "gamma".to_string(),
            ErrorModel::Normal { sd } => format!("normal({sd})"),
        };
        format!(
            "{},{},{:?},{:?},{},{},{:?},{},{},{},{:?},{},{},{:?},{:?},{:?}",
            self.config_id,
            c.n,
            c.s_target,
            c.rho_sq,
            c.m0,
            c.m1,
            c.shape,
            errors,
            c.n_replicates,
            c.base_seed,
            self.beta,
            self.summary.n_ok,
            self.summary.failures,
            self.summary.mean_s_hat,
            self.summary.bias,
            self.summary.se
        )
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn run_replicate(config: &SimConfig, id: &str, beta: f64, factor: &Cholesky<f64>, r: usize) -> ReplicateRecord {
    let seed = replicate_seed(config.base_seed, id, r);
    let outcome = (|| {
        let x = sample_covariates(config, config.n, factor, &mut substream(seed, 0));
        let y = sample_outcome(&x, beta, config, &mut substream(seed, 1))?;
        let data = split_dataset(x, y, config.m0, config.m1)?;
        analyze(&fit_linear(&data)?, None)
    })();
    match outcome {
        Ok(a) => ReplicateRecord {
            replicate: r,
            seed,
            s_hat: Some(a.estimate.s_hat),
            t_squared: Some(a.estimate.t_squared),
            s_sq_untruncated: Some(a.estimate.s_sq_untruncated),
            error: None,
        },
        Err(e) => ReplicateRecord {
            replicate: r,
            seed,
            s_hat: None,
            t_squared: None,
            s_sq_untruncated: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every replicate at a given `β` (skipping calibration).
pub fn run_with_beta(config: &SimConfig, beta: f64, threads: Option<usize>) -> Result<SimResult> {
    config.validate()?;
    let factor = config.covariate_factor()?;
    let id = config.config_id();
    let work = || -> Vec<ReplicateRecord> {
        (0..config.n_replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, &id, beta, &factor, r))
            .collect()
    };
    let replicates = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let summary = SimSummary::from_records(&replicates, config.s_target);
    Ok(SimResult {
        config: config.clone(),
        config_id: id,
        beta,
        replicates,
        summary,
    })
}

/// Calibrates `β` and runs the replicates on the global thread pool.
pub fn run_simulation(config: &SimConfig) -> Result<SimResult> {
    run_simulation_with_threads(config, None)
}

pub fn run_simulation_with_threads(config: &SimConfig, threads: Option<usize>) -> Result<SimResult> {
    let beta = calibrate_beta(config)?;
    run_with_beta(config, beta, threads)
}

/// Runs a list of configurations, calibrating each distinct design once.
pub fn run_grid(configs: &[SimConfig], threads: Option<usize>) -> Result<Vec<SimResult>> {
    let mut scales: Vec<(String, f64)> = Vec::new();
    let mut out = Vec::with_capacity(configs.len());
    for config in configs {
        config.validate()?;
        let beta = if config.s_target == 0.0 {
            0.0
        } else {
            let key = config.calibration_id();
            let scale = match scales.iter().find(|(k, _)| *k == key) {
                Some((_, s)) => *s,
                None => {
                    let s = calibration_scale(config)?;
                    scales.push((key, s));
                    s
                }
            };
            config.s_target / scale
        };
        out.push(run_with_beta(config, beta, threads)?);
    }
    Ok(out)
}

/// Cartesian product of the grid axes, in the order n, s, ρ², m₀, m₁, a.
pub fn expand_grid(
    ns: &[usize],
    s_targets: &[f64],
    rho_sqs: &[f64],
    m0s: &[usize],
    m1s: &[usize],
    shapes: &[f64],
    template: &SimConfig,
) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for &n in ns {
        for &s in s_targets {
            for &rho in rho_sqs {
                for &m0 in m0s {
                    for &m1 in m1s {
                        for &a in shapes {
                            let mut c = template.clone();
                            c.n = n;
                            c.s_target = s;
                            c.rho_sq = rho;
                            c.m0 = m0;
                            c.m1 = m1;
                            c.shape = a;
                            out.push(c);
                        }
                    }
                }
            }
        }
    }
    out
}
