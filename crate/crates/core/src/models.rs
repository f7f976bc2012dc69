//! Estimating-equation families and their per-observation derivatives.
//!
//! Every fit returns a [`FittedModel`] holding `θ̂ = (α̂, β̂)`, the `n × m`
//! matrix of per-observation scores `∂ψ(θ; Wᵢ)/∂θ` at `θ̂`, and the mean
//! negative Hessian. Parameters are ordered nuisance first, target last, so
//! the target block is always the trailing `m₁` coordinates.
//!
//! The linear and logistic families always carry an intercept, counted as
//! the first nuisance parameter.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Conditioning threshold on the reciprocal condition number of the design
/// Gram matrix (and of `Ĵ`).
pub const RCOND_MIN: f64 = 1e-12;

const LOGISTIC_MAX_ITER: usize = 100;
const LOGISTIC_SCORE_TOL: f64 = 1e-10;
const LOGISTIC_MAX_ETA: f64 = 30.0;
const LOGISTIC_MAX_HALVINGS: usize = 20;
const LOGISTIC_STEP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TwoMeans,
    Linear,
    Logistic,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::TwoMeans => "two_means",
            Family::Linear => "linear",
            Family::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_means" | "two-means" | "means" => Ok(Family::TwoMeans),
            "linear" => Ok(Family::Linear),
            "logistic" => Ok(Family::Logistic),
            other => Err(Error::domain(format!(
                "unknown model family `{other}` (expected two_means, linear or logistic)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar outcome with nuisance and target covariate blocks.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    y: Vec<T>,
    x_nuisance: Matrix<T>,
    x_target: Matrix<T>,
    nuisance_names: Vec<String>,
    target_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates shapes and finiteness. Column names default to
    /// `z1..` (nuisance) and `x1..` (target) when empty.
    pub fn new(
        y: Vec<T>,
        x_nuisance: Matrix<T>,
        x_target: Matrix<T>,
        nuisance_names: Vec<String>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if x_nuisance.rows() != n || x_target.rows() != n {
            return Err(Error::InvalidData(format!(
                "row count mismatch: y has {n}, nuisance {}, target {}",
                x_nuisance.rows(),
                x_target.rows()
            )));
        }
        if x_target.cols() == 0 {
            return Err(Error::InvalidData("at least one target column is required".into()));
        }
        let m = x_nuisance.cols() + x_target.cols();
        if n <= m {
            return Err(Error::InsufficientSample { n, m });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite outcome at row {i}")));
        }
        if !x_nuisance.is_finite() || !x_target.is_finite() {
            return Err(Error::InvalidData("non-finite covariate value".into()));
        }
        let nuisance_names = default_names(nuisance_names, x_nuisance.cols(), "z")?;
        let target_names = default_names(target_names, x_target.cols(), "x")?;
        Ok(Dataset {
            y,
            x_nuisance,
            x_target,
            nuisance_names,
            target_names,
        })
    }

    /// Dataset with a single target column and no nuisance covariates.
    pub fn simple(y: Vec<T>, x: Vec<T>) -> Result<Self> {
        let n = x.len();
        Self::new(
            y,
            Matrix::zeros(n, 0),
            Matrix::column_vector(&x),
            vec![],
            vec![],
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn y(&self) -> &[T] {
        &self.y
    }
    pub fn x_nuisance(&self) -> &Matrix<T> {
        &self.x_nuisance
    }
    pub fn x_target(&self) -> &Matrix<T> {
        &self.x_target
    }
    pub fn nuisance_names(&self) -> &[String] {
        &self.nuisance_names
    }
    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    /// `[1 | X₀ | X₁]`.
    fn design_with_intercept(&self) -> Matrix<T> {
        let m0 = self.x_nuisance.cols();
        let m1 = self.x_target.cols();
        Matrix::from_fn(self.n(), 1 + m0 + m1, |i, j| {
            if j == 0 {
                T::one()
            } else if j <= m0 {
                self.x_nuisance[(i, j - 1)]
            } else {
                self.x_target[(i, j - 1 - m0)]
            }
        })
    }

    fn names_with_intercept(&self) -> Vec<String> {
        std::iter::once("(intercept)".to_string())
            .chain(self.nuisance_names.iter().cloned())
            .chain(self.target_names.iter().cloned())
            .collect()
    }

    fn outcome_variance(&self) -> T {
        let n = T::from_usize_lossy(self.n());
        let mean = self.y.iter().copied().sum::<T>() / n;
        self.y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n
    }
}

fn default_names(names: Vec<String>, k: usize, prefix: &str) -> Result<Vec<String>> {
    if names.is_empty() {
        return Ok((1..=k).map(|i| format!("{prefix}{i}")).collect());
    }
    if names.len() != k {
        return Err(Error::InvalidData(format!(
            "{} column names given for {k} columns",
            names.len()
        )));
    }
    Ok(names)
}

/// An M-estimator evaluated at its solution.
#[derive(Debug, Clone)]
pub struct FittedModel<T> {
    pub family: Family,
    /// `(α̂, β̂)`, nuisance block first.
    pub theta_hat: Vec<T>,
    /// Row `i` is `∂ψ(θ; Wᵢ)/∂θ` at `θ̂`.
    pub score_contrib: Matrix<T>,
    /// `n⁻¹ Σᵢ −∂²ψ(θ; Wᵢ)/∂θ∂θᵀ` at `θ̂`.
    pub hessian_contrib: Matrix<T>,
    pub n: usize,
    pub m0: usize,
    pub m1: usize,
    /// `(π₁, π₀)` used by the two-means family.
    pub pi: Option<(T, T)>,
    pub param_names: Vec<String>,
    /// Population variance of the outcome, the reference scale for
    /// detecting a numerically null score matrix.
    pub outcome_var: T,
    /// Factor turning `Ĵ⁻¹` into the model-based covariance: the mean
    /// squared residual (linear), 1 (logistic), or the pooled within-group
    /// variance times `π₁⁻¹ + π₀⁻¹` (two-means).
    pub dispersion: T,
    pub iterations: usize,
}

impl<T: Scalar> FittedModel<T> {
    pub fn m(&self) -> usize {
        self.m0 + self.m1
    }

    pub fn beta_hat(&self) -> &[T] {
        &self.theta_hat[self.m0..]
    }

    pub fn alpha_hat(&self) -> &[T] {
        &self.theta_hat[..self.m0]
    }

    pub fn target_names(&self) -> &[String] {
        &self.param_names[self.m0..]
    }

    pub fn mean_score(&self) -> Vec<T> {
        self.score_contrib.column_means()
    }
}

/// Difference in means of a binary target group indicator.
///
/// With `pi1_known = None` the group proportions are the empirical
/// `n_x / n` and `θ̂ = μ̂₁ − μ̂₀` exactly. With a known `π₁`,
/// `θ̂ = (n₁/n) μ̂₁/π₁ − (n₀/n) μ̂₀/π₀`.
///
/// Score rows are the group-centered contributions
/// `(2Xᵢ − 1) π_{Xᵢ}⁻¹ (Yᵢ − μ̂_{Xᵢ})`, whose mean outer product is the
/// meat `n⁻¹ Σ π_{Xᵢ}⁻² (Yᵢ − μ̂_{Xᵢ})²` of a correctly specified mean model.
/// `Ĵ = 1`.
pub fn fit_two_means<T: Scalar>(data: &Dataset<T>, pi1_known: Option<T>) -> Result<FittedModel<T>> {
    if data.x_nuisance.cols() != 0 || data.x_target.cols() != 1 {
        return Err(Error::InvalidData(
            "two-means needs exactly one binary target column and no nuisance columns".into(),
        ));
    }
    let n = data.n();
    let x = data.x_target.column(0);
    let mut counts = [0usize; 2];
    let mut sums = [T::zero(); 2];
    for (i, (&xi, &yi)) in x.iter().zip(&data.y).enumerate() {
        let g = group_of(xi).ok_or_else(|| {
            Error::InvalidData(format!("two-means group indicator must be 0 or 1 (row {i})"))
        })?;
        counts[g] += 1;
        sums[g] += yi;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::DegenerateDesign(format!(
            "two-means needs both groups present (n0 = {}, n1 = {})",
            counts[0], counts[1]
        )));
    }
    let nf = T::from_usize_lossy(n);
    let n0 = T::from_usize_lossy(counts[0]);
    let n1 = T::from_usize_lossy(counts[1]);
    let mu = [sums[0] / n0, sums[1] / n1];

    let (pi1, pi0, theta) = match pi1_known {
        None => (n1 / nf, n0 / nf, mu[1] - mu[0]),
        Some(p) => {
            if !(p > T::zero() && p < T::one()) {
                return Err(Error::domain(format!("pi1 must lie in (0, 1), got {p}")));
            }
            let q = T::one() - p;
            (p, q, (n1 / nf) * mu[1] / p - (n0 / nf) * mu[0] / q)
        }
    };

    let mut score = Matrix::zeros(n, 1);
    for (i, (&xi, &yi)) in x.iter().zip(&data.y).enumerate() {
        let g = group_of(xi).expect("validated above");
        score[(i, 0)] = if g == 1 {
            (yi - mu[1]) / pi1
        } else {
            -(yi - mu[0]) / pi0
        };
    }
    let pooled = x
        .iter()
        .zip(&data.y)
        .map(|(&xi, &yi)| {
            let d = yi - mu[group_of(xi).expect("validated above")];
            d * d
        })
        .sum::<T>()
        / nf;

    Ok(FittedModel {
        family: Family::TwoMeans,
        theta_hat: vec![theta],
        score_contrib: score,
        hessian_contrib: Matrix::identity(1),
        n,
        m0: 0,
        m1: 1,
        pi: Some((pi1, pi0)),
        param_names: data.target_names.clone(),
        outcome_var: data.outcome_variance(),
        dispersion: pooled * (T::one() / pi1 + T::one() / pi0),
        iterations: 0,
    })
}

fn group_of<T: Scalar>(x: T) -> Option<usize> {
    if x == T::zero() {
        Some(0)
    } else if x == T::one() {
        Some(1)
    } else {
        None
    }
}

/// Least squares on `[1 | X₀ | X₁]`, i.e. the maximizer of
/// `−n⁻¹ Σ (Yᵢ − Xᵢθ)²/2`.
pub fn fit_linear<T: Scalar>(data: &Dataset<T>) -> Result<FittedModel<T>> {
    let x = data.design_with_intercept();
    let (n, p) = (x.rows(), x.cols());
    if n <= p {
        return Err(Error::InsufficientSample { n, m: p });
    }
    let gram = x.weighted_gram(None);
    let chol = checked_gram_cholesky(&gram)?;

    let nf = T::from_usize_lossy(n);
    let mut xty = vec![T::zero(); p];
    for i in 0..n {
        let yi = data.y[i];
        for (acc, &xij) in xty.iter_mut().zip(x.row(i)) {
            *acc += xij * yi;
        }
    }
    for v in xty.iter_mut() {
        *v /= nf;
    }
    let mut theta = chol.solve_vec(&xty);

    // One step of iterative refinement against the residual normal equations.
    let mut resid = residuals(&x, &data.y, &theta);
    let correction = chol.solve_vec(&mean_weighted_rows(&x, &resid));
    for (t, c) in theta.iter_mut().zip(&correction) {
        *t += *c;
    }
    resid = residuals(&x, &data.y, &theta);

    let score = Matrix::from_fn(n, p, |i, j| resid[i] * x[(i, j)]);
    Ok(FittedModel {
        family: Family::Linear,
        theta_hat: theta,
        score_contrib: score,
        hessian_contrib: gram,
        n,
        m0: 1 + data.x_nuisance.cols(),
        m1: data.x_target.cols(),
        pi: None,
        param_names: data.names_with_intercept(),
        outcome_var: data.outcome_variance(),
        dispersion: resid.iter().map(|&r| r * r).sum::<T>() / nf,
        iterations: 1,
    })
}

fn residuals<T: Scalar>(x: &Matrix<T>, y: &[T], theta: &[T]) -> Vec<T> {
    (0..x.rows())
        .map(|i| {
            let fit: T = x.row(i).iter().zip(theta).map(|(&a, &b)| a * b).sum();
            y[i] - fit
        })
        .collect()
}

/// `n⁻¹ Σ wᵢ xᵢ`.
fn mean_weighted_rows<T: Scalar>(x: &Matrix<T>, w: &[T]) -> Vec<T> {
    let p = x.cols();
    let mut out = vec![T::zero(); p];
    for i in 0..x.rows() {
        for (o, &xij) in out.iter_mut().zip(x.row(i)) {
            *o += w[i] * xij;
        }
    }
    let nf = T::from_usize_lossy(x.rows());
    out.into_iter().map(|v| v / nf).collect()
}

fn checked_gram_cholesky<T: Scalar>(gram: &Matrix<T>) -> Result<crate::linalg::Cholesky<T>> {
    let rcond = gram.symmetric_rcond();
    if rcond < T::tol(RCOND_MIN) {
        return Err(Error::SingularDesign {
            rcond: rcond.to_f64_lossy(),
        });
    }
    gram.cholesky().map_err(|_| Error::SingularDesign {
        rcond: rcond.to_f64_lossy(),
    })
}

fn expit<T: Scalar>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

/// Mean Bernoulli log-likelihood; `ln(1 + e^η)` evaluated stably.
fn logistic_loglik<T: Scalar>(x: &Matrix<T>, y: &[T], theta: &[T]) -> T {
    let n = T::from_usize_lossy(x.rows());
    (0..x.rows())
        .map(|i| {
            let eta: T = x.row(i).iter().zip(theta).map(|(&a, &b)| a * b).sum();
            let softplus = if eta > T::zero() {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            y[i] * eta - softplus
        })
        .sum::<T>()
        / n
}

/// Bernoulli maximum likelihood with logit link, fitted by damped Newton
/// iterations from `α = logit(ȳ)`, `β = 0`.
pub fn fit_logistic<T: Scalar>(data: &Dataset<T>) -> Result<FittedModel<T>> {
    if let Some(i) = data.y.iter().position(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::InvalidData(format!(
            "logistic outcome must be 0 or 1 (row {i})"
        )));
    }
    let x = data.design_with_intercept();
    let (n, p) = (x.rows(), x.cols());
    if n <= p {
        return Err(Error::InsufficientSample { n, m: p });
    }
    checked_gram_cholesky(&x.weighted_gram(None))?;
    let y = &data.y;

    let nf = T::from_usize_lossy(n);
    let ybar = y.iter().copied().sum::<T>() / nf;
    if ybar == T::zero() || ybar == T::one() {
        return Err(Error::Separation("outcome is constant".into()));
    }
    let mut theta = vec![T::zero(); p];
    theta[0] = (ybar / (T::one() - ybar)).ln();

    let max_eta = T::lit(LOGISTIC_MAX_ETA);
    let tol = T::tol(LOGISTIC_SCORE_TOL);
    let mut loglik = logistic_loglik(&x, y, &theta);
    let mut iterations = 0;
    loop {
        let (eta, prob) = linear_predictor(&x, &theta);
        if let Some(i) = eta.iter().position(|e| e.abs() > max_eta) {
            return Err(Error::Separation(format!(
                "|linear predictor| exceeded {LOGISTIC_MAX_ETA} at row {i}; data appear separated"
            )));
        }
        let resid: Vec<T> = y.iter().zip(&prob).map(|(&yi, &pi)| yi - pi).collect();
        let score = mean_weighted_rows(&x, &resid);
        let max_score = score.iter().fold(T::zero(), |m, s| m.max(s.abs()));
        let weights: Vec<T> = prob.iter().map(|&pi| pi * (T::one() - pi)).collect();
        let info = x.weighted_gram(Some(&weights));
        let step = info
            .cholesky()
            .map_err(|_| Error::Separation("information matrix lost positive definiteness".into()))?
            .solve_vec(&score);
        // Under separation the score vanishes while Newton steps stay of
        // order one, so a small score alone is not enough.
        let max_step = step
            .iter()
            .zip(&theta)
            .fold(T::zero(), |m, (s, t)| m.max(s.abs() / (T::one() + t.abs())));
        if max_score < tol && max_step < T::tol(LOGISTIC_STEP_TOL) {
            break;
        }
        if iterations >= LOGISTIC_MAX_ITER {
            return Err(Error::NonConvergence {
                iterations,
                max_score: max_score.to_f64_lossy(),
            });
        }
        iterations += 1;


        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..=LOGISTIC_MAX_HALVINGS {
            let trial: Vec<T> = theta.iter().zip(&step).map(|(&t, &s)| t + scale * s).collect();
            let ll = logistic_loglik(&x, y, &trial);
            if ll >= loglik {
                theta = trial;
                loglik = ll;
                accepted = true;
                break;
            }
            scale = scale * T::lit(0.5);
        }
        if !accepted {
            // The step cannot improve the likelihood any further; accept the
            // current point if the score is already negligible at working
            // precision, otherwise report it.
            let small = T::tol(1e-7);
            if max_score < small {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                max_score: max_score.to_f64_lossy(),
            });
        }
    }

    let (_, prob) = linear_predictor(&x, &theta);
    let score = Matrix::from_fn(n, p, |i, j| (y[i] - prob[i]) * x[(i, j)]);
    let weights: Vec<T> = prob.iter().map(|&pi| pi * (T::one() - pi)).collect();
    let hessian = x.weighted_gram(Some(&weights));
    Ok(FittedModel {
        family: Family::Logistic,
        theta_hat: theta,
        score_contrib: score,
        hessian_contrib: hessian,
        n,
        m0: 1 + data.x_nuisance.cols(),
        m1: data.x_target.cols(),
        pi: None,
        param_names: data.names_with_intercept(),
        outcome_var: data.outcome_variance(),
        dispersion: T::one(),
        iterations,
    })
}

fn linear_predictor<T: Scalar>(x: &Matrix<T>, theta: &[T]) -> (Vec<T>, Vec<T>) {
    let eta: Vec<T> = (0..x.rows())
        .map(|i| x.row(i).iter().zip(theta).map(|(&a, &b)| a * b).sum())
        .collect();
    let prob = eta.iter().map(|&e| expit(e)).collect();
    (eta, prob)
}

/// Dispatches on `family`; `pi1_known` only applies to two-means.
pub fn fit<T: Scalar>(family: Family, data: &Dataset<T>, pi1_known: Option<T>) -> Result<FittedModel<T>> {
    match family {
        Family::TwoMeans => fit_two_means(data, pi1_known),
        Family::Linear => fit_linear(data),
        Family::Logistic => fit_logistic(data),
    }
}
