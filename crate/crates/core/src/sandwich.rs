//! Sandwich covariance `Ĵ⁻¹K̂Ĵ⁻¹` and the robust Wald statistic.
//!
//! Normalization: `ψ` is per observation, `Ĵ` and `K̂` are means over
//! observations, so both are O(1) and `Var(θ̂) ≈ Σ̂_θ / n`. The Wald
//! statistic therefore carries an explicit factor `n`:
//! `T² = n (β̂ − β₀)ᵀ Σ̂_β⁻¹ (β̂ − β₀)`. No small-sample (HC1–HC3)
//! correction is applied.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::{FittedModel, RCOND_MIN};
use crate::scalar::Scalar;

/// Relative size below which the meat is treated as numerically null:
/// `tr(K̂)/tr(Ĵ) ≤ (NULL_MEAT_RATIO)² · Var(Y)` means the scores vanish at
/// rounding level (e.g. an exact fit).
const NULL_MEAT_RATIO: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SandwichCovariance<T> {
    /// Mean negative Hessian (bread).
    pub j_hat: Matrix<T>,
    /// Mean outer product of the per-observation scores (meat).
    pub k_hat: Matrix<T>,
    pub sigma_theta: Matrix<T>,
    /// Trailing `m₁ × m₁` block of `sigma_theta`.
    pub sigma_beta: Matrix<T>,
    /// Trailing `m₁ × m₁` block of `Ĵ⁻¹`, times the model's dispersion.
    pub model_based_beta_cov: Matrix<T>,
    pub m0: usize,
    pub m1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldResult<T> {
    pub t_squared: T,
    pub df: usize,
    pub beta0: Vec<T>,
}

/// Assembles `Ĵ`, `K̂` and `Σ̂_θ = Ĵ⁻¹K̂Ĵ⁻¹` for a fitted model.
pub fn sandwich_covariance<T: Scalar>(model: &FittedModel<T>) -> Result<SandwichCovariance<T>> {
    let m = model.m();
    let (m0, m1) = (model.m0, model.m1);
    if model.theta_hat.len() != m || model.score_contrib.cols() != m {
        return Err(Error::domain("fitted model dimensions are inconsistent"));
    }
    let mut j_hat = model.hessian_contrib.clone();
    j_hat.symmetrize();
    let k_hat = model.score_contrib.weighted_gram(None);

    let rcond = j_hat.symmetric_rcond();
    if rcond < T::tol(RCOND_MIN) {
        return Err(Error::CovarianceSingular(format!(
            "bread matrix J has reciprocal condition number {:.3e}",
            rcond.to_f64_lossy()
        )));
    }
    let j_chol = j_hat
        .cholesky()
        .map_err(|_| Error::CovarianceSingular("bread matrix J is not positive definite".into()))?;

    let k_trace = k_hat.trace();
    let scale = T::lit(NULL_MEAT_RATIO);
    if !(k_trace > T::zero())
        || k_trace <= scale * scale * model.outcome_var * j_hat.trace()
    {
        return Err(Error::CovarianceSingular(
            "score contributions are numerically zero (degenerate or exact fit)".into(),
        ));
    }

    // Σ = J⁻¹ (J⁻¹ K)ᵀ, using symmetry of J and K.
    let left = j_chol.solve_mat(&k_hat);
    let mut sigma_theta = j_chol.solve_mat(&left.transpose()).transpose();
    sigma_theta.symmetrize();

    let sigma_beta = sigma_theta.block(m0, m0, m1, m1);
    let model_based_beta_cov = j_chol.inverse().block(m0, m0, m1, m1).scale(model.dispersion);

    let beta_rcond = sigma_beta.symmetric_rcond();
    if beta_rcond < T::tol(RCOND_MIN) {
        return Err(Error::CovarianceSingular(format!(
            "target covariance block has reciprocal condition number {:.3e}",
            beta_rcond.to_f64_lossy()
        )));
    }

    Ok(SandwichCovariance {
        j_hat,
        k_hat,
        sigma_theta,
        sigma_beta,
        model_based_beta_cov,
        m0,
        m1,
    })
}

/// `T² = n (β̂ − β₀)ᵀ Σ̂_β⁻¹ (β̂ − β₀)` on `m₁` degrees of freedom.
pub fn wald_statistic<T: Scalar>(
    model: &FittedModel<T>,
    cov: &SandwichCovariance<T>,
    beta0: &[T],
) -> Result<WaldResult<T>> {
    let m1 = model.m1;
    if beta0.len() != m1 {
        return Err(Error::domain(format!(
            "beta0 has length {}, expected {m1}",
            beta0.len()
        )));
    }
    if beta0.iter().any(|b| !b.is_finite()) {
        return Err(Error::domain("beta0 must be finite"));
    }
    let chol = cov
        .sigma_beta
        .cholesky()
        .map_err(|_| Error::CovarianceSingular("target covariance block is singular".into()))?;
    let diff: Vec<T> = model
        .beta_hat()
        .iter()
        .zip(beta0)
        .map(|(&b, &b0)| b - b0)
        .collect();
    let t_squared = if diff.iter().all(|d| *d == T::zero()) {
        T::zero()
    } else {
        T::from_usize_lossy(model.n) * chol.quadratic_form_inv(&diff)
    };
    Ok(WaldResult {
        t_squared,
        df: m1,
        beta0: beta0.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_linear, fit_two_means, Dataset};

    #[test]
    fn two_means_hand_values() {
        let d = Dataset::simple(vec![0.0, 2.0, 4.0, 6.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = fit_two_means(&d, None).unwrap();
        let cov = sandwich_covariance(&m).unwrap();
        assert!(f64::abs(cov.sigma_theta[(0, 0)] - 4.0) < 1e-14);
        assert_eq!(cov.j_hat[(0, 0)], 1.0);
        let w = wald_statistic(&m, &cov, &[0.0]).unwrap();
        assert!(f64::abs(w.t_squared - 16.0) < 1e-13);
        assert_eq!(w.df, 1);
    }

    #[test]
    fn two_means_zero_within_variance() {
        let d = Dataset::simple(vec![1.0, 1.0, 3.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = fit_two_means(&d, None).unwrap();
        assert!(matches!(sandwich_covariance(&m), Err(Error::CovarianceSingular(_))));
    }

    #[test]
    fn exact_linear_fit_is_singular() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let m = fit_linear(&Dataset::simple(y, x).unwrap()).unwrap();
        assert!(matches!(sandwich_covariance(&m), Err(Error::CovarianceSingular(_))));
    }

    #[test]
    fn balanced_equal_residuals_match_model_based() {
        // x = ±1 balanced, residuals ±1 with |r| constant: K = J, so the
        // sandwich collapses to J⁻¹ (and here Var(r) = 1).
        let x = vec![-1.0, -1.0, 1.0, 1.0];
        let y = vec![-1.0, 1.0, 1.0, 3.0];
        let m = fit_linear(&Dataset::simple(y, x).unwrap()).unwrap();
        let cov = sandwich_covariance(&m).unwrap();
        let diff = cov.sigma_beta.sub(&cov.model_based_beta_cov).unwrap().max_abs();
        assert!(diff < 1e-10, "{diff}");
        assert!(f64::abs(cov.sigma_beta[(0, 0)] - 1.0) < 1e-12);
    }

    #[test]
    fn wald_zero_at_estimate() {
        let d = Dataset::simple(vec![0.0, 2.0, 4.0, 7.0, 1.0], vec![0.0, 1.0, 2.0, 3.0, 1.5]).unwrap();
        let m = fit_linear(&d).unwrap();
        let cov = sandwich_covariance(&m).unwrap();
        let b = m.beta_hat().to_vec();
        assert_eq!(wald_statistic(&m, &cov, &b).unwrap().t_squared, 0.0);
        assert!(wald_statistic(&m, &cov, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn wald_scale_invariance() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 1.5, 0.7, 2.2];
        let y = vec![0.1, 2.0, 4.5, 7.0, 1.0, 1.1, 3.9];
        let base = {
            let m = fit_linear(&Dataset::simple(y.clone(), x.clone()).unwrap()).unwrap();
            let cov = sandwich_covariance(&m).unwrap();
            wald_statistic(&m, &cov, &[0.0]).unwrap().t_squared
        };
        for &c in &[0.001, 3.0, 1e4] {
            let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
            let m = fit_linear(&Dataset::simple(yc, x.clone()).unwrap()).unwrap();
            let cov = sandwich_covariance(&m).unwrap();
            let t = wald_statistic(&m, &cov, &[0.0]).unwrap().t_squared;
            assert!(((t - base) / base).abs() < 1e-8);
        }
    }
}
