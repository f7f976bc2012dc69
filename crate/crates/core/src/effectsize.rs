//! The robust index `S` and its estimator.
//!
//! `S² = (β − β₀)ᵀ Σ_β⁻¹ (β − β₀)`, estimated by
//! `Ŝ = sqrt(max(0, (T² − m)/(n − m)))` where `m` counts all parameters.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::FittedModel;
use crate::sandwich::{sandwich_covariance, wald_statistic, SandwichCovariance, WaldResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSizeEstimate<T> {
    pub s_hat: T,
    /// `(T² − m)/(n − m)`, possibly negative.
    pub s_sq_untruncated: T,
    pub t_squared: T,
    pub n: usize,
    pub m: usize,
    pub m1: usize,
    /// Set when `T² < m`, i.e. the `max(0, ·)` binds.
    pub truncated: bool,
}

pub fn estimate_effect_size<T: Scalar>(
    t_squared: T,
    n: usize,
    m: usize,
    m1: usize,
) -> Result<EffectSizeEstimate<T>> {
    if m1 == 0 || m < m1 {
        return Err(Error::domain(format!("need m >= m1 >= 1, got m = {m}, m1 = {m1}")));
    }
    if n <= m {
        return Err(Error::InsufficientSample { n, m });
    }
    if t_squared.is_nan() || t_squared < T::zero() {
        return Err(Error::domain(format!("T^2 must be >= 0, got {t_squared}")));
    }
    let mf = T::from_usize_lossy(m);
    let s_sq = (t_squared - mf) / T::from_usize_lossy(n - m);
    Ok(EffectSizeEstimate {
        s_hat: s_sq.max(T::zero()).sqrt(),
        s_sq_untruncated: s_sq,
        t_squared,
        n,
        m,
        m1,
        truncated: t_squared < mf,
    })
}

/// Everything computed from one fitted model.
#[derive(Debug, Clone)]
pub struct RobustAnalysis<T> {
    pub covariance: SandwichCovariance<T>,
    pub wald: WaldResult<T>,
    pub estimate: EffectSizeEstimate<T>,
}

/// Sandwich covariance, Wald statistic against `beta0` (zero when `None`)
/// and `Ŝ` for a fitted model.
pub fn analyze<T: Scalar>(model: &FittedModel<T>, beta0: Option<&[T]>) -> Result<RobustAnalysis<T>> {
    let covariance = sandwich_covariance(model)?;
    let zeros = vec![T::zero(); model.m1];
    let wald = wald_statistic(model, &covariance, beta0.unwrap_or(&zeros))?;
    let estimate = estimate_effect_size(wald.t_squared, model.n, model.m(), model.m1)?;
    Ok(RobustAnalysis {
        covariance,
        wald,
        estimate,
    })
}

/// `S` for a difference of two means with group variances `var1`, `var0`
/// and group-1 proportion `pi1`.
pub fn closed_form_two_means<T: Scalar>(mu1: T, mu0: T, var1: T, var0: T, pi1: T) -> Result<T> {
    if !(pi1 > T::zero() && pi1 < T::one()) {
        return Err(Error::domain(format!("pi1 must lie in (0, 1), got {pi1}")));
    }
    if !(var1 > T::zero() && var0 > T::zero()) {
        return Err(Error::domain("group variances must be positive"));
    }
    let pi0 = T::one() - pi1;
    let diff = mu1 - mu0;
    Ok((diff * diff / (var1 / pi1 + var0 / pi0)).sqrt())
}

/// `S = sqrt(σ_x⁴ β² / σ²_xy)` for simple linear regression, where
/// `σ²_xy = E[(X − μ_x)² ε²]`.
pub fn closed_form_slr<T: Scalar>(beta: T, sigma_x_sq: T, sigma_xy_sq: T) -> Result<T> {
    if !(sigma_x_sq > T::zero() && sigma_xy_sq > T::zero()) {
        return Err(Error::domain("variance inputs must be positive"));
    }
    Ok((sigma_x_sq * sigma_x_sq * beta * beta / sigma_xy_sq).sqrt())
}

/// `S = sqrt(βᵀ I_β β)` for a correctly specified logistic model, with
/// `I_β` the information for `β` after adjusting for the nuisance block.
pub fn logistic_model_based_s<T: Scalar>(beta: &[T], i_beta: &Matrix<T>) -> Result<T> {
    if i_beta.rows() != beta.len() || i_beta.cols() != beta.len() {
        return Err(Error::domain("information matrix shape does not match beta"));
    }
    if i_beta.asymmetry() > T::tol(1e-10) {
        return Err(Error::domain("information matrix is not symmetric"));
    }
    i_beta
        .cholesky()
        .map_err(|_| Error::domain("information matrix is not positive definite"))?;
    let ib = i_beta.matvec(beta)?;
    let q: T = beta.iter().zip(&ib).map(|(&a, &b)| a * b).sum();
    Ok(q.max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_boundaries() {
        let e = estimate_effect_size(3.0, 50, 3, 1).unwrap();
        assert_eq!(e.s_hat, 0.0);
        assert!(!e.truncated);
        let e = estimate_effect_size(0.0, 50, 3, 1).unwrap();
        assert_eq!(e.s_hat, 0.0);
        assert!(e.truncated);
        assert!(f64::abs(e.s_sq_untruncated + 3.0 / 47.0) < 1e-15);
    }

    #[test]
    fn estimator_inversion() {
        let e = estimate_effect_size(8.125, 100, 2, 1).unwrap();
        assert!(f64::abs(e.s_hat - 0.25) < 1e-15);
    }

    #[test]
    fn estimator_errors() {
        assert!(matches!(
            estimate_effect_size(1.0, 3, 3, 1),
            Err(Error::InsufficientSample { .. })
        ));
        assert!(estimate_effect_size(-1.0, 30, 3, 1).is_err());
        assert!(estimate_effect_size(1.0, 30, 1, 2).is_err());
        assert!(estimate_effect_size(1.0, 30, 1, 0).is_err());
    }

    #[test]
    fn two_means_closed_form() {
        assert_eq!(closed_form_two_means(1.0, 1.0, 1.0, 2.0, 0.3).unwrap(), 0.0);
        assert!(f64::abs(closed_form_two_means(1.0, 0.0, 1.0, 1.0, 0.5).unwrap() - 0.5) < 1e-15);
        assert!(f64::abs(closed_form_two_means(0.2, 0.0, 1.0, 1.0, 0.5).unwrap() - 0.1) < 1e-15);
        assert!(closed_form_two_means(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(closed_form_two_means(1.0, 0.0, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn slr_closed_form() {
        assert_eq!(closed_form_slr(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(f64::abs(closed_form_slr(0.3, 1.0, 1.0).unwrap() - 0.3) < 1e-15);
        // Homoskedastic: σ²_xy = σ_x² σ² = 4.
        assert!(f64::abs(closed_form_slr(1.0, 1.0, 4.0).unwrap() - 0.5) < 1e-15);
    }

    #[test]
    fn logistic_closed_form() {
        let id = Matrix::identity(1);
        assert_eq!(logistic_model_based_s(&[0.0], &id).unwrap(), 0.0);
        assert!(f64::abs(logistic_model_based_s(&[0.3], &id).unwrap() - 0.3) < 1e-15);
        let ib = Matrix::from_rows(&[vec![0.25, 0.0], vec![0.0, 0.25]]).unwrap();
        let s = logistic_model_based_s(&[1.0, 1.0], &ib).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(logistic_model_based_s(&[1.0, 1.0], &bad).is_err());
    }
}
