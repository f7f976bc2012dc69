//! Conversions between the robust index and classical effect sizes, the
//! conventional thresholds on the `S` scale, and the asymptotic bias of
//! classical estimators under heteroskedasticity.
//!
//! All conversions hold under homoskedasticity. With `c = π₁⁻¹ + π₀⁻¹`:
//!
//! | from \ to | `|d|`            | `f²`            | `R²`               | `S`               |
//! |-----------|------------------|-----------------|--------------------|-------------------|
//! | `d`       | `|d|`            | `d²/c`          | `d²/(c + d²)`      | `|d|/√c`          |
//! | `f²`      | `√c · √f²`       | `f²`            | `f²/(1 + f²)`      | `√f²`             |
//! | `R²`      | `√c · √(R²/(1−R²))` | `R²/(1−R²)`  | `R²`               | `√(R²/(1−R²))`    |
//! | `S`       | `√c · S`         | `S²`            | `S²/(1 + S²)`      | `S`               |
//!
//! The `R²` denominators refer to the whole model. They coincide with the
//! partial value when there is a single target variable, which is the
//! default; pass [`ConversionContext::r2_whole`] to use a separate whole-model
//! `R²`, in which case `R²_β = S² (1 − R²)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    D,
    F2,
    R2,
    S,
}

impl IndexKind {
    pub const ALL: [IndexKind; 4] = [IndexKind::D, IndexKind::F2, IndexKind::R2, IndexKind::S];

    pub fn as_str(&self) -> &'static str {
        match self {
            IndexKind::D => "d",
            IndexKind::F2 => "f2",
            IndexKind::R2 => "r2",
            IndexKind::S => "s",
        }
    }
}

impl std::str::FromStr for IndexKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(IndexKind::D),
            "f2" => Ok(IndexKind::F2),
            "r2" => Ok(IndexKind::R2),
            "s" => Ok(IndexKind::S),
            other => Err(Error::domain(format!(
                "unknown index `{other}` (expected d, f2, r2 or s)"
            ))),
        }
    }
}

impl std::fmt::Display for IndexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConversionContext<T> {
    /// Group-1 proportion; required whenever `d` is involved.
    pub pi1: Option<T>,
    /// Whole-model `R²` when it differs from the partial `R²_β`.
    pub r2_whole: Option<T>,
}

impl<T: Scalar> ConversionContext<T> {
    pub fn with_pi1(pi1: T) -> Self {
        ConversionContext {
            pi1: Some(pi1),
            r2_whole: None,
        }
    }

    /// `π₁⁻¹ + π₀⁻¹`.
    fn group_factor(&self) -> Result<T> {
        let p = self
            .pi1
            .ok_or_else(|| Error::domain("conversions involving d need pi1"))?;
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::domain(format!("pi1 must lie in (0, 1), got {p}")));
        }
        Ok(T::one() / p + T::one() / (T::one() - p))
    }

    fn whole_model_r2(&self) -> Result<Option<T>> {
        match self.r2_whole {
            None => Ok(None),
            Some(r) if r >= T::zero() && r < T::one() => Ok(Some(r)),
            Some(r) if r == T::one() => Err(Error::InfiniteEffect),
            Some(r) => Err(Error::domain(format!("whole-model R^2 must lie in [0, 1), got {r}"))),
        }
    }
}

fn validate<T: Scalar>(value: T, kind: IndexKind) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::domain(format!("{kind} must be finite")));
    }
    match kind {
        IndexKind::D => Ok(()),
        IndexKind::F2 | IndexKind::S if value < T::zero() => {
            Err(Error::domain(format!("{kind} must be >= 0, got {value}")))
        }
        IndexKind::R2 if value == T::one() => Err(Error::InfiniteEffect),
        IndexKind::R2 if !(value >= T::zero() && value < T::one()) => {
            Err(Error::domain(format!("r2 must lie in [0, 1), got {value}")))
        }
        _ => Ok(()),
    }
}

/// Converts `value` of kind `from` to kind `to`.
pub fn convert<T: Scalar>(value: T, from: IndexKind, to: IndexKind, ctx: &ConversionContext<T>) -> Result<T> {
    use IndexKind::*;
    validate(value, from)?;
    let r2w = ctx.whole_model_r2()?;
    let one = T::one();
    // Without a whole-model R², the partial value fills the denominators.
    let out = match (from, to) {
        (D, D) => value.abs(),
        (F2, F2) | (R2, R2) | (S, S) => value,

        (D, F2) => value * value / ctx.group_factor()?,
        (D, S) => value.abs() / ctx.group_factor()?.sqrt(),
        (D, R2) => {
            let c = ctx.group_factor()?;
            match r2w {
                None => value * value / (c + value * value),
                Some(r) => value * value * (one - r) / c,
            }
        }

        (F2, D) => ctx.group_factor()?.sqrt() * value.sqrt(),
        (F2, S) => value.sqrt(),
        (F2, R2) => match r2w {
            None => value / (one + value),
            Some(r) => value * (one - r),
        },

        (R2, D) => ctx.group_factor()?.sqrt() * (value / (one - r2w.unwrap_or(value))).sqrt(),
        (R2, F2) => value / (one - r2w.unwrap_or(value)),
        (R2, S) => (value / (one - r2w.unwrap_or(value))).sqrt(),

        (S, D) => ctx.group_factor()?.sqrt() * value,
        (S, F2) => value * value,
        (S, R2) => match r2w {
            None => value * value / (one + value * value),
            Some(r) => value * value * (one - r),
        },
    };
    Ok(out)
}

/// Conventional magnitude bands on the `S` scale (`d` bands 0.2/0.5/0.8 at
/// equal group sizes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectCategory {
    NoneSmall,
    SmallMedium,
    MediumLarge,
    Large,
}

impl EffectCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            EffectCategory::NoneSmall => "none-small",
            EffectCategory::SmallMedium => "small-medium",
            EffectCategory::MediumLarge => "medium-large",
            EffectCategory::Large => "large",
        }
    }
}

impl std::fmt::Display for EffectCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `[0, 0.1]`, `(0.1, 0.25]`, `(0.25, 0.4]`, `(0.4, ∞)`.
pub fn classify_effect<T: Scalar>(s: T) -> Result<EffectCategory> {
    if s.is_nan() || s < T::zero() {
        return Err(Error::domain(format!("S must be >= 0, got {s}")));
    }
    Ok(if s <= T::lit(0.1) {
        EffectCategory::NoneSmall
    } else if s <= T::lit(0.25) {
        EffectCategory::SmallMedium
    } else if s <= T::lit(0.4) {
        EffectCategory::MediumLarge
    } else {
        EffectCategory::Large
    })
}

/// Limit of the pooled-variance Cohen's `d` divided by the robust `d(S)`.
pub fn cohens_d_bias_ratio<T: Scalar>(var1: T, var0: T, pi1: T) -> Result<T> {
    if !(var1 > T::zero() && var0 > T::zero()) || !var1.is_finite() || !var0.is_finite() {
        return Err(Error::domain("variances must be positive and finite"));
    }
    if !(pi1 > T::zero() && pi1 < T::one()) {
        return Err(Error::domain(format!("pi1 must lie in (0, 1), got {pi1}")));
    }
    let pi0 = T::one() - pi1;
    let design = (T::one() / pi1 + T::one() / pi0).sqrt().recip();
    let robust = var1 / pi1 + var0 / pi0;
    let pooled = pi1 * var1 + pi0 * var0;
    Ok(design * (robust / pooled).sqrt())
}

/// Limit of the classical `R²` divided by the robust `R²(S)` for simple
/// linear regression with `σ²_xy = E[(X − μ_x)² ε²]`.
pub fn r2_bias_ratio<T: Scalar>(beta: T, sigma_x_sq: T, sigma_y_sq: T, sigma_xy_sq: T) -> Result<T> {
    if !(sigma_x_sq > T::zero() && sigma_y_sq > T::zero() && sigma_xy_sq > T::zero()) {
        return Err(Error::domain("variance inputs must be positive"));
    }
    if !beta.is_finite() {
        return Err(Error::domain("beta must be finite"));
    }
    let signal = sigma_x_sq * sigma_x_sq * beta * beta;
    Ok((signal + sigma_x_sq * sigma_y_sq) / (signal + sigma_xy_sq))
}

/// One cell of a bias surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasPoint<T> {
    /// `log₂(σ₁²/σ₀²)` for `d`, `log₂{σ²_xy/(σ_x²σ_y²)}` for `R²`.
    pub log2_ratio: T,
    /// `π₁` for `d`, `β` for `R²`.
    pub second: T,
    pub ratio: T,
}

/// `d` bias over `log₂(σ₁²/σ₀²) ∈ [−3, 3]` (`n_ratio` points) and
/// `π₁ = k/(n_pi + 1)`, `k = 1..=n_pi`, with `σ₀² = 1`.
pub fn cohens_d_bias_grid<T: Scalar>(n_ratio: usize, n_pi: usize) -> Result<Vec<BiasPoint<T>>> {
    let mut out = Vec::with_capacity(n_ratio * n_pi);
    for t in log2_axis::<T>(n_ratio)? {
        for k in 1..=n_pi {
            let pi1 = T::from_usize_lossy(k) / T::from_usize_lossy(n_pi + 1);
            let ratio = cohens_d_bias_ratio(T::lit(2.0).powf(t), T::one(), pi1)?;
            out.push(BiasPoint {
                log2_ratio: t,
                second: pi1,
                ratio,
            });
        }
    }
    Ok(out)
}

/// `R²` bias over `log₂{σ²_xy/(σ_x²σ_y²)} ∈ [−3, 3]` for each `β`, with
/// `σ_x² = σ_y² = 1`.
pub fn r2_bias_grid<T: Scalar>(n_ratio: usize, betas: &[T]) -> Result<Vec<BiasPoint<T>>> {
    let mut out = Vec::with_capacity(n_ratio * betas.len());
    for t in log2_axis::<T>(n_ratio)? {
        for &beta in betas {
            let ratio = r2_bias_ratio(beta, T::one(), T::one(), T::lit(2.0).powf(t))?;
            out.push(BiasPoint {
                log2_ratio: t,
                second: beta,
                ratio,
            });
        }
    }
    Ok(out)
}

fn log2_axis<T: Scalar>(n: usize) -> Result<Vec<T>> {
    if n < 2 {
        return Err(Error::domain("grid needs at least two points per axis"));
    }
    let step = T::lit(6.0) / T::from_usize_lossy(n - 1);
    Ok((0..n)
        .map(|i| T::lit(-3.0) + step * T::from_usize_lossy(i))
        .collect())
}
