//! Power and sample size for the robust Wald test.
//!
//! `power = 1 − Φ_df(Φ⁻¹_df(1 − α; 0); n S²)`. The relation involves no
//! model-specific quantity, so one set of curves serves every family.

use serde::Serialize;

use crate::distributions::{
    noncentral_chisq_cdf, noncentral_chisq_quantile, solve_noncentrality, ChiSqParams,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_df(df: usize) -> Result<()> {
    if df == 0 {
        return Err(Error::domain("df must be a positive integer"));
    }
    Ok(())
}

fn check_s<T: Scalar>(s: T) -> Result<()> {
    if !s.is_finite() || s < T::zero() {
        return Err(Error::domain(format!("S must be finite and >= 0, got {s}")));
    }
    Ok(())
}

fn check_power<T: Scalar>(power: T, alpha: T) -> Result<()> {
    if !(power < T::one()) || power.is_nan() {
        return Err(Error::domain(format!("power must be < 1, got {power}")));
    }
    if power <= alpha {
        return Err(Error::Infeasible(format!(
            "power {power} must exceed alpha {alpha}"
        )));
    }
    Ok(())
}

fn critical_value<T: Scalar>(df: usize, alpha: T) -> Result<T> {
    noncentral_chisq_quantile(T::one() - alpha, ChiSqParams::central(T::from_usize_lossy(df))?)
}

/// Power of the level-`alpha` test with `n` observations and index `s`.
pub fn power_from<T: Scalar>(n: usize, s: T, df: usize, alpha: T) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    check_s(s)?;
    check_df(df)?;
    check_alpha(alpha)?;
    let crit = critical_value(df, alpha)?;
    power_at(crit, n, s, df)
}

fn power_at<T: Scalar>(crit: T, n: usize, s: T, df: usize) -> Result<T> {
    let lambda = T::from_usize_lossy(n) * s * s;
    let params = ChiSqParams::new(T::from_usize_lossy(df), lambda)?;
    Ok(T::one() - noncentral_chisq_cdf(crit, params)?)
}

/// Smallest `n` with `power_from(n, s, df, alpha) ≥ power`.
pub fn solve_sample_size<T: Scalar>(power: T, s: T, df: usize, alpha: T) -> Result<usize> {
    check_s(s)?;
    check_df(df)?;
    check_alpha(alpha)?;
    check_power(power, alpha)?;
    if s == T::zero() {
        return Err(Error::Infeasible("S = 0 never reaches power above alpha".into()));
    }
    let lambda = solve_noncentrality(power, T::from_usize_lossy(df), alpha)?;
    let n_real = (lambda / (s * s)).ceil();
    let mut n = n_real
        .to_usize()
        .ok_or_else(|| Error::Infeasible(format!("required sample size {n_real} overflows")))?
        .max(1);

    let crit = critical_value(df, alpha)?;
    while n > 1 && power_at(crit, n - 1, s, df)? >= power {
        n -= 1;
    }
    while power_at(crit, n, s, df)? < power {
        n += 1;
    }
    Ok(n)
}

/// Index `s = sqrt(λ*/n)` detectable with the requested power.
pub fn solve_effect_size<T: Scalar>(power: T, n: usize, df: usize, alpha: T) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    check_df(df)?;
    check_alpha(alpha)?;
    check_power(power, alpha)?;
    let lambda = solve_noncentrality(power, T::from_usize_lossy(df), alpha)?;
    Ok((lambda / T::from_usize_lossy(n)).sqrt())
}

/// Level `alpha` at which the test reaches `power`. Power is increasing in
/// `alpha`, so the root is bracketed by `(0, power)`.
pub fn solve_alpha<T: Scalar>(power: T, n: usize, s: T, df: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    check_s(s)?;
    check_df(df)?;
    if !(power > T::zero() && power < T::one()) {
        return Err(Error::domain(format!("power must lie in (0, 1), got {power}")));
    }
    if s == T::zero() {
        return Ok(power);
    }
    let mut lo = T::zero();
    let mut hi = power;
    let tol = T::tol(1e-13);
    for _ in 0..2000 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let pw = power_from(n, s, df, mid)?;
        if (pw - power).abs() <= tol {
            return Ok(mid);
        }
        if pw < power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unknown {
    Power,
    N,
    S,
    Alpha,
}

impl std::str::FromStr for Unknown {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Unknown::Power),
            "n" => Ok(Unknown::N),
            "s" => Ok(Unknown::S),
            "alpha" => Ok(Unknown::Alpha),
            other => Err(Error::domain(format!(
                "cannot solve for `{other}` (expected power, n, s or alpha)"
            ))),
        }
    }
}

/// A power relation with exactly one unknown among `n`, `s`, `alpha`,
/// `power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSpec<T> {
    pub n: Option<usize>,
    pub s: Option<T>,
    pub df: usize,
    pub alpha: Option<T>,
    pub power: Option<T>,
}

impl<T: Scalar> PowerSpec<T> {
    pub fn unknown(&self) -> Result<Unknown> {
        let missing: Vec<Unknown> = [
            (self.n.is_none(), Unknown::N),
            (self.s.is_none(), Unknown::S),
            (self.alpha.is_none(), Unknown::Alpha),
            (self.power.is_none(), Unknown::Power),
        ]
        .into_iter()
        .filter_map(|(m, u)| m.then_some(u))
        .collect();
        match missing.as_slice() {
            [one] => Ok(*one),
            [] => Err(Error::domain("power spec has no unknown")),
            _ => Err(Error::domain(format!(
                "power spec needs exactly one unknown, found {}",
                missing.len()
            ))),
        }
    }

    /// Fills in the unknown.
    pub fn solve(&self) -> Result<PowerSpec<T>> {
        let mut out = *self;
        match self.unknown()? {
            Unknown::Power => {
                out.power = Some(power_from(
                    self.n.unwrap(),
                    self.s.unwrap(),
                    self.df,
                    self.alpha.unwrap(),
                )?)
            }
            Unknown::N => {
                out.n = Some(solve_sample_size(
                    self.power.unwrap(),
                    self.s.unwrap(),
                    self.df,
                    self.alpha.unwrap(),
                )?)
            }
            Unknown::S => {
                out.s = Some(solve_effect_size(
                    self.power.unwrap(),
                    self.n.unwrap(),
                    self.df,
                    self.alpha.unwrap(),
                )?)
            }
            Unknown::Alpha => {
                out.alpha = Some(solve_alpha(
                    self.power.unwrap(),
                    self.n.unwrap(),
                    self.s.unwrap(),
                    self.df,
                )?)
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerRow<T> {
    pub n: usize,
    pub s: T,
    pub df: usize,
    pub alpha: T,
    pub power: T,
}

/// Power for every `(s, df, n)` combination, ordered by `s`, then `df`,
/// then `n`.
pub fn power_curve<T: Scalar>(
    s_values: &[T],
    df_values: &[usize],
    alpha: T,
    n_values: &[usize],
) -> Result<Vec<PowerRow<T>>> {
    check_alpha(alpha)?;
    let mut rows = Vec::with_capacity(s_values.len() * df_values.len() * n_values.len());
    for &s in s_values {
        check_s(s)?;
        for &df in df_values {
            check_df(df)?;
            let crit = critical_value(df, alpha)?;
            for &n in n_values {
                if n == 0 {
                    return Err(Error::domain("n must be >= 1"));
                }
                rows.push(PowerRow {
                    n,
                    s,
                    df,
                    alpha,
                    power: power_at(crit, n, s, df)?,
                });
            }
        }
    }
    Ok(rows)
}

/// `min..=max` in steps of `step`, always including `max`.
pub fn n_grid(min: usize, max: usize, step: usize) -> Result<Vec<usize>> {
    if min == 0 || max < min || step == 0 {
        return Err(Error::domain(format!(
            "invalid n range {min}..={max} step {step}"
        )));
    }
    let mut v: Vec<usize> = (min..=max).step_by(step).collect();
    if v.last() != Some(&max) {
        v.push(max);
    }
    Ok(v)
}
