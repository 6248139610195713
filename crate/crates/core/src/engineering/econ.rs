//! Capital recovery.

use super::EngineeringError;
use crate::Scalar;

/// Standard capital recovery factor `r / (1 - (1 + r)^-n)`.
pub fn capital_recovery_factor<T: Scalar>(rate: T, life_years: u32) -> Result<T, EngineeringError> {
    let r = rate.to_f64().unwrap_or(f64::NAN);
    if !(r > 0.0 && r.is_finite()) {
        return Err(EngineeringError::Domain(format!("discount rate {r} must be positive")));
    }
    if life_years < 1 {
        return Err(EngineeringError::Domain("life must be at least one year".into()));
    }
    let n = T::from_u32(life_years).ok_or_else(|| EngineeringError::Domain("life out of range".into()))?;
    // (1 + r)^-n via exp/ln_1p keeps precision for small rates and long lives.
    let discount = (-n * rate.ln_1p()).exp();
    Ok(rate / (T::one() - discount))
}

/// Constant annual payment that repays `capex` over `life_years` at `rate`.
pub fn annuity<T: Scalar>(capex: T, rate: T, life_years: u32) -> Result<T, EngineeringError> {
    Ok(capex * capital_recovery_factor(rate, life_years)?)
}
