use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::error::{Error, Result};

/// `1 − (acc_gen − acc_rand) / (acc_real − acc_rand)`; undefined unless
/// `acc_real > acc_rand`.
///
/// Accuracies are read as the decimals they print as, so `drop_rate(0.9, 0.7, 0.5)`
/// is exactly `0.5`.
pub fn drop_rate(acc_real: f64, acc_gen: f64, acc_rand: f64) -> Result<f64> {
    if !(acc_real.is_finite() && acc_gen.is_finite() && acc_rand.is_finite()) {
        return Err(Error::invalid("accuracies must be finite"));
    }
    if acc_real <= acc_rand {
        return Err(Error::contract(format!(
            "drop rate undefined: acc_real ({acc_real}) must exceed acc_rand ({acc_rand})"
        )));
    }
    let exact = decimal(acc_real)
        .zip(decimal(acc_gen))
        .zip(decimal(acc_rand))
        .and_then(|((real, gen), rand)| (real - gen).checked_div(real - rand))
        .and_then(|d| d.to_f64());
    Ok(exact.unwrap_or_else(|| (acc_real - acc_gen) / (acc_real - acc_rand)))
}

fn decimal(x: f64) -> Option<Decimal> {
    Decimal::from_str(&x.to_string()).ok()
}
