//! Angular-momentum coupling coefficients.

use crate::{Error, Result};

/// Converts a half-integer to twice its value, rejecting anything else.
fn doubled(x: f64, name: &str) -> Result<i64> {
    let two = 2.0 * x;
    let rounded = two.round();
    if !x.is_finite() || (two - rounded).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "{name} = {x} is not a half-integer"
        )));
    }
    Ok(rounded as i64)
}

/// ln(n!) for doubled arguments that are guaranteed even and non-negative.
fn ln_factorial_half(two_n: i64) -> f64 {
    debug_assert!(two_n >= 0 && two_n % 2 == 0);
    (2..=two_n / 2).map(|k| (k as f64).ln()).sum()
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ in the Condon–Shortley convention.
///
/// All arguments are half-integers. Returns zero when `M != m1 + m2` or the
/// triangle rule fails; projections out of range or mixed parity between a
/// spin and its projection are argument errors.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64> {
    let (tj1, tm1) = (doubled(j1, "j1")?, doubled(m1, "m1")?);
    let (tj2, tm2) = (doubled(j2, "j2")?, doubled(m2, "m2")?);
    let (tj, tm) = (doubled(j, "J")?, doubled(m, "M")?);

    for (tj, tm, name) in [(tj1, tm1, "j1"), (tj2, tm2, "j2"), (tj, tm, "J")] {
        if tj < 0 {
            return Err(Error::Argument(format!("{name} must be non-negative")));
        }
        if tm.abs() > tj {
            return Err(Error::Argument(format!("|m| > {name}")));
        }
        if (tj + tm) % 2 != 0 {
            return Err(Error::Argument(format!(
                "{name} and its projection have inconsistent parity"
            )));
        }
    }

    if tm != tm1 + tm2 {
        return Ok(0.0);
    }
    if tj > tj1 + tj2 || tj < (tj1 - tj2).abs() || (tj1 + tj2 + tj) % 2 != 0 {
        return Ok(0.0);
    }

    let lf = ln_factorial_half;
    let ln_pre = 0.5
        * (((tj + 1) as f64).ln() + lf(tj + tj1 - tj2) + lf(tj - tj1 + tj2) + lf(tj1 + tj2 - tj)
            - lf(tj1 + tj2 + tj + 2)
            + lf(tj + tm)
            + lf(tj - tm)
            + lf(tj1 - tm1)
            + lf(tj1 + tm1)
            + lf(tj2 - tm2)
            + lf(tj2 + tm2));

    // Racah sum over k (doubled), restricted to non-negative factorial arguments.
    let lo = 0.max(tj2 - tj - tm1).max(tj1 - tj + tm2);
    let hi = (tj1 + tj2 - tj).min(tj1 - tm1).min(tj2 + tm2);
    let mut sum = 0.0;
    let mut tk = lo;
    while tk <= hi {
        let ln_den = lf(tk)
            + lf(tj1 + tj2 - tj - tk)
            + lf(tj1 - tm1 - tk)
            + lf(tj2 + tm2 - tk)
            + lf(tj - tj2 + tm1 + tk)
            + lf(tj - tj1 - tm2 + tk);
        let sign = if (tk / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_pre - ln_den).exp();
        tk += 2;
    }
    Ok(sum)
}
