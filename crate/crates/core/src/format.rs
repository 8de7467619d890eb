//! Fixed decimal renderings used by every text artifact, so identical
//! numbers always produce identical bytes (and checksums).

/// Decimal (never scientific) rendering with `digits` significant digits.
pub fn sig_digits(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Nine significant digits, the precision of all trigger and result columns.
pub fn sig9(x: f64) -> String {
    sig_digits(x, 9)
}

/// Epoch times: nine digits after the decimal point (nanoseconds).
pub fn time9(t: f64) -> String {
    format!("{t:.9}")
}
