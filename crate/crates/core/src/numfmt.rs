//! Decimal text formatting for the SKL1 and matrix-dump emitters.
//!
//! Values are written with 9 significant digits, which is enough to
//! reproduce any finite `f32` bit-exactly on re-parse. Trailing zeros are
//! trimmed and plain decimal notation is used for moderate exponents, so
//! `1.0` prints as `1` and `0.5` as `0.5`.

use crate::scalar::Scalar;

/// Significant digits used by every text emitter in this crate.
pub const SIG_DIGITS: usize = 9;

/// Format `v` with [`SIG_DIGITS`] significant digits, `%g`-style.
pub fn format_sig9<T: Scalar>(v: T) -> String {
    format_sig(v, SIG_DIGITS)
}

/// Format `v` with enough digits to reproduce it bit-exactly on re-parse
/// (9 for `f32`, 17 for `f64`). Machine-facing emitters that feed later
/// pipeline stages use this.
pub fn format_exact<T: Scalar>(v: T) -> String {
    format_sig(v, T::EXACT_SIG_DIGITS)
}

/// Format `v` with `sig` significant digits: plain decimal notation when the
/// exponent is small, scientific otherwise, trailing zeros trimmed.
pub fn format_sig<T: Scalar>(v: T, sig: usize) -> String {
    assert!(sig >= 1, "need at least one significant digit");
    // {:.*e} renders d.ddd...e<exp> with correct rounding; rearrange from there.
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = match sci.split_once('e') {
        Some((m, e)) => (m, e.parse::<i32>().expect("exponent from formatter")),
        None => return sci, // inf / NaN
    };
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    if digits == "0" {
        return format!("{sign}0");
    }

    let out = if exp < -4 || exp >= sig as i32 {
        // Scientific: one leading digit, rest as fraction.
        let (head, tail) = digits.split_at(1);
        if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        }
    } else if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{digits}")
    } else {
        let point = exp as usize + 1;
        if point >= digits.len() {
            let zeros = "0".repeat(point - digits.len());
            format!("{digits}{zeros}")
        } else {
            let (int, frac) = digits.split_at(point);
            format!("{int}.{frac}")
        }
    };
    format!("{sign}{out}")
}
