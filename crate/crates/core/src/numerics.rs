//! Precision policy and the base special functions behind the truncated
//! moments.
//!
//! Every value is a [`Real`] (an MPFR float) that carries its own binary
//! precision. Callers state the precision they want in decimal digits; there
//! is no ambient precision setting.

use rug::float::{Constant, Special};
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightSpec;

/// Arbitrary-precision real number.
pub type Real = Float;

/// Lowest precision any computation is allowed to run at.
pub const MIN_DIGITS: u32 = 30;

/// How many times a failed factorization may double its precision.
pub const MAX_ESCALATIONS: u32 = 4;

/// Binary precision that holds `digits` decimal digits.
pub fn bits_for_digits(digits: u32) -> u32 {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32 + 4
}

/// Decimal digits represented by a binary precision (rounded down).
pub fn digits_for_bits(bits: u32) -> u32 {
    (f64::from(bits.saturating_sub(4)) / std::f64::consts::LOG2_10).floor() as u32
}

/// `10^(-digits / denom)` as a float, the tolerance convention used by the
/// verification reports.
pub fn tolerance(digits: u32, denom: f64) -> f64 {
    10f64.powf(-f64::from(digits) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionPolicy {
    digits: u32,
    auto_escalate: bool,
}

impl PrecisionPolicy {
    pub fn new(digits: u32) -> Result<Self> {
        if digits < MIN_DIGITS {
            return Err(Error::InvalidParameter(format!(
                "digits must be at least {MIN_DIGITS}, got {digits}"
            )));
        }
        Ok(Self {
            digits,
            auto_escalate: true,
        })
    }

    pub fn with_auto_escalate(mut self, on: bool) -> Self {
        self.auto_escalate = on;
        self
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn auto_escalate(&self) -> bool {
        self.auto_escalate
    }

    pub fn bits(&self) -> u32 {
        bits_for_digits(self.digits)
    }
}

/// Starting precision for factorizing the moment matrix of order `n`.
///
/// Hankel matrices lose roughly a fixed number of digits per order; twelve
/// per order with a floor of fifty covers every window the crate tabulates.
pub fn required_digits(n: usize, _weight: &WeightSpec) -> u32 {
    let n = u32::try_from(n).unwrap_or(u32::MAX / 12);
    50.max(12 * n)
}

pub fn pi(prec: u32) -> Real {
    Float::with_val(prec, Constant::Pi)
}

pub fn infinity(prec: u32, negative: bool) -> Real {
    if negative {
        Float::with_val(prec, Special::NegInfinity)
    } else {
        Float::with_val(prec, Special::Infinity)
    }
}

/// `log10 |x|` as an `f64`; `-inf` for zero.
pub fn log10_abs(x: &Real) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    Float::with_val(64, x.abs_ref()).log10().to_f64()
}

/// Formats `x` in scientific notation with `sig` significant figures.
pub fn format_real(x: &Real, sig: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x.is_sign_negative() {
            "-inf".into()
        } else {
            "inf".into()
        };
    }
    // rug counts the precision as total significant digits.
    format!("{:.*e}", sig.max(1), x)
}

/// Parses a decimal string at the given binary precision.
pub fn parse_real(text: &str, prec: u32) -> Result<Real> {
    let trimmed = text.trim();
    match trimmed {
        "inf" | "+inf" | "infinity" => return Ok(infinity(prec, false)),
        "-inf" | "-infinity" => return Ok(infinity(prec, true)),
        _ => {}
    }
    Float::parse(trimmed)
        .map(|p| Float::with_val(prec, p))
        .map_err(|e| Error::InvalidParameter(format!("cannot parse {text:?} as a real: {e}")))
}

const SERIES_GUARD_BITS: u32 = 64;

/// Error function to `digits` decimal digits.
///
/// Summed from the confluent (Kummer) form
/// `erf(x) = 2x/sqrt(pi) * exp(-x^2) * sum_k (2x^2)^k / (1*3*...*(2k+1))`,
/// whose terms are all positive, so no cancellation occurs at any `x`.
///
/// Panics if `digits < MIN_DIGITS` or `x` is NaN.
pub fn erf(x: &Real, digits: u32) -> Real {
    assert!(digits >= MIN_DIGITS, "erf needs at least {MIN_DIGITS} digits");
    assert!(!x.is_nan(), "erf of NaN");
    let out_prec = bits_for_digits(digits);
    if x.is_infinite() {
        let one = Float::with_val(out_prec, 1);
        return if x.is_sign_negative() { -one } else { one };
    }
    if x.is_zero() {
        return Float::with_val(out_prec, 0);
    }
    let prec = out_prec + SERIES_GUARD_BITS;
    let xw = Float::with_val(prec, x);
    let x2 = Float::with_val(prec, xw.square_ref());
    let two_x2 = x2.clone() * 2u32;
    let eps = Float::with_val(prec, 1) >> prec;

    let mut term = Float::with_val(prec, 1);
    let mut sum = Float::with_val(prec, 1);
    let mut k: u64 = 0;
    loop {
        term *= &two_x2;
        term /= 2 * k + 3;
        sum += &term;
        k += 1;
        // Terms grow until k ~ x^2 and then decay geometrically.
        if Float::with_val(prec, 2 * k + 3) > two_x2 && term < Float::with_val(prec, &sum * &eps) {
            break;
        }
    }
    let pref = Float::with_val(prec, -x2).exp() * xw * 2u32 / pi(prec).sqrt();
    let mut out = pref * sum;
    out.set_prec(out_prec);
    out
}

/// Lower incomplete gamma function `gamma(s, x) = int_0^x t^(s-1) e^(-t) dt`.
///
/// Uses the Kummer series `x^s e^(-x) sum_k x^k / (s (s+1) ... (s+k))`;
/// `x = +inf` returns the complete gamma function.
pub fn lower_incomplete_gamma(s: &Real, x: &Real, digits: u32) -> Result<Real> {
    assert!(digits >= MIN_DIGITS, "incomplete gamma needs at least {MIN_DIGITS} digits");
    if !(s.is_finite() && *s > 0) {
        return Err(Error::InvalidParameter(format!(
            "incomplete gamma needs s > 0, got {}",
            format_real(s, 12)
        )));
    }
    if x.is_nan() || *x < 0 {
        return Err(Error::Domain(format!(
            "incomplete gamma needs x >= 0, got {}",
            format_real(x, 12)
        )));
    }
    let out_prec = bits_for_digits(digits);
    if x.is_zero() {
        return Ok(Float::with_val(out_prec, 0));
    }
    if x.is_infinite() {
        return Ok(Float::with_val(out_prec, s).gamma());
    }
    let prec = out_prec + SERIES_GUARD_BITS;
    let sw = Float::with_val(prec, s);
    let xw = Float::with_val(prec, x);
    let eps = Float::with_val(prec, 1) >> prec;

    let mut denom = sw.clone();
    let mut term = Float::with_val(prec, 1) / &denom;
    let mut sum = term.clone();
    loop {
        denom += 1u32;
        term *= &xw;
        term /= &denom;
        sum += &term;
        if denom > xw && term < Float::with_val(prec, &sum * &eps) {
            break;
        }
    }
    let log_pref = Float::with_val(prec, &sw * Float::with_val(prec, xw.ln_ref())) - &xw;
    let mut out = log_pref.exp() * sum;
    out.set_prec(out_prec);
    Ok(out)
}
