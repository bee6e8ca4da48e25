//! Byte-stable number rendering for emitted tables.

use alloc::format;
use alloc::string::String;

pub const SIGNIFICANT_DIGITS: usize = 8;

/// Render `x` with eight significant digits, trailing zeros trimmed.
/// Plain notation for exponents in [-5, 8), scientific otherwise.
pub fn sig8(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        return format!("{}e{}", trim(mantissa), exp);
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim(&format!("{:.*}", decimals, x)).into()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_style_values() {
        assert_eq!(sig8(0.59798884), "0.59798884");
        assert_eq!(sig8(28.10579705), "28.105797");
        assert_eq!(sig8(5.381799977), "5.3818");
        assert_eq!(sig8(100.0), "100");
        assert_eq!(sig8(-15.446), "-15.446");
        assert_eq!(sig8(90.5), "90.5");
        assert_eq!(sig8(1.0 / 3.0), "0.33333333");
    }

    #[test]
    fn extremes() {
        assert_eq!(sig8(0.0), "0");
        assert_eq!(sig8(-0.0), "0");
        assert_eq!(sig8(2.8361056353391905e-09), "2.8361056e-9");
        assert_eq!(sig8(123456789.0), "1.2345679e8");
        assert_eq!(sig8(f64::INFINITY), "inf");
        assert_eq!(sig8(99999999.5), "1e8");
    }
}
