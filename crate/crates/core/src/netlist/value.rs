//! Numeric tokens with SPICE scale factors.

/// Scale suffixes, longest first so `meg` wins over `m`.
const SUFFIXES: &[(&str, i32)] = &[
    ("meg", 6),
    ("f", -15),
    ("p", -12),
    ("n", -9),
    ("u", -6),
    ("m", -3),
    ("k", 3),
    ("g", 9),
    ("t", 12),
];

/// Parses `number suffix? unit-letters?`, e.g. `2.5k`, `1meg`, `10uF`, `2kohm`.
///
/// The suffix is folded into the decimal exponent before conversion so the
/// result is the correctly rounded value of the written decimal.
pub fn parse_value(token: &str) -> Result<f64, String> {
    let bytes = token.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return Err(format!("`{token}` is not a number"));
    }
    let mantissa_end = i;
    let mut exponent: i32 = 0;
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_digits_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits_start {
            exponent = token[i + 1..j]
                .parse::<i32>()
                .map_err(|_| format!("exponent out of range in `{token}`"))?;
            i = j;
        }
    }
    let rest = &token[i..];
    let lower = rest.to_ascii_lowercase();
    let mut scale = 0;
    let mut unit = lower.as_str();
    for (suffix, exp) in SUFFIXES {
        if let Some(tail) = lower.strip_prefix(suffix) {
            scale = *exp;
            unit = tail;
            break;
        }
    }
    if !unit.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(format!("unexpected characters `{rest}` after number in `{token}`"));
    }
    let total = exponent
        .checked_add(scale)
        .ok_or_else(|| format!("exponent out of range in `{token}`"))?;
    let literal = format!("{}e{}", &token[..mantissa_end], total);
    let value: f64 = literal
        .parse()
        .map_err(|_| format!("`{token}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{token}` overflows"));
    }
    Ok(value)
}

/// Canonical rendering: scientific notation, six digits after the point.
pub fn format_value(v: f64) -> String {
    format!("{v:.6e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_value("2.5k").unwrap(), 2500.0);
        assert_eq!(parse_value("1meg").unwrap(), 1.0e6);
        assert_eq!(parse_value("1MEG").unwrap(), 1.0e6);
        assert_eq!(parse_value("3m").unwrap(), 3.0e-3);
        assert_eq!(parse_value("3M").unwrap(), 3.0e-3);
        assert_eq!(parse_value("2u").unwrap(), 2e-6);
        assert_eq!(parse_value("10p").unwrap(), 1e-11);
        assert_eq!(parse_value("1f").unwrap(), 1e-15);
        assert_eq!(parse_value("4.7n").unwrap(), 4.7e-9);
        assert_eq!(parse_value("1g").unwrap(), 1e9);
        assert_eq!(parse_value("1t").unwrap(), 1e12);
    }

    #[test]
    fn units_after_suffix_are_ignored() {
        assert_eq!(parse_value("2kohm").unwrap(), 2000.0);
        assert_eq!(parse_value("10uF").unwrap(), 1e-5);
        assert_eq!(parse_value("5V").unwrap(), 5.0);
        assert_eq!(parse_value("1megohm").unwrap(), 1e6);
    }

    #[test]
    fn plain_and_exponent_forms() {
        assert_eq!(parse_value("-3.3").unwrap(), -3.3);
        assert_eq!(parse_value("1e3").unwrap(), 1000.0);
        assert_eq!(parse_value("1.5E-3").unwrap(), 1.5e-3);
        assert_eq!(parse_value(".5").unwrap(), 0.5);
        assert_eq!(parse_value("2.").unwrap(), 2.0);
        assert_eq!(parse_value("1e3k").unwrap(), 1e6);
        assert_eq!(parse_value("1.000000e3").unwrap(), 1000.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_value("k1").is_err());
        assert!(parse_value("").is_err());
        assert!(parse_value("-").is_err());
        assert!(parse_value("1k5").is_err());
        assert!(parse_value("1.2.3").is_err());
        assert!(parse_value("1e999").is_err());
    }

    #[test]
    fn canonical_format() {
        assert_eq!(format_value(1000.0), "1.000000e3");
        assert_eq!(format_value(2e-6), "2.000000e-6");
        assert_eq!(format_value(-0.5), "-5.000000e-1");
    }
}
