//! Complex literals: `1.5`, `-2e-3`, `0.5i`, `i`, `-i`, `1-2i`, `3+0.25i`.

use num_complex::Complex64 as C64;

fn real(s: &str) -> Option<f64> {
    if s.is_empty() || s.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn imaginary(s: &str) -> Option<f64> {
    let body = s.strip_suffix('i')?;
    match body {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => real(body),
    }
}

pub fn complex(token: &str) -> Result<C64, String> {
    let t = token.trim();
    let bad = || format!("invalid complex literal `{token}` (expected e.g. 1.5, -0.5i, 1-2i)");
    if !t.ends_with('i') {
        return real(&t).map(|x| C64::new(x, 0.0)).ok_or_else(bad);
    }
    // Split before the last sign that is not leading and not an exponent sign.
    let bytes = t.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = real(&t[..k]).ok_or_else(bad)?;
            let im = imaginary(&t[k..]).ok_or_else(bad)?;
            Ok(C64::new(re, im))
        }
        None => imaginary(&t).map(|y| C64::new(0.0, y)).ok_or_else(bad),
    }
}

/// Comma-separated list of complex literals.
pub fn point(text: &str) -> Result<Vec<C64>, String> {
    text.split(',').map(complex).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        let c = |s| complex(s).unwrap();
        assert_eq!(c("1.5"), C64::new(1.5, 0.0));
        assert_eq!(c("-2e-3"), C64::new(-2e-3, 0.0));
        assert_eq!(c("0.5i"), C64::new(0.0, 0.5));
        assert_eq!(c("i"), C64::new(0.0, 1.0));
        assert_eq!(c("-i"), C64::new(0.0, -1.0));
        assert_eq!(c("1-2i"), C64::new(1.0, -2.0));
        assert_eq!(c("3+i"), C64::new(3.0, 1.0));
        assert_eq!(c("1e-3+2.5e+2i"), C64::new(1e-3, 250.0));
        assert_eq!(c(" -0.1 "), C64::new(-0.1, 0.0));
        for bad in ["", "x", "1+", "2j", "1+2i+3", "nan", "inf", "1 2"] {
            assert!(complex(bad).is_err(), "{bad}");
        }
        assert_eq!(point("0,0,0.1").unwrap().len(), 3);
    }
}
