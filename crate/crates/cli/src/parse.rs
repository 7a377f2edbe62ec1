//! Complex-number and list parsing for flags and config values.

use ekgw_core::Complex64;

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (with `j` accepted for `i`).
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().replace('j', "i");
    if t.is_empty() {
        return Err("empty complex number".into());
    }
    let bad = || format!("cannot parse complex number '{s}' (expected a+bi)");
    if let Some(body) = t.strip_suffix('i') {
        // Split at the last sign that is not part of an exponent and not leading.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            x => x.parse::<f64>().map_err(|_| bad())?,
        };
        let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| bad())? };
        Ok(Complex64::new(re, im))
    } else {
        t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad())
    }
}

/// Comma-separated complex numbers.
pub fn parse_complex_list(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(',').map(parse_complex).collect()
}

pub fn format_complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        let c = Complex64::new;
        assert_eq!(parse_complex("0.3+0.1i").unwrap(), c(0.3, 0.1));
        assert_eq!(parse_complex("0.5-1.3j").unwrap(), c(0.5, -1.3));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("2i").unwrap(), c(0.0, 2.0));
        assert_eq!(parse_complex("-0.25").unwrap(), c(-0.25, 0.0));
        assert_eq!(parse_complex("1e-3+2e-2i").unwrap(), c(1e-3, 2e-2));
        assert_eq!(parse_complex(" 1 - i ").unwrap(), c(1.0, -1.0));
        assert!(parse_complex("1+2").is_err());
        assert!(parse_complex("abc").is_err());
        assert_eq!(parse_complex_list("0.17,0.38+0.1i").unwrap().len(), 2);
    }
}
