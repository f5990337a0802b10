//! Plain-text rate files: one positive decimal per line, `#` starts a
//! comment, blank lines are ignored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::RateVector;

/// Finite decimals, one per line.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| Error::Parse {
            line: k + 1,
            message: format!("expected a decimal number, found {line:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: k + 1,
                message: format!("value must be finite, found {value}"),
            });
        }
        values.push(value);
    }
    Ok(values)
}

pub fn parse_rates(text: &str) -> Result<RateVector> {
    let values = parse_values(text)?;
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, raw)| !raw.split('#').next().unwrap_or("").trim().is_empty())
        .map(|(k, _)| k + 1);
    for (value, line) in values.iter().zip(lines) {
        if *value <= 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("rate must be positive and finite, found {value}"),
            });
        }
    }
    RateVector::new(values)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

pub fn read_rates(path: impl AsRef<Path>) -> Result<RateVector> {
    parse_rates(&read_text(path.as_ref())?)
}

pub fn read_values(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_values(&read_text(path.as_ref())?)
}

/// One rate per line in shortest round-trip form.
pub fn format_rates(rates: &RateVector) -> String {
    rates
        .as_slice()
        .iter()
        .map(|x| format!("{x:?}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let r = parse_rates("# header\n1.5\n\n  2 # trailing\n3e-1\n").unwrap();
        assert_eq!(r.as_slice(), &[1.5, 2.0, 0.3]);
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(
            parse_rates("1\nabc\n"),
            Err(Error::Parse {
                line: 2,
                message: "expected a decimal number, found \"abc\"".to_string()
            })
        );
        assert!(matches!(
            parse_rates("1\n-2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_rates("1\n0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_rates("# only\n1\n").is_err());
        assert!(matches!(
            parse_values("0\ninf\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(parse_values("0\n# x\n0.5\n").unwrap(), vec![0.0, 0.5]);
    }

    #[test]
    fn round_trip() {
        let r = RateVector::new(vec![0.1, 1.0 / 3.0, 2.5e-7]).unwrap();
        assert_eq!(parse_rates(&format_rates(&r)).unwrap(), r);
    }
}
