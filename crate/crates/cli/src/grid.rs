//! Grid syntax shared by flags and config files.
//!
//! A grid is one of
//!
//! - a scalar: `0.5`
//! - a comma list: `0.1,1,10,1e3`
//! - an inclusive range `start:stop:step`, e.g. `0:2:0.1`
//!
//! Ranges are computed as `start + k·step` (no accumulation) and include
//! `stop` when it is hit within `1e-9·step`.

use crate::error::CliError;

pub fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    let bad = |reason: String| CliError::Value {
        key: key.to_string(),
        value: text.to_string(),
        reason,
    };
    let num = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{}` is not a number", s.trim())))?;
        if !v.is_finite() {
            return Err(bad(format!("`{}` is not finite", s.trim())));
        }
        Ok(v)
    };
    if text.is_empty() {
        return Err(bad("empty grid".into()));
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("a range needs start:stop:step".into()));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) {
            return Err(bad("range step must be positive".into()));
        }
        if b < a {
            return Err(bad("range stop is below start".into()));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(bad(format!("range has {count} points")));
        }
        return Ok((0..count).map(|k| a + h * k as f64).collect());
    }
    text.split(',').map(num).collect()
}

/// Comma-separated list of names parsed by `FromStr`.
pub fn parse_list<T: std::str::FromStr<Err = String>>(key: &str, text: &str) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, String> = text.split(',').map(|s| s.trim().parse()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(CliError::Value {
            key: key.to_string(),
            value: text.to_string(),
            reason: "empty list".into(),
        }),
        Err(reason) => Err(CliError::Value {
            key: key.to_string(),
            value: text.to_string(),
            reason,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(parse_grid("c", "0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("r", "0.1, 1,1e3").unwrap(), vec![0.1, 1.0, 1000.0]);
        let g = parse_grid("c", "0:2:0.1").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 2.0);
        assert_eq!(g[3], 0.30000000000000004);
        assert!(parse_grid("c", "1:0:0.1").is_err());
        assert!(parse_grid("c", "0:1").is_err());
        assert!(parse_grid("c", "a").is_err());
    }
}
