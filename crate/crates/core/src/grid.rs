//! Sample grids and the `start:stop:count` range syntax.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `count` evenly spaced samples including both ends.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|i| if i == count - 1 { stop } else { start + step * i as f64 }).collect()
        }
    }
}

/// Parse a number that may carry a `pi` factor: `pi`, `-pi`, `4pi`, `0.5pi`,
/// `pi/2`, `3pi/2`, `2*pi`, `1e-3`.
pub fn parse_number(text: &str) -> Result<f64> {
    let s: String = text.trim().chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse(format!("cannot parse number '{text}'"));
    if s.is_empty() {
        return Err(bad());
    }
    let (head, denom) = match s.split_once('/') {
        Some((h, d)) => (h.to_string(), d.parse::<f64>().map_err(|_| bad())?),
        None => (s.clone(), 1.0),
    };
    let lower = head.to_ascii_lowercase();
    let value = if let Some(coef) = lower.strip_suffix("pi") {
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().map_err(|_| bad())?,
        };
        c * PI
    } else {
        lower.parse::<f64>().map_err(|_| bad())?
    };
    if denom == 0.0 {
        return Err(bad());
    }
    let v = value / denom;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Parse `start:stop:count` into an inclusive linspace, or a single number
/// into a one-element grid.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![parse_number(single)?]),
        [start, stop, count] => {
            let start = parse_number(start)?;
            let stop = parse_number(stop)?;
            let count: usize =
                count.trim().parse().map_err(|_| Error::Parse(format!("range count in '{text}' is not an integer")))?;
            if count == 0 {
                return Err(Error::invalid(format!("range '{text}' is empty")));
            }
            if count > 1 && stop <= start {
                return Err(Error::invalid(format!("range '{text}' must increase")));
            }
            Ok(linspace(start, stop, count))
        }
        _ => Err(Error::Parse(format!("expected start:stop:count, got '{text}'"))),
    }
}

/// Parse a comma-separated list of numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_number).collect()
}
