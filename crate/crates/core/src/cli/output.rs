//! Number formatting, sweep ranges and output sinks.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use super::CliError;

pub const DEFAULT_PRECISION: usize = 6;

/// Rounds to `digits` significant digits; `0` keeps full precision.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if digits == 0 || !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every non-integer number in a JSON tree.
pub fn round_value(v: &mut Value, digits: usize) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(x) = num.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x, digits)) {
                    *num = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_value(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_value(x, digits)),
        _ => {}
    }
}

/// Plain notation, switching to exponent form for very small or large
/// magnitudes.
pub fn format_float(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r != 0.0 && r.is_finite() && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Collects output lines and writes them to stdout or a file at the end.
pub struct Sink {
    pub precision: usize,
    buf: String,
}

impl Sink {
    pub fn new(precision: usize) -> Self {
        Sink {
            precision,
            buf: String::new(),
        }
    }

    pub fn line(&mut self, text: &str) {
        self.buf.push_str(text);
        self.buf.push('\n');
    }

    /// Compact JSON on one line.
    pub fn json_line(&mut self, value: &impl Serialize) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value)?;
        round_value(&mut v, self.precision);
        let text = serde_json::to_string(&v)?;
        self.line(&text);
        Ok(())
    }

    /// Indented JSON document.
    pub fn json_pretty(&mut self, value: &impl Serialize) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value)?;
        round_value(&mut v, self.precision);
        let text = serde_json::to_string_pretty(&v)?;
        self.line(&text);
        Ok(())
    }

    pub fn finish(self, out: Option<&PathBuf>) -> Result<(), CliError> {
        match out {
            Some(path) => std::fs::write(path, self.buf)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(self.buf.as_bytes())?;
                stdout.flush()?;
            }
        }
        Ok(())
    }
}

const DEFAULT_PER_DECADE: usize = 4;

/// Parses a sweep axis: a single value, a comma list, `start:stop:step`,
/// or `start:stop:log` / `start:stop:logK` (K points per decade, default 4;
/// both endpoints included).
pub fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("range `{spec}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [start, stop, how] => {
            let (start, stop) = (num(start)?, num(stop)?);
            if stop < start {
                return Err(bad("stop is below start"));
            }
            if let Some(rest) = how.trim().strip_prefix("log") {
                let per_decade = if rest.is_empty() {
                    DEFAULT_PER_DECADE
                } else {
                    rest.parse().map_err(|_| bad("bad points per decade"))?
                };
                if start <= 0.0 || per_decade == 0 {
                    return Err(bad("log spacing needs a positive start and K >= 1"));
                }
                let decades = (stop / start).log10();
                let steps = ((decades * per_decade as f64).round() as usize).max(1);
                (0..=steps)
                    .map(|i| start * (stop / start).powf(i as f64 / steps as f64))
                    .collect()
            } else {
                let step = num(how)?;
                if !(step > 0.0) {
                    return Err(bad("step must be positive"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=count).map(|i| start + i as f64 * step).collect()
            }
        }
        _ => {
            return Err(bad(
                "expected `v`, `a,b,c`, `start:stop:step` or `start:stop:log`",
            ))
        }
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("no finite values"));
    }
    Ok(values)
}

/// Integer axis: values rounded to the nearest integer, duplicates dropped.
pub fn parse_int_range(spec: &str) -> Result<Vec<usize>, CliError> {
    let mut out: Vec<usize> = Vec::new();
    for v in parse_range(spec)? {
        if v < 0.0 {
            return Err(CliError::Usage(format!("range `{spec}`: negative count")));
        }
        let r = v.round() as usize;
        if out.last() != Some(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(0.21402565193083783, 6), 0.214026);
        assert_eq!(round_sig(1.1171334171803959e-6, 6), 1.11713e-6);
        assert_eq!(round_sig(0.1 + 0.2, 0), 0.1 + 0.2);
        assert_eq!(round_sig(12345678.0, 3), 12300000.0);
        let mut v = json!({"a": [0.123456789, 3], "b": {"c": 2.0}});
        round_value(&mut v, 3);
        assert_eq!(v, json!({"a": [0.123, 3], "b": {"c": 2.0}}));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1").unwrap(), vec![1.0]);
        assert_eq!(parse_range("0.5,1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(
            parse_range("1:2:0.25").unwrap(),
            vec![1.0, 1.25, 1.5, 1.75, 2.0]
        );
        assert_eq!(
            parse_int_range("1000:100000:log").unwrap(),
            vec![1000, 1778, 3162, 5623, 10000, 17783, 31623, 56234, 100000]
        );
        assert_eq!(
            parse_int_range("10:1000:log1").unwrap(),
            vec![10, 100, 1000]
        );
        assert!(parse_range("2:1:log").is_err());
        assert!(parse_range("0:10:log").is_err());
        assert!(parse_range("a,b").is_err());
        assert!(parse_range("1:2").is_err());
    }
}
