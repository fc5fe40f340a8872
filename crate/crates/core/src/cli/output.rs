//! CSV and JSON emission with 17 significant digits.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::Error;

/// `x` with 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Rewrite every non-integer number in `v` with [`fmt_f64`].
pub fn with_full_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("is_f64");
            Value::Number(Number::from_str(&fmt_f64(x)).expect("finite float literal"))
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(with_full_precision).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, with_full_precision(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    let v = with_full_precision(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// One-line JSON for CSV header comments.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String, Error> {
    Ok(serde_json::to_string(&with_full_precision(serde_json::to_value(value)?))?)
}

/// Write `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// CSV writer: `#` comment lines, one header row, then rows.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn comment(&mut self, key: &str, value: &str) {
        self.text.push_str(&format!("# {key}: {value}\n"));
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: impl IntoIterator<Item = S>) {
        let cells: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -0.743033971150864712, 1e-300, 6.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn json_floats_rewritten_integers_kept() {
        let v = with_full_precision(json!({"a": 0.5, "n": 3, "xs": [0.25, null], "s": "x"}));
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(
            s,
            r#"{"a":5.0000000000000000e-1,"n":3,"s":"x","xs":[2.5000000000000000e-1,null]}"#
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.5));
    }
}
