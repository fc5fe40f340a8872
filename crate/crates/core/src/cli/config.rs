use std::path::Path;

use crate::error::Error;

/// Read a flat `key = value` file. Blank lines and lines starting with `#`
/// are skipped; underscores in keys become dashes so `t_grid` and `t-grid`
/// both name `--t-grid`.
pub fn parse_config(path: &Path) -> Result<Vec<(String, String)>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Usage(m) => Error::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("line {}: expected key=value", n + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            return Err(Error::Usage(format!("line {}: empty key", n + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// `start:stop:step` to the grid `start, start + step, ...` up to `stop`
/// inclusive. Points are computed as `start + k step`, not accumulated.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    const MAX_POINTS: f64 = 1e6;
    let bad = || Error::Usage(format!("grid `{spec}` must be start:stop:step with step > 0 and stop >= start"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite() && stop >= start) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor();
    if n >= MAX_POINTS {
        return Err(Error::Usage(format!("grid `{spec}` has more than {MAX_POINTS} points")));
    }
    Ok((0..=n as usize).map(|k| start + k as f64 * step).collect())
}
