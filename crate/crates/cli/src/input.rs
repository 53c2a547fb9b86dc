use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tailmix::fit::pseudo_observations;
use tailmix::CopulaSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Columns {
    /// Raw observations, rank transformed before fitting.
    Returns,
    /// Pseudo-observations already in `(0, 1)`.
    Uniform,
}

impl fmt::Display for Columns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Columns::Returns => "returns",
            Columns::Uniform => "u,v",
        })
    }
}

/// Reads the first two columns of a CSV. A header of exactly `u,v` marks
/// pseudo-observations; any other header, or none, means raw data.
pub fn read_pairs(path: &Path) -> Result<(CopulaSample, Columns)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut kind = Columns::Returns;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if !seen_data && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            if fields.len() >= 2 && fields[0] == "u" && fields[1] == "v" {
                kind = Columns::Uniform;
            }
            seen_data = true;
            continue;
        }
        seen_data = true;
        if fields.len() < 2 {
            bail!("{}: expected two comma-separated columns, got '{t}'", at());
        }
        let parse = |s: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => bail!("{}: '{s}' is not a finite number", at()),
            }
        };
        xs.push(parse(fields[0])?);
        ys.push(parse(fields[1])?);
    }
    let n = xs.len();
    let sample = match kind {
        Columns::Returns => pseudo_observations(&xs, &ys)?,
        Columns::Uniform => {
            if n < tailmix::fit::MIN_SAMPLE {
                bail!(
                    "{}: need at least {} pairs, got {n}",
                    path.display(),
                    tailmix::fit::MIN_SAMPLE
                );
            }
            CopulaSample::new(
                xs.into_iter().zip(ys).collect(),
                None,
                format!("u,v from {}", path.display()),
            )
            .with_context(|| format!("{}: pseudo-observations must lie in (0, 1)", path.display()))?
        }
    };
    Ok((sample, kind))
}
