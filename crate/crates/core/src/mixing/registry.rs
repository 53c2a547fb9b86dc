use std::path::Path;
use std::sync::OnceLock;

use super::{Empirical, MixingDistribution};
use crate::error::{Error, Result};
use crate::sim::ScarParams;

/// Builds a law from the text after `<prefix>:`.
pub type MixingParser = fn(&str) -> Result<MixingDistribution>;

struct Entry {
    prefix: &'static str,
    usage: &'static str,
    parse: MixingParser,
}

/// Maps spec prefixes such as `point` or `scar` to constructors.
///
/// ```
/// use tailmix::MixingRegistry;
/// let mu = MixingRegistry::builtin().parse("uniform:0,1").unwrap();
/// assert_eq!(mu.mean(), 0.5);
/// ```
pub struct MixingRegistry {
    entries: Vec<Entry>,
}

impl MixingRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Registry with `point`, `uniform`, `scar` and `empirical`.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register("point", "point:<rho>", parse_point);
        r.register("uniform", "uniform:<lo>,<hi>", parse_uniform);
        r.register(
            "scar",
            "scar:<beta>,<sigma>,mean=<rho_bar> (or alpha=<alpha>)",
            parse_scar,
        );
        r.register("empirical", "empirical:<path>", parse_empirical);
        r
    }

    /// Shared instance of [`with_builtin`](Self::with_builtin).
    pub fn builtin() -> &'static Self {
        static REG: OnceLock<MixingRegistry> = OnceLock::new();
        REG.get_or_init(Self::with_builtin)
    }

    /// Adds or replaces the parser for `prefix`.
    pub fn register(&mut self, prefix: &'static str, usage: &'static str, parse: MixingParser) {
        self.entries.retain(|e| e.prefix != prefix);
        self.entries.push(Entry { prefix, usage, parse });
    }

    pub fn usages(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.usage).collect()
    }

    pub fn parse(&self, spec: &str) -> Result<MixingDistribution> {
        let spec = spec.trim();
        let (prefix, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match self.entries.iter().find(|e| e.prefix == prefix) {
            Some(e) => (e.parse)(rest).map_err(|err| match err {
                Error::Input(msg) => Error::Input(format!("{msg} (expected {})", e.usage)),
                other => other,
            }),
            None => Err(Error::Input(format!(
                "unknown mixing law '{prefix}'; expected one of: {}",
                self.usages().join(", ")
            ))),
        }
    }
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Input(format!("cannot parse {what} '{}'", s.trim())))
}

fn parse_point(rest: &str) -> Result<MixingDistribution> {
    MixingDistribution::point(number(rest, "rho")?)
}

fn parse_uniform(rest: &str) -> Result<MixingDistribution> {
    let parts: Vec<&str> = rest.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Input(format!("uniform needs two bounds, got '{rest}'")));
    }
    MixingDistribution::uniform(number(parts[0], "lo")?, number(parts[1], "hi")?)
}

fn parse_scar(rest: &str) -> Result<MixingDistribution> {
    let parts: Vec<&str> = rest.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Input(format!("scar needs three fields, got '{rest}'")));
    }
    let beta = number(parts[0], "beta")?;
    let sigma = number(parts[1], "sigma")?;
    let (key, value) = parts[2].split_once('=').ok_or_else(|| {
        Error::Input(format!(
            "scar third field must be mean=.. or alpha=.., got '{}'",
            parts[2]
        ))
    })?;
    match key.trim() {
        "mean" => MixingDistribution::scar_with_mean(number(value, "mean")?, beta, sigma),
        "alpha" => Ok(MixingDistribution::scar(ScarParams::new(
            number(value, "alpha")?,
            beta,
            sigma,
        )?)),
        other => Err(Error::Input(format!("unknown scar field '{other}'"))),
    }
}

fn parse_empirical(rest: &str) -> Result<MixingDistribution> {
    let path = rest.trim();
    if path.is_empty() {
        return Err(Error::Input("empirical needs a file path".into()));
    }
    let samples = read_correlations(Path::new(path))?;
    Ok(MixingDistribution::from_law(Empirical::new(samples)?.with_source(path)))
}

/// Reads one correlation per line (first CSV field). Blank lines, `#`
/// comments and a non-numeric header line are skipped.
pub(crate) fn read_correlations(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => {
                seen_data = true;
                out.push(v);
            }
            Err(_) if !seen_data && out.is_empty() => {
                seen_data = true; // header
            }
            Err(_) => {
                return Err(Error::Input(format!(
                    "{}:{}: cannot parse correlation '{field}'",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}
