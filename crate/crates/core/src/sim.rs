//! SCAR correlation paths and seeded sampling from mixture copulas.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, stream)`. Pairs
//! are generated in fixed-size chunks, each chunk on its own stream, so the
//! output is the same for any number of worker threads. All variates are
//! produced by inverting distribution functions at open-interval uniforms.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copula::CopulaFamily;
use crate::dist::{Dof, GammaShape, Marginal, Normal};
use crate::error::{Error, Result};
use crate::mixing::MixingDistribution;
use crate::output::fmt_f64;

/// Pairs per independently seeded chunk.
pub const CHUNK: usize = 1 << 16;

/// Stream index reserved for the correlation path in path mode.
const PATH_STREAM: u64 = u64::MAX;

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Parameters of `γ_t = α + β γ_{t−1} + σ ε_t`, `ρ_t = tanh(γ_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScarParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl ScarParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("SCAR alpha must be finite, got {alpha}")));
        }
        if !(beta.abs() < 1.0) {
            return Err(Error::Domain(format!("SCAR beta must satisfy |beta| < 1, got {beta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("SCAR sigma must be positive, got {sigma}")));
        }
        Ok(Self { alpha, beta, sigma })
    }

    /// Mean of the stationary law of `γ`, `α/(1 − β)`.
    pub fn stationary_mean(&self) -> f64 {
        self.alpha / (1.0 - self.beta)
    }

    /// Standard deviation of the stationary law of `γ`, `σ/√(1 − β²)`.
    pub fn stationary_sd(&self) -> f64 {
        self.sigma / (1.0 - self.beta * self.beta).sqrt()
    }
}

/// How correlations are drawn for [`sample_mixture`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Independent draws from the mixing law.
    #[default]
    Iid,
    /// Consecutive values of one simulated SCAR path (SCAR laws only).
    Path,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Iid => "iid",
            SamplingMode::Path => "path",
        })
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(SamplingMode::Iid),
            "path" => Ok(SamplingMode::Path),
            _ => Err(Error::Input(format!(
                "sampling mode must be 'iid' or 'path', got '{s}'"
            ))),
        }
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval `(0, 1)` with 53 random bits.
#[inline]
pub fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal.quantile(open_uniform(rng))
}

fn scar_latent_with(params: ScarParams, length: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return out;
    }
    let mut g = params.stationary_mean() + params.stationary_sd() * std_normal(rng);
    out.push(g);
    for _ in 1..length {
        g = params.alpha + params.beta * g + params.sigma * std_normal(rng);
        out.push(g);
    }
    out
}

/// Latent path `γ_0, …, γ_{length−1}` with `γ_0` from the stationary law.
pub fn simulate_scar_latent(params: ScarParams, length: usize, seed: u64) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::Domain("SCAR path length must be at least 1".into()));
    }
    Ok(scar_latent_with(params, length, &mut stream_rng(seed, PATH_STREAM)))
}

/// Correlation path `ρ_t = tanh(γ_t)`.
pub fn simulate_scar_path(params: ScarParams, length: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(simulate_scar_latent(params, length, seed)?
        .into_iter()
        .map(|g| g.tanh().clamp(-BELOW_ONE, BELOW_ONE))
        .collect())
}

/// Draws `(X, Y)` pairs of one family and maps them to the unit square.
#[derive(Debug, Clone, Copy)]
pub struct PairSampler {
    marginal: Marginal,
    radial: Option<(f64, GammaShape)>,
}

impl PairSampler {
    pub fn new(family: CopulaFamily) -> Self {
        let radial = match family.dof() {
            Dof::Infinite => None,
            Dof::Finite(nu) => Some((nu, GammaShape::new(0.5 * nu).expect("valid dof"))),
        };
        Self {
            marginal: family.marginal(),
            radial,
        }
    }

    /// `(X, Y) = S⁻¹(Z₁, ρZ₁ + √(1−ρ²)Z₂)` with `S = √(χ²_ν/ν)`, or `S = 1`
    /// for the Gaussian.
    #[inline]
    pub fn draw_xy(&self, rho: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let z1 = std_normal(rng);
        let z2 = std_normal(rng);
        let y = rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2;
        match self.radial {
            None => (z1, y),
            Some((nu, gamma)) => {
                let p = open_uniform(rng);
                let w = 2.0 * gamma.quantile(p, 1.0 - p);
                let inv_s = (nu / w).sqrt();
                (z1 * inv_s, y * inv_s)
            }
        }
    }

    /// Copula pair `(F(X), F(Y))`, kept inside the open unit square.
    #[inline]
    pub fn draw(&self, rho: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let (x, y) = self.draw_xy(rho, rng);
        let f = |t: f64| self.marginal.cdf(t).clamp(f64::MIN_POSITIVE, BELOW_ONE);
        (f(x), f(y))
    }
}

/// One pair from the fixed-ρ copula of `family`.
pub fn sample_conditional_pair(rho: f64, family: CopulaFamily, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(PairSampler::new(family).draw(rho, rng))
}

/// Pairs in `(0, 1)²` with a description of how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSample {
    pub pairs: Vec<(f64, f64)>,
    pub seed: Option<u64>,
    pub provenance: String,
}

impl CopulaSample {
    pub fn new(pairs: Vec<(f64, f64)>, seed: Option<u64>, provenance: impl Into<String>) -> Result<Self> {
        if let Some(&(u, v)) = pairs
            .iter()
            .find(|&&(u, v)| !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0))
        {
            return Err(Error::Domain(format!(
                "copula sample point ({u}, {v}) outside (0, 1)^2"
            )));
        }
        Ok(Self {
            pairs,
            seed,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same sample with the coordinates exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(u, v)| (v, u)).collect(),
            seed: self.seed,
            provenance: self.provenance.clone(),
        }
    }

    /// `# provenance`, the `u,v` header, then one pair per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for line in self.provenance.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "u,v")?;
        for &(u, v) in &self.pairs {
            writeln!(w, "{},{}", fmt_f64(u), fmt_f64(v))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut pairs = Vec::new();
        let mut provenance = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if let Some(c) = t.strip_prefix('#') {
                provenance.push(c.trim().to_string());
                continue;
            }
            if t.is_empty() || (pairs.is_empty() && t.starts_with(|c: char| c.is_ascii_alphabetic())) {
                continue;
            }
            let bad = || Error::Input(format!("{}:{}: expected 'u,v', got '{t}'", path.display(), i + 1));
            let (a, b) = t.split_once(',').ok_or_else(bad)?;
            let u: f64 = a.trim().parse().map_err(|_| bad())?;
            let v: f64 = b.trim().parse().map_err(|_| bad())?;
            if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
                return Err(Error::Input(format!(
                    "{}:{}: pair ({u}, {v}) outside (0, 1)^2",
                    path.display(),
                    i + 1
                )));
            }
            pairs.push((u, v));
        }
        Ok(Self {
            pairs,
            seed: None,
            provenance: provenance.join("\n"),
        })
    }
}

fn correlations_for_mode(n: usize, mu: &MixingDistribution, seed: u64, mode: SamplingMode) -> Result<Option<Vec<f64>>> {
    match mode {
        SamplingMode::Iid => Ok(None),
        SamplingMode::Path => {
            let params = mu
                .scar()
                .ok_or_else(|| Error::Domain(format!("path sampling needs a SCAR mixing law, got {}", mu.spec())))?;
            Ok(Some(simulate_scar_path(params, n, seed)?))
        }
    }
}

/// `n` pairs from the mixture copula `∫ C_ρ μ(dρ)`.
///
/// In [`SamplingMode::Path`] the correlations are consecutive values of one
/// SCAR path started in its stationary law.
pub fn sample_mixture(
    n: usize,
    family: CopulaFamily,
    mu: &MixingDistribution,
    seed: u64,
    mode: SamplingMode,
) -> Result<CopulaSample> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let path = correlations_for_mode(n, mu, seed, mode)?;
    let sampler = PairSampler::new(family);
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let start = k * CHUNK;
            let end = (start + CHUNK).min(n);
            (start..end)
                .map(|i| {
                    let rho = match &path {
                        Some(p) => p[i],
                        None => mu.draw(&mut rng),
                    };
                    sampler.draw(rho, &mut rng)
                })
                .collect()
        })
        .collect();
    let pairs = parts.concat();
    let provenance = format!("family={family} mix={} mode={mode} n={n} seed={seed}", mu.spec());
    Ok(CopulaSample {
        pairs,
        seed: Some(seed),
        provenance,
    })
}

/// Tail counts behind an empirical `λ̂(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalLambda {
    /// `joint/marginal`, NaN when no point has `U < u`.
    pub value: f64,
    /// `#{U < u, V < u}`.
    pub joint: usize,
    /// `#{U < u}`.
    pub marginal: usize,
}

impl EmpiricalLambda {
    fn from_counts(joint: usize, marginal: usize) -> Self {
        let value = if marginal == 0 {
            f64::NAN
        } else {
            joint as f64 / marginal as f64
        };
        Self { value, joint, marginal }
    }

    pub fn is_defined(&self) -> bool {
        self.marginal > 0
    }

    /// Binomial standard error of the ratio at success probability `p`.
    pub fn std_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.marginal as f64).sqrt()
    }

    /// Binomial standard error at the estimate itself.
    pub fn std_error(&self) -> f64 {
        self.std_error_at(self.value)
    }
}

/// `#{U < u, V < u} / #{U < u}`; the value is NaN (and flagged) when the
/// conditioning set is empty.
pub fn empirical_lambda(sample: &CopulaSample, u: f64) -> Result<EmpiricalLambda> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("tail level must lie in (0, 1), got {u}")));
    }
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty copula sample".into()));
    }
    let mut joint = 0;
    let mut marginal = 0;
    for &(a, b) in &sample.pairs {
        if a < u {
            marginal += 1;
            if b < u {
                joint += 1;
            }
        }
    }
    Ok(EmpiricalLambda::from_counts(joint, marginal))
}

/// Monte Carlo tail counts for `n` mixture draws without storing them.
///
/// Uses the same streams as [`sample_mixture`], but compares `X` and `Y` with
/// the marginal quantile of `u` instead of transforming each draw.
pub fn mc_tail_counts(
    n: usize,
    family: CopulaFamily,
    mu: &MixingDistribution,
    u: f64,
    seed: u64,
    mode: SamplingMode,
) -> Result<EmpiricalLambda> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("tail level must lie in (0, 1), got {u}")));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let q = family.marginal().quantile(u);
    let path = correlations_for_mode(n, mu, seed, mode)?;
    let sampler = PairSampler::new(family);
    let chunks = n.div_ceil(CHUNK);
    let counts: Vec<(usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let start = k * CHUNK;
            let end = (start + CHUNK).min(n);
            let (mut joint, mut marginal) = (0, 0);
            for i in start..end {
                let rho = match &path {
                    Some(p) => p[i],
                    None => mu.draw(&mut rng),
                };
                let (x, y) = sampler.draw_xy(rho, &mut rng);
                if x < q {
                    marginal += 1;
                    if y < q {
                        joint += 1;
                    }
                }
            }
            (joint, marginal)
        })
        .collect();
    let joint = counts.iter().map(|c| c.0).sum();
    let marginal = counts.iter().map(|c| c.1).sum();
    Ok(EmpiricalLambda::from_counts(joint, marginal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_uniform_range() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..100_000 {
            let u = open_uniform(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn scar_params_validation() {
        assert!(ScarParams::new(0.0, 1.0, 0.1).is_err());
        assert!(ScarParams::new(0.0, 0.5, 0.0).is_err());
        let p = ScarParams::new(0.03, 0.97, 0.2).unwrap();
        assert!((p.stationary_mean() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_noise_path() {
        let p = ScarParams::new(0.0, 0.5, 1e-300).unwrap();
        let path = simulate_scar_path(p, 1000, 3).unwrap();
        assert!(path.iter().all(|&r| r.abs() < 1e-290));
        assert!(simulate_scar_path(p, 0, 3).is_err());
    }

    #[test]
    fn comonotone_pairs() {
        let mut rng = stream_rng(5, 0);
        for fam in [CopulaFamily::gaussian(), CopulaFamily::student_t(3.0).unwrap()] {
            for _ in 0..1000 {
                let (u, v) = sample_conditional_pair(1.0, fam, &mut rng).unwrap();
                assert_eq!(u, v);
            }
        }
    }

    #[test]
    fn empirical_lambda_flags_empty_set() {
        let s = CopulaSample::new(vec![(0.5, 0.5), (0.7, 0.2)], None, "").unwrap();
        let e = empirical_lambda(&s, 0.1).unwrap();
        assert!(!e.is_defined());
        assert!(e.value.is_nan());
        let e = empirical_lambda(&s, 0.6).unwrap();
        assert_eq!((e.joint, e.marginal, e.value), (1, 1, 1.0));
        assert!(empirical_lambda(&s, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mu = MixingDistribution::uniform(0.0, 1.0).unwrap();
        let s = sample_mixture(100, CopulaFamily::student_t(4.0).unwrap(), &mu, 9, SamplingMode::Iid).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        s.write_csv(std::fs::File::create(f.path()).unwrap()).unwrap();
        let back = CopulaSample::read_csv(f.path()).unwrap();
        assert_eq!(back.pairs, s.pairs);
        assert_eq!(back.provenance, s.provenance);
    }

    #[test]
    fn path_mode_requires_scar() {
        let mu = MixingDistribution::point(0.2).unwrap();
        assert!(sample_mixture(10, CopulaFamily::gaussian(), &mu, 1, SamplingMode::Path).is_err());
    }
}
