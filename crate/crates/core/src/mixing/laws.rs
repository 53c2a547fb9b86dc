use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;

use super::{tanh_normal_mean, MixingLaw, WeightedNodes};
use crate::dist::Normal;
use crate::error::{Error, Result};
use crate::quad::{gauss_hermite, gauss_legendre, CompensatedSum};
use crate::sim::{open_uniform, ScarParams};

/// Largest double below one; keeps tanh draws inside the open interval.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn check_corr(rho: f64, what: &str) -> Result<()> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(Error::Domain(format!("{what}: correlation {rho} outside [-1, 1]")));
    }
    Ok(())
}

/// Shortest decimal that round-trips.
fn num(x: f64) -> String {
    format!("{x}")
}

/// Degenerate law at a single correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    rho: f64,
}

impl PointMass {
    pub fn new(rho: f64) -> Result<Self> {
        check_corr(rho, "point mass")?;
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl MixingLaw for PointMass {
    fn name(&self) -> &'static str {
        "point"
    }

    fn spec(&self) -> String {
        format!("point:{}", num(self.rho))
    }

    fn mean(&self) -> f64 {
        self.rho
    }

    fn nodes(&self, _n: usize) -> WeightedNodes {
        WeightedNodes::single(self.rho)
    }

    fn max_order(&self) -> usize {
        1
    }

    fn is_discrete(&self) -> bool {
        true
    }

    fn support(&self) -> (f64, f64) {
        (self.rho, self.rho)
    }

    fn mass_at_one(&self) -> f64 {
        if self.rho == 1.0 {
            1.0
        } else {
            0.0
        }
    }

    fn draw(&self, _rng: &mut ChaCha8Rng) -> f64 {
        self.rho
    }
}

/// Uniform law on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformInterval {
    lo: f64,
    hi: f64,
}

impl UniformInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        check_corr(lo, "uniform interval")?;
        check_corr(hi, "uniform interval")?;
        if !(lo < hi) {
            return Err(Error::Domain(format!(
                "uniform interval needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl MixingLaw for UniformInterval {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn spec(&self) -> String {
        format!("uniform:{},{}", num(self.lo), num(self.hi))
    }

    fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Gauss–Legendre mapped to `[lo, hi]`.
    fn nodes(&self, n: usize) -> WeightedNodes {
        let rule = gauss_legendre(n.max(1));
        let (c, h) = (0.5 * (self.hi + self.lo), 0.5 * (self.hi - self.lo));
        let nodes = rule.nodes.iter().map(|x| c + h * x).collect();
        let weights = rule.weights.iter().map(|w| 0.5 * w).collect();
        WeightedNodes::new(nodes, weights)
    }

    /// Gauss–Legendre in `θ` after `ρ = lo + (hi − lo)(1 − cos πθ)/2`.
    ///
    /// `λ_ρ(u)` behaves like `√(1 − ρ)` next to `ρ = 1` (and similarly at
    /// `ρ = −1`); the cosine map turns that into a smooth function of `θ`, so
    /// the rule converges geometrically instead of like `n^{-3}`.
    fn tail_nodes(&self, n: usize) -> WeightedNodes {
        let rule = gauss_legendre(n.max(1));
        let span = self.hi - self.lo;
        let mut nodes = Vec::with_capacity(rule.len());
        let mut weights = Vec::with_capacity(rule.len());
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let theta = 0.5 * (x + 1.0);
            // 1 − cos πθ = 2 sin²(πθ/2), which avoids cancellation near θ = 0.
            let s = (0.5 * PI * theta).sin();
            let c = (0.5 * PI * (1.0 - theta)).sin();
            let rho = if theta <= 0.5 {
                self.lo + span * s * s
            } else {
                self.hi - span * c * c
            };
            nodes.push(rho);
            // dρ/dθ / span = (π/2) sin πθ; the θ-rule weight is w/2.
            weights.push(0.5 * w * 0.5 * PI * (PI * theta).sin());
        }
        WeightedNodes::new(nodes, weights)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.lo + (self.hi - self.lo) * open_uniform(rng)
    }
}

/// Stationary law of `ρ = tanh(γ)` for the Gaussian AR(1) `γ` of a SCAR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScarStationary {
    params: ScarParams,
}

impl ScarStationary {
    pub fn new(params: ScarParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> ScarParams {
        self.params
    }
}

impl MixingLaw for ScarStationary {
    fn name(&self) -> &'static str {
        "scar"
    }

    fn spec(&self) -> String {
        let p = self.params;
        format!("scar:{},{},alpha={}", num(p.beta), num(p.sigma), num(p.alpha))
    }

    fn mean(&self) -> f64 {
        tanh_normal_mean(self.params.stationary_mean(), self.params.stationary_sd())
    }

    /// Gauss–Hermite in `γ`, mapped through `tanh`.
    fn nodes(&self, n: usize) -> WeightedNodes {
        let rule = gauss_hermite(n.clamp(1, self.max_order()));
        let (m, s) = (self.params.stationary_mean(), self.params.stationary_sd());
        let nodes = rule
            .nodes
            .iter()
            .map(|z| (m + s * z).tanh().clamp(-BELOW_ONE, BELOW_ONE))
            .collect();
        WeightedNodes::new(nodes, rule.weights.clone())
    }

    /// Hermite rules above this order overflow in the three-term recurrence.
    fn max_order(&self) -> usize {
        256
    }

    fn support(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z = Normal.quantile(open_uniform(rng));
        let g = self.params.stationary_mean() + self.params.stationary_sd() * z;
        g.tanh().clamp(-BELOW_ONE, BELOW_ONE)
    }

    fn scar(&self) -> Option<ScarParams> {
        Some(self.params)
    }
}

/// Empirical law putting equal mass on each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    samples: Vec<f64>,
    source: Option<String>,
}

impl Empirical {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical mixing law needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|r| !(r.abs() < 1.0)) {
            return Err(Error::Domain(format!("empirical correlation {bad} outside (-1, 1)")));
        }
        Ok(Self { samples, source: None })
    }

    /// Records the file the samples came from, used in [`MixingLaw::spec`].
    pub fn with_source(mut self, path: impl Into<String>) -> Self {
        self.source = Some(path.into());
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

impl MixingLaw for Empirical {
    fn name(&self) -> &'static str {
        "empirical"
    }

    fn spec(&self) -> String {
        match &self.source {
            Some(p) => format!("empirical:{p}"),
            None => format!("empirical:<{} samples>", self.samples.len()),
        }
    }

    fn mean(&self) -> f64 {
        let s: CompensatedSum = self.samples.iter().copied().collect();
        s.value() / self.samples.len() as f64
    }

    fn nodes(&self, _n: usize) -> WeightedNodes {
        let w = 1.0 / self.samples.len() as f64;
        WeightedNodes {
            nodes: self.samples.clone(),
            weights: vec![w; self.samples.len()],
        }
    }

    fn max_order(&self) -> usize {
        1
    }

    fn is_discrete(&self) -> bool {
        true
    }

    fn support(&self) -> (f64, f64) {
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let k = ((open_uniform(rng) * self.samples.len() as f64) as usize).min(self.samples.len() - 1);
        self.samples[k]
    }
}
