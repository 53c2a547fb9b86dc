//! Mixing laws `μ` for the random correlation.
//!
//! Every law implements [`MixingLaw`]; [`MixingDistribution`] is a cheap,
//! clonable handle around one. New laws plug into the textual grammar
//! through [`MixingRegistry`].

mod laws;
mod registry;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::quad::{brent_root, gauss_hermite, CompensatedSum};
use crate::sim::ScarParams;

pub use laws::{Empirical, PointMass, ScarStationary, UniformInterval};
pub use registry::{MixingParser, MixingRegistry};

/// Discretization of `∫ f(ρ) μ(dρ)` as `Σ wᵢ f(ρᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNodes {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedNodes {
    /// Builds a rule, dropping zero weights and renormalizing to one.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(nodes.len(), weights.len());
        let (nodes, weights): (Vec<f64>, Vec<f64>) = nodes.into_iter().zip(weights).filter(|&(_, w)| w > 0.0).unzip();
        let total: CompensatedSum = weights.iter().copied().collect();
        let total = total.value();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self { nodes, weights }
    }

    pub fn single(rho: f64) -> Self {
        Self {
            nodes: vec![rho],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ f(ρᵢ)` with compensated summation.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut sum = CompensatedSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum.add(w * f(x));
        }
        sum.value()
    }

    /// Fallible variant of [`integrate`](Self::integrate).
    pub fn try_integrate(&self, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut sum = CompensatedSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum.add(w * f(x)?);
        }
        Ok(sum.value())
    }
}

/// A probability law for the correlation parameter on `[−1, 1]`.
pub trait MixingLaw: Send + Sync + fmt::Debug {
    /// Registry prefix, e.g. `"uniform"`.
    fn name(&self) -> &'static str;

    /// Canonical textual form, parseable by the default registry.
    fn spec(&self) -> String;

    /// `∫ ρ μ(dρ)`.
    fn mean(&self) -> f64;

    /// Quadrature rule of order `n` (or the exact atoms for discrete laws).
    fn nodes(&self, n: usize) -> WeightedNodes;

    /// Rule used for tail integrals `∫ λ_ρ(u) μ(dρ)`. Defaults to
    /// [`nodes`](Self::nodes); laws whose integrands have endpoint
    /// singularities may override it with a better-suited rule.
    fn tail_nodes(&self, n: usize) -> WeightedNodes {
        self.nodes(n)
    }

    /// Largest useful order for [`tail_nodes`](Self::tail_nodes).
    fn max_order(&self) -> usize {
        4096
    }

    /// True when [`nodes`](Self::nodes) is exact for every integrand.
    fn is_discrete(&self) -> bool {
        false
    }

    /// Infimum and supremum of the support.
    fn support(&self) -> (f64, f64);

    /// `μ({1})`.
    fn mass_at_one(&self) -> f64 {
        0.0
    }

    /// One i.i.d. draw.
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64;

    /// SCAR parameters when the law is a SCAR stationary law.
    fn scar(&self) -> Option<ScarParams> {
        None
    }
}

/// Shared handle to a [`MixingLaw`].
#[derive(Clone)]
pub struct MixingDistribution(Arc<dyn MixingLaw>);

impl MixingDistribution {
    pub fn from_law(law: impl MixingLaw + 'static) -> Self {
        Self(Arc::new(law))
    }

    pub fn point(rho: f64) -> Result<Self> {
        Ok(Self::from_law(PointMass::new(rho)?))
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Ok(Self::from_law(UniformInterval::new(lo, hi)?))
    }

    pub fn scar(params: ScarParams) -> Self {
        Self::from_law(ScarStationary::new(params))
    }

    /// SCAR stationary law with `α` chosen so the mean correlation is `mean`.
    pub fn scar_with_mean(mean: f64, beta: f64, sigma: f64) -> Result<Self> {
        let alpha = solve_alpha_for_mean(mean, beta, sigma)?;
        Ok(Self::scar(ScarParams::new(alpha, beta, sigma)?))
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        Ok(Self::from_law(Empirical::new(samples)?))
    }

    pub fn law(&self) -> &dyn MixingLaw {
        self.0.as_ref()
    }
}

impl std::ops::Deref for MixingDistribution {
    type Target = dyn MixingLaw;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl fmt::Debug for MixingDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for MixingDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.spec())
    }
}

impl FromStr for MixingDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MixingRegistry::builtin().parse(s)
    }
}

/// `E[ρ]` under `mu`.
pub fn mean_correlation(mu: &MixingDistribution) -> f64 {
    mu.mean()
}

/// `E[tanh(γ)]` for `γ ~ N(m, s²)`.
pub(crate) fn tanh_normal_mean(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        return m.tanh();
    }
    let rule = gauss_hermite(128);
    let mut sum = CompensatedSum::new();
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        sum.add(w * (m + s * z).tanh());
    }
    sum.value()
}

/// Intercept `α` of the SCAR recursion that gives stationary mean
/// correlation `target`.
pub fn solve_alpha_for_mean(target: f64, beta: f64, sigma: f64) -> Result<f64> {
    let params = ScarParams::new(0.0, beta, sigma)?;
    if !(target.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "target mean correlation must lie in (-1, 1), got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let s = params.stationary_sd();
    let goal = target.abs();
    let g = |m: f64| tanh_normal_mean(m, s) - goal;
    // The mean is increasing in m and exceeds tanh's value at the centre
    // less than the spread, so start from atanh and widen.
    let m0 = goal.atanh();
    let (mut lo, mut hi) = (0.0, m0.max(1e-3));
    let mut tries = 0;
    while g(hi) < 0.0 {
        lo = hi;
        hi = 2.0 * hi + s;
        tries += 1;
        if tries > 60 || !hi.is_finite() {
            return Err(Error::Numeric(format!(
                "could not bracket the SCAR intercept for mean {target}"
            )));
        }
    }
    let m = brent_root(g, lo, hi, 1e-15, 200)?;
    let check = tanh_normal_mean(m, s) - goal;
    if check.abs() > 1e-10 {
        return Err(Error::Numeric(format!(
            "SCAR intercept solve missed target by {check:e}"
        )));
    }
    let alpha = m * (1.0 - beta);
    Ok(if target < 0.0 { -alpha } else { alpha })
}

/// Quadrature rule of order `n` for `mu`.
pub fn quadrature_nodes(mu: &MixingDistribution, n: usize) -> Result<WeightedNodes> {
    if n == 0 {
        return Err(Error::Domain("quadrature order must be at least 1".into()));
    }
    Ok(mu.nodes(n))
}

/// `n` i.i.d. draws from `mu`, reproducible for a given `seed`.
pub fn sample_rho(mu: &MixingDistribution, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| mu.draw(&mut rng)).collect()
}
