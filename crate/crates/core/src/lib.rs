//! Tail dependence of correlation mixtures of bivariate elliptical copulas.
//!
//! The copula of `(X, Y) = (S⁻¹Z₁, S⁻¹(ρZ₁ + √(1−ρ²)Z₂))` with a random
//! correlation `ρ ~ μ` is the mixture `C(u, v) = ∫ C_ρ(u, v) μ(dρ)`. This
//! crate evaluates the penultimate coefficient `λ(u) = C(u, u)/u` and its
//! limit `λ` for Gaussian and Student-t conditional copulas, the second
//! order expansion of `λ(u)` for t mixtures, Ledford–Tawn regressions on
//! computed tail curves, Monte Carlo sampling from the mixtures and a static
//! t-copula estimator together with its bias study under stochastic
//! correlation.
//!
//! Module map:
//!
//! * [`dist`]: normal, Student-t and chi-square primitives, bivariate CDFs.
//! * [`copula`]: fixed-ρ diagonal, `λ_ρ(u)` and the closed-form `λ_{ν,ρ}`.
//! * [`mixing`]: mixing laws for ρ behind the [`mixing::MixingLaw`] trait,
//!   plus a name-keyed registry used by the command line.
//! * [`tails`]: mixture tail quantities, expansion constants, η regression.
//! * [`sim`]: SCAR paths and seeded copula samples.
//! * [`fit`]: pseudo-observations, static t-copula fit, bias study.

pub mod copula;
pub mod dist;
mod error;
pub mod fit;
pub mod mixing;
pub mod output;
pub mod quad;
pub mod sim;
pub mod tails;

pub use copula::{CopulaFamily, FamilyKind};
pub use dist::Dof;
pub use error::{Error, Result};
pub use mixing::{MixingDistribution, MixingLaw, MixingRegistry, WeightedNodes};
pub use sim::{CopulaSample, SamplingMode, ScarParams};
pub use tails::{EtaEstimate, ExpansionConstants, TailCurve};
