//! Fixed-correlation elliptical copulas.
//!
//! The diagonal is computed from the polar representation of the pair: with
//! `t` the upper `u`-quantile of the margin and `F̄_R` the survival function
//! of the radial part,
//!
//! ```text
//! C_ρ(u, u) = (1/π) ∫_{φ₀}^{π/2} F̄_R(t / cos φ) dφ,   φ₀ = (π/2 − asin ρ)/2,
//! ```
//!
//! for `u ≤ 1/2`; larger `u` follow from radial symmetry. For the Gaussian
//! `F̄_R(r) = exp(−r²/2)`, for the t copula `F̄_R(r) = (1 + r²/ν)^{−ν/2}`.
//! The integrand is smooth and positive, so the result keeps full relative
//! precision however deep in the tail `u` is.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::dist::{bv_elliptical_cdf, Dof, Marginal, StudentT};
use crate::error::{domain, Error, Result};
use crate::quad::integrate;

/// Correlations this close to ±1 take the Fréchet-bound path.
pub const RHO_EDGE: f64 = 1e-12;

const REL_TOL: f64 = 1e-12;
const MAX_SEGMENTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian,
    StudentT,
}

/// Gaussian copula or Student-t copula with `ν` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaFamily {
    kind: FamilyKind,
    nu: Dof,
}

impl CopulaFamily {
    pub fn gaussian() -> Self {
        Self {
            kind: FamilyKind::Gaussian,
            nu: Dof::Infinite,
        }
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return domain(format!("t copula needs finite nu > 0, got {nu}"));
        }
        Ok(Self {
            kind: FamilyKind::StudentT,
            nu: Dof::Finite(nu),
        })
    }

    /// Gaussian for `Dof::Infinite`, Student-t otherwise.
    pub fn from_dof(nu: Dof) -> Result<Self> {
        match nu {
            Dof::Infinite => Ok(Self::gaussian()),
            Dof::Finite(v) => Self::student_t(v),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dof(&self) -> Dof {
        self.nu
    }

    pub fn marginal(&self) -> Marginal {
        Marginal::new(self.nu).expect("family invariants guarantee a valid dof")
    }

    /// Precomputes the marginal threshold for level `u`.
    pub fn threshold(&self, u: f64) -> Result<TailThreshold> {
        TailThreshold::new(*self, u)
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.nu {
            Dof::Infinite => f.write_str("gauss"),
            Dof::Finite(nu) => write!(f, "t:{nu}"),
        }
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    /// Accepts `gauss` (or `gaussian`, `normal`) and `t:<nu>`; `t:inf` is
    /// the Gaussian.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gauss" | "gaussian" | "normal" => return Ok(Self::gaussian()),
            _ => {}
        }
        if let Some(nu) = s.strip_prefix("t:") {
            return Self::from_dof(nu.parse()?);
        }
        Err(Error::Input(format!(
            "unknown copula family '{s}' (expected 'gauss' or 't:<nu>')"
        )))
    }
}

/// A tail level `u` with its marginal quantile, shared across correlations.
#[derive(Debug, Clone, Copy)]
pub struct TailThreshold {
    family: CopulaFamily,
    u: f64,
    /// Upper `min(u, 1 − u)`-quantile of the margin, `t ≥ 0`.
    t: f64,
}

impl TailThreshold {
    pub fn new(family: CopulaFamily, u: f64) -> Result<Self> {
        if !(u > 0.0 && u <= 1.0) {
            return domain(format!("tail level must lie in (0, 1], got {u}"));
        }
        let lower = if u > 0.5 { 1.0 - u } else { u };
        let t = if lower > 0.0 {
            -family.marginal().quantile(lower)
        } else {
            f64::INFINITY
        };
        Ok(Self { family, u, t })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// Upper marginal quantile `F⁻¹(1 − min(u, 1 − u))`.
    pub fn quantile(&self) -> f64 {
        self.t
    }

    /// `C_ρ(u, u)`.
    pub fn diagonal(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        let u = self.u;
        if u == 1.0 {
            return Ok(1.0);
        }
        if rho >= 1.0 - RHO_EDGE {
            return Ok(u);
        }
        if rho <= -1.0 + RHO_EDGE {
            return Ok((2.0 * u - 1.0).max(0.0));
        }
        let c = self.lower_diagonal(rho);
        if u > 0.5 {
            Ok((2.0 * u - 1.0 + c).min(u))
        } else {
            Ok(c.min(u))
        }
    }

    /// `λ_ρ(u) = C_ρ(u, u)/u`.
    pub fn penultimate_lambda(&self, rho: f64) -> Result<f64> {
        Ok((self.diagonal(rho)? / self.u).clamp(0.0, 1.0))
    }

    fn lower_diagonal(&self, rho: f64) -> f64 {
        let t = self.t;
        let phi0 = 0.5 * (FRAC_PI_2 - rho.asin());
        if t == 0.0 {
            return (FRAC_PI_2 - phi0) / PI;
        }
        let integral = match self.family.nu {
            Dof::Infinite => {
                let h = 0.5 * t * t;
                integrate(
                    |phi: f64| {
                        let tan = phi.tan();
                        (-h * (1.0 + tan * tan)).exp()
                    },
                    phi0,
                    FRAC_PI_2,
                    REL_TOL,
                    1e-300,
                    MAX_SEGMENTS,
                )
            }
            Dof::Finite(nu) => {
                let s = t * t / nu;
                integrate(
                    |phi: f64| {
                        let c = phi.cos();
                        (-0.5 * nu * (s / (c * c)).ln_1p()).exp()
                    },
                    phi0,
                    FRAC_PI_2,
                    REL_TOL,
                    1e-300,
                    MAX_SEGMENTS,
                )
            }
        };
        integral.value / PI
    }

    /// `λ_ρ(u) − λ_{ν,ρ}` for the t copula, computed without cancellation.
    ///
    /// With `ε = ν/t²`, `k(φ) = cos^ν φ` and
    /// `m(φ) = 1 − (1 + ε cos²φ)^{−ν/2}`, split `[0, π/2]` at `φ₀` into
    /// `K₀' = ∫_0^{φ₀} k`, `K₁ = ∫_{φ₀}^{π/2} k` and likewise `M₀'`, `M₁` for
    /// `k·m`. Then `λ_ρ(u) − λ_{ν,ρ} = (K₁M₀' − K₀'M₁) / ((K₀ − M₀)K₀)`.
    /// Only valid for `u ≤ 1/2`.
    pub fn penultimate_excess(&self, rho: f64) -> Result<f64> {
        let nu = self.family.nu.finite_or_err("penultimate_excess")?;
        check_rho(rho)?;
        if self.u > 0.5 {
            return domain("penultimate_excess requires u <= 1/2");
        }
        if rho >= 1.0 - RHO_EDGE {
            return Ok(0.0);
        }
        if rho <= -1.0 + RHO_EDGE {
            return Ok(0.0);
        }
        let phi0 = 0.5 * (FRAC_PI_2 - rho.asin());
        let eps = nu / (self.t * self.t);
        let k = |phi: f64| phi.cos().powf(nu);
        let km = |phi: f64| {
            let c = phi.cos();
            let m = -(-0.5 * nu * (eps * c * c).ln_1p()).exp_m1();
            c.powf(nu) * m
        };
        let int = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| integrate(f, a, b, 1e-13, 1e-300, MAX_SEGMENTS).value;
        let k0p = int(&k, 0.0, phi0);
        let k1 = int(&k, phi0, FRAC_PI_2);
        let m0p = int(&km, 0.0, phi0);
        let m1 = int(&km, phi0, FRAC_PI_2);
        let k0 = k0p + k1;
        let b = k0 - (m0p + m1);
        Ok((k1 * m0p - k0p * m1) / (b * k0))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return domain(format!("correlation must lie in [-1, 1], got {rho}"));
    }
    Ok(())
}

/// `C_ρ(u, u)` for the conditional copula of `family`.
pub fn diagonal(u: f64, rho: f64, family: CopulaFamily) -> Result<f64> {
    family.threshold(u)?.diagonal(rho)
}

/// `λ_ρ(u) = C_ρ(u, u)/u`.
pub fn penultimate_lambda(u: f64, rho: f64, family: CopulaFamily) -> Result<f64> {
    family.threshold(u)?.penultimate_lambda(rho)
}

/// Limiting tail coefficient `λ_{ν,ρ} = 2 t_{ν+1}(−√(ν+1) √((1−ρ)/(1+ρ)))`.
///
/// The Gaussian copula has no tail dependence unless `ρ = 1`. At `ρ = −1`
/// the t value is the limit 0.
pub fn limiting_lambda(rho: f64, family: CopulaFamily) -> Result<f64> {
    check_rho(rho)?;
    match family.nu {
        Dof::Infinite => Ok(if rho >= 1.0 { 1.0 } else { 0.0 }),
        Dof::Finite(nu) => {
            if rho >= 1.0 {
                return Ok(1.0);
            }
            if rho <= -1.0 {
                return Ok(0.0);
            }
            let x = -((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt();
            Ok((2.0 * StudentT::new(nu + 1.0)?.cdf(x)).min(1.0))
        }
    }
}

/// `C_ρ(u, v)` off the diagonal, used by likelihood-free diagnostics.
pub fn copula_cdf(u: f64, v: f64, rho: f64, family: CopulaFamily) -> Result<f64> {
    for p in [u, v] {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("copula arguments must lie in [0, 1], got {p}"));
        }
    }
    check_rho(rho)?;
    if u == 0.0 || v == 0.0 {
        return Ok(0.0);
    }
    if rho >= 1.0 - RHO_EDGE {
        return Ok(u.min(v));
    }
    if rho <= -1.0 + RHO_EDGE {
        return Ok((u + v - 1.0).max(0.0));
    }
    let m = family.marginal();
    let q = |p: f64| if p == 1.0 { f64::INFINITY } else { m.quantile(p) };
    bv_elliptical_cdf(q(u), q(v), rho, family)
}

/// `∫_0^{π/2} cos^ν φ dφ = √π Γ((ν+1)/2) / (2 Γ(ν/2 + 1))`.
#[cfg(test)]
fn cos_power_integral(nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    0.5 * PI.sqrt() * (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(nu: f64) -> CopulaFamily {
        CopulaFamily::student_t(nu).unwrap()
    }

    #[test]
    fn family_parsing() {
        assert_eq!("gauss".parse::<CopulaFamily>().unwrap(), CopulaFamily::gaussian());
        assert_eq!("t:5".parse::<CopulaFamily>().unwrap(), t(5.0));
        assert_eq!("t:inf".parse::<CopulaFamily>().unwrap(), CopulaFamily::gaussian());
        assert!("t:-1".parse::<CopulaFamily>().is_err());
        assert!("clayton".parse::<CopulaFamily>().is_err());
        assert_eq!(t(2.5).to_string(), "t:2.5");
    }

    #[test]
    fn frechet_boundaries() {
        for fam in [CopulaFamily::gaussian(), t(3.0)] {
            for u in [1e-9, 0.2, 0.5, 0.7, 1.0] {
                assert_eq!(diagonal(u, 1.0, fam).unwrap(), u);
                assert_eq!(diagonal(u, -1.0, fam).unwrap(), (2.0 * u - 1.0).max(0.0));
            }
        }
        assert!(diagonal(0.0, 0.2, t(3.0)).is_err());
        assert!(diagonal(1.2, 0.2, t(3.0)).is_err());
        assert!(diagonal(0.2, 1.2, t(3.0)).is_err());
    }

    #[test]
    fn independence_diagonal() {
        let g = CopulaFamily::gaussian();
        assert!((diagonal(0.01, 0.0, g).unwrap() / 1e-4 - 1.0).abs() < 1e-12);
        for u in [1e-10, 1e-5, 0.3, 0.5, 0.8] {
            assert!(
                (penultimate_lambda(u, 0.0, g).unwrap() / u - 1.0).abs() < 1e-11,
                "u={u}"
            );
        }
        for fam in [g, t(4.0)] {
            assert_eq!(penultimate_lambda(1.0, 0.3, fam).unwrap(), 1.0);
        }
    }

    #[test]
    fn diagonal_agrees_with_bivariate_cdf() {
        for fam in [CopulaFamily::gaussian(), t(1.0), t(3.5), t(20.0)] {
            let m = fam.marginal();
            for u in [1e-6, 0.01, 0.3, 0.5, 0.9] {
                for rho in [-0.8, -0.2, 0.0, 0.5, 0.95] {
                    let q = m.quantile(u);
                    let via_cdf = bv_elliptical_cdf(q, q, rho, fam).unwrap();
                    let via_polar = diagonal(u, rho, fam).unwrap();
                    let tol = 1e-9 * via_cdf.max(1e-300) + 1e-14;
                    assert!(
                        (via_cdf - via_polar).abs() <= tol,
                        "{fam} u={u} rho={rho}: {via_cdf} vs {via_polar}"
                    );
                }
            }
        }
    }

    #[test]
    fn limiting_lambda_closed_forms() {
        for nu in [0.5, 1.0, 5.0, 100.0] {
            assert_eq!(limiting_lambda(1.0, t(nu)).unwrap(), 1.0);
            assert_eq!(limiting_lambda(-1.0, t(nu)).unwrap(), 0.0);
        }
        // 2 t₂(−√2) = 1 − 1/√2
        let v = limiting_lambda(0.0, t(1.0)).unwrap();
        assert!((v - (1.0 - 0.5f64.sqrt())).abs() < 1e-14);
        assert!((v - 0.29289).abs() < 1e-5);
        assert_eq!(limiting_lambda(0.5, CopulaFamily::gaussian()).unwrap(), 0.0);
        assert_eq!(limiting_lambda(1.0, CopulaFamily::gaussian()).unwrap(), 1.0);
    }

    #[test]
    fn limiting_lambda_equals_cos_power_ratio() {
        // λ_{ν,ρ} = ∫_{φ₀}^{π/2} cos^ν / ∫_0^{π/2} cos^ν
        for nu in [1.0, 2.5, 7.0] {
            for rho in [-0.6, 0.0, 0.5, 0.9] {
                let phi0 = 0.5 * (FRAC_PI_2 - f64::asin(rho));
                let k1 = integrate(|p: f64| p.cos().powf(nu), phi0, FRAC_PI_2, 1e-14, 0.0, 200).value;
                let ratio = k1 / cos_power_integral(nu);
                let v = limiting_lambda(rho, t(nu)).unwrap();
                assert!((ratio - v).abs() < 1e-12, "nu={nu} rho={rho}");
            }
        }
    }

    #[test]
    fn excess_matches_direct_difference() {
        for nu in [2.0, 5.0] {
            let fam = t(nu);
            for u in [0.1, 1e-3] {
                let th = fam.threshold(u).unwrap();
                for rho in [-0.5, 0.2, 0.5, 0.9] {
                    let direct = th.penultimate_lambda(rho).unwrap() - limiting_lambda(rho, fam).unwrap();
                    let excess = th.penultimate_excess(rho).unwrap();
                    assert!((direct - excess).abs() < 1e-10, "nu={nu} u={u} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn copula_cdf_margins() {
        let fam = t(4.0);
        assert!((copula_cdf(0.3, 1.0, 0.4, fam).unwrap() - 0.3).abs() < 1e-10);
        assert_eq!(copula_cdf(0.0, 0.4, 0.4, fam).unwrap(), 0.0);
        let d = diagonal(0.2, 0.4, fam).unwrap();
        assert!((copula_cdf(0.2, 0.2, 0.4, fam).unwrap() - d).abs() < 1e-10);
    }
}
