//! Tail quantities of correlation mixtures.
//!
//! Mixture integrals `∫ f(ρ) μ(dρ)` start from a 64-point rule and double
//! the order until two successive values agree to `1e-9`, or the law's
//! maximal order is reached. Discrete laws are integrated exactly.

use std::io::Write;

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::copula::{limiting_lambda, CopulaFamily, FamilyKind};
use crate::dist::{chi_square_cdf, Dof};
use crate::error::{Error, Result};
use crate::mixing::MixingDistribution;
use crate::output::fmt_f64;

/// Starting quadrature order for mixture integrals.
pub const BASE_ORDER: usize = 64;
/// Agreement required between successive orders.
pub const ORDER_TOL: f64 = 1e-9;

/// Integrates `f` against `mu`, doubling the order until it settles.
pub fn mixture_integral<F>(mu: &MixingDistribution, tol: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if mu.is_discrete() {
        return mu.tail_nodes(1).try_integrate(&f);
    }
    let cap = mu.max_order().max(1);
    let mut n = BASE_ORDER.min(cap);
    let mut prev = mu.tail_nodes(n).try_integrate(&f)?;
    while n < cap {
        n = (2 * n).min(cap);
        let cur = mu.tail_nodes(n).try_integrate(&f)?;
        if (cur - prev).abs() <= tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

/// `C(u, u) = ∫ C_ρ(u, u) μ(dρ)`.
pub fn mixture_diagonal(u: f64, family: CopulaFamily, mu: &MixingDistribution) -> Result<f64> {
    Ok(u * mixture_penultimate_lambda(u, family, mu)?)
}

/// `λ(u) = ∫ λ_ρ(u) μ(dρ)`.
pub fn mixture_penultimate_lambda(u: f64, family: CopulaFamily, mu: &MixingDistribution) -> Result<f64> {
    let th = family.threshold(u)?;
    if u == 1.0 {
        return Ok(1.0);
    }
    let v = mixture_integral(mu, ORDER_TOL, |rho| th.penultimate_lambda(rho))?;
    Ok(v.clamp(0.0, 1.0))
}

/// `λ = ∫ λ_ρ μ(dρ)`; for the Gaussian this is the mass `μ({1})`.
pub fn mixture_limiting_lambda(family: CopulaFamily, mu: &MixingDistribution) -> Result<f64> {
    match family.kind() {
        FamilyKind::Gaussian => Ok(mu.mass_at_one()),
        FamilyKind::StudentT => {
            let v = mixture_integral(mu, 1e-12, |rho| limiting_lambda(rho, family))?;
            Ok(v.clamp(0.0, 1.0))
        }
    }
}

/// Constants of `λ(u) ≈ λ + γ u^{2/ν}` for a t mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConstants {
    pub nu: f64,
    /// `(ν/2)^{ν/2} / Γ(ν/2 + 1)`
    pub a_nu: f64,
    /// `(ν/2)² / (ν/2 + 1)`
    pub b_nu: f64,
    /// `E[Z₊^ν] = 2^{ν/2−1} Γ((ν+1)/2) / √π`
    pub ez_nu: f64,
    pub gamma: f64,
    pub lambda_limit: f64,
}

impl ExpansionConstants {
    /// `(a_ν E[Z₊^ν])^{−2/ν} b_ν (ν + 1)`, the factor multiplying
    /// `E[λ_{ν,ρ} − λ_{ν+2,ρ}]` in `γ`.
    pub fn scale(&self) -> f64 {
        expansion_scale(self.nu, self.a_nu, self.b_nu, self.ez_nu)
    }
}

fn a_nu(nu: f64) -> f64 {
    (0.5 * nu * (0.5 * nu).ln() - ln_gamma(0.5 * nu + 1.0)).exp()
}

fn b_nu(nu: f64) -> f64 {
    let h = 0.5 * nu;
    h * h / (h + 1.0)
}

fn ez_nu(nu: f64) -> f64 {
    ((0.5 * nu - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * (nu + 1.0))).exp() / std::f64::consts::PI.sqrt()
}

fn expansion_scale(nu: f64, a: f64, b: f64, ez: f64) -> f64 {
    (a * ez).powf(-2.0 / nu) * b * (nu + 1.0)
}

/// `a_ν`, `b_ν`, `E[Z₊^ν]`, `γ` and `λ` for the t(ν) mixture over `mu`.
pub fn expansion_constants(nu: Dof, mu: &MixingDistribution) -> Result<ExpansionConstants> {
    let nu = nu.finite_or_err("expansion_constants")?;
    let (a, b, ez) = (a_nu(nu), b_nu(nu), ez_nu(nu));
    let fam = CopulaFamily::student_t(nu)?;
    let fam2 = CopulaFamily::student_t(nu + 2.0)?;
    let diff = mixture_integral(mu, 1e-13, |rho| {
        Ok(limiting_lambda(rho, fam)? - limiting_lambda(rho, fam2)?)
    })?;
    Ok(ExpansionConstants {
        nu,
        a_nu: a,
        b_nu: b,
        ez_nu: ez,
        gamma: expansion_scale(nu, a, b, ez) * diff,
        lambda_limit: mixture_limiting_lambda(fam, mu)?,
    })
}

/// `λ + γ u^{2/ν}`.
pub fn expansion_lambda(u: f64, constants: &ExpansionConstants) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("expansion_lambda requires 0 < u < 1, got {u}")));
    }
    Ok(constants.lambda_limit + constants.gamma * u.powf(2.0 / constants.nu))
}

/// `λ(u) − λ` for a t mixture, computed without cancellation.
pub fn mixture_excess(u: f64, nu: Dof, mu: &MixingDistribution) -> Result<f64> {
    let fam = CopulaFamily::from_dof(nu)?;
    nu.finite_or_err("mixture_excess")?;
    let th = fam.threshold(u)?;
    mixture_integral(mu, 1e-14, |rho| th.penultimate_excess(rho))
}

/// Scaled remainder `(λ(u) − λ − γ u^{2/ν}) / u^{2/ν}` of the expansion.
pub fn expansion_residual(u: f64, nu: Dof, mu: &MixingDistribution) -> Result<f64> {
    let v = nu.finite_or_err("expansion_residual")?;
    if !(u > 0.0 && u <= 0.5) {
        return Err(Error::Domain(format!(
            "expansion_residual requires 0 < u <= 1/2, got {u}"
        )));
    }
    let fam = CopulaFamily::student_t(v)?;
    let fam2 = CopulaFamily::student_t(v + 2.0)?;
    let th = fam.threshold(u)?;
    let scale = u.powf(2.0 / v);
    let k = expansion_scale(v, a_nu(v), b_nu(v), ez_nu(v));
    mixture_integral(mu, 1e-13, |rho| {
        let g = k * (limiting_lambda(rho, fam)? - limiting_lambda(rho, fam2)?);
        Ok(th.penultimate_excess(rho)? / scale - g)
    })
}

/// `P(S⁻¹ > z)` for `S = √(χ²_ν/ν)`, its two-term expansion and the bound
/// on the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvChiTail {
    pub exact: f64,
    pub expansion: f64,
    pub delta_bound: f64,
}

/// Exact tail, `a_ν z^{−ν}(1 − b_ν z^{−2})` and `c_ν z^{−ν−4}` with
/// `c_ν = (ν/2)^{ν/2+2} / (2 Γ(ν/2) (ν/2 + 2))`.
pub fn inv_chi_tail(z: f64, nu: Dof) -> Result<InvChiTail> {
    let v = nu.finite_or_err("inv_chi_tail")?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("inv_chi_tail requires z > 0, got {z}")));
    }
    let exact = chi_square_cdf(v / (z * z), nu)?;
    let expansion = a_nu(v) * z.powf(-v) * (1.0 - b_nu(v) / (z * z));
    let h = 0.5 * v;
    let c = ((h + 2.0) * h.ln() - ln_gamma(h)).exp() / (2.0 * (h + 2.0));
    Ok(InvChiTail {
        exact,
        expansion,
        delta_bound: c * z.powf(-v - 4.0),
    })
}

/// Grid of `(u, λ(u))`, strictly decreasing in `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    points: Vec<(f64, f64)>,
}

impl TailCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for &(u, l) in &points {
            if !(u > 0.0 && u <= 1.0) {
                return Err(Error::Domain(format!("tail curve level {u} outside (0, 1]")));
            }
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Domain(format!("tail curve value {l} outside [0, 1]")));
            }
        }
        if points.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(Error::Domain("tail curve levels must be strictly decreasing".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `u,lambda_u` rows at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,lambda_u")?;
        for &(u, l) in &self.points {
            writeln!(w, "{},{}", fmt_f64(u), fmt_f64(l))?;
        }
        Ok(())
    }
}

/// Log-spaced levels from `u_max` down to `u_min`, `per_decade` per decade.
///
/// Levels are `10^{(a·m − k)/m}` so decade points are exact powers of ten.
pub fn log_grid(u_max: f64, u_min: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(u_min > 0.0 && u_min < u_max && u_max <= 1.0) || per_decade == 0 {
        return Err(Error::Domain(format!(
            "log grid needs 0 < u_min < u_max <= 1 and a positive density, got [{u_min}, {u_max}] x {per_decade}"
        )));
    }
    let m = per_decade as f64;
    // The slack keeps exact decades such as 1e-10 from rounding away.
    let top = (u_max.log10() * m + 1e-9).floor();
    let bottom = (u_min.log10() * m - 1e-9).ceil();
    let count = (top - bottom) as i64;
    Ok((0..=count).map(|k| 10f64.powf((top - k as f64) / m)).collect())
}

/// `λ(u)` at every level of `u_grid`, evaluated in parallel.
pub fn tail_curve(family: CopulaFamily, mu: &MixingDistribution, u_grid: &[f64]) -> Result<TailCurve> {
    if u_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("u grid must be strictly decreasing".into()));
    }
    let values: Vec<f64> = u_grid
        .par_iter()
        .map(|&u| mixture_penultimate_lambda(u, family, mu))
        .collect::<Result<_>>()?;
    TailCurve::new(u_grid.iter().copied().zip(values).collect())
}

/// Regression of `log λ(u)` on `log u` over a window of a tail curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    pub eta: f64,
    pub chi_bar: f64,
    pub u_lower: f64,
    pub u_upper: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of curve points inside a regression window.
pub const MIN_WINDOW_POINTS: usize = 10;

/// OLS fit of `log λ(u) = β log u + c` on `[u_lower, u_upper]`, reported as
/// `η = 1/(1 + β)` and `χ̄ = 2η − 1`.
pub fn estimate_eta(curve: &TailCurve, u_lower: f64, u_upper: f64) -> Result<EtaEstimate> {
    if !(u_lower > 0.0 && u_lower < u_upper) {
        return Err(Error::Domain(format!("bad regression window [{u_lower}, {u_upper}]")));
    }
    // Relative slack so that window ends computed as powers of ten still
    // catch the grid points they are meant to.
    let (lo, hi) = (u_lower * (1.0 - 1e-9), u_upper * (1.0 + 1e-9));
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .copied()
        .filter(|&(u, _)| u >= lo && u <= hi)
        .collect();
    if pts.len() < MIN_WINDOW_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} curve points in [{u_lower:e}, {u_upper:e}], need {MIN_WINDOW_POINTS}",
            pts.len()
        )));
    }
    if let Some(&(u, l)) = pts.iter().find(|&&(_, l)| l <= 0.0) {
        return Err(Error::Domain(format!("lambda({u:e}) = {l} is not positive")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let eta = 1.0 / (1.0 + slope);
    Ok(EtaEstimate {
        eta,
        chi_bar: 2.0 * eta - 1.0,
        u_lower,
        u_upper,
        slope,
        r_squared,
        points: pts.len(),
    })
}

/// Sliding windows `[10^{−k−3}, 10^{−k}]` for `k = k_start, k_start + step, …, k_end`.
pub fn eta_windows(k_start: f64, k_end: f64, step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0 && k_end >= k_start) {
        return Err(Error::Domain("eta windows need step > 0 and k_end >= k_start".into()));
    }
    let count = ((k_end - k_start) / step + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|j| {
            let k = k_start + j as f64 * step;
            (10f64.powf(-k - 3.0), 10f64.powf(-k))
        })
        .collect())
}

/// [`estimate_eta`] over each window, in order.
pub fn eta_sweep(curve: &TailCurve, windows: &[(f64, f64)]) -> Result<Vec<EtaEstimate>> {
    windows.iter().map(|&(lo, hi)| estimate_eta(curve, lo, hi)).collect()
}
