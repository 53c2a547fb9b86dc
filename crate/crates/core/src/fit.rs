//! Static t-copula estimation and the stochastic-correlation bias study.
//!
//! The estimator is two-stage: for a candidate `ν` the correlation is the
//! Pearson correlation of the t-quantile transformed pairs, and `ν` maximizes
//! the resulting copula log-likelihood. The search runs in `log ν` over
//! `[1, 400]`; reaching the upper end is reported as `ν̂ = ∞`.

use std::io::Write;

use rayon::prelude::*;

use crate::copula::{limiting_lambda, penultimate_lambda, CopulaFamily};
use crate::dist::{Dof, Marginal, StudentT};
use crate::error::{Error, Result};
use crate::mixing::MixingDistribution;
use crate::output::fmt_f64;
use crate::quad::{golden_section_max, CompensatedSum};
use crate::sim::{sample_mixture, CopulaSample, SamplingMode, ScarParams};
use crate::tails::{mixture_limiting_lambda, mixture_penultimate_lambda};

/// Smallest sample accepted by the estimators.
pub const MIN_SAMPLE: usize = 20;
/// Correlation estimates are clamped to `±RHO_CLAMP`.
pub const RHO_CLAMP: f64 = 0.9999;
/// A maximizer this close to the upper end of the search is reported as `ν̂ = ∞`.
pub const AT_BOUND_TOL: f64 = 1e-6;

/// Average ranks scaled by `1/(n + 1)`.
pub fn rank_transform(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Input("rank transform input contains NaN".into()));
    }
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            out[k] = rank / (n as f64 + 1.0);
        }
        i = j + 1;
    }
    Ok(out)
}

/// Rank-based pseudo-observations of paired data.
pub fn pseudo_observations(x: &[f64], y: &[f64]) -> Result<CopulaSample> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "column lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < MIN_SAMPLE {
        return Err(Error::Input(format!(
            "need at least {MIN_SAMPLE} observations, got {}",
            x.len()
        )));
    }
    let u = rank_transform(x)?;
    let v = rank_transform(y)?;
    CopulaSample::new(
        u.into_iter().zip(v).collect(),
        None,
        format!("pseudo-observations n={}", x.len()),
    )
}

fn check_sample(sample: &CopulaSample) -> Result<()> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SAMPLE} pairs, got {}",
            sample.len()
        )));
    }
    Ok(())
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let my = ys.iter().copied().collect::<CompensatedSum>().value() / n;
    let (mut sxx, mut syy, mut sxy) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx.add(dx * dx);
        syy.add(dy * dy);
        sxy.add(dx * dy);
    }
    let (sxx, syy) = (sxx.value(), syy.value());
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Degenerate("zero variance in transformed sample".into()));
    }
    Ok(sxy.value() / (sxx * syy).sqrt())
}

/// Pearson correlation of the quantile-transformed pairs, clamped.
pub fn rho_moment(sample: &CopulaSample, nu: Dof) -> Result<f64> {
    check_sample(sample)?;
    let m = Marginal::new(nu)?;
    let xs: Vec<f64> = sample.pairs.iter().map(|p| m.quantile(p.0)).collect();
    let ys: Vec<f64> = sample.pairs.iter().map(|p| m.quantile(p.1)).collect();
    Ok(pearson(&xs, &ys)?.clamp(-RHO_CLAMP, RHO_CLAMP))
}

/// Profile log-likelihood at `ν` together with `ρ̂(ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub nu: f64,
    pub rho: f64,
    pub log_lik: f64,
    /// Whether the raw moment estimate hit the clamp.
    pub rho_clamped: bool,
}

/// `Σ log[t₂(x, y; ν, ρ̂) / (t(x) t(y))]` with `x, y` the t-quantiles of the
/// pairs and `ρ̂ = ρ̂(ν)`.
pub fn profile_log_likelihood(sample: &CopulaSample, nu: f64) -> Result<ProfilePoint> {
    check_sample(sample)?;
    let t = StudentT::new(nu)?;
    let xs: Vec<f64> = sample.pairs.iter().map(|p| t.quantile(p.0)).collect();
    let ys: Vec<f64> = sample.pairs.iter().map(|p| t.quantile(p.1)).collect();
    let raw = pearson(&xs, &ys)?;
    let rho = raw.clamp(-RHO_CLAMP, RHO_CLAMP);
    let one_m = 1.0 - rho * rho;
    let norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * one_m.ln();
    let mut ll = CompensatedSum::new();
    for (&x, &y) in xs.iter().zip(&ys) {
        let q = (x * x - 2.0 * rho * x * y + y * y) / one_m;
        let joint = norm - (0.5 * nu + 1.0) * (q / nu).ln_1p();
        ll.add(joint - t.ln_pdf(x) - t.ln_pdf(y));
    }
    Ok(ProfilePoint {
        nu,
        rho,
        log_lik: ll.value(),
        rho_clamped: raw.abs() > RHO_CLAMP,
    })
}

/// Search settings for [`fit_static_t_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub nu_min: f64,
    pub nu_max: f64,
    /// Equal-width brackets in `log ν`, each searched by golden section.
    pub brackets: usize,
    /// Bracket width (in `log ν`) at which a search stops.
    pub log_nu_tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nu_min: 1.0,
            nu_max: 400.0,
            brackets: 3,
            log_nu_tol: 1e-4,
            max_iter: 200,
        }
    }
}

/// Static t-copula estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// `Dof::Infinite` when the search ended at the upper bound.
    pub nu_hat: Dof,
    /// Maximizing `ν` on the search interval, even when at the bound.
    pub nu_search: f64,
    pub rho_hat: f64,
    pub log_lik: f64,
    pub at_bound: bool,
    pub rho_clamped: bool,
}

impl FitResult {
    pub fn family(&self) -> CopulaFamily {
        CopulaFamily::from_dof(self.nu_hat).expect("fitted dof is valid")
    }
}

/// [`fit_static_t_with`] under [`FitOptions::default`].
pub fn fit_static_t(sample: &CopulaSample) -> Result<FitResult> {
    fit_static_t_with(sample, &FitOptions::default())
}

/// Profile-likelihood fit of `ν` with `ρ̂(ν)` by moments.
pub fn fit_static_t_with(sample: &CopulaSample, opts: &FitOptions) -> Result<FitResult> {
    check_sample(sample)?;
    if !(opts.nu_min > 0.0 && opts.nu_min < opts.nu_max) || opts.brackets == 0 {
        return Err(Error::Domain("invalid fit options".into()));
    }
    let (a, b) = (opts.nu_min.ln(), opts.nu_max.ln());
    let mut failure: Option<Error> = None;
    let mut f = |s: f64| match profile_log_likelihood(sample, s.exp()) {
        Ok(p) => p.log_lik,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let width = (b - a) / opts.brackets as f64;
    let mut best = (b, f(b));
    let lo_end = (a, f(a));
    if lo_end.1 > best.1 {
        best = lo_end;
    }
    for k in 0..opts.brackets {
        let (l, r) = (a + k as f64 * width, a + (k + 1) as f64 * width);
        let (s, v, _) = golden_section_max(&mut f, l, r, opts.log_nu_tol, opts.max_iter)?;
        if v > best.1 {
            best = (s, v);
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if !best.1.is_finite() {
        return Err(Error::Numeric("profile log-likelihood is not finite".into()));
    }
    let at_bound = opts.nu_max - best.0.exp() <= AT_BOUND_TOL;
    let nu_search = if at_bound { opts.nu_max } else { best.0.exp() };
    let point = profile_log_likelihood(sample, nu_search)?;
    Ok(FitResult {
        nu_hat: if at_bound {
            Dof::Infinite
        } else {
            Dof::Finite(nu_search)
        },
        nu_search,
        rho_hat: point.rho,
        log_lik: point.log_lik,
        at_bound,
        rho_clamped: point.rho_clamped,
    })
}

/// Fitted `λ(u)` at yearly, decade and century exceedance levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailReport {
    /// `(1/f, 1/(10 f), 1/(100 f))` for `f` observations per year.
    pub levels: [f64; 3],
    pub lambda_year: f64,
    pub lambda_dec: f64,
    pub lambda_cent: f64,
    pub lambda_limit: f64,
}

/// Observations per year for daily data.
pub const DAILY: f64 = 250.0;
/// Observations per year for monthly data.
pub const MONTHLY: f64 = 12.0;

/// Tail coefficients implied by a fit at the horizon levels for `frequency`.
pub fn implied_tail_report(fit: &FitResult, frequency: f64) -> Result<TailReport> {
    if !(frequency >= 1.0 && frequency.is_finite()) {
        return Err(Error::Domain(format!("frequency must be at least 1, got {frequency}")));
    }
    let fam = fit.family();
    let levels = [1.0 / frequency, 0.1 / frequency, 0.01 / frequency];
    let l = |u: f64| penultimate_lambda(u, fit.rho_hat, fam);
    Ok(TailReport {
        levels,
        lambda_year: l(levels[0])?,
        lambda_dec: l(levels[1])?,
        lambda_cent: l(levels[2])?,
        lambda_limit: limiting_lambda(fit.rho_hat, fam)?,
    })
}

/// Column names of [`write_fit_csv`].
pub const FIT_COLUMNS: &str = "nu,rho,log_lik,at_bound,lambda_year,lambda_dec,lambda_cent,lambda,u_year,u_dec,u_cent";

/// One-row CSV with the fit and its tail report.
pub fn write_fit_csv<W: Write>(mut w: W, fit: &FitResult, report: &TailReport) -> std::io::Result<()> {
    writeln!(w, "{FIT_COLUMNS}")?;
    let nu = match fit.nu_hat {
        Dof::Infinite => "inf".to_string(),
        Dof::Finite(v) => fmt_f64(v),
    };
    writeln!(
        w,
        "{nu},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(fit.rho_hat),
        fmt_f64(fit.log_lik),
        fit.at_bound,
        fmt_f64(report.lambda_year),
        fmt_f64(report.lambda_dec),
        fmt_f64(report.lambda_cent),
        fmt_f64(report.lambda_limit),
        fmt_f64(report.levels[0]),
        fmt_f64(report.levels[1]),
        fmt_f64(report.levels[2]),
    )
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Settings of one bias-study cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSetup {
    pub nu_true: Dof,
    pub scar: ScarParams,
    pub sample_size: usize,
    pub replicates: usize,
    pub u_eval: f64,
    pub seed: u64,
    pub mode: SamplingMode,
}

/// Outcome of one bias-study cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCell {
    pub nu_true: Dof,
    pub sigma: f64,
    pub true_lambda_u: f64,
    pub true_lambda: f64,
    pub mean_fit_lambda_u: f64,
    pub mean_fit_lambda: f64,
    pub bias_lambda_u: f64,
    pub bias_lambda: f64,
    pub mean_rho_hat: f64,
    /// Share of replicates whose fit ended at the upper bound.
    pub share_at_bound: f64,
    pub completed: usize,
    pub failed: usize,
}

struct Replicate {
    lambda_u: f64,
    lambda: f64,
    rho: f64,
    at_bound: bool,
}

fn run_replicate(setup: &BiasSetup, family: CopulaFamily, mu: &MixingDistribution, r: usize) -> Result<Replicate> {
    let seed = mix_seed(setup.seed, r as u64);
    let sample = sample_mixture(setup.sample_size, family, mu, seed, setup.mode)?;
    let fit = fit_static_t(&sample)?;
    let fam = fit.family();
    Ok(Replicate {
        lambda_u: penultimate_lambda(setup.u_eval, fit.rho_hat, fam)?,
        lambda: limiting_lambda(fit.rho_hat, fam)?,
        rho: fit.rho_hat,
        at_bound: fit.at_bound,
    })
}

/// Fits static t copulas to SCAR-driven samples and compares the implied
/// `λ(u_eval)` and `λ` with the true mixture values.
///
/// Replicates run in parallel; replicate `r` is seeded by
/// `mix_seed(seed, r)`, so results do not depend on the thread count.
/// Failed fits are excluded and counted.
pub fn mc_bias_study(setup: &BiasSetup) -> Result<BiasCell> {
    if setup.replicates == 0 {
        return Err(Error::Domain("bias study needs at least one replicate".into()));
    }
    if !(setup.u_eval > 0.0 && setup.u_eval < 1.0) {
        return Err(Error::Domain(format!(
            "u_eval must lie in (0, 1), got {}",
            setup.u_eval
        )));
    }
    let family = CopulaFamily::from_dof(setup.nu_true)?;
    let mu = MixingDistribution::scar(setup.scar);
    let true_lambda_u = mixture_penultimate_lambda(setup.u_eval, family, &mu)?;
    let true_lambda = mixture_limiting_lambda(family, &mu)?;
    let results: Vec<Result<Replicate>> = (0..setup.replicates)
        .into_par_iter()
        .map(|r| run_replicate(setup, family, &mu, r))
        .collect();
    let ok: Vec<&Replicate> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = results.len() - ok.len();
    if ok.is_empty() {
        let first = results.into_iter().find_map(|r| r.err());
        return Err(first.unwrap_or_else(|| Error::Numeric("all replicates failed".into())));
    }
    let mean =
        |f: &dyn Fn(&Replicate) -> f64| ok.iter().map(|r| f(r)).collect::<CompensatedSum>().value() / ok.len() as f64;
    let mean_fit_lambda_u = mean(&|r| r.lambda_u);
    let mean_fit_lambda = mean(&|r| r.lambda);
    Ok(BiasCell {
        nu_true: setup.nu_true,
        sigma: setup.scar.sigma,
        true_lambda_u,
        true_lambda,
        mean_fit_lambda_u,
        mean_fit_lambda,
        bias_lambda_u: mean_fit_lambda_u - true_lambda_u,
        bias_lambda: mean_fit_lambda - true_lambda,
        mean_rho_hat: mean(&|r| r.rho),
        share_at_bound: ok.iter().filter(|r| r.at_bound).count() as f64 / ok.len() as f64,
        completed: ok.len(),
        failed,
    })
}

/// Grid of bias-study cells over `ν` and `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    pub nus: Vec<Dof>,
    pub sigmas: Vec<f64>,
    /// Row-major over `(ν, σ)`.
    pub cells: Vec<BiasCell>,
    pub replicates: usize,
    pub sample_size: usize,
    pub u_eval: f64,
}

/// Inputs of [`bias_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiasGrid {
    pub nus: Vec<Dof>,
    pub sigmas: Vec<f64>,
    pub beta: f64,
    pub rho_bar: f64,
    pub sample_size: usize,
    pub replicates: usize,
    pub u_eval: f64,
    pub seed: u64,
    pub mode: SamplingMode,
}

impl Default for BiasGrid {
    fn default() -> Self {
        Self {
            nus: vec![Dof::Finite(5.0), Dof::Finite(10.0), Dof::Finite(20.0), Dof::Infinite],
            sigmas: vec![0.05, 0.1, 0.15, 0.2],
            beta: 0.97,
            rho_bar: 0.5,
            sample_size: 1000,
            replicates: 200,
            u_eval: 0.01,
            seed: 1,
            mode: SamplingMode::Path,
        }
    }
}

impl BiasGrid {
    /// Cell `(i, j)` of the grid; each cell gets its own derived seed.
    pub fn setup(&self, i: usize, j: usize) -> Result<BiasSetup> {
        let sigma = self.sigmas[j];
        let alpha = crate::mixing::solve_alpha_for_mean(self.rho_bar, self.beta, sigma)?;
        Ok(BiasSetup {
            nu_true: self.nus[i],
            scar: ScarParams::new(alpha, self.beta, sigma)?,
            sample_size: self.sample_size,
            replicates: self.replicates,
            u_eval: self.u_eval,
            seed: mix_seed(self.seed, (i * self.sigmas.len() + j) as u64 + (1 << 32)),
            mode: self.mode,
        })
    }
}

/// Runs every cell of `grid`.
pub fn bias_table(grid: &BiasGrid) -> Result<BiasTable> {
    let mut cells = Vec::with_capacity(grid.nus.len() * grid.sigmas.len());
    for i in 0..grid.nus.len() {
        for j in 0..grid.sigmas.len() {
            cells.push(mc_bias_study(&grid.setup(i, j)?)?);
        }
    }
    Ok(BiasTable {
        nus: grid.nus.clone(),
        sigmas: grid.sigmas.clone(),
        cells,
        replicates: grid.replicates,
        sample_size: grid.sample_size,
        u_eval: grid.u_eval,
    })
}

impl BiasTable {
    pub fn cell(&self, nu: Dof, sigma: f64) -> Option<&BiasCell> {
        self.cells.iter().find(|c| c.nu_true == nu && c.sigma == sigma)
    }

    /// Two blocks, `lambda_u` then `lambda`, one row per `ν`, one column per `σ`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "statistic,nu")?;
        for s in &self.sigmas {
            write!(w, ",sigma={s}")?;
        }
        writeln!(w)?;
        let k = self.sigmas.len();
        for (name, pick) in [
            ("lambda_u", (|c: &BiasCell| c.bias_lambda_u) as fn(&BiasCell) -> f64),
            ("lambda", |c: &BiasCell| c.bias_lambda),
        ] {
            for (i, nu) in self.nus.iter().enumerate() {
                write!(w, "{name},{nu}")?;
                for c in &self.cells[i * k..(i + 1) * k] {
                    write!(w, ",{}", fmt_f64(pick(c)))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// One row per cell with the true values, means and diagnostics.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "nu,sigma,true_lambda_u,mean_fit_lambda_u,bias_lambda_u,true_lambda,mean_fit_lambda,bias_lambda,mean_rho_hat,share_at_bound,completed,failed"
        )?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.nu_true,
                c.sigma,
                fmt_f64(c.true_lambda_u),
                fmt_f64(c.mean_fit_lambda_u),
                fmt_f64(c.bias_lambda_u),
                fmt_f64(c.true_lambda),
                fmt_f64(c.mean_fit_lambda),
                fmt_f64(c.bias_lambda),
                fmt_f64(c.mean_rho_hat),
                fmt_f64(c.share_at_bound),
                c.completed,
                c.failed
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rank_transform(&[1.0, 2.0, 3.0]).unwrap(), vec![0.25, 0.5, 0.75]);
        let r = rank_transform(&[3.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(r, vec![3.5 / 5.0, 0.2, 3.5 / 5.0, 0.4]);
        assert!(rank_transform(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn pseudo_observation_checks() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert!(pseudo_observations(&x, &x[..29]).is_err());
        assert!(pseudo_observations(&x[..19], &x[..19]).is_err());
        let s = pseudo_observations(&x, &x).unwrap();
        assert!(s.pairs.iter().all(|&(u, v)| u == v && u > 0.0 && u < 1.0));
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert_eq!(pseudo_observations(&x, &y).unwrap().pairs, s.pairs);
    }

    #[test]
    fn comonotone_rho_is_clamped() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let s = pseudo_observations(&x, &x).unwrap();
        assert_eq!(rho_moment(&s, Dof::Finite(4.0)).unwrap(), RHO_CLAMP);
        assert!(profile_log_likelihood(&s, 4.0).unwrap().rho_clamped);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let s = CopulaSample::new(vec![(0.5, 0.3); 25], None, "").unwrap();
        assert!(matches!(rho_moment(&s, Dof::Infinite), Err(Error::Degenerate(_))));
    }

    #[test]
    fn horizon_levels() {
        let fit = FitResult {
            nu_hat: Dof::Finite(4.0),
            nu_search: 4.0,
            rho_hat: 0.5,
            log_lik: 0.0,
            at_bound: false,
            rho_clamped: false,
        };
        let r = implied_tail_report(&fit, DAILY).unwrap();
        assert_eq!(r.levels, [1.0 / 250.0, 1.0 / 2500.0, 1.0 / 25000.0]);
        assert!(r.lambda_year >= r.lambda_dec && r.lambda_dec >= r.lambda_cent && r.lambda_cent >= r.lambda_limit);
        let g = FitResult {
            nu_hat: Dof::Infinite,
            ..fit
        };
        let r = implied_tail_report(&g, MONTHLY).unwrap();
        assert_eq!(r.lambda_limit, 0.0);
        assert!(r.lambda_year > 0.0);
        assert!(implied_tail_report(&fit, 0.5).is_err());
    }

    #[test]
    fn seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| mix_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
