use std::io::Write;

use anyhow::{bail, Context, Result};
use tailmix::fit::{bias_table, fit_static_t, implied_tail_report, write_fit_csv, BiasGrid};
use tailmix::output::{fmt_f64, write_header};
use tailmix::sim::sample_mixture;
use tailmix::tails::{
    eta_sweep as sweep, eta_windows, log_grid, mixture_limiting_lambda, mixture_penultimate_lambda, tail_curve as curve,
};
use tailmix::MixingDistribution;

use crate::{BiasStudyArgs, Common, EtaSweepArgs, FitArgs, LambdaArgs, SimulateArgs, TailCurveArgs};

fn header(command: &str, mut entries: Vec<(&'static str, String)>) -> Vec<u8> {
    entries.insert(0, ("command", command.to_string()));
    entries.insert(0, ("tailmix", env!("CARGO_PKG_VERSION").to_string()));
    let mut buf = Vec::new();
    write_header(&mut buf, &entries).expect("writing to memory");
    buf
}

/// Writes the finished document, so a failed run leaves no partial file.
fn emit(common: &Common, bytes: &[u8]) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn mixing(spec: &str) -> Result<MixingDistribution> {
    spec.parse().with_context(|| format!("invalid --mix '{spec}'"))
}

pub fn tail_curve(a: &TailCurveArgs) -> Result<()> {
    let mu = mixing(&a.mix)?;
    let grid = log_grid(a.grid.u_max, a.grid.u_min, a.grid.per_decade)?;
    let c = curve(a.family, &mu, &grid)?;
    let mut buf = header(
        "tail-curve",
        vec![
            ("family", a.family.to_string()),
            ("mix", a.mix.clone()),
            ("mix_resolved", mu.spec()),
            ("grid", a.grid.to_string()),
        ],
    );
    c.write_csv(&mut buf)?;
    emit(&a.common, &buf)
}

pub fn eta_sweep(a: &EtaSweepArgs) -> Result<()> {
    let mu = mixing(&a.mix)?;
    let grid = log_grid(a.grid.u_max, a.grid.u_min, a.grid.per_decade)?;
    let windows = eta_windows(a.windows.start, a.windows.end, a.windows.step)?;
    let c = curve(a.family, &mu, &grid)?;
    let estimates = sweep(&c, &windows)?;
    let mut buf = header(
        "eta-sweep",
        vec![
            ("family", a.family.to_string()),
            ("mix", a.mix.clone()),
            ("mix_resolved", mu.spec()),
            ("grid", a.grid.to_string()),
            ("windows", a.windows.to_string()),
        ],
    );
    writeln!(buf, "u_lower,eta,chi_bar,r2")?;
    for e in &estimates {
        writeln!(
            buf,
            "{},{},{},{}",
            fmt_f64(e.u_lower),
            fmt_f64(e.eta),
            fmt_f64(e.chi_bar),
            fmt_f64(e.r_squared)
        )?;
    }
    emit(&a.common, &buf)
}

pub fn bias_study(a: &BiasStudyArgs) -> Result<()> {
    if a.nu.is_empty() || a.sigma.is_empty() {
        bail!("bias study needs at least one --nu and one --sigma");
    }
    if a.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let grid = BiasGrid {
        nus: a.nu.clone(),
        sigmas: a.sigma.clone(),
        beta: a.beta,
        rho_bar: a.rho_bar,
        sample_size: a.n,
        replicates: a.reps,
        u_eval: a.u,
        seed: a.seed,
        mode: a.mode,
    };
    let table = bias_table(&grid)?;
    for c in table.cells.iter().filter(|c| c.failed > 0) {
        eprintln!(
            "warning: nu={} sigma={}: {} of {} replicate fits failed and were excluded",
            c.nu_true, c.sigma, c.failed, a.reps
        );
    }
    let list = |v: Vec<String>| v.join(",");
    let mut buf = header(
        "bias-study",
        vec![
            ("nu", list(a.nu.iter().map(|d| d.to_string()).collect())),
            ("sigma", list(a.sigma.iter().map(|s| s.to_string()).collect())),
            ("beta", a.beta.to_string()),
            ("rho_bar", a.rho_bar.to_string()),
            ("n", a.n.to_string()),
            ("reps", a.reps.to_string()),
            ("u", a.u.to_string()),
            ("mode", a.mode.to_string()),
            ("seed", a.seed.to_string()),
            ("layout", if a.long { "long" } else { "table" }.to_string()),
        ],
    );
    if a.long {
        table.write_long_csv(&mut buf)?;
    } else {
        table.write_csv(&mut buf)?;
    }
    emit(&a.common, &buf)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let (sample, kind) = crate::input::read_pairs(&a.input)?;
    let fit = fit_static_t(&sample)?;
    if fit.rho_clamped {
        eprintln!(
            "warning: correlation estimate clamped to {}; the data look comonotone or countermonotone",
            fit.rho_hat
        );
    }
    let report = implied_tail_report(&fit, a.frequency.0)?;
    let mut buf = header(
        "fit",
        vec![
            ("input", a.input.display().to_string()),
            ("columns", kind.to_string()),
            ("n", sample.len().to_string()),
            ("frequency", a.frequency.0.to_string()),
        ],
    );
    write_fit_csv(&mut buf, &fit, &report)?;
    emit(&a.common, &buf)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mu = mixing(&a.mix)?;
    let sample = sample_mixture(a.n, a.family, &mu, a.seed, a.mode)?;
    let mut buf = header("simulate", Vec::new());
    sample.write_csv(&mut buf)?;
    emit(&a.common, &buf)
}

pub fn lambda(a: &LambdaArgs) -> Result<()> {
    let mu = mixing(&a.mix)?;
    let limit = mixture_limiting_lambda(a.family, &mu)?;
    let mut buf = header(
        "lambda",
        vec![
            ("family", a.family.to_string()),
            ("mix", a.mix.clone()),
            ("mix_resolved", mu.spec()),
        ],
    );
    writeln!(buf, "u,lambda_u,lambda")?;
    for &u in &a.u {
        let l = mixture_penultimate_lambda(u, a.family, &mu)?;
        writeln!(buf, "{},{},{}", fmt_f64(u), fmt_f64(l), fmt_f64(limit))?;
    }
    emit(&a.common, &buf)
}
