use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use vfd_core::eulerian::{comparison_check, comparison_constants, density_bounds};
use vfd_core::experiment::{contraction_run, hessian_bound_sample, hessian_fd_sample, quantize, HessianSample};
use vfd_core::{evolve, fit_decay_rate, Dens, Grid, InitialDatum, Preset, Rho, Row};

use crate::config::Config;
use crate::error::CliError;

/// Seventeen significant digits, enough to round-trip an `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn sample(datum: &InitialDatum<f64>, grid: Grid, rho: &Rho, r: f64, name: &str) -> Result<Dens, CliError> {
    datum
        .sample(grid, rho, r)
        .map_err(|e| CliError::Config(format!("{name}: {e}")))
}

/// Independent stream per task so parallel results do not depend on
/// scheduling.
fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

pub fn evolve_cmd(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let (grid, rho, p) = (cfg.grid()?, cfg.rho()?, cfg.params()?);
    let datum = cfg.datum("f0")?.unwrap_or(InitialDatum::Preset(Preset::Cosine));
    let f0 = sample(&datum, grid, &rho, p.r, "f0")?;
    let (lo, hi) = f0.min_max();
    let (a1, big_a1) = match cfg.envelope()? {
        Some((a1, big_a1)) if a1 <= lo && hi <= big_a1 => (a1, big_a1),
        Some(_) => return Err(CliError::Config(format!("f0 range [{lo}, {hi}] leaves [a1, A1]"))),
        None => (lo, hi),
    };
    let window = cfg.fit_window(p.t_end)?;

    let mut rows: Vec<Row> = Vec::new();
    let traj = evolve(&f0, &rho, &p, &mut rows)?;
    write_csv(
        &out.join("series.csv"),
        Row::HEADER,
        rows.iter().map(|r| r.fields().iter().map(|&v| num(v)).collect()),
    )?;

    let (a, big_a) = density_bounds(rho.lambda(), p.r, a1, big_a1);
    let (c_low, c_high) = comparison_constants(rho.lambda(), p.r, a1, big_a1);
    let report = comparison_check(&traj.snapshots, c_low, c_high);
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.l2_error)).collect();

    let mut s = String::new();
    writeln!(s, "steps: {}", traj.steps).ok();
    writeln!(s, "max step halvings: {}", traj.max_halvings).ok();
    match fit_decay_rate(&series, window) {
        Ok(fit) => writeln!(
            s,
            "fitted decay rate: {} on [{}, {}] ({} samples, residual {})",
            num(fit.rate),
            window.0,
            window.1,
            fit.samples,
            num(fit.residual)
        ),
        Err(e) => writeln!(s, "fitted decay rate: unavailable ({e})"),
    }
    .ok();
    writeln!(s, "lambda: {}", num(rho.lambda())).ok();
    writeln!(s, "initial envelope: a1 = {}, A1 = {}", num(a1), num(big_a1)).ok();
    writeln!(s, "theoretical bounds: a = {}, A = {}", num(a), num(big_a)).ok();
    writeln!(
        s,
        "observed range: min f = {}, max f = {}",
        num(traj.min_f),
        num(traj.max_f)
    )
    .ok();
    let verdict = if report.holds { "pass" } else { "fail" };
    writeln!(
        s,
        "comparison check: {verdict} (below {}, above {})",
        num(report.below),
        num(report.above)
    )
    .ok();
    fs::write(out.join("summary.txt"), s)?;
    if report.holds {
        Ok(())
    } else {
        Err(CliError::Check("comparison principle violated".into()))
    }
}

pub fn contract_cmd(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let (grid, rho, p) = (cfg.grid()?, cfg.rho()?, cfg.params()?);
    let missing = |k: &str| CliError::Config(format!("contract needs `{k}.*`"));
    let d1 = cfg.datum("f0")?.ok_or_else(|| missing("f0"))?;
    let d2 = cfg.datum("f0b")?.ok_or_else(|| missing("f0b"))?;
    let f1 = sample(&d1, grid, &rho, p.r, "f0")?;
    let f2 = sample(&d2, grid, &rho, p.r, "f0b")?;

    let run = contraction_run(&f1, &f2, &rho, &p)?;
    write_csv(
        &out.join("contract.csv"),
        "t,w2,bound",
        run.rows.iter().map(|&(t, w, b)| vec![num(t), num(w), num(b)]),
    )?;

    let mut s = String::new();
    writeln!(s, "mu: {}", num(run.mu)).ok();
    writeln!(s, "bounds: a = {}, A = {}", num(run.a), num(run.big_a)).ok();
    writeln!(s, "eta1 = {}, eta2 = {}", num(rho.eta1()), num(rho.eta2())).ok();
    let line = match run.certified {
        None => "contraction: no certificate (mu <= 0)",
        Some(true) => "contraction: verified",
        Some(false) => "contraction: violated",
    };
    writeln!(s, "{line}").ok();
    fs::write(out.join("summary.txt"), s)?;
    match run.certified {
        Some(false) => Err(CliError::Check("W2 exceeded the contraction bound".into())),
        _ => Ok(()),
    }
}

pub fn quantize_cmd(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let (grid, rho, r) = (cfg.grid()?, cfg.rho()?, cfg.r()?);
    if r <= 1.0 {
        return Err(CliError::Config("r must be > 1".into()));
    }
    let sizes = cfg.quantize_sizes()?;
    let opts = cfg.descent()?;
    let seed = cfg.seed()?;

    let outcomes = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| quantize(n, &rho, r, grid, &opts, &mut task_rng(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let join = |v: &[f64]| v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";");
    write_csv(
        &out.join("quantize.csv"),
        "n_points,energy,w2_to_eq,w2_weighted_to_rho,converged,iterations,points,weights",
        outcomes.iter().map(|o| {
            vec![
                o.config.len().to_string(),
                num(o.energy),
                num(o.w2_to_eq),
                num(o.w2_weighted_to_rho),
                o.converged.to_string(),
                o.iterations.to_string(),
                join(o.config.points()),
                join(&o.weights),
            ]
        }),
    )?;

    let stalled: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.converged)
        .map(|o| o.config.len().to_string())
        .collect();
    let mut s = String::new();
    for o in &outcomes {
        writeln!(
            s,
            "N = {}: energy {}, W2 to equilibrium {}, {} iterations",
            o.config.len(),
            num(o.energy),
            num(o.w2_to_eq),
            o.iterations
        )
        .ok();
    }
    fs::write(out.join("summary.txt"), s)?;
    if stalled.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "descent did not converge for N = {}",
            stalled.join(", ")
        )))
    }
}

pub fn hessian_cmd(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let (grid, rho, r) = (cfg.grid()?, cfg.rho()?, cfg.r()?);
    if r <= 1.0 {
        return Err(CliError::Config("r must be > 1".into()));
    }
    let (bound_n, fd_n) = cfg.hessian_counts()?;
    let seed = cfg.seed()?;

    let run = |count: usize,
               offset: usize,
               f: fn(Grid, &Rho, f64, &mut ChaCha8Rng) -> vfd_core::Result<HessianSample<f64>>| {
        (0..count)
            .into_par_iter()
            .map(|i| f(grid, &rho, r, &mut task_rng(seed, (offset + i) as u64)))
            .collect::<Result<Vec<_>, _>>()
    };
    let bound = run(bound_n, 0, hessian_bound_sample)?;
    let fd = run(fd_n, bound_n, hessian_fd_sample)?;

    let rows = bound
        .iter()
        .enumerate()
        .map(|(i, s)| ("bound", i, s))
        .chain(fd.iter().enumerate().map(|(i, s)| ("fd", i, s)));
    write_csv(
        &out.join("hessian.csv"),
        "kind,index,quadratic_form,metric,ratio,reference,pass",
        rows.map(|(kind, i, s)| {
            vec![
                kind.to_string(),
                i.to_string(),
                num(s.quadratic_form),
                num(s.metric),
                num(s.ratio()),
                num(s.reference),
                s.pass.to_string(),
            ]
        }),
    )?;

    let failed = |v: &[HessianSample<f64>]| v.iter().filter(|s| !s.pass).count();
    let (bf, ff) = (failed(&bound), failed(&fd));
    let mut s = String::new();
    writeln!(s, "eta1 = {}, eta2 = {}", num(rho.eta1()), num(rho.eta2())).ok();
    writeln!(s, "lower bound suite: {} of {} pass", bound_n - bf, bound_n).ok();
    writeln!(s, "finite-difference suite: {} of {} pass", fd_n - ff, fd_n).ok();
    fs::write(out.join("summary.txt"), s)?;
    if bf + ff == 0 {
        Ok(())
    } else {
        Err(CliError::Check(format!("{} Hessian samples failed", bf + ff)))
    }
}
