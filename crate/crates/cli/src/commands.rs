use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use skqaoa::exact::{nu_exact, write_iterates_csv, ExactConfig};
use skqaoa::finite::{run_cell, success_decay_fit, CellResult};
use skqaoa::fit::{self, EnergySeries, Model};
use skqaoa::fock::{required_dim, truncation_budget};
use skqaoa::gmatrix::{read_angles, write_angles};
use skqaoa::optimize::{optimize, ExactObjective, Init, Method, MpsObjective, OptimizerConfig};
use skqaoa::spinboson::{run_spin_boson, SpinBosonConfig};
use skqaoa::{Angles, Complex64, Error, FockDim, Result, TruncationPolicy};

use crate::results::{self, Row};
use crate::{
    BoundArgs, Cli, Command, CrosscheckArgs, EnergyArgs, ExactArgs, FiniteArgs, FitArgs, MpsArgs,
    OptimizeArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    validate_paths(cli)?;
    let start = Instant::now();
    let mut row = match &cli.command {
        Command::Exact(a) => exact(a)?,
        Command::Energy(a) => energy(a)?,
        Command::Optimize(a) => optimize_cmd(a)?,
        Command::Fit(a) => fit_cmd(a)?,
        Command::Finite(a) => finite(a)?,
        Command::TruncationBound(a) => bound(a)?,
        Command::Crosscheck(a) => crosscheck(a)?,
    };
    row.walltime_ms = start.elapsed().as_millis();
    row.config_hash = results::config_hash(&format!("{:?}", cli.command));
    if let Some(path) = &cli.results {
        results::append(path, &row)?;
    }
    Ok(())
}

fn usage(msg: String) -> Error {
    Error::Precondition(msg)
}

fn input_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file {} does not exist", p.display())))
    }
}

fn output_file(p: &Path) -> Result<()> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(usage(format!(
            "directory {} for output {} does not exist",
            dir.display(),
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn validate_paths(cli: &Cli) -> Result<()> {
    if let Some(r) = &cli.results {
        output_file(r)?;
    }
    let outs: Vec<&PathBuf> = match &cli.command {
        Command::Exact(a) => {
            input_file(&a.angles)?;
            a.dump_g.iter().collect()
        }
        Command::Energy(a) => {
            input_file(&a.angles)?;
            a.diagnostics.iter().collect()
        }
        Command::Optimize(a) => {
            match init_source(&a.init) {
                InitSource::Given(p) | InitSource::Fourier(p) => input_file(&p)?,
                InitSource::Random => {}
            }
            a.out.iter().collect()
        }
        Command::Fit(a) => {
            if let Some(d) = &a.data {
                input_file(d)?;
            }
            a.report.iter().chain(a.plot_data.iter()).collect()
        }
        Command::Finite(a) => {
            for p in &a.p_list {
                input_file(&a.angles_dir.join(format!("p{p}.json")))?;
            }
            a.out.iter().collect()
        }
        Command::TruncationBound(a) => {
            input_file(&a.angles)?;
            if a.l != "worst-case" {
                input_file(Path::new(&a.l))?;
            }
            Vec::new()
        }
        Command::Crosscheck(a) => {
            match (&a.angles, a.random_p) {
                (Some(p), _) => input_file(p)?,
                (None, Some(_)) => {}
                (None, None) => return Err(usage("crosscheck needs --angles or --random-p".into())),
            }
            a.grid.iter().collect()
        }
    };
    outs.into_iter().try_for_each(|p| output_file(p))
}

/// `x` with 15 significant digits.
fn sig15(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        format!("{:.*}", (14 - mag).max(0) as usize, x)
    } else {
        format!("{x:.14e}")
    }
}

fn writer(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn policy(m: &MpsArgs) -> Result<TruncationPolicy> {
    Ok(TruncationPolicy::new(m.svd_cutoff, m.max_bond.0)?.with_absolute(m.absolute_cutoff))
}

fn sb_config(m: &MpsArgs) -> Result<SpinBosonConfig<f64>> {
    if !(m.collapse_floor >= 0.0 && m.collapse_floor < 1.0) {
        return Err(usage(format!(
            "collapse floor must lie in [0, 1), got {}",
            m.collapse_floor
        )));
    }
    Ok(SpinBosonConfig {
        workers: 0,
        collapse_floor: m.collapse_floor,
    })
}

fn exact(a: &ExactArgs) -> Result<Row> {
    let angles: Angles = read_angles(&a.angles)?;
    let cfg = ExactConfig {
        p_cap: a.p_cap,
        workers: 0,
    };
    let trace = nu_exact(&angles, &cfg)?;
    println!("{}", sig15(trace.nu));
    log::info!("imaginary residue {:.3e}", trace.imag_residue);
    if let Some(path) = &a.dump_g {
        let mut w = writer(Some(path))?;
        write_iterates_csv(&trace, &mut w)?;
        w.flush()?;
    }
    Ok(Row {
        subcommand: "exact",
        p: Some(angles.p()),
        nu: Some(trace.nu),
        ..Row::default()
    })
}

fn energy(a: &EnergyArgs) -> Result<Row> {
    let angles: Angles = read_angles(&a.angles)?;
    let d = FockDim::new(a.mps.fock_dim)?;
    let run = run_spin_boson(&angles, d, &policy(&a.mps)?, &sb_config(&a.mps)?)?;
    let diag = &run.diagnostics;
    println!("{}", sig15(run.nu));
    eprintln!(
        "max bond {}, discarded weight {:.3e}, norm leak {:.3e}, bond cap {}",
        diag.max_bond,
        diag.discarded_weight,
        diag.norm_leak,
        if diag.cap_active { "active" } else { "inactive" }
    );
    if let Some(path) = &a.diagnostics {
        let mut w = writer(Some(path))?;
        diag.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(Row {
        subcommand: "energy",
        p: Some(angles.p()),
        nu: Some(run.nu),
        d: Some(a.mps.fock_dim),
        delta: Some(a.mps.svd_cutoff),
        chi_max_observed: Some(diag.max_bond),
        discarded_weight: Some(diag.discarded_weight),
        ..Row::default()
    })
}

enum InitSource {
    Given(PathBuf),
    Fourier(PathBuf),
    Random,
}

fn init_source(s: &str) -> InitSource {
    if s == "random" {
        InitSource::Random
    } else if let Some(rest) = s.strip_prefix("fourier:") {
        InitSource::Fourier(PathBuf::from(rest))
    } else {
        InitSource::Given(PathBuf::from(s))
    }
}

fn optimize_cmd(a: &OptimizeArgs) -> Result<Row> {
    let mut cfg = OptimizerConfig::new(a.p);
    cfg.method = a.method.parse::<Method>()?;
    cfg.seed = a.seed;
    if let Some(m) = a.max_evals {
        cfg.max_evals = m;
    }
    cfg.init = match init_source(&a.init) {
        InitSource::Random => Init::Random,
        InitSource::Given(p) => Init::Given(read_angles(p)?),
        InitSource::Fourier(p) => Init::Fourier(read_angles(p)?),
    };
    let run = match a.evaluator.as_str() {
        "exact" => optimize(a.p, &cfg, &ExactObjective::default())?,
        "mps" => {
            let obj = MpsObjective {
                d: FockDim::new(a.mps.fock_dim)?,
                policy: policy(&a.mps)?,
                cfg: sb_config(&a.mps)?,
            };
            optimize(a.p, &cfg, &obj)?
        }
        other => return Err(usage(format!("unknown evaluator `{other}` (expected mps or exact)"))),
    };
    println!("{}", sig15(run.best_nu));
    eprintln!("{} evaluations, {} restarts", run.eval_count, run.restarts);
    match &a.out {
        Some(path) => write_angles(path, &run.best_angles)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&skqaoa::gmatrix::AngleFile::from(&run.best_angles))?
        ),
    }
    Ok(Row {
        subcommand: "optimize",
        p: Some(a.p),
        nu: Some(run.best_nu),
        d: (a.evaluator == "mps").then_some(a.mps.fock_dim),
        delta: (a.evaluator == "mps").then_some(a.mps.svd_cutoff),
        ..Row::default()
    })
}

fn fit_cmd(a: &FitArgs) -> Result<Row> {
    let series = match &a.data {
        Some(p) => EnergySeries::from_csv(&std::fs::read_to_string(p)?)?,
        None => EnergySeries::published(),
    };
    let model = a.model.parse::<Model>()?;
    let report = if a.bootstrap > 0 {
        fit::bootstrap_ci(&series, model, a.p_min, a.p_max, a.parisi, a.bootstrap, a.seed)?
    } else {
        fit::fit(&series, model, a.p_min, a.p_max, a.parisi)?
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    if let Some(p) = &a.plot_data {
        let rows = fit::eps_series(&series.window(a.p_min, a.p_max), a.parisi)?;
        let mut w = writer(Some(p))?;
        writeln!(w, "p,p_pow_neg_eta,eps,eps_fit")?;
        for (p, x, e) in fit::rescaled_rows(&report, &rows) {
            writeln!(w, "{p},{x:e},{e:e},{:e}", report.predict(p as f64))?;
        }
        w.flush()?;
    }
    Ok(Row {
        subcommand: "fit",
        ..Row::default()
    })
}

fn finite(a: &FiniteArgs) -> Result<Row> {
    let angles: Vec<Angles> = a
        .p_list
        .iter()
        .map(|p| {
            let ang: Angles = read_angles(a.angles_dir.join(format!("p{p}.json")))?;
            if ang.p() != *p {
                return Err(usage(format!("p{p}.json holds angles for p = {}", ang.p())));
            }
            Ok(ang)
        })
        .collect::<Result<_>>()?;
    let mut cells: Vec<CellResult> = Vec::new();
    for &n in &a.n_list {
        cells.extend(run_cell(n, &angles, a.instances, a.seed)?);
    }
    let mut w = writer(a.out.as_ref())?;
    writeln!(w, "n,p,instances,mean_ar,stderr_ar,mean_p_success,stderr_p_success")?;
    for c in &cells {
        writeln!(
            w,
            "{},{},{},{:.10},{:.3e},{:.10},{:.3e}",
            c.n, c.p, c.instances, c.mean_ar, c.stderr_ar, c.mean_p_success, c.stderr_p_success
        )?;
    }
    w.flush()?;
    drop(w);
    for &p in &a.p_list {
        let rows: Vec<(usize, f64)> = cells
            .iter()
            .filter(|c| c.p == p)
            .map(|c| (c.n, c.mean_p_success))
            .collect();
        if let Ok((kappa, amp)) = success_decay_fit(&rows) {
            eprintln!("p = {p}: success probability ≈ {amp:.4} · 2^(-{kappa:.5} n)");
        }
    }
    Ok(Row {
        subcommand: "finite",
        ..Row::default()
    })
}

fn read_l(path: &Path) -> Result<DMatrix<Complex64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                let c = c.trim();
                c.parse::<Complex64>()
                    .map_err(|_| Error::Parse(format!("L line {}: bad entry `{c}`", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) || cols == 0 {
        return Err(Error::Parse("L must be a non-empty rectangular matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn bound(a: &BoundArgs) -> Result<Row> {
    let angles: Angles = read_angles(&a.angles)?;
    let p = angles.p();
    let l = if a.l == "worst-case" {
        DMatrix::from_element(p, p, Complex64::new(1.0, 0.0))
    } else {
        read_l(Path::new(&a.l))?
    };
    let budget = truncation_budget(&l, angles.gamma())?;
    for (i, d) in budget.d_star.iter().enumerate() {
        println!("d_star[{}] = {}", i + 1, sig15(*d));
    }
    println!("max d_star = {}", sig15(budget.max_d_star()));
    println!("required d = {}", required_dim(&budget, a.target)?);
    Ok(Row {
        subcommand: "truncation-bound",
        p: Some(p),
        ..Row::default()
    })
}

fn crosscheck(a: &CrosscheckArgs) -> Result<Row> {
    let angles: Angles = match (&a.angles, a.random_p) {
        (Some(path), _) => read_angles(path)?,
        (None, Some(p)) => Angles::random(p, 1.0, a.seed)?,
        (None, None) => unreachable!("validated before dispatch"),
    };
    let cfg = ExactConfig {
        p_cap: a.p_cap,
        workers: 0,
    };
    let exact = nu_exact(&angles, &cfg)?.nu;
    let sb = sb_config(&a.mps)?;
    let run = run_spin_boson(&angles, FockDim::new(a.mps.fock_dim)?, &policy(&a.mps)?, &sb)?;
    let err = (run.nu - exact).abs();
    println!("nu_exact = {}", sig15(exact));
    println!("nu_mps   = {}", sig15(run.nu));
    println!("abs_err  = {err:.3e}");
    println!("rel_err  = {:.3e}", if exact != 0.0 { err / exact.abs() } else { err });

    if !a.sweep_d.is_empty() || !a.sweep_delta.is_empty() {
        let ds = if a.sweep_d.is_empty() { vec![a.mps.fock_dim] } else { a.sweep_d.clone() };
        let deltas = if a.sweep_delta.is_empty() {
            vec![a.mps.svd_cutoff]
        } else {
            a.sweep_delta.clone()
        };
        let mut w = writer(a.grid.as_ref())?;
        writeln!(w, "d,delta,nu_mps,nu_exact,abs_err,rel_err")?;
        for &d in &ds {
            for &delta in &deltas {
                let mut m = a.mps.clone();
                m.fock_dim = d;
                m.svd_cutoff = delta;
                let nu = run_spin_boson(&angles, FockDim::new(d)?, &policy(&m)?, &sb)?.nu;
                let e = (nu - exact).abs();
                let rel = if exact != 0.0 { e / exact.abs() } else { e };
                writeln!(w, "{d},{delta:e},{nu:.15e},{exact:.15e},{e:.3e},{rel:.3e}")?;
            }
        }
        w.flush()?;
    }
    Ok(Row {
        subcommand: "crosscheck",
        p: Some(angles.p()),
        nu: Some(run.nu),
        d: Some(a.mps.fock_dim),
        delta: Some(a.mps.svd_cutoff),
        chi_max_observed: Some(run.diagnostics.max_bond),
        discarded_weight: Some(run.diagnostics.discarded_weight),
        ..Row::default()
    })
}
