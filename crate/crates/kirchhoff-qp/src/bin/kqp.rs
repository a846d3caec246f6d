//! `kqp`: solve, diagnose and scan from a TOML configuration.

use clap::{Args, Parser, Subcommand};
use kirchhoff_qp::config::{RunConfig, VERSION};
use kirchhoff_qp::kirchhoff::{recover_v0, ProblemData};
use kirchhoff_qp::measure_scan::{fitted_exponent, scan_lambda};
use kirchhoff_qp::multiscale::{diagnose, ShiftedOperator};
use kirchhoff_qp::nash_moser::{check_exponents, solve, ExponentSet, TraceRecord};
use kirchhoff_qp::{KqpError, Result, TorusFunction};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kqp", version, about = "Quasi-periodic solutions of the forced Kirchhoff equation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// output directory (created if missing)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// worker threads (overrides the config)
    #[arg(long)]
    threads: Option<usize>,
    /// recorded in the outputs; the computations themselves are deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// run even if the exponent constraints fail
    #[arg(long)]
    override_exponents: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Nash-Moser solve at one lambda
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// separation / regularity diagnostics of the shifted operator
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
    },
    /// scan of lambda for the bad set
    Scan {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize)]
struct Stamp<'a> {
    version: &'a str,
    config_hash: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    #[serde(flatten)]
    stamp: &'a Stamp<'a>,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

fn setup(c: &Common) -> Result<(RunConfig, ExponentSet, Vec<String>)> {
    let cfg = RunConfig::load(&c.config)?;
    let threads = c.threads.or(cfg.threads);
    if let Some(t) = threads {
        // ignore the error if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let es = cfg.checked_exponents(c.override_exponents)?;
    let (_, warnings) = check_exponents(&es);
    fs::create_dir_all(&c.out).map_err(|e| KqpError::Io(format!("{}: {e}", c.out.display())))?;
    Ok((cfg, es, warnings))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| KqpError::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(v).expect("json") + "\n"))
}

fn stamp<'a>(cfg: &'a RunConfig, seed: u64) -> Stamp<'a> {
    Stamp { version: VERSION, config_hash: &cfg.hash, seed }
}

fn cmd_solve(c: &Common, lambda: Option<f64>) -> Result<ExitCode> {
    let (cfg, es, warnings) = setup(c)?;
    let pd = cfg.problem_data()?;
    let lambda = lambda.unwrap_or(cfg.problem.lambda);
    let out = solve(&pd, lambda, &es, &cfg.newton_options());
    let st = stamp(&cfg, c.seed);

    let mut trace = String::new();
    for r in &out.trace {
        trace += &serde_json::to_string(&TraceLine { stamp: &st, record: r }).expect("json");
        trace.push('\n');
    }
    write(&c.out.join("trace.jsonl"), &trace)?;

    let residual = out.trace.last().map(|t| t.residual_s0);
    let v0 = recover_v0(&pd, lambda).ok();
    write_json(
        &c.out.join("solution.json"),
        &json!({
            "version": VERSION,
            "config_hash": cfg.hash,
            "seed": c.seed,
            "lambda": lambda,
            "epsilon": pd.epsilon,
            "converged": out.converged,
            "residual_s0": residual,
            "u": out.u.to_json_value(),
            "v0": v0.as_ref().map(TorusFunction::to_json_value),
        }),
    )?;

    let status = match (&out.failure, out.converged) {
        (_, true) => "converged",
        (Some(KqpError::BadParameter(_)), _) => "bad_parameter",
        (Some(_), _) => "failed",
        (None, false) => "max_steps",
    };
    write_json(
        &c.out.join("summary.json"),
        &json!({
            "version": VERSION,
            "config_hash": cfg.hash,
            "seed": c.seed,
            "command": "solve",
            "status": status,
            "lambda": lambda,
            "epsilon": pd.epsilon,
            "steps": out.trace.len().saturating_sub(1),
            "residual_s0": residual,
            "error": out.failure.as_ref().map(|e| e.to_string()),
            "exponents": es,
            "exponent_warnings": warnings,
        }),
    )?;

    println!("kqp {VERSION} solve  config {}", &cfg.hash[..12]);
    println!("  lambda = {lambda}, epsilon = {:e}, box = {:?}", pd.epsilon, [cfg.work_box().lphi, cfg.work_box().lx]);
    for r in &out.trace {
        println!("  step {:2}  N = {:8.2}  |F|_s0 = {:.3e}  |h|_s1 = {:.3e}", r.n, r.n_scale, r.residual_s0, r.step_norm_s1);
    }
    println!("  status: {status}");
    if let Some(e) = &out.failure {
        println!("  error: {e}");
    }
    Ok(if out.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn solved_u(pd: &ProblemData, cfg: &RunConfig, es: &ExponentSet, lambda: f64) -> (TorusFunction, bool) {
    let out = solve(pd, lambda, es, &cfg.newton_options());
    if out.converged {
        (out.u, true)
    } else {
        (TorusFunction::zeros_box(cfg.work_box()), false)
    }
}

fn cmd_diagnose(c: &Common, lambda: Option<f64>, theta: Option<f64>, n: Option<usize>) -> Result<ExitCode> {
    let (mut cfg, es, _) = setup(c)?;
    if let Some(n) = n {
        cfg.diagnose.n = n;
    }
    let theta = theta.unwrap_or(cfg.diagnose.theta);
    let pd = cfg.problem_data()?;
    let lambda = lambda.unwrap_or(cfg.problem.lambda);
    let n = cfg.diagnose.n;
    let (u, converged) = if n == 0 { (TorusFunction::zeros_box(cfg.work_box()), true) } else { solved_u(&pd, &cfg, &es, lambda) };
    let op = ShiftedOperator::new(&pd, lambda, &u)?;
    let report = diagnose(&op, theta, n, &cfg.diagnose_options(&es))?;
    write_json(
        &c.out.join("summary.json"),
        &json!({
            "version": VERSION,
            "config_hash": cfg.hash,
            "seed": c.seed,
            "command": "diagnose",
            "epsilon": pd.epsilon,
            "solver_converged": converged,
            "report": report,
        }),
    )?;
    println!("kqp {VERSION} diagnose  config {}", &cfg.hash[..12]);
    println!(
        "  lambda = {lambda}, theta = {theta}, N = {n}: {} sites, {} singular, {} bad, separation {}, {} bad-theta intervals",
        report.ambient_sites,
        report.n_singular,
        report.n_bad,
        if report.separation_ok { "ok" } else { "violated" },
        report.interval_count
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(c: &Common) -> Result<ExitCode> {
    let (cfg, es, _) = setup(c)?;
    let pd = cfg.problem_data()?;
    let opts = cfg.scan_options(&es);
    let mut eps = vec![pd.epsilon];
    for e in &cfg.scan.epsilons {
        if !eps.contains(e) {
            eps.push(*e);
        }
    }
    let mut csv = format!("# kqp {VERSION} config {}\n", cfg.hash);
    let mut reports = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let r = scan_lambda(&pd.with_epsilon(e), &opts);
        if i == 0 {
            csv += &r.csv_header();
            csv.push('\n');
        }
        for row in r.csv_rows() {
            csv += &row;
            csv.push('\n');
        }
        reports.push(r);
    }
    write(&c.out.join("scan.csv"), &csv)?;
    let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.epsilon, r.bad_fraction)).collect();
    let fit = fitted_exponent(&pts);
    write_json(
        &c.out.join("summary.json"),
        &json!({
            "version": VERSION,
            "config_hash": cfg.hash,
            "seed": c.seed,
            "command": "scan",
            "scans": reports,
            "fitted_exponent": fit,
        }),
    )?;
    println!("kqp {VERSION} scan  config {}", &cfg.hash[..12]);
    for r in &reports {
        println!("  epsilon = {:e}: bad fraction {:.4} over {} lambdas", r.epsilon, r.bad_fraction, r.n_lambda);
    }
    match fit {
        Some(a) => println!("  fitted exponent {a:.3}"),
        None => println!("  fitted exponent: not enough nonzero points"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Solve { common, lambda } => cmd_solve(common, *lambda),
        Command::Diagnose { common, lambda, theta, n } => cmd_diagnose(common, *lambda, *theta, *n),
        Command::Scan { common } => cmd_scan(common),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "kqp: {e}");
            ExitCode::from(if e.is_mathematical() { 2 } else { 1 })
        }
    }
}
