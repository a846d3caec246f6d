//! lambda-grid classification into the good parameter sets and the bad-parameter fraction.

use crate::decay_matrix::window;
use crate::diophantine::{in_i_bar, in_i_tilde};
use crate::error::{KqpError, Result};
use crate::fourier::{MultiIndex, TorusFunction};
use crate::kirchhoff::ProblemData;
use crate::multiscale::{bad_theta_set, bad_threshold, frak_e, theta_grid, ShiftedOperator, ThetaScanMode};
use crate::nash_moser::{solve, ExponentSet, NewtonOptions};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub lambda_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub j0_list: Vec<Vec<i32>>,
    pub tau0: f64,
    pub tau1: f64,
    /// N0 of the Diophantine-type sets.
    pub n0: usize,
    pub max_coeff: usize,
    pub newton: NewtonOptions,
    pub exponents: ExponentSet,
}

/// Uniform grid of `n` points on [lo, hi] (endpoints included).
pub fn lambda_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// theta range [-10 sqrt(d) N, 10 sqrt(d) N] outside of which L_{N,j0}(theta) is negative definite.
pub fn theta_range(d: usize, n: usize) -> (f64, f64) {
    let r = 10.0 * (d as f64).sqrt() * n as f64;
    (-r, r)
}

/// Grid measure of {theta : ||L_{N,j0}(theta)^{-1}||_0 > N^{tau1}/2}; the grid must cover the
/// theta range and have step at most N^{-tau1}/4.
pub fn theta_measure(op: &ShiftedOperator, j0: &[i32], n: usize, tau1: f64, grid: &[f64]) -> Result<f64> {
    let (lo, hi) = theta_range(j0.len(), n);
    let step = if grid.len() > 1 { grid[1] - grid[0] } else { f64::INFINITY };
    if grid.is_empty() || grid[0] > lo || grid[grid.len() - 1] < hi {
        return Err(KqpError::DomainError(format!("theta grid must cover [{lo}, {hi}]")));
    }
    if step > (n as f64).powf(-tau1) / 4.0 * (1.0 + 1e-12) {
        return Err(KqpError::DomainError("theta grid too coarse".into()));
    }
    let b = bad_theta_set(op, j0, n, grid, tau1, ThetaScanMode::Pruned);
    Ok(b.bad_points as f64 * step)
}

/// Number of intervals of length at most N^{-tau1} needed to cover the merged bad intervals.
pub fn covering_count(intervals: &[(f64, f64)], step: f64, n: usize, tau1: f64) -> usize {
    let len = (n as f64).powf(-tau1);
    intervals.iter().map(|(a, b)| (((b - a + step) / len).ceil() as usize).max(1)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub in_i_bar: bool,
    pub in_i_tilde: bool,
    pub solver_converged: bool,
    pub solver_residual: f64,
    /// ||L_N^{-1}||_0 <= N^{tau1}/2 per N.
    pub j_n_ok: Vec<bool>,
    /// bad-theta set coverable by N^e intervals of length N^{-tau1}, per N (all j0).
    pub g0_n_ok: Vec<bool>,
    /// covering counts per (j0, N), j0-major.
    pub interval_counts: Vec<usize>,
    /// bad-theta measure per (j0, N), j0-major.
    pub theta_measures: Vec<f64>,
    pub bad: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub epsilon: f64,
    pub n_lambda: usize,
    pub n_list: Vec<usize>,
    pub j0_list: Vec<Vec<i32>>,
    pub frak_e: u32,
    pub bad_fraction: f64,
    #[serde(skip)]
    pub rows: Vec<LambdaRow>,
}

fn scan_one(pd: &ProblemData, lambda: f64, opts: &ScanOptions) -> LambdaRow {
    let d = pd.d;
    let in_bar = in_i_bar(lambda, &pd.fd, d, opts.n0, opts.tau0);
    let in_tilde = in_i_tilde(lambda, &pd.fd, opts.n0, opts.max_coeff);
    let out = solve(pd, lambda, &opts.exponents, &opts.newton);
    let residual = out.trace.last().map(|t| t.residual_s0).unwrap_or(f64::NAN);
    let u = if out.converged { out.u } else { TorusFunction::zeros_box(opts.newton.work) };
    let mut error = out.failure.map(|e| e.to_string());
    let op = match ShiftedOperator::new(pd, lambda, &u) {
        Ok(op) => op,
        Err(e) => {
            error = Some(e.to_string());
            ShiftedOperator::unperturbed(pd.omega(lambda), lambda)
        }
    };
    let e = frak_e(pd.fd.nu, d);
    let mut j_ok = Vec::new();
    let mut g_ok = Vec::new();
    let mut counts = vec![0; opts.j0_list.len() * opts.n_list.len()];
    let mut measures = vec![0.0; opts.j0_list.len() * opts.n_list.len()];
    for (ni, &n) in opts.n_list.iter().enumerate() {
        let sites = window(&MultiIndex::zero(pd.fd.nu, d), n);
        j_ok.push(op.matrix(0.0, &sites).min_singular_value() >= bad_threshold(n, opts.tau1));
        let (lo, hi) = theta_range(d, n);
        let grid = theta_grid(lo, hi, (n as f64).powf(-opts.tau1) / 4.0);
        let mut ok = true;
        for (ji, j0) in opts.j0_list.iter().enumerate() {
            let b = bad_theta_set(&op, j0, n, &grid, opts.tau1, ThetaScanMode::Pruned);
            let c = covering_count(&b.intervals, b.step, n, opts.tau1);
            ok &= (c as f64) <= (n as f64).powi(e as i32);
            counts[ji * opts.n_list.len() + ni] = c;
            measures[ji * opts.n_list.len() + ni] = b.bad_points as f64 * b.step;
        }
        g_ok.push(ok);
    }
    let bad = !(in_bar && in_tilde && out.converged && j_ok.iter().all(|b| *b) && g_ok.iter().all(|b| *b));
    LambdaRow {
        lambda,
        in_i_bar: in_bar,
        in_i_tilde: in_tilde,
        solver_converged: out.converged,
        solver_residual: residual,
        j_n_ok: j_ok,
        g0_n_ok: g_ok,
        interval_counts: counts,
        theta_measures: measures,
        bad,
        error,
    }
}

/// Classifies every lambda of the grid; per-lambda failures are recorded, never fatal.
pub fn scan_lambda(pd: &ProblemData, opts: &ScanOptions) -> ScanReport {
    let rows: Vec<LambdaRow> = opts.lambda_grid.par_iter().map(|&l| scan_one(pd, l, opts)).collect();
    let nbad = rows.iter().filter(|r| r.bad).count();
    ScanReport {
        epsilon: pd.epsilon,
        n_lambda: rows.len(),
        n_list: opts.n_list.clone(),
        j0_list: opts.j0_list.clone(),
        frak_e: frak_e(pd.fd.nu, pd.d),
        bad_fraction: if rows.is_empty() { 0.0 } else { nbad as f64 / rows.len() as f64 },
        rows,
    }
}

impl ScanReport {
    pub fn csv_header(&self) -> String {
        let mut h = vec!["epsilon".to_string(), "lambda".into(), "in_I_bar".into(), "in_I_tilde".into(), "solver_converged".into(), "solver_residual".into()];
        for n in &self.n_list {
            h.push(format!("J_N{n}_ok"));
        }
        for n in &self.n_list {
            h.push(format!("G0_N{n}_ok"));
        }
        for j0 in &self.j0_list {
            let tag: Vec<String> = j0.iter().map(|c| c.to_string()).collect();
            for n in &self.n_list {
                h.push(format!("intervals_j{}_N{n}", tag.join("_")));
                h.push(format!("bad_theta_measure_j{}_N{n}", tag.join("_")));
            }
        }
        h.push("bad".into());
        h.join(",")
    }

    pub fn csv_rows(&self) -> Vec<String> {
        let nn = self.n_list.len();
        self.rows
            .iter()
            .map(|r| {
                let mut f = vec![
                    format!("{:e}", self.epsilon),
                    format!("{:.12}", r.lambda),
                    (r.in_i_bar as u8).to_string(),
                    (r.in_i_tilde as u8).to_string(),
                    (r.solver_converged as u8).to_string(),
                    format!("{:.6e}", r.solver_residual),
                ];
                f.extend(r.j_n_ok.iter().map(|b| (*b as u8).to_string()));
                f.extend(r.g0_n_ok.iter().map(|b| (*b as u8).to_string()));
                for ji in 0..self.j0_list.len() {
                    for ni in 0..nn {
                        f.push(r.interval_counts[ji * nn + ni].to_string());
                        f.push(format!("{:.9e}", r.theta_measures[ji * nn + ni]));
                    }
                }
                f.push((r.bad as u8).to_string());
                f.join(",")
            })
            .collect()
    }
}

/// Least-squares slope of log(bad_fraction) against log(epsilon), skipping zero fractions.
pub fn fitted_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(e, b)| *e > 0.0 && *b > 0.0).map(|(e, b)| (e.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// D in the variables zeta = 1/lambda^2, eta = theta/lambda: D = lambda^2 (-(omega_bar.l + eta)^2 + mu zeta |j|^2).
pub fn diag_zeta_eta(omega_bar: &[f64], zeta: f64, eta: f64, mu: f64, k: &MultiIndex) -> f64 {
    let x = k.omega_dot(omega_bar) + eta;
    -x * x + mu * zeta * k.j_sq()
}

/// Compares the bad (lambda, theta) set {min_k |D_k| < t} computed directly and through
/// (zeta, eta); returns (mismatches, points). Mismatches can only occur at the boundary.
pub fn variable_change_agreement(omega_bar: &[f64], mu: f64, sites: &[MultiIndex], lambdas: &[f64], thetas: &[f64], t: f64) -> (usize, usize) {
    let mut mism = 0;
    for &l in lambdas {
        let omega: Vec<f64> = omega_bar.iter().map(|w| l * w).collect();
        let (zeta, scale) = (1.0 / (l * l), l * l);
        for &th in thetas {
            let direct = sites.iter().any(|k| {
                let x = k.omega_dot(&omega) + th;
                (-x * x + mu * k.j_sq()).abs() < t
            });
            let changed = sites.iter().any(|k| (scale * diag_zeta_eta(omega_bar, zeta, th / l, mu, k)).abs() < t);
            if direct != changed {
                mism += 1;
            }
        }
    }
    (mism, lambdas.len() * thetas.len())
}
