//! Truncated Newton scheme on the scales N_n = N0^{(3/2)^n}, with the linearised
//! operator inverted through the reduction: L(u)^{-1} ~ Phi2 (L_N + Pi_N^perp)^{-1} Phi1.

use crate::decay_matrix::{index_set, DecayMatrix, SINGULAR_CONDITION};
use crate::error::{KqpError, Result};
use crate::fourier::{ModeBox, TorusFunction, C64};
use crate::kirchhoff::{residual, ProblemData};
use crate::reduction::{reduce, ReductionOptions, ReductionResult};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub tau: f64,
    pub delta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub s0: f64,
    pub s1: f64,
    #[serde(rename = "S")]
    pub big_s: f64,
    pub sigma: f64,
}

impl ExponentSet {
    /// a = tau + delta s1
    pub fn frak_a(&self) -> f64 {
        self.tau + self.delta * self.s1
    }

    /// Feasible set built in dependency order: delta = 0.1, sigma = 2(nu + 1),
    /// s0 = [(nu + d)/2] + 1, s1 = s0 + sigma + 1, then kappa1, kappa2, S and kappa3,
    /// each one unit above its lower bound.
    pub fn greedy(nu: usize, d: usize, tau: f64) -> Self {
        let delta = 0.1;
        let sigma = 2.0 * (nu as f64 + 1.0);
        let s0 = crate::fourier::s0_of(nu, d) as f64;
        let s1 = s0 + sigma + 1.0;
        let a = tau + delta * s1;
        let kappa1 = sigma + 1.0;
        let kappa2 = (3.0 * a + 1.5 * (s1 - s0) + 3.0 + 2.25 * kappa1).max(12.0 * a + 24.0) + 1.0;
        // kappa3 = base + 3 delta X with X = S - s1; the last inequality is linear in X
        let base = 6.0 * a + 6.0 + 3.0 * sigma + 1.5 * kappa1 + 1.0;
        let rhs = 2.0 * sigma + 2.0 + 2.0 * a + (2.0 / 3.0) * base + kappa2;
        let x = rhs / (1.0 - 3.0 * delta) + 1.0;
        let kappa3 = base + 3.0 * delta * x;
        ExponentSet { tau, delta, kappa1, kappa2, kappa3, s0, s1, big_s: s1 + x, sigma }
    }
}

/// Evaluates every constraint on the exponents and lists the violated ones.
pub fn check_exponents(es: &ExponentSet) -> (bool, Vec<String>) {
    let a = es.frak_a();
    let mut bad = Vec::new();
    if !(es.delta > 0.0 && es.delta < 1.0 / 3.0) {
        bad.push(format!("delta = {} not in (0, 1/3)", es.delta));
    }
    if es.tau <= 0.0 {
        bad.push(format!("tau = {} must be positive", es.tau));
    }
    if !(es.s1 > es.s0 && es.big_s > es.s1) {
        bad.push("need s0 < s1 < S".into());
    }
    if es.kappa1 <= es.sigma {
        bad.push(format!("kappa1 = {} must exceed sigma = {}", es.kappa1, es.sigma));
    }
    let k2 = (3.0 * a + 1.5 * (es.s1 - es.s0) + 3.0 + 2.25 * es.kappa1).max(12.0 * a + 24.0);
    if es.kappa2 <= k2 {
        bad.push(format!("kappa2 = {} must exceed {k2}", es.kappa2));
    }
    let k3 = 6.0 * a + 6.0 + 3.0 * es.delta * (es.big_s - es.s1) + 3.0 * es.sigma + 1.5 * es.kappa1;
    if es.kappa3 <= k3 {
        bad.push(format!("kappa3 = {} must exceed {k3}", es.kappa3));
    }
    let lhs = (1.0 - es.delta) * (es.big_s - es.s1);
    let rhs = 2.0 * es.sigma + 2.0 + 2.0 * a + (2.0 / 3.0) * es.kappa3 + es.kappa2;
    if lhs <= rhs {
        bad.push(format!("(1 - delta)(S - s1) = {lhs} must exceed {rhs}"));
    }
    (bad.is_empty(), bad)
}

/// N_n = N0^{(3/2)^n}.
pub fn scale(n0: f64, n: u32) -> f64 {
    n0.powf(1.5f64.powi(n as i32))
}

/// Radius of the Galerkin block used at scale N inside the working box.
fn block_radius(n: f64, work: ModeBox) -> (usize, usize) {
    let r = n.floor().max(0.0) as usize;
    (r.min(work.lphi), r.min(work.lx))
}

/// L_N = Pi_N ((omega.d)^2 - mu Lap + R2) Pi_N on E_N with j != 0, inside the working box.
pub fn build_truncated_l(red: &ReductionResult, n: f64, work: ModeBox) -> DecayMatrix {
    let (rp, rx) = block_radius(n, work);
    let set = index_set(work.nu, work.d, rp, rx);
    red.diagonal(&set).add(&red.remainder.matrix(&set, &set))
}

/// Dense LU factors with a 1-norm condition estimate (Hager's estimator).
struct Factored {
    lu: nalgebra::linalg::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Estimate of ||A^{-1}||_1 for Hermitian A, so that A^{-H} solves reuse the factors.
fn hager_inverse_norm(lu: &nalgebra::linalg::LU<C64, nalgebra::Dyn, nalgebra::Dyn>, n: usize) -> Option<f64> {
    let mut x = DVector::from_element(n, C64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        est = y.iter().map(|v| v.norm()).sum();
        let xi = y.map(|v| if v.norm() > 0.0 { v / v.norm() } else { C64::new(1.0, 0.0) });
        let z = lu.solve(&xi)?;
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |(bj, bv), (j, v)| if v.norm() > bv { (j, v.norm()) } else { (bj, bv) });
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if zmax <= zx {
            break;
        }
        x = DVector::from_element(n, C64::new(0.0, 0.0));
        x[jmax] = C64::new(1.0, 0.0);
    }
    Some(est)
}

fn factor(m: &DecayMatrix) -> Result<Factored> {
    let n = m.nrows();
    let norm = norm1(&m.data);
    let lu = m.data.clone().lu();
    let inv = hager_inverse_norm(&lu, n).ok_or_else(|| KqpError::StepFailed("LU factorisation is singular".into()))?;
    let condition = norm * inv;
    if !condition.is_finite() {
        return Err(KqpError::StepFailed("non-finite condition estimate".into()));
    }
    Ok(Factored { lu, condition })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub n: u32,
    #[serde(rename = "N_n")]
    pub n_scale: f64,
    pub residual_s0: f64,
    pub step_norm_s1: f64,
    #[serde(rename = "u_norm_S")]
    pub u_norm_s: f64,
    pub condition_estimate: Option<f64>,
    pub wall_ms: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub n0: f64,
    pub max_steps: u32,
    pub tol: f64,
    /// Working Galerkin box (phase radius, space radius).
    pub work: ModeBox,
}

/// (S1)-(S4) surrogates; violations are warnings only since the constants are unknown.
fn surrogate_warnings(es: &ExponentSet, n_scale: f64, u: &TorusFunction, rec: &TraceRecord, step: bool) -> Vec<String> {
    let mut w = Vec::new();
    let max_mode = u.nonzeros().iter().map(|(k, _)| k[..u.nu() + u.d()].iter().map(|c| c.abs()).max().unwrap_or(0)).max().unwrap_or(0);
    if max_mode as f64 > n_scale {
        w.push(format!("S1: support radius {max_mode} exceeds N_n = {n_scale:.3}"));
    }
    if step && rec.step_norm_s1 > n_scale.powf(-es.kappa1) {
        w.push(format!("S2: step norm {:e} above N_n^-kappa1 = {:e}", rec.step_norm_s1, n_scale.powf(-es.kappa1)));
    }
    if rec.residual_s0 > n_scale.powf(-es.kappa2) {
        w.push(format!("S3: residual {:e} above N_n^-kappa2 = {:e}", rec.residual_s0, n_scale.powf(-es.kappa2)));
    }
    if rec.u_norm_s > n_scale.powf(es.kappa3) {
        w.push(format!("S4: ||u||_S = {:e} above N_n^kappa3 = {:e}", rec.u_norm_s, n_scale.powf(es.kappa3)));
    }
    w
}

fn record(es: &ExponentSet, n: u32, n_scale: f64, u: &TorusFunction, f_norm: f64, step_norm: f64, cond: Option<f64>, start: Instant) -> TraceRecord {
    let mut rec = TraceRecord {
        n,
        n_scale,
        residual_s0: f_norm,
        step_norm_s1: step_norm,
        u_norm_s: u.sobolev_norm(es.big_s),
        condition_estimate: cond,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        warnings: vec![],
    };
    rec.warnings = surrogate_warnings(es, n_scale, u, &rec, n > 0);
    rec
}

/// Newton correction at scale N: h = -Pi_N Phi2 (L_N^{-1} Pi_N Phi1 F + Pi_N^perp Phi1 F).
/// Returns (h, condition estimate of L_N).
pub fn newton_correction(pd: &ProblemData, lambda: f64, u: &TorusFunction, n_scale: f64, work: ModeBox) -> Result<(TorusFunction, f64)> {
    let u = u.resize(work);
    let f = residual(pd, lambda, &u)?;
    let red = reduce(pd, lambda, &u, &ReductionOptions::for_nu(work.nu))?;
    let ln = build_truncated_l(&red, n_scale, work);
    let y = red.phi1(&f);
    if ln.nrows() == 0 {
        let h = red.phi2(&y).project(n_scale, false).scale(-1.0);
        return Ok((h, 1.0));
    }
    let fac = factor(&ln)?;
    if fac.condition > SINGULAR_CONDITION {
        return Err(KqpError::BadParameter(format!(
            "truncated operator at lambda = {lambda} is near-singular (condition {:e})",
            fac.condition
        )));
    }
    let rhs = DVector::from_iterator(ln.nrows(), ln.rows.iter().map(|k| y.get_index(k)));
    let x = fac.lu.solve(&rhs).ok_or_else(|| KqpError::StepFailed("solve failed".into()))?;
    let mut z = y.project(n_scale, true);
    for (k, v) in ln.rows.iter().zip(x.iter()) {
        let o = work.offset(&k.coords()).expect("block inside working box");
        z.coeffs_mut()[o] = *v;
    }
    let mut h = red.phi2(&z).project(n_scale, false).scale(-1.0);
    h.symmetrize();
    Ok((h, fac.condition))
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub u: TorusFunction,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub failure: Option<KqpError>,
}

/// Iterates Newton steps from u0 = 0 until ||F(u_n)||_{s0} <= tol or max_steps.
/// A failing step ends the run; the error is returned together with the trace.
pub fn solve(pd: &ProblemData, lambda: f64, es: &ExponentSet, opts: &NewtonOptions) -> SolveOutcome {
    let start = Instant::now();
    let s0 = es.s0;
    let mut u = TorusFunction::zeros_box(opts.work);
    let mut trace = Vec::new();
    let f0 = match residual(pd, lambda, &u) {
        Ok(f) => f.sobolev_norm(s0),
        Err(e) => return SolveOutcome { u, trace, converged: false, failure: Some(e) },
    };
    trace.push(record(es, 0, scale(opts.n0, 0), &u, f0, 0.0, None, start));
    let mut f_norm = f0;
    let mut n = 0;
    while f_norm > opts.tol && n < opts.max_steps {
        let n_next = scale(opts.n0, n + 1);
        let step = newton_correction(pd, lambda, &u, n_next, opts.work).and_then(|(h, cond)| {
            let next = u.add(&h);
            let f = residual(pd, lambda, &next)?;
            Ok((h, next, f.sobolev_norm(s0), cond))
        });
        match step {
            Ok((h, next, fnew, cond)) => {
                n += 1;
                u = next;
                f_norm = fnew;
                trace.push(record(es, n, n_next, &u, f_norm, h.sobolev_norm(es.s1), Some(cond), start));
            }
            Err(e) => {
                let e = match e {
                    KqpError::Singular(c) => KqpError::StepFailed(format!("step {} singular (condition {c:e})", n + 1)),
                    other => other,
                };
                return SolveOutcome { u, trace, converged: false, failure: Some(e) };
            }
        }
    }
    SolveOutcome { converged: f_norm <= opts.tol, u, trace, failure: None }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeumannReport {
    pub inverse_norm: f64,
    pub perturbation_norm: f64,
    pub dlambda_admissible: bool,
    pub neumann_applies: bool,
    pub neumann_bound: f64,
    pub perturbed_inverse_norm: f64,
    pub holds: bool,
}

/// Invertibility of L_N(lambda + dlambda) from that of L_N(lambda) by a Neumann series:
/// if ||L^{-1}|| ||E|| < 1 then ||(L + E)^{-1}|| <= ||L^{-1}|| / (1 - ||L^{-1}|| ||E||).
/// Norms are operator 2-norms; the perturbed inverse is refactorised directly.
pub fn perturb_lambda_invertibility(pd: &ProblemData, u: &TorusFunction, n_scale: f64, lambda: f64, dlambda: f64, kappa: f64) -> Result<NeumannReport> {
    let work = u.mode_box();
    let opts = ReductionOptions::for_nu(work.nu);
    let l0 = build_truncated_l(&reduce(pd, lambda, u, &opts)?, n_scale, work);
    let l1 = build_truncated_l(&reduce(pd, lambda + dlambda, u, &opts)?, n_scale, work);
    let inverse_norm = 1.0 / l0.min_singular_value();
    let perturbation_norm = l1.sub(&l0).spectral_norm();
    let q = inverse_norm * perturbation_norm;
    let neumann_applies = q < 1.0;
    let neumann_bound = if neumann_applies { inverse_norm / (1.0 - q) } else { f64::INFINITY };
    let perturbed_inverse_norm = 1.0 / l1.min_singular_value();
    Ok(NeumannReport {
        inverse_norm,
        perturbation_norm,
        dlambda_admissible: dlambda.abs() <= n_scale.powf(-kappa),
        neumann_applies,
        neumann_bound,
        perturbed_inverse_norm,
        holds: !neumann_applies || perturbed_inverse_norm <= neumann_bound * (1.0 + 1e-10),
    })
}

/// Number of sites of E_N with j != 0 inside the working box.
pub fn truncated_dimension(n_scale: f64, work: ModeBox) -> usize {
    let (rp, rx) = block_radius(n_scale, work);
    index_set(work.nu, work.d, rp, rx).len()
}

/// Convenience for tests and diagnostics: the truncated operator at u.
pub fn truncated_operator(pd: &ProblemData, lambda: f64, u: &TorusFunction, n_scale: f64) -> Result<DecayMatrix> {
    let red = reduce(pd, lambda, u, &ReductionOptions::for_nu(u.nu()))?;
    Ok(build_truncated_l(&red, n_scale, u.mode_box()))
}
