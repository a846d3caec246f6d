//! Reduction of the linearised operator to (omega.d_theta)^2 - mu Lap + R2 by a
//! reparametrisation of time A h = h(phi + omega alpha(phi)) and a multiplication B = b(theta).
//!
//! With L1 = rho^{-1} A^{-1} L A = (omega.d)^2 - mu Lap + a1 omega.d + rho^{-1} A^{-1} R A, the
//! first-order term is removed by b = exp(-(1/2)(omega.d)^{-1} a1). The remainder is then
//!
//!   R2 h = c(theta) h + 2 eps rho^{-1}(theta) w(theta, x) int w(theta, y) h(theta, y) dy,
//!
//! with c = -(1/2) omega.d a1 - a1^2 / 4 and w = A^{-1} Lap u.

use crate::decay_matrix::{index_set, DecayMatrix};
use crate::error::{KqpError, Result};
use crate::fourier::{s0_of, ModeBox, MultiIndex, TorusFunction, C64, MAX_DIM};
use crate::grid;
use crate::kirchhoff::{apply_linearized_unchecked, kirchhoff_coefficient, ProblemData};
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Grid size per phase axis for a phase box of radius k: twice the Nyquist count.
pub fn phase_grid_size(k: usize) -> usize {
    grid::even_at_least(2 * (2 * k + 1)).max(4)
}

/// e^{i m psi_{p,a}} for every point p, axis a and |m| <= radius.
struct PhaseTable {
    nu: usize,
    radius: usize,
    pows: Vec<C64>,
    npts: usize,
}

impl PhaseTable {
    fn new(points: &[Vec<f64>], nu: usize, radius: usize) -> Self {
        let w = 2 * radius + 1;
        let mut pows = vec![C64::new(0.0, 0.0); points.len() * nu * w];
        for (p, pt) in points.iter().enumerate() {
            for a in 0..nu {
                let base = (p * nu + a) * w;
                let e = C64::from_polar(1.0, pt[a]);
                let ei = e.conj();
                pows[base + radius] = C64::new(1.0, 0.0);
                for m in 1..=radius {
                    pows[base + radius + m] = pows[base + radius + m - 1] * e;
                    pows[base + radius - m] = pows[base + radius - m + 1] * ei;
                }
            }
        }
        PhaseTable { nu, radius, pows, npts: points.len() }
    }

    #[inline]
    fn factor(&self, p: usize, ell: &[i32]) -> C64 {
        let w = 2 * self.radius + 1;
        let mut f = C64::new(1.0, 0.0);
        for (a, &l) in ell.iter().enumerate().take(self.nu) {
            f *= self.pows[(p * self.nu + a) * w + (l + self.radius as i32) as usize];
        }
        f
    }
}

/// Real values of a phase function at arbitrary points.
pub fn eval_phase_at(f: &TorusFunction, points: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(f.d(), 0);
    let nu = f.nu();
    let table = PhaseTable::new(points, nu, f.mode_box().lphi);
    let nz = f.nonzeros();
    (0..table.npts)
        .map(|p| nz.iter().map(|(k, v)| (v * table.factor(p, &k[..nu])).re).sum())
        .collect()
}

fn phase_values_on_grid(f: &TorusFunction, g: usize) -> Vec<f64> {
    let dims = vec![g; f.nu()];
    grid::to_grid(f, &dims).iter().map(|v| v.re).collect()
}

/// Coefficients on the phase box of radius k from real samples on a g^nu grid.
pub fn analyze_phase(values: &[f64], nu: usize, g: usize, k: usize) -> (TorusFunction, f64) {
    let data: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    let (mut f, tail) = grid::from_grid(&data, &vec![g; nu], ModeBox::new(nu, 0, k, 0));
    f.symmetrize();
    (f, tail)
}

fn shifted(points: &[Vec<f64>], omega: &[f64], shift: &[f64]) -> Vec<Vec<f64>> {
    points
        .iter()
        .zip(shift)
        .map(|(p, s)| p.iter().zip(omega).map(|(x, w)| x + w * s).collect())
        .collect()
}

/// a(phi) = eps int |grad u|^2 dx.
pub fn compute_a(pd: &ProblemData, u: &TorusFunction) -> Result<TorusFunction> {
    if !u.has_zero_x_mean() {
        return Err(KqpError::DomainError("u has nonzero x-average".into()));
    }
    Ok(kirchhoff_coefficient(pd, u))
}

/// mu = (average over T^nu of sqrt(1 + a))^2, by the trapezoidal rule on the phase grid.
pub fn compute_mu(a: &TorusFunction) -> Result<f64> {
    let g = phase_grid_size(a.mode_box().lphi);
    let vals = phase_values_on_grid(a, g);
    let min = vals.iter().fold(f64::INFINITY, |m, v| m.min(1.0 + v));
    if min <= 0.0 {
        return Err(KqpError::NonPositiveArgument(min));
    }
    let mean = vals.iter().map(|v| (1.0 + v).sqrt()).sum::<f64>() / vals.len() as f64;
    Ok(mean * mean)
}

/// alpha = (omega.d_phi)^{-1}[sqrt(1 + a)/sqrt(mu) - 1].
pub fn compute_alpha(a: &TorusFunction, mu: f64, omega: &[f64]) -> Result<TorusFunction> {
    let k = a.mode_box().lphi;
    let g = phase_grid_size(k);
    let vals: Vec<f64> = phase_values_on_grid(a, g).iter().map(|v| (1.0 + v).sqrt() / mu.sqrt() - 1.0).collect();
    let (sigma, _) = analyze_phase(&vals, a.nu(), g, k);
    sigma.invert_omega_dphi(omega, 1)
}

fn max_phase_derivative(alpha: &TorusFunction, omega: &[f64], g: usize) -> f64 {
    phase_values_on_grid(&alpha.omega_dphi(omega), g).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Grid values of the inverse shift: theta + omega ab(theta) inverts phi + omega alpha(phi).
fn inverse_shift_values(alpha: &TorusFunction, omega: &[f64], points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut ab = vec![0.0; points.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..100 {
        let next: Vec<f64> = eval_phase_at(alpha, &shifted(points, omega, &ab)).iter().map(|v| -v).collect();
        let change = next.iter().zip(&ab).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ab = next;
        let check = eval_phase_at(alpha, &shifted(points, omega, &ab));
        residual = ab.iter().zip(&check).fold(0.0f64, |m, (a, c)| m.max((a + c).abs()));
        if change <= 1e-16 || residual <= 1e-15 {
            break;
        }
    }
    if residual > 1e-12 {
        return Err(KqpError::NoConvergence(format!("inverse diffeomorphism residual {residual:e}")));
    }
    Ok(ab)
}

/// Inverse diffeomorphism by fixed-point iteration ab <- -alpha(theta + omega ab(theta)).
pub fn invert_diffeo(alpha: &TorusFunction, omega: &[f64]) -> Result<TorusFunction> {
    let k = alpha.mode_box().lphi;
    let g = phase_grid_size(k);
    if max_phase_derivative(alpha, omega, g) >= 0.5 {
        return Err(KqpError::DomainError("|omega.d alpha| >= 1/2: shift too large".into()));
    }
    let pts = grid::phase_points(alpha.nu(), g);
    let ab = inverse_shift_values(alpha, omega, &pts)?;
    Ok(analyze_phase(&ab, alpha.nu(), g, k).0)
}

/// Coefficients of h(phi + omega shift(phi), x) on the box of h, with the tail mass
/// of the sampled result beyond the box.
pub fn compose_with_diffeo_tail(h: &TorusFunction, shift: &TorusFunction, omega: &[f64]) -> (TorusFunction, f64) {
    let bx = h.mode_box();
    let (nu, d) = (bx.nu, bx.d);
    let g = phase_grid_size(bx.lphi);
    let pts = grid::phase_points(nu, g);
    let psi = shifted(&pts, omega, &eval_phase_at(shift, &pts));
    let table = PhaseTable::new(&psi, nu, bx.lphi);
    let xbox = ModeBox::new(1, d, 0, bx.lx);
    let nx = if d == 0 { 1 } else { (2 * bx.lx + 1).pow(d as u32) };
    let mut slices = vec![vec![C64::new(0.0, 0.0); pts.len()]; nx];
    let mut active = vec![false; nx];
    for (k, v) in h.nonzeros() {
        let jx = if d == 0 {
            0
        } else {
            let mut c = [0i32; MAX_DIM];
            c[1..=d].copy_from_slice(&k[nu..nu + d]);
            xbox.offset(&c[..=d]).unwrap()
        };
        active[jx] = true;
        let s = &mut slices[jx];
        for (p, val) in s.iter_mut().enumerate() {
            *val += v * table.factor(p, &k[..nu]);
        }
    }
    let mut out = TorusFunction::zeros_box(bx);
    let dims = vec![g; nu];
    let mut tail2 = 0.0;
    let pbox = ModeBox::new(nu, 0, bx.lphi, 0);
    let mut kk = [0i32; MAX_DIM];
    for jx in 0..nx {
        if !active[jx] {
            continue;
        }
        let (f, tail) = grid::from_grid(&slices[jx], &dims, pbox);
        tail2 += tail * tail;
        let mut jc = [0i32; MAX_DIM];
        xbox.coords_of(jx, &mut jc);
        for (o, v) in f.coeffs().iter().enumerate() {
            pbox.coords_of(o, &mut kk);
            kk[nu..nu + d].copy_from_slice(&jc[1..=d]);
            let t = bx.offset(&kk[..nu + d]).unwrap();
            out.coeffs_mut()[t] = *v;
        }
    }
    (out, tail2.sqrt())
}

pub fn compose_with_diffeo(h: &TorusFunction, shift: &TorusFunction, omega: &[f64]) -> TorusFunction {
    compose_with_diffeo_tail(h, shift, omega).0
}

/// (a1, rho) with rho = A^{-1}[(1 + omega.d alpha)^2], a1 = rho^{-1} A^{-1}[(omega.d)^2 alpha].
pub fn compute_a1_rho(alpha: &TorusFunction, omega: &[f64]) -> Result<(TorusFunction, TorusFunction)> {
    let k = alpha.mode_box().lphi;
    let g = phase_grid_size(k);
    let pts = grid::phase_points(alpha.nu(), g);
    if max_phase_derivative(alpha, omega, g) >= 0.5 {
        return Err(KqpError::DomainError("|omega.d alpha| >= 1/2: shift too large".into()));
    }
    let ab = inverse_shift_values(alpha, omega, &pts)?;
    let psi = shifted(&pts, omega, &ab);
    let s = eval_phase_at(&alpha.omega_dphi(omega), &psi);
    let s2 = eval_phase_at(&alpha.omega_dphi2(omega), &psi);
    let rho: Vec<f64> = s.iter().map(|v| (1.0 + v) * (1.0 + v)).collect();
    let min_rho = rho.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min_rho <= 0.5 {
        return Err(KqpError::DomainError(format!("rho too small ({min_rho:e})")));
    }
    let a1: Vec<f64> = s2.iter().zip(&rho).map(|(x, r)| x / r).collect();
    Ok((analyze_phase(&a1, alpha.nu(), g, k).0, analyze_phase(&rho, alpha.nu(), g, k).0))
}

/// b = exp(-(1/2)(omega.d_theta)^{-1} a1), the solution of 2 b^{-1} omega.d b + a1 = 0.
pub fn compute_b(a1: &TorusFunction, omega: &[f64]) -> Result<TorusFunction> {
    let k = a1.mode_box().lphi;
    let mean = a1.get(&vec![0; a1.nu()], &[]).norm();
    if mean > 1e-10 * a1.sobolev_norm(0.0).max(1e-300) && mean > 1e-15 {
        return Err(KqpError::MeanNotZero(mean));
    }
    let beta = a1.remove_phase_mean().invert_omega_dphi(omega, 1)?;
    let g = phase_grid_size(k);
    let vals: Vec<f64> = phase_values_on_grid(&beta, g).iter().map(|v| (-0.5 * v).exp()).collect();
    Ok(analyze_phase(&vals, a1.nu(), g, k).0)
}

#[derive(Clone, Debug)]
pub struct ReductionOptions {
    /// Regularity loss used only to label diagnostics.
    pub sigma: f64,
}

impl ReductionOptions {
    pub fn for_nu(nu: usize) -> Self {
        ReductionOptions { sigma: 2.0 * (nu as f64 + 1.0) }
    }
}

/// R2 in closed form: multiplication by c(theta) plus a kernel coupling the
/// space modes in the support of u.
#[derive(Clone, Debug)]
pub struct Remainder {
    pub nu: usize,
    pub d: usize,
    pub epsilon: f64,
    pub c: TorusFunction,
    support: Vec<Vec<i32>>,
    support_pos: HashMap<Vec<i32>, usize>,
    /// kernels[p * n + q] = coefficients of rho^{-1} w_{j_p} w_{-j_q}
    kernels: Vec<TorusFunction>,
}

impl Remainder {
    pub fn entry(&self, row: &MultiIndex, col: &MultiIndex) -> C64 {
        let m: Vec<i32> = row.ell.iter().zip(&col.ell).map(|(a, b)| a - b).collect();
        let mut v = C64::new(0.0, 0.0);
        if row.j == col.j {
            v += self.c.get(&m, &[]);
        }
        if let (Some(&p), Some(&q)) = (self.support_pos.get(&row.j), self.support_pos.get(&col.j)) {
            let n = self.support.len();
            v += self.kernels[p * n + q].get(&m, &[]) * self.kernel_scale();
        }
        v
    }

    fn kernel_scale(&self) -> f64 {
        2.0 * self.epsilon * (2.0 * PI).powi(self.d as i32)
    }

    pub fn matrix(&self, rows: &[MultiIndex], cols: &[MultiIndex]) -> DecayMatrix {
        let n = self.support.len();
        let rp: Vec<Option<usize>> = rows.iter().map(|k| self.support_pos.get(&k.j).copied()).collect();
        let cp: Vec<Option<usize>> = cols.iter().map(|k| self.support_pos.get(&k.j).copied()).collect();
        let scale = self.kernel_scale();
        let mut m = DecayMatrix::zeros(rows.to_vec(), cols.to_vec());
        let mut diff = vec![0i32; self.nu];
        for (r, kr) in rows.iter().enumerate() {
            for (c, kc) in cols.iter().enumerate() {
                for a in 0..self.nu {
                    diff[a] = kr.ell[a] - kc.ell[a];
                }
                let mut v = C64::new(0.0, 0.0);
                if kr.j == kc.j {
                    v += self.c.get(&diff, &[]);
                }
                if let (Some(p), Some(q)) = (rp[r], cp[c]) {
                    v += self.kernels[p * n + q].get(&diff, &[]) * scale;
                }
                m.data[(r, c)] = v;
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.c.max_abs_coeff() == 0.0 && self.kernels.iter().all(|k| k.max_abs_coeff() == 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub mu: f64,
    pub a: TorusFunction,
    pub alpha: TorusFunction,
    pub alpha_breve: TorusFunction,
    pub rho: TorusFunction,
    pub a1: TorusFunction,
    pub b: TorusFunction,
    /// 1/b and 1/(rho b) on the phase grid, re-expanded.
    pub b_inv: TorusFunction,
    pub rho_b_inv: TorusFunction,
    pub remainder: Remainder,
    pub aliasing_tail: f64,
    pub sigma: f64,
    pub work_box: ModeBox,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ReductionReport {
    pub mu: f64,
    pub norm_a: f64,
    pub norm_alpha: f64,
    pub norm_a1: f64,
    pub norm_b_minus_1: f64,
    pub decay_norm_r2_s0: f64,
    pub conjugation_residual: Option<f64>,
}

pub fn reduce(pd: &ProblemData, lambda: f64, u: &TorusFunction, opts: &ReductionOptions) -> Result<ReductionResult> {
    let omega = pd.omega(lambda);
    let bx = u.mode_box();
    let (nu, d) = (bx.nu, bx.d);
    let kphi = (2 * bx.lphi).max(1);
    let a = compute_a(pd, u)?.resize(ModeBox::new(nu, 0, kphi, 0));
    let mu = compute_mu(&a)?;
    let alpha = compute_alpha(&a, mu, &omega)?;
    let g = phase_grid_size(kphi);
    let pts = grid::phase_points(nu, g);
    if max_phase_derivative(&alpha, &omega, g) >= 0.5 {
        return Err(KqpError::DomainError("|omega.d alpha| >= 1/2: solution too large for the reduction".into()));
    }
    let ab_vals = inverse_shift_values(&alpha, &omega, &pts)?;
    let (alpha_breve, mut tail) = analyze_phase(&ab_vals, nu, g, kphi);
    let psi = shifted(&pts, &omega, &ab_vals);
    let s = eval_phase_at(&alpha.omega_dphi(&omega), &psi);
    let s2 = eval_phase_at(&alpha.omega_dphi2(&omega), &psi);
    let rho_v: Vec<f64> = s.iter().map(|v| (1.0 + v) * (1.0 + v)).collect();
    let min_rho = rho_v.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min_rho <= 0.5 {
        return Err(KqpError::DomainError(format!("rho too small ({min_rho:e})")));
    }
    let a1_v: Vec<f64> = s2.iter().zip(&rho_v).map(|(x, r)| x / r).collect();
    let (rho, t1) = analyze_phase(&rho_v, nu, g, kphi);
    let (a1, t2) = analyze_phase(&a1_v, nu, g, kphi);
    tail = tail.max(t1).max(t2);
    let b = compute_b(&a1, &omega)?;
    let b_v = phase_values_on_grid(&b, g);
    let (b_inv, _) = analyze_phase(&b_v.iter().map(|v| 1.0 / v).collect::<Vec<_>>(), nu, g, kphi);
    let (rho_b_inv, _) =
        analyze_phase(&b_v.iter().zip(&rho_v).map(|(bv, r)| 1.0 / (bv * r)).collect::<Vec<_>>(), nu, g, kphi);
    // zeroth-order potential c = -(1/2) omega.d a1 - a1^2/4
    let da1 = phase_values_on_grid(&a1.omega_dphi(&omega), g);
    let c_v: Vec<f64> = da1.iter().zip(&a1_v).map(|(x, y)| -0.5 * x - 0.25 * y * y).collect();
    let (c, t3) = analyze_phase(&c_v, nu, g, kphi);
    tail = tail.max(t3);
    // kernel: w_j(theta) = (A^{-1} Lap u)_j at the grid points
    let lap = u.laplacian();
    let table = PhaseTable::new(&psi, nu, bx.lphi);
    let mut slices: HashMap<Vec<i32>, Vec<C64>> = HashMap::new();
    for (k, v) in lap.nonzeros() {
        let j = k[nu..nu + d].to_vec();
        let e = slices.entry(j).or_insert_with(|| vec![C64::new(0.0, 0.0); pts.len()]);
        for (p, val) in e.iter_mut().enumerate() {
            *val += v * table.factor(p, &k[..nu]);
        }
    }
    let mut support: Vec<Vec<i32>> = slices.keys().cloned().collect();
    support.sort();
    let support_pos: HashMap<Vec<i32>, usize> = support.iter().enumerate().map(|(i, j)| (j.clone(), i)).collect();
    let n = support.len();
    let mut kernels = Vec::with_capacity(n * n);
    let dims = vec![g; nu];
    let pbox = ModeBox::new(nu, 0, kphi, 0);
    for jp in &support {
        for jq in &support {
            let neg: Vec<i32> = jq.iter().map(|x| -x).collect();
            let wp = &slices[jp];
            let wq = slices.get(&neg).expect("support of a real function is symmetric");
            let prod: Vec<C64> = (0..pts.len()).map(|p| wp[p] * wq[p] / rho_v[p]).collect();
            let (f, t) = grid::from_grid(&prod, &dims, pbox);
            tail = tail.max(t);
            kernels.push(f);
        }
    }
    let remainder = Remainder { nu, d, epsilon: pd.epsilon, c, support, support_pos, kernels };
    Ok(ReductionResult {
        lambda,
        omega,
        mu,
        a,
        alpha,
        alpha_breve,
        rho,
        a1,
        b,
        b_inv,
        rho_b_inv,
        remainder,
        aliasing_tail: tail,
        sigma: opts.sigma,
        work_box: bx,
    })
}

impl ReductionResult {
    pub fn apply_a(&self, h: &TorusFunction) -> TorusFunction {
        compose_with_diffeo(h, &self.alpha, &self.omega)
    }

    pub fn apply_a_inv(&self, h: &TorusFunction) -> TorusFunction {
        compose_with_diffeo(h, &self.alpha_breve, &self.omega)
    }

    /// Phi1 = B^{-1} rho^{-1} A^{-1} (applied to residuals).
    pub fn phi1(&self, h: &TorusFunction) -> TorusFunction {
        self.apply_a_inv(h).multiply(&self.rho_b_inv)
    }

    /// Phi2 = A B (applied to solutions of the reduced problem).
    pub fn phi2(&self, h: &TorusFunction) -> TorusFunction {
        self.apply_a(&h.multiply(&self.b))
    }

    /// Phi2^{-1} = B^{-1} A^{-1}.
    pub fn phi2_inv(&self, h: &TorusFunction) -> TorusFunction {
        self.apply_a_inv(h).multiply(&self.b_inv)
    }

    /// R2 restricted to the sites with j != 0 of a box.
    pub fn r2_on_box(&self, bx: ModeBox) -> DecayMatrix {
        let set = index_set(bx.nu, bx.d, bx.lphi, bx.lx);
        self.remainder.matrix(&set, &set)
    }

    /// Diagonal part (omega.d)^2 - mu Lap as a matrix on `set`.
    pub fn diagonal(&self, set: &[MultiIndex]) -> DecayMatrix {
        DecayMatrix::diagonal(set.to_vec(), |k| {
            let w = k.omega_dot(&self.omega);
            -w * w + self.mu * k.j_sq()
        })
    }

    /// ((omega.d)^2 - mu Lap + R2) h on the box of h.
    pub fn apply_reduced(&self, h: &TorusFunction) -> Result<TorusFunction> {
        let r2 = self.r2_on_box(h.mode_box());
        let mut out = h.omega_dphi2(&self.omega).sub(&h.laplacian().scale(self.mu));
        out = out.add(&r2.apply(h)?);
        Ok(out)
    }

    /// B^{-1} rho^{-1} A^{-1} L(u) A B h evaluated by composition on a box enlarged by `pad`.
    pub fn apply_conjugated(&self, pd: &ProblemData, u: &TorusFunction, h: &TorusFunction, pad: usize) -> TorusFunction {
        let hb = h.mode_box();
        let big = ModeBox::new(hb.nu, hb.d, hb.lphi + pad, hb.lx + pad);
        let hp = h.resize(big);
        let up = u.resize(big);
        let abh = self.phi2(&hp);
        let l = apply_linearized_unchecked(pd, self.lambda, &up, &abh);
        self.phi1(&l).resize(hb)
    }

    /// ||conjugated - reduced||_{s0} / ||h||_{s0+2}.
    pub fn conjugation_residual(&self, pd: &ProblemData, u: &TorusFunction, h: &TorusFunction, pad: usize) -> Result<f64> {
        let s0 = s0_of(h.nu(), h.d()) as f64;
        let lhs = self.apply_conjugated(pd, u, h, pad);
        let rhs = self.apply_reduced(h)?;
        Ok(lhs.sub(&rhs).sobolev_norm(s0) / h.sobolev_norm(s0 + 2.0).max(1e-300))
    }

    pub fn report(&self, pd: &ProblemData, u: &TorusFunction, probe: Option<&TorusFunction>) -> Result<ReductionReport> {
        let bx = self.work_box;
        let s0 = s0_of(bx.nu, bx.d) as f64;
        let one = TorusFunction::constant(self.b.mode_box(), 1.0);
        let conj = match probe {
            Some(h) => Some(self.conjugation_residual(pd, u, h, h.mode_box().lphi.max(h.mode_box().lx))?),
            None => None,
        };
        Ok(ReductionReport {
            mu: self.mu,
            norm_a: self.a.sobolev_norm(s0),
            norm_alpha: self.alpha.sobolev_norm(s0),
            norm_a1: self.a1.sobolev_norm(s0),
            norm_b_minus_1: self.b.sub(&one).sobolev_norm(s0),
            decay_norm_r2_s0: self.r2_on_box(bx).decay_norm(s0),
            conjugation_residual: conj,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::FrequencyData;

    fn problem(eps: f64) -> ProblemData {
        let fd = FrequencyData::new(vec![2f64.sqrt()], 0.1).unwrap();
        let f = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[1], &[1], 0.5).with_cos(&[-1], &[1], 0.5);
        ProblemData::new(fd, eps, f).unwrap()
    }

    fn sample_u() -> TorusFunction {
        TorusFunction::zeros(1, 1, 6, 6)
            .with_cos(&[1], &[1], 0.3)
            .with_sin(&[2], &[-1], 0.2)
            .with_cos(&[0], &[2], 0.15)
            .with_cos(&[-1], &[3], 0.05)
    }

    #[test]
    fn coefficient_a_closed_forms() {
        let pd = problem(1e-3);
        let z = TorusFunction::zeros(1, 1, 3, 3);
        assert_eq!(compute_a(&pd, &z).unwrap().max_abs_coeff(), 0.0);
        let c = TorusFunction::zeros(1, 1, 3, 3).with_cos(&[0], &[1], 1.0);
        assert!((compute_a(&pd, &c).unwrap().get(&[0], &[]).re - 1e-3 * PI).abs() < 1e-17);
        let cc = TorusFunction::zeros(1, 1, 3, 3).with_cos(&[1], &[1], 0.5).with_cos(&[-1], &[1], 0.5);
        let a = compute_a(&pd, &cc).unwrap();
        assert!((a.get(&[0], &[]).re - 1e-3 * PI / 2.0).abs() < 1e-17);
        assert!((a.get(&[2], &[]).re - 1e-3 * PI / 4.0).abs() < 1e-17);
    }

    #[test]
    fn mu_examples() {
        assert_eq!(compute_mu(&TorusFunction::phase_zeros(1, 2)).unwrap(), 1.0);
        let c = TorusFunction::constant(ModeBox::new(1, 0, 2, 0), 0.3);
        assert!((compute_mu(&c).unwrap() - 1.3).abs() < 1e-15);
        let bad = TorusFunction::constant(ModeBox::new(1, 0, 2, 0), -1.5);
        assert!(matches!(compute_mu(&bad), Err(KqpError::NonPositiveArgument(_))));
    }

    #[test]
    fn alpha_first_order() {
        let eta = 1e-4;
        let w = [2f64.sqrt()];
        let a = TorusFunction::phase_zeros(1, 4).with_cos(&[3], &[], eta);
        let mu = compute_mu(&a).unwrap();
        let alpha = compute_alpha(&a, mu, &w).unwrap();
        let expect = TorusFunction::phase_zeros(1, 4).with_sin(&[3], &[], 0.5 * eta / (3.0 * w[0]));
        assert!(alpha.sub(&expect).sobolev_norm(0.0) < 10.0 * eta * eta);
        assert_eq!(compute_alpha(&TorusFunction::phase_zeros(1, 3), 1.0, &w).unwrap().max_abs_coeff(), 0.0);
    }

    #[test]
    fn inverse_diffeo_round_trip() {
        let w = [2f64.sqrt()];
        let eta = 1e-2;
        let alpha = TorusFunction::phase_zeros(1, 16).with_sin(&[1], &[], eta).with_cos(&[2], &[], 0.3 * eta);
        let ab = invert_diffeo(&alpha, &w).unwrap();
        let pts = grid::phase_points(1, 26);
        let fwd = shifted(&pts, &w, &eval_phase_at(&alpha, &pts));
        let back = shifted(&fwd, &w, &eval_phase_at(&ab, &fwd));
        for (p, q) in pts.iter().zip(&back) {
            assert!((p[0] - q[0]).abs() < 1e-10);
        }
        let lead = TorusFunction::phase_zeros(1, 16).with_sin(&[1], &[], -eta).with_cos(&[2], &[], -0.3 * eta);
        assert!(ab.sub(&lead).sobolev_norm(0.0) < 10.0 * eta * eta);
        assert_eq!(invert_diffeo(&TorusFunction::phase_zeros(1, 2), &w).unwrap().max_abs_coeff(), 0.0);
    }

    #[test]
    fn composition_trivial_cases() {
        let w = [1.3];
        let h = TorusFunction::zeros(1, 1, 4, 3).with_cos(&[2], &[1], 1.0);
        assert!(compose_with_diffeo(&h, &TorusFunction::phase_zeros(1, 2), &w).sub(&h).max_abs_coeff() < 1e-15);
        let hx = TorusFunction::zeros(1, 1, 4, 3).with_cos(&[0], &[2], 1.0);
        let alpha = TorusFunction::phase_zeros(1, 2).with_sin(&[1], &[], 0.01);
        assert!(compose_with_diffeo(&hx, &alpha, &w).sub(&hx).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn composition_conjugation_rule() {
        // A^{-1}(omega.d)A h = A^{-1}[1 + omega.d alpha] omega.d h
        let w = [2f64.sqrt()];
        let alpha = TorusFunction::phase_zeros(1, 16).with_sin(&[1], &[], 0.01).with_cos(&[2], &[], 0.004);
        let ab = invert_diffeo(&alpha, &w).unwrap();
        let h = TorusFunction::zeros(1, 1, 12, 2).with_cos(&[1], &[1], 1.0).with_sin(&[2], &[-1], 0.5);
        let lhs = compose_with_diffeo(&compose_with_diffeo(&h, &alpha, &w).omega_dphi(&w), &ab, &w);
        let one_plus = TorusFunction::constant(ModeBox::new(1, 0, 16, 0), 1.0).add(&alpha.omega_dphi(&w));
        let coef = compose_with_diffeo(&one_plus, &ab, &w);
        let rhs = h.omega_dphi(&w).multiply(&coef);
        assert!(lhs.sub(&rhs).resize(ModeBox::new(1, 1, 6, 2)).sobolev_norm(0.0) < 1e-8);
    }

    #[test]
    fn a1_rho_and_b_identities() {
        let w = [2f64.sqrt()];
        let z = TorusFunction::phase_zeros(1, 3);
        let (a1, rho) = compute_a1_rho(&z, &w).unwrap();
        assert_eq!(a1.max_abs_coeff(), 0.0);
        assert!((rho.get(&[0], &[]).re - 1.0).abs() < 1e-15);
        let b = compute_b(&a1, &w).unwrap();
        assert!((b.get(&[0], &[]).re - 1.0).abs() < 1e-15);
        let alpha = TorusFunction::phase_zeros(1, 6).with_sin(&[1], &[], 0.02).with_cos(&[3], &[], 0.003);
        let (a1, _) = compute_a1_rho(&alpha, &w).unwrap();
        assert!(a1.get(&[0], &[]).norm() < 1e-10 * a1.sobolev_norm(0.0));
        let lead = alpha.omega_dphi2(&w);
        assert!(a1.sub(&lead).sobolev_norm(0.0) < 0.1 * lead.sobolev_norm(0.0));
    }

    #[test]
    fn b_closed_form_and_ode() {
        let w = [2f64.sqrt()];
        let eta = 0.01;
        let a1 = TorusFunction::phase_zeros(1, 10).with_cos(&[2], &[], eta);
        let b = compute_b(&a1, &w).unwrap();
        let pts = grid::phase_points(1, 42);
        let bv = eval_phase_at(&b, &pts);
        for (p, v) in pts.iter().zip(&bv) {
            let exact = (-0.5 * eta * (2.0 * p[0]).sin() / (2.0 * w[0])).exp();
            assert!((v - exact).abs() < 1e-13);
        }
        let db = eval_phase_at(&b.omega_dphi(&w), &pts);
        let av = eval_phase_at(&a1, &pts);
        for ((x, y), z) in db.iter().zip(&bv).zip(&av) {
            assert!((2.0 * x / y + z).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_solution_gives_trivial_reduction() {
        let pd = problem(1e-3);
        let u = TorusFunction::zeros(1, 1, 4, 4);
        let r = reduce(&pd, 1.0, &u, &ReductionOptions::for_nu(1)).unwrap();
        assert_eq!(r.mu, 1.0);
        assert_eq!(r.alpha.max_abs_coeff(), 0.0);
        assert_eq!(r.a1.max_abs_coeff(), 0.0);
        assert!(r.r2_on_box(u.mode_box()).decay_norm(2.0) < 1e-12);
    }

    #[test]
    fn reduced_operator_is_hermitian_and_matches_conjugation() {
        let pd = problem(1e-2);
        let u = sample_u();
        let r = reduce(&pd, 1.1, &u, &ReductionOptions::for_nu(1)).unwrap();
        let m = r.r2_on_box(u.mode_box());
        assert!(m.hermitian_defect() < 1e-12);
        assert!(m.decay_norm(2.0) > 0.0);
        let h = TorusFunction::zeros(1, 1, 6, 6).with_cos(&[1], &[2], 1.0).with_sin(&[-2], &[1], 0.4);
        let res = r.conjugation_residual(&pd, &u, &h, 6).unwrap();
        assert!(res < 1e-9, "conjugation residual {res:e}");
    }

    #[test]
    fn conjugated_operator_has_no_first_order_part() {
        // Brute-force matrix of B^{-1} rho^{-1} A^{-1} L A B minus the diagonal is Hermitian.
        let pd = problem(2e-2);
        let u = sample_u();
        let r = reduce(&pd, 0.9, &u, &ReductionOptions::for_nu(1)).unwrap();
        let sub = ModeBox::new(1, 1, 3, 3);
        let set = index_set(1, 1, 3, 3);
        let mut m = DecayMatrix::zeros(set.clone(), set.clone());
        for (c, k) in set.iter().enumerate() {
            let mut e = TorusFunction::zeros_box(sub);
            let o = sub.offset(&k.coords()).unwrap();
            e.coeffs_mut()[o] = C64::new(1.0, 0.0);
            let col = r.apply_conjugated(&pd, &u, &e, 12);
            for (row, kr) in set.iter().enumerate() {
                m.data[(row, c)] = col.get_index(kr);
            }
        }
        let rem = m.sub(&r.diagonal(&set));
        let anti = rem.sub(&rem.adjoint()).scale(0.5);
        assert!(anti.decay_norm(2.0) <= 1e-8 * rem.decay_norm(2.0), "{:e}", anti.decay_norm(2.0) / rem.decay_norm(2.0));
        let direct = r.remainder.matrix(&set, &set);
        assert!(rem.sub(&direct).decay_norm(2.0) <= 1e-8 * rem.decay_norm(2.0));
    }
}
