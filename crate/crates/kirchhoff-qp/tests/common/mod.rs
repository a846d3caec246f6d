//! Independent oracles: direct trigonometric sums and naive DFTs, no FFT and no
//! library arithmetic beyond reading coefficients.
#![allow(dead_code)]

use kirchhoff_qp::kirchhoff::ProblemData;
use kirchhoff_qp::{ModeBox, TorusFunction, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub struct PointValues {
    pub value: f64,
    pub omega_d2: f64,
    pub lap: f64,
    pub grad: Vec<f64>,
}

/// u, (omega.d_phi)^2 u, Lap u and grad_x u at one point, by direct summation.
pub fn eval_point(f: &TorusFunction, omega: &[f64], phi: &[f64], x: &[f64]) -> PointValues {
    let bx = f.mode_box();
    let (nu, d) = (bx.nu, bx.d);
    let mut out = PointValues { value: 0.0, omega_d2: 0.0, lap: 0.0, grad: vec![0.0; d] };
    for (k, c) in bx.indices().iter().zip(f.coeffs()) {
        if c.norm() == 0.0 {
            continue;
        }
        let mut arg = 0.0;
        for i in 0..nu {
            arg += k.ell[i] as f64 * phi[i];
        }
        for i in 0..d {
            arg += k.j[i] as f64 * x[i];
        }
        let e = c * C64::from_polar(1.0, arg);
        let wl: f64 = (0..nu).map(|i| k.ell[i] as f64 * omega[i]).sum();
        let jsq: f64 = k.j.iter().map(|&a| (a as f64).powi(2)).sum();
        out.value += e.re;
        out.omega_d2 -= wl * wl * e.re;
        out.lap -= jsq * e.re;
        for i in 0..d {
            // d/dx_i of e^{i j.x} = i j_i e^{...}
            out.grad[i] -= k.j[i] as f64 * e.im;
        }
    }
    out
}

/// Tensor grid of m points per axis on T^n, as a flat list of coordinate vectors.
pub fn grid_points(n: usize, m: usize) -> Vec<Vec<f64>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut i| {
            let mut p = vec![0.0; n];
            for c in p.iter_mut() {
                *c = 2.0 * PI * (i % m) as f64 / m as f64;
                i /= m;
            }
            p
        })
        .collect()
}

/// Naive DFT of grid values onto the coefficients of `target` (grid from `grid_points`).
pub fn naive_dft(values: &[f64], n: usize, m: usize, target: ModeBox) -> TorusFunction {
    let pts = grid_points(n, m);
    let mut out = TorusFunction::zeros_box(target);
    let idx = target.indices();
    let norm = 1.0 / pts.len() as f64;
    for (o, k) in idx.iter().enumerate() {
        let kc = k.coords();
        let mut acc = C64::new(0.0, 0.0);
        for (p, v) in pts.iter().zip(values) {
            let arg: f64 = kc.iter().zip(p).map(|(&a, b)| a as f64 * b).sum();
            acc += v * C64::from_polar(1.0, -arg);
        }
        out.coeffs_mut()[o] = acc * norm;
    }
    out
}

/// Pointwise residual of (omega.d)^2 v - (1 + eps int|grad v|^2 dx) Lap v - eps forcing
/// on an m^nu x m^d grid; the integral is an m^d-point quadrature.
pub fn collocation_residual(pd: &ProblemData, lambda: f64, v: &TorusFunction, forcing: &TorusFunction, m: usize) -> Vec<f64> {
    let omega = pd.omega(lambda);
    let (nu, d) = (v.nu(), v.d());
    let phis = grid_points(nu, m);
    let xs = grid_points(d, m);
    let cell = (2.0 * PI / m as f64).powi(d as i32);
    let mut at_phi = Vec::with_capacity(xs.len());
    // layout matches grid_points(nu + d, m): phase coordinates vary fastest
    let mut table = vec![0.0; phis.len() * xs.len()];
    for (pi, phi) in phis.iter().enumerate() {
        at_phi.clear();
        let mut energy = 0.0;
        for x in &xs {
            let pv = eval_point(v, &omega, phi, x);
            energy += pv.grad.iter().map(|g| g * g).sum::<f64>() * cell;
            at_phi.push((pv, eval_point(forcing, &omega, phi, x).value));
        }
        let coef = 1.0 + pd.epsilon * energy;
        for (xi, (pv, f)) in at_phi.iter().enumerate() {
            table[xi * phis.len() + pi] = pv.omega_d2 - coef * pv.lap - pd.epsilon * f;
        }
    }
    table
}

/// Root mean square over the grid; equals the l2 norm of the coefficients for band-limited data.
pub fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Random real function on `bx` with coefficients ~ U(-1,1) <k>^{-decay}, optionally with zero x-average.
pub fn random_function(rng: &mut ChaCha8Rng, bx: ModeBox, decay: f64, zero_x_mean: bool) -> TorusFunction {
    let mut f = TorusFunction::zeros_box(bx);
    for k in bx.indices() {
        if zero_x_mean && k.j_is_zero() {
            continue;
        }
        let w = k.weight().powf(-decay);
        let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (0.5 * w);
        f.add_pair(&k.ell, &k.j, v);
    }
    f.symmetrize();
    if zero_x_mean {
        f = f.x_mean_split().1;
    }
    f
}
