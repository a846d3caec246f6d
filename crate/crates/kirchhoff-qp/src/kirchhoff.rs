//! The Kirchhoff functional F(u) = (omega.d_phi)^2 u - (1 + eps int|grad u|^2) Lap u - eps g,
//! its exact differential, and the x-average part v0.

use crate::diophantine::FrequencyData;
use crate::error::{KqpError, Result};
use crate::fourier::TorusFunction;

#[derive(Clone, Debug)]
pub struct ProblemData {
    pub fd: FrequencyData,
    pub d: usize,
    pub epsilon: f64,
    pub f: TorusFunction,
    pub g: TorusFunction,
    pub f0: TorusFunction,
}

impl ProblemData {
    pub fn new(fd: FrequencyData, epsilon: f64, f: TorusFunction) -> Result<Self> {
        if f.nu() != fd.nu {
            return Err(KqpError::Config("forcing and omega_bar disagree on nu".into()));
        }
        if f.d() == 0 {
            return Err(KqpError::Config("forcing must depend on x (d >= 1)".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(KqpError::Config("epsilon must be finite and nonnegative".into()));
        }
        let mean = f.get(&vec![0; f.nu()], &vec![0; f.d()]).norm();
        if mean > 1e-12 * f.sobolev_norm(0.0).max(1.0) {
            return Err(KqpError::DomainError(format!("forcing has nonzero total average {mean:e}")));
        }
        let (f0, g) = f.x_mean_split();
        Ok(ProblemData { d: f.d(), fd, epsilon, f, g, f0 })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        ProblemData { epsilon, ..self.clone() }
    }

    pub fn omega(&self, lambda: f64) -> Vec<f64> {
        self.fd.omega(lambda)
    }
}

fn require_zero_x_mean(u: &TorusFunction, what: &str) -> Result<()> {
    if !u.has_zero_x_mean() {
        return Err(KqpError::DomainError(format!("{what} has nonzero x-average {:e}", u.x_mean_size())));
    }
    Ok(())
}

/// Kirchhoff coefficient a(phi) = eps int_{T^d} |grad u|^2 dx as a phase function.
pub fn kirchhoff_coefficient(pd: &ProblemData, u: &TorusFunction) -> TorusFunction {
    u.grad_energy().scale(pd.epsilon)
}

/// F(u) on the box of `u`; requires zero x-average.
pub fn residual(pd: &ProblemData, lambda: f64, u: &TorusFunction) -> Result<TorusFunction> {
    require_zero_x_mean(u, "u")?;
    Ok(residual_unchecked(pd, lambda, u))
}

fn residual_unchecked(pd: &ProblemData, lambda: f64, u: &TorusFunction) -> TorusFunction {
    let omega = pd.omega(lambda);
    let lap = u.laplacian();
    let a = kirchhoff_coefficient(pd, u);
    let mut out = u.omega_dphi2(&omega).sub(&lap);
    out = out.sub(&lap.multiply(&a));
    out.axpy(-pd.epsilon, &pd.g.resize(u.mode_box()));
    out
}

/// Residual of the full equation for v = v0 + u with the full forcing f.
pub fn full_residual(pd: &ProblemData, lambda: f64, v: &TorusFunction) -> TorusFunction {
    let omega = pd.omega(lambda);
    let lap = v.laplacian();
    let a = kirchhoff_coefficient(pd, v);
    let mut out = v.omega_dphi2(&omega).sub(&lap);
    out = out.sub(&lap.multiply(&a));
    out.axpy(-pd.epsilon, &pd.f.resize(v.mode_box()));
    out
}

/// v0 = eps (lambda omega_bar . d_phi)^{-2} f0.
pub fn recover_v0(pd: &ProblemData, lambda: f64) -> Result<TorusFunction> {
    Ok(pd.f0.invert_omega_dphi(&pd.omega(lambda), 2)?.scale(pd.epsilon))
}

/// L(u) h = (omega.d_phi)^2 h - (1 + a) Lap h + 2 eps Lap u int Lap u h dx,
/// the exact derivative: d/dt int|grad(u + t h)|^2 = -2 int Lap u h.
pub fn apply_linearized(pd: &ProblemData, lambda: f64, u: &TorusFunction, h: &TorusFunction) -> Result<TorusFunction> {
    require_zero_x_mean(u, "u")?;
    require_zero_x_mean(h, "h")?;
    Ok(apply_linearized_unchecked(pd, lambda, u, h))
}

pub(crate) fn apply_linearized_unchecked(pd: &ProblemData, lambda: f64, u: &TorusFunction, h: &TorusFunction) -> TorusFunction {
    let omega = pd.omega(lambda);
    let lap_h = h.laplacian();
    let lap_u = u.laplacian();
    let a = kirchhoff_coefficient(pd, u);
    let mut out = h.omega_dphi2(&omega).sub(&lap_h);
    out = out.sub(&lap_h.multiply(&a));
    let cross = lap_u.x_inner(h);
    let r = lap_u.multiply_into(&cross, h.mode_box());
    out.axpy(2.0 * pd.epsilon, &r);
    out
}

/// Q(u, h) = F(u + h) - F(u) - L(u) h.
pub fn quadratic_remainder(pd: &ProblemData, lambda: f64, u: &TorusFunction, h: &TorusFunction) -> Result<TorusFunction> {
    let uh = u.add(h);
    let f1 = residual(pd, lambda, &uh)?;
    let f0 = residual(pd, lambda, u)?;
    let l = apply_linearized(pd, lambda, u, h)?;
    Ok(f1.sub(&f0).sub(&l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn problem(eps: f64) -> ProblemData {
        let fd = FrequencyData::new(vec![2f64.sqrt()], 0.1).unwrap();
        let f = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[1], &[1], 0.5).with_cos(&[-1], &[1], 0.5).with_cos(&[2], &[0], 1.0);
        ProblemData::new(fd, eps, f).unwrap()
    }

    fn max_diff(a: &TorusFunction, b: &TorusFunction) -> f64 {
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn residual_at_zero_is_minus_eps_g() {
        let pd = problem(0.01);
        let u = TorusFunction::zeros(1, 1, 4, 4);
        assert!(max_diff(&residual(&pd, 1.1, &u).unwrap(), &pd.g.scale(-0.01)) < 1e-16);
    }

    #[test]
    fn residual_closed_form_cos_x() {
        let pd = problem(0.01);
        let u = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[0], &[1], 1.0);
        let expect = u.scale(1.0 + 0.01 * PI).sub(&pd.g.scale(0.01));
        assert!(max_diff(&residual(&pd, 0.8, &u).unwrap(), &expect) < 1e-15);
    }

    #[test]
    fn linear_problem_is_diagonal() {
        let pd = problem(0.0);
        let lam = 1.2;
        let u = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[2], &[3], 1.0);
        let w = lam * 2f64.sqrt() * 2.0;
        let expect = u.scale(-w * w + 9.0);
        assert!(max_diff(&residual(&pd, lam, &u).unwrap(), &expect) < 1e-13);
        let h = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[1], &[2], 1.0);
        assert!(quadratic_remainder(&pd, lam, &u, &h).unwrap().max_abs_coeff() < 1e-13);
    }

    #[test]
    fn linearized_closed_form() {
        let pd = problem(0.02);
        let u = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[0], &[1], 1.0);
        let l = apply_linearized(&pd, 1.0, &u, &u).unwrap();
        let expect = u.scale(1.0 + 0.02 * PI + 2.0 * 0.02 * PI);
        assert!(max_diff(&l, &expect) < 1e-15);
        let z = TorusFunction::zeros(1, 1, 4, 4);
        let l0 = apply_linearized(&pd, 1.0, &z, &u).unwrap();
        assert!(max_diff(&l0, &u.omega_dphi2(&pd.omega(1.0)).sub(&u.laplacian())) < 1e-16);
    }

    #[test]
    fn v0_inverts_phase_operator() {
        let pd = problem(0.01);
        let lam = 0.9;
        let v0 = recover_v0(&pd, lam).unwrap();
        let w = lam * 2f64.sqrt() * 2.0;
        assert!((v0.get(&[2], &[0]).re - (-0.01 * 0.5 / (w * w))).abs() < 1e-16);
        let back = v0.omega_dphi2(&pd.omega(lam));
        assert!(max_diff(&back, &pd.f0.scale(0.01)) < 1e-12);
    }

    #[test]
    fn rejects_x_mean_input() {
        let pd = problem(0.01);
        let u = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[1], &[0], 1.0);
        assert!(matches!(residual(&pd, 1.0, &u), Err(KqpError::DomainError(_))));
    }

    #[test]
    fn full_residual_matches_reduced_one() {
        let pd = problem(0.05);
        let lam = 1.05;
        let u = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[1], &[1], 0.01).with_sin(&[0], &[2], 0.02);
        let v = recover_v0(&pd, lam).unwrap().add(&u);
        let full = full_residual(&pd, lam, &v);
        let red = residual(&pd, lam, &u).unwrap();
        assert!((full.sobolev_norm(2.0) - red.sobolev_norm(2.0)).abs() < 1e-12);
    }

    #[test]
    fn remainder_is_second_order() {
        let pd = problem(0.1);
        let u = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[1], &[1], 0.7).with_sin(&[0], &[2], 0.4);
        let h = TorusFunction::zeros(1, 1, 4, 4).with_cos(&[0], &[1], 1.0).with_cos(&[-1], &[2], 0.5);
        let q = |t: f64| quadratic_remainder(&pd, 1.0, &u, &h.scale(t)).unwrap().sobolev_norm(2.0);
        let ratio = q(1e-3) / q(1e-4);
        assert!((ratio - 100.0).abs() < 1.0, "{ratio}");
    }
}
