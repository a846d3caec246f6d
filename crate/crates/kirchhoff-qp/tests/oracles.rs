mod common;

use common::*;
use kirchhoff_qp::config::forcing_preset;
use kirchhoff_qp::diophantine::FrequencyData;
use kirchhoff_qp::kirchhoff::{full_residual, recover_v0, residual, ProblemData};
use kirchhoff_qp::{ModeBox, TorusFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn max_diff(a: &TorusFunction, b: &TorusFunction) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn problem(nu: usize, eps: f64, forcing: &str) -> ProblemData {
    let omega: Vec<f64> = [2f64.sqrt(), 3f64.sqrt()][..nu].to_vec();
    let fd = FrequencyData::new(omega, 0.05).unwrap();
    ProblemData::new(fd, eps, forcing_preset(forcing, nu, 1).unwrap()).unwrap()
}

#[test]
fn product_matches_pointwise_grid_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (nu, d, la, lb) in [(1, 1, 3, 2), (1, 2, 2, 1), (2, 1, 2, 2)] {
        let f = random_function(&mut rng, ModeBox::new(nu, d, la, la), 0.0, false);
        let g = random_function(&mut rng, ModeBox::new(nu, d, lb, lb), 0.0, false);
        let target = ModeBox::new(nu, d, la + lb, la + lb);
        let m = 2 * (la + lb) + 2;
        let n = nu + d;
        let vals: Vec<f64> = grid_points(n, m)
            .iter()
            .map(|p| f.eval(&p[..nu], &p[nu..]) * g.eval(&p[..nu], &p[nu..]))
            .collect();
        let oracle = naive_dft(&vals, n, m, target);
        let prod = f.multiply_into(&g, target);
        assert!(max_diff(&prod, &oracle) < 1e-13, "nu={nu} d={d}: {}", max_diff(&prod, &oracle));
    }
}

#[test]
fn phase_function_product_broadcasts_over_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = random_function(&mut rng, ModeBox::new(1, 1, 2, 2), 0.0, false);
    let a = random_function(&mut rng, ModeBox::new(1, 0, 3, 0), 0.0, false);
    let target = ModeBox::new(1, 1, 5, 2);
    let vals: Vec<f64> = grid_points(2, 12).iter().map(|p| f.eval(&p[..1], &p[1..]) * a.eval(&p[..1], &[])).collect();
    let oracle = naive_dft(&vals, 2, 12, target);
    assert!(max_diff(&f.multiply_into(&a, target), &oracle) < 1e-13);
}

#[test]
fn residual_matches_collocation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (nu, eps) in [(1, 0.1), (2, 0.05)] {
        let pd = problem(nu, eps, "cos_phi_cos_x");
        let l = 2;
        let bx = ModeBox::new(nu, 1, l, l);
        let u = random_function(&mut rng, bx, 1.0, true);
        let lambda = 1.1;
        // products reach phase radius 3l; m > 3l + l avoids aliasing onto the box
        let m = 4 * l + 2;
        let vals = collocation_residual(&pd, lambda, &u, &pd.g, m);
        let oracle = naive_dft(&vals, nu + 1, m, bx);
        let spectral = residual(&pd, lambda, &u).unwrap();
        let err = max_diff(&spectral, &oracle);
        assert!(err < 1e-12, "nu={nu}: {err}");
    }
}

#[test]
fn grad_energy_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let u = random_function(&mut rng, ModeBox::new(1, 2, 2, 2), 0.0, true);
    let e = u.grad_energy();
    let m = 8;
    let cell = (2.0 * PI / m as f64).powi(2);
    for phi in [0.0, 0.4, 2.0] {
        let q: f64 = grid_points(2, m)
            .iter()
            .map(|x| eval_point(&u, &[1.0], &[phi], x).grad.iter().map(|g| g * g).sum::<f64>() * cell)
            .sum();
        assert!((e.eval(&[phi], &[]) - q).abs() < 1e-12 * q.max(1.0));
    }
}

#[test]
fn full_and_reduced_residuals_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pd = problem(1, 0.01, "mixed");
    assert!(pd.f0.max_abs_coeff() > 0.0);
    let lambda = 0.9;
    let u = random_function(&mut rng, ModeBox::new(1, 1, 4, 4), 2.0, true);
    let v0 = recover_v0(&pd, lambda).unwrap().resize(u.mode_box());
    let v = u.add(&v0);
    let full = full_residual(&pd, lambda, &v);
    let reduced = residual(&pd, lambda, &u).unwrap();
    assert!(max_diff(&full, &reduced) < 1e-15, "{}", max_diff(&full, &reduced));

    // and both agree with the pointwise equation for v
    let m = 18;
    let vals = collocation_residual(&pd, lambda, &v, &pd.f, m);
    let oracle = naive_dft(&vals, 2, m, u.mode_box());
    assert!(max_diff(&full, &oracle) < 1e-12);
}
