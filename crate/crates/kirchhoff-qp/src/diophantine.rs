//! Frequency vectors omega = lambda * omega_bar and finite-order Diophantine checks.

use crate::error::{KqpError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyData {
    pub omega_bar: Vec<f64>,
    pub gamma0: f64,
    pub nu: usize,
    pub lambda_range: (f64, f64),
}

impl FrequencyData {
    pub fn new(omega_bar: Vec<f64>, gamma0: f64) -> Result<Self> {
        if omega_bar.is_empty() || omega_bar.iter().any(|w| *w == 0.0 || !w.is_finite()) {
            return Err(KqpError::Config("omega_bar components must be finite and nonzero".into()));
        }
        if gamma0 <= 0.0 {
            return Err(KqpError::Config("gamma0 must be positive".into()));
        }
        let nu = omega_bar.len();
        Ok(FrequencyData { omega_bar, gamma0, nu, lambda_range: (0.5, 1.5) })
    }

    pub fn omega(&self, lambda: f64) -> Vec<f64> {
        self.omega_bar.iter().map(|w| lambda * w).collect()
    }
}

/// Named base frequency vectors. `default` picks powers 2^{e/q} with a Sidon set of
/// exponents so that all products omega_i omega_j are rationally independent.
pub fn omega_bar_preset(name: &str, nu: usize) -> Result<Vec<f64>> {
    let sidon = |exps: &[i32], q: f64| exps.iter().map(|&e| 2f64.powf(e as f64 / q)).collect::<Vec<_>>();
    let v = match name {
        "sqrt2" => vec![2f64.sqrt()],
        "fourth_root2" => vec![2f64.powf(0.25)],
        "one_cbrt2" => vec![1.0, 2f64.cbrt()],
        "default" => match nu {
            1 => vec![2f64.sqrt()],
            2 => sidon(&[0, 1], 3.0),
            3 => sidon(&[0, 1, 3], 7.0),
            4 => sidon(&[0, 1, 3, 7], 15.0),
            _ => return Err(KqpError::Config(format!("no default frequency vector for nu = {nu}"))),
        },
        other => return Err(KqpError::Config(format!("unknown omega_bar preset '{other}'"))),
    };
    if v.len() != nu {
        return Err(KqpError::Config(format!("preset '{name}' has length {} but nu = {nu}", v.len())));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DioReport {
    pub holds: bool,
    pub worst: Vec<i32>,
    pub min_value: f64,
}

/// Calls `f` on every integer vector in [-r, r]^n except 0.
fn for_each_nonzero(n: usize, r: i32, mut f: impl FnMut(&[i32])) {
    let mut v = vec![-r; n];
    loop {
        if v.iter().any(|&c| c != 0) {
            f(&v);
        }
        let mut a = 0;
        loop {
            if a == n {
                return;
            }
            if v[a] < r {
                v[a] += 1;
                break;
            }
            v[a] = -r;
            a += 1;
        }
    }
}

fn max_abs(v: &[i32]) -> i32 {
    v.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// |omega_bar . l| >= gamma0 / |l|^nu for 0 < |l| <= L; reports min |omega_bar.l| |l|^nu.
pub fn check_dio(fd: &FrequencyData, l_max: usize) -> DioReport {
    let mut best = f64::INFINITY;
    let mut worst = vec![0; fd.nu];
    for_each_nonzero(fd.nu, l_max as i32, |l| {
        let dot: f64 = l.iter().zip(&fd.omega_bar).map(|(&a, w)| a as f64 * w).sum();
        let val = dot.abs() * (max_abs(l) as f64).powi(fd.nu as i32);
        if val < best {
            best = val;
            worst = l.to_vec();
        }
    });
    DioReport { holds: fd.gamma0 <= best, worst, min_value: best }
}

/// Products omega_bar_i omega_bar_j with i <= j, in the order used for coefficient vectors.
fn quadratic_monomials(x: &[f64]) -> Vec<f64> {
    let mut m = Vec::new();
    for i in 0..x.len() {
        for j in i..x.len() {
            m.push(x[i] * x[j]);
        }
    }
    m
}

/// |sum_{i<=j} omega_bar_i omega_bar_j p_ij| >= gamma0 / |p|^{nu(nu+1)} for 0 < |p| <= P.
pub fn check_dioquad(fd: &FrequencyData, p_max: usize) -> (bool, f64) {
    let mono = quadratic_monomials(&fd.omega_bar);
    let expo = (fd.nu * (fd.nu + 1)) as i32;
    let mut best = f64::INFINITY;
    for_each_nonzero(mono.len(), p_max as i32, |p| {
        let v: f64 = p.iter().zip(&mono).map(|(&a, m)| a as f64 * m).sum();
        best = best.min(v.abs() * (max_abs(p) as f64).powi(expo));
    });
    (fd.gamma0 <= best, best)
}

/// Distinct values of |j|^2 over 0 < |j|_inf <= n, j in Z^d, sorted.
fn j_square_values(d: usize, n: i32) -> Vec<f64> {
    let mut vals = Vec::new();
    for_each_nonzero(d, n, |j| vals.push(j.iter().map(|&c| c * c).sum::<i32>()));
    vals.sort_unstable();
    vals.dedup();
    vals.into_iter().map(|v| v as f64).collect()
}

/// min over |(l,j)| <= N0, j != 0 of |(lambda omega_bar . l)^2 - |j|^2|.
pub fn i_bar_margin(lambda: f64, fd: &FrequencyData, d: usize, n0: usize) -> f64 {
    let qs = j_square_values(d, n0 as i32);
    let mut best = f64::INFINITY;
    let mut check = |x: f64| {
        let pos = qs.partition_point(|&q| q < x);
        for k in [pos.wrapping_sub(1), pos] {
            if let Some(q) = qs.get(k) {
                best = best.min((x - q).abs());
            }
        }
    };
    check(0.0);
    for_each_nonzero(fd.nu, n0 as i32, |l| {
        let w: f64 = l.iter().zip(&fd.omega_bar).map(|(&a, w)| a as f64 * w).sum::<f64>() * lambda;
        check(w * w);
    });
    best
}

pub fn in_i_bar(lambda: f64, fd: &FrequencyData, d: usize, n0: usize, tau0: f64) -> bool {
    i_bar_margin(lambda, fd, d, n0) >= (n0 as f64).powf(-tau0)
}

/// Smallest |P(lambda omega_bar)| (1 + |p|^{nu(nu+1)}) N0 over nonzero quadratic integer
/// polynomials whose quadratic coefficients are bounded by `max_coeff`; membership
/// holds iff this is >= 1. For fixed quadratic part only the two integers nearest to
/// minus its value can violate the bound, so the constant term is not enumerated.
pub fn i_tilde_margin(lambda: f64, fd: &FrequencyData, n0: usize, max_coeff: usize) -> f64 {
    let x = fd.omega(lambda);
    let mono = quadratic_monomials(&x);
    let expo = (fd.nu * (fd.nu + 1)) as i32;
    let mut best = f64::INFINITY;
    let mut eval = |q: &[i32]| {
        let qv: f64 = q.iter().zip(&mono).map(|(&a, m)| a as f64 * m).sum();
        let lo = (-qv).floor();
        for p0 in [lo, lo + 1.0] {
            let qn = max_abs(q) as f64;
            if p0 == 0.0 && qn == 0.0 {
                continue;
            }
            let pn = qn.max(p0.abs());
            let val = (p0 + qv).abs() * (1.0 + pn.powi(expo)) * n0 as f64;
            best = best.min(val);
        }
    };
    eval(&vec![0; mono.len()]);
    if max_coeff > 0 {
        for_each_nonzero(mono.len(), max_coeff as i32, |q| eval(q));
    }
    best
}

pub fn in_i_tilde(lambda: f64, fd: &FrequencyData, n0: usize, max_coeff: usize) -> bool {
    i_tilde_margin(lambda, fd, n0, max_coeff) >= 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(w: Vec<f64>, g: f64) -> FrequencyData {
        FrequencyData::new(w, g).unwrap()
    }

    #[test]
    fn dio_unit_frequency() {
        let r = check_dio(&fd(vec![1.0], 1.0), 10);
        assert!(r.holds);
        assert_eq!(r.min_value, 1.0);
        assert_eq!(r.worst.iter().map(|c| c.abs()).max(), Some(1));
        assert!(!check_dio(&fd(vec![1.0], 1.01), 10).holds);
    }

    #[test]
    fn dio_threshold_brackets_measured_minimum() {
        let w = vec![1.0, 2f64.sqrt()];
        let m = check_dio(&fd(w.clone(), 1.0), 50).min_value;
        assert!(check_dio(&fd(w.clone(), 0.9 * m), 50).holds);
        assert!(!check_dio(&fd(w, 1.1 * m), 50).holds);
    }

    #[test]
    fn dioquad_sqrt2() {
        let (ok, m) = check_dioquad(&fd(vec![2f64.sqrt()], 2.0), 10);
        assert!(ok);
        assert!((m - 2.0).abs() < 1e-12);
        assert!(!check_dioquad(&fd(vec![2f64.sqrt()], 2.1), 10).0);
    }

    #[test]
    fn i_bar_examples() {
        let f = fd(vec![2f64.sqrt()], 1.0);
        assert!(in_i_bar(1.0, &f, 1, 5, 2.0));
        assert!(!in_i_bar(1.0 / 2f64.sqrt(), &f, 1, 5, 2.0));
    }

    #[test]
    fn i_tilde_examples() {
        let f = fd(vec![2f64.sqrt()], 1.0);
        // lambda^2 * 2 = 1/2: p = (-1, 2) vanishes
        assert!(!in_i_tilde(0.5, &f, 4, 2));
        assert!(in_i_tilde(0.5, &f, 4, 0));
        assert!(in_i_tilde(1.3, &f, 4, 0));
    }

    #[test]
    fn presets_have_right_length() {
        for nu in 1..=4 {
            let w = omega_bar_preset("default", nu).unwrap();
            let f = fd(w, 1e-3);
            assert!(check_dioquad(&f, 4).1 > 0.0);
        }
        assert!(omega_bar_preset("sqrt2", 2).is_err());
        assert!(omega_bar_preset("nope", 1).is_err());
    }
}
