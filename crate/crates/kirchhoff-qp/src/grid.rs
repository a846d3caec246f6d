//! Uniform tensor grids on the torus and FFT round trips to coefficient boxes.

use crate::fourier::{ModeBox, TorusFunction, C64, MAX_DIM};
use rustfft::FftPlanner;

/// In-place multidimensional FFT over a row-major array (last axis fastest).
/// `inverse = true` computes sum_k X_k e^{+i k theta_n} without normalisation.
pub fn fft_nd(data: &mut [C64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(total, data.len());
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = total;
    for &n in dims.iter() {
        stride /= n;
        if n == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut line = vec![C64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in 0..total / block {
            for inner in 0..stride {
                let base = outer * block + inner;
                for (t, v) in line.iter_mut().enumerate() {
                    *v = data[base + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * stride] = *v;
                }
            }
        }
    }
}

fn wrap(k: i32, n: usize) -> usize {
    k.rem_euclid(n as i32) as usize
}

fn grid_offset(coords: &[i32], dims: &[usize]) -> usize {
    let mut off = 0usize;
    for (c, &n) in coords.iter().zip(dims) {
        off = off * n + wrap(*c, n);
    }
    off
}

/// Sample values of `u` on the tensor grid with `dims[a]` points along axis `a`
/// (theta = 2 pi n / dims[a]). Every axis must resolve the box without wrap-around.
pub fn to_grid(u: &TorusFunction, dims: &[usize]) -> Vec<C64> {
    let bx = u.mode_box();
    assert_eq!(dims.len(), bx.dim());
    for (a, &n) in dims.iter().enumerate() {
        assert!(n > 2 * bx.radius(a), "grid too coarse for the coefficient box");
    }
    let total: usize = dims.iter().product();
    let mut data = vec![C64::new(0.0, 0.0); total];
    let mut k = [0i32; MAX_DIM];
    for (off, c) in u.coeffs().iter().enumerate() {
        if *c == C64::new(0.0, 0.0) {
            continue;
        }
        bx.coords_of(off, &mut k);
        data[grid_offset(&k[..bx.dim()], dims)] += *c;
    }
    fft_nd(&mut data, dims, true);
    data
}

/// Coefficients on `target` from grid samples; also returns the l2 mass of grid
/// modes falling outside the target box (aliasing/truncation indicator).
pub fn from_grid(values: &[C64], dims: &[usize], target: ModeBox) -> (TorusFunction, f64) {
    assert_eq!(dims.len(), target.dim());
    let total: usize = dims.iter().product();
    let mut data = values.to_vec();
    fft_nd(&mut data, dims, false);
    let scale = 1.0 / total as f64;
    let mut out = TorusFunction::zeros_box(target);
    let mut k = [0i32; MAX_DIM];
    let mut captured = vec![false; total];
    for off in 0..target.len() {
        target.coords_of(off, &mut k);
        let mut inside = true;
        for (a, &n) in dims.iter().enumerate() {
            if 2 * k[a].unsigned_abs() as usize >= n {
                inside = false;
            }
        }
        if !inside {
            continue;
        }
        let g = grid_offset(&k[..target.dim()], dims);
        captured[g] = true;
        out.coeffs_mut()[off] = data[g] * scale;
    }
    let tail: f64 = data
        .iter()
        .zip(&captured)
        .filter(|(_, c)| !**c)
        .map(|(v, _)| (v * scale).norm_sqr())
        .sum();
    (out, tail.sqrt())
}

/// Grid points of a uniform grid on T^n with `g` points per axis, row-major.
pub fn phase_points(nu: usize, g: usize) -> Vec<Vec<f64>> {
    let total = g.pow(nu as u32);
    let h = 2.0 * std::f64::consts::PI / g as f64;
    (0..total)
        .map(|mut off| {
            let mut p = vec![0.0; nu];
            for a in (0..nu).rev() {
                p[a] = (off % g) as f64 * h;
                off /= g;
            }
            p
        })
        .collect()
}

/// Smallest even grid size not below `n`.
pub fn even_at_least(n: usize) -> usize {
    n + (n % 2)
}
