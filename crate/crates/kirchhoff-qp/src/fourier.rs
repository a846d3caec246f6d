//! Fourier coefficients of real functions on T^nu x T^d.
//!
//! A `TorusFunction` stores a dense box |l_i| <= lphi, |j_i| <= lx of complex
//! amplitudes of e^{i(l.phi + j.x)}. Functions of the phase alone use `d = 0`.

use crate::error::{KqpError, Result};
use crate::grid;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type C64 = Complex64;
pub const MAX_DIM: usize = 8;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Products with more coefficient pairs than this go through the FFT grid.
const DIRECT_PRODUCT_LIMIT: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub ell: Vec<i32>,
    pub j: Vec<i32>,
}

impl MultiIndex {
    pub fn new(ell: Vec<i32>, j: Vec<i32>) -> Self {
        MultiIndex { ell, j }
    }

    pub fn zero(nu: usize, d: usize) -> Self {
        MultiIndex { ell: vec![0; nu], j: vec![0; d] }
    }

    pub fn from_coords(coords: &[i32], nu: usize) -> Self {
        MultiIndex { ell: coords[..nu].to_vec(), j: coords[nu..].to_vec() }
    }

    pub fn coords(&self) -> Vec<i32> {
        self.ell.iter().chain(&self.j).copied().collect()
    }

    /// Max-norm |(l, j)|.
    pub fn norm(&self) -> i32 {
        self.ell.iter().chain(&self.j).map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Sobolev weight max(1, |l|, |j|).
    pub fn weight(&self) -> f64 {
        self.norm().max(1) as f64
    }

    pub fn dist(&self, other: &MultiIndex) -> i32 {
        self.sub(other).norm()
    }

    pub fn neg(&self) -> Self {
        MultiIndex {
            ell: self.ell.iter().map(|c| -c).collect(),
            j: self.j.iter().map(|c| -c).collect(),
        }
    }

    pub fn add(&self, o: &MultiIndex) -> Self {
        MultiIndex {
            ell: self.ell.iter().zip(&o.ell).map(|(a, b)| a + b).collect(),
            j: self.j.iter().zip(&o.j).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &MultiIndex) -> Self {
        MultiIndex {
            ell: self.ell.iter().zip(&o.ell).map(|(a, b)| a - b).collect(),
            j: self.j.iter().zip(&o.j).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn j_is_zero(&self) -> bool {
        self.j.iter().all(|&c| c == 0)
    }

    /// Euclidean |j|^2, the symbol of -Laplacian.
    pub fn j_sq(&self) -> f64 {
        self.j.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    pub fn omega_dot(&self, omega: &[f64]) -> f64 {
        self.ell.iter().zip(omega).map(|(&l, w)| l as f64 * w).sum()
    }
}

pub fn s0_of(nu: usize, d: usize) -> usize {
    (nu + d) / 2 + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeBox {
    pub nu: usize,
    pub d: usize,
    pub lphi: usize,
    pub lx: usize,
}

impl ModeBox {
    pub fn new(nu: usize, d: usize, lphi: usize, lx: usize) -> Self {
        assert!(nu + d <= MAX_DIM && nu >= 1, "unsupported dimensions");
        ModeBox { nu, d, lphi, lx: if d == 0 { 0 } else { lx } }
    }

    pub fn dim(&self) -> usize {
        self.nu + self.d
    }

    pub fn radius(&self, axis: usize) -> usize {
        if axis < self.nu {
            self.lphi
        } else {
            self.lx
        }
    }

    pub fn len(&self) -> usize {
        (2 * self.lphi + 1).pow(self.nu as u32) * (2 * self.lx + 1).pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offset(&self, coords: &[i32]) -> Option<usize> {
        let mut off = 0usize;
        for (a, &c) in coords.iter().enumerate().take(self.dim()) {
            let r = self.radius(a) as i32;
            if c.abs() > r {
                return None;
            }
            off = off * (2 * r as usize + 1) + (c + r) as usize;
        }
        Some(off)
    }

    pub fn coords_of(&self, mut off: usize, out: &mut [i32]) {
        for a in (0..self.dim()).rev() {
            let r = self.radius(a);
            let n = 2 * r + 1;
            out[a] = (off % n) as i32 - r as i32;
            off /= n;
        }
    }

    pub fn index_of(&self, off: usize) -> MultiIndex {
        let mut k = [0i32; MAX_DIM];
        self.coords_of(off, &mut k);
        MultiIndex::from_coords(&k[..self.dim()], self.nu)
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        (0..self.len()).map(|o| self.index_of(o)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorusFunction {
    bx: ModeBox,
    c: Vec<C64>,
}

impl TorusFunction {
    pub fn zeros(nu: usize, d: usize, lphi: usize, lx: usize) -> Self {
        Self::zeros_box(ModeBox::new(nu, d, lphi, lx))
    }

    pub fn zeros_box(bx: ModeBox) -> Self {
        TorusFunction { bx, c: vec![ZERO; bx.len()] }
    }

    /// Function of the phase only (d = 0).
    pub fn phase_zeros(nu: usize, lphi: usize) -> Self {
        Self::zeros(nu, 0, lphi, 0)
    }

    pub fn constant(bx: ModeBox, value: f64) -> Self {
        let mut u = Self::zeros_box(bx);
        let z = vec![0; bx.dim()];
        let o = bx.offset(&z).unwrap();
        u.c[o] = C64::new(value, 0.0);
        u
    }

    pub fn mode_box(&self) -> ModeBox {
        self.bx
    }

    pub fn nu(&self) -> usize {
        self.bx.nu
    }

    pub fn d(&self) -> usize {
        self.bx.d
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.c
    }

    pub fn get(&self, ell: &[i32], j: &[i32]) -> C64 {
        let k: Vec<i32> = ell.iter().chain(j).copied().collect();
        self.bx.offset(&k).map(|o| self.c[o]).unwrap_or(ZERO)
    }

    pub fn get_index(&self, k: &MultiIndex) -> C64 {
        self.get(&k.ell, &k.j)
    }

    /// Adds `v` at (l, j) and conj(v) at (-l, -j), keeping the function real.
    /// At the zero index this adds 2 Re v.
    pub fn add_pair(&mut self, ell: &[i32], j: &[i32], v: C64) {
        let k: Vec<i32> = ell.iter().chain(j).copied().collect();
        let nk: Vec<i32> = k.iter().map(|c| -c).collect();
        let o = self.bx.offset(&k).expect("index outside box");
        let no = self.bx.offset(&nk).expect("index outside box");
        self.c[o] += v;
        self.c[no] += v.conj();
    }

    /// cos(l.phi + j.x) scaled by `amp`.
    pub fn with_cos(mut self, ell: &[i32], j: &[i32], amp: f64) -> Self {
        self.add_pair(ell, j, C64::new(0.5 * amp, 0.0));
        self
    }

    /// sin(l.phi + j.x) scaled by `amp`.
    pub fn with_sin(mut self, ell: &[i32], j: &[i32], amp: f64) -> Self {
        self.add_pair(ell, j, C64::new(0.0, -0.5 * amp));
        self
    }

    pub fn map_indexed<F: Fn(&[i32]) -> C64>(&self, f: F) -> Self {
        let mut out = self.clone();
        let mut k = [0i32; MAX_DIM];
        let dim = self.bx.dim();
        for (o, v) in out.c.iter_mut().enumerate() {
            if *v != ZERO {
                self.bx.coords_of(o, &mut k);
                *v *= f(&k[..dim]);
            }
        }
        out
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let mut k = [0i32; MAX_DIM];
        let dim = self.bx.dim();
        // weights are scaled by the largest one so that large s does not overflow
        let wmax = (0..dim).map(|a| self.bx.radius(a)).max().unwrap_or(0).max(1) as f64;
        let mut acc = 0.0;
        for (o, v) in self.c.iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            self.bx.coords_of(o, &mut k);
            let w = k[..dim].iter().map(|c| c.abs()).max().unwrap_or(0).max(1) as f64;
            acc += (w / wmax).powf(2.0 * s) * v.norm_sqr();
        }
        wmax.powf(s) * acc.sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pi_N keeps 0 < |(l,j)| <= N (max-norm); the complement keeps the rest.
    pub fn project(&self, n: f64, complement: bool) -> Self {
        let mut out = self.clone();
        let mut k = [0i32; MAX_DIM];
        let dim = self.bx.dim();
        for (o, v) in out.c.iter_mut().enumerate() {
            self.bx.coords_of(o, &mut k);
            let m = k[..dim].iter().map(|c| c.abs()).max().unwrap_or(0);
            let keep = m > 0 && (m as f64) <= n;
            if keep == complement {
                *v = ZERO;
            }
        }
        out
    }

    /// (x-average part with j = 0, remainder with j != 0).
    pub fn x_mean_split(&self) -> (Self, Self) {
        let mut v0 = self.clone();
        let mut u = self.clone();
        let mut k = [0i32; MAX_DIM];
        let (nu, dim) = (self.bx.nu, self.bx.dim());
        for o in 0..self.c.len() {
            self.bx.coords_of(o, &mut k);
            if k[nu..dim].iter().all(|&c| c == 0) {
                u.c[o] = ZERO;
            } else {
                v0.c[o] = ZERO;
            }
        }
        (v0, u)
    }

    /// Largest |coefficient| among the j = 0 modes.
    pub fn x_mean_size(&self) -> f64 {
        if self.bx.d == 0 {
            return self.max_abs_coeff();
        }
        self.x_mean_split().0.max_abs_coeff()
    }

    pub fn has_zero_x_mean(&self) -> bool {
        self.x_mean_size() <= 1e-12 * self.sobolev_norm(s0_of(self.bx.nu, self.bx.d.max(1)) as f64).max(1e-300)
    }

    /// Phase-only view: the j = 0 slice as a function with d = 0.
    pub fn x_average(&self) -> Self {
        let mut out = Self::phase_zeros(self.bx.nu, self.bx.lphi);
        let mut k = [0i32; MAX_DIM];
        let nu = self.bx.nu;
        for (o, v) in out.c.iter_mut().enumerate() {
            out.bx.coords_of(o, &mut k);
            *v = self.get(&k[..nu], &vec![0; self.bx.d]);
        }
        out
    }

    /// Lifts a phase-only function into a box with space dimension d.
    pub fn lift(&self, target: ModeBox) -> Self {
        assert_eq!(self.bx.nu, target.nu);
        let mut out = Self::zeros_box(target);
        let mut k = [0i32; MAX_DIM];
        let nu = self.bx.nu;
        for (o, v) in self.c.iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            self.bx.coords_of(o, &mut k);
            for c in k.iter_mut().take(target.dim()).skip(self.bx.dim()) {
                *c = 0;
            }
            if let Some(t) = target.offset(&k[..target.dim()]) {
                out.c[t] = *v;
            }
            let _ = nu;
        }
        out
    }

    /// Embeds into (or truncates to) another box of the same dimensions.
    pub fn resize(&self, target: ModeBox) -> Self {
        assert_eq!((self.bx.nu, self.bx.d), (target.nu, target.d));
        let mut out = Self::zeros_box(target);
        let mut k = [0i32; MAX_DIM];
        let dim = target.dim();
        for (o, v) in self.c.iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            self.bx.coords_of(o, &mut k);
            if let Some(t) = target.offset(&k[..dim]) {
                out.c[t] = *v;
            }
        }
        out
    }

    pub fn nonzeros(&self) -> Vec<([i32; MAX_DIM], C64)> {
        let mut k = [0i32; MAX_DIM];
        self.c
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != ZERO)
            .map(|(o, v)| {
                self.bx.coords_of(o, &mut k);
                (k, *v)
            })
            .collect()
    }

    /// Largest |coordinate| per axis among nonzero modes.
    fn occupied_radii(&self) -> Vec<usize> {
        let dim = self.bx.dim();
        let mut r = vec![0usize; dim];
        for (k, _) in self.nonzeros() {
            for a in 0..dim {
                r[a] = r[a].max(k[a].unsigned_abs() as usize);
            }
        }
        r
    }

    /// Pointwise product, projected to the box of `self`. `other` may be a
    /// phase-only function (d = 0) or share the dimensions of `self`.
    pub fn multiply(&self, other: &TorusFunction) -> TorusFunction {
        self.multiply_into(other, self.bx)
    }

    pub fn multiply_into(&self, other: &TorusFunction, target: ModeBox) -> TorusFunction {
        assert_eq!(self.bx.nu, other.bx.nu, "incompatible phase dimension");
        assert!(other.bx.d == self.bx.d || other.bx.d == 0, "incompatible space dimension");
        assert_eq!((target.nu, target.d), (self.bx.nu, self.bx.d));
        let a = self.nonzeros();
        let b = other.nonzeros();
        if a.len().saturating_mul(b.len()) <= DIRECT_PRODUCT_LIMIT {
            let dim = target.dim();
            let mut out = Self::zeros_box(target);
            for (ka, va) in &a {
                for (kb, vb) in &b {
                    let mut k = [0i32; MAX_DIM];
                    for t in 0..dim {
                        let kbt = if t < other.bx.dim() { kb[t] } else { 0 };
                        k[t] = ka[t] + kbt;
                    }
                    if let Some(o) = target.offset(&k[..dim]) {
                        out.c[o] += va * vb;
                    }
                }
            }
            out
        } else {
            let other_full = if other.bx.d == self.bx.d {
                other.clone()
            } else {
                other.lift(ModeBox::new(self.bx.nu, self.bx.d, other.bx.lphi, 0))
            };
            let ra = self.occupied_radii();
            let rb = other_full.occupied_radii();
            let dims: Vec<usize> = (0..target.dim())
                .map(|t| {
                    let need = (ra[t] + rb[t] + target.radius(t) + 1)
                        .max(2 * self.bx.radius(t) + 1)
                        .max(2 * other_full.bx.radius(t) + 1);
                    grid::even_at_least(need)
                })
                .collect();
            let ga = grid::to_grid(self, &dims);
            let gb = grid::to_grid(&other_full, &dims);
            let prod: Vec<C64> = ga.iter().zip(&gb).map(|(x, y)| x * y).collect();
            grid::from_grid(&prod, &dims, target).0
        }
    }

    pub fn add(&self, o: &TorusFunction) -> TorusFunction {
        assert_eq!(self.bx, o.bx, "box mismatch");
        TorusFunction { bx: self.bx, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &TorusFunction) -> TorusFunction {
        assert_eq!(self.bx, o.bx, "box mismatch");
        TorusFunction { bx: self.bx, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> TorusFunction {
        TorusFunction { bx: self.bx, c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn axpy(&mut self, s: f64, o: &TorusFunction) {
        assert_eq!(self.bx, o.bx, "box mismatch");
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += b * s;
        }
    }

    /// Components of the x-gradient: mode (l,j) times i j_k.
    pub fn grad_x(&self) -> Vec<TorusFunction> {
        let nu = self.bx.nu;
        (0..self.bx.d)
            .map(|a| self.map_indexed(|k| C64::new(0.0, k[nu + a] as f64)))
            .collect()
    }

    pub fn laplacian(&self) -> TorusFunction {
        let nu = self.bx.nu;
        self.map_indexed(|k| {
            let s: f64 = k[nu..].iter().map(|&c| (c as f64) * (c as f64)).sum();
            C64::new(-s, 0.0)
        })
    }

    /// omega . d/dphi: mode l times i (omega . l).
    pub fn omega_dphi(&self, omega: &[f64]) -> TorusFunction {
        let nu = self.bx.nu;
        self.map_indexed(|k| C64::new(0.0, dot(&k[..nu], omega)))
    }

    pub fn omega_dphi2(&self, omega: &[f64]) -> TorusFunction {
        let nu = self.bx.nu;
        self.map_indexed(|k| {
            let w = dot(&k[..nu], omega);
            C64::new(-w * w, 0.0)
        })
    }

    /// Phase average: the l = 0 slice (a function of x when d > 0).
    pub fn phase_mean_size(&self) -> f64 {
        let nu = self.bx.nu;
        self.nonzeros()
            .iter()
            .filter(|(k, _)| k[..nu].iter().all(|&c| c == 0))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// (omega . d/dphi)^{-order} on functions with zero phase average.
    pub fn invert_omega_dphi(&self, omega: &[f64], order: u32) -> Result<TorusFunction> {
        assert!(order == 1 || order == 2);
        let mean = self.phase_mean_size();
        if mean > 1e-12 {
            return Err(KqpError::MeanNotZero(mean));
        }
        let nu = self.bx.nu;
        let mut out = self.clone();
        let mut k = [0i32; MAX_DIM];
        for (o, v) in out.c.iter_mut().enumerate() {
            self.bx.coords_of(o, &mut k);
            if k[..nu].iter().all(|&c| c == 0) {
                *v = ZERO;
                continue;
            }
            if *v == ZERO {
                continue;
            }
            let w = dot(&k[..nu], omega);
            if w.abs() < 1e-14 {
                return Err(KqpError::SmallDivisorUnderflow { ell: k[..nu].to_vec(), value: w.abs() });
            }
            let sym = C64::new(0.0, w).powu(order);
            *v /= sym;
        }
        Ok(out)
    }

    /// Sets the phase average (l = 0 slice) to zero.
    pub fn remove_phase_mean(&self) -> TorusFunction {
        let nu = self.bx.nu;
        self.map_indexed(|k| if k[..nu].iter().all(|&c| c == 0) { ZERO } else { C64::new(1.0, 0.0) })
    }

    /// Maximal violation of c(-k) = conj c(k).
    pub fn reality_defect(&self) -> f64 {
        let dim = self.bx.dim();
        let mut k = [0i32; MAX_DIM];
        let mut worst: f64 = 0.0;
        for (o, v) in self.c.iter().enumerate() {
            self.bx.coords_of(o, &mut k);
            let nk: Vec<i32> = k[..dim].iter().map(|c| -c).collect();
            let w = self.c[self.bx.offset(&nk).unwrap()];
            worst = worst.max((v - w.conj()).norm());
        }
        worst
    }

    /// Replaces c(k) by (c(k) + conj c(-k)) / 2.
    pub fn symmetrize(&mut self) {
        let dim = self.bx.dim();
        let mut k = [0i32; MAX_DIM];
        let old = self.c.clone();
        for (o, v) in self.c.iter_mut().enumerate() {
            self.bx.coords_of(o, &mut k);
            let nk: Vec<i32> = k[..dim].iter().map(|c| -c).collect();
            let w = old[self.bx.offset(&nk).unwrap()];
            *v = 0.5 * (old[o] + w.conj());
        }
    }

    /// Direct evaluation of the trigonometric sum at one point (real part).
    pub fn eval(&self, phi: &[f64], x: &[f64]) -> f64 {
        let nu = self.bx.nu;
        self.nonzeros()
            .iter()
            .map(|(k, v)| {
                let arg: f64 = k[..nu].iter().zip(phi).map(|(&a, p)| a as f64 * p).sum::<f64>()
                    + k[nu..self.bx.dim()].iter().zip(x).map(|(&a, p)| a as f64 * p).sum::<f64>();
                (v * C64::from_polar(1.0, arg)).re
            })
            .sum()
    }

    /// Integral over T^d of |grad u|^2 as a phase function on box 2*lphi,
    /// with the non-normalised measure dx (so u = cos x gives pi).
    pub fn grad_energy(&self) -> TorusFunction {
        let (nu, d) = (self.bx.nu, self.bx.d);
        let mut out = Self::phase_zeros(nu, 2 * self.bx.lphi);
        let vol = (2.0 * PI).powi(d as i32);
        let nz = self.nonzeros();
        // sum_j |j|^2 u_{l1,j} conj(u_{l2,j}) e^{i(l1-l2)phi}
        for (k1, v1) in &nz {
            let js: f64 = k1[nu..nu + d].iter().map(|&c| (c as f64) * (c as f64)).sum();
            if js == 0.0 {
                continue;
            }
            for (k2, v2) in &nz {
                if k1[nu..nu + d] != k2[nu..nu + d] {
                    continue;
                }
                let m: Vec<i32> = (0..nu).map(|t| k1[t] - k2[t]).collect();
                let o = out.bx.offset(&m).unwrap();
                out.c[o] += v1 * v2.conj() * (js * vol);
            }
        }
        out
    }

    /// Phase function int_{T^d} self(phi,x) other(phi,x) dx on box 2*lphi.
    pub fn x_inner(&self, other: &TorusFunction) -> TorusFunction {
        let (nu, d) = (self.bx.nu, self.bx.d);
        assert_eq!((nu, d), (other.bx.nu, other.bx.d));
        let lp = self.bx.lphi.max(other.bx.lphi);
        let mut out = Self::phase_zeros(nu, 2 * lp);
        let vol = (2.0 * PI).powi(d as i32);
        let a = self.nonzeros();
        let b = other.nonzeros();
        for (k1, v1) in &a {
            for (k2, v2) in &b {
                if (nu..nu + d).any(|t| k1[t] + k2[t] != 0) {
                    continue;
                }
                let m: Vec<i32> = (0..nu).map(|t| k1[t] + k2[t]).collect();
                let o = out.bx.offset(&m).unwrap();
                out.c[o] += v1 * v2 * vol;
            }
        }
        out
    }

    pub fn to_json_value(&self) -> TorusFunctionJson {
        let bx = self.bx;
        let modes = (0..self.c.len())
            .filter(|&o| self.c[o] != ZERO)
            .filter_map(|o| {
                let k = bx.index_of(o);
                let coords = k.coords();
                let positive = coords.iter().find(|&&c| c != 0).map(|&c| c > 0).unwrap_or(true);
                positive.then(|| ModeJson { ell: k.ell, j: k.j, re: self.c[o].re, im: self.c[o].im })
            })
            .collect();
        TorusFunctionJson { nu: bx.nu, d: bx.d, r#box: [bx.lphi, bx.lx], modes }
    }

    pub fn from_json_value(v: &TorusFunctionJson) -> Result<TorusFunction> {
        if v.nu == 0 || v.nu + v.d > MAX_DIM {
            return Err(KqpError::Config(format!("unsupported dimensions nu={} d={}", v.nu, v.d)));
        }
        let mut u = TorusFunction::zeros(v.nu, v.d, v.r#box[0], v.r#box[1]);
        for m in &v.modes {
            if m.ell.len() != v.nu || m.j.len() != v.d {
                return Err(KqpError::Config("mode index length mismatch".into()));
            }
            let k: Vec<i32> = m.ell.iter().chain(&m.j).copied().collect();
            if u.bx.offset(&k).is_none() {
                return Err(KqpError::Config(format!("mode {:?} outside box", k)));
            }
            if k.iter().all(|&c| c == 0) {
                let o = u.bx.offset(&k).unwrap();
                u.c[o] = C64::new(m.re, 0.0);
            } else {
                u.add_pair(&m.ell, &m.j, C64::new(m.re, m.im));
            }
        }
        Ok(u)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("serialisable")
    }

    pub fn from_json(s: &str) -> Result<TorusFunction> {
        let v: TorusFunctionJson =
            serde_json::from_str(s).map_err(|e| KqpError::Config(format!("bad function json: {e}")))?;
        Self::from_json_value(&v)
    }
}

pub(crate) fn dot(k: &[i32], omega: &[f64]) -> f64 {
    k.iter().zip(omega).map(|(&a, w)| a as f64 * w).sum()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModeJson {
    pub ell: Vec<i32>,
    pub j: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TorusFunctionJson {
    pub nu: usize,
    pub d: usize,
    pub r#box: [usize; 2],
    pub modes: Vec<ModeJson>,
}
