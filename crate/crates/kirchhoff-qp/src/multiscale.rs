//! Diagnostics on the theta-shifted family L(theta) = D(lambda, theta) + R2 with
//! D_{l,j}(lambda, theta) = -(lambda omega_bar.l + theta)^2 + mu |j|^2.

use crate::decay_matrix::{window, DecayMatrix};
use crate::error::{KqpError, Result};
use crate::fourier::{MultiIndex, TorusFunction, C64};
use crate::kirchhoff::ProblemData;
use crate::reduction::{reduce, ReductionOptions, Remainder};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// D_{l,j}(lambda, theta) for j != 0.
pub fn d_entry(omega_bar: &[f64], lambda: f64, theta: f64, mu: f64, ell: &[i32], j: &[i32]) -> Result<f64> {
    if j.iter().all(|&c| c == 0) {
        return Err(KqpError::DomainError("D is defined for j != 0 only".into()));
    }
    let x = lambda * crate::fourier::dot(ell, omega_bar) + theta;
    let jsq: f64 = j.iter().map(|&c| (c as f64) * (c as f64)).sum();
    Ok(-x * x + mu * jsq)
}

/// D(lambda, theta) + R2(u) on arbitrary finite site sets.
#[derive(Clone, Debug)]
pub struct ShiftedOperator {
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub mu: f64,
    pub remainder: Option<Remainder>,
}

impl ShiftedOperator {
    /// Builds the family at the solution u (u = 0 gives mu = 1 and R2 = 0).
    pub fn new(pd: &ProblemData, lambda: f64, u: &TorusFunction) -> Result<Self> {
        if u.max_abs_coeff() == 0.0 {
            return Ok(Self::unperturbed(pd.omega(lambda), lambda));
        }
        let red = reduce(pd, lambda, u, &ReductionOptions::for_nu(u.nu()))?;
        let remainder = if red.remainder.is_zero() { None } else { Some(red.remainder) };
        Ok(ShiftedOperator { lambda, omega: red.omega, mu: red.mu, remainder })
    }

    pub fn unperturbed(omega: Vec<f64>, lambda: f64) -> Self {
        ShiftedOperator { lambda, omega, mu: 1.0, remainder: None }
    }

    pub fn diag(&self, theta: f64, k: &MultiIndex) -> f64 {
        let x = k.omega_dot(&self.omega) + theta;
        -x * x + self.mu * k.j_sq()
    }

    pub fn r2(&self, sites: &[MultiIndex]) -> DecayMatrix {
        match &self.remainder {
            Some(r) => r.matrix(sites, sites),
            None => DecayMatrix::zeros(sites.to_vec(), sites.to_vec()),
        }
    }

    pub fn matrix(&self, theta: f64, sites: &[MultiIndex]) -> DecayMatrix {
        let mut m = self.r2(sites);
        for (i, k) in sites.iter().enumerate() {
            m.data[(i, i)] += C64::new(self.diag(theta, k), 0.0);
        }
        m
    }

    /// Sites within distance N of (0, j0), j != 0.
    pub fn window_sites(&self, j0: &[i32], n: usize) -> Vec<MultiIndex> {
        window(&MultiIndex::new(vec![0; self.omega.len()], j0.to_vec()), n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteStatus {
    Regular,
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrongStatus {
    StronglyRegular,
    WeaklySingular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoodStatus {
    StronglyGood,
    WeaklyBad,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteClassification {
    pub site: MultiIndex,
    pub status: SiteStatus,
}

/// Regular iff |D_k(lambda, theta)| >= 1.
pub fn classify_sites(op: &ShiftedOperator, theta: f64, region: &[MultiIndex]) -> Vec<SiteClassification> {
    region
        .iter()
        .map(|k| SiteClassification {
            site: k.clone(),
            status: if op.diag(theta, k).abs() >= 1.0 { SiteStatus::Regular } else { SiteStatus::Singular },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NGoodReport {
    pub good: bool,
    /// (s, |A^{-1}|_s, N^{tau + delta s}); empty when A is singular.
    pub norms: Vec<(f64, f64, f64)>,
}

pub fn diameter(set: &[MultiIndex]) -> i32 {
    let mut d = 0;
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            d = d.max(a.dist(b));
        }
    }
    d
}

/// N-good: A invertible and |A^{-1}|_s <= N^{tau + delta s} at every s of `s_list`.
pub fn is_n_good(a: &DecayMatrix, n: usize, tau: f64, delta: f64, s_list: &[f64]) -> Result<NGoodReport> {
    if diameter(&a.rows) > 4 * n as i32 {
        return Err(KqpError::DomainError(format!("index set diameter exceeds 4N = {}", 4 * n)));
    }
    let inv = match a.invert_dense() {
        Ok(m) => m,
        Err(KqpError::Singular(_)) => return Ok(NGoodReport { good: false, norms: vec![] }),
        Err(e) => return Err(e),
    };
    let norms: Vec<(f64, f64, f64)> =
        s_list.iter().map(|&s| (s, inv.decay_norm(s), (n as f64).powf(tau + delta * s))).collect();
    Ok(NGoodReport { good: norms.iter().all(|(_, v, b)| v <= b), norms })
}

/// N-goodness parameters: tau, delta and the sampled Sobolev indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodnessParams {
    pub tau: f64,
    pub delta: f64,
    pub s_list: Vec<f64>,
}

impl GoodnessParams {
    /// s sampled at s0, (s0 + s2)/2 and s2 with s2 = s1 - sigma.
    pub fn from_exponents(es: &crate::nash_moser::ExponentSet) -> Self {
        let s2 = (es.s1 - es.sigma).max(es.s0);
        GoodnessParams { tau: es.tau, delta: es.delta, s_list: vec![es.s0, 0.5 * (es.s0 + s2), s2] }
    }
}

/// (A, N)-regularity of site k tested on the canonical window F = {dist(k, .) <= N} within E.
pub fn is_an_regular(op: &ShiftedOperator, theta: f64, ambient: &[MultiIndex], k: &MultiIndex, n: usize, gp: &GoodnessParams) -> Result<bool> {
    let f: Vec<MultiIndex> = ambient.iter().filter(|q| q.dist(k) <= n as i32).cloned().collect();
    let a = op.matrix(theta, &f);
    Ok(is_n_good(&a, n, gp.tau, gp.delta, &gp.s_list)?.good)
}

/// Sites of the ambient set that are (A, N)-bad: singular for D and not (A, N)-regular.
pub fn bad_sites(op: &ShiftedOperator, theta: f64, ambient: &[MultiIndex], n: usize, gp: &GoodnessParams) -> Result<Vec<MultiIndex>> {
    let singular: Vec<&MultiIndex> = ambient.iter().filter(|k| op.diag(theta, k).abs() < 1.0).collect();
    let verdicts: Vec<Result<bool>> = singular.par_iter().map(|k| is_an_regular(op, theta, ambient, k, n, gp)).collect();
    let mut out = Vec::new();
    for (k, v) in singular.into_iter().zip(verdicts) {
        if !v? {
            out.push(k.clone());
        }
    }
    Ok(out)
}

/// Site statuses relative to L = L_{N, k}: strongly regular iff the block centred at k is N-good.
pub fn strong_status(op: &ShiftedOperator, theta: f64, k: &MultiIndex, n: usize, gp: &GoodnessParams) -> Result<StrongStatus> {
    let f = window(k, n);
    let a = op.matrix(theta, &f);
    // diameter of a full window is 2N <= 4N
    Ok(if is_n_good(&a, n, gp.tau, gp.delta, &gp.s_list)?.good {
        StrongStatus::StronglyRegular
    } else {
        StrongStatus::WeaklySingular
    })
}

/// Strongly good iff regular for D or every site within distance N is strongly regular.
pub fn good_status(op: &ShiftedOperator, theta: f64, k: &MultiIndex, n: usize, gp: &GoodnessParams) -> Result<GoodStatus> {
    if op.diag(theta, k).abs() >= 1.0 {
        return Ok(GoodStatus::StronglyGood);
    }
    for q in window(k, n) {
        if strong_status(op, theta, &q, n, gp)? == StrongStatus::WeaklySingular {
            return Ok(GoodStatus::WeaklyBad);
        }
    }
    Ok(GoodStatus::StronglyGood)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaScanMode {
    /// Decide by the diagonal plus a Weyl bracket and eigen-solve only undecided points.
    Pruned,
    /// Eigen-solve at every grid point.
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadThetaSet {
    pub intervals: Vec<(f64, f64)>,
    #[serde(skip)]
    pub marked: Vec<bool>,
    pub bad_points: usize,
    pub eigen_solves: usize,
    pub step: f64,
}

/// Uniform grid with spacing `step` covering [lo, hi].
pub fn theta_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Threshold on the smallest singular value: ||L^{-1}||_0 > N^{tau1}/2 iff sigma_min < 2 N^{-tau1}.
pub fn bad_threshold(n: usize, tau1: f64) -> f64 {
    2.0 * (n as f64).powf(-tau1)
}

/// Marks theta where ||L_{N,j0}(theta)^{-1}||_0 > N^{tau1}/2 and merges consecutive marked points.
pub fn bad_theta_set(op: &ShiftedOperator, j0: &[i32], n: usize, grid: &[f64], tau1: f64, mode: ThetaScanMode) -> BadThetaSet {
    let sites = op.window_sites(j0, n);
    let thr = bad_threshold(n, tau1);
    let step = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };
    if sites.is_empty() {
        return BadThetaSet { intervals: vec![], marked: vec![false; grid.len()], bad_points: 0, eigen_solves: 0, step };
    }
    let r2 = op.r2(&sites);
    let rnorm = if op.remainder.is_some() { r2.spectral_norm() } else { 0.0 };
    let decided: Vec<Option<bool>> = grid
        .iter()
        .map(|&t| {
            if mode == ThetaScanMode::Dense {
                return None;
            }
            let m = sites.iter().map(|k| op.diag(t, k).abs()).fold(f64::INFINITY, f64::min);
            if m - rnorm >= thr {
                Some(false)
            } else if m + rnorm < thr {
                Some(true)
            } else if rnorm == 0.0 {
                Some(m < thr)
            } else {
                None
            }
        })
        .collect();
    let open: Vec<usize> = (0..grid.len()).filter(|&i| decided[i].is_none()).collect();
    let solved: Vec<bool> = open
        .par_iter()
        .map(|&i| {
            let mut m = r2.clone();
            for (p, k) in sites.iter().enumerate() {
                m.data[(p, p)] += C64::new(op.diag(grid[i], k), 0.0);
            }
            m.min_singular_value() < thr
        })
        .collect();
    let mut bad: Vec<bool> = decided.iter().map(|d| d.unwrap_or(false)).collect();
    for (&i, &b) in open.iter().zip(&solved) {
        bad[i] = b;
    }
    BadThetaSet {
        intervals: merge_marked(grid, &bad),
        bad_points: bad.iter().filter(|b| **b).count(),
        marked: bad,
        eigen_solves: open.len(),
        step,
    }
}

/// Runs of consecutive marked grid points as [first, last] intervals.
pub fn merge_marked(grid: &[f64], marked: &[bool]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=grid.len() {
        let m = i < grid.len() && marked[i];
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((grid[s], grid[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Closed form of {theta : |D_{l,j}(lambda, theta)| < t}: theta = -omega.l +- sqrt(mu |j|^2 +- t).
pub fn diniz_intervals(omega_dot_l: f64, mu: f64, j_sq: f64, t: f64) -> Vec<(f64, f64)> {
    let hi = (mu * j_sq + t).sqrt();
    let lo2 = mu * j_sq - t;
    if lo2 <= 0.0 {
        return vec![(-omega_dot_l - hi, -omega_dot_l + hi)];
    }
    let lo = lo2.sqrt();
    vec![(-omega_dot_l - hi, -omega_dot_l - lo), (-omega_dot_l + lo, -omega_dot_l + hi)]
}

/// Longest simple path (number of edges) in a Gamma-chain graph component; exact by
/// subset dynamic programming up to 20 sites, otherwise the bound size - 1.
fn longest_path(sites: &[&MultiIndex], gamma: i32) -> (usize, bool) {
    let n = sites.len();
    if n <= 1 {
        return (0, true);
    }
    if n > 20 {
        return (n - 1, false);
    }
    let adj: Vec<u32> = (0..n)
        .map(|a| (0..n).filter(|&b| b != a && sites[a].dist(sites[b]) <= gamma).fold(0u32, |m, b| m | (1 << b)))
        .collect();
    // reach[mask] = set of end vertices of a path visiting exactly `mask`
    let mut reach = vec![0u32; 1 << n];
    for v in 0..n {
        reach[1 << v] |= 1 << v;
    }
    let mut best = 0;
    for mask in 1usize..(1 << n) {
        let ends = reach[mask];
        if ends == 0 {
            continue;
        }
        best = best.max(mask.count_ones() as usize - 1);
        let mut e = ends;
        while e != 0 {
            let v = e.trailing_zeros() as usize;
            e &= e - 1;
            let mut nb = adj[v] & !(mask as u32);
            while nb != 0 {
                let w = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                reach[mask | (1 << w)] |= 1 << w;
            }
        }
    }
    (best, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chain {
    pub sites: usize,
    pub length: usize,
    pub exact: bool,
}

/// One entry per connected component of the graph dist <= Gamma, with its longest chain length.
pub fn gamma_chains(sites: &[MultiIndex], gamma: i32) -> Result<Vec<Chain>> {
    if gamma < 2 {
        return Err(KqpError::DomainError("Gamma must be at least 2".into()));
    }
    Ok(components(sites, |a, b| a.dist(b) <= gamma)
        .into_iter()
        .map(|comp| {
            let refs: Vec<&MultiIndex> = comp.iter().map(|&i| &sites[i]).collect();
            let (length, exact) = longest_path(&refs, gamma);
            Chain { sites: comp.len(), length, exact }
        })
        .collect())
}

fn components(sites: &[MultiIndex], linked: impl Fn(&MultiIndex, &MultiIndex) -> bool) -> Vec<Vec<usize>> {
    let n = sites.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let a = comp[i];
            for b in 0..n {
                if !seen[b] && linked(&sites[a], &sites[b]) {
                    seen[b] = true;
                    comp.push(b);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Largest number of sites sharing the same j.
pub fn section_cap(sites: &[MultiIndex]) -> usize {
    let mut count: BTreeMap<&[i32], usize> = BTreeMap::new();
    for k in sites {
        *count.entry(&k.j).or_insert(0) += 1;
    }
    count.values().copied().max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub diam: i32,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub ok: bool,
    pub clusters: Vec<Cluster>,
    pub offending: Vec<usize>,
}

/// Clusters by transitive closure of dist < N^2, then checks diam <= N^{C1} and mutual distance >= N^2.
pub fn check_separation(bad: &[MultiIndex], n: usize, c1: f64) -> SeparationReport {
    let n2 = (n * n) as i32;
    let comps = components(bad, |a, b| a.dist(b) < n2);
    let limit = (n as f64).powf(c1);
    let mut clusters = Vec::new();
    let mut offending = Vec::new();
    for (ci, comp) in comps.iter().enumerate() {
        let members: Vec<MultiIndex> = comp.iter().map(|&i| bad[i].clone()).collect();
        let diam = diameter(&members);
        if diam as f64 > limit {
            offending.push(ci);
        }
        clusters.push(Cluster { diam, size: comp.len() });
    }
    for a in 0..comps.len() {
        for b in a + 1..comps.len() {
            let d = comps[a].iter().flat_map(|&i| comps[b].iter().map(move |&j| (i, j))).map(|(i, j)| bad[i].dist(&bad[j])).min().unwrap_or(i32::MAX);
            if d < n2 {
                offending.push(a);
            }
        }
    }
    SeparationReport { ok: offending.is_empty(), clusters, offending }
}

/// (max_p |mu_p(A) - mu_p(A')|, ||A - A'||_0) for Hermitian A, A' of equal size.
pub fn weyl_check(a: &DecayMatrix, b: &DecayMatrix) -> Result<(f64, f64)> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() || a.nrows() != a.ncols() {
        return Err(KqpError::DomainError("Weyl check needs square matrices of equal size".into()));
    }
    let ea = a.hermitian_eigenvalues();
    let eb = b.hermitian_eigenvalues();
    let gap = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let diff = DecayMatrix { rows: a.rows.clone(), cols: a.cols.clone(), data: &a.data - &b.data };
    Ok((gap, diff.spectral_norm()))
}

/// Interval-count exponent 2d + nu + 4.
pub fn frak_e(nu: usize, d: usize) -> u32 {
    (2 * d + nu + 4) as u32
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub lambda: f64,
    pub theta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub j0: Vec<i32>,
    pub ambient_sites: usize,
    pub n_singular: usize,
    pub section_cap: usize,
    pub max_chain_len: usize,
    pub chain_bound: f64,
    pub n_bad: usize,
    pub clusters: Vec<Cluster>,
    pub separation_ok: bool,
    pub regularity_test: String,
    pub bad_theta_intervals: Vec<(f64, f64)>,
    pub interval_count: usize,
    pub frak_e: u32,
    pub interval_count_ok: bool,
    pub max_interval_length: f64,
    pub interval_length_ok: bool,
}

#[derive(Clone, Debug)]
pub struct DiagnoseOptions {
    pub j0: Vec<i32>,
    pub ambient_radius: usize,
    pub gamma: i32,
    pub c1: f64,
    pub tau1: f64,
    pub goodness: GoodnessParams,
    /// theta range for the bad-theta scan; `None` skips the scan.
    pub theta_range: Option<(f64, f64)>,
}

/// Singular sites, chains, (A, N)-bad clusters and the bad-theta set for one (lambda, theta, N).
pub fn diagnose(op: &ShiftedOperator, theta: f64, n: usize, opts: &DiagnoseOptions) -> Result<DiagnosticReport> {
    let d = opts.j0.len();
    let nu = op.omega.len();
    let ambient = if n == 0 { vec![] } else { op.window_sites(&opts.j0, opts.ambient_radius) };
    let singular: Vec<MultiIndex> = classify_sites(op, theta, &ambient)
        .into_iter()
        .filter(|c| c.status == SiteStatus::Singular)
        .map(|c| c.site)
        .collect();
    let chains = gamma_chains(&singular, opts.gamma)?;
    let k = section_cap(&singular);
    let bad = if n == 0 { vec![] } else { bad_sites(op, theta, &ambient, n, &opts.goodness)? };
    let sep = check_separation(&bad, n.max(1), opts.c1);
    let bts = match (opts.theta_range, n) {
        (Some((lo, hi)), n) if n > 0 => {
            let step = (n as f64).powf(-opts.tau1) / 4.0;
            bad_theta_set(op, &opts.j0, n, &theta_grid(lo, hi, step), opts.tau1, ThetaScanMode::Pruned).intervals
        }
        _ => vec![],
    };
    let e = frak_e(nu, d);
    let max_len = bts.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    let len_bound = if n > 0 { (n as f64).powf(-opts.tau1) } else { 0.0 };
    Ok(DiagnosticReport {
        lambda: op.lambda,
        theta,
        n,
        j0: opts.j0.clone(),
        ambient_sites: ambient.len(),
        n_singular: singular.len(),
        section_cap: k,
        max_chain_len: chains.iter().map(|c| c.length).max().unwrap_or(0),
        chain_bound: ((opts.gamma as usize * k) as f64).powi(4),
        n_bad: bad.len(),
        clusters: sep.clusters,
        separation_ok: sep.ok,
        regularity_test: "canonical window".into(),
        interval_count: bts.len(),
        frak_e: e,
        interval_count_ok: (bts.len() as f64) <= (n.max(1) as f64).powi(e as i32),
        max_interval_length: max_len,
        interval_length_ok: max_len <= len_bound,
        bad_theta_intervals: bts,
    })
}
