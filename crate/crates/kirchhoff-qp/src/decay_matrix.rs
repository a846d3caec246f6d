//! Matrices indexed by (l, j) multi-indices with the s-decay norm.

use crate::error::{KqpError, Result};
use crate::fourier::{MultiIndex, TorusFunction, C64};
use nalgebra::DMatrix;
use std::collections::HashMap;

pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct DecayMatrix {
    pub rows: Vec<MultiIndex>,
    pub cols: Vec<MultiIndex>,
    pub data: DMatrix<C64>,
}

/// Default constant for the interpolation and Sobolev bounds, C(s) = 4^{s - s0}.
pub fn default_constant(s: f64, s0: f64) -> f64 {
    4f64.powf(s - s0)
}

fn position_map(set: &[MultiIndex]) -> HashMap<&MultiIndex, usize> {
    set.iter().enumerate().map(|(i, k)| (k, i)).collect()
}

impl DecayMatrix {
    pub fn zeros(rows: Vec<MultiIndex>, cols: Vec<MultiIndex>) -> Self {
        let data = DMatrix::from_element(rows.len(), cols.len(), C64::new(0.0, 0.0));
        DecayMatrix { rows, cols, data }
    }

    pub fn from_fn<F: Fn(&MultiIndex, &MultiIndex) -> C64>(rows: Vec<MultiIndex>, cols: Vec<MultiIndex>, f: F) -> Self {
        let data = DMatrix::from_fn(rows.len(), cols.len(), |r, c| f(&rows[r], &cols[c]));
        DecayMatrix { rows, cols, data }
    }

    pub fn identity(set: Vec<MultiIndex>) -> Self {
        let n = set.len();
        DecayMatrix { rows: set.clone(), cols: set, data: DMatrix::identity(n, n) }
    }

    pub fn diagonal<F: Fn(&MultiIndex) -> f64>(set: Vec<MultiIndex>, f: F) -> Self {
        let n = set.len();
        let mut data = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for (i, k) in set.iter().enumerate() {
            data[(i, i)] = C64::new(f(k), 0.0);
        }
        DecayMatrix { rows: set.clone(), cols: set, data }
    }

    /// Multiplication by `a`: entry (k, k') = a_{k - k'}.
    pub fn multiplication(a: &TorusFunction, rows: Vec<MultiIndex>, cols: Vec<MultiIndex>) -> Self {
        Self::from_fn(rows, cols, |r, c| {
            let k = r.sub(c);
            if a.d() == 0 {
                if k.j_is_zero() {
                    a.get(&k.ell, &[])
                } else {
                    C64::new(0.0, 0.0)
                }
            } else {
                a.get_index(&k)
            }
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn is_square_on_same_set(&self) -> bool {
        self.rows == self.cols
    }

    /// Sup-majorant [M(k)] over all entry pairs with row - col = k.
    pub fn majorant(&self) -> HashMap<MultiIndex, f64> {
        let mut out: HashMap<MultiIndex, f64> = HashMap::new();
        for (r, ri) in self.rows.iter().enumerate() {
            for (c, ci) in self.cols.iter().enumerate() {
                let v = self.data[(r, c)].norm();
                if v == 0.0 {
                    continue;
                }
                let e = out.entry(ri.sub(ci)).or_insert(0.0);
                if v > *e {
                    *e = v;
                }
            }
        }
        out
    }

    /// |M|_s^2 = sum_k [M(k)]^2 <k>^{2s}.
    pub fn decay_norm(&self, s: f64) -> f64 {
        if self.rows.is_empty() || self.cols.is_empty() {
            return 0.0;
        }
        let dim = self.rows[0].ell.len() + self.rows[0].j.len();
        let rc: Vec<Vec<i32>> = self.rows.iter().map(|k| k.coords()).collect();
        let cc: Vec<Vec<i32>> = self.cols.iter().map(|k| k.coords()).collect();
        let mut radius = vec![0i32; dim];
        for a in 0..dim {
            let mr = rc.iter().map(|v| v[a].abs()).max().unwrap_or(0);
            let mc = cc.iter().map(|v| v[a].abs()).max().unwrap_or(0);
            radius[a] = mr + mc;
        }
        let len: usize = radius.iter().map(|&r| (2 * r + 1) as usize).product();
        let mut sup = vec![0.0f64; len];
        let mut col_off = vec![0i64; cc.len()];
        let mut strides = vec![0i64; dim];
        let mut st = 1i64;
        for a in (0..dim).rev() {
            strides[a] = st;
            st *= (2 * radius[a] + 1) as i64;
        }
        let center: i64 = (0..dim).map(|a| radius[a] as i64 * strides[a]).sum();
        for (c, v) in cc.iter().enumerate() {
            col_off[c] = (0..dim).map(|a| v[a] as i64 * strides[a]).sum();
        }
        for (r, v) in rc.iter().enumerate() {
            let ro: i64 = (0..dim).map(|a| v[a] as i64 * strides[a]).sum::<i64>() + center;
            for (c, co) in col_off.iter().enumerate() {
                let x = self.data[(r, c)].norm();
                let slot = &mut sup[(ro - co) as usize];
                if x > *slot {
                    *slot = x;
                }
            }
        }
        let mut acc = 0.0;
        let mut k = vec![0i32; dim];
        for (off, &m) in sup.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let mut o = off;
            for a in (0..dim).rev() {
                let n = (2 * radius[a] + 1) as usize;
                k[a] = (o % n) as i32 - radius[a];
                o /= n;
            }
            let w = k.iter().map(|c| c.abs()).max().unwrap_or(0).max(1) as f64;
            acc += m * m * w.powf(2.0 * s);
        }
        acc.sqrt()
    }

    pub fn mul(&self, other: &DecayMatrix) -> DecayMatrix {
        assert_eq!(self.cols, other.rows, "index sets do not compose");
        DecayMatrix { rows: self.rows.clone(), cols: other.cols.clone(), data: &self.data * &other.data }
    }

    pub fn add(&self, other: &DecayMatrix) -> DecayMatrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        DecayMatrix { rows: self.rows.clone(), cols: self.cols.clone(), data: &self.data + &other.data }
    }

    pub fn sub(&self, other: &DecayMatrix) -> DecayMatrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        DecayMatrix { rows: self.rows.clone(), cols: self.cols.clone(), data: &self.data - &other.data }
    }

    pub fn scale(&self, s: f64) -> DecayMatrix {
        DecayMatrix { rows: self.rows.clone(), cols: self.cols.clone(), data: self.data.map(|v| v * s) }
    }

    pub fn pow(&self, n: u32) -> DecayMatrix {
        assert!(self.is_square_on_same_set());
        let mut out = DecayMatrix::identity(self.rows.clone());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn adjoint(&self) -> DecayMatrix {
        DecayMatrix { rows: self.cols.clone(), cols: self.rows.clone(), data: self.data.adjoint() }
    }

    /// ||M - M^*||_F / ||M||_F (0 for the zero matrix).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.data.norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.data - self.data.adjoint()).norm() / n
    }

    /// Matrix-vector product; `h` must vanish outside the column set.
    pub fn apply(&self, h: &TorusFunction) -> Result<TorusFunction> {
        let cols = position_map(&self.cols);
        for (k, v) in h.nonzeros() {
            let idx = MultiIndex::from_coords(&k[..h.nu() + h.d()], h.nu());
            if !cols.contains_key(&idx) && v.norm() > 0.0 {
                return Err(KqpError::DomainError(format!("mode {:?} outside column set", idx)));
            }
        }
        let x = nalgebra::DVector::from_iterator(self.cols.len(), self.cols.iter().map(|k| h.get_index(k)));
        let y = &self.data * x;
        let mut out = TorusFunction::zeros_box(h.mode_box());
        for (i, k) in self.rows.iter().enumerate() {
            let c: Vec<i32> = k.coords();
            match out.mode_box().offset(&c) {
                Some(o) => out.coeffs_mut()[o] += y[i],
                None => {
                    if y[i].norm() > 0.0 {
                        return Err(KqpError::DomainError(format!("row {:?} outside target box", k)));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Restriction to indices within max-distance N of `center`.
    pub fn submatrix(&self, center: &MultiIndex, n: i64) -> DecayMatrix {
        let keep_r: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i].dist(center) as i64 <= n).collect();
        let keep_c: Vec<usize> = (0..self.cols.len()).filter(|&i| self.cols[i].dist(center) as i64 <= n).collect();
        self.select(&keep_r, &keep_c)
    }

    pub fn select(&self, keep_r: &[usize], keep_c: &[usize]) -> DecayMatrix {
        let data = DMatrix::from_fn(keep_r.len(), keep_c.len(), |r, c| self.data[(keep_r[r], keep_c[c])]);
        DecayMatrix {
            rows: keep_r.iter().map(|&i| self.rows[i].clone()).collect(),
            cols: keep_c.iter().map(|&i| self.cols[i].clone()).collect(),
            data,
        }
    }

    /// Restriction to a given subset (rows and columns) of a square matrix.
    pub fn restrict(&self, set: &[MultiIndex]) -> DecayMatrix {
        let rmap = position_map(&self.rows);
        let cmap = position_map(&self.cols);
        let kr: Vec<usize> = set.iter().filter_map(|k| rmap.get(k).copied()).collect();
        let kc: Vec<usize> = set.iter().filter_map(|k| cmap.get(k).copied()).collect();
        self.select(&kr, &kc)
    }

    fn norm1(m: &DMatrix<C64>) -> f64 {
        (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Dense inverse; Singular when the 1-norm condition number exceeds 1e12.
    pub fn invert_dense(&self) -> Result<DecayMatrix> {
        if self.rows.len() != self.cols.len() {
            return Err(KqpError::DomainError("inverse of a non-square matrix".into()));
        }
        if self.rows.is_empty() {
            return Ok(DecayMatrix::zeros(vec![], vec![]));
        }
        let inv = self.data.clone().try_inverse().ok_or(KqpError::Singular(f64::INFINITY))?;
        let cond = Self::norm1(&self.data) * Self::norm1(&inv);
        if !cond.is_finite() || cond > SINGULAR_CONDITION {
            return Err(KqpError::Singular(cond));
        }
        Ok(DecayMatrix { rows: self.cols.clone(), cols: self.rows.clone(), data: inv })
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        if self.rows.is_empty() {
            return vec![];
        }
        let h = (&self.data + self.data.adjoint()).map(|v| v * 0.5);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Operator 2-norm.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows.is_empty() || self.cols.is_empty() {
            return 0.0;
        }
        if self.hermitian_defect() < 1e-12 {
            return self.hermitian_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max);
        }
        self.data.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Smallest singular value (|eigenvalue| for Hermitian matrices).
    pub fn min_singular_value(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::INFINITY;
        }
        if self.hermitian_defect() < 1e-12 {
            return self.hermitian_eigenvalues().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        }
        self.data.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let (nu, d) = self.rows.first().map(|k| (k.ell.len(), k.j.len())).unwrap_or((0, 0));
        let mut head: Vec<String> = Vec::new();
        for side in ["row", "col"] {
            head.extend((0..nu).map(|i| format!("l_{side}_{i}")));
            head.extend((0..d).map(|i| format!("j_{side}_{i}")));
        }
        head.push("re".into());
        head.push("im".into());
        out.push_str(&head.join(","));
        out.push('\n');
        for (r, ri) in self.rows.iter().enumerate() {
            for (c, ci) in self.cols.iter().enumerate() {
                let v = self.data[(r, c)];
                if v.norm() == 0.0 {
                    continue;
                }
                let mut f: Vec<String> = ri.coords().iter().chain(ci.coords().iter()).map(|x| x.to_string()).collect();
                f.push(format!("{:e}", v.re));
                f.push(format!("{:e}", v.im));
                out.push_str(&f.join(","));
                out.push('\n');
            }
        }
        out
    }
}

/// lhs = |M1 M2|_s and rhs = |M1|_{s0}|M2|_s / 2 + C(s)|M1|_s|M2|_{s0} / 2.
pub fn interpolation_check(m1: &DecayMatrix, m2: &DecayMatrix, s: f64, s0: f64, c_s: f64) -> (f64, f64) {
    let lhs = m1.mul(m2).decay_norm(s);
    let rhs = 0.5 * m1.decay_norm(s0) * m2.decay_norm(s) + 0.5 * c_s * m1.decay_norm(s) * m2.decay_norm(s0);
    (lhs, rhs)
}

/// lhs = ||M h||_s and rhs = C(s)(|M|_{s0}||h||_s + |M|_s ||h||_{s0}).
pub fn sobolev_action_check(m: &DecayMatrix, h: &TorusFunction, s: f64, s0: f64, c_s: f64) -> Result<(f64, f64)> {
    let mh = m.apply(h)?;
    let rhs = c_s * (m.decay_norm(s0) * h.sobolev_norm(s) + m.decay_norm(s) * h.sobolev_norm(s0));
    Ok((mh.sobolev_norm(s), rhs))
}

/// lhs = |M^n|_s and rhs = C(s)^n |M|_s |M|_{s0}^{n-1}.
pub fn iterate_check(m: &DecayMatrix, n: u32, s: f64, s0: f64, c_s: f64) -> (f64, f64) {
    let lhs = m.pow(n).decay_norm(s);
    let rhs = c_s.powi(n as i32) * m.decay_norm(s) * m.decay_norm(s0).powi(n as i32 - 1);
    (lhs, rhs)
}

/// All (l, j) with |l_i| <= lphi, |j_i| <= lx and j != 0, in box order.
pub fn index_set(nu: usize, d: usize, lphi: usize, lx: usize) -> Vec<MultiIndex> {
    crate::fourier::ModeBox::new(nu, d, lphi, lx).indices().into_iter().filter(|k| !k.j_is_zero()).collect()
}

/// Sites of `index_set` within max-distance N of `center`.
pub fn window(center: &MultiIndex, n: usize) -> Vec<MultiIndex> {
    let (nu, d) = (center.ell.len(), center.j.len());
    let bx = crate::fourier::ModeBox::new(nu, d, n, n);
    bx.indices()
        .into_iter()
        .map(|k| k.add(center))
        .filter(|k| !k.j_is_zero())
        .collect()
}
