//! Minimal compressed-row sparse matrix and the linear solvers used by the
//! Newton iteration: dense LU for small systems, ILU(0)-preconditioned
//! BiCGSTAB above that.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Systems up to this many unknowns are factored densely.
pub const DENSE_LIMIT: usize = 1500;

#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub n_rows: usize,
    pub n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Triplets {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::with_capacity(e.len());
        let mut values: Vec<f64> = Vec::with_capacity(e.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in e {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..self.n_rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr,
            indices,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Solves the square system `a x = b`.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows != a.n_cols || b.len() != a.n_rows {
        return Err(Error::InvalidInput("solve needs a square system and matching right-hand side".into()));
    }
    if a.n_rows <= DENSE_LIMIT {
        solve_dense(a, b)
    } else {
        bicgstab_ilu0(a, b, 1e-12, 20 * a.n_rows.max(100))
    }
}

pub fn solve_dense(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.to_dense().lu();
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::SingularSystem(format!("LU factorization failed for a {} x {} system", a.n_rows, a.n_cols)))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite entries in the solution".into()));
    }
    Ok(x.as_slice().to_vec())
}

struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n_rows;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.indptr[r]..lu.indptr[r + 1] {
                if lu.indices[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::SingularSystem(format!("zero diagonal at row {r}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.indptr[i], lu.indptr[i + 1]);
            for k in start..end {
                pos[lu.indices[k]] = k;
            }
            for k in start..end {
                let j = lu.indices[k];
                if j >= i {
                    break;
                }
                let pivot = lu.values[diag[j]];
                if pivot == 0.0 {
                    return Err(Error::SingularSystem(format!("zero pivot at row {j}")));
                }
                let f = lu.values[k] / pivot;
                lu.values[k] = f;
                for kk in diag[j] + 1..lu.indptr[j + 1] {
                    let c = lu.indices[kk];
                    if pos[c] != usize::MAX && pos[c] >= start && pos[c] < end {
                        lu.values[pos[c]] -= f * lu.values[kk];
                    }
                }
            }
            for k in start..end {
                pos[lu.indices[k]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot at row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let m = &self.lu;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in m.indptr[i]..self.diag[i] {
                y[i] -= m.values[k] * y[m.indices[k]];
            }
        }
        for i in (0..n).rev() {
            for k in self.diag[i] + 1..m.indptr[i + 1] {
                y[i] -= m.values[k] * y[m.indices[k]];
            }
            y[i] /= m.values[self.diag[i]];
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB with an ILU(0) factorization.
pub fn bicgstab_ilu0(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let pre = Ilu0::new(a)?;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        let phat = pre.apply(&p);
        v = a.mul_vec(&phat);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) <= tol * bnorm {
            for k in 0..n {
                x[k] += alpha * phat[k];
            }
            return Ok(x);
        }
        let shat = pre.apply(&s);
        let t = a.mul_vec(&shat);
        omega = dot(&t, &s) / dot(&t, &t);
        for k in 0..n {
            x[k] += alpha * phat[k] + omega * shat[k];
            r[k] = s[k] - omega * t[k];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        if !omega.is_finite() || omega == 0.0 {
            break;
        }
    }
    Err(Error::SingularSystem(format!(
        "BiCGSTAB stalled at relative residual {:.3e}",
        norm(&r) / bnorm
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_1d(n: usize) -> CsrMatrix {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.5);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.push(i, i + 1, -1.2);
            }
        }
        t.to_csr()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 0, -1.0);
        let m = t.to_csr();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 1.0]), vec![-1.0, 3.0]);
    }

    #[test]
    fn iterative_matches_dense() {
        let a = poisson_1d(300);
        let b: Vec<f64> = (0..300).map(|i| (i as f64 * 0.1).sin()).collect();
        let xd = solve_dense(&a, &b).unwrap();
        let xi = bicgstab_ilu0(&a, &b, 1e-13, 2000).unwrap();
        for (p, q) in xd.iter().zip(&xi) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_dense_is_reported() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(1, 0, 1.0);
        assert!(matches!(solve(&t.to_csr(), &[1.0, 2.0]), Err(Error::SingularSystem(_))));
    }
}
