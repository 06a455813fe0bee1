//! Overdetermined least squares: dense Householder QR for small systems and
//! LSQR for large sparse ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsqMethod {
    DenseQr,
    Lsqr,
}

#[derive(Clone, Debug)]
pub struct LsqSolution {
    pub x: Vec<f64>,
    pub method: LsqMethod,
    pub iterations: usize,
}

/// Minimizes `|a x - b|` with dense QR. Fails if `a` is column-rank deficient.
pub fn dense_qr(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let m: DMatrix<f64> = a.to_dense();
    if m.nrows() < m.ncols() {
        return Err(Error::InvalidInput(format!(
            "least-squares system is underdetermined ({} rows, {} columns)",
            m.nrows(),
            m.ncols()
        )));
    }
    let qr = m.qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if let Some(k) = r.diagonal().iter().position(|d| d.abs() <= 1e-14 * rmax) {
        return Err(Error::SingularSystem(format!("least-squares column {k} is dependent")));
    }
    let qtb = qr.q().transpose() * DVector::from_column_slice(b);
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::SingularSystem("triangular solve failed".into()))?;
    Ok(x.as_slice().to_vec())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scale(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

/// LSQR iteration; stops when the normal-equation residual relative to
/// `|A| |r|` drops below `tol` or the residual itself falls below
/// `tol |b|`.
pub fn lsqr(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n_cols;
    let mut x = vec![0.0; n];
    let mut u = b.to_vec();
    let mut beta = norm(&u);
    if beta == 0.0 {
        return Ok((x, 0));
    }
    scale(&mut u, 1.0 / beta);
    let mut v = a.mul_transpose_vec(&u);
    let mut alpha = norm(&v);
    if alpha == 0.0 {
        return Ok((x, 0));
    }
    scale(&mut v, 1.0 / alpha);
    let mut w = v.clone();
    let (mut phibar, mut rhobar) = (beta, alpha);
    let bnorm = beta;
    let mut anorm2 = 0.0;
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let mut au = a.mul_vec(&v);
        for k in 0..au.len() {
            au[k] -= alpha * u[k];
        }
        u = au;
        beta = norm(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
        }
        anorm2 += alpha * alpha + beta * beta;
        let mut atv = a.mul_transpose_vec(&u);
        for k in 0..n {
            atv[k] -= beta * v[k];
        }
        alpha = norm(&atv);
        if alpha > 0.0 {
            scale(&mut atv, 1.0 / alpha);
        }
        let rho = rhobar.hypot(beta);
        let (c, s) = (rhobar / rho, beta / rho);
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;
        for k in 0..n {
            x[k] += (phi / rho) * w[k];
            w[k] = atv[k] - (theta / rho) * w[k];
        }
        v = atv;
        // |r| = phibar, |A^T r| = phibar * alpha * |c|
        let rnorm = phibar;
        let arnorm = phibar * alpha * c.abs();
        let rel = arnorm / (anorm2.sqrt() * rnorm).max(f64::MIN_POSITIVE);
        history.push(rel);
        if rnorm <= tol * bnorm || rel <= tol || alpha == 0.0 {
            return Ok((x, it));
        }
    }
    let tail = history.split_off(history.len().saturating_sub(5));
    Err(Error::LsqNotConverged { history: tail })
}

/// QR below `dense_limit` unknowns, LSQR above.
pub fn solve_least_squares(a: &CsrMatrix, b: &[f64], tol: f64, dense_limit: usize) -> Result<LsqSolution> {
    if a.n_cols < dense_limit {
        Ok(LsqSolution {
            x: dense_qr(a, b)?,
            method: LsqMethod::DenseQr,
            iterations: 0,
        })
    } else {
        let (x, iterations) = lsqr(a, b, tol, 10 * a.n_cols)?;
        Ok(LsqSolution {
            x,
            method: LsqMethod::Lsqr,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    fn line_fit() -> (CsrMatrix, Vec<f64>) {
        // fit y = c0 + c1 t to four points
        let ts = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 2.9, 5.1, 7.0];
        let mut t = Triplets::new(4, 2);
        for (r, &tt) in ts.iter().enumerate() {
            t.push(r, 0, 1.0);
            t.push(r, 1, tt);
        }
        (t.to_csr(), ys.to_vec())
    }

    #[test]
    fn qr_line_fit() {
        let (a, b) = line_fit();
        let x = dense_qr(&a, &b).unwrap();
        assert!((x[0] - 0.97).abs() < 1e-12);
        assert!((x[1] - 2.02).abs() < 1e-12);
    }

    #[test]
    fn lsqr_agrees_with_qr() {
        let (a, b) = line_fit();
        let (x, _) = lsqr(&a, &b, 1e-14, 100).unwrap();
        assert!((x[0] - 0.97).abs() < 1e-10);
        assert!((x[1] - 2.02).abs() < 1e-10);
    }

    #[test]
    fn dependent_columns_fail() {
        let mut t = Triplets::new(3, 2);
        for r in 0..3 {
            t.push(r, 0, 1.0);
            t.push(r, 1, 2.0);
        }
        assert!(dense_qr(&t.to_csr(), &[1.0, 2.0, 3.0]).is_err());
    }
}
