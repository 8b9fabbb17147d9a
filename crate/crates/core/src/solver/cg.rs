//! Sparse symmetric matrices and diagonally preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::par;

/// Symmetric matrix in CSR form (both triangles stored).
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|a| (a.0, a.1));
        let mut offsets = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self { n, offsets, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.offsets[i]..self.offsets[i + 1]).find(|&k| self.cols[k] == i).map_or(0.0, |k| self.vals[k]))
            .collect()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        par::map_range(self.n, |i| {
            let mut s = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            s
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = a.n();
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Unsupported(format!("matrix diagonal entry {i} is not positive")));
    }
    let bnorm = par::dot(b, b).sqrt();
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let ax = a.mul(x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    let mut res = par::dot(&r, &r).sqrt() / scale;
    if res <= tol {
        return Ok(CgStats { iterations: 0, residual: res });
    }
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / diag[i]).collect();
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.mul(&p);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged { residual: res, iterations: it });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        res = par::dot(&r, &r).sqrt() / scale;
        if res <= tol {
            return Ok(CgStats { iterations: it, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgNotConverged { residual: res, iterations: max_iter })
}
