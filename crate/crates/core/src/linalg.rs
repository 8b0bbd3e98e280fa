//! Small dense/sparse linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eig(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let se = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let se = a.clone().symmetric_eigen();
    se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Scaled vectorization of a symmetric matrix: off-diagonals carry √2 so the
/// Euclidean inner product of svecs equals the trace inner product.
pub fn svec(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let s = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in 0..=i {
            out.push(if i == j { a[(i, j)] } else { s * a[(i, j)] });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = 0;
    for i in 0..n {
        for j in 0..=i {
            let x = v[idx];
            idx += 1;
            if i == j {
                a[(i, i)] = x;
            } else {
                a[(i, j)] = s * x;
                a[(j, i)] = s * x;
            }
        }
    }
    a
}

/// Length of the svec of an `n`-by-`n` symmetric matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Projects a symmetric matrix onto the positive semidefinite cone.
/// Returns the projection and the smallest eigenvalue of the input.
pub fn psd_project(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = a.nrows();
    if n == 0 {
        return (a.clone(), 0.0);
    }
    let se = a.clone().symmetric_eigen();
    let min = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return (a.clone(), min);
    }
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = se.eigenvalues[k];
        if lam > 0.0 {
            let v = se.eigenvectors.column(k);
            // out += lam v vᵀ
            for j in 0..n {
                let w = lam * v[j];
                for i in 0..n {
                    out[(i, j)] += w * v[i];
                }
            }
        }
    }
    (out, min)
}

/// Compressed sparse row matrix with explicit transpose access.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn from_rows(nrows: usize, ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for &(c, v) in r {
                debug_assert!(c < ncols);
                col_idx.push(c as u32);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr { nrows, ncols, row_ptr, col_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// y += Aᵀ x
    pub fn mul_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k] as usize] += self.vals[k] * xr;
            }
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| (self.col_idx[k] as usize, self.vals[k]))
    }
}

/// Diagonally preconditioned conjugate gradient for s.p.d. systems given as a
/// matrix-free operator. Returns the iteration count, or `None` on breakdown.
pub fn pcg<F>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Option<usize>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Some(it);
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            return None;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rnorm <= tol * bnorm {
        Some(max_iter)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_roundtrip_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 4.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 0.3, 2.0, 0.3, 0.0]);
        let sa = svec(&a);
        let sb = svec(&b);
        let dot: f64 = sa.iter().zip(&sb).map(|(x, y)| x * y).sum();
        let tr = (a.clone() * b.clone()).trace();
        assert!((dot - tr).abs() < 1e-12);
        let back = smat(&sa, 3);
        assert!((&back - &a).abs().max() < 1e-14);
    }

    #[test]
    fn psd_projection_clips_negative_modes() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let (p, min) = psd_project(&a);
        assert!((min + 2.0).abs() < 1e-12);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(p[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn pcg_solves_small_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 5.0]);
        let b = vec![1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let diag = vec![4.0, 3.0, 5.0];
        let it = pcg(
            |v, out| {
                for i in 0..3 {
                    out[i] = (0..3).map(|j| a[(i, j)] * v[j]).sum();
                }
            },
            &diag,
            &b,
            &mut x,
            1e-12,
            100,
        );
        assert!(it.is_some());
        let bx = &a * DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((bx[i] - b[i]).abs() < 1e-9);
        }
    }
}
