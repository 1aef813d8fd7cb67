//! Small dense linear-algebra kernels: Jacobi SVD and eigensolver,
//! pseudoinverse, Cholesky solves, orthonormal samplers.
//!
//! Everything here targets matrices in the tens of rows/columns. The Jacobi
//! routines are slow asymptotically but robust and dependency-free, and they
//! double as independent oracles for the structured solvers elsewhere in the
//! crate.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{vec_dot, vec_norm, CMatrix, Matrix};

/// Economy SVD `A = U Σ Vᵀ` with singular values sorted descending.
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD. Handles any shape by transposing internally.
pub fn svd(a: &Matrix) -> Svd {
    if a.rows() < a.cols() {
        let s = svd(&a.transpose());
        return Svd {
            u: s.v,
            sigma: s.sigma,
            v: s.u,
        };
    }
    let m = a.rows();
    let n = a.cols();
    let mut b = a.clone();
    let mut v = Matrix::identity(n);
    let eps = 1e-14;

    for _sweep in 0..40 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let bp = b.col(p);
                let bq = b.col(q);
                let alpha = vec_dot(&bp, &bp);
                let beta = vec_dot(&bq, &bq);
                let gamma = vec_dot(&bp, &bq);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = b.get(i, p);
                    let y = b.get(i, q);
                    b.set(i, p, c * x - s * y);
                    b.set(i, q, s * x + c * y);
                }
                for i in 0..n {
                    let x = v.get(i, p);
                    let y = v.get(i, q);
                    v.set(i, p, c * x - s * y);
                    v.set(i, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| vec_norm(&b.col(j))).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Matrix::zeros(m, n);
    let mut vv = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        vv.set_col(dst, &v.col(src));
        if s > 0.0 {
            let col: Vec<f64> = b.col(src).iter().map(|x| x / s).collect();
            u.set_col(dst, &col);
        }
    }
    // Complete U's zero columns to an orthonormal set so callers can rely on
    // UᵀU = I even for rank-deficient input.
    for j in 0..n {
        if sigma[j] > 0.0 {
            continue;
        }
        for cand in 0..m {
            let mut col = vec![0.0; m];
            col[cand] = 1.0;
            for prev in 0..n {
                if prev == j {
                    continue;
                }
                let pcol = u.col(prev);
                let d = vec_dot(&col, &pcol);
                for i in 0..m {
                    col[i] -= d * pcol[i];
                }
            }
            let nrm = vec_norm(&col);
            if nrm > 1e-6 {
                let col: Vec<f64> = col.iter().map(|x| x / nrm).collect();
                u.set_col(j, &col);
                break;
            }
        }
    }
    Svd { u, sigma, v: vv }
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
pub fn pinv(a: &Matrix, rel_cutoff: f64) -> Matrix {
    let s = svd(a);
    let smax = s.sigma.first().copied().unwrap_or(0.0);
    let cut = rel_cutoff * smax;
    let mut out = Matrix::zeros(a.cols(), a.rows());
    for k in 0..s.sigma.len() {
        let sk = s.sigma[k];
        if sk <= cut || sk == 0.0 {
            continue;
        }
        let uk = s.u.col(k);
        let vk = s.v.col(k);
        let inv = 1.0 / sk;
        for i in 0..a.cols() {
            for j in 0..a.rows() {
                out.add_at(i, j, vk[i] * inv * uk[j]);
            }
        }
    }
    out
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi.
/// Returns eigenvalues sorted descending and eigenvectors as columns.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows() != a.cols() {
        return Err(Error::Shape("sym_eigen of non-square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j).powi(2);
            }
        }
        if off.sqrt() < 1e-13 * (1.0 + m.max_abs()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    m.set(i, p, c * aip - s * aiq);
                    m.set(i, q, s * aip + c * aiq);
                }
                for j in 0..n {
                    let apj = m.get(p, j);
                    let aqj = m.get(q, j);
                    m.set(p, j, c * apj - s * aqj);
                    m.set(q, j, s * apj + c * aqj);
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_col(dst, &v.col(src));
    }
    Ok((vals, vecs))
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn chol_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a)?;
    let n = a.rows();
    // forward substitution L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // back substitution Lᵀ x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

fn cholesky(a: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::Shape("cholesky of non-square matrix".into()));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "cholesky pivot {s:e} at {i}"
                    )));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Haar-ish random matrix with orthonormal columns (Gaussian + Gram-Schmidt).
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(cols <= rows);
    let mut q = Matrix::zeros(rows, cols);
    for j in 0..cols {
        let mut col: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        loop {
            for prev in 0..j {
                let p = q.col(prev);
                let d = vec_dot(&col, &p);
                for i in 0..rows {
                    col[i] -= d * p[i];
                }
            }
            let nrm = vec_norm(&col);
            if nrm > 1e-8 {
                for x in col.iter_mut() {
                    *x /= nrm;
                }
                break;
            }
            col = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        }
        q.set_col(j, &col);
    }
    q
}

/// Pseudoinverse of a complex matrix via the 2n×2n real embedding
/// `[[Re, -Im], [Im, Re]]`, which commutes with the Moore-Penrose inverse.
pub fn cpinv(a: &CMatrix, rel_cutoff: f64) -> CMatrix {
    let (m, n) = (a.rows(), a.cols());
    let mut r = Matrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a.get(i, j);
            r.set(i, j, z.re);
            r.set(i, j + n, -z.im);
            r.set(i + m, j, z.im);
            r.set(i + m, j + n, z.re);
        }
    }
    let rp = pinv(&r, rel_cutoff);
    let mut out = CMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            out.set(i, j, Complex64::new(rp.get(i, j), rp.get(i + n, j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, n) in &[(5, 3), (3, 5), (4, 4)] {
            let a = random_matrix(m, n, &mut rng);
            let s = svd(&a);
            // A = U Σ Vᵀ
            let mut rec = Matrix::zeros(m, n);
            for k in 0..s.sigma.len() {
                let u = s.u.col(k);
                let v = s.v.col(k);
                for i in 0..m {
                    for j in 0..n {
                        rec.add_at(i, j, s.sigma[k] * u[i] * v[j]);
                    }
                }
            }
            assert!(a.max_abs_diff(&rec) < 1e-10, "{m}x{n}");
            // singular values descending
            for w in s.sigma.windows(2) {
                assert!(w[0] >= w[1] - 1e-12);
            }
        }
    }

    #[test]
    fn svd_orthonormal_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(6, 4, &mut rng);
        let s = svd(&a);
        let utu = s.u.transpose().matmul(&s.u).unwrap();
        let vtv = s.v.transpose().matmul(&s.v).unwrap();
        assert!(utu.max_abs_diff(&Matrix::identity(4)) < 1e-10);
        assert!(vtv.max_abs_diff(&Matrix::identity(4)) < 1e-10);
    }

    #[test]
    fn pinv_moore_penrose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // include a rank-deficient case: duplicate column
        let mut a = random_matrix(5, 3, &mut rng);
        let c0 = a.col(0);
        a.set_col(2, &c0);
        let ap = pinv(&a, 1e-12);
        let apa = a.matmul(&ap).unwrap().matmul(&a).unwrap();
        let pap = ap.matmul(&a).unwrap().matmul(&ap).unwrap();
        assert!(apa.max_abs_diff(&a) < 1e-9);
        assert!(pap.max_abs_diff(&ap) < 1e-9);
        let aap = a.matmul(&ap).unwrap();
        assert!(aap.max_abs_diff(&aap.transpose()) < 1e-9);
        let paa = ap.matmul(&a).unwrap();
        assert!(paa.max_abs_diff(&paa.transpose()) < 1e-9);
    }

    #[test]
    fn sym_eigen_diagonalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_matrix(5, 5, &mut rng);
        let a = b.matmul(&b.transpose()).unwrap(); // symmetric PSD
        let (vals, vecs) = sym_eigen(&a).unwrap();
        for k in 0..5 {
            let v = vecs.col(k);
            let av = a.matvec(&v).unwrap();
            for i in 0..5 {
                assert_relative_eq!(av[i], vals[k] * v[i], epsilon = 1e-8);
            }
        }
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn chol_solves_spd() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = chol_solve(&a, &[1.0, 2.0]).unwrap();
        let b = a.matvec(&x).unwrap();
        assert_relative_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn chol_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(chol_solve(&a, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn random_orthonormal_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_orthonormal(6, 4, &mut rng);
        let qtq = q.transpose().matmul(&q).unwrap();
        assert!(qtq.max_abs_diff(&Matrix::identity(4)) < 1e-12);
    }

    #[test]
    fn cpinv_matches_inverse_on_well_conditioned() {
        let mut a = CMatrix::zeros(2, 2);
        a.set(0, 0, Complex64::new(2.0, 1.0));
        a.set(0, 1, Complex64::new(0.0, -1.0));
        a.set(1, 0, Complex64::new(1.0, 0.0));
        a.set(1, 1, Complex64::new(3.0, 2.0));
        let ap = cpinv(&a, 1e-12);
        let prod = a.matmul(&ap).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }
}
