//! Cyclic convolution, circulant matrices, and their FFT diagonalization.
//!
//! Conventions, used verbatim across the crate:
//! - indices are 1-based in formulas, residue 0 maps to index n; the shared
//!   helper [`cyc`] is the only place that arithmetic lives;
//! - the forward DFT is unnormalized with kernel exp(-2πi/n), the inverse
//!   carries the 1/n factor;
//! - `Cir(f)` has entry (i,j) = f(((i-j) mod n)+1), so column j is the cyclic
//!   shift of f by j-1 and `Cir(f)·w = f ∗ w`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Matrix};

/// 0-based cyclic index: `cyc(i, n)` reduces any signed offset into `0..n`.
#[inline]
pub fn cyc(i: isize, n: usize) -> usize {
    let n = n as isize;
    (((i % n) + n) % n) as usize
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Unnormalized forward DFT of a real vector.
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(x.len(), true).process(&mut buf);
    buf
}

/// Unnormalized forward DFT of a complex vector.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    plan(x.len(), true).process(&mut buf);
    buf
}

/// Inverse DFT with the 1/n normalization.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    plan(x.len(), false).process(&mut buf);
    let n = x.len() as f64;
    for v in buf.iter_mut() {
        *v /= n;
    }
    buf
}

/// Inverse DFT expected to land on a real vector: the imaginary residue must
/// stay below `tol` and is stripped.
pub fn ifft_real(x: &[Complex64], tol: f64) -> Result<Vec<f64>> {
    let buf = ifft(x);
    let max_im = buf.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    if max_im > tol {
        return Err(Error::Degenerate(format!(
            "imaginary residue {max_im:e} above {tol:e} in inverse FFT"
        )));
    }
    Ok(buf.iter().map(|v| v.re).collect())
}

/// n-cyclic convolution `v(i) = Σ_j f(j)·w(((i−j) mod n)+1)`, direct form.
pub fn cyclic_conv(f: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    if w.len() != n {
        return Err(Error::Shape(format!(
            "cyclic_conv lengths {} vs {}",
            n,
            w.len()
        )));
    }
    let mut v = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += f[j] * w[cyc(i as isize - j as isize, n)];
        }
        v[i] = acc;
    }
    Ok(v)
}

/// Dense circulant matrix of a filter: entry (i,j) = f(((i−j) mod n)+1).
pub fn circulant_dense(f: &[f64]) -> Matrix {
    let n = f.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, f[cyc(i as isize - j as isize, n)]);
        }
    }
    m
}

/// Circulant via its spectral form `U·Diag(FFT(f))·U^H`.
///
/// The real part matches [`circulant_dense`] to 1e-10 and the imaginary part
/// vanishes; the complex value is returned so tests can check both claims.
pub fn circulant_from_fft(f: &[f64]) -> CMatrix {
    let n = f.len();
    let basis = FourierBasis::new(n);
    let spec = fft_real(f);
    let mut diag = CMatrix::zeros(n, n);
    for k in 0..n {
        diag.set(k, k, spec[k]);
    }
    basis
        .u
        .matmul(&diag)
        .and_then(|m| m.matmul(&basis.u.hermitian()))
        .expect("square dimensions")
}

/// Correlation kernel `γ(a,b)` with `FFT(γ(a,b)) = conj(FFT(a)) .* FFT(b)`,
/// so that `Cir(a)ᵀ·Cir(b)` is the circulant of `γ(a,b)`.
pub fn gamma_corr(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "gamma_corr lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let fa = fft_real(a);
    let fb = fft_real(b);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    ifft_real(&prod, 1e-8)
}

/// The DFT matrix F with `F(m,k) = ω^{(m−1)(k−1)}`, `ω = exp(−2πi/n)`, and
/// the unitary eigenbasis `U = √n·F⁻¹` shared by all n×n circulants.
pub struct FourierBasis {
    pub n: usize,
    pub f: CMatrix,
    pub u: CMatrix,
}

impl FourierBasis {
    pub fn new(n: usize) -> Self {
        let mut f = CMatrix::zeros(n, n);
        let mut u = CMatrix::zeros(n, n);
        let scale = 1.0 / (n as f64).sqrt();
        for m in 0..n {
            for k in 0..n {
                let ang = -2.0 * std::f64::consts::PI * (m as f64) * (k as f64) / n as f64;
                let w = Complex64::new(ang.cos(), ang.sin());
                f.set(m, k, w);
                // U = F^H / √n since F·F^H = n·I
                u.set(m, k, w.conj() * scale);
            }
        }
        FourierBasis { n, f, u }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn delta_filter_is_identity() {
        let w = [3.0, -1.0, 2.0];
        let f = [1.0, 0.0, 0.0];
        assert_eq!(cyclic_conv(&f, &w).unwrap(), w.to_vec());
        let c = circulant_dense(&f);
        assert_eq!(c, Matrix::identity(3));
    }

    #[test]
    fn shift_filter_rotates() {
        // f = e_2 shifts w by one position: [a,b,c] -> [c,a,b]
        let f = [0.0, 1.0, 0.0];
        let w = [1.0, 2.0, 3.0];
        assert_eq!(cyclic_conv(&f, &w).unwrap(), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn conv_matches_fft_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let f = rand_vec(n, &mut rng);
        let w = rand_vec(n, &mut rng);
        let direct = cyclic_conv(&f, &w).unwrap();
        let ff = fft_real(&f);
        let fw = fft_real(&w);
        let prod: Vec<Complex64> = ff.iter().zip(&fw).map(|(a, b)| a * b).collect();
        let spectral = ifft_real(&prod, 1e-8).unwrap();
        for i in 0..n {
            assert_relative_eq!(direct[i], spectral[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn conv_length_mismatch() {
        assert!(cyclic_conv(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn circulant_columns_are_shifts() {
        let c = circulant_dense(&[1.0, 2.0, 3.0]);
        assert_eq!(c.col(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(c.col(1), vec![3.0, 1.0, 2.0]);
        assert_eq!(c.col(2), vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn circulant_matvec_is_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = rand_vec(5, &mut rng);
        let w = rand_vec(5, &mut rng);
        let lhs = circulant_dense(&f).matvec(&w).unwrap();
        let rhs = cyclic_conv(&f, &w).unwrap();
        // identical terms, different summation order
        for (a, b) in lhs.iter().zip(&rhs) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn spectral_circulant_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = rand_vec(16, &mut rng);
        let dense = circulant_dense(&f);
        let spectral = circulant_from_fft(&f);
        let re = spectral.real_part(1e-10).unwrap();
        assert!(re.max_abs_diff(&dense) < 1e-10);
        // delta filter gives the identity
        let id = circulant_from_fft(&[1.0, 0.0, 0.0, 0.0]);
        assert!(id.real_part(1e-10).unwrap().max_abs_diff(&Matrix::identity(4)) < 1e-10);
    }

    #[test]
    fn circulant_eigenvalues_are_fft() {
        // U^H · Cir(f) · U is diagonal with diagonal FFT(f)
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 8;
        let f = rand_vec(n, &mut rng);
        let basis = FourierBasis::new(n);
        let c = CMatrix::from_real(&circulant_dense(&f));
        let d = basis
            .u
            .hermitian()
            .matmul(&c)
            .unwrap()
            .matmul(&basis.u)
            .unwrap();
        let spec = fft_real(&f);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j {
                    spec[i]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((d.get(i, j) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn fourier_basis_unitary() {
        let b = FourierBasis::new(7);
        let prod = b.u.hermitian().matmul(&b.u).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gamma_delta_autocorrelation() {
        let g = gamma_corr(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(g[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_zero_lag_is_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = rand_vec(6, &mut rng);
        let g = gamma_corr(&a, &a).unwrap();
        let energy: f64 = a.iter().map(|x| x * x).sum();
        assert_relative_eq!(g[0], energy, epsilon = 1e-10);
    }

    #[test]
    fn gamma_gram_identity() {
        // Cir(a)ᵀ·Cir(b) equals the circulant of γ(a,b)
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for &n in &[4usize, 8, 16] {
            for _ in 0..17 {
                let a = rand_vec(n, &mut rng);
                let b = rand_vec(n, &mut rng);
                let gram = circulant_dense(&a)
                    .transpose()
                    .matmul(&circulant_dense(&b))
                    .unwrap();
                let g = circulant_dense(&gamma_corr(&a, &b).unwrap());
                assert!(gram.max_abs_diff(&g) < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn transpose_is_reversed_filter() {
        // Cir(f)ᵀ is the circulant of the cyclically reversed filter,
        // which is exactly γ(f, e_1).
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 6;
        let f = rand_vec(n, &mut rng);
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let rev = gamma_corr(&f, &e1).unwrap();
        let lhs = circulant_dense(&f).transpose();
        let rhs = circulant_dense(&rev);
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        // and explicitly: rev(1) = f(1), rev(i) = f(n+2-i) for i ≥ 2
        assert_relative_eq!(rev[0], f[0], epsilon = 1e-10);
        for i in 1..n {
            assert_relative_eq!(rev[i], f[n - i], epsilon = 1e-10);
        }
    }

    #[test]
    fn convolution_associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let n = 8;
        let f = rand_vec(n, &mut rng);
        let g = rand_vec(n, &mut rng);
        let w = rand_vec(n, &mut rng);
        let lhs = cyclic_conv(&f, &cyclic_conv(&g, &w).unwrap()).unwrap();
        let rhs = cyclic_conv(&cyclic_conv(&f, &g).unwrap(), &w).unwrap();
        for i in 0..n {
            assert_relative_eq!(lhs[i], rhs[i], epsilon = 1e-10);
        }
    }
}
