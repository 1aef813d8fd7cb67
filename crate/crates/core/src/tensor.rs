//! Dense tensors and the multilinear / Khatri-Rao algebra used everywhere else.
//!
//! Storage is row-major with the last index fastest. Formulas in the docs use
//! 1-based indices; storage is 0-based, and the conversion lives in one index
//! helper so the convention cannot drift between operations.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAX_ORDER: usize = 6;

/// Dense real tensor of order 0..=6.
///
/// Order 0 is a scalar (one entry, empty dims); it shows up as the result of
/// a fully contracted multilinear form.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() > MAX_ORDER {
            return Err(Error::UnsupportedOrder(dims.len()));
        }
        if dims.contains(&0) {
            return Err(Error::Shape("zero extent".into()));
        }
        let len = dims.iter().product();
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let mut t = DenseTensor::zeros(dims)?;
        if data.len() != t.data.len() {
            return Err(Error::Shape(format!(
                "dims {:?} need {} entries, got {}",
                dims,
                t.data.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("tensor entry is not finite".into()));
        }
        t.data = data;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row-major offset of a 0-based multi-index (last index fastest).
    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[k]);
            off = off * self.dims[k] + i;
        }
        off
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn scalar(&self) -> Result<f64> {
        if self.order() != 0 {
            return Err(Error::Shape(format!(
                "expected scalar tensor, got order {}",
                self.order()
            )));
        }
        Ok(self.data[0])
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::Shape("tensor add".into()));
        }
        DenseTensor::from_vec(
            &self.dims,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::Shape("tensor sub".into()));
        }
        DenseTensor::from_vec(
            &self.dims,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Iterate all 0-based multi-indices of the given dims in row-major order.
pub(crate) fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    loop {
        f(&idx);
        // odometer increment, last index fastest
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// `p`-fold outer power `v^{⊗p}`: entry (i1..ip) = v(i1)·…·v(ip).
pub fn outer_power(v: &[f64], p: usize) -> Result<DenseTensor> {
    if !(2..=4).contains(&p) {
        return Err(Error::UnsupportedOrder(p));
    }
    if v.is_empty() {
        return Err(Error::Precondition("outer_power of empty vector".into()));
    }
    let d = v.len();
    let mut t = DenseTensor::zeros(&vec![d; p])?;
    let mut pos = 0;
    for_each_index(&vec![d; p], |idx| {
        t.data[pos] = idx.iter().map(|&i| v[i]).product();
        pos += 1;
    });
    Ok(t)
}

/// One mode map of a multilinear form: a matrix (extent×out) or a vector,
/// which acts as an extent×1 map whose singleton mode is squeezed away.
pub enum ModeMap<'a> {
    Mat(&'a Matrix),
    Vec(&'a [f64]),
}

/// Multilinear form `T(M1, …, Mp)`.
///
/// Output entry (i1..ip) = Σ_j T(j1..jp) Π_t M_t(j_t, i_t). Vector maps
/// contract their mode away entirely; an all-vector call yields an order-0
/// tensor (use [`DenseTensor::scalar`]).
pub fn multilinear_form(t: &DenseTensor, maps: &[ModeMap]) -> Result<DenseTensor> {
    if maps.len() != t.order() {
        return Err(Error::Shape(format!(
            "tensor order {} but {} maps",
            t.order(),
            maps.len()
        )));
    }
    for (k, m) in maps.iter().enumerate() {
        let in_dim = match m {
            ModeMap::Mat(m) => m.rows(),
            ModeMap::Vec(v) => v.len(),
        };
        if in_dim != t.dims()[k] {
            return Err(Error::Shape(format!(
                "mode {} extent {} but map has {} rows",
                k + 1,
                t.dims()[k],
                in_dim
            )));
        }
    }

    // Contract one mode at a time, always the current leading mode; the
    // result of contracting mode 1 of an order-p tensor against an
    // extent×out map is an order-p tensor with leading extent `out`, rotated
    // so the next original mode comes first again. After p contractions the
    // mode order is restored.
    let mut cur = t.clone();
    for m in maps {
        cur = contract_leading(&cur, m)?;
    }
    // Squeeze the singleton modes left by vector maps.
    let keep: Vec<usize> = cur
        .dims()
        .iter()
        .zip(maps)
        .filter_map(|(&d, m)| match m {
            ModeMap::Mat(_) => Some(d),
            ModeMap::Vec(_) => None,
        })
        .collect();
    DenseTensor::from_vec(&keep, cur.data)
}

/// Contract the leading mode of `t` with `map`, then move that mode to the
/// back: result dims = (d2..dp, out).
fn contract_leading(t: &DenseTensor, map: &ModeMap) -> Result<DenseTensor> {
    let d1 = t.dims()[0];
    let rest: usize = t.dims()[1..].iter().product::<usize>().max(1);
    let out = match map {
        ModeMap::Mat(m) => m.cols(),
        ModeMap::Vec(_) => 1,
    };
    let mut new_dims: Vec<usize> = t.dims()[1..].to_vec();
    new_dims.push(out);
    let mut data = vec![0.0; rest * out];
    for j in 0..d1 {
        let slab = &t.data[j * rest..(j + 1) * rest];
        for o in 0..out {
            let w = match map {
                ModeMap::Mat(m) => m.get(j, o),
                ModeMap::Vec(v) => v[j],
            };
            if w == 0.0 {
                continue;
            }
            for (r, &x) in slab.iter().enumerate() {
                data[r * out + o] += w * x;
            }
        }
    }
    DenseTensor::from_vec(&new_dims, data)
}

/// Unfold an n×n×n tensor into n×n²: columns are the frontal slices laid side
/// by side, column (k−1)n+j holding T(:,j,k) (1-based).
pub fn unfold3(t: &DenseTensor) -> Result<Matrix> {
    if t.order() != 3 {
        return Err(Error::Shape(format!("unfold3 of order {}", t.order())));
    }
    let n = t.dims()[0];
    if t.dims() != [n, n, n] {
        return Err(Error::Shape(format!("unfold3 of non-cubic {:?}", t.dims())));
    }
    let mut m = Matrix::zeros(n, n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                m.set(i, k * n + j, t.get(&[i, j, k]));
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold3`].
pub fn fold3(m: &Matrix) -> Result<DenseTensor> {
    let n = m.rows();
    if m.cols() != n * n {
        return Err(Error::Shape(format!(
            "fold3 of {}x{}, want n x n^2",
            m.rows(),
            m.cols()
        )));
    }
    let mut t = DenseTensor::zeros(&[n, n, n])?;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                t.set(&[i, j, k], m.get(i, k * n + j));
            }
        }
    }
    Ok(t)
}

/// Khatri-Rao (columnwise Kronecker) product: column j of the result is
/// `[A(1,j)·B_j; A(2,j)·B_j; …]`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "khatri_rao column mismatch {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut out = Matrix::zeros(a.rows() * b.rows(), a.cols());
    for j in 0..a.cols() {
        for ia in 0..a.rows() {
            let s = a.get(ia, j);
            for ib in 0..b.rows() {
                out.set(ia * b.rows() + ib, j, s * b.get(ib, j));
            }
        }
    }
    Ok(out)
}

/// Partial trace of an order-6 tensor with all extents d, contracting modes
/// 1 and 4: `ptrace(T)(i1,i2,i3,i4) = Σ_i T(i,i1,i2,i,i3,i4)`.
pub fn ptrace(t: &DenseTensor) -> Result<DenseTensor> {
    if t.order() != 6 {
        return Err(Error::Shape(format!("ptrace of order {}", t.order())));
    }
    let d = t.dims()[0];
    if t.dims().iter().any(|&e| e != d) {
        return Err(Error::Shape(format!(
            "ptrace needs uniform extents, got {:?}",
            t.dims()
        )));
    }
    let mut out = DenseTensor::zeros(&[d, d, d, d])?;
    for_each_index(&[d, d, d, d], |idx| {
        let mut acc = 0.0;
        for i in 0..d {
            acc += t.get(&[i, idx[0], idx[1], i, idx[2], idx[3]]);
        }
        out.set(idx, acc);
    });
    Ok(out)
}

/// Outer product of two order-3 tensors into an order-6 tensor.
pub fn outer3x3(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != 3 || b.order() != 3 {
        return Err(Error::Shape("outer3x3 needs two order-3 tensors".into()));
    }
    let mut dims = a.dims().to_vec();
    dims.extend_from_slice(b.dims());
    let mut data = Vec::with_capacity(a.data().len() * b.data().len());
    for &x in a.data() {
        for &y in b.data() {
            data.push(x * y);
        }
    }
    DenseTensor::from_vec(&dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn basis(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn outer_power_basis() {
        let t = outer_power(&basis(3, 0), 3).unwrap();
        assert_eq!(t.get(&[0, 0, 0]), 1.0);
        assert_eq!(t.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn outer_power_square() {
        let t = outer_power(&[1.0, 2.0], 2).unwrap();
        assert_eq!(t.get(&[0, 0]), 1.0);
        assert_eq!(t.get(&[0, 1]), 2.0);
        assert_eq!(t.get(&[1, 0]), 2.0);
        assert_eq!(t.get(&[1, 1]), 4.0);
    }

    #[test]
    fn outer_power_signs() {
        // entries of [1,-1]^{⊗3} are (-1)^{#index-2 positions}
        let t = outer_power(&[1.0, -1.0], 3).unwrap();
        for_each_index(&[2, 2, 2], |idx| {
            let twos = idx.iter().filter(|&&i| i == 1).count();
            let expect = if twos % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(t.get(idx), expect);
        });
    }

    #[test]
    fn outer_power_order_bounds() {
        assert!(outer_power(&[1.0], 1).is_err());
        assert!(outer_power(&[1.0], 5).is_err());
    }

    #[test]
    fn multilinear_identity_maps() {
        let t = outer_power(&[1.0, -2.0, 0.5], 3).unwrap();
        let id = Matrix::identity(3);
        let maps = [ModeMap::Mat(&id), ModeMap::Mat(&id), ModeMap::Mat(&id)];
        let out = multilinear_form(&t, &maps).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn multilinear_orthonormal_contraction() {
        // T = Σ a_i^{⊗4} with orthonormal a_i, maps (I,u,u,u) → Σ ⟨u,a_i⟩³ a_i
        let d = 4;
        let a = Matrix::identity(d); // simplest orthonormal set
        let mut t = DenseTensor::zeros(&[d, d, d, d]).unwrap();
        for i in 0..d {
            t = t.add(&outer_power(&a.col(i), 4).unwrap()).unwrap();
        }
        let u = [0.5, -0.5, 0.5, 0.5];
        let id = Matrix::identity(d);
        let out = multilinear_form(
            &t,
            &[ModeMap::Mat(&id), ModeMap::Vec(&u), ModeMap::Vec(&u), ModeMap::Vec(&u)],
        )
        .unwrap();
        assert_eq!(out.dims(), &[d]);
        for i in 0..d {
            let dot: f64 = u[i]; // ⟨u, e_i⟩
            assert_relative_eq!(out.get(&[i]), dot.powi(3), epsilon = 1e-12);
        }
    }

    #[test]
    fn multilinear_matches_triple_loop() {
        // random-ish 2x2x2 against the brute-force nested-loop definition
        let t = DenseTensor::from_vec(
            &[2, 2, 2],
            vec![0.3, -1.2, 0.7, 2.0, -0.5, 0.1, 1.5, -2.2],
        )
        .unwrap();
        let u = [0.2, -1.1];
        let v = [1.3, 0.4];
        let w = [-0.7, 0.9];
        let out = multilinear_form(&t, &[ModeMap::Vec(&u), ModeMap::Vec(&v), ModeMap::Vec(&w)])
            .unwrap()
            .scalar()
            .unwrap();
        let mut brute = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    brute += t.get(&[i, j, k]) * u[i] * v[j] * w[k];
                }
            }
        }
        assert_relative_eq!(out, brute, epsilon = 1e-12);
    }

    #[test]
    fn multilinear_shape_error() {
        let t = outer_power(&[1.0, 2.0], 2).unwrap();
        let u = [1.0, 2.0, 3.0];
        assert!(multilinear_form(&t, &[ModeMap::Vec(&u), ModeMap::Vec(&u)]).is_err());
    }

    #[test]
    fn unfold3_basis() {
        let t = outer_power(&basis(2, 0), 3).unwrap();
        let m = unfold3(&t).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 4);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn unfold3_index_arithmetic() {
        // T(i,j,k) = i + 2j + 4k with 1-based i,j,k; explicit 2x4 layout
        let mut t = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        for_each_index(&[2, 2, 2], |idx| {
            let (i, j, k) = (idx[0] + 1, idx[1] + 1, idx[2] + 1);
            t.set(idx, (i + 2 * j + 4 * k) as f64);
        });
        let m = unfold3(&t).unwrap();
        // columns are (j,k) = (1,1),(2,1),(1,2),(2,2)
        assert_eq!(m.row(0), &[7.0, 9.0, 11.0, 13.0]);
        assert_eq!(m.row(1), &[8.0, 10.0, 12.0, 14.0]);
    }

    #[test]
    fn unfold3_rejects_non_cubic() {
        let t = DenseTensor::zeros(&[2, 3, 2]).unwrap();
        assert!(unfold3(&t).is_err());
    }

    #[test]
    fn khatri_rao_basis_columns() {
        let e1 = Matrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let out = khatri_rao(&e1, &e1).unwrap();
        assert_eq!(out.col(0), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn khatri_rao_known_columns() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let out = khatri_rao(&a, &b).unwrap();
        assert_eq!(out.col(0), vec![5.0, 7.0, 15.0, 21.0]);
        assert_eq!(out.col(1), vec![12.0, 16.0, 24.0, 32.0]);
    }

    #[test]
    fn khatri_rao_column_mismatch() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(khatri_rao(&a, &b).is_err());
    }

    #[test]
    fn ptrace_diagonal_term() {
        // ptrace(a^{⊗6}) = ‖a‖² a^{⊗4}
        let a = vec![0.6, -0.8, 0.0];
        let a3 = outer_power(&a, 3).unwrap();
        let t6 = outer3x3(&a3, &a3).unwrap();
        let got = ptrace(&t6).unwrap();
        let want = outer_power(&a, 4).unwrap(); // ‖a‖² = 1
        assert!(got.sub(&want).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn ptrace_orthogonal_cross_term() {
        let a = basis(3, 0);
        let b = basis(3, 1);
        let t6 = outer3x3(&outer_power(&a, 3).unwrap(), &outer_power(&b, 3).unwrap()).unwrap();
        let got = ptrace(&t6).unwrap();
        assert_eq!(got.frob_norm(), 0.0);
    }

    #[test]
    fn ptrace_matches_loop_contraction() {
        // d=2 arbitrary tensor vs. explicit loop
        let d = 2;
        let data: Vec<f64> = (0..64).map(|v| ((v * 7919) % 23) as f64 - 11.0).collect();
        let t = DenseTensor::from_vec(&[d; 6], data).unwrap();
        let got = ptrace(&t).unwrap();
        for_each_index(&[d, d, d, d], |idx| {
            let mut acc = 0.0;
            for i in 0..d {
                acc += t.get(&[i, idx[0], idx[1], i, idx[2], idx[3]]);
            }
            assert_eq!(got.get(idx), acc);
        });
    }

    #[test]
    fn ptrace_rejects_non_uniform() {
        let t = DenseTensor::zeros(&[2, 2, 2, 2, 2, 3]).unwrap();
        assert!(ptrace(&t).is_err());
    }

    #[test]
    fn quartic_contraction_identity() {
        // T = Σ a_i^{⊗4} orthonormal: T(u,u,u,u) = Σ ⟨u,a_i⟩⁴
        use crate::linalg::random_orthonormal;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(90);
        let d = 5;
        let a = random_orthonormal(d, d, &mut rng);
        let mut t = DenseTensor::zeros(&[d, d, d, d]).unwrap();
        for i in 0..d {
            t = t.add(&outer_power(&a.col(i), 4).unwrap()).unwrap();
        }
        for _ in 0..10 {
            let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = multilinear_form(
                &t,
                &[
                    ModeMap::Vec(&u),
                    ModeMap::Vec(&u),
                    ModeMap::Vec(&u),
                    ModeMap::Vec(&u),
                ],
            )
            .unwrap()
            .scalar()
            .unwrap();
            let want: f64 = (0..d)
                .map(|i| {
                    let dot: f64 = u.iter().zip(a.col(i)).map(|(x, y)| x * y).sum();
                    dot.powi(4)
                })
                .sum();
            assert_relative_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn ptrace_monte_carlo_order_conversion() {
        // E[ptrace(X ⊗ X′)] = Σ a_i^{⊗4} for X with E[X] = Σ a_i^{⊗3};
        // the error shrinks like 1/√N
        use crate::linalg::random_orthonormal;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(91);
        let d = 3;
        let a = random_orthonormal(d, d, &mut rng);
        let scale = (d as f64).powf(1.0 / 3.0); // E[(c·a_i)^{⊗3}] over uniform i = Σ a^{⊗3}
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> DenseTensor {
            let i = rng.gen_range(0..d);
            let v: Vec<f64> = a.col(i).iter().map(|x| x * scale).collect();
            outer_power(&v, 3).unwrap()
        };
        let mut truth = DenseTensor::zeros(&[d, d, d, d]).unwrap();
        for i in 0..d {
            truth = truth.add(&outer_power(&a.col(i), 4).unwrap()).unwrap();
        }
        // average the Monte-Carlo error over repetitions so the 1/√N trend
        // is not drowned by the luck of a single run
        let mut errs = Vec::new();
        for &n_draws in &[400usize, 6400] {
            let reps = 6;
            let mut total = 0.0;
            for _ in 0..reps {
                let mut acc = DenseTensor::zeros(&[d, d, d, d]).unwrap();
                for _ in 0..n_draws {
                    let x = draw(&mut rng);
                    let xp = draw(&mut rng);
                    acc = acc.add(&ptrace(&outer3x3(&x, &xp).unwrap()).unwrap()).unwrap();
                }
                let mean = acc.scale(1.0 / n_draws as f64);
                total += mean.sub(&truth).unwrap().frob_norm();
            }
            errs.push(total / reps as f64);
        }
        // 16x more draws should shrink the mean error about 4x; allow slack
        assert!(errs[1] < errs[0] / 2.0, "errors {errs:?}");
        assert!(errs[1] < 0.5, "absolute error too large: {errs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn khatri_rao_gram_identity(
            seed in 0u64..1000,
        ) {
            // (A⊙B)ᵀ(A⊙B) = (AᵀA).*(BᵀB)
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let b = Matrix::from_vec(5, 4, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let kr = khatri_rao(&a, &b).unwrap();
            let left = kr.transpose().matmul(&kr).unwrap();
            let ata = a.transpose().matmul(&a).unwrap();
            let btb = b.transpose().matmul(&b).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((left.get(i, j) - ata.get(i, j) * btb.get(i, j)).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn unfold_fold_roundtrip(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 3;
            let t = DenseTensor::from_vec(
                &[n, n, n],
                (0..n * n * n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            ).unwrap();
            let back = fold3(&unfold3(&t).unwrap()).unwrap();
            // bit-exact round trip
            prop_assert_eq!(back.data(), t.data());
        }
    }
}
