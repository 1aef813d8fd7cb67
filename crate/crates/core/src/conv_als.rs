//! Convolutional tensor decomposition: circulant-constrained ALS with closed
//! form updates, the alternating-minimization baseline, and recovery metrics.
//!
//! The decomposition target is the unfolded third cumulant
//! `C3 ≈ F Λ (H⊙G)ᵀ` where F, G, H are column-stacked circulants of unit-norm
//! filters. Per mode, with `M := C3·((H⊙G)ᵀ)†`, the optimal filter block has
//! the closed form "de-shift the normalized columns and average" update, and
//! `λ(i) = ‖M_i‖`. M itself is computed without ever materializing the
//! n²-row Khatri-Rao product: `C3(H⊙G)` row-wise via the slice matricization
//! Γ^(m), and the Gram pseudoinverse via the per-frequency block structure Ψ.

pub const FULL_RANK_CONDITION: &str = "requires nL<n^2 or L<n";

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circulant::{cyc, fft_real, gamma_corr, ifft_real, FourierBasis};
use crate::cumulant::{gamma_slice, SampleSet, UnfoldedCumulant};
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cpinv};
use crate::matrix::{vec_norm, CMatrix, Matrix};

/// L real filters of cyclic length n, each with unit Frobenius norm.
#[derive(Debug, Clone)]
pub struct FilterBank {
    n: usize,
    filters: Vec<Vec<f64>>,
}

impl FilterBank {
    /// Build from unit-norm filters; enforces the full-rank condition L < n.
    pub fn from_filters(filters: Vec<Vec<f64>>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::Precondition("empty filter bank".into()));
        }
        let n = filters[0].len();
        if filters.iter().any(|f| f.len() != n) {
            return Err(Error::Shape("filters have unequal lengths".into()));
        }
        if filters.len() >= n {
            return Err(Error::Precondition(format!(
                "L={} with n={}: {FULL_RANK_CONDITION}",
                filters.len(),
                n
            )));
        }
        for (l, f) in filters.iter().enumerate() {
            let nrm = vec_norm(f);
            if (nrm - 1.0).abs() > 1e-10 {
                return Err(Error::Precondition(format!(
                    "filter {l} has norm {nrm}, want 1"
                )));
            }
        }
        Ok(FilterBank { n, filters })
    }

    /// Normalize arbitrary nonzero vectors into a bank.
    pub fn from_unnormalized(vecs: Vec<Vec<f64>>) -> Result<Self> {
        let mut filters = Vec::with_capacity(vecs.len());
        for (l, mut f) in vecs.into_iter().enumerate() {
            let nrm = vec_norm(&f);
            if nrm == 0.0 {
                return Err(Error::Degenerate(format!("filter {l} is zero")));
            }
            for v in f.iter_mut() {
                *v /= nrm;
            }
            filters.push(f);
        }
        FilterBank::from_filters(filters)
    }

    /// i.i.d. Gaussian filters, unit-normalized.
    pub fn random<R: Rng + ?Sized>(n: usize, l_count: usize, rng: &mut R) -> Self {
        let vecs: Vec<Vec<f64>> = (0..l_count)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        FilterBank::from_unnormalized(vecs).expect("gaussian filters are nonzero")
    }

    pub fn patch_len(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn filter(&self, l: usize) -> &[f64] {
        &self.filters[l]
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    /// Column j (0-based) of the column-stacked circulant [Cir(f_1),…,Cir(f_L)].
    pub fn stacked_column(&self, j: usize) -> Vec<f64> {
        let l = j / self.n;
        let p0 = j % self.n;
        (0..self.n)
            .map(|i| self.filters[l][cyc(i as isize - p0 as isize, self.n)])
            .collect()
    }

    /// Dense n×nL column-stacked circulant. Test/oracle scale only.
    pub fn stacked_dense(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n, n * self.len());
        for j in 0..n * self.len() {
            m.set_col(j, &self.stacked_column(j));
        }
        m
    }
}

/// Diagonal of Λ: one weight per stacked-circulant column.
#[derive(Debug, Clone)]
pub struct WeightDiag {
    pub lambda: Vec<f64>,
}

/// The Gram kernel Ψ: an L×L grid of length-n complex diagonals, Hermitian
/// as a full matrix. Block (j,l) is `Diag(FFT(γ(g_j,g_l) .* γ(h_j,h_l)))`.
#[derive(Debug, Clone)]
pub struct PsiBlocks {
    n: usize,
    l_count: usize,
    /// row-major L×L grid of length-n diagonals
    blocks: Vec<Vec<Complex64>>,
}

impl PsiBlocks {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn l_count(&self) -> usize {
        self.l_count
    }

    /// Diagonal of block (j, l): block-row j, block-column l, 0-based.
    pub fn block(&self, j: usize, l: usize) -> &[Complex64] {
        &self.blocks[j * self.l_count + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Dense nL×nL complex form (tests and fallbacks).
    pub fn to_dense(&self) -> CMatrix {
        let (n, l_count) = (self.n, self.l_count);
        let mut m = CMatrix::zeros(n * l_count, n * l_count);
        for bj in 0..l_count {
            for bl in 0..l_count {
                for k in 0..n {
                    m.set(bj * n + k, bl * n + k, self.block(bj, bl)[k]);
                }
            }
        }
        m
    }
}

/// Block-diagonal Fourier basis Blkdiag(U, …, U) of size nL×nL.
pub fn blockdiag_fourier(n: usize, l_count: usize) -> CMatrix {
    let basis = FourierBasis::new(n);
    let mut m = CMatrix::zeros(n * l_count, n * l_count);
    for b in 0..l_count {
        for i in 0..n {
            for j in 0..n {
                m.set(b * n + i, b * n + j, basis.u.get(i, j));
            }
        }
    }
    m
}

/// Dense `(HᵀH) .* (GᵀG)` Gram-Hadamard matrix (oracle scale only).
pub fn dense_gram_hadamard(g: &FilterBank, h: &FilterBank) -> Result<Matrix> {
    let gd = g.stacked_dense();
    let hd = h.stacked_dense();
    let gg = gd.transpose().matmul(&gd)?;
    let hh = hd.transpose().matmul(&hd)?;
    let nl = gg.rows();
    let mut out = Matrix::zeros(nl, nl);
    for i in 0..nl {
        for j in 0..nl {
            out.set(i, j, hh.get(i, j) * gg.get(i, j));
        }
    }
    Ok(out)
}

/// Build Ψ from the two fixed-mode banks: 2L filter FFTs inside
/// [`gamma_corr`], then an elementwise product and one FFT per block.
pub fn psi_build(g: &FilterBank, h: &FilterBank) -> Result<PsiBlocks> {
    if g.patch_len() != h.patch_len() || g.len() != h.len() {
        return Err(Error::Shape(format!(
            "bank shapes differ: {}x{} vs {}x{}",
            g.len(),
            g.patch_len(),
            h.len(),
            h.patch_len()
        )));
    }
    let n = g.patch_len();
    let l_count = g.len();
    let mut blocks = Vec::with_capacity(l_count * l_count);
    for j in 0..l_count {
        for l in 0..l_count {
            let gg = gamma_corr(g.filter(j), g.filter(l))?;
            let hh = gamma_corr(h.filter(j), h.filter(l))?;
            let prod: Vec<f64> = gg.iter().zip(&hh).map(|(a, b)| a * b).collect();
            blocks.push(fft_real(&prod));
        }
    }
    Ok(PsiBlocks { n, l_count, blocks })
}

/// Rectangular grid of length-n diagonal blocks; the working type of the
/// recursive block inversion. All arithmetic stays diagonal per block.
#[derive(Clone)]
struct DiagGrid {
    br: usize,
    bc: usize,
    n: usize,
    blocks: Vec<Vec<Complex64>>,
}

impl DiagGrid {
    fn zeros(br: usize, bc: usize, n: usize) -> Self {
        DiagGrid {
            br,
            bc,
            n,
            blocks: vec![vec![Complex64::new(0.0, 0.0); n]; br * bc],
        }
    }

    fn block(&self, i: usize, j: usize) -> &[Complex64] {
        &self.blocks[i * self.bc + j]
    }

    fn block_mut(&mut self, i: usize, j: usize) -> &mut Vec<Complex64> {
        &mut self.blocks[i * self.bc + j]
    }

    fn mul(&self, other: &DiagGrid) -> DiagGrid {
        assert_eq!(self.bc, other.br);
        let mut out = DiagGrid::zeros(self.br, other.bc, self.n);
        for i in 0..self.br {
            for j in 0..other.bc {
                for m in 0..self.bc {
                    let a = self.block(i, m);
                    let b = other.block(m, j);
                    let dst = out.block_mut(i, j);
                    for k in 0..self.n {
                        dst[k] += a[k] * b[k];
                    }
                }
            }
        }
        out
    }

    fn sub(&self, other: &DiagGrid) -> DiagGrid {
        assert_eq!((self.br, self.bc), (other.br, other.bc));
        let mut out = self.clone();
        for (dst, src) in out.blocks.iter_mut().zip(&other.blocks) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= s;
            }
        }
        out
    }

    fn neg(&self) -> DiagGrid {
        let mut out = self.clone();
        for b in out.blocks.iter_mut() {
            for v in b.iter_mut() {
                *v = -*v;
            }
        }
        out
    }
}

struct SingularPivot;

/// Strict elementwise inverse of a single diagonal; entries at or below the
/// cutoff abort the recursion (the caller falls back to the SVD path).
fn diag_strict_inv(d: &[Complex64], cutoff: f64) -> std::result::Result<Vec<Complex64>, SingularPivot> {
    d.iter()
        .map(|v| {
            if v.norm() <= cutoff {
                Err(SingularPivot)
            } else {
                Ok(v.inv())
            }
        })
        .collect()
}

/// Recursive 2×2 block inversion of a square grid of diagonals:
/// J^L = [[J^{L-1}, O], [R, D]] inverted through both Schur complements.
fn grid_strict_inv(g: &DiagGrid, cutoff: f64) -> std::result::Result<DiagGrid, SingularPivot> {
    assert_eq!(g.br, g.bc);
    let l_count = g.br;
    if l_count == 1 {
        let mut out = DiagGrid::zeros(1, 1, g.n);
        *out.block_mut(0, 0) = diag_strict_inv(g.block(0, 0), cutoff)?;
        return Ok(out);
    }
    let m = l_count - 1;
    let mut j_sub = DiagGrid::zeros(m, m, g.n);
    let mut o = DiagGrid::zeros(m, 1, g.n);
    let mut r = DiagGrid::zeros(1, m, g.n);
    let mut d = DiagGrid::zeros(1, 1, g.n);
    for i in 0..m {
        for j in 0..m {
            *j_sub.block_mut(i, j) = g.block(i, j).to_vec();
        }
        *o.block_mut(i, 0) = g.block(i, m).to_vec();
        *r.block_mut(0, i) = g.block(m, i).to_vec();
    }
    *d.block_mut(0, 0) = g.block(m, m).to_vec();

    let mut d_inv = DiagGrid::zeros(1, 1, g.n);
    *d_inv.block_mut(0, 0) = diag_strict_inv(d.block(0, 0), cutoff)?;
    let j_inv = grid_strict_inv(&j_sub, cutoff)?;

    // S1 = J − O D⁻¹ R,  S2 = D − R J⁻¹ O
    let s1 = j_sub.sub(&o.mul(&d_inv).mul(&r));
    let s2 = d.sub(&r.mul(&j_inv).mul(&o));
    let s1_inv = grid_strict_inv(&s1, cutoff)?;
    let mut s2_inv = DiagGrid::zeros(1, 1, g.n);
    *s2_inv.block_mut(0, 0) = diag_strict_inv(s2.block(0, 0), cutoff)?;

    let tr = j_inv.mul(&o).mul(&s2_inv).neg();
    let bl = d_inv.mul(&r).mul(&s1_inv).neg();

    let mut out = DiagGrid::zeros(l_count, l_count, g.n);
    for i in 0..m {
        for j in 0..m {
            *out.block_mut(i, j) = s1_inv.block(i, j).to_vec();
        }
        *out.block_mut(i, m) = tr.block(i, 0).to_vec();
        *out.block_mut(m, i) = bl.block(0, i).to_vec();
    }
    *out.block_mut(m, m) = s2_inv.block(0, 0).to_vec();
    Ok(out)
}

/// Pseudoinverse of Ψ.
///
/// The fast path is the recursive 2×2 block inversion, valid when every
/// pivot is comfortably nonsingular. Any pivot at or below
/// `cutoff_rel·max|Ψ|` aborts it, and the whole computation falls back to an
/// exact SVD pseudoinverse applied per frequency (the blocks are diagonal,
/// so Ψ decouples into n independent L×L complex matrices).
pub fn psi_pinv(psi: &PsiBlocks, cutoff_rel: f64) -> PsiBlocks {
    let n = psi.n;
    let l_count = psi.l_count;
    let scale = psi.max_abs();
    if scale == 0.0 {
        return PsiBlocks {
            n,
            l_count,
            blocks: vec![vec![Complex64::new(0.0, 0.0); n]; l_count * l_count],
        };
    }
    let cutoff = cutoff_rel * scale;

    if l_count == 1 {
        // diagonal pseudoinverse: reciprocal of significant entries, zeros kept
        let blk: Vec<Complex64> = psi
            .block(0, 0)
            .iter()
            .map(|v| {
                if v.norm() <= cutoff {
                    Complex64::new(0.0, 0.0)
                } else {
                    v.inv()
                }
            })
            .collect();
        return PsiBlocks {
            n,
            l_count,
            blocks: vec![blk],
        };
    }

    let grid = DiagGrid {
        br: l_count,
        bc: l_count,
        n,
        blocks: psi.blocks.clone(),
    };
    if let Ok(inv) = grid_strict_inv(&grid, cutoff) {
        return symmetrize_psi(PsiBlocks {
            n,
            l_count,
            blocks: inv.blocks,
        });
    }

    // Fallback: per-frequency L×L pseudoinverse.
    let mut blocks = vec![vec![Complex64::new(0.0, 0.0); n]; l_count * l_count];
    for k in 0..n {
        let mut p = CMatrix::zeros(l_count, l_count);
        for j in 0..l_count {
            for l in 0..l_count {
                p.set(j, l, psi.block(j, l)[k]);
            }
        }
        let pd = cpinv(&p, cutoff_rel);
        for j in 0..l_count {
            for l in 0..l_count {
                blocks[j * l_count + l][k] = pd.get(j, l);
            }
        }
    }
    symmetrize_psi(PsiBlocks { n, l_count, blocks })
}

/// Project onto the exact symmetries of Ψ† for real filters: Hermitian as a
/// grid (block (j,l) = conj of block (l,j)) and conjugate frequency symmetry
/// within every block (so the circulant each block encodes is real). Both
/// hold exactly in exact arithmetic; this removes roundoff drift.
fn symmetrize_psi(psi: PsiBlocks) -> PsiBlocks {
    let (n, l_count) = (psi.n, psi.l_count);
    let mut blocks = psi.blocks.clone();
    for j in 0..l_count {
        for l in 0..l_count {
            for k in 0..n {
                let a = psi.blocks[j * l_count + l][k];
                let b = psi.blocks[l * l_count + j][k].conj();
                blocks[j * l_count + l][k] = 0.5 * (a + b);
            }
        }
    }
    let half = blocks.clone();
    for b in 0..l_count * l_count {
        for k in 0..n {
            let mirror = half[b][(n - k) % n].conj();
            blocks[b][k] = 0.5 * (half[b][k] + mirror);
        }
    }
    PsiBlocks { n, l_count, blocks }
}

/// `M = C3·(H⊙G)·(U Ψ† U^H)` without materializing the n²×nL Khatri-Rao
/// product: row m of `C3(H⊙G)` is the diagonal of `Hᵀ Γ^(m) G`.
pub fn compute_m(
    c3: &UnfoldedCumulant,
    g: &FilterBank,
    h: &FilterBank,
    pinv_cutoff: f64,
) -> Result<Matrix> {
    let n = c3.dim();
    if g.patch_len() != n || h.patch_len() != n || g.len() != h.len() {
        return Err(Error::Shape("cumulant/bank dimensions disagree".into()));
    }
    let l_count = g.len();
    let nl = n * l_count;

    let psi = psi_build(g, h)?;
    if psi.max_abs() <= f64::MIN_POSITIVE {
        return Err(Error::Degenerate(
            "all Gram kernel diagonals vanish (rank collapse)".into(),
        ));
    }
    let psi_dag = psi_pinv(&psi, pinv_cutoff);

    // B[m, j] = (G_j)ᵀ Γ^(m) H_j with G_j, H_j cyclic shifts of the filters;
    // for symmetric cumulants this is the diagonal of Hᵀ Γ^(m) G.
    let mut b = Matrix::zeros(n, nl);
    for m in 1..=n {
        let gamma = gamma_slice(c3, m)?;
        for j in 0..nl {
            let l = j / n;
            let p0 = j % n;
            let hf = h.filter(l);
            let gf = g.filter(l);
            let mut acc = 0.0;
            for row in 0..n {
                let gv = gf[cyc(row as isize - p0 as isize, n)];
                if gv == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for col in 0..n {
                    inner += gamma.get(row, col) * hf[cyc(col as isize - p0 as isize, n)];
                }
                acc += gv * inner;
            }
            b.set(m - 1, j, acc);
        }
    }

    // K = U Ψ† U^H assembled blockwise: block (j,l) is the circulant whose
    // spectrum is the (j,l) diagonal of Ψ†. Symmetrized Ψ† makes K real.
    let psi_scale = psi_dag.max_abs().max(1.0);
    let mut k_mat = Matrix::zeros(nl, nl);
    for bj in 0..l_count {
        for bl in 0..l_count {
            let first = ifft_real(psi_dag.block(bj, bl), 1e-8 * psi_scale)?;
            for i in 0..n {
                for j in 0..n {
                    k_mat.set(
                        bj * n + i,
                        bl * n + j,
                        first[cyc(i as isize - j as isize, n)],
                    );
                }
            }
        }
    }

    b.matmul(&k_mat)
}

/// Λ update: `λ(i) = ‖M_i‖`, the column norms of M.
pub fn lambda_update(m: &Matrix) -> WeightDiag {
    WeightDiag {
        lambda: (0..m.cols()).map(|j| vec_norm(&m.col(j))).collect(),
    }
}

/// Closed-form filter update from M: per block, de-shift each significant
/// column normalized by its weight, average, and renormalize to the unit
/// sphere. Columns whose weight falls below `cutoff_rel·max λ` are skipped.
pub fn filter_update(m: &Matrix, lam: &WeightDiag, cutoff_rel: f64) -> Result<FilterBank> {
    let n = m.rows();
    if !m.cols().is_multiple_of(n) {
        return Err(Error::Shape(format!(
            "M must be n x nL, got {}x{}",
            n,
            m.cols()
        )));
    }
    let l_count = m.cols() / n;
    let lam_max = lam.lambda.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = cutoff_rel * lam_max;
    let mut filters = Vec::with_capacity(l_count);
    for l in 0..l_count {
        filters.push(block_filter(m, lam, l, cutoff).ok_or_else(|| {
            Error::Degenerate(format!("all columns of block {} are zero", l + 1))
        })?);
    }
    FilterBank::from_filters(filters)
}

/// The per-block closed form; `None` when every column is below the cutoff
/// or the averaged filter has zero norm.
fn block_filter(m: &Matrix, lam: &WeightDiag, l: usize, cutoff: f64) -> Option<Vec<f64>> {
    let n = m.rows();
    let mut f = vec![0.0; n];
    let mut used = 0usize;
    for p0 in 0..n {
        let j = l * n + p0;
        let w = lam.lambda[j];
        if w.abs() <= cutoff || w == 0.0 {
            continue;
        }
        used += 1;
        for p in 0..n {
            let i0 = cyc(p as isize + p0 as isize, n);
            f[p] += m.get(i0, j) / w;
        }
    }
    if used == 0 {
        return None;
    }
    let nrm = vec_norm(&f);
    if nrm == 0.0 {
        return None;
    }
    for v in f.iter_mut() {
        *v /= nrm;
    }
    Some(f)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlsConfig {
    pub max_iters: usize,
    /// Convergence threshold on max filter change between cycles.
    pub tol: f64,
    /// Relative singular-value / pivot cutoff for pseudoinverses.
    pub pinv_cutoff: f64,
    /// Random initializations tried; the best run by reconstruction error is
    /// kept, stopping early once a run fits to near machine precision.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            max_iters: 500,
            tol: 1e-8,
            pinv_cutoff: 1e-8,
            restarts: 5,
            seed: 0,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.tol <= 0.0 || self.pinv_cutoff <= 0.0 || self.restarts == 0
        {
            return Err(Error::Precondition(
                "als config requires positive max_iters, tol, pinv_cutoff, restarts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CtIterStat {
    pub iter: usize,
    pub recon_error: f64,
    pub max_filter_change: f64,
}

#[derive(Debug)]
pub struct CtAlsResult {
    pub f: FilterBank,
    pub g: FilterBank,
    pub h: FilterBank,
    pub lambda: WeightDiag,
    pub trace: Vec<CtIterStat>,
}

/// Dense reconstruction `F Λ (H⊙G)ᵀ` of the unfolded cumulant (desk scale).
pub fn reconstruct_unfolded(
    f: &FilterBank,
    g: &FilterBank,
    h: &FilterBank,
    lam: &WeightDiag,
) -> Matrix {
    let n = f.patch_len();
    let nl = n * f.len();
    let mut out = Matrix::zeros(n, n * n);
    for j in 0..nl {
        let lj = lam.lambda[j];
        if lj == 0.0 {
            continue;
        }
        let fj = f.stacked_column(j);
        let gj = g.stacked_column(j);
        let hj = h.stacked_column(j);
        for i in 0..n {
            let s = lj * fj[i];
            if s == 0.0 {
                continue;
            }
            for a in 0..n {
                let sa = s * hj[a];
                for bcol in 0..n {
                    out.add_at(i, a * n + bcol, sa * gj[bcol]);
                }
            }
        }
    }
    out
}

/// Joint per-block solve of `min ‖blk_l(M) − Cir(f)·Λ_l‖_F` over a unit
/// filter and its weights: the optimum is the dominant principal direction of
/// the de-shifted columns of the block, with `λ_j = ⟨w_j, f⟩`. On exactly
/// circulant input this coincides with [`filter_update`]'s de-shift average;
/// unlike the plain average it stays numerically stable when column weights
/// are uneven, because columns enter with their actual magnitudes.
fn block_principal(m: &Matrix, l: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m.rows();
    let mut w = Matrix::zeros(n, n);
    for p0 in 0..n {
        let j = l * n + p0;
        for p in 0..n {
            w.set(p, p0, m.get(cyc(p as isize + p0 as isize, n), j));
        }
    }
    let gram = w.matmul(&w.transpose()).expect("square");
    if gram.max_abs() == 0.0 {
        return None;
    }
    let (_, vecs) = crate::linalg::sym_eigen(&gram).ok()?;
    let mut f = vecs.col(0);
    // sign convention: nonnegative weight on the largest-norm column
    let norms: Vec<f64> = (0..n).map(|j| vec_norm(&w.col(j))).collect();
    let jmax = (0..n)
        .max_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap())
        .unwrap();
    let dot: f64 = f.iter().zip(&w.col(jmax)).map(|(a, b)| a * b).sum();
    if dot < 0.0 {
        for v in f.iter_mut() {
            *v = -*v;
        }
    }
    let lam: Vec<f64> = (0..n)
        .map(|j| f.iter().zip(&w.col(j)).map(|(a, b)| a * b).sum())
        .collect();
    Some((f, lam))
}

/// One ALS mode update; blocks whose de-shifted columns all vanish keep the
/// previous filter for this cycle.
fn mode_update(
    c3: &UnfoldedCumulant,
    g: &FilterBank,
    h: &FilterBank,
    prev: &FilterBank,
    cutoff_rel: f64,
) -> Result<(FilterBank, WeightDiag)> {
    let m = compute_m(c3, g, h, cutoff_rel)?;
    let n = m.rows();
    let l_count = m.cols() / n;
    let mut filters = Vec::with_capacity(l_count);
    let mut lambda = vec![0.0; n * l_count];
    for l in 0..l_count {
        match block_principal(&m, l) {
            Some((f, lam)) => {
                filters.push(f);
                lambda[l * n..(l + 1) * n].copy_from_slice(&lam);
            }
            None => filters.push(prev.filter(l).to_vec()),
        }
    }
    Ok((FilterBank::from_filters(filters)?, WeightDiag { lambda }))
}

fn max_bank_change(a: &FilterBank, b: &FilterBank) -> f64 {
    let mut worst = 0.0f64;
    for l in 0..a.len() {
        let d: f64 = a
            .filter(l)
            .iter()
            .zip(b.filter(l))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d);
    }
    worst
}

/// One full ALS run from a random initialization.
fn ct_als_attempt<R: Rng + ?Sized>(
    c3: &UnfoldedCumulant,
    l_count: usize,
    config: &AlsConfig,
    c3_norm: f64,
    rng: &mut R,
) -> Result<CtAlsResult> {
    let n = c3.dim();
    let mut f = FilterBank::random(n, l_count, rng);
    let mut g = FilterBank::random(n, l_count, rng);
    let mut h = FilterBank::random(n, l_count, rng);
    let mut lam = WeightDiag {
        lambda: vec![1.0; n * l_count],
    };
    let mut trace = Vec::new();
    for iter in 0..config.max_iters {
        let step = || -> Result<(FilterBank, FilterBank, FilterBank, WeightDiag)> {
            let (f_new, _) = mode_update(c3, &g, &h, &f, config.pinv_cutoff)?;
            let (g_new, _) = mode_update(c3, &h, &f_new, &g, config.pinv_cutoff)?;
            let (h_new, lam_new) = mode_update(c3, &f_new, &g_new, &h, config.pinv_cutoff)?;
            Ok((f_new, g_new, h_new, lam_new))
        };
        let (f_new, g_new, h_new, lam_new) = step().map_err(|e| match e {
            Error::Degenerate(msg) => Error::Degenerate(format!("{msg} (iteration {})", iter + 1)),
            other => other,
        })?;
        let change = max_bank_change(&f_new, &f)
            .max(max_bank_change(&g_new, &g))
            .max(max_bank_change(&h_new, &h));
        f = f_new;
        g = g_new;
        h = h_new;
        lam = lam_new;
        let recon = reconstruct_unfolded(&f, &g, &h, &lam);
        let err = c3.matrix().sub(&recon)?.frob_norm() / c3_norm;
        trace.push(CtIterStat {
            iter: iter + 1,
            recon_error: err,
            max_filter_change: change,
        });
        if change < config.tol {
            break;
        }
    }
    Ok(CtAlsResult {
        f,
        g,
        h,
        lambda: lam,
        trace,
    })
}

/// A run is good enough to stop restarting once it explains the cumulant to
/// near machine precision.
const RESTART_RECON_EXIT: f64 = 1e-7;

/// Convolutional tensor decomposition of an unfolded third cumulant: cycles
/// closed-form circulant-constrained mode updates over F, G, H with Λ
/// refreshed each cycle. Up to `config.restarts` random initializations are
/// tried and the run with the lowest final reconstruction error is returned.
pub fn ct_als<R: Rng + ?Sized>(
    c3: &UnfoldedCumulant,
    l_count: usize,
    config: &AlsConfig,
    rng: &mut R,
) -> Result<CtAlsResult> {
    config.validate()?;
    let n = c3.dim();
    if l_count == 0 || l_count >= n {
        return Err(Error::Precondition(format!(
            "L={l_count} with n={n}: {FULL_RANK_CONDITION}"
        )));
    }
    let c3_norm = c3.matrix().frob_norm();
    if c3_norm == 0.0 {
        return Err(Error::Degenerate("zero cumulant".into()));
    }
    let mut best: Option<CtAlsResult> = None;
    for _ in 0..config.restarts {
        let attempt = ct_als_attempt(c3, l_count, config, c3_norm, rng)?;
        let err = attempt.trace.last().map_or(f64::INFINITY, |t| t.recon_error);
        let better = best
            .as_ref()
            .and_then(|b| b.trace.last())
            .is_none_or(|t| err < t.recon_error);
        if better {
            best = Some(attempt);
        }
        if err < RESTART_RECON_EXIT {
            break;
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Mean ℓ2 distance between banks, minimized over filter permutations, all
/// cyclic shifts per filter, and (by default) per-filter sign flips.
pub fn filter_recovery_error(est: &FilterBank, truth: &FilterBank) -> Result<f64> {
    filter_recovery_error_opts(est, truth, true)
}

pub fn filter_recovery_error_opts(
    est: &FilterBank,
    truth: &FilterBank,
    allow_sign: bool,
) -> Result<f64> {
    if est.patch_len() != truth.patch_len() || est.len() != truth.len() {
        return Err(Error::Shape("bank shapes differ".into()));
    }
    let n = est.patch_len();
    let l_count = est.len();
    // cost[a][b] = best distance between est filter a and truth filter b
    let mut cost = vec![vec![f64::INFINITY; l_count]; l_count];
    for a in 0..l_count {
        for b in 0..l_count {
            let fa = est.filter(a);
            let fb = truth.filter(b);
            let mut best = f64::INFINITY;
            for s in 0..n {
                for &sign in if allow_sign { &[1.0, -1.0][..] } else { &[1.0][..] } {
                    let mut d2 = 0.0;
                    for p in 0..n {
                        let diff = sign * fa[cyc(p as isize - s as isize, n)] - fb[p];
                        d2 += diff * diff;
                    }
                    best = best.min(d2.sqrt());
                }
            }
            cost[a][b] = best;
        }
    }
    // minimize the mean assignment cost over permutations
    let mut perm: Vec<usize> = (0..l_count).collect();
    let mut best = f64::INFINITY;
    permute_min(&mut perm, 0, &cost, &mut best);
    Ok(best / l_count as f64)
}

fn permute_min(perm: &mut Vec<usize>, k: usize, cost: &[Vec<f64>], best: &mut f64) {
    let l_count = perm.len();
    if k == l_count {
        let total: f64 = (0..l_count).map(|a| cost[a][perm[a]]).sum();
        if total < *best {
            *best = total;
        }
        return;
    }
    for i in k..l_count {
        perm.swap(k, i);
        permute_min(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

#[derive(Debug, Clone)]
pub struct AltMinIterStat {
    pub iter: usize,
    /// objective after the activation half-step
    pub obj_activations: f64,
    /// objective after the filter half-step, before renormalization
    pub obj_filters_prenorm: f64,
    /// objective after renormalizing the filters
    pub obj_after_norm: f64,
}

#[derive(Debug)]
pub struct AltMinResult {
    pub filters: FilterBank,
    pub activations: Matrix,
    pub trace: Vec<AltMinIterStat>,
}

const RIDGE: f64 = 1e-8;

fn spd_solve_with_ridge(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    match chol_solve(a, b) {
        Ok(x) => Ok(x),
        Err(_) => {
            let mut ar = a.clone();
            let scale = a.max_abs().max(1.0);
            for i in 0..a.rows() {
                ar.add_at(i, i, RIDGE * scale);
            }
            chol_solve(&ar, b)
        }
    }
}

fn altmin_objective(samples: &SampleSet, filters: &FilterBank, acts: &Matrix) -> f64 {
    let n = samples.dim();
    let nl = acts.rows();
    let mut total = 0.0;
    for s in 0..samples.len() {
        let x = samples.sample(s);
        let mut rec = vec![0.0; n];
        for j in 0..nl {
            let w = acts.get(j, s);
            if w == 0.0 {
                continue;
            }
            let col = filters.stacked_column(j);
            for i in 0..n {
                rec[i] += w * col[i];
            }
        }
        total += x
            .iter()
            .zip(&rec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    total
}

/// Alternating-minimization baseline for `min ‖x − Σ_l f_l ∗ w_l‖²` over all
/// samples: exact least squares for the activations given filters (min-norm
/// per sample), then for the filters given activations, renormalizing filters
/// to the unit sphere after each update.
pub fn alt_min_baseline<R: Rng + ?Sized>(
    samples: &SampleSet,
    l_count: usize,
    config: &AlsConfig,
    rng: &mut R,
) -> Result<AltMinResult> {
    let n = samples.dim();
    if l_count == 0 || l_count >= n {
        return Err(Error::Precondition(format!(
            "L={l_count} with n={n}: {FULL_RANK_CONDITION}"
        )));
    }
    let init = FilterBank::random(n, l_count, rng);
    alt_min_with_init(samples, init, config)
}

/// Alternating minimization from an explicit starting bank.
pub fn alt_min_with_init(
    samples: &SampleSet,
    init: FilterBank,
    config: &AlsConfig,
) -> Result<AltMinResult> {
    config.validate()?;
    let n = samples.dim();
    let l_count = init.len();
    if init.patch_len() != n {
        return Err(Error::Shape("filter length vs sample dimension".into()));
    }
    let n_s = samples.len();
    let nl = n * l_count;
    let mut filters = init;
    let mut acts = Matrix::zeros(nl, n_s);
    let mut trace = Vec::new();
    for iter in 0..config.max_iters {
        // activations given filters: min-norm least squares w = Fᵀ(FFᵀ)⁻¹x
        let fd = filters.stacked_dense();
        let gram = fd.matmul(&fd.transpose())?;
        for s in 0..n_s {
            let x = samples.sample(s);
            let y = spd_solve_with_ridge(&gram, &x)?;
            let w = fd.transpose().matvec(&y)?;
            acts.set_col(s, &w);
        }
        let obj_w = altmin_objective(samples, &filters, &acts);

        // filters given activations: least squares on stacked filter vector
        let mut a = Matrix::zeros(nl, nl);
        let mut rhs = vec![0.0; nl];
        for s in 0..n_s {
            let x = samples.sample(s);
            // W_s = [Cir(w_1), …, Cir(w_L)] for this sample's activations
            let mut wcols = Vec::with_capacity(nl);
            for l in 0..l_count {
                let wl: Vec<f64> = (0..n).map(|i| acts.get(l * n + i, s)).collect();
                for p0 in 0..n {
                    let col: Vec<f64> = (0..n)
                        .map(|i| wl[cyc(i as isize - p0 as isize, n)])
                        .collect();
                    wcols.push(col);
                }
            }
            for p in 0..nl {
                let cp = &wcols[p];
                rhs[p] += cp.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>();
                for q in p..nl {
                    let dot = cp.iter().zip(&wcols[q]).map(|(u, v)| u * v).sum::<f64>();
                    a.add_at(p, q, dot);
                    if q != p {
                        a.add_at(q, p, dot);
                    }
                }
            }
        }
        let phi = spd_solve_with_ridge(&a, &rhs)?;
        let raw: Vec<Vec<f64>> = (0..l_count)
            .map(|l| phi[l * n..(l + 1) * n].to_vec())
            .collect();
        let obj_f = altmin_objective_raw(samples, &raw, &acts);
        let new_filters = bank_from_raw_keeping_previous(&raw, &filters);
        let obj_norm = altmin_objective(samples, &new_filters, &acts);
        let change = max_bank_change(&new_filters, &filters);
        filters = new_filters;
        trace.push(AltMinIterStat {
            iter: iter + 1,
            obj_activations: obj_w,
            obj_filters_prenorm: obj_f,
            obj_after_norm: obj_norm,
        });
        if change < config.tol {
            break;
        }
    }
    // final decode so activations match the returned filters
    let fd = filters.stacked_dense();
    let gram = fd.matmul(&fd.transpose())?;
    for s in 0..n_s {
        let x = samples.sample(s);
        let y = spd_solve_with_ridge(&gram, &x)?;
        let w = fd.transpose().matvec(&y)?;
        acts.set_col(s, &w);
    }
    Ok(AltMinResult {
        filters,
        activations: acts,
        trace,
    })
}

/// Objective with the raw (un-normalized) filter solution in place.
fn altmin_objective_raw(samples: &SampleSet, raw: &[Vec<f64>], acts: &Matrix) -> f64 {
    let n = samples.dim();
    let mut total = 0.0;
    for s in 0..samples.len() {
        let x = samples.sample(s);
        let mut rec = vec![0.0; n];
        for (l, f) in raw.iter().enumerate() {
            for p0 in 0..n {
                let w = acts.get(l * n + p0, s);
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    rec[i] += w * f[cyc(i as isize - p0 as isize, n)];
                }
            }
        }
        total += x
            .iter()
            .zip(&rec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    total
}

fn bank_from_raw_keeping_previous(raw: &[Vec<f64>], prev: &FilterBank) -> FilterBank {
    let filters: Vec<Vec<f64>> = raw
        .iter()
        .enumerate()
        .map(|(l, f)| {
            let nrm = vec_norm(f);
            if nrm == 0.0 {
                prev.filter(l).to_vec()
            } else {
                f.iter().map(|v| v / nrm).collect()
            }
        })
        .collect();
    FilterBank::from_filters(filters).expect("normalized filters")
}
