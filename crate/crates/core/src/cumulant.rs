//! Third-order cumulants in unfolded matrix form, slice matricization, and
//! synthetic convolutional-ICA sample generators.
//!
//! The unfolded cumulant is `C3 = E[x(x⊙x)ᵀ] − unfold(Z)` with the shift
//! correction `Z(a,b,c) = E[x_a]E[x_b x_c] + E[x_b]E[x_a x_c] +
//! E[x_c]E[x_a x_b] − 2E[x_a]E[x_b]E[x_c]`. Empirical expectations use plain
//! 1/N averaging; the brute-force oracle in the tests uses the same
//! estimator, so agreement there is exact rather than statistical.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::circulant::{cyc, cyclic_conv};
use crate::conv_als::FilterBank;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Observations stacked column-wise: an n×N matrix.
#[derive(Debug, Clone)]
pub struct SampleSet {
    x: Matrix,
}

impl SampleSet {
    pub fn from_matrix(x: Matrix) -> Result<Self> {
        if x.cols() == 0 {
            return Err(Error::InsufficientSamples { need: 1, got: 0 });
        }
        Ok(SampleSet { x })
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn len(&self) -> usize {
        self.x.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn sample(&self, s: usize) -> Vec<f64> {
        self.x.col(s)
    }
}

/// Distribution of the activation-map entries.
#[derive(Debug, Clone, Copy)]
pub enum ActivationSpec {
    /// Poisson with the given mean; its third cumulant equals the mean.
    Poisson { mean: f64 },
    /// w = b·g with b ~ Bernoulli(prob), g ~ N(0, sigma²). Symmetric, so its
    /// third cumulant vanishes; useful for moment tests, not for recovery.
    BernoulliGaussian { prob: f64, sigma: f64 },
}

impl ActivationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ActivationSpec::Poisson { mean } => mean > 0.0,
            ActivationSpec::BernoulliGaussian { prob, sigma } => {
                (0.0..=1.0).contains(&prob) && sigma > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("bad activation params {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ActivationSpec::Poisson { mean } => mean,
            ActivationSpec::BernoulliGaussian { .. } => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ActivationSpec::Poisson { mean } => mean,
            ActivationSpec::BernoulliGaussian { prob, sigma } => prob * sigma * sigma,
        }
    }

    /// Third cumulant of a single activation entry.
    pub fn third_cumulant(&self) -> f64 {
        match *self {
            ActivationSpec::Poisson { mean } => mean,
            ActivationSpec::BernoulliGaussian { .. } => 0.0,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ActivationSpec::Poisson { mean } => {
                Poisson::new(mean).expect("validated").sample(rng)
            }
            ActivationSpec::BernoulliGaussian { prob, sigma } => {
                if rng.gen_bool(prob) {
                    let g: f64 = rng.sample(StandardNormal);
                    sigma * g
                } else {
                    0.0
                }
            }
        }
    }
}

/// Unfolded third-order cumulant: an n×n² matrix plus its dimension.
#[derive(Debug, Clone)]
pub struct UnfoldedCumulant {
    c3: Matrix,
    n: usize,
}

impl UnfoldedCumulant {
    pub fn from_matrix(c3: Matrix) -> Result<Self> {
        let n = c3.rows();
        if c3.cols() != n * n {
            return Err(Error::Shape(format!(
                "unfolded cumulant must be n x n^2, got {}x{}",
                c3.rows(),
                c3.cols()
            )));
        }
        Ok(UnfoldedCumulant { c3, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.c3
    }
}

struct MomentSums {
    m1: Vec<f64>,
    m2: Vec<f64>,
    m3: Vec<f64>,
}

fn accumulate_chunk(x: &Matrix, lo: usize, hi: usize) -> MomentSums {
    let n = x.rows();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n * n];
    let mut m3 = vec![0.0; n * n * n];
    let mut pair = vec![0.0; n * n];
    for s in lo..hi {
        let xs = x.col(s);
        for a in 0..n {
            for b in 0..n {
                pair[a * n + b] = xs[a] * xs[b];
            }
        }
        for i in 0..n {
            m1[i] += xs[i];
            let row = &mut m3[i * n * n..(i + 1) * n * n];
            let xi = xs[i];
            for (r, &p) in row.iter_mut().zip(pair.iter()) {
                *r += xi * p;
            }
        }
        for (acc, &p) in m2.iter_mut().zip(pair.iter()) {
            *acc += p;
        }
    }
    MomentSums { m1, m2, m3 }
}

/// Empirical unfolded third cumulant of a sample set, in one streaming pass.
///
/// Accumulation runs over fixed-size sample chunks that are reduced in chunk
/// order, so the result does not depend on the number of worker threads.
pub fn third_cumulant(samples: &SampleSet) -> Result<UnfoldedCumulant> {
    let n_samples = samples.len();
    if n_samples < 2 {
        return Err(Error::InsufficientSamples {
            need: 2,
            got: n_samples,
        });
    }
    let n = samples.dim();
    const CHUNK: usize = 4096;
    let ranges: Vec<(usize, usize)> = (0..n_samples)
        .step_by(CHUNK)
        .map(|lo| (lo, (lo + CHUNK).min(n_samples)))
        .collect();
    let partials: Vec<MomentSums> = ranges
        .par_iter()
        .map(|&(lo, hi)| accumulate_chunk(samples.matrix(), lo, hi))
        .collect();

    let scale = 1.0 / n_samples as f64;
    let mut mu1 = vec![0.0; n];
    let mut mu2 = vec![0.0; n * n];
    let mut mu3 = vec![0.0; n * n * n];
    for p in &partials {
        for (a, v) in mu1.iter_mut().zip(&p.m1) {
            *a += v;
        }
        for (a, v) in mu2.iter_mut().zip(&p.m2) {
            *a += v;
        }
        for (a, v) in mu3.iter_mut().zip(&p.m3) {
            *a += v;
        }
    }
    for v in mu1.iter_mut() {
        *v *= scale;
    }
    for v in mu2.iter_mut() {
        *v *= scale;
    }
    for v in mu3.iter_mut() {
        *v *= scale;
    }

    // C3[i, a·n+b] = μ3(i,a,b) − Z(i,a,b); Z symmetric in its arguments.
    let mut c3 = Matrix::zeros(n, n * n);
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                let z = mu1[i] * mu2[a * n + b]
                    + mu1[a] * mu2[i * n + b]
                    + mu1[b] * mu2[i * n + a]
                    - 2.0 * mu1[i] * mu1[a] * mu1[b];
                c3.set(i, a * n + b, mu3[i * n * n + a * n + b] - z);
            }
        }
    }
    UnfoldedCumulant::from_matrix(c3)
}

/// Matricize row m (1-based) of the unfolding: `Γ^(m)(i,j) = C3(m, i+(j−1)n)`.
pub fn gamma_slice(c3: &UnfoldedCumulant, m: usize) -> Result<Matrix> {
    let n = c3.dim();
    if m == 0 || m > n {
        return Err(Error::IndexOutOfRange { index: m, max: n });
    }
    let m0 = m - 1;
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g.set(i, j, c3.matrix().get(m0, j * n + i));
        }
    }
    Ok(g)
}

/// Reassemble the unfolded cumulant from its n slice matricizations.
pub fn stack_slices(slices: &[Matrix]) -> Result<UnfoldedCumulant> {
    let n = slices.len();
    let mut c3 = Matrix::zeros(n, n * n);
    for (m0, g) in slices.iter().enumerate() {
        if g.rows() != n || g.cols() != n {
            return Err(Error::Shape("slice matricization must be n x n".into()));
        }
        for i in 0..n {
            for j in 0..n {
                c3.set(m0, j * n + i, g.get(i, j));
            }
        }
    }
    UnfoldedCumulant::from_matrix(c3)
}

/// Draw N samples of the convolutional ICA model `x = Σ_l f_l ∗ w_l`.
/// Returns the samples and the ground-truth activations (stacked per filter).
pub fn synth_conv_ica<R: Rng + ?Sized>(
    filters: &FilterBank,
    act: ActivationSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<(SampleSet, Matrix)> {
    synth_conv_ica_noisy(filters, act, 0.0, n_samples, rng)
}

/// Like [`synth_conv_ica`] with additive N(0, noise_sigma²) observation
/// noise. Odd cumulants of symmetric noise vanish, so the third cumulant is
/// unaffected in expectation.
pub fn synth_conv_ica_noisy<R: Rng + ?Sized>(
    filters: &FilterBank,
    act: ActivationSpec,
    noise_sigma: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(SampleSet, Matrix)> {
    act.validate()?;
    if n_samples == 0 {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    let n = filters.patch_len();
    let l_count = filters.len();
    let mut x = Matrix::zeros(n, n_samples);
    let mut w_all = Matrix::zeros(n * l_count, n_samples);
    let mut w = vec![0.0; n];
    for s in 0..n_samples {
        let mut xs = vec![0.0; n];
        for l in 0..l_count {
            for (j, v) in w.iter_mut().enumerate() {
                *v = act.draw(rng);
                w_all.set(l * n + j, s, *v);
            }
            let conv = cyclic_conv(filters.filter(l), &w)?;
            for (a, c) in xs.iter_mut().zip(conv) {
                *a += c;
            }
        }
        if noise_sigma > 0.0 {
            for a in xs.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *a += noise_sigma * g;
            }
        }
        x.set_col(s, &xs);
    }
    Ok((SampleSet::from_matrix(x)?, w_all))
}

/// Convolutional ICA samples with position-dependent Poisson activations:
/// entry j of the stacked activation vector has mean `means[j]`, so the
/// planted third-cumulant weights are exactly `means`. Entries remain
/// independent (a product distribution), just not identically distributed.
pub fn synth_conv_ica_positional<R: Rng + ?Sized>(
    filters: &FilterBank,
    means: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<(SampleSet, Matrix)> {
    let n = filters.patch_len();
    let l_count = filters.len();
    if means.len() != n * l_count {
        return Err(Error::Shape(format!(
            "need {} activation means, got {}",
            n * l_count,
            means.len()
        )));
    }
    if means.iter().any(|&m| m <= 0.0) {
        return Err(Error::Precondition("Poisson means must be positive".into()));
    }
    if n_samples == 0 {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    let dists: Vec<Poisson<f64>> = means
        .iter()
        .map(|&m| Poisson::new(m).expect("validated"))
        .collect();
    let mut x = Matrix::zeros(n, n_samples);
    let mut w_all = Matrix::zeros(n * l_count, n_samples);
    let mut w = vec![0.0; n];
    for s in 0..n_samples {
        let mut xs = vec![0.0; n];
        for l in 0..l_count {
            for (j, v) in w.iter_mut().enumerate() {
                *v = dists[l * n + j].sample(rng);
                w_all.set(l * n + j, s, *v);
            }
            let conv = cyclic_conv(filters.filter(l), &w)?;
            for (a, c) in xs.iter_mut().zip(conv) {
                *a += c;
            }
        }
        x.set_col(s, &xs);
    }
    Ok((SampleSet::from_matrix(x)?, w_all))
}

/// Model-exact unfolded cumulant `C3 = Σ_j λ_j F_j (F_j ⊙ F_j)ᵀ`, where the
/// F_j are the nL cyclic shifts of the filters. Never forms anything larger
/// than n×nL.
pub fn cumulant_from_model(filters: &FilterBank, lambdas: &[f64]) -> Result<UnfoldedCumulant> {
    let n = filters.patch_len();
    let l_count = filters.len();
    if lambdas.len() != n * l_count {
        return Err(Error::Shape(format!(
            "need {} weights, got {}",
            n * l_count,
            lambdas.len()
        )));
    }
    let mut c3 = Matrix::zeros(n, n * n);
    let mut col = vec![0.0; n];
    for l in 0..l_count {
        let f = filters.filter(l);
        for p0 in 0..n {
            let lam = lambdas[l * n + p0];
            if lam == 0.0 {
                continue;
            }
            for (i, c) in col.iter_mut().enumerate() {
                *c = f[cyc(i as isize - p0 as isize, n)];
            }
            for i in 0..n {
                let s = lam * col[i];
                for a in 0..n {
                    let sa = s * col[a];
                    for b in 0..n {
                        c3.add_at(i, a * n + b, sa * col[b]);
                    }
                }
            }
        }
    }
    UnfoldedCumulant::from_matrix(c3)
}
