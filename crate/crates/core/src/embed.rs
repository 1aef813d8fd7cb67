//! Word-sequence embedding pipeline: one-hot encoding, PCA projection,
//! per-coordinate filter learning over patches, deconvolutional decoding of
//! whole sequences, max-k pooling, and the evaluation feature constructions.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circulant::{fft_real, ifft_real};
use crate::conv_als::{ct_als, AlsConfig, FilterBank};
use crate::cumulant::{third_cumulant, SampleSet};
use crate::error::{Error, Result};
use crate::io::{read_matrix_dtns, write_matrix_dtns};
use crate::linalg::sym_eigen;
use crate::matrix::Matrix;

/// Ordered token → index map (1..d in the docs, 0-based in storage).
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Precondition(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Vocabulary in first-occurrence order over a tokenized corpus.
    pub fn from_corpus(corpus: &[Vec<String>]) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut seen = HashMap::new();
        for seq in corpus {
            for t in seq {
                if !seen.contains_key(t) {
                    seen.insert(t.clone(), tokens.len());
                    tokens.push(t.clone());
                }
            }
        }
        Vocab::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// What to do with tokens missing from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Drop the token (its column is omitted); the count is reported back.
    Skip,
    Error,
}

/// One-hot encoding of a token sequence; columns preserve sequence order.
pub struct Encoded {
    pub matrix: Matrix,
    pub skipped: usize,
}

pub fn encode_one_hot(tokens: &[String], vocab: &Vocab, policy: OovPolicy) -> Result<Encoded> {
    let d = vocab.len();
    let mut cols = Vec::new();
    let mut skipped = 0;
    for t in tokens {
        match vocab.index_of(t) {
            Some(i) => cols.push(i),
            None => match policy {
                OovPolicy::Skip => skipped += 1,
                OovPolicy::Error => {
                    return Err(Error::Precondition(format!("token {t:?} not in vocabulary")))
                }
            },
        }
    }
    let mut m = Matrix::zeros(d, cols.len());
    for (t, &i) in cols.iter().enumerate() {
        m.set(i, t, 1.0);
    }
    Ok(Encoded { matrix: m, skipped })
}

/// Result of fitting the projection basis. `effective_k < requested_k` means
/// the stacked encoding matrix had lower rank and k was reduced.
pub struct ProjectionFit {
    pub basis: Matrix,
    pub requested_k: usize,
    pub effective_k: usize,
}

/// Top-k left singular vectors of the stacked encoding matrix
/// `S = [S_seq1, …, S_seqM]`, via the eigendecomposition of S·Sᵀ.
///
/// Sign convention: the largest-magnitude entry of every column is made
/// positive, so the basis is reproducible across runs.
pub fn fit_projection(corpus: &[Vec<String>], vocab: &Vocab, k: usize) -> Result<ProjectionFit> {
    if corpus.is_empty() {
        return Err(Error::Precondition("empty corpus".into()));
    }
    let d = vocab.len();
    if k == 0 || k > d {
        return Err(Error::Precondition(format!("k={k} out of range 1..={d}")));
    }
    // gram = S·Sᵀ accumulated sequence by sequence
    let mut gram = Matrix::zeros(d, d);
    for seq in corpus {
        let enc = encode_one_hot(seq, vocab, OovPolicy::Skip)?;
        let s = enc.matrix;
        for t in 0..s.cols() {
            let col = s.col(t);
            for i in 0..d {
                if col[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    if col[j] != 0.0 {
                        gram.add_at(i, j, col[i] * col[j]);
                    }
                }
            }
        }
    }
    let (vals, vecs) = sym_eigen(&gram)?;
    let tol = vals.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
    let rank = vals.iter().filter(|&&v| v > tol).count();
    let effective_k = k.min(rank.max(1));
    let mut basis = Matrix::zeros(d, effective_k);
    for j in 0..effective_k {
        let mut col = vecs.col(j);
        // deterministic sign: largest-magnitude entry positive
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
        basis.set_col(j, &col);
    }
    Ok(ProjectionFit {
        basis,
        requested_k: k,
        effective_k,
    })
}

/// Project an encoded sequence: `Y = Uᵀ·S`.
pub fn project(senc: &Matrix, basis: &Matrix) -> Result<Matrix> {
    if senc.rows() != basis.rows() {
        return Err(Error::Shape(format!(
            "encoding has {} rows, basis {}",
            senc.rows(),
            basis.rows()
        )));
    }
    basis.transpose().matmul(senc)
}

/// Sliding patches of length n, stride 1, tail zero-padded so every position
/// starts a patch. A sequence of length N yields N patches; N = 0 yields none.
pub fn extract_patches(y: &[f64], n: usize) -> Vec<Vec<f64>> {
    assert!(n >= 1, "patch length must be at least 1");
    (0..y.len())
        .map(|start| {
            (0..n)
                .map(|o| y.get(start + o).copied().unwrap_or(0.0))
                .collect()
        })
        .collect()
}

/// Learn one coordinate's filter bank from that coordinate's signals.
/// Returns `None` when every patch is zero (inactive coordinate).
pub fn fit_bank_from_signals(
    signals: &[Vec<f64>],
    patch_len: usize,
    l_filters: usize,
    config: &AlsConfig,
) -> Result<Option<FilterBank>> {
    let mut patches = Vec::new();
    for y in signals {
        patches.extend(extract_patches(y, patch_len));
    }
    if patches.len() < 2 {
        return Ok(None);
    }
    let all_zero = patches.iter().all(|p| p.iter().all(|&v| v == 0.0));
    if all_zero {
        return Ok(None);
    }
    let mut x = Matrix::zeros(patch_len, patches.len());
    for (s, p) in patches.iter().enumerate() {
        x.set_col(s, p);
    }
    let samples = SampleSet::from_matrix(x)?;
    let c3 = third_cumulant(&samples)?;
    if c3.matrix().frob_norm() == 0.0 {
        return Ok(None);
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let result = ct_als(&c3, l_filters, config, &mut rng)?;
    Ok(Some(result.f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    /// projection rank
    pub k: usize,
    /// patch (filter) length n
    pub patch_len: usize,
    /// filters per coordinate L
    pub l_filters: usize,
    /// pooled activations kept per channel
    pub kpool: usize,
    pub oov: OovPolicy,
    pub als: AlsConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            k: 8,
            patch_len: 5,
            l_filters: 3,
            kpool: 2,
            oov: OovPolicy::Skip,
            als: AlsConfig::default(),
        }
    }
}

/// Trained embedding model: projection basis plus one filter bank per
/// projected coordinate (inactive coordinates carry no bank and decode to
/// zeros).
pub struct EmbedModel {
    pub vocab: Vocab,
    pub basis: Matrix,
    pub banks: Vec<Option<FilterBank>>,
    pub patch_len: usize,
    pub l_filters: usize,
    pub kpool: usize,
    pub oov: OovPolicy,
}

impl EmbedModel {
    pub fn k(&self) -> usize {
        self.basis.cols()
    }

    /// Length contract of every embedding this model produces.
    pub fn embedding_len(&self) -> usize {
        self.k() * self.l_filters * self.kpool
    }
}

/// Train the full pipeline: fit the projection, then learn one filter bank
/// per coordinate from that coordinate's patches (coordinates are
/// independent and trained in parallel with per-coordinate seeds).
pub fn train_embed_model(
    corpus: &[Vec<String>],
    vocab: Vocab,
    config: &EmbedConfig,
) -> Result<EmbedModel> {
    if config.l_filters >= config.patch_len {
        return Err(Error::Precondition(format!(
            "L={} with n={}: {}",
            config.l_filters,
            config.patch_len,
            crate::conv_als::FULL_RANK_CONDITION
        )));
    }
    if config.kpool == 0 {
        return Err(Error::Precondition("kpool must be >= 1".into()));
    }
    let fit = fit_projection(corpus, &vocab, config.k)?;
    // per-coordinate signals
    let mut signals: Vec<Vec<Vec<f64>>> = vec![Vec::new(); fit.effective_k];
    for seq in corpus {
        let enc = encode_one_hot(seq, &vocab, config.oov)?;
        let y = project(&enc.matrix, &fit.basis)?;
        for (j, sig) in signals.iter_mut().enumerate() {
            sig.push(y.row(j).to_vec());
        }
    }
    let banks: Vec<Result<Option<FilterBank>>> = signals
        .par_iter()
        .enumerate()
        .map(|(j, sig)| {
            let mut cfg = config.als.clone();
            cfg.seed = config.als.seed.wrapping_add(j as u64);
            fit_bank_from_signals(sig, config.patch_len, config.l_filters, &cfg)
        })
        .collect();
    let banks: Result<Vec<Option<FilterBank>>> = banks.into_iter().collect();
    Ok(EmbedModel {
        vocab,
        basis: fit.basis,
        banks: banks?,
        patch_len: config.patch_len,
        l_filters: config.l_filters,
        kpool: config.kpool,
        oov: config.oov,
    })
}

/// Deconvolutional decoding: least-norm solution of `y = Σ_l f̃_l ∗ w_l` with
/// the filters zero-padded to the sequence length, solved per FFT frequency
/// by the pseudoinverse of the length-L spectral vector. Frequencies where
/// every filter vanishes contribute zero.
pub fn deconv_decode(y: &[f64], bank: &FilterBank) -> Result<Vec<f64>> {
    let n = bank.patch_len();
    let len = y.len().max(n);
    let mut ypad = y.to_vec();
    ypad.resize(len, 0.0);
    let yf = fft_real(&ypad);
    let l_count = bank.len();
    let mut spectra = Vec::with_capacity(l_count);
    for l in 0..l_count {
        let mut f = bank.filter(l).to_vec();
        f.resize(len, 0.0);
        spectra.push(fft_real(&f));
    }
    // per frequency: w_l(ω) = conj(s_l)·ŷ / Σ_j |s_j|²
    let mut denom = vec![0.0f64; len];
    for s in &spectra {
        for (d, v) in denom.iter_mut().zip(s) {
            *d += v.norm_sqr();
        }
    }
    let max_denom = denom.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = max_denom * 1e-12;
    let mut out = Vec::with_capacity(len * l_count);
    for s in &spectra {
        let wf: Vec<Complex64> = s
            .iter()
            .zip(&yf)
            .zip(&denom)
            .map(|((sl, yv), &dn)| {
                if dn <= cutoff || dn == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    sl.conj() * yv / dn
                }
            })
            .collect();
        out.extend(ifft_real(&wf, 1e-7)?);
    }
    Ok(out)
}

/// Synthesis adjoint of [`deconv_decode`]: `Σ_l f̃_l ∗ w_l` at length `len`.
pub fn conv_synthesize(bank: &FilterBank, w: &[f64], len: usize) -> Result<Vec<f64>> {
    let l_count = bank.len();
    if w.len() != len * l_count {
        return Err(Error::Shape(format!(
            "activation length {} vs {}·{}",
            w.len(),
            len,
            l_count
        )));
    }
    let mut out = vec![0.0; len];
    for l in 0..l_count {
        let mut f = bank.filter(l).to_vec();
        f.resize(len, 0.0);
        let conv = crate::circulant::cyclic_conv(&f, &w[l * len..(l + 1) * len])?;
        for (o, c) in out.iter_mut().zip(conv) {
            *o += c;
        }
    }
    Ok(out)
}

/// The kpool largest values of one channel in descending order; channels
/// shorter than kpool are padded with the channel minimum (zeros if empty).
pub fn max_k_pool(channel: &[f64], kpool: usize) -> Vec<f64> {
    assert!(kpool >= 1, "kpool must be at least 1");
    let mut sorted = channel.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let pad = sorted.last().copied().unwrap_or(0.0);
    sorted.truncate(kpool);
    while sorted.len() < kpool {
        sorted.push(pad);
    }
    sorted
}

/// Position-aware variant of [`max_k_pool`]: the kpool largest values in
/// descending order together with their 0-based channel positions. The
/// pipeline itself pools values only; this is the opt-in alternative.
pub fn max_k_pool_indexed(channel: &[f64], kpool: usize) -> Vec<(usize, f64)> {
    assert!(kpool >= 1, "kpool must be at least 1");
    let mut indexed: Vec<(usize, f64)> = channel.iter().copied().enumerate().collect();
    indexed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let pad = indexed.last().copied().unwrap_or((0, 0.0));
    indexed.truncate(kpool);
    while indexed.len() < kpool {
        indexed.push(pad);
    }
    indexed
}

/// Pool a stacked activation vector channel by channel.
pub fn pool_activations(w: &[f64], l_count: usize, kpool: usize) -> Vec<f64> {
    if l_count == 0 {
        return Vec::new();
    }
    let chan = w.len() / l_count;
    let mut out = Vec::with_capacity(l_count * kpool);
    for l in 0..l_count {
        out.extend(max_k_pool(&w[l * chan..(l + 1) * chan], kpool));
    }
    out
}

/// Embed a token sequence: encode → project → decode per coordinate → pool →
/// concatenate (coordinate-major, filter-minor). Output length is always
/// `k·L·kpool`; inactive coordinates contribute zeros.
pub fn embed(tokens: &[String], model: &EmbedModel) -> Result<Vec<f64>> {
    let enc = encode_one_hot(tokens, &model.vocab, model.oov)?;
    let y = project(&enc.matrix, &model.basis)?;
    let mut out = Vec::with_capacity(model.embedding_len());
    for j in 0..model.k() {
        match &model.banks[j] {
            Some(bank) => {
                let w = deconv_decode(y.row(j), bank)?;
                out.extend(pool_activations(&w, model.l_filters, model.kpool));
            }
            None => out.extend(vec![0.0; model.l_filters * model.kpool]),
        }
    }
    Ok(out)
}

/// Pair features `[wL .* wR, |wL − wR|]` (elementwise product then
/// elementwise absolute difference).
pub fn pair_features(left: &[f64], right: &[f64]) -> Result<Vec<f64>> {
    if left.len() != right.len() {
        return Err(Error::Shape(format!(
            "pair lengths {} vs {}",
            left.len(),
            right.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * left.len());
    out.extend(left.iter().zip(right).map(|(a, b)| a * b));
    out.extend(left.iter().zip(right).map(|(a, b)| (a - b).abs()));
    Ok(out)
}

/// Variant with the scalar norm in place of the elementwise difference:
/// `[wL .* wR, ‖wL − wR‖]`.
pub fn pair_features_norm(left: &[f64], right: &[f64]) -> Result<Vec<f64>> {
    if left.len() != right.len() {
        return Err(Error::Shape(format!(
            "pair lengths {} vs {}",
            left.len(),
            right.len()
        )));
    }
    let mut out = Vec::with_capacity(left.len() + 1);
    out.extend(left.iter().zip(right).map(|(a, b)| a * b));
    let norm: f64 = left
        .iter()
        .zip(right)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    out.push(norm);
    Ok(out)
}

/// Discretize a gold similarity rating τ ∈ [K1,K2] into a probability vector
/// p of length K2−K1+1 with `p_i = ⌊τ⌋−τ+1` at `i = ⌊τ⌋+1−K1` and
/// `p_i = τ−⌊τ⌋` at `i = ⌊τ⌋+2−K1` (1-based), zero elsewhere.
pub fn discretize_similarity(tau: f64, k1: i64, k2: i64) -> Result<Vec<f64>> {
    if k1 >= k2 {
        return Err(Error::Precondition(format!("need K1 < K2, got {k1},{k2}")));
    }
    if !(k1 as f64 <= tau && tau <= k2 as f64) {
        return Err(Error::Precondition(format!(
            "rating {tau} outside [{k1},{k2}]"
        )));
    }
    let len = (k2 - k1 + 1) as usize;
    let mut p = vec![0.0; len];
    let floor = tau.floor();
    let lo = (floor as i64 + 1 - k1) as usize; // 1-based
    p[lo - 1] = floor - tau + 1.0;
    let hi = lo + 1;
    if hi <= len {
        p[hi - 1] = tau - floor;
    }
    Ok(p)
}

/// `Σ (K1+i−1)·p_i`: inverse of [`discretize_similarity`].
pub fn expected_rating(p: &[f64], k1: i64) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i0, &v)| (k1 + i0 as i64) as f64 * v)
        .sum()
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    k: usize,
    patch_len: usize,
    l_filters: usize,
    kpool: usize,
    oov: OovPolicy,
    vocab: Vec<String>,
    active_banks: Vec<bool>,
}

/// Save a model as a JSON manifest plus .dtns arrays in `dir`.
pub fn save_model(dir: &Path, model: &EmbedModel) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = ModelManifest {
        k: model.k(),
        patch_len: model.patch_len,
        l_filters: model.l_filters,
        kpool: model.kpool,
        oov: model.oov,
        vocab: model.vocab.tokens().to_vec(),
        active_banks: model.banks.iter().map(|b| b.is_some()).collect(),
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    write_matrix_dtns(&dir.join("basis.dtns"), &model.basis)?;
    for (j, bank) in model.banks.iter().enumerate() {
        if let Some(bank) = bank {
            let mut m = Matrix::zeros(bank.len(), bank.patch_len());
            for l in 0..bank.len() {
                for (p, &v) in bank.filter(l).iter().enumerate() {
                    m.set(l, p, v);
                }
            }
            write_matrix_dtns(&dir.join(format!("bank_{j}.dtns")), &m)?;
        }
    }
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<EmbedModel> {
    let json = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: ModelManifest =
        serde_json::from_str(&json).map_err(|e| Error::Format(e.to_string()))?;
    let basis = read_matrix_dtns(&dir.join("basis.dtns"))?;
    if basis.cols() != manifest.k {
        return Err(Error::Format("basis width disagrees with manifest".into()));
    }
    let mut banks = Vec::with_capacity(manifest.k);
    for (j, &active) in manifest.active_banks.iter().enumerate() {
        if !active {
            banks.push(None);
            continue;
        }
        let m = read_matrix_dtns(&dir.join(format!("bank_{j}.dtns")))?;
        let filters: Vec<Vec<f64>> = (0..m.rows()).map(|l| m.row(l).to_vec()).collect();
        banks.push(Some(FilterBank::from_filters(filters)?));
    }
    Ok(EmbedModel {
        vocab: Vocab::new(manifest.vocab)?,
        basis,
        banks,
        patch_len: manifest.patch_len,
        l_filters: manifest.l_filters,
        kpool: manifest.kpool,
        oov: manifest.oov,
    })
}

/// Whitespace tokenization of one corpus line.
pub fn tokenize_line(line: &str) -> Vec<String> {
    line.split_whitespace().map(|s| s.to_string()).collect()
}
