//! Orthogonal 4th-order tensor decomposition by noisy projected stochastic
//! gradient descent, minimizing the pairwise correlation objective
//! `Σ_{i≠j} T(u_i, u_i, u_j, u_j)` over the product of unit spheres.
//!
//! Two sample oracles are provided: "simple" sampling (x = d^{1/4}·a_i with a
//! uniformly random component, so E[x^{⊗4}] = T) and the ICA observation
//! model y = A·x with Rademacher sources, whose stochastic gradient comes
//! from the auxiliary tensor Z without forming any 4th-order tensor.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{vec_dot, vec_norm, Matrix};
use crate::tensor::{multilinear_form, outer_power, DenseTensor, ModeMap};

/// d×k matrix of unit-norm columns: the SGD decision variable.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    u: Matrix,
}

impl ComponentSet {
    /// Wrap a matrix whose columns are already unit norm (1e-8 slack).
    pub fn new(u: Matrix) -> Result<Self> {
        for j in 0..u.cols() {
            let nrm = vec_norm(&u.col(j));
            if (nrm - 1.0).abs() > 1e-8 {
                return Err(Error::Precondition(format!(
                    "column {j} has norm {nrm}, want 1"
                )));
            }
        }
        Ok(ComponentSet { u })
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn count(&self) -> usize {
        self.u.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.u
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.u.col(i)
    }

    /// More components than dimensions is legal but redundant.
    pub fn is_overcomplete(&self) -> bool {
        self.count() > self.dim()
    }

    /// Random unit columns.
    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Self {
        let mut m = Matrix::zeros(d, k);
        for j in 0..k {
            loop {
                let col: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let nrm = vec_norm(&col);
                if nrm > 1e-8 {
                    let col: Vec<f64> = col.iter().map(|v| v / nrm).collect();
                    m.set_col(j, &col);
                    break;
                }
            }
        }
        ComponentSet { u: m }
    }
}

/// Projection onto the product of unit spheres: column normalization.
pub fn project_spheres(raw: &Matrix) -> Result<ComponentSet> {
    let mut out = raw.clone();
    for j in 0..raw.cols() {
        let col = raw.col(j);
        let nrm = vec_norm(&col);
        if nrm == 0.0 {
            return Err(Error::Degenerate(format!("column {j} is zero")));
        }
        let col: Vec<f64> = col.iter().map(|v| v / nrm).collect();
        out.set_col(j, &col);
    }
    Ok(ComponentSet { u: out })
}

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// η_t = η / max(1, t − burn_in)
    InverseT { burn_in: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdConfig {
    pub eta: f64,
    pub iters: usize,
    /// Magnitude of the unit-sphere noise added to every gradient step.
    pub noise_scale: f64,
    pub batch: usize,
    pub schedule: Schedule,
    /// Opt-in: draw an independent unit-sphere noise vector per column
    /// instead of one over the whole d·k parameter space.
    pub per_column_noise: bool,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            eta: 1e-2,
            iters: 10_000,
            noise_scale: 1.0,
            batch: 1,
            schedule: Schedule::Constant,
            per_column_noise: false,
            seed: 0,
        }
    }
}

impl SgdConfig {
    /// eta = 0 is allowed (a degenerate but well-defined fixed point).
    pub fn validate(&self) -> Result<()> {
        if self.eta < 0.0 || self.iters == 0 || self.batch == 0 || self.noise_scale < 0.0 {
            return Err(Error::Precondition(
                "sgd config requires eta>=0, iters>0, batch>=1, noise_scale>=0".into(),
            ));
        }
        Ok(())
    }

    fn eta_at(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.eta,
            Schedule::InverseT { burn_in } => {
                let denom = t.saturating_sub(burn_in).max(1);
                self.eta / denom as f64
            }
        }
    }
}

/// One observation from a sample oracle.
#[derive(Debug, Clone)]
pub enum OracleSample {
    /// x = d^{1/4}·a_i from the simple oracle
    Simple { x: Vec<f64> },
    /// y = A·x with Rademacher x
    Ica { y: Vec<f64> },
}

impl OracleSample {
    pub fn vector(&self) -> &[f64] {
        match self {
            OracleSample::Simple { x } => x,
            OracleSample::Ica { y } => y,
        }
    }
}

fn check_orthonormal(a: &Matrix, tol: f64) -> Result<()> {
    let gram = a.transpose().matmul(a)?;
    let id = Matrix::identity(a.cols());
    if gram.max_abs_diff(&id) > tol {
        return Err(Error::Precondition(
            "columns are not orthonormal".into(),
        ));
    }
    Ok(())
}

/// The auxiliary tensor Z: Z(i,i,i,i)=3, Z(i,i,j,j)=Z(i,j,i,j)=Z(i,j,j,i)=1
/// for i≠j, all other entries zero.
pub fn z_tensor(d: usize) -> Result<DenseTensor> {
    if d == 0 {
        return Err(Error::Precondition("d must be positive".into()));
    }
    let mut z = DenseTensor::zeros(&[d, d, d, d])?;
    for i in 0..d {
        z.set(&[i, i, i, i], 3.0);
        for j in 0..d {
            if i == j {
                continue;
            }
            z.set(&[i, i, j, j], 1.0);
            z.set(&[i, j, i, j], 1.0);
            z.set(&[i, j, j, i], 1.0);
        }
    }
    Ok(z)
}

/// Simple oracle draw: x = d^{1/4}·a_i with i uniform, so E[x^{⊗4}] = T.
pub fn sample_simple<R: Rng + ?Sized>(
    components: &ComponentSet,
    rng: &mut R,
) -> Result<OracleSample> {
    if components.dim() != components.count() {
        return Err(Error::Precondition("simple oracle needs k = d".into()));
    }
    check_orthonormal(components.matrix(), 1e-10)?;
    Ok(sample_simple_unchecked(components, rng))
}

fn sample_simple_unchecked<R: Rng + ?Sized>(
    components: &ComponentSet,
    rng: &mut R,
) -> OracleSample {
    let d = components.dim();
    let i = rng.gen_range(0..d);
    let scale = (d as f64).powf(0.25);
    let x = components.column(i).iter().map(|v| v * scale).collect();
    OracleSample::Simple { x }
}

/// ICA observation draw: y = A·x with x uniform in {±1}^d.
pub fn sample_ica<R: Rng + ?Sized>(a: &Matrix, rng: &mut R) -> Result<OracleSample> {
    if a.rows() != a.cols() {
        return Err(Error::Precondition("mixing matrix must be square".into()));
    }
    check_orthonormal(a, 1e-10)?;
    Ok(sample_ica_unchecked(a, rng))
}

fn sample_ica_unchecked<R: Rng + ?Sized>(a: &Matrix, rng: &mut R) -> OracleSample {
    let d = a.rows();
    let x: Vec<f64> = (0..d)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let y = a.matvec(&x).expect("square");
    OracleSample::Ica { y }
}

/// Single-component objective `T(u,u,u,u)` for a unit vector u.
pub fn objective_single(t: &DenseTensor, u: &[f64]) -> Result<f64> {
    if (vec_norm(u) - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition("u must have unit norm".into()));
    }
    multilinear_form(
        t,
        &[
            ModeMap::Vec(u),
            ModeMap::Vec(u),
            ModeMap::Vec(u),
            ModeMap::Vec(u),
        ],
    )?
    .scalar()
}

/// Pairwise correlation objective `Σ_{i≠j} T(u_i,u_i,u_j,u_j)` (ordered sum).
pub fn objective_pairwise(t: &DenseTensor, u: &ComponentSet) -> Result<f64> {
    let k = u.count();
    let cols: Vec<Vec<f64>> = (0..k).map(|i| u.column(i)).collect();
    let mut total = 0.0;
    for i in 0..k {
        // contract the first two modes once per i
        let partial = multilinear_form(
            t,
            &[
                ModeMap::Vec(&cols[i]),
                ModeMap::Vec(&cols[i]),
                ModeMap::Mat(&Matrix::identity(u.dim())),
                ModeMap::Mat(&Matrix::identity(u.dim())),
            ],
        )?;
        for (j, cj) in cols.iter().enumerate() {
            if i == j {
                continue;
            }
            let quad = multilinear_form(&partial, &[ModeMap::Vec(cj), ModeMap::Vec(cj)])?;
            total += quad.scalar()?;
        }
    }
    Ok(total)
}

/// Stochastic gradient of the pairwise ICA loss at a batch of observations:
/// per column i, the batch average of
/// `Σ_{j≠i} (⟨u_j,u_j⟩u_i + 2⟨u_i,u_j⟩u_j − ⟨u_j,y⟩²⟨u_i,y⟩y)`.
pub fn stoch_grad_ica(u: &ComponentSet, batch: &[OracleSample]) -> Result<Matrix> {
    if batch.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    let d = u.dim();
    let k = u.count();
    for s in batch {
        if s.vector().len() != d {
            return Err(Error::Shape(format!(
                "sample length {} vs dimension {d}",
                s.vector().len()
            )));
        }
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|i| u.column(i)).collect();
    let mut grad = Matrix::zeros(d, k);

    // deterministic part: Σ_{j≠i} (⟨u_j,u_j⟩·u_i + 2⟨u_i,u_j⟩·u_j)
    let sq_norms: Vec<f64> = cols.iter().map(|c| vec_dot(c, c)).collect();
    let total_sq: f64 = sq_norms.iter().sum();
    for i in 0..k {
        let coef = total_sq - sq_norms[i];
        for r in 0..d {
            grad.add_at(r, i, coef * cols[i][r]);
        }
        for (j, cj) in cols.iter().enumerate() {
            if j == i {
                continue;
            }
            let dot = vec_dot(&cols[i], cj);
            for r in 0..d {
                grad.add_at(r, i, 2.0 * dot * cj[r]);
            }
        }
    }

    // stochastic part, averaged over the batch
    let inv_b = 1.0 / batch.len() as f64;
    for s in batch {
        let y = s.vector();
        let dots: Vec<f64> = cols.iter().map(|c| vec_dot(c, y)).collect();
        let total: f64 = dots.iter().map(|v| v * v).sum();
        for i in 0..k {
            let coef = dots[i] * (total - dots[i] * dots[i]) * inv_b;
            for r in 0..d {
                grad.add_at(r, i, -coef * y[r]);
            }
        }
    }
    Ok(grad)
}

/// Normalized reconstruction error `‖T − Σ u_i^{⊗4}‖²_F / ‖T‖²_F`.
pub fn reconstruction_error(t: &DenseTensor, u: &ComponentSet) -> Result<f64> {
    let t_norm2 = t.data().iter().map(|v| v * v).sum::<f64>();
    if t_norm2 == 0.0 {
        return Err(Error::Degenerate("zero tensor".into()));
    }
    let d = u.dim();
    if t.dims() != [d, d, d, d] {
        return Err(Error::Shape(format!(
            "tensor dims {:?} vs components of dimension {d}",
            t.dims()
        )));
    }
    let mut sum = DenseTensor::zeros(&[d, d, d, d])?;
    for i in 0..u.count() {
        sum = sum.add(&outer_power(&u.column(i), 4)?)?;
    }
    let diff = t.sub(&sum)?;
    Ok(diff.data().iter().map(|v| v * v).sum::<f64>() / t_norm2)
}

/// A gradient oracle: samples its own batch, and knows how to score a
/// candidate component set against the population tensor it represents.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    fn stochastic_gradient(&self, u: &ComponentSet, rng: &mut dyn rand::RngCore)
        -> Result<Matrix>;
    /// Population pairwise objective (ordered sum over i≠j).
    fn objective(&self, u: &ComponentSet) -> f64;
    /// Normalized reconstruction error against the ground-truth components.
    fn reconstruction_error(&self, u: &ComponentSet) -> f64;
}

/// Inner products of every ground-truth component with every estimate.
fn overlap(truth: &Matrix, u: &ComponentSet) -> Matrix {
    truth.transpose().matmul(u.matrix()).expect("d agrees")
}

/// Pairwise objective for T = Σ a_m^{⊗4}: Σ_m [(Σ_i p_mi²)² − Σ_i p_mi⁴].
fn factored_objective(truth: &Matrix, u: &ComponentSet) -> f64 {
    let p = overlap(truth, u);
    let mut total = 0.0;
    for m in 0..p.rows() {
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for i in 0..p.cols() {
            let v = p.get(m, i) * p.get(m, i);
            s2 += v;
            s4 += v * v;
        }
        total += s2 * s2 - s4;
    }
    total
}

/// Reconstruction error for T = Σ a_m^{⊗4} via Gram identities only:
/// ‖T − Σ u^{⊗4}‖² = d − 2Σ⟨a_m,u_i⟩⁴ + Σ⟨u_i,u_j⟩⁴.
fn factored_recon_error(truth: &Matrix, u: &ComponentSet) -> f64 {
    let d = truth.cols() as f64;
    let p = overlap(truth, u);
    let mut cross = 0.0;
    for v in p.data() {
        cross += v.powi(4);
    }
    let gram = u.matrix().transpose().matmul(u.matrix()).expect("square");
    let mut self_term = 0.0;
    for v in gram.data() {
        self_term += v.powi(4);
    }
    (d - 2.0 * cross + self_term) / d
}

/// Simple-sampling oracle over a planted orthonormal component set.
pub struct SimpleOracle {
    components: ComponentSet,
    batch: usize,
}

impl SimpleOracle {
    pub fn new(components: ComponentSet, batch: usize) -> Result<Self> {
        if components.dim() != components.count() {
            return Err(Error::Precondition("simple oracle needs k = d".into()));
        }
        check_orthonormal(components.matrix(), 1e-10)?;
        if batch == 0 {
            return Err(Error::Precondition("batch must be >= 1".into()));
        }
        Ok(SimpleOracle { components, batch })
    }

    pub fn components(&self) -> &ComponentSet {
        &self.components
    }

    /// Dense population tensor Σ a_i^{⊗4} (test scale).
    pub fn dense_tensor(&self) -> Result<DenseTensor> {
        let d = self.components.dim();
        let mut t = DenseTensor::zeros(&[d, d, d, d])?;
        for i in 0..d {
            t = t.add(&outer_power(&self.components.column(i), 4)?)?;
        }
        Ok(t)
    }
}

impl GradientOracle for SimpleOracle {
    fn dim(&self) -> usize {
        self.components.dim()
    }

    fn stochastic_gradient(
        &self,
        u: &ComponentSet,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Matrix> {
        let d = u.dim();
        let k = u.count();
        let cols: Vec<Vec<f64>> = (0..k).map(|i| u.column(i)).collect();
        let mut grad = Matrix::zeros(d, k);
        let inv_b = 1.0 / self.batch as f64;
        for _ in 0..self.batch {
            let sample = sample_simple_unchecked(&self.components, rng);
            let x = sample.vector();
            let dots: Vec<f64> = cols.iter().map(|c| vec_dot(c, x)).collect();
            let total: f64 = dots.iter().map(|v| v * v).sum();
            // ∇_{u_i} Σ_{pairs} ⟨u_i,x⟩²⟨u_j,x⟩² = 2⟨u_i,x⟩(Σ_{j≠i}⟨u_j,x⟩²)·x
            for i in 0..k {
                let coef = 2.0 * dots[i] * (total - dots[i] * dots[i]) * inv_b;
                for r in 0..d {
                    grad.add_at(r, i, coef * x[r]);
                }
            }
        }
        Ok(grad)
    }

    fn objective(&self, u: &ComponentSet) -> f64 {
        factored_objective(self.components.matrix(), u)
    }

    fn reconstruction_error(&self, u: &ComponentSet) -> f64 {
        factored_recon_error(self.components.matrix(), u)
    }
}

/// ICA oracle: draws y = A·x batches and scores against T = Σ a_i^{⊗4}.
pub struct IcaOracle {
    mixing: Matrix,
    batch: usize,
}

impl IcaOracle {
    pub fn new(mixing: Matrix, batch: usize) -> Result<Self> {
        if mixing.rows() != mixing.cols() {
            return Err(Error::Precondition("mixing matrix must be square".into()));
        }
        check_orthonormal(&mixing, 1e-10)?;
        if batch == 0 {
            return Err(Error::Precondition("batch must be >= 1".into()));
        }
        Ok(IcaOracle { mixing, batch })
    }

    pub fn mixing(&self) -> &Matrix {
        &self.mixing
    }

    pub fn draw_batch<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<OracleSample> {
        (0..self.batch)
            .map(|_| sample_ica_unchecked(&self.mixing, rng))
            .collect()
    }
}

impl GradientOracle for IcaOracle {
    fn dim(&self) -> usize {
        self.mixing.rows()
    }

    fn stochastic_gradient(
        &self,
        u: &ComponentSet,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Matrix> {
        let batch: Vec<OracleSample> = (0..self.batch)
            .map(|_| sample_ica_unchecked(&self.mixing, rng))
            .collect();
        stoch_grad_ica(u, &batch)
    }

    fn objective(&self, u: &ComponentSet) -> f64 {
        factored_objective(&self.mixing, u)
    }

    fn reconstruction_error(&self, u: &ComponentSet) -> f64 {
        factored_recon_error(&self.mixing, u)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub recon_error: f64,
}

#[derive(Debug)]
pub struct SgdRun {
    pub components: ComponentSet,
    pub trace: Vec<TracePoint>,
}

/// Projected noisy stochastic gradient descent:
/// `v ← U − η_t(SG(U) + noise_scale·n)` with n uniform on the unit sphere of
/// the whole d·k parameter space, then `U ← Π(v)` (column normalization).
pub fn noisy_pgd<O: GradientOracle + ?Sized, R: Rng>(
    oracle: &O,
    config: &SgdConfig,
    u0: &ComponentSet,
    rng: &mut R,
) -> Result<SgdRun> {
    config.validate()?;
    let d = u0.dim();
    let k = u0.count();
    if d != oracle.dim() {
        return Err(Error::Shape(format!(
            "oracle dimension {} vs components {}",
            oracle.dim(),
            d
        )));
    }
    let mut u = u0.clone();
    let obj0 = oracle.objective(&u);
    let guard = 1e6 * obj0.abs().max(1e-3);
    let mut trace = Vec::with_capacity(config.iters + 1);
    trace.push(TracePoint {
        iter: 0,
        objective: obj0,
        recon_error: oracle.reconstruction_error(&u),
    });
    for t in 0..config.iters {
        let eta = config.eta_at(t);
        let grad = oracle.stochastic_gradient(&u, rng)?;
        // noise uniform on the unit sphere, over the whole d·k parameter
        // space by default or independently per column when opted in
        let mut noise: Vec<f64> = (0..d * k).map(|_| rng.sample(StandardNormal)).collect();
        if config.per_column_noise {
            for j in 0..k {
                let col: Vec<f64> = (0..d).map(|i| noise[i * k + j]).collect();
                let nrm = vec_norm(&col);
                if nrm > 0.0 {
                    for i in 0..d {
                        noise[i * k + j] /= nrm;
                    }
                }
            }
        } else {
            let nrm = vec_norm(&noise);
            if nrm > 0.0 {
                for v in noise.iter_mut() {
                    *v /= nrm;
                }
            }
        }
        let mut raw = u.matrix().clone();
        for i in 0..d {
            for j in 0..k {
                let step = grad.get(i, j) + config.noise_scale * noise[i * k + j];
                raw.add_at(i, j, -eta * step);
            }
        }
        u = project_spheres(&raw)?;
        let obj = oracle.objective(&u);
        let rec = oracle.reconstruction_error(&u);
        trace.push(TracePoint {
            iter: t + 1,
            objective: obj,
            recon_error: rec,
        });
        if !obj.is_finite() || obj.abs() > guard {
            return Err(Error::Divergence {
                iter: t + 1,
                value: obj,
            });
        }
    }
    Ok(SgdRun {
        components: u,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthonormal;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis_components(d: usize) -> ComponentSet {
        ComponentSet::new(Matrix::identity(d)).unwrap()
    }

    fn sum_of_fourth_powers(a: &Matrix) -> DenseTensor {
        let d = a.rows();
        let mut t = DenseTensor::zeros(&[d, d, d, d]).unwrap();
        for i in 0..a.cols() {
            t = t.add(&outer_power(&a.col(i), 4).unwrap()).unwrap();
        }
        t
    }

    #[test]
    fn z_tensor_entries() {
        let z = z_tensor(2).unwrap();
        assert_eq!(z.get(&[0, 0, 0, 0]), 3.0);
        assert_eq!(z.get(&[0, 1, 0, 1]), 1.0);
        assert_eq!(z.get(&[0, 0, 1, 1]), 1.0);
        assert_eq!(z.get(&[0, 1, 1, 0]), 1.0);
        let z4 = z_tensor(4).unwrap();
        assert_eq!(z4.get(&[0, 1, 2, 3]), 0.0);
    }

    #[test]
    fn simple_oracle_single_component() {
        let comp = basis_components(1);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..5 {
            let s = sample_simple(&comp, &mut rng).unwrap();
            assert_eq!(s.vector(), &[1.0]);
        }
    }

    #[test]
    fn simple_oracle_norm_and_unbiasedness() {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a = random_orthonormal(d, d, &mut rng);
        let comp = ComponentSet::new(a.clone()).unwrap();
        let want_norm = (d as f64).powf(0.25);
        // empirical mean of x^{⊗4} over 1e5 draws vs Σ a_i^{⊗4}
        let mut acc = DenseTensor::zeros(&[d, d, d, d]).unwrap();
        let n_draws = 100_000;
        for _ in 0..n_draws {
            let s = sample_simple(&comp, &mut rng).unwrap();
            let x = s.vector();
            assert_relative_eq!(vec_norm(x), want_norm, epsilon = 1e-12);
            acc = acc.add(&outer_power(x, 4).unwrap()).unwrap();
        }
        let mean = acc.scale(1.0 / n_draws as f64);
        let truth = sum_of_fourth_powers(&a);
        let err = mean.sub(&truth).unwrap().frob_norm();
        assert!(err < 0.05, "Monte-Carlo error {err}");
    }

    #[test]
    fn simple_oracle_rejects_nonorthonormal() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        // columns unit-norm but not orthogonal
        let comp = ComponentSet::new(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        assert!(sample_simple(&comp, &mut rng).is_err());
    }

    #[test]
    fn ica_identity_mixing_uniform() {
        // A = I, d=2: y lands on the 4 sign patterns with equal probability
        let a = Matrix::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let mut counts = [0usize; 4];
        let n_draws = 10_000;
        for _ in 0..n_draws {
            let s = sample_ica(&a, &mut rng).unwrap();
            let y = s.vector();
            assert_relative_eq!(vec_norm(y), (2.0f64).sqrt(), epsilon = 1e-12);
            let idx = (y[0] > 0.0) as usize * 2 + (y[1] > 0.0) as usize;
            counts[idx] += 1;
        }
        let expected = n_draws as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // df = 3, p = 0.001 cutoff is 16.27
        assert!(chi2 < 16.27, "chi-square {chi2}");
    }

    #[test]
    fn ica_z_correction_recovers_tensor() {
        // empirical E[½(Z − y^{⊗4})] ≈ Σ a_i^{⊗4}
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let a = random_orthonormal(d, d, &mut rng);
        let mut acc = DenseTensor::zeros(&[d, d, d, d]).unwrap();
        let n_draws = 100_000;
        for _ in 0..n_draws {
            let s = sample_ica(&a, &mut rng).unwrap();
            acc = acc.add(&outer_power(s.vector(), 4).unwrap()).unwrap();
        }
        let mean_y4 = acc.scale(1.0 / n_draws as f64);
        let z = z_tensor(d).unwrap();
        let estimate = z.sub(&mean_y4).unwrap().scale(0.5);
        let truth = sum_of_fourth_powers(&a);
        let err = estimate.sub(&truth).unwrap().frob_norm();
        assert!(err < 0.1, "Monte-Carlo error {err}");
    }

    #[test]
    fn objective_single_examples() {
        let d = 3;
        let t = sum_of_fourth_powers(&Matrix::identity(d));
        let e1 = [1.0, 0.0, 0.0];
        assert_relative_eq!(objective_single(&t, &e1).unwrap(), 1.0, epsilon = 1e-12);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mix = [half, half, 0.0];
        assert_relative_eq!(objective_single(&t, &mix).unwrap(), 0.5, epsilon = 1e-12);
        // delegation to the multilinear form on an arbitrary tensor
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        use rand::Rng;
        let t2 = DenseTensor::from_vec(
            &[2, 2, 2, 2],
            (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let u = [0.6, -0.8];
        let direct = multilinear_form(
            &t2,
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
        assert_relative_eq!(objective_single(&t2, &u).unwrap(), direct, epsilon = 1e-12);
        // non-unit input rejected
        assert!(objective_single(&t, &[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn objective_pairwise_examples() {
        let d = 3;
        let t = sum_of_fourth_powers(&Matrix::identity(d));
        // signed permutation of the basis is a global minimizer
        let mut perm = Matrix::zeros(d, d);
        perm.set(0, 1, -1.0);
        perm.set(1, 2, 1.0);
        perm.set(2, 0, 1.0);
        let u = ComponentSet::new(perm).unwrap();
        assert_relative_eq!(objective_pairwise(&t, &u).unwrap(), 0.0, epsilon = 1e-12);
        // k = 1: empty sum
        let single = ComponentSet::new(Matrix::from_vec(3, 1, vec![1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(objective_pairwise(&t, &single).unwrap(), 0.0);
        // brute-force double loop on a random tensor
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        use rand::Rng;
        let t2 = DenseTensor::from_vec(
            &[2, 2, 2, 2],
            (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let u2 = ComponentSet::random(2, 3, &mut rng);
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let ui = u2.column(i);
                let uj = u2.column(j);
                let v = multilinear_form(
                    &t2,
                    &[
                        ModeMap::Vec(&ui),
                        ModeMap::Vec(&ui),
                        ModeMap::Vec(&uj),
                        ModeMap::Vec(&uj),
                    ],
                )
                .unwrap()
                .scalar()
                .unwrap();
                brute += v;
            }
        }
        assert_relative_eq!(
            objective_pairwise(&t2, &u2).unwrap(),
            brute,
            epsilon = 1e-10
        );
    }

    #[test]
    fn gradient_k1_is_zero() {
        let u = ComponentSet::new(Matrix::from_vec(3, 1, vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
        let batch = vec![OracleSample::Ica {
            y: vec![0.3, -0.4, 1.2],
        }];
        let g = stoch_grad_ica(&u, &batch).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    /// Loss whose exact gradient the oracle claims to be: the unordered-pair
    /// sum Σ_{i<j} W(u_i,u_i,u_j,u_j) with W = ½(Z − y^{⊗4}), built from the
    /// dense tensors.
    fn ica_pair_loss(u: &Matrix, y: &[f64]) -> f64 {
        let d = u.rows();
        let k = u.cols();
        let z = z_tensor(d).unwrap();
        let w = z.sub(&outer_power(y, 4).unwrap()).unwrap().scale(0.5);
        let mut total = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                let ui = u.col(i);
                let uj = u.col(j);
                total += multilinear_form(
                    &w,
                    &[
                        ModeMap::Vec(&ui),
                        ModeMap::Vec(&ui),
                        ModeMap::Vec(&uj),
                        ModeMap::Vec(&uj),
                    ],
                )
                .unwrap()
                .scalar()
                .unwrap();
            }
        }
        total
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        use rand::Rng;
        let d = 4;
        let k = 3;
        for _ in 0..5 {
            let u = ComponentSet::random(d, k, &mut rng);
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let batch = vec![OracleSample::Ica { y: y.clone() }];
            let grad = stoch_grad_ica(&u, &batch).unwrap();
            let h = 1e-4;
            let mut max_rel = 0.0f64;
            for r in 0..d {
                for c in 0..k {
                    let mut up = u.matrix().clone();
                    up.set(r, c, up.get(r, c) + h);
                    let mut dn = u.matrix().clone();
                    dn.set(r, c, dn.get(r, c) - h);
                    let fd = (ica_pair_loss(&up, &y) - ica_pair_loss(&dn, &y)) / (2.0 * h);
                    let g = grad.get(r, c);
                    let denom = g.abs().max(1.0);
                    max_rel = max_rel.max((fd - g).abs() / denom);
                }
            }
            assert!(max_rel < 1e-5, "relative error {max_rel}");
        }
    }

    #[test]
    fn gradient_batch_cost() {
        // batch of 100 at d = 10 stays well under 10ms
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let d = 10;
        let u = ComponentSet::random(d, d, &mut rng);
        let a = random_orthonormal(d, d, &mut rng);
        let batch: Vec<OracleSample> = (0..100).map(|_| sample_ica(&a, &mut rng).unwrap()).collect();
        let start = std::time::Instant::now();
        let _ = stoch_grad_ica(&u, &batch).unwrap();
        assert!(start.elapsed().as_millis() < 10, "{:?}", start.elapsed());
    }

    #[test]
    fn project_spheres_examples() {
        let m = Matrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap();
        let p = project_spheres(&m).unwrap();
        assert_relative_eq!(p.matrix().get(0, 0), 0.6, epsilon = 1e-15);
        assert_relative_eq!(p.matrix().get(1, 0), 0.8, epsilon = 1e-15);
        // idempotence
        let pp = project_spheres(p.matrix()).unwrap();
        assert!(pp.matrix().max_abs_diff(p.matrix()) < 1e-15);
        // zero column rejected
        let z = Matrix::zeros(2, 1);
        assert!(project_spheres(&z).is_err());
    }

    #[test]
    fn schedule_eta() {
        let mut cfg = SgdConfig {
            eta: 0.1,
            ..SgdConfig::default()
        };
        assert_eq!(cfg.eta_at(0), 0.1);
        assert_eq!(cfg.eta_at(99), 0.1);
        cfg.schedule = Schedule::InverseT { burn_in: 10 };
        assert_eq!(cfg.eta_at(0), 0.1);
        assert_eq!(cfg.eta_at(11), 0.1);
        assert_relative_eq!(cfg.eta_at(12), 0.05, epsilon = 1e-15);
        assert_relative_eq!(cfg.eta_at(110), 0.001, epsilon = 1e-15);
    }

    #[test]
    fn reconstruction_error_examples() {
        let d = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let a = random_orthonormal(d, d, &mut rng);
        let t = sum_of_fourth_powers(&a);
        let comp = ComponentSet::new(a.clone()).unwrap();
        assert!(reconstruction_error(&t, &comp).unwrap() < 1e-20);
        // components orthogonal to the truth: ℰ = 1 + ‖Σu⁴‖²/‖T‖²
        let mut truth3 = Matrix::zeros(d, 3);
        let mut ortho3 = Matrix::zeros(d, 3);
        for i in 0..3 {
            truth3.set(i, i, 1.0);
            ortho3.set(i + 3, i, 1.0);
        }
        let t3 = sum_of_fourth_powers(&truth3);
        let u3 = ComponentSet::new(ortho3).unwrap();
        let u3_norm2 = 3.0; // Σ e_i^{⊗4} over 3 disjoint basis tensors
        let t3_norm2 = 3.0;
        let want = 1.0 + u3_norm2 / t3_norm2;
        assert_relative_eq!(reconstruction_error(&t3, &u3).unwrap(), want, epsilon = 1e-12);
        // invariance under sign flips and permutation
        let mut permuted = Matrix::zeros(d, d);
        for i in 0..d {
            permuted.set(i, (i + 2) % d, if i % 2 == 0 { -1.0 } else { 1.0 });
        }
        let base = reconstruction_error(&t, &comp).unwrap();
        let mut signed_cols = Matrix::zeros(d, d);
        for j in 0..d {
            let col = a.col((j + 2) % d);
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            let scaled: Vec<f64> = col.iter().map(|v| v * sign).collect();
            signed_cols.set_col(j, &scaled);
        }
        let flipped = ComponentSet::new(signed_cols).unwrap();
        assert_relative_eq!(
            reconstruction_error(&t, &flipped).unwrap(),
            base,
            epsilon = 1e-12
        );
        // zero tensor rejected
        let zero = DenseTensor::zeros(&[2, 2, 2, 2]).unwrap();
        let u2 = ComponentSet::new(Matrix::identity(2)).unwrap();
        assert!(reconstruction_error(&zero, &u2).is_err());
    }

    #[test]
    fn factored_metrics_match_dense() {
        let d = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let a = random_orthonormal(d, d, &mut rng);
        let oracle = SimpleOracle::new(ComponentSet::new(a.clone()).unwrap(), 1).unwrap();
        let t = oracle.dense_tensor().unwrap();
        for _ in 0..5 {
            let u = ComponentSet::random(d, d, &mut rng);
            let fast = oracle.reconstruction_error(&u);
            let dense = reconstruction_error(&t, &u).unwrap();
            assert_relative_eq!(fast, dense, epsilon = 1e-10);
            let fast_obj = oracle.objective(&u);
            let dense_obj = objective_pairwise(&t, &u).unwrap();
            assert_relative_eq!(fast_obj, dense_obj, epsilon = 1e-9);
        }
    }

    #[test]
    fn oracle_unbiasedness() {
        // batch-mean gradient converges to ∇ of ½·objective_pairwise on
        // E[½(Z−y⊗4)] (the ½ accounts for the ordered double sum)
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let a = random_orthonormal(d, d, &mut rng);
        let u = ComponentSet::random(d, d, &mut rng);
        let t = sum_of_fourth_powers(&a);
        // exact gradient of the unordered-pair population loss via finite
        // differences of ½·objective_pairwise
        let h = 1e-5;
        let mut exact = Matrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                let mut up = u.matrix().clone();
                up.set(r, c, up.get(r, c) + h);
                let mut dn = u.matrix().clone();
                dn.set(r, c, dn.get(r, c) - h);
                let up_set = ComponentSet { u: up };
                let dn_set = ComponentSet { u: dn };
                let fd = (objective_pairwise(&t, &up_set).unwrap()
                    - objective_pairwise(&t, &dn_set).unwrap())
                    / (2.0 * h)
                    * 0.5;
                exact.set(r, c, fd);
            }
        }
        let batch: Vec<OracleSample> = (0..60_000)
            .map(|_| sample_ica(&a, &mut rng).unwrap())
            .collect();
        let mean_grad = stoch_grad_ica(&u, &batch).unwrap();
        let err = mean_grad.sub(&exact).unwrap().frob_norm() / exact.frob_norm().max(1.0);
        assert!(err < 0.05, "unbiasedness error {err}");
    }

    #[test]
    fn noisy_pgd_zero_step_fixed_point() {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let a = random_orthonormal(d, d, &mut rng);
        let oracle = SimpleOracle::new(ComponentSet::new(a).unwrap(), 1).unwrap();
        let u0 = ComponentSet::random(d, d, &mut rng);
        let cfg = SgdConfig {
            eta: 0.0,
            iters: 5,
            noise_scale: 0.0,
            ..SgdConfig::default()
        };
        let run = noisy_pgd(&oracle, &cfg, &u0, &mut rng).unwrap();
        assert!(run.components.matrix().max_abs_diff(u0.matrix()) < 1e-15);
    }

    /// Oracle wrapper asserting the unit-sphere invariant on every iterate
    /// it is handed.
    struct AssertUnit<'a, O>(&'a O);

    impl<O: GradientOracle> GradientOracle for AssertUnit<'_, O> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn stochastic_gradient(
            &self,
            u: &ComponentSet,
            rng: &mut dyn rand::RngCore,
        ) -> Result<Matrix> {
            for j in 0..u.count() {
                assert!((vec_norm(&u.column(j)) - 1.0).abs() < 1e-12);
            }
            self.0.stochastic_gradient(u, rng)
        }
        fn objective(&self, u: &ComponentSet) -> f64 {
            self.0.objective(u)
        }
        fn reconstruction_error(&self, u: &ComponentSet) -> f64 {
            self.0.reconstruction_error(u)
        }
    }

    #[test]
    fn noisy_pgd_iterates_stay_on_spheres() {
        let d = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let a = random_orthonormal(d, d, &mut rng);
        let oracle = SimpleOracle::new(ComponentSet::new(a).unwrap(), 1).unwrap();
        let wrapped = AssertUnit(&oracle);
        let u0 = ComponentSet::random(d, d, &mut rng);
        let cfg = SgdConfig {
            iters: 200,
            ..SgdConfig::default()
        };
        let run = noisy_pgd(&wrapped, &cfg, &u0, &mut rng).unwrap();
        for j in 0..d {
            assert!((vec_norm(&run.components.column(j)) - 1.0).abs() < 1e-12);
        }
        assert_eq!(run.trace.len(), 201);
    }

    #[test]
    fn noisy_pgd_smoke_convergence() {
        // small instance sanity: error drops substantially from the start
        let d = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let a = random_orthonormal(d, d, &mut rng);
        let oracle = SimpleOracle::new(ComponentSet::new(a).unwrap(), 1).unwrap();
        let u0 = ComponentSet::random(d, d, &mut rng);
        let cfg = SgdConfig {
            eta: 2e-2,
            iters: 3000,
            ..SgdConfig::default()
        };
        let run = noisy_pgd(&oracle, &cfg, &u0, &mut rng).unwrap();
        let first = run.trace.first().unwrap().recon_error;
        let last = run.trace.last().unwrap().recon_error;
        assert!(last < 0.2 && last < first / 2.0, "{first} -> {last}");
    }

    struct NanOracle;

    impl GradientOracle for NanOracle {
        fn dim(&self) -> usize {
            2
        }
        fn stochastic_gradient(
            &self,
            _u: &ComponentSet,
            _rng: &mut dyn rand::RngCore,
        ) -> Result<Matrix> {
            Ok(Matrix::zeros(2, 2))
        }
        fn objective(&self, _u: &ComponentSet) -> f64 {
            f64::NAN
        }
        fn reconstruction_error(&self, _u: &ComponentSet) -> f64 {
            0.0
        }
    }

    #[test]
    fn per_column_noise_keeps_invariants() {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        let a = random_orthonormal(d, d, &mut rng);
        let oracle = SimpleOracle::new(ComponentSet::new(a).unwrap(), 1).unwrap();
        let u0 = ComponentSet::random(d, d, &mut rng);
        let cfg = SgdConfig {
            iters: 50,
            per_column_noise: true,
            ..SgdConfig::default()
        };
        let run = noisy_pgd(&oracle, &cfg, &u0, &mut rng).unwrap();
        for j in 0..d {
            assert!((vec_norm(&run.components.column(j)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_pgd_divergence_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let u0 = ComponentSet::random(2, 2, &mut rng);
        let cfg = SgdConfig {
            iters: 3,
            ..SgdConfig::default()
        };
        let err = noisy_pgd(&NanOracle, &cfg, &u0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Divergence { iter: 1, .. }));
    }
}
