//! End-to-end verification suite shared by the acceptance tests and the
//! `benchmark` CLI command: every check runs a full pipeline at desk scale
//! against pinned thresholds and reports pass/fail plus plot-ready curves.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv_als::{
    alt_min_baseline, blockdiag_fourier, ct_als, dense_gram_hadamard, filter_recovery_error,
    psi_build, psi_pinv, AlsConfig, FilterBank,
};
use crate::cumulant::{
    cumulant_from_model, synth_conv_ica, synth_conv_ica_positional, third_cumulant,
    ActivationSpec,
};
use crate::embed::{
    conv_synthesize, deconv_decode, discretize_similarity, embed, expected_rating, save_model,
    train_embed_model, tokenize_line, EmbedConfig, Vocab,
};
use crate::error::Result;
use crate::linalg::{cpinv, random_orthonormal};
use crate::matrix::Matrix;
use crate::saddle::{
    noisy_pgd, stoch_grad_ica, z_tensor, ComponentSet, IcaOracle, OracleSample, Schedule,
    SgdConfig, SimpleOracle,
};
use crate::tensor::{multilinear_form, outer_power, ModeMap};

/// A plot-ready curve (written as CSV by the CLI).
#[derive(Debug, Clone)]
pub struct Curve {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub group: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    pub curves: Vec<Curve>,
}

impl CriterionReport {
    pub fn status_line(&self) -> String {
        format!(
            "[{}] criterion {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name
        )
    }
}

pub const CRITERIA: [(u32, &str, &str); 8] = [
    (1, "orthogonal-decomposition-convergence", "saddle"),
    (2, "ica-learning-rate-decay", "saddle"),
    (3, "cumulant-model-identity", "cumulant"),
    (4, "ct-als-planted-recovery", "convals"),
    (5, "ct-vs-alternating-minimization", "convals"),
    (6, "psi-gram-identities", "convals"),
    (7, "gradient-finite-difference", "saddle"),
    (8, "embedding-pipeline-properties", "embed"),
];

/// Run a single criterion. `seed_base` shifts every internal seed; 0 is the
/// pinned configuration the acceptance tests assert on.
pub fn run_criterion(id: u32, seed_base: u64) -> Result<CriterionReport> {
    match id {
        1 => criterion_1(seed_base),
        2 => criterion_2(seed_base),
        3 => criterion_3(seed_base),
        4 => criterion_4(seed_base),
        5 => criterion_5(seed_base),
        6 => criterion_6(seed_base),
        7 => criterion_7(seed_base),
        8 => criterion_8(seed_base),
        _ => Err(crate::error::Error::Precondition(format!(
            "no criterion {id}"
        ))),
    }
}

/// Run all criteria, optionally restricted to one group.
pub fn run_all(only: Option<&str>, seed_base: u64) -> Result<Vec<CriterionReport>> {
    let mut reports = Vec::new();
    for (id, _, group) in CRITERIA {
        if let Some(filter) = only {
            if filter != group {
                continue;
            }
        }
        reports.push(run_criterion(id, seed_base)?);
    }
    Ok(reports)
}

/// Orthogonal 4th-order decomposition with the simple sampling oracle:
/// d = 10, pairwise objective, ≤ 10000 iterations, final normalized
/// reconstruction error ≤ 0.05 in at least 9 of 10 seeds, under 60 s.
fn criterion_1(seed_base: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let d = 10;
    let config = SgdConfig {
        eta: 1e-2,
        iters: 10_000,
        noise_scale: 1.0,
        batch: 1,
        schedule: Schedule::Constant,
        ..SgdConfig::default()
    };
    let mut details = Vec::new();
    let mut curves = Vec::new();
    let mut hits = 0;
    let mut finals = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(100 + seed));
        let basis = random_orthonormal(d, d, &mut rng);
        let oracle = SimpleOracle::new(ComponentSet::new(basis)?, config.batch)?;
        let u0 = ComponentSet::random(d, d, &mut rng);
        let run = noisy_pgd(&oracle, &config, &u0, &mut rng)?;
        let final_err = run.trace.last().unwrap().recon_error;
        finals.push(final_err);
        if final_err <= 0.05 {
            hits += 1;
        }
        if seed == 0 {
            curves.push(Curve {
                name: "simple-oracle-recon".into(),
                x_label: "iter".into(),
                y_label: "recon_error".into(),
                points: run
                    .trace
                    .iter()
                    .step_by(50)
                    .map(|t| (t.iter as f64, t.recon_error))
                    .collect(),
            });
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = hits >= 9 && elapsed < 60.0;
    details.push(format!(
        "{hits}/10 seeds reached recon ≤ 0.05 within 10000 iterations"
    ));
    details.push(format!(
        "final errors: min {:.2e}, max {:.2e}",
        finals.iter().cloned().fold(f64::INFINITY, f64::min),
        finals.iter().cloned().fold(0.0, f64::max)
    ));
    details.push(format!("runtime {elapsed:.1}s (budget 60s)"));
    Ok(CriterionReport {
        id: 1,
        name: CRITERIA[0].1,
        group: CRITERIA[0].2,
        passed,
        details,
        curves,
    })
}

/// ICA pipeline, d = 10, mini-batch 100: with the inverse-t decay the final
/// error is < 0.1 and strictly below the constant-η plateau for the same
/// seed in at least 8 of 10 seeds.
fn criterion_2(seed_base: u64) -> Result<CriterionReport> {
    let d = 10;
    let iters = 8000;
    let burn_in = 2000;
    let base = SgdConfig {
        eta: 1e-2,
        iters,
        noise_scale: 1.0,
        batch: 100,
        schedule: Schedule::Constant,
        ..SgdConfig::default()
    };
    let mut hits = 0;
    let mut details = Vec::new();
    let mut curves = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(200 + seed));
        let mixing = random_orthonormal(d, d, &mut rng);
        let oracle = IcaOracle::new(mixing, base.batch)?;
        let u0 = ComponentSet::random(d, d, &mut rng);

        let mut const_rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(900 + seed));
        let const_run = noisy_pgd(&oracle, &base, &u0, &mut const_rng)?;
        let tail = &const_run.trace[const_run.trace.len() - const_run.trace.len() / 10..];
        let plateau = tail.iter().map(|t| t.recon_error).sum::<f64>() / tail.len() as f64;

        let decay_cfg = SgdConfig {
            schedule: Schedule::InverseT { burn_in },
            ..base.clone()
        };
        let mut decay_rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(900 + seed));
        let decay_run = noisy_pgd(&oracle, &decay_cfg, &u0, &mut decay_rng)?;
        let decay_final = decay_run.trace.last().unwrap().recon_error;

        if decay_final < 0.1 && decay_final < plateau {
            hits += 1;
        }
        if seed == 0 {
            for (name, run) in [("ica-constant-eta", &const_run), ("ica-decay-eta", &decay_run)]
            {
                curves.push(Curve {
                    name: name.into(),
                    x_label: "iter".into(),
                    y_label: "recon_error".into(),
                    points: run
                        .trace
                        .iter()
                        .step_by(20)
                        .map(|t| (t.iter as f64, t.recon_error))
                        .collect(),
                });
            }
            details.push(format!(
                "seed 0: constant plateau {plateau:.3e}, decay final {decay_final:.3e}"
            ));
        }
    }
    details.push(format!(
        "{hits}/10 seeds: decay final < 0.1 and strictly below the constant plateau"
    ));
    Ok(CriterionReport {
        id: 2,
        name: CRITERIA[1].1,
        group: CRITERIA[1].2,
        passed: hits >= 8,
        details,
        curves,
    })
}

/// Empirical third cumulant vs the model form F*Λ*(F*⊙F*)ᵀ for synthetic
/// conv-ICA (n=8, L=2, Poisson 0.5): relative error < 0.1 at N = 1e5 and
/// < 0.04 at N = 1e6, with the 1/√N ratio within ×1.5.
fn criterion_3(seed_base: u64) -> Result<CriterionReport> {
    let n = 8;
    let l_count = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(300));
    let bank = FilterBank::random(n, l_count, &mut rng);
    let act = ActivationSpec::Poisson { mean: 0.5 };
    let lambdas = vec![act.third_cumulant(); n * l_count];
    let model = cumulant_from_model(&bank, &lambdas)?;
    let model_norm = model.matrix().frob_norm();

    let mut errs = Vec::new();
    for &n_samples in &[100_000usize, 1_000_000] {
        let (samples, _) = synth_conv_ica(&bank, act, n_samples, &mut rng)?;
        let emp = third_cumulant(&samples)?;
        let err = emp.matrix().sub(model.matrix())?.frob_norm() / model_norm;
        errs.push(err);
    }
    let ratio = errs[0] / errs[1];
    let expect_ratio = 10.0f64.sqrt();
    let ratio_ok = ratio >= expect_ratio / 1.5 && ratio <= expect_ratio * 1.5;
    let passed = errs[0] < 0.1 && errs[1] < 0.04 && ratio_ok;
    let details = vec![
        format!("relative error at N=1e5: {:.4} (< 0.1)", errs[0]),
        format!("relative error at N=1e6: {:.4} (< 0.04)", errs[1]),
        format!(
            "error ratio {:.2} vs √10 = {:.2} (tolerance ×1.5): {}",
            ratio,
            expect_ratio,
            if ratio_ok { "ok" } else { "violated" }
        ),
    ];
    let curves = vec![Curve {
        name: "cumulant-error-vs-n".into(),
        x_label: "samples".into(),
        y_label: "rel_error".into(),
        points: vec![(1e5, errs[0]), (1e6, errs[1])],
    }];
    Ok(CriterionReport {
        id: 3,
        name: CRITERIA[2].1,
        group: CRITERIA[2].2,
        passed,
        details,
        curves,
    })
}

/// The pinned planted instance shared by criteria 4 and 5: n=8, L=2 random
/// unit filters with position-dependent Poisson activation means, so the
/// planted weights are generic (a uniform profile makes the cumulant
/// shift-degenerate and the filters unidentifiable from it).
fn planted_instance(seed_base: u64) -> (FilterBank, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(402));
    let bank = FilterBank::random(8, 2, &mut rng);
    let means: Vec<f64> = (0..16).map(|_| rng.gen_range(0.4..1.6)).collect();
    (bank, means)
}

/// CT-ALS planted recovery on the model-exact cumulant: majority of 10 seeds
/// reach shift/sign/permutation-minimized recovery error < 1e-3 within 100
/// iterations and reconstruction error < 1e-6; total runtime < 5 s.
fn criterion_4(seed_base: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let (truth, means) = planted_instance(seed_base);
    let c3 = cumulant_from_model(&truth, &means)?;
    let config = AlsConfig {
        max_iters: 100,
        restarts: 10,
        ..AlsConfig::default()
    };
    let mut hits = 0;
    let mut curves = Vec::new();
    let mut best_rec = f64::INFINITY;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(410 + seed));
        let result = ct_als(&c3, 2, &config, &mut rng)?;
        let rec = filter_recovery_error(&result.f, &truth)?;
        let recon = result.trace.last().unwrap().recon_error;
        best_rec = best_rec.min(rec);
        if rec < 1e-3 && recon < 1e-6 {
            hits += 1;
        }
        if seed == 0 {
            curves.push(Curve {
                name: "ct-als-recon".into(),
                x_label: "iter".into(),
                y_label: "recon_error".into(),
                points: result
                    .trace
                    .iter()
                    .map(|t| (t.iter as f64, t.recon_error))
                    .collect(),
            });
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = hits > 5 && elapsed < 5.0;
    let details = vec![
        format!("{hits}/10 seeds: recovery < 1e-3 and recon < 1e-6 within 100 iterations"),
        format!("best recovery {best_rec:.2e}"),
        format!("runtime {elapsed:.2}s (budget 5s)"),
    ];
    Ok(CriterionReport {
        id: 4,
        name: CRITERIA[3].1,
        group: CRITERIA[3].2,
        passed,
        details,
        curves,
    })
}

/// CT vs alternating minimization on N = 1e4 samples of the criterion-4
/// instance: CT's final recovery beats alt-min's in ≥ 8/10 seeds, CT's
/// per-iteration time is N-independent while alt-min's grows ≈ linearly
/// (R² > 0.9 over N ∈ {1e3, 1e4, 1e5}).
fn criterion_5(seed_base: u64) -> Result<CriterionReport> {
    let (truth, means) = planted_instance(seed_base);
    let ct_config = AlsConfig {
        max_iters: 100,
        restarts: 10,
        ..AlsConfig::default()
    };
    let am_config = AlsConfig {
        max_iters: 25,
        tol: 1e-7,
        ..AlsConfig::default()
    };
    let mut ct_wins = 0;
    let mut details = Vec::new();
    let mut rec_pairs = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(510 + seed));
        let (samples, _) = synth_conv_ica_positional(&truth, &means, 10_000, &mut rng)?;
        let c3 = third_cumulant(&samples)?;
        let ct = ct_als(&c3, 2, &ct_config, &mut rng)?;
        let ct_rec = filter_recovery_error(&ct.f, &truth)?;
        let am = alt_min_baseline(&samples, 2, &am_config, &mut rng)?;
        let am_rec = filter_recovery_error(&am.filters, &truth)?;
        if ct_rec < am_rec {
            ct_wins += 1;
        }
        rec_pairs.push((ct_rec, am_rec));
    }
    details.push(format!(
        "CT recovery < alt-min recovery in {ct_wins}/10 seeds"
    ));
    let med = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    details.push(format!(
        "median recovery: CT {:.3}, alt-min {:.3}",
        med(rec_pairs.iter().map(|p| p.0).collect()),
        med(rec_pairs.iter().map(|p| p.1).collect())
    ));

    // per-iteration timing over the sample-size grid
    let grid = [1_000usize, 10_000, 100_000];
    let mut ct_times = Vec::new();
    let mut am_times = Vec::new();
    for &n_samples in &grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(560));
        let (samples, _) = synth_conv_ica_positional(&truth, &means, n_samples, &mut rng)?;
        // CT iterations act on the precomputed cumulant only
        let c3 = third_cumulant(&samples)?;
        let timing_cfg = AlsConfig {
            max_iters: 30,
            tol: 1e-300, // run the full 30 iterations
            restarts: 1,
            ..AlsConfig::default()
        };
        let t0 = Instant::now();
        let _ = ct_als(&c3, 2, &timing_cfg, &mut rng)?;
        ct_times.push(t0.elapsed().as_secs_f64() / 30.0);
        // alt-min passes over all samples every iteration
        let am_timing_cfg = AlsConfig {
            max_iters: 2,
            tol: 1e-300,
            ..AlsConfig::default()
        };
        let t1 = Instant::now();
        let _ = alt_min_baseline(&samples, 2, &am_timing_cfg, &mut rng)?;
        am_times.push(t1.elapsed().as_secs_f64() / 2.0);
    }
    // least-squares slope fit of alt-min time vs N
    let xs: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let (slope, r2) = linear_fit(&xs, &am_times);
    let ct_ratio = ct_times.iter().cloned().fold(0.0, f64::max)
        / ct_times.iter().cloned().fold(f64::INFINITY, f64::min);
    details.push(format!(
        "alt-min per-iteration time: {:?} ms, slope {:.3e} ms/sample, R² {:.3}",
        am_times.iter().map(|t| (t * 1e5).round() / 100.0).collect::<Vec<_>>(),
        slope * 1e3,
        r2
    ));
    details.push(format!(
        "CT per-iteration time: {:?} ms (max/min ratio {:.2} over a 100× range of N)",
        ct_times.iter().map(|t| (t * 1e5).round() / 100.0).collect::<Vec<_>>(),
        ct_ratio
    ));
    let timing_ok = r2 > 0.9 && slope > 0.0 && ct_ratio < 5.0;
    let passed = ct_wins >= 8 && timing_ok;
    let curves = vec![
        Curve {
            name: "alt-min-iter-time".into(),
            x_label: "samples".into(),
            y_label: "seconds_per_iter".into(),
            points: xs.iter().cloned().zip(am_times.iter().cloned()).collect(),
        },
        Curve {
            name: "ct-iter-time".into(),
            x_label: "samples".into(),
            y_label: "seconds_per_iter".into(),
            points: xs.iter().cloned().zip(ct_times.iter().cloned()).collect(),
        },
    ];
    Ok(CriterionReport {
        id: 5,
        name: CRITERIA[4].1,
        group: CRITERIA[4].2,
        passed,
        details,
        curves,
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Gram-kernel identities over 50 random filter pairs, n ∈ {4,8},
/// L ∈ {1,2,3}: U·Ψ·U^H matches the dense (HᵀH).*(GᵀG) to 1e-9 and the
/// structured pseudoinverse matches the dense pseudoinverse to 1e-8.
fn criterion_6(seed_base: u64) -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(600));
    let mut worst_gram = 0.0f64;
    let mut worst_pinv = 0.0f64;
    let mut trials = 0;
    'outer: for trial in 0..50 {
        for &n in &[4usize, 8] {
            for &l_count in &[1usize, 2, 3] {
                if trials >= 50 {
                    break 'outer;
                }
                let _ = trial;
                let g = FilterBank::random(n, l_count, &mut rng);
                let h = FilterBank::random(n, l_count, &mut rng);
                let psi = psi_build(&g, &h)?;
                let u = blockdiag_fourier(n, l_count);
                let dense = dense_gram_hadamard(&g, &h)?;
                let lhs = u.matmul(&psi.to_dense())?.matmul(&u.hermitian())?;
                let gram_err = lhs.real_part(1e-8)?.max_abs_diff(&dense);
                worst_gram = worst_gram.max(gram_err);

                let inv = psi_pinv(&psi, 1e-8);
                let dense_inv = cpinv(&psi.to_dense(), 1e-12);
                let pinv_err = inv.to_dense().max_abs_diff(&dense_inv);
                worst_pinv = worst_pinv.max(pinv_err);
                trials += 1;
            }
        }
    }
    let passed = worst_gram < 1e-9 && worst_pinv < 1e-8;
    let details = vec![
        format!("{trials} random filter pairs over n ∈ {{4,8}}, L ∈ {{1,2,3}}"),
        format!("worst spectral-vs-dense Gram deviation: {worst_gram:.2e} (< 1e-9)"),
        format!("worst structured-vs-dense pseudoinverse deviation: {worst_pinv:.2e} (< 1e-8)"),
    ];
    Ok(CriterionReport {
        id: 6,
        name: CRITERIA[5].1,
        group: CRITERIA[5].2,
        passed,
        details,
        curves: Vec::new(),
    })
}

/// Stochastic ICA gradient vs central finite differences of the pair loss
/// Σ_{i<j} ½(Z − y⊗4)(u_i,u_i,u_j,u_j): relative error < 1e-5, 20 trials.
fn criterion_7(seed_base: u64) -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(700));
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let d = 3 + trial % 3;
        let k = 2 + trial % 3;
        let u = ComponentSet::random(d, k, &mut rng);
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let grad = stoch_grad_ica(&u, &[OracleSample::Ica { y: y.clone() }])?;

        let z = z_tensor(d)?;
        let w = z.sub(&outer_power(&y, 4)?)?.scale(0.5);
        let loss = |m: &Matrix| -> f64 {
            let mut total = 0.0;
            for i in 0..k {
                for j in (i + 1)..k {
                    let ui = m.col(i);
                    let uj = m.col(j);
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
        };
        let h = 1e-4;
        let mut fd = Matrix::zeros(d, k);
        for r in 0..d {
            for c in 0..k {
                let mut up = u.matrix().clone();
                up.set(r, c, up.get(r, c) + h);
                let mut dn = u.matrix().clone();
                dn.set(r, c, dn.get(r, c) - h);
                fd.set(r, c, (loss(&up) - loss(&dn)) / (2.0 * h));
            }
        }
        let rel = fd.sub(&grad)?.frob_norm() / grad.frob_norm().max(1e-12);
        worst = worst.max(rel);
    }
    let passed = worst < 1e-5;
    let details = vec![format!(
        "worst relative error over 20 trials: {worst:.2e} (< 1e-5)"
    )];
    Ok(CriterionReport {
        id: 7,
        name: CRITERIA[6].1,
        group: CRITERIA[6].2,
        passed,
        details,
        curves: Vec::new(),
    })
}

fn toy_corpus_lines() -> Vec<&'static str> {
    vec![
        "red cat sat on mat",
        "dog ran over hill fast",
        "cat sat on mat red cat sat",
        "ran over hill fast dog ran",
        "red cat sat on mat red cat sat on mat",
        "dog ran over hill fast dog ran over hill fast",
        "mat red cat sat on",
        "fast dog ran over hill",
        "on mat red cat sat on mat",
        "hill fast dog ran over hill",
        "sat on mat red cat",
        "over hill fast dog ran",
    ]
}

/// Embedding pipeline properties: byte-identical retraining under a fixed
/// seed, the k·L·kpool length contract (including empty input), deconv
/// reconstruction residual < 1e-8 on in-space signals, and the exact
/// discretize/expected-rating round trip.
fn criterion_8(seed_base: u64) -> Result<CriterionReport> {
    let mut details = Vec::new();
    let mut passed = true;

    // byte-reproducibility of the trained model
    let corpus: Vec<Vec<String>> = toy_corpus_lines().iter().map(|l| tokenize_line(l)).collect();
    let vocab = Vocab::from_corpus(&corpus)?;
    let config = EmbedConfig {
        k: 3,
        patch_len: 4,
        l_filters: 2,
        kpool: 2,
        als: AlsConfig {
            max_iters: 60,
            restarts: 2,
            seed: seed_base.wrapping_add(800),
            ..AlsConfig::default()
        },
        ..EmbedConfig::default()
    };
    let model_a = train_embed_model(&corpus, vocab.clone(), &config)?;
    let model_b = train_embed_model(&corpus, vocab, &config)?;
    let dir_a = std::env::temp_dir().join(format!("td-bench-a-{}", std::process::id()));
    let dir_b = std::env::temp_dir().join(format!("td-bench-b-{}", std::process::id()));
    save_model(&dir_a, &model_a)?;
    save_model(&dir_b, &model_b)?;
    let mut byte_identical = true;
    for entry in std::fs::read_dir(&dir_a)? {
        let name = entry?.file_name();
        let a = std::fs::read(dir_a.join(&name))?;
        let b = std::fs::read(dir_b.join(&name))?;
        if a != b {
            byte_identical = false;
        }
    }
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
    passed &= byte_identical;
    details.push(format!(
        "fixed-seed retraining byte-identical: {byte_identical}"
    ));

    // length contract, including the empty sequence
    let want_len = model_a.embedding_len();
    let mut contract_ok = true;
    for seq in [
        Vec::new(),
        tokenize_line("red"),
        tokenize_line("red cat sat on mat red cat"),
        tokenize_line("zzz qwxzv unknown red"),
    ] {
        let e = embed(&seq, &model_a)?;
        contract_ok &= e.len() == want_len && e.iter().all(|v| v.is_finite());
    }
    passed &= contract_ok;
    details.push(format!(
        "embedding length contract k·L·kpool = {want_len} for all inputs: {contract_ok}"
    ));

    // deconv reconstruction on in-space signals
    let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(801));
    let mut worst_resid = 0.0f64;
    for _ in 0..10 {
        let bank = FilterBank::random(5, 2, &mut rng);
        let len = 16;
        let w_true: Vec<f64> = (0..2 * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = conv_synthesize(&bank, &w_true, len)?;
        let w = deconv_decode(&y, &bank)?;
        let back = conv_synthesize(&bank, &w, len)?;
        let resid: f64 = back
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst_resid = worst_resid.max(resid);
    }
    passed &= worst_resid < 1e-8;
    details.push(format!(
        "worst deconv reconstruction residual on in-space signals: {worst_resid:.2e} (< 1e-8)"
    ));

    // discretize / expected-rating round trip
    let mut worst_rt = 0.0f64;
    for i in 0..100 {
        let tau = 5.0 * (i as f64) / 99.0;
        let p = discretize_similarity(tau, 0, 5)?;
        worst_rt = worst_rt.max((expected_rating(&p, 0) - tau).abs());
    }
    passed &= worst_rt < 1e-12;
    details.push(format!(
        "worst discretize/expected-rating round-trip error: {worst_rt:.2e} (< 1e-12)"
    ));

    Ok(CriterionReport {
        id: 8,
        name: CRITERIA[7].1,
        group: CRITERIA[7].2,
        passed,
        details,
        curves: Vec::new(),
    })
}
