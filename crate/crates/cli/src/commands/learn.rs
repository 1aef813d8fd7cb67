//! `tensordict learn-filters`: CT decomposition of the empirical third
//! cumulant, optional alternating-minimization baseline, recovery metrics on
//! planted inputs.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use tensordict::conv_als::{
    alt_min_baseline, ct_als, filter_recovery_error, AlsConfig, FilterBank, FULL_RANK_CONDITION,
};
use tensordict::cumulant::{
    synth_conv_ica, third_cumulant, ActivationSpec, SampleSet, UnfoldedCumulant,
};
use tensordict::io::{read_matrix_dtns, write_csv_matrix, write_matrix_dtns};
use tensordict::matrix::Matrix;

use super::{ensure_out_dir, fail_usage, write_json};
use crate::{EXIT_NO_CONVERGENCE, EXIT_OK};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    None,
    Altmin,
}

#[derive(Args)]
pub struct LearnArgs {
    /// Filter (patch) length n.
    #[arg(long)]
    n: usize,

    /// Number of filters L (requires L < n).
    #[arg(long = "L", visible_alias = "l")]
    l_filters: usize,

    /// Input samples as an n×N order-2 .dtns tensor.
    #[arg(long, conflicts_with = "plant")]
    input: Option<PathBuf>,

    /// Planted-data spec, e.g. "n=8,L=2,act=poisson:0.5,N=100000".
    #[arg(long)]
    plant: Option<String>,

    /// Also run the alternating-minimization baseline.
    #[arg(long, value_enum, default_value_t = Baseline::None)]
    baseline: Baseline,

    /// JSON config for the ALS solver (unknown keys rejected).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,

    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    max_iters: Option<usize>,
    tol: Option<f64>,
    pinv_cutoff: Option<f64>,
    restarts: Option<usize>,
    seed: Option<u64>,
    altmin_max_iters: Option<usize>,
}

/// "n=8,L=2,act=poisson:0.5,N=100000"
struct PlantSpec {
    n: usize,
    l_filters: usize,
    act: ActivationSpec,
    samples: usize,
}

fn parse_plant(text: &str) -> Result<PlantSpec, String> {
    let mut n = None;
    let mut l_filters = None;
    let mut act = None;
    let mut samples = None;
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("bad plant entry {part:?}, want key=value"))?;
        match key.trim() {
            "n" => n = Some(value.parse::<usize>().map_err(|e| e.to_string())?),
            "L" | "l" => l_filters = Some(value.parse::<usize>().map_err(|e| e.to_string())?),
            "N" | "samples" => samples = Some(value.parse::<usize>().map_err(|e| e.to_string())?),
            "act" => {
                let mut it = value.split(':');
                match it.next() {
                    Some("poisson") => {
                        let mean: f64 = it
                            .next()
                            .ok_or("poisson needs a mean, e.g. poisson:0.5")?
                            .parse()
                            .map_err(|e: std::num::ParseFloatError| e.to_string())?;
                        act = Some(ActivationSpec::Poisson { mean });
                    }
                    Some("bg") => {
                        let prob: f64 = it
                            .next()
                            .ok_or("bg needs prob:sigma")?
                            .parse()
                            .map_err(|e: std::num::ParseFloatError| e.to_string())?;
                        let sigma: f64 = it
                            .next()
                            .ok_or("bg needs prob:sigma")?
                            .parse()
                            .map_err(|e: std::num::ParseFloatError| e.to_string())?;
                        act = Some(ActivationSpec::BernoulliGaussian { prob, sigma });
                    }
                    other => return Err(format!("unknown activation {other:?}")),
                }
            }
            other => return Err(format!("unknown plant key {other:?}")),
        }
    }
    Ok(PlantSpec {
        n: n.ok_or("plant spec needs n=")?,
        l_filters: l_filters.ok_or("plant spec needs L=")?,
        act: act.ok_or("plant spec needs act=")?,
        samples: samples.ok_or("plant spec needs N=")?,
    })
}

fn bank_matrix(bank: &FilterBank) -> Matrix {
    let mut m = Matrix::zeros(bank.len(), bank.patch_len());
    for l in 0..bank.len() {
        for (p, &v) in bank.filter(l).iter().enumerate() {
            m.set(l, p, v);
        }
    }
    m
}

pub fn run(args: LearnArgs) -> u8 {
    if args.l_filters == 0 || args.l_filters >= args.n {
        return fail_usage(format!(
            "L={} with n={}: {FULL_RANK_CONDITION}",
            args.l_filters, args.n
        ));
    }
    let file_cfg = match &args.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail_usage(format!("config {}: {e}", path.display())),
            };
            match serde_json::from_str::<FileConfig>(&text) {
                Ok(c) => c,
                Err(e) => return fail_usage(format!("config schema: {e}")),
            }
        }
        None => FileConfig::default(),
    };
    let seed = args.seed.or(file_cfg.seed).unwrap_or(0);
    let als = AlsConfig {
        max_iters: file_cfg.max_iters.unwrap_or(100),
        tol: file_cfg.tol.unwrap_or(1e-8),
        pinv_cutoff: file_cfg.pinv_cutoff.unwrap_or(1e-8),
        restarts: file_cfg.restarts.unwrap_or(10),
        seed,
    };
    if let Err(e) = als.validate() {
        return fail_usage(e);
    }
    if let Err(e) = ensure_out_dir(&args.out) {
        return fail_usage(e);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // obtain samples and the planted truth when generating
    let (samples, truth): (SampleSet, Option<FilterBank>) = if let Some(plant) = &args.plant {
        let spec = match parse_plant(plant) {
            Ok(s) => s,
            Err(e) => return fail_usage(e),
        };
        if spec.n != args.n || spec.l_filters != args.l_filters {
            return fail_usage("plant spec n/L must match --n/--L");
        }
        let truth = FilterBank::random(spec.n, spec.l_filters, &mut rng);
        let (samples, _) = match synth_conv_ica(&truth, spec.act, spec.samples, &mut rng) {
            Ok(v) => v,
            Err(e) => return fail_usage(e),
        };
        // keep the generated data next to the artifacts
        if let Err(e) = write_matrix_dtns(&args.out.join("samples.dtns"), samples.matrix()) {
            return fail_usage(e);
        }
        (samples, Some(truth))
    } else if let Some(input) = &args.input {
        let m = match read_matrix_dtns(input) {
            Ok(m) => m,
            Err(e) => return fail_usage(format!("input {}: {e}", input.display())),
        };
        if m.rows() != args.n {
            return fail_usage(format!(
                "input has dimension {}, --n is {}",
                m.rows(),
                args.n
            ));
        }
        match SampleSet::from_matrix(m) {
            Ok(s) => (s, None),
            Err(e) => return fail_usage(e),
        }
    } else {
        return fail_usage("one of --input or --plant is required");
    };

    let c3: UnfoldedCumulant = match third_cumulant(&samples) {
        Ok(c) => c,
        Err(e) => return fail_usage(e),
    };
    let ct = match ct_als(&c3, args.l_filters, &als, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NO_CONVERGENCE;
        }
    };
    if let Err(e) = write_csv_matrix(&args.out.join("filters_ct.csv"), &bank_matrix(&ct.f)) {
        return fail_usage(e);
    }
    let ct_rows: Vec<String> = ct
        .trace
        .iter()
        .map(|t| format!("{},{:.17e},{:.17e}", t.iter, t.recon_error, t.max_filter_change))
        .collect();
    if let Err(e) = std::fs::write(
        args.out.join("ct_error.csv"),
        format!("iter,recon_error,max_filter_change\n{}\n", ct_rows.join("\n")),
    ) {
        return fail_usage(e);
    }
    let ct_recovery = truth
        .as_ref()
        .map(|t| filter_recovery_error(&ct.f, t).expect("matching banks"));

    let mut report = json!({
        "n": args.n,
        "L": args.l_filters,
        "samples": samples.len(),
        "seed": seed,
        "ct": {
            "iters": ct.trace.len(),
            "final_recon_error": ct.trace.last().map(|t| t.recon_error),
            "recovery_error": ct_recovery,
            "per_iter": ct.trace.iter().map(|t| t.recon_error).collect::<Vec<_>>(),
        },
    });

    if args.baseline == Baseline::Altmin {
        let am_cfg = AlsConfig {
            max_iters: file_cfg.altmin_max_iters.unwrap_or(25),
            ..als.clone()
        };
        let am = match alt_min_baseline(&samples, args.l_filters, &am_cfg, &mut rng) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_NO_CONVERGENCE;
            }
        };
        if let Err(e) =
            write_csv_matrix(&args.out.join("filters_altmin.csv"), &bank_matrix(&am.filters))
        {
            return fail_usage(e);
        }
        let am_rows: Vec<String> = am
            .trace
            .iter()
            .map(|t| {
                format!(
                    "{},{:.17e},{:.17e},{:.17e}",
                    t.iter, t.obj_activations, t.obj_filters_prenorm, t.obj_after_norm
                )
            })
            .collect();
        if let Err(e) = std::fs::write(
            args.out.join("altmin_error.csv"),
            format!(
                "iter,obj_activations,obj_filters_prenorm,obj_after_norm\n{}\n",
                am_rows.join("\n")
            ),
        ) {
            return fail_usage(e);
        }
        let am_recovery = truth
            .as_ref()
            .map(|t| filter_recovery_error(&am.filters, t).expect("matching banks"));
        report["altmin"] = json!({
            "iters": am.trace.len(),
            "final_objective": am.trace.last().map(|t| t.obj_after_norm),
            "recovery_error": am_recovery,
        });
        if let (Some(ct_rec), Some(am_rec)) = (ct_recovery, am_recovery) {
            report["comparison"] = json!({
                "ct_recovery": ct_rec,
                "altmin_recovery": am_rec,
                "ct_wins": ct_rec < am_rec,
            });
            println!("recovery: ct {ct_rec:.4e}, altmin {am_rec:.4e}");
        }
    }
    if let Some(t) = &truth {
        if let Err(e) = write_csv_matrix(&args.out.join("filters_truth.csv"), &bank_matrix(t)) {
            return fail_usage(e);
        }
    }
    if let Err(e) = write_json(&args.out.join("report.json"), &report) {
        return fail_usage(e);
    }
    println!(
        "learn-filters: recon error {:.4e} after {} iterations{}",
        ct.trace.last().map_or(f64::NAN, |t| t.recon_error),
        ct.trace.len(),
        match ct_recovery {
            Some(r) => format!(", recovery error {r:.4e}"),
            None => String::new(),
        }
    );
    EXIT_OK
}
