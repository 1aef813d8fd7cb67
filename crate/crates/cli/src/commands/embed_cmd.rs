//! `tensordict embed`: train word-sequence embedding models, apply them to
//! corpora, and evaluation-side feature utilities.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde_json::json;

use tensordict::conv_als::{AlsConfig, FULL_RANK_CONDITION};
use tensordict::embed::{
    discretize_similarity, embed, load_model, pair_features, save_model, tokenize_line,
    train_embed_model, EmbedConfig, OovPolicy, Vocab,
};
use tensordict::io::write_csv_matrix;
use tensordict::matrix::Matrix;

use super::{ensure_out_dir, fail_usage, write_json};
use crate::EXIT_OK;

#[derive(Args)]
pub struct EmbedArgs {
    #[command(subcommand)]
    action: EmbedAction,
}

#[derive(Subcommand)]
enum EmbedAction {
    /// Fit the projection basis and per-coordinate filter banks.
    Train(TrainArgs),
    /// Embed a corpus with a trained model (or run feature utilities).
    Apply(ApplyArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus: UTF-8 text, one sequence per line, whitespace tokens.
    #[arg(long)]
    corpus: PathBuf,

    /// Projection rank.
    #[arg(long, default_value_t = 8)]
    k: usize,

    /// Patch (filter) length.
    #[arg(long, default_value_t = 5)]
    n: usize,

    /// Filters per coordinate (requires L < n).
    #[arg(long = "L", visible_alias = "l", default_value_t = 3)]
    l_filters: usize,

    /// Pooled activations kept per channel.
    #[arg(long, default_value_t = 2)]
    kpool: usize,

    /// Model output directory.
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Fail on out-of-vocabulary tokens instead of skipping them.
    #[arg(long)]
    strict_oov: bool,
}

#[derive(Args)]
struct ApplyArgs {
    /// Trained model directory (from `embed train`).
    #[arg(long, required_unless_present = "sts_discretize")]
    model: Option<PathBuf>,

    /// Corpus to embed, one sequence per line.
    #[arg(long, required_unless_present = "sts_discretize")]
    corpus: Option<PathBuf>,

    /// Embeddings CSV output (one row per sequence).
    #[arg(long, required_unless_present = "sts_discretize")]
    out: Option<PathBuf>,

    /// Also emit pair features for consecutive line pairs to this CSV.
    #[arg(long)]
    pairs: Option<PathBuf>,

    /// Discretize a similarity rating and print the probability vector.
    #[arg(long)]
    sts_discretize: Option<f64>,

    /// Rating range K1:K2 for --sts-discretize.
    #[arg(long, default_value = "0:5")]
    range: String,
}

pub fn run(args: EmbedArgs) -> u8 {
    match args.action {
        EmbedAction::Train(t) => train(t),
        EmbedAction::Apply(a) => apply(a),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("corpus {}: {e}", path.display()))?;
    Ok(text.lines().map(tokenize_line).collect())
}

fn train(args: TrainArgs) -> u8 {
    if args.l_filters == 0 || args.l_filters >= args.n {
        return fail_usage(format!(
            "L={} with n={}: {FULL_RANK_CONDITION}",
            args.l_filters, args.n
        ));
    }
    let corpus = match read_corpus(&args.corpus) {
        Ok(c) => c,
        Err(e) => return fail_usage(e),
    };
    if corpus.iter().all(|s| s.is_empty()) {
        return fail_usage("corpus has no tokens");
    }
    let vocab = match Vocab::from_corpus(&corpus) {
        Ok(v) => v,
        Err(e) => return fail_usage(e),
    };
    let config = EmbedConfig {
        k: args.k.min(vocab.len()),
        patch_len: args.n,
        l_filters: args.l_filters,
        kpool: args.kpool,
        oov: if args.strict_oov {
            OovPolicy::Error
        } else {
            OovPolicy::Skip
        },
        als: AlsConfig {
            seed: args.seed,
            max_iters: 100,
            restarts: 5,
            ..AlsConfig::default()
        },
    };
    let model = match train_embed_model(&corpus, vocab, &config) {
        Ok(m) => m,
        Err(e) => return fail_usage(e),
    };
    if let Err(e) = ensure_out_dir(&args.out) {
        return fail_usage(e);
    }
    if let Err(e) = save_model(&args.out, &model) {
        return fail_usage(e);
    }
    let inactive = model.banks.iter().filter(|b| b.is_none()).count();
    println!(
        "embed train: k={} n={} L={} kpool={}, {} sequences, {} inactive coordinates",
        model.k(),
        model.patch_len,
        model.l_filters,
        model.kpool,
        corpus.len(),
        inactive
    );
    EXIT_OK
}

fn apply(args: ApplyArgs) -> u8 {
    // feature utility mode needs no model
    if let Some(tau) = args.sts_discretize {
        let (k1, k2) = match args.range.split_once(':') {
            Some((a, b)) => match (a.parse::<i64>(), b.parse::<i64>()) {
                (Ok(k1), Ok(k2)) => (k1, k2),
                _ => return fail_usage(format!("bad --range {:?}, want K1:K2", args.range)),
            },
            None => return fail_usage(format!("bad --range {:?}, want K1:K2", args.range)),
        };
        match discretize_similarity(tau, k1, k2) {
            Ok(p) => {
                // wash out representation noise (2 - 2.3 + 1 = 0.700…02)
                let parts: Vec<String> = p
                    .iter()
                    .map(|v| format!("{}", (v * 1e12).round() / 1e12))
                    .collect();
                println!("{}", parts.join(","));
                return EXIT_OK;
            }
            Err(e) => return fail_usage(e),
        }
    }

    let (model_dir, corpus_path, out_path) = match (&args.model, &args.corpus, &args.out) {
        (Some(m), Some(c), Some(o)) => (m, c, o),
        _ => return fail_usage("--model, --corpus and --out are required"),
    };
    let model = match load_model(model_dir) {
        Ok(m) => m,
        Err(e) => return fail_usage(format!("model {}: {e}", model_dir.display())),
    };
    let corpus = match read_corpus(corpus_path) {
        Ok(c) => c,
        Err(e) => return fail_usage(e),
    };
    let mut rows = Vec::with_capacity(corpus.len());
    for seq in &corpus {
        match embed(seq, &model) {
            Ok(e) => rows.push(e),
            Err(e) => return fail_usage(e),
        }
    }
    let width = model.embedding_len();
    let mut m = Matrix::zeros(rows.len(), width);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    if let Err(e) = write_csv_matrix(out_path, &m) {
        return fail_usage(e);
    }
    println!(
        "embed apply: {} sequences -> {} ({}-dim embeddings)",
        rows.len(),
        out_path.display(),
        width
    );

    if let Some(pairs_path) = &args.pairs {
        if rows.len() % 2 != 0 {
            return fail_usage(format!(
                "--pairs needs an even number of sequences, got {}",
                rows.len()
            ));
        }
        let mut pm = Matrix::zeros(rows.len() / 2, 2 * width);
        for i in 0..rows.len() / 2 {
            let feats = match pair_features(&rows[2 * i], &rows[2 * i + 1]) {
                Ok(f) => f,
                Err(e) => return fail_usage(e),
            };
            for (j, &v) in feats.iter().enumerate() {
                pm.set(i, j, v);
            }
        }
        if let Err(e) = write_csv_matrix(pairs_path, &pm) {
            return fail_usage(e);
        }
        let summary = json!({
            "pairs": rows.len() / 2,
            "feature_width": 2 * width,
            "layout": "elementwise product then elementwise absolute difference",
        });
        if let Err(e) = write_json(&pairs_path.with_extension("json"), &summary) {
            return fail_usage(e);
        }
        println!("embed apply: wrote {} pair-feature rows", rows.len() / 2);
    }
    EXIT_OK
}
