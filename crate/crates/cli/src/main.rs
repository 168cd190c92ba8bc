//! Reproducible experiment driver for the recurlab toolkit.
//!
//! Every subcommand reads its inputs, runs one library pipeline, and writes
//! machine-readable reports (JSON, plus CSV tables where useful) into the
//! output directory. Reports carry no timestamps and no absolute paths, so
//! identical configurations produce byte-identical reports; run metadata
//! lives in a separate `metadata.json`.
//!
//! Exit codes: 0 success, 2 parameter error, 3 model error, 4 no
//! certificate, 5 verification failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{resolve_seed, ExperimentConfig};
use recurlab::construct::{
    brute_force_shift_distances, construct_nonrecurrent_pair_with, verify_nonrecurrence,
    ConstructDiagnostics, ConstructOptions, PairReport,
};
use recurlab::entropy::{entropy, entropy_rate, typical_set, RateMode};
use recurlab::process::{
    block_distribution, empirical_block_distribution, BlockDistribution, ProcessModel,
    SamplePath,
};
use recurlab::tightness::{dbar_estimate, hamming_ball_cover};
use recurlab::words::{admits_full_binary_tree, parse_language, Alphabet, Language};
use recurlab::Error;

#[derive(Parser)]
#[command(
    name = "recurlab",
    version,
    about = "Symbolic process experiments: tree certificates, entropy, non-recurrent pairs, d-bar"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shannon entropy of a distribution table or of a model's block law.
    Entropy(EntropyArgs),
    /// Entropy rate of a model, with its block-entropy ladder.
    Rate(RateArgs),
    /// Full-binary-tree admission of a language file, with certificate.
    TreeCheck(TreeCheckArgs),
    /// Greedy typical set of a model's block law.
    TypicalSet(TypicalSetArgs),
    /// Construct and verify a non-recurrent pair.
    ConstructPair(ConstructPairArgs),
    /// Re-verify a stored pair report.
    Verify(VerifyArgs),
    /// Windowed mean-Hamming averages between two stored paths.
    Dbar(DbarArgs),
    /// Greedy Hamming-ball cover of a language or typical set.
    Cover(CoverArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config supplying defaults for the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (falls back to config, then RECURLAB_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EntropyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSON distribution table (word -> probability).
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Model file; used with --len when no table is given.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Block length for the model's block law.
    #[arg(long)]
    len: Option<usize>,
    /// Sample budget: estimate the block law empirically instead of exactly.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// "exact" or "empirical" (default: exact for i.i.d./Markov models).
    #[arg(long)]
    mode: Option<String>,
    /// Path length for empirical estimation.
    #[arg(long)]
    path_len: Option<usize>,
    /// Deepest block length of the ladder.
    #[arg(long)]
    ladder_max: Option<usize>,
}

#[derive(Args)]
struct TreeCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Newline-delimited word file.
    #[arg(long)]
    language: Option<PathBuf>,
    /// Alphabet size (inferred from the file when omitted).
    #[arg(long)]
    alphabet: Option<u32>,
}

#[derive(Args)]
struct TypicalSetArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    len: Option<usize>,
    /// Mass shortfall epsilon in (0, 1).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sample budget for empirical block laws.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct ConstructPairArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Central block half-length n (multiple of 4).
    #[arg(long)]
    n: Option<i64>,
    /// Window depth K (n-intervals kept per side and parity).
    #[arg(long)]
    blocks: Option<usize>,
    /// Conditioning atoms tried per escalation level.
    #[arg(long)]
    retries: Option<usize>,
    /// Starting typical-set epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sample budget for models without exact conditioning.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Stored pair report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Largest shift to test; defaults to the report's own bound.
    #[arg(long)]
    shift_bound: Option<i64>,
}

#[derive(Args)]
struct DbarArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// First path (binary symbol file).
    #[arg(long)]
    x: Option<PathBuf>,
    /// Second path (binary symbol file).
    #[arg(long)]
    y: Option<PathBuf>,
    /// Window radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<i64>>,
    /// Limsup-proxy cutoff radius (default: smallest radius).
    #[arg(long)]
    n0: Option<i64>,
}

#[derive(Args)]
struct CoverArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Newline-delimited word file.
    #[arg(long)]
    language: Option<PathBuf>,
    #[arg(long)]
    alphabet: Option<u32>,
    /// Optional JSON distribution table weighting the words.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Hamming radius of each family.
    #[arg(long)]
    radius: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Entropy(a) => ("entropy", &a.common),
        Command::Rate(a) => ("rate", &a.common),
        Command::TreeCheck(a) => ("tree-check", &a.common),
        Command::TypicalSet(a) => ("typical-set", &a.common),
        Command::ConstructPair(a) => ("construct-pair", &a.common),
        Command::Verify(a) => ("verify", &a.common),
        Command::Dbar(a) => ("dbar", &a.common),
        Command::Cover(a) => ("cover", &a.common),
    };

    let config = match &common.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(None, kind, &e),
        },
        None => ExperimentConfig::default(),
    };
    if let Err(e) = config.check_kind(kind) {
        return fail(None, kind, &e);
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return ExitCode::from(2);
    }

    let result = match &cli.command {
        Command::Entropy(a) => run_entropy(a, &config, &out),
        Command::Rate(a) => run_rate(a, &config, &out),
        Command::TreeCheck(a) => run_tree_check(a, &config, &out),
        Command::TypicalSet(a) => run_typical_set(a, &config, &out),
        Command::ConstructPair(a) => run_construct_pair(a, &config, &out),
        Command::Verify(a) => run_verify(a, &config, &out),
        Command::Dbar(a) => run_dbar(a, &config, &out),
        Command::Cover(a) => run_cover(a, &config, &out),
    };

    write_metadata(&out, kind);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(Some(&out), kind, &e),
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Parameter(_)
        | Error::Size(_)
        | Error::Validation(_)
        | Error::Certificate(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::Model(_)
        | Error::Entropy(_)
        | Error::Conditioning(_)
        | Error::Undersampled { .. } => 3,
        Error::NoCertificate { .. } => 4,
        Error::Verification(_) => 5,
    }
}

fn error_kind(error: &Error) -> &'static str {
    match error {
        Error::Parameter(_) => "parameter",
        Error::Size(_) => "size",
        Error::Validation(_) => "validation",
        Error::Model(_) => "model",
        Error::Entropy(_) => "entropy",
        Error::Conditioning(_) => "conditioning",
        Error::Undersampled { .. } => "undersampled",
        Error::Certificate(_) => "certificate",
        Error::NoCertificate { .. } => "no-certificate",
        Error::Verification(_) => "verification",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// Every failure path writes a diagnostic report naming the violation.
fn fail(out: Option<&Path>, kind: &str, error: &Error) -> ExitCode {
    eprintln!("error ({}): {error}", error_kind(error));
    if let Some(out) = out {
        let mut report = serde_json::json!({
            "kind": kind,
            "error_kind": error_kind(error),
            "message": error.to_string(),
        });
        if let Error::NoCertificate { diagnostics, .. } = error {
            report["diagnostics"] = serde_json::to_value(diagnostics).unwrap_or_default();
        }
        let _ = write_json(&out.join("error_report.json"), &report);
    }
    ExitCode::from(exit_code(error))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_metadata(out: &Path, kind: &str) {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let metadata = serde_json::json!({
        "kind": kind,
        "unix_time": unix_time,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let _ = write_json(&out.join("metadata.json"), &metadata);
}

fn load_model(flag: &Option<PathBuf>, config: &ExperimentConfig) -> Result<ProcessModel, Error> {
    let path = flag
        .clone()
        .or_else(|| config.model.clone())
        .ok_or_else(|| Error::Parameter("no model file given (--model)".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Parameter(format!("cannot read model {}: {e}", path.display())))?;
    let model: ProcessModel = serde_json::from_str(&text)
        .map_err(|e| Error::Model(format!("bad model file {}: {e}", path.display())))?;
    Ok(model)
}

/// Infer the alphabet of a word file: dotted symbols or plain digits.
fn infer_alphabet(text: &str) -> Result<Alphabet, Error> {
    let mut max = 0u32;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.contains('.') {
            for part in line.split('.') {
                let symbol: u32 = part
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad symbol {part:?}")))?;
                max = max.max(symbol);
            }
        } else {
            for c in line.chars() {
                let symbol = c
                    .to_digit(10)
                    .ok_or_else(|| Error::Validation(format!("bad symbol digit {c:?}")))?;
                max = max.max(symbol);
            }
        }
    }
    Alphabet::new(max + 1)
}

fn load_language(
    flag: &Option<PathBuf>,
    alphabet_flag: Option<u32>,
    config: &ExperimentConfig,
) -> Result<Language, Error> {
    let path = flag
        .clone()
        .or_else(|| config.language.clone())
        .ok_or_else(|| Error::Parameter("no language file given (--language)".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Parameter(format!("cannot read language {}: {e}", path.display())))?;
    let alphabet = match alphabet_flag.or(config.alphabet) {
        Some(size) => Alphabet::new(size)?,
        None => infer_alphabet(&text)?,
    };
    parse_language(alphabet, &text)
}

fn load_path_file(path: &Path) -> Result<SamplePath, Error> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Parameter(format!("cannot read path {}: {e}", path.display())))?;
    SamplePath::read_binary(std::io::BufReader::new(file))
}

fn block_law(
    model: &ProcessModel,
    len: usize,
    budget: Option<usize>,
    seed: u64,
) -> Result<BlockDistribution, Error> {
    match budget {
        Some(budget) => empirical_block_distribution(model, len, budget, seed),
        None => block_distribution(model, len),
    }
}

fn run_entropy(args: &EntropyArgs, config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let seed = resolve_seed(args.common.seed, config.seed);
    let dist = if let Some(path) = args.dist.clone().or_else(|| config.dist.clone()) {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Parameter(format!("cannot read table {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        BlockDistribution::from_json_table(&value)?
    } else {
        let model = load_model(&args.model, config)?;
        let len = args
            .len
            .or(config.len)
            .ok_or_else(|| Error::Parameter("block length required (--len)".into()))?;
        block_law(&model, len, args.budget.or(config.budget), seed)?
    };
    let value = entropy(&dist)?;
    let report = serde_json::json!({
        "bits": value.bits,
        "method": value.method,
        "sample_size": value.sample_size,
        "block_length": dist.block_length(),
        "support_size": dist.support_size(),
        "total_mass": dist.total_mass(),
    });
    write_json(&out.join("entropy_report.json"), &report)?;
    println!("entropy: {:.6} bits over support of {}", value.bits, dist.support_size());
    Ok(())
}

fn run_rate(args: &RateArgs, config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let seed = resolve_seed(args.common.seed, config.seed);
    let model = load_model(&args.model, config)?;
    let ladder_max = args.ladder_max.or(config.ladder_max).unwrap_or(20);
    let mode_name = args
        .mode
        .clone()
        .or_else(|| config.mode.clone())
        .unwrap_or_else(|| {
            if model.supports_exact() { "exact".into() } else { "empirical".into() }
        });
    let mode = match mode_name.as_str() {
        "exact" => RateMode::Exact { ladder_max },
        "empirical" => RateMode::Empirical {
            path_len: args.path_len.or(config.path_len).unwrap_or(200_000),
            ladder_max,
            seed,
        },
        other => return Err(Error::Parameter(format!("unknown rate mode {other:?}"))),
    };
    let report = entropy_rate(&model, mode)?;
    write_json(&out.join("rate_report.json"), &report)?;

    let mut csv = String::from("block_length,block_entropy_bits,per_symbol_bits,increment_bits\n");
    for row in &report.ladder {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.block_length, row.block_entropy_bits, row.per_symbol_bits, row.increment_bits
        ));
    }
    std::fs::write(out.join("rate_ladder.csv"), csv)?;
    println!("entropy rate: {:.6} bits/symbol ({:?})", report.value.bits, report.value.method);
    Ok(())
}

fn run_tree_check(args: &TreeCheckArgs, config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let language = load_language(&args.language, args.alphabet, config)?;
    let certificate = admits_full_binary_tree(&language);
    let admitted = certificate.is_some();
    let report = serde_json::json!({
        "alphabet": language.alphabet().size(),
        "word_length": language.word_length(),
        "language_size": language.len(),
        "admits_full_binary_tree": admitted,
        "certificate_file": if admitted { Some("certificate.json") } else { None },
    });
    write_json(&out.join("tree_report.json"), &report)?;
    match certificate {
        Some(cert) => {
            write_json(&out.join("certificate.json"), &cert)?;
            println!(
                "admits a full binary tree: certificate with {} leaves",
                cert.leaves().len()
            );
            Ok(())
        }
        None => Err(Error::NoCertificate {
            attempts: 1,
            diagnostics: Box::new(ConstructDiagnostics { attempts: vec![] }),
        }),
    }
}

fn run_typical_set(
    args: &TypicalSetArgs,
    config: &ExperimentConfig,
    out: &Path,
) -> Result<(), Error> {
    let seed = resolve_seed(args.common.seed, config.seed);
    let model = load_model(&args.model, config)?;
    let len = args
        .len
        .or(config.len)
        .ok_or_else(|| Error::Parameter("block length required (--len)".into()))?;
    let epsilon = args.epsilon.or(config.epsilon).unwrap_or(0.1);
    let dist = block_law(&model, len, args.budget.or(config.budget), seed)?;
    let set = typical_set(&dist, epsilon)?;
    write_json(&out.join("typical_set.json"), &set)?;

    let mut csv = String::from("word,probability\n");
    for (word, p) in set.members() {
        csv.push_str(&format!("{},{p}\n", set.alphabet().format_word(word)));
    }
    std::fs::write(out.join("typical_set.csv"), csv)?;
    println!(
        "typical set: {} words, mass {:.6}, log2 size / length = {:.4}",
        set.len(),
        set.mass(),
        set.rate_bits()
    );
    Ok(())
}

fn run_construct_pair(
    args: &ConstructPairArgs,
    config: &ExperimentConfig,
    out: &Path,
) -> Result<(), Error> {
    let seed = resolve_seed(args.common.seed, config.seed);
    let model = load_model(&args.model, config)?;
    let n = args.n.or(config.n).unwrap_or(8);
    let blocks = args.blocks.or(config.blocks).unwrap_or(8);
    let retries = args.retries.or(config.retries).unwrap_or(100);
    let mut options = ConstructOptions::default();
    if let Some(eps) = args.epsilon.or(config.epsilon) {
        options.epsilon0 = eps;
    }
    if let Some(budget) = args.budget.or(config.budget) {
        options.sample_budget = budget;
    }
    let report = construct_nonrecurrent_pair_with(&model, n, blocks, seed, retries, &options)?;
    write_json(&out.join("pair_report.json"), &report)?;
    std::fs::write(out.join("shift_checks.csv"), shift_csv(&report))?;
    std::fs::write(out.join("u_path.txt"), format!("{}\n", report.u.to_text()))?;
    std::fs::write(out.join("v_path.txt"), format!("{}\n", report.v.to_text()))?;
    let summary = report.summary();
    std::fs::write(out.join("summary.txt"), format!("{summary}\n"))?;
    println!("{summary}");
    if !report.verification.all_passed {
        return Err(Error::Verification("constructed pair failed shift checks".into()));
    }
    Ok(())
}

fn shift_csv(report: &PairReport) -> String {
    let mut csv = String::from("shift,passed,overlap_len,witness,covered_interval\n");
    for check in &report.verification.checks {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            check.shift,
            check.passed,
            check.overlap_len,
            check.witness.map_or(String::new(), |j| j.to_string()),
            check.covered_interval.map_or(String::new(), |i| i.to_string()),
        ));
    }
    csv
}

fn run_verify(args: &VerifyArgs, config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let path = args
        .report
        .clone()
        .or_else(|| config.report.clone())
        .ok_or_else(|| Error::Parameter("no pair report given (--report)".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Parameter(format!("cannot read report {}: {e}", path.display())))?;
    let report: PairReport = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("bad pair report {}: {e}", path.display())))?;
    let shift_bound = args
        .shift_bound
        .or(config.shift_bound)
        .unwrap_or_else(|| report.scheme.default_shift_bound());

    let verification = verify_nonrecurrence(&report, shift_bound)?;
    let distances = brute_force_shift_distances(&report, shift_bound)?;
    let rescan_ok = distances.iter().all(|(_, d)| *d >= 1);
    let output = serde_json::json!({
        "shift_bound": shift_bound,
        "all_passed": verification.all_passed,
        "min_overlap": verification.min_overlap,
        "brute_force_rescan_ok": rescan_ok,
        "checks": verification.checks,
    });
    write_json(&out.join("verification.json"), &output)?;
    println!(
        "verification over {} shifts: witnesses {}, brute-force re-scan {}",
        verification.checks.len(),
        if verification.all_passed { "pass" } else { "FAIL" },
        if rescan_ok { "pass" } else { "FAIL" },
    );
    if !verification.all_passed || !rescan_ok {
        return Err(Error::Verification("stored pair fails non-recurrence checks".into()));
    }
    Ok(())
}

fn run_dbar(args: &DbarArgs, config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let x_path = args
        .x
        .clone()
        .or_else(|| config.x.clone())
        .ok_or_else(|| Error::Parameter("no first path given (--x)".into()))?;
    let y_path = args
        .y
        .clone()
        .or_else(|| config.y.clone())
        .ok_or_else(|| Error::Parameter("no second path given (--y)".into()))?;
    let x = load_path_file(&x_path)?;
    let y = load_path_file(&y_path)?;
    let radii = args
        .radii
        .clone()
        .or_else(|| config.radii.clone())
        .ok_or_else(|| Error::Parameter("no radii given (--radii)".into()))?;
    let n0 = args
        .n0
        .or(config.n0)
        .unwrap_or_else(|| radii.first().copied().unwrap_or(1));
    let estimate = dbar_estimate(&x, &y, &radii, n0)?;
    write_json(&out.join("dbar.json"), &estimate)?;
    std::fs::write(out.join("dbar.csv"), estimate.to_csv())?;
    println!("d-bar limsup proxy over radii >= {n0}: {:.6}", estimate.limsup_proxy);
    Ok(())
}

fn run_cover(args: &CoverArgs, config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let language = load_language(&args.language, args.alphabet, config)?;
    let radius = args
        .radius
        .or(config.radius)
        .ok_or_else(|| Error::Parameter("no radius given (--radius)".into()))?;
    let members = if let Some(path) = args.dist.clone().or_else(|| config.dist.clone()) {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Parameter(format!("cannot read table {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let table = BlockDistribution::from_json_table(&value)?;
        language
            .words()
            .iter()
            .map(|w| (w.clone(), table.prob(w)))
            .collect()
    } else {
        language.uniform_members()
    };
    let cover = hamming_ball_cover(&members, radius)?;
    write_json(&out.join("cover.json"), &cover)?;
    println!(
        "cover: {} families at radius {radius}, log2 family count {:.4}",
        cover.family_count(),
        cover.log2_family_count
    );
    Ok(())
}
