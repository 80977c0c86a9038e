use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use cqcc_artifact::cache::FeatureCache;
use cqcc_artifact::detector::{load_model, save_model, score_batch, train_detector};
use cqcc_artifact::experiment::{grid_tsv, parse_gaussians, parse_variants, run_grid, StaticSet};
use cqcc_artifact::manifest::parse_manifest;
use cqcc_artifact::metrics::{attack_averaged_eer, parse_opinions, ScoreSet};
use cqcc_artifact::output::write_atomic;
use cqcc_artifact::report::{build_report, curve_tsv, eer_table_tsv, parse_eer_table, report_tsv, AVERAGE_ROW};
use cqcc_artifact::run_config::RunConfig;
use cqcc_artifact::Error;

/// CQCC-GMM artifact detector: train, score and evaluate.
///
/// Set CQCC_CACHE_DIR to cache extracted features between runs.
#[derive(Parser, Debug)]
#[command(name = "cqcc-artifact", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train natural and artificial speech models.
    Train(TrainArgs),
    /// Score every utterance of a manifest.
    Score(ScoreArgs),
    /// Per-system and attack-averaged EER of a score file.
    Eer(EerArgs),
    /// Join EERs with machine and (optionally) subjective opinion scores.
    Report(ReportArgs),
    /// Attack-averaged EER over front-end variants and mixture sizes.
    Grid(GridArgs),
}

/// Training settings shared by `train` and `grid`; flags override the config file.
#[derive(Args, Debug)]
struct TrainingOptions {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Natural (bona fide) training manifest.
    #[arg(long)]
    nat: Option<PathBuf>,
    /// Artificial (spoof) training manifest.
    #[arg(long)]
    artif: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Expected input sample rate; other rates are resampled.
    #[arg(long)]
    sample_rate: Option<u32>,
    #[arg(long)]
    bins_per_octave: Option<u32>,
    #[arg(long)]
    f_min: Option<f64>,
    #[arg(long)]
    f_max: Option<f64>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    num_ceps: Option<usize>,
    #[arg(long)]
    em_iters: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    opts: TrainingOptions,
    /// Front-end variant, e.g. d+dd or full.
    #[arg(long)]
    variant: Option<String>,
    /// Apply utterance-level mean and variance normalization.
    #[arg(long)]
    cmvn: Option<bool>,
    /// Mixture components per class.
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    eval: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Recorded in the output header; scoring itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EerArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write each system's raw FAR/MR curve here.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    eer: PathBuf,
    /// Listening-test ratings: utt_id, system_id, listener_id, score (1-5).
    #[arg(long)]
    opinions: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    opts: TrainingOptions,
    /// Evaluation manifest.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Comma-separated variants, each optionally suffixed :raw or :cmvn.
    #[arg(long)]
    variants: String,
    /// Comma-separated mixture sizes (powers of two).
    #[arg(long)]
    gaussians: String,
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parse and run; returns the process exit status.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Eer(a) => cmd_eer(a),
        Command::Report(a) => cmd_report(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn tool_line() -> String {
    format!("tool: cqcc-artifact {}", env!("CARGO_PKG_VERSION"))
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn read_text(path: &Path) -> CliResult<String> {
    Ok(fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Config file (if any) overlaid with command-line flags.
fn resolve_config(opts: &TrainingOptions) -> CliResult<RunConfig> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &opts.nat {
        cfg.paths.nat = Some(p.clone());
    }
    if let Some(p) = &opts.artif {
        cfg.paths.artif = Some(p.clone());
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(r) = opts.sample_rate {
        cfg.sample_rate = r;
    }
    if let Some(b) = opts.bins_per_octave {
        cfg.cqt.bins_per_octave = b;
    }
    if let Some(f) = opts.f_min {
        cfg.cqt.f_min = Some(f);
    }
    if let Some(f) = opts.f_max {
        cfg.cqt.f_max = Some(f);
    }
    if let Some(h) = opts.hop {
        cfg.cqt.hop = Some(h);
    }
    if let Some(n) = opts.num_ceps {
        cfg.features.num_ceps = n;
    }
    if let Some(n) = opts.em_iters {
        cfg.gmm.em_iters = n;
    }
    Ok(cfg)
}

fn required(path: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    path.clone()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required (or set paths.{flag} in --config)")))
}

/// Settings errors in user-supplied values are usage errors.
fn usage(e: Error) -> CliError {
    match e {
        Error::InvalidConfig(_) | Error::InvalidRate(_) | Error::GridTooSmall { .. } => CliError::Usage(e.to_string()),
        e => CliError::Run(e),
    }
}

fn cache() -> CliResult<Option<FeatureCache>> {
    Ok(FeatureCache::from_env()?)
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let mut cfg = resolve_config(&a.opts)?;
    if let Some(v) = a.variant {
        cfg.features.variant = v;
    }
    if let Some(c) = a.cmvn {
        cfg.features.cmvn = c;
    }
    if let Some(c) = a.components {
        cfg.gmm.components = c;
    }
    let features = cfg.feature_config().map_err(usage)?;
    let gmm = cfg.gmm_config().map_err(usage)?;
    let nat = parse_manifest(required(&cfg.paths.nat, "nat")?)?;
    let artif = parse_manifest(required(&cfg.paths.artif, "artif")?)?;
    let model = train_detector(&nat, &artif, &features, &gmm, cache()?.as_ref())?;
    save_model(&model, &a.out)?;
    log::info!("model written to {}", a.out.display());
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let eval = parse_manifest(&a.eval)?;
    let scores = score_batch(&model, &eval, cache()?.as_ref())?;
    let preamble = vec![
        tool_line(),
        "command: score".into(),
        format!("seed: {}", a.seed),
        format!("model_sha256: {}", model.digest()),
        format!("model_seed: {}", model.metadata().seed),
        format!("eval_manifest_sha256: {}", file_digest(&a.eval)?),
        format!(
            "feature_config: {}",
            serde_json::to_string(model.feature_config()).expect("config serializes")
        ),
    ];
    write_atomic(&a.out, scores.to_tsv(&preamble).as_bytes())?;
    Ok(())
}

fn cmd_eer(a: EerArgs) -> CliResult {
    let text = read_text(&a.scores)?;
    let scores = ScoreSet::parse_tsv(&text, &a.scores)?;
    if scores.spoof_systems().iter().any(|s| s == AVERAGE_ROW) {
        return Err(Error::InvalidConfig(format!("system id '{AVERAGE_ROW}' is reserved")).into());
    }
    let res = attack_averaged_eer(&scores)?;
    let preamble = vec![
        tool_line(),
        "command: eer".into(),
        format!("seed: {}", a.seed),
        format!("scores_sha256: {}", hex::encode(Sha256::digest(text.as_bytes()))),
    ];
    let curve = a.curve.as_ref().map(|_| curve_tsv(&scores, &preamble)).transpose()?;
    write_atomic(&a.out, eer_table_tsv(&res, &preamble).as_bytes())?;
    if let (Some(path), Some(text)) = (&a.curve, curve) {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult {
    let text = read_text(&a.eer)?;
    let eers = parse_eer_table(&text, &a.eer)?;
    let opinions = match &a.opinions {
        Some(p) => Some(parse_opinions(&read_text(p)?, p)?),
        None => None,
    };
    let rows = build_report(&eers, opinions.as_deref())?;
    let mut preamble = vec![
        tool_line(),
        "command: report".into(),
        format!("seed: {}", a.seed),
        format!("eer_sha256: {}", hex::encode(Sha256::digest(text.as_bytes()))),
    ];
    if let Some(p) = &a.opinions {
        preamble.push(format!("opinions_sha256: {}", file_digest(p)?));
    }
    write_atomic(&a.out, report_tsv(&rows, &preamble).as_bytes())?;
    Ok(())
}

fn cmd_grid(a: GridArgs) -> CliResult {
    let mut cfg = resolve_config(&a.opts)?;
    if let Some(p) = &a.eval {
        cfg.paths.eval = Some(p.clone());
    }
    let variants = parse_variants(&a.variants).map_err(usage)?;
    let sizes = parse_gaussians(&a.gaussians).map_err(usage)?;
    let features = cfg.feature_config().map_err(usage)?;
    let gmm = cfg.gmm_config().map_err(usage)?;
    let nat_m = parse_manifest(required(&cfg.paths.nat, "nat")?)?;
    let artif_m = parse_manifest(required(&cfg.paths.artif, "artif")?)?;
    let eval_m = parse_manifest(required(&cfg.paths.eval, "eval")?)?;
    let cache = cache()?;
    let nat = StaticSet::extract(&nat_m, &features, cache.as_ref())?;
    let artif = StaticSet::extract(&artif_m, &features, cache.as_ref())?;
    let eval = StaticSet::extract(&eval_m, &features, cache.as_ref())?;
    let rows = run_grid(&nat, &artif, &eval, &features, &gmm, &variants, &sizes);
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid cells failed", rows.len());
    }
    let preamble = vec![
        tool_line(),
        "command: grid".into(),
        format!("seed: {}", cfg.seed),
        format!("config: {}", cfg.to_json_line()),
    ];
    write_atomic(&a.out, grid_tsv(&rows, &preamble).as_bytes())?;
    Ok(())
}
