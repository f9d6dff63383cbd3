//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subsearch_core::embeddings::{l2_normalize, EmbeddingVector};
use subsearch_core::eval::{evaluate, perturbation_sweep, SweepSpec, TextField};
use subsearch_core::{CandidateMode, DistanceKind, Fusion, IndexedCollection, RankingConfig};

use crate::annotations::read_annotations;
use crate::embed::EmbedClient;
use crate::report::{sweep_csv, ReportJson};
use crate::search::{run_search, Overrides, QueryPayload, SearchRequest};
use crate::server::{serve, AppState};
use crate::store::{self, decode_matrix, load_index, save_index, Manifest, Matrix, MAGIC};

#[derive(Debug, Parser)]
#[command(name = "subsearch", version, about = "Region-constrained image search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize vectors, validate a manifest and write an index directory.
    BuildIndex(BuildIndexArgs),
    /// Rank images for one request JSON.
    Query(QueryArgs),
    /// Evaluate annotations and write a report JSON.
    Eval(EvalArgs),
    /// Evaluate over a grid of query perturbations and write a CSV.
    Sweep(SweepArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    /// Manifest JSON; its `matrix_file` is used when --vectors is absent.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Raw vectors: a SUBEMB1 matrix or JSON Lines with one array per row.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArg {
    #[arg(long, env = "SUBSEARCH_INDEX")]
    pub index: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankingArgs {
    #[arg(long, env = "SUBSEARCH_DISTANCE")]
    pub distance: Option<DistanceKind>,
    #[arg(long, env = "SUBSEARCH_FUSION")]
    pub fusion: Option<Fusion>,
    #[arg(long, env = "SUBSEARCH_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "SUBSEARCH_CANDIDATE_MODE")]
    pub candidate_mode: Option<CandidateMode>,
}

impl RankingArgs {
    fn config(&self) -> Result<RankingConfig, CliError> {
        let d = RankingConfig::default();
        RankingConfig::new(
            self.distance.unwrap_or(d.distance),
            self.fusion.unwrap_or(d.fusion),
            self.alpha.unwrap_or(d.alpha()),
            self.candidate_mode.unwrap_or(d.candidate_mode),
        )
        .map_err(CliError::usage)
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub index: IndexArg,
    #[arg(long)]
    pub request: PathBuf,
    #[arg(long, env = "SUBSEARCH_TOP_K")]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub ranking: RankingArgs,
    /// Needed only for text requests.
    #[arg(long, env = "SUBSEARCH_EMBED_URL")]
    pub embed_url: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub index: IndexArg,
    #[arg(long)]
    pub annotations: PathBuf,
    #[command(flatten)]
    pub ranking: RankingArgs,
    #[arg(long, default_value = "long")]
    pub text_field: TextField,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub index: IndexArg,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "iou")]
    pub distance: Vec<DistanceKind>,
    #[arg(long, value_delimiter = ',', default_value = "linear")]
    pub fusion: Vec<Fusion>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "all_overlap")]
    pub candidate_mode: Vec<CandidateMode>,
    #[arg(long, default_value = "long")]
    pub text_field: TextField,
    /// Shift sigmas in pixels of the reference frame.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma_shift: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma_area: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference frame width in pixels; defaults to the indexed frame size
    /// when all frames share one.
    #[arg(long, requires = "frame_height")]
    pub frame_width: Option<u32>,
    #[arg(long, requires = "frame_width")]
    pub frame_height: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub index: IndexArg,
    #[arg(long, env = "SUBSEARCH_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "SUBSEARCH_EMBED_URL")]
    pub embed_url: Option<String>,
    #[arg(long, env = "SUBSEARCH_IMAGES_DIR")]
    pub images_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl CliError {
    fn usage(e: impl ToString) -> Self {
        CliError::Usage(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Data(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(err.exit_code())
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildIndex(a) => build_index(&a),
        Command::Query(a) => query(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Serve(a) => serve_cmd(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn json_text<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn open_index(path: &Path) -> Result<IndexedCollection, CliError> {
    load_index(path).map_err(|e| {
        CliError::Data(anyhow::Error::new(e).context(format!("loading index {}", path.display())))
    })
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

/// Reads raw vectors from a SUBEMB1 file or JSON Lines arrays.
fn read_vectors(path: &Path) -> anyhow::Result<Matrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(&MAGIC[..6]) {
        return Ok(decode_matrix(&bytes)?);
    }
    let text = std::str::from_utf8(&bytes)?;
    let mut data = Vec::new();
    let mut dim = 0;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f32> = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("{}: line {}: {e}", path.display(), i + 1))?;
        if rows == 0 {
            dim = row.len();
        } else if row.len() != dim {
            anyhow::bail!(
                "{}: line {}: row has {} values, expected {dim}",
                path.display(),
                i + 1,
                row.len()
            );
        }
        data.extend(row);
        rows += 1;
    }
    if rows == 0 || dim == 0 {
        anyhow::bail!("{}: no vectors", path.display());
    }
    Ok(Matrix { dim, rows, data })
}

fn build_index(a: &BuildIndexArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.manifest)?;
    let manifest = Manifest::parse(&text)?;
    let vectors = match &a.vectors {
        Some(p) => p.clone(),
        None => a
            .manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join(&manifest.matrix_file),
    };
    let raw = read_vectors(&vectors)?;
    let mut data = Vec::with_capacity(raw.data.len());
    for (row, chunk) in raw.data.chunks_exact(raw.dim).enumerate() {
        let v = EmbeddingVector::new(chunk.to_vec())
            .and_then(|v| l2_normalize(&v))
            .map_err(|e| anyhow::anyhow!("vector row {row}: {e}"))?;
        data.extend_from_slice(v.as_slice());
    }
    let coll = store::assemble(&manifest, Matrix { data, ..raw })?;
    save_index(&a.out, &coll)?;
    tracing::info!(
        images = coll.len(),
        regions = coll.region_count(),
        out = %a.out.display(),
        "index written"
    );
    Ok(())
}

fn query(a: &QueryArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.request)?;
    let req: SearchRequest =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", a.request.display()))?;
    let overrides = Overrides {
        distance: a.ranking.distance,
        fusion: a.ranking.fusion,
        alpha: a.ranking.alpha,
        candidate_mode: a.ranking.candidate_mode,
        top_k: a.top_k,
    };
    let resolved = req.resolve(&overrides)?;
    let coll = open_index(&a.index.index)?;
    let vector = match &resolved.payload {
        QueryPayload::Embedding(v) => v.clone(),
        QueryPayload::Text(t) => {
            let url = a.embed_url.as_deref().ok_or_else(|| {
                CliError::usage("text requests need --embed-url or SUBSEARCH_EMBED_URL")
            })?;
            let client = EmbedClient::new(url);
            runtime()?.block_on(client.embed_text(t))?
        }
    };
    let resp = run_search(&coll, vector, &resolved)?;
    emit(a.out.as_deref(), &json_text(&resp)?)
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let cfg = a.ranking.config()?;
    let coll = open_index(&a.index.index)?;
    let anns = read_annotations(&a.annotations)?;
    let reports = evaluate(&coll, &anns, &cfg, a.text_field, None)?;
    emit(
        a.out.as_deref(),
        &json_text(&ReportJson::new(&cfg, a.text_field, &reports))?,
    )
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let mut cfgs = Vec::new();
    for &d in &a.distance {
        for &f in &a.fusion {
            for &alpha in &a.alpha {
                for &m in &a.candidate_mode {
                    cfgs.push(RankingConfig::new(d, f, alpha, m).map_err(CliError::usage)?);
                }
            }
        }
    }
    let coll = open_index(&a.index.index)?;
    let shift_scale = match (a.frame_width, a.frame_height) {
        (Some(w), Some(h)) => (f64::from(w), f64::from(h)),
        _ => common_frame_size(&coll).ok_or_else(|| {
            CliError::usage("indexed frames differ in size; pass --frame-width and --frame-height")
        })?,
    };
    let anns = read_annotations(&a.annotations)?;
    let spec = SweepSpec {
        sigma_shift: a.sigma_shift.clone(),
        sigma_area: a.sigma_area.clone(),
        master_seed: a.seed,
        shift_scale,
    };
    for s in spec.sigma_shift.iter().chain(&spec.sigma_area) {
        if !(s.is_finite() && *s >= 0.0) {
            return Err(CliError::usage(format!("invalid sigma {s}")));
        }
    }
    let cells = perturbation_sweep(&coll, &anns, &cfgs, a.text_field, &spec)?;
    emit(a.out.as_deref(), &sweep_csv(&cells))
}

fn common_frame_size(coll: &IndexedCollection) -> Option<(f64, f64)> {
    let first = coll.images().first()?;
    let size = (first.frame_width_px, first.frame_height_px);
    coll.images()
        .iter()
        .all(|img| (img.frame_width_px, img.frame_height_px) == size)
        .then(|| (f64::from(size.0), f64::from(size.1)))
}

fn serve_cmd(a: &ServeArgs) -> Result<(), CliError> {
    let coll = open_index(&a.index.index)?;
    let state = AppState::new(coll)
        .with_embed_url(a.embed_url.as_deref())
        .with_images_dir(a.images_dir.clone());
    let rt = runtime()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        serve(listener, state).await
    })?;
    Ok(())
}
