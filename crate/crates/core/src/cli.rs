//! The `ops` command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::engine::{read_proposals_from, run_discovery, write_proposals, write_pseudo_labels, EngineError, ExemplarSource, ProposalRecord, StaticFeatures};
use crate::fusion::{fuse_document, parse_fusion_input, FusionError};
use crate::manifest::RunManifest;
use crate::metrics::{evaluate_with, match_segments, MetricReport, MetricsError};
use crate::split::{
    build_open_set_split, default_png_dir, load_coco_panoptic, parse_split_list, preset, save_coco_panoptic, CocoIndex,
    SplitError, SplitRole,
};
use crate::synth::{generate_synthetic_features, generate_synthetic_panoptic, read_truth, score_discovery, write_truth, SynthError};
use crate::types::SplitSpec;

/// Environment variable holding the default evaluation thread count.
pub const THREADS_ENV: &str = "OPS_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// Stable token naming the failing stage.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Split(_) => "split",
            CliError::Metrics(_) => "metrics",
            CliError::Engine(_) => "engine",
            CliError::Fusion(_) => "fusion",
            CliError::Synth(_) => "synth",
            CliError::Input(_) => "input",
        }
    }

    /// One line: `error: <kind>: <message>`.
    pub fn line(&self) -> String {
        format!("error: {}: {}", self.kind(), self.to_string().replace('\n', " "))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "ops", version, about = "Open-set panoptic segmentation tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an open-set split from a COCO panoptic dataset.
    BuildSplit(BuildSplitArgs),
    /// Compute PQ/SQ/RQ of predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Discover unknown classes from a proposal-feature file.
    Discover(DiscoverArgs),
    /// Fuse instance and semantic predictions into panoptic maps.
    Fuse(FuseArgs),
    /// Generate synthetic data with known ground truth.
    Synth(SynthArgs),
    /// Render a saved metric report or score pseudo-labels.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BuildSplitArgs {
    /// Preset (5, 10, 20) or a JSON split list.
    #[arg(long)]
    pub split: String,
    /// Split to use from a split list; defaults to the last one.
    #[arg(long)]
    pub split_name: Option<String>,
    #[arg(long, value_parser = parse_role)]
    pub role: SplitRole,
    /// Source COCO panoptic JSON.
    #[arg(long)]
    pub src: PathBuf,
    /// PNG directory of the source; defaults to the JSON path without extension.
    #[arg(long)]
    pub src_png: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_png: Option<PathBuf>,
}

fn parse_role(s: &str) -> Result<SplitRole, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub gt_png: Option<PathBuf>,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub pred_png: Option<PathBuf>,
    /// Worker threads; defaults to $OPS_THREADS, then the number of CPUs.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Proposal-feature file.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator truth to score the result against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Fusion input JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// COCO panoptic JSON supplying the category table.
    #[arg(long)]
    pub categories: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_png: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Features,
    Panoptic,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["metrics", "labels"])))]
pub struct ReportArgs {
    /// JSON report written by `evaluate --out`.
    #[arg(long, requires = "categories")]
    pub metrics: Option<PathBuf>,
    /// COCO panoptic JSON naming the categories.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Pseudo-label CSV written by `discover`.
    #[arg(long, requires = "truth")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_file(path: &Path, data: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, data).map_err(io_err(path))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::parse(&read_text(p)?)?),
        None => Ok(RunConfig::default()),
    }
}

/// `out.json` → `out.manifest.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

struct Manifest {
    inner: RunManifest,
}

impl Manifest {
    fn new(argv: &[String], seed: Option<u64>, cfg: Option<&RunConfig>) -> Self {
        Self {
            inner: RunManifest::new(argv.to_vec(), seed, cfg.map(RunConfig::to_text).unwrap_or_default()),
        }
    }
    fn input(&mut self, p: &Path) -> Result<(), CliError> {
        self.inner.add_input(p).map_err(io_err(p))
    }
    fn output(&mut self, p: &Path) -> Result<(), CliError> {
        self.inner.add_output(p).map_err(io_err(p))
    }
    fn write(&self, p: &Path) -> Result<(), CliError> {
        self.inner.write(p).map_err(io_err(p))
    }
}

fn resolve_split(args: &BuildSplitArgs) -> Result<(SplitSpec, Vec<SplitSpec>), CliError> {
    if let Some(spec) = preset(&args.split) {
        if args.split_name.is_some() {
            return Err(CliError::Input("--split-name needs a split list file".into()));
        }
        return Ok((spec, Vec::new()));
    }
    let path = Path::new(&args.split);
    if !path.is_file() {
        return Err(CliError::Input(format!("--split {:?} is neither a preset (5, 10, 20) nor a file", args.split)));
    }
    let list = parse_split_list(&read_text(path)?)?.splits;
    let spec = match &args.split_name {
        Some(name) => list.iter().find(|s| &s.name == name).cloned(),
        None => list.last().cloned(),
    }
    .ok_or_else(|| CliError::Input(format!("split {:?} not found in {}", args.split_name.as_deref().unwrap_or(""), path.display())))?;
    Ok((spec, list))
}

fn build_split(args: &BuildSplitArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let (spec, library) = resolve_split(args)?;
    let src_png = args.src_png.clone().unwrap_or_else(|| default_png_dir(&args.src));
    let out_png = args.out_png.clone().unwrap_or_else(|| default_png_dir(&args.out));
    let src = load_coco_panoptic(&args.src, &src_png)?;
    let built = build_open_set_split(&src, &spec, &library, args.role)?;
    save_coco_panoptic(&built, &args.out, &out_png)?;

    let mut m = Manifest::new(argv, None, None);
    m.input(&args.src)?;
    m.input(&src_png)?;
    if Path::new(&args.split).is_file() {
        m.input(Path::new(&args.split))?;
    }
    m.output(&args.out)?;
    m.output(&out_png)?;
    m.write(&sidecar(&args.out))?;
    let unknown: Vec<&str> = built.manifest.categories.unknowns().map(|c| c.name.as_str()).collect();
    writeln!(out, "split {} ({:?}): {} images, unknown classes: {}", spec.name, args.role, built.maps.len(), unknown.join(", "))
        .map_err(io_err(Path::new("<stdout>")))?;
    Ok(())
}

/// Thread count from the flag, then the environment, then the CPU count.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return if n == 0 { Err(CliError::Input("--threads must be positive".into())) } else { Ok(n) };
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Input(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Evaluates a COCO panoptic prediction file against ground truth.
pub fn evaluate_files(
    gt_json: &Path,
    gt_png: &Path,
    pred_json: &Path,
    pred_png: &Path,
    threads: usize,
) -> Result<(MetricReport, crate::types::CategoryTable), CliError> {
    let gt = CocoIndex::read(gt_json)?;
    let pred = CocoIndex::read(pred_json)?;
    let ids: Vec<u64> = gt.manifest.images.iter().map(|i| i.image_id).collect();
    if let Some(extra) = pred.manifest.images.iter().find(|i| gt.position(i.image_id).is_none()) {
        return Err(CliError::Input(format!("prediction image {} is not in the ground truth", extra.image_id)));
    }
    let cats = gt.manifest.categories.clone();
    let load = |id: u64, index: &CocoIndex, dir: &Path| -> Result<crate::types::PanopticMap, MetricsError> {
        let idx = index.position(id).ok_or_else(|| MetricsError::Load { image_id: id, message: "missing prediction".into() })?;
        index.load_map(idx, dir).map_err(|e| MetricsError::Load { image_id: id, message: e.to_string() })
    };
    let report = evaluate_with(&ids, &cats, threads, |id| {
        let g = load(id, &gt, gt_png)?;
        let p = load(id, &pred, pred_png)?;
        match_segments(&g, &p, &cats)
    })?;
    Ok((report, cats))
}

fn evaluate(args: &EvaluateArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let threads = resolve_threads(args.threads)?;
    let gt_png = args.gt_png.clone().unwrap_or_else(|| default_png_dir(&args.gt));
    let pred_png = args.pred_png.clone().unwrap_or_else(|| default_png_dir(&args.pred));
    let (report, cats) = evaluate_files(&args.gt, &gt_png, &args.pred, &pred_png, threads)?;
    let json = report.to_json() + "\n";
    let text = match args.format {
        Format::Text => report.to_text(&cats),
        Format::Json => json.clone(),
    };
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))?;
    if let Some(path) = &args.out {
        write_file(path, &json)?;
        let mut m = Manifest::new(argv, None, None);
        for p in [&args.gt, &gt_png, &args.pred, &pred_png] {
            m.input(p)?;
        }
        m.output(path)?;
        m.write(&sidecar(path))?;
    }
    Ok(())
}

/// Groups records into steps of `images_per_step` images, keeping file order.
pub fn batches_by_image(records: Vec<ProposalRecord>, images_per_step: usize) -> Vec<Vec<ProposalRecord>> {
    let mut images: Vec<Vec<ProposalRecord>> = Vec::new();
    let mut slot: BTreeMap<u64, usize> = BTreeMap::new();
    for r in records {
        let i = *slot.entry(r.image_id).or_insert_with(|| {
            images.push(Vec::new());
            images.len() - 1
        });
        images[i].push(r);
    }
    images.chunks(images_per_step.max(1)).map(|c| c.concat()).collect()
}

#[derive(Serialize)]
struct ClassSummary {
    id: u32,
    founded_at: u64,
    exemplars: usize,
    clustered: usize,
    mined: usize,
}

fn discover(args: &DiscoverArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.engine.rng_seed = seed;
    }
    if cfg.discover.images_per_step == 0 {
        return Err(CliError::Input("discover.images_per_step must be positive".into()));
    }
    let file = fs::File::open(&args.features).map_err(io_err(&args.features))?;
    let (dim, records) = read_proposals_from(std::io::BufReader::new(file))?;
    let provider = StaticFeatures::from_records(&records);
    let batches = batches_by_image(records, cfg.discover.images_per_step);
    let result = run_discovery(&batches, dim, &cfg.engine, &provider)?;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let labels_path = args.out.join("pseudo_labels.csv");
    let mut csv = Vec::new();
    write_pseudo_labels(&mut csv, &result.pseudo_labels)?;
    write_file(&labels_path, csv)?;
    let classes: Vec<ClassSummary> = result
        .store
        .classes
        .values()
        .map(|c| {
            let mined = c.exemplars.iter().filter(|e| e.source == ExemplarSource::Mined).count();
            ClassSummary { id: c.id, founded_at: c.founded_at, exemplars: c.exemplars.len(), clustered: c.exemplars.len() - mined, mined }
        })
        .collect();
    let classes_path = args.out.join("classes.json");
    write_file(&classes_path, serde_json::to_string_pretty(&classes).expect("serializes") + "\n")?;
    let rounds_path = args.out.join("rounds.json");
    write_file(&rounds_path, serde_json::to_string_pretty(&result.rounds).expect("serializes") + "\n")?;

    let mut m = Manifest::new(argv, Some(cfg.engine.rng_seed), Some(&cfg));
    m.input(&args.features)?;
    if let Some(c) = &args.config {
        m.input(c)?;
    }
    let w = |out: &mut dyn Write, s: String| out.write_all(s.as_bytes()).map_err(io_err(Path::new("<stdout>")));
    w(out, format!(
        "steps={} rounds={} classes={} exemplars={}\n",
        batches.len(),
        result.rounds.len(),
        result.store.classes.len(),
        result.store.exemplar_count()
    ))?;
    if let Some(truth_path) = &args.truth {
        let file = fs::File::open(truth_path).map_err(io_err(truth_path))?;
        let truth = read_truth(file)?;
        let score = score_discovery(&result.pseudo_labels, &truth, 0.9);
        let score_path = args.out.join("score.json");
        write_file(&score_path, serde_json::to_string_pretty(&score).expect("serializes") + "\n")?;
        w(out, format_score(&score))?;
        m.input(truth_path)?;
        m.output(&score_path)?;
    }
    for p in [&labels_path, &classes_path, &rounds_path] {
        m.output(p)?;
    }
    m.write(&args.out.join("manifest.json"))
}

fn format_score(s: &crate::synth::DiscoveryScore) -> String {
    let min_purity = s.classes.iter().map(|c| c.purity).fold(1.0f64, f64::min);
    format!(
        "recovered={}/{} min_purity={:.4} distractor_acceptance={:.4}\n",
        s.recovered.len(),
        s.planted,
        if s.classes.is_empty() { 0.0 } else { min_purity },
        s.distractor_acceptance()
    )
}

fn fuse(args: &FuseArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let cats = CocoIndex::read(&args.categories)?.manifest.categories;
    let input = parse_fusion_input(&read_text(&args.input)?)?;
    let dataset = fuse_document(&input, &cats, &cfg.fusion, "fused")?;
    let out_png = args.out_png.clone().unwrap_or_else(|| default_png_dir(&args.out));
    save_coco_panoptic(&dataset, &args.out, &out_png)?;
    let mut m = Manifest::new(argv, None, Some(&cfg));
    m.input(&args.input)?;
    m.input(&args.categories)?;
    if let Some(c) = &args.config {
        m.input(c)?;
    }
    m.output(&args.out)?;
    m.output(&out_png)?;
    m.write(&sidecar(&args.out))?;
    let segments: usize = dataset.maps.iter().map(|m| m.segments.len()).sum();
    writeln!(out, "fused {} images, {} segments", dataset.maps.len(), segments).map_err(io_err(Path::new("<stdout>")))
}

fn synth(args: &SynthArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.synth.rng_seed = seed;
    }
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut m = Manifest::new(argv, Some(cfg.synth.rng_seed), Some(&cfg));
    if let Some(c) = &args.config {
        m.input(c)?;
    }
    let summary = match args.kind {
        SynthKind::Features => {
            let s = generate_synthetic_features(&cfg.synth)?;
            let prop_path = args.out.join("proposals.opsf");
            let mut bytes = Vec::new();
            write_proposals(&mut bytes, s.feature_dim, &s.records)?;
            write_file(&prop_path, bytes)?;
            let truth_path = args.out.join("truth.csv");
            let mut csv = Vec::new();
            write_truth(&mut csv, &s.truth)?;
            write_file(&truth_path, csv)?;
            m.output(&prop_path)?;
            m.output(&truth_path)?;
            format!("{} records, dim {}, {} planted classes\n", s.records.len(), s.feature_dim, s.centroids.len())
        }
        SynthKind::Panoptic => {
            let s = generate_synthetic_panoptic(&cfg.synth)?;
            for (name, ds) in [("gt", &s.gt), ("pred", &s.pred)] {
                let json = args.out.join(format!("{name}.json"));
                let png = args.out.join(name);
                save_coco_panoptic(ds, &json, &png)?;
                m.output(&json)?;
                m.output(&png)?;
            }
            let expected = args.out.join("expected.json");
            write_file(&expected, s.expected.to_json() + "\n")?;
            m.output(&expected)?;
            format!("{} image pairs\n", s.gt.maps.len())
        }
    };
    m.write(&args.out.join("manifest.json"))?;
    out.write_all(summary.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = if let Some(path) = &args.metrics {
        let cats_path = args.categories.as_ref().expect("clap enforces --categories");
        let cats = CocoIndex::read(cats_path)?.manifest.categories;
        let report: MetricReport = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        report.to_text(&cats)
    } else {
        let labels_path = args.labels.as_ref().expect("clap enforces the group");
        let truth_path = args.truth.as_ref().expect("clap enforces --truth");
        let labels = crate::engine::read_pseudo_labels(fs::File::open(labels_path).map_err(io_err(labels_path))?)?;
        let truth = read_truth(fs::File::open(truth_path).map_err(io_err(truth_path))?)?;
        format_score(&score_discovery(&labels, &truth, 0.9))
    };
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

/// Runs a parsed command line; `argv` is recorded in manifests.
pub fn run(cli: &Cli, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::BuildSplit(a) => build_split(a, argv, out),
        Command::Evaluate(a) => evaluate(a, argv, out),
        Command::Discover(a) => discover(a, argv, out),
        Command::Fuse(a) => fuse(a, argv, out),
        Command::Synth(a) => synth(a, argv, out),
        Command::Report(a) => report(a, out),
    }
}
