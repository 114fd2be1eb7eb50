//! The `otseg` commands. Flags fill a run description, a `--config` JSON
//! document overrides it key by key, and the merged run is validated before
//! any image is read.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use otseg_core::coseg::{CosegConfig, CosegVariant};
use otseg_core::features::FeatureKind;
use otseg_core::io;
use otseg_core::models::{SegConfig, Variant};
use otseg_core::pipeline::{build_codebook, cosegment_images, segment_image, CodebookFile, FeatureConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Exit status when outputs were written but the solver hit `max_iter`.
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] otseg_core::Error),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "otseg", version, about = "Histogram segmentation with optimal-transport data terms")]
pub struct Cli {
    /// Worker threads for the solver.
    #[arg(long, global = true, env = "OTSEG_THREADS")]
    pub threads: Option<usize>,

    /// Exit 0 even when the solver stopped at `max_iter`.
    #[arg(long, global = true)]
    pub allow_maxiter: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a colour codebook and write it as JSON.
    Codebook(CodebookArgs),
    /// Segment one image from a scribble mask.
    Segment(SegmentArgs),
    /// Segment the common object of several images.
    Coseg(CosegArgs),
    /// Compare a label image with ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long, value_parser = parse_features)]
    pub features: Option<FeatureKind>,
    /// Codebook size; defaults to 8^channels, capped by the distinct colours.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub kmeans_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    #[arg(long = "image", num_args = 1..)]
    pub images: Vec<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Indexed mask: 0 unlabeled, k marks label k.
    #[arg(long)]
    pub scribbles: Option<PathBuf>,
    /// Codebook JSON from `otseg codebook`; fitted on the image when absent.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// 16-bit probability PNG; with more than two labels one file per
    /// phase, named `<stem>_<phase>.png`.
    #[arg(long)]
    pub out_prob: Option<PathBuf>,
    #[arg(long)]
    pub out_labels: Option<PathBuf>,
    /// Raw `f64` dump of the probability map(s), named like `--out-prob`.
    #[arg(long)]
    pub out_raw: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CosegArgs {
    #[arg(long = "images", num_args = 2..)]
    pub images: Vec<PathBuf>,
    #[arg(long, value_parser = parse_coseg_variant)]
    pub variant: Option<CosegVariant>,
    /// Histogram dissimilarity of the pairwise models.
    #[arg(long, value_parser = parse_variant)]
    pub dissimilarity: Option<Variant>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also write `prob_<i>.raw` float dumps.
    #[arg(long)]
    pub out_raw: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_features(s: &str) -> std::result::Result<FeatureKind, String> {
    s.parse().map_err(|e: otseg_core::Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: otseg_core::Error| e.to_string())
}

fn parse_coseg_variant(s: &str) -> std::result::Result<CosegVariant, String> {
    s.parse().map_err(|e: otseg_core::Error| e.to_string())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookRun {
    pub images: Vec<PathBuf>,
    pub features: FeatureConfig,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRun {
    pub image: Option<PathBuf>,
    pub scribbles: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    pub features: FeatureConfig,
    pub solver: SegConfig,
    pub out_prob: Option<PathBuf>,
    pub out_labels: Option<PathBuf>,
    pub out_raw: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosegRun {
    pub images: Vec<PathBuf>,
    pub features: FeatureConfig,
    pub solver: CosegConfig,
    pub out_dir: Option<PathBuf>,
    pub out_raw: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    pub labels: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `run` with the keys of the JSON document at `config` replacing its own.
/// Unknown keys anywhere in the document are rejected.
pub fn with_config<T: Serialize + DeserializeOwned>(run: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(run);
    };
    let text = read(path)?;
    let over: Value = serde_json::from_slice(&text)?;
    if !over.is_object() {
        return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
    }
    let mut base = serde_json::to_value(run)?;
    merge(&mut base, over);
    Ok(serde_json::from_value(base)?)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| CliError::Usage(format!("missing {what} (flag --{what} or key \"{what}\" in the config)")))
}

fn feature_config(args: &FeatureArgs) -> FeatureConfig {
    let mut f = FeatureConfig::default();
    if let Some(v) = args.features {
        f.features = v;
    }
    f.bins = args.bins.or(f.bins);
    f.seed = args.seed.unwrap_or(f.seed);
    f.kmeans_iter = args.kmeans_iter.unwrap_or(f.kmeans_iter);
    f
}

impl SolverArgs {
    fn apply(&self, rho: &mut f64, lambda: &mut f64, threshold: &mut f64, tol: &mut f64, max_iter: &mut usize) {
        *rho = self.rho.unwrap_or(*rho);
        *lambda = self.lambda.unwrap_or(*lambda);
        *threshold = self.threshold.unwrap_or(*threshold);
        *tol = self.tol.unwrap_or(*tol);
        *max_iter = self.max_iter.unwrap_or(*max_iter);
    }
}

impl CodebookArgs {
    pub fn run_config(&self) -> Result<CodebookRun> {
        let run = CodebookRun { images: self.images.clone(), features: feature_config(&self.features), out: self.out.clone() };
        with_config(run, self.config.as_deref())
    }
}

impl SegmentArgs {
    pub fn run_config(&self) -> Result<SegmentRun> {
        let mut solver = SegConfig::default();
        if let Some(v) = self.variant {
            solver.variant = v;
        }
        let s = &mut solver;
        self.solver.apply(&mut s.rho, &mut s.lambda, &mut s.threshold, &mut s.tol, &mut s.max_iter);
        let run = SegmentRun {
            image: self.image.clone(),
            scribbles: self.scribbles.clone(),
            codebook: self.codebook.clone(),
            features: feature_config(&self.features),
            solver,
            out_prob: self.out_prob.clone(),
            out_labels: self.out_labels.clone(),
            out_raw: self.out_raw.clone(),
        };
        with_config(run, self.config.as_deref())
    }
}

impl CosegArgs {
    pub fn run_config(&self) -> Result<CosegRun> {
        let mut solver = CosegConfig::default();
        if let Some(v) = self.variant {
            solver.variant = v;
        }
        if let Some(v) = self.dissimilarity {
            solver.dissimilarity = v;
        }
        solver.delta = self.delta.unwrap_or(solver.delta);
        let s = &mut solver;
        self.solver.apply(&mut s.rho, &mut s.lambda, &mut s.threshold, &mut s.tol, &mut s.max_iter);
        let run = CosegRun {
            images: self.images.clone(),
            features: feature_config(&self.features),
            solver,
            out_dir: self.out_dir.clone(),
            out_raw: self.out_raw,
        };
        with_config(run, self.config.as_deref())
    }
}

impl EvalArgs {
    pub fn run_config(&self) -> Result<EvalRun> {
        let run = EvalRun { labels: self.labels.clone(), truth: self.truth.clone() };
        with_config(run, self.config.as_deref())
    }
}

/// Runs a command, printing its report to `out`. Returns whether the solver
/// converged (always `true` for commands without a solve).
pub fn run(command: &Command, out: &mut dyn Write) -> Result<bool> {
    let report = match command {
        Command::Codebook(a) => codebook(&a.run_config()?, out).map(|()| true),
        Command::Segment(a) => segment(&a.run_config()?, out),
        Command::Coseg(a) => coseg(&a.run_config()?, out),
        Command::Eval(a) => eval(&a.run_config()?, out).map(|()| true),
    };
    out.flush().map_err(|source| CliError::File { path: "<stdout>".into(), source })?;
    report
}

fn print(out: &mut dyn Write, value: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)
        .map_err(|source| CliError::File { path: "<stdout>".into(), source })
}

pub fn codebook(run: &CodebookRun, out: &mut dyn Write) -> Result<()> {
    if run.images.is_empty() {
        return Err(CliError::Usage("missing image (flag --image or key \"images\" in the config)".into()));
    }
    let images = run.images.iter().map(|p| io::read_image(p).map_err(|e| locate(p, e))).collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = images.iter().collect();
    let file = build_codebook(&refs, &run.features)?;
    let text = serde_json::to_string_pretty(&file)? + "\n";
    match &run.out {
        Some(p) => write(p, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::File { path: "<stdout>".into(), source }),
    }
}

fn locate(path: &Path, e: otseg_core::Error) -> CliError {
    match e {
        otseg_core::Error::Io(source) => CliError::File { path: path.to_owned(), source },
        other => CliError::Usage(format!("{}: {other}", path.display())),
    }
}

/// `base.png` for a single map, `base_<k>.png` for several.
pub fn phase_path(base: &Path, phase: usize, phases: usize) -> PathBuf {
    if phases == 1 {
        return base.to_owned();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match base.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_{phase}.{ext}"),
        None => format!("{stem}_{phase}"),
    };
    base.with_file_name(name)
}

pub fn segment(run: &SegmentRun, out: &mut dyn Write) -> Result<bool> {
    run.solver.validate()?;
    let image_path = required(run.image.clone(), "image")?;
    let scribble_path = required(run.scribbles.clone(), "scribbles")?;
    let codebook: Option<CodebookFile> = match &run.codebook {
        Some(p) => Some(serde_json::from_slice(&read(p)?)?),
        None => None,
    };
    let image = io::read_image(&image_path).map_err(|e| locate(&image_path, e))?;
    let scribbles = io::decode_scribbles(&read(&scribble_path)?).map_err(|e| locate(&scribble_path, e))?;

    let start = Instant::now();
    let seg = segment_image(&image, &scribbles, codebook, &run.features, &run.solver, true, None)?;
    let wall = start.elapsed();
    let r = &seg.result;
    let (w, h) = (r.width, r.height);
    let phases = r.maps.len();
    if let Some(base) = &run.out_prob {
        for (k, map) in r.maps.iter().enumerate() {
            write(&phase_path(base, k, phases), &io::encode_prob16(w, h, map)?)?;
        }
    }
    if let Some(base) = &run.out_raw {
        for (k, map) in r.maps.iter().enumerate() {
            write(&phase_path(base, k, phases), &io::encode_raw(w, h, map)?)?;
        }
    }
    if let Some(p) = &run.out_labels {
        write(p, &io::encode_labels(w, h, &io::quantized_labels(&r.maps, run.solver.threshold))?)?;
    }
    print(
        out,
        &json!({
            "variant": run.solver.variant.to_string(),
            "bins": seg.codebook.codebook.len(),
            "phases": seg.priors.len(),
            "energy": r.energy,
            "iterations": r.report.iterations,
            "converged": r.report.converged,
            "residual": r.report.residual(),
            "near_binarity": r.near_binarity,
            "wall_time_s": wall.as_secs_f64(),
        }),
    )?;
    Ok(r.report.converged)
}

pub fn coseg(run: &CosegRun, out: &mut dyn Write) -> Result<bool> {
    run.solver.validate(run.images.len())?;
    let dir = required(run.out_dir.clone(), "out_dir")?;
    let images = run.images.iter().map(|p| io::read_image(p).map_err(|e| locate(p, e))).collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = images.iter().collect();

    let start = Instant::now();
    let cs = cosegment_images(&refs, &run.features, &run.solver, true, None)?;
    let wall = start.elapsed();
    let r = &cs.result;
    std::fs::create_dir_all(&dir).map_err(|source| CliError::File { path: dir.clone(), source })?;
    for (i, (map, im)) in r.maps.iter().zip(&images).enumerate() {
        let (w, h) = (im.width, im.height);
        let mask = io::quantized_labels(std::slice::from_ref(map), run.solver.threshold);
        write(&dir.join(format!("mask_{i}.png")), &io::encode_labels(w, h, &mask)?)?;
        write(&dir.join(format!("prob_{i}.png")), &io::encode_prob16(w, h, map)?)?;
        if run.out_raw {
            write(&dir.join(format!("prob_{i}.raw")), &io::encode_raw(w, h, map)?)?;
        }
    }
    if let Some(b) = &r.barycenter {
        let doc = json!({ "histogram": b, "centroids": cs.codebook.codebook.centroids });
        write(&dir.join("barycenter.json"), (serde_json::to_string_pretty(&doc)? + "\n").as_bytes())?;
    }
    let foreground: Vec<usize> = r.masks.iter().map(|m| m.iter().filter(|&&v| v == 1).count()).collect();
    print(
        out,
        &json!({
            "variant": run.solver.variant.as_str(),
            "bins": cs.codebook.codebook.len(),
            "energy": r.energy,
            "iterations": r.report.iterations,
            "converged": r.report.converged,
            "residual": r.report.residual(),
            "near_binarity": r.near_binarity,
            "foreground_pixels": foreground,
            "wall_time_s": wall.as_secs_f64(),
        }),
    )?;
    Ok(r.report.converged)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub pixel_accuracy: f64,
    /// Per class present in either image; `|A ∩ B| / |A ∪ B|`.
    pub jaccard: BTreeMap<u8, f64>,
}

pub fn metrics(labels: &[u8], truth: &[u8]) -> Metrics {
    let agree = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    let mut classes: Vec<u8> = labels.iter().chain(truth).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let jaccard = classes
        .into_iter()
        .map(|c| {
            let inter = labels.iter().zip(truth).filter(|(a, b)| **a == c && **b == c).count();
            let union = labels.iter().zip(truth).filter(|(a, b)| **a == c || **b == c).count();
            (c, inter as f64 / union as f64)
        })
        .collect();
    Metrics { pixel_accuracy: agree as f64 / labels.len().max(1) as f64, jaccard }
}

pub fn eval(run: &EvalRun, out: &mut dyn Write) -> Result<()> {
    let lp = required(run.labels.clone(), "labels")?;
    let tp = required(run.truth.clone(), "truth")?;
    let (lw, lh, labels) = io::decode_labels(&read(&lp)?).map_err(|e| locate(&lp, e))?;
    let (tw, th, truth) = io::decode_labels(&read(&tp)?).map_err(|e| locate(&tp, e))?;
    if (lw, lh) != (tw, th) {
        return Err(otseg_core::Error::DimensionMismatch(format!("{lw}x{lh} labels against {tw}x{th} truth")).into());
    }
    print(out, &serde_json::to_value(metrics(&labels, &truth))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_replaces_leaves_and_keeps_siblings() {
        let mut base = json!({"a": 1, "b": {"c": 2, "d": 3}});
        merge(&mut base, json!({"b": {"c": 5}, "e": null}));
        assert_eq!(base, json!({"a": 1, "b": {"c": 5, "d": 3}, "e": null}));
    }

    #[test]
    fn phase_paths() {
        assert_eq!(phase_path(Path::new("/x/p.png"), 0, 1), PathBuf::from("/x/p.png"));
        assert_eq!(phase_path(Path::new("/x/p.png"), 2, 3), PathBuf::from("/x/p_2.png"));
        assert_eq!(phase_path(Path::new("p"), 1, 3), PathBuf::from("p_1"));
    }

    #[test]
    fn metrics_by_hand() {
        let m = metrics(&[1, 1, 0, 0], &[0, 1, 1, 0]);
        assert_eq!(m.pixel_accuracy, 0.5);
        assert!((m.jaccard[&1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.jaccard[&0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(metrics(&[0, 1], &[1, 0]).jaccard, BTreeMap::from([(0, 0.0), (1, 0.0)]));
    }
}
