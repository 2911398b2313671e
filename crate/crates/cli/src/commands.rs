//! Subcommand implementations.
//!
//! Each command reads its inputs, computes everything in memory, and only
//! then writes its artifacts, so a failing run never leaves partial files
//! behind. Commands return the paths they wrote. Input problems (unreadable
//! files, schema violations, bad parameters) and runtime failures map to
//! distinct process exit codes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use textline_core::classify::{extract_features, BoostModel};
use textline_core::energy::ModelPool;
use textline_core::imaging::{detect_blobs, downscale, load_pgm, save_pgm};
use textline_core::synth::{generate_scene, render_scene, SceneSpec, SyntheticScene};
use textline_core::types::{
    blobs_from_json, blobs_to_json, labeling_from_json, labeling_to_json, models_from_json,
    models_to_json,
};
use textline_core::{evalm, pearl, Error as CoreError};
use textline_core::{BlobId, Language, ModelId, TextCandidate};

use crate::config::Config;
use crate::svg::render_svg;

/// Command failure, split by whose fault it is: bad input (exit 2) versus a
/// failure while computing or writing results (exit 3).
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn input_err(context: &str, e: impl fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

fn runtime_err(context: &str, e: impl fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| input_err(&path.display().to_string(), e))
}

/// Buffered artifacts, flushed only after every output has been computed.
#[derive(Default)]
struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    fn write(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| runtime_err(&dir.display().to_string(), e))?;
                }
            }
            std::fs::write(&path, bytes)
                .map_err(|e| runtime_err(&path.display().to_string(), e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Base name of an input with its extension and role suffixes stripped, used
/// to name the artifacts derived from it.
fn artifact_stem(path: &Path) -> String {
    let name = match path.file_name() {
        Some(n) => n.to_string_lossy().into_owned(),
        None => return "out".to_string(),
    };
    let base = name.strip_suffix(".json").or_else(|| name.strip_suffix(".pgm")).unwrap_or(&name);
    let base = base.strip_suffix(".scene").unwrap_or(base);
    let base = base.strip_suffix(".blobs").unwrap_or(base);
    if base.is_empty() {
        "out".to_string()
    } else {
        base.to_string()
    }
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ModelSummary {
    id: ModelId,
    language: Language,
    inliers: Vec<BlobId>,
}

/// Self-contained record of one optimization run: the effective
/// configuration, the energy trajectory, and the per-model inlier sets.
#[derive(Serialize)]
struct RunReportDoc<'a> {
    command: &'static str,
    input: String,
    config: &'a Config,
    n_blobs: usize,
    n_models: usize,
    n_outliers: usize,
    iterations: u32,
    final_energy: f64,
    energy_trace: &'a [f64],
    models: Vec<ModelSummary>,
}

fn report_json(
    command: &'static str,
    input: &Path,
    config: &Config,
    blobs: &[TextCandidate],
    outcome: &pearl::PearlOutcome,
) -> String {
    let models = outcome
        .pool
        .models
        .iter()
        .map(|m| ModelSummary {
            id: m.id,
            language: m.language,
            inliers: outcome.labeling.support(m.id).into_iter().collect(),
        })
        .collect();
    let n_outliers =
        outcome.labeling.assignment.values().filter(|assigned| assigned.is_none()).count();
    let doc = RunReportDoc {
        command,
        input: input.display().to_string(),
        config,
        n_blobs: blobs.len(),
        n_models: outcome.pool.models.len(),
        n_outliers,
        iterations: outcome.iterations,
        final_energy: *outcome.trace.last().unwrap_or(&0.0),
        energy_trace: &outcome.trace,
        models,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub struct FitArgs<'a> {
    pub input: &'a Path,
    pub out_dir: &'a Path,
    pub config: Config,
    pub svg: bool,
}

/// Group pre-extracted blobs into lines. The input is either a JSON array of
/// blobs or a generated scene file, whose blob list is used as-is.
pub fn cmd_fit(args: &FitArgs) -> Result<Vec<PathBuf>, CliError> {
    let text = read_text(args.input)?;
    let blobs = if text.trim_start().starts_with('[') {
        blobs_from_json(&text, args.config.energy.likelihood_floor)
            .map_err(|e| input_err("blob file", e))?
    } else {
        SyntheticScene::from_json(&text).map_err(|e| input_err("scene file", e))?.blobs
    };

    let outcome =
        pearl::pearl(&blobs, &args.config.energy).map_err(|e| runtime_err("optimization", e))?;

    let stem = artifact_stem(args.input);
    let mut outputs = OutputSet::default();
    outputs.add(
        args.out_dir.join(format!("{stem}.lines.json")),
        with_newline(models_to_json(&outcome.pool.models)),
    );
    outputs.add(
        args.out_dir.join(format!("{stem}.labeling.json")),
        with_newline(labeling_to_json(&outcome.labeling)),
    );
    outputs.add(
        args.out_dir.join(format!("{stem}.report.json")),
        report_json("fit", args.input, &args.config, &blobs, &outcome),
    );
    if args.svg {
        let (w, h) = canvas_for(&blobs);
        outputs.add(
            args.out_dir.join(format!("{stem}.svg")),
            render_svg(&blobs, &outcome.pool, &outcome.labeling, w, h),
        );
    }
    outputs.write()
}

fn canvas_for(blobs: &[TextCandidate]) -> (f64, f64) {
    let mut w: f64 = 64.0;
    let mut h: f64 = 64.0;
    for b in blobs {
        w = w.max(b.bbox.right + 10.0);
        h = h.max(b.bbox.bottom + 10.0);
    }
    (w, h)
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

pub struct DetectArgs<'a> {
    pub image: &'a Path,
    /// Optional boosted-classifier model; without it every blob gets uniform
    /// category likelihoods and grouping runs on geometry alone.
    pub model: Option<&'a Path>,
    pub out_dir: &'a Path,
    pub config: Config,
    pub svg: bool,
}

/// Full pipeline on a PGM image: blob detection, per-blob classification,
/// then line grouping. Blob coordinates are in the downscaled frame the
/// detector works in.
pub fn cmd_detect(args: &DetectArgs) -> Result<Vec<PathBuf>, CliError> {
    let bytes =
        std::fs::read(args.image).map_err(|e| input_err(&args.image.display().to_string(), e))?;
    let img = load_pgm(&bytes).map_err(|e| input_err("image", e))?;

    let model = match args.model {
        None => None,
        Some(path) => {
            Some(BoostModel::from_json(&read_text(path)?).map_err(|e| input_err("model file", e))?)
        }
    };

    let small = downscale(&img, args.config.imaging.max_dim);
    let detected = detect_blobs(&small, &args.config.imaging).map_err(|e| input_err("image", e))?;

    let floor = args.config.energy.likelihood_floor;
    let mut blobs = Vec::with_capacity(detected.len());
    for blob in detected {
        let candidate = match &model {
            None => blob,
            Some(m) => {
                let raw = textline_core::classify::blob_likelihoods(m, &small, &blob.bbox, floor)
                    .map_err(|e| runtime_err("classification", e))?;
                TextCandidate::with_likelihoods(blob.id, blob.bbox, raw, floor)
                    .map_err(|e| runtime_err("classification", e))?
            }
        };
        blobs.push(candidate);
    }

    let outcome =
        pearl::pearl(&blobs, &args.config.energy).map_err(|e| runtime_err("optimization", e))?;

    let stem = artifact_stem(args.image);
    let mut outputs = OutputSet::default();
    outputs
        .add(args.out_dir.join(format!("{stem}.blobs.json")), with_newline(blobs_to_json(&blobs)));
    outputs.add(
        args.out_dir.join(format!("{stem}.lines.json")),
        with_newline(models_to_json(&outcome.pool.models)),
    );
    outputs.add(
        args.out_dir.join(format!("{stem}.labeling.json")),
        with_newline(labeling_to_json(&outcome.labeling)),
    );
    outputs.add(
        args.out_dir.join(format!("{stem}.report.json")),
        report_json("detect", args.image, &args.config, &blobs, &outcome),
    );
    if args.svg {
        outputs.add(
            args.out_dir.join(format!("{stem}.svg")),
            render_svg(
                &blobs,
                &outcome.pool,
                &outcome.labeling,
                small.width as f64,
                small.height as f64,
            ),
        );
    }
    outputs.write()
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub struct SynthArgs<'a> {
    pub spec: &'a Path,
    pub out_dir: &'a Path,
    pub seed: u64,
    pub render: bool,
}

/// Generate a synthetic labeled scene from a spec file. The same spec and
/// seed always produce byte-identical artifacts.
pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    let spec =
        SceneSpec::from_json(&read_text(args.spec)?).map_err(|e| input_err("scene spec", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let scene = generate_scene(&spec, &mut rng).map_err(|e| runtime_err("scene generation", e))?;

    let stem = format!("{}-{}", artifact_stem(args.spec), args.seed);
    let mut outputs = OutputSet::default();
    outputs.add(args.out_dir.join(format!("{stem}.scene.json")), scene.to_json());
    if args.render {
        outputs.add(args.out_dir.join(format!("{stem}.pgm")), save_pgm(&render_scene(&scene)));
    }
    outputs.write()
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub struct EvalArgs<'a> {
    pub detected_dir: &'a Path,
    pub gt_dir: &'a Path,
    pub out_dir: &'a Path,
    pub overlap_min: f64,
}

#[derive(Serialize)]
struct SceneScore {
    scene: String,
    precision: f64,
    recall: f64,
    f: f64,
    matches: usize,
}

#[derive(Serialize)]
struct MeanScore {
    precision: f64,
    recall: f64,
    f: f64,
}

#[derive(Serialize)]
struct EvalDoc {
    command: &'static str,
    overlap_min: f64,
    scenes: Vec<SceneScore>,
    mean: MeanScore,
}

/// Score detected lines against ground-truth scenes. Every `<stem>.scene.json`
/// in the ground-truth directory must have `<stem>.lines.json` and
/// `<stem>.labeling.json` in the detected directory.
pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<PathBuf>, CliError> {
    if !(args.overlap_min.is_finite() && (0.0..=1.0).contains(&args.overlap_min)) {
        return Err(CliError::Input("overlap-min must lie in [0, 1]".into()));
    }

    let mut stems: Vec<String> = Vec::new();
    let entries = std::fs::read_dir(args.gt_dir)
        .map_err(|e| input_err(&args.gt_dir.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| input_err("ground-truth dir", e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".scene.json") {
            stems.push(stem.to_string());
        }
    }
    if stems.is_empty() {
        return Err(CliError::Input(format!("no *.scene.json files in {}", args.gt_dir.display())));
    }
    stems.sort();

    let mut scores = Vec::with_capacity(stems.len());
    for stem in &stems {
        let gt_path = args.gt_dir.join(format!("{stem}.scene.json"));
        let lines_path = args.detected_dir.join(format!("{stem}.lines.json"));
        let labeling_path = args.detected_dir.join(format!("{stem}.labeling.json"));
        for required in [&lines_path, &labeling_path] {
            if !required.is_file() {
                return Err(CliError::Input(format!(
                    "missing detected file {} for scene {stem}",
                    required.display()
                )));
            }
        }

        let scene = SyntheticScene::from_json(&read_text(&gt_path)?)
            .map_err(|e| input_err("scene file", e))?;
        // Accept any finite slope here; slope limits are a fitting concern.
        let models = models_from_json(&read_text(&lines_path)?, f64::INFINITY)
            .map_err(|e| input_err("lines file", e))?;
        let labeling = labeling_from_json(&read_text(&labeling_path)?)
            .map_err(|e| input_err("labeling file", e))?;
        let pool = ModelPool::from_models(models).map_err(|e| input_err("lines file", e))?;

        let metrics = evalm::evaluate(
            &pool,
            &labeling,
            &scene.gt_lines,
            &scene.gt_labeling,
            args.overlap_min,
        )
        .map_err(|e| match e {
            CoreError::MismatchedBlobs => CliError::Input(format!(
                "scene {stem}: detected labeling covers a different blob set than the ground truth"
            )),
            other => runtime_err("evaluation", other),
        })?;
        scores.push(SceneScore {
            scene: stem.clone(),
            precision: metrics.precision,
            recall: metrics.recall,
            f: metrics.f,
            matches: metrics.pairs.len(),
        });
    }

    let n = scores.len() as f64;
    let mean = MeanScore {
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f: scores.iter().map(|s| s.f).sum::<f64>() / n,
    };

    let mut csv = String::from("scene,precision,recall,f\n");
    for s in &scores {
        csv.push_str(&format!("{},{:.6},{:.6},{:.6}\n", s.scene, s.precision, s.recall, s.f));
    }
    csv.push_str(&format!("mean,{:.6},{:.6},{:.6}\n", mean.precision, mean.recall, mean.f));

    let doc = EvalDoc { command: "eval", overlap_min: args.overlap_min, scenes: scores, mean };
    let mut json = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    json.push('\n');

    let mut outputs = OutputSet::default();
    outputs.add(args.out_dir.join("metrics.json"), json);
    outputs.add(args.out_dir.join("metrics.csv"), csv);
    outputs.write()
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub struct TrainArgs<'a> {
    pub manifest: &'a Path,
    pub out_dir: &'a Path,
    pub rounds: u32,
    pub depth: u32,
}

/// Train the boosted blob classifier from a CSV manifest of labeled boxes.
/// Relative image paths resolve against the manifest's directory.
pub fn cmd_train(args: &TrainArgs) -> Result<Vec<PathBuf>, CliError> {
    let rows = textline_core::classify::parse_manifest(&read_text(args.manifest)?)
        .map_err(|e| input_err("manifest", e))?;
    if rows.is_empty() {
        return Err(CliError::Input("manifest lists no training rows".into()));
    }
    let distinct: std::collections::BTreeSet<_> = rows.iter().map(|r| r.category).collect();
    if distinct.len() < 2 {
        return Err(CliError::Input(format!(
            "training needs at least 2 distinct categories, manifest has {}",
            distinct.len()
        )));
    }
    if args.rounds == 0 {
        return Err(CliError::Input("rounds must be >= 1".into()));
    }
    if args.depth == 0 {
        return Err(CliError::Input("depth must be >= 1".into()));
    }

    let base = args.manifest.parent().unwrap_or_else(|| Path::new("."));
    // Images are typically shared by many rows; decode each file once.
    let mut images: BTreeMap<PathBuf, textline_core::imaging::GrayImage> = BTreeMap::new();
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in &rows {
        let raw = Path::new(&row.pgm_path);
        let path = if raw.is_absolute() { raw.to_path_buf() } else { base.join(raw) };
        if !images.contains_key(&path) {
            let bytes =
                std::fs::read(&path).map_err(|e| input_err(&path.display().to_string(), e))?;
            let img = load_pgm(&bytes).map_err(|e| input_err(&path.display().to_string(), e))?;
            images.insert(path.clone(), img);
        }
        let img = &images[&path];
        let f = extract_features(img, &row.bbox)
            .map_err(|e| input_err(&format!("manifest row for {}", row.pgm_path), e))?;
        features.push(f);
        labels.push(row.category);
    }

    let model =
        textline_core::classify::train_adaboost(&features, &labels, args.rounds, args.depth)
            .map_err(|e| runtime_err("training", e))?;
    if model.rounds() == 0 {
        return Err(CliError::Runtime(
            "boosting rejected every round; the training set is not learnable at this depth".into(),
        ));
    }

    let stem = artifact_stem(args.manifest);
    let stem = stem.strip_suffix(".csv").unwrap_or(&stem);
    let mut outputs = OutputSet::default();
    outputs.add(args.out_dir.join(format!("{stem}.model.json")), with_newline(model.to_json()));
    outputs.write()
}
