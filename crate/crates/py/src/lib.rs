//! Python bindings, compiled as the extension module `textline_mdl`.
//!
//! The surface mirrors the Rust library: build [`PyBlob`]s (or parse them
//! from JSON), call `fit` to group them into line models by minimizing the
//! hierarchical description-length energy, and inspect the resulting models,
//! assignment, and energy trace. The synthetic scene generator and the
//! line-level precision/recall scorer are exposed so end-to-end experiments
//! never have to leave Python.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textline_core::energy::ModelPool;
use textline_core::pearl::{pearl, PearlOutcome};
use textline_core::synth::{render_scene, SceneSpec, SyntheticScene};
use textline_core::types::{
    blobs_from_json as core_blobs_from_json, models_from_json as core_models_from_json,
    models_to_json as core_models_to_json, normalize_likelihoods as core_normalize, BlobBox,
    EnergyParams, GeometricMode, Labeling, Language, LanguageScales, Line, LineModel,
    TextCandidate,
};
use textline_core::{energy, evalm, Error as CoreError};

/// Bad inputs become `ValueError`; solver and I/O failures become
/// `RuntimeError`.
fn to_py_err(e: CoreError) -> PyErr {
    use CoreError::*;
    match e {
        DegenerateLikelihood | InvalidParams(_) | Schema(_) | Pgm(_) | ImageTooSmall(..)
        | DegenerateBox | DegenerateAbscissae | UnknownModel(_) | TooFewBlobs | MismatchedBlobs => {
            PyValueError::new_err(e.to_string())
        }
        UnboundedCut | PlacementFailed(_) | Io(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn lang_name(l: Language) -> &'static str {
    match l {
        Language::English => "english",
        Language::Korean => "korean",
        Language::Chinese => "chinese",
        Language::Digit => "digit",
    }
}

fn lang_parse(s: &str) -> PyResult<Language> {
    match s {
        "english" => Ok(Language::English),
        "korean" => Ok(Language::Korean),
        "chinese" => Ok(Language::Chinese),
        "digit" => Ok(Language::Digit),
        _ => Err(PyValueError::new_err(format!(
            "unknown language '{s}' (expected english, korean, chinese, or digit)"
        ))),
    }
}

fn mode_name(m: GeometricMode) -> &'static str {
    match m {
        GeometricMode::Squared => "squared",
        GeometricMode::Absolute => "absolute",
    }
}

fn mode_parse(s: &str) -> PyResult<GeometricMode> {
    match s {
        "squared" => Ok(GeometricMode::Squared),
        "absolute" => Ok(GeometricMode::Absolute),
        _ => Err(PyValueError::new_err(format!(
            "unknown geometric_mode '{s}' (expected squared or absolute)"
        ))),
    }
}

/// A text candidate: a bounding box plus per-category likelihoods over
/// `(english, korean, chinese, digit, nontext)`.
#[pyclass(module = "textline_mdl", name = "Blob", from_py_object)]
#[derive(Clone)]
struct PyBlob {
    inner: TextCandidate,
}

#[pymethods]
impl PyBlob {
    /// `box` is `(left, top, right, bottom)` in pixels. When `likelihoods`
    /// is omitted the candidate is uninformative (uniform); raw values are
    /// floored at `floor` and normalized to sum to 1.
    #[new]
    #[pyo3(signature = (id, r#box, likelihoods=None, floor=1e-6))]
    fn new(
        id: u32,
        r#box: (f64, f64, f64, f64),
        likelihoods: Option<[f64; 5]>,
        floor: f64,
    ) -> PyResult<Self> {
        let bbox = BlobBox::new(r#box.0, r#box.1, r#box.2, r#box.3);
        bbox.validate().map_err(to_py_err)?;
        let inner = match likelihoods {
            Some(raw) => {
                TextCandidate::with_likelihoods(id, bbox, raw, floor).map_err(to_py_err)?
            }
            None => TextCandidate::new(id, bbox),
        };
        Ok(PyBlob { inner })
    }

    #[getter]
    fn id(&self) -> u32 {
        self.inner.id
    }

    #[getter]
    fn r#box(&self) -> (f64, f64, f64, f64) {
        let b = &self.inner.bbox;
        (b.left, b.top, b.right, b.bottom)
    }

    #[getter]
    fn likelihoods(&self) -> [f64; 5] {
        self.inner.likelihoods
    }

    fn __repr__(&self) -> String {
        let b = &self.inner.bbox;
        format!(
            "Blob(id={}, box=({}, {}, {}, {}))",
            self.inner.id, b.left, b.top, b.right, b.bottom
        )
    }
}

/// One text-line hypothesis: a language plus a mean (upper) and base (lower)
/// line, each `y = slope * x + intercept`. `x_ref` is the abscissa where the
/// model height is measured for normalizing geometric error.
#[pyclass(module = "textline_mdl", name = "LineModel", from_py_object)]
#[derive(Clone)]
struct PyLineModel {
    inner: LineModel,
}

#[pymethods]
impl PyLineModel {
    #[new]
    #[pyo3(signature = (id, language, mean, base, x_ref=0.0))]
    fn new(
        id: u32,
        language: &str,
        mean: (f64, f64),
        base: (f64, f64),
        x_ref: f64,
    ) -> PyResult<Self> {
        let inner = LineModel {
            id,
            language: lang_parse(language)?,
            mean_line: Line::new(mean.0, mean.1),
            base_line: Line::new(base.0, base.1),
            x_ref,
        };
        // Slope caps are a fitting concern; constructed models only need to
        // be finite with the base line below the mean line.
        inner.validate(f64::INFINITY).map_err(to_py_err)?;
        Ok(PyLineModel { inner })
    }

    #[getter]
    fn id(&self) -> u32 {
        self.inner.id
    }

    #[getter]
    fn language(&self) -> &'static str {
        lang_name(self.inner.language)
    }

    #[getter]
    fn mean(&self) -> (f64, f64) {
        (self.inner.mean_line.slope, self.inner.mean_line.intercept)
    }

    #[getter]
    fn base(&self) -> (f64, f64) {
        (self.inner.base_line.slope, self.inner.base_line.intercept)
    }

    #[getter]
    fn x_ref(&self) -> f64 {
        self.inner.x_ref
    }

    /// Model height at the reference abscissa.
    fn height(&self) -> f64 {
        self.inner.height_at_ref()
    }

    fn __repr__(&self) -> String {
        format!(
            "LineModel(id={}, language='{}', mean={:?}, base={:?}, x_ref={})",
            self.inner.id,
            lang_name(self.inner.language),
            self.mean(),
            self.base(),
            self.inner.x_ref
        )
    }
}

/// Energy and optimization constants. All fields are plain attributes;
/// invalid combinations are rejected when the parameters are used (and
/// eagerly by the constructor and `from_json`).
#[pyclass(module = "textline_mdl", name = "EnergyParams", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyEnergyParams {
    line_cost: f64,
    language_cost: f64,
    outlier_cost: f64,
    /// Per-language geometric-error scales, keyed by language name.
    k_scale: BTreeMap<String, f64>,
    likelihood_floor: f64,
    /// `"squared"` or `"absolute"` aggregation of corner residuals.
    geometric_mode: String,
    slope_max: f64,
    z_min: f64,
    rng_seed: u64,
    max_iterations: u32,
    convergence_tol: f64,
    extra_random: u32,
}

impl PyEnergyParams {
    fn from_core(p: &EnergyParams) -> Self {
        PyEnergyParams {
            line_cost: p.line_cost,
            language_cost: p.language_cost,
            outlier_cost: p.outlier_cost,
            k_scale: Language::ALL
                .iter()
                .map(|&l| (lang_name(l).to_string(), p.k_scale.get(l)))
                .collect(),
            likelihood_floor: p.likelihood_floor,
            geometric_mode: mode_name(p.geometric_mode).to_string(),
            slope_max: p.slope_max,
            z_min: p.z_min,
            rng_seed: p.rng_seed,
            max_iterations: p.max_iterations,
            convergence_tol: p.convergence_tol,
            extra_random: p.extra_random,
        }
    }

    fn to_core(&self) -> PyResult<EnergyParams> {
        let mut k = LanguageScales::default();
        let mut seen = BTreeSet::new();
        for (name, v) in &self.k_scale {
            match lang_parse(name)? {
                Language::English => k.english = *v,
                Language::Korean => k.korean = *v,
                Language::Chinese => k.chinese = *v,
                Language::Digit => k.digit = *v,
            }
            seen.insert(name.as_str());
        }
        if seen.len() != Language::ALL.len() {
            return Err(PyValueError::new_err(
                "k_scale must map all of english, korean, chinese, digit",
            ));
        }
        let p = EnergyParams {
            line_cost: self.line_cost,
            language_cost: self.language_cost,
            outlier_cost: self.outlier_cost,
            k_scale: k,
            likelihood_floor: self.likelihood_floor,
            geometric_mode: mode_parse(&self.geometric_mode)?,
            slope_max: self.slope_max,
            z_min: self.z_min,
            rng_seed: self.rng_seed,
            max_iterations: self.max_iterations,
            convergence_tol: self.convergence_tol,
            extra_random: self.extra_random,
        };
        p.validate().map_err(to_py_err)?;
        Ok(p)
    }
}

#[pymethods]
impl PyEnergyParams {
    /// Defaults with any subset overridden by keyword. A partial `k_scale`
    /// dict updates only the named languages.
    #[new]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (*, line_cost=None, language_cost=None, outlier_cost=None,
        k_scale=None, likelihood_floor=None, geometric_mode=None, slope_max=None,
        z_min=None, rng_seed=None, max_iterations=None, convergence_tol=None,
        extra_random=None))]
    fn new(
        line_cost: Option<f64>,
        language_cost: Option<f64>,
        outlier_cost: Option<f64>,
        k_scale: Option<HashMap<String, f64>>,
        likelihood_floor: Option<f64>,
        geometric_mode: Option<String>,
        slope_max: Option<f64>,
        z_min: Option<f64>,
        rng_seed: Option<u64>,
        max_iterations: Option<u32>,
        convergence_tol: Option<f64>,
        extra_random: Option<u32>,
    ) -> PyResult<Self> {
        let mut p = PyEnergyParams::from_core(&EnergyParams::default());
        if let Some(v) = line_cost {
            p.line_cost = v;
        }
        if let Some(v) = language_cost {
            p.language_cost = v;
        }
        if let Some(v) = outlier_cost {
            p.outlier_cost = v;
        }
        if let Some(scales) = k_scale {
            for (name, v) in scales {
                lang_parse(&name)?;
                p.k_scale.insert(name, v);
            }
        }
        if let Some(v) = likelihood_floor {
            p.likelihood_floor = v;
        }
        if let Some(v) = geometric_mode {
            p.geometric_mode = v;
        }
        if let Some(v) = slope_max {
            p.slope_max = v;
        }
        if let Some(v) = z_min {
            p.z_min = v;
        }
        if let Some(v) = rng_seed {
            p.rng_seed = v;
        }
        if let Some(v) = max_iterations {
            p.max_iterations = v;
        }
        if let Some(v) = convergence_tol {
            p.convergence_tol = v;
        }
        if let Some(v) = extra_random {
            p.extra_random = v;
        }
        p.to_core()?;
        Ok(p)
    }

    fn to_json(&self) -> PyResult<String> {
        let core = self.to_core()?;
        Ok(serde_json::to_string_pretty(&core).expect("params serialize"))
    }

    /// Parse parameters from JSON; missing fields keep their defaults.
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let core: EnergyParams =
            serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("params: {e}")))?;
        core.validate().map_err(to_py_err)?;
        Ok(PyEnergyParams::from_core(&core))
    }

    fn __repr__(&self) -> String {
        format!(
            "EnergyParams(line_cost={}, language_cost={}, outlier_cost={}, k_scale={:?}, \
             likelihood_floor={}, geometric_mode='{}', slope_max={}, z_min={}, rng_seed={}, \
             max_iterations={}, convergence_tol={}, extra_random={})",
            self.line_cost,
            self.language_cost,
            self.outlier_cost,
            self.k_scale,
            self.likelihood_floor,
            self.geometric_mode,
            self.slope_max,
            self.z_min,
            self.rng_seed,
            self.max_iterations,
            self.convergence_tol,
            self.extra_random
        )
    }
}

/// Result of `fit`: the surviving line models, the blob-to-model assignment
/// (`None` marks outliers), and the energy trace of the descent.
#[pyclass(module = "textline_mdl", name = "FitResult")]
struct PyFitResult {
    inner: PearlOutcome,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn models(&self) -> Vec<PyLineModel> {
        self.inner.pool.models.iter().map(|m| PyLineModel { inner: m.clone() }).collect()
    }

    #[getter]
    fn labeling(&self) -> BTreeMap<u32, Option<u32>> {
        self.inner.labeling.assignment.clone()
    }

    #[getter]
    fn trace(&self) -> Vec<f64> {
        self.inner.trace.clone()
    }

    #[getter]
    fn iterations(&self) -> u32 {
        self.inner.iterations
    }

    /// Final energy (the last trace entry).
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.trace.last().copied().unwrap_or(0.0)
    }

    /// Blob ids assigned to the given model, ascending.
    fn support(&self, model_id: u32) -> Vec<u32> {
        self.inner.labeling.support(model_id)
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(models={}, energy={:.6}, iterations={})",
            self.inner.pool.models.len(),
            self.energy(),
            self.inner.iterations
        )
    }
}

/// A generated scene: blobs with oracle likelihoods plus the ground-truth
/// line models and assignment they were placed from.
#[pyclass(module = "textline_mdl", name = "Scene")]
struct PyScene {
    inner: SyntheticScene,
}

#[pymethods]
impl PyScene {
    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn blobs(&self) -> Vec<PyBlob> {
        self.inner.blobs.iter().map(|b| PyBlob { inner: b.clone() }).collect()
    }

    #[getter]
    fn gt_models(&self) -> Vec<PyLineModel> {
        self.inner.gt_lines.iter().map(|m| PyLineModel { inner: m.clone() }).collect()
    }

    #[getter]
    fn gt_labeling(&self) -> BTreeMap<u32, Option<u32>> {
        self.inner.gt_labeling.assignment.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyScene { inner: SyntheticScene::from_json(s).map_err(to_py_err)? })
    }

    /// Rasterize the scene; returns `(width, height, samples)` with one byte
    /// per pixel, row-major.
    fn render(&self) -> (usize, usize, Vec<u8>) {
        let img = render_scene(&self.inner);
        (img.width, img.height, img.samples)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene({}x{}, {} blobs, {} lines)",
            self.inner.width,
            self.inner.height,
            self.inner.blobs.len(),
            self.inner.gt_lines.len()
        )
    }
}

/// Line-level detection quality against ground truth.
#[pyclass(module = "textline_mdl", name = "Metrics")]
struct PyMetrics {
    inner: evalm::Metrics,
}

#[pymethods]
impl PyMetrics {
    #[getter]
    fn precision(&self) -> f64 {
        self.inner.precision
    }

    #[getter]
    fn recall(&self) -> f64 {
        self.inner.recall
    }

    #[getter]
    fn f(&self) -> f64 {
        self.inner.f
    }

    /// Matched `(detected_id, gt_id, overlap)` triples.
    #[getter]
    fn pairs(&self) -> Vec<(u32, u32, f64)> {
        self.inner.pairs.iter().map(|p| (p.detected, p.gt, p.overlap)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Metrics(precision={:.4}, recall={:.4}, f={:.4})",
            self.inner.precision, self.inner.recall, self.inner.f
        )
    }
}

fn core_blob_vec(blobs: Vec<PyBlob>) -> PyResult<Vec<TextCandidate>> {
    let out: Vec<TextCandidate> = blobs.into_iter().map(|b| b.inner).collect();
    let mut seen = BTreeSet::new();
    for b in &out {
        if !seen.insert(b.id) {
            return Err(PyValueError::new_err(format!("duplicate blob id {}", b.id)));
        }
    }
    Ok(out)
}

fn labeling_from_dict(d: HashMap<u32, Option<u32>>) -> Labeling {
    let mut l = Labeling::new();
    for (blob, label) in d {
        l.set(blob, label);
    }
    l
}

fn pool_from(models: Vec<PyLineModel>) -> PyResult<ModelPool> {
    ModelPool::from_models(models.into_iter().map(|m| m.inner).collect()).map_err(to_py_err)
}

fn params_or_default(params: Option<PyEnergyParams>) -> PyResult<EnergyParams> {
    match params {
        Some(p) => p.to_core(),
        None => Ok(EnergyParams::default()),
    }
}

/// Group blobs into text lines by minimizing the hierarchical
/// description-length energy with block-coordinate descent over a sampled
/// model pool.
#[pyfunction]
#[pyo3(signature = (blobs, params=None))]
fn fit(blobs: Vec<PyBlob>, params: Option<PyEnergyParams>) -> PyResult<PyFitResult> {
    let p = params_or_default(params)?;
    let blobs = core_blob_vec(blobs)?;
    let outcome = pearl(&blobs, &p).map_err(to_py_err)?;
    Ok(PyFitResult { inner: outcome })
}

/// Full energy of an explicit assignment: per-blob data terms plus label
/// costs per active line and per active language. The labeling must cover
/// exactly the given blobs; `None` marks an outlier.
#[pyfunction]
#[pyo3(signature = (blobs, labeling, models, params=None))]
fn total_energy(
    blobs: Vec<PyBlob>,
    labeling: HashMap<u32, Option<u32>>,
    models: Vec<PyLineModel>,
    params: Option<PyEnergyParams>,
) -> PyResult<f64> {
    let p = params_or_default(params)?;
    let blobs = core_blob_vec(blobs)?;
    let pool = pool_from(models)?;
    energy::total_energy(&blobs, &labeling_from_dict(labeling), &pool, &p).map_err(to_py_err)
}

/// Score detected lines against ground truth. Lines are matched greedily by
/// Jaccard overlap of their blob supports; pairs below `overlap_min` do not
/// count.
#[pyfunction]
#[pyo3(signature = (models, labeling, gt_models, gt_labeling, overlap_min=0.5))]
fn evaluate(
    models: Vec<PyLineModel>,
    labeling: HashMap<u32, Option<u32>>,
    gt_models: Vec<PyLineModel>,
    gt_labeling: HashMap<u32, Option<u32>>,
    overlap_min: f64,
) -> PyResult<PyMetrics> {
    let pool = pool_from(models)?;
    let gt: Vec<LineModel> = gt_models.into_iter().map(|m| m.inner).collect();
    let metrics = evalm::evaluate(
        &pool,
        &labeling_from_dict(labeling),
        &gt,
        &labeling_from_dict(gt_labeling),
        overlap_min,
    )
    .map_err(to_py_err)?;
    Ok(PyMetrics { inner: metrics })
}

/// Generate a synthetic labeled scene. `spec` is the scene spec as JSON
/// (`"{}"` means all defaults); the same spec and seed always produce the
/// same scene.
#[pyfunction]
#[pyo3(signature = (spec="{}", seed=0))]
fn generate_scene(spec: &str, seed: u64) -> PyResult<PyScene> {
    let spec = SceneSpec::from_json(spec).map_err(to_py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = textline_core::synth::generate_scene(&spec, &mut rng).map_err(to_py_err)?;
    Ok(PyScene { inner: scene })
}

/// Rescale raw nonnegative scores into a probability vector whose entries
/// are at least `floor` and sum to exactly 1.
#[pyfunction]
#[pyo3(signature = (raw, floor=1e-6))]
fn normalize_likelihoods(raw: [f64; 5], floor: f64) -> PyResult<[f64; 5]> {
    core_normalize(raw, floor).map_err(to_py_err)
}

/// Parse a JSON array of blobs (each `{"id", "box", "likelihoods"}`),
/// re-normalizing every likelihood vector with the given floor.
#[pyfunction]
#[pyo3(signature = (s, floor=1e-6))]
fn blobs_from_json(s: &str, floor: f64) -> PyResult<Vec<PyBlob>> {
    let blobs = core_blobs_from_json(s, floor).map_err(to_py_err)?;
    Ok(blobs.into_iter().map(|inner| PyBlob { inner }).collect())
}

#[pyfunction]
fn blobs_to_json(blobs: Vec<PyBlob>) -> PyResult<String> {
    let blobs = core_blob_vec(blobs)?;
    Ok(serde_json::to_string_pretty(&blobs).expect("blobs serialize"))
}

/// Parse a JSON array of line models, enforcing the given slope cap.
#[pyfunction]
#[pyo3(signature = (s, slope_max=2.0))]
fn models_from_json(s: &str, slope_max: f64) -> PyResult<Vec<PyLineModel>> {
    let models = core_models_from_json(s, slope_max).map_err(to_py_err)?;
    Ok(models.into_iter().map(|inner| PyLineModel { inner }).collect())
}

#[pyfunction]
fn models_to_json(models: Vec<PyLineModel>) -> String {
    let models: Vec<LineModel> = models.into_iter().map(|m| m.inner).collect();
    core_models_to_json(&models)
}

/// Multilingual text-line grouping by hierarchical description-length
/// minimization.
#[pymodule]
fn textline_mdl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBlob>()?;
    m.add_class::<PyLineModel>()?;
    m.add_class::<PyEnergyParams>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyMetrics>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(total_energy, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_likelihoods, m)?)?;
    m.add_function(wrap_pyfunction!(blobs_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(blobs_to_json, m)?)?;
    m.add_function(wrap_pyfunction!(models_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(models_to_json, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
