//! Shared domain types: blobs, line models, labelings, parameter bundles, and
//! the JSON schemas used by the CLI and the Python bindings.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! - Image coordinates have `y` growing downward, so the base line of a text
//!   line (the lower one) has numerically larger `y` than the mean line.
//! - Likelihood vectors are ordered `(English, Korean, Chinese, Digit, NonText)`.
//! - Lines are `y(x) = slope * x + intercept` with a configurable slope cap;
//!   vertical lines are outside the model space.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifier of a detected blob (text candidate).
pub type BlobId = u32;
/// Identifier of a line model in a pool.
pub type ModelId = u32;

/// Number of classifier categories: the four languages plus non-text.
pub const CATEGORY_COUNT: usize = 5;

/// A point in image coordinates (x right, y down), in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }
}

/// Language of a text line. The classifier's category set is
/// `Language` plus [`Category::NonText`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    English,
    Korean,
    Chinese,
    Digit,
}

impl Language {
    /// All languages, in likelihood-vector order.
    pub const ALL: [Language; 4] =
        [Language::English, Language::Korean, Language::Chinese, Language::Digit];

    /// Index of this language in a 5-entry likelihood vector.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn category(self) -> Category {
        match self {
            Language::English => Category::English,
            Language::Korean => Category::Korean,
            Language::Chinese => Category::Chinese,
            Language::Digit => Category::Digit,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Language::English => "english",
            Language::Korean => "korean",
            Language::Chinese => "chinese",
            Language::Digit => "digit",
        };
        f.write_str(s)
    }
}

/// Classifier category: a language or non-text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    English,
    Korean,
    Chinese,
    Digit,
    NonText,
}

impl Category {
    /// All categories, in likelihood-vector order.
    pub const ALL: [Category; 5] = [
        Category::English,
        Category::Korean,
        Category::Chinese,
        Category::Digit,
        Category::NonText,
    ];

    /// Index of this category in a 5-entry likelihood vector.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Category::ALL.get(i).copied()
    }

    /// The language this category corresponds to, if any.
    pub fn language(self) -> Option<Language> {
        match self {
            Category::English => Some(Language::English),
            Category::Korean => Some(Language::Korean),
            Category::Chinese => Some(Language::Chinese),
            Category::Digit => Some(Language::Digit),
            Category::NonText => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.language() {
            Some(l) => l.fmt(f),
            None => f.write_str("nontext"),
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Category> {
        match s.trim().to_ascii_lowercase().as_str() {
            "english" | "en" => Ok(Category::English),
            "korean" | "kr" => Ok(Category::Korean),
            "chinese" | "zh" => Ok(Category::Chinese),
            "digit" | "digits" => Ok(Category::Digit),
            "nontext" | "non-text" | "non_text" => Ok(Category::NonText),
            other => Err(Error::Schema(format!("unknown category `{other}`"))),
        }
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Language> {
        match Category::from_str(s)? {
            Category::NonText => Err(Error::Schema("nontext is not a language".into())),
            c => Ok(c.language().expect("non-NonText category is a language")),
        }
    }
}

/// Axis-aligned blob bounding box in pixels; right/bottom are exclusive
/// (`width = right - left`). Serialized as `[left, top, right, bottom]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BlobBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl From<[f64; 4]> for BlobBox {
    fn from(v: [f64; 4]) -> Self {
        BlobBox { left: v[0], top: v[1], right: v[2], bottom: v[3] }
    }
}

impl From<BlobBox> for [f64; 4] {
    fn from(b: BlobBox) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

impl BlobBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        BlobBox { left, top, right, bottom }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2D {
        Point2D::new((self.left + self.right) / 2.0, (self.top + self.bottom) / 2.0)
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BlobBox) -> BlobBox {
        BlobBox {
            left: self.left.min(other.left),
            top: self.top.min(other.top),
            right: self.right.max(other.right),
            bottom: self.bottom.max(other.bottom),
        }
    }

    /// Intersection-over-union of two boxes (0 when disjoint).
    pub fn iou(&self, other: &BlobBox) -> f64 {
        let iw = (self.right.min(other.right) - self.left.max(other.left)).max(0.0);
        let ih = (self.bottom.min(other.bottom) - self.top.max(other.top)).max(0.0);
        let inter = iw * ih;
        let uni = self.area() + other.area() - inter;
        if uni <= 0.0 {
            0.0
        } else {
            inter / uni
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.left, self.top, self.right, self.bottom].iter().all(|v| v.is_finite());
        if !finite || self.right <= self.left || self.bottom <= self.top {
            return Err(Error::DegenerateBox);
        }
        Ok(())
    }
}

/// A detected blob: a box plus a per-category likelihood vector.
///
/// Corner naming: `a` top-left, `b` top-right, `c` bottom-left, `d`
/// bottom-right. The top corners are scored against a line model's mean line
/// and the bottom corners against its base line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCandidate {
    pub id: BlobId,
    #[serde(rename = "box")]
    pub bbox: BlobBox,
    /// Probabilities over `(English, Korean, Chinese, Digit, NonText)`;
    /// entries are at least the configured floor and sum to 1.
    pub likelihoods: [f64; CATEGORY_COUNT],
}

impl TextCandidate {
    /// A candidate with uninformative (uniform) likelihoods.
    pub fn new(id: BlobId, bbox: BlobBox) -> Self {
        TextCandidate { id, bbox, likelihoods: [0.2; CATEGORY_COUNT] }
    }

    pub fn with_likelihoods(
        id: BlobId,
        bbox: BlobBox,
        raw: [f64; CATEGORY_COUNT],
        floor: f64,
    ) -> Result<Self> {
        Ok(TextCandidate { id, bbox, likelihoods: normalize_likelihoods(raw, floor)? })
    }

    pub fn a(&self) -> Point2D {
        Point2D::new(self.bbox.left, self.bbox.top)
    }

    pub fn b(&self) -> Point2D {
        Point2D::new(self.bbox.right, self.bbox.top)
    }

    pub fn c(&self) -> Point2D {
        Point2D::new(self.bbox.left, self.bbox.bottom)
    }

    pub fn d(&self) -> Point2D {
        Point2D::new(self.bbox.right, self.bbox.bottom)
    }

    pub fn likelihood(&self, cat: Category) -> f64 {
        self.likelihoods[cat.index()]
    }
}

/// A non-vertical line `y(x) = slope * x + intercept`.
/// Serialized as `[slope, intercept]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl From<[f64; 2]> for Line {
    fn from(v: [f64; 2]) -> Self {
        Line { slope: v[0], intercept: v[1] }
    }
}

impl From<Line> for [f64; 2] {
    fn from(l: Line) -> Self {
        [l.slope, l.intercept]
    }
}

impl Line {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Line { slope, intercept }
    }

    /// The line through two points with distinct x; `None` when the x
    /// coordinates coincide (vertical).
    pub fn through(p: Point2D, q: Point2D) -> Option<Line> {
        let dx = q.x - p.x;
        if dx == 0.0 {
            return None;
        }
        let slope = (q.y - p.y) / dx;
        Some(Line { slope, intercept: p.y - slope * p.x })
    }

    pub fn y_at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// One text-line hypothesis: a language mark plus a mean (upper) and base
/// (lower) line, not necessarily parallel.
///
/// `x_ref` is the reference abscissa at which the model's height is measured
/// for normalizing geometric error; it tracks the midpoint of the current
/// inlier span (the creation span before any inliers are known).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineModel {
    pub id: ModelId,
    pub language: Language,
    #[serde(rename = "mean")]
    pub mean_line: Line,
    #[serde(rename = "base")]
    pub base_line: Line,
    #[serde(default)]
    pub x_ref: f64,
}

impl LineModel {
    /// Model height at the reference abscissa: base minus mean `y`
    /// (positive when the base line is below the mean line).
    pub fn height_at_ref(&self) -> f64 {
        self.base_line.y_at(self.x_ref) - self.mean_line.y_at(self.x_ref)
    }

    pub fn validate(&self, slope_max: f64) -> Result<()> {
        for (line, name) in [(&self.mean_line, "mean"), (&self.base_line, "base")] {
            if !line.slope.is_finite() || !line.intercept.is_finite() {
                return Err(Error::Schema(format!("model {}: {name} line not finite", self.id)));
            }
            if line.slope.abs() > slope_max {
                return Err(Error::Schema(format!(
                    "model {}: {name} slope {} exceeds cap {}",
                    self.id, line.slope, slope_max
                )));
            }
        }
        if self.height_at_ref() <= 0.0 {
            return Err(Error::Schema(format!(
                "model {}: base line not below mean line at x_ref {}",
                self.id, self.x_ref
            )));
        }
        Ok(())
    }
}

/// Assignment of every blob to a line model or to the outlier label (`None`).
///
/// Serializes as a JSON object `{ "<blob_id>": model_id | null, ... }`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labeling {
    pub assignment: BTreeMap<BlobId, Option<ModelId>>,
}

impl Labeling {
    pub fn new() -> Self {
        Labeling::default()
    }

    /// The labeling sending every given blob to the outlier label.
    pub fn all_outlier(blobs: &[TextCandidate]) -> Self {
        Labeling { assignment: blobs.iter().map(|b| (b.id, None)).collect() }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn set(&mut self, blob: BlobId, label: Option<ModelId>) {
        self.assignment.insert(blob, label);
    }

    /// Label of a blob; `None` if the blob is not covered by this labeling.
    pub fn get(&self, blob: BlobId) -> Option<Option<ModelId>> {
        self.assignment.get(&blob).copied()
    }

    /// Blob ids assigned to `model`, in ascending order.
    pub fn support(&self, model: ModelId) -> Vec<BlobId> {
        self.assignment.iter().filter(|(_, l)| **l == Some(model)).map(|(b, _)| *b).collect()
    }

    /// Model ids with at least one assigned blob, ascending.
    pub fn active_models(&self) -> Vec<ModelId> {
        let mut ids: Vec<ModelId> = self.assignment.values().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// True when every blob in `blobs` has a label here (and nothing else).
    pub fn is_total_over(&self, blobs: &[TextCandidate]) -> bool {
        self.assignment.len() == blobs.len()
            && blobs.iter().all(|b| self.assignment.contains_key(&b.id))
    }
}

/// How geometric corner-to-line residuals are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometricMode {
    /// Sum of squared vertical distances (default; makes least-squares
    /// refitting the exact minimizer of the geometric term).
    Squared,
    /// Sum of absolute vertical distances.
    Absolute,
}

/// Per-language scale `K` applied to geometric error: smaller values mean
/// more tolerance (English lines wobble; Chinese and Korean lines are tight).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageScales {
    pub english: f64,
    pub korean: f64,
    pub chinese: f64,
    pub digit: f64,
}

impl Default for LanguageScales {
    fn default() -> Self {
        LanguageScales { english: 0.5, korean: 1.0, chinese: 1.0, digit: 0.7 }
    }
}

impl LanguageScales {
    pub fn get(&self, lang: Language) -> f64 {
        match lang {
            Language::English => self.english,
            Language::Korean => self.korean,
            Language::Chinese => self.chinese,
            Language::Digit => self.digit,
        }
    }
}

/// All energy and optimization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    /// Cost paid once per line model with at least one assigned blob.
    pub line_cost: f64,
    /// Cost paid once per language with at least one active model.
    pub language_cost: f64,
    /// Per-blob cost of the outlier label.
    pub outlier_cost: f64,
    /// Per-language geometric-error scales.
    pub k_scale: LanguageScales,
    /// Minimum probability in any likelihood vector (prevents infinite
    /// negative-log costs).
    pub likelihood_floor: f64,
    pub geometric_mode: GeometricMode,
    /// Maximum admissible |slope| for mean/base lines.
    pub slope_max: f64,
    /// Floor on the model-height normalizer, in pixels.
    pub z_min: f64,
    pub rng_seed: u64,
    /// Maximum assign/refit sweeps of the descent driver.
    pub max_iterations: u32,
    /// Stop early when an assign+refit sweep improves energy by less than this.
    pub convergence_tol: f64,
    /// Extra random blob pairs added to the initial pool beyond the
    /// neighbor-graph pairs.
    pub extra_random: u32,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            line_cost: 20.0,
            language_cost: 10.0,
            outlier_cost: 8.0,
            k_scale: LanguageScales::default(),
            likelihood_floor: 1e-6,
            geometric_mode: GeometricMode::Squared,
            slope_max: 2.0,
            z_min: 2.0,
            rng_seed: 0,
            max_iterations: 5,
            convergence_tol: 1e-6,
            extra_random: 0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.line_cost >= 0.0 && self.line_cost.is_finite()) {
            return err("line_cost must be finite and >= 0");
        }
        if !(self.language_cost >= 0.0 && self.language_cost.is_finite()) {
            return err("language_cost must be finite and >= 0");
        }
        if !(self.outlier_cost >= 0.0 && self.outlier_cost.is_finite()) {
            return err("outlier_cost must be finite and >= 0");
        }
        for lang in Language::ALL {
            let k = self.k_scale.get(lang);
            if !(k > 0.0 && k.is_finite()) {
                return err("k_scale values must be finite and > 0");
            }
        }
        if !(self.likelihood_floor > 0.0 && self.likelihood_floor <= 0.1) {
            return err("likelihood_floor must lie in (0, 0.1]");
        }
        if !(self.slope_max > 0.0 && self.slope_max.is_finite()) {
            return err("slope_max must be finite and > 0");
        }
        if !(self.z_min > 0.0 && self.z_min.is_finite()) {
            return err("z_min must be finite and > 0");
        }
        if self.max_iterations == 0 {
            return err("max_iterations must be >= 1");
        }
        if !(self.convergence_tol >= 0.0 && self.convergence_tol.is_finite()) {
            return err("convergence_tol must be finite and >= 0");
        }
        Ok(())
    }
}

/// Rescale a raw nonnegative score vector into a probability vector whose
/// entries are all at least `floor` and sum to exactly 1.
///
/// Entries pushed below the floor are pinned at exactly `floor` and the
/// remaining mass is distributed proportionally over the unpinned entries;
/// this repeats until stable, so the result is idempotent and respects the
/// floor exactly rather than approximately.
pub fn normalize_likelihoods(
    raw: [f64; CATEGORY_COUNT],
    floor: f64,
) -> Result<[f64; CATEGORY_COUNT]> {
    if !(floor > 0.0 && floor <= 0.1) {
        return Err(Error::InvalidParams("likelihood floor must lie in (0, 0.1]".into()));
    }
    if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParams("likelihoods must be finite and >= 0".into()));
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateLikelihood);
    }
    let mut v = raw.map(|x| x / sum);
    let mut pinned = [false; CATEGORY_COUNT];
    loop {
        let mut grew = false;
        for i in 0..CATEGORY_COUNT {
            if !pinned[i] && v[i] <= floor {
                pinned[i] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
        let n_pinned = pinned.iter().filter(|p| **p).count();
        // With floor <= 0.1 and five entries the free mass stays positive,
        // so at least one entry always remains unpinned.
        debug_assert!(n_pinned < CATEGORY_COUNT);
        let free_target = 1.0 - n_pinned as f64 * floor;
        let free_sum: f64 = (0..CATEGORY_COUNT).filter(|i| !pinned[*i]).map(|i| v[i]).sum();
        for i in 0..CATEGORY_COUNT {
            v[i] = if pinned[i] { floor } else { v[i] * free_target / free_sum };
        }
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// File schemas
// ---------------------------------------------------------------------------

/// Serialize blobs to the blob-file schema:
/// `[{ "id": .., "box": [l,t,r,b], "likelihoods": [..5] }, ...]`.
pub fn blobs_to_json(blobs: &[TextCandidate]) -> String {
    serde_json::to_string_pretty(blobs).expect("blob serialization cannot fail")
}

/// Parse and validate a blob file. Likelihood vectors are renormalized with
/// `floor`, so writers need not produce exactly normalized vectors.
pub fn blobs_from_json(s: &str, floor: f64) -> Result<Vec<TextCandidate>> {
    let mut blobs: Vec<TextCandidate> =
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("blob file: {e}")))?;
    let mut seen = std::collections::BTreeSet::new();
    for (i, b) in blobs.iter_mut().enumerate() {
        if !seen.insert(b.id) {
            return Err(Error::Schema(format!("blobs[{i}].id: duplicate id {}", b.id)));
        }
        b.bbox.validate().map_err(|_| {
            Error::Schema(format!(
                "blobs[{i}].box: not a valid box (need right > left, bottom > top, finite)"
            ))
        })?;
        b.likelihoods = normalize_likelihoods(b.likelihoods, floor).map_err(|e| match e {
            Error::DegenerateLikelihood => {
                Error::Schema(format!("blobs[{i}].likelihoods: all entries zero"))
            }
            _ => Error::Schema(format!("blobs[{i}].likelihoods: entries must be finite and >= 0")),
        })?;
    }
    Ok(blobs)
}

/// Serialize a labeling to `{ "<blob_id>": model_id | null, ... }`.
pub fn labeling_to_json(labeling: &Labeling) -> String {
    serde_json::to_string_pretty(labeling).expect("labeling serialization cannot fail")
}

pub fn labeling_from_json(s: &str) -> Result<Labeling> {
    serde_json::from_str(s).map_err(|e| Error::Schema(format!("labeling file: {e}")))
}

/// Serialize models to the model-file schema:
/// `[{ "id": .., "language": .., "mean": [slope,intercept], "base": [..], "x_ref": .. }, ...]`.
pub fn models_to_json(models: &[LineModel]) -> String {
    serde_json::to_string_pretty(models).expect("model serialization cannot fail")
}

pub fn models_from_json(s: &str, slope_max: f64) -> Result<Vec<LineModel>> {
    let models: Vec<LineModel> =
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("model file: {e}")))?;
    let mut seen = std::collections::BTreeSet::new();
    for (i, m) in models.iter().enumerate() {
        if !seen.insert(m.id) {
            return Err(Error::Schema(format!("models[{i}].id: duplicate id {}", m.id)));
        }
        m.validate(slope_max).map_err(|e| Error::Schema(format!("models[{i}]: {e}")))?;
    }
    Ok(models)
}
