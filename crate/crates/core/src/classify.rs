//! Per-blob language classification: patch features, small decision trees,
//! multi-class (SAMME) boosting, and a synthetic likelihood oracle for
//! experiments that bypass pixel classification.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::imaging::GrayImage;
use crate::types::{normalize_likelihoods, BlobBox, Category, CATEGORY_COUNT};
use crate::{Error, Result};

/// Patch side for feature extraction (nearest-neighbor resample target).
pub const PATCH_SIZE: usize = 24;
/// 16 intensity bins + 8 orientations x 2x2 cells + width/height/aspect.
pub const FEATURE_DIM: usize = 16 + 8 * 4 + 3;

const HIST_BINS: usize = 16;
const HOG_ORIENTATIONS: usize = 8;
const HOG_CELLS: usize = 2;

/// Fixed-length feature vector for one blob.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Extract features for a box inside `img`: a normalized 16-bin intensity
/// histogram and an L1-normalized 8-orientation gradient histogram over 2x2
/// cells, both on a 24x24 nearest-neighbor patch, plus the raw box width,
/// height, and aspect ratio. The box must lie within the image and span at
/// least 4 pixels of area.
pub fn extract_features(img: &GrayImage, bbox: &BlobBox) -> Result<FeatureVector> {
    if bbox.left < 0.0
        || bbox.top < 0.0
        || bbox.right > img.width as f64
        || bbox.bottom > img.height as f64
        || bbox.area() < 4.0
    {
        return Err(Error::DegenerateBox);
    }
    let (w, h) = (bbox.width(), bbox.height());
    let mut patch = [[0u8; PATCH_SIZE]; PATCH_SIZE];
    for (py, row) in patch.iter_mut().enumerate() {
        let sy = bbox.top + (py as f64 + 0.5) * h / PATCH_SIZE as f64;
        let sy = (sy.floor().max(0.0) as usize).min(img.height - 1);
        for (px, cell) in row.iter_mut().enumerate() {
            let sx = bbox.left + (px as f64 + 0.5) * w / PATCH_SIZE as f64;
            let sx = (sx.floor().max(0.0) as usize).min(img.width - 1);
            *cell = img.get(sx, sy);
        }
    }

    let mut features = [0.0; FEATURE_DIM];

    let n_px = (PATCH_SIZE * PATCH_SIZE) as f64;
    for row in &patch {
        for &v in row {
            features[v as usize / HIST_BINS] += 1.0 / n_px;
        }
    }

    // Gradient histogram: central differences with clamped borders, votes
    // weighted by gradient magnitude, orientation binned over [0, 2pi).
    let cell_px = PATCH_SIZE / HOG_CELLS;
    let mut hog_total = 0.0;
    for y in 0..PATCH_SIZE {
        for x in 0..PATCH_SIZE {
            let right = patch[y][(x + 1).min(PATCH_SIZE - 1)] as f64;
            let left = patch[y][x.saturating_sub(1)] as f64;
            let down = patch[(y + 1).min(PATCH_SIZE - 1)][x] as f64;
            let up = patch[y.saturating_sub(1)][x] as f64;
            let (gx, gy) = (right - left, down - up);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += 2.0 * std::f64::consts::PI;
            }
            let bin = ((angle / (2.0 * std::f64::consts::PI) * HOG_ORIENTATIONS as f64) as usize)
                .min(HOG_ORIENTATIONS - 1);
            let cell = (y / cell_px) * HOG_CELLS + x / cell_px;
            features[HIST_BINS + cell * HOG_ORIENTATIONS + bin] += mag;
            hog_total += mag;
        }
    }
    if hog_total > 0.0 {
        for f in
            features[HIST_BINS..HIST_BINS + HOG_ORIENTATIONS * HOG_CELLS * HOG_CELLS].iter_mut()
        {
            *f /= hog_total;
        }
    }

    features[FEATURE_DIM - 3] = w;
    features[FEATURE_DIM - 2] = h;
    features[FEATURE_DIM - 1] = w / h;
    Ok(FeatureVector(features))
}

// ---------------------------------------------------------------------------
// Decision trees
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { category: Category },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// Axis-aligned decision tree trained by greedy weighted Gini splitting.
/// Samples with `feature < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    root: Node,
}

impl DecisionTree {
    /// Fit on weighted examples. Splits are only taken when they strictly
    /// reduce impurity; features are scanned in index order and thresholds
    /// ascending, so training is deterministic.
    pub fn fit(
        features: &[FeatureVector],
        labels: &[Category],
        weights: &[f64],
        depth_max: u32,
    ) -> Result<DecisionTree> {
        if features.is_empty() || features.len() != labels.len() || labels.len() != weights.len() {
            return Err(Error::InvalidParams(
                "training arrays must be nonempty and of equal length".into(),
            ));
        }
        let indices: Vec<usize> = (0..features.len()).collect();
        Ok(DecisionTree { root: build_node(features, labels, weights, &indices, depth_max) })
    }

    pub fn predict(&self, f: &FeatureVector) -> Category {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { category } => return *category,
                Node::Split { feature, threshold, left, right } => {
                    node = if f.0[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        fn d(n: &Node) -> u32 {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

fn class_weights(labels: &[Category], weights: &[f64], indices: &[usize]) -> [f64; CATEGORY_COUNT] {
    let mut w = [0.0; CATEGORY_COUNT];
    for &i in indices {
        w[labels[i].index()] += weights[i];
    }
    w
}

fn majority(class_w: &[f64; CATEGORY_COUNT]) -> Category {
    let mut best = 0;
    for k in 1..CATEGORY_COUNT {
        if class_w[k] > class_w[best] {
            best = k;
        }
    }
    Category::from_index(best).expect("index in range")
}

/// Sum of per-side weighted Gini impurities, written as
/// `W_side - sum_k w_k^2 / W_side` so the sweep only needs class sums.
fn split_impurity(left: &[f64; CATEGORY_COUNT], right: &[f64; CATEGORY_COUNT]) -> f64 {
    let part = |side: &[f64; CATEGORY_COUNT]| {
        let total: f64 = side.iter().sum();
        if total <= 0.0 {
            return f64::INFINITY;
        }
        total - side.iter().map(|w| w * w).sum::<f64>() / total
    };
    part(left) + part(right)
}

fn build_node(
    features: &[FeatureVector],
    labels: &[Category],
    weights: &[f64],
    indices: &[usize],
    depth_left: u32,
) -> Node {
    let class_w = class_weights(labels, weights, indices);
    let total: f64 = class_w.iter().sum();
    let pure = class_w.iter().any(|&w| w == total && total > 0.0);
    if depth_left == 0 || indices.len() < 2 || pure {
        return Node::Leaf { category: majority(&class_w) };
    }

    let node_impurity = total - class_w.iter().map(|w| w * w).sum::<f64>() / total.max(1e-300);
    let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)
    let mut order: Vec<usize> = indices.to_vec();
    for feature in 0..FEATURE_DIM {
        order.sort_by(|&a, &b| {
            features[a].0[feature]
                .partial_cmp(&features[b].0[feature])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut left = [0.0; CATEGORY_COUNT];
        let mut right = class_w;
        for window in 0..order.len() - 1 {
            let i = order[window];
            left[labels[i].index()] += weights[i];
            right[labels[i].index()] -= weights[i];
            let (va, vb) = (features[i].0[feature], features[order[window + 1]].0[feature]);
            if va == vb {
                continue;
            }
            let impurity = split_impurity(&left, &right);
            if best.map_or(impurity < node_impurity - 1e-12, |(b, _, _)| impurity < b - 1e-12) {
                best = Some((impurity, feature, (va + vb) / 2.0));
            }
        }
    }

    match best {
        None => Node::Leaf { category: majority(&class_w) },
        Some((_, feature, threshold)) => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                indices.iter().partition(|&&i| features[i].0[feature] < threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(build_node(features, labels, weights, &l, depth_left - 1)),
                right: Box::new(build_node(features, labels, weights, &r, depth_left - 1)),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

/// Weighted ensemble of decision trees (multi-class discrete boosting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub trees: Vec<DecisionTree>,
    pub alphas: Vec<f64>,
}

impl BoostModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("boost model serializes")
    }

    pub fn from_json(s: &str) -> Result<BoostModel> {
        let model: BoostModel =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("boost model: {e}")))?;
        if model.trees.len() != model.alphas.len() {
            return Err(Error::Schema("tree/alpha count mismatch".into()));
        }
        if model.alphas.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::Schema("alphas must be finite and positive".into()));
        }
        Ok(model)
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }
}

/// Multi-class boosting over weak trees. Each round fits a tree to the
/// current weights; it is kept only when its weighted error beats random
/// guessing over five classes (error < 4/5), with vote weight
/// `ln((1-err)/err) + ln 4`. Misclassified examples are up-weighted by the
/// same factor. Training stops early when no acceptable learner exists or a
/// round is perfect (further rounds would repeat it).
pub fn train_adaboost(
    features: &[FeatureVector],
    labels: &[Category],
    rounds: u32,
    depth_max: u32,
) -> Result<BoostModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::InvalidParams(
            "training arrays must be nonempty and of equal length".into(),
        ));
    }
    let n = features.len();
    let reject_at = 1.0 - 1.0 / CATEGORY_COUNT as f64;
    let mut weights = vec![1.0 / n as f64; n];
    let mut model = BoostModel { trees: Vec::new(), alphas: Vec::new() };
    for _ in 0..rounds {
        let tree = DecisionTree::fit(features, labels, &weights, depth_max)?;
        let miss: Vec<bool> = (0..n).map(|i| tree.predict(&features[i]) != labels[i]).collect();
        let err: f64 = (0..n).filter(|&i| miss[i]).map(|i| weights[i]).sum();
        if err >= reject_at {
            break;
        }
        let bounded = err.max(1e-12);
        let alpha = ((1.0 - bounded) / bounded).ln() + (CATEGORY_COUNT as f64 - 1.0).ln();
        model.trees.push(tree);
        model.alphas.push(alpha);
        if err <= 0.0 {
            break;
        }
        let mut sum = 0.0;
        for i in 0..n {
            if miss[i] {
                weights[i] *= alpha.exp();
            }
            sum += weights[i];
        }
        for w in &mut weights {
            *w /= sum;
        }
    }
    Ok(model)
}

/// Per-category vote mass: the sum of alphas of trees voting for each class.
pub fn class_scores(model: &BoostModel, f: &FeatureVector) -> [f64; CATEGORY_COUNT] {
    let mut scores = [0.0; CATEGORY_COUNT];
    for (tree, alpha) in model.trees.iter().zip(&model.alphas) {
        scores[tree.predict(f).index()] += alpha;
    }
    scores
}

pub fn predict_category(model: &BoostModel, f: &FeatureVector) -> Category {
    let scores = class_scores(model, f);
    let mut best = 0;
    for k in 1..CATEGORY_COUNT {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Category::from_index(best).expect("index in range")
}

/// Map vote masses to a likelihood vector by a stable softmax followed by
/// floor normalization.
pub fn likelihoods_from_scores(
    scores: &[f64; CATEGORY_COUNT],
    floor: f64,
) -> Result<[f64; CATEGORY_COUNT]> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut exp = [0.0; CATEGORY_COUNT];
    for (e, s) in exp.iter_mut().zip(scores) {
        *e = (s - m).exp();
    }
    normalize_likelihoods(exp, floor)
}

/// Classify one blob of a grayscale image end to end.
pub fn blob_likelihoods(
    model: &BoostModel,
    img: &GrayImage,
    bbox: &BlobBox,
    floor: f64,
) -> Result<[f64; CATEGORY_COUNT]> {
    let f = extract_features(img, bbox)?;
    likelihoods_from_scores(&class_scores(model, &f), floor)
}

// ---------------------------------------------------------------------------
// Likelihood oracle
// ---------------------------------------------------------------------------

/// Synthetic likelihoods concentrated on the true category: the target puts
/// mass `accuracy` on it and spreads the rest uniformly. With
/// `kappa = Some(k)` the vector is drawn from a Dirichlet centered on that
/// target with concentration `k` (larger k, tighter around the target);
/// otherwise it is the target itself. `accuracy` must lie in [0.2, 1].
pub fn oracle_likelihoods(
    true_category: Category,
    accuracy: f64,
    kappa: Option<f64>,
    floor: f64,
    rng: &mut impl Rng,
) -> Result<[f64; CATEGORY_COUNT]> {
    if !(0.2..=1.0).contains(&accuracy) {
        return Err(Error::InvalidParams(format!("oracle accuracy {accuracy} outside [0.2, 1]")));
    }
    let spread = (1.0 - accuracy) / (CATEGORY_COUNT as f64 - 1.0);
    let mut raw = [spread; CATEGORY_COUNT];
    raw[true_category.index()] = accuracy;
    if let Some(k) = kappa {
        if k <= 0.0 || k.is_nan() {
            return Err(Error::InvalidParams(format!("kappa {k} must be positive")));
        }
        for v in raw.iter_mut() {
            let shape = k * *v;
            *v = if shape > 0.0 {
                Gamma::new(shape, 1.0)
                    .map_err(|e| Error::InvalidParams(format!("gamma shape: {e}")))?
                    .sample(rng)
            } else {
                0.0
            };
        }
    }
    normalize_likelihoods(raw, floor)
}

// ---------------------------------------------------------------------------
// Training manifest
// ---------------------------------------------------------------------------

/// One labeled region of a training image.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub pgm_path: String,
    pub bbox: BlobBox,
    pub category: Category,
}

/// Parse a `pgm_path,left,top,right,bottom,category` CSV. A leading header
/// row is skipped; blank lines are ignored.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("pgm_path")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::Schema(format!(
                "manifest line {}: expected 6 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::Schema(format!("manifest line {}: invalid {what} {s:?}", lineno + 1))
            })
        };
        let bbox = BlobBox::new(
            num(fields[1], "left")?,
            num(fields[2], "top")?,
            num(fields[3], "right")?,
            num(fields[4], "bottom")?,
        );
        bbox.validate()
            .map_err(|_| Error::Schema(format!("manifest line {}: degenerate box", lineno + 1)))?;
        let category = Category::from_str(fields[5]).map_err(|_| {
            Error::Schema(format!("manifest line {}: unknown category {:?}", lineno + 1, fields[5]))
        })?;
        rows.push(ManifestRow { pgm_path: fields[0].to_string(), bbox, category });
    }
    Ok(rows)
}
