//! Synthetic multilingual scene generator with ground truth: places
//! non-overlapping text lines with language-specific typography, jitters
//! blob edges, fragments some Korean syllables into stacked sub-blobs,
//! sprinkles outliers, and attaches oracle likelihoods.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classify::oracle_likelihoods;
use crate::imaging::GrayImage;
use crate::types::{BlobBox, Category, Labeling, Language, Line, LineModel, TextCandidate};
use crate::{Error, Result};

const PLACEMENT_ATTEMPTS: u32 = 1000;
const LIKELIHOOD_FLOOR: f64 = 1e-6;
/// Canvas margin kept clear around every blob, in pixels.
const MARGIN: f64 = 2.0;

/// Language-specific blob geometry knobs. Gaps and extender sizes are
/// fractions of the line height; Korean syllables may fragment into stacked
/// sub-blobs, reproducing over-segmented detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypographyProfile {
    pub language: Language,
    /// Inter-blob gap as a fraction of line height.
    pub gap_frac: f64,
    /// Width/height ratio center and half-range.
    pub aspect_mean: f64,
    pub aspect_jitter: f64,
    /// Probability that a blob grows above the mean line (ascender) or
    /// below the base line (descender), and how far, as a height fraction.
    pub ascender_prob: f64,
    pub descender_prob: f64,
    pub extender_frac: f64,
    /// Probability that a syllable also emits 2-3 stacked sub-blobs.
    pub stack_split: f64,
}

impl TypographyProfile {
    /// Built-in profile: wide Korean gaps, near-square Chinese boxes,
    /// narrow English/digit boxes with English ascenders and descenders.
    pub fn for_language(language: Language) -> TypographyProfile {
        match language {
            Language::English => TypographyProfile {
                language,
                gap_frac: 0.15,
                aspect_mean: 0.55,
                aspect_jitter: 0.1,
                ascender_prob: 0.3,
                descender_prob: 0.2,
                extender_frac: 0.25,
                stack_split: 0.0,
            },
            Language::Korean => TypographyProfile {
                language,
                gap_frac: 0.8,
                aspect_mean: 0.9,
                aspect_jitter: 0.1,
                ascender_prob: 0.0,
                descender_prob: 0.0,
                extender_frac: 0.0,
                stack_split: 0.5,
            },
            Language::Chinese => TypographyProfile {
                language,
                gap_frac: 0.3,
                aspect_mean: 1.0,
                aspect_jitter: 0.1,
                ascender_prob: 0.0,
                descender_prob: 0.0,
                extender_frac: 0.0,
                stack_split: 0.0,
            },
            Language::Digit => TypographyProfile {
                language,
                gap_frac: 0.2,
                aspect_mean: 0.5,
                aspect_jitter: 0.05,
                ascender_prob: 0.0,
                descender_prob: 0.0,
                extender_frac: 0.0,
                stack_split: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.ascender_prob, self.descender_prob, self.stack_split];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParams("profile probabilities outside [0,1]".into()));
        }
        if self.gap_frac < 0.0
            || self.extender_frac < 0.0
            || self.aspect_mean - self.aspect_jitter <= 0.0
        {
            return Err(Error::InvalidParams("profile geometry must stay positive".into()));
        }
        Ok(())
    }
}

/// Parameters of one generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub n_lines: usize,
    /// Line i uses `languages[i % len]`, so the ground-truth language mix
    /// follows this list exactly.
    pub languages: Vec<Language>,
    /// Gaussian edge noise as a fraction of line height; 0 gives exact
    /// horizontal lines with blobs flush on them.
    pub jitter_sigma: f64,
    /// Outliers added per inlier blob (rounded).
    pub outlier_frac: f64,
    /// Mass the likelihood oracle puts on the true category of text blobs,
    /// in [0.2, 1].
    pub oracle_accuracy: f64,
    /// Oracle mass on the non-text category for fragments and clutter, in
    /// [0.2, 1]. A classifier trained with under/over-segmented patches as
    /// explicit non-text negatives is far more confident on them than on
    /// text categories, so this defaults much sharper than
    /// `oracle_accuracy`; at the default cost constants that confidence is
    /// what lets whole syllable boxes beat their stacked fragments.
    pub nontext_accuracy: f64,
    /// Dirichlet concentration for likelihood jitter; exact target if absent.
    pub oracle_kappa: Option<f64>,
    pub image_size: [usize; 2],
    pub blobs_per_line: [usize; 2],
    pub blob_height: [f64; 2],
    /// Korean fragmentation probability (overrides the profile).
    pub stack_split: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_lines: 4,
            languages: Language::ALL.to_vec(),
            jitter_sigma: 0.05,
            outlier_frac: 0.15,
            oracle_accuracy: 0.9,
            nontext_accuracy: 0.9995,
            oracle_kappa: None,
            image_size: [640, 480],
            blobs_per_line: [4, 8],
            blob_height: [14.0, 26.0],
            stack_split: 0.5,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_lines < 1 {
            return Err(Error::InvalidParams("n_lines must be at least 1".into()));
        }
        if self.languages.is_empty() {
            return Err(Error::InvalidParams("languages must be nonempty".into()));
        }
        if !(0.0..1.0).contains(&self.jitter_sigma) {
            return Err(Error::InvalidParams("jitter_sigma outside [0,1)".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_frac) {
            return Err(Error::InvalidParams("outlier_frac outside [0,1]".into()));
        }
        if !(0.2..=1.0).contains(&self.oracle_accuracy) {
            return Err(Error::InvalidParams("oracle_accuracy outside [0.2,1]".into()));
        }
        if !(0.2..=1.0).contains(&self.nontext_accuracy) {
            return Err(Error::InvalidParams("nontext_accuracy outside [0.2,1]".into()));
        }
        if let Some(k) = self.oracle_kappa {
            if k <= 0.0 || k.is_nan() {
                return Err(Error::InvalidParams("oracle_kappa must be positive".into()));
            }
        }
        if self.image_size.iter().any(|&d| d < 48) {
            return Err(Error::InvalidParams("image_size sides must be at least 48".into()));
        }
        if self.blobs_per_line[0] < 2 || self.blobs_per_line[0] > self.blobs_per_line[1] {
            return Err(Error::InvalidParams("blobs_per_line must satisfy 2 <= min <= max".into()));
        }
        if self.blob_height[0] < 6.0 || self.blob_height[0] > self.blob_height[1] {
            return Err(Error::InvalidParams("blob_height must satisfy 6 <= min <= max".into()));
        }
        if !(0.0..=1.0).contains(&self.stack_split) {
            return Err(Error::InvalidParams("stack_split outside [0,1]".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene spec serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<SceneSpec> {
        let spec: SceneSpec =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub width: usize,
    pub height: usize,
    pub blobs: Vec<TextCandidate>,
    pub gt_lines: Vec<LineModel>,
    pub gt_labeling: Labeling,
}

impl SyntheticScene {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<SyntheticScene> {
        let scene: SyntheticScene =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("scene: {e}")))?;
        if !scene.gt_labeling.is_total_over(&scene.blobs) {
            return Err(Error::Schema("gt labeling does not cover the blobs".into()));
        }
        Ok(scene)
    }
}

struct PlacedLine {
    bbox: BlobBox,
    boxes: Vec<BlobBox>,
    fragments: Vec<Vec<BlobBox>>,
    model: LineModel,
}

/// Lay out one line; returns `None` when it does not fit the canvas or
/// collides with an already placed line.
fn try_place_line(
    spec: &SceneSpec,
    profile: &TypographyProfile,
    model_id: u32,
    taken: &[BlobBox],
    canvas: (f64, f64),
    rng: &mut impl Rng,
) -> Option<PlacedLine> {
    let (cw, ch) = canvas;
    let h = rng.random_range(spec.blob_height[0]..=spec.blob_height[1]).round();
    let n_blobs = rng.random_range(spec.blobs_per_line[0]..=spec.blobs_per_line[1]);
    let slope = if spec.jitter_sigma == 0.0 {
        0.0
    } else {
        rng.random_range(-spec.jitter_sigma..=spec.jitter_sigma)
    };
    let jitter = if spec.jitter_sigma > 0.0 {
        Some(Normal::new(0.0, spec.jitter_sigma * h).expect("positive sigma"))
    } else {
        None
    };

    let widths: Vec<f64> = (0..n_blobs)
        .map(|_| {
            let aspect = rng.random_range(
                profile.aspect_mean - profile.aspect_jitter
                    ..=profile.aspect_mean + profile.aspect_jitter,
            );
            (aspect * h).round().max(4.0)
        })
        .collect();
    let gaps: Vec<f64> = (0..n_blobs.saturating_sub(1))
        .map(|_| (profile.gap_frac * h * rng.random_range(0.8..=1.2)).round().max(1.0))
        .collect();
    let total_w: f64 = widths.iter().sum::<f64>() + gaps.iter().sum::<f64>();
    // Vertical clearance for jitter tails, extenders, and slope.
    let reach = h * (4.0 * spec.jitter_sigma + profile.extender_frac)
        + slope.abs() * total_w / 2.0
        + MARGIN;
    if total_w > cw - 2.0 * MARGIN || ch < h + 2.0 * reach + 2.0 * MARGIN {
        return None;
    }

    let x0 = rng.random_range(MARGIN..=cw - MARGIN - total_w).round();
    let y_top = rng.random_range(MARGIN + reach..=ch - MARGIN - reach - h).round();
    // Anchor the line pair at the horizontal center so slopes pivot there.
    let x_mid = x0 + total_w / 2.0;
    let mean_line = Line::new(slope, y_top - slope * x_mid);
    let base_line = Line::new(slope, y_top + h - slope * x_mid);

    let mut x = x0;
    let mut boxes = Vec::with_capacity(n_blobs);
    let mut fragments = Vec::with_capacity(n_blobs);
    let mut centers = Vec::with_capacity(n_blobs);
    for (j, w) in widths.iter().enumerate() {
        let cx = x + w / 2.0;
        let mut top = mean_line.y_at(cx);
        let mut bottom = base_line.y_at(cx);
        if let Some(noise) = &jitter {
            top += noise.sample(rng);
            bottom += noise.sample(rng);
        }
        // Extenders only perturb non-clean scenes, so jitter 0 keeps every
        // inlier corner exactly on the line pair.
        if spec.jitter_sigma > 0.0 {
            if rng.random_bool(profile.ascender_prob) {
                top -= profile.extender_frac * h * rng.random_range(0.5..=1.0);
            }
            if rng.random_bool(profile.descender_prob) {
                bottom += profile.extender_frac * h * rng.random_range(0.5..=1.0);
            }
        }
        top = top.round();
        bottom = bottom.round().max(top + 4.0);
        let bbox = BlobBox::new(x, top, x + w, bottom);
        if bbox.left < MARGIN
            || bbox.top < MARGIN
            || bbox.right > cw - MARGIN
            || bbox.bottom > ch - MARGIN
        {
            return None;
        }

        let stack_split = if profile.language == Language::Korean {
            spec.stack_split
        } else {
            profile.stack_split
        };
        let mut frags = Vec::new();
        if stack_split > 0.0 && rng.random_bool(stack_split) {
            let n_frag = rng.random_range(2..=3usize);
            let bh = bottom - top;
            let mut cuts = vec![top];
            for f in 1..n_frag {
                let frac = f as f64 / n_frag as f64 + rng.random_range(-0.08..=0.08);
                cuts.push((top + frac * bh).round());
            }
            cuts.push(bottom);
            for f in 0..n_frag {
                if cuts[f + 1] - cuts[f] >= 2.0 {
                    frags.push(BlobBox::new(x, cuts[f], x + w, cuts[f + 1]));
                }
            }
        }

        boxes.push(bbox);
        fragments.push(frags);
        centers.push(cx);
        x += w + gaps.get(j).copied().unwrap_or(0.0);
    }

    let mut line_bbox = boxes[0];
    for b in &boxes[1..] {
        line_bbox = line_bbox.union(b);
    }
    let padded = BlobBox::new(
        line_bbox.left - MARGIN,
        line_bbox.top - MARGIN,
        line_bbox.right + MARGIN,
        line_bbox.bottom + MARGIN,
    );
    if taken.iter().any(|t| padded.iou(t) > 0.0) {
        return None;
    }

    let x_ref = (centers[0] + centers[centers.len() - 1]) / 2.0;
    Some(PlacedLine {
        bbox: padded,
        boxes,
        fragments,
        model: LineModel { id: model_id, language: profile.language, mean_line, base_line, x_ref },
    })
}

/// Generate a scene: per-line typography by language, Gaussian edge jitter,
/// Korean fragments and uniform outliers labeled as outliers in the ground
/// truth, and oracle likelihoods on every blob. Deterministic per RNG state;
/// fails if a line cannot be placed in 1000 attempts.
pub fn generate_scene(spec: &SceneSpec, rng: &mut impl Rng) -> Result<SyntheticScene> {
    spec.validate()?;
    let canvas = (spec.image_size[0] as f64, spec.image_size[1] as f64);

    let mut taken: Vec<BlobBox> = Vec::new();
    let mut placed: Vec<PlacedLine> = Vec::new();
    for i in 0..spec.n_lines {
        let language = spec.languages[i % spec.languages.len()];
        let profile = TypographyProfile::for_language(language);
        profile.validate()?;
        let mut line = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            if let Some(p) = try_place_line(spec, &profile, i as u32, &taken, canvas, rng) {
                line = Some(p);
                break;
            }
        }
        let line = line.ok_or(Error::PlacementFailed(PLACEMENT_ATTEMPTS))?;
        taken.push(line.bbox);
        placed.push(line);
    }

    let mut blobs = Vec::new();
    let mut gt_labeling = Labeling::new();
    let mut next_id: u32 = 0;
    let mut n_inliers = 0usize;
    for line in &placed {
        for (bbox, frags) in line.boxes.iter().zip(&line.fragments) {
            let lik = oracle_likelihoods(
                line.model.language.category(),
                spec.oracle_accuracy,
                spec.oracle_kappa,
                LIKELIHOOD_FLOOR,
                rng,
            )?;
            blobs.push(TextCandidate::with_likelihoods(next_id, *bbox, lik, LIKELIHOOD_FLOOR)?);
            gt_labeling.set(next_id, Some(line.model.id));
            next_id += 1;
            n_inliers += 1;
            for fb in frags {
                let flik = oracle_likelihoods(
                    Category::NonText,
                    spec.nontext_accuracy,
                    spec.oracle_kappa,
                    LIKELIHOOD_FLOOR,
                    rng,
                )?;
                blobs.push(TextCandidate::with_likelihoods(next_id, *fb, flik, LIKELIHOOD_FLOOR)?);
                gt_labeling.set(next_id, None);
                next_id += 1;
            }
        }
    }

    let n_outliers = (spec.outlier_frac * n_inliers as f64).round() as usize;
    for _ in 0..n_outliers {
        let w = rng.random_range(6.0_f64..=28.0).round();
        let h = rng.random_range(6.0_f64..=28.0).round();
        let left = rng.random_range(MARGIN..=canvas.0 - MARGIN - w).round();
        let top = rng.random_range(MARGIN..=canvas.1 - MARGIN - h).round();
        let lik = oracle_likelihoods(
            Category::NonText,
            spec.nontext_accuracy,
            spec.oracle_kappa,
            LIKELIHOOD_FLOOR,
            rng,
        )?;
        blobs.push(TextCandidate::with_likelihoods(
            next_id,
            BlobBox::new(left, top, left + w, top + h),
            lik,
            LIKELIHOOD_FLOOR,
        )?);
        gt_labeling.set(next_id, None);
        next_id += 1;
    }

    Ok(SyntheticScene {
        width: spec.image_size[0],
        height: spec.image_size[1],
        blobs,
        gt_lines: placed.into_iter().map(|p| p.model).collect(),
        gt_labeling,
    })
}

/// Rasterize a scene: white filled blob rectangles on a black canvas (white
/// foreground keeps thresholding straightforward downstream). Fragment
/// boxes lie inside their syllable box, so drawing them changes nothing.
pub fn render_scene(scene: &SyntheticScene) -> GrayImage {
    let mut img = GrayImage::new(scene.width, scene.height, 0);
    for blob in &scene.blobs {
        let l = (blob.bbox.left.round().max(0.0) as usize).min(scene.width);
        let t = (blob.bbox.top.round().max(0.0) as usize).min(scene.height);
        let r = (blob.bbox.right.round().max(0.0) as usize).min(scene.width);
        let b = (blob.bbox.bottom.round().max(0.0) as usize).min(scene.height);
        for y in t..b {
            for x in l..r {
                img.set(x, y, 255);
            }
        }
    }
    img
}
