//! Per-model re-estimation: least-squares refitting of mean/base lines from
//! the current inliers' corners, plus re-estimation of the language mark.
//!
//! Each model is updated by an accept-if-better rule: the refit candidate
//! (and every language substitution) is scored by its inlier data terms plus
//! the language label cost it would induce given the other active models, and
//! the model only changes when that score strictly improves. This makes a
//! refit pass non-increasing for the total energy in every mode and exactly
//! idempotent for a fixed labeling.

use std::collections::BTreeSet;

use crate::energy::{data_term_for_model, ModelPool};
use crate::types::{EnergyParams, Labeling, Language, Line, LineModel, Point2D, TextCandidate};
use crate::{Error, Result};

/// Least-squares line fit with a slope cap.
///
/// Minimizes the vertical residual sum of squares in closed form; if the
/// unconstrained slope exceeds `slope_max` it is clamped and the intercept is
/// re-estimated under the clamp (which is the constrained optimum).
pub fn fit_line_ls(points: &[Point2D], slope_max: f64) -> Result<Line> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::DegenerateAbscissae);
    }
    let mean_x: f64 = points.iter().map(|p| p.x).sum::<f64>() / n;
    let mean_y: f64 = points.iter().map(|p| p.y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateAbscissae);
    }
    let sxy: f64 = points.iter().map(|p| (p.x - mean_x) * (p.y - mean_y)).sum();
    let slope = (sxy / sxx).clamp(-slope_max, slope_max);
    Ok(Line { slope, intercept: mean_y - slope * mean_x })
}

/// Sum of a model's data terms over its inliers.
fn inlier_data_sum(model: &LineModel, inliers: &[&TextCandidate], params: &EnergyParams) -> f64 {
    inliers.iter().map(|b| data_term_for_model(b, model, params)).sum()
}

/// Re-estimate every model from its inliers under `labeling`.
///
/// A model with at least two inliers at distinct center abscissae gets a
/// least-squares refit of its mean line (over inlier top corners) and base
/// line (over bottom corners), with the reference abscissa moved to the
/// inlier span midpoint; every language substitution of both the old and new
/// geometry is considered, and the cheapest candidate — by inlier data terms
/// plus the induced language label cost — replaces the model only on strict
/// improvement. Models with fewer usable inliers are returned unchanged.
/// Ids, order, and pool size are preserved.
pub fn refit_models(
    pool: &ModelPool,
    blobs: &[TextCandidate],
    labeling: &Labeling,
    params: &EnergyParams,
) -> ModelPool {
    let mut out = pool.clone();
    for idx in 0..out.models.len() {
        let model = out.models[idx].clone();
        let inlier_ids = labeling.support(model.id);
        let inliers: Vec<&TextCandidate> =
            blobs.iter().filter(|b| inlier_ids.contains(&b.id)).collect();
        if inliers.len() < 2 {
            continue;
        }
        let mut centers: Vec<f64> = inliers.iter().map(|b| b.bbox.center().x).collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if centers.first() == centers.last() {
            continue; // vertical stack: no usable horizontal extent
        }

        // Languages already paid for by the other active models; switching
        // into one of them is free, switching out of the last user of a
        // language refunds it.
        let other_langs: BTreeSet<Language> = labeling
            .active_models()
            .into_iter()
            .filter(|id| *id != model.id)
            .filter_map(|id| out.get(id).map(|m| m.language))
            .collect();

        let top_pts: Vec<Point2D> = inliers.iter().flat_map(|b| [b.a(), b.b()]).collect();
        let bottom_pts: Vec<Point2D> = inliers.iter().flat_map(|b| [b.c(), b.d()]).collect();
        let refit_geometry = match (
            fit_line_ls(&top_pts, params.slope_max),
            fit_line_ls(&bottom_pts, params.slope_max),
        ) {
            (Ok(mean_line), Ok(base_line)) => {
                let x_ref = (centers.first().unwrap() + centers.last().unwrap()) / 2.0;
                let m = LineModel { mean_line, base_line, x_ref, ..model.clone() };
                // Reject degenerate refits where the lines cross at x_ref.
                (m.height_at_ref() > 0.0).then_some(m)
            }
            _ => None,
        };

        // Candidate order matters only for ties: the incumbent goes first so
        // equal scores leave the model untouched.
        let mut candidates: Vec<LineModel> = vec![model.clone()];
        for lang in Language::ALL {
            if lang != model.language {
                candidates.push(LineModel { language: lang, ..model.clone() });
            }
        }
        if let Some(g) = refit_geometry {
            for lang in Language::ALL {
                candidates.push(LineModel { language: lang, ..g.clone() });
            }
        }
        let score = |m: &LineModel| {
            let label = if other_langs.contains(&m.language) { 0.0 } else { params.language_cost };
            inlier_data_sum(m, &inliers, params) + label
        };
        let incumbent_score = score(&candidates[0]);
        let mut best = (incumbent_score, 0usize);
        for (i, cand) in candidates.iter().enumerate().skip(1) {
            let s = score(cand);
            if s < best.0 {
                best = (s, i);
            }
        }
        if best.1 != 0 {
            out.models[idx] = candidates[best.1].clone();
        }
    }
    out
}
