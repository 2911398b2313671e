//! Line-level scoring of detections against ground truth: greedy one-to-one
//! matching by inlier-set overlap with language agreement, reported as
//! precision, recall, and F.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::energy::ModelPool;
use crate::types::{Labeling, LineModel, ModelId};
use crate::{Error, Result};

/// One matched (detected, ground-truth) line pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub detected: ModelId,
    pub gt: ModelId,
    pub overlap: f64,
}

/// Line-level detection quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub pairs: Vec<MatchedPair>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

fn jaccard(a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Match detected lines to ground-truth lines. A pair is admissible when the
/// Jaccard overlap of their inlier blob sets reaches `overlap_min` and the
/// languages agree; pairs are then taken greedily by descending overlap,
/// ties broken by lower ground-truth id, then lower detected id. Lines
/// without any inlier are ignored on both sides. The two labelings must
/// cover the same blobs.
pub fn match_lines(
    detected_pool: &ModelPool,
    detected: &Labeling,
    gt_lines: &[LineModel],
    gt_labeling: &Labeling,
    overlap_min: f64,
) -> Result<Vec<MatchedPair>> {
    if detected.len() != gt_labeling.len()
        || detected.assignment.keys().zip(gt_labeling.assignment.keys()).any(|(a, b)| a != b)
    {
        return Err(Error::MismatchedBlobs);
    }
    if !(0.0..=1.0).contains(&overlap_min) {
        return Err(Error::InvalidParams(format!("overlap_min {overlap_min} outside [0,1]")));
    }

    let det_active: Vec<(ModelId, BTreeSet<u32>)> = detected
        .active_models()
        .into_iter()
        .map(|id| (id, detected.support(id).into_iter().collect()))
        .collect();
    let gt_active: Vec<(ModelId, BTreeSet<u32>)> = gt_labeling
        .active_models()
        .into_iter()
        .map(|id| (id, gt_labeling.support(id).into_iter().collect()))
        .collect();

    let mut candidates = Vec::new();
    for (did, dset) in &det_active {
        let dmodel = detected_pool.get(*did).ok_or(Error::UnknownModel(*did))?;
        for (gid, gset) in &gt_active {
            let gmodel = gt_lines.iter().find(|m| m.id == *gid).ok_or(Error::UnknownModel(*gid))?;
            if dmodel.language != gmodel.language {
                continue;
            }
            let overlap = jaccard(dset, gset);
            if overlap >= overlap_min && overlap > 0.0 {
                candidates.push(MatchedPair { detected: *did, gt: *gid, overlap });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.overlap
            .partial_cmp(&a.overlap)
            .expect("overlaps are finite")
            .then(a.gt.cmp(&b.gt))
            .then(a.detected.cmp(&b.detected))
    });

    let mut used_det = BTreeSet::new();
    let mut used_gt = BTreeSet::new();
    let mut pairs = Vec::new();
    for c in candidates {
        if !used_det.contains(&c.detected) && !used_gt.contains(&c.gt) {
            used_det.insert(c.detected);
            used_gt.insert(c.gt);
            pairs.push(c);
        }
    }
    Ok(pairs)
}

/// Precision/recall/F from a matching. An empty detection side counts as
/// vacuously precise (P = 1) and an empty ground truth as fully recalled
/// (R = 1); F is the harmonic mean, or 0 when both P and R vanish.
pub fn precision_recall_f(
    pairs: &[MatchedPair],
    n_detected: usize,
    n_gt: usize,
) -> Result<Metrics> {
    if pairs.len() > n_detected.min(n_gt) {
        return Err(Error::InvalidParams(format!(
            "{} matched pairs exceed {n_detected} detected / {n_gt} gt lines",
            pairs.len()
        )));
    }
    let matched = pairs.len() as f64;
    let precision = if n_detected == 0 { 1.0 } else { matched / n_detected as f64 };
    let recall = if n_gt == 0 { 1.0 } else { matched / n_gt as f64 };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics { precision, recall, f, pairs: pairs.to_vec() })
}

/// Match and score in one step, counting only lines with inliers.
pub fn evaluate(
    detected_pool: &ModelPool,
    detected: &Labeling,
    gt_lines: &[LineModel],
    gt_labeling: &Labeling,
    overlap_min: f64,
) -> Result<Metrics> {
    let pairs = match_lines(detected_pool, detected, gt_lines, gt_labeling, overlap_min)?;
    precision_recall_f(&pairs, detected.active_models().len(), gt_labeling.active_models().len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Language, Line};

    fn model(id: u32, language: Language) -> LineModel {
        LineModel {
            id,
            language,
            mean_line: Line::new(0.0, 10.0 * id as f64),
            base_line: Line::new(0.0, 10.0 * id as f64 + 8.0),
            x_ref: 0.0,
        }
    }

    /// Universe of `n` blobs; `groups[i]` lists the blob ids of line i, the
    /// rest stay outliers.
    fn labeling(n: u32, groups: &[(u32, &[u32])]) -> Labeling {
        let mut l = Labeling::new();
        for id in 0..n {
            l.set(id, None);
        }
        for (model, blobs) in groups {
            for b in *blobs {
                l.set(*b, Some(*model));
            }
        }
        l
    }

    fn pool_of(models: &[LineModel]) -> ModelPool {
        ModelPool::from_models(models.to_vec()).unwrap()
    }

    #[test]
    fn identical_detections_score_perfectly() {
        let gt = vec![model(0, Language::Korean), model(1, Language::Digit)];
        let gt_lab = labeling(6, &[(0, &[0, 1, 2]), (1, &[3, 4])]);
        let m = evaluate(&pool_of(&gt), &gt_lab, &gt, &gt_lab, 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f), (1.0, 1.0, 1.0));
        assert_eq!(m.pairs.len(), 2);
        for p in &m.pairs {
            assert_eq!(p.overlap, 1.0);
        }
    }

    #[test]
    fn no_detections_are_vacuously_precise() {
        let gt = vec![model(0, Language::Korean)];
        let gt_lab = labeling(4, &[(0, &[0, 1, 2, 3])]);
        let empty = labeling(4, &[]);
        let m = evaluate(&ModelPool::new(), &empty, &gt, &gt_lab, 0.5).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f, 0.0);
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn empty_ground_truth_is_fully_recalled() {
        let det = vec![model(0, Language::English)];
        let det_lab = labeling(3, &[(0, &[0, 1])]);
        let gt_lab = labeling(3, &[]);
        let m = evaluate(&pool_of(&det), &det_lab, &[], &gt_lab, 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f), (0.0, 1.0, 0.0));
        let both = evaluate(&ModelPool::new(), &gt_lab, &[], &gt_lab, 0.5).unwrap();
        assert_eq!((both.precision, both.recall, both.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn three_of_four_matches_give_the_textbook_ratios() {
        let gt: Vec<LineModel> = (0..5).map(|i| model(i, Language::Chinese)).collect();
        let gt_lab =
            labeling(10, &[(0, &[0, 1]), (1, &[2, 3]), (2, &[4, 5]), (3, &[6, 7]), (4, &[8, 9])]);
        // Three detected lines copy gt lines; the fourth has the right blobs
        // for gt line 4 but the wrong language.
        let det = vec![
            model(10, Language::Chinese),
            model(11, Language::Chinese),
            model(12, Language::Chinese),
            model(13, Language::Korean),
        ];
        let det_lab = labeling(10, &[(10, &[0, 1]), (11, &[2, 3]), (12, &[4, 5]), (13, &[8, 9])]);
        let m = evaluate(&pool_of(&det), &det_lab, &gt, &gt_lab, 0.5).unwrap();
        assert_eq!(m.pairs.len(), 3);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f - 2.0 * 0.45 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn partial_overlap_respects_the_threshold() {
        let gt = vec![model(0, Language::English)];
        let gt_lab = labeling(4, &[(0, &[0, 1, 2, 3])]);
        let det = vec![model(5, Language::English)];
        // Overlap 2/4 = 0.5: in at 0.5, out just above.
        let det_lab = labeling(4, &[(5, &[0, 1])]);
        let at = evaluate(&pool_of(&det), &det_lab, &gt, &gt_lab, 0.5).unwrap();
        assert_eq!(at.pairs.len(), 1);
        let above = evaluate(&pool_of(&det), &det_lab, &gt, &gt_lab, 0.51).unwrap();
        assert!(above.pairs.is_empty());
    }

    #[test]
    fn greedy_matches_the_exhaustive_optimum_on_a_crossed_fixture() {
        // d0 overlaps g0 strongly and g1 weakly; d1 the reverse. Greedy takes
        // (d0,g0) then (d1,g1), which is also the maximum matching.
        let gt = vec![model(0, Language::Digit), model(1, Language::Digit)];
        let gt_lab = labeling(10, &[(0, &[0, 1, 2, 3, 4]), (1, &[5, 6, 7, 8, 9])]);
        let det = vec![model(20, Language::Digit), model(21, Language::Digit)];
        let det_lab = labeling(10, &[(20, &[0, 1, 2, 3, 5]), (21, &[6, 7, 8, 9, 4])]);
        let pairs = match_lines(&pool_of(&det), &det_lab, &gt, &gt_lab, 0.3).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!((pairs[0].detected, pairs[0].gt), (20, 0));
        assert_eq!((pairs[1].detected, pairs[1].gt), (21, 1));

        // Exhaustive maximum over one-to-one assignments.
        let overlap = |d: &[u32], g: &[u32]| {
            let ds: BTreeSet<u32> = d.iter().copied().collect();
            let gs: BTreeSet<u32> = g.iter().copied().collect();
            jaccard(&ds, &gs)
        };
        let o = [
            [
                overlap(&[0, 1, 2, 3, 5], &[0, 1, 2, 3, 4]),
                overlap(&[0, 1, 2, 3, 5], &[5, 6, 7, 8, 9]),
            ],
            [
                overlap(&[6, 7, 8, 9, 4], &[0, 1, 2, 3, 4]),
                overlap(&[6, 7, 8, 9, 4], &[5, 6, 7, 8, 9]),
            ],
        ];
        let admissible = |v: f64| v >= 0.3;
        let best = [
            (admissible(o[0][0]) as usize) + (admissible(o[1][1]) as usize),
            (admissible(o[0][1]) as usize) + (admissible(o[1][0]) as usize),
            admissible(o[0][0]) as usize,
            admissible(o[0][1]) as usize,
            admissible(o[1][0]) as usize,
            admissible(o[1][1]) as usize,
            0,
        ]
        .into_iter()
        .max()
        .unwrap();
        assert_eq!(pairs.len(), best);
    }

    #[test]
    fn tie_on_overlap_prefers_the_lower_gt_id() {
        // One detected line overlaps two same-language gt lines equally.
        let gt = vec![model(3, Language::Korean), model(7, Language::Korean)];
        let gt_lab = labeling(8, &[(3, &[0, 1]), (7, &[2, 3])]);
        let det = vec![model(0, Language::Korean)];
        let det_lab = labeling(8, &[(0, &[0, 2])]);
        // Jaccard with each gt line: 1/3.
        let pairs = match_lines(&pool_of(&det), &det_lab, &gt, &gt_lab, 0.2).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].gt, 3);
    }

    #[test]
    fn metrics_ignore_line_ordering_and_ids() {
        let gt = vec![model(0, Language::English), model(1, Language::Korean)];
        let gt_lab = labeling(8, &[(0, &[0, 1, 2]), (1, &[4, 5, 6])]);
        let det_a = vec![model(0, Language::English), model(1, Language::Korean)];
        let lab_a = labeling(8, &[(0, &[0, 1, 2, 3]), (1, &[4, 5])]);
        let det_b = vec![model(9, Language::Korean), model(4, Language::English)];
        let lab_b = labeling(8, &[(9, &[4, 5]), (4, &[0, 1, 2, 3])]);
        let ma = evaluate(&pool_of(&det_a), &lab_a, &gt, &gt_lab, 0.4).unwrap();
        let mb = evaluate(&pool_of(&det_b), &lab_b, &gt, &gt_lab, 0.4).unwrap();
        assert_eq!((ma.precision, ma.recall, ma.f), (mb.precision, mb.recall, mb.f));
        assert_eq!(ma.pairs.len(), mb.pairs.len());
    }

    #[test]
    fn raising_the_threshold_never_adds_matches() {
        let gt: Vec<LineModel> = (0..3).map(|i| model(i, Language::Chinese)).collect();
        let gt_lab = labeling(12, &[(0, &[0, 1, 2, 3]), (1, &[4, 5, 6, 7]), (2, &[8, 9, 10, 11])]);
        let det: Vec<LineModel> = (10..13).map(|i| model(i, Language::Chinese)).collect();
        let det_lab = labeling(12, &[(10, &[0, 1, 2, 4]), (11, &[5, 6]), (12, &[8, 11, 3, 7])]);
        let mut last = usize::MAX;
        for overlap_min in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let pairs = match_lines(&pool_of(&det), &det_lab, &gt, &gt_lab, overlap_min).unwrap();
            assert!(pairs.len() <= last);
            last = pairs.len();
        }
    }

    #[test]
    fn mismatched_blob_universes_are_rejected() {
        let gt = vec![model(0, Language::Korean)];
        let gt_lab = labeling(4, &[(0, &[0, 1])]);
        let det_lab = labeling(5, &[]);
        assert!(matches!(
            match_lines(&ModelPool::new(), &det_lab, &gt, &gt_lab, 0.5),
            Err(Error::MismatchedBlobs)
        ));
        assert!(
            precision_recall_f(&[MatchedPair { detected: 0, gt: 0, overlap: 1.0 }], 0, 1).is_err()
        );
    }
}
