//! The top-level fitting driver: sample an initial pool from blob pairs,
//! then alternate optimal model assignment and model refitting until the
//! energy stops improving, and finally drop models that own no blobs.
//!
//! Every half-step is individually non-increasing — assignment seeds each
//! sweep with the incumbent labeling, and refitting only accepts per-model
//! improvements — so the recorded energy trace is monotone in the default
//! squared geometric mode (and, by construction, in absolute mode too).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, ModelPool};
use crate::fusion::assign_models_from;
use crate::proposals::sample_initial_pool;
use crate::refit::refit_models;
use crate::types::{BlobId, EnergyParams, Labeling, Language, ModelId, TextCandidate};
use crate::Result;

/// Result of a fitting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearlOutcome {
    /// Models with at least one inlier, refit to their final parameters.
    pub pool: ModelPool,
    pub labeling: Labeling,
    /// Energy after the initial state and after every assignment and refit
    /// half-step, in order.
    pub trace: Vec<f64>,
    /// Assign/refit sweeps actually performed.
    pub iterations: u32,
}

/// Keep exactly the models with at least one assigned blob. The labeling and
/// its energy are unchanged by construction.
pub fn prune_unused(pool: &ModelPool, labeling: &Labeling) -> ModelPool {
    let active = labeling.active_models();
    ModelPool { models: pool.models.iter().filter(|m| active.contains(&m.id)).cloned().collect() }
}

/// Run the full driver on a blob set with the pool sampled from Delaunay
/// pairs (seeded by `params.rng_seed`, so identical inputs give identical
/// outputs).
pub fn pearl(blobs: &[TextCandidate], params: &EnergyParams) -> Result<PearlOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let pool = sample_initial_pool(blobs, params, &mut rng);
    pearl_with_pool(blobs, pool, params)
}

/// Run the assign/refit loop over a caller-supplied pool.
pub fn pearl_with_pool(
    blobs: &[TextCandidate],
    mut pool: ModelPool,
    params: &EnergyParams,
) -> Result<PearlOutcome> {
    if blobs.is_empty() {
        return Ok(PearlOutcome {
            pool: ModelPool::new(),
            labeling: Labeling::new(),
            trace: vec![0.0],
            iterations: 0,
        });
    }
    let mut labeling = Labeling::all_outlier(blobs);
    let mut trace = vec![total_energy(blobs, &labeling, &pool, params)?];
    let mut iterations = 0;
    for _ in 0..params.max_iterations {
        let before = *trace.last().unwrap();
        labeling = assign_models_from(&labeling, &pool, blobs, params)?;
        trace.push(total_energy(blobs, &labeling, &pool, params)?);
        pool = refit_models(&pool, blobs, &labeling, params);
        trace.push(total_energy(blobs, &labeling, &pool, params)?);
        iterations += 1;
        if before - trace.last().unwrap() < params.convergence_tol {
            break;
        }
    }
    let pool = prune_unused(&pool, &labeling);
    Ok(PearlOutcome { pool, labeling, trace, iterations })
}

/// Per-model summary for run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub id: ModelId,
    pub language: Language,
    pub inliers: Vec<BlobId>,
}

/// The machine-readable report emitted after a fitting run: the effective
/// parameters, the energy trace, each surviving model's inliers, and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: EnergyParams,
    pub energy_trace: Vec<f64>,
    pub final_energy: f64,
    pub iterations: u32,
    pub models: Vec<ModelReport>,
    pub n_blobs: usize,
    pub n_outliers: usize,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn new(outcome: &PearlOutcome, params: &EnergyParams, wall_ms: f64) -> Self {
        let models = outcome
            .pool
            .iter()
            .map(|m| ModelReport {
                id: m.id,
                language: m.language,
                inliers: outcome.labeling.support(m.id),
            })
            .collect();
        let n_outliers = outcome.labeling.assignment.values().filter(|l| l.is_none()).count();
        RunReport {
            params: params.clone(),
            energy_trace: outcome.trace.clone(),
            final_energy: *outcome.trace.last().unwrap_or(&0.0),
            iterations: outcome.iterations,
            models,
            n_blobs: outcome.labeling.len(),
            n_outliers,
            wall_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BlobBox, Line, LineModel};
    use rand::{Rng, SeedableRng};

    fn blob_span(id: u32, cx: f64, top: f64, bottom: f64, w: f64) -> TextCandidate {
        TextCandidate::new(id, BlobBox::new(cx - w / 2.0, top, cx + w / 2.0, bottom))
    }

    #[test]
    fn empty_input_yields_empty_outcome() {
        let out = pearl(&[], &EnergyParams::default()).unwrap();
        assert!(out.pool.is_empty());
        assert!(out.labeling.is_empty());
        assert_eq!(out.trace, vec![0.0]);
    }

    #[test]
    fn lonely_blob_stays_an_outlier() {
        let params = EnergyParams::default();
        let blobs = vec![blob_span(0, 10.0, 5.0, 15.0, 6.0)];
        let out = pearl(&blobs, &params).unwrap();
        assert!(out.pool.is_empty());
        assert_eq!(out.labeling.get(0), Some(None));
        assert_eq!(out.trace[0], params.outlier_cost);
    }

    #[test]
    fn cheap_line_costs_group_a_strong_pair() {
        // With label costs below the outlier alternative, two aligned blobs
        // with confident same-language likelihoods must become one line:
        // line energy = 2 * (-ln 0.9) + line + language costs
        //             = 0.21 + 5 + 3 = 8.21 < 16 = 2 * outlier_cost.
        let params = EnergyParams { line_cost: 5.0, language_cost: 3.0, ..EnergyParams::default() };
        let mut blobs =
            vec![blob_span(0, 5.0, 10.0, 20.0, 6.0), blob_span(1, 20.0, 10.0, 20.0, 6.0)];
        for b in &mut blobs {
            b.likelihoods = [0.025, 0.9, 0.025, 0.025, 0.025];
        }
        let out = pearl(&blobs, &params).unwrap();
        assert_eq!(out.pool.len(), 1);
        let model = &out.pool.models[0];
        assert_eq!(model.language, Language::Korean);
        assert_eq!(out.labeling.get(0), Some(Some(model.id)));
        assert_eq!(out.labeling.get(1), Some(Some(model.id)));
        let expected = 2.0 * -(0.9f64.ln()) + params.line_cost + params.language_cost;
        assert!((out.trace.last().unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn expensive_labels_leave_a_weak_pair_as_outliers() {
        // Same geometry, default label costs: 2 * 0.105 + 30 > 16, so the
        // outlier solution wins and the pruned pool is empty.
        let params = EnergyParams::default();
        let mut blobs =
            vec![blob_span(0, 5.0, 10.0, 20.0, 6.0), blob_span(1, 20.0, 10.0, 20.0, 6.0)];
        for b in &mut blobs {
            b.likelihoods = [0.025, 0.9, 0.025, 0.025, 0.025];
        }
        let out = pearl(&blobs, &params).unwrap();
        assert!(out.pool.is_empty());
        assert_eq!(out.labeling.get(0), Some(None));
        assert_eq!(out.labeling.get(1), Some(None));
    }

    #[test]
    fn trace_is_monotone_on_random_blob_fields() {
        for seed in 0..15 {
            let params = EnergyParams { rng_seed: seed, ..EnergyParams::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let blobs: Vec<TextCandidate> = (0..14)
                .map(|i| {
                    let cx = rng.random_range(0.0..150.0);
                    let top = rng.random_range(0.0..60.0);
                    let mut b = blob_span(i, cx, top, top + rng.random_range(5.0..14.0), 6.0);
                    let mut raw = [0.0; 5];
                    for r in raw.iter_mut() {
                        *r = rng.random_range(0.05..1.0);
                    }
                    b.likelihoods =
                        crate::types::normalize_likelihoods(raw, params.likelihood_floor).unwrap();
                    b
                })
                .collect();
            let out = pearl(&blobs, &params).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {seed}: trace {:?}", out.trace);
            }
            // The final labeling references only surviving models.
            for m in out.labeling.assignment.values().flatten() {
                assert!(out.pool.get(*m).is_some());
            }
        }
    }

    #[test]
    fn identical_inputs_give_identical_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = EnergyParams::default();
        let blobs: Vec<TextCandidate> = (0..10)
            .map(|i| {
                let cx = rng.random_range(0.0..100.0);
                let top = rng.random_range(0.0..30.0);
                blob_span(i, cx, top, top + 10.0, 6.0)
            })
            .collect();
        let a = pearl(&blobs, &params).unwrap();
        let b = pearl(&blobs, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prune_keeps_exactly_supported_models() {
        let mk = |id| LineModel {
            id,
            language: Language::English,
            mean_line: Line::new(0.0, 10.0 * id as f64),
            base_line: Line::new(0.0, 10.0 * id as f64 + 5.0),
            x_ref: 0.0,
        };
        let pool = ModelPool::from_models(vec![mk(0), mk(1), mk(2)]).unwrap();
        let mut labeling = Labeling::new();
        labeling.set(10, Some(0));
        labeling.set(11, None);
        labeling.set(12, Some(2));
        let pruned = prune_unused(&pool, &labeling);
        let ids: Vec<ModelId> = pruned.iter().map(|m| m.id).collect();
        assert_eq!(ids, vec![0, 2]);

        let all_used = prune_unused(&pruned, &labeling);
        assert_eq!(all_used, pruned);

        let empty = prune_unused(&pool, &Labeling::new());
        assert!(empty.is_empty());
    }

    #[test]
    fn run_report_summarizes_the_outcome() {
        let params = EnergyParams { line_cost: 5.0, language_cost: 3.0, ..EnergyParams::default() };
        let mut blobs =
            vec![blob_span(0, 5.0, 10.0, 20.0, 6.0), blob_span(1, 20.0, 10.0, 20.0, 6.0)];
        for b in &mut blobs {
            b.likelihoods = [0.025, 0.9, 0.025, 0.025, 0.025];
        }
        let out = pearl(&blobs, &params).unwrap();
        let report = RunReport::new(&out, &params, 1.25);
        assert_eq!(report.models.len(), 1);
        assert_eq!(report.models[0].inliers, vec![0, 1]);
        assert_eq!(report.n_blobs, 2);
        assert_eq!(report.n_outliers, 0);
        let json = report.to_json();
        assert!(json.contains("energy_trace"));
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
