//! The hierarchical energy: per-blob data terms plus label costs paid once
//! per active line model and once per active language.
//!
//! Everything the optimizers do is ultimately tested against the functions in
//! this module, so they stay deliberately direct: no caching, no incremental
//! updates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::{
    BlobId, EnergyParams, GeometricMode, Labeling, Language, LineModel, ModelId, TextCandidate,
};
use crate::{Error, Result};

/// The sampled, finite set of candidate line models, with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelPool {
    pub models: Vec<LineModel>,
}

impl ModelPool {
    pub fn new() -> Self {
        ModelPool::default()
    }

    pub fn from_models(models: Vec<LineModel>) -> Result<Self> {
        let mut pool = ModelPool::new();
        for m in models {
            pool.push(m)?;
        }
        Ok(pool)
    }

    /// Add a model; fails on duplicate id.
    pub fn push(&mut self, model: LineModel) -> Result<()> {
        if self.get(model.id).is_some() {
            return Err(Error::Schema(format!("duplicate model id {}", model.id)));
        }
        self.models.push(model);
        Ok(())
    }

    pub fn get(&self, id: ModelId) -> Option<&LineModel> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LineModel> {
        self.models.iter()
    }

    /// Smallest id strictly greater than every id in the pool.
    pub fn next_id(&self) -> ModelId {
        self.models.iter().map(|m| m.id + 1).max().unwrap_or(0)
    }
}

/// Scaled geometric error of a blob against a line model.
///
/// Each top corner is scored against the mean line and each bottom corner
/// against the base line by vertical distance `|corner.y - line(corner.x)|`.
/// The four residuals are summed (absolute mode) or sum-squared (squared
/// mode), scaled by the model language's tolerance `K`, and normalized by the
/// model height `Z` at its reference abscissa (`Z` in absolute mode, `Z²` in
/// squared mode) so the result is dimensionless and comparable across lines
/// of different heights.
pub fn geometric_distance(blob: &TextCandidate, model: &LineModel, params: &EnergyParams) -> f64 {
    let dy = |p: crate::types::Point2D, line: &crate::types::Line| (p.y - line.y_at(p.x)).abs();
    let residuals = [
        dy(blob.a(), &model.mean_line),
        dy(blob.b(), &model.mean_line),
        dy(blob.c(), &model.base_line),
        dy(blob.d(), &model.base_line),
    ];
    let z = model.height_at_ref().max(params.z_min);
    let k = params.k_scale.get(model.language);
    match params.geometric_mode {
        GeometricMode::Absolute => k / z * residuals.iter().sum::<f64>(),
        GeometricMode::Squared => k / (z * z) * residuals.iter().map(|r| r * r).sum::<f64>(),
    }
}

/// Data term of assigning `blob` to `label`: the outlier cost for the outlier
/// label, otherwise classification cost `-ln Pr(language)` plus the scaled
/// geometric error.
pub fn data_term(
    blob: &TextCandidate,
    label: Option<ModelId>,
    pool: &ModelPool,
    params: &EnergyParams,
) -> Result<f64> {
    match label {
        None => Ok(params.outlier_cost),
        Some(id) => {
            let model = pool.get(id).ok_or(Error::UnknownModel(id))?;
            Ok(data_term_for_model(blob, model, params))
        }
    }
}

/// Data term against a specific model (no pool lookup).
pub fn data_term_for_model(blob: &TextCandidate, model: &LineModel, params: &EnergyParams) -> f64 {
    let lik = blob.likelihood(model.language.category());
    -lik.ln() + geometric_distance(blob, model, params)
}

/// Languages of models with at least one assigned blob.
pub fn active_languages(labeling: &Labeling, pool: &ModelPool) -> Result<BTreeSet<Language>> {
    let mut langs = BTreeSet::new();
    for id in labeling.active_models() {
        let model = pool.get(id).ok_or(Error::UnknownModel(id))?;
        langs.insert(model.language);
    }
    Ok(langs)
}

/// The full hierarchical energy of a labeling: sum of data terms, plus the
/// line cost once per model with inliers, plus the language cost once per
/// language with an active model. Outlier assignments trigger no label costs.
pub fn total_energy(
    blobs: &[TextCandidate],
    labeling: &Labeling,
    pool: &ModelPool,
    params: &EnergyParams,
) -> Result<f64> {
    if labeling.len() != blobs.len() {
        return Err(Error::MismatchedBlobs);
    }
    let mut energy = 0.0;
    for blob in blobs {
        let label = labeling.get(blob.id).ok_or(Error::MismatchedBlobs)?;
        energy += data_term(blob, label, pool, params)?;
    }
    let active = labeling.active_models();
    energy += params.line_cost * active.len() as f64;
    let mut langs = BTreeSet::new();
    for id in &active {
        langs.insert(pool.get(*id).ok_or(Error::UnknownModel(*id))?.language);
    }
    energy += params.language_cost * langs.len() as f64;
    Ok(energy)
}

/// Blob ids assigned to each model, restricted to the given blob set.
pub fn inliers_of(labeling: &Labeling, model: ModelId) -> Vec<BlobId> {
    labeling.support(model)
}
