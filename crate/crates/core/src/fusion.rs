//! Fusion moves: merge two candidate labelings into a crossover labeling of
//! minimal energy, solved globally via min-cut, plus the sequential sweep
//! that folds every pool model's proposal labeling into one solution.
//!
//! The crossover of labelings `l0` and `l1` under a bit vector `x` takes
//! `l1`'s label where `x_i = 1` and `l0`'s label where `x_i = 0`. The energy
//! of the crossover, as a function of `x`, is a sum of per-blob unary terms
//! plus one high-order term per label cost (line or language): the cost `C`
//! is avoided only on the single assignment of the term's support where every
//! blob still assigned to that label in `l0` switches away (`x = 1`) and
//! every blob that would join it from `l1` declines (`x = 0`).
//!
//! One-sided terms (an empty `must_be_one` or `must_be_zero` side) map to a
//! single auxiliary node in an s-t network, so the whole problem is one
//! min-cut. A term with both sides nonempty is supermodular and cannot ride
//! the same cut, so the solver enumerates pay/avoid cases over those terms —
//! avoided terms become hard constraints (infinite terminal arcs) — and takes
//! the best decoded assignment. The sweep only ever meets a handful of
//! two-sided terms per move (those of the incoming proposal's model and
//! language), so the case count stays tiny.
//!
//! Node-side convention throughout: a blob node on the source side of the cut
//! means `x_i = 1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::energy::{data_term, ModelPool};
use crate::maxflow::{FlowNetwork, INF};
use crate::proposals::make_labeling;
use crate::types::{BlobId, EnergyParams, Labeling, Language, TextCandidate};
use crate::{Error, Result};

/// One high-order cost term of the crossover energy: `cost` is paid unless
/// every blob in `must_be_one` takes `x = 1` and every blob in `must_be_zero`
/// takes `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTerm {
    pub cost: f64,
    pub must_be_one: BTreeSet<BlobId>,
    pub must_be_zero: BTreeSet<BlobId>,
}

impl CostTerm {
    /// An avoidable term has disjoint sides; overlapping sides demand
    /// `x = 1` and `x = 0` of the same blob, so the cost is paid always.
    pub fn is_avoidable(&self) -> bool {
        self.must_be_one.is_disjoint(&self.must_be_zero)
    }

    /// Whether assignment `x` (indexed via `index_of`) avoids this cost.
    fn avoided_by(&self, x: &[bool], index_of: &BTreeMap<BlobId, usize>) -> bool {
        self.must_be_one.iter().all(|b| x[index_of[b]])
            && self.must_be_zero.iter().all(|b| !x[index_of[b]])
    }
}

/// The binary crossover energy of two labelings: per-blob unary costs plus
/// high-order label-cost terms and a constant offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryFusionProblem {
    /// Blob ids in ascending order; bit `i` of an assignment refers to
    /// `blob_ids[i]`.
    pub blob_ids: Vec<BlobId>,
    /// `(D0, D1)` per blob: the data terms of keeping `l0`'s label versus
    /// taking `l1`'s.
    pub unary: Vec<(f64, f64)>,
    pub terms: Vec<CostTerm>,
    pub offset: f64,
}

impl BinaryFusionProblem {
    fn index_of(&self) -> BTreeMap<BlobId, usize> {
        self.blob_ids.iter().enumerate().map(|(i, b)| (*b, i)).collect()
    }

    /// The gadget network of the all-two-sided-terms-paid case, for
    /// debugging (DIMACS dump via [`FlowNetwork::to_dimacs`]).
    pub fn base_network(&self) -> FlowNetwork {
        let one_sided: Vec<&CostTerm> = self
            .terms
            .iter()
            .filter(|t| t.is_avoidable() && (t.must_be_one.is_empty() != t.must_be_zero.is_empty()))
            .collect();
        build_network(self, &one_sided, &BTreeSet::new(), &BTreeSet::new())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fusion problem serialization cannot fail")
    }
}

/// Evaluate the crossover energy at assignment `x`.
pub fn binary_energy(problem: &BinaryFusionProblem, x: &[bool]) -> f64 {
    assert_eq!(x.len(), problem.blob_ids.len(), "assignment length mismatch");
    let index_of = problem.index_of();
    let mut energy = problem.offset;
    for (i, &(d0, d1)) in problem.unary.iter().enumerate() {
        energy += if x[i] { d1 } else { d0 };
    }
    for t in &problem.terms {
        if !t.avoided_by(x, &index_of) {
            energy += t.cost;
        }
    }
    energy
}

/// Build the crossover energy of two labelings over the same blobs.
///
/// One cost term is emitted per line model assigned somewhere in either
/// labeling (cost = line cost, sides = the model's supports in `l0` and
/// `l1`), and one per language likewise aggregated over that language's
/// models. Outlier assignments contribute to no support. The result satisfies
/// `binary_energy(problem, x) == total_energy(apply_crossover(l0, l1, x))`
/// for every `x`.
pub fn build_fusion_problem(
    l0: &Labeling,
    l1: &Labeling,
    blobs: &[TextCandidate],
    pool: &ModelPool,
    params: &EnergyParams,
) -> Result<BinaryFusionProblem> {
    if l0.len() != blobs.len() || l1.len() != blobs.len() {
        return Err(Error::MismatchedBlobs);
    }
    let mut by_id: BTreeMap<BlobId, &TextCandidate> = BTreeMap::new();
    for b in blobs {
        by_id.insert(b.id, b);
    }
    let blob_ids: Vec<BlobId> = by_id.keys().copied().collect();
    if blob_ids.iter().any(|id| l0.get(*id).is_none() || l1.get(*id).is_none()) {
        return Err(Error::MismatchedBlobs);
    }

    let mut unary = Vec::with_capacity(blob_ids.len());
    for id in &blob_ids {
        let d0 = data_term(by_id[id], l0.get(*id).unwrap(), pool, params)?;
        let d1 = data_term(by_id[id], l1.get(*id).unwrap(), pool, params)?;
        unary.push((d0, d1));
    }

    let mut terms = Vec::new();
    // Line cost terms: one per model with support in either labeling.
    for model in pool.iter() {
        let p0: BTreeSet<BlobId> = l0.support(model.id).into_iter().collect();
        let p1: BTreeSet<BlobId> = l1.support(model.id).into_iter().collect();
        if p0.is_empty() && p1.is_empty() {
            continue;
        }
        terms.push(CostTerm { cost: params.line_cost, must_be_one: p0, must_be_zero: p1 });
    }
    // Language cost terms: supports aggregated over the language's models.
    for lang in Language::ALL {
        let support = |l: &Labeling| -> Result<BTreeSet<BlobId>> {
            let mut s = BTreeSet::new();
            for id in &blob_ids {
                if let Some(Some(m)) = l.get(*id) {
                    let model = pool.get(m).ok_or(Error::UnknownModel(m))?;
                    if model.language == lang {
                        s.insert(*id);
                    }
                }
            }
            Ok(s)
        };
        let p0 = support(l0)?;
        let p1 = support(l1)?;
        if p0.is_empty() && p1.is_empty() {
            continue;
        }
        terms.push(CostTerm { cost: params.language_cost, must_be_one: p0, must_be_zero: p1 });
    }

    Ok(BinaryFusionProblem { blob_ids, unary, terms, offset: 0.0 })
}

/// Componentwise crossover: take `l1`'s label where `x` is set, `l0`'s
/// elsewhere. Bits follow ascending blob-id order.
pub fn apply_crossover(l0: &Labeling, l1: &Labeling, x: &[bool]) -> Result<Labeling> {
    if l0.len() != l1.len() || l0.len() != x.len() {
        return Err(Error::MismatchedBlobs);
    }
    let mut out = Labeling::new();
    for (i, (&id, &label0)) in l0.assignment.iter().enumerate() {
        let label1 = l1.get(id).ok_or(Error::MismatchedBlobs)?;
        out.set(id, if x[i] { label1 } else { label0 });
    }
    Ok(out)
}

/// Build the s-t network for one case: unaries, one-sided term gadgets, and
/// hard forces from avoided two-sided terms. Node layout: blobs, then one
/// auxiliary node per one-sided term, then source, then sink.
fn build_network(
    problem: &BinaryFusionProblem,
    one_sided: &[&CostTerm],
    force_one: &BTreeSet<BlobId>,
    force_zero: &BTreeSet<BlobId>,
) -> FlowNetwork {
    let n = problem.blob_ids.len();
    let index_of = problem.index_of();
    let s = n + one_sided.len();
    let t = s + 1;
    let mut net = FlowNetwork::new(t + 1, s, t);
    for (i, &(d0, d1)) in problem.unary.iter().enumerate() {
        if d0 > 0.0 {
            net.add_arc(s, i, d0);
        }
        if d1 > 0.0 {
            net.add_arc(i, t, d1);
        }
    }
    for (a, term) in one_sided.iter().enumerate() {
        let h = n + a;
        if term.must_be_zero.is_empty() {
            // Pay `cost` unless all of must_be_one sit on the source side.
            net.add_arc(s, h, term.cost);
            for b in &term.must_be_one {
                net.add_arc(h, index_of[b], INF);
            }
        } else {
            // Pay `cost` unless all of must_be_zero sit on the sink side.
            net.add_arc(h, t, term.cost);
            for b in &term.must_be_zero {
                net.add_arc(index_of[b], h, INF);
            }
        }
    }
    for b in force_one {
        net.add_arc(s, index_of[b], INF);
    }
    for b in force_zero {
        net.add_arc(index_of[b], t, INF);
    }
    net
}

/// Globally minimize the crossover energy.
///
/// Avoidable one-sided terms ride the cut via auxiliary nodes. Each
/// avoidable two-sided term is enumerated as either paid (dropped from the
/// network) or avoided (its sides forced by infinite terminal arcs); the
/// returned assignment is the best decode over all consistent cases, which
/// covers every possible avoided-set and is therefore exact.
pub fn solve_fusion(problem: &BinaryFusionProblem) -> Result<Vec<bool>> {
    let n = problem.blob_ids.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut one_sided: Vec<&CostTerm> = Vec::new();
    let mut two_sided: Vec<&CostTerm> = Vec::new();
    for t in &problem.terms {
        if !t.is_avoidable() {
            continue; // paid regardless of x; a constant
        }
        match (t.must_be_one.is_empty(), t.must_be_zero.is_empty()) {
            (true, true) => {} // avoided by every x; contributes nothing
            (false, false) => two_sided.push(t),
            _ => one_sided.push(t),
        }
    }

    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u64..(1u64 << two_sided.len()) {
        let mut force_one: BTreeSet<BlobId> = BTreeSet::new();
        let mut force_zero: BTreeSet<BlobId> = BTreeSet::new();
        for (k, term) in two_sided.iter().enumerate() {
            if mask & (1 << k) != 0 {
                force_one.extend(term.must_be_one.iter().copied());
                force_zero.extend(term.must_be_zero.iter().copied());
            }
        }
        if !force_one.is_disjoint(&force_zero) {
            continue; // the avoided set demands contradictory assignments
        }
        let net = build_network(problem, &one_sided, &force_one, &force_zero);
        let cut = net.max_flow()?;
        let x: Vec<bool> = (0..n).map(|i| cut.source_side[i]).collect();
        let energy = binary_energy(problem, &x);
        if best.as_ref().is_none_or(|(e, _)| energy < *e) {
            best = Some((energy, x));
        }
    }
    Ok(best.expect("mask 0 is always consistent").1)
}

/// One optimal fusion move: merge `l1` into `l0`, never increasing energy.
pub fn fuse(
    l0: &Labeling,
    l1: &Labeling,
    blobs: &[TextCandidate],
    pool: &ModelPool,
    params: &EnergyParams,
) -> Result<Labeling> {
    let problem = build_fusion_problem(l0, l1, blobs, pool, params)?;
    let x = solve_fusion(&problem)?;
    apply_crossover(l0, l1, &x)
}

/// Sweep every pool model's single-model-vs-outlier proposal into `seed` by
/// optimal fusion moves; the result's energy never exceeds the seed's.
pub fn assign_models_from(
    seed: &Labeling,
    pool: &ModelPool,
    blobs: &[TextCandidate],
    params: &EnergyParams,
) -> Result<Labeling> {
    let mut current = seed.clone();
    for model in pool.iter() {
        let proposal = make_labeling(model, blobs, params);
        current = fuse(&current, &proposal, blobs, pool, params)?;
    }
    Ok(current)
}

/// The model-assignment sweep: start from the first model's proposal
/// labeling and fuse in each subsequent model's proposal. An empty pool
/// yields the all-outlier labeling.
pub fn assign_models(
    pool: &ModelPool,
    blobs: &[TextCandidate],
    params: &EnergyParams,
) -> Result<Labeling> {
    let Some(first) = pool.models.first() else {
        return Ok(Labeling::all_outlier(blobs));
    };
    let mut current = make_labeling(first, blobs, params);
    for model in pool.iter().skip(1) {
        let proposal = make_labeling(model, blobs, params);
        current = fuse(&current, &proposal, blobs, pool, params)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::total_energy;
    use crate::types::{BlobBox, Line, LineModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob_at(id: BlobId, cx: f64, cy: f64, w: f64, h: f64) -> TextCandidate {
        TextCandidate::new(id, BlobBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0))
    }

    fn random_instance(
        seed: u64,
        max_blobs: usize,
        max_models: usize,
    ) -> (Vec<TextCandidate>, ModelPool, EnergyParams, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=max_blobs);
        let params = EnergyParams::default();
        let blobs: Vec<TextCandidate> = (0..n as u32)
            .map(|i| {
                let mut b = blob_at(
                    i,
                    rng.random_range(0.0..80.0),
                    rng.random_range(0.0..60.0),
                    rng.random_range(3.0..9.0),
                    rng.random_range(4.0..12.0),
                );
                let mut raw = [0.0; 5];
                for r in raw.iter_mut() {
                    *r = rng.random_range(0.05..1.0);
                }
                b.likelihoods =
                    crate::types::normalize_likelihoods(raw, params.likelihood_floor).unwrap();
                b
            })
            .collect();
        let m = rng.random_range(1..=max_models);
        let langs = Language::ALL;
        let models: Vec<LineModel> = (0..m as u32)
            .map(|id| {
                let top = rng.random_range(0.0..50.0);
                let h = rng.random_range(4.0..14.0);
                let slope = rng.random_range(-0.3..0.3);
                LineModel {
                    id,
                    language: langs[rng.random_range(0..4)],
                    mean_line: Line::new(slope, top),
                    base_line: Line::new(slope + rng.random_range(-0.05..0.05), top + h),
                    x_ref: rng.random_range(0.0..80.0),
                }
            })
            .collect();
        let pool = ModelPool::from_models(models).unwrap();
        (blobs, pool, params, rng)
    }

    fn random_labeling(
        blobs: &[TextCandidate],
        pool: &ModelPool,
        rng: &mut ChaCha8Rng,
    ) -> Labeling {
        let mut l = Labeling::new();
        for b in blobs {
            let pick = rng.random_range(0..=pool.len());
            let label = if pick == pool.len() { None } else { Some(pool.models[pick].id) };
            l.set(b.id, label);
        }
        l
    }

    #[test]
    fn equal_labelings_make_energy_constant_in_x() {
        let (blobs, pool, params, mut rng) = random_instance(1, 6, 3);
        let l = random_labeling(&blobs, &pool, &mut rng);
        let problem = build_fusion_problem(&l, &l, &blobs, &pool, &params).unwrap();
        let n = blobs.len();
        let e0 = binary_energy(&problem, &vec![false; n]);
        for trial in 0..10u32 {
            let x: Vec<bool> = (0..n).map(|i| (trial >> i) & 1 == 1).collect();
            assert!((binary_energy(&problem, &x) - e0).abs() < 1e-9);
        }
        for &(d0, d1) in &problem.unary {
            assert_eq!(d0, d1);
        }
    }

    #[test]
    fn outlier_vs_single_model_supports() {
        let params = EnergyParams::default();
        let blobs: Vec<TextCandidate> =
            (0..4).map(|i| blob_at(i, 10.0 * i as f64, 10.0, 6.0, 8.0)).collect();
        let model = LineModel {
            id: 0,
            language: Language::Korean,
            mean_line: Line::new(0.0, 6.0),
            base_line: Line::new(0.0, 14.0),
            x_ref: 15.0,
        };
        let pool = ModelPool::from_models(vec![model]).unwrap();
        let l0 = Labeling::all_outlier(&blobs);
        let mut l1 = Labeling::new();
        for b in &blobs {
            l1.set(b.id, Some(0));
        }
        let problem = build_fusion_problem(&l0, &l1, &blobs, &pool, &params).unwrap();
        assert_eq!(problem.terms.len(), 2); // one line term + one language term
        let all: BTreeSet<BlobId> = (0..4).collect();
        for t in &problem.terms {
            assert!(t.must_be_one.is_empty());
            assert_eq!(t.must_be_zero, all);
        }
        assert_eq!(problem.terms[0].cost, params.line_cost);
        assert_eq!(problem.terms[1].cost, params.language_cost);
        for &(d0, _) in &problem.unary {
            assert_eq!(d0, params.outlier_cost);
        }
    }

    #[test]
    fn binary_energy_equals_crossover_energy_exhaustively() {
        for seed in 0..12 {
            let (blobs, pool, params, mut rng) = random_instance(100 + seed, 6, 3);
            let l0 = random_labeling(&blobs, &pool, &mut rng);
            let l1 = random_labeling(&blobs, &pool, &mut rng);
            let problem = build_fusion_problem(&l0, &l1, &blobs, &pool, &params).unwrap();
            let n = blobs.len();
            for mask in 0u32..(1 << n) {
                let x: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let direct = binary_energy(&problem, &x);
                let crossed = apply_crossover(&l0, &l1, &x).unwrap();
                let reference = total_energy(&blobs, &crossed, &pool, &params).unwrap();
                assert!(
                    (direct - reference).abs() < 1e-9,
                    "seed {seed} mask {mask}: {direct} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn unaries_only_solve_is_independent_argmin() {
        let problem = BinaryFusionProblem {
            blob_ids: vec![0, 1, 2, 3],
            unary: vec![(1.0, 2.0), (5.0, 0.5), (3.0, 3.0), (0.0, 4.0)],
            terms: vec![],
            offset: 0.0,
        };
        let x = solve_fusion(&problem).unwrap();
        assert_eq!(x, vec![false, true, false, false]);
    }

    #[test]
    fn dominating_term_is_avoided() {
        // Unaries mildly prefer x = 1 for blob 0 and x = 0 for blob 1, but a
        // huge term demands the opposite pattern; the solver must obey it.
        let problem = BinaryFusionProblem {
            blob_ids: vec![0, 1, 2],
            unary: vec![(0.0, 0.4), (0.4, 0.0), (0.1, 0.0)],
            terms: vec![CostTerm {
                cost: 100.0,
                must_be_one: [1].into(),
                must_be_zero: [0].into(),
            }],
            offset: 0.0,
        };
        let x = solve_fusion(&problem).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 0u32..8 {
            let cand: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
            let e = binary_energy(&problem, &cand);
            if e < best.0 {
                best = (e, cand);
            }
        }
        assert_eq!(binary_energy(&problem, &x), best.0);
        assert!(x[1] && !x[0]);
    }

    #[test]
    fn random_raw_problems_match_exhaustive_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..80 {
            let n = rng.random_range(2..=10usize);
            let blob_ids: Vec<BlobId> = (0..n as u32).collect();
            let unary: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0))).collect();
            let n_terms = rng.random_range(0..=4);
            let terms: Vec<CostTerm> = (0..n_terms)
                .map(|_| {
                    let mut one = BTreeSet::new();
                    let mut zero = BTreeSet::new();
                    for b in 0..n as u32 {
                        match rng.random_range(0..4) {
                            0 => {
                                one.insert(b);
                            }
                            1 => {
                                zero.insert(b);
                            }
                            2 if rng.random_bool(0.1) => {
                                // occasionally overlap to exercise
                                // unavoidable terms
                                one.insert(b);
                                zero.insert(b);
                            }
                            _ => {}
                        }
                    }
                    CostTerm {
                        cost: rng.random_range(0.0..30.0),
                        must_be_one: one,
                        must_be_zero: zero,
                    }
                })
                .collect();
            let problem = BinaryFusionProblem { blob_ids, unary, terms, offset: 0.0 };
            let x = solve_fusion(&problem).unwrap();
            let got = binary_energy(&problem, &x);
            let mut want = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                let cand: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                want = want.min(binary_energy(&problem, &cand));
            }
            assert!((got - want).abs() < 1e-9, "case {case}: solver {got} vs exhaustive {want}");
        }
    }

    #[test]
    fn crossover_selects_componentwise() {
        let mut l0 = Labeling::new();
        let mut l1 = Labeling::new();
        for id in 0..4 {
            l0.set(id, Some(0));
            l1.set(id, if id % 2 == 0 { None } else { Some(1) });
        }
        let n = 4;
        assert_eq!(apply_crossover(&l0, &l1, &vec![false; n]).unwrap(), l0);
        assert_eq!(apply_crossover(&l0, &l1, &vec![true; n]).unwrap(), l1);
        let x = vec![true, false, true, false];
        let mixed = apply_crossover(&l0, &l1, &x).unwrap();
        assert_eq!(mixed.get(0), Some(None));
        assert_eq!(mixed.get(1), Some(Some(0)));
        assert_eq!(mixed.get(2), Some(None));
        assert_eq!(mixed.get(3), Some(Some(0)));
        assert!(apply_crossover(&l0, &l1, &[false; 3]).is_err());
    }

    #[test]
    fn fusion_never_increases_energy() {
        for seed in 0..25 {
            let (blobs, pool, params, mut rng) = random_instance(300 + seed, 9, 4);
            let l0 = random_labeling(&blobs, &pool, &mut rng);
            let l1 = random_labeling(&blobs, &pool, &mut rng);
            let fused = fuse(&l0, &l1, &blobs, &pool, &params).unwrap();
            let e0 = total_energy(&blobs, &l0, &pool, &params).unwrap();
            let e1 = total_energy(&blobs, &l1, &pool, &params).unwrap();
            let ef = total_energy(&blobs, &fused, &pool, &params).unwrap();
            assert!(ef <= e0.min(e1) + 1e-9, "seed {seed}: fused {ef} vs min({e0}, {e1})");
        }
    }

    #[test]
    fn single_model_pool_assign_is_its_proposal() {
        let (blobs, pool, params, _) = random_instance(9, 6, 1);
        let l = assign_models(&pool, &blobs, &params).unwrap();
        assert_eq!(l, make_labeling(&pool.models[0], &blobs, &params));
    }

    #[test]
    fn empty_pool_assign_is_all_outlier() {
        let (blobs, _, params, _) = random_instance(10, 5, 1);
        let l = assign_models(&ModelPool::new(), &blobs, &params).unwrap();
        assert_eq!(l, Labeling::all_outlier(&blobs));
    }

    #[test]
    fn duplicated_model_does_not_change_the_energy() {
        let (blobs, pool, params, _) = random_instance(11, 7, 2);
        let mut doubled = pool.clone();
        for m in pool.iter() {
            let mut copy = m.clone();
            copy.id = doubled.next_id();
            doubled.push(copy).unwrap();
        }
        let e_once =
            total_energy(&blobs, &assign_models(&pool, &blobs, &params).unwrap(), &pool, &params)
                .unwrap();
        let e_twice = total_energy(
            &blobs,
            &assign_models(&doubled, &blobs, &params).unwrap(),
            &doubled,
            &params,
        )
        .unwrap();
        assert!(e_twice <= e_once + 1e-9);
    }

    #[test]
    fn sweep_beats_every_single_model_labeling() {
        for seed in 0..10 {
            let (blobs, pool, params, _) = random_instance(500 + seed, 8, 3);
            let swept = assign_models(&pool, &blobs, &params).unwrap();
            let e_swept = total_energy(&blobs, &swept, &pool, &params).unwrap();
            for m in pool.iter() {
                let single = make_labeling(m, &blobs, &params);
                let e_single = total_energy(&blobs, &single, &pool, &params).unwrap();
                assert!(e_swept <= e_single + 1e-9, "seed {seed} model {}", m.id);
            }
            let outliers = Labeling::all_outlier(&blobs);
            let e_out = total_energy(&blobs, &outliers, &pool, &params).unwrap();
            // The sweep cannot beat all-outlier unless some proposal does,
            // but it must never lose to the seed of its own fold.
            let seeded = assign_models_from(&outliers, &pool, &blobs, &params).unwrap();
            let e_seeded = total_energy(&blobs, &seeded, &pool, &params).unwrap();
            assert!(e_seeded <= e_out + 1e-9);
        }
    }

    #[test]
    fn debug_artifacts_have_expected_shape() {
        let (blobs, pool, params, mut rng) = random_instance(33, 5, 2);
        let l0 = random_labeling(&blobs, &pool, &mut rng);
        let l1 = random_labeling(&blobs, &pool, &mut rng);
        let problem = build_fusion_problem(&l0, &l1, &blobs, &pool, &params).unwrap();
        let json = problem.to_json();
        assert!(json.contains("blob_ids") && json.contains("unary"));
        let dimacs = problem.base_network().to_dimacs();
        assert!(dimacs.starts_with("p max "));
    }
}
