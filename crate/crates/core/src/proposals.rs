//! Initial model-pool generation: a Delaunay neighbor graph over blob
//! centers, one candidate line model per neighboring pair, and the
//! single-model-vs-outlier labelings used as fusion proposals.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::energy::{data_term_for_model, ModelPool};
use crate::types::{
    BlobId, EnergyParams, Labeling, Language, Line, LineModel, ModelId, TextCandidate,
};
use crate::{Error, Result};

/// Undirected neighbor graph over blob centers. Edges are stored with the
/// smaller id first and sorted, so the graph is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    pub edges: Vec<(BlobId, BlobId)>,
}

impl NeighborGraph {
    pub fn neighbors(&self, id: BlobId) -> Vec<BlobId> {
        let mut out: Vec<BlobId> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// True when the given vertex set is connected under the edge set.
    pub fn is_connected(&self, vertices: &[BlobId]) -> bool {
        if vertices.len() <= 1 {
            return true;
        }
        let mut adj: BTreeMap<BlobId, Vec<BlobId>> = BTreeMap::new();
        for &(a, b) in &self.edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![vertices[0]];
        seen.insert(vertices[0]);
        while let Some(v) = stack.pop() {
            for &w in adj.get(&v).into_iter().flatten() {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        vertices.iter().all(|v| seen.contains(v))
    }
}

/// Signed double area of the triangle `(a, b, c)`; positive when
/// counter-clockwise in a y-up frame.
fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Strictly-inside-circumcircle predicate for the triangle `(a, b, c)`
/// (any orientation) and query point `p`.
fn in_circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> bool {
    let (ax, ay) = (a.0 - p.0, a.1 - p.1);
    let (bx, by) = (b.0 - p.0, b.1 - p.1);
    let (cx, cy) = (c.0 - p.0, c.1 - p.1);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    det * orient(a, b, c).signum() > 0.0
}

/// Bowyer-Watson Delaunay triangulation; returns edges as index pairs into
/// `pts`. Assumes at least 3 points, not all collinear, all distinct.
fn delaunay_edges(pts: &[(f64, f64)]) -> BTreeSet<(usize, usize)> {
    let n = pts.len();
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1.0);
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    // Super-triangle vertices, stored after the real points.
    let mut all: Vec<(f64, f64)> = pts.to_vec();
    all.push((cx - 20.0 * span, cy - 10.0 * span));
    all.push((cx + 20.0 * span, cy - 10.0 * span));
    all.push((cx, cy + 20.0 * span));

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for p in 0..n {
        let pt = all[p];
        let mut bad = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            if in_circumcircle(all[tri[0]], all[tri[1]], all[tri[2]], pt) {
                bad.push(t);
            }
        }
        // Boundary of the cavity: edges belonging to exactly one bad triangle.
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &t in &bad {
            let tri = tris[t];
            for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = (u.min(v), u.max(v));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for (&(u, v), &count) in &edge_count {
            if count == 1 {
                tris.push([u, v, p]);
            }
        }
    }

    let mut edges = BTreeSet::new();
    for tri in &tris {
        if tri.iter().any(|&v| v >= n) {
            continue;
        }
        for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    edges
}

/// Build the neighbor graph of blob centers by Delaunay triangulation.
///
/// Degenerate inputs are handled deterministically: collinear centers
/// produce a path graph in `(x, y)` order, and blobs sharing an exact center
/// are chained onto one representative.
pub fn delaunay_neighbors(blobs: &[TextCandidate]) -> Result<NeighborGraph> {
    if blobs.len() < 2 {
        return Err(Error::TooFewBlobs);
    }
    // Group blobs by exact center; triangulate unique centers.
    let mut groups: BTreeMap<(u64, u64), Vec<BlobId>> = BTreeMap::new();
    let mut centers: BTreeMap<BlobId, (f64, f64)> = BTreeMap::new();
    for b in blobs {
        let c = b.bbox.center();
        centers.insert(b.id, (c.x, c.y));
        groups.entry((c.x.to_bits(), c.y.to_bits())).or_default().push(b.id);
    }
    let mut edge_set: BTreeSet<(BlobId, BlobId)> = BTreeSet::new();
    let mut reps: Vec<BlobId> = Vec::new();
    for members in groups.values() {
        let mut sorted = members.clone();
        sorted.sort_unstable();
        reps.push(sorted[0]);
        for w in sorted.windows(2) {
            edge_set.insert((w[0], w[1]));
        }
    }
    reps.sort_unstable();
    let pts: Vec<(f64, f64)> = reps.iter().map(|id| centers[id]).collect();

    if reps.len() == 1 {
        // All blobs share one center; the chain above already connects them.
        return Ok(NeighborGraph { edges: edge_set.into_iter().collect() });
    }

    let scale = pts.iter().map(|&(x, y)| x.abs().max(y.abs())).fold(1.0f64, f64::max);
    let collinear = reps.len() == 2
        || pts
            .iter()
            .all(|&p| orient(pts[0], pts[1], p).abs() <= 1e-9 * scale * scale)
        // orient(pts[0], pts[1], ..) is meaningless if the first two
        // coincide; they never do after center dedup.
        ;
    if collinear {
        // Path graph in (x, y) order of the representatives.
        let mut order: Vec<BlobId> = reps.clone();
        order.sort_by(|a, b| {
            let (ax, ay) = centers[a];
            let (bx, by) = centers[b];
            (ax, ay).partial_cmp(&(bx, by)).unwrap()
        });
        for w in order.windows(2) {
            edge_set.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
    } else {
        for (i, j) in delaunay_edges(&pts) {
            let (a, b) = (reps[i], reps[j]);
            edge_set.insert((a.min(b), a.max(b)));
        }
    }
    Ok(NeighborGraph { edges: edge_set.into_iter().collect() })
}

/// Propose a line model from a blob pair: the mean line through the two
/// top-edge midpoints, the base line through the bottom-edge midpoints, and
/// the language maximizing the product of the pair's likelihoods (ties go to
/// the earlier language in category order). Returns `None` for vertical pairs
/// (coincident x-centers) and pairs whose lines exceed the slope cap.
pub fn model_from_pair(
    id: ModelId,
    b1: &TextCandidate,
    b2: &TextCandidate,
    params: &EnergyParams,
) -> Option<LineModel> {
    let (c1, c2) = (b1.bbox.center(), b2.bbox.center());
    let mean_line = Line::through(
        crate::types::Point2D::new(c1.x, b1.bbox.top),
        crate::types::Point2D::new(c2.x, b2.bbox.top),
    )?;
    let base_line = Line::through(
        crate::types::Point2D::new(c1.x, b1.bbox.bottom),
        crate::types::Point2D::new(c2.x, b2.bbox.bottom),
    )?;
    if mean_line.slope.abs() > params.slope_max || base_line.slope.abs() > params.slope_max {
        return None;
    }
    let mut language = Language::English;
    let mut best = f64::NEG_INFINITY;
    for lang in Language::ALL {
        let idx = lang.index();
        let score = b1.likelihoods[idx] * b2.likelihoods[idx];
        if score > best {
            best = score;
            language = lang;
        }
    }
    Some(LineModel { id, language, mean_line, base_line, x_ref: (c1.x + c2.x) / 2.0 })
}

fn lines_close(a: &Line, b: &Line) -> bool {
    (a.slope - b.slope).abs() < 1e-6 && (a.intercept - b.intercept).abs() < 1e-6
}

fn is_duplicate(pool: &ModelPool, candidate: &LineModel) -> bool {
    pool.iter().any(|m| {
        m.language == candidate.language
            && lines_close(&m.mean_line, &candidate.mean_line)
            && lines_close(&m.base_line, &candidate.base_line)
    })
}

/// Sample the initial model pool: one model per Delaunay edge (deduplicated
/// by near-identical parameters) plus `params.extra_random` random blob
/// pairs. Deterministic given the rng state; fewer than two blobs yield an
/// empty pool.
pub fn sample_initial_pool(
    blobs: &[TextCandidate],
    params: &EnergyParams,
    rng: &mut impl Rng,
) -> ModelPool {
    let mut pool = ModelPool::new();
    if blobs.len() < 2 {
        return pool;
    }
    let by_id: BTreeMap<BlobId, &TextCandidate> = blobs.iter().map(|b| (b.id, b)).collect();
    let graph = delaunay_neighbors(blobs).expect("at least two blobs");
    let mut next_id: ModelId = 0;
    let try_pair = |pool: &mut ModelPool, next_id: &mut ModelId, a: BlobId, b: BlobId| {
        if let Some(m) = model_from_pair(*next_id, by_id[&a], by_id[&b], params) {
            if !is_duplicate(pool, &m) {
                pool.push(m).expect("fresh id");
                *next_id += 1;
            }
        }
    };
    for &(a, b) in &graph.edges {
        try_pair(&mut pool, &mut next_id, a, b);
    }
    let ids: Vec<BlobId> = blobs.iter().map(|b| b.id).collect();
    for _ in 0..params.extra_random {
        let a = ids[rng.random_range(0..ids.len())];
        let b = ids[rng.random_range(0..ids.len())];
        if a != b {
            try_pair(&mut pool, &mut next_id, a, b);
        }
    }
    pool
}

/// The single-model-vs-outlier labeling used as a fusion proposal: each blob
/// independently takes the model when its data term strictly beats the
/// outlier cost, otherwise stays an outlier.
pub fn make_labeling(
    model: &LineModel,
    blobs: &[TextCandidate],
    params: &EnergyParams,
) -> Labeling {
    let mut labeling = Labeling::new();
    for blob in blobs {
        let dt = data_term_for_model(blob, model, params);
        let label = if dt < params.outlier_cost { Some(model.id) } else { None };
        labeling.set(blob.id, label);
    }
    labeling
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BlobBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blob_at(id: BlobId, cx: f64, cy: f64, w: f64, h: f64) -> TextCandidate {
        TextCandidate::new(id, BlobBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0))
    }

    #[test]
    fn two_blobs_give_one_edge() {
        let blobs = vec![blob_at(3, 0.0, 0.0, 2.0, 2.0), blob_at(9, 10.0, 1.0, 2.0, 2.0)];
        let g = delaunay_neighbors(&blobs).unwrap();
        assert_eq!(g.edges, vec![(3, 9)]);
    }

    #[test]
    fn three_noncollinear_blobs_give_a_triangle() {
        let blobs = vec![
            blob_at(0, 0.0, 0.0, 2.0, 2.0),
            blob_at(1, 10.0, 0.0, 2.0, 2.0),
            blob_at(2, 5.0, 8.0, 2.0, 2.0),
        ];
        let g = delaunay_neighbors(&blobs).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn collinear_centers_fall_back_to_a_path() {
        let blobs = vec![
            blob_at(0, 30.0, 5.0, 2.0, 2.0),
            blob_at(1, 0.0, 5.0, 2.0, 2.0),
            blob_at(2, 10.0, 5.0, 2.0, 2.0),
            blob_at(3, 20.0, 5.0, 2.0, 2.0),
        ];
        let g = delaunay_neighbors(&blobs).unwrap();
        assert_eq!(g.edges, vec![(0, 3), (1, 2), (2, 3)]);
        assert!(g.is_connected(&[0, 1, 2, 3]));
    }

    #[test]
    fn fewer_than_two_blobs_is_an_error() {
        assert!(matches!(delaunay_neighbors(&[]), Err(Error::TooFewBlobs)));
        let one = vec![blob_at(0, 0.0, 0.0, 2.0, 2.0)];
        assert!(matches!(delaunay_neighbors(&one), Err(Error::TooFewBlobs)));
    }

    /// An edge (p, q) belongs to the Delaunay triangulation iff some circle
    /// through p and q is empty of all other points. We check the diameter
    /// circle and every circumcircle through a third point.
    fn has_empty_circle(pts: &[(f64, f64)], i: usize, j: usize) -> bool {
        let candidates_empty = |center: (f64, f64), r2: f64| {
            pts.iter().enumerate().all(|(k, &(x, y))| {
                if k == i || k == j {
                    return true;
                }
                let d2 = (x - center.0).powi(2) + (y - center.1).powi(2);
                d2 > r2 - 1e-9
            })
        };
        let (p, q) = (pts[i], pts[j]);
        let mid = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
        let r2 = (p.0 - mid.0).powi(2) + (p.1 - mid.1).powi(2);
        if candidates_empty(mid, r2) {
            return true;
        }
        for (k, &c) in pts.iter().enumerate() {
            if k == i || k == j || orient(p, q, c).abs() < 1e-12 {
                continue;
            }
            // Circumcenter of (p, q, c).
            let d = 2.0 * (p.0 * (q.1 - c.1) + q.0 * (c.1 - p.1) + c.0 * (p.1 - q.1));
            let ux = ((p.0 * p.0 + p.1 * p.1) * (q.1 - c.1)
                + (q.0 * q.0 + q.1 * q.1) * (c.1 - p.1)
                + (c.0 * c.0 + c.1 * c.1) * (p.1 - q.1))
                / d;
            let uy = ((p.0 * p.0 + p.1 * p.1) * (c.0 - q.0)
                + (q.0 * q.0 + q.1 * q.1) * (p.0 - c.0)
                + (c.0 * c.0 + c.1 * c.1) * (q.0 - p.0))
                / d;
            let r2 = (p.0 - ux).powi(2) + (p.1 - uy).powi(2);
            if candidates_empty((ux, uy), r2) {
                return true;
            }
        }
        false
    }

    #[test]
    fn random_triangulations_satisfy_the_empty_circle_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.random_range(4..=10);
            let blobs: Vec<TextCandidate> = (0..n)
                .map(|i| {
                    blob_at(i, rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 2.0, 2.0)
                })
                .collect();
            let pts: Vec<(f64, f64)> = blobs
                .iter()
                .map(|b| {
                    let c = b.bbox.center();
                    (c.x, c.y)
                })
                .collect();
            let g = delaunay_neighbors(&blobs).unwrap();
            // Every returned edge admits an empty circle.
            for &(a, b) in &g.edges {
                assert!(
                    has_empty_circle(&pts, a as usize, b as usize),
                    "edge ({a},{b}) fails the empty-circle test for {pts:?}"
                );
            }
            // Every diameter-empty (Gabriel) pair must be present.
            for i in 0..n as usize {
                for j in (i + 1)..n as usize {
                    let mid = ((pts[i].0 + pts[j].0) / 2.0, (pts[i].1 + pts[j].1) / 2.0);
                    let r2 = (pts[i].0 - mid.0).powi(2) + (pts[i].1 - mid.1).powi(2);
                    let diameter_empty = pts.iter().enumerate().all(|(k, &(x, y))| {
                        k == i || k == j || (x - mid.0).powi(2) + (y - mid.1).powi(2) > r2 + 1e-9
                    });
                    if diameter_empty {
                        assert!(
                            g.edges.contains(&(i as u32, j as u32)),
                            "Gabriel edge ({i},{j}) missing for {pts:?}"
                        );
                    }
                }
            }
            let ids: Vec<BlobId> = blobs.iter().map(|b| b.id).collect();
            assert!(g.is_connected(&ids));
        }
    }

    #[test]
    fn pair_model_from_level_blobs_is_horizontal() {
        let p = EnergyParams::default();
        let b1 = blob_at(0, 5.0, 10.0, 4.0, 8.0);
        let b2 = blob_at(1, 25.0, 10.0, 4.0, 8.0);
        let m = model_from_pair(0, &b1, &b2, &p).unwrap();
        assert_eq!(m.mean_line.slope, 0.0);
        assert_eq!(m.base_line.slope, 0.0);
        assert_eq!(m.mean_line.intercept, 6.0);
        assert_eq!(m.base_line.intercept, 14.0);
        assert_eq!(m.x_ref, 15.0);
        assert!(m.validate(p.slope_max).is_ok());
    }

    #[test]
    fn pair_model_slope_follows_the_rise() {
        let p = EnergyParams::default();
        let b1 = blob_at(0, 0.0, 10.0, 4.0, 8.0);
        let b2 = blob_at(1, 20.0, 15.0, 4.0, 8.0);
        let m = model_from_pair(0, &b1, &b2, &p).unwrap();
        assert!((m.mean_line.slope - 0.25).abs() < 1e-12);
        assert!((m.base_line.slope - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pair_language_maximizes_likelihood_product() {
        let p = EnergyParams::default();
        let mut b1 = blob_at(0, 0.0, 10.0, 4.0, 8.0);
        let mut b2 = blob_at(1, 20.0, 10.0, 4.0, 8.0);
        b1.likelihoods = [0.3, 0.6, 0.05, 0.025, 0.025];
        b2.likelihoods = [0.4, 0.5, 0.05, 0.025, 0.025];
        // Products: En 0.12, Kr 0.30 -> Korean.
        let m = model_from_pair(0, &b1, &b2, &p).unwrap();
        assert_eq!(m.language, Language::Korean);

        // Uniform likelihoods tie everywhere; earliest category order wins.
        let m2 = model_from_pair(0, &blob_at(0, 0.0, 10.0, 4.0, 8.0), &b2, &p);
        assert_eq!(m2.unwrap().language, Language::Korean);
        let m3 = model_from_pair(
            0,
            &blob_at(0, 0.0, 10.0, 4.0, 8.0),
            &blob_at(1, 20.0, 10.0, 4.0, 8.0),
            &p,
        );
        assert_eq!(m3.unwrap().language, Language::English);
    }

    #[test]
    fn vertical_and_steep_pairs_yield_no_model() {
        let p = EnergyParams::default();
        let b1 = blob_at(0, 5.0, 10.0, 4.0, 8.0);
        let stacked = blob_at(1, 5.0, 30.0, 4.0, 8.0);
        assert!(model_from_pair(0, &b1, &stacked, &p).is_none());
        let steep = blob_at(1, 6.0, 30.0, 4.0, 8.0);
        assert!(model_from_pair(0, &b1, &steep, &p).is_none());
    }

    #[test]
    fn two_blob_pool_has_one_model() {
        let p = EnergyParams::default();
        let blobs = vec![blob_at(0, 0.0, 10.0, 4.0, 8.0), blob_at(1, 20.0, 10.0, 4.0, 8.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
        let pool = sample_initial_pool(&blobs, &p, &mut rng);
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.models[0].id, 0);
    }

    #[test]
    fn identical_pair_models_are_deduplicated() {
        let p = EnergyParams::default();
        // Three identical boxes on one row: both adjacent pairs induce the
        // same mean/base lines, so the pool keeps a single model.
        let blobs = vec![
            blob_at(0, 5.0, 10.0, 4.0, 8.0),
            blob_at(1, 25.0, 10.0, 4.0, 8.0),
            blob_at(2, 45.0, 10.0, 4.0, 8.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
        let pool = sample_initial_pool(&blobs, &p, &mut rng);
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn pool_models_satisfy_model_invariants() {
        let p = EnergyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let blobs: Vec<TextCandidate> = (0..12)
            .map(|i| {
                blob_at(
                    i,
                    rng.random_range(0.0..200.0),
                    rng.random_range(0.0..100.0),
                    rng.random_range(2.0..10.0),
                    rng.random_range(2.0..10.0),
                )
            })
            .collect();
        let mut pool_rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
        let pool = sample_initial_pool(&blobs, &p, &mut pool_rng);
        for m in pool.iter() {
            assert!(m.validate(p.slope_max).is_ok(), "model {} invalid", m.id);
        }
        // Determinism: same seed, same pool.
        let mut pool_rng2 = ChaCha8Rng::seed_from_u64(p.rng_seed);
        let pool2 = sample_initial_pool(&blobs, &p, &mut pool_rng2);
        assert_eq!(pool, pool2);
    }

    #[test]
    fn extra_random_pairs_extend_the_pool() {
        let mut p = EnergyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blobs: Vec<TextCandidate> = (0..8)
            .map(|i| {
                blob_at(
                    i,
                    rng.random_range(0.0..200.0),
                    rng.random_range(0.0..30.0),
                    4.0,
                    rng.random_range(4.0..9.0),
                )
            })
            .collect();
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let base = sample_initial_pool(&blobs, &p, &mut r1);
        p.extra_random = 50;
        let mut r2 = ChaCha8Rng::seed_from_u64(0);
        let extended = sample_initial_pool(&blobs, &p, &mut r2);
        assert!(extended.len() >= base.len());
    }

    #[test]
    fn far_model_labels_everything_outlier() {
        let p = EnergyParams::default();
        let blobs = vec![blob_at(0, 0.0, 10.0, 4.0, 8.0), blob_at(1, 20.0, 10.0, 4.0, 8.0)];
        let far = LineModel {
            id: 5,
            language: Language::Korean,
            mean_line: Line::new(0.0, 500.0),
            base_line: Line::new(0.0, 520.0),
            x_ref: 10.0,
        };
        let l = make_labeling(&far, &blobs, &p);
        assert_eq!(l.get(0), Some(None));
        assert_eq!(l.get(1), Some(None));
    }

    #[test]
    fn perfect_blob_is_assigned() {
        let p = EnergyParams::default();
        let mut b = blob_at(0, 10.0, 10.0, 6.0, 8.0);
        b.likelihoods = [0.9, 0.025, 0.025, 0.025, 0.025];
        let m = LineModel {
            id: 2,
            language: Language::English,
            mean_line: Line::new(0.0, 6.0),
            base_line: Line::new(0.0, 14.0),
            x_ref: 10.0,
        };
        let l = make_labeling(&m, &[b], &p);
        assert_eq!(l.get(0), Some(Some(2)));
    }

    #[test]
    fn labeling_matches_per_blob_comparison_oracle() {
        let p = EnergyParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let blobs: Vec<TextCandidate> = (0..5)
            .map(|i| {
                let mut b =
                    blob_at(i, rng.random_range(0.0..60.0), rng.random_range(0.0..40.0), 6.0, 8.0);
                let mut raw = [0.0; 5];
                for r in raw.iter_mut() {
                    *r = rng.random_range(0.01..1.0);
                }
                b.likelihoods =
                    crate::types::normalize_likelihoods(raw, p.likelihood_floor).unwrap();
                b
            })
            .collect();
        let m = LineModel {
            id: 0,
            language: Language::Chinese,
            mean_line: Line::new(0.02, 8.0),
            base_line: Line::new(0.0, 17.0),
            x_ref: 30.0,
        };
        let l = make_labeling(&m, &blobs, &p);
        for b in &blobs {
            let dt = data_term_for_model(b, &m, &p);
            let want = if dt < p.outlier_cost { Some(m.id) } else { None };
            assert_eq!(l.get(b.id), Some(want), "blob {}", b.id);
        }
    }
}
