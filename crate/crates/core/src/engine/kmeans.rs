//! Spherical k-means: cosine distance `1 − ⟨x, c⟩` on the unit sphere,
//! k-means++ seeding and Lloyd iterations with centroid re-normalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{dot, EngineError};

/// Unit-normalizes `v` in double precision; `None` for a zero vector.
pub fn normalize(v: &[f32]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|&x| f64::from(x) / norm).collect())
}

fn normalize_f64(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// Unit-norm centroids, `k` of them.
    pub centroids: Vec<Vec<f64>>,
    /// Objective after every Lloyd update.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when some cluster stayed empty because there were fewer distinct
    /// points than `k`.
    pub degenerate: bool,
}

impl KMeansResult {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

struct Flat<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Flat<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }
}

fn nearest(x: &[f64], centroids: &Flat<'_>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for c in 0..centroids.len() {
        let s = dot(x, centroids.row(c));
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

fn assign(points: &Flat<'_>, centroids: &Flat<'_>) -> Vec<(usize, f64)> {
    (0..points.len())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| nearest(points.row(i), centroids))
        .collect()
}

fn seed_plus_plus(points: &Flat<'_>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, bool) {
    let n = points.len();
    let dim = points.dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(points.row(first));
    let mut min_d: Vec<f64> = (0..n)
        .map(|i| (1.0 - dot(points.row(i), points.row(first))).max(0.0))
        .collect();
    let mut degenerate = false;
    for _ in 1..k {
        let total: f64 = min_d.iter().map(|d| d * d).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in min_d.iter().enumerate() {
                target -= d * d;
                if target < 0.0 && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // rounding can run past the end; fall back to the last positive weight
            if min_d[chosen] == 0.0 {
                chosen = min_d.iter().rposition(|&d| d > 0.0).unwrap();
            }
            chosen
        } else {
            degenerate = true;
            rng.random_range(0..n)
        };
        let row = points.row(pick).to_vec();
        for (i, d) in min_d.iter_mut().enumerate() {
            *d = d.min((1.0 - dot(points.row(i), &row)).max(0.0));
        }
        centroids.extend_from_slice(&row);
    }
    (centroids, degenerate)
}

/// Clusters `points` (normalized internally) into `k` groups.
///
/// Zero vectors are rejected. When `k` exceeds the number of distinct points
/// the surplus clusters stay empty and `degenerate` is set.
pub fn spherical_kmeans<P: AsRef<[f32]>>(
    points: &[P],
    k: usize,
    rng_seed: u64,
    max_iters: usize,
) -> Result<KMeansResult, EngineError> {
    if points.is_empty() || k == 0 {
        return Err(EngineError::InvalidK {
            points: points.len(),
            k,
        });
    }
    let dim = points[0].as_ref().len();
    let mut flat = Vec::with_capacity(points.len() * dim);
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(EngineError::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        flat.extend(normalize(p).ok_or(EngineError::ZeroVector { index })?);
    }
    Ok(kmeans_unit(&flat, dim, k, rng_seed, max_iters))
}

/// Same as [`spherical_kmeans`] on rows that are already unit norm, stored
/// contiguously.
pub(crate) fn kmeans_unit(
    data: &[f64],
    dim: usize,
    k: usize,
    rng_seed: u64,
    max_iters: usize,
) -> KMeansResult {
    let points = Flat { data, dim };
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (mut centroids, mut degenerate) = seed_plus_plus(&points, k, &mut rng);
    let mut assigned = assign(&points, &Flat { data: &centroids, dim });
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;

        // revive empty clusters with the worst-fit point of a shared cluster
        let mut sizes = vec![0usize; k];
        assigned.iter().for_each(|&(c, _)| sizes[c] += 1);
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| sizes[assigned[i].0] > 1)
                .min_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(a.cmp(&b)));
            match donor {
                Some(i) => {
                    sizes[assigned[i].0] -= 1;
                    sizes[empty] = 1;
                    assigned[i] = (empty, 1.0);
                    centroids[empty * dim..(empty + 1) * dim].copy_from_slice(points.row(i));
                }
                None => degenerate = true,
            }
        }

        // update: normalized member sums
        let mut sums = vec![0.0; k * dim];
        for (i, &(c, _)) in assigned.iter().enumerate() {
            let row = points.row(i);
            sums[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(row)
                .for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            let s = &mut sums[c * dim..(c + 1) * dim];
            if sizes[c] > 0 && normalize_f64(s) {
                centroids[c * dim..(c + 1) * dim].copy_from_slice(s);
            }
        }
        let cflat = Flat { data: &centroids, dim };
        let objective: f64 = assigned
            .iter()
            .enumerate()
            .map(|(i, &(c, _))| 1.0 - dot(points.row(i), cflat.row(c)))
            .sum();
        if let Some(&prev) = history.last() {
            debug_assert!(
                objective <= prev + 1e-9 * n as f64,
                "k-means objective rose from {prev} to {objective}"
            );
        }
        history.push(objective);

        let next = assign(&points, &cflat);
        let changed = next.iter().zip(&assigned).any(|(a, b)| a.0 != b.0);
        assigned = next;
        if !changed {
            converged = true;
            break;
        }
    }

    KMeansResult {
        assignments: assigned.into_iter().map(|(c, _)| c).collect(),
        centroids: centroids.chunks_exact(dim).map(<[f64]>::to_vec).collect(),
        objective_history: history,
        iterations,
        converged,
        degenerate,
    }
}

/// Tightness and objectness summary of one non-empty cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub cluster: usize,
    pub centroid: Vec<f64>,
    pub members: Vec<usize>,
    pub avg_cos_similarity_to_centroid: f64,
    pub avg_objectness: f64,
}

/// Summaries for every non-empty cluster, in cluster order. `points` must be
/// the unit rows the clustering ran on.
pub fn cluster_reports(
    points: &[Vec<f64>],
    objectness: &[f64],
    result: &KMeansResult,
) -> Vec<ClusterReport> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); result.centroids.len()];
    for (i, &c) in result.assignments.iter().enumerate() {
        members[c].push(i);
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(cluster, members)| {
            let centroid = result.centroids[cluster].clone();
            let n = members.len() as f64;
            let sim = members.iter().map(|&i| dot(&points[i], &centroid)).sum::<f64>() / n;
            let obj = members.iter().map(|&i| objectness[i]).sum::<f64>() / n;
            ClusterReport {
                cluster,
                centroid,
                members,
                avg_cos_similarity_to_centroid: sim,
                avg_objectness: obj,
            }
        })
        .collect()
}
