//! Crisp K-Means: Lloyd iteration from k-means++ seeds, best of several
//! independently seeded restarts.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::par;

/// Lloyd stops once no centroid moves further than this.
pub const CENTROID_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KMeansConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { seed: 0, restarts: 25, max_iters: 300 }
    }
}

/// A crisp partition of the points into `k` nonempty clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Cluster id in `0..k` for every point.
    pub assignments: Vec<usize>,
    /// `k` by `d`.
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub objective_j: f64,
    pub k: usize,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl Partition {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Indices of the points in cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &a)| a == c).map(|(i, _)| i).collect()
    }

    /// The crisp membership matrix: `u[c][i] = 1` iff point `i` is in cluster `c`.
    pub fn membership_matrix(&self) -> Matrix {
        let mut u = Matrix::zeros(self.k, self.assignments.len());
        for (i, &c) in self.assignments.iter().enumerate() {
            u[(c, i)] = 1.0;
        }
        u
    }
}

/// `Σᵢ ‖xᵢ - centroid(assign(i))‖²`.
pub fn objective(points: &Matrix, assignments: &[usize], centroids: &Matrix) -> f64 {
    points.iter_rows().zip(assignments).map(|(p, &c)| sq_dist(p, centroids.row(c))).sum()
}

/// Mean of the points in each cluster. Empty clusters get a zero row.
pub fn cluster_means(points: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter_rows().zip(assignments) {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(p) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydStep {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub objective_j: f64,
}

/// One Lloyd iteration: nearest-centroid assignment, repair of empty
/// clusters, then centroid update. `objective_j` is measured against the
/// updated centroids.
///
/// An empty cluster takes the point farthest from its current centroid,
/// chosen among clusters that keep at least one other point.
pub fn lloyd_step(points: &Matrix, centroids: &Matrix) -> LloydStep {
    let k = centroids.rows();
    let mut assignments = Vec::with_capacity(points.rows());
    let mut dist = Vec::with_capacity(points.rows());
    let mut counts = vec![0usize; k];
    for p in points.iter_rows() {
        let (best, d) = nearest(p, centroids);
        assignments.push(best);
        dist.push(d);
        counts[best] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..points.rows())
            .filter(|&i| counts[assignments[i]] >= 2)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = donor {
            counts[assignments[i]] -= 1;
            assignments[i] = c;
            counts[c] = 1;
            dist[i] = 0.0;
        }
    }
    let centroids = cluster_means(points, &assignments, k);
    let objective_j = objective(points, &assignments, &centroids);
    LloydStep { assignments, centroids, objective_j }
}

fn nearest(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(p, row);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

/// k-means++ seeding: each further seed is a point drawn with probability
/// proportional to its squared distance from the nearest seed so far.
pub fn kmeans_plus_plus<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, points.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just past the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, p) in points.iter_rows().enumerate() {
            let d = sq_dist(p, points.row(pick));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Seed for restart `r`, decorrelated from `seed` with a SplitMix64 round.
pub fn restart_seed(seed: u64, r: u64) -> u64 {
    let mut z = seed ^ r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn count_distinct_points(points: &Matrix) -> usize {
    let key = |v: f64| if v == 0.0 { 0u64 } else { v.to_bits() };
    points.iter_rows().map(|p| p.iter().map(|&v| key(v)).collect::<Vec<_>>()).collect::<HashSet<_>>().len()
}

/// Run Lloyd from a single k-means++ seeding until the assignments stop
/// changing, the centroids stop moving, or `max_iters` is reached.
pub fn lloyd(points: &Matrix, k: usize, seed: u64, max_iters: usize) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut objective_j = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        let step = lloyd_step(points, &centroids);
        iterations += 1;
        let movement = centroids
            .iter_rows()
            .zip(step.centroids.iter_rows())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        let unchanged = step.assignments == assignments;
        centroids = step.centroids;
        assignments = step.assignments;
        objective_j = step.objective_j;
        if unchanged || movement < CENTROID_TOL {
            break;
        }
    }
    Partition { assignments, centroids, objective_j, k, iterations, restarts_used: 1 }
}

/// Best of `cfg.restarts` Lloyd runs by objective; ties go to the lower
/// restart index, so the result does not depend on scheduling.
pub fn kmeans(points: &Matrix, k: usize, cfg: &KMeansConfig) -> Result<Partition> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: pos / points.cols().max(1), col: pos % points.cols().max(1) });
    }
    let distinct = count_distinct_points(points);
    if k > distinct {
        return Err(Error::DegeneratePoints { k, distinct });
    }
    let runs = par::map_indexed(cfg.restarts, |r| lloyd(points, k, restart_seed(cfg.seed, r as u64), cfg.max_iters));
    let mut best = runs
        .into_iter()
        .reduce(|best, run| if run.objective_j < best.objective_j { run } else { best })
        .expect("restarts >= 1");
    best.restarts_used = cfg.restarts;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_pairs_on_a_line() {
        let p = pts(&[&[0.0], &[1.0], &[10.0], &[11.0]]);
        let part = kmeans(&p, 2, &KMeansConfig::default()).unwrap();
        assert_eq!(part.assignments[0], part.assignments[1]);
        assert_eq!(part.assignments[2], part.assignments[3]);
        assert_ne!(part.assignments[0], part.assignments[2]);
        let mut c: Vec<f64> = part.centroids.column(0);
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 10.5]);
        assert!((part.objective_j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let p = pts(&[&[1.0, 2.0], &[3.0, -1.0], &[-2.0, 0.5], &[0.0, 4.0]]);
        let part = kmeans(&p, 1, &KMeansConfig::default()).unwrap();
        assert!((part.centroids[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((part.centroids[(0, 1)] - 1.375).abs() < 1e-12);
        let tss: f64 = p.iter_rows().map(|r| sq_dist(r, &[0.5, 1.375])).sum();
        assert!((part.objective_j - tss).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 3.0], &[5.0, 5.0]]);
        let part = kmeans(&p, 4, &KMeansConfig::default()).unwrap();
        assert_eq!(part.objective_j, 0.0);
        assert_eq!(part.cluster_sizes(), vec![1; 4]);
    }

    #[test]
    fn errors() {
        let p = pts(&[&[0.0], &[0.0], &[1.0]]);
        assert!(matches!(kmeans(&p, 4, &KMeansConfig::default()), Err(Error::TooManyClusters { k: 4, n: 3 })));
        assert!(matches!(
            kmeans(&p, 3, &KMeansConfig::default()),
            Err(Error::DegeneratePoints { k: 3, distinct: 2 })
        ));
    }

    #[test]
    fn fixed_point_is_stable() {
        let p = pts(&[&[0.0], &[1.0], &[10.0], &[11.0]]);
        let c = pts(&[&[0.5], &[10.5]]);
        let step = lloyd_step(&p, &c);
        assert_eq!(step.assignments, vec![0, 0, 1, 1]);
        assert_eq!(step.centroids, c);
        assert_eq!(step.objective_j, 1.0);
    }

    #[test]
    fn empty_cluster_is_reseeded_at_farthest_point() {
        // the third centroid attracts nothing
        let p = pts(&[&[0.0, 0.0], &[0.0, 1.0], &[4.0, 0.0]]);
        let c = pts(&[&[0.0, 0.4], &[4.0, 0.0], &[100.0, 100.0]]);
        let before = objective(&p, &[0, 0, 1], &c);
        let step = lloyd_step(&p, &c);
        // (0,1) is the farthest point in a cluster with two members
        assert_eq!(step.assignments, vec![0, 2, 1]);
        assert_eq!(step.cluster_sizes_for_test(), vec![1, 1, 1]);
        assert!(step.objective_j <= before);
        assert_eq!(step.objective_j, 0.0);
    }

    impl LloydStep {
        fn cluster_sizes_for_test(&self) -> Vec<usize> {
            let mut s = vec![0; self.centroids.rows()];
            self.assignments.iter().for_each(|&a| s[a] += 1);
            s
        }
    }

    #[test]
    fn restart_seeds_differ() {
        let seeds: HashSet<u64> = (0..100).map(|r| restart_seed(42, r)).collect();
        assert_eq!(seeds.len(), 100);
    }

    #[test]
    fn membership_matrix_is_crisp() {
        let p = pts(&[&[0.0], &[1.0], &[10.0], &[11.0]]);
        let part = kmeans(&p, 2, &KMeansConfig::default()).unwrap();
        let u = part.membership_matrix();
        for i in 0..4 {
            assert_eq!(u.column(i).iter().sum::<f64>(), 1.0);
        }
    }
}
