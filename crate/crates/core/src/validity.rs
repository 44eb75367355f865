//! Davies-Bouldin validity index and the DB-minimizing sweep over K.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kmeans::{count_distinct_points, kmeans, KMeansConfig, Partition};
use crate::matrix::Matrix;
use crate::par;

/// Exponents of the Davies-Bouldin index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DbParams {
    /// Dispersion exponent; 2 gives the RMS distance to the centroid.
    pub q: u32,
    /// Minkowski order of the centroid distance; 2 is Euclidean.
    pub p: u32,
}

impl Default for DbParams {
    fn default() -> Self {
        Self { q: 2, p: 2 }
    }
}

impl DbParams {
    pub fn new(q: u32, p: u32) -> Result<Self> {
        if q == 0 || p == 0 {
            return Err(Error::InvalidConfig(format!("DB exponents must be >= 1, got q={q}, p={p}")));
        }
        Ok(Self { q, p })
    }
}

/// `S_i = ((1/T_i) Σ ‖x - a_i‖^q)^(1/q)` with Euclidean `‖·‖`.
pub fn cluster_dispersion<'a, I>(points: I, centroid: &[f64], q: u32) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in points {
        if p.len() != centroid.len() {
            return Err(Error::DimensionMismatch(p.len(), centroid.len()));
        }
        let d = p.iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        sum += d.powi(q as i32);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyCluster(0));
    }
    Ok((sum / n as f64).powf(1.0 / q as f64))
}

/// Minkowski-`p` distance between two centroids.
pub fn centroid_distance(a: &[f64], b: &[f64], p: u32) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs().powi(p as i32)).sum();
    Ok(s.powf(1.0 / p as f64))
}

/// Davies-Bouldin index: the mean over clusters of the worst
/// `(S_i + S_j) / M_ij`. Lower is better.
pub fn davies_bouldin(partition: &Partition, points: &Matrix, params: DbParams) -> Result<f64> {
    let k = partition.k;
    if k < 2 {
        return Err(Error::FewerThanTwoClusters(k));
    }
    if partition.assignments.len() != points.rows() {
        return Err(Error::DimensionMismatch(partition.assignments.len(), points.rows()));
    }
    let mut dispersion = Vec::with_capacity(k);
    for c in 0..k {
        let members = partition.members(c);
        let s = cluster_dispersion(members.iter().map(|&i| points.row(i)), partition.centroids.row(c), params.q)
            .map_err(|e| match e {
                Error::EmptyCluster(_) => Error::EmptyCluster(c),
                other => other,
            })?;
        dispersion.push(s);
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0_f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = centroid_distance(partition.centroids.row(i), partition.centroids.row(j), params.p)?;
            if m == 0.0 {
                return Err(Error::CoincidentCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((dispersion[i] + dispersion[j]) / m);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub k_values: Vec<usize>,
    pub db_scores: Vec<f64>,
    pub optimal_k: usize,
    pub partitions: Vec<Partition>,
}

impl SweepResult {
    pub fn optimal_partition(&self) -> &Partition {
        let idx = self.k_values.iter().position(|&k| k == self.optimal_k).expect("optimal k evaluated");
        &self.partitions[idx]
    }

    pub fn partition_for(&self, k: usize) -> Option<&Partition> {
        self.k_values.iter().position(|&v| v == k).map(|i| &self.partitions[i])
    }
}

/// Cluster for every K in `k_min..=k_max` and keep the K with the lowest
/// Davies-Bouldin index, preferring the smaller K on ties. K values above
/// the number of distinct points cannot be realized and are skipped.
pub fn sweep_optimal_k(
    points: &Matrix,
    k_min: usize,
    k_max: usize,
    kmeans_cfg: &KMeansConfig,
    params: DbParams,
) -> Result<SweepResult> {
    if k_min < 2 {
        return Err(Error::InvalidConfig(format!("k_min must be >= 2, got {k_min}")));
    }
    if k_max < k_min {
        return Err(Error::InvalidConfig(format!("k_max {k_max} < k_min {k_min}")));
    }
    if k_max + 1 > points.rows() {
        return Err(Error::InvalidConfig(format!("k_max {k_max} must be at most T - 1 = {}", points.rows() - 1)));
    }
    let distinct = count_distinct_points(points);
    if distinct < k_min {
        return Err(Error::DegeneratePoints { k: k_min, distinct });
    }
    let ks: Vec<usize> = (k_min..=k_max.min(distinct)).collect();
    let evaluated = par::map_slice(&ks, |&k| -> Result<(Partition, f64)> {
        let part = kmeans(points, k, kmeans_cfg)?;
        let db = davies_bouldin(&part, points, params)?;
        Ok((part, db))
    });
    let mut partitions = Vec::with_capacity(ks.len());
    let mut db_scores = Vec::with_capacity(ks.len());
    for r in evaluated {
        let (p, db) = r?;
        partitions.push(p);
        db_scores.push(db);
    }
    let mut best = 0;
    for (i, &s) in db_scores.iter().enumerate() {
        if s < db_scores[best] {
            best = i;
        }
    }
    Ok(SweepResult { optimal_k: ks[best], k_values: ks, db_scores, partitions })
}
