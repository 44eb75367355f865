//! Synthetic data with known cluster structure.
//!
//! Columns (time points) are drawn from `k` Gaussian blobs whose centres form
//! a regular simplex in a `k - 1` dimensional latent space, embedded into the
//! variable space by a random orthogonal map. The fMRI-like variant adds a
//! slow shared drift and AR(1) noise on every row.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{dot, DataMatrix, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Variables by samples.
    pub matrix: DataMatrix,
    /// Ground-truth blob of every sample.
    pub labels: Vec<usize>,
}

/// Latent blob parameters shared by both generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub n_vars: usize,
    pub n_samples: usize,
    pub true_k: usize,
    /// Pairwise blob-centre distance in units of `noise_sd`.
    pub separation: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.true_k == 0 {
            return bad("true_k must be >= 1".into());
        }
        if self.n_samples < self.true_k || self.n_samples < 2 {
            return bad(format!("n_samples {} must be >= max(true_k, 2)", self.n_samples));
        }
        if self.n_vars < self.true_k || self.n_vars < 2 {
            return bad(format!("n_vars {} must be >= max(true_k, 2)", self.n_vars));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return bad(format!("separation {} must be finite and >= 0", self.separation));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd {} must be finite and > 0", self.noise_sd));
        }
        Ok(())
    }
}

/// Orthonormal columns from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    assert!(cols <= rows);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut q = Matrix::zeros(rows, cols);
    for (j, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            q[(i, j)] = x;
        }
    }
    q
}

/// Blob centres in the variable space (`k` by `n_vars`) and the balanced,
/// shuffled labels of every sample.
fn blob_signal(spec: &BlobSpec, rng: &mut ChaCha8Rng) -> (Matrix, Vec<usize>) {
    let k = spec.true_k;
    let edge = spec.separation * spec.noise_sd;
    // scaled, centred standard basis of R^k: a regular simplex with edge length `edge`
    let scale = edge / std::f64::consts::SQRT_2;
    let q = random_orthonormal(spec.n_vars, k, rng);
    let mut centres = Matrix::zeros(k, spec.n_vars);
    for c in 0..k {
        for i in 0..spec.n_vars {
            let mut x = 0.0;
            for j in 0..k {
                let vertex = if j == c { 1.0 } else { 0.0 } - 1.0 / k as f64;
                x += q[(i, j)] * scale * vertex;
            }
            centres[(c, i)] = x;
        }
    }
    let mut labels: Vec<usize> = (0..spec.n_samples).map(|t| t % k).collect();
    labels.shuffle(rng);
    (centres, labels)
}

/// Gaussian blobs plus isotropic noise of standard deviation `noise_sd`.
pub fn generate_synthetic(
    n_vars: usize,
    n_samples: usize,
    true_k: usize,
    separation: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticData> {
    generate_blobs(&BlobSpec { n_vars, n_samples, true_k, separation, noise_sd, seed })
}

pub fn generate_blobs(spec: &BlobSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (centres, labels) = blob_signal(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sd).expect("validated");
    let mut m = Matrix::zeros(spec.n_vars, spec.n_samples);
    for (t, &c) in labels.iter().enumerate() {
        for i in 0..spec.n_vars {
            m[(i, t)] = centres[(c, i)] + noise.sample(&mut rng);
        }
    }
    Ok(SyntheticData { matrix: DataMatrix::new(m)?, labels })
}

/// fMRI-like rows: shared slow drift with random per-row loadings, latent
/// blobs, and AR(1) noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmriLikeSpec {
    pub blobs: BlobSpec,
    /// Drift standard deviation in units of `noise_sd`.
    pub drift_amplitude: f64,
    /// Lag-one coefficient of the per-row noise, in `[0, 1)`.
    pub ar_coeff: f64,
}

impl FmriLikeSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            blobs: BlobSpec { n_vars: 96, n_samples: 208, true_k: 4, separation: 8.0, noise_sd: 1.0, seed },
            drift_amplitude: 60.0,
            ar_coeff: 0.6,
        }
    }
}

pub fn generate_fmri_like(spec: &FmriLikeSpec) -> Result<SyntheticData> {
    spec.blobs.validate()?;
    if !(0.0..1.0).contains(&spec.ar_coeff) {
        return Err(Error::InvalidConfig(format!("ar_coeff {} must be in [0, 1)", spec.ar_coeff)));
    }
    if !(spec.drift_amplitude >= 0.0 && spec.drift_amplitude.is_finite()) {
        return Err(Error::InvalidConfig(format!("drift_amplitude {} must be >= 0", spec.drift_amplitude)));
    }
    let b = &spec.blobs;
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let (centres, labels) = blob_signal(b, &mut rng);
    let t_len = b.n_samples;

    // two slow shared drifts: a linear trend and a sub-cycle oscillation, unit variance each
    let phase = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
    let drifts: [Vec<f64>; 2] = [
        unit_variance((0..t_len).map(|t| t as f64 / (t_len - 1) as f64).collect()),
        unit_variance(
            (0..t_len)
                .map(|t| (std::f64::consts::TAU * 0.75 * t as f64 / t_len as f64 + phase).sin())
                .collect(),
        ),
    ];

    // innovations scaled so the stationary noise variance is noise_sd²
    let innov_sd = b.noise_sd * (1.0 - spec.ar_coeff * spec.ar_coeff).sqrt();
    let innov = Normal::new(0.0, innov_sd).expect("validated");
    let stationary = Normal::new(0.0, b.noise_sd).expect("validated");
    let drift_sd = spec.drift_amplitude * b.noise_sd;

    let mut m = Matrix::zeros(b.n_vars, t_len);
    for i in 0..b.n_vars {
        let loadings: Vec<f64> = (0..drifts.len())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                drift_sd * (0.5 + 0.5 * z.abs())
            })
            .collect();
        let mut e = stationary.sample(&mut rng);
        for t in 0..t_len {
            if t > 0 {
                e = spec.ar_coeff * e + innov.sample(&mut rng);
            }
            let drift: f64 = loadings.iter().zip(&drifts).map(|(l, d)| l * d[t]).sum();
            m[(i, t)] = drift + centres[(labels[t], i)] + e;
        }
    }
    Ok(SyntheticData { matrix: DataMatrix::new(m)?, labels })
}

fn unit_variance(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    v
}
