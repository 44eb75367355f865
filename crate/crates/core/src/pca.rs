//! Principal components of the correlation matrix, Kaiser and Wishart
//! (Marchenko-Pastur) component selection, and projection onto the kept
//! principal directions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::eigen::{symmetric_eigen, EigenSpectrum};
use crate::error::{Error, Result};
use crate::matrix::{correlation_matrix, DataMatrix, Matrix};

/// Support of the Marchenko-Pastur law for an N x T correlation matrix of
/// iid Gaussian data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WishartBound {
    /// N / T.
    pub ratio_r: f64,
    /// Upper edge `(1 + √r)²`.
    pub lambda_plus: f64,
    /// Lower edge `(1 - √r)²`.
    pub lambda_minus: f64,
}

pub fn wishart_bound(n_vars: usize, n_samples: usize) -> WishartBound {
    assert!(n_vars >= 1 && n_samples >= 1, "dimensions must be positive");
    let ratio_r = n_vars as f64 / n_samples as f64;
    let root = ratio_r.sqrt();
    WishartBound { ratio_r, lambda_plus: (1.0 + root).powi(2), lambda_minus: (1.0 - root).powi(2) }
}

/// Marchenko-Pastur density `√((λ₊ - λ)(λ - λ₋)) / (2π r λ)`, zero outside
/// the open support.
pub fn mp_density(lambda: f64, bound: &WishartBound) -> f64 {
    if lambda <= bound.lambda_minus || lambda >= bound.lambda_plus || lambda <= 0.0 {
        return 0.0;
    }
    ((bound.lambda_plus - lambda) * (lambda - bound.lambda_minus)).sqrt()
        / (2.0 * PI * bound.ratio_r * lambda)
}

/// Indices of eigenvalues `>= 1`.
pub fn select_kaiser(spectrum: &EigenSpectrum) -> Vec<usize> {
    select_kaiser_with(spectrum, true)
}

/// Kaiser rule with a configurable boundary; `inclusive` keeps `λ == 1`.
pub fn select_kaiser_with(spectrum: &EigenSpectrum, inclusive: bool) -> Vec<usize> {
    prefix_where(spectrum.eigenvalues(), |l| if inclusive { l >= 1.0 } else { l > 1.0 })
}

/// Indices of eigenvalues strictly above `λ₊`. May be empty.
pub fn select_wishart(spectrum: &EigenSpectrum, bound: &WishartBound) -> Vec<usize> {
    select_wishart_with(spectrum, bound, true)
}

pub fn select_wishart_with(spectrum: &EigenSpectrum, bound: &WishartBound, strict: bool) -> Vec<usize> {
    let edge = bound.lambda_plus;
    prefix_where(spectrum.eigenvalues(), |l| if strict { l > edge } else { l >= edge })
}

/// The leading run of a descending sequence that passes `keep`.
fn prefix_where(sorted_desc: &[f64], keep: impl Fn(f64) -> bool) -> Vec<usize> {
    sorted_desc.iter().take_while(|&&l| keep(l)).enumerate().map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    Kaiser,
    Wishart,
    TopC(usize),
}

/// How projected scores are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreNormalization {
    /// `u_kᵀ Y`: row variance equals `λ_k`.
    #[default]
    Raw,
    /// `u_kᵀ Y / √λ_k`: unit row variance.
    UnitVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaReduction {
    pub spectrum: EigenSpectrum,
    pub selected_indices: Vec<usize>,
    pub criterion: SelectionCriterion,
    /// Selected components by samples.
    pub scores: Matrix,
    pub explained_fraction: f64,
}

impl PcaReduction {
    pub fn n_components(&self) -> usize {
        self.selected_indices.len()
    }
}

/// Eigendecomposition of the correlation matrix of a standardized matrix.
pub fn correlation_spectrum(standardized: &DataMatrix) -> Result<EigenSpectrum> {
    symmetric_eigen(&correlation_matrix(standardized)?)
}

/// Project standardized data onto the selected principal directions.
pub fn project(
    standardized: &DataMatrix,
    spectrum: &EigenSpectrum,
    indices: &[usize],
    criterion: SelectionCriterion,
    normalization: ScoreNormalization,
) -> Result<PcaReduction> {
    if indices.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n = spectrum.len();
    if standardized.n_vars() != n {
        return Err(Error::DimensionMismatch(standardized.n_vars(), n));
    }
    if let Some(&bad) = indices.iter().find(|&&k| k >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }
    let y = standardized.values();
    let t = y.cols();
    let mut scores = Matrix::zeros(indices.len(), t);
    for (row, &k) in indices.iter().enumerate() {
        let u = spectrum.eigenvector(k);
        let dst = scores.row_mut(row);
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (d, &yv) in dst.iter_mut().zip(y.row(i)) {
                *d += ui * yv;
            }
        }
        if normalization == ScoreNormalization::UnitVariance {
            let lambda = spectrum.eigenvalues()[k];
            if lambda > 0.0 {
                let s = 1.0 / lambda.sqrt();
                dst.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    let selected: f64 = indices.iter().map(|&k| spectrum.eigenvalues()[k]).sum();
    let total = spectrum.total_variance();
    let explained_fraction = if total > 0.0 { (selected / total).clamp(0.0, 1.0) } else { 0.0 };
    Ok(PcaReduction {
        spectrum: spectrum.clone(),
        selected_indices: indices.to_vec(),
        criterion,
        scores,
        explained_fraction,
    })
}

/// Map raw scores back to the standardized variables: `Y ≈ U_C S`.
pub fn reconstruct(reduction: &PcaReduction) -> Matrix {
    let n = reduction.spectrum.len();
    let t = reduction.scores.cols();
    let mut out = Matrix::zeros(n, t);
    for (row, &k) in reduction.selected_indices.iter().enumerate() {
        let u = reduction.spectrum.eigenvector(k);
        let s = reduction.scores.row(row);
        for (i, &ui) in u.iter().enumerate() {
            for (d, &sv) in out.row_mut(i).iter_mut().zip(s) {
                *d += ui * sv;
            }
        }
    }
    out
}
