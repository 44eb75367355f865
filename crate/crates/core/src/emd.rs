//! Empirical Mode Decomposition by cubic-spline envelope sifting.
//!
//! A signal is peeled into intrinsic mode functions (IMFs), highest
//! frequency first. Each IMF is found by repeatedly subtracting the mean of
//! the upper and lower envelopes (natural cubic splines through the maxima
//! and the minima, with the two extrema nearest each end mirrored across
//! it) until the Cauchy-type SD statistic drops below the threshold and the
//! candidate has as many zero crossings as extrema, give or take one.

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};
use crate::par;
use crate::spline::NaturalCubicSpline;

pub const MIN_SIGNAL_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmdConfig {
    pub max_imfs: usize,
    /// Sifting stops once `Σ(h_prev - h_new)² / Σ h_prev²` is below this.
    pub sd_threshold: f64,
    pub max_sifts: usize,
}

impl Default for EmdConfig {
    fn default() -> Self {
        Self { max_imfs: 10, sd_threshold: 0.2, max_sifts: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmdDecomposition {
    /// Highest frequency first.
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub source_length: usize,
}

impl EmdDecomposition {
    /// Sum of all IMFs and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

/// Interior local maxima and minima. A plateau counts once, at its midpoint.
pub fn find_extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut prev_sign = 0i8;
    let mut run_start = 0;
    for i in 1..x.len() {
        let d = x[i] - x[i - 1];
        let s = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            continue;
        };
        let mid = (run_start + i - 1) / 2;
        if prev_sign > 0 && s < 0 {
            maxima.push(mid);
        } else if prev_sign < 0 && s > 0 {
            minima.push(mid);
        }
        prev_sign = s;
        run_start = i;
    }
    (maxima, minima)
}

pub fn count_extrema(x: &[f64]) -> usize {
    let (a, b) = find_extrema(x);
    a.len() + b.len()
}

/// Sign changes, skipping exact zeros.
pub fn count_zero_crossings(x: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0_f64;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// Extrema and zero-crossing counts differ by at most one.
pub fn satisfies_imf_criterion(x: &[f64]) -> bool {
    count_extrema(x).abs_diff(count_zero_crossings(x)) <= 1
}

fn envelope(x: &[f64], idx: &[usize]) -> Vec<f64> {
    let last = (x.len() - 1) as f64;
    let mirror_n = idx.len().min(2);
    let mut knots = Vec::with_capacity(idx.len() + 2 * mirror_n);
    for &p in idx[..mirror_n].iter().rev() {
        knots.push((-(p as f64), x[p]));
    }
    knots.extend(idx.iter().map(|&p| (p as f64, x[p])));
    for &p in idx[idx.len() - mirror_n..].iter().rev() {
        knots.push((2.0 * last - p as f64, x[p]));
    }
    let (xs, ys) = knots.into_iter().unzip();
    NaturalCubicSpline::new(xs, ys).sample_integers(x.len())
}

/// Mean of the upper and lower envelopes, `None` without at least one
/// maximum and one minimum.
fn envelope_mean(h: &[f64]) -> Option<Vec<f64>> {
    let (maxima, minima) = find_extrema(h);
    if maxima.is_empty() || minima.is_empty() {
        return None;
    }
    let upper = envelope(h, &maxima);
    let lower = envelope(h, &minima);
    Some(upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect())
}

/// Extract one IMF from `x`.
pub fn sift(x: &[f64], cfg: &EmdConfig) -> Result<Vec<f64>> {
    let mut h = x.to_vec();
    for _ in 0..cfg.max_sifts {
        let Some(mean) = envelope_mean(&h) else { break };
        let energy: f64 = h.iter().map(|v| v * v).sum();
        if energy == 0.0 {
            break;
        }
        let sd = mean.iter().map(|m| m * m).sum::<f64>() / energy;
        for (v, m) in h.iter_mut().zip(&mean) {
            *v -= m;
        }
        if sd < cfg.sd_threshold && satisfies_imf_criterion(&h) {
            return Ok(h);
        }
    }
    if satisfies_imf_criterion(&h) {
        Ok(h)
    } else {
        Err(Error::SiftingDivergence { cap: cfg.max_sifts })
    }
}

/// Residuals whose range is rounding noise relative to the signal count as
/// constant.
const FLAT_RTOL: f64 = 1e-10;

fn is_flat(x: &[f64], scale: f64) -> bool {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo <= FLAT_RTOL * scale
}

/// Decompose a signal into at most `cfg.max_imfs` IMFs plus a residual.
/// Stops early once the residual has fewer than two interior extrema or is
/// flat to within rounding.
pub fn decompose(signal: &[f64], cfg: &EmdConfig) -> Result<EmdDecomposition> {
    if signal.len() < MIN_SIGNAL_LEN {
        return Err(Error::SignalTooShort { len: signal.len(), min: MIN_SIGNAL_LEN });
    }
    if let Some(col) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    let scale = signal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut residual = signal.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < cfg.max_imfs && count_extrema(&residual) >= 2 && !is_flat(&residual, scale) {
        let imf = sift(&residual, cfg)?;
        for (r, v) in residual.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    Ok(EmdDecomposition { imfs, residual, source_length: signal.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstImfOutput {
    pub matrix: DataMatrix,
    /// Rows that produced no IMF and were copied through unchanged.
    pub passthrough_rows: Vec<usize>,
}

/// Replace every row with its first IMF. Only the first IMF is sifted.
/// Rows are independent, so they are processed concurrently when the
/// `parallel` feature is on.
pub fn first_imf_matrix(m: &DataMatrix, cfg: &EmdConfig) -> Result<FirstImfOutput> {
    let first_only = EmdConfig { max_imfs: 1, ..*cfg };
    let rows: Vec<&[f64]> = m.values().iter_rows().collect();
    let results = par::map_slice(&rows, |row| decompose(row, &first_only));
    let mut out = Matrix::zeros(m.n_vars(), m.n_samples());
    let mut passthrough_rows = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        let dec = res?;
        match dec.imfs.into_iter().next() {
            Some(imf) => out.row_mut(i).copy_from_slice(&imf),
            None => {
                out.row_mut(i).copy_from_slice(m.row(i));
                passthrough_rows.push(i);
            }
        }
    }
    Ok(FirstImfOutput { matrix: m.map_values(out)?, passthrough_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn tone(len: usize, periods: f64, amp: f64) -> Vec<f64> {
        (0..len).map(|t| amp * (2.0 * PI * periods * t as f64 / len as f64).sin()).collect()
    }

    #[test]
    fn extrema_with_plateaus() {
        let x = [0.0, 1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 0.0, 2.0];
        let (mx, mn) = find_extrema(&x);
        assert_eq!(mx, vec![2]);
        assert_eq!(mn, vec![5]);
        // leading plateau and monotone tail are not extrema
        assert_eq!(find_extrema(&[1.0, 1.0, 2.0, 3.0]), (vec![], vec![]));
    }

    #[test]
    fn zero_crossings_skip_exact_zeros() {
        assert_eq!(count_zero_crossings(&[1.0, 0.0, -1.0, 0.0, 0.0, -2.0, 3.0]), 2);
        assert_eq!(count_zero_crossings(&[0.0, 0.0]), 0);
    }

    #[test]
    fn constant_signal_has_no_imfs() {
        let x = vec![3.5; 32];
        let d = decompose(&x, &EmdConfig::default()).unwrap();
        assert!(d.imfs.is_empty());
        assert_eq!(d.residual, x);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            decompose(&[1.0, 2.0, 1.0], &EmdConfig::default()),
            Err(Error::SignalTooShort { len: 3, .. })
        ));
    }

    #[test]
    fn single_tone_is_first_imf() {
        let x = tone(256, 8.0, 2.0);
        let d = decompose(&x, &EmdConfig::default()).unwrap();
        assert!(pearson(&d.imfs[0], &x) > 0.99);
        let res_max = d.residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(res_max < 0.05 * 2.0, "residual {res_max}");
    }

    #[test]
    fn two_tones_separate() {
        let low = tone(256, 3.0, 1.0);
        let high = tone(256, 12.0, 1.0);
        let x: Vec<f64> = low.iter().zip(&high).map(|(a, b)| a + b).collect();
        let d = decompose(&x, &EmdConfig::default()).unwrap();
        assert!(pearson(&d.imfs[0], &high) > 0.95);
    }

    #[test]
    fn random_signals_reconstruct_and_obey_imf_criterion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d = decompose(&x, &EmdConfig::default()).unwrap();
            let r = d.reconstruct();
            let err: f64 = r.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / norm < 1e-8);
            for imf in &d.imfs {
                assert!(satisfies_imf_criterion(imf));
            }
            if d.imfs.len() < EmdConfig::default().max_imfs {
                let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                assert!(count_extrema(&d.residual) < 2 || is_flat(&d.residual, scale));
            }
        }
    }

    #[test]
    fn first_imf_matrix_passes_constant_rows_through() {
        let m = DataMatrix::from_rows(&[vec![1.0; 16], vec![-2.0; 16]]).unwrap();
        let out = first_imf_matrix(&m, &EmdConfig::default()).unwrap();
        assert_eq!(out.matrix, m);
        assert_eq!(out.passthrough_rows, vec![0, 1]);
    }

    #[test]
    fn first_imf_matrix_keeps_pure_tones() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| tone(256, 6.0 + i as f64, 1.0)).collect();
        let m = DataMatrix::from_rows(&rows).unwrap();
        let out = first_imf_matrix(&m, &EmdConfig::default()).unwrap();
        assert!(out.passthrough_rows.is_empty());
        for (i, row) in rows.iter().enumerate() {
            let diff: f64 = out.matrix.row(i).iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
            let norm: f64 = row.iter().map(|v| v * v).sum();
            assert!((diff / norm).sqrt() < 0.05);
        }
    }
}
