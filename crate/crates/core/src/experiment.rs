//! The four reduction variants (RAW, EMD, PCA-K, PCA-W), the K-Means bound
//! check, and the test of K* against the Kaiser and Wishart component
//! counts.

use serde::Serialize;

use crate::config::{Orientation, PcaInput, PipelineConfig, Variant};
use crate::eigen::{symmetric_eigen, EigenSpectrum};
use crate::emd::first_imf_matrix;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, Partition};
use crate::matrix::{condition_number, correlation_matrix, standardize, ConditionReport, DataMatrix, Matrix};
use crate::par;
use crate::pca::{
    project, select_kaiser_with, select_wishart_with, wishart_bound, SelectionCriterion, WishartBound,
};
use crate::validity::{sweep_optimal_k, SweepResult};

/// One variant's reduced data, conditioning and K sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub variant: Variant,
    /// Condition number of the variant's active matrix (features by samples).
    pub condition: ConditionReport,
    /// Feature dimension: N for RAW and EMD, the selection size for PCA.
    pub n_components: usize,
    pub sweep: SweepResult,
    /// Descending correlation eigenvalues of the matrix the variant derives from.
    pub spectrum_summary: Vec<f64>,
    /// The clustered points, one per row.
    pub points: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariantOutcome {
    Completed(VariantResult),
    /// The Wishart rule kept no component; never replaced by another rule.
    NoInformativeComponents { lambda_plus: f64 },
}

impl VariantOutcome {
    pub fn result(&self) -> Option<&VariantResult> {
        match self {
            VariantOutcome::Completed(r) => Some(r),
            VariantOutcome::NoInformativeComponents { .. } => None,
        }
    }
}

/// Everything computed for one input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub n_vars: usize,
    pub n_samples: usize,
    pub bound: WishartBound,
    /// Spectrum of the PCA input, when a PCA variant ran.
    pub pca_spectrum: Option<EigenSpectrum>,
    pub c_kaiser: Option<usize>,
    pub c_wishart: Option<usize>,
    /// In [`Variant`] order.
    pub outcomes: Vec<(Variant, VariantOutcome)>,
    /// Rows the EMD stage copied through for lack of any IMF.
    pub emd_passthrough_rows: Vec<usize>,
}

impl PipelineRun {
    pub fn outcome(&self, v: Variant) -> Option<&VariantOutcome> {
        self.outcomes.iter().find(|(w, _)| *w == v).map(|(_, o)| o)
    }

    pub fn result(&self, v: Variant) -> Option<&VariantResult> {
        self.outcome(v).and_then(VariantOutcome::result)
    }

    pub fn k_star(&self, v: Variant) -> Option<usize> {
        self.result(v).map(|r| r.sweep.optimal_k)
    }
}

/// Intermediate matrices shared by the variants.
struct Stages {
    standardized: DataMatrix,
    emd: Option<DataMatrix>,
    emd_passthrough_rows: Vec<usize>,
}

impl Stages {
    fn build(m: &DataMatrix, cfg: &PipelineConfig, need_emd: bool) -> Result<Self> {
        let standardized = standardize(m)?;
        let (emd, emd_passthrough_rows) = if need_emd {
            let out = first_imf_matrix(&standardized, &cfg.emd())?;
            (Some(standardize(&out.matrix)?), out.passthrough_rows)
        } else {
            (None, Vec::new())
        };
        Ok(Self { standardized, emd, emd_passthrough_rows })
    }

    fn pca_input(&self, cfg: &PipelineConfig) -> &DataMatrix {
        match cfg.pca_input {
            PcaInput::Emd => self.emd.as_ref().expect("EMD stage built"),
            PcaInput::Standardized => &self.standardized,
        }
    }
}

fn spectrum_of(m: &DataMatrix) -> Result<EigenSpectrum> {
    symmetric_eigen(&correlation_matrix(m)?)
}

/// Cluster points for an N x T active matrix under the configured orientation.
fn points_for(active: &Matrix, orientation: Orientation) -> Matrix {
    match orientation {
        Orientation::ClusterSamples => active.transpose(),
        Orientation::ClusterVariables => active.clone(),
    }
}

fn sweep_points(points: &Matrix, cfg: &PipelineConfig) -> Result<SweepResult> {
    sweep_optimal_k(points, cfg.k_min, cfg.k_max, &cfg.kmeans(), cfg.db_params())
}

fn full_variant(variant: Variant, active: &DataMatrix, cfg: &PipelineConfig) -> Result<VariantResult> {
    let condition = condition_number(active.values())?;
    let spectrum = spectrum_of(active)?;
    let points = points_for(active.values(), cfg.orientation);
    let sweep = sweep_points(&points, cfg)?;
    Ok(VariantResult {
        variant,
        condition,
        n_components: active.n_vars(),
        sweep,
        spectrum_summary: spectrum.eigenvalues().to_vec(),
        points,
    })
}

fn pca_variant(
    variant: Variant,
    base: &DataMatrix,
    spectrum: &EigenSpectrum,
    indices: &[usize],
    cfg: &PipelineConfig,
) -> Result<VariantResult> {
    let criterion = match variant {
        Variant::PcaKaiser => SelectionCriterion::Kaiser,
        _ => SelectionCriterion::Wishart,
    };
    let reduction = project(base, spectrum, indices, criterion, cfg.score_normalization)?;
    let condition = condition_number(&reduction.scores)?;
    let points = match cfg.orientation {
        Orientation::ClusterSamples => reduction.scores.transpose(),
        Orientation::ClusterVariables => {
            // variables described by their loadings u_k[i] * sqrt(λ_k)
            let mut loadings = Matrix::zeros(base.n_vars(), indices.len());
            for (c, &k) in indices.iter().enumerate() {
                let s = spectrum.eigenvalues()[k].max(0.0).sqrt();
                for (i, u) in spectrum.eigenvector(k).into_iter().enumerate() {
                    loadings[(i, c)] = u * s;
                }
            }
            loadings
        }
    };
    let sweep = sweep_points(&points, cfg)?;
    Ok(VariantResult {
        variant,
        condition,
        n_components: indices.len(),
        sweep,
        spectrum_summary: spectrum.eigenvalues().to_vec(),
        points,
    })
}

/// Run the configured variants on one N x T matrix.
///
/// RAW is the standardized input; EMD replaces every standardized row by
/// its first IMF and standardizes again; PCA-K and PCA-W project the PCA
/// input (EMD output by default) onto the Kaiser or Wishart components.
pub fn run_pipeline(m: &DataMatrix, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let mut variants = cfg.variants.clone();
    variants.sort();
    variants.dedup();
    let wants_pca = variants.iter().any(|v| matches!(v, Variant::PcaKaiser | Variant::PcaWishart));
    let need_emd = variants.contains(&Variant::Emd) || (wants_pca && cfg.pca_input == PcaInput::Emd);
    let stages = Stages::build(m, cfg, need_emd)?;
    let bound = wishart_bound(m.n_vars(), m.n_samples());

    let (pca_spectrum, kaiser, wishart) = if wants_pca {
        let spectrum = spectrum_of(stages.pca_input(cfg))?;
        let k = select_kaiser_with(&spectrum, cfg.kaiser_inclusive);
        let w = select_wishart_with(&spectrum, &bound, cfg.wishart_strict);
        (Some(spectrum), k, w)
    } else {
        (None, Vec::new(), Vec::new())
    };

    let outcomes = par::map_slice(&variants, |&v| -> Result<VariantOutcome> {
        let r = match v {
            Variant::Raw => full_variant(v, &stages.standardized, cfg)?,
            Variant::Emd => full_variant(v, stages.emd.as_ref().expect("EMD stage built"), cfg)?,
            Variant::PcaKaiser => {
                pca_variant(v, stages.pca_input(cfg), pca_spectrum.as_ref().expect("spectrum"), &kaiser, cfg)?
            }
            Variant::PcaWishart => {
                if wishart.is_empty() {
                    return Ok(VariantOutcome::NoInformativeComponents { lambda_plus: bound.lambda_plus });
                }
                pca_variant(v, stages.pca_input(cfg), pca_spectrum.as_ref().expect("spectrum"), &wishart, cfg)?
            }
        };
        Ok(VariantOutcome::Completed(r))
    });
    let outcomes = variants.iter().copied().zip(outcomes).map(|(v, o)| o.map(|o| (v, o))).collect::<Result<Vec<_>>>()?;

    Ok(PipelineRun {
        config: cfg.clone(),
        n_vars: m.n_vars(),
        n_samples: m.n_samples(),
        bound,
        c_kaiser: pca_spectrum.as_ref().map(|_| kaiser.len()),
        c_wishart: pca_spectrum.as_ref().map(|_| wishart.len()),
        pca_spectrum,
        outcomes,
        emd_passthrough_rows: stages.emd_passthrough_rows,
    })
}

/// Run a single variant. An empty Wishart selection is an error here.
pub fn run_variant(m: &DataMatrix, variant: Variant, cfg: &PipelineConfig) -> Result<VariantResult> {
    let single = PipelineConfig { variants: vec![variant], ..cfg.clone() };
    let run = run_pipeline(m, &single)?;
    match run.outcomes.into_iter().next().map(|(_, o)| o) {
        Some(VariantOutcome::Completed(r)) => Ok(r),
        Some(VariantOutcome::NoInformativeComponents { lambda_plus }) => Err(Error::EmptyWishartSelection { lambda_plus }),
        None => unreachable!("one variant requested"),
    }
}

/// Upper and lower bounds on the K-Means objective: the total scatter
/// `n·ȳ²` minus the top `K - 1` scatter eigenvalues, and the total scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DingHeBoundCheck {
    pub k: usize,
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub total_variance: f64,
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub eigen_sum: f64,
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub lower: f64,
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub j_k: f64,
    pub satisfied: bool,
    pub strict_lower: bool,
    pub strict_upper: bool,
}

/// Relative slack for rounding when comparing J against the bounds.
pub const BOUND_RTOL: f64 = 1e-9;

/// Descending eigenvalues of the scatter matrix `Σ (x - x̄)(x - x̄)ᵀ`,
/// computed on whichever Gram matrix is smaller.
pub fn scatter_eigenvalues(points: &Matrix) -> Result<Vec<f64>> {
    let n = points.rows();
    let d = points.cols();
    let mut centred = points.clone();
    for j in 0..d {
        let mean = (0..n).map(|i| points[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            centred[(i, j)] -= mean;
        }
    }
    let gram = if d <= n { centred.transpose().gram_rows() } else { centred.gram_rows() };
    Ok(symmetric_eigen(&gram)?.eigenvalues().to_vec())
}

/// Evaluate the bounds for `partition` of `points`.
pub fn ding_he_bound(points: &Matrix, partition: &Partition) -> Result<DingHeBoundCheck> {
    let k = partition.k;
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let eig = scatter_eigenvalues(points)?;
    let total_variance: f64 = eig.iter().sum();
    let eigen_sum: f64 = eig.iter().take(k.saturating_sub(1)).sum();
    let lower = total_variance - eigen_sum;
    let j_k = partition.objective_j;
    let slack = BOUND_RTOL * total_variance.abs().max(f64::MIN_POSITIVE);
    Ok(DingHeBoundCheck {
        k,
        total_variance,
        eigen_sum,
        lower,
        j_k,
        satisfied: lower - slack <= j_k && j_k <= total_variance + slack,
        strict_lower: lower < j_k,
        strict_upper: j_k < total_variance,
    })
}

/// Bound check for a variant at cluster count `k`, reusing the sweep's
/// partition when `k` was evaluated.
pub fn check_ding_he_bound(result: &VariantResult, k: usize, cfg: &PipelineConfig) -> Result<DingHeBoundCheck> {
    match result.sweep.partition_for(k) {
        Some(p) => ding_he_bound(&result.points, p),
        None => ding_he_bound(&result.points, &kmeans(&result.points, k, &cfg.kmeans())?),
    }
}

/// K* of the PCA-W variant against the Kaiser and Wishart component counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremVerdict {
    pub k_star: usize,
    pub c_kaiser: usize,
    pub c_wishart: usize,
    pub gap_kaiser: usize,
    pub gap_wishart: usize,
    pub similarity_tolerance: usize,
    pub verdict_kaiser: bool,
    pub verdict_wishart: bool,
    /// K* of the PCA-K variant on its own features, when it ran.
    pub k_star_kaiser_features: Option<usize>,
}

impl TheoremVerdict {
    pub fn from_run(run: &PipelineRun) -> Result<Self> {
        let c_kaiser = run.c_kaiser.ok_or_else(|| Error::InvalidConfig("PCA variants did not run".into()))?;
        let c_wishart = run.c_wishart.unwrap_or(0);
        let k_star = match run.outcome(Variant::PcaWishart) {
            Some(VariantOutcome::Completed(r)) => r.sweep.optimal_k,
            Some(VariantOutcome::NoInformativeComponents { lambda_plus }) => {
                return Err(Error::EmptyWishartSelection { lambda_plus: *lambda_plus })
            }
            None => return Err(Error::InvalidConfig("the PCA-W variant did not run".into())),
        };
        let tol = run.config.similarity_tolerance;
        let gap_kaiser = k_star.abs_diff(c_kaiser);
        let gap_wishart = k_star.abs_diff(c_wishart);
        Ok(Self {
            k_star,
            c_kaiser,
            c_wishart,
            gap_kaiser,
            gap_wishart,
            similarity_tolerance: tol,
            verdict_kaiser: gap_kaiser <= tol,
            verdict_wishart: gap_wishart <= tol,
            k_star_kaiser_features: run.k_star(Variant::PcaKaiser),
        })
    }
}

fn with_pca_variants(cfg: &PipelineConfig) -> PipelineConfig {
    let mut c = cfg.clone();
    for v in [Variant::PcaKaiser, Variant::PcaWishart] {
        if !c.variants.contains(&v) {
            c.variants.push(v);
        }
    }
    c
}

/// Run the PCA variants (plus any others configured) and compare K* with
/// both component counts.
pub fn theorem_test(m: &DataMatrix, cfg: &PipelineConfig) -> Result<TheoremVerdict> {
    TheoremVerdict::from_run(&run_pipeline(m, &with_pca_variants(cfg))?)
}

/// Run the pipeline on independent datasets, concurrently when enabled.
/// Results keep the input order.
pub fn run_study(datasets: &[DataMatrix], cfg: &PipelineConfig) -> Vec<Result<PipelineRun>> {
    par::map_slice(datasets, |m| run_pipeline(m, cfg))
}
