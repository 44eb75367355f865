//! Clustering of multivariate time series after conditioning-oriented
//! reduction: standardization, empirical mode decomposition, and principal
//! components kept by the Kaiser or Wishart (Marchenko-Pastur) rule. K-Means
//! with k-means++ restarts is swept over K and scored by the Davies-Bouldin
//! index.
//!
//! Data matrices are N variables by T samples. Independent jobs (restarts,
//! K values, EMD rows, variants, replicates) run on rayon when the
//! `parallel` feature is on; results never depend on the worker count.

pub mod config;
pub mod eigen;
pub mod emd;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kmeans;
pub mod matrix;
pub mod par;
pub mod pca;
pub mod report;
pub mod spline;
pub mod synth;
pub mod validity;

pub use config::{Orientation, PcaInput, PipelineConfig, Variant};
pub use eigen::{symmetric_eigen, EigenSpectrum};
pub use emd::{decompose, first_imf_matrix, EmdConfig, EmdDecomposition};
pub use error::{Error, Result};
pub use experiment::{
    check_ding_he_bound, run_pipeline, run_study, run_variant, theorem_test, DingHeBoundCheck, PipelineRun,
    TheoremVerdict, VariantOutcome, VariantResult,
};
pub use io::{read_csv, write_csv, CsvLayout};
pub use kmeans::{kmeans, KMeansConfig, Partition};
pub use matrix::{condition_number, correlation_matrix, standardize, ConditionReport, DataMatrix, Matrix};
pub use pca::{mp_density, project, select_kaiser, select_wishart, wishart_bound, WishartBound};
pub use report::{export_plot_data, write_report, ExperimentReport};
pub use validity::{davies_bouldin, sweep_optimal_k, DbParams, SweepResult};
