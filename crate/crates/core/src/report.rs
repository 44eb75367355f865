//! JSON reports and tab-separated plot tables.
//!
//! Every floating-point value is rounded to 6 significant digits before it
//! is written; struct field order fixes the key order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::config::{Orientation, PcaInput, PipelineConfig, Variant};
use crate::error::Result;
use crate::experiment::{check_ding_he_bound, DingHeBoundCheck, PipelineRun, TheoremVerdict, VariantOutcome};
use crate::pca::WishartBound;

pub const SCHEMA_VERSION: u32 = 1;

/// Marker written wherever the Wishart rule kept no component.
pub const NO_INFORMATIVE_COMPONENTS: &str = "no_informative_components";

/// Round to 6 significant digits. Non-finite values pass through.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Text form used in TSV files: 6 significant digits, `inf`, `nan`.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", sig6(x))
    }
}

pub fn ser_sig6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(sig6(*x))
    } else {
        // JSON has no infinity
        s.serialize_str(&fmt_sig6(*x))
    }
}

pub fn ser_sig6_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_sig6(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_sig6_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    struct Sig(f64);
    impl Serialize for Sig {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            ser_sig6(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&Sig(x))?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSummary {
    pub source: Option<String>,
    pub n_vars: usize,
    pub n_samples: usize,
}

/// Processing choices that the configuration alone does not spell out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub standardization: &'static str,
    pub correlation: &'static str,
    pub pca_input: PcaInput,
    pub orientation: Orientation,
    pub condition_number_of: &'static str,
    pub emd_passthrough_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WishartSection {
    #[serde(serialize_with = "ser_sig6")]
    pub ratio_r: f64,
    #[serde(serialize_with = "ser_sig6")]
    pub lambda_plus: f64,
    #[serde(serialize_with = "ser_sig6")]
    pub lambda_minus: f64,
}

impl From<WishartBound> for WishartSection {
    fn from(b: WishartBound) -> Self {
        Self { ratio_r: b.ratio_r, lambda_plus: b.lambda_plus, lambda_minus: b.lambda_minus }
    }
}

/// One Table-1 cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub variant: Variant,
    pub status: &'static str,
    #[serde(serialize_with = "ser_sig6_opt")]
    pub sigma_max: Option<f64>,
    #[serde(serialize_with = "ser_sig6_opt")]
    pub sigma_min: Option<f64>,
    #[serde(serialize_with = "ser_sig6_opt")]
    pub condition_number: Option<f64>,
    pub rank_deficient: Option<bool>,
}

/// Eigenvalue-rank curve with its two thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSection {
    #[serde(serialize_with = "ser_sig6_vec")]
    pub eigenvalues: Vec<f64>,
    #[serde(serialize_with = "ser_sig6")]
    pub kaiser_line: f64,
    #[serde(serialize_with = "ser_sig6")]
    pub wishart_line: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KStarRow {
    pub variant: Variant,
    pub status: &'static str,
    pub n_features: Option<usize>,
    pub k_star: Option<usize>,
    pub k_values: Vec<usize>,
    #[serde(serialize_with = "ser_sig6_vec")]
    pub db_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentsSection {
    pub c_kaiser: usize,
    pub c_wishart: usize,
    pub wishart_status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremSection {
    pub status: &'static str,
    #[serde(flatten)]
    pub verdict: Option<TheoremVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub variant: Variant,
    #[serde(flatten)]
    pub check: DingHeBoundCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub input: InputSummary,
    pub config: PipelineConfig,
    pub metadata: Metadata,
    pub wishart: WishartSection,
    pub condition_numbers: Vec<ConditionRow>,
    pub spectrum: Option<SpectrumSection>,
    pub optimal_k: Vec<KStarRow>,
    pub components: Option<ComponentsSection>,
    pub theorem: Option<TheoremSection>,
    pub bound_checks: Vec<BoundRow>,
}

fn status_of(outcome: &VariantOutcome) -> &'static str {
    match outcome {
        VariantOutcome::Completed(_) => "ok",
        VariantOutcome::NoInformativeComponents { .. } => NO_INFORMATIVE_COMPONENTS,
    }
}

impl ExperimentReport {
    pub fn from_run(run: &PipelineRun, source: Option<String>) -> Result<Self> {
        let cfg = &run.config;
        let mut condition_numbers = Vec::new();
        let mut optimal_k = Vec::new();
        let mut bound_checks = Vec::new();
        for (variant, outcome) in &run.outcomes {
            let status = status_of(outcome);
            let r = outcome.result();
            condition_numbers.push(ConditionRow {
                variant: *variant,
                status,
                sigma_max: r.map(|r| r.condition.lambda_max),
                sigma_min: r.map(|r| r.condition.lambda_min),
                condition_number: r.map(|r| r.condition.condition_number),
                rank_deficient: r.map(|r| r.condition.rank_deficient),
            });
            optimal_k.push(KStarRow {
                variant: *variant,
                status,
                n_features: r.map(|r| r.n_components),
                k_star: r.map(|r| r.sweep.optimal_k),
                k_values: r.map(|r| r.sweep.k_values.clone()).unwrap_or_default(),
                db_scores: r.map(|r| r.sweep.db_scores.clone()).unwrap_or_default(),
            });
            if let Some(r) = r {
                bound_checks.push(BoundRow { variant: *variant, check: check_ding_he_bound(r, r.sweep.optimal_k, cfg)? });
            }
        }

        let spectrum = run.pca_spectrum.as_ref().map(|s| SpectrumSection {
            eigenvalues: s.eigenvalues().to_vec(),
            kaiser_line: 1.0,
            wishart_line: run.bound.lambda_plus,
        });
        let components = match (run.c_kaiser, run.c_wishart) {
            (Some(c_kaiser), Some(c_wishart)) => Some(ComponentsSection {
                c_kaiser,
                c_wishart,
                wishart_status: if c_wishart == 0 { NO_INFORMATIVE_COMPONENTS } else { "ok" },
            }),
            _ => None,
        };
        let theorem = match run.outcome(Variant::PcaWishart) {
            Some(VariantOutcome::NoInformativeComponents { .. }) => {
                Some(TheoremSection { status: NO_INFORMATIVE_COMPONENTS, verdict: None })
            }
            Some(VariantOutcome::Completed(_)) if run.c_kaiser.is_some() => {
                Some(TheoremSection { status: "ok", verdict: Some(TheoremVerdict::from_run(run)?) })
            }
            _ => None,
        };

        Ok(Self {
            schema_version: SCHEMA_VERSION,
            input: InputSummary { source, n_vars: run.n_vars, n_samples: run.n_samples },
            config: cfg.clone(),
            metadata: Metadata {
                standardization: "zero mean, unit population variance per row, before and after EMD",
                correlation: "Y Y^T / T of the standardized matrix",
                pca_input: cfg.pca_input,
                orientation: cfg.orientation,
                condition_number_of: "active matrix of each variant, features by samples",
                emd_passthrough_rows: run.emd_passthrough_rows.clone(),
            },
            wishart: run.bound.into(),
            condition_numbers,
            spectrum,
            optimal_k,
            components,
            theorem,
            bound_checks,
        })
    }

    pub fn k_star(&self, v: Variant) -> Option<usize> {
        self.optimal_k.iter().find(|r| r.variant == v).and_then(|r| r.k_star)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

fn opt_usize(x: Option<usize>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// `rank, eigenvalue, kaiser_line, wishart_line` rows.
pub fn spectrum_tsv(s: &SpectrumSection) -> String {
    let mut out = String::from("rank\teigenvalue\tkaiser_line\twishart_line\n");
    for (i, &l) in s.eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", i + 1, fmt_sig6(l), fmt_sig6(s.kaiser_line), fmt_sig6(s.wishart_line));
    }
    out
}

/// One row per replicate: K* of every variant, `NA` where missing.
pub fn kstar_tsv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("replicate");
    for v in Variant::ALL {
        out.push('\t');
        out.push_str(v.label());
    }
    out.push('\n');
    for (id, r) in reports.iter().enumerate() {
        let _ = write!(out, "{id}");
        for v in Variant::ALL {
            let _ = write!(out, "\t{}", opt_usize(r.k_star(v)));
        }
        out.push('\n');
    }
    out
}

/// One row per replicate: C^K and C^W.
pub fn components_tsv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("replicate\tc_kaiser\tc_wishart\n");
    for (id, r) in reports.iter().enumerate() {
        let c = r.components.as_ref();
        let _ = writeln!(out, "{id}\t{}\t{}", opt_usize(c.map(|c| c.c_kaiser)), opt_usize(c.map(|c| c.c_wishart)));
    }
    out
}

/// Write the plot tables for a batch of replicates, in replicate order.
/// A single report gets `spectrum.tsv`; batches get one spectrum file per
/// replicate. Returns the files written.
pub fn export_plot_data(reports: &[ExperimentReport], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    for (id, r) in reports.iter().enumerate() {
        if let Some(s) = &r.spectrum {
            let name = if reports.len() == 1 { "spectrum.tsv".to_string() } else { format!("spectrum_{id:03}.tsv") };
            put(name, spectrum_tsv(s))?;
        }
    }
    put("kstar.tsv".into(), kstar_tsv(reports))?;
    put("components.tsv".into(), components_tsv(reports))?;
    Ok(written)
}
