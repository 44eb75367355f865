use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use illclust::config::{PipelineConfig, Variant};
use illclust::emd::first_imf_matrix;
use illclust::error::{Error, Result};
use illclust::experiment::{run_pipeline, TheoremVerdict};
use illclust::io::{read_csv, write_csv, CsvLayout};
use illclust::kmeans::kmeans;
use illclust::matrix::{condition_number, standardize, ConditionReport, DataMatrix, Matrix};
use illclust::par;
use illclust::pca::{
    correlation_spectrum, project, select_kaiser_with, select_wishart_with, wishart_bound, SelectionCriterion,
};
use illclust::report::{
    export_plot_data, ser_sig6, ser_sig6_vec, to_json, ExperimentReport, WishartSection, NO_INFORMATIVE_COMPONENTS,
    SCHEMA_VERSION,
};
use illclust::synth::{generate_fmri_like, generate_synthetic, BlobSpec, FmriLikeSpec, SyntheticData};
use illclust::validity::sweep_optimal_k;
use illclust::Orientation;

#[derive(Parser)]
#[command(name = "illclust", version, about = "Conditioning-aware clustering of multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured K-Means seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Input {
    /// CSV with one variable per row (optional header row and label column).
    input: PathBuf,
    /// The file holds one sample per row.
    #[arg(long)]
    rows_are_samples: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Raw,
    Emd,
    PcaK,
    PcaW,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Blobs,
    FmriLike,
}

#[derive(Subcommand)]
enum Cmd {
    /// Condition numbers of the input and of its standardized form.
    Condition {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Replace every standardized row by its first IMF.
    Emd {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        /// Also write the first-IMF matrix as CSV.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Principal components of the standardized input.
    Pca {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        /// kaiser, wishart or top:C
        #[arg(long, default_value = "wishart")]
        select: String,
        /// Also write the score matrix as CSV.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// K-Means on the standardized input.
    Kmeans {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
    },
    /// Davies-Bouldin sweep over K on the standardized input.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Run the reduction variants; several inputs form a replicate batch.
    Pipeline {
        /// One or more CSV files, one replicate each.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        rows_are_samples: bool,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Directory for the tab-separated plot tables.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Compare K* on the Wishart components with both component counts.
    Theorem {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic data with known clusters.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "blobs")]
        kind: SynthKind,
        #[arg(long, default_value_t = 96)]
        vars: usize,
        #[arg(long, default_value_t = 208)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        /// With more than one replicate, --out names a directory.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::from_kv_str(&fs::read_to_string(p)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn layout(rows_are_samples: bool) -> CsvLayout {
    if rows_are_samples { CsvLayout::RowsAreSamples } else { CsvLayout::RowsAreVariables }
}

fn load(input: &Input) -> Result<DataMatrix> {
    read_csv(&input.input, layout(input.rows_are_samples))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = to_json(value)?;
    match out {
        Some(p) => fs::write(p, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn points_of(m: &DataMatrix, orientation: Orientation) -> Matrix {
    match orientation {
        Orientation::ClusterSamples => m.values().transpose(),
        Orientation::ClusterVariables => m.values().clone(),
    }
}

#[derive(Serialize)]
struct Header<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a PipelineConfig,
    n_vars: usize,
    n_samples: usize,
}

fn header<'a>(command: &'static str, cfg: &'a PipelineConfig, m: &DataMatrix) -> Header<'a> {
    Header { schema_version: SCHEMA_VERSION, command, config: cfg, n_vars: m.n_vars(), n_samples: m.n_samples() }
}

#[derive(Serialize)]
struct ConditionOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    input: ConditionReport,
    standardized: ConditionReport,
}

#[derive(Serialize)]
struct EmdOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    passthrough_rows: Vec<usize>,
    condition_before: ConditionReport,
    condition_after: ConditionReport,
}

#[derive(Serialize)]
struct PcaOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    criterion: String,
    status: &'static str,
    wishart: WishartSection,
    #[serde(serialize_with = "ser_sig6_vec")]
    eigenvalues: Vec<f64>,
    selected: Vec<usize>,
    #[serde(serialize_with = "ser_sig6")]
    explained_fraction: f64,
    scores_condition: Option<ConditionReport>,
}

#[derive(Serialize)]
struct KmeansOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    k: usize,
    #[serde(serialize_with = "ser_sig6")]
    objective_j: f64,
    iterations: usize,
    cluster_sizes: Vec<usize>,
    assignments: Vec<usize>,
}

#[derive(Serialize)]
struct SweepOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    k_values: Vec<usize>,
    #[serde(serialize_with = "ser_sig6_vec")]
    db_scores: Vec<f64>,
    optimal_k: usize,
}

#[derive(Serialize)]
struct TheoremOut<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    status: &'static str,
    #[serde(flatten)]
    verdict: Option<TheoremVerdict>,
}

#[derive(Serialize)]
struct BatchOut {
    schema_version: u32,
    replicates: Vec<ExperimentReport>,
}

#[derive(Serialize)]
struct SynthOut {
    schema_version: u32,
    command: &'static str,
    files: Vec<String>,
    labels: Vec<Vec<usize>>,
}

fn parse_select(s: &str) -> Result<SelectionCriterion> {
    match s {
        "kaiser" => Ok(SelectionCriterion::Kaiser),
        "wishart" => Ok(SelectionCriterion::Wishart),
        _ => s
            .strip_prefix("top:")
            .and_then(|c| c.parse().ok())
            .filter(|&c: &usize| c > 0)
            .map(SelectionCriterion::TopC)
            .ok_or_else(|| Error::InvalidConfig(format!("--select must be kaiser, wishart or top:C, got {s:?}"))),
    }
}

fn variants_for(arg: Option<VariantArg>, cfg: &PipelineConfig) -> Vec<Variant> {
    match arg {
        None => cfg.variants.clone(),
        Some(VariantArg::All) => Variant::ALL.to_vec(),
        Some(VariantArg::Raw) => vec![Variant::Raw],
        Some(VariantArg::Emd) => vec![Variant::Emd],
        Some(VariantArg::PcaK) => vec![Variant::PcaKaiser],
        Some(VariantArg::PcaW) => vec![Variant::PcaWishart],
    }
}

/// Returns the exit code for outcomes that are reported rather than raised.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Cmd::Condition { input, common } => {
            let cfg = load_config(&common)?;
            let m = load(&input)?;
            let out = ConditionOut {
                header: header("condition", &cfg, &m),
                input: condition_number(m.values())?,
                standardized: condition_number(standardize(&m)?.values())?,
            };
            emit(&out, common.out.as_deref())?;
        }
        Cmd::Emd { input, common, csv_out } => {
            let cfg = load_config(&common)?;
            let m = load(&input)?;
            let z = standardize(&m)?;
            let imf = first_imf_matrix(&z, &cfg.emd())?;
            let after = standardize(&imf.matrix)?;
            if let Some(p) = csv_out {
                write_csv(&after, &p)?;
            }
            let out = EmdOut {
                header: header("emd", &cfg, &m),
                passthrough_rows: imf.passthrough_rows,
                condition_before: condition_number(z.values())?,
                condition_after: condition_number(after.values())?,
            };
            emit(&out, common.out.as_deref())?;
        }
        Cmd::Pca { input, common, select, csv_out } => {
            let cfg = load_config(&common)?;
            let criterion = parse_select(&select)?;
            let m = load(&input)?;
            let z = standardize(&m)?;
            let spectrum = correlation_spectrum(&z)?;
            let bound = wishart_bound(z.n_vars(), z.n_samples());
            let selected = match criterion {
                SelectionCriterion::Kaiser => select_kaiser_with(&spectrum, cfg.kaiser_inclusive),
                SelectionCriterion::Wishart => select_wishart_with(&spectrum, &bound, cfg.wishart_strict),
                SelectionCriterion::TopC(c) => {
                    if c > spectrum.len() {
                        return Err(Error::IndexOutOfRange { index: c - 1, n: spectrum.len() });
                    }
                    (0..c).collect()
                }
            };
            let mut out = PcaOut {
                header: header("pca", &cfg, &m),
                criterion: select,
                status: "ok",
                wishart: bound.into(),
                eigenvalues: spectrum.eigenvalues().to_vec(),
                selected: selected.clone(),
                explained_fraction: 0.0,
                scores_condition: None,
            };
            if selected.is_empty() {
                out.status = NO_INFORMATIVE_COMPONENTS;
                emit(&out, common.out.as_deref())?;
                return Ok(4);
            }
            let red = project(&z, &spectrum, &selected, criterion, cfg.score_normalization)?;
            out.explained_fraction = red.explained_fraction;
            out.scores_condition = Some(condition_number(&red.scores)?);
            if let Some(p) = csv_out {
                write_scores(&red.scores, &p)?;
            }
            emit(&out, common.out.as_deref())?;
        }
        Cmd::Kmeans { input, common, k } => {
            let cfg = load_config(&common)?;
            let m = load(&input)?;
            let points = points_of(&standardize(&m)?, cfg.orientation);
            let p = kmeans(&points, k, &cfg.kmeans())?;
            let out = KmeansOut {
                header: header("kmeans", &cfg, &m),
                k,
                objective_j: p.objective_j,
                iterations: p.iterations,
                cluster_sizes: p.cluster_sizes(),
                assignments: p.assignments,
            };
            emit(&out, common.out.as_deref())?;
        }
        Cmd::Sweep { input, common, kmax } => {
            let mut cfg = load_config(&common)?;
            if let Some(k) = kmax {
                cfg.k_max = k;
            }
            cfg.validate()?;
            let m = load(&input)?;
            let points = points_of(&standardize(&m)?, cfg.orientation);
            let r = sweep_optimal_k(&points, cfg.k_min, cfg.k_max, &cfg.kmeans(), cfg.db_params())?;
            let out = SweepOut {
                header: header("sweep", &cfg, &m),
                k_values: r.k_values,
                db_scores: r.db_scores,
                optimal_k: r.optimal_k,
            };
            emit(&out, common.out.as_deref())?;
        }
        Cmd::Pipeline { inputs, rows_are_samples, common, variant, plots } => {
            let mut cfg = load_config(&common)?;
            cfg.variants = variants_for(variant, &cfg);
            let mut reports = Vec::with_capacity(inputs.len());
            for path in &inputs {
                let m = read_csv(path, layout(rows_are_samples))?;
                let run = run_pipeline(&m, &cfg)?;
                reports.push(ExperimentReport::from_run(&run, Some(path.display().to_string()))?);
            }
            if let Some(dir) = plots {
                export_plot_data(&reports, &dir)?;
            }
            if reports.len() == 1 {
                emit(&reports[0], common.out.as_deref())?;
            } else {
                emit(&BatchOut { schema_version: SCHEMA_VERSION, replicates: reports }, common.out.as_deref())?;
            }
        }
        Cmd::Theorem { input, common } => {
            let mut cfg = load_config(&common)?;
            for v in [Variant::PcaKaiser, Variant::PcaWishart] {
                if !cfg.variants.contains(&v) {
                    cfg.variants.push(v);
                }
            }
            let m = load(&input)?;
            let run = run_pipeline(&m, &cfg)?;
            let (status, verdict, code) = match TheoremVerdict::from_run(&run) {
                Ok(v) => ("ok", Some(v), 0),
                Err(Error::EmptyWishartSelection { .. }) => (NO_INFORMATIVE_COMPONENTS, None, 4),
                Err(e) => return Err(e),
            };
            emit(&TheoremOut { header: header("theorem", &cfg, &m), status, verdict }, common.out.as_deref())?;
            return Ok(code);
        }
        Cmd::Synth { common, kind, vars, samples, k, separation, noise, replicates } => {
            let cfg = load_config(&common)?;
            if replicates == 0 {
                return Err(Error::InvalidConfig("replicates must be >= 1".into()));
            }
            let seeds: Vec<u64> = (0..replicates as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
            let data = par::map_slice(&seeds, |&seed| -> Result<SyntheticData> {
                let blobs = BlobSpec { n_vars: vars, n_samples: samples, true_k: k, separation, noise_sd: noise, seed };
                match kind {
                    SynthKind::Blobs => generate_synthetic(vars, samples, k, separation, noise, seed),
                    SynthKind::FmriLike => generate_fmri_like(&FmriLikeSpec { blobs, ..FmriLikeSpec::new(seed) }),
                }
            });
            let out = common.out.clone().ok_or_else(|| Error::InvalidConfig("synth needs --out".into()))?;
            let mut files = Vec::new();
            let mut labels = Vec::new();
            for (r, d) in data.into_iter().enumerate() {
                let d = d?;
                let path = if replicates == 1 {
                    out.clone()
                } else {
                    fs::create_dir_all(&out)?;
                    out.join(format!("rep_{r:03}.csv"))
                };
                write_csv(&d.matrix, &path)?;
                files.push(path.display().to_string());
                labels.push(d.labels);
            }
            let meta = SynthOut { schema_version: SCHEMA_VERSION, command: "synth", files, labels };
            let meta_path = if replicates == 1 { out.with_extension("labels.json") } else { out.join("labels.json") };
            fs::write(meta_path, to_json(&meta)?)?;
        }
    }
    Ok(0)
}

/// Scores may have a single row, which a `DataMatrix` rejects.
fn write_scores(scores: &Matrix, path: &Path) -> Result<()> {
    let body: String = scores
        .iter_rows()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(path, body)?;
    Ok(())
}

fn main() -> ExitCode {
    par::init_global_pool_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("illclust: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
