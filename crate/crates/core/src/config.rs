//! Pipeline configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::emd::EmdConfig;
use crate::error::{Error, Result};
use crate::kmeans::KMeansConfig;
use crate::pca::ScoreNormalization;
use crate::validity::DbParams;

/// The four data-reduction variants, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Variant {
    #[serde(rename = "RAW")]
    Raw,
    #[serde(rename = "EMD")]
    Emd,
    #[serde(rename = "PCA_K")]
    PcaKaiser,
    #[serde(rename = "PCA_W")]
    PcaWishart,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Raw, Variant::Emd, Variant::PcaKaiser, Variant::PcaWishart];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Emd => "emd",
            Variant::PcaKaiser => "pca-k",
            Variant::PcaWishart => "pca-w",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Raw => "RAW",
            Variant::Emd => "EMD",
            Variant::PcaKaiser => "PCA_K",
            Variant::PcaWishart => "PCA_W",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "raw" => Ok(Variant::Raw),
            "emd" => Ok(Variant::Emd),
            "pca-k" => Ok(Variant::PcaKaiser),
            "pca-w" => Ok(Variant::PcaWishart),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

/// Which axis of the N x T matrix supplies the clustered points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// The T time points are points in variable (or component) space.
    #[default]
    ClusterSamples,
    /// The N variables are points in sample space.
    ClusterVariables,
}

/// Matrix the PCA variants decompose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaInput {
    /// The EMD variant's output (RAW -> EMD -> PCA chain).
    #[default]
    Emd,
    /// The standardized input, skipping EMD.
    Standardized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub variants: Vec<Variant>,
    pub kaiser_inclusive: bool,
    pub wishart_strict: bool,
    pub score_normalization: ScoreNormalization,
    pub pca_input: PcaInput,
    pub k_min: usize,
    pub k_max: usize,
    pub db_p: u32,
    pub db_q: u32,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub emd_max_imfs: usize,
    pub emd_sd_threshold: f64,
    pub emd_max_sifts: usize,
    pub similarity_tolerance: usize,
    pub orientation: Orientation,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let emd = EmdConfig::default();
        let km = KMeansConfig::default();
        Self {
            variants: Variant::ALL.to_vec(),
            kaiser_inclusive: true,
            wishart_strict: true,
            score_normalization: ScoreNormalization::Raw,
            pca_input: PcaInput::Emd,
            k_min: 2,
            k_max: 10,
            db_p: 2,
            db_q: 2,
            seed: km.seed,
            restarts: km.restarts,
            max_iters: km.max_iters,
            emd_max_imfs: emd.max_imfs,
            emd_sd_threshold: emd.sd_threshold,
            emd_max_sifts: emd.max_sifts,
            similarity_tolerance: 1,
            orientation: Orientation::ClusterSamples,
        }
    }
}

const KEYS: [&str; 17] = [
    "variants",
    "kaiser_inclusive",
    "wishart_strict",
    "score_normalization",
    "pca_input",
    "k_min",
    "k_max",
    "db_p",
    "db_q",
    "seed",
    "restarts",
    "max_iters",
    "emd_max_imfs",
    "emd_sd_threshold",
    "emd_max_sifts",
    "similarity_tolerance",
    "orientation",
];

impl PipelineConfig {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig { seed: self.seed, restarts: self.restarts, max_iters: self.max_iters }
    }

    pub fn emd(&self) -> EmdConfig {
        EmdConfig { max_imfs: self.emd_max_imfs, sd_threshold: self.emd_sd_threshold, max_sifts: self.emd_max_sifts }
    }

    pub fn db_params(&self) -> DbParams {
        DbParams { q: self.db_q, p: self.db_p }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.variants.is_empty() {
            return bad("at least one variant is required".into());
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return bad(format!("need 2 <= k_min <= k_max, got {}..{}", self.k_min, self.k_max));
        }
        if self.db_p == 0 || self.db_q == 0 {
            return bad("db_p and db_q must be >= 1".into());
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return bad("restarts and max_iters must be >= 1".into());
        }
        if self.emd_max_imfs == 0 || self.emd_max_sifts == 0 {
            return bad("emd_max_imfs and emd_max_sifts must be >= 1".into());
        }
        if !(self.emd_sd_threshold > 0.0 && self.emd_sd_threshold.is_finite()) {
            return bad(format!("emd_sd_threshold must be positive, got {}", self.emd_sd_threshold));
        }
        Ok(())
    }

    /// Render as `key = value` lines in a fixed order.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.value_of(key));
        }
        s
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "variants" => self.variants.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(","),
            "kaiser_inclusive" => self.kaiser_inclusive.to_string(),
            "wishart_strict" => self.wishart_strict.to_string(),
            "score_normalization" => match self.score_normalization {
                ScoreNormalization::Raw => "raw".into(),
                ScoreNormalization::UnitVariance => "unit_variance".into(),
            },
            "pca_input" => match self.pca_input {
                PcaInput::Emd => "emd".into(),
                PcaInput::Standardized => "standardized".into(),
            },
            "k_min" => self.k_min.to_string(),
            "k_max" => self.k_max.to_string(),
            "db_p" => self.db_p.to_string(),
            "db_q" => self.db_q.to_string(),
            "seed" => self.seed.to_string(),
            "restarts" => self.restarts.to_string(),
            "max_iters" => self.max_iters.to_string(),
            "emd_max_imfs" => self.emd_max_imfs.to_string(),
            "emd_sd_threshold" => format!("{:?}", self.emd_sd_threshold),
            "emd_max_sifts" => self.emd_max_sifts.to_string(),
            "similarity_tolerance" => self.similarity_tolerance.to_string(),
            "orientation" => match self.orientation {
                Orientation::ClusterSamples => "cluster_samples".into(),
                Orientation::ClusterVariables => "cluster_variables".into(),
            },
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let err = |what: &str| Error::InvalidConfig(format!("{key}: cannot parse {value:?} as {what}"));
        let int = || value.parse::<usize>().map_err(|_| err("an integer"));
        let boolean = || value.parse::<bool>().map_err(|_| err("true/false"));
        match key.trim() {
            "variants" => {
                self.variants = value.split(',').filter(|s| !s.trim().is_empty()).map(Variant::from_str).collect::<Result<_>>()?;
            }
            "kaiser_inclusive" => self.kaiser_inclusive = boolean()?,
            "wishart_strict" => self.wishart_strict = boolean()?,
            "score_normalization" => {
                self.score_normalization = match value {
                    "raw" => ScoreNormalization::Raw,
                    "unit_variance" => ScoreNormalization::UnitVariance,
                    _ => return Err(err("raw|unit_variance")),
                }
            }
            "pca_input" => {
                self.pca_input = match value {
                    "emd" => PcaInput::Emd,
                    "standardized" => PcaInput::Standardized,
                    _ => return Err(err("emd|standardized")),
                }
            }
            "k_min" => self.k_min = int()?,
            "k_max" => self.k_max = int()?,
            "db_p" => self.db_p = value.parse().map_err(|_| err("an integer"))?,
            "db_q" => self.db_q = value.parse().map_err(|_| err("an integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| err("an unsigned integer"))?,
            "restarts" => self.restarts = int()?,
            "max_iters" => self.max_iters = int()?,
            "emd_max_imfs" => self.emd_max_imfs = int()?,
            "emd_sd_threshold" => self.emd_sd_threshold = value.parse().map_err(|_| err("a number"))?,
            "emd_max_sifts" => self.emd_max_sifts = int()?,
            "similarity_tolerance" => self.similarity_tolerance = int()?,
            "orientation" => {
                self.orientation = match value {
                    "cluster_samples" => Orientation::ClusterSamples,
                    "cluster_variables" => Orientation::ClusterVariables,
                    _ => return Err(err("cluster_samples|cluster_variables")),
                }
            }
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a config file body. Unspecified keys keep their defaults;
    /// blank lines and `#` comments are ignored.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
