//! Versioned run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anneal::{ConvergenceProtocol, Schedule};
use crate::error::{Error, Result};
use crate::event::{generate_event, Event, GeneratorConfig};
use crate::preprocess::{calibrate, train_kde, Calibration, KdeConfig, DEFAULT_MAX_DEGREE, N_SECTORS};
use crate::qubo::{QuboMode, QuboParams};
use crate::tracking::{BinVariable, MatchRule, DEFAULT_MIN_HITS};

pub const CONFIG_VERSION: u32 = 1;

/// Events used to train the KDE and freeze the candidate threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub n_events: usize,
    /// Calibration event `i` is generated with seed `seed + i`.
    pub seed: u64,
    /// Load a frozen calibration from here instead of generating one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { n_events: 10, seed: 1_000_000, path: None }
    }
}

/// How a sector's candidates are split into independent QUBOs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// Components of the graph whose links are the alignment rewards.
    #[default]
    Links,
    /// Per-hit degree cap on prior bias, then components over shared hits.
    Degree,
    /// One QUBO per sector.
    Sector,
}

impl std::str::FromStr for Decomposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "links" => Ok(Decomposition::Links),
            "degree" => Ok(Decomposition::Degree),
            "sector" => Ok(Decomposition::Sector),
            other => Err(Error::Config(format!("unknown decomposition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Governs every random draw of a run.
    pub seed: u64,
    pub qubo: QuboParams,
    pub mode: QuboMode,
    /// Anneal per sub-graph. When false the whole candidate set becomes one
    /// QUBO, refused above [`UNPARTITIONED_LIMIT`] variables.
    pub partition: bool,
    pub schedule: Schedule,
    pub runs: usize,
    pub protocol: ConvergenceProtocol,
    pub n_sectors: usize,
    pub target_recall: f64,
    pub decomposition: Decomposition,
    /// Degree cap of the `degree` decomposition.
    pub max_degree: usize,
    /// Links kept per edge by the `links` decomposition; unlimited when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_links: Option<usize>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub min_hits: usize,
    pub match_rule: MatchRule,
    /// Bin edges per variable name (`pt`, `length`, `phi`, `eta`).
    pub bins: BTreeMap<String, Vec<f64>>,
    pub calibration: CalibrationConfig,
    pub generator: GeneratorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub output: PathBuf,
}

/// Largest QUBO annealed without partitioning.
pub const UNPARTITIONED_LIMIT: usize = 2000;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let bins = BTreeMap::from([
            ("pt".to_string(), vec![2.0, 3.0, 4.5, 7.0, 11.0, 20.0]),
            ("length".to_string(), vec![3.0, 5.0, 7.0, 9.0, 11.0, 13.0]),
            ("phi".to_string(), linspace(-PI, PI, 8)),
            ("eta".to_string(), linspace(-1.0, 1.0, 8)),
        ]);
        PipelineConfig {
            version: CONFIG_VERSION,
            seed: 0,
            qubo: QuboParams::default(),
            mode: QuboMode::Full,
            partition: true,
            schedule: Schedule::default(),
            runs: 1000,
            protocol: ConvergenceProtocol::default(),
            n_sectors: N_SECTORS,
            target_recall: 0.93,
            decomposition: Decomposition::Links,
            max_degree: DEFAULT_MAX_DEGREE,
            max_links: None,
            threads: 0,
            min_hits: DEFAULT_MIN_HITS,
            match_rule: MatchRule::Majority,
            bins,
            calibration: CalibrationConfig::default(),
            generator: GeneratorConfig::default(),
            input: None,
            output: PathBuf::from("run"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        self.qubo.validate()?;
        self.schedule.validate()?;
        self.generator.validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.n_sectors < 2 {
            return Err(Error::Config(format!("n_sectors = {} must be at least 2", self.n_sectors)));
        }
        if !(self.target_recall > 0.0 && self.target_recall <= 1.0) {
            return Err(Error::Config(format!("target_recall = {} outside (0, 1]", self.target_recall)));
        }
        if self.max_degree == 0 || self.max_links == Some(0) {
            return Err(Error::Config("max_degree and max_links must be at least 1".into()));
        }
        if self.min_hits < 2 {
            return Err(Error::Config("min_hits must be at least 2".into()));
        }
        let p = &self.protocol;
        if p.long_sweeps == 0 || p.long_runs == 0 || p.samples == 0 || p.max_sweeps == 0 {
            return Err(Error::Config("protocol counts must be positive".into()));
        }
        if self.calibration.path.is_none() && self.calibration.n_events == 0 {
            return Err(Error::Config("calibration needs events or a frozen calibration file".into()));
        }
        self.bin_specs()?;
        Ok(())
    }

    /// Parsed binning, in variable-name order.
    pub fn bin_specs(&self) -> Result<Vec<(BinVariable, Vec<f64>)>> {
        self.bins
            .iter()
            .map(|(name, edges)| {
                let v: BinVariable = name.parse()?;
                if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config(format!("bin edges for {name} must increase strictly")));
                }
                Ok((v, edges.clone()))
            })
            .collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn calibration_events(&self) -> Result<Vec<Event>> {
        (0..self.calibration.n_events)
            .map(|i| {
                let g = self.generator.clone().with_seed(self.calibration.seed + i as u64);
                Ok(crate::event::dedup_hits(&generate_event(&g)?))
            })
            .collect()
    }

    /// Load the frozen calibration or build one from generated events.
    pub fn calibration(&self) -> Result<Calibration> {
        if let Some(p) = &self.calibration.path {
            return Calibration::load(p);
        }
        let events = self.calibration_events()?;
        let model = train_kde(&events, &KdeConfig::default())?;
        calibrate(model, &events, self.target_recall)
    }
}

/// Derive an independent seed for a unit of work.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut x = seed;
    for p in parts {
        x = splitmix(x ^ splitmix(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
