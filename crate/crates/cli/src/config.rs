//! Run configuration, its TOML form and its content hash.

use std::path::PathBuf;

use rqc_peps::circuit::{Lattice, SequenceKind};
use rqc_peps::oracle::{DEFAULT_MEMORY_CAP, DEFAULT_QUBIT_CAP};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable overriding [`RunConfig::output_dir`].
pub const OUTPUT_DIR_ENV: &str = "RQC_PEPS_OUTPUT_DIR";
/// Environment variable overriding [`RunConfig::threads`].
pub const THREADS_ENV: &str = "RQC_PEPS_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
    pub sequence: SequenceKind,
    pub chi: Vec<usize>,
    pub instances: usize,
    /// Instance `i` uses seed `seed + i`.
    pub seed: u64,
    pub gauge_sweeps: usize,
    pub track_residual: bool,
    pub oracle: bool,
    /// Depths at which oracle metrics are taken. Defaults to every layer for
    /// up to 16 qubits and every fourth layer otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_depths: Option<Vec<usize>>,
    /// Byte cap for the full PEPS contraction.
    pub memory_cap: u64,
    pub qubit_cap: usize,
    pub output_dir: PathBuf,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            depth: 8,
            sequence: SequenceKind::Cz,
            chi: vec![4],
            instances: 1,
            seed: 0,
            gauge_sweeps: 2,
            track_residual: true,
            oracle: true,
            oracle_depths: None,
            memory_cap: DEFAULT_MEMORY_CAP as u64,
            qubit_cap: DEFAULT_QUBIT_CAP,
            output_dir: PathBuf::from("out"),
            threads: 1,
        }
    }
}

/// The fields that determine results. Output location and thread count are
/// left out so they never change the hash.
#[derive(Serialize)]
struct HashView<'a> {
    rows: usize,
    cols: usize,
    depth: usize,
    sequence: &'a SequenceKind,
    chi: &'a [usize],
    instances: usize,
    seed: u64,
    gauge_sweeps: usize,
    track_residual: bool,
    oracle: bool,
    oracle_depths: Vec<usize>,
    memory_cap: u64,
    qubit_cap: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies the environment overrides for output directory and threads.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        if let Ok(v) = std::env::var(THREADS_ENV) {
            self.threads = v
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v} is not a count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        Lattice::new(self.rows, self.cols)?;
        self.sequence.validate()?;
        if self.chi.is_empty() || self.chi.contains(&0) {
            return Err(CliError::Config("chi list must be non-empty with entries ≥ 1".into()));
        }
        if self.instances == 0 {
            return Err(CliError::Config("instances must be ≥ 1".into()));
        }
        if self.threads == 0 {
            return Err(CliError::Config("threads must be ≥ 1".into()));
        }
        if let Some(ds) = &self.oracle_depths {
            if let Some(d) = ds.iter().find(|&&d| d > self.depth) {
                return Err(CliError::Config(format!("oracle depth {d} exceeds depth {}", self.depth)));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn instance_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    /// Depths at which oracle metrics are recorded, ascending and without 0.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut ds = match &self.oracle_depths {
            Some(ds) => ds.clone(),
            None => {
                let step = if self.n_sites() <= 16 { 1 } else { 4 };
                (1..=self.depth).filter(|d| d % step == 0).collect()
            }
        };
        ds.retain(|&d| d > 0);
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// SHA-256 of the result-determining fields, lowercase hex.
    pub fn hash(&self) -> String {
        let view = HashView {
            rows: self.rows,
            cols: self.cols,
            depth: self.depth,
            sequence: &self.sequence,
            chi: &self.chi,
            instances: self.instances,
            seed: self.seed,
            gauge_sweeps: self.gauge_sweeps,
            track_residual: self.track_residual,
            oracle: self.oracle,
            oracle_depths: self.checkpoints(),
            memory_cap: self.memory_cap,
            qubit_cap: self.qubit_cap,
        };
        let bytes = serde_json::to_vec(&view).expect("config view serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
