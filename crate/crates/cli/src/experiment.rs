//! Running PEPS jobs alongside the exact oracle and writing their reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rqc_peps::circuit::{generate_instance, CircuitInstance};
use rqc_peps::oracle::{
    entanglement_entropy, nxeb, peps_amplitudes, ptd_distance, state_fidelity, StateVector,
};
use rqc_peps::peps::{EngineConfig, LayerRecord, PepsState};
use serde::{Deserialize, Serialize};

use crate::table::{list, opt_real, parse_cell, parse_list, parse_opt_real, real, Table};
use crate::{write_file, CliError, RunConfig};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// One row of a fidelity trace. Row `t = 0` is the initial product state.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub log_fapx: f64,
    pub log_factor: f64,
    pub max_bond: usize,
    pub gauge_residual: Option<f64>,
    /// `(edge, discarded weight)` per two-qubit gate.
    pub discarded: Vec<(usize, f64)>,
    /// Bond dimension of every edge after the layer.
    pub bonds: Vec<usize>,
}

impl TraceRow {
    fn initial(n_edges: usize) -> Self {
        Self {
            t: 0,
            log_fapx: 0.0,
            log_factor: 0.0,
            max_bond: 1,
            gauge_residual: None,
            discarded: Vec::new(),
            bonds: vec![1; n_edges],
        }
    }

    fn from_record(rec: &LayerRecord, bonds: Vec<usize>) -> Self {
        Self {
            t: rec.t,
            log_fapx: rec.log_fapx,
            log_factor: rec.log_factor,
            max_bond: rec.max_bond,
            gauge_residual: rec.gauge_residual,
            discarded: rec.discarded.clone(),
            bonds,
        }
    }

    pub fn fapx(&self) -> f64 {
        self.log_fapx.exp()
    }
}

/// Oracle metrics at one depth. Metrics that could not be computed are `None`
/// and `status` says why.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub depth: usize,
    pub status: String,
    pub f_ex: Option<f64>,
    pub f_nxeb: Option<f64>,
    /// KS distance of the exact output distribution to Porter–Thomas.
    pub ptd_ks: Option<f64>,
    /// Half-cut entanglement entropy of the exact state, in bits.
    pub entropy_bits: Option<f64>,
    /// Entropy across every reading-order cut `1..n`, in bits.
    pub entropy_profile: Vec<f64>,
}

impl OracleRow {
    fn refused(depth: usize, reason: &str) -> Self {
        Self {
            depth,
            status: format!("refused: {}", reason.replace([',', '\n'], ";")),
            f_ex: None,
            f_nxeb: None,
            ptd_ks: None,
            entropy_bits: None,
            entropy_profile: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobReport {
    pub instance: usize,
    pub seed: u64,
    pub chi: usize,
    pub trace: Vec<TraceRow>,
    /// `(t, wall seconds)` per layer; kept apart from the trace so traces are
    /// reproducible byte for byte.
    pub timing: Vec<(usize, f64)>,
    pub oracle: Vec<OracleRow>,
    /// `Λ` of every edge at the final depth.
    pub spectra: Vec<Vec<f64>>,
}

const TRACE_HEADER: [&str; 8] = [
    "t",
    "log_fapx",
    "fapx",
    "log_factor",
    "max_bond",
    "gauge_residual",
    "discarded",
    "bonds",
];
const TIMING_HEADER: [&str; 2] = ["t", "wall_seconds"];
const ORACLE_HEADER: [&str; 7] = [
    "depth",
    "status",
    "f_ex",
    "f_nxeb",
    "ptd_ks",
    "entropy_bits",
    "entropy_profile",
];
const SPECTRA_HEADER: [&str; 3] = ["edge", "k", "lambda"];

impl JobReport {
    pub fn trace_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&TRACE_HEADER);
        for r in &self.trace {
            t.push(vec![
                r.t.to_string(),
                real(r.log_fapx),
                real(r.fapx()),
                real(r.log_factor),
                r.max_bond.to_string(),
                opt_real(r.gauge_residual),
                list(&r.discarded, |(e, w)| format!("{e}:{}", real(*w))),
                list(&r.bonds, |b| b.to_string()),
            ])?;
        }
        Ok(t)
    }

    pub fn timing_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&TIMING_HEADER);
        for (layer, secs) in &self.timing {
            t.push(vec![layer.to_string(), real(*secs)])?;
        }
        Ok(t)
    }

    pub fn oracle_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&ORACLE_HEADER);
        for r in &self.oracle {
            t.push(vec![
                r.depth.to_string(),
                r.status.clone(),
                opt_real(r.f_ex),
                opt_real(r.f_nxeb),
                opt_real(r.ptd_ks),
                opt_real(r.entropy_bits),
                list(&r.entropy_profile, |s| real(*s)),
            ])?;
        }
        Ok(t)
    }

    pub fn spectra_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&SPECTRA_HEADER);
        for (edge, lam) in self.spectra.iter().enumerate() {
            for (k, v) in lam.iter().enumerate() {
                t.push(vec![edge.to_string(), k.to_string(), real(*v)])?;
            }
        }
        Ok(t)
    }

    pub fn log_fapx_at(&self, depth: usize) -> Option<f64> {
        self.trace.iter().find(|r| r.t == depth).map(|r| r.log_fapx)
    }

    pub fn oracle_at(&self, depth: usize) -> Option<&OracleRow> {
        self.oracle.iter().find(|r| r.depth == depth)
    }
}

pub fn parse_trace(t: &Table) -> Result<Vec<TraceRow>, CliError> {
    let col = |name| t.column(name);
    let (ct, cl, cf, cm, cr, cd, cb) = (
        col("t")?,
        col("log_fapx")?,
        col("log_factor")?,
        col("max_bond")?,
        col("gauge_residual")?,
        col("discarded")?,
        col("bonds")?,
    );
    t.rows
        .iter()
        .map(|r| {
            let discarded = if r[cd].is_empty() {
                Vec::new()
            } else {
                r[cd]
                    .split(';')
                    .map(|pair| {
                        let (e, w) = pair
                            .split_once(':')
                            .ok_or_else(|| CliError::Table(format!("bad weight entry {pair:?}")))?;
                        Ok((parse_cell(e, "edge")?, parse_cell(w, "weight")?))
                    })
                    .collect::<Result<_, CliError>>()?
            };
            Ok(TraceRow {
                t: parse_cell(&r[ct], "t")?,
                log_fapx: parse_cell(&r[cl], "log_fapx")?,
                log_factor: parse_cell(&r[cf], "log_factor")?,
                max_bond: parse_cell(&r[cm], "max_bond")?,
                gauge_residual: parse_opt_real(&r[cr])?,
                discarded,
                bonds: parse_list(&r[cb], "bond")?,
            })
        })
        .collect()
}

pub fn parse_oracle(t: &Table) -> Result<Vec<OracleRow>, CliError> {
    let (cd, cs, cf, cn, ck, ce, cp) = (
        t.column("depth")?,
        t.column("status")?,
        t.column("f_ex")?,
        t.column("f_nxeb")?,
        t.column("ptd_ks")?,
        t.column("entropy_bits")?,
        t.column("entropy_profile")?,
    );
    t.rows
        .iter()
        .map(|r| {
            Ok(OracleRow {
                depth: parse_cell(&r[cd], "depth")?,
                status: r[cs].clone(),
                f_ex: parse_opt_real(&r[cf])?,
                f_nxeb: parse_opt_real(&r[cn])?,
                ptd_ks: parse_opt_real(&r[ck])?,
                entropy_bits: parse_opt_real(&r[ce])?,
                entropy_profile: parse_list(&r[cp], "entropy")?,
            })
        })
        .collect()
}

pub fn parse_spectra(t: &Table) -> Result<Vec<Vec<f64>>, CliError> {
    let (ce, cv) = (t.column("edge")?, t.column("lambda")?);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in &t.rows {
        let edge: usize = parse_cell(&r[ce], "edge")?;
        if edge >= out.len() {
            out.resize(edge + 1, Vec::new());
        }
        out[edge].push(parse_cell(&r[cv], "lambda")?);
    }
    Ok(out)
}

/// Runs one `(instance, χ)` job: the PEPS over all layers, with the state
/// vector stepped alongside when the oracle is on.
pub fn run_job(
    cfg: &RunConfig,
    circuit: &CircuitInstance,
    instance: usize,
    chi: usize,
) -> Result<JobReport, CliError> {
    let lattice = &circuit.lattice;
    let n = lattice.n_sites();
    let engine = EngineConfig {
        gauge_sweeps: cfg.gauge_sweeps,
        track_residual: cfg.track_residual,
        ..EngineConfig::default()
    };
    let mut peps = PepsState::<f64>::with_config(lattice, chi, engine)?;
    let checkpoints = if cfg.oracle { cfg.checkpoints() } else { Vec::new() };
    let mut psi = if !cfg.oracle {
        Err(String::new())
    } else if n > cfg.qubit_cap {
        Err(format!("{n} qubits exceeds the cap of {}", cfg.qubit_cap))
    } else {
        Ok(StateVector::<f64>::zero_state(n))
    };
    let memory_cap = usize::try_from(cfg.memory_cap).unwrap_or(usize::MAX);

    let mut report = JobReport {
        instance,
        seed: circuit.seed,
        chi,
        trace: vec![TraceRow::initial(lattice.edges().len())],
        timing: Vec::new(),
        oracle: Vec::new(),
        spectra: Vec::new(),
    };
    for layer in circuit.layers.iter().take(cfg.depth) {
        let start = Instant::now();
        let rec = peps.apply_layer(layer)?.clone();
        report.trace.push(TraceRow::from_record(&rec, peps.bond_dims()));
        report.timing.push((rec.t, start.elapsed().as_secs_f64()));
        if let Ok(psi) = psi.as_mut() {
            psi.apply_layer(layer)?;
        }
        if checkpoints.contains(&rec.t) {
            report.oracle.push(match &psi {
                Ok(psi) => oracle_row(&peps, psi, rec.t, memory_cap),
                Err(reason) => OracleRow::refused(rec.t, reason),
            });
        }
    }
    report.spectra = peps.lambda_spectra();
    Ok(report)
}

fn oracle_row(peps: &PepsState<f64>, psi: &StateVector<f64>, depth: usize, cap: usize) -> OracleRow {
    let p_exact = psi.probabilities();
    let n = psi.n_qubits();
    let entropy_profile: Vec<f64> = (1..n)
        .filter_map(|cut| entanglement_entropy(psi, cut).ok().map(|e| e.entropy))
        .collect();
    let mut row = OracleRow {
        depth,
        status: "ok".into(),
        f_ex: None,
        f_nxeb: None,
        ptd_ks: Some(ptd_distance(&p_exact)),
        entropy_bits: entropy_profile.get(n / 2 - 1).copied(),
        entropy_profile,
    };
    match peps_amplitudes(peps, cap) {
        Ok(amps) => {
            row.f_ex = Some(state_fidelity(psi, &amps));
            row.f_nxeb = nxeb(&amps.probabilities(), &p_exact).ok();
        }
        Err(e) => {
            let refused = OracleRow::refused(depth, &e.to_string());
            row.status = refused.status;
        }
    }
    row
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEntry {
    pub instance: usize,
    pub seed: u64,
    pub chi: usize,
    pub instance_file: String,
    pub trace_file: String,
    pub timing_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_file: Option<String>,
    pub spectra_file: String,
}

/// Ties every output file of a run to the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub status: RunStatus,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub jobs: Vec<JobEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Manifest(format!(
                "schema version {} (expected {MANIFEST_SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

pub fn instance_file(index: usize) -> String {
    format!("instances/instance_{index:03}.json")
}

fn job_stem(instance: usize, chi: usize) -> String {
    format!("i{instance:03}_chi{chi}")
}

/// Generates and writes every instance file of `cfg`.
pub fn generate_instances(cfg: &RunConfig) -> Result<Vec<(CircuitInstance, PathBuf)>, CliError> {
    cfg.validate()?;
    (0..cfg.instances)
        .map(|i| {
            let circuit =
                generate_instance(cfg.rows, cfg.cols, cfg.depth, cfg.sequence, cfg.instance_seed(i))?;
            let path = cfg.output_dir.join(instance_file(i));
            let mut text = circuit.to_json()?;
            text.push('\n');
            write_file(&path, text.as_bytes())?;
            Ok((circuit, path))
        })
        .collect()
}

fn write_job(dir: &Path, report: &JobReport, oracle: bool) -> Result<JobEntry, CliError> {
    let stem = job_stem(report.instance, report.chi);
    let entry = JobEntry {
        instance: report.instance,
        seed: report.seed,
        chi: report.chi,
        instance_file: instance_file(report.instance),
        trace_file: format!("traces/{stem}.csv"),
        timing_file: format!("timing/{stem}.csv"),
        oracle_file: oracle.then(|| format!("oracle/{stem}.csv")),
        spectra_file: format!("spectra/{stem}.csv"),
    };
    report.trace_table()?.write(&dir.join(&entry.trace_file))?;
    report.timing_table()?.write(&dir.join(&entry.timing_file))?;
    if let Some(f) = &entry.oracle_file {
        report.oracle_table()?.write(&dir.join(f))?;
    }
    report.spectra_table()?.write(&dir.join(&entry.spectra_file))?;
    Ok(entry)
}

/// Runs every `(instance, χ)` job of `cfg` and writes the report files and
/// manifest under `cfg.output_dir`. The manifest is marked partial until all
/// jobs have been written.
pub fn run_experiment(cfg: &RunConfig) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let mut manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        status: RunStatus::Partial,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg.clone(),
        jobs: Vec::new(),
    };
    manifest.write(&dir)?;
    let circuits = generate_instances(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.instances)
        .flat_map(|i| cfg.chi.iter().map(move |&chi| (i, chi)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let results: Vec<Result<JobEntry, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, chi)| {
                let report = run_job(cfg, &circuits[i].0, i, chi)?;
                write_job(&dir, &report, cfg.oracle)
            })
            .collect()
    });
    for r in results {
        match r {
            Ok(entry) => manifest.jobs.push(entry),
            Err(e) => {
                manifest.write(&dir)?;
                return Err(e);
            }
        }
    }
    manifest.status = RunStatus::Complete;
    manifest.write(&dir)?;
    Ok(manifest)
}

/// Reads one job's report files back.
pub fn load_job(dir: &Path, entry: &JobEntry) -> Result<JobReport, CliError> {
    let trace = parse_trace(&Table::read(&dir.join(&entry.trace_file))?)?;
    let timing_table = Table::read(&dir.join(&entry.timing_file))?;
    let timing = timing_table
        .rows
        .iter()
        .map(|r| Ok((parse_cell(&r[0], "t")?, parse_cell(&r[1], "seconds")?)))
        .collect::<Result<_, CliError>>()?;
    let oracle = match &entry.oracle_file {
        Some(f) => parse_oracle(&Table::read(&dir.join(f))?)?,
        None => Vec::new(),
    };
    let spectra = parse_spectra(&Table::read(&dir.join(&entry.spectra_file))?)?;
    Ok(JobReport {
        instance: entry.instance,
        seed: entry.seed,
        chi: entry.chi,
        trace,
        timing,
        oracle,
        spectra,
    })
}
