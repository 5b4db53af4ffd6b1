//! Loading run reports, fitting them, and emitting plot tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rqc_peps::analysis::{
    aggregate_instances, error_per_gate, fit_scaling, fit_three_stage, mps_error_reference,
    ErrorReport, FidelityKind, ScalingFit, ScalingPoint, Series, ThreeStageFit,
};
use rqc_peps::circuit::Lattice;
use serde::Serialize;

use crate::experiment::{load_job, JobReport, Manifest};
use crate::table::{opt_real, real, Table};
use crate::{write_file, CliError, RunConfig};

/// Reads the manifest under `dir` and every job it lists.
pub fn load_reports(dir: &Path) -> Result<(Manifest, Vec<JobReport>), CliError> {
    let manifest = Manifest::read(dir)?;
    let jobs = manifest
        .jobs
        .iter()
        .map(|entry| load_job(dir, entry))
        .collect::<Result<_, _>>()?;
    Ok((manifest, jobs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlotKind {
    FidelityVsDepth,
    EpsilonVsChi,
    Spectra,
    Entropy,
    NxebScatter,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        Self::FidelityVsDepth,
        Self::EpsilonVsChi,
        Self::Spectra,
        Self::Entropy,
        Self::NxebScatter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FidelityVsDepth => "fidelity_vs_depth",
            Self::EpsilonVsChi => "epsilon_vs_chi",
            Self::Spectra => "spectra",
            Self::Entropy => "entropy",
            Self::NxebScatter => "nxeb_scatter",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown plot kind {s:?}")))
    }
}

/// Mean and sample std of `values`; std is absent for a single value.
fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    if values.len() < 2 {
        return (values.first().copied().unwrap_or(f64::NAN), None);
    }
    let series: Vec<Series> = values
        .iter()
        .map(|&v| Series { depths: vec![0], values: vec![v] })
        .collect();
    let agg = aggregate_instances(&series).expect("aligned single-depth series");
    (agg.mean[0], Some(agg.std[0]))
}

fn by_chi(reports: &[JobReport]) -> BTreeMap<usize, Vec<&JobReport>> {
    let mut map: BTreeMap<usize, Vec<&JobReport>> = BTreeMap::new();
    for r in reports {
        map.entry(r.chi).or_default().push(r);
    }
    for v in map.values_mut() {
        v.sort_by_key(|r| r.instance);
    }
    map
}

/// Builds the table behind one figure kind. Every row carries the bond
/// dimension and depth it belongs to; aggregated columns average fidelities
/// (not their logarithms) over instances.
pub fn emit_plot_data(
    cfg: &RunConfig,
    reports: &[JobReport],
    kind: PlotKind,
) -> Result<Table, CliError> {
    let lattice = Lattice::new(cfg.rows, cfg.cols)?;
    let groups = by_chi(reports);
    let table = match kind {
        PlotKind::FidelityVsDepth => {
            let mut t = Table::new(&[
                "chi", "depth", "n_2qg", "fapx_mean", "fapx_std", "fex_mean", "fex_std", "instances",
            ]);
            for (chi, jobs) in &groups {
                for depth in 0..=cfg.depth {
                    let fapx: Vec<f64> =
                        jobs.iter().filter_map(|j| j.log_fapx_at(depth)).map(f64::exp).collect();
                    if fapx.is_empty() {
                        continue;
                    }
                    let fex: Vec<f64> = jobs
                        .iter()
                        .filter_map(|j| j.oracle_at(depth).and_then(|o| o.f_ex))
                        .collect();
                    let (am, asd) = mean_std(&fapx);
                    let (em, esd) = if fex.is_empty() { (None, None) } else {
                        let (m, s) = mean_std(&fex);
                        (Some(m), s)
                    };
                    t.push(vec![
                        chi.to_string(),
                        depth.to_string(),
                        lattice.gate_count(depth).to_string(),
                        real(am),
                        opt_real(asd),
                        opt_real(em),
                        opt_real(esd),
                        fapx.len().to_string(),
                    ])?;
                }
            }
            t
        }
        PlotKind::EpsilonVsChi => {
            let mut t = Table::new(&[
                "chi", "depth", "n_2qg", "epsilon", "epsilon_std", "mps_reference", "instances",
            ]);
            let depth = cfg.depth;
            let n_2qg = lattice.gate_count(depth);
            if n_2qg > 0 {
                for (chi, jobs) in &groups {
                    let fapx: Vec<f64> =
                        jobs.iter().filter_map(|j| j.log_fapx_at(depth)).map(f64::exp).collect();
                    if fapx.is_empty() {
                        continue;
                    }
                    let per: Vec<f64> = fapx
                        .iter()
                        .map(|&f| error_per_gate(f.min(1.0), n_2qg))
                        .collect::<Result<_, _>>()?;
                    let (mean_f, _) = mean_std(&fapx);
                    let (_, sd) = mean_std(&per);
                    t.push(vec![
                        chi.to_string(),
                        depth.to_string(),
                        n_2qg.to_string(),
                        real(error_per_gate(mean_f.min(1.0), n_2qg)?),
                        opt_real(sd),
                        real(mps_error_reference(lattice.n_sites(), *chi, depth)),
                        fapx.len().to_string(),
                    ])?;
                }
            }
            t
        }
        PlotKind::Spectra => {
            let mut t = Table::new(&["instance", "chi", "edge", "k", "lambda_rescaled"]);
            for (chi, jobs) in &groups {
                for j in jobs {
                    for (edge, lam) in j.spectra.iter().enumerate() {
                        let top = lam.iter().copied().fold(0.0, f64::max);
                        if top <= 0.0 {
                            continue;
                        }
                        for (k, v) in lam.iter().enumerate() {
                            t.push(vec![
                                j.instance.to_string(),
                                chi.to_string(),
                                edge.to_string(),
                                k.to_string(),
                                real(v / top),
                            ])?;
                        }
                    }
                }
            }
            t
        }
        PlotKind::Entropy => {
            let mut t = Table::new(&["depth", "cut", "entropy_mean", "entropy_std", "bound", "instances"]);
            // the exact state does not depend on χ, so one job per instance suffices
            let mut first: BTreeMap<usize, &JobReport> = BTreeMap::new();
            for r in reports {
                first.entry(r.instance).or_insert(r);
            }
            let n = lattice.n_sites();
            for depth in cfg.checkpoints() {
                for cut in 1..n {
                    let vals: Vec<f64> = first
                        .values()
                        .filter_map(|j| j.oracle_at(depth))
                        .filter_map(|o| o.entropy_profile.get(cut - 1).copied())
                        .collect();
                    if vals.is_empty() {
                        continue;
                    }
                    let (m, sd) = mean_std(&vals);
                    t.push(vec![
                        depth.to_string(),
                        cut.to_string(),
                        real(m),
                        opt_real(sd),
                        cut.min(n - cut).to_string(),
                        vals.len().to_string(),
                    ])?;
                }
            }
            t
        }
        PlotKind::NxebScatter => {
            let mut t = Table::new(&[
                "chi", "depth", "fex_mean", "fex_std", "fnxeb_mean", "fnxeb_std", "instances",
            ]);
            for (chi, jobs) in &groups {
                for depth in cfg.checkpoints() {
                    let pairs: Vec<(f64, f64)> = jobs
                        .iter()
                        .filter_map(|j| j.oracle_at(depth))
                        .filter_map(|o| Some((o.f_ex?, o.f_nxeb?)))
                        .collect();
                    if pairs.is_empty() {
                        continue;
                    }
                    let fex: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                    let fx: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                    let (em, esd) = mean_std(&fex);
                    let (xm, xsd) = mean_std(&fx);
                    t.push(vec![
                        chi.to_string(),
                        depth.to_string(),
                        real(em),
                        opt_real(esd),
                        real(xm),
                        opt_real(xsd),
                        pairs.len().to_string(),
                    ])?;
                }
            }
            t
        }
    };
    if table.is_empty() {
        return Err(CliError::EmptyOutput(format!("no data for {kind}")));
    }
    Ok(table)
}

/// Writes `plots/<kind>.csv` under `dir` and returns its path.
pub fn write_plot_data(dir: &Path, kind: PlotKind) -> Result<PathBuf, CliError> {
    let (manifest, reports) = load_reports(dir)?;
    let table = emit_plot_data(&manifest.config, &reports, kind)?;
    let path = dir.join("plots").join(format!("{kind}.csv"));
    table.write(&path)?;
    Ok(path)
}

/// A fit result or the reason it could not be made.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Fit(T),
    Failed(String),
}

impl<T, E: fmt::Display> From<Result<T, E>> for Outcome<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Self::Fit(v),
            Err(e) => Self::Failed(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSummary {
    pub chi: usize,
    pub instances: usize,
    pub approx_fit: Outcome<ThreeStageFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_fit: Option<Outcome<ThreeStageFit>>,
    /// Error per gate from the instance-mean `F_apx`.
    pub errors: ErrorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub config_hash: String,
    pub per_chi: Vec<ChiSummary>,
    pub scaling: Outcome<ScalingFit>,
}

fn mean_log(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| (v.iter().sum::<f64>() / v.len() as f64).ln())
}

/// Fits the three-stage law per χ (to `F_apx`, and to `F_ex` where the oracle
/// ran) and the scaling law over all χ at depths that are multiples of 4.
pub fn analyze(cfg: &RunConfig, reports: &[JobReport]) -> Result<AnalysisSummary, CliError> {
    let lattice = Lattice::new(cfg.rows, cfg.cols)?;
    let n = lattice.n_sites();
    let mut per_chi = Vec::new();
    let mut points = Vec::new();
    for (chi, jobs) in by_chi(reports) {
        let approx: Vec<(usize, f64)> = (1..=cfg.depth)
            .filter_map(|d| {
                mean_log(jobs.iter().filter_map(|j| j.log_fapx_at(d)).map(f64::exp)).map(|l| (d, l))
            })
            .collect();
        let exact: Vec<(usize, f64)> = cfg
            .checkpoints()
            .into_iter()
            .filter_map(|d| {
                mean_log(jobs.iter().filter_map(|j| j.oracle_at(d).and_then(|o| o.f_ex))).map(|l| (d, l))
            })
            .collect();
        let as_f = |s: &[(usize, f64)]| s.iter().map(|&(d, l)| (d as f64, l)).collect::<Vec<_>>();
        let errors = ErrorReport::from_log_fidelities(&lattice, &approx)?;
        for row in &errors.rows {
            if row.depth % 4 == 0 {
                points.push(ScalingPoint { chi, depth: row.depth, epsilon: row.epsilon });
            }
        }
        per_chi.push(ChiSummary {
            chi,
            instances: jobs.len(),
            approx_fit: fit_three_stage(&as_f(&approx), n, FidelityKind::Approx).into(),
            exact_fit: (!exact.is_empty())
                .then(|| fit_three_stage(&as_f(&exact), n, FidelityKind::Exact).into()),
            errors,
        });
    }
    Ok(AnalysisSummary {
        config_hash: cfg.hash(),
        per_chi,
        scaling: fit_scaling(&points, n).into(),
    })
}

/// Runs [`analyze`] on the reports under `dir` and writes `analysis.json`.
pub fn write_analysis(dir: &Path) -> Result<(AnalysisSummary, PathBuf), CliError> {
    let (manifest, reports) = load_reports(dir)?;
    let summary = analyze(&manifest.config, &reports)?;
    let path = dir.join("analysis.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    Ok((summary, path))
}
