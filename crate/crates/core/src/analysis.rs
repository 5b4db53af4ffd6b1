//! Post-processing of fidelity traces.
//!
//! Converts fidelities into an error per two-qubit gate, fits the
//! piecewise three-stage decay of `ln F` against depth, fits the
//! `ε(χ, D)` scaling law, and aggregates per-depth series over circuit
//! instances. Everything here is pure and works in `f64`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Lattice;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("fidelity {0} is outside (0, 1]")]
    Domain(f64),
    #[error("gate count must be at least 1")]
    NoGates,
    #[error("only {found} depths in the decaying stage, need at least 3")]
    Underdetermined { found: usize },
    #[error("need at least {needed} distinct bond dimensions, got {found}")]
    TooFewBondDims { found: usize, needed: usize },
    #[error("no data points with positive error")]
    Degenerate,
    #[error("need at least 2 instances, got {0}")]
    TooFewInstances(usize),
    #[error("instance {index} has a different depth grid")]
    Alignment { index: usize },
    #[error("series lengths differ: {0} depths vs {1} values")]
    Length(usize, usize),
}

/// Effective error per two-qubit gate: the `ε` with `F = (1 − ε)^n_2qg`.
pub fn error_per_gate(fidelity: f64, n_2qg: usize) -> Result<f64, AnalysisError> {
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(AnalysisError::Domain(fidelity));
    }
    error_per_gate_log(fidelity.ln(), n_2qg)
}

/// [`error_per_gate`] taking `ln F` directly, for fidelities below `f64` range.
pub fn error_per_gate_log(log_fidelity: f64, n_2qg: usize) -> Result<f64, AnalysisError> {
    if n_2qg == 0 {
        return Err(AnalysisError::NoGates);
    }
    if log_fidelity.is_nan() || log_fidelity > 0.0 {
        return Err(AnalysisError::Domain(log_fidelity.exp()));
    }
    Ok(-(log_fidelity / n_2qg as f64).exp_m1())
}

/// Inverse of [`error_per_gate`]: `ln F = n_2qg · ln(1 − ε)`.
pub fn log_fidelity_from_error(epsilon: f64, n_2qg: usize) -> f64 {
    n_2qg as f64 * (-epsilon).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub depth: usize,
    pub log_fidelity: f64,
    pub n_2qg: usize,
    pub epsilon: f64,
}

impl ErrorRow {
    pub fn fidelity(&self) -> f64 {
        self.log_fidelity.exp()
    }
}

/// Error per gate at each depth of a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Builds rows from `(depth, ln F)` pairs. Depth 0 has no gates and is skipped.
    pub fn from_log_fidelities(
        lattice: &Lattice,
        series: &[(usize, f64)],
    ) -> Result<Self, AnalysisError> {
        let mut rows = Vec::with_capacity(series.len());
        for &(depth, log_fidelity) in series {
            let n_2qg = lattice.gate_count(depth);
            if n_2qg == 0 {
                continue;
            }
            let epsilon = error_per_gate_log(log_fidelity.min(0.0), n_2qg)?;
            rows.push(ErrorRow { depth, log_fidelity, n_2qg, epsilon });
        }
        Ok(Self { rows })
    }
}

/// Which fidelity a series holds. Only the exact fidelity saturates at `2^-n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityKind {
    Exact,
    Approx,
}

/// Fitted piecewise law: flat until `d_tr`, linear decay of `ln F` with slope
/// `-epsilon_layer`, then (exact kind only) a floor at `-n ln 2` from `d_sat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeStageFit {
    pub kind: FidelityKind,
    pub n_qubits: usize,
    /// `f64::INFINITY` when the series never decays.
    pub d_tr: f64,
    pub epsilon_layer: f64,
    pub d_sat: f64,
    /// RMS of `ln F` residuals over the decaying-stage points.
    pub residual: f64,
    /// Number of points assigned to the decaying stage.
    pub decay_points: usize,
}

impl ThreeStageFit {
    pub fn never_truncates(&self) -> bool {
        self.d_tr.is_infinite()
    }

    /// Model value of `ln F` at `depth`.
    pub fn log_model(&self, depth: f64) -> f64 {
        if self.never_truncates() || depth <= self.d_tr {
            return 0.0;
        }
        let decay = -self.epsilon_layer * (depth - self.d_tr);
        match self.kind {
            FidelityKind::Exact => decay.max(-(self.n_qubits as f64) * LN_2),
            FidelityKind::Approx => decay,
        }
    }
}

/// Below this magnitude `ln F` counts as exactly zero when deciding whether a
/// series decays at all.
const FLAT_TOLERANCE: f64 = 1e-10;

/// Least-squares fit of the three-stage law to `(depth, ln F)` points.
///
/// Every split of the depth-sorted points into flat, decaying and (for the
/// exact kind) saturated runs is tried; the decaying run gets an ordinary
/// line fit and the split with the smallest total squared error of the full
/// piecewise model wins.
pub fn fit_three_stage(
    series: &[(f64, f64)],
    n_qubits: usize,
    kind: FidelityKind,
) -> Result<ThreeStageFit, AnalysisError> {
    let mut pts: Vec<(f64, f64)> = series.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    if pts.iter().all(|p| p.1.abs() <= FLAT_TOLERANCE) {
        return Ok(ThreeStageFit {
            kind,
            n_qubits,
            d_tr: f64::INFINITY,
            epsilon_layer: 0.0,
            d_sat: f64::INFINITY,
            residual: 0.0,
            decay_points: 0,
        });
    }

    let floor = -(n_qubits as f64) * LN_2;
    let len = pts.len();
    // splits whose errors differ by less than this are ties, won by the longer decay
    let tie = 1e-12 * pts.iter().map(|p| p.1 * p.1).sum::<f64>();
    let mut best: Option<(f64, ThreeStageFit)> = None;
    for start in 0..len {
        let ends: Vec<usize> = match kind {
            FidelityKind::Exact => (start + 2..=len).collect(),
            FidelityKind::Approx => vec![len],
        };
        for end in ends {
            if end < start + 2 {
                continue;
            }
            let run = &pts[start..end];
            let xs: Vec<f64> = run.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = run.iter().map(|p| p.1).collect();
            let Some(line) = linear_fit(&xs, &ys) else { continue };
            if line.slope >= 0.0 {
                continue;
            }
            let epsilon_layer = -line.slope;
            let d_tr = line.intercept / epsilon_layer;
            let fit = ThreeStageFit {
                kind,
                n_qubits,
                d_tr,
                epsilon_layer,
                d_sat: d_tr - floor / epsilon_layer,
                residual: line.rms,
                decay_points: run.len(),
            };
            let sse: f64 = pts.iter().map(|&(d, y)| (y - fit.log_model(d)).powi(2)).sum();
            let better = best.as_ref().is_none_or(|(b, prev)| {
                sse < *b - tie || (sse <= *b + tie && fit.decay_points > prev.decay_points)
            });
            if better {
                best = Some((sse, fit));
            }
        }
    }

    match best {
        Some((_, fit)) if fit.decay_points >= 3 => Ok(fit),
        Some((_, fit)) => Err(AnalysisError::Underdetermined { found: fit.decay_points }),
        None => Err(AnalysisError::Underdetermined { found: 0 }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`. `None` for fewer than
/// two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Some(LinearFit { slope, intercept, rms: (sse / n).sqrt() })
}

/// One measured error per gate at bond dimension `chi` and depth `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub chi: usize,
    pub depth: usize,
    pub epsilon: f64,
}

/// Fit of `ε(χ, D) = max(α(1 − (β/D) log₂χ), 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub beta: f64,
    /// Error per layer `α n / 2` for the lattice size the fit was given.
    pub epsilon_layer: f64,
    pub residual: f64,
    /// Points that entered the linear fit.
    pub instances: usize,
    pub n_qubits: usize,
}

impl ScalingFit {
    pub fn epsilon(&self, chi: usize, depth: f64) -> f64 {
        (self.alpha * (1.0 - self.beta * (chi as f64).log2() / depth)).max(0.0)
    }

    /// Depth at which the fitted error first becomes positive.
    pub fn truncation_depth(&self, chi: usize) -> f64 {
        self.beta * (chi as f64).log2()
    }

    pub fn saturation_depth(&self, chi: usize) -> f64 {
        self.truncation_depth(chi) + self.n_qubits as f64 / self.epsilon_layer * LN_2
    }
}

/// Fits α and β from points in the linear region `ε > 0`. Zero-error points
/// only count towards the distinct-χ requirement.
pub fn fit_scaling(points: &[ScalingPoint], n_qubits: usize) -> Result<ScalingFit, AnalysisError> {
    let mut chis: Vec<usize> = points.iter().map(|p| p.chi).collect();
    chis.sort_unstable();
    chis.dedup();
    if chis.len() < 4 {
        return Err(AnalysisError::TooFewBondDims { found: chis.len(), needed: 4 });
    }
    let live: Vec<&ScalingPoint> = points.iter().filter(|p| p.epsilon > 0.0).collect();
    if live.is_empty() {
        return Err(AnalysisError::Degenerate);
    }
    let xs: Vec<f64> = live.iter().map(|p| (p.chi as f64).log2() / p.depth as f64).collect();
    let ys: Vec<f64> = live.iter().map(|p| p.epsilon).collect();
    let line = linear_fit(&xs, &ys).ok_or(AnalysisError::Degenerate)?;
    if line.intercept <= 0.0 {
        return Err(AnalysisError::Degenerate);
    }
    let alpha = line.intercept;
    Ok(ScalingFit {
        alpha,
        beta: -line.slope / alpha,
        epsilon_layer: alpha * n_qubits as f64 / 2.0,
        residual: line.rms,
        instances: live.len(),
        n_qubits,
    })
}

/// Error per gate of an MPS with bond dimension `chi` on `n` qubits,
/// `(1/D)(ln 2 − ln(4χ)/(n/2))`, clamped at zero.
pub fn mps_error_reference(n: usize, chi: usize, depth: usize) -> f64 {
    let half = n as f64 / 2.0;
    let raw = (LN_2 - (4.0 * chi as f64).ln() / half) / depth as f64;
    raw.max(0.0)
}

/// Leading-order resource counts for a simple-update run with local
/// dimension 2 and coordination number 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// Bond projections, `D n χ^5 d²`.
    pub flops: f64,
    /// Bond SVDs, `D n χ³ d⁶`; subleading for `χ ≫ d`.
    pub svd_flops: f64,
    /// Complex entries held by the site tensors, `n χ⁴ d`.
    pub memory: f64,
}

impl CostEstimate {
    pub fn total_flops(&self) -> f64 {
        self.flops + self.svd_flops
    }
}

pub fn cost_estimate(n_r: usize, n_c: usize, chi: usize, depth: usize) -> CostEstimate {
    const D: f64 = 2.0;
    let n = (n_r * n_c) as f64;
    let chi = chi as f64;
    let depth = depth as f64;
    CostEstimate {
        flops: depth * n * chi.powi(5) * D * D,
        svd_flops: depth * n * chi.powi(3) * D.powi(6),
        memory: n * chi.powi(4) * D,
    }
}

/// Depth `(β/2) log₂ n` at which output probabilities anticoncentrate.
pub fn anticoncentration_depth(n: usize, beta: f64) -> f64 {
    beta / 2.0 * (n as f64).log2()
}

/// Coefficient `c` in `D_ac = c ln n`.
pub fn anticoncentration_coefficient(beta: f64) -> f64 {
    beta / (2.0 * LN_2)
}

/// A per-depth series from one instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub depths: Vec<usize>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(depths: Vec<usize>, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if depths.len() != values.len() {
            return Err(AnalysisError::Length(depths.len(), values.len()));
        }
        Ok(Self { depths, values })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub depths: Vec<usize>,
    pub mean: Vec<f64>,
    /// Sample standard deviation.
    pub std: Vec<f64>,
    pub instances: usize,
}

/// Elementwise mean and sample standard deviation over instances that share
/// a depth grid.
pub fn aggregate_instances(reports: &[Series]) -> Result<Aggregate, AnalysisError> {
    if reports.len() < 2 {
        return Err(AnalysisError::TooFewInstances(reports.len()));
    }
    let depths = reports[0].depths.clone();
    for (index, r) in reports.iter().enumerate() {
        if r.depths.len() != r.values.len() {
            return Err(AnalysisError::Length(r.depths.len(), r.values.len()));
        }
        if r.depths != depths {
            return Err(AnalysisError::Alignment { index });
        }
    }
    let k = reports.len() as f64;
    let mut mean = Vec::with_capacity(depths.len());
    let mut std = Vec::with_capacity(depths.len());
    for i in 0..depths.len() {
        let m = reports.iter().map(|r| r.values[i]).sum::<f64>() / k;
        let var = reports.iter().map(|r| (r.values[i] - m).powi(2)).sum::<f64>() / (k - 1.0);
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(Aggregate { depths, mean, std, instances: reports.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underdetermined_with_two_decay_points() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, -0.5), (4.0, -1.5)];
        let err = fit_three_stage(&pts, 16, FidelityKind::Approx).unwrap_err();
        assert!(matches!(err, AnalysisError::Underdetermined { .. }));
    }

    #[test]
    fn approx_kind_has_no_floor() {
        let fit = ThreeStageFit {
            kind: FidelityKind::Approx,
            n_qubits: 4,
            d_tr: 2.0,
            epsilon_layer: 1.0,
            d_sat: 0.0,
            residual: 0.0,
            decay_points: 3,
        };
        assert_eq!(fit.log_model(100.0), -98.0);
    }
}
