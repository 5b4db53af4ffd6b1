//! Vidal-gauge PEPS with simple-update evolution and gauging.
//!
//! Every site tensor carries legs `[phys, left, right, up, down]`. Legs on the
//! lattice boundary have extent 1 and an implicit `Λ = {1}`. Bond `Λ` vectors
//! live on edges and are kept sorted, strictly positive and normalized.

use std::time::Instant;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    unitarity_error, CircuitError, CircuitInstance, Gate1, Gate2, Lattice, Layer, Orientation,
};
use crate::scalar::{from_c64, to_c64, Real};
use crate::tensor::{contract, svd_truncated, DenseTensor, Leg, TensorError};

pub const PHYS: Leg = Leg(0);
pub const LEFT: Leg = Leg(1);
pub const RIGHT: Leg = Leg(2);
pub const UP: Leg = Leg(3);
pub const DOWN: Leg = Leg(4);
const SITE_LEGS: [Leg; 5] = [PHYS, LEFT, RIGHT, UP, DOWN];
const VIRTUAL: [Leg; 4] = [LEFT, RIGHT, UP, DOWN];

// scratch labels used inside one update
const BOND_I: Leg = Leg(10);
const BOND_J: Leg = Leg(11);
const PHYS_J: Leg = Leg(12);
const MID: Leg = Leg(13);
const OUT_I: Leg = Leg(14);
const OUT_J: Leg = Leg(15);
const NEW: Leg = Leg(16);

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PepsError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("sites {0} and {1} are not nearest neighbours")]
    NotAnEdge(usize, usize),
    #[error("gate is not unitary (deviation {0:e})")]
    NonUnitary(f64),
    #[error("bond dimension cap must be at least 1")]
    ZeroChi,
    #[error("layer acts on {got} sites, lattice has {expected}")]
    LayerShape { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// When gauging sweeps run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaugeSchedule {
    #[default]
    AfterLayer,
    AfterGate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub gauge_sweeps: usize,
    pub gauge_schedule: GaugeSchedule,
    /// Singular values at or below `rank_cutoff * sigma_max` are dropped in gate updates.
    pub rank_cutoff: f64,
    /// Reciprocals of `Λ` entries below `inverse_floor * sigma_max` are set to zero.
    pub inverse_floor: f64,
    pub validate_gates: bool,
    /// Compute the gauge residual after every layer (costs about one sweep).
    pub track_residual: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            gauge_sweeps: 2,
            gauge_schedule: GaugeSchedule::AfterLayer,
            rank_cutoff: 1e-12,
            inverse_floor: 1e-12,
            validate_gates: true,
            track_residual: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub t: usize,
    /// `(edge index, discarded weight)` for every two-qubit gate of the layer.
    pub discarded: Vec<(usize, f64)>,
    /// Sum of `ln(1 - w)` over this layer.
    pub log_factor: f64,
    /// Cumulative natural-log fidelity estimate after this layer.
    pub log_fapx: f64,
    pub max_bond: usize,
    pub gauge_residual: Option<f64>,
    pub wall_seconds: f64,
}

impl LayerRecord {
    pub fn fapx(&self) -> f64 {
        self.log_fapx.exp()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub layers: Vec<LayerRecord>,
}

impl FidelityTrace {
    /// `Σ ln(1 - w)` recomputed from the individual weights.
    pub fn log_fapx_from_weights(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.discarded.iter())
            .map(|(_, w)| (-w).ln_1p())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct PepsState<R: Real = f64> {
    lattice: Lattice,
    gamma: Vec<DenseTensor<R>>,
    lambda: Vec<Vec<R>>,
    chi_max: usize,
    log_fapx: f64,
    pub trace: FidelityTrace,
    pub config: EngineConfig,
}

/// Edge indices around a site, in `[left, right, up, down]` order.
fn site_bonds(lattice: &Lattice, site: usize) -> [Option<usize>; 4] {
    [
        lattice.left_edge(site),
        lattice.right_edge(site),
        lattice.up_edge(site),
        lattice.down_edge(site),
    ]
}

impl<R: Real> PepsState<R> {
    /// `|0...0>` with unit bonds.
    pub fn init_product_state(lattice: &Lattice, chi_max: usize) -> Result<Self, PepsError> {
        Self::with_config(lattice, chi_max, EngineConfig::default())
    }

    pub fn with_config(
        lattice: &Lattice,
        chi_max: usize,
        config: EngineConfig,
    ) -> Result<Self, PepsError> {
        if chi_max == 0 {
            return Err(PepsError::ZeroChi);
        }
        let site = DenseTensor::new(
            vec![2, 1, 1, 1, 1],
            SITE_LEGS.to_vec(),
            vec![Complex::one(), Complex::zero()],
        )?;
        Ok(Self {
            lattice: lattice.clone(),
            gamma: vec![site; lattice.n_sites()],
            lambda: vec![vec![R::one()]; lattice.edges().len()],
            chi_max,
            log_fapx: 0.0,
            trace: FidelityTrace::default(),
            config,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn set_chi_max(&mut self, chi: usize) -> Result<(), PepsError> {
        if chi == 0 {
            return Err(PepsError::ZeroChi);
        }
        self.chi_max = chi;
        Ok(())
    }

    pub fn log_fapx(&self) -> f64 {
        self.log_fapx
    }

    pub fn fapx(&self) -> f64 {
        self.log_fapx.exp()
    }

    pub fn gamma(&self, site: usize) -> &DenseTensor<R> {
        &self.gamma[site]
    }

    pub fn lambda(&self, edge: usize) -> &[R] {
        &self.lambda[edge]
    }

    /// Mutable access for diagnostics and tests; breaks invariants if misused.
    pub fn lambda_mut(&mut self, edge: usize) -> &mut Vec<R> {
        &mut self.lambda[edge]
    }

    pub fn gamma_mut(&mut self, site: usize) -> &mut DenseTensor<R> {
        &mut self.gamma[site]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.lambda.iter().map(Vec::len).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.lambda.iter().map(Vec::len).max().unwrap_or(1)
    }

    /// Per-edge `Λ` spectra as `f64`, sorted non-increasing.
    pub fn lambda_spectra(&self) -> Vec<Vec<f64>> {
        self.lambda
            .iter()
            .map(|l| l.iter().map(|x| x.to_f64_lossless()).collect())
            .collect()
    }

    fn site_lambda(&self, site: usize) -> [Option<(usize, &[R])>; 4] {
        site_bonds(&self.lattice, site).map(|e| e.map(|e| (e, self.lambda[e].as_slice())))
    }

    pub fn apply_single_qubit(&mut self, site: usize, gate: &Gate1<R>) -> Result<(), PepsError> {
        if self.config.validate_gates {
            let dev = unitarity_error(2, &gate.map(to_c64));
            if dev > 1e-6 {
                return Err(PepsError::NonUnitary(dev));
            }
        }
        let g = DenseTensor::new(vec![2, 2], vec![NEW, PHYS], gate.to_vec())?;
        let mut out = contract(&g, &[PHYS], &self.gamma[site], &[PHYS])?;
        out.relabel(NEW, PHYS)?;
        self.gamma[site] = out;
        Ok(())
    }

    /// One simple update on edge `(a, b)`; returns the discarded weight.
    ///
    /// With `gate = None` and `truncate = false` this is a gauging pass: the
    /// bond keeps its dimension and the fidelity ledger is untouched.
    pub fn simple_update(
        &mut self,
        a: usize,
        b: usize,
        gate: Option<&Gate2<R>>,
        truncate: bool,
    ) -> Result<f64, PepsError> {
        let edge = self
            .lattice
            .edge_index(a, b)
            .ok_or(PepsError::NotAnEdge(a, b))?;
        if let (Some(g), true) = (gate, self.config.validate_gates) {
            let dev = unitarity_error(4, &g.map(to_c64));
            if dev > 1e-6 {
                return Err(PepsError::NonUnitary(dev));
            }
        }
        let w = self.update_edge(edge, gate, truncate)?;
        if gate.is_some() {
            self.log_fapx += (-w).ln_1p();
        }
        Ok(w)
    }

    fn update_edge(
        &mut self,
        edge: usize,
        gate: Option<&Gate2<R>>,
        truncate: bool,
    ) -> Result<f64, PepsError> {
        let e = self.lattice.edges()[edge];
        let (i, j) = (e.a, e.b);
        let (leg_i, leg_j) = match e.orientation {
            Orientation::Horizontal => (RIGHT, LEFT),
            Orientation::Vertical => (DOWN, UP),
        };

        // (a) absorb the surrounding Λ, (b) bond projection
        let pi = self.project(i, leg_i)?;
        let pj = self.project(j, leg_j)?;
        let mut ri = DenseTensor::new(vec![pi.p, 2, pi.bond], vec![BOND_I, PHYS, MID], pi.r.clone())?;
        ri.scale_leg(MID, &self.lambda[edge])?;
        let rj = DenseTensor::new(vec![pj.p, 2, pj.bond], vec![BOND_J, PHYS_J, MID], pj.r.clone())?;
        let mut theta = contract(&ri, &[MID], &rj, &[MID])?; // [BOND_I, PHYS, BOND_J, PHYS_J]
        if let Some(g) = gate {
            let gt = DenseTensor::new(vec![2, 2, 2, 2], vec![OUT_I, OUT_J, PHYS, PHYS_J], g.to_vec())?;
            theta = contract(&gt, &[PHYS, PHYS_J], &theta, &[PHYS, PHYS_J])?;
            theta.relabel(OUT_I, PHYS)?;
            theta.relabel(OUT_J, PHYS_J)?;
        }

        // (c) truncated SVD
        let current = self.lambda[edge].len();
        let (max_rank, cutoff) = match (gate.is_some(), truncate) {
            (_, true) => (self.chi_max, self.config.rank_cutoff),
            (true, false) => (usize::MAX, self.config.rank_cutoff),
            (false, false) => (current, 0.0),
        };
        let svd = svd_truncated(&theta, &[BOND_I, PHYS], max_rank, cutoff, NEW)?;
        let kept = svd.kept_rank;
        let kept_norm = svd
            .singular_values
            .iter()
            .map(|s| *s * *s)
            .sum::<R>()
            .sqrt();
        let sigma: Vec<R> = svd.singular_values.iter().map(|s| *s / kept_norm).collect();

        // (d) recombine isometries and strip the absorbed Λ
        let u = svd.left_isometry.permute(&[BOND_I, PHYS, NEW])?;
        let v = svd.right_isometry.permute(&[BOND_J, PHYS_J, NEW])?;
        let gi = self.lift(i, leg_i, &pi, u.data(), kept)?;
        let gj = self.lift(j, leg_j, &pj, v.data(), kept)?;
        self.gamma[i] = gi;
        self.gamma[j] = gj;
        self.lambda[edge] = sigma;

        // values at or below the rank cutoff are round-off, not truncation
        let spectrum: Vec<f64> = svd.full_spectrum.iter().map(|s| s.to_f64_lossless()).collect();
        let floor = cutoff * spectrum[0];
        let total = spectrum.iter().fold(0.0, |acc, s| acc + s * s);
        let truncated = spectrum[kept..]
            .iter()
            .filter(|s| **s > floor)
            .fold(0.0, |acc, s| acc + s * s);
        Ok((truncated / total).clamp(0.0, 1.0))
    }

    /// Absorbs the Λ on every leg but `bond` and factors the site tensor as
    /// `(others) × (phys, bond)`.
    fn project(&self, site: usize, bond: Leg) -> Result<Projection<R>, PepsError> {
        let mut t = self.gamma[site].clone();
        let mut order = Vec::with_capacity(5);
        for (leg, lam) in VIRTUAL.iter().zip(self.site_lambda(site)) {
            if *leg != bond {
                if let Some((_, lam)) = lam {
                    t.scale_leg(*leg, lam)?;
                }
                order.push(*leg);
            }
        }
        order.push(PHYS);
        order.push(bond);
        let a = t.permute(&order)?;
        let others: Vec<usize> = a.dims()[..3].to_vec();
        let bond_dim = a.dims()[4];
        let m: usize = others.iter().product();
        let n = 2 * bond_dim;
        let a = a.into_data();
        let (p, r, kind) = if m <= n {
            (m, a.clone(), LiftKind::Identity)
        } else {
            let gram = R::gram_cholesky(m, n, &a).filter(|r| diagonal_ratio(n, r) > GRAM_CONDITION);
            match gram {
                Some(r) => (n, r, LiftKind::Solve),
                None => {
                    let r = R::qr_r(m, n, &a);
                    if diagonal_ratio(n, &r) > SOLVE_CONDITION {
                        (n, r, LiftKind::Solve)
                    } else {
                        let (q, r) = R::qr_thin(m, n, &a);
                        (n, r, LiftKind::Explicit(q))
                    }
                }
            }
        };
        Ok(Projection {
            a,
            m,
            n,
            p,
            r,
            kind,
            others,
            bond: bond_dim,
        })
    }

    /// Maps an isometry `[p, phys, new]` back through the projection and
    /// removes the absorbed Λ, giving a site tensor in canonical leg order.
    fn lift(
        &self,
        site: usize,
        bond: Leg,
        proj: &Projection<R>,
        iso: &[Complex<R>],
        new_dim: usize,
    ) -> Result<DenseTensor<R>, PepsError> {
        let k = 2 * new_dim;
        let data = match &proj.kind {
            LiftKind::Identity => iso.to_vec(),
            LiftKind::Solve => {
                let w = solve_upper(proj.n, &proj.r, iso, k);
                let mut out = vec![Complex::zero(); proj.m * k];
                R::gemm(proj.m, proj.n, k, &proj.a, &w, &mut out);
                out
            }
            LiftKind::Explicit(q) => {
                let mut out = vec![Complex::zero(); proj.m * k];
                R::gemm(proj.m, proj.p, k, q, iso, &mut out);
                out
            }
        };
        let mut legs = Vec::with_capacity(5);
        let mut dims = proj.others.clone();
        for leg in VIRTUAL {
            if leg != bond {
                legs.push(leg);
            }
        }
        legs.push(PHYS);
        legs.push(bond);
        dims.push(2);
        dims.push(new_dim);
        let mut t = DenseTensor::new(dims, legs, data)?;
        let floor = self.config.inverse_floor;
        for (leg, lam) in VIRTUAL.iter().zip(self.site_lambda(site)) {
            if *leg != bond {
                if let Some((_, lam)) = lam {
                    t.scale_leg(*leg, &clipped_inverse(lam, floor))?;
                }
            }
        }
        Ok(t.permute(&SITE_LEGS)?)
    }

    /// Gauging passes over every edge in reading order, `sweeps` times.
    pub fn gauge_sweep(&mut self, sweeps: usize) -> Result<(), PepsError> {
        for _ in 0..sweeps {
            for edge in 0..self.lattice.edges().len() {
                self.update_edge(edge, None, false)?;
            }
        }
        Ok(())
    }

    /// Single-qubit gates, truncated two-qubit updates, then gauging.
    pub fn apply_layer(&mut self, layer: &Layer) -> Result<&LayerRecord, PepsError> {
        let start = Instant::now();
        if layer.single.len() != self.lattice.n_sites() {
            return Err(PepsError::LayerShape {
                expected: self.lattice.n_sites(),
                got: layer.single.len(),
            });
        }
        for (site, g) in layer.single.iter().enumerate() {
            self.apply_single_qubit(site, &g.matrix())?;
        }
        let before = self.log_fapx;
        let mut discarded = Vec::with_capacity(layer.two.len());
        for op in &layer.two {
            let m: Gate2<R> = op.gate.matrix()?;
            let w = self.simple_update(op.sites.0, op.sites.1, Some(&m), true)?;
            let edge = self.lattice.edge_index(op.sites.0, op.sites.1).unwrap();
            discarded.push((edge, w));
            if self.config.gauge_schedule == GaugeSchedule::AfterGate {
                self.gauge_sweep(self.config.gauge_sweeps)?;
            }
        }
        if self.config.gauge_schedule == GaugeSchedule::AfterLayer {
            self.gauge_sweep(self.config.gauge_sweeps)?;
        }
        let gauge_residual = self.config.track_residual.then(|| self.gauge_residual());
        self.trace.layers.push(LayerRecord {
            t: layer.t,
            discarded,
            log_factor: self.log_fapx - before,
            log_fapx: self.log_fapx,
            max_bond: self.max_bond(),
            gauge_residual,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.trace.layers.last().unwrap())
    }

    /// Runs the first `depth` layers of `circuit`.
    pub fn run(&mut self, circuit: &CircuitInstance, depth: usize) -> Result<(), PepsError> {
        for layer in circuit.layers.iter().take(depth) {
            self.apply_layer(layer)?;
        }
        Ok(())
    }

    /// Largest violation of the Vidal-gauge normalization conditions.
    pub fn gauge_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for lam in &self.lambda {
            let tr: f64 = lam.iter().map(|x| x.to_f64_lossless().powi(2)).sum();
            worst = worst.max((tr - 1.0).abs());
        }
        for site in 0..self.lattice.n_sites() {
            let bonds = self.site_lambda(site);
            let mut full = self.gamma[site].clone();
            for (leg, bond) in VIRTUAL.iter().zip(bonds) {
                if let Some((_, lam)) = bond {
                    full.scale_leg(*leg, lam).expect("bond extent matches Λ");
                }
            }
            let scalar: f64 = full.norm_sqr().to_f64_lossless();
            worst = worst.max((scalar - 1.0).abs());
            for leg in VIRTUAL.iter() {
                let mut t = self.gamma[site].clone();
                for (l2, bond) in VIRTUAL.iter().zip(bonds) {
                    if l2 != leg {
                        if let Some((_, lam)) = bond {
                            t.scale_leg(*l2, lam).expect("bond extent matches Λ");
                        }
                    }
                }
                worst = worst.max(identity_deviation(&t, *leg));
            }
        }
        worst
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            lattice: self.lattice.clone(),
            chi_max: self.chi_max,
            log_fapx: self.log_fapx,
            config: self.config.clone(),
            trace: self.trace.clone(),
            lambda: self.lambda_spectra(),
            gamma: self
                .gamma
                .iter()
                .map(|g| SiteRecord {
                    dims: g.dims().to_vec(),
                    data: g.data().iter().map(|z| {
                        let z = to_c64(*z);
                        [z.re, z.im]
                    })
                    .collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self, PepsError> {
        if cp.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(PepsError::Checkpoint(format!(
                "unsupported schema version {}",
                cp.schema_version
            )));
        }
        if cp.gamma.len() != cp.lattice.n_sites() || cp.lambda.len() != cp.lattice.edges().len() {
            return Err(PepsError::Checkpoint("tensor count does not match lattice".into()));
        }
        let gamma = cp
            .gamma
            .iter()
            .map(|s| {
                let data = s
                    .data
                    .iter()
                    .map(|[re, im]| from_c64(Complex::new(*re, *im)))
                    .collect();
                DenseTensor::new(s.dims.clone(), SITE_LEGS.to_vec(), data)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let state = Self {
            lattice: cp.lattice.clone(),
            gamma,
            lambda: cp
                .lambda
                .iter()
                .map(|l| l.iter().map(|x| R::of(*x)).collect())
                .collect(),
            chi_max: cp.chi_max,
            log_fapx: cp.log_fapx,
            trace: cp.trace.clone(),
            config: cp.config.clone(),
        };
        for (e, edge) in state.lattice.edges().iter().enumerate() {
            let (li, lj) = match edge.orientation {
                Orientation::Horizontal => (RIGHT, LEFT),
                Orientation::Vertical => (DOWN, UP),
            };
            let n = state.lambda[e].len();
            if state.gamma[edge.a].extent(li)? != n || state.gamma[edge.b].extent(lj)? != n {
                return Err(PepsError::Checkpoint(format!("bond {e} extent mismatch")));
            }
        }
        Ok(state)
    }
}

/// Smallest `|R_kk| / max |R_kk|` for which the isometry is recovered by a
/// triangular solve instead of forming `Q` explicitly.
const SOLVE_CONDITION: f64 = 1e-6;
/// The same threshold when `R` comes from a Cholesky factor of `A^† A`, whose
/// orthogonality error grows with the square of the condition number.
const GRAM_CONDITION: f64 = 1e-3;

fn diagonal_ratio<R: Real>(n: usize, r: &[Complex<R>]) -> f64 {
    let diag = (0..n).map(|k| r[k * n + k].norm().to_f64_lossless());
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

enum LiftKind<R: Real> {
    /// The site tensor is already no taller than it is wide.
    Identity,
    /// `Q = A R^{-1}`, applied lazily.
    Solve,
    Explicit(Vec<Complex<R>>),
}

struct Projection<R: Real> {
    a: Vec<Complex<R>>,
    m: usize,
    n: usize,
    p: usize,
    r: Vec<Complex<R>>,
    kind: LiftKind<R>,
    others: Vec<usize>,
    bond: usize,
}

/// Solves `R W = B` for upper-triangular `R[n×n]` and `B[n×k]`.
fn solve_upper<R: Real>(n: usize, r: &[Complex<R>], b: &[Complex<R>], k: usize) -> Vec<Complex<R>> {
    let mut w = b.to_vec();
    for row in (0..n).rev() {
        let (head, tail) = w.split_at_mut((row + 1) * k);
        let target = &mut head[row * k..];
        for col in row + 1..n {
            let coef = r[row * n + col];
            let src = &tail[(col - row - 1) * k..(col - row) * k];
            for (t, s) in target.iter_mut().zip(src) {
                *t -= coef * *s;
            }
        }
        let inv = Complex::<R>::one() / r[row * n + row];
        target.iter_mut().for_each(|t| *t = *t * inv);
    }
    w
}

/// `max |eig(A^† A) - 1|` where `A` is `t` reshaped as (all other legs) × `leg`.
fn identity_deviation<R: Real>(t: &DenseTensor<R>, leg: Leg) -> f64 {
    let rest: Vec<Leg> = t.legs().iter().copied().filter(|l| *l != leg).collect();
    let mut order = rest;
    order.push(leg);
    let p = t.permute(&order).expect("legs are a permutation");
    let n = t.extent(leg).unwrap();
    let m = t.len() / n;
    let mut gram = vec![Complex::zero(); n * n];
    R::gram(m, n, p.data(), &mut gram);
    match R::hermitian_eigenvalues(n, &gram) {
        Some(ev) => ev
            .iter()
            .map(|x| (x.to_f64_lossless() - 1.0).abs())
            .fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

fn clipped_inverse<R: Real>(lam: &[R], floor: f64) -> Vec<R> {
    let smax = lam.iter().copied().fold(R::zero(), R::max).to_f64_lossless();
    lam.iter()
        .map(|x| {
            if x.to_f64_lossless() >= floor * smax && *x > R::zero() {
                R::one() / *x
            } else {
                R::zero()
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub dims: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

/// Lossless JSON snapshot of a state (values widened to `f64`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub lattice: Lattice,
    pub chi_max: usize,
    pub log_fapx: f64,
    pub config: EngineConfig,
    pub trace: FidelityTrace,
    pub lambda: Vec<Vec<f64>>,
    pub gamma: Vec<SiteRecord>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String, PepsError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PepsError> {
        Ok(serde_json::from_str(text)?)
    }
}
