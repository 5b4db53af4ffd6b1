//! Exact state-vector reference and PEPS-versus-exact diagnostics.
//!
//! Bitstrings use reading order with site 0 as the most significant bit, so
//! amplitude index `x = Σ_s x_s 2^(n-1-s)`.

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::circuit::{CircuitError, CircuitInstance, Gate1, Gate2, Lattice, Layer};
use crate::peps::{PepsState, DOWN, LEFT, PHYS, RIGHT, UP};
use crate::scalar::{to_c64, Real};
use crate::tensor::{contract, DenseTensor, Leg, TensorError};

pub const DEFAULT_QUBIT_CAP: usize = 25;
/// Default peak-memory budget for PEPS contraction, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{n} qubits exceeds the cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },
    #[error("contraction needs about {required} bytes, cap is {cap}")]
    Memory { required: usize, cap: usize },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("degenerate distribution: {0}")]
    Degenerate(&'static str),
    #[error("cut {cut} out of range for {n} qubits")]
    Cut { cut: usize, n: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<R: Real = f64> {
    n: usize,
    amps: Vec<Complex<R>>,
}

impl<R: Real> StateVector<R> {
    pub fn zero_state(n: usize) -> Self {
        let mut amps = vec![Complex::zero(); 1 << n];
        amps[0] = Complex::one();
        Self { n, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex<R>>) -> Result<Self, OracleError> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return Err(OracleError::Length(amps.len(), 1 << n));
        }
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex<R>] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| a.norm_sqr().to_f64_lossless())
            .sum::<f64>()
            .sqrt()
    }

    fn bit(&self, site: usize) -> usize {
        1 << (self.n - 1 - site)
    }

    pub fn apply_single(&mut self, site: usize, g: &Gate1<R>) {
        let mask = self.bit(site);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = g[0] * a0 + g[1] * a1;
                self.amps[i | mask] = g[2] * a0 + g[3] * a1;
            }
        }
    }

    /// Applies `g` with `a` as the high bit of the gate's local index.
    pub fn apply_pair(&mut self, a: usize, b: usize, g: &Gate2<R>) {
        let (ma, mb) = (self.bit(a), self.bit(b));
        for i in 0..self.amps.len() {
            if i & (ma | mb) == 0 {
                let idx = [i, i | mb, i | ma, i | ma | mb];
                let v = idx.map(|k| self.amps[k]);
                for (row, &k) in idx.iter().enumerate() {
                    self.amps[k] = (0..4).map(|c| g[row * 4 + c] * v[c]).sum();
                }
            }
        }
    }

    pub fn apply_layer(&mut self, layer: &Layer) -> Result<(), OracleError> {
        for (site, g) in layer.single.iter().enumerate() {
            self.apply_single(site, &g.matrix());
        }
        for op in &layer.two {
            self.apply_pair(op.sites.0, op.sites.1, &op.gate.matrix()?);
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<f64> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| to_c64(a.conj() * b))
            .sum()
    }

    /// Normalized probability table `|amp|^2 / ‖amp‖^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        let p: Vec<f64> = self.amps.iter().map(|a| a.norm_sqr().to_f64_lossless()).collect();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|x| x / total).collect()
    }
}

/// Runs the first `depth` layers of `circuit` from `|0...0>`.
pub fn statevector_run<R: Real>(
    circuit: &CircuitInstance,
    depth: usize,
    cap: usize,
) -> Result<StateVector<R>, OracleError> {
    let n = circuit.n_sites();
    if n > cap {
        return Err(OracleError::TooManyQubits { n, cap });
    }
    let mut psi = StateVector::zero_state(n);
    for layer in circuit.layers.iter().take(depth) {
        psi.apply_layer(layer)?;
    }
    Ok(psi)
}

fn bond_leg(edge: usize) -> Leg {
    Leg((1 << 21) | edge as u32)
}

fn phys_leg(site: usize) -> Leg {
    Leg((1 << 20) | site as u32)
}

/// Site tensor with `√Λ` on every bond and globally unique leg labels.
fn site_tensor<R: Real>(state: &PepsState<R>, site: usize) -> Result<DenseTensor<R>, OracleError> {
    let lat = state.lattice();
    let mut t = state.gamma(site).clone();
    let bonds = [
        (LEFT, lat.left_edge(site)),
        (RIGHT, lat.right_edge(site)),
        (UP, lat.up_edge(site)),
        (DOWN, lat.down_edge(site)),
    ];
    t.relabel(PHYS, phys_leg(site))?;
    for (leg, edge) in bonds {
        match edge {
            Some(e) => {
                let root: Vec<R> = state.lambda(e).iter().map(|x| x.sqrt()).collect();
                t.scale_leg(leg, &root)?;
                t.relabel(leg, bond_leg(e))?;
            }
            None => t = t.squeeze(leg)?,
        }
    }
    Ok(t)
}

struct Plan {
    top: Vec<usize>,
    /// Left and right column blocks of each half, in absorption order.
    halves: [(Vec<usize>, Vec<usize>); 2],
    cut: Vec<usize>,
    sliced: usize,
    peak_bytes: usize,
}

/// Open-leg volume of a region: physical legs times every uncut bond leaving it.
fn region_volume(lat: &Lattice, dims: &[usize], sites: &[usize], sliced: &[usize]) -> usize {
    let mut vol = 1usize << sites.len();
    for (e, edge) in lat.edges().iter().enumerate() {
        let inside = (sites.contains(&edge.a), sites.contains(&edge.b));
        if inside.0 != inside.1 && !sliced.contains(&e) {
            vol = vol.saturating_mul(dims[e]);
        }
    }
    vol
}

/// Greedy absorption order over `block` and the largest intermediate volume.
fn greedy_order(
    lat: &Lattice,
    dims: &[usize],
    block: &[usize],
    sliced: &[usize],
) -> (Vec<usize>, usize) {
    let mut best: Option<(Vec<usize>, usize)> = None;
    for &start in block {
        let mut order = vec![start];
        let mut peak = region_volume(lat, dims, &order, sliced);
        while order.len() < block.len() {
            let next = block
                .iter()
                .filter(|s| !order.contains(s))
                .map(|&s| {
                    let mut trial = order.clone();
                    trial.push(s);
                    (region_volume(lat, dims, &trial, sliced), s)
                })
                .min()
                .unwrap();
            peak = peak.max(next.0);
            order.push(next.1);
        }
        if best.as_ref().is_none_or(|(_, p)| peak < *p) {
            best = Some((order, peak));
        }
    }
    best.unwrap()
}

fn plan_contraction<R: Real>(state: &PepsState<R>, cap: usize) -> Result<Plan, OracleError> {
    let lat = state.lattice();
    let (n_r, n_c) = (lat.rows(), lat.cols());
    let h = n_r / 2;
    let w = n_c / 2;
    let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> Vec<usize> {
        rows.flat_map(|r| cols.clone().map(move |c| r * n_c + c)).collect()
    };
    let top = block(0..h, 0..n_c);
    let blocks = [
        (block(0..h, 0..w), block(0..h, w..n_c)),
        (block(h..n_r, 0..w), block(h..n_r, w..n_c)),
    ];
    let cut: Vec<usize> = (0..n_c).map(|c| lat.down_edge((h - 1) * n_c + c).unwrap()).collect();
    let dims = state.bond_dims();
    let elem = std::mem::size_of::<Complex<R>>();
    let amp_bytes = (1usize << lat.n_sites()) * elem;
    let mut last = 0;
    for s in 0..=cut.len() {
        let sliced = &cut[..s];
        let mut peak = 0usize;
        let mut halves: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let mut merged_total = 0usize;
        for (l, r) in &blocks {
            let (lo, lp) = greedy_order(lat, &dims, l, sliced);
            let (ro, rp) = greedy_order(lat, &dims, r, sliced);
            let mut both = l.clone();
            both.extend(r);
            let merged = region_volume(lat, &dims, &both, sliced);
            merged_total = merged_total.saturating_add(merged);
            // a permuted copy of each operand may be alive during a contraction
            peak = peak
                .max(lp.saturating_mul(3))
                .max(rp.saturating_mul(3))
                .max(lp.saturating_add(rp).saturating_mul(2).saturating_add(merged));
            halves.push((lo, ro));
        }
        let bytes = peak
            .max(merged_total.saturating_mul(2))
            .saturating_mul(elem)
            .saturating_add(amp_bytes);
        last = bytes;
        if bytes <= cap {
            let mut it = halves.into_iter();
            return Ok(Plan {
                top,
                halves: [it.next().unwrap(), it.next().unwrap()],
                cut,
                sliced: s,
                peak_bytes: bytes,
            });
        }
    }
    Err(OracleError::Memory {
        required: last,
        cap,
    })
}

/// Contracts `sites` in order into one tensor, fixing the listed bond indices.
fn contract_block<R: Real>(
    tensors: &[DenseTensor<R>],
    sites: &[usize],
    fixed: &[(Leg, usize)],
) -> Result<DenseTensor<R>, OracleError> {
    let prep = |s: usize| -> Result<DenseTensor<R>, OracleError> {
        let mut t = tensors[s].clone();
        for (leg, idx) in fixed {
            if t.has_leg(*leg) {
                t = t.slice(*leg, *idx)?;
            }
        }
        Ok(t)
    };
    let mut acc = prep(sites[0])?;
    for &s in &sites[1..] {
        let t = prep(s)?;
        let shared: Vec<Leg> = acc.legs().iter().copied().filter(|l| t.has_leg(*l)).collect();
        acc = contract(&acc, &shared, &t, &shared)?;
    }
    Ok(acc)
}

/// Expands the PEPS into its full (unnormalized) amplitude vector.
///
/// The lattice is cut into top and bottom halves, each assembled from a left
/// and a right column block. Bonds crossing the horizontal cut are sliced as
/// needed to keep the peak footprint below `memory_cap` bytes.
pub fn peps_amplitudes<R: Real>(
    state: &PepsState<R>,
    memory_cap: usize,
) -> Result<StateVector<R>, OracleError> {
    let n = state.lattice().n_sites();
    if n > DEFAULT_QUBIT_CAP {
        return Err(OracleError::TooManyQubits {
            n,
            cap: DEFAULT_QUBIT_CAP,
        });
    }
    let plan = plan_contraction(state, memory_cap)?;
    let tensors: Vec<DenseTensor<R>> = (0..n)
        .map(|s| site_tensor(state, s))
        .collect::<Result<_, _>>()?;
    let sliced: Vec<usize> = plan.cut[..plan.sliced].to_vec();
    let open_cut: Vec<Leg> = plan.cut[plan.sliced..].iter().map(|&e| bond_leg(e)).collect();
    let top_phys: Vec<Leg> = plan.top.iter().map(|&s| phys_leg(s)).collect();
    let bottom_phys: Vec<Leg> = (plan.top.len()..n).map(phys_leg).collect();
    let (rows, cols) = (1usize << top_phys.len(), 1usize << bottom_phys.len());
    let k: usize = plan.cut[plan.sliced..]
        .iter()
        .map(|&e| state.lambda(e).len())
        .product();

    let mut amps = vec![Complex::zero(); rows * cols];
    let extents: Vec<usize> = sliced.iter().map(|&e| state.lambda(e).len()).collect();
    let total: usize = extents.iter().product();
    // right blocks only need rebuilding per slice if a sliced bond reaches them
    let touches = |sites: &[usize]| {
        sliced.iter().any(|&e| {
            let edge = state.lattice().edges()[e];
            sites.contains(&edge.a) || sites.contains(&edge.b)
        })
    };
    let cached: Vec<Option<DenseTensor<R>>> = plan
        .halves
        .iter()
        .map(|(_, r)| {
            if touches(r) {
                Ok(None)
            } else {
                contract_block(&tensors, r, &[]).map(Some)
            }
        })
        .collect::<Result<_, _>>()?;
    let mut index = vec![0usize; sliced.len()];
    for _ in 0..total {
        let fixed: Vec<(Leg, usize)> = sliced
            .iter()
            .zip(&index)
            .map(|(&e, &i)| (bond_leg(e), i))
            .collect();
        let mut halves = Vec::with_capacity(2);
        for ((left, right), cache) in plan.halves.iter().zip(&cached) {
            let l = contract_block(&tensors, left, &fixed)?;
            let built;
            let r = match cache {
                Some(r) => r,
                None => {
                    built = contract_block(&tensors, right, &fixed)?;
                    &built
                }
            };
            let shared: Vec<Leg> = l.legs().iter().copied().filter(|x| r.has_leg(*x)).collect();
            halves.push(contract(&l, &shared, r, &shared)?);
        }
        let mut top_order = top_phys.clone();
        top_order.extend(&open_cut);
        let mut bottom_order = open_cut.clone();
        bottom_order.extend(&bottom_phys);
        let top = halves[0].permute(&top_order)?;
        let bottom = halves[1].permute(&bottom_order)?;
        R::gemm_acc(rows, k, cols, top.data(), bottom.data(), &mut amps);
        for axis in (0..index.len()).rev() {
            index[axis] += 1;
            if index[axis] < extents[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
    StateVector::from_amplitudes(amps)
}

/// Estimated peak bytes `peps_amplitudes` would need without a cap.
pub fn contraction_footprint<R: Real>(state: &PepsState<R>) -> usize {
    match plan_contraction(state, usize::MAX) {
        Ok(plan) => plan.peak_bytes,
        Err(_) => usize::MAX,
    }
}

/// `<psi|PEPS>` by full contraction of the PEPS.
pub fn peps_overlap<R: Real>(
    state: &PepsState<R>,
    psi: &StateVector<R>,
    memory_cap: usize,
) -> Result<Complex<f64>, OracleError> {
    let amps = peps_amplitudes(state, memory_cap)?;
    if amps.n_qubits() != psi.n_qubits() {
        return Err(OracleError::Length(amps.n_qubits(), psi.n_qubits()));
    }
    Ok(psi.inner(&amps))
}

/// `|<a|b>|^2 / (‖a‖^2 ‖b‖^2)`.
pub fn state_fidelity<R: Real>(a: &StateVector<R>, b: &StateVector<R>) -> f64 {
    let ov = a.inner(b).norm_sqr();
    ov / (a.norm().powi(2) * b.norm().powi(2))
}

/// Fidelity between the PEPS and `psi`.
pub fn exact_fidelity<R: Real>(
    state: &PepsState<R>,
    psi: &StateVector<R>,
    memory_cap: usize,
) -> Result<f64, OracleError> {
    let amps = peps_amplitudes(state, memory_cap)?;
    if amps.n_qubits() != psi.n_qubits() {
        return Err(OracleError::Length(amps.n_qubits(), psi.n_qubits()));
    }
    Ok(state_fidelity(psi, &amps))
}

/// Normalized linear cross-entropy between a model table and the exact table.
pub fn nxeb(p_model: &[f64], p_exact: &[f64]) -> Result<f64, OracleError> {
    if p_model.len() != p_exact.len() {
        return Err(OracleError::Length(p_model.len(), p_exact.len()));
    }
    let size = p_exact.len() as f64;
    let total: f64 = p_model.iter().sum();
    if total <= 0.0 {
        return Err(OracleError::Degenerate("model table sums to zero"));
    }
    let cross: f64 = p_model.iter().zip(p_exact).map(|(a, b)| a / total * b).sum();
    let self_term: f64 = p_exact.iter().map(|b| b * b).sum();
    let denom = size * self_term - 1.0;
    if denom.abs() < 1e-12 {
        return Err(OracleError::Degenerate("exact table is uniform"));
    }
    Ok((size * cross - 1.0) / denom)
}

/// Kolmogorov–Smirnov distance between `{N p(x)}` and the unit exponential.
pub fn ptd_distance(p: &[f64]) -> f64 {
    let size = p.len() as f64;
    let mut scaled: Vec<f64> = p.iter().map(|x| x * size).collect();
    scaled.sort_by(f64::total_cmp);
    let mut worst = 0.0f64;
    for (i, y) in scaled.iter().enumerate() {
        let cdf = 1.0 - (-y).exp();
        let lo = i as f64 / size;
        let hi = (i + 1) as f64 / size;
        worst = worst.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entanglement {
    /// Von Neumann entropy in bits.
    pub entropy: f64,
    /// Schmidt coefficients, non-increasing.
    pub spectrum: Vec<f64>,
}

fn entropy_of(spectrum: &[f64]) -> f64 {
    let total: f64 = spectrum.iter().map(|s| s * s).sum();
    spectrum
        .iter()
        .map(|s| s * s / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Entanglement between sites `0..cut` and `cut..n`.
pub fn entanglement_entropy<R: Real>(
    psi: &StateVector<R>,
    cut: usize,
) -> Result<Entanglement, OracleError> {
    let n = psi.n_qubits();
    if cut == 0 || cut >= n {
        return Err(OracleError::Cut { cut, n });
    }
    let (rows, cols) = (1usize << cut, 1usize << (n - cut));
    let spectrum: Vec<f64> = R::singular_values(rows, cols, psi.amplitudes())
        .ok_or(TensorError::NoConvergence)?
        .into_iter()
        .map(|s| s.to_f64_lossless())
        .collect();
    Ok(Entanglement {
        entropy: entropy_of(&spectrum),
        spectrum,
    })
}

/// Entanglement between an arbitrary set of sites and its complement.
pub fn subsystem_entropy<R: Real>(
    psi: &StateVector<R>,
    sites: &[usize],
) -> Result<Entanglement, OracleError> {
    let n = psi.n_qubits();
    if sites.is_empty() || sites.len() >= n || sites.iter().any(|&s| s >= n) {
        return Err(OracleError::Cut { cut: sites.len(), n });
    }
    let legs: Vec<Leg> = (0..n).map(phys_leg).collect();
    let t = DenseTensor::new(vec![2; n], legs, psi.amplitudes().to_vec())?;
    let mut order: Vec<Leg> = sites.iter().map(|&s| phys_leg(s)).collect();
    order.extend((0..n).filter(|s| !sites.contains(s)).map(phys_leg));
    let p = t.permute(&order)?;
    let reordered = StateVector::from_amplitudes(p.into_data())?;
    entanglement_entropy(&reordered, sites.len())
}

/// Operator Schmidt coefficients of a two-qubit gate, divided by the largest
/// and with numerically vanishing values (below `1e-12`) removed.
pub fn operator_schmidt(gate: &Gate2<f64>) -> Result<Vec<f64>, OracleError> {
    // regroup G[(o1 o2), (i1 i2)] as M[(o1 i1), (o2 i2)]
    let mut m = vec![Complex::new(0.0, 0.0); 16];
    for o1 in 0..2 {
        for o2 in 0..2 {
            for i1 in 0..2 {
                for i2 in 0..2 {
                    m[(o1 * 2 + i1) * 4 + o2 * 2 + i2] = gate[(o1 * 2 + o2) * 4 + i1 * 2 + i2];
                }
            }
        }
    }
    let s = f64::singular_values(4, 4, &m).ok_or(TensorError::NoConvergence)?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Err(OracleError::Degenerate("zero operator"));
    }
    Ok(s.iter().map(|x| x / top).filter(|x| *x > 1e-12).collect())
}
