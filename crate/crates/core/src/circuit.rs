//! Lattice, brickwork schedule, gate library and seeded circuit instances.
//!
//! Sites are numbered in reading order, `site = row * n_c + col`. A two-qubit
//! gate matrix acts on the basis `|x_a x_b>` with index `2 * x_a + x_b`, where
//! `a` is the lower-numbered (left or upper) site of the edge.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_c64, Real};

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// Row-major 2×2 complex matrix.
pub type Gate1<R> = [Complex<R>; 4];
/// Row-major 4×4 complex matrix.
pub type Gate2<R> = [Complex<R>; 16];

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("lattice must be at least 2×2, got {0}×{1}")]
    Size(usize, usize),
    #[error("invalid gate parameter: {0}")]
    Parameter(String),
    #[error("unsupported instance schema version {0}")]
    Schema(u32),
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeSet {
    A,
    B,
    C,
    D,
}

impl fmt::Display for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Nearest-neighbour pair with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub set: EdgeSet,
    pub orientation: Orientation,
}

#[derive(Serialize, Deserialize)]
struct LatticeDims {
    n_r: usize,
    n_c: usize,
}

/// Square lattice with its edges in reading order: the horizontal edges of
/// row 0 left to right, the vertical edges between rows 0 and 1, then row 1,
/// and so on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "LatticeDims", try_from = "LatticeDims")]
pub struct Lattice {
    n_r: usize,
    n_c: usize,
    edges: Vec<Edge>,
}

impl From<Lattice> for LatticeDims {
    fn from(l: Lattice) -> Self {
        LatticeDims {
            n_r: l.n_r,
            n_c: l.n_c,
        }
    }
}

impl TryFrom<LatticeDims> for Lattice {
    type Error = CircuitError;
    fn try_from(d: LatticeDims) -> Result<Self, CircuitError> {
        Lattice::new(d.n_r, d.n_c)
    }
}

impl Lattice {
    pub fn new(n_r: usize, n_c: usize) -> Result<Self, CircuitError> {
        if n_r < 2 || n_c < 2 {
            return Err(CircuitError::Size(n_r, n_c));
        }
        let mut edges = Vec::with_capacity(2 * n_r * n_c - n_r - n_c);
        for r in 0..n_r {
            for c in 0..n_c - 1 {
                edges.push(Edge {
                    a: r * n_c + c,
                    b: r * n_c + c + 1,
                    set: if (r + c) % 2 == 0 { EdgeSet::A } else { EdgeSet::B },
                    orientation: Orientation::Horizontal,
                });
            }
            if r + 1 < n_r {
                for c in 0..n_c {
                    edges.push(Edge {
                        a: r * n_c + c,
                        b: (r + 1) * n_c + c,
                        set: if (r + c) % 2 == 0 { EdgeSet::C } else { EdgeSet::D },
                        orientation: Orientation::Vertical,
                    });
                }
            }
        }
        Ok(Self { n_r, n_c, edges })
    }

    pub fn rows(&self) -> usize {
        self.n_r
    }

    pub fn cols(&self) -> usize {
        self.n_c
    }

    pub fn n_sites(&self) -> usize {
        self.n_r * self.n_c
    }

    pub fn site(&self, row: usize, col: usize) -> usize {
        row * self.n_c + col
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site / self.n_c, site % self.n_c)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges_in(&self, set: EdgeSet) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.set == set)
    }

    /// Index of the edge joining `a` and `b` (either order).
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.edges.iter().position(|e| e.a == lo && e.b == hi)
    }

    /// Index of the horizontal edge to the right of `site`, if any.
    pub fn right_edge(&self, site: usize) -> Option<usize> {
        let (r, c) = self.coords(site);
        (c + 1 < self.n_c).then(|| r * (2 * self.n_c - 1) + c)
    }

    /// Index of the vertical edge below `site`, if any.
    pub fn down_edge(&self, site: usize) -> Option<usize> {
        let (r, c) = self.coords(site);
        (r + 1 < self.n_r).then(|| r * (2 * self.n_c - 1) + self.n_c - 1 + c)
    }

    pub fn left_edge(&self, site: usize) -> Option<usize> {
        let (r, c) = self.coords(site);
        (c > 0).then(|| self.right_edge(self.site(r, c - 1)).unwrap())
    }

    pub fn up_edge(&self, site: usize) -> Option<usize> {
        let (r, c) = self.coords(site);
        (r > 0).then(|| self.down_edge(self.site(r - 1, c)).unwrap())
    }

    /// Nominal two-qubit gate count `(2n - n_r - n_c) D / 4`.
    pub fn nominal_gate_count(&self, depth: usize) -> f64 {
        self.edges.len() as f64 * depth as f64 / 4.0
    }

    /// Exact number of two-qubit gates in the first `depth` layers.
    pub fn gate_count(&self, depth: usize) -> usize {
        let per_set = |s: EdgeSet| self.edges_in(s).count();
        (1..=depth).map(|t| per_set(scheduled_set(t))).sum()
    }
}

/// Edge set acting at layer `t` (1-based) under the period-8 ABCD-CDAB pattern.
pub fn scheduled_set(t: usize) -> EdgeSet {
    const PATTERN: [EdgeSet; 8] = [
        EdgeSet::A,
        EdgeSet::B,
        EdgeSet::C,
        EdgeSet::D,
        EdgeSet::C,
        EdgeSet::D,
        EdgeSet::A,
        EdgeSet::B,
    ];
    PATTERN[(t + 7) % 8]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingleQubitGate {
    SqrtX,
    SqrtY,
    SqrtW,
}

impl SingleQubitGate {
    pub const ALL: [SingleQubitGate; 3] = [Self::SqrtX, Self::SqrtY, Self::SqrtW];

    pub fn matrix_c64(self) -> Gate1<f64> {
        let h = FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex::new(re * h, im * h);
        match self {
            Self::SqrtX => [c(1., 0.), c(0., -1.), c(0., -1.), c(1., 0.)],
            Self::SqrtY => [c(1., 0.), c(-1., 0.), c(1., 0.), c(1., 0.)],
            // off-diagonals are -sqrt(i) and sqrt(-i)
            Self::SqrtW => [
                c(1., 0.),
                Complex::new(-0.5, -0.5),
                Complex::new(0.5, -0.5),
                c(1., 0.),
            ],
        }
    }

    pub fn matrix<R: Real>(self) -> Gate1<R> {
        self.matrix_c64().map(from_c64)
    }
}

/// `fSim(theta, phi)` with `0 <= theta <= pi/2` and `0 <= phi <= pi`.
pub fn fsim_matrix(theta: f64, phi: f64) -> Result<Gate2<f64>, CircuitError> {
    if !(0.0..=FRAC_PI_2).contains(&theta) || !(0.0..=PI).contains(&phi) {
        return Err(CircuitError::Parameter(format!(
            "fSim angles out of range: theta={theta}, phi={phi}"
        )));
    }
    let z = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    let (s, c) = theta.sin_cos();
    let cs = Complex::new(c, 0.0);
    let mis = Complex::new(0.0, -s);
    Ok([
        one, z, z, z, //
        z, cs, mis, z, //
        z, mis, cs, z, //
        z, z, z, Complex::from_polar(1.0, -phi),
    ])
}

pub fn cz_matrix() -> Gate2<f64> {
    let mut m = [Complex::new(0.0, 0.0); 16];
    m[0] = Complex::new(1.0, 0.0);
    m[5] = Complex::new(1.0, 0.0);
    m[10] = Complex::new(1.0, 0.0);
    m[15] = Complex::new(-1.0, 0.0);
    m
}

/// Haar-random element of U(4): QR of a complex Gaussian matrix with the
/// phases of R's diagonal moved into Q.
pub fn haar_unitary4<G: Rng + ?Sized>(rng: &mut G) -> Gate2<f64> {
    let mut z = [Complex::new(0.0, 0.0); 16];
    for x in z.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *x = Complex::new(re, im) * FRAC_1_SQRT_2;
    }
    let (q, r) = f64::qr_thin(4, 4, &z);
    let mut u = [Complex::new(0.0, 0.0); 16];
    for j in 0..4 {
        let d = r[j * 4 + j];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex::new(1.0, 0.0) };
        for i in 0..4 {
            u[i * 4 + j] = q[i * 4 + j] * phase;
        }
    }
    u
}

/// Deviation `max |U^† U - I|` of a row-major `n×n` matrix.
pub fn unitarity_error(n: usize, u: &[Complex<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(0.0, 0.0);
            for k in 0..n {
                acc += u[k * n + i].conj() * u[k * n + j];
            }
            if i == j {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TwoQubitGate {
    Cz,
    FSim {
        theta: f64,
        phi: f64,
    },
    /// Row-major 4×4 matrix stored as `[re, im]` pairs.
    Haar4 {
        matrix: Vec<[f64; 2]>,
    },
}

impl TwoQubitGate {
    pub fn matrix_c64(&self) -> Result<Gate2<f64>, CircuitError> {
        match self {
            Self::Cz => Ok(cz_matrix()),
            Self::FSim { theta, phi } => fsim_matrix(*theta, *phi),
            Self::Haar4 { matrix } => {
                if matrix.len() != 16 {
                    return Err(CircuitError::Malformed(format!(
                        "Haar4 matrix has {} entries",
                        matrix.len()
                    )));
                }
                let mut m = [Complex::new(0.0, 0.0); 16];
                for (dst, [re, im]) in m.iter_mut().zip(matrix) {
                    *dst = Complex::new(*re, *im);
                }
                Ok(m)
            }
        }
    }

    pub fn matrix<R: Real>(&self) -> Result<Gate2<R>, CircuitError> {
        Ok(self.matrix_c64()?.map(from_c64))
    }

    fn from_haar(u: &Gate2<f64>) -> Self {
        Self::Haar4 {
            matrix: u.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SequenceKind {
    Cz,
    FSim { theta: f64, phi: f64 },
    TwoQubitHaar,
}

impl SequenceKind {
    pub fn validate(&self) -> Result<(), CircuitError> {
        if let Self::FSim { theta, phi } = self {
            fsim_matrix(*theta, *phi)?;
        }
        Ok(())
    }

    /// Short stable label used in file names and tables.
    pub fn label(&self) -> String {
        match self {
            Self::Cz => "cz".into(),
            Self::FSim { theta, phi } => format!("fsim_{theta:.6}_{phi:.6}"),
            Self::TwoQubitHaar => "2hr".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitOp {
    pub sites: (usize, usize),
    pub gate: TwoQubitGate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// 1-based layer index.
    pub t: usize,
    pub set: EdgeSet,
    /// One gate per site, in site order.
    pub single: Vec<SingleQubitGate>,
    pub two: Vec<TwoQubitOp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitInstance {
    pub schema_version: u32,
    pub lattice: Lattice,
    pub depth: usize,
    pub sequence: SequenceKind,
    pub seed: u64,
    pub layers: Vec<Layer>,
}

const TAG_SINGLE: u64 = 1;
const TAG_HAAR: u64 = 2;

/// Independent generator for one `(layer, tag, index)` slot of a seeded instance.
pub fn slot_rng(seed: u64, layer: usize, tag: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) | ((layer as u64 & 0x0fff_ffff) << 28) | (index as u64 & 0x0fff_ffff));
    rng
}

pub fn generate_instance(
    n_r: usize,
    n_c: usize,
    depth: usize,
    sequence: SequenceKind,
    seed: u64,
) -> Result<CircuitInstance, CircuitError> {
    let lattice = Lattice::new(n_r, n_c)?;
    sequence.validate()?;
    let mut layers = Vec::with_capacity(depth);
    for t in 1..=depth {
        let single = (0..lattice.n_sites())
            .map(|s| {
                let mut rng = slot_rng(seed, t, TAG_SINGLE, s);
                SingleQubitGate::ALL[rng.random_range(0..3)]
            })
            .collect();
        let set = scheduled_set(t);
        let two = lattice
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.set == set)
            .map(|(idx, e)| {
                let gate = match sequence {
                    SequenceKind::Cz => TwoQubitGate::Cz,
                    SequenceKind::FSim { theta, phi } => TwoQubitGate::FSim { theta, phi },
                    SequenceKind::TwoQubitHaar => {
                        let mut rng = slot_rng(seed, t, TAG_HAAR, idx);
                        TwoQubitGate::from_haar(&haar_unitary4(&mut rng))
                    }
                };
                TwoQubitOp {
                    sites: (e.a, e.b),
                    gate,
                }
            })
            .collect();
        layers.push(Layer {
            t,
            set,
            single,
            two,
        });
    }
    Ok(CircuitInstance {
        schema_version: INSTANCE_SCHEMA_VERSION,
        lattice,
        depth,
        sequence,
        seed,
        layers,
    })
}

impl CircuitInstance {
    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    /// Exact two-qubit gate count over the first `depth` layers.
    pub fn gate_count(&self, depth: usize) -> usize {
        self.layers.iter().take(depth).map(|l| l.two.len()).sum()
    }

    pub fn to_json(&self) -> Result<String, CircuitError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        let inst: Self = serde_json::from_str(text)?;
        if inst.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(CircuitError::Schema(inst.schema_version));
        }
        if inst.layers.len() != inst.depth {
            return Err(CircuitError::Malformed(format!(
                "depth {} but {} layers",
                inst.depth,
                inst.layers.len()
            )));
        }
        for layer in &inst.layers {
            if layer.single.len() != inst.lattice.n_sites() {
                return Err(CircuitError::Malformed(format!(
                    "layer {} has {} single-qubit gates",
                    layer.t,
                    layer.single.len()
                )));
            }
            for op in &layer.two {
                if inst.lattice.edge_index(op.sites.0, op.sites.1).is_none() {
                    return Err(CircuitError::Malformed(format!(
                        "layer {} gate on non-edge {:?}",
                        layer.t, op.sites
                    )));
                }
            }
        }
        Ok(inst)
    }
}
