//! Dense complex tensors with labelled legs.
//!
//! Storage is row-major: the **last** leg varies fastest. A tensor with
//! dims `[d0, d1, d2]` stores element `(i, j, k)` at `(i * d1 + j) * d2 + k`.
//! Every reshape performed by this module is an explicit permute-then-view,
//! so callers never depend on anything but this one convention.

use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Opaque leg label. Labels are unique within one tensor.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Leg(pub u32);

impl fmt::Debug for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("data length {got} does not match product of dims {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("{dims} dims but {legs} leg labels")]
    RankMismatch { dims: usize, legs: usize },
    #[error("leg {0:?} appears more than once")]
    DuplicateLeg(Leg),
    #[error("unknown leg {0:?}")]
    UnknownLeg(Leg),
    #[error("extent mismatch: leg {a:?} has {extent_a}, leg {b:?} has {extent_b}")]
    DimensionMismatch {
        a: Leg,
        b: Leg,
        extent_a: usize,
        extent_b: usize,
    },
    #[error("contracted leg lists differ in length ({0} vs {1})")]
    LegCountMismatch(usize, usize),
    #[error("zero extent on leg {0:?}")]
    ZeroExtent(Leg),
    #[error("invalid split: {0}")]
    InvalidSplit(&'static str),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("index {index} out of range for leg {leg:?} of extent {extent}")]
    IndexOutOfRange { leg: Leg, index: usize, extent: usize },
    #[error("factorization failed to converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Complex multi-index array with named legs.
#[derive(Clone, PartialEq)]
pub struct DenseTensor<R: Real = f64> {
    dims: Vec<usize>,
    legs: Vec<Leg>,
    data: Vec<Complex<R>>,
}

impl<R: Real> fmt::Debug for DenseTensor<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("dims", &self.dims)
            .field("legs", &self.legs)
            .field("len", &self.data.len())
            .finish()
    }
}

/// Result of a (possibly truncated) SVD across a row/column split.
#[derive(Clone, Debug)]
pub struct SvdResult<R: Real = f64> {
    /// Row legs followed by the new bond leg.
    pub left_isometry: DenseTensor<R>,
    /// Kept singular values, non-increasing.
    pub singular_values: Vec<R>,
    /// The new bond leg followed by the column legs.
    pub right_isometry: DenseTensor<R>,
    /// Dropped squared weight over total squared weight.
    pub discarded_weight: f64,
    pub kept_rank: usize,
    /// Every singular value before truncation.
    pub full_spectrum: Vec<R>,
}

fn check_unique(legs: &[Leg]) -> Result<()> {
    for (i, l) in legs.iter().enumerate() {
        if legs[..i].contains(l) {
            return Err(TensorError::DuplicateLeg(*l));
        }
    }
    Ok(())
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

/// Copies `src` (row-major with `dims`) into the axis order `perm`, i.e.
/// output axis `k` is source axis `perm[k]`.
fn permute_data<T: Copy>(src: &[T], dims: &[usize], perm: &[usize]) -> Vec<T> {
    let n = dims.len();
    let total = src.len();
    if n <= 1 || perm.iter().enumerate().all(|(i, &p)| i == p) {
        return src.to_vec();
    }
    let src_strides = strides_of(dims);
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let read_strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    let inner = out_dims[n - 1];
    let inner_stride = read_strides[n - 1];
    let mut counter = vec![0usize; n - 1];
    let mut base = 0usize;
    loop {
        if inner_stride == 1 {
            out.extend_from_slice(&src[base..base + inner]);
        } else {
            let mut off = base;
            for _ in 0..inner {
                out.push(src[off]);
                off += inner_stride;
            }
        }
        // odometer over the outer axes
        let mut axis = n - 1;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            counter[axis] += 1;
            base += read_strides[axis];
            if counter[axis] < out_dims[axis] {
                break;
            }
            base -= read_strides[axis] * out_dims[axis];
            counter[axis] = 0;
        }
    }
}

impl<R: Real> DenseTensor<R> {
    pub fn new(dims: Vec<usize>, legs: Vec<Leg>, data: Vec<Complex<R>>) -> Result<Self> {
        if dims.len() != legs.len() {
            return Err(TensorError::RankMismatch {
                dims: dims.len(),
                legs: legs.len(),
            });
        }
        check_unique(&legs)?;
        for (d, l) in dims.iter().zip(&legs) {
            if *d == 0 {
                return Err(TensorError::ZeroExtent(*l));
            }
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { dims, legs, data })
    }

    pub fn zeros(dims: Vec<usize>, legs: Vec<Leg>) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims, legs, vec![Complex::zero(); len])
    }

    /// Builds a tensor by evaluating `f` on every multi-index (row-major order).
    pub fn from_fn(
        dims: Vec<usize>,
        legs: Vec<Leg>,
        mut f: impl FnMut(&[usize]) -> Complex<R>,
    ) -> Result<Self> {
        let len: usize = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for axis in (0..dims.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < dims[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        Self::new(dims, legs, data)
    }

    /// Rank-0 tensor.
    pub fn scalar(value: Complex<R>) -> Self {
        Self {
            dims: Vec::new(),
            legs: Vec::new(),
            data: vec![value],
        }
    }

    /// A real diagonal matrix `diag(values)` on legs `(a, b)`.
    pub fn diagonal(values: &[R], a: Leg, b: Leg) -> Result<Self> {
        let n = values.len();
        Self::from_fn(vec![n, n], vec![a, b], |i| {
            if i[0] == i[1] {
                Complex::new(values[i[0]], R::zero())
            } else {
                Complex::zero()
            }
        })
    }

    /// Identity on legs `(a, b)` of extent `n`.
    pub fn identity(n: usize, a: Leg, b: Leg) -> Result<Self> {
        Self::from_fn(vec![n, n], vec![a, b], |i| {
            if i[0] == i[1] {
                Complex::one()
            } else {
                Complex::zero()
            }
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn data(&self) -> &[Complex<R>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<R>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<R>> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn position(&self, leg: Leg) -> Result<usize> {
        self.legs
            .iter()
            .position(|l| *l == leg)
            .ok_or(TensorError::UnknownLeg(leg))
    }

    pub fn has_leg(&self, leg: Leg) -> bool {
        self.legs.contains(&leg)
    }

    pub fn extent(&self, leg: Leg) -> Result<usize> {
        Ok(self.dims[self.position(leg)?])
    }

    /// Value at a multi-index given in the tensor's own leg order.
    pub fn get(&self, idx: &[usize]) -> Complex<R> {
        let mut off = 0;
        for (i, d) in idx.iter().zip(&self.dims) {
            off = off * d + i;
        }
        self.data[off]
    }

    /// Reorders the legs to `order` (which must be a permutation of the legs).
    pub fn permute(&self, order: &[Leg]) -> Result<Self> {
        let perm = self.permutation_to(order)?;
        let data = permute_data(&self.data, &self.dims, &perm);
        Ok(Self {
            dims: perm.iter().map(|&p| self.dims[p]).collect(),
            legs: order.to_vec(),
            data,
        })
    }

    fn permutation_to(&self, order: &[Leg]) -> Result<Vec<usize>> {
        if order.len() != self.legs.len() {
            return Err(TensorError::LegCountMismatch(order.len(), self.legs.len()));
        }
        check_unique(order)?;
        order.iter().map(|l| self.position(*l)).collect()
    }

    /// Renames one leg.
    pub fn relabel(&mut self, from: Leg, to: Leg) -> Result<()> {
        let pos = self.position(from)?;
        if from != to && self.has_leg(to) {
            return Err(TensorError::DuplicateLeg(to));
        }
        self.legs[pos] = to;
        Ok(())
    }

    /// Replaces all labels at once (same order as the current legs).
    pub fn with_legs(mut self, legs: Vec<Leg>) -> Result<Self> {
        if legs.len() != self.legs.len() {
            return Err(TensorError::LegCountMismatch(legs.len(), self.legs.len()));
        }
        check_unique(&legs)?;
        self.legs = legs;
        Ok(self)
    }

    /// Reinterprets the data with new dims/legs (same element count and order).
    pub fn reshape(self, dims: Vec<usize>, legs: Vec<Leg>) -> Result<Self> {
        Self::new(dims, legs, self.data)
    }

    pub fn scale(&self, alpha: Complex<R>) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x = *x * alpha);
        out
    }

    pub fn scale_real_mut(&mut self, alpha: R) {
        self.data.iter_mut().for_each(|x| *x = x.scale(alpha));
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x = x.conj());
        out
    }

    /// Frobenius norm.
    pub fn norm(&self) -> R {
        self.data.iter().map(|x| x.norm_sqr()).sum::<R>().sqrt()
    }

    pub fn norm_sqr(&self) -> R {
        self.data.iter().map(|x| x.norm_sqr()).sum::<R>()
    }

    /// Frobenius distance to `other` after aligning leg order by label.
    pub fn distance(&self, other: &Self) -> Result<R> {
        let aligned = other.permute(&self.legs)?;
        if aligned.dims != self.dims {
            return Err(TensorError::DataLength {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&aligned.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<R>()
            .sqrt())
    }

    /// Multiplies every slice along `leg` by the matching entry of `weights`.
    pub fn scale_leg(&mut self, leg: Leg, weights: &[R]) -> Result<()> {
        let pos = self.position(leg)?;
        let extent = self.dims[pos];
        if weights.len() != extent {
            return Err(TensorError::DimensionMismatch {
                a: leg,
                b: leg,
                extent_a: extent,
                extent_b: weights.len(),
            });
        }
        let inner: usize = self.dims[pos + 1..].iter().product();
        for (chunk_idx, chunk) in self.data.chunks_mut(inner).enumerate() {
            let w = weights[chunk_idx % extent];
            chunk.iter_mut().for_each(|x| *x = x.scale(w));
        }
        Ok(())
    }

    /// Fixes `leg` to `index` and removes it.
    pub fn slice(&self, leg: Leg, index: usize) -> Result<Self> {
        let pos = self.position(leg)?;
        let extent = self.dims[pos];
        if index >= extent {
            return Err(TensorError::IndexOutOfRange { leg, index, extent });
        }
        let inner: usize = self.dims[pos + 1..].iter().product();
        let outer: usize = self.dims[..pos].iter().product();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * extent + index) * inner;
            data.extend_from_slice(&self.data[start..start + inner]);
        }
        let mut dims = self.dims.clone();
        let mut legs = self.legs.clone();
        dims.remove(pos);
        legs.remove(pos);
        Ok(Self { dims, legs, data })
    }

    /// Removes an extent-1 leg.
    pub fn squeeze(mut self, leg: Leg) -> Result<Self> {
        let pos = self.position(leg)?;
        if self.dims[pos] != 1 {
            return Err(TensorError::DimensionMismatch {
                a: leg,
                b: leg,
                extent_a: self.dims[pos],
                extent_b: 1,
            });
        }
        self.dims.remove(pos);
        self.legs.remove(pos);
        Ok(self)
    }

    /// Splits the legs into `row_legs` and the rest (in current order), and
    /// returns the permuted data as a row-major matrix.
    fn as_matrix(&self, row_legs: &[Leg]) -> Result<(Vec<Complex<R>>, usize, usize, Vec<Leg>)> {
        check_unique(row_legs)?;
        for l in row_legs {
            self.position(*l)?;
        }
        let col_legs: Vec<Leg> = self
            .legs
            .iter()
            .copied()
            .filter(|l| !row_legs.contains(l))
            .collect();
        let order: Vec<Leg> = row_legs.iter().chain(&col_legs).copied().collect();
        let perm = self.permutation_to(&order)?;
        let rows: usize = row_legs.iter().map(|l| self.extent(*l).unwrap()).product();
        let cols = self.len() / rows;
        Ok((permute_data(&self.data, &self.dims, &perm), rows, cols, col_legs))
    }

    fn extents_of(&self, legs: &[Leg]) -> Vec<usize> {
        legs.iter().map(|l| self.extent(*l).unwrap()).collect()
    }
}

/// Sum over pairs of legs `legs_a[k]` (of `a`) and `legs_b[k]` (of `b`).
///
/// The result carries the free legs of `a` followed by those of `b`, each in
/// their original order.
pub fn contract<R: Real>(
    a: &DenseTensor<R>,
    legs_a: &[Leg],
    b: &DenseTensor<R>,
    legs_b: &[Leg],
) -> Result<DenseTensor<R>> {
    if legs_a.len() != legs_b.len() {
        return Err(TensorError::LegCountMismatch(legs_a.len(), legs_b.len()));
    }
    check_unique(legs_a)?;
    check_unique(legs_b)?;
    let mut k = 1usize;
    for (la, lb) in legs_a.iter().zip(legs_b) {
        let ea = a.extent(*la)?;
        let eb = b.extent(*lb)?;
        if ea != eb {
            return Err(TensorError::DimensionMismatch {
                a: *la,
                b: *lb,
                extent_a: ea,
                extent_b: eb,
            });
        }
        k *= ea;
    }
    let free_a: Vec<Leg> = a.legs.iter().copied().filter(|l| !legs_a.contains(l)).collect();
    let free_b: Vec<Leg> = b.legs.iter().copied().filter(|l| !legs_b.contains(l)).collect();
    let mut out_legs = free_a.clone();
    out_legs.extend_from_slice(&free_b);
    check_unique(&out_legs)?;

    let mut out_dims = a.extents_of(&free_a);
    out_dims.extend(b.extents_of(&free_b));
    let m: usize = a.extents_of(&free_a).iter().product();
    let n: usize = b.extents_of(&free_b).iter().product();

    let order_a: Vec<Leg> = free_a.iter().chain(legs_a).copied().collect();
    let order_b: Vec<Leg> = legs_b.iter().chain(&free_b).copied().collect();
    let perm_a = a.permutation_to(&order_a)?;
    let perm_b = b.permutation_to(&order_b)?;
    let identity = |p: &[usize]| p.iter().enumerate().all(|(i, &x)| i == x);
    let pa;
    let da: &[Complex<R>] = if identity(&perm_a) {
        &a.data
    } else {
        pa = permute_data(&a.data, &a.dims, &perm_a);
        &pa
    };
    let pb;
    let db: &[Complex<R>] = if identity(&perm_b) {
        &b.data
    } else {
        pb = permute_data(&b.data, &b.dims, &perm_b);
        &pb
    };
    let mut data = vec![Complex::zero(); m * n];
    R::gemm(m, k, n, da, db, &mut data);
    Ok(DenseTensor {
        dims: out_dims,
        legs: out_legs,
        data,
    })
}

/// Contracts every leg label the two tensors share.
pub fn contract_shared<R: Real>(a: &DenseTensor<R>, b: &DenseTensor<R>) -> Result<DenseTensor<R>> {
    let shared: Vec<Leg> = a.legs.iter().copied().filter(|l| b.has_leg(*l)).collect();
    contract(a, &shared, b, &shared)
}

fn validate_split<R: Real>(t: &DenseTensor<R>, row_legs: &[Leg], bond: Leg) -> Result<()> {
    if row_legs.is_empty() {
        return Err(TensorError::InvalidSplit("row legs are empty"));
    }
    if row_legs.len() >= t.rank() {
        return Err(TensorError::InvalidSplit("row legs cover every leg"));
    }
    for l in row_legs {
        t.position(*l)?;
    }
    check_unique(row_legs)?;
    if t.has_leg(bond) {
        return Err(TensorError::DuplicateLeg(bond));
    }
    Ok(())
}

/// Thin QR across `row_legs | rest`.
///
/// `q` carries `row_legs` then `bond`; `r` carries `bond` then the remaining
/// legs. The bond extent is `min(rows, cols)` and `r` has a real,
/// non-negative diagonal.
pub fn qr_split<R: Real>(
    t: &DenseTensor<R>,
    row_legs: &[Leg],
    bond: Leg,
) -> Result<(DenseTensor<R>, DenseTensor<R>)> {
    validate_split(t, row_legs, bond)?;
    let (mat, m, n, col_legs) = t.as_matrix(row_legs)?;
    let (mut q, mut r) = R::qr_thin(m, n, &mat);
    let p = m.min(n);
    for i in 0..p {
        let d = r[i * n + i];
        let mag = d.norm();
        if mag > R::zero() {
            let phase = d / Complex::new(mag, R::zero());
            let conj = phase.conj();
            for j in 0..n {
                r[i * n + j] = r[i * n + j] * conj;
            }
            r[i * n + i] = Complex::new(mag, R::zero());
            for row in 0..m {
                q[row * p + i] = q[row * p + i] * phase;
            }
        }
    }
    let mut q_dims = t.extents_of(row_legs);
    q_dims.push(p);
    let mut q_legs = row_legs.to_vec();
    q_legs.push(bond);
    let mut r_dims = vec![p];
    r_dims.extend(t.extents_of(&col_legs));
    let mut r_legs = vec![bond];
    r_legs.extend(col_legs);
    Ok((
        DenseTensor::new(q_dims, q_legs, q)?,
        DenseTensor::new(r_dims, r_legs, r)?,
    ))
}

/// Thin SVD across `row_legs | rest`, keeping at most `max_rank` values and
/// only those strictly above `cutoff * sigma_max`.
pub fn svd_truncated<R: Real>(
    t: &DenseTensor<R>,
    row_legs: &[Leg],
    max_rank: usize,
    cutoff: f64,
    bond: Leg,
) -> Result<SvdResult<R>> {
    if max_rank == 0 {
        return Err(TensorError::InvalidSplit("max_rank must be at least 1"));
    }
    validate_split(t, row_legs, bond)?;
    let (mat, m, n, col_legs) = t.as_matrix(row_legs)?;
    let (u, s, vh) = R::svd_thin(m, n, &mat).ok_or(TensorError::NoConvergence)?;
    let p = s.len();
    let total: f64 = s.iter().map(|x| x.to_f64_lossless().powi(2)).sum();
    if total == 0.0 || !total.is_finite() {
        return Err(TensorError::DegenerateInput("all singular values vanish"));
    }
    let smax = s[0].to_f64_lossless();
    let above = s
        .iter()
        .take_while(|x| x.to_f64_lossless() > cutoff * smax)
        .count();
    let kept = max_rank.min(above).min(p).max(1);
    let dropped: f64 = s[kept..].iter().fold(0.0, |acc, x| acc + x.to_f64_lossless().powi(2));
    let discarded_weight = (dropped / total).clamp(0.0, 1.0);

    let mut u_kept = Vec::with_capacity(m * kept);
    for row in 0..m {
        u_kept.extend_from_slice(&u[row * p..row * p + kept]);
    }
    let vh_kept = vh[..kept * n].to_vec();

    let mut l_dims = t.extents_of(row_legs);
    l_dims.push(kept);
    let mut l_legs = row_legs.to_vec();
    l_legs.push(bond);
    let mut r_dims = vec![kept];
    r_dims.extend(t.extents_of(&col_legs));
    let mut r_legs = vec![bond];
    r_legs.extend(col_legs);
    Ok(SvdResult {
        left_isometry: DenseTensor::new(l_dims, l_legs, u_kept)?,
        singular_values: s[..kept].to_vec(),
        right_isometry: DenseTensor::new(r_dims, r_legs, vh_kept)?,
        discarded_weight,
        kept_rank: kept,
        full_spectrum: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    type T = DenseTensor<f64>;
    const I: Leg = Leg(0);
    const J: Leg = Leg(1);
    const K: Leg = Leg(2);
    const L: Leg = Leg(3);
    const B: Leg = Leg(9);

    fn mat(rows: usize, cols: usize, vals: &[(f64, f64)]) -> T {
        T::new(
            vec![rows, cols],
            vec![I, J],
            vals.iter().map(|&(a, b)| cplx(a, b)).collect(),
        )
        .unwrap()
    }

    fn pseudo_random(dims: Vec<usize>, legs: Vec<Leg>, seed: u64) -> T {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        T::from_fn(dims, legs, |_| cplx(next(), next())).unwrap()
    }

    #[test]
    fn identity_times_vector() {
        let id = T::identity(2, I, J).unwrap();
        let v = T::new(vec![2], vec![J], vec![cplx(3., 0.), cplx(0., 4.)]).unwrap();
        let out = contract(&id, &[J], &v, &[J]).unwrap();
        assert_eq!(out.legs(), &[I]);
        assert_eq!(out.data(), &[cplx(3., 0.), cplx(0., 4.)]);
    }

    #[test]
    fn two_by_two_matrix_product() {
        let a = mat(2, 2, &[(1., 0.), (2., 0.), (3., 0.), (4., 0.)]);
        let b = mat(2, 2, &[(5., 0.), (6., 0.), (7., 0.), (8., 0.)])
            .with_legs(vec![J, K])
            .unwrap();
        let c = contract(&a, &[J], &b, &[J]).unwrap();
        assert_eq!(c.legs(), &[I, K]);
        assert_eq!(
            c.data(),
            &[cplx(19., 0.), cplx(22., 0.), cplx(43., 0.), cplx(50., 0.)]
        );
    }

    #[test]
    fn normalized_lambda_closes_to_one() {
        let sigma = [0.8, 0.6];
        let lam = T::diagonal(&sigma, I, J).unwrap();
        let out = contract(&lam, &[I, J], &lam, &[I, J]).unwrap();
        assert_eq!(out.rank(), 0);
        assert!((out.data()[0] - cplx(1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn contract_errors() {
        let a = mat(2, 2, &[(1., 0.); 4]);
        let b = T::zeros(vec![3, 2], vec![K, L]).unwrap();
        assert!(matches!(
            contract(&a, &[J], &b, &[K]),
            Err(TensorError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            contract(&a, &[Leg(42)], &b, &[L]),
            Err(TensorError::UnknownLeg(Leg(42)))
        ));
    }

    #[test]
    fn new_rejects_bad_shapes() {
        assert!(matches!(
            T::new(vec![2, 2], vec![I, J], vec![cplx(0., 0.); 3]),
            Err(TensorError::DataLength { .. })
        ));
        assert!(matches!(
            T::new(vec![2, 2], vec![I, I], vec![cplx(0., 0.); 4]),
            Err(TensorError::DuplicateLeg(_))
        ));
    }

    #[test]
    fn permute_matches_index_remap() {
        let t = pseudo_random(vec![2, 3, 4], vec![I, J, K], 1);
        let p = t.permute(&[K, I, J]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(t.get(&[i, j, k]), p.get(&[k, i, j]));
                }
            }
        }
    }

    #[test]
    fn scale_leg_and_slice() {
        let mut t = pseudo_random(vec![2, 3], vec![I, J], 2);
        let orig = t.clone();
        t.scale_leg(J, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.get(&[1, 2]), orig.get(&[1, 2]) * 3.0);
        let s = t.slice(I, 1).unwrap();
        assert_eq!(s.legs(), &[J]);
        assert_eq!(s.get(&[1]), t.get(&[1, 1]));
    }

    #[test]
    fn qr_of_unitary_is_phase_fixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = mat(2, 2, &[(h, 0.), (0., h), (0., h), (h, 0.)]);
        let (q, r) = qr_split(&u, &[I], B).unwrap();
        assert!(r.get(&[1, 0]).norm() < 1e-14);
        for i in 0..2 {
            assert!(r.get(&[i, i]).im.abs() < 1e-14 && r.get(&[i, i]).re > 0.0);
            assert!((r.get(&[i, i]).re - 1.0).abs() < 1e-12);
        }
        let mut qc = q.conj();
        qc.relabel(B, Leg(10)).unwrap();
        let qdq = contract(&qc, &[I], &q, &[I]).unwrap();
        let id = T::identity(2, Leg(10), B).unwrap();
        assert!(qdq.distance(&id).unwrap() < 1e-12);
    }

    #[test]
    fn qr_of_rank_one_matrix() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let w = [0.3, 0.1, -1.0, 2.0];
        let t = T::from_fn(vec![4, 4], vec![I, J], |i| cplx(v[i[0]] * w[i[1]], 0.)).unwrap();
        let (q, r) = qr_split(&t, &[I], B).unwrap();
        for row in 1..4 {
            for col in 0..4 {
                assert!(r.get(&[row, col]).norm() < 1e-12);
            }
        }
        let back = contract(&q, &[B], &r, &[B]).unwrap();
        assert!(back.distance(&t).unwrap() < 1e-12 * t.norm());
    }

    #[test]
    fn qr_isometry_on_random_rank_four() {
        let t = pseudo_random(vec![2, 2, 2, 2], vec![I, J, K, L], 7);
        let (q, r) = qr_split(&t, &[I, J], B).unwrap();
        assert_eq!(q.extent(B).unwrap(), 4);
        let mut qc = q.conj();
        qc.relabel(B, Leg(10)).unwrap();
        let qdq = contract(&qc, &[I, J], &q, &[I, J]).unwrap();
        assert!(qdq.distance(&T::identity(4, Leg(10), B).unwrap()).unwrap() < 1e-12);
        let back = contract(&q, &[B], &r, &[B]).unwrap();
        assert!(back.distance(&t).unwrap() < 1e-12 * t.norm());
    }

    #[test]
    fn split_rejects_empty_or_full_rows() {
        let t = pseudo_random(vec![2, 2], vec![I, J], 3);
        assert!(matches!(qr_split(&t, &[], B), Err(TensorError::InvalidSplit(_))));
        assert!(matches!(
            qr_split(&t, &[I, J], B),
            Err(TensorError::InvalidSplit(_))
        ));
    }

    #[test]
    fn svd_of_diag() {
        let t = mat(2, 2, &[(0.8, 0.), (0., 0.), (0., 0.), (0.6, 0.)]);
        let res = svd_truncated(&t, &[I], 1, 0.0, B).unwrap();
        assert_eq!(res.kept_rank, 1);
        assert!((res.singular_values[0] - 0.8).abs() < 1e-15);
        assert!((res.discarded_weight - 0.36).abs() < 1e-15);
    }

    #[test]
    fn svd_of_scaled_hadamard() {
        let t = mat(2, 2, &[(0.5, 0.), (0.5, 0.), (0.5, 0.), (-0.5, 0.)]);
        let res = svd_truncated(&t, &[I], 2, 0.0, B).unwrap();
        assert_eq!(res.kept_rank, 2);
        for s in &res.singular_values {
            assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!(res.discarded_weight.abs() < 1e-30);
    }

    #[test]
    fn svd_of_rank_one_outer_product() {
        let a = pseudo_random(vec![4], vec![I], 11);
        let b = pseudo_random(vec![4], vec![J], 12);
        let t = contract(&a, &[], &b, &[]).unwrap();
        let res = svd_truncated(&t, &[I], 4, 1e-12, B).unwrap();
        assert_eq!(res.kept_rank, 1);
        assert!(res.discarded_weight <= 1e-24);
    }

    #[test]
    fn svd_reconstruction_error_matches_discarded_weight() {
        let t = pseudo_random(vec![3, 2, 2, 3], vec![I, J, K, L], 5);
        for rank in 1..=6 {
            let res = svd_truncated(&t, &[I, J], rank, 0.0, B).unwrap();
            let mut us = res.left_isometry.clone();
            us.scale_leg(B, &res.singular_values).unwrap();
            let back = contract(&us, &[B], &res.right_isometry, &[B]).unwrap();
            let err = back.distance(&t).unwrap();
            let expect = res.discarded_weight.sqrt() * t.norm();
            assert!((err - expect).abs() <= 1e-10 * t.norm(), "rank {rank}");
        }
    }

    #[test]
    fn svd_of_zero_tensor_is_degenerate() {
        let t = T::zeros(vec![2, 2], vec![I, J]).unwrap();
        assert!(matches!(
            svd_truncated(&t, &[I], 2, 0.0, B),
            Err(TensorError::DegenerateInput(_))
        ));
    }
}
