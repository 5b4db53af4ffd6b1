//! Real scalar trait and the dense linear-algebra backend.
//!
//! Every numeric routine in the crate is generic over a real type `R`
//! (`f32` or `f64`); tensors, state vectors and gates hold `Complex<R>`.
//! The handful of factorizations the tensor layer needs (matrix product,
//! thin QR, thin SVD, Hermitian eigenvalues) are exposed as associated
//! functions here so generic code never names the backend directly.
//!
//! All matrices crossing this boundary are dense and **row-major**.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use faer::linalg::matmul::matmul;
use faer::traits::ext::ComplexFieldExt;
use faer::{Accum, MatMut, MatRef, Par, Side};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

mod sealed {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// A floating-point real type usable as the base field of the simulator.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
    + sealed::Sealed
{
    /// Lossy conversion from `f64` (exact for `f64`).
    fn of(x: f64) -> Self;

    /// Widening conversion to `f64`.
    fn to_f64_lossless(self) -> f64;

    /// `out[m×n] = a[m×k] · b[k×n]` (row-major, overwrites `out`).
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Complex<Self>],
        b: &[Complex<Self>],
        out: &mut [Complex<Self>],
    );

    /// `out[m×n] += a[m×k] · b[k×n]`.
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Complex<Self>],
        b: &[Complex<Self>],
        out: &mut [Complex<Self>],
    );

    /// `out[n×n] = a^† a` for a row-major `a[m×n]`.
    fn gram(m: usize, n: usize, a: &[Complex<Self>], out: &mut [Complex<Self>]);

    /// Thin QR of `a[m×n]`: returns `(q[m×p], r[p×n])` with `p = min(m, n)`.
    fn qr_thin(m: usize, n: usize, a: &[Complex<Self>]) -> (Vec<Complex<Self>>, Vec<Complex<Self>>);

    /// The `R` factor (`p×n`, `p = min(m, n)`) of a thin QR, without forming `Q`.
    fn qr_r(m: usize, n: usize, a: &[Complex<Self>]) -> Vec<Complex<Self>>;

    /// Upper-triangular `R[n×n]` with `R^† R = a^† a`, via Cholesky of the Gram
    /// matrix. `None` if the Gram matrix is not numerically positive definite.
    fn gram_cholesky(m: usize, n: usize, a: &[Complex<Self>]) -> Option<Vec<Complex<Self>>>;

    /// Thin SVD of `a[m×n]`: returns `(u[m×p], s[p], vh[p×n])`, `s` non-increasing.
    fn svd_thin(
        m: usize,
        n: usize,
        a: &[Complex<Self>],
    ) -> Option<(Vec<Complex<Self>>, Vec<Self>, Vec<Complex<Self>>)>;

    /// Singular values of `a[m×n]` in non-increasing order.
    fn singular_values(m: usize, n: usize, a: &[Complex<Self>]) -> Option<Vec<Self>>;

    /// Eigenvalues of the Hermitian matrix `a[n×n]` in non-decreasing order.
    fn hermitian_eigenvalues(n: usize, a: &[Complex<Self>]) -> Option<Vec<Self>>;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossless(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Complex<Self>],
                b: &[Complex<Self>],
                out: &mut [Complex<Self>],
            ) {
                gemm_impl(m, k, n, a, b, out, Accum::Replace)
            }

            fn gemm_acc(
                m: usize,
                k: usize,
                n: usize,
                a: &[Complex<Self>],
                b: &[Complex<Self>],
                out: &mut [Complex<Self>],
            ) {
                gemm_impl(m, k, n, a, b, out, Accum::Add)
            }

            fn gram(m: usize, n: usize, a: &[Complex<Self>], out: &mut [Complex<Self>]) {
                gram_impl(m, n, a, out)
            }

            fn qr_thin(
                m: usize,
                n: usize,
                a: &[Complex<Self>],
            ) -> (Vec<Complex<Self>>, Vec<Complex<Self>>) {
                qr_impl(m, n, a)
            }

            fn qr_r(m: usize, n: usize, a: &[Complex<Self>]) -> Vec<Complex<Self>> {
                if m.min(n) == 0 {
                    return Vec::new();
                }
                to_row_major(MatRef::from_row_major_slice(a, m, n).qr().thin_R())
            }

            fn gram_cholesky(m: usize, n: usize, a: &[Complex<Self>]) -> Option<Vec<Complex<Self>>> {
                let mut g = vec![Complex::new(0.0, 0.0); n * n];
                gram_impl(m, n, a, &mut g);
                let llt = MatRef::from_row_major_slice(&g, n, n).llt(Side::Lower).ok()?;
                let l = llt.L();
                let mut r = vec![Complex::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in i..n {
                        r[i * n + j] = l[(j, i)].conj();
                    }
                }
                Some(r)
            }

            fn svd_thin(
                m: usize,
                n: usize,
                a: &[Complex<Self>],
            ) -> Option<(Vec<Complex<Self>>, Vec<Self>, Vec<Complex<Self>>)> {
                svd_impl(m, n, a)
            }

            fn singular_values(m: usize, n: usize, a: &[Complex<Self>]) -> Option<Vec<Self>> {
                if m == 0 || n == 0 {
                    return Some(Vec::new());
                }
                MatRef::from_row_major_slice(a, m, n).singular_values().ok()
            }

            fn hermitian_eigenvalues(n: usize, a: &[Complex<Self>]) -> Option<Vec<Self>> {
                if n == 0 {
                    return Some(Vec::new());
                }
                MatRef::from_row_major_slice(a, n, n)
                    .self_adjoint_eigenvalues(Side::Lower)
                    .ok()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

fn gemm_impl<T: faer::traits::ComplexField + Copy>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    b: &[T],
    out: &mut [T],
    accum: Accum,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let dst = MatMut::from_row_major_slice_mut(out, m, n);
    if k == 0 {
        if matches!(accum, Accum::Replace) {
            for v in dst.row_iter_mut() {
                for x in v.iter_mut() {
                    *x = T::zero_impl();
                }
            }
        }
        return;
    }
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    matmul(dst, accum, lhs, rhs, T::one_impl(), Par::Seq);
}

fn gram_impl<T: faer::traits::ComplexField + Copy>(m: usize, n: usize, a: &[T], out: &mut [T]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(out.len(), n * n);
    let dst = MatMut::from_row_major_slice_mut(out, n, n);
    let mat = MatRef::from_row_major_slice(a, m, n);
    matmul(dst, Accum::Replace, mat.adjoint(), mat, T::one_impl(), Par::Seq);
}

fn to_row_major<T: Copy>(m: MatRef<'_, T>) -> Vec<T> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn qr_impl<T: faer::traits::ComplexField + Copy>(m: usize, n: usize, a: &[T]) -> (Vec<T>, Vec<T>) {
    let p = m.min(n);
    if p == 0 {
        return (Vec::new(), Vec::new());
    }
    let qr = MatRef::from_row_major_slice(a, m, n).qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    (to_row_major(q.as_ref()), to_row_major(r))
}

#[allow(clippy::type_complexity)]
fn svd_impl<T, R>(m: usize, n: usize, a: &[T]) -> Option<(Vec<T>, Vec<R>, Vec<T>)>
where
    T: faer::traits::ComplexField<Real = R> + Copy,
    R: Copy,
{
    let p = m.min(n);
    if p == 0 {
        return Some((Vec::new(), Vec::new(), Vec::new()));
    }
    let svd = MatRef::from_row_major_slice(a, m, n).thin_svd().ok()?;
    let u = to_row_major(svd.U());
    let s: Vec<R> = svd.S().column_vector().iter().map(|x| x.real()).collect();
    let v = svd.V();
    let mut vh = Vec::with_capacity(p * n);
    for i in 0..p {
        for j in 0..n {
            vh.push(v[(j, i)].conj());
        }
    }
    Some((u, s, vh))
}

/// `Complex<R>` built from `f64` parts.
#[inline]
pub fn cplx<R: Real>(re: f64, im: f64) -> Complex<R> {
    Complex::new(R::of(re), R::of(im))
}

/// Converts a double-precision complex value into `Complex<R>`.
#[inline]
pub fn from_c64<R: Real>(z: Complex<f64>) -> Complex<R> {
    Complex::new(R::of(z.re), R::of(z.im))
}

/// Widens a `Complex<R>` to double precision.
#[inline]
pub fn to_c64<R: Real>(z: Complex<R>) -> Complex<f64> {
    Complex::new(z.re.to_f64_lossless(), z.im.to_f64_lossless())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn gemm_row_major() {
        let a = [c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)];
        let b = [c(5., 0.), c(6., 0.), c(7., 0.), c(8., 0.)];
        let mut out = [c(0., 0.); 4];
        f64::gemm(2, 2, 2, &a, &b, &mut out);
        assert_eq!(out, [c(19., 0.), c(22., 0.), c(43., 0.), c(50., 0.)]);
        f64::gemm_acc(2, 2, 2, &a, &b, &mut out);
        assert_eq!(out[3], c(100., 0.));
    }

    #[test]
    fn qr_reconstructs_tall_matrix() {
        let (m, n) = (5, 3);
        let a: Vec<_> = (0..m * n).map(|i| c((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let (q, r) = f64::qr_thin(m, n, &a);
        let mut back = vec![c(0., 0.); m * n];
        f64::gemm(m, 3, n, &q, &r, &mut back);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_eigenvalues_of_diag() {
        let a = [c(2., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)];
        let ev = f64::hermitian_eigenvalues(2, &a).unwrap();
        assert!((ev[0] + 1.).abs() < 1e-14 && (ev[1] - 2.).abs() < 1e-14);
    }
}
