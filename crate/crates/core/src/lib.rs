//! Vidal-gauge PEPS simulation of random quantum circuits.
//!
//! The numeric core is generic over the real type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to double precision.

pub mod analysis;
pub mod circuit;
pub mod oracle;
pub mod peps;
pub mod scalar;
pub mod tensor;

pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type Tensor = tensor::DenseTensor<f64>;
pub type Tensor32 = tensor::DenseTensor<f32>;
pub type Peps = peps::PepsState<f64>;
pub type Peps32 = peps::PepsState<f32>;
pub type StateVec = oracle::StateVector<f64>;
