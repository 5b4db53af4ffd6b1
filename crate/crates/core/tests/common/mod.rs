#![allow(dead_code)]

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rqc_peps::tensor::{DenseTensor, Leg};

pub fn random_tensor(dims: &[usize], legs: &[Leg], seed: u64) -> DenseTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(dims.to_vec(), legs.to_vec(), |_| {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
    .unwrap()
}

pub fn legs(n: usize) -> Vec<Leg> {
    (0..n as u32).map(Leg).collect()
}

/// `x†x` contracted over every leg except `keep`, as a dense matrix.
pub fn gram_over(t: &DenseTensor<f64>, keep: Leg) -> Vec<Complex<f64>> {
    let others: Vec<Leg> = t.legs().iter().copied().filter(|l| *l != keep).collect();
    let mut c = t.conj();
    c.relabel(keep, Leg(999)).unwrap();
    let g = rqc_peps::tensor::contract(&c, &others, t, &others).unwrap();
    g.data().to_vec()
}

pub fn identity_error(g: &[Complex<f64>]) -> f64 {
    let n = (g.len() as f64).sqrt() as usize;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[i * n + j] - Complex::new(target, 0.0)).norm());
        }
    }
    worst
}
