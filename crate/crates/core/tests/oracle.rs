use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rqc_peps::circuit::{
    cz_matrix, fsim_matrix, generate_instance, haar_unitary4, Gate1, Gate2, SequenceKind,
    SingleQubitGate,
};
use rqc_peps::oracle::{
    entanglement_entropy, nxeb, operator_schmidt, peps_amplitudes, ptd_distance, state_fidelity,
    statevector_run, subsystem_entropy, OracleError, StateVector,
};
use rqc_peps::Peps;

type C = Complex<f64>;

fn bit(x: usize, site: usize, n: usize) -> usize {
    (x >> (n - 1 - site)) & 1
}

/// Dense matrix element of a gate on `sites`, identity elsewhere.
fn embedded(n: usize, sites: &[usize], g: &[C], out: usize, inp: usize) -> C {
    for s in 0..n {
        if !sites.contains(&s) && bit(out, s, n) != bit(inp, s, n) {
            return C::new(0.0, 0.0);
        }
    }
    let k = sites.len();
    let row = sites.iter().fold(0, |acc, &s| acc * 2 + bit(out, s, n));
    let col = sites.iter().fold(0, |acc, &s| acc * 2 + bit(inp, s, n));
    g[row * (1 << k) + col]
}

fn apply_dense(n: usize, sites: &[usize], g: &[C], psi: &[C]) -> Vec<C> {
    let dim = 1 << n;
    (0..dim)
        .map(|out| (0..dim).map(|inp| embedded(n, sites, g, out, inp) * psi[inp]).sum())
        .collect()
}

fn random_state(n: usize, seed: u64) -> StateVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..1 << n)
        .map(|_| {
            let re: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let im: f64 = rand_distr::StandardNormal.sample(&mut rng);
            C::new(re, im)
        })
        .collect::<Vec<_>>();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn close(a: &[C], b: &[C], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
}

#[test]
fn gate_application_matches_dense_matrices() {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut psi = random_state(n, 1);
    let mut reference = psi.amplitudes().to_vec();
    let g1: Gate1<f64> = SingleQubitGate::SqrtW.matrix();
    for site in 0..n {
        psi.apply_single(site, &g1);
        reference = apply_dense(n, &[site], &g1, &reference);
    }
    for (a, b) in [(0, 1), (2, 1), (0, 3), (3, 2)] {
        let g: Gate2<f64> = haar_unitary4(&mut rng);
        psi.apply_pair(a, b, &g);
        reference = apply_dense(n, &[a, b], &g, &reference);
    }
    assert!(close(psi.amplitudes(), &reference, 1e-12));
}

#[test]
fn statevector_run_matches_dense_evolution() {
    let inst = generate_instance(2, 3, 6, SequenceKind::TwoQubitHaar, 13).unwrap();
    let psi = statevector_run::<f64>(&inst, 6, 25).unwrap();
    let n = 6;
    let mut reference = vec![C::new(0.0, 0.0); 1 << n];
    reference[0] = C::new(1.0, 0.0);
    for layer in &inst.layers {
        for (site, g) in layer.single.iter().enumerate() {
            reference = apply_dense(n, &[site], &g.matrix_c64(), &reference);
        }
        for op in &layer.two {
            let g = op.gate.matrix_c64().unwrap();
            reference = apply_dense(n, &[op.sites.0, op.sites.1], &g, &reference);
        }
    }
    assert!(close(psi.amplitudes(), &reference, 1e-12));
}

#[test]
fn qubit_cap_is_enforced() {
    let inst = generate_instance(3, 3, 1, SequenceKind::Cz, 0).unwrap();
    assert!(matches!(
        statevector_run::<f64>(&inst, 1, 8),
        Err(OracleError::TooManyQubits { n: 9, cap: 8 })
    ));
}

#[test]
fn contraction_respects_memory_cap() {
    let inst = generate_instance(3, 3, 4, SequenceKind::Cz, 0).unwrap();
    let mut s = Peps::init_product_state(&inst.lattice, 4).unwrap();
    s.run(&inst, 4).unwrap();
    assert!(matches!(peps_amplitudes(&s, 1024), Err(OracleError::Memory { .. })));
}

#[test]
fn bell_and_product_entropies() {
    let zero = C::new(0.0, 0.0);
    let h = C::new(FRAC_1_SQRT_2, 0.0);
    let bell = StateVector::from_amplitudes(vec![h, zero, zero, h]).unwrap();
    let e = entanglement_entropy(&bell, 1).unwrap();
    assert!((e.entropy - 1.0).abs() < 1e-12);
    assert!(e.spectrum.iter().all(|s| (s - FRAC_1_SQRT_2).abs() < 1e-12));

    let product = StateVector::<f64>::zero_state(5);
    for cut in 1..5 {
        assert!(entanglement_entropy(&product, cut).unwrap().entropy.abs() < 1e-12);
    }
    assert!(matches!(entanglement_entropy(&product, 0), Err(OracleError::Cut { .. })));
    assert!(matches!(entanglement_entropy(&product, 5), Err(OracleError::Cut { .. })));
}

#[test]
fn ghz_has_one_bit_across_every_subsystem() {
    let n = 5;
    let mut amps = vec![C::new(0.0, 0.0); 1 << n];
    amps[0] = C::new(FRAC_1_SQRT_2, 0.0);
    amps[(1 << n) - 1] = C::new(FRAC_1_SQRT_2, 0.0);
    let ghz = StateVector::from_amplitudes(amps).unwrap();
    for sites in [vec![0], vec![1, 3], vec![4, 0, 2]] {
        let e = subsystem_entropy(&ghz, &sites).unwrap();
        assert!((e.entropy - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pure_state_entropy_is_symmetric() {
    let psi = random_state(6, 7);
    for sites in [vec![0, 2], vec![5], vec![1, 3, 4]] {
        let rest: Vec<usize> = (0..6).filter(|s| !sites.contains(s)).collect();
        let a = subsystem_entropy(&psi, &sites).unwrap().entropy;
        let b = subsystem_entropy(&psi, &rest).unwrap().entropy;
        assert!((a - b).abs() < 1e-10);
        assert!(a <= sites.len().min(rest.len()) as f64 + 1e-12);
    }
    let prefix = subsystem_entropy(&psi, &[0, 1, 2]).unwrap().entropy;
    let cut = entanglement_entropy(&psi, 3).unwrap().entropy;
    assert!((prefix - cut).abs() < 1e-12);
}

#[test]
fn nxeb_reference_points() {
    let psi = random_state(8, 2);
    let p = psi.probabilities();
    assert!((nxeb(&p, &p).unwrap() - 1.0).abs() < 1e-12);
    let uniform = vec![1.0 / p.len() as f64; p.len()];
    assert!(nxeb(&uniform, &p).unwrap().abs() < 1e-12);
    // the model table is normalized before use
    let scaled: Vec<f64> = p.iter().map(|x| 3.0 * x).collect();
    assert!((nxeb(&scaled, &p).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(nxeb(&p, &uniform), Err(OracleError::Degenerate(_))));
    assert!(matches!(nxeb(&p[..4], &p), Err(OracleError::Length(4, 256))));
    assert!(matches!(nxeb(&vec![0.0; 256], &p), Err(OracleError::Degenerate(_))));
}

#[test]
fn porter_thomas_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let size = 1 << 16;
    let raw: Vec<f64> = (0..size).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // Kolmogorov–Smirnov 99.9% critical value is about 1.95/√N
    assert!(ptd_distance(&p) < 1.95 / (size as f64).sqrt());

    let mut delta = vec![0.0; 256];
    delta[0] = 1.0;
    assert!(ptd_distance(&delta) > 0.99);
}

#[test]
fn operator_schmidt_reference_gates() {
    let one = C::new(1.0, 0.0);
    let mut id = [C::new(0.0, 0.0); 16];
    for i in 0..4 {
        id[i * 5] = one;
    }
    assert_eq!(operator_schmidt(&id).unwrap(), vec![1.0]);

    let cz = operator_schmidt(&cz_matrix()).unwrap();
    assert_eq!(cz.len(), 2);
    assert!((cz[1] - 1.0).abs() < 1e-12);

    // iSWAP-like fSim(π/2, 0) has full operator Schmidt rank with equal weights
    let iswap = operator_schmidt(&fsim_matrix(FRAC_PI_2, 0.0).unwrap()).unwrap();
    assert_eq!(iswap.len(), 4);
    assert!(iswap.iter().all(|x| (x - 1.0).abs() < 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let haar = operator_schmidt(&haar_unitary4(&mut rng)).unwrap();
    assert_eq!(haar.len(), 4);
}

#[test]
fn single_precision_oracle_tracks_double() {
    let inst = generate_instance(3, 3, 8, SequenceKind::TwoQubitHaar, 4).unwrap();
    let a = statevector_run::<f64>(&inst, 8, 25).unwrap();
    let b = statevector_run::<f32>(&inst, 8, 25).unwrap();
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        assert!((x - C::new(y.re as f64, y.im as f64)).norm() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_is_norm_preserving(seed in any::<u64>(), kind in 0usize..3, depth in 0usize..10) {
        let seq = [SequenceKind::Cz, SequenceKind::FSim { theta: 0.7, phi: 1.9 }, SequenceKind::TwoQubitHaar][kind];
        let inst = generate_instance(3, 3, depth, seq, seed).unwrap();
        let psi = statevector_run::<f64>(&inst, depth, 25).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        let p = psi.probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_phase_and_scale_invariant(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let a = random_state(5, seed);
        let b = random_state(5, seed.wrapping_add(1));
        let z = C::new(re, im);
        let scaled = StateVector::from_amplitudes(a.amplitudes().iter().map(|x| x * z).collect()).unwrap();
        prop_assert!((state_fidelity(&a, &scaled) - 1.0).abs() < 1e-12);
        let f = state_fidelity(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((f - state_fidelity(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounded_by_cut(seed in any::<u64>(), cut in 1usize..7) {
        let psi = random_state(7, seed);
        let e = entanglement_entropy(&psi, cut).unwrap();
        prop_assert!(e.entropy >= -1e-12);
        prop_assert!(e.entropy <= cut.min(7 - cut) as f64 + 1e-12);
        prop_assert!(e.spectrum.windows(2).all(|w| w[0] >= w[1]));
        let total: f64 = e.spectrum.iter().map(|s| s * s).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}
