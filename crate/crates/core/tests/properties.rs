use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reupload_core::diagnostics::{jacobian_report, max_qfim_rank};
use reupload_core::fourier::{
    coefficient_jacobian, fourier_coefficients, parallel_coefficient_reference, parallel_generic_output,
    real_representative, readout_observable, serial_c2_reference, serial_su2_output, uniform_grid, Su2,
};
use reupload_core::gradients::state_qfim;
use reupload_core::linalg::{dft_extract, sym_eig_descending, ComplexMatrix};
use reupload_core::training::init_parameters;
use reupload_core::{forward, ArchitectureSpec, RealMatrix};

fn representative(spec: &ArchitectureSpec, theta: &[f64]) -> Vec<f64> {
    real_representative(&fourier_coefficients(spec, theta).unwrap())
        .unwrap()
        .values()
        .to_vec()
}

#[test]
fn coefficient_jacobian_matches_finite_differences_of_coefficients() {
    let h = 1e-4;
    for (n, l, tbl, seed) in [(1, 2, 1, 1), (2, 2, 1, 2), (3, 1, 2, 3)] {
        let spec = ArchitectureSpec::new(n, l, tbl).unwrap();
        let theta = init_parameters(&spec, seed);
        let j = coefficient_jacobian(&spec, &theta).unwrap();
        let mut shifted = theta.clone();
        for col in 0..theta.len() {
            shifted[col] = theta[col] + h;
            let plus = representative(&spec, &shifted);
            shifted[col] = theta[col] - h;
            let minus = representative(&spec, &shifted);
            shifted[col] = theta[col];
            for (row, (p, m)) in plus.iter().zip(&minus).enumerate() {
                let fd = (p - m) / (2.0 * h);
                assert!((fd - j.matrix.get(row, col)).abs() < 1e-6, "{spec} row {row} col {col}");
            }
        }
    }
}

#[test]
fn serial_c2_matches_dft_of_generic_circuit() {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let grid = uniform_grid(9);
    for _ in 0..50 {
        let ws = [Su2::random(&mut rng), Su2::random(&mut rng), Su2::random(&mut rng)];
        let ys: Vec<f64> = grid.iter().map(|&x| serial_su2_output(&ws, x)).collect();
        let c = dft_extract(&ys, 4).unwrap();
        let expected = serial_c2_reference(&ws[0], &ws[1], &ws[2]);
        assert!((c[4 + 2] - expected).norm() < 1e-10);
        assert!(c[4 + 3].norm() < 1e-12 && c[4 + 4].norm() < 1e-12);
    }
}

#[test]
fn parallel_reference_matches_dft_and_reconstructs_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(502);
    let n = 2;
    let grid = uniform_grid(2 * n + 1);
    for _ in 0..50 {
        let w1 = ComplexMatrix::random_unitary(4, &mut rng);
        let w2 = ComplexMatrix::random_unitary(4, &mut rng);
        let mut e0 = vec![Complex64::new(0.0, 0.0); 4];
        e0[0] = Complex64::new(1.0, 0.0);
        let v = w1.matvec(&e0);
        let mt = w2.adjoint().matmul(&readout_observable(n)).matmul(&w2);
        let ys: Vec<f64> = grid.iter().map(|&x| parallel_generic_output(&w1, &w2, x)).collect();
        let c = dft_extract(&ys, n).unwrap();
        let refs: Vec<Complex64> = (-(n as i64)..=n as i64)
            .map(|w| parallel_coefficient_reference(n, &v, &mt, w).unwrap())
            .collect();
        for (a, b) in c.iter().zip(&refs) {
            assert!((a - b).norm() < 1e-10);
        }
        let x: f64 = rng.random_range(0.0..6.3);
        let rebuilt: f64 = refs
            .iter()
            .enumerate()
            .map(|(i, ci)| (ci * Complex64::from_polar(1.0, (i as f64 - n as f64) * x)).re)
            .sum();
        assert!((rebuilt - parallel_generic_output(&w1, &w2, x)).abs() < 1e-10);
    }
}

#[test]
fn spectrum_support_depends_only_on_encoding_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(503);
    for (n, l) in [(1, 4), (2, 2), (4, 1)] {
        for tbl in 1..=2 {
            let spec = ArchitectureSpec::new(n, l, tbl).unwrap();
            let theta = init_parameters(&spec, rng.random());
            let s = fourier_coefficients(&spec, &theta).unwrap();
            assert_eq!(s.budget(), 4);
            assert!(s.coeff(5).is_none());
            assert!(s.conjugate_asymmetry() < 1e-10);
            for _ in 0..5 {
                let x: f64 = rng.random_range(0.0..6.3);
                assert!((s.evaluate(x) - forward(&spec, &theta, x).unwrap()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn serial_rank_is_capped_by_frequency_count() {
    for (l, seeds_at_ceiling) in [(2usize, 0u64..20), (3, 20..40), (4, 40..60)] {
        for tbl in 1..=5 {
            let spec = ArchitectureSpec::new(1, l, tbl).unwrap();
            let ceiling = (2 * l + 1).min(spec.parameter_count());
            let mut hits = 0;
            for s in seeds_at_ceiling.clone() {
                let r = jacobian_report(&coefficient_jacobian(&spec, &init_parameters(&spec, s)).unwrap()).unwrap();
                assert!(r.rank <= ceiling);
                assert_eq!(r.ceiling, ceiling);
                hits += usize::from(r.rank == ceiling);
            }
            assert!(hits >= 19, "{spec}: {hits}/20 at ceiling");
        }
    }
}

#[test]
fn null_space_grows_with_blocks_at_fixed_depth() {
    let mut last = 0;
    for tbl in 1..=4 {
        let spec = ArchitectureSpec::new(1, 2, tbl).unwrap();
        let r = jacobian_report(&coefficient_jacobian(&spec, &init_parameters(&spec, 77)).unwrap()).unwrap();
        assert_eq!(r.rank, 5);
        assert_eq!(r.kernel_dim, spec.parameter_count() - 5);
        assert!(r.kernel_dim > last);
        last = r.kernel_dim;
    }
    let spec = ArchitectureSpec::new(1, 2, 3).unwrap();
    assert_eq!(spec.parameter_count(), 27);
    let r = jacobian_report(&coefficient_jacobian(&spec, &init_parameters(&spec, 5)).unwrap()).unwrap();
    assert_eq!((r.rank, r.kernel_dim), (5, 22));
}

#[test]
fn single_qubit_state_qfim_has_rank_at_most_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(504);
    assert_eq!(max_qfim_rank(1), 2);
    for _ in 0..30 {
        let l = rng.random_range(1..=6);
        let spec = ArchitectureSpec::new(1, l, 1).unwrap();
        let theta = init_parameters(&spec, rng.random());
        let f: RealMatrix = state_qfim(&spec, &theta, rng.random_range(0.0..6.3)).unwrap();
        let e = sym_eig_descending(&f).unwrap();
        assert!(e.values()[2] < 1e-10 * e.largest());
    }
}

#[test]
fn two_qubit_state_qfim_respects_dimension_bound() {
    let spec = ArchitectureSpec::new(2, 2, 2).unwrap();
    let theta = init_parameters(&spec, 9);
    let f = state_qfim(&spec, &theta, 0.8).unwrap();
    let e = sym_eig_descending(&f).unwrap();
    let above = e.values().iter().filter(|&&v| v > 1e-10 * e.largest()).count();
    assert!(above <= max_qfim_rank(2));
}
