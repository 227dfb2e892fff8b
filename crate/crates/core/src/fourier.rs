//! Fourier-side view of a circuit: coefficients on the diagnostic grid,
//! real representatives, the coefficient-matching Jacobian, frequency
//! redundancy counts and the closed-form coefficient oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circuit::{forward_unchecked, matmul2, ArchitectureSpec, Mat2};
use crate::error::{Error, Result};
use crate::gradients::shift_grad_unchecked;
use crate::linalg::{dft_extract, inner, ComplexMatrix, RealMatrix};

/// Out-of-band DFT mass above this is treated as an internal inconsistency.
pub const ALIASING_TOLERANCE: f64 = 1e-8;

/// `x_k = 2πk/n_diag` with `n_diag = 2N(L+1) + 1`.
pub fn diag_grid(spec: &ArchitectureSpec) -> Vec<f64> {
    let n = 2 * spec.n_qubits() * (spec.fm_layers() + 1) + 1;
    uniform_grid(n)
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Coefficients `c_ω` for `ω ∈ {-E..E}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    budget: usize,
    coeffs: Vec<Complex64>,
}

impl FourierSpectrum {
    pub fn new(budget: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * budget + 1 {
            return Err(Error::LengthMismatch {
                expected: 2 * budget + 1,
                actual: coeffs.len(),
            });
        }
        Ok(Self { budget, coeffs })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `c_ω`, or `None` outside `{-E..E}`.
    pub fn coeff(&self, omega: i64) -> Option<Complex64> {
        let idx = omega + self.budget as i64;
        (0..self.coeffs.len() as i64)
            .contains(&idx)
            .then(|| self.coeffs[idx as usize])
    }

    /// Coefficients ordered from `ω = -E` to `ω = E`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `max_ω |c_{-ω} − conj(c_ω)|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let e = self.budget;
        (0..=e)
            .map(|w| (self.coeffs[e - w] - self.coeffs[e + w].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ_ω c_ω e^{iωx}` (real part; the imaginary part vanishes for a
    /// conjugate-symmetric spectrum).
    pub fn evaluate(&self, x: f64) -> f64 {
        let e = self.budget as i64;
        self.coeffs
            .iter()
            .zip(-e..=e)
            .map(|(c, w)| (c * Complex64::from_polar(1.0, w as f64 * x)).re)
            .sum()
    }
}

/// Spectrum of `f_θ` together with the largest out-of-band coefficient
/// magnitude seen on the diagnostic grid.
pub fn spectrum_with_residual(
    spec: &ArchitectureSpec,
    theta: &[f64],
) -> Result<(FourierSpectrum, f64)> {
    check_params(spec, theta)?;
    let grid = diag_grid(spec);
    let samples: Vec<f64> = grid.iter().map(|&x| forward_unchecked(spec, theta, x)).collect();
    split_band(spec, &samples)
}

fn split_band(spec: &ArchitectureSpec, samples: &[f64]) -> Result<(FourierSpectrum, f64)> {
    let e = spec.encoding_budget();
    let full_band = (samples.len() - 1) / 2;
    let all = dft_extract(samples, full_band)?;
    let extra = full_band - e;
    let residual = all[..extra]
        .iter()
        .chain(&all[all.len() - extra..])
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let inband = all[extra..extra + 2 * e + 1].to_vec();
    Ok((FourierSpectrum::new(e, inband)?, residual))
}

/// Fourier coefficients of `f_θ` with `E = N·L`, extracted on
/// [`diag_grid`]. Fails if the out-of-band DFT frequencies carry mass.
pub fn fourier_coefficients(spec: &ArchitectureSpec, theta: &[f64]) -> Result<FourierSpectrum> {
    let (spectrum, residual) = spectrum_with_residual(spec, theta)?;
    if residual >= ALIASING_TOLERANCE {
        return Err(Error::Aliasing {
            mass: residual,
            tolerance: ALIASING_TOLERANCE,
        });
    }
    Ok(spectrum)
}

/// `(Re c_0, Re c_1, Im c_1, …, Re c_E, Im c_E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRepresentative(Vec<f64>);

impl RealRepresentative {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn budget(&self) -> usize {
        (self.0.len() - 1) / 2
    }

    /// Rebuilds the full conjugate-symmetric spectrum.
    pub fn to_spectrum(&self) -> FourierSpectrum {
        let e = self.budget();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * e + 1];
        coeffs[e] = Complex64::new(self.0[0], 0.0);
        for w in 1..=e {
            let c = Complex64::new(self.0[2 * w - 1], self.0[2 * w]);
            coeffs[e + w] = c;
            coeffs[e - w] = c.conj();
        }
        FourierSpectrum { budget: e, coeffs }
    }
}

pub fn real_representative(s: &FourierSpectrum) -> Result<RealRepresentative> {
    let asym = s.conjugate_asymmetry();
    if asym > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "spectrum is not conjugate-symmetric (defect {asym:e})"
        )));
    }
    Ok(stack_real(s.budget, &s.coeffs))
}

fn stack_real(e: usize, coeffs: &[Complex64]) -> RealRepresentative {
    let mut v = Vec::with_capacity(2 * e + 1);
    v.push(coeffs[e].re);
    for w in 1..=e {
        v.push(coeffs[e + w].re);
        v.push(coeffs[e + w].im);
    }
    RealRepresentative(v)
}

/// `J_kj = ∂c̃_k/∂θ_j`, a `(2E+1) × P` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientJacobian {
    pub matrix: RealMatrix,
    pub spec: ArchitectureSpec,
}

/// Parameter-shift gradients of `f` on the diagnostic grid pushed through
/// the (linear) DFT and real-representative maps.
pub fn coefficient_jacobian(spec: &ArchitectureSpec, theta: &[f64]) -> Result<CoefficientJacobian> {
    let grid_grads = grid_gradients(spec, theta)?;
    coefficient_jacobian_from_grid(spec, &grid_grads)
}

/// Parameter-shift gradient rows at every diagnostic grid point
/// (`n_diag × P`).
pub fn grid_gradients(spec: &ArchitectureSpec, theta: &[f64]) -> Result<RealMatrix> {
    check_params(spec, theta)?;
    let rows: Vec<Vec<f64>> = diag_grid(spec)
        .par_iter()
        .map(|&x| shift_grad_unchecked(spec, theta, x))
        .collect();
    RealMatrix::from_rows(&rows)
}

/// Coefficient Jacobian from precomputed grid gradients (see
/// [`grid_gradients`]).
pub fn coefficient_jacobian_from_grid(
    spec: &ArchitectureSpec,
    grid_grads: &RealMatrix,
) -> Result<CoefficientJacobian> {
    let e = spec.encoding_budget();
    let p = spec.parameter_count();
    if grid_grads.cols() != p || grid_grads.rows() != diag_grid(spec).len() {
        return Err(Error::LengthMismatch {
            expected: p,
            actual: grid_grads.cols(),
        });
    }
    let mut matrix = RealMatrix::zeros(2 * e + 1, p);
    for j in 0..p {
        let column = grid_grads.column(j);
        let (spectrum, _) = split_band(spec, &column)?;
        let rep = stack_real(e, spectrum.coeffs());
        for (k, &v) in rep.values().iter().enumerate() {
            matrix.set(k, j, v);
        }
    }
    Ok(CoefficientJacobian {
        matrix,
        spec: *spec,
    })
}

fn check_params(spec: &ArchitectureSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.parameter_count() {
        return Err(Error::LengthMismatch {
            expected: spec.parameter_count(),
            actual: theta.len(),
        });
    }
    Ok(())
}

/// Number of FM-layer sign combinations landing on frequency `ω`:
/// `binom(2E, E − ω)`.
pub fn frequency_redundancy(budget: usize, omega: i64) -> Result<u128> {
    if omega.unsigned_abs() as usize > budget {
        return Err(Error::InvalidInput(format!(
            "frequency {omega} outside spectrum of budget {budget}"
        )));
    }
    let n = 2 * budget as u128;
    let k = (budget as i64 - omega) as u128;
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i) is divisible by (i+1) at every step.
        acc = acc
            .checked_mul(n - i)
            .ok_or_else(|| Error::InvalidInput(format!("binomial overflow at E={budget}")))?
            / (i + 1);
    }
    Ok(acc)
}

/// Trigonometric interpolation from an odd uniform grid to arbitrary points.
///
/// Exact for band-limited functions of degree `≤ (n_grid − 1)/2`, which
/// covers `f_θ` and every `∂f/∂θ_j` sampled on [`diag_grid`].
#[derive(Debug, Clone)]
pub struct TrigInterpolator {
    n_grid: usize,
    weights: RealMatrix,
}

impl TrigInterpolator {
    pub fn new(n_grid: usize, xs: &[f64]) -> Result<Self> {
        if n_grid % 2 == 0 || xs.is_empty() {
            return Err(Error::InvalidInput(
                "interpolator needs an odd grid and at least one target point".into(),
            ));
        }
        let band = (n_grid - 1) / 2;
        let grid = uniform_grid(n_grid);
        let mut weights = RealMatrix::zeros(xs.len(), n_grid);
        for (i, &x) in xs.iter().enumerate() {
            for (k, &xk) in grid.iter().enumerate() {
                let t = x - xk;
                let kernel = 1.0 + 2.0 * (1..=band).map(|w| (w as f64 * t).cos()).sum::<f64>();
                weights.set(i, k, kernel / n_grid as f64);
            }
        }
        Ok(Self { n_grid, weights })
    }

    pub fn for_spec(spec: &ArchitectureSpec, xs: &[f64]) -> Result<Self> {
        Self::new(diag_grid(spec).len(), xs)
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn interpolate(&self, grid_values: &[f64]) -> Vec<f64> {
        assert_eq!(grid_values.len(), self.n_grid, "grid length mismatch");
        (0..self.weights.rows())
            .map(|i| {
                self.weights
                    .row(i)
                    .iter()
                    .zip(grid_values)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }

    /// Interpolates every column of an `n_grid × P` matrix.
    pub fn interpolate_columns(&self, grid_rows: &RealMatrix) -> RealMatrix {
        assert_eq!(grid_rows.rows(), self.n_grid, "grid length mismatch");
        let (n, p) = (self.weights.rows(), grid_rows.cols());
        let mut out = RealMatrix::zeros(n, p);
        for i in 0..n {
            let w = self.weights.row(i);
            for (k, &wk) in w.iter().enumerate() {
                let row = grid_rows.row(k);
                for j in 0..p {
                    out.set(i, j, out.get(i, j) + wk * row[j]);
                }
            }
        }
        out
    }
}

/// SU(2) element `[[α, −conj β], [β, conj α]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2 {
    alpha: Complex64,
    beta: Complex64,
}

impl Su2 {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "|α|² + |β|² = {n}, expected 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        Self {
            alpha: Complex64::new(v[0] / n, v[1] / n),
            beta: Complex64::new(v[2] / n, v[3] / n),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn matrix(&self) -> Mat2 {
        [
            [self.alpha, -self.beta.conj()],
            [self.beta, self.alpha.conj()],
        ]
    }
}

/// Single-qubit encoding `S(x) = diag(e^{ix/2}, e^{-ix/2})`.
fn encoding_diag(x: f64) -> Mat2 {
    let zero = Complex64::new(0.0, 0.0);
    [
        [Complex64::from_polar(1.0, x / 2.0), zero],
        [zero, Complex64::from_polar(1.0, -x / 2.0)],
    ]
}

/// Output `⟨0|U† Z U|0⟩` of the generic serial circuit
/// `U = W_{m} S(x) ⋯ S(x) W_1` built from `ws = [W_1, …, W_m]`.
pub fn serial_su2_output(ws: &[Su2], x: f64) -> f64 {
    let s = encoding_diag(x);
    let mut u = ws.first().map(Su2::matrix).unwrap_or([
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ]);
    for w in ws.iter().skip(1) {
        u = matmul2(&w.matrix(), &matmul2(&s, &u));
    }
    let (a0, a1) = (u[0][0], u[1][0]);
    a0.norm_sqr() - a1.norm_sqr()
}

/// Highest-frequency coefficient `c_{+2}` of the serial circuit
/// `W_3 S(x) W_2 S(x) W_1` measured in `Z`:
/// `−2·α_1·α_2²·conj(β_1)·α_3·β_3`.
pub fn serial_c2_reference(w1: &Su2, w2: &Su2, w3: &Su2) -> Complex64 {
    -2.0 * w1.alpha * w2.alpha * w2.alpha * w1.beta.conj() * w3.alpha * w3.beta
}

/// `Z` on qubit `N-1` as a `2^N × 2^N` diagonal matrix.
pub fn readout_observable(n_qubits: usize) -> ComplexMatrix {
    let bit = 1usize << (n_qubits - 1);
    let diag: Vec<Complex64> = (0..1usize << n_qubits)
        .map(|i| Complex64::new(if i & bit == 0 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    ComplexMatrix::diagonal(&diag)
}

/// Output `⟨v| S(x)† M̃ S(x) |v⟩` of the generic parallel `L = 1` circuit,
/// with `v = W_1|0…0⟩`, `M̃ = W_2† Z_{N-1} W_2` and `S(x) = ⊗ diag(e^{ix/2}, e^{-ix/2})`.
pub fn parallel_generic_output(w1: &ComplexMatrix, w2: &ComplexMatrix, x: f64) -> f64 {
    let n = w1.dim().trailing_zeros() as usize;
    let mut v = vec![Complex64::new(0.0, 0.0); w1.dim()];
    v[0] = Complex64::new(1.0, 0.0);
    let v = w1.matvec(&v);
    let encoded: Vec<Complex64> = v
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let ones = k.count_ones() as f64;
            let phase = (x / 2.0) * (n as f64 - 2.0 * ones);
            a * Complex64::from_polar(1.0, phase)
        })
        .collect();
    let out = w2.matvec(&encoded);
    let m_out = readout_observable(n).matvec(&out);
    inner(&out, &m_out).re
}

/// `c_ω = Σ conj(v_k)·M̃_kj·v_j` over basis pairs with
/// `popcount(k) − popcount(j) = ω`.
pub fn parallel_coefficient_reference(
    n_qubits: usize,
    v: &[Complex64],
    mt: &ComplexMatrix,
    omega: i64,
) -> Result<Complex64> {
    let dim = 1usize << n_qubits;
    if v.len() != dim || mt.dim() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: if v.len() != dim { v.len() } else { mt.dim() },
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..dim {
        for j in 0..dim {
            if k.count_ones() as i64 - j.count_ones() as i64 == omega {
                acc += v[k].conj() * mt.get(k, j) * v[j];
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::forward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_theta(spec: &ArchitectureSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..spec.parameter_count())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(diag_grid(&ArchitectureSpec::new(1, 4, 1).unwrap()).len(), 11);
        assert_eq!(diag_grid(&ArchitectureSpec::new(2, 1, 1).unwrap()).len(), 9);
        for n in 1..=4 {
            for l in 1..=5 {
                let spec = ArchitectureSpec::new(n, l, 1).unwrap();
                assert_eq!(diag_grid(&spec).len() - (2 * n * l + 1), 2 * n);
            }
        }
    }

    #[test]
    fn zero_parameters_give_pure_cosine() {
        let spec = ArchitectureSpec::new(1, 2, 1).unwrap();
        let s = fourier_coefficients(&spec, &[0.0; 9]).unwrap();
        for w in -2..=2i64 {
            let expected = if w.abs() == 2 { 0.5 } else { 0.0 };
            assert!((s.coeff(w).unwrap() - expected).norm() < 1e-12);
        }
        assert!(s.coeff(3).is_none());
    }

    #[test]
    fn reconstruction_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = ArchitectureSpec::new(2, 3, 1).unwrap();
        let theta = random_theta(&spec, &mut rng);
        let (s, residual) = spectrum_with_residual(&spec, &theta).unwrap();
        assert!(residual < 1e-10);
        assert!(s.conjugate_asymmetry() < 1e-12);
        for _ in 0..50 {
            let x = rng.random_range(0.0..2.0 * PI);
            assert!((s.evaluate(x) - forward(&spec, &theta, x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn representative_examples() {
        let s = FourierSpectrum::new(1, vec![0.0.into(), 1.0.into(), 0.0.into()]).unwrap();
        assert_eq!(real_representative(&s).unwrap().values(), &[1.0, 0.0, 0.0]);
        let c1 = Complex64::new(0.5, -0.25);
        let s = FourierSpectrum::new(1, vec![c1.conj(), 0.0.into(), c1]).unwrap();
        let rep = real_representative(&s).unwrap();
        assert_eq!(rep.values(), &[0.0, 0.5, -0.25]);
        assert_eq!(rep.to_spectrum(), s);
    }

    #[test]
    fn representative_rejects_asymmetric_spectrum() {
        let s = FourierSpectrum::new(1, vec![0.0.into(), 0.0.into(), Complex64::new(0.0, 1.0)]).unwrap();
        assert!(matches!(real_representative(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn redundancy_values() {
        assert_eq!(frequency_redundancy(1, 0).unwrap(), 2);
        assert_eq!(frequency_redundancy(2, 2).unwrap(), 1);
        assert_eq!(frequency_redundancy(2, -2).unwrap(), 1);
        assert!(frequency_redundancy(2, 3).is_err());
        for e in 0..=16usize {
            let total: u128 = (-(e as i64)..=e as i64)
                .map(|w| {
                    assert_eq!(
                        frequency_redundancy(e, w).unwrap(),
                        frequency_redundancy(e, -w).unwrap()
                    );
                    frequency_redundancy(e, w).unwrap()
                })
                .sum();
            // Vandermonde: Σ_ω binom(2E, E−ω) = 4^E.
            assert_eq!(total, 1u128 << (2 * e));
        }
    }

    #[test]
    fn serial_reference_zero_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let w = Su2::random(&mut rng);
        let no_transfer = Su2::new(Complex64::new(0.0, 1.0), 0.0.into()).unwrap();
        assert_eq!(serial_c2_reference(&no_transfer, &w, &w), Complex64::new(0.0, 0.0));
        let swap = Su2::new(0.0.into(), 1.0.into()).unwrap();
        assert_eq!(serial_c2_reference(&w, &swap, &w).norm(), 0.0);
        assert!(Su2::new(1.0.into(), 1.0.into()).is_err());
    }

    #[test]
    fn parallel_reference_single_entry_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let w2 = ComplexMatrix::random_unitary(4, &mut rng);
        let mt = w2.adjoint().matmul(&readout_observable(2)).matmul(&w2);
        let mut v = vec![Complex64::new(0.0, 0.0); 4];
        v[0] = 1.0.into();
        assert_eq!(parallel_coefficient_reference(2, &v, &mt, 2).unwrap().norm(), 0.0);
        assert!(parallel_coefficient_reference(3, &v, &mt, 0).is_err());
    }

    #[test]
    fn interpolator_reproduces_circuit_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let spec = ArchitectureSpec::new(2, 2, 1).unwrap();
        let theta = random_theta(&spec, &mut rng);
        let xs: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let interp = TrigInterpolator::for_spec(&spec, &xs).unwrap();
        let grid: Vec<f64> = diag_grid(&spec).iter().map(|&x| forward(&spec, &theta, x).unwrap()).collect();
        for (x, y) in xs.iter().zip(interp.interpolate(&grid)) {
            assert!((forward(&spec, &theta, *x).unwrap() - y).abs() < 1e-12);
        }
    }
}
