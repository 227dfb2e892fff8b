//! Trainability diagnostics: Jacobian rank reports, spectral knees,
//! gradient-coefficient trajectories and gradient-variance statistics.

use num_complex::Complex64;

use crate::circuit::{final_state, ArchitectureSpec};
use crate::error::{Error, Result};
use crate::fourier::CoefficientJacobian;
use crate::gradients::state_derivatives;
use crate::linalg::{inner, norm, numeric_rank, svd_values, RealMatrix, Spectrum};
use crate::training::{init_parameters, Dataset, MseObjective};

/// Singular values at or below this count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Normalized eigenvalues `λ_i/λ_1` above this count toward the knee.
pub const KNEE_THRESHOLD: f64 = 1e-6;
/// Below `INACTIVE_TOLERANCE`, a parameter's gradient trace is treated as identically zero.
pub const INACTIVE_TOLERANCE: f64 = 1e-14;
/// Ratio points where `|g_k| < RATIO_GUARD·max|g_k|` are skipped.
pub const RATIO_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub rank: usize,
    pub singular_values: Spectrum,
    pub knee: usize,
    /// `min(2E + 1, P)`.
    pub ceiling: usize,
    pub kernel_dim: usize,
}

pub fn jacobian_report(j: &CoefficientJacobian) -> Result<DiagnosticsReport> {
    let singular_values = svd_values(&j.matrix)?;
    let p = j.matrix.cols();
    let rank = numeric_rank(&singular_values, RANK_THRESHOLD);
    let top = singular_values.largest();
    let knee = if top > 0.0 {
        let sq = Spectrum::from_unsorted(singular_values.values().iter().map(|s| s * s).collect());
        spectral_knee(&sq)?
    } else {
        0
    };
    Ok(DiagnosticsReport {
        rank,
        knee,
        ceiling: (2 * j.spec.encoding_budget() + 1).min(p),
        kernel_dim: p - rank,
        singular_values,
    })
}

/// `F̂ = J_dataᵀ J_data / n`.
pub fn jacobian_qfim(j_data: &RealMatrix) -> RealMatrix {
    let n = j_data.rows() as f64;
    j_data.gram().scale(1.0 / n)
}

/// Count of `λ_i/λ_1 > 1e-6`.
pub fn spectral_knee(spectrum: &Spectrum) -> Result<usize> {
    let top = spectrum.largest();
    if !(top > 0.0) {
        return Err(Error::UndefinedMetric("spectral knee of an all-zero spectrum".into()));
    }
    Ok(spectrum
        .values()
        .iter()
        .filter(|&&v| v / top > KNEE_THRESHOLD)
        .count())
}

fn check_unit(psi: &[Complex64]) -> Result<()> {
    let n = norm(psi);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("state norm {n}, expected 1")));
    }
    Ok(())
}

/// `T|ψ⟩` with `T = iσ_y K`: `(conj ψ_1, −conj ψ_0)`.
pub fn perp_state_single_qubit(psi: &[Complex64]) -> Result<Vec<Complex64>> {
    if psi.len() != 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            actual: psi.len(),
        });
    }
    check_unit(psi)?;
    Ok(vec![psi[1].conj(), -psi[0].conj()])
}

/// Deterministic unit vector orthogonal to `ψ`: the first basis vector
/// `e_k` with `|ψ_k| < 1 − 1e-9`, Gram–Schmidt-orthogonalized against `ψ`.
pub fn perp_reference_multi(psi: &[Complex64]) -> Result<Vec<Complex64>> {
    if psi.len() < 2 {
        return Err(Error::InvalidInput("perp needs dimension >= 2".into()));
    }
    check_unit(psi)?;
    let k = psi
        .iter()
        .position(|a| a.norm() < 1.0 - 1e-9)
        .expect("a unit vector in dimension >= 2 has a component below 1");
    let mut v: Vec<Complex64> = psi.iter().map(|a| -psi[k].conj() * a).collect();
    v[k] += 1.0;
    let n = norm(&v);
    v.iter_mut().for_each(|a| *a /= n);
    Ok(v)
}

/// `g_j(x) = ⟨ψ⊥|∂_jψ⟩` over an x-grid, per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub xs: Vec<f64>,
    /// `g[j][i] = g_j(xs[i])`.
    pub g: Vec<Vec<Complex64>>,
    /// `g[j]` divided by `max_x |g_j(x)|` (zero for inactive parameters).
    pub normalized_g: Vec<Vec<Complex64>>,
    pub max_modulus: Vec<f64>,
    /// `false` where `max_x |g_j| < 1e-14`.
    pub active: Vec<bool>,
}

impl TrajectorySample {
    pub fn n_params(&self) -> usize {
        self.g.len()
    }
}

/// Gradient coefficients along `xs`. Single-qubit circuits use the
/// time-reversal perp; multi-qubit ones use [`perp_reference_multi`].
pub fn g_trajectory(spec: &ArchitectureSpec, theta: &[f64], xs: &[f64]) -> Result<TrajectorySample> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("trajectory needs at least one x".into()));
    }
    let p = spec.parameter_count();
    let mut g = vec![Vec::with_capacity(xs.len()); p];
    for &x in xs {
        let psi = final_state(spec, theta, x)?;
        let perp = if spec.n_qubits() == 1 {
            perp_state_single_qubit(psi.amplitudes())?
        } else {
            perp_reference_multi(psi.amplitudes())?
        };
        for (j, d) in state_derivatives(spec, theta, x)?.iter().enumerate() {
            g[j].push(inner(&perp, d));
        }
    }
    let max_modulus: Vec<f64> = g
        .iter()
        .map(|row| row.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .collect();
    let active: Vec<bool> = max_modulus.iter().map(|&m| m >= INACTIVE_TOLERANCE).collect();
    let normalized_g = g
        .iter()
        .zip(&max_modulus)
        .zip(&active)
        .map(|((row, &m), &on)| {
            row.iter()
                .map(|z| if on { z / m } else { Complex64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    Ok(TrajectorySample {
        xs: xs.to_vec(),
        g,
        normalized_g,
        max_modulus,
        active,
    })
}

/// Mean over `x` of `|Im(ĝ_j(x)/ĝ_k(x))|` on the normalized traces,
/// skipping points where `ĝ_k` nearly vanishes.
pub fn phase_lock_metric(t: &TrajectorySample, j: usize, k: usize) -> Result<f64> {
    for idx in [j, k] {
        if idx >= t.n_params() {
            return Err(Error::IndexOutOfRange {
                what: "parameter",
                index: idx,
                limit: t.n_params(),
            });
        }
        if !t.active[idx] {
            return Err(Error::UndefinedMetric(format!("parameter {idx} is inactive")));
        }
    }
    ratio_metric(&t.normalized_g[j], &t.normalized_g[k])
}

fn ratio_metric(gj: &[Complex64], gk: &[Complex64]) -> Result<f64> {
    let max_k = gk.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (sum, count) = gj
        .iter()
        .zip(gk)
        .filter(|(_, b)| b.norm() >= RATIO_GUARD * max_k && b.norm() > 0.0)
        .fold((0.0, 0usize), |(s, c), (a, b)| (s + (a / b).im.abs(), c + 1));
    if count == 0 {
        return Err(Error::UndefinedMetric("every ratio point was skipped".into()));
    }
    Ok(sum / count as f64)
}

/// Largest `max_x |Im ĝ_j(x)|` over active parameters.
pub fn max_imaginary_fraction(t: &TrajectorySample) -> f64 {
    t.normalized_g
        .iter()
        .zip(&t.active)
        .filter(|(_, &on)| on)
        .flat_map(|(row, _)| row.iter().map(|z| z.im.abs()))
        .fold(0.0, f64::max)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-parameter variance of `∂_k L` over random initializations and its
/// median/IQR across parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVarianceStats {
    pub per_param: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Sample variance over initializations (one per seed) of the MSE-loss
/// gradient on `data`'s training split.
pub fn gradient_variance(
    spec: &ArchitectureSpec,
    data: &Dataset,
    seeds: &[u64],
) -> Result<GradientVarianceStats> {
    if seeds.len() < 2 {
        return Err(Error::InvalidInput("gradient variance needs >= 2 initializations".into()));
    }
    let objective = MseObjective::new(spec, &data.train_x, &data.train_y)?;
    let grads = seeds
        .iter()
        .map(|&s| objective.loss_and_grad(&init_parameters(spec, s)).map(|(_, g)| g))
        .collect::<Result<Vec<_>>>()?;
    let n = grads.len() as f64;
    let p = spec.parameter_count();
    let per_param: Vec<f64> = (0..p)
        .map(|k| {
            let mean = grads.iter().map(|g| g[k]).sum::<f64>() / n;
            grads.iter().map(|g| (g[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let mut sorted = per_param.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(GradientVarianceStats {
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        per_param,
    })
}

/// `2^{N+1} − 2`, the real dimension bound on the state QFIM rank.
pub fn max_qfim_rank(n_qubits: usize) -> usize {
    (1usize << (n_qubits + 1)) - 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::coefficient_jacobian;
    use crate::training::{sample_dataset, sample_target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let n = norm(&v);
        v.iter_mut().for_each(|a| *a /= n);
        v
    }

    #[test]
    fn report_for_zero_jacobian() {
        let spec = ArchitectureSpec::new(1, 1, 1).unwrap();
        let j = CoefficientJacobian {
            matrix: RealMatrix::zeros(3, 6),
            spec,
        };
        let r = jacobian_report(&j).unwrap();
        assert_eq!((r.rank, r.kernel_dim, r.knee, r.ceiling), (0, 6, 0, 3));
    }

    #[test]
    fn report_for_serial_l12() {
        // Generic rank is 25, but the top-frequency directions of a deep
        // serial circuit are often tiny; judge by the median over inits.
        let spec = ArchitectureSpec::new(1, 12, 1).unwrap();
        let mut reports: Vec<DiagnosticsReport> = (0..20)
            .map(|s| jacobian_report(&coefficient_jacobian(&spec, &init_parameters(&spec, s)).unwrap()).unwrap())
            .collect();
        for r in &reports {
            assert!(r.knee <= r.rank && r.rank <= r.ceiling);
            assert_eq!(r.kernel_dim, 39 - r.rank);
        }
        reports.sort_by_key(|r| r.rank);
        let median = &reports[10];
        assert_eq!((median.rank, median.kernel_dim, median.ceiling), (25, 14, 25));
    }

    #[test]
    fn report_for_parallel_full_row_rank() {
        let spec = ArchitectureSpec::new(2, 2, 1).unwrap();
        let theta = init_parameters(&spec, 7);
        let r = jacobian_report(&coefficient_jacobian(&spec, &theta).unwrap()).unwrap();
        assert_eq!(r.rank, 9);
    }

    #[test]
    fn qfim_examples() {
        let f = jacobian_qfim(&RealMatrix::identity(4));
        assert_eq!(f, RealMatrix::identity(4).scale(0.25));
        let rank_one = RealMatrix::new(3, 2, vec![1.0, 2.0, 2.0, 4.0, -1.0, -2.0]).unwrap();
        let f = jacobian_qfim(&rank_one);
        assert!((f.trace() - rank_one.frobenius_norm_sq() / 3.0).abs() < 1e-14);
        let e = crate::linalg::sym_eig_descending(&f).unwrap();
        assert_eq!(numeric_rank(&e, 1e-12), 1);
    }

    #[test]
    fn knee_examples() {
        assert_eq!(spectral_knee(&Spectrum::from_unsorted(vec![1.0, 1e-3, 1e-9])).unwrap(), 2);
        assert!(spectral_knee(&Spectrum::from_unsorted(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn time_reversal_perp() {
        let p = perp_state_single_qubit(&[1.0.into(), 0.0.into()]).unwrap();
        assert_eq!(p, vec![Complex64::new(0.0, 0.0), Complex64::new(-1.0, -0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let psi = random_state(2, &mut rng);
            let t = perp_state_single_qubit(&psi).unwrap();
            assert!(inner(&psi, &t).norm() < 1e-15);
            assert!((norm(&t) - 1.0).abs() < 1e-12);
            let alpha: f64 = rng.random_range(0.0..2.0 * PI);
            let phase = Complex64::from_polar(1.0, alpha);
            let rotated: Vec<Complex64> = psi.iter().map(|a| a * phase).collect();
            let tr = perp_state_single_qubit(&rotated).unwrap();
            for (a, b) in tr.iter().zip(&t) {
                assert!((a - b * phase.conj()).norm() < 1e-14);
            }
        }
        assert!(perp_state_single_qubit(&[1.0.into(), 1.0.into()]).is_err());
    }

    #[test]
    fn reference_perp_multi() {
        let mut e0 = vec![Complex64::new(0.0, 0.0); 4];
        e0[0] = 1.0.into();
        let p = perp_reference_multi(&e0).unwrap();
        assert_eq!(p[1], Complex64::new(1.0, 0.0));
        assert_eq!(norm(&p), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let psi = random_state(8, &mut rng);
            let p = perp_reference_multi(&psi).unwrap();
            assert!(inner(&psi, &p).norm() < 1e-12);
            assert_eq!(p, perp_reference_multi(&psi).unwrap());
        }
    }

    #[test]
    fn metric_examples() {
        let gk: Vec<Complex64> = (0..5).map(|i| Complex64::new(1.0 + i as f64, 0.5)).collect();
        let twice: Vec<Complex64> = gk.iter().map(|z| z * 2.0).collect();
        assert!(ratio_metric(&twice, &gk).unwrap() < 1e-15);
        let rotated: Vec<Complex64> = gk.iter().map(|z| z * Complex64::i()).collect();
        assert!((ratio_metric(&rotated, &gk).unwrap() - 1.0).abs() < 1e-14);
        assert!(ratio_metric(&gk, &[Complex64::new(0.0, 0.0); 5]).is_err());
    }

    #[test]
    fn single_point_trajectory() {
        let spec = ArchitectureSpec::new(1, 2, 1).unwrap();
        let theta = init_parameters(&spec, 1);
        let t = g_trajectory(&spec, &theta, &[0.4]).unwrap();
        assert_eq!(t.n_params(), 9);
        assert!(t.g.iter().all(|row| row.len() == 1));
        assert!(t
            .normalized_g
            .iter()
            .flatten()
            .all(|z| z.norm() <= 1.0 + 1e-12));
        assert!(g_trajectory(&spec, &theta, &[]).is_err());
    }

    #[test]
    fn variance_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let spec = ArchitectureSpec::new(1, 2, 1).unwrap();
        let t = sample_target(2, &mut rng).unwrap();
        let d = sample_dataset(&t, 30, 5, 3).unwrap();
        let same = gradient_variance(&spec, &d, &[5, 5]).unwrap();
        assert!(same.per_param.iter().all(|&v| v == 0.0));
        let s = gradient_variance(&spec, &d, &[1, 2, 3, 4]).unwrap();
        assert!(s.per_param.iter().all(|&v| v >= 0.0));
        assert!(s.q1 <= s.median && s.median <= s.q3);
        assert!(gradient_variance(&spec, &d, &[1]).is_err());
    }

    #[test]
    fn qfim_rank_bound() {
        assert_eq!(max_qfim_rank(1), 2);
        assert_eq!(max_qfim_rank(6), 126);
        assert!((1..10).all(|n| max_qfim_rank(n + 1) > max_qfim_rank(n)));
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }
}
