//! Small dense linear algebra: DFT coefficient extraction, Jacobi SVD,
//! Jacobi symmetric eigendecomposition and numeric rank.
//!
//! Everything here is sized for the matrices this crate produces (a few
//! hundred rows/columns at most), so the algorithms are the simple,
//! deterministic O(n^3) sweeps rather than blocked LAPACK-style kernels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 80;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must be nonempty, got {rows}x{cols}"
            )));
        }
        if rows * cols != data.len() {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be nonempty");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                actual: r.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..self.rows).map(|r| self.get(r, i) * self.get(r, j)).sum();
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        g
    }

    pub fn scale(mut self, factor: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= factor);
        self
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Descending, nonnegative singular values or eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Sorts descending; negative round-off is clamped to zero.
    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        values.sort_by(|a, b| b.total_cmp(a));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Coefficients `c_ω = (1/n) Σ_k s_k e^{-iω x_k}` on the grid `x_k = 2πk/n`,
/// returned for `ω = -max_freq..=max_freq` (index `ω + max_freq`).
pub fn dft_extract(samples: &[f64], max_freq: usize) -> Result<Vec<Complex64>> {
    let n = samples.len();
    let required = 2 * max_freq + 1;
    if n < required {
        return Err(Error::InsufficientGrid {
            samples: n,
            max_freq,
            required,
        });
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("DFT sample".into()));
    }
    let inv_n = 1.0 / n as f64;
    let e = max_freq as i64;
    let coeffs = (-e..=e)
        .map(|omega| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &s) in samples.iter().enumerate() {
                // Reduce ω·k modulo n before forming the angle so that large
                // frequencies do not lose precision in the phase.
                let idx = (omega * k as i64).rem_euclid(n as i64);
                let angle = -2.0 * PI * idx as f64 * inv_n;
                acc += Complex64::from_polar(s, angle);
            }
            acc * inv_n
        })
        .collect();
    Ok(coeffs)
}

/// Singular values by one-sided (Hestenes) Jacobi rotations.
pub fn svd_values(m: &RealMatrix) -> Result<Spectrum> {
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd input".into()));
    }
    // Orthogonalize the columns of the tall orientation; the number of
    // columns is then min(rows, cols).
    let tall = if m.rows >= m.cols { m.clone() } else { m.transpose() };
    let (rows, cols) = (tall.rows, tall.cols);
    let mut columns: Vec<Vec<f64>> = (0..cols).map(|c| tall.column(c)).collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (a, b) = (&columns[p], &columns[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for r in 0..rows {
                        alpha += a[r] * a[r];
                        beta += b[r] * b[r];
                        gamma += a[r] * b[r];
                    }
                    (alpha, beta, gamma)
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = columns.split_at_mut(q);
                let (a, b) = (&mut left[p], &mut right[0]);
                for r in 0..rows {
                    let (ap, aq) = (a[r], b[r]);
                    a[r] = c * ap - s * aq;
                    b[r] = s * ap + c * aq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let values = columns
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Ok(Spectrum::from_unsorted(values))
}

/// Eigenvalues of a symmetric positive semidefinite matrix, descending.
///
/// Negative eigenvalues within `1e-12·λ_1` of zero are clamped; anything
/// more negative is reported as invalid input.
pub fn sym_eig_descending(m: &RealMatrix) -> Result<Spectrum> {
    if m.rows != m.cols {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigen input".into()));
    }
    let n = m.rows;
    let scale = m.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }

    let mut a = m.clone();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off <= (f64::EPSILON * scale).powi(2) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }

    let raw: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let top = raw.iter().cloned().fold(0.0, f64::max);
    if let Some(neg) = raw.iter().find(|&&v| v < -1e-12 * top) {
        return Err(Error::InvalidInput(format!(
            "matrix is not positive semidefinite (eigenvalue {neg:e}, largest {top:e})"
        )));
    }
    Ok(Spectrum::from_unsorted(raw))
}

/// Number of spectrum entries strictly above `threshold`.
pub fn numeric_rank(s: &Spectrum, threshold: f64) -> usize {
    s.values().iter().filter(|&&v| v > threshold).count()
}

/// Square complex matrix, row-major. Only what the closed-form oracles need.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::identity(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(self.get(c, r).conj());
            }
        }
        Self { dim: n, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                for c in 0..n {
                    data[r * n + c] += a * other.get(k, c);
                }
            }
        }
        Self { dim: n, data }
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "dimension mismatch");
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let n = a * b;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..a {
            for j in 0..a {
                let s = self.get(i, j);
                for k in 0..b {
                    for l in 0..b {
                        data[(i * b + k) * n + (j * b + l)] = s * other.get(k, l);
                    }
                }
            }
        }
        Self { dim: n, data }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Haar-ish random unitary from Gram–Schmidt on a complex Gaussian matrix.
    pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            for u in &cols {
                let proj = inner(u, &v);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= proj * ui);
            }
            let n = norm(&v);
            if n < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|vi| *vi /= n);
            cols.push(v);
        }
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                data[r * dim + c] = v;
            }
        }
        Self { dim, data }
    }
}

/// `⟨a|b⟩` (conjugate-linear in the first argument).
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
    }

    #[test]
    fn dft_single_harmonic() {
        let samples: Vec<f64> = grid(11).iter().map(|x| x.cos()).collect();
        let c = dft_extract(&samples, 2).unwrap();
        for (i, ci) in c.iter().enumerate() {
            let omega = i as i64 - 2;
            let expected = if omega.abs() == 1 { 0.5 } else { 0.0 };
            assert!((ci - Complex64::new(expected, 0.0)).norm() < 1e-12, "ω={omega}: {ci}");
        }
    }

    #[test]
    fn dft_constant() {
        let c = dft_extract(&[1.0; 5], 1).unwrap();
        assert!((c[1] - 1.0).norm() < 1e-15);
        assert!(c[0].norm() < 1e-15 && c[2].norm() < 1e-15);
    }

    #[test]
    fn dft_recovers_random_degree_two_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let samples: Vec<f64> = grid(9)
            .iter()
            .map(|&x| a[0] + (1..3).map(|k| a[k] * (k as f64 * x).cos() + b[k] * (k as f64 * x).sin()).sum::<f64>())
            .collect();
        let c = dft_extract(&samples, 2).unwrap();
        assert!((c[2] - a[0]).norm() < 1e-12);
        for k in 1..3 {
            let expected = Complex64::new(a[k], -b[k]) / 2.0;
            assert!((c[2 + k] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_rejects_short_grid() {
        assert!(matches!(
            dft_extract(&[1.0; 4], 2),
            Err(Error::InsufficientGrid { required: 5, .. })
        ));
    }

    #[test]
    fn svd_diagonal_and_identity() {
        let s = svd_values(&RealMatrix::identity(3)).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 1.0]);
        let d = RealMatrix::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let s = svd_values(&d).unwrap();
        for (got, want) in s.values().iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let unit = |n: usize, rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / l).collect::<Vec<_>>()
        };
        let u = unit(5, &mut rng);
        let v = unit(4, &mut rng);
        let data = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        let s = svd_values(&RealMatrix::new(5, 4, data).unwrap()).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s.values()[0] - 1.0).abs() < 1e-12);
        assert!(s.values()[1] < 1e-12);
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = (0..6 * 9).map(|_| rng.sample(StandardNormal)).collect();
        let m = RealMatrix::new(6, 9, data).unwrap();
        let s = svd_values(&m).unwrap();
        assert_eq!(s.len(), 6);
        let e = sym_eig_descending(&m.transpose().gram()).unwrap();
        let s1 = s.largest();
        for (sv, ev) in s.values().iter().zip(e.values()) {
            assert!((sv * sv - ev).abs() < 1e-10 * s1 * s1);
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = RealMatrix::zeros(2, 2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(svd_values(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn eig_identity_and_rank_one() {
        let e = sym_eig_descending(&RealMatrix::identity(4)).unwrap();
        assert!(e.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let j = RealMatrix::new(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let e = sym_eig_descending(&j.gram()).unwrap();
        assert!((e.values()[0] - j.frobenius_norm_sq()).abs() < 1e-12);
        assert!(e.values()[1..].iter().all(|&v| v < 1e-14));
    }

    #[test]
    fn eig_rejects_asymmetric_and_indefinite() {
        let asym = RealMatrix::new(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig_descending(&asym), Err(Error::InvalidInput(_))));
        let indefinite = RealMatrix::new(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(sym_eig_descending(&indefinite), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rank_counts_strictly_above_threshold() {
        let s = Spectrum::from_unsorted(vec![1e-12, 1.0, 0.0]);
        assert_eq!(numeric_rank(&s, 1e-10), 1);
        let s = Spectrum::from_unsorted(vec![3.0, 2.0, 1.0]);
        assert_eq!(numeric_rank(&s, 1e-10), 3);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = ComplexMatrix::random_unitary(4, &mut rng);
        let p = u.adjoint().matmul(&u);
        let id = ComplexMatrix::identity(4);
        for r in 0..4 {
            for c in 0..4 {
                assert!((p.get(r, c) - id.get(r, c)).norm() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = RealMatrix> {
            (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
                prop::collection::vec(-5.0f64..5.0, r * c)
                    .prop_map(move |d| RealMatrix::new(r, c, d).unwrap())
            })
        }

        proptest! {
            #[test]
            fn dft_of_real_samples_is_conjugate_symmetric(
                samples in prop::collection::vec(-10.0f64..10.0, 1..40)
            ) {
                let e = (samples.len() - 1) / 2;
                let c = dft_extract(&samples, e).unwrap();
                for w in 0..=e {
                    prop_assert!((c[e - w] - c[e + w].conj()).norm() < 1e-12);
                }
            }

            #[test]
            fn svd_transpose_invariant(m in matrix()) {
                let a = svd_values(&m).unwrap();
                let b = svd_values(&m.transpose()).unwrap();
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() < 1e-12 * a.largest().max(1.0));
                }
            }

            #[test]
            fn rank_monotone_in_threshold(
                vals in prop::collection::vec(0.0f64..2.0, 1..20),
                t1 in 1e-12f64..1.0,
                t2 in 1e-12f64..1.0,
            ) {
                let s = Spectrum::from_unsorted(vals);
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                prop_assert!(numeric_rank(&s, hi) <= numeric_rank(&s, lo));
            }

            #[test]
            fn gram_eigenvalues_nonnegative(m in matrix()) {
                let e = sym_eig_descending(&m.gram()).unwrap();
                prop_assert!(e.values().iter().all(|&v| v >= 0.0));
            }
        }
    }
}
