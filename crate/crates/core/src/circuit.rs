//! Statevector simulation of the re-uploading circuit family.
//!
//! Conventions:
//! - qubit `q` is bit `q` of the basis index (little-endian);
//! - `Rot(φ, θ, ω)` applies `RZ(φ)`, then `RY(θ)`, then `RZ(ω)`;
//! - `RX(x) = exp(-i x σ_x / 2)` on every qubit is one encoding layer;
//! - the observable is `Z` on qubit `N-1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const NEG_HALF_I: Complex64 = Complex64::new(0.0, -0.5);

/// Coordinates of one member of the circuit family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArchitectureSpec {
    n_qubits: usize,
    fm_layers: usize,
    tbl: usize,
}

impl ArchitectureSpec {
    /// Simulation is capped at 16 qubits; the studies here use at most 12.
    pub const MAX_QUBITS: usize = 16;

    pub fn new(n_qubits: usize, fm_layers: usize, tbl: usize) -> Result<Self> {
        if n_qubits == 0 || fm_layers == 0 || tbl == 0 {
            return Err(Error::InvalidInput(format!(
                "architecture needs N, L, tbl >= 1 (got N={n_qubits}, L={fm_layers}, tbl={tbl})"
            )));
        }
        if n_qubits > Self::MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "{n_qubits} qubits exceeds the simulator limit of {}",
                Self::MAX_QUBITS
            )));
        }
        Ok(Self {
            n_qubits,
            fm_layers,
            tbl,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn fm_layers(&self) -> usize {
        self.fm_layers
    }

    pub fn tbl(&self) -> usize {
        self.tbl
    }

    /// Total number of single-qubit encoding gates, `E = N·L`.
    pub fn encoding_budget(&self) -> usize {
        self.n_qubits * self.fm_layers
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(self)
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Qubit measured by the observable.
    pub fn readout_qubit(&self) -> usize {
        self.n_qubits - 1
    }

    pub fn slot(&self, j: usize) -> Result<ParamSlot> {
        let p = self.parameter_count();
        if j >= p {
            return Err(Error::IndexOutOfRange {
                what: "parameter",
                index: j,
                limit: p,
            });
        }
        let angle = j % 3;
        let rest = j / 3;
        let qubit = rest % self.n_qubits;
        let rest = rest / self.n_qubits;
        Ok(ParamSlot {
            position: rest / self.tbl,
            sub_block: rest % self.tbl,
            qubit,
            angle,
        })
    }

    pub fn index(&self, slot: ParamSlot) -> Result<usize> {
        if slot.position > self.fm_layers
            || slot.sub_block >= self.tbl
            || slot.qubit >= self.n_qubits
            || slot.angle >= 3
        {
            return Err(Error::InvalidInput(format!("slot {slot:?} outside {self:?}")));
        }
        Ok(self.rot_offset(slot.position, slot.sub_block, slot.qubit) + slot.angle)
    }

    #[inline]
    fn rot_offset(&self, position: usize, sub_block: usize, qubit: usize) -> usize {
        ((position * self.tbl + sub_block) * self.n_qubits + qubit) * 3
    }
}

impl std::fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "N={} L={} tbl={}", self.n_qubits, self.fm_layers, self.tbl)
    }
}

/// `P = (L+1)·tbl·3N`.
pub fn parameter_count(spec: &ArchitectureSpec) -> usize {
    (spec.fm_layers + 1) * spec.tbl * 3 * spec.n_qubits
}

/// Where parameter `j` lives in the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    /// Ansatz position, `0..=L`.
    pub position: usize,
    pub sub_block: usize,
    pub qubit: usize,
    /// 0 = φ (first RZ), 1 = θ (RY), 2 = ω (second RZ).
    pub angle: usize,
}

/// Slot of every parameter, indexed by `j`. Ordering is position-major,
/// then sub-block, then qubit, then angle.
pub fn build_parameter_layout(spec: &ArchitectureSpec) -> Vec<ParamSlot> {
    let mut layout = Vec::with_capacity(spec.parameter_count());
    for position in 0..=spec.fm_layers {
        for sub_block in 0..spec.tbl {
            for qubit in 0..spec.n_qubits {
                for angle in 0..3 {
                    layout.push(ParamSlot {
                        position,
                        sub_block,
                        qubit,
                        angle,
                    });
                }
            }
        }
    }
    layout
}

pub fn rz(a: f64) -> Mat2 {
    [
        [Complex64::from_polar(1.0, -a / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, a / 2.0)],
    ]
}

pub fn ry(a: f64) -> Mat2 {
    let (s, c) = (a / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rx(a: f64) -> Mat2 {
    let (s, c) = (a / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ]
}

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn pauli_y() -> Mat2 {
    [
        [ZERO, Complex64::new(0.0, -1.0)],
        [Complex64::new(0.0, 1.0), ZERO],
    ]
}

fn pauli_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

fn scaled(m: &Mat2, s: Complex64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

/// Matrix of `Rot(φ, θ, ω) = RZ(ω)·RY(θ)·RZ(φ)`. With `deriv = Some(a)`,
/// returns the derivative with respect to angle `a` instead, i.e. the
/// generator `-(i/2)·G` inserted right after that rotation.
pub fn rot_matrix(phi: f64, theta: f64, omega: f64, deriv: Option<usize>) -> Mat2 {
    let mut first = rz(phi);
    let mut second = ry(theta);
    let mut third = rz(omega);
    match deriv {
        None => {}
        Some(0) => first = matmul2(&scaled(&pauli_z(), NEG_HALF_I), &first),
        Some(1) => second = matmul2(&scaled(&pauli_y(), NEG_HALF_I), &second),
        Some(2) => third = matmul2(&scaled(&pauli_z(), NEG_HALF_I), &third),
        Some(a) => panic!("Rot has three angles, got angle index {a}"),
    }
    matmul2(&third, &matmul2(&second, &first))
}

/// Amplitudes over `2^N` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "statevector length {len} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amps)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::IndexOutOfRange {
                what: "qubit",
                index: qubit,
                limit: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_single(&mut self, qubit: usize, m: &Mat2) -> Result<()> {
        self.check_qubit(qubit)?;
        self.apply_single_unchecked(qubit, m);
        Ok(())
    }

    #[inline]
    fn apply_single_unchecked(&mut self, qubit: usize, m: &Mat2) {
        let bit = 1usize << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::InvalidInput("CNOT control equals target".into()));
        }
        self.apply_cnot_unchecked(control, target);
        Ok(())
    }

    #[inline]
    fn apply_cnot_unchecked(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    pub fn apply_rot(&mut self, qubit: usize, phi: f64, theta: f64, omega: f64) -> Result<()> {
        self.apply_single(qubit, &rot_matrix(phi, theta, omega, None))
    }

    /// One encoding layer: `RX(x)` on every qubit.
    pub fn apply_encoding(&mut self, x: f64) {
        let m = rx(x);
        for q in 0..self.n_qubits {
            self.apply_single_unchecked(q, &m);
        }
    }

    /// `⟨Z_q⟩ = Σ ±|a_i|²`.
    pub fn expectation_z(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// `Z_q |self⟩`.
    pub fn z_applied(&self, qubit: usize) -> Vec<Complex64> {
        let bit = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, &a)| if i & bit == 0 { a } else { -a })
            .collect()
    }
}

/// Applies trainable block `(position, sub_block)`: `Rot` on qubit 0, then
/// `CNOT(q-1, q)` followed by `Rot` on each qubit `q = 1..N-1`.
pub fn apply_trainable_block(
    state: &mut Statevector,
    spec: &ArchitectureSpec,
    position: usize,
    sub_block: usize,
    theta: &[f64],
) -> Result<()> {
    check_params(spec, theta)?;
    if state.n_qubits != spec.n_qubits {
        return Err(Error::LengthMismatch {
            expected: spec.n_qubits,
            actual: state.n_qubits,
        });
    }
    if position > spec.fm_layers || sub_block >= spec.tbl {
        return Err(Error::IndexOutOfRange {
            what: "block",
            index: position * spec.tbl + sub_block,
            limit: (spec.fm_layers + 1) * spec.tbl,
        });
    }
    apply_block_with(state, spec, position, sub_block, theta, None);
    Ok(())
}

/// Block application; `insert` names a parameter whose generator is
/// inserted (state-derivative pass).
#[inline]
fn apply_block_with(
    state: &mut Statevector,
    spec: &ArchitectureSpec,
    position: usize,
    sub_block: usize,
    theta: &[f64],
    insert: Option<usize>,
) {
    for q in 0..spec.n_qubits {
        if q > 0 {
            state.apply_cnot_unchecked(q - 1, q);
        }
        let off = spec.rot_offset(position, sub_block, q);
        let deriv = insert.and_then(|j| (off..off + 3).contains(&j).then(|| j - off));
        let m = rot_matrix(theta[off], theta[off + 1], theta[off + 2], deriv);
        state.apply_single_unchecked(q, &m);
    }
}

fn check_params(spec: &ArchitectureSpec, theta: &[f64]) -> Result<()> {
    let p = spec.parameter_count();
    if theta.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            actual: theta.len(),
        });
    }
    Ok(())
}

/// Runs the whole circuit on `|0…0⟩`. With `insert = Some(j)` the result is
/// `∂_j|ψ⟩` rather than `|ψ⟩`.
pub(crate) fn simulate(
    spec: &ArchitectureSpec,
    theta: &[f64],
    x: f64,
    insert: Option<usize>,
) -> Statevector {
    let mut state = Statevector::zero(spec.n_qubits);
    let encoding = rx(x);
    for position in 0..=spec.fm_layers {
        if position > 0 {
            for q in 0..spec.n_qubits {
                state.apply_single_unchecked(q, &encoding);
            }
        }
        for sub_block in 0..spec.tbl {
            apply_block_with(&mut state, spec, position, sub_block, theta, insert);
        }
    }
    state
}

/// `|ψ(x, θ)⟩`.
pub fn final_state(spec: &ArchitectureSpec, theta: &[f64], x: f64) -> Result<Statevector> {
    check_params(spec, theta)?;
    Ok(simulate(spec, theta, x, None))
}

/// `f_θ(x) = ⟨ψ(x, θ)| Z_{N-1} |ψ(x, θ)⟩`.
pub fn forward(spec: &ArchitectureSpec, theta: &[f64], x: f64) -> Result<f64> {
    check_params(spec, theta)?;
    Ok(forward_unchecked(spec, theta, x))
}

#[inline]
pub(crate) fn forward_unchecked(spec: &ArchitectureSpec, theta: &[f64], x: f64) -> f64 {
    simulate(spec, theta, x, None).expectation_z(spec.readout_qubit())
}
