//! Statevector simulation.
//!
//! Conventions: `Rx(θ) = exp(-iθX/2)` (likewise for `Ry`, `Rz`) and qubit 0 is
//! the most significant bit of the basis index, so `|q0 q1 ... q_{n-1}>` maps
//! to index `q0·2^{n-1} + ... + q_{n-1}`.

use crate::error::{Error, Result};
use crate::qlinalg::{qr_decompose, ComplexMatrix, C64, I, ONE, ZERO};
use crate::rng::RngStream;

const NORM_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
pub const MAX_QUBITS: usize = 12;

/// Normalized amplitude vector of an n-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        assert!(num_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = ONE;
        Self { num_qubits, amps }
    }

    /// Computational basis state with the given index.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut s = Self::zero(num_qubits);
        s.amps[0] = ZERO;
        s.amps[index] = ONE;
        s
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "{len} amplitudes is not 2^n for n <= {MAX_QUBITS}"
            )));
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "state is not normalized (norm² = {norm})"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// Wraps amplitudes that are normalized by construction.
    pub(crate) fn from_amplitudes_unchecked(amps: Vec<C64>) -> Self {
        debug_assert!(amps.len().is_power_of_two());
        Self {
            num_qubits: amps.len().trailing_zeros() as usize,
            amps,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|<self|other>|²`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm_sqr()
    }

    /// Largest amplitude-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.amps.len() != other.amps.len() {
            return f64::INFINITY;
        }
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Applies `g` in place.
    pub fn apply(&mut self, g: &Gate) -> Result<()> {
        g.validate(self.num_qubits)?;
        match g {
            Gate::Rx { target, .. } | Gate::Ry { target, .. } | Gate::Rz { target, .. } => {
                let m = single_qubit_entries(g);
                self.apply_single(*target, m);
            }
            Gate::Cnot { control, target } => {
                let cm = self.mask(*control);
                let tm = self.mask(*target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::FullUnitary(u) => {
                self.amps = u.matvec(&self.amps)?;
            }
        }
        Ok(())
    }

    fn apply_single(&mut self, qubit: usize, [m00, m01, m10, m11]: [C64; 4]) {
        let mask = self.mask(qubit);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = m00 * a0 + m01 * a1;
                self.amps[j] = m10 * a0 + m11 * a1;
            }
        }
    }

    /// `<Z_q>` for every qubit at once.
    pub fn expectations_z(&self) -> Vec<f64> {
        self.qubit_probabilities()
            .into_iter()
            .map(|(p0, p1)| p0 - p1)
            .collect()
    }

    /// Per-qubit marginals `(P(bit = 0), P(bit = 1))`, each summed on its own
    /// so that small probabilities keep full relative precision.
    pub fn qubit_probabilities(&self) -> Vec<(f64, f64)> {
        let n = self.num_qubits;
        let mut out = vec![(0.0, 0.0); n];
        for (idx, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if idx & (1 << (n - 1 - q)) == 0 {
                    o.0 += p;
                } else {
                    o.1 += p;
                }
            }
        }
        out
    }
}

/// Gate set of the simulator. Rotation angles are in radians.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Rx {
        angle: f64,
        target: usize,
    },
    Ry {
        angle: f64,
        target: usize,
    },
    Rz {
        angle: f64,
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Dense unitary acting on the whole register.
    FullUnitary(ComplexMatrix),
}

impl Gate {
    pub fn rx(angle: f64, target: usize) -> Self {
        Gate::Rx { angle, target }
    }

    pub fn ry(angle: f64, target: usize) -> Self {
        Gate::Ry { angle, target }
    }

    pub fn rz(angle: f64, target: usize) -> Self {
        Gate::Rz { angle, target }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// Wraps a dense unitary, rejecting anything off-unitary beyond 1e-10.
    pub fn full_unitary(u: ComplexMatrix) -> Result<Self> {
        let dev = u.unitary_deviation();
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Gate::FullUnitary(u))
    }

    pub fn inverse(&self) -> Self {
        match self {
            Gate::Rx { angle, target } => Gate::rx(-angle, *target),
            Gate::Ry { angle, target } => Gate::ry(-angle, *target),
            Gate::Rz { angle, target } => Gate::rz(-angle, *target),
            Gate::Cnot { .. } => self.clone(),
            Gate::FullUnitary(u) => Gate::FullUnitary(crate::qlinalg::dagger(u)),
        }
    }

    /// Qubits the gate touches, in matrix order (control first).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rx { target, .. } | Gate::Ry { target, .. } | Gate::Rz { target, .. } => {
                vec![*target]
            }
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::FullUnitary(_) => Vec::new(),
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let bad = |index| Error::QubitIndex { index, num_qubits };
        match self {
            Gate::Cnot { control, target } if control == target => Err(Error::InvalidArgument(
                format!("CNOT control and target are both qubit {control}"),
            )),
            Gate::FullUnitary(u) => {
                let dim = 1usize << num_qubits;
                if u.rows() != dim || u.cols() != dim {
                    return Err(Error::Dimension(format!(
                        "{}x{} unitary on a {num_qubits}-qubit register",
                        u.rows(),
                        u.cols()
                    )));
                }
                Ok(())
            }
            _ => match self.qubits().into_iter().find(|&q| q >= num_qubits) {
                Some(q) => Err(bad(q)),
                None => Ok(()),
            },
        }
    }
}

fn single_qubit_entries(g: &Gate) -> [C64; 4] {
    match *g {
        Gate::Rx { angle, .. } => {
            let (s, c) = (angle / 2.0).sin_cos();
            [C64::new(c, 0.0), -I * s, -I * s, C64::new(c, 0.0)]
        }
        Gate::Ry { angle, .. } => {
            let (s, c) = (angle / 2.0).sin_cos();
            [
                C64::new(c, 0.0),
                C64::new(-s, 0.0),
                C64::new(s, 0.0),
                C64::new(c, 0.0),
            ]
        }
        Gate::Rz { angle, .. } => {
            let (s, c) = (angle / 2.0).sin_cos();
            [C64::new(c, -s), ZERO, ZERO, C64::new(c, s)]
        }
        _ => unreachable!("not a single-qubit gate"),
    }
}

/// Local matrix of a gate: 2×2 for rotations, 4×4 for CNOT (control is the
/// more significant qubit), the stored matrix for `FullUnitary`.
pub fn gate_matrix(g: &Gate) -> ComplexMatrix {
    match g {
        Gate::Rx { .. } | Gate::Ry { .. } | Gate::Rz { .. } => {
            let [a, b, c, d] = single_qubit_entries(g);
            ComplexMatrix::from_rows(&[&[a, b], &[c, d]])
        }
        Gate::Cnot { .. } => ComplexMatrix::from_rows(&[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, ONE, ZERO, ZERO],
            &[ZERO, ZERO, ZERO, ONE],
            &[ZERO, ZERO, ONE, ZERO],
        ]),
        Gate::FullUnitary(u) => u.clone(),
    }
}

pub fn apply_gate(state: &StateVector, g: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(g)?;
    Ok(out)
}

/// Ordered gate list on a fixed register size.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(num_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(num_qubits)?;
        }
        Ok(Self { num_qubits, gates })
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.validate(self.num_qubits)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Gate-wise inverse in reverse order.
    pub fn inverse(&self) -> Self {
        Self {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// Dense unitary of the whole circuit, built column by column.
    pub fn unitary(&self) -> ComplexMatrix {
        let dim = 1 << self.num_qubits;
        let mut u = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut s = StateVector::basis(self.num_qubits, col);
            for g in &self.gates {
                s.apply(g).expect("gates validated on insertion");
            }
            for (row, a) in s.amps.iter().enumerate() {
                u[(row, col)] = *a;
            }
        }
        u
    }
}

pub fn apply_circuit(state: &StateVector, c: &Circuit) -> Result<StateVector> {
    if c.num_qubits != state.num_qubits {
        return Err(Error::Dimension(format!(
            "{}-qubit circuit on a {}-qubit state",
            c.num_qubits, state.num_qubits
        )));
    }
    let mut out = state.clone();
    for g in &c.gates {
        out.apply(g)?;
    }
    Ok(out)
}

/// `<Z>` on one qubit: P(bit = 0) - P(bit = 1).
pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    state.check_qubit(qubit)?;
    let mask = state.mask(qubit);
    Ok(state
        .amps
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if i & mask == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum())
}

/// Haar-distributed `dim × dim` unitary.
///
/// QR of a complex Ginibre matrix, with each column of Q rescaled by the phase
/// of the matching diagonal entry of R so the factorization is unique.
pub fn haar_unitary(dim: usize, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "unitary dimension must be >= 1".into(),
        ));
    }
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| rng.complex_normal());
    let (q, r) = qr_decompose(&g)?;
    let phases: Vec<C64> = (0..dim).map(|i| r[(i, i)] / r[(i, i)].norm()).collect();
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
        q[(i, j)] * phases[j]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{dagger, kron, matmul};
    use std::f64::consts::PI;

    fn lift(g: &Gate, n: usize) -> ComplexMatrix {
        // Full-register matrix by Kronecker products; CNOT via projectors.
        let id = ComplexMatrix::identity(2);
        let p0 = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        let p1 = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let x = ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]);
        let chain =
            |f: &dyn Fn(usize) -> ComplexMatrix| (1..n).fold(f(0), |acc, q| kron(&acc, &f(q)));
        match g {
            Gate::Cnot { control, target } => {
                let a = chain(&|q| {
                    if q == *control {
                        p0.clone()
                    } else {
                        id.clone()
                    }
                });
                let b = chain(&|q| {
                    if q == *control {
                        p1.clone()
                    } else if q == *target {
                        x.clone()
                    } else {
                        id.clone()
                    }
                });
                a.add(&b).unwrap()
            }
            Gate::FullUnitary(u) => u.clone(),
            _ => {
                let t = g.qubits()[0];
                let m = gate_matrix(g);
                chain(&|q| if q == t { m.clone() } else { id.clone() })
            }
        }
    }

    #[test]
    fn rx_matrices() {
        assert!(gate_matrix(&Gate::rx(0.0, 0)).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let want = ComplexMatrix::from_rows(&[&[ZERO, -I], &[-I, ZERO]]);
        assert!(gate_matrix(&Gate::rx(PI, 0)).max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn rz_inverse_composition() {
        for theta in [0.3, -1.7, 2.9] {
            let m = matmul(
                &gate_matrix(&Gate::rz(theta, 0)),
                &gate_matrix(&Gate::rz(-theta, 0)),
            );
            assert!(m.unwrap().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn rx_pi_on_zero() {
        let s = apply_gate(&StateVector::zero(1), &Gate::rx(PI, 0)).unwrap();
        assert!((s.amplitudes()[0]).norm() < 1e-15);
        assert!((s.amplitudes()[1] - (-I)).norm() < 1e-15);
    }

    #[test]
    fn cnot_flips_target() {
        let s = apply_gate(&StateVector::basis(2, 0b10), &Gate::cnot(0, 1)).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11));
    }

    #[test]
    fn bad_indices() {
        let mut s = StateVector::zero(2);
        assert!(matches!(
            s.apply(&Gate::rx(1.0, 2)),
            Err(Error::QubitIndex { index: 2, .. })
        ));
        assert!(s.apply(&Gate::cnot(1, 1)).is_err());
        assert!(expectation_z(&s, 5).is_err());
        let u = ComplexMatrix::identity(8);
        assert!(s.apply(&Gate::FullUnitary(u)).is_err());
    }

    #[test]
    fn full_unitary_rejects_non_unitary() {
        let m = ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        assert!(matches!(Gate::full_unitary(m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn gates_match_lifted_matrices() {
        let mut rng = RngStream::new(11);
        for n in 3..=5 {
            let dim = 1 << n;
            let amps: Vec<C64> = (0..dim).map(|_| rng.complex_normal()).collect();
            let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let s = StateVector::from_amplitudes(amps.iter().map(|z| z / norm).collect()).unwrap();
            let gates = [
                Gate::rx(rng.uniform() * 6.0, rng.below(n)),
                Gate::ry(rng.uniform() * 6.0, rng.below(n)),
                Gate::rz(rng.uniform() * 6.0, rng.below(n)),
                Gate::cnot(0, n - 1),
                Gate::cnot(n - 1, 1),
                Gate::FullUnitary(haar_unitary(dim, &mut rng).unwrap()),
            ];
            for g in &gates {
                let got = apply_gate(&s, g).unwrap();
                let want = lift(g, n).matvec(s.amplitudes()).unwrap();
                let err = got
                    .amplitudes()
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-12, "{g:?}: {err}");
            }
        }
    }

    #[test]
    fn circuit_then_inverse() {
        let mut rng = RngStream::new(12);
        let mut c = Circuit::new(4);
        for _ in 0..20 {
            let g = match rng.below(4) {
                0 => Gate::rx(rng.uniform() * 6.0, rng.below(4)),
                1 => Gate::ry(rng.uniform() * 6.0, rng.below(4)),
                2 => Gate::rz(rng.uniform() * 6.0, rng.below(4)),
                _ => Gate::cnot(rng.below(2), 2 + rng.below(2)),
            };
            c.push(g).unwrap();
        }
        let s = StateVector::zero(4);
        assert_eq!(apply_circuit(&s, &Circuit::new(4)).unwrap(), s);
        let there = apply_circuit(&s, &c).unwrap();
        let back = apply_circuit(&there, &c.inverse()).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-10);

        let oracle = c
            .gates()
            .iter()
            .fold(ComplexMatrix::identity(16), |acc, g| {
                matmul(&lift(g, 4), &acc).unwrap()
            });
        assert!(c.unitary().max_abs_diff(&oracle) < 1e-10);
        assert!(apply_circuit(&s, &Circuit::new(3)).is_err());
    }

    #[test]
    fn z_expectations() {
        assert_eq!(expectation_z(&StateVector::zero(3), 1).unwrap(), 1.0);
        for theta in [0.0, 0.4, 1.9, PI] {
            let s = apply_gate(&StateVector::zero(2), &Gate::rx(theta, 1)).unwrap();
            assert!((expectation_z(&s, 1).unwrap() - theta.cos()).abs() < 1e-12);
            assert!((expectation_z(&s, 0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn z_expectation_matches_density_matrix() {
        let mut rng = RngStream::new(13);
        let u = haar_unitary(16, &mut rng).unwrap();
        let s = apply_gate(&StateVector::zero(4), &Gate::FullUnitary(u)).unwrap();
        let psi = ComplexMatrix::new(16, 1, s.amplitudes().to_vec()).unwrap();
        let rho = matmul(&psi, &dagger(&psi)).unwrap();
        let z = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        let all = s.expectations_z();
        let id = ComplexMatrix::identity(2);
        for q in 0..4 {
            let op = (0..4)
                .map(|k| if k == q { z.clone() } else { id.clone() })
                .reduce(|a, b| kron(&a, &b))
                .unwrap();
            let want = matmul(&rho, &op).unwrap().trace().re;
            assert!((expectation_z(&s, q).unwrap() - want).abs() < 1e-12);
            assert!((all[q] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_basics() {
        let mut rng = RngStream::new(14);
        let u1 = haar_unitary(1, &mut rng).unwrap();
        assert!((u1[(0, 0)].norm() - 1.0).abs() < 1e-12);
        for dim in [2, 4, 16] {
            assert!(haar_unitary(dim, &mut rng).unwrap().unitary_deviation() < 1e-12);
        }
        assert!(haar_unitary(0, &mut rng).is_err());
        let a = haar_unitary(8, &mut RngStream::new(99)).unwrap();
        let b = haar_unitary(8, &mut RngStream::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn haar_mean_entry_weight() {
        let mut rng = RngStream::new(15);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| haar_unitary(4, &mut rng).unwrap()[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 0.01, "{mean}");
    }
}
