//! Strongly entangling 4-qubit circuit acting on one encoded pixel group.
//!
//! Each layer applies `Rz·Ry·Rz` to every qubit and then a stride-1 CNOT ring
//! `q → (q + 1) mod 4`. A group of four pixels is angle-encoded, pushed through
//! the circuit and decoded again, so the circuit maps `[0,1]^4 → [0,1]^4`.
//!
//! Gradients use the parameter-shift rule. All circuit parameters are shared
//! by every group in a batch, so [`VqcPlan`] builds the circuit unitary and
//! every ±π/2-shifted unitary once; evaluating a group is then one stacked
//! matrix-vector product.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::encoding::{decode_probabilities, encode_angles, GROUP};
use crate::error::{Error, Result};
use crate::qlinalg::{C64, ZERO};
use crate::qsim::{Circuit, Gate, StateVector};
use crate::rng::RngStream;

pub const QUBITS: usize = GROUP;
pub const ROTATIONS: usize = 3;
const DIM: usize = 1 << QUBITS;
/// `|<Z>|` is clamped to this before differentiating `arccos`.
pub const Z_CLAMP: f64 = 1.0 - 1e-7;

/// Rotation angles of an `L`-layer ansatz, indexed `(layer, qubit, rotation)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VqcParams {
    layers: usize,
    angles: Vec<f64>,
}

impl VqcParams {
    pub fn new(layers: usize, angles: Vec<f64>) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidArgument(
                "VQC needs at least one layer".into(),
            ));
        }
        if angles.len() != layers * QUBITS * ROTATIONS {
            return Err(Error::Dimension(format!(
                "{} angles for {layers} layers (want {})",
                angles.len(),
                layers * QUBITS * ROTATIONS
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("non-finite VQC angle".into()));
        }
        Ok(Self { layers, angles })
    }

    pub fn zeros(layers: usize) -> Self {
        Self::new(layers, vec![0.0; layers * QUBITS * ROTATIONS]).expect("valid shape")
    }

    /// Angles drawn uniformly from `[0, 2π)`.
    pub fn random(layers: usize, rng: &mut RngStream) -> Self {
        let angles = (0..layers * QUBITS * ROTATIONS)
            .map(|_| 2.0 * PI * rng.uniform())
            .collect();
        Self::new(layers, angles).expect("valid shape")
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angles_mut(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angle(&self, layer: usize, qubit: usize, rotation: usize) -> f64 {
        self.angles[(layer * QUBITS + qubit) * ROTATIONS + rotation]
    }
}

pub fn strongly_entangling_circuit(params: &VqcParams) -> Circuit {
    let mut gates = Vec::with_capacity(params.layers * (QUBITS * ROTATIONS + QUBITS));
    for l in 0..params.layers {
        for q in 0..QUBITS {
            gates.push(Gate::rz(params.angle(l, q, 0), q));
            gates.push(Gate::ry(params.angle(l, q, 1), q));
            gates.push(Gate::rz(params.angle(l, q, 2), q));
        }
        for q in 0..QUBITS {
            gates.push(Gate::cnot(q, (q + 1) % QUBITS));
        }
    }
    Circuit::from_gates(QUBITS, gates).expect("indices below 4")
}

fn clamp_input(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `dx/dz` of the decode map `x = arccos(z)/π`, with `|z|` clamped.
pub fn decode_slope(z: f64) -> f64 {
    let z = z.clamp(-Z_CLAMP, Z_CLAMP);
    -1.0 / (PI * (1.0 - z * z).sqrt())
}

/// Reference forward pass through the gate-level simulator.
pub fn vqc_forward(in_pixels: [f64; QUBITS], params: &VqcParams) -> [f64; QUBITS] {
    let mut state = StateVector::zero(QUBITS);
    for (q, &x) in in_pixels.iter().enumerate() {
        state
            .apply(&Gate::rx(PI * clamp_input(x), q))
            .expect("valid qubit");
    }
    let circuit = strongly_entangling_circuit(params);
    for g in circuit.gates() {
        state.apply(g).expect("valid gate");
    }
    let p = state.qubit_probabilities();
    std::array::from_fn(|q| decode_probabilities(p[q].0, p[q].1))
}

/// Parameter-shift gradient of `upstream · vqc_forward(in_pixels, params)`
/// with respect to the angles.
pub fn vqc_param_shift_grad(
    in_pixels: [f64; QUBITS],
    params: &VqcParams,
    upstream: [f64; QUBITS],
) -> Vec<f64> {
    let plan = VqcPlan::new(params);
    let mut grad = vec![0.0; params.len()];
    plan.backward(in_pixels, upstream, &mut grad);
    grad
}

/// Circuit unitary plus every parameter-shifted variant, stacked row-wise:
/// block 0 is `U(θ)`, block `1 + 2k` is `U(θ + π/2·e_k)` and block `2 + 2k`
/// is `U(θ − π/2·e_k)`. A forward-only plan holds just block 0.
#[derive(Clone, Debug)]
pub struct VqcPlan {
    num_params: usize,
    stack: Vec<C64>,
}

impl VqcPlan {
    pub fn new(params: &VqcParams) -> Self {
        let num_params = params.len();
        let blocks = 1 + 2 * num_params;
        let mut stack = Vec::with_capacity(blocks * DIM * DIM);
        push_unitary(&mut stack, params);
        let mut shifted = params.clone();
        for k in 0..num_params {
            for sign in [1.0, -1.0] {
                shifted.angles[k] = params.angles[k] + sign * FRAC_PI_2;
                push_unitary(&mut stack, &shifted);
            }
            shifted.angles[k] = params.angles[k];
        }
        Self { num_params, stack }
    }

    /// Plan that can evaluate but not differentiate.
    pub fn forward_only(params: &VqcParams) -> Self {
        let mut stack = Vec::with_capacity(DIM * DIM);
        push_unitary(&mut stack, params);
        Self {
            num_params: params.len(),
            stack,
        }
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn can_differentiate(&self) -> bool {
        self.stack.len() == (1 + 2 * self.num_params) * DIM * DIM
    }

    fn block(&self, b: usize) -> &[C64] {
        &self.stack[b * DIM * DIM..(b + 1) * DIM * DIM]
    }

    /// Z expectations of `U_b|ψ>` for the blocks `0..blocks`.
    fn z_values(&self, psi: &[C64], blocks: usize, out: &mut Vec<[f64; QUBITS]>) {
        out.clear();
        for b in 0..blocks {
            out.push(z_after(self.block(b), psi));
        }
    }

    pub fn forward(&self, in_pixels: [f64; QUBITS]) -> [f64; QUBITS] {
        let psi = encode_angles(&in_pixels.map(|x| PI * clamp_input(x)));
        let probs = probabilities_after(self.block(0), &psi);
        std::array::from_fn(|q| decode_probabilities(probs[q].0, probs[q].1))
    }

    /// Accumulates `∂(upstream · f)/∂θ` into `param_grad` and returns the
    /// gradient with respect to the input pixels.
    ///
    /// Panics on a forward-only plan.
    pub fn backward(
        &self,
        in_pixels: [f64; QUBITS],
        upstream: [f64; QUBITS],
        param_grad: &mut [f64],
    ) -> [f64; QUBITS] {
        assert!(
            self.can_differentiate(),
            "backward on a forward-only VQC plan"
        );
        debug_assert_eq!(param_grad.len(), self.num_params);
        let clamped = in_pixels.map(clamp_input);
        let angles = clamped.map(|x| PI * x);
        let psi = encode_angles(&angles);
        let mut z = Vec::with_capacity(1 + 2 * self.num_params);
        self.z_values(&psi, 1 + 2 * self.num_params, &mut z);

        // Upstream pulled back through the decode map onto each <Z_q>.
        let dz: [f64; QUBITS] = std::array::from_fn(|q| upstream[q] * decode_slope(z[0][q]));
        if dz.iter().all(|&d| d == 0.0) {
            return [0.0; QUBITS];
        }

        for (k, g) in param_grad.iter_mut().enumerate() {
            let (plus, minus) = (&z[1 + 2 * k], &z[2 + 2 * k]);
            *g += (0..QUBITS)
                .map(|q| dz[q] * 0.5 * (plus[q] - minus[q]))
                .sum::<f64>();
        }

        // Encoding angles are Rx parameters too, so the same rule applies.
        let u = self.block(0);
        std::array::from_fn(|j| {
            let inside = in_pixels[j] >= 0.0 && in_pixels[j] <= 1.0;
            if !inside {
                return 0.0;
            }
            let mut shifted = angles;
            shifted[j] = angles[j] + FRAC_PI_2;
            let plus = z_after(u, &encode_angles(&shifted));
            shifted[j] = angles[j] - FRAC_PI_2;
            let minus = z_after(u, &encode_angles(&shifted));
            PI * (0..QUBITS)
                .map(|q| dz[q] * 0.5 * (plus[q] - minus[q]))
                .sum::<f64>()
        })
    }
}

fn push_unitary(stack: &mut Vec<C64>, params: &VqcParams) {
    let u = strongly_entangling_circuit(params).unitary();
    stack.extend_from_slice(u.as_slice());
}

fn probabilities_after(u: &[C64], psi: &[C64]) -> [(f64, f64); QUBITS] {
    let mut out = [(0.0, 0.0); QUBITS];
    for (idx, row) in u.chunks_exact(DIM).enumerate() {
        let amp: C64 = row.iter().zip(psi).fold(ZERO, |acc, (a, b)| acc + a * b);
        let p = amp.norm_sqr();
        for (q, o) in out.iter_mut().enumerate() {
            if idx & (1 << (QUBITS - 1 - q)) == 0 {
                o.0 += p;
            } else {
                o.1 += p;
            }
        }
    }
    out
}

fn z_after(u: &[C64], psi: &[C64]) -> [f64; QUBITS] {
    probabilities_after(u, psi).map(|(p0, p1)| p0 - p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_group;
    use crate::qlinalg::{dagger, kron, matmul, ComplexMatrix, ONE};
    use crate::qsim::gate_matrix;

    fn lift_single(m: &ComplexMatrix, target: usize) -> ComplexMatrix {
        let id = ComplexMatrix::identity(2);
        (0..QUBITS)
            .map(|q| if q == target { m.clone() } else { id.clone() })
            .reduce(|a, b| kron(&a, &b))
            .unwrap()
    }

    fn lift_cnot(control: usize, target: usize) -> ComplexMatrix {
        let p0 = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        let p1 = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let x = ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]);
        let id = ComplexMatrix::identity(2);
        let chain = |f: &dyn Fn(usize) -> ComplexMatrix| {
            (0..QUBITS).map(f).reduce(|a, b| kron(&a, &b)).unwrap()
        };
        let a = chain(&|q| if q == control { p0.clone() } else { id.clone() });
        let b = chain(&|q| match q {
            q if q == control => p1.clone(),
            q if q == target => x.clone(),
            _ => id.clone(),
        });
        a.add(&b).unwrap()
    }

    fn oracle_unitary(params: &VqcParams) -> ComplexMatrix {
        strongly_entangling_circuit(params).gates().iter().fold(
            ComplexMatrix::identity(DIM),
            |acc, g| {
                let full = match g {
                    Gate::Cnot { control, target } => lift_cnot(*control, *target),
                    _ => lift_single(&gate_matrix(g), g.qubits()[0]),
                };
                matmul(&full, &acc).unwrap()
            },
        )
    }

    fn oracle_forward(x: [f64; 4], params: &VqcParams) -> [f64; 4] {
        let psi = encode_group(x).unwrap();
        let out = oracle_unitary(params).matvec(psi.amplitudes()).unwrap();
        let mut z = [0.0; 4];
        for (idx, a) in out.iter().enumerate() {
            for (q, zq) in z.iter_mut().enumerate() {
                let sign = if idx & (1 << (3 - q)) == 0 { 1.0 } else { -1.0 };
                *zq += sign * a.norm_sqr();
            }
        }
        z.map(|v: f64| v.clamp(-1.0, 1.0).acos() / PI)
    }

    fn random_input(rng: &mut RngStream) -> [f64; 4] {
        std::array::from_fn(|_| rng.uniform())
    }

    #[test]
    fn zero_angles_give_bare_ring() {
        let c = strongly_entangling_circuit(&VqcParams::zeros(1));
        let ring: Vec<_> = c
            .gates()
            .iter()
            .filter(|g| matches!(g, Gate::Cnot { .. }))
            .collect();
        assert_eq!(
            ring,
            vec![
                &Gate::cnot(0, 1),
                &Gate::cnot(1, 2),
                &Gate::cnot(2, 3),
                &Gate::cnot(3, 0)
            ]
        );
        let bare = Circuit::from_gates(4, ring.into_iter().cloned().collect()).unwrap();
        assert!(c.unitary().max_abs_diff(&bare.unitary()) < 1e-15);
    }

    #[test]
    fn gate_count() {
        for l in 1..4 {
            assert_eq!(
                strongly_entangling_circuit(&VqcParams::zeros(l)).len(),
                l * 16
            );
        }
    }

    #[test]
    fn circuit_is_unitary() {
        let mut rng = RngStream::new(1);
        let p = VqcParams::random(3, &mut rng);
        let u = oracle_unitary(&p);
        assert!(
            matmul(&dagger(&u), &u)
                .unwrap()
                .max_abs_diff(&ComplexMatrix::identity(16))
                < 1e-10
        );
        assert!(strongly_entangling_circuit(&p).unitary().max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn zero_everything_is_fixed_point() {
        let p = VqcParams::zeros(2);
        assert_eq!(vqc_forward([0.0; 4], &p), [0.0; 4]);
        assert_eq!(VqcPlan::new(&p).forward([0.0; 4]), [0.0; 4]);
    }

    #[test]
    fn forward_matches_oracle_and_plan() {
        let mut rng = RngStream::new(2);
        for _ in 0..20 {
            let p = VqcParams::random(2, &mut rng);
            let x = random_input(&mut rng);
            let want = oracle_forward(x, &p);
            let got = vqc_forward(x, &p);
            let planned = VqcPlan::new(&p).forward(x);
            for q in 0..4 {
                assert!((got[q] - want[q]).abs() < 1e-10);
                assert!((planned[q] - got[q]).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&got[q]));
            }
        }
    }

    #[test]
    fn angle_periodicity() {
        let mut rng = RngStream::new(3);
        let p = VqcParams::random(2, &mut rng);
        let x = random_input(&mut rng);
        let base = vqc_forward(x, &p);
        for k in [0, 7, 23] {
            let mut q = p.clone();
            q.angles_mut()[k] += 2.0 * PI;
            let shifted = vqc_forward(x, &q);
            for i in 0..4 {
                assert!((shifted[i] - base[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn param_shift_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let h = 1e-5;
        for _ in 0..20 {
            let p = VqcParams::random(2, &mut rng);
            let x = random_input(&mut rng);
            let up: [f64; 4] = std::array::from_fn(|_| rng.normal());
            let grad = vqc_param_shift_grad(x, &p, up);
            assert_eq!(grad.len(), p.len());
            let loss = |pp: &VqcParams| {
                let y = vqc_forward(x, pp);
                (0..4).map(|q| up[q] * y[q]).sum::<f64>()
            };
            for k in 0..p.len() {
                let mut a = p.clone();
                a.angles_mut()[k] += h;
                let mut b = p.clone();
                b.angles_mut()[k] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                assert!((fd - grad[k]).abs() < 1e-5, "k={k}: fd {fd} vs {}", grad[k]);
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(5);
        let h = 1e-6;
        for _ in 0..20 {
            let p = VqcParams::random(2, &mut rng);
            let x: [f64; 4] = std::array::from_fn(|_| 0.05 + 0.9 * rng.uniform());
            let up: [f64; 4] = std::array::from_fn(|_| rng.normal());
            let plan = VqcPlan::new(&p);
            let mut scratch = vec![0.0; p.len()];
            let gx = plan.backward(x, up, &mut scratch);
            for j in 0..4 {
                let mut a = x;
                a[j] += h;
                let mut b = x;
                b[j] -= h;
                let ya = plan.forward(a);
                let yb = plan.forward(b);
                let fd = (0..4).map(|q| up[q] * (ya[q] - yb[q])).sum::<f64>() / (2.0 * h);
                assert!(
                    (fd - gx[j]).abs() < 1e-5 * fd.abs().max(1.0),
                    "{fd} vs {}",
                    gx[j]
                );
            }
        }
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = RngStream::new(6);
        let p = VqcParams::random(1, &mut rng);
        let g = vqc_param_shift_grad(random_input(&mut rng), &p, [0.0; 4]);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(VqcParams::new(0, vec![]).is_err());
        assert!(VqcParams::new(1, vec![0.0; 11]).is_err());
        assert!(VqcParams::new(1, vec![f64::NAN; 12]).is_err());
    }
}
