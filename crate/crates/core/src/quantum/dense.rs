//! Dense-matrix construction of a circuit's unitary. Exponential in the
//! register size; used as a reference for the statevector kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::circuit::ParamCircuit;
use super::gate::{GateKind, Mat2};
use crate::error::{Error, Result};

pub const MAX_DENSE_QUBITS: usize = 6;

pub type DenseMatrix = DMatrix<Complex64>;

fn mat2(m: &Mat2) -> DenseMatrix {
    DenseMatrix::from_fn(2, 2, |r, c| m[r][c])
}

/// `I ⊗ … ⊗ m ⊗ … ⊗ I` with `m` acting on `qubit`. Qubit 0 is the
/// least-significant index bit, so it is the rightmost Kronecker factor.
fn embed(m: &DenseMatrix, qubit: usize, n_qubits: usize) -> DenseMatrix {
    let hi = DenseMatrix::identity(1 << (n_qubits - 1 - qubit), 1 << (n_qubits - 1 - qubit));
    let lo = DenseMatrix::identity(1 << qubit, 1 << qubit);
    hi.kronecker(m).kronecker(&lo)
}

fn cx_matrix(control: usize, target: usize, n_qubits: usize) -> DenseMatrix {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let p0 = mat2(&[[one, zero], [zero, zero]]);
    let p1 = mat2(&[[zero, zero], [zero, one]]);
    let x = mat2(&GateKind::X.matrix(0.0).expect("x has a 2x2 matrix"));
    embed(&p0, control, n_qubits) + embed(&p1, control, n_qubits) * embed(&x, target, n_qubits)
}

/// Full `2^n × 2^n` unitary of the bound circuit, `U = U_last ⋯ U_first`.
pub fn dense_unitary(circuit: &ParamCircuit, data: &[f64], weights: &[f64]) -> Result<DenseMatrix> {
    let n = circuit.n_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::Size(format!(
            "dense oracle limited to {MAX_DENSE_QUBITS} qubits, circuit has {n}"
        )));
    }
    let angles = circuit.resolve_angles(data, weights)?;
    let dim = 1 << n;
    let mut u = DenseMatrix::identity(dim, dim);
    for (gate, &angle) in circuit.ops().iter().zip(&angles) {
        let g = match gate.kind.matrix(angle) {
            Some(m) => embed(&mat2(&m), gate.qubits[0], n),
            None => cx_matrix(gate.qubits[0], gate.qubits[1], n),
        };
        u = g * u;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::quantum::gate::Gate;

    #[test]
    fn hadamard_matrix() {
        let c = ParamCircuit::new(1, vec![Gate::h(0)], 0, 0).unwrap();
        let u = dense_unitary(&c, &[], &[]).unwrap();
        let expect = [[1.0, 1.0], [1.0, -1.0]];
        for r in 0..2 {
            for col in 0..2 {
                assert!((u[(r, col)] - Complex64::new(FRAC_1_SQRT_2 * expect[r][col], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn cnot_permutation() {
        // control qubit 0, target qubit 1: |q1 q0⟩ = |01⟩ ↔ |11⟩, i.e. indices 1 ↔ 3.
        let c = ParamCircuit::new(2, vec![Gate::cx(0, 1)], 0, 0).unwrap();
        let u = dense_unitary(&c, &[], &[]).unwrap();
        let perm = [0usize, 3, 2, 1];
        for col in 0..4 {
            for r in 0..4 {
                let e = if r == perm[col] { 1.0 } else { 0.0 };
                assert_eq!(u[(r, col)], Complex64::new(e, 0.0));
            }
        }
    }

    #[test]
    fn size_guard() {
        let c = ParamCircuit::empty(7).unwrap();
        assert!(matches!(dense_unitary(&c, &[], &[]), Err(Error::Size(_))));
    }
}
