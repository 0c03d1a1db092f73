//! Statevector simulation of small parameterized circuits.

mod circuit;
mod dense;
mod gate;
mod state;

pub use circuit::{run, ParamCircuit, ParamSlot, SlotOrigin};
pub use dense::{dense_unitary, DenseMatrix, MAX_DENSE_QUBITS};
pub use gate::{DataAngle, Gate, GateKind, Mat2, Param};
pub use state::{apply_gate, expectation_z_of_probs, zero_state, Amplitude, StateVector, MAX_QUBITS};
