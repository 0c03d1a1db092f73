use num_complex::Complex64;

use super::gate::{Gate, GateKind, Mat2};
use crate::error::{Error, Result};

pub type Amplitude = Complex64;

pub const MAX_QUBITS: usize = 20;

/// Pure state of an `n`-qubit register. Qubit 0 is the least-significant
/// bit of the amplitude index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Size(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the caller
    /// is responsible for normalization.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Size(format!("amplitude count {len} is not a power of two ≥ 2")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!("{n_qubits} qubits exceeds the limit of {MAX_QUBITS}")));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨ψ|Z_q|ψ⟩`, clamped to `[−1, 1]` against rounding in deep circuits.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        Ok(expectation_z_of_probs(self.amps.iter().map(|a| a.norm_sqr()), qubit).clamp(-1.0, 1.0))
    }

    pub(crate) fn apply_single(&mut self, m: &Mat2, q: usize) {
        let stride = 1usize << q;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += stride << 1;
        }
    }

    pub(crate) fn apply_cx(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// Applies `kind` in place with an already-resolved angle. Qubit indices
    /// must have been validated by the caller.
    pub(crate) fn apply_kind(&mut self, kind: GateKind, qubits: &[usize], angle: f64) {
        match kind.matrix(angle) {
            Some(m) => self.apply_single(&m, qubits[0]),
            None => self.apply_cx(qubits[0], qubits[1]),
        }
    }
}

/// Signed sum of basis-state probabilities for `Z` on `qubit`.
pub fn expectation_z_of_probs(probs: impl IntoIterator<Item = f64>, qubit: usize) -> f64 {
    let mask = 1usize << qubit;
    probs
        .into_iter()
        .enumerate()
        .map(|(k, p)| if k & mask == 0 { p } else { -p })
        .sum()
}

pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

/// Returns the state after `gate`. Parametric gates take their angle from
/// `bound_angle`; any symbolic parameter on the gate itself is ignored here.
pub fn apply_gate(state: &StateVector, gate: &Gate, bound_angle: Option<f64>) -> Result<StateVector> {
    gate.validate(state.n_qubits)?;
    let angle = match (gate.kind.is_parametric(), bound_angle) {
        (true, Some(a)) => a,
        (true, None) => {
            return Err(Error::Binding(format!("{} gate requires a bound angle", gate.kind)));
        }
        (false, _) => 0.0,
    };
    if !angle.is_finite() {
        return Err(Error::Binding(format!("non-finite angle {angle}")));
    }
    let mut out = state.clone();
    out.apply_kind(gate.kind, &gate.qubits, angle);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use super::*;
    use crate::quantum::gate::Param;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_amps(state: &StateVector, expect: &[Complex64], tol: f64) {
        assert_eq!(state.amplitudes().len(), expect.len());
        for (a, b) in state.amplitudes().iter().zip(expect) {
            assert!((a - b).norm() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_state_basis() {
        assert_amps(&zero_state(1).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0)], 0.0);
        assert_amps(&zero_state(2).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 0.0);
        let s3 = zero_state(3).unwrap();
        assert_eq!(s3.amplitudes().len(), 8);
        assert_eq!(s3.norm_sqr(), 1.0);
    }

    #[test]
    fn zero_state_range() {
        assert!(matches!(zero_state(0), Err(Error::Size(_))));
        assert!(matches!(zero_state(21), Err(Error::Size(_))));
        assert!(zero_state(20).is_ok());
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&zero_state(1).unwrap(), &Gate::h(0), None).unwrap();
        assert_amps(&s, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], 1e-15);
    }

    #[test]
    fn cx_flips_target_when_control_set() {
        // |10⟩ in ket order q1 q0 with the control (qubit 0) set is index 0b01.
        let s = apply_gate(&zero_state(2).unwrap(), &Gate::new(GateKind::X, 0), None).unwrap();
        let s = apply_gate(&s, &Gate::cx(0, 1), None).unwrap();
        assert_amps(&s, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 0.0);
        // control clear: nothing happens
        let s = apply_gate(&zero_state(2).unwrap(), &Gate::cx(0, 1), None).unwrap();
        assert_amps(&s, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 0.0);
    }

    #[test]
    fn rz_pi_on_zero() {
        let g = Gate::parametric(GateKind::RZ, 0, Param::Weight(0));
        let s = apply_gate(&zero_state(1).unwrap(), &g, Some(PI)).unwrap();
        assert_amps(&s, &[Complex64::from_polar(1.0, -PI / 2.0), c(0.0, 0.0)], 1e-15);
    }

    #[test]
    fn apply_gate_errors() {
        let s = zero_state(2).unwrap();
        let g = Gate::parametric(GateKind::RX, 0, Param::Weight(0));
        assert!(matches!(apply_gate(&s, &g, None), Err(Error::Binding(_))));
        assert!(matches!(apply_gate(&s, &Gate::h(2), None), Err(Error::QubitIndex { .. })));
    }

    #[test]
    fn involutions() {
        let mut s = zero_state(2).unwrap();
        s.apply_single(&GateKind::RY.matrix(0.4).unwrap(), 0);
        s.apply_single(&GateKind::RX.matrix(1.3).unwrap(), 1);
        s.apply_cx(0, 1);
        for kind in [GateKind::X, GateKind::H, GateKind::Z] {
            for q in 0..2 {
                let mut t = s.clone();
                t.apply_kind(kind, &[q], 0.0);
                t.apply_kind(kind, &[q], 0.0);
                assert_amps(&t, s.amplitudes(), 1e-12);
            }
        }
    }

    #[test]
    fn rz_composes_additively() {
        let mut s = zero_state(1).unwrap();
        s.apply_single(&GateKind::H.matrix(0.0).unwrap(), 0);
        s.apply_single(&GateKind::RY.matrix(0.3).unwrap(), 0);
        let (a, b) = (0.81, -2.3);
        let mut two = s.clone();
        two.apply_kind(GateKind::RZ, &[0], a);
        two.apply_kind(GateKind::RZ, &[0], b);
        let mut one = s;
        one.apply_kind(GateKind::RZ, &[0], a + b);
        assert_amps(&two, one.amplitudes(), 1e-10);
    }

    #[test]
    fn expectation_z_values() {
        let zero = zero_state(1).unwrap();
        assert_eq!(zero.expectation_z(0).unwrap(), 1.0);
        let one = apply_gate(&zero, &Gate::new(GateKind::X, 0), None).unwrap();
        assert_eq!(one.expectation_z(0).unwrap(), -1.0);
        let bell = StateVector::from_amplitudes(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        assert!(bell.expectation_z(0).unwrap().abs() < 1e-15);
        assert!(bell.expectation_z(2).is_err());
    }

    #[test]
    fn expectation_is_linear_in_probabilities() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.25, 0.25, 0.4, 0.1];
        let w = 0.35;
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        for qubit in 0..2 {
            let lhs = expectation_z_of_probs(mix.iter().copied(), qubit);
            let rhs = w * expectation_z_of_probs(p, qubit) + (1.0 - w) * expectation_z_of_probs(q, qubit);
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }
}
