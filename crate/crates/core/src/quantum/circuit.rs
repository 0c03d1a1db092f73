use super::gate::{Gate, Param};
use super::state::{StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOrigin {
    /// Bound to input feature `feature`.
    Data { feature: usize },
    Weight,
}

/// One entry of the circuit's dense slot numbering: data slots come first,
/// then weight slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    pub index: usize,
    pub origin: SlotOrigin,
}

/// Ordered gate list whose angles are bound to input features (data slots)
/// or trainable weights (weight slots) at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    n_qubits: usize,
    ops: Vec<Gate>,
    data_slots: usize,
    weight_slots: usize,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, ops: Vec<Gate>, data_slots: usize, weight_slots: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Size(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        for gate in &ops {
            gate.validate(n_qubits)?;
            match &gate.param {
                Some(Param::Data(angle)) => {
                    if let Some(&f) = angle.features().iter().find(|&&f| f >= data_slots) {
                        return Err(Error::Binding(format!(
                            "gate references feature {f} but circuit has {data_slots} data slots"
                        )));
                    }
                }
                Some(Param::Weight(w)) if *w >= weight_slots => {
                    return Err(Error::Binding(format!(
                        "gate references weight {w} but circuit has {weight_slots} weight slots"
                    )));
                }
                Some(Param::Const(a)) if !a.is_finite() => {
                    return Err(Error::Binding(format!("non-finite constant angle {a}")));
                }
                _ => {}
            }
        }
        Ok(ParamCircuit { n_qubits, ops, data_slots, weight_slots })
    }

    pub fn empty(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new(), 0, 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Gate] {
        &self.ops
    }

    pub fn data_slots(&self) -> usize {
        self.data_slots
    }

    pub fn weight_slots(&self) -> usize {
        self.weight_slots
    }

    pub fn slots(&self) -> Vec<ParamSlot> {
        let data = (0..self.data_slots).map(|f| SlotOrigin::Data { feature: f });
        let weights = std::iter::repeat_n(SlotOrigin::Weight, self.weight_slots);
        data.chain(weights)
            .enumerate()
            .map(|(index, origin)| ParamSlot { index, origin })
            .collect()
    }

    /// Number of gates that carry a data or weight parameter.
    pub fn n_bound_gates(&self) -> usize {
        self.ops
            .iter()
            .filter(|g| matches!(g.param, Some(Param::Data(_)) | Some(Param::Weight(_))))
            .count()
    }

    pub fn check_bindings(&self, data: &[f64], weights: &[f64]) -> Result<()> {
        if data.len() != self.data_slots {
            return Err(Error::Binding(format!(
                "expected {} data values, got {}",
                self.data_slots,
                data.len()
            )));
        }
        if weights.len() != self.weight_slots {
            return Err(Error::Binding(format!(
                "expected {} weight values, got {}",
                self.weight_slots,
                weights.len()
            )));
        }
        if let Some(v) = data.iter().chain(weights).find(|v| !v.is_finite()) {
            return Err(Error::Binding(format!("non-finite binding value {v}")));
        }
        Ok(())
    }

    /// Concrete angle of every op (0 for non-parametric gates).
    pub fn resolve_angles(&self, data: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        self.check_bindings(data, weights)?;
        Ok(self
            .ops
            .iter()
            .map(|g| match &g.param {
                None => 0.0,
                Some(Param::Const(a)) => *a,
                Some(Param::Data(angle)) => angle.eval(data),
                Some(Param::Weight(w)) => weights[*w],
            })
            .collect())
    }

    /// Runs the circuit from `|0…0⟩` with one explicit angle per op.
    pub fn run_resolved(&self, angles: &[f64]) -> Result<StateVector> {
        if angles.len() != self.ops.len() {
            return Err(Error::Binding(format!(
                "expected {} resolved angles, got {}",
                self.ops.len(),
                angles.len()
            )));
        }
        let mut state = StateVector::zero(self.n_qubits)?;
        for (gate, &angle) in self.ops.iter().zip(angles) {
            state.apply_kind(gate.kind, &gate.qubits, angle);
        }
        Ok(state)
    }

    /// Concatenates `self` followed by `next`. Both circuits read the same
    /// input features; `next`'s weights are renumbered after `self`'s.
    pub fn then(&self, next: &ParamCircuit) -> Result<ParamCircuit> {
        if self.n_qubits != next.n_qubits {
            return Err(Error::Arity(format!(
                "cannot compose {}-qubit and {}-qubit circuits",
                self.n_qubits, next.n_qubits
            )));
        }
        let offset = self.weight_slots;
        let mut ops = self.ops.clone();
        ops.extend(next.ops.iter().map(|g| {
            let mut g = g.clone();
            if let Some(Param::Weight(w)) = g.param {
                g.param = Some(Param::Weight(w + offset));
            }
            g
        }));
        ParamCircuit::new(
            self.n_qubits,
            ops,
            self.data_slots.max(next.data_slots),
            self.weight_slots + next.weight_slots,
        )
    }
}

/// Applies the circuit's gates in order to `|0…0⟩`.
pub fn run(circuit: &ParamCircuit, data: &[f64], weights: &[f64]) -> Result<StateVector> {
    let angles = circuit.resolve_angles(data, weights)?;
    circuit.run_resolved(&angles)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::quantum::gate::{DataAngle, GateKind};

    #[test]
    fn empty_circuit_is_identity() {
        let c = ParamCircuit::empty(2).unwrap();
        let s = run(&c, &[], &[]).unwrap();
        assert_eq!(s, StateVector::zero(2).unwrap());
    }

    #[test]
    fn single_hadamard() {
        let c = ParamCircuit::new(1, vec![Gate::h(0)], 0, 0).unwrap();
        let s = run(&c, &[], &[]).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - FRAC_1_SQRT_2).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn binding_length_mismatch() {
        let c = ParamCircuit::new(
            1,
            vec![
                Gate::parametric(GateKind::RY, 0, Param::Weight(0)),
                Gate::parametric(GateKind::Phase, 0, Param::Data(DataAngle::Linear { feature: 0, scale: 2.0 })),
            ],
            1,
            1,
        )
        .unwrap();
        assert!(matches!(run(&c, &[], &[0.1]), Err(Error::Binding(_))));
        assert!(matches!(run(&c, &[0.1], &[]), Err(Error::Binding(_))));
        assert!(run(&c, &[0.1], &[0.2]).is_ok());
    }

    #[test]
    fn dangling_slot_references_rejected() {
        let g = Gate::parametric(GateKind::RY, 0, Param::Weight(3));
        assert!(ParamCircuit::new(1, vec![g], 0, 3).is_err());
        let g = Gate::parametric(GateKind::RY, 0, Param::Data(DataAngle::Linear { feature: 1, scale: 1.0 }));
        assert!(ParamCircuit::new(1, vec![g], 1, 0).is_err());
    }

    #[test]
    fn slot_listing_puts_data_first() {
        let c = ParamCircuit::new(2, vec![], 2, 3).unwrap();
        let slots = c.slots();
        assert_eq!(slots.len(), 5);
        assert_eq!(slots[1].origin, SlotOrigin::Data { feature: 1 });
        assert_eq!(slots[4], ParamSlot { index: 4, origin: SlotOrigin::Weight });
    }
}
