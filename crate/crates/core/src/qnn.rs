//! Expectation-value quantum layer with parameter-shift gradients.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::{run, Param, ParamCircuit, StateVector};

/// Which Pauli-Z expectations the layer reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Observables {
    /// `⟨Z_i⟩` for every qubit.
    #[default]
    PerQubitZ,
    /// `⟨Z_0⟩` only.
    SingleZ0,
}

impl Observables {
    pub fn qubits(self, n_qubits: usize) -> Vec<usize> {
        match self {
            Observables::PerQubitZ => (0..n_qubits).collect(),
            Observables::SingleZ0 => vec![0],
        }
    }
}

impl fmt::Display for Observables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observables::PerQubitZ => "per_qubit_z",
            Observables::SingleZ0 => "single_z0",
        })
    }
}

impl FromStr for Observables {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_qubit_z" => Ok(Observables::PerQubitZ),
            "single_z0" => Ok(Observables::SingleZ0),
            other => Err(Error::Config(format!("unknown observables '{other}' (expected per_qubit_z|single_z0)"))),
        }
    }
}

pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}

/// Jacobians of the layer outputs, row-major by output.
#[derive(Debug, Clone, PartialEq)]
pub struct QnnGrad {
    pub outputs: Vec<f64>,
    /// `d_weights[o][w] = ∂ output_o / ∂ weight_w`
    pub d_weights: Vec<Vec<f64>>,
    /// `d_features[o][j] = ∂ output_o / ∂ x_j`
    pub d_features: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct QnnLayer {
    feature_map: ParamCircuit,
    circuit: ParamCircuit,
    observables: Vec<usize>,
    pub weights: Vec<f64>,
}

impl QnnLayer {
    /// Builds the layer for `feature_map` followed by `ansatz`, with all
    /// weights zero.
    pub fn new(feature_map: ParamCircuit, ansatz: &ParamCircuit, observables: Observables) -> Result<Self> {
        let circuit = feature_map.then(ansatz)?;
        let observables = observables.qubits(circuit.n_qubits());
        let weights = vec![0.0; circuit.weight_slots()];
        Ok(QnnLayer { feature_map, circuit, observables, weights })
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits()
    }

    pub fn n_features(&self) -> usize {
        self.circuit.data_slots()
    }

    pub fn output_dim(&self) -> usize {
        self.observables.len()
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "quantum layer expects {} features, got {}",
                self.n_features(),
                features.len()
            )));
        }
        Ok(())
    }

    fn measure(&self, state: &StateVector) -> Vec<f64> {
        let probs = state.probabilities();
        self.observables
            .iter()
            .map(|&q| crate::quantum::expectation_z_of_probs(probs.iter().copied(), q))
            .collect()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        let state = run(&self.circuit, features, &self.weights)?;
        Ok(self.measure(&state))
    }

    /// Measurement probabilities of the feature-map-only state.
    pub fn feature_map_probabilities(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        Ok(run(&self.feature_map, features, &[])?.probabilities())
    }

    /// Outputs and exact Jacobians. Each bound gate angle is shifted by
    /// ±π/2 independently; feature derivatives then apply the chain rule
    /// through the encoding's angle functions.
    pub fn grad(&self, features: &[f64]) -> Result<QnnGrad> {
        self.check_features(features)?;
        let angles = self.circuit.resolve_angles(features, &self.weights)?;
        let outputs = self.measure(&self.circuit.run_resolved(&angles)?);

        let bound: Vec<usize> = self
            .circuit
            .ops()
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g.param, Some(Param::Data(_)) | Some(Param::Weight(_))))
            .map(|(i, _)| i)
            .collect();

        let shifted = |op: usize, delta: f64| -> Result<Vec<f64>> {
            let mut a = angles.clone();
            a[op] += delta;
            Ok(self.measure(&self.circuit.run_resolved(&a)?))
        };
        let per_op: Vec<Vec<f64>> = bound
            .par_iter()
            .map(|&op| {
                let plus = shifted(op, FRAC_PI_2)?;
                let minus = shifted(op, -FRAC_PI_2)?;
                Ok(plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p - m)).collect())
            })
            .collect::<Result<_>>()?;

        let n_out = self.output_dim();
        let mut d_weights = vec![vec![0.0; self.weights.len()]; n_out];
        let mut d_features = vec![vec![0.0; features.len()]; n_out];
        for (&op, d_angle) in bound.iter().zip(&per_op) {
            match &self.circuit.ops()[op].param {
                Some(Param::Weight(w)) => {
                    for o in 0..n_out {
                        d_weights[o][*w] += d_angle[o];
                    }
                }
                Some(Param::Data(angle)) => {
                    for (j, partial) in angle.partials(features) {
                        for o in 0..n_out {
                            d_features[o][j] += d_angle[o] * partial;
                        }
                    }
                }
                _ => unreachable!("only bound gates are shifted"),
            }
        }
        Ok(QnnGrad { outputs, d_weights, d_features })
    }
}
