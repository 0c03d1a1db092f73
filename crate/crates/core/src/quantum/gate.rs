use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// 2×2 complex matrix in row-major order.
pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    RX,
    RY,
    RZ,
    Phase,
    CX,
}

impl GateKind {
    pub const ALL: [GateKind; 11] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::T,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::Phase,
        GateKind::CX,
    ];

    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::Phase)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::CX => 2,
            _ => 1,
        }
    }

    /// Single-qubit matrix for this gate. Parametric kinds read `angle`;
    /// the others ignore it. CX has no 2×2 form and returns `None`.
    pub fn matrix(self, angle: f64) -> Option<Mat2> {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let m = match self {
            GateKind::H => [[h, h], [h, -h]],
            GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
            GateKind::Y => [[ZERO, -I], [I, ZERO]],
            GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
            GateKind::S => [[ONE, ZERO], [ZERO, I]],
            GateKind::T => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
            GateKind::RX => {
                let (s, c) = (angle / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let s = Complex64::new(0.0, -s);
                [[c, s], [s, c]]
            }
            GateKind::RY => {
                let (s, c) = (angle / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            // e^{-iθZ/2}
            GateKind::RZ => [
                [Complex64::from_polar(1.0, -angle / 2.0), ZERO],
                [ZERO, Complex64::from_polar(1.0, angle / 2.0)],
            ],
            GateKind::Phase => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, angle)]],
            GateKind::CX => return None,
        };
        Some(m)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::T => "t",
            GateKind::RX => "rx",
            GateKind::RY => "ry",
            GateKind::RZ => "rz",
            GateKind::Phase => "p",
            GateKind::CX => "cx",
        };
        f.write_str(name)
    }
}

/// How a data-bound angle is computed from the input features.
#[derive(Debug, Clone, PartialEq)]
pub enum DataAngle {
    /// `scale * x[feature]`
    Linear { feature: usize, scale: f64 },
    /// `scale * Π_j (π - x[features_j])`
    Product { features: Vec<usize>, scale: f64 },
}

impl DataAngle {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DataAngle::Linear { feature, scale } => scale * x[*feature],
            DataAngle::Product { features, scale } => {
                scale * features.iter().map(|&j| std::f64::consts::PI - x[j]).product::<f64>()
            }
        }
    }

    /// Partial derivatives of the angle with respect to each referenced
    /// feature, as `(feature, d angle / d x_feature)` pairs. A feature that
    /// appears more than once contributes one entry per occurrence.
    pub fn partials(&self, x: &[f64]) -> Vec<(usize, f64)> {
        match self {
            DataAngle::Linear { feature, scale } => vec![(*feature, *scale)],
            DataAngle::Product { features, scale } => {
                let pi = std::f64::consts::PI;
                (0..features.len())
                    .map(|i| {
                        let rest: f64 = features
                            .iter()
                            .enumerate()
                            .filter(|&(k, _)| k != i)
                            .map(|(_, &j)| pi - x[j])
                            .product();
                        (features[i], -scale * rest)
                    })
                    .collect()
            }
        }
    }

    pub fn features(&self) -> Vec<usize> {
        match self {
            DataAngle::Linear { feature, .. } => vec![*feature],
            DataAngle::Product { features, .. } => features.clone(),
        }
    }
}

/// Source of a parametric gate's angle.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Const(f64),
    Data(DataAngle),
    /// Index into the trainable weight vector.
    Weight(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    /// Target for single-qubit gates; `[control, target]` for CX.
    pub qubits: Vec<usize>,
    pub param: Option<Param>,
}

impl Gate {
    pub fn new(kind: GateKind, qubit: usize) -> Self {
        Gate { kind, qubits: vec![qubit], param: None }
    }

    pub fn parametric(kind: GateKind, qubit: usize, param: Param) -> Self {
        Gate { kind, qubits: vec![qubit], param: Some(param) }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::CX, qubits: vec![control, target], param: None }
    }

    pub fn h(q: usize) -> Self {
        Gate::new(GateKind::H, q)
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.qubits.len() != self.kind.arity() {
            return Err(Error::Arity(format!(
                "{} expects {} qubit(s), got {}",
                self.kind,
                self.kind.arity(),
                self.qubits.len()
            )));
        }
        for &q in &self.qubits {
            if q >= n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits });
            }
        }
        if self.kind == GateKind::CX && self.qubits[0] == self.qubits[1] {
            return Err(Error::Arity("cx control and target must differ".into()));
        }
        if self.kind.is_parametric() != self.param.is_some() {
            return Err(Error::Binding(format!(
                "{} gate {} an angle parameter",
                self.kind,
                if self.kind.is_parametric() { "requires" } else { "does not take" }
            )));
        }
        Ok(())
    }
}
