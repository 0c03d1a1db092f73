//! Circuit builders for the Z, ZZ and Pauli feature maps and the TwoLocal
//! ansatz.
//!
//! Every feature map repeats `reps` times a Hadamard layer followed by one
//! evolution block per Pauli string placement. A placement of the string
//! `P_0 … P_{L-1}` on qubits `q_0 < … < q_{L-1}` is compiled as a basis
//! change (X → H, Y → RX(π/2)), a CX ladder onto `q_{L-1}`, `PHASE(2φ)` on
//! `q_{L-1}`, and the mirrored uncompute. `φ = x_j` for single letters and
//! `φ = Π_j (π − x_j)` for longer strings. Data slots are the input
//! features, shared across repetitions.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantum::{DataAngle, Gate, GateKind, Param, ParamCircuit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entanglement {
    Linear,
    Full,
}

impl Entanglement {
    /// Qubit tuples of size `block` this scheme places a Pauli string on.
    pub fn placements(self, n_qubits: usize, block: usize) -> Vec<Vec<usize>> {
        if block == 0 || block > n_qubits {
            return Vec::new();
        }
        if block == 1 {
            return (0..n_qubits).map(|q| vec![q]).collect();
        }
        match self {
            Entanglement::Linear => (0..=n_qubits - block).map(|s| (s..s + block).collect()).collect(),
            Entanglement::Full => combinations(n_qubits, block),
        }
    }

    pub fn pairs(self, n_qubits: usize) -> Vec<(usize, usize)> {
        self.placements(n_qubits, 2).into_iter().map(|p| (p[0], p[1])).collect()
    }
}

/// Strictly increasing `k`-tuples over `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl fmt::Display for Entanglement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Entanglement::Linear => "linear",
            Entanglement::Full => "full",
        })
    }
}

impl FromStr for Entanglement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Entanglement::Linear),
            "full" => Ok(Entanglement::Full),
            other => Err(Error::Config(format!("unknown entanglement '{other}' (expected linear|full)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Config("empty Pauli string".into()));
        }
        s.chars()
            .map(|c| match c {
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Config(format!("invalid Pauli letter '{other}' in '{s}' (expected X, Y or Z)"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            f.write_str(match p {
                Pauli::X => "X",
                Pauli::Y => "Y",
                Pauli::Z => "Z",
            })?;
        }
        Ok(())
    }
}

fn evolution_block(ops: &mut Vec<Gate>, string: &PauliString, qubits: &[usize]) {
    debug_assert_eq!(string.len(), qubits.len());
    for (&p, &q) in string.letters().iter().zip(qubits) {
        match p {
            Pauli::X => ops.push(Gate::h(q)),
            Pauli::Y => ops.push(Gate::parametric(GateKind::RX, q, Param::Const(FRAC_PI_2))),
            Pauli::Z => {}
        }
    }
    for w in qubits.windows(2) {
        ops.push(Gate::cx(w[0], w[1]));
    }
    let angle = if qubits.len() == 1 {
        DataAngle::Linear { feature: qubits[0], scale: 2.0 }
    } else {
        DataAngle::Product { features: qubits.to_vec(), scale: 2.0 }
    };
    let last = *qubits.last().expect("placement is nonempty");
    ops.push(Gate::parametric(GateKind::Phase, last, Param::Data(angle)));
    for w in qubits.windows(2).rev() {
        ops.push(Gate::cx(w[0], w[1]));
    }
    for (&p, &q) in string.letters().iter().zip(qubits).rev() {
        match p {
            Pauli::X => ops.push(Gate::h(q)),
            Pauli::Y => ops.push(Gate::parametric(GateKind::RX, q, Param::Const(-FRAC_PI_2))),
            Pauli::Z => {}
        }
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    Ok(())
}

pub fn build_pauli_feature_map(
    n_qubits: usize,
    strings: &[PauliString],
    reps: usize,
    entanglement: Entanglement,
) -> Result<ParamCircuit> {
    check_reps(reps)?;
    if strings.is_empty() {
        return Err(Error::Config("pauli feature map needs at least one string".into()));
    }
    if let Some(s) = strings.iter().find(|s| s.len() > n_qubits) {
        return Err(Error::Arity(format!("Pauli string {s} is longer than the {n_qubits}-qubit register")));
    }
    let mut ops = Vec::new();
    for _ in 0..reps {
        ops.extend((0..n_qubits).map(Gate::h));
        for s in strings {
            for placement in entanglement.placements(n_qubits, s.len()) {
                evolution_block(&mut ops, s, &placement);
            }
        }
    }
    ParamCircuit::new(n_qubits, ops, n_qubits, 0)
}

pub fn build_z_feature_map(n_qubits: usize, reps: usize) -> Result<ParamCircuit> {
    build_pauli_feature_map(n_qubits, &[PauliString(vec![Pauli::Z])], reps, Entanglement::Linear)
}

pub fn build_zz_feature_map(n_qubits: usize, reps: usize, entanglement: Entanglement) -> Result<ParamCircuit> {
    if n_qubits < 2 {
        return Err(Error::Arity(format!("zz feature map needs at least 2 qubits, got {n_qubits}")));
    }
    let strings = [PauliString(vec![Pauli::Z]), PauliString(vec![Pauli::Z, Pauli::Z])];
    build_pauli_feature_map(n_qubits, &strings, reps, entanglement)
}

/// RY rotation layer, then `reps` × (linear CX ladder, RY layer).
pub fn build_two_local(n_qubits: usize, reps: usize) -> Result<ParamCircuit> {
    check_reps(reps)?;
    let mut ops = Vec::new();
    let mut weight = 0;
    let mut rotation_layer = |ops: &mut Vec<Gate>| {
        for q in 0..n_qubits {
            ops.push(Gate::parametric(GateKind::RY, q, Param::Weight(weight)));
            weight += 1;
        }
    };
    rotation_layer(&mut ops);
    for _ in 0..reps {
        for q in 0..n_qubits.saturating_sub(1) {
            ops.push(Gate::cx(q, q + 1));
        }
        rotation_layer(&mut ops);
    }
    ParamCircuit::new(n_qubits, ops, 0, n_qubits * (reps + 1))
}

/// Feature map followed by the ansatz.
pub fn compose(feature_map: &ParamCircuit, ansatz: &ParamCircuit) -> Result<ParamCircuit> {
    feature_map.then(ansatz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFamily {
    Z,
    ZZ,
    Pauli,
}

/// Declarative feature map choice, written as e.g.
/// `family=zz reps=2 entanglement=linear` or
/// `family=pauli strings=Z,YY,ZXZ reps=2 entanglement=linear`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapSpec {
    pub family: FeatureFamily,
    pub reps: usize,
    pub entanglement: Entanglement,
    pub strings: Vec<PauliString>,
}

impl FeatureMapSpec {
    pub fn z(reps: usize) -> Self {
        FeatureMapSpec { family: FeatureFamily::Z, reps, entanglement: Entanglement::Linear, strings: Vec::new() }
    }

    pub fn zz(reps: usize, entanglement: Entanglement) -> Self {
        FeatureMapSpec { family: FeatureFamily::ZZ, reps, entanglement, strings: Vec::new() }
    }

    pub fn pauli(strings: &[&str], reps: usize, entanglement: Entanglement) -> Result<Self> {
        let strings = strings.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
        Ok(FeatureMapSpec { family: FeatureFamily::Pauli, reps, entanglement, strings })
    }

    pub fn build(&self, n_qubits: usize) -> Result<ParamCircuit> {
        match self.family {
            FeatureFamily::Z => build_z_feature_map(n_qubits, self.reps),
            FeatureFamily::ZZ => build_zz_feature_map(n_qubits, self.reps, self.entanglement),
            FeatureFamily::Pauli => build_pauli_feature_map(n_qubits, &self.strings, self.reps, self.entanglement),
        }
    }

    /// Short identifier used for run directory names.
    pub fn slug(&self) -> String {
        match self.family {
            FeatureFamily::Z => format!("z_feature_map_reps_{}", self.reps),
            FeatureFamily::ZZ => format!("zz_feature_map_reps_{}_{}", self.reps, self.entanglement),
            FeatureFamily::Pauli => {
                let letters: Vec<String> = self.strings.iter().map(|s| s.to_string().to_lowercase()).collect();
                format!("pauli_{}_reps_{}_{}", letters.join("_"), self.reps, self.entanglement)
            }
        }
    }

    /// The nine feature maps of the feature-map comparison study, keyed by
    /// their conventional run names.
    pub fn comparison_set() -> Vec<(&'static str, FeatureMapSpec)> {
        let zyz = ["Z", "YY", "ZXZ"];
        vec![
            ("zz_feature_map_reps_1_linear_entanglement", FeatureMapSpec::zz(1, Entanglement::Linear)),
            ("zz_feature_map_reps_2_linear", FeatureMapSpec::zz(2, Entanglement::Linear)),
            ("zz_feature_map_reps_3_full", FeatureMapSpec::zz(3, Entanglement::Full)),
            ("z_feature_map_reps_1", FeatureMapSpec::z(1)),
            ("z_feature_map_reps_2", FeatureMapSpec::z(2)),
            ("z_feature_map_reps_3", FeatureMapSpec::z(3)),
            ("pauli_xyz_1_rep", FeatureMapSpec::pauli(&["X", "Y", "Z"], 1, Entanglement::Linear).expect("valid")),
            ("pauli_z_yy_zxz_linear", FeatureMapSpec::pauli(&zyz, 1, Entanglement::Linear).expect("valid")),
            ("pauli_z_yy_zxz_rep_2", FeatureMapSpec::pauli(&zyz, 2, Entanglement::Linear).expect("valid")),
        ]
    }
}

impl fmt::Display for FeatureMapSpec {
    /// Canonical text; linear entanglement is the default and is left out.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            FeatureFamily::Z => write!(f, "family=z reps={}", self.reps)?,
            FeatureFamily::ZZ => write!(f, "family=zz reps={}", self.reps)?,
            FeatureFamily::Pauli => {
                let strings: Vec<String> = self.strings.iter().map(ToString::to_string).collect();
                write!(f, "family=pauli strings={} reps={}", strings.join(","), self.reps)?
            }
        }
        if self.family != FeatureFamily::Z && self.entanglement != Entanglement::Linear {
            write!(f, " entanglement={}", self.entanglement)?;
        }
        Ok(())
    }
}

impl FromStr for FeatureMapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut reps = 1usize;
        let mut entanglement = Entanglement::Linear;
        let mut strings = None;
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("feature map token '{token}' is not key=value")))?;
            match key {
                "family" => {
                    family = Some(match value {
                        "z" => FeatureFamily::Z,
                        "zz" => FeatureFamily::ZZ,
                        "pauli" => FeatureFamily::Pauli,
                        other => {
                            return Err(Error::Config(format!("unknown feature map family '{other}' (expected z|zz|pauli)")))
                        }
                    })
                }
                "reps" => {
                    reps = value
                        .parse()
                        .ok()
                        .filter(|&r| r >= 1)
                        .ok_or_else(|| Error::Config(format!("feature map reps must be a positive integer, got '{value}'")))?
                }
                "entanglement" => entanglement = value.parse()?,
                "strings" => strings = Some(value.split(',').map(str::parse).collect::<Result<Vec<PauliString>>>()?),
                other => return Err(Error::Config(format!("unknown feature map key '{other}'"))),
            }
        }
        let family = family.ok_or_else(|| Error::Config(format!("feature map '{s}' is missing family=")))?;
        let strings = match (family, strings) {
            (FeatureFamily::Pauli, Some(st)) => st,
            (FeatureFamily::Pauli, None) => {
                return Err(Error::Config("family=pauli requires strings=".into()));
            }
            (_, Some(_)) => return Err(Error::Config("strings= is only valid for family=pauli".into())),
            (_, None) => Vec::new(),
        };
        Ok(FeatureMapSpec { family, reps, entanglement, strings })
    }
}

/// TwoLocal ansatz with RY rotations and a linear CX entangler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnsatzSpec {
    pub reps: usize,
}

impl AnsatzSpec {
    pub fn weight_slots(&self, n_qubits: usize) -> usize {
        n_qubits * (self.reps + 1)
    }

    pub fn build(&self, n_qubits: usize) -> Result<ParamCircuit> {
        build_two_local(n_qubits, self.reps)
    }
}
