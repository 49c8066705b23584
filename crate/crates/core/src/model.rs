//! Few-spin sensor Hamiltonians `H(b) = H₀ + Σ_axis b_axis H₁_axis`.
//!
//! Qubit 1 is the leftmost tensor factor and `|0⟩` is the +1 eigenstate of
//! Z, so basis index `k` of a three-qubit state is the binary string
//! `q₁q₂q₃`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    match axis {
        Axis::X => ComplexMatrix::from_row_major(2, vec![ZERO, ONE, ONE, ZERO]),
        Axis::Y => ComplexMatrix::from_row_major(2, vec![ZERO, -I, I, ZERO]),
        Axis::Z => ComplexMatrix::from_row_major(2, vec![ONE, ZERO, ZERO, -ONE]),
    }
}

/// Tensor product of single-qubit operators; `None` is the identity.
pub fn pauli_string(factors: &[Option<Axis>]) -> ComplexMatrix {
    factors.iter().fold(ComplexMatrix::identity(1), |acc, f| {
        let m = f.map(pauli).unwrap_or_else(|| ComplexMatrix::identity(2));
        acc.kron(&m)
    })
}

/// Sum over qubits of the single-site Pauli along `axis`.
pub fn collective(axis: Axis, qubits: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(1 << qubits);
    for site in 0..qubits {
        let mut f = vec![None; qubits];
        f[site] = Some(axis);
        out = &out + &pauli_string(&f);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    /// `H = b X`
    Standard,
    /// `H = Z + b X`
    LandauZener,
    /// `H = ZZ + b (XI + IX)`
    Dimer,
    /// `H = X₁X₂ + Y₂Y₃ + Z₁Z₃ + b⃗·σ⃗`
    KitaevTrimer,
}

impl SensorKind {
    pub fn dim(self) -> usize {
        match self {
            SensorKind::Standard | SensorKind::LandauZener => 2,
            SensorKind::Dimer => 4,
            SensorKind::KitaevTrimer => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Standard => "standard",
            SensorKind::LandauZener => "landau-zener",
            SensorKind::Dimer => "dimer",
            SensorKind::KitaevTrimer => "trimer",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(SensorKind::Standard),
            "landau-zener" | "landau_zener" | "lz" => Ok(SensorKind::LandauZener),
            "dimer" => Ok(SensorKind::Dimer),
            "trimer" | "kitaev-trimer" | "mousetrap" => Ok(SensorKind::KitaevTrimer),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected standard, landau-zener, dimer or trimer)"
            ))),
        }
    }
}

/// Classical field amplitudes in dimensionless units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub const ZERO: FieldVector = FieldVector { bx: 0.0, by: 0.0, bz: 0.0 };

    pub fn new(bx: f64, by: f64, bz: f64) -> Self {
        Self { bx, by, bz }
    }

    pub fn along(direction: [f64; 3], amplitude: f64) -> Self {
        Self::new(direction[0] * amplitude, direction[1] * amplitude, direction[2] * amplitude)
    }

    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.bx,
            Axis::Y => self.by,
            Axis::Z => self.bz,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bx.is_finite() && self.by.is_finite() && self.bz.is_finite()
    }
}

/// A sensor Hamiltonian family with its couplings prebuilt.
#[derive(Clone, Debug)]
pub struct SensorModel {
    kind: SensorKind,
    bare: ComplexMatrix,
    couplings: [Option<ComplexMatrix>; 3],
}

impl SensorModel {
    pub fn new(kind: SensorKind) -> Self {
        let (bare, couplings) = match kind {
            SensorKind::Standard => (ComplexMatrix::zeros(2), [Some(pauli(Axis::X)), None, None]),
            SensorKind::LandauZener => (pauli(Axis::Z), [Some(pauli(Axis::X)), None, None]),
            SensorKind::Dimer => {
                (pauli_string(&[Some(Axis::Z), Some(Axis::Z)]), [Some(collective(Axis::X, 2)), None, None])
            }
            SensorKind::KitaevTrimer => {
                let xx = pauli_string(&[Some(Axis::X), Some(Axis::X), None]);
                let yy = pauli_string(&[None, Some(Axis::Y), Some(Axis::Y)]);
                let zz = pauli_string(&[Some(Axis::Z), None, Some(Axis::Z)]);
                (
                    &(&xx + &yy) + &zz,
                    [Some(collective(Axis::X, 3)), Some(collective(Axis::Y, 3)), Some(collective(Axis::Z, 3))],
                )
            }
        };
        Self { kind, bare, couplings }
    }

    pub fn trimer() -> Self {
        Self::new(SensorKind::KitaevTrimer)
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn bare_hamiltonian(&self) -> &ComplexMatrix {
        &self.bare
    }

    pub fn supports(&self, axis: Axis) -> bool {
        self.couplings[axis.index()].is_some()
    }

    pub fn coupling_hamiltonian(&self, axis: Axis) -> Result<&ComplexMatrix> {
        self.couplings[axis.index()]
            .as_ref()
            .ok_or(Error::UnsupportedAxis { model: self.kind.name(), axis: axis.label() })
    }

    /// `d⃗·σ⃗` for a (not necessarily unit) direction.
    pub fn coupling_along(&self, direction: [f64; 3]) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::zeros(self.dim());
        for axis in Axis::ALL {
            let w = direction[axis.index()];
            if w != 0.0 {
                out.add_scaled(self.coupling_hamiltonian(axis)?, w);
            }
        }
        Ok(out)
    }

    pub fn hamiltonian_at(&self, b: FieldVector) -> Result<ComplexMatrix> {
        if !b.is_finite() {
            return Err(Error::InvalidArgument(format!("field must be finite, got {b:?}")));
        }
        let mut h = self.bare.clone();
        for axis in Axis::ALL {
            let w = b.component(axis);
            if w != 0.0 {
                h.add_scaled(self.coupling_hamiltonian(axis)?, w);
            }
        }
        Ok(h)
    }
}

/// Convenience conversion used by configuration parsing.
pub fn parse_direction(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.len() == 1 {
        return match parts[0].to_ascii_lowercase().as_str() {
            "x" => Ok([1.0, 0.0, 0.0]),
            "y" => Ok([0.0, 1.0, 0.0]),
            "z" => Ok([0.0, 0.0, 1.0]),
            other => Err(Error::InvalidArgument(format!("unknown direction '{other}'"))),
        };
    }
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!("direction needs 3 components, got '{text}'")));
    }
    let mut d = [0.0; 3];
    for (slot, p) in d.iter_mut().zip(parts) {
        *slot = p.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad direction component '{p}'")))?;
    }
    Ok(d)
}
