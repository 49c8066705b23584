//! Ramsey read-out: single and multi-sensor survival probabilities, Fisher
//! information, the quantum Cramér-Rao bound and the canonical input states.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::fmt_num;
use crate::linalg::{check_normalized, inner, ComplexMatrix, C64, ZERO};
use crate::model::SensorKind;
use crate::spectrum::{pair_input_state, psi0, EigenPair};
use crate::tolerances;

/// How `N` sensors are prepared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// `N` independent copies of the single-sensor input.
    ProductState,
    /// `(|p…p⟩ + |q…q⟩)/√2` across all sensors.
    EntangledGhz,
}

impl InputMode {
    pub fn short(self) -> &'static str {
        match self {
            InputMode::ProductState => "ps",
            InputMode::EntangledGhz => "es",
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ps" | "product" | "product-state" => Ok(InputMode::ProductState),
            "es" | "ghz" | "entangled" | "entangled-ghz" => Ok(InputMode::EntangledGhz),
            other => Err(Error::InvalidArgument(format!("unknown input mode '{other}' (use ps or es)"))),
        }
    }
}

/// `cos²χ`; the common phase of the pair drops out.
pub fn ramsey_probability(chi: f64) -> f64 {
    chi.cos().powi(2)
}

fn check_count(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("sensor count N must be at least 1".into()));
    }
    Ok(())
}

/// `cos^{2N}χ` for product inputs, `cos²(Nχ)` for GHZ inputs.
pub fn multi_sensor_probability(chi: f64, n: u32, mode: InputMode) -> Result<f64> {
    check_count(n)?;
    Ok(match mode {
        InputMode::ProductState => chi.cos().powi(2 * n as i32),
        InputMode::EntangledGhz => (n as f64 * chi).cos().powi(2),
    })
}

/// Classical Fisher information of the read-out with respect to `χ`.
///
/// The GHZ read-out is a single fringe `cos²(Nχ)`, for which
/// `(∂P)²/(P(1−P)) = 4N²` identically. Product inputs are read sensor by
/// sensor, so their information is `N` times the single-sensor `4`. The
/// value is undefined where the fringe is flat (`P(1−P) → 0`).
pub fn fisher_information(chi: f64, n: u32, mode: InputMode) -> Result<f64> {
    check_count(n)?;
    let m = match mode {
        InputMode::ProductState => 1.0,
        InputMode::EntangledGhz => n as f64,
    };
    // sin² rather than 1 − cos² keeps the check meaningful near P = 1.
    let (s, c) = (m * chi).sin_cos();
    let pq = (c * c) * (s * s);
    if pq <= tolerances::FISHER_FRINGE {
        return Err(Error::FringeExtremum(pq));
    }
    Ok(match mode {
        InputMode::ProductState => 4.0 * n as f64,
        InputMode::EntangledGhz => 4.0 * m * m,
    })
}

/// Finite-difference check of [`fisher_information`] with step `h`.
pub fn fisher_information_fd(chi: f64, n: u32, mode: InputMode, h: f64) -> Result<f64> {
    check_count(n)?;
    let (per, reps) = match mode {
        InputMode::ProductState => (1, n as f64),
        InputMode::EntangledGhz => (n, 1.0),
    };
    let prob = |x: f64| multi_sensor_probability(x, per, InputMode::EntangledGhz);
    let p = prob(chi)?;
    let pq = p * (1.0 - p);
    if pq <= tolerances::FISHER_FRINGE {
        return Err(Error::FringeExtremum(pq));
    }
    let dp = (prob(chi + h)? - prob(chi - h)?) / (2.0 * h);
    Ok(reps * dp * dp / pq)
}

/// `1/(4N²)`
pub fn qcrb(n: u32) -> Result<f64> {
    check_count(n)?;
    Ok(1.0 / (4.0 * (n as f64).powi(2)))
}

/// `∫b² − (∫b)²`, returned as computed.
pub fn variance_from_sensors(first_moment: f64, second_moment: f64) -> Result<f64> {
    if second_moment < 0.0 {
        return Err(Error::InvalidArgument(format!("second moment must be non-negative, got {second_moment}")));
    }
    Ok(second_moment - first_moment * first_moment)
}

/// `|⟨φ|U|φ⟩|²`
pub fn survival_probability(u: &ComplexMatrix, phi: &[C64]) -> Result<f64> {
    if phi.len() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: phi.len() });
    }
    check_normalized(phi)?;
    Ok(inner(phi, &u.apply(phi)).norm_sqr().min(1.0))
}

/// Survival of an `N`-sensor GHZ input whose two branches have accumulated
/// per-sensor phases `phase_p` and `phase_q`.
pub fn ghz_survival(phase_p: f64, phase_q: f64, n: u32) -> Result<f64> {
    check_count(n)?;
    let m = n as f64;
    let amp = (C64::from_polar(1.0, -m * phase_p) + C64::from_polar(1.0, -m * phase_q)) * 0.5;
    Ok(amp.norm_sqr())
}

/// The mousetrap input `Ψ₀ (e₄ + e₆)/√2` in the computational basis.
pub fn mousetrap_input_state() -> Vec<C64> {
    pair_input_state(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP).expect("mousetrap pair is valid")
}

/// `(|100⟩ + |110⟩)/√2` read literally as a computational-basis ket.
pub fn table_input_state_computational() -> Vec<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; 8];
    v[0b100] = C64::new(r, 0.0);
    v[0b110] = C64::new(r, 0.0);
    v
}

/// Largest deviation of `Ψ₀†|φ⟩` from `(e₄ + e₆)/√2`.
pub fn eigen_coordinates_deviation(phi: &[C64]) -> f64 {
    let coords = psi0().adjoint().apply(phi);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    coords
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let want = if i == 3 || i == 5 { r } else { 0.0 };
            (z - want).norm()
        })
        .fold(0.0, f64::max)
}

/// One read-out configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub kind: SensorKind,
    pub pair: EigenPair,
    pub n: u32,
    pub mode: InputMode,
}

impl SensorConfig {
    pub fn new(kind: SensorKind, pair: EigenPair, n: u32, mode: InputMode) -> Result<Self> {
        check_count(n)?;
        pair.check(kind)?;
        Ok(Self { kind, pair, n, mode })
    }

    pub fn probability(&self, chi: f64) -> f64 {
        multi_sensor_probability(chi, self.n, self.mode).expect("validated count")
    }
}

/// Probability and phase against one abscissa (time or amplitude).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub abscissa_name: String,
    pub abscissa: Vec<f64>,
    pub probability: Vec<f64>,
    pub phase: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

impl ResponseCurve {
    pub fn from_phases(
        config: &SensorConfig,
        abscissa_name: &str,
        abscissa: Vec<f64>,
        phase: Vec<f64>,
        preset: &str,
    ) -> Result<Self> {
        if abscissa.len() != phase.len() {
            return Err(Error::DimensionMismatch { expected: abscissa.len(), found: phase.len() });
        }
        let probability = phase.iter().map(|&c| config.probability(c)).collect();
        let metadata = vec![
            ("model".into(), config.kind.name().into()),
            ("pair".into(), config.pair.to_string()),
            ("n".into(), config.n.to_string()),
            ("mode".into(), config.mode.to_string()),
            ("waveform".into(), preset.into()),
        ];
        Ok(Self { abscissa_name: abscissa_name.into(), abscissa, probability, phase, metadata })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "{},p,chi", self.abscissa_name)?;
        for i in 0..self.abscissa.len() {
            writeln!(out, "{},{},{}", fmt_num(self.abscissa[i]), fmt_num(self.probability[i]), fmt_num(self.phase[i]))?;
        }
        Ok(())
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn fisher_information_is_independent_of_phase(chi in -3.0f64..3.0, n in 1u32..=10) {
            for (mode, expect) in [(InputMode::EntangledGhz, 4.0 * (n * n) as f64), (InputMode::ProductState, 4.0 * n as f64)] {
                let Ok(f) = fisher_information(chi, n, mode) else { continue };
                prop_assert_eq!(f, expect);
                let per = if mode == InputMode::EntangledGhz { n } else { 1 };
                let p = multi_sensor_probability(chi, per, InputMode::EntangledGhz).unwrap();
                if p * (1.0 - p) > 1e-3 {
                    let fd = fisher_information_fd(chi, n, mode, 1e-6).unwrap();
                    prop_assert!((fd - f).abs() < 1e-4 * f, "fd {} vs {}", fd, f);
                }
            }
        }

        #[test]
        fn product_probability_factorises(chi in -3.0f64..3.0, n in 1u32..=10) {
            let single = ramsey_probability(chi);
            let joint = multi_sensor_probability(chi, n, InputMode::ProductState).unwrap();
            prop_assert!((joint - single.powi(n as i32)).abs() < 1e-13);
            let ghz = multi_sensor_probability(chi, n, InputMode::EntangledGhz).unwrap();
            prop_assert!((ghz - ramsey_probability(n as f64 * chi)).abs() < 1e-13);
        }
    }
}
