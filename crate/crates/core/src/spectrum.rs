//! Closed-form spectra, the zero-field trimer eigenbasis and accumulated
//! Ramsey phases `χ = ½∫(λ_p − λ_q) dτ`.
//!
//! Eigenvalues are labelled 1-based in a fixed order that follows the
//! eigenvectors continuously through `b = 0`; they are not sorted.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, C64};
use crate::model::{Axis, FieldVector, SensorKind, SensorModel};
use crate::signal::Waveform;
use crate::tolerances;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// The eight trimer eigenvalues for a field `b` along `z`, in label order.
pub fn trimer_eigenvalues_z(b: f64) -> [f64; 8] {
    let (p, s) = (b, SQRT3);
    let q = (3.0 - 4.0 * b + 4.0 * b * b).sqrt();
    let r = (3.0 + 4.0 * b + 4.0 * b * b).sqrt();
    [-p - s, -p + s, p - s, p + s, -p - q, -p + q, p - r, p + r]
}

/// Labelled eigenvalues of any sensor for amplitude `b` along its analytic axis.
pub fn table_sensor_eigenvalues(kind: SensorKind, b: f64) -> Vec<f64> {
    match kind {
        SensorKind::Standard => vec![-b, b],
        SensorKind::LandauZener => {
            let w = (1.0 + b * b).sqrt();
            vec![-w, w]
        }
        SensorKind::Dimer => {
            let w = (1.0 + 4.0 * b * b).sqrt();
            vec![-1.0, 1.0, -w, w]
        }
        SensorKind::KitaevTrimer => trimer_eigenvalues_z(b).to_vec(),
    }
}

/// Axis along which the closed-form spectrum of `kind` applies.
pub fn analytic_axis(kind: SensorKind) -> Axis {
    match kind {
        SensorKind::KitaevTrimer => Axis::Z,
        _ => Axis::X,
    }
}

/// `+1` or `-1` when the waveform points along (or against) the analytic axis.
pub fn analytic_sign(kind: SensorKind, w: &Waveform) -> Result<f64> {
    let axis = analytic_axis(kind);
    let d = w.direction;
    let along = d[axis.index()];
    let off: f64 = (0..3).filter(|&i| i != axis.index()).map(|i| d[i].abs()).sum();
    if off > tolerances::DIRECTION_NORM || (along.abs() - 1.0).abs() > tolerances::DIRECTION_NORM {
        let label = ['x', 'y', 'z'][d
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != axis.index())
            .fold((0, 0.0), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best })
            .0];
        return Err(Error::UnsupportedAxis { model: kind.name(), axis: label });
    }
    Ok(along.signum())
}

/// The numerical constants `a`..`h` of the zero-field eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Psi0Constants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

pub fn psi0_constants() -> Psi0Constants {
    let m = SQRT3 - 1.0;
    let n = 1.0 + SQRT3;
    let lo = (2.0 + m * m).sqrt();
    let hi = (2.0 + n * n).sqrt();
    Psi0Constants {
        a: 1.0 / lo,
        b: (3.0 / (2.0 + m * m)).sqrt(),
        c: 1.0 / hi,
        d: (3.0 / (2.0 + n * n)).sqrt(),
        e: m / lo,
        f: 1.0 / lo,
        g: (3.0 / (2.0 + m * m)).sqrt(),
        h: n / hi,
    }
}

/// Zero-field trimer eigenvalues in label order.
pub fn trimer_lambda0() -> [f64; 8] {
    trimer_eigenvalues_z(0.0)
}

fn build_psi0() -> ComplexMatrix {
    let Psi0Constants { a, b, c, d, e, f, g, h } = psi0_constants();
    // Each row is one eigenvector written in the computational basis
    // |q1 q2 q3>, so the basis matrix is the transpose.
    let rows: [[f64; 8]; 8] = [
        [0.0, 0.0, 0.0, a, 0.0, a - b, a, 0.0],
        [0.0, 0.0, 0.0, c, 0.0, c + d, c, 0.0],
        [0.0, a, a - b, 0.0, a, 0.0, 0.0, 0.0],
        [0.0, c, c + d, 0.0, c, 0.0, 0.0, 0.0],
        [0.0, -a, 0.0, 0.0, a, 0.0, 0.0, e],
        [0.0, c, 0.0, 0.0, -c, 0.0, 0.0, h],
        [f - g, 0.0, 0.0, -f, 0.0, 0.0, f, 0.0],
        [c + d, 0.0, 0.0, -c, 0.0, 0.0, c, 0.0],
    ];
    let cols: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
    ComplexMatrix::from_columns(&cols)
}

/// Worst orthonormality and eigen-residual of a candidate zero-field basis.
pub fn basis_residuals(model: &SensorModel, basis: &ComplexMatrix, lambda0: &[f64]) -> (f64, f64) {
    let ortho = basis.unitarity_error();
    let lhs = model.bare_hamiltonian() * basis;
    let rhs = basis * &ComplexMatrix::from_real_diagonal(lambda0);
    (ortho, lhs.max_abs_diff(&rhs))
}

/// Zero-field trimer eigenbasis, columns in label order. Checked against the
/// bare Hamiltonian on first use.
pub fn psi0() -> &'static ComplexMatrix {
    static PSI0: OnceLock<ComplexMatrix> = OnceLock::new();
    PSI0.get_or_init(|| {
        let basis = build_psi0();
        let (ortho, resid) = basis_residuals(&SensorModel::trimer(), &basis, &trimer_lambda0());
        assert!(
            ortho < tolerances::ORTHONORMAL && resid < tolerances::PSI0_RESIDUAL,
            "zero-field trimer basis invalid: orthonormality {ortho:e}, residual {resid:e}"
        );
        basis
    })
}

/// Zero-field eigenbasis of any sensor in label order, adapted to the field
/// axis so that each column continues into the labelled branch.
pub fn reference_basis(kind: SensorKind) -> ComplexMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let real = |cols: &[&[f64]]| {
        ComplexMatrix::from_columns(
            &cols.iter().map(|c| c.iter().map(|&x| C64::new(x, 0.0)).collect()).collect::<Vec<_>>(),
        )
    };
    match kind {
        // λ1 = -b on |->, λ2 = b on |+>
        SensorKind::Standard => real(&[&[r, -r], &[r, r]]),
        // λ1 = -1 on |1>, λ2 = 1 on |0>
        SensorKind::LandauZener => real(&[&[0.0, 1.0], &[1.0, 0.0]]),
        SensorKind::Dimer => real(&[&[0.0, r, -r, 0.0], &[r, 0.0, 0.0, -r], &[0.0, r, r, 0.0], &[r, 0.0, 0.0, r]]),
        SensorKind::KitaevTrimer => psi0().clone(),
    }
}

/// `Ψ_ref (e_p + e_q)/√2`: equal superposition of the pair's zero-field
/// eigenvectors, in the computational basis.
pub fn pair_input_state(kind: SensorKind, pair: EigenPair) -> Result<Vec<C64>> {
    pair.check(kind)?;
    let basis = reference_basis(kind);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (basis.column(pair.p - 1), basis.column(pair.q - 1));
    Ok(a.iter().zip(&b).map(|(x, y)| (x + y) * r).collect())
}

/// Ordered pair of 1-based eigenvalue labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EigenPair {
    pub p: usize,
    pub q: usize,
}

impl EigenPair {
    pub const MOUSETRAP: EigenPair = EigenPair { p: 4, q: 6 };
    /// Third-moment sensor, oriented so its linear coefficient is `1 + 2/√3`.
    pub const SKEW: EigenPair = EigenPair { p: 8, q: 6 };

    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == q || p == 0 || q == 0 {
            return Err(Error::UnsupportedPair { p, q });
        }
        Ok(Self { p, q })
    }

    pub fn default_for(kind: SensorKind) -> Self {
        match kind {
            SensorKind::KitaevTrimer => Self::MOUSETRAP,
            SensorKind::Dimer => EigenPair { p: 4, q: 2 },
            _ => EigenPair { p: 1, q: 2 },
        }
    }

    pub fn check(&self, kind: SensorKind) -> Result<()> {
        if self.p == self.q || self.p == 0 || self.q == 0 || self.p > kind.dim() || self.q > kind.dim() {
            return Err(Error::UnsupportedPair { p: self.p, q: self.q });
        }
        Ok(())
    }

    pub fn reversed(self) -> Self {
        Self { p: self.q, q: self.p }
    }
}

impl fmt::Display for EigenPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.p, self.q)
    }
}

impl FromStr for EigenPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("pair must look like '4,6', got '{s}'"));
        let (a, b) = s.split_once([',', '/', ':']).ok_or_else(bad)?;
        let p = a.trim().parse().map_err(|_| bad())?;
        let q = b.trim().parse().map_err(|_| bad())?;
        Self::new(p, q)
    }
}

/// `(λ_p − λ_q)/2` at amplitude `b` along the analytic axis.
pub fn phase_rate(kind: SensorKind, pair: EigenPair, b: f64) -> f64 {
    if kind == SensorKind::KitaevTrimer && pair == EigenPair::MOUSETRAP {
        return 0.5 * (SQRT3 + 2.0 * b - (3.0 - 4.0 * b + 4.0 * b * b).sqrt());
    }
    let l = table_sensor_eigenvalues(kind, b);
    0.5 * (l[pair.p - 1] - l[pair.q - 1])
}

/// Accumulated phase over the waveform's window from the closed-form spectrum.
pub fn chi_exact(kind: SensorKind, pair: EigenPair, w: &Waveform) -> Result<f64> {
    chi_exact_between(kind, pair, w, w.window)
}

pub fn chi_exact_between(kind: SensorKind, pair: EigenPair, w: &Waveform, window: (f64, f64)) -> Result<f64> {
    pair.check(kind)?;
    let sign = analytic_sign(kind, w)?;
    w.integrate_with(window, |b| phase_rate(kind, pair, sign * b))
}

/// Cumulative phase `χ(t_i)` measured from `times[0]`.
pub fn chi_trajectory(kind: SensorKind, pair: EigenPair, w: &Waveform, times: &[f64]) -> Result<Vec<f64>> {
    pair.check(kind)?;
    let sign = analytic_sign(kind, w)?;
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            acc += w.integrate_with((times[i - 1], t), |b| phase_rate(kind, pair, sign * b))?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Power-series coefficients of `(λ_p − λ_q)/2` in `b`; entry `i` multiplies
/// `b^(i+1)`. Truncated after the last term the closed forms were expanded to.
pub fn series_coefficients(pair: EigenPair) -> Result<Vec<f64>> {
    let mousetrap = vec![1.0 + 1.0 / SQRT3, -2.0 / (3.0 * SQRT3)];
    let skew = vec![1.0 + 2.0 / SQRT3, 0.0, -8.0 / (9.0 * SQRT3)];
    let linear = vec![1.0];
    let negate = |v: Vec<f64>| v.into_iter().map(|x| -x).collect();
    match (pair.p, pair.q) {
        (4, 6) => Ok(mousetrap),
        (6, 4) => Ok(negate(mousetrap)),
        (8, 6) => Ok(skew),
        (6, 8) => Ok(negate(skew)),
        (4, 2) => Ok(linear),
        (2, 4) => Ok(negate(linear)),
        (p, q) => Err(Error::UnsupportedPair { p, q }),
    }
}

/// `Σ α_i ∫ b^i dτ` truncated at power `order` (trimer, field along ±z).
pub fn chi_series(pair: EigenPair, w: &Waveform, order: u32) -> Result<f64> {
    let coeffs = series_coefficients(pair)?;
    if order == 0 || order as usize > coeffs.len() {
        return Err(Error::InvalidArgument(format!(
            "series for pair {pair} is available to order 1..={}, got {order}",
            coeffs.len()
        )));
    }
    let sign = analytic_sign(SensorKind::KitaevTrimer, w)?;
    let mut total = 0.0;
    for (i, c) in coeffs.iter().take(order as usize).enumerate() {
        if *c != 0.0 {
            let power = i as u32 + 1;
            total += c * sign.powi(power as i32) * w.integrate_moment(power, w.window)?;
        }
    }
    Ok(total)
}

#[derive(Serialize)]
struct SeriesEntry {
    pair: [usize; 2],
    /// coefficient of b^1, b^2, ...
    coefficients: Vec<f64>,
}

/// Coefficient tables of all expanded pairs as pretty JSON.
pub fn series_table_json() -> Result<String> {
    let entries: Vec<SeriesEntry> = [EigenPair::MOUSETRAP, EigenPair::SKEW, EigenPair { p: 4, q: 2 }]
        .into_iter()
        .map(|pair| SeriesEntry { pair: [pair.p, pair.q], coefficients: series_coefficients(pair).unwrap() })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

/// Numeric sorted spectrum of `H₀ + b·H₁` along the analytic axis.
pub fn numeric_sorted_spectrum(model: &SensorModel, b: f64) -> Result<Vec<f64>> {
    let mut field = FieldVector::ZERO;
    match analytic_axis(model.kind()) {
        Axis::X => field.bx = b,
        Axis::Y => field.by = b,
        Axis::Z => field.bz = b,
    }
    Ok(hermitian_eig(&model.hamiltonian_at(field)?)?.eigenvalues)
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;
    use crate::signal::WaveformKind;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_at_zero_and_one() {
        let l0 = trimer_eigenvalues_z(0.0);
        assert_eq!(sorted(l0.to_vec()), [vec![-SQRT3; 4], vec![SQRT3; 4]].concat());
        let l1 = trimer_eigenvalues_z(1.0);
        let s11 = 11f64.sqrt();
        let want =
            [-1.0 - SQRT3, -1.0 + SQRT3, 1.0 - SQRT3, 1.0 + SQRT3, -1.0 - SQRT3, -1.0 + SQRT3, 1.0 - s11, 1.0 + s11];
        assert!(max_diff(&l1, &want) < 1e-15);
    }

    #[test]
    fn closed_form_matches_numeric() {
        let model = SensorModel::trimer();
        for b in [-2.0, -0.8, -0.1, 0.0, 0.3, 1.0, 1.7] {
            let num = numeric_sorted_spectrum(&model, b).unwrap();
            let ana = sorted(trimer_eigenvalues_z(b).to_vec());
            assert!(max_diff(&num, &ana) < 1e-10, "b={b}");
        }
    }

    #[test]
    fn discriminants_bounded_below() {
        for i in -400..=400 {
            let b = i as f64 * 0.01;
            let l = trimer_eigenvalues_z(b);
            assert!(l[5] - l[4] >= 2.0 * 2f64.sqrt() - 1e-12);
            assert!(l[7] - l[6] >= 2.0 * 2f64.sqrt() - 1e-12);
        }
    }

    #[test]
    fn table_sensors() {
        assert_eq!(table_sensor_eigenvalues(SensorKind::LandauZener, 0.0), vec![-1.0, 1.0]);
        let d = table_sensor_eigenvalues(SensorKind::Dimer, 1.0);
        assert!(max_diff(&d, &[-1.0, 1.0, -5f64.sqrt(), 5f64.sqrt()]) < 1e-15);
        assert_eq!(table_sensor_eigenvalues(SensorKind::Standard, 0.3), vec![-0.3, 0.3]);
        for kind in [SensorKind::Standard, SensorKind::LandauZener, SensorKind::Dimer] {
            let model = SensorModel::new(kind);
            for b in [-1.3, 0.0, 0.4, 2.0] {
                let num = numeric_sorted_spectrum(&model, b).unwrap();
                assert!(max_diff(&num, &sorted(table_sensor_eigenvalues(kind, b))) < 1e-10);
            }
        }
    }

    #[test]
    fn psi0_constants_values() {
        let k = psi0_constants();
        assert!((k.a - 0.627_963_030_2).abs() < 1e-9);
        assert!((k.c - 0.325_057_583_7).abs() < 1e-9);
        assert!((k.b - 1.087_663_873_6).abs() < 1e-9);
        assert!((k.h - 0.888_073_834_0).abs() < 1e-9);
        assert!((k.a - 1.0 / (2.0 + (SQRT3 - 1.0).powi(2)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn psi0_is_an_orthonormal_eigenbasis() {
        let basis = psi0();
        assert!(basis.unitarity_error() < 1e-12);
        let (_, resid) = basis_residuals(&SensorModel::trimer(), basis, &trimer_lambda0());
        assert!(resid < 1e-10);
    }

    /// Small-field eigenvectors continue each reference column into its label.
    #[test]
    fn reference_bases_are_field_adapted() {
        for kind in [SensorKind::Standard, SensorKind::LandauZener, SensorKind::Dimer, SensorKind::KitaevTrimer] {
            let model = SensorModel::new(kind);
            let basis = reference_basis(kind);
            let (ortho, resid) = basis_residuals(&model, &basis, &table_sensor_eigenvalues(kind, 0.0));
            assert!(ortho < 1e-12 && resid < 1e-10, "{kind}");
            for b in [1e-3, -1e-3] {
                let mut f = FieldVector::ZERO;
                match analytic_axis(kind) {
                    Axis::X => f.bx = b,
                    _ => f.bz = b,
                }
                let eig = hermitian_eig(&model.hamiltonian_at(f).unwrap()).unwrap();
                let labels = table_sensor_eigenvalues(kind, b);
                for (j, lam) in labels.iter().enumerate() {
                    let k = eig
                        .eigenvalues
                        .iter()
                        .position(|x| (x - lam).abs() < 1e-9)
                        .expect("label present in numeric spectrum");
                    // collect the whole numeric eigenspace of this eigenvalue
                    let weight: f64 = (0..eig.dim())
                        .filter(|&m| (eig.eigenvalues[m] - eig.eigenvalues[k]).abs() < 1e-9)
                        .map(|m| inner(&eig.eigenvectors.column(m), &basis.column(j)).norm_sqr())
                        .sum();
                    assert!(weight > 1.0 - 1e-5, "{kind} b={b} label {} weight {weight}", j + 1);
                }
            }
        }
    }

    #[test]
    fn chi_constant_field() {
        let z = [0.0, 0.0, 1.0];
        let w = Waveform::constant(1.0, z, (0.0, 7.0)).unwrap();
        let chi = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &w).unwrap();
        assert!((chi - 7.0).abs() < 1e-9);
        let zero = Waveform::constant(0.0, z, (0.0, 7.0)).unwrap();
        // labels 2, 4, 6 and 8 share the +√3 level
        for pair in [EigenPair { p: 4, q: 6 }, EigenPair { p: 2, q: 8 }, EigenPair { p: 1, q: 7 }] {
            assert_eq!(chi_exact(SensorKind::KitaevTrimer, pair, &zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn chi_linear_pair_is_first_moment() {
        let w = Waveform::fig2(1.0).along([0.0, 0.0, 1.0]).unwrap();
        let pair = EigenPair { p: 4, q: 2 };
        for window in [(-15.0, 15.0), (-15.0, -2.0), (-3.0, 8.0)] {
            let chi = chi_exact_between(SensorKind::KitaevTrimer, pair, &w, window).unwrap();
            let m1 = w.integrate_moment(1, window).unwrap();
            assert!((chi - m1).abs() < 1e-9, "{window:?}");
        }
    }

    #[test]
    fn chi_requires_analytic_axis() {
        let w = Waveform::fig2(1.0).along([1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &w),
            Err(Error::UnsupportedAxis { .. })
        ));
        assert!(chi_exact(SensorKind::LandauZener, EigenPair { p: 1, q: 2 }, &w).is_ok());
        let flipped = Waveform::fig2(1.0).along([0.0, 0.0, -1.0]).unwrap();
        let a = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &flipped).unwrap();
        let b = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &Waveform::fig2(-1.0)).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(chi_exact(SensorKind::KitaevTrimer, EigenPair { p: 4, q: 9 }, &w).is_err());
    }

    #[test]
    fn trajectory_ends_at_total() {
        let w = Waveform::fig2(1.2);
        let times: Vec<f64> = (0..=60).map(|i| -15.0 + 0.5 * i as f64).collect();
        let traj = chi_trajectory(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &w, &times).unwrap();
        let total = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &w).unwrap();
        assert_eq!(traj[0], 0.0);
        assert!((traj[60] - total).abs() < 1e-8);
    }

    /// Taylor coefficients from finite differences of the exact rate.
    #[test]
    fn series_coefficients_match_taylor_oracle() {
        let k = SensorKind::KitaevTrimer;
        for pair in [EigenPair::MOUSETRAP, EigenPair::SKEW, EigenPair { p: 6, q: 8 }, EigenPair { p: 4, q: 2 }] {
            let f = |b: f64| phase_rate(k, pair, b);
            let h = 1e-2;
            let d1 = (f(h) - f(-h)) / (2.0 * h) - (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (12.0 * h);
            let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h) / 2.0;
            let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h.powi(3)) / 6.0;
            let got = series_coefficients(pair).unwrap();
            let oracle = [d1, d2, d3];
            for (i, c) in got.iter().enumerate() {
                assert!((c - oracle[i]).abs() < 2e-3, "{pair} b^{}: {c} vs {}", i + 1, oracle[i]);
            }
            assert!(f(0.0).abs() < 1e-15);
        }
        let mt = series_coefficients(EigenPair::MOUSETRAP).unwrap();
        assert!((mt[0] - 1.577_350).abs() < 1e-6);
        assert!((mt[1] + 0.384_900).abs() < 1e-6);
        let sk = series_coefficients(EigenPair::SKEW).unwrap();
        assert!((sk[2] + 0.513_200).abs() < 1e-6);
        assert!(series_coefficients(EigenPair { p: 1, q: 3 }).is_err());
    }

    #[test]
    fn series_json_lists_pairs() {
        let json = series_table_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 3);
        assert_eq!(v[0]["pair"], serde_json::json!([4, 6]));
    }

    #[test]
    fn series_order_validation() {
        let w = Waveform::fig2(0.2);
        assert!(chi_series(EigenPair::MOUSETRAP, &w, 3).is_err());
        assert!(chi_series(EigenPair::MOUSETRAP, &w, 0).is_err());
        assert!(chi_series(EigenPair::SKEW, &w, 3).is_ok());
    }

    #[test]
    fn series_error_scales_cubically() {
        let pair = EigenPair::MOUSETRAP;
        let errs: Vec<(f64, f64)> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&eps| {
                let w = Waveform::new(WaveformKind::Constant { value: eps }, [0.0, 0.0, 1.0], (0.0, 10.0)).unwrap();
                let exact = chi_exact(SensorKind::KitaevTrimer, pair, &w).unwrap();
                (eps, (exact - chi_series(pair, &w, 2).unwrap()).abs())
            })
            .collect();
        for win in errs.windows(2) {
            let slope = (win[1].1 / win[0].1).ln() / (win[1].0 / win[0].0).ln();
            assert!((slope - 3.0).abs() < 0.2, "slope {slope}");
        }
    }

    #[test]
    fn pair_parsing() {
        assert_eq!("4,6".parse::<EigenPair>().unwrap(), EigenPair::MOUSETRAP);
        assert_eq!("8/6".parse::<EigenPair>().unwrap(), EigenPair::SKEW);
        assert!("4,4".parse::<EigenPair>().is_err());
        assert!("x".parse::<EigenPair>().is_err());
        assert!(EigenPair::new(5, 2).unwrap().check(SensorKind::Dimer).is_err());
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn closed_form_spectrum_matches_diagonalisation(b in -2.0f64..2.0) {
            let numeric = numeric_sorted_spectrum(&SensorModel::trimer(), b).unwrap();
            let analytic = sorted(trimer_eigenvalues_z(b).to_vec());
            for (x, y) in numeric.iter().zip(&analytic) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn comparison_spectra_match_diagonalisation(b in -2.0f64..2.0) {
            for kind in [SensorKind::Standard, SensorKind::LandauZener, SensorKind::Dimer] {
                let model = SensorModel::new(kind);
                let axis = analytic_axis(kind);
                let mut field = [0.0; 3];
                field[axis.index()] = b;
                let h = model.hamiltonian_at(crate::model::FieldVector::along(field, 1.0)).unwrap();
                let numeric = crate::linalg::hermitian_eig(&h).unwrap().eigenvalues;
                let analytic = sorted(table_sensor_eigenvalues(kind, b));
                for (x, y) in numeric.iter().zip(&analytic) {
                    prop_assert!((x - y).abs() < 1e-10, "{:?} at b = {}", kind, b);
                }
            }
        }

        #[test]
        fn reversing_a_pair_negates_its_rate(b in -2.0f64..2.0, p in 1usize..=8, q in 1usize..=8) {
            prop_assume!(p != q);
            let k = SensorKind::KitaevTrimer;
            let pair = EigenPair::new(p, q).unwrap();
            prop_assert!((phase_rate(k, pair, b) + phase_rate(k, pair.reversed(), b)).abs() < 1e-12);
        }
    }
}
