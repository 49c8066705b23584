//! Cross-module behaviour of the sensor: exact propagation against the
//! closed-form phase, symmetry of the directional response, the time-resolved
//! response and the comparison sensors.

use mousetrap::evolve::{evolve, numeric_survival, Drive, TimeGrid};
use mousetrap::model::{SensorKind, SensorModel};
use mousetrap::scan::{self, ScanKind, ScanSpec};
use mousetrap::sensing::{mousetrap_input_state, ramsey_probability};
use mousetrap::signal::Waveform;
use mousetrap::spectrum::{chi_exact, chi_series, chi_trajectory, pair_input_state, series_coefficients, EigenPair};

const STEPS: usize = 4096;

fn run(eps: f64) -> mousetrap::evolve::EvolutionResult {
    let w = Waveform::fig2(eps);
    let model = SensorModel::trimer();
    let grid = TimeGrid::over(&w, STEPS).unwrap();
    evolve(&model, &w, &grid, EigenPair::MOUSETRAP, &mousetrap_input_state(), STEPS).unwrap()
}

#[test]
fn exact_survival_follows_ramsey_fringe_where_adiabatic() {
    for eps in [0.1, 0.5] {
        let r = run(eps);
        let chi = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &Waveform::fig2(eps)).unwrap();
        let p = ramsey_probability(chi);
        assert!((r.survival_numeric() - p).abs() < 2e-3, "ε={eps}: {} vs {p}", r.survival_numeric());
    }
}

#[test]
fn fringe_error_at_unit_amplitude_is_within_non_adiabatic_leakage() {
    // The departure of the exact survival from cos²χ is an amplitude error,
    // bounded by √δ. At ε = 1 that is ~1.6e-2, larger than 2e-3.
    let r = run(1.0);
    let chi = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &Waveform::fig2(1.0)).unwrap();
    let gap = (r.survival_numeric() - ramsey_probability(chi)).abs();
    assert!(gap <= r.delta().sqrt(), "gap {gap} vs √δ {}", r.delta().sqrt());
    assert!(gap > 2e-3);
}

#[test]
fn adiabatic_prediction_tracks_exact_just_above_threshold() {
    let r = run(0.3);
    assert!((r.survival_adiabatic() - r.survival_numeric()).abs() < 1e-3);
    assert!(r.delta() < 1e-4);
}

#[test]
fn tracked_phase_equals_closed_form() {
    for eps in [0.4, 1.2] {
        let r = run(eps);
        let chi = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &Waveform::fig2(eps)).unwrap();
        assert!((r.phase() - chi).abs() < 1e-6, "ε={eps}: {} vs {chi}", r.phase());
    }
}

#[test]
fn even_sign_flips_of_a_generic_direction_are_exact_symmetries() {
    let model = SensorModel::trimer();
    let state = pair_input_state(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP).unwrap();
    let n = (0.3f64 * 0.3 + 0.5 * 0.5 + 0.81 * 0.81).sqrt();
    let d = [0.3 / n, 0.5 / n, 0.81 / n];
    let base = Waveform::fig2(1.0);
    let grid = TimeGrid::over(&base, 1024).unwrap();
    let p = |dir: [f64; 3]| {
        numeric_survival(&Drive::new(&model, &base.along(dir).unwrap()).unwrap(), &grid, &state).unwrap()
    };
    let reference = p(d);
    for flip in [[-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]] {
        let flipped = p([d[0] * flip[0], d[1] * flip[1], d[2] * flip[2]]);
        assert!((flipped - reference).abs() < 1e-12, "{flip:?}: {flipped} vs {reference}");
    }
}

#[test]
fn time_resolved_response_returns_to_one_below_threshold() {
    let spec = ScanSpec {
        eps_min: 0.2,
        eps_max: 0.2,
        eps_count: 1,
        time_samples: 128,
        ..ScanSpec::new(ScanKind::TimeResolved)
    };
    let r = scan::run(&spec).unwrap();
    let p1 = r.column("p_n1").unwrap();
    let numeric = r.column("p_numeric").unwrap();
    assert!((1.0 - p1.last().unwrap()).abs() < 0.02);
    assert!((1.0 - numeric.last().unwrap()).abs() < 0.02);
    // Mid-signal the first-moment part of the phase has not yet cancelled,
    // so the fringe swings well away from 1 before coming back.
    let dip = numeric.iter().copied().fold(1.0, f64::min);
    assert!(dip < 0.9, "dip {dip}");
    let closed_dip = p1.iter().copied().fold(1.0, f64::min);
    assert!((dip - closed_dip).abs() < 0.02);
}

#[test]
fn phase_trajectory_at_largest_amplitude_stays_in_the_inset_range() {
    let w = Waveform::fig2(1.49);
    let times: Vec<f64> = (0..=600).map(|i| -15.0 + 0.05 * i as f64).collect();
    let chi = chi_trajectory(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &w, &times).unwrap();
    let lo = chi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo > -6.0 && hi < 0.01, "χ range [{lo}, {hi}]");
}

#[test]
fn odd_part_of_the_phase_is_the_odd_series() {
    // χ[b] − χ[−b] keeps only odd powers of b: 2 c₁ ∫b + O(b³).
    let c1 = series_coefficients(EigenPair::MOUSETRAP).unwrap()[0];
    let pair = EigenPair::MOUSETRAP;
    let mut ratios = Vec::new();
    for b in [0.02, 0.04, 0.08] {
        let up = Waveform::constant(b, [0.0, 0.0, 1.0], (0.0, 10.0)).unwrap();
        let down = Waveform::constant(-b, [0.0, 0.0, 1.0], (0.0, 10.0)).unwrap();
        let odd = chi_exact(SensorKind::KitaevTrimer, pair, &up).unwrap()
            - chi_exact(SensorKind::KitaevTrimer, pair, &down).unwrap();
        let residual = odd - 2.0 * c1 * b * 10.0;
        ratios.push(residual / b.powi(3));
    }
    assert!(ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 0.05), "{ratios:?}");
}

#[test]
fn series_tracks_exact_phase_below_threshold() {
    for eps in [0.05, 0.1, 0.2] {
        let w = Waveform::fig2(eps);
        let exact = chi_exact(SensorKind::KitaevTrimer, EigenPair::MOUSETRAP, &w).unwrap();
        let series = chi_series(EigenPair::MOUSETRAP, &w, 2).unwrap();
        assert!((exact - series).abs() < 1e-3 * eps.max(0.1), "ε={eps}: {exact} vs {series}");
    }
}

#[test]
fn linear_sensor_is_blind_to_a_zero_mean_pulse() {
    // A linear sensor reads ∫b, which vanishes for the odd pulse; the trimer
    // reads the second moment once above threshold.
    let standard = SensorModel::new(SensorKind::Standard);
    let w = Waveform::fig2(1.2).along([1.0, 0.0, 0.0]).unwrap();
    let grid = TimeGrid::over(&w, 2048).unwrap();
    let state = pair_input_state(SensorKind::Standard, EigenPair::default_for(SensorKind::Standard)).unwrap();
    let p_standard = numeric_survival(&Drive::new(&standard, &w).unwrap(), &grid, &state).unwrap();
    assert!((1.0 - p_standard).abs() < 1e-9, "{p_standard}");
    assert!(run(1.2).survival_numeric() < 0.9);
}

#[test]
fn comparison_sensors_follow_their_closed_form_phase() {
    for kind in [SensorKind::LandauZener, SensorKind::Dimer] {
        let model = SensorModel::new(kind);
        let pair = EigenPair::default_for(kind);
        let w = Waveform::fig2(0.3).along([1.0, 0.0, 0.0]).unwrap();
        let grid = TimeGrid::over(&w, 2048).unwrap();
        let state = pair_input_state(kind, pair).unwrap();
        let r = evolve(&model, &w, &grid, pair, &state, 2048).unwrap();
        let chi = chi_exact(kind, pair, &w).unwrap();
        assert!((r.phase() - chi).abs() < 1e-6, "{kind:?}");
        assert!((r.survival_adiabatic() - ramsey_probability(chi)).abs() < 1e-9, "{kind:?}");
        assert!((r.survival_numeric() - r.survival_adiabatic()).abs() < 1e-2, "{kind:?}");
    }
}

#[test]
fn octant_pole_reproduces_the_amplitude_sweep() {
    let common = ScanSpec {
        eps_min: 0.3,
        eps_max: 1.2,
        eps_count: 4,
        steps: Some(1024),
        ..ScanSpec::new(ScanKind::AmplitudeSweep)
    };
    let sweep = scan::run(&common).unwrap();
    let octant =
        scan::run(&ScanSpec { kind: ScanKind::DirectionalOctant, theta_count: 2, phi_count: 2, ..common.clone() })
            .unwrap();
    let theta = octant.column("theta").unwrap();
    let pole: Vec<f64> = octant
        .column("p_numeric")
        .unwrap()
        .into_iter()
        .zip(&theta)
        .filter(|(_, t)| **t == 0.0)
        .map(|(p, _)| p)
        .collect();
    let along_z = sweep.column("p_numeric").unwrap();
    let closed = sweep.column("p_n1").unwrap();
    assert_eq!(pole.len(), 4 * 2);
    for (i, p) in pole.iter().enumerate() {
        assert!((p - along_z[i / 2]).abs() < 1e-6, "row {i}");
        // The exact survival sits within the non-adiabatic error of cos²χ.
        assert!((p - closed[i / 2]).abs() < 0.02, "row {i}");
    }
}
