//! Subcommand bodies: resolve the merged configuration into library inputs,
//! run, and write tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use mousetrap::evolve::{evolve as run_evolution, numeric_trajectory, refine_with, Drive, GapMode, TimeGrid};
use mousetrap::model::{parse_direction, SensorKind, SensorModel};
use mousetrap::scan::{self, ScanKind, ScanResult, ScanSpec};
use mousetrap::signal::{read_samples_file, Waveform, WaveformKind};
use mousetrap::spectrum::{analytic_sign, pair_input_state, table_sensor_eigenvalues, trimer_eigenvalues_z, EigenPair};
use mousetrap::tolerances;

use crate::config::RunConfig;
use crate::Failure;

const DEFAULT_INITIAL_STEPS: usize = 1024;
const DEFAULT_CHECKPOINT_EVERY: usize = 8;
const DEFAULT_SCAN_DIR: &str = "out";

fn field(path: &str) -> impl Fn(mousetrap::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{path}: {e}"))
}

fn model_kind(cfg: &RunConfig) -> Result<SensorKind, Failure> {
    match &cfg.model.model {
        Some(name) => name.parse().map_err(field("model.model")),
        None => Ok(SensorKind::KitaevTrimer),
    }
}

fn pair_for(cfg: &RunConfig, kind: SensorKind) -> Result<EigenPair, Failure> {
    let pair = match &cfg.model.pair {
        Some(text) => text.parse().map_err(field("model.pair"))?,
        None => EigenPair::default_for(kind),
    };
    pair.check(kind).map_err(field("model.pair"))?;
    Ok(pair)
}

fn missing(name: &str, why: &str) -> Failure {
    Failure::Usage(format!("missing waveform field 'waveform.{name}' ({why})"))
}

/// The single waveform of `evolve`: a sample file, a preset with optional
/// inline overrides, or a fully inline Gaussian-sine pulse.
fn waveform(cfg: &RunConfig) -> Result<Waveform, Failure> {
    let w = &cfg.waveform;
    let direction = match &w.direction {
        Some(text) => parse_direction(text).map_err(field("waveform.direction"))?,
        None => [0.0, 0.0, 1.0],
    };
    if let Some(path) = &w.samples {
        if w.preset.is_some() || w.s.is_some() || w.k.is_some() {
            return Err(Failure::Usage(
                "waveform.samples cannot be combined with waveform.preset, waveform.s or waveform.k".into(),
            ));
        }
        let kind = read_samples_file(path).map_err(|e| match Failure::from(e) {
            Failure::Usage(m) => Failure::Usage(format!("waveform.samples: {m}")),
            other => other,
        })?;
        let (lo, hi) = kind.sample_range().expect("sampled waveform has a range");
        let window = (w.t0.unwrap_or(lo), w.t1.unwrap_or(hi));
        let base = Waveform::with_direction(kind, direction, window).map_err(field("waveform"))?;
        return Ok(match w.epsilon {
            Some(eps) => base.scaled(eps),
            None => base,
        });
    }
    let epsilon = w.epsilon.ok_or_else(|| missing("epsilon", "the signal amplitude is required"))?;
    let (s, k, t0, t1) = match &w.preset {
        Some(name) => {
            let preset = Waveform::preset(name, epsilon).map_err(field("waveform.preset"))?;
            let WaveformKind::GaussianSine { s, k, .. } = preset.kind else {
                unreachable!("presets are Gaussian-sine pulses")
            };
            (w.s.unwrap_or(s), w.k.unwrap_or(k), w.t0.unwrap_or(preset.window.0), w.t1.unwrap_or(preset.window.1))
        }
        None if w.s.is_none() && w.k.is_none() && w.t0.is_none() && w.t1.is_none() => {
            let preset = Waveform::fig2(epsilon);
            let WaveformKind::GaussianSine { s, k, .. } = preset.kind else { unreachable!() };
            (s, k, preset.window.0, preset.window.1)
        }
        None => {
            let why = "an inline waveform needs epsilon, s, k, t0 and t1";
            (
                w.s.ok_or_else(|| missing("s", why))?,
                w.k.ok_or_else(|| missing("k", why))?,
                w.t0.ok_or_else(|| missing("t0", why))?,
                w.t1.ok_or_else(|| missing("t1", why))?,
            )
        }
    };
    Waveform::with_direction(WaveformKind::GaussianSine { epsilon, s, k }, direction, (t0, t1))
        .map_err(field("waveform"))
}

/// Write `table` as CSV to `out` (with a JSON mirror next to it) or to stdout.
fn emit(table: &ScanResult, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            std::fs::write(path, buf)?;
            std::fs::write(path.with_extension("json"), table.to_json()?)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn version_meta() -> (String, String) {
    ("version".into(), env!("CARGO_PKG_VERSION").into())
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), Failure> {
    let kind = model_kind(cfg)?;
    let bs = cfg.spectrum.b.clone().unwrap_or_default();
    if bs.is_empty() {
        return Err(Failure::Usage("spectrum needs at least one field value (--b)".into()));
    }
    if let Some(b) = bs.iter().find(|b| !b.is_finite()) {
        return Err(Failure::Usage(format!("spectrum.b: field value {b} is not finite")));
    }
    let mut columns = vec!["b".to_string()];
    columns.extend((1..=kind.dim()).map(|i| format!("lambda_{i}")));
    let rows = bs
        .iter()
        .map(|&b| {
            let levels = match kind {
                SensorKind::KitaevTrimer => trimer_eigenvalues_z(b).to_vec(),
                other => table_sensor_eigenvalues(other, b),
            };
            std::iter::once(b).chain(levels).collect()
        })
        .collect();
    let metadata = vec![("command".into(), "spectrum".into()), ("model".into(), kind.name().into()), version_meta()];
    emit(&ScanResult { metadata, columns, rows }, cfg.output.out.as_deref())
}

pub fn evolve(cfg: &RunConfig) -> Result<(), Failure> {
    let kind = model_kind(cfg)?;
    let pair = pair_for(cfg, kind)?;
    let model = SensorModel::new(kind);
    let w = waveform(cfg)?;
    let state = pair_input_state(kind, pair)?;
    let drive = Drive::new(&model, &w).map_err(field("waveform.direction"))?;

    let mut metadata = vec![
        ("command".to_string(), "evolve".to_string()),
        ("model".into(), kind.name().into()),
        ("pair".into(), pair.to_string()),
        ("waveform".into(), serde_json::to_string(&w.kind).expect("waveform serialises")),
        ("direction".into(), format!("{},{},{}", w.direction[0], w.direction[1], w.direction[2])),
        ("window".into(), format!("{},{}", w.window.0, w.window.1)),
    ];
    let grid = match cfg.grid.steps {
        Some(0) => return Err(Failure::Usage("grid.steps must be positive".into())),
        Some(n) => TimeGrid::over(&w, n)?,
        None => {
            let initial = cfg.grid.initial_steps.unwrap_or(DEFAULT_INITIAL_STEPS);
            let tol = cfg.grid.refine_tolerance.unwrap_or(tolerances::REFINEMENT);
            let r = refine_with(&drive, &state, initial, tol)?;
            let hist: Vec<String> =
                r.history.iter().map(|(n, p)| format!("{n}:{}", mousetrap::evolve::fmt_num(*p))).collect();
            metadata.push(("refinement".into(), hist.join(";")));
            r.grid
        }
    };
    metadata.push(("steps".into(), grid.steps.to_string()));
    let every = cfg.grid.checkpoint_every.unwrap_or(DEFAULT_CHECKPOINT_EVERY);
    if every == 0 {
        return Err(Failure::Usage("grid.checkpoint-every must be positive".into()));
    }
    metadata.push(("checkpoint_every".into(), every.to_string()));
    metadata.push(version_meta());

    let table = if analytic_sign(kind, &w).is_ok() {
        let result = run_evolution(&model, &w, &grid, pair, &state, every)?;
        let c = result.last();
        eprintln!(
            "final: survival_numeric={} survival_adiabatic={} delta={} phase={} steps={}",
            mousetrap::evolve::fmt_num(c.survival_numeric),
            mousetrap::evolve::fmt_num(c.survival_adiabatic),
            mousetrap::evolve::fmt_num(c.delta),
            mousetrap::evolve::fmt_num(c.phase),
            grid.steps
        );
        ScanResult {
            metadata,
            columns: ["t", "survival_numeric", "survival_adiabatic", "delta", "phase"].map(String::from).to_vec(),
            rows: result
                .checkpoints
                .iter()
                .map(|c| vec![c.t, c.survival_numeric, c.survival_adiabatic, c.delta, c.phase])
                .collect(),
        }
    } else {
        // Off the model's analytic axis there are no closed-form labels, so
        // only the exact propagation is reported.
        let traj = numeric_trajectory(&drive, &grid, &state, every)?;
        let last = traj.last().expect("trajectory has a start point").1;
        eprintln!("final: survival_numeric={} steps={}", mousetrap::evolve::fmt_num(last), grid.steps);
        ScanResult {
            metadata,
            columns: vec!["t".into(), "survival_numeric".into()],
            rows: traj.into_iter().map(|(t, p)| vec![t, p]).collect(),
        }
    };
    emit(&table, cfg.output.out.as_deref())
}

pub fn sweep_kind(cfg: &RunConfig) -> Result<ScanKind, Failure> {
    match cfg.scan.sweep.as_deref().map(|s| s.trim().to_ascii_lowercase()) {
        None => Ok(ScanKind::AmplitudeSweep),
        Some(s) if s == "amplitude" => Ok(ScanKind::AmplitudeSweep),
        Some(s) if s == "time" => Ok(ScanKind::TimeResolved),
        Some(other) => Err(Failure::Usage(format!("scan.sweep: expected 'amplitude' or 'time', got '{other}'"))),
    }
}

fn gap_mode(text: &str) -> Result<GapMode, Failure> {
    match text.trim().to_ascii_lowercase().as_str() {
        "min" => Ok(GapMode::Min),
        "pointwise" => Ok(GapMode::Pointwise),
        other => Err(Failure::Usage(format!("scan.gap-policy: expected 'min' or 'pointwise', got '{other}'"))),
    }
}

/// Scan parameters: the figure's (or the scan kind's) defaults with the
/// configured fields laid over them.
pub fn scan_spec(cfg: &RunConfig, kind: ScanKind, figure: Option<&str>) -> Result<ScanSpec, Failure> {
    let mut spec = match figure {
        Some(name) => ScanSpec::figure(name)?,
        None => ScanSpec::new(kind),
    };
    let w = &cfg.waveform;
    let inline = [
        ("epsilon", w.epsilon.is_some()),
        ("s", w.s.is_some()),
        ("k", w.k.is_some()),
        ("t0", w.t0.is_some()),
        ("t1", w.t1.is_some()),
        ("direction", w.direction.is_some()),
        ("samples", w.samples.is_some()),
    ];
    if let Some((name, _)) = inline.iter().find(|(_, set)| *set) {
        return Err(Failure::Usage(format!(
            "waveform.{name} applies to evolve only; scans take the pulse from waveform.preset and sweep its amplitude"
        )));
    }
    if cfg.model.model.is_some() {
        spec.model = model_kind(cfg)?;
        spec.pair = EigenPair::default_for(spec.model);
    }
    if cfg.model.pair.is_some() {
        spec.pair = pair_for(cfg, spec.model)?;
    }
    if let Some(p) = &w.preset {
        spec.preset = p.clone();
    }
    let g = &cfg.grid;
    if g.steps.is_some() {
        spec.steps = g.steps;
    }
    if let Some(n) = g.initial_steps {
        spec.initial_steps = n;
    }
    if let Some(t) = g.refine_tolerance {
        spec.refine_tolerance = t;
    }
    let s = &cfg.scan;
    if let Some(x) = s.eps_min {
        spec.eps_min = x;
    }
    if let Some(x) = s.eps_max {
        spec.eps_max = x;
    }
    if let Some(x) = s.eps_count {
        spec.eps_count = x;
    }
    if let Some(x) = s.n {
        spec.n = x;
    }
    if let Some(x) = s.theta_count {
        spec.theta_count = x;
    }
    if let Some(x) = s.phi_count {
        spec.phi_count = x;
    }
    if let Some(x) = s.time_samples {
        spec.time_samples = x;
    }
    if let Some(text) = &s.gap_policy {
        spec.gap_policy.mode = gap_mode(text)?;
    }
    if s.gap_fixed.is_some() {
        spec.gap_policy.fixed = s.gap_fixed;
    }
    if let Some(x) = s.gap_threshold {
        spec.gap_policy.threshold = x;
    }
    if let Some(x) = s.gap_floor {
        spec.gap_policy.floor = x;
    }
    spec.validate()?;
    Ok(spec)
}

fn stem_for(kind: ScanKind) -> &'static str {
    match kind {
        ScanKind::AmplitudeSweep => "sweep",
        ScanKind::TimeResolved => "time_resolved",
        ScanKind::DirectionalOctant => "direction",
        ScanKind::AdiabaticError => "error",
    }
}

fn fold(values: &[f64], init: f64, f: fn(f64, f64) -> f64) -> f64 {
    values.iter().copied().fold(init, f)
}

/// One-line digest of a scan: size, grid and the key checkpoints.
pub fn summary(stem: &str, r: &ScanResult) -> String {
    let fmt = mousetrap::evolve::fmt_num;
    let mut parts = vec![format!("{stem}: rows={}", r.rows.len())];
    if let Some(steps) = r.meta("steps") {
        parts.push(format!("steps={steps}"));
    }
    let time_axis = r.column("t").is_some();
    if let (Some(eps), Some(p1), false) = (r.column("epsilon"), r.column("p_n1"), time_axis) {
        let dev: Vec<f64> =
            eps.iter().zip(&p1).filter(|(e, _)| e.abs() <= 0.25).map(|(_, p)| (1.0 - p).abs()).collect();
        if !dev.is_empty() {
            parts.push(format!("plateau_max_dev(eps<=0.25)={}", fmt(fold(&dev, 0.0, f64::max))));
        }
    }
    if let (true, Some(chi)) = (time_axis, r.column("chi")) {
        parts.push(format!(
            "chi_range=[{},{}]",
            fmt(fold(&chi, f64::INFINITY, f64::min)),
            fmt(fold(&chi, f64::NEG_INFINITY, f64::max))
        ));
    }
    if let (Some(_), Some(p)) = (r.column("theta"), r.column("p_numeric")) {
        parts.push(format!("min_p_numeric={}", fmt(fold(&p, f64::INFINITY, f64::min))));
    }
    if let Some(d) = r.column("delta") {
        parts.push(format!("max_delta={}", fmt(fold(&d, 0.0, f64::max))));
    }
    if let Some(b) = r.column("delta_sq_bound") {
        parts.push(format!("min_delta_sq_bound={}", fmt(fold(&b, f64::INFINITY, f64::min))));
    }
    parts.join(" ")
}

fn save(r: &ScanResult, cfg: &RunConfig, stem: &str) -> Result<(), Failure> {
    let dir: PathBuf = cfg.output.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_SCAN_DIR));
    let (csv, _) = r.save(&dir, stem)?;
    println!("{} -> {}", summary(stem, r), csv.display());
    Ok(())
}

pub fn scan(cfg: &RunConfig, kind: ScanKind, figure: Option<&str>) -> Result<(), Failure> {
    let spec = scan_spec(cfg, kind, figure)?;
    let result = scan::run(&spec)?;
    save(&result, cfg, figure.unwrap_or(stem_for(spec.kind)))
}

pub fn reproduce(cfg: &RunConfig, figure: &str) -> Result<(), Failure> {
    let spec = ScanSpec::figure(figure)?;
    scan(cfg, spec.kind, Some(figure))
}
