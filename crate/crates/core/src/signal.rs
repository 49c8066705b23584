//! Classical drive waveforms `b(t)`, their derivatives and moment integrals.
//!
//! The canonical drive is the Gaussian-enveloped sinusoid
//! `b(t) = ε exp(-t²/s) sin(2πkt)` on the window `[-15, 15]` with `s = 20`,
//! `k = 0.05` (preset `"fig2"`). Its envelope at the window edges is
//! `exp(-11.25) ≈ 1.3e-5`, which is treated as "field off" rather than
//! forcing the window to be wider.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

pub const FIG2_S: f64 = 20.0;
pub const FIG2_K: f64 = 0.05;
pub const FIG2_T0: f64 = -15.0;
pub const FIG2_T1: f64 = 15.0;

pub const PRESETS: &[&str] = &["fig2"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WaveformKind {
    /// `ε exp(-t²/s) sin(2πkt)`
    GaussianSine {
        epsilon: f64,
        s: f64,
        k: f64,
    },
    Constant {
        value: f64,
    },
    /// `amplitude · sin(angular_frequency · t)`
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
    },
    /// Linear interpolation through `(times[i], values[i])`.
    Samples {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// `inner(t / alpha) / alpha`: a physical-unit drive expressed in
    /// dimensionless time.
    Rescaled {
        inner: Box<WaveformKind>,
        alpha: f64,
    },
}

impl WaveformKind {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWaveform(msg));
        match self {
            WaveformKind::GaussianSine { epsilon, s, k } => {
                if !(epsilon.is_finite() && s.is_finite() && k.is_finite()) {
                    return bad("gaussian-sine parameters must be finite".into());
                }
                if *s <= 0.0 {
                    return bad(format!("envelope width s must be positive, got {s}"));
                }
            }
            WaveformKind::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant value must be finite".into());
                }
            }
            WaveformKind::Sinusoid { amplitude, angular_frequency } => {
                if !(amplitude.is_finite() && angular_frequency.is_finite()) {
                    return bad("sinusoid parameters must be finite".into());
                }
            }
            WaveformKind::Samples { times, values } => {
                if times.len() != values.len() {
                    return bad(format!("{} times but {} values", times.len(), values.len()));
                }
                if times.len() < 2 {
                    return bad("need at least two samples".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("sample times must be strictly increasing".into());
                }
                if times.iter().chain(values).any(|x| !x.is_finite()) {
                    return bad("samples must be finite".into());
                }
            }
            WaveformKind::Rescaled { inner, alpha } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return bad(format!("alpha must be positive, got {alpha}"));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    fn value(&self, t: f64) -> Result<f64> {
        Ok(match self {
            WaveformKind::GaussianSine { epsilon, s, k } => epsilon * (-t * t / s).exp() * (2.0 * PI * k * t).sin(),
            WaveformKind::Constant { value } => *value,
            WaveformKind::Sinusoid { amplitude, angular_frequency } => amplitude * (angular_frequency * t).sin(),
            WaveformKind::Samples { times, values } => interpolate(times, values, t)?,
            WaveformKind::Rescaled { inner, alpha } => inner.value(t / alpha)? / alpha,
        })
    }

    fn derivative(&self, t: f64, order: u32) -> Result<f64> {
        Ok(match self {
            WaveformKind::GaussianSine { epsilon, s, k } => {
                let w = 2.0 * PI * k;
                let g = epsilon * (-t * t / s).exp();
                let (sn, cs) = (w * t).sin_cos();
                let u = 2.0 * t / s;
                match order {
                    1 => g * (w * cs - u * sn),
                    _ => g * (sn * (u * u - w * w - 2.0 / s) - 2.0 * u * w * cs),
                }
            }
            WaveformKind::Constant { .. } => 0.0,
            WaveformKind::Sinusoid { amplitude, angular_frequency: w } => match order {
                1 => amplitude * w * (w * t).cos(),
                _ => -amplitude * w * w * (w * t).sin(),
            },
            WaveformKind::Samples { times, values } => sampled_derivative(times, values, t, order)?,
            WaveformKind::Rescaled { inner, alpha } => {
                inner.derivative(t / alpha, order)? / alpha.powi(order as i32 + 1)
            }
        })
    }

    fn scaled(&self, factor: f64) -> WaveformKind {
        match self {
            WaveformKind::GaussianSine { epsilon, s, k } => {
                WaveformKind::GaussianSine { epsilon: epsilon * factor, s: *s, k: *k }
            }
            WaveformKind::Constant { value } => WaveformKind::Constant { value: value * factor },
            WaveformKind::Sinusoid { amplitude, angular_frequency } => {
                WaveformKind::Sinusoid { amplitude: amplitude * factor, angular_frequency: *angular_frequency }
            }
            WaveformKind::Samples { times, values } => {
                WaveformKind::Samples { times: times.clone(), values: values.iter().map(|v| v * factor).collect() }
            }
            WaveformKind::Rescaled { inner, alpha } => {
                WaveformKind::Rescaled { inner: Box::new(inner.scaled(factor)), alpha: *alpha }
            }
        }
    }

    /// Sample knots (in this waveform's time) strictly inside `(a, b)`.
    fn knots(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            WaveformKind::Samples { times, .. } => times.iter().copied().filter(|&t| t > a && t < b).collect(),
            WaveformKind::Rescaled { inner, alpha } => {
                inner.knots(a / alpha, b / alpha).into_iter().map(|t| t * alpha).collect()
            }
            _ => Vec::new(),
        }
    }

    /// First and last sample time of a sampled waveform.
    pub fn sample_range(&self) -> Option<(f64, f64)> {
        match self {
            WaveformKind::Samples { times, .. } => Some((times[0], times[times.len() - 1])),
            WaveformKind::Rescaled { inner, alpha } => inner.sample_range().map(|(a, b)| (a * alpha, b * alpha)),
            _ => None,
        }
    }
}

fn locate(times: &[f64], t: f64) -> Result<usize> {
    let (start, end) = (times[0], times[times.len() - 1]);
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange { t, start, end });
    }
    // index of the left end of the bracketing segment
    let idx = times.partition_point(|&x| x <= t);
    Ok(idx.saturating_sub(1).min(times.len() - 2))
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    let i = locate(times, t)?;
    let (t0, t1) = (times[i], times[i + 1]);
    let w = (t - t0) / (t1 - t0);
    Ok(values[i] * (1.0 - w) + values[i + 1] * w)
}

/// Central differences with the local grid spacing, one-sided at the ends.
fn sampled_derivative(times: &[f64], values: &[f64], t: f64, order: u32) -> Result<f64> {
    let i = locate(times, t)?;
    // half the local spacing keeps the stencil inside one segment at midpoints
    let h = 0.5 * (times[i + 1] - times[i]);
    let (start, end) = (times[0], times[times.len() - 1]);
    let f = |x: f64| interpolate(times, values, x.clamp(start, end));
    let lo = (t - h).max(start);
    let hi = (t + h).min(end);
    match order {
        1 => Ok((f(hi)? - f(lo)?) / (hi - lo)),
        _ => {
            // shift the stencil inward when it would leave the sampled range
            let centre = t.clamp(start + h, end - h);
            if end - start < 2.0 * h {
                return Ok(0.0);
            }
            Ok((f(centre + h)? - 2.0 * f(centre)? + f(centre - h)?) / (h * h))
        }
    }
}

/// A scalar envelope applied along a fixed unit direction over a time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub kind: WaveformKind,
    pub direction: [f64; 3],
    pub window: (f64, f64),
}

impl Waveform {
    pub fn new(kind: WaveformKind, direction: [f64; 3], window: (f64, f64)) -> Result<Self> {
        kind.validate()?;
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((n - 1.0).abs() <= tolerances::DIRECTION_NORM) {
            return Err(Error::InvalidWaveform(format!("direction must have unit norm, got |d| = {n}")));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(Error::InvalidWaveform(format!(
                "window must satisfy t0 < t1, got [{}, {}]",
                window.0, window.1
            )));
        }
        Ok(Self { kind, direction, window })
    }

    /// Normalise a direction and build the waveform.
    pub fn with_direction(kind: WaveformKind, direction: [f64; 3], window: (f64, f64)) -> Result<Self> {
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidWaveform("direction must be non-zero".into()));
        }
        Self::new(kind, [direction[0] / n, direction[1] / n, direction[2] / n], window)
    }

    /// The `"fig2"` preset along `z`.
    pub fn fig2(epsilon: f64) -> Self {
        Self::new(WaveformKind::GaussianSine { epsilon, s: FIG2_S, k: FIG2_K }, [0.0, 0.0, 1.0], (FIG2_T0, FIG2_T1))
            .expect("fig2 preset is valid")
    }

    pub fn preset(name: &str, epsilon: f64) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "fig2" | "fig3" | "fig4" | "fig5" => {
                let w = Self::fig2(epsilon);
                w.kind.validate()?;
                Ok(w)
            }
            other => Err(Error::InvalidWaveform(format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn constant(value: f64, direction: [f64; 3], window: (f64, f64)) -> Result<Self> {
        Self::new(WaveformKind::Constant { value }, direction, window)
    }

    pub fn along(&self, direction: [f64; 3]) -> Result<Self> {
        Self::with_direction(self.kind.clone(), direction, self.window)
    }

    /// Amplitude scaled by `factor` (`ε · w`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { kind: self.kind.scaled(factor), direction: self.direction, window: self.window }
    }

    pub fn duration(&self) -> f64 {
        self.window.1 - self.window.0
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.kind.value(t)
    }

    /// First or second time derivative.
    pub fn derivative(&self, t: f64, order: u32) -> Result<f64> {
        if order != 1 && order != 2 {
            return Err(Error::InvalidOrder(order));
        }
        self.kind.derivative(t, order)
    }

    /// `∫ b(τ)^power dτ` over `window`.
    pub fn integrate_moment(&self, power: u32, window: (f64, f64)) -> Result<f64> {
        if power == 0 {
            return Err(Error::InvalidArgument("moment power must be >= 1".into()));
        }
        self.integrate_with(window, |b| b.powi(power as i32))
    }

    /// `∫ g(b(τ)) dτ` over `window`, split at sample knots.
    pub fn integrate_with<G: Fn(f64) -> f64>(&self, window: (f64, f64), g: G) -> Result<f64> {
        let (a, b) = window;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument("integration window must be finite".into()));
        }
        if a == b {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        if let Some((start, end)) = self.kind.sample_range() {
            for t in [lo, hi] {
                if t < start || t > end {
                    return Err(Error::OutOfRange { t, start, end });
                }
            }
        }
        let mut cuts = vec![lo];
        cuts.extend(self.kind.knots(lo, hi));
        cuts.push(hi);
        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let share = tolerances::QUADRATURE_ABS * (seg[1] - seg[0]) / (hi - lo);
            total += simpson(
                |t| g(self.kind.value(t).expect("window checked against sample range")),
                seg[0],
                seg[1],
                share,
            )?;
        }
        Ok(sign * total)
    }
}

/// Composite Simpson with panel doubling and a Richardson correction.
///
/// Stops when two successive estimates agree to `15 · tol`, which bounds the
/// error of the extrapolated value by roughly `tol` for smooth integrands.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MIN_PANELS: usize = 64;
    let mut n = MIN_PANELS;
    let mut h = (b - a) / n as f64;
    let ends = f(a) + f(b);
    let mut even = 0.0;
    let mut odd = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 0 {
            even += v;
        } else {
            odd += v;
        }
    }
    let mut prev = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
    loop {
        n *= 2;
        h *= 0.5;
        even += odd;
        odd = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let cur = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let diff = cur - prev;
        if diff.abs() <= 15.0 * tol {
            return Ok(cur + diff / 15.0);
        }
        if n >= tolerances::QUADRATURE_MAX_PANELS {
            return Err(Error::QuadratureNotConverged { target: tol, panels: n, estimate: diff.abs() / 15.0 });
        }
        prev = cur;
    }
}

/// Physical-unit description `H = α H₀ + β(t) H₁`.
#[derive(Clone, Debug)]
pub struct PhysicalUnits {
    pub alpha: f64,
    /// `β(t)` in physical time, with its window in physical time.
    pub beta: Waveform,
}

/// Rescale to `b(t') = β(t'/α)/α` with `t' = α t`.
pub fn nondimensionalize(p: &PhysicalUnits) -> Result<Waveform> {
    if !(p.alpha > 0.0) || !p.alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", p.alpha)));
    }
    Waveform::new(
        WaveformKind::Rescaled { inner: Box::new(p.beta.kind.clone()), alpha: p.alpha },
        p.beta.direction,
        (p.beta.window.0 * p.alpha, p.beta.window.1 * p.alpha),
    )
}

/// Read a two-column `(time, value)` CSV. `#` lines and a non-numeric header
/// row are skipped.
pub fn read_samples<R: Read>(reader: R) -> Result<WaveformKind> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::InvalidWaveform(format!("row {} has fewer than two columns", row + 1)));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(t), Ok(v)) => {
                times.push(t);
                values.push(v);
            }
            _ if row == 0 => continue,
            _ => {
                return Err(Error::InvalidWaveform(format!(
                    "row {}: could not parse '{}', '{}'",
                    row + 1,
                    &record[0],
                    &record[1]
                )))
            }
        }
    }
    let kind = WaveformKind::Samples { times, values };
    kind.validate()?;
    Ok(kind)
}

pub fn read_samples_file(path: &Path) -> Result<WaveformKind> {
    read_samples(std::fs::File::open(path)?)
}
