//! Run configuration: command-line flags layered over an optional TOML file.
//!
//! Each flag `--foo-bar` has exactly one config key `foo-bar` in the section
//! named by the struct it lives in, so the two sources merge field by field
//! with the command line winning.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::Failure;

macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            /// Fields set here win; the rest come from `fallback`.
            fn overlay(self, fallback: Self) -> Self {
                Self { $($field: self.$field.or(fallback.$field)),* }
            }
        }
    };
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelOptions {
    /// Sensor model: standard, landau-zener, dimer or trimer [default: trimer]
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Eigen-pair "p,q" (1-based labels) whose relative phase is read out [default: per model]
    #[arg(long, global = true)]
    pub pair: Option<String>,
}
overlay!(ModelOptions { model, pair });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct WaveformOptions {
    /// Named waveform (fig2..fig5 share the Gaussian-sine pulse); inline fields override it
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Signal amplitude ε
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Gaussian variance s of an inline pulse
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Carrier frequency k of an inline pulse (cycles per unit time)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Start of the signal window
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// End of the signal window
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    /// Field direction: x, y, z or "dx,dy,dz" [default: z]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// CSV file of (t, b) samples used as the waveform
    #[arg(long, global = true)]
    pub samples: Option<PathBuf>,
}
overlay!(WaveformOptions { preset, epsilon, s, k, t0, t1, direction, samples });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridOptions {
    /// Fixed number of time steps (skips grid refinement)
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Starting step count of grid refinement [default: 1024]
    #[arg(long, global = true)]
    pub initial_steps: Option<usize>,
    /// Accepted change in final survival between refinements [default: 1e-6]
    #[arg(long, global = true)]
    pub refine_tolerance: Option<f64>,
    /// Steps between trajectory rows written by `evolve` [default: 8]
    #[arg(long, global = true)]
    pub checkpoint_every: Option<usize>,
}
overlay!(GridOptions { steps, initial_steps, refine_tolerance, checkpoint_every });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScanOptions {
    /// Smallest amplitude of a scan
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps_min: Option<f64>,
    /// Largest amplitude of a scan
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps_max: Option<f64>,
    /// Number of amplitudes in a scan
    #[arg(long, global = true)]
    pub eps_count: Option<usize>,
    /// Sensor count of the multi-sensor columns [default: 3]
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Polar angles in the direction octant [default: 31]
    #[arg(long, global = true)]
    pub theta_count: Option<usize>,
    /// Azimuthal angles in the direction octant [default: 31]
    #[arg(long, global = true)]
    pub phi_count: Option<usize>,
    /// Time samples per trajectory in a time-resolved sweep [default: 256]
    #[arg(long, global = true)]
    pub time_samples: Option<usize>,
    /// `sweep` axis: amplitude or time [default: amplitude]
    #[arg(long, global = true)]
    pub sweep: Option<String>,
    /// Gap entering the adiabatic bound: min (over the window) or pointwise [default: min]
    #[arg(long, global = true)]
    pub gap_policy: Option<String>,
    /// Use this fixed gap in the adiabatic bound instead of measuring it
    #[arg(long, global = true)]
    pub gap_fixed: Option<f64>,
    /// Level separations below this are ignored when measuring the gap [default: 0.05]
    #[arg(long, global = true)]
    pub gap_threshold: Option<f64>,
    /// Measured gaps below this abort the bound [default: 1e-8]
    #[arg(long, global = true)]
    pub gap_floor: Option<f64>,
}
overlay!(ScanOptions {
    eps_min,
    eps_max,
    eps_count,
    n,
    theta_count,
    phi_count,
    time_samples,
    sweep,
    gap_policy,
    gap_fixed,
    gap_threshold,
    gap_floor,
});

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpectrumOptions {
    /// Field values for `spectrum`, comma separated or repeated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<f64>>,
}
overlay!(SpectrumOptions { b });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputOptions {
    /// Output file (spectrum, evolve; stdout if absent) or directory (scans) [default for scans: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for scans [default: available parallelism]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}
overlay!(OutputOptions { out, threads });

/// All options; on the command line they are flattened, in a config file
/// each group is a `[section]`.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[command(flatten)]
    pub model: ModelOptions,
    #[command(flatten)]
    pub waveform: WaveformOptions,
    #[command(flatten)]
    pub grid: GridOptions,
    #[command(flatten)]
    pub scan: ScanOptions,
    #[command(flatten)]
    pub spectrum: SpectrumOptions,
    #[command(flatten)]
    pub output: OutputOptions,
}

impl RunConfig {
    pub fn parse_toml(text: &str, origin: &Path) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Usage(format!("config {}: {}", origin.display(), e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_toml(&text, path)
    }

    /// Command-line values over `file` values.
    pub fn overlay(self, file: Self) -> Self {
        Self {
            model: self.model.overlay(file.model),
            waveform: self.waveform.overlay(file.waveform),
            grid: self.grid.overlay(file.grid),
            scan: self.scan.overlay(file.scan),
            spectrum: self.spectrum.overlay(file.spectrum),
            output: self.output.overlay(file.output),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_map_to_option_groups() {
        let text = r#"
            [model]
            model = "dimer"
            pair = "4,2"
            [waveform]
            preset = "fig2"
            epsilon = 0.5
            [grid]
            steps = 256
            checkpoint-every = 4
            [scan]
            eps-count = 11
            gap-policy = "pointwise"
            [output]
            threads = 1
        "#;
        let c = RunConfig::parse_toml(text, Path::new("t.toml")).unwrap();
        assert_eq!(c.model.model.as_deref(), Some("dimer"));
        assert_eq!(c.waveform.epsilon, Some(0.5));
        assert_eq!(c.grid.checkpoint_every, Some(4));
        assert_eq!(c.scan.eps_count, Some(11));
        assert_eq!(c.scan.gap_policy.as_deref(), Some("pointwise"));
        assert_eq!(c.output.threads, Some(1));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse_toml("[waveform]\nsigma = 3.0\n", Path::new("t.toml")).unwrap_err();
        assert!(matches!(err, Failure::Usage(ref m) if m.contains("sigma")), "{err:?}");
    }

    #[test]
    fn command_line_wins() {
        let mut cli = RunConfig::default();
        cli.waveform.epsilon = Some(1.0);
        let mut file = RunConfig::default();
        file.waveform.epsilon = Some(0.2);
        file.waveform.s = Some(20.0);
        let merged = cli.overlay(file);
        assert_eq!(merged.waveform.epsilon, Some(1.0));
        assert_eq!(merged.waveform.s, Some(20.0));
    }
}
