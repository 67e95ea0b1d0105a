//! Flat key/value experiment configuration.
//!
//! Values are layered: built-in defaults, then the named preset, then the
//! config file, then command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use phmc_core::{Mode, Representation};
use serde::Deserialize;

use crate::error::CliError;

/// Every optional key; shared by the TOML file and the command line.
#[derive(Debug, Default, Clone, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Named parameter set applied before the file and flags
    /// (linear-fig, doublewell, zero-smoke).
    #[arg(long)]
    pub preset: Option<String>,
    /// Free-form label copied into the output header.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub potential: Option<String>,
    /// Double-well stiffness.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// spectral or grid.
    #[arg(long)]
    pub repr: Option<String>,
    /// Number of sine modes or interior grid points.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Integrator step size.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// Integrator steps per trajectory.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Coupled iterations per run.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Starting pair: fig1-pair (two prior draws) or doublewell-pair (±½).
    #[arg(long)]
    pub init: Option<String>,
    /// adjusted or exact.
    #[arg(long)]
    pub mode: Option<String>,
    /// Coalescence threshold on the L² distance; 0 means identical numbers.
    #[arg(long, allow_hyphen_values = true)]
    pub tolerance: Option<f64>,
    /// Sample pairs used by `audit`.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        ConfigLayer { $($f: $top.$f.clone().or_else(|| $base.$f.clone()),)* }
    };
}

impl ConfigLayer {
    /// Fields of `top` replace those of `self`.
    pub fn overlay(&self, top: &ConfigLayer) -> ConfigLayer {
        overlay!(
            self, top, preset, experiment, potential, gamma, repr, dim, h, steps, iters, runs,
            seed, init, mode, tolerance, pairs, out
        )
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn preset(name: &str) -> Result<ConfigLayer, CliError> {
        let s = |v: &str| Some(v.to_string());
        Ok(match name {
            "linear-fig" => ConfigLayer {
                potential: s("linear"),
                repr: s("spectral"),
                dim: Some(5000),
                h: Some(0.2),
                steps: Some(12),
                iters: Some(400),
                mode: s("adjusted"),
                init: s("fig1-pair"),
                ..ConfigLayer::default()
            },
            "doublewell" => ConfigLayer {
                potential: s("double-well"),
                gamma: Some(60.0),
                repr: s("grid"),
                iters: Some(2000),
                mode: s("adjusted"),
                init: s("doublewell-pair"),
                ..ConfigLayer::default()
            },
            "zero-smoke" => ConfigLayer {
                potential: s("zero"),
                mode: s("exact"),
                dim: Some(64),
                iters: Some(30),
                init: s("fig1-pair"),
                ..ConfigLayer::default()
            },
            other => {
                return Err(CliError::config(
                    "preset",
                    format!("unknown preset `{other}` (known: linear-fig, doublewell, zero-smoke)"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPreset {
    /// Two independent prior draws.
    Fig1Pair,
    /// The constant functions `+½` and `−½`.
    DoubleWellPair,
}

impl FromStr for InitPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig1-pair" => Ok(InitPreset::Fig1Pair),
            "doublewell-pair" => Ok(InitPreset::DoubleWellPair),
            other => Err(format!(
                "unknown initial pair `{other}` (expected fig1-pair|doublewell-pair)"
            )),
        }
    }
}

impl fmt::Display for InitPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitPreset::Fig1Pair => "fig1-pair",
            InitPreset::DoubleWellPair => "doublewell-pair",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub preset: Option<String>,
    pub potential: String,
    pub gamma: f64,
    pub repr: Representation,
    pub dim: usize,
    pub h: f64,
    pub steps: usize,
    pub iters: usize,
    pub runs: usize,
    pub seed: u64,
    pub init: InitPreset,
    pub mode: Mode,
    pub tolerance: f64,
    pub pairs: usize,
    pub out: Option<PathBuf>,
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(field, format!("must be a positive number, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::config(field, format!("must be at least {min}, got {v}")))
    }
}

impl ExperimentConfig {
    /// Resolves `preset → file → flags` on top of the defaults for `command`.
    pub fn resolve(
        command: &str,
        file: Option<&ConfigLayer>,
        flags: &ConfigLayer,
    ) -> Result<ExperimentConfig, CliError> {
        let user = file.cloned().unwrap_or_default().overlay(flags);
        let layer = match &user.preset {
            Some(name) => ConfigLayer::preset(name)?.overlay(&user),
            None => user,
        };
        let default_runs = if command == "average" { 20 } else { 1 };

        let tolerance = layer.tolerance.unwrap_or(0.0);
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(CliError::config("tolerance", format!("must be non-negative, got {tolerance}")));
        }
        let repr = layer.repr.as_deref().unwrap_or("spectral");
        let mode = layer.mode.as_deref().unwrap_or("adjusted");
        let init = layer.init.as_deref().unwrap_or("fig1-pair");

        let config = ExperimentConfig {
            experiment: layer.experiment.unwrap_or_else(|| command.to_string()),
            preset: layer.preset,
            potential: layer.potential.unwrap_or_else(|| "linear".to_string()),
            gamma: positive("gamma", layer.gamma.unwrap_or(20.0))?,
            repr: repr
                .parse()
                .map_err(|_| CliError::config("repr", format!("expected spectral|grid, got `{repr}`")))?,
            dim: at_least("dim", layer.dim.unwrap_or(5000), 1)?,
            h: positive("h", layer.h.unwrap_or(0.2))?,
            steps: at_least("steps", layer.steps.unwrap_or(12), 1)?,
            iters: at_least("iters", layer.iters.unwrap_or(400), 1)?,
            runs: at_least("runs", layer.runs.unwrap_or(default_runs), 1)?,
            seed: layer.seed.unwrap_or(0),
            init: init.parse().map_err(|e| CliError::config("init", e))?,
            mode: mode
                .parse()
                .map_err(|_| CliError::config("mode", format!("expected adjusted|exact, got `{mode}`")))?,
            tolerance,
            pairs: layer.pairs.unwrap_or(1000),
            out: layer.out,
        };
        if !phmc_core::potentials::REGISTERED.contains(&config.potential.as_str()) {
            return Err(CliError::config(
                "potential",
                format!(
                    "unknown potential `{}` (known: {})",
                    config.potential,
                    phmc_core::potentials::REGISTERED.join(", ")
                ),
            ));
        }
        Ok(config)
    }

    /// The resolved configuration as `# key = value` lines.
    pub fn header(&self) -> String {
        let fields: [(&str, String); 16] = [
            ("experiment", self.experiment.clone()),
            ("preset", self.preset.clone().unwrap_or_else(|| "none".into())),
            ("potential", self.potential.clone()),
            ("gamma", self.gamma.to_string()),
            ("repr", self.repr.to_string()),
            ("dim", self.dim.to_string()),
            ("h", self.h.to_string()),
            ("steps", self.steps.to_string()),
            ("iters", self.iters.to_string()),
            ("runs", self.runs.to_string()),
            ("seed", self.seed.to_string()),
            ("init", self.init.to_string()),
            ("mode", self.mode.to_string()),
            ("tolerance", self.tolerance.to_string()),
            ("pairs", self.pairs.to_string()),
            (
                "out",
                self.out
                    .as_ref()
                    .map_or_else(|| "stdout".into(), |p| p.display().to_string()),
            ),
        ];
        fields
            .iter()
            .map(|(k, v)| format!("# {k} = {v}\n"))
            .collect()
    }
}
