use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fractal_khintchine::ifs::ModelConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Sample,
    Count,
    DaniCheck,
    Walk,
    Recurrence,
    BallMass,
    Equidist,
    DoubleCorr,
    HaarSiegel,
    Mnc,
    Obstruction,
    Witness,
    Staircases,
    Nonconc,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        use CommandName::*;
        match self {
            Sample => "sample",
            Count => "count",
            DaniCheck => "dani-check",
            Walk => "walk",
            Recurrence => "recurrence",
            BallMass => "ball-mass",
            Equidist => "equidist",
            DoubleCorr => "double-corr",
            HaarSiegel => "haar-siegel",
            Mnc => "mnc",
            Obstruction => "obstruction",
            Witness => "witness",
            Staircases => "staircases",
            Nonconc => "nonconc",
        }
    }

    pub fn all() -> &'static [CommandName] {
        CommandName::value_variants()
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts integers written as `1000000` or `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f < 0.0 || f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(format!("`{s}` is not a nonnegative integer"));
    }
    Ok(f as u64)
}

/// Experiment parameters. Every field is optional; each command supplies
/// its own defaults for what it uses and ignores the rest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// IFS preset name, or `lebesgue` for uniform points on [0,1]^d
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Inline IFS (config file only)
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline_model: Option<ModelConfig>,
    /// Dimension d (for lebesgue, haar-siegel, obstruction, witness, staircases)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Approximation function, e.g. `power:a=0.5,c=1`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    /// Counting horizons N (comma separated, `1e6` allowed)
    #[arg(long = "N", value_delimiter = ',', value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_n: Option<Vec<u64>>,
    /// Number of Monte Carlo samples
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Number of trials
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Number of walk trajectories
    #[arg(long, value_parser = parse_count)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<u64>,
    /// Depth n (walk steps, or σ^(n) depth)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<u32>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    /// Box `lo,hixlo,hi…`
    #[arg(long = "box")]
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bx: Option<String>,
    /// gcd restriction level of the Siegel transform (0 = unrestricted)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// Expansion times t (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    /// Radii ρ (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    /// Thresholds r or ε (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// Walk start: `standard` or `cusp:<λ1>`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    /// Walk checkpoints for cusp decay (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// Staircase as pairs `1-3,2-3`; default: every staircase of size d, or
    /// the top row for mnc
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staircase: Option<String>,
    /// Witness search mode
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tries: Option<usize>,
    /// Point the affine subspace passes through (comma separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Direction vectors of the affine subspace, `x,y;x,y`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<String>,
    /// Master seed
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Params {
    /// Values set in `top` replace those in `self`.
    pub fn overlay(&mut self, top: &Params) {
        overlay!(self, top; model, inline_model, d, psi, big_n, samples, trials, ensemble, n, tau, kmax,
            gamma1, bx, m, t, rho, r, start, checkpoints, staircase, mode, max_tries, center, directions, seed);
    }
}

/// One experiment: the command and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: CommandName,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub params: Params,
}

/// Config file layout: like `ExperimentSpec`, with the command optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<CommandName>,
    threads: Option<usize>,
    output: Option<String>,
    #[serde(default)]
    params: Params,
}

impl ExperimentSpec {
    /// Merges a config file (if any) with command-line values, which win.
    pub fn resolve(
        command: CommandName,
        config: Option<&Path>,
        cli: &Params,
        threads: Option<usize>,
        output: Option<String>,
    ) -> Result<Self> {
        let mut spec = ExperimentSpec {
            command,
            threads: None,
            output: None,
            params: Params::default(),
        };
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file: ConfigFile = toml::from_str(&text)
                .with_context(|| format!("invalid config {}", path.display()))?;
            if let Some(c) = file.command {
                if c != command {
                    bail!("config {} is for `{c}`, not `{command}`", path.display());
                }
            }
            spec.threads = file.threads;
            spec.output = file.output;
            spec.params = file.params;
        }
        spec.params.overlay(cli);
        spec.threads = threads.or(spec.threads);
        spec.output = output.or(spec.output);
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
