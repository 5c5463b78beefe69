//! Experiment configuration.
//!
//! Values are layered: a named preset first, then the flat TOML file given by
//! `--config`, then command-line flags. Later layers win key by key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use excouple::{GroupCtx, NuStrategy};
use serde::Deserialize;

/// How measure masses are represented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    /// Exact rationals, except for total variation curves on infinite groups.
    #[default]
    Auto,
    Exact,
    Float,
}

impl FromStr for MassMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(MassMode::Auto),
            "exact" => Ok(MassMode::Exact),
            "float" => Ok(MassMode::Float),
            other => Err(format!("unknown mass mode `{other}` (auto, exact, float)")),
        }
    }
}

impl fmt::Display for MassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MassMode::Auto => "auto",
            MassMode::Exact => "exact",
            MassMode::Float => "float",
        })
    }
}

/// One configuration layer. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Start from a named reference experiment (bernoulli-z, cyclic3, lattice-even, free2).
    #[arg(long)]
    pub preset: Option<String>,
    /// Group, e.g. `Z`, `Z^2`, `Z/3`, `F2`, `Z x Z/4`.
    #[arg(long)]
    pub group: Option<String>,
    /// Step law as `element=mass` pairs, e.g. `"0=1/2 1=1/2"`.
    #[arg(long)]
    pub measure: Option<String>,
    /// Starting shift of the partner walk.
    #[arg(long)]
    pub x: Option<String>,
    /// Overlap search bound; for `tv` also the curve length.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Censoring horizon in steps (`demo-freegroup`: walk length).
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub runs: Option<u64>,
    /// Master seed; mandatory.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// single-atom or greedy-max-mass.
    #[arg(long)]
    pub nu_strategy: Option<String>,
    /// auto, exact or float.
    #[arg(long)]
    pub mass: Option<String>,
    #[arg(long)]
    pub fit_lo: Option<usize>,
    #[arg(long)]
    pub fit_hi: Option<usize>,
    /// Word-length radius of the difference-subgroup listing.
    #[arg(long)]
    pub closure_radius: Option<usize>,
    /// Largest `n` in the empirical tail table.
    #[arg(long)]
    pub tail_max: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ConfigLayer {
    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &ConfigLayer) -> ConfigLayer {
        overlay!(
            self, top, preset, group, measure, x, n_max, horizon, runs, seed, out, nu_strategy,
            mass, fit_lo, fit_hi, closure_radius, tail_max, threads
        );
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub const PRESETS: &[&str] = &["bernoulli-z", "cyclic3", "lattice-even", "free2"];

/// The reference experiments. Seeds are never part of a preset.
pub fn preset(name: &str) -> Result<ConfigLayer> {
    let layer = |group: &str, measure: &str, x: &str| ConfigLayer {
        group: Some(group.into()),
        measure: Some(measure.into()),
        x: Some(x.into()),
        ..Default::default()
    };
    Ok(match name {
        "bernoulli-z" => ConfigLayer {
            n_max: Some(4096),
            fit_lo: Some(64),
            ..layer("Z", "0=1/2 1=1/2", "1")
        },
        "cyclic3" => ConfigLayer {
            n_max: Some(60),
            fit_lo: Some(8),
            ..layer("Z/3", "0=1/2 1=1/2", "1")
        },
        "lattice-even" => layer("Z", "0=1/2 2=1/2", "4"),
        "free2" => ConfigLayer {
            n_max: Some(12),
            ..layer("F2", "a=1/4 A=1/4 b=1/4 B=1/4", "ab")
        },
        other => bail!("unknown preset `{other}` (known: {})", PRESETS.join(", ")),
    })
}

/// A fully resolved configuration. Command-specific defaults are applied by
/// the commands themselves through the `Option` fields.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub group: GroupCtx,
    pub measure: String,
    pub x: String,
    pub n_max: Option<usize>,
    pub horizon: Option<u64>,
    pub runs: Option<u64>,
    pub seed: u64,
    pub out: PathBuf,
    pub nu_strategy: NuStrategy,
    pub mass: MassMode,
    pub fit_lo: Option<usize>,
    pub fit_hi: Option<usize>,
    pub closure_radius: Option<usize>,
    pub tail_max: Option<u64>,
    pub threads: Option<usize>,
    pub timestamp: bool,
}

pub const DEFAULT_OUT: &str = "excouple-out";

impl ExperimentConfig {
    /// Resolves preset < file < flags. `fallback_preset` is used when no
    /// layer names one.
    pub fn resolve(
        flags: &ConfigLayer,
        config_file: Option<&Path>,
        timestamp: bool,
        fallback_preset: Option<&str>,
    ) -> Result<Self> {
        let file = match config_file {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        let preset_name = flags
            .preset
            .clone()
            .or_else(|| file.preset.clone())
            .or_else(|| fallback_preset.map(String::from));
        let base = match &preset_name {
            Some(name) => preset(name)?,
            None => ConfigLayer::default(),
        };
        let merged = base.overlay(&file).overlay(flags);
        Self::from_layer(merged, timestamp)
    }

    pub fn from_layer(l: ConfigLayer, timestamp: bool) -> Result<Self> {
        let missing = |key: &str| anyhow::anyhow!("`{key}` is not set (use --{key}, a config file or --preset)");
        let group_text = l.group.ok_or_else(|| missing("group"))?;
        let group = GroupCtx::parse(&group_text).with_context(|| format!("group `{group_text}`"))?;
        let seed = l
            .seed
            .ok_or_else(|| anyhow::anyhow!("a seed is mandatory (--seed or `seed` in the config file)"))?;
        let nu_strategy = match l.nu_strategy {
            Some(s) => s.parse().map_err(anyhow::Error::msg)?,
            None => NuStrategy::default(),
        };
        let mass = match l.mass {
            Some(s) => s.parse().map_err(anyhow::Error::msg)?,
            None => MassMode::default(),
        };
        let positive = [
            ("n-max", l.n_max.map(|v| v as u64)),
            ("horizon", l.horizon),
            ("runs", l.runs),
            ("fit-lo", l.fit_lo.map(|v| v as u64)),
            ("fit-hi", l.fit_hi.map(|v| v as u64)),
            ("closure-radius", l.closure_radius.map(|v| v as u64)),
            ("tail-max", l.tail_max),
            ("threads", l.threads.map(|v| v as u64)),
        ];
        for (key, v) in positive {
            if v == Some(0) {
                bail!("--{key} must be positive");
            }
        }
        if let (Some(lo), Some(hi)) = (l.fit_lo, l.fit_hi) {
            if lo >= hi {
                bail!("fit range [{lo}, {hi}] is empty");
            }
        }
        Ok(ExperimentConfig {
            group,
            measure: l.measure.ok_or_else(|| missing("measure"))?,
            x: l.x.ok_or_else(|| missing("x"))?,
            n_max: l.n_max,
            horizon: l.horizon,
            runs: l.runs,
            seed,
            out: l.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            nu_strategy,
            mass,
            fit_lo: l.fit_lo,
            fit_hi: l.fit_hi,
            closure_radius: l.closure_radius,
            tail_max: l.tail_max,
            threads: l.threads,
            timestamp,
        })
    }
}
