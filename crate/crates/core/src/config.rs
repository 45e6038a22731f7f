//! TOML run configuration shared by all CLI subcommands.
//!
//! Every key is optional; missing keys take the defaults below and unknown
//! keys are rejected. A resolved configuration, written back with its
//! `[metadata]` table, is itself a valid configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dissipator::{Coupling, NoiseConfig};
use crate::error::{Error, Result};
use crate::experiments::{log_grid, SweepSpec};
use crate::factorization::ClassicalNoiseConfig;
use crate::integrator::IntegratorConfig;
use crate::model::ModelParams;
use crate::spin::{Component, DEFAULT_QUBIT_CAP};

pub const SCHEMA_VERSION: u32 = 1;

const FIG1_PRESET: &str = include_str!("../presets/fig1.preset");
const FIG2_PRESET: &str = include_str!("../presets/fig2.preset");

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 2] = ["fig1", "fig2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub artifact: String,
    pub version: String,
    pub subcommand: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub channel: String,
    pub gamma: f64,
    pub temperature: f64,
    pub include_nu_zero: bool,
    pub nu_zero_rate: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            channel: "Jz".into(),
            gamma: 0.0,
            temperature: 0.001,
            include_nu_zero: false,
            nu_zero_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub j_list: Vec<f64>,
    pub channels: Vec<String>,
    pub temperatures: Vec<f64>,
    /// Explicit grid; when absent the log grid below is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            j_list: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            channels: vec!["Jz".into()],
            temperatures: vec![0.001, 10.0],
            gamma_grid: None,
            gamma_min: 1e-4,
            gamma_max: 1.0,
            gamma_points: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorizationSection {
    pub checkpoints: usize,
}

impl Default for FactorizationSection {
    fn default() -> Self {
        Self { checkpoints: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalNoiseSection {
    pub n_spins: usize,
    pub component: Component,
    pub alpha: f64,
    pub n_traj: usize,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for ClassicalNoiseSection {
    fn default() -> Self {
        let d = ClassicalNoiseConfig::default();
        Self {
            n_spins: d.n_spins,
            component: d.component,
            alpha: d.alpha,
            n_traj: d.n_traj,
            dt: d.dt,
            t_start: d.span.0,
            t_end: d.span.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Worker threads; absent means all cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Record per-point wall time in sweep CSVs.
    pub timing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
    pub model: ModelParams,
    pub noise: NoiseSection,
    pub integrator: IntegratorConfig,
    pub sweep: SweepSection,
    pub factorization: FactorizationSection,
    pub classical_noise: ClassicalNoiseSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            workers: None,
            out: None,
            timing: true,
            metadata: None,
            model: ModelParams::default(),
            noise: NoiseSection::default(),
            integrator: IntegratorConfig::default(),
            sweep: SweepSection::default(),
            factorization: FactorizationSection::default(),
            classical_noise: ClassicalNoiseSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// One of the bundled configurations, see [`PRESETS`].
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig1" | "fig1.preset" => Self::from_toml_str(FIG1_PRESET),
            "fig2" | "fig2.preset" => Self::from_toml_str(FIG2_PRESET),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The resolved configuration tagged with artifact version and subcommand.
    pub fn metadata_block(&self, subcommand: &str) -> Result<String> {
        let mut tagged = self.clone();
        tagged.metadata = Some(Metadata {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
        });
        tagged.to_toml()
    }

    pub fn noise_config(&self) -> Result<NoiseConfig> {
        let n = NoiseConfig {
            coupling: self.noise.channel.parse()?,
            gamma_flat: self.noise.gamma,
            temperature: self.noise.temperature,
            include_nu_zero: self.noise.include_nu_zero,
            nu_zero_rate: self.noise.nu_zero_rate,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = &self.sweep;
        let gamma_grid = match &s.gamma_grid {
            Some(g) => g.clone(),
            None => log_grid(s.gamma_min, s.gamma_max, s.gamma_points)?,
        };
        let channels = s
            .channels
            .iter()
            .map(|c| c.parse::<Coupling>())
            .collect::<Result<Vec<_>>>()?;
        let spec = SweepSpec {
            j_list: s.j_list.clone(),
            gamma_grid,
            channels,
            temperatures: s.temperatures.clone(),
            model: self.model,
            integrator: self.integrator,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn classical_noise_config(&self) -> Result<ClassicalNoiseConfig> {
        let c = &self.classical_noise;
        let nc = ClassicalNoiseConfig {
            n_spins: c.n_spins,
            component: c.component,
            alpha: c.alpha,
            n_traj: c.n_traj,
            seed: self.seed,
            dt: c.dt,
            span: (c.t_start, c.t_end),
            workers: self.workers,
            qubit_cap: DEFAULT_QUBIT_CAP,
        };
        nc.validate()?;
        Ok(nc)
    }

    /// Checks everything the subcommands will read.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.integrator.validate()?;
        self.noise_config()?;
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be positive".into()));
        }
        if self.factorization.checkpoints == 0 {
            return Err(Error::InvalidParameter("factorization.checkpoints must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_tables_fill_defaults() {
        let cfg = RunConfig::from_toml_str("[model]\nj = 2.5\n[integrator]\nrel_tol = 1e-9\n").unwrap();
        assert_eq!(cfg.model.j, 2.5);
        assert_eq!(cfg.model.kappa, 0.1);
        assert_eq!(cfg.integrator.rel_tol, 1e-9);
        assert_eq!(cfg.integrator.dt, 0.01);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = RunConfig::from_toml_str("[model]\nkapa = 0.2\n").unwrap_err().to_string();
        assert!(err.contains("kapa"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("schema_version = 7").is_err());
        assert!(RunConfig::from_toml_str("[model\n").is_err());
    }

    #[test]
    fn presets_load_and_differ_by_channel() {
        let f1 = RunConfig::preset("fig1").unwrap();
        let f2 = RunConfig::preset("fig2").unwrap();
        let s1 = f1.sweep_spec().unwrap();
        let s2 = f2.sweep_spec().unwrap();
        assert_eq!(s1.channels, vec![Coupling::Jz]);
        assert_eq!(s2.channels, vec![Coupling::Jx]);
        assert_eq!(s1.j_list, vec![0.5, 1.0, 1.5, 2.0, 2.5]);
        assert_eq!(s1.temperatures, vec![0.001, 10.0]);
        assert_eq!(s1.points().len(), 250);
        assert_eq!(s1.model, ModelParams::default());
        assert!(RunConfig::preset("fig3").is_err());
    }

    #[test]
    fn empty_gamma_grid_is_rejected() {
        let cfg = RunConfig::from_toml_str("[sweep]\ngamma_grid = []\n").unwrap();
        assert!(cfg.sweep_spec().is_err());
    }

    #[test]
    fn metadata_round_trips() {
        let mut cfg = RunConfig::preset("fig2").unwrap();
        cfg.seed = 42;
        cfg.workers = Some(3);
        let text = cfg.metadata_block("sweep").unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.metadata.as_ref().unwrap().subcommand, "sweep");
        assert_eq!(RunConfig { metadata: None, ..back }, cfg);
    }

    #[test]
    fn bad_channel_is_an_invalid_parameter() {
        let cfg = RunConfig::from_toml_str("[noise]\nchannel = \"Jy\"\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter(_))));
    }
}
