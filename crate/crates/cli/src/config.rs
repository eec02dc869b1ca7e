//! Run configuration: flat `block.key = value` text with every field defaulted.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rydent::channels::RotorConvention;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub physical: Physical,
    pub numerical: Numerical,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physical {
    /// Electron orbital angular momentum.
    #[serde(rename = "L")]
    pub l: u32,
    /// Total angular momentum.
    #[serde(rename = "J")]
    pub j: u32,
    /// Initial core state of the wavepacket; also fixes the parity of the channel list.
    #[serde(rename = "N0")]
    pub n0: u32,
    /// Packet centre in the N0 channel.
    pub nu0: f64,
    /// T_e/T_rot at (nu0, J) for the generic case.
    pub ratio: f64,
    pub resonant_ratio: f64,
    /// Kick strengths for `sos` and `time-entropy`.
    pub k: Vec<f64>,
    /// Kick strengths for `static-entropy`.
    pub static_k: Vec<f64>,
    pub rotor_convention: RotorConvention,
    pub delta0: f64,
    /// Reference ν and generic ratio of the classical map.
    pub classical_nu_ref: f64,
    pub classical_ratio: f64,
}

impl Default for Physical {
    fn default() -> Self {
        Self {
            l: 2,
            j: 10,
            n0: 8,
            nu0: 45.0,
            ratio: 3.1,
            resonant_ratio: 1.0,
            k: vec![0.0, 0.25, 0.5, 10.0],
            static_k: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            rotor_convention: RotorConvention::NN1,
            delta0: 0.0,
            classical_nu_ref: 25.0,
            classical_ratio: 2.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerical {
    /// Inner edge of the radial grid (bohr).
    pub r_min: f64,
    pub grid_points: usize,
    /// Eigenstate window ν_{N0} ∈ [nu0 − w, nu0 + w].
    pub window_half_width: f64,
    /// Packet energy width in mean level spacings 1/nu0³.
    pub sigma_e_spacings: f64,
    /// Trace lengths in units of T_e and sample counts (both ends included).
    pub short_time_max: f64,
    pub short_time_points: usize,
    pub long_time_max: f64,
    pub long_time_points: usize,
    /// Long-time means average over t/T_e ∈ [long_average_from, long_time_max].
    pub long_average_from: f64,
    pub ensemble: usize,
    pub n_kicks: usize,
    pub seed: u64,
}

impl Default for Numerical {
    fn default() -> Self {
        Self {
            r_min: 2.0,
            grid_points: 20001,
            window_half_width: 8.0,
            sigma_e_spacings: 4.0 / 3.0,
            short_time_max: 4.0,
            short_time_points: 401,
            long_time_max: 60.0,
            long_time_points: 3001,
            long_average_from: 20.0,
            ensemble: 100,
            n_kicks: 500,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub directory: PathBuf,
    /// Persist solved eigenstate bundles between runs.
    pub cache: bool,
    /// Defaults to `<directory>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub channel_json: bool,
    pub diagnostics_json: bool,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            cache: true,
            cache_dir: None,
            channel_json: true,
            diagnostics_json: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerical;
        anyhow::ensure!(
            self.physical.nu0 > n.window_half_width,
            "window reaches ν ≤ 0"
        );
        anyhow::ensure!(
            n.short_time_points >= 2 && n.long_time_points >= 2,
            "traces need at least two samples"
        );
        anyhow::ensure!(
            n.short_time_max > 0.0 && n.long_time_max > n.long_average_from,
            "bad time ranges"
        );
        anyhow::ensure!(
            n.ensemble >= 1 && n.n_kicks >= 1,
            "ensemble and n_kicks must be positive"
        );
        anyhow::ensure!(
            n.sigma_e_spacings > 0.0,
            "sigma_e_spacings must be positive"
        );
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.output.directory.join("cache"))
    }

    /// Flat `block.key = value` lines, the form echoed into output headers.
    pub fn to_flat_lines(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut lines = Vec::new();
        if let toml::Value::Table(blocks) = value {
            for (block, table) in blocks {
                if let toml::Value::Table(t) = table {
                    for (key, v) in t {
                        lines.push(format!("{block}.{key} = {v}"));
                    }
                }
            }
        }
        lines
    }
}
