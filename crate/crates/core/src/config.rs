//! Run configuration, read from TOML. Every field is optional; missing
//! fields take the defaults below.
//!
//! ```toml
//! seed = 1
//! out = "hjreact-out"        # output directory
//! p0 = 4.0                   # packet momentum is (-p0, p0)
//! sweep = [1.0, 2.0, 3.0]    # momenta for `sweep`
//! t_final = 700.0
//! workers = 0                # 0 = all cores
//! record = [0, 1, 2, 3]      # particle ids whose trajectories are written
//!
//! [pes]                      # Müller-Brown parameters, see `PesConfig`
//! energy_scale = 0.001
//!
//! [grid]
//! x_range = [-2.5, 1.5]
//! y_range = [-1.0, 2.5]
//! nx = 256
//! ny = 256
//! dt = 0.05
//!
//! [ensemble]
//! n = 50000
//! sigma_sq = 0.0125
//! mass = 1836.0
//!
//! [classical]
//! dt = 0.1
//! stride = 10
//!
//! [bohmian]
//! stride = 20
//! node_floor = 1e-12
//!
//! [stationary]
//! seeds_nx = 28
//! seeds_ny = 23
//!
//! [runs]
//! bohmian = true
//! classical_rho0 = true
//! classical_wigner = true
//!
//! [cara]
//! points = 512
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalStepping, DEFAULT_SIGMA_SQ, PROTON_MASS};
use crate::error::{Error, Result};
use crate::pes::{FrontierLine, PesConfig, PesModel};
use crate::quantum::GridSpec;
use crate::workflow::StudySettings;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig { x_range: g.x_range, y_range: g.y_range, nx: 256, ny: 256, dt: g.dt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    pub sigma_sq: f64,
    pub mass: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { n: 50_000, sigma_sq: DEFAULT_SIGMA_SQ, mass: PROTON_MASS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub dt: f64,
    pub stride: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        let s = ClassicalStepping::default();
        ClassicalConfig { dt: s.dt, stride: s.stride }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BohmianConfig {
    pub stride: usize,
    pub node_floor: f64,
}

impl Default for BohmianConfig {
    fn default() -> Self {
        BohmianConfig { stride: 20, node_floor: crate::bohmian::DEFAULT_NODE_FLOOR }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    pub seeds_nx: usize,
    pub seeds_ny: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
}

impl Default for StationaryConfig {
    fn default() -> Self {
        StationaryConfig { seeds_nx: 28, seeds_ny: 23, x_range: [-1.5, 1.2], y_range: [-0.2, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunsConfig {
    pub bohmian: bool,
    pub classical_rho0: bool,
    pub classical_wigner: bool,
}

impl Default for RunsConfig {
    fn default() -> Self {
        RunsConfig { bohmian: true, classical_rho0: true, classical_wigner: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaraConfig {
    pub points: usize,
}

impl Default for CaraConfig {
    fn default() -> Self {
        CaraConfig { points: crate::analysis::CARATHEODORY_POINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub p0: f64,
    pub sweep: Vec<f64>,
    pub t_final: f64,
    pub workers: usize,
    pub record: Vec<usize>,
    pub pes: PesConfig,
    pub grid: GridConfig,
    pub ensemble: EnsembleConfig,
    pub classical: ClassicalConfig,
    pub bohmian: BohmianConfig,
    pub stationary: StationaryConfig,
    pub runs: RunsConfig,
    pub cara: CaraConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: PathBuf::from("hjreact-out"),
            p0: 4.0,
            sweep: (1..=12).map(f64::from).collect(),
            t_final: 700.0,
            workers: 0,
            record: (0..8).collect(),
            pes: PesConfig::default(),
            grid: GridConfig::default(),
            ensemble: EnsembleConfig::default(),
            classical: ClassicalConfig::default(),
            bohmian: BohmianConfig::default(),
            stationary: StationaryConfig::default(),
            runs: RunsConfig::default(),
            cara: CaraConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse TOML text; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config { path: origin.to_owned(), message: e.to_string() })?;
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => {
                Error::Config { path: origin.to_owned(), message: format!("field `{field}`: {reason}") }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.to_owned(), message: e.to_string() })?;
        Self::from_toml(&text, path)
    }

    /// Canonical TOML of the effective configuration; hashed into manifests.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<PesModel> {
        self.pes.clone().into_model()
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            x_range: self.grid.x_range,
            y_range: self.grid.y_range,
            nx: self.grid.nx,
            ny: self.grid.ny,
            dt: self.grid.dt,
            mass: self.ensemble.mass,
        }
    }

    pub fn stepping(&self) -> ClassicalStepping {
        ClassicalStepping { dt: self.classical.dt, t_final: self.t_final, stride: self.classical.stride }
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.grid_spec().validate()?;
        self.stepping().validate()?;
        if !(self.grid.dt > 0.0) {
            return Err(Error::invalid("grid.dt", "must be positive"));
        }
        if self.ensemble.n == 0 {
            return Err(Error::invalid("ensemble.n", "must be at least 1"));
        }
        if !(self.ensemble.sigma_sq > 0.0) {
            return Err(Error::invalid("ensemble.sigma_sq", "must be positive"));
        }
        if !(self.ensemble.mass > 0.0) {
            return Err(Error::invalid("ensemble.mass", "must be positive"));
        }
        if !self.p0.is_finite() || self.sweep.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("p0", "momenta must be finite"));
        }
        if self.bohmian.stride == 0 {
            return Err(Error::invalid("bohmian.stride", "must be at least 1"));
        }
        if self.cara.points < 2 {
            return Err(Error::invalid("cara.points", "must be at least 2"));
        }
        Ok(())
    }

    /// Study settings for ensemble runs, with the packet centred at `center`.
    pub fn study(&self, center: Vec2) -> StudySettings {
        StudySettings {
            grid: self.grid_spec(),
            center,
            sigma_sq: self.ensemble.sigma_sq,
            count: self.ensemble.n,
            seed: self.seed,
            t_final: self.t_final,
            classical: self.stepping(),
            bohmian_stride: self.bohmian.stride,
            node_floor: self.bohmian.node_floor,
            line: FrontierLine::default(),
            run_bohmian: self.runs.bohmian,
            run_classical_rho0: self.runs.classical_rho0,
            run_classical_wigner: self.runs.classical_wigner,
            record: self.record.clone(),
            equivariance_times: Vec::new(),
            equivariance_block: 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("", Path::new("x.toml")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let back = RunConfig::from_toml(&cfg.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_field_is_named_with_line() {
        let err = RunConfig::from_toml("seed = 1\n[grid]\nnx = 64\nnz = 3\n", Path::new("c.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nz") && msg.contains("line 4"), "{msg}");
        assert!(err.is_usage());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = RunConfig::from_toml("[grid]\nnx = 100\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("grid.nx"), "{err}");
        let err = RunConfig::from_toml("[ensemble]\nn = 0\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("ensemble.n"), "{err}");
    }
}
