//! TOML run configuration.
//!
//! ```toml
//! [domain]
//! N = 64
//! L = 6.283185307179586   # default 2 pi
//!
//! [solver]
//! nu = 0.1
//! dt = 1e-3
//! T = 10.0
//!
//! [forcing]
//! kind = "single_mode"
//! mode = [1, 0]
//! amplitude = 0.1
//! ```
//!
//! Every table rejects unknown keys. Errors name the offending key path.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sqg_core::degiorgi::Branch;
use sqg_core::forcing::{random_initial_state, ForcingKind, ForcingSpec};
use sqg_core::solver::{CheckpointPlan, SampleExtras, SolverConfig};
use sqg_core::spectral::{Domain, Grid, SpectralField};
use sqg_core::{checkpoint, Grid64, SpectralField64};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub forcing: ForcingSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L", default = "two_pi")]
    pub length: f64,
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub nu: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    /// Defaults to ten steps.
    #[serde(default)]
    pub sample_interval: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_t() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKindName {
    #[default]
    None,
    SingleMode,
    RandomBand,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    #[serde(default)]
    pub kind: ForcingKindName,
    #[serde(default = "unit_mode")]
    pub mode: [i64; 2],
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub k_lo: f64,
    #[serde(default = "four")]
    pub k_hi: f64,
    /// Defaults to `solver.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "four")]
    pub p: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            kind: ForcingKindName::None,
            mode: unit_mode(),
            amplitude: 0.0,
            k_lo: 1.0,
            k_hi: 4.0,
            seed: None,
            path: None,
            p: 4.0,
        }
    }
}

fn unit_mode() -> [i64; 2] {
    [1, 0]
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

fn eight() -> f64 {
    8.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Zero,
    Cosine,
    Random,
    Checkpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: InitialKind,
    #[serde(default = "unit_mode")]
    pub mode: [i64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub k_lo: f64,
    #[serde(default = "eight")]
    pub k_hi: f64,
    /// `L^2` norm of random states.
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Zero,
            mode: unit_mode(),
            amplitude: 1.0,
            k_lo: 1.0,
            k_hi: 8.0,
            l2: 1.0,
            seed: None,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default)]
    pub checkpoint_interval: Option<f64>,
    #[serde(default)]
    pub bands: bool,
    #[serde(default)]
    pub flux: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out(),
            checkpoint_interval: None,
            bands: false,
            flux: false,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub flux: FluxExperiment,
    #[serde(default)]
    pub degiorgi: DeGiorgiExperiment,
    #[serde(default)]
    pub absorb: AbsorbExperiment,
    #[serde(default)]
    pub track: TrackExperiment,
    #[serde(default)]
    pub visc: ViscExperiment,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxExperiment {
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchChoice {
    Plus,
    Minus,
    #[default]
    Both,
}

impl BranchChoice {
    pub fn branches(self) -> Vec<Branch> {
        match self {
            BranchChoice::Plus => vec![Branch::Plus],
            BranchChoice::Minus => vec![Branch::Minus],
            BranchChoice::Both => vec![Branch::Plus, Branch::Minus],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeGiorgiExperiment {
    /// Fixed level height; predicted from `C_M` when absent.
    #[serde(rename = "M", default)]
    pub m: Option<f64>,
    #[serde(rename = "C_M", default = "one")]
    pub c_m: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Defaults to `solver.T`.
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub branch: BranchChoice,
    #[serde(default = "default_per_window")]
    pub per_window: usize,
}

impl Default for DeGiorgiExperiment {
    fn default() -> Self {
        Self {
            m: None,
            c_m: 1.0,
            levels: default_levels(),
            t0: None,
            branch: BranchChoice::Both,
            per_window: default_per_window(),
        }
    }
}

fn default_levels() -> usize {
    6
}

fn default_per_window() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbExperiment {
    #[serde(default = "ten")]
    pub members: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Initial `L^2` norm as a multiple of the absorbing radius (absolute when the radius is 0).
    #[serde(default = "four")]
    pub initial_factor: f64,
    #[serde(default = "one")]
    pub k_lo: f64,
    #[serde(default = "eight")]
    pub k_hi: f64,
}

impl Default for AbsorbExperiment {
    fn default() -> Self {
        Self {
            members: 10,
            margin: default_margin(),
            initial_factor: 4.0,
            k_lo: 1.0,
            k_hi: 8.0,
        }
    }
}

fn ten() -> usize {
    10
}

fn default_margin() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackExperiment {
    #[serde(default = "three")]
    pub pairs: usize,
    #[serde(default)]
    pub ladder: Vec<f64>,
    #[serde(default = "one")]
    pub window: f64,
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default = "one")]
    pub k_lo: f64,
    #[serde(default = "eight")]
    pub k_hi: f64,
}

impl Default for TrackExperiment {
    fn default() -> Self {
        Self {
            pairs: 3,
            ladder: Vec::new(),
            window: 1.0,
            l2: 1.0,
            k_lo: 1.0,
            k_hi: 8.0,
        }
    }
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscExperiment {
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

impl Default for ViscExperiment {
    fn default() -> Self {
        Self {
            eps0: default_eps0(),
            count: default_count(),
        }
    }
}

fn default_eps0() -> f64 {
    0.05
}

fn default_count() -> usize {
    7
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    let cfg = parse_config_str(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::new(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim().to_string();
        if path.is_empty() || path == "." {
            CliError::Config(msg)
        } else {
            CliError::Config(format!("{path}: {msg}"))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.domain()?;
        self.solver_config()?.validate()?;
        let f = &self.forcing;
        if f.kind == ForcingKindName::File && f.path.is_none() {
            return Err(CliError::Config("forcing.path is required for kind = \"file\"".into()));
        }
        if !(f.p > 2.0) {
            return Err(CliError::Config(format!("forcing.p must exceed 2, got {}", f.p)));
        }
        if self.initial.kind == InitialKind::Checkpoint && self.initial.path.is_none() {
            return Err(CliError::Config("initial.path is required for kind = \"checkpoint\"".into()));
        }
        if !(self.initial.l2 >= 0.0) {
            return Err(CliError::Config("initial.l2 must be nonnegative".into()));
        }
        let dg = &self.experiment.degiorgi;
        if dg.levels < 3 {
            return Err(CliError::Config("experiment.degiorgi.levels must be at least 3".into()));
        }
        if let Some(t0) = dg.t0 {
            if !(t0 > 0.0 && t0 <= self.solver.t_final) {
                return Err(CliError::Config("experiment.degiorgi.t0 must lie in (0, solver.T]".into()));
            }
        }
        if !(dg.c_m > 0.0) {
            return Err(CliError::Config("experiment.degiorgi.C_M must be positive".into()));
        }
        if self.experiment.absorb.margin < 0.0 {
            return Err(CliError::Config("experiment.absorb.margin must be nonnegative".into()));
        }
        let v = &self.experiment.visc;
        if !(v.eps0 > 0.0) || v.count == 0 {
            return Err(CliError::Config("experiment.visc needs eps0 > 0 and count >= 1".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain<f64>, CliError> {
        Domain::new(self.domain.length, self.domain.n)
            .map_err(|e| CliError::Config(format!("domain: {e}")))
    }

    pub fn grid(&self) -> Result<Arc<Grid64>, CliError> {
        Ok(Grid::new(self.domain()?))
    }

    pub fn forcing_spec(&self) -> ForcingSpec<f64> {
        let f = &self.forcing;
        let kind = match f.kind {
            ForcingKindName::None => return ForcingSpec { target_p: f.p, ..ForcingSpec::zero() },
            ForcingKindName::SingleMode => ForcingKind::SingleMode { k: (f.mode[0], f.mode[1]) },
            ForcingKindName::RandomBand => ForcingKind::BandLimitedRandom {
                k_lo: f.k_lo,
                k_hi: f.k_hi,
                seed: f.seed.unwrap_or(self.solver.seed),
            },
            ForcingKindName::File => ForcingKind::FromFile {
                path: f.path.clone().unwrap_or_default(),
            },
        };
        ForcingSpec {
            kind,
            amplitude: f.amplitude,
            target_p: f.p,
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>, CliError> {
        let s = &self.solver;
        let mut cfg = SolverConfig::new(self.domain()?, s.nu, s.dt, s.t_final);
        cfg.eps = s.eps;
        cfg.sample_interval = s.sample_interval.unwrap_or(10.0 * s.dt).min(s.t_final);
        cfg.forcing = self.forcing_spec();
        cfg.seed = s.seed;
        cfg.extras = SampleExtras {
            bands: self.output.bands || self.output.flux,
            flux: self.output.flux,
        };
        Ok(cfg)
    }

    pub fn with_checkpoints(&self, cfg: &mut SolverConfig<f64>, dir: PathBuf) {
        if let Some(interval) = self.output.checkpoint_interval {
            cfg.checkpoints = Some(CheckpointPlan { dir, interval });
        }
    }

    pub fn initial_state(&self, grid: &Arc<Grid64>) -> Result<SpectralField64, CliError> {
        let i = &self.initial;
        let seed = i.seed.unwrap_or(self.solver.seed);
        Ok(match i.kind {
            InitialKind::Zero => SpectralField::zeros(grid),
            InitialKind::Cosine => SpectralField::cosine(grid, (i.mode[0], i.mode[1]), i.amplitude)?,
            InitialKind::Random => random_initial_state(grid, i.k_lo, i.k_hi, i.l2, seed)?,
            InitialKind::Checkpoint => {
                let path = i.path.as_ref().expect("validated");
                checkpoint::read(path)?.to_field(grid)?
            }
        })
    }

    /// SHA-256 of the configuration with defaults applied, serialized as JSON with sorted keys.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
