//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfpe_core::drift::{InitialDensitySpec, TimeProfile};
use sfpe_core::linear::{Rho, SolverConfig};
use sfpe_core::nonlinear::{NonlinearConfig, DEFAULT_LEVELS};
use sfpe_core::nonlinearity::NonlinearitySpec;
use sfpe_core::Grid;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: at `{key}`: {message}")]
    Schema {
        path: PathBuf,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SolveLinear,
    SolveNonlinear,
    Particles,
    VerifyBesov,
    VerifyProduct,
    ContinuityExperiment,
    FkCrosscheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::SolveLinear => "solve-linear",
            ExperimentKind::SolveNonlinear => "solve-nonlinear",
            ExperimentKind::Particles => "particles",
            ExperimentKind::VerifyBesov => "verify-besov",
            ExperimentKind::VerifyProduct => "verify-product",
            ExperimentKind::ContinuityExperiment => "continuity-experiment",
            ExperimentKind::FkCrosscheck => "fk-crosscheck",
        }
    }
}

fn default_length() -> f64 {
    16.0 * std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentBlock {
    pub alpha: f64,
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}
fn default_eps_reg() -> f64 {
    0.05
}

/// One Fourier term `c e^{i xi x}` plus its conjugate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftBlock {
    Zero,
    Sampled {
        beta: f64,
        #[serde(default = "default_eps_reg")]
        eps_reg: f64,
        #[serde(default)]
        decay_exponent: Option<f64>,
        #[serde(default)]
        band_limit: Option<f64>,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        time_profile: TimeProfile,
        #[serde(default = "one")]
        amplitude: f64,
        /// Rescale so that `sup_t ||b(t)||_{C^{-alpha}}` equals this value.
        #[serde(default)]
        calibrate_to: Option<f64>,
        /// Heat mollification level applied after sampling and calibration.
        #[serde(default)]
        mollify: Option<usize>,
        #[serde(default = "one")]
        scale: f64,
    },
    Modes {
        modes: Vec<ModeTerm>,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl Default for DriftBlock {
    fn default() -> Self {
        DriftBlock::Zero
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub sigma: f64,
}

impl Default for KernelBlock {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

fn default_horizon() -> f64 {
    0.5
}
fn default_steps() -> usize {
    100
}
fn default_picard_tol() -> f64 {
    1e-9
}
fn default_picard_iters() -> usize {
    200
}
fn default_outer_tol() -> f64 {
    1e-7
}
fn default_outer_iters() -> usize {
    50
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub time_steps: usize,
    #[serde(default)]
    pub rho: Rho,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_iters")]
    pub max_picard_iters: usize,
    #[serde(default = "one")]
    pub bony_c: f64,
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "default_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default)]
    pub outer_rho: Rho,
    #[serde(default)]
    pub c_fk: Option<f64>,
    #[serde(default = "yes")]
    pub uniqueness_probe: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        toml::from_str("").expect("every solver key has a default")
    }
}

fn default_counts() -> Vec<usize> {
    vec![100_000]
}
fn default_particle_steps() -> usize {
    2000
}
fn default_mollification() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesBlock {
    /// Particle counts, run in order; the last one is checked against the PDE.
    #[serde(default = "default_counts")]
    pub counts: Vec<usize>,
    #[serde(default = "default_particle_steps")]
    pub steps: usize,
    #[serde(default = "default_mollification")]
    pub mollification: usize,
    #[serde(default)]
    pub record_every: usize,
    #[serde(default = "default_substeps")]
    pub noise_substeps: usize,
    /// Kernel density bandwidth; a Silverman-type default when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Write every recorded ensemble as a binary snapshot.
    #[serde(default)]
    pub persist: bool,
}

fn default_substeps() -> usize {
    1
}

impl Default for ParticlesBlock {
    fn default() -> Self {
        toml::from_str("").expect("every particle key has a default")
    }
}

fn default_levels() -> Vec<usize> {
    DEFAULT_LEVELS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityBlock {
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
}

impl Default for ContinuityBlock {
    fn default() -> Self {
        Self {
            levels: default_levels(),
        }
    }
}

fn default_resolutions() -> Vec<usize> {
    vec![256, 512, 1024]
}
fn default_ensemble() -> usize {
    100
}
fn default_gamma() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationBlock {
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    /// Regularity of the smooth factor in the product check.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Extra coefficient decay of sampled ensembles.
    #[serde(default = "default_eps_reg")]
    pub margin: f64,
}

impl Default for VerificationBlock {
    fn default() -> Self {
        toml::from_str("").expect("every verification key has a default")
    }
}

fn default_fd_steps() -> usize {
    2000
}
fn default_paths() -> usize {
    100_000
}
fn default_fk_steps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default = "default_fd_steps")]
    pub fd_steps: usize,
    #[serde(default = "default_paths")]
    pub fk_paths: usize,
    #[serde(default = "default_fk_steps")]
    pub fk_steps: usize,
    /// Probe points; five points around the domain centre when empty.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

impl Default for OracleBlock {
    fn default() -> Self {
        toml::from_str("").expect("every oracle key has a default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub grid: GridBlock,
    pub exponents: ExponentBlock,
    #[serde(default)]
    pub drift: DriftBlock,
    #[serde(default)]
    pub kernel: KernelBlock,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    /// Gaussian bump of width 2 at the centre when absent.
    #[serde(default)]
    pub initial: Option<InitialDensitySpec>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub particles: ParticlesBlock,
    #[serde(default)]
    pub continuity: ContinuityBlock,
    #[serde(default)]
    pub verification: VerificationBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Schema {
            path: origin.to_path_buf(),
            key: String::from("."),
            message: e.message().to_string(),
        })?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            path: origin.to_path_buf(),
            key: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let ExponentBlock { alpha, beta } = self.exponents;
        if !(0.0 < alpha && alpha < beta && beta < 0.5) {
            return bad(format!(
                "exponents must satisfy 0 < alpha < beta < 1/2 (got alpha = {alpha}, beta = {beta})"
            ));
        }
        self.grid()?;
        self.solver_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.nonlinear_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.nonlinearity.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.kernel.sigma > 0.0) {
            return bad(format!("kernel.sigma must be positive (got {})", self.kernel.sigma));
        }
        if let DriftBlock::Modes { modes, .. } = &self.drift {
            for m in modes {
                if m.k.len() != self.grid.dim || m.component >= self.grid.dim {
                    return bad(format!("drift mode {:?} does not fit dimension {}", m.k, self.grid.dim));
                }
            }
        }
        if self.particles.counts.is_empty() || self.particles.counts.contains(&0) {
            return bad("particles.counts must be non-empty and positive".into());
        }
        if self.verification.resolutions.is_empty() || self.verification.ensemble_size == 0 {
            return bad("verification needs resolutions and a positive ensemble size".into());
        }
        if self.experiment == ExperimentKind::FkCrosscheck && self.grid.dim != 1 {
            return bad("fk-crosscheck runs in one dimension".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.length).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            alpha: self.exponents.alpha,
            beta: self.exponents.beta,
            horizon: s.horizon,
            time_steps: s.time_steps,
            rho: s.rho,
            picard_tol: s.picard_tol,
            max_picard_iters: s.max_picard_iters,
            bony_c: s.bony_c,
        }
    }

    pub fn nonlinear_config(&self) -> NonlinearConfig {
        let s = &self.solver;
        NonlinearConfig {
            solver: self.solver_config(),
            outer_tol: s.outer_tol,
            max_outer_iters: s.max_outer_iters,
            outer_rho: s.outer_rho,
            c_fk: s.c_fk,
            uniqueness_probe: s.uniqueness_probe,
        }
    }

    pub fn initial_spec(&self) -> InitialDensitySpec {
        self.initial.clone().unwrap_or_else(|| InitialDensitySpec::GaussianBump {
            center: vec![self.grid.length / 2.0; self.grid.dim],
            width: 2.0,
        })
    }
}
