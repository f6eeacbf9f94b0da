//! Experiment configuration: a JSON-schema'd description of target, kernel,
//! initialization, step policy, and reference mode, plus output and tolerance knobs.
//!
//! Configs are strict: unknown keys are rejected everywhere so a typo cannot silently
//! fall back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::targets::TargetSpec;

/// Largest ensemble for exact Wasserstein checks in d >= 2.
pub const MAX_N_HIGH_DIM: usize = 512;
/// Largest ensemble in d = 1 (sorted-coupling Wasserstein).
pub const MAX_N_1D: usize = 100_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub kernel: KernelSpec,
    pub init: InitConfig,
    /// Descent parameter; any value above 1 is admissible.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub steps: StepPolicy,
    pub reference: ReferenceMode,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
}

/// Finite-particle initialization: the sampling distribution plus ensemble size/seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub dist: TargetSpec,
    pub n: usize,
    pub seed: u64,
}

/// How step sizes are chosen.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepPolicy {
    /// A fixed step repeated for a fixed number of rounds.
    Constant { eps: f64, rounds: usize },
    /// An explicit per-round list.
    Explicit { eps: Vec<f64> },
    /// Budgeted schedule: the step-size sum is chosen from the initial-gap estimate
    /// (failure probability `delta`) and filled greedily with cap-sized steps.
    Budget { delta: f64 },
}

/// The stand-in for the continuous-time trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceMode {
    /// A second, larger particle ensemble evolved on the same schedule.
    Ensemble { n_ref: usize, seed: u64 },
    /// A 1-D quadrature measure with density tracking (enables KL-based checks).
    Quadrature {
        nodes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; falls back to `--out`, then `SVGD_OUT_DIR`, then the cwd.
    pub dir: Option<PathBuf>,
    /// Filename prefix for emitted artifacts.
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, prefix: "run".into() }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    /// Slack tolerance for exact (roundoff-only) inequalities.
    pub hard_slack: f64,
    /// Slack tolerance for quadrature-dependent (soft) inequalities.
    pub soft_slack: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self { hard_slack: 1e-9, soft_slack: 1e-4 }
    }
}

fn default_alpha() -> f64 {
    2.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Structural validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        let target = self.target.build()?;
        let init = self.init.dist.build()?;
        if target.dim() != init.dim() {
            return Err(Error::Config(format!(
                "target dimension {} does not match init dimension {}",
                target.dim(),
                init.dim()
            )));
        }
        if self.init.n == 0 {
            return Err(Error::Config("init.n must be at least 1".into()));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Config(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        let n_cap = if target.dim() == 1 { MAX_N_1D } else { MAX_N_HIGH_DIM };
        if self.init.n > n_cap {
            return Err(Error::Config(format!(
                "init.n = {} exceeds the exact-Wasserstein cap {} in dimension {}",
                self.init.n,
                n_cap,
                target.dim()
            )));
        }
        match &self.steps {
            StepPolicy::Constant { eps, rounds: _ } => {
                if !eps.is_finite() || *eps < 0.0 {
                    return Err(Error::Config(format!(
                        "constant step must be finite and nonnegative, got {eps}"
                    )));
                }
            }
            StepPolicy::Explicit { eps } => {
                if eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
                    return Err(Error::Config(
                        "explicit steps must all be finite and nonnegative".into(),
                    ));
                }
            }
            StepPolicy::Budget { delta } => {
                if !(*delta > 0.0 && *delta <= 1.0) {
                    return Err(Error::Config(format!(
                        "budget delta must lie in (0, 1], got {delta}"
                    )));
                }
            }
        }
        match &self.reference {
            ReferenceMode::Ensemble { n_ref, seed: _ } => {
                if *n_ref == 0 || *n_ref > n_cap {
                    return Err(Error::Config(format!(
                        "reference.n_ref = {n_ref} outside [1, {n_cap}]"
                    )));
                }
            }
            ReferenceMode::Quadrature { nodes, lo, hi } => {
                if target.dim() != 1 {
                    return Err(Error::Config(
                        "quadrature reference mode requires a 1-D problem".into(),
                    ));
                }
                if *nodes < 3 {
                    return Err(Error::Config(format!(
                        "quadrature reference needs at least 3 nodes, got {nodes}"
                    )));
                }
                match (lo, hi) {
                    (Some(l), Some(h)) if !(l < h) => {
                        return Err(Error::Config(format!(
                            "quadrature interval [{l}, {h}] is empty"
                        )));
                    }
                    (Some(_), None) | (None, Some(_)) => {
                        return Err(Error::Config(
                            "quadrature lo/hi must be given together or not at all".into(),
                        ));
                    }
                    _ => {}
                }
            }
        }
        if !(self.verification.hard_slack >= 0.0 && self.verification.soft_slack >= 0.0) {
            return Err(Error::Config("verification tolerances must be nonnegative".into()));
        }
        Ok(())
    }

    /// Reference configuration used throughout the test suite: 1-D N(0,4) -> N(0,1),
    /// unit-bandwidth RBF kernel, 64 particles against a 640-particle reference,
    /// eps = 1/30 for 50 rounds.
    pub fn reference_ensemble() -> Self {
        Self {
            target: TargetSpec::standard_normal(1),
            kernel: KernelSpec::gaussian_rbf(1.0).expect("valid bandwidth"),
            init: InitConfig { dist: TargetSpec::gaussian_1d(0.0, 4.0), n: 64, seed: 17 },
            alpha: 2.0,
            steps: StepPolicy::Constant { eps: 1.0 / 30.0, rounds: 50 },
            reference: ReferenceMode::Ensemble { n_ref: 640, seed: 18 },
            output: OutputConfig::default(),
            verification: VerificationConfig::default(),
        }
    }

    /// Quadrature variant of the reference configuration (2001 nodes on [-12, 12]).
    pub fn reference_quadrature() -> Self {
        Self {
            reference: ReferenceMode::Quadrature {
                nodes: 2001,
                lo: Some(-12.0),
                hi: Some(12.0),
            },
            ..Self::reference_ensemble()
        }
    }
}
