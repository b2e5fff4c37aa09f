//! Run configuration: a single JSON document with every solver default
//! overridable. Unknown keys are rejected so configs stay reproducible.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use framedeconv_core::error::{Error, Result};
use framedeconv_core::restore::{BlurOperator, NoiseKind};
use framedeconv_core::solver::{LambdaSchedule, ProblemForm, SolverParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct RunConfig {
    /// Reference image (PGM or FSIG), the ground truth for metrics and the
    /// degradation input.
    pub input_image: PathBuf,
    /// Frame descriptor JSON path.
    pub frame: PathBuf,
    /// "sf" (synthesis) or "af" (analysis).
    pub form: FormField,
    pub noise: NoiseConfig,
    pub blur: BlurConfig,
    /// L1 regularization weight in the frame domain.
    pub tau: f64,
    /// Box constraint, default [0, 255].
    #[serde(default = "default_box")]
    pub r#box: [f64; 2],
    #[serde(default)]
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    /// Pre-degraded observation (FSIG) to restore; when absent the input
    /// image is degraded in-process with the configured noise and seed.
    #[serde(default)]
    pub observation: Option<PathBuf>,
    /// Record wall-clock seconds in metrics and trace files (off by
    /// default: reruns stay byte-identical).
    #[serde(default)]
    pub record_timing: bool,
}

fn default_box() -> [f64; 2] {
    [0.0, 255.0]
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormField {
    Sf,
    Af,
}

impl FormField {
    pub fn to_form(self) -> ProblemForm {
        match self {
            FormField::Sf => ProblemForm::Synthesis,
            FormField::Af => ProblemForm::Analysis,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct NoiseConfig {
    pub kind: NoiseKindField,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Laplace scale; defaults to 1/alpha.
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindField {
    None,
    Poisson,
    Laplace,
}

impl NoiseConfig {
    pub fn to_kind(&self) -> Result<NoiseKind> {
        match self.kind {
            NoiseKindField::None => Ok(NoiseKind::None),
            NoiseKindField::Poisson => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Parameter("poisson noise needs 'alpha'".into()))?;
                NoiseKind::poisson(alpha)
            }
            NoiseKindField::Laplace => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Parameter("laplace noise needs 'alpha'".into()))?;
                match self.scale {
                    Some(s) => NoiseKind::laplace_with_scale(alpha, s),
                    None => NoiseKind::laplace(alpha),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct BlurConfig {
    pub kind: BlurKindField,
    #[serde(default)]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BlurKindField {
    None,
    Uniform,
}

impl BlurConfig {
    pub fn to_operator(&self, rank: usize) -> Result<BlurOperator> {
        match self.kind {
            BlurKindField::None => Ok(BlurOperator::none(rank)),
            BlurKindField::Uniform => {
                let size = self
                    .size
                    .ok_or_else(|| Error::Parameter("uniform blur needs 'size'".into()))?;
                BlurOperator::uniform(size, rank)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct SolverConfig {
    /// Constant relaxation or an explicit nonincreasing schedule in (0, 2).
    #[serde(default = "default_lambda")]
    pub lambda: LambdaField,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// `[eta_fidelity, eta_box, kappa_regularizer]`.
    #[serde(default = "default_weights")]
    pub weights: [f64; 3],
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: default_lambda(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            log_every: default_log_every(),
            weights: default_weights(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LambdaField {
    Constant(f64),
    Schedule(Vec<f64>),
}

fn default_lambda() -> LambdaField {
    LambdaField::Constant(1.0)
}

fn default_max_iter() -> usize {
    2000
}

fn default_tol() -> f64 {
    1e-6
}

fn default_log_every() -> usize {
    10
}

fn default_weights() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

impl SolverConfig {
    pub fn to_params(&self) -> Result<SolverParams> {
        let schedule = match &self.lambda {
            LambdaField::Constant(v) => LambdaSchedule::constant(*v)?,
            LambdaField::Schedule(vs) => LambdaSchedule::new(vs.clone())?,
        };
        Ok(SolverParams::new(schedule, self.max_iter, self.tol)?.with_log_every(self.log_every))
    }
}

impl RunConfig {
    /// Loads a config and resolves every relative path against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config: {}", e)))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.input_image = base.join(&cfg.input_image);
        cfg.frame = base.join(&cfg.frame);
        cfg.output_dir = base.join(&cfg.output_dir);
        if let Some(obs) = cfg.observation.take() {
            cfg.observation = Some(base.join(obs));
        }
        Ok(cfg)
    }
}
