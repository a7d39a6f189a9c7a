//! Experiment configuration and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use robin_core::asymptotics::{ApproachSequence, EngineChoice, Evaluator, PathSpec, SequenceConfig};
use robin_core::domain_geometry::DomainSpec;
use robin_core::geodesics::{ShootConfig, ShortenConfig};
use robin_core::green_robin::FdOptions;
use robin_core::C64;

use crate::error::{LabError, LabResult};

/// Boundary target and the geometric approach toward it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    /// Boundary point as `[re, im]` pairs.
    pub target: Vec<[f64; 2]>,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_path")]
    pub path: PathSpec,
}

fn default_delta0() -> f64 {
    0.1
}
fn default_ratio() -> f64 {
    0.5
}
fn default_count() -> usize {
    7
}
fn default_path() -> PathSpec {
    PathSpec::Normal
}

impl SequenceSection {
    pub fn target(&self) -> Vec<C64> {
        self.target.iter().map(|p| C64::new(p[0], p[1])).collect()
    }

    pub fn sequence_config(&self) -> SequenceConfig {
        SequenceConfig {
            delta0: self.delta0,
            ratio: self.ratio,
            count: self.count,
            path: self.path.clone(),
        }
    }
}

/// Multi-index pair `(A, B)`, zero based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexPair {
    #[serde(default)]
    pub holo: Vec<usize>,
    #[serde(default)]
    pub anti: Vec<usize>,
}

fn tol_5e2() -> f64 {
    5e-2
}
fn tol_1e3() -> f64 {
    1e-3
}
fn tol_1e6() -> f64 {
    1e-6
}
fn default_indices() -> Vec<IndexPair> {
    vec![IndexPair {
        holo: vec![],
        anti: vec![],
    }]
}
fn default_bounds() -> (f64, f64) {
    (0.1, 10.0)
}
fn default_samples() -> usize {
    200
}
fn default_delta_min() -> f64 {
    1e-3
}
fn default_loop_points() -> usize {
    64
}
fn default_speed() -> f64 {
    0.5
}
fn default_floors() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5]
}

/// One selected check with its tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Holomorphic sectional curvature along the sequence.
    Curvature {
        #[serde(default = "tol_5e2")]
        tolerance: f64,
    },
    /// Scaled Robin derivatives against the half-space values.
    ScaledDerivatives {
        #[serde(default = "default_indices")]
        indices: Vec<IndexPair>,
        #[serde(default = "tol_5e2")]
        tolerance: f64,
    },
    /// Finite-difference against variation-formula derivatives of lambda.
    LambdaDerivatives {
        /// Differentiation index; the last coordinate when absent.
        #[serde(default)]
        gamma: Option<usize>,
        #[serde(default = "tol_1e3")]
        tolerance: f64,
    },
    /// Metric asymptotics, psi ratios and determinant ratios.
    MetricAsymptotics {
        #[serde(default = "tol_5e2")]
        tolerance: f64,
        #[serde(default = "tol_1e6")]
        determinant_tolerance: f64,
    },
    /// `|eta|^2 / ds^2` along the sequence and over collar samples.
    Ratio {
        #[serde(default = "tol_5e2")]
        tolerance: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_delta_min")]
        delta_min: f64,
    },
    /// Geodesic shooting, boundary length probe and loop shortening.
    Geodesic {
        #[serde(default)]
        shoot: ShootConfig,
        /// Initial Euclidean speed of the shot from the centre.
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default = "default_floors")]
        probe_floors: Vec<f64>,
        #[serde(default = "tol_5e2")]
        slope_tolerance: f64,
        #[serde(default)]
        shorten: ShortenConfig,
        #[serde(default = "default_loop_points")]
        loop_points: usize,
        #[serde(default = "default_loop_tolerance")]
        loop_tolerance: f64,
    },
    /// `ds^2` against its boundary surrogate over collar samples.
    Comparability {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_delta_min")]
        delta_min: f64,
        #[serde(default = "default_bounds")]
        bounds: (f64, f64),
    },
}

fn default_loop_tolerance() -> f64 {
    1e-4
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Curvature { .. } => "curvature",
            CheckSpec::ScaledDerivatives { .. } => "scaled_derivatives",
            CheckSpec::LambdaDerivatives { .. } => "lambda_derivatives",
            CheckSpec::MetricAsymptotics { .. } => "metric_asymptotics",
            CheckSpec::Ratio { .. } => "ratio",
            CheckSpec::Geodesic { .. } => "geodesic",
            CheckSpec::Comparability { .. } => "comparability",
        }
    }
}

fn default_engine() -> EngineChoice {
    EngineChoice::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    #[serde(default = "default_engine")]
    pub engine: EngineChoice,
    #[serde(default)]
    pub fd: FdOptions,
    pub sequence: SequenceSection,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::ConfigInvalid(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> LabResult<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> LabResult<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    /// Canonical JSON used for hashing and for the copy stored with a run.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn evaluator(&self) -> LabResult<Evaluator> {
        let domain = self.domain.build().map_err(|e| invalid(format!("domain: {e}")))?;
        Evaluator::new(domain, self.engine.clone(), self.fd.clone()).map_err(|e| invalid(format!("engine: {e}")))
    }

    pub fn approach(&self, eval: &Evaluator) -> LabResult<ApproachSequence> {
        ApproachSequence::build(&eval.domain, &self.sequence.target(), &self.sequence.sequence_config())
            .map_err(|e| invalid(format!("sequence: {e}")))
    }

    /// Everything that can be checked without running the numerics.
    pub fn validate(&self) -> LabResult<(Evaluator, ApproachSequence)> {
        let eval = self.evaluator()?;
        let seq = self.approach(&eval)?;
        let n = eval.domain.dim();
        if self.checks.is_empty() {
            return Err(invalid("no checks selected"));
        }
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {x}")))
            }
        };
        for c in &self.checks {
            match c {
                CheckSpec::Curvature { tolerance } => positive("curvature.tolerance", *tolerance)?,
                CheckSpec::ScaledDerivatives { indices, tolerance } => {
                    positive("scaled_derivatives.tolerance", *tolerance)?;
                    for ix in indices {
                        if ix.holo.iter().chain(&ix.anti).any(|&a| a >= n) {
                            return Err(invalid(format!("scaled_derivatives index out of range for n = {n}")));
                        }
                        if ix.holo.len() + ix.anti.len() > 2 {
                            return Err(invalid("scaled_derivatives supports |A| + |B| <= 2"));
                        }
                    }
                }
                CheckSpec::LambdaDerivatives { gamma, tolerance } => {
                    positive("lambda_derivatives.tolerance", *tolerance)?;
                    if gamma.is_some_and(|g| g >= n) {
                        return Err(invalid(format!("lambda_derivatives.gamma out of range for n = {n}")));
                    }
                }
                CheckSpec::MetricAsymptotics {
                    tolerance,
                    determinant_tolerance,
                } => {
                    positive("metric_asymptotics.tolerance", *tolerance)?;
                    positive("metric_asymptotics.determinant_tolerance", *determinant_tolerance)?;
                }
                CheckSpec::Ratio {
                    tolerance,
                    samples,
                    delta_min,
                } => {
                    positive("ratio.tolerance", *tolerance)?;
                    positive("ratio.delta_min", *delta_min)?;
                    if *samples == 0 {
                        return Err(invalid("ratio.samples must be positive"));
                    }
                }
                CheckSpec::Geodesic {
                    shoot,
                    speed,
                    probe_floors,
                    slope_tolerance,
                    loop_points,
                    loop_tolerance,
                    ..
                } => {
                    positive("geodesic.shoot.dt", shoot.dt)?;
                    positive("geodesic.speed", *speed)?;
                    positive("geodesic.slope_tolerance", *slope_tolerance)?;
                    positive("geodesic.loop_tolerance", *loop_tolerance)?;
                    if probe_floors.len() < 2 || probe_floors.iter().any(|f| !(*f > 0.0)) {
                        return Err(invalid("geodesic.probe_floors needs at least two positive values"));
                    }
                    if *loop_points < 16 {
                        return Err(invalid("geodesic.loop_points must be at least 16"));
                    }
                    if eval.domain.star_center().is_none() {
                        return Err(invalid("geodesic check needs a bounded star-shaped domain"));
                    }
                }
                CheckSpec::Comparability {
                    samples,
                    delta_min,
                    bounds,
                } => {
                    positive("comparability.delta_min", *delta_min)?;
                    if *samples == 0 || !(bounds.0 > 0.0 && bounds.0 < bounds.1) {
                        return Err(invalid("comparability needs samples > 0 and 0 < lower < upper"));
                    }
                    if *delta_min >= 0.5 * eval.domain.collar() {
                        return Err(invalid("comparability.delta_min must be below half the collar"));
                    }
                }
            }
        }
        Ok((eval, seq))
    }
}
