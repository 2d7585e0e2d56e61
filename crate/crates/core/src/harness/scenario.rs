//! Scenario files: everything needed to replay one interaction offline.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignConfig, MatchNoise};
use crate::geometry::{Point3, Pose};
use crate::interpreter::{interpret, InterpreterConfig};
use crate::planner::Workspace;
use crate::scene::AnnotatedScene;
use crate::streams::{FrameRef, GazeRecord, Transcript, DEFAULT_GAZE_RATE_HZ};

pub const SCHEMA_VERSION: u32 = 1;

/// Gaze range assumed when a record only gives a direction.
pub const DEFAULT_GAZE_DEPTH_M: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("scenario {id}: {message}")]
    Invalid { id: String, message: String },
}

/// Gaze sample as stored on disk: either a pupil-frame point or a direction
/// with optional depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    pub head_pose: Pose,
}

impl GazeSample {
    pub fn gaze_point(&self) -> Result<Point3, String> {
        match (self.point, self.direction) {
            (Some(p), None) => Ok(Point3::new(p[0], p[1], p[2])),
            (None, Some(d)) => {
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if !(n > 0.0 && n.is_finite()) {
                    return Err("gaze direction has zero or non-finite length".into());
                }
                let depth = self.depth.unwrap_or(DEFAULT_GAZE_DEPTH_M);
                Ok(Point3::new(d[0] / n * depth, d[1] / n * depth, d[2] / n * depth))
            }
            (Some(_), Some(_)) => Err("give either point or direction, not both".into()),
            (None, None) => Err("missing point or direction".into()),
        }
    }
}

fn default_rate() -> f64 {
    DEFAULT_GAZE_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeStream {
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    /// Calibration from pupil frame to glasses camera.
    pub pupil_to_camera: Pose,
    pub records: Vec<GazeSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondence {
    pub human: String,
    pub robot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Per-slot isotropic gaze offset in the table plane, cm.
    pub gaze_sigma_cm: f64,
    /// Extra independent jitter on every gaze sample, cm.
    pub per_sample_sigma_cm: f64,
    /// Image scale at the table plane in the human view.
    pub px_per_cm: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { gaze_sigma_cm: 0.0, per_sample_sigma_cm: 0.0, px_per_cm: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedSlot {
    pub human: String,
    pub robot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub slots: Vec<ExpectedSlot>,
    /// Primitive names of the expected policy, in order.
    pub actions: Vec<String>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub id: String,
    /// Row id in the command-template table (e.g. `T03`).
    pub command_template: String,
    #[serde(default)]
    pub seed: u64,
    pub transcript: Transcript,
    pub gaze: GazeStream,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<FrameRef>,
    pub human_view: AnnotatedScene,
    pub robot_view: AnnotatedScene,
    pub correspondences: Vec<Correspondence>,
    #[serde(default)]
    pub matcher: MatchNoise,
    #[serde(default)]
    pub alignment: AlignConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub interpreter: InterpreterConfig,
    #[serde(default)]
    pub workspace: Workspace,
    /// Raw agent replies by prompt template id, used instead of the agent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub agent_overrides: BTreeMap<String, String>,
    pub expected: Expected,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse { path: "<string>".into(), message: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: p.clone(), source })?;
        let s: Scenario =
            serde_json::from_str(&text).map_err(|e| ScenarioError::Parse { path: p.clone(), message: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid { id: self.id.clone(), message: message.into() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(self.invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.id.trim().is_empty() {
            return Err(self.invalid("empty id"));
        }
        self.transcript.validate().map_err(|e| self.invalid(format!("transcript: {e}")))?;
        self.human_view.validate().map_err(|e| self.invalid(format!("human_view: {e}")))?;
        self.robot_view.validate().map_err(|e| self.invalid(format!("robot_view: {e}")))?;
        if !(self.gaze.rate_hz > 0.0 && self.gaze.rate_hz.is_finite()) {
            return Err(self.invalid("gaze.rate_hz must be positive"));
        }
        for (i, r) in self.gaze.records.iter().enumerate() {
            if !r.t.is_finite() {
                return Err(self.invalid(format!("gaze.records[{i}].t is not finite")));
            }
            r.gaze_point().map_err(|e| self.invalid(format!("gaze.records[{i}]: {e}")))?;
        }
        if self.gaze.records.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(self.invalid("gaze records are not time-ordered"));
        }
        if self.noise.px_per_cm.is_nan() || self.noise.px_per_cm <= 0.0 || self.noise.gaze_sigma_cm < 0.0 || self.noise.per_sample_sigma_cm < 0.0 {
            return Err(self.invalid("noise: px_per_cm must be positive and sigmas non-negative"));
        }
        if !(0.0..=1.0).contains(&self.matcher.outlier_rate) || self.matcher.jitter_px < 0.0 {
            return Err(self.invalid("matcher: outlier_rate must be in [0, 1] and jitter non-negative"));
        }

        let mut seen = BTreeSet::new();
        for c in &self.correspondences {
            if self.human_view.get(&c.human).is_none() {
                return Err(self.invalid(format!("correspondence references unknown human object {:?}", c.human)));
            }
            if self.robot_view.get(&c.robot).is_none() {
                return Err(self.invalid(format!("correspondence references unknown robot object {:?}", c.robot)));
            }
            if !seen.insert(c.human.as_str()) {
                return Err(self.invalid(format!("human object {:?} has two correspondences", c.human)));
            }
        }
        for (i, e) in self.expected.slots.iter().enumerate() {
            if self.human_view.get(&e.human).is_none() {
                return Err(self.invalid(format!("expected.slots[{i}].human {:?} not in human_view", e.human)));
            }
            if self.robot_view.get(&e.robot).is_none() {
                return Err(self.invalid(format!("expected.slots[{i}].robot {:?} not in robot_view", e.robot)));
            }
        }
        let referential = interpret(&self.transcript, &InterpreterConfig::default())
            .map(|c| c.slots.len())
            .map_err(|e| self.invalid(format!("transcript: {e}")))?;
        if referential != self.expected.slots.len() {
            return Err(self.invalid(format!(
                "expected {} slots but the command has {referential} referential expressions",
                self.expected.slots.len()
            )));
        }
        Ok(())
    }

    pub fn gaze_records(&self) -> Vec<GazeRecord> {
        self.gaze
            .records
            .iter()
            .map(|r| GazeRecord {
                t: r.t,
                gaze_pupil: r.gaze_point().expect("validated gaze sample"),
                head_pose: r.head_pose.clone(),
            })
            .collect()
    }

    pub fn robot_for(&self, human_id: &str) -> Option<&str> {
        self.correspondences.iter().find(|c| c.human == human_id).map(|c| c.robot.as_str())
    }
}
