//! Policy planning: planner state to a validated sequence of parameterized
//! action primitives.

mod exec;
mod policy;
mod rules;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exec::{execute, ExecError, WorldObject};
pub use policy::{
    parse_policy, policy_to_json, serialize_policy, ActionKind, ActionParams, ActionPrimitive, Policy, Position,
    Provenance, Step, StepAction, Target,
};
pub use rules::plan_rule_based;
pub use validate::{validate_policy, ValidationReport, Violation, ViolationKind};

use crate::agent::{Agent, AgentError, AgentRequest, PLAN_TEMPLATE};
use crate::geometry::Point2;
use crate::interpreter::{serialize_o1, InterpretedCommand, TargetProperty};
use crate::scene::{BBox, ReferredObject, GENERIC_CATEGORY, POSITION_CATEGORY};
use crate::streams::Transcript;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("unsupported command: {0}")]
    UnsupportedCommand(String),
    #[error("agent: {0}")]
    RemoteAgentError(#[from] AgentError),
    #[error("malformed agent output: {}", .0.join("; "))]
    MalformedAgentOutput(Vec<String>),
    #[error("policy failed validation: {0}")]
    PolicyValidationError(ValidationReport),
    #[error("invalid planner state: {0}")]
    InvalidState(String),
}

/// Reachable region and motion limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workspace {
    /// Reachable part of the robot image, pixels.
    pub pixel_bounds: BBox,
    /// Reachable box in the robot base frame, meters.
    pub metric_min: [f64; 3],
    pub metric_max: [f64; 3],
    /// Free spot used as temporary storage when swapping, pixels.
    pub staging: Point2,
    pub max_distance_m: f64,
    pub max_angle_deg: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            pixel_bounds: BBox::new(0.0, 0.0, 1280.0, 720.0),
            metric_min: [-0.8, -0.8, 0.0],
            metric_max: [0.8, 0.8, 0.8],
            staging: Point2::new(640.0, 650.0),
            max_distance_m: 0.5,
            max_angle_deg: 360.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    /// Robot-view referred object per slot.
    pub referred: Vec<ReferredObject>,
    pub command: InterpretedCommand,
    pub transcript: Transcript,
    pub workspace: Workspace,
}

impl PlannerState {
    pub fn new(referred: Vec<ReferredObject>, command: InterpretedCommand, workspace: Workspace) -> Result<Self, PlanError> {
        let state = Self { transcript: command.transcript.clone(), referred, command, workspace };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.referred.len() != self.command.slots.len() {
            return Err(PlanError::InvalidState(format!(
                "{} referred objects for {} slots",
                self.referred.len(),
                self.command.slots.len()
            )));
        }
        Ok(())
    }

    /// Action label for slot `i`: the spoken category, or the detected
    /// category when the command was generic.
    pub fn label(&self, i: usize) -> String {
        let slot = &self.command.slots[i];
        let generic = slot.category == GENERIC_CATEGORY
            || (slot.category == POSITION_CATEGORY && slot.property == TargetProperty::Position);
        if generic {
            self.referred[i].observation.category.clone()
        } else {
            slot.category.clone()
        }
    }

    pub fn position(&self, i: usize) -> Point2 {
        self.referred[i].observation.position
    }

    /// `"apple at [412, 230.5]; table at [700, 400]"`.
    pub fn referred_summary(&self) -> String {
        (0..self.referred.len())
            .map(|i| {
                let p = self.position(i);
                format!("{} at [{}, {}]", self.label(i), p.x, p.y)
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    #[default]
    RuleBased,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub mode: PlannerMode,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
}

pub fn plan_request(state: &PlannerState, cfg: &PlannerConfig) -> AgentRequest {
    let mut vars = BTreeMap::new();
    vars.insert("command".to_string(), state.transcript.raw_text.clone());
    vars.insert("slots".to_string(), serialize_o1(&state.command));
    vars.insert("referred".to_string(), state.referred_summary());
    vars.insert("workspace".to_string(), serde_json::to_string(&state.workspace).expect("workspace serializes"));
    vars.insert("state".to_string(), serde_json::to_string(state).expect("state serializes"));
    let mut req = AgentRequest::new(PLAN_TEMPLATE, vars);
    if let Some(m) = &cfg.model_id {
        req.model_id = m.clone();
    }
    if let Some(t) = cfg.temperature {
        req.temperature = t;
    }
    req
}

/// Recovers the planner state from a plan request's variables.
pub fn state_from_request(req: &AgentRequest) -> Option<PlannerState> {
    serde_json::from_str(req.variables.get("state")?).ok()
}

fn checked(policy: Policy, state: &PlannerState) -> Result<Policy, PlanError> {
    let report = validate_policy(&policy, state);
    if report.is_valid() {
        Ok(policy)
    } else {
        Err(PlanError::PolicyValidationError(report))
    }
}

/// Plans through `agent` and validates the reply.
pub fn plan_with_agent(state: &PlannerState, cfg: &PlannerConfig, agent: &dyn Agent) -> Result<Policy, PlanError> {
    state.validate()?;
    let reply = agent.complete(&plan_request(state, cfg))?;
    checked(parse_policy(&reply.text, Provenance::Remote)?, state)
}

/// Plans according to `cfg.mode`; the result always passes [`validate_policy`].
pub fn plan(state: &PlannerState, cfg: &PlannerConfig, agent: Option<&dyn Agent>) -> Result<Policy, PlanError> {
    match cfg.mode {
        PlannerMode::RuleBased => {
            state.validate()?;
            checked(plan_rule_based(state)?, state)
        }
        PlannerMode::Remote => plan_with_agent(
            state,
            cfg,
            agent.ok_or_else(|| PlanError::InvalidState("remote planning needs an agent".into()))?,
        ),
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}
