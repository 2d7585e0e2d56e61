//! Action primitives, parameters and the policy JSON codec.
//!
//! Wire form: `[["pick", {"label": "apple", "position": [412.0, 230.5]}], ...]`.
//! Serialization is canonical (sorted keys, no whitespace) so equal policies
//! serialize to identical bytes.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::PlanError;
use crate::geometry::{Point2, Point3};
use crate::interpreter::strip_code_fence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionPrimitive {
    Pick,
    Put,
    Pour,
    Swap,
    MoveTo,
    MoveX,
    MoveY,
    MoveZ,
    OpenGripper,
    CloseGripper,
    Rotate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Composite,
    Atomic,
}

impl ActionPrimitive {
    pub const ALL: [ActionPrimitive; 11] = [
        Self::Pick,
        Self::Put,
        Self::Pour,
        Self::Swap,
        Self::MoveTo,
        Self::MoveX,
        Self::MoveY,
        Self::MoveZ,
        Self::OpenGripper,
        Self::CloseGripper,
        Self::Rotate,
    ];

    pub fn kind(self) -> ActionKind {
        match self {
            Self::Pick | Self::Put | Self::Pour | Self::Swap | Self::MoveTo => ActionKind::Composite,
            _ => ActionKind::Atomic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pick => "pick",
            Self::Put => "put",
            Self::Pour => "pour",
            Self::Swap => "swap",
            Self::MoveTo => "move_to",
            Self::MoveX => "move_x",
            Self::MoveY => "move_y",
            Self::MoveZ => "move_z",
            Self::OpenGripper => "open_gripper",
            Self::CloseGripper => "close_gripper",
            Self::Rotate => "rotate",
        }
    }

    /// Accepts `open_gripper`, `open gripper`, `OpenGripper`, `move-to`, ...
    pub fn from_name(s: &str) -> Option<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Self::ALL.into_iter().find(|p| p.name().replace('_', "") == key)
    }
}

impl fmt::Display for ActionPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A step's action; names outside the primitive set are kept so validation
/// can report them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepAction {
    Primitive(ActionPrimitive),
    Unknown(String),
}

impl StepAction {
    pub fn name(&self) -> &str {
        match self {
            Self::Primitive(p) => p.name(),
            Self::Unknown(s) => s,
        }
    }

    pub fn primitive(&self) -> Option<ActionPrimitive> {
        match self {
            Self::Primitive(p) => Some(*p),
            Self::Unknown(_) => None,
        }
    }
}

impl From<ActionPrimitive> for StepAction {
    fn from(p: ActionPrimitive) -> Self {
        Self::Primitive(p)
    }
}

/// Robot-image pixels (2-D) or workspace meters (3-D).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Position {
    Pixel(Point2),
    Metric(Point3),
}

impl Position {
    pub fn dims(&self) -> usize {
        match self {
            Self::Pixel(_) => 2,
            Self::Metric(_) => 3,
        }
    }

    fn to_json(self) -> Value {
        match self {
            Self::Pixel(p) => json!([p.x, p.y]),
            Self::Metric(p) => json!([p.x, p.y, p.z]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub label: String,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionParams {
    pub label: Option<String>,
    pub position: Option<Position>,
    /// Second operand of `swap`.
    pub second: Option<Target>,
    /// Meters.
    pub distance: Option<f64>,
    /// Degrees.
    pub angle: Option<f64>,
}

impl ActionParams {
    pub fn target(label: impl Into<String>, position: Position) -> Self {
        Self { label: Some(label.into()), position: Some(position), ..Self::default() }
    }

    pub fn distance(d: f64) -> Self {
        Self { distance: Some(d), ..Self::default() }
    }

    pub fn angle(a: f64) -> Self {
        Self { angle: Some(a), ..Self::default() }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        if let Some(l) = &self.label {
            m.insert("label".into(), json!(l));
        }
        if let Some(p) = self.position {
            m.insert("position".into(), p.to_json());
        }
        if let Some(s) = &self.second {
            m.insert("second".into(), json!({"label": s.label, "position": s.position.to_json()}));
        }
        if let Some(d) = self.distance {
            m.insert("distance".into(), json!(d));
        }
        if let Some(a) = self.angle {
            m.insert("angle".into(), json!(a));
        }
        Value::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: StepAction,
    pub params: ActionParams,
}

impl Step {
    pub fn new(p: ActionPrimitive, params: ActionParams) -> Self {
        Self { action: p.into(), params }
    }

    pub fn bare(p: ActionPrimitive) -> Self {
        Self::new(p, ActionParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RuleBased,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub steps: Vec<Step>,
    pub provenance: Provenance,
}

impl Policy {
    pub fn action_names(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.action.name().to_string()).collect()
    }
}

pub fn policy_to_json(policy: &Policy) -> Value {
    Value::Array(policy.steps.iter().map(|s| json!([s.action.name(), s.params.to_json()])).collect())
}

/// Canonical compact JSON.
pub fn serialize_policy(policy: &Policy) -> String {
    policy_to_json(policy).to_string()
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn parse_position(v: &Value, at: &str) -> Result<Position, String> {
    let arr = v.as_array().ok_or_else(|| format!("{at}: expected an array of numbers, found {}", type_name(v)))?;
    let mut xs = Vec::with_capacity(arr.len());
    for (i, x) in arr.iter().enumerate() {
        let n = x
            .as_f64()
            .filter(|n| n.is_finite())
            .ok_or_else(|| format!("{at}[{i}]: expected a finite number, found {}", type_name(x)))?;
        xs.push(n);
    }
    match xs.as_slice() {
        [x, y] => Ok(Position::Pixel(Point2::new(*x, *y))),
        [x, y, z] => Ok(Position::Metric(Point3::new(*x, *y, *z))),
        _ => Err(format!("{at}: expected 2 or 3 coordinates, found {}", xs.len())),
    }
}

fn parse_params(v: &Value, at: &str) -> Result<ActionParams, Vec<String>> {
    let obj = match v {
        Value::Object(o) => o.clone(),
        // `["pick", "apple", [x, y]]`-style positional params are not accepted
        other => return Err(vec![format!("{at}: expected an object, found {}", type_name(other))]),
    };
    let mut errs = Vec::new();
    let mut p = ActionParams::default();
    for (k, val) in &obj {
        let here = format!("{at}.{k}");
        match k.as_str() {
            "label" => match val.as_str() {
                Some(s) => p.label = Some(s.to_string()),
                None => errs.push(format!("{here}: expected a string, found {}", type_name(val))),
            },
            "position" => match parse_position(val, &here) {
                Ok(pos) => p.position = Some(pos),
                Err(e) => errs.push(e),
            },
            "second" => {
                let label = val.get("label").and_then(Value::as_str);
                let pos = val.get("position").map(|x| parse_position(x, &format!("{here}.position")));
                match (label, pos) {
                    (Some(l), Some(Ok(position))) => p.second = Some(Target { label: l.to_string(), position }),
                    (_, Some(Err(e))) => errs.push(e),
                    _ => errs.push(format!("{here}: expected {{\"label\": string, \"position\": [x, y]}}")),
                }
            }
            "distance" | "angle" => match val.as_f64().filter(|n| n.is_finite()) {
                Some(n) if k == "distance" => p.distance = Some(n),
                Some(n) => p.angle = Some(n),
                None => errs.push(format!("{here}: expected a finite number, found {}", type_name(val))),
            },
            _ => errs.push(format!("{here}: unknown parameter")),
        }
    }
    if errs.is_empty() {
        Ok(p)
    } else {
        Err(errs)
    }
}

/// Parses policy JSON. Key order and whitespace are irrelevant; errors name
/// the offending step.
pub fn parse_policy(text: &str, provenance: Provenance) -> Result<Policy, PlanError> {
    let malformed = |m: Vec<String>| PlanError::MalformedAgentOutput(m);
    let v: Value = serde_json::from_str(strip_code_fence(text))
        .map_err(|e| malformed(vec![format!("line {} column {}: {e}", e.line(), e.column())]))?;
    let arr = v
        .as_array()
        .ok_or_else(|| malformed(vec![format!("policy: expected an array of steps, found {}", type_name(&v))]))?;
    let mut errs = Vec::new();
    let mut steps = Vec::new();
    for (i, s) in arr.iter().enumerate() {
        let at = format!("step {i}");
        let pair = match s.as_array() {
            Some(p) if (1..=2).contains(&p.len()) => p,
            _ => {
                errs.push(format!("{at}: expected [name, params]"));
                continue;
            }
        };
        let Some(name) = pair[0].as_str() else {
            errs.push(format!("{at}: name: expected a string, found {}", type_name(&pair[0])));
            continue;
        };
        let action = ActionPrimitive::from_name(name)
            .map(StepAction::Primitive)
            .unwrap_or_else(|| StepAction::Unknown(name.to_string()));
        let params = match pair.get(1) {
            None | Some(Value::Null) => Ok(ActionParams::default()),
            Some(v) => parse_params(v, &format!("{at}.params")),
        };
        match params {
            Ok(params) => steps.push(Step { action, params }),
            Err(e) => errs.extend(e),
        }
    }
    if errs.is_empty() {
        Ok(Policy { steps, provenance })
    } else {
        Err(malformed(errs))
    }
}
