use std::fmt;

use serde::{Deserialize, Serialize};

use super::policy::{ActionPrimitive, Policy, Position, Step};
use super::{PlannerState, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Empty,
    Membership,
    Arity,
    Workspace,
    Dimensionality,
    GripperLogic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {i}: {:?}: {}", self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, step: Option<usize>, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation { step, kind, message: message.into() });
    }
}

/// Which params a primitive takes: (target, second target, distance, angle).
fn signature(p: ActionPrimitive) -> (bool, bool, bool, bool) {
    use ActionPrimitive::*;
    match p {
        Pick | Put | Pour | MoveTo => (true, false, false, false),
        Swap => (true, true, false, false),
        MoveX | MoveY | MoveZ => (false, false, true, false),
        Rotate => (false, false, false, true),
        OpenGripper | CloseGripper => (false, false, false, false),
    }
}

fn check_arity(i: usize, p: ActionPrimitive, step: &Step, report: &mut ValidationReport) {
    let (target, second, distance, angle) = signature(p);
    let params = &step.params;
    let mut expect = |present: bool, wanted: bool, field: &str| {
        if present && !wanted {
            report.push(Some(i), ViolationKind::Arity, format!("{p} takes no {field}"));
        } else if !present && wanted {
            report.push(Some(i), ViolationKind::Arity, format!("{p} requires {field}"));
        }
    };
    expect(params.label.is_some(), target, "label");
    expect(params.position.is_some(), target, "position");
    expect(params.second.is_some(), second, "second target");
    expect(params.distance.is_some(), distance, "distance");
    expect(params.angle.is_some(), angle, "angle");
    if params.label.as_deref().is_some_and(|l| l.trim().is_empty())
        || params.second.as_ref().is_some_and(|s| s.label.trim().is_empty())
    {
        report.push(Some(i), ViolationKind::Arity, format!("{p} has an empty label"));
    }
}

fn in_workspace(pos: &Position, ws: &Workspace) -> bool {
    match pos {
        Position::Pixel(p) => ws.pixel_bounds.contains(p),
        Position::Metric(p) => [p.x, p.y, p.z]
            .iter()
            .zip(ws.metric_min.iter().zip(&ws.metric_max))
            .all(|(v, (lo, hi))| lo <= v && v <= hi),
    }
}

fn describe(pos: &Position) -> String {
    match pos {
        Position::Pixel(p) => format!("[{}, {}]", p.x, p.y),
        Position::Metric(p) => format!("[{}, {}, {}]", p.x, p.y, p.z),
    }
}

/// Checks membership, arity, workspace bounds, position dimensionality and
/// gripper logic. Returns every violation found.
pub fn validate_policy(policy: &Policy, state: &PlannerState) -> ValidationReport {
    let ws = &state.workspace;
    let mut report = ValidationReport::default();
    if policy.steps.is_empty() {
        report.push(None, ViolationKind::Empty, "policy has no steps");
        return report;
    }

    let mut dims: Option<(usize, usize)> = None;
    for (i, step) in policy.steps.iter().enumerate() {
        let Some(p) = step.action.primitive() else {
            report.push(Some(i), ViolationKind::Membership, format!("unknown primitive {:?}", step.action.name()));
            continue;
        };
        check_arity(i, p, step, &mut report);

        let positions = step.params.position.iter().chain(step.params.second.iter().map(|s| &s.position));
        for pos in positions {
            if !in_workspace(pos, ws) {
                report.push(Some(i), ViolationKind::Workspace, format!("position {} outside workspace", describe(pos)));
            }
            match dims {
                None => dims = Some((pos.dims(), i)),
                Some((d, first)) if d != pos.dims() => report.push(
                    Some(i),
                    ViolationKind::Dimensionality,
                    format!("{}-D position, but step {first} uses {d}-D", pos.dims()),
                ),
                _ => {}
            }
        }
        if let Some(d) = step.params.distance {
            if d.abs() > ws.max_distance_m {
                report.push(Some(i), ViolationKind::Workspace, format!("distance {d} m exceeds {} m", ws.max_distance_m));
            }
        }
        if let Some(a) = step.params.angle {
            if a.abs() > ws.max_angle_deg {
                report.push(Some(i), ViolationKind::Workspace, format!("angle {a} deg exceeds {} deg", ws.max_angle_deg));
            }
        }
    }

    check_gripper(policy, &mut report);
    report
}

fn check_gripper(policy: &Policy, report: &mut ValidationReport) {
    use ActionPrimitive::*;
    let prim = |j: Option<usize>| j.and_then(|j| policy.steps.get(j)).and_then(|s| s.action.primitive());
    let mut holding = false;
    for (i, step) in policy.steps.iter().enumerate() {
        let Some(p) = step.action.primitive() else { continue };
        let before = prim(i.checked_sub(1));
        let after = prim(Some(i + 1));
        match p {
            Pick => {
                if before != Some(OpenGripper) {
                    report.push(Some(i), ViolationKind::GripperLogic, "pick is not preceded by open_gripper");
                }
                if after != Some(CloseGripper) {
                    report.push(Some(i), ViolationKind::GripperLogic, "pick is not followed by close_gripper");
                }
                if holding {
                    report.push(Some(i), ViolationKind::GripperLogic, "pick while already holding an object");
                }
                holding = true;
            }
            Put => {
                if !holding {
                    report.push(Some(i), ViolationKind::GripperLogic, "put without a held object");
                }
                if after != Some(OpenGripper) {
                    report.push(Some(i), ViolationKind::GripperLogic, "put is not followed by open_gripper");
                }
                holding = false;
            }
            Pour => {
                if !holding {
                    report.push(Some(i), ViolationKind::GripperLogic, "pour without a held container");
                }
            }
            Swap => {
                if holding {
                    report.push(Some(i), ViolationKind::GripperLogic, "swap while holding an object");
                }
            }
            OpenGripper => holding = false,
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Point3};
    use crate::interpreter::{interpret, timed_transcript, InterpreterConfig};
    use crate::planner::policy::{ActionParams, Provenance, StepAction, Target};
    use crate::scene::{BBox, ObjectObservation, ReferredObject, View};

    fn state() -> PlannerState {
        let t = timed_transcript("put the apple there on the table", 0.0, 0.3, 0.05).unwrap();
        let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
        let referred = [("r_apple", "apple", 412.0, 230.5), ("r_table", "table", 700.0, 400.0)]
            .iter()
            .map(|&(id, c, x, y)| ReferredObject {
                view: View::Robot,
                observation: ObjectObservation::new(id, c, BBox::centered(Point2::new(x, y), 20.0, 20.0), None),
            })
            .collect();
        PlannerState::new(referred, cmd, Workspace::default()).unwrap()
    }

    fn px(x: f64, y: f64) -> Position {
        Position::Pixel(Point2::new(x, y))
    }

    fn policy(steps: Vec<Step>) -> Policy {
        Policy { steps, provenance: Provenance::Remote }
    }

    fn paper_policy() -> Vec<Step> {
        vec![
            Step::bare(ActionPrimitive::OpenGripper),
            Step::new(ActionPrimitive::Pick, ActionParams::target("apple", px(412.0, 230.5))),
            Step::bare(ActionPrimitive::CloseGripper),
            Step::new(ActionPrimitive::Put, ActionParams::target("table", px(700.0, 400.0))),
            Step::bare(ActionPrimitive::OpenGripper),
        ]
    }

    #[test]
    fn paper_policy_is_valid() {
        assert!(validate_policy(&policy(paper_policy()), &state()).is_valid());
    }

    #[test]
    fn missing_final_open_is_flagged() {
        let mut steps = paper_policy();
        steps.pop();
        let r = validate_policy(&policy(steps), &state());
        assert!(r.has(ViolationKind::GripperLogic));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].step, Some(3));
    }

    #[test]
    fn unknown_primitive_is_flagged() {
        let steps = vec![Step { action: StepAction::Unknown("Throw".into()), params: ActionParams::default() }];
        let r = validate_policy(&policy(steps), &state());
        assert!(r.has(ViolationKind::Membership));
    }

    #[test]
    fn arity_bounds_and_dimensions() {
        let steps = vec![
            Step::new(ActionPrimitive::MoveTo, ActionParams::target("cup", px(2000.0, 10.0))),
            Step::new(ActionPrimitive::MoveTo, ActionParams::target("cup", Position::Metric(Point3::new(0.1, 0.1, 0.1)))),
            Step::new(ActionPrimitive::MoveZ, ActionParams { angle: Some(3.0), ..Default::default() }),
            Step::new(ActionPrimitive::Rotate, ActionParams::angle(720.0)),
            Step::new(
                ActionPrimitive::Swap,
                ActionParams {
                    second: Some(Target { label: "b".into(), position: px(1.0, 1.0) }),
                    ..ActionParams::target("a", px(2.0, 2.0))
                },
            ),
        ];
        let r = validate_policy(&policy(steps), &state());
        assert!(r.has(ViolationKind::Workspace));
        assert!(r.has(ViolationKind::Dimensionality));
        let arity: Vec<_> = r.violations.iter().filter(|v| v.kind == ViolationKind::Arity).map(|v| v.step).collect();
        assert_eq!(arity, vec![Some(2), Some(2)]);
        assert_eq!(r.violations.iter().filter(|v| v.kind == ViolationKind::Workspace).count(), 2);
    }

    #[test]
    fn pick_needs_gripper_bracket() {
        let steps = vec![Step::new(ActionPrimitive::Pick, ActionParams::target("apple", px(1.0, 1.0)))];
        let r = validate_policy(&policy(steps), &state());
        assert_eq!(r.violations.len(), 2);
        assert!(validate_policy(&policy(vec![]), &state()).has(ViolationKind::Empty));
    }
}
