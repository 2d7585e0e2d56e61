//! Success rate, gaze error, task complexity and CSV export.

use serde::{Deserialize, Serialize};

use super::pipeline::RunResult;
use super::scenario::Scenario;
use crate::planner::{ActionPrimitive, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_total: usize,
    pub n_correct: usize,
    /// Percent.
    pub success_rate: f64,
    pub gaze_error_mean_cm: Option<f64>,
    pub gaze_error_std_cm: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        Some((xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    (Some(mean), std)
}

/// Aggregates runs; the result does not depend on their order.
pub fn success_rate(results: &[RunResult]) -> Metrics {
    let n_total = results.len();
    let n_correct = results.iter().filter(|r| r.success).count();
    let mut errors: Vec<f64> = results.iter().flat_map(|r| r.slots.iter().filter_map(|s| s.gaze_error_cm)).collect();
    errors.sort_by(f64::total_cmp);
    let (gaze_error_mean_cm, gaze_error_std_cm) = mean_std(&errors);
    Metrics {
        n_total,
        n_correct,
        success_rate: if n_total == 0 { 0.0 } else { 100.0 * n_correct as f64 / n_total as f64 },
        gaze_error_mean_cm,
        gaze_error_std_cm,
    }
}

/// Mean over slots of the distance between the weighted gaze point and the
/// expected object's anchor, cm.
pub fn gaze_error(result: &RunResult, scenario: &Scenario) -> Option<f64> {
    let errs: Vec<f64> = result
        .slots
        .iter()
        .filter_map(|s| {
            let anchor = scenario.human_view.get(&s.expected_human)?.anchor();
            Some(s.gaze_mean_px?.distance(&anchor) / scenario.noise.px_per_cm)
        })
        .collect();
    mean_std(&errs).0
}

/// Per-axis sigma whose isotropic 2-D Gaussian has the given mean radial
/// error (Rayleigh mean `σ·√(π/2)`).
pub fn rayleigh_sigma_for_mean(mean_error: f64) -> f64 {
    mean_error / (std::f64::consts::PI / 2.0).sqrt()
}

/// One row of the command-template table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TemplateRow {
    pub id: &'static str,
    pub pattern: &'static str,
    /// Concrete command used by the generated scenario.
    pub instance: &'static str,
    pub referred_object: bool,
    pub params: u32,
    pub actions: u32,
    pub complexity: u32,
}

macro_rules! row {
    ($id:literal, $pat:literal, $inst:literal, $referred:literal, $p:literal, $a:literal, $c:literal) => {
        TemplateRow {
            id: $id,
            pattern: $pat,
            instance: $inst,
            referred_object: $referred,
            params: $p,
            actions: $a,
            complexity: $c,
        }
    };
}

/// Parameters, actions and complexity per command template. Action counts
/// follow the table's own convention and are data, not derived from policies.
pub const TEMPLATES: [TemplateRow; 16] = [
    row!("T01", "pick up the <object>", "pick up the apple", true, 1, 1, 2),
    row!("T02", "grab the pieces (S1)", "grab the pieces", true, 1, 1, 2),
    row!("T03", "put the <object> on the <plate>", "put the apple on the plate", true, 2, 3, 5),
    row!(
        "T04",
        "put the <object> on the <plate> then pour some thing from the <cup> on it",
        "put the apple on the plate then pour something from the cup on it",
        true, 4, 6, 10
    ),
    row!("T05", "put this <object> <there> (position on table)", "put this apple there", true, 2, 3, 5),
    row!("T06", "put the <object1> and <object2> on the <plate>", "put the apple and pear on the plate", true, 3, 6, 9),
    row!(
        "T07",
        "put the <object1> on the <plate1> then put the <object2> on the <plate2>",
        "put the apple on the plate then put the pear on the plate",
        true, 4, 6, 10
    ),
    row!(
        "T08",
        "grab the <object> and lift up for <distance> then turn it for <angle> degrees",
        "grab the apple and lift up for 10 centimeters then turn it for 90 degrees",
        true, 3, 3, 6
    ),
    row!("T09", "pick up this", "pick up this", false, 1, 1, 2),
    row!("T10", "grab this (S1)", "grab this", false, 1, 1, 2),
    row!("T11", "put this on that", "put this on that", false, 2, 3, 5),
    row!(
        "T12",
        "put this on that then pour something from this on it",
        "put this on that then pour something from this on it",
        false, 4, 6, 10
    ),
    row!("T13", "put this <there> (position on table)", "put this there", false, 2, 3, 5),
    row!("T14", "put this and this on that", "put this and this on that", false, 3, 6, 9),
    row!("T15", "put this on this then put this on that", "put this on this then put this on that", false, 4, 6, 10),
    row!(
        "T16",
        "grab this and lift it up for <distance> then turn it for <angle> degrees",
        "grab this and lift it up for 10 centimeters then turn it for 90 degrees",
        false, 3, 3, 6
    ),
];

pub fn template(id: &str) -> Option<&'static TemplateRow> {
    TEMPLATES.iter().find(|r| r.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    pub params: u32,
    pub actions: u32,
    pub total: u32,
}

/// Task complexity: actions plus parameters.
///
/// Known templates use the table. For anything else the count is estimated
/// from the policy: distinct targets plus scalar parameters, and non-gripper
/// steps as actions.
pub fn complexity(template_id: &str, policy: &Policy) -> Complexity {
    if let Some(r) = template(template_id) {
        return Complexity { params: r.params, actions: r.actions, total: r.complexity };
    }
    let mut targets: Vec<(String, String)> = Vec::new();
    let mut scalars = 0;
    let mut actions = 0;
    for step in &policy.steps {
        let p = step.action.primitive();
        if !matches!(p, Some(ActionPrimitive::OpenGripper | ActionPrimitive::CloseGripper)) {
            actions += 1;
        }
        if let (Some(l), Some(pos)) = (&step.params.label, &step.params.position) {
            let key = (l.clone(), format!("{pos:?}"));
            if !targets.contains(&key) {
                targets.push(key);
            }
        }
        scalars += u32::from(step.params.distance.is_some()) + u32::from(step.params.angle.is_some());
    }
    let params = targets.len() as u32 + scalars;
    Complexity { params, actions, total: params + actions }
}

pub const TRIAL_CSV_HEADER: &str = "scenario_id,trial,slot,selected_id,expected_id,success,gaze_error_cm,stage";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per slot; `selected_id` is the robot-view object the run ended on.
pub fn trial_csv_rows(r: &RunResult) -> Vec<String> {
    let stage = r.failure_stage.map_or("ok", |s| s.as_str());
    r.slots
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{},{},{},{}",
                csv_field(&r.scenario_id),
                r.trial,
                s.slot,
                csv_field(s.robot_id.as_deref().unwrap_or("")),
                csv_field(&s.expected_robot),
                r.success,
                s.gaze_error_cm.map(|e| format!("{e:.6}")).unwrap_or_default(),
                stage
            )
        })
        .collect()
}

pub fn trial_csv(results: &[RunResult]) -> String {
    let mut out = String::from(TRIAL_CSV_HEADER);
    out.push('\n');
    for r in results {
        for row in trial_csv_rows(r) {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}
