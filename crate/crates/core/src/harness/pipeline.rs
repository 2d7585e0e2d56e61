//! End-to-end execution of one scenario trial.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::agent::{Agent, AgentError, AgentRequest, AgentResponse};
use crate::alignment::{align_with, synth_matches, AlignmentResult};
use crate::fusion::{fuse, FusionResult, GazeTrace};
use crate::geometry::{reproject_gaze, Point2};
use crate::interpreter::{interpret_with_agent, InterpretedCommand, TargetProperty};
use crate::planner::{plan_with_agent, PlannerConfig, PlannerState, Policy};
use crate::scene::{observe, View};
use crate::streams::{gaze_window, GazeRecord};

/// Where a run failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Observation,
    Fusion,
    Alignment,
    Planning,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Input => "input",
            Self::Observation => "observation",
            Self::Fusion => "fusion",
            Self::Alignment => "alignment",
            Self::Planning => "planning",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    /// Replaces the scenario seed.
    pub seed: Option<u64>,
    /// Replaces the scenario's per-slot gaze sigma, cm.
    pub noise_sigma_cm: Option<f64>,
    pub trial: u64,
    /// Record wall-clock stage timings (makes results non-reproducible).
    pub record_timings: bool,
    pub planner: PlannerConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: usize,
    pub property: Option<TargetProperty>,
    pub category: Option<String>,
    pub expected_human: String,
    pub expected_robot: String,
    pub human_id: Option<String>,
    pub robot_id: Option<String>,
    /// Recency-weighted mean of the noisy gaze trace, human-view pixels.
    pub gaze_mean_px: Option<Point2>,
    pub gaze_error_cm: Option<f64>,
    pub fusion: Option<FusionResult>,
    pub alignment: Option<AlignmentResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario_id: String,
    pub trial: u64,
    pub seed: u64,
    pub noise_sigma_cm: f64,
    pub command: Option<InterpretedCommand>,
    pub slots: Vec<SlotOutcome>,
    pub policy: Option<Policy>,
    pub success: bool,
    pub failure_stage: Option<Stage>,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

/// Serves scenario-level agent overrides before delegating.
pub struct OverrideAgent<'a> {
    overrides: &'a BTreeMap<String, String>,
    inner: &'a dyn Agent,
}

impl<'a> OverrideAgent<'a> {
    pub fn new(overrides: &'a BTreeMap<String, String>, inner: &'a dyn Agent) -> Self {
        Self { overrides, inner }
    }
}

impl Agent for OverrideAgent<'_> {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        match self.overrides.get(&req.prompt_template_id) {
            Some(text) => Ok(AgentResponse::canned(text.clone())),
            None => self.inner.complete(req),
        }
    }
}

/// Per-trial generator: seeded by the scenario seed, one stream per trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

struct Run {
    result: RunResult,
    clock: Option<(Instant, BTreeMap<String, f64>)>,
}

impl Run {
    fn fail(&mut self, stage: Stage, msg: impl fmt::Display) {
        if self.result.failure_stage.is_none() {
            self.result.failure_stage = Some(stage);
            self.result.failure = Some(msg.to_string());
        }
    }

    fn lap(&mut self, name: &str) {
        if let Some((t, map)) = &mut self.clock {
            map.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
            *t = Instant::now();
        }
    }

    fn finish(mut self) -> RunResult {
        self.result.success = self.result.failure_stage.is_none();
        self.result.timings_ms = self.clock.map(|(_, m)| m);
        self.result
    }
}

/// Projects the gaze samples of one window onto the image at the window start.
pub fn project_window(
    window: &[&GazeRecord],
    scenario: &Scenario,
) -> Result<Vec<Point2>, crate::geometry::GeometryError> {
    let first = &window[0].head_pose;
    window
        .iter()
        .map(|r| {
            reproject_gaze(
                &r.gaze_pupil,
                &scenario.gaze.pupil_to_camera,
                first,
                &r.head_pose,
                &scenario.human_view.intrinsics,
            )
        })
        .collect()
}

/// Runs interpret, gaze projection, observation, fusion, alignment and
/// planning. Stage errors end the run and are recorded, never propagated.
pub fn run_scenario(s: &Scenario, agent: &dyn Agent, cfg: &RunConfig) -> RunResult {
    let seed = cfg.seed.unwrap_or(s.seed);
    let sigma_cm = cfg.noise_sigma_cm.unwrap_or(s.noise.gaze_sigma_cm);
    let mut run = Run {
        result: RunResult {
            scenario_id: s.id.clone(),
            trial: cfg.trial,
            seed,
            noise_sigma_cm: sigma_cm,
            command: None,
            slots: s
                .expected
                .slots
                .iter()
                .enumerate()
                .map(|(i, e)| SlotOutcome {
                    slot: i,
                    expected_human: e.human.clone(),
                    expected_robot: e.robot.clone(),
                    ..SlotOutcome::default()
                })
                .collect(),
            policy: None,
            success: false,
            failure_stage: None,
            failure: None,
            warnings: Vec::new(),
            timings_ms: None,
        },
        clock: cfg.record_timings.then(|| (Instant::now(), BTreeMap::new())),
    };
    let agent = OverrideAgent::new(&s.agent_overrides, agent);
    let mut rng = trial_rng(seed, cfg.trial);
    let px_per_cm = s.noise.px_per_cm;
    let offset = Normal::new(0.0, sigma_cm * px_per_cm).expect("validated sigma");
    let jitter = Normal::new(0.0, s.noise.per_sample_sigma_cm * px_per_cm).expect("validated sigma");

    let interpretation = match interpret_with_agent(&s.transcript, &s.interpreter, &agent) {
        Ok(i) => i,
        Err(e) => {
            run.fail(Stage::Input, format!("interpret: {e}"));
            return run.finish();
        }
    };
    run.lap("interpret");
    run.result.warnings.extend(interpretation.warnings);
    let command = interpretation.command;
    run.result.command = Some(command.clone());
    if command.slots.len() != s.expected.slots.len() {
        run.fail(
            Stage::Input,
            format!("interpreted {} slots, expected {}", command.slots.len(), s.expected.slots.len()),
        );
        return run.finish();
    }

    let records = s.gaze_records();
    let mut referred = Vec::with_capacity(command.slots.len());
    for (k, slot) in command.slots.iter().enumerate() {
        let out = &mut run.result.slots[k];
        out.property = Some(slot.property);
        out.category = Some(slot.category.clone());

        let window = match gaze_window(&records, slot.interval, s.gaze.rate_hz) {
            Ok(w) => w,
            Err(e) => {
                run.fail(Stage::Input, format!("slot {k} gaze window: {e}"));
                return run.finish();
            }
        };
        let mut points = match project_window(&window, s) {
            Ok(p) => p,
            Err(e) => {
                run.fail(Stage::Input, format!("slot {k} gaze projection: {e}"));
                return run.finish();
            }
        };
        let (dx, dy) = (offset.sample(&mut rng), offset.sample(&mut rng));
        for p in &mut points {
            let (jx, jy) = if s.noise.per_sample_sigma_cm > 0.0 {
                (jitter.sample(&mut rng), jitter.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            *p = Point2::new(p.x + dx + jx, p.y + dy + jy);
        }
        let trace = GazeTrace::new(points).expect("window is never empty");
        let mean = trace.weighted_mean();
        out.gaze_mean_px = Some(mean);
        out.gaze_error_cm = s
            .human_view
            .get(&out.expected_human)
            .map(|o| gaze_error_cm(mean, o.anchor(), px_per_cm));

        let human_set = match observe(&s.human_view, &slot.category, View::Human) {
            Ok(set) => set,
            Err(e) => {
                run.fail(Stage::Observation, format!("slot {k} human view: {e}"));
                return run.finish();
            }
        };
        let fusion = match fuse(&trace, &human_set) {
            Ok(f) => f,
            Err(e) => {
                run.fail(Stage::Fusion, format!("slot {k}: {e}"));
                return run.finish();
            }
        };
        let human = fusion.selected.observation.clone();
        let out = &mut run.result.slots[k];
        out.human_id = Some(human.id.clone());
        out.fusion = Some(fusion);
        let wrong_human = human.id != out.expected_human;
        let expected_human = out.expected_human.clone();
        if wrong_human {
            run.fail(Stage::Fusion, format!("slot {k}: selected {} instead of {expected_human}", human.id));
        }

        let robot_set = match observe(&s.robot_view, &slot.category, View::Robot) {
            Ok(set) => set,
            Err(e) => {
                run.fail(Stage::Observation, format!("slot {k} robot view: {e}"));
                return run.finish();
            }
        };
        let target_bbox = s.robot_for(&human.id).and_then(|r| s.robot_view.get(r)).map(|o| o.bbox);
        let matches = synth_matches(human.bbox, target_bbox, &s.robot_view.intrinsics, &s.matcher, &mut rng);
        let alignment = match align_with(&matches, &robot_set, &s.alignment) {
            Ok(a) => a,
            Err(e) => {
                run.fail(Stage::Alignment, format!("slot {k}: {e}"));
                return run.finish();
            }
        };
        let out = &mut run.result.slots[k];
        let robot = alignment.referred.clone();
        out.robot_id = Some(robot.observation.id.clone());
        out.alignment = Some(alignment);
        if robot.observation.id != out.expected_robot {
            let msg = format!("slot {k}: aligned to {} instead of {}", robot.observation.id, out.expected_robot);
            run.fail(Stage::Alignment, msg);
        }
        referred.push(robot);
    }
    run.lap("perception");

    let planned = PlannerState::new(referred, command, s.workspace.clone())
        .and_then(|state| plan_with_agent(&state, &cfg.planner, &agent));
    run.lap("plan");
    match planned {
        Ok(policy) => {
            let names = policy.action_names();
            if names != s.expected.actions {
                run.fail(Stage::Planning, format!("policy {names:?} does not match expected {:?}", s.expected.actions));
            }
            run.result.policy = Some(policy);
        }
        Err(e) => run.fail(Stage::Planning, e),
    }
    run.finish()
}

/// Distance between a gaze point and an anchor, converted to cm.
pub fn gaze_error_cm(gaze: Point2, anchor: Point2, px_per_cm: f64) -> f64 {
    gaze.distance(&anchor) / px_per_cm
}
