//! Synthetic scenarios: a desk scene for the command templates, the pawn grid,
//! and fault-injected variants.
//!
//! Gaze is synthesized from the ground truth: during each slot's word the user
//! fixates that slot's target anchor, and between words they keep looking at
//! the temporally nearest slot's target.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::metrics::{template, TEMPLATES};
use super::scenario::{
    Correspondence, Expected, ExpectedSlot, GazeSample, GazeStream, NoiseSpec, Scenario, SCHEMA_VERSION,
};
use crate::alignment::{AlignConfig, MatchNoise};
use crate::geometry::{FrameId, FrameKind, Intrinsics, Point2, Pose};
use crate::interpreter::{interpret, timed_transcript, InterpreterConfig};
use crate::planner::Workspace;
use crate::scene::{AnnotatedObject, AnnotatedScene, BBox, HUMAN_IMAGE_SIZE, ROBOT_IMAGE_SIZE};
use crate::streams::{TimeInterval, DEFAULT_GAZE_RATE_HZ};

/// Distance from the glasses camera to the table plane, m.
pub const TABLE_DEPTH_M: f64 = 0.6;
/// Pawn grid spacing, cm.
pub const PAWN_SPACING_CM: f64 = 15.0;
/// Pawn box in the human view, px.
pub const PAWN_SIZE_PX: (f64, f64) = (50.0, 80.0);
/// Spread of gaze error around the pawn anchor, cm.
pub const S1_SIGMA_CM: f64 = 0.62;

const WORD_S: f64 = 0.5;
const GAP_S: f64 = 0.1;
const SPEECH_T0: f64 = 0.5;

pub fn human_intrinsics() -> Intrinsics {
    let (w, h) = HUMAN_IMAGE_SIZE;
    Intrinsics::new(600.0, 600.0, 704.0, 704.0, w, h).expect("valid intrinsics")
}

pub fn robot_intrinsics() -> Intrinsics {
    let (w, h) = ROBOT_IMAGE_SIZE;
    Intrinsics::new(640.0, 640.0, 640.0, 360.0, w, h).expect("valid intrinsics")
}

/// Pixels per cm on the table plane for the human camera.
pub fn human_px_per_cm() -> f64 {
    human_intrinsics().fx * 0.01 / TABLE_DEPTH_M
}

/// One annotated item present in both views.
#[derive(Debug, Clone)]
pub struct Placement {
    pub name: String,
    pub category: String,
    pub region: bool,
    pub human: BBox,
    pub robot: BBox,
    pub anchor: Option<Point2>,
}

impl Placement {
    fn new(name: &str, category: &str, human: (f64, f64, f64, f64), robot: (f64, f64, f64, f64)) -> Self {
        let b = |(x, y, w, h): (f64, f64, f64, f64)| BBox::centered(Point2::new(x, y), w, h);
        Self {
            name: name.into(),
            category: category.into(),
            region: false,
            human: b(human),
            robot: b(robot),
            anchor: None,
        }
    }

    fn region(mut self) -> Self {
        self.region = true;
        self
    }

    pub fn human_id(&self) -> String {
        format!("h_{}", self.name)
    }

    pub fn robot_id(&self) -> String {
        format!("r_{}", self.name)
    }
}

/// Fruit, plates, a cup and two placement spots on a desk.
pub fn desk_layout() -> Vec<Placement> {
    vec![
        Placement::new("apple", "apple", (500.0, 600.0, 90.0, 90.0), (400.0, 380.0, 60.0, 60.0)),
        Placement::new("pear", "pear", (700.0, 560.0, 80.0, 110.0), (520.0, 360.0, 50.0, 70.0)),
        Placement::new("banana", "banana", (880.0, 640.0, 140.0, 60.0), (640.0, 400.0, 100.0, 40.0)),
        Placement::new("plate1", "plate", (520.0, 900.0, 220.0, 140.0), (420.0, 560.0, 150.0, 90.0)),
        Placement::new("plate2", "plate", (900.0, 900.0, 220.0, 140.0), (760.0, 560.0, 150.0, 90.0)),
        Placement::new("cup", "cup", (1100.0, 620.0, 90.0, 110.0), (880.0, 380.0, 60.0, 80.0)),
        Placement::new("spot_left", "table", (300.0, 1150.0, 200.0, 150.0), (250.0, 620.0, 140.0, 80.0)).region(),
        Placement::new("spot_right", "table", (1150.0, 1150.0, 200.0, 150.0), (1000.0, 620.0, 140.0, 80.0)).region(),
    ]
}

pub fn desk_workspace() -> Workspace {
    Workspace {
        pixel_bounds: BBox::new(100.0, 100.0, 1200.0, 700.0),
        staging: Point2::new(640.0, 680.0),
        ..Workspace::default()
    }
}

/// Nine pawns on a 3x3 grid; ids `pawn0..pawn8` in row-major order.
/// The gaze anchor is the bottom centre of each pawn box.
pub fn pawn_layout() -> Vec<Placement> {
    let step = PAWN_SPACING_CM * human_px_per_cm();
    let (w, h) = PAWN_SIZE_PX;
    let centre = Point2::new(704.0, 704.0);
    (0..9)
        .map(|k| {
            let (r, c) = ((k / 3) as f64 - 1.0, (k % 3) as f64 - 1.0);
            let (x, y) = (centre.x + c * step, centre.y + r * step);
            let mut p = Placement::new(
                &format!("pawn{k}"),
                "pawn",
                (x, y, w, h),
                (640.0 + c * 100.0, 360.0 + r * 100.0, 40.0, 60.0),
            );
            p.anchor = Some(Point2::new(x, y + h / 2.0));
            p
        })
        .collect()
}

fn scenes(layout: &[Placement]) -> (AnnotatedScene, AnnotatedScene, Vec<Correspondence>) {
    let annotate = |p: &Placement, id: String, bbox: BBox| {
        let mut o = if p.region {
            AnnotatedObject::region(id, &p.category, bbox)
        } else {
            AnnotatedObject::object(id, &p.category, bbox)
        };
        o.anchor_px = p.anchor;
        o
    };
    let human = AnnotatedScene {
        intrinsics: human_intrinsics(),
        objects: layout.iter().map(|p| annotate(p, p.human_id(), p.human)).collect(),
    };
    let robot = AnnotatedScene {
        intrinsics: robot_intrinsics(),
        objects: layout.iter().map(|p| annotate(p, p.robot_id(), p.robot)).collect(),
    };
    let corr = layout.iter().map(|p| Correspondence { human: p.human_id(), robot: p.robot_id() }).collect();
    (human, robot, corr)
}

/// Static head pose: glasses camera at time `t` into the SLAM world.
fn head_pose(t: f64) -> Pose {
    Pose::from_axis_angle(
        FrameId::at(FrameKind::GlassesCamera, t).expect("finite time"),
        FrameId::new(FrameKind::SlamWorld),
        Vector3::new(0.2, 1.0, 0.1),
        0.3,
        Vector3::new(0.4, -0.1, 1.2),
    )
    .expect("valid pose")
}

pub fn pupil_to_camera() -> Pose {
    Pose::from_axis_angle(
        FrameId::new(FrameKind::GlassesPupil),
        FrameId::new(FrameKind::GlassesCamera),
        Vector3::new(0.0, 1.0, 0.0),
        0.02,
        Vector3::new(0.01, -0.02, 0.0),
    )
    .expect("valid pose")
}

fn gaze_stream(slots: &[(TimeInterval, Point2)], t_end: f64) -> GazeStream {
    let k = human_intrinsics();
    let pupil_from_cam = pupil_to_camera().inverse();
    let n = (t_end * DEFAULT_GAZE_RATE_HZ).ceil() as usize;
    let records = (0..=n)
        .map(|i| {
            let t = i as f64 / DEFAULT_GAZE_RATE_HZ;
            let dist = |iv: &TimeInterval| (iv.start - t).max(t - iv.end).max(0.0);
            let target = slots
                .iter()
                .min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0)))
                .map(|s| s.1)
                .expect("at least one slot");
            let p = pupil_from_cam.transform_point(&k.unproject(&target, TABLE_DEPTH_M));
            GazeSample { t, point: Some([p.x, p.y, p.z]), direction: None, depth: None, head_pose: head_pose(t) }
        })
        .collect();
    GazeStream { rate_hz: DEFAULT_GAZE_RATE_HZ, pupil_to_camera: pupil_to_camera(), records }
}

/// Inputs for one generated scenario.
#[derive(Debug, Clone)]
pub struct Spec<'a> {
    pub id: &'a str,
    pub template: &'a str,
    pub text: &'a str,
    pub layout: Vec<Placement>,
    /// Target placement name per slot, in transcript order.
    pub targets: Vec<&'a str>,
    pub actions: Vec<&'a str>,
    pub workspace: Workspace,
    pub seed: u64,
    pub gaze_sigma_cm: f64,
}

/// Builds a scenario whose slots are located by running the rule-based
/// interpreter on the command, so gaze fixations line up with its words.
pub fn build(spec: &Spec<'_>) -> Scenario {
    let transcript = timed_transcript(spec.text, SPEECH_T0, WORD_S, GAP_S).expect("non-empty command");
    let command = interpret(&transcript, &InterpreterConfig::default()).expect("interpretable command");
    assert_eq!(command.slots.len(), spec.targets.len(), "{}: slot count", spec.id);
    let find = |name: &str| {
        spec.layout.iter().find(|p| p.name == name).unwrap_or_else(|| panic!("{}: unknown target {name}", spec.id))
    };
    let fixations: Vec<(TimeInterval, Point2)> = command
        .slots
        .iter()
        .zip(&spec.targets)
        .map(|(slot, name)| {
            let p = find(name);
            (slot.interval, p.anchor.unwrap_or_else(|| p.human.midpoint()))
        })
        .collect();
    let t_end = transcript.span().expect("non-empty").end + 1.0;
    let (human_view, robot_view, correspondences) = scenes(&spec.layout);
    Scenario {
        schema_version: SCHEMA_VERSION,
        id: spec.id.into(),
        command_template: spec.template.into(),
        seed: spec.seed,
        transcript,
        gaze: gaze_stream(&fixations, t_end),
        frames: Vec::new(),
        human_view,
        robot_view,
        correspondences,
        matcher: MatchNoise::default(),
        alignment: AlignConfig::default(),
        noise: NoiseSpec { gaze_sigma_cm: spec.gaze_sigma_cm, per_sample_sigma_cm: 0.0, px_per_cm: human_px_per_cm() },
        interpreter: InterpreterConfig::default(),
        workspace: spec.workspace.clone(),
        agent_overrides: BTreeMap::new(),
        expected: Expected {
            slots: spec
                .targets
                .iter()
                .map(|n| {
                    let p = find(n);
                    ExpectedSlot { human: p.human_id(), robot: p.robot_id() }
                })
                .collect(),
            actions: spec.actions.iter().map(|a| a.to_string()).collect(),
        },
    }
}

const PICK: [&str; 3] = ["open_gripper", "pick", "close_gripper"];
const PLACE: [&str; 2] = ["put", "open_gripper"];

fn seq(parts: &[&[&'static str]]) -> Vec<&'static str> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Expected primitive names per template, listed by hand.
pub fn expected_actions(template_id: &str) -> Vec<&'static str> {
    match template_id {
        "T01" | "T02" | "T09" | "T10" => PICK.to_vec(),
        "T03" | "T05" | "T11" | "T13" => seq(&[&PICK, &PLACE]),
        "T04" | "T12" => seq(&[&PICK, &PLACE, &PICK, &["pour"], &PLACE]),
        "T06" | "T07" | "T14" | "T15" => seq(&[&PICK, &PLACE, &PICK, &PLACE]),
        "T08" | "T16" => seq(&[&PICK, &["move_z", "rotate"]]),
        other => panic!("no expected actions for template {other}"),
    }
}

fn template_targets(id: &str) -> Vec<&'static str> {
    match id {
        "T01" | "T09" => vec!["apple"],
        "T02" | "T10" => vec!["pawn4"],
        "T03" | "T11" => vec!["apple", "plate1"],
        "T04" | "T12" => vec!["apple", "plate1", "cup", "plate1"],
        "T05" => vec!["apple", "spot_left"],
        "T06" => vec!["apple", "pear", "plate1"],
        "T07" | "T15" => vec!["apple", "plate1", "pear", "plate2"],
        "T08" => vec!["apple"],
        "T13" => vec!["pear", "spot_right"],
        "T14" => vec!["apple", "pear", "plate2"],
        "T16" => vec!["pear"],
        other => panic!("unknown template {other}"),
    }
}

/// Scenario for one command-template row, noise free.
pub fn template_scenario(template_id: &str) -> Scenario {
    let row = template(template_id).unwrap_or_else(|| panic!("unknown template {template_id}"));
    let pawns = matches!(template_id, "T02" | "T10");
    build(&Spec {
        id: &format!("{}_{}", template_id.to_lowercase(), if pawns { "pawns" } else { "desk" }),
        template: template_id,
        text: row.instance,
        layout: if pawns { pawn_layout() } else { desk_layout() },
        targets: template_targets(template_id),
        actions: expected_actions(template_id),
        workspace: if pawns { Workspace::default() } else { desk_workspace() },
        seed: 0,
        gaze_sigma_cm: 0.0,
    })
}

pub fn all_template_scenarios() -> Vec<Scenario> {
    TEMPLATES.iter().map(|r| template_scenario(r.id)).collect()
}

/// S1: "grab the pieces" while looking at pawn `target` (0..9).
pub fn s1_pawns(target: usize, sigma_cm: f64) -> Scenario {
    assert!(target < 9, "pawn index out of range");
    let name = format!("pawn{target}");
    build(&Spec {
        id: "s1_pawns",
        template: "T02",
        text: "grab the pieces",
        layout: pawn_layout(),
        targets: vec![&name],
        actions: expected_actions("T02"),
        workspace: Workspace::default(),
        seed: 0,
        gaze_sigma_cm: sigma_cm,
    })
}

/// Probability that an isotropic Gaussian gaze offset about the anchor of the
/// centre pawn still leaves it the nearest box centre.
pub fn s1_expected_rate(sigma_cm: f64, px_per_cm: f64, erf: impl Fn(f64) -> f64) -> f64 {
    let half = PAWN_SPACING_CM * px_per_cm / 2.0;
    let lift = PAWN_SIZE_PX.1 / 2.0;
    let s = sigma_cm * px_per_cm * std::f64::consts::SQRT_2;
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / s));
    (cdf(half) - cdf(-half)) * (cdf(half - lift) - cdf(-half - lift))
}

pub fn s2_single_step() -> Scenario {
    let mut s = template_scenario("T01");
    s.id = "s2_single_step".into();
    s
}

pub fn s3_multi_step() -> Scenario {
    let mut s = template_scenario("T03");
    s.id = "s3_multi_step".into();
    s
}

pub fn s4_causal() -> Scenario {
    let mut s = template_scenario("T04");
    s.id = "s4_causal".into();
    s
}

/// "please put the apple there on the table".
pub fn apple_put_there() -> Scenario {
    build(&Spec {
        id: "apple_put_there",
        template: "T05",
        text: "please put the apple there on the table",
        layout: desk_layout(),
        targets: vec!["apple", "spot_left"],
        actions: expected_actions("T05"),
        workspace: desk_workspace(),
        seed: 0,
        gaze_sigma_cm: 0.0,
    })
}

/// Bundled scenarios by name.
pub fn bundled(name: &str) -> Option<Scenario> {
    Some(match name {
        "s1" | "s1_pawns" => s1_pawns(4, 0.0),
        "s2" | "s2_single_step" => s2_single_step(),
        "s3" | "s3_multi_step" => s3_multi_step(),
        "s4" | "s4_causal" => s4_causal(),
        "apple_put_there" => apple_put_there(),
        "fault_no_matches" => fault_no_matches(),
        "fault_empty_detections" => fault_empty_detections(),
        "fault_malformed_plan" => fault_malformed_plan(),
        "fault_out_of_workspace" => fault_out_of_workspace(),
        "fault_gaze_gap" => fault_gaze_gap(),
        t if template(&t.to_uppercase()).is_some() => template_scenario(&t.to_uppercase()),
        _ => return None,
    })
}

pub const BUNDLED: [&str; 10] = [
    "s1_pawns",
    "s2_single_step",
    "s3_multi_step",
    "s4_causal",
    "apple_put_there",
    "fault_no_matches",
    "fault_empty_detections",
    "fault_malformed_plan",
    "fault_out_of_workspace",
    "fault_gaze_gap",
];

/// The matcher returns nothing.
pub fn fault_no_matches() -> Scenario {
    let mut s = s3_multi_step();
    s.id = "fault_no_matches".into();
    s.matcher.per_object = 0;
    s
}

/// The human-view detector finds no apple.
pub fn fault_empty_detections() -> Scenario {
    let mut s = s2_single_step();
    s.id = "fault_empty_detections".into();
    for o in &mut s.human_view.objects {
        if o.category == "apple" {
            o.category = "tomato".into();
        }
    }
    s
}

/// The planning agent replies with broken JSON.
pub fn fault_malformed_plan() -> Scenario {
    let mut s = s3_multi_step();
    s.id = "fault_malformed_plan".into();
    s.agent_overrides.insert(
        crate::agent::PLAN_TEMPLATE.into(),
        r#"[["open_gripper", {}], ["pick", {"label": "apple", "position": [400.0, "#.into(),
    );
    s
}

/// The referred apple lies outside the reachable image region.
pub fn fault_out_of_workspace() -> Scenario {
    let mut s = s2_single_step();
    s.id = "fault_out_of_workspace".into();
    s.workspace.pixel_bounds = BBox::new(450.0, 100.0, 1200.0, 700.0);
    s
}

/// Gaze recording stops before the command starts.
pub fn fault_gaze_gap() -> Scenario {
    let mut s = s2_single_step();
    s.id = "fault_gaze_gap".into();
    s.gaze.records.retain(|r| r.t < 0.4);
    s
}
