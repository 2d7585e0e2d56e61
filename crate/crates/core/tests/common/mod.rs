//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use gazefuse::agent::{
    Agent, AgentError, AgentRequest, AgentResponse, FailingTransport, HttpAgent, MockAgent, RemoteConfig,
};
use gazefuse::geometry::{FrameId, FrameKind, Intrinsics, Point2, Point3, Pose};
use gazefuse::responder::RuleBasedResponder;
use gazefuse::scene::{BBox, Mask, ObjectObservation, SceneObservationSet, View};
use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3, Vector4};
use rand::Rng;

/// Decay factor written out from the schedule: no decay at N = 2, else N/10 capped at 0.65.
pub fn alpha_oracle(n: usize) -> f64 {
    const TABLE: [f64; 7] = [0.0, 0.1, 0.0, 0.3, 0.4, 0.5, 0.6];
    if n < TABLE.len() {
        TABLE[n]
    } else {
        0.65
    }
}

/// Brute-force argmin of the recency-weighted distance sum; ties go to the
/// lexicographically smallest id.
pub fn fuse_oracle(gaze: &[Point2], objects: &[(String, Point2)]) -> String {
    let n_max = gaze.len() - 1;
    let alpha = alpha_oracle(n_max);
    let score = |p: &Point2| -> f64 {
        let mut s = 0.0;
        for (n, g) in gaze.iter().enumerate() {
            let w = (alpha * (n as f64 - n_max as f64)).exp();
            s += w * ((g.x - p.x).powi(2) + (g.y - p.y).powi(2)).sqrt();
        }
        s
    };
    let mut scored: Vec<(f64, &String)> = objects.iter().map(|(id, p)| (score(p), id)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    scored[0].1.clone()
}

/// Region used by the alignment oracle: a rectangle, or a pixel predicate.
pub enum Region {
    Rect(f64, f64, f64, f64),
    Pixels { w: u32, h: u32, on: Box<dyn Fn(u32, u32) -> bool> },
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Region::Rect(x0, y0, x1, y1) => *x0 <= x && x <= *x1 && *y0 <= y && y <= *y1,
            Region::Pixels { w, h, on } => {
                x >= 0.0 && y >= 0.0 && (x as u32) < *w && (y as u32) < *h && on(x as u32, y as u32)
            }
        }
    }
}

/// Counts matches per region; returns the winner (highest count, then smallest
/// id) or `None` if it has fewer than `min_count` matches.
pub fn align_oracle(robot_pts: &[(f64, f64)], regions: &[(String, Region)], min_count: usize) -> Option<String> {
    let mut best: Option<(usize, &String)> = None;
    for (id, r) in regions {
        let c = robot_pts.iter().filter(|(x, y)| r.contains(*x, *y)).count();
        best = match best {
            Some((bc, bid)) if bc > c || (bc == c && bid < id) => Some((bc, bid)),
            _ => Some((c, id)),
        };
    }
    let (count, id) = best?;
    (count >= min_count.max(1)).then(|| id.clone())
}

pub fn robot_k() -> Intrinsics {
    Intrinsics::new(640.0, 640.0, 640.0, 360.0, 1280, 720).unwrap()
}

pub fn scene_from(objects: Vec<ObjectObservation>, view: View) -> SceneObservationSet {
    SceneObservationSet { view, category: "stuff".into(), objects, intrinsics: robot_k() }
}

pub fn obs(id: &str, bbox: BBox, mask: Option<Mask>) -> ObjectObservation {
    ObjectObservation::new(id, "thing", bbox, mask)
}

pub fn random_rotation(rng: &mut impl Rng, max_angle: f64) -> Matrix3<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis };
    *Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(-max_angle..max_angle)).matrix()
}

pub fn random_pose(rng: &mut impl Rng, from: FrameId, to: FrameId, max_angle: f64, max_t: f64) -> Pose {
    let r = random_rotation(rng, max_angle);
    let t = Vector3::new(
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
    );
    Pose::new(from, to, r, t).unwrap()
}

pub fn homogeneous(p: &Pose) -> Matrix4<f64> {
    let r = p.rotation();
    let t = p.translation();
    Matrix4::new(
        r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
        r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
        r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Gaze reprojection as one 4x4 product with a general matrix inverse.
pub fn reproject_oracle(gaze: &Point3, cam_pupil: &Pose, w_ti: &Pose, w_tin: &Pose, k: &Intrinsics) -> Option<Point2> {
    let m = homogeneous(w_ti).try_inverse()? * homogeneous(w_tin) * homogeneous(cam_pupil);
    let q = m * Vector4::new(gaze.x, gaze.y, gaze.z, 1.0);
    (q.z > 1e-9).then(|| Point2::new(k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy))
}

/// Same transform, with a different source frame.
pub fn relabel(p: &Pose, from: FrameId) -> Pose {
    Pose::new(from, p.to_frame(), *p.rotation(), *p.translation()).unwrap()
}

pub fn gc(t: f64) -> FrameId {
    FrameId::at(FrameKind::GlassesCamera, t).unwrap()
}

pub const SLAM: FrameId = FrameId::new(FrameKind::SlamWorld);
pub const PUPIL: FrameId = FrameId::new(FrameKind::GlassesPupil);
pub const CAM: FrameId = FrameId::new(FrameKind::GlassesCamera);

/// Serves everything from the rule-based mock; anything it cannot answer
/// would go to an HTTP agent whose transport refuses all calls.
pub struct IsolatedAgent {
    mock: MockAgent,
    remote: HttpAgent,
    pub transport: Arc<FailingTransport>,
    served: AtomicUsize,
}

impl IsolatedAgent {
    pub fn new() -> Self {
        let transport = Arc::new(FailingTransport::default());
        let cfg = RemoteConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key: "unused".into(),
            model_id: None,
        };
        let remote = HttpAgent::new(cfg, transport.clone()).with_sleeper(|_| {});
        Self {
            mock: MockAgent::with_fallback(Arc::new(RuleBasedResponder)),
            remote,
            transport,
            served: AtomicUsize::new(0),
        }
    }

    pub fn served(&self) -> usize {
        self.served.load(Ordering::SeqCst)
    }
}

impl Agent for IsolatedAgent {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        match self.mock.complete(req) {
            Err(AgentError::NoCannedResponse { .. }) => self.remote.complete(req),
            other => {
                self.served.fetch_add(1, Ordering::SeqCst);
                other
            }
        }
    }
}
