//! Cross-view alignment: map the human-view referred object to the robot-view
//! object whose region collects the most matched keypoints.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Intrinsics, Point2};
use crate::scene::{BBox, ReferredObject, SceneObservationSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignmentError {
    #[error("robot-view observation set is empty")]
    EmptyScene,
    #[error("no robot-view object collected at least {min_count} matches (best: {best})")]
    NoCorrespondence { min_count: usize, best: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointMatch {
    pub human_pt: Point2,
    pub robot_pt: Point2,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub matches: Vec<KeypointMatch>,
    /// Bounding box of the human-view referred object the keypoints came from.
    pub source_bbox: BBox,
}

impl MatchSet {
    pub fn empty(source_bbox: BBox) -> Self {
        Self { matches: Vec::new(), source_bbox }
    }

    /// Drops matches whose human keypoint falls outside the source box.
    pub fn restrict_to_source(mut self) -> Self {
        let b = self.source_bbox;
        self.matches.retain(|m| b.contains(&m.human_pt));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Mask,
    BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Raw number of matches inside the region.
    #[default]
    Count,
    /// Matches per square pixel of bounding box.
    AreaNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    /// Minimum winning count below which alignment fails.
    pub min_count: usize,
    pub scoring: Scoring,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { min_count: 1, scoring: Scoring::Count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub referred: ReferredObject,
    pub counts: BTreeMap<String, usize>,
    pub regions: BTreeMap<String, RegionKind>,
    /// Winner count minus runner-up count (0 with a single candidate).
    pub margin: usize,
}

pub fn align(matches: &MatchSet, robot_scene: &SceneObservationSet) -> Result<AlignmentResult, AlignmentError> {
    align_with(matches, robot_scene, &AlignConfig::default())
}

pub fn align_with(
    matches: &MatchSet,
    robot_scene: &SceneObservationSet,
    cfg: &AlignConfig,
) -> Result<AlignmentResult, AlignmentError> {
    if robot_scene.objects.is_empty() {
        return Err(AlignmentError::EmptyScene);
    }
    let counts: Vec<usize> = robot_scene
        .objects
        .iter()
        .map(|obj| matches.matches.iter().filter(|m| obj.region_contains(&m.robot_pt)).count())
        .collect();
    let score = |i: usize| match cfg.scoring {
        Scoring::Count => counts[i] as f64,
        Scoring::AreaNormalized => {
            let area = robot_scene.objects[i].bbox.area();
            if area > 0.0 {
                counts[i] as f64 / area
            } else {
                0.0
            }
        }
    };

    let mut best = 0;
    for i in 1..robot_scene.objects.len() {
        let (si, sb) = (score(i), score(best));
        if si > sb || (si == sb && robot_scene.objects[i].id < robot_scene.objects[best].id) {
            best = i;
        }
    }
    if counts[best] < cfg.min_count.max(1) {
        return Err(AlignmentError::NoCorrespondence { min_count: cfg.min_count.max(1), best: counts[best] });
    }
    let runner_up = (0..counts.len()).filter(|&i| i != best).map(|i| counts[i]).max().unwrap_or(0);

    Ok(AlignmentResult {
        referred: ReferredObject { view: robot_scene.view, observation: robot_scene.objects[best].clone() },
        counts: robot_scene.objects.iter().zip(&counts).map(|(o, c)| (o.id.clone(), *c)).collect(),
        regions: robot_scene
            .objects
            .iter()
            .map(|o| (o.id.clone(), if o.mask.is_some() { RegionKind::Mask } else { RegionKind::BBox }))
            .collect(),
        margin: counts[best].saturating_sub(runner_up),
    })
}

/// Settings recorded for a learned feature matcher; the synthetic matcher ignores them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub max_keypoints: usize,
    pub keypoint_threshold: f64,
    pub match_threshold: f64,
    pub resize: bool,
    pub weights: String,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            max_keypoints: 10_000,
            keypoint_threshold: 1e-5,
            match_threshold: 1e-5,
            resize: false,
            weights: "indoor".into(),
        }
    }
}

/// Request sent to a feature-matching service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRequest {
    pub human_frame: String,
    pub robot_frame: String,
    pub source_bbox: BBox,
    pub config: MatcherConfig,
}

/// A feature-matching backend: two image references plus a source box in, matches out.
pub trait Matcher: Send + Sync {
    fn match_views(&self, req: &MatchRequest) -> Result<MatchSet, AlignmentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchNoise {
    /// Matches generated per human-view object.
    pub per_object: usize,
    /// Fraction of matches whose robot keypoint lands uniformly anywhere in the image.
    pub outlier_rate: f64,
    /// Standard deviation of Gaussian jitter on inlier robot keypoints, pixels.
    pub jitter_px: f64,
}

impl Default for MatchNoise {
    fn default() -> Self {
        Self { per_object: 10, outlier_rate: 0.0, jitter_px: 0.0 }
    }
}

/// Generates keypoint matches for a known correspondence.
///
/// Human keypoints are uniform in `source_bbox`. Inlier robot keypoints are
/// uniform in `target_bbox` plus jitter, clamped to the robot image; outliers
/// are uniform over the robot image. With no target every match is an outlier.
pub fn synth_matches<R: Rng + ?Sized>(
    source_bbox: BBox,
    target_bbox: Option<BBox>,
    robot_image: &Intrinsics,
    noise: &MatchNoise,
    rng: &mut R,
) -> MatchSet {
    let (w, h) = (f64::from(robot_image.width), f64::from(robot_image.height));
    let jitter = Normal::new(0.0, noise.jitter_px.max(0.0)).expect("finite jitter");
    let uniform_in = |rng: &mut R, b: &BBox| {
        Point2::new(
            b.x_min + rng.random::<f64>() * b.width(),
            b.y_min + rng.random::<f64>() * b.height(),
        )
    };
    let matches = (0..noise.per_object)
        .map(|_| {
            let human_pt = uniform_in(rng, &source_bbox);
            let outlier = rng.random::<f64>() < noise.outlier_rate;
            let robot_pt = match target_bbox {
                Some(target) if !outlier => {
                    let p = uniform_in(rng, &target);
                    let (dx, dy) = if noise.jitter_px > 0.0 {
                        (jitter.sample(rng), jitter.sample(rng))
                    } else {
                        (0.0, 0.0)
                    };
                    Point2::new((p.x + dx).clamp(0.0, w), (p.y + dy).clamp(0.0, h))
                }
                _ => Point2::new(rng.random::<f64>() * w, rng.random::<f64>() * h),
            };
            KeypointMatch { human_pt, robot_pt, confidence: rng.random::<f64>() }
        })
        .collect();
    MatchSet { matches, source_bbox }
}
