//! Per-view scene observation sets built from annotated scenes.
//!
//! Annotations stand in for an open-vocabulary detector plus segmenter. The
//! [`Detector`] trait is the seam where a real detection service plugs in.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Intrinsics, Point2};
use crate::streams::normalize_text;

/// Category returned for generic references ("this", "that thing").
pub const GENERIC_CATEGORY: &str = "stuff";
/// Category for bare locations ("there", "here").
pub const POSITION_CATEGORY: &str = "position";

pub const HUMAN_IMAGE_SIZE: (u32, u32) = (1408, 1408);
pub const ROBOT_IMAGE_SIZE: (u32, u32) = (1280, 720);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("no {category:?} objects detected in the {view:?} view")]
    NoObjectsDetected { category: String, view: View },
    #[error("invalid scene annotation: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Human,
    Robot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self { x_min: v[0], y_min: v[1], x_max: v[2], y_max: v[3] }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn centered(center: Point2, width: f64, height: f64) -> Self {
        Self::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    pub fn is_well_formed(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }

    pub fn midpoint(&self) -> Point2 {
        Point2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed-interval membership: points on the edges count as inside.
    pub fn contains(&self, p: &Point2) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }

    pub fn within_image(&self, k: &Intrinsics) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= f64::from(k.width)
            && self.y_max <= f64::from(k.height)
    }
}

/// Binary mask stored as row-major run lengths, starting with a run of zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskRecord", into = "MaskRecord")]
pub struct Mask {
    width: u32,
    height: u32,
    counts: Vec<u64>,
    // cumulative end index of each run
    ends: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MaskRecord {
    size: [u32; 2],
    counts: Vec<u64>,
}

impl TryFrom<MaskRecord> for Mask {
    type Error = SceneError;

    fn try_from(r: MaskRecord) -> Result<Self, SceneError> {
        Mask::from_rle(r.size[1], r.size[0], r.counts)
    }
}

impl From<Mask> for MaskRecord {
    fn from(m: Mask) -> Self {
        MaskRecord { size: [m.height, m.width], counts: m.counts }
    }
}

impl Mask {
    pub fn from_rle(width: u32, height: u32, counts: Vec<u64>) -> Result<Self, SceneError> {
        let total: u64 = counts.iter().sum();
        if total != u64::from(width) * u64::from(height) {
            return Err(SceneError::Invalid(format!(
                "mask runs cover {total} pixels, expected {}x{}",
                width, height
            )));
        }
        let ends = counts
            .iter()
            .scan(0u64, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        Ok(Self { width, height, counts, ends })
    }

    /// Encodes a mask from a per-pixel predicate (row-major).
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) != current {
                    counts.push(run);
                    run = 0;
                    current = !current;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self::from_rle(width, height, counts).expect("runs cover the image")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let idx = u64::from(y) * u64::from(self.width) + u64::from(x);
        let run = self.ends.partition_point(|&end| end <= idx);
        run % 2 == 1
    }

    /// Membership of a continuous pixel coordinate (the pixel containing it).
    pub fn contains(&self, p: &Point2) -> bool {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return false;
        }
        self.get(p.x.floor() as u32, p.y.floor() as u32)
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    pub id: String,
    pub category: String,
    /// Always the bounding-box midpoint.
    pub position: Point2,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
}

impl ObjectObservation {
    pub fn new(id: impl Into<String>, category: impl Into<String>, bbox: BBox, mask: Option<Mask>) -> Self {
        Self { id: id.into(), category: category.into(), position: bbox.midpoint(), bbox, mask }
    }

    /// Mask when present, otherwise the bounding box.
    pub fn region_contains(&self, p: &Point2) -> bool {
        match &self.mask {
            Some(m) => m.contains(p),
            None => self.bbox.contains(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObservationSet {
    pub view: View,
    pub category: String,
    pub objects: Vec<ObjectObservation>,
    pub intrinsics: Intrinsics,
}

impl SceneObservationSet {
    pub fn get(&self, id: &str) -> Option<&ObjectObservation> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferredObject {
    pub view: View,
    pub observation: ObjectObservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationKind {
    #[default]
    Object,
    /// A placement region on a surface, answered for position references.
    Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedObject {
    pub id: String,
    pub category: String,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "is_default")]
    pub kind: AnnotationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
    /// Point the user is asked to look at, in pixels (defaults to the bbox midpoint).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_px: Option<Point2>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl AnnotatedObject {
    pub fn object(id: impl Into<String>, category: impl Into<String>, bbox: BBox) -> Self {
        Self {
            id: id.into(),
            category: category.into(),
            bbox,
            kind: AnnotationKind::Object,
            mask: None,
            anchor_px: None,
        }
    }

    pub fn region(id: impl Into<String>, category: impl Into<String>, bbox: BBox) -> Self {
        Self { kind: AnnotationKind::Region, ..Self::object(id, category, bbox) }
    }

    pub fn anchor(&self) -> Point2 {
        self.anchor_px.unwrap_or_else(|| self.bbox.midpoint())
    }

    fn observation(&self) -> ObjectObservation {
        ObjectObservation::new(&self.id, &self.category, self.bbox, self.mask.clone())
    }
}

/// Ground-truth annotation of one camera view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedScene {
    pub intrinsics: Intrinsics,
    pub objects: Vec<AnnotatedObject>,
}

impl AnnotatedScene {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.intrinsics.validate().map_err(|e| SceneError::Invalid(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(SceneError::Invalid(format!("duplicate object id {:?}", o.id)));
            }
            if normalize_text(&o.category).is_empty() {
                return Err(SceneError::Invalid(format!("object {:?} has empty category", o.id)));
            }
            if !o.bbox.is_well_formed() || !o.bbox.within_image(&self.intrinsics) {
                return Err(SceneError::Invalid(format!(
                    "object {:?} bbox {:?} is malformed or outside the image",
                    o.id, o.bbox
                )));
            }
            if let Some(m) = &o.mask {
                if m.width() != self.intrinsics.width || m.height() != self.intrinsics.height {
                    return Err(SceneError::Invalid(format!(
                        "object {:?} mask resolution differs from the view",
                        o.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

/// Filters an annotated scene down to the observation set for `category`.
///
/// `"stuff"` returns every annotation, `"position"` returns placement regions,
/// anything else matches categories exactly after normalization.
pub fn observe(
    scene: &AnnotatedScene,
    category: &str,
    view: View,
) -> Result<SceneObservationSet, SceneError> {
    let wanted = normalize_text(category);
    let objects: Vec<ObjectObservation> = scene
        .objects
        .iter()
        .filter(|o| match wanted.as_str() {
            GENERIC_CATEGORY => true,
            POSITION_CATEGORY => o.kind == AnnotationKind::Region,
            _ => normalize_text(&o.category) == wanted,
        })
        .map(AnnotatedObject::observation)
        .collect();
    if objects.is_empty() {
        return Err(SceneError::NoObjectsDetected { category: wanted, view });
    }
    Ok(SceneObservationSet { view, category: wanted, objects, intrinsics: scene.intrinsics })
}

/// Detector settings passed through to a detection service; the annotation
/// path ignores them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub box_threshold: f64,
    pub text_threshold: f64,
    pub grounding_model: String,
    pub segmentation_model: String,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            box_threshold: 0.3,
            text_threshold: 0.3,
            grounding_model: "tiny".into(),
            segmentation_model: "large".into(),
        }
    }
}

/// Produces a scene observation set for a text prompt.
pub trait Detector: Send + Sync {
    fn detect(&self, category: &str, view: View) -> Result<SceneObservationSet, SceneError>;
}

/// Detector backed by scene annotations.
#[derive(Debug, Clone)]
pub struct AnnotationDetector<'a> {
    pub human: &'a AnnotatedScene,
    pub robot: &'a AnnotatedScene,
}

impl Detector for AnnotationDetector<'_> {
    fn detect(&self, category: &str, view: View) -> Result<SceneObservationSet, SceneError> {
        match view {
            View::Human => observe(self.human, category, view),
            View::Robot => observe(self.robot, category, view),
        }
    }
}
