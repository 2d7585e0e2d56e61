//! Human-view intention fusion: pick the object whose position minimizes the
//! recency-weighted sum of distances to the projected gaze trace.
//!
//! Gaze sample `n` of `0..=N` gets weight `exp(α (n − N))`, so the most recent
//! sample always weighs 1 and older ones decay by `exp(−α)` per step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::scene::{ReferredObject, SceneObservationSet};

/// Upper bound on the decay factor.
pub const ALPHA_CAP: f64 = 0.65;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FusionError {
    #[error("scene observation set is empty")]
    EmptyScene,
    #[error("gaze trace is empty")]
    EmptyTrace,
}

/// Projected gaze points, all on the image plane of the window's first frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeTrace {
    points: Vec<Point2>,
}

impl GazeTrace {
    pub fn new(points: Vec<Point2>) -> Result<Self, FusionError> {
        if points.is_empty() {
            return Err(FusionError::EmptyTrace);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Index bound `N`; the trace holds `N + 1` points.
    pub fn index_bound(&self) -> usize {
        self.points.len() - 1
    }

    /// Weighted mean of the trace under the fusion weights.
    pub fn weighted_mean(&self) -> Point2 {
        let w = normalized_weights(self.index_bound());
        let (x, y) = self
            .points
            .iter()
            .zip(&w)
            .fold((0.0, 0.0), |(x, y), (p, w)| (x + w * p.x, y + w * p.y));
        Point2::new(x, y)
    }
}

/// Decay factor: 0 when `N = 2`, otherwise `min(0.65, 0.1 N)`.
pub fn alpha_for(index_bound: usize) -> f64 {
    if index_bound == 2 {
        0.0
    } else {
        ALPHA_CAP.min(index_bound as f64 / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: f64,
    pub weights: Vec<f64>,
}

impl FusionWeights {
    pub fn for_bound(index_bound: usize) -> Self {
        let alpha = alpha_for(index_bound);
        let n_max = index_bound as f64;
        let weights = (0..=index_bound).map(|n| (alpha * (n as f64 - n_max)).exp()).collect();
        Self { alpha, weights }
    }
}

/// Fusion weights scaled to sum to one.
pub fn normalized_weights(index_bound: usize) -> Vec<f64> {
    let w = FusionWeights::for_bound(index_bound).weights;
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub selected: ReferredObject,
    pub alpha: f64,
    /// Weighted distance sum per object id.
    pub scores: BTreeMap<String, f64>,
    /// Runner-up score minus winning score; `None` with a single candidate.
    pub margin: Option<f64>,
}

pub fn fuse(trace: &GazeTrace, scene: &SceneObservationSet) -> Result<FusionResult, FusionError> {
    if scene.objects.is_empty() {
        return Err(FusionError::EmptyScene);
    }
    let weights = FusionWeights::for_bound(trace.index_bound());
    let scored: Vec<(usize, f64)> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, obj)| {
            let score = trace
                .points()
                .iter()
                .zip(&weights.weights)
                .map(|(g, w)| w * g.distance(&obj.position))
                .sum();
            (i, score)
        })
        .collect();

    let better = |a: &(usize, f64), b: &(usize, f64)| {
        a.1 < b.1 || (a.1 == b.1 && scene.objects[a.0].id < scene.objects[b.0].id)
    };
    let mut best = scored[0];
    for s in &scored[1..] {
        if better(s, &best) {
            best = *s;
        }
    }
    let margin = scored
        .iter()
        .filter(|s| s.0 != best.0)
        .map(|s| s.1 - best.1)
        .min_by(f64::total_cmp);

    Ok(FusionResult {
        selected: ReferredObject { view: scene.view, observation: scene.objects[best.0].clone() },
        alpha: weights.alpha,
        scores: scored.iter().map(|&(i, s)| (scene.objects[i].id.clone(), s)).collect(),
        margin,
    })
}

/// Rows `(N, n, weight)` of the normalized weight curves.
pub fn weight_curves(bounds: &[usize]) -> Vec<(usize, usize, f64)> {
    bounds
        .iter()
        .flat_map(|&n_max| {
            normalized_weights(n_max).into_iter().enumerate().map(move |(n, w)| (n_max, n, w))
        })
        .collect()
}

pub fn weight_curves_csv(bounds: &[usize]) -> String {
    let mut out = String::from("N,n,weight\n");
    for (n_max, n, w) in weight_curves(bounds) {
        out.push_str(&format!("{n_max},{n},{w:.17e}\n"));
    }
    out
}
