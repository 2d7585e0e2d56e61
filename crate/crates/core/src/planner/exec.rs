//! Symbolic execution of a policy over labelled object positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::{ActionPrimitive, Policy, Position};
use crate::geometry::Point2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub label: String,
    pub position: Point2,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("step {0}: no object within reach of the pick position")]
    NothingToPick(usize),
    #[error("step {0}: nothing held")]
    NothingHeld(usize),
    #[error("step {0}: symbolic execution supports pixel positions only")]
    NonPixelPosition(usize),
    #[error("step {0}: missing parameters")]
    MissingParams(usize),
}

fn pixel(pos: Option<Position>, step: usize) -> Result<Point2, ExecError> {
    match pos {
        Some(Position::Pixel(p)) => Ok(p),
        Some(Position::Metric(_)) => Err(ExecError::NonPixelPosition(step)),
        None => Err(ExecError::MissingParams(step)),
    }
}

fn nearest(world: &[WorldObject], p: Point2, reach: f64, exclude: Option<usize>) -> Option<usize> {
    world
        .iter()
        .enumerate()
        .filter(|(i, o)| Some(*i) != exclude && o.position.distance(&p) <= reach)
        .min_by(|a, b| a.1.position.distance(&p).total_cmp(&b.1.position.distance(&p)))
        .map(|(i, _)| i)
}

/// Runs `policy` over `world` and returns the final object positions.
///
/// `pick` grabs the object nearest its position (within `reach` pixels), `put`
/// moves the held object, `swap` exchanges two objects, everything else leaves
/// positions unchanged.
pub fn execute(policy: &Policy, mut world: Vec<WorldObject>, reach: f64) -> Result<Vec<WorldObject>, ExecError> {
    let mut held: Option<usize> = None;
    for (i, step) in policy.steps.iter().enumerate() {
        let Some(p) = step.action.primitive() else { continue };
        match p {
            ActionPrimitive::Pick => {
                let at = pixel(step.params.position, i)?;
                held = Some(nearest(&world, at, reach, None).ok_or(ExecError::NothingToPick(i))?);
            }
            ActionPrimitive::Put => {
                let to = pixel(step.params.position, i)?;
                let h = held.take().ok_or(ExecError::NothingHeld(i))?;
                world[h].position = to;
            }
            ActionPrimitive::Pour => {
                held.ok_or(ExecError::NothingHeld(i))?;
            }
            ActionPrimitive::Swap => {
                let a = pixel(step.params.position, i)?;
                let b = pixel(step.params.second.as_ref().map(|s| s.position), i)?;
                let ia = nearest(&world, a, reach, None).ok_or(ExecError::NothingToPick(i))?;
                let ib = nearest(&world, b, reach, Some(ia)).ok_or(ExecError::NothingToPick(i))?;
                let pa = world[ia].position;
                world[ia].position = world[ib].position;
                world[ib].position = pa;
            }
            ActionPrimitive::OpenGripper => held = None,
            _ => {}
        }
    }
    Ok(world)
}
