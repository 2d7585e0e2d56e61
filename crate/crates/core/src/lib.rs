//! Gaze and speech intention fusion for assistive manipulation.
//!
//! The pipeline interprets a spoken command into referential slots, projects
//! the gaze recorded while each slot word was spoken onto the glasses image,
//! selects the fixated object, carries it into the robot camera view through
//! keypoint matches and plans a sequence of parameterized action primitives.

pub mod agent;
pub mod alignment;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod interpreter;
pub mod lexicon;
pub mod par;
pub mod planner;
pub mod responder;
pub mod scene;
pub mod streams;
