//! Learning symbolic world models from raw planar demonstrations.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`geometry`] / [`model`]: SE(2) poses, world states, trajectories and the
//!   relative-pose featurization.
//! - [`world`]: the planar packing and cafe simulators plus the scripted
//!   demonstration generator.
//! - [`rcr`]: occupancy grids, connected components and Gaussian-mixture
//!   region predictors.
//! - [`relations`]: relation vocabulary and the abstraction function.
//! - [`actions`]: lifted action schemas from abstract transitions.
//! - [`pddl`]: typed STRIPS emission, parsing and grounding.
//! - [`planning`]: top-k uniform-cost planning and precondition relaxation.
//! - [`refine`]: sampling-based refinement of abstract plans.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod actions;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pddl;
pub mod pipeline;
pub mod planning;
pub mod rcr;
pub mod refine;
pub mod relations;
pub mod rng;
pub mod world;
