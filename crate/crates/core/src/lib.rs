//! Weakly-supervised tracking data pipeline without a neural network.
//!
//! The crate covers the data side of training a motion-model tracker from
//! annotated still images and unlabeled video:
//!
//! - [`hallucinate`]: synthesize short annotated clips from one image with a
//!   zoom-in/out crop schedule and photometric effects.
//! - [`associate`]: the online continue/terminate/spawn rules that turn
//!   per-frame detections and motion predictions into tracklets.
//! - [`rectify`]: join broken tracklets with a constrained maximum-weight
//!   matching, iterated to a fixpoint, and mine hard clips from the joins.
//! - [`sampler`]: balanced HV/RV training manifests with biased hard-example
//!   sampling.
//! - [`metrics`]: CLEAR-MOT and IDF1 scoring.
//! - [`synth`]: synthetic scenes and brute-force oracles.
//! - [`io`]: MOTChallenge-style text formats and sidecars.

pub mod assignment;
pub mod associate;
pub mod error;
pub mod geometry;
pub mod hallucinate;
pub mod io;
pub mod metrics;
pub mod rectify;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod track;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, MotionTarget};
pub use track::{TrackPoint, Tracklet};
