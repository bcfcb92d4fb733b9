//! Semantic-distance-aware test-time search for diffusion samplers.
//!
//! The crate scores how far apart the key entities of a prompt sit in an
//! embedding space, widens the candidate pool and reweights the reward
//! accordingly, and searches over DDIM trajectories with lookahead scoring.
//! Best-of-N, particle sampling, and beam search are provided as baselines,
//! all sharing exact model-call accounting. An analytic Gaussian-mixture
//! denoiser makes every sampler checkable against closed forms.
//!
//! A prompt-suite builder pairs concepts that lie far apart on a shared 2D
//! embedding plane and renders them into prompts.

pub mod bench;
pub mod diffusion;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod rewards;
pub mod rng;
pub mod search;
pub mod semantics;

pub use error::{Error, Result};
