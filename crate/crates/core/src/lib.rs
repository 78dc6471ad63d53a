//! Bio-inspired looming detection after the locust LGMD neuron.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: frames, the network parameter set, per-stream state.
//! * [`pipeline`]: the P / I / S / Ce / G layer cascade and the per-frame
//!   step that turns a luminance frame into a [`FrameResult`].
//! * [`decision`]: spikes, collision confirmation, FFI gating and the
//!   cruise/avoid/slowdown scheduler.
//! * [`stimulus`]: synthetic looming, translating, grating and panning
//!   sequences.
//! * [`arena`]: a closed-loop 2-D arena with a column-raycast camera.
//! * [`io`]: PGM / raw Y8 frames, trace CSV and the flat config format.
//!
//! Hot loops run through [`Exec`], which uses rayon when the `parallel`
//! feature is enabled (the default) and falls back to plain iterators
//! otherwise.

pub mod arena;
pub mod decision;
pub mod error;
pub mod exec;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod stimulus;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::{params_default, BorderMode, Frame, FrameResult, LayerState, NormMode, Params};
pub use pipeline::{pipeline_step, SignedMatrix};
