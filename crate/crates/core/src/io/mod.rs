//! File formats: PGM and raw Y8 frames, the per-frame trace CSV and the flat
//! `key = value` configuration.

mod config;
mod frames;
mod pgm;
mod trace;

pub use config::{load_config, Config, StimOverrides};
pub use frames::{
    downsample, read_frame_files, read_frames, write_frames, FrameFormat, MANIFEST_NAME,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use trace::{read_trace, write_trace, write_trace_to, TraceRow, TRACE_HEADER};
