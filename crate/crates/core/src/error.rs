use std::path::PathBuf;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    Dimensions {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid stimulus spec: {0}")]
    InvalidStimulus(String),

    #[error("invalid arena: {0}")]
    InvalidArena(String),

    #[error("pose ({x:.3}, {y:.3}) lies outside the arena bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("cannot downsample {src_w}x{src_h} to larger {dst_w}x{dst_h}")]
    Upscale {
        src_w: usize,
        src_h: usize,
        dst_w: usize,
        dst_h: usize,
    },

    #[error("{}: {message} (byte offset {offset})", path.display())]
    Format {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{}:{line}: {message}", path.display())]
    ConfigParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameters: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err,
        }
    }

    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::Dimensions {
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
