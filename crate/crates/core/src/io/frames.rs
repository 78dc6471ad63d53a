use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Frame;

use super::pgm::{read_pgm, write_pgm};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameFormat {
    Pgm,
    /// Headerless 8-bit luminance, row-major, size taken from config.
    RawY8,
}

impl FrameFormat {
    fn matches(self, path: &Path) -> bool {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match self {
            FrameFormat::Pgm => ext.as_deref() == Some("pgm"),
            FrameFormat::RawY8 => matches!(ext.as_deref(), Some("y8" | "raw")),
        }
    }
}

impl std::str::FromStr for FrameFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pgm" => Ok(FrameFormat::Pgm),
            "y8" | "raw_y8" => Ok(FrameFormat::RawY8),
            other => Err(format!("unknown frame format `{other}` (pgm|y8)")),
        }
    }
}

/// Reads a directory (files with the format's extension, in name order)
/// or a single file. Frames larger than `width x height` are downsampled.
pub fn read_frames(
    path: &Path,
    format: FrameFormat,
    width: usize,
    height: usize,
) -> Result<Vec<Frame>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let files = if meta.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.is_file() && format.matches(&p) {
                files.push(p);
            }
        }
        files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        if files.is_empty() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no frame files in directory"),
            ));
        }
        files
    } else {
        vec![path.to_path_buf()]
    };
    read_frame_files(&files, format, width, height)
}

pub fn read_frame_files(
    files: &[PathBuf],
    format: FrameFormat,
    width: usize,
    height: usize,
) -> Result<Vec<Frame>> {
    files
        .iter()
        .map(|p| {
            let frame = match format {
                FrameFormat::Pgm => read_pgm(p)?,
                FrameFormat::RawY8 => read_raw(p, width, height)?,
            };
            if frame.dims() == (width, height) {
                Ok(frame)
            } else {
                downsample(&frame, width, height)
            }
        })
        .collect()
}

fn read_raw(path: &Path, width: usize, height: usize) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let need = width * height;
    if bytes.len() != need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len().min(need),
            message: format!(
                "expected {need} bytes for {width}x{height}, found {}",
                bytes.len()
            ),
        });
    }
    Frame::new(width, height, bytes)
}

/// Overlap of source cells with each destination cell along one axis, as
/// `(source index, weight)` lists whose weights sum to `src / dst`.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let (lo, hi) = (d as f64 * scale, (d + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .map(|s| (s, (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Area-weighted box filter to a smaller (or equal) size.
pub fn downsample(src: &Frame, dst_w: usize, dst_h: usize) -> Result<Frame> {
    let (sw, sh) = src.dims();
    if dst_w == 0 || dst_h == 0 || dst_w > sw || dst_h > sh {
        return Err(Error::Upscale {
            src_w: sw,
            src_h: sh,
            dst_w,
            dst_h,
        });
    }
    if (dst_w, dst_h) == (sw, sh) {
        return Ok(src.clone());
    }
    let wx = axis_weights(sw, dst_w);
    let wy = axis_weights(sh, dst_h);
    let area = (sw as f64 / dst_w as f64) * (sh as f64 / dst_h as f64);
    Ok(Frame::from_fn(dst_w, dst_h, |x, y| {
        let mut acc = 0.0;
        for &(sy, fy) in &wy[y] {
            let row = src.row(sy);
            for &(sx, fx) in &wx[x] {
                acc += fx * fy * f64::from(row[sx]);
            }
        }
        (acc / area).round().clamp(0.0, 255.0) as u8
    }))
}

/// Writes `frame_00000.pgm`, ... into `dir` plus an optional manifest.
pub fn write_frames(dir: &Path, frames: &[Frame], manifest: Option<&str>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let p = dir.join(format!("frame_{i:05}.pgm"));
        write_pgm(&p, f)?;
        paths.push(p);
    }
    if let Some(text) = manifest {
        let p = dir.join(MANIFEST_NAME);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(paths)
}
