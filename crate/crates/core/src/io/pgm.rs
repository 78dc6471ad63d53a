use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Frame;

/// Binary P5 with maxval 255.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.luminance());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn fail<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            path: self.path.to_path_buf(),
            offset,
            message: message.into(),
        })
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.fail(start, format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or_default();
        match text.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.fail(start, format!("{what} `{text}` out of range")),
        }
    }
}

/// Parses a binary PGM image. `path` is only used in error messages.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Frame> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        path,
    };
    if !bytes.starts_with(b"P5") {
        return c.fail(0, "not a binary PGM (missing P5 magic)");
    }
    c.pos = 2;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval_at = {
        c.skip_space();
        c.pos
    };
    let maxval = c.number("maxval")?;
    if maxval != 255 {
        return c.fail(maxval_at, format!("unsupported maxval {maxval} (only 255)"));
    }
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return c.fail(c.pos, "expected a single whitespace byte after the header"),
    }
    if width == 0 || height == 0 {
        return c.fail(0, format!("empty image {width}x{height}"));
    }
    let need = width * height;
    let data = &bytes[c.pos..];
    if data.len() != need {
        return c.fail(
            c.pos + data.len().min(need),
            format!(
                "expected {need} pixel bytes for {width}x{height}, found {}",
                data.len()
            ),
        );
    }
    Frame::new(width, height, data.to_vec())
}

pub fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}
