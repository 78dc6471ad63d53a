use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::decision::Task;
use crate::error::{Error, Result};
use crate::model::FrameResult;

pub const TRACE_HEADER: &str = "frame,K,kappa,F,spike,c_lgmd,c_ffi,task,x,y";

/// One CSV line of a detector or simulation trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub frame: u64,
    pub k: f64,
    pub kappa: f64,
    pub ffi: f64,
    pub spike: bool,
    pub c_lgmd: bool,
    pub c_ffi: bool,
    pub task: Task,
    /// Vehicle position; `None` outside simulation.
    pub position: Option<(f64, f64)>,
}

impl TraceRow {
    pub fn new(frame: u64, r: &FrameResult, task: Task, position: Option<(f64, f64)>) -> Self {
        TraceRow {
            frame,
            k: r.k_raw,
            kappa: r.kappa,
            ffi: r.ffi,
            spike: r.spike,
            c_lgmd: r.c_lgmd,
            c_ffi: r.c_ffi,
            task,
            position,
        }
    }
}

pub fn write_trace_to(out: &mut impl Write, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        // `{}` on f64 prints the shortest text that parses back exactly
        write!(
            out,
            "{},{},{},{},{},{},{},{},",
            r.frame,
            r.k,
            r.kappa,
            r.ffi,
            u8::from(r.spike),
            u8::from(r.c_lgmd),
            u8::from(r.c_ffi),
            r.task
        )?;
        match r.position {
            Some((x, y)) => writeln!(out, "{x},{y}")?,
            None => writeln!(out, ",")?,
        }
    }
    Ok(())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_trace_to(&mut w, rows)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fail = |line: usize, message: String| Error::ConfigParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        _ => return Err(fail(1, format!("expected header `{TRACE_HEADER}`"))),
    }
    lines
        .map(|(i, line)| {
            let n = i + 1;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(fail(
                    n,
                    format!("expected 10 columns, found {}", cols.len()),
                ));
            }
            let num = |j: usize| {
                cols[j]
                    .parse::<f64>()
                    .map_err(|e| fail(n, format!("column {}: {e}", j + 1)))
            };
            let flag = |j: usize| match cols[j] {
                "0" => Ok(false),
                "1" => Ok(true),
                v => Err(fail(
                    n,
                    format!("column {}: expected 0 or 1, got `{v}`", j + 1),
                )),
            };
            let position = match (cols[8], cols[9]) {
                ("", "") => None,
                _ => Some((num(8)?, num(9)?)),
            };
            Ok(TraceRow {
                frame: cols[0]
                    .parse()
                    .map_err(|e| fail(n, format!("column 1: {e}")))?,
                k: num(1)?,
                kappa: num(2)?,
                ffi: num(3)?,
                spike: flag(4)?,
                c_lgmd: flag(5)?,
                c_ffi: flag(6)?,
                task: cols[7].parse().map_err(|e| fail(n, e))?,
                position,
            })
        })
        .collect()
}
