//! Shared domain types: frames, the network parameter set, per-stream layer
//! state and per-frame results.

use std::fmt;

use crate::decision::SpikeWindow;
use crate::error::{Error, Result};
use crate::pipeline::SignedMatrix;

/// Working frame width of the detector camera.
pub const DEFAULT_WIDTH: usize = 99;
/// Working frame height of the detector camera.
pub const DEFAULT_HEIGHT: usize = 72;
/// Inhibition radius; the inhibition kernel is `(2r+1) x (2r+1)`.
pub const INHIBITION_RADIUS: usize = 2;
/// Smallest frame edge the pipeline accepts.
pub const MIN_PIPELINE_EDGE: usize = 2 * INHIBITION_RADIUS + 1;

/// An 8-bit luminance image, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    width: usize,
    height: usize,
    luminance: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, luminance: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "frame must be non-empty, got {width}x{height}"
            )));
        }
        if luminance.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} frame needs {} pixels, got {}",
                width * height,
                luminance.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            luminance,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "empty frame");
        Frame {
            width,
            height,
            luminance: vec![value; width * height],
        }
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "empty frame");
        let mut luminance = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                luminance.push(f(x, y));
            }
        }
        Frame {
            width,
            height,
            luminance,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn luminance(&self) -> &[u8] {
        &self.luminance
    }

    pub fn into_luminance(self) -> Vec<u8> {
        self.luminance
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.luminance[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.luminance[y * self.width..(y + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        self.luminance.iter().map(|&v| f64::from(v)).sum::<f64>() / self.luminance.len() as f64
    }
}

/// Normalization applied to the membrane potential before spiking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum NormMode {
    /// `tanh(sqrt(K) - n_cell*C1) / (n_cell*C2)`, the formula as printed.
    Literal,
    /// `100 * max(0, tanh((sqrt(K) - C1) / C2))`, a percent-scale reading
    /// under which the default spiking threshold is reachable.
    #[default]
    Reconstructed,
}

impl NormMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::Literal => "literal",
            NormMode::Reconstructed => "reconstructed",
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NormMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "literal" => Ok(NormMode::Literal),
            "reconstructed" => Ok(NormMode::Reconstructed),
            other => Err(format!(
                "unknown norm_mode `{other}` (literal|reconstructed)"
            )),
        }
    }
}

/// How convolutions treat taps that fall outside the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BorderMode {
    #[default]
    ZeroPad,
}

impl BorderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BorderMode::ZeroPad => "zero_pad",
        }
    }
}

impl fmt::Display for BorderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BorderMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero_pad" => Ok(BorderMode::ZeroPad),
            other => Err(format!("unknown border_mode `{other}` (zero_pad)")),
        }
    }
}

/// Network constants of the LGMD model plus engine options.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// Inhibition coefficient `W_I`.
    pub w_i: f64,
    /// Grouping decay constant `C_w`.
    pub c_w: f64,
    /// FFI threshold, in mean absolute luminance change.
    pub t_ffi: f64,
    /// Grouping decay threshold `T_de`.
    pub t_de: f64,
    /// Spiking threshold on the normalized excitation.
    pub t_s: f64,
    /// Cell count; must equal frame width x height.
    pub n_cell: usize,
    /// Consecutive spikes required to confirm a collision.
    pub n_sp: usize,
    pub c_1: f64,
    pub c_2: f64,
    /// Inhibition radius. Fixed at 2.
    pub radius: usize,
    pub norm_mode: NormMode,
    pub border_mode: BorderMode,
}

impl Default for Params {
    fn default() -> Self {
        params_default()
    }
}

pub fn params_default() -> Params {
    Params {
        w_i: 1.0,
        c_w: 4.0,
        t_ffi: 90.0,
        t_de: 500.0,
        t_s: 35.0,
        n_cell: DEFAULT_WIDTH * DEFAULT_HEIGHT,
        n_sp: 5,
        c_1: 150.0,
        c_2: 80.0,
        radius: INHIBITION_RADIUS,
        norm_mode: NormMode::Reconstructed,
        border_mode: BorderMode::ZeroPad,
    }
}

/// One broken parameter invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Params {
    /// Collects every violated invariant for a `frame_w x frame_h` stream.
    pub fn validate(
        &self,
        frame_w: usize,
        frame_h: usize,
    ) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let mut positive = |key: &'static str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Violation {
                    key,
                    message: format!("{key} must be positive (got {v})"),
                });
            }
        };
        positive("W_I", self.w_i);
        positive("C_w", self.c_w);
        positive("T_FFI", self.t_ffi);
        positive("T_de", self.t_de);
        positive("T_s", self.t_s);
        positive("C_1", self.c_1);
        positive("C_2", self.c_2);
        if self.n_sp == 0 {
            out.push(Violation {
                key: "n_sp",
                message: "n_sp must be positive (got 0)".into(),
            });
        }
        if self.radius != INHIBITION_RADIUS {
            out.push(Violation {
                key: "r",
                message: format!("r is fixed at {INHIBITION_RADIUS} (got {})", self.radius),
            });
        }
        if frame_w < MIN_PIPELINE_EDGE || frame_h < MIN_PIPELINE_EDGE {
            out.push(Violation {
                key: "frame",
                message: format!(
                    "frame {frame_w}x{frame_h} is smaller than {MIN_PIPELINE_EDGE}x{MIN_PIPELINE_EDGE}"
                ),
            });
        }
        let cells = frame_w * frame_h;
        if self.n_cell != cells {
            out.push(Violation {
                key: "n_cell",
                message: format!(
                    "n_cell = {} does not match {frame_w}x{frame_h} frame (n_cell ≠ {cells})",
                    self.n_cell
                ),
            });
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn validated(self, frame_w: usize, frame_h: usize) -> Result<Self> {
        self.validate(frame_w, frame_h).map_err(Error::Validation)?;
        Ok(self)
    }
}

/// Rolling state of one frame stream.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub(crate) prev_luminance: Frame,
    pub(crate) prev_p: SignedMatrix,
    pub(crate) spike_window: SpikeWindow,
    pub(crate) frame_index: u64,
}

impl LayerState {
    pub fn new(width: usize, height: usize, n_sp: usize) -> Self {
        LayerState {
            prev_luminance: Frame::filled(width, height, 0),
            prev_p: SignedMatrix::zeros(width, height),
            spike_window: SpikeWindow::new(n_sp),
            frame_index: 0,
        }
    }

    pub fn for_params(params: &Params, width: usize, height: usize) -> Self {
        Self::new(width, height, params.n_sp)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.prev_p.dims()
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn prev_luminance(&self) -> &Frame {
        &self.prev_luminance
    }

    pub fn prev_p(&self) -> &SignedMatrix {
        &self.prev_p
    }

    pub fn spike_window(&self) -> &SpikeWindow {
        &self.spike_window
    }
}

/// Per-frame detector outputs.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FrameResult {
    /// Membrane potential `K_f`.
    pub k_raw: f64,
    /// Normalized excitation.
    pub kappa: f64,
    /// FFI level `F_f`.
    pub ffi: f64,
    pub spike: bool,
    pub c_lgmd: bool,
    pub c_ffi: bool,
}
