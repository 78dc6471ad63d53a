//! Synthetic test stimuli: looming square, translating square, drifting
//! square-wave grating and a panning random-texture panorama.
//!
//! Every generator is a pure function of its [`StimulusSpec`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{Frame, DEFAULT_HEIGHT, DEFAULT_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StimulusKind {
    Looming,
    Translate,
    Grating,
    Rotate,
}

impl StimulusKind {
    pub const ALL: [StimulusKind; 4] = [
        StimulusKind::Looming,
        StimulusKind::Translate,
        StimulusKind::Grating,
        StimulusKind::Rotate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StimulusKind::Looming => "looming",
            StimulusKind::Translate => "translate",
            StimulusKind::Grating => "grating",
            StimulusKind::Rotate => "rotate",
        }
    }
}

impl fmt::Display for StimulusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StimulusKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "looming" => Ok(StimulusKind::Looming),
            "translate" => Ok(StimulusKind::Translate),
            "grating" => Ok(StimulusKind::Grating),
            "rotate" => Ok(StimulusKind::Rotate),
            other => Err(format!(
                "unknown stimulus kind `{other}` (looming|translate|grating|rotate)"
            )),
        }
    }
}

/// Parameters of one synthetic sequence. Fields that do not apply to
/// `kind` are ignored by the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct StimulusSpec {
    pub kind: StimulusKind,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub object_luminance: u8,
    pub background_luminance: u8,
    /// Looming: square edge on the first frame, as a fraction of width.
    pub start_size: f64,
    /// Looming: square edge on the final (contact) frame.
    pub end_size: f64,
    /// Translate: fixed square edge as a fraction of width.
    pub object_size: f64,
    /// Translate: horizontal speed in pixels/frame.
    pub speed: f64,
    /// Grating: spatial period in pixels.
    pub period: f64,
    /// Grating: drift in pixels/frame.
    pub drift: f64,
    /// Rotate: pan speed in pixels/frame.
    pub pan: f64,
    /// Rotate: texture block edge in pixels.
    pub block: usize,
    /// Rotate: static frames before the pan starts.
    pub lead_in: usize,
    pub seed: u64,
}

impl StimulusSpec {
    /// Calibrated defaults for each kind.
    pub fn default_for(kind: StimulusKind) -> Self {
        let base = StimulusSpec {
            kind,
            frames: 150,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            object_luminance: 0,
            background_luminance: 255,
            start_size: 0.1,
            end_size: 0.9,
            object_size: 0.3,
            speed: 1.0,
            period: 24.0,
            drift: 11.0,
            pan: 4.0,
            block: 2,
            lead_in: 10,
            seed: 1,
        };
        match kind {
            StimulusKind::Looming | StimulusKind::Translate => base,
            StimulusKind::Grating => StimulusSpec {
                frames: 90,
                object_luminance: 70,
                background_luminance: 180,
                ..base
            },
            StimulusKind::Rotate => StimulusSpec { frames: 90, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidStimulus(m));
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty frame size {}x{}", self.width, self.height));
        }
        let nonneg = [
            ("speed", self.speed),
            ("drift", self.drift),
            ("pan", self.pan),
        ];
        for (k, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{k} must be a non-negative number (got {v})"));
            }
        }
        match self.kind {
            StimulusKind::Looming => {
                let fraction = |v: f64| v > 0.0 && v <= 1.0;
                if !fraction(self.start_size) || !fraction(self.end_size) {
                    return bad(format!(
                        "looming sizes must lie in (0, 1] of the frame width (got {} -> {})",
                        self.start_size, self.end_size
                    ));
                }
                if self.start_size >= self.end_size {
                    return bad(format!(
                        "looming start size {} must be below end size {}",
                        self.start_size, self.end_size
                    ));
                }
                if self.frames < 2 {
                    return bad("looming needs at least 2 frames".into());
                }
            }
            StimulusKind::Translate => {
                if !(self.object_size > 0.0 && self.object_size <= 1.0)
                    || self.object_size * self.width as f64 > self.height as f64
                {
                    return bad(format!(
                        "translate object size {} does not fit the frame",
                        self.object_size
                    ));
                }
            }
            StimulusKind::Grating => {
                if !(self.period >= 2.0 && self.period.is_finite()) {
                    return bad(format!(
                        "grating period must be >= 2 px (got {})",
                        self.period
                    ));
                }
            }
            StimulusKind::Rotate => {
                if self.block == 0 {
                    return bad("texture block must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Index of the first frame that differs from its predecessor for a
    /// rotate stimulus (pan onset).
    pub fn onset_frame(&self) -> usize {
        match self.kind {
            StimulusKind::Rotate => self.lead_in + 1,
            _ => 1,
        }
    }

    /// Edge length in pixels of the looming square at frame `t`.
    ///
    /// Constant-velocity approach: the edge grows as `k / (t0 - t)`, passing
    /// through the start size at frame 0 and the end size on the last frame.
    pub fn looming_edge(&self, t: usize) -> f64 {
        let a = self.start_size * self.width as f64;
        let b = self.end_size * self.width as f64;
        let last = (self.frames - 1) as f64;
        let t0 = last * b / (b - a);
        a * t0 / (t0 - t as f64)
    }

    pub fn generate(&self) -> Result<Vec<Frame>> {
        self.validate()?;
        Ok(match self.kind {
            StimulusKind::Looming => looming_frames(self),
            StimulusKind::Translate => translate_frames(self),
            StimulusKind::Grating => grating_frames(self),
            StimulusKind::Rotate => rotate_frames(self),
        })
    }
}

fn expect_kind(spec: &StimulusSpec, kind: StimulusKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidStimulus(format!(
            "expected a {kind} spec, got {}",
            spec.kind
        )));
    }
    Ok(())
}

pub fn gen_looming(spec: &StimulusSpec) -> Result<Vec<Frame>> {
    expect_kind(spec, StimulusKind::Looming)?;
    spec.generate()
}

pub fn gen_translate(spec: &StimulusSpec) -> Result<Vec<Frame>> {
    expect_kind(spec, StimulusKind::Translate)?;
    spec.generate()
}

pub fn gen_grating(spec: &StimulusSpec) -> Result<Vec<Frame>> {
    expect_kind(spec, StimulusKind::Grating)?;
    spec.generate()
}

pub fn gen_rotate(spec: &StimulusSpec) -> Result<Vec<Frame>> {
    expect_kind(spec, StimulusKind::Rotate)?;
    spec.generate()
}

/// Generates several sequences at once.
pub fn generate_all(exec: Exec, specs: &[StimulusSpec]) -> Vec<Result<Vec<Frame>>> {
    exec.map(specs, StimulusSpec::generate)
}

/// Pixel index range whose centres fall in `[lo, hi)`, clipped to `0..n`.
fn covered(lo: f64, hi: f64, n: usize) -> std::ops::Range<usize> {
    let first = (lo - 0.5).ceil().max(0.0);
    let end = (hi - 0.5).ceil().clamp(0.0, n as f64);
    let first = first.min(end);
    first as usize..end as usize
}

fn square(spec: &StimulusSpec, left: f64, top: f64, edge: f64) -> Frame {
    let xs = covered(left, left + edge, spec.width);
    let ys = covered(top, top + edge, spec.height);
    Frame::from_fn(spec.width, spec.height, |x, y| {
        if xs.contains(&x) && ys.contains(&y) {
            spec.object_luminance
        } else {
            spec.background_luminance
        }
    })
}

fn looming_frames(spec: &StimulusSpec) -> Vec<Frame> {
    let cx = spec.width as f64 / 2.0;
    let cy = spec.height as f64 / 2.0;
    (0..spec.frames)
        .map(|t| {
            let s = spec.looming_edge(t);
            square(spec, cx - s / 2.0, cy - s / 2.0, s)
        })
        .collect()
}

fn translate_frames(spec: &StimulusSpec) -> Vec<Frame> {
    let s = spec.object_size * spec.width as f64;
    let top = (spec.height as f64 - s) / 2.0;
    (0..spec.frames)
        .map(|t| square(spec, spec.speed * t as f64, top, s))
        .collect()
}

fn grating_frames(spec: &StimulusSpec) -> Vec<Frame> {
    (0..spec.frames)
        .map(|t| {
            let row: Vec<u8> = (0..spec.width)
                .map(|x| {
                    let phase = (x as f64 + 0.5 - spec.drift * t as f64).rem_euclid(spec.period);
                    if phase < spec.period / 2.0 {
                        spec.object_luminance
                    } else {
                        spec.background_luminance
                    }
                })
                .collect();
            Frame::from_fn(spec.width, spec.height, |x, _| row[x])
        })
        .collect()
}

/// Width of the wrapped panorama, in viewport widths.
const PANORAMA_SPAN: usize = 8;

fn rotate_frames(spec: &StimulusSpec) -> Vec<Frame> {
    let pano_w = spec.width * PANORAMA_SPAN;
    let bw = pano_w.div_ceil(spec.block);
    let bh = spec.height.div_ceil(spec.block);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blocks: Vec<bool> = (0..bw * bh).map(|_| rng.random_bool(0.5)).collect();
    let texel = |x: usize, y: usize| {
        if blocks[(y / spec.block) * bw + x / spec.block] {
            spec.object_luminance
        } else {
            spec.background_luminance
        }
    };
    (0..spec.frames)
        .map(|t| {
            let moved = t.saturating_sub(spec.lead_in) as f64 * spec.pan;
            let offset = moved.round() as usize % pano_w;
            Frame::from_fn(spec.width, spec.height, |x, y| {
                texel((x + offset) % pano_w, y)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dark_columns(f: &Frame, y: usize, dark: u8) -> usize {
        f.row(y).iter().filter(|&&v| v == dark).count()
    }

    #[test]
    fn looming_edge_grows_to_end_size() {
        let spec = StimulusSpec {
            frames: 60,
            ..StimulusSpec::default_for(StimulusKind::Looming)
        };
        let frames = gen_looming(&spec).unwrap();
        assert_eq!(frames.len(), 60);
        let edges: Vec<usize> = frames.iter().map(|f| dark_columns(f, 36, 0)).collect();
        assert!(edges.windows(2).all(|w| w[0] <= w[1]), "{edges:?}");
        assert_eq!(*edges.last().unwrap(), 89);
        assert_eq!(edges[0], 9);
    }

    #[test]
    fn looming_changes_only_on_rim() {
        let spec = StimulusSpec::default_for(StimulusKind::Looming);
        let frames = spec.generate().unwrap();
        for pair in frames.windows(2).take(40) {
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let (a, b) = (pair[0].get(x, y), pair[1].get(x, y));
                    if a != b {
                        // newly covered: outside the old square, inside the new
                        assert_eq!((a, b), (255, 0));
                    }
                }
            }
        }
    }

    #[test]
    fn looming_spec_errors() {
        let base = StimulusSpec::default_for(StimulusKind::Looming);
        let too_big = StimulusSpec {
            end_size: 1.2,
            ..base.clone()
        };
        assert!(too_big.generate().is_err());
        let inverted = StimulusSpec {
            start_size: 0.5,
            end_size: 0.4,
            ..base.clone()
        };
        assert!(inverted.generate().is_err());
        assert!(gen_looming(&StimulusSpec::default_for(StimulusKind::Grating)).is_err());
    }

    #[test]
    fn translate_static_and_exit() {
        let still = StimulusSpec {
            speed: 0.0,
            frames: 10,
            ..StimulusSpec::default_for(StimulusKind::Translate)
        };
        let frames = gen_translate(&still).unwrap();
        assert!(frames.windows(2).all(|w| w[0] == w[1]));

        let fast = StimulusSpec {
            speed: 5.0,
            frames: 40,
            ..StimulusSpec::default_for(StimulusKind::Translate)
        };
        let frames = gen_translate(&fast).unwrap();
        let last = frames.last().unwrap();
        assert!(last
            .luminance()
            .iter()
            .all(|&v| v == fast.background_luminance));
    }

    #[test]
    fn grating_drifts_by_cyclic_shift() {
        let spec = StimulusSpec {
            drift: 4.0,
            frames: 12,
            ..StimulusSpec::default_for(StimulusKind::Grating)
        };
        let frames = gen_grating(&spec).unwrap();
        for pair in frames.windows(2) {
            for y in [0, 35, 71] {
                let (a, b) = (pair[0].row(y), pair[1].row(y));
                assert_eq!(&b[4..], &a[..a.len() - 4]);
            }
        }
        // period 24 / drift 4: repeats after 6 frames
        assert_eq!(frames[0], frames[6]);
        assert_ne!(frames[0], frames[3]);

        let whole = StimulusSpec {
            drift: 24.0,
            frames: 3,
            ..spec.clone()
        };
        let frames = whole.generate().unwrap();
        assert_eq!(frames[0], frames[1]);
    }

    #[test]
    fn rotate_is_seeded() {
        let spec = StimulusSpec::default_for(StimulusKind::Rotate);
        assert_eq!(gen_rotate(&spec).unwrap(), gen_rotate(&spec).unwrap());
        let other = StimulusSpec {
            seed: 2,
            ..spec.clone()
        };
        assert_ne!(gen_rotate(&spec).unwrap(), gen_rotate(&other).unwrap());
        let frames = gen_rotate(&spec).unwrap();
        let onset = spec.onset_frame();
        assert!(frames[..onset].windows(2).all(|w| w[0] == w[1]));
        assert_ne!(frames[onset - 1], frames[onset]);
    }

    #[test]
    fn frames_have_configured_size() {
        for kind in StimulusKind::ALL {
            let spec = StimulusSpec::default_for(kind);
            for f in spec.generate().unwrap() {
                assert_eq!(f.dims(), (spec.width, spec.height));
            }
        }
    }

    #[test]
    fn parallel_generation_matches_sequential() {
        let specs: Vec<_> = StimulusKind::ALL
            .iter()
            .map(|&k| StimulusSpec::default_for(k))
            .collect();
        let a: Vec<_> = generate_all(Exec::Sequential, &specs)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let b: Vec<_> = generate_all(Exec::Parallel, &specs)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(a, b);
    }
}
