//! The per-frame LGMD layer cascade: photoreceptor (P), inhibition (I),
//! summation (S), grouping (Ce/G), membrane potential, normalization and the
//! feed-forward inhibition level.
//!
//! The excitatory layer is the P layer itself and is never copied. All
//! matrices hold `f64` so luminance differences, inhibited sums and grouped
//! excitations share one representation.

use crate::decision;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{Frame, FrameResult, LayerState, NormMode, Params, MIN_PIPELINE_EDGE};

/// A row-major matrix of signed values sized like a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedMatrix {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SignedMatrix {
    pub fn zeros(width: usize, height: usize) -> Self {
        SignedMatrix {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        SignedMatrix {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} matrix needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(SignedMatrix {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        SignedMatrix {
            width,
            height,
            values,
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SignedMatrix {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same(&self, other: &SignedMatrix) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }
}

/// The 5x5 lateral inhibition mask: zero at the centre, `0.25 / distance`
/// everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct InhibitionKernel {
    weights: [[f64; 5]; 5],
}

impl Default for InhibitionKernel {
    fn default() -> Self {
        Self::new()
    }
}

impl InhibitionKernel {
    pub const SIZE: usize = 5;

    pub fn new() -> Self {
        let mut weights = [[0.0; 5]; 5];
        for (r, row) in weights.iter_mut().enumerate() {
            for (c, w) in row.iter_mut().enumerate() {
                let (dx, dy) = (c as i32 - 2, r as i32 - 2);
                let d2 = dx * dx + dy * dy;
                if d2 != 0 {
                    // sqrt is correctly rounded, so each weight is the
                    // nearest double to 0.25 / distance
                    *w = 0.25 / f64::from(d2).sqrt();
                }
            }
        }
        InhibitionKernel { weights }
    }

    /// Weight at offset `(dx, dy)`, each in `-2..=2`.
    pub fn weight(&self, dx: i32, dy: i32) -> f64 {
        self.weights[(dy + 2) as usize][(dx + 2) as usize]
    }

    pub fn weights(&self) -> &[[f64; 5]; 5] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }
}

/// The 3x3 grouping mask, every entry `1/9`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupingKernel {
    weights: [[f64; 3]; 3],
}

impl Default for GroupingKernel {
    fn default() -> Self {
        Self::new()
    }
}

impl GroupingKernel {
    pub const SIZE: usize = 3;

    pub fn new() -> Self {
        GroupingKernel {
            weights: [[1.0 / 9.0; 3]; 3],
        }
    }

    pub fn weights(&self) -> &[[f64; 3]; 3] {
        &self.weights
    }
}

struct Tap {
    dx: isize,
    dy: isize,
    w: f64,
}

fn taps<const N: usize>(weights: &[[f64; N]; N]) -> Vec<Tap> {
    let half = (N / 2) as isize;
    let mut out = Vec::new();
    for (r, row) in weights.iter().enumerate() {
        for (c, &w) in row.iter().enumerate() {
            if w != 0.0 {
                out.push(Tap {
                    dx: c as isize - half,
                    dy: r as isize - half,
                    w,
                });
            }
        }
    }
    out
}

/// Zero-padded 2-D correlation. Each output cell accumulates its taps in
/// row-major kernel order, starting from zero.
fn convolve(exec: Exec, src: &SignedMatrix, taps: &[Tap]) -> SignedMatrix {
    let (w, h) = src.dims();
    let mut out = SignedMatrix::zeros(w, h);
    let values = &src.values;
    exec.for_each_row(&mut out.values, w, |y, row| {
        for t in taps {
            let sy = y as isize + t.dy;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            let src_row = &values[sy as usize * w..(sy as usize + 1) * w];
            // output columns whose source column x + dx is inside the frame
            let x0 = (-t.dx).max(0) as usize;
            let x1 = (w as isize - t.dx).min(w as isize).max(0) as usize;
            if x0 >= x1 {
                continue;
            }
            let s0 = (x0 as isize + t.dx) as usize;
            let dst = &mut row[x0..x1];
            let s = &src_row[s0..s0 + dst.len()];
            for (d, v) in dst.iter_mut().zip(s) {
                *d += t.w * v;
            }
        }
    });
    out
}

/// Photoreceptor layer: per-pixel luminance change.
pub fn p_layer(cur: &Frame, prev: &Frame) -> Result<SignedMatrix> {
    if cur.dims() != prev.dims() {
        return Err(Error::dims(prev.dims(), cur.dims()));
    }
    let values = cur
        .luminance()
        .iter()
        .zip(prev.luminance())
        .map(|(&c, &p)| f64::from(c) - f64::from(p))
        .collect();
    Ok(SignedMatrix {
        width: cur.width(),
        height: cur.height(),
        values,
    })
}

/// Inhibition layer: the previous frame's P matrix spread over its
/// neighbours by [`InhibitionKernel`].
pub fn i_layer(prev_p: &SignedMatrix) -> SignedMatrix {
    i_layer_with(Exec::default(), prev_p)
}

pub fn i_layer_with(exec: Exec, prev_p: &SignedMatrix) -> SignedMatrix {
    convolve(exec, prev_p, &taps(InhibitionKernel::new().weights()))
}

/// Summation layer. Where excitation and inhibition disagree in sign (or
/// either is zero) the excitation passes unchanged.
pub fn s_layer(e: &SignedMatrix, i: &SignedMatrix, w_i: f64) -> Result<SignedMatrix> {
    e.check_same(i)?;
    let values = e
        .values
        .iter()
        .zip(&i.values)
        .map(|(&e, &i)| if e * i <= 0.0 { e } else { e - i * w_i })
        .collect();
    Ok(SignedMatrix {
        width: e.width,
        height: e.height,
        values,
    })
}

/// Passing coefficients: the S layer under a 3x3 mean filter.
pub fn ce_layer(s: &SignedMatrix) -> SignedMatrix {
    ce_layer_with(Exec::default(), s)
}

pub fn ce_layer_with(exec: Exec, s: &SignedMatrix) -> SignedMatrix {
    convolve(exec, s, &taps(GroupingKernel::new().weights()))
}

/// Per-frame grouping scale `0.01 + max|Ce / C_w|`.
pub fn grouping_scale(ce: &SignedMatrix, c_w: f64) -> f64 {
    0.01 + ce
        .values
        .iter()
        .fold(0.0_f64, |m, &v| m.max((v / c_w).abs()))
}

/// Grouping layer followed by the decay threshold: cells whose grouped
/// excitation falls below `t_de` are zeroed.
pub fn g_layer(s: &SignedMatrix, ce: &SignedMatrix, c_w: f64, t_de: f64) -> Result<SignedMatrix> {
    s.check_same(ce)?;
    let omega = grouping_scale(ce, c_w);
    let values = s
        .values
        .iter()
        .zip(&ce.values)
        .map(|(&s, &c)| {
            let g = s * c / omega;
            if g >= t_de {
                g
            } else {
                0.0
            }
        })
        .collect();
    Ok(SignedMatrix {
        width: s.width,
        height: s.height,
        values,
    })
}

/// LGMD membrane potential: sum of absolute thresholded grouped excitations.
pub fn membrane_potential(g: &SignedMatrix) -> f64 {
    g.values.iter().map(|v| v.abs()).sum()
}

pub fn normalize(k: f64, params: &Params) -> f64 {
    normalize_with(k, params.norm_mode, params.n_cell, params.c_1, params.c_2)
}

pub fn normalize_with(k: f64, mode: NormMode, n_cell: usize, c_1: f64, c_2: f64) -> f64 {
    let n = n_cell as f64;
    match mode {
        NormMode::Literal => (k.sqrt() - n * c_1).tanh() / (n * c_2),
        NormMode::Reconstructed => 100.0 * ((k.sqrt() - c_1) / c_2).tanh().max(0.0),
    }
}

/// Feed-forward inhibition level: mean absolute change of the previous
/// frame's P matrix.
pub fn ffi_level(prev_p: &SignedMatrix, n_cell: usize) -> f64 {
    prev_p.values.iter().map(|v| v.abs()).sum::<f64>() / n_cell as f64
}

/// Every intermediate layer of one frame, for inspection and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct Layers {
    pub p: SignedMatrix,
    pub i: SignedMatrix,
    pub s: SignedMatrix,
    pub ce: SignedMatrix,
    pub g: SignedMatrix,
}

/// Runs the layer cascade for one frame against explicit previous state.
pub fn compute_layers(
    exec: Exec,
    cur: &Frame,
    prev: &Frame,
    prev_p: &SignedMatrix,
    params: &Params,
) -> Result<Layers> {
    let p = p_layer(cur, prev)?;
    p.check_same(prev_p)?;
    let i = i_layer_with(exec, prev_p);
    let s = s_layer(&p, &i, params.w_i)?;
    let ce = ce_layer_with(exec, &s);
    let g = g_layer(&s, &ce, params.c_w, params.t_de)?;
    Ok(Layers { p, i, s, ce, g })
}

/// Advances one stream by one frame.
///
/// The very first frame has no predecessor and yields an all-zero result.
pub fn pipeline_step(
    state: &mut LayerState,
    frame: &Frame,
    params: &Params,
) -> Result<FrameResult> {
    pipeline_step_with(Exec::default(), state, frame, params)
}

pub fn pipeline_step_with(
    exec: Exec,
    state: &mut LayerState,
    frame: &Frame,
    params: &Params,
) -> Result<FrameResult> {
    if frame.dims() != state.dims() {
        return Err(Error::dims(state.dims(), frame.dims()));
    }
    if frame.width() < MIN_PIPELINE_EDGE || frame.height() < MIN_PIPELINE_EDGE {
        return Err(Error::InvalidFrame(format!(
            "pipeline needs at least {MIN_PIPELINE_EDGE}x{MIN_PIPELINE_EDGE}, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }

    if state.frame_index == 0 {
        state.prev_luminance = frame.clone();
        state.prev_p = SignedMatrix::zeros(frame.width(), frame.height());
        state.spike_window.push(false);
        state.frame_index = 1;
        return Ok(FrameResult::default());
    }

    let layers = compute_layers(exec, frame, &state.prev_luminance, &state.prev_p, params)?;
    let k_raw = membrane_potential(&layers.g);
    let kappa = normalize(k_raw, params);
    let ffi = ffi_level(&state.prev_p, params.n_cell);

    let spike = decision::spike(kappa, params.t_s);
    let c_ffi = decision::ffi_trigger(ffi, params.t_ffi);
    // FFI inhibits LGMD spikes on the frames where it fires.
    state.spike_window.push(spike && !c_ffi);
    let c_lgmd = decision::collision_confirm(&state.spike_window, params.n_sp);

    state.prev_luminance = frame.clone();
    state.prev_p = layers.p;
    state.frame_index += 1;

    Ok(FrameResult {
        k_raw,
        kappa,
        ffi,
        spike,
        c_lgmd,
        c_ffi,
    })
}

/// Runs a fresh stream over a whole sequence.
pub fn run_sequence(frames: &[Frame], params: &Params) -> Result<Vec<FrameResult>> {
    run_sequence_with(Exec::default(), frames, params)
}

pub fn run_sequence_with(
    exec: Exec,
    frames: &[Frame],
    params: &Params,
) -> Result<Vec<FrameResult>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let mut state = LayerState::for_params(params, first.width(), first.height());
    frames
        .iter()
        .map(|f| pipeline_step_with(exec, &mut state, f, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params_default;

    fn impulse(w: usize, h: usize, x: usize, y: usize, v: f64) -> SignedMatrix {
        let mut m = SignedMatrix::zeros(w, h);
        m.set(x, y, v);
        m
    }

    #[test]
    fn p_layer_identical_frames_is_zero() {
        let f = Frame::from_fn(99, 72, |x, y| ((x * 7 + y * 3) % 256) as u8);
        let p = p_layer(&f, &f).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn p_layer_uniform_difference() {
        let p = p_layer(&Frame::filled(99, 72, 200), &Frame::filled(99, 72, 90)).unwrap();
        assert!(p.values().iter().all(|&v| v == 110.0));
    }

    #[test]
    fn p_layer_rejects_mismatched_frames() {
        let err = p_layer(&Frame::filled(10, 10, 0), &Frame::filled(10, 9, 0)).unwrap_err();
        assert!(matches!(err, Error::Dimensions { .. }));
    }

    #[test]
    fn inhibition_of_zero_is_zero() {
        let i = i_layer(&SignedMatrix::zeros(20, 20));
        assert!(i.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inhibition_impulse_stamps_kernel() {
        let i = i_layer(&impulse(20, 20, 10, 10, 1.0));
        assert_eq!(i.get(10, 10), 0.0);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            assert_eq!(i.get((10 + dx) as usize, (10 + dy) as usize), 0.25);
        }
        for (dx, dy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
            let v = i.get((10 + dx) as usize, (10 + dy) as usize);
            assert!((v - 0.25 / 2f64.sqrt()).abs() < 1e-15);
        }
        for (dx, dy) in [(2, 0), (-2, 0), (0, 2), (0, -2)] {
            assert_eq!(i.get((10 + dx) as usize, (10 + dy) as usize), 0.125);
        }
        // nothing leaks beyond the radius
        assert_eq!(i.get(13, 10), 0.0);
        assert_eq!(i.get(10, 7), 0.0);
    }

    #[test]
    fn inhibition_kernel_invariants() {
        let k = InhibitionKernel::new();
        assert_eq!(k.weight(0, 0), 0.0);
        for dy in -2..=2 {
            for dx in -2..=2 {
                let w = k.weight(dx, dy);
                assert_eq!(w, k.weight(-dx, dy));
                assert_eq!(w, k.weight(dx, -dy));
                assert_eq!(w, k.weight(dy, dx));
                if (dx, dy) != (0, 0) {
                    let d = f64::from(dx * dx + dy * dy).sqrt();
                    assert!((w - 0.25 / d).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn grouping_kernel_sums_to_one() {
        let k = GroupingKernel::new();
        assert!(k.weights().iter().flatten().all(|&w| w == 1.0 / 9.0));
        let sum: f64 = k.weights().iter().flatten().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn s_layer_guard_and_subtraction() {
        let one = |v| SignedMatrix::filled(5, 5, v);
        assert_eq!(
            s_layer(&one(10.0), &one(-5.0), 1.0).unwrap().get(2, 2),
            10.0
        );
        assert_eq!(s_layer(&one(10.0), &one(4.0), 1.0).unwrap().get(2, 2), 6.0);
        assert_eq!(s_layer(&one(0.0), &one(7.0), 1.0).unwrap().get(2, 2), 0.0);
        assert_eq!(
            s_layer(&one(-10.0), &one(-4.0), 0.5).unwrap().get(2, 2),
            -8.0
        );
    }

    #[test]
    fn ce_layer_uniform_and_borders() {
        let ce = ce_layer(&SignedMatrix::filled(8, 6, 9.0));
        assert!((ce.get(3, 3) - 9.0).abs() < 1e-12);
        assert!((ce.get(3, 0) - 6.0).abs() < 1e-12);
        assert!((ce.get(0, 3) - 6.0).abs() < 1e-12);
        assert!((ce.get(0, 0) - 4.0).abs() < 1e-12);
        assert!((ce.get(7, 5) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ce_layer_impulse_spreads_ninth() {
        let ce = ce_layer(&impulse(9, 9, 4, 4, 90.0));
        for y in 0usize..9 {
            for x in 0usize..9 {
                let inside = x.abs_diff(4) <= 1 && y.abs_diff(4) <= 1;
                let want = if inside { 10.0 } else { 0.0 };
                assert!((ce.get(x, y) - want).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn g_layer_zero_input() {
        let z = SignedMatrix::zeros(10, 10);
        assert_eq!(grouping_scale(&z, 4.0), 0.01);
        let g = g_layer(&z, &z, 4.0, 500.0).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn g_layer_uniform_cluster_passes() {
        let s = SignedMatrix::filled(99, 72, 600.0);
        let ce = ce_layer(&s);
        assert!((grouping_scale(&ce, 4.0) - 150.01).abs() < 1e-9);
        let g = g_layer(&s, &ce, 4.0, 500.0).unwrap();
        // hand evaluation: 600 * 600 / 150.01
        assert!((g.get(50, 30) - 2399.84).abs() < 0.01);
    }

    #[test]
    fn g_layer_filters_sporadic_excitation() {
        let s = impulse(20, 20, 10, 10, 600.0);
        let ce = ce_layer(&s);
        assert!((ce.get(10, 10) - 66.6667).abs() < 1e-3);
        assert!((grouping_scale(&ce, 4.0) - 16.6767).abs() < 1e-3);
        let g = g_layer(&s, &ce, 4.0, 500.0).unwrap();
        assert!((g.get(10, 10) - 2398.56).abs() < 0.01);
        assert_eq!(g.get(11, 10), 0.0);
        assert_eq!(g.values().iter().filter(|&&v| v != 0.0).count(), 1);

        let weak = impulse(20, 20, 10, 10, 60.0);
        let ce = ce_layer(&weak);
        let g = g_layer(&weak, &ce, 4.0, 500.0).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        let raw = 60.0 * ce.get(10, 10) / grouping_scale(&ce, 4.0);
        assert!((raw - 238.2).abs() < 0.5, "{raw}");
    }

    #[test]
    fn membrane_potential_sums_magnitudes() {
        assert_eq!(membrane_potential(&SignedMatrix::zeros(99, 72)), 0.0);
        assert_eq!(
            membrane_potential(&SignedMatrix::filled(99, 72, 500.0)),
            3_564_000.0
        );
        let mixed = SignedMatrix::from_vec(2, 2, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        assert_eq!(membrane_potential(&mixed), 10.0);
    }

    #[test]
    fn normalize_examples() {
        let mut p = params_default();
        assert_eq!(normalize(0.0, &p), 0.0);
        let k = normalize(32_400.0, &p);
        assert!((k - 100.0 * (30.0f64 / 80.0).tanh()).abs() < 1e-12);
        assert!((k - 35.835).abs() < 1e-3 && k >= p.t_s);
        p.norm_mode = NormMode::Literal;
        let lit = normalize(0.0, &p);
        assert!((lit + 1.0 / 570_240.0).abs() < 1e-15);
        assert!((lit + 1.7536e-6).abs() < 1e-10);
    }

    #[test]
    fn ffi_level_examples() {
        assert_eq!(ffi_level(&SignedMatrix::zeros(99, 72), 7128), 0.0);
        assert_eq!(ffi_level(&SignedMatrix::filled(99, 72, -90.0), 7128), 90.0);
        let half = SignedMatrix::from_fn(99, 72, |_, y| if y < 36 { 200.0 } else { 0.0 });
        assert_eq!(ffi_level(&half, 7128), 100.0);
    }

    #[test]
    fn first_frame_is_all_zero() {
        let p = params_default();
        let mut st = LayerState::for_params(&p, 99, 72);
        let r = pipeline_step(&mut st, &Frame::filled(99, 72, 200), &p).unwrap();
        assert_eq!(r, FrameResult::default());
        assert_eq!(st.frame_index(), 1);
    }

    #[test]
    fn static_scene_stays_silent() {
        let p = params_default();
        let f = Frame::from_fn(99, 72, |x, y| ((x / 4 + y / 4) % 2 * 200) as u8);
        let out = run_sequence(&vec![f; 20], &p).unwrap();
        assert!(out
            .iter()
            .all(|r| r.k_raw == 0.0 && r.ffi == 0.0 && !r.spike && !r.c_lgmd));
    }

    #[test]
    fn step_rejects_wrong_size() {
        let p = params_default();
        let mut st = LayerState::for_params(&p, 99, 72);
        assert!(pipeline_step(&mut st, &Frame::filled(98, 72, 0), &p).is_err());
    }
}
