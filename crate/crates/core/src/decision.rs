//! Spike generation, collision confirmation, FFI gating and the
//! cruise/avoid/slowdown task scheduler.

use std::collections::VecDeque;
use std::fmt;

use crate::model::FrameResult;

/// A spike fires when the normalized excitation reaches the threshold.
pub fn spike(kappa: f64, t_s: f64) -> bool {
    kappa >= t_s
}

pub fn ffi_trigger(ffi: f64, t_ffi: f64) -> bool {
    ffi >= t_ffi
}

/// True iff the window holds at least `n_sp` entries and the newest `n_sp`
/// are all spikes.
pub fn collision_confirm(w: &SpikeWindow, n_sp: usize) -> bool {
    n_sp > 0 && w.len() >= n_sp && w.entries.iter().rev().take(n_sp).all(|&s| s)
}

/// Bounded spike history, newest last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeWindow {
    capacity: usize,
    entries: VecDeque<bool>,
}

impl SpikeWindow {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        SpikeWindow {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn from_entries(capacity: usize, entries: &[bool]) -> Self {
        let mut w = Self::new(capacity);
        entries.iter().for_each(|&e| w.push(e));
        w
    }

    pub fn push(&mut self, spike: bool) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(spike);
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.entries.iter().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Task {
    #[default]
    Cruise,
    Avoid,
    Slowdown,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Cruise => "cruise",
            Task::Avoid => "avoid",
            Task::Slowdown => "slowdown",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cruise" => Ok(Task::Cruise),
            "avoid" => Ok(Task::Avoid),
            "slowdown" => Ok(Task::Slowdown),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Which end of the route the vehicle is cruising toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Endpoint {
    Start,
    #[default]
    Destination,
}

impl Endpoint {
    pub fn other(self) -> Self {
        match self {
            Endpoint::Start => Endpoint::Destination,
            Endpoint::Destination => Endpoint::Start,
        }
    }
}

/// Sub-phase of the avoid task: stop forward motion, then shift sideways.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum AvoidPhase {
    #[default]
    Brake,
    Shift,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskState {
    pub task: Task,
    /// Fraction of the lateral shift completed; zero outside `Avoid`.
    pub avoid_progress: f64,
    pub cruise_target: Endpoint,
    pub avoid_phase: AvoidPhase,
    /// Lateral coordinate where the current shift started.
    pub shift_origin: f64,
    /// Length of the current shift (m).
    pub shift_length: f64,
    /// Lateral coordinate of the original cruise line, fixed by the first
    /// avoid manoeuvre.
    pub route_lateral: Option<f64>,
    /// Forward speed setpoint issued on the previous step.
    pub forward_setpoint: f64,
    /// Collision flag seen on the previous step, for edge detection.
    pub prev_c_lgmd: bool,
}

impl Default for TaskState {
    fn default() -> Self {
        TaskState {
            task: Task::Cruise,
            avoid_progress: 0.0,
            cruise_target: Endpoint::Destination,
            avoid_phase: AvoidPhase::Brake,
            shift_origin: 0.0,
            shift_length: 0.0,
            route_lateral: None,
            forward_setpoint: 0.0,
            prev_c_lgmd: false,
        }
    }
}

/// Velocity setpoints in the vehicle frame (m/s). Positive lateral is to
/// the right of the heading.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MotionCommand {
    pub forward: f64,
    pub lateral: f64,
}

/// What the scheduler knows about the vehicle besides the detector flags.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NavFeedback {
    pub forward_speed: f64,
    /// Position along the rightward lateral axis (m).
    pub lateral_position: f64,
    pub target_reached: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchedulerConfig {
    pub cruise_speed: f64,
    /// Lateral distance covered by one avoid manoeuvre (m).
    pub shift_distance: f64,
    /// Forward speed multiplier applied per frame while slowing down.
    pub slowdown_factor: f64,
    /// Forward speed below which the avoid brake phase counts as stopped.
    pub stop_tolerance: f64,
    /// Largest total rightward offset from the original cruise line; a shift
    /// is shortened so the vehicle never goes further.
    pub max_lateral_offset: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            cruise_speed: 0.5,
            shift_distance: 1.0,
            slowdown_factor: 0.5,
            stop_tolerance: 0.02,
            max_lateral_offset: 1.0,
        }
    }
}

impl SchedulerConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<(), String> {
        if !(self.cruise_speed > 0.0) {
            return Err("cruise_speed must be positive".into());
        }
        if !(self.shift_distance > 0.0) {
            return Err("shift_distance must be positive".into());
        }
        if !(self.slowdown_factor > 0.0 && self.slowdown_factor < 1.0) {
            return Err("slowdown_factor must lie in (0, 1)".into());
        }
        if !(self.stop_tolerance > 0.0) {
            return Err("stop_tolerance must be positive".into());
        }
        if !(self.max_lateral_offset >= 0.0) {
            return Err("max_lateral_offset must be non-negative".into());
        }
        Ok(())
    }
}

/// One scheduler tick.
///
/// FFI has priority over everything except a running avoid manoeuvre. An
/// avoid starts only on a rising edge of `c_lgmd` seen while cruising, and
/// further collision flags are ignored until the lateral shift completes.
pub fn scheduler_step(
    ts: TaskState,
    c_lgmd: bool,
    c_ffi: bool,
    nav: &NavFeedback,
    cfg: &SchedulerConfig,
) -> (TaskState, MotionCommand) {
    let rising = c_lgmd && !ts.prev_c_lgmd;
    let mut next = TaskState {
        prev_c_lgmd: c_lgmd,
        ..ts
    };

    if c_ffi && ts.task != Task::Avoid {
        next.task = Task::Slowdown;
        next.avoid_progress = 0.0;
        let base = if ts.task == Task::Slowdown {
            ts.forward_setpoint
        } else {
            nav.forward_speed.max(0.0).min(cfg.cruise_speed)
        };
        next.forward_setpoint = base * cfg.slowdown_factor;
        return (next, forward(next.forward_setpoint));
    }

    match ts.task {
        Task::Cruise if rising => {
            next.task = Task::Avoid;
            next.avoid_phase = AvoidPhase::Brake;
            next.avoid_progress = 0.0;
            next.shift_origin = nav.lateral_position;
            next.route_lateral = Some(ts.route_lateral.unwrap_or(nav.lateral_position));
            next.forward_setpoint = 0.0;
            (next, MotionCommand::default())
        }
        Task::Cruise | Task::Slowdown => {
            next.task = Task::Cruise;
            if nav.target_reached {
                next.cruise_target = ts.cruise_target.other();
            }
            next.forward_setpoint = cfg.cruise_speed;
            (next, forward(cfg.cruise_speed))
        }
        Task::Avoid => {
            let measured = match ts.avoid_phase {
                AvoidPhase::Brake => 0.0,
                AvoidPhase::Shift if ts.shift_length <= 0.0 => 1.0,
                AvoidPhase::Shift => (nav.lateral_position - ts.shift_origin) / ts.shift_length,
            };
            let progress = ts.avoid_progress.max(measured).clamp(0.0, 1.0);
            if progress >= 1.0 {
                next.task = Task::Cruise;
                next.avoid_progress = 0.0;
                next.avoid_phase = AvoidPhase::Brake;
                next.forward_setpoint = cfg.cruise_speed;
                return (next, forward(cfg.cruise_speed));
            }
            next.avoid_progress = progress;
            next.forward_setpoint = 0.0;
            match ts.avoid_phase {
                AvoidPhase::Brake if nav.forward_speed.abs() > cfg.stop_tolerance => {
                    (next, MotionCommand::default())
                }
                AvoidPhase::Brake => {
                    let route = ts.route_lateral.unwrap_or(ts.shift_origin);
                    let room = route + cfg.max_lateral_offset - nav.lateral_position;
                    next.avoid_phase = AvoidPhase::Shift;
                    next.shift_origin = nav.lateral_position;
                    next.shift_length = cfg.shift_distance.min(room).max(0.0);
                    if next.shift_length <= 0.0 {
                        // already at the offset limit: stopping was the manoeuvre
                        next.task = Task::Cruise;
                        next.avoid_progress = 0.0;
                        next.avoid_phase = AvoidPhase::Brake;
                        next.forward_setpoint = cfg.cruise_speed;
                        return (next, forward(cfg.cruise_speed));
                    }
                    (next, lateral(cfg.cruise_speed))
                }
                AvoidPhase::Shift => (next, lateral(cfg.cruise_speed)),
            }
        }
    }
}

/// Drives the scheduler from a recorded detector output, assuming the
/// vehicle tracks every command exactly (cruising from the first frame).
pub fn replay_scheduler(
    results: &[FrameResult],
    cfg: &SchedulerConfig,
    fps: f64,
) -> Vec<(TaskState, MotionCommand)> {
    let mut ts = TaskState {
        forward_setpoint: cfg.cruise_speed,
        ..TaskState::default()
    };
    let mut nav = NavFeedback {
        forward_speed: cfg.cruise_speed,
        ..NavFeedback::default()
    };
    results
        .iter()
        .map(|r| {
            let (next, cmd) = scheduler_step(ts, r.c_lgmd, r.c_ffi, &nav, cfg);
            nav.forward_speed = cmd.forward;
            nav.lateral_position += cmd.lateral / fps;
            ts = next;
            (next, cmd)
        })
        .collect()
}

fn forward(v: f64) -> MotionCommand {
    MotionCommand {
        forward: v,
        lateral: 0.0,
    }
}

fn lateral(v: f64) -> MotionCommand {
    MotionCommand {
        forward: 0.0,
        lateral: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: bool = true;
    const F: bool = false;

    #[test]
    fn spike_threshold_inclusive() {
        assert!(spike(35.0, 35.0));
        assert!(!spike(0.0, 35.0));
        assert!(!spike(34.999, 35.0));
    }

    #[test]
    fn ffi_threshold_inclusive() {
        assert!(ffi_trigger(90.0, 90.0));
        assert!(!ffi_trigger(0.0, 90.0));
        assert!(!ffi_trigger(89.99, 90.0));
    }

    #[test]
    fn collision_needs_full_run() {
        assert!(collision_confirm(
            &SpikeWindow::from_entries(5, &[T, T, T, T, T]),
            5
        ));
        assert!(!collision_confirm(
            &SpikeWindow::from_entries(5, &[T, T, T, T, F]),
            5
        ));
        assert!(!collision_confirm(
            &SpikeWindow::from_entries(5, &[T, T, T, T]),
            5
        ));
        assert!(collision_confirm(
            &SpikeWindow::from_entries(8, &[F, F, T, T, T, T, T]),
            5
        ));
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = SpikeWindow::new(3);
        for s in [T, F, F, T] {
            w.push(s);
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.iter().collect::<Vec<_>>(), [F, F, T]);
    }

    fn cruising() -> TaskState {
        TaskState {
            forward_setpoint: 0.5,
            ..TaskState::default()
        }
    }

    #[test]
    fn collision_while_cruising_starts_avoid() {
        let cfg = SchedulerConfig::default();
        let (ts, cmd) = scheduler_step(cruising(), T, F, &NavFeedback::default(), &cfg);
        assert_eq!(ts.task, Task::Avoid);
        assert_eq!(ts.avoid_phase, AvoidPhase::Brake);
        assert_eq!(cmd, MotionCommand::default());
    }

    #[test]
    fn ffi_suppresses_avoid() {
        let cfg = SchedulerConfig::default();
        let nav = NavFeedback {
            forward_speed: 0.5,
            ..Default::default()
        };
        let (ts, cmd) = scheduler_step(cruising(), T, T, &nav, &cfg);
        assert_eq!(ts.task, Task::Slowdown);
        assert_eq!(cmd.forward, 0.25);
        let (ts, cmd) = scheduler_step(ts, T, T, &nav, &cfg);
        assert_eq!(ts.task, Task::Slowdown);
        assert_eq!(cmd.forward, 0.125);
        let (ts, cmd) = scheduler_step(ts, F, F, &nav, &cfg);
        assert_eq!(ts.task, Task::Cruise);
        assert_eq!(cmd.forward, 0.5);
    }

    #[test]
    fn completed_avoid_resumes_cruise() {
        let cfg = SchedulerConfig::default();
        let ts = TaskState {
            task: Task::Avoid,
            avoid_progress: 1.0,
            avoid_phase: AvoidPhase::Shift,
            ..TaskState::default()
        };
        let (next, cmd) = scheduler_step(ts, F, F, &NavFeedback::default(), &cfg);
        assert_eq!(next.task, Task::Cruise);
        assert_eq!(next.cruise_target, ts.cruise_target);
        assert_eq!(next.avoid_progress, 0.0);
        assert_eq!(cmd.forward, cfg.cruise_speed);
    }

    #[test]
    fn avoid_brakes_then_shifts_right() {
        let cfg = SchedulerConfig::default();
        let moving = NavFeedback {
            forward_speed: 0.3,
            lateral_position: 2.0,
            ..Default::default()
        };
        let (ts, _) = scheduler_step(cruising(), T, F, &moving, &cfg);
        let (ts, cmd) = scheduler_step(ts, T, F, &moving, &cfg);
        assert_eq!(
            (ts.avoid_phase, cmd),
            (AvoidPhase::Brake, MotionCommand::default())
        );
        let stopped = NavFeedback {
            forward_speed: 0.0,
            lateral_position: 2.0,
            ..Default::default()
        };
        let (ts, cmd) = scheduler_step(ts, T, T, &stopped, &cfg);
        assert_eq!(ts.task, Task::Avoid, "FFI must not interrupt an avoid");
        assert_eq!(ts.avoid_phase, AvoidPhase::Shift);
        assert_eq!(cmd.lateral, cfg.cruise_speed);
        let half = NavFeedback {
            lateral_position: 2.5,
            ..stopped
        };
        let (ts, _) = scheduler_step(ts, F, F, &half, &cfg);
        assert!((ts.avoid_progress - 0.5).abs() < 1e-12);
        let done = NavFeedback {
            lateral_position: 3.0,
            ..stopped
        };
        let (ts, _) = scheduler_step(ts, F, F, &done, &cfg);
        assert_eq!(ts.task, Task::Cruise);
    }

    #[test]
    fn shifts_stop_at_offset_limit() {
        let cfg = SchedulerConfig {
            max_lateral_offset: 1.5,
            ..SchedulerConfig::default()
        };
        let at = |x: f64| NavFeedback {
            lateral_position: x,
            ..Default::default()
        };
        let (ts, _) = scheduler_step(cruising(), T, F, &at(0.0), &cfg);
        let (ts, _) = scheduler_step(ts, T, F, &at(0.0), &cfg);
        assert_eq!(ts.shift_length, 1.0);
        let (ts, _) = scheduler_step(ts, F, F, &at(1.0), &cfg);
        assert_eq!(ts.task, Task::Cruise);

        let (ts, _) = scheduler_step(ts, T, F, &at(1.0), &cfg);
        let (ts, _) = scheduler_step(ts, T, F, &at(1.0), &cfg);
        assert_eq!((ts.task, ts.shift_length), (Task::Avoid, 0.5));
        let (ts, _) = scheduler_step(ts, F, F, &at(1.5), &cfg);
        assert_eq!(ts.task, Task::Cruise);

        // at the limit a new alert only stops the vehicle
        let (ts, cmd) = scheduler_step(ts, T, F, &at(1.5), &cfg);
        assert_eq!((ts.task, cmd), (Task::Avoid, MotionCommand::default()));
        let (ts, cmd) = scheduler_step(ts, T, F, &at(1.5), &cfg);
        assert_eq!(ts.task, Task::Cruise);
        assert_eq!(cmd.lateral, 0.0);
    }

    #[test]
    fn replay_runs_a_full_avoid() {
        let cfg = SchedulerConfig::default();
        let hit = FrameResult {
            c_lgmd: true,
            ..FrameResult::default()
        };
        let mut results = vec![FrameResult::default(); 3];
        results.extend([hit; 5]);
        results.extend(vec![FrameResult::default(); 80]);
        let out = replay_scheduler(&results, &cfg, 30.0);
        let tasks: Vec<Task> = out.iter().map(|(t, _)| t.task).collect();
        assert_eq!(tasks[2], Task::Cruise);
        assert_eq!(tasks[3], Task::Avoid);
        // one brake frame (tracking is exact), then 1 m at 0.5 m/s = 60 frames
        let avoid = tasks.iter().filter(|&&t| t == Task::Avoid).count();
        assert_eq!(avoid, 61);
        assert_eq!(*tasks.last().unwrap(), Task::Cruise);
    }

    #[test]
    fn held_collision_flag_is_not_a_new_edge() {
        let cfg = SchedulerConfig::default();
        let ts = TaskState {
            prev_c_lgmd: true,
            ..cruising()
        };
        let (ts, _) = scheduler_step(ts, T, F, &NavFeedback::default(), &cfg);
        assert_eq!(ts.task, Task::Cruise);
    }

    #[test]
    fn reaching_target_swaps_it() {
        let cfg = SchedulerConfig::default();
        let nav = NavFeedback {
            target_reached: true,
            ..Default::default()
        };
        let (ts, _) = scheduler_step(cruising(), F, F, &nav, &cfg);
        assert_eq!(ts.cruise_target, Endpoint::Start);
        // collision alert on the same frame wins over the swap
        let (ts, _) = scheduler_step(cruising(), T, F, &nav, &cfg);
        assert_eq!(ts.task, Task::Avoid);
        assert_eq!(ts.cruise_target, Endpoint::Destination);
    }
}
