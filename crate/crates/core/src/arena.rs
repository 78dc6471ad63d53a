//! Closed-loop 2-D arena: a kinematic vehicle with a forward camera flies
//! from a start point to a destination past a textured box, steered by the
//! detector and the task scheduler.
//!
//! The camera is a column raycaster. Each image column casts one ray in the
//! horizontal plane at an equiangular offset across the field of view;
//! rows are projected cylindrically (`row offset = f * dz / distance`) so
//! vertical edges stay vertical.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decision::{
    scheduler_step, MotionCommand, NavFeedback, SchedulerConfig, Task, TaskState,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{Frame, FrameResult, LayerState, Params, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::pipeline::pipeline_step_with;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn centered(center: Vec2, size_x: f64, size_y: f64) -> Self {
        Rect {
            min: Vec2::new(center.x - size_x / 2.0, center.y - size_y / 2.0),
            max: Vec2::new(center.x + size_x / 2.0, center.y + size_y / 2.0),
        }
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn strictly_contains(&self, other: &Rect) -> bool {
        other.min.x > self.min.x
            && other.min.y > self.min.y
            && other.max.x < self.max.x
            && other.max.y < self.max.y
    }

    pub fn expanded(&self, by: f64) -> Rect {
        Rect {
            min: Vec2::new(self.min.x - by, self.min.y - by),
            max: Vec2::new(self.max.x + by, self.max.y + by),
        }
    }

    /// Euclidean distance from `p` to the rectangle; zero inside.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Distance from `p` to the nearest edge when `p` is inside.
    pub fn inner_margin(&self, p: Vec2) -> f64 {
        (p.x - self.min.x)
            .min(self.max.x - p.x)
            .min(p.y - self.min.y)
            .min(self.max.y - p.y)
    }

    /// First entry of a ray starting outside the rectangle, as
    /// `(distance, coordinate along the hit face)`.
    pub fn ray_entry(&self, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut x_face = true;
        for (o, d, lo, hi, is_x) in [
            (origin.x, dir.x, self.min.x, self.max.x, true),
            (origin.y, dir.y, self.min.y, self.max.y, false),
        ] {
            if d.abs() < 1e-12 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let (a, b) = ((lo - o) / d, (hi - o) / d);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            if near > t_enter {
                t_enter = near;
                x_face = is_x;
            }
            t_exit = t_exit.min(far);
        }
        if t_enter <= 0.0 || t_exit < t_enter {
            return None;
        }
        let hit = origin + dir * t_enter;
        let u = if x_face {
            hit.y - self.min.y
        } else {
            hit.x - self.min.x
        };
        Some((t_enter, u))
    }

    /// Exit of a ray starting inside the rectangle.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2) -> (f64, f64) {
        let tx = if dir.x > 1e-12 {
            (self.max.x - origin.x) / dir.x
        } else if dir.x < -1e-12 {
            (self.min.x - origin.x) / dir.x
        } else {
            f64::INFINITY
        };
        let ty = if dir.y > 1e-12 {
            (self.max.y - origin.y) / dir.y
        } else if dir.y < -1e-12 {
            (self.min.y - origin.y) / dir.y
        } else {
            f64::INFINITY
        };
        let t = tx.min(ty).max(0.0);
        let hit = origin + dir * t;
        let u = if tx <= ty {
            hit.y - self.min.y
        } else {
            hit.x - self.min.x
        };
        (t, u)
    }
}

/// Two-tone checkerboard over (horizontal surface coordinate, height).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Checker {
    pub period: f64,
    pub tones: [u8; 2],
}

impl Checker {
    pub fn tone(&self, u: f64, z: f64) -> u8 {
        let i = (u / self.period).floor() as i64 + (z / self.period).floor() as i64;
        self.tones[i.rem_euclid(2) as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub footprint: Rect,
    pub height: f64,
    pub texture: Checker,
}

/// Arena geometry and camera model.
#[derive(Clone, Debug, PartialEq)]
pub struct ArenaWorld {
    pub bounds: Rect,
    pub obstacle: Option<Obstacle>,
    pub wall_texture: Checker,
    pub wall_height: f64,
    /// Luminance of floor and ceiling.
    pub background: u8,
    pub camera_height: f64,
    /// Horizontal field of view in radians.
    pub fov: f64,
    pub start: Vec2,
    pub destination: Vec2,
    pub vehicle_radius: f64,
}

impl Default for ArenaWorld {
    /// A 6 m x 4 m room with a 0.5 m box in the middle of the route.
    fn default() -> Self {
        ArenaWorld {
            bounds: Rect::new(Vec2::new(0.0, 0.0), Vec2::new(6.0, 4.0)),
            obstacle: Some(Obstacle {
                footprint: Rect::centered(Vec2::new(3.0, 2.0), 0.5, 0.5),
                height: 1.0,
                texture: Checker {
                    period: 0.1,
                    tones: [0, 255],
                },
            }),
            wall_texture: Checker {
                period: 0.5,
                tones: [100, 160],
            },
            wall_height: 2.0,
            background: 128,
            camera_height: 0.5,
            fov: 70f64.to_radians(),
            start: Vec2::new(0.5, 2.0),
            destination: Vec2::new(5.0, 2.0),
            vehicle_radius: 0.17,
        }
    }
}

impl ArenaWorld {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArena(m));
        let b = &self.bounds;
        if !(b.max.x > b.min.x && b.max.y > b.min.y) {
            return bad("bounds are empty".into());
        }
        if !(self.vehicle_radius > 0.0) {
            return bad("vehicle_radius must be positive".into());
        }
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return bad(format!(
                "fov must lie in (0, 180) degrees, got {}",
                self.fov.to_degrees()
            ));
        }
        if !(self.wall_texture.period > 0.0 && self.wall_height > 0.0) {
            return bad("wall texture period and height must be positive".into());
        }
        if !(self.camera_height >= 0.0) {
            return bad("camera_height must be non-negative".into());
        }
        if !b.contains(self.start) || !b.contains(self.destination) {
            return bad("start and destination must lie inside the bounds".into());
        }
        if b.inner_margin(self.start) <= self.vehicle_radius {
            return bad("start is within one vehicle radius of a wall".into());
        }
        if (self.destination - self.start).length() < 1e-9 {
            return bad("start and destination coincide".into());
        }
        if let Some(ob) = &self.obstacle {
            if !b.strictly_contains(&ob.footprint) {
                return bad("obstacle must lie strictly inside the bounds".into());
            }
            if !(ob.height > 0.0 && ob.texture.period > 0.0) {
                return bad("obstacle height and texture period must be positive".into());
            }
            for (name, p) in [("start", self.start), ("destination", self.destination)] {
                if ob.footprint.distance_to(p) <= self.vehicle_radius {
                    return bad(format!(
                        "{name} lies inside the inflated obstacle footprint"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Heading of the start -> destination route.
    pub fn route_heading(&self) -> f64 {
        let d = self.destination - self.start;
        d.y.atan2(d.x)
    }

    /// Gap between the vehicle hull and the obstacle; `+inf` without one.
    pub fn clearance(&self, p: Vec2) -> f64 {
        match &self.obstacle {
            Some(ob) => ob.footprint.distance_to(p) - self.vehicle_radius,
            None => f64::INFINITY,
        }
    }

    pub fn hits_obstacle(&self, p: Vec2) -> bool {
        self.clearance(p) <= 0.0
    }

    pub fn hits_wall(&self, p: Vec2) -> bool {
        self.bounds.contains(p) && self.bounds.inner_margin(p) <= self.vehicle_radius
    }
}

/// Right-hand unit vector of a heading.
pub fn right_of(heading: f64) -> Vec2 {
    Vec2::new(heading.sin(), -heading.cos())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
    pub forward_speed: f64,
    /// Positive to the right of the heading.
    pub lateral_speed: f64,
}

impl Pose {
    pub fn at(position: Vec2, heading: f64) -> Self {
        Pose {
            position,
            heading,
            forward_speed: 0.0,
            lateral_speed: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Obstacle,
    Wall,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub surface: Surface,
    /// Horizontal distance along the ray (m).
    pub distance: f64,
    /// Coordinate along the hit face (m).
    pub u: f64,
}

/// What one image column sees: always a wall, possibly the box in front.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnView {
    pub angle: f64,
    pub wall: RayHit,
    pub obstacle: Option<RayHit>,
}

fn check_pose(pose: &Pose, world: &ArenaWorld) -> Result<()> {
    if !world.bounds.contains(pose.position) {
        return Err(Error::OutOfBounds {
            x: pose.position.x,
            y: pose.position.y,
        });
    }
    Ok(())
}

/// Casts one ray through the centre of each column, left to right.
pub fn column_views(pose: &Pose, world: &ArenaWorld, width: usize) -> Result<Vec<ColumnView>> {
    check_pose(pose, world)?;
    let o = pose.position;
    Ok((0..width)
        .map(|c| {
            let angle = pose.heading + world.fov * (0.5 - (c as f64 + 0.5) / width as f64);
            let dir = Vec2::from_angle(angle);
            let (t, u) = world.bounds.ray_exit(o, dir);
            let wall = RayHit {
                surface: Surface::Wall,
                distance: t,
                u,
            };
            let obstacle = world.obstacle.as_ref().and_then(|ob| {
                ob.footprint
                    .ray_entry(o, dir)
                    .filter(|&(d, _)| d < t)
                    .map(|(distance, u)| RayHit {
                        surface: Surface::Obstacle,
                        distance,
                        u,
                    })
            });
            ColumnView {
                angle,
                wall,
                obstacle,
            }
        })
        .collect())
}

/// Renders the camera view at `pose`, sampling each pixel at its centre.
pub fn render_view(pose: &Pose, world: &ArenaWorld, width: usize, height: usize) -> Result<Frame> {
    let views = column_views(pose, world, width)?;
    let focal = width as f64 / world.fov;
    let mut lum = vec![world.background; width * height];
    for (c, view) in views.iter().enumerate() {
        for r in 0..height {
            // height gained per metre of range for this row
            let slope = (height as f64 / 2.0 - (r as f64 + 0.5)) / focal;
            lum[r * width + c] = sample(world, view, slope);
        }
    }
    Frame::new(width, height, lum)
}

fn sample(world: &ArenaWorld, view: &ColumnView, slope: f64) -> u8 {
    let z_at = |d: f64| world.camera_height + slope * d;
    if let (Some(hit), Some(ob)) = (view.obstacle, world.obstacle.as_ref()) {
        let z = z_at(hit.distance);
        if (0.0..=ob.height).contains(&z) {
            return ob.texture.tone(hit.u, z);
        }
    }
    let z = z_at(view.wall.distance);
    if (0.0..=world.wall_height).contains(&z) {
        world.wall_texture.tone(view.wall.u, z)
    } else {
        world.background
    }
}

/// First-order velocity tracking with time constant `tau`, integrated
/// exactly over the step. Heading is held fixed.
pub fn dynamics_step(pose: &Pose, cmd: MotionCommand, dt: f64, tau: f64) -> Pose {
    let alpha = if tau > 0.0 {
        1.0 - (-dt / tau).exp()
    } else {
        1.0
    };
    let track = |v: f64, target: f64| {
        let next = v + (target - v) * alpha;
        let travelled = target * dt + (v - target) * tau.max(0.0) * alpha;
        (next, travelled)
    };
    let (forward_speed, df) = track(pose.forward_speed, cmd.forward);
    let (lateral_speed, dl) = track(pose.lateral_speed, cmd.lateral);
    let position =
        pose.position + Vec2::from_angle(pose.heading) * df + right_of(pose.heading) * dl;
    Pose {
        position,
        heading: pose.heading,
        forward_speed,
        lateral_speed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub fps: f64,
    /// Velocity time constant (s).
    pub tau: f64,
    pub max_time: f64,
    /// Feed detector flags to the scheduler; off for negative controls.
    pub detect: bool,
    /// Half-width of the uniform lateral start offset drawn from the seed.
    pub start_jitter: f64,
    pub frame_width: usize,
    pub frame_height: usize,
    pub scheduler: SchedulerConfig,
    /// Keep every rendered frame in the trace.
    pub keep_frames: bool,
    /// Strategy for the per-frame layer convolutions.
    pub exec: Exec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            fps: 30.0,
            tau: 0.3,
            max_time: 60.0,
            detect: true,
            start_jitter: 0.0,
            frame_width: DEFAULT_WIDTH,
            frame_height: DEFAULT_HEIGHT,
            scheduler: SchedulerConfig::default(),
            keep_frames: false,
            exec: Exec::Sequential,
        }
    }
}

impl SimConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArena(m.into()));
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if !(self.tau >= 0.0) {
            return bad("tau must be non-negative");
        }
        if !(self.max_time > 0.0) {
            return bad("max_time must be positive");
        }
        if !(self.start_jitter >= 0.0) {
            return bad("start_jitter must be non-negative");
        }
        self.scheduler.validate().map_err(Error::InvalidArena)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Reached,
    Collided,
    OutOfBounds,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Reached => "reached",
            Outcome::Collided => "collided",
            Outcome::OutOfBounds => "out_of_bounds",
            Outcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State of one simulated frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub pose: Pose,
    pub result: FrameResult,
    pub task: TaskState,
    pub command: MotionCommand,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub start_offset: f64,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
    pub frames: Vec<Frame>,
}

impl EpisodeTrace {
    pub fn avoid_maneuvers(&self) -> usize {
        let mut prev = Task::Cruise;
        let mut n = 0;
        for r in &self.records {
            if r.task.task == Task::Avoid && prev != Task::Avoid {
                n += 1;
            }
            prev = r.task.task;
        }
        n
    }
}

fn start_offset(sim: &SimConfig, seed: u64) -> f64 {
    if sim.start_jitter > 0.0 {
        ChaCha8Rng::seed_from_u64(seed).random_range(-sim.start_jitter..=sim.start_jitter)
    } else {
        0.0
    }
}

/// Flies one episode until the destination line is crossed, the vehicle
/// touches the box or a wall, or time runs out.
pub fn run_episode(
    world: &ArenaWorld,
    params: &Params,
    sim: &SimConfig,
    seed: u64,
) -> Result<EpisodeTrace> {
    world.validate()?;
    sim.validate()?;
    let params = params
        .clone()
        .validated(sim.frame_width, sim.frame_height)?;

    let heading = world.route_heading();
    let forward_axis = Vec2::from_angle(heading);
    let right = right_of(heading);
    let offset = start_offset(sim, seed);
    let goal = (world.destination - world.start).dot(forward_axis);
    let reached = |p: Vec2| (p - world.start).dot(forward_axis) >= goal;

    let mut pose = Pose {
        position: world.start + right * offset,
        heading,
        forward_speed: sim.scheduler.cruise_speed,
        lateral_speed: 0.0,
    };
    let mut ts = TaskState {
        forward_setpoint: sim.scheduler.cruise_speed,
        ..TaskState::default()
    };
    let mut layers = LayerState::for_params(&params, sim.frame_width, sim.frame_height);
    let dt = 1.0 / sim.fps;
    let max_frames = (sim.max_time * sim.fps).ceil() as usize;
    let mut records = Vec::new();
    let mut frames = Vec::new();

    let outcome = loop {
        if !world.bounds.contains(pose.position) {
            break Outcome::OutOfBounds;
        }
        if world.hits_obstacle(pose.position) || world.hits_wall(pose.position) {
            break Outcome::Collided;
        }
        if reached(pose.position) {
            break Outcome::Reached;
        }
        if records.len() >= max_frames {
            break Outcome::Timeout;
        }

        let frame = render_view(&pose, world, sim.frame_width, sim.frame_height)?;
        let result = pipeline_step_with(sim.exec, &mut layers, &frame, &params)?;
        let (c_lgmd, c_ffi) = if sim.detect {
            (result.c_lgmd, result.c_ffi)
        } else {
            (false, false)
        };
        let nav = NavFeedback {
            forward_speed: pose.forward_speed,
            lateral_position: pose.position.dot(right),
            target_reached: reached(pose.position),
        };
        let (next_ts, command) = scheduler_step(ts, c_lgmd, c_ffi, &nav, &sim.scheduler);
        records.push(StepRecord {
            pose,
            result,
            task: next_ts,
            command,
        });
        if sim.keep_frames {
            frames.push(frame);
        }
        ts = next_ts;
        pose = dynamics_step(&pose, command, dt, sim.tau);
    };

    Ok(EpisodeTrace {
        seed,
        start_offset: offset,
        records,
        outcome,
        frames,
    })
}

/// Runs independent episodes, one per seed, fanned out by `exec`.
pub fn run_episodes(
    exec: Exec,
    world: &ArenaWorld,
    params: &Params,
    sim: &SimConfig,
    seeds: &[u64],
) -> Vec<Result<EpisodeTrace>> {
    let inner = SimConfig {
        exec: Exec::Sequential,
        ..*sim
    };
    exec.map(seeds, |&seed| run_episode(world, params, &inner, seed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryReport {
    pub outcome: Outcome,
    pub frames: usize,
    /// Smallest hull-to-box gap over the trace; `+inf` without a box.
    pub min_clearance: f64,
    /// First frame with a confirmed collision flag.
    pub detection_frame: Option<usize>,
    /// Frames to impact at detection if the vehicle had held its course.
    pub frames_before_impact: Option<f64>,
    pub avoid_maneuvers: usize,
    /// Frames whose position lies inside the inflated footprint.
    pub intersections: usize,
    pub max_lateral_deviation: f64,
}

impl TrajectoryReport {
    pub fn undetected(&self) -> bool {
        self.detection_frame.is_none()
    }
}

impl fmt::Display for TrajectoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "outcome = {}", self.outcome)?;
        writeln!(f, "frames = {}", self.frames)?;
        writeln!(f, "min_clearance = {}", self.min_clearance)?;
        match self.detection_frame {
            Some(d) => writeln!(f, "detection_frame = {d}")?,
            None => writeln!(f, "detection_frame = undetected")?,
        }
        match self.frames_before_impact {
            Some(n) => writeln!(f, "frames_before_impact = {n:.1}")?,
            None => writeln!(f, "frames_before_impact = none")?,
        }
        writeln!(f, "avoid_maneuvers = {}", self.avoid_maneuvers)?;
        writeln!(f, "intersections = {}", self.intersections)?;
        write!(
            f,
            "max_lateral_deviation = {:.3}",
            self.max_lateral_deviation
        )
    }
}

pub fn check_trajectory(trace: &EpisodeTrace, world: &ArenaWorld, fps: f64) -> TrajectoryReport {
    let heading = world.route_heading();
    let right = right_of(heading);
    let line = world.start.dot(right);
    let min_clearance = trace
        .records
        .iter()
        .map(|r| world.clearance(r.pose.position))
        .fold(f64::INFINITY, f64::min);
    let intersections = trace
        .records
        .iter()
        .filter(|r| world.hits_obstacle(r.pose.position))
        .count();
    let detection_frame = trace.records.iter().position(|r| r.result.c_lgmd);
    let frames_before_impact = detection_frame.and_then(|i| {
        let pose = trace.records[i].pose;
        let ob = world.obstacle.as_ref()?;
        let inflated = ob.footprint.expanded(world.vehicle_radius);
        let (dist, _) = inflated.ray_entry(pose.position, Vec2::from_angle(pose.heading))?;
        (pose.forward_speed > 1e-9).then(|| dist / (pose.forward_speed / fps))
    });
    let max_lateral_deviation = trace
        .records
        .iter()
        .map(|r| (r.pose.position.dot(right) - line).abs())
        .fold(0.0, f64::max);
    TrajectoryReport {
        outcome: trace.outcome,
        frames: trace.records.len(),
        min_clearance,
        detection_frame,
        frames_before_impact,
        avoid_maneuvers: trace.avoid_maneuvers(),
        intersections,
        max_lateral_deviation,
    }
}
