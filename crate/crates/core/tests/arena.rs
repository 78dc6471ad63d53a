use lgmd_core::arena::{
    check_trajectory, run_episode, run_episodes, ArenaWorld, Outcome, SimConfig, Vec2,
};
use lgmd_core::decision::{AvoidPhase, Task};
use lgmd_core::{Exec, Params};

fn jittered() -> SimConfig {
    SimConfig {
        start_jitter: 0.5,
        ..SimConfig::default()
    }
}

#[test]
fn empty_room_is_crossed_without_manoeuvres() {
    let world = ArenaWorld {
        obstacle: None,
        ..ArenaWorld::default()
    };
    let trace = run_episode(&world, &Params::default(), &SimConfig::default(), 0).unwrap();
    let report = check_trajectory(&trace, &world, 30.0);
    assert_eq!(trace.outcome, Outcome::Reached);
    assert_eq!(report.avoid_maneuvers, 0);
    assert_eq!(report.min_clearance, f64::INFINITY);
}

#[test]
fn default_arena_avoids_the_box() {
    let world = ArenaWorld::default();
    let trace = run_episode(&world, &Params::default(), &SimConfig::default(), 0).unwrap();
    let report = check_trajectory(&trace, &world, 30.0);
    assert_eq!(trace.outcome, Outcome::Reached);
    assert!(report.avoid_maneuvers >= 1);
    assert!(report.min_clearance > 0.0);
    assert!(report.max_lateral_deviation > 0.5);
    assert!(report.frames_before_impact.unwrap() > 5.0);
}

#[test]
fn wall_ahead_without_detection_is_hit() {
    let world = ArenaWorld {
        obstacle: None,
        start: Vec2::new(5.5, 2.0),
        destination: Vec2::new(5.95, 2.0),
        ..ArenaWorld::default()
    };
    let sim = SimConfig {
        detect: false,
        ..SimConfig::default()
    };
    let trace = run_episode(&world, &Params::default(), &sim, 0).unwrap();
    assert_eq!(trace.outcome, Outcome::Collided);
    assert!(check_trajectory(&trace, &world, 30.0).undetected());
}

#[test]
fn box_without_detection_is_hit() {
    let sim = SimConfig {
        detect: false,
        ..SimConfig::default()
    };
    let world = ArenaWorld::default();
    let trace = run_episode(&world, &Params::default(), &sim, 0).unwrap();
    assert_eq!(trace.outcome, Outcome::Collided);
    assert_eq!(trace.avoid_maneuvers(), 0);
}

#[test]
fn episodes_are_deterministic() {
    let world = ArenaWorld::default();
    let params = Params::default();
    let seeds = [3, 11];
    let a = run_episodes(Exec::Parallel, &world, &params, &jittered(), &seeds);
    let b = run_episodes(Exec::Sequential, &world, &params, &jittered(), &seeds);
    for (a, b) in a.into_iter().zip(b) {
        assert_eq!(a.unwrap(), b.unwrap());
    }
}

#[test]
fn reached_paths_stay_clear_and_shifts_are_recorded() {
    let world = ArenaWorld::default();
    let seeds: Vec<u64> = (100..110).collect();
    for trace in run_episodes(
        Exec::default(),
        &world,
        &Params::default(),
        &jittered(),
        &seeds,
    ) {
        let trace = trace.unwrap();
        if trace.outcome == Outcome::Reached {
            assert!(trace
                .records
                .iter()
                .all(|r| !world.hits_obstacle(r.pose.position)));
        }
        // a frame leaves the avoid task only once the shift is complete
        for pair in trace.records.windows(2) {
            let (prev, cur) = (&pair[0].task, &pair[1].task);
            if prev.task == Task::Avoid
                && prev.avoid_phase == AvoidPhase::Shift
                && cur.task != Task::Avoid
            {
                let right = lgmd_core::arena::right_of(pair[1].pose.heading);
                let moved = pair[1].pose.position.dot(right) - prev.shift_origin;
                assert!(moved >= prev.shift_length - 1e-9, "seed {}", trace.seed);
            }
        }
    }
}

#[test]
fn one_record_per_frame() {
    let world = ArenaWorld::default();
    let sim = SimConfig {
        keep_frames: true,
        ..SimConfig::default()
    };
    let trace = run_episode(&world, &Params::default(), &sim, 0).unwrap();
    assert_eq!(trace.records.len(), trace.frames.len());
    assert!(trace.records.len() <= (sim.max_time * sim.fps) as usize);
}

#[test]
fn timeout_when_time_runs_out() {
    let sim = SimConfig {
        max_time: 1.0,
        ..SimConfig::default()
    };
    let trace = run_episode(&ArenaWorld::default(), &Params::default(), &sim, 0).unwrap();
    assert_eq!(trace.outcome, Outcome::Timeout);
    assert_eq!(trace.records.len(), 30);
}
