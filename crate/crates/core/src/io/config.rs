//! Flat `key = value` configuration. `#` starts a comment; blank lines are
//! ignored. Parameter keys use the model's symbol names (`T_s`, `C_w`, ...).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::arena::{ArenaWorld, Checker, Obstacle, Rect, SimConfig, Vec2};
use crate::error::{Error, Result};
use crate::model::{Params, Violation, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::stimulus::StimulusSpec;

/// Optional overrides applied on top of a stimulus kind's defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StimOverrides {
    pub frames: Option<usize>,
    pub object: Option<u8>,
    pub background: Option<u8>,
    pub start_size: Option<f64>,
    pub end_size: Option<f64>,
    pub object_size: Option<f64>,
    pub speed: Option<f64>,
    pub period: Option<f64>,
    pub drift: Option<f64>,
    pub pan: Option<f64>,
    pub block: Option<usize>,
    pub lead_in: Option<usize>,
    pub seed: Option<u64>,
}

impl StimOverrides {
    pub fn apply(&self, spec: &mut StimulusSpec) {
        macro_rules! set {
            ($($src:ident => $dst:ident),*) => {
                $(if let Some(v) = self.$src { spec.$dst = v; })*
            };
        }
        set!(frames => frames, object => object_luminance, background => background_luminance,
             start_size => start_size, end_size => end_size, object_size => object_size,
             speed => speed, period => period, drift => drift, pan => pan, block => block,
             lead_in => lead_in, seed => seed);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub params: Params,
    /// Working frame size.
    pub width: usize,
    pub height: usize,
    pub sim: SimConfig,
    pub arena: ArenaWorld,
    pub stimulus: StimOverrides,
    n_cell_explicit: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: Params::default(),
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            sim: SimConfig::default(),
            arena: ArenaWorld::default(),
            stimulus: StimOverrides::default(),
            n_cell_explicit: false,
        }
    }
}

type Setter = fn(&mut Config, &str) -> std::result::Result<(), String>;
type Getter = fn(&Config) -> Option<String>;

fn num(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a number, got `{s}`")),
    }
}

fn uint<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse()
        .map_err(|_| format!("expected a non-negative integer in range, got `{s}`"))
}

fn flag(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn nums<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<&str> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if v.len() != N {
        return Err(format!("expected {N} numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(v) {
        *o = num(t)?;
    }
    Ok(out)
}

fn tones(s: &str) -> std::result::Result<[u8; 2], String> {
    let [a, b] = nums::<2>(s)?;
    let level = |v: f64| {
        if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
            Ok(v as u8)
        } else {
            Err(format!("tones must be integers in 0..=255, got `{s}`"))
        }
    };
    Ok([level(a)?, level(b)?])
}

fn obstacle_mut(c: &mut Config) -> std::result::Result<&mut Obstacle, String> {
    c.arena
        .obstacle
        .as_mut()
        .ok_or_else(|| "the arena has no obstacle (obstacle = none)".to_string())
}

fn show_pair(p: Vec2) -> String {
    format!("{} {}", p.x, p.y)
}

macro_rules! field {
    ($name:literal, $($path:ident).+, $parse:expr) => {
        (
            $name,
            (|c: &mut Config, v: &str| {
                c.$($path).+ = $parse(v)?;
                Ok(())
            }) as Setter,
            (|c: &Config| Some(c.$($path).+.to_string())) as Getter,
        )
    };
}

macro_rules! stim {
    ($name:literal, $field:ident, $parse:expr) => {
        (
            $name,
            (|c: &mut Config, v: &str| {
                c.stimulus.$field = Some($parse(v)?);
                Ok(())
            }) as Setter,
            (|c: &Config| c.stimulus.$field.map(|v| v.to_string())) as Getter,
        )
    };
}

fn keys() -> Vec<(&'static str, Setter, Getter)> {
    vec![
        field!("W_I", params.w_i, num),
        field!("C_w", params.c_w, num),
        field!("T_FFI", params.t_ffi, num),
        field!("T_de", params.t_de, num),
        field!("T_s", params.t_s, num),
        (
            "n_cell",
            |c, v| {
                c.params.n_cell = uint(v)?;
                c.n_cell_explicit = true;
                Ok(())
            },
            // a derived cell count follows the frame size and is not written
            |c| c.n_cell_explicit.then(|| c.params.n_cell.to_string()),
        ),
        field!("n_sp", params.n_sp, uint),
        field!("C_1", params.c_1, num),
        field!("C_2", params.c_2, num),
        field!("r", params.radius, uint),
        field!("norm_mode", params.norm_mode, str::parse),
        field!("border_mode", params.border_mode, str::parse),
        field!("width", width, uint),
        field!("height", height, uint),
        field!("fps", sim.fps, num),
        field!("tau", sim.tau, num),
        field!("max_time", sim.max_time, num),
        field!("detect", sim.detect, flag),
        field!("start_jitter", sim.start_jitter, num),
        field!("cruise_speed", sim.scheduler.cruise_speed, num),
        field!("shift_distance", sim.scheduler.shift_distance, num),
        field!("max_lateral_offset", sim.scheduler.max_lateral_offset, num),
        field!("slowdown_factor", sim.scheduler.slowdown_factor, num),
        field!("stop_tolerance", sim.scheduler.stop_tolerance, num),
        (
            "bounds",
            |c, v| {
                let [x0, y0, x1, y1] = nums::<4>(v)?;
                c.arena.bounds = Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1));
                Ok(())
            },
            |c| {
                let b = c.arena.bounds;
                Some(format!("{} {}", show_pair(b.min), show_pair(b.max)))
            },
        ),
        (
            "obstacle",
            |c, v| {
                if v == "none" {
                    c.arena.obstacle = None;
                    return Ok(());
                }
                let [cx, cy, sx, sy] = nums::<4>(v)?;
                let footprint = Rect::centered(Vec2::new(cx, cy), sx, sy);
                let base = c
                    .arena
                    .obstacle
                    .or(ArenaWorld::default().obstacle)
                    .expect("default arena has an obstacle");
                c.arena.obstacle = Some(Obstacle { footprint, ..base });
                Ok(())
            },
            |c| {
                Some(match &c.arena.obstacle {
                    None => "none".into(),
                    Some(o) => {
                        let f = o.footprint;
                        let size = f.max - f.min;
                        format!("{} {} {}", show_pair(f.center()), size.x, size.y)
                    }
                })
            },
        ),
        (
            "obstacle_height",
            |c, v| {
                obstacle_mut(c)?.height = num(v)?;
                Ok(())
            },
            |c| c.arena.obstacle.map(|o| o.height.to_string()),
        ),
        (
            "obstacle_period",
            |c, v| {
                obstacle_mut(c)?.texture.period = num(v)?;
                Ok(())
            },
            |c| c.arena.obstacle.map(|o| o.texture.period.to_string()),
        ),
        (
            "obstacle_tones",
            |c, v| {
                obstacle_mut(c)?.texture.tones = tones(v)?;
                Ok(())
            },
            |c| {
                c.arena
                    .obstacle
                    .map(|o| format!("{} {}", o.texture.tones[0], o.texture.tones[1]))
            },
        ),
        field!("wall_period", arena.wall_texture.period, num),
        (
            "wall_tones",
            |c, v| {
                c.arena.wall_texture = Checker {
                    tones: tones(v)?,
                    ..c.arena.wall_texture
                };
                Ok(())
            },
            |c| {
                let t = c.arena.wall_texture.tones;
                Some(format!("{} {}", t[0], t[1]))
            },
        ),
        field!("wall_height", arena.wall_height, num),
        field!("background", arena.background, uint),
        field!("camera_height", arena.camera_height, num),
        (
            "fov",
            |c, v| {
                c.arena.fov = num(v)?.to_radians();
                Ok(())
            },
            |c| Some(c.arena.fov.to_degrees().to_string()),
        ),
        (
            "start",
            |c, v| {
                let [x, y] = nums::<2>(v)?;
                c.arena.start = Vec2::new(x, y);
                Ok(())
            },
            |c| Some(show_pair(c.arena.start)),
        ),
        (
            "destination",
            |c, v| {
                let [x, y] = nums::<2>(v)?;
                c.arena.destination = Vec2::new(x, y);
                Ok(())
            },
            |c| Some(show_pair(c.arena.destination)),
        ),
        field!("vehicle_radius", arena.vehicle_radius, num),
        stim!("stim_frames", frames, uint),
        stim!("stim_object", object, uint),
        stim!("stim_background", background, uint),
        stim!("stim_start_size", start_size, num),
        stim!("stim_end_size", end_size, num),
        stim!("stim_object_size", object_size, num),
        stim!("stim_speed", speed, num),
        stim!("stim_period", period, num),
        stim!("stim_drift", drift, num),
        stim!("stim_pan", pan, num),
        stim!("stim_block", block, uint),
        stim!("stim_lead_in", lead_in, uint),
        stim!("stim_seed", seed, uint),
    ]
}

impl Config {
    /// Applies the settings in `text` on top of the current values.
    /// `path` only labels errors.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        let table = keys();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let fail = |message: String| Error::ConfigParse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some((name, set, _)) = table.iter().find(|(k, _, _)| *k == key) else {
                return Err(fail(format!("unknown key `{key}`")));
            };
            if !seen.insert(*name) {
                return Err(fail(format!("duplicate key `{key}`")));
            }
            set(self, value).map_err(|m| fail(format!("{key}: {m}")))?;
        }
        if !self.n_cell_explicit {
            self.params.n_cell = self.width * self.height;
        }
        self.sim.frame_width = self.width;
        self.sim.frame_height = self.height;
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Config> {
        let mut c = Config::default();
        c.apply_text(text, path)?;
        Ok(c)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Every broken invariant across parameters, simulation and arena.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self
            .params
            .validate(self.width, self.height)
            .err()
            .unwrap_or_default();
        if let Err(e) = self.sim.validate() {
            out.push(Violation {
                key: "sim",
                message: e.to_string(),
            });
        }
        if let Err(e) = self.arena.validate() {
            out.push(Violation {
                key: "arena",
                message: e.to_string(),
            });
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Defaults for `kind` with the `stim_*` overrides and frame size applied.
    pub fn stimulus_spec(&self, kind: crate::stimulus::StimulusKind) -> StimulusSpec {
        let mut spec = StimulusSpec::default_for(kind);
        spec.width = self.width;
        spec.height = self.height;
        self.stimulus.apply(&mut spec);
        spec
    }

    /// Serializes every setting; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _, get) in keys() {
            if let Some(v) = get(self) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

/// Reads and validates a config file on top of the defaults.
pub fn load_config(path: &Path) -> Result<Config> {
    let mut c = Config::default();
    c.apply_file(path)?;
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NormMode;

    fn parse(text: &str) -> Result<Config> {
        Config::parse(text, Path::new("test.cfg"))
    }

    #[test]
    fn empty_is_defaults() {
        assert_eq!(parse("").unwrap(), Config::default());
        assert_eq!(parse("# only a comment\n\n").unwrap(), Config::default());
    }

    #[test]
    fn same_value_override() {
        let c = parse("T_s = 35").unwrap();
        assert_eq!(c.params, Params::default());
    }

    #[test]
    fn negative_threshold_fails_validation() {
        let c = parse("T_s = -1").unwrap();
        match c.validate().unwrap_err() {
            Error::Validation(v) => assert_eq!(v[0].key, "T_s"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn violations_are_aggregated() {
        let c = parse("T_s = 0\nC_w = -2\nvehicle_radius = 0").unwrap();
        let keys: Vec<_> = c.violations().into_iter().map(|v| v.key).collect();
        assert_eq!(keys, ["C_w", "T_s", "arena"]);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse("T_s = 35\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(matches!(
            parse("T_s = 1\nT_s = 2"),
            Err(Error::ConfigParse { line: 2, .. })
        ));
        assert!(matches!(
            parse("T_s 35"),
            Err(Error::ConfigParse { line: 1, .. })
        ));
        assert!(matches!(
            parse("T_s = abc"),
            Err(Error::ConfigParse { line: 1, .. })
        ));
    }

    #[test]
    fn frame_size_derives_cell_count() {
        let c = parse("width = 64\nheight = 48").unwrap();
        assert_eq!(c.params.n_cell, 64 * 48);
        assert_eq!((c.sim.frame_width, c.sim.frame_height), (64, 48));
        let c = parse("width = 64\nheight = 48\nn_cell = 7128").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn arena_keys() {
        let c = parse("obstacle = 2 1 0.4 0.2\nobstacle_tones = 10, 240\nfov = 90\nstart = 0.5 1")
            .unwrap();
        let ob = c.arena.obstacle.unwrap();
        assert_eq!(ob.footprint.center(), Vec2::new(2.0, 1.0));
        assert_eq!(ob.texture.tones, [10, 240]);
        assert!((c.arena.fov - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(parse("obstacle = none\nobstacle_height = 2").is_err());
        assert!(parse("obstacle = none").unwrap().arena.obstacle.is_none());
    }

    #[test]
    fn destination_inside_obstacle_is_invalid() {
        let c = parse("destination = 3 2").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = parse(
            "T_s = 40.5\nnorm_mode = literal\nstim_seed = 9\nobstacle = none\ndetect = false",
        )
        .unwrap();
        assert_eq!(c.params.norm_mode, NormMode::Literal);
        let again = parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(
            parse(&Config::default().to_text()).unwrap(),
            Config::default()
        );
    }

    #[test]
    fn stimulus_overrides() {
        use crate::stimulus::StimulusKind;
        let c = parse("stim_frames = 60\nstim_end_size = 0.5").unwrap();
        let s = c.stimulus_spec(StimulusKind::Looming);
        assert_eq!((s.frames, s.end_size), (60, 0.5));
        assert_eq!(
            s.start_size,
            StimulusSpec::default_for(StimulusKind::Looming).start_size
        );
    }
}
