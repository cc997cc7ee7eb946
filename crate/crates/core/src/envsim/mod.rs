//! Planar kinematic pick-and-place environment.
//!
//! A point gripper moves in the unit square among four disc obstacles. An
//! episode runs reach → transport → done: the gripper must come within grasp
//! range of the target object, then carry it to the goal. Rewards are sparse
//! (success and collision terms) or dense (sparse terms plus progress along,
//! and deviation from, the ideal path).

pub mod geometry;
pub mod path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::{Error, Result};
pub use geometry::{Disc, Point, Polyline};

/// Workspace layout: key points and obstacle discs in the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub start: Point,
    pub target: Point,
    pub goal: Point,
    pub obstacles: Vec<Disc>,
    /// Preferred clearance from obstacle boundaries, workspace units.
    pub d_safe: f64,
}

impl Default for Layout {
    /// Four obstacles between the target (left) and the goal (right); the
    /// straight transport chord is blocked so the planned path must weave.
    fn default() -> Self {
        Layout {
            start: Point::new(0.50, 0.12),
            target: Point::new(0.15, 0.50),
            goal: Point::new(0.85, 0.50),
            obstacles: vec![
                Disc {
                    center: Point::new(0.38, 0.44),
                    radius: 0.06,
                },
                Disc {
                    center: Point::new(0.45, 0.70),
                    radius: 0.05,
                },
                Disc {
                    center: Point::new(0.55, 0.28),
                    radius: 0.05,
                },
                Disc {
                    center: Point::new(0.62, 0.56),
                    radius: 0.06,
                },
            ],
            d_safe: 0.05,
        }
    }
}

impl Layout {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: Point| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y);
        for (name, p) in [("start", self.start), ("target", self.target), ("goal", self.goal)] {
            if !in_unit(p) {
                return Err(Error::config(format!("layout.{name} outside the unit workspace")));
            }
            for (i, o) in self.obstacles.iter().enumerate() {
                if o.boundary_distance(p) <= 0.0 {
                    return Err(Error::config(format!(
                        "layout.{name} overlaps obstacle {i}"
                    )));
                }
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(Error::config(format!("obstacle {i} has non-positive radius")));
            }
        }
        if !(self.d_safe > 0.0) {
            return Err(Error::config("layout.d_safe must be positive"));
        }
        for i in 0..self.obstacles.len() {
            for j in (i + 1)..self.obstacles.len() {
                let gap = self.obstacles[i].center.dist(self.obstacles[j].center)
                    - self.obstacles[i].radius
                    - self.obstacles[j].radius;
                if gap <= self.d_safe {
                    return Err(Error::config(format!(
                        "obstacles {i} and {j} leave a gap of {gap:.4}, not larger than d_safe"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Environment constants. Everything lives in one block so a config file can
/// override any of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub layout: Layout,
    /// Maximum displacement per step, workspace units.
    pub v_max: f64,
    pub eps_grasp: f64,
    pub eps_place: f64,
    pub r_success: f64,
    pub r_coll: f64,
    pub c_prog: f64,
    pub c_dev: f64,
    /// Uniform start-position jitter radius (0 = exact start).
    pub start_jitter: f64,
    /// Densification spacing for the ideal path, workspace units.
    pub path_spacing: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            layout: Layout::default(),
            v_max: 0.01,
            eps_grasp: 0.03,
            eps_place: 0.03,
            r_success: 10.0,
            r_coll: 1.0,
            c_prog: 1.0,
            c_dev: 0.5,
            start_jitter: 0.0,
            path_spacing: 0.005,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if !(self.v_max > 0.0) {
            return Err(Error::config("env.v_max must be positive"));
        }
        if !(self.eps_grasp > 0.0 && self.eps_place > 0.0) {
            return Err(Error::config("grasp/place tolerances must be positive"));
        }
        if self.start_jitter < 0.0 {
            return Err(Error::config("env.start_jitter must be >= 0"));
        }
        if !(self.path_spacing > 0.0) {
            return Err(Error::config("env.path_spacing must be positive"));
        }
        Ok(())
    }
}

/// Episode phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Reach,
    Transport,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Reach => "reach",
            Phase::Transport => "transport",
            Phase::Done => "done",
        }
    }
}

/// Kinematic snapshot of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub gripper: Point,
    /// Commanded velocity of the last step (action × v_max).
    pub velocity: Point,
    pub phase: Phase,
    pub grasped: bool,
    pub step_index: u32,
    /// Visited positions, starting with the reset position.
    pub trajectory: Vec<Point>,
    /// Arc position of the gripper's projection onto the ideal path.
    pub(crate) path_pos: f64,
}

/// Per-step events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvEvents {
    pub collision: bool,
    /// Distance to the nearest obstacle boundary, clamped at contact.
    pub clearance: f64,
    pub grasp_event: bool,
    pub success_event: bool,
    /// Signed advance along the ideal path this step.
    pub progress_delta: f64,
    /// Distance from the gripper to the ideal path.
    pub deviation: f64,
}

/// Reward structure selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Sparse,
    Dense,
}

/// The environment: validated constants plus the planned ideal path.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    ideal: Polyline,
}

/// Observation vector length.
pub const OBS_DIM: usize = 14;
/// Action vector length.
pub const ACTION_DIM: usize = 2;

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let ideal = path::ideal_path(
            cfg.layout.start,
            cfg.layout.target,
            cfg.layout.goal,
            &cfg.layout.obstacles,
            cfg.layout.d_safe,
            cfg.path_spacing,
        )?;
        Ok(Environment { cfg, ideal })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// The start → target → goal reference polyline (obstacles inflated by
    /// `d_safe`).
    pub fn ideal(&self) -> &Polyline {
        &self.ideal
    }

    /// Fresh episode state. The seed only matters when start jitter is
    /// configured.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mut gripper = self.cfg.layout.start;
        if self.cfg.start_jitter > 0.0 {
            let mut rng = stream(seed, &["env-reset"]);
            gripper.x += (rng.gen::<f64>() * 2.0 - 1.0) * self.cfg.start_jitter;
            gripper.y += (rng.gen::<f64>() * 2.0 - 1.0) * self.cfg.start_jitter;
            gripper.x = gripper.x.clamp(0.0, 1.0);
            gripper.y = gripper.y.clamp(0.0, 1.0);
        }
        let path_pos = self.ideal.project(gripper).arc_pos;
        EnvState {
            gripper,
            velocity: Point::new(0.0, 0.0),
            phase: Phase::Reach,
            grasped: false,
            step_index: 0,
            trajectory: vec![gripper],
            path_pos,
        }
    }

    /// Advances one step. Actions outside [-1, 1] are clamped.
    pub fn step(&self, state: &mut EnvState, action: [f64; 2]) -> Result<EnvEvents> {
        if state.phase == Phase::Done {
            return Err(Error::contract("step called after the episode finished"));
        }
        let v = Point::new(
            action[0].clamp(-1.0, 1.0) * self.cfg.v_max,
            action[1].clamp(-1.0, 1.0) * self.cfg.v_max,
        );
        let mut pos = state.gripper.add(v);
        pos.x = pos.x.clamp(0.0, 1.0);
        pos.y = pos.y.clamp(0.0, 1.0);

        // Resolve obstacle penetration by projecting onto the disc boundary.
        let mut collision = false;
        for _ in 0..4 {
            let mut moved = false;
            for o in &self.cfg.layout.obstacles {
                let d = pos.dist(o.center);
                if d < o.radius {
                    let dir = if d > 1e-12 {
                        pos.sub(o.center).scale(1.0 / d)
                    } else {
                        Point::new(1.0, 0.0)
                    };
                    pos = o.center.add(dir.scale(o.radius));
                    collision = true;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        pos.x = pos.x.clamp(0.0, 1.0);
        pos.y = pos.y.clamp(0.0, 1.0);

        let mut grasp_event = false;
        let mut success_event = false;
        if state.phase == Phase::Reach && pos.dist(self.cfg.layout.target) <= self.cfg.eps_grasp {
            state.phase = Phase::Transport;
            state.grasped = true;
            grasp_event = true;
        }
        if state.phase == Phase::Transport && pos.dist(self.cfg.layout.goal) <= self.cfg.eps_place
        {
            state.phase = Phase::Done;
            success_event = true;
        }

        let clearance = self
            .cfg
            .layout
            .obstacles
            .iter()
            .map(|o| o.boundary_distance(pos))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let projection = self.ideal.project(pos);
        let events = EnvEvents {
            collision,
            clearance,
            grasp_event,
            success_event,
            progress_delta: projection.arc_pos - state.path_pos,
            deviation: projection.distance,
        };

        state.gripper = pos;
        state.velocity = v;
        state.step_index += 1;
        state.trajectory.push(pos);
        state.path_pos = projection.arc_pos;
        Ok(events)
    }

    /// Environment reward for one step's events.
    pub fn env_reward(&self, events: &EnvEvents, mode: RewardMode) -> f64 {
        let mut r = 0.0;
        if events.success_event {
            r += self.cfg.r_success;
        }
        if events.collision {
            r -= self.cfg.r_coll;
        }
        if mode == RewardMode::Dense {
            r += self.cfg.c_prog * events.progress_delta - self.cfg.c_dev * events.deviation;
        }
        r
    }

    /// The unified evaluation reward (the dense formula, applied to every
    /// condition at evaluation time).
    pub fn unified_reward(&self, events: &EnvEvents) -> f64 {
        self.env_reward(events, RewardMode::Dense)
    }

    /// Fixed-order observation vector, dimension [`OBS_DIM`]:
    /// gripper (2), velocity (2), target−gripper (2), goal−gripper (2),
    /// grasped (1), vector to the nearest obstacle boundary (2, ties broken
    /// by lower obstacle index), clearance (1, capped at 1), phase one-hot
    /// over reach/transport (2).
    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        let g = state.gripper;
        let mut nearest_vec = Point::new(0.0, 0.0);
        let mut clearance: f64 = 1.0;
        let mut best = f64::INFINITY;
        for o in &self.cfg.layout.obstacles {
            let d = o.boundary_distance(g);
            if d < best {
                best = d;
                let to_center = o.center.sub(g);
                let dist = to_center.norm();
                let boundary = if dist > 1e-12 {
                    o.center.sub(to_center.scale(o.radius / dist))
                } else {
                    o.center.sub(Point::new(o.radius, 0.0))
                };
                nearest_vec = boundary.sub(g);
                clearance = d.max(0.0).min(1.0);
            }
        }
        vec![
            g.x,
            g.y,
            state.velocity.x,
            state.velocity.y,
            self.cfg.layout.target.x - g.x,
            self.cfg.layout.target.y - g.y,
            self.cfg.layout.goal.x - g.x,
            self.cfg.layout.goal.y - g.y,
            if state.grasped { 1.0 } else { 0.0 },
            nearest_vec.x,
            nearest_vec.y,
            clearance,
            if state.phase == Phase::Reach { 1.0 } else { 0.0 },
            if state.phase == Phase::Transport { 1.0 } else { 0.0 },
        ]
    }
}

/// One row of a trajectory export.
#[derive(Debug, Clone)]
pub struct TrajRow {
    pub step: u32,
    pub pos: Point,
    pub phase: Phase,
    pub clearance: f64,
    pub collision: bool,
    pub grasp_event: bool,
    pub success_event: bool,
}

/// Writes trajectory rows as CSV.
pub fn write_trajectory_csv<W: std::io::Write>(rows: &[TrajRow], mut w: W) -> Result<()> {
    writeln!(w, "step,x,y,phase,clearance,collision,grasp,success")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.step,
            r.pos.x,
            r.pos.y,
            r.phase.as_str(),
            r.clearance,
            r.collision as u8,
            r.grasp_event as u8,
            r.success_event as u8
        )?;
    }
    Ok(())
}
