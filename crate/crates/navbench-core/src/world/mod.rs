//! Deterministic 2D world: maps, differential-drive kinematics, moving
//! obstacles, collision detection, and raycast LiDAR.
//!
//! Integration is explicit Euler at the control period (the robot is driven
//! by a discrete 5 Hz loop by default), the robot footprint is a disc, and
//! the map boundary is a solid wall for both collision and raycast. Exact
//! tangency (distance equal to the footprint radius) counts as
//! non-collision.

mod format;

pub use format::{load_map, load_scenario, write_map_file, MapFile};

use crate::geom::{
    normalize_angle, point_polygon_distance, ray_circle_intersection, ray_segment_intersection,
    Pose2, Rect, Vec2,
};
use crate::sensing::Scan;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("map parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("map validation error: {0}")]
    Validation(String),
    #[error("could not place start/goal after {tries} tries; map too dense")]
    MapTooDense { tries: usize },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A static obstacle shape in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Polygon(Vec<Vec2>),
    Circle { center: Vec2, radius: f64 },
}

impl Shape {
    /// Rectangle centered at `(cx, cy)` with extents `w x h`, rotated by `theta`.
    pub fn rect(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Self {
        let c = Vec2::new(cx, cy);
        let half = Vec2::new(w / 2.0, h / 2.0);
        let corners = [
            Vec2::new(-half.x, -half.y),
            Vec2::new(half.x, -half.y),
            Vec2::new(half.x, half.y),
            Vec2::new(-half.x, half.y),
        ];
        Shape::Polygon(corners.iter().map(|p| c + p.rotated(theta)).collect())
    }

    /// Distance from a point to this shape (0 when inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        match self {
            Shape::Polygon(verts) => point_polygon_distance(p, verts),
            Shape::Circle { center, radius } => (p.dist(*center) - radius).max(0.0),
        }
    }

    /// Smallest non-negative ray parameter hitting this shape, if any.
    pub fn raycast(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match self {
            Shape::Polygon(verts) => {
                let n = verts.len();
                let mut best: Option<f64> = None;
                for i in 0..n {
                    if let Some(t) =
                        ray_segment_intersection(origin, dir, verts[i], verts[(i + 1) % n])
                    {
                        best = Some(best.map_or(t, |b: f64| b.min(t)));
                    }
                }
                best
            }
            Shape::Circle { center, radius } => {
                ray_circle_intersection(origin, dir, *center, *radius)
            }
        }
    }

    fn vertices_within(&self, bounds: Rect) -> bool {
        match self {
            Shape::Polygon(verts) => verts.iter().all(|v| bounds.contains(*v)),
            Shape::Circle { center, radius } => {
                bounds.contains(*center) && bounds.interior_clearance(*center) >= -radius
            }
        }
    }
}

/// A validated static map: rectangular bounds plus obstacle shapes.
#[derive(Debug, Clone)]
pub struct WorldMap {
    bounds: Rect,
    obstacles: Vec<Shape>,
    /// Meters per cell for rasterized checks (grid planners, map generation).
    resolution_hint: f64,
}

impl WorldMap {
    pub fn new(bounds: Rect, obstacles: Vec<Shape>, resolution_hint: f64) -> Result<Self, WorldError> {
        if bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            return Err(WorldError::Validation(format!(
                "bounds must be positive, got {} x {}",
                bounds.width(),
                bounds.height()
            )));
        }
        for (i, shape) in obstacles.iter().enumerate() {
            if let Shape::Polygon(verts) = shape {
                if verts.len() < 3 {
                    return Err(WorldError::Validation(format!(
                        "obstacle {i}: polygon needs at least 3 vertices, got {}",
                        verts.len()
                    )));
                }
            }
            if !shape.vertices_within(bounds) {
                return Err(WorldError::Validation(format!(
                    "obstacle {i}: vertex outside map bounds"
                )));
            }
        }
        if !(resolution_hint > 0.0) {
            return Err(WorldError::Validation(format!(
                "resolution hint must be > 0, got {resolution_hint}"
            )));
        }
        Ok(Self {
            bounds,
            obstacles,
            resolution_hint,
        })
    }

    /// Empty room with the given width and height, anchored at the origin.
    pub fn empty(width: f64, height: f64) -> Self {
        Self::new(Rect::from_size(width, height), Vec::new(), 0.05).expect("positive size")
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn obstacles(&self) -> &[Shape] {
        &self.obstacles
    }

    pub fn resolution_hint(&self) -> f64 {
        self.resolution_hint
    }

    /// Distance from a point to the nearest static obstacle or wall.
    /// Negative when outside the bounds.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let mut d = self.bounds.interior_clearance(p);
        for shape in &self.obstacles {
            d = d.min(shape.distance(p));
        }
        d
    }
}

/// Robot pose and commanded velocities; the footprint is a disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Vec2,
    /// Heading, normalized to `(-pi, pi]`.
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
    pub footprint_radius: f64,
}

impl RobotState {
    pub fn at(position: Vec2, heading: f64, footprint_radius: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
            v: 0.0,
            omega: 0.0,
            footprint_radius,
        }
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.position.x, self.position.y, self.heading)
    }
}

/// A constant-speed obstacle following a waypoint polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingObstacle {
    pub shape: MoverShape,
    pub waypoints: Vec<Vec2>,
    pub speed: f64,
    /// When true the path closes back onto its first waypoint; otherwise the
    /// obstacle stops at the final waypoint.
    pub looping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoverShape {
    Disc { radius: f64 },
    Rect { width: f64, height: f64 },
}

impl MovingObstacle {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.speed < 0.0 {
            return Err(WorldError::Validation(format!(
                "moving obstacle speed must be >= 0, got {}",
                self.speed
            )));
        }
        if self.waypoints.len() < 2 {
            return Err(WorldError::Validation(format!(
                "moving obstacle path needs at least 2 waypoints, got {}",
                self.waypoints.len()
            )));
        }
        Ok(())
    }

    /// Position after traveling `dist` meters from the first waypoint.
    pub fn position_at(&self, dist: f64) -> Vec2 {
        point_along_polyline(&self.waypoints, self.looping, dist)
    }

    /// World-frame shape at the given travel distance.
    pub fn shape_at(&self, dist: f64) -> Shape {
        let c = self.position_at(dist);
        match self.shape {
            MoverShape::Disc { radius } => Shape::Circle { center: c, radius },
            MoverShape::Rect { width, height } => Shape::rect(c.x, c.y, width, height, 0.0),
        }
    }
}

/// Point at arc-length `dist` along a polyline. Looping paths close back to
/// the first waypoint and wrap; open paths stop at the final waypoint.
fn point_along_polyline(waypoints: &[Vec2], looping: bool, dist: f64) -> Vec2 {
    debug_assert!(waypoints.len() >= 2);
    let n = waypoints.len();
    let seg_count = if looping { n } else { n - 1 };
    let mut total = 0.0;
    for i in 0..seg_count {
        total += waypoints[i].dist(waypoints[(i + 1) % n]);
    }
    if total <= 0.0 {
        return waypoints[0];
    }
    let mut remaining = if looping {
        dist.rem_euclid(total)
    } else {
        dist.clamp(0.0, total)
    };
    for i in 0..seg_count {
        let a = waypoints[i];
        let b = waypoints[(i + 1) % n];
        let len = a.dist(b);
        if remaining <= len {
            if len == 0.0 {
                return a;
            }
            return a + (b - a) * (remaining / len);
        }
        remaining -= len;
    }
    waypoints[if looping { 0 } else { n - 1 }]
}

/// Advance travel distances for a set of obstacles by `dt` seconds and
/// return their new positions.
pub fn advance_obstacles(obstacles: &[MovingObstacle], travel: &mut [f64], dt: f64) -> Vec<Vec2> {
    assert!(dt > 0.0, "dt must be positive");
    obstacles
        .iter()
        .zip(travel.iter_mut())
        .map(|(obs, t)| {
            *t += obs.speed * dt;
            obs.position_at(*t)
        })
        .collect()
}

/// Navigation goal: a position with a reach tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalSpec {
    pub position: Vec2,
    pub tolerance: f64,
}

/// Planar LiDAR parameters. Beams are uniformly spaced over the field of
/// view, centered on the robot heading plus the mount yaw: beam `i` points
/// at `-fov/2 + i * (fov / beam_count)` in the sensor frame, so an even beam
/// count puts one beam exactly forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub fov_deg: f64,
    pub beam_count: usize,
    pub max_range: f64,
    /// Sensor pose in the robot frame.
    pub mount: Pose2,
}

impl LidarConfig {
    pub fn new(fov_deg: f64, beam_count: usize, max_range: f64) -> Self {
        Self {
            fov_deg,
            beam_count,
            max_range,
            mount: Pose2::default(),
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.beam_count == 0 {
            return Err(WorldError::Validation("beam count must be > 0".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(WorldError::Validation(format!(
                "max range must be > 0, got {}",
                self.max_range
            )));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(WorldError::Validation(format!(
                "fov must be in (0, 360], got {}",
                self.fov_deg
            )));
        }
        Ok(())
    }

    /// Angular resolution in degrees.
    pub fn resolution_deg(&self) -> f64 {
        self.fov_deg / self.beam_count as f64
    }

    /// Beam direction in the sensor frame, degrees. Computed in degrees so
    /// that the forward beam of an even count is exactly zero.
    pub fn beam_angle_deg(&self, i: usize) -> f64 {
        -self.fov_deg / 2.0 + i as f64 * self.resolution_deg()
    }
}

/// Euler unicycle step: integrate the commanded `(v, omega)` for `dt`
/// seconds. The caller is responsible for clamping commands to limits.
pub fn step_kinematics(state: &RobotState, v: f64, omega: f64, dt: f64) -> RobotState {
    assert!(dt > 0.0, "dt must be positive");
    assert!(v.is_finite() && omega.is_finite(), "commands must be finite");
    let (s, c) = state.heading.sin_cos();
    RobotState {
        position: Vec2::new(state.position.x + v * c * dt, state.position.y + v * s * dt),
        heading: normalize_angle(state.heading + omega * dt),
        v,
        omega,
        footprint_radius: state.footprint_radius,
    }
}

/// True iff the robot disc strictly overlaps a wall, a static shape, or a
/// moving obstacle. Exact tangency is non-collision.
pub fn check_collision(state: &RobotState, map: &WorldMap, mover_shapes: &[Shape]) -> bool {
    let p = state.position;
    let r = state.footprint_radius;
    if map.bounds().interior_clearance(p) < r {
        return true;
    }
    if map.obstacles().iter().any(|s| s.distance(p) < r) {
        return true;
    }
    mover_shapes.iter().any(|s| s.distance(p) < r)
}

/// Cast all beams of `cfg` from the robot pose and return ranges clamped to
/// `max_range`, ordered by beam angle.
pub fn raycast_scan(
    state: &RobotState,
    map: &WorldMap,
    mover_shapes: &[Shape],
    cfg: &LidarConfig,
    timestamp: u64,
) -> Scan {
    let origin = state.position + Vec2::new(cfg.mount.x, cfg.mount.y).rotated(state.heading);
    let walls = map.bounds().wall_segments();
    let mut ranges = Vec::with_capacity(cfg.beam_count);
    for i in 0..cfg.beam_count {
        let angle =
            state.heading + cfg.mount.theta + cfg.beam_angle_deg(i).to_radians();
        let dir = Vec2::from_angle(angle);
        let mut best = cfg.max_range;
        for (a, b) in &walls {
            if let Some(t) = ray_segment_intersection(origin, dir, *a, *b) {
                best = best.min(t);
            }
        }
        for shape in map.obstacles() {
            if let Some(t) = shape.raycast(origin, dir) {
                best = best.min(t);
            }
        }
        for shape in mover_shapes {
            if let Some(t) = shape.raycast(origin, dir) {
                best = best.min(t);
            }
        }
        ranges.push(best.max(1e-9));
    }
    Scan { ranges, timestamp }
}

/// Distance and bearing to the goal in the robot frame. The bearing is
/// normalized to `(-pi, pi]`.
pub fn relative_goal(state: &RobotState, goal: &GoalSpec) -> (f64, f64) {
    let delta = goal.position - state.position;
    let d = delta.norm();
    let phi = normalize_angle(delta.y.atan2(delta.x) - state.heading);
    (d, phi)
}

/// Start/goal placement parameters for [`reset_episode`].
#[derive(Debug, Clone, Copy)]
pub struct ResetParams {
    pub footprint_radius: f64,
    pub goal_tolerance: f64,
    pub min_separation: f64,
    pub max_tries: usize,
}

impl Default for ResetParams {
    fn default() -> Self {
        Self {
            footprint_radius: 0.2,
            goal_tolerance: 0.3,
            min_separation: 1.0,
            max_tries: 10_000,
        }
    }
}

/// Sample a collision-free start pose and goal, uniformly over free space,
/// at least `min_separation` apart. Deterministic for a given RNG state.
pub fn reset_episode(
    map: &WorldMap,
    initial_mover_shapes: &[Shape],
    params: &ResetParams,
    rng: &mut ChaCha8Rng,
) -> Result<(RobotState, GoalSpec), WorldError> {
    let bounds = map.bounds();
    let sample_point = |rng: &mut ChaCha8Rng| {
        Vec2::new(
            rng.gen_range(bounds.min.x..bounds.max.x),
            rng.gen_range(bounds.min.y..bounds.max.y),
        )
    };
    let mut start: Option<RobotState> = None;
    for _ in 0..params.max_tries {
        let p = sample_point(rng);
        let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let candidate = RobotState::at(p, theta, params.footprint_radius);
        if !check_collision(&candidate, map, initial_mover_shapes) {
            start = Some(candidate);
            break;
        }
    }
    let start = start.ok_or(WorldError::MapTooDense {
        tries: params.max_tries,
    })?;
    for _ in 0..params.max_tries {
        let p = sample_point(rng);
        let free = map.bounds().interior_clearance(p) >= params.footprint_radius
            && map
                .obstacles()
                .iter()
                .all(|s| s.distance(p) >= params.footprint_radius);
        if free && p.dist(start.position) >= params.min_separation {
            return Ok((
                start,
                GoalSpec {
                    position: p,
                    tolerance: params.goal_tolerance,
                },
            ));
        }
    }
    Err(WorldError::MapTooDense {
        tries: params.max_tries,
    })
}

/// A scenario: a map plus optional fixed start/goal and moving obstacles.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: WorldMap,
    pub start: Option<Pose2>,
    pub goal: Option<Vec2>,
    pub goal_tolerance: Option<f64>,
    pub movers: Vec<MovingObstacle>,
}

impl Scenario {
    pub fn from_map(map: WorldMap) -> Self {
        Self {
            map,
            start: None,
            goal: None,
            goal_tolerance: None,
            movers: Vec::new(),
        }
    }
}

/// Everything produced by one world step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub scan: Scan,
    pub collided: bool,
    pub reached: bool,
}

/// The stepping state machine driving one episode at a time.
///
/// Single-threaded by design; run several independent `World` instances for
/// parallel evaluation, each with its own RNG stream.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    lidar: LidarConfig,
    reset_params: ResetParams,
    dt: f64,
    robot: RobotState,
    goal: GoalSpec,
    mover_travel: Vec<f64>,
    step_index: u64,
}

impl World {
    pub fn new(scenario: Scenario, lidar: LidarConfig, reset_params: ResetParams, dt: f64) -> Result<Self, WorldError> {
        lidar.validate()?;
        for m in &scenario.movers {
            m.validate()?;
        }
        assert!(dt > 0.0, "dt must be positive");
        let travel = vec![0.0; scenario.movers.len()];
        let robot = RobotState::at(Vec2::ZERO, 0.0, reset_params.footprint_radius);
        let goal = GoalSpec {
            position: Vec2::ZERO,
            tolerance: reset_params.goal_tolerance,
        };
        Ok(Self {
            scenario,
            lidar,
            reset_params,
            dt,
            robot,
            goal,
            mover_travel: travel,
            step_index: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn map(&self) -> &WorldMap {
        &self.scenario.map
    }

    pub fn lidar(&self) -> &LidarConfig {
        &self.lidar
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn goal(&self) -> &GoalSpec {
        &self.goal
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    fn mover_shapes(&self) -> Vec<Shape> {
        self.scenario
            .movers
            .iter()
            .zip(&self.mover_travel)
            .map(|(m, t)| m.shape_at(*t))
            .collect()
    }

    /// Start a new episode: place the robot and goal (fixed per scenario or
    /// sampled), rewind moving obstacles, and return the initial scan.
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Scan, WorldError> {
        for t in &mut self.mover_travel {
            *t = 0.0;
        }
        self.step_index = 0;
        let shapes = self.mover_shapes();
        match (self.scenario.start, self.scenario.goal) {
            (Some(pose), Some(goal)) => {
                self.robot =
                    RobotState::at(pose.position(), pose.theta, self.reset_params.footprint_radius);
                self.goal = GoalSpec {
                    position: goal,
                    tolerance: self
                        .scenario
                        .goal_tolerance
                        .unwrap_or(self.reset_params.goal_tolerance),
                };
            }
            _ => {
                let (robot, goal) =
                    reset_episode(&self.scenario.map, &shapes, &self.reset_params, rng)?;
                self.robot = robot;
                self.goal = goal;
            }
        }
        Ok(raycast_scan(
            &self.robot,
            &self.scenario.map,
            &shapes,
            &self.lidar,
            self.step_index,
        ))
    }

    /// Advance obstacles and the robot by one control period, then report
    /// collision, goal state, and the new scan.
    pub fn step(&mut self, v: f64, omega: f64) -> StepOutcome {
        let _ = advance_obstacles(&self.scenario.movers, &mut self.mover_travel, self.dt);
        self.robot = step_kinematics(&self.robot, v, omega, self.dt);
        self.step_index += 1;
        let shapes = self.mover_shapes();
        let collided = check_collision(&self.robot, &self.scenario.map, &shapes);
        let (d, _) = relative_goal(&self.robot, &self.goal);
        let reached = !collided && d <= self.goal.tolerance;
        let scan = raycast_scan(
            &self.robot,
            &self.scenario.map,
            &shapes,
            &self.lidar,
            self.step_index,
        );
        StepOutcome {
            scan,
            collided,
            reached,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::f64::consts::PI;

    fn room10() -> WorldMap {
        WorldMap::empty(10.0, 10.0)
    }

    #[test]
    fn straight_line_integration() {
        let state = RobotState::at(Vec2::ZERO, 0.0, 0.2);
        let next = step_kinematics(&state, 1.0, 0.0, 0.2);
        assert!((next.position.x - 0.2).abs() < 1e-15);
        assert_eq!(next.position.y, 0.0);
        assert_eq!(next.v, 1.0);
    }

    #[test]
    fn pure_rotation() {
        let state = RobotState::at(Vec2::ZERO, 0.0, 0.2);
        let next = step_kinematics(&state, 0.0, PI / 2.0, 0.2);
        assert_eq!(next.position, Vec2::ZERO);
        assert!((next.heading - 0.1 * PI).abs() < 1e-15);
    }

    #[test]
    fn euler_step_translates_then_rotates() {
        // Euler is the contract: translation uses the pre-step heading, so a
        // simultaneous turn does not curve the step.
        let state = RobotState::at(Vec2::ZERO, 0.0, 0.2);
        let next = step_kinematics(&state, 0.5, PI / 2.0, 0.2);
        assert!((next.position.x - 0.1).abs() < 1e-15);
        assert_eq!(next.position.y, 0.0);
        assert!((next.heading - PI / 10.0).abs() < 1e-15);
    }

    #[test]
    fn heading_stays_normalized() {
        let mut state = RobotState::at(Vec2::new(5.0, 5.0), 3.0, 0.2);
        for _ in 0..100 {
            state = step_kinematics(&state, 0.0, 1.5, 0.2);
            assert!(state.heading > -PI && state.heading <= PI);
        }
    }

    #[test]
    fn obstacle_moves_along_path() {
        let obs = MovingObstacle {
            shape: MoverShape::Disc { radius: 0.3 },
            waypoints: vec![Vec2::ZERO, Vec2::new(2.0, 0.0)],
            speed: 1.0,
            looping: false,
        };
        let mut travel = vec![0.0];
        let pos = advance_obstacles(std::slice::from_ref(&obs), &mut travel, 0.2);
        assert!((pos[0].x - 0.2).abs() < 1e-15);
        // Stops at the final waypoint.
        let pos = advance_obstacles(std::slice::from_ref(&obs), &mut travel, 10.0);
        assert_eq!(pos[0], Vec2::new(2.0, 0.0));
    }

    #[test]
    fn zero_speed_obstacle_stays_put() {
        let obs = MovingObstacle {
            shape: MoverShape::Disc { radius: 0.3 },
            waypoints: vec![Vec2::new(1.0, 1.0), Vec2::new(2.0, 1.0)],
            speed: 0.0,
            looping: false,
        };
        let mut travel = vec![0.0];
        let pos = advance_obstacles(std::slice::from_ref(&obs), &mut travel, 5.0);
        assert_eq!(pos[0], Vec2::new(1.0, 1.0));
    }

    #[test]
    fn looping_obstacle_wraps_back_toward_start() {
        // Path A->B of length 2, closed loop total 4. Travel 2.5 puts it on
        // the return segment, 0.5 past B heading back toward A.
        let obs = MovingObstacle {
            shape: MoverShape::Disc { radius: 0.3 },
            waypoints: vec![Vec2::ZERO, Vec2::new(2.0, 0.0)],
            speed: 1.0,
            looping: true,
        };
        let mut travel = vec![0.0];
        let pos = advance_obstacles(std::slice::from_ref(&obs), &mut travel, 2.5);
        assert!((pos[0].x - 1.5).abs() < 1e-12);
        assert_eq!(pos[0].y, 0.0);
        // A full cycle returns to the start.
        let mut travel = vec![0.0];
        let pos = advance_obstacles(std::slice::from_ref(&obs), &mut travel, 4.0);
        assert!(pos[0].dist(Vec2::ZERO) < 1e-12);
    }

    #[test]
    fn collision_against_wall_and_tangency() {
        // Footprint 0.25 and x = 9.75 keep the tangency case exact in f64.
        let map = room10();
        let mut state = RobotState::at(Vec2::new(5.0, 5.0), 0.0, 0.25);
        assert!(!check_collision(&state, &map, &[]));
        state.position = Vec2::new(9.875, 5.0); // 0.125 m from wall, radius 0.25
        assert!(check_collision(&state, &map, &[]));
        state.position = Vec2::new(9.75, 5.0); // exact tangency is non-collision
        assert!(!check_collision(&state, &map, &[]));
    }

    #[test]
    fn collision_grazing_polygon_edge_is_free() {
        let map = WorldMap::new(
            Rect::from_size(10.0, 10.0),
            vec![Shape::rect(5.0, 5.0, 2.0, 2.0, 0.0)],
            0.05,
        )
        .unwrap();
        // Edge at x = 4; center at x = 3.8 with radius 0.2 is exact contact.
        let state = RobotState::at(Vec2::new(3.8, 5.0), 0.0, 0.2);
        assert!(!check_collision(&state, &map, &[]));
        let state = RobotState::at(Vec2::new(3.85, 5.0), 0.0, 0.2);
        assert!(check_collision(&state, &map, &[]));
    }

    #[test]
    fn forward_beam_sees_wall_at_five_meters() {
        let map = room10();
        let state = RobotState::at(Vec2::new(5.0, 5.0), 0.0, 0.2);
        let cfg = LidarConfig::new(270.0, 1080, 30.0);
        let scan = raycast_scan(&state, &map, &[], &cfg, 0);
        assert_eq!(scan.ranges.len(), 1080);
        // Beam 540 points exactly forward.
        assert_eq!(cfg.beam_angle_deg(540), 0.0);
        assert!((scan.ranges[540] - 5.0).abs() < 1e-12);
        // Every range is positive and within max range.
        assert!(scan.ranges.iter().all(|&r| r > 0.0 && r <= 30.0));
    }

    #[test]
    fn beam_clamps_to_max_range() {
        let map = WorldMap::empty(100.0, 100.0);
        let state = RobotState::at(Vec2::new(50.0, 50.0), 0.0, 0.2);
        let cfg = LidarConfig::new(270.0, 36, 30.0);
        let scan = raycast_scan(&state, &map, &[], &cfg, 0);
        assert!(scan.ranges.iter().any(|&r| r == 30.0));
    }

    #[test]
    fn relative_goal_examples() {
        let state = RobotState::at(Vec2::ZERO, 0.0, 0.2);
        let goal = GoalSpec {
            position: Vec2::new(3.0, 0.0),
            tolerance: 0.3,
        };
        assert_eq!(relative_goal(&state, &goal), (3.0, 0.0));

        let goal = GoalSpec {
            position: Vec2::new(0.0, 2.0),
            tolerance: 0.3,
        };
        let (d, phi) = relative_goal(&state, &goal);
        assert_eq!(d, 2.0);
        assert!((phi - PI / 2.0).abs() < 1e-15);

        let state = RobotState::at(Vec2::new(1.0, 1.0), PI / 4.0, 0.2);
        let goal = GoalSpec {
            position: Vec2::new(2.0, 2.0),
            tolerance: 0.3,
        };
        let (d, phi) = relative_goal(&state, &goal);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(phi.abs() < 1e-12);
    }

    #[test]
    fn reset_is_deterministic_and_respects_separation() {
        let map = room10();
        let params = ResetParams::default();
        let mut rng_a = stream(42, "world");
        let mut rng_b = stream(42, "world");
        let a = reset_episode(&map, &[], &params, &mut rng_a).unwrap();
        let b = reset_episode(&map, &[], &params, &mut rng_b).unwrap();
        assert_eq!(a.0.position, b.0.position);
        assert_eq!(a.1.position, b.1.position);
        assert!(a.0.position.dist(a.1.position) >= 1.0);
    }

    #[test]
    fn reset_fails_on_fully_blocked_map() {
        let map = WorldMap::new(
            Rect::from_size(2.0, 2.0),
            vec![Shape::rect(1.0, 1.0, 2.0, 2.0, 0.0)],
            0.05,
        )
        .unwrap();
        let mut rng = stream(0, "world");
        let err = reset_episode(&map, &[], &ResetParams::default(), &mut rng).unwrap_err();
        assert!(matches!(err, WorldError::MapTooDense { .. }));
    }

    #[test]
    fn world_trajectory_is_deterministic() {
        let mut scenario = Scenario::from_map(room10());
        scenario.movers.push(MovingObstacle {
            shape: MoverShape::Disc { radius: 0.3 },
            waypoints: vec![Vec2::new(1.0, 1.0), Vec2::new(9.0, 1.0)],
            speed: 1.7,
            looping: true,
        });
        let lidar = LidarConfig::new(270.0, 108, 30.0);
        let run = |seed: u64| {
            let mut world =
                World::new(scenario.clone(), lidar, ResetParams::default(), 0.2).unwrap();
            let mut rng = stream(seed, "world");
            world.reset(&mut rng).unwrap();
            let mut trace = Vec::new();
            for i in 0..50 {
                let out = world.step(0.3, 0.1 * (i as f64 * 0.7).sin());
                trace.push((world.robot().position, world.robot().heading, out.scan));
                if out.collided {
                    break;
                }
            }
            trace
        };
        let t1 = run(7);
        let t2 = run(7);
        assert_eq!(t1.len(), t2.len());
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
            assert_eq!(a.2.ranges, b.2.ranges);
        }
    }
}
