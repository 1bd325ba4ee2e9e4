//! Procedural evaluation scenarios: cluttered rooms with one guaranteed
//! narrow passage, and the fixed corner-corridor scenario.

use super::astar::{shortest_path, OccupancyGrid};
use super::EvalError;
use crate::geom::{Pose2, Rect, Vec2};
use crate::world::{Scenario, Shape, WorldMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Generator knobs.
#[derive(Debug, Clone, Copy)]
pub struct MapGenParams {
    pub width: f64,
    pub height: f64,
    /// Clutter obstacles per square meter; 0 produces empty rooms.
    pub density: f64,
    /// Target narrowest-passage width in meters.
    pub clearance: f64,
    /// Feasibility inflation (robot footprint radius).
    pub footprint_radius: f64,
    /// Grid cell for validation planning.
    pub cell: f64,
    /// Redraws per map before giving up.
    pub max_tries: usize,
}

impl Default for MapGenParams {
    fn default() -> Self {
        Self {
            width: 10.0,
            height: 10.0,
            density: 0.06,
            clearance: 0.6,
            footprint_radius: 0.2,
            cell: 0.05,
            max_tries: 200,
        }
    }
}

/// Narrowest passage along a path: twice the minimum static clearance over
/// its points.
pub fn narrowest_passage(map: &WorldMap, points: &[Vec2]) -> f64 {
    points
        .iter()
        .map(|p| 2.0 * map.clearance(*p))
        .fold(f64::INFINITY, f64::min)
}

fn draw_map(params: &MapGenParams, rng: &mut ChaCha8Rng) -> (WorldMap, Pose2, Vec2) {
    let (w, h) = (params.width, params.height);
    let start = Pose2::new(
        rng.gen_range(0.8..1.6),
        rng.gen_range(0.8..1.6),
        std::f64::consts::FRAC_PI_4,
    );
    let goal = Vec2::new(rng.gen_range(w - 1.6..w - 0.8), rng.gen_range(h - 1.6..h - 0.8));

    let mut shapes = Vec::new();
    if params.density > 0.0 {
        // A full-width dividing wall with one gap of the target clearance,
        // so every route crosses a passage of known width.
        let wall_y = rng.gen_range(0.4 * h..0.6 * h);
        let gap_x = rng.gen_range(0.2 * w..0.8 * w);
        let gap = params.clearance;
        let thick = 0.3;
        let left_w = gap_x - gap / 2.0;
        let right_w = w - (gap_x + gap / 2.0);
        if left_w > 0.05 {
            shapes.push(Shape::rect(left_w / 2.0, wall_y, left_w, thick, 0.0));
        }
        if right_w > 0.05 {
            shapes.push(Shape::rect(
                gap_x + gap / 2.0 + right_w / 2.0,
                wall_y,
                right_w,
                thick,
                0.0,
            ));
        }

        let count = (params.density * w * h).round() as usize;
        let mut placed = 0;
        let mut attempts = 0;
        while placed < count && attempts < count * 20 {
            attempts += 1;
            let cx = rng.gen_range(0.6..w - 0.6);
            let cy = rng.gen_range(0.6..h - 0.6);
            let c = Vec2::new(cx, cy);
            // Keep clutter away from the endpoints, the gap, and the wall
            // band so the deliberate passage stays the narrowest one.
            if c.dist(start.position()) < 1.5 || c.dist(goal) < 1.5 {
                continue;
            }
            if (cy - wall_y).abs() < 1.2 {
                continue;
            }
            let shape = if rng.gen_bool(0.5) {
                Shape::Circle {
                    center: c,
                    radius: rng.gen_range(0.2..0.45),
                }
            } else {
                Shape::rect(
                    cx,
                    cy,
                    rng.gen_range(0.3..0.9),
                    rng.gen_range(0.3..0.9),
                    rng.gen_range(0.0..std::f64::consts::PI),
                )
            };
            shapes.push(shape);
            placed += 1;
        }
    }
    let map = WorldMap::new(Rect::from_size(w, h), shapes, params.cell)
        .expect("generated shapes stay in bounds");
    (map, start, goal)
}

/// Generate `count` reproducible scenarios. Each draw is validated: a
/// footprint-inflated path must exist, and (for cluttered maps) the
/// narrowest passage along the validation path must sit within 0.1 m of
/// the requested clearance. Infeasible draws are rejected and redrawn.
pub fn generate_cluttered_maps(
    count: usize,
    params: &MapGenParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(String, Scenario)>, EvalError> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut accepted = None;
        for _ in 0..params.max_tries {
            let (map, start, goal) = draw_map(params, rng);
            // Feasibility for the actual robot.
            let grid = OccupancyGrid::from_map(&map, params.cell, params.footprint_radius);
            if shortest_path(&grid, start.position(), goal).is_none() {
                continue;
            }
            if params.density > 0.0 {
                // Band check: plan with an inflation that forces the path
                // to stay near passage centerlines, then measure.
                let inflate = (params.clearance / 2.0 - params.cell).max(params.footprint_radius);
                let check_grid = OccupancyGrid::from_map(&map, params.cell, inflate);
                let Some(path) = shortest_path(&check_grid, start.position(), goal) else {
                    continue;
                };
                let narrowest = narrowest_passage(&map, &path.points);
                if (narrowest - params.clearance).abs() > 0.1 {
                    continue;
                }
            }
            accepted = Some(Scenario {
                map,
                start: Some(start),
                goal: Some(goal),
                goal_tolerance: None,
                movers: Vec::new(),
            });
            break;
        }
        match accepted {
            Some(s) => out.push((format!("map-{i:03}"), s)),
            None => {
                return Err(EvalError::Generator(format!(
                    "no feasible draw for map {i} after {} tries",
                    params.max_tries
                )))
            }
        }
    }
    Ok(out)
}

/// Fixed corner-corridor scenario: an L-shaped route along two walls with a
/// blind 90-degree turn, 2 m corridor width, start and goal pinned.
pub fn corner_scenario() -> Scenario {
    let map = WorldMap::new(
        Rect::from_size(10.0, 10.0),
        vec![Shape::rect(4.0, 6.0, 8.0, 8.0, 0.0)],
        0.05,
    )
    .expect("static corner map is valid");
    Scenario {
        map,
        start: Some(Pose2::new(1.0, 1.0, 0.0)),
        goal: Some(Vec2::new(9.0, 9.0)),
        goal_tolerance: None,
        movers: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn density_zero_gives_empty_rooms() {
        let params = MapGenParams {
            density: 0.0,
            ..Default::default()
        };
        let mut rng = stream(1, "mapgen");
        let maps = generate_cluttered_maps(3, &params, &mut rng).unwrap();
        assert_eq!(maps.len(), 3);
        for (_, s) in &maps {
            assert!(s.map.obstacles().is_empty());
            assert!(s.start.is_some() && s.goal.is_some());
        }
    }

    #[test]
    fn same_seed_reproduces_the_set() {
        let params = MapGenParams::default();
        let mut rng_a = stream(7, "mapgen");
        let mut rng_b = stream(7, "mapgen");
        let a = generate_cluttered_maps(4, &params, &mut rng_a).unwrap();
        let b = generate_cluttered_maps(4, &params, &mut rng_b).unwrap();
        for ((_, sa), (_, sb)) in a.iter().zip(&b) {
            assert_eq!(sa.map.obstacles(), sb.map.obstacles());
            assert_eq!(sa.start, sb.start);
            assert_eq!(sa.goal, sb.goal);
        }
    }

    #[test]
    fn clearance_band_is_respected() {
        let params = MapGenParams {
            clearance: 0.6,
            density: 0.05,
            ..Default::default()
        };
        let mut rng = stream(11, "mapgen");
        let maps = generate_cluttered_maps(5, &params, &mut rng).unwrap();
        for (id, s) in &maps {
            let inflate = params.clearance / 2.0 - params.cell;
            let grid = OccupancyGrid::from_map(&s.map, params.cell, inflate);
            let path = shortest_path(&grid, s.start.unwrap().position(), s.goal.unwrap())
                .expect("generated maps stay feasible");
            let narrowest = narrowest_passage(&s.map, &path.points);
            assert!(
                (0.5..=0.7).contains(&narrowest),
                "{id}: narrowest passage {narrowest}"
            );
        }
    }

    #[test]
    fn corner_scenario_is_feasible() {
        let s = corner_scenario();
        let grid = OccupancyGrid::from_map(&s.map, 0.05, 0.2);
        let path = shortest_path(&grid, s.start.unwrap().position(), s.goal.unwrap()).unwrap();
        // L-shaped route: roughly 8 + 8 with the corner cut.
        assert!(path.length > 14.0 && path.length < 18.0, "length {}", path.length);
    }
}
