//! Plain-text map and scenario files.
//!
//! A map file holds `bounds w h` followed by one shape per line; `#` starts
//! a comment. A scenario file may add `start`, `goal`, and `moving` lines.
//! All units are meters and radians.
//!
//! ```text
//! bounds 10 10
//! rect 5 5 1 1 0              # cx cy w h theta
//! poly 1 1 2 1 2 2            # x y pairs, >= 3 vertices
//! start 1 1 0                 # x y [theta]
//! goal 9 9 0.3                # x y [tolerance]
//! moving disc 0.3 1.7 loop 1 1 9 1     # shape, speed, loop|once, waypoints
//! moving rect 0.4 0.3 1.0 once 2 2 8 2
//! ```

use super::{MoverShape, MovingObstacle, Scenario, Shape, WorldError, WorldMap};
use crate::geom::{Pose2, Rect, Vec2};
use std::path::Path;

/// Raw parsed contents of a map or scenario file, before validation.
#[derive(Debug, Clone, Default)]
pub struct MapFile {
    pub bounds: Option<(f64, f64)>,
    pub shapes: Vec<Shape>,
    pub start: Option<Pose2>,
    pub goal: Option<Vec2>,
    pub goal_tolerance: Option<f64>,
    pub movers: Vec<MovingObstacle>,
}

impl MapFile {
    pub fn parse(text: &str) -> Result<Self, WorldError> {
        let mut file = MapFile::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let keyword = tokens.next().expect("non-empty line has a token");
            let rest: Vec<&str> = tokens.collect();
            match keyword {
                "bounds" => {
                    let v = parse_floats(&rest, 2, line_no, "bounds")?;
                    file.bounds = Some((v[0], v[1]));
                }
                "rect" => {
                    let v = parse_floats(&rest, 5, line_no, "rect")?;
                    file.shapes.push(Shape::rect(v[0], v[1], v[2], v[3], v[4]));
                }
                "poly" => {
                    if rest.len() < 6 || rest.len() % 2 != 0 {
                        return Err(parse_err(
                            line_no,
                            format!(
                                "poly needs an even number of coordinates (>= 6), got {}",
                                rest.len()
                            ),
                        ));
                    }
                    let v = parse_floats(&rest, rest.len(), line_no, "poly")?;
                    let verts = v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
                    file.shapes.push(Shape::Polygon(verts));
                }
                "circle" => {
                    let v = parse_floats(&rest, 3, line_no, "circle")?;
                    file.shapes.push(Shape::Circle {
                        center: Vec2::new(v[0], v[1]),
                        radius: v[2],
                    });
                }
                "start" => {
                    if rest.len() != 2 && rest.len() != 3 {
                        return Err(parse_err(
                            line_no,
                            format!("start needs 2 or 3 values, got {}", rest.len()),
                        ));
                    }
                    let v = parse_floats(&rest, rest.len(), line_no, "start")?;
                    let theta = v.get(2).copied().unwrap_or(0.0);
                    file.start = Some(Pose2::new(v[0], v[1], theta));
                }
                "goal" => {
                    if rest.len() != 2 && rest.len() != 3 {
                        return Err(parse_err(
                            line_no,
                            format!("goal needs 2 or 3 values, got {}", rest.len()),
                        ));
                    }
                    let v = parse_floats(&rest, rest.len(), line_no, "goal")?;
                    file.goal = Some(Vec2::new(v[0], v[1]));
                    file.goal_tolerance = v.get(2).copied();
                }
                "moving" => {
                    file.movers.push(parse_mover(&rest, line_no)?);
                }
                other => {
                    return Err(parse_err(line_no, format!("unknown keyword `{other}`")));
                }
            }
        }
        Ok(file)
    }

    /// Validate into a [`WorldMap`], discarding scenario entries.
    pub fn into_map(self, resolution_hint: f64) -> Result<WorldMap, WorldError> {
        let (w, h) = self
            .bounds
            .ok_or_else(|| WorldError::Validation("missing `bounds` line".into()))?;
        WorldMap::new(Rect::from_size(w, h), self.shapes, resolution_hint)
    }

    /// Validate into a [`Scenario`], keeping start/goal/movers when present.
    pub fn into_scenario(self, resolution_hint: f64) -> Result<Scenario, WorldError> {
        for m in &self.movers {
            m.validate()?;
        }
        let start = self.start;
        let goal = self.goal;
        let goal_tolerance = self.goal_tolerance;
        let movers = self.movers.clone();
        let map = self.into_map(resolution_hint)?;
        Ok(Scenario {
            map,
            start,
            goal,
            goal_tolerance,
            movers,
        })
    }
}

fn parse_err(line: usize, message: String) -> WorldError {
    WorldError::Parse { line, message }
}

fn parse_floats(
    tokens: &[&str],
    expect: usize,
    line: usize,
    field: &str,
) -> Result<Vec<f64>, WorldError> {
    if tokens.len() != expect {
        return Err(parse_err(
            line,
            format!("{field} needs {expect} values, got {}", tokens.len()),
        ));
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line, format!("{field}: `{t}` is not a number")))
        })
        .collect()
}

fn parse_mover(tokens: &[&str], line: usize) -> Result<MovingObstacle, WorldError> {
    if tokens.is_empty() {
        return Err(parse_err(line, "moving: missing shape kind".into()));
    }
    let (shape, consumed) = match tokens[0] {
        "disc" => {
            let v = parse_floats(&tokens[1..2.min(tokens.len())], 1, line, "moving disc radius")?;
            (MoverShape::Disc { radius: v[0] }, 2)
        }
        "rect" => {
            if tokens.len() < 3 {
                return Err(parse_err(line, "moving rect needs width and height".into()));
            }
            let v = parse_floats(&tokens[1..3], 2, line, "moving rect size")?;
            (
                MoverShape::Rect {
                    width: v[0],
                    height: v[1],
                },
                3,
            )
        }
        other => {
            return Err(parse_err(
                line,
                format!("moving: shape must be `disc` or `rect`, got `{other}`"),
            ))
        }
    };
    let rest = &tokens[consumed..];
    if rest.len() < 2 {
        return Err(parse_err(line, "moving: missing speed and loop flag".into()));
    }
    let speed = rest[0]
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("moving speed: `{}` is not a number", rest[0])))?;
    let looping = match rest[1] {
        "loop" => true,
        "once" => false,
        other => {
            return Err(parse_err(
                line,
                format!("moving: expected `loop` or `once`, got `{other}`"),
            ))
        }
    };
    let coords = &rest[2..];
    if coords.len() < 4 || coords.len() % 2 != 0 {
        return Err(parse_err(
            line,
            format!(
                "moving: waypoints need an even number of coordinates (>= 4), got {}",
                coords.len()
            ),
        ));
    }
    let v = parse_floats(coords, coords.len(), line, "moving waypoints")?;
    let waypoints = v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
    Ok(MovingObstacle {
        shape,
        waypoints,
        speed,
        looping,
    })
}

/// Load and validate a map file.
pub fn load_map(path: &Path) -> Result<WorldMap, WorldError> {
    let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    MapFile::parse(&text)?.into_map(0.05)
}

/// Load and validate a scenario file (a map file with optional start, goal,
/// and moving-obstacle lines).
pub fn load_scenario(path: &Path) -> Result<Scenario, WorldError> {
    let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    MapFile::parse(&text)?.into_scenario(0.05)
}

/// Serialize a scenario back into the text format.
pub fn write_map_file(scenario: &Scenario) -> String {
    let mut out = String::new();
    let b = scenario.map.bounds();
    out.push_str(&format!("bounds {} {}\n", b.width(), b.height()));
    for shape in scenario.map.obstacles() {
        match shape {
            Shape::Polygon(verts) => {
                out.push_str("poly");
                for v in verts {
                    out.push_str(&format!(" {} {}", v.x, v.y));
                }
                out.push('\n');
            }
            Shape::Circle { center, radius } => {
                out.push_str(&format!("circle {} {} {}\n", center.x, center.y, radius));
            }
        }
    }
    if let Some(s) = scenario.start {
        out.push_str(&format!("start {} {} {}\n", s.x, s.y, s.theta));
    }
    if let Some(g) = scenario.goal {
        match scenario.goal_tolerance {
            Some(tol) => out.push_str(&format!("goal {} {} {}\n", g.x, g.y, tol)),
            None => out.push_str(&format!("goal {} {}\n", g.x, g.y)),
        }
    }
    for m in &scenario.movers {
        let shape = match m.shape {
            MoverShape::Disc { radius } => format!("disc {radius}"),
            MoverShape::Rect { width, height } => format!("rect {width} {height}"),
        };
        let flag = if m.looping { "loop" } else { "once" };
        out.push_str(&format!("moving {shape} {} {flag}", m.speed));
        for w in &m.waypoints {
            out.push_str(&format!(" {} {}", w.x, w.y));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_room_parses() {
        let file = MapFile::parse("# empty\nbounds 10 10\n").unwrap();
        let map = file.into_map(0.05).unwrap();
        assert_eq!(map.obstacles().len(), 0);
        assert_eq!(map.bounds().width(), 10.0);
    }

    #[test]
    fn cluttered_map_parses_all_shapes() {
        let text = "bounds 10 10\nrect 5 5 1 1 0\npoly 1 1 2 1 2 2\ncircle 8 8 0.5\n";
        let map = MapFile::parse(text).unwrap().into_map(0.05).unwrap();
        assert_eq!(map.obstacles().len(), 3);
    }

    #[test]
    fn two_vertex_polygon_rejected() {
        let text = "bounds 10 10\npoly 1 1 2 2\n";
        let err = MapFile::parse(text).unwrap_err();
        match err {
            WorldError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("poly"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_number_names_line_and_field() {
        let text = "bounds 10 10\nrect 5 5 1 x 0\n";
        let err = MapFile::parse(text).unwrap_err();
        match err {
            WorldError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("rect"), "{message}");
                assert!(message.contains('x'), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn vertex_outside_bounds_rejected() {
        let text = "bounds 10 10\nrect 9.9 5 1 1 0\n";
        let err = MapFile::parse(text).unwrap().into_map(0.05).unwrap_err();
        assert!(matches!(err, WorldError::Validation(_)));
    }

    #[test]
    fn scenario_round_trip() {
        let text = "bounds 10 10\nrect 5 5 1 1 0\nstart 1 1 0.5\ngoal 9 9 0.3\nmoving disc 0.3 1.7 loop 1 1 9 1\n";
        let scenario = MapFile::parse(text).unwrap().into_scenario(0.05).unwrap();
        assert!(scenario.start.is_some());
        assert_eq!(scenario.movers.len(), 1);
        assert!(scenario.movers[0].looping);

        let rendered = write_map_file(&scenario);
        let reparsed = MapFile::parse(&rendered).unwrap().into_scenario(0.05).unwrap();
        assert_eq!(reparsed.movers, scenario.movers);
        assert_eq!(reparsed.start, scenario.start);
        assert_eq!(reparsed.goal, scenario.goal);
        assert_eq!(reparsed.map.obstacles(), scenario.map.obstacles());
    }
}
