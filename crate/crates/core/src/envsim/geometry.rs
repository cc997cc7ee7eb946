//! Planar geometry primitives shared by the environment, the path planner
//! and the trajectory metrics.

use serde::{Deserialize, Serialize};

/// A point (or vector) in workspace coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

/// A disc obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, p: Point, eps: f64) -> bool {
        p.dist(self.center) < self.radius - eps
    }

    /// Signed distance from `p` to the boundary (negative inside).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        p.dist(self.center) - self.radius
    }

    pub fn inflate(&self, by: f64) -> Disc {
        Disc {
            center: self.center,
            radius: self.radius + by,
        }
    }
}

/// Closest point on segment `ab` to `p`, returned as (parameter in [0,1],
/// point).
pub fn closest_on_segment(a: Point, b: Point, p: Point) -> (f64, Point) {
    let d = b.sub(a);
    let len2 = d.dot(d);
    if len2 <= f64::MIN_POSITIVE {
        return (0.0, a);
    }
    let t = (p.sub(a).dot(d) / len2).clamp(0.0, 1.0);
    (t, a.add(d.scale(t)))
}

/// Minimum distance from segment `ab` to point `p`.
pub fn segment_point_distance(a: Point, b: Point, p: Point) -> f64 {
    closest_on_segment(a, b, p).1.dist(p)
}

/// True when segment `ab` stays out of the open disc interior (with a small
/// tolerance so tangent contact counts as clear).
pub fn segment_clears_disc(a: Point, b: Point, disc: &Disc, eps: f64) -> bool {
    segment_point_distance(a, b, disc.center) >= disc.radius - eps
}

/// A piecewise-linear path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
}

/// Projection of a point onto a polyline.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    /// Arc-length position of the closest point.
    pub arc_pos: f64,
    /// Distance from the query point to the polyline.
    pub distance: f64,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Self {
        Polyline { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total arc length.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .sum()
    }

    /// Closest point over all segments; ties resolve to the smallest arc
    /// position.
    pub fn project(&self, p: Point) -> Projection {
        if self.points.len() == 1 {
            return Projection {
                arc_pos: 0.0,
                distance: p.dist(self.points[0]),
            };
        }
        let mut best = Projection {
            arc_pos: 0.0,
            distance: f64::INFINITY,
        };
        let mut cum = 0.0;
        for w in self.points.windows(2) {
            let seg_len = w[0].dist(w[1]);
            let (t, q) = closest_on_segment(w[0], w[1], p);
            let d = q.dist(p);
            if d < best.distance {
                best = Projection {
                    arc_pos: cum + t * seg_len,
                    distance: d,
                };
            }
            cum += seg_len;
        }
        best
    }
}
