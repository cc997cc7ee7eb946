//! Shortest path around disc obstacles via a tangent visibility graph.
//!
//! Obstacles are inflated by the preferred clearance, then a graph is built
//! from the leg endpoints, point-to-circle tangent points and circle-circle
//! bitangent points. Straight edges must clear every inflated disc; nodes on
//! the same circle are linked by boundary arcs. Dijkstra gives the shortest
//! route, which is densified into a polyline.

use super::geometry::{segment_clears_disc, Disc, Point, Polyline};
use crate::{Error, Result};

const CLEAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum Edge {
    Line,
    /// Arc on circle `ci` from `from_angle` sweeping `sweep` radians
    /// (positive = counter-clockwise).
    Arc {
        ci: usize,
        from_angle: f64,
        sweep: f64,
    },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    pos: Point,
    /// Circle the node lies on, with its angle, for arc edges.
    on_circle: Option<(usize, f64)>,
}

struct Graph {
    nodes: Vec<Node>,
    adj: Vec<Vec<(usize, f64, Edge)>>,
}

fn circle_point(c: &Disc, angle: f64) -> Point {
    Point::new(
        c.center.x + c.radius * angle.cos(),
        c.center.y + c.radius * angle.sin(),
    )
}

/// True when segment `ab` clears every circle. Circles the segment is
/// tangent to are accepted by the epsilon.
fn segment_clear(a: Point, b: Point, circles: &[Disc]) -> bool {
    circles
        .iter()
        .all(|c| segment_clears_disc(a, b, c, CLEAR_EPS))
}

/// True when the arc on `circles[ci]` from `from_angle` over `sweep` stays
/// outside every other circle (sampled).
fn arc_clear(circles: &[Disc], ci: usize, from_angle: f64, sweep: f64) -> bool {
    let circle = &circles[ci];
    let steps = ((circle.radius * sweep.abs() / 0.002).ceil() as usize).clamp(2, 512);
    for k in 0..=steps {
        let angle = from_angle + sweep * k as f64 / steps as f64;
        let p = circle_point(circle, angle);
        for (j, other) in circles.iter().enumerate() {
            if j != ci && other.contains(p, CLEAR_EPS) {
                return false;
            }
        }
    }
    true
}

fn build_graph(a: Point, b: Point, circles: &[Disc]) -> Graph {
    let mut nodes = vec![
        Node {
            pos: a,
            on_circle: None,
        },
        Node {
            pos: b,
            on_circle: None,
        },
    ];

    // Tangent points from the endpoints to each circle.
    for (ci, c) in circles.iter().enumerate() {
        for p in [a, b] {
            let d = p.dist(c.center);
            if d <= c.radius + CLEAR_EPS {
                continue;
            }
            let base = p.sub(c.center).angle();
            let alpha = (c.radius / d).clamp(-1.0, 1.0).acos();
            for sign in [-1.0, 1.0] {
                let angle = base + sign * alpha;
                nodes.push(Node {
                    pos: circle_point(c, angle),
                    on_circle: Some((ci, angle)),
                });
            }
        }
    }

    // Bitangent points between circle pairs.
    for i in 0..circles.len() {
        for j in (i + 1)..circles.len() {
            let (ci, cj) = (&circles[i], &circles[j]);
            let d = ci.center.dist(cj.center);
            if d <= f64::MIN_POSITIVE {
                continue;
            }
            let theta = cj.center.sub(ci.center).angle();
            // External bitangents.
            let ratio = (ci.radius - cj.radius) / d;
            if ratio.abs() <= 1.0 {
                let beta = ratio.acos();
                for sign in [-1.0, 1.0] {
                    let ai = theta + sign * beta;
                    nodes.push(Node {
                        pos: circle_point(ci, ai),
                        on_circle: Some((i, ai)),
                    });
                    nodes.push(Node {
                        pos: circle_point(cj, ai),
                        on_circle: Some((j, ai)),
                    });
                }
            }
            // Internal bitangents (only between disjoint circles).
            let ratio = (ci.radius + cj.radius) / d;
            if ratio <= 1.0 {
                let beta = ratio.acos();
                for sign in [-1.0, 1.0] {
                    let ai = theta + sign * beta;
                    let aj = ai + std::f64::consts::PI;
                    nodes.push(Node {
                        pos: circle_point(ci, ai),
                        on_circle: Some((i, ai)),
                    });
                    nodes.push(Node {
                        pos: circle_point(cj, aj),
                        on_circle: Some((j, aj)),
                    });
                }
            }
        }
    }

    let mut adj = vec![Vec::new(); nodes.len()];

    // Straight edges between all visible node pairs.
    for u in 0..nodes.len() {
        for v in (u + 1)..nodes.len() {
            if let (Some((cu, _)), Some((cv, _))) = (nodes[u].on_circle, nodes[v].on_circle) {
                if cu == cv {
                    continue; // same circle: arcs connect these
                }
            }
            let (pu, pv) = (nodes[u].pos, nodes[v].pos);
            let len = pu.dist(pv);
            if len < 1e-12 || !segment_clear(pu, pv, circles) {
                continue;
            }
            adj[u].push((v, len, Edge::Line));
            adj[v].push((u, len, Edge::Line));
        }
    }

    // Arc edges between angular neighbours on each circle.
    for ci in 0..circles.len() {
        let mut ring: Vec<(f64, usize)> = nodes
            .iter()
            .enumerate()
            .filter_map(|(ni, n)| match n.on_circle {
                Some((c, angle)) if c == ci => {
                    Some((angle.rem_euclid(2.0 * std::f64::consts::PI), ni))
                }
                _ => None,
            })
            .collect();
        if ring.len() < 2 {
            continue;
        }
        ring.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let r = circles[ci].radius;
        for k in 0..ring.len() {
            let (a0, u) = ring[k];
            let (a1_raw, v) = ring[(k + 1) % ring.len()];
            let sweep = if k + 1 == ring.len() {
                a1_raw + 2.0 * std::f64::consts::PI - a0
            } else {
                a1_raw - a0
            };
            if sweep < 1e-12 || u == v {
                continue;
            }
            if !arc_clear(circles, ci, a0, sweep) {
                continue;
            }
            let len = r * sweep;
            adj[u].push((
                v,
                len,
                Edge::Arc {
                    ci,
                    from_angle: a0,
                    sweep,
                },
            ));
            adj[v].push((
                u,
                len,
                Edge::Arc {
                    ci,
                    from_angle: a0 + sweep,
                    sweep: -sweep,
                },
            ));
        }
    }

    Graph { nodes, adj }
}

fn dijkstra(g: &Graph, from: usize, to: usize) -> Option<Vec<(usize, Edge)>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Key(f64, usize);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
        }
    }

    let n = g.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, Edge)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Reverse(Key(0.0, from)));
    while let Some(Reverse(Key(d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == to {
            break;
        }
        for &(v, w, edge) in &g.adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = Some((u, edge));
                heap.push(Reverse(Key(nd, v)));
            }
        }
    }
    if dist[to].is_infinite() {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, e) = prev[cur]?;
        path.push((cur, e));
        cur = p;
    }
    path.reverse();
    Some(path)
}

/// Plans one leg and appends densified points to `out` (the leg start is
/// assumed to already be the last point of `out`).
fn plan_leg(
    a: Point,
    b: Point,
    circles: &[Disc],
    spacing: f64,
    out: &mut Vec<Point>,
) -> Result<()> {
    for (i, c) in circles.iter().enumerate() {
        if c.contains(a, -CLEAR_EPS) || c.contains(b, -CLEAR_EPS) {
            return Err(Error::config(format!(
                "no feasible path: leg endpoint lies within the clearance zone of obstacle {i}"
            )));
        }
    }
    if segment_clear(a, b, circles) {
        densify_line(a, b, spacing, out);
        return Ok(());
    }
    let g = build_graph(a, b, circles);
    let steps =
        dijkstra(&g, 0, 1).ok_or_else(|| Error::config("no feasible path between leg endpoints"))?;
    let mut cursor = a;
    for (node, edge) in steps {
        let target = g.nodes[node].pos;
        match edge {
            Edge::Line => densify_line(cursor, target, spacing, out),
            Edge::Arc {
                ci,
                from_angle,
                sweep,
            } => densify_arc(&circles[ci], from_angle, sweep, spacing, out),
        }
        cursor = target;
    }
    Ok(())
}

fn densify_line(a: Point, b: Point, spacing: f64, out: &mut Vec<Point>) {
    let len = a.dist(b);
    let n = (len / spacing).ceil().max(1.0) as usize;
    for k in 1..=n {
        let t = k as f64 / n as f64;
        out.push(a.add(b.sub(a).scale(t)));
    }
}

fn densify_arc(c: &Disc, from_angle: f64, sweep: f64, spacing: f64, out: &mut Vec<Point>) {
    let n = ((c.radius * sweep.abs() / spacing).ceil().max(1.0)) as usize;
    for k in 1..=n {
        let angle = from_angle + sweep * k as f64 / n as f64;
        out.push(circle_point(c, angle));
    }
}

/// Shortest start → target → goal polyline avoiding the obstacles inflated
/// by `clearance`, densified to at most `spacing` between vertices.
pub fn ideal_path(
    start: Point,
    target: Point,
    goal: Point,
    obstacles: &[Disc],
    clearance: f64,
    spacing: f64,
) -> Result<Polyline> {
    let circles: Vec<Disc> = obstacles.iter().map(|o| o.inflate(clearance)).collect();
    let mut points = vec![start];
    plan_leg(start, target, &circles, spacing, &mut points)?;
    plan_leg(target, goal, &circles, spacing, &mut points)?;
    Ok(Polyline::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_obstacles_two_straight_segments() {
        let start = Point::new(0.1, 0.1);
        let target = Point::new(0.5, 0.5);
        let goal = Point::new(0.9, 0.1);
        let p = ideal_path(start, target, goal, &[], 0.05, 0.005).unwrap();
        let want = start.dist(target) + target.dist(goal);
        assert!((p.length() - want).abs() < 1e-9);
        // Every densified vertex lies on one of the two chords.
        for pt in &p.points {
            let d1 = crate::envsim::geometry::segment_point_distance(start, target, *pt);
            let d2 = crate::envsim::geometry::segment_point_distance(target, goal, *pt);
            assert!(d1.min(d2) < 1e-9);
        }
    }

    #[test]
    fn single_blocking_obstacle_wraps_tangentially() {
        let start = Point::new(0.1, 0.5);
        let target = Point::new(0.9, 0.5);
        let goal = Point::new(0.95, 0.5);
        let obstacle = Disc {
            center: Point::new(0.5, 0.5),
            radius: 0.1,
        };
        let clearance = 0.05;
        let p = ideal_path(start, target, goal, &[obstacle], clearance, 0.002).unwrap();
        // Closed form: two tangent segments plus the wrapped arc.
        let r = obstacle.radius + clearance;
        let d = 0.4;
        let tangent = (d * d - r * r).sqrt();
        let wrap = 2.0 * ((r / d).asin());
        let want = 2.0 * tangent + r * wrap + target.dist(goal);
        assert!(
            (p.length() - want).abs() < 2e-3,
            "length {} vs closed form {}",
            p.length(),
            want
        );
        // Clearance invariant: no densified vertex intrudes into the
        // inflated disc.
        for pt in &p.points {
            assert!(obstacle.boundary_distance(*pt) >= clearance - 1e-6);
        }
    }

    #[test]
    fn path_length_never_beats_euclidean_lower_bound() {
        let start = Point::new(0.05, 0.2);
        let target = Point::new(0.6, 0.8);
        let goal = Point::new(0.95, 0.3);
        let obstacles = [
            Disc {
                center: Point::new(0.3, 0.5),
                radius: 0.08,
            },
            Disc {
                center: Point::new(0.7, 0.55),
                radius: 0.07,
            },
        ];
        let p = ideal_path(start, target, goal, &obstacles, 0.04, 0.005).unwrap();
        assert!(p.length() >= start.dist(target) + target.dist(goal) - 1e-9);
    }

    #[test]
    fn endpoint_inside_clearance_zone_is_rejected() {
        let start = Point::new(0.5, 0.52);
        let obstacle = Disc {
            center: Point::new(0.5, 0.5),
            radius: 0.1,
        };
        let r = ideal_path(
            start,
            Point::new(0.9, 0.5),
            Point::new(0.95, 0.5),
            &[obstacle],
            0.05,
            0.005,
        );
        assert!(r.is_err());
    }
}
