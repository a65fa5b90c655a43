use std::io::Write;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::matrix::{maximin_values, MatrixGame};
use crate::error::Result;
use crate::numeric::{format_rational, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: Q,
    pub y: Q,
}

impl Point {
    pub fn new(x: Q, y: Q) -> Point {
        Point { x, y }
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeTuple;
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&format_rational(&self.x))?;
        t.serialize_element(&format_rational(&self.y))?;
        t.end()
    }
}

fn cross(o: &Point, a: &Point, b: &Point) -> Q {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise hull vertices starting from the lowest-then-leftmost
/// point's chain; collinear points are dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= Q::zero() {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= Q::zero() {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// True when `p` lies inside or on the convex polygon `poly` (any size ≤ 2 included).
pub fn polygon_contains(poly: &[Point], p: &Point) -> bool {
    match poly.len() {
        0 => false,
        1 => poly[0] == *p,
        2 => {
            let (a, b) = (&poly[0], &poly[1]);
            cross(a, b, p).is_zero()
                && p.x >= a.x.min(b.x)
                && p.x <= a.x.max(b.x)
                && p.y >= a.y.min(b.y)
                && p.y <= a.y.max(b.y)
        }
        n => (0..n).all(|i| !cross(&poly[i], &poly[(i + 1) % n], p).is_negative()),
    }
}

/// Keeps the part of convex `poly` where `coord(p) ≥ bound`.
fn clip(poly: &[Point], bound: Q, coord: impl Fn(&Point) -> Q) -> Vec<Point> {
    let n = poly.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return if coord(&poly[0]) >= bound { poly.to_vec() } else { Vec::new() };
    }
    let inside = |p: &Point| coord(p) >= bound;
    let cut = |a: &Point, b: &Point| {
        let t = (bound - coord(a)) / (coord(b) - coord(a));
        Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    };
    let mut out = Vec::new();
    for i in 0..n {
        let cur = &poly[i];
        let prev = &poly[(i + n - 1) % n];
        match (inside(prev), inside(cur)) {
            (true, true) => out.push(*cur),
            (true, false) => out.push(cut(prev, cur)),
            (false, true) => {
                out.push(cut(prev, cur));
                out.push(*cur);
            }
            (false, false) => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullReport {
    /// One payoff pair per cell, row-major.
    pub points: Vec<Point>,
    /// Counter-clockwise.
    pub vertices: Vec<Point>,
    pub maximin: Point,
    /// Hull part weakly dominating the maximin point: a polygon, segment, point or empty.
    pub folk_region: Vec<Point>,
}

impl HullReport {
    /// `vertex,x,y` rows of the hull.
    pub fn write_vertices_csv<W: Write>(&self, out: W) -> Result<()> {
        write_polygon(out, &self.vertices)
    }

    /// `vertex,x,y` rows of the folk region.
    pub fn write_region_csv<W: Write>(&self, out: W) -> Result<()> {
        write_polygon(out, &self.folk_region)
    }
}

fn write_polygon<W: Write>(out: W, poly: &[Point]) -> Result<()> {
    let mut w = crate::report::csv_writer(out);
    w.write_record(["vertex", "x", "y"])?;
    for (i, p) in poly.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format_rational(&p.x), format_rational(&p.y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Payoff hull of a two-player game and its folk-theorem region.
pub fn hull_and_folk_region(g: &MatrixGame) -> HullReport {
    let p = g.to_payoffs();
    let points: Vec<Point> = p.cells.iter().flatten().map(|(a, b)| Point::new(*a, *b)).collect();
    let vertices = convex_hull(&points);
    let (mx, my) = maximin_values(&p);
    let clipped = clip(&clip(&vertices, mx, |q| q.x), my, |q| q.y);
    HullReport {
        points,
        vertices,
        maximin: Point::new(mx, my),
        folk_region: convex_hull(&clipped),
    }
}
