//! Integer lattice geometry: points, wall half-planes, the forward cone and
//! diamond shapes, `∞`-norm diameters.
//!
//! Everything here is exact integer arithmetic. Sign tests against a wall use
//! the stored integer normal, never a normalized float.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

pub const fn pt(x: i64, y: i64) -> Point {
    Point { x, y }
}

impl Point {
    pub const ZERO: Point = pt(0, 0);
    pub const E1: Point = pt(1, 0);
    pub const E2: Point = pt(0, 1);

    #[inline]
    pub fn add(self, o: Point) -> Point {
        pt(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn sub(self, o: Point) -> Point {
        pt(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn neg(self) -> Point {
        pt(-self.x, -self.y)
    }

    #[inline]
    pub fn scale(self, k: i64) -> Point {
        pt(self.x * k, self.y * k)
    }

    #[inline]
    pub fn l1(self) -> i64 {
        self.x.abs() + self.y.abs()
    }

    #[inline]
    pub fn linf(self) -> i64 {
        self.x.abs().max(self.y.abs())
    }

    /// Cross product `self.x * o.y - self.y * o.x`.
    #[inline]
    pub fn cross(self, o: Point) -> i64 {
        self.x * o.y - self.y * o.x
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::add(self, o)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::sub(self, o)
    }
}

/// Forward cone `Y`: `arg ∈ [-κ, π/2 + κ]` with `κ = arctan(1/2)`.
///
/// Membership of an integer point reduces to the two cross-product tests
/// `x + 2y ≥ 0` and `2x + y ≥ 0`; the cone is closed and contains the origin.
#[inline]
pub fn in_cone_origin(d: Point) -> bool {
    d.x + 2 * d.y >= 0 && 2 * d.x + d.y >= 0
}

/// `p ∈ apex + Y`, decided exactly.
#[inline]
pub fn in_cone(p: Point, apex: Point) -> bool {
    in_cone_origin(p.sub(apex))
}

/// `p ∈ D(x, y) = (x + Y) ∩ (y - Y)`.
#[inline]
pub fn in_diamond(p: Point, x: Point, y: Point) -> bool {
    in_cone(p, x) && in_cone(y, p)
}

/// All lattice points of the diamond `D(x, y)`, or empty when `y ∉ x + Y`.
pub fn diamond_points(x: Point, y: Point) -> Vec<Point> {
    let mut out = Vec::new();
    if !in_cone(y, x) {
        return out;
    }
    // D(x, y) fits inside the l1 ball of radius 2|y-x|_1 around x: for
    // p ∈ D, both p-x and y-p lie in Y where |u|_1 ≤ 3(u.x + u.y).
    let r = 2 * y.sub(x).l1();
    for dx in -r..=r {
        for dy in -r..=r {
            let p = x.add(pt(dx, dy));
            if in_diamond(p, x, y) {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point lies outside the closed half-plane (u·n = {0} < 0)")]
    OutsideHalfPlane(i64),
    #[error("empty site set")]
    EmptySet,
    #[error("wall direction must satisfy arg(n) ∈ [-π/4, 3π/4], got normal ({0}, {1})")]
    InadmissibleWall(i64, i64),
    #[error("zero wall normal")]
    ZeroNormal,
}

/// Wall direction `n`, stored as a coprime integer normal `(a, b)`.
///
/// All half-plane sign tests are exact integer comparisons. Irrational
/// directions are approximated by a rational normal with denominator at most
/// `10^6` and flagged as `approximate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wall {
    pub a: i64,
    pub b: i64,
    #[serde(default)]
    pub approximate: bool,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Continued-fraction approximation `p/q ≈ x` with `|x| ≤ 1`, `0 < q ≤ cap`.
fn rational_approx(x: f64, cap: i64) -> (i64, i64) {
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, v.floor() as i64, 1i64);
    let mut frac = v - v.floor();
    while frac > 1e-15 {
        v = 1.0 / frac;
        let a = v.floor() as i64;
        let (p2, q2) = (a.saturating_mul(p1).saturating_add(p0), a.saturating_mul(q1).saturating_add(q0));
        if q2 > cap {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        frac = v - v.floor();
    }
    (sign * p1, q1)
}

impl Wall {
    /// Horizontal wall, `n = (0, 1)`: the contour lives in `{y ≥ 0}`.
    pub const HORIZONTAL: Wall = Wall { a: 0, b: 1, approximate: false };

    pub fn new(a: i64, b: i64) -> Result<Wall, GeometryError> {
        if a == 0 && b == 0 {
            return Err(GeometryError::ZeroNormal);
        }
        let g = gcd(a, b);
        let (a, b) = (a / g, b / g);
        // arg(n) ∈ [-π/4, 3π/4] ⇔ n·(1,1) ≥ 0; both boundary rays admissible.
        if a + b < 0 {
            return Err(GeometryError::InadmissibleWall(a, b));
        }
        Ok(Wall { a, b, approximate: false })
    }

    /// Best rational approximation to the unit normal at angle `theta`
    /// (radians), denominator capped at 10^6 and flagged when inexact.
    pub fn from_angle(theta: f64) -> Result<Wall, GeometryError> {
        const CAP: i64 = 1_000_000;
        let (s, c) = theta.sin_cos();
        let (a, b) = if c.abs() >= s.abs() {
            let (p, q) = rational_approx(s / c, CAP);
            if c >= 0.0 {
                (q, p)
            } else {
                (-q, -p)
            }
        } else {
            let (p, q) = rational_approx(c / s, CAP);
            if s >= 0.0 {
                (p, q)
            } else {
                (-p, -q)
            }
        };
        let mut w = Wall::new(a, b)?;
        let err = (w.a as f64 * s - w.b as f64 * c).abs() / w.norm();
        w.approximate = err > 1e-12;
        Ok(w)
    }

    #[inline]
    pub fn dot(&self, p: Point) -> i64 {
        self.a * p.x + self.b * p.y
    }

    /// Contour-vertex membership in the closed half-plane `H₊ = {u·n ≥ 0}`.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        self.dot(p) >= 0
    }

    /// Cluster-site membership. Sites keep the dual offset: a site `s` lies
    /// inside the wall iff `(s - 0*)·n ≥ 0`, i.e. `2 s·n ≥ a + b`.
    #[inline]
    pub fn site_inside(&self, s: Point) -> bool {
        2 * self.dot(s) >= self.a + self.b
    }

    /// Euclidean norm of the integer normal.
    #[inline]
    pub fn norm(&self) -> f64 {
        ((self.a * self.a + self.b * self.b) as f64).sqrt()
    }

    /// `d_n(u)`: ∞-norm distance from `u ∈ H₊` to the lattice points of the
    /// open complement; equals `⌊u·n / (|a|+|b|)⌋ + 1`.
    pub fn distance(&self, u: Point) -> Result<i64, GeometryError> {
        let s = self.dot(u);
        if s < 0 {
            return Err(GeometryError::OutsideHalfPlane(s));
        }
        Ok(s / (self.a.abs() + self.b.abs()) + 1)
    }

    /// Wall-row sites: sites outside the half-plane whose square still touches
    /// it after one ∞-step (for the horizontal wall, the row `y = 0`).
    #[inline]
    pub fn site_on_wall_row(&self, s: Point) -> bool {
        !self.site_inside(s) && 2 * (self.dot(s) + self.a.abs() + self.b.abs()) >= self.a + self.b
    }

    /// `ℓ_n(s)`: number of `e1` steps from `s` before leaving the half-plane;
    /// `None` means never (e.g. the horizontal wall).
    pub fn steps_to_exit_e1(&self, s: Point) -> Option<i64> {
        if self.a >= 0 {
            return None;
        }
        // dot(s + l e1) = dot(s) + l*a < 0 first at l = floor(dot/|a|) + 1.
        Some(self.dot(s) / (-self.a) + 1)
    }
}

/// `diam_∞` of a finite site set viewed as a union of closed unit squares.
///
/// Squares sharing only a corner touch, so connectivity is 8-adjacency on the
/// sites. Connected sets get coordinate spread + 1 (a singleton has diameter
/// 1); disconnected sets are infinite by convention.
pub fn diam_inf(sites: &[Point]) -> Result<Option<i64>, GeometryError> {
    if sites.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    if !eight_connected(sites) {
        return Ok(None);
    }
    let spread_x = sites.iter().map(|p| p.x).max().unwrap() - sites.iter().map(|p| p.x).min().unwrap();
    let spread_y = sites.iter().map(|p| p.y).max().unwrap() - sites.iter().map(|p| p.y).min().unwrap();
    Ok(Some(spread_x.max(spread_y) + 1))
}

pub fn eight_connected(sites: &[Point]) -> bool {
    if sites.len() <= 1 {
        return !sites.is_empty();
    }
    let set: HashSet<Point> = sites.iter().copied().collect();
    let mut seen = HashSet::with_capacity(set.len());
    let mut stack = vec![sites[0]];
    seen.insert(sites[0]);
    while let Some(p) = stack.pop() {
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let q = p.add(pt(dx, dy));
                if set.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
    }
    seen.len() == set.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_examples() {
        assert!(in_cone(pt(0, 0), pt(0, 0)));
        assert!(in_cone(pt(1, 0), pt(0, 0)));
        assert!(in_cone(pt(2, -1), pt(0, 0)));
        assert!(!in_cone(pt(2, -2), pt(0, 0)));
        assert!(in_cone(pt(-1, 2), pt(0, 0)));
        assert!(!in_cone(pt(-2, 2), pt(0, 0)));
    }

    #[test]
    fn cone_translation_invariant() {
        let t = pt(7, -3);
        for dx in -4..=4 {
            for dy in -4..=4 {
                let p = pt(dx, dy);
                assert_eq!(in_cone(p, Point::ZERO), in_cone(p.add(t), t));
            }
        }
    }

    #[test]
    fn wall_distance_horizontal() {
        let w = Wall::HORIZONTAL;
        assert_eq!(w.distance(pt(5, 0)).unwrap(), 1);
        assert_eq!(w.distance(pt(0, 3)).unwrap(), 4);
        assert!(w.distance(pt(0, -1)).is_err());
    }

    #[test]
    fn wall_distance_matches_bruteforce_scan() {
        // Oracle: min ∞-distance to any lattice point strictly outside,
        // scanned over a padded box.
        for (a, b) in [(0i64, 1i64), (-1, 1), (1, 2), (-1, 3)] {
            let w = Wall::new(a, b).unwrap();
            for x in -3..=3 {
                for y in -3..=6 {
                    let u = pt(x, y);
                    if !w.contains(u) {
                        continue;
                    }
                    let mut best = i64::MAX;
                    let r = 40;
                    for wx in (x - r)..=(x + r) {
                        for wy in (y - r)..=(y + r) {
                            let q = pt(wx, wy);
                            if w.dot(q) < 0 {
                                best = best.min(u.sub(q).linf());
                            }
                        }
                    }
                    assert_eq!(w.distance(u).unwrap(), best, "wall ({a},{b}) at {u:?}");
                }
            }
        }
    }

    #[test]
    fn wall_row_is_distance_one_band() {
        let w = Wall::HORIZONTAL;
        assert!(w.site_on_wall_row(pt(3, 0)));
        assert!(!w.site_on_wall_row(pt(3, 1)));
        assert!(!w.site_on_wall_row(pt(3, -1)));
        // For n = (0,1) the contour rows {d_n = 1} are exactly {y = 0}.
        for x in -3..=3 {
            assert_eq!(w.distance(pt(x, 0)).unwrap(), 1);
        }
    }

    #[test]
    fn wall_distance_invariant_along_wall() {
        let w = Wall::new(-1, 1).unwrap();
        let t = pt(1, 1); // t·n = 0
        for x in -2..=2 {
            for y in x.max(-x)..=5 {
                let u = pt(x, y);
                if w.contains(u) {
                    assert_eq!(w.distance(u).unwrap(), w.distance(u.add(t)).unwrap());
                }
            }
        }
    }

    #[test]
    fn inadmissible_wall_rejected() {
        assert!(Wall::new(0, -1).is_err());
        assert!(Wall::new(-1, -1).is_err());
        assert!(Wall::new(1, -1).is_ok()); // arg = -π/4 boundary
        assert!(Wall::new(-1, 1).is_ok()); // arg = 3π/4 boundary
    }

    #[test]
    fn diamond_examples() {
        let (x, y) = (pt(0, 0), pt(4, 0));
        assert!(in_diamond(x, x, y));
        assert!(in_diamond(y, x, y));
        assert!(!in_diamond(pt(2, 3), x, y));
        for p in diamond_points(x, y) {
            assert!(in_cone(p, x) && in_cone(y, p));
        }
    }

    #[test]
    fn diam_inf_examples() {
        assert_eq!(diam_inf(&[pt(0, 0)]).unwrap(), Some(1));
        assert_eq!(diam_inf(&[pt(0, 0), pt(1, 0)]).unwrap(), Some(2));
        assert_eq!(diam_inf(&[pt(0, 0), pt(1, 1)]).unwrap(), Some(2));
        assert_eq!(diam_inf(&[pt(0, 0), pt(5, 5)]).unwrap(), None);
        assert!(diam_inf(&[]).is_err());
    }
}
