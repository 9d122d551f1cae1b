use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, rhs: Point) -> f64 {
        self.x * rhs.x + self.y * rhs.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, rhs: Point) -> f64 {
        (self - rhs).norm()
    }

    /// (1-t)*self + t*rhs.
    pub fn lerp(self, rhs: Point, t: f64) -> Point {
        (1.0 - t) * self + t * rhs
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Complex product, reading (x, y) as x + iy. Encodes rotation + scaling.
    pub fn complex_mul(self, rhs: Point) -> Point {
        Point::new(
            self.x * rhs.x - self.y * rhs.y,
            self.x * rhs.y + self.y * rhs.x,
        )
    }

    /// Complex quotient, reading (x, y) as x + iy.
    pub fn complex_div(self, rhs: Point) -> Point {
        let d = rhs.norm_sq();
        Point::new(
            (self.x * rhs.x + self.y * rhs.y) / d,
            (self.y * rhs.x - self.x * rhs.y) / d,
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: Point) -> Point {
        rhs * self
    }
}

impl Div<f64> for Point {
    type Output = Point;
    fn div(self, rhs: f64) -> Point {
        Point::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Total length of a polyline.
pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_ops_rotate_and_scale() {
        let i = Point::new(0.0, 1.0);
        let v = Point::new(2.0, 0.0);
        let r = i.complex_mul(v);
        assert!((r.x - 0.0).abs() < 1e-15 && (r.y - 2.0).abs() < 1e-15);
        let q = r.complex_div(v);
        assert!((q.x - i.x).abs() < 1e-15 && (q.y - i.y).abs() < 1e-15);
    }

    #[test]
    fn polyline_length_unit_square_path() {
        let pts = [
            Point::ZERO,
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
        ];
        assert_eq!(polyline_length(&pts), 2.0);
    }
}
