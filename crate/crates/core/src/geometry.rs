//! Planar geometry: vectors, the line-segment obstacle, distance queries and
//! swept collision tests.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("distance gradient is undefined on the obstacle (p = 0)")]
    DegenerateGradient,
    #[error("obstacle endpoints coincide at ({0}, {1})")]
    DegenerateObstacle(f64, f64),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A 2-vector in the task plane. Units depend on context (m, m/s, N, ...).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0).then(|| self / n)
    }

    /// Rescales the vector so its length does not exceed `cap`.
    pub fn clamp_norm(self, cap: f64) -> Vec2 {
        let n = self.norm();
        if n > cap {
            self * (cap / n)
        } else {
            self
        }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A thin line obstacle between two distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub endpoint_a: Vec2,
    pub endpoint_b: Vec2,
}

impl Obstacle {
    pub fn new(endpoint_a: Vec2, endpoint_b: Vec2) -> Result<Self, GeometryError> {
        if !endpoint_a.is_finite() || !endpoint_b.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if endpoint_a == endpoint_b {
            return Err(GeometryError::DegenerateObstacle(endpoint_a.x, endpoint_a.y));
        }
        Ok(Self {
            endpoint_a,
            endpoint_b,
        })
    }

    /// Segment of length `length` centred on `center`, perpendicular to `axis`.
    pub fn perpendicular_to(center: Vec2, axis: Vec2, length: f64) -> Result<Self, GeometryError> {
        let dir = axis.normalized().ok_or(GeometryError::NonFinite)?;
        let half = dir.perp() * (0.5 * length);
        Self::new(center - half, center + half)
    }

    pub fn midpoint(&self) -> Vec2 {
        (self.endpoint_a + self.endpoint_b) * 0.5
    }

    pub fn length(&self) -> f64 {
        self.endpoint_a.distance(self.endpoint_b)
    }

    /// The same segment with endpoints swapped.
    pub fn reversed(&self) -> Self {
        Self {
            endpoint_a: self.endpoint_b,
            endpoint_b: self.endpoint_a,
        }
    }
}

/// Result of a point-to-segment query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentDistance {
    /// Euclidean distance `p` from the query point to the segment.
    pub distance: f64,
    /// Nearest point of the segment.
    pub closest: Vec2,
}

pub fn segment_distance(x: Vec2, obstacle: &Obstacle) -> SegmentDistance {
    let a = obstacle.endpoint_a;
    let b = obstacle.endpoint_b;
    let ab = b - a;
    let t = (x - a).dot(ab) / ab.norm_squared();
    let offset = if t <= 0.0 {
        x - a
    } else if t >= 1.0 {
        x - b
    } else {
        // Perpendicular component of x - a; exactly zero for points on the line.
        let u = ab / ab.norm();
        let rel = x - a;
        rel - u * rel.dot(u)
    };
    SegmentDistance {
        distance: offset.norm(),
        closest: x - offset,
    }
}

/// Unit gradient of the point-to-segment distance, `(x - closest) / p`.
pub fn distance_gradient(x: Vec2, obstacle: &Obstacle) -> Result<Vec2, GeometryError> {
    let SegmentDistance { distance, closest } = segment_distance(x, obstacle);
    if distance == 0.0 {
        return Err(GeometryError::DegenerateGradient);
    }
    Ok((x - closest) / distance)
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Whether `c` lies inside the axis-aligned box spanned by `a` and `b`.
fn within_bounds(a: Vec2, b: Vec2, c: Vec2) -> bool {
    c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
}

/// True when the motion `from -> to` intersects or touches the obstacle,
/// including collinear overlap and a stationary point resting on it.
pub fn swept_collision(from: Vec2, to: Vec2, obstacle: &Obstacle) -> bool {
    let (a, b) = (obstacle.endpoint_a, obstacle.endpoint_b);
    if from.x.max(to.x) < a.x.min(b.x)
        || from.x.min(to.x) > a.x.max(b.x)
        || from.y.max(to.y) < a.y.min(b.y)
        || from.y.min(to.y) > a.y.max(b.y)
    {
        return false;
    }
    let d1 = orientation(a, b, from);
    let d2 = orientation(a, b, to);
    let d3 = orientation(from, to, a);
    let d4 = orientation(from, to, b);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }

    (d1 == 0.0 && within_bounds(a, b, from))
        || (d2 == 0.0 && within_bounds(a, b, to))
        || (d3 == 0.0 && within_bounds(from, to, a))
        || (d4 == 0.0 && within_bounds(from, to, b))
}
