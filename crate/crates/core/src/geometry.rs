//! Pixel geometry shared by actions, edges and annotation.

use serde::{Deserialize, Serialize};

/// A pixel coordinate. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl From<[u32; 2]> for Point {
    fn from([x, y]: [u32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [u32; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Screen dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: u32,
    pub height: u32,
}

impl Dims {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn is_positive(&self) -> bool {
        self.width > 0 && self.height > 0
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Axis-aligned rectangle `[x1, y1, x2, y2]`. Hit-testing is inclusive on
/// all four edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("degenerate bbox [{0},{1},{2},{3}]: need x1<x2 and y1<y2")]
pub struct DegenerateBBox(pub u32, pub u32, pub u32, pub u32);

impl BBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, DegenerateBBox> {
        if x1 < x2 && y1 < y2 {
            Ok(Self { x1, y1, x2, y2 })
        } else {
            Err(DegenerateBBox(x1, y1, x2, y2))
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.x1 <= p.x && p.x <= self.x2 && self.y1 <= p.y && p.y <= self.y2
    }

    pub fn area(&self) -> u64 {
        u64::from(self.x2 - self.x1) * u64::from(self.y2 - self.y1)
    }

    /// Integer center, rounding down.
    pub fn center(&self) -> Point {
        Point::new((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)
    }

    /// Whether the rectangle lies within a screen of `dims`.
    pub fn fits(&self, dims: Dims) -> bool {
        self.x2 <= dims.width && self.y2 <= dims.height
    }

    /// Smallest rectangle covering all points; widened by one pixel on a
    /// degenerate axis so the result is always a valid box.
    pub fn covering(points: &[Point]) -> Option<Self> {
        let first = points.first()?;
        let (mut x1, mut y1, mut x2, mut y2) = (first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            x1 = x1.min(p.x);
            y1 = y1.min(p.y);
            x2 = x2.max(p.x);
            y2 = y2.max(p.y);
        }
        if x1 == x2 {
            x2 += 1;
        }
        if y1 == y2 {
            y2 += 1;
        }
        Some(Self { x1, y1, x2, y2 })
    }

    /// Square of half-width `radius` around `p`, clipped to `dims`.
    pub fn around(p: Point, radius: u32, dims: Dims) -> Option<Self> {
        let x1 = p.x.saturating_sub(radius);
        let y1 = p.y.saturating_sub(radius);
        let x2 = (p.x + radius).min(dims.width);
        let y2 = (p.y + radius).min(dims.height);
        Self::new(x1, y1, x2, y2).ok()
    }
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = DegenerateBBox;

    fn try_from([x1, y1, x2, y2]: [u32; 4]) -> Result<Self, Self::Error> {
        Self::new(x1, y1, x2, y2)
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl std::fmt::Display for BBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{},{},{}]", self.x1, self.y1, self.x2, self.y2)
    }
}
