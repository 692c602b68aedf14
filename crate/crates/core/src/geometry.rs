//! Points in one or two dimensions.

use std::fmt;
use std::ops::Sub;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Spatial dimension. Only `d = 1` and `d = 2` are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn get(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    /// `s^d`.
    pub fn pow(self, s: f64) -> f64 {
        match self {
            Dim::One => s,
            Dim::Two => s * s,
        }
    }
}

impl TryFrom<u8> for Dim {
    type Error = String;

    fn try_from(d: u8) -> Result<Self, Self::Error> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            other => Err(format!("dimension must be 1 or 2, got {other}")),
        }
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        d.get() as u8
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.get())
    }
}

/// A point of ℝ¹ or ℝ². In one dimension the second coordinate is always zero,
/// so Euclidean norms can be taken over both slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    c: [f64; 2],
    dim: Dim,
}

impl Point {
    pub fn new1(x: f64) -> Self {
        Point { c: [x, 0.0], dim: Dim::One }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Point { c: [x, y], dim: Dim::Two }
    }

    pub fn origin(dim: Dim) -> Self {
        Point { c: [0.0, 0.0], dim }
    }

    /// Builds a point from a coordinate slice of length 1 or 2.
    pub fn from_slice(xs: &[f64]) -> Option<Self> {
        match *xs {
            [x] => Some(Point::new1(x)),
            [x, y] => Some(Point::new2(x, y)),
            _ => None,
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim.get()]
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.c[k]
    }

    pub fn with_coord(mut self, k: usize, v: f64) -> Self {
        self.c[k] = v;
        self
    }

    pub fn norm(&self) -> f64 {
        self.c[0].hypot(self.c[1])
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Point { c: [self.c[0] * s, self.c[1] * s], dim: self.dim }
    }

    /// Displacement `self - other` reduced to the minimum image on a torus of side `side`.
    pub fn min_image_sub(&self, other: &Point, side: f64) -> Point {
        let mut d = *self - *other;
        for k in 0..self.dim.get() {
            let v = d.c[k];
            d.c[k] = v - side * (v / side).round();
        }
        d
    }
}

impl Sub for Point {
    type Output = Point;

    fn sub(self, rhs: Point) -> Point {
        Point { c: [self.c[0] - rhs.c[0], self.c[1] - rhs.c[1]], dim: self.dim }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.dim.get()))?;
        for v in self.coords() {
            seq.serialize_element(v)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PointVisitor;

        impl<'de> Visitor<'de> for PointVisitor {
            type Value = Point;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of 1 or 2 finite numbers")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Point, A::Error> {
                let mut xs = [0.0f64; 2];
                let mut len = 0;
                while let Some(v) = seq.next_element::<f64>()? {
                    if len == 2 {
                        return Err(de::Error::invalid_length(3, &self));
                    }
                    if !v.is_finite() {
                        return Err(de::Error::custom("point coordinates must be finite"));
                    }
                    xs[len] = v;
                    len += 1;
                }
                Point::from_slice(&xs[..len]).ok_or_else(|| de::Error::invalid_length(len, &self))
            }
        }

        d.deserialize_seq(PointVisitor)
    }
}

/// Wraps a coordinate into `[0, side)`.
pub fn wrap_coord(v: f64, side: f64) -> f64 {
    let w = v.rem_euclid(side);
    if w >= side {
        0.0
    } else {
        w
    }
}
