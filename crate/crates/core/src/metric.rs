//! Points, metrics, balls and set distances.
//!
//! Everything downstream works on finite samples: a [`SampledSet`] is a
//! finite list of distinct points together with the resolution at which it
//! stands in for an ideal (possibly infinite) set.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },
    #[error("empty point")]
    EmptyPoint,
    #[error("operation requires a nonempty set")]
    EmptySet,
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("duplicate point {0}")]
    DuplicatePoint(Point),
    #[error("box bounds invalid on axis {axis}: lo={lo} hi={hi}")]
    BadBox { axis: usize, lo: f64, hi: f64 },
}

/// A coordinate vector with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeomError> {
        if coords.is_empty() {
            return Err(GeomError::EmptyPoint);
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(GeomError::NonFinite { index });
        }
        Ok(Self(coords))
    }

    /// One-dimensional point; panics on a non-finite value.
    pub fn scalar(x: f64) -> Self {
        Self::new(vec![x]).expect("finite scalar")
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Bit-exact identity of the coordinates, with `-0.0` folded into `0.0`.
    pub fn key(&self) -> PointKey {
        PointKey(
            self.0
                .iter()
                .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
                .collect(),
        )
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Self(coords)
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = GeomError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Hashable exact identity of a [`Point`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey(Vec<u64>);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Chebyshev,
    Manhattan,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Chebyshev, Metric::Manhattan];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Chebyshev => "chebyshev",
            Metric::Manhattan => "manhattan",
        }
    }

    /// Distance between raw coordinate slices of equal length.
    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let gaps = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Euclidean => gaps.map(|g| g * g).sum::<f64>().sqrt(),
            Metric::Chebyshev => gaps.fold(0.0, f64::max),
            Metric::Manhattan => gaps.sum(),
        }
    }

    /// Norm of a coordinate vector under this metric.
    pub fn norm(self, v: &[f64]) -> f64 {
        let zero = vec![0.0; v.len()];
        self.eval(v, &zero)
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric `{s}` (expected euclidean, chebyshev or manhattan)"))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn dist(p: &Point, q: &Point, m: Metric) -> Result<f64, GeomError> {
    same_dim(p.dim(), q.dim())?;
    Ok(m.eval(p.coords(), q.coords()))
}

fn same_dim(expected: usize, got: usize) -> Result<(), GeomError> {
    if expected == got {
        Ok(())
    } else {
        Err(GeomError::DimensionMismatch { expected, got })
    }
}

/// Axis-aligned box `[lo, hi]`; degenerate axes are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeomError> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        same_dim(self.lo.len(), self.hi.len())?;
        if self.lo.is_empty() {
            return Err(GeomError::EmptyPoint);
        }
        for (axis, (&lo, &hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(GeomError::BadBox { axis, lo, hi });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&c, (&lo, &hi))| lo <= c && c <= hi)
    }

    /// Nearest point of the box (coordinate-wise clamp). This is the metric
    /// projection for every metric in [`Metric`].
    pub fn clamp(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&c, (&lo, &hi))| c.clamp(lo, hi))
            .collect()
    }

    pub fn dist_to(&self, p: &[f64], m: Metric) -> f64 {
        m.eval(p, &self.clamp(p))
    }

    pub fn diameter(&self, m: Metric) -> f64 {
        m.eval(&self.lo, &self.hi)
    }
}

/// A finite, duplicate-free point sample standing in for an ideal set at the
/// given resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSet {
    points: Vec<Point>,
    resolution: f64,
}

impl SampledSet {
    /// Builds a sample, rejecting duplicates and mixed dimensions.
    pub fn new(points: Vec<Point>, resolution: f64) -> Result<Self, GeomError> {
        check_resolution(resolution)?;
        if let Some(first) = points.first() {
            let d = first.dim();
            let mut seen = HashSet::with_capacity(points.len());
            for p in &points {
                same_dim(d, p.dim())?;
                if !seen.insert(p.key()) {
                    return Err(GeomError::DuplicatePoint(p.clone()));
                }
            }
        }
        Ok(Self { points, resolution })
    }

    /// Builds a sample, silently dropping exact duplicates (first occurrence
    /// wins). Dimensions must still agree.
    pub fn dedup(points: impl IntoIterator<Item = Point>, resolution: f64) -> Result<Self, GeomError> {
        check_resolution(resolution)?;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut dim = None;
        for p in points {
            match dim {
                None => dim = Some(p.dim()),
                Some(d) => same_dim(d, p.dim())?,
            }
            if seen.insert(p.key()) {
                out.push(p);
            }
        }
        Ok(Self {
            points: out,
            resolution,
        })
    }

    pub fn empty(resolution: f64) -> Result<Self, GeomError> {
        Self::new(Vec::new(), resolution)
    }

    pub fn from_scalars(xs: &[f64], resolution: f64) -> Result<Self, GeomError> {
        let pts = xs.iter().map(|&x| Point::new(vec![x])).collect::<Result<Vec<_>, _>>()?;
        Self::new(pts, resolution)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Point::dim)
    }

    pub fn contains(&self, p: &Point) -> bool {
        let k = p.key();
        self.points.iter().any(|q| q.key() == k)
    }

    pub fn key_set(&self) -> HashSet<PointKey> {
        self.points.iter().map(Point::key).collect()
    }

    /// Equality as sets of points (order ignored).
    pub fn same_points(&self, other: &SampledSet) -> bool {
        self.len() == other.len() && self.key_set() == other.key_set()
    }

    fn check_dim(&self, p: &Point) -> Result<(), GeomError> {
        match self.dim() {
            Some(d) => same_dim(d, p.dim()),
            None => Ok(()),
        }
    }
}

fn check_resolution(r: f64) -> Result<(), GeomError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(GeomError::BadResolution(r))
    }
}

/// `d(p, S) = min_{q in S} d(p, q)`.
pub fn dist_to_set(p: &Point, s: &SampledSet, m: Metric) -> Result<f64, GeomError> {
    if s.is_empty() {
        return Err(GeomError::EmptySet);
    }
    s.check_dim(p)?;
    Ok(dist_to_points(p.coords(), s.points(), m))
}

/// Unchecked nearest distance; `+inf` for an empty slice.
#[inline]
pub(crate) fn dist_to_points(p: &[f64], pts: &[Point], m: Metric) -> f64 {
    let mut best = f64::INFINITY;
    for q in pts {
        let d = m.eval(p, q.coords());
        if d < best {
            best = d;
            if best == 0.0 {
                break;
            }
        }
    }
    best
}

/// Index and distance of the nearest point (first one on ties).
pub(crate) fn nearest_index(p: &[f64], pts: &[Point], m: Metric) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, q) in pts.iter().enumerate() {
        let d = m.eval(p, q.coords());
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best
}

/// Points of `s` in the open (`closed = false`) or closed ball around `c`.
pub fn ball_filter(s: &SampledSet, c: &Point, r: f64, closed: bool, m: Metric) -> Result<SampledSet, GeomError> {
    if !(r > 0.0) {
        return Err(GeomError::BadRadius(r));
    }
    s.check_dim(c)?;
    let points = s
        .points()
        .iter()
        .filter(|q| {
            let d = m.eval(c.coords(), q.coords());
            if closed {
                d <= r
            } else {
                d < r
            }
        })
        .cloned()
        .collect();
    Ok(SampledSet {
        points,
        resolution: s.resolution,
    })
}

/// `sup_{a in A} d(a, B)`.
pub fn directed_hausdorff(a: &SampledSet, b: &SampledSet, m: Metric) -> Result<f64, GeomError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomError::EmptySet);
    }
    if let (Some(da), Some(db)) = (a.dim(), b.dim()) {
        same_dim(da, db)?;
    }
    Ok(directed_points(a.points(), b.points(), m))
}

pub(crate) fn directed_points(a: &[Point], b: &[Point], m: Metric) -> f64 {
    a.iter().map(|p| dist_to_points(p.coords(), b, m)).fold(0.0, f64::max)
}

pub fn hausdorff(a: &SampledSet, b: &SampledSet, m: Metric) -> Result<f64, GeomError> {
    let ab = directed_hausdorff(a, b, m)?;
    let ba = directed_hausdorff(b, a, m)?;
    Ok(ab.max(ba))
}

pub fn diameter(a: &SampledSet, m: Metric) -> Result<f64, GeomError> {
    if a.is_empty() {
        return Err(GeomError::EmptySet);
    }
    Ok(diameter_points(a.points(), m))
}

pub(crate) fn diameter_points(pts: &[Point], m: Metric) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            best = best.max(m.eval(p.coords(), q.coords()));
        }
    }
    best
}
