//! Constructions of functions with prescribed cluster behaviour on a closed
//! nowhere dense boundary set `L`.
//!
//! * [`lemma1`]: on an explicit domain `D`, values are pulled toward
//!   `Phi(h(x))` for a nearest boundary point `h(x)`; cluster sets are
//!   contained in `Phi`.
//! * [`theorem1`]: anchors on `L` are split into `3/n`-separated layers and
//!   each anchor receives a sequence of domain points converging to it with
//!   values whose limit points are `Phi(s)`; cluster sets equal `Phi`.
//! * [`theorem2`]: the theorem construction on a discrete part `D_1` of an
//!   explicit domain, the lemma construction on the rest.
//!
//! Each construction is registered by name in [`registry`].

pub mod audit;
pub mod lemma1;
pub mod registry;
pub mod theorem1;
pub mod theorem2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limit_sequences::SequenceError;
use crate::metric::{dist_to_points, BoundingBox, GeomError, Metric, Point, SampledSet};
use crate::multifunction::{ClusterError, DeltaSchedule, MultifunctionTable, UscWitness};
use crate::nets::NetError;

pub use audit::{audit_function, AuditReport, ConditionCheck};
pub use lemma1::{construct_lemma1, ValueSelector};
pub use registry::{Constructed, Construction, ConstructionRegistry};
pub use theorem1::{construct_theorem1, AnchorFamily, Placement, Theorem1Output};
pub use theorem2::{construct_theorem2, Theorem2Output};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error("multifunction is not upper continuous at the configured scale: value {} of Phi{} is {} from Phi{}", .0.value, .0.neighbor, .0.gap, .0.key)]
    NotUpperContinuous(UscWitness),
    #[error("boundary set has interior near {0}: every probe in the ball lies on it")]
    NotNowhereDense(Point),
    #[error("domain point {0} lies on the boundary set (r(x) = 0)")]
    BoundaryContact(Point),
    #[error("boundary sample too coarse at {x}: nearest sample point is {gap} away, need < 2 r(x) = {}", 2.0 * .r)]
    BoundaryTooCoarse { x: Point, r: f64, gap: f64 },
    #[error("value grid too coarse at {x}: nearest grid value is {gap} from Phi(h(x)), need < r(x) = {r}; use a grid step below {required_step}")]
    ValueGridTooCoarse {
        x: Point,
        r: f64,
        gap: f64,
        required_step: f64,
    },
    #[error("domain too sparse near anchor {anchor} (layer {layer}): placed {placed} of {wanted} points")]
    DomainTooSparse {
        anchor: Point,
        layer: usize,
        placed: usize,
        wanted: usize,
    },
    #[error("construction `{0}` needs an explicit domain sample")]
    DomainRequired(&'static str),
    #[error("registry collision at {0}")]
    Collision(Point),
    #[error("unknown value selector `{0}`")]
    UnknownSelector(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Exact geometry of the boundary set, when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactShape {
    /// Axis-aligned box; degenerate axes give points, segments and faces.
    Box(BoundingBox),
}

impl ExactShape {
    fn dist(&self, p: &[f64], m: Metric) -> f64 {
        match self {
            ExactShape::Box(b) => b.dist_to(p, m),
        }
    }
}

/// A closed set given by a dense sample and a distance function.
#[derive(Clone, Debug, PartialEq)]
pub struct SetOracle {
    sample: SampledSet,
    shape: Option<ExactShape>,
    metric: Metric,
}

impl SetOracle {
    pub fn sampled(sample: SampledSet, metric: Metric) -> Self {
        Self {
            sample,
            shape: None,
            metric,
        }
    }

    pub fn exact(sample: SampledSet, shape: ExactShape, metric: Metric) -> Self {
        Self {
            sample,
            shape: Some(shape),
            metric,
        }
    }

    pub fn sample(&self) -> &SampledSet {
        &self.sample
    }

    pub fn shape(&self) -> Option<&ExactShape> {
        self.shape.as_ref()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// `r(x) = d(x, L)`: exact when a shape is known, sample-based otherwise.
    pub fn dist(&self, p: &[f64]) -> f64 {
        match &self.shape {
            Some(shape) => shape.dist(p, self.metric),
            None => dist_to_points(p, self.sample.points(), self.metric),
        }
    }

    /// Largest disagreement between the distance function and the sample
    /// distance over `probes`, together with the worst probe.
    pub fn consistency_gap<'a>(&self, probes: impl IntoIterator<Item = &'a Point>) -> Option<(f64, Point)> {
        probes
            .into_iter()
            .map(|p| {
                let exact = self.dist(p.coords());
                let sampled = dist_to_points(p.coords(), self.sample.points(), self.metric);
                ((exact - sampled).abs(), p.clone())
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Rational grid on the value box standing in for the dense set `Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    step: f64,
    counts: Vec<usize>,
}

impl ValueGrid {
    pub fn new(space: &BoundingBox, step: f64) -> Result<Self, GeomError> {
        space.validate()?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(GeomError::BadResolution(step));
        }
        let counts = space
            .lo
            .iter()
            .zip(&space.hi)
            .map(|(&lo, &hi)| ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize)
            .collect();
        Ok(Self {
            lo: space.lo.clone(),
            hi: space.hi.clone(),
            step,
            counts,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    fn coord(&self, axis: usize, i: usize) -> f64 {
        (self.lo[axis] + i as f64 * self.step).min(self.hi[axis])
    }

    /// Every grid point, last axis fastest.
    pub fn points(&self) -> Vec<Point> {
        let total: usize = self.counts.iter().map(|c| c + 1).product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dim()];
        loop {
            out.push(Point::from_coords_unchecked(
                idx.iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect(),
            ));
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < self.counts[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    fn axis_nearest(&self, axis: usize, c: f64) -> usize {
        let t = ((c - self.lo[axis]) / self.step).floor();
        let below = (t.max(0.0) as usize).min(self.counts[axis]);
        let above = (below + 1).min(self.counts[axis]);
        if (self.coord(axis, above) - c).abs() < (c - self.coord(axis, below)).abs() {
            above
        } else {
            below
        }
    }

    /// Grid point nearest to `z` (coordinate-wise, which is nearest in every
    /// supported metric).
    pub fn nearest(&self, z: &[f64]) -> Point {
        Point::from_coords_unchecked(
            z.iter()
                .enumerate()
                .map(|(a, &c)| self.coord(a, self.axis_nearest(a, c)))
                .collect(),
        )
    }

    /// Whether `y` is bit-for-bit a grid point.
    pub fn contains(&self, y: &Point) -> bool {
        y.dim() == self.dim()
            && y.coords()
                .iter()
                .enumerate()
                .all(|(a, &c)| self.coord(a, self.axis_nearest(a, c)).to_bits() == c.to_bits())
    }

    /// Worst distance from a point of the box to the grid.
    pub fn covering_radius(&self, m: Metric) -> f64 {
        m.norm(&vec![self.step / 2.0; self.dim()])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depths {
    /// Number of anchor layers.
    pub n_max: usize,
    /// Domain points per anchor.
    pub k_max: usize,
    /// Depth of the limit-point value sequences.
    #[serde(rename = "K")]
    pub k_depth: usize,
}

impl Default for Depths {
    fn default() -> Self {
        Self {
            n_max: 6,
            k_max: 128,
            k_depth: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// The theorem construction chooses its own points in `X \ L`.
    Free,
    Explicit(SampledSet),
}

impl Domain {
    pub fn explicit(&self) -> Option<&SampledSet> {
        match self {
            Domain::Free => None,
            Domain::Explicit(d) => Some(d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UscParams {
    pub delta: f64,
    pub epsilon: f64,
}

/// Fully expanded scene.
#[derive(Clone, Debug)]
pub struct Scene {
    pub dimension: usize,
    pub metric: Metric,
    pub x_box: BoundingBox,
    pub x_resolution: f64,
    pub boundary: SetOracle,
    pub phi: MultifunctionTable,
    pub domain: Domain,
    pub value_grid: ValueGrid,
    pub depths: Depths,
    pub usc: UscParams,
    pub schedule: DeltaSchedule,
    pub probes: Option<usize>,
    pub selector: String,
    pub seed: u64,
}

impl Scene {
    /// Radius `1/n` of layer `n`.
    pub fn layer_radius(n: usize) -> f64 {
        1.0 / n as f64
    }

    /// Separation `3/n` of layer `n`.
    pub fn layer_separation(n: usize) -> f64 {
        3.0 / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_enumeration_and_membership() {
        let space = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        let g = ValueGrid::new(&space, 0.25).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 5 * 3);
        assert!(pts.iter().all(|p| g.contains(p)));
        assert!(!g.contains(&Point::new(vec![0.1, 0.0]).unwrap()));
        assert_eq!(g.nearest(&[0.6, 0.3]).coords(), &[0.5, 0.25]);
        assert_eq!(g.nearest(&[2.0, -1.0]).coords(), &[1.0, 0.0]);
    }

    #[test]
    fn grid_clamps_last_cell() {
        let space = BoundingBox::new(vec![0.0], vec![1.0]).unwrap();
        let g = ValueGrid::new(&space, 0.3).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|p| p.coords()[0]).collect();
        assert_eq!(xs.len(), 5);
        assert_eq!(*xs.last().unwrap(), 1.0);
        assert_eq!(g.nearest(&[0.97]).coords(), &[1.0]);
    }

    #[test]
    fn grid_hits_fine_decimal_steps() {
        let space = BoundingBox::new(vec![0.0], vec![1.0]).unwrap();
        let g = ValueGrid::new(&space, 0.005).unwrap();
        assert_eq!(g.points().len(), 201);
        for i in 0..=100 {
            let z = i as f64 * 0.01;
            let y = g.nearest(&[z]);
            assert!((y.coords()[0] - z).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_exact_and_sampled_agree_on_sample() {
        let sample = SampledSet::new(
            (0..=10)
                .map(|j| Point::new(vec![0.0, j as f64 / 10.0]).unwrap())
                .collect(),
            0.1,
        )
        .unwrap();
        let shape = ExactShape::Box(BoundingBox::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap());
        let oracle = SetOracle::exact(sample.clone(), shape, Metric::Euclidean);
        for p in sample.points() {
            assert_eq!(oracle.dist(p.coords()), 0.0);
        }
        assert_eq!(oracle.dist(&[0.25, 0.5]), 0.25);
        let probes = vec![Point::new(vec![0.3, 0.55]).unwrap()];
        let (gap, _) = oracle.consistency_gap(&probes).unwrap();
        assert!(gap <= 0.1);
    }
}
