//! Sequences in a sample whose limit-point set is a prescribed closed set.
//!
//! Block `k` collects the points of a `1/(2k)`-net of `A` that lie within
//! `1/k` of `F`. The concatenation of the blocks has every tail from block
//! `k` on inside `B(F, 1/k)` while each block still reaches every point of
//! `F`, so at infinite depth its limit points are exactly `F`.

use thiserror::Error;

use crate::metric::{dist_to_points, GeomError, Metric, Point, SampledSet};
use crate::nets::greedy_indices;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("target set is empty")]
    EmptyTarget,
    #[error("source set is empty")]
    EmptySource,
    #[error("target point {point} is {gap} from the source, more than its resolution {resolution}")]
    TargetNotInClosure { point: Point, gap: f64, resolution: f64 },
    #[error("resolution too coarse at level {level}: block is empty")]
    ResolutionTooCoarse { level: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitSequence {
    points: Vec<Point>,
    /// `block_ends[k-1]` is one past the last index of block `k`.
    block_ends: Vec<usize>,
}

impl LimitSequence {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn block_ends(&self) -> &[usize] {
        &self.block_ends
    }

    pub fn depth(&self) -> usize {
        self.block_ends.len()
    }

    /// Block `k`, 1-based.
    pub fn block(&self, k: usize) -> &[Point] {
        let start = if k == 1 { 0 } else { self.block_ends[k - 2] };
        &self.points[start..self.block_ends[k - 1]]
    }

    /// Blocks `k..=depth`, 1-based.
    pub fn tail_from_block(&self, k: usize) -> &[Point] {
        let start = if k == 1 { 0 } else { self.block_ends[k - 2] };
        &self.points[start..]
    }
}

/// Concatenation `B_1, ..., B_depth` with `B_k = A_k n B(F, 1/k)` and `A_k` a
/// greedy `1/(2k)`-net of `a`.
pub fn limit_point_sequence(
    a: &SampledSet,
    f: &SampledSet,
    depth: usize,
    m: Metric,
) -> Result<LimitSequence, SequenceError> {
    if depth == 0 {
        return Err(SequenceError::ZeroDepth);
    }
    if f.is_empty() {
        return Err(SequenceError::EmptyTarget);
    }
    if a.is_empty() {
        return Err(SequenceError::EmptySource);
    }
    if a.dim() != f.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: a.dim().unwrap_or(0),
            got: f.dim().unwrap_or(0),
        }
        .into());
    }
    let resolution = a.resolution();
    for p in f.points() {
        let gap = dist_to_points(p.coords(), a.points(), m);
        if gap > resolution {
            return Err(SequenceError::TargetNotInClosure {
                point: p.clone(),
                gap,
                resolution,
            });
        }
    }

    // Distance to F is level-independent; compute it once per source point.
    let to_target: Vec<f64> = a
        .points()
        .iter()
        .map(|p| dist_to_points(p.coords(), f.points(), m))
        .collect();

    let mut points = Vec::new();
    let mut block_ends = Vec::with_capacity(depth);
    for k in 1..=depth {
        let radius = 1.0 / k as f64;
        let net = greedy_indices(a.points(), radius / 2.0, m);
        let before = points.len();
        points.extend(
            net.into_iter()
                .filter(|&i| to_target[i] < radius)
                .map(|i| a.points()[i].clone()),
        );
        if points.len() == before {
            return Err(SequenceError::ResolutionTooCoarse { level: k });
        }
        block_ends.push(points.len());
    }
    Ok(LimitSequence { points, block_ends })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, step: f64) -> SampledSet {
        let n = ((hi - lo) / step).round() as usize;
        let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
        SampledSet::from_scalars(&xs, step).unwrap()
    }

    #[test]
    fn singleton_repeats() {
        let p = SampledSet::from_scalars(&[0.3], 0.1).unwrap();
        let seq = limit_point_sequence(&p, &p, 3, Metric::Euclidean).unwrap();
        assert_eq!(seq.points(), vec![Point::scalar(0.3); 3].as_slice());
        assert_eq!(seq.block_ends(), &[1, 2, 3]);
    }

    #[test]
    fn endpoints_target() {
        let a = grid(0.0, 1.0, 1e-3);
        let f = SampledSet::from_scalars(&[0.0, 1.0], 1e-3).unwrap();
        let seq = limit_point_sequence(&a, &f, 5, Metric::Euclidean).unwrap();
        let block5 = seq.block(5);
        for y in block5 {
            let c = y.coords()[0];
            assert!(c.min(1.0 - c) < 0.2, "{c}");
        }
        for target in [0.0, 1.0] {
            let near = block5
                .iter()
                .map(|y| (y.coords()[0] - target).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(near < 0.4);
        }
    }

    #[test]
    fn rejects_target_outside_closure() {
        let a = grid(0.0, 0.5, 0.01);
        let f = SampledSet::from_scalars(&[0.9], 0.01).unwrap();
        assert!(matches!(
            limit_point_sequence(&a, &f, 2, Metric::Euclidean),
            Err(SequenceError::TargetNotInClosure { .. })
        ));
    }

    #[test]
    fn coarse_source_is_an_error() {
        // F sits at the resolution limit of a two-point source: the 1/(2k)
        // net keeps only points farther than 1/k from F at some level.
        let a = SampledSet::from_scalars(&[0.0, 0.3], 0.31).unwrap();
        let f = SampledSet::from_scalars(&[0.6], 0.1).unwrap();
        assert!(matches!(
            limit_point_sequence(&a, &f, 4, Metric::Euclidean),
            Err(SequenceError::ResolutionTooCoarse { level: 4 })
        ));
    }

    #[test]
    fn argument_errors() {
        let a = grid(0.0, 1.0, 0.1);
        assert_eq!(
            limit_point_sequence(&a, &a, 0, Metric::Euclidean),
            Err(SequenceError::ZeroDepth)
        );
        let empty = SampledSet::empty(0.1).unwrap();
        assert_eq!(
            limit_point_sequence(&a, &empty, 2, Metric::Euclidean),
            Err(SequenceError::EmptyTarget)
        );
    }
}
