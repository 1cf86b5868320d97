//! Separated nets and layered (sigma-discrete) decompositions of samples.
//!
//! A set is `eps`-separated when distinct points are at distance `>= eps`
//! and an `eps`-net of a sample when every sample point lies at distance
//! `< eps` from it. Greedy insertion in sample order yields a maximal
//! separated subset, and maximality is what makes it a net.

use thiserror::Error;

use crate::metric::{GeomError, Metric, Point, SampledSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("separation schedule must be positive and strictly decreasing (term {index} = {value})")]
    BadSchedule { index: usize, value: f64 },
    #[error("insufficient depth: {} point(s) left unassigned after {layers} layer(s), first {}", leftover.len(), leftover[0])]
    InsufficientDepth { layers: usize, leftover: Vec<Point> },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

fn check_scale(eps: f64) -> Result<(), NetError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(NetError::BadScale(eps))
    }
}

/// Indices of a maximal `eps`-separated subset of `pts`, scanning in order.
pub(crate) fn greedy_indices(pts: &[Point], eps: f64, m: Metric) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let far = kept.iter().all(|&j| m.eval(p.coords(), pts[j].coords()) >= eps);
        if far {
            kept.push(i);
        }
    }
    kept
}

/// Greedy `eps`-separated `eps`-net of `s` in input order.
pub fn greedy_separated_net(s: &SampledSet, eps: f64, m: Metric) -> Result<SampledSet, NetError> {
    check_scale(eps)?;
    let pts = s.points();
    let points = greedy_indices(pts, eps, m)
        .into_iter()
        .map(|i| pts[i].clone())
        .collect();
    Ok(SampledSet::new(points, s.resolution())?)
}

/// `(A_1, ..., A_depth)` with `A_n` a `1/n`-separated `1/n`-net of `s`.
pub fn sigma_discrete_dense(s: &SampledSet, depth: usize, m: Metric) -> Result<Vec<SampledSet>, NetError> {
    if depth == 0 {
        return Err(NetError::ZeroDepth);
    }
    (1..=depth)
        .map(|n| greedy_separated_net(s, 1.0 / n as f64, m))
        .collect()
}

/// Result of a layered decomposition that may stop before covering the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Part `n` (0-based) is `eps_schedule[n]`-separated.
    pub parts: Vec<SampledSet>,
    /// Input points no part absorbed, in input order.
    pub leftover: Vec<Point>,
}

/// Layered decomposition truncated at the schedule length.
///
/// Layer `k` is a maximal `eps_k`-separated subset of the points not yet
/// assigned. Since every earlier layer has been removed before the scan,
/// `S_k = B_k \ (B_1 u ... u B_{k-1}) = B_k`.
pub fn decompose_truncated(s: &SampledSet, eps_schedule: &[f64], m: Metric) -> Result<Decomposition, NetError> {
    check_schedule(eps_schedule)?;
    let mut remaining: Vec<Point> = s.points().to_vec();
    let mut parts = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let keep = greedy_indices(&remaining, eps, m);
        let mut take = vec![false; remaining.len()];
        for &i in &keep {
            take[i] = true;
        }
        let mut layer = Vec::with_capacity(keep.len());
        let mut rest = Vec::with_capacity(remaining.len() - keep.len());
        for (p, t) in remaining.into_iter().zip(take) {
            if t {
                layer.push(p);
            } else {
                rest.push(p);
            }
        }
        parts.push(SampledSet::new(layer, s.resolution())?);
        remaining = rest;
    }
    Ok(Decomposition {
        parts,
        leftover: remaining,
    })
}

/// Disjoint decomposition `S = S_1 u ... u S_N` with `S_n` `eps_n`-separated.
pub fn decompose_separated(s: &SampledSet, eps_schedule: &[f64], m: Metric) -> Result<Vec<SampledSet>, NetError> {
    let d = decompose_truncated(s, eps_schedule, m)?;
    if d.leftover.is_empty() {
        Ok(d.parts)
    } else {
        Err(NetError::InsufficientDepth {
            layers: eps_schedule.len(),
            leftover: d.leftover,
        })
    }
}

fn check_schedule(eps: &[f64]) -> Result<(), NetError> {
    for (index, &value) in eps.iter().enumerate() {
        let ok = value > 0.0 && value.is_finite() && (index == 0 || value < eps[index - 1]);
        if !ok {
            return Err(NetError::BadSchedule { index, value });
        }
    }
    Ok(())
}

/// `eps_n = c / n` for `n = 1..=len`.
pub fn harmonic_schedule(c: f64, len: usize) -> Vec<f64> {
    (1..=len).map(|n| c / n as f64).collect()
}

/// Minimum pairwise distance, `+inf` for fewer than two points.
pub fn min_separation(s: &SampledSet, m: Metric) -> f64 {
    let pts = s.points();
    let mut best = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            best = best.min(m.eval(p.coords(), q.coords()));
        }
    }
    best
}
