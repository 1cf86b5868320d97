//! Construction whose cluster sets are contained in the target.
//!
//! For `x` in `D` put `r(x) = d(x, L)`, pick a boundary sample point `h(x)`
//! with `d(x, h(x)) < 2 r(x)` and a grid value within `r(x)` of
//! `Phi(h(x))`. Approaching `a` in `L`, both `r(x)` and `d(a, h(x))` shrink,
//! so values are squeezed into enlargements of `Phi(a)`.
//!
//! Which point of `Phi(h(x))` a value aims at is free; [`ValueSelector`]
//! strategies make that choice and are registered by name.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ConstructError, SetOracle, ValueGrid};
use crate::metric::{dist_to_points, nearest_index, Metric, Point, SampledSet};
use crate::multifunction::{FunctionSample, MultifunctionTable, Pair, Provenance, Source};

/// Chooses which point of `Phi(h(x))` the value of the `ordinal`-th domain
/// point aims at.
pub trait ValueSelector: Send + Sync {
    fn name(&self) -> &'static str;

    fn target(&self, ordinal: usize, targets: &[Point]) -> usize;
}

/// Kronecker sequence `frac(offset + i / golden)`: consecutive domain points
/// spread their values over the whole target set.
#[derive(Clone, Debug)]
pub struct GoldenSpread {
    offset: f64,
}

impl GoldenSpread {
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            offset: rng.gen::<f64>(),
        }
    }
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;

impl ValueSelector for GoldenSpread {
    fn name(&self) -> &'static str {
        "golden"
    }

    fn target(&self, ordinal: usize, targets: &[Point]) -> usize {
        let t = (self.offset + ordinal as f64 * INV_GOLDEN).fract();
        ((t * targets.len() as f64) as usize).min(targets.len() - 1)
    }
}

/// Always the target point nearest the centroid of the target set: a
/// singleton-valued selection.
#[derive(Clone, Copy, Debug, Default)]
pub struct CenterPoint;

impl ValueSelector for CenterPoint {
    fn name(&self) -> &'static str {
        "center"
    }

    fn target(&self, _ordinal: usize, targets: &[Point]) -> usize {
        let d = targets[0].dim();
        let mut centroid = vec![0.0; d];
        for t in targets {
            for (c, v) in centroid.iter_mut().zip(t.coords()) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= targets.len() as f64;
        }
        nearest_index(&centroid, targets, Metric::Euclidean)
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

pub const SELECTOR_NAMES: [&str; 2] = ["golden", "center"];

pub fn selector_by_name(name: &str, seed: u64) -> Result<Box<dyn ValueSelector>, ConstructError> {
    match name {
        "golden" => Ok(Box::new(GoldenSpread::seeded(seed))),
        "center" => Ok(Box::new(CenterPoint)),
        other => Err(ConstructError::UnknownSelector(other.to_string())),
    }
}

/// Lemma construction on `domain` against `boundary` and `phi`.
pub fn construct_lemma1(
    domain: &SampledSet,
    boundary: &SetOracle,
    phi: &MultifunctionTable,
    grid: &ValueGrid,
    selector: &dyn ValueSelector,
    m: Metric,
) -> Result<FunctionSample, ConstructError> {
    let anchors = boundary.sample().points();
    let pairs = domain
        .points()
        .par_iter()
        .enumerate()
        .map(|(ordinal, x)| {
            let r = boundary.dist(x.coords());
            if !(r > 0.0) {
                return Err(ConstructError::BoundaryContact(x.clone()));
            }
            let (h, gap) = nearest_index(x.coords(), anchors, m).expect("nonempty boundary sample");
            if !(gap < 2.0 * r) {
                return Err(ConstructError::BoundaryTooCoarse { x: x.clone(), r, gap });
            }
            let h = &anchors[h];
            let targets = phi.value_at(h, m).points();
            let y = pick_value(ordinal, targets, r, grid, selector, m).map_err(|gap| {
                ConstructError::ValueGridTooCoarse {
                    x: x.clone(),
                    r,
                    gap,
                    required_step: 2.0 * r / m.norm(&vec![1.0; grid.dim()]),
                }
            })?;
            Ok(Pair {
                x: x.clone(),
                y,
                provenance: Some(Provenance {
                    source: Source::Lemma1,
                    layer: None,
                    anchor: h.clone(),
                    k: None,
                }),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FunctionSample::new(pairs)?)
}

/// Grid value within `r` of `targets`, or the smallest gap achievable.
fn pick_value(
    ordinal: usize,
    targets: &[Point],
    r: f64,
    grid: &ValueGrid,
    selector: &dyn ValueSelector,
    m: Metric,
) -> Result<Point, f64> {
    let aim = &targets[selector.target(ordinal, targets)];
    let y = grid.nearest(aim.coords());
    let gap = dist_to_points(y.coords(), targets, m);
    if gap < r {
        return Ok(y);
    }
    // Off-grid target: fall back to the target point best served by the grid.
    let (y, gap) = targets
        .iter()
        .map(|t| {
            let y = grid.nearest(t.coords());
            let gap = dist_to_points(y.coords(), targets, m);
            (y, gap)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty value set");
    if gap < r {
        Ok(y)
    } else {
        Err(gap)
    }
}
