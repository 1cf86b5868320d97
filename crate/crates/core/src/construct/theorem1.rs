//! Construction whose cluster sets equal the target.
//!
//! Anchors are drawn from the boundary sample in `3/n`-separated layers
//! `S_1, ..., S_{n_max}`. Every anchor `s` in layer `n` receives points
//! `x_{s,1}, ..., x_{s,k_max}` off the boundary with `d(x_{s,k}, s) < 1/n`,
//! strictly decreasing in `k`, and values `y_{s,k}` within `1/n` of
//! `Phi(s)` taken from a limit-point sequence for `Phi(s)`.
//!
//! Balls `B(s, 1/n)` of one layer are pairwise disjoint, so anchors of a
//! layer are placed concurrently against the points admitted by earlier
//! layers; admission into the registry is serial in anchor order.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ConstructError, Scene, SetOracle, ValueGrid};
use crate::limit_sequences::limit_point_sequence;
use crate::metric::{dist_to_points, BoundingBox, Metric, Point, PointKey, SampledSet};
use crate::multifunction::{usc_check, FunctionSample, Pair, Provenance, Source};
use crate::nets::{decompose_truncated, harmonic_schedule};

/// Where the construction takes its domain points from.
#[derive(Clone, Copy, Debug)]
pub enum Placement<'a> {
    /// Points `s + r_k u` with `r_k = 2^-k / n` in the ambient box.
    Free,
    /// Points of an explicit domain sample, nearest shells first.
    Domain(&'a SampledSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorFamily {
    pub layer: usize,
    pub anchor: Point,
    /// `x_{s,1..k_max}`, distance to the anchor strictly decreasing.
    pub xs: Vec<Point>,
    pub ys: Vec<Point>,
}

#[derive(Clone, Debug)]
pub struct Theorem1Output {
    /// Anchor layers `S_1..S_{n_max}`.
    pub layers: Vec<SampledSet>,
    pub families: Vec<AnchorFamily>,
    /// Boundary sample points left out of every layer.
    pub unanchored: usize,
    pub function: FunctionSample,
}

impl Theorem1Output {
    /// The constructed discrete domain `A`.
    pub fn domain(&self) -> impl Iterator<Item = &Point> {
        self.families.iter().flat_map(|f| f.xs.iter())
    }
}

/// Rejects scenes whose target fails the upper-continuity check or whose
/// boundary has interior at the probe resolution.
pub fn check_preconditions(scene: &Scene) -> Result<(), ConstructError> {
    let usc = usc_check(&scene.phi, scene.usc.delta, scene.usc.epsilon, scene.metric)?;
    if let Some(w) = usc.witness {
        return Err(ConstructError::NotUpperContinuous(w));
    }
    check_nowhere_dense(&scene.x_box, scene.x_resolution, &scene.boundary)
}

/// Every ball `B(p, rho)` around a probe-grid point must contain a point off
/// the boundary. Without an exact shape, "off" means farther than the sample
/// resolution from the sample.
pub fn check_nowhere_dense(x_box: &BoundingBox, rho: f64, boundary: &SetOracle) -> Result<(), ConstructError> {
    let grid = ValueGrid::new(x_box, rho)?;
    let slack = if boundary.shape().is_some() {
        0.0
    } else {
        boundary.sample().resolution()
    };
    let dim = x_box.dim();
    let offending = grid.points().into_par_iter().find_first(|p| {
        let mut probes = vec![p.coords().to_vec()];
        for axis in 0..dim {
            for sign in [1.0, -1.0] {
                let mut q = p.coords().to_vec();
                q[axis] += sign * rho / 2.0;
                probes.push(q);
            }
        }
        probes
            .iter()
            .filter(|q| x_box.contains(q))
            .all(|q| !(boundary.dist(q) > slack))
    });
    match offending {
        Some(p) => Err(ConstructError::NotNowhereDense(p)),
        None => Ok(()),
    }
}

pub fn construct_theorem1(scene: &Scene, placement: Placement<'_>) -> Result<Theorem1Output, ConstructError> {
    check_preconditions(scene)?;
    let m = scene.metric;
    let depths = scene.depths;
    let decomposition = decompose_truncated(scene.boundary.sample(), &harmonic_schedule(3.0, depths.n_max), m)?;
    let grid_points = scene.value_grid.points();
    let directions = free_directions(scene.dimension, m, scene.seed);
    // Early blocks only reach within 1/k of Phi(s); skipping those below
    // n_max keeps every value within 1/n_max of Phi(s). The sequence runs at
    // least that deep.
    let first_block = depths.n_max;
    let value_depth = depths.k_depth.max(depths.n_max);

    let mut registry: HashSet<PointKey> = HashSet::new();
    let mut families = Vec::new();
    for (i, layer) in decomposition.parts.iter().enumerate() {
        let n = i + 1;
        let placed = layer
            .points()
            .par_iter()
            .map(|s| {
                let xs = match placement {
                    Placement::Free => place_free(s, n, depths.k_max, scene, &directions, &registry)?,
                    Placement::Domain(d) => place_in_domain(s, n, depths.k_max, d, &scene.boundary, m, &registry)?,
                };
                let phi_s = scene.phi.value_at(s, m);
                let ys = anchor_values(
                    phi_s,
                    n,
                    value_depth,
                    first_block,
                    &grid_points,
                    &scene.value_grid,
                    depths.k_max,
                    m,
                )?;
                Ok(AnchorFamily {
                    layer: n,
                    anchor: s.clone(),
                    xs,
                    ys,
                })
            })
            .collect::<Result<Vec<_>, ConstructError>>()?;
        for family in placed {
            for x in &family.xs {
                if !registry.insert(x.key()) {
                    return Err(ConstructError::Collision(x.clone()));
                }
            }
            families.push(family);
        }
    }

    let pairs = families
        .iter()
        .flat_map(|fam| {
            fam.xs.iter().zip(&fam.ys).enumerate().map(move |(k, (x, y))| Pair {
                x: x.clone(),
                y: y.clone(),
                provenance: Some(Provenance {
                    source: Source::Thm1,
                    layer: Some(fam.layer),
                    anchor: fam.anchor.clone(),
                    k: Some(k + 1),
                }),
            })
        })
        .collect();
    Ok(Theorem1Output {
        layers: decomposition.parts,
        families,
        unanchored: decomposition.leftover.len(),
        function: FunctionSample::new(pairs)?,
    })
}

/// Unit directions for free placement: the coordinate axes, then (in two or
/// more dimensions) a golden-angle spiral in the first coordinate plane.
fn free_directions(dim: usize, m: Metric, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            let mut u = vec![0.0; dim];
            u[axis] = sign;
            dirs.push(u);
        }
    }
    if dim >= 2 {
        let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let phase = ChaCha8Rng::seed_from_u64(seed).gen::<f64>() * std::f64::consts::TAU;
        for j in 0..16 {
            let angle = phase + j as f64 * golden_angle;
            let mut u = vec![0.0; dim];
            u[0] = angle.cos();
            u[1] = angle.sin();
            let norm = m.norm(&u);
            dirs.push(u.into_iter().map(|c| c / norm).collect());
        }
    }
    dirs
}

/// Free placement at radii `2^-k / n`, choosing the direction that keeps the
/// point farthest from the boundary relative to its radius.
fn place_free(
    s: &Point,
    n: usize,
    k_max: usize,
    scene: &Scene,
    directions: &[Vec<f64>],
    registry: &HashSet<PointKey>,
) -> Result<Vec<Point>, ConstructError> {
    let m = scene.metric;
    let radius = Scene::layer_radius(n);
    let mut xs: Vec<Point> = Vec::with_capacity(k_max);
    let mut last = radius;
    for k in 1..=k_max {
        let rho = radius * 0.5f64.powi(k as i32);
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for u in directions {
            let x: Vec<f64> = s.coords().iter().zip(u).map(|(c, v)| c + rho * v).collect();
            if !scene.x_box.contains(&x) {
                continue;
            }
            let r = scene.boundary.dist(&x);
            if !(r > 0.0) {
                continue;
            }
            let d = m.eval(&x, s.coords());
            if !(d < last) {
                continue;
            }
            let p = Point::from_coords_unchecked(x.clone());
            if registry.contains(&p.key()) || xs.contains(&p) {
                continue;
            }
            let score = r / rho;
            if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                best = Some((score, x, d));
            }
        }
        match best {
            Some((_, x, d)) => {
                last = d;
                xs.push(Point::from_coords_unchecked(x));
            }
            None => {
                return Err(ConstructError::DomainTooSparse {
                    anchor: s.clone(),
                    layer: n,
                    placed: k - 1,
                    wanted: k_max,
                })
            }
        }
    }
    Ok(xs)
}

/// Domain placement: candidates of `B(s, 1/n)` grouped into distance shells;
/// one point per shell (the one farthest from the boundary), the `k_max`
/// nearest shells, ordered by decreasing distance.
fn place_in_domain(
    s: &Point,
    n: usize,
    k_max: usize,
    domain: &SampledSet,
    boundary: &SetOracle,
    m: Metric,
    registry: &HashSet<PointKey>,
) -> Result<Vec<Point>, ConstructError> {
    let radius = Scene::layer_radius(n);
    let mut candidates: Vec<(f64, f64, usize)> = domain
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, x)| {
            let d = m.eval(x.coords(), s.coords());
            if !(d < radius && d > 0.0) || registry.contains(&x.key()) {
                return None;
            }
            let r = boundary.dist(x.coords());
            (r > 0.0).then_some((d, r, i))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));

    let mut shells: Vec<(f64, f64, usize)> = Vec::with_capacity(k_max);
    for c in candidates {
        if shells.len() == k_max {
            break;
        }
        match shells.last_mut() {
            Some(last) if c.0 - last.0 <= 1e-9 * c.0 => {
                // Same shell; keep the point farthest from the boundary.
                if c.1 > last.1 {
                    *last = c;
                }
            }
            _ => shells.push(c),
        }
    }
    if shells.len() < k_max {
        return Err(ConstructError::DomainTooSparse {
            anchor: s.clone(),
            layer: n,
            placed: shells.len(),
            wanted: k_max,
        });
    }
    Ok(shells
        .into_iter()
        .rev()
        .map(|(_, _, i)| domain.points()[i].clone())
        .collect())
}

/// Values `y_{s,1..k_max}`: the limit-point sequence of `Phi(s)` inside
/// `Y n B(Phi(s), 1/n)` from block `first_block` on, each block reordered so
/// every suffix is spread over the block, padded by repeating the last block,
/// and cut to its last `k_max` terms.
#[allow(clippy::too_many_arguments)]
pub(crate) fn anchor_values(
    phi_s: &SampledSet,
    n: usize,
    depth: usize,
    first_block: usize,
    grid_points: &[Point],
    grid: &ValueGrid,
    k_max: usize,
    m: Metric,
) -> Result<Vec<Point>, ConstructError> {
    let radius = Scene::layer_radius(n);
    let near: Vec<Point> = grid_points
        .iter()
        .filter(|y| dist_to_points(y.coords(), phi_s.points(), m) < radius)
        .cloned()
        .collect();
    let source = SampledSet::new(near, grid.covering_radius(m))?;
    let seq = limit_point_sequence(&source, phi_s, depth, m)?;
    let blocks: Vec<Vec<Point>> = (first_block.clamp(1, depth)..=depth)
        .map(|k| spread_suffix_order(seq.block(k), m))
        .collect();
    let last = blocks.last().expect("depth >= 1");
    let mut values: Vec<Point> = blocks.concat();
    while values.len() < k_max {
        values.extend(last.iter().cloned());
    }
    Ok(values.split_off(values.len() - k_max))
}

/// Reverse farthest-point order: the last `w` points are the first `w`
/// farthest-point picks, so every suffix spreads over the block.
fn spread_suffix_order(block: &[Point], m: Metric) -> Vec<Point> {
    if block.is_empty() {
        return Vec::new();
    }
    let mut gap: Vec<f64> = block.iter().map(|p| m.eval(p.coords(), block[0].coords())).collect();
    let mut taken = vec![false; block.len()];
    taken[0] = true;
    let mut order = vec![0usize];
    while order.len() < block.len() {
        let (next, _) = gap.iter().enumerate().filter(|(i, _)| !taken[*i]).fold(
            (usize::MAX, f64::NEG_INFINITY),
            |best, (i, &g)| if g > best.1 { (i, g) } else { best },
        );
        taken[next] = true;
        order.push(next);
        for (g, p) in gap.iter_mut().zip(block) {
            *g = g.min(m.eval(p.coords(), block[next].coords()));
        }
    }
    order.into_iter().rev().map(|i| block[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::ExactShape;
    use crate::metric::hausdorff;

    #[test]
    fn spread_order_suffixes_are_spread() {
        let block: Vec<Point> = (0..=20).map(|i| Point::scalar(i as f64 / 20.0)).collect();
        let ordered = spread_suffix_order(&block, Metric::Euclidean);
        assert_eq!(ordered.len(), block.len());
        let tail = SampledSet::new(ordered[ordered.len() - 3..].to_vec(), 0.1).unwrap();
        let all = SampledSet::new(block, 0.05).unwrap();
        // First three farthest-point picks from 0 are 0, 1, 0.5.
        assert!(hausdorff(&tail, &all, Metric::Euclidean).unwrap() <= 0.25 + 1e-12);
    }

    #[test]
    fn anchor_values_cover_target() {
        let space = BoundingBox::new(vec![0.0], vec![1.0]).unwrap();
        let grid = ValueGrid::new(&space, 0.005).unwrap();
        let pts = grid.points();
        let phi = SampledSet::from_scalars(&(0..=100).map(|i| i as f64 / 100.0).collect::<Vec<_>>(), 0.01).unwrap();
        let ys = anchor_values(&phi, 1, 8, 1, &pts, &grid, 128, Metric::Euclidean).unwrap();
        assert_eq!(ys.len(), 128);
        let tail = SampledSet::dedup(ys[64..].to_vec(), 0.005).unwrap();
        assert!(hausdorff(&tail, &phi, Metric::Euclidean).unwrap() <= 0.5);
        assert!(ys.iter().all(|y| grid.contains(y)));
    }

    #[test]
    fn nowhere_density_rejects_solid_boundary() {
        let x_box = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let sample = SampledSet::new(vec![Point::new(vec![0.0, 0.0]).unwrap()], 1.0).unwrap();
        let solid = SetOracle::exact(
            sample.clone(),
            ExactShape::Box(BoundingBox::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap()),
            Metric::Euclidean,
        );
        assert!(matches!(
            check_nowhere_dense(&x_box, 0.1, &solid),
            Err(ConstructError::NotNowhereDense(_))
        ));
        let segment = SetOracle::exact(
            sample,
            ExactShape::Box(BoundingBox::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap()),
            Metric::Euclidean,
        );
        assert!(check_nowhere_dense(&x_box, 0.1, &segment).is_ok());
    }

    #[test]
    fn free_directions_are_unit() {
        for m in Metric::ALL {
            for u in free_directions(2, m, 9) {
                assert!((m.norm(&u) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(free_directions(1, Metric::Euclidean, 0).len(), 2);
    }
}
