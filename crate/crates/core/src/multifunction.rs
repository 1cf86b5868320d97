//! Target multifunctions, sampled functions and their empirical cluster sets.
//!
//! The cluster set of `f` at `x` is the intersection over neighbourhoods `U`
//! of `x` of the closure of `f(U n dom f)`. At finite resolution the
//! neighbourhood filter is replaced by a decreasing ladder of ball radii and
//! closure is the identity on finite samples; the value set at the smallest
//! radius is the reported estimate.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{
    diameter_points, directed_points, dist_to_points, nearest_index, BoundingBox, GeomError, Metric, Point, SampledSet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("domain does not accumulate at {point} at scale {delta}")]
    NoAccumulation { point: Point, delta: f64 },
    #[error("scale schedule must be positive and strictly decreasing (term {index} = {value})")]
    BadSchedule { index: usize, value: f64 },
    #[error("multifunction has no entries")]
    EmptyTable,
    #[error("value set of key {key} is empty")]
    EmptyValue { key: Point },
    #[error("value {value} of key {key} lies outside the value space")]
    ValueOutsideSpace { key: Point, value: Point },
    #[error("duplicate key {0}")]
    DuplicateKey(Point),
    #[error("duplicate domain point {0}")]
    DuplicateDomainPoint(Point),
    #[error("parameters must be positive: delta={delta}, epsilon={epsilon}")]
    BadParameters { delta: f64, epsilon: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Finite table `key -> value sample` with nearest-key extension between keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultifunctionTable {
    entries: Vec<(Point, SampledSet)>,
    value_space: BoundingBox,
    value_resolution: f64,
}

impl MultifunctionTable {
    pub fn new(
        entries: Vec<(Point, SampledSet)>,
        value_space: BoundingBox,
        value_resolution: f64,
    ) -> Result<Self, ClusterError> {
        if !(value_resolution > 0.0 && value_resolution.is_finite()) {
            return Err(GeomError::BadResolution(value_resolution).into());
        }
        value_space.validate()?;
        if entries.is_empty() {
            return Err(ClusterError::EmptyTable);
        }
        let key_dim = entries[0].0.dim();
        let mut keys = HashSet::new();
        for (key, values) in &entries {
            if key.dim() != key_dim {
                return Err(GeomError::DimensionMismatch {
                    expected: key_dim,
                    got: key.dim(),
                }
                .into());
            }
            if !keys.insert(key.key()) {
                return Err(ClusterError::DuplicateKey(key.clone()));
            }
            if values.is_empty() {
                return Err(ClusterError::EmptyValue { key: key.clone() });
            }
            for v in values.points() {
                if !value_space.contains(v.coords()) {
                    return Err(ClusterError::ValueOutsideSpace {
                        key: key.clone(),
                        value: v.clone(),
                    });
                }
            }
        }
        Ok(Self {
            entries,
            value_space,
            value_resolution,
        })
    }

    pub fn entries(&self) -> &[(Point, SampledSet)] {
        &self.entries
    }

    pub fn value_space(&self) -> &BoundingBox {
        &self.value_space
    }

    pub fn value_resolution(&self) -> f64 {
        self.value_resolution
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Point> {
        self.entries.iter().map(|(k, _)| k)
    }

    /// Keys as a sample of the boundary set.
    pub fn key_set(&self, resolution: f64) -> Result<SampledSet, GeomError> {
        SampledSet::new(self.keys().cloned().collect(), resolution)
    }

    /// Value at the nearest key (first key on ties).
    pub fn value_at(&self, x: &Point, m: Metric) -> &SampledSet {
        let keys: Vec<&Point> = self.keys().collect();
        let mut best = (0usize, f64::INFINITY);
        for (i, k) in keys.iter().enumerate() {
            let d = m.eval(x.coords(), k.coords());
            if d < best.1 {
                best = (i, d);
                if d == 0.0 {
                    break;
                }
            }
        }
        &self.entries[best.0].1
    }

    /// Restriction to the keys for which `keep` holds.
    pub fn restrict(&self, mut keep: impl FnMut(&Point) -> bool) -> Result<Self, ClusterError> {
        let entries = self.entries.iter().filter(|(k, _)| keep(k)).cloned().collect();
        Self::new(entries, self.value_space.clone(), self.value_resolution)
    }
}

/// Which construction produced a domain point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Thm1,
    Lemma1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    /// Layer `n` of the anchor (theorem construction only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    /// Anchor `s` for theorem points, the nearest boundary point `h(x)` for
    /// lemma points.
    pub anchor: Point,
    /// Position `k` along the anchor's sequence (theorem construction only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub x: Point,
    pub y: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Graph of a function on a finite domain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FunctionSample {
    pairs: Vec<Pair>,
}

impl FunctionSample {
    pub fn new(pairs: Vec<Pair>) -> Result<Self, ClusterError> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p.x.key()) {
                return Err(ClusterError::DuplicateDomainPoint(p.x.clone()));
            }
        }
        Ok(Self { pairs })
    }

    /// `f(x) = y` for every `x` in the domain.
    pub fn constant(domain: &SampledSet, y: Point) -> Self {
        Self {
            pairs: domain
                .points()
                .iter()
                .map(|x| Pair {
                    x: x.clone(),
                    y: y.clone(),
                    provenance: None,
                })
                .collect(),
        }
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<Pair> {
        self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Point> {
        self.pairs.iter().map(|p| &p.x)
    }

    /// Concatenation of two functions with disjoint domains.
    pub fn union(mut self, other: FunctionSample) -> Result<Self, ClusterError> {
        self.pairs.extend(other.pairs);
        Self::new(self.pairs)
    }
}

/// Decreasing ladder of ball radii standing in for the neighbourhood filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DeltaSchedule(Vec<f64>);

impl DeltaSchedule {
    pub fn new(deltas: Vec<f64>) -> Result<Self, ClusterError> {
        for (index, &value) in deltas.iter().enumerate() {
            if !(value > 0.0 && value.is_finite() && (index == 0 || value < deltas[index - 1])) {
                return Err(ClusterError::BadSchedule { index, value });
            }
        }
        if deltas.is_empty() {
            return Err(ClusterError::BadSchedule {
                index: 0,
                value: f64::NAN,
            });
        }
        Ok(Self(deltas))
    }

    /// `delta_i = delta_0 * 2^-i` for `i < steps`.
    pub fn geometric(delta_0: f64, steps: usize) -> Result<Self, ClusterError> {
        Self::new((0..steps).map(|i| delta_0 * 0.5f64.powi(i as i32)).collect())
    }

    /// Geometric ladder of `steps` halvings ending exactly at `delta_min`.
    pub fn ending_at(delta_min: f64, steps: usize) -> Result<Self, ClusterError> {
        Self::new(
            (0..steps)
                .map(|i| delta_min * 2f64.powi((steps - 1 - i) as i32))
                .collect(),
        )
    }

    pub fn deltas(&self) -> &[f64] {
        &self.0
    }

    pub fn smallest(&self) -> f64 {
        *self.0.last().expect("nonempty schedule")
    }
}

impl TryFrom<Vec<f64>> for DeltaSchedule {
    type Error = ClusterError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        DeltaSchedule::new(v)
    }
}

impl From<DeltaSchedule> for Vec<f64> {
    fn from(s: DeltaSchedule) -> Self {
        s.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UscWitness {
    /// Key whose value set must absorb the neighbour's values.
    pub key: Point,
    pub neighbor: Point,
    /// Value of `neighbor` outside the open `epsilon`-enlargement of `Phi(key)`.
    pub value: Point,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UscReport {
    pub delta: f64,
    pub epsilon: f64,
    pub pass: bool,
    pub witness: Option<UscWitness>,
}

/// Upper-continuity check at scale `(delta, epsilon)`: for all keys `s, s'`
/// with `d(s, s') < delta`, `Phi(s')` lies in `B(Phi(s), epsilon)`.
pub fn usc_check(phi: &MultifunctionTable, delta: f64, epsilon: f64, m: Metric) -> Result<UscReport, ClusterError> {
    if !(delta > 0.0 && epsilon > 0.0) {
        return Err(ClusterError::BadParameters { delta, epsilon });
    }
    for (s, vs) in phi.entries() {
        for (t, vt) in phi.entries() {
            if m.eval(s.coords(), t.coords()) >= delta {
                continue;
            }
            for v in vt.points() {
                let gap = dist_to_points(v.coords(), vs.points(), m);
                if gap >= epsilon {
                    return Ok(UscReport {
                        delta,
                        epsilon,
                        pass: false,
                        witness: Some(UscWitness {
                            key: s.clone(),
                            neighbor: t.clone(),
                            value: v.clone(),
                            gap,
                        }),
                    });
                }
            }
        }
    }
    Ok(UscReport {
        delta,
        epsilon,
        pass: true,
        witness: None,
    })
}

/// Upper-continuity modulus `omega(delta)`: the largest directed gap
/// `sup_{v in Phi(s')} d(v, Phi(s))` over key pairs closer than `delta`.
/// `usc_check(delta, eps)` passes exactly when `omega(delta) < eps`.
pub fn usc_modulus(phi: &MultifunctionTable, delta: f64, m: Metric) -> f64 {
    let entries = phi.entries();
    let mut worst = 0.0f64;
    for (s, vs) in entries {
        for (t, vt) in entries {
            if m.eval(s.coords(), t.coords()) < delta {
                worst = worst.max(directed_points(vt.points(), vs.points(), m));
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub modulus: f64,
}

pub fn usc_modulus_ladder(phi: &MultifunctionTable, schedule: &DeltaSchedule, m: Metric) -> Vec<ModulusRow> {
    schedule
        .deltas()
        .iter()
        .map(|&delta| ModulusRow {
            delta,
            modulus: usc_modulus(phi, delta, m),
        })
        .collect()
}

/// Value sets `{f(z) : d(z, x) < delta_i}` for every radius of the schedule,
/// deduplicated in domain order. Entries are nested decreasing.
pub fn empirical_cluster_set(
    f: &FunctionSample,
    x: &Point,
    schedule: &DeltaSchedule,
    m: Metric,
) -> Result<Vec<SampledSet>, ClusterError> {
    let pairs = f.pairs();
    if let Some(first) = pairs.first() {
        if first.x.dim() != x.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: first.x.dim(),
                got: x.dim(),
            }
            .into());
        }
    }
    let dists: Vec<f64> = pairs.iter().map(|p| m.eval(p.x.coords(), x.coords())).collect();
    schedule
        .deltas()
        .iter()
        .map(|&delta| {
            let values = pairs
                .iter()
                .zip(&dists)
                .filter(|(_, &d)| d < delta)
                .map(|(p, _)| p.y.clone());
            let set = SampledSet::dedup(values, delta)?;
            if set.is_empty() {
                Err(ClusterError::NoAccumulation {
                    point: x.clone(),
                    delta,
                })
            } else {
                Ok(set)
            }
        })
        .collect()
}

/// Diameter of the value set over `B(x, delta)`.
pub fn oscillation(f: &FunctionSample, x: &Point, delta: f64, m: Metric) -> Result<f64, ClusterError> {
    let schedule = DeltaSchedule::new(vec![delta])?;
    let sets = empirical_cluster_set(f, x, &schedule, m)?;
    Ok(diameter_points(sets[0].points(), m))
}

/// Nearest key to `x` together with its distance.
pub fn nearest_key<'a>(phi: &'a MultifunctionTable, x: &Point, m: Metric) -> (&'a Point, f64) {
    let keys: Vec<Point> = phi.keys().cloned().collect();
    let (i, d) = nearest_index(x.coords(), &keys, m).expect("nonempty table");
    (&phi.entries()[i].0, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::hausdorff;

    fn pt(x: f64) -> Point {
        Point::scalar(x)
    }

    fn unit() -> BoundingBox {
        BoundingBox::new(vec![0.0], vec![1.0]).unwrap()
    }

    fn table(entries: Vec<(f64, Vec<f64>)>) -> MultifunctionTable {
        MultifunctionTable::new(
            entries
                .into_iter()
                .map(|(k, vs)| (pt(k), SampledSet::from_scalars(&vs, 0.01).unwrap()))
                .collect(),
            unit(),
            0.01,
        )
        .unwrap()
    }

    fn keys_line() -> Vec<f64> {
        (0..=100).map(|i| i as f64 / 100.0).collect()
    }

    fn sample_fn(xs: &[f64], f: impl Fn(f64) -> f64) -> FunctionSample {
        FunctionSample::new(
            xs.iter()
                .map(|&x| Pair {
                    x: pt(x),
                    y: pt(f(x)),
                    provenance: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn table_invariants() {
        let bad_value = MultifunctionTable::new(
            vec![(pt(0.0), SampledSet::from_scalars(&[2.0], 0.1).unwrap())],
            unit(),
            0.1,
        );
        assert!(matches!(bad_value, Err(ClusterError::ValueOutsideSpace { .. })));
        let empty_value = MultifunctionTable::new(vec![(pt(0.0), SampledSet::empty(0.1).unwrap())], unit(), 0.1);
        assert!(matches!(empty_value, Err(ClusterError::EmptyValue { .. })));
        let dup = MultifunctionTable::new(
            vec![
                (pt(0.0), SampledSet::from_scalars(&[0.5], 0.1).unwrap()),
                (pt(0.0), SampledSet::from_scalars(&[0.5], 0.1).unwrap()),
            ],
            unit(),
            0.1,
        );
        assert!(matches!(dup, Err(ClusterError::DuplicateKey(_))));
    }

    #[test]
    fn usc_constant_passes() {
        let phi = table(keys_line().into_iter().map(|k| (k, vec![0.2, 0.7])).collect());
        for (delta, eps) in [(0.01, 0.01), (0.5, 0.001), (10.0, 1e-9)] {
            assert!(usc_check(&phi, delta, eps, Metric::Euclidean).unwrap().pass);
        }
    }

    #[test]
    fn usc_identity_passes() {
        let phi = table(keys_line().into_iter().map(|k| (k, vec![k])).collect());
        // Brute force: key pairs closer than 0.1 have value gap below 0.1.
        let mut worst: f64 = 0.0;
        for a in keys_line() {
            for b in keys_line() {
                if (a - b).abs() < 0.1 {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        assert!(worst < 0.2);
        assert!(usc_check(&phi, 0.1, 0.2, Metric::Euclidean).unwrap().pass);
        assert_eq!(usc_modulus(&phi, 0.1, Metric::Euclidean), worst);
    }

    #[test]
    fn usc_jump_fails_with_straddling_witness() {
        let phi = table(
            keys_line()
                .into_iter()
                .map(|k| (k, if k < 0.5 { vec![0.0] } else { vec![1.0] }))
                .collect(),
        );
        let report = usc_check(&phi, 0.1, 0.5, Metric::Euclidean).unwrap();
        assert!(!report.pass);
        let w = report.witness.unwrap();
        let (a, b) = (w.key.coords()[0], w.neighbor.coords()[0]);
        assert!(a.min(b) < 0.5 && a.max(b) >= 0.5, "{a} {b}");
        assert!((a - b).abs() < 0.1);
        assert_eq!(w.gap, 1.0);
    }

    #[test]
    fn modulus_agrees_with_check() {
        let phi = table(keys_line().into_iter().skip(1).map(|k| (k, vec![0.0, k * k])).collect());
        for delta in [0.02, 0.1, 0.3] {
            let w = usc_modulus(&phi, delta, Metric::Euclidean);
            assert!(!usc_check(&phi, delta, w, Metric::Euclidean).unwrap().pass || w == 0.0);
            assert!(usc_check(&phi, delta, w + 1e-12, Metric::Euclidean).unwrap().pass);
        }
    }

    #[test]
    fn empirical_constant() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        let f = sample_fn(&xs, |_| 0.3);
        let sched = DeltaSchedule::new(vec![0.5, 0.1, 0.01]).unwrap();
        for set in empirical_cluster_set(&f, &pt(0.0), &sched, Metric::Euclidean).unwrap() {
            assert_eq!(set.points(), &[pt(0.3)]);
        }
        assert_eq!(oscillation(&f, &pt(0.0), 0.1, Metric::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn empirical_sin_inverse() {
        let xs: Vec<f64> = (1..=10_000).map(|i| i as f64 * 1e-4).collect();
        let f = sample_fn(&xs, |z| (1.0 / z).sin());
        let sched = DeltaSchedule::new(vec![0.1, 0.01, 0.001]).unwrap();
        let sets = empirical_cluster_set(&f, &pt(0.0), &sched, Metric::Euclidean).unwrap();
        let target =
            SampledSet::from_scalars(&(0..=2000).map(|i| -1.0 + i as f64 / 1000.0).collect::<Vec<_>>(), 0.001).unwrap();
        // Only 99 and 9 grid points fall in the two smaller balls, so the
        // value sets thin out there.
        let h: Vec<f64> = sets
            .iter()
            .map(|s| hausdorff(s, &target, Metric::Euclidean).unwrap())
            .collect();
        assert!(h[0] <= 0.02, "{h:?}");
        assert!(h[1] <= 0.08, "{h:?}");
        assert!(h[2] <= 0.5, "{h:?}");
        let osc = oscillation(&f, &pt(0.0), 0.01, Metric::Euclidean).unwrap();
        assert!((osc - 2.0).abs() <= 0.05, "{osc}");
    }

    #[test]
    fn empirical_identity_near_zero() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        let f = sample_fn(&xs, |z| z);
        let sched = DeltaSchedule::new(vec![0.1]).unwrap();
        let set = &empirical_cluster_set(&f, &pt(0.0), &sched, Metric::Euclidean).unwrap()[0];
        assert!(set.points().iter().all(|v| v.coords()[0] > 0.0 && v.coords()[0] < 0.1));
        let zero = SampledSet::from_scalars(&[0.0], 0.1).unwrap();
        assert!(hausdorff(set, &zero, Metric::Euclidean).unwrap() < 0.1);
        assert!(oscillation(&f, &pt(0.0), 0.1, Metric::Euclidean).unwrap() < 0.1);
    }

    #[test]
    fn empirical_reports_missing_accumulation() {
        let f = sample_fn(&[0.5, 0.6], |z| z);
        let sched = DeltaSchedule::new(vec![1.0, 0.1]).unwrap();
        let err = empirical_cluster_set(&f, &pt(0.0), &sched, Metric::Euclidean).unwrap_err();
        assert_eq!(
            err,
            ClusterError::NoAccumulation {
                point: pt(0.0),
                delta: 0.1
            }
        );
    }

    #[test]
    fn schedule_validation() {
        assert!(DeltaSchedule::new(vec![0.1, 0.2]).is_err());
        assert!(DeltaSchedule::new(vec![]).is_err());
        let s = DeltaSchedule::ending_at(0.01, 8).unwrap();
        assert_eq!(s.smallest(), 0.01);
        assert_eq!(s.deltas()[0], 1.28);
        assert_eq!(DeltaSchedule::geometric(0.2, 3).unwrap().deltas(), &[0.2, 0.1, 0.05]);
    }

    #[test]
    fn function_sample_rejects_duplicate_domain() {
        let dup = FunctionSample::new(vec![
            Pair {
                x: pt(0.1),
                y: pt(0.0),
                provenance: None,
            },
            Pair {
                x: pt(0.1),
                y: pt(1.0),
                provenance: None,
            },
        ]);
        assert!(matches!(dup, Err(ClusterError::DuplicateDomainPoint(_))));
    }

    #[test]
    fn nearest_key_extension() {
        let phi = table(vec![(0.0, vec![0.0]), (1.0, vec![1.0])]);
        assert_eq!(phi.value_at(&pt(0.4), Metric::Euclidean).points(), &[pt(0.0)]);
        assert_eq!(phi.value_at(&pt(0.6), Metric::Euclidean).points(), &[pt(1.0)]);
        assert_eq!(nearest_key(&phi, &pt(0.9), Metric::Euclidean).0, &pt(1.0));
    }
}
