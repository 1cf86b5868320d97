use std::collections::HashSet;

use proptest::prelude::*;

use cluster_forge::limit_sequences::limit_point_sequence;
use cluster_forge::metric::{diameter, dist, dist_to_set, hausdorff, BoundingBox, Metric, Point, PointKey, SampledSet};
use cluster_forge::multifunction::{
    empirical_cluster_set, oscillation, usc_check, DeltaSchedule, FunctionSample, MultifunctionTable, Pair,
};
use cluster_forge::nets::{decompose_separated, greedy_separated_net, harmonic_schedule, min_separation};

const LATTICE: f64 = 1.0 / 64.0;

fn metric() -> impl Strategy<Value = Metric> {
    prop::sample::select(Metric::ALL.to_vec())
}

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, dim)
}

/// Distinct lattice points in `[0, 1]^dim`.
fn cloud(dim: usize, max: usize) -> impl Strategy<Value = SampledSet> {
    prop::collection::vec(prop::collection::vec(0u32..=64, dim), 1..max).prop_map(|raw| {
        let pts = raw
            .into_iter()
            .map(|c| Point::new(c.into_iter().map(|v| v as f64 * LATTICE).collect()).unwrap());
        SampledSet::dedup(pts, LATTICE).unwrap()
    })
}

fn keys(s: &SampledSet) -> HashSet<PointKey> {
    s.key_set()
}

fn lipschitz_sample(xs: &[f64], c: f64) -> FunctionSample {
    FunctionSample::new(
        xs.iter()
            .map(|&x| Pair {
                x: Point::scalar(x),
                y: Point::scalar((c * x).sin()),
                provenance: None,
            })
            .collect(),
    )
    .unwrap()
}

fn random_sample() -> impl Strategy<Value = FunctionSample> {
    prop::collection::vec((0u32..=256, -1.0..1.0f64), 1..120).prop_map(|raw| {
        let mut seen = HashSet::new();
        let pairs = raw
            .into_iter()
            .filter(|(x, _)| seen.insert(*x))
            .map(|(x, y)| Pair {
                x: Point::scalar(x as f64 / 256.0),
                y: Point::scalar(y),
                provenance: None,
            })
            .collect();
        FunctionSample::new(pairs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality(m in metric(), a in coords(3), b in coords(3), c in coords(3)) {
        let (a, b, c) = (Point::new(a).unwrap(), Point::new(b).unwrap(), Point::new(c).unwrap());
        let ab = dist(&a, &b, m).unwrap();
        let bc = dist(&b, &c, m).unwrap();
        let ac = dist(&a, &c, m).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12 * (ab + bc));
        prop_assert_eq!(ab, dist(&b, &a, m).unwrap());
    }

    #[test]
    fn hausdorff_zero_iff_equal(m in metric(), a in cloud(2, 20), b in cloud(2, 20)) {
        let h = hausdorff(&a, &b, m).unwrap();
        prop_assert_eq!(h == 0.0, keys(&a) == keys(&b));
        prop_assert_eq!(hausdorff(&a, &a, m).unwrap(), 0.0);
    }

    #[test]
    fn set_distance_is_a_lower_bound(m in metric(), s in cloud(2, 12), p in coords(2)) {
        let p = Point::new(p).unwrap();
        let d = dist_to_set(&p, &s, m).unwrap();
        for q in s.points() {
            prop_assert!(d <= dist(&p, q, m).unwrap());
        }
    }

    #[test]
    fn diameter_is_monotone(m in metric(), s in cloud(3, 40), cut in 1usize..40) {
        let sub = SampledSet::new(s.points()[..cut.min(s.len())].to_vec(), LATTICE).unwrap();
        prop_assert!(diameter(&sub, m).unwrap() <= diameter(&s, m).unwrap());
    }

    #[test]
    fn nets_are_separated_and_covering(m in metric(), s in cloud(2, 200), eps in 0.02..0.6f64) {
        let net = greedy_separated_net(&s, eps, m).unwrap();
        prop_assert!(min_separation(&net, m) >= eps);
        for p in s.points() {
            prop_assert!(dist_to_set(p, &net, m).unwrap() < eps);
        }
        prop_assert!(keys(&net).is_subset(&keys(&s)));
    }

    #[test]
    fn decomposition_certificate(m in metric(), s in cloud(2, 200)) {
        // Lattice gaps are at least 1/64, so 3/n drops below them by n = 193.
        let schedule = harmonic_schedule(3.0, 200);
        let parts = decompose_separated(&s, &schedule, m).unwrap();
        let mut seen = HashSet::new();
        for (part, eps) in parts.iter().zip(&schedule) {
            prop_assert!(min_separation(part, m) >= *eps);
            for p in part.points() {
                prop_assert!(seen.insert(p.key()));
            }
        }
        prop_assert_eq!(seen, keys(&s));
    }

    #[test]
    fn projection_stays_sigma_discrete(m in metric(), s in cloud(3, 150)) {
        // Layers of a sample of X x Y, projected to X and re-decomposed.
        let schedule = harmonic_schedule(3.0, 200);
        let parts = decompose_separated(&s, &schedule, m).unwrap();
        let projected = parts
            .iter()
            .flat_map(|part| part.points().iter().map(|p| Point::new(p.coords()[..2].to_vec()).unwrap()));
        let projected = SampledSet::dedup(projected, LATTICE).unwrap();
        let again = decompose_separated(&projected, &schedule, m).unwrap();
        let mut seen = HashSet::new();
        for (part, eps) in again.iter().zip(&schedule) {
            prop_assert!(min_separation(part, m) >= *eps);
            for p in part.points() {
                prop_assert!(seen.insert(p.key()));
            }
        }
        prop_assert_eq!(seen, keys(&projected));
    }

    #[test]
    fn limit_sequences_stay_near_target(lo in 0u32..900, len in 0u32..100, depth in 1usize..10) {
        let a: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let a = SampledSet::from_scalars(&a, 1e-3).unwrap();
        let f: Vec<f64> = (lo..=lo + len).map(|i| i as f64 / 1000.0).collect();
        let f = SampledSet::from_scalars(&f, 1e-3).unwrap();
        let seq = limit_point_sequence(&a, &f, depth, Metric::Euclidean).unwrap();
        let members = keys(&a);
        for k in 1..=depth {
            let tail = SampledSet::dedup(seq.tail_from_block(k).to_vec(), 1e-3).unwrap();
            for y in tail.points() {
                prop_assert!(members.contains(&y.key()));
                prop_assert!(dist_to_set(y, &f, Metric::Euclidean).unwrap() <= 1.0 / k as f64);
            }
            prop_assert!(hausdorff(&tail, &f, Metric::Euclidean).unwrap() <= 2.0 / k as f64 + 1e-3);
        }
    }

    #[test]
    fn cluster_sets_nest(f in random_sample(), x in 0.0..1.0f64, d0 in 0.05..0.5f64) {
        let x = Point::scalar(x);
        let schedule = DeltaSchedule::geometric(d0, 6).unwrap();
        let m = Metric::Euclidean;
        // An error means some ball of the schedule missed the domain.
        if let Ok(sets) = empirical_cluster_set(&f, &x, &schedule, m) {
            for w in sets.windows(2) {
                prop_assert!(keys(&w[1]).is_subset(&keys(&w[0])));
            }
            for (set, &delta) in sets.iter().zip(schedule.deltas()) {
                prop_assert_eq!(oscillation(&f, &x, delta, m).unwrap(), diameter(set, m).unwrap());
            }
        }
    }

    #[test]
    fn oscillation_is_monotone(f in random_sample(), x in 0.0..1.0f64, a in 0.01..0.5f64, b in 0.01..0.5f64) {
        let x = Point::scalar(x);
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        if let Ok(o_small) = oscillation(&f, &x, small, Metric::Euclidean) {
            prop_assert!(o_small <= oscillation(&f, &x, large, Metric::Euclidean).unwrap());
        }
    }

    #[test]
    fn shifted_balls_see_fewer_values(f in random_sample(), x in 0.0..1.0f64, shift in -0.1..0.1f64, delta in 0.15..0.5f64) {
        // For d(x, x') < delta', the set at scale delta - delta' around x' is
        // inside the set at scale delta around x.
        let m = Metric::Euclidean;
        let x0 = Point::scalar(x);
        let x1 = Point::scalar(x + shift);
        let d_shift = shift.abs() * (1.0 + 1e-12) + 1e-15;
        let outer = empirical_cluster_set(&f, &x0, &DeltaSchedule::new(vec![delta]).unwrap(), m);
        let inner = empirical_cluster_set(&f, &x1, &DeltaSchedule::new(vec![delta - d_shift]).unwrap(), m);
        if let Ok(inner) = inner {
            let outer = outer.unwrap();
            prop_assert!(keys(&inner[0]).is_subset(&keys(&outer[0])));
        }
    }
}

#[test]
fn lipschitz_cluster_map_is_upper_continuous() {
    let xs: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
    let m = Metric::Euclidean;
    for c in [1.0, 3.0, 10.0] {
        let f = lipschitz_sample(&xs, c);
        for delta in [0.02, 0.05, 0.1] {
            let schedule = DeltaSchedule::new(vec![delta]).unwrap();
            let entries = xs
                .iter()
                .step_by(4)
                .map(|&x| {
                    let x = Point::scalar(x);
                    let set = empirical_cluster_set(&f, &x, &schedule, m).unwrap().remove(0);
                    (x, set)
                })
                .collect();
            let table =
                MultifunctionTable::new(entries, BoundingBox::new(vec![-1.0], vec![1.0]).unwrap(), 1e-3).unwrap();
            // A value seen near x' comes from z within 2 delta of the domain point x.
            let report = usc_check(&table, delta, 2.0 * delta * c + 1e-12, m).unwrap();
            assert!(report.pass, "c={c} delta={delta}: {:?}", report.witness);
        }
    }
}
