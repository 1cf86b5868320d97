//! End-to-end checks of constructed functions, and a finite oracle for the
//! intersection-of-unions inclusion over directed families.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{directed_points, Metric, Point, SampledSet};
use crate::multifunction::{empirical_cluster_set, ClusterError, DeltaSchedule, FunctionSample, MultifunctionTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Hausdorff distance between the empirical cluster set and `Phi(a)`.
    Equality,
    /// Directed distance from the empirical cluster set into `Phi(a)`.
    Containment,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Equality => "equality",
            Mode::Containment => "containment",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equality" => Ok(Mode::Equality),
            "containment" => Ok(Mode::Containment),
            other => Err(format!("unknown mode `{other}` (expected equality or containment)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToleranceTerm {
    pub name: String,
    pub value: f64,
}

/// Tolerance with its approximation sources spelled out.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToleranceBreakdown {
    pub formula: String,
    pub terms: Vec<ToleranceTerm>,
    pub total: f64,
}

impl ToleranceBreakdown {
    fn from_terms(formula: &str, terms: Vec<(&str, f64)>) -> Self {
        let total = terms.iter().map(|(_, v)| v).sum();
        Self {
            formula: formula.to_string(),
            terms: terms
                .into_iter()
                .map(|(name, value)| ToleranceTerm {
                    name: name.to_string(),
                    value,
                })
                .collect(),
            total,
        }
    }

    /// `2/n_max + 2 value_resolution + delta_min`.
    pub fn theorem(n_max: usize, value_resolution: f64, delta_min: f64) -> Self {
        Self::from_terms(
            "2/n_max + 2*value_resolution + delta_min",
            vec![
                ("2/n_max", 2.0 / n_max as f64),
                ("2*value_resolution", 2.0 * value_resolution),
                ("delta_min", delta_min),
            ],
        )
    }

    /// `2 delta_min + 2 value_resolution`.
    pub fn lemma(value_resolution: f64, delta_min: f64) -> Self {
        Self::from_terms(
            "2*delta_min + 2*value_resolution",
            vec![
                ("2*delta_min", 2.0 * delta_min),
                ("2*value_resolution", 2.0 * value_resolution),
            ],
        )
    }

    pub fn fixed(tol: f64) -> Self {
        Self::from_terms("fixed", vec![("fixed", tol)])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub probe: Point,
    /// Distance to `Phi(probe)` at every radius of the schedule, largest first.
    pub distance_per_delta: Vec<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ProbeResult {
    /// Distance at the smallest radius.
    pub fn final_distance(&self) -> Option<f64> {
        if self.error.is_some() {
            None
        } else {
            self.distance_per_delta.last().copied()
        }
    }

    /// Whether the last `steps` distances are nonincreasing.
    pub fn trend_nonincreasing(&self, steps: usize) -> bool {
        let d = &self.distance_per_delta;
        let start = d.len().saturating_sub(steps);
        d[start..].windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstProbe {
    pub index: usize,
    pub probe: Point,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub mode: Mode,
    pub deltas: Vec<f64>,
    pub tolerance: f64,
    pub per_probe: Vec<ProbeResult>,
    pub worst: Option<WorstProbe>,
    pub pass: bool,
}

/// Compares empirical cluster sets of `f` with `Phi` at every probe. A probe
/// passes when its distance at the smallest radius is at most `tol`; probes
/// where `dom f` does not accumulate are reported as failing entries.
pub fn verify_cluster_match(
    f: &FunctionSample,
    phi: &MultifunctionTable,
    probes: &SampledSet,
    schedule: &DeltaSchedule,
    tol: f64,
    mode: Mode,
    m: Metric,
) -> VerifyReport {
    let per_probe: Vec<ProbeResult> = probes
        .points()
        .par_iter()
        .map(|a| probe_distances(f, phi, a, schedule, tol, mode, m))
        .collect();
    let worst = per_probe
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.final_distance().map(|d| (i, d)))
        .fold(None::<(usize, f64)>, |best, (i, d)| match best {
            Some((_, b)) if b >= d => best,
            _ => Some((i, d)),
        })
        .map(|(index, distance)| WorstProbe {
            index,
            probe: per_probe[index].probe.clone(),
            distance,
        });
    let pass = !per_probe.is_empty() && per_probe.iter().all(|r| r.pass);
    VerifyReport {
        mode,
        deltas: schedule.deltas().to_vec(),
        tolerance: tol,
        per_probe,
        worst,
        pass,
    }
}

fn probe_distances(
    f: &FunctionSample,
    phi: &MultifunctionTable,
    a: &Point,
    schedule: &DeltaSchedule,
    tol: f64,
    mode: Mode,
    m: Metric,
) -> ProbeResult {
    let target = phi.value_at(a, m).points();
    match empirical_cluster_set(f, a, schedule, m) {
        Ok(sets) => {
            let distances: Vec<f64> = sets
                .iter()
                .map(|e| {
                    let forward = directed_points(e.points(), target, m);
                    match mode {
                        Mode::Containment => forward,
                        Mode::Equality => forward.max(directed_points(target, e.points(), m)),
                    }
                })
                .collect();
            let pass = distances.last().is_some_and(|&d| d <= tol);
            ProbeResult {
                probe: a.clone(),
                distance_per_delta: distances,
                pass,
                error: None,
            }
        }
        Err(e) => ProbeResult {
            probe: a.clone(),
            distance_per_delta: Vec::new(),
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

/// `count` keys spread evenly over the key list (all keys when `count` is
/// `None` or at least the number of keys).
pub fn probe_subsample(
    phi: &MultifunctionTable,
    count: Option<usize>,
    resolution: f64,
) -> Result<SampledSet, ClusterError> {
    let keys: Vec<Point> = phi.keys().cloned().collect();
    let picked = match count {
        Some(c) if c < keys.len() => {
            let c = c.max(1);
            if c == 1 {
                vec![keys[keys.len() / 2].clone()]
            } else {
                (0..c).map(|i| keys[i * (keys.len() - 1) / (c - 1)].clone()).collect()
            }
        }
        _ => keys,
    };
    Ok(SampledSet::new(picked, resolution)?)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Lemma2Error {
    #[error("order relation must be a nonempty square matrix")]
    Malformed,
    #[error("order relation is not reflexive at {0}")]
    NotReflexive(usize),
    #[error("order relation is not transitive: {0} <= {1} <= {2}")]
    NotTransitive(usize, usize, usize),
    #[error("order is not directed: {0} and {1} have no common upper bound")]
    NotDirected(usize, usize),
    #[error("family {family} has {len} members, the order has {expected} elements")]
    FamilyLength { family: char, len: usize, expected: usize },
    #[error("family {family} is not decreasing: {lo} <= {hi} but member {hi} is not inside member {lo}")]
    NotDecreasing { family: char, lo: usize, hi: usize },
}

/// Finite preorder given by its relation matrix `leq[i][j]` meaning `i <= j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteOrder {
    leq: Vec<Vec<bool>>,
    directed: Result<(), (usize, usize)>,
}

impl FiniteOrder {
    pub fn new(leq: Vec<Vec<bool>>) -> Result<Self, Lemma2Error> {
        let n = leq.len();
        if n == 0 || leq.iter().any(|row| row.len() != n) {
            return Err(Lemma2Error::Malformed);
        }
        if let Some(i) = (0..n).find(|&i| !leq[i][i]) {
            return Err(Lemma2Error::NotReflexive(i));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if leq[i][j] && leq[j][k] && !leq[i][k] {
                        return Err(Lemma2Error::NotTransitive(i, j, k));
                    }
                }
            }
        }
        let mut directed = Ok(());
        'outer: for i in 0..n {
            for j in i + 1..n {
                if !(0..n).any(|k| leq[i][k] && leq[j][k]) {
                    directed = Err((i, j));
                    break 'outer;
                }
            }
        }
        Ok(Self { leq, directed })
    }

    /// Chain `0 <= 1 <= ... <= n-1`.
    pub fn chain(n: usize) -> Result<Self, Lemma2Error> {
        Self::new((0..n).map(|i| (0..n).map(|j| i <= j).collect()).collect())
    }

    pub fn len(&self) -> usize {
        self.leq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leq.is_empty()
    }

    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.leq[i][j]
    }

    pub fn is_directed(&self) -> bool {
        self.directed.is_ok()
    }

    /// Down-closed subsets of the order as bitmasks.
    pub fn downsets(&self) -> Vec<u32> {
        let n = self.len();
        (0u32..1 << n)
            .filter(|&s| (0..n).all(|j| s & (1 << j) == 0 || (0..n).all(|i| !self.leq[i][j] || s & (1 << i) != 0)))
            .collect()
    }
}

fn check_decreasing(order: &FiniteOrder, family: &[u64], name: char) -> Result<(), Lemma2Error> {
    if family.len() != order.len() {
        return Err(Lemma2Error::FamilyLength {
            family: name,
            len: family.len(),
            expected: order.len(),
        });
    }
    for lo in 0..order.len() {
        for hi in 0..order.len() {
            if order.leq[lo][hi] && family[hi] & !family[lo] != 0 {
                return Err(Lemma2Error::NotDecreasing { family: name, lo, hi });
            }
        }
    }
    Ok(())
}

/// Whether `n_m (A_m u B_m)` is inside `(n_m A_m) u (n_m B_m)`, checked
/// element by element. Sets are bitmasks over a universe of at most 64
/// elements; `a[m]`, `b[m]` are the members at order element `m`.
pub fn lemma2_oracle(order: &FiniteOrder, a: &[u64], b: &[u64]) -> Result<bool, Lemma2Error> {
    if let Err((i, j)) = order.directed {
        return Err(Lemma2Error::NotDirected(i, j));
    }
    check_decreasing(order, a, 'A')?;
    check_decreasing(order, b, 'B')?;
    Ok(inclusion_holds(a, b))
}

/// Element-wise inclusion test behind [`lemma2_oracle`], without the
/// hypothesis checks.
fn inclusion_holds(a: &[u64], b: &[u64]) -> bool {
    let all_a = a.iter().fold(!0u64, |acc, x| acc & x);
    let all_b = b.iter().fold(!0u64, |acc, y| acc & y);
    let all_unions = a.iter().zip(b).fold(!0u64, |acc, (x, y)| acc & (x | y));
    all_unions & !(all_a | all_b) == 0
}

/// Directed partial orders on `n` elements, one per isomorphism class.
pub fn directed_posets(n: usize) -> Vec<FiniteOrder> {
    assert!((1..=5).contains(&n), "order size out of range");
    let off: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let perms = permutations(n);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for bits in 0u64..1 << off.len() {
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (b, &(i, j)) in off.iter().enumerate() {
            if bits & (1 << b) != 0 {
                leq[i][j] = true;
            }
        }
        if (0..n).any(|i| (0..n).any(|j| i != j && leq[i][j] && leq[j][i])) {
            continue;
        }
        let Ok(order) = FiniteOrder::new(leq) else { continue };
        if !order.is_directed() {
            continue;
        }
        let canon = perms
            .iter()
            .map(|p| {
                off.iter()
                    .enumerate()
                    .filter(|(_, &(i, j))| order.leq[p[i]][p[j]])
                    .fold(0u64, |acc, (b, _)| acc | 1 << b)
            })
            .min()
            .expect("at least one permutation");
        if seen.insert(canon) {
            out.push(order);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Lemma2Sweep {
    pub orders: usize,
    pub instances: u64,
    pub failures: u64,
}

/// Every directed order of size at most `max_order` (up to isomorphism) and
/// every pair of decreasing families over a universe of `universe` elements
/// (up to relabelling the universe).
///
/// A decreasing family is fixed by the down-set `{m : u in A_m}` of each
/// element `u`, so family pairs over a universe are multisets of down-set
/// pairs; an element with two empty down-sets stands for a smaller universe.
pub fn lemma2_sweep(max_order: usize, universe: usize) -> Lemma2Sweep {
    assert!(universe <= 64);
    let mut total = Lemma2Sweep {
        orders: 0,
        instances: 0,
        failures: 0,
    };
    for n in 1..=max_order {
        for order in directed_posets(n) {
            // Families assembled from down-sets are decreasing by construction.
            let downs = order.downsets();
            let pairs: Vec<(u32, u32)> = downs.iter().flat_map(|&d| downs.iter().map(move |&e| (d, e))).collect();
            // Bits contributed to A_m and B_m by one universe element holding a pair.
            let masks: Vec<([u64; 5], [u64; 5])> = pairs
                .iter()
                .map(|&(d, e)| {
                    let mut ma = [0u64; 5];
                    let mut mb = [0u64; 5];
                    for mm in 0..n {
                        ma[mm] = u64::from(d >> mm & 1);
                        mb[mm] = u64::from(e >> mm & 1);
                    }
                    (ma, mb)
                })
                .collect();
            let (instances, failures) = (0..pairs.len())
                .into_par_iter()
                .map(|first| {
                    let mut counts = (0u64, 0u64);
                    if universe == 0 {
                        return counts;
                    }
                    let mut idx = vec![first; universe];
                    // prefix[u] holds the families built from idx[..u].
                    let mut prefix = vec![([0u64; 5], [0u64; 5]); universe + 1];
                    let mut valid_from = 0;
                    loop {
                        for u in valid_from..universe {
                            let (ma, mb) = &masks[idx[u]];
                            let (mut a, mut b) = prefix[u];
                            for mm in 0..n {
                                a[mm] |= ma[mm] << u;
                                b[mm] |= mb[mm] << u;
                            }
                            prefix[u + 1] = (a, b);
                        }
                        let (a, b) = &prefix[universe];
                        debug_assert_eq!(
                            lemma2_oracle(&order, &a[..n], &b[..n]),
                            Ok(inclusion_holds(&a[..n], &b[..n]))
                        );
                        counts.0 += 1;
                        if !inclusion_holds(&a[..n], &b[..n]) {
                            counts.1 += 1;
                        }
                        // Next nondecreasing tail idx[1..] with entries >= first.
                        let mut pos = universe;
                        loop {
                            if pos == 1 {
                                return counts;
                            }
                            pos -= 1;
                            if idx[pos] + 1 < pairs.len() {
                                let v = idx[pos] + 1;
                                for slot in &mut idx[pos..] {
                                    *slot = v;
                                }
                                valid_from = pos;
                                break;
                            }
                        }
                    }
                })
                .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
            total.orders += 1;
            total.instances += instances;
            total.failures += failures;
        }
    }
    total
}
