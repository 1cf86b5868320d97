//! Post-construction audit.
//!
//! Conditions are re-derived from the emitted pairs and their provenance,
//! never from construction state. Theorem families are regrouped by
//! `(layer, anchor)` and ordered by `k`.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::theorem2::rest_target;
use super::{ConstructError, Scene, SetOracle};
use crate::metric::{dist_to_points, hausdorff, Point, PointKey, SampledSet};
use crate::multifunction::{FunctionSample, MultifunctionTable, Pair, Source};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<String>,
    pub pass: bool,
}

impl ConditionCheck {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            violations: 0,
            first_violation: None,
            pass: true,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            self.pass = false;
            if self.first_violation.is_none() {
                self.first_violation = Some(describe());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<ConditionCheck>,
    pub pass: bool,
}

impl AuditReport {
    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Family<'a> {
    layer: usize,
    anchor: &'a Point,
    members: Vec<(usize, &'a Pair)>,
}

fn families(f: &FunctionSample) -> Vec<Family<'_>> {
    let mut index: HashMap<(usize, PointKey), usize> = HashMap::new();
    let mut out: Vec<Family<'_>> = Vec::new();
    for pair in f.pairs() {
        let Some(prov) = &pair.provenance else { continue };
        if prov.source != Source::Thm1 {
            continue;
        }
        let layer = prov.layer.unwrap_or(0);
        let slot = *index.entry((layer, prov.anchor.key())).or_insert_with(|| {
            out.push(Family {
                layer,
                anchor: &prov.anchor,
                members: Vec::new(),
            });
            out.len() - 1
        });
        out[slot].members.push((prov.k.unwrap_or(0), pair));
    }
    for fam in &mut out {
        fam.members.sort_by_key(|(k, _)| *k);
    }
    out
}

/// Audits `f` against the scene. Anchored points are checked against the
/// family conditions `c1`..`c7`, lemma points against their two defining
/// inequalities, and, when `f` mixes both, `dom f` against the explicit
/// domain.
pub fn audit_function(scene: &Scene, f: &FunctionSample) -> Result<AuditReport, ConstructError> {
    let m = scene.metric;
    let phi = &scene.phi;
    let boundary_keys = scene.boundary.sample().key_set();
    let fams = families(f);
    let k_max = scene.depths.k_max;
    let tail_from = (k_max / 2).max(1);
    let tail_bound = 4.0 / scene.depths.k_depth as f64;
    let value_res = scene.value_grid.covering_radius(m);
    let mixed = f
        .pairs()
        .iter()
        .any(|p| matches!(&p.provenance, Some(prov) if prov.source == Source::Lemma1));
    // Theorem points of a mixed output were drawn from D; free ones only
    // need to lie in X.
    let explicit = scene.domain.explicit().filter(|_| mixed);

    let mut c1 = ConditionCheck::new("c1_off_boundary");
    let mut c2 = ConditionCheck::new("c2_within_radius");
    let mut c3 = ConditionCheck::new("c3_decreasing_distance");
    let mut c4 = ConditionCheck::new("c4_distinct");
    let mut c5 = ConditionCheck::new("c5_values_in_grid");
    let mut c6 = ConditionCheck::new("c6_tail_hausdorff");
    let mut c7 = ConditionCheck::new("c7_values_near_target");
    let mut closure = ConditionCheck::new("a_closure");

    for fam in &fams {
        let radius = Scene::layer_radius(fam.layer);
        let target = phi.value_at(fam.anchor, m);
        let mut last = f64::INFINITY;
        for (idx, (k, pair)) in fam.members.iter().enumerate() {
            let r = scene.boundary.dist(pair.x.coords());
            let in_space = match explicit {
                Some(d) => d.contains(&pair.x),
                None => scene.x_box.contains(pair.x.coords()),
            };
            c1.record(r > 0.0 && in_space && !boundary_keys.contains(&pair.x.key()), || {
                format!("x={} r={r} in_space={in_space}", pair.x)
            });
            let d = m.eval(pair.x.coords(), fam.anchor.coords());
            c2.record(d < radius, || {
                format!("x={} s={} d={d} >= {radius}", pair.x, fam.anchor)
            });
            c3.record(d < last && *k == idx + 1, || {
                format!("s={} k={k} d={d} previous={last}", fam.anchor)
            });
            last = d;
            let gap = dist_to_points(pair.y.coords(), target.points(), m);
            c7.record(gap < radius, || {
                format!("s={} k={k} y={} gap={gap} >= {radius}", fam.anchor, pair.y)
            });
            closure.record(r < radius, || format!("x={} d(x,L)={r} >= {radius}", pair.x));
        }
        let tail: Vec<Point> = fam
            .members
            .iter()
            .filter(|(k, _)| *k >= tail_from)
            .map(|(_, p)| p.y.clone())
            .collect();
        let tail = SampledSet::dedup(tail, value_res)?;
        let h = if tail.is_empty() {
            f64::INFINITY
        } else {
            hausdorff(&tail, target, m)?
        };
        c6.record(h <= tail_bound, || {
            format!("s={} hausdorff={h} > {tail_bound}", fam.anchor)
        });
    }

    if !fams.is_empty() {
        // Every boundary sample point is within 3/n_max of an anchor of a
        // surviving layer, whose points come within 1/n_max of it.
        let a: Vec<Point> = fams
            .iter()
            .flat_map(|fam| fam.members.iter().map(|(_, p)| p.x.clone()))
            .collect();
        let bound = 4.0 / scene.depths.n_max as f64;
        for s in scene.boundary.sample().points() {
            let d = dist_to_points(s.coords(), &a, m);
            closure.record(d < bound, || format!("a={} d(a,A)={d} >= {bound}", s));
        }
    }

    let mut seen = HashSet::with_capacity(f.len());
    for pair in f.pairs() {
        c4.record(seen.insert(pair.x.key()), || format!("repeated x={}", pair.x));
        c5.record(scene.value_grid.contains(&pair.y), || format!("y={} off grid", pair.y));
    }

    let mut checks = vec![c1, c2, c3, c4, c5, c6, c7, closure];
    if fams.is_empty() {
        // Lemma-only output: the theorem conditions do not apply.
        checks.retain(|c| c.name == "c4_distinct" || c.name == "c5_values_in_grid");
    }

    let lemma: Vec<&Pair> = f
        .pairs()
        .iter()
        .filter(|p| matches!(&p.provenance, Some(prov) if prov.source == Source::Lemma1))
        .collect();
    if !lemma.is_empty() {
        let (oracle, target) = lemma_target(scene, &lemma, !fams.is_empty())?;
        checks.push(audit_lemma(&lemma, &oracle, &target, scene));
        if !fams.is_empty() {
            if let Some(d) = scene.domain.explicit() {
                let mut part = ConditionCheck::new("partition");
                let dom: HashSet<PointKey> = f.domain().map(|x| x.key()).collect();
                let want = d.key_set();
                for x in d.points() {
                    part.record(dom.contains(&x.key()), || format!("x={x} missing from dom f"));
                }
                for x in f.domain() {
                    part.record(want.contains(&x.key()), || format!("x={x} outside D"));
                }
                checks.push(part);
            }
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(AuditReport { checks, pass })
}

fn lemma_target(
    scene: &Scene,
    lemma: &[&Pair],
    mixed: bool,
) -> Result<(SetOracle, MultifunctionTable), ConstructError> {
    if !mixed {
        return Ok((scene.boundary.clone(), scene.phi.clone()));
    }
    let rest = SampledSet::new(
        lemma.iter().map(|p| p.x.clone()).collect(),
        scene.domain.explicit().map_or(scene.x_resolution, |d| d.resolution()),
    )?;
    rest_target(scene, &rest)
}

fn audit_lemma(lemma: &[&Pair], oracle: &SetOracle, phi: &MultifunctionTable, scene: &Scene) -> ConditionCheck {
    let m = scene.metric;
    let mut check = ConditionCheck::new("lemma_inequalities");
    for pair in lemma {
        let h = &pair.provenance.as_ref().expect("lemma provenance").anchor;
        let r = oracle.dist(pair.x.coords());
        let dh = m.eval(pair.x.coords(), h.coords());
        let gap = dist_to_points(pair.y.coords(), phi.value_at(h, m).points(), m);
        check.record(r > 0.0 && dh < 2.0 * r && gap < r, || {
            format!("x={} r={r} d(x,h)={dh} d(y,Phi(h))={gap}", pair.x)
        });
    }
    check
}
