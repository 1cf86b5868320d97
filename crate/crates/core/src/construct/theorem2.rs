//! Construction on a prescribed domain `D`.
//!
//! The theorem construction draws a discrete `D_1` from `D`; the lemma
//! construction fills `D_2 = D \ D_1` against the part `L_2` of the boundary
//! that `D_2` still accumulates on.

use std::collections::HashSet;

use super::lemma1::construct_lemma1;
use super::theorem1::{construct_theorem1, Placement, Theorem1Output};
use super::{ConstructError, Scene, SetOracle, ValueSelector};
use crate::metric::{dist_to_points, SampledSet};
use crate::multifunction::{FunctionSample, MultifunctionTable};

#[derive(Clone, Debug)]
pub struct Theorem2Output {
    pub theorem1: Theorem1Output,
    /// `D_2 = D \ D_1`, in the order of `D`.
    pub rest: SampledSet,
    /// Boundary sample the lemma part was built against: `L_2`, the points
    /// within `D`'s resolution of `D_2`.
    pub rest_boundary: SampledSet,
    /// `f_1` pairs followed by `f_2` pairs.
    pub function: FunctionSample,
}

pub fn construct_theorem2(scene: &Scene, selector: &dyn ValueSelector) -> Result<Theorem2Output, ConstructError> {
    let domain = scene.domain.explicit().ok_or(ConstructError::DomainRequired("thm2"))?;
    let m = scene.metric;
    let first = construct_theorem1(scene, Placement::Domain(domain))?;
    let used: HashSet<_> = first.domain().map(|x| x.key()).collect();
    let rest = SampledSet::new(
        domain
            .points()
            .iter()
            .filter(|x| !used.contains(&x.key()))
            .cloned()
            .collect(),
        domain.resolution(),
    )?;

    let (l2, f2) = if rest.is_empty() {
        (
            SampledSet::empty(scene.boundary.sample().resolution())?,
            FunctionSample::new(Vec::new())?,
        )
    } else {
        let (oracle, phi2) = rest_target(scene, &rest)?;
        let f2 = construct_lemma1(&rest, &oracle, &phi2, &scene.value_grid, selector, m)?;
        (oracle.sample().clone(), f2)
    };
    let function = first.function.clone().union(f2)?;
    Ok(Theorem2Output {
        theorem1: first,
        rest,
        rest_boundary: l2,
        function,
    })
}

/// Boundary oracle and target for the lemma part on `rest`: `L_2` and
/// `Phi` restricted to it. Falls back to `L` and `Phi` when the restriction
/// is empty.
pub(crate) fn rest_target(scene: &Scene, rest: &SampledSet) -> Result<(SetOracle, MultifunctionTable), ConstructError> {
    let m = scene.metric;
    let boundary = scene.boundary.sample();
    let res = scene.domain.explicit().map_or(rest.resolution(), |d| d.resolution());
    let l2: Vec<_> = boundary
        .points()
        .iter()
        .filter(|a| dist_to_points(a.coords(), rest.points(), m) <= res)
        .cloned()
        .collect();
    let oracle = if l2.is_empty() || l2.len() == boundary.len() {
        scene.boundary.clone()
    } else {
        SetOracle::sampled(SampledSet::new(l2, boundary.resolution())?, m)
    };
    let keys = oracle.sample().key_set();
    let phi2 = match scene.phi.restrict(|k| keys.contains(&k.key())) {
        Ok(t) => t,
        Err(_) => scene.phi.clone(),
    };
    Ok((oracle, phi2))
}
