//! Constructions looked up by command name.

use super::lemma1::{construct_lemma1, selector_by_name};
use super::theorem1::{construct_theorem1, Placement};
use super::theorem2::construct_theorem2;
use super::{ConstructError, Scene};
use crate::multifunction::FunctionSample;
use crate::verify::Mode;

/// Output of a registered construction.
#[derive(Clone, Debug)]
pub struct Constructed {
    pub function: FunctionSample,
    /// Human-readable facts about the run (layer sizes, split sizes).
    pub notes: Vec<String>,
}

pub trait Construction: Send + Sync {
    fn name(&self) -> &'static str;

    /// Verification mode the construction's guarantee is stated in.
    fn mode(&self) -> Mode;

    fn build(&self, scene: &Scene) -> Result<Constructed, ConstructError>;
}

struct Lemma1;

impl Construction for Lemma1 {
    fn name(&self) -> &'static str {
        "lemma1"
    }

    fn mode(&self) -> Mode {
        Mode::Containment
    }

    fn build(&self, scene: &Scene) -> Result<Constructed, ConstructError> {
        let domain = scene
            .domain
            .explicit()
            .ok_or(ConstructError::DomainRequired("lemma1"))?;
        let selector = selector_by_name(&scene.selector, scene.seed)?;
        let function = construct_lemma1(
            domain,
            &scene.boundary,
            &scene.phi,
            &scene.value_grid,
            selector.as_ref(),
            scene.metric,
        )?;
        Ok(Constructed {
            notes: vec![format!("selector {}: {} points", selector.name(), function.len())],
            function,
        })
    }
}

struct Theorem1;

impl Construction for Theorem1 {
    fn name(&self) -> &'static str {
        "thm1"
    }

    fn mode(&self) -> Mode {
        Mode::Equality
    }

    fn build(&self, scene: &Scene) -> Result<Constructed, ConstructError> {
        let out = construct_theorem1(scene, Placement::Free)?;
        let sizes: Vec<String> = out.layers.iter().map(|l| l.len().to_string()).collect();
        Ok(Constructed {
            notes: vec![
                format!(
                    "layer sizes [{}], {} boundary points unanchored",
                    sizes.join(", "),
                    out.unanchored
                ),
                format!("{} points", out.function.len()),
            ],
            function: out.function,
        })
    }
}

struct Theorem2;

impl Construction for Theorem2 {
    fn name(&self) -> &'static str {
        "thm2"
    }

    fn mode(&self) -> Mode {
        Mode::Equality
    }

    fn build(&self, scene: &Scene) -> Result<Constructed, ConstructError> {
        let selector = selector_by_name(&scene.selector, scene.seed)?;
        let out = construct_theorem2(scene, selector.as_ref())?;
        Ok(Constructed {
            notes: vec![format!(
                "D_1 {} points, D_2 {} points, L_2 {} of {} boundary points",
                out.theorem1.function.len(),
                out.rest.len(),
                out.rest_boundary.len(),
                scene.boundary.sample().len()
            )],
            function: out.function,
        })
    }
}

pub struct ConstructionRegistry {
    entries: Vec<Box<dyn Construction>>,
}

impl ConstructionRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Lemma1));
        r.register(Box::new(Theorem1));
        r.register(Box::new(Theorem2));
        r
    }

    /// Adds a construction, replacing any with the same name.
    pub fn register(&mut self, c: Box<dyn Construction>) {
        self.entries.retain(|e| e.name() != c.name());
        self.entries.push(c);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Construction> {
        self.entries.iter().find(|e| e.name() == name).map(|e| e.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for ConstructionRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
