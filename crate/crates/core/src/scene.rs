//! Scene files: parsing, generator expansion and validation.
//!
//! A scene is a JSON document. Point sets are written either as explicit
//! lists or as generators expanded at load time:
//!
//! ```json
//! {"points": [0.0, [0.5, 1.0]]}
//! {"grid": {"lo": [0, 0], "hi": [1, 1], "step": 0.005}}
//! {"interval": {"lo": 0, "hi": 1}}
//! {"union": [{"points": [0]}, {"interval": {"lo": 0.5, "hi": 1}}]}
//! ```
//!
//! `grid` is the lattice `lo + i step` inside the box; `interval` is a grid
//! at the enclosing resolution with the upper corner always included.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::construct::theorem1::check_nowhere_dense;
use crate::construct::{ConstructError, Depths, Domain, ExactShape, Scene, SetOracle, UscParams, ValueGrid};
use crate::metric::{dist_to_points, nearest_index, BoundingBox, GeomError, Metric, Point, SampledSet};
use crate::multifunction::{usc_check, usc_modulus_ladder, DeltaSchedule, ModulusRow, MultifunctionTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scene at `{field}`: {message}")]
    Invalid {
        field: String,
        message: String,
        detail: Option<Value>,
    },
}

impl SceneError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Invalid {
            field: field.into(),
            message: message.into(),
            detail: None,
        }
    }

    fn with_point(field: impl Into<String>, message: impl Into<String>, p: &Point) -> Self {
        SceneError::Invalid {
            field: field.into(),
            message: message.into(),
            detail: Some(json!({ "point": p })),
        }
    }

    /// Machine-readable form for diagnostics output.
    pub fn diagnostic(&self) -> Value {
        match self {
            SceneError::Parse {
                path,
                line,
                column,
                message,
            } => json!({
                "error": "parse",
                "field": path,
                "line": line,
                "column": column,
                "message": message,
            }),
            SceneError::Invalid { field, message, detail } => {
                let mut v = json!({ "error": "invalid", "field": field, "message": message });
                if let Some(d) = detail {
                    v["detail"] = d.clone();
                }
                v
            }
        }
    }
}

/// A coordinate vector; a bare number stands for a 1-D point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coords {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Coords {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            Coords::Scalar(x) => vec![*x],
            Coords::Vector(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Coords,
    pub hi: Coords,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub lo: Coords,
    pub hi: Coords,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSpec {
    Points(Vec<Coords>),
    Grid(GridSpec),
    Interval(IntervalSpec),
    Union(Vec<PointSpec>),
}

impl PointSpec {
    /// Spacing the generator itself implies, if any.
    fn natural_step(&self) -> Option<f64> {
        match self {
            PointSpec::Grid(g) => Some(g.step),
            PointSpec::Union(parts) => parts.iter().filter_map(|p| p.natural_step()).reduce(f64::max),
            _ => None,
        }
    }

    /// Expands to a duplicate-free point list (first occurrence wins).
    pub fn expand(&self, resolution: Option<f64>, field: &str) -> Result<Vec<Point>, SceneError> {
        let mut out = Vec::new();
        self.expand_into(resolution, field, &mut out)?;
        let mut seen = std::collections::HashSet::new();
        out.retain(|p: &Point| seen.insert(p.key()));
        Ok(out)
    }

    fn expand_into(&self, resolution: Option<f64>, field: &str, out: &mut Vec<Point>) -> Result<(), SceneError> {
        let geom = |e: GeomError| SceneError::invalid(field, e.to_string());
        match self {
            PointSpec::Points(list) => {
                for c in list {
                    out.push(Point::new(c.to_vec()).map_err(geom)?);
                }
            }
            PointSpec::Grid(g) => {
                let b = BoundingBox::new(g.lo.to_vec(), g.hi.to_vec()).map_err(geom)?;
                if !(g.step > 0.0 && g.step.is_finite()) {
                    return Err(SceneError::invalid(
                        field,
                        format!("grid step must be positive, got {}", g.step),
                    ));
                }
                lattice(&b, g.step, out);
            }
            PointSpec::Interval(i) => {
                let res = resolution.ok_or_else(|| {
                    SceneError::invalid(field, "interval generator needs a resolution from its context")
                })?;
                let b = BoundingBox::new(i.lo.to_vec(), i.hi.to_vec()).map_err(geom)?;
                out.extend(ValueGrid::new(&b, res).map_err(geom)?.points());
            }
            PointSpec::Union(parts) => {
                for (k, part) in parts.iter().enumerate() {
                    part.expand_into(resolution, &format!("{field}.union[{k}]"), out)?;
                }
            }
        }
        Ok(())
    }
}

/// Points `lo + i step` inside the box, last axis fastest.
fn lattice(b: &BoundingBox, step: f64, out: &mut Vec<Point>) {
    let counts: Vec<usize> =
        b.lo.iter()
            .zip(&b.hi)
            .map(|(lo, hi)| ((hi - lo) / step + 1e-7).floor() as usize)
            .collect();
    let mut idx = vec![0usize; b.dim()];
    loop {
        let coords = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| (b.lo[a] + i as f64 * step).min(b.hi[a]))
            .collect();
        out.push(Point::new(coords).expect("finite lattice point"));
        let mut axis = b.dim();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if idx[axis] < counts[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub sample: PointSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ExactShape>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiEntry {
    pub key: Coords,
    pub value: PointSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub value_space: BoundingBox,
    pub value_resolution: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<PhiEntry>>,
    /// Same value set at every boundary sample point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<PointSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub sample: PointSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    /// Drop sample points lying on the boundary set.
    #[serde(default)]
    pub exclude_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainField {
    Free(FreeTag),
    Explicit(DomainSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeTag {
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
}

fn default_steps() -> usize {
    8
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            delta_min: None,
            steps: default_steps(),
            probes: None,
        }
    }
}

fn default_selector() -> String {
    "golden".to_string()
}

/// Scene document as written on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub dimension: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    pub x_box: BoundingBox,
    pub x_resolution: f64,
    pub boundary: BoundarySpec,
    pub phi: PhiSpec,
    pub domain: DomainField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_grid_step: Option<f64>,
    #[serde(default)]
    pub depths: Depths,
    pub usc: UscParams,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default = "default_selector")]
    pub selector: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_metric() -> Metric {
    Metric::Euclidean
}

pub fn parse_scene_file(text: &str) -> Result<SceneFile, SceneError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: Result<SceneFile, _> = serde_path_to_error::deserialize(&mut de);
    match parsed {
        Ok(file) => {
            de.end().map_err(|e| SceneError::Parse {
                path: ".".to_string(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
            Ok(file)
        }
        Err(err) => {
            // The path is unknown when the document ends early.
            let path = match err.path().to_string() {
                p if p == "?" => ".".to_string(),
                p => p,
            };
            let inner = err.into_inner();
            Err(SceneError::Parse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            })
        }
    }
}

fn positive(field: &str, v: f64) -> Result<f64, SceneError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(SceneError::invalid(
            field,
            format!("must be a positive number, got {v}"),
        ))
    }
}

fn resolution_for(field: &str, explicit: Option<f64>, spec: &PointSpec) -> Result<f64, SceneError> {
    match explicit.or_else(|| spec.natural_step()) {
        Some(r) => positive(&format!("{field}.resolution"), r),
        None => Err(SceneError::invalid(
            format!("{field}.resolution"),
            "missing: required unless the sample is a grid",
        )),
    }
}

fn check_dims<'a>(field: &str, dim: usize, pts: impl IntoIterator<Item = &'a Point>) -> Result<(), SceneError> {
    for p in pts {
        if p.dim() != dim {
            return Err(SceneError::with_point(
                field,
                format!("point has dimension {}, scene dimension is {dim}", p.dim()),
                p,
            ));
        }
    }
    Ok(())
}

/// Expands a scene file and checks the structural invariants: nonempty
/// boundary, keys on the boundary sample, domain disjoint from the boundary
/// and accumulating on it, distance function consistent with the sample.
pub fn build_scene(file: &SceneFile) -> Result<Scene, SceneError> {
    let dim = file.dimension;
    if dim == 0 {
        return Err(SceneError::invalid("dimension", "must be at least 1"));
    }
    let m = file.metric;
    file.x_box
        .validate()
        .map_err(|e| SceneError::invalid("x_box", e.to_string()))?;
    if file.x_box.dim() != dim {
        return Err(SceneError::invalid(
            "x_box",
            format!("box has dimension {}, expected {dim}", file.x_box.dim()),
        ));
    }
    let x_resolution = positive("x_resolution", file.x_resolution)?;

    let l_res = resolution_for("boundary", file.boundary.resolution, &file.boundary.sample)?;
    let l_points = file.boundary.sample.expand(Some(l_res), "boundary.sample")?;
    if l_points.is_empty() {
        return Err(SceneError::invalid("boundary.sample", "boundary sample is empty"));
    }
    check_dims("boundary.sample", dim, &l_points)?;
    for p in &l_points {
        if !file.x_box.contains(p.coords()) {
            return Err(SceneError::with_point("boundary.sample", "point outside x_box", p));
        }
    }
    let l_sample =
        SampledSet::new(l_points, l_res).map_err(|e| SceneError::invalid("boundary.sample", e.to_string()))?;
    let boundary = match &file.boundary.shape {
        Some(shape) => {
            let ExactShape::Box(b) = shape;
            if b.validate().is_err() || b.dim() != dim {
                return Err(SceneError::invalid(
                    "boundary.shape",
                    "shape box is malformed or has the wrong dimension",
                ));
            }
            SetOracle::exact(l_sample, shape.clone(), m)
        }
        None => SetOracle::sampled(l_sample, m),
    };

    let value_res = positive("phi.value_resolution", file.phi.value_resolution)?;
    let space = &file.phi.value_space;
    space
        .validate()
        .map_err(|e| SceneError::invalid("phi.value_space", e.to_string()))?;
    let mut entries = match (&file.phi.entries, &file.phi.constant) {
        (Some(list), None) => {
            let mut entries = Vec::with_capacity(list.len());
            for (i, entry) in list.iter().enumerate() {
                let key = Point::new(entry.key.to_vec())
                    .map_err(|e| SceneError::invalid(format!("phi.entries[{i}].key"), e.to_string()))?;
                let field = format!("phi.entries[{i}].value");
                let values = entry.value.expand(Some(value_res), &field)?;
                check_dims(&field, space.dim(), &values)?;
                let values = SampledSet::new(values, value_res)
                    .map_err(|e| SceneError::invalid(field.clone(), e.to_string()))?;
                entries.push((key, values));
            }
            entries
        }
        (None, Some(spec)) => {
            let values = spec.expand(Some(value_res), "phi.constant")?;
            check_dims("phi.constant", space.dim(), &values)?;
            let values =
                SampledSet::new(values, value_res).map_err(|e| SceneError::invalid("phi.constant", e.to_string()))?;
            boundary
                .sample()
                .points()
                .iter()
                .map(|k| (k.clone(), values.clone()))
                .collect()
        }
        _ => {
            return Err(SceneError::invalid(
                "phi",
                "give exactly one of `entries` and `constant`",
            ))
        }
    };
    // Keys written in decimal may miss lattice coordinates by rounding;
    // snap them onto the sample point they denote.
    let boundary_keys = boundary.sample().key_set();
    let snap = 1e-9 * boundary.sample().resolution();
    for (i, (key, _)) in entries.iter_mut().enumerate() {
        if boundary_keys.contains(&key.key()) {
            continue;
        }
        match nearest_index(key.coords(), boundary.sample().points(), m) {
            Some((j, d)) if d <= snap => *key = boundary.sample().points()[j].clone(),
            _ => {
                return Err(SceneError::with_point(
                    format!("phi.entries[{i}].key"),
                    "key is not a point of the boundary sample",
                    key,
                ))
            }
        }
    }
    let phi = MultifunctionTable::new(entries, space.clone(), value_res)
        .map_err(|e| SceneError::invalid("phi", e.to_string()))?;

    let domain = match &file.domain {
        DomainField::Free(_) => Domain::Free,
        DomainField::Explicit(spec) => {
            let res = resolution_for("domain", spec.resolution, &spec.sample)?;
            let mut pts = spec.sample.expand(Some(res), "domain.sample")?;
            check_dims("domain.sample", dim, &pts)?;
            if spec.exclude_boundary {
                pts.retain(|p| boundary.dist(p.coords()) > 0.0 && !boundary_keys.contains(&p.key()));
            }
            if pts.is_empty() {
                return Err(SceneError::invalid("domain.sample", "domain sample is empty"));
            }
            for p in &pts {
                if !file.x_box.contains(p.coords()) {
                    return Err(SceneError::with_point("domain.sample", "point outside x_box", p));
                }
                if boundary_keys.contains(&p.key()) || !(boundary.dist(p.coords()) > 0.0) {
                    return Err(SceneError::with_point(
                        "domain.sample",
                        "domain point lies on the boundary set",
                        p,
                    ));
                }
            }
            let d = SampledSet::new(pts, res).map_err(|e| SceneError::invalid("domain.sample", e.to_string()))?;
            for a in boundary.sample().points() {
                let gap = dist_to_points(a.coords(), d.points(), m);
                if gap > res {
                    return Err(SceneError::Invalid {
                        field: "domain.sample".to_string(),
                        message: format!("boundary point is {gap} from the domain, more than its resolution {res}"),
                        detail: Some(json!({ "point": a, "gap": gap })),
                    });
                }
            }
            Domain::Explicit(d)
        }
    };

    let step = positive("value_grid_step", file.value_grid_step.unwrap_or(value_res / 2.0))?;
    let value_grid = ValueGrid::new(space, step).map_err(|e| SceneError::invalid("value_grid_step", e.to_string()))?;

    let depths = file.depths;
    if depths.n_max == 0 || depths.k_max == 0 || depths.k_depth == 0 {
        return Err(SceneError::invalid("depths", "n_max, k_max and K must be at least 1"));
    }
    positive("usc.delta", file.usc.delta)?;
    positive("usc.epsilon", file.usc.epsilon)?;
    if file.verify.steps == 0 {
        return Err(SceneError::invalid("verify.steps", "must be at least 1"));
    }
    let schedule = match file.verify.delta_min {
        Some(dm) => DeltaSchedule::ending_at(positive("verify.delta_min", dm)?, file.verify.steps),
        None => DeltaSchedule::geometric(0.2 * file.x_box.diameter(m), file.verify.steps),
    }
    .map_err(|e| SceneError::invalid("verify", e.to_string()))?;

    let scene = Scene {
        dimension: dim,
        metric: m,
        x_box: file.x_box.clone(),
        x_resolution,
        boundary,
        phi,
        domain,
        value_grid,
        depths,
        usc: file.usc,
        schedule,
        probes: file.verify.probes,
        selector: file.selector.clone(),
        seed: file.seed,
    };
    check_oracle(&scene)?;
    Ok(scene)
}

/// `|dist_fn(p) - d(p, sample)| <= resolution` on a probe grid, and
/// `dist_fn = 0` on the sample.
fn check_oracle(scene: &Scene) -> Result<(), SceneError> {
    let oracle = &scene.boundary;
    if oracle.shape().is_none() {
        return Ok(());
    }
    let res = oracle.sample().resolution();
    for p in oracle.sample().points() {
        if oracle.dist(p.coords()) != 0.0 {
            return Err(SceneError::with_point(
                "boundary.shape",
                "sample point is off the exact shape",
                p,
            ));
        }
    }
    let grid = ValueGrid::new(
        &scene.x_box,
        scene.x_resolution.max(scene.x_box.diameter(scene.metric) / 64.0),
    )
    .map_err(|e| SceneError::invalid("x_resolution", e.to_string()))?;
    let probes = grid.points();
    if let Some((gap, p)) = oracle.consistency_gap(&probes) {
        if gap > res * (1.0 + 1e-9) {
            return Err(SceneError::Invalid {
                field: "boundary".to_string(),
                message: format!("distance function and sample disagree by {gap}, more than the resolution {res}"),
                detail: Some(json!({ "point": p, "gap": gap })),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub boundary_points: usize,
    pub phi_keys: usize,
    pub domain_points: Option<usize>,
    pub value_grid_points: usize,
    pub modulus: Vec<ModulusRow>,
}

/// Structural invariants plus the nowhere-density probe and the
/// upper-continuity check at the scene's `(delta, epsilon)`.
pub fn validate_scene(scene: &Scene) -> Result<ValidationSummary, SceneError> {
    check_nowhere_dense(&scene.x_box, scene.x_resolution, &scene.boundary).map_err(|e| match e {
        ConstructError::NotNowhereDense(ref p) => SceneError::with_point("boundary", e.to_string(), p),
        other => SceneError::invalid("boundary", other.to_string()),
    })?;
    let usc = usc_check(&scene.phi, scene.usc.delta, scene.usc.epsilon, scene.metric)
        .map_err(|e| SceneError::invalid("usc", e.to_string()))?;
    if let Some(w) = usc.witness {
        return Err(SceneError::Invalid {
            field: "phi".to_string(),
            message: ConstructError::NotUpperContinuous(w.clone()).to_string(),
            detail: Some(json!({ "witness": w, "delta": scene.usc.delta, "epsilon": scene.usc.epsilon })),
        });
    }
    let value_grid_points = scene.value_grid.points().len();
    Ok(ValidationSummary {
        boundary_points: scene.boundary.sample().len(),
        phi_keys: scene.phi.len(),
        domain_points: scene.domain.explicit().map(|d| d.len()),
        value_grid_points,
        modulus: usc_modulus_ladder(&scene.phi, &scene.schedule, scene.metric),
    })
}

/// Parses and builds a scene from JSON text.
pub fn load_scene(text: &str) -> Result<Scene, SceneError> {
    build_scene(&parse_scene_file(text)?)
}
