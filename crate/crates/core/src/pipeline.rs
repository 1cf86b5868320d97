//! Scene to artifacts: construction, verification, audit and file formats.
//!
//! Every float is written with 17 significant digits so that re-reading a
//! `function.jsonl` reproduces the exact bits, and with them the report.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::construct::{audit_function, AuditReport, ConstructError, ConstructionRegistry, Depths, Scene};
use crate::multifunction::{FunctionSample, Pair, Source};
use crate::scene::{load_scene, validate_scene, SceneError, ValidationSummary};
use crate::verify::{probe_subsample, verify_cluster_match, Mode, ProbeResult, ToleranceBreakdown, WorstProbe};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("construction failed: {0}")]
    Construct(#[from] ConstructError),
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("function file line {line}: {message}")]
    FunctionFile { line: usize, message: String },
}

impl PipelineError {
    /// 2 for unusable input, 3 for construction failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Construct(_) => 3,
            _ => 2,
        }
    }

    pub fn diagnostic(&self) -> serde_json::Value {
        match self {
            PipelineError::Scene(e) => e.diagnostic(),
            PipelineError::Construct(e) => serde_json::json!({ "error": "construction", "message": e.to_string() }),
            other => serde_json::json!({ "error": "input", "message": other.to_string() }),
        }
    }
}

/// Wraps a formatter so floats print as `{:.16e}`.
struct Digits17<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

/// JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize>(value: &T, pretty: bool) -> String {
    let mut buf = Vec::new();
    if pretty {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
        value.serialize(&mut ser).expect("serializable value");
    } else {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(CompactFormatter));
        value.serialize(&mut ser).expect("serializable value");
    }
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn function_to_jsonl(f: &FunctionSample) -> String {
    let mut out = String::new();
    for pair in f.pairs() {
        out.push_str(&to_json(pair, false));
        out.push('\n');
    }
    out
}

pub fn function_from_jsonl(text: &str) -> Result<FunctionSample, PipelineError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: Pair = serde_json::from_str(line).map_err(|e| PipelineError::FunctionFile {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    FunctionSample::new(pairs).map_err(|e| PipelineError::FunctionFile {
        line: 0,
        message: e.to_string(),
    })
}

pub fn scene_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Command-line overrides applied on top of the scene file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub mode: Option<Mode>,
    pub probes: Option<usize>,
    pub depths: Option<Depths>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scene_hash: String,
    pub command: String,
    pub mode: Mode,
    pub deltas: Vec<f64>,
    pub per_probe: Vec<ProbeResult>,
    pub worst: Option<WorstProbe>,
    pub tolerance_breakdown: ToleranceBreakdown,
    pub verification_pass: bool,
    pub audit: AuditReport,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Artifacts {
    pub function: FunctionSample,
    pub function_jsonl: String,
    pub report: RunReport,
    pub report_json: String,
    pub distances_csv: String,
    /// Constructed points with their values, for 1-D and 2-D scenes.
    pub points_csv: Option<String>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

/// Loads, overrides and validates a scene.
pub fn prepare_scene(text: &str, opts: &RunOptions) -> Result<(Scene, ValidationSummary), PipelineError> {
    let mut scene = load_scene(text)?;
    if let Some(seed) = opts.seed {
        scene.seed = seed;
    }
    if let Some(d) = opts.depths {
        if d.n_max == 0 || d.k_max == 0 || d.k_depth == 0 {
            return Err(SceneError::Invalid {
                field: "depths".to_string(),
                message: "n_max, k_max and K must be at least 1".to_string(),
                detail: None,
            }
            .into());
        }
        scene.depths = d;
    }
    let summary = validate_scene(&scene)?;
    Ok((scene, summary))
}

/// Which construction produced `f`, read off its provenance tags.
pub fn infer_command(f: &FunctionSample) -> &'static str {
    let mut thm = false;
    let mut lemma = false;
    for p in f.pairs() {
        match p.provenance.as_ref().map(|p| p.source) {
            Some(Source::Thm1) => thm = true,
            Some(Source::Lemma1) => lemma = true,
            None => {}
        }
    }
    match (thm, lemma) {
        (true, true) => "thm2",
        (true, false) => "thm1",
        (false, true) => "lemma1",
        (false, false) => "external",
    }
}

fn default_tolerance(command: &str, scene: &Scene) -> ToleranceBreakdown {
    let value_res = scene.phi.value_resolution();
    let delta_min = scene.schedule.smallest();
    match command {
        "lemma1" => ToleranceBreakdown::lemma(value_res, delta_min),
        _ => ToleranceBreakdown::theorem(scene.depths.n_max, value_res, delta_min),
    }
}

/// Verifies and audits `f` against a prepared scene and renders artifacts.
pub fn evaluate(
    scene: &Scene,
    hash: &str,
    f: FunctionSample,
    opts: &RunOptions,
    notes: Vec<String>,
) -> Result<Artifacts, PipelineError> {
    let registry = ConstructionRegistry::with_defaults();
    let command = infer_command(&f);
    let mode = opts
        .mode
        .or_else(|| registry.get(command).map(|c| c.mode()))
        .unwrap_or(Mode::Equality);
    let tolerance = match opts.tol {
        Some(t) => ToleranceBreakdown::fixed(t),
        None => default_tolerance(command, scene),
    };
    let probes = probe_subsample(
        &scene.phi,
        opts.probes.or(scene.probes),
        scene.boundary.sample().resolution(),
    )
    .map_err(|e| PipelineError::Construct(e.into()))?;
    let verification = verify_cluster_match(
        &f,
        &scene.phi,
        &probes,
        &scene.schedule,
        tolerance.total,
        mode,
        scene.metric,
    );
    let audit = audit_function(scene, &f)?;

    let mut warnings = Vec::new();
    let r_last = 0.5f64.powi(scene.depths.k_max.min(1000) as i32);
    if command != "lemma1" && scene.schedule.smallest() <= r_last {
        warnings.push(format!(
            "smallest verification radius {} is at most r_k_max = {r_last}; probes may see too few points",
            scene.schedule.smallest()
        ));
    }

    let report = RunReport {
        scene_hash: hash.to_string(),
        command: command.to_string(),
        mode,
        deltas: verification.deltas,
        pass: verification.pass && audit.pass,
        verification_pass: verification.pass,
        per_probe: verification.per_probe,
        worst: verification.worst,
        tolerance_breakdown: tolerance,
        audit,
    };
    let mut report_json = to_json(&report, true);
    report_json.push('\n');
    Ok(Artifacts {
        function_jsonl: function_to_jsonl(&f),
        distances_csv: distances_csv(&report),
        points_csv: (scene.dimension <= 2).then(|| points_csv(&f)),
        function: f,
        report,
        report_json,
        notes,
        warnings,
    })
}

/// Runs a registered construction on a scene text.
pub fn run_construction(command: &str, scene_text: &str, opts: &RunOptions) -> Result<Artifacts, PipelineError> {
    let registry = ConstructionRegistry::with_defaults();
    let construction = registry
        .get(command)
        .ok_or_else(|| PipelineError::UnknownCommand(command.to_string()))?;
    let (scene, _) = prepare_scene(scene_text, opts)?;
    let built = construction.build(&scene)?;
    evaluate(&scene, &scene_hash(scene_text), built.function, opts, built.notes)
}

/// Re-verifies a function file against a scene text.
pub fn run_verify(scene_text: &str, function_text: &str, opts: &RunOptions) -> Result<Artifacts, PipelineError> {
    let (scene, _) = prepare_scene(scene_text, opts)?;
    let f = function_from_jsonl(function_text)?;
    evaluate(&scene, &scene_hash(scene_text), f, opts, Vec::new())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn coords(p: &crate::metric::Point) -> String {
    p.coords().iter().map(|&c| num(c)).collect::<Vec<_>>().join(",")
}

/// Long format: one row per probe and radius.
pub fn distances_csv(report: &RunReport) -> String {
    let dim = report.per_probe.first().map_or(1, |r| r.probe.dim());
    let mut out = String::from("probe_index,");
    for a in 0..dim {
        let _ = write!(out, "a{a},");
    }
    out.push_str("delta,distance\n");
    for (i, r) in report.per_probe.iter().enumerate() {
        for (delta, d) in report.deltas.iter().zip(&r.distance_per_delta) {
            let _ = writeln!(out, "{i},{},{},{}", coords(&r.probe), num(*delta), num(*d));
        }
    }
    out
}

pub fn points_csv(f: &FunctionSample) -> String {
    let (xd, yd) = f.pairs().first().map_or((1, 1), |p| (p.x.dim(), p.y.dim()));
    let mut out = String::new();
    for a in 0..xd {
        let _ = write!(out, "x{a},");
    }
    for a in 0..yd {
        let _ = write!(out, "y{a},");
    }
    out.push_str("source,layer,k\n");
    for p in f.pairs() {
        let (source, layer, k) = match &p.provenance {
            Some(prov) => (
                match prov.source {
                    Source::Thm1 => "thm1",
                    Source::Lemma1 => "lemma1",
                },
                prov.layer.map(|l| l.to_string()).unwrap_or_default(),
                prov.k.map(|k| k.to_string()).unwrap_or_default(),
            ),
            None => ("", String::new(), String::new()),
        };
        let _ = writeln!(out, "{},{},{source},{layer},{k}", coords(&p.x), coords(&p.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Point;
    use crate::multifunction::Provenance;

    #[test]
    fn floats_round_trip_bit_exactly() {
        let xs: [f64; 6] = [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 5e-324, 0.0];
        let text = to_json(&xs.to_vec(), false);
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        for (a, b) in xs.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(text.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn pretty_output_is_indented() {
        let text = to_json(&serde_json::json!({"a": [1.5]}), true);
        assert!(text.contains("\n  \"a\""));
        assert!(text.contains("1.5000000000000000e0"));
    }

    #[test]
    fn jsonl_round_trip() {
        let f = FunctionSample::new(vec![
            Pair {
                x: Point::scalar(0.1),
                y: Point::scalar(0.7),
                provenance: Some(Provenance {
                    source: Source::Thm1,
                    layer: Some(1),
                    anchor: Point::scalar(0.0),
                    k: Some(3),
                }),
            },
            Pair {
                x: Point::scalar(0.2),
                y: Point::scalar(1.0 / 3.0),
                provenance: None,
            },
        ])
        .unwrap();
        let text = function_to_jsonl(&f);
        assert_eq!(text.lines().count(), 2);
        let back = function_from_jsonl(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(function_to_jsonl(&back), text);
        assert_eq!(infer_command(&f), "thm1");
    }

    #[test]
    fn bad_line_is_located() {
        match function_from_jsonl("{\"x\":[0.1],\"y\":[0.2]}\nnot json\n") {
            Err(PipelineError::FunctionFile { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(
            scene_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
