use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use cluster_forge::construct::{Depths, Domain};
use cluster_forge::pipeline::{
    prepare_scene, run_construction, run_verify, scene_hash, Artifacts, PipelineError, RunOptions,
};
use cluster_forge::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    Lemma1,
    Thm1,
    Thm2,
    Verify,
    All,
    Validate,
}

/// Build and verify functions with prescribed cluster sets.
#[derive(Debug, Parser)]
#[command(name = "cluster-forge", version)]
struct Cli {
    command: Command,
    scene: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed tolerance instead of the scene-derived default.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Verify at this many probes spread over the keys of Phi.
    #[arg(long)]
    probes: Option<usize>,
    /// Override depths as n_max,k_max,K.
    #[arg(long, value_parser = parse_depths)]
    depths: Option<Depths>,
    /// Function file for `verify` (default: OUT/function.jsonl).
    #[arg(long)]
    function: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_depths(s: &str) -> Result<Depths, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [n, k, big_k] = parts.as_slice() else {
        return Err("expected n_max,k_max,K".to_string());
    };
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok(Depths {
        n_max: num(n)?,
        k_max: num(k)?,
        k_depth: num(big_k)?,
    })
}

/// Exit status: 0 all verifications pass, 1 a verification failed, 2 bad
/// scene or input, 3 construction failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Status(u8);

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CLUSTER_FORGE_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("CLUSTER_FORGE_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("CLUSTER_FORGE_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn write_artifacts(dir: &Path, a: &Artifacts, with_function: bool) -> Result<()> {
    fs::create_dir_all(dir.join("plot")).with_context(|| format!("creating {}", dir.display()))?;
    if with_function {
        fs::write(dir.join("function.jsonl"), &a.function_jsonl)?;
    }
    fs::write(dir.join("report.json"), &a.report_json)?;
    fs::write(dir.join("plot").join("distances.csv"), &a.distances_csv)?;
    if let Some(points) = &a.points_csv {
        fs::write(dir.join("plot").join("points.csv"), points)?;
    }
    Ok(())
}

fn summarize(label: &str, a: &Artifacts) -> Status {
    for note in &a.notes {
        println!("{label}: {note}");
    }
    for w in &a.warnings {
        eprintln!("warning: {w}");
    }
    let r = &a.report;
    let worst = r
        .worst
        .as_ref()
        .map_or("n/a".to_string(), |w| format!("{:.6} at {}", w.distance, w.probe));
    println!(
        "{label}: {} mode, tol {:.6} ({}), worst {worst}, verification {}",
        r.mode,
        r.tolerance_breakdown.total,
        r.tolerance_breakdown.formula,
        if r.verification_pass { "pass" } else { "FAIL" }
    );
    for c in &r.audit.checks {
        if !c.pass {
            println!(
                "{label}: audit {} failed ({} of {}): {}",
                c.name,
                c.violations,
                c.checked,
                c.first_violation.as_deref().unwrap_or("")
            );
        }
    }
    println!("{label}: {}", if r.pass { "PASS" } else { "FAIL" });
    Status(if r.pass { 0 } else { 1 })
}

fn fail(e: &PipelineError) -> Status {
    eprintln!("error: {e}");
    println!("{}", e.diagnostic());
    Status(e.exit_code() as u8)
}

fn construct(name: &str, text: &str, opts: &RunOptions, dir: &Path) -> Result<Status> {
    match run_construction(name, text, opts) {
        Ok(a) => {
            write_artifacts(dir, &a, true)?;
            Ok(summarize(name, &a))
        }
        Err(e) => Ok(fail(&e)),
    }
}

fn run(cli: &Cli) -> Result<Status> {
    init_threads()?;
    let text = fs::read_to_string(&cli.scene).with_context(|| format!("reading {}", cli.scene.display()))?;
    let opts = RunOptions {
        seed: cli.seed,
        tol: cli.tol,
        mode: cli.mode,
        probes: cli.probes,
        depths: cli.depths,
    };
    match cli.command {
        Command::Validate => match prepare_scene(&text, &opts) {
            Ok((_, summary)) => {
                println!("valid");
                println!("scene_hash {}", scene_hash(&text));
                println!(
                    "boundary {} points, {} keys, domain {}, value grid {} points",
                    summary.boundary_points,
                    summary.phi_keys,
                    summary
                        .domain_points
                        .map_or("free".to_string(), |n| format!("{n} points")),
                    summary.value_grid_points
                );
                println!("{:>14}  {:>14}", "delta", "usc_modulus");
                for row in &summary.modulus {
                    println!("{:>14.6e}  {:>14.6e}", row.delta, row.modulus);
                }
                Ok(Status(0))
            }
            Err(e) => Ok(fail(&e)),
        },
        Command::Lemma1 | Command::Thm1 | Command::Thm2 => {
            let name = match cli.command {
                Command::Lemma1 => "lemma1",
                Command::Thm1 => "thm1",
                _ => "thm2",
            };
            construct(name, &text, &opts, &cli.out)
        }
        Command::Verify => {
            let path = cli.function.clone().unwrap_or_else(|| cli.out.join("function.jsonl"));
            let f = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            match run_verify(&text, &f, &opts) {
                Ok(a) => {
                    write_artifacts(&cli.out, &a, false)?;
                    Ok(summarize("verify", &a))
                }
                Err(e) => Ok(fail(&e)),
            }
        }
        Command::All => {
            let scene = match prepare_scene(&text, &opts) {
                Ok((scene, _)) => scene,
                Err(e) => return Ok(fail(&e)),
            };
            let names: &[&str] = match scene.domain {
                Domain::Free => &["thm1"],
                Domain::Explicit(_) => &["lemma1", "thm2"],
            };
            let mut status = Status(0);
            for name in names {
                status = status.max(construct(name, &text, &opts, &cli.out.join(name))?);
            }
            Ok(status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status(code)) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
