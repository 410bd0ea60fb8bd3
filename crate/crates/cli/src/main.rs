use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use aemlab_core::mesh::{gen_disk_mesh, write_mesh};
use aemlab_core::output::{read_rows, InternalRow, TraceRow};
use aemlab_core::pipeline::{
    build_problem, demo_nonradiating, forward_stage, internal_stage, mesh_stats, qvec_from_rows, reconstruct_stage, run_pipeline,
    select_case, trace_from_rows, write_forward_artifacts, write_internal_artifacts, write_reconstruction_artifacts,
};
use aemlab_core::reconstruct::Truth;
use aemlab_core::scenario::{MeshSpec, ReferenceCase, ScenarioConfig};
use aemlab_core::validate::{run_suite, Suite};
use aemlab_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "aemlab", version, about = "Acousto-electromagnetic source reconstruction in a 2D disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Generate a disk mesh at this level instead of the configured mesh.
    #[arg(long)]
    refinement: Option<u32>,
    /// Run the k-space sweep on one thread.
    #[arg(long)]
    serial: bool,
    /// Noise seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated disk mesh.
    MeshGen {
        #[arg(long, default_value_t = 4)]
        refinement: u32,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Mesh file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward solve: fields, traces and coefficient map.
    Forward(Common),
    /// Forward solve plus internal data (direct or measured).
    Internal(Common),
    /// Reconstruct from `internal.csv` and `traces.csv` written by earlier stages.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Directory holding `internal.csv` and `traces.csv`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Full pipeline with report.
    Pipeline(Common),
    /// Gate suites.
    Validate {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 4)]
        refinement: u32,
    },
    /// Add a gradient source that leaves the boundary data unchanged.
    DemoNonradiating {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 2, value_names = ["X", "Y"], default_values_t = [-0.1, 0.2])]
        center: Vec<f64>,
        #[arg(long, default_value_t = 0.4)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Traces,
    Convergence,
    Identity,
    All,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Hypothesis => 3,
        ErrorKind::Solver => 4,
        ErrorKind::Io => 1,
    }
}

fn load_config(c: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::reference(ReferenceCase::II4, 4),
    };
    if let Some(level) = c.refinement {
        cfg.mesh = MeshSpec { level: Some(level), file: None, radius: cfg.mesh.radius };
    }
    if let Some(seed) = c.seed {
        cfg.noise.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &ScenarioConfig) -> PathBuf {
    c.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::MeshGen { refinement, radius, out } => {
            let mesh = gen_disk_mesh(radius, refinement)?;
            write_mesh(&mesh, &out)?;
            let stats = mesh_stats(&mesh, Some(refinement), 0);
            emit(&serde_json::to_string_pretty(&stats).expect("stats serialize"));
        }
        Command::Forward(c) => {
            let cfg = load_config(&c)?;
            let dir = out_dir(&c, &cfg);
            info!("forward solve");
            let fwd = forward_stage(&cfg)?;
            let artifacts = write_forward_artifacts(&cfg, &fwd, &dir)?;
            let summary = serde_json::json!({
                "mesh": mesh_stats(&fwd.problem.mesh, cfg.mesh.level, fwd.problem.cache.n_points()),
                "solve": fwd.solve,
                "impedance_mismatch": fwd.problem.extract_traces(&fwd.e).impedance_mismatch(cfg.medium.lambda),
                "artifacts": artifacts,
            });
            write_json(&dir.join("forward.json"), &summary)?;
            emit(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Internal(c) => {
            let cfg = load_config(&c)?;
            let dir = out_dir(&c, &cfg);
            info!("forward solve");
            let fwd = forward_stage(&cfg)?;
            info!("internal data");
            let stage = internal_stage(&cfg, &fwd, !c.serial)?;
            let mut artifacts = write_forward_artifacts(&cfg, &fwd, &dir)?;
            artifacts.extend(write_internal_artifacts(&fwd.problem, &stage, &dir)?);
            let v = &stage.vectorized;
            let summary = serde_json::json!({
                "modulated_solves": stage.modulated_solves,
                "flagged": v.flagged,
                "flagged_fraction": v.flagged_fraction(),
                "max_cond": v.max_cond,
                "median_cond": v.median_cond,
                "artifacts": artifacts,
            });
            write_json(&dir.join("internal.json"), &summary)?;
            emit(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Reconstruct { common: c, input } => {
            let cfg = load_config(&c)?;
            let dir = out_dir(&c, &cfg);
            let (classification, selection) = select_case(&cfg)?;
            let problem = build_problem(&cfg)?;
            let p = &problem;
            let qvec = qvec_from_rows(p, &read_rows::<InternalRow>(input.join("internal.csv"))?)?;
            let trace = trace_from_rows(p, &read_rows::<TraceRow>(input.join("traces.csv"))?)?;
            info!("reconstruction ({selection:?})");
            let truth = Truth { source: &cfg.source, e: None };
            let stage = reconstruct_stage(&cfg, p, selection, &qvec, &trace, None, Some(&truth))?;
            let artifacts = write_reconstruction_artifacts(p, &stage.result, &dir)?;
            let summary = serde_json::json!({
                "case": classification,
                "selection": selection,
                "errors": stage.result.errors,
                "pointwise_discrepancy": stage.result.pointwise_discrepancy,
                "solver": stage.result.solves,
                "artifacts": artifacts,
            });
            write_json(&dir.join("reconstruction.json"), &summary)?;
            emit(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Pipeline(c) => {
            let cfg = load_config(&c)?;
            let dir = out_dir(&c, &cfg);
            info!("pipeline '{}' into {}", cfg.name, dir.display());
            let mut run = run_pipeline(&cfg, !c.serial)?;
            run.write(&dir)?;
            emit(&run.report.to_json());
        }
        Command::Validate { suite, refinement } => {
            let suite = match suite {
                SuiteArg::Traces => Suite::Traces,
                SuiteArg::Convergence => Suite::Convergence,
                SuiteArg::Identity => Suite::Identity,
                SuiteArg::All => Suite::All,
            };
            let gates = run_suite(suite, refinement)?;
            for g in &gates {
                emit(&g.line());
            }
            return Ok(gates.iter().all(|g| g.passed));
        }
        Command::DemoNonradiating { common: c, center, radius, amplitude } => {
            let cfg = load_config(&c)?;
            let report = demo_nonradiating(&cfg, [center[0], center[1]], radius, amplitude)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(dir) = c.out.as_ref().or(cfg.output_dir.as_ref()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join("nonradiating.json");
                std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
            }
            emit(&text);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
