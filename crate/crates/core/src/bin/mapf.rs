use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mapf_core::conflicts::conflict_stats;
use mapf_core::grid::{generate_urban_map, line_of_sight, load_map, serialize_map};
use mapf_core::harness::{
    collision_oracle, emit_report, generate_scenario, parse_scenario, read_solution, run_pipeline,
    write_solution, Allocation, PipelineConfig, ReportFormat, ScenarioSpec,
};
use mapf_core::{Error, Grid, MapGenParams, PlannerKind, SafetyRadius};

const EXIT_PLAN_FAILED: u8 = 2;
const EXIT_RESOLVE_ABORTED: u8 = 3;
const EXIT_VIOLATIONS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mapf",
    version,
    about = "Any-angle multi-agent path finding with conflict resolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan every agent independently, then resolve conflicts
    Plan(PlanArgs),
    /// Check a solution file for obstacle hits and collisions
    Verify(VerifyArgs),
    /// Generate a city-like map
    Genmap(GenmapArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Map file
    #[arg(long)]
    map: PathBuf,
    /// Scenario file with `start_i start_j goal_i goal_j` lines
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    scenario: Option<PathBuf>,
    /// Generate a scenario instead of reading one
    #[arg(long, value_parser = parse_allocation)]
    gen: Option<Allocation>,
    /// Number of agents for a generated scenario
    #[arg(long, default_value_t = 100)]
    agents: usize,
    /// Border band width for type1 scenarios
    #[arg(long, default_value_t = 50)]
    margin: usize,
    /// Cluster side for type2 scenarios
    #[arg(long, default_value_t = 50)]
    cluster: usize,
    #[arg(long, default_value_t = PlannerKind::Theta, value_parser = parse_planner)]
    planner: PlannerKind,
    #[arg(long, default_value_t = 5)]
    delta: i32,
    /// Maximum alteration angle in degrees
    #[arg(long, default_value_t = 25.0)]
    alpha_max: f64,
    /// Take-off delay added per offset adjustment
    #[arg(long, default_value_t = 5.0)]
    wait: f64,
    /// Safety radius
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-agent refinement budget before resolution aborts
    #[arg(long, default_value_t = 100_000)]
    max_refinement_steps: usize,
    /// Solution output (json)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report output; format from the extension (json, csv, txt)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write zero timings so reports are reproducible byte for byte
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Oracle sample step
    #[arg(long, default_value_t = 0.05)]
    ds: f64,
}

#[derive(Args)]
struct GenmapArgs {
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    /// Target fraction of blocked cells
    #[arg(long, default_value_t = 0.22)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_allocation(s: &str) -> Result<Allocation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.parse()
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_map(path: &Path) -> Result<Grid, Error> {
    load_map(&read(path)?)
}

fn plan(args: PlanArgs) -> Result<ExitCode, Error> {
    let grid = read_map(&args.map)?;
    let queries = match (&args.scenario, args.gen) {
        (Some(path), _) => parse_scenario(&read(path)?)?,
        (None, Some(alloc)) => {
            let spec = ScenarioSpec::new(args.agents, alloc, args.seed)
                .with_border_margin(args.margin)
                .with_cluster_size(args.cluster);
            generate_scenario(&grid, &spec)?
        }
        (None, None) => unreachable!("clap requires --scenario or --gen"),
    };
    let radius = SafetyRadius::new(args.radius)?;
    let label = match args.gen {
        Some(alloc) => format!("{}-{alloc}-{}", args.planner, args.seed),
        None => format!("{}-{}", args.planner, args.map.display()),
    };
    let mut cfg = PipelineConfig::new(args.planner)
        .with_label(label)
        .with_params(args.delta, args.alpha_max, args.wait, radius);
    cfg.resolver.max_refinement_steps = args.max_refinement_steps;

    let run = run_pipeline(&grid, &queries, &cfg)?;
    let metrics = if args.no_timings {
        run.metrics.clone().without_timings()
    } else {
        run.metrics.clone()
    };

    if let Some(path) = &args.out {
        write(path, &write_solution(&run.solution)?)?;
    }
    if let Some(path) = &args.report {
        let format = ReportFormat::from_path(path).unwrap_or(ReportFormat::Json);
        write(path, &emit_report(std::slice::from_ref(&metrics), format)?)?;
    }
    print!(
        "{}",
        emit_report(std::slice::from_ref(&metrics), ReportFormat::Table)?
    );

    for (id, err) in &run.plan_failures {
        eprintln!("agent {id}: {err}");
    }
    if !run.plan_failures.is_empty() {
        return Ok(ExitCode::from(EXIT_PLAN_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let grid = read_map(&args.map)?;
    let ps = read_solution(&read(&args.solution)?)?;
    let radius = SafetyRadius::new(args.radius)?;

    let mut blocked = 0;
    for p in &ps.psolutions {
        for (k, s) in p.path.sections().iter().enumerate() {
            if !line_of_sight(&grid, s.sp(), s.ep()).unwrap_or(false) {
                eprintln!(
                    "agent {}: section {k} crosses an obstacle or leaves the map",
                    p.agent_id
                );
                blocked += 1;
            }
        }
    }
    let stats = conflict_stats(&ps.psolutions, radius);
    let oracle = collision_oracle(&ps.psolutions, radius.get(), args.ds)?;
    for v in &oracle {
        eprintln!(
            "agents {} and {}: ({:.3}, {:.3}) at g={:.3} vs ({:.3}, {:.3}) at g={:.3}",
            v.agent_a, v.agent_b, v.point_a.i, v.point_a.j, v.g_a, v.point_b.i, v.point_b.j, v.g_b
        );
    }
    println!(
        "agents {}  blocked_sections {blocked}  section_conflicts {}  agent_conflicts {}  oracle_violations {}",
        ps.len(),
        stats.section_conflicts,
        stats.agent_conflicts,
        oracle.len()
    );
    if blocked + stats.section_conflicts + oracle.len() > 0 {
        return Ok(ExitCode::from(EXIT_VIOLATIONS));
    }
    Ok(ExitCode::SUCCESS)
}

fn genmap(args: GenmapArgs) -> Result<ExitCode, Error> {
    let grid = generate_urban_map(&MapGenParams::new(
        args.height,
        args.width,
        args.density,
        args.seed,
    ))?;
    let text = serialize_map(&grid);
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => plan(a),
        Command::Verify(a) => verify(a),
        Command::Genmap(a) => genmap(a),
    };
    match result {
        Ok(code) => code,
        Err(e @ Error::Resolve(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RESOLVE_ABORTED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
