//! Command-line frontend. Exit codes: 0 success, 1 solver failure, 2 bad
//! config or arguments (nothing is written in that case).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    closest_oracle, convergence_table, convergence_table_exact, parameter_sweep, shooting_oracle_1d, BranchTrace, ConvergenceTable,
    ShootingOptions,
};
use crate::cbmfem::{cbmfem_run, LevelDiagnostics, SolutionSet};
use crate::companion::RootMode;
use crate::config::{parse_override, Problem, ProblemConfig};
use crate::error::Error;
use crate::export::{convergence_csv, diagnostics_csv, sweep_csv, write_json, PairFile, SolutionFile};
use crate::mesh::MeshHierarchy;
use crate::presets;
use crate::system::SystemBuilder;
use crate::systems::solve_system;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cbmfem", version, about = "Find multiple solutions of semilinear elliptic PDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the multilevel solver and write every level's solutions.
    Solve(ProblemArgs),
    /// Convergence tables for branches on the finest level.
    Converge(ConvergeArgs),
    /// Solution counts and branch summaries over a parameter range.
    Sweep(SweepArgs),
    /// Write the mesh hierarchy as JSON.
    Mesh(ProblemArgs),
    /// List the built-in problems, or print one.
    Presets { name: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RootModeArg {
    RealOnly,
    RealParts,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Problem config (TOML).
    #[arg(required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Use a built-in problem instead of a file.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Finest level index (overrides the config).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Parameter override, `name=value`; repeatable.
    #[arg(short = 'p', long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, value_enum)]
    pub root_mode: Option<RootModeArg>,
    /// Locality filter constant (`inf` disables).
    #[arg(long)]
    pub c1: Option<f64>,
    /// Convergence filter constant (`inf` disables).
    #[arg(long)]
    pub c2: Option<f64>,
    /// Boundedness filter constant (`inf` disables).
    #[arg(long)]
    pub c3: Option<f64>,
    /// Fill the timing columns of CSV output.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Differences between consecutive levels.
    Asymptotic,
    /// Errors against a shooting-method reference (1D scalar problems).
    Oracle,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "asymptotic")]
    pub mode: Mode,
    /// Finest-level branch id, or `all`.
    #[arg(long, default_value = "all")]
    pub branch: String,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Parameter to vary (default: the config's sweep). A bare `--param NAME`
    /// without `=` means the same.
    #[arg(long = "sweep-param", visible_alias = "vary")]
    pub sweep_param: Option<String>,
    /// Comma-separated values, strictly monotone.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
}

enum Fail {
    Config(String),
    Solver(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Fail::Config(m),
            other => Fail::Solver(other.to_string()),
        }
    }
}

type CmdResult = std::result::Result<i32, Fail>;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // Fails only if a pool already exists (repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let res = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Mesh(a) => cmd_mesh(a),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    };
    match res {
        Ok(code) => code,
        Err(Fail::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(Fail::Solver(m)) => {
            eprintln!("error: {m}");
            EXIT_SOLVER
        }
    }
}

/// Config with command-line overrides applied.
pub fn load(a: &ProblemArgs) -> Result<ProblemConfig, Error> {
    let mut cfg = match (&a.config, &a.preset) {
        (_, Some(name)) => presets::load(name)?,
        (Some(path), None) => ProblemConfig::from_path(path)?,
        (None, None) => return Err(Error::Config("no config file or --preset given".into())),
    };
    if !a.params.is_empty() {
        let overrides = a.params.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
        cfg = cfg.with_parameters(&overrides)?;
    }
    if let Some(l) = a.levels {
        cfg.levels = l;
    }
    let s = &mut cfg.solver;
    if let Some(m) = a.root_mode {
        s.root_mode = match m {
            RootModeArg::RealOnly => RootMode::RealOnly,
            RootModeArg::RealParts => RootMode::RealParts,
        };
    }
    for (slot, v) in [(&mut s.c1, a.c1), (&mut s.c2, a.c2), (&mut s.c3, a.c3)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    s.validate().map_err(|e| Error::Config(format!("solver options: {e}")))?;
    Ok(cfg)
}

fn create_out(dir: &Path) -> Result<(), Fail> {
    std::fs::create_dir_all(dir).map_err(|e| Fail::Solver(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Fail> {
    std::fs::write(path, text).map_err(|e| Fail::Solver(format!("cannot write {}: {e}", path.display())))
}

fn print_counts(diags: &[LevelDiagnostics]) {
    println!("{:>5} {:>12} {:>10} {:>10}", "level", "h", "guesses", "solutions");
    for d in diags {
        println!("{:>5} {:>12.4e} {:>10} {:>10}", d.level, d.h, d.guesses, d.solutions);
    }
}

fn report_failure(failure: &Option<String>) {
    if let Some(f) = failure {
        eprintln!("solver stopped: {f}");
    }
}

fn finest_count(levels: usize, counts: impl Iterator<Item = (usize, usize)>) -> usize {
    counts.filter(|(l, _)| *l == levels).map(|(_, n)| n).next().unwrap_or(0)
}

fn cmd_solve(a: &ProblemArgs) -> CmdResult {
    let cfg = load(a)?;
    let hier = cfg.problem.hierarchy(cfg.levels)?;
    let (diags, failure, finest) = match &cfg.problem {
        Problem::Scalar(spec) => {
            let run = cbmfem_run(spec, &hier, &cfg.solver);
            create_out(&a.out)?;
            for set in &run.sets {
                write_json(&a.out.join(format!("level_{}.json", set.level)), &SolutionFile::from(set))?;
            }
            let n = finest_count(cfg.levels, run.sets.iter().map(|s| (s.level, s.len())));
            (run.diagnostics, run.failure, n)
        }
        Problem::TwoField(spec) => {
            let run = solve_system(spec, &hier, &cfg.solver);
            create_out(&a.out)?;
            for set in &run.sets {
                write_json(&a.out.join(format!("level_{}.json", set.level)), &PairFile::from(set))?;
            }
            let n = finest_count(cfg.levels, run.sets.iter().map(|s| (s.level, s.len())));
            (run.diagnostics, run.failure, n)
        }
    };
    write_text(&a.out.join("diagnostics.csv"), &diagnostics_csv(&diags, a.timings)?)?;
    print_counts(&diags);
    report_failure(&failure);
    println!("{}: {finest} solution(s) at level {}", cfg.name, cfg.levels);
    Ok(if finest > 0 { EXIT_OK } else { EXIT_SOLVER })
}

/// Scalar run, or the reduced unknown of a two-field system.
fn run_for_tables(cfg: &ProblemConfig, hier: &MeshHierarchy) -> (Vec<SolutionSet>, Vec<LevelDiagnostics>, Option<String>) {
    let r = match &cfg.problem {
        Problem::Scalar(spec) => cbmfem_run(spec, hier, &cfg.solver),
        Problem::TwoField(spec) => cbmfem_run(spec, hier, &cfg.solver),
    };
    (r.sets, r.diagnostics, r.failure)
}

fn cmd_converge(a: &ConvergeArgs) -> CmdResult {
    let cfg = load(&a.problem)?;
    let wanted: Option<usize> = match a.branch.as_str() {
        "all" => None,
        s => Some(s.parse().map_err(|_| Fail::Config(format!("--branch expects an id or 'all', got '{s}'")))?),
    };
    let oracle = match a.mode {
        Mode::Asymptotic => None,
        Mode::Oracle => {
            let Problem::Scalar(spec) = &cfg.problem else {
                return Err(Fail::Config("oracle mode needs a scalar problem".into()));
            };
            let bracket = cfg
                .oracle_bracket
                .ok_or_else(|| Fail::Config(format!("{}: oracle mode needs analysis.oracle_bracket", cfg.name)))?;
            let sols = shooting_oracle_1d(spec, bracket, &ShootingOptions::default()).map_err(|e| Fail::Config(e.to_string()))?;
            log::info!("shooting oracle found {} solution(s)", sols.len());
            Some(sols)
        }
    };
    let hier = cfg.problem.hierarchy(cfg.levels)?;
    let (sets, diags, failure) = run_for_tables(&cfg, &hier);
    report_failure(&failure);
    let Some(finest) = sets.last().filter(|s| s.level == cfg.levels) else {
        eprintln!("no solutions reached level {}", cfg.levels);
        return Ok(EXIT_SOLVER);
    };
    let ids: Vec<usize> = match wanted {
        Some(id) if finest.get(id).is_none() => {
            return Err(Fail::Config(format!("branch {id} does not exist on level {} ({} branches)", cfg.levels, finest.len())))
        }
        Some(id) => vec![id],
        None => finest.records.iter().map(|r| r.id).collect(),
    };
    let fine_mesh = hier.finest();
    let mut tables: Vec<ConvergenceTable> = Vec::new();
    for id in ids {
        let table = match &oracle {
            None => convergence_table(&hier, &sets, &diags, id),
            Some(sols) => {
                let u = &finest.get(id).expect("listed id").u.values;
                match closest_oracle(fine_mesh, u, sols) {
                    Some((k, dev)) if dev < 0.1 * (1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()))) => {
                        let sol = &sols[k];
                        convergence_table_exact(&hier, &sets, &diags, id, &|x| {
                            let (v, d) = sol.sample(x[0]);
                            (v, [d, 0.0])
                        })
                    }
                    _ => Err(Error::InvalidInput(format!("branch {id} matches no oracle solution"))),
                }
            }
        };
        match table {
            Ok(t) => tables.push(t),
            Err(e) => eprintln!("branch {id}: not traceable: {e}"),
        }
    }
    if tables.is_empty() {
        eprintln!("no branch could be traced");
        return Ok(EXIT_SOLVER);
    }
    create_out(&a.problem.out)?;
    for t in &tables {
        let csv = convergence_csv(t, a.problem.timings)?;
        write_text(&a.problem.out.join(format!("convergence_branch{}.csv", t.branch)), &csv)?;
        println!("branch {}", t.branch);
        println!("{:>12} {:>12} {:>6} {:>12} {:>6}", "h", "L2 err", "order", "H1 err", "order");
        for r in &t.rows {
            let order = |o: f64| if o.is_nan() { "-".to_string() } else { format!("{o:.2}") };
            println!("{:>12.4e} {:>12.4e} {:>6} {:>12.4e} {:>6}", r.h, r.l2_err, order(r.l2_order), r.h1_err, order(r.h1_order));
        }
    }
    write_text(&a.problem.out.join("diagnostics.csv"), &diagnostics_csv(&diags, a.problem.timings)?)?;
    Ok(EXIT_OK)
}

fn sweep_with<B, F>(param: &str, values: &[f64], make: F, cfg: &ProblemConfig) -> Result<BranchTrace, Fail>
where
    B: SystemBuilder,
    F: Fn(f64) -> crate::Result<(B, MeshHierarchy)>,
{
    Ok(parameter_sweep(param, values, make, &cfg.solver, cfg.probe)?)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let (bare, overrides): (Vec<String>, Vec<String>) = a.problem.params.iter().cloned().partition(|p| !p.contains('='));
    if bare.len() > 1 || (bare.len() == 1 && a.sweep_param.is_some()) {
        return Err(Fail::Config("give exactly one sweep parameter".into()));
    }
    let cfg = load(&ProblemArgs { params: overrides, ..a.problem.clone() })?;
    let param = a
        .sweep_param
        .clone()
        .or_else(|| bare.first().cloned())
        .or_else(|| cfg.sweep.as_ref().map(|s| s.param.clone()))
        .ok_or_else(|| Fail::Config("no sweep parameter: pass --sweep-param or set analysis.sweep".into()))?;
    let values = a
        .values
        .clone()
        .or_else(|| cfg.sweep.as_ref().map(|s| s.values.clone()))
        .ok_or_else(|| Fail::Config("no sweep values: pass --values or set analysis.sweep".into()))?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Fail::Config("sweep values must be finite and non-empty".into()));
    }
    let up = values.windows(2).all(|w| w[0] < w[1]);
    let down = values.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(Fail::Config("sweep values must be strictly monotone".into()));
    }
    // Surfaces an unknown parameter as a config error before any solving.
    cfg.with_parameters(&[(param.clone(), values[0])])?;
    let levels = cfg.levels;
    let at = |v: f64| cfg.with_parameters(&[(param.clone(), v)]);
    let trace = match &cfg.problem {
        Problem::Scalar(_) => sweep_with(
            &param,
            &values,
            |v| match at(v)?.problem {
                Problem::Scalar(s) => {
                    let h = s.hierarchy(levels)?;
                    Ok((s, h))
                }
                Problem::TwoField(_) => unreachable!("problem kind is fixed by the config"),
            },
            &cfg,
        )?,
        Problem::TwoField(_) => sweep_with(
            &param,
            &values,
            |v| match at(v)?.problem {
                Problem::TwoField(s) => {
                    let h = s.hierarchy(levels)?;
                    Ok((s, h))
                }
                Problem::Scalar(_) => unreachable!("problem kind is fixed by the config"),
            },
            &cfg,
        )?,
    };
    create_out(&a.problem.out)?;
    write_text(&a.problem.out.join("sweep.csv"), &sweep_csv(&trace)?)?;
    println!("{:>12} {:>6}", param, "count");
    for p in &trace.points {
        println!("{:>12} {:>6}", p.param, p.count);
        report_failure(&p.failure);
    }
    Ok(if trace.points.iter().any(|p| p.count > 0) { EXIT_OK } else { EXIT_SOLVER })
}

fn cmd_mesh(a: &ProblemArgs) -> CmdResult {
    let cfg = load(a)?;
    let hier = cfg.problem.hierarchy(cfg.levels)?;
    create_out(&a.out)?;
    for m in &hier.levels {
        write_json(&a.out.join(format!("mesh_level{}.json", m.level)), &m.to_export())?;
        println!("level {}: {} nodes, {} elements, h = {:e}", m.level, m.node_count(), m.element_count(), m.h);
    }
    Ok(EXIT_OK)
}

fn cmd_presets(name: Option<&str>) -> CmdResult {
    match name {
        None => {
            for n in presets::NAMES {
                println!("{n}");
            }
        }
        Some(n) => {
            let src = presets::source(n).ok_or_else(|| Fail::Config(format!("unknown preset '{n}'")))?;
            print!("{src}");
        }
    }
    Ok(EXIT_OK)
}
