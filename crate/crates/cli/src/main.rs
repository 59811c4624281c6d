//! `arrowhead`: presolve, verify and generate arrowhead LPs.
//!
//! Exit codes: 0 success, 1 I/O error, 2 usage error, 3 parse or annotation
//! error, 10 infeasible, 11 unbounded, 12 internal fault, 13 KKT check
//! failed, 14 problem exceeds the oracle cap.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use arrowhead::comm::ExecMode;
use arrowhead::error::{PostsolveError, PresolveError};
use arrowhead::generator::{generate, GenSpec};
use arrowhead::io::{self, IoError, StatsReport};
use arrowhead::model::{BlockProblem, LpProblem};
use arrowhead::oracle::{self, LpStatus, OracleError};
use arrowhead::postsolve::{kkt_residuals, postsolve, PostsolveStack, PrimalDualSolution};
use arrowhead::presolve::{presolve, PresolveConfig, Presolver};

const KKT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "arrowhead", version, about = "Structure-preserving presolve for arrowhead LPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Presolve an annotated MPS file and write the reduced problem.
    Presolve(PresolveArgs),
    /// Round-trip check: presolve, solve the reduced problem, postsolve, check KKT.
    Verify(VerifyArgs),
    /// Emit a seeded random arrowhead instance.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, env = "ARROWHEAD_MPS")]
    mps: PathBuf,
    /// Block annotation file.
    #[arg(long, env = "ARROWHEAD_BLOCKS")]
    blocks: PathBuf,
    #[arg(long, env = "ARROWHEAD_RANKS", default_value_t = 1)]
    ranks: usize,
    /// `lockstep` or `threaded`.
    #[arg(long, env = "ARROWHEAD_MODE", default_value = "lockstep")]
    mode: ExecMode,
    #[arg(long, env = "ARROWHEAD_MAX_ROUNDS")]
    max_rounds: Option<usize>,
    #[arg(long, env = "ARROWHEAD_FEASTOL")]
    feastol: Option<f64>,
    /// Presolver to skip; repeatable.
    #[arg(long, env = "ARROWHEAD_DISABLE", value_delimiter = ',')]
    disable: Vec<Presolver>,
}

#[derive(Args)]
struct PresolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output prefix for `.mps`, `.blk`, `.stack.json` and `.stats.json`.
    #[arg(long, env = "ARROWHEAD_OUT")]
    out: PathBuf,
    /// Statistics path, overriding `<out>.stats.json`.
    #[arg(long, env = "ARROWHEAD_STATS")]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Postsolve stack from an earlier `presolve`; requires `--reduced`.
    #[arg(long, requires = "reduced")]
    stack: Option<PathBuf>,
    /// Reduced MPS file matching `--stack`.
    #[arg(long, requires = "stack")]
    reduced: Option<PathBuf>,
    /// Write the recovered primal-dual solution here.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output prefix for `.mps`, `.blk` and `.manifest.json`.
    #[arg(long, env = "ARROWHEAD_OUT")]
    out: PathBuf,
    #[arg(long, env = "ARROWHEAD_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of diagonal blocks.
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    /// Rows per block.
    #[arg(long, default_value_t = 10)]
    rows: usize,
    /// Columns per block.
    #[arg(long, default_value_t = 12)]
    cols: usize,
    #[arg(long, default_value_t = 3)]
    linking_rows: usize,
    #[arg(long, default_value_t = 4)]
    linking_cols: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    plant_duplicates: f64,
    #[arg(long, default_value_t = 0.0)]
    plant_singletons: f64,
    #[arg(long, default_value_t = 0.0)]
    plant_empty: f64,
    #[arg(long, default_value_t = 0.0)]
    plant_fixed: f64,
    #[arg(long, default_value_t = 0.0)]
    plant_dependent: f64,
    #[arg(long, default_value_t = 0.0)]
    plant_misplaced: f64,
}

/// A failed command: exit code and message.
struct Fail(u8, String);

impl From<IoError> for Fail {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::Io { .. } => 1,
            IoError::Parse { .. } | IoError::Annotation(_) | IoError::Structure(_) => 3,
            IoError::Stack(_) => 12,
        };
        Fail(code, e.to_string())
    }
}

impl From<PresolveError> for Fail {
    fn from(e: PresolveError) -> Self {
        let code = match e {
            PresolveError::Infeasible(_) => 10,
            PresolveError::Unbounded(_) => 11,
            PresolveError::InvalidInput(_) => 2,
            PresolveError::Internal(_) | PresolveError::Protocol(_) => 12,
        };
        Fail(code, e.to_string())
    }
}

impl From<PostsolveError> for Fail {
    fn from(e: PostsolveError) -> Self {
        Fail(12, e.to_string())
    }
}

impl From<OracleError> for Fail {
    fn from(e: OracleError) -> Self {
        let code = if matches!(e, OracleError::TooLarge { .. }) { 14 } else { 12 };
        Fail(code, format!("oracle: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Presolve(a) => cmd_presolve(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Generate(a) => cmd_generate(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

impl ProblemArgs {
    fn config(&self) -> Result<PresolveConfig, Fail> {
        let mut cfg = PresolveConfig::default();
        if let Some(r) = self.max_rounds {
            cfg.max_rounds = r;
        }
        if let Some(t) = self.feastol {
            cfg.feastol = t;
        }
        for p in &self.disable {
            cfg.enabled.remove(p);
        }
        cfg.validate().map_err(|e| Fail(2, e.to_string()))?;
        Ok(cfg)
    }

    fn load(&self) -> Result<(LpProblem, BlockProblem), Fail> {
        let lp = io::read_mps(&self.mps)?;
        let a = io::read_blocks(&self.blocks, &lp)?;
        let p = BlockProblem::split(&lp, &a).map_err(|e| Fail(3, e))?;
        if self.ranks == 0 || self.ranks > p.n_blocks {
            return Err(Fail(2, format!("--ranks must be in 1..={}", p.n_blocks)));
        }
        Ok((lp, p))
    }
}

fn cmd_presolve(a: &PresolveArgs) -> Result<(), Fail> {
    let cfg = a.problem.config()?;
    let (lp, p) = a.problem.load()?;
    let start = Instant::now();
    let res = presolve(&p, a.problem.ranks, a.problem.mode, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();

    let (reduced, _, assignment) = res.reduced.assemble();
    io::write_mps(&reduced, &with_ext(&a.out, ".mps"))?;
    io::write_blocks(&reduced, &assignment, &with_ext(&a.out, ".blk"))?;
    io::write_stacks(&res.stacks, &with_ext(&a.out, ".stack.json"))?;
    let instance = if lp.name.is_empty() { a.problem.mps.display().to_string() } else { lp.name.clone() };
    let report = StatsReport::new(&instance, a.problem.ranks, a.problem.mode, &res, seconds);
    let stats = a.stats.clone().unwrap_or_else(|| with_ext(&a.out, ".stats.json"));
    io::write_stats(&report, &stats)?;

    println!("{}", StatsReport::table_header());
    println!("{}", report.table_row());
    println!(
        "rows {} -> {}, cols {} -> {}, nonzeros {} -> {}, rounds {}",
        report.original.rows,
        report.reduced.rows,
        report.original.cols,
        report.reduced.cols,
        report.original.nnz,
        report.reduced.nnz,
        report.rounds
    );
    Ok(())
}

fn oracle_status(status: &LpStatus, what: &str) -> Result<(), Fail> {
    match status {
        LpStatus::Optimal => Ok(()),
        LpStatus::Infeasible(m) => Err(Fail(10, format!("{what} is infeasible: {m}"))),
        LpStatus::Unbounded => Err(Fail(11, format!("{what} is unbounded"))),
    }
}

/// Oracle solution of a reduced MPS file, placed at the original ids by name.
fn solve_reduced_file(lp: &LpProblem, path: &Path) -> Result<PrimalDualSolution, Fail> {
    let red = io::read_mps(path)?;
    let sol = oracle::solve(&red)?;
    oracle_status(&sol.status, "reduced problem")?;
    let cols: HashMap<&str, usize> = lp.vars.iter().enumerate().map(|(j, v)| (v.name.as_str(), j)).collect();
    let rows: HashMap<&str, usize> = (0..lp.n_rows()).map(|id| (lp.row_name(id), id)).collect();
    let mut out = PrimalDualSolution::zeros(lp.id_space());
    for (k, v) in red.vars.iter().enumerate() {
        let j = *cols.get(v.name.as_str()).ok_or_else(|| Fail(3, format!("reduced column '{}' not in the original", v.name)))?;
        out.x[j] = sol.x[k];
        out.z[j] = sol.z[k];
    }
    for id in 0..red.n_rows() {
        let name = red.row_name(id);
        let r = *rows.get(name).ok_or_else(|| Fail(3, format!("reduced row '{name}' not in the original")))?;
        out.y[r] = sol.y[id];
    }
    Ok(out)
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), Fail> {
    let cfg = a.problem.config()?;
    let (lp, p) = a.problem.load()?;
    let (stacks, reduced): (Vec<PostsolveStack>, PrimalDualSolution) = match (&a.stack, &a.reduced) {
        (Some(stack), Some(red)) => (io::read_stacks(stack)?, solve_reduced_file(&lp, red)?),
        _ => {
            let res = presolve(&p, a.problem.ranks, a.problem.mode, &cfg)?;
            let (sol, by_id) = oracle::solve_block_problem(&res.reduced)?;
            oracle_status(&sol.status, "reduced problem")?;
            (res.stacks, by_id)
        }
    };
    let mode = a.problem.mode;
    // A damaged stack can fail an index check deep in the replay.
    let restored = std::panic::catch_unwind(|| postsolve(&lp, &stacks, &reduced, mode))
        .map_err(|_| Fail(12, "postsolve aborted on an inconsistent stack".into()))??;
    if let Some(path) = &a.solution {
        io::write_solution(&lp, &restored, path)?;
    }
    let kkt = kkt_residuals(&lp, &restored);
    println!("objective            {:.12e}", lp.objective(&restored.x));
    println!("primal residual      {:.3e}", kkt.primal);
    println!("dual residual        {:.3e}", kkt.dual);
    println!("complementarity      {:.3e}", kkt.complementarity);
    println!("objective gap        {:.3e}", kkt.objective_gap);
    if kkt.within(KKT_TOL) {
        println!("KKT check passed (tol {KKT_TOL:e})");
        Ok(())
    } else {
        Err(Fail(13, format!("KKT check failed: max violation {:.3e} > {KKT_TOL:e}", kkt.max())))
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<(), Fail> {
    let spec = GenSpec {
        seed: a.seed,
        n_blocks: a.blocks,
        rows_per_block: a.rows,
        cols_per_block: a.cols,
        linking_rows: a.linking_rows,
        linking_cols: a.linking_cols,
        density: a.density,
        duplicate_fraction: a.plant_duplicates,
        singleton_fraction: a.plant_singletons,
        empty_fraction: a.plant_empty,
        fixed_fraction: a.plant_fixed,
        dependent_fraction: a.plant_dependent,
        misplaced_fraction: a.plant_misplaced,
        ..GenSpec::default()
    };
    let g = generate(&spec).map_err(|e| Fail(2, format!("invalid generator spec: {e}")))?;
    io::write_mps(&g.lp, &with_ext(&a.out, ".mps"))?;
    io::write_blocks(&g.lp, &g.assignment, &with_ext(&a.out, ".blk"))?;
    let manifest = serde_json::to_string_pretty(&g.manifest).map_err(|e| Fail(12, e.to_string()))? + "\n";
    let path = with_ext(&a.out, ".manifest.json");
    std::fs::write(&path, manifest).map_err(|e| Fail(1, format!("{}: {e}", path.display())))?;
    println!(
        "wrote {} rows, {} columns, {} nonzeros in {} blocks",
        g.lp.n_rows(),
        g.lp.n_cols(),
        g.lp.nnz(),
        g.assignment.n_blocks
    );
    Ok(())
}
