//! `ila`: validate, simulate and check instruction-level abstraction models.
//!
//! Exit status: 0 proved (or success), 1 counterexample, 2 usage, parse or
//! validation error, 3 unknown.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ila_core::io::{serialize_report, serialize_trace, MappingFile};
use ila_core::smt::{emit_smtlib, reprint};
use ila_core::{
    check_decode_onehot, check_equiv, check_fsm_refinement, check_invariant_inductive, overall, pair_by_name, parse_fsm, parse_mapping,
    parse_model, parse_refinement, parse_trace, BruteConfig, CheckReport, Engine, IlaModel, InitValue, Machine, Query, SolverConfig,
    StateMapping, TransitionSystem, UfTable, Valuation, Value,
};

#[derive(Parser)]
#[command(name = "ila", version, about = "Check and simulate instruction-level abstraction models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineKind {
    /// Exhaustive search (small queries only)
    Brute,
    /// External SMT solver
    Solver,
    /// Exhaustive search within the bit budget, the solver beyond it
    Auto,
}

#[derive(Args)]
struct EngineOpts {
    #[arg(long, value_enum, default_value = "auto")]
    engine: EngineKind,
    /// Solver command; `{file}` stands for the script path, otherwise the
    /// script goes to standard input
    #[arg(long, env = "ILA_SOLVER", default_value = "z3 -smt2 {file}")]
    solver_cmd: String,
    /// Per-query solver timeout in seconds
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Obligations checked at once (default: one per core)
    #[arg(long)]
    jobs: Option<usize>,
}

impl EngineOpts {
    fn engine(&self) -> Engine {
        let solver = SolverConfig { timeout: Duration::from_secs(self.timeout), ..SolverConfig::new(self.solver_cmd.clone()) };
        match self.engine {
            EngineKind::Brute => Engine::Brute(BruteConfig::default()),
            EngineKind::Solver => Engine::Solver(solver),
            EngineKind::Auto => Engine::Auto { brute: BruteConfig::default(), solver: Some(solver) },
        }
    }

    fn init_jobs(&self) -> Result<()> {
        if let Some(j) = self.jobs {
            rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().context("cannot set up worker threads")?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that every ILA's decodes are one-hot and cover its valid set
    Validate {
        model: PathBuf,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Run a model on an input trace and print the resulting trace
    Sim {
        model: PathBuf,
        /// Input trace (`init` and `step` lines); without it every input is drawn from the seed
        trace: Option<PathBuf>,
        /// Number of steps; extra steps get seeded random inputs
        #[arg(long)]
        steps: Option<usize>,
        /// Seed for unconstrained initial values, missing inputs and uninterpreted functions
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every variable after each step, not only the changed ones
        #[arg(long)]
        dump_state: bool,
    },
    /// Instruction-level equivalence of two models
    CheckEq {
        a: PathBuf,
        b: PathBuf,
        /// Mapping file; defaults to same-named state and instructions
        #[arg(long)]
        map: Option<PathBuf>,
        /// Step bound for every completion check
        #[arg(long)]
        bound: Option<usize>,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Refinement of a model by a state machine
    CheckFsm {
        model: PathBuf,
        fsm: PathBuf,
        /// Refinement file
        #[arg(long = "ref")]
        refinement: PathBuf,
        /// Implementation steps explored per instruction
        #[arg(long)]
        bound: Option<usize>,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Write the SMT-LIB scripts of a check without solving them: decode
    /// checks of MODEL, equivalence with --against, or refinement with --fsm
    EmitSmt {
        model: PathBuf,
        /// Second model for equivalence checks
        #[arg(long, conflicts_with = "fsm")]
        against: Option<PathBuf>,
        #[arg(long, requires = "against")]
        map: Option<PathBuf>,
        /// State machine for refinement checks
        #[arg(long, requires = "refinement")]
        fsm: Option<PathBuf>,
        #[arg(long = "ref", requires = "fsm")]
        refinement: Option<PathBuf>,
        #[arg(long)]
        bound: Option<usize>,
        /// Directory for one `.smt2` file per query; standard output otherwise
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_model(path: &Path) -> Result<IlaModel> {
    parse_model(&read(path)?).map_err(|d| anyhow!("{}:\n{d}", path.display()))
}

fn load_fsm(path: &Path) -> Result<TransitionSystem> {
    parse_fsm(&read(path)?).map_err(|d| anyhow!("{}:\n{d}", path.display()))
}

fn load_mapping(path: Option<&Path>, a: &IlaModel, b: &IlaModel, bound: Option<usize>) -> Result<MappingFile> {
    let mut mf = match path {
        Some(p) => parse_mapping(&read(p)?, a, b).map_err(|d| anyhow!("{}:\n{d}", p.display()))?,
        None => MappingFile { map: StateMapping::identity(a, b), instructions: pair_by_name(a, b), completions: Vec::new() },
    };
    if let Some(k) = bound {
        for c in &mut mf.completions {
            c.bound = k;
        }
    }
    Ok(mf)
}

fn load_refinement(model: &IlaModel, fsm: &TransitionSystem, path: &Path, bound: Option<usize>) -> Result<ila_core::RefinementSpec> {
    let mut r = parse_refinement(&read(path)?, model, fsm).map_err(|d| anyhow!("{}:\n{d}", path.display()))?.spec;
    if let Some(k) = bound {
        r.bound = k;
    }
    Ok(r)
}

/// Status table, then the full text of every report that is not proved.
fn render(reports: &[CheckReport]) -> String {
    let w = reports.iter().map(|r| r.id.len()).max().unwrap_or(0).max("obligation".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<w$}  {:<14}  {:<6}  queries", "obligation", "status", "engine");
    for r in reports {
        let _ = writeln!(out, "{:<w$}  {:<14}  {:<6}  {}", r.id, r.status.name(), r.engine, r.queries);
    }
    for r in reports.iter().filter(|r| !r.is_proved()) {
        out.push('\n');
        out.push_str(&serialize_report(r));
    }
    let _ = writeln!(out, "\noverall {}", overall(reports));
    out
}

fn status_code(reports: &[CheckReport]) -> u8 {
    match overall(reports) {
        "proved" => 0,
        "counterexample" => 1,
        _ => 3,
    }
}

fn report(reports: &[CheckReport]) -> u8 {
    print!("{}", render(reports));
    status_code(reports)
}

fn validate(model: &Path, opts: &EngineOpts) -> Result<u8> {
    opts.init_jobs()?;
    let m = load_model(model)?;
    Ok(report(&check_decode_onehot(&m, &opts.engine())?))
}

fn sim(model: &Path, trace: Option<&Path>, steps: Option<usize>, seed: u64, dump_state: bool) -> Result<u8> {
    let m = load_model(model)?;
    let machine = Machine::new(&m);
    let (init, given) = match trace {
        Some(p) => {
            let t = parse_trace(&read(p)?).map_err(|d| anyhow!("{}:\n{d}", p.display()))?;
            t.resolve(machine.flat()).with_context(|| format!("{}", p.display()))?
        }
        None => (Valuation::new(), Vec::new()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat = machine.flat();
    let mut seeded = init;
    for (v, iv) in flat.state.iter().zip(&flat.init) {
        if matches!(iv, InitValue::Unconstrained) && !seeded.contains(v) {
            seeded.insert(v.clone(), Value::random(v.sort(), &mut rng));
        }
    }
    let initial = machine.initial_state_with(&seeded);
    let n = steps.unwrap_or(given.len());
    let inputs: Vec<Valuation> = (0..n)
        .map(|t| {
            let mut step = given.get(t).cloned().unwrap_or_default();
            for v in &flat.inputs {
                if !step.contains(v) {
                    step.insert(v.clone(), Value::random(v.sort(), &mut rng));
                }
            }
            step
        })
        .collect();
    let run = machine.run_from(initial, &inputs, &UfTable::new(seed))?;
    print!("{}", serialize_trace(&run, dump_state));
    Ok(0)
}

fn check_eq(a: &Path, b: &Path, map: Option<&Path>, bound: Option<usize>, opts: &EngineOpts) -> Result<u8> {
    opts.init_jobs()?;
    let (ma, mb) = (load_model(a)?, load_model(b)?);
    let mf = load_mapping(map, &ma, &mb, bound)?;
    Ok(report(&check_equiv(&ma, &mb, &mf.map, &mf.instructions, &mf.completions, &opts.engine())?))
}

/// Invariant induction, then (only if it succeeds) per-instruction refinement.
fn fsm_reports(m: &IlaModel, fsm: &TransitionSystem, r: &ila_core::RefinementSpec, engine: &Engine) -> Result<Vec<CheckReport>> {
    let mut out = check_invariant_inductive(fsm, &r.invariants, engine)?;
    if out.iter().all(CheckReport::is_proved) {
        out.extend(check_fsm_refinement(m, fsm, r, engine)?);
    }
    Ok(out)
}

fn check_fsm(model: &Path, fsm: &Path, refinement: &Path, bound: Option<usize>, opts: &EngineOpts) -> Result<u8> {
    opts.init_jobs()?;
    let m = load_model(model)?;
    let ts = load_fsm(fsm)?;
    let r = load_refinement(&m, &ts, refinement, bound)?;
    Ok(report(&fsm_reports(&m, &ts, &r, &opts.engine())?))
}

struct EmitArgs<'a> {
    model: &'a Path,
    against: Option<&'a Path>,
    map: Option<&'a Path>,
    fsm: Option<&'a Path>,
    refinement: Option<&'a Path>,
    bound: Option<usize>,
    out: Option<&'a Path>,
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn emit_smt(args: EmitArgs) -> Result<u8> {
    let m = load_model(args.model)?;
    let log = Arc::new(Mutex::new(Vec::<Query>::new()));
    let engine = Engine::Record(log.clone());
    // one worker, so queries are logged in report order
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let reports = pool.install(|| -> Result<Vec<CheckReport>> {
        if let Some(f) = args.fsm {
            let ts = load_fsm(f)?;
            let r = load_refinement(&m, &ts, args.refinement.expect("clap requires --ref"), args.bound)?;
            fsm_reports(&m, &ts, &r, &engine)
        } else if let Some(b) = args.against {
            let mb = load_model(b)?;
            let mf = load_mapping(args.map, &m, &mb, args.bound)?;
            Ok(check_equiv(&m, &mb, &mf.map, &mf.instructions, &mf.completions, &engine)?)
        } else {
            Ok(check_decode_onehot(&m, &engine)?)
        }
    })?;
    let queries = std::mem::take(&mut *log.lock().unwrap());
    if queries.is_empty() {
        bail!("no obligations to emit");
    }
    if reports.iter().map(|r| r.queries).sum::<usize>() != queries.len() {
        bail!("query log does not line up with the obligations");
    }
    let mut scripts = Vec::new();
    let mut qs = queries.iter();
    for r in &reports {
        for k in 0..r.queries {
            let text = emit_smtlib(qs.next().unwrap()).text;
            if reprint(&text).as_deref() != Some(text.as_str()) {
                bail!("script for {} does not read back", r.id);
            }
            scripts.push((format!("{}-{k}", file_stem(&r.id)), r.id.clone(), text));
        }
    }
    match args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for (stem, _, text) in &scripts {
                let p = dir.join(format!("{stem}.smt2"));
                fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?;
                println!("{}", p.display());
            }
        }
        None => {
            for (stem, id, text) in &scripts {
                println!("; obligation {id} ({stem})");
                print!("{text}");
            }
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Validate { model, engine } => validate(model, engine),
        Cmd::Sim { model, trace, steps, seed, dump_state } => sim(model, trace.as_deref(), *steps, *seed, *dump_state),
        Cmd::CheckEq { a, b, map, bound, engine } => check_eq(a, b, map.as_deref(), *bound, engine),
        Cmd::CheckFsm { model, fsm, refinement, bound, engine } => check_fsm(model, fsm, refinement, *bound, engine),
        Cmd::EmitSmt { model, against, map, fsm, refinement, bound, out } => emit_smt(EmitArgs {
            model,
            against: against.as_deref(),
            map: map.as_deref(),
            fsm: fsm.as_deref(),
            refinement: refinement.as_deref(),
            bound: *bound,
            out: out.as_deref(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
