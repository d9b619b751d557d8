//! Acceptance run: prints one pass/fail line per criterion, then notes on
//! the failures. Exits nonzero if a criterion fails other than the known
//! unattainable part of criterion 5 (exhaustive certification of the
//! pipeline proofs).

mod common;

use std::time::{Duration, Instant};

use common::goldens::{self, has_z3, recorded};
use ila_core::bundled::*;
use ila_core::eqcheck::{Counterexample, RefinementSpec};
use ila_core::expr::free_vars;
use ila_core::mutate::{decode_overlap_mutants, seeded_mutations, Mutation};
use ila_core::smt::{brute_force, cone_bits, solve};
use ila_core::ts::step_name;
use ila_core::{
    check_decode_onehot, check_equiv, check_fsm_refinement, check_invariant_inductive, collect_hierarchy, eval, parse_model, BruteConfig,
    CheckReport, Engine, Expr, IlaModel, Machine, Query, Sort, SolveStatus, SolverConfig, TransitionSystem, UfTable, Valuation, Value,
};

// tolerances
const LOWERING_MODELS: u64 = 500;
const LOWERING_STEPS: usize = 100;
const BRUTE_BITS: u64 = 20;
const AES_BLOCKS: usize = 2;
const BUGGY_BOUND: usize = 8;
const FIXED_BOUND: usize = 16;
const OVERLAP_MUTANTS: usize = 5;
const MUTANTS_PER_MODEL: usize = 20;
const MUTANTS_CAUGHT: f64 = 0.95;
const GENERATED_MODELS: u64 = 200;
const SEED: u64 = 2018;
/// Wall-clock limit per criterion, in seconds.
const LIMITS: [u64; 8] = [60, 300, 120, 120, 180, 30, 600, 30];

struct Outcome {
    pass: bool,
    /// Failed only in the known unattainable part.
    tolerated: bool,
    summary: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Outcome {
        Outcome { pass, tolerated: false, summary: summary.into(), notes: Vec::new() }
    }

    fn fail(summary: impl Into<String>) -> Outcome {
        Outcome::new(false, summary)
    }
}

fn solver() -> Option<SolverConfig> {
    has_z3().then(SolverConfig::z3)
}

fn auto() -> Option<Engine> {
    solver().map(|s| Engine::Auto { brute: BruteConfig::default(), solver: Some(s) })
}

fn all_proved(rs: &[CheckReport]) -> Result<(), String> {
    match rs.iter().find(|r| !r.is_proved()) {
        Some(r) => Err(format!("{} is {}", r.id, r.status.name())),
        None => Ok(()),
    }
}

fn models() -> Vec<(&'static str, IlaModel)> {
    vec![
        ("aes-table", toy_aes(SboxStyle::Table)),
        ("aes-logic", toy_aes(SboxStyle::Logic)),
        ("proc", toy_proc(false)),
        ("proc-buggy", toy_proc(true)),
        ("stream-high", toy_stream(StreamLevel::High)),
        ("stream-low", toy_stream(StreamLevel::Low)),
    ]
}

// 1 --------------------------------------------------------------------------

fn lowering_soundness() -> Outcome {
    for seed in 0..LOWERING_MODELS {
        let m = common::gen_model(SEED + seed);
        if let Err(e) = common::lowering_agrees(&m, seed, LOWERING_STEPS) {
            return Outcome::fail(format!("model seed {}: {e}", SEED + seed));
        }
    }
    Outcome::new(true, format!("{LOWERING_MODELS} models x {LOWERING_STEPS} steps agree on every state variable"))
}

// 2 --------------------------------------------------------------------------

/// The queries of every check this run makes, as issued when each passes.
fn all_queries() -> Vec<Query> {
    let mut qs = Vec::new();
    let ms = models();
    for (_, m) in &ms {
        qs.extend(recorded(|e| check_decode_onehot(m, e).unwrap()).1);
    }
    for (i, (_, m)) in ms.iter().enumerate().take(OVERLAP_MUTANTS) {
        for (_, _, mu) in decode_overlap_mutants(m, 1, SEED + i as u64).unwrap() {
            qs.extend(recorded(|e| check_decode_onehot(&mu, e).unwrap()).1);
        }
    }
    for (name, m) in &ms {
        for (_, mu) in seeded_mutations(m, MUTANTS_PER_MODEL, SEED).unwrap() {
            qs.extend(recorded(|e| against_partner(name, &mu, e).unwrap()).1);
        }
        qs.extend(recorded(|e| against_partner(name, m, e).unwrap()).1);
    }
    let ila = toy_proc(false);
    for buggy in [false, true] {
        let fsm = toy_pipe(buggy);
        let spec = pipe_refinement(&ila, &fsm).spec;
        qs.extend(recorded(|e| check_invariant_inductive(&fsm, &spec.invariants, e).unwrap()).1);
        qs.extend(recorded(|e| check_fsm_refinement(&ila, &fsm, &spec, e).unwrap()).1);
    }
    qs
}

fn replays(q: &Query, s: &SolveStatus) -> bool {
    match s {
        SolveStatus::Sat(m) => q.holds(&m.values, &m.ufs).unwrap_or(false),
        _ => true,
    }
}

fn engine_agreement() -> Outcome {
    let qs = all_queries();
    let brute = BruteConfig::default();
    let z3 = solver();
    let (mut small, mut sat) = (0, 0);
    for (k, q) in qs.iter().enumerate() {
        if cone_bits(q).map_or(true, |b| b > BRUTE_BITS) {
            continue;
        }
        small += 1;
        let b = match brute_force(q, &brute) {
            Ok(r) => r.status,
            Err(e) => return Outcome::fail(format!("query {k}: brute force failed: {e}")),
        };
        if matches!(b, SolveStatus::Unknown(_)) || !replays(q, &b) {
            return Outcome::fail(format!("query {k}: brute-force answer {} does not replay", b.name()));
        }
        sat += b.is_sat() as usize;
        if let Some(cfg) = &z3 {
            let s = match solve(q, cfg) {
                Ok(r) => r.status,
                Err(e) => return Outcome::fail(format!("query {k}: solver failed: {e}")),
            };
            if s.name() != b.name() || !replays(q, &s) {
                return Outcome::fail(format!("query {k}: solver says {}, brute force {}", s.name(), b.name()));
            }
        }
    }
    let mode = if z3.is_some() { "solver and brute force agree" } else { "brute force only (no solver found)" };
    Outcome::new(small > 0, format!("{small} of {} queries within {BRUTE_BITS} bits ({sat} sat): {mode}, all models replay", qs.len()))
}

// 3 --------------------------------------------------------------------------

fn aes_equivalence() -> Outcome {
    let Some(engine) = auto() else { return Outcome::fail("no SMT solver found") };
    let (a, b) = (toy_aes(SboxStyle::Table), toy_aes(SboxStyle::Logic));
    let mf = aes_mapping(&a, &b);
    let Some(c) = mf.completions.iter().find(|c| c.pair.0 == "START_ENCRYPT") else { return Outcome::fail("no START_ENCRYPT completion") };
    // START plus five child steps per block
    let needed = 1 + 5 * AES_BLOCKS;
    if c.bound < needed {
        return Outcome::fail(format!("completion bound {} does not cover {AES_BLOCKS} blocks", c.bound));
    }
    let rs = match check_equiv(&a, &b, &mf.map, &mf.instructions, &mf.completions, &engine) {
        Ok(rs) => rs,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let instr = rs.iter().filter(|r| !r.id.ends_with(":completion")).count();
    if instr != 8 * 3 {
        return Outcome::fail(format!("{instr} per-instruction obligations, expected 24"));
    }
    match all_proved(&rs) {
        Ok(()) => Outcome::new(true, format!("8 instructions x 3 obligations and completion at bound {} ({AES_BLOCKS} blocks) proved", c.bound)),
        Err(e) => Outcome::fail(e),
    }
}

// 4 --------------------------------------------------------------------------

fn stream_equivalence() -> Outcome {
    let Some(engine) = auto() else { return Outcome::fail("no SMT solver found") };
    let (a, b) = (toy_stream(StreamLevel::High), toy_stream(StreamLevel::Low));
    if a.funcs().is_empty() || b.funcs().is_empty() {
        return Outcome::fail("the kernel is not uninterpreted");
    }
    if a.state_var("frame").map(|v| v.sort()) != Some(Sort::array(4, 8)) {
        return Outcome::fail("frame is not a 4x4 image of bytes");
    }
    let mf = stream_mapping(&a, &b);
    let rs = match check_equiv(&a, &b, &mf.map, &mf.instructions, &mf.completions, &engine) {
        Ok(rs) => rs,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    match all_proved(&rs) {
        Ok(()) => Outcome::new(true, format!("{} obligations proved with `{}` uninterpreted", rs.len(), a.funcs()[0].name())),
        Err(e) => Outcome::fail(e),
    }
}

// 5 --------------------------------------------------------------------------

fn value_at(c: &Counterexample, prefix: &str, v: &ila_core::Var, t: usize) -> Value {
    c.values.get_by_name(&step_name(&format!("{prefix}{}", v.name()), t)).cloned().unwrap_or_else(|| Value::zero(v.sort()))
}

/// Reruns the implementation from the counterexample's first state and
/// inputs, steps the ILA from the mapped state after the warm-up commits,
/// and names the status bits that differ after the checked commit.
fn replay_status_mismatch(ila: &IlaModel, fsm: &TransitionSystem, r: &RefinementSpec, c: &Counterexample, ufs: &UfTable) -> Result<Vec<String>, String> {
    let e = |x: &dyn std::fmt::Display| x.to_string();
    let mut s: Valuation = fsm.vars.iter().map(|v| (v.clone(), value_at(c, "impl:", v, 0))).collect();
    let (mut commits, mut pre, mut post) = (0, None, None);
    for t in 0..r.bound {
        let i: Valuation = fsm.inputs.iter().map(|v| (v.clone(), value_at(c, "impl:", v, t))).collect();
        let env = s.merged(&i);
        let next = fsm.step(&s, &i, ufs).map_err(|x| e(&x))?;
        if eval(&r.commit, &env, ufs).map_err(|x| e(&x))? == Value::Bool(true) {
            commits += 1;
            if commits == r.warmup {
                pre = Some(next.clone());
            } else if commits == r.warmup + 1 {
                post = Some((env, next));
                break;
            }
        }
        s = next;
    }
    let (Some(pre), Some((at_commit, after))) = (pre, post) else { return Err("the checked commit is not reached".into()) };
    let mut sigma = Valuation::new();
    for (x, y) in &r.pairs {
        let v = x.as_var().ok_or("non-variable ILA term")?;
        sigma.insert(v.clone(), eval(y, &pre, ufs).map_err(|x| e(&x))?);
    }
    let mut w = Valuation::new();
    for v in ila.inputs() {
        let (_, t) = r.inputs.iter().find(|(n, _)| n == v.name()).ok_or("unmapped input")?;
        w.insert(v.clone(), eval(t, &at_commit, ufs).map_err(|x| e(&x))?);
    }
    let out = Machine::new(ila).step(&sigma, &w, ufs).map_err(|x| e(&x))?;
    let mut bad = Vec::new();
    for bit in ["mie", "mpie"] {
        let v = ila.state_var(bit).ok_or("no status bit")?;
        let (_, y) = r.pairs.iter().find(|(x, _)| x.as_var() == Some(v)).ok_or("unmapped status bit")?;
        let (want, got) = (out.next.get(v).cloned(), Some(eval(y, &after, ufs).map_err(|x| e(&x))?));
        if want != got {
            bad.push(format!("{bit}: ILA {} vs implementation {}", want.unwrap(), got.unwrap()));
        }
    }
    Ok(bad)
}

fn pipeline_bug() -> Outcome {
    let Some(engine) = auto() else { return Outcome::fail("no SMT solver found") };
    let ila = toy_proc(false);

    // the buggy pipeline fails within the short bound
    let fsm = toy_pipe(true);
    let mut spec = pipe_refinement(&ila, &fsm).spec;
    spec.bound = BUGGY_BOUND;
    let rs = match check_fsm_refinement(&ila, &fsm, &spec, &engine) {
        Ok(rs) => rs,
        Err(e) => return Outcome::fail(format!("buggy: {e}")),
    };
    let Some((id, c)) = rs.iter().find_map(|r| r.counterexample().map(|c| (r.id.clone(), c))) else {
        return Outcome::fail(format!("no counterexample for the buggy pipeline within bound {BUGGY_BOUND}"));
    };
    let bits = match replay_status_mismatch(&ila, &fsm, &spec, c, &c.ufs) {
        Ok(b) if !b.is_empty() => b,
        Ok(_) => return Outcome::fail(format!("{id}: replay shows no status-bit mismatch")),
        Err(e) => return Outcome::fail(format!("{id}: replay failed: {e}")),
    };

    // the fixed pipeline is proved at the long bound
    let fsm = toy_pipe(false);
    let mut spec = pipe_refinement(&ila, &fsm).spec;
    spec.bound = FIXED_BOUND;
    let inv = check_invariant_inductive(&fsm, &spec.invariants, &engine).map_err(|e| e.to_string()).and_then(|rs| all_proved(&rs));
    let refine = check_fsm_refinement(&ila, &fsm, &spec, &engine).map_err(|e| e.to_string());
    let n = match (inv, refine) {
        (Ok(()), Ok(rs)) => match all_proved(&rs) {
            Ok(()) => rs.len(),
            Err(e) => return Outcome::fail(format!("fixed: {e}")),
        },
        (Err(e), _) | (_, Err(e)) => return Outcome::fail(format!("fixed: {e}")),
    };

    // certification by exhaustive search
    let (_, qs) = recorded(|e| check_fsm_refinement(&ila, &fsm, &spec, e).unwrap());
    let bits_needed: Vec<u64> = qs.iter().map(|q| cone_bits(q).unwrap_or(u64::MAX)).collect();
    let worst = bits_needed.iter().copied().max().unwrap_or(0);
    let least = bits_needed.iter().copied().min().unwrap_or(0);
    let summary = format!("{id} counterexample replays to {}; fixed pipeline proved ({n} instructions, bound {FIXED_BOUND})", bits.join(", "));
    if worst <= BRUTE_BITS {
        return Outcome::new(true, format!("{summary}; certified by brute force"));
    }
    let mut o = Outcome::fail(format!("{summary}; not certified by brute force"));
    o.tolerated = true;
    o.notes.push(format!(
        "Exhaustive certification is out of reach: the {} refinement queries depend on {least} to {worst} free bits, \
         against an enumeration budget of {BRUTE_BITS}. The free bits are the per-step interrupt inputs, the instruction \
         memory, the register file, the control bits and the pipeline latches over {FIXED_BOUND} steps. Narrowing the data \
         widths does not bring them near the budget, so the solver's verdicts stand uncertified.",
        qs.len()
    ));
    o
}

// 6 --------------------------------------------------------------------------

/// Opcode values on which at least two decodes of the ILA at `path` hold.
fn overlapping_opcodes(m: &IlaModel, path: &str) -> Vec<u128> {
    let hier = collect_hierarchy(m);
    let node = hier.iter().find(|h| h.path == path).unwrap().model;
    let op = node.opcode_var();
    let ufs = UfTable::new(0);
    (0..1u128 << node.fetch_width())
        .filter(|x| {
            let env = Valuation::new().with(op, Value::bv(node.fetch_width(), *x));
            node.instructions().iter().filter(|i| eval(i.decode(), &env, &ufs) == Ok(Value::Bool(true))).count() >= 2
        })
        .collect()
}

fn onehot_validation() -> Outcome {
    let engine = auto().unwrap_or_else(Engine::brute);
    let ms = models();
    for (name, m) in &ms {
        if let Err(e) = check_decode_onehot(m, &engine).map_err(|e| e.to_string()).and_then(|rs| all_proved(&rs)) {
            return Outcome::fail(format!("{name}: {e}"));
        }
    }
    let mut witnesses = Vec::new();
    for (i, (name, m)) in ms.iter().enumerate().take(OVERLAP_MUTANTS) {
        let Some((desc, injected, mu)) = decode_overlap_mutants(m, 1, SEED + i as u64).unwrap().pop() else {
            return Outcome::fail(format!("{name}: no decode-overlap mutant"));
        };
        let rs = match check_decode_onehot(&mu, &engine) {
            Ok(rs) => rs,
            Err(e) => return Outcome::fail(format!("{desc}: {e}")),
        };
        let Some(r) = rs.iter().find(|r| r.id.ends_with(":exclusive") && r.counterexample().is_some()) else {
            return Outcome::fail(format!("{desc}: no exclusivity counterexample"));
        };
        let path = r.id.trim_start_matches("onehot:").trim_end_matches(":exclusive");
        let Some(opv) = r.counterexample().unwrap().values.get_by_name("opcode").and_then(Value::as_bits) else {
            return Outcome::fail(format!("{desc}: no witness opcode"));
        };
        let overlap = overlapping_opcodes(&mu, path);
        if !overlap.contains(&opv) || !overlap.contains(&injected) {
            return Outcome::fail(format!("{desc}: enumeration finds overlaps {overlap:?}, witness {opv}"));
        }
        witnesses.push(format!("{path}:{opv}"));
    }
    Outcome::new(true, format!("{} bundled models one-hot; {OVERLAP_MUTANTS} overlap mutants caught, witnesses {}", ms.len(), witnesses.join(" ")))
}

// 7 --------------------------------------------------------------------------

/// Equivalence checks of `m`, standing in for the bundled model `name`,
/// against that model's counterpart, plus `m`'s own decode checks.
fn against_partner(name: &str, m: &IlaModel, engine: &Engine) -> Result<Vec<CheckReport>, ila_core::CheckError> {
    let (a, b, mf) = match name {
        "aes-table" => {
            let o = toy_aes(SboxStyle::Logic);
            let mf = aes_mapping(m, &o);
            (m.clone(), o, mf)
        }
        "aes-logic" => {
            let o = toy_aes(SboxStyle::Table);
            let mf = aes_mapping(&o, m);
            (o, m.clone(), mf)
        }
        "proc" | "proc-buggy" => {
            let o = toy_proc(name == "proc-buggy");
            let mf = proc_mapping(&o, m);
            (o, m.clone(), mf)
        }
        "stream-high" => {
            let o = toy_stream(StreamLevel::Low);
            let mf = stream_mapping(m, &o);
            (m.clone(), o, mf)
        }
        _ => {
            let o = toy_stream(StreamLevel::High);
            let mf = stream_mapping(&o, m);
            (o, m.clone(), mf)
        }
    };
    let mut rs = check_decode_onehot(m, engine)?;
    rs.extend(check_equiv(&a, &b, &mf.map, &mf.instructions, &mf.completions, engine)?);
    Ok(rs)
}

fn update_expr(m: &IlaModel, mu: &Mutation) -> Option<Expr> {
    let hier = collect_hierarchy(m);
    let node = hier.iter().find(|h| h.path == mu.path)?.model;
    let v = node.state_var(&mu.var)?;
    Some(node.instruction(&mu.instr)?.update_of(v).cloned().unwrap_or_else(|| Expr::var(v)))
}

/// The mutated update computes the same function as the original one, by
/// exhaustive search over its free variables.
fn preserving(orig: &IlaModel, mutant: &IlaModel, mu: &Mutation) -> Result<(), String> {
    let (Some(x), Some(y)) = (update_expr(orig, mu), update_expr(mutant, mu)) else { return Err("update not found".into()) };
    let diff = x.eq_to(&y).and_then(|e| e.not()).map_err(|e| e.to_string())?;
    let q = Query::new(free_vars(&diff).into_iter().collect(), diff);
    match brute_force(&q, &BruteConfig::default()) {
        Ok(r) if r.status.is_unsat() => Ok(()),
        Ok(r) => Err(format!("update differs ({})", r.status.name())),
        Err(e) => Err(e.to_string()),
    }
}

fn mutation_sensitivity() -> Outcome {
    let Some(engine) = auto() else { return Outcome::fail("no SMT solver found") };
    let mut pass = true;
    let mut per_model = Vec::new();
    let mut notes = Vec::new();
    for (name, m) in models() {
        let mutants = match seeded_mutations(&m, MUTANTS_PER_MODEL, SEED) {
            Ok(ms) => ms,
            Err(e) => return Outcome::fail(format!("{name}: {e}")),
        };
        let mut caught = 0;
        for (mu, mutant) in &mutants {
            match against_partner(name, mutant, &engine) {
                Ok(rs) if rs.iter().any(|r| !r.is_proved()) => caught += 1,
                Ok(_) => match preserving(&m, mutant, mu) {
                    Ok(()) => notes.push(format!("{name}: uncaught but semantics-preserving: {mu}")),
                    Err(e) => {
                        pass = false;
                        notes.push(format!("{name}: missed {mu}: {e}"));
                    }
                },
                Err(e) => {
                    pass = false;
                    notes.push(format!("{name}: {mu}: {e}"));
                }
            }
        }
        let rate = caught as f64 / mutants.len() as f64;
        pass &= mutants.len() == MUTANTS_PER_MODEL && rate >= MUTANTS_CAUGHT;
        per_model.push(format!("{name} {caught}/{}", mutants.len()));
    }
    let mut o = Outcome::new(pass, format!("caught {}", per_model.join(", ")));
    o.notes = notes;
    o
}

// 8 --------------------------------------------------------------------------

fn format_stability() -> Outcome {
    for text in [AES_TABLE, AES_LOGIC, PROC, PROC_BUGGY, STREAM_HIGH, STREAM_LOW] {
        if let Err(e) = common::round_trips(&parse_model(text).unwrap()) {
            return Outcome::fail(e);
        }
    }
    for text in [AES_MAP, PROC_MAP, PIPE, PIPE_BUGGY, PIPE_REFINE, STREAM_MAP] {
        if let Err(e) = common::sexp_stable(text) {
            return Outcome::fail(e);
        }
    }
    for seed in 0..GENERATED_MODELS {
        if let Err(e) = common::round_trips(&common::gen_model(SEED + seed)) {
            return Outcome::fail(format!("generated model {}: {e}", SEED + seed));
        }
    }
    let mut skipped = Vec::new();
    for name in goldens::NAMES {
        match goldens::check(name) {
            Ok(true) => {}
            Ok(false) => skipped.push(name),
            Err(e) => return Outcome::fail(e),
        }
    }
    if !skipped.is_empty() {
        return Outcome::fail(format!("golden files not checked without a solver: {}", skipped.join(", ")));
    }
    Outcome::new(true, format!("12 bundled files and {GENERATED_MODELS} generated models are fixpoints; {} golden files match", goldens::NAMES.len()))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("lowering soundness", lowering_soundness),
        ("engine agreement", engine_agreement),
        ("toy AES equivalence", aes_equivalence),
        ("toy stream equivalence", stream_equivalence),
        ("pipeline bug analog", pipeline_bug),
        ("one-hot validation", onehot_validation),
        ("mutation sensitivity", mutation_sensitivity),
        ("format stability", format_stability),
    ];
    let mut hard_failure = false;
    let mut notes = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = f();
        let took = start.elapsed();
        if took > Duration::from_secs(LIMITS[k]) {
            o.pass = false;
            o.tolerated = false;
            o.summary = format!("{} (over the {} s limit)", o.summary, LIMITS[k]);
        }
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}  {name:<24} {verdict}  {:>6.1} s  {}", k + 1, took.as_secs_f64(), o.summary);
        hard_failure |= !o.pass && !o.tolerated;
        notes.extend(o.notes.into_iter().map(|n| format!("[{}] {n}", k + 1)));
    }
    for n in notes {
        println!("note {n}");
    }
    if hard_failure {
        std::process::exit(1);
    }
}
