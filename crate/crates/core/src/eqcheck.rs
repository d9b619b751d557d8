//! Verification: decode one-hotness, instruction-level equivalence of two
//! ILAs, completion equivalence of child programs, refinement of an ILA by a
//! finite-state implementation, and invariant induction.
//!
//! Every check returns one [`CheckReport`] per obligation. A counterexample
//! is replayed concretely before it is reported; a witness that does not
//! replay is a [`CheckError::Replay`].

use std::collections::HashMap;

use rayon::prelude::*;

use crate::eval::{eval, EvalError};
use crate::expr::{map_vars, Expr, ExprError, Op, Sort, Var};
use crate::hierarchy::{flatten, FlatIla};
use crate::interp::{InterpError, Machine};
use crate::model::{collect_hierarchy, IlaModel};
use crate::query::Query;
use crate::smt::{Engine, SolveError, SolveStatus};
use crate::ts::{at, at_var, lower, lower_children_only, TransitionSystem, TsError};
use crate::value::{UfTable, Valuation, Value};

#[derive(Clone, Debug)]
pub struct Counterexample {
    /// Values of the obligation's free variables, by their query names.
    pub values: Valuation,
    pub ufs: UfTable,
    /// What went wrong, in terms of the models.
    pub detail: String,
}

#[derive(Clone, Debug)]
pub enum CheckStatus {
    Proved,
    Counterexample(Box<Counterexample>),
    Unknown(String),
}

impl CheckStatus {
    pub fn name(&self) -> &'static str {
        match self {
            CheckStatus::Proved => "proved",
            CheckStatus::Counterexample(_) => "counterexample",
            CheckStatus::Unknown(_) => "unknown",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub id: String,
    pub status: CheckStatus,
    /// Engine that decided the last query.
    pub engine: String,
    pub queries: usize,
}

impl CheckReport {
    pub fn is_proved(&self) -> bool {
        matches!(self.status, CheckStatus::Proved)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match &self.status {
            CheckStatus::Counterexample(c) => Some(c),
            _ => None,
        }
    }
}

/// Worst status over a set of reports: any counterexample, else any
/// unknown, else proved.
pub fn overall(reports: &[CheckReport]) -> &'static str {
    if reports.iter().any(|r| matches!(r.status, CheckStatus::Counterexample(_))) {
        "counterexample"
    } else if reports.iter().any(|r| matches!(r.status, CheckStatus::Unknown(_))) {
        "unknown"
    } else {
        "proved"
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("bad mapping: {0}")]
    Mapping(String),
    #[error("counterexample for `{id}` does not replay: {detail}")]
    Replay { id: String, detail: String },
}

/// Correspondence between two models: pairs of terms that must agree
/// (first over `a`'s canonical variables, second over `b`'s), plus
/// invariants assumed of each side's starting state.
#[derive(Clone, Debug, Default)]
pub struct StateMapping {
    pub pairs: Vec<(Expr, Expr)>,
    pub inv_a: Vec<Expr>,
    pub inv_b: Vec<Expr>,
}

impl StateMapping {
    /// Pair every root state variable of `a` with the same-named, same-sorted
    /// root state variable of `b`.
    pub fn identity(a: &IlaModel, b: &IlaModel) -> StateMapping {
        let pairs = a
            .state_vars()
            .iter()
            .filter_map(|va| {
                let vb = b.state_var(va.name()).filter(|vb| vb.sort() == va.sort())?;
                Some((Expr::var(va), Expr::var(vb)))
            })
            .collect();
        StateMapping { pairs, ..Default::default() }
    }
}

struct Decided {
    status: SolveStatus,
    engine: &'static str,
}

fn decide(engine: &Engine, q: &Query) -> Result<Decided, CheckError> {
    let r = engine.solve(q)?;
    Ok(Decided { status: r.status, engine: r.engine })
}

fn replay_err(id: &str, detail: impl Into<String>) -> CheckError {
    CheckError::Replay { id: id.to_string(), detail: detail.into() }
}

fn and(items: impl IntoIterator<Item = Expr>) -> Expr {
    Expr::and_all(items).unwrap()
}

fn or(items: impl IntoIterator<Item = Expr>) -> Expr {
    Expr::or_all(items).unwrap()
}

fn not(e: &Expr) -> Expr {
    e.not().unwrap()
}

fn eq(a: &Expr, b: &Expr) -> Result<Expr, CheckError> {
    a.eq_to(b).map_err(|e| CheckError::Mapping(e.to_string()))
}

fn xor(a: &Expr, b: &Expr) -> Expr {
    Expr::bin(Op::Xor, a, b).unwrap()
}

fn rename(e: &Expr, map: &HashMap<Var, Expr>) -> Result<Expr, ExprError> {
    Ok(map_vars(std::slice::from_ref(e), |v| map.get(v).cloned())?.pop().unwrap())
}

fn holds(e: &Expr, env: &Valuation, ufs: &UfTable) -> Result<bool, EvalError> {
    Ok(eval(e, env, ufs)?.as_bool() == Some(true))
}

/// Copy each variable in `vars` out of `values`, looking it up under the
/// name its term in `names` has.
fn pick(vars: &[Var], names: &HashMap<Var, Expr>, values: &Valuation, t: Option<usize>) -> Valuation {
    let mut out = Valuation::new();
    for v in vars {
        let n = names[v].as_var().expect("renamings map variables to variables");
        let n = match t {
            Some(t) => at_var(n, t),
            None => n.clone(),
        };
        let val = values.get_by_name(n.name()).cloned().unwrap_or_else(|| Value::zero(v.sort()));
        out.insert(v.clone(), val);
    }
    out
}

fn run_all<T: Send>(items: Vec<T>, f: impl Fn(T) -> Result<CheckReport, CheckError> + Sync + Send) -> Result<Vec<CheckReport>, CheckError> {
    items.into_par_iter().map(f).collect()
}

// ---------------------------------------------------------------------------
// decode one-hot

/// Per ILA in the hierarchy: (a) no two decodes hold for the same opcode,
/// and (b) the valid function holds exactly when some decode does.
pub fn check_decode_onehot(m: &IlaModel, engine: &Engine) -> Result<Vec<CheckReport>, CheckError> {
    let flat = flatten(m)?;
    let hier = collect_hierarchy(m);
    let mut jobs = Vec::new();
    for (k, h) in hier.iter().enumerate() {
        jobs.push((k, h.model, true));
        jobs.push((k, h.model, false));
    }
    run_all(jobs, |(k, model, exclusive)| {
        if exclusive {
            onehot_exclusive(&flat.nodes[k].path, model, engine)
        } else {
            onehot_coverage(&flat, k, engine)
        }
    })
}

fn onehot_exclusive(path: &str, model: &IlaModel, engine: &Engine) -> Result<CheckReport, CheckError> {
    let id = format!("onehot:{path}:exclusive");
    let op = model.opcode_var().clone();
    let ds: Vec<&Expr> = model.instructions().iter().map(|i| i.decode()).collect();
    let mut overlaps = Vec::new();
    for i in 0..ds.len() {
        for j in i + 1..ds.len() {
            overlaps.push(and([ds[i].clone(), ds[j].clone()]));
        }
    }
    let q = Query::new(vec![op.clone()], or(overlaps));
    let d = decide(engine, &q)?;
    let status = match d.status {
        SolveStatus::Unsat => CheckStatus::Proved,
        SolveStatus::Unknown(r) => CheckStatus::Unknown(r),
        SolveStatus::Sat(w) => {
            let env = Valuation::new().with(&op, w.values.get(&op).cloned().unwrap_or_else(|| Value::zero(op.sort())));
            let mut on = Vec::new();
            for ins in model.instructions() {
                if holds(ins.decode(), &env, &w.ufs)? {
                    on.push(ins.name().to_string());
                }
            }
            if on.len() < 2 {
                return Err(replay_err(&id, "fewer than two decodes hold"));
            }
            let opv = env.get(&op).unwrap();
            CheckStatus::Counterexample(Box::new(Counterexample {
                detail: format!("opcode {opv} decodes as {}", on.join(" and ")),
                values: env,
                ufs: w.ufs,
            }))
        }
    };
    Ok(CheckReport { id, status, engine: d.engine.into(), queries: 1 })
}

fn onehot_coverage(flat: &FlatIla, k: usize, engine: &Engine) -> Result<CheckReport, CheckError> {
    let node = &flat.nodes[k];
    let id = format!("onehot:{}:coverage", node.path);
    let some = or(node.instrs.iter().map(|i| i.decode.clone()));
    let goal = xor(&node.valid, &some);
    let roots: Vec<Var> = crate::expr::free_vars(&goal).into_iter().collect();
    let q = Query::new(roots, goal.clone());
    let d = decide(engine, &q)?;
    let status = match d.status {
        SolveStatus::Unsat => CheckStatus::Proved,
        SolveStatus::Unknown(r) => CheckStatus::Unknown(r),
        SolveStatus::Sat(w) => {
            let v = holds(&node.valid, &w.values, &w.ufs)?;
            let s = holds(&some, &w.values, &w.ufs)?;
            if v == s {
                return Err(replay_err(&id, "valid and decodes agree"));
            }
            let detail = if v { "valid holds but no instruction decodes" } else { "an instruction decodes while valid is false" };
            CheckStatus::Counterexample(Box::new(Counterexample { values: w.values, ufs: w.ufs, detail: detail.into() }))
        }
    };
    Ok(CheckReport { id, status, engine: d.engine.into(), queries: 1 })
}

// ---------------------------------------------------------------------------
// two-model products

/// One side of an equivalence product: its flattened model, transition
/// systems, and the renaming of its canonical variables into the product.
struct Side {
    flat: FlatIla,
    ts: TransitionSystem,
    cont: TransitionSystem,
    ren: HashMap<Var, Expr>,
    prefix: &'static str,
    /// Product variables this side owns (not unified with the other side).
    own_state: Vec<Var>,
    own_inputs: Vec<Var>,
}

impl Side {
    fn rename(&self, e: &Expr) -> Result<Expr, ExprError> {
        rename(e, &self.ren)
    }

    /// Renaming of canonical variables at step `t` of a completion run:
    /// state variables are per step (unification only applies at step 0),
    /// inputs are held at their step-0 values.
    fn at_step(&self, t: usize) -> HashMap<Var, Expr> {
        let mut m = HashMap::new();
        for v in &self.flat.state {
            let n = if t == 0 {
                at_var(self.ren[v].as_var().unwrap(), 0)
            } else {
                at_var(&v.renamed(format!("{}{}", self.prefix, v.name())), t)
            };
            m.insert(v.clone(), Expr::var(&n));
        }
        for v in &self.flat.inputs {
            m.insert(v.clone(), Expr::var(&at_var(self.ren[v].as_var().unwrap(), 0)));
        }
        m
    }

    fn quiescent(&self) -> &Expr {
        self.ts.label("quiescent").unwrap()
    }

    fn fire(&self, instr: &str) -> Result<&Expr, CheckError> {
        let l = format!("fire:{}.{instr}", self.flat.nodes[0].path);
        self.ts.label(&l).ok_or_else(|| CheckError::Mapping(format!("`{}` has no instruction `{instr}`", self.flat.name)))
    }

    fn root_instr(&self, instr: &str) -> Result<&crate::hierarchy::FlatInstr, CheckError> {
        self.flat.nodes[0]
            .instrs
            .iter()
            .find(|i| i.name == instr)
            .ok_or_else(|| CheckError::Mapping(format!("`{}` has no instruction `{instr}`", self.flat.name)))
    }
}

fn side(m: &IlaModel, prefix: &'static str, other: Option<(&Side, &[(Expr, Expr)])>) -> Result<Side, CheckError> {
    let flat = flatten(m)?;
    let ts = lower(m);
    let cont = lower_children_only(m);
    let mut ren = HashMap::new();
    let mut own_state = Vec::new();
    let mut own_inputs = Vec::new();
    for v in &flat.state {
        let unified = other.and_then(|(a, pairs)| {
            pairs.iter().find_map(|(ea, eb)| match (ea.as_var(), eb.as_var()) {
                (Some(va), Some(vb)) if vb == v && va.sort() == v.sort() => a.ren.get(va).cloned(),
                _ => None,
            })
        });
        match unified {
            Some(e) => {
                ren.insert(v.clone(), e);
            }
            None => {
                let p = v.renamed(format!("{prefix}{}", v.name()));
                own_state.push(p.clone());
                ren.insert(v.clone(), Expr::var(&p));
            }
        }
    }
    for v in &flat.inputs {
        let shared = other.and_then(|(a, _)| {
            let va = a.flat.inputs.iter().find(|x| x.name() == v.name() && x.sort() == v.sort())?;
            a.ren.get(va).cloned()
        });
        match shared {
            Some(e) => {
                ren.insert(v.clone(), e);
            }
            None => {
                let p = v.renamed(format!("{prefix}{}", v.name()));
                own_inputs.push(p.clone());
                ren.insert(v.clone(), Expr::var(&p));
            }
        }
    }
    Ok(Side { flat, ts, cont, ren, prefix, own_state, own_inputs })
}

fn check_pairs(a: &IlaModel, b: &IlaModel, map: &StateMapping) -> Result<(), CheckError> {
    let scope = |m: &IlaModel, e: &Expr, which: &str| -> Result<(), CheckError> {
        let flat = flatten(m)?;
        for v in crate::expr::free_vars(e) {
            if !flat.state.contains(&v) {
                return Err(CheckError::Mapping(format!("`{}` is not a state variable of {which} model `{}`", v.name(), m.name())));
            }
        }
        Ok(())
    };
    for (ea, eb) in &map.pairs {
        scope(a, ea, "the first")?;
        scope(b, eb, "the second")?;
        if ea.sort() != eb.sort() {
            return Err(CheckError::Mapping(format!("{ea} has sort {} but {eb} has sort {}", ea.sort(), eb.sort())));
        }
    }
    for e in &map.inv_a {
        scope(a, e, "the first")?;
    }
    for e in &map.inv_b {
        scope(b, e, "the second")?;
    }
    Ok(())
}

struct Product {
    a: Side,
    b: Side,
    /// Mapped pairs in product terms, excluding pairs made trivial by unification.
    pre_pairs: Vec<(Expr, Expr)>,
    /// All mapped pairs in canonical terms.
    pairs: Vec<(Expr, Expr)>,
    inv: Vec<Expr>,
}

impl Product {
    fn new(a: &IlaModel, b: &IlaModel, map: &StateMapping) -> Result<Product, CheckError> {
        check_pairs(a, b, map)?;
        let sa = side(a, "A:", None)?;
        let sb = side(b, "B:", Some((&sa, &map.pairs)))?;
        let mut pre_pairs = Vec::new();
        for (ea, eb) in &map.pairs {
            let (ra, rb) = (sa.rename(ea)?, sb.rename(eb)?);
            if ra != rb {
                pre_pairs.push((ra, rb));
            }
        }
        let mut inv = Vec::new();
        for e in &map.inv_a {
            inv.push(sa.rename(e)?);
        }
        for e in &map.inv_b {
            inv.push(sb.rename(e)?);
        }
        Ok(Product { a: sa, b: sb, pre_pairs, pairs: map.pairs.clone(), inv })
    }

    fn roots(&self) -> Vec<Var> {
        let mut r = self.a.own_state.clone();
        r.extend(self.b.own_state.iter().cloned());
        r.extend(self.a.own_inputs.iter().cloned());
        r.extend(self.b.own_inputs.iter().cloned());
        r
    }

    /// Corresponding, invariant-satisfying, quiescent starting states.
    fn precondition(&self) -> Result<Expr, CheckError> {
        let mut c = Vec::new();
        for (x, y) in &self.pre_pairs {
            c.push(eq(x, y)?);
        }
        c.extend(self.inv.iter().cloned());
        c.push(self.a.rename(self.a.quiescent())?);
        c.push(self.b.rename(self.b.quiescent())?);
        Ok(and(c))
    }

    fn states(&self, values: &Valuation, t: Option<usize>) -> (Valuation, Valuation, Valuation, Valuation) {
        (
            pick(&self.a.flat.state, &self.a.ren, values, t),
            pick(&self.a.flat.inputs, &self.a.ren, values, t),
            pick(&self.b.flat.state, &self.b.ren, values, t),
            pick(&self.b.flat.inputs, &self.b.ren, values, t),
        )
    }

    /// The first mapped pair that differs between two concrete states.
    fn mismatch(&self, sa: &Valuation, sb: &Valuation, ufs: &UfTable) -> Result<Option<String>, CheckError> {
        for (ea, eb) in &self.pairs {
            let (x, y) = (eval(ea, sa, ufs)?, eval(eb, sb, ufs)?);
            if x != y {
                return Ok(Some(format!("{ea} = {x} but {eb} = {y}")));
            }
        }
        Ok(None)
    }
}

fn pair_id(ia: &str, ib: &str) -> String {
    if ia == ib {
        ia.to_string()
    } else {
        format!("{ia}/{ib}")
    }
}

/// Root instructions of `a` paired with the same-named ones of `b`.
pub fn pair_by_name(a: &IlaModel, b: &IlaModel) -> Vec<(String, String)> {
    a.instructions()
        .iter()
        .filter(|i| b.instruction(i.name()).is_some())
        .map(|i| (i.name().to_string(), i.name().to_string()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InstrObligation {
    Valid,
    Decode,
    Update,
}

impl InstrObligation {
    fn name(self) -> &'static str {
        match self {
            InstrObligation::Valid => "valid",
            InstrObligation::Decode => "decode",
            InstrObligation::Update => "update",
        }
    }
}

/// Instruction-level equivalence of the root ILAs of `a` and `b`. For every
/// instruction pair, from corresponding quiescent states: (i) the valid
/// functions agree, (ii) the decodes agree, and (iii) when both fire, the
/// mapped terms agree afterwards.
pub fn check_instr_equiv(
    a: &IlaModel,
    b: &IlaModel,
    map: &StateMapping,
    pairs: &[(String, String)],
    engine: &Engine,
) -> Result<Vec<CheckReport>, CheckError> {
    let p = Product::new(a, b, map)?;
    for (ia, ib) in pairs {
        p.a.root_instr(ia)?;
        p.b.root_instr(ib)?;
    }
    let mut jobs = Vec::new();
    for (ia, ib) in pairs {
        for o in [InstrObligation::Valid, InstrObligation::Decode, InstrObligation::Update] {
            jobs.push((ia.as_str(), ib.as_str(), o));
        }
    }
    run_all(jobs, |(ia, ib, o)| instr_obligation(&p, ia, ib, o, engine))
}

fn instr_obligation(p: &Product, ia: &str, ib: &str, o: InstrObligation, engine: &Engine) -> Result<CheckReport, CheckError> {
    let id = format!("{}:{}", pair_id(ia, ib), o.name());
    let (xa, xb) = (p.a.root_instr(ia)?, p.b.root_instr(ib)?);
    let va = p.a.rename(&p.a.flat.nodes[0].valid)?;
    let vb = p.b.rename(&p.b.flat.nodes[0].valid)?;
    let da = p.a.rename(&xa.decode)?;
    let db = p.b.rename(&xb.decode)?;
    let pre = p.precondition()?;
    let goal = match o {
        InstrObligation::Valid => xor(&va, &vb),
        InstrObligation::Decode => xor(&da, &db),
        InstrObligation::Update => {
            let post = |s: &Side, ins: &crate::hierarchy::FlatInstr| -> Result<HashMap<Var, Expr>, CheckError> {
                let mut m = HashMap::new();
                for v in s.flat.state.iter().chain(&s.flat.inputs) {
                    let e = ins.updates.iter().find(|(x, _)| x == v).map(|(_, e)| e.clone()).unwrap_or_else(|| Expr::var(v));
                    m.insert(v.clone(), s.rename(&e)?);
                }
                Ok(m)
            };
            let (pa, pb) = (post(&p.a, xa)?, post(&p.b, xb)?);
            let mut diffs = Vec::new();
            for (ea, eb) in &p.pairs {
                diffs.push(not(&eq(&rename(ea, &pa)?, &rename(eb, &pb)?)?));
            }
            and([va.clone(), vb.clone(), da.clone(), db.clone(), or(diffs)])
        }
    };
    let mut q = Query::new(p.roots(), goal);
    q.assume(pre);
    let d = decide(engine, &q)?;
    let status = match d.status {
        SolveStatus::Unsat => CheckStatus::Proved,
        SolveStatus::Unknown(r) => CheckStatus::Unknown(r),
        SolveStatus::Sat(w) => {
            let (sa, wa, sb, wb) = p.states(&w.values, None);
            let ma = Machine::new_flat(p.a.flat.clone());
            let mb = Machine::new_flat(p.b.flat.clone());
            let env_a = sa.merged(&wa);
            let env_b = sb.merged(&wb);
            let detail = match o {
                InstrObligation::Valid | InstrObligation::Decode => {
                    let (ea, eb) = if o == InstrObligation::Valid {
                        (&p.a.flat.nodes[0].valid, &p.b.flat.nodes[0].valid)
                    } else {
                        (&xa.decode, &xb.decode)
                    };
                    let (x, y) = (holds(ea, &env_a, &w.ufs)?, holds(eb, &env_b, &w.ufs)?);
                    if x == y {
                        return Err(replay_err(&id, "both sides agree"));
                    }
                    format!("{} is {x} in `{}` but {y} in `{}`", o.name(), p.a.flat.name, p.b.flat.name)
                }
                InstrObligation::Update => {
                    let na = ma.step(&sa, &wa, &w.ufs)?;
                    let nb = mb.step(&sb, &wb, &w.ufs)?;
                    let fa = na.fired.as_ref().map(|f| f.instr.as_str());
                    let fb = nb.fired.as_ref().map(|f| f.instr.as_str());
                    if fa != Some(ia) || fb != Some(ib) {
                        return Err(replay_err(&id, format!("fired {fa:?} and {fb:?}")));
                    }
                    match p.mismatch(&na.next, &nb.next, &w.ufs)? {
                        Some(m) => format!("after {}: {m}", pair_id(ia, ib)),
                        None => return Err(replay_err(&id, "mapped state agrees after the step")),
                    }
                }
            };
            CheckStatus::Counterexample(Box::new(Counterexample { values: w.values, ufs: w.ufs, detail }))
        }
    };
    Ok(CheckReport { id, status, engine: d.engine.into(), queries: 1 })
}


// ---------------------------------------------------------------------------
// completion

/// Completion equivalence for one instruction pair: from corresponding
/// quiescent states, both sides fire their instruction and then run their
/// child programs (inputs held) for the rest of `bound` steps. Both must be
/// quiescent by then, with the mapped terms agreeing and the mapping's
/// invariants holding again. `assume` adds conditions on `a`'s starting state.
pub fn check_completion_equiv(
    a: &IlaModel,
    b: &IlaModel,
    map: &StateMapping,
    pair: (&str, &str),
    bound: usize,
    assume: &[Expr],
    engine: &Engine,
) -> Result<CheckReport, CheckError> {
    let p = Product::new(a, b, map)?;
    let (ia, ib) = pair;
    let id = format!("{}:completion", pair_id(ia, ib));
    let not_quiescent = || CheckStatus::Unknown(format!("not quiescent within bound {bound}"));
    if bound == 0 {
        return Ok(CheckReport { id, status: not_quiescent(), engine: engine.name().into(), queries: 0 });
    }
    let fa = p.a.fire(ia)?.clone();
    let fb = p.b.fire(ib)?.clone();

    let mut roots: Vec<Var> = p.roots().iter().map(|v| at_var(v, 0)).collect();
    roots.sort();
    let mut q = Query::new(roots, Expr::tt());
    for s in [&p.a, &p.b] {
        for t in 0..bound {
            let m = s.at_step(t);
            let m1 = s.at_step(t + 1);
            let sys = if t == 0 { &s.ts } else { &s.cont };
            for (v, e) in sys.vars.iter().zip(&sys.next) {
                q.define(m1[v].as_var().unwrap().clone(), rename(e, &m)?);
            }
        }
    }
    q.assume(at(&p.precondition()?, 0));
    q.assume(rename(&fa, &p.a.at_step(0))?);
    q.assume(rename(&fb, &p.b.at_step(0))?);
    for e in assume {
        q.assume(at(&p.a.rename(e)?, 0));
    }
    let (ka, kb) = (p.a.at_step(bound), p.b.at_step(bound));
    let done = and([rename(p.a.quiescent(), &ka)?, rename(p.b.quiescent(), &kb)?]);
    let mut diffs = Vec::new();
    for (ea, eb) in &p.pairs {
        diffs.push(not(&eq(&rename(ea, &ka)?, &rename(eb, &kb)?)?));
    }
    // the assumed invariants must be re-established
    for e in &map.inv_a {
        diffs.push(not(&rename(e, &ka)?));
    }
    for e in &map.inv_b {
        diffs.push(not(&rename(e, &kb)?));
    }

    let mut mismatch = q.clone();
    mismatch.goal = and([done.clone(), or(diffs)]);
    let d = decide(engine, &mismatch)?;
    let status = match d.status {
        SolveStatus::Unknown(r) => return Ok(CheckReport { id, status: CheckStatus::Unknown(r), engine: d.engine.into(), queries: 1 }),
        SolveStatus::Sat(w) => {
            let (sa, wa, sb, wb) = p.states(&w.values, Some(0));
            let run = |m: &Machine, s: &Valuation, i: &Valuation, want: &str| -> Result<Valuation, CheckError> {
                let out = m.step(s, i, &w.ufs)?;
                if out.fired.as_ref().map(|f| f.instr.as_str()) != Some(want) {
                    return Err(replay_err(&id, format!("`{want}` did not fire")));
                }
                let (fin, _) = m
                    .run_child_to_completion(&out.next, i, &w.ufs, bound - 1)
                    .map_err(|e| replay_err(&id, e.to_string()))?;
                Ok(fin)
            };
            let ra = run(&Machine::new_flat(p.a.flat.clone()), &sa, &wa, ia)?;
            let rb = run(&Machine::new_flat(p.b.flat.clone()), &sb, &wb, ib)?;
            let mut broken = p.mismatch(&ra, &rb, &w.ufs)?;
            for (side, invs, st) in [("first", &map.inv_a, &ra), ("second", &map.inv_b, &rb)] {
                for e in invs.iter() {
                    if broken.is_none() && !holds(e, st, &w.ufs)? {
                        broken = Some(format!("invariant {e} of the {side} model no longer holds"));
                    }
                }
            }
            match broken {
                Some(m) => CheckStatus::Counterexample(Box::new(Counterexample {
                    values: w.values,
                    ufs: w.ufs,
                    detail: format!("after {} completes: {m}", pair_id(ia, ib)),
                })),
                None => return Err(replay_err(&id, "mapped state and invariants agree at completion")),
            }
        }
        SolveStatus::Unsat => {
            let mut term = q;
            term.goal = not(&done);
            let d2 = decide(engine, &term)?;
            let status = match d2.status {
                SolveStatus::Unsat => CheckStatus::Proved,
                SolveStatus::Unknown(r) => CheckStatus::Unknown(r),
                SolveStatus::Sat(_) => not_quiescent(),
            };
            return Ok(CheckReport { id, status, engine: d2.engine.into(), queries: 2 });
        }
    };
    Ok(CheckReport { id, status, engine: d.engine.into(), queries: 1 })
}

/// A completion obligation for one instruction pair.
#[derive(Clone, Debug)]
pub struct Completion {
    pub pair: (String, String),
    pub bound: usize,
    /// Conditions on the first model's starting state.
    pub assume: Vec<Expr>,
}

/// The per-instruction checks for `pairs`, then each completion check.
pub fn check_equiv(
    a: &IlaModel,
    b: &IlaModel,
    map: &StateMapping,
    pairs: &[(String, String)],
    completions: &[Completion],
    engine: &Engine,
) -> Result<Vec<CheckReport>, CheckError> {
    let mut out = check_instr_equiv(a, b, map, pairs, engine)?;
    let done: Vec<CheckReport> = completions
        .par_iter()
        .map(|c| check_completion_equiv(a, b, map, (&c.pair.0, &c.pair.1), c.bound, &c.assume, engine))
        .collect::<Result<_, _>>()?;
    out.extend(done);
    Ok(out)
}

// ---------------------------------------------------------------------------
// refinement

/// How a finite-state implementation refines an ILA.
#[derive(Clone, Debug)]
pub struct RefinementSpec {
    /// (ILA term, implementation term) pairs that must agree at commit points.
    pub pairs: Vec<(Expr, Expr)>,
    /// Implementation invariants assumed of the starting state.
    pub invariants: Vec<Expr>,
    /// Each ILA input as an implementation term, read when the checked
    /// instruction commits.
    pub inputs: Vec<(String, Expr)>,
    /// Holds on implementation transitions that commit an instruction.
    pub commit: Expr,
    /// Extra condition on the implementation state where checking starts.
    pub issue: Expr,
    /// Instructions that commit before the checked one.
    pub warmup: usize,
    /// Implementation steps explored.
    pub bound: usize,
}

const SPEC: &str = "spec:";
const IMPL: &str = "impl:";
const COMMITS: &str = "ref:commits";

fn prefixed_at(prefix: &str, t: usize) -> impl Fn(&Var) -> Option<Expr> + '_ {
    move |v| Some(Expr::var(&at_var(&v.renamed(format!("{prefix}{}", v.name())), t)))
}

fn map_at(e: &Expr, prefix: &str, t: usize) -> Result<Expr, ExprError> {
    Ok(map_vars(std::slice::from_ref(e), prefixed_at(prefix, t))?.pop().unwrap())
}

fn validate_refinement(spec: &IlaModel, fsm: &TransitionSystem, r: &RefinementSpec) -> Result<(), CheckError> {
    if !spec.children().is_empty() {
        return Err(CheckError::Mapping("the refined ILA must not have child ILAs".into()));
    }
    let fsm_state: Vec<&Var> = fsm.vars.iter().collect();
    let fsm_all: Vec<&Var> = fsm.vars.iter().chain(&fsm.inputs).collect();
    let within = |e: &Expr, allowed: &[&Var], what: &str| -> Result<(), CheckError> {
        for v in crate::expr::free_vars(e) {
            if !allowed.contains(&&v) {
                return Err(CheckError::Mapping(format!("`{}` in {what} is not declared there", v.name())));
            }
        }
        Ok(())
    };
    let ila_state: Vec<&Var> = spec.state_vars().iter().collect();
    for (x, y) in &r.pairs {
        within(x, &ila_state, "an ILA term")?;
        within(y, &fsm_state, "an implementation term")?;
        if x.sort() != y.sort() {
            return Err(CheckError::Mapping(format!("{x} has sort {} but {y} has sort {}", x.sort(), y.sort())));
        }
    }
    for e in &r.invariants {
        within(e, &fsm_state, "an invariant")?;
    }
    within(&r.issue, &fsm_state, "the issue condition")?;
    within(&r.commit, &fsm_all, "the commit condition")?;
    for v in spec.inputs() {
        let (_, e) = r
            .inputs
            .iter()
            .find(|(n, _)| n == v.name())
            .ok_or_else(|| CheckError::Mapping(format!("ILA input `{}` has no implementation term", v.name())))?;
        within(e, &fsm_all, "an input term")?;
        if e.sort() != v.sort() {
            return Err(CheckError::Mapping(format!("input `{}` is {} but its term is {}", v.name(), v.sort(), e.sort())));
        }
    }
    for (n, _) in &r.inputs {
        if spec.input_var(n).is_none() {
            return Err(CheckError::Mapping(format!("`{n}` is not an ILA input")));
        }
    }
    if !r.commit.sort().is_bool() || !r.issue.sort().is_bool() {
        return Err(CheckError::Mapping("commit and issue conditions must be boolean".into()));
    }
    Ok(())
}

/// Per root instruction `X` of `spec`: start the implementation in any state
/// satisfying the invariants; at the commit of the `warmup`-th instruction
/// the ILA state is the mapped implementation state; the ILA executes `X`;
/// at the next commit the mapped implementation state must equal the ILA's.
/// No such commit within `bound` steps on some path is unknown.
pub fn check_fsm_refinement(
    spec: &IlaModel,
    fsm: &TransitionSystem,
    r: &RefinementSpec,
    engine: &Engine,
) -> Result<Vec<CheckReport>, CheckError> {
    validate_refinement(spec, fsm, r)?;
    let names: Vec<String> = spec.instructions().iter().map(|i| i.name().to_string()).collect();
    run_all(names, |x| refine_one(spec, fsm, r, &x, engine))
}

struct RefineQuery {
    base: Query,
    chk: Vec<Expr>,
    post: Vec<Expr>,
}

fn refine_query(spec: &IlaModel, fsm: &TransitionSystem, r: &RefinementSpec, instr: &str) -> Result<RefineQuery, CheckError> {
    let k = r.bound;
    let w = r.warmup;
    let ila = lower(spec);
    let mut roots: Vec<Var> = fsm.vars.iter().map(|v| at_var(&v.renamed(format!("{IMPL}{}", v.name())), 0)).collect();
    for t in 0..k {
        roots.extend(fsm.inputs.iter().map(|v| at_var(&v.renamed(format!("{IMPL}{}", v.name())), t)));
    }
    let spec_var = |v: &Var, t: usize| at_var(&v.renamed(format!("{SPEC}{}", v.name())), t);
    // ILA variables paired with never-changing implementation variables are
    // identified with them instead of constrained.
    let mut unified: HashMap<Var, Var> = HashMap::new();
    for (x, y) in &r.pairs {
        if let (Some(xv), Some(yv)) = (x.as_var(), y.as_var()) {
            if fsm.next_of(yv) == Some(y) && !unified.contains_key(xv) {
                unified.insert(xv.clone(), yv.clone());
            }
        }
    }
    // Other ILA variables paired directly with an implementation term are
    // defined as that term at the correspondence point, so that the query
    // carries no (array) equalities for them.
    let mut direct: HashMap<Var, Expr> = HashMap::new();
    for (x, y) in &r.pairs {
        if let Some(xv) = x.as_var() {
            if !unified.contains_key(xv) && !direct.contains_key(xv) {
                direct.insert(xv.clone(), y.clone());
            }
        }
    }
    for v in spec.state_vars() {
        if !unified.contains_key(v) && !direct.contains_key(v) {
            roots.push(spec_var(v, 0));
        }
    }
    let mut q = Query::new(roots, Expr::tt());
    for v in spec.state_vars() {
        if let Some(u) = unified.get(v) {
            q.define(spec_var(v, 0), map_at(&Expr::var(u), IMPL, 0)?);
        }
    }
    for t in 0..k {
        for (v, e) in fsm.vars.iter().zip(&fsm.next) {
            q.define(at_var(&v.renamed(format!("{IMPL}{}", v.name())), t + 1), map_at(e, IMPL, t)?);
        }
    }
    for t in 0..k {
        for c in &fsm.constraints {
            q.assume(map_at(c, IMPL, t)?);
        }
    }
    for inv in &r.invariants {
        q.assume(map_at(inv, IMPL, 0)?);
    }

    let top = k.max(r.warmup + 1);
    let cw = usize::BITS - top.leading_zeros() + 1;
    let cnt = |t: usize| Var::state(crate::ts::step_name(COMMITS, t), Sort::bv(cw));
    let bv = |n: usize| Expr::bv(cw, n as u128).unwrap();
    q.define(cnt(0), bv(0));
    let mut commit = Vec::new();
    for t in 0..k {
        let c = map_at(&r.commit, IMPL, t)?;
        let inc = Expr::ite(&c, &bv(1), &bv(0))?;
        q.define(cnt(t + 1), Expr::bin(Op::BvAdd, &Expr::var(&cnt(t)), &inc)?);
        commit.push(c);
    }
    let reached = |t: usize, n: usize| and([commit[t].clone(), Expr::var(&cnt(t)).eq_to(&bv(n)).unwrap()]);
    let post_at = |fsm_t: usize| -> Result<Expr, CheckError> {
        let mut c = Vec::new();
        for (x, y) in &r.pairs {
            c.push(eq(&map_at(x, SPEC, 1)?, &map_at(y, IMPL, fsm_t)?)?);
        }
        Ok(and(c))
    };
    let skip = |x: &Expr, y: &Expr| {
        x.as_var().is_some_and(|xv| unified.get(xv).is_some_and(|u| y.as_var() == Some(u)) || direct.get(xv) == Some(y))
    };
    let corr0 = |fsm_t: usize| -> Result<Expr, CheckError> {
        let mut c = Vec::new();
        for (x, y) in &r.pairs {
            if !skip(x, y) {
                c.push(eq(&map_at(x, SPEC, 0)?, &map_at(y, IMPL, fsm_t)?)?);
            }
        }
        Ok(and(c))
    };
    let mut direct_vars: Vec<&Var> = direct.keys().collect();
    direct_vars.sort();
    if w == 0 {
        for v in direct_vars {
            q.define(spec_var(v, 0), map_at(&direct[v], IMPL, 0)?);
        }
        q.assume(corr0(0)?);
        q.assume(map_at(&r.issue, IMPL, 0)?);
    } else {
        for v in direct_vars {
            let mut val = map_at(&direct[v], IMPL, k)?;
            for t in (0..k).rev() {
                val = Expr::ite(&reached(t, w - 1), &map_at(&direct[v], IMPL, t + 1)?, &val)?;
            }
            q.define(spec_var(v, 0), val);
        }
        for t in 0..k {
            let at_point = and([corr0(t + 1)?, map_at(&r.issue, IMPL, t + 1)?]);
            q.assume(reached(t, w - 1).implies(&at_point)?);
        }
    }
    let chk: Vec<Expr> = (0..k).map(|t| reached(t, w)).collect();

    for v in spec.inputs() {
        let (_, e) = r.inputs.iter().find(|(n, _)| n == v.name()).unwrap();
        let mut val = map_at(e, IMPL, k - 1)?;
        for t in (0..k.saturating_sub(1)).rev() {
            val = Expr::ite(&chk[t], &map_at(e, IMPL, t)?, &val)?;
        }
        q.define(spec_var(v, 0), val);
    }
    for (v, e) in ila.vars.iter().zip(&ila.next) {
        q.define(spec_var(v, 1), map_at(e, SPEC, 0)?);
    }
    let fire = ila
        .label(&format!("fire:{}.{instr}", spec.name()))
        .ok_or_else(|| CheckError::Mapping(format!("no instruction `{instr}`")))?;
    q.assume(map_at(fire, SPEC, 0)?);
    let post = (0..k).map(|t| post_at(t + 1)).collect::<Result<Vec<_>, _>>()?;
    Ok(RefineQuery { base: q, chk, post })
}

fn refine_one(spec: &IlaModel, fsm: &TransitionSystem, r: &RefinementSpec, instr: &str, engine: &Engine) -> Result<CheckReport, CheckError> {
    let id = format!("{instr}:refine");
    let no_commit = || CheckStatus::Unknown(format!("no commit within bound {}", r.bound));
    if r.bound == 0 {
        return Ok(CheckReport { id, status: no_commit(), engine: engine.name().into(), queries: 0 });
    }
    let rq = refine_query(spec, fsm, r, instr)?;
    let mut mismatch = rq.base.clone();
    mismatch.goal = or(rq.chk.iter().zip(&rq.post).map(|(c, p)| and([c.clone(), not(p)])));
    let d = decide(engine, &mismatch)?;
    match d.status {
        SolveStatus::Unknown(why) => Ok(CheckReport { id, status: CheckStatus::Unknown(why), engine: d.engine.into(), queries: 1 }),
        SolveStatus::Sat(w) => {
            let detail = replay_refinement(spec, fsm, r, instr, &mismatch, &w.values, &w.ufs).map_err(|e| replay_err(&id, e))?;
            let status = CheckStatus::Counterexample(Box::new(Counterexample { values: w.values, ufs: w.ufs, detail }));
            Ok(CheckReport { id, status, engine: d.engine.into(), queries: 1 })
        }
        SolveStatus::Unsat => {
            let mut cover = rq.base;
            cover.goal = not(&or(rq.chk));
            let d2 = decide(engine, &cover)?;
            let status = match d2.status {
                SolveStatus::Unsat => CheckStatus::Proved,
                SolveStatus::Unknown(why) => CheckStatus::Unknown(why),
                SolveStatus::Sat(_) => no_commit(),
            };
            Ok(CheckReport { id, status, engine: d2.engine.into(), queries: 2 })
        }
    }
}

fn replay_refinement(
    spec: &IlaModel,
    fsm: &TransitionSystem,
    r: &RefinementSpec,
    instr: &str,
    q: &Query,
    values: &Valuation,
    ufs: &UfTable,
) -> Result<String, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let named = |v: &Var, prefix: &str, t: usize| {
        let n = crate::ts::step_name(&format!("{prefix}{}", v.name()), t);
        values.get_by_name(&n).cloned().unwrap_or_else(|| Value::zero(v.sort()))
    };
    // implementation run
    let mut states: Vec<Valuation> = vec![fsm.vars.iter().map(|v| (v.clone(), named(v, IMPL, 0))).collect()];
    let mut ins: Vec<Valuation> = Vec::new();
    let mut commits = 0;
    let (mut t1, mut t2) = (if r.warmup == 0 { Some(0) } else { None }, None);
    for t in 0..r.bound {
        let i: Valuation = fsm.inputs.iter().map(|v| (v.clone(), named(v, IMPL, t))).collect();
        let env = states[t].merged(&i);
        if holds(&r.commit, &env, ufs).map_err(|e| err(&e))? {
            commits += 1;
            if commits == r.warmup {
                t1 = Some(t + 1);
            }
            if commits == r.warmup + 1 && t2.is_none() {
                t2 = Some(t);
            }
        }
        states.push(fsm.step(&states[t], &i, ufs).map_err(|e| err(&e))?);
        ins.push(i);
    }
    let (t1, t2) = match (t1, t2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err("the implementation run does not reach the checked commit".into()),
    };
    // ILA step from the witness state
    let full = q.complete(values, ufs).map_err(|e| err(&e))?;
    let sigma1: Valuation = spec
        .state_vars()
        .iter()
        .map(|v| {
            let n = crate::ts::step_name(&format!("{SPEC}{}", v.name()), 0);
            (v.clone(), full.get_by_name(&n).cloned().unwrap_or_else(|| Value::zero(v.sort())))
        })
        .collect();
    for (x, y) in &r.pairs {
        if eval(x, &sigma1, ufs).map_err(|e| err(&e))? != eval(y, &states[t1], ufs).map_err(|e| err(&e))? {
            return Err(format!("{x} does not correspond to {y} at step {t1}"));
        }
    }
    let env2 = states[t2].merged(&ins[t2]);
    let mut w = Valuation::new();
    for v in spec.inputs() {
        let (_, e) = r.inputs.iter().find(|(n, _)| n == v.name()).unwrap();
        w.insert(v.clone(), eval(e, &env2, ufs).map_err(|e| err(&e))?);
    }
    let out = Machine::new(spec).step(&sigma1, &w, ufs).map_err(|e| err(&e))?;
    if out.fired.as_ref().map(|f| f.instr.as_str()) != Some(instr) {
        return Err(format!("`{instr}` does not fire in the ILA"));
    }
    for (x, y) in &r.pairs {
        let (a, b) = (eval(x, &out.next, ufs).map_err(|e| err(&e))?, eval(y, &states[t2 + 1], ufs).map_err(|e| err(&e))?);
        if a != b {
            return Ok(format!("{instr} commits at step {t2}: ILA {x} = {a} but implementation {y} = {b}"));
        }
    }
    Err("implementation and ILA agree after the commit".into())
}

// ---------------------------------------------------------------------------
// invariants

/// One-step induction: the invariants hold initially (a failure is a
/// counterexample) and are preserved by every transition (a failure is
/// unknown: the invariants are not inductive, not necessarily violated).
pub fn check_invariant_inductive(ts: &TransitionSystem, inv: &[Expr], engine: &Engine) -> Result<Vec<CheckReport>, CheckError> {
    for e in inv {
        if !e.sort().is_bool() {
            return Err(CheckError::Mapping(format!("invariant {e} is not boolean")));
        }
        for v in crate::expr::free_vars(e) {
            if !ts.vars.contains(&v) {
                return Err(CheckError::Mapping(format!("`{}` in invariant is not a state variable", v.name())));
            }
        }
    }
    let all = and(inv.iter().cloned());
    let mut roots: Vec<Var> = ts.vars.iter().map(|v| at_var(v, 0)).collect();
    roots.extend(ts.inputs.iter().map(|v| at_var(v, 0)));
    run_all(vec![false, true], |step| {
        let mut q = Query::new(roots.clone(), Expr::tt());
        for c in &ts.constraints {
            q.assume(at(c, 0));
        }
        let id = if step { "invariant:step" } else { "invariant:init" };
        if step {
            q.roots.extend(ts.inputs.iter().map(|v| at_var(v, 1)));
            for (v, e) in ts.vars.iter().zip(&ts.next) {
                q.define(at_var(v, 1), at(e, 0));
            }
            for c in &ts.constraints {
                q.assume(at(c, 1));
            }
            q.assume(at(&all, 0));
            q.goal = not(&at(&all, 1));
        } else {
            q.assume(at(&ts.init, 0));
            q.goal = not(&at(&all, 0));
        }
        let d = decide(engine, &q)?;
        let status = match d.status {
            SolveStatus::Unsat => CheckStatus::Proved,
            SolveStatus::Unknown(r) => CheckStatus::Unknown(r),
            SolveStatus::Sat(w) => {
                let s0: Valuation = ts.vars.iter().map(|v| (v.clone(), w.values.get(&at_var(v, 0)).cloned().unwrap())).collect();
                let i0: Valuation = ts.inputs.iter().map(|v| (v.clone(), w.values.get(&at_var(v, 0)).cloned().unwrap())).collect();
                let failing = |s: &Valuation| -> Result<Vec<String>, CheckError> {
                    let mut f = Vec::new();
                    for e in inv {
                        if !holds(e, s, &w.ufs)? {
                            f.push(e.to_string());
                        }
                    }
                    Ok(f)
                };
                if step {
                    let s1 = ts.step(&s0, &i0, &w.ufs)?;
                    let broken = failing(&s1)?;
                    if !failing(&s0)?.is_empty() || broken.is_empty() {
                        return Err(replay_err(id, "induction step does not replay"));
                    }
                    let from: Vec<String> = s0.iter().map(|(v, x)| format!("{} = {x}", v.name())).collect();
                    CheckStatus::Unknown(format!("not inductive: {} breaks from {}", broken.join(", "), from.join(", ")))
                } else {
                    let broken = failing(&s0)?;
                    if !holds(&ts.init, &s0.merged(&i0), &w.ufs)? || broken.is_empty() {
                        return Err(replay_err(id, "initial state does not replay"));
                    }
                    CheckStatus::Counterexample(Box::new(Counterexample {
                        values: w.values,
                        ufs: w.ufs,
                        detail: format!("initial state violates {}", broken.join(", ")),
                    }))
                }
            }
        };
        Ok(CheckReport { id: id.into(), status, engine: d.engine.into(), queries: 1 })
    })
}
