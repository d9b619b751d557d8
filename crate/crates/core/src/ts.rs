//! Flat labeled transition systems: lowering from ILAs, unrolling for
//! bounded checks, and products for equivalence and refinement.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::eval::{eval_many, EvalError};
use crate::expr::{free_vars_all, map_vars, Expr, ExprError, Var};
use crate::hierarchy::flatten;
use crate::model::{IlaModel, InitValue};
use crate::query::Query;
use crate::value::{UfTable, Valuation, Value};

/// Separator between a variable name and its time step in unrolled formulas.
pub const STEP_SEP: char = '@';

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TsError {
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("no next-state function for `{0}`")]
    MissingNext(String),
    #[error("sort error: {0}")]
    Sort(String),
    #[error("`{var}` is indexed at step {step} beyond bound {bound}")]
    IndexOutOfBound { var: String, step: usize, bound: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    pub name: String,
    pub vars: Vec<Var>,
    pub inputs: Vec<Var>,
    pub init: Expr,
    /// Parallel to `vars`.
    pub next: Vec<Expr>,
    pub constraints: Vec<Expr>,
    pub labels: Vec<(String, Expr)>,
}

impl TransitionSystem {
    /// Build and validate.
    pub fn new(
        name: impl Into<String>,
        vars: Vec<Var>,
        inputs: Vec<Var>,
        init: Expr,
        next: Vec<(Var, Expr)>,
        constraints: Vec<Expr>,
        labels: Vec<(String, Expr)>,
    ) -> Result<TransitionSystem, TsError> {
        let mut by_var: HashMap<Var, Expr> = HashMap::new();
        for (v, e) in next {
            if !vars.contains(&v) {
                return Err(TsError::Undeclared(v.name().to_string()));
            }
            if by_var.insert(v.clone(), e).is_some() {
                return Err(TsError::Duplicate(v.name().to_string()));
            }
        }
        let mut nx = Vec::with_capacity(vars.len());
        for v in &vars {
            nx.push(by_var.remove(v).ok_or_else(|| TsError::MissingNext(v.name().to_string()))?);
        }
        let ts = TransitionSystem { name: name.into(), vars, inputs, init, next: nx, constraints, labels };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<(), TsError> {
        let mut names: HashSet<&str> = HashSet::new();
        for v in self.vars.iter().chain(&self.inputs) {
            if !names.insert(v.name()) {
                return Err(TsError::Duplicate(v.name().to_string()));
            }
            v.sort().check()?;
        }
        let mut label_names: HashSet<&str> = HashSet::new();
        for (l, _) in &self.labels {
            if !label_names.insert(l) {
                return Err(TsError::Duplicate(l.clone()));
            }
        }
        let declared: HashSet<&Var> = self.vars.iter().chain(&self.inputs).collect();
        let mut all: Vec<&Expr> = vec![&self.init];
        all.extend(self.next.iter());
        all.extend(self.constraints.iter());
        all.extend(self.labels.iter().map(|(_, e)| e));
        let roots: Vec<Expr> = all.iter().map(|e| (*e).clone()).collect();
        for v in free_vars_all(&roots) {
            if !declared.contains(&v) {
                return Err(TsError::Undeclared(v.name().to_string()));
            }
        }
        if !self.init.sort().is_bool() {
            return Err(TsError::Sort("init must be boolean".into()));
        }
        for (v, e) in self.vars.iter().zip(&self.next) {
            if v.sort() != e.sort() {
                return Err(TsError::Sort(format!("next({}) has sort {}, expected {}", v.name(), e.sort(), v.sort())));
            }
        }
        for c in &self.constraints {
            if !c.sort().is_bool() {
                return Err(TsError::Sort("constraints must be boolean".into()));
            }
        }
        for (l, e) in &self.labels {
            if !e.sort().is_bool() {
                return Err(TsError::Sort(format!("label `{l}` must be boolean")));
            }
        }
        Ok(())
    }

    pub fn label(&self, name: &str) -> Option<&Expr> {
        self.labels.iter().find(|(l, _)| l == name).map(|(_, e)| e)
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.iter().find(|v| v.name() == name)
    }

    pub fn input(&self, name: &str) -> Option<&Var> {
        self.inputs.iter().find(|v| v.name() == name)
    }

    pub fn next_of(&self, v: &Var) -> Option<&Expr> {
        self.vars.iter().position(|x| x == v).map(|i| &self.next[i])
    }

    /// One concrete transition.
    pub fn step(&self, state: &Valuation, inputs: &Valuation, ufs: &UfTable) -> Result<Valuation, EvalError> {
        let env = state.merged(inputs);
        let vals = eval_many(&self.next, &env, ufs)?;
        Ok(self.vars.iter().cloned().zip(vals).collect())
    }

    /// Values of every label in a state (with the inputs of that step).
    pub fn labels_at(&self, state: &Valuation, inputs: &Valuation, ufs: &UfTable) -> Result<Vec<(String, bool)>, EvalError> {
        let env = state.merged(inputs);
        let es: Vec<Expr> = self.labels.iter().map(|(_, e)| e.clone()).collect();
        let vals = eval_many(&es, &env, ufs)?;
        Ok(self
            .labels
            .iter()
            .zip(vals)
            .map(|((l, _), v)| (l.clone(), v.as_bool() == Some(true)))
            .collect())
    }
}

/// Lower a validated model to a transition system.
///
/// The hierarchy is compiled into guards: node `k` is selected when its
/// valid function holds and no node that preempts it is active, and each
/// variable's next-state function is an if-then-else cascade over the
/// instructions that write it, defaulting to the current value.
pub fn lower(m: &IlaModel) -> TransitionSystem {
    lower_flat(&flatten(m).expect("validated models flatten"), false)
}

/// Like [`lower`], but the root ILA never fires: only child programs
/// advance, and a quiescent state stalls.
pub fn lower_children_only(m: &IlaModel) -> TransitionSystem {
    lower_flat(&flatten(m).expect("validated models flatten"), true)
}

pub(crate) fn lower_flat(flat: &crate::hierarchy::FlatIla, children_only: bool) -> TransitionSystem {
    let n = flat.nodes.len();
    let child_valids: Vec<Expr> = flat.nodes[1..].iter().map(|x| x.valid.clone()).collect();
    let quiescent = Expr::or_all(child_valids.clone()).unwrap().not().unwrap();

    let mut fires: Vec<(String, Expr, &crate::hierarchy::FlatInstr)> = Vec::new();
    for k in 0..n {
        let node = &flat.nodes[k];
        let sel = if k == 0 && children_only {
            Expr::ff()
        } else if k == 0 {
            Expr::and_all([node.valid.clone(), quiescent.clone()]).unwrap()
        } else {
            let pre: Vec<Expr> = flat.preempting(k).iter().map(|&j| flat.nodes[j].valid.clone()).collect();
            Expr::and_all([node.valid.clone(), Expr::or_all(pre).unwrap().not().unwrap()]).unwrap()
        };
        for ins in &node.instrs {
            let g = Expr::and_all([sel.clone(), ins.decode.clone()]).unwrap();
            fires.push((format!("fire:{}", ins.qualified), g, ins));
        }
    }

    let mut next = Vec::with_capacity(flat.state.len());
    for v in &flat.state {
        let mut e = Expr::var(v);
        for (_, g, ins) in fires.iter().rev() {
            if let Some((_, u)) = ins.updates.iter().find(|(x, _)| x == v) {
                e = Expr::ite(g, u, &e).unwrap();
            }
        }
        next.push((v.clone(), e));
    }

    let init_terms: Vec<Expr> = flat
        .state
        .iter()
        .zip(&flat.init)
        .filter_map(|(v, iv)| match iv {
            InitValue::Value(val) => Some(Expr::var(v).eq_to(&value_expr(val)).unwrap()),
            InitValue::Unconstrained => None,
        })
        .collect();
    let init = Expr::and_all(init_terms).unwrap();

    let any_fire = Expr::or_all(fires.iter().map(|(_, g, _)| g.clone())).unwrap();
    let mut labels: Vec<(String, Expr)> = fires.iter().map(|(l, g, _)| (l.clone(), g.clone())).collect();
    labels.push(("quiescent".into(), quiescent));
    labels.push(("stall".into(), any_fire.not().unwrap()));

    TransitionSystem::new(flat.name.clone(), flat.state.clone(), flat.inputs.clone(), init, next, Vec::new(), labels)
        .expect("lowering preserves well-formedness")
}

/// Literal term for a scalar value.
pub fn value_expr(v: &Value) -> Expr {
    match v {
        Value::Bool(b) => Expr::bool(*b),
        Value::Bv { width, bits } => Expr::bv(*width, *bits).unwrap(),
        Value::Array(_) => panic!("array values have no literal term"),
    }
}

/// Name of `v` at step `t`.
pub fn step_name(name: &str, t: usize) -> String {
    format!("{name}{STEP_SEP}{t}")
}

pub fn at_var(v: &Var, t: usize) -> Var {
    v.renamed(step_name(v.name(), t))
}

/// Rename every variable of `e` to its copy at step `t`.
pub fn at(e: &Expr, t: usize) -> Expr {
    map_vars(std::slice::from_ref(e), |v| Some(Expr::var(&at_var(v, t)))).unwrap().pop().unwrap()
}

/// Split `x@t` into (`x`, t).
pub fn split_step(name: &str) -> Option<(&str, usize)> {
    let (base, t) = name.rsplit_once(STEP_SEP)?;
    Some((base, t.parse().ok()?))
}

/// Unroll `ts` for `k` transitions. The query's roots are the state at step 0
/// and the inputs at steps `0..=k`; later states are defs. `goal` must be over
/// step-indexed variables (see [`at`]).
pub fn unroll(ts: &TransitionSystem, k: usize, goal: &Expr) -> Result<Query, TsError> {
    let declared: HashSet<&str> = ts.vars.iter().chain(&ts.inputs).map(|v| v.name()).collect();
    for v in free_vars_all(std::slice::from_ref(goal)) {
        match split_step(v.name()) {
            Some((base, t)) if declared.contains(base) => {
                if t > k {
                    return Err(TsError::IndexOutOfBound { var: base.to_string(), step: t, bound: k });
                }
            }
            _ => return Err(TsError::Undeclared(v.name().to_string())),
        }
    }
    let mut q = unroll_base(ts, k);
    q.goal = goal.clone();
    Ok(q)
}

/// Unrolling with goal `true`, for callers that assemble their own goal.
pub fn unroll_base(ts: &TransitionSystem, k: usize) -> Query {
    let mut roots: Vec<Var> = ts.vars.iter().map(|v| at_var(v, 0)).collect();
    for t in 0..=k {
        roots.extend(ts.inputs.iter().map(|v| at_var(v, t)));
    }
    let mut q = Query::new(roots, Expr::tt());
    q.assume(at(&ts.init, 0));
    for t in 0..k {
        for (v, e) in ts.vars.iter().zip(&ts.next) {
            q.define(at_var(v, t + 1), at(e, t));
        }
    }
    for t in 0..=k {
        for c in &ts.constraints {
            q.assume(at(c, t));
        }
    }
    q
}

/// Variables of `ts` prefixed with `prefix`.
pub fn prefixed(prefix: &str, v: &Var) -> Var {
    v.renamed(format!("{prefix}{}", v.name()))
}

/// Synchronous product. Variables, inputs and labels of each side get their
/// prefix; each `(a_input, b_input)` pair in `shared_inputs` is identified
/// (the product keeps the `a` side's name).
pub fn product(
    a: &TransitionSystem,
    b: &TransitionSystem,
    prefix_a: &str,
    prefix_b: &str,
    shared_inputs: &[(String, String)],
) -> Result<TransitionSystem, TsError> {
    let mut ren_b: HashMap<Var, Expr> = HashMap::new();
    for (ia, ib) in shared_inputs {
        let va = a.input(ia).ok_or_else(|| TsError::Undeclared(ia.clone()))?;
        let vb = b.input(ib).ok_or_else(|| TsError::Undeclared(ib.clone()))?;
        if va.sort() != vb.sort() {
            return Err(TsError::Sort(format!("shared inputs `{ia}` ({}) and `{ib}` ({}) differ", va.sort(), vb.sort())));
        }
        ren_b.insert(vb.clone(), Expr::var(&prefixed(prefix_a, va)));
    }
    let ra = |e: &Expr| map_vars(std::slice::from_ref(e), |v| Some(Expr::var(&prefixed(prefix_a, v)))).map(|mut x| x.pop().unwrap());
    let rb = |e: &Expr| {
        map_vars(std::slice::from_ref(e), |v| Some(ren_b.get(v).cloned().unwrap_or_else(|| Expr::var(&prefixed(prefix_b, v)))))
            .map(|mut x| x.pop().unwrap())
    };
    let shared_b: BTreeSet<&Var> = ren_b.keys().collect();

    let mut vars: Vec<Var> = a.vars.iter().map(|v| prefixed(prefix_a, v)).collect();
    vars.extend(b.vars.iter().map(|v| prefixed(prefix_b, v)));
    let mut inputs: Vec<Var> = a.inputs.iter().map(|v| prefixed(prefix_a, v)).collect();
    inputs.extend(b.inputs.iter().filter(|v| !shared_b.contains(v)).map(|v| prefixed(prefix_b, v)));
    let mut next = Vec::new();
    for (v, e) in a.vars.iter().zip(&a.next) {
        next.push((prefixed(prefix_a, v), ra(e)?));
    }
    for (v, e) in b.vars.iter().zip(&b.next) {
        next.push((prefixed(prefix_b, v), rb(e)?));
    }
    let init = Expr::and_all([ra(&a.init)?, rb(&b.init)?])?;
    let mut constraints = Vec::new();
    for c in &a.constraints {
        constraints.push(ra(c)?);
    }
    for c in &b.constraints {
        constraints.push(rb(c)?);
    }
    let mut labels = Vec::new();
    for (l, e) in &a.labels {
        labels.push((format!("{prefix_a}{l}"), ra(e)?));
    }
    for (l, e) in &b.labels {
        labels.push((format!("{prefix_b}{l}"), rb(e)?));
    }
    TransitionSystem::new(format!("{}*{}", a.name, b.name), vars, inputs, init, next, constraints, labels)
}
