//! Concrete execution of hierarchical models.
//!
//! One call to [`Machine::step`] fires at most one instruction. If any child
//! ILA is active (its valid function holds) the deepest active one runs, ties
//! broken by preorder position; otherwise the root runs when its valid holds;
//! otherwise the step stalls and the state is unchanged. A parent instruction
//! that starts a child program only updates state; the child's first
//! instruction fires in the following step.

use crate::eval::{eval, eval_many, EvalError};
use crate::expr::Var;
use crate::hierarchy::{flatten, FlatIla};
use crate::model::{IlaModel, InitValue};
use crate::value::{UfTable, Valuation, Value};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("decode is not one-hot in `{path}`: {} instructions enabled ({})", enabled.len(), enabled.join(", "))]
    DynamicOneHotViolation { path: String, enabled: Vec<String>, state: Valuation, inputs: Valuation },
    #[error("child program still active after {budget} steps")]
    BudgetExhausted { budget: usize, state: Valuation },
    #[error("state variable `{0}` has no constant initial value")]
    UnconstrainedInit(String),
}

/// The instruction a step executed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fired {
    /// Dot-joined ILA path, starting at the root model's name.
    pub path: String,
    pub instr: String,
}

impl Fired {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.path, self.instr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    /// `None` means the step stalled.
    pub fired: Option<Fired>,
    pub next: Valuation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub inputs: Valuation,
    pub outcome: StepOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub initial: Valuation,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State after `t` steps (`t = 0` is the initial state).
    pub fn state(&self, t: usize) -> &Valuation {
        if t == 0 {
            &self.initial
        } else {
            &self.steps[t - 1].outcome.next
        }
    }

    pub fn final_state(&self) -> &Valuation {
        self.state(self.steps.len())
    }
}

/// A model prepared for repeated stepping.
#[derive(Clone, Debug)]
pub struct Machine {
    flat: FlatIla,
}

impl Machine {
    pub fn new(m: &IlaModel) -> Machine {
        Machine { flat: flatten(m).expect("validated models flatten") }
    }

    pub fn new_flat(flat: FlatIla) -> Machine {
        Machine { flat }
    }

    pub fn flat(&self) -> &FlatIla {
        &self.flat
    }

    pub fn state_vars(&self) -> &[Var] {
        &self.flat.state
    }

    pub fn inputs(&self) -> &[Var] {
        &self.flat.inputs
    }

    /// Initial state from constant init values; fails on any unconstrained one.
    pub fn initial_state(&self) -> Result<Valuation, InterpError> {
        let mut v = Valuation::new();
        for (x, iv) in self.flat.state.iter().zip(&self.flat.init) {
            match iv {
                InitValue::Value(val) => v.insert(x.clone(), val.clone()),
                InitValue::Unconstrained => return Err(InterpError::UnconstrainedInit(x.name().to_string())),
            }
        }
        Ok(v)
    }

    /// Initial state where unconstrained variables take values from `seed`
    /// (or zero when absent).
    pub fn initial_state_with(&self, seed: &Valuation) -> Valuation {
        let mut v = Valuation::new();
        for (x, iv) in self.flat.state.iter().zip(&self.flat.init) {
            let val = match (seed.get(x), iv) {
                (Some(s), _) => s.clone(),
                (None, InitValue::Value(c)) => c.clone(),
                (None, InitValue::Unconstrained) => Value::zero(x.sort()),
            };
            v.insert(x.clone(), val);
        }
        v
    }

    /// Index of the node that would run in `env`, if any.
    fn scheduled(&self, env: &Valuation, ufs: &UfTable, children_only: bool) -> Result<Option<usize>, InterpError> {
        let valids: Vec<_> = self.flat.nodes.iter().map(|n| n.valid.clone()).collect();
        let vals = eval_many(&valids, env, ufs)?;
        let mut best: Option<usize> = None;
        for k in 1..self.flat.nodes.len() {
            if vals[k].as_bool() == Some(true) {
                match best {
                    Some(b) if self.flat.nodes[b].depth >= self.flat.nodes[k].depth => {}
                    _ => best = Some(k),
                }
            }
        }
        if best.is_none() && !children_only && vals[0].as_bool() == Some(true) {
            best = Some(0);
        }
        Ok(best)
    }

    pub fn any_child_active(&self, state: &Valuation, inputs: &Valuation, ufs: &UfTable) -> Result<bool, InterpError> {
        let env = state.merged(inputs);
        Ok(self.scheduled(&env, ufs, true)?.is_some())
    }

    fn step_inner(
        &self,
        state: &Valuation,
        inputs: &Valuation,
        ufs: &UfTable,
        children_only: bool,
    ) -> Result<StepOutcome, InterpError> {
        let env = state.merged(inputs);
        let Some(k) = self.scheduled(&env, ufs, children_only)? else {
            return Ok(StepOutcome { fired: None, next: state.clone() });
        };
        let node = &self.flat.nodes[k];
        let decodes: Vec<_> = node.instrs.iter().map(|i| i.decode.clone()).collect();
        let on = eval_many(&decodes, &env, ufs)?;
        let enabled: Vec<usize> = (0..on.len()).filter(|&i| on[i].as_bool() == Some(true)).collect();
        if enabled.len() != 1 {
            return Err(InterpError::DynamicOneHotViolation {
                path: node.path.clone(),
                enabled: enabled.iter().map(|&i| node.instrs[i].name.clone()).collect(),
                state: state.clone(),
                inputs: inputs.clone(),
            });
        }
        let ins = &node.instrs[enabled[0]];
        let exprs: Vec<_> = ins.updates.iter().map(|(_, e)| e.clone()).collect();
        let vals = eval_many(&exprs, &env, ufs)?;
        let mut next = state.clone();
        for ((v, _), val) in ins.updates.iter().zip(vals) {
            next.insert(v.clone(), val);
        }
        Ok(StepOutcome { fired: Some(Fired { path: node.path.clone(), instr: ins.name.clone() }), next })
    }

    pub fn step(&self, state: &Valuation, inputs: &Valuation, ufs: &UfTable) -> Result<StepOutcome, InterpError> {
        self.step_inner(state, inputs, ufs, false)
    }

    pub fn run_from(&self, initial: Valuation, inputs: &[Valuation], ufs: &UfTable) -> Result<Trace, InterpError> {
        let mut trace = Trace { initial, steps: Vec::with_capacity(inputs.len()) };
        for w in inputs {
            let out = self.step(trace.final_state(), w, ufs)?;
            trace.steps.push(TraceStep { inputs: w.clone(), outcome: out });
        }
        Ok(trace)
    }

    pub fn run(&self, inputs: &[Valuation], ufs: &UfTable) -> Result<Trace, InterpError> {
        self.run_from(self.initial_state()?, inputs, ufs)
    }

    /// Step only child ILAs, holding `inputs` fixed, until none is active.
    /// Returns the quiescent state and the number of steps taken.
    pub fn run_child_to_completion(
        &self,
        state: &Valuation,
        inputs: &Valuation,
        ufs: &UfTable,
        budget: usize,
    ) -> Result<(Valuation, usize), InterpError> {
        let mut cur = state.clone();
        for n in 0..=budget {
            let out = self.step_inner(&cur, inputs, ufs, true)?;
            if out.fired.is_none() {
                return Ok((cur, n));
            }
            if n == budget {
                break;
            }
            cur = out.next;
        }
        Err(InterpError::BudgetExhausted { budget, state: cur })
    }

    /// Evaluate a term over canonical state and inputs.
    pub fn eval(&self, e: &crate::expr::Expr, state: &Valuation, inputs: &Valuation, ufs: &UfTable) -> Result<Value, InterpError> {
        Ok(eval(e, &state.merged(inputs), ufs)?)
    }
}

pub fn step(m: &IlaModel, state: &Valuation, inputs: &Valuation, ufs: &UfTable) -> Result<StepOutcome, InterpError> {
    Machine::new(m).step(state, inputs, ufs)
}

pub fn run(m: &IlaModel, inputs: &[Valuation], ufs: &UfTable) -> Result<Trace, InterpError> {
    Machine::new(m).run(inputs, ufs)
}

pub fn run_child_to_completion(
    m: &IlaModel,
    state: &Valuation,
    inputs: &Valuation,
    ufs: &UfTable,
    budget: usize,
) -> Result<(Valuation, usize), InterpError> {
    Machine::new(m).run_child_to_completion(state, inputs, ufs, budget)
}
