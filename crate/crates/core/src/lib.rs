//! Instruction-level abstraction (ILA) models of hardware: a typed term IR,
//! hierarchical models, simulation, lowering to transition systems and
//! equivalence checking through SMT or exhaustive search.

pub mod bundled;
pub mod bv;
pub mod eqcheck;
pub mod eval;
pub mod expr;
pub mod hierarchy;
pub mod io;
pub mod interp;
pub mod model;
pub mod mutate;
pub mod query;
pub mod sexp;
pub mod smt;
pub mod ts;
pub mod value;

pub use eval::{eval, eval_many, EvalError};
pub use expr::{ConstValue, Expr, ExprError, FuncSym, Kind, Op, Sort, Var, VarKind};
pub use value::{ArrayValue, UfTable, Valuation, Value};
pub use model::{build_model, collect_hierarchy, ChildEntry, IlaModel, InitValue, Instruction, ModelError, RawChild, RawInstruction, RawModel, Site};
pub use interp::{Fired, InterpError, Machine, StepOutcome, Trace, TraceStep};
pub use query::Query;
pub use ts::{lower, product, unroll, TransitionSystem, TsError};
pub use smt::{BruteConfig, Engine, SolveError, SolveResult, SolveStatus, SolverConfig};
pub use eqcheck::{
    check_completion_equiv, check_decode_onehot, check_equiv, check_fsm_refinement, check_instr_equiv, check_invariant_inductive, overall,
    pair_by_name, CheckError, CheckReport, CheckStatus, Completion, Counterexample, RefinementSpec, StateMapping,
};
pub use io::{parse_fsm, parse_mapping, parse_model, parse_refinement, parse_trace, serialize_model, Diagnostics, InputTrace};
