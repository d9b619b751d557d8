//! Satisfiability queries shared by the SMT emitter and the enumeration engine.

use std::collections::{BTreeSet, HashMap};

use crate::eval::{eval, EvalError};
use crate::expr::{free_vars_all, funcs_all, substitute, Expr, ExprError, FuncSym, Var};
use crate::value::{UfTable, Valuation};

/// `∃ roots, UF interpretations. defs ∧ assumptions ∧ goal`.
///
/// `roots` are the free variables. Each def binds a fresh variable to a term
/// over roots and earlier defs, so defs never add freedom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub roots: Vec<Var>,
    pub defs: Vec<(Var, Expr)>,
    pub assumptions: Vec<Expr>,
    pub goal: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("variable `{0}` is neither a root nor defined before use")]
    Unbound(String),
    #[error("`{0}` is declared twice")]
    Duplicate(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl Query {
    pub fn new(roots: Vec<Var>, goal: Expr) -> Query {
        Query { roots, defs: Vec::new(), assumptions: Vec::new(), goal }
    }

    /// Query for "`p` can be false", i.e. `p` is valid iff this is unsat.
    pub fn refute(roots: Vec<Var>, p: &Expr) -> Result<Query, ExprError> {
        Ok(Query::new(roots, p.not()?))
    }

    pub fn assume(&mut self, e: Expr) {
        self.assumptions.push(e);
    }

    pub fn define(&mut self, v: Var, e: Expr) {
        self.defs.push((v, e));
    }

    /// The asserted formulas: assumptions, then the goal.
    pub fn assertions(&self) -> Vec<Expr> {
        let mut v = self.assumptions.clone();
        v.push(self.goal.clone());
        v
    }

    pub fn funcs(&self) -> BTreeSet<FuncSym> {
        let mut all: Vec<Expr> = self.defs.iter().map(|(_, e)| e.clone()).collect();
        all.extend(self.assertions());
        funcs_all(&all)
    }

    /// Scope check: every variable is a root or defined before use.
    pub fn check(&self) -> Result<(), QueryError> {
        let mut bound: BTreeSet<Var> = BTreeSet::new();
        for r in &self.roots {
            if !bound.insert(r.clone()) {
                return Err(QueryError::Duplicate(r.name().to_string()));
            }
        }
        for (v, e) in &self.defs {
            for x in free_vars_all(std::slice::from_ref(e)) {
                if !bound.contains(&x) {
                    return Err(QueryError::Unbound(x.name().to_string()));
                }
            }
            if v.sort() != e.sort() {
                return Err(ExprError::Sort {
                    op: "define".into(),
                    arg: None,
                    detail: format!("`{}` is {} but its definition is {}", v.name(), v.sort(), e.sort()),
                }
                .into());
            }
            if !bound.insert(v.clone()) {
                return Err(QueryError::Duplicate(v.name().to_string()));
            }
        }
        for x in free_vars_all(&self.assertions()) {
            if !bound.contains(&x) {
                return Err(QueryError::Unbound(x.name().to_string()));
            }
        }
        Ok(())
    }

    /// Assertions with every def inlined, leaving only roots free.
    pub fn inlined(&self) -> Result<Vec<Expr>, ExprError> {
        let mut env: HashMap<Var, Expr> = HashMap::new();
        for (v, e) in &self.defs {
            let e2 = substitute(e, &env)?;
            env.insert(v.clone(), e2);
        }
        self.assertions().iter().map(|a| substitute(a, &env)).collect()
    }

    /// Extend a root assignment with the values of every def.
    pub fn complete(&self, roots: &Valuation, ufs: &UfTable) -> Result<Valuation, EvalError> {
        let mut env = roots.clone();
        for (v, e) in &self.defs {
            let val = eval(e, &env, ufs)?;
            env.insert(v.clone(), val);
        }
        Ok(env)
    }

    /// Does the assignment (roots only) satisfy every assertion?
    pub fn holds(&self, roots: &Valuation, ufs: &UfTable) -> Result<bool, EvalError> {
        let env = self.complete(roots, ufs)?;
        for a in self.assertions() {
            if eval(&a, &env, ufs)?.as_bool() != Some(true) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
