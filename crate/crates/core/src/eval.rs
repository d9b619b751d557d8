//! Concrete denotational evaluation of terms.

use std::collections::HashMap;

use crate::bv;
use crate::expr::{topo_order, Expr, Kind, Op, Var};
use crate::value::{ArrayValue, UfTable, Valuation, Value};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no value bound for variable `{0}`")]
    MissingBinding(String),
    #[error("value bound to `{var}` has sort {found}, expected {expected}")]
    IllSorted { var: String, expected: String, found: String },
}

/// Evaluate one term.
pub fn eval(e: &Expr, env: &Valuation, ufs: &UfTable) -> Result<Value, EvalError> {
    Ok(eval_many(std::slice::from_ref(e), env, ufs)?.pop().unwrap())
}

/// Evaluate several terms against one environment, sharing common subterms.
pub fn eval_many(roots: &[Expr], env: &Valuation, ufs: &UfTable) -> Result<Vec<Value>, EvalError> {
    let order = topo_order(roots);
    let mut memo: HashMap<u32, Value> = HashMap::with_capacity(order.len());
    for e in &order {
        let v = eval_node(e, &memo, env, ufs)?;
        memo.insert(e.id(), v);
    }
    Ok(roots.iter().map(|r| memo[&r.id()].clone()).collect())
}

fn lookup(v: &Var, env: &Valuation) -> Result<Value, EvalError> {
    let val = env.get(v).ok_or_else(|| EvalError::MissingBinding(v.name().to_string()))?;
    if val.sort() != v.sort() {
        return Err(EvalError::IllSorted {
            var: v.name().to_string(),
            expected: v.sort().to_string(),
            found: val.sort().to_string(),
        });
    }
    Ok(val.clone())
}

fn b(v: &Value) -> bool {
    v.as_bool().expect("sort-checked boolean")
}

fn bits(v: &Value) -> u128 {
    v.as_bits().expect("sort-checked scalar")
}

fn arr(v: &Value) -> &ArrayValue {
    v.as_array().expect("sort-checked array")
}

fn eval_node(e: &Expr, memo: &HashMap<u32, Value>, env: &Valuation, ufs: &UfTable) -> Result<Value, EvalError> {
    let args: Vec<&Value> = e.children().iter().map(|c| &memo[&c.id()]).collect();
    let width = e.sort().bv_width().unwrap_or(0);
    let arg_width = e.children().first().and_then(|c| c.sort().bv_width()).unwrap_or(0);
    Ok(match e.kind() {
        Kind::Var(v) => lookup(v, env)?,
        Kind::Bool(x) => Value::Bool(*x),
        Kind::Bv { width, value } => Value::bv(*width, *value),
        Kind::App(op, _) => apply_op(op, &args, width, arg_width, ufs),
    })
}

/// Apply an operator to evaluated arguments. `width` is the result width for
/// bitvector results and `arg_width` the width of the first argument.
pub(crate) fn apply_op(op: &Op, args: &[&Value], width: u32, arg_width: u32, ufs: &UfTable) -> Value {
    use Op::*;
    let w = arg_width;
    match op {
        Not => Value::Bool(!b(args[0])),
        And => Value::Bool(args.iter().all(|a| b(a))),
        Or => Value::Bool(args.iter().any(|a| b(a))),
        Xor => Value::Bool(b(args[0]) ^ b(args[1])),
        Implies => Value::Bool(!b(args[0]) || b(args[1])),
        Ite => {
            if b(args[0]) {
                args[1].clone()
            } else {
                args[2].clone()
            }
        }
        BvNot => Value::bv(w, bv::not(w, bits(args[0]))),
        BvAnd => Value::bv(w, bits(args[0]) & bits(args[1])),
        BvOr => Value::bv(w, bits(args[0]) | bits(args[1])),
        BvXor => Value::bv(w, bits(args[0]) ^ bits(args[1])),
        BvAdd => Value::bv(w, bv::add(w, bits(args[0]), bits(args[1]))),
        BvSub => Value::bv(w, bv::sub(w, bits(args[0]), bits(args[1]))),
        BvMul => Value::bv(w, bv::mul(w, bits(args[0]), bits(args[1]))),
        BvUdiv => Value::bv(w, bv::udiv(w, bits(args[0]), bits(args[1]))),
        BvUrem => Value::bv(w, bv::urem(w, bits(args[0]), bits(args[1]))),
        Shl => Value::bv(w, bv::shl(w, bits(args[0]), bits(args[1]))),
        Lshr => Value::bv(w, bv::lshr(w, bits(args[0]), bits(args[1]))),
        Ashr => Value::bv(w, bv::ashr(w, bits(args[0]), bits(args[1]))),
        Concat => {
            let lo_w = width - w;
            Value::bv(width, bv::concat(lo_w, bits(args[0]), bits(args[1])))
        }
        Extract { hi, lo } => Value::bv(width, bv::extract(*hi, *lo, bits(args[0]))),
        ZeroExt(_) => Value::bv(width, bits(args[0])),
        SignExt(n) => Value::bv(width, bv::sign_extend(w, *n, bits(args[0]))),
        Eq => Value::Bool(args[0] == args[1]),
        Ult => Value::Bool(bits(args[0]) < bits(args[1])),
        Ule => Value::Bool(bits(args[0]) <= bits(args[1])),
        Slt => Value::Bool(bv::slt(w, bits(args[0]), bits(args[1]))),
        Sle => Value::Bool(bv::sle(w, bits(args[0]), bits(args[1]))),
        Select => Value::bv(width, arr(args[0]).read(bits(args[1]))),
        Store => {
            let mut a = arr(args[0]).clone();
            a.write(bits(args[1]), bits(args[2]));
            Value::Array(a)
        }
        Apply(f) => {
            let xs: Vec<u128> = args.iter().map(|a| bits(a)).collect();
            Value::from_bits(f.ret(), ufs.apply(f, &xs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Sort, Var};

    #[test]
    fn wraparound_and_total_division() {
        let t = UfTable::new(0);
        let env = Valuation::new();
        let e = Expr::bin(Op::BvAdd, &Expr::bv(8, 255).unwrap(), &Expr::bv(8, 1).unwrap()).unwrap();
        assert_eq!(eval(&e, &env, &t).unwrap(), Value::bv(8, 0));
        let x = Var::state("x", Sort::BitVec(8));
        let d = Expr::bin(Op::BvUdiv, &Expr::var(&x), &Expr::bv(8, 0).unwrap()).unwrap();
        let env = Valuation::new().with(&x, Value::bv(8, 7));
        assert_eq!(eval(&d, &env, &t).unwrap(), Value::bv(8, 255));
    }

    #[test]
    fn missing_binding() {
        let x = Var::state("x", Sort::BitVec(8));
        let err = eval(&Expr::var(&x), &Valuation::new(), &UfTable::new(0)).unwrap_err();
        assert_eq!(err, EvalError::MissingBinding("x".into()));
    }

    #[test]
    fn array_select_store() {
        let m = Var::state("m", Sort::array(4, 8));
        let st = Expr::app(
            Op::Store,
            vec![Expr::var(&m), Expr::bv(4, 2).unwrap(), Expr::bv(8, 9).unwrap()],
        )
        .unwrap();
        let rd = Expr::select(&st, &Expr::bv(4, 2).unwrap()).unwrap();
        let env = Valuation::new().with(&m, Value::zero(m.sort()));
        assert_eq!(eval(&rd, &env, &UfTable::new(0)).unwrap(), Value::bv(8, 9));
    }
}
