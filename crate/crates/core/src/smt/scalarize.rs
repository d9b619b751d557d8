//! Expansion of small arrays into one scalar per cell, which turns array
//! reasoning into plain bit-vector reasoning.

use std::collections::HashMap;

use crate::expr::{topo_order, Expr, ExprError, Kind, Op, Sort, Var};
use crate::query::Query;
use crate::value::{ArrayValue, Valuation, Value};

/// Arrays with at most this many address bits are expanded.
pub(crate) const MAX_ADDR_BITS: u32 = 4;

pub(crate) struct Scalarized {
    pub query: Query,
    /// Each original array root with its cell roots.
    arrays: Vec<(Var, Vec<Var>)>,
}

impl Scalarized {
    /// Values for the original roots, given values for the expanded ones.
    pub fn restore(&self, roots: &[Var], values: &Valuation) -> Valuation {
        let mut out = Valuation::new();
        for r in roots {
            if let Some(x) = values.get(r) {
                out.insert(r.clone(), x.clone());
            }
        }
        for (v, cells) in &self.arrays {
            let mut a = ArrayValue::filled(v.sort(), 0).unwrap();
            for (i, c) in cells.iter().enumerate() {
                if let Some(x) = values.get(c).and_then(Value::as_bits) {
                    a.write(i as u128, x);
                }
            }
            out.insert(v.clone(), Value::Array(a));
        }
        out
    }
}

#[derive(Clone)]
enum Rep {
    One(Expr),
    Cells(Vec<Expr>),
}

fn cell_var(v: &Var, i: usize) -> Var {
    Var::new(format!("{}[{i}]", v.name()), match v.sort() {
        Sort::Array { data, .. } => Sort::BitVec(data),
        s => s,
    }, v.kind())
}

fn cells_of(v: &Var) -> Vec<Var> {
    let n = match v.sort() {
        Sort::Array { addr, .. } => 1usize << addr,
        _ => 0,
    };
    (0..n).map(|i| cell_var(v, i)).collect()
}

struct Rewriter {
    memo: HashMap<u32, Rep>,
    /// Replacement for each array variable (root or def).
    arrays: HashMap<Var, Vec<Expr>>,
}

impl Rewriter {
    fn one(&self, e: &Expr) -> Expr {
        match &self.memo[&e.id()] {
            Rep::One(x) => x.clone(),
            Rep::Cells(_) => unreachable!("array in scalar position"),
        }
    }

    fn cells(&self, e: &Expr) -> Vec<Expr> {
        match &self.memo[&e.id()] {
            Rep::Cells(c) => c.clone(),
            Rep::One(_) => unreachable!("scalar in array position"),
        }
    }

    fn rewrite(&mut self, e: &Expr) -> Result<Rep, ExprError> {
        for n in topo_order(std::slice::from_ref(e)) {
            if self.memo.contains_key(&n.id()) {
                continue;
            }
            let r = match n.kind() {
                Kind::Var(v) => match self.arrays.get(v) {
                    Some(c) => Rep::Cells(c.clone()),
                    None => Rep::One(n.clone()),
                },
                Kind::App(op, args) => match op {
                    Op::Store => {
                        let (a, i, x) = (self.cells(&args[0]), self.one(&args[1]), self.one(&args[2]));
                        let w = args[1].sort().bv_width().unwrap();
                        let mut out = Vec::with_capacity(a.len());
                        for (k, c) in a.iter().enumerate() {
                            let hit = i.eq_to(&Expr::bv(w, k as u128)?)?;
                            out.push(Expr::ite(&hit, &x, c)?);
                        }
                        Rep::Cells(out)
                    }
                    Op::Select => {
                        let (a, i) = (self.cells(&args[0]), self.one(&args[1]));
                        let w = args[1].sort().bv_width().unwrap();
                        let mut out = a.last().unwrap().clone();
                        for k in (0..a.len() - 1).rev() {
                            out = Expr::ite(&i.eq_to(&Expr::bv(w, k as u128)?)?, &a[k], &out)?;
                        }
                        Rep::One(out)
                    }
                    Op::Ite if matches!(n.sort(), Sort::Array { .. }) => {
                        let (c, a, b) = (self.one(&args[0]), self.cells(&args[1]), self.cells(&args[2]));
                        Rep::Cells(a.iter().zip(&b).map(|(x, y)| Expr::ite(&c, x, y)).collect::<Result<_, _>>()?)
                    }
                    Op::Eq if matches!(args[0].sort(), Sort::Array { .. }) => {
                        let (a, b) = (self.cells(&args[0]), self.cells(&args[1]));
                        Rep::One(Expr::and_all(a.iter().zip(&b).map(|(x, y)| x.eq_to(y)).collect::<Result<Vec<_>, _>>()?)?)
                    }
                    _ => Rep::One(Expr::app(op.clone(), args.iter().map(|a| self.one(a)).collect())?),
                },
                _ => Rep::One(n.clone()),
            };
            self.memo.insert(n.id(), r);
        }
        Ok(self.memo[&e.id()].clone())
    }
}

/// Expand every array of `q` into cells, or `None` when some array is too
/// large (or there are none).
pub(crate) fn scalarize(q: &Query) -> Result<Option<Scalarized>, ExprError> {
    let is_array = |v: &Var| matches!(v.sort(), Sort::Array { .. });
    let mut sorts: Vec<Sort> = q.roots.iter().chain(q.defs.iter().map(|(v, _)| v)).map(|v| v.sort()).collect();
    let mut all: Vec<Expr> = q.defs.iter().map(|(_, e)| e.clone()).collect();
    all.extend(q.assertions());
    sorts.extend(topo_order(&all).iter().map(|n| n.sort()));
    let arrays: Vec<Sort> = sorts.into_iter().filter(|s| matches!(s, Sort::Array { .. })).collect();
    if arrays.is_empty() || arrays.iter().any(|s| matches!(s, Sort::Array { addr, .. } if *addr > MAX_ADDR_BITS)) {
        return Ok(None);
    }
    let mut rw = Rewriter { memo: HashMap::new(), arrays: HashMap::new() };
    let mut roots = Vec::new();
    let mut expanded = Vec::new();
    for r in &q.roots {
        if is_array(r) {
            let cells = cells_of(r);
            rw.arrays.insert(r.clone(), cells.iter().map(Expr::var).collect());
            roots.extend(cells.iter().cloned());
            expanded.push((r.clone(), cells));
        } else {
            roots.push(r.clone());
        }
    }
    let mut out = Query::new(roots, Expr::tt());
    for (v, e) in &q.defs {
        match rw.rewrite(e)? {
            Rep::One(x) => out.define(v.clone(), x),
            Rep::Cells(cs) => {
                let vars = cells_of(v);
                for (c, x) in vars.iter().zip(cs) {
                    out.define(c.clone(), x);
                }
                rw.arrays.insert(v.clone(), vars.iter().map(Expr::var).collect());
            }
        }
    }
    for a in &q.assumptions {
        let Rep::One(x) = rw.rewrite(a)? else { unreachable!() };
        out.assume(x);
    }
    let Rep::One(g) = rw.rewrite(&q.goal)? else { unreachable!() };
    out.goal = g;
    Ok(Some(Scalarized { query: out, arrays: expanded }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::UfTable;

    #[test]
    fn expansion_preserves_truth() {
        let m = Var::state("m", Sort::array(2, 4));
        let i = Var::input("i", Sort::bv(2));
        let st = Expr::app(Op::Store, vec![Expr::var(&m), Expr::var(&i), Expr::bv(4, 9).unwrap()]).unwrap();
        let g = Expr::select(&st, &Expr::bv(2, 1).unwrap()).unwrap().eq_to(&Expr::bv(4, 9).unwrap()).unwrap();
        let q = Query::new(vec![m.clone(), i.clone()], g);
        let s = scalarize(&q).unwrap().unwrap();
        for iv in 0..4u128 {
            for c1 in [0u128, 9] {
                let mut a = ArrayValue::filled(m.sort(), 0).unwrap();
                a.write(1, c1);
                let orig = Valuation::new().with(&m, Value::Array(a)).with(&i, Value::bv(2, iv));
                let mut flat = Valuation::new().with(&i, Value::bv(2, iv));
                for k in 0..4 {
                    flat.insert(cell_var(&m, k), Value::bv(4, if k == 1 { c1 } else { 0 }));
                }
                let u = UfTable::new(0);
                assert_eq!(q.holds(&orig, &u).unwrap(), s.query.holds(&flat, &u).unwrap());
                assert_eq!(s.restore(&q.roots, &flat).get(&m), orig.get(&m));
            }
        }
    }
}
