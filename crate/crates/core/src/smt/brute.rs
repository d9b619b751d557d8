//! Exhaustive decision procedure for small queries.
//!
//! The search assigns bits one at a time and evaluates the formula in
//! three-valued (known/unknown per bit) arithmetic after every choice. Only
//! bits the current evaluation actually depends on are branched on: the
//! evaluator blames an unknown result on one unassigned cell, which is either
//! a scalar root, one cell of an array root at a concrete address, or one
//! uninterpreted-function result at concrete arguments. A subtree is
//! abandoned as soon as the formula is known false, and the search stops at
//! the first assignment under which it is known true. Because three-valued
//! evaluation is sound, the answer is exact.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use super::{Model, SolveError, SolveResult, SolveStatus};
use crate::bv;
use crate::expr::{topo_order, Expr, FuncSym, Kind, Op, Sort, Var};
use crate::query::Query;
use crate::value::{ArrayValue, UfTable, Valuation, Value};

#[derive(Clone, Debug)]
pub struct BruteConfig {
    /// Maximum number of free bits a query may depend on.
    pub bit_budget: u64,
    /// When set, queries over the bit budget are still searched, giving up
    /// after this many formula evaluations.
    pub effort_cap: Option<u64>,
}

impl Default for BruteConfig {
    fn default() -> Self {
        BruteConfig { bit_budget: 20, effort_cap: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct TBits {
    w: u32,
    known: u128,
    val: u128,
}

impl TBits {
    fn exact(w: u32, val: u128) -> TBits {
        TBits { w, known: bv::mask(w), val: val & bv::mask(w) }
    }

    fn unknown(w: u32) -> TBits {
        TBits { w, known: 0, val: 0 }
    }

    fn m(&self) -> u128 {
        bv::mask(self.w)
    }

    fn full(&self) -> bool {
        self.known == self.m()
    }

    fn min(&self) -> u128 {
        self.val & self.known
    }

    fn max(&self) -> u128 {
        (self.val & self.known) | (!self.known & self.m())
    }

    fn boolean(&self) -> Option<bool> {
        (self.known & 1 == 1).then_some(self.val & 1 == 1)
    }

    fn of_bool(b: bool) -> TBits {
        TBits::exact(1, b as u128)
    }

    /// Known values of both; bits unknown in either become unknown.
    fn norm(mut self) -> TBits {
        self.known &= self.m();
        self.val &= self.known;
        self
    }
}

#[derive(Clone, Debug)]
struct ArrSym {
    root: usize,
    writes: Vec<(u128, TBits)>,
}

#[derive(Clone, Debug)]
enum TV {
    B(TBits),
    Arr(Arc<ArrSym>),
    /// An array whose structure depends on unknown bits.
    ArrUnknown,
}

type CellId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum CellKey {
    Root(usize),
    Array(usize, u128),
    Uf(usize, Vec<u128>),
}

struct Search {
    roots: Vec<Var>,
    funcs: Vec<FuncSym>,
    order: Vec<Expr>,
    kids: Vec<Vec<usize>>,
    root_of_node: HashMap<usize, usize>,
    formula: usize,
    cells: Vec<TBits>,
    cell_keys: Vec<CellKey>,
    cell_index: HashMap<CellKey, CellId>,
    evaluations: u64,
}

fn unknown_arg(args: &[(TV, Option<CellId>)], idxs: &[usize]) -> Option<CellId> {
    idxs.iter().find_map(|&i| match &args[i].0 {
        TV::B(b) if !b.full() => args[i].1,
        TV::ArrUnknown => args[i].1,
        _ => None,
    })
}

impl Search {
    fn cell(&mut self, key: CellKey, width: u32) -> CellId {
        if let Some(&c) = self.cell_index.get(&key) {
            return c;
        }
        let id = self.cells.len();
        self.cells.push(TBits::unknown(width));
        self.cell_keys.push(key.clone());
        self.cell_index.insert(key, id);
        id
    }

    fn read_cell(&mut self, key: CellKey, width: u32) -> (TV, Option<CellId>) {
        let c = self.cell(key, width);
        let b = self.cells[c];
        (TV::B(b), (!b.full()).then_some(c))
    }

    fn array_read(&mut self, a: &ArrSym, addr: u128) -> (TBits, Option<CellId>) {
        if let Some((_, v)) = a.writes.iter().rev().find(|(x, _)| *x == addr) {
            return (*v, None);
        }
        let data = match self.roots[a.root].sort() {
            Sort::Array { data, .. } => data,
            _ => unreachable!(),
        };
        match self.read_cell(CellKey::Array(a.root, addr), data) {
            (TV::B(b), blame) => (b, blame),
            _ => unreachable!(),
        }
    }

    fn eval(&mut self) -> (TV, Option<CellId>) {
        self.evaluations += 1;
        let n = self.order.len();
        let mut res: Vec<(TV, Option<CellId>)> = Vec::with_capacity(n);
        for i in 0..n {
            let e = self.order[i].clone();
            let r = match e.kind() {
                Kind::Var(v) => {
                    let ri = self.root_of_node[&i];
                    match v.sort() {
                        Sort::Array { .. } => (TV::Arr(Arc::new(ArrSym { root: ri, writes: Vec::new() })), None),
                        s => self.read_cell(CellKey::Root(ri), s.bv_width().unwrap_or(1)),
                    }
                }
                Kind::Bool(b) => (TV::B(TBits::of_bool(*b)), None),
                Kind::Bv { width, value } => (TV::B(TBits::exact(*width, *value)), None),
                Kind::App(op, args) => {
                    let ks = self.kids[i].clone();
                    let same = args.len() == 2 && args[0].id() == args[1].id();
                    let argv: Vec<(TV, Option<CellId>)> = ks.iter().map(|&k| res[k].clone()).collect();
                    self.apply(op, &argv, e.sort(), same)
                }
            };
            res.push(r);
        }
        res.swap_remove(self.formula)
    }

    fn apply(&mut self, op: &Op, args: &[(TV, Option<CellId>)], sort: Sort, same: bool) -> (TV, Option<CellId>) {
        let bits = |i: usize| match &args[i].0 {
            TV::B(b) => *b,
            _ => unreachable!("scalar argument expected"),
        };
        let all: Vec<usize> = (0..args.len()).collect();
        let blame_if = |b: TBits, idx: &[usize]| -> (TV, Option<CellId>) {
            let bl = if b.full() { None } else { unknown_arg(args, idx) };
            (TV::B(b.norm()), bl)
        };
        let w = sort.bv_width().unwrap_or(1);
        match op {
            Op::Not | Op::BvNot => {
                let a = bits(0);
                blame_if(TBits { w: a.w, known: a.known, val: !a.val & a.known }, &all)
            }
            Op::And | Op::Or => {
                let absorbing = matches!(op, Op::Or);
                let mut unknown = None;
                for i in 0..args.len() {
                    match bits(i).boolean() {
                        Some(b) if b == absorbing => return (TV::B(TBits::of_bool(absorbing)), None),
                        Some(_) => {}
                        None => {
                            if unknown.is_none() {
                                unknown = Some(i);
                            }
                        }
                    }
                }
                match unknown {
                    None => (TV::B(TBits::of_bool(!absorbing)), None),
                    Some(i) => (TV::B(TBits::unknown(1)), args[i].1),
                }
            }
            Op::Implies => {
                let (a, b) = (bits(0).boolean(), bits(1).boolean());
                match (a, b) {
                    (Some(false), _) | (_, Some(true)) => (TV::B(TBits::of_bool(true)), None),
                    (Some(true), Some(false)) => (TV::B(TBits::of_bool(false)), None),
                    (None, _) => (TV::B(TBits::unknown(1)), args[0].1),
                    (_, None) => (TV::B(TBits::unknown(1)), args[1].1),
                }
            }
            Op::Xor | Op::BvXor => {
                let (a, b) = (bits(0), bits(1));
                let known = a.known & b.known;
                blame_if(TBits { w: a.w, known, val: a.val ^ b.val }, &all)
            }
            Op::BvAnd => {
                let (a, b) = (bits(0), bits(1));
                let known = (a.known & b.known) | (a.known & !a.val) | (b.known & !b.val);
                blame_if(TBits { w: a.w, known, val: a.val & b.val }, &all)
            }
            Op::BvOr => {
                let (a, b) = (bits(0), bits(1));
                let known = (a.known & b.known) | (a.known & a.val) | (b.known & b.val);
                blame_if(TBits { w: a.w, known, val: a.val | b.val }, &all)
            }
            Op::Ite => {
                match bits(0).boolean() {
                    Some(true) => args[1].clone(),
                    Some(false) => args[2].clone(),
                    None => match (&args[1].0, &args[2].0) {
                        (TV::B(t), TV::B(e)) => {
                            let known = t.known & e.known & !(t.val ^ e.val);
                            let r = TBits { w: t.w, known, val: t.val };
                            let bl = if r.norm().full() { None } else { args[0].1 };
                            (TV::B(r.norm()), bl)
                        }
                        _ => (TV::ArrUnknown, args[0].1),
                    },
                }
            }
            Op::BvAdd | Op::BvSub | Op::BvMul => {
                let (a, b) = (bits(0), bits(1));
                let both = a.known & b.known;
                let t = (!both).trailing_zeros().min(w);
                let val = match op {
                    Op::BvAdd => bv::add(w, a.val, b.val),
                    Op::BvSub => bv::sub(w, a.val, b.val),
                    _ => bv::mul(w, a.val, b.val),
                };
                let known = if t == 0 { 0 } else { bv::mask(t) };
                blame_if(TBits { w, known, val }, &all)
            }
            Op::BvUdiv | Op::BvUrem | Op::Ashr => {
                let (a, b) = (bits(0), bits(1));
                if a.full() && b.full() {
                    let v = match op {
                        Op::BvUdiv => bv::udiv(w, a.val, b.val),
                        Op::BvUrem => bv::urem(w, a.val, b.val),
                        _ => bv::ashr(w, a.val, b.val),
                    };
                    (TV::B(TBits::exact(w, v)), None)
                } else {
                    blame_if(TBits::unknown(w), &all)
                }
            }
            Op::Shl | Op::Lshr => {
                let (a, b) = (bits(0), bits(1));
                if !b.full() {
                    return blame_if(TBits::unknown(w), &[1]);
                }
                let s = b.val;
                let r = if s >= w as u128 {
                    TBits::exact(w, 0)
                } else if matches!(op, Op::Shl) {
                    let low = if s == 0 { 0 } else { bv::mask(s as u32) };
                    TBits { w, known: ((a.known << s) | low) & bv::mask(w), val: (a.val << s) & bv::mask(w) }
                } else {
                    let high = if s == 0 { 0 } else { bv::mask(w) & !(bv::mask(w) >> s) };
                    TBits { w, known: (a.known >> s) | high, val: a.val >> s }
                };
                blame_if(r, &[0])
            }
            Op::Concat => {
                let (a, b) = (bits(0), bits(1));
                blame_if(
                    TBits { w, known: (a.known << b.w) | b.known, val: (a.val << b.w) | (b.val & b.known) },
                    &all,
                )
            }
            Op::Extract { hi, lo } => {
                let a = bits(0);
                let m = bv::mask(hi - lo + 1);
                blame_if(TBits { w, known: (a.known >> lo) & m, val: (a.val >> lo) & m }, &all)
            }
            Op::ZeroExt(_) => {
                let a = bits(0);
                blame_if(TBits { w, known: a.known | (bv::mask(w) & !a.m()), val: a.val & a.known }, &all)
            }
            Op::SignExt(n) => {
                let a = bits(0);
                let sb = 1u128 << (a.w - 1);
                if a.known & sb != 0 {
                    let v = bv::sign_extend(a.w, *n, a.val & a.known);
                    blame_if(TBits { w, known: a.known | (bv::mask(w) & !a.m()), val: v }, &all)
                } else {
                    blame_if(TBits { w, known: a.known, val: a.val }, &all)
                }
            }
            Op::Eq => {
                if same {
                    return (TV::B(TBits::of_bool(true)), None);
                }
                match (&args[0].0, &args[1].0) {
                    (TV::B(a), TV::B(b)) => {
                        if (a.known & b.known) & (a.val ^ b.val) != 0 {
                            (TV::B(TBits::of_bool(false)), None)
                        } else if a.full() && b.full() {
                            (TV::B(TBits::of_bool(true)), None)
                        } else {
                            (TV::B(TBits::unknown(1)), unknown_arg(args, &all))
                        }
                    }
                    (TV::Arr(a), TV::Arr(b)) => self.array_eq(&a.clone(), &b.clone()),
                    _ => (TV::B(TBits::unknown(1)), unknown_arg(args, &all)),
                }
            }
            Op::Ult | Op::Ule | Op::Slt | Op::Sle => {
                let (mut a, mut b) = (bits(0), bits(1));
                if matches!(op, Op::Slt | Op::Sle) {
                    let sb = 1u128 << (a.w - 1);
                    a.val ^= sb;
                    b.val ^= sb;
                }
                let strict = matches!(op, Op::Ult | Op::Slt);
                let decided = if strict {
                    if a.max() < b.min() {
                        Some(true)
                    } else if a.min() >= b.max() {
                        Some(false)
                    } else {
                        None
                    }
                } else if a.max() <= b.min() {
                    Some(true)
                } else if a.min() > b.max() {
                    Some(false)
                } else {
                    None
                };
                match decided {
                    Some(x) => (TV::B(TBits::of_bool(x)), None),
                    None => (TV::B(TBits::unknown(1)), unknown_arg(args, &all)),
                }
            }
            Op::Select => {
                let idx = bits(1);
                if !idx.full() {
                    return (TV::B(TBits::unknown(w)), args[1].1);
                }
                match &args[0].0 {
                    TV::Arr(a) => {
                        let (v, bl) = self.array_read(&a.clone(), idx.val);
                        (TV::B(v), bl)
                    }
                    _ => (TV::B(TBits::unknown(w)), args[0].1),
                }
            }
            Op::Store => {
                let idx = bits(1);
                if !idx.full() {
                    return (TV::ArrUnknown, args[1].1);
                }
                match &args[0].0 {
                    TV::Arr(a) => {
                        let mut a2 = (**a).clone();
                        a2.writes.retain(|(x, _)| *x != idx.val);
                        a2.writes.push((idx.val, bits(2)));
                        (TV::Arr(Arc::new(a2)), None)
                    }
                    _ => (TV::ArrUnknown, args[0].1),
                }
            }
            Op::Apply(f) => {
                if let Some(bl) = unknown_arg(args, &all) {
                    return (TV::B(TBits::unknown(w)), Some(bl));
                }
                let fi = self.funcs.iter().position(|g| g == f).unwrap();
                let xs: Vec<u128> = (0..args.len()).map(|i| bits(i).val).collect();
                self.read_cell(CellKey::Uf(fi, xs), w)
            }
        }
    }

    fn array_eq(&mut self, a: &ArrSym, b: &ArrSym) -> (TV, Option<CellId>) {
        let addrs: Vec<u128> = if a.root == b.root {
            let mut s: Vec<u128> = a.writes.iter().chain(b.writes.iter()).map(|(x, _)| *x).collect();
            s.sort_unstable();
            s.dedup();
            s
        } else {
            let aw = match self.roots[a.root].sort() {
                Sort::Array { addr, .. } => addr,
                _ => unreachable!(),
            };
            (0..(1u128 << aw.min(20))).collect()
        };
        let mut blame = None;
        for x in addrs {
            let (va, ba) = self.array_read(a, x);
            let (vb, bb) = self.array_read(b, x);
            if (va.known & vb.known) & (va.val ^ vb.val) != 0 {
                return (TV::B(TBits::of_bool(false)), None);
            }
            if blame.is_none() && !(va.full() && vb.full()) {
                blame = if !va.full() { ba } else { bb };
            }
        }
        match blame {
            None => (TV::B(TBits::of_bool(true)), None),
            Some(c) => (TV::B(TBits::unknown(1)), Some(c)),
        }
    }
}

/// Upper bound on the number of free bits the query's assertions depend on.
pub fn cone_bits(q: &Query) -> Result<u64, SolveError> {
    let inl = q.inlined().map_err(|e| SolveError::Query(e.into()))?;
    Ok(cone_bits_inlined(&inl))
}

fn cone_bits_inlined(formulas: &[Expr]) -> u64 {
    let order = topo_order(formulas);
    let mut total: u64 = 0;
    let mut apps: HashSet<u32> = HashSet::new();
    let mut indices: HashMap<Var, HashSet<u32>> = HashMap::new();
    let mut full_arrays: HashSet<Var> = HashSet::new();
    // array variables each array-sorted node is built from, bottom-up
    let mut roots: HashMap<u32, Vec<Var>> = HashMap::new();
    for n in &order {
        if matches!(n.sort(), Sort::Array { .. }) {
            let rs = match n.kind() {
                Kind::Var(v) => vec![v.clone()],
                Kind::App(Op::Store, a) => roots[&a[0].id()].clone(),
                Kind::App(Op::Ite, a) => {
                    let mut r = roots[&a[1].id()].clone();
                    for v in &roots[&a[2].id()] {
                        if !r.contains(v) {
                            r.push(v.clone());
                        }
                    }
                    r
                }
                _ => Vec::new(),
            };
            roots.insert(n.id(), rs);
        }
        match n.kind() {
            Kind::Var(v) if !matches!(v.sort(), Sort::Array { .. }) => total += v.sort().bits() as u64,
            Kind::App(Op::Apply(f), _) => {
                if apps.insert(n.id()) {
                    total += f.ret().bits() as u64;
                }
            }
            Kind::App(Op::Select | Op::Store, a) => {
                for r in &roots[&a[0].id()] {
                    indices.entry(r.clone()).or_default().insert(a[1].id());
                }
            }
            Kind::App(Op::Eq, a) if matches!(a[0].sort(), Sort::Array { .. }) && a[0].id() != a[1].id() => {
                let (ra, rb) = (roots[&a[0].id()].clone(), roots[&a[1].id()].clone());
                if ra.len() != 1 || rb.len() != 1 || ra[0] != rb[0] {
                    full_arrays.extend(ra);
                    full_arrays.extend(rb);
                }
            }
            _ => {}
        }
    }
    for (r, ix) in &indices {
        if !full_arrays.contains(r) {
            if let Sort::Array { data, .. } = r.sort() {
                total += data as u64 * ix.len() as u64;
            }
        }
    }
    for r in &full_arrays {
        total = total.saturating_add(r.sort().bits().min(u64::MAX as u128) as u64);
    }
    total
}

/// Decide `q` by exhaustive search. Queries depending on more than
/// `bit_budget` free bits are rejected unless an effort cap is configured.
pub fn brute_force(q: &Query, cfg: &BruteConfig) -> Result<SolveResult, SolveError> {
    q.check()?;
    let start = Instant::now();
    let inl = q.inlined().map_err(|e| SolveError::Query(e.into()))?;
    let needed = cone_bits_inlined(&inl);
    if needed > cfg.bit_budget && cfg.effort_cap.is_none() {
        return Err(SolveError::BudgetExceeded { needed, budget: cfg.bit_budget });
    }
    let formula = Expr::and_all(inl.iter().cloned()).map_err(|e| SolveError::Query(e.into()))?;
    let order = topo_order(std::slice::from_ref(&formula));
    let pos: HashMap<u32, usize> = order.iter().enumerate().map(|(i, e)| (e.id(), i)).collect();
    let kids: Vec<Vec<usize>> = order.iter().map(|e| e.children().iter().map(|c| pos[&c.id()]).collect()).collect();
    let roots: Vec<Var> = q.roots.clone();
    let root_idx: HashMap<&Var, usize> = roots.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut root_of_node = HashMap::new();
    for (i, e) in order.iter().enumerate() {
        if let Some(v) = e.as_var() {
            root_of_node.insert(i, root_idx[v]);
        }
    }
    let funcs: Vec<FuncSym> = q.funcs().into_iter().collect();
    let mut s = Search {
        roots,
        funcs,
        formula: pos[&formula.id()],
        order,
        kids,
        root_of_node,
        cells: Vec::new(),
        cell_keys: Vec::new(),
        cell_index: HashMap::new(),
        evaluations: 0,
    };
    let cap = if needed > cfg.bit_budget { cfg.effort_cap } else { None };

    // choice stack: (cell, bit, second branch taken)
    let mut stack: Vec<(CellId, u32, bool)> = Vec::new();
    let sat = loop {
        if let Some(c) = cap {
            if s.evaluations >= c {
                return Err(SolveError::BudgetExceeded { needed, budget: cfg.bit_budget });
            }
        }
        let (v, blame) = s.eval();
        let verdict = match v {
            TV::B(b) => b.boolean(),
            _ => None,
        };
        match verdict {
            Some(true) => break true,
            None => {
                let c = blame.expect("unknown result must name an unassigned cell");
                let cell = s.cells[c];
                let unknown = cell.m() & !cell.known;
                let bit = 127 - unknown.leading_zeros();
                s.cells[c].known |= 1u128 << bit;
                s.cells[c].val &= !(1u128 << bit);
                stack.push((c, bit, false));
            }
            Some(false) => {
                // backtrack to the most recent choice with an untried branch
                loop {
                    match stack.pop() {
                        None => break,
                        Some((c, bit, true)) => {
                            s.cells[c].known &= !(1u128 << bit);
                            s.cells[c].val &= !(1u128 << bit);
                        }
                        Some((c, bit, false)) => {
                            s.cells[c].val |= 1u128 << bit;
                            stack.push((c, bit, true));
                            break;
                        }
                    }
                }
                if stack.is_empty() {
                    break false;
                }
            }
        }
    };
    let status = if sat { SolveStatus::Sat(s.witness()) } else { SolveStatus::Unsat };
    Ok(SolveResult { status, engine: "brute", elapsed: start.elapsed() })
}

impl Search {
    fn witness(&self) -> Model {
        let mut values = Valuation::new();
        let mut arrays: Vec<Option<ArrayValue>> = self.roots.iter().map(|r| ArrayValue::filled(r.sort(), 0)).collect();
        let mut ufs = UfTable::new(0);
        for (i, r) in self.roots.iter().enumerate() {
            if arrays[i].is_none() {
                let bits = self.cell_index.get(&CellKey::Root(i)).map(|&c| self.cells[c].min()).unwrap_or(0);
                values.insert(r.clone(), Value::from_bits(r.sort(), bits));
            }
        }
        for (k, key) in self.cell_keys.iter().enumerate() {
            let b = self.cells[k];
            if b.known == 0 {
                continue;
            }
            match key {
                CellKey::Root(_) => {}
                CellKey::Array(r, addr) => arrays[*r].as_mut().unwrap().write(*addr, b.min()),
                CellKey::Uf(f, args) => ufs.set(&self.funcs[*f], args.clone(), b.min()),
            }
        }
        for (i, a) in arrays.into_iter().enumerate() {
            if let Some(a) = a {
                values.insert(self.roots[i].clone(), Value::Array(a));
            }
        }
        Model { values, ufs }
    }
}
