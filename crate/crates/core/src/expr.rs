//! Sort-checked, hash-consed term language.
//!
//! Every ILA function (valid, fetch, decode, next-state) as well as
//! invariants, refinement maps and verification goals is an [`Expr`]. Terms
//! are interned in a process-wide table: two structurally equal terms are the
//! same allocation, so equality and hashing are O(1) on the node id.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use once_cell::sync::Lazy;
use std::sync::Mutex;

use crate::bv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    BitVec(u32),
    Array { addr: u32, data: u32 },
}

impl Sort {
    pub fn bv(width: u32) -> Sort {
        Sort::BitVec(width)
    }

    pub fn array(addr: u32, data: u32) -> Sort {
        Sort::Array { addr, data }
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, Sort::Bool)
    }

    pub fn bv_width(&self) -> Option<u32> {
        match self {
            Sort::BitVec(w) => Some(*w),
            _ => None,
        }
    }

    /// Number of bits needed to hold one value of this sort (arrays: full contents).
    pub fn bits(&self) -> u128 {
        match self {
            Sort::Bool => 1,
            Sort::BitVec(w) => *w as u128,
            Sort::Array { addr, data } => (1u128 << (*addr).min(100)) * (*data as u128),
        }
    }

    pub fn check(&self) -> Result<(), ExprError> {
        let ok = |w: u32| (1..=bv::MAX_WIDTH).contains(&w);
        let good = match self {
            Sort::Bool => true,
            Sort::BitVec(w) => ok(*w),
            Sort::Array { addr, data } => ok(*addr) && ok(*data),
        };
        if good {
            Ok(())
        } else {
            Err(ExprError::BadSort(*self))
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "bool"),
            Sort::BitVec(w) => write!(f, "(bv {w})"),
            Sort::Array { addr, data } => write!(f, "(array {addr} {data})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    State,
    Input,
    Opcode,
}

/// A named, sorted variable. Identity is the full triple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    name: Arc<str>,
    sort: Sort,
    kind: VarKind,
}

impl Var {
    pub fn new(name: impl AsRef<str>, sort: Sort, kind: VarKind) -> Var {
        Var { name: Arc::from(name.as_ref()), sort, kind }
    }

    pub fn state(name: impl AsRef<str>, sort: Sort) -> Var {
        Var::new(name, sort, VarKind::State)
    }

    pub fn input(name: impl AsRef<str>, sort: Sort) -> Var {
        Var::new(name, sort, VarKind::Input)
    }

    pub fn opcode(width: u32) -> Var {
        Var::new(OPCODE_NAME, Sort::BitVec(width), VarKind::Opcode)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sort(&self) -> Sort {
        self.sort
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn renamed(&self, name: impl AsRef<str>) -> Var {
        Var::new(name, self.sort, self.kind)
    }

    pub fn with_kind(&self, kind: VarKind) -> Var {
        Var { name: self.name.clone(), sort: self.sort, kind }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Reserved name of the per-ILA opcode variable in decode functions.
pub const OPCODE_NAME: &str = "opcode";

/// An uninterpreted function symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncSym {
    name: Arc<str>,
    args: Arc<[Sort]>,
    ret: Sort,
}

impl FuncSym {
    /// Arguments and result must be booleans or bitvectors.
    pub fn new(name: impl AsRef<str>, args: Vec<Sort>, ret: Sort) -> Result<FuncSym, ExprError> {
        for s in args.iter().chain(std::iter::once(&ret)) {
            s.check()?;
            if matches!(s, Sort::Array { .. }) {
                return Err(ExprError::Sort {
                    op: name.as_ref().to_string(),
                    arg: None,
                    detail: "uninterpreted functions take and return scalar sorts only".into(),
                });
            }
        }
        Ok(FuncSym { name: Arc::from(name.as_ref()), args: args.into(), ret })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[Sort] {
        &self.args
    }

    pub fn ret(&self) -> Sort {
        self.ret
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Not,
    And,
    Or,
    Xor,
    Implies,
    Ite,
    BvNot,
    BvAnd,
    BvOr,
    BvXor,
    BvAdd,
    BvSub,
    BvMul,
    BvUdiv,
    BvUrem,
    Shl,
    Lshr,
    Ashr,
    Concat,
    Extract { hi: u32, lo: u32 },
    ZeroExt(u32),
    SignExt(u32),
    Eq,
    Ult,
    Ule,
    Slt,
    Sle,
    Select,
    Store,
    Apply(FuncSym),
}

impl Op {
    /// Operator name as written in model files (parameters excluded).
    pub fn name(&self) -> &str {
        match self {
            Op::Not => "not",
            Op::And => "and",
            Op::Or => "or",
            Op::Xor => "xor",
            Op::Implies => "=>",
            Op::Ite => "ite",
            Op::BvNot => "bvnot",
            Op::BvAnd => "bvand",
            Op::BvOr => "bvor",
            Op::BvXor => "bvxor",
            Op::BvAdd => "bvadd",
            Op::BvSub => "bvsub",
            Op::BvMul => "bvmul",
            Op::BvUdiv => "bvudiv",
            Op::BvUrem => "bvurem",
            Op::Shl => "bvshl",
            Op::Lshr => "bvlshr",
            Op::Ashr => "bvashr",
            Op::Concat => "concat",
            Op::Extract { .. } => "extract",
            Op::ZeroExt(_) => "zero_extend",
            Op::SignExt(_) => "sign_extend",
            Op::Eq => "=",
            Op::Ult => "bvult",
            Op::Ule => "bvule",
            Op::Slt => "bvslt",
            Op::Sle => "bvsle",
            Op::Select => "select",
            Op::Store => "store",
            Op::Apply(f) => f.name(),
        }
    }

    /// Simple (parameterless, non-UF) operators, looked up by name.
    pub fn from_name(name: &str) -> Option<Op> {
        Some(match name {
            "not" => Op::Not,
            "and" => Op::And,
            "or" => Op::Or,
            "xor" => Op::Xor,
            "=>" => Op::Implies,
            "ite" => Op::Ite,
            "bvnot" => Op::BvNot,
            "bvand" => Op::BvAnd,
            "bvor" => Op::BvOr,
            "bvxor" => Op::BvXor,
            "bvadd" => Op::BvAdd,
            "bvsub" => Op::BvSub,
            "bvmul" => Op::BvMul,
            "bvudiv" => Op::BvUdiv,
            "bvurem" => Op::BvUrem,
            "bvshl" => Op::Shl,
            "bvlshr" => Op::Lshr,
            "bvashr" => Op::Ashr,
            "concat" => Op::Concat,
            "=" => Op::Eq,
            "bvult" => Op::Ult,
            "bvule" => Op::Ule,
            "bvslt" => Op::Slt,
            "bvsle" => Op::Sle,
            "select" => Op::Select,
            "store" => Op::Store,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("value {value} does not fit in {width} bits")]
    ValueOutOfRange { width: u32, value: u128 },
    #[error("unsupported sort {0} (widths must be in 1..=128)")]
    BadSort(Sort),
    #[error("sort error in `{op}`{}: {detail}", arg.map(|i| format!(" (argument {i})")).unwrap_or_default())]
    Sort { op: String, arg: Option<usize>, detail: String },
}

impl ExprError {
    fn sort(op: &Op, arg: Option<usize>, detail: impl Into<String>) -> ExprError {
        ExprError::Sort { op: op.name().to_string(), arg, detail: detail.into() }
    }
}

/// Constant payload for [`Expr::constant`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstValue {
    Bool(bool),
    Bv(u128),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Var(Var),
    Bool(bool),
    Bv { width: u32, value: u128 },
    App(Op, Vec<Expr>),
}

struct Node {
    id: u32,
    kind: Kind,
    sort: Sort,
}

/// Interned term handle; cloning is a reference-count bump.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

struct Interner {
    table: HashMap<Kind, Expr>,
    next: u32,
}

static INTERNER: Lazy<Mutex<Interner>> =
    Lazy::new(|| Mutex::new(Interner { table: HashMap::new(), next: 0 }));

fn intern(kind: Kind, sort: Sort) -> Expr {
    let mut tab = INTERNER.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(e) = tab.table.get(&kind) {
        return e.clone();
    }
    let id = tab.next;
    tab.next += 1;
    let e = Expr(Arc::new(Node { id, kind: kind.clone(), sort }));
    tab.table.insert(kind, e.clone());
    e
}

fn expect_bv(op: &Op, i: usize, e: &Expr) -> Result<u32, ExprError> {
    e.sort()
        .bv_width()
        .ok_or_else(|| ExprError::sort(op, Some(i), format!("expected a bitvector, found {}", e.sort())))
}

fn expect_bool(op: &Op, i: usize, e: &Expr) -> Result<(), ExprError> {
    if e.sort().is_bool() {
        Ok(())
    } else {
        Err(ExprError::sort(op, Some(i), format!("expected bool, found {}", e.sort())))
    }
}

fn expect_arity(op: &Op, args: &[Expr], n: usize) -> Result<(), ExprError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(ExprError::sort(op, None, format!("expected {n} arguments, found {}", args.len())))
    }
}

fn same_sort(op: &Op, args: &[Expr]) -> Result<Sort, ExprError> {
    let s = args[0].sort();
    for (i, a) in args.iter().enumerate().skip(1) {
        if a.sort() != s {
            return Err(ExprError::sort(op, Some(i), format!("expected {s}, found {}", a.sort())));
        }
    }
    Ok(s)
}

fn sort_of_app(op: &Op, args: &[Expr]) -> Result<Sort, ExprError> {
    use Op::*;
    match op {
        Not => {
            expect_arity(op, args, 1)?;
            expect_bool(op, 0, &args[0])?;
            Ok(Sort::Bool)
        }
        And | Or => {
            if args.is_empty() {
                return Err(ExprError::sort(op, None, "expected at least one argument"));
            }
            for (i, a) in args.iter().enumerate() {
                expect_bool(op, i, a)?;
            }
            Ok(Sort::Bool)
        }
        Xor | Implies => {
            expect_arity(op, args, 2)?;
            expect_bool(op, 0, &args[0])?;
            expect_bool(op, 1, &args[1])?;
            Ok(Sort::Bool)
        }
        Ite => {
            expect_arity(op, args, 3)?;
            expect_bool(op, 0, &args[0])?;
            same_sort(op, &args[1..]).map_err(|e| match e {
                ExprError::Sort { op, arg, detail } => ExprError::Sort { op, arg: arg.map(|i| i + 1), detail },
                other => other,
            })
        }
        BvNot => {
            expect_arity(op, args, 1)?;
            let w = expect_bv(op, 0, &args[0])?;
            Ok(Sort::BitVec(w))
        }
        BvAnd | BvOr | BvXor | BvAdd | BvSub | BvMul | BvUdiv | BvUrem | Shl | Lshr | Ashr => {
            expect_arity(op, args, 2)?;
            let w = expect_bv(op, 0, &args[0])?;
            expect_bv(op, 1, &args[1])?;
            same_sort(op, args)?;
            Ok(Sort::BitVec(w))
        }
        Ult | Ule | Slt | Sle => {
            expect_arity(op, args, 2)?;
            expect_bv(op, 0, &args[0])?;
            expect_bv(op, 1, &args[1])?;
            same_sort(op, args)?;
            Ok(Sort::Bool)
        }
        Eq => {
            expect_arity(op, args, 2)?;
            same_sort(op, args)?;
            Ok(Sort::Bool)
        }
        Concat => {
            expect_arity(op, args, 2)?;
            let a = expect_bv(op, 0, &args[0])?;
            let b = expect_bv(op, 1, &args[1])?;
            let s = Sort::BitVec(a + b);
            s.check()?;
            Ok(s)
        }
        Extract { hi, lo } => {
            expect_arity(op, args, 1)?;
            let w = expect_bv(op, 0, &args[0])?;
            if !(w > *hi && hi >= lo) {
                return Err(ExprError::sort(op, Some(0), format!("extract {hi} {lo} out of range for width {w}")));
            }
            Ok(Sort::BitVec(hi - lo + 1))
        }
        ZeroExt(n) | SignExt(n) => {
            expect_arity(op, args, 1)?;
            let w = expect_bv(op, 0, &args[0])?;
            let s = Sort::BitVec(w + n);
            s.check()?;
            Ok(s)
        }
        Select => {
            expect_arity(op, args, 2)?;
            match args[0].sort() {
                Sort::Array { addr, data } => {
                    if args[1].sort() != Sort::BitVec(addr) {
                        return Err(ExprError::sort(op, Some(1), format!("expected (bv {addr}), found {}", args[1].sort())));
                    }
                    Ok(Sort::BitVec(data))
                }
                s => Err(ExprError::sort(op, Some(0), format!("expected an array, found {s}"))),
            }
        }
        Store => {
            expect_arity(op, args, 3)?;
            match args[0].sort() {
                Sort::Array { addr, data } => {
                    if args[1].sort() != Sort::BitVec(addr) {
                        return Err(ExprError::sort(op, Some(1), format!("expected (bv {addr}), found {}", args[1].sort())));
                    }
                    if args[2].sort() != Sort::BitVec(data) {
                        return Err(ExprError::sort(op, Some(2), format!("expected (bv {data}), found {}", args[2].sort())));
                    }
                    Ok(args[0].sort())
                }
                s => Err(ExprError::sort(op, Some(0), format!("expected an array, found {s}"))),
            }
        }
        Apply(f) => {
            expect_arity(op, args, f.args().len())?;
            for (i, (a, s)) in args.iter().zip(f.args()).enumerate() {
                if a.sort() != *s {
                    return Err(ExprError::sort(op, Some(i), format!("expected {s}, found {}", a.sort())));
                }
            }
            Ok(f.ret())
        }
    }
}

impl Expr {
    pub fn var(v: &Var) -> Expr {
        intern(Kind::Var(v.clone()), v.sort())
    }

    pub fn bool(b: bool) -> Expr {
        intern(Kind::Bool(b), Sort::Bool)
    }

    pub fn tt() -> Expr {
        Expr::bool(true)
    }

    pub fn ff() -> Expr {
        Expr::bool(false)
    }

    pub fn bv(width: u32, value: u128) -> Result<Expr, ExprError> {
        Sort::BitVec(width).check()?;
        if !bv::fits(width, value) {
            return Err(ExprError::ValueOutOfRange { width, value });
        }
        Ok(intern(Kind::Bv { width, value }, Sort::BitVec(width)))
    }

    /// Literal of the given sort. Arrays have no literals.
    pub fn constant(sort: Sort, value: ConstValue) -> Result<Expr, ExprError> {
        match (sort, value) {
            (Sort::Bool, ConstValue::Bool(b)) => Ok(Expr::bool(b)),
            (Sort::BitVec(w), ConstValue::Bv(v)) => Expr::bv(w, v),
            (Sort::Array { .. }, _) => Err(ExprError::Sort {
                op: "constant".into(),
                arg: None,
                detail: "array literals are not supported; declare an array variable and use store".into(),
            }),
            (s, v) => Err(ExprError::Sort { op: "constant".into(), arg: None, detail: format!("{v:?} is not a {s} literal") }),
        }
    }

    /// Sort-checked application.
    pub fn app(op: Op, args: Vec<Expr>) -> Result<Expr, ExprError> {
        let sort = sort_of_app(&op, &args)?;
        Ok(intern(Kind::App(op, args), sort))
    }

    pub fn id(&self) -> u32 {
        self.0.id
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    pub fn children(&self) -> &[Expr] {
        match &self.0.kind {
            Kind::App(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match &self.0.kind {
            Kind::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match &self.0.kind {
            Kind::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_bv(&self) -> Option<u128> {
        match &self.0.kind {
            Kind::Bv { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self.0.kind, Kind::Bool(_) | Kind::Bv { .. })
    }

    // Convenience constructors. Each is sort-checked like `app`.

    pub fn not(&self) -> Result<Expr, ExprError> {
        Expr::app(Op::Not, vec![self.clone()])
    }

    pub fn eq_to(&self, other: &Expr) -> Result<Expr, ExprError> {
        Expr::app(Op::Eq, vec![self.clone(), other.clone()])
    }

    pub fn implies(&self, other: &Expr) -> Result<Expr, ExprError> {
        Expr::app(Op::Implies, vec![self.clone(), other.clone()])
    }

    pub fn ite(c: &Expr, t: &Expr, e: &Expr) -> Result<Expr, ExprError> {
        Expr::app(Op::Ite, vec![c.clone(), t.clone(), e.clone()])
    }

    pub fn select(arr: &Expr, idx: &Expr) -> Result<Expr, ExprError> {
        Expr::app(Op::Select, vec![arr.clone(), idx.clone()])
    }

    pub fn bin(op: Op, a: &Expr, b: &Expr) -> Result<Expr, ExprError> {
        Expr::app(op, vec![a.clone(), b.clone()])
    }

    /// Conjunction; the empty conjunction is `true` and singletons are returned as is.
    pub fn and_all(items: impl IntoIterator<Item = Expr>) -> Result<Expr, ExprError> {
        let v: Vec<Expr> = items.into_iter().filter(|e| e.as_bool() != Some(true)).collect();
        match v.len() {
            0 => Ok(Expr::tt()),
            1 => {
                expect_bool(&Op::And, 0, &v[0])?;
                Ok(v.into_iter().next().unwrap())
            }
            _ => Expr::app(Op::And, v),
        }
    }

    pub fn or_all(items: impl IntoIterator<Item = Expr>) -> Result<Expr, ExprError> {
        let v: Vec<Expr> = items.into_iter().filter(|e| e.as_bool() != Some(false)).collect();
        match v.len() {
            0 => Ok(Expr::ff()),
            1 => {
                expect_bool(&Op::Or, 0, &v[0])?;
                Ok(v.into_iter().next().unwrap())
            }
            _ => Expr::app(Op::Or, v),
        }
    }

    /// Number of distinct DAG nodes reachable from `self`.
    pub fn dag_size(&self) -> usize {
        topo_order(std::slice::from_ref(self)).len()
    }
}

/// Unique nodes reachable from `roots`, children before parents.
/// Iterative, so arbitrarily deep terms are fine.
pub fn topo_order(roots: &[Expr]) -> Vec<Expr> {
    let mut seen: HashMap<u32, ()> = HashMap::new();
    let mut out = Vec::new();
    let mut stack: Vec<(Expr, bool)> = roots.iter().rev().map(|e| (e.clone(), false)).collect();
    while let Some((e, expanded)) = stack.pop() {
        if expanded {
            out.push(e);
            continue;
        }
        if seen.insert(e.id(), ()).is_some() {
            continue;
        }
        stack.push((e.clone(), true));
        for c in e.children().iter().rev() {
            if !seen.contains_key(&c.id()) {
                stack.push((c.clone(), false));
            }
        }
    }
    out
}

/// Rebuild `roots` bottom-up, replacing variables through `leaf`.
/// Returns the rewritten roots in order.
pub fn map_vars(
    roots: &[Expr],
    mut leaf: impl FnMut(&Var) -> Option<Expr>,
) -> Result<Vec<Expr>, ExprError> {
    let order = topo_order(roots);
    let mut memo: HashMap<u32, Expr> = HashMap::with_capacity(order.len());
    for e in &order {
        let new = match e.kind() {
            Kind::Var(v) => match leaf(v) {
                Some(r) => {
                    if r.sort() != v.sort() {
                        return Err(ExprError::Sort {
                            op: "substitute".into(),
                            arg: None,
                            detail: format!("binding for {} has sort {}, expected {}", v.name(), r.sort(), v.sort()),
                        });
                    }
                    r
                }
                None => e.clone(),
            },
            Kind::Bool(_) | Kind::Bv { .. } => e.clone(),
            Kind::App(op, args) => {
                let new_args: Vec<Expr> = args.iter().map(|a| memo[&a.id()].clone()).collect();
                if new_args.iter().zip(args).all(|(a, b)| a == b) {
                    e.clone()
                } else {
                    Expr::app(op.clone(), new_args)?
                }
            }
        };
        memo.insert(e.id(), new);
    }
    Ok(roots.iter().map(|r| memo[&r.id()].clone()).collect())
}

/// Simultaneous substitution of variables by terms of the same sort.
pub fn substitute(e: &Expr, bindings: &HashMap<Var, Expr>) -> Result<Expr, ExprError> {
    for (v, r) in bindings {
        if v.sort() != r.sort() {
            return Err(ExprError::Sort {
                op: "substitute".into(),
                arg: None,
                detail: format!("binding for {} has sort {}, expected {}", v.name(), r.sort(), v.sort()),
            });
        }
    }
    if bindings.is_empty() {
        return Ok(e.clone());
    }
    Ok(map_vars(std::slice::from_ref(e), |v| bindings.get(v).cloned())?.pop().unwrap())
}

pub fn free_vars(e: &Expr) -> BTreeSet<Var> {
    free_vars_all(std::slice::from_ref(e))
}

pub fn free_vars_all(roots: &[Expr]) -> BTreeSet<Var> {
    topo_order(roots)
        .into_iter()
        .filter_map(|e| e.as_var().cloned())
        .collect()
}

/// Uninterpreted function symbols applied anywhere in `roots`.
pub fn funcs_all(roots: &[Expr]) -> BTreeSet<FuncSym> {
    topo_order(roots)
        .into_iter()
        .filter_map(|e| match e.kind() {
            Kind::App(Op::Apply(f), _) => Some(f.clone()),
            _ => None,
        })
        .collect()
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Model-file syntax. Shared subterms are printed in full.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // explicit stack: (expr, next child index)
        enum Item<'a> {
            Open(&'a Expr),
            Text(&'static str),
        }
        let mut stack = vec![Item::Open(self)];
        while let Some(item) = stack.pop() {
            match item {
                Item::Text(s) => f.write_str(s)?,
                Item::Open(e) => match e.kind() {
                    Kind::Var(v) => f.write_str(v.name())?,
                    Kind::Bool(b) => write!(f, "{b}")?,
                    Kind::Bv { width, value } => write!(f, "(bv {width} {value})")?,
                    Kind::App(op, args) => {
                        match op {
                            Op::Extract { hi, lo } => write!(f, "(extract {hi} {lo}")?,
                            Op::ZeroExt(n) => write!(f, "(zero_extend {n}")?,
                            Op::SignExt(n) => write!(f, "(sign_extend {n}")?,
                            Op::Apply(func) => write!(f, "(apply {}", func.name())?,
                            _ => write!(f, "({}", op.name())?,
                        }
                        stack.push(Item::Text(")"));
                        for a in args.iter().rev() {
                            stack.push(Item::Open(a));
                            stack.push(Item::Text(" "));
                        }
                    }
                },
            }
        }
        Ok(())
    }
}
