//! SMT-LIB2 (QF_AUFBV) script generation.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::expr::{topo_order, Expr, FuncSym, Kind, Op, Sort, Var};
use crate::query::Query;
use crate::sexp::{parse_all, Sexp};

/// What each `get-value` term (or group of terms) stands for, in order.
#[derive(Clone, Debug)]
pub(crate) enum Request {
    /// One term: the root's value.
    Root(Var),
    /// Two terms: an index and the array root read at that index.
    Cell(Var),
    /// `args + 1` terms: argument values, then the application's value.
    Uf(FuncSym),
}

#[derive(Clone, Debug)]
pub struct SmtScript {
    pub text: String,
    /// (script symbol, original name)
    pub symbols: Vec<(String, String)>,
    pub(crate) requests: Vec<Request>,
}

fn encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Script symbol of a variable.
pub fn mangle(name: &str) -> String {
    format!("v_{}", encode(name))
}

fn mangle_fn(name: &str) -> String {
    format!("f_{}", encode(name))
}

/// Inverse of [`mangle`] (and of function-symbol mangling).
pub fn demangle(sym: &str) -> Option<String> {
    let body = sym.strip_prefix("v_").or_else(|| sym.strip_prefix("f_"))?;
    let bytes = body.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let h = std::str::from_utf8(bytes.get(i + 1..i + 3)?).ok()?;
            out.push(u8::from_str_radix(h, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

fn a(s: impl Into<String>) -> Sexp {
    Sexp::atom(s)
}

fn l(items: Vec<Sexp>) -> Sexp {
    Sexp::list(items)
}

fn sort_sexp(s: Sort) -> Sexp {
    match s {
        Sort::Bool => a("Bool"),
        Sort::BitVec(w) => l(vec![a("_"), a("BitVec"), a(w.to_string())]),
        Sort::Array { addr, data } => l(vec![a("Array"), sort_sexp(Sort::BitVec(addr)), sort_sexp(Sort::BitVec(data))]),
    }
}

/// `#x` when the width is a multiple of four, `#b` otherwise.
pub(crate) fn bv_literal(width: u32, value: u128) -> String {
    if width.is_multiple_of(4) {
        format!("#x{:0w$x}", value, w = (width / 4) as usize)
    } else {
        format!("#b{:0w$b}", value, w = width as usize)
    }
}

fn op_sexp(op: &Op) -> Sexp {
    match op {
        Op::Extract { hi, lo } => l(vec![a("_"), a("extract"), a(hi.to_string()), a(lo.to_string())]),
        Op::ZeroExt(n) => l(vec![a("_"), a("zero_extend"), a(n.to_string())]),
        Op::SignExt(n) => l(vec![a("_"), a("sign_extend"), a(n.to_string())]),
        Op::Apply(f) => a(mangle_fn(f.name())),
        other => a(other.name()),
    }
}

struct Printer {
    /// Node id to the symbol naming it (variables and shared subterms).
    named: HashMap<u32, String>,
    shared: HashSet<u32>,
    next_aux: usize,
    out: Vec<Sexp>,
}

impl Printer {
    fn term(&self, e: &Expr, memo: &mut HashMap<u32, Sexp>) -> Sexp {
        for n in topo_order(std::slice::from_ref(e)) {
            if memo.contains_key(&n.id()) {
                continue;
            }
            let s = if let Some(sym) = self.named.get(&n.id()) {
                a(sym.clone())
            } else {
                match n.kind() {
                    Kind::Var(v) => a(mangle(v.name())),
                    Kind::Bool(b) => a(b.to_string()),
                    Kind::Bv { width, value } => a(bv_literal(*width, *value)),
                    Kind::App(op, args) => {
                        let args: Vec<Sexp> = args.iter().map(|x| memo[&x.id()].clone()).collect();
                        match (op, args.len()) {
                            (Op::And, 0) => a("true"),
                            (Op::Or, 0) => a("false"),
                            (Op::And | Op::Or, 1) => args.into_iter().next().unwrap(),
                            _ => {
                                let mut items = vec![op_sexp(op)];
                                items.extend(args);
                                l(items)
                            }
                        }
                    }
                }
            };
            memo.insert(n.id(), s);
        }
        memo[&e.id()].clone()
    }

    /// Emit `define-fun`s for shared subterms of `e` not yet named, then
    /// return `e`'s term.
    fn emit(&mut self, e: &Expr) -> Sexp {
        let mut memo = HashMap::new();
        for n in topo_order(std::slice::from_ref(e)) {
            if self.shared.contains(&n.id()) && !self.named.contains_key(&n.id()) && n.id() != e.id() {
                let body = self.term(&n, &mut memo);
                let sym = format!("t_{}", self.next_aux);
                self.next_aux += 1;
                self.out.push(l(vec![a("define-fun"), a(sym.clone()), l(vec![]), sort_sexp(n.sort()), body]));
                self.named.insert(n.id(), sym.clone());
                memo.insert(n.id(), a(sym));
            }
        }
        self.term(e, &mut memo)
    }
}

/// Root array variables an array-valued term is built from.
fn array_roots(e: &Expr, defs: &HashMap<Var, Expr>, out: &mut BTreeSet<Var>) {
    let mut stack = vec![e.clone()];
    let mut seen = HashSet::new();
    while let Some(x) = stack.pop() {
        if !seen.insert(x.id()) {
            continue;
        }
        match x.kind() {
            Kind::Var(v) => match defs.get(v) {
                Some(d) => stack.push(d.clone()),
                None => {
                    out.insert(v.clone());
                }
            },
            Kind::App(Op::Store, args) => stack.push(args[0].clone()),
            Kind::App(Op::Ite, args) => {
                stack.push(args[1].clone());
                stack.push(args[2].clone());
            }
            _ => {}
        }
    }
}

pub fn emit_smtlib(q: &Query) -> SmtScript {
    let defs_map: HashMap<Var, Expr> = q.defs.iter().cloned().collect();
    let mut all: Vec<Expr> = q.defs.iter().map(|(_, e)| e.clone()).collect();
    all.extend(q.assertions());
    let order = topo_order(&all);

    // shared subterms: more than one parent (roots count as parents)
    let mut parents: HashMap<u32, usize> = HashMap::new();
    for r in &all {
        *parents.entry(r.id()).or_default() += 1;
    }
    for n in &order {
        for c in n.children() {
            *parents.entry(c.id()).or_default() += 1;
        }
    }
    let shared: HashSet<u32> = order
        .iter()
        .filter(|n| matches!(n.kind(), Kind::App(..)) && parents[&n.id()] > 1)
        .map(|n| n.id())
        .collect();

    // model-extraction requests
    let mut requests = Vec::new();
    let mut value_terms: Vec<Expr> = Vec::new();
    for r in &q.roots {
        if !matches!(r.sort(), Sort::Array { .. }) {
            requests.push(Request::Root(r.clone()));
            value_terms.push(Expr::var(r));
        }
    }
    let root_set: HashSet<&Var> = q.roots.iter().collect();
    let mut cells: Vec<(Var, Expr)> = Vec::new();
    let mut seen_cells: HashSet<(Var, u32)> = HashSet::new();
    let mut apps: Vec<Expr> = Vec::new();
    for n in &order {
        if let Kind::App(op, args) = n.kind() {
            match op {
                Op::Select | Op::Store => {
                    let mut rs = BTreeSet::new();
                    array_roots(&args[0], &defs_map, &mut rs);
                    for r in rs {
                        if root_set.contains(&r) && seen_cells.insert((r.clone(), args[1].id())) {
                            cells.push((r, args[1].clone()));
                        }
                    }
                }
                Op::Apply(_) => apps.push(n.clone()),
                _ => {}
            }
        }
    }
    for (r, i) in &cells {
        requests.push(Request::Cell(r.clone()));
        value_terms.push(i.clone());
        value_terms.push(Expr::select(&Expr::var(r), i).unwrap());
    }
    for app in &apps {
        if let Kind::App(Op::Apply(f), args) = app.kind() {
            requests.push(Request::Uf(f.clone()));
            value_terms.extend(args.iter().cloned());
            value_terms.push(app.clone());
        }
    }

    // symbol table
    let mut symbols: Vec<(String, String)> = Vec::new();
    let funcs = q.funcs();
    for f in &funcs {
        symbols.push((mangle_fn(f.name()), f.name().to_string()));
    }
    for r in &q.roots {
        symbols.push((mangle(r.name()), r.name().to_string()));
    }
    for (v, _) in &q.defs {
        symbols.push((mangle(v.name()), v.name().to_string()));
    }
    let mut table = String::from("mangling\n");
    for (s, o) in &symbols {
        table.push_str(&format!("{s} {}\n", o.replace('%', "%25").replace('|', "%7C").replace('\\', "%5C")));
    }

    let mut p = Printer { named: HashMap::new(), shared, next_aux: 0, out: Vec::new() };
    p.out.push(l(vec![a("set-info"), a(":source"), a(table)]));
    p.out.push(l(vec![a("set-option"), a(":produce-models"), a("true")]));
    p.out.push(l(vec![a("set-logic"), a("QF_AUFBV")]));
    for f in &funcs {
        p.out.push(l(vec![
            a("declare-fun"),
            a(mangle_fn(f.name())),
            l(f.args().iter().map(|s| sort_sexp(*s)).collect()),
            sort_sexp(f.ret()),
        ]));
    }
    for r in &q.roots {
        p.out.push(l(vec![a("declare-fun"), a(mangle(r.name())), l(vec![]), sort_sexp(r.sort())]));
    }
    for (v, e) in &q.defs {
        let body = p.emit(e);
        p.out.push(l(vec![a("define-fun"), a(mangle(v.name())), l(vec![]), sort_sexp(v.sort()), body]));
        p.named.insert(Expr::var(v).id(), mangle(v.name()));
    }
    for e in q.assertions() {
        let t = p.emit(&e);
        p.out.push(l(vec![a("assert"), t]));
    }
    p.out.push(l(vec![a("check-sat")]));
    if !value_terms.is_empty() {
        let mut memo = HashMap::new();
        let ts: Vec<Sexp> = value_terms.iter().map(|t| p.term(t, &mut memo)).collect();
        p.out.push(l(vec![a("get-value"), l(ts)]));
    }
    p.out.push(l(vec![a("exit")]));

    let mut text = String::new();
    for s in &p.out {
        text.push_str(&s.to_string());
        text.push('\n');
    }
    debug_assert!(reprint(&text).as_deref() == Some(text.as_str()));
    SmtScript { text, symbols, requests }
}

/// Parse a script with the toolkit's reader and print it back.
pub fn reprint(text: &str) -> Option<String> {
    let all = parse_all(text).ok()?;
    let mut out = String::new();
    for s in &all {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mangling_is_reversible() {
        for n in ["x", "A:pc@3", "block.Counter@12", "a%b", "spec:r0@0"] {
            assert_eq!(demangle(&mangle(n)).as_deref(), Some(n));
        }
        assert_eq!(mangle("A:pc@3"), "v_A%3Apc%403");
    }

    #[test]
    fn literals() {
        assert_eq!(bv_literal(8, 0xAB), "#xab");
        assert_eq!(bv_literal(3, 5), "#b101");
    }
}
