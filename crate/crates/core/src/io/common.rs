use std::collections::HashMap;
use std::fmt;

use crate::expr::{Expr, FuncSym, Op, Sort, Var};
use crate::sexp::{Sexp, Span, SyntaxError};
use crate::value::{ArrayValue, Value};

/// An error at a position in the input.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic { span, message: message.into() }
    }
}

impl From<SyntaxError> for Diagnostic {
    fn from(e: SyntaxError) -> Diagnostic {
        Diagnostic { span: e.span, message: e.message }
    }
}

/// Every error found in one input, in source order.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Diagnostics {
        Diagnostics(vec![d])
    }
}

impl From<SyntaxError> for Diagnostics {
    fn from(e: SyntaxError) -> Diagnostics {
        Diagnostics(vec![e.into()])
    }
}

pub(crate) type PResult<T> = Result<T, Diagnostic>;

pub(crate) fn err<T>(s: &Sexp, msg: impl Into<String>) -> PResult<T> {
    Err(Diagnostic::new(s.span(), msg))
}

pub(crate) fn atom<'a>(s: &'a Sexp, what: &str) -> PResult<&'a str> {
    match s.as_atom() {
        Some(a) => Ok(a),
        None => err(s, format!("expected {what}")),
    }
}

pub(crate) fn list<'a>(s: &'a Sexp, what: &str) -> PResult<&'a [Sexp]> {
    match s.as_list() {
        Some(l) => Ok(l),
        None => err(s, format!("expected {what}")),
    }
}

pub(crate) fn arity(s: &Sexp, items: &[Sexp], n: usize, form: &str) -> PResult<()> {
    if items.len() == n {
        Ok(())
    } else {
        err(s, format!("`{form}` takes {n} argument{}, found {}", if n == 1 { "" } else { "s" }, items.len()))
    }
}

pub(crate) fn number(s: &Sexp) -> PResult<u128> {
    let a = atom(s, "a number")?;
    let parsed = if let Some(h) = a.strip_prefix("#x") {
        u128::from_str_radix(h, 16).ok()
    } else if let Some(b) = a.strip_prefix("#b") {
        u128::from_str_radix(b, 2).ok()
    } else if a.bytes().all(|c| c.is_ascii_digit()) {
        a.parse().ok()
    } else {
        None
    };
    match parsed {
        Some(n) => Ok(n),
        None => err(s, format!("expected a number, found `{a}`")),
    }
}

pub(crate) fn width(s: &Sexp) -> PResult<u32> {
    let n = number(s)?;
    if (1..=128).contains(&n) {
        Ok(n as u32)
    } else {
        err(s, format!("width {n} is outside 1..=128"))
    }
}

/// `bool`, `(bv w)` or `(array a d)`.
pub fn parse_sort(s: &Sexp) -> Result<Sort, Diagnostic> {
    if s.as_atom() == Some("bool") {
        return Ok(Sort::Bool);
    }
    let l = list(s, "a sort: `bool`, `(bv w)` or `(array a d)`")?;
    match s.head() {
        Some("bv") => {
            arity(s, &l[1..], 1, "bv")?;
            Ok(Sort::bv(width(&l[1])?))
        }
        Some("array") => {
            arity(s, &l[1..], 2, "array")?;
            Ok(Sort::array(width(&l[1])?, width(&l[2])?))
        }
        _ => err(s, "expected a sort: `bool`, `(bv w)` or `(array a d)`"),
    }
}

pub(crate) fn sort_text(s: Sort) -> String {
    match s {
        Sort::Bool => "bool".into(),
        Sort::BitVec(w) => format!("(bv {w})"),
        Sort::Array { addr, data } => format!("(array {addr} {data})"),
    }
}

fn fits(w: u32, n: u128) -> bool {
    w >= 128 || n >> w == 0
}

/// A value literal; with `sort`, it must have that sort.
pub fn parse_value(s: &Sexp, sort: Option<Sort>) -> Result<Value, Diagnostic> {
    let v = match s.as_atom() {
        Some("true") => Value::Bool(true),
        Some("false") => Value::Bool(false),
        Some(a) => return err(s, format!("expected a value literal, found `{a}`")),
        None => {
            let l = s.as_list().unwrap();
            match s.head() {
                Some("bv") => {
                    arity(s, &l[1..], 2, "bv")?;
                    let w = width(&l[1])?;
                    let n = number(&l[2])?;
                    if !fits(w, n) {
                        return err(&l[2], format!("{n} does not fit in {w} bits"));
                    }
                    Value::bv(w, n)
                }
                Some("array") => {
                    if l.len() < 4 {
                        return err(s, "`array` literal needs an address width, a data width and a default");
                    }
                    let (a, d) = (width(&l[1])?, width(&l[2])?);
                    let def = number(&l[3])?;
                    if !fits(d, def) {
                        return err(&l[3], format!("{def} does not fit in {d} bits"));
                    }
                    let mut arr = ArrayValue::new(a, d, def);
                    for cell in &l[4..] {
                        let c = list(cell, "an `(address value)` pair")?;
                        if c.len() != 2 {
                            return err(cell, "expected an `(address value)` pair");
                        }
                        let (k, x) = (number(&c[0])?, number(&c[1])?);
                        if !fits(a, k) {
                            return err(&c[0], format!("address {k} does not fit in {a} bits"));
                        }
                        if !fits(d, x) {
                            return err(&c[1], format!("{x} does not fit in {d} bits"));
                        }
                        arr.write(k, x);
                    }
                    Value::Array(arr)
                }
                _ => return err(s, "expected a value literal"),
            }
        }
    };
    match sort {
        Some(want) if v.sort() != want => err(s, format!("expected a value of sort {}, found {}", sort_text(want), sort_text(v.sort()))),
        _ => Ok(v),
    }
}

/// A textual macro: `(define name body)` or `(define (name p...) body)`.
#[derive(Clone, Debug)]
pub(crate) struct Define {
    pub name: String,
    pub params: Vec<String>,
    pub body: Sexp,
}

pub(crate) fn parse_define(items: &[Sexp], whole: &Sexp) -> PResult<Define> {
    arity(whole, items, 2, "define")?;
    let (name, params) = match &items[0] {
        Sexp::Atom(n, _) => (n.clone(), Vec::new()),
        Sexp::List(l, _) if !l.is_empty() => {
            let n = atom(&l[0], "a macro name")?.to_string();
            let ps = l[1..].iter().map(|p| atom(p, "a parameter name").map(str::to_string)).collect::<PResult<Vec<_>>>()?;
            (n, ps)
        }
        other => return err(other, "expected a macro name"),
    };
    Ok(Define { name, params, body: items[1].clone() })
}

fn substitute_sexp(s: &Sexp, args: &HashMap<&str, &Sexp>) -> Sexp {
    match s {
        Sexp::Atom(a, _) => args.get(a.as_str()).map(|x| (*x).clone()).unwrap_or_else(|| s.clone()),
        Sexp::List(l, sp) => Sexp::List(l.iter().map(|x| substitute_sexp(x, args)).collect(), *sp),
    }
}

const MAX_EXPANSION: usize = 64;

/// Names visible to an expression.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scope {
    pub vars: HashMap<String, Var>,
    pub funcs: HashMap<String, FuncSym>,
    pub defines: Vec<Define>,
    /// Present inside decode functions.
    pub opcode: Option<Var>,
}

impl Scope {
    fn define(&self, name: &str) -> Option<&Define> {
        self.defines.iter().rev().find(|d| d.name == name)
    }

    pub fn expr(&self, s: &Sexp) -> PResult<Expr> {
        self.expr_depth(s, 0)
    }

    fn expr_depth(&self, s: &Sexp, depth: usize) -> PResult<Expr> {
        if depth > MAX_EXPANSION {
            return err(s, "macro expansion too deep");
        }
        let wrap = |r: Result<Expr, crate::expr::ExprError>| r.map_err(|e| Diagnostic::new(s.span(), e.to_string()));
        match s {
            Sexp::Atom(a, _) => {
                if a == "true" || a == "false" {
                    return Ok(Expr::bool(a == "true"));
                }
                if let Some(v) = self.vars.get(a.as_str()) {
                    return Ok(Expr::var(v));
                }
                if let Some(op) = self.opcode.as_ref().filter(|o| o.name() == a) {
                    return Ok(Expr::var(op));
                }
                if let Some(d) = self.define(a) {
                    if !d.params.is_empty() {
                        return err(s, format!("macro `{a}` takes {} arguments", d.params.len()));
                    }
                    return self.expr_depth(&d.body, depth + 1);
                }
                err(s, format!("undeclared variable `{a}`"))
            }
            Sexp::List(l, _) => {
                let Some(head) = l.first() else { return err(s, "empty expression") };
                let h = atom(head, "an operator")?;
                let args = &l[1..];
                match h {
                    "bv" => {
                        arity(s, args, 2, "bv")?;
                        let w = width(&args[0])?;
                        let n = number(&args[1])?;
                        wrap(Expr::bv(w, n))
                    }
                    "extract" => {
                        arity(s, args, 3, "extract")?;
                        let (hi, lo) = (number(&args[0])? as u32, number(&args[1])? as u32);
                        wrap(Expr::app(Op::Extract { hi, lo }, vec![self.expr_depth(&args[2], depth)?]))
                    }
                    "zero_extend" | "sign_extend" => {
                        arity(s, args, 2, h)?;
                        let n = number(&args[0])? as u32;
                        let op = if h == "zero_extend" { Op::ZeroExt(n) } else { Op::SignExt(n) };
                        wrap(Expr::app(op, vec![self.expr_depth(&args[1], depth)?]))
                    }
                    "apply" => {
                        let Some(f) = args.first() else { return err(s, "`apply` needs a function name") };
                        let fname = atom(f, "a function name")?;
                        let Some(sym) = self.funcs.get(fname) else { return err(f, format!("undeclared function `{fname}`")) };
                        let xs = args[1..].iter().map(|x| self.expr_depth(x, depth)).collect::<PResult<Vec<_>>>()?;
                        wrap(Expr::app(Op::Apply(sym.clone()), xs))
                    }
                    _ => {
                        if let Some(d) = self.define(h) {
                            if d.params.len() != args.len() {
                                return err(s, format!("macro `{h}` takes {} arguments, found {}", d.params.len(), args.len()));
                            }
                            let map: HashMap<&str, &Sexp> = d.params.iter().map(|p| p.as_str()).zip(args.iter()).collect();
                            return self.expr_depth(&substitute_sexp(&d.body, &map), depth + 1);
                        }
                        if let Some(sym) = self.funcs.get(h) {
                            let xs = args.iter().map(|x| self.expr_depth(x, depth)).collect::<PResult<Vec<_>>>()?;
                            return wrap(Expr::app(Op::Apply(sym.clone()), xs));
                        }
                        let Some(op) = Op::from_name(h) else { return err(head, format!("unknown operator `{h}`")) };
                        let xs = args.iter().map(|x| self.expr_depth(x, depth)).collect::<PResult<Vec<_>>>()?;
                        wrap(Expr::app(op, xs))
                    }
                }
            }
        }
    }
}

/// `(name sort)` declarations.
pub(crate) fn parse_decl(s: &Sexp) -> PResult<(String, Sort, Span)> {
    let l = list(s, "a `(name sort)` declaration")?;
    if l.len() != 2 {
        return err(s, "expected a `(name sort)` declaration");
    }
    Ok((atom(&l[0], "a name")?.to_string(), parse_sort(&l[1])?, s.span()))
}
