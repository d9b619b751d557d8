use std::collections::HashMap;
use std::fmt::Write;

use super::common::{arity, atom, err, list, parse_decl, parse_define, parse_sort, parse_value, sort_text, width, Diagnostic, Diagnostics, PResult, Scope};
use crate::expr::{FuncSym, Var};
use crate::model::{build_model, IlaModel, InitValue, RawChild, RawInstruction, RawModel, Site};
use crate::sexp::{parse_all, Sexp, Span};

/// Where each part of a parsed model came from.
pub type SiteSpans = HashMap<Site, Span>;

struct Parser {
    diags: Vec<Diagnostic>,
    spans: SiteSpans,
}

impl Parser {
    fn note<T>(&mut self, r: PResult<T>) -> Option<T> {
        match r {
            Ok(x) => Some(x),
            Err(d) => {
                self.diags.push(d);
                None
            }
        }
    }

    fn ila(&mut self, s: &Sexp, prefix: Option<&str>, outer: &Scope) -> Option<RawModel> {
        let items = match s.as_list() {
            Some(l) if s.head() == Some("ila") => &l[1..],
            _ => {
                self.diags.push(Diagnostic::new(s.span(), "expected `(ila name ...)`"));
                return None;
            }
        };
        let Some(name) = items.first().and_then(|n| n.as_atom()) else {
            self.diags.push(Diagnostic::new(s.span(), "expected `(ila name ...)`"));
            return None;
        };
        let path = match prefix {
            Some(p) => format!("{p}.{name}"),
            None => name.to_string(),
        };
        self.spans.insert(Site::Model { path: path.clone() }, s.span());

        let mut state = Vec::new();
        let mut inputs = Vec::new();
        let mut funcs = Vec::new();
        let mut scope = Scope { vars: HashMap::new(), funcs: outer.funcs.clone(), defines: outer.defines.clone(), opcode: None };
        let mut sections: HashMap<&str, Span> = HashMap::new();
        let mut once = |p: &mut Parser, head: &'static str, x: &Sexp| {
            if let Some(prev) = sections.insert(head, x.span()) {
                p.diags.push(Diagnostic::new(x.span(), format!("second `({head} ...)` section (first at {prev})")));
            }
        };

        // declarations first, so that expressions can refer to anything
        for x in &items[1..] {
            let Some(l) = x.as_list() else {
                self.diags.push(Diagnostic::new(x.span(), "expected a section"));
                continue;
            };
            match x.head() {
                Some("state") | Some("input") => {
                    let is_state = x.head() == Some("state");
                    once(self, if is_state { "state" } else { "input" }, x);
                    for d in &l[1..] {
                        if let Some((n, sort, sp)) = self.note(parse_decl(d)) {
                            let v = if is_state { Var::state(&n, sort) } else { Var::input(&n, sort) };
                            let site = if is_state {
                                Site::State { path: path.clone(), name: n.clone() }
                            } else {
                                Site::Input { path: path.clone(), name: n.clone() }
                            };
                            self.spans.entry(site).or_insert(sp);
                            scope.vars.entry(n).or_insert_with(|| v.clone());
                            if is_state { state.push(v) } else { inputs.push(v) }
                        }
                    }
                }
                Some("fun") => {
                    if let Some(f) = self.note(fun_decl(x, &l[1..])) {
                        self.spans.entry(Site::Func { path: path.clone(), name: f.name().to_string() }).or_insert(x.span());
                        scope.funcs.insert(f.name().to_string(), f.clone());
                        funcs.push(f);
                    }
                }
                Some("define") => {
                    if let Some(d) = self.note(parse_define(&l[1..], x)) {
                        scope.defines.push(d);
                    }
                }
                Some("init" | "valid" | "fetch" | "instruction" | "child") => {}
                Some(h) => self.diags.push(Diagnostic::new(x.span(), format!("unknown section `{h}`"))),
                None => self.diags.push(Diagnostic::new(x.span(), "expected a section")),
            }
        }

        let mut valid = None;
        let mut fetch = None;
        for x in &items[1..] {
            let Some(l) = x.as_list() else { continue };
            match x.head() {
                Some("valid") => {
                    once(self, "valid", x);
                    self.spans.insert(Site::Valid { path: path.clone() }, x.span());
                    if self.note(arity(x, &l[1..], 1, "valid")).is_some() {
                        valid = self.note(scope.expr(&l[1]));
                    }
                }
                Some("fetch") => {
                    once(self, "fetch", x);
                    self.spans.insert(Site::Fetch { path: path.clone() }, x.span());
                    if self.note(arity(x, &l[1..], 2, "fetch")).is_some() {
                        let w = self.note(width(&l[1]));
                        let e = self.note(scope.expr(&l[2]));
                        if let (Some(w), Some(e)) = (w, e) {
                            if e.sort().bv_width() != Some(w) {
                                self.diags.push(Diagnostic::new(l[2].span(), format!("fetch is declared {w} bits wide but has sort {}", e.sort())));
                            } else {
                                fetch = Some(e);
                            }
                        }
                    }
                }
                _ => {}
            }
        }

        let mut init = Vec::new();
        let mut instructions = Vec::new();
        let mut children = Vec::new();
        let opcode = fetch.as_ref().and_then(|f| f.sort().bv_width()).map(Var::opcode);
        for x in &items[1..] {
            let Some(l) = x.as_list() else { continue };
            match x.head() {
                Some("init") => {
                    once(self, "init", x);
                    for d in &l[1..] {
                        if let Some((n, iv, sp)) = self.note(init_entry(d, &scope)) {
                            self.spans.entry(Site::Init { path: path.clone(), name: n.clone() }).or_insert(sp);
                            init.push((n, iv));
                        }
                    }
                }
                Some("instruction") => {
                    let dscope = Scope { opcode: opcode.clone(), ..scope.clone() };
                    if let Some(ins) = self.instruction(x, &l[1..], &path, &scope, &dscope) {
                        instructions.push(ins);
                    }
                }
                Some("child") => {
                    if let Some(c) = self.child(x, &l[1..], &path, &scope) {
                        children.push(c);
                    }
                }
                _ => {}
            }
        }
        if !sections.contains_key("valid") {
            self.diags.push(Diagnostic::new(s.span(), format!("ILA `{name}` has no `(valid ...)` section")));
        }
        if !sections.contains_key("fetch") {
            self.diags.push(Diagnostic::new(s.span(), format!("ILA `{name}` has no `(fetch ...)` section")));
        }
        let mut raw = RawModel::new(name, valid?, fetch?);
        raw.state = state;
        raw.inputs = inputs;
        raw.funcs = funcs;
        raw.init = init;
        raw.instructions = instructions;
        raw.children = children;
        Some(raw)
    }

    fn instruction(&mut self, x: &Sexp, items: &[Sexp], path: &str, scope: &Scope, dscope: &Scope) -> Option<RawInstruction> {
        let name = self.note(items.first().map_or_else(|| err(x, "expected `(instruction name ...)`"), |n| atom(n, "an instruction name")))?;
        self.spans.insert(Site::Instruction { path: path.to_string(), instr: name.to_string() }, x.span());
        let mut decode = None;
        let mut updates = Vec::new();
        let mut seen_update = false;
        for part in &items[1..] {
            let l = self.note(list(part, "`(decode ...)` or `(update ...)`"))?;
            match part.head() {
                Some("decode") if decode.is_none() => {
                    self.spans.insert(Site::Decode { path: path.to_string(), instr: name.to_string() }, part.span());
                    self.note(arity(part, &l[1..], 1, "decode"))?;
                    dscope.opcode.as_ref()?;
                    decode = Some(self.note(dscope.expr(&l[1]))?);
                }
                Some("update") if !seen_update => {
                    seen_update = true;
                    for u in &l[1..] {
                        let Some(pair) = self.note(list(u, "a `(variable value)` pair")) else { continue };
                        if pair.len() != 2 {
                            self.diags.push(Diagnostic::new(u.span(), "expected a `(variable value)` pair"));
                            continue;
                        }
                        let Some(target) = self.note(atom(&pair[0], "a state variable")) else { continue };
                        self.spans.insert(
                            Site::Update { path: path.to_string(), instr: name.to_string(), var: target.to_string() },
                            u.span(),
                        );
                        if let Some(e) = self.note(scope.expr(&pair[1])) {
                            updates.push((target.to_string(), e));
                        }
                    }
                }
                Some(h @ ("decode" | "update")) => {
                    self.diags.push(Diagnostic::new(part.span(), format!("second `({h} ...)` in instruction `{name}`")));
                }
                _ => self.diags.push(Diagnostic::new(part.span(), "expected `(decode ...)` or `(update ...)`")),
            }
        }
        let Some(decode) = decode else {
            self.diags.push(Diagnostic::new(x.span(), format!("instruction `{name}` has no `(decode ...)`")));
            return None;
        };
        Some(RawInstruction { name: name.to_string(), decode, updates })
    }

    fn child(&mut self, x: &Sexp, items: &[Sexp], path: &str, scope: &Scope) -> Option<RawChild> {
        if items.len() < 2 || items.len() > 3 {
            self.diags.push(Diagnostic::new(x.span(), "expected `(child micro|sub (ila ...) (share ...))`"));
            return None;
        }
        let micro = match items[0].as_atom() {
            Some("micro") => true,
            Some("sub") => false,
            _ => {
                self.diags.push(Diagnostic::new(items[0].span(), "expected `micro` or `sub`"));
                return None;
            }
        };
        let outer = Scope { vars: HashMap::new(), opcode: None, ..scope.clone() };
        let model = self.ila(&items[1], Some(path), &outer)?;
        self.spans.insert(Site::Child { path: path.to_string(), child: model.name.clone() }, x.span());
        let mut shared = Vec::new();
        if let Some(sh) = items.get(2) {
            let l = match sh.as_list() {
                Some(l) if sh.head() == Some("share") => l,
                _ => {
                    self.diags.push(Diagnostic::new(sh.span(), "expected `(share (parent child)...)`"));
                    return None;
                }
            };
            for p in &l[1..] {
                match p.as_list().map(|v| (v.len(), v)) {
                    Some((2, v)) if v[0].as_atom().is_some() && v[1].as_atom().is_some() => {
                        let (pn, cn) = (v[0].as_atom().unwrap().to_string(), v[1].as_atom().unwrap().to_string());
                        self.spans.insert(
                            Site::Share { path: path.to_string(), child: model.name.clone(), parent_var: pn.clone() },
                            p.span(),
                        );
                        shared.push((pn, cn));
                    }
                    _ => self.diags.push(Diagnostic::new(p.span(), "expected a `(parent child)` pair")),
                }
            }
        }
        Some(RawChild { micro, model, shared })
    }
}

pub(super) fn fun_decl(x: &Sexp, items: &[Sexp]) -> PResult<FuncSym> {
    arity(x, items, 3, "fun")?;
    let name = atom(&items[0], "a function name")?;
    let args = list(&items[1], "a list of argument sorts")?.iter().map(parse_sort).collect::<PResult<Vec<_>>>()?;
    let ret = parse_sort(&items[2])?;
    FuncSym::new(name, args, ret).map_err(|e| Diagnostic::new(x.span(), e.to_string()))
}

fn init_entry(d: &Sexp, scope: &Scope) -> PResult<(String, InitValue, Span)> {
    let l = list(d, "a `(variable value)` pair")?;
    if l.len() != 2 {
        return err(d, "expected a `(variable value)` pair");
    }
    let n = atom(&l[0], "a state variable")?;
    let Some(v) = scope.vars.get(n) else { return err(&l[0], format!("init of undeclared variable `{n}`")) };
    let iv = if l[1].as_atom() == Some("unconstrained") {
        InitValue::Unconstrained
    } else {
        InitValue::Value(parse_value(&l[1], Some(v.sort()))?)
    };
    Ok((n.to_string(), iv, d.span()))
}

/// Parse a model file into raw (unvalidated) form, with the source position
/// of each part. Top-level `(define ...)` macros before the model are
/// visible everywhere in it.
pub fn parse_raw_model(text: &str) -> Result<(RawModel, SiteSpans), Diagnostics> {
    let forms = parse_all(text)?;
    let mut p = Parser { diags: Vec::new(), spans: HashMap::new() };
    let mut top = Scope::default();
    let mut model = None;
    for f in &forms {
        match f.head() {
            Some("define") if model.is_none() => {
                if let Some(d) = p.note(parse_define(&f.as_list().unwrap()[1..], f)) {
                    top.defines.push(d);
                }
            }
            Some("ila") if model.is_none() => model = Some(p.ila(f, None, &top)),
            Some("ila") => p.diags.push(Diagnostic::new(f.span(), "a model file holds exactly one `(ila ...)`")),
            _ => p.diags.push(Diagnostic::new(f.span(), "expected `(ila ...)` or `(define ...)`")),
        }
    }
    if model.is_none() {
        p.diags.push(Diagnostic::new(Span { line: 1, col: 1 }, "no `(ila ...)` form found"));
    }
    match model.flatten() {
        Some(m) if p.diags.is_empty() => Ok((m, p.spans)),
        _ => Err(Diagnostics(p.diags)),
    }
}

/// Parse and validate a model file. Validation errors carry the position of
/// the construct they concern.
pub fn parse_model(text: &str) -> Result<IlaModel, Diagnostics> {
    let (raw, spans) = parse_raw_model(text)?;
    let root = Span { line: 1, col: 1 };
    build_model(raw).map_err(|errs| {
        let mut ds: Vec<Diagnostic> = errs
            .iter()
            .map(|e| {
                let site = e.site();
                let span = spans
                    .get(site)
                    .or_else(|| spans.get(&Site::Model { path: site_path(site).to_string() }))
                    .copied()
                    .unwrap_or(root);
                Diagnostic::new(span, e.to_string())
            })
            .collect();
        ds.sort_by_key(|d| d.span);
        Diagnostics(ds)
    })
}

fn site_path(s: &Site) -> &str {
    match s {
        Site::Model { path }
        | Site::State { path, .. }
        | Site::Input { path, .. }
        | Site::Func { path, .. }
        | Site::Init { path, .. }
        | Site::Valid { path }
        | Site::Fetch { path }
        | Site::Instruction { path, .. }
        | Site::Decode { path, .. }
        | Site::Update { path, .. }
        | Site::Child { path, .. }
        | Site::Share { path, .. } => path,
    }
}

/// Canonical text of a model. Macros are expanded; parsing the result gives
/// back an equal model.
pub fn serialize_model(m: &IlaModel) -> String {
    let mut out = String::new();
    write_ila(&mut out, m, 0);
    out.push('\n');
    out
}

fn write_ila(out: &mut String, m: &IlaModel, level: usize) {
    let pad = "  ".repeat(level);
    let pad1 = "  ".repeat(level + 1);
    let pad2 = "  ".repeat(level + 2);
    let _ = write!(out, "{pad}(ila {}", m.name());
    let section = |out: &mut String, head: &str, lines: Vec<String>| {
        if !lines.is_empty() {
            let _ = write!(out, "\n{pad1}({head}");
            for l in lines {
                let _ = write!(out, "\n{pad2}{l}");
            }
            out.push(')');
        }
    };
    section(out, "state", m.state_vars().iter().map(|v| format!("({} {})", v.name(), sort_text(v.sort()))).collect());
    section(out, "input", m.inputs().iter().map(|v| format!("({} {})", v.name(), sort_text(v.sort()))).collect());
    for f in m.funcs() {
        let args: Vec<String> = f.args().iter().map(|s| sort_text(*s)).collect();
        let _ = write!(out, "\n{pad1}(fun {} ({}) {})", f.name(), args.join(" "), sort_text(f.ret()));
    }
    section(out, "init", m.init().map(|(v, iv)| format!("({} {iv})", v.name())).collect());
    let _ = write!(out, "\n{pad1}(valid {})", m.valid());
    let _ = write!(out, "\n{pad1}(fetch {} {})", m.fetch_width(), m.fetch());
    for ins in m.instructions() {
        let _ = write!(out, "\n{pad1}(instruction {}\n{pad2}(decode {})", ins.name(), ins.decode());
        if !ins.updates().is_empty() {
            let _ = write!(out, "\n{pad2}(update");
            for (v, e) in ins.updates() {
                let _ = write!(out, "\n{pad2}  ({} {e})", v.name());
            }
            out.push(')');
        }
        out.push(')');
    }
    for c in m.children() {
        let _ = write!(out, "\n{pad1}(child {}\n", if c.is_micro() { "micro" } else { "sub" });
        write_ila(out, c.model(), level + 2);
        if !c.shared().is_empty() {
            let pairs: Vec<String> = c.shared().iter().map(|(p, q)| format!("({} {})", p.name(), q.name())).collect();
            let _ = write!(out, "\n{pad2}(share {})", pairs.join(" "));
        }
        out.push(')');
    }
    out.push(')');
}
