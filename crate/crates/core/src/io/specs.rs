use std::collections::HashMap;

use super::common::{arity, atom, list, number, parse_decl, parse_define, Diagnostic, Diagnostics, PResult, Scope};
use crate::eqcheck::{pair_by_name, Completion, RefinementSpec, StateMapping};
use crate::expr::{Expr, Var};
use crate::hierarchy::flatten;
use crate::model::IlaModel;
use crate::sexp::{parse_all, Sexp, Span};
use crate::ts::TransitionSystem;

fn one_form<'a>(forms: &'a [Sexp], head: &str) -> PResult<&'a [Sexp]> {
    let Some(f) = forms.first() else {
        return Err(Diagnostic::new(Span { line: 1, col: 1 }, format!("expected `({head} ...)`")));
    };
    if f.head() != Some(head) {
        return Err(Diagnostic::new(f.span(), format!("expected `({head} ...)`")));
    }
    if let Some(g) = forms.get(1) {
        return Err(Diagnostic::new(g.span(), format!("unexpected form after `({head} ...)`")));
    }
    Ok(&f.as_list().unwrap()[1..])
}

/// Scope over a model's canonical (flattened) variables and functions.
fn model_scope(m: &IlaModel, with_inputs: bool) -> Scope {
    let flat = flatten(m).expect("validated models flatten");
    let mut s = Scope::default();
    for v in flat.state.iter().chain(if with_inputs { flat.inputs.iter() } else { [].iter() }) {
        s.vars.insert(v.name().to_string(), v.clone());
    }
    for f in &flat.funcs {
        s.funcs.insert(f.name().to_string(), f.clone());
    }
    s
}

fn ts_scope(ts: &TransitionSystem, with_inputs: bool) -> Scope {
    let mut s = Scope::default();
    for v in ts.vars.iter().chain(if with_inputs { ts.inputs.iter() } else { [].iter() }) {
        s.vars.insert(v.name().to_string(), v.clone());
    }
    for f in crate::expr::funcs_all(&ts.next) {
        s.funcs.insert(f.name().to_string(), f);
    }
    s
}

fn collect<T>(diags: &mut Vec<Diagnostic>, r: PResult<T>) -> Option<T> {
    r.map_err(|d| diags.push(d)).ok()
}

#[derive(Clone, Debug)]
pub struct MappingFile {
    pub map: StateMapping,
    /// Instruction pairs for the per-instruction checks.
    pub instructions: Vec<(String, String)>,
    pub completions: Vec<Completion>,
}

/// Mapping between two models, over their canonical variable names
/// (children's private state is `child.var`):
///
/// ```text
/// (mapping
///   (identity)                        ; pair same-named root state variables
///   (pair Addr Addr)                  ; a term of the first, a term of the second
///   (invariant a (= block.Counter (bv 4 0)))
///   (instructions (WR_ADDR WR_ADDR))  ; defaults to same-named instructions
///   (completion (START START) (bound 40) (assume (bvule Length (bv 8 2)))))
/// ```
pub fn parse_mapping(text: &str, a: &IlaModel, b: &IlaModel) -> Result<MappingFile, Diagnostics> {
    let forms = parse_all(text)?;
    let items = one_form(&forms, "mapping")?;
    let mut sa = model_scope(a, false);
    let mut sb = model_scope(b, false);
    let mut diags = Vec::new();
    let mut map = StateMapping::default();
    let mut instructions: Option<Vec<(String, String)>> = None;
    let mut completions = Vec::new();
    for x in items {
        let Some(l) = collect(&mut diags, list(x, "a mapping entry")) else { continue };
        let args = &l[1..];
        match x.head() {
            Some("define") => {
                if let Some(d) = collect(&mut diags, parse_define(args, x)) {
                    sa.defines.push(d.clone());
                    sb.defines.push(d);
                }
            }
            Some("identity") => map.pairs.extend(StateMapping::identity(a, b).pairs),
            Some("pair") => {
                if collect(&mut diags, arity(x, args, 2, "pair")).is_some() {
                    let ea = collect(&mut diags, sa.expr(&args[0]));
                    let eb = collect(&mut diags, sb.expr(&args[1]));
                    if let (Some(ea), Some(eb)) = (ea, eb) {
                        if ea.sort() != eb.sort() {
                            diags.push(Diagnostic::new(x.span(), format!("paired terms have sorts {} and {}", ea.sort(), eb.sort())));
                        } else {
                            map.pairs.push((ea, eb));
                        }
                    }
                }
            }
            Some("invariant") => {
                if collect(&mut diags, arity(x, args, 2, "invariant")).is_some() {
                    let side = args[0].as_atom();
                    let scope = match side {
                        Some("a") => &sa,
                        Some("b") => &sb,
                        _ => {
                            diags.push(Diagnostic::new(args[0].span(), "expected `a` or `b`"));
                            continue;
                        }
                    };
                    if let Some(e) = collect(&mut diags, scope.expr(&args[1]).and_then(|e| boolean(e, &args[1]))) {
                        if side == Some("a") {
                            map.inv_a.push(e)
                        } else {
                            map.inv_b.push(e)
                        }
                    }
                }
            }
            Some("instructions") => {
                let mut ps = Vec::new();
                for p in args {
                    if let Some(pair) = collect(&mut diags, instr_pair(p, a, b)) {
                        ps.push(pair);
                    }
                }
                instructions = Some(ps);
            }
            Some("completion") => {
                if args.is_empty() {
                    diags.push(Diagnostic::new(x.span(), "expected `(completion (A B) (bound k) ...)`"));
                    continue;
                }
                let Some(pair) = collect(&mut diags, instr_pair(&args[0], a, b)) else { continue };
                let mut bound = None;
                let mut assume = Vec::new();
                for o in &args[1..] {
                    let Some(ol) = collect(&mut diags, list(o, "`(bound k)` or `(assume e)`")) else { continue };
                    match o.head() {
                        Some("bound") if ol.len() == 2 => bound = collect(&mut diags, number(&ol[1])).map(|n| n as usize),
                        Some("assume") if ol.len() == 2 => {
                            if let Some(e) = collect(&mut diags, sa.expr(&ol[1]).and_then(|e| boolean(e, &ol[1]))) {
                                assume.push(e);
                            }
                        }
                        _ => diags.push(Diagnostic::new(o.span(), "expected `(bound k)` or `(assume e)`")),
                    }
                }
                match bound {
                    Some(bound) => completions.push(Completion { pair, bound, assume }),
                    None => diags.push(Diagnostic::new(x.span(), "completion needs a `(bound k)`")),
                }
            }
            Some(h) => diags.push(Diagnostic::new(x.span(), format!("unknown mapping entry `{h}`"))),
            None => diags.push(Diagnostic::new(x.span(), "expected a mapping entry")),
        }
    }
    if !diags.is_empty() {
        return Err(Diagnostics(diags));
    }
    let instructions = instructions.unwrap_or_else(|| pair_by_name(a, b));
    Ok(MappingFile { map, instructions, completions })
}

fn boolean(e: Expr, at: &Sexp) -> PResult<Expr> {
    if e.sort().is_bool() {
        Ok(e)
    } else {
        Err(Diagnostic::new(at.span(), format!("expected a boolean term, found sort {}", e.sort())))
    }
}

fn instr_pair(p: &Sexp, a: &IlaModel, b: &IlaModel) -> PResult<(String, String)> {
    let l = list(p, "an `(instrA instrB)` pair")?;
    if l.len() != 2 {
        return Err(Diagnostic::new(p.span(), "expected an `(instrA instrB)` pair"));
    }
    let (x, y) = (atom(&l[0], "an instruction name")?, atom(&l[1], "an instruction name")?);
    if a.instruction(x).is_none() {
        return Err(Diagnostic::new(l[0].span(), format!("`{}` has no instruction `{x}`", a.name())));
    }
    if b.instruction(y).is_none() {
        return Err(Diagnostic::new(l[1].span(), format!("`{}` has no instruction `{y}`", b.name())));
    }
    Ok((x.to_string(), y.to_string()))
}

#[derive(Clone, Debug)]
pub struct RefinementFile {
    pub spec: RefinementSpec,
}

/// How a state machine refines an ILA:
///
/// ```text
/// (refinement
///   (map (pc (ite ex_valid ex_pc pc)) (r0 r0))  ; ILA term, machine term
///   (invariant (=> ex_valid (= pc (bvadd ex_pc (bv 4 1)))))
///   (input irq ex_irq)                          ; ILA input, machine term
///   (commit ex_valid)
///   (issue true)
///   (warmup 5)
///   (bound 16))
/// ```
pub fn parse_refinement(text: &str, ila: &IlaModel, fsm: &TransitionSystem) -> Result<RefinementFile, Diagnostics> {
    let forms = parse_all(text)?;
    let items = one_form(&forms, "refinement")?;
    let mut si = model_scope(ila, false);
    let mut sf = ts_scope(fsm, false);
    let mut sfi = ts_scope(fsm, true);
    let mut diags = Vec::new();
    let mut spec = RefinementSpec {
        pairs: Vec::new(),
        invariants: Vec::new(),
        inputs: Vec::new(),
        commit: Expr::tt(),
        issue: Expr::tt(),
        warmup: 0,
        bound: 0,
    };
    let mut seen: HashMap<&str, Span> = HashMap::new();
    for x in items {
        let Some(l) = collect(&mut diags, list(x, "a refinement entry")) else { continue };
        let args = &l[1..];
        let head = x.head().unwrap_or("");
        if matches!(head, "commit" | "issue" | "warmup" | "bound") {
            if let Some(prev) = seen.insert(head, x.span()) {
                diags.push(Diagnostic::new(x.span(), format!("second `({head} ...)` (first at {prev})")));
            }
        }
        match head {
            "define" => {
                if let Some(d) = collect(&mut diags, parse_define(args, x)) {
                    si.defines.push(d.clone());
                    sf.defines.push(d.clone());
                    sfi.defines.push(d);
                }
            }
            "map" => {
                for p in args {
                    let Some(pl) = collect(&mut diags, list(p, "an `(ila-term machine-term)` pair")) else { continue };
                    if pl.len() != 2 {
                        diags.push(Diagnostic::new(p.span(), "expected an `(ila-term machine-term)` pair"));
                        continue;
                    }
                    let ei = collect(&mut diags, si.expr(&pl[0]));
                    let ef = collect(&mut diags, sf.expr(&pl[1]));
                    if let (Some(ei), Some(ef)) = (ei, ef) {
                        if ei.sort() != ef.sort() {
                            diags.push(Diagnostic::new(p.span(), format!("paired terms have sorts {} and {}", ei.sort(), ef.sort())));
                        } else {
                            spec.pairs.push((ei, ef));
                        }
                    }
                }
            }
            "invariant" => {
                if collect(&mut diags, arity(x, args, 1, "invariant")).is_some() {
                    if let Some(e) = collect(&mut diags, sf.expr(&args[0]).and_then(|e| boolean(e, &args[0]))) {
                        spec.invariants.push(e);
                    }
                }
            }
            "input" => {
                if collect(&mut diags, arity(x, args, 2, "input")).is_some() {
                    let Some(n) = collect(&mut diags, atom(&args[0], "an ILA input name")) else { continue };
                    let Some(v) = ila.input_var(n) else {
                        diags.push(Diagnostic::new(args[0].span(), format!("`{n}` is not an input of `{}`", ila.name())));
                        continue;
                    };
                    if let Some(e) = collect(&mut diags, sfi.expr(&args[1])) {
                        if e.sort() != v.sort() {
                            diags.push(Diagnostic::new(args[1].span(), format!("input `{n}` is {} but the term is {}", v.sort(), e.sort())));
                        } else {
                            spec.inputs.push((n.to_string(), e));
                        }
                    }
                }
            }
            "commit" | "issue" => {
                if collect(&mut diags, arity(x, args, 1, head)).is_some() {
                    let scope = if head == "commit" { &sfi } else { &sf };
                    if let Some(e) = collect(&mut diags, scope.expr(&args[0]).and_then(|e| boolean(e, &args[0]))) {
                        if head == "commit" {
                            spec.commit = e
                        } else {
                            spec.issue = e
                        }
                    }
                }
            }
            "warmup" | "bound" => {
                if collect(&mut diags, arity(x, args, 1, head)).is_some() {
                    if let Some(n) = collect(&mut diags, number(&args[0])) {
                        if head == "warmup" {
                            spec.warmup = n as usize
                        } else {
                            spec.bound = n as usize
                        }
                    }
                }
            }
            h => diags.push(Diagnostic::new(x.span(), format!("unknown refinement entry `{h}`"))),
        }
    }
    if !seen.contains_key("commit") {
        diags.push(Diagnostic::new(forms[0].span(), "refinement needs a `(commit ...)` condition"));
    }
    if !seen.contains_key("bound") {
        diags.push(Diagnostic::new(forms[0].span(), "refinement needs a `(bound k)`"));
    }
    for v in ila.inputs() {
        if !spec.inputs.iter().any(|(n, _)| n == v.name()) {
            diags.push(Diagnostic::new(forms[0].span(), format!("ILA input `{}` has no `(input ...)` entry", v.name())));
        }
    }
    if diags.is_empty() {
        Ok(RefinementFile { spec })
    } else {
        Err(Diagnostics(diags))
    }
}

/// A finite-state machine:
///
/// ```text
/// (fsm Pipe
///   (state (pc (bv 4)) (ex_valid bool))
///   (input (irq bool))
///   (define (inc x) (bvadd x (bv 4 1)))
///   (init (not ex_valid))
///   (next (pc (inc pc)) (ex_valid true))   ; unlisted variables keep their value
///   (constraint true)
///   (label commit ex_valid))
/// ```
pub fn parse_fsm(text: &str) -> Result<TransitionSystem, Diagnostics> {
    let forms = parse_all(text)?;
    let items = one_form(&forms, "fsm")?;
    let mut diags = Vec::new();
    let Some(name) = items.first().and_then(|n| n.as_atom()) else {
        return Err(Diagnostic::new(forms[0].span(), "expected `(fsm name ...)`").into());
    };
    let mut scope = Scope::default();
    let mut vars: Vec<Var> = Vec::new();
    let mut inputs: Vec<Var> = Vec::new();
    for x in &items[1..] {
        let Some(l) = collect(&mut diags, list(x, "an fsm section")) else { continue };
        match x.head() {
            Some(h @ ("state" | "input")) => {
                for d in &l[1..] {
                    if let Some((n, sort, sp)) = collect(&mut diags, parse_decl(d)) {
                        if scope.vars.contains_key(&n) {
                            diags.push(Diagnostic::new(sp, format!("duplicate name `{n}`")));
                            continue;
                        }
                        let v = if h == "state" { Var::state(&n, sort) } else { Var::input(&n, sort) };
                        scope.vars.insert(n, v.clone());
                        if h == "state" { vars.push(v) } else { inputs.push(v) }
                    }
                }
            }
            Some("fun") => {
                if let Some(f) = collect(&mut diags, super::model_file::fun_decl(x, &l[1..])) {
                    scope.funcs.insert(f.name().to_string(), f);
                }
            }
            Some("define") => {
                if let Some(d) = collect(&mut diags, parse_define(&l[1..], x)) {
                    scope.defines.push(d);
                }
            }
            _ => {}
        }
    }
    let mut init = Vec::new();
    let mut next: HashMap<Var, Expr> = HashMap::new();
    let mut constraints = Vec::new();
    let mut labels: Vec<(String, Expr)> = Vec::new();
    for x in &items[1..] {
        let Some(l) = x.as_list() else { continue };
        let args = &l[1..];
        match x.head() {
            Some("state" | "input" | "fun" | "define") => {}
            Some(h @ ("init" | "constraint")) => {
                if collect(&mut diags, arity(x, args, 1, h)).is_some() {
                    if let Some(e) = collect(&mut diags, scope.expr(&args[0]).and_then(|e| boolean(e, &args[0]))) {
                        if h == "init" { init.push(e) } else { constraints.push(e) }
                    }
                }
            }
            Some("next") => {
                for p in args {
                    let Some(pl) = collect(&mut diags, list(p, "a `(variable term)` pair")) else { continue };
                    if pl.len() != 2 {
                        diags.push(Diagnostic::new(p.span(), "expected a `(variable term)` pair"));
                        continue;
                    }
                    let Some(n) = collect(&mut diags, atom(&pl[0], "a state variable")) else { continue };
                    let Some(v) = vars.iter().find(|v| v.name() == n).cloned() else {
                        diags.push(Diagnostic::new(pl[0].span(), format!("`{n}` is not a state variable")));
                        continue;
                    };
                    if let Some(e) = collect(&mut diags, scope.expr(&pl[1])) {
                        if e.sort() != v.sort() {
                            diags.push(Diagnostic::new(pl[1].span(), format!("next({n}) has sort {}, expected {}", e.sort(), v.sort())));
                        } else if next.insert(v, e).is_some() {
                            diags.push(Diagnostic::new(p.span(), format!("second next-state term for `{n}`")));
                        }
                    }
                }
            }
            Some("label") => {
                if collect(&mut diags, arity(x, args, 2, "label")).is_some() {
                    let Some(n) = collect(&mut diags, atom(&args[0], "a label name")) else { continue };
                    if labels.iter().any(|(l, _)| l == n) {
                        diags.push(Diagnostic::new(args[0].span(), format!("duplicate label `{n}`")));
                        continue;
                    }
                    if let Some(e) = collect(&mut diags, scope.expr(&args[1]).and_then(|e| boolean(e, &args[1]))) {
                        labels.push((n.to_string(), e));
                    }
                }
            }
            Some(h) => diags.push(Diagnostic::new(x.span(), format!("unknown fsm section `{h}`"))),
            None => diags.push(Diagnostic::new(x.span(), "expected an fsm section")),
        }
    }
    if !diags.is_empty() {
        return Err(Diagnostics(diags));
    }
    let next: Vec<(Var, Expr)> = vars.iter().map(|v| (v.clone(), next.remove(v).unwrap_or_else(|| Expr::var(v)))).collect();
    let init = Expr::and_all(init).unwrap();
    TransitionSystem::new(name, vars, inputs, init, next, constraints, labels)
        .map_err(|e| Diagnostic::new(forms[0].span(), e.to_string()).into())
}
