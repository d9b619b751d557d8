use std::fmt::Write;

use super::common::{atom, list, parse_value, Diagnostic, Diagnostics, PResult};
use crate::expr::{Sort, Var};
use crate::hierarchy::FlatIla;
use crate::interp::Trace;
use crate::sexp::{parse_all, Sexp, Span};
use crate::value::{Valuation, Value};

/// Simulation input: optional initial values and one input binding list per
/// step, by name.
///
/// ```text
/// ; comment
/// init (Mem (array 16 8 0 (65280 7)))
/// step (InWr (bv 1 1)) (InAddr (bv 16 65282)) (InData (bv 8 0))
/// ```
///
/// `fire`, `stall`, `state` and `final` lines (simulator output) are
/// accepted and ignored, so a simulation log can be fed back in.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputTrace {
    pub init: Vec<(String, Value)>,
    pub steps: Vec<Vec<(String, Value)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("`{0}` is not a state variable of the model")]
    UnknownState(String),
    #[error("`{0}` is not an input of the model")]
    UnknownInput(String),
    #[error("`{name}` has sort {expected} but is given a {found} value")]
    Sort { name: String, expected: Sort, found: Sort },
}

impl InputTrace {
    /// The initial values and per-step inputs as valuations over `flat`'s
    /// canonical variables. Unbound names are simply absent.
    pub fn resolve(&self, flat: &FlatIla) -> Result<(Valuation, Vec<Valuation>), TraceError> {
        fn bind(
            items: &[(String, Value)],
            find: impl Fn(&str) -> Option<Var>,
            unknown: fn(String) -> TraceError,
        ) -> Result<Valuation, TraceError> {
            let mut v = Valuation::new();
            for (n, x) in items {
                let var = find(n).ok_or_else(|| unknown(n.clone()))?;
                if var.sort() != x.sort() {
                    return Err(TraceError::Sort { name: n.clone(), expected: var.sort(), found: x.sort() });
                }
                v.insert(var, x.clone());
            }
            Ok(v)
        }
        let init = bind(&self.init, |n| flat.state_var(n).cloned(), TraceError::UnknownState)?;
        let steps = self
            .steps
            .iter()
            .map(|s| bind(s, |n| flat.input_var(n).cloned(), TraceError::UnknownInput))
            .collect::<Result<_, _>>()?;
        Ok((init, steps))
    }
}

fn bindings(items: &[Sexp]) -> PResult<Vec<(String, Value)>> {
    let mut out = Vec::new();
    for b in items {
        let l = list(b, "a `(name value)` binding")?;
        if l.len() != 2 {
            return Err(Diagnostic::new(b.span(), "expected a `(name value)` binding"));
        }
        let n = atom(&l[0], "a name")?;
        if out.iter().any(|(x, _): &(String, Value)| x == n) {
            return Err(Diagnostic::new(l[0].span(), format!("`{n}` bound twice")));
        }
        out.push((n.to_string(), parse_value(&l[1], None)?));
    }
    Ok(out)
}

fn shift(span: Span, line: usize, col: usize) -> Span {
    if span.line == 1 {
        Span { line: line as u32, col: span.col + col as u32 }
    } else {
        Span { line: span.line + line as u32 - 1, col: span.col }
    }
}

pub fn parse_trace(text: &str) -> Result<InputTrace, Diagnostics> {
    let mut t = InputTrace::default();
    let mut diags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("");
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - trimmed.len();
        let (kw, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let col = indent + kw.len();
        let parsed = parse_all(rest).map_err(Diagnostic::from).and_then(|items| bindings(&items));
        let parsed = parsed.map_err(|d| Diagnostic::new(shift(d.span, i + 1, col), d.message));
        match kw {
            "init" | "step" => match parsed {
                Ok(b) if kw == "init" => {
                    if !t.steps.is_empty() || !t.init.is_empty() {
                        diags.push(Diagnostic::new(Span { line: i as u32 + 1, col: indent as u32 + 1 }, "`init` must come first, once"));
                    }
                    t.init = b;
                }
                Ok(b) => t.steps.push(b),
                Err(d) => diags.push(d),
            },
            "fire" | "stall" | "state" | "final" => {}
            other => diags.push(Diagnostic::new(
                Span { line: i as u32 + 1, col: indent as u32 + 1 },
                format!("unknown trace line `{other}`; expected `init` or `step`"),
            )),
        }
    }
    if diags.is_empty() {
        Ok(t)
    } else {
        Err(Diagnostics(diags))
    }
}

fn binding_list(v: &Valuation) -> String {
    let mut s = String::new();
    for (i, (x, val)) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "({} {val})", x.name());
    }
    s
}

/// Simulator output: the initial state, then per step the inputs, what
/// fired, and the variables that changed (every variable with
/// `full_states`), then the final state.
pub fn serialize_trace(trace: &Trace, full_states: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "init {}", binding_list(&trace.initial));
    for (t, st) in trace.steps.iter().enumerate() {
        let _ = writeln!(out, "step {}", binding_list(&st.inputs));
        match &st.outcome.fired {
            Some(f) => {
                let _ = writeln!(out, "fire {}", f.qualified());
            }
            None => out.push_str("stall\n"),
        }
        let before = trace.state(t);
        let shown: Valuation = if full_states {
            st.outcome.next.clone()
        } else {
            st.outcome.next.iter().filter(|(v, x)| before.get(v) != Some(*x)).map(|(v, x)| (v.clone(), x.clone())).collect()
        };
        if !shown.is_empty() {
            let _ = writeln!(out, "state {}", binding_list(&shown));
        }
    }
    let _ = writeln!(out, "final {}", binding_list(trace.final_state()));
    out
}
