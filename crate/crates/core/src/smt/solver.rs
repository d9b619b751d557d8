//! External SMT solver driver.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::emit::{emit_smtlib, Request, SmtScript};
use super::scalarize::scalarize;
use super::{Model, QueryLog, SolveError, SolveResult, SolveStatus};
use crate::expr::Sort;
use crate::query::Query;
use crate::sexp::{parse_all, Sexp};
use crate::value::{ArrayValue, UfTable, Valuation, Value};

/// Placeholder for the script path in a solver command template.
pub const FILE_PLACEHOLDER: &str = "{file}";

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Whitespace-separated command. `{file}` is replaced by the script path;
    /// without it the script is written to standard input.
    pub command: String,
    pub timeout: Duration,
    pub log: Option<QueryLog>,
}

impl SolverConfig {
    pub fn new(command: impl Into<String>) -> SolverConfig {
        SolverConfig { command: command.into(), timeout: Duration::from_secs(60), log: None }
    }

    /// `z3` reading the script from a file.
    pub fn z3() -> SolverConfig {
        SolverConfig::new("z3 -smt2 {file}")
    }
}

fn run(script: &SmtScript, cfg: &SolverConfig) -> Result<Option<String>, SolveError> {
    let parts: Vec<&str> = cfg.command.split_whitespace().collect();
    let Some((prog, args)) = parts.split_first() else {
        return Err(SolveError::EngineUnavailable("empty solver command".into()));
    };
    let uses_file = args.iter().any(|x| x.contains(FILE_PLACEHOLDER));
    let file = if uses_file {
        let mut f = tempfile::Builder::new()
            .suffix(".smt2")
            .tempfile()
            .map_err(|e| SolveError::EngineUnavailable(format!("cannot create script file: {e}")))?;
        f.write_all(script.text.as_bytes())
            .map_err(|e| SolveError::EngineUnavailable(format!("cannot write script file: {e}")))?;
        Some(f)
    } else {
        None
    };
    let path = file.as_ref().map(|f| f.path().to_string_lossy().into_owned()).unwrap_or_default();
    let mut cmd = Command::new(prog);
    for x in args {
        cmd.arg(x.replace(FILE_PLACEHOLDER, &path));
    }
    cmd.stdin(if uses_file { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let mut child = cmd
        .spawn()
        .map_err(|e| SolveError::EngineUnavailable(format!("cannot run `{prog}`: {e}")))?;
    if !uses_file {
        let mut stdin = child.stdin.take().unwrap();
        stdin
            .write_all(script.text.as_bytes())
            .map_err(|e| SolveError::EngineUnavailable(format!("cannot write to solver: {e}")))?;
    }
    let mut stdout = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + cfg.timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(None);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Err(SolveError::EngineUnavailable(e.to_string())),
        }
    }
    Ok(Some(reader.join().unwrap_or_default()))
}

fn parse_bits(s: &Sexp) -> Option<u128> {
    match s {
        Sexp::Atom(x, _) => {
            if x == "true" {
                Some(1)
            } else if x == "false" {
                Some(0)
            } else if let Some(b) = x.strip_prefix("#b") {
                u128::from_str_radix(b, 2).ok()
            } else if let Some(h) = x.strip_prefix("#x") {
                u128::from_str_radix(h, 16).ok()
            } else {
                None
            }
        }
        Sexp::List(items, _) => {
            // (_ bvN w)
            let v = items.get(1)?.as_atom()?.strip_prefix("bv")?;
            (items.first()?.as_atom()? == "_").then_some(())?;
            v.parse().ok()
        }
    }
}

fn parse_model(script: &SmtScript, q: &Query, resp: &Sexp, output: &str) -> Result<Model, SolveError> {
    let err = |m: &str| SolveError::Parse { message: m.to_string(), output: output.to_string() };
    let pairs = resp.as_list().ok_or_else(|| err("get-value response is not a list"))?;
    let mut vals = Vec::with_capacity(pairs.len());
    for p in pairs {
        let pv = p.as_list().filter(|x| x.len() == 2).ok_or_else(|| err("malformed get-value pair"))?;
        vals.push(parse_bits(&pv[1]).ok_or_else(|| err("unsupported value form"))?);
    }
    let mut values = Valuation::new();
    let mut arrays: Vec<(crate::expr::Var, ArrayValue)> = q
        .roots
        .iter()
        .filter_map(|r| ArrayValue::filled(r.sort(), 0).map(|a| (r.clone(), a)))
        .collect();
    let mut ufs = UfTable::new(0);
    let mut k = 0;
    let mut take = |n: usize| -> Result<Vec<u128>, SolveError> {
        let s = vals.get(k..k + n).ok_or_else(|| err("too few values in get-value response"))?.to_vec();
        k += n;
        Ok(s)
    };
    let mut written: std::collections::HashSet<(String, u128)> = Default::default();
    for r in &script.requests {
        match r {
            Request::Root(v) => {
                let x = take(1)?[0];
                values.insert(v.clone(), Value::from_bits(v.sort(), x));
            }
            Request::Cell(v) => {
                let x = take(2)?;
                if written.insert((v.name().to_string(), x[0])) {
                    let a = arrays.iter_mut().find(|(r, _)| r == v).unwrap();
                    a.1.write(x[0], x[1]);
                }
            }
            Request::Uf(f) => {
                let x = take(f.args().len() + 1)?;
                let (res, args) = x.split_last().unwrap();
                let res = if f.ret() == Sort::Bool { *res & 1 } else { *res };
                ufs.set(f, args.to_vec(), res);
            }
        }
    }
    for (v, a) in arrays {
        values.insert(v, Value::Array(a));
    }
    Ok(Model { values, ufs })
}

/// Emit `q`, run the configured solver on it, and read back the verdict and,
/// when satisfiable, a model. Arrays of at most 16 cells are expanded into
/// one variable per cell first.
pub fn solve(q: &Query, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    q.check()?;
    if let Some(log) = &cfg.log {
        log.lock().unwrap().push(q.clone());
    }
    let start = Instant::now();
    if let Some(s) = scalarize(q).map_err(|e| SolveError::Query(e.into()))? {
        let mut r = solve_emitted(&s.query, cfg)?;
        if let SolveStatus::Sat(m) = &mut r {
            m.values = s.restore(&q.roots, &m.values);
        }
        return Ok(SolveResult { status: r, engine: "solver", elapsed: start.elapsed() });
    }
    let status = solve_emitted(q, cfg)?;
    Ok(SolveResult { status, engine: "solver", elapsed: start.elapsed() })
}

fn solve_emitted(q: &Query, cfg: &SolverConfig) -> Result<SolveStatus, SolveError> {
    let script = emit_smtlib(q);
    let Some(output) = run(&script, cfg)? else {
        return Ok(SolveStatus::Unknown("timeout".into()));
    };
    let parsed = parse_all(&output).map_err(|e| SolveError::Parse { message: e.to_string(), output: output.clone() })?;
    let verdict = parsed.first().and_then(|s| s.as_atom()).unwrap_or("");
    let status = match verdict {
        "unsat" => SolveStatus::Unsat,
        "unknown" => SolveStatus::Unknown("solver returned unknown".into()),
        "sat" => {
            let model = match parsed.get(1) {
                Some(resp) => parse_model(&script, q, resp, &output)?,
                None if script.requests.is_empty() => Model { values: Valuation::new(), ufs: UfTable::new(0) },
                None => return Err(SolveError::Parse { message: "missing get-value response".into(), output }),
            };
            let mut values = model.values;
            for r in &q.roots {
                if !values.contains(r) {
                    values.insert(r.clone(), Value::zero(r.sort()));
                }
            }
            SolveStatus::Sat(Model { values, ufs: model.ufs })
        }
        _ => return Err(SolveError::Parse { message: "expected sat, unsat or unknown".into(), output }),
    };
    Ok(status)
}
