//! Pinned report and SMT-LIB outputs under `tests/golden`.
//!
//! Set `ILA_BLESS=1` to rewrite the files from the current output.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use ila_core::bundled::*;
use ila_core::eqcheck::Counterexample;
use ila_core::io::serialize_reports;
use ila_core::smt::{emit_smtlib, reprint};
use ila_core::ts::at_var;
use ila_core::{
    check_decode_onehot, check_equiv, check_instr_equiv, parse_model, ArrayValue, CheckReport, CheckStatus, Engine, FuncSym, Query, Sort,
    SolverConfig, UfTable, Valuation, Value, Var,
};

pub const NAMES: [&str; 6] = ["overlap-onehot.report", "layout.report", "aes-equiv.report", "proc-onehot-0.smt2", "proc-onehot-1.smt2", "aes-instr-0.smt2"];

pub fn has_z3() -> bool {
    std::process::Command::new("z3").arg("-version").output().is_ok_and(|o| o.status.success())
}

fn path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(rel)
}

/// Queries a check issues, in order, when every query is unsat.
pub fn recorded<T: Send>(f: impl FnOnce(&Engine) -> T + Send) -> (T, Vec<Query>) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let engine = Engine::Record(log.clone());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let out = pool.install(|| f(&engine));
    let qs = log.lock().unwrap().clone();
    (out, qs)
}

fn layout_reports() -> String {
    let pc = Var::state("pc", Sort::bv(4));
    let mem = Var::state("mem", Sort::array(2, 8));
    let mut arr = ArrayValue::new(2, 8, 7);
    arr.write(3, 200);
    let values = Valuation::new()
        .with(&at_var(&pc, 0), Value::bv(4, 3))
        .with(&at_var(&pc, 1), Value::bv(4, 4))
        .with(&at_var(&mem, 0), Value::Array(arr))
        .with(&Var::input("irq", Sort::Bool), Value::Bool(true));
    let f = FuncSym::new("kernel", vec![Sort::bv(8), Sort::bv(8)], Sort::bv(8)).unwrap();
    let mut ufs = UfTable::new(0);
    ufs.set(&f, vec![1, 2], 9);
    let cex = Counterexample { values, ufs, detail: "pc differs\nat commit".into() };
    serialize_reports(&[
        CheckReport { id: "ADD:update".into(), status: CheckStatus::Proved, engine: "brute".into(), queries: 2 },
        CheckReport { id: "MRET:refine".into(), status: CheckStatus::Counterexample(Box::new(cex)), engine: "solver".into(), queries: 1 },
        CheckReport { id: "START:completion".into(), status: CheckStatus::Unknown("child still active at bound 0".into()), engine: "auto".into(), queries: 1 },
    ])
}

fn script(q: &Query) -> Result<String, String> {
    let text = emit_smtlib(q).text;
    match reprint(&text) {
        Some(t) if t == text => Ok(text),
        _ => Err("script does not read back to itself".into()),
    }
}

/// Current output for a golden file; `None` when it needs a solver and
/// none is installed.
pub fn render(name: &str) -> Option<Result<String, String>> {
    let aes = || {
        let (a, b) = (toy_aes(SboxStyle::Table), toy_aes(SboxStyle::Logic));
        let mf = aes_mapping(&a, &b);
        (a, b, mf)
    };
    Some(match name {
        "overlap-onehot.report" => {
            let m = parse_model(&std::fs::read_to_string(path("data/overlap.ila")).unwrap()).unwrap();
            check_decode_onehot(&m, &Engine::brute()).map(|rs| serialize_reports(&rs)).map_err(|e| e.to_string())
        }
        "layout.report" => Ok(layout_reports()),
        "aes-equiv.report" => {
            if !has_z3() {
                return None;
            }
            let (a, b, mf) = aes();
            let engine = Engine::Auto { brute: Default::default(), solver: Some(SolverConfig::z3()) };
            check_equiv(&a, &b, &mf.map, &mf.instructions, &mf.completions, &engine).map(|rs| serialize_reports(&rs)).map_err(|e| e.to_string())
        }
        "proc-onehot-0.smt2" | "proc-onehot-1.smt2" => {
            let m = toy_proc(false);
            let (_, qs) = recorded(|e| check_decode_onehot(&m, e).unwrap());
            script(&qs[if name.contains("-0") { 0 } else { 1 }])
        }
        "aes-instr-0.smt2" => {
            let (a, b, mf) = aes();
            let (_, qs) = recorded(|e| check_instr_equiv(&a, &b, &mf.map, &mf.instructions[..1], e).unwrap());
            script(&qs[0])
        }
        _ => Err(format!("no golden named {name}")),
    })
}

/// Compares (or with `ILA_BLESS` rewrites) one golden file. `Ok(false)`
/// means it was skipped for lack of a solver.
pub fn check(name: &str) -> Result<bool, String> {
    let Some(got) = render(name) else { return Ok(false) };
    let got = got?;
    let p = path("golden").join(name);
    if std::env::var_os("ILA_BLESS").is_some() {
        std::fs::write(&p, &got).map_err(|e| e.to_string())?;
        return Ok(true);
    }
    let want = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
    if want != got {
        return Err(format!("{name} differs from the golden file\n--- got ---\n{got}"));
    }
    Ok(true)
}
