use ila_core::expr::{Expr, FuncSym, Op, Sort, Var};
use ila_core::query::Query;
use ila_core::smt::{brute_force, demangle, emit_smtlib, solve, BruteConfig, SolveError, SolveStatus, SolverConfig};
use ila_core::value::{UfTable, Valuation};

fn solver() -> Option<SolverConfig> {
    let cfg = SolverConfig::z3();
    let probe = Query::new(vec![], Expr::tt());
    match solve(&probe, &cfg) {
        Ok(_) => Some(cfg),
        Err(SolveError::EngineUnavailable(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

fn bv(w: u32, v: u128) -> Expr {
    Expr::bv(w, v).unwrap()
}

fn check_model(q: &Query, status: &SolveStatus) {
    if let SolveStatus::Sat(m) = status {
        assert!(q.holds(&m.values, &m.ufs).unwrap(), "model does not satisfy the query");
    }
}

fn both(q: &Query) -> &'static str {
    let b = brute_force(q, &BruteConfig::default()).unwrap();
    check_model(q, &b.status);
    if let Some(cfg) = solver() {
        let s = solve(q, &cfg).unwrap();
        check_model(q, &s.status);
        assert_eq!(b.status.name(), s.status.name(), "engines disagree");
    }
    b.status.name()
}

#[test]
fn contradiction_is_unsat() {
    let x = Var::input("x", Sort::Bool);
    let q = Query::new(vec![x.clone()], Expr::and_all([Expr::var(&x), Expr::var(&x).not().unwrap()]).unwrap());
    assert_eq!(both(&q), "unsat");
}

#[test]
fn greater_than_ten() {
    let x = Var::input("x", Sort::bv(4));
    let q = Query::new(vec![x.clone()], Expr::bin(Op::Ult, &bv(4, 10), &Expr::var(&x)).unwrap());
    let r = brute_force(&q, &BruteConfig::default()).unwrap();
    match r.status {
        SolveStatus::Sat(m) => {
            let v = m.values.get(&x).unwrap().as_bits().unwrap();
            assert!((11..=15).contains(&v));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(both(&q), "sat");
}

#[test]
fn budget_is_enforced() {
    let x = Var::input("x", Sort::bv(24));
    let q = Query::new(vec![x.clone()], Expr::var(&x).eq_to(&bv(24, 5)).unwrap());
    assert!(matches!(
        brute_force(&q, &BruteConfig::default()),
        Err(SolveError::BudgetExceeded { needed: 24, budget: 20 })
    ));
    let capped = BruteConfig { bit_budget: 20, effort_cap: Some(10_000) };
    assert!(brute_force(&q, &capped).unwrap().status.is_sat());
}

#[test]
fn arrays_and_functions() {
    let m = Var::state("m", Sort::array(4, 4));
    let i = Var::input("i", Sort::bv(4));
    let j = Var::input("j", Sort::bv(4));
    let f = FuncSym::new("k", vec![Sort::bv(4)], Sort::bv(4)).unwrap();
    let rd = |a: &Expr, x: &Expr| Expr::select(a, x).unwrap();
    let st = Expr::app(Op::Store, vec![Expr::var(&m), Expr::var(&i), bv(4, 3)]).unwrap();
    // store then read elsewhere differs from the original only if i == j
    let g = rd(&st, &Expr::var(&j)).eq_to(&rd(&Expr::var(&m), &Expr::var(&j))).unwrap().not().unwrap();
    let q = Query::new(vec![m.clone(), i.clone(), j.clone()], g);
    assert_eq!(both(&q), "sat");
    // functional consistency
    let fi = Expr::app(Op::Apply(f.clone()), vec![Expr::var(&i)]).unwrap();
    let fj = Expr::app(Op::Apply(f), vec![Expr::var(&j)]).unwrap();
    let g2 = Expr::and_all([Expr::var(&i).eq_to(&Expr::var(&j)).unwrap(), fi.eq_to(&fj).unwrap().not().unwrap()]).unwrap();
    let q2 = Query::new(vec![i.clone(), j.clone()], g2);
    assert_eq!(both(&q2), "unsat");
    let g3 = fi.eq_to(&fj).unwrap().not().unwrap();
    let q3 = Query::new(vec![i, j], g3);
    assert_eq!(both(&q3), "sat");
}

#[test]
fn defs_are_respected() {
    let x = Var::input("x@0", Sort::bv(8));
    let y = Var::state("y@1", Sort::bv(8));
    let mut q = Query::new(vec![x.clone()], Expr::var(&y).eq_to(&bv(8, 0)).unwrap());
    q.define(y.clone(), Expr::bin(Op::BvAdd, &Expr::var(&x), &bv(8, 1)).unwrap());
    assert_eq!(both(&q), "sat");
    let r = brute_force(&q, &BruteConfig::default()).unwrap();
    if let SolveStatus::Sat(m) = r.status {
        assert_eq!(m.values.get(&x).unwrap().as_bits(), Some(255));
    }
    assert!(q.holds(&Valuation::new().with(&x, ila_core::Value::bv(8, 255)), &UfTable::new(0)).unwrap());
}

#[test]
fn script_round_trips_and_demangles() {
    let x = Var::input("A:x@0", Sort::bv(8));
    let e = Expr::bin(Op::BvAdd, &Expr::var(&x), &Expr::var(&x)).unwrap();
    let q = Query::new(vec![x], Expr::and_all([e.eq_to(&bv(8, 4)).unwrap(), Expr::bin(Op::Ult, &e, &bv(8, 9)).unwrap()]).unwrap());
    let s = emit_smtlib(&q);
    assert!(s.text.contains("(set-logic QF_AUFBV)"));
    assert!(s.text.contains("t_0"), "shared subterm is named");
    assert_eq!(ila_core::smt::reprint(&s.text).unwrap(), s.text);
    for (sym, orig) in &s.symbols {
        assert_eq!(demangle(sym).as_deref(), Some(orig.as_str()));
    }
}
