use std::sync::{Arc, Mutex};

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ila_core::bundled::*;
use ila_core::smt::{emit_smtlib, BruteConfig};
use ila_core::{check_decode_onehot, check_fsm_refinement, lower, parse_model, serialize_model, Engine, Machine, UfTable, Valuation, Value};

fn simulate(c: &mut Criterion) {
    let m = toy_proc(false);
    let mach = Machine::new(&m);
    let irq = m.input_var("irq").unwrap().clone();
    let ufs = UfTable::new(0);
    c.bench_function("interp/proc 1000 steps", |b| {
        b.iter(|| {
            let mut s = mach.initial_state_with(&Valuation::new());
            for t in 0..1000u128 {
                let i = Valuation::new().with(&irq, Value::bv(1, (t % 97 == 0) as u128));
                s = mach.step(&s, &i, &ufs).unwrap().next;
            }
            black_box(s)
        })
    });
}

fn front_end(c: &mut Criterion) {
    c.bench_function("io/parse aes-table", |b| b.iter(|| parse_model(black_box(AES_TABLE)).unwrap()));
    let m = toy_aes(SboxStyle::Table);
    c.bench_function("io/serialize aes-table", |b| b.iter(|| serialize_model(black_box(&m))));
    c.bench_function("ts/lower aes-table", |b| b.iter(|| lower(black_box(&m))));
}

fn checking(c: &mut Criterion) {
    let m = toy_proc(false);
    let engine = Engine::Brute(BruteConfig::default());
    c.bench_function("eqcheck/proc one-hot by brute force", |b| b.iter(|| check_decode_onehot(&m, &engine).unwrap()));

    let fsm = toy_pipe(false);
    let spec = pipe_refinement(&m, &fsm).spec;
    let log = Arc::new(Mutex::new(Vec::new()));
    let record = Engine::Record(log.clone());
    c.bench_function("eqcheck/pipeline refinement queries", |b| {
        b.iter(|| {
            log.lock().unwrap().clear();
            check_fsm_refinement(&m, &fsm, &spec, &record).unwrap()
        })
    });
    let q = log.lock().unwrap()[0].clone();
    c.bench_function("smt/emit pipeline refinement query", |b| b.iter(|| emit_smtlib(black_box(&q))));
}

criterion_group!(benches, simulate, front_end, checking);
criterion_main!(benches);
