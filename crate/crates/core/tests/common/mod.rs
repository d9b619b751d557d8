//! Random model generation shared by the property tests and the
//! acceptance run.
#![allow(dead_code)]

pub mod goldens;

use ila_core::expr::Op;
use ila_core::{
    build_model, lower, parse_model, serialize_model, Expr, FuncSym, IlaModel, InitValue, Machine, RawChild, RawInstruction, RawModel,
    Sort, UfTable, Valuation, Value, Var,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen {
    rng: ChaCha8Rng,
    scalars: Vec<Var>,
    arrays: Vec<Var>,
    funcs: Vec<FuncSym>,
}

impl Gen {
    fn width(&mut self) -> u32 {
        *[1, 2, 3, 4, 8].choose(&mut self.rng).unwrap()
    }

    fn boolean(&mut self, depth: u32) -> Expr {
        let k = if depth == 0 { 0 } else { self.rng.gen_range(0..6) };
        match k {
            0 => {
                let w = self.width();
                let (a, b) = (self.bv(w, depth.saturating_sub(1)), self.bv(w, depth.saturating_sub(1)));
                let op = [Op::Eq, Op::Ult, Op::Ule, Op::Slt, Op::Sle].choose(&mut self.rng).unwrap().clone();
                Expr::bin(op, &a, &b).unwrap()
            }
            1 => self.boolean(depth - 1).not().unwrap(),
            2 => Expr::and_all([self.boolean(depth - 1), self.boolean(depth - 1)]).unwrap(),
            3 => Expr::or_all([self.boolean(depth - 1), self.boolean(depth - 1)]).unwrap(),
            4 => Expr::bool(self.rng.gen()),
            _ => Expr::bin(Op::Xor, &self.boolean(depth - 1), &self.boolean(depth - 1)).unwrap(),
        }
    }

    fn leaf(&mut self, w: u32) -> Expr {
        let same: Vec<Var> = self.scalars.iter().filter(|v| v.sort() == Sort::bv(w)).cloned().collect();
        let wider: Vec<Var> = self.scalars.iter().filter(|v| v.sort().bv_width().is_some_and(|x| x > w)).cloned().collect();
        let narrower: Vec<Var> = self.scalars.iter().filter(|v| v.sort().bv_width().is_some_and(|x| x < w)).cloned().collect();
        match self.rng.gen_range(0..5) {
            0 | 1 if !same.is_empty() => Expr::var(same.choose(&mut self.rng).unwrap()),
            2 if !wider.is_empty() => {
                let v = wider.choose(&mut self.rng).unwrap();
                let lo = self.rng.gen_range(0..=v.sort().bv_width().unwrap() - w);
                Expr::app(Op::Extract { hi: lo + w - 1, lo }, vec![Expr::var(v)]).unwrap()
            }
            3 if !narrower.is_empty() => {
                let v = narrower.choose(&mut self.rng).unwrap();
                let ext = w - v.sort().bv_width().unwrap();
                let op = if self.rng.gen() { Op::ZeroExt(ext) } else { Op::SignExt(ext) };
                Expr::app(op, vec![Expr::var(v)]).unwrap()
            }
            _ => Expr::bv(w, self.rng.gen::<u128>() & ((1 << w) - 1)).unwrap(),
        }
    }

    fn bv(&mut self, w: u32, depth: u32) -> Expr {
        if depth == 0 {
            return self.leaf(w);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..9) {
            0 | 1 => {
                let op = [Op::BvAdd, Op::BvSub, Op::BvAnd, Op::BvOr, Op::BvXor, Op::BvMul, Op::BvUdiv, Op::BvUrem, Op::Shl, Op::Lshr, Op::Ashr]
                    .choose(&mut self.rng)
                    .unwrap()
                    .clone();
                Expr::bin(op, &self.bv(w, d), &self.bv(w, d)).unwrap()
            }
            2 => self.bv(w, d).app1(Op::BvNot),
            3 => Expr::ite(&self.boolean(d), &self.bv(w, d), &self.bv(w, d)).unwrap(),
            4 if w >= 2 => {
                let hi = self.rng.gen_range(1..w);
                Expr::bin(Op::Concat, &self.bv(hi, d), &self.bv(w - hi, d)).unwrap()
            }
            5 => {
                let arrs: Vec<Var> = self.arrays.iter().filter(|a| matches!(a.sort(), Sort::Array { data, .. } if data == w)).cloned().collect();
                match arrs.choose(&mut self.rng) {
                    Some(a) => {
                        let Sort::Array { addr, .. } = a.sort() else { unreachable!() };
                        Expr::select(&self.array(a, d), &self.bv(addr, d)).unwrap()
                    }
                    None => self.leaf(w),
                }
            }
            6 => {
                let fs: Vec<FuncSym> = self.funcs.iter().filter(|f| f.ret() == Sort::bv(w)).cloned().collect();
                match fs.choose(&mut self.rng) {
                    Some(f) => {
                        let args = f.args().iter().map(|s| self.bv(s.bv_width().unwrap(), d)).collect();
                        Expr::app(Op::Apply(f.clone()), args).unwrap()
                    }
                    None => self.leaf(w),
                }
            }
            _ => self.leaf(w),
        }
    }

    fn array(&mut self, a: &Var, depth: u32) -> Expr {
        let Sort::Array { addr, data } = a.sort() else { unreachable!() };
        if depth == 0 || self.rng.gen_bool(0.5) {
            return Expr::var(a);
        }
        let inner = self.array(a, depth - 1);
        let st = Expr::app(Op::Store, vec![inner.clone(), self.bv(addr, depth - 1), self.bv(data, depth - 1)]).unwrap();
        if self.rng.gen() {
            Expr::ite(&self.boolean(depth - 1), &st, &inner).unwrap()
        } else {
            st
        }
    }

    fn update(&mut self, v: &Var) -> Expr {
        match v.sort() {
            Sort::Array { .. } => self.array(v, 2),
            Sort::BitVec(w) => self.bv(w, 3),
            Sort::Bool => self.boolean(2),
        }
    }

    /// An ILA over `state` and `inputs` whose decodes compare the opcode
    /// against distinct constants, so they are one-hot by construction.
    fn ila(&mut self, name: &str, state: Vec<Var>, inputs: Vec<Var>, fetch_from: &[Var]) -> RawModel {
        self.scalars = state.iter().chain(&inputs).filter(|v| !matches!(v.sort(), Sort::Array { .. })).cloned().collect();
        self.arrays = state.iter().filter(|v| matches!(v.sort(), Sort::Array { .. })).cloned().collect();
        let src = fetch_from.choose(&mut self.rng).unwrap().clone();
        let w = src.sort().bv_width().unwrap().min(3);
        let fetch = if w == src.sort().bv_width().unwrap() {
            Expr::var(&src)
        } else {
            Expr::app(Op::Extract { hi: w - 1, lo: 0 }, vec![Expr::var(&src)]).unwrap()
        };
        let opcode = Expr::var(&Var::opcode(w));
        let mut codes: Vec<u128> = (0..1u128 << w).collect();
        codes.shuffle(&mut self.rng);
        let n = self.rng.gen_range(1..=codes.len().min(3));
        // valid implies that some decode holds
        let decoded = Expr::or_all(codes[..n].iter().map(|k| fetch.eq_to(&Expr::bv(w, *k).unwrap()).unwrap())).unwrap();
        let valid = if self.rng.gen_bool(0.3) { decoded } else { Expr::and_all([self.boolean(2), decoded]).unwrap() };
        let mut raw = RawModel::new(name, valid, fetch);
        raw.state = state.clone();
        raw.inputs = inputs;
        for (i, k) in codes[..n].iter().enumerate() {
            let decode = opcode.eq_to(&Expr::bv(w, *k).unwrap()).unwrap();
            let mut targets = state.clone();
            targets.shuffle(&mut self.rng);
            let m = self.rng.gen_range(0..=targets.len().min(3));
            let updates = targets[..m].iter().map(|v| (v.name().to_string(), self.update(v))).collect();
            raw.instructions.push(RawInstruction { name: format!("{}{i}", name.to_uppercase()), decode, updates });
        }
        for v in &state {
            let iv = match v.sort() {
                Sort::Array { .. } => InitValue::Unconstrained,
                s if self.rng.gen_bool(0.7) => InitValue::Value(Value::random(s, &mut self.rng)),
                _ => InitValue::Unconstrained,
            };
            raw.init.push((v.name().to_string(), iv));
        }
        raw
    }
}

/// A random model with at most 20 state and input bits, at most three
/// instructions per ILA and at most one child.
pub fn gen_model(seed: u64) -> IlaModel {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), scalars: Vec::new(), arrays: Vec::new(), funcs: Vec::new() };
    // redraw until the variables fit 18 bits, leaving room for a child's upc
    let (state, inputs) = loop {
        let ns = g.rng.gen_range(1..=4);
        let mut state: Vec<Var> = (0..ns).map(|i| Var::state(format!("s{i}"), Sort::bv(g.width()))).collect();
        if g.rng.gen() {
            state.push(Var::state("mem", Sort::array(g.rng.gen_range(1..=2), g.width())));
        }
        let ni = g.rng.gen_range(1..=2);
        let inputs: Vec<Var> = (0..ni).map(|i| Var::input(format!("in{i}"), Sort::bv(g.width()))).collect();
        if state.iter().chain(&inputs).map(|v| v.sort().bits()).sum::<u128>() <= 18 {
            break (state, inputs);
        }
    };
    if g.rng.gen() {
        let (w, w2) = (g.width(), g.width());
        g.funcs.push(FuncSym::new("f", vec![Sort::bv(w), Sort::bv(w2)], Sort::bv(w)).unwrap());
    }
    let mut root = g.ila("top", state.clone(), inputs.clone(), &inputs);
    root.funcs = g.funcs.clone();
    if g.rng.gen() {
        let scalar: Vec<Var> = state.iter().filter(|v| !matches!(v.sort(), Sort::Array { .. })).cloned().collect();
        let k = g.rng.gen_range(1..=scalar.len());
        let mut cstate: Vec<Var> = scalar[..k].to_vec();
        cstate.push(Var::state("upc", Sort::bv(2)));
        let fetch_from = cstate.clone();
        let mut child = g.ila("kid", cstate, Vec::new(), &fetch_from);
        for (n, iv) in &mut child.init {
            if let Some((_, p)) = root.init.iter().find(|(x, _)| x == n) {
                *iv = p.clone();
            }
        }
        let shared = scalar[..k].iter().map(|v| (v.name().to_string(), v.name().to_string())).collect();
        root.children.push(RawChild { micro: g.rng.gen(), model: child, shared });
    }
    build_model(root).unwrap_or_else(|e| panic!("seed {seed}: {e:?}"))
}

pub fn random_state(m: &Machine, rng: &mut ChaCha8Rng) -> Valuation {
    let mut v = Valuation::new();
    for (x, iv) in m.flat().state.iter().zip(&m.flat().init) {
        if matches!(iv, InitValue::Unconstrained) || rng.gen_bool(0.5) {
            v.insert(x.clone(), Value::random(x.sort(), rng));
        }
    }
    m.initial_state_with(&v)
}

pub fn random_inputs(m: &Machine, rng: &mut ChaCha8Rng) -> Valuation {
    m.inputs().iter().map(|x| (x.clone(), Value::random(x.sort(), rng))).collect()
}

trait App1 {
    fn app1(self, op: Op) -> Expr;
}

impl App1 for Expr {
    fn app1(self, op: Op) -> Expr {
        Expr::app(op, vec![self]).unwrap()
    }
}

/// serialize∘parse∘serialize = serialize, and the reparsed model lowers to
/// the same terms.
pub fn round_trips(m: &IlaModel) -> Result<(), String> {
    let text = serialize_model(m);
    let back = parse_model(&text).map_err(|d| format!("{d}\n{text}"))?;
    if serialize_model(&back) != text {
        return Err(format!("not a fixpoint:\n{text}"));
    }
    let (ta, tb) = (lower(m), lower(&back));
    if ta.vars != tb.vars || ta.next.iter().zip(&tb.next).any(|(x, y)| x.id() != y.id()) || ta.init.id() != tb.init.id() {
        return Err(format!("reparsed model lowers differently:\n{text}"));
    }
    Ok(())
}

/// Steps the interpreter and the lowered transition system side by side
/// from a random state on random inputs.
pub fn lowering_agrees(m: &IlaModel, seed: u64, steps: usize) -> Result<(), String> {
    let mach = Machine::new(m);
    let ts = lower(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let ufs = UfTable::new(seed);
    let mut s = random_state(&mach, &mut rng);
    for t in 0..steps {
        let i = random_inputs(&mach, &mut rng);
        let out = mach.step(&s, &i, &ufs).map_err(|e| format!("step {t}: {e}"))?;
        let labels = ts.labels_at(&s, &i, &ufs).map_err(|e| format!("step {t}: {e}"))?;
        let fired: Vec<&str> = labels.iter().filter(|(l, b)| *b && l.starts_with("fire:")).map(|(l, _)| &l[5..]).collect();
        let want: Vec<String> = out.fired.iter().map(|f| f.qualified()).collect();
        if fired != want {
            return Err(format!("step {t}: system fires {fired:?}, interpreter {want:?}"));
        }
        let stall = labels.iter().any(|(l, b)| l == "stall" && *b);
        if stall != out.fired.is_none() {
            return Err(format!("step {t}: stall label is {stall}"));
        }
        let next = ts.step(&s, &i, &ufs).map_err(|e| format!("step {t}: {e}"))?;
        if next != out.next {
            return Err(format!("step {t}: next states differ\n{next:?}\n{:?}", out.next));
        }
        s = out.next;
    }
    Ok(())
}

/// Printing the parsed forms and reading them back is a fixpoint.
pub fn sexp_stable(text: &str) -> Result<(), String> {
    let print = |forms: &[ila_core::sexp::Sexp]| forms.iter().map(|f| format!("{f}\n")).collect::<String>();
    let forms = ila_core::sexp::parse_all(text).map_err(|e| e.to_string())?;
    let printed = print(&forms);
    let again = ila_core::sexp::parse_all(&printed).map_err(|e| e.to_string())?;
    if again != forms || print(&again) != printed {
        return Err(format!("printing is not a fixpoint:\n{printed}"));
    }
    Ok(())
}
