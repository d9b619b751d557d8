//! Single-node model mutations: operator swaps, constant flips and deleted
//! updates in instruction semantics, plus decode overlaps. Used to measure
//! how many injected faults the checks catch.

use std::collections::HashMap;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{topo_order, ConstValue, Expr, ExprError, Kind, Op};
use crate::model::{build_model, IlaModel, ModelError, RawModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MutationKind {
    OperatorSwap,
    ConstantFlip,
    UpdateDeletion,
}

/// Where a mutation applies: an update of `var` by instruction `instr` of the
/// ILA at `path` (dot-joined names from the root).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mutation {
    pub kind: MutationKind,
    pub path: String,
    pub instr: String,
    pub var: String,
    /// Position of the mutated node in the update's post-order; unused for
    /// deletions.
    pub node: usize,
    pub description: String,
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} update of {}: {}", self.path, self.instr, self.var, self.description)
    }
}

fn swapped(op: &Op) -> Option<Op> {
    Some(match op {
        Op::BvAdd => Op::BvSub,
        Op::BvSub => Op::BvAdd,
        Op::BvAnd => Op::BvOr,
        Op::BvOr => Op::BvAnd,
        Op::BvXor => Op::BvOr,
        Op::Ult => Op::Ule,
        Op::Ule => Op::Ult,
        Op::Slt => Op::Sle,
        Op::Sle => Op::Slt,
        Op::Shl => Op::Lshr,
        Op::Lshr => Op::Shl,
        Op::And => Op::Or,
        Op::Or => Op::And,
        _ => return None,
    })
}

/// The replacement for node `n`, if it can be mutated in place.
fn mutated_node(n: &Expr) -> Result<Option<(MutationKind, Expr, String)>, ExprError> {
    Ok(match n.kind() {
        Kind::Bool(b) => Some((MutationKind::ConstantFlip, Expr::bool(!b), format!("{b} -> {}", !b))),
        Kind::Bv { width, value } => {
            let flipped = value ^ 1;
            Some((MutationKind::ConstantFlip, Expr::constant(n.sort(), ConstValue::Bv(flipped))?, format!("(bv {width} {value}) -> (bv {width} {flipped})")))
        }
        Kind::App(Op::Ite, a) if a[1].id() != a[2].id() => Some((
            MutationKind::OperatorSwap,
            Expr::ite(&a[0], &a[2], &a[1])?,
            "ite branches swapped".to_string(),
        )),
        Kind::App(op, a) => match swapped(op) {
            Some(o) => {
                let desc = format!("{} -> {}", op.name(), o.name());
                Some((MutationKind::OperatorSwap, Expr::app(o, a.to_vec())?, desc))
            }
            None => None,
        },
        Kind::Var(_) => None,
    })
}

/// `e` with the node of id `target` replaced by `by`.
fn replace_node(e: &Expr, target: u32, by: &Expr) -> Result<Expr, ExprError> {
    let mut memo: HashMap<u32, Expr> = HashMap::new();
    for n in topo_order(std::slice::from_ref(e)) {
        let r = if n.id() == target {
            by.clone()
        } else {
            match n.kind() {
                Kind::App(op, args) => {
                    let xs: Vec<Expr> = args.iter().map(|a| memo[&a.id()].clone()).collect();
                    if xs.iter().zip(args).all(|(x, a)| x.id() == a.id()) {
                        n.clone()
                    } else {
                        Expr::app(op.clone(), xs)?
                    }
                }
                _ => n.clone(),
            }
        };
        memo.insert(n.id(), r);
    }
    Ok(memo[&e.id()].clone())
}

fn walk<'a>(raw: &'a RawModel, path: String, out: &mut Vec<(String, &'a RawModel)>) {
    for c in &raw.children {
        walk(&c.model, format!("{path}.{}", c.model.name), out);
    }
    out.push((path, raw));
}

fn walk_mut<'a>(raw: &'a mut RawModel, path: &str, target: &str) -> Option<&'a mut RawModel> {
    if path == target {
        return Some(raw);
    }
    for c in &mut raw.children {
        let p = format!("{path}.{}", c.model.name);
        if target == p || target.starts_with(&format!("{p}.")) {
            return walk_mut(&mut c.model, &p, target);
        }
    }
    None
}

/// Every single-node mutation of `m`'s instruction updates, in a fixed order.
pub fn mutation_sites(m: &IlaModel) -> Result<Vec<Mutation>, ExprError> {
    let raw = m.to_raw();
    let mut ilas = Vec::new();
    walk(&raw, raw.name.clone(), &mut ilas);
    let mut out = Vec::new();
    for (path, r) in ilas {
        for ins in &r.instructions {
            for (var, e) in &ins.updates {
                let order = topo_order(std::slice::from_ref(e));
                for (k, n) in order.iter().enumerate() {
                    if let Some((kind, _, description)) = mutated_node(n)? {
                        out.push(Mutation { kind, path: path.clone(), instr: ins.name.clone(), var: var.clone(), node: k, description });
                    }
                }
                out.push(Mutation {
                    kind: MutationKind::UpdateDeletion,
                    path: path.clone(),
                    instr: ins.name.clone(),
                    var: var.clone(),
                    node: 0,
                    description: "update deleted".into(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum MutateError {
    #[error("no such mutation site: {0}")]
    NoSite(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("mutant does not validate: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Model(Vec<ModelError>),
}

/// Apply one mutation.
pub fn apply_mutation(m: &IlaModel, mu: &Mutation) -> Result<IlaModel, MutateError> {
    let mut raw = m.to_raw();
    let root = raw.name.clone();
    let missing = || MutateError::NoSite(mu.to_string());
    let ila = walk_mut(&mut raw, &root, &mu.path).ok_or_else(missing)?;
    let ins = ila.instructions.iter_mut().find(|i| i.name == mu.instr).ok_or_else(missing)?;
    let pos = ins.updates.iter().position(|(v, _)| *v == mu.var).ok_or_else(missing)?;
    if mu.kind == MutationKind::UpdateDeletion {
        ins.updates.remove(pos);
    } else {
        let e = ins.updates[pos].1.clone();
        let order = topo_order(std::slice::from_ref(&e));
        let n = order.get(mu.node).ok_or_else(missing)?;
        let (_, by, _) = mutated_node(n)?.ok_or_else(missing)?;
        ins.updates[pos].1 = replace_node(&e, n.id(), &by)?;
    }
    build_model(raw).map_err(MutateError::Model)
}

/// `n` distinct mutations of `m` chosen with `seed`, with their mutants.
pub fn seeded_mutations(m: &IlaModel, n: usize, seed: u64) -> Result<Vec<(Mutation, IlaModel)>, MutateError> {
    let sites = mutation_sites(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, sites.len(), n.min(sites.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| Ok((sites[i].clone(), apply_mutation(m, &sites[i])?))).collect()
}

/// `n` mutants of `m` in which one instruction's decode is widened to also
/// accept a seeded opcode value belonging to another instruction of the
/// same ILA, so that the two overlap. Each comes with the injected opcode.
pub fn decode_overlap_mutants(m: &IlaModel, n: usize, seed: u64) -> Result<Vec<(String, u128, IlaModel)>, MutateError> {
    let raw = m.to_raw();
    let mut ilas = Vec::new();
    walk(&raw, raw.name.clone(), &mut ilas);
    // (path, victim, donor) with the donor having a concrete opcode
    let mut cands: Vec<(String, usize, u128, usize)> = Vec::new();
    for (path, r) in &ilas {
        let Some(w) = r.fetch.sort().bv_width() else { continue };
        let opcode = crate::expr::Var::opcode(w);
        for (d, donor) in r.instructions.iter().enumerate() {
            let Some(op) = first_accepted(&donor.decode, &opcode, w) else { continue };
            for v in 0..r.instructions.len() {
                if v != d {
                    cands.push((path.clone(), v, op, d));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, cands.len(), n.min(cands.len())).into_vec();
    picked.sort_unstable();
    let mut out = Vec::new();
    for i in picked {
        let (path, v, op, d) = &cands[i];
        let mut raw = m.to_raw();
        let root = raw.name.clone();
        let ila = walk_mut(&mut raw, &root, path).ok_or_else(|| MutateError::NoSite(path.clone()))?;
        let w = ila.fetch.sort().bv_width().unwrap();
        let opcode = Expr::var(&crate::expr::Var::opcode(w));
        let hit = opcode.eq_to(&Expr::bv(w, *op)?)?;
        let desc = format!("{path}.{} also decodes opcode {op} of {}", ila.instructions[*v].name, ila.instructions[*d].name);
        let victim = &mut ila.instructions[*v];
        victim.decode = Expr::or_all([victim.decode.clone(), hit])?;
        out.push((desc, *op, build_model(raw).map_err(MutateError::Model)?));
    }
    Ok(out)
}

/// Least opcode value accepted by `decode`, by enumeration (widths ≤ 20).
fn first_accepted(decode: &Expr, opcode: &crate::expr::Var, w: u32) -> Option<u128> {
    if w > 20 {
        return None;
    }
    let ufs = crate::value::UfTable::new(0);
    (0..1u128 << w).find(|x| {
        let env = crate::value::Valuation::new().with(opcode, crate::value::Value::bv(w, *x));
        matches!(crate::eval::eval(decode, &env, &ufs), Ok(crate::value::Value::Bool(true)))
    })
}
