//! Flattening of a hierarchical model into one global namespace.
//!
//! The root's variables keep their names. A child's private state variable
//! `v` at path `Root.a.b` becomes `a.b.v`; shared variables resolve to the
//! ancestor variable they are identified with, and child inputs are the
//! root's inputs of the same name. Every valid, fetch, decode and update is
//! rewritten over these canonical variables, and each decode has the fetch
//! function of its ILA already inlined for the opcode.

use std::collections::HashMap;

use crate::expr::{substitute, Expr, ExprError, FuncSym, Var};
use crate::model::{collect_hierarchy, IlaModel, InitValue};

#[derive(Clone, Debug)]
pub struct FlatInstr {
    pub name: String,
    /// `<path>.<name>`
    pub qualified: String,
    /// Decode with the ILA's fetch substituted for the opcode.
    pub decode: Expr,
    pub updates: Vec<(Var, Expr)>,
}

#[derive(Clone, Debug)]
pub struct FlatNode {
    pub path: String,
    pub depth: usize,
    pub parent: Option<usize>,
    pub micro: bool,
    pub valid: Expr,
    pub fetch: Expr,
    pub instrs: Vec<FlatInstr>,
    /// Local variable name to its canonical variable (state and inputs).
    pub scope: Vec<(String, Var)>,
}

#[derive(Clone, Debug)]
pub struct FlatIla {
    pub name: String,
    pub state: Vec<Var>,
    pub init: Vec<InitValue>,
    pub inputs: Vec<Var>,
    pub funcs: Vec<FuncSym>,
    /// Preorder; node 0 is the root.
    pub nodes: Vec<FlatNode>,
}

impl FlatIla {
    pub fn has_children(&self) -> bool {
        self.nodes.len() > 1
    }

    pub fn node(&self, path: &str) -> Option<&FlatNode> {
        self.nodes.iter().find(|n| n.path == path)
    }

    pub fn state_var(&self, name: &str) -> Option<&Var> {
        self.state.iter().find(|v| v.name() == name)
    }

    pub fn input_var(&self, name: &str) -> Option<&Var> {
        self.inputs.iter().find(|v| v.name() == name)
    }

    /// Instruction by qualified name (`Root.child.INSTR`).
    pub fn instr(&self, qualified: &str) -> Option<(usize, &FlatInstr)> {
        self.nodes
            .iter()
            .enumerate()
            .find_map(|(k, n)| n.instrs.iter().find(|i| i.qualified == qualified).map(|i| (k, i)))
    }

    /// Nodes strictly below `k` in the hierarchy.
    pub fn descendants(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for j in k + 1..self.nodes.len() {
            let mut p = self.nodes[j].parent;
            while let Some(q) = p {
                if q == k {
                    out.push(j);
                    break;
                }
                p = self.nodes[q].parent;
            }
        }
        out
    }

    /// Nodes that win over node `k` when both are active: deeper nodes, and
    /// nodes at the same depth earlier in preorder.
    pub fn preempting(&self, k: usize) -> Vec<usize> {
        let d = self.nodes[k].depth;
        (1..self.nodes.len())
            .filter(|&j| j != k && (self.nodes[j].depth > d || (self.nodes[j].depth == d && j < k)))
            .collect()
    }
}

/// Canonical name of a child's private state variable.
pub fn qualified_state_name(path: &str, var: &str) -> String {
    match path.split_once('.') {
        Some((_, rest)) => format!("{rest}.{var}"),
        None => var.to_string(),
    }
}

pub fn flatten(m: &IlaModel) -> Result<FlatIla, ExprError> {
    let nodes = collect_hierarchy(m);
    let mut state: Vec<Var> = Vec::new();
    let mut init: Vec<InitValue> = Vec::new();
    let mut funcs: Vec<FuncSym> = Vec::new();
    let mut maps: Vec<HashMap<Var, Expr>> = Vec::with_capacity(nodes.len());
    let mut out = Vec::with_capacity(nodes.len());

    for n in &nodes {
        let model = n.model;
        let mut map: HashMap<Var, Expr> = HashMap::new();
        let mut scope: Vec<(String, Var)> = Vec::new();
        let shared: Vec<(Var, Var)> = match (n.parent, n.child_index) {
            (Some(p), Some(ci)) => nodes[p].model.children()[ci].shared().to_vec(),
            _ => Vec::new(),
        };
        for (v, iv) in model.init() {
            let canon = match (n.parent, shared.iter().find(|(_, c)| c == v)) {
                (Some(p), Some((pv, _))) => maps[p][pv].as_var().unwrap().clone(),
                _ => {
                    let c = v.renamed(qualified_state_name(&n.path, v.name()));
                    state.push(c.clone());
                    init.push(iv.clone());
                    c
                }
            };
            scope.push((v.name().to_string(), canon.clone()));
            map.insert(v.clone(), Expr::var(&canon));
        }
        for v in model.inputs() {
            scope.push((v.name().to_string(), v.clone()));
        }
        for f in model.funcs() {
            if !funcs.contains(f) {
                funcs.push(f.clone());
            }
        }
        let valid = substitute(model.valid(), &map)?;
        let fetch = substitute(model.fetch(), &map)?;
        let op_map: HashMap<Var, Expr> = [(model.opcode_var().clone(), fetch.clone())].into_iter().collect();
        let mut instrs = Vec::new();
        for ins in model.instructions() {
            let mut updates = Vec::new();
            for (v, e) in ins.updates() {
                let target = map[v].as_var().unwrap().clone();
                updates.push((target, substitute(e, &map)?));
            }
            instrs.push(FlatInstr {
                name: ins.name().to_string(),
                qualified: format!("{}.{}", n.path, ins.name()),
                decode: substitute(ins.decode(), &op_map)?,
                updates,
            });
        }
        out.push(FlatNode {
            path: n.path.clone(),
            depth: n.depth,
            parent: n.parent,
            micro: n.micro,
            valid,
            fetch,
            instrs,
            scope,
        });
        maps.push(map);
    }
    Ok(FlatIla { name: m.name().to_string(), state, init, inputs: m.inputs().to_vec(), funcs, nodes: out })
}
