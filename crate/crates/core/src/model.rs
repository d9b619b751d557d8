//! Hierarchical ILA models and their well-formedness rules.
//!
//! A model is assembled from a [`RawModel`] (plain data, names instead of
//! resolved variables) by [`build_model`], which reports every violation it
//! finds rather than stopping at the first.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::expr::{free_vars_all, funcs_all, Expr, FuncSym, Sort, Var, VarKind, OPCODE_NAME};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum InitValue {
    Unconstrained,
    Value(Value),
}

impl fmt::Display for InitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitValue::Unconstrained => f.write_str("unconstrained"),
            InitValue::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RawInstruction {
    pub name: String,
    pub decode: Expr,
    /// Target state variable name and its new value.
    pub updates: Vec<(String, Expr)>,
}

#[derive(Clone, Debug)]
pub struct RawChild {
    pub micro: bool,
    pub model: RawModel,
    /// (parent state name, child state name)
    pub shared: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct RawModel {
    pub name: String,
    pub state: Vec<Var>,
    pub inputs: Vec<Var>,
    pub funcs: Vec<FuncSym>,
    /// Variables without an entry start unconstrained.
    pub init: Vec<(String, InitValue)>,
    pub valid: Expr,
    pub fetch: Expr,
    pub instructions: Vec<RawInstruction>,
    pub children: Vec<RawChild>,
}

impl RawModel {
    pub fn new(name: impl Into<String>, valid: Expr, fetch: Expr) -> RawModel {
        RawModel {
            name: name.into(),
            state: Vec::new(),
            inputs: Vec::new(),
            funcs: Vec::new(),
            init: Vec::new(),
            valid,
            fetch,
            instructions: Vec::new(),
            children: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    name: String,
    decode: Expr,
    updates: Vec<(Var, Expr)>,
}

impl Instruction {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Predicate over the opcode variable only.
    pub fn decode(&self) -> &Expr {
        &self.decode
    }

    /// Updated variables in state declaration order; others keep their value.
    pub fn updates(&self) -> &[(Var, Expr)] {
        &self.updates
    }

    pub fn update_of(&self, v: &Var) -> Option<&Expr> {
        self.updates.iter().find(|(x, _)| x == v).map(|(_, e)| e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChildEntry {
    model: IlaModel,
    micro: bool,
    shared: Vec<(Var, Var)>,
}

impl ChildEntry {
    pub fn model(&self) -> &IlaModel {
        &self.model
    }

    pub fn is_micro(&self) -> bool {
        self.micro
    }

    /// (parent var, child var) identifications.
    pub fn shared(&self) -> &[(Var, Var)] {
        &self.shared
    }
}

/// A validated ILA ⟨S, I, W, V, F, D, N, C⟩. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IlaModel {
    name: String,
    state: Vec<Var>,
    inputs: Vec<Var>,
    funcs: Vec<FuncSym>,
    init: Vec<InitValue>,
    valid: Expr,
    fetch: Expr,
    opcode: Var,
    instructions: Vec<Instruction>,
    children: Vec<ChildEntry>,
}

impl IlaModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_vars(&self) -> &[Var] {
        &self.state
    }

    pub fn inputs(&self) -> &[Var] {
        &self.inputs
    }

    pub fn funcs(&self) -> &[FuncSym] {
        &self.funcs
    }

    pub fn init_of(&self, v: &Var) -> Option<&InitValue> {
        self.state.iter().position(|x| x == v).map(|i| &self.init[i])
    }

    pub fn init(&self) -> impl Iterator<Item = (&Var, &InitValue)> {
        self.state.iter().zip(self.init.iter())
    }

    pub fn valid(&self) -> &Expr {
        &self.valid
    }

    pub fn fetch(&self) -> &Expr {
        &self.fetch
    }

    pub fn fetch_width(&self) -> u32 {
        self.opcode.sort().bv_width().unwrap()
    }

    pub fn opcode_var(&self) -> &Var {
        &self.opcode
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn instruction(&self, name: &str) -> Option<&Instruction> {
        self.instructions.iter().find(|i| i.name == name)
    }

    pub fn children(&self) -> &[ChildEntry] {
        &self.children
    }

    pub fn state_var(&self, name: &str) -> Option<&Var> {
        self.state.iter().find(|v| v.name() == name)
    }

    pub fn input_var(&self, name: &str) -> Option<&Var> {
        self.inputs.iter().find(|v| v.name() == name)
    }

    /// The data this model was built from; `build_model(m.to_raw())` gives `m` back.
    pub fn to_raw(&self) -> RawModel {
        RawModel {
            name: self.name.clone(),
            state: self.state.clone(),
            inputs: self.inputs.clone(),
            funcs: self.funcs.clone(),
            init: self
                .init()
                .map(|(v, i)| (v.name().to_string(), i.clone()))
                .collect(),
            valid: self.valid.clone(),
            fetch: self.fetch.clone(),
            instructions: self
                .instructions
                .iter()
                .map(|i| RawInstruction {
                    name: i.name.clone(),
                    decode: i.decode.clone(),
                    updates: i.updates.iter().map(|(v, e)| (v.name().to_string(), e.clone())).collect(),
                })
                .collect(),
            children: self
                .children
                .iter()
                .map(|c| RawChild {
                    micro: c.micro,
                    model: c.model.to_raw(),
                    shared: c
                        .shared
                        .iter()
                        .map(|(p, q)| (p.name().to_string(), q.name().to_string()))
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Where in a model a validation error was found. `path` is the dot-joined
/// chain of ILA names from the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    Model { path: String },
    State { path: String, name: String },
    Input { path: String, name: String },
    Func { path: String, name: String },
    Init { path: String, name: String },
    Valid { path: String },
    Fetch { path: String },
    Instruction { path: String, instr: String },
    Decode { path: String, instr: String },
    Update { path: String, instr: String, var: String },
    Child { path: String, child: String },
    Share { path: String, child: String, parent_var: String },
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Model { path } => write!(f, "{path}"),
            Site::State { path, name } => write!(f, "{path}: state {name}"),
            Site::Input { path, name } => write!(f, "{path}: input {name}"),
            Site::Func { path, name } => write!(f, "{path}: function {name}"),
            Site::Init { path, name } => write!(f, "{path}: init of {name}"),
            Site::Valid { path } => write!(f, "{path}: valid"),
            Site::Fetch { path } => write!(f, "{path}: fetch"),
            Site::Instruction { path, instr } => write!(f, "{path}.{instr}"),
            Site::Decode { path, instr } => write!(f, "{path}.{instr}: decode"),
            Site::Update { path, instr, var } => write!(f, "{path}.{instr}: update of {var}"),
            Site::Child { path, child } => write!(f, "{path}: child {child}"),
            Site::Share { path, child, parent_var } => write!(f, "{path}: child {child} share {parent_var}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("{site}: undeclared variable `{name}`")]
    UndeclaredVariable { site: Site, name: String },
    #[error("{site}: {detail}")]
    SortError { site: Site, detail: String },
    #[error("{site}: duplicate name `{name}`")]
    DuplicateName { site: Site, name: String },
    #[error("{site}: a micro-ILA can only contain micro-ILAs")]
    HierarchyViolation { site: Site },
    #[error("{site}: shared variable `{child_var}` starts as {child} but parent `{parent_var}` starts as {parent}")]
    SharedInitMismatch { site: Site, parent_var: String, child_var: String, parent: String, child: String },
    #[error("{site}: decode may only read the opcode, found `{name}`")]
    DecodeReadsState { site: Site, name: String },
    #[error("{site}: child input `{name}` is not an input of the parent")]
    ChildInputNotInParent { site: Site, name: String },
    #[error("{site}: invalid identifier `{name}`")]
    BadIdentifier { site: Site, name: String },
}

impl ModelError {
    pub fn site(&self) -> &Site {
        match self {
            ModelError::UndeclaredVariable { site, .. }
            | ModelError::SortError { site, .. }
            | ModelError::DuplicateName { site, .. }
            | ModelError::HierarchyViolation { site }
            | ModelError::SharedInitMismatch { site, .. }
            | ModelError::DecodeReadsState { site, .. }
            | ModelError::ChildInputNotInParent { site, .. }
            | ModelError::BadIdentifier { site, .. } => site,
        }
    }
}

/// `[A-Za-z_][A-Za-z0-9_]*`, excluding the boolean literals. Keeping `.`,
/// `@` and `:` out of names lets the toolkit use them as path, time-step and
/// prefix separators without collisions.
pub fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "true"
        && s != "false"
}

struct Ctx {
    errors: Vec<ModelError>,
}

/// Validate and assemble a model.
pub fn build_model(raw: RawModel) -> Result<IlaModel, Vec<ModelError>> {
    let mut ctx = Ctx { errors: Vec::new() };
    let m = build_rec(&mut ctx, &raw, &raw.name, false, &[], &[]);
    if ctx.errors.is_empty() {
        Ok(m)
    } else {
        Err(ctx.errors)
    }
}

fn ident(ctx: &mut Ctx, site: Site, name: &str) {
    if !is_identifier(name) {
        ctx.errors.push(ModelError::BadIdentifier { site, name: name.to_string() });
    }
}

/// Check every variable and function in `roots` against the scope.
fn check_scope(
    ctx: &mut Ctx,
    site: &Site,
    roots: &[Expr],
    scope: &HashMap<&str, &Var>,
    funcs: &HashMap<String, FuncSym>,
) {
    for v in free_vars_all(roots) {
        match scope.get(v.name()) {
            Some(d) if **d == v => {}
            Some(d) => ctx.errors.push(ModelError::SortError {
                site: site.clone(),
                detail: format!("`{}` is declared as {} but used as {}", v.name(), d.sort(), v.sort()),
            }),
            None => ctx
                .errors
                .push(ModelError::UndeclaredVariable { site: site.clone(), name: v.name().to_string() }),
        }
    }
    for f in funcs_all(roots) {
        match funcs.get(f.name()) {
            Some(d) if *d == f => {}
            Some(_) => ctx.errors.push(ModelError::SortError {
                site: site.clone(),
                detail: format!("function `{}` used with a signature different from its declaration", f.name()),
            }),
            None => ctx
                .errors
                .push(ModelError::UndeclaredVariable { site: site.clone(), name: f.name().to_string() }),
        }
    }
}

fn expect_sort(ctx: &mut Ctx, site: &Site, what: &str, e: &Expr, want: Sort) {
    if e.sort() != want {
        ctx.errors.push(ModelError::SortError {
            site: site.clone(),
            detail: format!("{what} must have sort {want}, found {}", e.sort()),
        });
    }
}

fn build_rec(
    ctx: &mut Ctx,
    raw: &RawModel,
    path: &str,
    under_micro: bool,
    parent_inputs: &[Var],
    parent_funcs: &[FuncSym],
) -> IlaModel {
    let p = path.to_string();
    ident(ctx, Site::Model { path: p.clone() }, &raw.name);

    // declarations
    let mut names: HashSet<&str> = HashSet::new();
    for v in &raw.state {
        let site = Site::State { path: p.clone(), name: v.name().to_string() };
        ident(ctx, site.clone(), v.name());
        if v.kind() != VarKind::State {
            ctx.errors.push(ModelError::SortError { site: site.clone(), detail: "state variable has non-state kind".into() });
        }
        if let Err(e) = v.sort().check() {
            ctx.errors.push(ModelError::SortError { site: site.clone(), detail: e.to_string() });
        }
        if v.name() == OPCODE_NAME || !names.insert(v.name()) {
            ctx.errors.push(ModelError::DuplicateName { site, name: v.name().to_string() });
        }
    }
    for v in &raw.inputs {
        let site = Site::Input { path: p.clone(), name: v.name().to_string() };
        ident(ctx, site.clone(), v.name());
        if v.kind() != VarKind::Input {
            ctx.errors.push(ModelError::SortError { site: site.clone(), detail: "input variable has non-input kind".into() });
        }
        if let Err(e) = v.sort().check() {
            ctx.errors.push(ModelError::SortError { site: site.clone(), detail: e.to_string() });
        }
        if v.name() == OPCODE_NAME || !names.insert(v.name()) {
            ctx.errors.push(ModelError::DuplicateName { site: site.clone(), name: v.name().to_string() });
        }
        if path.contains('.') && !parent_inputs.contains(v) {
            ctx.errors.push(ModelError::ChildInputNotInParent { site, name: v.name().to_string() });
        }
    }
    let mut funcs: HashMap<String, FuncSym> = parent_funcs.iter().map(|f| (f.name().to_string(), f.clone())).collect();
    let mut own_funcs: HashSet<&str> = HashSet::new();
    for f in &raw.funcs {
        let site = Site::Func { path: p.clone(), name: f.name().to_string() };
        ident(ctx, site.clone(), f.name());
        if !own_funcs.insert(f.name()) {
            ctx.errors.push(ModelError::DuplicateName { site, name: f.name().to_string() });
            continue;
        }
        match funcs.get(f.name()) {
            Some(g) if g != f => ctx.errors.push(ModelError::SortError {
                site,
                detail: format!("function `{}` redeclared with a different signature", f.name()),
            }),
            _ => {
                funcs.insert(f.name().to_string(), f.clone());
            }
        }
    }

    let mut scope: HashMap<&str, &Var> = HashMap::new();
    for v in raw.state.iter().chain(raw.inputs.iter()) {
        scope.entry(v.name()).or_insert(v);
    }

    // init
    let mut init = vec![InitValue::Unconstrained; raw.state.len()];
    let mut seen_init: HashSet<&str> = HashSet::new();
    for (name, iv) in &raw.init {
        let site = Site::Init { path: p.clone(), name: name.clone() };
        if !seen_init.insert(name) {
            ctx.errors.push(ModelError::DuplicateName { site, name: name.clone() });
            continue;
        }
        match raw.state.iter().position(|v| v.name() == name) {
            None => ctx.errors.push(ModelError::UndeclaredVariable { site, name: name.clone() }),
            Some(i) => {
                if let InitValue::Value(val) = iv {
                    if matches!(val, Value::Array(_)) {
                        ctx.errors.push(ModelError::SortError {
                            site,
                            detail: "arrays have no literal values; leave them unconstrained".into(),
                        });
                        continue;
                    }
                    if val.sort() != raw.state[i].sort() {
                        ctx.errors.push(ModelError::SortError {
                            site,
                            detail: format!("initial value has sort {}, expected {}", val.sort(), raw.state[i].sort()),
                        });
                        continue;
                    }
                }
                init[i] = iv.clone();
            }
        }
    }

    // valid and fetch
    let vs = Site::Valid { path: p.clone() };
    check_scope(ctx, &vs, std::slice::from_ref(&raw.valid), &scope, &funcs);
    expect_sort(ctx, &vs, "valid", &raw.valid, Sort::Bool);
    let fs = Site::Fetch { path: p.clone() };
    check_scope(ctx, &fs, std::slice::from_ref(&raw.fetch), &scope, &funcs);
    let fetch_width = match raw.fetch.sort() {
        Sort::BitVec(w) => w,
        s => {
            ctx.errors.push(ModelError::SortError { site: fs, detail: format!("fetch must be a bitvector, found {s}") });
            1
        }
    };
    let opcode = Var::opcode(fetch_width);

    // instructions
    let mut instr_names: HashSet<&str> = HashSet::new();
    let mut instructions = Vec::new();
    for ins in &raw.instructions {
        let isite = Site::Instruction { path: p.clone(), instr: ins.name.clone() };
        ident(ctx, isite.clone(), &ins.name);
        if !instr_names.insert(&ins.name) {
            ctx.errors.push(ModelError::DuplicateName { site: isite, name: ins.name.clone() });
        }
        let ds = Site::Decode { path: p.clone(), instr: ins.name.clone() };
        expect_sort(ctx, &ds, "decode", &ins.decode, Sort::Bool);
        for v in free_vars_all(std::slice::from_ref(&ins.decode)) {
            if v.kind() == VarKind::Opcode && v.name() == OPCODE_NAME {
                if v != opcode {
                    ctx.errors.push(ModelError::SortError {
                        site: ds.clone(),
                        detail: format!("opcode has sort {} but fetch is {}", v.sort(), opcode.sort()),
                    });
                }
            } else {
                ctx.errors.push(ModelError::DecodeReadsState { site: ds.clone(), name: v.name().to_string() });
            }
        }
        for f in funcs_all(std::slice::from_ref(&ins.decode)) {
            if funcs.get(f.name()) != Some(&f) {
                ctx.errors.push(ModelError::UndeclaredVariable { site: ds.clone(), name: f.name().to_string() });
            }
        }

        let mut targets: HashMap<&str, Expr> = HashMap::new();
        for (name, e) in &ins.updates {
            let us = Site::Update { path: p.clone(), instr: ins.name.clone(), var: name.clone() };
            check_scope(ctx, &us, std::slice::from_ref(e), &scope, &funcs);
            match raw.state.iter().find(|v| v.name() == name) {
                None => ctx.errors.push(ModelError::UndeclaredVariable { site: us, name: name.clone() }),
                Some(v) => {
                    expect_sort(ctx, &us, "update", e, v.sort());
                    if targets.insert(name, e.clone()).is_some() {
                        ctx.errors.push(ModelError::DuplicateName { site: us, name: name.clone() });
                    }
                }
            }
        }
        let updates = raw
            .state
            .iter()
            .filter_map(|v| targets.get(v.name()).map(|e| (v.clone(), e.clone())))
            .collect();
        instructions.push(Instruction { name: ins.name.clone(), decode: ins.decode.clone(), updates });
    }

    // children
    let mut child_names: HashSet<&str> = HashSet::new();
    let mut children = Vec::new();
    let all_funcs: Vec<FuncSym> = {
        let mut v: Vec<FuncSym> = funcs.values().cloned().collect();
        v.sort();
        v
    };
    for c in &raw.children {
        let cname = c.model.name.clone();
        let csite = Site::Child { path: p.clone(), child: cname.clone() };
        if !child_names.insert(&c.model.name) {
            ctx.errors.push(ModelError::DuplicateName { site: csite.clone(), name: cname.clone() });
        }
        if under_micro && !c.micro {
            ctx.errors.push(ModelError::HierarchyViolation { site: csite.clone() });
        }
        let cpath = format!("{path}.{cname}");
        let model = build_rec(ctx, &c.model, &cpath, under_micro || c.micro, &raw.inputs, &all_funcs);
        let mut shared = Vec::new();
        let mut seen_p: HashSet<&str> = HashSet::new();
        let mut seen_c: HashSet<&str> = HashSet::new();
        for (pn, cn) in &c.shared {
            let ssite = Site::Share { path: p.clone(), child: cname.clone(), parent_var: pn.clone() };
            if !seen_p.insert(pn) {
                ctx.errors.push(ModelError::DuplicateName { site: ssite.clone(), name: pn.clone() });
            }
            if !seen_c.insert(cn) {
                ctx.errors.push(ModelError::DuplicateName { site: ssite.clone(), name: cn.clone() });
            }
            let pv = raw.state.iter().position(|v| v.name() == pn);
            let cv = model.state.iter().position(|v| v.name() == cn);
            match (pv, cv) {
                (None, _) => ctx.errors.push(ModelError::UndeclaredVariable { site: ssite, name: pn.clone() }),
                (_, None) => ctx.errors.push(ModelError::UndeclaredVariable { site: ssite, name: cn.clone() }),
                (Some(i), Some(j)) => {
                    let (a, b) = (&raw.state[i], &model.state[j]);
                    if a.sort() != b.sort() {
                        ctx.errors.push(ModelError::SortError {
                            site: ssite,
                            detail: format!("shared `{}` is {} but `{}` is {}", a.name(), a.sort(), b.name(), b.sort()),
                        });
                        continue;
                    }
                    if init[i] != model.init[j] {
                        ctx.errors.push(ModelError::SharedInitMismatch {
                            site: ssite,
                            parent_var: pn.clone(),
                            child_var: cn.clone(),
                            parent: init[i].to_string(),
                            child: model.init[j].to_string(),
                        });
                    }
                    shared.push((a.clone(), b.clone()));
                }
            }
        }
        children.push(ChildEntry { model, micro: c.micro, shared });
    }

    let mut own: Vec<FuncSym> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for f in &raw.funcs {
        if seen.insert(f.name()) {
            own.push(f.clone());
        }
    }

    IlaModel {
        name: raw.name.clone(),
        state: raw.state.clone(),
        inputs: raw.inputs.clone(),
        funcs: own,
        init,
        valid: raw.valid.clone(),
        fetch: raw.fetch.clone(),
        opcode,
        instructions,
        children,
    }
}

/// One node of the preorder hierarchy listing.
#[derive(Clone, Debug)]
pub struct HierarchyNode<'a> {
    pub path: String,
    pub model: &'a IlaModel,
    pub micro: bool,
    pub depth: usize,
    /// Index of the parent node in the listing.
    pub parent: Option<usize>,
    /// Index of this node's entry in its parent's child list.
    pub child_index: Option<usize>,
}

/// Preorder traversal with dot-joined paths starting at the root's name.
pub fn collect_hierarchy(m: &IlaModel) -> Vec<HierarchyNode<'_>> {
    let mut out = Vec::new();
    let mut stack: Vec<(&IlaModel, String, bool, usize, Option<usize>, Option<usize>)> =
        vec![(m, m.name.clone(), false, 0, None, None)];
    while let Some((model, path, micro, depth, parent, ci)) = stack.pop() {
        let me = out.len();
        for (k, c) in model.children.iter().enumerate().rev() {
            stack.push((&c.model, format!("{path}.{}", c.model.name), c.micro, depth + 1, Some(me), Some(k)));
        }
        out.push(HierarchyNode { path, model, micro, depth, parent, child_index: ci });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Op;

    fn leaf() -> RawModel {
        let x = Var::state("x", Sort::bv(4));
        let i = Var::input("i", Sort::bv(4));
        let mut m = RawModel::new("leaf", Expr::tt(), Expr::var(&i));
        m.state.push(x.clone());
        m.inputs.push(i.clone());
        m.init.push(("x".into(), InitValue::Value(Value::bv(4, 0))));
        let op = Expr::var(&Var::opcode(4));
        m.instructions.push(RawInstruction {
            name: "INC".into(),
            decode: op.eq_to(&Expr::bv(4, 1).unwrap()).unwrap(),
            updates: vec![("x".into(), Expr::bin(Op::BvAdd, &Expr::var(&x), &Expr::bv(4, 1).unwrap()).unwrap())],
        });
        m
    }

    #[test]
    fn accepts_leaf() {
        let m = build_model(leaf()).unwrap();
        assert_eq!(m.fetch_width(), 4);
        assert_eq!(collect_hierarchy(&m).len(), 1);
        assert_eq!(build_model(m.to_raw()).unwrap(), m);
    }

    #[test]
    fn reports_all_errors() {
        let mut r = leaf();
        r.instructions[0].updates.push(("y".into(), Expr::bv(4, 0).unwrap()));
        r.instructions.push(r.instructions[0].clone());
        let errs = build_model(r).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ModelError::UndeclaredVariable { name, .. } if name == "y")));
        assert!(errs.iter().any(|e| matches!(e, ModelError::DuplicateName { name, .. } if name == "INC")));
    }

    #[test]
    fn decode_must_not_read_state() {
        let mut r = leaf();
        let x = Var::state("x", Sort::bv(4));
        r.instructions[0].decode = Expr::var(&x).eq_to(&Expr::bv(4, 0).unwrap()).unwrap();
        let errs = build_model(r).unwrap_err();
        assert!(matches!(&errs[0], ModelError::DecodeReadsState { name, .. } if name == "x"));
    }

    #[test]
    fn micro_cannot_contain_sub() {
        let mut inner = leaf();
        inner.name = "inner".into();
        inner.inputs.clear();
        inner.fetch = Expr::var(&Var::state("x", Sort::bv(4)));
        let mut mid = inner.clone();
        mid.name = "mid".into();
        mid.children.push(RawChild { micro: false, model: inner, shared: vec![] });
        let mut top = leaf();
        top.children.push(RawChild { micro: true, model: mid, shared: vec![("x".into(), "x".into())] });
        let errs = build_model(top).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, ModelError::HierarchyViolation { .. })), "{errs:?}");
    }
}
