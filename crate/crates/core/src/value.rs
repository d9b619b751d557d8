//! Concrete values, valuations and executable interpretations of
//! uninterpreted functions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::bv;
use crate::expr::{FuncSym, Sort, Var};

/// Array contents as a default plus the addresses that differ from it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArrayValue {
    addr_width: u32,
    data_width: u32,
    default: u128,
    overrides: BTreeMap<u128, u128>,
}

impl ArrayValue {
    pub fn new(addr_width: u32, data_width: u32, default: u128) -> ArrayValue {
        ArrayValue { addr_width, data_width, default: default & bv::mask(data_width), overrides: BTreeMap::new() }
    }

    pub fn filled(sort: Sort, default: u128) -> Option<ArrayValue> {
        match sort {
            Sort::Array { addr, data } => Some(ArrayValue::new(addr, data, default)),
            _ => None,
        }
    }

    pub fn sort(&self) -> Sort {
        Sort::Array { addr: self.addr_width, data: self.data_width }
    }

    pub fn default_value(&self) -> u128 {
        self.default
    }

    pub fn overrides(&self) -> &BTreeMap<u128, u128> {
        &self.overrides
    }

    pub fn read(&self, addr: u128) -> u128 {
        *self.overrides.get(&addr).unwrap_or(&self.default)
    }

    pub fn write(&mut self, addr: u128, value: u128) {
        let addr = addr & bv::mask(self.addr_width);
        let value = value & bv::mask(self.data_width);
        if value == self.default {
            self.overrides.remove(&addr);
        } else {
            self.overrides.insert(addr, value);
        }
        self.canonicalize();
    }

    pub fn with(mut self, addr: u128, value: u128) -> ArrayValue {
        self.write(addr, value);
        self
    }

    fn capacity(&self) -> Option<u128> {
        if self.addr_width >= 64 {
            None
        } else {
            Some(1u128 << self.addr_width)
        }
    }

    // When every address is overridden the default is unobservable; pick the
    // value at address 0 so equal arrays have one representation.
    fn canonicalize(&mut self) {
        if Some(self.overrides.len() as u128) == self.capacity() {
            let d = self.overrides[&0];
            self.default = d;
            self.overrides.retain(|_, v| *v != d);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Bv { width: u32, bits: u128 },
    Array(ArrayValue),
}

impl Value {
    pub fn bv(width: u32, bits: u128) -> Value {
        Value::Bv { width, bits: bits & bv::mask(width) }
    }

    /// The all-zero (or `false`) value of a sort.
    pub fn zero(sort: Sort) -> Value {
        match sort {
            Sort::Bool => Value::Bool(false),
            Sort::BitVec(w) => Value::bv(w, 0),
            Sort::Array { addr, data } => Value::Array(ArrayValue::new(addr, data, 0)),
        }
    }

    /// Scalar payload: booleans map to 0/1.
    pub fn from_bits(sort: Sort, bits: u128) -> Value {
        match sort {
            Sort::Bool => Value::Bool(bits & 1 == 1),
            Sort::BitVec(w) => Value::bv(w, bits),
            Sort::Array { addr, data } => Value::Array(ArrayValue::new(addr, data, bits)),
        }
    }

    /// A uniformly drawn value; arrays of up to 8 address bits get every
    /// cell drawn, larger ones only their default.
    pub fn random<R: rand::Rng + ?Sized>(sort: Sort, rng: &mut R) -> Value {
        match sort {
            Sort::Bool => Value::Bool(rng.gen()),
            Sort::BitVec(w) => Value::bv(w, rng.gen()),
            Sort::Array { addr, data } => {
                let mut a = ArrayValue::new(addr, data, rng.gen::<u128>() & bv::mask(data));
                if addr <= 8 {
                    for i in 0..1u128 << addr {
                        a.write(i, rng.gen::<u128>() & bv::mask(data));
                    }
                }
                Value::Array(a)
            }
        }
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Bv { width, .. } => Sort::BitVec(*width),
            Value::Array(a) => a.sort(),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_bits(&self) -> Option<u128> {
        match self {
            Value::Bool(b) => Some(*b as u128),
            Value::Bv { bits, .. } => Some(*bits),
            Value::Array(_) => None,
        }
    }

    pub fn as_array(&self) -> Option<&ArrayValue> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }
}

/// Literal syntax shared by traces and reports.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Bv { width, bits } => write!(f, "(bv {width} {bits})"),
            Value::Array(a) => {
                write!(f, "(array {} {} {}", a.addr_width, a.data_width, a.default)?;
                for (k, v) in &a.overrides {
                    write!(f, " ({k} {v})")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Concrete assignment of values to variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    map: BTreeMap<Var, Value>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn insert(&mut self, var: Var, value: Value) {
        self.map.insert(var, value);
    }

    pub fn with(mut self, var: &Var, value: Value) -> Valuation {
        self.insert(var.clone(), value);
        self
    }

    pub fn get(&self, var: &Var) -> Option<&Value> {
        self.map.get(var)
    }

    pub fn get_by_name(&self, name: &str) -> Option<&Value> {
        self.map.iter().find(|(k, _)| k.name() == name).map(|(_, v)| v)
    }

    pub fn contains(&self, var: &Var) -> bool {
        self.map.contains_key(var)
    }

    pub fn remove(&mut self, var: &Var) -> Option<Value> {
        self.map.remove(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Value)> {
        self.map.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Union; entries of `other` win.
    pub fn merged(&self, other: &Valuation) -> Valuation {
        let mut out = self.clone();
        for (k, v) in &other.map {
            out.map.insert(k.clone(), v.clone());
        }
        out
    }

    /// Restriction to the given variables (missing ones are skipped).
    pub fn restricted<'a>(&self, vars: impl IntoIterator<Item = &'a Var>) -> Valuation {
        let mut out = Valuation::new();
        for v in vars {
            if let Some(x) = self.map.get(v) {
                out.map.insert(v.clone(), x.clone());
            }
        }
        out
    }
}

impl FromIterator<(Var, Value)> for Valuation {
    fn from_iter<T: IntoIterator<Item = (Var, Value)>>(iter: T) -> Self {
        Valuation { map: iter.into_iter().collect() }
    }
}

/// Executable interpretation of uninterpreted functions.
///
/// Explicit entries take priority; every other argument tuple gets a value
/// from a seeded hash, so a run is total and reproducible.
#[derive(Clone, Debug, Default)]
pub struct UfTable {
    seed: u64,
    explicit: HashMap<(FuncSym, Vec<u128>), u128>,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl UfTable {
    pub fn new(seed: u64) -> UfTable {
        UfTable { seed, explicit: HashMap::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set(&mut self, f: &FuncSym, args: Vec<u128>, result: u128) {
        self.explicit.insert((f.clone(), args), result);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&FuncSym, &[u128], u128)> {
        self.explicit.iter().map(|((f, a), r)| (f, a.as_slice(), *r))
    }

    /// Result bits of `f(args)`, masked to the result sort.
    pub fn apply(&self, f: &FuncSym, args: &[u128]) -> u128 {
        if let Some(r) = self.explicit.get(&(f.clone(), args.to_vec())) {
            return *r;
        }
        let mut h = mix(self.seed ^ 0x9e3779b97f4a7c15);
        for b in f.name().bytes() {
            h = mix(h ^ b as u64);
        }
        for a in args {
            h = mix(h ^ (*a as u64));
            h = mix(h ^ ((*a >> 64) as u64));
        }
        let wide = ((mix(h ^ 0x5555) as u128) << 64) | h as u128;
        match f.ret() {
            Sort::Bool => wide & 1,
            Sort::BitVec(w) => wide & bv::mask(w),
            Sort::Array { .. } => unreachable!("uninterpreted functions return scalars"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_canonical_form() {
        let mut a = ArrayValue::new(1, 4, 0);
        a.write(0, 3);
        a.write(1, 3);
        // both addresses overridden with the same value: collapses to a constant array
        assert_eq!(a, ArrayValue::new(1, 4, 3));
        let b = ArrayValue::new(4, 8, 0).with(2, 0);
        assert!(b.overrides().is_empty());
    }

    #[test]
    fn uf_is_functional_and_seeded() {
        let f = FuncSym::new("k", vec![Sort::BitVec(8)], Sort::BitVec(8)).unwrap();
        let t = UfTable::new(7);
        assert_eq!(t.apply(&f, &[3]), t.apply(&f, &[3]));
        let mut u = UfTable::new(7);
        u.set(&f, vec![3], 42);
        assert_eq!(u.apply(&f, &[3]), 42);
        assert!(t.apply(&f, &[200]) < 256);
    }
}
