//! Interpreter values, heap objects and scopes.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use crate::js::ast::Function;

pub type ObjId = usize;
pub type ScopeId = usize;

#[derive(Debug, Clone)]
pub enum Value {
    Undefined,
    Null,
    Bool(bool),
    Num(f64),
    Str(Rc<str>),
    Obj(ObjId),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn as_obj(&self) -> Option<ObjId> {
        match self {
            Value::Obj(id) => Some(*id),
            _ => None,
        }
    }

    pub fn is_nullish(&self) -> bool {
        matches!(self, Value::Undefined | Value::Null)
    }
}

/// Insertion-ordered property map.
#[derive(Debug, Clone, Default)]
pub struct PropMap {
    keys: Vec<Rc<str>>,
    vals: Vec<Option<Value>>,
    index: HashMap<Rc<str>, usize>,
}

impl PropMap {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.index.get(key).and_then(|&i| self.vals[i].as_ref())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn insert(&mut self, key: Rc<str>, v: Value) {
        match self.index.get(&key) {
            Some(&i) => self.vals[i] = Some(v),
            None => {
                self.index.insert(key.clone(), self.keys.len());
                self.keys.push(key);
                self.vals.push(Some(v));
            }
        }
    }

    pub fn remove(&mut self, key: &str) -> bool {
        match self.index.remove(key) {
            Some(i) => {
                self.vals[i] = None;
                true
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Rc<str>, &Value)> {
        self.keys.iter().zip(&self.vals).filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
    }

    pub fn keys(&self) -> Vec<Rc<str>> {
        self.iter().map(|(k, _)| k.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub enum ObjKind {
    Plain,
    Array(Vec<Value>),
    Closure { func: Arc<Function>, env: ScopeId },
    Native(&'static str),
    Bound { target: ObjId, this: Value, args: Vec<Value> },
    /// Recording stand-in for anything the environment does not provide.
    Mock { path: Rc<str>, api: bool, children: HashMap<Rc<str>, ObjId> },
    RegExp { source: Rc<str>, flags: Rc<str> },
}

#[derive(Debug, Clone)]
pub struct Obj {
    pub kind: ObjKind,
    pub props: PropMap,
    pub proto: Option<ObjId>,
}

impl Obj {
    pub fn new(kind: ObjKind, proto: Option<ObjId>) -> Self {
        Obj { kind, props: PropMap::default(), proto }
    }

    pub fn is_callable(&self) -> bool {
        matches!(self.kind, ObjKind::Closure { .. } | ObjKind::Native(_) | ObjKind::Bound { .. } | ObjKind::Mock { .. })
    }
}

#[derive(Debug)]
pub struct Scope {
    pub vars: HashMap<Rc<str>, Value>,
    pub parent: Option<ScopeId>,
    /// Set on function scopes; arrows and blocks inherit from the parent.
    pub this_val: Option<Value>,
}

/// Parses a string the way `Number(s)` does.
pub fn string_to_number(s: &str) -> f64 {
    let t = s.trim_matches(|c: char| c.is_whitespace() || c == '\u{feff}');
    if t.is_empty() {
        return 0.0;
    }
    let radix = |p: &str, r: u32| u64::from_str_radix(p, r).map(|v| v as f64).unwrap_or(f64::NAN);
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        return radix(h, 16);
    }
    if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        return radix(b, 2);
    }
    if let Some(o) = t.strip_prefix("0o").or_else(|| t.strip_prefix("0O")) {
        return radix(o, 8);
    }
    match t {
        "Infinity" | "+Infinity" => return f64::INFINITY,
        "-Infinity" => return f64::NEG_INFINITY,
        _ => {}
    }
    if t.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-')) {
        t.parse().unwrap_or(f64::NAN)
    } else {
        f64::NAN
    }
}

/// `ToInt32`.
pub fn to_int32(n: f64) -> i32 {
    if !n.is_finite() {
        return 0;
    }
    let m = n.trunc().rem_euclid(4294967296.0);
    (m as u32) as i32
}

pub fn to_uint32(n: f64) -> u32 {
    to_int32(n) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_conversions() {
        assert_eq!(string_to_number(" 42 "), 42.0);
        assert_eq!(string_to_number(""), 0.0);
        assert_eq!(string_to_number("0x1f"), 31.0);
        assert!(string_to_number("inf").is_nan());
        assert!(string_to_number("12px").is_nan());
        assert_eq!(to_int32(4294967297.0), 1);
        assert_eq!(to_int32(-1.0), -1);
        assert_eq!(to_uint32(-1.0), u32::MAX);
    }

    #[test]
    fn prop_map_keeps_order_across_removal() {
        let mut m = PropMap::default();
        for k in ["b", "a", "c"] {
            m.insert(Rc::from(k), Value::Null);
        }
        m.remove("a");
        m.insert(Rc::from("a"), Value::Bool(true));
        let keys: Vec<String> = m.keys().iter().map(|k| k.to_string()).collect();
        assert_eq!(keys, ["b", "c", "a"]);
    }
}
