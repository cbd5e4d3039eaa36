//! Tree-walking evaluator for the traceable subset.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::value::*;
use super::{Budget, EventKind, TraceEvent};
use crate::js::ast::*;
use crate::js::{number_to_string, parse_program, Program};
use crate::static_tracer::{hoisted_names, lexical_names};

const MAX_CALL_DEPTH: usize = 200;
const RNG_SEED: u64 = 0x5eed_cafe;
const CLOCK_CHECK_MASK: u64 = 0xfff;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abort {
    Steps,
    Loop,
    Clock,
}

#[derive(Debug)]
pub enum Ctrl {
    Throw(Value),
    Abort(Abort),
}

pub type R<T> = Result<T, Ctrl>;

enum Flow {
    Normal,
    Return(Value),
    Break(Option<String>),
    Continue(Option<String>),
}

enum Ref {
    Var(Rc<str>),
    Prop(Value, Rc<str>),
}

pub struct Protos {
    pub object: ObjId,
    pub function: ObjId,
    pub array: ObjId,
    pub string: ObjId,
    pub number: ObjId,
    pub error: ObjId,
    pub regexp: ObjId,
}

pub struct Interp<'b> {
    pub heap: Vec<Obj>,
    pub scopes: Vec<Scope>,
    pub budget: &'b Budget,
    pub protos: Protos,
    steps: u64,
    started: Instant,
    call_depth: usize,
    pub rng: ChaCha8Rng,
    global_mocks: HashMap<Rc<str>, ObjId>,
    // Log state.
    pub events: Vec<TraceEvent>,
    pub calls: BTreeMap<String, u32>,
    pub reads: BTreeMap<String, u32>,
    pub errors: Vec<String>,
    // Callback bookkeeping.
    queue: VecDeque<(ObjId, u32)>,
    current_depth: u32,
    defined: Vec<(usize, ObjId)>,
    defined_set: HashSet<usize>,
    invoked: HashSet<usize>,
}

pub const GLOBAL: ScopeId = 0;

fn fn_key(f: &Arc<Function>) -> usize {
    Arc::as_ptr(f) as usize
}

impl<'b> Interp<'b> {
    pub fn new(budget: &'b Budget) -> Self {
        let mut it = Interp {
            heap: Vec::new(),
            scopes: vec![Scope { vars: HashMap::new(), parent: None, this_val: None }],
            budget,
            protos: Protos { object: 0, function: 0, array: 0, string: 0, number: 0, error: 0, regexp: 0 },
            steps: 0,
            started: Instant::now(),
            call_depth: 0,
            rng: ChaCha8Rng::seed_from_u64(RNG_SEED),
            global_mocks: HashMap::new(),
            events: Vec::new(),
            calls: BTreeMap::new(),
            reads: BTreeMap::new(),
            errors: Vec::new(),
            queue: VecDeque::new(),
            current_depth: 0,
            defined: Vec::new(),
            defined_set: HashSet::new(),
            invoked: HashSet::new(),
        };
        it.install_builtins();
        let window = it.global_mock("window");
        it.scopes[GLOBAL].this_val = Some(window);
        it
    }

    // ---- heap helpers ----

    pub fn alloc(&mut self, kind: ObjKind, proto: Option<ObjId>) -> ObjId {
        self.heap.push(Obj::new(kind, proto));
        self.heap.len() - 1
    }

    pub fn new_object(&mut self) -> ObjId {
        let proto = self.protos.object;
        self.alloc(ObjKind::Plain, Some(proto))
    }

    pub fn new_array(&mut self, items: Vec<Value>) -> Value {
        let proto = self.protos.array;
        Value::Obj(self.alloc(ObjKind::Array(items), Some(proto)))
    }

    pub fn new_native(&mut self, name: &'static str) -> Value {
        let proto = self.protos.function;
        Value::Obj(self.alloc(ObjKind::Native(name), Some(proto)))
    }

    pub fn new_mock(&mut self, path: &str, api: bool) -> ObjId {
        let proto = self.protos.function;
        self.alloc(ObjKind::Mock { path: Rc::from(path), api, children: HashMap::new() }, Some(proto))
    }

    pub fn make_error(&mut self, name: &str, message: &str) -> Value {
        let proto = self.protos.error;
        let id = self.alloc(ObjKind::Plain, Some(proto));
        self.heap[id].props.insert(Rc::from("name"), Value::str(name));
        self.heap[id].props.insert(Rc::from("message"), Value::str(message));
        Value::Obj(id)
    }

    pub fn throw<T>(&mut self, name: &str, message: &str) -> R<T> {
        Err(Ctrl::Throw(self.make_error(name, message)))
    }

    fn global_mock(&mut self, name: &str) -> Value {
        if let Some(&id) = self.global_mocks.get(name) {
            return Value::Obj(id);
        }
        let api = crate::static_tracer::API_ROOTS.contains(&name);
        let path = if api { crate::static_tracer::normalize_api_path(name) } else { name.to_string() };
        let id = self.new_mock(&path, api);
        self.global_mocks.insert(Rc::from(name), id);
        Value::Obj(id)
    }

    // ---- budget ----

    pub fn reset_entry_budget(&mut self) {
        self.steps = 0;
    }

    pub fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.budget.max_steps {
            return Err(Ctrl::Abort(Abort::Steps));
        }
        if self.steps & CLOCK_CHECK_MASK == 0 && self.clock_expired() {
            return Err(Ctrl::Abort(Abort::Clock));
        }
        Ok(())
    }

    /// Charges `n` steps at once (used by natives that iterate).
    pub fn charge(&mut self, n: usize) -> R<()> {
        self.steps += n as u64;
        if self.steps > self.budget.max_steps {
            return Err(Ctrl::Abort(Abort::Steps));
        }
        if self.clock_expired() {
            return Err(Ctrl::Abort(Abort::Clock));
        }
        Ok(())
    }

    pub fn clock_expired(&self) -> bool {
        self.started.elapsed().as_millis() as u64 >= self.budget.wall_clock_ms
    }

    // ---- logging ----

    pub fn summarize(&self, v: &Value) -> String {
        match v {
            Value::Undefined => "undefined".into(),
            Value::Null => "null".into(),
            Value::Bool(b) => b.to_string(),
            Value::Num(n) => number_to_string(*n),
            Value::Str(s) => {
                let short: String = s.chars().take(64).collect();
                serde_json::to_string(&short).unwrap_or_default()
            }
            Value::Obj(id) => match &self.heap[*id].kind {
                ObjKind::Mock { path, .. } => format!("mock:{path}"),
                ObjKind::Array(_) => "array".into(),
                ObjKind::Closure { .. } | ObjKind::Native(_) | ObjKind::Bound { .. } => "function".into(),
                ObjKind::RegExp { .. } => "regexp".into(),
                ObjKind::Plain => "object".into(),
            },
        }
    }

    pub fn event(&mut self, kind: EventKind, path: &str, args: &[Value]) {
        let args = args.iter().map(|a| self.summarize(a)).collect();
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent { seq, kind, path: path.to_string(), args });
    }

    // ---- coercions ----

    pub fn truthy(&self, v: &Value) -> bool {
        match v {
            Value::Undefined | Value::Null => false,
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0 && !n.is_nan(),
            Value::Str(s) => !s.is_empty(),
            Value::Obj(_) => true,
        }
    }

    pub fn to_number(&mut self, v: &Value) -> R<f64> {
        Ok(match v {
            Value::Undefined => f64::NAN,
            Value::Null => 0.0,
            Value::Bool(b) => f64::from(u8::from(*b)),
            Value::Num(n) => *n,
            Value::Str(s) => string_to_number(s),
            Value::Obj(id) => match &self.heap[*id].kind {
                ObjKind::Mock { .. } => 1.0,
                ObjKind::Array(items) if items.is_empty() => 0.0,
                ObjKind::Array(items) if items.len() == 1 => {
                    let first = items[0].clone();
                    return self.to_number(&first);
                }
                _ => f64::NAN,
            },
        })
    }

    pub fn to_str(&mut self, v: &Value) -> R<Rc<str>> {
        Ok(match v {
            Value::Undefined => Rc::from("undefined"),
            Value::Null => Rc::from("null"),
            Value::Bool(b) => Rc::from(if *b { "true" } else { "false" }),
            Value::Num(n) => Rc::from(number_to_string(*n)),
            Value::Str(s) => s.clone(),
            Value::Obj(id) => {
                let id = *id;
                match &self.heap[id].kind {
                    ObjKind::Mock { path, .. } => path.clone(),
                    ObjKind::Array(items) => {
                        let items = items.clone();
                        self.charge(items.len())?;
                        let mut parts = Vec::with_capacity(items.len());
                        for it in &items {
                            parts.push(if it.is_nullish() { Rc::from("") } else { self.to_str(it)? });
                        }
                        Rc::from(parts.join(","))
                    }
                    ObjKind::Closure { .. } | ObjKind::Native(_) | ObjKind::Bound { .. } => {
                        Rc::from("function () { [native code] }")
                    }
                    ObjKind::RegExp { source, flags } => Rc::from(format!("/{source}/{flags}")),
                    ObjKind::Plain => {
                        if self.instance_of_proto(id, self.protos.error) {
                            let name = self.get_prop(v, "name", false)?;
                            let msg = self.get_prop(v, "message", false)?;
                            let (n, m) = (self.to_str(&name)?, self.to_str(&msg)?);
                            if m.is_empty() {
                                n
                            } else {
                                Rc::from(format!("{n}: {m}"))
                            }
                        } else {
                            Rc::from("[object Object]")
                        }
                    }
                }
            }
        })
    }

    pub fn type_of(&self, v: &Value) -> &'static str {
        match v {
            Value::Undefined => "undefined",
            Value::Null => "object",
            Value::Bool(_) => "boolean",
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::Obj(id) => {
                if self.heap[*id].is_callable() {
                    "function"
                } else {
                    "object"
                }
            }
        }
    }

    pub fn strict_equals(&self, a: &Value, b: &Value) -> bool {
        match (a, b) {
            (Value::Undefined, Value::Undefined) | (Value::Null, Value::Null) => true,
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (Value::Num(x), Value::Num(y)) => x == y,
            (Value::Str(x), Value::Str(y)) => x == y,
            (Value::Obj(x), Value::Obj(y)) => x == y,
            _ => false,
        }
    }

    fn loose_equals(&mut self, a: &Value, b: &Value) -> R<bool> {
        Ok(match (a, b) {
            (Value::Undefined | Value::Null, Value::Undefined | Value::Null) => true,
            (Value::Undefined | Value::Null, _) | (_, Value::Undefined | Value::Null) => false,
            (Value::Obj(_), Value::Obj(_)) => self.strict_equals(a, b),
            (Value::Str(_), Value::Str(_)) => self.strict_equals(a, b),
            (Value::Obj(_), Value::Str(s)) | (Value::Str(s), Value::Obj(_)) => {
                let o = if matches!(a, Value::Obj(_)) { a } else { b };
                *self.to_str(o)? == **s
            }
            _ => {
                let (x, y) = (self.to_number(a)?, self.to_number(b)?);
                x == y
            }
        })
    }

    fn instance_of_proto(&self, id: ObjId, proto: ObjId) -> bool {
        let mut cur = self.heap[id].proto;
        let mut guard = 0;
        while let Some(p) = cur {
            if p == proto {
                return true;
            }
            guard += 1;
            if guard > 10_000 {
                break;
            }
            cur = self.heap[p].proto;
        }
        false
    }

    // ---- properties ----

    pub fn array_index(key: &str) -> Option<usize> {
        if key.is_empty() || (key.len() > 1 && key.starts_with('0')) || !key.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        key.parse().ok()
    }

    fn lookup_proto_chain(&self, start: Option<ObjId>, key: &str) -> Option<Value> {
        let mut cur = start;
        let mut guard = 0;
        while let Some(id) = cur {
            if let Some(v) = self.heap[id].props.get(key) {
                return Some(v.clone());
            }
            guard += 1;
            if guard > 10_000 {
                break;
            }
            cur = self.heap[id].proto;
        }
        None
    }

    /// Property read. `is_callee` marks reads whose result is invoked directly.
    pub fn get_prop(&mut self, obj: &Value, key: &str, is_callee: bool) -> R<Value> {
        match obj {
            Value::Undefined | Value::Null => {
                let what = if matches!(obj, Value::Null) { "null" } else { "undefined" };
                self.throw("TypeError", &format!("Cannot read properties of {what} (reading '{key}')"))
            }
            Value::Bool(_) => Ok(self.lookup_proto_chain(Some(self.protos.object), key).unwrap_or(Value::Undefined)),
            Value::Num(_) => Ok(self.lookup_proto_chain(Some(self.protos.number), key).unwrap_or(Value::Undefined)),
            Value::Str(s) => {
                if key == "length" {
                    return Ok(Value::Num(s.encode_utf16().count() as f64));
                }
                if let Some(i) = Self::array_index(key) {
                    let units: Vec<u16> = s.encode_utf16().collect();
                    return Ok(units
                        .get(i)
                        .map(|u| Value::Str(Rc::from(String::from_utf16_lossy(&[*u]))))
                        .unwrap_or(Value::Undefined));
                }
                Ok(self.lookup_proto_chain(Some(self.protos.string), key).unwrap_or(Value::Undefined))
            }
            Value::Obj(id) => {
                let id = *id;
                if let Some(v) = self.heap[id].props.get(key) {
                    return Ok(v.clone());
                }
                match &self.heap[id].kind {
                    ObjKind::Array(items) => {
                        if key == "length" {
                            return Ok(Value::Num(items.len() as f64));
                        }
                        if let Some(i) = Self::array_index(key) {
                            return Ok(items.get(i).cloned().unwrap_or(Value::Undefined));
                        }
                    }
                    ObjKind::Mock { .. } => return Ok(self.mock_child(id, key, is_callee)),
                    ObjKind::Closure { func, .. } => match key {
                        "prototype" => {
                            let proto = self.new_object();
                            self.heap[proto].props.insert(Rc::from("constructor"), Value::Obj(id));
                            self.heap[id].props.insert(Rc::from("prototype"), Value::Obj(proto));
                            return Ok(Value::Obj(proto));
                        }
                        "name" => return Ok(Value::str(func.name.as_deref().unwrap_or(""))),
                        "length" => return Ok(Value::Num(func.params.len() as f64)),
                        _ => {}
                    },
                    ObjKind::RegExp { source, flags } => match key {
                        "source" => return Ok(Value::Str(source.clone())),
                        "flags" => return Ok(Value::Str(flags.clone())),
                        "global" => return Ok(Value::Bool(flags.contains('g'))),
                        _ => {}
                    },
                    _ => {}
                }
                let proto = self.heap[id].proto;
                Ok(self.lookup_proto_chain(proto, key).unwrap_or(Value::Undefined))
            }
        }
    }

    fn mock_child(&mut self, id: ObjId, key: &str, is_callee: bool) -> Value {
        let ObjKind::Mock { path, api, children } = &self.heap[id].kind else { unreachable!() };
        let (path, api) = (path.clone(), *api);
        let child = match children.get(key) {
            Some(&c) => c,
            None => {
                let c = self.new_mock(&format!("{path}.{key}"), api);
                if let ObjKind::Mock { children, .. } = &mut self.heap[id].kind {
                    children.insert(Rc::from(key), c);
                }
                c
            }
        };
        if api {
            let child_path = format!("{path}.{key}");
            self.event(EventKind::Get, &child_path, &[]);
            if &*path == "navigator" && !is_callee {
                *self.reads.entry(child_path).or_default() += 1;
            }
        }
        Value::Obj(child)
    }

    pub fn set_prop(&mut self, obj: &Value, key: Rc<str>, v: Value) -> R<()> {
        match obj {
            Value::Undefined | Value::Null => self.throw("TypeError", &format!("Cannot set properties of undefined (setting '{key}')")),
            Value::Obj(id) => {
                let id = *id;
                if let ObjKind::Array(items) = &mut self.heap[id].kind {
                    if let Some(i) = Self::array_index(&key) {
                        if i > items.len() + 1_000_000 {
                            return self.throw("RangeError", "Invalid array length");
                        }
                        if i >= items.len() {
                            items.resize(i + 1, Value::Undefined);
                        }
                        items[i] = v;
                        return Ok(());
                    }
                    if &*key == "length" {
                        let n = self.to_number(&v)?;
                        if n.is_finite() && (0.0..=1_000_000.0).contains(&n) {
                            if let ObjKind::Array(items) = &mut self.heap[id].kind {
                                items.resize(n as usize, Value::Undefined);
                            }
                            return Ok(());
                        }
                        return self.throw("RangeError", "Invalid array length");
                    }
                }
                self.heap[id].props.insert(key, v);
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn own_keys(&self, v: &Value) -> Vec<Rc<str>> {
        match v {
            Value::Str(s) => (0..s.encode_utf16().count()).map(|i| Rc::from(i.to_string())).collect(),
            Value::Obj(id) => {
                let obj = &self.heap[*id];
                let mut keys: Vec<Rc<str>> = match &obj.kind {
                    ObjKind::Array(items) => (0..items.len()).map(|i| Rc::from(i.to_string())).collect(),
                    _ => Vec::new(),
                };
                keys.extend(obj.props.keys());
                keys
            }
            _ => Vec::new(),
        }
    }

    /// Elements produced by spreading or `for...of`.
    pub fn iterate(&mut self, v: &Value) -> R<Vec<Value>> {
        match v {
            Value::Str(s) => Ok(s.chars().map(|c| Value::Str(Rc::from(c.to_string()))).collect()),
            Value::Obj(id) => match &self.heap[*id].kind {
                ObjKind::Array(items) => Ok(items.clone()),
                ObjKind::Mock { .. } => Ok(Vec::new()),
                _ => self.throw("TypeError", "object is not iterable"),
            },
            _ => self.throw("TypeError", "value is not iterable"),
        }
    }

    // ---- scopes ----

    fn new_scope(&mut self, parent: ScopeId, this_val: Option<Value>) -> ScopeId {
        self.scopes.push(Scope { vars: HashMap::new(), parent: Some(parent), this_val });
        self.scopes.len() - 1
    }

    fn declare(&mut self, scope: ScopeId, name: &str, v: Value) {
        self.scopes[scope].vars.insert(Rc::from(name), v);
    }

    fn find_var(&self, scope: ScopeId, name: &str) -> Option<ScopeId> {
        let mut cur = Some(scope);
        while let Some(s) = cur {
            if self.scopes[s].vars.contains_key(name) {
                return Some(s);
            }
            cur = self.scopes[s].parent;
        }
        None
    }

    fn lookup(&mut self, scope: ScopeId, name: &str) -> Value {
        if let Some(s) = self.find_var(scope, name) {
            return self.scopes[s].vars[name].clone();
        }
        let v = self.global_mock(name);
        if crate::static_tracer::API_ROOTS.contains(&name) {
            let path = crate::static_tracer::normalize_api_path(name);
            self.event(EventKind::Get, &path, &[]);
        }
        v
    }

    fn assign_var(&mut self, scope: ScopeId, name: &str, v: Value) {
        let target = self.find_var(scope, name).unwrap_or(GLOBAL);
        self.scopes[target].vars.insert(Rc::from(name), v);
    }

    fn this_value(&self, scope: ScopeId) -> Value {
        let mut cur = Some(scope);
        while let Some(s) = cur {
            if let Some(t) = &self.scopes[s].this_val {
                return t.clone();
            }
            cur = self.scopes[s].parent;
        }
        Value::Undefined
    }

    fn make_closure(&mut self, func: &Arc<Function>, env: ScopeId) -> Value {
        let proto = self.protos.function;
        let id = self.alloc(ObjKind::Closure { func: func.clone(), env }, Some(proto));
        let key = fn_key(func);
        if self.defined_set.insert(key) {
            self.defined.push((key, id));
        }
        Value::Obj(id)
    }

    /// Declares hoisted `var`s and function declarations of `body` in `scope`.
    fn hoist_function_scope(&mut self, body: &[Stmt], scope: ScopeId) {
        let mut names = HashSet::new();
        hoisted_names(body, &mut names);
        let mut names: Vec<String> = names.into_iter().collect();
        names.sort();
        for n in names {
            if !self.scopes[scope].vars.contains_key(n.as_str()) {
                // A top-level `var chrome` aliases the host global.
                let v = if scope == GLOBAL && crate::static_tracer::API_ROOTS.contains(&n.as_str()) {
                    self.global_mock(&n)
                } else {
                    Value::Undefined
                };
                self.declare(scope, &n, v);
            }
        }
        self.declare_block(body, scope);
    }

    /// Instantiates block-level lexical bindings and function declarations.
    fn declare_block(&mut self, body: &[Stmt], scope: ScopeId) {
        let mut names = HashSet::new();
        lexical_names(body, &mut names);
        let mut names: Vec<String> = names.into_iter().collect();
        names.sort();
        for n in names {
            if !self.scopes[scope].vars.contains_key(n.as_str()) {
                self.declare(scope, &n, Value::Undefined);
            }
        }
        for s in body {
            let decl = match &s.kind {
                StmtKind::FuncDecl(f) => Some(f),
                StmtKind::Export(ExportDecl::Decl(d)) => match &d.kind {
                    StmtKind::FuncDecl(f) => Some(f),
                    _ => None,
                },
                _ => None,
            };
            if let Some(f) = decl {
                let c = self.make_closure(f, scope);
                if let Some(name) = &f.name {
                    self.declare(scope, name, c);
                }
            }
        }
    }

    // ---- program entry ----

    /// Runs one program at global scope. Uncaught exceptions are recorded.
    pub fn run_program(&mut self, label: &str, program: &Program) -> R<()> {
        self.hoist_function_scope(&program.body, GLOBAL);
        match self.exec_list(&program.body, GLOBAL) {
            Ok(_) => Ok(()),
            Err(Ctrl::Throw(v)) => {
                let msg = self.describe_throw(&v);
                self.errors.push(format!("{label}: uncaught {msg}"));
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    pub fn describe_throw(&mut self, v: &Value) -> String {
        self.to_str(v).map(|s| s.to_string()).unwrap_or_else(|_| "exception".into())
    }

    fn synthetic_args(&mut self, label: &str, n: usize) -> Vec<Value> {
        (0..n.max(1)).map(|i| Value::Obj(self.new_mock(&format!("{label}.arg{i}"), false))).collect()
    }

    fn invoke_forced(&mut self, f: ObjId, label: &str, depth: u32) -> R<()> {
        let nparams = match &self.heap[f].kind {
            ObjKind::Closure { func, .. } => func.params.len(),
            _ => 1,
        };
        let args = self.synthetic_args(label, nparams);
        let this = Value::Obj(self.new_mock(&format!("{label}.this"), false));
        let saved = self.current_depth;
        self.current_depth = depth;
        let r = self.call_function(&Value::Obj(f), this, args);
        self.current_depth = saved;
        match r {
            Ok(_) => Ok(()),
            Err(Ctrl::Throw(v)) => {
                let msg = self.describe_throw(&v);
                self.errors.push(format!("{label}: uncaught {msg}"));
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Drains queued callbacks breadth-first, then invokes every function
    /// defined but never called, repeating until nothing new appears.
    pub fn drain_callbacks(&mut self, label: &str) -> R<()> {
        loop {
            while let Some((f, depth)) = self.queue.pop_front() {
                self.invoke_forced(f, &format!("{label}:callback"), depth)?;
            }
            let pending: Vec<ObjId> = self
                .defined
                .iter()
                .filter(|(k, _)| !self.invoked.contains(k))
                .map(|&(_, id)| id)
                .collect();
            if pending.is_empty() {
                return Ok(());
            }
            for id in pending {
                if let ObjKind::Closure { func, .. } = &self.heap[id].kind {
                    if self.invoked.contains(&fn_key(func)) {
                        continue;
                    }
                }
                self.invoke_forced(id, &format!("{label}:uncalled"), 1)?;
            }
        }
    }

    /// Forgets queued work after an aborted entrypoint.
    pub fn discard_pending(&mut self) {
        self.queue.clear();
        for (k, _) in std::mem::take(&mut self.defined) {
            self.invoked.insert(k);
        }
        self.current_depth = 0;
        self.call_depth = 0;
    }

    // ---- statements ----

    fn exec_list(&mut self, body: &[Stmt], scope: ScopeId) -> R<Flow> {
        for s in body {
            match self.exec(s, scope)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_block(&mut self, body: &[Stmt], scope: ScopeId) -> R<Flow> {
        let inner = self.new_scope(scope, None);
        self.declare_block(body, inner);
        self.exec_list(body, inner)
    }

    fn exec(&mut self, s: &Stmt, scope: ScopeId) -> R<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::VarDecl(d) => {
                self.exec_var(d, scope)?;
                Ok(Flow::Normal)
            }
            StmtKind::FuncDecl(_) | StmtKind::Empty | StmtKind::Import(_) => Ok(Flow::Normal),
            StmtKind::Block(b) => self.exec_block(b, scope),
            StmtKind::Expr(e) => {
                self.eval(e, scope)?;
                Ok(Flow::Normal)
            }
            StmtKind::If { test, cons, alt } => {
                let t = self.eval(test, scope)?;
                if self.truthy(&t) {
                    self.exec(cons, scope)
                } else if let Some(a) = alt {
                    self.exec(a, scope)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, scope)?,
                    None => Value::Undefined,
                };
                Ok(Flow::Return(v))
            }
            StmtKind::Break(l) => Ok(Flow::Break(l.clone())),
            StmtKind::Continue(l) => Ok(Flow::Continue(l.clone())),
            StmtKind::Throw(e) => {
                let v = self.eval(e, scope)?;
                Err(Ctrl::Throw(v))
            }
            StmtKind::Try { block, param, handler, finalizer } => {
                let mut result = self.exec_block(block, scope);
                if let (Err(Ctrl::Throw(v)), Some(h)) = (&result, handler) {
                    let v = v.clone();
                    let inner = self.new_scope(scope, None);
                    result = match param {
                        Some(p) => self.bind_pattern(p, v, inner, true).and_then(|_| self.exec_block(h, inner)),
                        None => self.exec_block(h, inner),
                    };
                }
                if let Some(f) = finalizer {
                    if matches!(result, Err(Ctrl::Abort(_))) {
                        return result;
                    }
                    match self.exec_block(f, scope)? {
                        Flow::Normal => {}
                        other => return Ok(other),
                    }
                }
                result
            }
            StmtKind::Switch { discriminant, cases } => {
                let d = self.eval(discriminant, scope)?;
                let inner = self.new_scope(scope, None);
                let all: Vec<Stmt> = cases.iter().flat_map(|c| c.body.iter().cloned()).collect();
                self.declare_block(&all, inner);
                let mut start = None;
                for (i, c) in cases.iter().enumerate() {
                    if let Some(t) = &c.test {
                        let tv = self.eval(t, inner)?;
                        if self.strict_equals(&d, &tv) {
                            start = Some(i);
                            break;
                        }
                    }
                }
                let start = start.or_else(|| cases.iter().position(|c| c.test.is_none()));
                if let Some(start) = start {
                    for c in &cases[start..] {
                        match self.exec_list(&c.body, inner)? {
                            Flow::Normal => {}
                            Flow::Break(None) => return Ok(Flow::Normal),
                            other => return Ok(other),
                        }
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Labeled(label, body) => match self.exec_loop(body, scope, Some(label))? {
                Flow::Break(Some(l)) if &l == label => Ok(Flow::Normal),
                other => Ok(other),
            },
            StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. } | StmtKind::ForIn { .. } => {
                self.exec_loop(s, scope, None)
            }
            StmtKind::Export(ExportDecl::Decl(d)) => self.exec(d, scope),
            StmtKind::Export(ExportDecl::Default(e)) => {
                self.eval(e, scope)?;
                Ok(Flow::Normal)
            }
            StmtKind::Export(_) => Ok(Flow::Normal),
        }
    }

    fn exec_var(&mut self, d: &VarDecl, scope: ScopeId) -> R<()> {
        for (pat, init) in &d.decls {
            let v = match init {
                Some(e) => self.eval(e, scope)?,
                None if d.kind == VarKind::Var => continue,
                None => Value::Undefined,
            };
            self.bind_pattern(pat, v, scope, d.kind != VarKind::Var)?;
        }
        Ok(())
    }

    /// Binds a pattern. `declare` creates bindings in `scope`; otherwise
    /// names are assigned through the scope chain (hoisted `var`s).
    fn bind_pattern(&mut self, p: &Pattern, v: Value, scope: ScopeId, declare: bool) -> R<()> {
        match p {
            Pattern::Ident(name) => {
                if declare {
                    self.declare(scope, name, v);
                } else {
                    self.assign_var(scope, name, v);
                }
            }
            Pattern::Default(inner, d) => {
                let v = if matches!(v, Value::Undefined) { self.eval(d, scope)? } else { v };
                self.bind_pattern(inner, v, scope, declare)?;
            }
            Pattern::Rest(inner) => self.bind_pattern(inner, v, scope, declare)?,
            Pattern::Array(items) => {
                let elems = self.iterate(&v)?;
                for (i, item) in items.iter().enumerate() {
                    let Some(item) = item else { continue };
                    if let Pattern::Rest(inner) = item {
                        let rest = self.new_array(elems.get(i..).map(<[Value]>::to_vec).unwrap_or_default());
                        self.bind_pattern(inner, rest, scope, declare)?;
                        break;
                    }
                    let ev = elems.get(i).cloned().unwrap_or(Value::Undefined);
                    self.bind_pattern(item, ev, scope, declare)?;
                }
            }
            Pattern::Object(props) => {
                if v.is_nullish() {
                    return self.throw("TypeError", "Cannot destructure undefined");
                }
                let mut used = Vec::new();
                for pp in props {
                    if let Pattern::Rest(inner) = &pp.value {
                        let rest = self.new_object();
                        for k in self.own_keys(&v) {
                            if !used.contains(&k) {
                                let pv = self.get_prop(&v, &k, false)?;
                                self.heap[rest].props.insert(k, pv);
                            }
                        }
                        self.bind_pattern(inner, Value::Obj(rest), scope, declare)?;
                        continue;
                    }
                    let key: Rc<str> = match &pp.key {
                        PropKey::Named(n) => Rc::from(n.as_str()),
                        PropKey::Computed(e) => {
                            let kv = self.eval(e, scope)?;
                            self.to_str(&kv)?
                        }
                    };
                    let pv = self.get_prop(&v, &key, false)?;
                    used.push(key);
                    self.bind_pattern(&pp.value, pv, scope, declare)?;
                }
            }
        }
        Ok(())
    }

    fn loop_tick(&mut self, iterations: &mut u64) -> R<()> {
        *iterations += 1;
        if *iterations > self.budget.max_loop_iterations {
            return Err(Ctrl::Abort(Abort::Loop));
        }
        Ok(())
    }

    /// Handles loop-body completion. `Some(flow)` exits the loop with `flow`.
    fn loop_body_flow(flow: Flow, label: Option<&String>) -> Option<Flow> {
        match flow {
            Flow::Normal | Flow::Continue(None) => None,
            Flow::Continue(Some(l)) if Some(&l) == label => None,
            Flow::Break(None) => Some(Flow::Normal),
            other => Some(other),
        }
    }

    fn exec_loop(&mut self, s: &Stmt, scope: ScopeId, label: Option<&String>) -> R<Flow> {
        let mut n = 0u64;
        match &s.kind {
            StmtKind::While { test, body } => loop {
                let t = self.eval(test, scope)?;
                if !self.truthy(&t) {
                    return Ok(Flow::Normal);
                }
                self.loop_tick(&mut n)?;
                let f = self.exec(body, scope)?;
                if let Some(out) = Self::loop_body_flow(f, label) {
                    return Ok(out);
                }
            },
            StmtKind::DoWhile { body, test } => loop {
                self.loop_tick(&mut n)?;
                let f = self.exec(body, scope)?;
                if let Some(out) = Self::loop_body_flow(f, label) {
                    return Ok(out);
                }
                let t = self.eval(test, scope)?;
                if !self.truthy(&t) {
                    return Ok(Flow::Normal);
                }
            },
            StmtKind::For { init, test, update, body } => {
                let inner = self.new_scope(scope, None);
                match init {
                    Some(ForInit::Var(d)) => self.exec_var(d, inner)?,
                    Some(ForInit::Expr(e)) => {
                        self.eval(e, inner)?;
                    }
                    None => {}
                }
                loop {
                    if let Some(t) = test {
                        let tv = self.eval(t, inner)?;
                        if !self.truthy(&tv) {
                            return Ok(Flow::Normal);
                        }
                    }
                    self.loop_tick(&mut n)?;
                    let f = self.exec(body, inner)?;
                    if let Some(out) = Self::loop_body_flow(f, label) {
                        return Ok(out);
                    }
                    if let Some(u) = update {
                        self.eval(u, inner)?;
                    }
                }
            }
            StmtKind::ForIn { left, right, body, of } => {
                let rv = self.eval(right, scope)?;
                let items: Vec<Value> = if *of {
                    self.iterate(&rv)?
                } else {
                    self.own_keys(&rv).into_iter().map(Value::Str).collect()
                };
                for item in items {
                    self.loop_tick(&mut n)?;
                    let inner = self.new_scope(scope, None);
                    match left {
                        ForHead::Var(kind, p) => self.bind_pattern(p, item, inner, *kind != VarKind::Var)?,
                        ForHead::Target(e) => {
                            let r = self.eval_ref(e, inner)?;
                            self.put_ref(&r, item, inner)?;
                        }
                    }
                    let f = self.exec(body, inner)?;
                    if let Some(out) = Self::loop_body_flow(f, label) {
                        return Ok(out);
                    }
                }
                Ok(Flow::Normal)
            }
            _ => self.exec(s, scope),
        }
    }

    // ---- expressions ----

    fn eval_ref(&mut self, e: &Expr, scope: ScopeId) -> R<Ref> {
        match &e.kind {
            ExprKind::Ident(n) => Ok(Ref::Var(Rc::from(n.as_str()))),
            ExprKind::Member { object, prop, .. } => {
                let o = self.eval(object, scope)?;
                let key = self.member_key(prop, scope)?;
                Ok(Ref::Prop(o, key))
            }
            _ => self.throw("SyntaxError", "Invalid assignment target"),
        }
    }

    fn get_ref(&mut self, r: &Ref, scope: ScopeId) -> R<Value> {
        match r {
            Ref::Var(n) => Ok(self.lookup(scope, n)),
            Ref::Prop(o, k) => self.get_prop(o, k, false),
        }
    }

    fn put_ref(&mut self, r: &Ref, v: Value, scope: ScopeId) -> R<()> {
        match r {
            Ref::Var(n) => {
                self.assign_var(scope, n, v);
                Ok(())
            }
            Ref::Prop(o, k) => self.set_prop(o, k.clone(), v),
        }
    }

    fn member_key(&mut self, prop: &MemberProp, scope: ScopeId) -> R<Rc<str>> {
        match prop {
            MemberProp::Named(n) => Ok(Rc::from(n.as_str())),
            MemberProp::Computed(e) => {
                let v = self.eval(e, scope)?;
                self.to_str(&v)
            }
        }
    }

    pub fn eval(&mut self, e: &Expr, scope: ScopeId) -> R<Value> {
        self.tick()?;
        match &e.kind {
            ExprKind::Ident(n) => Ok(match n.as_str() {
                "undefined" if self.find_var(scope, "undefined").is_none() => Value::Undefined,
                _ => self.lookup(scope, n),
            }),
            ExprKind::This => Ok(self.this_value(scope)),
            ExprKind::Lit(l) => Ok(match l {
                Literal::Str(s) => Value::str(s),
                Literal::Num(n) => Value::Num(*n),
                Literal::Bool(b) => Value::Bool(*b),
                Literal::Null => Value::Null,
                Literal::Regex { pattern, flags } => {
                    let proto = self.protos.regexp;
                    Value::Obj(self.alloc(
                        ObjKind::RegExp { source: Rc::from(pattern.as_str()), flags: Rc::from(flags.as_str()) },
                        Some(proto),
                    ))
                }
            }),
            ExprKind::Template { quasis, exprs } => {
                let mut out = String::new();
                for (i, q) in quasis.iter().enumerate() {
                    out.push_str(q);
                    if let Some(x) = exprs.get(i) {
                        let v = self.eval(x, scope)?;
                        out.push_str(&self.to_str(&v)?);
                    }
                }
                Ok(Value::str(&out))
            }
            ExprKind::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        None => out.push(Value::Undefined),
                        Some(Expr { kind: ExprKind::Spread(inner), .. }) => {
                            let v = self.eval(inner, scope)?;
                            out.extend(self.iterate(&v)?);
                        }
                        Some(x) => out.push(self.eval(x, scope)?),
                    }
                }
                Ok(self.new_array(out))
            }
            ExprKind::Object(props) => {
                let id = self.new_object();
                for p in props {
                    if p.kind == PropKind::Spread {
                        let src = self.eval(&p.value, scope)?;
                        for k in self.own_keys(&src) {
                            let v = self.get_prop(&src, &k, false)?;
                            self.heap[id].props.insert(k, v);
                        }
                        continue;
                    }
                    let key: Rc<str> = match &p.key {
                        PropKey::Named(n) => Rc::from(n.as_str()),
                        PropKey::Computed(k) => {
                            let kv = self.eval(k, scope)?;
                            self.to_str(&kv)?
                        }
                    };
                    let v = self.eval(&p.value, scope)?;
                    self.heap[id].props.insert(key, v);
                }
                Ok(Value::Obj(id))
            }
            ExprKind::Function(f) => {
                if !f.is_arrow {
                    if let Some(name) = &f.name {
                        // Named function expressions see their own name.
                        let inner = self.new_scope(scope, None);
                        let c = self.make_closure(f, inner);
                        self.declare(inner, name, c.clone());
                        return Ok(c);
                    }
                }
                Ok(self.make_closure(f, scope))
            }
            ExprKind::Unary(op, arg) => self.eval_unary(*op, arg, scope),
            ExprKind::Update { increment, prefix, arg } => {
                let r = self.eval_ref(arg, scope)?;
                let old = self.get_ref(&r, scope)?;
                let n = self.to_number(&old)?;
                let new = if *increment { n + 1.0 } else { n - 1.0 };
                self.put_ref(&r, Value::Num(new), scope)?;
                Ok(Value::Num(if *prefix { new } else { n }))
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval(l, scope)?;
                let b = self.eval(r, scope)?;
                self.binary(*op, &a, &b)
            }
            ExprKind::Logical(op, l, r) => {
                let a = self.eval(l, scope)?;
                let short = match op {
                    LogicalOp::And => !self.truthy(&a),
                    LogicalOp::Or => self.truthy(&a),
                    LogicalOp::Nullish => !a.is_nullish(),
                };
                if short {
                    Ok(a)
                } else {
                    self.eval(r, scope)
                }
            }
            ExprKind::Assign(op, target, rhs) => {
                let r = self.eval_ref(target, scope)?;
                let v = match op {
                    AssignOp::Assign => self.eval(rhs, scope)?,
                    AssignOp::Binary(b) => {
                        let old = self.get_ref(&r, scope)?;
                        let rv = self.eval(rhs, scope)?;
                        self.binary(*b, &old, &rv)?
                    }
                    AssignOp::Logical(l) => {
                        let old = self.get_ref(&r, scope)?;
                        let keep = match l {
                            LogicalOp::And => !self.truthy(&old),
                            LogicalOp::Or => self.truthy(&old),
                            LogicalOp::Nullish => !old.is_nullish(),
                        };
                        if keep {
                            return Ok(old);
                        }
                        self.eval(rhs, scope)?
                    }
                };
                self.put_ref(&r, v.clone(), scope)?;
                Ok(v)
            }
            ExprKind::Conditional(t, c, a) => {
                let tv = self.eval(t, scope)?;
                if self.truthy(&tv) {
                    self.eval(c, scope)
                } else {
                    self.eval(a, scope)
                }
            }
            ExprKind::Call { callee, args, optional } => self.eval_call(callee, args, *optional, scope),
            ExprKind::New { callee, args } => {
                let f = self.eval(callee, scope)?;
                let argv = self.eval_args(args, scope)?;
                self.construct(&f, argv)
            }
            ExprKind::Member { object, prop, optional } => {
                let o = self.eval(object, scope)?;
                if *optional && o.is_nullish() {
                    return Ok(Value::Undefined);
                }
                let key = self.member_key(prop, scope)?;
                self.get_prop(&o, &key, false)
            }
            ExprKind::Sequence(items) => {
                let mut last = Value::Undefined;
                for x in items {
                    last = self.eval(x, scope)?;
                }
                Ok(last)
            }
            ExprKind::Spread(inner) => self.eval(inner, scope),
        }
    }

    fn eval_unary(&mut self, op: UnaryOp, arg: &Expr, scope: ScopeId) -> R<Value> {
        match op {
            UnaryOp::Typeof => {
                if let ExprKind::Ident(n) = &arg.kind {
                    if self.find_var(scope, n).is_none() && n == "undefined" {
                        return Ok(Value::str("undefined"));
                    }
                }
                let v = self.eval(arg, scope)?;
                Ok(Value::str(self.type_of(&v)))
            }
            UnaryOp::Delete => {
                if let ExprKind::Member { object, prop, .. } = &arg.kind {
                    let o = self.eval(object, scope)?;
                    let key = self.member_key(prop, scope)?;
                    if let Value::Obj(id) = o {
                        self.heap[id].props.remove(&key);
                    }
                }
                Ok(Value::Bool(true))
            }
            _ => {
                let v = self.eval(arg, scope)?;
                Ok(match op {
                    UnaryOp::Not => Value::Bool(!self.truthy(&v)),
                    UnaryOp::Neg => Value::Num(-self.to_number(&v)?),
                    UnaryOp::Plus => Value::Num(self.to_number(&v)?),
                    UnaryOp::BitNot => Value::Num(f64::from(!to_int32(self.to_number(&v)?))),
                    UnaryOp::Void => Value::Undefined,
                    UnaryOp::Typeof | UnaryOp::Delete => unreachable!(),
                })
            }
        }
    }

    pub fn binary(&mut self, op: BinaryOp, a: &Value, b: &Value) -> R<Value> {
        use BinaryOp::*;
        let num = |it: &mut Self, f: fn(f64, f64) -> f64| -> R<Value> {
            let (x, y) = (it.to_number(a)?, it.to_number(b)?);
            Ok(Value::Num(f(x, y)))
        };
        let int = |it: &mut Self, f: fn(i32, u32) -> f64| -> R<Value> {
            let (x, y) = (it.to_number(a)?, it.to_number(b)?);
            Ok(Value::Num(f(to_int32(x), to_uint32(y))))
        };
        match op {
            Add => {
                let stringy = |v: &Value| matches!(v, Value::Str(_) | Value::Obj(_));
                if stringy(a) || stringy(b) {
                    let s = format!("{}{}", self.to_str(a)?, self.to_str(b)?);
                    if s.len() > 1 << 24 {
                        return self.throw("RangeError", "Invalid string length");
                    }
                    Ok(Value::str(&s))
                } else {
                    num(self, |x, y| x + y)
                }
            }
            Sub => num(self, |x, y| x - y),
            Mul => num(self, |x, y| x * y),
            Div => num(self, |x, y| x / y),
            Rem => num(self, |x, y| x % y),
            Exp => num(self, f64::powf),
            StrictEq => Ok(Value::Bool(self.strict_equals(a, b))),
            StrictNotEq => Ok(Value::Bool(!self.strict_equals(a, b))),
            Eq => Ok(Value::Bool(self.loose_equals(a, b)?)),
            NotEq => Ok(Value::Bool(!self.loose_equals(a, b)?)),
            Lt | Gt | LtEq | GtEq => {
                let ord = if let (Value::Str(x), Value::Str(y)) = (a, b) {
                    Some(x.cmp(y))
                } else {
                    let (x, y) = (self.to_number(a)?, self.to_number(b)?);
                    x.partial_cmp(&y)
                };
                use std::cmp::Ordering::*;
                Ok(Value::Bool(match (op, ord) {
                    (_, None) => false,
                    (Lt, Some(o)) => o == Less,
                    (Gt, Some(o)) => o == Greater,
                    (LtEq, Some(o)) => o != Greater,
                    (GtEq, Some(o)) => o != Less,
                    _ => unreachable!(),
                }))
            }
            Shl => int(self, |x, y| f64::from(x.wrapping_shl(y & 31))),
            Shr => int(self, |x, y| f64::from(x >> (y & 31))),
            UShr => int(self, |x, y| f64::from((x as u32) >> (y & 31))),
            BitAnd => int(self, |x, y| f64::from(x & y as i32)),
            BitOr => int(self, |x, y| f64::from(x | y as i32)),
            BitXor => int(self, |x, y| f64::from(x ^ y as i32)),
            In => {
                let key = self.to_str(a)?;
                Ok(Value::Bool(match b {
                    Value::Obj(id) => match &self.heap[*id].kind {
                        ObjKind::Mock { .. } => true,
                        ObjKind::Array(items) if Self::array_index(&key).is_some_and(|i| i < items.len()) || &*key == "length" => true,
                        _ => self.heap[*id].props.contains(&key) || self.lookup_proto_chain(self.heap[*id].proto, &key).is_some(),
                    },
                    _ => return self.throw("TypeError", "Cannot use 'in' operator on a primitive"),
                }))
            }
            InstanceOf => {
                let Value::Obj(ctor) = b else {
                    return self.throw("TypeError", "Right-hand side of 'instanceof' is not callable");
                };
                let Value::Obj(obj) = a else { return Ok(Value::Bool(false)) };
                let target = match &self.heap[*ctor].kind {
                    ObjKind::Native(name) => match *name {
                        "Array" => Some(self.protos.array),
                        "Object" => Some(self.protos.object),
                        "Function" => Some(self.protos.function),
                        "Error" | "TypeError" | "RangeError" | "SyntaxError" => Some(self.protos.error),
                        "RegExp" => Some(self.protos.regexp),
                        _ => None,
                    },
                    ObjKind::Closure { .. } => match self.get_prop(b, "prototype", false)? {
                        Value::Obj(p) => Some(p),
                        _ => None,
                    },
                    _ => None,
                };
                Ok(Value::Bool(target.is_some_and(|t| self.instance_of_proto(*obj, t))))
            }
        }
    }

    fn eval_args(&mut self, args: &[Expr], scope: ScopeId) -> R<Vec<Value>> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            if let ExprKind::Spread(inner) = &a.kind {
                let v = self.eval(inner, scope)?;
                out.extend(self.iterate(&v)?);
            } else {
                out.push(self.eval(a, scope)?);
            }
        }
        Ok(out)
    }

    fn eval_call(&mut self, callee: &Expr, args: &[Expr], optional: bool, scope: ScopeId) -> R<Value> {
        let (f, this) = match &callee.kind {
            ExprKind::Member { object, prop, optional: opt_member } => {
                let o = self.eval(object, scope)?;
                if *opt_member && o.is_nullish() {
                    return Ok(Value::Undefined);
                }
                let key = self.member_key(prop, scope)?;
                let f = self.get_prop(&o, &key, true)?;
                (f, o)
            }
            ExprKind::Ident(name) if name == "eval" && self.find_var(scope, "eval").is_none() => {
                let argv = self.eval_args(args, scope)?;
                return self.direct_eval(argv, scope);
            }
            _ => (self.eval(callee, scope)?, Value::Undefined),
        };
        if optional && f.is_nullish() {
            return Ok(Value::Undefined);
        }
        let argv = self.eval_args(args, scope)?;
        self.call_function(&f, this, argv)
    }

    /// `eval` of a runtime string in the given scope.
    pub fn direct_eval(&mut self, argv: Vec<Value>, scope: ScopeId) -> R<Value> {
        let Some(Value::Str(src)) = argv.first().cloned() else {
            let seq = self.events.len() as u64;
            let args = vec!["<unresolved>".to_string()];
            self.events.push(TraceEvent { seq, kind: EventKind::Eval, path: "eval".into(), args });
            return Ok(argv.into_iter().next().unwrap_or(Value::Undefined));
        };
        self.event(EventKind::Eval, "eval", &[Value::Str(src.clone())]);
        let outcome = parse_program(&src, false);
        for err in &outcome.errors {
            self.errors.push(format!("eval: {}", err.message));
        }
        let Some(program) = outcome.ast else {
            return self.throw("SyntaxError", "eval source could not be parsed");
        };
        let inner = self.new_scope(scope, None);
        self.hoist_function_scope(&program.body, inner);
        let mut last = Value::Undefined;
        for s in &program.body {
            if let StmtKind::Expr(e) = &s.kind {
                self.tick()?;
                last = self.eval(e, inner)?;
                continue;
            }
            match self.exec(s, inner)? {
                Flow::Normal => {}
                Flow::Return(v) => return Ok(v),
                _ => break,
            }
        }
        Ok(last)
    }

    /// `Function(a, b, body)`: compiled in the global scope.
    pub fn function_constructor(&mut self, argv: Vec<Value>) -> R<Value> {
        let mut parts = Vec::with_capacity(argv.len());
        for a in &argv {
            parts.push(self.to_str(a)?.to_string());
        }
        let body = parts.pop().unwrap_or_default();
        let src = format!("(function anonymous({}\n) {{\n{}\n}})", parts.join(","), body);
        self.event(EventKind::Eval, "Function", &[Value::str(&body)]);
        let outcome = parse_program(&src, false);
        let expr = outcome.ast.and_then(|p| match p.body.into_iter().next().map(|s| s.kind) {
            Some(StmtKind::Expr(e)) => Some(e),
            _ => None,
        });
        match expr {
            Some(e) => self.eval(&e, GLOBAL),
            None => self.throw("SyntaxError", "Function body could not be parsed"),
        }
    }

    /// Queues user functions passed (directly or one level inside an
    /// object/array) to a mock call.
    fn queue_callbacks(&mut self, args: &[Value]) {
        let depth = self.current_depth + 1;
        if depth > self.budget.max_callback_depth {
            return;
        }
        let is_user_fn = |it: &Self, v: &Value| match v {
            Value::Obj(id) => matches!(it.heap[*id].kind, ObjKind::Closure { .. } | ObjKind::Bound { .. }),
            _ => false,
        };
        for a in args {
            if is_user_fn(self, a) {
                self.queue.push_back((a.as_obj().unwrap(), depth));
                continue;
            }
            let Value::Obj(id) = a else { continue };
            let nested: Vec<Value> = match &self.heap[*id].kind {
                ObjKind::Array(items) => items.clone(),
                ObjKind::Plain => self.heap[*id].props.iter().map(|(_, v)| v.clone()).collect(),
                _ => Vec::new(),
            };
            for v in nested {
                if is_user_fn(self, &v) {
                    self.queue.push_back((v.as_obj().unwrap(), depth));
                }
            }
        }
    }

    fn call_mock(&mut self, id: ObjId, args: &[Value], kind: EventKind) -> Value {
        let ObjKind::Mock { path, api, .. } = &self.heap[id].kind else { unreachable!() };
        let (path, api) = (path.clone(), *api);
        if api {
            self.event(kind, &path, args);
            if kind == EventKind::Call && path.contains('.') {
                *self.calls.entry(path.to_string()).or_default() += 1;
            }
        }
        self.queue_callbacks(args);
        // Results are synthetic: they record nothing further.
        Value::Obj(self.new_mock(&path, false))
    }

    pub fn call_function(&mut self, f: &Value, this: Value, args: Vec<Value>) -> R<Value> {
        let Value::Obj(id) = f else {
            let s = self.summarize(f);
            return self.throw("TypeError", &format!("{s} is not a function"));
        };
        let id = *id;
        match self.heap[id].kind.clone() {
            ObjKind::Mock { .. } => Ok(self.call_mock(id, &args, EventKind::Call)),
            ObjKind::Native(name) => self.call_native(name, this, args),
            ObjKind::Bound { target, this, args: bound } => {
                let mut all = bound;
                all.extend(args);
                self.call_function(&Value::Obj(target), this, all)
            }
            ObjKind::Closure { func, env } => self.call_closure(&func, env, this, args),
            _ => {
                let s = self.summarize(f);
                self.throw("TypeError", &format!("{s} is not a function"))
            }
        }
    }

    fn call_closure(&mut self, func: &Arc<Function>, env: ScopeId, this: Value, args: Vec<Value>) -> R<Value> {
        if self.call_depth >= MAX_CALL_DEPTH {
            return self.throw("RangeError", "Maximum call stack size exceeded");
        }
        self.invoked.insert(fn_key(func));
        let scope = self.new_scope(env, if func.is_arrow { None } else { Some(this) });
        if !func.is_arrow {
            let arguments = self.new_array(args.clone());
            self.declare(scope, "arguments", arguments);
        }
        self.call_depth += 1;
        let r = self.run_closure_body(func, scope, args);
        self.call_depth -= 1;
        r
    }

    fn run_closure_body(&mut self, func: &Function, scope: ScopeId, args: Vec<Value>) -> R<Value> {
        for (i, p) in func.params.iter().enumerate() {
            let v = match p {
                Pattern::Rest(_) => self.new_array(args.get(i..).map(<[Value]>::to_vec).unwrap_or_default()),
                _ => args.get(i).cloned().unwrap_or(Value::Undefined),
            };
            self.bind_pattern(p, v, scope, true)?;
        }
        match &func.body {
            FuncBody::Expr(e) => self.eval(e, scope),
            FuncBody::Block(body) => {
                self.hoist_function_scope(body, scope);
                match self.exec_list(body, scope)? {
                    Flow::Return(v) => Ok(v),
                    _ => Ok(Value::Undefined),
                }
            }
        }
    }

    pub fn construct(&mut self, f: &Value, args: Vec<Value>) -> R<Value> {
        let Value::Obj(id) = f else {
            return self.throw("TypeError", "not a constructor");
        };
        match self.heap[*id].kind.clone() {
            ObjKind::Mock { .. } => Ok(self.call_mock(*id, &args, EventKind::Construct)),
            ObjKind::Native(name) => self.construct_native(name, args),
            ObjKind::Closure { func, env } => {
                let proto = match self.get_prop(f, "prototype", false)? {
                    Value::Obj(p) => p,
                    _ => self.protos.object,
                };
                let obj = Value::Obj(self.alloc(ObjKind::Plain, Some(proto)));
                let r = self.call_closure(&func, env, obj.clone(), args)?;
                Ok(if matches!(r, Value::Obj(_)) { r } else { obj })
            }
            ObjKind::Bound { target, args: bound, .. } => {
                let mut all = bound;
                all.extend(args);
                self.construct(&Value::Obj(target), all)
            }
            _ => self.throw("TypeError", "not a constructor"),
        }
    }
}
