//! Standard library subset provided for real inside the sandbox.

use std::rc::Rc;

use base64::Engine;
use rand::Rng;

use super::interp::{Interp, Protos, GLOBAL, R};
use super::value::*;
use crate::js::number_to_string;

const OBJECT_STATICS: &[&str] = &[
    "Object.keys", "Object.values", "Object.entries", "Object.assign", "Object.create", "Object.freeze",
    "Object.seal", "Object.preventExtensions", "Object.defineProperty", "Object.defineProperties",
    "Object.getPrototypeOf", "Object.setPrototypeOf", "Object.getOwnPropertyNames", "Object.fromEntries",
    "Object.is",
];
const OBJECT_PROTO: &[&str] = &["Object#hasOwnProperty", "Object#toString", "Object#valueOf", "Object#isPrototypeOf"];
const FUNCTION_PROTO: &[&str] = &["Function#call", "Function#apply", "Function#bind", "Function#toString"];
const ARRAY_STATICS: &[&str] = &["Array.isArray", "Array.from", "Array.of"];
const ARRAY_PROTO: &[&str] = &[
    "Array#push", "Array#pop", "Array#shift", "Array#unshift", "Array#slice", "Array#splice", "Array#concat",
    "Array#join", "Array#indexOf", "Array#lastIndexOf", "Array#includes", "Array#forEach", "Array#map",
    "Array#filter", "Array#reduce", "Array#reduceRight", "Array#some", "Array#every", "Array#find",
    "Array#findIndex", "Array#reverse", "Array#sort", "Array#fill", "Array#flat", "Array#toString",
];
const STRING_STATICS: &[&str] = &["String.fromCharCode"];
const STRING_PROTO: &[&str] = &[
    "String#charAt", "String#charCodeAt", "String#codePointAt", "String#indexOf", "String#lastIndexOf",
    "String#includes", "String#startsWith", "String#endsWith", "String#slice", "String#substring",
    "String#substr", "String#toLowerCase", "String#toUpperCase", "String#toLocaleLowerCase",
    "String#toLocaleUpperCase", "String#trim", "String#trimStart", "String#trimEnd", "String#split",
    "String#replace", "String#replaceAll", "String#concat", "String#repeat", "String#padStart",
    "String#padEnd", "String#match", "String#search", "String#toString", "String#valueOf",
    "String#localeCompare",
];
const NUMBER_STATICS: &[&str] = &["Number.isInteger", "Number.isFinite", "Number.isNaN", "Number.parseInt", "Number.parseFloat"];
const NUMBER_PROTO: &[&str] = &["Number#toString", "Number#toFixed", "Number#valueOf"];
const REGEXP_PROTO: &[&str] = &["RegExp#test", "RegExp#exec"];
const MATH: &[&str] = &[
    "Math.floor", "Math.ceil", "Math.round", "Math.abs", "Math.max", "Math.min", "Math.pow", "Math.sqrt",
    "Math.cbrt", "Math.trunc", "Math.sign", "Math.log", "Math.log2", "Math.log10", "Math.exp", "Math.sin",
    "Math.cos", "Math.tan", "Math.atan", "Math.atan2", "Math.random",
];
const JSON_FNS: &[&str] = &["JSON.parse", "JSON.stringify"];
const GLOBAL_FNS: &[&str] = &[
    "parseInt", "parseFloat", "isNaN", "isFinite", "encodeURIComponent", "decodeURIComponent", "encodeURI",
    "decodeURI", "atob", "btoa", "eval",
];
const ERROR_CTORS: &[&str] = &["Error", "TypeError", "RangeError", "SyntaxError", "ReferenceError", "URIError"];

const MAX_STRING: usize = 1 << 24;
const MAX_JSON_DEPTH: usize = 100;

fn method_key(name: &'static str) -> &'static str {
    name.rsplit(['#', '.']).next().unwrap_or(name)
}

fn arg(args: &[Value], i: usize) -> Value {
    args.get(i).cloned().unwrap_or(Value::Undefined)
}

fn utf16(s: &str) -> Vec<u16> {
    s.encode_utf16().collect()
}

fn from_utf16(units: &[u16]) -> Value {
    Value::Str(Rc::from(String::from_utf16_lossy(units)))
}

/// Resolves a relative index the way `slice` does.
fn rel_index(n: f64, len: usize) -> usize {
    if n.is_nan() {
        return 0;
    }
    let n = n.trunc();
    if n < 0.0 {
        (len as f64 + n).max(0.0) as usize
    } else {
        n.min(len as f64) as usize
    }
}

fn find_sub(hay: &[u16], needle: &[u16], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return Some(from.min(hay.len()));
    }
    (from..hay.len().saturating_sub(needle.len() - 1)).find(|&i| &hay[i..i + needle.len()] == needle)
}

fn rfind_sub(hay: &[u16], needle: &[u16]) -> Option<usize> {
    if needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).rev().find(|&i| &hay[i..i + needle.len()] == needle)
}

fn radix_string(mut n: f64, radix: u32) -> String {
    if !n.is_finite() || radix == 10 {
        return number_to_string(n);
    }
    let neg = n < 0.0;
    n = n.abs().trunc();
    let mut digits = Vec::new();
    while n >= 1.0 {
        let d = (n % f64::from(radix)) as u32;
        digits.push(std::char::from_digit(d, radix).unwrap_or('0'));
        n = (n / f64::from(radix)).trunc();
    }
    if digits.is_empty() {
        digits.push('0');
    }
    if neg {
        digits.push('-');
    }
    digits.iter().rev().collect()
}

pub fn parse_int(s: &str, radix: Option<u32>) -> f64 {
    let t = s.trim_start();
    let (neg, t) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let (radix, t) = match radix {
        Some(16) | None if t.starts_with("0x") || t.starts_with("0X") => (16, &t[2..]),
        None | Some(0) => (10, t),
        Some(r) if (2..=36).contains(&r) => (r, t),
        Some(_) => return f64::NAN,
    };
    let digits: String = t.chars().take_while(|c| c.is_digit(radix)).collect();
    if digits.is_empty() {
        return f64::NAN;
    }
    let v = digits.chars().fold(0f64, |acc, c| acc * f64::from(radix) + f64::from(c.to_digit(radix).unwrap_or(0)));
    if neg {
        -v
    } else {
        v
    }
}

pub fn parse_float(s: &str) -> f64 {
    let t = s.trim_start();
    for lit in ["Infinity", "+Infinity", "-Infinity"] {
        if t.starts_with(lit) {
            return if lit.starts_with('-') { f64::NEG_INFINITY } else { f64::INFINITY };
        }
    }
    let b = t.as_bytes();
    let mut end = 0;
    let mut best = None;
    if end < b.len() && (b[end] == b'+' || b[end] == b'-') {
        end += 1;
    }
    let mut seen_dot = false;
    let mut seen_exp = false;
    while end < b.len() {
        let c = b[end];
        if c.is_ascii_digit() {
            end += 1;
            if t[..end].parse::<f64>().is_ok() {
                best = Some(end);
            }
        } else if c == b'.' && !seen_dot && !seen_exp {
            seen_dot = true;
            end += 1;
        } else if (c == b'e' || c == b'E') && !seen_exp && best.is_some() {
            seen_exp = true;
            end += 1;
            if end < b.len() && (b[end] == b'+' || b[end] == b'-') {
                end += 1;
            }
        } else {
            break;
        }
    }
    best.and_then(|e| t[..e].parse().ok()).unwrap_or(f64::NAN)
}

fn uri_encode(s: &str, keep: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || keep.as_bytes().contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn uri_decode(s: &str) -> Option<String> {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(b[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

impl Interp<'_> {
    fn install(&mut self, target: ObjId, names: &[&'static str]) {
        for &name in names {
            let f = self.new_native(name);
            self.heap[target].props.insert(Rc::from(method_key(name)), f);
        }
    }

    fn global_native(&mut self, name: &'static str) -> ObjId {
        let f = self.new_native(name);
        self.scopes[GLOBAL].vars.insert(Rc::from(name), f.clone());
        f.as_obj().unwrap()
    }

    pub fn install_builtins(&mut self) {
        let object = self.alloc(ObjKind::Plain, None);
        self.protos = Protos { object, function: object, array: object, string: object, number: object, error: object, regexp: object };
        let function = self.alloc(ObjKind::Plain, Some(object));
        self.protos.function = function;
        for slot in 0..5 {
            let p = self.alloc(ObjKind::Plain, Some(object));
            match slot {
                0 => self.protos.array = p,
                1 => self.protos.string = p,
                2 => self.protos.number = p,
                3 => self.protos.error = p,
                _ => self.protos.regexp = p,
            }
        }
        let p = &self.protos;
        let (array, string, number, error, regexp) = (p.array, p.string, p.number, p.error, p.regexp);
        self.install(object, OBJECT_PROTO);
        self.install(function, FUNCTION_PROTO);
        self.install(array, ARRAY_PROTO);
        self.install(string, STRING_PROTO);
        self.install(number, NUMBER_PROTO);
        self.install(regexp, REGEXP_PROTO);
        self.heap[error].props.insert(Rc::from("name"), Value::str("Error"));
        self.heap[error].props.insert(Rc::from("message"), Value::str(""));

        for (ctor, statics, proto) in [
            ("Object", OBJECT_STATICS, object),
            ("Function", &[][..], function),
            ("Array", ARRAY_STATICS, array),
            ("String", STRING_STATICS, string),
            ("Number", NUMBER_STATICS, number),
            ("RegExp", &[][..], regexp),
        ] {
            let id = self.global_native(ctor);
            self.install(id, statics);
            self.heap[id].props.insert(Rc::from("prototype"), Value::Obj(proto));
            self.heap[proto].props.insert(Rc::from("constructor"), Value::Obj(id));
        }
        let number_ctor = self.scopes[GLOBAL].vars["Number"].as_obj().unwrap();
        for (k, v) in [("MAX_SAFE_INTEGER", 9007199254740991.0), ("MIN_SAFE_INTEGER", -9007199254740991.0), ("EPSILON", f64::EPSILON)] {
            self.heap[number_ctor].props.insert(Rc::from(k), Value::Num(v));
        }
        self.global_native("Boolean");
        for &e in ERROR_CTORS {
            let id = self.global_native(e);
            self.heap[id].props.insert(Rc::from("prototype"), Value::Obj(error));
        }
        for &f in GLOBAL_FNS {
            self.global_native(f);
        }
        let math = self.new_object();
        self.install(math, MATH);
        for (k, v) in [
            ("PI", std::f64::consts::PI),
            ("E", std::f64::consts::E),
            ("LN2", std::f64::consts::LN_2),
            ("LN10", std::f64::consts::LN_10),
            ("SQRT2", std::f64::consts::SQRT_2),
        ] {
            self.heap[math].props.insert(Rc::from(k), Value::Num(v));
        }
        let json = self.new_object();
        self.install(json, JSON_FNS);
        let g = &mut self.scopes[GLOBAL].vars;
        g.insert(Rc::from("Math"), Value::Obj(math));
        g.insert(Rc::from("JSON"), Value::Obj(json));
        g.insert(Rc::from("NaN"), Value::Num(f64::NAN));
        g.insert(Rc::from("Infinity"), Value::Num(f64::INFINITY));
    }

    fn array_items(&mut self, this: &Value) -> R<Vec<Value>> {
        match this {
            Value::Obj(id) => match &self.heap[*id].kind {
                ObjKind::Array(items) => Ok(items.clone()),
                ObjKind::Mock { .. } => Ok(Vec::new()),
                _ => {
                    // Array-likes: read `length` and indices.
                    let len = self.get_prop(this, "length", false)?;
                    let len = self.to_number(&len)?;
                    let len = if len.is_finite() && len > 0.0 { (len as usize).min(1_000_000) } else { 0 };
                    self.charge(len)?;
                    (0..len).map(|i| self.get_prop(this, &i.to_string(), false)).collect()
                }
            },
            Value::Str(s) => Ok(s.chars().map(|c| Value::str(&c.to_string())).collect()),
            _ => Ok(Vec::new()),
        }
    }

    fn set_array(&mut self, this: &Value, items: Vec<Value>) {
        if let Value::Obj(id) = this {
            if let ObjKind::Array(a) = &mut self.heap[*id].kind {
                *a = items;
            }
        }
    }

    fn this_str(&mut self, this: &Value) -> R<Rc<str>> {
        if this.is_nullish() {
            return self.throw("TypeError", "String.prototype method called on null or undefined");
        }
        self.to_str(this)
    }

    fn arg_str(&mut self, args: &[Value], i: usize) -> R<Rc<str>> {
        let v = arg(args, i);
        self.to_str(&v)
    }

    fn arg_num(&mut self, args: &[Value], i: usize) -> R<f64> {
        let v = arg(args, i);
        self.to_number(&v)
    }

    fn check_len(&mut self, n: usize) -> R<()> {
        if n > MAX_STRING {
            return self.throw("RangeError", "Invalid string length");
        }
        self.charge(n / 64)
    }

    fn call_cb(&mut self, f: &Value, this: &Value, args: Vec<Value>) -> R<Value> {
        self.charge(1)?;
        self.call_function(f, this.clone(), args)
    }

    fn sort_values(&mut self, items: Vec<Value>, cmp: &Value) -> R<Vec<Value>> {
        if items.len() <= 1 {
            return Ok(items);
        }
        let mid = items.len() / 2;
        let mut right = items;
        let left = right.drain(..mid).collect();
        let left = self.sort_values(left, cmp)?;
        let right = self.sort_values(right, cmp)?;
        let mut out = Vec::with_capacity(left.len() + right.len());
        let (mut i, mut j) = (0, 0);
        while i < left.len() && j < right.len() {
            self.charge(1)?;
            let take_right = match (&left[i], &right[j]) {
                (Value::Undefined, _) => true,
                (_, Value::Undefined) => false,
                (a, b) if cmp.is_nullish() => *self.to_str(a)? > *self.to_str(b)?,
                (a, b) => {
                    let r = self.call_function(cmp, Value::Undefined, vec![a.clone(), b.clone()])?;
                    self.to_number(&r)? > 0.0
                }
            };
            if take_right {
                out.push(right[j].clone());
                j += 1;
            } else {
                out.push(left[i].clone());
                i += 1;
            }
        }
        out.extend_from_slice(&left[i..]);
        out.extend_from_slice(&right[j..]);
        Ok(out)
    }

    pub fn call_native(&mut self, name: &'static str, this: Value, args: Vec<Value>) -> R<Value> {
        if let Some(rest) = name.strip_prefix("Array#") {
            return self.array_method(rest, this, args);
        }
        if let Some(rest) = name.strip_prefix("String#") {
            return self.string_method(rest, this, args);
        }
        if let Some(rest) = name.strip_prefix("Math.") {
            return self.math(rest, args);
        }
        if let Some(rest) = name.strip_prefix("Object.") {
            return self.object_static(rest, args);
        }
        Ok(match name {
            "Object" => match arg(&args, 0) {
                v @ Value::Obj(_) => v,
                _ => Value::Obj(self.new_object()),
            },
            "Function" => return self.function_constructor(args),
            "Array" | "Error" | "TypeError" | "RangeError" | "SyntaxError" | "ReferenceError" | "URIError" | "RegExp" => {
                return self.construct_native(name, args)
            }
            "String" => match args.first() {
                None => Value::str(""),
                Some(v) => Value::Str(self.to_str(v)?),
            },
            "Number" => match args.first() {
                None => Value::Num(0.0),
                Some(v) => Value::Num(self.to_number(v)?),
            },
            "Boolean" => Value::Bool(self.truthy(&arg(&args, 0))),
            "Object#hasOwnProperty" => {
                let k = self.arg_str(&args, 0)?;
                Value::Bool(self.own_keys(&this).contains(&k))
            }
            "Object#toString" => Value::str(match &this {
                Value::Undefined => "[object Undefined]",
                Value::Null => "[object Null]",
                Value::Obj(id) => match &self.heap[*id].kind {
                    ObjKind::Array(_) => "[object Array]",
                    ObjKind::Closure { .. } | ObjKind::Native(_) | ObjKind::Bound { .. } | ObjKind::Mock { .. } => {
                        "[object Function]"
                    }
                    _ => "[object Object]",
                },
                Value::Str(_) => "[object String]",
                Value::Num(_) => "[object Number]",
                Value::Bool(_) => "[object Boolean]",
            }),
            "Object#valueOf" | "String#valueOf" | "Number#valueOf" => this,
            "Object#isPrototypeOf" => Value::Bool(false),
            "Function#call" => {
                let mut it = args.into_iter();
                let t = it.next().unwrap_or(Value::Undefined);
                return self.call_function(&this, t, it.collect());
            }
            "Function#apply" => {
                let t = arg(&args, 0);
                let list = arg(&args, 1);
                let list = if list.is_nullish() { Vec::new() } else { self.array_items(&list)? };
                return self.call_function(&this, t, list);
            }
            "Function#bind" => {
                let Value::Obj(target) = this else {
                    return self.throw("TypeError", "Bind must be called on a function");
                };
                let mut it = args.into_iter();
                let t = it.next().unwrap_or(Value::Undefined);
                let proto = self.protos.function;
                Value::Obj(self.alloc(ObjKind::Bound { target, this: t, args: it.collect() }, Some(proto)))
            }
            "Function#toString" => Value::str("function () { [native code] }"),
            "Array.isArray" => Value::Bool(matches!(&arg(&args, 0), Value::Obj(id) if matches!(self.heap[*id].kind, ObjKind::Array(_)))),
            "Array.from" => {
                let src = arg(&args, 0);
                let items = self.array_items(&src)?;
                let f = arg(&args, 1);
                if f.is_nullish() {
                    self.new_array(items)
                } else {
                    let mut out = Vec::with_capacity(items.len());
                    for (i, v) in items.into_iter().enumerate() {
                        out.push(self.call_cb(&f, &Value::Undefined, vec![v, Value::Num(i as f64)])?);
                    }
                    self.new_array(out)
                }
            }
            "Array.of" => self.new_array(args),
            "String.fromCharCode" => {
                let mut units = Vec::with_capacity(args.len());
                for a in &args {
                    units.push(to_uint32(self.to_number(a)?) as u16);
                }
                from_utf16(&units)
            }
            "Number.isInteger" => Value::Bool(matches!(arg(&args, 0), Value::Num(n) if n.is_finite() && n.fract() == 0.0)),
            "Number.isFinite" => Value::Bool(matches!(arg(&args, 0), Value::Num(n) if n.is_finite())),
            "Number.isNaN" => Value::Bool(matches!(arg(&args, 0), Value::Num(n) if n.is_nan())),
            "parseInt" | "Number.parseInt" => {
                let s = self.arg_str(&args, 0)?;
                let r = match arg(&args, 1) {
                    Value::Undefined => None,
                    v => Some(to_int32(self.to_number(&v)?) as u32),
                };
                Value::Num(parse_int(&s, r))
            }
            "parseFloat" | "Number.parseFloat" => Value::Num(parse_float(&self.arg_str(&args, 0)?)),
            "isNaN" => Value::Bool(self.arg_num(&args, 0)?.is_nan()),
            "isFinite" => Value::Bool(self.arg_num(&args, 0)?.is_finite()),
            "Number#toString" => {
                let n = self.to_number(&this)?;
                let radix = match arg(&args, 0) {
                    Value::Undefined => 10,
                    v => self.to_number(&v)? as u32,
                };
                if !(2..=36).contains(&radix) {
                    return self.throw("RangeError", "toString() radix must be between 2 and 36");
                }
                Value::str(&radix_string(n, radix))
            }
            "Number#toFixed" => {
                let n = self.to_number(&this)?;
                let d = self.arg_num(&args, 0)?;
                let d = if d.is_nan() { 0 } else { d.clamp(0.0, 100.0) as usize };
                Value::str(&format!("{n:.d$}"))
            }
            "encodeURIComponent" => Value::str(&uri_encode(&self.arg_str(&args, 0)?, "-_.!~*'()")),
            "encodeURI" => Value::str(&uri_encode(&self.arg_str(&args, 0)?, "-_.!~*'();/?:@&=+$,#")),
            "decodeURIComponent" | "decodeURI" => {
                let s = self.arg_str(&args, 0)?;
                match uri_decode(&s) {
                    Some(d) => Value::str(&d),
                    None => return self.throw("URIError", "URI malformed"),
                }
            }
            "atob" => {
                let s = self.arg_str(&args, 0)?;
                let cleaned: String = s.chars().filter(|c| !c.is_ascii_whitespace()).collect();
                let engine = base64::engine::GeneralPurpose::new(
                    &base64::alphabet::STANDARD,
                    base64::engine::GeneralPurposeConfig::new()
                        .with_decode_padding_mode(base64::engine::DecodePaddingMode::Indifferent),
                );
                match engine.decode(cleaned.as_bytes()) {
                    Ok(bytes) => Value::str(&bytes.iter().map(|&b| b as char).collect::<String>()),
                    Err(_) => return self.throw("InvalidCharacterError", "The string to be decoded is not correctly encoded."),
                }
            }
            "btoa" => {
                let s = self.arg_str(&args, 0)?;
                if s.chars().any(|c| c as u32 > 0xff) {
                    return self.throw("InvalidCharacterError", "The string to be encoded contains characters outside of the Latin1 range.");
                }
                let bytes: Vec<u8> = s.chars().map(|c| c as u8).collect();
                Value::str(&base64::engine::general_purpose::STANDARD.encode(bytes))
            }
            "eval" => return self.direct_eval(args, GLOBAL),
            "JSON.parse" => {
                let s = self.arg_str(&args, 0)?;
                match serde_json::from_str::<serde_json::Value>(&s) {
                    Ok(v) => self.import_json(&v),
                    Err(e) => return self.throw("SyntaxError", &format!("JSON.parse: {e}")),
                }
            }
            "JSON.stringify" => {
                let indent = match arg(&args, 2) {
                    Value::Num(n) => " ".repeat(n.clamp(0.0, 10.0) as usize),
                    Value::Str(s) => s.chars().take(10).collect(),
                    _ => String::new(),
                };
                let mut out = String::new();
                if self.stringify(&arg(&args, 0), &indent, 0, &mut out)? {
                    Value::str(&out)
                } else {
                    Value::Undefined
                }
            }
            "RegExp#test" => Value::Bool(false),
            "RegExp#exec" => Value::Null,
            _ => return self.throw("TypeError", &format!("{name} is not supported")),
        })
    }

    pub fn construct_native(&mut self, name: &'static str, args: Vec<Value>) -> R<Value> {
        match name {
            "Object" => Ok(Value::Obj(self.new_object())),
            "Array" => match args.as_slice() {
                [Value::Num(n)] => {
                    if *n < 0.0 || n.fract() != 0.0 || *n > 1_000_000.0 {
                        return self.throw("RangeError", "Invalid array length");
                    }
                    Ok(self.new_array(vec![Value::Undefined; *n as usize]))
                }
                _ => Ok(self.new_array(args)),
            },
            "Error" | "TypeError" | "RangeError" | "SyntaxError" | "ReferenceError" | "URIError" => {
                let msg = match args.first() {
                    None | Some(Value::Undefined) => Rc::from(""),
                    Some(v) => self.to_str(v)?,
                };
                Ok(self.make_error(name, &msg))
            }
            "RegExp" => {
                let source = self.arg_str(&args, 0)?;
                let flags = match arg(&args, 1) {
                    Value::Undefined => Rc::from(""),
                    v => self.to_str(&v)?,
                };
                let proto = self.protos.regexp;
                Ok(Value::Obj(self.alloc(ObjKind::RegExp { source, flags }, Some(proto))))
            }
            "Function" => self.function_constructor(args),
            "String" | "Number" | "Boolean" => self.call_native(name, Value::Undefined, args),
            _ => self.throw("TypeError", &format!("{name} is not a constructor")),
        }
    }

    fn object_static(&mut self, name: &str, args: Vec<Value>) -> R<Value> {
        let o = arg(&args, 0);
        Ok(match name {
            "keys" | "getOwnPropertyNames" => {
                let keys = self.own_keys(&o).into_iter().map(Value::Str).collect();
                self.new_array(keys)
            }
            "values" | "entries" => {
                let keys = self.own_keys(&o);
                self.charge(keys.len())?;
                let mut out = Vec::with_capacity(keys.len());
                for k in keys {
                    let v = self.get_prop(&o, &k, false)?;
                    out.push(if name == "values" { v } else { self.new_array(vec![Value::Str(k), v]) });
                }
                self.new_array(out)
            }
            "assign" => {
                for src in args.iter().skip(1) {
                    for k in self.own_keys(src) {
                        let v = self.get_prop(src, &k, false)?;
                        self.set_prop(&o, k, v)?;
                    }
                }
                o
            }
            "create" => {
                let proto = o.as_obj();
                let id = self.alloc(ObjKind::Plain, proto);
                Value::Obj(id)
            }
            "freeze" | "seal" | "preventExtensions" => o,
            "defineProperty" => {
                let key = self.arg_str(&args, 1)?;
                let desc = arg(&args, 2);
                if !desc.is_nullish() {
                    let v = self.get_prop(&desc, "value", false)?;
                    self.set_prop(&o, key, v)?;
                }
                o
            }
            "defineProperties" => {
                let descs = arg(&args, 1);
                for k in self.own_keys(&descs) {
                    let d = self.get_prop(&descs, &k, false)?;
                    let v = if d.is_nullish() { Value::Undefined } else { self.get_prop(&d, "value", false)? };
                    self.set_prop(&o, k, v)?;
                }
                o
            }
            "getPrototypeOf" => match &o {
                Value::Obj(id) => self.heap[*id].proto.map_or(Value::Null, Value::Obj),
                _ => Value::Null,
            },
            "setPrototypeOf" => {
                if let Value::Obj(id) = &o {
                    self.heap[*id].proto = arg(&args, 1).as_obj();
                }
                o
            }
            "fromEntries" => {
                let id = self.new_object();
                for entry in self.array_items(&o)? {
                    let k = self.get_prop(&entry, "0", false)?;
                    let k = self.to_str(&k)?;
                    let v = self.get_prop(&entry, "1", false)?;
                    self.heap[id].props.insert(k, v);
                }
                Value::Obj(id)
            }
            "is" => {
                let b = arg(&args, 1);
                Value::Bool(match (&o, &b) {
                    (Value::Num(x), Value::Num(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
                    _ => self.strict_equals(&o, &b),
                })
            }
            _ => return self.throw("TypeError", &format!("Object.{name} is not supported")),
        })
    }

    fn math(&mut self, name: &str, args: Vec<Value>) -> R<Value> {
        let mut nums = Vec::with_capacity(args.len());
        for a in &args {
            nums.push(self.to_number(a)?);
        }
        let x = nums.first().copied().unwrap_or(f64::NAN);
        let y = nums.get(1).copied().unwrap_or(f64::NAN);
        Ok(Value::Num(match name {
            "floor" => x.floor(),
            "ceil" => x.ceil(),
            "round" => (x + 0.5).floor(),
            "abs" => x.abs(),
            "max" => nums.iter().copied().fold(f64::NEG_INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) }),
            "min" => nums.iter().copied().fold(f64::INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) }),
            "pow" => x.powf(y),
            "sqrt" => x.sqrt(),
            "cbrt" => x.cbrt(),
            "trunc" => x.trunc(),
            "sign" => {
                if x.is_nan() || x == 0.0 {
                    x
                } else {
                    x.signum()
                }
            }
            "log" => x.ln(),
            "log2" => x.log2(),
            "log10" => x.log10(),
            "exp" => x.exp(),
            "sin" => x.sin(),
            "cos" => x.cos(),
            "tan" => x.tan(),
            "atan" => x.atan(),
            "atan2" => x.atan2(y),
            "random" => self.rng.gen::<f64>(),
            _ => f64::NAN,
        }))
    }

    fn array_method(&mut self, name: &str, this: Value, args: Vec<Value>) -> R<Value> {
        let mut items = self.array_items(&this)?;
        let f = arg(&args, 0);
        let this_arg = arg(&args, 1);
        let len = items.len();
        Ok(match name {
            "push" => {
                items.extend(args);
                let n = items.len();
                self.set_array(&this, items);
                Value::Num(n as f64)
            }
            "pop" => {
                let v = items.pop().unwrap_or(Value::Undefined);
                self.set_array(&this, items);
                v
            }
            "shift" => {
                let v = if items.is_empty() { Value::Undefined } else { items.remove(0) };
                self.set_array(&this, items);
                v
            }
            "unshift" => {
                let mut new = args;
                new.extend(items);
                let n = new.len();
                self.set_array(&this, new);
                Value::Num(n as f64)
            }
            "slice" => {
                let start = rel_index(self.arg_num(&args, 0)?, len);
                let end = match arg(&args, 1) {
                    Value::Undefined => len,
                    v => rel_index(self.to_number(&v)?, len),
                };
                self.new_array(items.get(start..end.max(start)).map(<[Value]>::to_vec).unwrap_or_default())
            }
            "splice" => {
                let start = rel_index(self.arg_num(&args, 0)?, len);
                let count = match args.get(1) {
                    None => len - start,
                    Some(v) => (self.to_number(v)?.max(0.0) as usize).min(len - start),
                };
                let removed: Vec<Value> = items.splice(start..start + count, args.iter().skip(2).cloned()).collect();
                self.set_array(&this, items);
                self.new_array(removed)
            }
            "concat" => {
                for a in args {
                    match &a {
                        Value::Obj(id) if matches!(self.heap[*id].kind, ObjKind::Array(_)) => items.extend(self.array_items(&a)?),
                        _ => items.push(a),
                    }
                }
                self.charge(items.len())?;
                self.new_array(items)
            }
            "join" | "toString" => {
                let sep = match (name, arg(&args, 0)) {
                    ("join", Value::Undefined) | ("toString", _) => Rc::from(","),
                    (_, v) => self.to_str(&v)?,
                };
                let mut parts = Vec::with_capacity(len);
                for v in &items {
                    parts.push(if v.is_nullish() { Rc::from("") } else { self.to_str(v)? });
                }
                let s = parts.join(&sep);
                self.check_len(s.len())?;
                Value::str(&s)
            }
            "indexOf" | "lastIndexOf" | "includes" => {
                let pos = if name == "lastIndexOf" {
                    items.iter().rposition(|v| self.strict_equals(v, &f))
                } else {
                    items.iter().position(|v| match (v, &f) {
                        (Value::Num(a), Value::Num(b)) if name == "includes" && a.is_nan() && b.is_nan() => true,
                        _ => self.strict_equals(v, &f),
                    })
                };
                if name == "includes" {
                    Value::Bool(pos.is_some())
                } else {
                    Value::Num(pos.map_or(-1.0, |p| p as f64))
                }
            }
            "forEach" | "map" | "filter" | "some" | "every" | "find" | "findIndex" => {
                let mut mapped = Vec::new();
                for (i, v) in items.iter().enumerate() {
                    let r = self.call_cb(&f, &this_arg, vec![v.clone(), Value::Num(i as f64), this.clone()])?;
                    let t = self.truthy(&r);
                    match name {
                        "map" => mapped.push(r),
                        "filter" if t => mapped.push(v.clone()),
                        "some" if t => return Ok(Value::Bool(true)),
                        "every" if !t => return Ok(Value::Bool(false)),
                        "find" if t => return Ok(v.clone()),
                        "findIndex" if t => return Ok(Value::Num(i as f64)),
                        _ => {}
                    }
                }
                match name {
                    "forEach" => Value::Undefined,
                    "map" | "filter" => self.new_array(mapped),
                    "some" => Value::Bool(false),
                    "every" => Value::Bool(true),
                    "find" => Value::Undefined,
                    _ => Value::Num(-1.0),
                }
            }
            "reduce" | "reduceRight" => {
                if name == "reduceRight" {
                    items.reverse();
                }
                let mut it = items.into_iter().enumerate();
                let mut acc = match args.get(1) {
                    Some(v) => v.clone(),
                    None => match it.next() {
                        Some((_, v)) => v,
                        None => return self.throw("TypeError", "Reduce of empty array with no initial value"),
                    },
                };
                for (i, v) in it {
                    let idx = if name == "reduceRight" { len - 1 - i } else { i };
                    acc = self.call_cb(&f, &Value::Undefined, vec![acc, v, Value::Num(idx as f64), this.clone()])?;
                }
                acc
            }
            "reverse" => {
                items.reverse();
                self.set_array(&this, items);
                this
            }
            "sort" => {
                let sorted = self.sort_values(items, &f)?;
                self.set_array(&this, sorted);
                this
            }
            "fill" => {
                let start = match args.get(1) {
                    Some(v) => rel_index(self.to_number(v)?, len),
                    None => 0,
                };
                let end = match args.get(2) {
                    Some(v) => rel_index(self.to_number(v)?, len),
                    None => len,
                };
                for slot in items.iter_mut().take(end).skip(start) {
                    *slot = f.clone();
                }
                self.set_array(&this, items);
                this
            }
            "flat" => {
                let mut out = Vec::new();
                for v in items {
                    match &v {
                        Value::Obj(id) if matches!(self.heap[*id].kind, ObjKind::Array(_)) => out.extend(self.array_items(&v)?),
                        _ => out.push(v),
                    }
                }
                self.new_array(out)
            }
            _ => return self.throw("TypeError", &format!("Array.prototype.{name} is not supported")),
        })
    }

    fn string_method(&mut self, name: &str, this: Value, args: Vec<Value>) -> R<Value> {
        let s = self.this_str(&this)?;
        let u = utf16(&s);
        let len = u.len();
        Ok(match name {
            "charAt" => {
                let i = self.arg_num(&args, 0)?;
                let i = if i.is_nan() { 0.0 } else { i.trunc() };
                if i >= 0.0 && (i as usize) < len {
                    from_utf16(&u[i as usize..i as usize + 1])
                } else {
                    Value::str("")
                }
            }
            "charCodeAt" | "codePointAt" => {
                let i = self.arg_num(&args, 0)?;
                let i = if i.is_nan() { 0.0 } else { i.trunc() };
                if i >= 0.0 && (i as usize) < len {
                    Value::Num(f64::from(u[i as usize]))
                } else if name == "charCodeAt" {
                    Value::Num(f64::NAN)
                } else {
                    Value::Undefined
                }
            }
            "indexOf" | "includes" | "startsWith" => {
                let needle = utf16(&self.arg_str(&args, 0)?);
                let from = match arg(&args, 1) {
                    Value::Undefined => 0,
                    v => rel_index(self.to_number(&v)?.max(0.0), len),
                };
                match name {
                    "indexOf" => Value::Num(find_sub(&u, &needle, from).map_or(-1.0, |p| p as f64)),
                    "includes" => Value::Bool(find_sub(&u, &needle, from).is_some()),
                    _ => Value::Bool(u[from..].starts_with(&needle)),
                }
            }
            "lastIndexOf" => {
                let needle = utf16(&self.arg_str(&args, 0)?);
                Value::Num(rfind_sub(&u, &needle).map_or(-1.0, |p| p as f64))
            }
            "endsWith" => {
                let needle = utf16(&self.arg_str(&args, 0)?);
                Value::Bool(u.ends_with(&needle))
            }
            "slice" => {
                let start = rel_index(self.arg_num(&args, 0)?, len);
                let end = match arg(&args, 1) {
                    Value::Undefined => len,
                    v => rel_index(self.to_number(&v)?, len),
                };
                from_utf16(u.get(start..end.max(start)).unwrap_or(&[]))
            }
            "substring" => {
                let clamp = |n: f64| if n.is_nan() { 0 } else { n.clamp(0.0, len as f64) as usize };
                let a = clamp(self.arg_num(&args, 0)?);
                let b = match arg(&args, 1) {
                    Value::Undefined => len,
                    v => clamp(self.to_number(&v)?),
                };
                from_utf16(&u[a.min(b)..a.max(b)])
            }
            "substr" => {
                let start = rel_index(self.arg_num(&args, 0)?, len);
                let count = match arg(&args, 1) {
                    Value::Undefined => len - start,
                    v => (self.to_number(&v)?.max(0.0) as usize).min(len - start),
                };
                from_utf16(&u[start..start + count])
            }
            "toLowerCase" | "toLocaleLowerCase" => Value::str(&s.to_lowercase()),
            "toUpperCase" | "toLocaleUpperCase" => Value::str(&s.to_uppercase()),
            "trim" => Value::str(s.trim()),
            "trimStart" => Value::str(s.trim_start()),
            "trimEnd" => Value::str(s.trim_end()),
            "split" => {
                let limit = match arg(&args, 1) {
                    Value::Undefined => usize::MAX,
                    v => to_uint32(self.to_number(&v)?) as usize,
                };
                let parts: Vec<Value> = match arg(&args, 0) {
                    Value::Undefined => vec![Value::Str(s.clone())],
                    Value::Obj(id) if matches!(self.heap[id].kind, ObjKind::RegExp { .. }) => vec![Value::Str(s.clone())],
                    sep => {
                        let sep = self.to_str(&sep)?;
                        if sep.is_empty() {
                            u.iter().map(|c| from_utf16(&[*c])).collect()
                        } else {
                            s.split(&*sep).map(Value::str).collect()
                        }
                    }
                };
                self.charge(parts.len())?;
                self.new_array(parts.into_iter().take(limit).collect())
            }
            "replace" | "replaceAll" => {
                let pattern = arg(&args, 0);
                if matches!(&pattern, Value::Obj(id) if matches!(self.heap[*id].kind, ObjKind::RegExp { .. })) {
                    return Ok(Value::Str(s));
                }
                let pat = self.to_str(&pattern)?;
                let repl = arg(&args, 1);
                let mut out = String::new();
                let mut rest: &str = &s;
                let mut offset = 0;
                while let Some(pos) = rest.find(&*pat) {
                    out.push_str(&rest[..pos]);
                    let r = if matches!(&repl, Value::Obj(id) if self.heap[*id].is_callable()) {
                        let m = Value::Str(pat.clone());
                        let v = self.call_function(&repl, Value::Undefined, vec![m, Value::Num((offset + pos) as f64), Value::Str(s.clone())])?;
                        self.to_str(&v)?
                    } else {
                        self.to_str(&repl)?
                    };
                    out.push_str(&r);
                    self.check_len(out.len())?;
                    let step = pos + pat.len();
                    offset += step;
                    if pat.is_empty() {
                        // Empty pattern: insert once (replace) or between every char.
                        if name == "replace" || rest.is_empty() {
                            break;
                        }
                        let ch = rest.chars().next().unwrap();
                        out.push(ch);
                        rest = &rest[ch.len_utf8()..];
                        offset += ch.len_utf8();
                        continue;
                    }
                    rest = &rest[step..];
                    if name == "replace" {
                        break;
                    }
                }
                out.push_str(rest);
                Value::str(&out)
            }
            "concat" => {
                let mut out = s.to_string();
                for a in &args {
                    out.push_str(&self.to_str(a)?);
                }
                self.check_len(out.len())?;
                Value::str(&out)
            }
            "repeat" => {
                let n = self.arg_num(&args, 0)?;
                if n < 0.0 || !n.is_finite() {
                    return self.throw("RangeError", "Invalid count value");
                }
                self.check_len(s.len().saturating_mul(n as usize))?;
                Value::str(&s.repeat(n as usize))
            }
            "padStart" | "padEnd" => {
                let target = self.arg_num(&args, 0)?;
                let target = if target.is_nan() { 0 } else { target.max(0.0) as usize };
                self.check_len(target)?;
                let fill = match arg(&args, 1) {
                    Value::Undefined => Rc::from(" "),
                    v => self.to_str(&v)?,
                };
                if target <= len || fill.is_empty() {
                    Value::Str(s)
                } else {
                    let fill_u = utf16(&fill);
                    let pad: Vec<u16> = fill_u.iter().copied().cycle().take(target - len).collect();
                    let out = if name == "padStart" { [pad, u].concat() } else { [u, pad].concat() };
                    from_utf16(&out)
                }
            }
            "match" => Value::Null,
            "search" => match arg(&args, 0) {
                Value::Obj(id) if matches!(self.heap[id].kind, ObjKind::RegExp { .. }) => Value::Num(-1.0),
                v => {
                    let needle = utf16(&self.to_str(&v)?);
                    Value::Num(find_sub(&u, &needle, 0).map_or(-1.0, |p| p as f64))
                }
            },
            "toString" => Value::Str(s),
            "localeCompare" => {
                let other = self.arg_str(&args, 0)?;
                Value::Num(match s.cmp(&other) {
                    std::cmp::Ordering::Less => -1.0,
                    std::cmp::Ordering::Equal => 0.0,
                    std::cmp::Ordering::Greater => 1.0,
                })
            }
            _ => return self.throw("TypeError", &format!("String.prototype.{name} is not supported")),
        })
    }

    fn import_json(&mut self, v: &serde_json::Value) -> Value {
        match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => Value::Num(n.as_f64().unwrap_or(f64::NAN)),
            serde_json::Value::String(s) => Value::str(s),
            serde_json::Value::Array(items) => {
                let vals = items.iter().map(|i| self.import_json(i)).collect();
                self.new_array(vals)
            }
            serde_json::Value::Object(map) => {
                let id = self.new_object();
                for (k, val) in map {
                    let val = self.import_json(val);
                    self.heap[id].props.insert(Rc::from(k.as_str()), val);
                }
                Value::Obj(id)
            }
        }
    }

    /// Appends the JSON text of `v`; returns false for unserializable values.
    fn stringify(&mut self, v: &Value, indent: &str, depth: usize, out: &mut String) -> R<bool> {
        if depth > MAX_JSON_DEPTH {
            return self.throw("TypeError", "Converting circular structure to JSON");
        }
        self.charge(1)?;
        let nl = |out: &mut String, d: usize| {
            if !indent.is_empty() {
                out.push('\n');
                out.push_str(&indent.repeat(d));
            }
        };
        match v {
            Value::Undefined => return Ok(false),
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Num(n) if n.is_finite() => out.push_str(&number_to_string(*n)),
            Value::Num(_) => out.push_str("null"),
            Value::Str(s) => out.push_str(&serde_json::to_string(&**s).unwrap_or_default()),
            Value::Obj(id) => {
                let id = *id;
                match &self.heap[id].kind {
                    ObjKind::Array(items) => {
                        let items = items.clone();
                        out.push('[');
                        for (i, item) in items.iter().enumerate() {
                            if i > 0 {
                                out.push(',');
                            }
                            nl(out, depth + 1);
                            if !self.stringify(item, indent, depth + 1, out)? {
                                out.push_str("null");
                            }
                        }
                        if !items.is_empty() {
                            nl(out, depth);
                        }
                        out.push(']');
                    }
                    ObjKind::Plain | ObjKind::RegExp { .. } => {
                        let entries: Vec<(Rc<str>, Value)> =
                            self.heap[id].props.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                        out.push('{');
                        let mut first = true;
                        for (k, val) in entries {
                            let mut buf = String::new();
                            if !self.stringify(&val, indent, depth + 1, &mut buf)? {
                                continue;
                            }
                            if !first {
                                out.push(',');
                            }
                            first = false;
                            nl(out, depth + 1);
                            out.push_str(&serde_json::to_string(&*k).unwrap_or_default());
                            out.push(':');
                            if !indent.is_empty() {
                                out.push(' ');
                            }
                            out.push_str(&buf);
                        }
                        if !first {
                            nl(out, depth);
                        }
                        out.push('}');
                    }
                    _ => return Ok(false),
                }
            }
        }
        self.check_len(out.len())?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_parsing_helpers() {
        assert_eq!(parse_int("  42px", None), 42.0);
        assert_eq!(parse_int("-0x1A", None), -26.0);
        assert_eq!(parse_int("101", Some(2)), 5.0);
        assert!(parse_int("z", None).is_nan());
        assert_eq!(parse_float("2.5abc"), 2.5);
        assert_eq!(parse_float("1e3x"), 1000.0);
        assert_eq!(parse_float(".5"), 0.5);
        assert!(parse_float("e5").is_nan());
    }

    #[test]
    fn uri_round_trip() {
        let enc = uri_encode("a b/ü?", "-_.!~*'()");
        assert_eq!(enc, "a%20b%2F%C3%BC%3F");
        assert_eq!(uri_decode(&enc).as_deref(), Some("a b/ü?"));
        assert_eq!(uri_decode("%zz"), None);
    }

    #[test]
    fn radix_output() {
        assert_eq!(radix_string(255.0, 16), "ff");
        assert_eq!(radix_string(-5.0, 2), "-101");
        assert_eq!(radix_string(0.0, 36), "0");
    }
}
