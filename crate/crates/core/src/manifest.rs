//! Manifest flattening and entrypoint enumeration.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::crx::{normalize_path, FileTree};
use crate::js::number_to_string;

/// Top-level keys that carry no reliable signal and are never flattened.
pub const EXCLUDED_KEYS: &[&str] = &["author", "name", "short_name", "description", "version", "key", "update_url"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("manifest is not a JSON object")]
    NotAnObject,
    #[error("manifest has no integer manifest_version")]
    MissingManifestVersion,
    #[error("manifest is not valid JSON: {0}")]
    Syntax(String),
    #[error("manifest.json not found in package")]
    MissingFile,
}

impl ManifestError {
    pub fn name(&self) -> &'static str {
        match self {
            ManifestError::NotAnObject => "NotAnObject",
            ManifestError::MissingManifestVersion => "MissingManifestVersion",
            ManifestError::Syntax(_) => "Syntax",
            ManifestError::MissingFile => "MissingFile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatManifest {
    /// Sorted by key path.
    pub pairs: Vec<(String, String)>,
    pub manifest_version: u32,
}

impl FlatManifest {
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .binary_search_by(|(k, _)| k.as_str().cmp(key))
            .ok()
            .map(|i| self.pairs[i].1.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrypointKind {
    ContentScript,
    Background,
    BrowserActionPopup,
    OverridePage,
    DevtoolsPage,
    SidePanel,
    OptionsPage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entrypoint {
    pub kind: EntrypointKind,
    /// Tree path, or `page.html#scriptN` for the N-th inline script of a page.
    pub path: String,
    pub match_patterns: Vec<String>,
    pub missing_file: bool,
    /// Body of an inline script element.
    pub inline_source: Option<String>,
}

impl Entrypoint {
    fn file(kind: EntrypointKind, path: String, tree: &FileTree) -> Self {
        let missing_file = !tree.contains(&path);
        Entrypoint { kind, path, match_patterns: Vec::new(), missing_file, inline_source: None }
    }
}

/// Removes `//` and `/* */` comments and trailing commas outside strings.
pub fn strip_json_comments(text: &str) -> String {
    let b = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut last_copied = 0;
    let mut pending_comma: Option<usize> = None;
    while i < b.len() {
        match b[i] {
            b'"' => {
                pending_comma = None;
                i += 1;
                while i < b.len() && b[i] != b'"' {
                    i += if b[i] == b'\\' { 2 } else { 1 };
                }
                i += 1;
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                out.push_str(&text[last_copied..i]);
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                last_copied = i;
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                out.push_str(&text[last_copied..i]);
                i += 2;
                while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                    i += 1;
                }
                i = (i + 2).min(b.len());
                out.push(' ');
                last_copied = i;
            }
            b',' => {
                out.push_str(&text[last_copied..i]);
                last_copied = i;
                pending_comma = Some(out.len());
                i += 1;
            }
            b'}' | b']' => {
                out.push_str(&text[last_copied..i]);
                last_copied = i;
                if let Some(pos) = pending_comma.take() {
                    out.replace_range(pos..pos + 1, " ");
                }
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                pending_comma = None;
                i += 1;
            }
        }
    }
    out.push_str(&text[last_copied.min(text.len())..]);
    out
}

/// Parses manifest bytes, tolerating a BOM, comments and trailing commas.
pub fn parse_manifest(bytes: &[u8]) -> Result<Value, ManifestError> {
    let text = String::from_utf8_lossy(bytes);
    let text = text.trim_start_matches('\u{feff}');
    serde_json::from_str(&strip_json_comments(text)).map_err(|e| ManifestError::Syntax(e.to_string()))
}

fn manifest_version(v: &Value) -> Result<u32, ManifestError> {
    let obj = v.as_object().ok_or(ManifestError::NotAnObject)?;
    obj.get("manifest_version")
        .and_then(|mv| mv.as_u64().or_else(|| mv.as_str().and_then(|s| s.trim().parse().ok())))
        .and_then(|n| u32::try_from(n).ok())
        .ok_or(ManifestError::MissingManifestVersion)
}

pub fn render_scalar(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.to_string(),
            (_, Some(u)) => u.to_string(),
            _ => number_to_string(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        Value::Array(_) | Value::Object(_) => unreachable!("not a scalar"),
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |seg: &str| if prefix.is_empty() { seg.to_string() } else { format!("{prefix}.{seg}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, child)| flatten_into(&join(k), child, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, child)| flatten_into(&join(&i.to_string()), child, out)),
        scalar => out.push((prefix.to_string(), render_scalar(scalar))),
    }
}

/// Every scalar leaf as a (key path, value) pair, nothing excluded.
pub fn flatten_all(manifest: &Value) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    if manifest.is_object() {
        flatten_into("", manifest, &mut pairs);
    }
    pairs.sort();
    pairs
}

pub fn flatten_manifest(manifest: &Value) -> Result<FlatManifest, ManifestError> {
    let manifest_version = manifest_version(manifest)?;
    let map = manifest.as_object().ok_or(ManifestError::NotAnObject)?;
    let mut pairs = Vec::new();
    for (k, v) in map {
        if !EXCLUDED_KEYS.contains(&k.as_str()) {
            flatten_into(k, v, &mut pairs);
        }
    }
    pairs.sort();
    Ok(FlatManifest { pairs, manifest_version })
}

/// Flattens raw manifest bytes. A malformed manifest yields a feature-poor
/// result (only `manifest_version`, recovered by a text scan or assumed 2)
/// together with the error that caused the degradation.
pub fn flatten_lenient(bytes: &[u8]) -> (FlatManifest, Option<ManifestError>) {
    let parsed = parse_manifest(bytes).and_then(|v| flatten_manifest(&v));
    match parsed {
        Ok(flat) => (flat, None),
        Err(err) => {
            let manifest_version = scan_manifest_version(&String::from_utf8_lossy(bytes)).unwrap_or(2);
            let pairs = vec![("manifest_version".to_string(), manifest_version.to_string())];
            (FlatManifest { pairs, manifest_version }, Some(err))
        }
    }
}

fn scan_manifest_version(text: &str) -> Option<u32> {
    let at = text.find("\"manifest_version\"")?;
    let rest = text[at + "\"manifest_version\"".len()..].trim_start().strip_prefix(':')?.trim_start();
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Resolves `reference` against the directory of `base` (a tree path).
fn resolve_relative(base: &str, reference: &str) -> Option<String> {
    let reference = reference.split(['?', '#']).next().unwrap_or("");
    let joined = if let Some(abs) = reference.strip_prefix('/') {
        abs.to_string()
    } else {
        match base.rfind('/') {
            Some(i) => format!("{}/{}", &base[..i], reference),
            None => reference.to_string(),
        }
    };
    normalize_path(&joined).ok()
}

fn is_remote(src: &str) -> bool {
    let lower = src.to_ascii_lowercase();
    lower.starts_with("http:") || lower.starts_with("https:") || lower.starts_with("//") || lower.contains("://")
}

fn is_html(path: &str) -> bool {
    let lower = path.to_ascii_lowercase();
    lower.ends_with(".html") || lower.ends_with(".htm")
}

/// A `<script>` element found by [`scan_scripts`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptRef {
    Src(String),
    Inline(String),
}

fn find_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let hb = hay.as_bytes();
    let nb = needle.as_bytes();
    (from..hb.len().saturating_sub(nb.len() - 1)).find(|&i| hb[i..i + nb.len()].eq_ignore_ascii_case(nb))
}

fn attr_value(attrs: &str, name: &str) -> Option<String> {
    let b = attrs.as_bytes();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
            i += 1;
        }
        let start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'=' && b[i] != b'/' {
            i += 1;
        }
        let key = &attrs[start..i];
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < b.len() && b[i] == b'=' {
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                let q = b[i];
                let vs = i + 1;
                i = vs;
                while i < b.len() && b[i] != q {
                    i += 1;
                }
                value = attrs[vs..i.min(b.len())].to_string();
                i += 1;
            } else {
                let vs = i;
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = attrs[vs..i].to_string();
            }
        }
        if key.eq_ignore_ascii_case(name) {
            return Some(value);
        }
        if i == start {
            i += 1;
        }
    }
    None
}

fn is_js_type(t: Option<String>) -> bool {
    match t {
        None => true,
        Some(t) => matches!(
            t.trim().to_ascii_lowercase().as_str(),
            "" | "text/javascript" | "application/javascript" | "module" | "text/ecmascript" | "application/x-javascript"
        ),
    }
}

/// Finds script elements in an HTML page, in document order. HTML comments
/// are skipped; non-JavaScript `type`s are ignored.
pub fn scan_scripts(html: &str) -> Vec<ScriptRef> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(open) = find_ci(html, "<script", pos) {
        if let Some(c) = find_ci(html, "<!--", pos).filter(|&c| c < open) {
            pos = html[c..].find("-->").map_or(html.len(), |e| c + e + 3);
            continue;
        }
        let after = open + "<script".len();
        if html[after..].chars().next().is_some_and(|c| c.is_ascii_alphanumeric()) {
            pos = after;
            continue;
        }
        let Some(gt) = html[after..].find('>') else { break };
        let attrs = &html[after..after + gt];
        let body_start = after + gt + 1;
        let close = find_ci(html, "</script", body_start);
        let body_end = close.unwrap_or(html.len());
        pos = close.map_or(html.len(), |c| html[c..].find('>').map_or(html.len(), |e| c + e + 1));
        if !is_js_type(attr_value(attrs, "type")) {
            continue;
        }
        match attr_value(attrs, "src") {
            Some(src) => out.push(ScriptRef::Src(src.trim().to_string())),
            None if attrs.trim_end().ends_with('/') => {}
            None => out.push(ScriptRef::Inline(html[body_start..body_end].to_string())),
        }
    }
    out
}

/// Expands a page or script reference from the manifest into entrypoints.
fn push_reference(kind: EntrypointKind, reference: &str, tree: &FileTree, out: &mut Vec<Entrypoint>) {
    let Ok(path) = normalize_path(reference.split(['?', '#']).next().unwrap_or("")) else {
        out.push(Entrypoint {
            kind,
            path: reference.to_string(),
            match_patterns: Vec::new(),
            missing_file: true,
            inline_source: None,
        });
        return;
    };
    if !is_html(&path) {
        out.push(Entrypoint::file(kind, path, tree));
        return;
    }
    let Some(html) = tree.get_text(&path) else {
        out.push(Entrypoint::file(kind, path, tree));
        return;
    };
    let mut inline_n = 0;
    for script in scan_scripts(&html) {
        match script {
            ScriptRef::Src(src) if is_remote(&src) => out.push(Entrypoint {
                kind,
                path: src,
                match_patterns: Vec::new(),
                missing_file: true,
                inline_source: None,
            }),
            ScriptRef::Src(src) => match resolve_relative(&path, &src) {
                Some(p) => out.push(Entrypoint::file(kind, p, tree)),
                None => out.push(Entrypoint {
                    kind,
                    path: src,
                    match_patterns: Vec::new(),
                    missing_file: true,
                    inline_source: None,
                }),
            },
            ScriptRef::Inline(body) => {
                out.push(Entrypoint {
                    kind,
                    path: format!("{path}#script{inline_n}"),
                    match_patterns: Vec::new(),
                    missing_file: false,
                    inline_source: Some(body),
                });
                inline_n += 1;
            }
        }
    }
}

fn str_at<'v>(v: &'v Value, path: &[&str]) -> Option<&'v str> {
    path.iter().try_fold(v, |cur, k| cur.get(k)).and_then(Value::as_str)
}

fn strings(v: Option<&Value>) -> Vec<String> {
    v.and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default()
}

/// Lists code entrypoints in manifest order: content scripts, background,
/// action popups, override pages, devtools page, side panel, options page.
pub fn enumerate_entrypoints(manifest: &Value, tree: &FileTree) -> Vec<Entrypoint> {
    use EntrypointKind::*;
    let mut out = Vec::new();
    if let Some(scripts) = manifest.get("content_scripts").and_then(Value::as_array) {
        for cs in scripts {
            let matches = strings(cs.get("matches"));
            for js in strings(cs.get("js")) {
                let before = out.len();
                push_reference(ContentScript, &js, tree, &mut out);
                out[before..].iter_mut().for_each(|e| e.match_patterns = matches.clone());
            }
        }
    }
    if let Some(bg) = manifest.get("background") {
        for s in strings(bg.get("scripts")) {
            push_reference(Background, &s, tree, &mut out);
        }
        for key in ["page", "service_worker"] {
            if let Some(p) = bg.get(key).and_then(Value::as_str) {
                push_reference(Background, p, tree, &mut out);
            }
        }
    }
    for action in ["action", "browser_action", "page_action"] {
        if let Some(p) = str_at(manifest, &[action, "default_popup"]) {
            push_reference(BrowserActionPopup, p, tree, &mut out);
        }
    }
    if let Some(overrides) = manifest.get("chrome_url_overrides").and_then(Value::as_object) {
        for p in overrides.values().filter_map(Value::as_str) {
            push_reference(OverridePage, p, tree, &mut out);
        }
    }
    if let Some(p) = str_at(manifest, &["devtools_page"]) {
        push_reference(DevtoolsPage, p, tree, &mut out);
    }
    if let Some(p) = str_at(manifest, &["side_panel", "default_path"]) {
        push_reference(SidePanel, p, tree, &mut out);
    }
    if let Some(p) = str_at(manifest, &["options_page"]) {
        push_reference(OptionsPage, p, tree, &mut out);
    }
    if let Some(p) = str_at(manifest, &["options_ui", "page"]) {
        push_reference(OptionsPage, p, tree, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    fn tree(files: &[(&str, &str)]) -> FileTree {
        let mut t = FileTree::default();
        for (p, c) in files {
            t.insert(p, c.as_bytes().to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn flatten_examples() {
        let f = flatten_manifest(&json!({"manifest_version":2,"permissions":["tabs","storage"],"name":"X"})).unwrap();
        assert_eq!(f.pairs, pairs(&[("manifest_version", "2"), ("permissions.0", "tabs"), ("permissions.1", "storage")]));
        let f = flatten_manifest(&json!({"manifest_version":3,"key":"AAAA"})).unwrap();
        assert_eq!(f.pairs, pairs(&[("manifest_version", "3")]));
        assert_eq!(f.manifest_version, 3);
        assert_eq!(flatten_manifest(&json!({"permissions":[]})), Err(ManifestError::MissingManifestVersion));
        assert_eq!(flatten_manifest(&json!([1])), Err(ManifestError::NotAnObject));
    }

    #[test]
    fn scalar_rendering() {
        let f = flatten_manifest(&json!({"manifest_version":2,"a":{"b":true,"c":1.5,"d":null,"e":"__MSG_x__"}})).unwrap();
        assert_eq!(f.get("a.b"), Some("true"));
        assert_eq!(f.get("a.c"), Some("1.5"));
        assert_eq!(f.get("a.d"), Some("null"));
        assert_eq!(f.get("a.e"), Some("__MSG_x__"));
    }

    #[test]
    fn comments_and_trailing_commas() {
        let src = b"\xef\xbb\xbf{ // lead\n \"manifest_version\": 3, /* c */ \"p\": [\"a // not\",],\n}";
        let v = parse_manifest(src).unwrap();
        assert_eq!(v, json!({"manifest_version":3,"p":["a // not"]}));
    }

    #[test]
    fn lenient_recovers_version() {
        let (f, err) = flatten_lenient(br#"{"manifest_version": 3, "permissions": ["tabs" "#);
        assert!(matches!(err, Some(ManifestError::Syntax(_))));
        assert_eq!(f.manifest_version, 3);
        assert_eq!(f.pairs, pairs(&[("manifest_version", "3")]));
    }

    #[test]
    fn service_worker_entrypoint() {
        let t = tree(&[("sw.js", "")]);
        let eps = enumerate_entrypoints(&json!({"manifest_version":3,"background":{"service_worker":"sw.js"}}), &t);
        assert_eq!(eps.len(), 1);
        assert_eq!((eps[0].kind, eps[0].path.as_str(), eps[0].missing_file), (EntrypointKind::Background, "sw.js", false));
    }

    #[test]
    fn override_page_resolves_scripts() {
        let t = tree(&[("tab.html", "<html><script src=\"t.js\"></script></html>"), ("t.js", "")]);
        let eps = enumerate_entrypoints(&json!({"manifest_version":2,"chrome_url_overrides":{"newtab":"tab.html"}}), &t);
        assert_eq!(eps.len(), 1);
        assert_eq!((eps[0].kind, eps[0].path.as_str()), (EntrypointKind::OverridePage, "t.js"));
    }

    #[test]
    fn theme_has_no_entrypoints() {
        let eps = enumerate_entrypoints(&json!({"manifest_version":2,"theme":{"colors":{}}}), &FileTree::default());
        assert!(eps.is_empty());
    }

    #[test]
    fn html_scanning_details() {
        let html = "<!-- <script src=x.js></script> --><SCRIPT type='module' SRC = '../lib/a.js'></SCRIPT>\n\
                    <script>chrome.tabs.query({})</script><script type=\"text/template\">x</script><scripts>";
        assert_eq!(
            scan_scripts(html),
            vec![ScriptRef::Src("../lib/a.js".into()), ScriptRef::Inline("chrome.tabs.query({})".into())]
        );
        let t = tree(&[("pages/p.html", html), ("lib/a.js", "")]);
        let eps = enumerate_entrypoints(&json!({"manifest_version":2,"options_page":"pages/p.html"}), &t);
        let paths: Vec<_> = eps.iter().map(|e| (e.path.as_str(), e.missing_file)).collect();
        assert_eq!(paths, vec![("lib/a.js", false), ("pages/p.html#script0", false)]);
        assert_eq!(eps[1].inline_source.as_deref(), Some("chrome.tabs.query({})"));
    }

    #[test]
    fn missing_files_are_flagged() {
        let m = json!({"manifest_version":2,
            "content_scripts":[{"matches":["<all_urls>"],"js":["cs.js","gone.js"]}],
            "background":{"page":"bg.html"},
            "browser_action":{"default_popup":"p.html"}});
        let t = tree(&[("cs.js", ""), ("p.html", "<script src='https://cdn.example/x.js'></script>")]);
        let eps = enumerate_entrypoints(&m, &t);
        let got: Vec<_> = eps.iter().map(|e| (e.kind, e.path.as_str(), e.missing_file)).collect();
        use EntrypointKind::*;
        assert_eq!(
            got,
            vec![
                (ContentScript, "cs.js", false),
                (ContentScript, "gone.js", true),
                (Background, "bg.html", true),
                (BrowserActionPopup, "https://cdn.example/x.js", true),
            ]
        );
        assert_eq!(eps[0].match_patterns, vec!["<all_urls>".to_string()]);
    }

    /// Rebuilds a JSON document from flattened pairs (test oracle).
    fn unflatten(pairs: &[(String, String)]) -> Value {
        fn insert(node: &mut Value, segs: &[&str], value: &str) {
            if segs.is_empty() {
                *node = Value::String(value.to_string());
                return;
            }
            if !node.is_object() {
                *node = json!({});
            }
            let child = node.as_object_mut().unwrap().entry(segs[0]).or_insert(Value::Null);
            insert(child, &segs[1..], value);
        }
        let mut root = json!({});
        for (k, v) in pairs {
            insert(&mut root, &k.split('.').collect::<Vec<_>>(), v);
        }
        root
    }

    fn json_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            any::<bool>().prop_map(Value::Bool),
            (-1000i64..1000).prop_map(|n| json!(n)),
            "[a-z_]{0,6}".prop_map(Value::String),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-z]{1,5}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn flatten_reflatten_is_stable(body in prop::collection::btree_map("[a-z]{1,6}", json_value(), 0..5), mv in 2u32..4) {
            let mut obj: serde_json::Map<String, Value> = body.into_iter().collect();
            obj.insert("manifest_version".into(), json!(mv));
            let first = flatten_manifest(&Value::Object(obj)).unwrap();
            prop_assert!(first.pairs.windows(2).all(|w| w[0].0 <= w[1].0));
            prop_assert!(first.keys().all(|k| !EXCLUDED_KEYS.contains(&k.split('.').next().unwrap())));
            let mut rebuilt = unflatten(&first.pairs);
            rebuilt["manifest_version"] = json!(mv);
            let second = flatten_manifest(&rebuilt).unwrap();
            prop_assert_eq!(first.pairs, second.pairs);
        }

        #[test]
        fn pairs_independent_of_key_order(body in prop::collection::btree_map("[a-z]{1,6}", json_value(), 0..6)) {
            let mut fwd = String::from("{\"manifest_version\":3");
            let mut rev = String::from("{");
            for (k, v) in &body {
                fwd.push_str(&format!(",\"{k}\":{v}"));
            }
            for (k, v) in body.iter().rev() {
                rev.push_str(&format!("\"{k}\":{v},"));
            }
            fwd.push('}');
            rev.push_str("\"manifest_version\":3}");
            let a = flatten_lenient(fwd.as_bytes()).0;
            let b = flatten_lenient(rev.as_bytes()).0;
            prop_assert_eq!(a, b);
        }
    }
}
