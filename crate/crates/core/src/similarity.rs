//! Ground-truth similarity of two packages: manifest keys, unique manifest
//! values, file tree overlap and identical first-party sources.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crx::{normalize_path, FileTree};
use crate::js::lexer::{tokenize_strict, LexError, TokenKind};
use crate::js::number_to_string;
use crate::manifest::{flatten_all, parse_manifest};

pub const KEY_OVERLAP_THRESHOLD: f64 = 0.90;
pub const PATH_OVERLAP_THRESHOLD: f64 = 0.50;

/// Keys whose values are shared vocabulary rather than identifying content.
const NON_IDENTIFYING_KEYS: &[&str] =
    &["manifest_version", "permissions", "optional_permissions", "host_permissions", "optional_host_permissions"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThirdPartyFilter {
    /// Substrings that mark a path as vendored.
    pub path_markers: Vec<String>,
    /// Lowercase file-name prefixes of well-known libraries.
    pub name_prefixes: Vec<String>,
}

impl Default for ThirdPartyFilter {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        ThirdPartyFilter {
            path_markers: s(&["lib/", "vendor/", "node_modules/"]),
            name_prefixes: s(&[
                "jquery", "bootstrap", "lodash", "underscore", "moment", "react", "vue", "angular", "d3.", "popper",
                "axios", "polyfill", "browser-polyfill",
            ]),
        }
    }
}

impl ThirdPartyFilter {
    pub fn is_third_party(&self, path: &str) -> bool {
        let lower = path.to_lowercase();
        let name = lower.rsplit('/').next().unwrap_or(&lower);
        self.path_markers.iter().any(|m| lower.contains(m.as_str()))
            || self.name_prefixes.iter().any(|p| name.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Similar,
    NotSimilar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub manifest_key_overlap: f64,
    pub shared_unique_values: Vec<String>,
    pub file_tree_overlap: f64,
    pub identical_source_files: Vec<String>,
    pub verdict: Verdict,
    pub evidence: Vec<CriterionResult>,
}

impl fmt::Display for PairReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.verdict {
            Verdict::Similar => "similar",
            Verdict::NotSimilar => "not similar",
        };
        writeln!(f, "verdict: {v}")?;
        for c in &self.evidence {
            let mark = if c.pass { "pass" } else { "FAIL" };
            writeln!(f, "  [{mark}] {:<24} {:.3} (threshold {})", c.name, c.value, c.threshold)?;
        }
        if !self.shared_unique_values.is_empty() {
            writeln!(f, "shared unique values:")?;
            for s in &self.shared_unique_values {
                writeln!(f, "  {s}")?;
            }
        }
        if !self.identical_source_files.is_empty() {
            writeln!(f, "identical sources:")?;
            for s in &self.identical_source_files {
                writeln!(f, "  {s}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimilarityError {
    #[error("package {0} has no manifest.json")]
    MissingManifest(&'static str),
}

/// Overlap of two sets relative to the larger one; two empty sets overlap fully.
pub fn overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / denom as f64
}

/// Token stream with whitespace and comments dropped; literals are kept.
pub fn canonical_tokens(src: &str) -> Result<Vec<String>, LexError> {
    let toks = tokenize_strict(src)?;
    let mut out = Vec::with_capacity(toks.len());
    for t in toks {
        out.push(match t.kind {
            TokenKind::Ident(s) => format!("i:{s}"),
            TokenKind::Num(n) => format!("n:{}", number_to_string(n)),
            TokenKind::Str(s) => format!("s:{s}"),
            TokenKind::Regex { pattern, flags } => format!("r:/{pattern}/{flags}"),
            TokenKind::Punct(p) => format!("p:{p}"),
            TokenKind::Template(tpl) => {
                let mut parts = Vec::new();
                for (i, q) in tpl.quasis.iter().enumerate() {
                    parts.push(format!("q:{q}"));
                    if let Some(span) = tpl.exprs.get(i) {
                        let inner = src.get(span.start..span.end).unwrap_or("");
                        parts.push(format!("{{{}}}", canonical_tokens(inner)?.join(" ")));
                    }
                }
                format!("t:{}", parts.join(""))
            }
            TokenKind::Eof => continue,
            TokenKind::Error(e) => return Err(LexError { offset: t.span.start, message: e }),
        });
    }
    Ok(out)
}

pub fn beautified_equal(a: &str, b: &str) -> Result<bool, LexError> {
    Ok(canonical_tokens(a)? == canonical_tokens(b)?)
}

fn manifest_pairs(tree: &FileTree, side: &'static str) -> Result<Vec<(String, String)>, SimilarityError> {
    let bytes = tree.manifest_bytes().ok_or(SimilarityError::MissingManifest(side))?;
    Ok(parse_manifest(bytes).map(|v| flatten_all(&v)).unwrap_or_default())
}

fn looks_numeric_or_bool(v: &str) -> bool {
    v == "true" || v == "false" || v == "null" || v.parse::<f64>().is_ok()
}

/// Values that identify a package: file paths present in its tree, and
/// values that occur under exactly one manifest key.
fn unique_values(pairs: &[(String, String)], tree: &FileTree) -> BTreeSet<String> {
    let mut keys_of: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (k, v) in pairs {
        let top = k.split('.').next().unwrap_or("");
        if NON_IDENTIFYING_KEYS.contains(&top) || v.trim().is_empty() || looks_numeric_or_bool(v) {
            continue;
        }
        keys_of.entry(v.as_str()).or_default().insert(k.as_str());
    }
    keys_of
        .into_iter()
        .filter(|(v, keys)| keys.len() == 1 || normalize_path(v).is_ok_and(|p| tree.contains(&p)))
        .map(|(v, _)| v.to_string())
        .collect()
}

fn comparable_paths(tree: &FileTree) -> BTreeSet<String> {
    tree.paths().filter(|p| p.rsplit('/').next() != Some("messages.json")).map(str::to_string).collect()
}

pub fn compare_pair(a: &FileTree, b: &FileTree) -> Result<PairReport, SimilarityError> {
    compare_pair_with(a, b, &ThirdPartyFilter::default())
}

pub fn compare_pair_with(a: &FileTree, b: &FileTree, filter: &ThirdPartyFilter) -> Result<PairReport, SimilarityError> {
    let (pa, pb) = (manifest_pairs(a, "a")?, manifest_pairs(b, "b")?);

    let keys = |p: &[(String, String)]| p.iter().map(|(k, _)| k.clone()).collect::<BTreeSet<_>>();
    let key_overlap = overlap(&keys(&pa), &keys(&pb));

    let (ua, ub) = (unique_values(&pa, a), unique_values(&pb, b));
    let shared_unique: Vec<String> = ua.intersection(&ub).cloned().collect();

    let (fa, fb) = (comparable_paths(a), comparable_paths(b));
    let path_overlap = overlap(&fa, &fb);

    let identical: Vec<String> = fa
        .intersection(&fb)
        .filter(|p| p.ends_with(".js") && !filter.is_third_party(p))
        .filter(|p| {
            let (sa, sb) = (a.get(p).unwrap_or_default(), b.get(p).unwrap_or_default());
            if sa == sb {
                return true;
            }
            let (ta, tb) = (String::from_utf8_lossy(sa), String::from_utf8_lossy(sb));
            beautified_equal(&ta, &tb).unwrap_or(false)
        })
        .cloned()
        .collect();

    let evidence = vec![
        CriterionResult {
            name: "manifest key overlap".into(),
            value: key_overlap,
            threshold: KEY_OVERLAP_THRESHOLD,
            pass: key_overlap >= KEY_OVERLAP_THRESHOLD,
        },
        CriterionResult {
            name: "shared unique values".into(),
            value: shared_unique.len() as f64,
            threshold: 1.0,
            pass: !shared_unique.is_empty(),
        },
        CriterionResult {
            name: "file tree overlap".into(),
            value: path_overlap,
            threshold: PATH_OVERLAP_THRESHOLD,
            pass: path_overlap >= PATH_OVERLAP_THRESHOLD,
        },
        CriterionResult {
            name: "identical sources".into(),
            value: identical.len() as f64,
            threshold: 1.0,
            pass: !identical.is_empty(),
        },
    ];
    let verdict = if evidence.iter().all(|c| c.pass) { Verdict::Similar } else { Verdict::NotSimilar };
    Ok(PairReport {
        manifest_key_overlap: key_overlap,
        shared_unique_values: shared_unique,
        file_tree_overlap: path_overlap,
        identical_source_files: identical,
        verdict,
        evidence,
    })
}
