//! Text serialization of manifest properties and API calls.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::manifest::{FlatManifest, EXCLUDED_KEYS};
use crate::static_tracer::ApiCall;

/// Maximum number of values kept per manifest key group.
pub const MAX_GROUP_VALUES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDocument {
    pub sentences: Vec<String>,
    pub text: String,
}

impl FeatureDocument {
    pub fn from_sentences<I: IntoIterator<Item = String>>(sentences: I) -> Self {
        let set: BTreeSet<String> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let sentences: Vec<String> = set.into_iter().collect();
        let text = sentences.join("; ");
        FeatureDocument { sentences, text }
    }

    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Lowercases and keeps only `[a-z0-9]` runs as words.
fn words(s: &str) -> String {
    let lower = s.to_lowercase();
    let mapped: String = lower.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' }).collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lax value normalization: lowercase, anything outside `[a-z0-9 ._/-]`
/// becomes a space, whitespace runs collapse.
pub fn normalize_value(s: &str) -> String {
    let lower = s.to_lowercase();
    let mapped: String = lower
        .chars()
        .map(|c| if c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '.' | '_' | '/' | '-') { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Strips trailing all-digit segments: `permissions.3` → `permissions`.
pub fn group_key(key: &str) -> &str {
    let mut k = key;
    while let Some((head, tail)) = k.rsplit_once('.') {
        if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) {
            k = head;
        } else {
            break;
        }
    }
    k
}

pub fn call_sentence(path: &str) -> String {
    let segs: Vec<String> =
        path.split('.').map(|s| if s == "*" { "any".to_string() } else { words(s) }).filter(|s| !s.is_empty()).collect();
    format!("call {}", segs.join(" "))
}

pub fn serialize_features(manifest: &FlatManifest, calls: &[ApiCall]) -> FeatureDocument {
    // Values keep original array order, so index segments compare numerically.
    let mut pairs: Vec<(&str, &str)> = manifest
        .pairs
        .iter()
        .filter(|(k, _)| !EXCLUDED_KEYS.contains(&k.split('.').next().unwrap_or("")))
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    pairs.sort_by(|a, b| numeric_path_cmp(a.0, b.0));

    let mut groups: Vec<(&str, Vec<String>)> = Vec::new();
    for (k, v) in pairs {
        let g = group_key(k);
        let idx = match groups.iter().position(|(name, _)| *name == g) {
            Some(i) => i,
            None => {
                groups.push((g, Vec::new()));
                groups.len() - 1
            }
        };
        let vals = &mut groups[idx].1;
        let v = normalize_value(v);
        if !v.is_empty() && vals.len() < MAX_GROUP_VALUES {
            vals.push(v);
        }
    }

    let mut sentences: Vec<String> = groups
        .into_iter()
        .map(|(g, vals)| {
            let key = words(g);
            let mut parts = vec!["manifest".to_string()];
            parts.extend(std::iter::once(key).chain(vals).filter(|p| !p.is_empty()));
            parts.join(" ")
        })
        .collect();
    sentences.push(format!("manifest manifest version {}", manifest.manifest_version));
    sentences.extend(calls.iter().map(|c| call_sentence(&c.path)));
    FeatureDocument::from_sentences(sentences)
}

/// Orders dotted paths segment-wise, comparing all-digit segments by value.
fn numeric_path_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    let mut ia = a.split('.');
    let mut ib = b.split('.');
    loop {
        match (ia.next(), ib.next()) {
            (None, None) => return std::cmp::Ordering::Equal,
            (None, Some(_)) => return std::cmp::Ordering::Less,
            (Some(_), None) => return std::cmp::Ordering::Greater,
            (Some(x), Some(y)) => {
                let ord = match (x.parse::<u64>(), y.parse::<u64>()) {
                    (Ok(p), Ok(q)) if x.bytes().all(|c| c.is_ascii_digit()) && y.bytes().all(|c| c.is_ascii_digit()) => {
                        p.cmp(&q)
                    }
                    _ => x.cmp(y),
                };
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("no documents")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single document).
    pub stddev: f64,
}

impl TokenStats {
    pub fn fraction_within(&self, limit: usize) -> f64 {
        self.counts.iter().filter(|&&c| c <= limit).count() as f64 / self.counts.len() as f64
    }
}

/// Whitespace-token statistics over document texts.
pub fn token_stats(docs: &[FeatureDocument]) -> Result<TokenStats, StatsError> {
    if docs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let counts: Vec<usize> = docs.iter().map(FeatureDocument::token_count).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let stddev = if counts.len() < 2 {
        0.0
    } else {
        (counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(TokenStats { counts, mean, stddev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::static_tracer::Origin;
    use proptest::prelude::*;

    fn flat(pairs: &[(&str, &str)], v: u32) -> FlatManifest {
        let mut pairs: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        pairs.sort();
        FlatManifest { pairs, manifest_version: v }
    }

    fn call(p: &str) -> ApiCall {
        ApiCall { path: p.into(), origin: Origin::Static, count: 1 }
    }

    #[test]
    fn permissions_and_call() {
        let m = flat(&[("permissions.0", "tabs"), ("permissions.1", "storage")], 2);
        let doc = serialize_features(&m, &[call("browser.tabs.create")]);
        assert_eq!(doc.text, "call browser tabs create; manifest manifest version 2; manifest permissions tabs storage");
    }

    #[test]
    fn empty_document() {
        assert_eq!(serialize_features(&flat(&[], 3), &[]).text, "manifest manifest version 3");
        let m = flat(&[("manifest_version", "3")], 3);
        assert_eq!(serialize_features(&m, &[]).text, "manifest manifest version 3");
    }

    #[test]
    fn value_cap_keeps_first_ten_in_order() {
        let owned: Vec<(String, String)> = (0..25).map(|i| (format!("permissions.{i}"), format!("p{i}"))).collect();
        let pairs: Vec<(&str, &str)> = owned.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let doc = serialize_features(&flat(&pairs, 3), &[]);
        let s = doc.sentences.iter().find(|s| s.starts_with("manifest permissions")).unwrap();
        assert_eq!(s, "manifest permissions p0 p1 p2 p3 p4 p5 p6 p7 p8 p9");
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_value("  HTTPS://*.Example.com/*;x "), "https // .example.com/ x");
        assert_eq!(group_key("browser_action.default_icon.16"), "browser_action.default_icon");
        assert_eq!(group_key("content_scripts.0.matches.1"), "content_scripts.0.matches");
        assert_eq!(call_sentence("browser.tabs.*"), "call browser tabs any");
        assert_eq!(call_sentence("navigator.userAgent"), "call navigator useragent");
        let m = flat(&[("content_scripts.0.run_at", "document_idle")], 3);
        assert!(serialize_features(&m, &[]).text.contains("manifest content scripts 0 run at document_idle"));
    }

    #[test]
    fn call_counts_and_origin_are_ignored() {
        let m = flat(&[], 3);
        let a = serialize_features(&m, &[ApiCall { path: "browser.a.b".into(), origin: Origin::Dynamic, count: 9 }]);
        let b = serialize_features(&m, &[call("browser.a.b"), call("browser.a.b")]);
        assert_eq!(a, b);
    }

    #[test]
    fn token_statistics() {
        let doc = |n: usize| FeatureDocument::from_sentences([vec!["w"; n].join(" ")]);
        let s = token_stats(&[doc(6)]).unwrap();
        assert_eq!((s.mean, s.stddev, s.fraction_within(512)), (6.0, 0.0, 1.0));
        let s = token_stats(&[doc(10), doc(20)]).unwrap();
        assert_eq!(s.mean, 15.0);
        assert!((s.stddev - 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(token_stats(&[doc(600)]).unwrap().fraction_within(512), 0.0);
        assert_eq!(token_stats(&[]), Err(StatsError::EmptyInput));
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pairs in proptest::collection::btree_map("[a-z_]{1,8}(\\.[0-9]{1,2})?", "[A-Za-z0-9 ;:/.*-]{0,12}", 0..12),
            calls in proptest::collection::vec("browser\\.[a-z]{1,5}\\.[a-zA-Z*]{1,5}", 0..8),
            seed in any::<u64>(),
        ) {
            let m = FlatManifest { pairs: pairs.into_iter().collect(), manifest_version: 3 };
            let cs: Vec<ApiCall> = calls.iter().map(|p| call(p)).collect();
            let doc = serialize_features(&m, &cs);
            let mut shuffled = cs.clone();
            let k = shuffled.len().max(1);
            shuffled.rotate_left((seed as usize) % k);
            shuffled.reverse();
            prop_assert_eq!(&doc, &serialize_features(&m, &shuffled));
            // text regenerates from sentences; no sentence has a semicolon or stray spaces
            prop_assert_eq!(doc.text.clone(), doc.sentences.join("; "));
            let mut sorted = doc.sentences.clone();
            sorted.sort();
            prop_assert_eq!(&sorted, &doc.sentences);
            for s in &doc.sentences {
                prop_assert!(!s.contains(';'));
                prop_assert_eq!(s.trim(), s.as_str());
                prop_assert!(!s.contains("  "));
            }
        }

        #[test]
        fn excluded_values_never_leak(secret in "[a-z]{12}") {
            let m = flat(&[("name", &secret), ("description", &secret), ("author", &secret), ("permissions.0", "tabs")], 3);
            let doc = serialize_features(&m, &[]);
            prop_assert!(!doc.text.contains(&secret));
        }
    }
}
