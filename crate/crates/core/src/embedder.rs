//! Fixed-dimension unit embeddings of feature documents.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::featurizer::FeatureDocument;

pub const DEFAULT_DIM: usize = 768;
pub const HASHED_TAG: &str = "hashed-fnv1a";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub id: String,
    pub tag: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity, clamped to [-1, 1]. Zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Scales to unit length; a zero vector becomes the first basis vector.
pub fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        v.iter_mut().for_each(|x| *x = 0.0);
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
    } else {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Hashed features of a document: unigrams and within-sentence bigrams.
pub fn features(doc: &FeatureDocument) -> Vec<String> {
    let mut out = Vec::new();
    for sentence in doc.text.split("; ") {
        let toks: Vec<&str> = sentence.split_whitespace().collect();
        out.extend(toks.iter().map(|t| t.to_string()));
        out.extend(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    }
    out
}

/// Signed bucket of one feature.
pub fn bucket(feature: &str, dim: usize) -> (usize, f64) {
    let h = fnv1a64(feature.as_bytes());
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Accumulated signed counts before normalization.
pub fn raw_hashed(doc: &FeatureDocument, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for f in features(doc) {
        let (i, s) = bucket(&f, dim);
        v[i] += s;
    }
    v
}

pub fn embed_hashed(id: &str, doc: &FeatureDocument, dim: usize) -> Embedding {
    assert!(dim >= 8, "embedding dimension must be at least 8");
    let mut vector = raw_hashed(doc, dim);
    normalize(&mut vector);
    Embedding { id: id.to_string(), tag: HASHED_TAG.into(), vector }
}

/// External embedding process speaking the JSON Lines adapter protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adapter {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub dim: usize,
    pub tag: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("adapter failed: {0}")]
    AdapterFailure(String),
    #[error("adapter returned dimension {got} for {id}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, got: usize },
    #[error("adapter returned no vector for {0}")]
    MissingId(String),
}

#[derive(Serialize)]
struct AdapterRequest<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct AdapterRow {
    id: String,
    vector: Vec<f64>,
}

/// Embeds a batch through `adapter`; output follows input order.
pub fn embed_external(docs: &[(String, FeatureDocument)], adapter: &Adapter) -> Result<Vec<Embedding>, EmbedError> {
    let fail = |m: String| EmbedError::AdapterFailure(m);
    let mut child = Command::new(&adapter.program)
        .args(&adapter.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(format!("cannot start {}: {e}", adapter.program.display())))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut input = Vec::new();
    for (id, doc) in docs {
        serde_json::to_writer(&mut input, &AdapterRequest { id, text: &doc.text }).expect("serializable");
        input.push(b'\n');
    }
    // Feed stdin from a separate thread so a chatty adapter cannot deadlock us.
    let writer = std::thread::spawn(move || stdin.write_all(&input));

    let stdout = child.stdout.take().expect("piped stdout");
    let mut rows = HashMap::new();
    for (n, line) in BufReader::new(stdout).lines().enumerate() {
        let line = line.map_err(|e| fail(format!("read error: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: AdapterRow =
            serde_json::from_str(&line).map_err(|e| fail(format!("malformed output line {}: {e}", n + 1)))?;
        rows.insert(row.id, row.vector);
    }
    let status = child.wait().map_err(|e| fail(e.to_string()))?;
    let _ = writer.join();
    if !status.success() {
        let mut err = String::new();
        if let Some(mut s) = child.stderr.take() {
            let _ = std::io::Read::read_to_string(&mut s, &mut err);
        }
        return Err(fail(format!("exit status {status}: {}", err.trim())));
    }

    docs.iter()
        .map(|(id, _)| {
            let mut vector = rows.remove(id).ok_or_else(|| EmbedError::MissingId(id.clone()))?;
            if vector.len() != adapter.dim {
                return Err(EmbedError::DimensionMismatch { id: id.clone(), expected: adapter.dim, got: vector.len() });
            }
            if (norm(&vector) - 1.0).abs() > 1e-3 {
                normalize(&mut vector);
            }
            Ok(Embedding { id: id.clone(), tag: adapter.tag.clone(), vector })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(sentences: &[&str]) -> FeatureDocument {
        FeatureDocument::from_sentences(sentences.iter().map(|s| s.to_string()))
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn unit_norm_and_determinism() {
        let d = doc(&["call browser tabs create", "manifest permissions tabs"]);
        let a = embed_hashed("x", &d, DEFAULT_DIM);
        let b = embed_hashed("y", &d, DEFAULT_DIM);
        assert!((norm(&a.vector) - 1.0).abs() < 1e-9);
        assert_eq!(a.vector, b.vector);
        assert!((cosine(&a.vector, &b.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_document_uses_basis_vector() {
        let e = embed_hashed("e", &doc(&[]), 16);
        assert_eq!(e.vector[0], 1.0);
        assert_eq!(norm(&e.vector), 1.0);
    }

    #[test]
    fn extra_sentence_moves_the_vector() {
        let base = doc(&["manifest manifest version 3"]);
        let more = doc(&["manifest manifest version 3", "call browser tabs query"]);
        let c = cosine(&embed_hashed("a", &base, DEFAULT_DIM).vector, &embed_hashed("b", &more, DEFAULT_DIM).vector);
        assert!(c < 1.0 - 1e-9);
    }

    #[test]
    fn disjoint_documents_are_nearly_orthogonal() {
        let a = doc(&["call browser tabs create", "manifest permissions tabs storage"]);
        let b = doc(&["call navigator clipboard writetext", "manifest background service_worker sw.js"]);
        let c = cosine(&embed_hashed("a", &a, DEFAULT_DIM).vector, &embed_hashed("b", &b, DEFAULT_DIM).vector);
        assert!(c.abs() < 0.25, "{c}");
    }

    #[test]
    fn bigrams_stay_inside_sentences() {
        let f = features(&doc(&["a b", "c"]));
        assert_eq!(f, ["a", "b", "a b", "c"]);
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_bounded(a in proptest::collection::vec(-5.0f64..5.0, 8), b in proptest::collection::vec(-5.0f64..5.0, 8)) {
            let ab = cosine(&a, &b);
            prop_assert!((ab - cosine(&b, &a)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn one_token_change_is_local(
            toks in proptest::collection::vec("[a-z]{1,6}", 1..12),
            idx in any::<prop::sample::Index>(),
            replacement in "[A-Z]{1,6}",
        ) {
            let before = doc(&[&toks.join(" ")]);
            let mut changed = toks.clone();
            changed[idx.index(toks.len())] = replacement;
            let after = doc(&[&changed.join(" ")]);
            let (x, y) = (raw_hashed(&before, 64), raw_hashed(&after, 64));
            let moved = x.iter().zip(&y).filter(|(p, q)| p != q).count();
            // old and new unigram plus up to two old and two new bigrams
            prop_assert!(moved <= 6, "{moved}");
        }
    }
}
