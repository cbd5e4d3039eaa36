//! On-disk corpus: metadata index, per-extension stage artifacts and
//! corpus-level matrices.
//!
//! Layout under the store root:
//!
//! ```text
//! index.json
//! store/<id>/features.json   extract
//! store/<id>/document.txt    featurize
//! store/<id>/embedding.f32   embed
//! embeddings.f32, embeddings.json
//! assignments.csv, cluster.json
//! ```
//!
//! Every stage records a content hash of its inputs per extension, so a
//! re-run with unchanged inputs does nothing. Artifacts are written to a
//! temporary file and renamed into place.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::ExtensionRecord;
use crate::cluster::{cluster_ids, pca_fit_transform, ClusterAssignment, ClusterError, HdbscanParams};
use crate::crx::{load_package, FileTree};
use crate::embedder::{embed_external, embed_hashed, Adapter, EmbedError, Embedding, DEFAULT_DIM, HASHED_TAG};
use crate::featurizer::{serialize_features, FeatureDocument};
use crate::manifest::{enumerate_entrypoints, flatten_lenient, parse_manifest, FlatManifest};
use crate::mock_tracer::{entry_sources, trace_execution, Budget};
use crate::static_tracer::{resolve_modules, trace_static, ApiCall};

/// Bumped whenever extraction output changes shape, to invalidate stored hashes.
const EXTRACTOR_REVISION: &str = "extract-1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("metadata line {line}: {message}")]
    MetadataParseError { line: usize, message: String },
    #[error("record {id}: {rule}")]
    InvariantViolation { id: String, rule: String },
    #[error("stage {stage} needs {requires} first (id {id})")]
    StageOrderError { stage: Stage, requires: Stage, id: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("unknown id {0}")]
    UnknownId(String),
    #[error("{id}: missing artifact {artifact}")]
    MissingArtifact { id: String, artifact: String },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

impl StoreError {
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::MetadataParseError { .. } => "MetadataParseError",
            StoreError::InvariantViolation { .. } => "InvariantViolation",
            StoreError::StageOrderError { .. } => "StageOrderError",
            StoreError::Io { .. } => "IoError",
            StoreError::UnknownId(_) => "UnknownId",
            StoreError::MissingArtifact { .. } => "MissingArtifact",
            StoreError::Cluster(_) => "ClusterError",
            StoreError::Embed(e) => match e {
                EmbedError::AdapterFailure(_) => "AdapterFailure",
                EmbedError::DimensionMismatch { .. } => "DimensionMismatch",
                EmbedError::MissingId(_) => "MissingId",
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |e| StoreError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Featurize,
    Embed,
}

impl Stage {
    pub fn requires(self) -> Option<Stage> {
        match self {
            Stage::Extract => None,
            Stage::Featurize => Some(Stage::Extract),
            Stage::Embed => Some(Stage::Featurize),
        }
    }

    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Extract => "features.json",
            Stage::Featurize => "document.txt",
            Stage::Embed => "embedding.f32",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Extract => "extract",
            Stage::Featurize => "featurize",
            Stage::Embed => "embed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum StageStatus {
    Done { input_hash: String },
    Failed { input_hash: String, reason: String },
}

impl StageStatus {
    pub fn input_hash(&self) -> &str {
        match self {
            StageStatus::Done { input_hash } | StageStatus::Failed { input_hash, .. } => input_hash,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self, StageStatus::Done { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    /// Newest version per id.
    pub records: BTreeMap<String, ExtensionRecord>,
    /// Every metadata line, for all-versions analyses.
    pub history: Vec<ExtensionRecord>,
    pub package_path: BTreeMap<String, PathBuf>,
    pub package_sha256: BTreeMap<String, String>,
    /// Records whose package is absent from the corpus directory.
    pub missing_package: BTreeSet<String>,
    pub stage_status: BTreeMap<String, BTreeMap<Stage, StageStatus>>,
}

impl CorpusIndex {
    pub fn status(&self, id: &str, stage: Stage) -> Option<&StageStatus> {
        self.stage_status.get(id)?.get(&stage)
    }

    pub fn done_ids(&self, stage: Stage) -> Vec<String> {
        self.records.keys().filter(|id| self.status(id, stage).is_some_and(StageStatus::is_done)).cloned().collect()
    }

    pub fn record_map(&self) -> HashMap<String, ExtensionRecord> {
        self.records.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IngestWarning {
    MissingPackage(String),
}

pub fn parse_metadata(text: &str) -> Result<Vec<ExtensionRecord>, StoreError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut r: ExtensionRecord = serde_json::from_str(line)
            .map_err(|e| StoreError::MetadataParseError { line: i + 1, message: e.to_string() })?;
        if let Some(h) = &mut r.sha256 {
            h.make_ascii_lowercase();
        }
        out.push(r);
    }
    Ok(out)
}

/// Builds an index from a metadata file and a directory of `<id>.crx` or
/// `<id>.zip` packages.
pub fn ingest(corpus_dir: &Path, metadata_file: &Path) -> Result<(CorpusIndex, Vec<IngestWarning>), StoreError> {
    let text = fs::read_to_string(metadata_file).map_err(io_err(metadata_file))?;
    let history = parse_metadata(&text)?;
    let mut index = CorpusIndex::default();
    let mut warnings = Vec::new();
    for r in &history {
        if let Some(rule) = r.violation() {
            return Err(StoreError::InvariantViolation { id: r.id.clone(), rule: rule.into() });
        }
        let newer = index.records.get(&r.id).is_none_or(|old| r.version_release_date >= old.version_release_date);
        if newer {
            index.records.insert(r.id.clone(), r.clone());
        }
    }
    for (id, rec) in index.records.iter_mut() {
        let found = ["crx", "zip"].iter().map(|ext| corpus_dir.join(format!("{id}.{ext}"))).find(|p| p.is_file());
        let Some(path) = found else {
            index.missing_package.insert(id.clone());
            warnings.push(IngestWarning::MissingPackage(id.clone()));
            continue;
        };
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let digest = sha256_hex(&bytes);
        match &rec.sha256 {
            Some(h) if *h != digest => {
                return Err(StoreError::InvariantViolation {
                    id: id.clone(),
                    rule: format!("sha256 mismatch: metadata {h}, package {digest}"),
                })
            }
            Some(_) => {}
            None => rec.sha256 = Some(digest.clone()),
        }
        index.package_sha256.insert(id.clone(), digest);
        index.package_path.insert(id.clone(), fs::canonicalize(&path).unwrap_or(path));
    }
    index.history = history;
    Ok((index, warnings))
}

// ---------------------------------------------------------------------------
// Extraction

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    #[default]
    Both,
    StaticOnly,
    DynamicOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedFeatures {
    pub id: String,
    pub manifest: FlatManifest,
    pub manifest_error: Option<String>,
    pub entrypoints: Vec<String>,
    pub static_calls: Vec<ApiCall>,
    pub dynamic_calls: Vec<ApiCall>,
    pub navigator_reads: Vec<ApiCall>,
    pub parse_coverage: f64,
    pub budget_exhausted: bool,
    pub trace_errors: Vec<String>,
}

impl ExtractedFeatures {
    /// Static and dynamic calls plus navigator reads, one entry per path.
    pub fn all_calls(&self) -> Vec<ApiCall> {
        let mut by_path: BTreeMap<&str, ApiCall> = BTreeMap::new();
        for c in self.static_calls.iter().chain(&self.dynamic_calls).chain(&self.navigator_reads) {
            by_path
                .entry(&c.path)
                .and_modify(|e| e.count = e.count.max(c.count))
                .or_insert_with(|| c.clone());
        }
        by_path.into_values().collect()
    }

    pub fn document(&self) -> FeatureDocument {
        serialize_features(&self.manifest, &self.all_calls())
    }
}

/// Runs manifest analysis and the selected tracers over one package.
pub fn analyze_package(id: &str, tree: &FileTree, mode: TraceMode, budget: &Budget) -> Result<ExtractedFeatures, String> {
    let bytes = tree.manifest_bytes().ok_or("MissingManifest: manifest.json not found")?;
    let (manifest, manifest_error) = flatten_lenient(bytes);
    let entrypoints = parse_manifest(bytes).map(|v| enumerate_entrypoints(&v, tree)).unwrap_or_default();
    let graph = resolve_modules(&entrypoints, tree);

    let mut out = ExtractedFeatures {
        id: id.to_string(),
        manifest,
        manifest_error: manifest_error.map(|e| e.to_string()),
        entrypoints: entrypoints.iter().map(|e| e.path.clone()).collect(),
        static_calls: Vec::new(),
        dynamic_calls: Vec::new(),
        navigator_reads: Vec::new(),
        parse_coverage: 1.0,
        budget_exhausted: false,
        trace_errors: Vec::new(),
    };
    let mut reads = BTreeMap::new();
    if mode != TraceMode::DynamicOnly {
        let st = trace_static(&graph, tree);
        out.parse_coverage = st.coverage();
        out.static_calls = st.calls;
        for r in st.navigator_reads {
            reads.insert(r.path.clone(), r);
        }
    }
    if mode != TraceMode::StaticOnly {
        match trace_execution(&entry_sources(&graph, tree), budget) {
            Ok(log) => {
                out.dynamic_calls = log.calls;
                out.budget_exhausted = log.budget_exhausted;
                out.trace_errors = log.errors;
                for r in log.navigator_reads {
                    reads.entry(r.path.clone()).or_insert(r);
                }
            }
            Err(e) => out.trace_errors.push(e.to_string()),
        }
    }
    out.navigator_reads = reads.into_values().collect();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stages

/// `(id, input hash, artifact bytes or failure reason)` for one extension.
type StageOutcome = (String, String, Result<Vec<u8>, String>);

#[derive(Debug, Clone, PartialEq)]
pub enum Embedder {
    Hashed { dim: usize },
    External(Adapter),
}

impl Default for Embedder {
    fn default() -> Self {
        Embedder::Hashed { dim: DEFAULT_DIM }
    }
}

impl Embedder {
    pub fn tag(&self) -> String {
        match self {
            Embedder::Hashed { dim } => format!("{HASHED_TAG}/{dim}"),
            Embedder::External(a) => format!("{}/{}", a.tag, a.dim),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Embedder::Hashed { dim } => *dim,
            Embedder::External(a) => a.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    /// Worker count; 0 uses the available parallelism.
    pub jobs: usize,
    pub mode: TraceMode,
    pub budget: Budget,
    pub embedder: Embedder,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub performed: Vec<String>,
    pub skipped: Vec<String>,
    /// `(id, reason)` for extensions that failed in this run.
    pub failed: Vec<(String, String)>,
    /// Ids whose prerequisite stage failed.
    pub blocked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub ids: Vec<String>,
    pub dim: usize,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub n: usize,
    pub components: usize,
    pub retained_variance: f64,
    pub degenerate: bool,
    pub clusters: usize,
    pub outliers: usize,
    pub params: HdbscanParams,
    pub variance_target: f64,
}

pub struct Store {
    root: PathBuf,
    pub index: CorpusIndex,
}

pub fn f32_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|&x| (x as f32).to_le_bytes()).collect()
}

pub fn f32_values(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect()
}

enum Work {
    Skip,
    Run(String),
}

impl Store {
    /// Opens a store, starting from an empty index when none exists yet.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        let path = root.join("index.json");
        let index = if path.exists() {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            serde_json::from_str(&text).map_err(|e| StoreError::Io { path: path.clone(), message: e.to_string() })?
        } else {
            CorpusIndex::default()
        };
        Ok(Store { root, index })
    }

    /// Ingests into the store at `root`, keeping stage status of ids that remain.
    pub fn ingest(
        root: impl Into<PathBuf>,
        corpus_dir: &Path,
        metadata_file: &Path,
    ) -> Result<(Store, Vec<IngestWarning>), StoreError> {
        let mut store = Store::open(root)?;
        let (mut index, warnings) = ingest(corpus_dir, metadata_file)?;
        let mut old = std::mem::take(&mut store.index.stage_status);
        for id in index.records.keys() {
            if let Some(s) = old.remove(id) {
                index.stage_status.insert(id.clone(), s);
            }
        }
        store.index = index;
        store.save()?;
        Ok((store, warnings))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn save(&self) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(&self.index).expect("index serializes");
        write_atomic(&self.root.join("index.json"), &json)
    }

    pub fn artifact_path(&self, id: &str, stage: Stage) -> PathBuf {
        self.root.join("store").join(id).join(stage.artifact())
    }

    fn check_id(&self, id: &str) -> Result<(), StoreError> {
        if self.index.records.contains_key(id) {
            Ok(())
        } else {
            Err(StoreError::UnknownId(id.to_string()))
        }
    }

    fn read_artifact(&self, id: &str, stage: Stage) -> Result<Vec<u8>, StoreError> {
        self.check_id(id)?;
        fs::read(self.artifact_path(id, stage))
            .map_err(|_| StoreError::MissingArtifact { id: id.to_string(), artifact: stage.artifact().into() })
    }

    pub fn package(&self, id: &str) -> Result<FileTree, StoreError> {
        self.check_id(id)?;
        let path = self
            .index
            .package_path
            .get(id)
            .ok_or_else(|| StoreError::MissingArtifact { id: id.to_string(), artifact: "package".into() })?;
        let bytes = fs::read(path).map_err(io_err(path))?;
        load_package(&bytes).map_err(|e| StoreError::Io { path: path.clone(), message: e.to_string() })
    }

    pub fn features(&self, id: &str) -> Result<ExtractedFeatures, StoreError> {
        let bytes = self.read_artifact(id, Stage::Extract)?;
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Io { path: self.artifact_path(id, Stage::Extract), message: e.to_string() })
    }

    pub fn document(&self, id: &str) -> Result<String, StoreError> {
        Ok(String::from_utf8_lossy(&self.read_artifact(id, Stage::Featurize)?).into_owned())
    }

    pub fn embedding(&self, id: &str) -> Result<Vec<f64>, StoreError> {
        Ok(f32_values(&self.read_artifact(id, Stage::Embed)?))
    }

    /// Input hash of `stage` for `id`, or `None` when its input is unavailable.
    fn input_hash(&self, id: &str, stage: Stage, cfg: &PipelineConfig) -> Result<Option<String>, StoreError> {
        let mut h = Sha256::new();
        h.update(stage.to_string());
        match stage {
            Stage::Extract => {
                let Some(sha) = self.index.package_sha256.get(id) else { return Ok(None) };
                h.update(EXTRACTOR_REVISION);
                h.update(sha);
                h.update(serde_json::to_vec(&(cfg.mode, cfg.budget)).expect("serializable"));
            }
            Stage::Featurize => h.update(self.read_artifact(id, Stage::Extract)?),
            Stage::Embed => {
                h.update(self.read_artifact(id, Stage::Featurize)?);
                h.update(cfg.embedder.tag());
            }
        }
        Ok(Some(hex::encode(h.finalize())))
    }

    fn failed_upstream(&self, id: &str, stage: Stage) -> bool {
        let mut cur = stage.requires();
        while let Some(s) = cur {
            if matches!(self.index.status(id, s), Some(StageStatus::Failed { .. })) {
                return true;
            }
            cur = s.requires();
        }
        false
    }

    fn plan(&self, stage: Stage, cfg: &PipelineConfig, report: &mut StageReport) -> Result<Vec<(String, String)>, StoreError> {
        let mut todo = Vec::new();
        for id in self.index.records.keys() {
            if let Some(req) = stage.requires() {
                match self.index.status(id, req) {
                    Some(StageStatus::Done { .. }) => {}
                    None if self.index.missing_package.contains(id) => continue,
                    _ if self.failed_upstream(id, stage) => {
                        report.blocked.push(id.clone());
                        continue;
                    }
                    _ => return Err(StoreError::StageOrderError { stage, requires: req, id: id.clone() }),
                }
            }
            let Some(hash) = self.input_hash(id, stage, cfg)? else { continue };
            let fresh = self.index.status(id, stage).is_some_and(|s| s.input_hash() == hash);
            let artifact_ok = match self.index.status(id, stage) {
                Some(StageStatus::Done { .. }) => self.artifact_path(id, stage).is_file(),
                _ => true,
            };
            match if fresh && artifact_ok { Work::Skip } else { Work::Run(hash) } {
                Work::Skip => report.skipped.push(id.clone()),
                Work::Run(hash) => todo.push((id.clone(), hash)),
            }
        }
        Ok(todo)
    }

    /// Runs one stage over every eligible extension. Failures are isolated
    /// per extension and recorded in the index.
    pub fn run_stage(&mut self, stage: Stage, cfg: &PipelineConfig) -> Result<StageReport, StoreError> {
        let mut report = StageReport::default();
        let todo = self.plan(stage, cfg, &mut report)?;

        let results: Vec<StageOutcome> = match (stage, &cfg.embedder) {
            (Stage::Embed, Embedder::External(adapter)) => self.embed_external_batch(&todo, adapter)?,
            _ => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().expect("thread pool");
                pool.install(|| {
                    todo.par_iter().map(|(id, hash)| (id.clone(), hash.clone(), self.compute(id, stage, cfg))).collect()
                })
            }
        };

        // Single writer: artifacts and status updates are applied in id order.
        for (id, hash, result) in results {
            let status = match result {
                Ok(bytes) => {
                    write_atomic(&self.artifact_path(&id, stage), &bytes)?;
                    report.performed.push(id.clone());
                    StageStatus::Done { input_hash: hash }
                }
                Err(reason) => {
                    let _ = fs::remove_file(self.artifact_path(&id, stage));
                    report.failed.push((id.clone(), reason.clone()));
                    StageStatus::Failed { input_hash: hash, reason }
                }
            };
            self.index.stage_status.entry(id).or_default().insert(stage, status);
        }
        if stage == Stage::Embed {
            self.write_embedding_matrix(&cfg.embedder)?;
        }
        self.save()?;
        Ok(report)
    }

    fn compute(&self, id: &str, stage: Stage, cfg: &PipelineConfig) -> Result<Vec<u8>, String> {
        match stage {
            Stage::Extract => {
                let tree = self.package(id).map_err(|e| match e {
                    StoreError::Io { message, .. } => message,
                    other => other.to_string(),
                })?;
                let f = analyze_package(id, &tree, cfg.mode, &cfg.budget)?;
                Ok(serde_json::to_vec_pretty(&f).expect("features serialize"))
            }
            Stage::Featurize => {
                let f = self.features(id).map_err(|e| e.to_string())?;
                Ok(f.document().text.into_bytes())
            }
            Stage::Embed => {
                let Embedder::Hashed { dim } = cfg.embedder else { unreachable!("external embeddings run as a batch") };
                let text = self.document(id).map_err(|e| e.to_string())?;
                Ok(f32_bytes(&embed_hashed(id, &doc_from_text(&text), dim).vector))
            }
        }
    }

    fn embed_external_batch(
        &self,
        todo: &[(String, String)],
        adapter: &Adapter,
    ) -> Result<Vec<StageOutcome>, StoreError> {
        if todo.is_empty() {
            return Ok(Vec::new());
        }
        let docs: Vec<(String, FeatureDocument)> =
            todo.iter().map(|(id, _)| Ok((id.clone(), doc_from_text(&self.document(id)?)))).collect::<Result<_, StoreError>>()?;
        let embs: Vec<Embedding> = embed_external(&docs, adapter)?;
        Ok(todo.iter().zip(embs).map(|((id, h), e)| (id.clone(), h.clone(), Ok(f32_bytes(&e.vector)))).collect())
    }

    fn write_embedding_matrix(&self, embedder: &Embedder) -> Result<(), StoreError> {
        let ids = self.index.done_ids(Stage::Embed);
        let mut bytes = Vec::new();
        for id in &ids {
            bytes.extend(self.read_artifact(id, Stage::Embed)?);
        }
        let sidecar = EmbeddingSidecar { ids, dim: embedder.dim(), tag: embedder.tag() };
        write_atomic(&self.root.join("embeddings.f32"), &bytes)?;
        write_atomic(&self.root.join("embeddings.json"), &serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes"))
    }

    /// Corpus embedding matrix in sidecar id order.
    pub fn load_embeddings(&self) -> Result<(Vec<String>, Vec<Vec<f64>>), StoreError> {
        let side_path = self.root.join("embeddings.json");
        let text = fs::read_to_string(&side_path).map_err(io_err(&side_path))?;
        let side: EmbeddingSidecar =
            serde_json::from_str(&text).map_err(|e| StoreError::Io { path: side_path.clone(), message: e.to_string() })?;
        let mat_path = self.root.join("embeddings.f32");
        let values = f32_values(&fs::read(&mat_path).map_err(io_err(&mat_path))?);
        if side.dim == 0 || values.len() != side.ids.len() * side.dim {
            return Err(StoreError::Io { path: mat_path, message: "matrix size does not match sidecar".into() });
        }
        let rows = values.chunks(side.dim).map(<[f64]>::to_vec).collect();
        Ok((side.ids, rows))
    }

    /// PCA to `variance_target` followed by HDBSCAN; writes assignments.csv.
    pub fn cluster(&self, variance_target: f64, params: HdbscanParams) -> Result<(ClusterAssignment, ClusterSummary), StoreError> {
        let (ids, rows) = self.load_embeddings()?;
        let (model, scores) = pca_fit_transform(&rows, variance_target, false)?;
        let assignment = cluster_ids(&ids, &scores, params)?;
        let summary = ClusterSummary {
            n: ids.len(),
            components: model.components.len(),
            retained_variance: model.explained_variance_ratio.iter().sum(),
            degenerate: model.degenerate,
            clusters: assignment.cluster_count(),
            outliers: assignment.outlier_count(),
            params,
            variance_target,
        };
        write_atomic(&self.root.join("assignments.csv"), assignment.to_csv().as_bytes())?;
        write_atomic(&self.root.join("cluster.json"), &serde_json::to_vec_pretty(&summary).expect("summary serializes"))?;
        Ok((assignment, summary))
    }

    pub fn load_assignment(&self) -> Result<ClusterAssignment, StoreError> {
        let path = self.root.join("assignments.csv");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(ClusterAssignment::from_csv(&text)?)
    }
}

/// Rebuilds a document from its stored text.
pub fn doc_from_text(text: &str) -> FeatureDocument {
    FeatureDocument::from_sentences(text.split("; ").map(str::to_string))
}
