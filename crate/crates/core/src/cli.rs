//! Command-line front end over the store, similarity and analytics modules.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{
    find_infringing_clusters, find_repeat_offenders, km_estimate, label_feature_table, lifetime, logrank_test,
    parse_detection_reports, table_features, triage_detection_reports, AnalyticsError, ExtensionRecord, KmCurve,
    LogRank, SurvivalObservation, TriageCategory, VettingLabel, NTE_KEYWORDS,
};
use crate::cluster::{evaluate_pairs, ClusterError, Expectation, HdbscanParams};
use crate::embedder::{cosine, Adapter, DEFAULT_DIM};
use crate::similarity::{compare_pair, SimilarityError};
use crate::store::{write_atomic, Embedder, PipelineConfig, Stage, StageReport, Store, StoreError, TraceMode};
use crate::synth::{generate, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "extsim", version, about = "Behavioral similarity and vetting analytics for browser extensions")]
pub struct Cli {
    /// Store directory holding the index and every stage artifact.
    #[arg(long, global = true, default_value = "extsim-store")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a metadata file and a directory of packages.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        metadata: PathBuf,
    },
    /// Extract API calls and serialize feature documents.
    Analyze {
        #[arg(long, conflicts_with = "dynamic_only")]
        static_only: bool,
        #[arg(long)]
        dynamic_only: bool,
        /// Worker count; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Embed feature documents.
    Embed {
        /// Shell command speaking the JSON Lines adapter protocol.
        #[arg(long)]
        external_adapter: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Reduce with PCA and cluster with HDBSCAN.
    Cluster {
        #[arg(long, default_value_t = 0.95)]
        variance: f64,
        #[arg(long, default_value_t = 5)]
        min_cluster_size: usize,
        #[arg(long, default_value_t = 2)]
        min_samples: usize,
    },
    /// Cluster of an extension and its nearest neighbors by cosine.
    Query {
        id: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        json: bool,
    },
    /// Pairwise manual-verification criteria for two extensions.
    Compare {
        id_a: String,
        id_b: String,
        #[arg(long)]
        json: bool,
    },
    /// Write an analytics report under the output directory.
    Report {
        kind: ReportKind,
        /// JSON Lines detection reports, required by `triage`.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Defaults to `<store>/reports`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Last crawl day for censoring; defaults to the latest date in the metadata.
        #[arg(long)]
        crawl_end: Option<NaiveDate>,
        /// Rows per group in the label table.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Score the clustering against labeled pairs (CSV id_a,id_b,expected).
    EvalPairs {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write the synthetic fixture corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Infringing,
    Survival,
    Labels,
    Triage,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("{id}: {source}")]
    Similarity { id: String, source: SimilarityError },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path} line {line}: {message}")]
    PairsFormat { path: PathBuf, line: usize, message: String },
    #[error("{stage} failed for {id}: {reason}")]
    StageFailure { stage: Stage, id: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Store(e) => e.name(),
            CliError::Cluster(e) => match e {
                ClusterError::DegenerateInput(_) => "DegenerateInput",
                ClusterError::TooFewPoints { .. } => "TooFewPoints",
                ClusterError::InvalidParameter(_) => "InvalidParameter",
                ClusterError::UnknownId(_) => "UnknownId",
                ClusterError::Malformed(_) => "MalformedAssignment",
            },
            CliError::Analytics(e) => e.name(),
            CliError::Similarity { .. } => "MissingManifest",
            CliError::Io { .. } => "IoError",
            CliError::PairsFormat { .. } => "PairsFormatError",
            CliError::StageFailure { .. } => "StageFailure",
            CliError::Usage(_) => "UsageError",
            CliError::Output(_) => "OutputError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match run(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", e.name());
            e.exit_code()
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn jobs_or_default(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest { corpus, metadata } => {
            let (store, warnings) = Store::ingest(&cli.store, corpus, metadata)?;
            for w in &warnings {
                let crate::store::IngestWarning::MissingPackage(id) = w;
                writeln!(err, "warning: MissingPackage: {id}")?;
            }
            writeln!(
                out,
                "ingested {} extensions ({} versions), {} without package",
                store.index.records.len(),
                store.index.history.len(),
                store.index.missing_package.len()
            )?;
        }
        Command::Analyze { static_only, dynamic_only, jobs } => {
            let mode = match (static_only, dynamic_only) {
                (true, _) => TraceMode::StaticOnly,
                (_, true) => TraceMode::DynamicOnly,
                _ => TraceMode::Both,
            };
            let cfg = PipelineConfig { jobs: jobs_or_default(*jobs), mode, ..Default::default() };
            let mut store = Store::open(&cli.store)?;
            for stage in [Stage::Extract, Stage::Featurize] {
                let report = store.run_stage(stage, &cfg)?;
                stage_outcome(stage, &report, out, err)?;
            }
        }
        Command::Embed { external_adapter, dim, jobs } => {
            if *dim == 0 {
                return Err(CliError::Usage("--dim must be positive".into()));
            }
            let embedder = match external_adapter {
                Some(cmd) => Embedder::External(Adapter {
                    program: PathBuf::from("sh"),
                    args: vec!["-c".into(), cmd.clone()],
                    dim: *dim,
                    tag: format!("external:{cmd}"),
                }),
                None => Embedder::Hashed { dim: *dim },
            };
            let cfg = PipelineConfig { jobs: jobs_or_default(*jobs), embedder, ..Default::default() };
            let mut store = Store::open(&cli.store)?;
            let report = store.run_stage(Stage::Embed, &cfg)?;
            stage_outcome(Stage::Embed, &report, out, err)?;
        }
        Command::Cluster { variance, min_cluster_size, min_samples } => {
            if !(*variance > 0.0 && *variance <= 1.0) {
                return Err(CliError::Usage("--variance must lie in (0, 1]".into()));
            }
            let store = Store::open(&cli.store)?;
            let params = HdbscanParams { min_cluster_size: *min_cluster_size, min_samples: *min_samples };
            let (_, s) = store.cluster(*variance, params)?;
            writeln!(
                out,
                "{} extensions: {} clusters, {} outliers; {} components retain {:.4} of variance{}",
                s.n,
                s.clusters,
                s.outliers,
                s.components,
                s.retained_variance,
                if s.degenerate { " (degenerate)" } else { "" }
            )?;
            writeln!(out, "wrote {}", store.root().join("assignments.csv").display())?;
        }
        Command::Query { id, top, json } => query(&Store::open(&cli.store)?, id, *top, *json, out)?,
        Command::Compare { id_a, id_b, json } => {
            let store = Store::open(&cli.store)?;
            let (a, b) = (store.package(id_a)?, store.package(id_b)?);
            let report = compare_pair(&a, &b).map_err(|source| {
                let id = if matches!(source, SimilarityError::MissingManifest("a")) { id_a } else { id_b };
                CliError::Similarity { id: id.clone(), source }
            })?;
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
            } else {
                write!(out, "{report}")?;
            }
        }
        Command::Report { kind, detections, out: dir, crawl_end, top } => {
            let store = Store::open(&cli.store)?;
            let dir = dir.clone().unwrap_or_else(|| store.root().join("reports"));
            let written = match kind {
                ReportKind::Infringing => report_infringing(&store, &dir)?,
                ReportKind::Survival => report_survival(&store, &dir, *crawl_end)?,
                ReportKind::Labels => report_labels(&store, &dir, *top)?,
                ReportKind::Triage => {
                    let path = detections.as_ref().ok_or_else(|| CliError::Usage("report triage needs --detections FILE".into()))?;
                    report_triage(&store, &dir, path)?
                }
            };
            for line in written {
                writeln!(out, "{line}")?;
            }
        }
        Command::EvalPairs { pairs, json } => {
            let store = Store::open(&cli.store)?;
            let list = parse_pairs(pairs, &read_file(pairs)?)?;
            let (metrics, verdicts) = evaluate_pairs(&store.load_assignment()?, &list)?;
            if *json {
                let v = serde_json::json!({"metrics": metrics, "verdicts": verdicts});
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("metrics serialize"))?;
            } else {
                writeln!(out, "pairs {}", list.len())?;
                writeln!(out, "tp {} fp {} tn {} fn {}", metrics.tp, metrics.fp, metrics.tn, metrics.fn_)?;
                writeln!(out, "accuracy {:.4}", metrics.accuracy)?;
                writeln!(out, "precision {:.4}", metrics.precision)?;
                writeln!(out, "recall {:.4}", metrics.recall)?;
            }
        }
        Command::Synth { out: dir, seed } => {
            let paths = generate(*seed)
                .write(dir)
                .map_err(|e| CliError::Io { path: dir.clone(), message: e.to_string() })?;
            writeln!(out, "packages {}", paths.packages.display())?;
            writeln!(out, "metadata {}", paths.metadata.display())?;
            writeln!(out, "truth {}", paths.truth.display())?;
            writeln!(out, "pairs {}", paths.pairs.display())?;
            writeln!(out, "detections {}", paths.detections.display())?;
        }
    }
    Ok(())
}

/// Prints a stage summary; per-extension failures make the command fail.
fn stage_outcome(stage: Stage, r: &StageReport, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    writeln!(
        out,
        "{stage}: {} done, {} unchanged, {} failed, {} blocked",
        r.performed.len(),
        r.skipped.len(),
        r.failed.len(),
        r.blocked.len()
    )?;
    for (id, reason) in &r.failed {
        writeln!(err, "{stage} failed for {id}: {reason}")?;
    }
    match r.failed.first() {
        Some((id, reason)) => Err(CliError::StageFailure { stage, id: id.clone(), reason: reason.clone() }),
        None => Ok(()),
    }
}

#[derive(Debug, Serialize)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
    pub cluster: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct QueryResult {
    pub id: String,
    pub cluster: Option<usize>,
    pub members: Vec<String>,
    pub nearest: Vec<Neighbor>,
}

/// Cosine neighbors of `id` over the stored embedding matrix, best first,
/// ties broken by id.
pub fn nearest(ids: &[String], rows: &[Vec<f64>], id: &str, top: usize) -> Result<Vec<(String, f64)>, StoreError> {
    let at = ids.iter().position(|x| x == id).ok_or_else(|| StoreError::UnknownId(id.to_string()))?;
    let mut scored: Vec<(String, f64)> =
        ids.iter().zip(rows).enumerate().filter(|(i, _)| *i != at).map(|(_, (x, r))| (x.clone(), cosine(&rows[at], r))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top);
    Ok(scored)
}

fn query(store: &Store, id: &str, top: usize, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let assignment = store.load_assignment()?;
    let (ids, rows) = store.load_embeddings()?;
    let cluster = assignment.label_of(id)?;
    let members = match cluster {
        Some(c) => assignment.clusters().remove(&c).unwrap_or_default().into_iter().filter(|m| m != id).collect(),
        None => Vec::new(),
    };
    let nearest = nearest(&ids, &rows, id, top)?
        .into_iter()
        .map(|(id, similarity)| {
            let cluster = assignment.label_of(&id).ok().flatten();
            Neighbor { id, similarity, cluster }
        })
        .collect();
    let result = QueryResult { id: id.to_string(), cluster, members, nearest };
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&result).expect("query serializes"))?;
        return Ok(());
    }
    match result.cluster {
        Some(c) => writeln!(out, "{id}: cluster {c} with {} other members", result.members.len())?,
        None => writeln!(out, "{id}: outlier")?,
    }
    for n in &result.nearest {
        let c = n.cluster.map_or("outlier".to_string(), |c| format!("cluster {c}"));
        writeln!(out, "{}\t{:.6}\t{c}", n.id, n.similarity)?;
    }
    Ok(())
}

/// Reads `id_a,id_b,expected` rows; a header row and blank lines are skipped.
pub fn parse_pairs(path: &Path, text: &str) -> Result<Vec<(String, String, Expectation)>, CliError> {
    let bad = |line: usize, message: String| CliError::PairsFormat { path: path.to_path_buf(), line, message };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("id_a")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let [a, b, x] = cols[..] else {
            return Err(bad(i + 1, format!("expected 3 columns, found {}", cols.len())));
        };
        let x = match x.to_ascii_lowercase().as_str() {
            "similar" => Expectation::Similar,
            "different" => Expectation::Different,
            other => return Err(bad(i + 1, format!("expected similar or different, found {other:?}"))),
        };
        out.push((a.to_string(), b.to_string(), x));
    }
    Ok(out)
}

fn write_report(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    written.push(path.display().to_string());
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

fn report_infringing(store: &Store, dir: &Path) -> Result<Vec<String>, CliError> {
    let assignment = store.load_assignment()?;
    let stats = find_infringing_clusters(&assignment, &store.index.record_map())?;
    let records: Vec<ExtensionRecord> = store.index.records.values().cloned().collect();
    let offenders = find_repeat_offenders(&records, &stats);

    let mut csv = String::from(
        "cluster,size,vetted_count,unpublished_count,published_count,detection_rate,republished_count,publisher_count,user_sum\n",
    );
    for s in &stats {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.4},{},{},{}",
            s.cluster,
            s.size,
            s.vetted_count,
            s.unpublished_count,
            s.published_count,
            s.detection_rate,
            s.republished_count,
            s.publisher_count,
            s.user_sum
        );
    }
    let mut off = String::from("publisher,vetted_count,published_infringing_count\n");
    for (p, s) in &offenders {
        let _ = writeln!(off, "{},{},{}", csv_field(p), s.vetted_count, s.published_infringing_count);
    }
    let mut written = Vec::new();
    write_report(dir, "infringing.csv", csv.as_bytes(), &mut written)?;
    write_report(dir, "infringing.json", &to_json(&stats), &mut written)?;
    write_report(dir, "repeat_offenders.csv", off.as_bytes(), &mut written)?;
    write_report(dir, "repeat_offenders.json", &to_json(&offenders), &mut written)?;
    Ok(written)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Latest date anywhere in the metadata.
fn latest_date(records: &[ExtensionRecord]) -> Option<NaiveDate> {
    records.iter().flat_map(|r| [Some(r.publish_date), Some(r.version_release_date), r.removal_date]).flatten().max()
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    group: String,
    n: usize,
    deaths: usize,
    median: Option<u32>,
}

#[derive(Debug, Serialize)]
struct LogRankRow {
    a: String,
    b: String,
    #[serde(flatten)]
    test: LogRank,
}

#[derive(Debug, Serialize)]
struct SurvivalReport {
    crawl_end: NaiveDate,
    curves: Vec<CurveSummary>,
    logrank: Vec<LogRankRow>,
}

fn label_name(l: VettingLabel) -> &'static str {
    match l {
        VettingLabel::Malware => "malware",
        VettingLabel::PolicyViolation => "policy_violation",
        VettingLabel::MinorPolicyViolation => "minor_policy_violation",
        VettingLabel::None => "none",
    }
}

/// Lifetimes of infringing-cluster members: one curve over all of them and
/// one per vetting label, with pairwise log-rank tests between labels.
fn report_survival(store: &Store, dir: &Path, crawl_end: Option<NaiveDate>) -> Result<Vec<String>, CliError> {
    let assignment = store.load_assignment()?;
    let records = store.index.record_map();
    let stats = find_infringing_clusters(&assignment, &records)?;
    let members: BTreeSet<&str> = stats.iter().flat_map(|s| s.members.iter().map(String::as_str)).collect();
    let members: Vec<&ExtensionRecord> = members.iter().map(|id| &records[*id]).collect();
    let all: Vec<ExtensionRecord> = store.index.records.values().cloned().collect();
    let crawl_end = crawl_end.or_else(|| latest_date(&all)).ok_or(AnalyticsError::EmptyInput)?;

    let obs = |keep: &dyn Fn(&ExtensionRecord) -> bool| -> Vec<SurvivalObservation> {
        members.iter().filter(|r| keep(r)).map(|r| lifetime(r, crawl_end)).collect()
    };
    let labels = [VettingLabel::Malware, VettingLabel::PolicyViolation, VettingLabel::MinorPolicyViolation];
    let mut groups: Vec<(String, Vec<SurvivalObservation>)> = vec![("all".into(), obs(&|_| true))];
    for l in labels {
        groups.push((label_name(l).into(), obs(&|r| r.vetting_label == l)));
    }

    let mut written = Vec::new();
    let mut curves = Vec::new();
    for (name, o) in &groups {
        if o.is_empty() {
            continue;
        }
        let curve: KmCurve = km_estimate(o)?;
        write_report(dir, &format!("survival_{name}.csv"), curve.to_csv().as_bytes(), &mut written)?;
        write_report(dir, &format!("survival_{name}_plot.csv"), curve.to_plot_csv().as_bytes(), &mut written)?;
        curves.push(CurveSummary { group: name.clone(), n: o.len(), deaths: o.iter().filter(|x| x.event).count(), median: curve.median });
    }
    let mut logrank = Vec::new();
    for i in 1..groups.len() {
        for j in i + 1..groups.len() {
            let (a, b) = (&groups[i], &groups[j]);
            if a.1.is_empty() || b.1.is_empty() {
                continue;
            }
            match logrank_test(&a.1, &b.1) {
                Ok(test) => logrank.push(LogRankRow { a: a.0.clone(), b: b.0.clone(), test }),
                Err(AnalyticsError::NoDeaths) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    write_report(dir, "survival.json", &to_json(&SurvivalReport { crawl_end, curves, logrank }), &mut written)?;
    Ok(written)
}

fn report_labels(store: &Store, dir: &Path, top: usize) -> Result<Vec<String>, CliError> {
    let records: Vec<ExtensionRecord> = store.index.records.values().cloned().collect();
    let mut features = HashMap::new();
    for r in records.iter().filter(|r| r.vetting_label.is_vetted()) {
        let f = store.features(&r.id)?;
        features.insert(r.id.clone(), table_features(&f.manifest, &f.all_calls()));
    }
    let table = label_feature_table(&records, &features, &NTE_KEYWORDS);
    let mut written = Vec::new();
    write_report(dir, "labels.csv", table.to_csv(top).as_bytes(), &mut written)?;
    write_report(dir, "labels.json", &to_json(&table), &mut written)?;
    Ok(written)
}

fn report_triage(store: &Store, dir: &Path, detections: &Path) -> Result<Vec<String>, CliError> {
    let reports = parse_detection_reports(&read_file(detections)?)?;
    let malware: Vec<ExtensionRecord> =
        store.index.records.values().filter(|r| r.vetting_label == VettingLabel::Malware).cloned().collect();
    let triage = triage_detection_reports(&malware, &reports);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in triage.categories.values() {
        let k = match c {
            TriageCategory::NotFound => "not_found",
            TriageCategory::Clean => "clean",
            TriageCategory::Malicious => "malicious",
        };
        *counts.entry(k).or_default() += 1;
    }
    let mut written = Vec::new();
    write_report(dir, "triage_families.csv", triage.families_csv().as_bytes(), &mut written)?;
    write_report(dir, "triage.json", &to_json(&serde_json::json!({"counts": counts, "triage": triage})), &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = dispatch(std::iter::once("extsim").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["frobnicate"]).0, 2);
        assert_eq!(run_args(&["analyze", "--static-only", "--dynamic-only"]).0, 2);
        assert_eq!(run_args(&["cluster", "--variance", "lots"]).0, 2);
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("eval-pairs"));
    }

    #[test]
    fn module_errors_name_the_error_and_id() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().to_str().unwrap();
        let (code, _, err) = run_args(&["--store", store, "compare", "aaaa", "bbbb"]);
        assert_eq!(code, 1);
        assert!(err.contains("UnknownId") && err.contains("aaaa"), "{err}");
    }

    #[test]
    fn pairs_parsing() {
        let p = Path::new("p.csv");
        let got = parse_pairs(p, "id_a,id_b,expected\na,b,similar\n\nc,d,Different\n").unwrap();
        assert_eq!(got, vec![("a".into(), "b".into(), Expectation::Similar), ("c".into(), "d".into(), Expectation::Different)]);
        let e = parse_pairs(p, "a,b,maybe\n").unwrap_err();
        assert_eq!(e.name(), "PairsFormatError");
        assert!(parse_pairs(p, "a,b\n").is_err());
    }

    #[test]
    fn nearest_orders_by_cosine_then_id() {
        let ids: Vec<String> = ["q", "b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let got = nearest(&ids, &rows, "q", 2).unwrap();
        assert_eq!(got.iter().map(|x| x.0.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(nearest(&ids, &rows, "zz", 2).is_err());
    }
}
