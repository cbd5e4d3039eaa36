#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;

use extsim::cluster::{ClusterAssignment, HdbscanParams};
use extsim::store::{PipelineConfig, Stage, Store};
use extsim::synth::{generate, SynthCorpus, SynthPaths, DEFAULT_SEED};

/// Adjusted Rand Index; every outlier counts as its own singleton class.
pub fn adjusted_rand_index(a: &[Option<usize>], b: &[Option<usize>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let relabel = |xs: &[Option<usize>]| -> Vec<i64> {
        xs.iter().enumerate().map(|(i, x)| x.map_or(-1 - i as i64, |v| v as i64)).collect()
    };
    let (a, b) = (relabel(a), relabel(b));
    let mut table: HashMap<(i64, i64), u64> = HashMap::new();
    let mut ra: HashMap<i64, u64> = HashMap::new();
    let mut rb: HashMap<i64, u64> = HashMap::new();
    for i in 0..n {
        *table.entry((a[i], b[i])).or_default() += 1;
        *ra.entry(a[i]).or_default() += 1;
        *rb.entry(b[i]).or_default() += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sa: f64 = ra.values().map(|&v| c2(v)).sum();
    let sb: f64 = rb.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(n as u64);
    let max = (sa + sb) / 2.0;
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

pub struct PipelineRun {
    pub corpus: SynthCorpus,
    pub paths: SynthPaths,
    pub store: Store,
    pub assignment: ClusterAssignment,
}

/// Generates the fixture corpus under `dir` and runs every stage with defaults.
pub fn run_pipeline(dir: &Path, jobs: usize) -> PipelineRun {
    let corpus = generate(DEFAULT_SEED);
    let paths = corpus.write(&dir.join("corpus")).unwrap();
    let (mut store, warnings) = Store::ingest(dir.join("store"), &paths.packages, &paths.metadata).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let cfg = PipelineConfig { jobs, ..Default::default() };
    for stage in [Stage::Extract, Stage::Featurize, Stage::Embed] {
        let r = store.run_stage(stage, &cfg).unwrap();
        assert!(r.failed.is_empty(), "{stage}: {:?}", r.failed);
    }
    let (assignment, _) = store.cluster(0.95, HdbscanParams::default()).unwrap();
    PipelineRun { corpus, paths, store, assignment }
}

/// Assignment labels reordered to the corpus' extension order.
pub fn labels_in_corpus_order(run: &PipelineRun) -> Vec<Option<usize>> {
    run.corpus.ids().iter().map(|id| run.assignment.label_of(id).unwrap()).collect()
}
