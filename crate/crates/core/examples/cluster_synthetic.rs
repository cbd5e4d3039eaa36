//! PCA plus HDBSCAN over the synthetic corpus, compared with its ground truth.

use std::collections::BTreeMap;

use extsim::cluster::{hdbscan, pca_fit_transform, HdbscanParams};
use extsim::embedder::{embed_hashed, DEFAULT_DIM};
use extsim::mock_tracer::Budget;
use extsim::store::{analyze_package, TraceMode};
use extsim::synth::{generate, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(DEFAULT_SEED);
    let mut rows = Vec::new();
    for ext in &corpus.extensions {
        let doc = analyze_package(&ext.id, &ext.tree, TraceMode::Both, &Budget::default())?.document();
        rows.push(embed_hashed(&ext.id, &doc, DEFAULT_DIM).vector);
    }
    let (model, scores) = pca_fit_transform(&rows, 0.95, false)?;
    let retained: f64 = model.explained_variance_ratio.iter().sum();
    println!("{} components retain {retained:.4} of variance", model.components.len());

    let labels = hdbscan(&scores, HdbscanParams::default())?;
    let mut table: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (ext, label) in corpus.extensions.iter().zip(&labels) {
        let truth = ext.family.map_or("singleton".to_string(), |f| f.name().to_string());
        let got = label.map_or("outlier".to_string(), |l| format!("cluster {l}"));
        *table.entry((truth, got)).or_default() += 1;
    }
    for ((truth, got), n) in table {
        println!("{truth:<16} -> {got:<10} {n}");
    }
    Ok(())
}
