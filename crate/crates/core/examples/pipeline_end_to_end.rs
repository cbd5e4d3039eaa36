//! The whole pipeline through the store: ingest, extract, featurize, embed,
//! cluster, pair evaluation and the infringing-cluster table.

use extsim::analytics::find_infringing_clusters;
use extsim::cli::parse_pairs;
use extsim::cluster::{evaluate_pairs, HdbscanParams};
use extsim::store::{PipelineConfig, Stage, Store};
use extsim::synth::{generate, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("extsim-e2e-{}", std::process::id()));
    let paths = generate(DEFAULT_SEED).write(&dir.join("corpus"))?;
    let (mut store, _) = Store::ingest(dir.join("store"), &paths.packages, &paths.metadata)?;
    let cfg = PipelineConfig::default();
    for stage in [Stage::Extract, Stage::Featurize, Stage::Embed] {
        let r = store.run_stage(stage, &cfg)?;
        println!("{stage}: {} done, {} failed", r.performed.len(), r.failed.len());
    }
    let (assignment, summary) = store.cluster(0.95, HdbscanParams::default())?;
    println!("{} clusters, {} outliers, {} components", summary.clusters, summary.outliers, summary.components);

    let pairs = parse_pairs(&paths.pairs, &std::fs::read_to_string(&paths.pairs)?)?;
    let (m, _) = evaluate_pairs(&assignment, &pairs)?;
    println!("pairs: accuracy {:.3} precision {:.3} recall {:.3}", m.accuracy, m.precision, m.recall);

    for s in find_infringing_clusters(&assignment, &store.index.record_map())? {
        println!(
            "cluster {}: size {}, vetted {}, detection rate {:.2}, republished {}",
            s.cluster, s.size, s.vetted_count, s.detection_rate, s.republished_count
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
