//! Static and mock-dynamic API call extraction side by side. The synthetic
//! eval-obfuscated package hides its calls behind `eval`, so only the
//! dynamic tracer sees them.
//!
//! cargo run --example trace_extension -- [path/to/extension.crx]

use extsim::crx::load_package;
use extsim::manifest::{enumerate_entrypoints, parse_manifest};
use extsim::mock_tracer::{entry_sources, trace_execution, Budget};
use extsim::static_tracer::{resolve_modules, trace_static};
use extsim::synth::{generate, Family, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = match std::env::args().nth(1) {
        Some(path) => load_package(&std::fs::read(path)?)?,
        None => {
            let corpus = generate(DEFAULT_SEED);
            let ext = corpus.extensions.iter().find(|e| e.family == Some(Family::EvalObfuscated)).expect("family present");
            ext.tree.clone()
        }
    };
    let manifest = parse_manifest(tree.manifest_bytes().ok_or("no manifest.json")?)?;
    let entrypoints = enumerate_entrypoints(&manifest, &tree);
    for e in &entrypoints {
        println!("entrypoint {:?} {}", e.kind, e.path);
    }
    let graph = resolve_modules(&entrypoints, &tree);

    let st = trace_static(&graph, &tree);
    println!("\nstatic (parse coverage {:.2}):", st.coverage());
    for c in &st.calls {
        println!("  {} x{}", c.path, c.count);
    }

    let log = trace_execution(&entry_sources(&graph, &tree), &Budget::default())?;
    println!("\ndynamic ({} events, budget exhausted: {}):", log.events.len(), log.budget_exhausted);
    for c in &log.calls {
        println!("  {} x{}", c.path, c.count);
    }
    Ok(())
}
