//! Feature documents and hashed embeddings for a few synthetic extensions,
//! with their pairwise cosine similarities.

use extsim::embedder::{cosine, embed_hashed, DEFAULT_DIM};
use extsim::store::{analyze_package, TraceMode};
use extsim::mock_tracer::Budget;
use extsim::synth::{generate, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(DEFAULT_SEED);
    // Two members of the first family and one of the second.
    let picks = [&corpus.extensions[0], &corpus.extensions[1], &corpus.extensions[10]];
    let mut vectors = Vec::new();
    for ext in picks {
        let f = analyze_package(&ext.id, &ext.tree, TraceMode::Both, &Budget::default())?;
        let doc = f.document();
        println!("{} ({:?}), {} tokens:\n  {}\n", ext.id, ext.family.map(|f| f.name()), doc.token_count(), doc.text);
        vectors.push(embed_hashed(&ext.id, &doc, DEFAULT_DIM).vector);
    }
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            println!("cosine({i}, {j}) = {:.4}", cosine(&vectors[i], &vectors[j]));
        }
    }
    Ok(())
}
