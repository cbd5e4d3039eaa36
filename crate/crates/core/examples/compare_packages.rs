//! Pairwise manual-verification criteria: manifest key overlap, shared
//! unique values, file tree overlap and identical sources.
//!
//! cargo run --example compare_packages -- [a.crx b.crx]

use extsim::crx::load_package;
use extsim::similarity::compare_pair;
use extsim::synth::{generate, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs = if let [a, b] = &args[..] {
        vec![("given pair", load_package(&std::fs::read(a)?)?, load_package(&std::fs::read(b)?)?)]
    } else {
        let c = generate(DEFAULT_SEED);
        let e = &c.extensions;
        vec![("same family", e[0].tree.clone(), e[1].tree.clone()), ("different families", e[0].tree.clone(), e[10].tree.clone())]
    };
    for (title, a, b) in pairs {
        println!("== {title}");
        print!("{}", compare_pair(&a, &b)?);
    }
    Ok(())
}
