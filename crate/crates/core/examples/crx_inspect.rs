//! Lists the header and file tree of a CRX (or plain zip) package.
//!
//! cargo run --example crx_inspect -- path/to/extension.crx
//! Without an argument a synthetic package is inspected.

use extsim::crx::{load_package, parse_crx};
use extsim::synth::{generate, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => generate(DEFAULT_SEED).extensions[0].package_bytes(),
    };
    match parse_crx(&bytes) {
        Ok(pkg) => println!("CRX{} header, {} header bytes, payload at {}", pkg.header.version, pkg.header.header_length, pkg.header.payload_offset()),
        Err(e) => println!("not a CRX ({e}); reading as zip"),
    }
    let tree = load_package(&bytes)?;
    for (path, content) in tree.iter() {
        println!("{:>8}  {path}", content.len());
    }
    if let Some(m) = tree.get_text("manifest.json") {
        println!("\n{m}");
    }
    Ok(())
}
