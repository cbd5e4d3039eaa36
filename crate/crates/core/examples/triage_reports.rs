//! Detection-report triage of the synthetic malware-labeled extensions.

use extsim::analytics::{parse_detection_reports, triage_detection_reports, VettingLabel};
use extsim::store::sha256_hex;
use extsim::synth::{generate, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(DEFAULT_SEED);
    let reports = parse_detection_reports(&corpus.detection_reports())?;
    let malware: Vec<_> = corpus
        .extensions
        .iter()
        .filter(|e| e.record.vetting_label == VettingLabel::Malware)
        .map(|e| {
            let mut r = e.record.clone();
            r.sha256 = Some(sha256_hex(&e.package_bytes()));
            r
        })
        .collect();
    let triage = triage_detection_reports(&malware, &reports);
    for (id, cat) in &triage.categories {
        println!("{id} {cat:?}");
    }
    print!("\n{}", triage.families_csv());
    Ok(())
}
