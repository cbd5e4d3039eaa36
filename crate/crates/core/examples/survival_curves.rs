//! Kaplan-Meier curves and a log-rank test over two small cohorts.

use extsim::analytics::{km_estimate, logrank_test, SurvivalObservation as Obs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Days from release to takedown; censored items were still listed at crawl end.
    let fast = [Obs::death(12), Obs::death(30), Obs::death(30), Obs::death(45), Obs::censored(60), Obs::death(90)];
    let slow = [Obs::death(200), Obs::censored(250), Obs::death(400), Obs::death(610), Obs::censored(700), Obs::censored(700)];
    for (name, obs) in [("fast", &fast[..]), ("slow", &slow[..])] {
        let curve = km_estimate(obs)?;
        println!("{name}: median {:?}", curve.median);
        print!("{}", curve.to_plot_csv());
    }
    let lr = logrank_test(&fast, &slow)?;
    println!("log-rank chi2 {:.3}, p {:.5}", lr.chi_square, lr.p_value);
    Ok(())
}
