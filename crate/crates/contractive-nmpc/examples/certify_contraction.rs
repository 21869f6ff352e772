//! Randomized certification of the contraction property: from every sampled
//! admissible state, some admissible 3-step sequence must drive the minimum
//! of W = ||x||^2 below gamma * W(x).
//!
//! For this model the property provably holds with gamma = 1 - mu; the
//! certifier also reports the worst observed ratio, which reveals the
//! sharper squared-norm factor (1 - mu)^2.

use contractive_nmpc::*;

fn main() -> Result<()> {
    let params = NonholonomicParams::new(4.0, 10.0, 0.05)?;
    let model = Model::nonholonomic(params)?;
    let solver = SolverConfig::for_model(&model);

    for gamma in [0.95, 0.91, 0.5] {
        let spec = ContractionSpec::norm_sq(gamma, 3)?;
        let report = verify_contraction(&model, &spec, &solver, 1000, 7)?;
        println!(
            "gamma = {gamma:<5}: {:>4}/{} states certified, worst W-ratio {:.6} at {:?}",
            report.successes, report.samples, report.worst_ratio, report.worst_state
        );
    }
    println!();
    println!("gamma = 1 - mu = 0.95 certifies everywhere, and so does anything above");
    println!("the squared worst-case ratio (1 - mu)^2 = 0.9025; gamma = 0.5 is out of reach");
    println!("for boundary states, and the report shows the state that proves it.");
    Ok(())
}
