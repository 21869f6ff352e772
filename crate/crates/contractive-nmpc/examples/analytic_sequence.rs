//! The analytic three-step contraction seed for the nonholonomic system:
//! park x1 at a chosen value, push (x2, x3) along the coupled direction
//! (1, x1) with one u2, then return x1 to zero.
//!
//! The seed is what makes the solver's guarantees unconditional on this
//! model: it is injected as a candidate into every solve.

use contractive_nmpc::*;

fn main() -> Result<()> {
    let params = NonholonomicParams::new(4.0, 10.0, 0.05)?;
    let model = Model::nonholonomic(params)?;
    let spec = ContractionSpec::norm_sq(0.95, 3)?;

    let starts: [[f64; 3]; 4] = [
        [2.0, 10.0, 0.0], // boundary of the disc, worst-case direction
        [0.0, 0.0, 10.0], // x3 reachable only through the coupling
        [3.0, 8.0, -5.0], // generic state
        [0.1, 0.05, 0.0], // near the origin: exact cancellation
    ];

    for x in &starts {
        let seq = analytic_contraction_sequence(x, &params)?;
        let states = model.rollout(x, &seq);
        let terminal_w = spec.w(states.last().unwrap());
        println!("x0 = {x:?}, W = {}", spec.w(x));
        for (u, s) in seq.iter().zip(&states) {
            println!(
                "   u = [{:>8.4}, {:>8.4}] -> x = [{:>8.4}, {:>8.4}, {:>8.4}]  W = {:.4}",
                u[0],
                u[1],
                s[0],
                s[1],
                s[2],
                spec.w(s)
            );
        }
        println!(
            "   terminal W = {terminal_w:.4} <= (1 - mu) W(x0) = {:.4}\n",
            (1.0 - params.mu) * spec.w(x)
        );
    }
    Ok(())
}
