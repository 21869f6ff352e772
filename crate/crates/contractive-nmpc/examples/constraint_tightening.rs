//! Audits the tightened double-integrator constraint set for one-step
//! controlled invariance: from states satisfying the tightened map, does
//! some admissible acceleration keep the successor inside the set?
//!
//! The tightened map is implemented exactly as specified (sign(0) = 0).
//! The audit shows it is NOT one-step invariant at tau = 0.1: left-moving
//! admissible states already sit past the reach of the position corridor,
//! and fast right-moving states outrun the one-step braking slack
//! u_max * tau^2. The audit reports the failure geometry instead of hiding
//! it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use contractive_nmpc::*;

fn main() -> Result<()> {
    let p = DoubleIntegratorParams::new(0.1, 1.0, 1.0)?;
    let model = Model::tightened_double_integrator(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    let total = 1000;
    let mut found = 0usize;
    let mut failures: Vec<Vec<f64>> = Vec::new();
    for _ in 0..total {
        let x = model.sample_admissible(&mut rng)?;
        let ok = (0..=2000).any(|k| {
            let u = -p.u_max + k as f64 * (2.0 * p.u_max / 2000.0);
            model.check_state(&model.step(&x, &[u])).0
        });
        if ok {
            found += 1;
        } else if failures.len() < 5 {
            failures.push(x);
        }
    }

    println!("one-step admissible control found for {found}/{total} sampled states");
    println!();
    println!("sample states with NO admissible one-step control:");
    for x in &failures {
        let (_, g) = model.check_state(x);
        println!(
            "  x = [{:>7.4}, {:>9.4}]   g(x) = [{:>7.4}, {:>7.4}]",
            x[0], x[1], g[0], g[1]
        );
    }
    println!();
    println!("why they fail:");
    println!(" - for velocity < 0 the tightened inequality admits only states whose");
    println!("   next position already lies beyond the corridor bound, so the raw");
    println!("   position constraint is violated one step later for every control;");
    println!(" - for velocity > 0 the set allows speeds up to (2 r_max)/tau, but one");
    println!("   braking step only buys u_max * tau^2 of slack in the lookahead term.");
    println!();
    println!("conclusion: the printed tightening needs tau^2 >= 4 r_max / u_max to be");
    println!("self-consistent in one step; at tau = 0.1 it is an audit target, not an");
    println!("invariant set.");
    Ok(())
}
