use std::path::{Path, PathBuf};

use contractive_nmpc::cli::{load_config, ExperimentConfig};
use contractive_nmpc::NonholonomicParams;

/// Loads a shipped profile with its output artifacts redirected into `dir`.
pub fn profile(name: &str, dir: &Path) -> ExperimentConfig {
    let base = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("profiles")
        .join(name);
    let mut cfg = load_config(&base).expect("shipped profile parses");
    cfg.output.csv_path = Some(dir.join(format!("{name}.csv")));
    cfg.output.summary_path = Some(dir.join(format!("{name}.summary.json")));
    cfg
}

/// Independent brute-force oracle for the analytic push: minimizes
/// `||z + (1, s) u2||` over a 2001 x 2001 grid in `(s, u2)`, with the exact
/// clamped inner step appended for every grid column. Returns the achieved
/// norm.
pub fn push_oracle_norm(z: [f64; 2], p: &NonholonomicParams) -> f64 {
    let u2_max = p.u2_max();
    let mut best = f64::INFINITY;
    for i in 0..=2000u32 {
        let s = -p.rho + f64::from(i) * (2.0 * p.rho / 2000.0);
        for k in 0..=2000u32 {
            let u2 = -u2_max + f64::from(k) * (2.0 * u2_max / 2000.0);
            let a = z[0] + u2;
            let b = z[1] + s * u2;
            let v = a * a + b * b;
            if v < best {
                best = v;
            }
        }
        // Exact inner step: clamp of the unconstrained 1-D minimizer.
        let t = -(z[0] + s * z[1]) / (1.0 + s * s);
        let u2 = t.clamp(-u2_max, u2_max);
        let a = z[0] + u2;
        let b = z[1] + s * u2;
        let v = a * a + b * b;
        if v < best {
            best = v;
        }
    }
    best.sqrt()
}
