//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with
//! `cargo test --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{profile, push_oracle_norm};
use contractive_nmpc::cli::{cmd_check, cmd_compare, cmd_simulate, cmd_verify, resolve};
use contractive_nmpc::*;

fn nh_params() -> NonholonomicParams {
    NonholonomicParams::new(4.0, 10.0, 0.05).unwrap()
}

/// Criterion 1: the reference model certifies the contraction property on
/// 1000 uniform samples of the admissible set, within a desk-scale budget.
#[test]
fn criterion_1_contraction_certification() {
    let model = Model::nonholonomic(nh_params()).unwrap();
    let spec = ContractionSpec::norm_sq(0.95, 3).unwrap();
    let cfg = SolverConfig::for_model(&model);
    let start = Instant::now();
    let report = verify_contraction(&model, &spec, &cfg, 1000, 7).unwrap();
    let elapsed = start.elapsed();
    println!(
        "criterion 1 (contraction certification): {}/{} successes, worst ratio {:.6}, {:?}",
        report.successes, report.samples, report.worst_ratio, elapsed
    );
    assert_eq!(report.successes, 1000, "every sampled state must certify");
    assert!(elapsed.as_secs() <= 60, "took {elapsed:?}, budget is 60 s");
    println!("criterion 1 (contraction certification): PASS");
}

/// Criterion 2: the analytic sequence constructor matches a 2001 x 2001
/// brute-force grid (with exact clamped inner step) within 1e-6 in the
/// achieved norm, over 100 sampled states.
#[test]
fn criterion_2_analytic_sequence_matches_grid_oracle() {
    let p = nh_params();
    let model = Model::nonholonomic(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = model.sample_admissible(&mut rng).unwrap();
        let seq = analytic_contraction_sequence(&x, &p).unwrap();
        let terminal = model.rollout(&x, &seq).pop().unwrap();
        let ours = (terminal[1] * terminal[1] + terminal[2] * terminal[2]).sqrt();
        let oracle = push_oracle_norm([x[1], x[2]], &p);
        worst = worst.max((ours - oracle).abs());
    }
    println!("criterion 2 (grid-oracle equivalence): worst deviation {worst:.3e}");
    assert!(worst <= 1e-6, "deviation {worst} above 1e-6");
    println!("criterion 2 (grid-oracle equivalence): PASS");
}

/// Criterion 3: the reference closed loop converges within 500 steps with
/// hard feasibility at every step and a non-monotone W trace.
#[test]
fn criterion_3_closed_loop_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = profile("nh_n3_l1.json", dir.path());
    let out = cmd_simulate(&cfg).unwrap();
    let r = resolve(&cfg).unwrap();

    assert_eq!(out.exit, 0);
    assert_eq!(out.log.terminated, Termination::Converged);
    assert!(out.summary.steps <= 500);
    assert!(out.summary.final_norm <= 1e-2);
    assert!((out.summary.resolved.alpha - 26691.0).abs() < 1e-6);
    assert_eq!(out.summary.resolved.z0, 98.0);

    // Hard feasibility with zero tolerance along the whole log.
    for rec in &out.log.records {
        assert!(r.model.check_state(&rec.x).0, "state {:?} left G", rec.x);
        assert!(r.model.check_control(&rec.u), "control {:?} left U", rec.u);
    }
    assert!(r.model.check_state(&out.log.final_state).0);

    let increases = out.log.w_increases(&r.spec);
    println!(
        "criterion 3 (closed-loop convergence): converged in {} steps, final |x| = {:.3e}, {} W increases",
        out.summary.steps, out.summary.final_norm, increases
    );
    assert!(increases >= 1, "W trace must not be monotone");
    println!("criterion 3 (closed-loop convergence): PASS");
}

/// Criterion 4: the full inequality suite holds on the reference log, and
/// the budget trace equals beta^c * z0 exactly.
#[test]
fn criterion_4_inequality_suite_on_reference_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = profile("nh_n3_l1.json", dir.path());
    let out = cmd_simulate(&cfg).unwrap();
    let r = resolve(&cfg).unwrap();
    let recs = &out.log.records;
    assert!(!recs.is_empty());

    // (a) the reached minimum of W sits at the end of every horizon.
    assert!(recs.iter().all(|rec| rec.ell_star == rec.q_star));

    let n = r.spec.horizon() as f64;
    let (alpha, gamma, l_bar) = (r.penalty.alpha, r.spec.gamma(), r.cost.l_bar);
    for rec in recs {
        // (b) value bound whenever z <= W(x).
        if rec.z <= rec.w {
            let bound = rec.z * n * l_bar + alpha * gamma * rec.w;
            assert!(
                rec.j_star <= bound,
                "step {}: J* {} > {}",
                rec.k,
                rec.j_star,
                bound
            );
        }
        // (c) scaled value bound whenever e > 0.
        if rec.e > 0.0 {
            let bound = 0.5 * (1.0 + gamma) * alpha * rec.w;
            assert!(
                rec.j_star <= bound,
                "step {}: J* {} > {}",
                rec.k,
                rec.j_star,
                bound
            );
        }
    }
    // (d) decrease by z Q(x+) while e stays positive.
    for pair in recs.windows(2) {
        if pair[0].e > 0.0 && pair[1].e > 0.0 {
            let slack = 1e-9 * (1.0 + pair[0].j_star.abs());
            let bound = pair[0].j_star - pair[0].z * r.cost.q(&pair[1].x) + slack;
            assert!(
                pair[1].j_star <= bound,
                "steps {}->{}: {} !<= {}",
                pair[0].k,
                pair[1].k,
                pair[1].j_star,
                bound
            );
        }
    }
    // (e) budget trace equals beta^c * z0 exactly (beta = 0.5 scales are
    // exact in binary floating point).
    let mut shrinks = 0i32;
    for rec in recs {
        assert_eq!(
            rec.z,
            r.penalty.z0 * r.penalty.beta.powi(shrinks),
            "step {}",
            rec.k
        );
        if rec.e <= 0.0 {
            shrinks += 1;
        }
    }
    // (f) and the official checker agrees end to end.
    let check = cmd_check(cfg.output.csv_path.as_ref().unwrap(), &cfg, None).unwrap();
    assert_eq!(check.exit, 0, "{:?}", check.summary.report);
    for c in &check.summary.report.checks {
        assert_eq!(c.failed, 0, "check {} failed: {:?}", c.id, c.first_failure);
    }
    println!(
        "criterion 4 (inequality suite): all checks pass over {} steps",
        check.summary.report.steps
    );
    println!("criterion 4 (inequality suite): PASS");
}

/// Criterion 5: a run with alpha = 1 (violating the penalty bound) is
/// flagged by the checker without erroring; the two value checks that
/// presuppose the bound are demoted to informational.
#[test]
fn criterion_5_negative_control_flags_weak_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = profile("nh_n3_l1_alpha1.json", dir.path());
    let sim = cmd_simulate(&cfg).unwrap();
    assert!(sim.exit == 0 || sim.exit == 2, "run itself must complete");

    let check = cmd_check(cfg.output.csv_path.as_ref().unwrap(), &cfg, None).unwrap();
    assert_ne!(check.exit, 0, "weak penalty must be flagged");
    let report = &check.summary.report;
    assert!(!report.alpha_ok);
    assert!(report.alpha_used < report.alpha_required);
    let mut permitted_failures = 0usize;
    for c in &report.checks {
        match c.id.as_str() {
            "scaled_value_bound" | "value_decrease" => {
                assert!(!c.required, "value checks must be informational here");
                permitted_failures += c.failed;
            }
            _ => assert_eq!(
                c.failed, 0,
                "check {} must still pass: {:?}",
                c.id, c.first_failure
            ),
        }
    }
    println!(
        "criterion 5 (negative control): penalty {} < required {}, {} permitted check failures",
        report.alpha_used, report.alpha_required, permitted_failures
    );
    println!("criterion 5 (negative control): PASS");
}

/// Criterion 6: with N = 5 and a shared start, the cost that penalizes
/// |x2 - x3| yields a strictly smaller mean gap than the plain one.
#[test]
fn criterion_6_stage_cost_shaping() {
    let dir = tempfile::tempdir().unwrap();
    let a = profile("nh_n5_l1.json", dir.path());
    let b = profile("nh_n5_l2.json", dir.path());
    assert_ne!(a.run.x0[1], a.run.x0[2], "start must split x2 and x3");
    let out = cmd_compare(&a, &b, Some(&dir.path().join("compare.json"))).unwrap();
    assert_eq!(out.exit, 0, "both runs must converge");
    let (ga, gb) = (
        out.summary.a.mean_gap.unwrap(),
        out.summary.b.mean_gap.unwrap(),
    );
    println!("criterion 6 (stage-cost shaping): mean|x2-x3| L1 = {ga:.4}, L2 = {gb:.4}");
    assert!(gb < ga, "L2 must shrink the gap strictly: {gb} vs {ga}");
    println!("criterion 6 (stage-cost shaping): PASS");
}

/// Criterion 7: the free-horizon and two-stage pipelines both stabilize the
/// reference profiles, with the minimum of W at the horizon end throughout.
#[test]
fn criterion_7_formulation_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["nh_n3_l1.json", "nh_n5_l1.json", "nh_n5_l2.json"] {
        for mode in [Mode::TwoStage, Mode::Full] {
            let mut cfg = profile(name, dir.path());
            cfg.run.mode = mode;
            cfg.output.csv_path = Some(dir.path().join(format!("{name}.{mode:?}.csv")));
            cfg.output.summary_path = Some(dir.path().join(format!("{name}.{mode:?}.json")));
            let out = cmd_simulate(&cfg).unwrap();
            assert_eq!(out.exit, 0, "{name} in {mode:?} mode must converge");
            assert!(out.log.records.iter().all(|r| r.ell_star == r.q_star));
            runs.push((name, mode, out.summary.steps));
        }
    }
    for (name, mode, steps) in &runs {
        println!(
            "criterion 7 (formulation equivalence): {name} {mode:?} converged in {steps} steps"
        );
    }
    println!("criterion 7 (formulation equivalence): PASS");
}

/// Criterion 8: one-step controlled invariance of the verbatim tightened
/// constraint set, audited by direct search over 1000 sampled states.
///
/// The criterion requires a success rate of at least 99%. The verbatim
/// formula does not deliver that at tau = 0.1: states moving left satisfy
/// the printed inequality only beyond the position corridor's reach, and
/// fast right-moving states outrun the one-step braking slack. The audit
/// reports the measured rate rather than hiding it.
#[test]
fn criterion_8_tightened_set_one_step_invariance() {
    let p = DoubleIntegratorParams::new(0.1, 1.0, 1.0).unwrap();
    let model = Model::tightened_double_integrator(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let total = 1000usize;
    let mut found = 0usize;
    let mut first_failures: Vec<Vec<f64>> = Vec::new();
    for _ in 0..total {
        let x = model.sample_admissible(&mut rng).unwrap();
        let ok = (0..=2000).any(|k| {
            let u = -p.u_max + k as f64 * (2.0 * p.u_max / 2000.0);
            model.check_state(&model.step(&x, &[u])).0
        });
        if ok {
            found += 1;
        } else if first_failures.len() < 3 {
            first_failures.push(x);
        }
    }
    println!(
        "criterion 8 (tightening invariance): one-step control found for {found}/{total} samples; \
         first failing states: {first_failures:?}"
    );
    assert!(
        found * 100 >= total * 99,
        "one-step invariance holds for only {found}/{total} sampled states (criterion asks >= 99%): \
         the printed tightening is not controlled-invariant at tau = 0.1"
    );
    println!("criterion 8 (tightening invariance): PASS");
}

/// Criterion 9: repeated runs with the same seed produce byte-identical
/// artifacts.
#[test]
fn criterion_9_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg_a = profile("nh_n3_l1.json", dir_a.path());
    let cfg_b = profile("nh_n3_l1.json", dir_b.path());
    cmd_simulate(&cfg_a).unwrap();
    cmd_simulate(&cfg_b).unwrap();
    let csv_a = std::fs::read(cfg_a.output.csv_path.as_ref().unwrap()).unwrap();
    let csv_b = std::fs::read(cfg_b.output.csv_path.as_ref().unwrap()).unwrap();
    assert_eq!(csv_a, csv_b, "CSV logs must be byte-identical");

    // Summaries differ only in the echoed output paths, so compare the
    // stable artifact: re-running into the same location must reproduce the
    // file byte for byte.
    cmd_simulate(&cfg_a).unwrap();
    let csv_a2 = std::fs::read(cfg_a.output.csv_path.as_ref().unwrap()).unwrap();
    let json_a = std::fs::read(cfg_a.output.summary_path.as_ref().unwrap()).unwrap();
    cmd_simulate(&cfg_a).unwrap();
    let csv_a3 = std::fs::read(cfg_a.output.csv_path.as_ref().unwrap()).unwrap();
    let json_a2 = std::fs::read(cfg_a.output.summary_path.as_ref().unwrap()).unwrap();
    assert_eq!(csv_a2, csv_a3);
    assert_eq!(json_a, json_a2, "summary JSON must be byte-identical");

    // The randomized verifier is reproducible as well.
    let mut vcfg = profile("verify_nh.json", dir_a.path());
    vcfg.output.summary_path = Some(dir_a.path().join("verify.json"));
    cmd_verify(&vcfg, 50, 7).unwrap();
    let v1 = std::fs::read(vcfg.output.summary_path.as_ref().unwrap()).unwrap();
    cmd_verify(&vcfg, 50, 7).unwrap();
    let v2 = std::fs::read(vcfg.output.summary_path.as_ref().unwrap()).unwrap();
    assert_eq!(v1, v2, "verification reports must be byte-identical");
    println!("criterion 9 (determinism): PASS");
}

/// Round-trip invariant: simulate-then-check exits 0 for every shipped
/// profile with an auto penalty weight.
#[test]
fn shipped_profiles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "nh_n3_l1.json",
        "nh_n3_l1_full.json",
        "nh_n5_l1.json",
        "nh_n5_l2.json",
    ] {
        let cfg = profile(name, dir.path());
        let sim = cmd_simulate(&cfg).unwrap();
        assert_eq!(sim.exit, 0, "{name} must converge");
        let check = cmd_check(cfg.output.csv_path.as_ref().unwrap(), &cfg, None).unwrap();
        assert_eq!(check.exit, 0, "{name}: {:?}", check.summary.report);
    }
    println!("shipped profiles: simulate -> check round trip PASS");
}

/// Certification driven through the command layer, including the two
/// contraction factors bracketing the analytic worst-case ratio.
#[test]
fn verify_command_gamma_brackets() {
    let dir = tempfile::tempdir().unwrap();
    let base = profile("verify_nh.json", dir.path());

    // gamma = 0.95 certifies.
    let out = cmd_verify(&base, 200, 7).unwrap();
    assert_eq!(out.exit, 0);

    // gamma = 0.91 still certifies: the analytic three-step construction
    // already contracts the squared norm by (1 - mu)^2 ~ 0.9025.
    let mut cfg = base.clone();
    cfg.spec.gamma = Some(0.91);
    let out = cmd_verify(&cfg, 200, 7).unwrap();
    assert_eq!(out.exit, 0, "worst ratio {:.4}", out.summary.worst_ratio);
    assert!(out.summary.worst_ratio < 0.91);

    // gamma = 0.5 does not: boundary states cannot contract that fast.
    let mut cfg = base.clone();
    cfg.spec.gamma = Some(0.5);
    let out = cmd_verify(&cfg, 200, 7).unwrap();
    assert_ne!(out.exit, 0);
    assert!(out.summary.worst_ratio > 0.5);
    println!("verify command gamma brackets: PASS");
}
