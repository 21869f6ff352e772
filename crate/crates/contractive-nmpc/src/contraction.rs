//! The contraction triple `(W, gamma, N)`, the finite-horizon minimum of `W`
//! along a predicted trajectory, the analytic contraction-sequence
//! constructor for the nonholonomic example, and randomized certification of
//! the contraction property over the admissible set.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ControlVec, Model, NonholonomicParams, StateVec};
use crate::objective::StageCost;
use crate::solver::{derive_seed, solve_fixed_horizon, SolverConfig};

type WFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A positive definite map `W`, a contraction factor `gamma` in `(0, 1)` and
/// a prediction horizon `N`: the claim bound to a model is that from every
/// admissible state some admissible `N`-step sequence drives the minimum of
/// `W` along the trajectory to at most `gamma * W(x)`.
#[derive(Clone)]
pub struct ContractionSpec {
    w: WFn,
    gamma: f64,
    horizon: usize,
}

impl std::fmt::Debug for ContractionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContractionSpec")
            .field("gamma", &self.gamma)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ContractionSpec {
    /// Builds a spec from an arbitrary map. `w` must be positive definite
    /// with `w(0) = 0`; that is spot-checked by the test suite, not enforced
    /// here.
    pub fn new(w: WFn, gamma: f64, horizon: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in (0,1), got {gamma}"
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidParams("horizon must be at least 1".into()));
        }
        Ok(Self { w, gamma, horizon })
    }

    /// The default contraction map `W(x) = ||x||^2`.
    pub fn norm_sq(gamma: f64, horizon: usize) -> Result<Self> {
        Self::new(Arc::new(|x| x.iter().map(|v| v * v).sum()), gamma, horizon)
    }

    pub fn w(&self, x: &[f64]) -> f64 {
        (self.w)(x)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Minimum of `W` over the first `q` states of the rollout of `useq` from
/// `x`, together with the smallest 1-based index attaining it.
///
/// Panics unless `1 <= q <= useq.len()`.
pub fn w_min(
    spec: &ContractionSpec,
    model: &Model,
    x: &[f64],
    useq: &[ControlVec],
    q: usize,
) -> (f64, usize) {
    assert!(
        q >= 1 && q <= useq.len(),
        "q={q} out of range 1..={}",
        useq.len()
    );
    let mut cur = x.to_vec();
    let mut best = f64::INFINITY;
    let mut ell = 0usize;
    for (i, u) in useq[..q].iter().enumerate() {
        cur = model.step(&cur, u);
        let w = spec.w(&cur);
        if w < best {
            best = w;
            ell = i + 1;
        }
    }
    (best, ell)
}

/// Analytic three-step contraction sequence for the nonholonomic system.
///
/// Writing `z = (x2, x3)`, the sequence parks `x1` at a chosen value `x1*`,
/// pushes `z` along the direction `(1, x1*)` by a single `u2*`, then returns
/// `x1` to zero:
///
/// ```text
/// { (x1* - x1, 0), (0, u2*), (-x1*, 0) }
/// ```
///
/// `(x1*, u2*)` minimize `||z + (1, x1*) u2*||^2` over the boxes
/// `|x1*| <= rho`, `|u2*| <= u2_max`. For fixed `x1*` the optimal push is
/// the clamp of `-(z . d) / ||d||^2` with `d = (1, x1*)`; the outer 1-D
/// problem is solved by a 257-point grid on `[-rho, rho]` followed by
/// golden-section refinement to a bracket of width 1e-10.
pub fn analytic_contraction_sequence(x: &[f64], p: &NonholonomicParams) -> Result<ControlVecSeq> {
    assert_eq!(x.len(), 3, "state dimension mismatch");
    let in_g = x[0].abs() <= p.rho && x[1] * x[1] + x[2] * x[2] <= p.b * p.b;
    if !in_g {
        return Err(Error::InadmissibleState(x.to_vec()));
    }

    let z = [x[1], x[2]];
    let (x1s, u2s, _) = minimize_push(&z, p);
    let x1s = if x1s == 0.0 { 0.0 } else { x1s };
    let back = if x1s == 0.0 { 0.0 } else { -x1s };

    Ok(vec![vec![x1s - x[0], 0.0], vec![0.0, u2s], vec![back, 0.0]])
}

type ControlVecSeq = Vec<ControlVec>;

/// Exact inner step: for a fixed `x1*` the objective is a 1-D convex
/// quadratic in `u2`, so the clamped unconstrained minimizer is optimal.
/// Returns `(u2*, ||z + d u2*||^2)`.
pub fn clamped_push(z: &[f64; 2], x1s: f64, u2_max: f64) -> (f64, f64) {
    let denom = 1.0 + x1s * x1s;
    let t = -(z[0] + x1s * z[1]) / denom;
    let u2 = t.clamp(-u2_max, u2_max);
    let a = z[0] + u2;
    let b = z[1] + x1s * u2;
    (u2, a * a + b * b)
}

/// Outer 1-D minimization over `x1*`. `x1* = 0` is evaluated first and ties
/// are broken by strict improvement, so a zero objective keeps the all-zero
/// controls exactly.
fn minimize_push(z: &[f64; 2], p: &NonholonomicParams) -> (f64, f64, f64) {
    let u2_max = p.u2_max();
    let mut best_s = 0.0;
    let (mut best_u2, mut best_v) = clamped_push(z, 0.0, u2_max);

    let consider = |s: f64, best_s: &mut f64, best_u2: &mut f64, best_v: &mut f64| {
        let (u2, v) = clamped_push(z, s, u2_max);
        if v < *best_v {
            *best_v = v;
            *best_u2 = u2;
            *best_s = s;
        }
    };

    const GRID: usize = 257;
    let spacing = 2.0 * p.rho / (GRID - 1) as f64;
    for i in 0..GRID {
        let s = -p.rho + i as f64 * spacing;
        consider(s, &mut best_s, &mut best_u2, &mut best_v);
    }

    // Golden-section refinement of the bracket around the grid winner.
    let mut lo = (best_s - spacing).max(-p.rho);
    let mut hi = (best_s + spacing).min(p.rho);
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = clamped_push(z, c, u2_max).1;
    let mut fd = clamped_push(z, d, u2_max).1;
    consider(c, &mut best_s, &mut best_u2, &mut best_v);
    consider(d, &mut best_s, &mut best_u2, &mut best_v);
    while hi - lo > 1e-10 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = clamped_push(z, c, u2_max).1;
            consider(c, &mut best_s, &mut best_u2, &mut best_v);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = clamped_push(z, d, u2_max).1;
            consider(d, &mut best_s, &mut best_u2, &mut best_v);
        }
    }

    (best_s, best_u2, best_v)
}

/// Outcome of certifying the contraction property at a single state.
#[derive(Debug, Clone)]
pub struct StateCertificate {
    pub w_x: f64,
    pub w_under: f64,
    /// `W_min / W(x)`, defined as 0 at the origin.
    pub ratio: f64,
    pub feasible: bool,
    pub success: bool,
}

/// Runs the horizon-`N` minimum-contraction solve at `x` and checks whether
/// an admissible trajectory reaches `W_min <= gamma * W(x)`.
pub fn certify_state(
    model: &Model,
    spec: &ContractionSpec,
    cfg: &SolverConfig,
    x: &[f64],
) -> StateCertificate {
    // Phi is weighted by z = 0 here, so the stage cost never enters.
    let cost = StageCost::l1(1.0);
    let mut candidates = Vec::new();
    if let Some(h) = model.hint(x, spec) {
        candidates.push(h);
    }
    let res = solve_fixed_horizon(
        model,
        &cost,
        spec,
        x,
        0.0,
        spec.horizon(),
        1.0,
        &candidates,
        cfg,
    );
    let w_x = spec.w(x);
    let ratio = if w_x > 0.0 {
        res.w_under_star / w_x
    } else {
        0.0
    };
    StateCertificate {
        w_x,
        w_under: res.w_under_star,
        ratio,
        feasible: res.feasible,
        success: res.feasible && res.w_under_star <= spec.gamma() * w_x,
    }
}

/// Aggregate of a randomized contraction certification run.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub samples: usize,
    pub successes: usize,
    /// Largest observed `W_min / W(x)` over the samples.
    pub worst_ratio: f64,
    /// Sample attaining `worst_ratio`.
    pub worst_state: StateVec,
    pub seed: u64,
}

/// Certifies the contraction property on `samples` states drawn uniformly
/// from the admissible set. Deterministic for a fixed seed: sample `i` uses
/// RNG stream `i` and a solver seed derived from `(seed, i)`.
///
/// Panics if `samples == 0`.
pub fn verify_contraction(
    model: &Model,
    spec: &ContractionSpec,
    cfg: &SolverConfig,
    samples: usize,
    seed: u64,
) -> Result<ContractionReport> {
    assert!(samples >= 1, "at least one sample is required");
    let mut successes = 0usize;
    let mut worst_ratio = -1.0f64;
    let mut worst_state = vec![0.0; model.state_dim()];
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let x = model.sample_admissible(&mut rng)?;
        let cert = certify_state(model, spec, &cfg.with_seed(derive_seed(seed, i as u64)), &x);
        if cert.success {
            successes += 1;
        }
        if cert.ratio > worst_ratio {
            worst_ratio = cert.ratio;
            worst_state = x;
        }
    }
    Ok(ContractionReport {
        samples,
        successes,
        worst_ratio: worst_ratio.max(0.0),
        worst_state,
        seed,
    })
}
