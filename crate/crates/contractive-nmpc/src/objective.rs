//! Stage-cost machinery: the per-step cost `L`, its control-free part
//! `Q(x) = L(x, 0)`, the cumulative cost `Phi`, the composite cost
//! `J = z * Phi + alpha * W_min`, analytic upper bounds for the shipped
//! costs, and the penalty lower bound that the convergence argument needs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contraction::{w_min, ContractionSpec};
use crate::error::{Error, Result};
use crate::model::{ControlVec, Model, NonholonomicParams};

type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type StateCostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Which of the two shipped stage costs is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageCostKind {
    L1,
    L2,
    Custom,
}

/// A stage cost `L(x, u)` together with its state-only part `Q(x) = L(x, 0)`
/// and an analytic upper bound `l_bar` over the admissible domain.
///
/// The bound is supplied analytically rather than estimated: the penalty
/// weight guarantee needs a true upper bound, not a sampled one.
#[derive(Clone)]
pub struct StageCost {
    kind: StageCostKind,
    l: CostFn,
    q: StateCostFn,
    pub l_bar: f64,
}

impl std::fmt::Debug for StageCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StageCost")
            .field("kind", &self.kind)
            .field("l_bar", &self.l_bar)
            .finish()
    }
}

impl StageCost {
    /// `L1(x, u) = ||x||^2 + 0.1 ||u||^2`.
    pub fn l1(l_bar: f64) -> Self {
        Self {
            kind: StageCostKind::L1,
            l: Arc::new(|x, u| sq_norm(x) + 0.1 * sq_norm(u)),
            q: Arc::new(sq_norm),
            l_bar,
        }
    }

    /// `L2(x, u) = 0.01 x1^2 + x2^2 + 100 (x2 - x3)^2 + 0.1 ||u||^2`.
    ///
    /// Requires a state dimension of at least 3. Note `L2(x, 0)` vanishes on
    /// the line `x1 = x2 = 0`, so it is positive semidefinite only; this is
    /// reproduced verbatim and documented in the tests.
    pub fn l2(l_bar: f64) -> Self {
        Self {
            kind: StageCostKind::L2,
            l: Arc::new(|x, u| l2_state(x) + 0.1 * sq_norm(u)),
            q: Arc::new(l2_state),
            l_bar,
        }
    }

    /// Diagonal quadratic `sum_i wx_i x_i^2 + sum_j wu_j u_j^2` with an
    /// explicit upper bound.
    pub fn quadratic(
        state_weights: Vec<f64>,
        control_weights: Vec<f64>,
        l_bar: f64,
    ) -> Result<Self> {
        if state_weights
            .iter()
            .chain(&control_weights)
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::InvalidParams(
                "cost weights must be finite and nonnegative".into(),
            ));
        }
        let sw = state_weights.clone();
        let swq = state_weights;
        let cw = control_weights;
        Ok(Self {
            kind: StageCostKind::Custom,
            l: Arc::new(move |x, u| weighted_sq(x, &sw) + weighted_sq(u, &cw)),
            q: Arc::new(move |x| weighted_sq(x, &swq)),
            l_bar,
        })
    }

    pub fn kind(&self) -> StageCostKind {
        self.kind
    }

    /// Evaluates `L(x, u)`.
    pub fn l(&self, x: &[f64], u: &[f64]) -> f64 {
        (self.l)(x, u)
    }

    /// Evaluates the state-only part `Q(x) = L(x, 0)`.
    pub fn q(&self, x: &[f64]) -> f64 {
        (self.q)(x)
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn l2_state(x: &[f64]) -> f64 {
    let d = x[1] - x[2];
    0.01 * x[0] * x[0] + x[1] * x[1] + 100.0 * d * d
}

fn weighted_sq(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| b * a * a).sum()
}

/// Analytic upper bounds of the shipped stage costs over the nonholonomic
/// admissible domain:
///
/// ```text
/// L1: rho^2 + 2 b^2 + 0.1 [4 rho^2 + (mu b)^2]
/// L2: 0.01 rho^2 + 401 b^2 + 0.1 [4 rho^2 + (mu b)^2]
/// ```
pub fn l_bar_nonholonomic(which: StageCostKind, p: &NonholonomicParams) -> f64 {
    let control_part = 0.1 * (4.0 * p.rho * p.rho + (p.mu * p.b) * (p.mu * p.b));
    match which {
        StageCostKind::L1 => p.rho * p.rho + 2.0 * p.b * p.b + control_part,
        StageCostKind::L2 => 0.01 * p.rho * p.rho + 401.0 * p.b * p.b + control_part,
        StageCostKind::Custom => panic!("no analytic bound for custom costs"),
    }
}

/// Smallest penalty weight `2 N l_bar / (1 - gamma)` under which the
/// closed-loop convergence argument goes through.
///
/// Panics if `gamma >= 1`.
pub fn alpha_min(horizon: usize, l_bar: f64, gamma: f64) -> f64 {
    assert!(
        gamma < 1.0,
        "contraction factor must be below 1, got {gamma}"
    );
    assert!(horizon >= 1, "horizon must be positive");
    2.0 * horizon as f64 * l_bar / (1.0 - gamma)
}

/// Cumulative stage cost of the first `q` steps of the rollout of `useq`
/// from `x`.
///
/// Panics unless `1 <= q <= useq.len()`.
pub fn phi(model: &Model, cost: &StageCost, x: &[f64], useq: &[ControlVec], q: usize) -> f64 {
    assert!(
        q >= 1 && q <= useq.len(),
        "q={q} out of range 1..={}",
        useq.len()
    );
    let mut total = 0.0;
    let mut cur = x.to_vec();
    for u in &useq[..q] {
        cur = model.step(&cur, u);
        total += cost.l(&cur, u);
    }
    total
}

/// Composite cost `z * Phi(x, u, q) + alpha * W_min(x, u, q)`.
#[allow(clippy::too_many_arguments)]
pub fn j_cost(
    model: &Model,
    cost: &StageCost,
    spec: &ContractionSpec,
    x: &[f64],
    z: f64,
    useq: &[ControlVec],
    q: usize,
    alpha: f64,
) -> f64 {
    assert!(z >= 0.0, "budget must be nonnegative");
    let (w_under, _) = w_min(spec, model, x, useq, q);
    z * phi(model, cost, x, useq, q) + alpha * w_under
}

/// Controller penalty settings: terminal-contraction weight, budget shrink
/// factor and initial budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub beta: f64,
    pub z0: f64,
}

impl PenaltyConfig {
    pub fn new(alpha: f64, beta: f64, z0: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        if !(beta.is_finite() && beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParams(format!(
                "beta must lie in (0,1), got {beta}"
            )));
        }
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "z0 must be positive, got {z0}"
            )));
        }
        Ok(Self { alpha, beta, z0 })
    }
}
