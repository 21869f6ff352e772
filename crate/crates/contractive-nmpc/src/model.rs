//! Discrete-time controlled systems with box control sets and
//! inequality-defined admissible state sets.
//!
//! A [`Model`] bundles the dynamics `x_{k+1} = f(x_k, u_k)`, the control box
//! `U = [lower, upper]`, and the admissible set `G = {x | g(x) <= 0}`.
//! Two example systems ship with the crate: a three-state nonholonomic
//! integrator and a constraint-tightened double integrator.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::contraction::{analytic_contraction_sequence, ContractionSpec};
use crate::error::{Error, Result};

/// State vector; the dimension is fixed by the owning model.
pub type StateVec = Vec<f64>;
/// Control vector; the dimension is fixed by the owning model.
pub type ControlVec = Vec<f64>;
/// Ordered sequence of controls applied front to back.
pub type ControlSequence = Vec<ControlVec>;

type DynamicsFn = Arc<dyn Fn(&[f64], &[f64]) -> StateVec + Send + Sync>;
type ConstraintFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HintFn = Arc<dyn Fn(&[f64], &ContractionSpec) -> Result<ControlSequence> + Send + Sync>;

/// Parameters of the nonholonomic example system.
///
/// The state lives in `|x1| <= rho` and the `(x2, x3)` disc of radius `b`;
/// the control bounds are `u1_max = 2*rho` and `u2_max = mu * b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonholonomicParams {
    pub rho: f64,
    pub b: f64,
    pub mu: f64,
}

impl NonholonomicParams {
    pub fn new(rho: f64, b: f64, mu: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rho must be positive, got {rho}"
            )));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParams(format!("b must be positive, got {b}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "mu must be positive, got {mu}"
            )));
        }
        Ok(Self { rho, b, mu })
    }

    /// Bound on the first control component (`2*rho`).
    pub fn u1_max(&self) -> f64 {
        2.0 * self.rho
    }

    /// Bound on the second control component (`mu * b`).
    pub fn u2_max(&self) -> f64 {
        self.mu * self.b
    }
}

/// Parameters of the constraint-tightened double integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntegratorParams {
    /// Sampling period of the forward-Euler discretization.
    pub tau: f64,
    /// Acceleration bound (the control box is `[-u_max, u_max]`).
    pub u_max: f64,
    /// Position bound (the raw corridor is `[-r_max, r_max]`).
    pub r_max: f64,
}

impl DoubleIntegratorParams {
    pub fn new(tau: f64, u_max: f64, r_max: f64) -> Result<Self> {
        for (name, v) in [("tau", tau), ("u_max", u_max), ("r_max", r_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { tau, u_max, r_max })
    }
}

/// A discrete-time controlled system.
///
/// All fields are immutable after construction; models are cheap to clone
/// and safe to share across concurrent evaluators.
#[derive(Clone)]
pub struct Model {
    name: &'static str,
    n: usize,
    m: usize,
    dynamics: DynamicsFn,
    control_lower: Vec<f64>,
    control_upper: Vec<f64>,
    constraint_map: ConstraintFn,
    constraint_dim: usize,
    state_bounds: Vec<(f64, f64)>,
    hint: Option<HintFn>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("control_lower", &self.control_lower)
            .field("control_upper", &self.control_upper)
            .finish()
    }
}

impl Model {
    /// Nonholonomic integrator:
    ///
    /// ```text
    /// x1+ = x1 + u1
    /// x2+ = x2 + u2
    /// x3+ = x3 + x1 * u2
    /// ```
    ///
    /// with `g(x) = (|x1| - rho, x2^2 + x3^2 - b^2)`. The model carries an
    /// analytic three-step contraction sequence as its hint provider,
    /// zero-padded to the requested horizon (zero control freezes the state
    /// for this system, so padding never leaves the admissible set).
    pub fn nonholonomic(p: NonholonomicParams) -> Result<Self> {
        let hint_params = p;
        let hint: HintFn = Arc::new(move |x: &[f64], spec: &ContractionSpec| {
            let mut seq = analytic_contraction_sequence(x, &hint_params)?;
            while seq.len() < spec.horizon() {
                seq.push(vec![0.0, 0.0]);
            }
            seq.truncate(spec.horizon());
            Ok(seq)
        });
        Ok(Self {
            name: "nonholonomic",
            n: 3,
            m: 2,
            dynamics: Arc::new(|x, u| vec![x[0] + u[0], x[1] + u[1], x[2] + x[0] * u[1]]),
            control_lower: vec![-p.u1_max(), -p.u2_max()],
            control_upper: vec![p.u1_max(), p.u2_max()],
            constraint_map: Arc::new(move |x| {
                vec![x[0].abs() - p.rho, x[1] * x[1] + x[2] * x[2] - p.b * p.b]
            }),
            constraint_dim: 2,
            state_bounds: vec![(-p.rho, p.rho), (-p.b, p.b), (-p.b, p.b)],
            hint: Some(hint),
        })
    }

    /// Forward-Euler double integrator `r+ = r + tau*v`, `v+ = v + tau*u`
    /// with the tightened constraint map
    ///
    /// ```text
    /// g1(x) = |x1| - r_max
    /// g2(x) = x1 + x2*tau - sign(x2) * (u_max*tau^2/2 + r_max)
    /// ```
    ///
    /// where `sign(0) = 0`. Whether the tightened set is actually
    /// one-step controlled invariant is checked empirically, not assumed.
    pub fn tightened_double_integrator(p: DoubleIntegratorParams) -> Result<Self> {
        let v_max = (2.0 * p.r_max + 0.5 * p.u_max * p.tau * p.tau) / p.tau;
        Ok(Self {
            name: "double_integrator",
            n: 2,
            m: 1,
            dynamics: Arc::new(move |x, u| vec![x[0] + p.tau * x[1], x[1] + p.tau * u[0]]),
            control_lower: vec![-p.u_max],
            control_upper: vec![p.u_max],
            constraint_map: Arc::new(move |x| {
                let brake = 0.5 * p.u_max * p.tau * p.tau + p.r_max;
                vec![
                    x[0].abs() - p.r_max,
                    x[0] + x[1] * p.tau - zero_sign(x[1]) * brake,
                ]
            }),
            constraint_dim: 2,
            state_bounds: vec![(-p.r_max, p.r_max), (-v_max, v_max)],
            hint: None,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// Control dimension.
    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn control_lower(&self) -> &[f64] {
        &self.control_lower
    }

    pub fn control_upper(&self) -> &[f64] {
        &self.control_upper
    }

    /// Axis-aligned box containing the admissible set, used for rejection
    /// sampling and solver initialization.
    pub fn state_bounds(&self) -> &[(f64, f64)] {
        &self.state_bounds
    }

    /// One step of the dynamics. `u` need not be admissible; admissibility
    /// is checked separately.
    ///
    /// Panics if the dimensions do not match the model.
    pub fn step(&self, x: &[f64], u: &[f64]) -> StateVec {
        assert_eq!(x.len(), self.n, "state dimension mismatch");
        assert_eq!(u.len(), self.m, "control dimension mismatch");
        (self.dynamics)(x, u)
    }

    /// Applies `useq` front to back and returns the visited states
    /// `(x^(1), ..., x^(q))`; the initial state is not included.
    pub fn rollout(&self, x: &[f64], useq: &[ControlVec]) -> Vec<StateVec> {
        let mut states = Vec::with_capacity(useq.len());
        let mut cur = x.to_vec();
        for u in useq {
            cur = self.step(&cur, u);
            states.push(cur.clone());
        }
        states
    }

    /// Returns `(admissible, g(x))`: admissible iff every component of the
    /// constraint map is `<= 0`, with the raw values reported verbatim.
    pub fn check_state(&self, x: &[f64]) -> (bool, Vec<f64>) {
        let g = (self.constraint_map)(x);
        let ok = g.iter().all(|&v| v <= 0.0);
        (ok, g)
    }

    /// True iff `control_lower <= u <= control_upper` componentwise.
    pub fn check_control(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(self.control_lower.iter().zip(&self.control_upper))
            .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    pub fn constraint_dim(&self) -> usize {
        self.constraint_dim
    }

    /// Analytic seed sequence for the solver, when the model provides one.
    /// Returns `None` both when no provider is wired and when the provider
    /// rejects the state.
    pub fn hint(&self, x: &[f64], spec: &ContractionSpec) -> Option<ControlSequence> {
        self.hint.as_ref().and_then(|h| h(x, spec).ok())
    }

    /// Draws one state uniformly from the admissible set by rejection
    /// sampling over [`Model::state_bounds`]. Errors after `10^6` rejections.
    pub fn sample_admissible(&self, rng: &mut ChaCha8Rng) -> Result<StateVec> {
        const MAX_REJECTIONS: u64 = 1_000_000;
        for _ in 0..MAX_REJECTIONS {
            let x: StateVec = self
                .state_bounds
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect();
            if self.check_state(&x).0 {
                return Ok(x);
            }
        }
        Err(Error::SamplingExhausted(MAX_REJECTIONS))
    }
}

/// Sign convention used by the tightened constraint map: `sign(0) = 0`.
fn zero_sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A length-`q` sequence of zero controls for `model`.
pub fn zero_sequence(model: &Model, q: usize) -> ControlSequence {
    vec![vec![0.0; model.control_dim()]; q]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn nh() -> Model {
        Model::nonholonomic(NonholonomicParams::new(4.0, 10.0, 0.05).unwrap()).unwrap()
    }

    fn di() -> Model {
        Model::tightened_double_integrator(DoubleIntegratorParams::new(0.1, 1.0, 1.0).unwrap())
            .unwrap()
    }

    #[test]
    fn nonholonomic_step_hand_evaluated() {
        let m = nh();
        let x = m.step(&[1.0, 2.0, 3.0], &[0.5, 0.1]);
        assert_eq!(x, vec![1.5, 2.1, 3.1]);
    }

    #[test]
    fn both_examples_fix_the_origin() {
        assert_eq!(nh().step(&[0.0; 3], &[0.0; 2]), vec![0.0; 3]);
        assert_eq!(di().step(&[0.0; 2], &[0.0]), vec![0.0; 2]);
    }

    #[test]
    fn double_integrator_step_is_forward_euler() {
        let m = di();
        let x = m.step(&[1.0, 2.0], &[0.5]);
        assert!((x[0] - 1.2).abs() < 1e-15);
        assert!((x[1] - 2.05).abs() < 1e-15);
    }

    #[test]
    fn empty_rollout_is_empty() {
        assert!(nh().rollout(&[1.0, 2.0, 3.0], &[]).is_empty());
    }

    #[test]
    fn rollout_of_analytic_sequence_from_worked_state() {
        // From (2, 10, 0) the analytic construction parks x1 at 0 and pushes
        // z = (10, 0) by u2 = -0.5, visiting (0,10,0), (0,9.5,0), (0,9.5,0).
        let m = nh();
        let seq = vec![vec![-2.0, 0.0], vec![0.0, -0.5], vec![0.0, 0.0]];
        let states = m.rollout(&[2.0, 10.0, 0.0], &seq);
        assert_eq!(states[0], vec![0.0, 10.0, 0.0]);
        assert_eq!(states[1], vec![0.0, 9.5, 0.0]);
        assert_eq!(states[2], vec![0.0, 9.5, 0.0]);
    }

    #[test]
    fn check_state_reports_violations_verbatim() {
        let m = nh();
        let (ok, g) = m.check_state(&[5.0, 0.0, 0.0]);
        assert!(!ok);
        assert_eq!(g[0], 1.0);

        let (ok, g) = m.check_state(&[0.0, 0.0, 0.0]);
        assert!(ok);
        assert_eq!(g, vec![-4.0, -100.0]);

        // Boundary of the disc counts as admissible.
        let (ok, g) = m.check_state(&[0.0, 10.0, 0.0]);
        assert!(ok);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn control_box_from_derived_bounds() {
        let m = nh();
        assert_eq!(m.control_upper(), &[8.0, 0.5]);
        assert!(m.check_control(&[8.0, 0.5]));
        assert!(m.check_control(&[0.0, 0.0]));
        assert!(!m.check_control(&[8.001, 0.0]));
    }

    #[test]
    fn full_cancellation_regime_bound() {
        let p = NonholonomicParams::new(4.0, 10.0, 1.0).unwrap();
        assert_eq!(p.u2_max(), 10.0);
    }

    #[test]
    fn degenerate_params_are_rejected() {
        assert!(NonholonomicParams::new(0.0, 10.0, 0.05).is_err());
        assert!(NonholonomicParams::new(4.0, -1.0, 0.05).is_err());
        assert!(DoubleIntegratorParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tightened_map_evaluated_as_printed() {
        let m = di();
        // At rest: sign(0) = 0, so g2 = x1.
        let (ok, _) = m.check_state(&[0.0, 0.0]);
        assert!(ok);
        let (_, g) = m.check_state(&[0.95, 0.0]);
        assert!(g[0] < 0.0, "admissible under the raw corridor constraint");
        assert_eq!(g[1], 0.95, "second component evaluated exactly as printed");

        let (ok, g) = m.check_state(&[1.5, 0.0]);
        assert!(!ok);
        assert_eq!(g[0], 0.5);
    }

    #[test]
    fn admissibility_implies_unrolled_bounds() {
        let m = nh();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let x = m.sample_admissible(&mut rng).unwrap();
            assert!(x[0] * x[0] <= 16.0 + 1e-12);
            assert!(x[1] * x[1] + x[2] * x[2] <= 100.0 + 1e-12);
        }
    }

    #[test]
    fn hint_rollouts_stay_admissible() {
        let m = nh();
        let spec = ContractionSpec::norm_sq(0.95, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = m.sample_admissible(&mut rng).unwrap();
            let seq = m
                .hint(&x, &spec)
                .expect("hint available on admissible states");
            assert_eq!(seq.len(), 3);
            for u in &seq {
                assert!(m.check_control(u), "hint control {u:?} outside the box");
            }
            for s in m.rollout(&x, &seq) {
                assert!(m.check_state(&s).0, "hint rollout left G at {s:?}");
            }
        }
    }

    #[test]
    #[should_panic(expected = "control dimension mismatch")]
    fn step_rejects_wrong_control_dimension() {
        nh().step(&[0.0; 3], &[0.0; 3]);
    }

    proptest! {
        #[test]
        fn rollout_composition_identity(
            x in proptest::collection::vec(-4.0f64..4.0, 3),
            u in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 0..4),
            v in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 0..4),
        ) {
            let m = nh();
            let mut joined = u.clone();
            joined.extend(v.iter().cloned());
            let full = m.rollout(&x, &joined);

            let head = m.rollout(&x, &u);
            let mid = head.last().cloned().unwrap_or_else(|| x.clone());
            let tail = m.rollout(&mid, &v);

            let mut expected = head;
            expected.extend(tail);
            prop_assert_eq!(full, expected);
        }
    }
}
