//! Gradient-based optimization of the THz field: maximize the projection of
//! the final state onto a target state over a fixed horizon.
//!
//! The field is piecewise constant on the propagation grid, the forward map
//! uses the same midpoint-exponential stepper as [`crate::dynamics`], and the
//! gradient is the exact derivative of the discretized fidelity, assembled by
//! a backward (costate) sweep with the exact Fréchet derivative of each step
//! exponential. First-order ascent with a backtracking line search keeps the
//! fidelity history monotone.


use num_complex::Complex64;
use thiserror::Error;

use crate::basis::RotorBasis;
use crate::dynamics::{RotorState, StepEngine};
use crate::error::{Result, RotorError};
use crate::pulses::{default_guess_pulse, PulseSequence, PulseSpec};
use crate::targets::TargetState;
use crate::units::MoleculeParams;

/// Propagation margin above the target truncation when none is given.
const DEFAULT_JCAP_MARGIN: u32 = 4;
/// Armijo sufficient-increase constant.
const ARMIJO_C1: f64 = 1e-4;
/// Relative step-size floor before the line search gives up.
const STEP_UNDERFLOW: f64 = 1e-16;

/// One field-optimization problem. The initial state is |0,0⟩.
#[derive(Debug, Clone)]
pub struct OctProblem {
    pub params: MoleculeParams,
    pub target: TargetState,
    /// Control horizon (a.u. of time); the default is one rotational period.
    pub horizon: f64,
    /// Number of piecewise-constant field samples over the horizon.
    pub steps: usize,
    pub guess: PulseSpec,
    /// Optional hard bound on |E| (a.u.), enforced by clipping.
    pub field_bound: Option<f64>,
    /// Fluence-penalty weight λ ≥ 0; subtracts λ·ΣE²·dt from the ascent
    /// objective. Zero by default.
    pub penalty: f64,
    /// Truncation of the propagation block (must leave a few j of headroom
    /// above anything the fields populate).
    pub j_cap: u32,
    pub target_fidelity: f64,
    pub max_iterations: usize,
}

impl OctProblem {
    pub fn new(params: MoleculeParams, target: TargetState) -> Result<Self> {
        let t_per = params.rotational_period();
        let guess = default_guess_pulse(t_per, params.b)?;
        let j_cap = target.basis.j_cap() + DEFAULT_JCAP_MARGIN;
        Ok(Self {
            params,
            target,
            horizon: t_per,
            steps: 4096,
            guess,
            field_bound: None,
            penalty: 0.0,
            j_cap,
            target_fidelity: 0.99,
            max_iterations: 5000,
        })
    }

    pub fn with_steps(mut self, steps: usize) -> Result<Self> {
        if steps < 256 {
            return Err(RotorError::InvalidInput(format!(
                "need at least 256 field samples, got {steps}"
            )));
        }
        self.steps = steps;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_j_cap(mut self, j_cap: u32) -> Result<Self> {
        if j_cap < self.target.basis.j_cap() + 1 {
            return Err(RotorError::InvalidInput(format!(
                "propagation truncation {j_cap} leaves no room above the target (j_max = {})",
                self.target.basis.j_cap()
            )));
        }
        self.j_cap = j_cap;
        Ok(self)
    }

    pub fn with_guess(mut self, guess: PulseSpec) -> Self {
        self.guess = guess;
        self
    }

    pub fn with_field_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "field bound must be nonnegative, got {bound}"
            )));
        }
        self.field_bound = Some(bound);
        Ok(self)
    }

    pub fn with_penalty(mut self, penalty: f64) -> Result<Self> {
        if !(penalty >= 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "penalty weight must be nonnegative, got {penalty}"
            )));
        }
        self.penalty = penalty;
        Ok(self)
    }

    pub fn with_target_fidelity(mut self, f: f64) -> Result<Self> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(RotorError::InvalidInput(format!(
                "target fidelity must lie in (0, 1], got {f}"
            )));
        }
        self.target_fidelity = f;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn propagation_basis(&self) -> Result<RotorBasis> {
        RotorBasis::linear(self.j_cap, 0)
    }

    /// Sample the guess pulse at the interval midpoints (clipped to the field
    /// bound when one is set).
    pub fn sample_guess(&self) -> Vec<f64> {
        let dt = self.dt();
        let seq = PulseSequence::new(vec![self.guess]);
        (0..self.steps)
            .map(|k| {
                let e = seq.field_at((k as f64 + 0.5) * dt).0;
                match self.field_bound {
                    Some(b) => e.clamp(-b, b),
                    None => e,
                }
            })
            .collect()
    }

    /// Embed the target coefficients into the propagation block.
    fn embedded_target(&self) -> Result<Vec<Complex64>> {
        let big = self.propagation_basis()?;
        let t = self.target.to_state().embed(&big)?;
        Ok(t.coeff.to_vec())
    }
}

/// Optimization output: the optimized piecewise-constant field, the reached
/// fidelity |⟨ψ_T|ψ(T)⟩|², and the (monotone) per-iteration history.
#[derive(Debug, Clone)]
pub struct OctResult {
    pub field: Vec<f64>,
    pub fidelity: f64,
    pub iterations: usize,
    pub fidelity_history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum OctError {
    #[error(transparent)]
    Rotor(#[from] RotorError),
    #[error(
        "optimization stalled at fidelity {} after {} iterations (target {target})",
        best.fidelity,
        best.iterations
    )]
    Convergence { target: f64, best: OctResult },
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Forward propagation of |0,0⟩ under the field samples; optionally stores the
/// state before every step for the backward sweep.
fn forward(
    problem: &OctProblem,
    engine: &mut StepEngine,
    field: &[f64],
    store: bool,
) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let basis = problem.propagation_basis()?;
    let psi0 = RotorState::basis_state(basis.clone(), 0)?;
    let mut c = psi0.coeff.to_vec();
    let mut stored = Vec::with_capacity(if store { field.len() } else { 0 });
    for &e in field {
        if store {
            stored.push(c.clone());
        }
        engine.step_uniform(&mut c, e, 0.0);
        crate::dynamics::check_state(&c, &basis, None)?;
    }
    Ok((c, stored))
}

/// |⟨ψ_T|ψ(T)⟩|² for a piecewise-constant field (one sample per grid step).
pub fn fidelity(field: &[f64], problem: &OctProblem) -> Result<f64> {
    if field.len() != problem.steps {
        return Err(RotorError::InvalidInput(format!(
            "field has {} samples, problem grid has {}",
            field.len(),
            problem.steps
        )));
    }
    let basis = problem.propagation_basis()?;
    let mut engine = StepEngine::new(&basis, &problem.params, problem.dt())?;
    let (psi, _) = forward(problem, &mut engine, field, false)?;
    let target = problem.embedded_target()?;
    Ok(inner(&target, &psi).norm_sqr())
}

/// Exact gradient of the discretized fidelity with respect to every field
/// sample, via the adjoint (backward-propagated costate) sweep.
pub fn gradient(field: &[f64], problem: &OctProblem) -> Result<Vec<f64>> {
    Ok(fidelity_and_gradient(field, problem)?.1)
}

fn fidelity_and_gradient(field: &[f64], problem: &OctProblem) -> Result<(f64, Vec<f64>)> {
    if field.len() != problem.steps {
        return Err(RotorError::InvalidInput(format!(
            "field has {} samples, problem grid has {}",
            field.len(),
            problem.steps
        )));
    }
    let basis = problem.propagation_basis()?;
    let mut engine = StepEngine::new(&basis, &problem.params, problem.dt())?;
    let (psi_final, stored) = forward(problem, &mut engine, field, true)?;
    let target = problem.embedded_target()?;
    let overlap = inner(&target, &psi_final);
    let fid = overlap.norm_sqr();

    // backward sweep: chi starts as the target and picks up U_k† per step;
    // dJ/dE_k = 2·Re[ conj(o) · ⟨chi_{k+1} | ∂U_k/∂E_k | ψ_k⟩ ]
    let mut chi = target;
    let mut grad = vec![0.0; field.len()];
    for k in (0..field.len()).rev() {
        let (_, dpsi) = engine.step_with_field_derivative(&stored[k], field[k], 0.0);
        grad[k] = 2.0 * (overlap.conj() * inner(&chi, &dpsi)).re;
        engine.step_adjoint_uniform(&mut chi, field[k], 0.0);
    }
    Ok((fid, grad))
}

/// First-order gradient ascent from the sampled guess pulse with a
/// backtracking (Armijo) line search.
///
/// Stops at `target_fidelity`, after `max_iterations`, or on step-size
/// underflow; underflow below the target is reported as a convergence
/// failure carrying the best field found. Trial steps that overrun the
/// propagation basis are rejected by the line search rather than aborting
/// the optimization.
pub fn optimize(problem: &OctProblem) -> std::result::Result<OctResult, OctError> {
    let penalized = |fid: f64, field: &[f64]| -> f64 {
        fid - problem.penalty * problem.dt() * field.iter().map(|e| e * e).sum::<f64>()
    };
    let clip = |e: f64| match problem.field_bound {
        Some(b) => e.clamp(-b, b),
        None => e,
    };

    let mut field = problem.sample_guess();
    let (mut fid, mut grad) = fidelity_and_gradient(&field, problem)?;
    let mut history = vec![fid];
    if fid >= problem.target_fidelity {
        return Ok(OctResult {
            field,
            fidelity: fid,
            iterations: 0,
            fidelity_history: history,
        });
    }

    // initial trial step: move the strongest sample by ~10% of the field scale
    let field_scale = field
        .iter()
        .map(|e| e.abs())
        .fold(0.0_f64, f64::max)
        .max(problem.guess.peak)
        .max(1e-6);
    let mut alpha = {
        let gmax = grad.iter().map(|g| g.abs()).fold(0.0_f64, f64::max);
        if gmax > 0.0 {
            0.1 * field_scale / gmax
        } else {
            1.0
        }
    };
    let alpha_floor = alpha * STEP_UNDERFLOW;

    let mut iterations = 0;
    for _ in 0..problem.max_iterations {
        let jp = penalized(fid, &field);
        // ascent direction: gradient of the penalized objective
        let dir: Vec<f64> = grad
            .iter()
            .zip(field.iter())
            .map(|(g, e)| g - 2.0 * problem.penalty * problem.dt() * e)
            .collect();

        alpha *= 2.0;
        let mut accepted = false;
        while alpha >= alpha_floor {
            let trial: Vec<f64> = field
                .iter()
                .zip(dir.iter())
                .map(|(e, d)| clip(e + alpha * d))
                .collect();
            let movement = trial
                .iter()
                .zip(field.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            if movement == 0.0 {
                alpha *= 0.5;
                continue;
            }
            let predicted: f64 = dir
                .iter()
                .zip(trial.iter().zip(field.iter()))
                .map(|(d, (t, e))| d * (t - e))
                .sum();
            let trial_fid = match fidelity(&trial, problem) {
                Ok(f) => f,
                // basis overflow / norm drift at an overdriven trial: reject it
                Err(RotorError::BasisOverflow(_)) | Err(RotorError::Numeric(_)) => {
                    alpha *= 0.5;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if penalized(trial_fid, &trial) >= jp + ARMIJO_C1 * predicted.max(0.0) {
                field = trial;
                fid = trial_fid;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            let best = OctResult {
                field,
                fidelity: fid,
                iterations,
                fidelity_history: history,
            };
            if best.fidelity >= problem.target_fidelity {
                return Ok(best);
            }
            return Err(OctError::Convergence {
                target: problem.target_fidelity,
                best,
            });
        }
        iterations += 1;
        history.push(fid);
        if fid >= problem.target_fidelity {
            break;
        }
        let (f, g) = fidelity_and_gradient(&field, problem)?;
        debug_assert!((f - fid).abs() < 1e-12);
        fid = f;
        grad = g;
    }
    Ok(OctResult {
        field,
        fidelity: fid,
        iterations,
        fidelity_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::PulseShape;
    use crate::targets::target_state;

    fn small_problem(j_max: u32, j_cap: u32, steps: usize) -> OctProblem {
        let params = MoleculeParams::linear("fictive", 1.0, 0.5).unwrap();
        let target = target_state(2.0, j_max).unwrap();
        OctProblem::new(params, target)
            .unwrap()
            .with_j_cap(j_cap)
            .unwrap()
            .with_steps(steps)
            .unwrap()
    }

    fn ground_target_problem(steps: usize) -> OctProblem {
        // target = |0,0⟩ via a 1-dim truncation
        let params = MoleculeParams::linear("fictive", 1.0, 0.5).unwrap();
        let target = target_state(2.0, 0).unwrap();
        OctProblem::new(params, target)
            .unwrap()
            .with_j_cap(6)
            .unwrap()
            .with_steps(steps)
            .unwrap()
    }

    #[test]
    fn zero_field_fidelity_on_stationary_target() {
        let problem = ground_target_problem(256);
        let field = vec![0.0; 256];
        let fid = fidelity(&field, &problem).unwrap();
        assert!((fid - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_fidelity_is_ground_weight_of_target() {
        let problem = small_problem(6, 10, 256);
        let field = vec![0.0; 256];
        let fid = fidelity(&field, &problem).unwrap();
        let c0 = problem.target.coefficients[0];
        assert!((fid - c0 * c0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_wrong_sample_count() {
        let problem = ground_target_problem(256);
        assert!(fidelity(&vec![0.0; 255], &problem).is_err());
        let g = gradient(&vec![0.0; 255], &problem);
        assert!(g.is_err());
    }

    #[test]
    fn gradient_vanishes_at_stationary_maximum() {
        let problem = ground_target_problem(256);
        let field = vec![0.0; 256];
        let g = gradient(&field, &problem).unwrap();
        assert_eq!(g.len(), 256);
        let gmax = g.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
        assert!(gmax < 1e-10, "gradient at maximum was {gmax}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let problem = small_problem(4, 6, 512);
        // a gentle nonzero field so the landscape is generic
        let dt = problem.dt();
        let field: Vec<f64> = (0..512)
            .map(|k| 0.05 * ((k as f64 + 0.5) * dt).sin())
            .collect();
        let g = gradient(&field, &problem).unwrap();
        let eps = 1e-6;
        // ten deterministic sample indices
        for i in 0..10 {
            let idx = (i * 97 + 13) % field.len();
            let mut plus = field.clone();
            plus[idx] += eps;
            let mut minus = field.clone();
            minus[idx] -= eps;
            let fd = (fidelity(&plus, &problem).unwrap() - fidelity(&minus, &problem).unwrap())
                / (2.0 * eps);
            let scale = fd.abs().max(g[idx].abs()).max(1e-12);
            assert!(
                (g[idx] - fd).abs() / scale < 1e-5,
                "sample {idx}: adjoint {} vs fd {fd}",
                g[idx]
            );
        }
    }

    #[test]
    fn optimize_succeeds_immediately_on_reached_target() {
        let mut problem = ground_target_problem(256);
        // weak guess: fidelity stays above target from the start
        problem = problem.with_guess(
            PulseSpec::new(PulseShape::GaussianThz, 1e-4, 0.5, 0.1).unwrap(),
        );
        let result = optimize(&problem).unwrap();
        assert_eq!(result.iterations, 0);
        assert!(result.fidelity >= problem.target_fidelity);
        assert_eq!(result.fidelity_history.len(), 1);
    }

    #[test]
    fn optimize_reaches_two_level_target() {
        let params = MoleculeParams::linear("fictive", 1.0, 0.5).unwrap();
        let target = target_state(2.0, 1).unwrap();
        let problem = OctProblem::new(params, target)
            .unwrap()
            .with_j_cap(6)
            .unwrap()
            .with_steps(256)
            .unwrap()
            .with_guess(PulseSpec::new(PulseShape::GaussianThz, 0.05, 0.6, 0.15).unwrap());
        let result = optimize(&problem).unwrap();
        assert!(
            result.fidelity >= 0.99,
            "fidelity only reached {}",
            result.fidelity
        );
        // line-search contract: monotone history
        for w in result.fidelity_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn optimize_respects_field_bound() {
        let params = MoleculeParams::linear("fictive", 1.0, 0.5).unwrap();
        let target = target_state(2.0, 1).unwrap();
        let bound = 0.02;
        let problem = OctProblem::new(params, target)
            .unwrap()
            .with_j_cap(6)
            .unwrap()
            .with_steps(256)
            .unwrap()
            .with_guess(PulseSpec::new(PulseShape::GaussianThz, 0.05, 0.6, 0.15).unwrap())
            .with_field_bound(bound)
            .unwrap()
            .with_max_iterations(40);
        match optimize(&problem) {
            Ok(res) => {
                let emax = res.field.iter().map(|e| e.abs()).fold(0.0_f64, f64::max);
                assert!(emax <= bound + 1e-15);
            }
            Err(OctError::Convergence { best, .. }) => {
                let emax = best.field.iter().map(|e| e.abs()).fold(0.0_f64, f64::max);
                assert!(emax <= bound + 1e-15);
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn zero_bound_reports_convergence_failure() {
        let params = MoleculeParams::linear("fictive", 1.0, 0.5).unwrap();
        let target = target_state(2.0, 2).unwrap();
        let problem = OctProblem::new(params, target)
            .unwrap()
            .with_j_cap(6)
            .unwrap()
            .with_steps(256)
            .unwrap()
            .with_field_bound(0.0)
            .unwrap()
            .with_max_iterations(10);
        let err = optimize(&problem).unwrap_err();
        match err {
            OctError::Convergence { best, .. } => {
                // stuck at the free-evolution value |c0|²
                let c0 = problem.target.coefficients[0];
                assert!((best.fidelity - c0 * c0).abs() < 1e-12);
                assert!(best.field.iter().all(|&e| e == 0.0));
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }
}
