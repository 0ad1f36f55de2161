//! The figure-of-merit operator F = cosθ − a·cos²θ: classical analysis,
//! truncated-space target states, and state analysis (expectation values and
//! the angular probability density).
//!
//! Target states are computed in the m = 0 block: the density of interest is
//! rotationally symmetric about z and the control fields conserve m from the
//! ground state.

use ndarray::Array1;
use num_complex::Complex64;

use crate::basis::{
    cos_squared_matrix, cos_theta_matrix, OperatorMatrix, RotorBasis, RotorKind,
};
use crate::dynamics::{RotorEnsemble, RotorState};
use crate::error::{Result, RotorError};
use crate::linalg::symmetric_eigen;

/// Weight and truncation of the merit operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritParams {
    pub a: f64,
    pub j_max: u32,
}

impl MeritParams {
    pub fn new(a: f64, j_max: u32) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "merit weight a must be nonnegative, got {a}"
            )));
        }
        Ok(Self { a, j_max })
    }
}

/// Classical optimum of f(θ) = cosθ − a·cos²θ over θ ∈ [0, π].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOptimum {
    pub a: f64,
    pub theta_max: f64,
    pub cos_theta: f64,
    pub cos2_theta: f64,
    pub f_max: f64,
}

/// Maximize f(u) = u − a·u² over u = cosθ ∈ [−1, 1]: the interior optimum
/// u = 1/(2a) applies for a ≥ 1/2, otherwise the boundary u = 1 wins.
pub fn classical_optimum(a: f64) -> Result<ClassicalOptimum> {
    if !(a > 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "merit weight a must be positive, got {a}"
        )));
    }
    if a >= 0.5 {
        let u = 1.0 / (2.0 * a);
        Ok(ClassicalOptimum {
            a,
            theta_max: u.acos(),
            cos_theta: u,
            cos2_theta: u * u,
            f_max: 1.0 / (4.0 * a),
        })
    } else {
        Ok(ClassicalOptimum {
            a,
            theta_max: 0.0,
            cos_theta: 1.0,
            cos2_theta: 1.0,
            f_max: 1.0 - a,
        })
    }
}

/// Classical optimum on each grid point, in input order.
pub fn classical_scan(a_grid: &[f64]) -> Result<Vec<ClassicalOptimum>> {
    if a_grid.is_empty() {
        return Err(RotorError::InvalidInput("scan grid is empty".into()));
    }
    a_grid.iter().map(|&a| classical_optimum(a)).collect()
}

/// Matrix of cosθ − a·cos²θ on a basis block.
pub fn projected_merit_matrix(basis: &RotorBasis, a: f64) -> OperatorMatrix {
    let cos = cos_theta_matrix(basis);
    let cos2 = cos_squared_matrix(basis);
    let entries = cos.entries() - &(a * cos2.entries());
    OperatorMatrix::from_parts(basis.clone(), entries)
}

/// Top eigenvector of the projected merit operator on {|j,0⟩ : j ≤ j_max}.
#[derive(Debug, Clone)]
pub struct TargetState {
    pub basis: RotorBasis,
    pub coefficients: Array1<f64>,
    pub lambda_max: f64,
    pub cos_exp: f64,
    pub cos2_exp: f64,
    pub weight_a: f64,
}

impl TargetState {
    pub fn j_max(&self) -> u32 {
        self.basis.j_cap()
    }

    /// The target as a complex rotor state.
    pub fn to_state(&self) -> RotorState {
        RotorState {
            basis: self.basis.clone(),
            coeff: self.coefficients.mapv(|x| Complex64::new(x, 0.0)),
        }
    }
}

/// Compute the target state for weight `a` on the m = 0 block truncated at
/// `j_max`.
///
/// The eigenvector sign is fixed so the lowest-j coefficient with magnitude
/// above 1e-10 is positive; a degenerate top eigenvalue is resolved by
/// lexicographic comparison of the sign-fixed coefficient vectors.
pub fn target_state(a: f64, j_max: u32) -> Result<TargetState> {
    if !(a > 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "merit weight a must be positive, got {a}"
        )));
    }
    let basis = RotorBasis::linear(j_max, 0)?;
    let merit = projected_merit_matrix(&basis, a);
    let (w, v) = symmetric_eigen(merit.entries())?;
    let n = basis.dim();
    let lambda_max = w[n - 1];

    let mut best: Option<Vec<f64>> = None;
    for idx in (0..n).rev() {
        if (w[idx] - lambda_max).abs() > 1e-12 * (1.0 + lambda_max.abs()) {
            break;
        }
        let mut cand: Vec<f64> = (0..n).map(|r| v[[r, idx]]).collect();
        if let Some(lead) = cand.iter().find(|x| x.abs() > 1e-10) {
            if *lead < 0.0 {
                cand.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let better = match &best {
            None => true,
            Some(cur) => cand
                .iter()
                .zip(cur.iter())
                .find_map(|(c, b)| {
                    if c > b {
                        Some(true)
                    } else if c < b {
                        Some(false)
                    } else {
                        None
                    }
                })
                .unwrap_or(false),
        };
        if better {
            best = Some(cand);
        }
    }
    let coefficients = Array1::from_vec(best.expect("at least one eigenvector"));

    let coeff_c: Vec<Complex64> = coefficients.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let cos_exp = cos_theta_matrix(&basis).expectation(&coeff_c)?;
    let cos2_exp = cos_squared_matrix(&basis).expectation(&coeff_c)?;
    Ok(TargetState {
        basis,
        coefficients,
        lambda_max,
        cos_exp,
        cos2_exp,
        weight_a: a,
    })
}

/// (⟨cosθ⟩, ⟨cos²θ⟩) of a normalized pure state.
pub fn expectations(state: &RotorState) -> Result<(f64, f64)> {
    if (state.norm() - 1.0).abs() > 1e-6 {
        return Err(RotorError::InvalidInput(format!(
            "state must be normalized, got norm {}",
            state.norm()
        )));
    }
    let coeff = state.coeff.as_slice().expect("standard layout");
    let cos = cos_theta_matrix(&state.basis).expectation(coeff)?;
    let cos2 = cos_squared_matrix(&state.basis).expectation(coeff)?;
    Ok((cos, cos2))
}

/// Weighted (⟨cosθ⟩, ⟨cos²θ⟩) of a unit-trace ensemble. Operator matrices are
/// cached per distinct block.
pub fn ensemble_expectations(ensemble: &RotorEnsemble) -> Result<(f64, f64)> {
    if (ensemble.trace() - 1.0).abs() > 1e-6 {
        return Err(RotorError::InvalidInput(format!(
            "ensemble trace must be one, got {}",
            ensemble.trace()
        )));
    }
    let mut cache: Vec<(RotorBasis, OperatorMatrix, OperatorMatrix)> = Vec::new();
    let mut cos_acc = 0.0;
    let mut cos2_acc = 0.0;
    for member in &ensemble.members {
        let basis = &member.state.basis;
        let pos = match cache.iter().position(|(b, _, _)| b == basis) {
            Some(p) => p,
            None => {
                cache.push((
                    basis.clone(),
                    cos_theta_matrix(basis),
                    cos_squared_matrix(basis),
                ));
                cache.len() - 1
            }
        };
        let coeff = member.state.coeff.as_slice().expect("standard layout");
        cos_acc += member.weight * cache[pos].1.expectation(coeff)?;
        cos2_acc += member.weight * cache[pos].2.expectation(coeff)?;
    }
    Ok((cos_acc, cos2_acc))
}

/// Angular probability density P(θ) = 2π·sinθ·|Σ_j c_j Y_j0(θ)|² of a linear
/// m = 0 state, evaluated on a θ grid. Integrating P over [0, π] gives one.
pub fn angular_density(state: &RotorState, theta_grid: &[f64]) -> Result<Vec<f64>> {
    if state.basis.kind() != RotorKind::Linear || state.basis.m_fixed() != 0 {
        return Err(RotorError::Unsupported(
            "angular density is defined for linear m = 0 states".into(),
        ));
    }
    if (state.norm() - 1.0).abs() > 1e-6 {
        return Err(RotorError::InvalidInput(format!(
            "state must be normalized, got norm {}",
            state.norm()
        )));
    }
    let j_cap = state.basis.j_cap();
    let four_pi = 4.0 * std::f64::consts::PI;
    Ok(theta_grid
        .iter()
        .map(|&theta| {
            let x = theta.cos();
            // Y_j0(θ) = sqrt((2j+1)/4π) · P_j(cosθ), Legendre by recurrence
            let mut amp = Complex64::new(0.0, 0.0);
            let mut p_prev = 1.0_f64; // P_0
            let mut p_cur = x; // P_1
            for j in 0..=j_cap {
                let pj = match j {
                    0 => 1.0,
                    1 => x,
                    _ => {
                        let jj = (j - 1) as f64;
                        let next = ((2.0 * jj + 1.0) * x * p_cur - jj * p_prev) / (jj + 1.0);
                        p_prev = p_cur;
                        p_cur = next;
                        next
                    }
                };
                let y = ((2 * j + 1) as f64 / four_pi).sqrt() * pj;
                amp += state.coeff[j as usize] * y;
            }
            2.0 * std::f64::consts::PI * theta.sin() * amp.norm_sqr()
        })
        .collect())
}
