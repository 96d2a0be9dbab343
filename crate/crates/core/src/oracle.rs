//! Independent estimates of `I^ε_max` used to validate the seesaw.
//!
//! For fixed `λ` the set of ball members `ρ̃` with `λ·ρ_A⊗ρ̃_B − ρ̃ ⪰ 0` is
//! convex, and the set of `λ` for which it is non-empty is an up-closed
//! interval. Bisection over `λ` with a feasibility SDP at each trial
//! therefore finds the global `λ_min`, at a cost of one solve per halving.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conic::{self, SolverSettings};
use crate::error::{Error, Result};
use crate::generators;
use crate::measures;
use crate::programs::{self, MuDomain};
use crate::state::{check_epsilon, BipartiteState, Tolerances};

#[derive(Debug, Clone)]
pub struct BisectionResult {
    /// Midpoint of the final bracket.
    pub lambda_star: f64,
    pub bracket_width: f64,
    pub feasibility_calls: usize,
    /// Feasible state at the upper end of the final bracket.
    pub witness: BipartiteState<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSummary {
    pub lambda_star: f64,
    pub imax: f64,
    pub bracket_width: f64,
    pub feasibility_calls: usize,
}

impl From<&BisectionResult> for OracleSummary {
    fn from(r: &BisectionResult) -> Self {
        Self {
            lambda_star: r.lambda_star,
            imax: r.lambda_star.log2(),
            bracket_width: r.bracket_width,
            feasibility_calls: r.feasibility_calls,
        }
    }
}

/// Step-3 margin with `μ` unrestricted, and the maximizing state.
fn feasibility(
    rho_ab: &BipartiteState<f64>,
    lambda: f64,
    epsilon: f64,
    settings: &SolverSettings,
) -> Result<(f64, BipartiteState<f64>)> {
    let prog = programs::build_step3_primal_with(rho_ab, lambda, epsilon, MuDomain::Free)?;
    let sol = conic::solve(&prog.problem, settings);
    let s3 = prog.extract(&sol, rho_ab, epsilon)?;
    Ok((s3.mu_i, s3.rho_next))
}

/// Bisects `λ` over `[1, 2^{D_max(ρ‖ρ_A⊗ρ_B)}]` until the bracket is at
/// most `precision` wide. A trial `λ` is feasible when the step-3 margin is
/// at least `−solver_tol`.
pub fn bisection_oracle(
    rho_ab: &BipartiteState<f64>,
    epsilon: f64,
    precision: f64,
    settings: &SolverSettings,
) -> Result<BisectionResult> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::InvalidParameter("bisection oracle needs epsilon > 0".into()));
    }
    if !(precision > 0.0 && precision.is_finite()) {
        return Err(Error::InvalidParameter("precision must be positive".into()));
    }
    let tol = Tolerances::default();
    let upper = measures::dmax_ratio(rho_ab.matrix(), &rho_ab.marginal_product(), tol.support_tol)?.max(1.0);
    let (mut lo, mut hi) = (1.0, upper);
    let mut calls = 0;

    let (mu, mut witness) = feasibility(rho_ab, hi, epsilon, settings)?;
    calls += 1;
    if mu < -settings.solver_tol {
        return Err(Error::InvalidParameter(format!(
            "upper bracket lambda = {hi} is infeasible (margin {mu:e}); the ball center should be feasible there"
        )));
    }
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        let (mu, state) = feasibility(rho_ab, mid, epsilon, settings)?;
        calls += 1;
        if mu >= -settings.solver_tol {
            hi = mid;
            witness = state;
        } else {
            lo = mid;
        }
    }
    Ok(BisectionResult {
        lambda_star: 0.5 * (lo + hi),
        bracket_width: hi - lo,
        feasibility_calls: calls,
        witness,
    })
}

/// Largest `t ∈ [0, 1]` (to 50 halvings) with `(1−t)ρ + tσ` in the ball.
fn boundary_blend(rho_ab: &BipartiteState<f64>, sigma: &BipartiteState<f64>, epsilon: f64) -> Result<BipartiteState<f64>> {
    let tol = Tolerances::default();
    let floor = 1.0 - epsilon * epsilon;
    let inside = |t: f64| -> Result<bool> {
        let cand = rho_ab.blend(sigma, t)?;
        Ok(measures::fidelity(rho_ab.matrix(), cand.matrix(), &tol)? >= floor)
    };
    if inside(1.0)? {
        return rho_ab.blend(sigma, 1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rho_ab.blend(sigma, lo)
}

/// `min D_max(ρ̃ ‖ ρ_A⊗ρ̃_B)` in bits over the ball center and
/// `n_samples − 1` seeded boundary blends toward random full-rank states.
/// Every candidate is a ball member, so the result bounds `I^ε_max` from above.
pub fn sampling_upper_bound(rho_ab: &BipartiteState<f64>, epsilon: f64, n_samples: usize, seed: u64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let tol = Tolerances::default();
    let rho_a = rho_ab.marginal_a();
    let value = |s: &BipartiteState<f64>| -> Result<f64> {
        let sigma = crate::linalg::kron(&rho_a, &s.marginal_b());
        measures::dmax_closed_form(s.matrix(), &sigma, &tol)
    };
    let mut best = value(rho_ab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (da, db) = (rho_ab.dim_a(), rho_ab.dim_b());
    for _ in 1..n_samples {
        let sigma = generators::random_mixed::<f64, _>(da, db, da * db, &mut rng)?;
        let cand = boundary_blend(rho_ab, &sigma, epsilon)?;
        let v = value(&cand)?;
        if v < best {
            best = v;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_bisection_near_zero_epsilon_tends_to_four() {
        let phi = generators::bell::<f64>(2).unwrap();
        let r = bisection_oracle(&phi, 1e-4, 1e-5, &SolverSettings::default()).unwrap();
        assert!((r.lambda_star - 4.0).abs() < 1e-2, "{}", r.lambda_star);
        assert!(r.bracket_width <= 1e-5);
        assert!(r.feasibility_calls > 10);
    }

    #[test]
    fn bisection_witness_is_a_ball_member() {
        let phi = generators::bell::<f64>(2).unwrap();
        let eps = 0.1;
        let r = bisection_oracle(&phi, eps, 1e-4, &SolverSettings::default()).unwrap();
        let tol = Tolerances::default();
        let f = measures::fidelity(phi.matrix(), r.witness.matrix(), &tol).unwrap();
        assert!(f >= 1.0 - eps * eps - 1e-9);
        let s = OracleSummary::from(&r);
        assert!((s.imax - r.lambda_star.log2()).abs() < 1e-15);
    }

    #[test]
    fn sampling_bound_is_deterministic_and_capped_by_center() {
        let phi = generators::bell::<f64>(2).unwrap();
        let a = sampling_upper_bound(&phi, 0.1, 8, 42).unwrap();
        let b = sampling_upper_bound(&phi, 0.1, 8, 42).unwrap();
        assert_eq!(a, b);
        assert!(a <= 2.0 + 1e-9);
        assert!((sampling_upper_bound(&phi, 0.1, 1, 0).unwrap() - 2.0).abs() < 1e-9);
        assert!(sampling_upper_bound(&phi, 0.1, 0, 0).is_err());
    }

    #[test]
    fn rejects_bad_precision() {
        let phi = generators::bell::<f64>(2).unwrap();
        assert!(bisection_oracle(&phi, 0.1, 0.0, &SolverSettings::default()).is_err());
        assert!(bisection_oracle(&phi, 0.1, f64::NAN, &SolverSettings::default()).is_err());
    }
}
