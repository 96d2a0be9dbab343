//! The semidefinite programs of the alternating scheme and their
//! certificates.
//!
//! - step 2: `min λ ≥ 0` with `λ·ρ_A⊗ρ_B^i − ρ^i ⪰ 0`;
//! - step 3 primal: `max μ` over `μ`, `ρ̃` (unit trace) and a complex `X` with
//!   `λ·ρ_A⊗ρ̃_B − ρ̃ − μ·1 ⪰ 0`, `Re Tr X ≥ √(1−ε²)` and
//!   `[[ρ, X], [X†, ρ̃]] ⪰ 0` (the last two encode `F(ρ, ρ̃) ≥ 1 − ε²`);
//! - step 3 dual: `min η − 2ν√(1−ε²) + Tr[ρD]` over `W, D ⪰ 0`, free `η`,
//!   `ν ≥ 0` with `Tr W ≥ 1` and `[[D, ν·1], [ν·1, η·1 − (λ·M(W) − W)]] ⪰ 0`.
//!
//! Both step-3 programs are assembled on the support of `ρ` (`ρ = VΛV†`),
//! which is only a change of basis when `ρ` has full rank and keeps an
//! interior when it does not.
//!
//! `ρ_A` is always the marginal of the original state; `ρ̃_B` never appears
//! as a variable of its own, only as the partial trace of `ρ̃`'s basis.

use serde::{Deserialize, Serialize};

use crate::conic::{
    self, ComplexVar, ConicProblem, ConicSolution, HermitianLmi, HermitianVar, LinExpr, Sense, SolverSettings, Var,
};
use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, CMatrix, Subsystem};
use crate::measures;
use crate::state::{check_epsilon, BipartiteState, Tolerances};

fn ensure_same_dims(a: &BipartiteState<f64>, b: &BipartiteState<f64>) -> Result<()> {
    if a.dim_a() != b.dim_a() || a.dim_b() != b.dim_b() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.dim_a(), a.dim_b()),
            got: format!("{}x{}", b.dim_a(), b.dim_b()),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Places `m` at offset `(r, c)` inside a `size×size` zero matrix.
fn embed(m: &CMatrix<f64>, size: usize, r: usize, c: usize) -> CMatrix<f64> {
    let mut out = CMatrix::zeros(size, size);
    out.view_mut((r, c), m.shape()).copy_from(m);
    out
}

fn require_optimal(program: &str, sol: &ConicSolution) -> Result<()> {
    if !sol.is_optimal() {
        return Err(Error::Solver { program: program.to_string(), status: sol.status });
    }
    Ok(())
}

// ---------------------------------------------------------------- step 2

#[derive(Debug, Clone)]
pub struct Step2Program {
    pub problem: ConicProblem,
    lambda: Var,
    /// `ρ_A ⊗ ρ_B^i`.
    pub marginal_product: CMatrix<f64>,
    pub iterate: CMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step2Solution {
    pub lambda_i: f64,
    /// Smallest eigenvalue of `λ^i·ρ_A⊗ρ_B^i − ρ^i`.
    pub slack_spectrum_min: f64,
}

/// `inf {λ ≥ 0 : λ·ρ_A⊗ρ_B^i − ρ^i ⪰ 0}` with `ρ_A` taken from `rho_ab`.
pub fn build_step2(rho_ab: &BipartiteState<f64>, rho_i: &BipartiteState<f64>) -> Result<Step2Program> {
    ensure_same_dims(rho_ab, rho_i)?;
    let sigma = linalg::kron(&rho_ab.marginal_a(), &rho_i.marginal_b());
    let n = rho_ab.dim();
    let mut problem = ConicProblem::new("step2", Sense::Minimize);
    let lambda = problem.add_nonneg_scalar("lambda");
    problem.set_objective(LinExpr::var(lambda))?;
    let mut lmi = HermitianLmi::new("lambda*sigma - rho_i >= 0", n);
    lmi.constant = -rho_i.matrix();
    lmi.terms.push((lambda, sigma.clone()));
    problem.add_hermitian_lmi(lmi)?;
    Ok(Step2Program { problem, lambda, marginal_product: sigma, iterate: rho_i.matrix().clone() })
}

impl Step2Program {
    pub fn extract(&self, sol: &ConicSolution) -> Result<Step2Solution> {
        require_optimal("step2", sol)?;
        let lambda_i = sol.value(self.lambda);
        let slack = self.marginal_product.scale(lambda_i) - &self.iterate;
        Ok(Step2Solution { lambda_i, slack_spectrum_min: linalg::min_eigenvalue(&slack)? })
    }
}

pub fn solve_step2(
    rho_ab: &BipartiteState<f64>,
    rho_i: &BipartiteState<f64>,
    settings: &SolverSettings,
) -> Result<Step2Solution> {
    let prog = build_step2(rho_ab, rho_i)?;
    let sol = conic::solve(&prog.problem, settings);
    prog.extract(&sol)
}

// ---------------------------------------------------------------- step 3

/// Domain of the margin variable `μ` in the step-3 pair.
///
/// `NonNegative` is the program as stated (`μ ≥ 0`, dual `Tr W ≥ 1`).
/// `Free` lets `μ` go negative (dual `Tr W = 1`), which turns the program
/// into a signed feasibility measure for a fixed `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuDomain {
    NonNegative,
    Free,
}

#[derive(Debug, Clone)]
pub struct Step3PrimalProgram {
    pub problem: ConicProblem,
    mu: Var,
    rho_tilde: HermitianVar,
    witness: FidelityWitness,
    dim_a: usize,
    dim_b: usize,
}

#[derive(Debug, Clone)]
pub struct Step3Solution {
    pub mu_i: f64,
    /// The maximizing state after projection into the smoothing ball.
    pub rho_next: BipartiteState<f64>,
    /// Off-diagonal block `X` of the fidelity block matrix.
    pub fidelity_witness: CMatrix<f64>,
    pub achieved_fidelity: f64,
    pub primal_objective: f64,
}

/// Linear image `ρ_A ⊗ Tr_A[E]` of one basis element.
fn marginal_map(rho_a: &CMatrix<f64>, e: &CMatrix<f64>, dim_a: usize, dim_b: usize) -> CMatrix<f64> {
    let eb = linalg::partial_trace_raw(e, dim_a, dim_b, Subsystem::B).expect("basis dims match");
    linalg::kron(rho_a, &eb)
}

pub fn build_step3_primal(rho_ab: &BipartiteState<f64>, lambda_i: f64, epsilon: f64) -> Result<Step3PrimalProgram> {
    build_step3_primal_with(rho_ab, lambda_i, epsilon, MuDomain::NonNegative)
}

pub fn build_step3_primal_with(
    rho_ab: &BipartiteState<f64>,
    lambda_i: f64,
    epsilon: f64,
    domain: MuDomain,
) -> Result<Step3PrimalProgram> {
    check_lambda(lambda_i)?;
    check_epsilon(epsilon)?;
    let (da, db, n) = (rho_ab.dim_a(), rho_ab.dim_b(), rho_ab.dim());
    let rho_a = rho_ab.marginal_a();

    let mut problem = ConicProblem::new("step3_primal", Sense::Maximize);
    let mu = match domain {
        MuDomain::NonNegative => problem.add_nonneg_scalar("mu"),
        MuDomain::Free => problem.add_scalar("mu"),
    };
    let rho_tilde = problem.add_hermitian_var("rho_tilde", n);
    problem.set_objective(LinExpr::var(mu))?;

    let mut trace = LinExpr::constant(-1.0);
    for (v, _) in rho_tilde.diagonal() {
        trace = trace.term(*v, 1.0);
    }
    problem.add_equality("Tr rho_tilde = 1", trace)?;

    let mut margin = HermitianLmi::new("lambda*rho_A(x)rho_tilde_B - rho_tilde - mu >= 0", n);
    margin.terms.push((mu, -linalg::identity(n)));
    for (v, e) in &rho_tilde.basis {
        margin.terms.push((*v, marginal_map(&rho_a, e, da, db).scale(lambda_i) - e));
    }
    problem.add_hermitian_lmi(margin)?;

    let witness = FidelityWitness::add(&mut problem, rho_ab, &rho_tilde, epsilon)?;

    Ok(Step3PrimalProgram { problem, mu, rho_tilde, witness, dim_a: da, dim_b: db })
}

/// Orthonormal basis `V` (`n×r`) of the support of `ρ` and the matching
/// eigenvalues, so that `ρ ≈ V·diag(λ)·V†`; eigenvalues at or below
/// `support_tol` are dropped.
pub fn support_basis(rho: &CMatrix<f64>, support_tol: f64) -> Result<(Vec<f64>, CMatrix<f64>)> {
    let (values, vectors) = linalg::eigh(rho)?;
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > support_tol).collect();
    if keep.is_empty() {
        return Err(Error::InvalidParameter("state has empty support".into()));
    }
    let basis = CMatrix::from_fn(vectors.nrows(), keep.len(), |i, k| vectors[(i, keep[k])]);
    Ok((keep.iter().map(|&k| values[k]).collect(), basis))
}

/// The fidelity constraint `F(ρ, ρ̃) ≥ 1 − ε²` written on the support of
/// `ρ`: `X = V·Z` with `[[Λ, Z], [Z†, ρ̃]] ⪰ 0` and `Re Tr X ≥ √(1−ε²)`.
/// For full-rank `ρ` this is a unitary change of basis of
/// `[[ρ, X], [X†, ρ̃]] ⪰ 0`; for singular `ρ` it drops the directions in
/// which that block has no interior.
#[derive(Debug, Clone)]
struct FidelityWitness {
    support: CMatrix<f64>,
    z: ComplexVar,
}

impl FidelityWitness {
    fn add(problem: &mut ConicProblem, rho_ab: &BipartiteState<f64>, rho_tilde: &HermitianVar, epsilon: f64) -> Result<Self> {
        let n = rho_ab.dim();
        let (values, support) = support_basis(rho_ab.matrix(), Tolerances::<f64>::default().support_tol)?;
        let r = values.len();
        let z = problem.add_complex_var("Z", r, n);

        // Re Tr[V Z] = Σ Re V[i,k]·Re Z[k,i] − Im V[i,k]·Im Z[k,i]
        let mut re_trace = LinExpr::constant(-(1.0 - epsilon * epsilon).max(0.0).sqrt());
        for i in 0..n {
            for k in 0..r {
                let v = support[(i, k)];
                if v.re != 0.0 {
                    re_trace = re_trace.term(z.re(k, i), v.re);
                }
                if v.im != 0.0 {
                    re_trace = re_trace.term(z.im(k, i), -v.im);
                }
            }
        }
        problem.add_inequality("Re Tr X >= sqrt(1-eps^2)", re_trace)?;

        let side = r + n;
        let mut block = HermitianLmi::new("[[rho, X], [X^dag, rho_tilde]] >= 0", side);
        block.constant = embed(&linalg::diag(&values), side, 0, 0);
        for (v, e) in &rho_tilde.basis {
            block.terms.push((*v, embed(e, side, r, r)));
        }
        for k in 0..r {
            for j in 0..n {
                let mut re = CMatrix::zeros(side, side);
                re[(k, r + j)] = cr(1.0);
                re[(r + j, k)] = cr(1.0);
                block.terms.push((z.re(k, j), re));
                let mut im = CMatrix::zeros(side, side);
                im[(k, r + j)] = c(0.0, 1.0);
                im[(r + j, k)] = c(0.0, -1.0);
                block.terms.push((z.im(k, j), im));
            }
        }
        problem.add_hermitian_lmi(block)?;
        Ok(Self { support, z })
    }

    /// `X = V·Z`.
    fn value(&self, x: &[f64]) -> CMatrix<f64> {
        &self.support * self.z.value(x)
    }
}

impl Step3PrimalProgram {
    pub fn mu(&self, sol: &ConicSolution) -> f64 {
        sol.value(self.mu)
    }

    /// Raw `ρ̃` as returned by the solver, Hermitized.
    pub fn rho_tilde(&self, sol: &ConicSolution) -> CMatrix<f64> {
        linalg::hermitize(&self.rho_tilde.value(&sol.values))
    }

    /// Extracts the step-3 solution with `ρ̃` projected into the ball.
    pub fn extract(&self, sol: &ConicSolution, rho_ab: &BipartiteState<f64>, epsilon: f64) -> Result<Step3Solution> {
        require_optimal("step3_primal", sol)?;
        let raw = self.rho_tilde(sol);
        let (rho_next, achieved_fidelity) = project_into_ball(&raw, rho_ab, epsilon, self.dim_a, self.dim_b)?;
        Ok(Step3Solution {
            mu_i: sol.value(self.mu),
            rho_next,
            fidelity_witness: self.witness.value(&sol.values),
            achieved_fidelity,
            primal_objective: sol.primal_objective,
        })
    }
}

/// Slack on the fidelity floor when testing ball membership.
pub const BALL_SLACK: f64 = 1e-12;

/// Hermitizes, clips and renormalizes `raw`; if the result leaves the ball,
/// bisects (40 steps) along the segment toward the center `ρ` for the
/// closest point back inside.
pub fn project_into_ball(
    raw: &CMatrix<f64>,
    rho_ab: &BipartiteState<f64>,
    epsilon: f64,
    dim_a: usize,
    dim_b: usize,
) -> Result<(BipartiteState<f64>, f64)> {
    let tol = Tolerances::default();
    let floor = 1.0 - epsilon * epsilon - BALL_SLACK;
    let fid = |s: &BipartiteState<f64>| measures::fidelity(rho_ab.matrix(), s.matrix(), &tol);
    let projected = match BipartiteState::from_projection(raw, dim_a, dim_b) {
        Ok(s) => s,
        Err(_) => return Ok((rho_ab.clone(), 1.0)),
    };
    let f = fid(&projected)?;
    if f >= floor {
        return Ok((projected, f));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (rho_ab.clone(), 1.0);
    for _ in 0..40 {
        let t = 0.5 * (lo + hi);
        let cand = projected.blend(rho_ab, t)?;
        let fc = fid(&cand)?;
        if fc >= floor {
            hi = t;
            best = (cand, fc);
        } else {
            lo = t;
        }
    }
    Ok(best)
}

pub fn solve_step3(
    rho_ab: &BipartiteState<f64>,
    lambda_i: f64,
    epsilon: f64,
    domain: MuDomain,
    settings: &SolverSettings,
) -> Result<(Step3Solution, ConicSolution)> {
    let prog = build_step3_primal_with(rho_ab, lambda_i, epsilon, domain)?;
    let sol = conic::solve(&prog.problem, settings);
    let out = prog.extract(&sol, rho_ab, epsilon)?;
    Ok((out, sol))
}

/// `1_A ⊗ Tr_{A'}[W (ρ_{A'} ⊗ 1_B)]`.
///
/// Satisfies `Tr[M ρ̃] = Tr[(ρ_A ⊗ ρ̃_B) W]` for every `ρ̃`, which is what lets
/// the dual absorb the partial-trace dependence of the step-3 constraint.
pub fn m_operator(w: &CMatrix<f64>, rho_a: &CMatrix<f64>) -> Result<CMatrix<f64>> {
    let n = linalg::ensure_square(w)?;
    let da = linalg::ensure_square(rho_a)?;
    if da == 0 || n % da != 0 {
        return Err(Error::DimensionMismatch {
            expected: format!("side divisible by d_A = {da}"),
            got: format!("{n}x{n}"),
        });
    }
    let db = n / da;
    let lifted = linalg::kron(rho_a, &linalg::identity(db));
    let k = linalg::partial_trace_raw(&(w * lifted), da, db, Subsystem::B)?;
    Ok(linalg::kron(&linalg::identity(da), &linalg::hermitize(&k)))
}

#[derive(Debug, Clone)]
pub struct Step3DualProgram {
    pub problem: ConicProblem,
    w: HermitianVar,
    d: HermitianVar,
    eta: Var,
    nu: Var,
    support: CMatrix<f64>,
}

pub fn build_step3_dual(rho_ab: &BipartiteState<f64>, lambda_i: f64, epsilon: f64) -> Result<Step3DualProgram> {
    build_step3_dual_with(rho_ab, lambda_i, epsilon, MuDomain::NonNegative)
}

pub fn build_step3_dual_with(
    rho_ab: &BipartiteState<f64>,
    lambda_i: f64,
    epsilon: f64,
    domain: MuDomain,
) -> Result<Step3DualProgram> {
    check_lambda(lambda_i)?;
    check_epsilon(epsilon)?;
    let n = rho_ab.dim();
    let rho_a = rho_ab.marginal_a();
    let root_floor = (1.0 - epsilon * epsilon).max(0.0).sqrt();
    let (values, support) = support_basis(rho_ab.matrix(), Tolerances::<f64>::default().support_tol)?;
    let r = values.len();
    let side = r + n;

    // Solved on the support of ρ (D = V·D_r·V†) and in shifted coordinates
    // D_r = ν·1 + D', η = ν + η'. The optimal ν grows like 1/ε, and in the
    // original coordinates the objective is a difference of terms that size.
    let mut problem = ConicProblem::new("step3_dual", Sense::Minimize);
    let w = problem.add_hermitian_psd_var("W", n)?;
    let d = problem.add_hermitian_var("D'", r);
    let eta = problem.add_scalar("eta'");
    let nu = problem.add_nonneg_scalar("nu");

    // η − 2ν√(1−ε²) + Tr[Λ D_r] = η' + Tr[Λ D'] + 2ν(1 − √(1−ε²)) using Tr Λ = 1
    let one_minus_root = epsilon * epsilon / (1.0 + root_floor);
    let mut objective = LinExpr::var(eta).term(nu, 2.0 * one_minus_root);
    for (v, e) in &d.basis {
        let coeff = (0..r).map(|k| values[k] * e[(k, k)].re).sum::<f64>();
        if coeff != 0.0 {
            objective = objective.term(*v, coeff);
        }
    }
    problem.set_objective(objective)?;

    let mut trace = LinExpr::constant(-1.0);
    for (v, _) in w.diagonal() {
        trace = trace.term(*v, 1.0);
    }
    match domain {
        MuDomain::NonNegative => problem.add_inequality("Tr W >= 1", trace)?,
        MuDomain::Free => problem.add_equality("Tr W = 1", trace)?,
    }

    // [[D_r, ν·V†], [ν·V, S]] ⪰ 0 with S = η − (λM − W) = ν + S', under the
    // congruence (x, y) -> (x, V·x + y):
    // [[D' + V†S'V, −V†S'], [−S'V, ν + S']] ⪰ 0.
    let vh = support.adjoint();
    let lift = |g: &CMatrix<f64>| -> CMatrix<f64> {
        let gv = g * &support;
        embed(&(&vh * &gv), side, 0, 0) - embed(&gv.adjoint(), side, 0, r) - embed(&gv, side, r, 0)
            + embed(g, side, r, r)
    };
    let mut block = HermitianLmi::new("[[D, nu], [nu, eta - (lambda M - W)]] >= 0", side);
    for (v, e) in &d.basis {
        block.terms.push((*v, embed(e, side, 0, 0)));
    }
    block.terms.push((nu, embed(&linalg::identity(n), side, r, r)));
    block.terms.push((eta, lift(&linalg::identity(n))));
    for (v, e) in &w.basis {
        let g = e - m_operator(e, &rho_a)?.scale(lambda_i);
        block.terms.push((*v, lift(&g)));
    }
    problem.add_hermitian_lmi(block)?;

    Ok(Step3DualProgram { problem, w, d, eta, nu, support })
}

/// Feasible point `(W, D, η, ν)` of the step-3 dual.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub w: CMatrix<f64>,
    pub d: CMatrix<f64>,
    pub eta: f64,
    pub nu: f64,
    pub dual_objective: f64,
    /// `M(W)` for the `ρ_A` the certificate was built against.
    pub m: CMatrix<f64>,
    /// Orthonormal basis `V` of the support of `ρ`.
    pub support: CMatrix<f64>,
}

impl Step3DualProgram {
    pub fn extract(&self, sol: &ConicSolution, rho_ab: &BipartiteState<f64>, epsilon: f64) -> Result<DualCertificate> {
        require_optimal("step3_dual", sol)?;
        let nu = sol.value(self.nu);
        let w = linalg::hermitize(&self.w.value(&sol.values));
        let d_r = self.d.value(&sol.values) + linalg::identity(self.support.ncols()).scale(nu);
        let d = linalg::hermitize(&(&self.support * d_r * self.support.adjoint()));
        DualCertificate::new(rho_ab, w, d, sol.value(self.eta) + nu, nu, epsilon)
    }
}

impl DualCertificate {
    pub fn new(
        rho_ab: &BipartiteState<f64>,
        w: CMatrix<f64>,
        d: CMatrix<f64>,
        eta: f64,
        nu: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let m = m_operator(&w, &rho_ab.marginal_a())?;
        let (_, support) = support_basis(rho_ab.matrix(), Tolerances::<f64>::default().support_tol)?;
        let dual_objective = Self::objective_of(rho_ab, &d, eta, nu, epsilon);
        Ok(Self { w, d, eta, nu, dual_objective, m, support })
    }

    pub fn objective_of(rho_ab: &BipartiteState<f64>, d: &CMatrix<f64>, eta: f64, nu: f64, epsilon: f64) -> f64 {
        let root_floor = (1.0 - epsilon * epsilon).max(0.0).sqrt();
        eta - 2.0 * nu * root_floor + linalg::trace_of_product(rho_ab.matrix(), d).re
    }

    /// The strictly feasible point `W = α·1`, `D = (ν+β)·1`,
    /// `η = β + ν + (λ−1)·α`; its block matrix has smallest eigenvalue `β`.
    pub fn slater_point(
        rho_ab: &BipartiteState<f64>,
        lambda: f64,
        epsilon: f64,
        alpha: f64,
        beta: f64,
        nu: f64,
    ) -> Result<Self> {
        if !(alpha > 1.0 && beta > 0.0 && nu > 0.0) {
            return Err(Error::InvalidParameter("need alpha > 1, beta > 0, nu > 0".into()));
        }
        let n = rho_ab.dim();
        let w = linalg::identity(n).scale(alpha);
        let d = linalg::identity(n).scale(nu + beta);
        let eta = beta + nu + (lambda - 1.0) * alpha;
        Self::new(rho_ab, w, d, eta, nu, epsilon)
    }

    /// `[[V†DV, ν·V†], [ν·V, η·1 − (λM − W)]]`, which for full-rank `ρ` is
    /// unitarily similar to `[[D, ν·1], [ν·1, η·1 − (λM − W)]]`.
    pub fn block_matrix(&self, lambda: f64) -> CMatrix<f64> {
        let n = self.w.nrows();
        let r = self.support.ncols();
        let side = r + n;
        let vh = self.support.adjoint();
        let lower = linalg::identity::<f64>(n).scale(self.eta) - (self.m.scale(lambda) - &self.w);
        embed(&(&vh * &self.d * &self.support), side, 0, 0)
            + embed(&vh.scale(self.nu), side, 0, r)
            + embed(&self.support.scale(self.nu), side, r, 0)
            + embed(&lower, side, r, r)
    }

    pub fn block_min_eigenvalue(&self, lambda: f64) -> Result<f64> {
        linalg::min_eigenvalue(&self.block_matrix(lambda))
    }

    /// Checks every dual constraint at `tol`, returning the first violation.
    pub fn verify(&self, lambda: f64, tol: f64) -> std::result::Result<(), String> {
        let tr = linalg::trace(&self.w).re;
        if tr < 1.0 - tol {
            return Err(format!("Tr W = {tr} < 1"));
        }
        let checks = [("W", &self.w), ("D", &self.d)];
        for (name, m) in checks {
            let min = linalg::min_eigenvalue(m).map_err(|e| e.to_string())?;
            if min < -tol {
                return Err(format!("{name} has eigenvalue {min:e}"));
            }
        }
        if self.nu < -tol {
            return Err(format!("nu = {} < 0", self.nu));
        }
        let min = self.block_min_eigenvalue(lambda).map_err(|e| e.to_string())?;
        if min < -tol {
            return Err(format!("block matrix has eigenvalue {min:e}"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------- certification

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    /// `gap / max(1, |primal|)`.
    pub relative_gap: f64,
    pub passed: bool,
    pub reason: Option<String>,
}

/// Compares the optima of a primal/dual pair solved independently.
/// Passes when `|p − d| ≤ gap_tol·max(1, |p|)`.
pub fn certify_gap(primal: &ConicSolution, dual: &ConicSolution, gap_tol: f64) -> GapCertificate {
    let (p, d) = (primal.primal_objective, dual.primal_objective);
    let gap = (p - d).abs();
    let relative_gap = gap / p.abs().max(1.0);
    let reason = if !primal.is_optimal() {
        Some(format!("primal status {:?}", primal.status))
    } else if !dual.is_optimal() {
        Some(format!("dual status {:?}", dual.status))
    } else if !(relative_gap <= gap_tol) {
        Some(format!("relative gap {relative_gap:e} exceeds {gap_tol:e}"))
    } else {
        None
    };
    GapCertificate {
        primal_objective: p,
        dual_objective: d,
        gap,
        relative_gap,
        passed: reason.is_none(),
        reason,
    }
}

// ------------------------------------------------------------- rank check

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankCondition {
    Holds,
    Fails,
    Inconclusive,
}

/// Sufficient test for `ρ_A ⊗ ρ̃_B > 0` across the whole ball.
///
/// Inequality chain: for `ρ̃` in the ball,
/// `‖ρ_B − ρ̃_B‖₁ ≤ ‖ρ − ρ̃‖₁ ≤ 2·P(ρ, ρ̃) ≤ 2ε` (partial trace contracts the
/// trace norm; Fuchs–van de Graaf), and Weyl's inequality moves each
/// eigenvalue of the marginal by at most that trace distance. Hence
/// `λ_min(ρ̃_B) ≥ λ_min(ρ_B) − 2ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub condition: RankCondition,
    pub min_eig_rho_a: f64,
    pub min_eig_rho_b: f64,
    /// `2ε`, the worst-case shift of `λ_min(ρ̃_B)` over the ball.
    pub perturbation_bound: f64,
    pub psd_tol: f64,
}

pub fn rank_condition(rho_ab: &BipartiteState<f64>, epsilon: f64, tol: &Tolerances<f64>) -> Result<RankReport> {
    check_epsilon(epsilon)?;
    let min_a = linalg::min_eigenvalue(&rho_ab.marginal_a())?;
    let min_b = linalg::min_eigenvalue(&rho_ab.marginal_b())?;
    let bound = 2.0 * epsilon;
    let condition = if min_a <= tol.psd_tol {
        RankCondition::Fails
    } else if min_b > bound + tol.psd_tol {
        RankCondition::Holds
    } else {
        RankCondition::Inconclusive
    };
    Ok(RankReport {
        condition,
        min_eig_rho_a: min_a,
        min_eig_rho_b: min_b,
        perturbation_bound: bound,
        psd_tol: tol.psd_tol,
    })
}

/// Diagnostic program: the best achievable `λ_min(ρ̃_B)` over the ball,
/// `max t` s.t. `ρ̃_B − t·1 ⪰ 0` with `ρ̃` a unit-trace ball member.
///
/// This is the best case, not the worst case the rank condition needs;
/// minimizing a concave function over the ball is not a convex program.
#[derive(Debug, Clone)]
pub struct RankCheckProgram {
    pub problem: ConicProblem,
    t: Var,
}

pub fn build_rank_check(rho_ab: &BipartiteState<f64>, epsilon: f64) -> Result<RankCheckProgram> {
    check_epsilon(epsilon)?;
    let (da, db, n) = (rho_ab.dim_a(), rho_ab.dim_b(), rho_ab.dim());
    let mut problem = ConicProblem::new("rank_check", Sense::Maximize);
    let t = problem.add_scalar("t");
    let rho_tilde = problem.add_hermitian_var("rho_tilde", n);
    problem.set_objective(LinExpr::var(t))?;

    let mut trace = LinExpr::constant(-1.0);
    for (v, _) in rho_tilde.diagonal() {
        trace = trace.term(*v, 1.0);
    }
    problem.add_equality("Tr rho_tilde = 1", trace)?;

    let mut marginal = HermitianLmi::new("rho_tilde_B - t >= 0", db);
    marginal.terms.push((t, -linalg::identity(db)));
    for (v, e) in &rho_tilde.basis {
        marginal.terms.push((*v, linalg::partial_trace_raw(e, da, db, Subsystem::B)?));
    }
    problem.add_hermitian_lmi(marginal)?;
    FidelityWitness::add(&mut problem, rho_ab, &rho_tilde, epsilon)?;
    Ok(RankCheckProgram { problem, t })
}

impl RankCheckProgram {
    /// Best-case smallest marginal eigenvalue `t*`.
    pub fn best_margin(&self, sol: &ConicSolution) -> Result<f64> {
        require_optimal("rank_check", sol)?;
        Ok(sol.value(self.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{bell, max_mixed, product_of, random_mixed};
    use crate::linalg::diag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn step2_examples() {
        let mm = max_mixed::<f64>(2, 2).unwrap();
        let s = solve_step2(&mm, &mm, &settings()).unwrap();
        assert!((s.lambda_i - 1.0).abs() < 1e-6, "{s:?}");

        let phi = bell::<f64>(2).unwrap();
        let s = solve_step2(&phi, &phi, &settings()).unwrap();
        assert!((s.lambda_i - 4.0).abs() < 1e-6, "{s:?}");
        assert!(s.slack_spectrum_min >= -1e-8);
        assert!(s.lambda_i >= 1.0 - 1e-8);
    }

    #[test]
    fn step2_matches_closed_form_on_random_state() {
        let rho = random_mixed::<f64, _>(2, 2, 4, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let s = solve_step2(&rho, &rho, &settings()).unwrap();
        let cf = measures::dmax_closed_form(rho.matrix(), &rho.marginal_product(), &Tolerances::default()).unwrap();
        assert!((s.lambda_i - cf.exp2()).abs() <= 1e-6 * cf.exp2(), "{} vs {}", s.lambda_i, cf.exp2());
    }

    #[test]
    fn step2_rejects_mismatched_dims() {
        assert!(build_step2(&bell::<f64>(2).unwrap(), &max_mixed::<f64>(2, 3).unwrap()).is_err());
    }

    #[test]
    fn step3_input_validation() {
        let phi = bell::<f64>(2).unwrap();
        assert!(build_step3_primal(&phi, 4.0, 1.2).is_err());
        assert!(build_step3_primal(&phi, -1.0, 0.1).is_err());
        assert!(build_step3_dual(&phi, 4.0, -0.1).is_err());
    }

    #[test]
    fn step3_with_zero_epsilon_is_fixed_slack() {
        let phi = bell::<f64>(2).unwrap();
        let (s3, _) = solve_step3(&phi, 4.5, 0.0, MuDomain::NonNegative, &settings()).unwrap();
        assert!((s3.mu_i - 0.125).abs() < 1e-5, "mu = {}", s3.mu_i);
    }

    #[test]
    fn step3_at_minimal_lambda_has_no_margin() {
        let phi = bell::<f64>(2).unwrap();
        let (s3, _) = solve_step3(&phi, 4.0, 0.0, MuDomain::NonNegative, &settings()).unwrap();
        assert!(s3.mu_i.abs() < 1e-5, "mu = {}", s3.mu_i);
    }

    #[test]
    fn step3_positive_margin_when_smoothing() {
        let phi = bell::<f64>(2).unwrap();
        let (s3, sol) = solve_step3(&phi, 4.0, 0.1, MuDomain::NonNegative, &settings()).unwrap();
        assert!(s3.mu_i > 1e-4, "mu = {}", s3.mu_i);
        assert!(s3.achieved_fidelity >= 0.99 - 1e-8);
        let dual = build_step3_dual(&phi, 4.0, 0.1).unwrap();
        let dsol = conic::solve(&dual.problem, &settings());
        let cert = certify_gap(&sol, &dsol, 1e-7);
        assert!(cert.passed, "{cert:?}");
        let dc = dual.extract(&dsol, &phi, 0.1).unwrap();
        dc.verify(4.0, 1e-7).unwrap();
        assert!((dc.dual_objective - dsol.primal_objective).abs() < 1e-10);
    }

    #[test]
    fn m_operator_examples() {
        let rho_a = diag(&[0.3, 0.7]);
        let id = linalg::identity::<f64>(4);
        let m = m_operator(&id, &rho_a).unwrap();
        assert!(linalg::max_abs_diff(&m, &id) < 1e-15);
        let m = m_operator(&id.scale(2.5), &rho_a).unwrap();
        assert!(linalg::max_abs_diff(&m, &id.scale(2.5)) < 1e-15);
        assert!(m_operator(&linalg::identity(5), &rho_a).is_err());
    }

    #[test]
    fn slater_point_margin_is_beta() {
        let phi = bell::<f64>(2).unwrap();
        for lambda in [0.5, 1.0, 4.0] {
            let p = DualCertificate::slater_point(&phi, lambda, 0.1, 2.0, 1.0, 1.0).unwrap();
            assert!((p.block_min_eigenvalue(lambda).unwrap() - 1.0).abs() < 1e-12);
            p.verify(lambda, 0.0).unwrap();
        }
        assert!(DualCertificate::slater_point(&phi, 1.0, 0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn certify_gap_threshold() {
        let mk = |v: f64| ConicSolution {
            status: conic::SolveStatus::Optimal,
            primal_objective: v,
            dual_objective: v,
            values: vec![],
            blocks: vec![],
            stats: Default::default(),
        };
        let c = certify_gap(&mk(1.0), &mk(1.0), 1e-7);
        assert!(c.passed && c.gap == 0.0);
        let c = certify_gap(&mk(1.0), &mk(1.0 + 2e-7), 1e-7);
        assert!(!c.passed);
        let mut bad = mk(1.0);
        bad.status = conic::SolveStatus::NumericalFailure;
        let c = certify_gap(&bad, &mk(1.0), 1e-7);
        assert!(!c.passed && c.reason.unwrap().contains("primal"));
    }

    #[test]
    fn rank_condition_cases() {
        let tol = Tolerances::default();
        let phi = bell::<f64>(2).unwrap();
        assert_eq!(rank_condition(&phi, 0.01, &tol).unwrap().condition, RankCondition::Holds);
        assert_eq!(rank_condition(&phi, 0.3, &tol).unwrap().condition, RankCondition::Inconclusive);
        let ket0 = diag(&[1.0, 0.0]);
        let p = product_of(&ket0, &ket0).unwrap();
        assert_eq!(rank_condition(&p, 0.1, &tol).unwrap().condition, RankCondition::Fails);
        assert!(rank_condition(&phi, 2.0, &tol).is_err());
    }

    #[test]
    fn rank_check_diagnostic() {
        let phi = bell::<f64>(2).unwrap();
        let prog = build_rank_check(&phi, 0.1).unwrap();
        let t = prog.best_margin(&conic::solve(&prog.problem, &settings())).unwrap();
        assert!(t > 0.0 && t <= 0.5 + 1e-7, "t = {t}");
    }
}
