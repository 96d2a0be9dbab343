//! Real symmetric-cone programs and the solver seam.
//!
//! A [`ConicProblem`] is a list of real scalar variables, a linear objective,
//! linear equalities, linear inequalities (`expr ≥ 0`) and linear matrix
//! inequalities `C + Σ_k x_k F_k ⪰ 0`. PSD matrix variables are declared
//! through [`ConicProblem::add_psd_block`], which expands a block into its
//! upper-triangular entries plus one LMI.
//!
//! Complex Hermitian constraints are written as a [`HermitianLmi`] and
//! realified once when added, so builders can stay in complex terms.

mod clarabel_backend;
mod realify;
pub mod sdpa;

use std::time::Duration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cr, CMatrix};

pub use clarabel_backend::ClarabelSolver;
pub use realify::{derealify, realify};

/// Handle to a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `Σ coeff·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: Var) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(mut self, v: Var, coeff: f64) -> Self {
        self.terms.push((v, coeff));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * x[v.0]).sum::<f64>() + self.constant
    }
}

/// `constant + Σ x_k·F_k ⪰ 0` with real symmetric coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmi {
    pub name: String,
    pub side: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<(Var, DMatrix<f64>)>,
}

impl Lmi {
    pub fn new(name: impl Into<String>, side: usize) -> Self {
        Self {
            name: name.into(),
            side,
            constant: DMatrix::zeros(side, side),
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (v, f) in &self.terms {
            m += f * x[v.0];
        }
        m
    }
}

/// Complex counterpart of [`Lmi`]: `constant + Σ x_k·H_k ⪰ 0` with
/// Hermitian coefficients and real scalar variables.
#[derive(Debug, Clone)]
pub struct HermitianLmi {
    pub name: String,
    pub side: usize,
    pub constant: CMatrix<f64>,
    pub terms: Vec<(Var, CMatrix<f64>)>,
}

impl HermitianLmi {
    pub fn new(name: impl Into<String>, side: usize) -> Self {
        Self {
            name: name.into(),
            side,
            constant: CMatrix::zeros(side, side),
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> CMatrix<f64> {
        let mut m = self.constant.clone();
        for (v, h) in &self.terms {
            m += h.scale(x[v.0]);
        }
        m
    }
}

/// Complex Hermitian `n×n` decision matrix parameterized by `n²` real
/// scalars: diagonal entries, then real and imaginary parts above the
/// diagonal.
#[derive(Debug, Clone)]
pub struct HermitianVar {
    pub side: usize,
    /// `(variable, basis matrix)`; the matrix equals `Σ x_k·E_k`.
    pub basis: Vec<(Var, CMatrix<f64>)>,
}

impl HermitianVar {
    pub fn value(&self, x: &[f64]) -> CMatrix<f64> {
        let mut m = CMatrix::zeros(self.side, self.side);
        for (v, e) in &self.basis {
            m += e.scale(x[v.0]);
        }
        m
    }

    /// Variables carrying the diagonal, in order.
    pub fn diagonal(&self) -> &[(Var, CMatrix<f64>)] {
        &self.basis[..self.side]
    }
}

/// General complex `rows×cols` decision matrix: one real and one imaginary
/// scalar per entry.
#[derive(Debug, Clone)]
pub struct ComplexVar {
    pub rows: usize,
    pub cols: usize,
    re: Vec<Var>,
    im: Vec<Var>,
}

impl ComplexVar {
    /// Variable holding `Re X[i,j]`.
    pub fn re(&self, i: usize, j: usize) -> Var {
        self.re[i * self.cols + j]
    }

    pub fn im(&self, i: usize, j: usize) -> Var {
        self.im[i * self.cols + j]
    }

    pub fn value(&self, x: &[f64]) -> CMatrix<f64> {
        CMatrix::from_fn(self.rows, self.cols, |i, j| c(x[self.re(i, j).0], x[self.im(i, j).0]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub name: String,
    pub side: usize,
    /// Upper-triangular entries `(i, j, var)`, `i ≤ j`, column by column.
    pub entries: Vec<(usize, usize, Var)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    name: String,
    sense: Sense,
    var_names: Vec<String>,
    blocks: Vec<PsdBlock>,
    objective: LinExpr,
    equalities: Vec<(String, LinExpr)>,
    inequalities: Vec<(String, LinExpr)>,
    lmis: Vec<Lmi>,
}

impl ConicProblem {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            var_names: Vec::new(),
            blocks: Vec::new(),
            objective: LinExpr::default(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lmis: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.var_names[v.0]
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn equalities(&self) -> &[(String, LinExpr)] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[(String, LinExpr)] {
        &self.inequalities
    }

    pub fn lmis(&self) -> &[Lmi] {
        &self.lmis
    }

    pub fn blocks(&self) -> &[PsdBlock] {
        &self.blocks
    }

    /// Free real scalar.
    pub fn add_scalar(&mut self, name: impl Into<String>) -> Var {
        self.var_names.push(name.into());
        Var(self.var_names.len() - 1)
    }

    /// Scalar constrained to be `≥ 0`, modeled as a 1×1 PSD block.
    pub fn add_nonneg_scalar(&mut self, name: impl Into<String>) -> Var {
        let name = name.into();
        let v = self.add_scalar(name.clone());
        let mut lmi = Lmi::new(format!("{name} >= 0"), 1);
        lmi.terms.push((v, DMatrix::from_element(1, 1, 1.0)));
        self.lmis.push(lmi);
        v
    }

    /// Real symmetric PSD matrix variable; returns its block index.
    pub fn add_psd_block(&mut self, name: impl Into<String>, side: usize) -> usize {
        let name = name.into();
        let mut entries = Vec::with_capacity(side * (side + 1) / 2);
        let mut lmi = Lmi::new(format!("{name} psd"), side);
        for j in 0..side {
            for i in 0..=j {
                let v = self.add_scalar(format!("{name}[{i},{j}]"));
                let mut f = DMatrix::zeros(side, side);
                f[(i, j)] = 1.0;
                f[(j, i)] = 1.0;
                lmi.terms.push((v, f));
                entries.push((i, j, v));
            }
        }
        self.lmis.push(lmi);
        self.blocks.push(PsdBlock { name, side, entries });
        self.blocks.len() - 1
    }

    /// Linear form `Σ c_ij X_ij` over a PSD block.
    pub fn block_inner(&self, block: usize, c: &DMatrix<f64>) -> LinExpr {
        let mut e = LinExpr::new();
        for &(i, j, v) in &self.blocks[block].entries {
            let coeff = if i == j { c[(i, i)] } else { c[(i, j)] + c[(j, i)] };
            if coeff != 0.0 {
                e.terms.push((v, coeff));
            }
        }
        e
    }

    /// Hermitian matrix variable of side `n` (unconstrained; add an LMI for
    /// positivity).
    pub fn add_hermitian_var(&mut self, name: &str, n: usize) -> HermitianVar {
        let mut basis = Vec::with_capacity(n * n);
        for i in 0..n {
            let v = self.add_scalar(format!("{name}[{i},{i}]"));
            let mut e = CMatrix::zeros(n, n);
            e[(i, i)] = cr(1.0);
            basis.push((v, e));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.add_scalar(format!("re {name}[{i},{j}]"));
                let mut e = CMatrix::zeros(n, n);
                e[(i, j)] = cr(1.0);
                e[(j, i)] = cr(1.0);
                basis.push((v, e));
                let v = self.add_scalar(format!("im {name}[{i},{j}]"));
                let mut e = CMatrix::zeros(n, n);
                e[(i, j)] = c(0.0, 1.0);
                e[(j, i)] = c(0.0, -1.0);
                basis.push((v, e));
            }
        }
        HermitianVar { side: n, basis }
    }

    /// Hermitian matrix variable constrained to be PSD.
    pub fn add_hermitian_psd_var(&mut self, name: &str, n: usize) -> Result<HermitianVar> {
        let h = self.add_hermitian_var(name, n);
        let mut lmi = HermitianLmi::new(format!("{name} psd"), n);
        lmi.terms = h.basis.clone();
        self.add_hermitian_lmi(lmi)?;
        Ok(h)
    }

    pub fn add_complex_var(&mut self, name: &str, rows: usize, cols: usize) -> ComplexVar {
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(self.add_scalar(format!("re {name}[{i},{j}]")));
                im.push(self.add_scalar(format!("im {name}[{i},{j}]")));
            }
        }
        ComplexVar { rows, cols, re, im }
    }

    fn check_expr(&self, what: &str, e: &LinExpr) -> Result<()> {
        if !e.constant.is_finite() {
            return Err(Error::InvalidParameter(format!("{what}: non-finite constant")));
        }
        for (v, a) in &e.terms {
            if v.0 >= self.var_names.len() {
                return Err(Error::InvalidParameter(format!("{what}: undeclared variable #{}", v.0)));
            }
            if !a.is_finite() {
                return Err(Error::InvalidParameter(format!("{what}: non-finite coefficient")));
            }
        }
        Ok(())
    }

    pub fn set_objective(&mut self, objective: LinExpr) -> Result<()> {
        self.check_expr("objective", &objective)?;
        self.objective = objective;
        Ok(())
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, name: impl Into<String>, expr: LinExpr) -> Result<()> {
        let name = name.into();
        self.check_expr(&name, &expr)?;
        self.equalities.push((name, expr));
        Ok(())
    }

    /// `expr ≥ 0`.
    pub fn add_inequality(&mut self, name: impl Into<String>, expr: LinExpr) -> Result<()> {
        let name = name.into();
        self.check_expr(&name, &expr)?;
        self.inequalities.push((name, expr));
        Ok(())
    }

    pub fn add_lmi(&mut self, lmi: Lmi) -> Result<()> {
        let check = |m: &DMatrix<f64>| -> Result<()> {
            if m.shape() != (lmi.side, lmi.side) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{0}x{0}", lmi.side),
                    got: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{}: non-finite coefficient", lmi.name)));
            }
            if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
                return Err(Error::InvalidParameter(format!("{}: coefficient not symmetric", lmi.name)));
            }
            Ok(())
        };
        check(&lmi.constant)?;
        for (v, f) in &lmi.terms {
            if v.0 >= self.var_names.len() {
                return Err(Error::InvalidParameter(format!("{}: undeclared variable #{}", lmi.name, v.0)));
            }
            check(f)?;
        }
        self.lmis.push(lmi);
        Ok(())
    }

    /// Realifies every coefficient and adds the resulting real LMI.
    pub fn add_hermitian_lmi(&mut self, lmi: HermitianLmi) -> Result<()> {
        let tol = 1e-12;
        let mut real = Lmi::new(lmi.name, 2 * lmi.side);
        real.constant = realify(&lmi.constant, tol)?;
        real.terms = lmi
            .terms
            .iter()
            .map(|(v, h)| Ok((*v, realify(h, tol)?)))
            .collect::<Result<_>>()?;
        self.add_lmi(real)
    }

    /// Largest violation of any constraint at `x`: equality residuals,
    /// negative inequality values, and negative LMI eigenvalues.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (_, e) in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        for (_, e) in &self.inequalities {
            worst = worst.max(-e.eval(x));
        }
        for lmi in &self.lmis {
            let m = lmi.eval(x);
            let m = (&m + m.transpose()) * 0.5;
            let min = nalgebra::SymmetricEigen::new(m).eigenvalues.min();
            worst = worst.max(-min);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: u32,
    pub solve_time: Duration,
    /// Largest constraint violation of the returned point.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Objective of the returned primal point, in the problem's own sense.
    pub primal_objective: f64,
    /// Objective of the solver's dual certificate, in the same sense.
    pub dual_objective: f64,
    pub values: Vec<f64>,
    /// One matrix per declared PSD block.
    pub blocks: Vec<DMatrix<f64>>,
    pub stats: SolveStats,
}

impl ConicSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn failed(status: SolveStatus, n_vars: usize) -> Self {
        Self {
            status,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            values: vec![f64::NAN; n_vars],
            blocks: Vec::new(),
            stats: SolveStats::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Feasibility accuracy demanded of returned points.
    pub solver_tol: f64,
    /// Relative primal/dual objective gap accepted as optimal.
    pub gap_tol: f64,
    pub max_iters: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { solver_tol: 1e-8, gap_tol: 1e-7, max_iters: 200 }
    }
}

/// The single seam between problem assembly and a numerical back-end.
pub trait ConicSolver: Send + Sync {
    fn solve(&self, problem: &ConicProblem, settings: &SolverSettings) -> ConicSolution;
}

/// Solves with the default back-end.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    ClarabelSolver.solve(problem, settings)
}

/// Applies the post-solve contract to a raw back-end result: an `Optimal`
/// claim survives only if the objective gap and every constraint hold at
/// the stated tolerances.
pub(crate) fn enforce_contract(problem: &ConicProblem, settings: &SolverSettings, mut sol: ConicSolution) -> ConicSolution {
    sol.stats.max_violation = problem.max_violation(&sol.values);
    if sol.status == SolveStatus::Optimal {
        let gap = (sol.primal_objective - sol.dual_objective).abs();
        let gap_ok = gap <= settings.gap_tol * (1.0 + sol.primal_objective.abs());
        let feas_ok = sol.stats.max_violation <= settings.solver_tol;
        if !(gap_ok && feas_ok) {
            sol.status = SolveStatus::NumericalFailure;
        }
    }
    sol
}
