//! Interior-point back-end built on the Clarabel conic solver.
//!
//! Clarabel solves `min q'x s.t. Ax + s = b, s ∈ K`. Rows are laid out as
//! equalities (zero cone), then inequalities (nonnegative cone), then one
//! PSD triangle cone per LMI. PSD slacks use Clarabel's `svec` ordering:
//! upper triangle column by column, off-diagonals scaled by `√2`.

use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{enforce_contract, ConicProblem, ConicSolution, ConicSolver, Sense, SolveStats, SolveStatus, SolverSettings};

// Linking the system BLAS/LAPACK used by the PSD cone.
extern crate openblas_src;

/// KKT regularization. Clarabel's default (1e-8) stalls on the realified
/// step-3 blocks from 3⊗2 upward.
pub const STATIC_REGULARIZATION: f64 = 3e-7;

#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver;

struct Assembly {
    columns: Vec<BTreeMap<usize, f64>>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn assemble(problem: &ConicProblem) -> Assembly {
    let n = problem.num_vars();
    let mut columns: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let push = |columns: &mut Vec<BTreeMap<usize, f64>>, row: usize, var: usize, val: f64| {
        if val != 0.0 {
            *columns[var].entry(row).or_insert(0.0) += val;
        }
    };

    // expr = 0  ->  s = -c0 - a'x ∈ {0}
    for (_, e) in problem.equalities() {
        let row = b.len();
        for (v, a) in &e.terms {
            push(&mut columns, row, v.index(), *a);
        }
        b.push(-e.constant);
    }
    if !problem.equalities().is_empty() {
        cones.push(SupportedConeT::ZeroConeT(problem.equalities().len()));
    }

    // expr ≥ 0  ->  s = c0 + a'x ≥ 0
    for (_, e) in problem.inequalities() {
        let row = b.len();
        for (v, a) in &e.terms {
            push(&mut columns, row, v.index(), -*a);
        }
        b.push(e.constant);
    }
    if !problem.inequalities().is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(problem.inequalities().len()));
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for lmi in problem.lmis() {
        let base = b.len();
        let side = lmi.side;
        for j in 0..side {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { sqrt2 };
                b.push(scale * lmi.constant[(i, j)]);
            }
        }
        for (v, f) in &lmi.terms {
            let mut row = base;
            for j in 0..side {
                for i in 0..=j {
                    let scale = if i == j { 1.0 } else { sqrt2 };
                    push(&mut columns, row, v.index(), -scale * f[(i, j)]);
                    row += 1;
                }
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(side));
    }

    Assembly { columns, b, cones }
}

fn to_csc(rows: usize, columns: &[BTreeMap<usize, f64>]) -> CscMatrix<f64> {
    let mut colptr = Vec::with_capacity(columns.len() + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in columns {
        for (&r, &v) in col {
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, columns.len(), colptr, rowval, nzval)
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIters,
        _ => SolveStatus::NumericalFailure,
    }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, problem: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
        let started = Instant::now();
        let n = problem.num_vars();
        let asm = assemble(problem);
        let m = asm.b.len();
        let a = to_csc(m, &asm.columns);
        let p = CscMatrix::zeros((n, n));
        let sign = match problem.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut q = vec![0.0; n];
        for (v, c) in &problem.objective().terms {
            q[v.index()] += sign * c;
        }

        // Clarabel's own stopping criteria sit an order of magnitude inside
        // the contract checked afterwards.
        let inner_tol = 0.1 * settings.solver_tol;
        let cfg = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(settings.max_iters)
            .tol_feas(inner_tol)
            .tol_gap_abs(inner_tol)
            .tol_gap_rel(inner_tol)
            .static_regularization_constant(STATIC_REGULARIZATION)
            .build()
            .expect("static solver settings are valid");

        let mut solver = match DefaultSolver::new(&p, &q, &a, &asm.b, &asm.cones, cfg) {
            Ok(s) => s,
            Err(_) => return ConicSolution::failed(SolveStatus::NumericalFailure, n),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = map_status(sol.status);
        let constant = problem.objective().constant;
        let values = sol.x.clone();
        let blocks = problem
            .blocks()
            .iter()
            .map(|blk| {
                let mut mat = nalgebra::DMatrix::zeros(blk.side, blk.side);
                for &(i, j, v) in &blk.entries {
                    mat[(i, j)] = values[v.index()];
                    mat[(j, i)] = values[v.index()];
                }
                mat
            })
            .collect();
        let raw = ConicSolution {
            status,
            primal_objective: sign * sol.obj_val + constant,
            dual_objective: sign * sol.obj_val_dual + constant,
            values,
            blocks,
            stats: SolveStats {
                iterations: sol.iterations,
                solve_time: started.elapsed(),
                max_violation: 0.0,
            },
        };
        enforce_contract(problem, settings, raw)
    }
}
