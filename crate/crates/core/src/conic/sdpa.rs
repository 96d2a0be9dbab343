//! Sparse SDPA (`.dat-s`) export for cross-checking with external solvers.
//!
//! SDPA's primal form is `minimize c'x s.t. Σ_i x_i F_i − F_0 ⪰ 0` over free
//! `x`, which is exactly the shape of [`ConicProblem`]:
//!
//! - every LMI `C + Σ x_k F_k ⪰ 0` becomes a dense block with `F_0 = −C`;
//! - inequalities `a'x + c ≥ 0` share one diagonal block (negative size);
//! - each equality `a'x + c = 0` contributes two diagonal entries, `≥ 0` and `≤ 0`;
//! - a maximization is exported as minimization of the negated objective.
//!
//! The objective constant and the sense are recorded in the leading comment
//! lines, which SDPA readers skip. Entries are written as
//! `matrix block row col value` with 1-based indices and `row ≤ col`.

use std::fmt::Write;

use super::{ConicProblem, Sense};

pub fn write_sdpa(problem: &ConicProblem) -> String {
    let mut out = String::new();
    let sign = match problem.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n = problem.num_vars();
    let _ = writeln!(out, "\"{}\"", problem.name());
    let _ = writeln!(
        out,
        "* sense={:?} objective_constant={:.16e} (exported objective is sense-adjusted)",
        problem.sense(),
        problem.objective().constant
    );
    let _ = writeln!(out, "{n}");

    let lin_rows = problem.inequalities().len() + 2 * problem.equalities().len();
    let mut block_sizes: Vec<i64> = problem.lmis().iter().map(|l| l.side as i64).collect();
    if lin_rows > 0 {
        block_sizes.push(-(lin_rows as i64));
    }
    let _ = writeln!(out, "{}", block_sizes.len());
    let _ = writeln!(
        out,
        "{}",
        block_sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    );

    let mut c = vec![0.0; n];
    for (v, a) in &problem.objective().terms {
        c[v.index()] += sign * a;
    }
    let _ = writeln!(
        out,
        "{}",
        c.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
    );

    let mut entry = |mat: usize, blk: usize, i: usize, j: usize, v: f64| {
        if v != 0.0 {
            let _ = writeln!(out, "{mat} {blk} {} {} {v:.16e}", i + 1, j + 1);
        }
    };

    for (k, lmi) in problem.lmis().iter().enumerate() {
        let blk = k + 1;
        for j in 0..lmi.side {
            for i in 0..=j {
                entry(0, blk, i, j, -lmi.constant[(i, j)]);
            }
        }
        for (v, f) in &lmi.terms {
            for j in 0..lmi.side {
                for i in 0..=j {
                    entry(v.index() + 1, blk, i, j, f[(i, j)]);
                }
            }
        }
    }

    if lin_rows > 0 {
        let blk = problem.lmis().len() + 1;
        let mut row = 0;
        for (_, e) in problem.inequalities() {
            entry(0, blk, row, row, -e.constant);
            for (v, a) in &e.terms {
                entry(v.index() + 1, blk, row, row, *a);
            }
            row += 1;
        }
        for (_, e) in problem.equalities() {
            for s in [1.0, -1.0] {
                entry(0, blk, row, row, -s * e.constant);
                for (v, a) in &e.terms {
                    entry(v.index() + 1, blk, row, row, s * a);
                }
                row += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{LinExpr, Lmi};
    use nalgebra::DMatrix;

    #[test]
    fn small_problem_layout() {
        // minimize λ s.t. λ·I₂ − diag(1,3) ⪰ 0, λ ≤ 10
        let mut p = ConicProblem::new("eig", Sense::Minimize);
        let l = p.add_scalar("lambda");
        p.set_objective(LinExpr::var(l)).unwrap();
        let mut lmi = Lmi::new("bound", 2);
        lmi.constant = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -3.0]);
        lmi.terms.push((l, DMatrix::identity(2, 2)));
        p.add_lmi(lmi).unwrap();
        p.add_inequality("cap", LinExpr::constant(10.0).term(l, -1.0)).unwrap();

        let text = write_sdpa(&p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "1");
        assert_eq!(lines[3], "2");
        assert_eq!(lines[4], "2 -1");
        assert!(lines[5].starts_with("1.0000000000000000e0"));
        assert!(text.contains("0 1 1 1 1.0000000000000000e0"));
        assert!(text.contains("0 1 2 2 3.0000000000000000e0"));
        assert!(text.contains("1 1 2 2 1.0000000000000000e0"));
        assert!(text.contains("0 2 1 1 -1.0000000000000000e1"));
        assert!(text.contains("1 2 1 1 -1.0000000000000000e0"));
    }
}
