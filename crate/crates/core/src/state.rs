//! Validated bipartite density operators, numerical tolerances and the
//! smoothing ball.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, CMatrix, Subsystem};
use crate::measures;
use crate::scalar::Real;

/// Numerical thresholds used throughout validation, solving and stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    pub herm_tol: T,
    pub psd_tol: T,
    pub trace_tol: T,
    pub mu_tol: T,
    pub gap_tol: T,
    pub solver_tol: T,
    pub support_tol: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            herm_tol: T::lit(1e-10),
            psd_tol: T::lit(1e-8),
            trace_tol: T::lit(1e-8),
            mu_tol: T::lit(1e-7),
            gap_tol: T::lit(1e-7),
            solver_tol: T::lit(1e-8),
            support_tol: T::lit(1e-9),
        }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("herm_tol", self.herm_tol),
            ("psd_tol", self.psd_tol),
            ("trace_tol", self.trace_tol),
            ("mu_tol", self.mu_tol),
            ("gap_tol", self.gap_tol),
            ("solver_tol", self.solver_tol),
            ("support_tol", self.support_tol),
        ];
        for (name, v) in all {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be a nonnegative finite number")));
            }
        }
        Ok(())
    }
}

/// Density operator on `C^{d_A} ⊗ C^{d_B}`: Hermitian, PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState<T: Real> {
    dim_a: usize,
    dim_b: usize,
    matrix: CMatrix<T>,
}

impl<T: Real> BipartiteState<T> {
    /// Validates `matrix` against `tol` and wraps it.
    pub fn new(matrix: CMatrix<T>, dim_a: usize, dim_b: usize, tol: &Tolerances<T>) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidParameter("subsystem dimensions must be positive".into()));
        }
        let n = linalg::ensure_square(&matrix)?;
        if n != dim_a * dim_b {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} for d_A={dim_a}, d_B={dim_b}", dim_a * dim_b),
                got: format!("{n}x{n}"),
            });
        }
        validate_density(&matrix, tol)?;
        Ok(Self { dim_a, dim_b, matrix })
    }

    /// Hermitizes, clips negative eigenvalues and renormalizes before
    /// wrapping. Fails only when nothing positive is left.
    pub fn from_projection(matrix: &CMatrix<T>, dim_a: usize, dim_b: usize) -> Result<Self> {
        let n = linalg::ensure_square(matrix)?;
        if n != dim_a * dim_b {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", dim_a * dim_b),
                got: format!("{n}x{n}"),
            });
        }
        linalg::ensure_finite(matrix)?;
        let (values, vectors) = linalg::eigh(matrix)?;
        let clipped = linalg::spectral_map(&values, &vectors, |l| if l > T::zero() { l } else { T::zero() });
        let tr = linalg::trace(&clipped).re;
        if !(tr > T::zero()) {
            return Err(Error::BadTrace { trace: tr.to_f64_lossy(), tol: 0.0 });
        }
        let matrix = linalg::hermitize(&clipped.unscale(tr));
        Ok(Self { dim_a, dim_b, matrix })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    /// Total dimension `d_A·d_B`.
    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn partial_trace(&self, keep: Subsystem) -> CMatrix<T> {
        linalg::partial_trace_raw(&self.matrix, self.dim_a, self.dim_b, keep)
            .expect("dimensions checked at construction")
    }

    pub fn marginal_a(&self) -> CMatrix<T> {
        self.partial_trace(Subsystem::A)
    }

    pub fn marginal_b(&self) -> CMatrix<T> {
        self.partial_trace(Subsystem::B)
    }

    /// `ρ_A ⊗ ρ_B`, the product of this state's own marginals.
    pub fn marginal_product(&self) -> CMatrix<T> {
        linalg::kron(&self.marginal_a(), &self.marginal_b())
    }

    /// Conjugates by `U` (any square unitary of matching size).
    pub fn conjugated(&self, unitary: &CMatrix<T>) -> Result<Self> {
        linalg::ensure_same_shape(&self.matrix, unitary)?;
        let m = linalg::hermitize(&(unitary * &self.matrix * unitary.adjoint()));
        Ok(Self { dim_a: self.dim_a, dim_b: self.dim_b, matrix: m })
    }

    /// Convex combination `(1−t)·self + t·other`.
    pub fn blend(&self, other: &Self, t: T) -> Result<Self> {
        if self.dim_a != other.dim_a || self.dim_b != other.dim_b {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.dim_a, self.dim_b),
                got: format!("{}x{}", other.dim_a, other.dim_b),
            });
        }
        let m = self.matrix.scale(T::one() - t) + other.matrix.scale(t);
        Ok(Self { dim_a: self.dim_a, dim_b: self.dim_b, matrix: m })
    }
}

/// Checks Hermiticity, unit trace and positivity of a square matrix.
pub fn validate_density<T: Real>(m: &CMatrix<T>, tol: &Tolerances<T>) -> Result<()> {
    linalg::ensure_square(m)?;
    linalg::ensure_finite(m)?;
    let dev = linalg::hermitian_deviation(m);
    if dev > tol.herm_tol {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64_lossy(),
            tol: tol.herm_tol.to_f64_lossy(),
        });
    }
    let tr = linalg::trace(m).re;
    if (tr - T::one()).abs() > tol.trace_tol {
        return Err(Error::BadTrace {
            trace: tr.to_f64_lossy(),
            tol: tol.trace_tol.to_f64_lossy(),
        });
    }
    let min = linalg::min_eigenvalue(m)?;
    if min < -tol.psd_tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min.to_f64_lossy(),
            tol: tol.psd_tol.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `B^ε(ρ)`: all states whose fidelity with the center is at least `1 − ε²`.
#[derive(Debug, Clone)]
pub struct SmoothingBall<T: Real> {
    epsilon: T,
    center: BipartiteState<T>,
}

impl<T: Real> SmoothingBall<T> {
    pub fn new(center: BipartiteState<T>, epsilon: T) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { epsilon, center })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn center(&self) -> &BipartiteState<T> {
        &self.center
    }

    /// Smallest fidelity a member may have, `1 − ε²`.
    pub fn fidelity_floor(&self) -> T {
        T::one() - self.epsilon * self.epsilon
    }

    /// Membership with an absolute slack on the fidelity threshold.
    pub fn contains(&self, candidate: &BipartiteState<T>, slack: T) -> Result<bool> {
        let f = measures::fidelity(self.center.matrix(), candidate.matrix(), &Tolerances::default())?;
        Ok(f >= self.fidelity_floor() - slack)
    }
}

pub fn check_epsilon<T: Real>(epsilon: T) -> Result<()> {
    if !(epsilon >= T::zero() && epsilon <= T::one()) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    Ok(())
}

/// On-disk state document: `matrix` holds rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub dim_a: usize,
    pub dim_b: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl StateDocument {
    pub fn from_state(state: &BipartiteState<f64>) -> Self {
        let m = state.matrix();
        let matrix = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self { dim_a: state.dim_a(), dim_b: state.dim_b(), matrix }
    }

    pub fn into_state(self, tol: &Tolerances<f64>) -> Result<BipartiteState<f64>> {
        let n = self.matrix.len();
        if let Some(bad) = self.matrix.iter().position(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("row of length {n}"),
                got: format!("row {bad} of length {}", self.matrix[bad].len()),
            });
        }
        let m = CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i][j];
            num_complex::Complex::new(re, im)
        });
        BipartiteState::new(m, self.dim_a, self.dim_b, tol)
    }
}

impl BipartiteState<f64> {
    pub fn from_json(text: &str, tol: &Tolerances<f64>) -> Result<Self> {
        let doc: StateDocument = serde_json::from_str(text)?;
        doc.into_state(tol)
    }

    /// Pretty JSON with every number at 17 significant digits.
    pub fn to_json(&self) -> String {
        json::to_string_pretty(&StateDocument::from_state(self)).expect("state document serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr, diag};

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[cr(0.5), c(0.1, 0.0), cr(0.0), cr(0.5)]);
        assert!(matches!(BipartiteState::new(m, 1, 2, &tol()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn rejects_bad_trace_and_negative_spectrum() {
        let m = diag(&[0.5, 0.6]);
        assert!(matches!(BipartiteState::new(m, 1, 2, &tol()), Err(Error::BadTrace { .. })));
        let m = diag(&[1.5, -0.5]);
        assert!(matches!(BipartiteState::new(m, 1, 2, &tol()), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn rejects_dimension_mismatch_and_nan() {
        let m = diag(&[0.25; 4]);
        assert!(matches!(BipartiteState::new(m.clone(), 2, 3, &tol()), Err(Error::DimensionMismatch { .. })));
        let mut m = m;
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(BipartiteState::new(m, 2, 2, &tol()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn projection_clips_and_renormalizes() {
        let m = diag(&[0.7, 0.4, -1e-9, 0.0]);
        let s = BipartiteState::from_projection(&m, 2, 2).unwrap();
        validate_density(s.matrix(), &tol()).unwrap();
        assert!((s.matrix()[(0, 0)].re - 0.7 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[cr(1.0 / 3.0), c(0.1, -0.2), c(0.1, 0.2), cr(2.0 / 3.0)],
        );
        let s = BipartiteState::new(m, 1, 2, &tol()).unwrap();
        let text = s.to_json();
        let back = BipartiteState::from_json(&text, &tol()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_rejects_ragged_rows() {
        let text = r#"{"dim_a":1,"dim_b":2,"matrix":[[[1,0],[0,0]],[[0,0]]]}"#;
        assert!(BipartiteState::from_json(text, &tol()).is_err());
    }

    #[test]
    fn epsilon_range() {
        assert!(check_epsilon(0.0).is_ok());
        assert!(check_epsilon(1.0).is_ok());
        assert!(check_epsilon(-0.01).is_err());
        assert!(check_epsilon(1.5).is_err());
        assert!(check_epsilon(f64::NAN).is_err());
    }
}
