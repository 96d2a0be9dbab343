//! Dense complex linear algebra on `nalgebra` matrices.
//!
//! Every spectral routine Hermitizes its input as `(M + M†)/2` first, so
//! round-off asymmetry coming back from the conic solver never reaches the
//! eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense complex matrix, row/column indexed.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Which tensor factor of `H_A ⊗ H_B` to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subsystem {
    A,
    B,
}

pub fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

pub fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

/// Real diagonal matrix lifted to complex.
pub fn diag<T: Real>(entries: &[T]) -> CMatrix<T> {
    let n = entries.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &d) in entries.iter().enumerate() {
        m[(i, i)] = cr(d);
    }
    m
}

/// Projector `|v⟩⟨v|` (no normalization applied).
pub fn outer<T: Real>(v: &[Complex<T>]) -> CMatrix<T> {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// Kronecker product; entry `(i·rb + k, j·cb + l)` is `a[i,j]·b[k,l]`.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn ensure_square<T: Real>(m: &CMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite<T: Real>(m: &CMatrix<T>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn ensure_same_shape<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.nrows(), a.ncols()),
            got: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    Ok(())
}

pub fn hermitize<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).scale(T::lit(0.5))
}

/// Largest entry modulus of `M − M†`.
pub fn hermitian_deviation<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows().min(m.ncols());
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d = modulus(m[(i, j)] - m[(j, i)].conj());
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| modulus(*x - *y))
        .fold(T::zero(), |acc, d| if d > acc { d } else { acc })
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + *z)
}

/// `Tr[A·B]` without forming the product.
pub fn trace_of_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Hermitian eigendecomposition with eigenvalues in ascending order and
/// eigenvectors as the matching columns.
pub fn eigh<T: Real>(m: &CMatrix<T>) -> Result<(Vec<T>, CMatrix<T>)> {
    ensure_square(m)?;
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok((values, vectors))
}

pub fn eigenvalues<T: Real>(m: &CMatrix<T>) -> Result<Vec<T>> {
    Ok(eigh(m)?.0)
}

/// Smallest eigenvalue of the Hermitized input.
pub fn min_eigenvalue<T: Real>(m: &CMatrix<T>) -> Result<T> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    Ok(eigenvalues(m)?[0])
}

pub fn max_eigenvalue<T: Real>(m: &CMatrix<T>) -> Result<T> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    Ok(*eigenvalues(m)?.last().unwrap())
}

/// Rebuilds `V·diag(f(λ))·V†`.
pub fn spectral_map<T: Real>(values: &[T], vectors: &CMatrix<T>, f: impl Fn(T) -> T) -> CMatrix<T> {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        let w = f(lam);
        if w == T::zero() {
            continue;
        }
        let col = vectors.column(k);
        for i in 0..n {
            let vi = col[i] * cr(w);
            for j in 0..n {
                out[(i, j)] += vi * col[j].conj();
            }
        }
    }
    out
}

/// Square root of a PSD matrix; eigenvalues below zero are clipped.
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (values, vectors) = eigh(m)?;
    Ok(spectral_map(&values, &vectors, |l| {
        if l > T::zero() {
            l.sqrt()
        } else {
            T::zero()
        }
    }))
}

/// Partial trace of an operator on `C^{dim_a} ⊗ C^{dim_b}`, keeping `keep`.
pub fn partial_trace_raw<T: Real>(
    m: &CMatrix<T>,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<CMatrix<T>> {
    let n = ensure_square(m)?;
    if n != dim_a * dim_b {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", dim_a * dim_b, dim_a * dim_b),
            got: format!("{}x{}", n, n),
        });
    }
    Ok(match keep {
        Subsystem::A => CMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).fold(cr(T::zero()), |acc, k| acc + m[(i * dim_b + k, j * dim_b + k)])
        }),
        Subsystem::B => CMatrix::from_fn(dim_b, dim_b, |k, l| {
            (0..dim_a).fold(cr(T::zero()), |acc, i| acc + m[(i * dim_b + k, i * dim_b + l)])
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix<f64> {
        CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&identity::<f64>(2), &identity(2)), identity(4));
        assert_eq!(
            kron(&diag(&[1.0, 2.0]), &diag(&[3.0, 4.0])),
            diag(&[3.0, 4.0, 6.0, 8.0])
        );
        let p0 = diag(&[1.0, 0.0]);
        let p1 = diag(&[0.0, 1.0]);
        assert_eq!(kron(&p0, &p1), diag(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn kron_of_rectangular_shapes() {
        let a = CMatrix::<f64>::from_fn(2, 3, |i, j| cr((i * 3 + j) as f64));
        let b = CMatrix::<f64>::from_fn(3, 1, |i, _| c(1.0, i as f64));
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 3));
        assert_eq!(k[(1 * 3 + 2, 2)], a[(1, 2)] * b[(2, 0)]);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&identity::<f64>(3)).unwrap() - 1.0).abs() < 1e-14);
        assert!((min_eigenvalue(&diag(&[-2.0f64, 5.0])).unwrap() + 2.0).abs() < 1e-14);
        assert!((min_eigenvalue(&pauli_x()).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_rejects_rectangular() {
        let m = CMatrix::<f64>::zeros(2, 3);
        assert!(matches!(min_eigenvalue(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[cr(2.0), c(0.0, -1.0), c(0.0, 1.0), cr(2.0)],
        );
        let (vals, vecs): (Vec<f64>, _) = eigh(&m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let back = spectral_map(&vals, &vecs, |l| l);
        assert!(max_abs_diff(&back, &m) < 1e-14);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = diag(&[4.0, 9.0, 0.0]);
        let s = psd_sqrt(&m).unwrap();
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-13);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = identity::<f64>(6);
        assert!(partial_trace_raw(&m, 2, 2, Subsystem::A).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let m = diag(&[-2.0f32, 5.0]);
        assert!((min_eigenvalue(&m).unwrap() + 2.0).abs() < 1e-6);
        let k = kron(&identity::<f32>(2), &m);
        assert_eq!(k.nrows(), 4);
    }
}
