use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::scalar::Real;

/// Embeds a Hermitian `n×n` matrix as the real symmetric `2n×2n` matrix
/// `[[Re H, −Im H], [Im H, Re H]]`.
///
/// `H ⪰ 0` iff the image is PSD, and every eigenvalue of `H` appears twice.
/// Traces double: `Tr realify(H) = 2·Re Tr H`.
pub fn realify<T: Real>(h: &CMatrix<T>, herm_tol: T) -> Result<DMatrix<T>> {
    linalg::ensure_square(h)?;
    let dev = linalg::hermitian_deviation(h);
    if dev > herm_tol {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64_lossy(),
            tol: herm_tol.to_f64_lossy(),
        });
    }
    Ok(realify_unchecked(h))
}

/// Same block layout as [`realify`] without the Hermiticity check.
pub(crate) fn realify_unchecked<T: Real>(h: &CMatrix<T>) -> DMatrix<T> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Left inverse of [`realify`]: averages the two copies of each block and
/// Hermitizes the result.
pub fn derealify<T: Real>(s: &DMatrix<T>) -> Result<CMatrix<T>> {
    if s.nrows() != s.ncols() {
        return Err(Error::NotSquare { rows: s.nrows(), cols: s.ncols() });
    }
    if !s.nrows().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "derealify needs an even side, got {}",
            s.nrows()
        )));
    }
    let n = s.nrows() / 2;
    let half = T::lit(0.5);
    let h = CMatrix::from_fn(n, n, |i, j| {
        let re = (s[(i, j)] + s[(i + n, j + n)]) * half;
        let im = (s[(i + n, j)] - s[(i, j + n)]) * half;
        c(re, im)
    });
    Ok(linalg::hermitize(&h))
}
