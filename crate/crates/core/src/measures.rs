//! Fidelity, sine distance and the closed-form max-relative entropy.

use crate::error::Result;
use crate::linalg::{self, CMatrix};
use crate::scalar::Real;
use crate::state::{validate_density, Tolerances};

/// Uhlmann fidelity `(Tr √(√σ ρ √σ))²`, clamped to `[0, 1]`.
///
/// Both arguments must pass density validation at `tol`. Eigenvalues of
/// `σ` and of `√σ ρ √σ` below rounding level (`n·ϵ·λ_max`) are treated as
/// zero.
pub fn fidelity<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>, tol: &Tolerances<T>) -> Result<T> {
    linalg::ensure_same_shape(rho, sigma)?;
    validate_density(rho, tol)?;
    validate_density(sigma, tol)?;
    let (values, vectors) = linalg::eigh(sigma)?;
    let floor = rounding_floor(&values);
    let sqrt_sigma = linalg::spectral_map(&values, &vectors, |l| if l > floor { l.sqrt() } else { T::zero() });
    let inner = &sqrt_sigma * rho * &sqrt_sigma;
    let spectrum = linalg::eigenvalues(&inner)?;
    let floor = rounding_floor(&spectrum);
    let root: T = spectrum
        .into_iter()
        .filter(|&l| l > floor)
        .map(|l| l.sqrt())
        .fold(T::zero(), |a, b| a + b);
    Ok(clamp_unit(root * root))
}

/// `n·ϵ·λ_max` for an ascending spectrum.
fn rounding_floor<T: Real>(spectrum: &[T]) -> T {
    let top = spectrum.last().copied().unwrap_or(T::zero());
    top * T::default_epsilon() * T::from_usize(spectrum.len()).unwrap()
}

/// `√(1 − F(ρ, σ))`.
pub fn sine_distance<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>, tol: &Tolerances<T>) -> Result<T> {
    let f = fidelity(rho, sigma, tol)?;
    Ok(sine_from_fidelity(f))
}

pub fn sine_from_fidelity<T: Real>(f: T) -> T {
    clamp_unit(T::one() - clamp_unit(f)).sqrt()
}

fn clamp_unit<T: Real>(x: T) -> T {
    if x < T::zero() {
        T::zero()
    } else if x > T::one() {
        T::one()
    } else {
        x
    }
}

/// Whether `supp(ρ) ⊆ supp(σ)` at `support_tol`: the part of `ρ` outside
/// the span of σ's eigenvectors with eigenvalue above `support_tol` must have
/// spectral norm at most `support_tol`.
pub fn support_contained<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>, support_tol: T) -> Result<bool> {
    linalg::ensure_same_shape(rho, sigma)?;
    let (values, vectors) = linalg::eigh(sigma)?;
    let outside = linalg::spectral_map(&values, &vectors, |l| if l > support_tol { T::zero() } else { T::one() });
    let residual = &outside * rho * &outside;
    let norm = linalg::max_eigenvalue(&residual)?.abs().max(linalg::min_eigenvalue(&residual)?.abs());
    Ok(norm <= support_tol)
}

/// `D_max(ρ‖σ)` in bits; `+∞` when the support condition fails.
///
/// Uses the pseudo-inverse square root of `σ` on its support, so a
/// rank-deficient `σ` still gives a finite value when `ρ` lives inside it.
pub fn dmax_closed_form<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>, tol: &Tolerances<T>) -> Result<T> {
    linalg::ensure_same_shape(rho, sigma)?;
    linalg::ensure_square(rho)?;
    if !support_contained(rho, sigma, tol.support_tol)? {
        return Ok(T::lit(f64::INFINITY));
    }
    Ok(dmax_ratio(rho, sigma, tol.support_tol)?.log2())
}

/// `‖σ^{−1/2} ρ σ^{−1/2}‖_∞` on σ's support, i.e. the smallest `λ` with
/// `λσ − ρ ⪰ 0` when the supports nest.
pub fn dmax_ratio<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>, support_tol: T) -> Result<T> {
    let (values, vectors) = linalg::eigh(sigma)?;
    let inv_sqrt = linalg::spectral_map(&values, &vectors, |l| {
        if l > support_tol {
            T::one() / l.sqrt()
        } else {
            T::zero()
        }
    });
    let k = &inv_sqrt * rho * &inv_sqrt;
    linalg::max_eigenvalue(&k)
}
