//! Standard families of bipartite states and seeded random draws.
//!
//! Conventions:
//! - `bell(d)` is `|Φ⁺⟩ = d^{-1/2} Σ_i |ii⟩`.
//! - `isotropic(d, p) = p·Φ⁺ + (1 − p)·1/d²`.
//! - `werner(d, p) = p·P_anti/tr(P_anti) + (1 − p)·P_sym/tr(P_sym)` with
//!   `P_sym/anti = (1 ± F)/2` and `F` the swap; `p = 1` on `d = 2` is the singlet.
//! - Random pure states normalize a complex Gaussian vector; random mixed
//!   states normalize `G·G†` for a complex Gaussian `G` with `rank` columns.
//!   Both draw from ChaCha8 seeded with the given seed, so output is
//!   reproducible across platforms.

use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMatrix};
use crate::scalar::Real;
use crate::state::{BipartiteState, Tolerances};

/// Recipe for one of the supported state families.
#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Bell { d: usize },
    Isotropic { d: usize, p: f64 },
    Werner { d: usize, p: f64 },
    MaxMixed { dim_a: usize, dim_b: usize },
    Product { rho_a: CMatrix<f64>, rho_b: CMatrix<f64> },
    RandomPure { dim_a: usize, dim_b: usize, seed: u64 },
    RandomMixed { dim_a: usize, dim_b: usize, rank: usize, seed: u64 },
}

pub fn generate_state(kind: &StateKind) -> Result<BipartiteState<f64>> {
    match kind {
        StateKind::Bell { d } => bell(*d),
        StateKind::Isotropic { d, p } => isotropic(*d, *p),
        StateKind::Werner { d, p } => werner(*d, *p),
        StateKind::MaxMixed { dim_a, dim_b } => max_mixed(*dim_a, *dim_b),
        StateKind::Product { rho_a, rho_b } => product_of(rho_a, rho_b),
        StateKind::RandomPure { dim_a, dim_b, seed } => {
            random_pure(*dim_a, *dim_b, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
        StateKind::RandomMixed { dim_a, dim_b, rank, seed } => {
            random_mixed(*dim_a, *dim_b, *rank, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
    }
}

fn check_dim(d: usize, what: &str) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("{what} must be at least 2, got {d}")));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
    }
    Ok(())
}

pub fn bell<T: Real>(d: usize) -> Result<BipartiteState<T>> {
    check_dim(d, "d")?;
    let w = T::one() / T::from_usize(d).unwrap();
    let m = CMatrix::from_fn(d * d, d * d, |r, c| {
        if r % (d + 1) == 0 && c % (d + 1) == 0 {
            cr(w)
        } else {
            cr(T::zero())
        }
    });
    BipartiteState::new(m, d, d, &Tolerances::default())
}

pub fn max_mixed<T: Real>(dim_a: usize, dim_b: usize) -> Result<BipartiteState<T>> {
    if dim_a == 0 || dim_b == 0 {
        return Err(Error::InvalidParameter("dimensions must be positive".into()));
    }
    let n = dim_a * dim_b;
    let m = linalg::identity::<T>(n).unscale(T::from_usize(n).unwrap());
    BipartiteState::new(m, dim_a, dim_b, &Tolerances::default())
}

pub fn isotropic<T: Real>(d: usize, p: f64) -> Result<BipartiteState<T>> {
    check_dim(d, "d")?;
    check_probability(p)?;
    let p = T::lit(p);
    let phi = bell::<T>(d)?.into_matrix();
    let noise = linalg::identity::<T>(d * d).unscale(T::from_usize(d * d).unwrap());
    let m = phi.scale(p) + noise.scale(T::one() - p);
    BipartiteState::new(m, d, d, &Tolerances::default())
}

/// Swap operator `F|ij⟩ = |ji⟩` on `C^d ⊗ C^d`.
pub fn swap<T: Real>(d: usize) -> CMatrix<T> {
    let mut f = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            f[(j * d + i, i * d + j)] = cr(T::one());
        }
    }
    f
}

pub fn werner<T: Real>(d: usize, p: f64) -> Result<BipartiteState<T>> {
    check_dim(d, "d")?;
    check_probability(p)?;
    let id = linalg::identity::<T>(d * d);
    let f = swap::<T>(d);
    let half = T::lit(0.5);
    let sym = (&id + &f).scale(half);
    let anti = (&id - &f).scale(half);
    let dd = T::from_usize(d).unwrap();
    let sym_dim = dd * (dd + T::one()) * half;
    let anti_dim = dd * (dd - T::one()) * half;
    let p = T::lit(p);
    let m = anti.scale(p / anti_dim) + sym.scale((T::one() - p) / sym_dim);
    BipartiteState::new(m, d, d, &Tolerances::default())
}

pub fn product_of<T: Real>(rho_a: &CMatrix<T>, rho_b: &CMatrix<T>) -> Result<BipartiteState<T>> {
    let tol = Tolerances::default();
    crate::state::validate_density(rho_a, &tol)?;
    crate::state::validate_density(rho_b, &tol)?;
    BipartiteState::new(linalg::kron(rho_a, rho_b), rho_a.nrows(), rho_b.nrows(), &tol)
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re), T::lit(im))
}

pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Density matrix `G·G†/Tr` on a single system of dimension `d`.
pub fn random_density<T: Real, R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<CMatrix<T>> {
    if d == 0 || rank == 0 || rank > d {
        return Err(Error::InvalidParameter(format!("rank must lie in [1, {d}], got {rank}")));
    }
    let g = gaussian_matrix::<T, R>(d, rank, rng);
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    Ok(linalg::hermitize(&m.unscale(tr)))
}

pub fn random_pure<T: Real, R: Rng + ?Sized>(dim_a: usize, dim_b: usize, rng: &mut R) -> Result<BipartiteState<T>> {
    check_dim(dim_a, "d_A")?;
    check_dim(dim_b, "d_B")?;
    let n = dim_a * dim_b;
    let v: Vec<Complex<T>> = (0..n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
    let v: Vec<Complex<T>> = v.into_iter().map(|z| z.unscale(norm)).collect();
    let m = linalg::hermitize(&linalg::outer(&v));
    BipartiteState::new(m, dim_a, dim_b, &Tolerances::default())
}

pub fn random_mixed<T: Real, R: Rng + ?Sized>(
    dim_a: usize,
    dim_b: usize,
    rank: usize,
    rng: &mut R,
) -> Result<BipartiteState<T>> {
    check_dim(dim_a, "d_A")?;
    check_dim(dim_b, "d_B")?;
    let m = random_density(dim_a * dim_b, rank, rng)?;
    BipartiteState::new(m, dim_a, dim_b, &Tolerances::default())
}

/// Product of two independent full-rank random marginals.
pub fn random_product<T: Real, R: Rng + ?Sized>(dim_a: usize, dim_b: usize, rng: &mut R) -> Result<BipartiteState<T>> {
    let a = random_density(dim_a, dim_a, rng)?;
    let b = random_density(dim_b, dim_b, rng)?;
    product_of(&a, &b)
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian
/// matrix, with the phases of `R`'s diagonal absorbed.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix<T> {
    let g = gaussian_matrix::<T, R>(d, d, rng);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            let z = r[(i, i)];
            let n = linalg::modulus(z);
            if n > T::zero() { z.unscale(n) } else { cr(T::one()) }
        } else {
            cr(T::zero())
        }
    });
    q * phases
}

impl StateKind {
    /// Parses the `name:arg1:arg2…` generator grammar. `seed` feeds the
    /// random families.
    ///
    /// | spec | state |
    /// |---|---|
    /// | `bell:d` | maximally entangled `Φ⁺` on `d⊗d` |
    /// | `isotropic:d:p` | `p·Φ⁺ + (1−p)·1/d²` |
    /// | `werner:d:p` | Werner state, `p` = antisymmetric weight |
    /// | `maxmixed:dA:dB` | `1/(dA·dB)` |
    /// | `product:F:dA:dB` | `F ∈ {maxmixed, ket0, random}` on both factors |
    /// | `random_pure:dA:dB` | Gaussian pure state |
    /// | `random_mixed:dA:dB:rank` | normalized Wishart draw |
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let bad = |msg: &str| Error::InvalidParameter(format!("generator `{spec}`: {msg}"));
        let int = |s: &str| usize::from_str(s).map_err(|_| bad(&format!("`{s}` is not a positive integer")));
        let real = |s: &str| f64::from_str(s).map_err(|_| bad(&format!("`{s}` is not a number")));
        let arity = |n: usize| {
            if parts.len() != n + 1 {
                Err(bad(&format!("expected {n} argument(s), got {}", parts.len() - 1)))
            } else {
                Ok(())
            }
        };
        let kind = match parts[0] {
            "bell" => {
                arity(1)?;
                StateKind::Bell { d: int(parts[1])? }
            }
            "isotropic" => {
                arity(2)?;
                StateKind::Isotropic { d: int(parts[1])?, p: real(parts[2])? }
            }
            "werner" => {
                arity(2)?;
                StateKind::Werner { d: int(parts[1])?, p: real(parts[2])? }
            }
            "maxmixed" => {
                arity(2)?;
                StateKind::MaxMixed { dim_a: int(parts[1])?, dim_b: int(parts[2])? }
            }
            "product" => {
                arity(3)?;
                let (da, db) = (int(parts[2])?, int(parts[3])?);
                check_dim(da, "d_A")?;
                check_dim(db, "d_B")?;
                let (rho_a, rho_b) = match parts[1] {
                    "maxmixed" => (
                        linalg::identity(da).unscale(da as f64),
                        linalg::identity(db).unscale(db as f64),
                    ),
                    "ket0" => {
                        let mut a = CMatrix::zeros(da, da);
                        a[(0, 0)] = cr(1.0);
                        let mut b = CMatrix::zeros(db, db);
                        b[(0, 0)] = cr(1.0);
                        (a, b)
                    }
                    "random" => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        (random_density(da, da, &mut rng)?, random_density(db, db, &mut rng)?)
                    }
                    other => return Err(bad(&format!("unknown product factor `{other}`"))),
                };
                StateKind::Product { rho_a, rho_b }
            }
            "random_pure" => {
                arity(2)?;
                StateKind::RandomPure { dim_a: int(parts[1])?, dim_b: int(parts[2])?, seed }
            }
            "random_mixed" => {
                arity(3)?;
                StateKind::RandomMixed {
                    dim_a: int(parts[1])?,
                    dim_b: int(parts[2])?,
                    rank: int(parts[3])?,
                    seed,
                }
            }
            other => return Err(bad(&format!("unknown generator `{other}`"))),
        };
        Ok(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, max_abs_diff};
    use crate::state::validate_density;

    #[test]
    fn bell_is_rank_one_projector() {
        let b = bell::<f64>(2).unwrap();
        let m = b.matrix();
        assert!(max_abs_diff(&(m * m), m) < 1e-15);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_eq!(m[(i, j)], cr(0.5));
        }
    }

    #[test]
    fn product_of_max_mixed_is_max_mixed() {
        let half = diag(&[0.5, 0.5]);
        let p = product_of(&half, &half).unwrap();
        assert!(max_abs_diff(p.matrix(), max_mixed::<f64>(2, 2).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn isotropic_endpoint_is_bell() {
        let iso = isotropic::<f64>(2, 1.0).unwrap();
        assert!(max_abs_diff(iso.matrix(), bell::<f64>(2).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn werner_endpoint_is_singlet() {
        let w = werner::<f64>(2, 1.0).unwrap();
        let s = 0.5f64.sqrt();
        let singlet = linalg::outer(&[cr(0.0), cr(s), cr(-s), cr(0.0)]);
        assert!(max_abs_diff(w.matrix(), &singlet) < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(bell::<f64>(1).is_err());
        assert!(isotropic::<f64>(2, 1.5).is_err());
        assert!(werner::<f64>(3, -0.1).is_err());
        assert!(random_mixed::<f64, _>(2, 2, 5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn random_draws_validate_and_are_deterministic() {
        let tol = Tolerances::default();
        for seed in 0..100u64 {
            let kind = StateKind::RandomMixed { dim_a: 2, dim_b: 3, rank: 3, seed };
            let a = generate_state(&kind).unwrap();
            validate_density(a.matrix(), &tol).unwrap();
            assert_eq!(a, generate_state(&kind).unwrap());
            let p = generate_state(&StateKind::RandomPure { dim_a: 3, dim_b: 2, seed }).unwrap();
            validate_density(p.matrix(), &tol).unwrap();
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary::<f64, _>(3, &mut rng);
        assert!(max_abs_diff(&(&u * u.adjoint()), &linalg::identity(3)) < 1e-13);
    }

    #[test]
    fn parse_grammar() {
        assert_eq!(StateKind::parse("bell:2", 0).unwrap(), StateKind::Bell { d: 2 });
        assert_eq!(
            StateKind::parse("random_mixed:2:2:4", 11).unwrap(),
            StateKind::RandomMixed { dim_a: 2, dim_b: 2, rank: 4, seed: 11 }
        );
        let p = generate_state(&StateKind::parse("product:maxmixed:2:2", 0).unwrap()).unwrap();
        assert!(max_abs_diff(p.matrix(), &linalg::identity(4).unscale(4.0)) < 1e-15);
        assert!(StateKind::parse("bell", 0).is_err());
        assert!(StateKind::parse("bell:x", 0).is_err());
        assert!(StateKind::parse("ghz:3", 0).is_err());
        assert!(StateKind::parse("product:weird:2:2", 0).is_err());
    }
}
