//! Explicit constants assembled from the proofs: `δ(ε, C)`, `C_X`, `K`, `K̃`.

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{QmdError, Result};
use crate::multires::{theoretical_overlap_bound, ScaleConstant};
use crate::rational::{sqrt_upper, to_big, Rational};

fn big_int(v: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Doubling constant of Lebesgue measure on `[0,1]^d` for balls centered in
/// the cube: `2^d`.
pub fn measure_doubling_constant(dim: usize) -> u64 {
    1u64 << dim
}

/// Smallest `N` with `2^N ε / 8 >= 2`.
pub fn delta_exponent(eps: &BigRational) -> u32 {
    let target = big_int(16) / eps;
    let mut n = 0u32;
    let mut pow = BigRational::one();
    while pow < target {
        pow *= big_int(2);
        n += 1;
    }
    n
}

/// `δ = (ε/8) C^-N`: `d_E(B) < δ` forces `sparse(E, B) < ε`.
pub fn delta_of(eps: &BigRational, c: u64) -> Result<BigRational> {
    if *eps <= BigRational::zero() || *eps >= BigRational::one() {
        return Err(QmdError::Domain(format!("epsilon {eps} not in (0,1)")));
    }
    if c == 0 {
        return Err(QmdError::Domain("doubling constant must be at least 1".into()));
    }
    let n = delta_exponent(eps);
    Ok(eps / big_int(8) / big_int(BigUint::from(c).pow(n)))
}

/// `C_X = 4M` with `M` the overlap bound of the family.
pub fn cx_of(dim: usize, scale: &ScaleConstant) -> BigRational {
    big_int(BigUint::from(4u32) * theoretical_overlap_bound(dim, scale))
}

/// `K = C_X / δ(ε, 2^d)`, the packing bound for the ball family.
pub fn k_of(eps: &Rational, dim: usize, scale: &ScaleConstant) -> Result<BigRational> {
    k_of_big(&to_big(eps), dim, scale)
}

fn k_of_big(eps: &BigRational, dim: usize, scale: &ScaleConstant) -> Result<BigRational> {
    Ok(cx_of(dim, scale) / delta_of(eps, measure_doubling_constant(dim))?)
}

/// How many level-`k` cubes can share one enclosing ball of radius
/// `7 sqrt(d) 2^-k`: their centers lie in a cube of side `7 sqrt(d)`.
pub fn cubes_per_ball(dim: usize) -> BigUint {
    let a = (49 * dim as u64).sqrt();
    BigUint::from(a + 1).pow(dim as u32)
}

/// The rescaled threshold `7ε / (A(d+1))` with `A = 7 sqrt(d)`, rounded down
/// to a rational by bounding `sqrt(d)` from above.
pub fn ktilde_epsilon(eps: &Rational, dim: usize) -> BigRational {
    to_big(eps) / (sqrt_upper(dim as u64) * big_int(dim as u64 + 1))
}

/// `K̃ = D K(7ε/(A(d+1)), 2^d, 7 sqrt(d))`, the packing bound for bad cubes.
pub fn ktilde_of(eps: &Rational, dim: usize) -> Result<BigRational> {
    if *eps <= Rational::zero() || *eps >= Rational::one() {
        return Err(QmdError::Domain(format!("epsilon {eps} not in (0,1)")));
    }
    let k = k_of_big(&ktilde_epsilon(eps, dim), dim, &ScaleConstant::seven_sqrt_d(dim))?;
    Ok(big_int(cubes_per_ball(dim)) * k)
}

/// `7^d K̃ / N`.
pub fn z_bound(ktilde: &BigRational, dim: usize, n: u64) -> BigRational {
    big_int(BigUint::from(7u32).pow(dim as u32)) * ktilde / big_int(n)
}

/// Smallest `N` with `7^d K̃ / N < α`.
pub fn theoretical_n(ktilde: &BigRational, dim: usize, alpha: &Rational) -> BigUint {
    let q = big_int(BigUint::from(7u32).pow(dim as u32)) * ktilde / to_big(alpha);
    let floor = q.floor().to_integer();
    (floor + BigInt::one()).to_biguint().expect("positive")
}
