//! Exact counts of derangements and of the orbits `S_{n,t}`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Number of fixed-point-free permutations of `n` objects.
///
/// Evaluated as the inclusion–exclusion sum `Σ_{k=0}^{n} (-1)^k n!/k!`
/// in exact integer arithmetic.
pub fn count_derangements(n: u64) -> BigUint {
    // n!/k! for k = n, n-1, ..., 0 accumulates as a falling product.
    let mut total = BigInt::zero();
    let mut falling = BigInt::one();
    for k in (0..=n).rev() {
        if k < n {
            falling *= k + 1;
        }
        if k % 2 == 0 {
            total += &falling;
        } else {
            total -= &falling;
        }
    }
    total
        .to_biguint()
        .expect("derangement count is non-negative")
}

/// Signed entry point for callers holding untrusted integers.
pub fn count_derangements_checked(n: i64) -> Result<BigUint> {
    let n = u64::try_from(n).map_err(|_| Error::param("n", format!("{n} is negative")))?;
    Ok(count_derangements(n))
}

/// `|S_{n,t}| = C(n, t) · D(t)`.
pub fn orbit_size(n: u64, t: u64) -> Result<BigUint> {
    if t > n {
        return Err(Error::param("t", format!("t = {t} exceeds n = {n}")));
    }
    Ok(binomial(n, t) * count_derangements(t))
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}
