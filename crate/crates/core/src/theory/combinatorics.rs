//! Sinc-power integrals, Irwin–Hall densities and Eulerian numbers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `(1/π) ∫ sinc^l(t) dt` as an exact rational:
/// `(1/(l−1)!) Σ_{i=0}^{⌊l/2⌋} (−1)^i C(l,i) (l/2 − i)^{l−1}`.
pub fn sinc_power_integral_exact(l: u32) -> Result<BigRational> {
    if l == 0 {
        return Err(Error::Domain("sinc power must be at least 1".into()));
    }
    let l = l as u64;
    let mut acc = BigRational::zero();
    for i in 0..=l / 2 {
        // l/2 − i = (l − 2i)/2
        let base = BigRational::new(BigInt::from(l - 2 * i), BigInt::from(2));
        let mut term = BigRational::from_integer(binomial(l, i)) * pow(&base, l - 1);
        if i % 2 == 1 {
            term = -term;
        }
        acc += term;
    }
    Ok(acc / BigRational::from_integer(factorial(l - 1)))
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// `(1/π) ∫ sinc^l(t) dt`.
pub fn sinc_power_integral(l: u32) -> Result<f64> {
    Ok(to_f64(&sinc_power_integral_exact(l)?))
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact limiting variance of `z^l` for the uniform profile in the narrow-band
/// regime: `l · (1/π) ∫ sinc^l`.
pub fn uniform_narrow_variance_exact(l: u32) -> Result<BigRational> {
    Ok(BigRational::from_integer(BigInt::from(l)) * sinc_power_integral_exact(l)?)
}

/// Density at `x` of the sum of `m` independent Uniform[−1/2, 1/2] variables.
pub fn irwin_hall_pdf(m: u32, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("Irwin-Hall order must be at least 1".into()));
    }
    let half = m as f64 / 2.0;
    if !(x.abs() <= half) {
        return Ok(0.0);
    }
    if m == 1 {
        return Ok(if x.abs() < 0.5 { 1.0 } else { 0.5 });
    }
    let s = x + half;
    let mut acc = 0.0;
    let mut binom = 1.0;
    let mut fact = 1.0;
    for k in 1..m {
        fact *= k as f64;
    }
    for i in 0..=(s.floor() as u32).min(m) {
        if i > 0 {
            binom = binom * (m - i + 1) as f64 / i as f64;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * (s - i as f64).powi(m as i32 - 1);
    }
    Ok((acc / fact).max(0.0))
}

/// Eulerian number `A(n, m)`: permutations of `n` elements with exactly `m`
/// ascents. Zero for `m ≥ n`; `n` is limited to 20 so values fit in 64 bits.
pub fn eulerian(n: u32, m: u32) -> Result<u64> {
    if n == 0 || n > 20 {
        return Err(Error::Domain(format!("eulerian needs 1 <= n <= 20, got {n}")));
    }
    if m >= n {
        return Ok(0);
    }
    let n = n as usize;
    let mut row = vec![1u64];
    for k in 2..=n {
        let mut next = vec![0u64; k];
        for (j, slot) in next.iter_mut().enumerate() {
            let stay = if j < row.len() { (j as u64 + 1) * row[j] } else { 0 };
            let rise = if j >= 1 { (k - j) as u64 * row[j - 1] } else { 0 };
            *slot = stay + rise;
        }
        row = next;
    }
    Ok(row[m as usize])
}

/// `(l/(l−1)!) · A(l−1, l/2−1)` for even `l ≥ 2`.
pub fn eulerian_variance_exact(l: u32) -> Result<BigRational> {
    if l < 2 || l % 2 == 1 {
        return Err(Error::Domain(format!("the Eulerian form needs even l >= 2, got {l}")));
    }
    let a = eulerian(l - 1, l / 2 - 1)?;
    Ok(BigRational::new(
        BigInt::from(l) * BigInt::from(a),
        factorial(l as u64 - 1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ascents_brute_force(n: usize, m: usize) -> u64 {
        fn permute(v: &mut Vec<usize>, k: usize, m: usize, count: &mut u64) {
            if k == v.len() {
                if v.windows(2).filter(|w| w[1] > w[0]).count() == m {
                    *count += 1;
                }
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                permute(v, k + 1, m, count);
                v.swap(k, i);
            }
        }
        let mut v: Vec<usize> = (0..n).collect();
        let mut count = 0;
        permute(&mut v, 0, m, &mut count);
        count
    }

    #[test]
    fn eulerian_matches_permutation_count() {
        assert_eq!(eulerian(1, 0).unwrap(), 1);
        assert_eq!(eulerian(3, 1).unwrap(), 4);
        assert_eq!(eulerian(5, 2).unwrap(), 66);
        for n in 1..=7 {
            for m in 0..n {
                assert_eq!(eulerian(n as u32, m as u32).unwrap(), ascents_brute_force(n, m));
            }
        }
        assert_eq!(eulerian(4, 4).unwrap(), 0);
        assert_eq!(eulerian(4, 9).unwrap(), 0);
        assert!(eulerian(21, 3).is_err());
        // Largest row still sums to 20!.
        let total: u64 = (0..20).map(|m| eulerian(20, m).unwrap()).sum();
        assert_eq!(total, 2_432_902_008_176_640_000);
    }

    #[test]
    fn sinc_table() {
        let expect = [(1, 1), (1, 1), (3, 4), (2, 3), (115, 192), (11, 20)];
        for (l, (p, q)) in expect.iter().enumerate() {
            assert_eq!(
                sinc_power_integral_exact(l as u32 + 1).unwrap(),
                BigRational::new(BigInt::from(*p), BigInt::from(*q))
            );
        }
        assert!(sinc_power_integral(0).is_err());
    }

    #[test]
    fn irwin_hall_examples() {
        assert_eq!(irwin_hall_pdf(1, 0.0).unwrap(), 1.0);
        assert_eq!(irwin_hall_pdf(2, 0.0).unwrap(), 1.0);
        assert_eq!(irwin_hall_pdf(2, 1.0).unwrap(), 0.0);
        assert_eq!(irwin_hall_pdf(2, -1.0).unwrap(), 0.0);
        assert!((irwin_hall_pdf(3, 0.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(irwin_hall_pdf(4, 2.5).unwrap(), 0.0);
        for m in 1..=8u32 {
            let g = sinc_power_integral(m).unwrap();
            assert!((irwin_hall_pdf(m, 0.0).unwrap() - g).abs() < 1e-13);
        }
    }

    #[test]
    fn eulerian_form_matches_sinc_form() {
        for l in [2u32, 4, 6, 8] {
            assert_eq!(
                eulerian_variance_exact(l).unwrap(),
                uniform_narrow_variance_exact(l).unwrap()
            );
        }
    }
}
