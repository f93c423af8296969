//! The multiplicative scale group, integer-ratio scale sequences and the
//! cell keys of the non-conformal dyadic partitions `E_n`.
//!
//! `E_n` is the product over coordinates of the dyadic partitions of level
//! `⌊χ_j n⌋`, where `χ_j = -log2 λ_j`. Cell keys are integer vectors
//! `⌊x_j 2^{⌊χ_j n⌋}⌋`.

use std::fmt;
use std::ops::{Div, Mul};
use std::sync::atomic::{AtomicBool, Ordering};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::util::snapped_floor;

/// Largest dyadic level accepted for partition keys.
pub const MAX_LEVEL: i64 = 1023;
/// Smallest dyadic level accepted for partition keys.
pub const MIN_LEVEL: i64 = -1022;

/// Distance (in cell units) below a cell boundary at which an atom is
/// pushed into the upper cell.
const BOUNDARY_HAZARD: f64 = 1.0 / (1u64 << 45) as f64;

static BOUNDARY_WARNED: AtomicBool = AtomicBool::new(false);

/// An element of the group `R_{>0}^d`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleVector(Vec<f64>);

impl fmt::Debug for ScaleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScaleVector{:?}", self.0)
    }
}

impl ScaleVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "scale entries must be positive and finite, got {bad}"
            )));
        }
        Ok(ScaleVector(entries))
    }

    pub fn uniform(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn ones(dim: usize) -> Self {
        ScaleVector(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn inv(&self) -> Self {
        ScaleVector(self.0.iter().map(|r| 1.0 / r).collect())
    }

    /// Componentwise power `r^t`.
    pub fn powf(&self, t: f64) -> Self {
        ScaleVector(self.0.iter().map(|r| r.powf(t)).collect())
    }

    /// Componentwise integer power, computed by repeated squaring.
    pub fn powi(&self, k: i32) -> Self {
        ScaleVector(self.0.iter().map(|r| r.powi(k)).collect())
    }

    /// `det r = ∏ r_j`.
    pub fn det(&self) -> f64 {
        self.0.iter().product()
    }

    /// Euclidean norm `|r|`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    /// Partial order: `self ≤ other` iff every entry is.
    pub fn le(&self, other: &ScaleVector) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `r x`, the action on points.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(a, r)| a * r).collect()
    }

    /// Membership in Ω: entries strictly decreasing inside (0, 1).
    pub fn is_in_omega(&self) -> bool {
        !self.0.is_empty()
            && self.0.iter().all(|&l| l > 0.0 && l < 1.0)
            && self.0.windows(2).all(|w| w[0] > w[1])
    }

    pub fn check_omega(&self) -> Result<()> {
        if self.0.is_empty() || !self.0.iter().all(|&l| l > 0.0 && l < 1.0) {
            return Err(Error::InvalidLambda(
                "lambda entries must lie in (0, 1)".into(),
            ));
        }
        if !self.0.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::InvalidLambda(
                "lambda must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    /// Lyapunov exponents `χ_j = -log2 λ_j` in bits.
    pub fn chi(&self) -> Vec<f64> {
        self.0.iter().map(|l| -l.log2()).collect()
    }

    /// If every ratio `other / self` is a positive integer (to 1e-9 relative), returns it.
    pub fn integer_ratio(&self, other: &ScaleVector) -> Option<Vec<u64>> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let q = b / a;
                let r = q.round();
                if r >= 1.0 && (q - r).abs() <= 1e-9 * r {
                    Some(r as u64)
                } else {
                    None
                }
            })
            .collect()
    }
}

impl Mul for &ScaleVector {
    type Output = ScaleVector;
    fn mul(self, rhs: &ScaleVector) -> ScaleVector {
        assert_eq!(self.dim(), rhs.dim(), "scale dimension mismatch");
        ScaleVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a * b).collect())
    }
}

impl Div for &ScaleVector {
    type Output = ScaleVector;
    fn div(self, rhs: &ScaleVector) -> ScaleVector {
        assert_eq!(self.dim(), rhs.dim(), "scale dimension mismatch");
        ScaleVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a / b).collect())
    }
}

/// The integer-ratio sequence `s_0, s_1, …` attached to `λ`.
///
/// Every term is stored both as floats and exactly as `1 / B_{n,j}` with
/// `B_{n,j} = b_{1,j} ⋯ b_{n,j}`.
#[derive(Clone, Debug)]
pub struct SSequence {
    lambda: ScaleVector,
    terms: Vec<ScaleVector>,
    divisors: Vec<Vec<u64>>,
    denominators: Vec<Vec<BigUint>>,
}

impl SSequence {
    pub fn lambda(&self) -> &ScaleVector {
        &self.lambda
    }

    /// Index of the last computed term.
    pub fn len(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn term(&self, n: usize) -> &ScaleVector {
        &self.terms[n]
    }

    pub fn terms(&self) -> &[ScaleVector] {
        &self.terms
    }

    /// `b_n = s_{n-1} / s_n` for `n ≥ 1`.
    pub fn divisor(&self, n: usize) -> &[u64] {
        assert!(n >= 1, "divisors start at n = 1");
        &self.divisors[n - 1]
    }

    pub fn divisors(&self) -> &[Vec<u64>] {
        &self.divisors
    }

    /// Exact `B_{n,j}` with `s_{n,j} = 1 / B_{n,j}`.
    pub fn denominator(&self, n: usize) -> &[BigUint] {
        &self.denominators[n]
    }

    /// Exact integer ratio `s_n / s_{n'}` for `n ≤ n'`.
    pub fn ratio(&self, n: usize, n_prime: usize) -> Vec<BigUint> {
        assert!(n <= n_prime);
        self.denominators[n_prime]
            .iter()
            .zip(&self.denominators[n])
            .map(|(big, small)| {
                let (q, r) = big.div_rem(small);
                debug_assert!(r.is_zero());
                q
            })
            .collect()
    }

    /// Checks `λ_j^n ≤ s_{n,j} < 2 λ_j^n` in exact rational arithmetic,
    /// reading every `λ_j` as the exact value of its binary64 representation.
    pub fn verify_bounds(&self, n: usize) -> bool {
        self.lambda
            .entries()
            .iter()
            .zip(&self.denominators[n])
            .all(|(&l, big_b)| {
                let lam = exact_rational(l);
                let lam_n = pow_rational(&lam, n as u32);
                // s = 1/B, so λ^n ≤ s < 2 λ^n  ⇔  B λ^n ≤ 1 < 2 B λ^n
                let b_lam = lam_n * BigRational::from_integer(BigInt::from(big_b.clone()));
                let one = BigRational::one();
                b_lam <= one && one < b_lam * BigRational::from_integer(BigInt::from(2))
            })
    }
}

fn exact_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

fn pow_rational(x: &BigRational, k: u32) -> BigRational {
    num_traits::pow(x.clone(), k as usize)
}

/// Builds `s_0, …, s_n` by the defining induction: `b_{n+1,j}` is the unique
/// positive integer with `s_{n,j}/b ≥ λ_j^{n+1} > s_{n,j}/(b+1)`, i.e.
/// `b = ⌊s_{n,j} / λ_j^{n+1}⌋`.
///
/// The floor is taken in exact big-integer arithmetic on the binary64 value
/// of `λ_j`, so the branch can never be misclassified near a tie.
pub fn s_sequence(lambda: &ScaleVector, n: usize) -> Result<SSequence> {
    lambda.check_omega()?;
    let d = lambda.dim();
    let mut terms = vec![ScaleVector::ones(d)];
    let mut divisors = Vec::with_capacity(n);
    let mut denominators = vec![vec![BigUint::one(); d]];

    // λ_j = num_j / den_j exactly; keep num_j^k and den_j^k.
    let fracs: Vec<(BigUint, BigUint)> = lambda
        .entries()
        .iter()
        .map(|&l| {
            let r = exact_rational(l);
            (
                r.numer().abs().to_biguint().expect("positive"),
                r.denom().to_biguint().expect("positive"),
            )
        })
        .collect();
    let mut num_pow: Vec<BigUint> = vec![BigUint::one(); d];
    let mut den_pow: Vec<BigUint> = vec![BigUint::one(); d];

    for step in 0..n {
        let mut b_row = Vec::with_capacity(d);
        let mut denom_row = Vec::with_capacity(d);
        let mut term_row = Vec::with_capacity(d);
        for j in 0..d {
            num_pow[j] *= &fracs[j].0;
            den_pow[j] *= &fracs[j].1;
            let prev = &denominators[step][j];
            // s_n / λ^{n+1} = den^{n+1} / (B_n num^{n+1})
            let b = &den_pow[j] / (prev * &num_pow[j]);
            let b = b.to_u64().ok_or_else(|| {
                Error::InvalidArgument("sequence divisor exceeds u64".into())
            })?;
            debug_assert!(b >= 1);
            let big = prev * BigUint::from(b);
            let s = biguint_recip_f64(&big);
            if !(s.is_normal()) {
                return Err(Error::InvalidArgument(format!(
                    "s_{} underflows binary64 on axis {}",
                    step + 1,
                    j + 1
                )));
            }
            b_row.push(b);
            term_row.push(s);
            denom_row.push(big);
        }
        divisors.push(b_row);
        denominators.push(denom_row);
        terms.push(ScaleVector(term_row));
    }

    Ok(SSequence {
        lambda: lambda.clone(),
        terms,
        divisors,
        denominators,
    })
}

/// Correctly rounded enough `1/B` for a big integer `B`.
fn biguint_recip_f64(b: &BigUint) -> f64 {
    let bits = b.bits();
    if bits <= 1000 {
        return 1.0 / b.to_f64().unwrap_or(f64::INFINITY);
    }
    // 1/B = 2^{-shift} / (B >> shift)
    let shift = bits - 64;
    let top = (b >> shift).to_f64().expect("64-bit value");
    (1.0 / top) * 2f64.powi(-(shift as i32))
}

/// Per-axis dyadic levels `⌊χ_j n⌋` of the partition `E_n`.
pub fn en_levels(lambda: &ScaleVector, n: i64) -> Result<Vec<i64>> {
    lambda
        .chi()
        .iter()
        .map(|&chi| {
            let level = snapped_floor(chi * n as f64, 1e-12);
            if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
                Err(Error::InvalidArgument(format!(
                    "partition level {level} outside [{MIN_LEVEL}, {MAX_LEVEL}]"
                )))
            } else {
                Ok(level)
            }
        })
        .collect()
}

/// Index of the level-`level` dyadic interval containing `x`.
///
/// Atoms within 2^-45 cell widths below a boundary are moved into the upper
/// cell; a warning is logged the first time this happens.
///
/// Indices of magnitude below 2^62 are exact. Larger ones (fine levels far
/// from the origin) are encoded injectively and in order, so cells stay
/// distinct but index arithmetic is meaningless there.
pub fn dyadic_index(x: f64, level: i64) -> i64 {
    let y = x * 2f64.powi(level as i32);
    let mut f = y.floor();
    if y - f > 1.0 - BOUNDARY_HAZARD {
        if !BOUNDARY_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("atom within 2^-45 of a dyadic cell boundary at level {level}; shifted up");
        }
        f += 1.0;
    }
    encode_index(f)
}

const EXACT_INDEX: f64 = (1u64 << 62) as f64;

/// Identity on integers in `(-2^62, 2^62)`; beyond that, the offset of the
/// float's bit pattern from that of 2^62, which keeps order and fits in i64
/// for every finite value.
fn encode_index(f: f64) -> i64 {
    if f.abs() < EXACT_INDEX {
        return f as i64;
    }
    let base = EXACT_INDEX.to_bits() as i64;
    let off = (f.abs().min(f64::MAX).to_bits() as i64) - base;
    let v = (1i64 << 62) + off;
    if f < 0.0 {
        -v
    } else {
        v
    }
}

/// A cell of `E_n` (or of a projected partition).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub level: i64,
    pub index: SmallVec<[i64; 4]>,
}

/// Key of `x` in `E_n`.
pub fn en_key(x: &[f64], n: i64, lambda: &ScaleVector) -> Result<CellKey> {
    if x.len() != lambda.dim() {
        return Err(Error::DimensionMismatch {
            expected: lambda.dim(),
            found: x.len(),
        });
    }
    let levels = en_levels(lambda, n)?;
    Ok(CellKey {
        level: n,
        index: x
            .iter()
            .zip(&levels)
            .map(|(&xi, &l)| dyadic_index(xi, l))
            .collect(),
    })
}

/// `⌊x_j / r_j + offset_j⌋` per coordinate.
pub fn grid_key(x: &[f64], r: &ScaleVector, offset: &[f64]) -> SmallVec<[i64; 4]> {
    x.iter()
        .zip(r.entries())
        .zip(offset)
        .map(|((&xi, &ri), &u)| (xi / ri + u).floor() as i64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> ScaleVector {
        ScaleVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn s_sequence_half() {
        let s = s_sequence(&sv(&[0.5]), 2).unwrap();
        let vals: Vec<f64> = s.terms().iter().map(|t| t.get(0)).collect();
        assert_eq!(vals, vec![1.0, 0.5, 0.25]);
        assert_eq!(s.divisors(), &[vec![2], vec![2]]);
    }

    #[test]
    fn s_sequence_point_six() {
        let s = s_sequence(&sv(&[0.6]), 2).unwrap();
        let vals: Vec<f64> = s.terms().iter().map(|t| t.get(0)).collect();
        assert_eq!(vals, vec![1.0, 1.0, 0.5]);
        assert_eq!(s.divisors(), &[vec![1], vec![2]]);
    }

    #[test]
    fn s_sequence_base_case() {
        let s = s_sequence(&sv(&[0.9, 0.3, 0.1]), 0).unwrap();
        assert_eq!(s.term(0).entries(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn s_sequence_rejects_non_omega() {
        assert!(s_sequence(&sv(&[0.3, 0.5]), 3).is_err());
        assert!(s_sequence(&sv(&[1.5]), 3).is_err());
    }

    #[test]
    fn s_sequence_ratio_is_product_of_divisors() {
        let s = s_sequence(&sv(&[0.7, 0.45]), 12).unwrap();
        let r = s.ratio(3, 9);
        for j in 0..2 {
            let prod: u128 = (4..=9).map(|k| s.divisor(k)[j] as u128).product();
            assert_eq!(r[j], BigUint::from(prod));
        }
        assert!((0..=12).all(|n| s.verify_bounds(n)));
    }

    #[test]
    fn en_key_examples() {
        let lam = sv(&[0.5, 0.25]);
        assert_eq!(en_key(&[0.3, 0.3], 1, &lam).unwrap().index.as_slice(), &[0, 1]);
        assert_eq!(en_key(&[0.3, 0.3], 2, &lam).unwrap().index.as_slice(), &[1, 4]);
        assert_eq!(en_key(&[-0.1], 0, &sv(&[0.3])).unwrap().index.as_slice(), &[-1]);
    }

    #[test]
    fn en_key_rejects_huge_levels() {
        assert!(en_key(&[0.1], 2000, &sv(&[0.5])).is_err());
    }

    #[test]
    fn en_levels_negative_n() {
        assert_eq!(en_levels(&sv(&[0.5]), -6).unwrap(), vec![-6]);
        assert_eq!(dyadic_index(100.0, -6), 1);
    }

    #[test]
    fn boundary_hazard_moves_up() {
        let just_below = 1.0 - 1e-15;
        assert_eq!(dyadic_index(just_below, 0), 1);
        assert_eq!(dyadic_index(1.0 - 1e-6, 0), 0);
    }

    #[test]
    fn large_indices_stay_distinct_and_ordered() {
        let xs = [-3.0, -0.0159, -1e-9, 0.0, 1e-9, 0.0159, 0.0159 + 1e-15, 3.0];
        for level in [60, 69, 200, 1023] {
            let keys: Vec<i64> = xs.iter().map(|&x| dyadic_index(x, level)).collect();
            assert!(keys.windows(2).all(|w| w[0] <= w[1]), "level {level}: {keys:?}");
        }
        let a = dyadic_index(0.0159, 200);
        let b = dyadic_index(0.0159 + 1e-15, 200);
        assert!(a < b);
        assert_eq!(dyadic_index(5.0, 3), 40);
    }

    #[test]
    fn grid_key_examples() {
        assert_eq!(grid_key(&[0.9], &sv(&[1.0]), &[0.0]).as_slice(), &[0]);
        assert_eq!(grid_key(&[0.9], &sv(&[1.0]), &[0.2]).as_slice(), &[1]);
        assert_eq!(
            grid_key(&[3.0, 5.0], &sv(&[2.0, 4.0]), &[0.5, 0.5]).as_slice(),
            &[2, 1]
        );
    }

    #[test]
    fn group_operations() {
        let r = sv(&[2.0, 0.5]);
        let s = sv(&[3.0, 4.0]);
        assert_eq!((&r * &s).entries(), &[6.0, 2.0]);
        assert_eq!((&(&r * &s) / &s).entries(), r.entries());
        assert_eq!((&r * &r.inv()).entries(), &[1.0, 1.0]);
        assert!(sv(&[1.0, 0.5]).le(&r));
        assert!(!r.le(&sv(&[1.0, 1.0])));
        assert_eq!(r.det(), 1.0);
        assert_eq!(s.integer_ratio(&sv(&[6.0, 8.0])), Some(vec![2, 2]));
        assert_eq!(s.integer_ratio(&sv(&[4.5, 8.0])), None);
    }
}
