//! Real algebraic numbers as (minimal polynomial, isolating interval), and
//! exact reduction of integer polynomials modulo a minimal polynomial.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::poly::{IntPolynomial, RatPoly};
use super::roots::{complex_roots, isolate_real_roots, refine_root};
use crate::error::{Error, Result};

/// Largest degree for which the minimal factor of a root is searched.
pub const MAX_FACTOR_DEGREE: usize = 24;

/// A real algebraic number.
///
/// `minpoly` is irreducible over `Q`, primitive, with positive leading
/// coefficient; `(lo, hi]` contains exactly one of its real roots.
#[derive(Clone, PartialEq)]
pub struct AlgebraicNumber {
    minpoly: IntPolynomial,
    lo: BigRational,
    hi: BigRational,
}

impl fmt::Debug for AlgebraicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgebraicNumber({} ≈ {:.17})", self.minpoly, self.to_f64())
    }
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

fn rat_width(bits: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << bits)
}

impl AlgebraicNumber {
    /// The root of `minpoly` nearest to `approx`. `minpoly` is trusted to be
    /// irreducible; use [`AlgebraicNumber::root_near`] for arbitrary polynomials.
    pub fn from_minpoly_near(minpoly: &IntPolynomial, approx: f64) -> Result<Self> {
        let minpoly = minpoly.primitive_part();
        if minpoly.degree().unwrap_or(0) == 0 {
            return Err(Error::InvalidArgument("minimal polynomial must be non-constant".into()));
        }
        let (lo, hi) = nearest_real_root(&minpoly, approx)?;
        Ok(AlgebraicNumber { minpoly, lo, hi })
    }

    /// The real root of `p` nearest `approx`, with its minimal polynomial
    /// extracted from `p`.
    pub fn root_near(p: &IntPolynomial, approx: f64) -> Result<Self> {
        let sf = p.squarefree_part();
        let (lo, hi) = nearest_real_root(&sf, approx)?;
        let minpoly = minimal_factor(&sf, &lo, &hi)?;
        let (lo, hi) = narrow_to(&minpoly, lo, hi);
        Ok(AlgebraicNumber { minpoly, lo, hi })
    }

    pub fn from_rational(q: &BigRational) -> Self {
        let minpoly = IntPolynomial::new(vec![-q.numer().clone(), q.denom().clone()]).primitive_part();
        AlgebraicNumber {
            minpoly,
            lo: q.clone(),
            hi: q.clone(),
        }
    }

    pub fn minpoly(&self) -> &IntPolynomial {
        &self.minpoly
    }

    pub fn degree(&self) -> usize {
        self.minpoly.degree().unwrap_or(0)
    }

    pub fn interval(&self) -> (&BigRational, &BigRational) {
        (&self.lo, &self.hi)
    }

    /// Shrinks the isolating interval to width at most `2^-bits`.
    pub fn refine(&mut self, bits: u32) {
        let (lo, hi) = refine_root(&self.minpoly, self.lo.clone(), self.hi.clone(), &rat_width(bits));
        self.lo = lo;
        self.hi = hi;
    }

    pub fn to_f64(&self) -> f64 {
        let mut me = self.clone();
        me.refine(64 + self.magnitude_bits());
        ((&me.lo + &me.hi) * half()).to_f64().unwrap_or(f64::NAN)
    }

    fn magnitude_bits(&self) -> u32 {
        // extra precision for numbers far below 1 in magnitude
        let v = ((&self.lo + &self.hi) * half()).to_f64().unwrap_or(1.0).abs();
        if v > 0.0 && v < 1.0 {
            (-v.log2()).ceil() as u32
        } else {
            0
        }
    }

    /// Canonical coordinates of `expr(α)` in the basis `1, α, …, α^{D-1}`.
    pub fn reduce(&self, expr: &IntPolynomial) -> Vec<BigRational> {
        reduce_mod_minpoly(expr, self)
    }

    /// Whether `expr(α) = 0`.
    pub fn is_root_of(&self, expr: &IntPolynomial) -> bool {
        self.reduce(expr).iter().all(|c| c.is_zero())
    }
}

/// Remainder of `expr` modulo the minimal polynomial of `alpha`, as a
/// coefficient vector of length `deg(minpoly)`. Zero iff `expr(α) = 0`.
pub fn reduce_mod_minpoly(expr: &IntPolynomial, alpha: &AlgebraicNumber) -> Vec<BigRational> {
    let d = alpha.degree();
    let r = if expr.is_zero() {
        RatPoly::new(Vec::new())
    } else {
        expr.to_rat().rem(&alpha.minpoly.to_rat())
    };
    let mut out = vec![BigRational::zero(); d];
    for (k, c) in r.coeffs.into_iter().enumerate() {
        out[k] = c;
    }
    out
}

/// Isolating interval of the real root of square-free `p` nearest `x`.
fn nearest_real_root(p: &IntPolynomial, x: f64) -> Result<(BigRational, BigRational)> {
    let target = BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidArgument(format!("non-finite target {x}")))?;
    let width = rat_width(70);
    let mut best: Option<(BigRational, BigRational, BigRational)> = None;
    for (lo, hi) in isolate_real_roots(p) {
        let (lo, hi) = refine_root(p, lo, hi, &width);
        let mid = (&lo + &hi) * half();
        let dist = (&mid - &target).abs();
        if best.as_ref().is_none_or(|b| dist < b.2) {
            best = Some((lo, hi, dist));
        }
    }
    best.map(|(lo, hi, _)| (lo, hi))
        .ok_or_else(|| Error::InvalidArgument(format!("{p} has no real root")))
}

/// Shrinks `(lo, hi]` until it isolates a single root of `q` (which must
/// have a root there).
fn narrow_to(q: &IntPolynomial, lo: BigRational, hi: BigRational) -> (BigRational, BigRational) {
    let sf = q.squarefree_part();
    for (a, b) in isolate_real_roots(&sf) {
        // the root of q in (lo, hi] lies in exactly one of q's intervals
        let (a2, b2) = refine_root(&sf, a, b, &(&hi - &lo));
        if a2 < hi && b2 > lo || (a2 == b2 && a2 > lo && a2 <= hi) {
            let new_lo = if a2 > lo { a2 } else { lo.clone() };
            let new_hi = if b2 < hi { b2 } else { hi.clone() };
            if sf.sign_at(&new_hi) == 0 || sf.sign_at(&new_lo) != sf.sign_at(&new_hi) {
                return (new_lo, new_hi);
            }
        }
    }
    (lo, hi)
}

fn positive_divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let small = n.to_u64();
    match small {
        Some(v) if v <= 1 << 40 => {
            let mut out = Vec::new();
            let mut k = 1u64;
            while k * k <= v {
                if v % k == 0 {
                    out.push(BigInt::from(k));
                    if k * k != v {
                        out.push(BigInt::from(v / k));
                    }
                }
                k += 1;
            }
            out.sort();
            out
        }
        _ => vec![BigInt::one(), n],
    }
}

/// The irreducible factor of square-free `p` vanishing at the root isolated
/// by `(lo, hi]`.
///
/// Any factor of `p` over `Z` is `l · ∏_{s∈S} (x - s)` for a subset `S` of
/// the complex roots closed under conjugation, with `l | lead(p)`. Subsets
/// containing the target root are tried in increasing size; candidates whose
/// rounded coefficients divide `p` exactly and change sign on the isolating
/// interval are accepted. The first hit has minimal degree and is therefore
/// irreducible.
pub fn minimal_factor(p: &IntPolynomial, lo: &BigRational, hi: &BigRational) -> Result<IntPolynomial> {
    let p = p.primitive_part();
    let deg = p.degree().unwrap_or(0);
    if deg <= 1 {
        return Ok(p);
    }
    if deg > MAX_FACTOR_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "minimal factor search limited to degree {MAX_FACTOR_DEGREE}, got {deg}"
        )));
    }
    let target = ((lo + hi) * half()).to_f64().unwrap_or(f64::NAN);
    let roots: Vec<Complex64> = complex_roots(&p)?
        .into_iter()
        .map(|(r, _)| r.value)
        .collect();
    let t_idx = roots
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im.abs() <= 1e-9 * z.norm().max(1.0))
        .min_by(|a, b| (a.1.re - target).abs().total_cmp(&(b.1.re - target).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Certification("target root not among complex roots".into()))?;
    let others: Vec<usize> = (0..roots.len()).filter(|&i| i != t_idx).collect();
    let leads = positive_divisors(p.leading().expect("nonzero"));

    for size in 0..others.len() {
        if size + 1 == deg {
            break;
        }
        let mut chosen: Vec<usize> = Vec::with_capacity(size);
        if let Some(f) = search_subsets(&p, &roots, t_idx, &others, 0, size, &mut chosen, &leads, lo, hi) {
            return Ok(f);
        }
    }
    Ok(p)
}

#[allow(clippy::too_many_arguments)]
fn search_subsets(
    p: &IntPolynomial,
    roots: &[Complex64],
    t_idx: usize,
    others: &[usize],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<usize>,
    leads: &[BigInt],
    lo: &BigRational,
    hi: &BigRational,
) -> Option<IntPolynomial> {
    if remaining == 0 {
        return try_candidate(p, roots, t_idx, chosen, leads, lo, hi);
    }
    for k in start..others.len() {
        if others.len() - k < remaining {
            break;
        }
        chosen.push(others[k]);
        let hit = search_subsets(p, roots, t_idx, others, k + 1, remaining - 1, chosen, leads, lo, hi);
        chosen.pop();
        if hit.is_some() {
            return hit;
        }
    }
    None
}

fn try_candidate(
    p: &IntPolynomial,
    roots: &[Complex64],
    t_idx: usize,
    chosen: &[usize],
    leads: &[BigInt],
    lo: &BigRational,
    hi: &BigRational,
) -> Option<IntPolynomial> {
    // monic product over the subset
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &i in std::iter::once(&t_idx).chain(chosen) {
        let z = roots[i];
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * z;
        }
        c = next;
    }
    let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if c.iter().any(|z| z.im.abs() > 1e-6 * scale) {
        return None;
    }
    for l in leads {
        let lf = l.to_f64()?;
        let mut ints = Vec::with_capacity(c.len());
        let mut ok = true;
        for z in &c {
            let v = z.re * lf;
            let r = v.round();
            if (v - r).abs() > 1e-6 * (1.0 + v.abs()) {
                ok = false;
                break;
            }
            ints.push(BigInt::from(r as i64));
        }
        if !ok {
            continue;
        }
        let f = IntPolynomial::new(ints);
        if f.content() != BigInt::one() && f.content() != -BigInt::one() {
            continue;
        }
        if p.exact_div(&f).is_none() {
            continue;
        }
        let (s_lo, s_hi) = (f.sign_at(lo), f.sign_at(hi));
        if s_hi == 0 || s_lo * s_hi < 0 {
            return Some(f.primitive_part());
        }
    }
    None
}

/// Precomputed reductions of `x^k` modulo a minimal polynomial, scaled to a
/// common integer denominator so word sums stay in integer arithmetic.
#[derive(Clone, Debug)]
pub struct PowerTable {
    /// `powers[k]` = `D · (x^k mod minpoly)` as integer coordinates.
    powers: Vec<Vec<BigInt>>,
    degree: usize,
}

impl PowerTable {
    pub fn new(alpha: &AlgebraicNumber, count: usize) -> Self {
        let d = alpha.degree();
        let m = alpha.minpoly.to_rat();
        let mut rat_powers: Vec<Vec<BigRational>> = Vec::with_capacity(count);
        let mut cur = RatPoly::new(vec![BigRational::one()]);
        let x = RatPoly::new(vec![BigRational::zero(), BigRational::one()]);
        for _ in 0..count {
            let mut v = vec![BigRational::zero(); d];
            for (k, c) in cur.coeffs.iter().enumerate() {
                v[k] = c.clone();
            }
            rat_powers.push(v);
            cur = mul_rat(&cur, &x).rem(&m);
        }
        let denom = rat_powers
            .iter()
            .flatten()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let powers = rat_powers
            .into_iter()
            .map(|v| {
                v.into_iter()
                    .map(|c| (c * BigRational::from_integer(denom.clone())).to_integer())
                    .collect()
            })
            .collect();
        PowerTable { powers, degree: d }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// `acc += a · (x^k mod minpoly)` in scaled coordinates.
    pub fn add_term(&self, acc: &mut [BigInt], a: i64, k: usize) {
        if a == 0 {
            return;
        }
        let a = BigInt::from(a);
        for (dst, src) in acc.iter_mut().zip(&self.powers[k]) {
            *dst += &a * src;
        }
    }
}

fn mul_rat(a: &RatPoly, b: &RatPoly) -> RatPoly {
    if a.is_zero() || b.is_zero() {
        return RatPoly::new(Vec::new());
    }
    let mut out = vec![BigRational::zero(); a.coeffs.len() + b.coeffs.len() - 1];
    for (i, x) in a.coeffs.iter().enumerate() {
        for (j, y) in b.coeffs.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    RatPoly::new(out)
}
