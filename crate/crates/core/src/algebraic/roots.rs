//! Root location for integer polynomials.
//!
//! Complex roots come from companion-matrix eigenvalues, polished by Newton
//! steps and certified by the inclusion disk `|z - ẑ| ≤ deg · |P(ẑ)| / |P'(ẑ)|`
//! (with the evaluation roundoff added to `|P(ẑ)|`). Disjoint disks around
//! all `deg` approximations each hold exactly one root. Polynomials are split
//! into square-free parts first so that every factor has simple roots.
//!
//! Real roots are isolated exactly with Sturm sequences over `Q`.

use nalgebra::{DMatrix, Schur};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::poly::{IntPolynomial, RatPoly};
use crate::error::{Error, Result};

/// Relative width at which a root is considered certified.
pub const ROOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifiedRoot {
    pub value: Complex64,
    /// Radius of a disk around `value` guaranteed to contain this root.
    pub radius: f64,
}

fn coeffs_f64(p: &IntPolynomial) -> Vec<f64> {
    p.coeffs().iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
}

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64, f64) {
    // value, derivative, running bound on Σ|c_k||z|^k for roundoff
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    let mut mag = 0.0f64;
    let az = z.norm();
    for &ck in c.iter().rev() {
        dv = dv * z + v;
        v = v * z + ck;
        mag = mag * az + ck.abs();
    }
    (v, dv, mag)
}

fn inclusion_radius(c: &[f64], z: Complex64) -> f64 {
    let deg = (c.len() - 1) as f64;
    let (v, dv, mag) = horner(c, z);
    let err = 4.0 * deg * f64::EPSILON * mag;
    let dn = dv.norm();
    if dn == 0.0 {
        f64::INFINITY
    } else {
        deg * (v.norm() + err) / dn
    }
}

/// Iteration cap for the Schur decomposition; Francis steps can cycle on
/// companion matrices with symmetric root sets.
const SCHUR_MAX_ITER: usize = 10_000;

/// Starting points on a circle of the Cauchy radius, rotated off the axes.
fn circle_start(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let lead = c[n].abs();
    let radius = 1.0 + c[..n].iter().map(|x| x.abs() / lead).fold(0.0, f64::max);
    (0..n)
        .map(|k| Complex64::from_polar(radius, (2.0 * std::f64::consts::PI * k as f64 + 0.4) / n as f64))
        .collect()
}

fn companion_eigenvalues(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    if n == 1 {
        return vec![Complex64::new(-c[0] / c[1], 0.0)];
    }
    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    match Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER) {
        Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
        None => aberth(c, &circle_start(c), 2000),
    }
}

fn newton_polish(c: &[f64], mut z: Complex64, steps: usize) -> Complex64 {
    for _ in 0..steps {
        let (v, dv, _) = horner(c, z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        let next = z - step;
        if !next.re.is_finite() || !next.im.is_finite() {
            break;
        }
        z = next;
        if step.norm() <= f64::EPSILON * z.norm().max(1e-300) {
            break;
        }
    }
    z
}

/// Aberth–Ehrlich simultaneous iteration, used when the polished eigenvalues
/// cannot be separated.
fn aberth(c: &[f64], start: &[Complex64], iters: usize) -> Vec<Complex64> {
    let mut z = start.to_vec();
    for _ in 0..iters {
        let mut moved = 0.0f64;
        for i in 0..z.len() {
            let (v, dv, _) = horner(c, z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let sum: Complex64 = (0..z.len())
                .filter(|&k| k != i)
                .map(|k| Complex64::new(1.0, 0.0) / (z[i] - z[k]))
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if w.re.is_finite() && w.im.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / z[i].norm().max(1.0));
            }
        }
        if moved < 1e-17 {
            break;
        }
    }
    z
}

fn disks_disjoint(roots: &[CertifiedRoot]) -> bool {
    for i in 0..roots.len() {
        for k in i + 1..roots.len() {
            if (roots[i].value - roots[k].value).norm() <= roots[i].radius + roots[k].radius {
                return false;
            }
        }
    }
    true
}

fn certify(c: &[f64], approx: &[Complex64]) -> Vec<CertifiedRoot> {
    approx
        .iter()
        .map(|&z| CertifiedRoot {
            value: z,
            radius: inclusion_radius(c, z),
        })
        .collect()
}

fn well_certified(roots: &[CertifiedRoot]) -> bool {
    roots
        .iter()
        .all(|r| r.radius <= ROOT_TOL * r.value.norm().max(1.0))
        && disks_disjoint(roots)
}

/// Certified roots of a square-free polynomial with nonzero constant term.
fn squarefree_roots(p: &IntPolynomial) -> Result<Vec<CertifiedRoot>> {
    let c = coeffs_f64(p);
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Certification(format!("coefficients of {p} overflow binary64")));
    }
    let eig = companion_eigenvalues(&c);
    let polished: Vec<Complex64> = eig.iter().map(|&z| newton_polish(&c, z, 60)).collect();
    let roots = certify(&c, &polished);
    if well_certified(&roots) {
        return Ok(roots);
    }
    for start in [eig, circle_start(&c)] {
        let refined = aberth(&c, &start, 2000);
        let refined: Vec<Complex64> = refined.iter().map(|&z| newton_polish(&c, z, 20)).collect();
        let roots = certify(&c, &refined);
        if well_certified(&roots) {
            return Ok(roots);
        }
    }
    Err(Error::Certification(format!(
        "could not separate the roots of {p} to relative width {ROOT_TOL:e}"
    )))
}

/// All complex roots with multiplicities, including zero roots.
pub fn complex_roots(p: &IntPolynomial) -> Result<Vec<(CertifiedRoot, usize)>> {
    if p.is_zero() {
        return Err(Error::InvalidArgument("zero polynomial has no root set".into()));
    }
    let (zeros, rest) = p.strip_zero_roots();
    let mut out = Vec::new();
    if zeros > 0 {
        out.push((
            CertifiedRoot {
                value: Complex64::new(0.0, 0.0),
                radius: 0.0,
            },
            zeros,
        ));
    }
    if rest.degree().unwrap_or(0) == 0 {
        return Ok(out);
    }
    let (parts, _) = rest.squarefree_decomposition();
    for (q, mult) in parts {
        for r in squarefree_roots(&q)? {
            out.push((r, mult));
        }
    }
    Ok(out)
}

/// `M(P) = |lead(P)| · ∏ max(1, |α_k|)` over all complex roots.
pub fn mahler_measure(p: &IntPolynomial) -> Result<f64> {
    if p.is_zero() {
        return Err(Error::InvalidArgument("Mahler measure of the zero polynomial".into()));
    }
    let lead = p.leading().expect("nonzero").abs().to_f64().unwrap_or(f64::INFINITY);
    // Sum logs to stay in range for high degrees.
    let mut log_m = lead.ln();
    for (root, mult) in complex_roots(p)? {
        let m = root.value.norm();
        if m > 1.0 {
            log_m += mult as f64 * m.ln();
        }
    }
    Ok(log_m.exp())
}

/// Number of nonzero roots (with multiplicity) with `|z| < rho`.
pub fn count_roots_in_disk(p: &IntPolynomial, rho: f64) -> Result<usize> {
    if p.is_zero() {
        return Err(Error::InvalidArgument("zero polynomial".into()));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let mut count = 0;
    for (root, mult) in complex_roots(p)? {
        let m = root.value.norm();
        if m == 0.0 && root.radius == 0.0 {
            continue;
        }
        let tol = (ROOT_TOL * rho).max(root.radius);
        if (m - rho).abs() <= tol {
            return Err(Error::RootOnCircle { rho, tol });
        }
        if m < rho {
            count += mult;
        }
    }
    Ok(count)
}

/// Sturm chain of a square-free polynomial.
fn sturm_chain(p: &IntPolynomial) -> Vec<RatPoly> {
    let mut chain = vec![p.to_rat(), p.derivative().to_rat()];
    loop {
        let n = chain.len();
        let r = chain[n - 2].rem(&chain[n - 1]);
        if r.is_zero() {
            break;
        }
        chain.push(RatPoly::new(r.coeffs.iter().map(|c| -c).collect()));
    }
    chain
}

fn eval_rat(p: &RatPoly, x: &BigRational) -> BigRational {
    p.coeffs
        .iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * x + c)
}

fn sign_changes(chain: &[RatPoly], x: &BigRational) -> usize {
    let mut last = 0i32;
    let mut changes = 0;
    for p in chain {
        let v = eval_rat(p, x);
        let s = if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        };
        if s != 0 {
            if last != 0 && s != last {
                changes += 1;
            }
            last = s;
        }
    }
    changes
}

/// Cauchy bound: every root satisfies `|z| < 1 + max |c_k / c_n|`.
fn cauchy_bound(p: &IntPolynomial) -> BigRational {
    let c = p.coeffs();
    let lead = BigRational::from_integer(c[c.len() - 1].abs());
    let max = c[..c.len() - 1]
        .iter()
        .map(|x| BigRational::from_integer(x.abs()) / &lead)
        .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
    max + BigRational::one()
}

/// Disjoint rational intervals `(lo, hi]`, each holding exactly one real
/// root of the square-free polynomial `p`, in increasing order.
pub fn isolate_real_roots(p: &IntPolynomial) -> Vec<(BigRational, BigRational)> {
    if p.degree().unwrap_or(0) == 0 {
        return Vec::new();
    }
    let chain = sturm_chain(p);
    let b = cauchy_bound(p);
    let mut out = Vec::new();
    let mut stack = vec![(-b.clone(), b)];
    while let Some((lo, hi)) = stack.pop() {
        let n = sign_changes(&chain, &lo) - sign_changes(&chain, &hi);
        match n {
            0 => {}
            1 => out.push((lo, hi)),
            _ => {
                let mid = (&lo + &hi) / BigRational::from_integer(BigInt::from(2));
                stack.push((mid.clone(), hi));
                stack.push((lo, mid));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Shrinks an isolating interval `(lo, hi]` of a simple root of `p` until its
/// width is at most `width`.
pub fn refine_root(
    p: &IntPolynomial,
    mut lo: BigRational,
    mut hi: BigRational,
    width: &BigRational,
) -> (BigRational, BigRational) {
    let two = BigRational::from_integer(BigInt::from(2));
    if p.sign_at(&hi) == 0 {
        return (hi.clone(), hi);
    }
    let s_hi = p.sign_at(&hi);
    while &(&hi - &lo) > width {
        let mid = (&lo + &hi) / &two;
        let s = p.sign_at(&mid);
        if s == 0 {
            return (mid.clone(), mid);
        }
        if s == s_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Real roots of `p` (any multiplicity pattern) as sorted floats with
/// isolating intervals of the square-free part.
pub fn real_roots(p: &IntPolynomial) -> Vec<(f64, BigRational, BigRational)> {
    let sf = p.squarefree_part();
    let width = BigRational::new(BigInt::one(), BigInt::one() << 60);
    isolate_real_roots(&sf)
        .into_iter()
        .map(|(lo, hi)| {
            let (lo, hi) = refine_root(&sf, lo, hi, &width);
            let mid = ((&lo + &hi) / BigRational::from_integer(BigInt::from(2)))
                .to_f64()
                .unwrap_or(f64::NAN);
            (mid, lo, hi)
        })
        .collect()
}
