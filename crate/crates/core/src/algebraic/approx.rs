//! Replace float contraction parameters by nearby algebraic numbers that are
//! roots of polynomials with bounded coefficients.

use serde::Serialize;

use super::number::AlgebraicNumber;
use super::roots::real_roots;
use super::search::{ranked_candidates, SearchBudget, SearchResult};
use crate::error::{Error, Result};
use crate::scales::ScaleVector;

/// All pairwise differences of a set of integers (always contains 0).
pub fn difference_set(values: &[i64]) -> Vec<i64> {
    let mut out: Vec<i64> = values
        .iter()
        .flat_map(|a| values.iter().map(move |b| a - b))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootCandidate {
    pub coeffs: Vec<i64>,
    pub value_at_lambda: f64,
    pub root: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxisApproximation {
    pub lambda: f64,
    pub coeff_set: Vec<i64>,
    /// Accepted candidate: the first in value order with a real root in (0, 1).
    pub accepted: Option<RootCandidate>,
    /// Nearest root over every examined candidate, accepted or not.
    pub nearest: Option<RootCandidate>,
    pub examined: usize,
    #[serde(skip)]
    pub eta: Option<AlgebraicNumber>,
    pub minpoly: Option<Vec<i64>>,
}

impl AxisApproximation {
    pub fn found(&self) -> bool {
        self.accepted.is_some()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Approximation {
    pub n: usize,
    pub axes: Vec<AxisApproximation>,
    /// Present when every axis succeeded.
    pub eta: Option<Vec<f64>>,
    pub in_omega: bool,
    /// Largest per-axis `|λ_j − η_j|`.
    pub distance: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ApproxOptions {
    /// Number of candidates examined per axis, best value first.
    pub candidates: usize,
    pub budget: SearchBudget,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            candidates: 32,
            budget: SearchBudget::default(),
        }
    }
}

fn nearest_root(cand: &SearchResult, lambda: f64, open_unit: bool) -> Option<RootCandidate> {
    let p = cand.polynomial();
    real_roots(&p)
        .into_iter()
        .map(|(r, _, _)| r)
        .filter(|&r| !open_unit || (r > 0.0 && r < 1.0))
        .min_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()))
        .map(|root| RootCandidate {
            coeffs: cand.coeffs.clone(),
            value_at_lambda: cand.value,
            root,
            distance: (root - lambda).abs(),
        })
}

fn approximate_axis(lambda: f64, n: usize, set: &[i64], opts: &ApproxOptions) -> Result<AxisApproximation> {
    let cands = ranked_candidates(lambda, n, set, opts.candidates, opts.budget)?;
    let mut accepted = None;
    let mut nearest: Option<RootCandidate> = None;
    let mut examined = 0;
    for c in &cands {
        examined += 1;
        if let Some(r) = nearest_root(c, lambda, false) {
            if nearest.as_ref().is_none_or(|b| r.distance < b.distance) {
                nearest = Some(r);
            }
        }
        if let Some(r) = nearest_root(c, lambda, true) {
            accepted = Some(r);
            break;
        }
    }
    let mut eta = None;
    let mut minpoly = None;
    if let Some(acc) = &accepted {
        let p = crate::algebraic::IntPolynomial::from_i64(&acc.coeffs);
        if let Ok(a) = AlgebraicNumber::root_near(&p, acc.root) {
            minpoly = a.minpoly().to_i64_vec();
            eta = Some(a);
        }
    }
    Ok(AxisApproximation {
        lambda,
        coeff_set: set.to_vec(),
        accepted,
        nearest,
        examined,
        eta,
        minpoly,
    })
}

/// For each axis, searches the coefficient set for small values at `λ_j`
/// and takes the real root in (0, 1) nearest `λ_j` of the best candidate
/// that has one. Failing axes are reported, not treated as errors.
pub fn approximate_parameters(
    lambda: &ScaleVector,
    n: usize,
    coeff_sets: &[Vec<i64>],
    opts: &ApproxOptions,
) -> Result<Approximation> {
    if coeff_sets.len() != lambda.dim() {
        return Err(Error::DimensionMismatch {
            expected: lambda.dim(),
            found: coeff_sets.len(),
        });
    }
    let axes = lambda
        .entries()
        .iter()
        .zip(coeff_sets)
        .map(|(&l, set)| approximate_axis(l, n, set, opts))
        .collect::<Result<Vec<_>>>()?;
    let eta: Option<Vec<f64>> = axes
        .iter()
        .map(|a| a.accepted.as_ref().map(|c| c.root))
        .collect();
    let in_omega = eta
        .as_ref()
        .and_then(|e| ScaleVector::new(e.clone()).ok())
        .is_some_and(|s| s.is_in_omega());
    let distance = eta.as_ref().map(|e| {
        e.iter()
            .zip(lambda.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    Ok(Approximation {
        n,
        axes,
        eta,
        in_omega,
        distance,
    })
}
