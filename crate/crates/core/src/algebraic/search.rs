//! Search for a nonzero polynomial with small value at a point, coefficients
//! drawn from a finite integer set.
//!
//! Every strategy scores a coefficient vector the same way: split at
//! `h = ⌊n/2⌋`, evaluate the low part `c_0..c_{h-1}` and the high part
//! `c_h..c_{n-1}` by Horner, and take `|low + ξ^h·high|`. Sharing the float
//! expression makes the strategies agree bit-for-bit. Ties go to the
//! lexicographically smallest vector read from the highest coefficient down,
//! with the coefficient set in increasing order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::poly::IntPolynomial;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Exhaustive,
    MeetInMiddle,
    BranchAndBound,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::MeetInMiddle => "meet-in-middle",
            Strategy::BranchAndBound => "branch-and-bound",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Strategy::Exhaustive),
            "meet-in-middle" | "mim" => Ok(Strategy::MeetInMiddle),
            "branch-and-bound" | "bnb" => Ok(Strategy::BranchAndBound),
            _ => Err(Error::InvalidArgument(format!("unknown search strategy {s:?}"))),
        }
    }
}

/// Work limits. `table_entries` bounds each meet-in-middle half;
/// `enumeration` bounds the number of vectors visited by the other strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub table_entries: u128,
    pub enumeration: u128,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            table_entries: 1 << 26,
            enumeration: 1 << 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub coeffs: Vec<i64>,
    pub value: f64,
}

impl SearchResult {
    pub fn polynomial(&self) -> IntPolynomial {
        IntPolynomial::from_i64(&self.coeffs)
    }
}

/// Sorted, deduplicated coefficient set with 0 present.
fn normalize_set(coeff_set: &[i64]) -> Result<Vec<i64>> {
    let mut c = coeff_set.to_vec();
    c.sort_unstable();
    c.dedup();
    if !c.contains(&0) {
        return Err(Error::InvalidArgument("coefficient set must contain 0".into()));
    }
    if c.len() < 2 {
        return Err(Error::InvalidArgument("coefficient set needs a nonzero element".into()));
    }
    Ok(c)
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("xi must lie in (0, 1), got {xi}")));
    }
    Ok(())
}

fn pow_u128(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

/// Layout shared by all strategies: a vector is `(high index, low index)`
/// with digits most significant first, so index order is lex order.
struct Split {
    xi: f64,
    set: Vec<i64>,
    n: usize,
    h: usize,
    low_len: usize,
    high_len: usize,
    xi_h: f64,
    zero_digit: usize,
}

impl Split {
    fn new(xi: f64, n: usize, set: Vec<i64>) -> Self {
        let h = n / 2;
        let base = set.len();
        let zero_digit = set.iter().position(|&c| c == 0).expect("0 in set");
        Split {
            xi,
            low_len: base.pow(h as u32),
            high_len: base.pow((n - h) as u32),
            xi_h: xi.powi(h as i32),
            set,
            n,
            h,
            zero_digit,
        }
    }

    /// Coefficients `c_0..c_{len-1}` of a half with the given index.
    fn digits(&self, mut idx: usize, len: usize) -> Vec<i64> {
        let base = self.set.len();
        let mut out = vec![0; len];
        for k in 0..len {
            out[k] = self.set[idx % base];
            idx /= base;
        }
        out
    }

    fn horner(&self, coeffs: &[i64]) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * self.xi + c as f64)
    }

    fn low_value(&self, idx: usize) -> f64 {
        self.horner(&self.digits(idx, self.h))
    }

    fn high_value(&self, idx: usize) -> f64 {
        self.horner(&self.digits(idx, self.n - self.h)) * self.xi_h
    }

    fn zero_index(&self, len: usize) -> usize {
        let base = self.set.len();
        (0..len).fold(0, |acc, _| acc * base + self.zero_digit)
    }

    fn total(&self, high: usize, low: usize) -> u128 {
        high as u128 * self.low_len as u128 + low as u128
    }

    fn result(&self, high: usize, low: usize) -> SearchResult {
        let mut coeffs = self.digits(low, self.h);
        coeffs.extend(self.digits(high, self.n - self.h));
        let value = (self.low_value(low) + self.high_value(high)).abs();
        SearchResult { coeffs, value }
    }

    fn low_table(&self) -> Vec<f64> {
        (0..self.low_len).into_par_iter().map(|i| self.low_value(i)).collect()
    }

    fn high_table(&self) -> Vec<f64> {
        (0..self.high_len).into_par_iter().map(|j| self.high_value(j)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Best {
    value: f64,
    idx: u128,
    high: usize,
    low: usize,
}

impl Best {
    fn better_than(&self, other: &Option<Best>) -> bool {
        match other {
            None => true,
            Some(o) => (self.value, self.idx) < (o.value, o.idx),
        }
    }
}

/// Nonzero polynomial of degree `< n` with coefficients in `coeff_set`
/// minimising `|P(ξ)|`.
pub fn min_value_poly_search(
    xi: f64,
    n: usize,
    coeff_set: &[i64],
    strategy: Strategy,
) -> Result<SearchResult> {
    min_value_poly_search_with(xi, n, coeff_set, strategy, SearchBudget::default())
}

pub fn min_value_poly_search_with(
    xi: f64,
    n: usize,
    coeff_set: &[i64],
    strategy: Strategy,
    budget: SearchBudget,
) -> Result<SearchResult> {
    check_xi(xi)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let set = normalize_set(coeff_set)?;
    let base = set.len();
    let total = pow_u128(base, n);
    match strategy {
        Strategy::MeetInMiddle => {
            let half = pow_u128(base, n - n / 2);
            if half > budget.table_entries {
                return Err(Error::BudgetExceeded {
                    what: "meet-in-middle table entries",
                    needed: half,
                    budget: budget.table_entries,
                });
            }
        }
        _ => {
            if total > budget.enumeration {
                return Err(Error::BudgetExceeded {
                    what: "polynomial enumeration",
                    needed: total,
                    budget: budget.enumeration,
                });
            }
        }
    }
    let split = Split::new(xi, n, set);
    let best = match strategy {
        Strategy::Exhaustive => exhaustive(&split),
        Strategy::MeetInMiddle => meet_in_middle(&split),
        Strategy::BranchAndBound => branch_and_bound(&split),
    };
    Ok(split.result(best.high, best.low))
}

fn exhaustive(split: &Split) -> Best {
    let low = split.low_table();
    let zl = split.zero_index(split.h);
    let zh = split.zero_index(split.n - split.h);
    (0..split.high_len)
        .into_par_iter()
        .map(|j| {
            let hv = split.high_value(j);
            let mut best: Option<Best> = None;
            for (i, lv) in low.iter().enumerate() {
                if i == zl && j == zh {
                    continue;
                }
                let cand = Best {
                    value: (lv + hv).abs(),
                    idx: split.total(j, i),
                    high: j,
                    low: i,
                };
                if cand.better_than(&best) {
                    best = Some(cand);
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Best>, b| if b.better_than(&acc) { Some(b) } else { acc })
        .expect("at least one nonzero polynomial")
}

fn sorted_high(split: &Split) -> (Vec<f64>, Vec<u32>) {
    let vals = split.high_table();
    let mut order: Vec<u32> = (0..vals.len() as u32).collect();
    order.par_sort_unstable_by(|&a, &b| {
        vals[a as usize]
            .total_cmp(&vals[b as usize])
            .then(a.cmp(&b))
    });
    let sorted = order.iter().map(|&j| vals[j as usize]).collect();
    (sorted, order)
}

fn meet_in_middle(split: &Split) -> Best {
    let (hv, order) = sorted_high(split);
    let low = split.low_table();
    let zl = split.zero_index(split.h);
    let zh = split.zero_index(split.n - split.h);

    let per_low = |i: usize| -> Option<Best> {
        let lv = low[i];
        let mut best: Option<Best> = None;
        let consider = |pos: usize, best: &mut Option<Best>| {
            let j = order[pos] as usize;
            if i == zl && j == zh {
                return;
            }
            let cand = Best {
                value: (lv + hv[pos]).abs(),
                idx: split.total(j, i),
                high: j,
                low: i,
            };
            if cand.better_than(best) {
                *best = Some(cand);
            }
        };
        if i == zl {
            // the zero polynomial sits in this row; scan the whole row
            for pos in 0..hv.len() {
                consider(pos, &mut best);
            }
            return best;
        }
        // fl(lv + h) is nondecreasing in h, so the minimiser of |lv + h| is
        // adjacent to the sign change
        let p = hv.partition_point(|&h| lv + h < 0.0);
        let mut target = f64::INFINITY;
        if p < hv.len() {
            target = target.min((lv + hv[p]).abs());
        }
        if p > 0 {
            target = target.min((lv + hv[p - 1]).abs());
        }
        let mut pos = p;
        while pos < hv.len() && (lv + hv[pos]).abs() == target {
            consider(pos, &mut best);
            pos += 1;
        }
        let mut pos = p;
        while pos > 0 && (lv + hv[pos - 1]).abs() == target {
            consider(pos - 1, &mut best);
            pos -= 1;
        }
        best
    };

    (0..low.len())
        .into_par_iter()
        .map(per_low)
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Best>, b| if b.better_than(&acc) { Some(b) } else { acc })
        .expect("at least one nonzero polynomial")
}

fn branch_and_bound(split: &Split) -> Best {
    let n = split.n;
    let xi = split.xi;
    let cmin = *split.set.first().unwrap() as f64;
    let cmax = *split.set.last().unwrap() as f64;
    // tail[k] = Σ_{i<k} ξ^i
    let mut tail = vec![0.0; n + 1];
    for k in 1..=n {
        tail[k] = tail[k - 1] + xi.powi(k as i32 - 1);
    }
    let pows: Vec<f64> = (0..n).map(|k| xi.powi(k as i32)).collect();

    struct Ctx<'a> {
        split: &'a Split,
        tail: Vec<f64>,
        pows: Vec<f64>,
        cmin: f64,
        cmax: f64,
        coeffs: Vec<usize>,
        best: Option<Best>,
    }

    fn rec(ctx: &mut Ctx, k: usize, partial: f64, nonzero: bool) {
        // choose c_k given c_{k+1..n-1}; k counts down
        let s = ctx.split;
        let rest = ctx.tail[k + 1];
        for (d, &c) in s.set.iter().enumerate() {
            let v = partial + c as f64 * ctx.pows[k];
            let nz = nonzero || c != 0;
            if k == 0 {
                if !nz {
                    continue;
                }
                ctx.coeffs[0] = d;
                let base = s.set.len();
                let idx_of = |range: std::ops::Range<usize>, coeffs: &[usize]| {
                    range.rev().fold(0usize, |acc, i| acc * base + coeffs[i])
                };
                let low = idx_of(0..s.h, &ctx.coeffs);
                let high = idx_of(s.h..s.n, &ctx.coeffs);
                let cand = Best {
                    value: (s.low_value(low) + s.high_value(high)).abs(),
                    idx: s.total(high, low),
                    high,
                    low,
                };
                if cand.better_than(&ctx.best) {
                    ctx.best = Some(cand);
                }
                continue;
            }
            let lo = v + ctx.cmin * rest;
            let hi = v + ctx.cmax * rest;
            let bound = if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                -hi
            } else {
                0.0
            };
            if let Some(b) = ctx.best {
                // slack covers the rounding gap between this bound and the
                // canonical split evaluation
                let slack = 1e-12 * (1.0 + v.abs() + ctx.cmax.abs().max(ctx.cmin.abs()) * rest);
                if bound - slack > b.value {
                    continue;
                }
            }
            ctx.coeffs[k] = d;
            rec(ctx, k - 1, v, nz);
        }
    }

    let mut ctx = Ctx {
        split,
        tail,
        pows,
        cmin,
        cmax,
        coeffs: vec![0; n],
        best: None,
    };
    rec(&mut ctx, n - 1, 0.0, false);
    ctx.best.expect("at least one nonzero polynomial")
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, u128, usize, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// The `k` best nonzero candidates in (value, lex) order, via meet-in-middle.
pub fn ranked_candidates(
    xi: f64,
    n: usize,
    coeff_set: &[i64],
    k: usize,
    budget: SearchBudget,
) -> Result<Vec<SearchResult>> {
    check_xi(xi)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let set = normalize_set(coeff_set)?;
    let half = pow_u128(set.len(), n - n / 2);
    if half > budget.table_entries {
        return Err(Error::BudgetExceeded {
            what: "meet-in-middle table entries",
            needed: half,
            budget: budget.table_entries,
        });
    }
    let split = Split::new(xi, n, set);
    let (hv, order) = sorted_high(&split);
    let low = split.low_table();
    let zl = split.zero_index(split.h);
    let zh = split.zero_index(split.n - split.h);

    // the global top k are each among the top k of their own low row
    let rows: Vec<Vec<HeapItem>> = (0..low.len())
        .into_par_iter()
        .map(|i| {
            let lv = low[i];
            let mut out = Vec::with_capacity(k + 1);
            let p = hv.partition_point(|&h| lv + h < 0.0);
            let (mut up, mut down) = (p, p);
            while out.len() < k && (up < hv.len() || down > 0) {
                let up_v = (up < hv.len()).then(|| (lv + hv[up]).abs());
                let down_v = (down > 0).then(|| (lv + hv[down - 1]).abs());
                let pos = match (up_v, down_v) {
                    (Some(a), Some(b)) if b < a => {
                        down -= 1;
                        down
                    }
                    (Some(_), _) => {
                        up += 1;
                        up - 1
                    }
                    (None, _) => {
                        down -= 1;
                        down
                    }
                };
                let j = order[pos] as usize;
                if i == zl && j == zh {
                    continue;
                }
                out.push(HeapItem((lv + hv[pos]).abs(), split.total(j, i), j, i));
            }
            out
        })
        .collect();
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
    for item in rows.into_iter().flatten() {
        heap.push(item);
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut items = heap.into_vec();
    items.sort();
    Ok(items.into_iter().map(|it| split.result(it.2, it.3)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Strategy; 3] = [Strategy::Exhaustive, Strategy::MeetInMiddle, Strategy::BranchAndBound];

    #[test]
    fn golden_collision_found() {
        for s in ALL {
            let r = min_value_poly_search(0.6180339887, 3, &[-2, 0, 2], s).unwrap();
            assert_eq!(r.coeffs, vec![2, -2, -2], "{s}");
            assert!(r.value <= 1e-9);
        }
    }

    #[test]
    fn seven_tenths() {
        for s in ALL {
            let r = min_value_poly_search(0.7, 2, &[-1, 0, 1], s).unwrap();
            assert_eq!(r.coeffs, vec![1, -1], "{s}");
            assert!((r.value - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_only() {
        for s in ALL {
            let r = min_value_poly_search(0.4, 1, &[-1, 0, 1], s).unwrap();
            assert_eq!(r.value, 1.0);
            assert_eq!(r.coeffs, vec![-1]);
        }
    }

    #[test]
    fn strategies_agree() {
        for (xi, n, set) in [
            (0.37, 9, vec![-1, 0, 1]),
            (0.81, 8, vec![-2, -1, 0, 1, 2]),
            (0.5, 8, vec![-1, 0, 1]),
            (0.93, 11, vec![0, 1, -3]),
        ] {
            let e = min_value_poly_search(xi, n, &set, Strategy::Exhaustive).unwrap();
            let m = min_value_poly_search(xi, n, &set, Strategy::MeetInMiddle).unwrap();
            let b = min_value_poly_search(xi, n, &set, Strategy::BranchAndBound).unwrap();
            assert_eq!(e, m, "xi={xi} n={n}");
            assert_eq!(e, b, "xi={xi} n={n}");
        }
    }

    #[test]
    fn exact_zero_prefers_lex_smallest() {
        // 1 - 2x vanishes at 1/2 and so does -1 + 2x; highest coefficient
        // smallest wins
        let r = min_value_poly_search(0.5, 2, &[-2, -1, 0, 1, 2], Strategy::MeetInMiddle).unwrap();
        assert_eq!(r.coeffs, vec![1, -2]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn ranked_matches_sorted_enumeration() {
        let cands = ranked_candidates(0.7, 2, &[-2, 0, 2], 8, SearchBudget::default()).unwrap();
        let vals: Vec<(Vec<i64>, f64)> = cands.iter().map(|c| (c.coeffs.clone(), c.value)).collect();
        assert_eq!(vals.len(), 8);
        assert_eq!(vals[0].0, vec![2, -2]);
        assert_eq!(vals[1].0, vec![-2, 2]);
        assert!(vals.windows(2).all(|w| w[0].1 <= w[1].1));
        let best = min_value_poly_search(0.7, 2, &[-2, 0, 2], Strategy::Exhaustive).unwrap();
        assert_eq!(cands[0], best);
    }

    #[test]
    fn budget_refusal() {
        let budget = SearchBudget {
            table_entries: 10,
            enumeration: 10,
        };
        for s in ALL {
            let err = min_value_poly_search_with(0.5, 6, &[-1, 0, 1], s, budget).unwrap_err();
            assert!(err.is_budget());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(min_value_poly_search(1.2, 3, &[-1, 0, 1], Strategy::Exhaustive).is_err());
        assert!(min_value_poly_search(0.5, 3, &[-1, 1], Strategy::Exhaustive).is_err());
        assert!(min_value_poly_search(0.5, 0, &[-1, 0, 1], Strategy::Exhaustive).is_err());
    }
}
