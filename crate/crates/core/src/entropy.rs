//! Shannon entropy of discrete measures with respect to partitions, and the
//! average entropy `H(μ; r)`.
//!
//! All entropies are in bits.
//!
//! The average entropy integrates `H(⌊X/r + u⌋)` over offsets `u ∈ [0,1)^d`.
//! For a finitely supported measure the integrand is piecewise constant in
//! `u`: along axis `j` an atom's cell index steps up by one exactly when
//! `u_j` crosses `1 - frac(x_j / r_j)`. The exact method enumerates the
//! product of those per-axis intervals (sweeping the first axis
//! incrementally), so values are exact up to floating-point roundoff.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::scales::{dyadic_index, en_levels, ScaleVector};
use crate::util::{compensated_sum, entropy_of_masses};

pub type Key = SmallVec<[i64; 8]>;

type KeyFn = dyn Fn(&[f64], &mut Key) + Send + Sync;

/// A partition of `R^d`, given as a map from points to discrete keys.
#[derive(Clone)]
pub enum Keying {
    /// The one-class partition.
    Trivial,
    /// Every distinct point is its own class.
    Identity,
    /// Dyadic product partition with per-axis levels (this is `E_n` when the
    /// levels are `⌊χ_j n⌋`).
    Dyadic { levels: Vec<i64> },
    /// `π_J^{-1}` of a dyadic partition: only coordinates in `axes` are keyed.
    ProjectedDyadic { axes: Vec<usize>, levels: Vec<i64> },
    /// The shifted grid `⌊x / r + offset⌋`.
    Grid { r: ScaleVector, offset: Vec<f64> },
    /// Common refinement of two partitions.
    Join(Box<Keying>, Box<Keying>),
    Custom(Arc<KeyFn>),
}

impl fmt::Debug for Keying {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Keying::Trivial => write!(f, "Trivial"),
            Keying::Identity => write!(f, "Identity"),
            Keying::Dyadic { levels } => write!(f, "Dyadic{levels:?}"),
            Keying::ProjectedDyadic { axes, levels } => {
                write!(f, "ProjectedDyadic{{axes: {axes:?}, levels: {levels:?}}}")
            }
            Keying::Grid { r, offset } => write!(f, "Grid{{r: {r:?}, offset: {offset:?}}}"),
            Keying::Join(a, b) => write!(f, "Join({a:?}, {b:?})"),
            Keying::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Keying {
    /// `E_n` for the scale vector `λ`.
    pub fn en(n: i64, lambda: &ScaleVector) -> Result<Self> {
        Ok(Keying::Dyadic {
            levels: en_levels(lambda, n)?,
        })
    }

    /// `π_J^{-1} E_n`.
    pub fn projected_en(n: i64, axes: &[usize], lambda: &ScaleVector) -> Result<Self> {
        let all = en_levels(lambda, n)?;
        if axes.iter().any(|&j| j >= all.len()) {
            return Err(Error::InvalidArgument(format!(
                "axes {axes:?} out of range for d = {}",
                all.len()
            )));
        }
        Ok(Keying::ProjectedDyadic {
            axes: axes.to_vec(),
            levels: axes.iter().map(|&j| all[j]).collect(),
        })
    }

    /// `E_n ∨ π_J^{-1} E_{n+m}`.
    pub fn en_join_projected(n: i64, m: i64, axes: &[usize], lambda: &ScaleVector) -> Result<Self> {
        Ok(Keying::join(
            Keying::en(n, lambda)?,
            Keying::projected_en(n + m, axes, lambda)?,
        ))
    }

    pub fn grid(r: ScaleVector, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != r.dim() {
            return Err(Error::DimensionMismatch {
                expected: r.dim(),
                found: offset.len(),
            });
        }
        if offset.iter().any(|u| !(0.0..1.0).contains(u)) {
            return Err(Error::InvalidArgument("grid offsets must lie in [0, 1)".into()));
        }
        Ok(Keying::Grid { r, offset })
    }

    pub fn join(a: Keying, b: Keying) -> Self {
        Keying::Join(Box::new(a), Box::new(b))
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&[f64], &mut Key) + Send + Sync + 'static,
    {
        Keying::Custom(Arc::new(f))
    }

    /// Appends the key of `x` to `out`.
    pub fn key_into(&self, x: &[f64], out: &mut Key) {
        match self {
            Keying::Trivial => {}
            Keying::Identity => out.extend(x.iter().map(|v| v.to_bits() as i64)),
            Keying::Dyadic { levels } => {
                out.extend(x.iter().zip(levels).map(|(&v, &l)| dyadic_index(v, l)))
            }
            Keying::ProjectedDyadic { axes, levels } => out.extend(
                axes.iter()
                    .zip(levels)
                    .map(|(&j, &l)| dyadic_index(x[j], l)),
            ),
            Keying::Grid { r, offset } => out.extend(
                x.iter()
                    .zip(r.entries())
                    .zip(offset)
                    .map(|((&v, &ri), &u)| (v / ri + u).floor() as i64),
            ),
            Keying::Join(a, b) => {
                a.key_into(x, out);
                b.key_into(x, out);
            }
            Keying::Custom(f) => f(x, out),
        }
    }

    pub fn key(&self, x: &[f64]) -> Key {
        let mut k = Key::new();
        self.key_into(x, &mut k);
        k
    }
}

/// Masses of the partition classes met by `mu`, in key order.
fn class_masses(mu: &DiscreteMeasure, keying: &Keying) -> Vec<f64> {
    let mut keyed: Vec<(Key, f64)> = mu.atoms().map(|(p, w)| (keying.key(p), w)).collect();
    // stable, so equal keys keep atom order and sums are reproducible
    keyed.par_sort_by(|a, b| a.0.cmp(&b.0));
    let mut masses = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let mut j = i + 1;
        while j < keyed.len() && keyed[j].0 == keyed[i].0 {
            j += 1;
        }
        masses.push(compensated_sum(keyed[i..j].iter().map(|e| e.1)));
        i = j;
    }
    masses
}

/// `H(μ, K) = -Σ_D μ(D) log μ(D)`. A measure of mass `c ≠ 1` gets
/// `c H(μ/c, K)`, the same convention as the average entropies.
pub fn partition_entropy(mu: &DiscreteMeasure, keying: &Keying) -> Result<f64> {
    let c = mu.mass();
    if !(c > 0.0) {
        return Ok(0.0);
    }
    let h = entropy_of_masses(&class_masses(mu, keying));
    Ok(if c == 1.0 { h } else { c * h })
}

/// `H(μ, fine | coarse)`, computed as `H(μ, fine ∨ coarse) - H(μ, coarse)`.
pub fn conditional_entropy(mu: &DiscreteMeasure, fine: &Keying, coarse: &Keying) -> Result<f64> {
    let joined = Keying::join(coarse.clone(), fine.clone());
    let h_join = partition_entropy(mu, &joined)?;
    let h_coarse = partition_entropy(mu, coarse)?;
    let v = h_join - h_coarse;
    Ok(if v < 0.0 && v > -1e-12 { 0.0 } else { v })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    ExactBreakpoint,
    QuasiRandom,
}

impl fmt::Display for QuadMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadMethod::ExactBreakpoint => "exact",
            QuadMethod::QuasiRandom => "qmc",
        })
    }
}

/// How the offset integral in `H(μ; r)` is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    /// Number of quasi-random offsets.
    pub offsets: usize,
    pub seed: u64,
    /// Largest number of exact integration cells accepted.
    pub cell_budget: u128,
    /// Fall back to quasi-random quadrature when the exact cell count exceeds the budget.
    pub fallback: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            method: QuadMethod::ExactBreakpoint,
            offsets: 4096,
            seed: 0,
            cell_budget: 10_000_000,
            fallback: true,
        }
    }
}

impl QuadratureSpec {
    /// Exact integration with no fallback.
    pub fn exact() -> Self {
        QuadratureSpec {
            fallback: false,
            ..Self::default()
        }
    }

    pub fn qmc(offsets: usize, seed: u64) -> Self {
        QuadratureSpec {
            method: QuadMethod::QuasiRandom,
            offsets,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Bits.
    pub value: f64,
    pub method: QuadMethod,
    pub offsets_used: u64,
    pub error_bound: f64,
}

/// Per-axis step structure of the offset integrand.
struct AxisSteps {
    /// `⌊x_{i,j}/r_j⌋` for every atom.
    base: Vec<i64>,
    /// Offset at which the atom's index steps up (`None` if it never does in `[0,1)`).
    event: Vec<Option<f64>>,
    /// Sorted distinct event offsets.
    breaks: Vec<f64>,
}

impl AxisSteps {
    fn new(mu: &DiscreteMeasure, j: usize, r: f64) -> Self {
        let mut base = Vec::with_capacity(mu.len());
        let mut event = Vec::with_capacity(mu.len());
        for (p, _) in mu.atoms() {
            let t = p[j] / r;
            let fl = t.floor();
            let frac = t - fl;
            base.push(fl as i64);
            let e = 1.0 - frac;
            event.push(if frac > 0.0 && e < 1.0 { Some(e) } else { None });
        }
        let mut breaks: Vec<f64> = event.iter().flatten().copied().collect();
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        AxisSteps { base, event, breaks }
    }

    /// `(midpoint, length)` of every constant interval of this axis.
    fn intervals(&self) -> Vec<(f64, f64)> {
        let mut edges = Vec::with_capacity(self.breaks.len() + 2);
        edges.push(0.0);
        edges.extend(self.breaks.iter().copied());
        edges.push(1.0);
        edges
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
            .collect()
    }

    fn index_at(&self, atom: usize, u: f64) -> i64 {
        match self.event[atom] {
            Some(e) if u >= e => self.base[atom] + 1,
            _ => self.base[atom],
        }
    }
}

fn exact_cell_count(axes: &[AxisSteps]) -> u128 {
    axes.iter()
        .map(|a| a.breaks.len() as u128 + 1)
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

fn f_mass(m: f64) -> f64 {
    if m > 0.0 {
        m * m.log2()
    } else {
        0.0
    }
}

/// Exact integral for a probability measure.
fn avg_entropy_exact(mu: &DiscreteMeasure, axes: &[AxisSteps]) -> (f64, f64) {
    let d = axes.len();
    let n = mu.len();
    let weights = mu.weights();

    // Sweep order along axis 0: atoms with events, by (event, atom index).
    let first = &axes[0];
    let mut sweep: Vec<usize> = (0..n).filter(|&i| first.event[i].is_some()).collect();
    sweep.sort_by(|&a, &b| {
        first.event[a]
            .unwrap()
            .total_cmp(&first.event[b].unwrap())
            .then(a.cmp(&b))
    });

    let outer: Vec<Vec<(f64, f64)>> = axes[1..].iter().map(|a| a.intervals()).collect();
    let outer_cells: usize = outer.iter().map(|v| v.len()).product();
    let mut counter = vec![0usize; d.saturating_sub(1)];

    let mut pieces: Vec<f64> = Vec::new();
    let mut ops = 0usize;
    for _ in 0..outer_cells {
        let mut outer_len = 1.0;
        let mut rest_key: Vec<Key> = vec![Key::new(); n];
        for (k, axis_ivals) in outer.iter().enumerate() {
            let (mid, len) = axis_ivals[counter[k]];
            outer_len *= len;
            for (i, key) in rest_key.iter_mut().enumerate() {
                key.push(axes[k + 1].index_at(i, mid));
            }
        }

        // Cell masses at u_0 ∈ [0, first break).
        let mut cell_of: Vec<usize> = vec![0; n];
        let mut cells: HashMap<Key, usize> = HashMap::with_capacity(n);
        let mut cell_mass: Vec<f64> = Vec::with_capacity(n);
        let mut keyed: Vec<(Key, usize)> = (0..n)
            .map(|i| {
                let mut k = Key::new();
                k.push(first.base[i]);
                k.extend(rest_key[i].iter().copied());
                (k, i)
            })
            .collect();
        keyed.sort();
        for (k, i) in keyed {
            let next = cell_mass.len();
            let id = *cells.entry(k).or_insert_with(|| {
                cell_mass.push(0.0);
                next
            });
            cell_mass[id] += weights[i];
            cell_of[i] = id;
        }
        let mut s = compensated_sum(cell_mass.iter().map(|&m| f_mass(m)));

        let mut prev = 0.0f64;
        let mut idx = 0;
        while idx <= sweep.len() {
            let next_break = if idx < sweep.len() {
                first.event[sweep[idx]].unwrap()
            } else {
                1.0
            };
            let len = next_break - prev;
            if len > 0.0 {
                pieces.push(outer_len * len * (-s).max(0.0));
            }
            if idx == sweep.len() {
                break;
            }
            // Apply every step at this break.
            while idx < sweep.len() && first.event[sweep[idx]].unwrap() == next_break {
                let i = sweep[idx];
                let w = weights[i];
                let from = cell_of[i];
                let mut k = Key::new();
                k.push(first.base[i] + 1);
                k.extend(rest_key[i].iter().copied());
                let next = cell_mass.len();
                let to = *cells.entry(k).or_insert_with(|| {
                    cell_mass.push(0.0);
                    next
                });
                s -= f_mass(cell_mass[from]) + f_mass(cell_mass[to]);
                cell_mass[from] -= w;
                if cell_mass[from] < 1e-300 {
                    cell_mass[from] = cell_mass[from].max(0.0);
                }
                cell_mass[to] += w;
                s += f_mass(cell_mass[from]) + f_mass(cell_mass[to]);
                cell_of[i] = to;
                idx += 1;
                ops += 1;
            }
            prev = next_break;
        }

        for k in (0..counter.len()).rev() {
            counter[k] += 1;
            if counter[k] < outer[k].len() {
                break;
            }
            counter[k] = 0;
        }
    }
    let value = compensated_sum(pieces.iter().copied());
    let bound = (ops + pieces.len() + n) as f64 * 8.0 * f64::EPSILON * value.max(1.0);
    (value, bound)
}

/// Low-discrepancy offsets in `[0,1)^d`: the additive recurrence built on the
/// generalised golden ratio, with one seeded random shift.
pub fn qmc_offsets(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    // φ_d is the positive root of x^{d+1} = x + 1.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|k| {
            alpha
                .iter()
                .zip(&shift)
                .map(|(a, s)| (s + a * (k as f64 + 1.0)).fract())
                .collect()
        })
        .collect()
}

/// `H(⌊X/r + u⌋)` for a single offset `u`.
pub fn offset_entropy(mu: &DiscreteMeasure, r: &ScaleVector, u: &[f64]) -> Result<f64> {
    partition_entropy(mu, &Keying::grid(r.clone(), u.to_vec())?)
}

fn qmc_values(mu: &DiscreteMeasure, r: &ScaleVector, offsets: &[Vec<f64>]) -> Result<Vec<f64>> {
    offsets.iter().map(|u| offset_entropy(mu, r, u)).collect()
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = compensated_sum(v.iter().copied()) / n;
    if v.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = compensated_sum(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_scale(mu: &DiscreteMeasure, r: &ScaleVector) -> Result<()> {
    if mu.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: r.dim(),
        });
    }
    Ok(())
}

fn axis_steps(mu: &DiscreteMeasure, r: &ScaleVector) -> Vec<AxisSteps> {
    (0..mu.dim()).map(|j| AxisSteps::new(mu, j, r.get(j))).collect()
}

/// Decides whether exact integration fits the budget for every scale in `rs`.
fn choose_method(mu: &DiscreteMeasure, rs: &[&ScaleVector], q: &QuadratureSpec) -> Result<QuadMethod> {
    if q.method == QuadMethod::QuasiRandom || mu.dim() == 0 {
        return Ok(q.method);
    }
    for r in rs {
        let cells = exact_cell_count(&axis_steps(mu, r));
        if cells > q.cell_budget {
            if q.fallback {
                log::info!("exact quadrature needs {cells} cells; using quasi-random offsets");
                return Ok(QuadMethod::QuasiRandom);
            }
            return Err(Error::BudgetExceeded {
                what: "exact quadrature cells",
                needed: cells,
                budget: q.cell_budget,
            });
        }
    }
    Ok(QuadMethod::ExactBreakpoint)
}

fn avg_entropy_with(
    mu: &DiscreteMeasure,
    r: &ScaleVector,
    method: QuadMethod,
    q: &QuadratureSpec,
    offsets: Option<&[Vec<f64>]>,
) -> Result<EntropyReport> {
    let c = mu.mass();
    if mu.is_empty() || c <= 0.0 || mu.dim() == 0 {
        return Ok(EntropyReport {
            value: 0.0,
            method,
            offsets_used: 0,
            error_bound: 0.0,
        });
    }
    let nu = mu.normalized()?;
    match method {
        QuadMethod::ExactBreakpoint => {
            let axes = axis_steps(&nu, r);
            let cells = exact_cell_count(&axes);
            let (v, bound) = avg_entropy_exact(&nu, &axes);
            Ok(EntropyReport {
                value: c * v,
                method,
                offsets_used: cells as u64,
                error_bound: c * bound,
            })
        }
        QuadMethod::QuasiRandom => {
            let owned;
            let offs = match offsets {
                Some(o) => o,
                None => {
                    owned = qmc_offsets(mu.dim(), q.offsets, q.seed);
                    &owned
                }
            };
            let vals = qmc_values(&nu, r, offs)?;
            let (mean, se) = mean_and_stderr(&vals);
            Ok(EntropyReport {
                value: c * mean,
                method,
                offsets_used: offs.len() as u64,
                error_bound: c * se,
            })
        }
    }
}

/// Average entropy `H(μ; r)`; for mass `c ≠ 1` this is `c · H(μ/c; r)`.
pub fn avg_entropy(mu: &DiscreteMeasure, r: &ScaleVector, q: &QuadratureSpec) -> Result<EntropyReport> {
    check_scale(mu, r)?;
    let method = choose_method(mu, &[r], q)?;
    avg_entropy_with(mu, r, method, q, None)
}

/// `H(μ; r | r') = H(μ; r) - H(μ; r')`, both terms with the same quadrature.
pub fn avg_cond_entropy(
    mu: &DiscreteMeasure,
    r: &ScaleVector,
    r_prime: &ScaleVector,
    q: &QuadratureSpec,
) -> Result<EntropyReport> {
    check_scale(mu, r)?;
    check_scale(mu, r_prime)?;
    let method = choose_method(mu, &[r, r_prime], q)?;
    let offsets = match method {
        QuadMethod::QuasiRandom => Some(qmc_offsets(mu.dim(), q.offsets, q.seed)),
        QuadMethod::ExactBreakpoint => None,
    };
    let a = avg_entropy_with(mu, r, method, q, offsets.as_deref())?;
    let b = avg_entropy_with(mu, r_prime, method, q, offsets.as_deref())?;
    Ok(EntropyReport {
        value: a.value - b.value,
        method,
        offsets_used: a.offsets_used.max(b.offsets_used),
        error_bound: a.error_bound + b.error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MergePolicy;

    fn m1(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_atoms(atoms.iter().map(|&(x, w)| ([x], w)), MergePolicy::Exact)
            .unwrap()
    }

    fn sv(v: &[f64]) -> ScaleVector {
        ScaleVector::new(v.to_vec()).unwrap()
    }

    fn exact() -> QuadratureSpec {
        QuadratureSpec::exact()
    }

    #[test]
    fn partition_entropy_examples() {
        let uniform4 = m1(&[(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]);
        assert!((partition_entropy(&uniform4, &Keying::Identity).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(partition_entropy(&m1(&[(0.3, 1.0)]), &Keying::Identity).unwrap(), 0.0);
        let three = m1(&[(0.0, 0.5), (1.0, 0.25), (2.0, 0.25)]);
        assert!((partition_entropy(&three, &Keying::Identity).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(partition_entropy(&DiscreteMeasure::zero(1), &Keying::Identity).unwrap(), 0.0);
    }

    #[test]
    fn partition_entropy_scales_with_mass() {
        let m = m1(&[(0.0, 2.0), (1.0, 2.0)]);
        assert!((partition_entropy(&m, &Keying::Identity).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_entropy_examples() {
        let u = m1(&[(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]);
        let id = Keying::Identity;
        assert_eq!(conditional_entropy(&u, &id, &id).unwrap(), 0.0);
        assert!(
            (conditional_entropy(&u, &id, &Keying::Trivial).unwrap() - 2.0).abs() < 1e-15
        );
        let parity = Keying::custom(|x, out| out.push((x[0] as i64).rem_euclid(2)));
        assert!((conditional_entropy(&u, &id, &parity).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn avg_entropy_examples() {
        let r = sv(&[0.7]);
        assert_eq!(avg_entropy(&m1(&[(0.3, 1.0)]), &r, &exact()).unwrap().value, 0.0);
        let half = m1(&[(0.0, 0.5), (0.5, 0.5)]);
        let rep = avg_entropy(&half, &sv(&[1.0]), &exact()).unwrap();
        assert!((rep.value - 0.5).abs() < 1e-12);
        assert_eq!(rep.method, QuadMethod::ExactBreakpoint);
        assert!(rep.error_bound <= 1e-9);
        // c / r closed form
        for &(c, r) in &[(0.1, 1.0), (0.3, 0.5), (0.25, 2.0), (1.0, 1.0)] {
            let m = m1(&[(0.0, 0.5), (c, 0.5)]);
            let v = avg_entropy(&m, &sv(&[r]), &exact()).unwrap().value;
            assert!((v - c / r).abs() < 1e-12, "c={c} r={r} v={v}");
        }
    }

    #[test]
    fn avg_entropy_sub_probability_mass() {
        let half = m1(&[(0.0, 0.25), (0.5, 0.25)]);
        let v = avg_entropy(&half, &sv(&[1.0]), &exact()).unwrap().value;
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn avg_cond_entropy_examples() {
        let coin = m1(&[(0.0, 0.5), (1.0, 0.5)]);
        let r = sv(&[1.0]);
        assert_eq!(avg_cond_entropy(&coin, &r, &r, &exact()).unwrap().value, 0.0);
        let v = avg_cond_entropy(&coin, &r, &sv(&[2.0]), &exact()).unwrap().value;
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_budget_refusal_and_fallback() {
        let atoms: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.137 + 0.01, 0.02)).collect();
        let m = m1(&atoms);
        let tight = QuadratureSpec {
            cell_budget: 10,
            ..QuadratureSpec::exact()
        };
        assert!(matches!(
            avg_entropy(&m, &sv(&[1.0]), &tight),
            Err(Error::BudgetExceeded { .. })
        ));
        let fallback = QuadratureSpec {
            cell_budget: 10,
            ..QuadratureSpec::default()
        };
        let rep = avg_entropy(&m, &sv(&[1.0]), &fallback).unwrap();
        assert_eq!(rep.method, QuadMethod::QuasiRandom);
        assert_eq!(rep.offsets_used, 4096);
    }

    /// Midpoint rule over a fine offset grid, keyed directly by `⌊x/r + u⌋`.
    fn brute_force_avg_entropy(mu: &DiscreteMeasure, r: &ScaleVector, steps: usize) -> f64 {
        let d = mu.dim();
        let total = steps.pow(d as u32);
        let mut acc = 0.0;
        for cell in 0..total {
            let mut c = cell;
            let u: Vec<f64> = (0..d)
                .map(|_| {
                    let k = c % steps;
                    c /= steps;
                    (k as f64 + 0.5) / steps as f64
                })
                .collect();
            acc += offset_entropy(mu, r, &u).unwrap();
        }
        acc / total as f64
    }

    #[test]
    fn exact_matches_dense_midpoint_rule_on_lattice_fixture() {
        // Atoms on the 1/8 lattice with r on the 1/4 lattice: breakpoints are
        // multiples of 1/8 of a cell, so a 64-step midpoint rule is exact.
        let m = DiscreteMeasure::from_atoms(
            [
                (vec![0.125, 0.5], 0.2),
                (vec![0.375, -0.25], 0.3),
                (vec![1.0, 0.875], 0.1),
                (vec![-0.625, 0.125], 0.4),
            ],
            MergePolicy::Exact,
        )
        .unwrap();
        let r = sv(&[0.5, 0.75]);
        let exact_v = avg_entropy(&m, &r, &exact()).unwrap().value;
        let brute = brute_force_avg_entropy(&m, &r, 48);
        assert!((exact_v - brute).abs() < 1e-12, "{exact_v} vs {brute}");
    }

    #[test]
    fn qmc_approaches_exact() {
        let m = m1(&[(0.0, 0.3), (0.37, 0.2), (1.11, 0.5)]);
        let r = sv(&[0.9]);
        let e = avg_entropy(&m, &r, &exact()).unwrap().value;
        let q = avg_entropy(&m, &r, &QuadratureSpec::qmc(4096, 0)).unwrap();
        assert!((e - q.value).abs() < 2e-3, "{e} vs {}", q.value);
    }

    #[test]
    fn qmc_is_reproducible() {
        let a = qmc_offsets(3, 16, 7);
        let b = qmc_offsets(3, 16, 7);
        assert_eq!(a, b);
        assert_ne!(a, qmc_offsets(3, 16, 8));
        assert!(a.iter().flatten().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn keying_join_is_pair_of_keys() {
        let lam = sv(&[0.5, 0.25]);
        let k = Keying::en_join_projected(1, 2, &[1], &lam).unwrap();
        let key = k.key(&[0.3, 0.3]);
        // E_1: (0, 1); π_{2}^{-1} E_3 on axis 2 at level 6: ⌊0.3·64⌋ = 19
        assert_eq!(key.as_slice(), &[0, 1, 19]);
    }
}
