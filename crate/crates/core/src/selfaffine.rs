//! Homogeneous diagonal self-affine systems: level-`n` approximations,
//! convolution factors, Lyapunov dimension, entropy and dimension
//! estimators, random-walk entropy bounds, exact overlaps, separation and
//! non-saturation profiles.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::{AlgebraicNumber, IntPolynomial, PowerTable};
use crate::entropy::{conditional_entropy, partition_entropy, Keying};
use crate::error::{Error, Result};
use crate::measures::{euclidean, DiscreteMeasure, MergePolicy};
use crate::scales::ScaleVector;
use crate::util::{compensated_sum, entropy_of_masses};

/// Default cap on the number of words enumerated before merging.
pub const DEFAULT_WORD_BUDGET: u128 = 1 << 24;

/// Largest allowed distance between a declared contraction and the root of
/// its minimal polynomial.
const MINPOLY_MATCH_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub a: Vec<i64>,
    pub p: f64,
}

/// The system `{x ↦ λx + a_i}` with probabilities `p_i`.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    lambda: ScaleVector,
    maps: Vec<MapSpec>,
    alphas: Option<Vec<AlgebraicNumber>>,
    chi: Vec<f64>,
    l0: i64,
    entropy_p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    a: Vec<f64>,
    p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    lambda: Vec<f64>,
    maps: Vec<RawMap>,
    #[serde(default)]
    minpolys: Option<Vec<Vec<i64>>>,
}

impl SystemSpec {
    pub fn new(lambda: ScaleVector, maps: Vec<MapSpec>) -> Result<Self> {
        lambda.check_omega()?;
        let d = lambda.dim();
        if maps.is_empty() {
            return Err(Error::Spec("maps: at least one map is required".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.a.len() != d {
                return Err(Error::Spec(format!(
                    "maps[{i}].a: expected {d} coordinates, found {}",
                    m.a.len()
                )));
            }
            if !(m.p > 0.0) || !m.p.is_finite() {
                return Err(Error::Spec(format!("maps[{i}].p: probabilities must be positive")));
            }
        }
        let total = compensated_sum(maps.iter().map(|m| m.p));
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Spec(format!("p must sum to 1 (sum is {total})")));
        }
        let chi = lambda.chi();
        let l0 = (0..d)
            .map(|j| {
                let col = maps.iter().map(|m| m.a[j]);
                col.clone().max().unwrap() - col.min().unwrap()
            })
            .max()
            .unwrap_or(0);
        let entropy_p = entropy_of_masses(&maps.iter().map(|m| m.p).collect::<Vec<_>>());
        Ok(SystemSpec {
            lambda,
            maps,
            alphas: None,
            chi,
            l0,
            entropy_p,
        })
    }

    /// Attaches exact representations of the contractions; `minpolys[j]` must
    /// have a real root within 1e-6 of `λ_j`. Reducible polynomials are
    /// replaced by the irreducible factor vanishing there.
    pub fn with_minpolys(mut self, minpolys: &[IntPolynomial]) -> Result<Self> {
        if minpolys.len() != self.dim() {
            return Err(Error::Spec(format!(
                "minpolys: expected {} polynomials, found {}",
                self.dim(),
                minpolys.len()
            )));
        }
        let mut alphas = Vec::with_capacity(minpolys.len());
        for (j, (p, &l)) in minpolys.iter().zip(self.lambda.entries()).enumerate() {
            let a = AlgebraicNumber::root_near(p, l)
                .map_err(|e| Error::Spec(format!("minpolys[{j}]: {e}")))?;
            let v = a.to_f64();
            if (v - l).abs() > MINPOLY_MATCH_TOL {
                return Err(Error::Spec(format!(
                    "minpolys[{j}]: nearest root {v} is not within {MINPOLY_MATCH_TOL} of lambda {l}"
                )));
            }
            alphas.push(a);
        }
        self.alphas = Some(alphas);
        Ok(self)
    }

    pub fn with_algebraic(mut self, alphas: Vec<AlgebraicNumber>) -> Result<Self> {
        if alphas.len() != self.dim() {
            return Err(Error::Spec("one algebraic number per axis is required".into()));
        }
        self.alphas = Some(alphas);
        Ok(self)
    }

    /// Fair ±(1,…,1) system: the Bernoulli convolution with contractions `λ`.
    pub fn bernoulli(lambda: ScaleVector) -> Result<Self> {
        let d = lambda.dim();
        Self::new(
            lambda,
            vec![
                MapSpec { a: vec![-1; d], p: 0.5 },
                MapSpec { a: vec![1; d], p: 0.5 },
            ],
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)?;
        let lambda = ScaleVector::new(raw.lambda.clone())
            .map_err(|_| Error::Spec("lambda: entries must be positive and finite".into()))?;
        let mut maps = Vec::with_capacity(raw.maps.len());
        for (i, m) in raw.maps.iter().enumerate() {
            let mut a = Vec::with_capacity(m.a.len());
            for (j, &v) in m.a.iter().enumerate() {
                if v.fract() != 0.0 || v.abs() > (1u64 << 53) as f64 {
                    return Err(Error::Spec(format!(
                        "maps[{i}].a[{j}]: translations must be integers, found {v}"
                    )));
                }
                a.push(v as i64);
            }
            maps.push(MapSpec { a, p: m.p });
        }
        let spec = Self::new(lambda, maps)?;
        match raw.minpolys {
            Some(polys) => {
                let polys: Vec<IntPolynomial> = polys.iter().map(|c| IntPolynomial::from_i64(c)).collect();
                spec.with_minpolys(&polys)
            }
            None => Ok(spec),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "lambda": self.lambda.entries(),
            "maps": self.maps,
        });
        if let Some(alphas) = &self.alphas {
            let polys: Vec<Vec<String>> = alphas
                .iter()
                .map(|a| a.minpoly().coeffs().iter().map(|c| c.to_string()).collect())
                .collect();
            v["minpolys"] = serde_json::json!(polys);
        }
        v
    }

    pub fn dim(&self) -> usize {
        self.lambda.dim()
    }

    pub fn lambda(&self) -> &ScaleVector {
        &self.lambda
    }

    pub fn maps(&self) -> &[MapSpec] {
        &self.maps
    }

    pub fn alphas(&self) -> Option<&[AlgebraicNumber]> {
        self.alphas.as_deref()
    }

    pub fn is_exact(&self) -> bool {
        self.alphas.is_some()
    }

    /// `χ_j = -log2 λ_j`.
    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    /// Largest coordinate difference between translations.
    pub fn l0(&self) -> i64 {
        self.l0
    }

    /// `H(p)` in bits.
    pub fn entropy_p(&self) -> f64 {
        self.entropy_p
    }

    /// Pairwise translation differences on axis `j`.
    pub fn difference_set(&self, j: usize) -> Vec<i64> {
        let col: Vec<i64> = self.maps.iter().map(|m| m.a[j]).collect();
        crate::algebraic::approx::difference_set(&col)
    }

    fn word_count(&self, n: usize) -> u128 {
        let mut acc: u128 = 1;
        for _ in 0..n {
            acc = acc.saturating_mul(self.maps.len() as u128);
        }
        acc
    }

    fn check_budget(&self, n: usize, budget: u128) -> Result<()> {
        let needed = self.word_count(n);
        if needed > budget {
            return Err(Error::BudgetExceeded {
                what: "words",
                needed,
                budget,
            });
        }
        Ok(())
    }
}

/// Number arithmetic used to decide when two words give the same point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    /// Bit-identical floating-point positions.
    Float,
    /// Equality of translation polynomials modulo the minimal polynomials.
    Exact,
}

impl Arithmetic {
    pub fn as_str(self) -> &'static str {
        match self {
            Arithmetic::Float => "float",
            Arithmetic::Exact => "exact",
        }
    }
}

/// Exact when the system carries minimal polynomials, float otherwise.
pub fn default_arithmetic(spec: &SystemSpec) -> Arithmetic {
    if spec.is_exact() {
        Arithmetic::Exact
    } else {
        Arithmetic::Float
    }
}

/// Top-level prefixes to split enumeration across threads.
fn prefixes(letters: usize, n: usize) -> Vec<Vec<usize>> {
    let mut depth = 0;
    let mut count = 1usize;
    while depth < n && count < 256 {
        depth += 1;
        count *= letters;
    }
    let mut out = vec![Vec::new()];
    for _ in 0..depth {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..letters).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// All words of length `b - a` placed at powers `a..b`: returns flat points
/// `Σ_k a_{u_k} λ^k` and word probabilities, in lexicographic word order
/// (highest power first).
fn enumerate_points(spec: &SystemSpec, powers: Range<usize>) -> (Vec<f64>, Vec<f64>) {
    let d = spec.dim();
    let len = powers.end - powers.start;
    let lam = spec.lambda.entries();
    let scale: Vec<f64> = lam.iter().map(|l| l.powi(powers.start as i32)).collect();
    let maps = &spec.maps;

    // Horner from the highest power down: v ← a + λ v
    fn dfs(
        maps: &[MapSpec],
        lam: &[f64],
        depth: usize,
        v: &mut Vec<f64>,
        w: f64,
        coords: &mut Vec<f64>,
        weights: &mut Vec<f64>,
        scale: &[f64],
    ) {
        if depth == 0 {
            coords.extend(v.iter().zip(scale).map(|(x, s)| x * s));
            weights.push(w);
            return;
        }
        let saved = v.clone();
        for m in maps {
            for j in 0..v.len() {
                v[j] = m.a[j] as f64 + lam[j] * saved[j];
            }
            dfs(maps, lam, depth - 1, v, w * m.p, coords, weights, scale);
        }
        v.copy_from_slice(&saved);
    }

    let chunks: Vec<(Vec<f64>, Vec<f64>)> = prefixes(maps.len(), len)
        .par_iter()
        .map(|prefix| {
            let mut v = vec![0.0; d];
            let mut w = 1.0;
            for &i in prefix {
                for j in 0..d {
                    v[j] = maps[i].a[j] as f64 + lam[j] * v[j];
                }
                w *= maps[i].p;
            }
            let rest = len - prefix.len();
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            dfs(maps, lam, rest, &mut v, w, &mut coords, &mut weights, &scale);
            (coords, weights)
        })
        .collect();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (c, w) in chunks {
        coords.extend(c);
        weights.extend(w);
    }
    (coords, weights)
}

/// Canonical exact keys (all axes concatenated) for the words of
/// [`enumerate_points`], in the same order.
fn enumerate_exact_keys(spec: &SystemSpec, powers: Range<usize>) -> Result<Vec<Vec<BigInt>>> {
    let alphas = spec
        .alphas()
        .ok_or_else(|| Error::InvalidArgument("exact arithmetic needs minimal polynomials".into()))?;
    let tables: Vec<PowerTable> = alphas.iter().map(|a| PowerTable::new(a, powers.end)).collect();
    let width: usize = tables.iter().map(|t| t.degree()).sum();
    let maps = &spec.maps;
    let len = powers.end - powers.start;

    // letter at depth t (0 = outermost) sits at power end-1-t
    let add_letter = |key: &mut [BigInt], i: usize, power: usize| {
        let mut off = 0;
        for (j, t) in tables.iter().enumerate() {
            t.add_term(&mut key[off..off + t.degree()], maps[i].a[j], power);
            off += t.degree();
        }
    };

    fn dfs(
        letters: usize,
        power: usize,
        remaining: usize,
        key: &mut Vec<BigInt>,
        out: &mut Vec<Vec<BigInt>>,
        add: &dyn Fn(&mut [BigInt], usize, usize),
    ) {
        if remaining == 0 {
            out.push(key.clone());
            return;
        }
        for i in 0..letters {
            let saved = key.clone();
            add(key, i, power - 1);
            dfs(letters, power - 1, remaining - 1, key, out, add);
            *key = saved;
        }
    }

    let chunks: Vec<Vec<Vec<BigInt>>> = prefixes(maps.len(), len)
        .par_iter()
        .map(|prefix| {
            let mut key = vec![BigInt::from(0); width];
            let mut power = powers.end;
            for &i in prefix {
                power -= 1;
                add_letter(&mut key, i, power);
            }
            let mut out = Vec::new();
            dfs(maps.len(), power, len - prefix.len(), &mut key, &mut out, &add_letter);
            out
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

fn build_range(spec: &SystemSpec, powers: Range<usize>, arithmetic: Arithmetic, budget: u128) -> Result<DiscreteMeasure> {
    let len = powers.end - powers.start;
    spec.check_budget(len, budget)?;
    let d = spec.dim();
    let (coords, weights) = enumerate_points(spec, powers.clone());
    match arithmetic {
        Arithmetic::Float => DiscreteMeasure::from_flat(d, coords, weights, MergePolicy::Exact),
        Arithmetic::Exact => {
            let keys = enumerate_exact_keys(spec, powers)?;
            // each class is placed at the float position of its first word
            let mut groups: HashMap<&[BigInt], (usize, Vec<f64>)> = HashMap::new();
            for (idx, k) in keys.iter().enumerate() {
                groups
                    .entry(k.as_slice())
                    .or_insert_with(|| (idx, Vec::new()))
                    .1
                    .push(weights[idx]);
            }
            let mut reps: Vec<(usize, f64)> = groups
                .into_values()
                .map(|(idx, ws)| (idx, compensated_sum(ws)))
                .collect();
            reps.sort_by_key(|r| r.0);
            let mut out_c = Vec::with_capacity(reps.len() * d);
            let mut out_w = Vec::with_capacity(reps.len());
            for (idx, w) in reps {
                out_c.extend_from_slice(&coords[idx * d..(idx + 1) * d]);
                out_w.push(w);
            }
            DiscreteMeasure::from_flat(d, out_c, out_w, MergePolicy::Exact)
        }
    }
}

/// `μ^(n) = Σ_{|u| = n} p_u δ_{φ_u(0)}`, merged with the system's default
/// arithmetic.
pub fn build_level_n(spec: &SystemSpec, n: usize) -> Result<DiscreteMeasure> {
    build_level_n_with(spec, n, default_arithmetic(spec), DEFAULT_WORD_BUDGET)
}

pub fn build_level_n_with(spec: &SystemSpec, n: usize, arithmetic: Arithmetic, budget: u128) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    build_range(spec, 0..n, arithmetic, budget)
}

/// Law of `Σ_{k=a}^{b-1} a_{ξ_k} λ^k`.
pub fn build_factor(spec: &SystemSpec, a: usize, b: usize) -> Result<DiscreteMeasure> {
    build_factor_with(spec, a, b, default_arithmetic(spec), DEFAULT_WORD_BUDGET)
}

pub fn build_factor_with(
    spec: &SystemSpec,
    a: usize,
    b: usize,
    arithmetic: Arithmetic,
    budget: u128,
) -> Result<DiscreteMeasure> {
    if b <= a {
        return Err(Error::InvalidArgument(format!("empty factor range [{a}, {b})")));
    }
    build_range(spec, a..b, arithmetic, budget)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub m: usize,
    pub dim_l: f64,
    pub gamma: f64,
    /// `j + (H(p) − χ_1 − … − χ_j)/χ_{j+1}` for `j < d`.
    pub partial_bounds: Vec<f64>,
}

pub fn lyapunov_dimension(spec: &SystemSpec) -> LyapunovReport {
    let chi = spec.chi();
    let h = spec.entropy_p();
    let d = chi.len();
    let mut prefix = vec![0.0; d + 1];
    for j in 0..d {
        prefix[j + 1] = prefix[j] + chi[j];
    }
    let m = (0..=d).rev().find(|&j| prefix[j] <= h).unwrap_or(0);
    let dim_l = if m < d {
        m as f64 + (h - prefix[m]) / chi[m]
    } else {
        d as f64 * h / prefix[d]
    };
    let partial_bounds = (0..d).map(|j| j as f64 + (h - prefix[j]) / chi[j]).collect();
    LyapunovReport {
        m,
        dim_l,
        gamma: dim_l.min(d as f64),
        partial_bounds,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaReport {
    pub n: usize,
    pub entropy_bits: f64,
    pub kappa: f64,
    /// `(1/n) H(μ^(n+5), E_n)`, when within budget.
    pub kappa_stability: Option<f64>,
    pub arithmetic: Arithmetic,
    pub degenerate: bool,
}

/// `(1/n) H(μ^(n), E_n)`.
pub fn kappa_estimate(spec: &SystemSpec, n: usize) -> Result<KappaReport> {
    kappa_estimate_with(spec, n, DEFAULT_WORD_BUDGET)
}

pub fn kappa_estimate_with(spec: &SystemSpec, n: usize, budget: u128) -> Result<KappaReport> {
    let arithmetic = default_arithmetic(spec);
    let mu = build_level_n_with(spec, n, arithmetic, budget)?;
    let en = Keying::en(n as i64, spec.lambda())?;
    let entropy_bits = partition_entropy(&mu, &en)?;
    let kappa_stability = match build_level_n_with(spec, n + 5, arithmetic, budget) {
        Ok(mu2) => Some(partition_entropy(&mu2, &en)? / n as f64),
        Err(e) if e.is_budget() => None,
        Err(e) => return Err(e),
    };
    let degenerate = n == 1;
    if degenerate {
        log::warn!("kappa estimate at n = 1 only reflects a single level");
    }
    Ok(KappaReport {
        n,
        entropy_bits,
        kappa: entropy_bits / n as f64,
        kappa_stability,
        arithmetic,
        degenerate,
    })
}

/// Inverts `κ = χ_d dim − Σ_{j<d} (χ_d − χ_j)`, clamped to `[0, d]`.
///
/// This is a dimension estimate only when the projection of the measure to
/// the first `d - 1` coordinates has full dimension.
pub fn dim_from_kappa(kappa: f64, lambda: &ScaleVector) -> f64 {
    let chi = lambda.chi();
    let d = chi.len();
    let cd = chi[d - 1];
    let shift: f64 = chi[..d - 1].iter().map(|c| cd - c).sum();
    ((kappa + shift) / cd).clamp(0.0, d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimReport {
    pub n: usize,
    pub entropy_bits: f64,
    pub kappa_est: f64,
    pub dim_est: f64,
    pub lyapunov_dim: f64,
    pub gamma: f64,
}

pub fn dim_report(spec: &SystemSpec, n: usize, budget: u128) -> Result<DimReport> {
    let k = kappa_estimate_with(spec, n, budget)?;
    let l = lyapunov_dimension(spec);
    Ok(DimReport {
        n,
        entropy_bits: k.entropy_bits,
        kappa_est: k.kappa,
        dim_est: dim_from_kappa(k.kappa, spec.lambda()),
        lyapunov_dim: l.dim_l,
        gamma: l.gamma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RwEntropyReport {
    pub n: usize,
    pub value: f64,
    pub arithmetic: Arithmetic,
    pub words: u128,
    pub distinct_maps: usize,
    /// Float mode only sees bit-identical collisions, so absence of one is
    /// not evidence of no exact overlap.
    pub note: &'static str,
}

/// `(1/n) H(Σ_{|u| = n} p_u δ_{φ_u})`, an upper bound for the random-walk
/// entropy. Maps are identified when their translation parts agree.
pub fn rw_entropy_upper(spec: &SystemSpec, n: usize, arithmetic: Arithmetic) -> Result<RwEntropyReport> {
    rw_entropy_upper_with(spec, n, arithmetic, DEFAULT_WORD_BUDGET)
}

pub fn rw_entropy_upper_with(
    spec: &SystemSpec,
    n: usize,
    arithmetic: Arithmetic,
    budget: u128,
) -> Result<RwEntropyReport> {
    let mu = build_level_n_with(spec, n, arithmetic, budget)?;
    let h = entropy_of_masses(mu.weights());
    let words = spec.word_count(n);
    let collided = (mu.len() as u128) < words;
    let note = match (arithmetic, collided) {
        (Arithmetic::Exact, true) => "exact overlap",
        (Arithmetic::Exact, false) => "no exact overlap",
        (Arithmetic::Float, true) => "bit-identical collision",
        (Arithmetic::Float, false) => "no collision detected",
    };
    Ok(RwEntropyReport {
        n,
        value: h / n as f64,
        arithmetic,
        words,
        distinct_maps: mu.len(),
        note,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapReport {
    pub n_max: usize,
    /// First depth with a collision in the one-dimensional system on axis `j`.
    pub per_axis: Vec<Option<usize>>,
    /// First depth with a collision in every coordinate at once.
    pub system: Option<usize>,
}

/// Smallest `n` with two distinct words of length `n` inducing the same map,
/// decided by exact reduction modulo the minimal polynomials.
pub fn exact_overlap_depth(spec: &SystemSpec, n_max: usize) -> Result<OverlapReport> {
    exact_overlap_depth_with(spec, n_max, DEFAULT_WORD_BUDGET)
}

pub fn exact_overlap_depth_with(spec: &SystemSpec, n_max: usize, budget: u128) -> Result<OverlapReport> {
    let alphas = spec
        .alphas()
        .ok_or_else(|| Error::InvalidArgument("exact overlap detection needs minimal polynomials".into()))?;
    let d = spec.dim();
    let tables: Vec<PowerTable> = alphas.iter().map(|a| PowerTable::new(a, n_max.max(1))).collect();
    let mut per_axis: Vec<Option<usize>> = vec![None; d];
    let mut system = None;
    // keys[w][j]: axis-j reduced translation of word w
    let mut keys: Vec<Vec<Vec<BigInt>>> = vec![tables.iter().map(|t| vec![BigInt::from(0); t.degree()]).collect()];
    for n in 1..=n_max {
        spec.check_budget(n, budget)?;
        let mut next = Vec::with_capacity(keys.len() * spec.maps.len());
        for k in &keys {
            for m in &spec.maps {
                let mut k2 = k.clone();
                for (j, t) in tables.iter().enumerate() {
                    t.add_term(&mut k2[j], m.a[j], n - 1);
                }
                next.push(k2);
            }
        }
        keys = next;
        for j in 0..d {
            if per_axis[j].is_none() {
                let mut seen = std::collections::HashSet::with_capacity(keys.len());
                if !keys.iter().all(|k| seen.insert(&k[j])) {
                    per_axis[j] = Some(n);
                }
            }
        }
        if system.is_none() {
            let mut seen = std::collections::HashSet::with_capacity(keys.len());
            if !keys.iter().all(|k| seen.insert(k)) {
                system = Some(n);
            }
        }
        if system.is_some() && per_axis.iter().all(|p| p.is_some()) {
            break;
        }
    }
    Ok(OverlapReport { n_max, per_axis, system })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationRow {
    pub n: usize,
    /// `Δ_n`; set to 0 when an exact collision is proven at this depth.
    pub delta: f64,
    pub delta_float: f64,
    /// `Δ_n^{1/n}`.
    pub c_n: f64,
    /// Minimal gaps of the one-dimensional systems on each axis.
    pub per_axis: Vec<f64>,
    pub exact_collision: Option<bool>,
}

fn min_gap_1d(mut xs: Vec<f64>) -> f64 {
    xs.par_sort_unstable_by(f64::total_cmp);
    xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Minimal Euclidean distance between points (duplicates give 0), by a
/// sweep over the first coordinate.
fn min_gap(coords: &[f64], d: usize) -> f64 {
    let n = coords.len() / d;
    let mut order: Vec<usize> = (0..n).collect();
    order.par_sort_unstable_by(|&a, &b| coords[a * d].total_cmp(&coords[b * d]).then(a.cmp(&b)));
    let mut best = f64::INFINITY;
    for (i, &a) in order.iter().enumerate() {
        let pa = &coords[a * d..(a + 1) * d];
        for &b in &order[i + 1..] {
            let pb = &coords[b * d..(b + 1) * d];
            if pb[0] - pa[0] >= best {
                break;
            }
            best = best.min(euclidean(pa, pb));
        }
    }
    best
}

/// `Δ_n = min_{u ≠ v} |φ_u(0) − φ_v(0)|` for `n = 1..=n_max`.
pub fn separation_profile(spec: &SystemSpec, n_max: usize) -> Result<Vec<SeparationRow>> {
    separation_profile_with(spec, n_max, DEFAULT_WORD_BUDGET)
}

pub fn separation_profile_with(spec: &SystemSpec, n_max: usize, budget: u128) -> Result<Vec<SeparationRow>> {
    spec.check_budget(n_max, budget)?;
    if spec.maps.len() < 2 {
        return Err(Error::InvalidArgument("separation needs at least two maps".into()));
    }
    let d = spec.dim();
    let overlap = if spec.is_exact() {
        Some(exact_overlap_depth_with(spec, n_max, budget)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (coords, _) = enumerate_points(spec, 0..n);
        let delta_float = if d == 1 { min_gap_1d(coords.clone()) } else { min_gap(&coords, d) };
        let per_axis = (0..d)
            .map(|j| min_gap_1d(coords.iter().skip(j).step_by(d).copied().collect()))
            .collect();
        let exact_collision = overlap
            .as_ref()
            .map(|o| o.system.is_some_and(|depth| depth <= n));
        let delta = if exact_collision == Some(true) { 0.0 } else { delta_float };
        rows.push(SeparationRow {
            n,
            delta,
            delta_float,
            c_n: delta.powf(1.0 / n as f64),
            per_axis,
            exact_collision,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonSatRow {
    pub j: usize,
    pub n: i64,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonSatReport {
    pub eps: f64,
    pub m: i64,
    pub rows: Vec<NonSatRow>,
    /// Every entry is below `χ_j − ε`.
    pub non_saturated: bool,
}

/// `(1/m) H(μ, E_{n+m} | E_n ∨ π_{[d]∖{j}}^{-1} E_{n+m})` for each axis and
/// each `n` in the range.
pub fn non_saturation_profile(
    mu: &DiscreteMeasure,
    lambda: &ScaleVector,
    eps: f64,
    m: i64,
    n_range: Range<i64>,
) -> Result<NonSatReport> {
    if m < 1 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let d = lambda.dim();
    if mu.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: mu.dim(),
        });
    }
    let chi = lambda.chi();
    let jobs: Vec<(usize, i64)> = (0..d).flat_map(|j| n_range.clone().map(move |n| (j, n))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(j, n)| {
            let others: Vec<usize> = (0..d).filter(|&i| i != j).collect();
            let fine = Keying::en(n + m, lambda)?;
            let coarse = Keying::en_join_projected(n, m, &others, lambda)?;
            let value = conditional_entropy(mu, &fine, &coarse)? / m as f64;
            Ok(NonSatRow {
                j,
                n,
                value,
                threshold: chi[j] - eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let non_saturated = rows.iter().all(|r| r.value < r.threshold);
    Ok(NonSatReport {
        eps,
        m,
        rows,
        non_saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Transform;

    fn bern(l: f64) -> SystemSpec {
        SystemSpec::bernoulli(ScaleVector::new(vec![l]).unwrap()).unwrap()
    }

    fn golden() -> SystemSpec {
        bern(0.6180339887)
            .with_minpolys(&[IntPolynomial::from_i64(&[-1, 1, 1])])
            .unwrap()
    }

    fn third() -> SystemSpec {
        bern(1.0 / 3.0)
            .with_minpolys(&[IntPolynomial::from_i64(&[-1, 3])])
            .unwrap()
    }

    #[test]
    fn half_level_two() {
        let mu = build_level_n(&bern(0.5), 2).unwrap();
        let pts: Vec<f64> = mu.atoms().map(|(p, _)| p[0]).collect();
        assert_eq!(pts, vec![-1.5, -0.5, 0.5, 1.5]);
        assert!(mu.weights().iter().all(|&w| w == 0.25));
        assert_eq!(entropy_of_masses(mu.weights()), 2.0);
    }

    #[test]
    fn golden_level_three_exact() {
        let mu = build_level_n(&golden(), 3).unwrap();
        assert_eq!(mu.len(), 7);
        let zero = mu
            .atoms()
            .find(|(p, _)| p[0].abs() < 1e-9)
            .map(|(_, w)| w)
            .unwrap();
        assert_eq!(zero, 0.25);
        assert_eq!(entropy_of_masses(mu.weights()), 2.75);
        let float = build_level_n_with(&golden(), 3, Arithmetic::Float, DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(float.len(), 8);
    }

    #[test]
    fn level_one_is_translations() {
        let spec = SystemSpec::new(
            ScaleVector::new(vec![0.4]).unwrap(),
            vec![
                MapSpec { a: vec![0], p: 0.2 },
                MapSpec { a: vec![3], p: 0.8 },
            ],
        )
        .unwrap();
        let mu = build_level_n(&spec, 1).unwrap();
        let atoms: Vec<(f64, f64)> = mu.atoms().map(|(p, w)| (p[0], w)).collect();
        assert_eq!(atoms, vec![(0.0, 0.2), (3.0, 0.8)]);
    }

    #[test]
    fn factors() {
        let spec = bern(0.5);
        assert_eq!(build_factor(&spec, 0, 5).unwrap(), build_level_n(&spec, 5).unwrap());
        let f = build_factor(&spec, 1, 2).unwrap();
        let atoms: Vec<(f64, f64)> = f.atoms().map(|(p, w)| (p[0], w)).collect();
        assert_eq!(atoms, vec![(-0.5, 0.5), (0.5, 0.5)]);
        assert!(build_factor(&spec, 2, 2).is_err());
    }

    #[test]
    fn factor_shift_and_convolution() {
        let spec = SystemSpec::bernoulli(ScaleVector::new(vec![0.7, 0.4]).unwrap()).unwrap();
        let lam = spec.lambda().clone();
        let base = build_factor(&spec, 1, 4).unwrap();
        let shifted = build_factor(&spec, 3, 6).unwrap();
        let pushed = base.pushforward(&Transform::Scale(lam.powi(2))).unwrap();
        assert_eq!(shifted.len(), pushed.len());
        for ((p, w), (q, v)) in shifted.atoms().zip(pushed.atoms()) {
            assert!((w - v).abs() < 1e-12);
            for (a, b) in p.iter().zip(q) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let half = bern(0.5);
        let conv = build_factor(&half, 0, 2)
            .unwrap()
            .convolve(&build_factor(&half, 2, 5).unwrap())
            .unwrap();
        assert_eq!(conv, build_level_n(&half, 5).unwrap());
    }

    #[test]
    fn budget_refused() {
        let err = build_level_n_with(&bern(0.5), 10, Arithmetic::Float, 100).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn lyapunov_examples() {
        let l = lyapunov_dimension(&SystemSpec::bernoulli(ScaleVector::new(vec![0.8, 0.3]).unwrap()).unwrap());
        assert_eq!(l.m, 1);
        assert!((l.dim_l - 1.3904).abs() < 1e-4);
        let l = lyapunov_dimension(&SystemSpec::bernoulli(ScaleVector::new(vec![0.9, 0.8]).unwrap()).unwrap());
        assert_eq!(l.m, 2);
        assert!((l.dim_l - 4.22002).abs() < 1e-4);
        assert_eq!(l.gamma, 2.0);
        let l = lyapunov_dimension(&bern(0.5));
        assert_eq!(l.dim_l, 1.0);
    }

    #[test]
    fn kappa_third() {
        let k = kappa_estimate(&bern(1.0 / 3.0), 12).unwrap();
        assert!((0.98..=1.0).contains(&k.kappa), "{}", k.kappa);
        let dim = dim_from_kappa(k.kappa, &ScaleVector::new(vec![1.0 / 3.0]).unwrap());
        assert!((0.618..=0.634).contains(&dim), "{dim}");
        assert!(k.kappa_stability.is_some());
    }

    #[test]
    fn kappa_golden_below_one() {
        let k = kappa_estimate(&golden(), 12).unwrap();
        assert!(k.kappa < 1.0);
        assert!(kappa_estimate(&bern(0.5), 1).unwrap().degenerate);
    }

    #[test]
    fn dim_from_kappa_cases() {
        let third = ScaleVector::new(vec![1.0 / 3.0]).unwrap();
        assert!((dim_from_kappa(1.0, &third) - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert_eq!(dim_from_kappa(0.0, &third), 0.0);
        let lam = ScaleVector::new(vec![0.7, 0.2]).unwrap();
        let chi = lam.chi();
        let full = chi[1] * 2.0 - (chi[1] - chi[0]);
        assert!((dim_from_kappa(full, &lam) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rw_entropy_examples() {
        let r = rw_entropy_upper(&golden(), 3, Arithmetic::Exact).unwrap();
        assert!((r.value - 2.75 / 3.0).abs() < 1e-15);
        assert_eq!(r.note, "exact overlap");
        let r = rw_entropy_upper(&golden(), 1, Arithmetic::Exact).unwrap();
        assert_eq!(r.value, 1.0);
        for n in [1, 5, 12] {
            let r = rw_entropy_upper(&third(), n, Arithmetic::Exact).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
        }
        let r = rw_entropy_upper(&golden(), 3, Arithmetic::Float).unwrap();
        assert_eq!(r.note, "no collision detected");
    }

    #[test]
    fn overlap_depths() {
        let o = exact_overlap_depth(&golden(), 4).unwrap();
        assert_eq!(o.system, Some(3));
        assert_eq!(o.per_axis, vec![Some(3)]);
        let o = exact_overlap_depth(&third(), 12).unwrap();
        assert_eq!(o.system, None);
        assert_eq!(exact_overlap_depth(&golden(), 1).unwrap().system, None);
        assert!(exact_overlap_depth(&bern(0.5), 3).is_err());
    }

    #[test]
    fn separation_third() {
        let rows = separation_profile(&bern(1.0 / 3.0), 8).unwrap();
        assert_eq!(rows[0].delta, 2.0);
        for r in &rows {
            let expected = 2.0 * 3f64.powi(-(r.n as i32 - 1));
            assert!((r.delta - expected).abs() < 1e-12 * expected, "n={}", r.n);
            assert!(r.delta >= 3f64.powi(-(r.n as i32)));
        }
    }

    #[test]
    fn separation_golden() {
        let rows = separation_profile(&golden(), 4).unwrap();
        assert!(rows[1].delta > 0.0);
        assert_eq!(rows[2].delta, 0.0);
        assert!(rows[2].delta_float < 1e-9);
        assert_eq!(rows[2].exact_collision, Some(true));
    }

    #[test]
    fn separation_two_dims() {
        let spec = SystemSpec::bernoulli(ScaleVector::new(vec![0.5, 0.25]).unwrap()).unwrap();
        let rows = separation_profile(&spec, 3).unwrap();
        // nearest words differ only in the last letter
        let expected = 2.0 * (0.25f64 * 0.25 + 0.0625 * 0.0625).sqrt();
        assert!((rows[2].delta - expected).abs() < 1e-12, "{}", rows[2].delta);
        assert_eq!(rows[2].per_axis.len(), 2);
    }

    #[test]
    fn nonsat_dirac_and_axis() {
        let lam = ScaleVector::new(vec![0.5]).unwrap();
        let r = non_saturation_profile(&DiscreteMeasure::dirac(&[0.0]), &lam, 0.1, 4, 0..6).unwrap();
        assert!(r.rows.iter().all(|row| row.value == 0.0));
        assert!(r.non_saturated);

        let lam2 = ScaleVector::new(vec![0.5, 0.25]).unwrap();
        let mu = DiscreteMeasure::from_atoms(
            (0..64).map(|k| (vec![k as f64 / 64.0, 0.0], 1.0 / 64.0)),
            MergePolicy::Exact,
        )
        .unwrap();
        let r = non_saturation_profile(&mu, &lam2, 0.1, 2, 0..4).unwrap();
        assert!(r.rows.iter().filter(|row| row.j == 1).all(|row| row.value == 0.0));
        assert!(r.rows.iter().any(|row| row.j == 0 && row.value > 0.0));
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let spec = SystemSpec::from_json_str(
            r#"{"lambda":[0.6180339887],"maps":[{"a":[-1],"p":0.5},{"a":[1],"p":0.5}],"minpolys":[[-1,1,1]]}"#,
        )
        .unwrap();
        assert!(spec.is_exact());
        assert_eq!(spec.l0(), 2);
        assert_eq!(spec.entropy_p(), 1.0);
        let err = SystemSpec::from_json_str(
            r#"{"lambda":[0.3,0.5],"maps":[{"a":[0,0],"p":0.5},{"a":[1,1],"p":0.5}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("lambda must be strictly decreasing"));
        let err = SystemSpec::from_json_str(r#"{"lambda":[0.5],"maps":[{"a":[0],"p":0.6},{"a":[1],"p":0.6}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("p must sum to 1"));
        let err = SystemSpec::from_json_str(r#"{"lambda":[0.5],"maps":[{"a":[0.5],"p":1.0}]}"#).unwrap_err();
        assert!(err.to_string().contains("maps[0].a[0]"));
        let err = SystemSpec::from_json_str(r#"{"lambda":[0.5],"maps":[{"a":[0],"p":1.0}],"minpolys":[[-1,1,1]]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("minpolys[0]"));
    }
}
