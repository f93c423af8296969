//! Finitely supported measures on `R^d`.
//!
//! Atoms are kept sorted by lexicographic point order, so every reduction
//! over atoms runs in a canonical order and results do not depend on how a
//! measure was assembled.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scales::ScaleVector;
use crate::util::compensated_sum;

/// How atoms with (nearly) equal points are identified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MergePolicy {
    /// Coordinates must be bit-identical (after normalising `-0.0`).
    #[default]
    Exact,
    /// Coordinates are keyed by `round(x · 2^40)`.
    Quantized,
}

const QUANT_SCALE: f64 = (1u64 << 40) as f64;

impl MergePolicy {
    fn same(self, a: &[f64], b: &[f64]) -> bool {
        match self {
            MergePolicy::Exact => a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            MergePolicy::Quantized => a
                .iter()
                .zip(b)
                .all(|(x, y)| (x * QUANT_SCALE).round() == (y * QUANT_SCALE).round()),
        }
    }

    fn cmp(self, a: &[f64], b: &[f64]) -> Ordering {
        match self {
            MergePolicy::Exact => lex_cmp(a, b),
            MergePolicy::Quantized => {
                for (x, y) in a.iter().zip(b) {
                    let o = (x * QUANT_SCALE).round().total_cmp(&(y * QUANT_SCALE).round());
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                lex_cmp(a, b)
            }
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.total_cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// A finitely supported nonnegative measure on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
    policy: MergePolicy,
}

/// A map acting on points.
#[derive(Clone, Debug)]
pub enum Transform {
    /// `S_r(x) = r x`.
    Scale(ScaleVector),
    /// `T_x(y) = x + y`.
    Translate(Vec<f64>),
    /// `π_J`, with zero-based indices in increasing order. The image lives in `R^{|J|}`.
    Project(Vec<usize>),
}

impl DiscreteMeasure {
    pub fn from_atoms<I, P>(atoms: I, policy: MergePolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (P, f64)>,
        P: AsRef<[f64]>,
    {
        let mut dim = None;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (p, w) in atoms {
            let p = p.as_ref();
            match dim {
                None => dim = Some(p.len()),
                Some(d) if d != p.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: p.len(),
                    })
                }
                _ => {}
            }
            coords.extend_from_slice(p);
            weights.push(w);
        }
        Self::from_flat(dim.unwrap_or(0), coords, weights, policy)
    }

    /// Builds a measure from a flat coordinate buffer (`d` values per atom).
    pub fn from_flat(
        dim: usize,
        mut coords: Vec<f64>,
        weights: Vec<f64>,
        policy: MergePolicy,
    ) -> Result<Self> {
        if coords.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                found: coords.len(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::NegativeWeight(w));
        }
        if let Some(&x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coordinate {x}")));
        }
        for c in coords.iter_mut() {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        Ok(Self::canonicalize(dim, &coords, &weights, policy))
    }

    fn canonicalize(dim: usize, coords: &[f64], weights: &[f64], policy: MergePolicy) -> Self {
        let point = |i: usize| &coords[i * dim..(i + 1) * dim];
        let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        order.par_sort_by(|&a, &b| {
            policy
                .cmp(point(a), point(b))
                .then_with(|| weights[a].total_cmp(&weights[b]))
        });

        let mut out_coords = Vec::with_capacity(order.len() * dim);
        let mut out_weights = Vec::with_capacity(order.len());
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && policy.same(point(order[start]), point(order[end])) {
                end += 1;
            }
            let w = compensated_sum(order[start..end].iter().map(|&i| weights[i]));
            if w > 0.0 {
                out_coords.extend_from_slice(point(order[start]));
                out_weights.push(w);
            }
            start = end;
        }
        let mass = compensated_sum(out_weights.iter().copied());
        DiscreteMeasure {
            dim,
            coords: out_coords,
            weights: out_weights,
            mass,
            policy,
        }
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self::from_atoms([(point, 1.0)], MergePolicy::Exact).expect("valid atom")
    }

    /// `½(δ_x + δ_y)`.
    pub fn bernoulli_pair(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::from_atoms([(x, 0.5), (y, 0.5)], MergePolicy::Exact)
    }

    /// The zero measure in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        DiscreteMeasure {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
            mass: 0.0,
            policy: MergePolicy::Exact,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn policy(&self) -> MergePolicy {
        self.policy
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.point(i), self.weights[i]))
    }

    /// Same atoms with weights multiplied by `c > 0`.
    pub fn scaled_mass(&self, c: f64) -> Self {
        let weights: Vec<f64> = self.weights.iter().map(|w| w * c).collect();
        Self::canonicalize(self.dim, &self.coords, &weights, self.policy)
    }

    /// Probability measure `μ / ‖μ‖`.
    pub fn normalized(&self) -> Result<Self> {
        if self.mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled_mass(1.0 / self.mass))
    }

    /// Sum of two measures on the same space.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Ok(Self::canonicalize(self.dim, &coords, &weights, self.policy))
    }

    /// Restriction to the atoms satisfying `keep`.
    pub fn restrict<F: Fn(&[f64]) -> bool>(&self, keep: F) -> Self {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (p, w) in self.atoms() {
            if keep(p) {
                coords.extend_from_slice(p);
                weights.push(w);
            }
        }
        let mass = compensated_sum(weights.iter().copied());
        DiscreteMeasure {
            dim: self.dim,
            coords,
            weights,
            mass,
            policy: self.policy,
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// `μ * ν`: atoms `x + y` with weights `w_x w_y`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let d = self.dim;
        let n = self.len() * other.len();
        let mut coords = Vec::with_capacity(n * d);
        let mut weights = Vec::with_capacity(n);
        for (x, wx) in self.atoms() {
            for (y, wy) in other.atoms() {
                coords.extend(x.iter().zip(y).map(|(a, b)| a + b));
                weights.push(wx * wy);
            }
        }
        Ok(Self::canonicalize(d, &coords, &weights, self.policy))
    }

    /// `μ^{*k}` by repeated squaring.
    pub fn convolution_power(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("convolution power must be ≥ 1".into()));
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve(&base)?,
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.convolve(&base)?;
            }
        }
        Ok(result.expect("k ≥ 1"))
    }

    pub fn pushforward(&self, t: &Transform) -> Result<Self> {
        let d = self.dim;
        match t {
            Transform::Scale(r) => {
                if r.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: r.dim(),
                    });
                }
                let coords: Vec<f64> = self
                    .coords
                    .chunks_exact(d.max(1))
                    .flat_map(|p| r.apply(p))
                    .collect();
                Self::rebuild(d, coords, &self.weights, self.policy)
            }
            Transform::Translate(x) => {
                if x.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: x.len(),
                    });
                }
                let coords: Vec<f64> = self
                    .coords
                    .chunks_exact(d.max(1))
                    .flat_map(|p| p.iter().zip(x).map(|(a, b)| a + b).collect::<Vec<_>>())
                    .collect();
                Self::rebuild(d, coords, &self.weights, self.policy)
            }
            Transform::Project(idx) => {
                if idx.windows(2).any(|w| w[0] >= w[1]) || idx.iter().any(|&j| j >= d) {
                    return Err(Error::InvalidArgument(format!(
                        "projection indices {idx:?} must be increasing and < {d}"
                    )));
                }
                let mut coords = Vec::with_capacity(self.len() * idx.len());
                for p in (0..self.len()).map(|i| self.point(i)) {
                    coords.extend(idx.iter().map(|&j| p[j]));
                }
                Self::rebuild(idx.len(), coords, &self.weights, self.policy)
            }
        }
    }

    fn rebuild(dim: usize, mut coords: Vec<f64>, weights: &[f64], policy: MergePolicy) -> Result<Self> {
        for c in coords.iter_mut() {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        Ok(Self::canonicalize(dim, &coords, weights, policy))
    }

    /// Mean of the `j`-th coordinate under the normalised measure.
    pub fn mean(&self, j: usize) -> f64 {
        compensated_sum(self.atoms().map(|(p, w)| p[j] * w)) / self.mass
    }

    /// Variance of the `j`-th coordinate under the normalised measure.
    pub fn variance(&self, j: usize) -> f64 {
        let m = self.mean(j);
        compensated_sum(self.atoms().map(|(p, w)| (p[j] - m) * (p[j] - m) * w)) / self.mass
    }

    /// Largest Euclidean distance between two atoms.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for k in i + 1..self.len() {
                best = best.max(euclidean(self.point(i), self.point(k)));
            }
        }
        best
    }

    /// Reads the atom-list CSV format: header `x1,…,xd,w`, one atom per row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 1 || headers.get(cols - 1) != Some("w") {
            return Err(Error::InvalidArgument(
                "measure CSV header must be x1,...,xd,w".into(),
            ));
        }
        for (j, h) in headers.iter().take(cols - 1).enumerate() {
            if h != format!("x{}", j + 1) {
                return Err(Error::InvalidArgument(format!(
                    "measure CSV column {} must be named x{}, found {h:?}",
                    j + 1,
                    j + 1
                )));
            }
        }
        let dim = cols - 1;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: rec.len(),
                });
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidArgument(format!("row {}: cannot parse {field:?}", row + 2))
                })?;
                if j + 1 == cols {
                    weights.push(v);
                } else {
                    coords.push(v);
                }
            }
        }
        Self::from_flat(dim, coords, weights, MergePolicy::Exact)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("w".into());
        wtr.write_record(&header)?;
        for (p, w) in self.atoms() {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            row.push(format!("{w:?}"));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `ζ^{*k}` for `ζ = ½(δ_x + δ_y)`, built directly from the binomial row:
/// atoms `k x + i (y - x)` with weights `C(k, i) / 2^k`.
pub fn bernoulli_power(x: &[f64], y: &[f64], k: u32) -> Result<DiscreteMeasure> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be ≥ 1".into()));
    }
    if x == y {
        return Err(Error::InvalidArgument("x and y must differ".into()));
    }
    let d = x.len();
    let kf = k as f64;
    let diff: Vec<f64> = y.iter().zip(x).map(|(b, a)| b - a).collect();
    let mut coords = Vec::with_capacity((k as usize + 1) * d);
    for i in 0..=k {
        let fi = i as f64;
        coords.extend(x.iter().zip(&diff).map(|(a, dv)| kf * a + fi * dv));
    }
    // Binomial row relative to the central term via ratio recurrences, then
    // normalised; keeps relative error near k·ε instead of exponent overflow.
    let mode = k / 2;
    let mut weights = vec![0.0f64; k as usize + 1];
    weights[mode as usize] = 1.0;
    for i in mode..k {
        weights[i as usize + 1] = weights[i as usize] * ((k - i) as f64) / ((i + 1) as f64);
    }
    for i in (1..=mode).rev() {
        weights[i as usize - 1] = weights[i as usize] * (i as f64) / ((k - i + 1) as f64);
    }
    let total = compensated_sum(weights.iter().copied());
    for w in weights.iter_mut() {
        *w /= total;
    }
    DiscreteMeasure::from_flat(d, coords, weights, MergePolicy::Exact)
}
