//! Splitting a discrete measure into a residual plus Bernoulli pairs
//! `ζ_i = m_i/2 (δ_{x_i} + δ_{y_i})`, and the entropy-increase experiments
//! built on it.

use std::collections::VecDeque;

use serde::Serialize;

use crate::entropy::{avg_cond_entropy, conditional_entropy, EntropyReport, Keying, QuadMethod, QuadratureSpec};
use crate::error::{Error, Result};
use crate::measures::{bernoulli_power, euclidean, DiscreteMeasure};
use crate::scales::{s_sequence, ScaleVector};

/// Above this many atoms the pairing is computed greedily.
pub const MAX_FLOW_ATOM_LIMIT: usize = 10_000;
/// Above this many admissible pairs the pairing is computed greedily.
pub const MAX_FLOW_EDGE_LIMIT: usize = 4_000_000;

const FLOW_EPS: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mass: f64,
    /// `|s_{n+2N}^{-1}(x − y)|`.
    pub rescaled_distance: f64,
    /// `|s_n^{-1}(x − y)|`.
    pub scaled_distance: f64,
    pub in_eps_window: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMethod {
    MaxFlow,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    #[serde(skip)]
    pub theta: DiscreteMeasure,
    pub theta_mass: f64,
    pub pairs: Vec<Pair>,
    pub scale_n: usize,
    pub big_n: usize,
    pub paired_mass: f64,
    /// Admissible rescaled distances `[1/6, R]` with `R = 2|λ^{-3N}|`.
    pub window: (f64, f64),
    pub eps: f64,
    pub eps_window_violations: usize,
    pub method: PairingMethod,
    /// Upper bound on the optimal paired mass minus the achieved one; 0 for
    /// the max-flow solver.
    pub optimality_gap: f64,
}

struct Dinic {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
    next: Vec<usize>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            head: vec![NONE; n],
            to: Vec::new(),
            cap: Vec::new(),
            next: Vec::new(),
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) -> usize {
        let id = self.to.len();
        for (a, b, cc) in [(u, v, c), (v, u, 0.0)] {
            self.to.push(b);
            self.cap.push(cc);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
        id
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let mut e = self.head[u];
            while e != NONE {
                let v = self.to[e];
                if self.cap[e] > FLOW_EPS && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
                e = self.next[e];
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, f: f64) -> f64 {
        if u == t {
            return f;
        }
        while self.iter[u] != NONE {
            let e = self.iter[u];
            let v = self.to[e];
            if self.cap[e] > FLOW_EPS && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, f.min(self.cap[e]));
                if d > FLOW_EPS {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            self.iter[u] = self.next[e];
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while self.bfs(s, t) {
            self.iter.clone_from(&self.head);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= FLOW_EPS {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Flow pushed along edge `id`.
    fn flow(&self, id: usize) -> f64 {
        self.cap[id ^ 1]
    }
}

/// Maximum fractional pairing of atoms with weights `w` along `edges`:
/// returns the mass `m_e` assigned to each edge (each endpoint gives `m_e/2`).
///
/// Solved as max-flow on the bipartite double cover: source → `L_v`
/// (capacity `w_v`), `L_u → R_v` for each admissible pair in both
/// directions, `R_v` → sink (capacity `w_v`).
pub fn max_fractional_pairing(weights: &[f64], edges: &[(usize, usize)]) -> Vec<f64> {
    let n = weights.len();
    let (s, t) = (2 * n, 2 * n + 1);
    let mut g = Dinic::new(2 * n + 2);
    for (v, &w) in weights.iter().enumerate() {
        g.add_edge(s, v, w);
        g.add_edge(n + v, t, w);
    }
    let ids: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(u, v)| (g.add_edge(u, n + v, f64::INFINITY), g.add_edge(v, n + u, f64::INFINITY)))
        .collect();
    g.max_flow(s, t);
    ids.iter().map(|&(a, b)| g.flow(a) + g.flow(b)).collect()
}

fn scaled_norm(x: &[f64], y: &[f64], s: &ScaleVector) -> f64 {
    x.iter()
        .zip(y)
        .zip(s.entries())
        .map(|((a, b), r)| ((a - b) / r).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Admissible pairs `(u, v)`, `u < v`, by a sweep over the first rescaled
/// coordinate.
fn admissible_edges(points: &[Vec<f64>], lo: f64, hi: f64, limit: usize) -> Option<Vec<(usize, usize)>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let mut edges = Vec::new();
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if points[b][0] - points[a][0] > hi {
                break;
            }
            let dist = euclidean(&points[a], &points[b]);
            if dist >= lo && dist <= hi {
                edges.push((a.min(b), a.max(b)));
                if edges.len() > limit {
                    return None;
                }
            }
        }
    }
    edges.sort_unstable();
    Some(edges)
}

/// Greedy pairing: each atom in order is matched with admissible atoms in
/// order of distance while both have mass left.
fn greedy_pairing(points: &[Vec<f64>], weights: &[f64], lo: f64, hi: f64) -> (Vec<(usize, usize)>, Vec<f64>, f64) {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let mut pos = vec![0; n];
    for (i, &a) in order.iter().enumerate() {
        pos[a] = i;
    }
    let mut left: Vec<f64> = weights.to_vec();
    let mut edges = Vec::new();
    let mut masses = Vec::new();
    let mut has_neighbor = vec![false; n];
    for i in 0..n {
        let a = order[i];
        let mut cands: Vec<(f64, usize)> = Vec::new();
        for dir in [-1isize, 1] {
            let mut k = i as isize + dir;
            while k >= 0 && (k as usize) < n {
                let b = order[k as usize];
                if (points[b][0] - points[a][0]).abs() > hi {
                    break;
                }
                let dist = euclidean(&points[a], &points[b]);
                if dist >= lo && dist <= hi {
                    has_neighbor[a] = true;
                    if pos[b] > i {
                        cands.push((dist, b));
                    }
                }
                k += dir;
            }
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, b) in cands {
            if left[a] <= FLOW_EPS {
                break;
            }
            let take = left[a].min(left[b]);
            if take > FLOW_EPS {
                left[a] -= take;
                left[b] -= take;
                edges.push((a.min(b), a.max(b)));
                masses.push(2.0 * take);
            }
        }
    }
    let bound: f64 = weights
        .iter()
        .zip(&has_neighbor)
        .filter(|(_, &h)| h)
        .map(|(w, _)| w)
        .sum();
    (edges, masses, bound)
}

/// Decomposes `ν = θ + Σ ζ_i` with each `ζ_i` a Bernoulli pair whose
/// rescaled separation `|s_{n+2N}^{-1}(x_i − y_i)|` lies in `[1/6, R]`,
/// `R = 2|λ^{-3N}|`, maximising the paired mass.
pub fn bernoulli_decompose(
    nu: &DiscreteMeasure,
    lambda: &ScaleVector,
    n: usize,
    big_n: usize,
    eps: f64,
) -> Result<Decomposition> {
    if nu.dim() != lambda.dim() {
        return Err(Error::DimensionMismatch {
            expected: lambda.dim(),
            found: nu.dim(),
        });
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument("eps must lie in (0, 1]".into()));
    }
    let nu = nu.normalized()?;
    let seq = s_sequence(lambda, n + 2 * big_n)?;
    let s_fine = seq.term(n + 2 * big_n).clone();
    let s_n = seq.term(n).clone();
    let lo = 1.0 / 6.0;
    let hi = 2.0 * lambda.powi(-3 * big_n as i32).norm();

    let points: Vec<Vec<f64>> = nu
        .atoms()
        .map(|(p, _)| p.iter().zip(s_fine.entries()).map(|(x, s)| x / s).collect())
        .collect();
    let weights = nu.weights();

    let flow_edges = if nu.len() <= MAX_FLOW_ATOM_LIMIT {
        admissible_edges(&points, lo, hi, MAX_FLOW_EDGE_LIMIT)
    } else {
        None
    };
    let (edges, masses, method, gap) = match flow_edges {
        Some(edges) => {
            let masses = max_fractional_pairing(weights, &edges);
            (edges, masses, PairingMethod::MaxFlow, 0.0)
        }
        None => {
            let (edges, masses, bound) = greedy_pairing(&points, weights, lo, hi);
            let achieved: f64 = masses.iter().sum();
            (edges, masses, PairingMethod::Greedy, (bound.min(1.0) - achieved).max(0.0))
        }
    };

    let mut used = vec![0.0; weights.len()];
    let mut pairs = Vec::new();
    for (&(u, v), &m) in edges.iter().zip(&masses) {
        if m <= FLOW_EPS {
            continue;
        }
        used[u] += m / 2.0;
        used[v] += m / 2.0;
        let (x, y) = (nu.point(u), nu.point(v));
        let scaled = scaled_norm(x, y, &s_n);
        pairs.push(Pair {
            x: x.to_vec(),
            y: y.to_vec(),
            mass: m,
            rescaled_distance: euclidean(&points[u], &points[v]),
            scaled_distance: scaled,
            in_eps_window: scaled >= eps && scaled <= 1.0 / eps,
        });
    }
    let residual: Vec<f64> = weights
        .iter()
        .zip(&used)
        .map(|(w, u)| {
            let r = w - u;
            if r <= FLOW_EPS {
                0.0
            } else {
                r
            }
        })
        .collect();
    let theta = DiscreteMeasure::from_flat(nu.dim(), nu.coords().to_vec(), residual, nu.policy())?;
    let paired_mass = 1.0 - theta.mass();
    let eps_window_violations = pairs.iter().filter(|p| !p.in_eps_window).count();
    Ok(Decomposition {
        theta_mass: theta.mass(),
        theta,
        pairs,
        scale_n: n,
        big_n,
        paired_mass,
        window: (lo, hi),
        eps,
        eps_window_violations,
        method,
        optimality_gap: gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainReport {
    /// `H(ν*μ; λ^{t2} | λ^{t1}) − H(μ; λ^{t2} | λ^{t1})`.
    pub gain: f64,
    /// `H(ν; λ^{t2} | λ^{t1}) / (t2 − t1)`.
    pub beta: f64,
    pub method: QuadMethod,
    pub error_bound: f64,
}

fn combine(reports: &[&EntropyReport]) -> (QuadMethod, f64) {
    let method = if reports.iter().all(|r| r.method == QuadMethod::ExactBreakpoint) {
        QuadMethod::ExactBreakpoint
    } else {
        QuadMethod::QuasiRandom
    };
    (method, reports.iter().map(|r| r.error_bound).sum())
}

pub fn entropy_increase_gap(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: &ScaleVector,
    t1: f64,
    t2: f64,
    q: &QuadratureSpec,
) -> Result<GainReport> {
    if !(t2 > t1 && t1 > 0.0) {
        return Err(Error::InvalidArgument("need t2 > t1 > 0".into()));
    }
    let fine = lambda.powf(t2);
    let coarse = lambda.powf(t1);
    let conv = nu.convolve(mu)?;
    let h_conv = avg_cond_entropy(&conv, &fine, &coarse, q)?;
    let h_mu = avg_cond_entropy(mu, &fine, &coarse, q)?;
    let h_nu = avg_cond_entropy(nu, &fine, &coarse, q)?;
    let (method, error_bound) = combine(&[&h_conv, &h_mu, &h_nu]);
    Ok(GainReport {
        gain: h_conv.value - h_mu.value,
        beta: h_nu.value / (t2 - t1),
        method,
        error_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeRow {
    pub j: usize,
    /// `⌊log2(k) / (2χ_j)⌋`.
    pub a: i64,
    pub value: f64,
    pub chi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeReport {
    pub k: u32,
    pub m: i64,
    pub l: i64,
    pub rows: Vec<TubeRow>,
    /// Axis with the largest `value / χ_j`.
    pub best_axis: usize,
}

/// `(1/m) H(ζ^{*k}, E_{l−a+m} | E_{l−a} ∨ π_{[d]∖{j}}^{-1} E_{l−a+m})` per
/// axis, where `ζ = ½(δ_x + δ_y)`.
pub fn tube_entropy_selfconv(
    x: &[f64],
    y: &[f64],
    k: u32,
    lambda: &ScaleVector,
    m: i64,
    l: i64,
) -> Result<TubeReport> {
    if m < 1 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let d = lambda.dim();
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len().max(y.len()),
        });
    }
    let zeta = bernoulli_power(x, y, k)?;
    let chi = lambda.chi();
    let mut rows = Vec::with_capacity(d);
    for j in 0..d {
        let a = crate::util::snapped_floor((k as f64).log2() / (2.0 * chi[j]), 1e-12);
        let base = l - a;
        let others: Vec<usize> = (0..d).filter(|&i| i != j).collect();
        let fine = Keying::en(base + m, lambda)?;
        let coarse = Keying::en_join_projected(base, m, &others, lambda)?;
        let value = conditional_entropy(&zeta, &fine, &coarse)? / m as f64;
        rows.push(TubeRow { j, a, value, chi: chi[j] });
    }
    let best_axis = rows
        .iter()
        .max_by(|p, q| (p.value / p.chi).total_cmp(&(q.value / q.chi)).then(q.j.cmp(&p.j)))
        .map(|r| r.j)
        .unwrap_or(0);
    Ok(TubeReport { k, m, l, rows, best_axis })
}

/// One line of an experiment table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub fixture: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub h: f64,
    pub paired_mass: f64,
    pub gain: f64,
    pub beta: f64,
}
