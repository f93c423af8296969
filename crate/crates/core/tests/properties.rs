use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use bernconv::algebraic::{ranked_candidates, SearchBudget};
use bernconv::measures::Transform;
use bernconv::selfaffine::{build_factor, build_level_n_with, default_arithmetic, separation_profile, DEFAULT_WORD_BUDGET};
use bernconv::{
    avg_entropy, bernoulli_decompose, bernoulli_power, build_level_n, en_key, entropy_increase_gap, exact_overlap_depth,
    mahler_measure, min_value_poly_search, partition_entropy, rw_entropy_upper, s_sequence, Arithmetic,
    DiscreteMeasure, IntPolynomial, Keying, MergePolicy, QuadratureSpec, ScaleVector, Strategy as Search, SystemSpec,
};

fn sv(v: &[f64]) -> ScaleVector {
    ScaleVector::new(v.to_vec()).unwrap()
}

fn measure_from(d: usize, atoms: &[(Vec<f64>, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_atoms(atoms.iter().map(|(p, w)| (&p[..d], *w)), MergePolicy::Exact).unwrap()
}

fn atoms_strategy(max_atoms: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((prop::collection::vec(lo..hi, 3), 0.01f64..1.0), 1..=max_atoms)
}

fn grid_atoms(max_atoms: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec(
        (prop::collection::vec((-4i32..4).prop_map(f64::from), 3), 0.01f64..1.0),
        1..=max_atoms,
    )
}

/// Strictly decreasing entries in (0, 1).
fn omega(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = ScaleVector> {
    prop::collection::vec(lo..hi, d).prop_filter_map("distinct entries", |mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v.windows(2).all(|w| w[0] > w[1]).then(|| ScaleVector::new(v).unwrap())
    })
}

fn close(a: &DiscreteMeasure, b: &DiscreteMeasure, tol: f64) -> bool {
    a.len() == b.len()
        && a.atoms().zip(b.atoms()).all(|((p, w), (q, v))| {
            (w - v).abs() <= tol * w.abs().max(1.0) && p.iter().zip(q).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
        })
}

// measures

proptest! {
    #[test]
    fn convolution_commutes_exactly(d in 1usize..=3, a in grid_atoms(6), b in atoms_strategy(6, -3.0, 3.0)) {
        let (mu, nu) = (measure_from(d, &a), measure_from(d, &b));
        prop_assert_eq!(mu.convolve(&nu).unwrap(), nu.convolve(&mu).unwrap());
    }

    #[test]
    fn convolution_associates_on_grid(d in 1usize..=3, a in grid_atoms(4), b in grid_atoms(4), c in grid_atoms(4)) {
        let (x, y, z) = (measure_from(d, &a), measure_from(d, &b), measure_from(d, &c));
        let left = x.convolve(&y).unwrap().convolve(&z).unwrap();
        let right = x.convolve(&y.convolve(&z).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn mass_multiplies_and_is_preserved(d in 1usize..=3, a in atoms_strategy(6, -3.0, 3.0), b in atoms_strategy(6, -3.0, 3.0), r in prop::collection::vec(0.1f64..3.0, 3)) {
        let (mu, nu) = (measure_from(d, &a), measure_from(d, &b));
        let conv = mu.convolve(&nu).unwrap();
        prop_assert!((conv.mass() - mu.mass() * nu.mass()).abs() <= 1e-12 * conv.mass());
        let scaled = mu.pushforward(&Transform::Scale(sv(&r[..d]))).unwrap();
        prop_assert!((scaled.mass() - mu.mass()).abs() <= 1e-12 * mu.mass());
        let moved = mu.pushforward(&Transform::Translate(r[..d].to_vec())).unwrap();
        prop_assert!((moved.mass() - mu.mass()).abs() <= 1e-12 * mu.mass());
    }

    #[test]
    fn binomial_variance_is_additive(x in prop::collection::vec(-2.0f64..2.0, 2), y in prop::collection::vec(-2.0f64..2.0, 2), k in 1u32..200) {
        prop_assume!(x != y);
        let mu = bernoulli_power(&x, &y, k).unwrap();
        let pair = DiscreteMeasure::bernoulli_pair(&x, &y).unwrap();
        for j in 0..2 {
            let want = k as f64 * pair.variance(j);
            prop_assert!((mu.variance(j) - want).abs() <= 1e-9 * want.max(1e-12) + 1e-12);
        }
    }

    #[test]
    fn scaling_is_a_group_action(d in 1usize..=3, a in atoms_strategy(8, -3.0, 3.0), r in prop::collection::vec(0.1f64..3.0, 3), rp in prop::collection::vec(0.1f64..3.0, 3)) {
        let mu = measure_from(d, &a);
        let (r, rp) = (sv(&r[..d]), sv(&rp[..d]));
        let twice = mu
            .pushforward(&Transform::Scale(rp.clone()))
            .unwrap()
            .pushforward(&Transform::Scale(r.clone()))
            .unwrap();
        let once = mu.pushforward(&Transform::Scale(&r * &rp)).unwrap();
        prop_assert!(close(&twice, &once, 1e-12));
    }
}

// scales

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn s_sequence_divisibility_and_bounds(lambda in (1usize..=3).prop_flat_map(|d| omega(d, 0.05, 0.99)), n in 1usize..120) {
        let seq = s_sequence(&lambda, n).unwrap();
        for k in 0..=n {
            prop_assert!(seq.verify_bounds(k));
        }
        for (a, b) in [(0, n), (n / 2, n), (n - 1, n)] {
            for j in 0..lambda.dim() {
                let (fine, coarse) = (&seq.denominator(b)[j], &seq.denominator(a)[j]);
                prop_assert!((fine % coarse) == num_bigint::BigUint::from(0u32));
            }
        }
    }

    #[test]
    fn en_cells_nest(lambda in (1usize..=3).prop_flat_map(|d| omega(d, 0.1, 0.95)), x in prop::collection::vec(-5.0f64..5.0, 3), u in prop::collection::vec(0.0f64..1.0, 3), n in 0i64..40) {
        let d = lambda.dim();
        let x = &x[..d];
        let fine = en_key(x, n + 1, &lambda).unwrap();
        let levels = bernconv::scales::en_levels(&lambda, n + 1).unwrap();
        prop_assume!(fine.index.iter().all(|i| i.abs() < 1 << 52));
        // another point of the same level-(n+1) cell
        let y: Vec<f64> = fine
            .index
            .iter()
            .zip(&levels)
            .zip(&u)
            .map(|((&i, &l), &t)| (i as f64 + 0.25 + 0.5 * t) * 2f64.powi(-(l as i32)))
            .collect();
        prop_assert_eq!(&en_key(&y, n + 1, &lambda).unwrap(), &fine);
        prop_assert_eq!(en_key(&y, n, &lambda).unwrap(), en_key(x, n, &lambda).unwrap());
    }
}

/// `S_{s_k} E_n` and `E_{n+k}` are commensurable: a cell of either meets at
/// most 5 cells of the other along each axis.
#[test]
fn s_sequence_commensurability() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for lambda in [sv(&[0.6180339887]), sv(&[0.8, 0.3]), sv(&[0.9, 0.5, 0.37])] {
        let d = lambda.dim();
        let seq = s_sequence(&lambda, 20).unwrap();
        for k in [1usize, 5, 13, 20] {
            for n in [0i64, 3, 11] {
                let sk = seq.term(k);
                let mut a_to_b: HashMap<Vec<i64>, HashSet<Vec<i64>>> = HashMap::new();
                let mut b_to_a: HashMap<Vec<i64>, HashSet<Vec<i64>>> = HashMap::new();
                let levels = bernconv::scales::en_levels(&lambda, n + k as i64).unwrap();
                for _ in 0..10_000 {
                    // points spread over a few dozen fine cells
                    let x: Vec<f64> = levels.iter().map(|&l| rng.random::<f64>() * 40.0 * 2f64.powi(-(l as i32))).collect();
                    let back: Vec<f64> = x.iter().zip(sk.entries()).map(|(a, s)| a / s).collect();
                    let ka = en_key(&back, n, &lambda).unwrap().index.to_vec();
                    let kb = en_key(&x, n + k as i64, &lambda).unwrap().index.to_vec();
                    a_to_b.entry(ka.clone()).or_default().insert(kb.clone());
                    b_to_a.entry(kb).or_default().insert(ka);
                }
                let bound = 5usize.pow(d as u32);
                let worst = a_to_b.values().chain(b_to_a.values()).map(HashSet::len).max().unwrap();
                assert!(worst <= bound, "lambda {:?} k={k} n={n}: {worst} > {bound}", lambda.entries());
            }
        }
    }
}

// entropy

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn en_entropy_tracks_average_entropy(d in 1usize..=2, a in atoms_strategy(40, 0.0, 1.0), k in 0i64..12) {
        let lambda = if d == 1 { sv(&[0.6]) } else { sv(&[0.7, 0.4]) };
        let mu = measure_from(d, &a);
        let pe = partition_entropy(&mu, &Keying::en(k, &lambda).unwrap()).unwrap();
        let ae = avg_entropy(&mu, &lambda.powi(k as i32), &QuadratureSpec::exact()).unwrap().value;
        // a dyadic cell of width in [λ^k, 2λ^k) meets at most 3 grid cells of
        // width λ^k, and a grid cell meets at most 2 dyadic cells; both sides
        // scale with the mass
        let bound = mu.mass() * d as f64 * 3f64.log2();
        prop_assert!((pe - ae).abs() <= bound + 1e-9, "pe={} ae={}", pe, ae);
    }

    #[test]
    fn avg_entropy_is_nonnegative_and_certified(d in 1usize..=3, a in atoms_strategy(10, -2.0, 2.0), r in prop::collection::vec(0.05f64..2.0, 3)) {
        let mu = measure_from(d, &a).normalized().unwrap();
        let rep = avg_entropy(&mu, &sv(&r[..d]), &QuadratureSpec::exact()).unwrap();
        prop_assert!(rep.value >= 0.0);
        prop_assert!(rep.error_bound <= 1e-9);
        prop_assert!(rep.value <= (mu.len() as f64).log2() + 1e-9);
    }

    #[test]
    fn single_atom_has_zero_average_entropy(d in 1usize..=3, x in prop::collection::vec(-9.0f64..9.0, 3), r in prop::collection::vec(0.05f64..2.0, 3)) {
        let v = avg_entropy(&DiscreteMeasure::dirac(&x[..d]), &sv(&r[..d]), &QuadratureSpec::exact()).unwrap().value;
        prop_assert_eq!(v, 0.0);
    }
}

// self-affine systems

fn system(lambda: ScaleVector, translations: &[Vec<i64>]) -> SystemSpec {
    let p = 1.0 / translations.len() as f64;
    let maps = translations
        .iter()
        .map(|a| bernconv::MapSpec { a: a.clone(), p })
        .collect();
    SystemSpec::new(lambda, maps).unwrap()
}

fn system_strategy() -> impl Strategy<Value = SystemSpec> {
    (1usize..=2).prop_flat_map(|d| {
        (
            omega(d, 0.3, 0.9),
            prop::collection::hash_set(prop::collection::vec(-2i64..=2, d), 2..=3),
        )
            .prop_map(|(l, set)| {
                let mut t: Vec<Vec<i64>> = set.into_iter().collect();
                t.sort();
                system(l, &t)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shifted_factor_is_scaled_factor(spec in system_strategy(), a in 0usize..3, len in 1usize..5, k in 1usize..4) {
        let shifted = build_factor(&spec, a + k, a + len + k).unwrap();
        let scaled = build_factor(&spec, a, a + len)
            .unwrap()
            .pushforward(&Transform::Scale(spec.lambda().powi(k as i32)))
            .unwrap();
        prop_assert!(close(&shifted, &scaled, 1e-12));
    }

    #[test]
    fn level_n_factors_as_convolution(spec in system_strategy(), n in 2usize..8, cut in 1usize..7) {
        prop_assume!(cut < n);
        let whole = build_level_n_with(&spec, n, Arithmetic::Float, DEFAULT_WORD_BUDGET).unwrap();
        let parts = build_factor(&spec, 0, cut).unwrap().convolve(&build_factor(&spec, cut, n).unwrap()).unwrap();
        // positions are the same sums in a different order; merge on a fine grid
        let q = |m: &DiscreteMeasure| DiscreteMeasure::from_atoms(m.atoms(), MergePolicy::Quantized).unwrap();
        prop_assert!(close(&q(&whole), &q(&parts), 1e-12));
    }

    #[test]
    fn rw_entropy_subadditive(spec in system_strategy(), n in 1usize..4) {
        let arith = default_arithmetic(&spec);
        let h1 = rw_entropy_upper(&spec, n, arith).unwrap().value;
        let h2 = rw_entropy_upper(&spec, 2 * n, arith).unwrap().value;
        let h4 = rw_entropy_upper(&spec, 4 * n, arith).unwrap().value;
        prop_assert!(h2 <= h1 + 1e-12 && h4 <= h2 + 1e-12, "{} {} {}", h1, h2, h4);
    }

    #[test]
    fn finer_levels_keep_en_entropy(spec in system_strategy(), n in 1usize..7, extra in 0usize..=5) {
        let en = Keying::en(n as i64, spec.lambda()).unwrap();
        let base = partition_entropy(&build_level_n(&spec, n).unwrap(), &en).unwrap();
        let more = partition_entropy(&build_level_n(&spec, n + extra).unwrap(), &en).unwrap();
        // the tail Σ_{k≥n} a λ^k moves each atom by at most 2·max|a|·λ^n/(1−λ)
        let bound: f64 = spec
            .lambda()
            .entries()
            .iter()
            .map(|l| (2.0 * 2.0 * 2.0 / (1.0 - l) + 2.0).log2() + 1.0)
            .sum();
        prop_assert!((base - more).abs() <= bound, "{} vs {}", base, more);
    }
}

#[test]
fn overlap_depth_means_zero_gap() {
    let fixtures = [
        (0.6180339887498949, vec![-1, 1, 1]),
        // x³ + x² + x − 1: λ + λ² + λ³ = 1
        (0.5436890126920764, vec![-1, 1, 1, 1]),
    ];
    for (l, minpoly) in fixtures {
        let spec = SystemSpec::bernoulli(sv(&[l]))
            .unwrap()
            .with_minpolys(&[IntPolynomial::from_i64(&minpoly)])
            .unwrap();
        let depth = exact_overlap_depth(&spec, 8).unwrap().system.expect("overlap");
        let rows = separation_profile(&spec, depth).unwrap();
        assert!(rows[depth - 1].delta_float.abs() <= 1e-9, "lambda {l}: {:?}", rows[depth - 1]);
        assert_eq!(rows[depth - 1].delta, 0.0);
    }
}

// algebraic

fn poly_strategy() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-3i64..=3, 2..=5).prop_filter("nonzero leading and constant", |c| {
        *c.last().unwrap() != 0 && c[0] != 0
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mahler_is_multiplicative(p in poly_strategy(), q in poly_strategy()) {
        let (p, q) = (IntPolynomial::from_i64(&p), IntPolynomial::from_i64(&q));
        let mp = mahler_measure(&p).unwrap();
        let mq = mahler_measure(&q).unwrap();
        let mpq = mahler_measure(&p.mul(&q)).unwrap();
        prop_assert!((mpq - mp * mq).abs() <= 1e-7 * mpq);
        prop_assert!(mp >= 1.0 - 1e-12 && mq >= 1.0 - 1e-12);
    }

    #[test]
    fn search_strategies_agree(xi in 0.2f64..0.99, n in 2usize..=10, set in prop::sample::select(vec![vec![-1i64, 0, 1], vec![-2, 0, 2], vec![-1, 0, 2], vec![-2, -1, 0, 1, 2]])) {
        let n = if set.len() > 3 { n.min(7) } else { n };
        let a = min_value_poly_search(xi, n, &set, Search::Exhaustive).unwrap();
        let b = min_value_poly_search(xi, n, &set, Search::MeetInMiddle).unwrap();
        let c = min_value_poly_search(xi, n, &set, Search::BranchAndBound).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
        prop_assert!(a.polynomial().in_bounded_class(*set.iter().map(|c| c.abs()).collect::<Vec<_>>().iter().max().unwrap() as u64, n));
        let ranked = ranked_candidates(xi, n, &set, 4, SearchBudget::default()).unwrap();
        prop_assert_eq!(&ranked[0], &a);
    }
}

// decomposition

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_type_invariants(a in atoms_strategy(30, 0.0, 0.3), d in 1usize..=2, n in 1usize..4, big_n in 1usize..3, eps in 0.01f64..0.5) {
        let lambda = if d == 1 { sv(&[0.55]) } else { sv(&[0.7, 0.45]) };
        let nu = measure_from(d, &a).normalized().unwrap();
        let dec = bernoulli_decompose(&nu, &lambda, n, big_n, eps).unwrap();
        prop_assert!((dec.paired_mass + dec.theta_mass - 1.0).abs() < 1e-9);
        prop_assert!((dec.theta.mass() - dec.theta_mass).abs() < 1e-9);
        let (lo, hi) = dec.window;
        let mut violations = 0;
        for p in &dec.pairs {
            prop_assert!(p.mass > 0.0);
            prop_assert!(p.rescaled_distance >= lo && p.rescaled_distance <= hi);
            if !p.in_eps_window {
                violations += 1;
            }
            prop_assert_eq!(p.in_eps_window, p.scaled_distance >= eps && p.scaled_distance <= 1.0 / eps);
        }
        prop_assert_eq!(violations, dec.eps_window_violations);
        let paired: f64 = dec.pairs.iter().map(|p| p.mass).sum();
        prop_assert!((paired - dec.paired_mass).abs() < 1e-9);
    }
}

/// Convolving a self-similar measure of dimension below 1 with a Bernoulli
/// pair at the right scale increases its entropy.
#[test]
fn bernoulli_pair_increases_entropy() {
    let lambda = sv(&[1.0 / 3.0]);
    let mu = build_level_n(&SystemSpec::bernoulli(lambda.clone()).unwrap(), 10).unwrap();
    let q = QuadratureSpec::exact();
    for (t, t1, t2) in [(3f64.powi(-4), 4.0, 8.0), (0.5 * 3f64.powi(-5), 5.0, 9.0)] {
        let nu = DiscreteMeasure::bernoulli_pair(&[0.0], &[t]).unwrap();
        let g = entropy_increase_gap(&mu, &nu, &lambda, t1, t2, &q).unwrap();
        assert!(g.gain > 0.0, "t={t}: gain {}", g.gain);
    }
}
