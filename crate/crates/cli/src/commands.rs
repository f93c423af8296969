use std::fmt;
use std::fs::File;
use std::path::Path;

use bernconv::algebraic::approx::ApproxOptions;
use bernconv::algebraic::search::{min_value_poly_search_with, SearchBudget};
use bernconv::algebraic::{approximate_parameters, count_roots_in_disk, mahler_measure, IntPolynomial, Strategy};
use bernconv::decompose::{bernoulli_decompose, entropy_increase_gap, tube_entropy_selfconv};
use bernconv::entropy::{avg_cond_entropy, avg_entropy, partition_entropy, Keying, QuadratureSpec};
use bernconv::selfaffine::{
    build_level_n_with, default_arithmetic, dim_report, exact_overlap_depth_with, non_saturation_profile,
    rw_entropy_upper_with, separation_profile_with, Arithmetic, SystemSpec, DEFAULT_WORD_BUDGET,
};
use bernconv::{DiscreteMeasure, Error, ScaleVector};

use crate::report::{Cell, Report};
use crate::{ArithArg, Command, NRange, QuadArg, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_budget() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(s) => f.write_str(s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| CliError::Input(format!("missing required flag --{flag}")))
}

fn load_spec(c: &RunConfig) -> Result<SystemSpec> {
    let path = need(&c.spec, "spec")?;
    SystemSpec::load(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    DiscreteMeasure::read_csv(f).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn word_budget(c: &RunConfig) -> u128 {
    c.budget.unwrap_or(DEFAULT_WORD_BUDGET)
}

/// The measure from --measure, or level --level (default: the upper end of
/// --n) of the system in --spec.
fn measure_arg(c: &RunConfig) -> Result<DiscreteMeasure> {
    if let Some(path) = &c.measure {
        return load_measure(path);
    }
    let spec = load_spec(c)?;
    let level = match (c.level, c.n) {
        (Some(l), _) => l,
        (None, Some(r)) if r.end >= 1 => r.end as usize,
        _ => return Err(CliError::Input("give --measure, or --spec with --level".into())),
    };
    Ok(build_level_n_with(&spec, level, default_arithmetic(&spec), word_budget(c))?)
}

/// Like `measure_arg` but --n is never read as the level.
fn leveled_measure_arg(c: &RunConfig) -> Result<DiscreteMeasure> {
    if c.measure.is_none() && c.level.is_none() {
        return Err(CliError::Input("give --measure, or --spec with --level".into()));
    }
    measure_arg(c)
}

fn lambda_arg(c: &RunConfig) -> Result<ScaleVector> {
    if let Some(l) = &c.lambda {
        return Ok(ScaleVector::new(l.clone())?);
    }
    if c.spec.is_some() {
        return Ok(load_spec(c)?.lambda().clone());
    }
    Err(CliError::Input("missing required flag --lambda (or --spec)".into()))
}

fn scale_arg(v: &Option<Vec<f64>>, flag: &str) -> Result<ScaleVector> {
    Ok(ScaleVector::new(need(v, flag)?)?)
}

fn quad(c: &RunConfig) -> QuadratureSpec {
    let mut q = match c.quad {
        Some(QuadArg::Exact) => QuadratureSpec::exact(),
        Some(QuadArg::Qmc) => QuadratureSpec::qmc(c.offsets, c.seed),
        None => QuadratureSpec::default(),
    };
    q.offsets = c.offsets;
    q.seed = c.seed;
    q.cell_budget = c.cell_budget;
    q
}

fn positive_levels(r: NRange) -> Result<impl Iterator<Item = usize>> {
    if r.start < 1 {
        return Err(CliError::Input("levels must be at least 1".into()));
    }
    Ok(r.iter().map(|n| n as usize))
}

fn arithmetic(c: &RunConfig, spec: &SystemSpec) -> Arithmetic {
    match c.arith {
        Some(ArithArg::Exact) => Arithmetic::Exact,
        Some(ArithArg::Float) => Arithmetic::Float,
        None => default_arithmetic(spec),
    }
}

fn poly_string(coeffs: &[i64]) -> String {
    coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

pub fn dispatch(cmd: Command, c: &RunConfig) -> Result<Report> {
    match cmd {
        Command::Dim => dim(c),
        Command::Entropy => entropy(c),
        Command::AvgEntropy => avg(c),
        Command::RwEntropy => rw(c),
        Command::Overlap => overlap(c),
        Command::Separation => separation(c),
        Command::Nonsat => nonsat(c),
        Command::Decompose => decompose(c),
        Command::Increase => increase(c),
        Command::Tube => tube(c),
        Command::Mahler => mahler(c),
        Command::PolySearch => poly_search(c),
        Command::Approx => approx(c),
    }
}

fn dim(c: &RunConfig) -> Result<Report> {
    let spec = load_spec(c)?;
    let mut r = Report::table(
        "dim",
        vec!["n", "H_bits", "kappa_est", "dim_est", "lyapunov", "gamma", "method", "arithmetic"],
    );
    let arith = default_arithmetic(&spec).as_str();
    for n in positive_levels(need(&c.n, "n")?)? {
        let d = dim_report(&spec, n, word_budget(c))?;
        r.push(vec![
            n.into(),
            d.entropy_bits.into(),
            d.kappa_est.into(),
            d.dim_est.into(),
            d.lyapunov_dim.into(),
            d.gamma.into(),
            "partition".into(),
            arith.into(),
        ]);
    }
    Ok(r.meta("dim_note", "estimate under full-projection assumption"))
}

fn entropy(c: &RunConfig) -> Result<Report> {
    let mu = measure_arg(c)?;
    let lambda = lambda_arg(c)?;
    let mut r = Report::table("entropy", vec!["n", "H_bits", "method"]);
    for n in need(&c.n, "n")?.iter() {
        let h = partition_entropy(&mu, &Keying::en(n, &lambda)?)?;
        r.push(vec![n.into(), h.into(), "partition".into()]);
    }
    Ok(r)
}

fn avg(c: &RunConfig) -> Result<Report> {
    let mu = load_measure(&need(&c.measure, "measure")?)?;
    let r1 = scale_arg(&c.r, "r")?;
    let q = quad(c);
    let rep = match &c.r2 {
        Some(v) => avg_cond_entropy(&mu, &r1, &ScaleVector::new(v.clone())?, &q)?,
        None => avg_entropy(&mu, &r1, &q)?,
    };
    Ok(Report::single(
        "avg-entropy",
        vec![
            ("value", rep.value.into()),
            ("method", rep.method.to_string().into()),
            ("offsets_used", (rep.offsets_used as i64).into()),
            ("error_bound", rep.error_bound.into()),
        ],
    )
    .meta("seed", c.seed as i64))
}

fn rw(c: &RunConfig) -> Result<Report> {
    let spec = load_spec(c)?;
    let arith = arithmetic(c, &spec);
    let mut r = Report::table(
        "rw-entropy",
        vec!["n", "value", "distinct_maps", "words", "note", "method", "arithmetic"],
    );
    for n in positive_levels(need(&c.n, "n")?)? {
        let w = rw_entropy_upper_with(&spec, n, arith, word_budget(c))?;
        r.push(vec![
            n.into(),
            w.value.into(),
            w.distinct_maps.into(),
            Cell::Text(w.words.to_string()),
            w.note.into(),
            "partition".into(),
            arith.as_str().into(),
        ]);
    }
    Ok(r)
}

fn overlap(c: &RunConfig) -> Result<Report> {
    let spec = load_spec(c)?;
    let n_max = need(&c.n, "n")?.end.max(0) as usize;
    let o = exact_overlap_depth_with(&spec, n_max, word_budget(c))?;
    let mut r = Report::table("overlap", vec!["axis", "depth", "n_max", "method"]);
    for (j, d) in o.per_axis.iter().enumerate() {
        r.push(vec![(j + 1).to_string().into(), (*d).into(), n_max.into(), "exact".into()]);
    }
    r.push(vec!["system".into(), o.system.into(), n_max.into(), "exact".into()]);
    Ok(r)
}

fn separation(c: &RunConfig) -> Result<Report> {
    let spec = load_spec(c)?;
    let n_max = need(&c.n, "n")?.end.max(1) as usize;
    let rows = separation_profile_with(&spec, n_max, word_budget(c))?;
    let mut r = Report::table(
        "separation",
        vec!["n", "delta", "delta_float", "c_n", "per_axis", "exact_collision", "method"],
    );
    for row in rows {
        let axes = row.per_axis.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        r.push(vec![
            row.n.into(),
            row.delta.into(),
            row.delta_float.into(),
            row.c_n.into(),
            axes.into(),
            row.exact_collision.into(),
            if row.exact_collision.is_some() { "exact" } else { "float" }.into(),
        ]);
    }
    Ok(r)
}

fn nonsat(c: &RunConfig) -> Result<Report> {
    let mu = measure_arg(c)?;
    let lambda = lambda_arg(c)?;
    let eps = need(&c.eps, "eps")?;
    let m = need(&c.m, "m")?;
    let range = need(&c.n, "n")?;
    let rep = non_saturation_profile(&mu, &lambda, eps, m, range.start..range.end + 1)?;
    let mut r = Report::table("nonsat", vec!["j", "n", "value", "threshold", "below", "method"]);
    for row in &rep.rows {
        r.push(vec![
            (row.j + 1).into(),
            row.n.into(),
            row.value.into(),
            row.threshold.into(),
            (row.value < row.threshold).into(),
            "partition".into(),
        ]);
    }
    Ok(r.meta("eps", eps).meta("m", m).meta("non_saturated", rep.non_saturated))
}

fn decompose(c: &RunConfig) -> Result<Report> {
    let mu = leveled_measure_arg(c)?;
    let lambda = lambda_arg(c)?;
    let n = need(&c.n, "n")?.start;
    if n < 0 {
        return Err(CliError::Input("--n must be nonnegative".into()));
    }
    let big_n = need(&c.big_n, "N")?;
    let eps = need(&c.eps, "eps")?;
    let d = bernoulli_decompose(&mu, &lambda, n as usize, big_n, eps)?;
    let mut r = Report::single(
        "decompose",
        vec![
            ("n", n.into()),
            ("N", big_n.into()),
            ("paired_mass", d.paired_mass.into()),
            ("theta_mass", d.theta_mass.into()),
            ("pairs", d.pairs.len().into()),
            ("window_lo", d.window.0.into()),
            ("window_hi", d.window.1.into()),
            ("eps_window_violations", d.eps_window_violations.into()),
            ("pairing", if d.optimality_gap == 0.0 { "max-flow" } else { "greedy" }.into()),
            ("optimality_gap", d.optimality_gap.into()),
        ],
    );
    let pairs = serde_json::to_value(&d.pairs).map_err(|e| CliError::Input(e.to_string()))?;
    r.detail = Some(("pair_list", pairs));
    Ok(r)
}

fn increase(c: &RunConfig) -> Result<Report> {
    let mu = leveled_measure_arg(c)?;
    let nu = load_measure(&need(&c.nu, "nu")?)?;
    let lambda = lambda_arg(c)?;
    let g = entropy_increase_gap(&mu, &nu, &lambda, need(&c.t1, "t1")?, need(&c.t2, "t2")?, &quad(c))?;
    Ok(Report::single(
        "increase",
        vec![
            ("gain", g.gain.into()),
            ("beta", g.beta.into()),
            ("method", g.method.to_string().into()),
            ("error_bound", g.error_bound.into()),
        ],
    )
    .meta("seed", c.seed as i64))
}

fn tube(c: &RunConfig) -> Result<Report> {
    let x = need(&c.x, "x")?;
    let y = need(&c.y, "y")?;
    let lambda = lambda_arg(c)?;
    let t = tube_entropy_selfconv(&x, &y, need(&c.k, "k")?, &lambda, need(&c.m, "m")?, c.l.unwrap_or(0))?;
    let mut r = Report::table("tube", vec!["j", "a", "value", "chi", "method"]);
    for row in &t.rows {
        r.push(vec![
            (row.j + 1).into(),
            row.a.into(),
            row.value.into(),
            row.chi.into(),
            "partition".into(),
        ]);
    }
    Ok(r.meta("best_axis", t.best_axis + 1))
}

fn parse_poly(c: &RunConfig) -> Result<IntPolynomial> {
    need(&c.poly, "poly")?
        .parse::<IntPolynomial>()
        .map_err(|e| CliError::Input(format!("--poly: {e}")))
}

fn mahler(c: &RunConfig) -> Result<Report> {
    let p = parse_poly(c)?;
    let mut fields = vec![
        ("mahler", mahler_measure(&p)?.into()),
        ("degree", p.degree().into()),
        ("polynomial", p.to_string().into()),
    ];
    if let Some(rho) = c.rho {
        fields.push(("rho", rho.into()));
        fields.push(("roots_in_disk", count_roots_in_disk(&p, rho)?.into()));
    }
    fields.push(("method", "certified-roots".into()));
    Ok(Report::single("mahler", fields))
}

fn search_budget(c: &RunConfig) -> SearchBudget {
    let mut b = SearchBudget::default();
    if let Some(v) = c.budget {
        b.table_entries = v;
        b.enumeration = v;
    }
    b
}

fn poly_search(c: &RunConfig) -> Result<Report> {
    let xi = need(&c.xi, "xi")?;
    let n = need(&c.n, "n")?.start;
    if n < 1 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    let coeffs = c.coeffs.clone().unwrap_or_else(|| vec![-1, 0, 1]);
    let strategy: Strategy = c.strategy.parse()?;
    let res = min_value_poly_search_with(xi, n as usize, &coeffs, strategy, search_budget(c))?;
    Ok(Report::single(
        "poly-search",
        vec![
            ("coeffs", poly_string(&res.coeffs).into()),
            ("polynomial", res.polynomial().to_string().into()),
            ("value", res.value.into()),
            ("strategy", strategy.to_string().into()),
        ],
    ))
}

fn approx(c: &RunConfig) -> Result<Report> {
    let n = need(&c.n, "n")?.start;
    if n < 1 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    let n = n as usize;
    let (lambda, sets, spec) = match (&c.spec, &c.lambda) {
        (Some(_), _) => {
            let spec = load_spec(c)?;
            let sets = (0..spec.dim()).map(|j| spec.difference_set(j)).collect::<Vec<_>>();
            let lambda = match &c.lambda {
                Some(l) => ScaleVector::new(l.clone())?,
                None => spec.lambda().clone(),
            };
            (lambda, sets, Some(spec))
        }
        (None, Some(l)) => {
            let lambda = ScaleVector::new(l.clone())?;
            let set = c.coeffs.clone().unwrap_or_else(|| vec![-2, 0, 2]);
            let sets = vec![set; lambda.dim()];
            (lambda, sets, None)
        }
        (None, None) => return Err(CliError::Input("give --spec or --lambda".into())),
    };
    let opts = ApproxOptions {
        candidates: c.candidates,
        budget: search_budget(c),
    };
    let a = approximate_parameters(&lambda, n, &sets, &opts)?;
    let mut r = Report::table(
        "approx",
        vec![
            "j",
            "lambda",
            "found",
            "witness",
            "value_at_lambda",
            "eta",
            "distance",
            "minpoly",
            "nearest_root",
            "nearest_distance",
            "examined",
        ],
    );
    for (j, ax) in a.axes.iter().enumerate() {
        let acc = ax.accepted.as_ref();
        r.push(vec![
            (j + 1).into(),
            ax.lambda.into(),
            ax.found().into(),
            acc.map(|x| poly_string(&x.coeffs)).into(),
            acc.map(|x| x.value_at_lambda).into(),
            acc.map(|x| x.root).into(),
            acc.map(|x| x.distance).into(),
            ax.minpoly.as_deref().map(poly_string).into(),
            ax.nearest.as_ref().map(|x| x.root).into(),
            ax.nearest.as_ref().map(|x| x.distance).into(),
            ax.examined.into(),
        ]);
    }
    let mut rw = None;
    if let (Some(spec), Some(eta), true) = (&spec, &a.eta, a.in_omega) {
        let alphas: Option<Vec<_>> = a.axes.iter().map(|x| x.eta.clone()).collect();
        if let Some(alphas) = alphas {
            let sys = SystemSpec::new(ScaleVector::new(eta.clone())?, spec.maps().to_vec())?.with_algebraic(alphas)?;
            let level = c.level.unwrap_or(n);
            rw = Some(rw_entropy_upper_with(&sys, level, Arithmetic::Exact, word_budget(c))?.value);
        }
    }
    Ok(r
        .meta("n", n)
        .meta("in_omega", a.in_omega)
        .meta("max_distance", a.distance)
        .meta("rw_entropy_eta", rw))
}
