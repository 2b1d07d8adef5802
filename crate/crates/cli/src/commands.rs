//! One function per subcommand. Each returns a [`Section`] of checks,
//! details and an optional CSV table.

use nalgebra::{DMatrix, DVector};
use ppwave::geodesic::reduced_agreement;
use ppwave::hill::omega_initial;
use ppwave::holonomy::{resolve_sign_convention, SAMPLER_E_TOL, SAMPLER_S_TOL};
use ppwave::killing::killing_catalog;
use ppwave::{
    centralizer_basis, closed_form_transport, commutator_check, completeness_probe, curvature::olszak_residual,
    curvature_at, g_act, g_compose, g_identity, g_inverse, heis_bridge, heis_mul, holonomy_sampler,
    isom0_dimension, isometry_residual, killing_residual, parallelism_residuals, pi_automorphism,
    quotient_transport, sigma_validate, Element, Error, HeisElement, HillSolution, KillingField, Mode, Model,
    ModelConfig, Point64, SignConvention, SigmaLattice, Tangent64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{Check, Section, Table};

/// Failures that abort a run before a report is produced.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Internal(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Internal(e.to_string())
    }
}

pub type RunResult = Result<Section, RunError>;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: u64,
    pub trials: Option<usize>,
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
}

impl Options {
    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    /// `--tol` replaces the default of every upper-bound residual check.
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn random_point(model: &Model, r: &mut ChaCha8Rng, t_range: f64, range: f64) -> Point64 {
    let v = DVector::from_fn(model.fiber_dim(), |_, _| r.gen_range(-range..=range));
    Point64::new(r.gen_range(-t_range..=t_range), r.gen_range(-range..=range), v)
}

fn random_vec(m: usize, r: &mut ChaCha8Rng, range: f64) -> DVector<f64> {
    DVector::from_fn(m, |_, _| r.gen_range(-range..=range))
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub fn model_validate(model: &Model, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let a = model.a();
    let n = model.n();
    out.check(Check::upper("operator_symmetric", (a - a.transpose()).amax(), opts.tol(1e-12)));
    if model.mode() == Mode::Strict {
        out.check(Check::upper("operator_traceless", a.trace().abs(), opts.tol(1e-12)));
        out.check(Check::lower("profile_nonconstant", model.fourier().is_nonconstant() as u8 as f64, 0.5));
    }
    let mut r = rng(opts.seed, 1);
    let mut inverse = 0.0f64;
    for _ in 0..opts.trials(20) {
        let p = random_point(model, &mut r, 2.0 * model.period(), 2.0);
        let prod = model.metric_matrix(&p) * model.inverse_metric(&p);
        inverse = inverse.max((prod - DMatrix::identity(n, n)).amax());
    }
    out.check(Check::upper("inverse_metric", inverse, opts.tol(1e-10)));

    let eig = model.eigen();
    let mut table = Table::new(&["index", "eigenvalue", "cluster"]);
    for (c, range) in eig.clusters().into_iter().enumerate() {
        for i in range {
            table.push(vec![i.to_string(), fmt(eig.values[i]), c.to_string()]);
        }
    }
    out.detail("n", n);
    out.detail("mode", if model.mode() == Mode::Strict { "strict" } else { "relaxed" });
    out.detail("period", model.period());
    out.detail("eigenvalues", eig.values.as_slice());
    out.detail("multiplicities", &eig.multiplicities);
    out.table = Some(table);
    Ok(out)
}

pub fn curvature_verify(model: &Model, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let n = model.n();
    let mut r = rng(opts.seed, 2);
    let pts: Vec<Point64> = (0..opts.trials(10)).map(|_| random_point(model, &mut r, 2.0, 5.0)).collect();
    let mut table = Table::new(&["t", "s", "max_riemann", "max_weyl", "scalar", "olszak"]);
    let (mut sym, mut bianchi, mut scalar, mut olszak) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut weyl_min, mut riemann_max) = (f64::INFINITY, 0.0f64);
    for p in &pts {
        let b = curvature_at(model, p);
        let ds = Tangent64::coordinate(p.clone(), 1);
        let o = olszak_residual(model, &b, &ds);
        sym = sym.max(b.symmetry_residual());
        bianchi = bianchi.max(b.bianchi_residual());
        scalar = scalar.max(b.scalar.abs());
        olszak = olszak.max(o);
        weyl_min = weyl_min.min(b.weyl.max_abs());
        riemann_max = riemann_max.max(b.riemann.max_abs());
        table.push(vec![fmt(p.t), fmt(p.s), fmt(b.riemann.max_abs()), fmt(b.weyl.max_abs()), fmt(b.scalar), fmt(o)]);
    }
    let (nabla_w, nabla_r) = parallelism_residuals(model, &pts, 1e-4);
    out.check(Check::upper("riemann_symmetries", sym, opts.tol(1e-10)));
    out.check(Check::upper("first_bianchi", bianchi, opts.tol(1e-10)));
    out.check(Check::upper("scalar_curvature", scalar, opts.tol(1e-10)));
    out.check(Check::upper("null_translation_in_weyl_line", olszak, opts.tol(1e-8)));
    out.check(Check::upper("weyl_parallel", nabla_w, opts.tol(1e-5)));
    if model.mode() == Mode::Strict {
        out.check(Check::lower("weyl_nonzero", weyl_min, 1e-10));
        out.check(Check::lower("riemann_not_parallel", nabla_r, 1e-4));
    } else if !model.fourier().is_nonconstant() {
        out.check(Check::upper("riemann_parallel", nabla_r, opts.tol(1e-5)));
    }
    out.detail("samples", pts.len());
    out.detail("max_nabla_weyl", nabla_w);
    out.detail("max_nabla_riemann", nabla_r);
    out.detail("max_riemann", riemann_max);
    out.detail("min_max_weyl", if weyl_min.is_finite() { weyl_min } else { 0.0 });
    out.detail("dimension", n);
    out.table = Some(table);
    Ok(out)
}

pub fn geodesic_probe(model: &Model, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let trials = opts.trials(50);
    let horizon = opts.horizon.unwrap_or(1e3);
    let rep = completeness_probe(model, trials, horizon, opts.seed).map_err(|e| match e {
        Error::InvalidValue(m) => RunError::Config(m),
        e => e.into(),
    })?;
    let tau = 50.0f64.min(horizon);
    let agreement = reduced_agreement(model, trials.min(20), tau, opts.seed)?;
    out.check(Check::exact("no_blowups", rep.blowups));
    out.check(Check::exact("gronwall_envelope", (!rep.envelope_ok) as usize));
    out.check(Check::upper("energy_drift", rep.max_energy_drift, opts.tol(1e-7)));
    out.check(Check::upper("t_rate_drift", rep.max_t_rate_drift, opts.tol(1e-9)));
    out.check(Check::upper("reduced_agreement", agreement, opts.tol(1e-6)));
    let mut table = Table::new(&["trials", "horizon", "blowups", "max_norm", "max_energy_drift", "reduced_agreement"]);
    table.push(vec![
        trials.to_string(),
        fmt(horizon),
        rep.blowups.to_string(),
        fmt(rep.max_norm),
        fmt(rep.max_energy_drift),
        fmt(agreement),
    ]);
    out.detail("probe", &rep);
    out.detail("reduced_tau", tau);
    out.table = Some(table);
    Ok(out)
}

pub fn killing_verify(model: &Model, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let mut r = rng(opts.seed, 4);
    let p = model.period();
    let pts: Vec<Point64> = (0..opts.trials(100)).map(|_| random_point(model, &mut r, 3.0 * p, 5.0)).collect();
    let tol = opts.tol(1e-7);
    let mut table = Table::new(&["field", "residual"]);
    let mut fields: Vec<(String, KillingField<f64>)> = vec![("Z".to_string(), KillingField::Z)];
    let catalog = killing_catalog(model);
    let catalog_len = catalog.len();
    fields.extend(catalog.into_iter().filter(|(_, f)| !matches!(f, KillingField::Z)));
    let basis = centralizer_basis(model.a());
    for (j, f) in basis.matrices.iter().enumerate() {
        fields.push((format!("X_F[{j}]"), KillingField::x_f(f.clone())?));
    }
    let mut worst = 0.0f64;
    for (name, field) in &fields {
        let res = killing_residual(model, field, &pts);
        worst = worst.max(res);
        table.push(vec![name.clone(), fmt(res)]);
    }
    out.check(Check::upper("killing_residual", worst, tol));
    out.check(Check::exact("catalog_size", catalog_len.abs_diff(2 * model.n() - 3)));
    let few: Vec<Point64> = pts.iter().take(10).cloned().collect();
    let mut comm = 0.0f64;
    for f in &basis.matrices {
        let rep = commutator_check(model, f, &few, tol)?;
        comm = comm.max(rep.max_dev_e).max(rep.max_dev_e_star).max(rep.max_dev_z);
    }
    if !basis.matrices.is_empty() {
        out.check(Check::upper("rotation_brackets", comm, tol));
    }
    out.detail("samples", pts.len());
    out.detail("fields", fields.len());
    out.detail("centralizer_dim", basis.dim());
    out.detail("max_residual", worst);
    out.table = Some(table);
    Ok(out)
}

fn random_element(model: &Model, r: &mut ChaCha8Rng, kmax: i64) -> Result<Element, Error> {
    let m = model.fiber_dim();
    let u = HillSolution::new(model, random_vec(m, r, 1.0), random_vec(m, r, 1.0))?;
    Ok(Element::new(r.gen_range(-kmax..=kmax), r.gen_range(-2.0..2.0), u))
}

type Generators = Vec<(f64, HillSolution<f64>)>;

fn lattice_generators(model: &Model, config: &ModelConfig) -> Result<Option<Generators>, RunError> {
    let Some(vectors) = config.lattice_vectors::<f64>() else { return Ok(None) };
    vectors
        .into_iter()
        .map(|(r, u0, w0)| Ok((r, HillSolution::new(model, u0, w0)?)))
        .collect::<Result<Vec<_>, RunError>>()
        .map(Some)
}

pub fn group_verify(model: &Model, config: &ModelConfig, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let n = model.n();
    let m = model.fiber_dim();
    let cases = opts.trials(500);
    let mut r = rng(opts.seed, 5);
    let e = g_identity(model);
    let (mut assoc, mut inverse, mut action, mut isometry, mut bridge) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let (a, b, c) = (random_element(model, &mut r, 1)?, random_element(model, &mut r, 1)?, random_element(model, &mut r, 1)?);
        let ab = g_compose(&a, &b)?;
        assoc = assoc.max(g_compose(&ab, &c)?.distance(&g_compose(&a, &g_compose(&b, &c)?)?));
        let ai = g_inverse(&a)?;
        inverse = inverse.max(g_compose(&a, &ai)?.distance(&e)).max(g_compose(&ai, &a)?.distance(&e));
        let p = random_point(model, &mut r, 1.0, 2.0);
        let lhs = g_act(&a, &g_act(&b, &p)?)?;
        action = action.max((lhs.coords() - g_act(&ab, &p)?.coords()).amax());
        let x = Tangent64::from_components(p.clone(), random_vec(n, &mut r, 1.0).as_slice());
        let y = Tangent64::from_components(p.clone(), random_vec(n, &mut r, 1.0).as_slice());
        isometry = isometry.max(isometry_residual(&a, &[(p, x, y)])?);
        let (s1, s2) = (Element::new(0, a.x, a.u.clone()), Element::new(0, b.x, b.u.clone()));
        let lhs = heis_bridge(&g_compose(&s1, &s2)?)?;
        bridge = bridge.max(lhs.distance(&heis_mul(&heis_bridge(&s1)?, &heis_bridge(&s2)?)));
    }
    out.check(Check::upper("associativity", assoc, opts.tol(1e-8)));
    out.check(Check::upper("inverse", inverse, opts.tol(1e-8)));
    out.check(Check::upper("action_compatibility", action, opts.tol(1e-8)));
    out.check(Check::upper("isometry", isometry, opts.tol(1e-7)));
    out.check(Check::upper("heisenberg_bridge", bridge, opts.tol(1e-9)));

    let basis = centralizer_basis(model.a());
    if !basis.matrices.is_empty() {
        let mut worst = 0.0f64;
        let heis = |r: &mut ChaCha8Rng| HeisElement { a: random_vec(m, r, 2.0), b: random_vec(m, r, 2.0), c: r.gen_range(-2.0..2.0) };
        for _ in 0..cases {
            let f = basis.matrices.iter().fold(DMatrix::zeros(m, m), |acc, b| acc + b * r.gen_range(-2.0..2.0));
            let (h1, h2) = (heis(&mut r), heis(&mut r));
            let lhs = heis_mul(&pi_automorphism(model, &f, &h1)?, &pi_automorphism(model, &f, &h2)?);
            worst = worst.max(lhs.distance(&pi_automorphism(model, &f, &heis_mul(&h1, &h2))?));
        }
        out.check(Check::upper("rotation_automorphism", worst, opts.tol(1e-9)));
    }

    let mut table = Table::new(&["check", "cases", "max_residual"]);
    for (name, val) in [("associativity", assoc), ("inverse", inverse), ("action_compatibility", action), ("isometry", isometry), ("heisenberg_bridge", bridge)] {
        table.push(vec![name.to_string(), cases.to_string(), fmt(val)]);
    }

    if let Some(gens) = lattice_generators(model, config)? {
        let b0 = config
            .riccati_b0::<f64>()
            .ok_or_else(|| RunError::Config("/riccati_B0: required when a lattice is given".into()))?;
        match sigma_validate(&SigmaLattice { generators: gens.clone() }, &b0) {
            Ok(rep) => {
                out.check(Check::upper("lattice_omega", rep.max_omega, opts.tol(1e-8)));
                out.check(Check::upper("lattice_abelian", rep.max_commutator, opts.tol(1e-9)));
                out.check(Check::upper("lattice_in_lagrangian", rep.max_membership_residual, opts.tol(1e-8)));
                out.check(Check::exact("lattice_rank", (n - 1).saturating_sub(rep.rank)));
                out.detail("lattice", &rep);
            }
            Err(Error::RankDeficient { rank, generators }) => {
                out.check(Check::exact("lattice_rank", generators.max(n - 1) - rank));
                out.detail("lattice", serde_json::json!({"rank": rank, "generators": generators}));
            }
            Err(e) => return Err(e.into()),
        }
        // Commutativity over random integer combinations of the generators.
        let mut worst = 0.0f64;
        let elems: Vec<Element> = gens.iter().map(|(x, w)| Element::new(0, *x, w.clone())).collect();
        for _ in 0..cases.min(200) {
            let pick = |r: &mut ChaCha8Rng| elems[r.gen_range(0..elems.len())].clone();
            let (a, b) = (pick(&mut r), pick(&mut r));
            worst = worst.max(g_compose(&a, &b)?.distance(&g_compose(&b, &a)?));
            worst = worst.max(omega_initial(&a.u, &b.u)?.abs());
        }
        table.push(vec!["lattice_commutators".into(), cases.min(200).to_string(), fmt(worst)]);
    }
    out.detail("cases", cases);
    out.table = Some(table);
    Ok(out)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn holonomy_compute(model: &Model, config: &ModelConfig, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let n = model.n();
    let tol = 1e-10;
    let mut table = Table::new(&["transport", "row", "col", "value"]);
    let push = |table: &mut Table, label: &str, m: &DMatrix<f64>| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                table.push(vec![label.to_string(), i.to_string(), j.to_string(), fmt(m[(i, j)])]);
            }
        }
    };

    let mut period_dev = 0.0f64;
    let mut periods = serde_json::Map::new();
    for k in [1i64, 2, -1] {
        let gamma = Element::new(k, 0.0, HillSolution::zero(model));
        let t = quotient_transport(model, &gamma, tol)?;
        period_dev = period_dev.max(t.identity_residual());
        push(&mut table, &format!("period[{k}]"), &t.matrix);
        periods.insert(k.to_string(), serde_json::to_value(matrix_rows(&t.matrix)).unwrap_or_default());
    }
    out.check(Check::upper("period_generators_identity", period_dev, opts.tol(1e-8)));
    out.detail("period_transports", periods);

    if let Some(gens) = lattice_generators(model, config)? {
        let sigmas: Vec<Element> = gens.into_iter().map(|(x, w)| Element::new(0, x, w)).collect();
        let probe = sigmas.iter().find(|s| s.u.w0.amax() > 1e-3);
        let convention = match probe {
            Some(s) => resolve_sign_convention(model, s, tol)?.0,
            None => SignConvention::RowPlus,
        };
        let (mut dev, mut s_res, mut e_res) = (0.0f64, 0.0f64, 0.0f64);
        let mut mats = Vec::new();
        for (j, sigma) in sigmas.iter().enumerate() {
            let numeric = quotient_transport(model, sigma, tol)?;
            let closed = closed_form_transport(model, sigma, convention)?;
            dev = dev.max((&numeric.matrix - &closed.matrix).amax());
            s_res = s_res.max(numeric.s_residual());
            e_res = e_res.max(numeric.e_block_residual());
            push(&mut table, &format!("generator[{j}]"), &numeric.matrix);
            mats.push(matrix_rows(&numeric.matrix));
        }
        out.check(Check::upper("generators_match_closed_form", dev, opts.tol(1e-6)));
        out.check(Check::upper("generators_fix_null_direction", s_res, opts.tol(1e-9)));
        out.check(Check::upper("generators_orthogonal_block", e_res, opts.tol(1e-6)));
        out.detail("sign_convention", convention);
        out.detail("generator_transports", mats);
    }

    let rep = holonomy_sampler(model, opts.trials(50), 0.5, opts.seed)?;
    out.check(Check::upper("loops_fix_null_direction", rep.max_s_residual, opts.tol(SAMPLER_S_TOL)));
    out.check(Check::upper("loops_orthogonal_block", rep.max_e_block_residual, opts.tol(SAMPLER_E_TOL)));
    out.detail("contractible_loops", &rep);
    out.detail("dimension", n);
    out.table = Some(table);
    Ok(out)
}

/// Nullity of `F -> AF - FA` on skew matrices, from the SVD of its matrix.
fn centralizer_nullity(a: &DMatrix<f64>) -> usize {
    let m = a.nrows();
    let mut cols = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let mut f = DMatrix::zeros(m, m);
            f[(i, j)] = 1.0;
            f[(j, i)] = -1.0;
            cols.push(DVector::from_column_slice((a * &f - &f * a).as_slice()));
        }
    }
    if cols.is_empty() {
        return 0;
    }
    let map = DMatrix::from_columns(&cols);
    let scale = a.amax().max(1.0);
    cols.len() - map.svd(false, false).rank(1e-9 * scale)
}

pub fn dims(model: &Model, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let rep = isom0_dimension(model);
    let n = model.n();
    let nullity = centralizer_nullity(model.a());
    out.check(Check::exact("centralizer_dimension", rep.dim_s.abs_diff(nullity)));
    out.check(Check::exact("isometry_dimension", rep.dim_isom0.abs_diff(2 * n - 3 + nullity)));
    if model.mode() == Mode::Strict {
        out.check(Check::upper("trace_k_offset", rep.trace_k_residual, opts.tol(1e-12)));
    }
    let mut table = Table::new(&["n", "dim_s", "dim_isom0", "multiplicities"]);
    let mults: Vec<String> = rep.multiplicities.iter().map(|m| m.to_string()).collect();
    table.push(vec![n.to_string(), rep.dim_s.to_string(), rep.dim_isom0.to_string(), mults.join(" ")]);
    out.detail("dim_s", rep.dim_s);
    out.detail("dim_isom0", rep.dim_isom0);
    out.detail("multiplicities", &rep.multiplicities);
    out.detail("trace_k_nonconstant", rep.trace_k_nonconstant);
    out.table = Some(table);
    Ok(out)
}

/// Every suite in turn; check names are prefixed with the suite.
pub fn all(model: &Model, config: &ModelConfig, opts: &Options) -> RunResult {
    let mut out = Section::default();
    let mut table = Table::new(&["suite", "check", "status", "max_residual", "tolerance"]);
    let suites: [(&str, RunResult); 7] = [
        ("model", model_validate(model, opts)),
        ("curvature", curvature_verify(model, opts)),
        ("geodesic", geodesic_probe(model, opts)),
        ("killing", killing_verify(model, opts)),
        ("group", group_verify(model, config, opts)),
        ("holonomy", holonomy_compute(model, config, opts)),
        ("dims", dims(model, opts)),
    ];
    for (name, result) in suites {
        let section = result?;
        for mut c in section.checks {
            table.push(vec![
                name.to_string(),
                c.name.clone(),
                if c.passed() { "pass" } else { "fail" }.to_string(),
                fmt(c.max_residual),
                fmt(c.tolerance),
            ]);
            c.name = format!("{name}/{}", c.name);
            out.check(c);
        }
        out.details.insert(name.to_string(), serde_json::Value::Object(section.details));
    }
    out.table = Some(table);
    Ok(out)
}
