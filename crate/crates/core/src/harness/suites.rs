use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng as _;
use serde::Serialize;

use super::config::{CheckKind, FamilyConfig, GaussianDemoConfig, LatticeFamilyConfig, ScenarioConfig, VacuumSweepConfig};
use super::{CheckResult, Timed};
use crate::algebra::{class_norm, embed_observable, AlgebraElement};
use crate::error::{Error, Result};
use crate::factorized::{check_coherence, FactorizedFamily};
use crate::gaussian::verify::{verify_appendix_projection, verify_measure_product, verify_measure_triple, verify_triple_maps};
use crate::gaussian::{build_gaussian_family, GaussianModel, Variant};
use crate::label::{IndexSet, Label};
use crate::linalg;
use crate::rng;
use crate::scalar::CMat;
use crate::state::{duality_check, evaluate_net, evaluate_net_cross_checked, extend_state, project_state, DensityOperator, StateNet};
use crate::unitary::{Permutation, Unitary};
use crate::vacuum::{vacuum_trace, LatticeModelSpec};

type Fam = FactorizedFamily<f64>;

const FAMILY_CHECKS: &[CheckKind] =
    &[CheckKind::Coherence, CheckKind::Cocycle, CheckKind::Isometry, CheckKind::Duality, CheckKind::Surjectivity, CheckKind::Net];
const DUALITY_CHECKS: &[CheckKind] = &[CheckKind::Duality, CheckKind::Bell];
const GAUSSIAN_CHECKS: &[CheckKind] = &[CheckKind::MeasureProduct, CheckKind::TripleMaps, CheckKind::Appendix, CheckKind::Truncation];
const VACUUM_CHECKS: &[CheckKind] = &[CheckKind::Density, CheckKind::Control];

/// Largest lattice for which every triple is enumerated.
const EXHAUSTIVE_SITES: usize = 8;

fn build_family(cfg: &ScenarioConfig, default_sites: u32) -> Result<Fam> {
    let fam = match cfg.family.clone().unwrap_or(FamilyConfig::Lattice(LatticeFamilyConfig::with_sites(default_sites))) {
        FamilyConfig::Lattice(l) => Fam::lattice(l.universe(), l.local_dim)?,
        FamilyConfig::Gaussian(g) => build_gaussian_family::<f64>(g)?.0,
    };
    let fam = match cfg.tolerances.unitarity {
        Some(t) => fam.with_unitarity_tol(t),
        None => fam,
    };
    if cfg.fault.corrupt_phi {
        let (lo, hi) = corrupted_pair(&fam)?;
        let iso = fam.factor_iso(&lo, &hi)?;
        let n = iso.op.dim();
        let swap = Permutation::from_image((0..n).map(|i| if i < 2 { 1 - i } else { i }).collect())?;
        return fam.with_replaced_iso(&lo, &hi, Unitary::Permutation(swap).compose(&iso.op));
    }
    Ok(fam)
}

fn corrupted_pair(fam: &Fam) -> Result<(Label, Label)> {
    let u = fam.directed().universe().as_slice().to_vec();
    if u.len() < 2 {
        return Err(Error::Config("fault injection needs at least two sites".into()));
    }
    let d = fam.directed();
    Ok((d.label(IndexSet::new(vec![u[0]])), d.label(IndexSet::new(vec![u[0], u[1]]))))
}

fn random_density(fam: &Fam, level: &Label, max_rank: usize, g: &mut rng::Rng) -> Result<DensityOperator<f64>> {
    let dim = fam.dim(level)?;
    let rank = g.random_range(1..=max_rank.max(1).min(dim));
    Ok(DensityOperator::random(level.clone(), dim, rank, g))
}

fn random_element(fam: &Fam, level: &Label, g: &mut rng::Rng) -> Result<AlgebraElement<f64>> {
    let dim = fam.dim(level)?;
    AlgebraElement::new(fam, level.clone(), linalg::complex_gaussian(dim, dim, g))
}

fn max(a: f64, b: f64) -> f64 {
    if b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Serialize)]
struct CoherenceSummary {
    triples: usize,
    exhaustive: bool,
    trivial_labels: usize,
    max_unitarity_defect: f64,
    worst: Option<(Label, Label, Label)>,
}

fn coherence(cfg: &ScenarioConfig, fam: &Fam) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.coherence, 1e-12);
    let d = fam.directed();
    let exhaustive = cfg.samples.coherence == 0 && d.universe().len() <= EXHAUSTIVE_SITES;
    let mut triples = if exhaustive { d.all_triples() } else { d.sample_triples(cfg.samples.coherence.max(200), cfg.seed()) };
    if cfg.fault.corrupt_phi && !exhaustive {
        let (lo, hi) = corrupted_pair(fam)?;
        triples.push((lo.clone(), hi.clone(), d.top()));
        triples.push((d.bottom(), lo, hi));
    }
    let rep = check_coherence(fam, &triples, tol)?;
    let summary = CoherenceSummary {
        triples: rep.triples.len(),
        exhaustive,
        trivial_labels: rep.trivial.len(),
        max_unitarity_defect: rep.max_unitarity_defect,
        worst: rep.worst.clone(),
    };
    let mut res = CheckResult::new("coherence", rep.max_diagram_defect, tol, rep.triples.len()).require(rep.passed);
    if !rep.passed {
        if let Some((a, b, c)) = &rep.worst {
            res = res.with_message(format!("worst triple {a} ≤ {b} ≤ {c}"));
        }
    }
    Ok(res.with_detail(&summary))
}

fn cocycle(cfg: &ScenarioConfig, fam: &Fam) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.cocycle, 1e-12);
    let triples = fam.directed().sample_triples(cfg.samples.cocycle, cfg.seed());
    let mut g = rng::stream(cfg.seed(), "harness/cocycle");
    let (mut emb, mut proj) = (0.0f64, 0.0f64);
    for (lo, mid, hi) in &triples {
        let a = random_element(fam, lo, &mut g)?;
        let two_step = embed_observable(fam, &embed_observable(fam, &a, mid)?, hi)?;
        let direct = embed_observable(fam, &a, hi)?;
        emb = max(emb, linalg::max_abs_diff(&two_step.matrix, &direct.matrix));
        let rho = random_density(fam, hi, cfg.samples.max_rank, &mut g)?;
        let two_step = project_state(fam, &project_state(fam, &rho, mid)?, lo)?;
        let direct = project_state(fam, &rho, lo)?;
        proj = max(proj, linalg::max_abs_diff(two_step.matrix(), direct.matrix()));
    }
    #[derive(Serialize)]
    struct Detail {
        embedding: f64,
        projection: f64,
    }
    Ok(CheckResult::new("cocycle", emb.max(proj), tol, triples.len()).with_detail(&Detail { embedding: emb, projection: proj }))
}

fn isometry(cfg: &ScenarioConfig, fam: &Fam) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.isometry, 1e-10);
    let pairs = fam.directed().sample_pairs(cfg.samples.isometry, cfg.samples.max_dense_sites, cfg.seed());
    let mut g = rng::stream(cfg.seed(), "harness/isometry");
    let mut worst = 0.0f64;
    for (lo, hi) in &pairs {
        let a = random_element(fam, lo, &mut g)?;
        let e = embed_observable(fam, &a, hi)?;
        worst = max(worst, (class_norm(&a) - class_norm(&e)).abs());
    }
    Ok(CheckResult::new("isometry", worst, tol, pairs.len()))
}

fn duality(cfg: &ScenarioConfig, fam: &Fam) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.duality, 1e-10);
    let sites = fam.directed().universe().len();
    let pairs = fam.directed().sample_pairs(cfg.samples.duality, sites, cfg.seed());
    let mut g = rng::stream(cfg.seed(), "harness/duality");
    let mut worst = 0.0f64;
    let mut largest = 0usize;
    for (lo, hi) in &pairs {
        let rho = random_density(fam, hi, cfg.samples.max_rank, &mut g)?;
        let a = random_element(fam, lo, &mut g)?;
        worst = max(worst, duality_check(fam, &rho, &a)?);
        largest = largest.max(hi.size());
    }
    #[derive(Serialize)]
    struct Detail {
        largest_level: usize,
    }
    Ok(CheckResult::new("duality", worst, tol, pairs.len()).with_detail(&Detail { largest_level: largest }))
}

fn surjectivity(cfg: &ScenarioConfig, fam: &Fam) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.surjectivity, 1e-12);
    let sites = fam.directed().universe().len();
    let pairs = fam.directed().sample_pairs(cfg.samples.surjectivity, sites, cfg.seed());
    let mut g = rng::stream(cfg.seed(), "harness/surjectivity");
    let mut worst = 0.0f64;
    for (lo, hi) in &pairs {
        let rho = random_density(fam, lo, cfg.samples.max_rank, &mut g)?;
        let cd = fam.dim(hi)? / fam.dim(lo)?;
        let filler = DensityOperator::random(lo.clone(), cd, g.random_range(1..=cd.min(cfg.samples.max_rank.max(1))), &mut g);
        let ext = extend_state(fam, &rho, hi, &filler)?;
        let back = project_state(fam, &ext, lo)?;
        worst = max(worst, linalg::max_abs_diff(back.matrix(), rho.matrix()));
    }
    Ok(CheckResult::new("surjectivity", worst, tol, pairs.len()))
}

fn net(cfg: &ScenarioConfig, fam: &Fam) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.net, 1e-10);
    let unit_tol = cfg.tolerance(cfg.tolerances.unit, 1e-12);
    let d = fam.directed();
    let chains = d.sample_chains(cfg.samples.net, 3, cfg.seed());
    let mut g = rng::stream(cfg.seed(), "harness/net");
    let (mut spread, mut unit) = (0.0f64, 0.0f64);
    let mut evaluations = 0usize;
    for chain in &chains {
        let top = chain.last().expect("chains are nonempty");
        let rho = random_density(fam, top, cfg.samples.max_rank, &mut g)?;
        let mut entries = vec![rho.clone()];
        for l in &chain[..chain.len() - 1] {
            entries.push(project_state(fam, &rho, l)?);
        }
        let net = StateNet::explicit(entries)?;
        let sub: Vec<u32> = chain[0].indices().iter().filter(|_| g.random_bool(0.5)).collect();
        let level = d.label(IndexSet::new(sub));
        let a = random_element(fam, &level, &mut g)?;
        let (_, s) = evaluate_net_cross_checked(fam, &net, &a)?;
        spread = max(spread, s);
        let one = evaluate_net(fam, &net, &AlgebraElement::unit(fam)?)?;
        unit = max(unit, (one - linalg::one::<f64>()).norm());
        evaluations += 1;
    }
    #[derive(Serialize)]
    struct Detail {
        unit_defect: f64,
        unit_tolerance: f64,
    }
    Ok(CheckResult::new("net", spread, tol, evaluations)
        .require(unit <= unit_tol)
        .with_detail(&Detail { unit_defect: unit, unit_tolerance: unit_tol }))
}

fn bell(cfg: &ScenarioConfig) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.bell, 1e-14);
    let fam = Fam::lattice(IndexSet::range(0, 2), 2)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [h, 0.0, 0.0, h].map(|x| num_complex::Complex::new(x, 0.0));
    let rho = DensityOperator::pure(fam.directed().top(), &psi)?;
    let reduced = project_state(&fam, &rho, &fam.directed().label(IndexSet::new(vec![0])))?;
    let half: CMat<f64> = linalg::identity::<f64>(2).map(|z| z * 0.5);
    Ok(CheckResult::new("bell", linalg::max_abs_diff(reduced.matrix(), &half), tol, 1))
}

pub(super) fn verify_family(cfg: &ScenarioConfig, t: &mut Timed) -> Result<()> {
    let fam = build_family(cfg, 6)?;
    let want = |k| cfg.wants(k, FAMILY_CHECKS);
    if want(CheckKind::Coherence) {
        t.run("coherence", || coherence(cfg, &fam))?;
    }
    if want(CheckKind::Cocycle) {
        t.run("cocycle", || cocycle(cfg, &fam))?;
    }
    if want(CheckKind::Isometry) {
        t.run("isometry", || isometry(cfg, &fam))?;
    }
    if want(CheckKind::Duality) {
        t.run("duality", || duality(cfg, &fam))?;
    }
    if want(CheckKind::Surjectivity) {
        t.run("surjectivity", || surjectivity(cfg, &fam))?;
    }
    if want(CheckKind::Net) {
        t.run("net", || net(cfg, &fam))?;
    }
    if want(CheckKind::Bell) {
        t.run("bell", || bell(cfg))?;
    }
    Ok(())
}

pub(super) fn duality_test(cfg: &ScenarioConfig, t: &mut Timed) -> Result<()> {
    let fam = build_family(cfg, 10)?;
    if cfg.wants(CheckKind::Duality, DUALITY_CHECKS) {
        t.run("duality", || duality(cfg, &fam))?;
    }
    if cfg.wants(CheckKind::Bell, DUALITY_CHECKS) {
        t.run("bell", || bell(cfg))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GaussianRow {
    truncation: usize,
    quadrature_order: usize,
    unitarity_max: Option<f64>,
    unitarity_probe: f64,
    diagram_max: Option<f64>,
    diagram_probe: f64,
    point_defect_float: f64,
    appendix_difference: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub(super) fn gaussian_demo(cfg: &ScenarioConfig, t: &mut Timed, tables: &mut BTreeMap<String, String>) -> Result<()> {
    let g = cfg.gaussian.clone().unwrap_or_default();
    let c = g.coords.as_slice();
    if c.len() < 3 {
        return Err(Error::Config("the Gaussian demo needs at least three coordinates".into()));
    }
    let k0 = IndexSet::new(vec![c[0]]);
    let k1 = IndexSet::new(vec![c[0], c[1]]);
    let k2 = IndexSet::new(c[..3].to_vec());
    let exact = matches!(g.variant, Variant::AxisAligned);
    let want = |k| cfg.wants(k, GAUSSIAN_CHECKS);

    if want(CheckKind::MeasureProduct) {
        t.run("measure_product", || measure_check(cfg, &g, exact, (&k0, &k1, &k2)))?;
    }

    let mut rows = Vec::new();
    let mut maps_ok = true;
    let mut maps_worst = 0.0f64;
    let mut app_worst = 0.0f64;
    let mut app_ok = true;
    let mut app_reports = Vec::new();
    let points_tol = cfg.tolerance(cfg.tolerances.points, 1e-12);
    let diagram_tol = cfg.tolerance(cfg.tolerances.coherence, 1e-12);
    let app_tol = cfg.tolerance(cfg.tolerances.appendix, if exact { 1e-12 } else { 1e-6 });
    let need_maps = want(CheckKind::TripleMaps) || want(CheckKind::Truncation);
    let start = std::time::Instant::now();
    for &n in &g.truncations {
        let (fam, model) = build_gaussian_family::<f64>(g.spec(n))?;
        let tri = if need_maps { Some(verify_triple_maps(&model, &k0, &k1, &k2, g.points, cfg.seed())?) } else { None };
        if let Some(r) = &tri {
            let ok = r.structure.passed()
                && r.point_defect_exact == 0.0
                && r.point_defect_float <= points_tol
                && (!exact || r.diagram_max.is_some_and(|d| d <= diagram_tol));
            maps_ok &= ok;
            maps_worst = max(maps_worst, r.point_defect_float);
        }
        let app = if want(CheckKind::Appendix) {
            let r = verify_appendix_projection(&fam, &model, &k0, &k1, g.appendix_samples, cfg.seed())?;
            // the truncated Φ is only unitary on low modes, so the product
            // round trip is exact only for the axis-aligned model
            app_ok &= !exact || r.product_defect <= app_tol;
            app_worst = max(app_worst, r.max_trace_norm_difference);
            let d = r.max_trace_norm_difference;
            app_reports.push(r);
            Some(d)
        } else {
            None
        };
        if let Some(r) = tri {
            let u = r.unitarity.iter().find(|u| u.map == "pair_mid_lo").expect("pair entry");
            rows.push(GaussianRow {
                truncation: n,
                quadrature_order: r.quadrature_order,
                unitarity_max: u.max,
                unitarity_probe: u.probe,
                diagram_max: r.diagram_max,
                diagram_probe: r.diagram_probe,
                point_defect_float: r.point_defect_float,
                appendix_difference: app,
            });
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if want(CheckKind::TripleMaps) {
        t.run("triple_maps", || {
            Ok(CheckResult::new("triple_maps", maps_worst, points_tol, g.truncations.len()).require(maps_ok))
        })?;
        t.timings.insert("triple_maps".into(), elapsed);
    }
    if want(CheckKind::Appendix) {
        t.run("appendix", || {
            Ok(CheckResult::new("appendix", app_worst, app_tol, g.truncations.len() * g.appendix_samples)
                .require(app_ok)
                .with_detail(&app_reports))
        })?;
    }
    if want(CheckKind::Truncation) {
        t.run("truncation", || {
            let up: Vec<f64> = rows.iter().map(|r| r.unitarity_probe).collect();
            let dp: Vec<f64> = rows.iter().map(|r| r.diagram_probe).collect();
            let worst = up.iter().chain(&dp).fold(0.0f64, |a, &b| max(a, b));
            let res = if exact {
                CheckResult::new("truncation", worst, diagram_tol, rows.len()).with_message("exact permutations")
            } else {
                let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
                let ok = dec(&up) && dec(&dp);
                let last = up.last().copied().unwrap_or(0.0).max(dp.last().copied().unwrap_or(0.0));
                let first = up.first().copied().unwrap_or(0.0).max(dp.first().copied().unwrap_or(0.0));
                CheckResult::new("truncation", last, first, rows.len())
                    .require(ok)
                    .with_message(if ok { "probe defects strictly decreasing in N" } else { "probe defects not strictly decreasing in N" })
            };
            Ok(res.with_detail(&rows))
        })?;
    }
    if !rows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "N",
            "quadrature_order",
            "unitarity_max",
            "unitarity_probe",
            "diagram_max",
            "diagram_probe",
            "point_defect",
            "appendix_difference",
        ])?;
        for r in &rows {
            w.write_record([
                r.truncation.to_string(),
                r.quadrature_order.to_string(),
                opt(r.unitarity_max),
                format!("{:e}", r.unitarity_probe),
                opt(r.diagram_max),
                format!("{:e}", r.diagram_probe),
                format!("{:e}", r.point_defect_float),
                opt(r.appendix_difference),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        tables.insert("gaussian_truncation.csv".into(), String::from_utf8_lossy(&bytes).into_owned());
    }
    Ok(())
}

fn measure_check(
    cfg: &ScenarioConfig,
    g: &GaussianDemoConfig,
    exact: bool,
    (k0, k1, k2): (&IndexSet, &IndexSet, &IndexSet),
) -> Result<CheckResult> {
    let tol = cfg.tolerance(cfg.tolerances.measure, if exact { 1e-12 } else { 1e-8 });
    let n = g.truncations[0];
    let model = GaussianModel::<f64>::new(g.spec(n))?;
    let order = g.measure_order.max(n);
    let reports = vec![
        verify_measure_product(&model, k0, k1, order, g.measure_degree)?,
        verify_measure_product(&model, k1, k2, order, g.measure_degree)?,
        verify_measure_triple(&model, k0, k1, k2, order, g.measure_degree)?,
    ];
    let worst = reports.iter().fold(0.0f64, |a, r| max(a, r.max_discrepancy));
    let count = reports.iter().map(|r| r.identities.len()).sum();
    Ok(CheckResult::new("measure_product", worst, tol, count).with_detail(&reports))
}

pub(super) fn vacuum_sweep(
    cfg: &ScenarioConfig,
    t: &mut Timed,
    tables: &mut BTreeMap<String, String>,
    artifacts: &mut BTreeMap<String, String>,
) -> Result<()> {
    let v: VacuumSweepConfig = cfg.vacuum.clone().unwrap_or_default();
    let (level, chains) = v.resolve()?;
    let spec = LatticeModelSpec::tfi(v.coupling, v.field).map_err(|e| Error::Config(e.to_string()))?;
    let universe = chains.iter().fold(level.clone(), |acc, c| acc.union(c));
    let fam = Arc::new(Fam::lattice(universe, 2)?);
    let label = fam.directed().label(level);
    let chain: Vec<Label> = chains.into_iter().map(|c| fam.directed().label(c)).collect();
    let start = std::time::Instant::now();
    let trace = vacuum_trace(&*fam, &spec, &label, &chain, v.dim_budget)?;
    t.timings.insert("vacuum_trace".into(), start.elapsed().as_secs_f64());

    let mut csv_bytes = Vec::new();
    trace.write_csv(&mut csv_bytes)?;
    tables.insert("vacuum_trace.csv".into(), String::from_utf8_lossy(&csv_bytes).into_owned());
    artifacts.insert("vacuum_trace.json".into(), serde_json::to_string_pretty(&trace)?);

    #[derive(Serialize)]
    struct Summary<'a> {
        metric: &'a str,
        lengths: Vec<usize>,
        energies: Vec<f64>,
        distances: &'a [f64],
        last_below_first: Option<bool>,
    }
    let summary = Summary {
        metric: trace.metric,
        lengths: trace.points.iter().map(|p| p.sites).collect(),
        energies: trace.points.iter().map(|p| p.energy).collect(),
        distances: &trace.distances,
        last_below_first: (trace.distances.len() >= 2).then(|| trace.distances[trace.distances.len() - 1] < trace.distances[0]),
    };
    let control = spec.coupling == 0.0 || spec.field == 0.0;
    if cfg.wants(CheckKind::Density, VACUUM_CHECKS) {
        let tol = cfg.tolerance(cfg.tolerances.density, 1e-10);
        // away from the controls the successive distances must shrink at least once
        let decays = control || summary.last_below_first != Some(false);
        t.run("density", || {
            let res = CheckResult::new("density", trace.density_defect, tol, trace.points.len()).require(decays);
            let res = if decays { res } else { res.with_message("last successive distance is not below the first") };
            Ok(res.with_detail(&summary))
        })?;
    }
    if control && cfg.wants(CheckKind::Control, VACUUM_CHECKS) {
        let tol = cfg.tolerance(cfg.tolerances.control, 1e-12);
        let worst = trace.distances.iter().fold(0.0f64, |a, &b| max(a, b));
        t.run("control", || {
            Ok(CheckResult::new("control", worst, tol, trace.distances.len()).with_message("uncoupled or classical chain"))
        })?;
    }
    Ok(())
}
