//! Task execution.

use std::time::Instant;

use num_rational::BigRational;
use osc_core::functionals::{
    log_log_slope, log_norm_derivative, mabuchi_expansion_check, FibrationContext, FunctionalReport, PathKind,
    PotentialPath,
};
use osc_core::geodesics::{
    convexity_check, flow_geodesic, geodesic_residual, sectional_curvature, FiberTangent, HolomorphySection,
    Su2Slice,
};
use osc_core::geometry::{fiber_scalar_curvature, resolved_mask, RESOLVED_FRACTION};
use osc_core::slope::{
    calibration_factor, deligne_slope_check, improves_under_refinement, slope_limit_with, w1_f64,
};
use osc_core::stability::{shipped_specs, spec_report};
use osc_core::{FibrationModel, LogGrid, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::plot::{Reference, Series};
use crate::report::{RunReport, Status, Table, TaskReport, Value};
use crate::scenario::{Expect, Scenario, TaskConfig, TaskKind, Tolerances};

/// What a task body produces.
struct Outcome {
    passed: bool,
    values: Vec<(String, Value)>,
    table: Table,
    series: Option<Series>,
}

type TaskResult = osc_core::Result<Outcome>;

fn kv(k: &str, v: impl Into<Value>) -> (String, Value) {
    (k.to_string(), v.into())
}

/// Observed convergence order of errors at the given node counts.
fn observed_order(nodes: &[usize], errors: &[f64]) -> f64 {
    let ns: Vec<f64> = nodes.iter().map(|&n| n as f64).collect();
    -log_log_slope(&ns, errors)
}

fn with_nodes(model: &FibrationModel, ns: usize, nt: usize) -> osc_core::Result<FibrationModel> {
    let g = model.grid;
    let mut grid = LogGrid::new(g.s_range, g.t_range, ns, nt, g.stencil_order)?;
    grid.closure = g.closure;
    Ok(model.with_grid(grid))
}

/// Run every task in declaration order.
pub fn run(scenario: &Scenario) -> RunReport {
    let g = &scenario.model.grid;
    let mut metadata = vec![
        ("schema_version".to_string(), scenario.schema_version.to_string()),
        ("model".to_string(), format!("a = {}, base_volume = {}", scenario.model.a, scenario.model.base_volume)),
        (
            "grid".to_string(),
            format!("s in [-{}, {}], t in [-{}, {}], {} x {} nodes, order {}", g.s_range, g.s_range, g.t_range, g.t_range, g.ns, g.nt, g.order),
        ),
    ];
    for (k, v) in scenario.tolerances.entries() {
        metadata.push((format!("tolerance.{k}"), format!("{v:e}")));
    }
    let tasks = scenario.tasks.iter().map(|t| run_task(scenario, t)).collect();
    RunReport { scenario: scenario.name.clone().unwrap_or_default(), metadata, tasks }
}

pub fn run_task(scenario: &Scenario, task: &TaskConfig) -> TaskReport {
    let start = Instant::now();
    let tol = &scenario.tolerances;
    let result = scenario.model_for(task).and_then(|model| match task.kind {
        TaskKind::ScalarCurvature => scalar_curvature_task(scenario, task, &model, tol),
        TaskKind::GeodesicResidual => residual_task(scenario, task, &model, tol),
        TaskKind::Convexity => convexity_task(scenario, task, &model, tol),
        TaskKind::LogNormDuality => duality_task(scenario, task, &model, tol),
        TaskKind::MabuchiExpansion => expansion_task(scenario, task, &model, tol),
        TaskKind::Stability => stability_task(scenario, task),
        TaskKind::SlopeLimit => slope_task(scenario, task, &model, tol),
        TaskKind::DeligneSlope => deligne_task(scenario, task, &model, tol),
        TaskKind::SectionalCurvature => curvature_task(task, &model, tol),
    });
    let (status, values, table, series) = match result {
        Ok(o) => (if o.passed { Status::Pass } else { Status::Fail }, o.values, o.table, o.series),
        Err(e) => (Status::Error, vec![kv("error", e.to_string())], Table::new(vec!["error"]), None),
    };
    TaskReport {
        name: task.name.clone(),
        kind: task.kind.tag(),
        acceptance: task.acceptance,
        status,
        values,
        table,
        series,
        elapsed: start.elapsed(),
    }
}

fn scalar_curvature_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let nodes = sc.refinement_or(task, &[64, 128, 256]);
    let mut table = Table::new(vec!["nodes", "max_error", "max_error_unmasked"]);
    let mut errors = Vec::new();
    for &n in &nodes {
        let m = with_nodes(model, model.grid.ns, n)?;
        let w = m.omega_x();
        let s = fiber_scalar_curvature(&w)?;
        let mask = resolved_mask(&w, RESOLVED_FRACTION);
        let (mut masked, mut full) = (0.0f64, 0.0f64);
        for (v, keep) in s.values().iter().zip(&mask) {
            let d = (v - 2.0).abs();
            full = full.max(d);
            if *keep {
                masked = masked.max(d);
            }
        }
        table.push(vec![n.into(), masked.into(), full.into()]);
        errors.push(masked);
    }
    let order = observed_order(&nodes, &errors);
    let last = *errors.last().expect("validated node list");
    let pts = nodes.iter().zip(&errors).map(|(&n, &e)| (n as f64, e)).collect();
    let mut series = Series::new("fiber scalar curvature error", "fiber nodes", "max |S - 2|", pts);
    series.log_log = true;
    Ok(Outcome {
        passed: last <= tol.scalar_curvature && order >= tol.scalar_curvature_order,
        values: vec![kv("max_error", last), kv("order", order)],
        table,
        series: Some(series),
    })
}

fn section_for(sc: &Scenario, task: &TaskConfig, m: &FibrationModel) -> osc_core::Result<HolomorphySection> {
    let cfg = &sc.sections[task.section.as_ref().expect("validated")];
    HolomorphySection::from_fn(&m.omega_x(), cfg.coefficient())
}

fn residual_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let nodes = sc.refinement_or(task, &[64, 128, 256]);
    let (horizon, steps) = (task.horizon.unwrap_or(1.0), task.steps.unwrap_or(16));
    let mut table = Table::new(vec!["nodes", "residual", "straight_line_residual"]);
    let (mut res, mut lines) = (Vec::new(), Vec::new());
    for &n in &nodes {
        let m = with_nodes(model, n, n)?;
        let geo = flow_geodesic(&m, &section_for(sc, task, &m)?, horizon, steps)?;
        let r = geodesic_residual(&geo.path, &m.omega_x())?.max();
        let line = PotentialPath::straight_line(geo.end(), steps)?;
        let l = geodesic_residual(&line, &m.omega_x())?.max();
        table.push(vec![n.into(), r.into(), l.into()]);
        res.push(r);
        lines.push(l);
    }
    let order = observed_order(&nodes, &res);
    let (last, line) = (*res.last().expect("nodes"), *lines.last().expect("nodes"));
    let pts = nodes.iter().zip(&res).map(|(&n, &e)| (n as f64, e)).collect();
    let mut series = Series::new("geodesic equation residual", "nodes per axis", "sup residual", pts);
    series.log_log = true;
    Ok(Outcome {
        passed: last <= tol.residual && order >= tol.residual_order && line >= 100.0 * last,
        values: vec![kv("residual", last), kv("order", order), kv("straight_line_residual", line)],
        table,
        series: Some(series),
    })
}

fn convexity_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let (horizon, steps) = (task.horizon.unwrap_or(1.0), task.steps.unwrap_or(8));
    let geo = flow_geodesic(model, &section_for(sc, task, model)?, horizon, steps)?;
    let ctx = FibrationContext::new(model)?;
    let rep = convexity_check(&geo, &ctx, tol.convexity)?;
    let mut table = Table::new(vec!["time", "N", "second_difference", "r_norm2"]);
    let last = rep.times.len() - 1;
    for (i, (&t, &n)) in rep.times.iter().zip(&rep.n_values).enumerate() {
        let d2 = if i == 0 || i == last { Value::Text(String::new()) } else { rep.second_differences[i - 1].into() };
        table.push(vec![t.into(), n.into(), d2, rep.r_norm2[i].into()]);
    }
    let expect = task.expect.unwrap_or(Expect::Convex);
    let passed = match expect {
        Expect::Convex => rep.convex(),
        Expect::StrictlyConvex => rep.convex() && !rep.affine(),
        Expect::Affine => rep.affine() && rep.max_r_norm2() <= tol.convexity,
    };
    let pts = rep.times.iter().cloned().zip(rep.n_values.iter().cloned()).collect();
    Ok(Outcome {
        passed,
        values: vec![
            kv("min_second_difference", rep.min_second_difference()),
            kv("max_abs_second_difference", rep.max_abs_second_difference()),
            kv("max_r_norm2", rep.max_r_norm2()),
            kv("convex", rep.convex()),
            kv("affine", rep.affine()),
        ],
        table,
        series: Some(Series::new("log-norm functional along the geodesic", "t", "N", pts)),
    })
}

fn potential_path(sc: &Scenario, task: &TaskConfig, m: &FibrationModel, steps: usize) -> osc_core::Result<PotentialPath> {
    let cfg = &sc.potentials[task.potential.as_ref().expect("validated")];
    PotentialPath::from_fn(0.0, 1.0, steps, PathKind::Custom, |t| {
        let (delta, base) = cfg.at(t);
        Ok(m.fiber_shift_potential(delta, base))
    })
}

fn duality_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let path = potential_path(sc, task, model, task.steps.unwrap_or(16))?;
    let ctx = FibrationContext::new(model)?;
    let closed = FunctionalReport::along_path(&path, &ctx)?;
    let along = log_norm_derivative(&path, &ctx)?;
    let mut table = Table::new(vec!["time", "H_tilde", "R_tilde", "I_tilde", "J_tilde", "N", "dN_dt", "N_integrated"]);
    for (i, row) in closed.rows.iter().enumerate() {
        let opt = |v: Option<f64>| v.map_or(Value::Text(String::new()), Value::Float);
        table.push(vec![
            row.time.into(),
            opt(row.h_tilde),
            opt(row.r_tilde),
            opt(row.i_tilde),
            opt(row.j_tilde),
            opt(row.n),
            along.derivative[i].into(),
            along.integral[i].into(),
        ]);
    }
    let end = closed.rows.last().and_then(|r| r.n).unwrap_or(0.0);
    let defect = (end - along.total).abs() / (1.0 + end.abs());
    let pts = closed.rows.iter().map(|r| (r.time, r.n.unwrap_or(0.0))).collect();
    Ok(Outcome {
        passed: defect <= tol.duality,
        values: vec![kv("N_closed", end), kv("N_integrated", along.total), kv("relative_defect", defect)],
        table,
        series: Some(Series::new("log-norm functional along the path", "t", "N", pts)),
    })
}

fn expansion_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let ks = task.ks.clone().unwrap_or_else(|| vec![8.0, 16.0, 32.0, 64.0]);
    let cfg = &sc.potentials[task.potential.as_ref().expect("validated")];
    let (delta, base) = cfg.at(1.0);
    let phi = model.fiber_shift_potential(delta, base);
    let r = mabuchi_expansion_check(&phi, model, &ks)?;
    let mut table = Table::new(vec!["k", "M_k", "residual"]);
    for i in 0..ks.len() {
        table.push(vec![ks[i].into(), r.m_k[i].into(), r.residuals[i].into()]);
    }
    let rel = r.relative_n_error();
    let pts = ks.iter().zip(&r.residuals).map(|(&k, &e)| (k, e.abs())).collect();
    let mut series = Series::new("Mabuchi expansion residual", "k", "|M_k - kF - N|", pts);
    series.log_log = true;
    Ok(Outcome {
        passed: rel <= tol.expansion && (r.residual_slope + 1.0).abs() <= tol.expansion_slope,
        values: vec![
            kv("fitted_N", r.fitted_n),
            kv("closed_N", r.closed_n),
            kv("relative_error", rel),
            kv("residual_slope", r.residual_slope),
        ],
        table,
        series: Some(series),
    })
}

fn stability_task(sc: &Scenario, task: &TaskConfig) -> TaskResult {
    let specs: Vec<_> = match &task.specs {
        Some(names) => names.iter().map(|n| sc.resolve_spec(n).expect("validated")).collect(),
        None => shipped_specs().into_iter().chain(sc.specs.keys().filter_map(|n| sc.resolve_spec(n))).collect(),
    };
    let mut table = Table::new(vec![
        "spec",
        "product",
        "W0",
        "W1",
        "C1",
        "C2",
        "C3",
        "W0_fit",
        "W1_fit",
        "W0_fiber",
        "minimum_norm",
        "consistent",
    ]);
    let mut consistent = 0;
    for s in &specs {
        let r = spec_report(s)?;
        let ok = r.consistent();
        consistent += ok as usize;
        let i = r.intersection;
        table.push(vec![
            r.name.into(),
            r.product.into(),
            i.w0.into(),
            i.w1.into(),
            i.c1.into(),
            i.c2.into(),
            i.c3.into(),
            r.expansion.w0.into(),
            r.expansion.w1.into(),
            r.w0_fiber.into(),
            r.minimum_norm.into(),
            ok.into(),
        ]);
    }
    Ok(Outcome {
        passed: consistent == specs.len(),
        values: vec![kv("specs", specs.len()), kv("consistent", consistent)],
        table,
        series: None,
    })
}

fn slope_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let spec = sc.resolve_spec(task.spec.as_ref().expect("validated")).expect("validated");
    let kappa = calibration_factor(&model.grid)?;
    let rep = slope_limit_with(&spec, model, kappa, tol.slope)?;
    let mut table = Table::new(vec!["time", "N"]);
    for (&t, &n) in rep.times.iter().zip(&rep.n_values) {
        table.push(vec![t.into(), n.into()]);
    }
    let mut values = vec![
        kv("method", rep.method.tag()),
        kv("nodes", rep.nodes),
        kv("calibration", rep.calibration),
        kv("raw_slope", rep.raw_slope),
        kv("slope", rep.slope),
        kv("calibrated_slope", rep.calibrated_slope()),
        kv("W1", rep.w1.clone()),
        kv("deviation", rep.deviation),
    ];
    let mut passed = rep.passed();
    if let Some(nodes) = task.nodes.clone().or_else(|| sc.refinement.clone()) {
        let reps = nodes
            .iter()
            .map(|&n| slope_limit_with(&spec, &with_nodes(model, n, n)?, kappa, tol.slope))
            .collect::<osc_core::Result<Vec<_>>>()?;
        for r in &reps {
            values.push(kv(&format!("deviation@{}", r.nodes), r.deviation));
        }
        let improves = improves_under_refinement(&reps);
        values.push(kv("improves_under_refinement", improves));
        passed &= improves;
    }
    // the exact slope in the ray's own units, through the last sample
    let w1 = w1_f64(&spec)?;
    let (t_last, n_last) = (*rep.times.last().expect("samples"), *rep.n_values.last().expect("samples"));
    let slope = w1 / rep.calibration;
    let mut series = Series::new(
        format!("log-norm functional along the ray of {}", rep.spec),
        "t",
        "N",
        rep.times.iter().cloned().zip(rep.n_values.iter().cloned()).collect(),
    );
    series.reference = Some(Reference {
        slope,
        intercept: n_last - slope * t_last,
        label: format!("W1 = {}", Value::from(rep.w1.clone())),
    });
    Ok(Outcome { passed, values, table, series: Some(series) })
}

fn deligne_task(sc: &Scenario, task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let spec = sc.resolve_spec(task.spec.as_ref().expect("validated")).expect("validated");
    let rep = deligne_slope_check(&spec, model)?;
    let mut table = Table::new(vec!["component", "slope", "exact", "deviation"]);
    for c in &rep.components {
        table.push(vec![c.name.into(), c.slope.into(), c.exact.clone().into(), c.deviation.into()]);
    }
    let passed = rep.components.iter().all(|c| c.deviation <= tol.slope);
    Ok(Outcome {
        passed,
        values: vec![
            kv("method", rep.method.tag()),
            kv("total_slope", rep.total_slope),
            kv("W1", rep.w1.clone()),
            kv("additivity_defect", rep.additivity_defect()),
        ],
        table,
        series: None,
    })
}

fn tangent(n: usize, base: impl Fn(usize) -> f64, h: impl Fn(usize) -> [f64; 3]) -> FiberTangent {
    FiberTangent { base: (0..n).map(base).collect(), harmonic: (0..n).map(h).collect() }
}

fn curvature_task(task: &TaskConfig, model: &FibrationModel, tol: &Tolerances) -> TaskResult {
    let samples = task.samples.unwrap_or(100);
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed.unwrap_or(0));
    let mut table = Table::new(vec!["sample", "beta", "K", "K_swapped", "K_base"]);
    let (mut worst, mut base_zero) = (f64::NEG_INFINITY, true);
    let mut pts = Vec::new();
    for i in 0..samples {
        // random round base metric of volume β and random tangent pair
        let beta = rng.gen_range(0.5..3.0);
        let m = FibrationModel::new(model.ansatz.a, BigRational::from_float(beta).expect("finite"), model.grid)?;
        let slice = Su2Slice::new(&m);
        let n = slice.b.len();
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let wave = |k: usize, i: usize| c[k] + c[k + 1] * (0.3 * i as f64).sin();
        let psi = tangent(n, |i| wave(0, i), |i| [wave(2, i), wave(4, i), wave(6, i)]);
        let eta = tangent(n, |i| wave(8, i), |i| [wave(10, i), wave(12, i), wave(14, i)]);
        let k = slice.sectional_curvature(&psi, &eta)?.k;
        let swapped = slice.sectional_curvature(&eta, &psi)?.k;
        let base = slice.sectional_curvature(&psi, &tangent(n, |i| wave(8, i), |_| [0.0; 3]))?.k;
        worst = worst.max(k);
        base_zero &= base == 0.0 && swapped == k;
        table.push(vec![i.into(), m.beta().into(), k.into(), swapped.into(), base.into()]);
        pts.push((i as f64, k));
    }
    // torus-invariant directions: the fiberwise bracket vanishes identically
    let u = HolomorphySection::from_fn(&model.omega_x(), |s| (-s * s / 4.0).exp())?;
    let eta = ScalarField::from_base(model.grid, (0.0, 0.0), |s| (-s * s).exp());
    let invariant = sectional_curvature(&u.field(), &eta, &model.omega_x())?.k;
    base_zero &= invariant == 0.0;
    Ok(Outcome {
        passed: worst <= tol.curvature && base_zero,
        values: vec![kv("samples", samples), kv("max_K", worst), kv("base_pairs_zero", base_zero)],
        table,
        series: Some(Series::new("sectional curvature samples", "sample", "K", pts)),
    })
}
