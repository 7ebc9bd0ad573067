//! Subcommand implementations. Each returns the process exit code.

use std::io::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use kurzmani::apps::{
    check_ide_hypotheses, check_linear_hypotheses, check_mde_hypotheses, ide_linear, mde_linear,
    HypothesisReport,
};
use kurzmani::config::{build_app_context, BuiltSystem, IntegrandMode, RunConfig};
use kurzmani::dichotomy::{
    dichotomy_samples, spectral_projection, verify_dichotomy, DichotomyData, Family,
};
use kurzmani::kurzweil::{cross_check_with, ks_integral_ref, NodeFn, ReferenceOptions};
use kurzmani::linsys::{FundamentalOperator, LinearSystemSpec, MeshRequest};
use kurzmani::lp_manifold::{
    classify_initial, contraction_estimate, manifold_graph, ClassifyVerdict, LpMode,
};
use kurzmani::{DVector, Error};

use crate::output::{num, Sink, Table};
use crate::{CliError, Loaded};

fn emit(sink: &mut Sink, report: &impl Serialize) -> Result<(), CliError> {
    let text = sink.json(report)?;
    // A closed stdout is not an error: the artifacts are already on disk.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(num).collect::<Vec<_>>().join(";")
}

fn linear_spec(cfg: &RunConfig) -> Result<LinearSystemSpec, CliError> {
    match cfg.system.build()? {
        BuiltSystem::Ide(s) => Ok(ide_linear(&s)?),
        BuiltSystem::Mde(s) => Ok(mde_linear(&s)?),
        BuiltSystem::Linear { spec, .. } => Ok(spec),
        BuiltSystem::Integrand { .. } => Err(CliError::input(
            "this subcommand needs a dynamical system, not an integrand",
        )),
    }
}

fn reference_options(cfg: &RunConfig) -> ReferenceOptions {
    ReferenceOptions {
        tol: cfg.solver.tol * 1e-1,
        max_rounds: cfg.solver.max_rounds,
        ..ReferenceOptions::default()
    }
}

pub fn integrate(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    let BuiltSystem::Integrand {
        f,
        mu,
        window: (c, d),
        mode,
    } = cfg.system.build()?
    else {
        return Err(CliError::input(
            "integrate needs a system of kind `integrand`",
        ));
    };
    let tol = cfg.solver.tol;
    let mut table = Table::new(["evaluator", "value", "tolerance", "rounds"]);
    let (report, pass) = match mode {
        IntegrandMode::Stieltjes => {
            let r = cross_check_with(&f, &mu, c, d, tol, &reference_options(cfg))?;
            table.push(vec![
                "fast".into(),
                join(r.fast.iter().copied()),
                num(tol),
                "0".into(),
            ]);
            table.push(vec![
                "reference".into(),
                join(r.reference.iter().copied()),
                num(tol),
                r.rounds.to_string(),
            ]);
            let pass = r.pass;
            (
                json!({ "mode": "stieltjes", "window": [c, d], "cross_check": r }),
                pass,
            )
        }
        IntegrandMode::Increment => {
            let exact = f.eval(d) - f.eval(c);
            let r = ks_integral_ref(&NodeFn(&f), c, d, &reference_options(cfg))?;
            let difference = (&r.value - &exact).norm();
            let pass = difference <= tol.max(10.0 * r.achieved);
            table.push(vec![
                "increment".into(),
                join(exact.iter().copied()),
                num(tol),
                "0".into(),
            ]);
            table.push(vec![
                "reference".into(),
                join(r.value.iter().copied()),
                num(tol),
                r.rounds.to_string(),
            ]);
            let report = json!({
                "mode": "increment",
                "window": [c, d],
                "cross_check": {
                    "fast": exact.iter().copied().collect::<Vec<_>>(),
                    "reference": r.value.iter().copied().collect::<Vec<_>>(),
                    "difference": difference,
                    "achieved": r.achieved,
                    "rounds": r.rounds,
                    "tol": tol,
                    "pass": pass,
                },
            });
            (report, pass)
        }
    };
    sink.csv(&table)?;
    emit(sink, &report)?;
    Ok(if pass { 0 } else { 2 })
}

pub fn fundamental(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    let spec = linear_spec(cfg)?;
    let s = cfg.solver.s;
    let times = match cfg.solver.fundamental_times {
        Some(g) => g.points()?,
        None => {
            let end = s + cfg.solver.horizon.unwrap_or(10.0);
            (0..)
                .map(|k| s + 0.25 * k as f64)
                .take_while(|&t| t <= end + 1e-12)
                .collect()
        }
    };
    let lo = times.iter().copied().fold(s, f64::min);
    let hi = times.iter().copied().fold(s, f64::max);
    let mut mesh_times = times.clone();
    mesh_times.push(s);
    let op = FundamentalOperator::new(
        &spec,
        &MeshRequest {
            times: mesh_times,
            ..MeshRequest::new(lo, hi.max(lo + cfg.solver.mesh_step), cfg.solver.mesh_step)
        },
    )?;
    let n = spec.dim();
    let mut header = vec!["t".to_string(), "s".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("v_{i}{j}"));
        }
    }
    header.push("op_norm".into());
    let mut table = Table::new(header);
    let mut sup = 0.0_f64;
    for &t in &times {
        let v = op.eval(t, s)?;
        let norm = kurzmani::linalg::op_norm(&v);
        sup = sup.max(norm);
        let mut row = vec![num(t), num(s)];
        for i in 0..n {
            for j in 0..n {
                row.push(num(v[(i, j)]));
            }
        }
        row.push(num(norm));
        table.push(row);
    }
    let regularity = spec.check_regularity(lo, hi)?;
    sink.csv(&table)?;
    emit(
        sink,
        &json!({ "s": s, "samples": times.len(), "sup_op_norm": sup, "regularity": regularity }),
    )?;
    Ok(0)
}

pub fn dichotomy(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    let spec = linear_spec(cfg)?;
    let opts = cfg.solver.context_options(spec.dim())?;
    let t0 = spec.t0();
    let grid = opts.grid(t0);
    let choice = spectral_projection(&spec, t0, &opts.projection)?;
    let report = verify_dichotomy(&spec, &choice.matrix, t0, &grid, &opts.dichotomy)?;
    let (samples, _) = dichotomy_samples(&spec, &choice.matrix, t0, &grid, &opts.dichotomy)?;
    let mut table = Table::new(["family", "t", "s", "distance", "log_norm", "envelope"]);
    for smp in &samples {
        let dist = (smp.t - smp.s).abs();
        let family = match smp.family {
            Family::Stable => "stable",
            Family::Unstable => "unstable",
        };
        table.push(vec![
            family.into(),
            num(smp.t),
            num(smp.s),
            num(dist),
            num(smp.norm.ln()),
            num(report.k.ln() - report.alpha * dist),
        ]);
    }
    sink.csv(&table)?;

    // Growth of V(t, t0) against e^{var Lambda} and e^{t - t0}.
    let op = FundamentalOperator::new(
        &spec,
        &MeshRequest {
            times: grid.clone(),
            ..MeshRequest::new(
                t0.min(grid[0]),
                t0.max(grid[grid.len() - 1]),
                opts.dichotomy.max_step,
            )
        },
    )?;
    let mut growth = Table::new([
        "t",
        "op_norm",
        "variation",
        "exp_variation",
        "ratio",
        "time_ratio",
    ]);
    let mut worst_ratio = 0.0_f64;
    let mut worst_time_ratio = 0.0_f64;
    for &t in grid.iter().filter(|&&t| t >= t0) {
        let norm = kurzmani::linalg::op_norm(&op.eval(t, t0)?);
        let var = spec.variation(t0, t, cfg.solver.tol)?;
        let ratio = norm / var.exp();
        let time_ratio = norm / (t - t0).exp();
        worst_ratio = worst_ratio.max(ratio);
        worst_time_ratio = worst_time_ratio.max(time_ratio);
        growth.push(vec![
            num(t),
            num(norm),
            num(var),
            num(var.exp()),
            num(ratio),
            num(time_ratio),
        ]);
    }
    sink.csv_named("growth", &growth)?;

    let pass = report.pass;
    emit(
        sink,
        &json!({
            "growth_ratio_max": worst_ratio,
            "time_growth_ratio_max": worst_time_ratio,
            "t0": t0,
            "projection_mode": choice.mode,
            "heuristic": choice.heuristic,
            "p0": choice.matrix.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "K": report.k,
            "alpha": report.alpha,
            "certificate": report,
        }),
    )?;
    Ok(if pass { 0 } else { 2 })
}

pub fn manifold(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    if cfg.solver.grid.is_empty() {
        return Err(CliError::input("manifold needs a non-empty `solver.grid`"));
    }
    let app = build_app_context(cfg)?;
    let ctx = &app.context;
    let s = cfg.solver.s;
    let graph = manifold_graph(ctx, s, &cfg.solver.grid)?;
    let est = contraction_estimate(ctx, s, graph.t_end, Some(graph.l_emp))?;
    let n = ctx.linear.dim();
    let k = cfg.solver.grid[0].len();
    let u = n - k;
    let mut header: Vec<String> = (0..k).map(|i| format!("c_{i}")).collect();
    header.extend((0..n).map(|i| format!("zeta_{i}")));
    header.extend((0..u).map(|i| format!("m_{i}")));
    header.extend((0..n).map(|i| format!("m_vec_{i}")));
    header.extend(["iterations".to_string(), "residual".to_string()]);
    let mut table = Table::new(header);
    for smp in &graph.samples {
        let mut row: Vec<String> = smp.coords.iter().copied().map(num).collect();
        row.extend(smp.zeta.iter().copied().map(num));
        row.extend(smp.m_coords.iter().copied().map(num));
        row.extend(smp.m_vector.iter().copied().map(num));
        row.push(smp.iterations.to_string());
        row.push(num(smp.residual));
        table.push(row);
    }
    sink.csv(&table)?;
    let failed = !graph.failures.is_empty();
    emit(
        sink,
        &json!({
            "K": ctx.dichotomy.k,
            "alpha": ctx.dichotomy.alpha,
            "L_theory": est.l_theory,
            "L_emp": graph.l_emp,
            "lipschitz_estimate": graph.lipschitz_estimate,
            "lipschitz_bound": graph.lipschitz_bound,
            "T": graph.t_end,
            "s": s,
            "tol": ctx.options.tol,
            "mode": ctx.options.mode,
            "cutoff_radius": ctx.nonlinearity.cutoff_radius,
            "projection_mode": app.projection_mode,
            "contraction": est,
            "gate": app.hypotheses.gate,
            "failures": graph.failures,
        }),
    )?;
    Ok(if failed { 3 } else { 0 })
}

pub fn classify(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    if cfg.solver.classify_points.is_empty() {
        return Err(CliError::input(
            "classify needs a non-empty `solver.classify_points`",
        ));
    }
    let app = build_app_context(cfg)?;
    let s = cfg.solver.s;
    let mut table = Table::new(["index", "z0", "verdict", "t_escape", "max_norm"]);
    let mut rows = Vec::new();
    for (i, p) in cfg.solver.classify_points.iter().enumerate() {
        let z0 = DVector::from_column_slice(p);
        let v = classify_initial(&app.context, &z0, s, cfg.solver.escape_radius)?;
        let (name, t_esc, max_norm) = match &v {
            ClassifyVerdict::Escapes { time } => ("escapes", num(*time), String::new()),
            ClassifyVerdict::Candidate { max_norm, .. } => {
                ("candidate", String::new(), num(*max_norm))
            }
            ClassifyVerdict::Indeterminate { .. } => {
                ("indeterminate", String::new(), String::new())
            }
        };
        table.push(vec![
            i.to_string(),
            join(p.iter().copied()),
            name.into(),
            t_esc,
            max_norm,
        ]);
        rows.push(json!({ "index": i, "z0": p, "result": v }));
    }
    sink.csv(&table)?;
    emit(
        sink,
        &json!({ "s": s, "escape_radius": cfg.solver.escape_radius, "points": rows }),
    )?;
    Ok(0)
}

/// Dichotomy data for the window constants; `None` when no splitting is found.
fn try_dichotomy(cfg: &RunConfig, spec: &LinearSystemSpec) -> (Option<DichotomyData>, Value) {
    let run = || -> kurzmani::Result<DichotomyData> {
        let opts = cfg.solver.context_options(spec.dim())?;
        let t0 = spec.t0();
        let choice = spectral_projection(spec, t0, &opts.projection)?;
        let report = verify_dichotomy(spec, &choice.matrix, t0, &opts.grid(t0), &opts.dichotomy)?;
        if !report.pass {
            return Err(Error::NotHyperbolic(format!(
                "K = {:e}, alpha = {:e}",
                report.k, report.alpha
            )));
        }
        Ok(DichotomyData {
            t0,
            p0: choice.matrix,
            k: report.k,
            alpha: report.alpha,
            heuristic: choice.heuristic,
        })
    };
    match run() {
        Ok(d) => {
            let summary = json!({ "K": d.k, "alpha": d.alpha, "heuristic": d.heuristic });
            (Some(d), summary)
        }
        Err(e) => (None, json!({ "error": e.kind(), "message": e.to_string() })),
    }
}

pub fn check(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    let built = cfg.system.build()?;
    let t0 = match &built {
        BuiltSystem::Ide(s) => s.t0,
        BuiltSystem::Mde(s) => s.t0,
        BuiltSystem::Linear { spec, .. } => spec.t0(),
        BuiltSystem::Integrand { .. } => {
            return Err(CliError::input(
                "check needs a dynamical system, not an integrand",
            ))
        }
    };
    // A linear part that cannot be built (say, a singular impulse) still gets a
    // report; the failing condition names the cause.
    let (data, summary) = match linear_spec(cfg) {
        Ok(spec) => try_dichotomy(cfg, &spec),
        Err(e) => (None, json!({ "error": e.kind, "message": e.message })),
    };
    let window = match (cfg.solver.window, cfg.solver.horizon) {
        (Some(w), _) => (w[0], w[1]),
        (None, Some(h)) => (t0, t0 + h),
        (None, None) => match build_app_context(cfg) {
            Ok(app) => app.hypotheses.window,
            Err(_) => (t0, t0 + 50.0),
        },
    };
    let report: HypothesisReport = match &built {
        BuiltSystem::Ide(s) => check_ide_hypotheses(s, window, data.as_ref()),
        BuiltSystem::Mde(s) => check_mde_hypotheses(s, window, data.as_ref()),
        BuiltSystem::Linear { spec, nonlinearity } => {
            check_linear_hypotheses(spec, nonlinearity, window)
        }
        BuiltSystem::Integrand { .. } => unreachable!("rejected above"),
    };
    let mut table = Table::new(["condition", "status", "detail"]);
    for c in &report.conditions {
        let status = serde_json::to_value(c.status).expect("status serializes");
        table.push(vec![
            c.name.into(),
            status.as_str().unwrap_or_default().into(),
            c.detail.clone(),
        ]);
    }
    sink.csv(&table)?;
    let ok = report.all_hold();
    emit(
        sink,
        &json!({ "all_hold": ok, "dichotomy": summary, "hypotheses": report }),
    )?;
    Ok(if ok { 0 } else { 2 })
}

pub fn crosscheck(loaded: &Loaded, sink: &mut Sink) -> Result<u8, CliError> {
    let cfg = &loaded.cfg;
    if let BuiltSystem::Integrand {
        f,
        mu,
        window: (c, d),
        ..
    } = cfg.system.build()?
    {
        let r = cross_check_with(&f, &mu, c, d, cfg.solver.tol, &reference_options(cfg))?;
        let mut table = Table::new(["evaluator", "value", "tolerance", "rounds"]);
        table.push(vec![
            "fast".into(),
            join(r.fast.iter().copied()),
            num(r.tol),
            "0".into(),
        ]);
        table.push(vec![
            "reference".into(),
            join(r.reference.iter().copied()),
            num(r.tol),
            r.rounds.to_string(),
        ]);
        sink.csv(&table)?;
        let pass = r.pass;
        emit(sink, &json!({ "kind": "integral", "cross_check": r }))?;
        return Ok(if pass { 0 } else { 2 });
    }
    if cfg.solver.grid.is_empty() {
        return Err(CliError::input(
            "crosscheck needs a non-empty `solver.grid`",
        ));
    }
    let mut fast_cfg = cfg.clone();
    fast_cfg.solver.mode = LpMode::Fast;
    let mut ref_cfg = cfg.clone();
    ref_cfg.solver.mode = LpMode::Reference;
    let s = cfg.solver.s;
    let fast = manifold_graph(&build_app_context(&fast_cfg)?.context, s, &cfg.solver.grid)?;
    let reference = manifold_graph(&build_app_context(&ref_cfg)?.context, s, &cfg.solver.grid)?;
    // The LP comparison tolerance is looser than `solver.tol`: both modes
    // converge to their own discretisation of the fixed point.
    let tol = 1e-5_f64.max(cfg.solver.tol);
    let mut table = Table::new(["coords", "fast", "reference", "difference"]);
    let mut worst = 0.0_f64;
    for a in &fast.samples {
        let Some(b) = reference.samples.iter().find(|b| b.coords == a.coords) else {
            continue;
        };
        let diff = a
            .m_vector
            .iter()
            .zip(&b.m_vector)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff);
        table.push(vec![
            join(a.coords.iter().copied()),
            join(a.m_vector.iter().copied()),
            join(b.m_vector.iter().copied()),
            num(diff),
        ]);
    }
    sink.csv(&table)?;
    let failures = fast.failures.len() + reference.failures.len();
    let pass = worst <= tol && failures == 0;
    emit(
        sink,
        &json!({
            "kind": "lp",
            "worst_difference": worst,
            "tol": tol,
            "pass": pass,
            "fast_failures": fast.failures,
            "reference_failures": reference.failures,
        }),
    )?;
    Ok(match (failures, pass) {
        (0, true) => 0,
        (0, false) => 2,
        _ => 3,
    })
}
