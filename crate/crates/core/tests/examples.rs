use kurzmani::apps::{
    check_ide_hypotheses, check_mde_hypotheses, ide_to_context, mde_to_context, ConditionStatus,
    ContextOptions, IdeSpec, MdeSpec,
};
use kurzmani::dichotomy::{
    spectral_projection, verify_dichotomy, DichotomyOptions, ProjectionMode,
};
use kurzmani::funcspace::{cousin_division, is_delta_fine, total_variation, Segment};
use kurzmani::kurzweil::{
    cross_check, ks_integral_ref, stieltjes_integral, ClosureFn, NodeFn, ReferenceOptions,
};
use kurzmani::linsys::{fundamental, Impulse, LinearSystemSpec};
use kurzmani::lp_manifold::{
    bisect_manifold_oracle, classify_initial, contraction_estimate, invariance_check,
    lp_operator_apply, manifold_graph, solve_lp, ClassifyVerdict, LpMode, LpOptions, SolutionPath,
};
use kurzmani::nonlinear::NonlinearLaw;
use kurzmani::{DMatrix, DVector, Error, Gauge, PiecewisePath, StieltjesMeasure, TaggedDivision};

fn s(c: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, c)
}

fn diag(d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(d))
}

fn planar_law(eps: f64) -> NonlinearLaw {
    NonlinearLaw::from_registry(
        "quadratic",
        2,
        vec![DMatrix::zeros(2, 2), diag(&[eps, 0.0])],
    )
    .unwrap()
}

fn planar_spec(impulses: Vec<(f64, DMatrix<f64>)>) -> IdeSpec {
    IdeSpec {
        dim: 2,
        t0: 0.5,
        drift: PiecewisePath::constant(diag(&[-1.0, 1.0])),
        impulses,
        law: planar_law(1.0),
        cutoff_radius: 0.5,
    }
}

fn options(horizon: f64) -> ContextOptions {
    ContextOptions {
        lp: LpOptions {
            horizon: Some(horizon),
            ..LpOptions::default()
        },
        ..ContextOptions::default()
    }
}

#[test]
fn variation_of_simple_paths() {
    assert_eq!(
        total_variation(&PiecewisePath::scalar(3.0), 0.0, 1.0, 1e-12).unwrap(),
        0.0
    );
    let step = PiecewisePath::step(0.5, s(1.0)).unwrap();
    assert!((total_variation(&step, 0.0, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-14);
    let ramp = PiecewisePath::from_segment(Segment::polynomial(&[0.0, 1.0]));
    assert!((total_variation(&ramp, 0.0, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn variation_rejects_infinite_window() {
    assert!(total_variation(&PiecewisePath::scalar(1.0), 0.0, f64::INFINITY, 1e-12).is_err());
}

#[test]
fn coarse_gauge_admits_a_single_cell() {
    let g = Gauge::uniform(0.0, 1.0, 1.0).unwrap();
    let d = TaggedDivision::new(vec![0.0, 1.0], vec![0.5]).unwrap();
    assert!(is_delta_fine(&d, &g).unwrap());
    let tight = Gauge::uniform(0.0, 1.0, 0.5).unwrap();
    let d0 = TaggedDivision::new(vec![0.0, 1.0], vec![0.0]).unwrap();
    assert!(!is_delta_fine(&d0, &tight).unwrap());
}

#[test]
fn cousin_division_respects_the_gauge() {
    let g = Gauge::uniform(0.0, 1.0, 0.1).unwrap();
    let d = cousin_division(&g).unwrap();
    assert!(d.nodes().windows(2).all(|w| w[1] - w[0] < 0.2));
    let p = Gauge::piecewise(0.0, 1.0, vec![0.5], vec![0.01, 0.5]).unwrap();
    let dp = cousin_division(&p).unwrap();
    assert!(is_delta_fine(&dp, &p).unwrap());
}

#[test]
fn step_integrand_telescopes_to_its_height() {
    let h = PiecewisePath::step(0.3, s(2.5)).unwrap();
    let r = ks_integral_ref(&NodeFn(&h), 0.0, 1.0, &ReferenceOptions::default()).unwrap();
    assert!((r.value[(0, 0)] - 2.5).abs() < 1e-14);
}

#[test]
fn product_kernel_gives_one_half() {
    let v = ClosureFn {
        shape: (1, 1),
        f: |tau: f64, t: f64| s(tau * t),
        pins: vec![],
        splits: vec![],
    };
    let r = ks_integral_ref(&v, 0.0, 1.0, &ReferenceOptions::with_tol(1e-11)).unwrap();
    assert!((r.value[(0, 0)] - 0.5).abs() < 1e-10);
}

#[test]
fn stieltjes_integral_examples() {
    let id = PiecewisePath::constant(DMatrix::identity(2, 2));
    let atom = StieltjesMeasure::atomic(vec![(0.0, 0.7)]).unwrap();
    let r = stieltjes_integral(&id, &atom, -1.0, 1.0, 1e-12).unwrap();
    assert!((r.value - DMatrix::identity(2, 2) * 0.7).norm() < 1e-14);

    let t = PiecewisePath::from_segment(Segment::polynomial(&[0.0, 1.0]));
    let r = stieltjes_integral(&t, &StieltjesMeasure::lebesgue(), 0.0, 1.0, 1e-12).unwrap();
    assert!((r.value[(0, 0)] - 0.5).abs() < 1e-12);

    let e = PiecewisePath::from_segment(Segment::term(
        kurzmani::funcspace::Basis::Exp {
            rate: 1.0,
            shift: 0.0,
        },
        s(1.0),
    ));
    let mu = StieltjesMeasure::new(PiecewisePath::scalar(1.0), vec![(0.5, 2.0)]).unwrap();
    let exact = (1f64.exp() - 1.0) + 2.0 * 0.5f64.exp();
    let r = stieltjes_integral(&e, &mu, 0.0, 1.0, 1e-12).unwrap();
    assert!((r.value[(0, 0)] - exact).abs() < 1e-11);
    assert!(cross_check(&e, &mu, 0.0, 1.0, 1e-8).unwrap().pass);
}

#[test]
fn shared_jump_of_integrand_and_measure() {
    // f jumps 1 -> 3 at 0.5 with value 10 there; the atom picks the point value.
    let f = PiecewisePath::from_pieces(vec![0.5], vec![Segment::scalar(1.0), Segment::scalar(3.0)])
        .unwrap()
        .with_value_at(0.5, s(10.0))
        .unwrap();
    let mu = StieltjesMeasure::new(PiecewisePath::scalar(1.0), vec![(0.5, 1.0)]).unwrap();
    let rep = cross_check(&f, &mu, 0.0, 1.0, 1e-9).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!((rep.fast[0] - (0.5 + 1.5 + 10.0)).abs() < 1e-12);
}

#[test]
fn ide_driving_path_has_the_impulse_jump() {
    let spec = LinearSystemSpec::new(
        1,
        PiecewisePath::scalar(-1.0),
        vec![Impulse::right(1.0, s(0.5))],
        None,
        0.0,
    )
    .unwrap();
    let l = spec.driving_path().unwrap();
    assert_eq!(l.breakpoint_times(), vec![1.0]);
    assert!((l.eval(2.0)[(0, 0)] - (-2.0 + 0.5)).abs() < 1e-14);
    assert!((l.eval(1.0)[(0, 0)] + 1.0).abs() < 1e-14);
    assert!((l.right_limit(1.0)[(0, 0)] - (-0.5)).abs() < 1e-14);
}

#[test]
fn impulse_at_reference_time_is_rejected() {
    let r = LinearSystemSpec::new(
        1,
        PiecewisePath::scalar(-1.0),
        vec![Impulse::right(0.0, s(0.5))],
        None,
        0.0,
    );
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn two_impulses_add_variation() {
    let b = 0.3;
    let imps = vec![
        Impulse::right(1.0, diag(&[b, b])),
        Impulse::right(2.0, diag(&[b, b])),
    ];
    let spec = LinearSystemSpec::new(2, PiecewisePath::zeros(2, 2), imps, None, 0.0).unwrap();
    assert!((spec.variation(0.0, 3.0, 1e-12).unwrap() - 2.0 * b).abs() < 1e-12);
    let reg = spec.check_regularity(0.0, 3.0).unwrap();
    assert_eq!(reg.c_a, 1.0);
}

#[test]
fn regularity_constants_for_a_single_jump() {
    let spec = LinearSystemSpec::new(
        1,
        PiecewisePath::scalar(0.0),
        vec![Impulse::right(1.0, s(0.5))],
        None,
        0.0,
    )
    .unwrap();
    let reg = spec.check_regularity(0.0, 2.0).unwrap();
    assert_eq!(reg.c_a, 1.0);
    assert!((reg.variation - 0.5).abs() < 1e-12);
    let none = LinearSystemSpec::new(1, PiecewisePath::scalar(0.0), vec![], None, 0.0).unwrap();
    let reg = none.check_regularity(0.0, 2.0).unwrap();
    assert_eq!((reg.c_a, reg.variation), (1.0, 0.0));
}

#[test]
fn jump_acts_after_its_time() {
    let spec = LinearSystemSpec::new(
        1,
        PiecewisePath::scalar(0.0),
        vec![Impulse::right(1.0, s(1.0))],
        None,
        0.0,
    )
    .unwrap();
    assert!((fundamental(&spec, 1.0, 0.0).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
    assert!((fundamental(&spec, 1.5, 0.0).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
}

#[test]
fn spectral_projections_of_simple_drifts() {
    let saddle = LinearSystemSpec::new(
        2,
        PiecewisePath::constant(diag(&[-1.0, 1.0])),
        vec![],
        None,
        0.0,
    )
    .unwrap();
    let p =
        spectral_projection(&saddle, 0.0, &ProjectionMode::Autonomous { period: None }).unwrap();
    assert!((p.matrix - diag(&[1.0, 0.0])).norm() < 1e-12);
    let decay = LinearSystemSpec::new(1, PiecewisePath::scalar(-1.0), vec![], None, 0.0).unwrap();
    let p = spectral_projection(&decay, 0.0, &ProjectionMode::Autonomous { period: None }).unwrap();
    assert!((p.matrix[(0, 0)] - 1.0).abs() < 1e-12);
}

#[test]
fn non_idempotent_projection_is_rejected() {
    let spec = LinearSystemSpec::new(1, PiecewisePath::scalar(1.0), vec![], None, 0.0).unwrap();
    let r = spectral_projection(&spec, 0.0, &ProjectionMode::Explicit(s(0.5)));
    assert!(matches!(r, Err(Error::NotProjection { .. })));
}

#[test]
fn growth_only_system_has_no_decay() {
    let spec = LinearSystemSpec::new(1, PiecewisePath::scalar(1.0), vec![], None, 0.0).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
    // Calling the growing direction stable gives a negative rate, reported not raised.
    let rep = verify_dichotomy(&spec, &s(1.0), 0.0, &grid, &DichotomyOptions::default()).unwrap();
    assert!(rep.alpha < 0.0 && !rep.pass);
}

#[test]
fn zero_input_gives_zero_output() {
    let ctx = ide_to_context(&planar_spec(vec![]), &options(10.0))
        .unwrap()
        .context;
    let disc = ctx.discretize(0.0, &[]).unwrap();
    let zero = DVector::zeros(2);
    let path = SolutionPath {
        nodes: disc.nodes().to_vec(),
        values: vec![zero.clone(); disc.len()],
    };
    for mode in [LpMode::Fast, LpMode::Reference] {
        let out = lp_operator_apply(&ctx, &disc, &path, &zero, mode).unwrap();
        assert_eq!(out.sup_norm(), 0.0);
    }
}

#[test]
fn linear_system_has_flat_graph() {
    let spec = IdeSpec {
        law: NonlinearLaw::Zero { dim: 2 },
        ..planar_spec(vec![])
    };
    let app = ide_to_context(&spec, &options(10.0)).unwrap();
    let grid: Vec<Vec<f64>> = [-0.2, -0.1, 0.0, 0.1, 0.2]
        .iter()
        .map(|&x| vec![x])
        .collect();
    let g = manifold_graph(&app.context, 0.0, &grid).unwrap();
    assert!(g
        .samples
        .iter()
        .all(|s| s.m_vector.iter().all(|&m| m == 0.0)));
    assert_eq!(g.lipschitz_estimate, 0.0);
    let est = contraction_estimate(&app.context, 0.0, 10.0, None).unwrap();
    assert_eq!(est.l_theory, 0.0);

    // linear operator output is V(t, s) zeta
    let disc = app.context.discretize(0.0, &[]).unwrap();
    let zeta = disc.zeta_from_coords(&[0.3]).unwrap();
    let sol = solve_lp(&app.context, &disc, &zeta).unwrap();
    let at5 = sol.path.eval(5.0);
    assert!((at5[0].abs() - 0.3 * (-5f64).exp()).abs() < 1e-12);
}

#[test]
fn planar_graph_and_lipschitz_estimate() {
    let app = ide_to_context(&planar_spec(vec![]), &options(30.0)).unwrap();
    let grid: Vec<Vec<f64>> = [-0.2, -0.1, 0.0, 0.1, 0.2]
        .iter()
        .map(|&x| vec![x])
        .collect();
    let g = manifold_graph(&app.context, 0.0, &grid).unwrap();
    for sm in &g.samples {
        let x = sm.zeta[0];
        assert!((sm.m_vector[1] + x * x / 3.0).abs() < 1e-5, "{sm:?}");
    }
    // The largest grid quotient is (0.2 + 0.1)/3, below the slope 2(0.2)/3 at the edge.
    assert!(
        (g.lipschitz_estimate - 0.1).abs() < 1e-4,
        "{}",
        g.lipschitz_estimate
    );
    assert!(g.lipschitz_estimate < 0.4 / 3.0);
}

#[test]
fn invariance_for_linear_planar_and_zero_cases() {
    let app = ide_to_context(&planar_spec(vec![]), &options(30.0)).unwrap();
    let disc = app.context.discretize(0.0, &[]).unwrap();
    let zeta = disc.zeta_from_coords(&[0.1]).unwrap();
    let r = invariance_check(&app.context, 0.0, &zeta, 1.0).unwrap();
    assert!(r.residual <= 1e-4, "{r:?}");
    let expected = -(0.1 * (-1f64).exp()).powi(2) / 3.0;
    assert!((r.m_t1[1] - expected).abs() < 1e-5);
    let z = invariance_check(&app.context, 0.0, &DVector::zeros(2), 1.0).unwrap();
    assert_eq!(z.residual, 0.0);
}

#[test]
fn classification_examples() {
    let lin = IdeSpec {
        law: NonlinearLaw::Zero { dim: 2 },
        ..planar_spec(vec![])
    };
    let ctx = ide_to_context(&lin, &options(40.0)).unwrap().context;
    let v = classify_initial(&ctx, &DVector::from_vec(vec![0.0, 0.01]), 0.0, 1e3).unwrap();
    match v {
        ClassifyVerdict::Escapes { time } => assert!((time - 1e5f64.ln()).abs() < 1e-6, "{time}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        classify_initial(&ctx, &DVector::zeros(2), 0.0, 1e3).unwrap(),
        ClassifyVerdict::Candidate { .. }
    ));
    let oracle = bisect_manifold_oracle(&ctx, 0.0, &[0.1], (-0.1, 0.1), 1e3, 1e-7).unwrap();
    assert!(oracle.eta.abs() < 1e-6);
}

#[test]
fn oracle_on_the_planar_benchmark() {
    let ctx = ide_to_context(&planar_spec(vec![]), &options(40.0))
        .unwrap()
        .context;
    let r = bisect_manifold_oracle(&ctx, 0.0, &[0.15], (-0.1, 0.1), 1e3, 1e-6).unwrap();
    let disc = ctx.discretize(0.0, &[]).unwrap();
    let x = disc.zeta_from_coords(&[0.15]).unwrap()[0];
    let eta = r.eta * disc.unstable_at_s[(1, 0)];
    assert!((eta + x * x / 3.0).abs() < 1e-4, "{r:?}");
}

#[test]
fn bracket_without_sign_change_is_reported() {
    let ctx = ide_to_context(&planar_spec(vec![]), &options(40.0))
        .unwrap()
        .context;
    let r = bisect_manifold_oracle(&ctx, 0.0, &[0.1], (0.01, 0.1), 1e3, 1e-6);
    assert!(matches!(r, Err(Error::NoBracket { .. })));
}

#[test]
fn singular_impulse_names_the_condition() {
    let spec = planar_spec(vec![(2.0, -DMatrix::identity(2, 2))]);
    let rep = check_ide_hypotheses(&spec, (0.0, 5.0), None);
    assert_eq!(rep.first_failure().unwrap().name, "impulse_invertible");
    assert!(matches!(
        ide_to_context(&spec, &options(10.0)),
        Err(Error::Hypothesis { .. })
    ));
}

#[test]
fn cutoff_modulus_is_window_relative() {
    let rep = check_ide_hypotheses(&planar_spec(vec![]), (0.0, 10.0), None);
    let c = rep
        .conditions
        .iter()
        .find(|c| c.name == "nonlinearity_majorant")
        .unwrap();
    assert_eq!(c.status, ConditionStatus::WindowRelative);
}

#[test]
fn decreasing_driver_fails_monotonicity() {
    let spec = MdeSpec {
        dim: 1,
        t0: 0.0,
        drift: PiecewisePath::scalar(-1.0),
        coupling: PiecewisePath::scalar(0.5),
        u: StieltjesMeasure::new(PiecewisePath::scalar(1.0), vec![(1.0, -0.2)]).unwrap(),
        law: NonlinearLaw::from_registry("quadratic", 1, vec![s(1.0)]).unwrap(),
        cutoff_radius: 0.5,
    };
    let rep = check_mde_hypotheses(&spec, (0.0, 5.0), None);
    assert_eq!(rep.first_failure().unwrap().name, "driver_nondecreasing");
}

#[test]
fn lebesgue_mde_matches_the_ode() {
    let ide = IdeSpec {
        law: NonlinearLaw::Zero { dim: 2 },
        ..planar_spec(vec![])
    };
    let mde = MdeSpec {
        dim: 2,
        t0: 0.5,
        drift: ide.drift.clone(),
        coupling: PiecewisePath::zeros(2, 2),
        u: StieltjesMeasure::lebesgue(),
        law: NonlinearLaw::Zero { dim: 2 },
        cutoff_radius: 0.5,
    };
    let a = ide_to_context(&ide, &options(10.0)).unwrap();
    let b = mde_to_context(&mde, &options(10.0)).unwrap();
    assert_eq!(a.context.dichotomy.p0, b.context.dichotomy.p0);
    assert_eq!(a.dichotomy.k, b.dichotomy.k);
    assert_eq!(b.context.v_h(0.0, 10.0).unwrap(), 0.0);
}
