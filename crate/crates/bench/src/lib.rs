//! Fixtures shared by the criterion benchmarks in `benches/core.rs`.

use kurzmani::apps::{linear_app_context, ContextOptions};
use kurzmani::funcspace::weierstrass_segment;
use kurzmani::linsys::{Impulse, LinearSystemSpec};
use kurzmani::lp_manifold::{LpContext, LpMode, LpOptions};
use kurzmani::nonlinear::{NonlinearLaw, NonlinearityKind, NonlinearitySpec};
use kurzmani::PiecewisePath;
use nalgebra::{DMatrix, DVector};

/// `diag(-1, 1)` with right jumps `diag(0.1, 0)` at the integers in `[-30, 80]` (none at zero).
pub fn impulsive_saddle() -> LinearSystemSpec {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.0]));
    let imps = (-30..=80)
        .filter(|&k| k != 0)
        .map(|k| Impulse::right(k as f64, b.clone()))
        .collect();
    LinearSystemSpec::new(2, PiecewisePath::constant(a), imps, None, 0.5).unwrap()
}

/// The planar benchmark `x' = -x`, `y' = y + x^2` truncated at radius 0.5.
pub fn planar_context(mode: LpMode, horizon: f64) -> LpContext {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
    let spec = LinearSystemSpec::new(2, PiecewisePath::constant(a), vec![], None, 0.0).unwrap();
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let law = NonlinearLaw::from_registry("quadratic", 2, vec![DMatrix::zeros(2, 2), q]).unwrap();
    let nl = NonlinearitySpec::new(NonlinearityKind::IdePointwise, law, 0.5).unwrap();
    let opts = ContextOptions {
        lp: LpOptions {
            mode,
            horizon: Some(horizon),
            ..LpOptions::default()
        },
        ..ContextOptions::default()
    };
    linear_app_context(&spec, &nl, &opts).unwrap().context
}

/// A Weierstrass-type path with `terms` terms, `a = 0.5`, `b = 3`.
pub fn weierstrass(terms: usize) -> PiecewisePath {
    PiecewisePath::from_segment(weierstrass_segment(terms, 0.5, 3.0))
}
