//! Front-ends for impulsive (IDE) and measure (MDE) differential equations.
//!
//! An IDE `z' = A z + f(t, z)`, `z(t_i+) = (I + B_i) z(t_i)` becomes a generalized
//! ODE with driving path `Lambda(t) = int A + sum B_i H_{t_i}(t)` and forcing
//! `Q(z, t) = int f(s, z) ds`. An MDE `Dz = A z + C z Du + H(t, z) Du` becomes
//! one with `Lambda + G`, `G = int C du`, and forcing `N(z, t) = int H du`.
//! Solutions are left-continuous at jump times.
//!
//! Global integrability conditions cannot hold for constant-coefficient
//! benchmarks; such conditions are evaluated on the working window and reported
//! as window-relative.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dichotomy::{
    spectral_projection, verify_dichotomy, DichotomyData, DichotomyOptions, DichotomyReport,
    ProjectionMode,
};
use crate::error::{invalid, Error, Result};
use crate::funcspace::{PiecewisePath, StieltjesMeasure};
use crate::linalg::{inverse, op_norm};
use crate::linsys::{Impulse, LinearSystemSpec, MeasureCoupling};
use crate::lp_manifold::{LpContext, LpOptions};
use crate::nonlinear::{NonlinearLaw, NonlinearityKind, NonlinearitySpec};
use crate::quad;

/// `z' = A(t) z + f(z)` between impulse times, `z(t_i+) = (I + B_i) z(t_i)`.
#[derive(Clone, Debug)]
pub struct IdeSpec {
    pub dim: usize,
    pub t0: f64,
    pub drift: PiecewisePath,
    pub impulses: Vec<(f64, DMatrix<f64>)>,
    pub law: NonlinearLaw,
    pub cutoff_radius: f64,
}

/// `Dz = A(t) z + C(t) z Du + H(z) Du` with `u` nondecreasing.
#[derive(Clone, Debug)]
pub struct MdeSpec {
    pub dim: usize,
    pub t0: f64,
    pub drift: PiecewisePath,
    pub coupling: PiecewisePath,
    pub u: StieltjesMeasure,
    pub law: NonlinearLaw,
    pub cutoff_radius: f64,
}

#[derive(Clone, Debug)]
pub struct ContextOptions {
    pub projection: ProjectionMode,
    /// Sample times for the dichotomy fit; empty means `t0 - 5 .. t0 + 5` in steps of 0.25.
    pub dichotomy_grid: Vec<f64>,
    pub dichotomy: DichotomyOptions,
    pub lp: LpOptions,
    /// Window for hypothesis constants; `None` means `[t0, T]` with the LP horizon.
    pub window: Option<(f64, f64)>,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            projection: ProjectionMode::Autonomous { period: None },
            dichotomy_grid: Vec::new(),
            dichotomy: DichotomyOptions::default(),
            lp: LpOptions::default(),
            window: None,
        }
    }
}

impl ContextOptions {
    pub fn grid(&self, t0: f64) -> Vec<f64> {
        if self.dichotomy_grid.is_empty() {
            (-20..=20).map(|k| t0 + 0.25 * k as f64).collect()
        } else {
            self.dichotomy_grid.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    /// Holds on the working window only.
    WindowRelative,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub status: ConditionStatus,
    pub detail: String,
}

impl ConditionCheck {
    fn new(name: &'static str, status: ConditionStatus, detail: impl Into<String>) -> Self {
        Self {
            name,
            status,
            detail: detail.into(),
        }
    }

    fn verdict(name: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        Self::new(
            name,
            if ok {
                ConditionStatus::Pass
            } else {
                ConditionStatus::Fail
            },
            detail,
        )
    }
}

/// The smallness inequality of the application theorem, evaluated as printed.
#[derive(Clone, Debug, Serialize)]
pub struct GateReport {
    pub formula: &'static str,
    pub value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub system: &'static str,
    pub window: (f64, f64),
    pub conditions: Vec<ConditionCheck>,
    pub constants: BTreeMap<&'static str, f64>,
    pub gate: Option<GateReport>,
}

impl HypothesisReport {
    /// First condition that fails outright.
    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.conditions
            .iter()
            .find(|c| c.status == ConditionStatus::Fail)
    }

    pub fn all_hold(&self) -> bool {
        self.first_failure().is_none()
    }
}

/// A ready fixed-point context with the data that produced it.
#[derive(Clone, Debug)]
pub struct AppContext {
    pub context: LpContext,
    pub dichotomy: DichotomyReport,
    pub projection_mode: &'static str,
    pub hypotheses: HypothesisReport,
}

pub fn ide_linear(spec: &IdeSpec) -> Result<LinearSystemSpec> {
    let impulses = spec
        .impulses
        .iter()
        .map(|(t, b)| Impulse::right(*t, b.clone()))
        .collect();
    LinearSystemSpec::new(spec.dim, spec.drift.clone(), impulses, None, spec.t0)
}

pub fn mde_linear(spec: &MdeSpec) -> Result<LinearSystemSpec> {
    let coupling = MeasureCoupling {
        coefficient: spec.coupling.clone(),
        measure: spec.u.clone(),
    };
    LinearSystemSpec::new(
        spec.dim,
        spec.drift.clone(),
        vec![],
        Some(coupling),
        spec.t0,
    )
}

fn drift_checks(
    drift: &PiecewisePath,
    c: f64,
    d: f64,
    names: [&'static str; 2],
) -> (Vec<ConditionCheck>, f64) {
    let sup = drift.sup_norm_sampled(c, d, 64);
    let mut integral = 0.0;
    let mut ok = sup.is_finite();
    for (a, b, seg) in drift.pieces_in(c, d) {
        match quad::integrate(|t| op_norm(&seg.eval(t)), a, b, 1e-10) {
            Ok(r) => integral += r.value,
            Err(_) => ok = false,
        }
    }
    let zero = sup == 0.0;
    let global = if zero {
        ConditionStatus::Pass
    } else {
        ConditionStatus::WindowRelative
    };
    (
        vec![
            ConditionCheck::verdict(
                names[0],
                ok,
                format!("sampled sup |A| = {sup:e} on [{c}, {d}]"),
            ),
            ConditionCheck::new(
                names[1],
                if ok { global } else { ConditionStatus::Fail },
                format!("majorant m = |A(t)| with integral {integral:e} on [{c}, {d}]"),
            ),
        ],
        integral,
    )
}

/// Evaluates every IDE hypothesis on `window`; gate constants need `dichotomy`.
pub fn check_ide_hypotheses(
    spec: &IdeSpec,
    window: (f64, f64),
    dichotomy: Option<&DichotomyData>,
) -> HypothesisReport {
    let (c, d) = window;
    let n = spec.dim;
    let id = DMatrix::identity(n, n);
    let (mut conditions, drift_integral) = drift_checks(
        &spec.drift,
        c,
        d,
        ["drift_integrable", "drift_integral_majorant"],
    );
    let mut constants = BTreeMap::new();

    let mut singular = Vec::new();
    let mut sum_b = 0.0;
    let mut max_inv = 0.0_f64;
    for (t, b) in &spec.impulses {
        match inverse(&(&id + b)) {
            Some(inv) => max_inv = max_inv.max(op_norm(&inv)),
            None => singular.push(*t),
        }
        if *t >= c && *t < d {
            sum_b += op_norm(b);
        }
    }
    conditions.push(ConditionCheck::verdict(
        "impulse_invertible",
        singular.is_empty(),
        if singular.is_empty() {
            format!("I + B_i invertible at all {} impulses", spec.impulses.len())
        } else {
            format!("I + B_i singular at t = {singular:?}")
        },
    ));
    let c_b = if singular.is_empty() {
        sum_b.max(max_inv)
    } else {
        f64::INFINITY
    };
    conditions.push(ConditionCheck::verdict(
        "impulse_bound",
        c_b.is_finite(),
        format!(
            "C_b = max(sum |B_i|, max |(I + B_i)^-1|) = {c_b:e}; sum over impulses in [{c}, {d})"
        ),
    ));
    constants.insert("C_b", c_b);

    let cutoff = NonlinearitySpec::new(
        NonlinearityKind::IdePointwise,
        spec.law.clone(),
        spec.cutoff_radius,
    );
    let gamma = cutoff
        .as_ref()
        .map(|s| s.bounds().modulus())
        .unwrap_or(f64::NAN);
    let m_gamma = gamma * (d - c);
    let law_ok = spec.law.validate(n).is_ok() && cutoff.is_ok();
    conditions.push(ConditionCheck::new(
        "nonlinearity_majorant",
        if !law_ok {
            ConditionStatus::Fail
        } else if gamma == 0.0 {
            ConditionStatus::Pass
        } else {
            ConditionStatus::WindowRelative
        },
        format!("gamma = max(sup |f~|, Lip f~) = {gamma:e}; M_gamma = {m_gamma:e} on [{c}, {d}]"),
    ));
    constants.insert("gamma", gamma);
    constants.insert("M_gamma", m_gamma);
    constants.insert("drift_integral", drift_integral);

    let v_lambda = ide_linear(spec).and_then(|l| l.variation(c, d, 1e-10));
    let v_lambda = v_lambda.unwrap_or(f64::INFINITY);
    constants.insert("V_Lambda", v_lambda);

    let gate = dichotomy.map(|dd| {
        let k = dd.k;
        let value = m_gamma
            * (1.0 + k * (1.0 + 2.0 * k))
            * c_b.powi(3)
            * (3.0 * c_b * v_lambda).exp()
            * v_lambda
            * v_lambda;
        GateReport {
            formula: "M_gamma (1 + K(1 + 2K)) C_b^3 e^{3 C_b V_Lambda} V_Lambda^2 < 1",
            value,
            pass: value < 1.0,
        }
    });
    HypothesisReport {
        system: "ide",
        window,
        conditions,
        constants,
        gate,
    }
}

/// Evaluates every MDE hypothesis on `window`; gate constants need `dichotomy`.
pub fn check_mde_hypotheses(
    spec: &MdeSpec,
    window: (f64, f64),
    dichotomy: Option<&DichotomyData>,
) -> HypothesisReport {
    let (c, d) = window;
    let n = spec.dim;
    let id = DMatrix::identity(n, n);
    let (mut conditions, drift_integral) = drift_checks(
        &spec.drift,
        c,
        d,
        ["drift_integrable", "drift_integral_majorant"],
    );
    let mut constants = BTreeMap::new();
    constants.insert("drift_integral", drift_integral);

    // The measure type is left-continuous by construction; check variation and sign.
    let v_u = spec.u.variation(c, d, 1e-10).unwrap_or(f64::INFINITY);
    let negative = spec.u.first_negative(c, d, 64);
    conditions.push(ConditionCheck::verdict(
        "driver_bounded_variation",
        v_u.is_finite(),
        format!("var u = {v_u:e} on [{c}, {d}]; distribution is left-continuous"),
    ));
    let coupling_sup = spec.coupling.sup_norm_sampled(c, d, 64);
    let coupling_mass = coupling_sup * v_u;
    conditions.push(ConditionCheck::verdict(
        "coupling_integrable",
        coupling_sup.is_finite(),
        format!("sampled sup |C| = {coupling_sup:e}"),
    ));
    conditions.push(ConditionCheck::verdict(
        "coupling_integral_majorant",
        coupling_mass.is_finite(),
        format!("majorant m = sup |C| with integral {coupling_mass:e} against |du| on [{c}, {d}]"),
    ));

    let mut singular = Vec::new();
    let mut c_g = 1.0_f64;
    for &(t, w) in spec.u.atoms() {
        match inverse(&(&id + spec.coupling.eval(t) * w)) {
            Some(inv) => c_g = c_g.max(op_norm(&inv)),
            None => singular.push(t),
        }
    }
    conditions.push(ConditionCheck::verdict(
        "atom_jump_invertible",
        singular.is_empty(),
        if singular.is_empty() {
            format!(
                "I + C(t) w invertible at all {} atoms",
                spec.u.atoms().len()
            )
        } else {
            format!("I + C(t) w singular at t = {singular:?}")
        },
    ));
    let c_g = if singular.is_empty() {
        c_g
    } else {
        f64::INFINITY
    };
    conditions.push(ConditionCheck::verdict(
        "atom_jump_bound",
        c_g.is_finite(),
        format!("C_g = max(1, max |(I + C(t) w)^-1|) = {c_g:e}"),
    ));
    constants.insert("C_g", c_g);

    let atoms_only = !spec.u.has_density();
    conditions.push(ConditionCheck::new(
        "driver_nondecreasing",
        match negative {
            Some(_) => ConditionStatus::Fail,
            None if atoms_only => ConditionStatus::Pass,
            None => ConditionStatus::WindowRelative,
        },
        match negative {
            Some(t) => format!("u decreases near t = {t}"),
            None => format!("u nondecreasing; V_u = {v_u:e} on [{c}, {d}]"),
        },
    ));
    constants.insert("V_u", v_u);

    let cutoff = NonlinearitySpec::new(
        NonlinearityKind::MdeKernel,
        spec.law.clone(),
        spec.cutoff_radius,
    );
    let (m_h, l_h) = cutoff
        .as_ref()
        .map(|s| (s.bounds().bound, s.bounds().lipschitz))
        .unwrap_or((f64::NAN, f64::NAN));
    conditions.push(ConditionCheck::verdict(
        "kernel_bounded_lipschitz",
        spec.law.validate(n).is_ok() && cutoff.is_ok(),
        format!("M_H = {m_h:e}, L_H = {l_h:e} for the truncated kernel"),
    ));
    constants.insert("M_H", m_h);
    constants.insert("L_H", l_h);

    let v_lg = mde_linear(spec)
        .and_then(|l| l.variation(c, d, 1e-10))
        .unwrap_or(f64::INFINITY);
    constants.insert("V_Lambda_G", v_lg);
    let gate = dichotomy.map(|dd| {
        let k = dd.k;
        let value = 2.0
            * l_h
            * v_u
            * (1.0 + k * (1.0 + 2.0 * k))
            * c_g.powi(3)
            * (3.0 * c_g * v_lg).exp()
            * v_lg
            * v_lg;
        GateReport {
            formula: "2 L_H V_u (1 + K(1 + 2K)) C_g^3 e^{3 C_g V_{Lambda+G}} V_{Lambda+G}^2 < 1",
            value,
            pass: value < 1.0,
        }
    });
    HypothesisReport {
        system: "mde",
        window,
        conditions,
        constants,
        gate,
    }
}

/// Regularity of a raw generalized linear system with forcing `nonlinearity`.
pub fn check_linear_hypotheses(
    spec: &LinearSystemSpec,
    nonlinearity: &NonlinearitySpec,
    window: (f64, f64),
) -> HypothesisReport {
    let (c, d) = window;
    let mut conditions = Vec::new();
    let mut constants = BTreeMap::new();
    match spec.check_regularity(c, d) {
        Ok(r) => {
            conditions.push(ConditionCheck::verdict(
                "driving_path_bounded_variation",
                r.bounded_variation,
                format!("var Lambda = {:e} on [{c}, {d}]", r.variation),
            ));
            conditions.push(ConditionCheck::verdict(
                "jump_factors_invertible",
                r.singular_jumps.is_empty(),
                if r.singular_jumps.is_empty() {
                    format!("C_a = {:e}", r.c_a)
                } else {
                    format!(
                        "singular jump factors at {:?}",
                        r.singular_jumps.iter().map(|w| w.time).collect::<Vec<_>>()
                    )
                },
            ));
            constants.insert("V_Lambda", r.variation);
            constants.insert("C_a", r.c_a);
        }
        Err(e) => conditions.push(ConditionCheck::verdict(
            "driving_path_bounded_variation",
            false,
            e.to_string(),
        )),
    }
    let b = nonlinearity.bounds();
    constants.insert("forcing_bound", b.bound);
    constants.insert("forcing_lipschitz", b.lipschitz);
    HypothesisReport {
        system: "linear",
        window,
        conditions,
        constants,
        gate: None,
    }
}

pub fn linear_app_context(
    linear: &LinearSystemSpec,
    nonlinearity: &NonlinearitySpec,
    opts: &ContextOptions,
) -> Result<AppContext> {
    let (ctx, report, mode) = linear_to_context(linear.clone(), nonlinearity.clone(), opts)?;
    finish(ctx, report, mode, opts, |w, _| {
        check_linear_hypotheses(linear, nonlinearity, w)
    })
}

fn reject(report: &HypothesisReport) -> Result<()> {
    match report.first_failure() {
        Some(c) => Err(Error::Hypothesis {
            condition: c.name.to_string(),
            witness: c.detail.clone(),
        }),
        None => Ok(()),
    }
}

/// Projection, dichotomy fit and fixed-point context for a linear part.
pub fn linear_to_context(
    linear: LinearSystemSpec,
    nonlinearity: NonlinearitySpec,
    opts: &ContextOptions,
) -> Result<(LpContext, DichotomyReport, &'static str)> {
    let t0 = linear.t0();
    let choice = spectral_projection(&linear, t0, &opts.projection)?;
    let report = verify_dichotomy(&linear, &choice.matrix, t0, &opts.grid(t0), &opts.dichotomy)?;
    if !report.pass {
        return Err(Error::NotHyperbolic(format!(
            "dichotomy fit gave K = {:e}, alpha = {:e}",
            report.k, report.alpha
        )));
    }
    let data = DichotomyData {
        t0,
        p0: choice.matrix,
        k: report.k,
        alpha: report.alpha,
        heuristic: choice.heuristic,
    };
    let ctx = LpContext::new(linear, nonlinearity, data, opts.lp.clone())?;
    Ok((ctx, report, choice.mode))
}

fn finish(
    ctx: LpContext,
    report: DichotomyReport,
    mode: &'static str,
    opts: &ContextOptions,
    check: impl Fn((f64, f64), Option<&DichotomyData>) -> HypothesisReport,
) -> Result<AppContext> {
    let t0 = ctx.dichotomy.t0;
    let window = match opts.window {
        Some(w) => w,
        None => (t0, ctx.horizon_end(t0)?),
    };
    let hypotheses = check(window, Some(&ctx.dichotomy));
    reject(&hypotheses)?;
    Ok(AppContext {
        context: ctx,
        dichotomy: report,
        projection_mode: mode,
        hypotheses,
    })
}

pub fn ide_to_context(spec: &IdeSpec, opts: &ContextOptions) -> Result<AppContext> {
    if spec.dim == 0 {
        return Err(invalid("state dimension must be positive"));
    }
    // Singular impulses are reported by name before the linear spec rejects them.
    let id = DMatrix::identity(spec.dim, spec.dim);
    if let Some((t, _)) = spec
        .impulses
        .iter()
        .find(|(_, b)| inverse(&(&id + b)).is_none())
    {
        return Err(Error::Hypothesis {
            condition: "impulse_invertible".into(),
            witness: format!("I + B_i singular at t = {t}"),
        });
    }
    let law_spec = NonlinearitySpec::new(
        NonlinearityKind::IdePointwise,
        spec.law.clone(),
        spec.cutoff_radius,
    )?;
    spec.law.validate(spec.dim)?;
    let (ctx, report, mode) = linear_to_context(ide_linear(spec)?, law_spec, opts)?;
    finish(ctx, report, mode, opts, |w, d| {
        check_ide_hypotheses(spec, w, d)
    })
}

pub fn mde_to_context(spec: &MdeSpec, opts: &ContextOptions) -> Result<AppContext> {
    if spec.dim == 0 {
        return Err(invalid("state dimension must be positive"));
    }
    let (lo, hi) = opts.window.unwrap_or((spec.t0 - 10.0, spec.t0 + 50.0));
    if let Some(t) = spec.u.first_negative(lo, hi, 64) {
        return Err(Error::Hypothesis {
            condition: "driver_nondecreasing".into(),
            witness: format!("u decreases near t = {t}"),
        });
    }
    for &(t, w) in spec.u.atoms() {
        let n = spec.dim;
        if inverse(&(DMatrix::identity(n, n) + spec.coupling.eval(t) * w)).is_none() {
            return Err(Error::Hypothesis {
                condition: "atom_jump_invertible".into(),
                witness: format!("I + C(t) w singular at the atom t = {t}"),
            });
        }
    }
    let law_spec = NonlinearitySpec::new(
        NonlinearityKind::MdeKernel,
        spec.law.clone(),
        spec.cutoff_radius,
    )?;
    spec.law.validate(spec.dim)?;
    let (ctx, report, mode) = linear_to_context(mde_linear(spec)?, law_spec, opts)?;
    finish(ctx, report, mode, opts, |w, d| {
        check_mde_hypotheses(spec, w, d)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn saddle_ide(impulses: Vec<(f64, DMatrix<f64>)>) -> IdeSpec {
        IdeSpec {
            dim: 2,
            t0: 0.0,
            drift: PiecewisePath::constant(diag(&[-1.0, 1.0])),
            impulses,
            law: NonlinearLaw::Zero { dim: 2 },
            cutoff_radius: 0.5,
        }
    }

    #[test]
    fn impulse_variation_arithmetic() {
        let imps = (0..=20).map(|k| (k as f64, diag(&[0.1, 0.0]))).collect();
        let spec = IdeSpec {
            t0: 0.5,
            ..saddle_ide(imps)
        };
        let r = check_ide_hypotheses(&spec, (0.0, 10.0), None);
        assert!(
            (r.constants["V_Lambda"] - 11.0).abs() < 1e-8,
            "{:?}",
            r.constants
        );
    }

    #[test]
    fn singular_impulse_is_named() {
        let spec = saddle_ide(vec![(1.0, -DMatrix::identity(2, 2))]);
        let r = check_ide_hypotheses(&spec, (0.0, 2.0), None);
        assert_eq!(r.first_failure().unwrap().name, "impulse_invertible");
        match ide_to_context(&spec, &ContextOptions::default()) {
            Err(Error::Hypothesis { condition, .. }) => assert_eq!(condition, "impulse_invertible"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_law_gives_zero_forcing() {
        let spec = saddle_ide(vec![]);
        let opts = ContextOptions {
            lp: LpOptions {
                horizon: Some(10.0),
                ..LpOptions::default()
            },
            ..Default::default()
        };
        let app = ide_to_context(&spec, &opts).unwrap();
        assert_eq!(app.context.v_h(0.0, 10.0).unwrap(), 0.0);
        assert!((app.dichotomy.k - 1.0).abs() < 1e-6);
    }

    #[test]
    fn decreasing_driver_is_rejected() {
        let spec = MdeSpec {
            dim: 1,
            t0: 0.0,
            drift: PiecewisePath::scalar(-1.0),
            coupling: PiecewisePath::scalar(1.0),
            u: StieltjesMeasure::atomic(vec![(1.0, -0.2)]).unwrap(),
            law: NonlinearLaw::Zero { dim: 1 },
            cutoff_radius: 1.0,
        };
        let r = check_mde_hypotheses(&spec, (0.0, 2.0), None);
        assert_eq!(r.first_failure().unwrap().name, "driver_nondecreasing");
    }

    #[test]
    fn atom_adds_to_variation() {
        let spec = MdeSpec {
            dim: 1,
            t0: 0.0,
            drift: PiecewisePath::scalar(-1.0),
            coupling: PiecewisePath::scalar(1.0),
            u: StieltjesMeasure::atomic(vec![(1.0, 0.2)]).unwrap(),
            law: NonlinearLaw::Zero { dim: 1 },
            cutoff_radius: 1.0,
        };
        let r = check_mde_hypotheses(&spec, (0.0, 2.0), None);
        assert!(
            (r.constants["V_Lambda_G"] - 2.2).abs() < 1e-8,
            "{:?}",
            r.constants
        );
        assert!(r.all_hold());
    }
}
