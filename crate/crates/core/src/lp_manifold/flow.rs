//! Direct integration of the nonlinear equation and the escape oracles.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::LpContext;
use crate::error::{invalid, Error, Result};
use crate::linalg::inverse;
use crate::ode::{solve_observed, Control, OdeOptions};

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub tol: f64,
    /// Stop once `|z|` exceeds this radius.
    pub escape_radius: f64,
    /// Use the truncated law instead of the raw one.
    pub cut: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            escape_radius: f64::INFINITY,
            cut: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    /// Final time: the target, or the escape time.
    pub t: f64,
    pub state: DVector<f64>,
    pub escaped: bool,
    pub max_norm: f64,
}

/// Integrates the nonlinear equation from `(s, z0)` to `t_end`.
///
/// Smooth pieces use DOPRI5; at an event the left jump `(I - D)^-1` is applied on
/// arrival and the right jump `z + B z + C w z + f(z) w` on departure.
pub fn flow(
    ctx: &LpContext,
    z0: &DVector<f64>,
    s: f64,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let n = ctx.linear.dim();
    if z0.len() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, 1),
            got: (z0.len(), 1),
        });
    }
    if t_end < s {
        return Err(invalid("flow runs forward only"));
    }
    let law = |z: &DVector<f64>| {
        if opts.cut {
            ctx.nonlinearity.eval(z)
        } else {
            ctx.nonlinearity.eval_raw(z)
        }
    };
    let id = DMatrix::identity(n, n);
    let events = ctx.linear.event_times();
    let atoms: Vec<f64> = ctx.driver().atoms().iter().map(|a| a.0).collect();
    let is_jump = |t: f64| events.contains(&t) || atoms.contains(&t);
    let depart = |t: f64, z: DVector<f64>| -> DVector<f64> {
        let w = ctx.driver().atom_weight(t);
        let mut out = &z + ctx.linear.right_jump(t) * &z;
        if w != 0.0 {
            out += law(&z) * w;
        }
        out
    };

    let mut breaks: Vec<f64> = events.clone();
    breaks.extend(&atoms);
    breaks.extend(ctx.linear.generator_breaks());
    breaks.extend(ctx.driver().density().breakpoint_times());
    breaks.retain(|&t| t > s && t < t_end);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.push(t_end);

    let mut t = s;
    let mut z = z0.clone();
    let mut max_norm = z.norm();
    let escaped = |z: &DVector<f64>| z.norm() > opts.escape_radius;
    if escaped(&z) {
        return Ok(FlowResult {
            t,
            state: z,
            escaped: true,
            max_norm,
        });
    }
    if is_jump(s) && s < t_end {
        z = depart(s, z);
        max_norm = max_norm.max(z.norm());
        if escaped(&z) {
            return Ok(FlowResult {
                t,
                state: z,
                escaped: true,
                max_norm,
            });
        }
    }
    let ode_opts = OdeOptions {
        rtol: opts.tol,
        atol: opts.tol * 1e-2,
        ..OdeOptions::default()
    };
    for &b in &breaks {
        if b > t {
            let gen = ctx.linear.generator().segment_right_of(t).clone();
            let rho = ctx.driver().density().segment_right_of(t).clone();
            let rhs = |tau: f64, y: &DVector<f64>, dy: &mut DVector<f64>| {
                let r = rho.eval(tau)[(0, 0)];
                let mut v = gen.eval(tau) * y;
                if r != 0.0 {
                    v += law(y) * r;
                }
                dy.copy_from(&v);
            };
            let mut hit: Option<(f64, DVector<f64>)> = None;
            let mut peak = max_norm;
            let outcome = solve_observed(rhs, t, &z, b, &ode_opts, |step| {
                let end = step.end();
                if end.norm() > opts.escape_radius {
                    let (mut lo, mut hi) = (step.t_start, step.t_end);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if step.eval(mid).norm() > opts.escape_radius {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hit = Some((hi, step.eval(hi)));
                    return Control::Stop;
                }
                peak = peak.max(end.norm());
                Control::Continue
            });
            let outcome = match outcome {
                Ok(o) => o,
                // Blow-up inside a step that also overshoots the radius counts as escape.
                Err(Error::Integrator { t: tf, .. })
                    if opts.escape_radius.is_finite() && hit.is_none() =>
                {
                    return Ok(FlowResult {
                        t: tf,
                        state: z,
                        escaped: true,
                        max_norm: f64::INFINITY,
                    });
                }
                Err(e) => return Err(e),
            };
            max_norm = peak;
            if let Some((te, ze)) = hit {
                return Ok(FlowResult {
                    t: te,
                    max_norm: max_norm.max(ze.norm()),
                    state: ze,
                    escaped: true,
                });
            }
            z = outcome.y;
            t = b;
        }
        if let Some(d) = ctx.linear.left_jump(b) {
            let inv = inverse(&(&id - d)).ok_or(Error::SingularJump {
                time: b,
                detail: "I - left jump is singular".into(),
            })?;
            z = inv * z;
        }
        max_norm = max_norm.max(z.norm());
        if escaped(&z) {
            return Ok(FlowResult {
                t: b,
                state: z,
                escaped: true,
                max_norm,
            });
        }
        if b < t_end && is_jump(b) {
            z = depart(b, z);
            max_norm = max_norm.max(z.norm());
            if escaped(&z) {
                return Ok(FlowResult {
                    t: b,
                    state: z,
                    escaped: true,
                    max_norm,
                });
            }
        }
    }
    Ok(FlowResult {
        t: t_end,
        state: z,
        escaped: false,
        max_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ClassifyVerdict {
    /// Stayed inside the escape radius up to the horizon.
    Candidate {
        horizon: f64,
        max_norm: f64,
    },
    Escapes {
        time: f64,
    },
    Indeterminate {
        reason: String,
    },
}

/// Flows the raw equation from `(s, z0)` and reports whether it escapes before `T`.
pub fn classify_initial(
    ctx: &LpContext,
    z0: &DVector<f64>,
    s: f64,
    escape_radius: f64,
) -> Result<ClassifyVerdict> {
    let horizon = ctx.horizon_end(s)?;
    let opts = FlowOptions {
        escape_radius,
        cut: false,
        ..FlowOptions::default()
    };
    match flow(ctx, z0, s, horizon, &opts) {
        Ok(r) if r.escaped => Ok(ClassifyVerdict::Escapes { time: r.t }),
        Ok(r) => Ok(ClassifyVerdict::Candidate {
            horizon,
            max_norm: r.max_norm,
        }),
        Err(e) if e.is_non_convergence() => Ok(ClassifyVerdict::Indeterminate {
            reason: e.to_string(),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    /// Unstable coordinate of the manifold over the given stable coordinates.
    pub eta: f64,
    pub bracket: (f64, f64),
    pub width: f64,
    pub flows: usize,
}

/// Locates the manifold along the one-dimensional unstable fibre by bisection on
/// the side of escape. Needs `dim E^u = 1`.
pub fn bisect_manifold_oracle(
    ctx: &LpContext,
    s: f64,
    coords: &[f64],
    bracket: (f64, f64),
    escape_radius: f64,
    width: f64,
) -> Result<OracleResult> {
    let disc = ctx.discretize(s, &[])?;
    if disc.unstable_at_s.ncols() != 1 {
        return Err(invalid(format!(
            "bisection oracle needs a one-dimensional unstable fibre, got {}",
            disc.unstable_at_s.ncols()
        )));
    }
    let zeta = disc.zeta_from_coords(coords)?;
    let u = disc.unstable_at_s.column(0).into_owned();
    let j0 = disc.start;
    let orientation = u.dot(&disc.family.unstable_basis(j0).column(0)).signum();
    let nodes = disc.operator.nodes();
    let opts = FlowOptions {
        escape_radius,
        cut: false,
        ..FlowOptions::default()
    };
    let mut flows = 0usize;
    let mut side = |eta: f64| -> Result<f64> {
        flows += 1;
        let z0 = &zeta + &u * eta;
        let r = flow(ctx, &z0, s, disc.t_end, &opts)?;
        let j = nodes
            .partition_point(|nd| nd.time <= r.t)
            .saturating_sub(1)
            .clamp(j0, disc.stop);
        let c = (disc.family.unstable_coords(j) * &r.state)[0];
        Ok((orientation * c).signum())
    };
    let (mut lo, mut hi) = bracket;
    let (slo, shi) = (side(lo)?, side(hi)?);
    if slo == shi || slo == 0.0 || shi == 0.0 {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let sm = side(mid)?;
        if sm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if sm == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(OracleResult {
        eta: 0.5 * (lo + hi),
        bracket,
        width: hi - lo,
        flows,
    })
}

#[cfg(test)]
mod tests {
    use super::super::solve_lp;
    use super::super::tests::planar;
    use super::*;

    #[test]
    fn offset_initial_value_escapes() {
        let ctx = planar(40.0);
        let z0 = DVector::from_vec(vec![0.1, -0.01 / 3.0 + 0.01]);
        let v = classify_initial(&ctx, &z0, 0.0, 1e3).unwrap();
        assert!(matches!(v, ClassifyVerdict::Escapes { .. }), "{v:?}");
    }

    #[test]
    fn bisection_finds_the_quadratic_graph() {
        let ctx = planar(40.0);
        let r = bisect_manifold_oracle(&ctx, 0.0, &[0.1], (-0.1, 0.1), 1e3, 1e-7).unwrap();
        // the unstable basis at s is +-e2
        assert!((r.eta.abs() - 0.01 / 3.0).abs() < 1e-5, "{r:?}");
        let disc = ctx.discretize(0.0, &[]).unwrap();
        let sol = solve_lp(&ctx, &disc, &disc.zeta_from_coords(&[0.1]).unwrap()).unwrap();
        assert!((sol.m_coords[0] - r.eta).abs() < 1e-5);
    }
}
