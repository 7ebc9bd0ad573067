//! Evaluations of the LP operator on a mesh path.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Discretization, Forcing, LpContext, LpMode, SolutionPath};
use crate::error::{Error, Result};
use crate::kurzweil::{ks_integral_ref, ClosureFn, ReferenceOptions};

/// One application of the LP operator to `z`, returning the new path.
pub fn lp_operator_apply(
    ctx: &LpContext,
    disc: &Discretization,
    z: &SolutionPath,
    zeta: &DVector<f64>,
    mode: LpMode,
) -> Result<SolutionPath> {
    let nodes = disc.nodes();
    if z.nodes.len() != nodes.len() || z.nodes.iter().zip(nodes).any(|(a, b)| a != b) {
        return Err(Error::MeshMismatch(format!(
            "path has {} nodes, the LP window has {}; every atom and event must be a node",
            z.nodes.len(),
            nodes.len()
        )));
    }
    let values = apply_values(ctx, disc, &z.values, zeta, mode)?;
    Ok(SolutionPath {
        nodes: nodes.to_vec(),
        values,
    })
}

pub(crate) fn apply_values(
    ctx: &LpContext,
    disc: &Discretization,
    z: &[DVector<f64>],
    zeta: &DVector<f64>,
    mode: LpMode,
) -> Result<Vec<DVector<f64>>> {
    match mode {
        LpMode::Fast => Ok(fast(ctx, disc, z, zeta)),
        LpMode::Reference => reference(ctx, disc, z, zeta),
    }
}

/// Reduced recursion: trapezoidal cells for the density, exact atoms.
fn fast(
    ctx: &LpContext,
    disc: &Discretization,
    z: &[DVector<f64>],
    zeta: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let m = disc.len();
    let n = zeta.len();
    let g: Vec<DVector<f64>> = z.iter().map(|x| ctx.nonlinearity.eval(x)).collect();
    let cells = &disc.operator.cells()[disc.start..disc.stop];
    let p: Vec<&DMatrix<f64>> = (0..m).map(|i| disc.projection(i)).collect();
    let q: Vec<DMatrix<f64>> = (0..m).map(|i| disc.complement(i)).collect();

    let y = disc.linear_part(zeta);
    let mut stable = vec![DVector::zeros(n); m];
    for i in 0..m - 1 {
        let c = &cells[i].forward;
        let inner = match disc.forcing[i] {
            Forcing::Smooth {
                h,
                rho_right,
                rho_left,
            } => {
                c * (&stable[i] + p[i] * &g[i] * (0.5 * h * rho_right))
                    + p[i + 1] * &g[i + 1] * (0.5 * h * rho_left)
            }
            Forcing::Atom { weight } => c * &stable[i] + &g[i] * weight,
            Forcing::Silent => c * &stable[i],
        };
        stable[i + 1] = p[i + 1] * inner;
    }
    let mut unstable = vec![DVector::zeros(n); m];
    for i in (0..m - 1).rev() {
        let ci = &cells[i].inverse;
        let inner = match disc.forcing[i] {
            Forcing::Smooth {
                h,
                rho_right,
                rho_left,
            } => {
                ci * (&unstable[i + 1] + &q[i + 1] * &g[i + 1] * (0.5 * h * rho_left))
                    + &q[i] * &g[i] * (0.5 * h * rho_right)
            }
            Forcing::Atom { weight } => ci * (&unstable[i + 1] + &q[i + 1] * &g[i] * weight),
            Forcing::Silent => ci * &unstable[i + 1],
        };
        unstable[i] = &q[i] * inner;
    }
    (0..m).map(|i| &y[i] + &stable[i] - &unstable[i]).collect()
}

/// Integration-by-parts form
///
/// ```text
/// z(t) = V(t,s) zeta + F(t) - int_s^t d[W_t] F + int_t^T d[X_t] F - X_t(T) F(T)
/// ```
///
/// with `F(sigma) = int_s^sigma f~(z) dN`, `W_t(sigma) = V(t,sigma) P(sigma)` and
/// `X_t(sigma) = V(t,sigma) Q(sigma)`. The inner `F` is accumulated from gauge
/// integrals over half cells; the outer Stieltjes sums use cell midpoints as tags
/// and are accumulated node by node, which gives the same sums as the double loop.
fn reference(
    ctx: &LpContext,
    disc: &Discretization,
    z: &[DVector<f64>],
    zeta: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let m = disc.len();
    let n = zeta.len();
    let nodes = disc.nodes();
    let cells = &disc.operator.cells()[disc.start..disc.stop];
    let mass = ctx.density_mass();

    let increments: Vec<(DVector<f64>, DVector<f64>)> = (0..m - 1)
        .into_par_iter()
        .map(|i| -> Result<(DVector<f64>, DVector<f64>)> {
            match disc.forcing[i] {
                Forcing::Smooth { .. } => {
                    let (a, b) = (nodes[i].time, nodes[i + 1].time);
                    let (za, zb) = (&z[i], &z[i + 1]);
                    let base = mass.right_limit(a)[(0, 0)];
                    let v = ClosureFn {
                        shape: (n, 1),
                        f: |tau: f64, t: f64| {
                            let w = (tau - a) / (b - a);
                            let zl = za * (1.0 - w) + zb * w;
                            let d = mass.eval(t)[(0, 0)] - base;
                            DMatrix::from_column_slice(
                                n,
                                1,
                                (ctx.nonlinearity.eval(&zl) * d).as_slice(),
                            )
                        },
                        pins: vec![],
                        splits: vec![],
                    };
                    let mid = 0.5 * (a + b);
                    let opts = ReferenceOptions {
                        tol: ctx.options.reference_tol * (b - a),
                        min_rounds: 2,
                        max_rounds: 24,
                    };
                    let left = ks_integral_ref(&v, a, mid, &opts)?.value;
                    let full = ks_integral_ref(&v, mid, b, &opts)?.value + &left;
                    Ok((
                        DVector::from_column_slice(left.as_slice()),
                        DVector::from_column_slice(full.as_slice()),
                    ))
                }
                Forcing::Atom { weight } => {
                    let jump = ctx.nonlinearity.eval(&z[i]) * weight;
                    Ok((DVector::zeros(n), jump))
                }
                Forcing::Silent => Ok((DVector::zeros(n), DVector::zeros(n))),
            }
        })
        .collect::<Result<_>>()?;

    // F at nodes and at the tag of each cell.
    let mut f_node = Vec::with_capacity(m);
    let mut f_tag = Vec::with_capacity(m - 1);
    f_node.push(DVector::zeros(n));
    for (i, (to_tag, whole)) in increments.iter().enumerate() {
        f_tag.push(&f_node[i] + to_tag);
        let next = &f_node[i] + whole;
        f_node.push(next);
    }

    // int_s^t d[W_t] F = P(t) R(t), with R(t_{i+1}) = C_i P_i R(t_i) + (I - C_i P_i) F(tag_i).
    let mut r_w = vec![DVector::zeros(n); m];
    for i in 0..m - 1 {
        let c = &cells[i].forward;
        let p = disc.projection(i);
        r_w[i + 1] = c * (p * (&r_w[i] - &f_tag[i])) + &f_tag[i];
    }
    // int_t^T d[X_t] F - X_t(T) F(T) = Q(t) R(t), with R(T) = -F(T) and
    // R(t_i) = C_i^-1 Q_{i+1} (R(t_{i+1}) + F(tag_i)) - F(tag_i).
    let mut r_x = vec![DVector::zeros(n); m];
    r_x[m - 1] = -&f_node[m - 1];
    for i in (0..m - 1).rev() {
        let ci = &cells[i].inverse;
        let q = disc.complement(i + 1);
        r_x[i] = ci * (q * (&r_x[i + 1] + &f_tag[i])) - &f_tag[i];
    }

    let y = disc.linear_part(zeta);
    Ok((0..m)
        .map(|i| &y[i] + &f_node[i] - disc.projection(i) * &r_w[i] + disc.complement(i) * &r_x[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::tests::planar;
    use super::super::{solve_lp, LpMode};
    use super::*;

    #[test]
    fn fast_and_reference_agree_on_planar_benchmark() {
        let mut ctx = planar(12.0);
        ctx.options.mesh_step = 0.02;
        let disc = ctx.discretize(0.0, &[]).unwrap();
        let zeta = disc.zeta_from_coords(&[0.2]).unwrap();
        let fast = solve_lp(&ctx, &disc, &zeta).unwrap();
        ctx.options.mode = LpMode::Reference;
        let reference = solve_lp(&ctx, &disc, &zeta).unwrap();
        let d = fast.path.sup_distance(&reference.path);
        assert!(d < 1e-5, "sup distance {d}");
    }

    #[test]
    fn foreign_mesh_is_rejected() {
        let ctx = planar(5.0);
        let disc = ctx.discretize(0.0, &[]).unwrap();
        let zeta = disc.zeta_from_coords(&[0.1]).unwrap();
        let path = SolutionPath {
            nodes: disc.nodes()[1..].to_vec(),
            values: vec![zeta.clone(); disc.len() - 1],
        };
        assert!(matches!(
            lp_operator_apply(&ctx, &disc, &path, &zeta, LpMode::Fast),
            Err(Error::MeshMismatch(_))
        ));
    }
}
