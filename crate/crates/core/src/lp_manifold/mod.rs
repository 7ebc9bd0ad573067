//! Lyapunov-Perron fixed point for the local stable manifold.
//!
//! The operator is
//!
//! ```text
//! z(t) = V(t,s) zeta + int_[s,t) V(t,sigma) P(sigma) dF - int_[t,T) V(t,sigma) Q(sigma) dF
//! ```
//!
//! where `dF = f~(z(sigma)) dN(sigma)` with `N` the driver measure. Atoms of `N`
//! act on the post-jump state, so their contribution is propagated by
//! `V(t, sigma+)`. Forward integrals are truncated at the horizon `T`.
//!
//! Two evaluations are provided: a reduced recursion on the mesh ([`LpMode::Fast`])
//! and the integration-by-parts form with inner gauge integrals ([`LpMode::Reference`]).

mod flow;
mod operator;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{DichotomyData, ProjectionFamily};
use crate::error::{invalid, Error, Result};
use crate::funcspace::{PiecewisePath, Side, StieltjesMeasure};
use crate::linalg::column_basis;
use crate::linsys::{CellKind, FundamentalOperator, LinearSystemSpec, MeshNode, MeshRequest};
use crate::nonlinear::{NonlinearityKind, NonlinearitySpec};

pub use flow::{
    bisect_manifold_oracle, classify_initial, flow, ClassifyVerdict, FlowOptions, FlowResult,
    OracleResult,
};
pub use operator::lp_operator_apply;

/// Relative tolerance for `zeta` lying in the stable fibre.
pub const STABLE_FIBRE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpMode {
    Fast,
    Reference,
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Sup-norm stopping tolerance of the Picard iteration.
    pub tol: f64,
    /// `T - s`; `None` derives it from the dichotomy constants.
    pub horizon: Option<f64>,
    pub mesh_step: f64,
    pub max_iter: usize,
    pub mode: LpMode,
    /// Keep iterating even when the differences stop shrinking.
    pub force: bool,
    /// Tolerance per unit time of the inner gauge integrals in reference mode.
    pub reference_tol: f64,
    /// Extra mesh beyond the LP window so the fibre sweeps settle.
    pub family_margin: f64,
    /// Added to the derived horizon.
    pub tail_margin: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            horizon: None,
            mesh_step: 0.01,
            max_iter: 200,
            mode: LpMode::Fast,
            force: false,
            reference_tol: 1e-10,
            family_margin: 10.0,
            tail_margin: 5.0,
        }
    }
}

impl LpOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.mesh_step > 0.0 && self.reference_tol > 0.0) {
            return Err(invalid("LP tolerances and mesh step must be positive"));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(invalid("LP horizon must be positive"));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be positive"));
        }
        if !(self.family_margin >= 0.0 && self.tail_margin >= 0.0) {
            return Err(invalid("margins must be non-negative"));
        }
        Ok(())
    }
}

/// Everything the fixed-point problem needs.
#[derive(Clone, Debug)]
pub struct LpContext {
    pub linear: LinearSystemSpec,
    pub nonlinearity: NonlinearitySpec,
    pub dichotomy: DichotomyData,
    pub options: LpOptions,
    driver: StieltjesMeasure,
    density_mass: PiecewisePath,
}

impl LpContext {
    pub fn new(
        linear: LinearSystemSpec,
        nonlinearity: NonlinearitySpec,
        dichotomy: DichotomyData,
        options: LpOptions,
    ) -> Result<Self> {
        let n = linear.dim();
        if nonlinearity.dim() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, 1),
                got: (nonlinearity.dim(), 1),
            });
        }
        if dichotomy.p0.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: dichotomy.p0.shape(),
            });
        }
        options.validate()?;
        let driver = match &nonlinearity.kind {
            NonlinearityKind::IdePointwise => StieltjesMeasure::lebesgue(),
            NonlinearityKind::MdeKernel => linear
                .coupling()
                .map(|c| c.measure.clone())
                .ok_or_else(|| invalid("a measure-driven nonlinearity needs a coupling measure"))?,
            NonlinearityKind::GenericClassF { modulus } => modulus.clone(),
        };
        let density_mass = driver.density().antiderivative(0.0);
        Ok(Self {
            linear,
            nonlinearity,
            dichotomy,
            options,
            driver,
            density_mass,
        })
    }

    /// The measure `N` with `dF = f~(z) dN`.
    pub fn driver(&self) -> &StieltjesMeasure {
        &self.driver
    }

    /// `V_h` on `[c, d]`: the cutoff modulus times the driver variation.
    pub fn v_h(&self, c: f64, d: f64) -> Result<f64> {
        let m = self.nonlinearity.bounds().modulus();
        if m == 0.0 {
            return Ok(0.0);
        }
        Ok(m * self.driver.variation(c, d, 1e-12)?)
    }

    /// End of the LP window starting at `s`.
    ///
    /// Without an explicit horizon, `T - s` makes the dropped tail
    /// `K e^{-alpha (T - s)} 2 V_h` (per unit window) fall below `tol`.
    pub fn horizon_end(&self, s: f64) -> Result<f64> {
        if let Some(h) = self.options.horizon {
            return Ok(s + h);
        }
        let (k, alpha) = (self.dichotomy.k, self.dichotomy.alpha);
        if !(alpha > 0.0) {
            return Err(Error::NotHyperbolic(format!(
                "dichotomy rate {alpha} is not positive"
            )));
        }
        let vh = self.v_h(s, s + 1.0)?;
        let ratio = (2.0 * k * vh / self.options.tol).max(1.0);
        Ok(s + (ratio.ln() / alpha + self.options.tail_margin).min(500.0))
    }

    /// Mesh, operator and projection family for the LP window at `s`.
    pub fn discretize(&self, s: f64, extra_times: &[f64]) -> Result<Discretization> {
        if !s.is_finite() {
            return Err(invalid("initial time must be finite"));
        }
        let t_end = self.horizon_end(s)?;
        let t0 = self.dichotomy.t0;
        let margin = self.options.family_margin;
        let lo = if s < t0 { s - margin } else { t0 };
        let hi = t_end.max(t0) + margin;
        let h = self.options.mesh_step;
        let mut times = vec![s, t_end, t0];
        times.extend(
            extra_times
                .iter()
                .copied()
                .filter(|&t| t >= s && t <= t_end),
        );
        times.extend((1..=3).map(|j| s + h * 0.5f64.powi(j)));
        times.extend(self.driver.density().breakpoint_times());
        let atom_times: Vec<f64> = self
            .driver
            .atoms()
            .iter()
            .map(|a| a.0)
            .filter(|&t| t >= lo && t <= hi)
            .collect();
        let request = MeshRequest {
            window: (lo, hi),
            max_step: h,
            times,
            atom_times,
        };
        let operator = FundamentalOperator::new(&self.linear, &request)?;
        let family = ProjectionFamily::build(&operator, t0, &self.dichotomy.p0)?;
        let start = operator.at_index(s).expect("s is a requested node");
        let stop = operator.at_index(t_end).expect("T is a requested node");
        let nodes = operator.nodes();
        let forcing = (start..stop)
            .map(|k| {
                let (a, b) = (nodes[k], nodes[k + 1]);
                match operator.cells()[k].kind {
                    CellKind::Smooth => Forcing::Smooth {
                        h: b.time - a.time,
                        rho_right: self.driver.density().right_limit(a.time)[(0, 0)],
                        rho_left: self.driver.density().left_limit(b.time)[(0, 0)],
                    },
                    CellKind::Jump if a.side == Side::At && b.side == Side::Plus => Forcing::Atom {
                        weight: self.driver.atom_weight(a.time),
                    },
                    CellKind::Jump => Forcing::Silent,
                }
            })
            .collect();
        let n = self.linear.dim();
        let stable_at_s = column_basis(family.projection(start), 1e-8);
        let unstable_at_s = column_basis(&family.complement_projection(start), 1e-8);
        if stable_at_s.ncols() != family.rank() || unstable_at_s.ncols() != n - family.rank() {
            return Err(Error::NotProjection { residual: f64::NAN });
        }
        Ok(Discretization {
            s,
            t_end,
            operator,
            family,
            start,
            stop,
            forcing,
            stable_at_s,
            unstable_at_s,
        })
    }

    pub(crate) fn density_mass(&self) -> &PiecewisePath {
        &self.density_mass
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Forcing {
    Smooth {
        h: f64,
        rho_right: f64,
        rho_left: f64,
    },
    Atom {
        weight: f64,
    },
    /// Jump cells carrying no driver mass.
    Silent,
}

/// The LP window `[s, T]` on a mesh, with the projection family.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub s: f64,
    pub t_end: f64,
    pub operator: FundamentalOperator,
    pub family: ProjectionFamily,
    /// Node index of `s`.
    pub start: usize,
    /// Node index of `T`.
    pub stop: usize,
    pub(crate) forcing: Vec<Forcing>,
    /// Orthonormal basis of `P(s)` used for graph coordinates.
    pub stable_at_s: DMatrix<f64>,
    /// Orthonormal basis of `Q(s)`.
    pub unstable_at_s: DMatrix<f64>,
}

impl Discretization {
    pub fn nodes(&self) -> &[MeshNode] {
        &self.operator.nodes()[self.start..=self.stop]
    }

    pub fn len(&self) -> usize {
        self.stop - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn projection(&self, i: usize) -> &DMatrix<f64> {
        self.family.projection(self.start + i)
    }

    pub fn complement(&self, i: usize) -> DMatrix<f64> {
        self.family.complement_projection(self.start + i)
    }

    /// `V(t, s) zeta` on the mesh.
    pub fn linear_part(&self, zeta: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut y = Vec::with_capacity(self.len());
        y.push(zeta.clone());
        for i in 0..self.len() - 1 {
            let c = &self.operator.cells()[self.start + i].forward;
            let next = self.projection(i + 1) * (c * &y[i]);
            y.push(next);
        }
        y
    }

    /// State from stable-fibre coordinates in [`Self::stable_at_s`].
    pub fn zeta_from_coords(&self, coords: &[f64]) -> Result<DVector<f64>> {
        if coords.len() != self.stable_at_s.ncols() {
            return Err(Error::ShapeMismatch {
                expected: (self.stable_at_s.ncols(), 1),
                got: (coords.len(), 1),
            });
        }
        Ok(&self.stable_at_s * DVector::from_column_slice(coords))
    }
}

/// Values of a path at the mesh nodes.
#[derive(Clone, Debug)]
pub struct SolutionPath {
    pub nodes: Vec<MeshNode>,
    pub values: Vec<DVector<f64>>,
}

impl SolutionPath {
    /// Value at the `At` node of `t`, if `t` is a node.
    pub fn at(&self, t: f64) -> Option<&DVector<f64>> {
        self.nodes
            .iter()
            .position(|n| n.time == t && n.side == Side::At)
            .map(|i| &self.values[i])
    }

    /// Value at `t`, interpolating linearly between nodes and clamping outside.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        if let Some(v) = self.at(t) {
            return v.clone();
        }
        let i = self.nodes.partition_point(|n| n.time < t);
        if i == 0 {
            return self.values[0].clone();
        }
        if i >= self.nodes.len() {
            return self.values[self.nodes.len() - 1].clone();
        }
        let (a, b) = (self.nodes[i - 1].time, self.nodes[i].time);
        let w = (t - a) / (b - a);
        &self.values[i - 1] * (1.0 - w) + &self.values[i] * w
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &SolutionPath) -> f64 {
        sup_diff(&self.values, &other.values)
    }
}

pub(crate) fn sup_diff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Theoretical and empirical contraction data.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionEstimate {
    pub window: (f64, f64),
    pub v_h: f64,
    pub c_a: f64,
    pub v_lambda: f64,
    pub k: f64,
    /// `2 V_h (1 + K(1 + 2K)) C_a^3 e^{3 C_a V_Lambda} V_Lambda^2`.
    pub l_theory: f64,
    /// The same bound with a single factor `V_h`.
    pub l_theory_single: f64,
    /// Bound on the accumulated-forcing operator with `N = 2 V_h`.
    pub h_operator_bound: f64,
    pub l_emp: Option<f64>,
    /// The theoretical bound fails to certify a contraction that is observed.
    pub conservative: bool,
}

/// `2 V_h (1 + K(1 + 2K)) C_a^3 e^{3 C_a V_Lambda} V_Lambda^2`.
pub fn lp_contraction_constant(v_h: f64, k: f64, c_a: f64, v_lambda: f64) -> f64 {
    2.0 * v_h
        * (1.0 + k * (1.0 + 2.0 * k))
        * c_a.powi(3)
        * (3.0 * c_a * v_lambda).exp()
        * v_lambda
        * v_lambda
}

/// `2 N K (1 + 2K) C_a^3 e^{3 C_a V_Lambda} V_Lambda^2` for `|f| <= N`.
pub fn h_operator_bound(n_bound: f64, k: f64, c_a: f64, v_lambda: f64) -> f64 {
    2.0 * n_bound
        * k
        * (1.0 + 2.0 * k)
        * c_a.powi(3)
        * (3.0 * c_a * v_lambda).exp()
        * v_lambda
        * v_lambda
}

pub fn contraction_estimate(
    ctx: &LpContext,
    s: f64,
    t_end: f64,
    l_emp: Option<f64>,
) -> Result<ContractionEstimate> {
    let reg = ctx.linear.check_regularity(s, t_end)?;
    let v_h = ctx.v_h(s, t_end)?;
    let k = ctx.dichotomy.k;
    let l_theory = lp_contraction_constant(v_h, k, reg.c_a, reg.variation);
    let conservative = l_theory >= 1.0 && l_emp.is_some_and(|l| l < 1.0);
    Ok(ContractionEstimate {
        window: (s, t_end),
        v_h,
        c_a: reg.c_a,
        v_lambda: reg.variation,
        k,
        l_theory,
        l_theory_single: 0.5 * l_theory,
        h_operator_bound: h_operator_bound(2.0 * v_h, k, reg.c_a, reg.variation),
        l_emp,
        conservative,
    })
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub s: f64,
    pub t_end: f64,
    pub zeta: DVector<f64>,
    pub path: SolutionPath,
    /// `Q(s) z(s)`.
    pub m_vector: DVector<f64>,
    /// `m_vector` in the unstable basis at `s`.
    pub m_coords: DVector<f64>,
    pub iterations: usize,
    /// Sup-norm difference of the last two iterates.
    pub residual: f64,
    pub differences: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Largest observed ratio of successive differences above the noise floor.
    pub l_emp: f64,
    pub mode: LpMode,
    /// `K e^{-alpha (T - s)} 2 V_h`, the size of the dropped tail.
    pub tail_bound: f64,
}

/// Iterates the LP operator from `z_0 = V(., s) zeta`.
pub fn solve_lp(ctx: &LpContext, disc: &Discretization, zeta: &DVector<f64>) -> Result<LpSolution> {
    let n = ctx.linear.dim();
    if zeta.len() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, 1),
            got: (zeta.len(), 1),
        });
    }
    let residual = (disc.complement(0) * zeta).norm();
    if residual > STABLE_FIBRE_TOL * zeta.norm().max(1.0) {
        return Err(Error::NotInStableSpace { residual });
    }
    let opts = &ctx.options;
    let mut z = disc.linear_part(zeta);
    let mut diffs: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut growing = 0usize;
    let mut l_emp = 0.0_f64;
    let mut iterations = 0;
    let mut last = f64::INFINITY;
    while iterations < opts.max_iter {
        let next = operator::apply_values(ctx, disc, &z, zeta, opts.mode)?;
        iterations += 1;
        let diff = sup_diff(&next, &z);
        if let Some(&prev) = diffs.last() {
            if prev > 0.0 {
                let ratio = diff / prev;
                ratios.push(ratio);
                if prev > 1e3 * opts.tol {
                    l_emp = l_emp.max(ratio);
                }
                if ratio >= 1.0 && diff > 10.0 * opts.tol {
                    growing += 1;
                } else {
                    growing = 0;
                }
            }
        }
        diffs.push(diff);
        z = next;
        last = diff;
        log::debug!("LP iteration {iterations}: difference {diff:.3e}");
        if diff < opts.tol {
            break;
        }
        if growing >= 3 && !opts.force {
            return Err(Error::NotContracting { ratios });
        }
    }
    if last >= opts.tol {
        return Err(Error::MaxIterations {
            max_iter: opts.max_iter,
            residual: last,
        });
    }
    let m_vector = &z[0] - zeta;
    let m_coords = disc.unstable_at_s.transpose() * &m_vector;
    let tail = ctx.dichotomy.k
        * (-ctx.dichotomy.alpha * (disc.t_end - disc.s)).exp()
        * 2.0
        * ctx.v_h(disc.s, disc.t_end)?;
    Ok(LpSolution {
        s: disc.s,
        t_end: disc.t_end,
        zeta: zeta.clone(),
        path: SolutionPath {
            nodes: disc.nodes().to_vec(),
            values: z,
        },
        m_vector,
        m_coords,
        iterations,
        residual: last,
        differences: diffs,
        ratios,
        l_emp,
        mode: opts.mode,
        tail_bound: tail,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphSample {
    /// Stable-fibre coordinates of `zeta`.
    pub coords: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Unstable coordinates of the graph value `m(s, zeta)`.
    pub m_coords: Vec<f64>,
    pub m_vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub l_emp: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphFailure {
    pub coords: Vec<f64>,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifoldGraph {
    pub s: f64,
    pub t_end: f64,
    pub samples: Vec<GraphSample>,
    pub failures: Vec<GraphFailure>,
    /// Largest pairwise quotient `|m_i - m_j| / |zeta_i - zeta_j|`.
    pub lipschitz_estimate: f64,
    pub l_emp: f64,
    pub k: f64,
    /// `K / (1 - L_emp)` when `L_emp < 1`.
    pub lipschitz_bound: Option<f64>,
}

/// Solves the fixed point on a grid of stable-fibre coordinates, in parallel.
pub fn manifold_graph(ctx: &LpContext, s: f64, grid: &[Vec<f64>]) -> Result<ManifoldGraph> {
    let disc = ctx.discretize(s, &[])?;
    let results: Vec<std::result::Result<GraphSample, GraphFailure>> = grid
        .par_iter()
        .map(|coords| {
            let fail = |e: Error| GraphFailure {
                coords: coords.clone(),
                error: e.to_string(),
            };
            let zeta = disc.zeta_from_coords(coords).map_err(fail)?;
            let sol = solve_lp(ctx, &disc, &zeta).map_err(fail)?;
            Ok(GraphSample {
                coords: coords.clone(),
                zeta: zeta.iter().copied().collect(),
                m_coords: sol.m_coords.iter().copied().collect(),
                m_vector: sol.m_vector.iter().copied().collect(),
                iterations: sol.iterations,
                residual: sol.residual,
                l_emp: sol.l_emp,
            })
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => failures.push(f),
        }
    }
    let mut lip = 0.0_f64;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let dz = dist(&a.zeta, &b.zeta);
            if dz > 1e-12 {
                lip = lip.max(dist(&a.m_vector, &b.m_vector) / dz);
            }
        }
    }
    let l_emp = samples.iter().map(|s| s.l_emp).fold(0.0, f64::max);
    let k = ctx.dichotomy.k;
    Ok(ManifoldGraph {
        s,
        t_end: disc.t_end,
        samples,
        failures,
        lipschitz_estimate: lip,
        l_emp,
        k,
        lipschitz_bound: (l_emp < 1.0).then(|| k / (1.0 - l_emp)),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub s: f64,
    pub t1: f64,
    /// State reached by flowing the LP solution from `s` to `t1`.
    pub phi_t1: Vec<f64>,
    /// Graph value recomputed at `t1`.
    pub m_t1: Vec<f64>,
    /// `|Q(t1) phi(t1) - m(t1, P(t1) phi(t1))|`.
    pub residual: f64,
}

/// Flows the manifold point over `zeta` to `t1` and recomputes the graph there.
pub fn invariance_check(
    ctx: &LpContext,
    s: f64,
    zeta: &DVector<f64>,
    t1: f64,
) -> Result<InvarianceReport> {
    if t1 < s {
        return Err(invalid("invariance check needs t1 >= s"));
    }
    let disc = ctx.discretize(s, &[t1])?;
    let sol = solve_lp(ctx, &disc, zeta)?;
    let z_s = &sol.path.values[0];
    let flowed = flow(
        ctx,
        z_s,
        s,
        t1,
        &FlowOptions {
            cut: true,
            ..FlowOptions::default()
        },
    )?;
    let disc1 = ctx.discretize(t1, &[])?;
    let p1 = disc1.projection(0);
    let zeta1 = p1 * &flowed.state;
    let sol1 = solve_lp(ctx, &disc1, &zeta1)?;
    let q_part = &flowed.state - &zeta1;
    Ok(InvarianceReport {
        s,
        t1,
        phi_t1: flowed.state.iter().copied().collect(),
        m_t1: sol1.m_vector.iter().copied().collect(),
        residual: (q_part - &sol1.m_vector).norm(),
    })
}
