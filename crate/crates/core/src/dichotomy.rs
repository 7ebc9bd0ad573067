//! Exponential dichotomy: projection family and fitted constants.
//!
//! The dichotomy inequalities are checked on the two families
//! `|V(t, s) P(s)|` for `t >= s` and `|V(t, s) (I - P(s))|` for `t < s`.
//!
//! The projection family is never formed as `V(t, t0) P0 V(t0, t)` directly,
//! since that loses the contracting directions to rounding within a few time
//! units. Instead orthonormal bases of the stable and unstable fibres are
//! swept cell by cell, each in its numerically stable direction:
//!
//! * unstable fibres forward and stable fibres backward from `t0`,
//! * stable fibres right of `t0` by a backward sweep from the mesh end,
//! * unstable fibres left of `t0` by a forward sweep from the mesh start.
//!
//! The mesh should extend a few decay lengths past the region of interest on
//! both sides so that the sweeps started at the mesh ends have settled.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    column_basis, inverse, op_norm, projection_from_bases, projection_rank, projection_residual,
    qr_positive, rcond,
};
use crate::linsys::{fundamental, FundamentalOperator, LinearSystemSpec, MeshRequest};

/// Idempotency tolerance for user-supplied projections.
pub const PROJECTION_TOL: f64 = 1e-10;
/// Eigenvalue moduli this close to 1 count as non-hyperbolic.
pub const HYPERBOLICITY_GAP: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum ProjectionMode {
    /// Spectral projection of the period map onto eigenvalues inside the unit circle.
    Autonomous {
        period: Option<f64>,
    },
    /// Singular-vector splitting over `[t0 - horizon, t0 + horizon]`; heuristic.
    Svd {
        horizon: f64,
    },
    Explicit(DMatrix<f64>),
}

#[derive(Clone, Debug)]
pub struct ProjectionChoice {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub heuristic: bool,
    pub mode: &'static str,
}

/// Chooses `P(t0)`.
pub fn spectral_projection(
    spec: &LinearSystemSpec,
    t0: f64,
    mode: &ProjectionMode,
) -> Result<ProjectionChoice> {
    let n = spec.dim();
    match mode {
        ProjectionMode::Explicit(p) => {
            if p.shape() != (n, n) {
                return Err(Error::ShapeMismatch {
                    expected: (n, n),
                    got: p.shape(),
                });
            }
            let residual = projection_residual(p);
            if residual > PROJECTION_TOL * (1.0 + op_norm(p)) {
                return Err(Error::NotProjection { residual });
            }
            Ok(ProjectionChoice {
                matrix: p.clone(),
                rank: projection_rank(p),
                heuristic: false,
                mode: "explicit",
            })
        }
        ProjectionMode::Autonomous { period } => {
            let tau = match period {
                Some(p) if *p > 0.0 => *p,
                Some(p) => return Err(invalid(format!("period must be positive, got {p}"))),
                None => detect_period(spec).unwrap_or(1.0),
            };
            let monodromy = fundamental(spec, t0 + tau, t0)?;
            let p = stable_spectral_projection(&monodromy)?;
            let rank = projection_rank(&p);
            Ok(ProjectionChoice {
                matrix: p,
                rank,
                heuristic: false,
                mode: "autonomous",
            })
        }
        ProjectionMode::Svd { horizon } => {
            if !(*horizon > 0.0) {
                return Err(invalid("SVD horizon must be positive"));
            }
            let fwd = fundamental(spec, t0 + horizon, t0)?;
            let bwd = fundamental(spec, t0, t0 - horizon)?;
            let sf = fwd.svd(false, true);
            let sb = bwd.svd(true, false);
            let vt = sf.v_t.expect("requested");
            let u = sb.u.expect("requested");
            let stable: Vec<usize> = (0..n).filter(|&i| sf.singular_values[i] < 1.0).collect();
            let unstable: Vec<usize> = (0..n).filter(|&i| sb.singular_values[i] > 1.0).collect();
            if stable.len() + unstable.len() != n {
                return Err(Error::NotHyperbolic(format!(
                    "singular values split into {} contracting and {} expanding directions in dimension {n}",
                    stable.len(),
                    unstable.len()
                )));
            }
            let s_basis = DMatrix::from_fn(n, stable.len(), |r, c| vt[(stable[c], r)]);
            let u_basis = DMatrix::from_fn(n, unstable.len(), |r, c| u[(r, unstable[c])]);
            let p = projection_from_bases(&s_basis, &u_basis).ok_or_else(|| {
                Error::NotHyperbolic("singular-vector subspaces are not complementary".into())
            })?;
            Ok(ProjectionChoice {
                matrix: p,
                rank: stable.len(),
                heuristic: true,
                mode: "svd",
            })
        }
    }
}

fn detect_period(spec: &LinearSystemSpec) -> Option<f64> {
    let times: Vec<f64> = spec.event_times();
    if times.len() < 2 {
        return None;
    }
    let gap = times[1] - times[0];
    let even = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - gap).abs() <= 1e-12 * gap.max(1.0));
    even.then_some(gap)
}

/// Projection onto the generalized eigenspace of eigenvalues with modulus < 1.
pub fn stable_spectral_projection(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    for ev in m.complex_eigenvalues().iter() {
        let gap = (ev.norm() - 1.0).abs();
        if gap < HYPERBOLICITY_GAP {
            return Err(Error::NotHyperbolic(format!(
                "eigenvalue {ev} lies on the unit circle"
            )));
        }
    }
    let id = DMatrix::identity(n, n);
    // Cayley map sends the open unit disc to the left half plane.
    let base = if rcond(&(m + &id)) > 1e-10 {
        m.clone()
    } else {
        -m
    };
    let denom = inverse(&(&base + &id))
        .ok_or_else(|| Error::NotHyperbolic("Cayley transform is singular".into()))?;
    let mut x = (&base - &id) * denom;
    for _ in 0..100 {
        let xinv = inverse(&x)
            .ok_or_else(|| Error::NotHyperbolic("sign iteration hit a singular matrix".into()))?;
        let det = x.determinant().abs();
        let mu = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&x * mu + &xinv / mu) * 0.5;
        let diff = op_norm(&(&next - &x));
        x = next;
        if diff <= 1e-14 * op_norm(&x).max(1.0) {
            break;
        }
    }
    let p = (&id - x) * 0.5;
    let residual = projection_residual(&p);
    if residual > 1e-8 {
        return Err(Error::NotHyperbolic(format!(
            "sign iteration did not settle (|P^2 - P| = {residual:e})"
        )));
    }
    Ok(p)
}

/// Projections and fibre bases at every node of a mesh.
#[derive(Clone, Debug)]
pub struct ProjectionFamily {
    rank: usize,
    anchor: usize,
    projections: Vec<DMatrix<f64>>,
    stable: Vec<DMatrix<f64>>,
    unstable: Vec<DMatrix<f64>>,
    /// Rows of `[S U]^-1`, used to read off fibre coordinates.
    splitters: Vec<DMatrix<f64>>,
}

fn sweep(start: &DMatrix<f64>, mats: impl Iterator<Item = DMatrix<f64>>) -> Vec<DMatrix<f64>> {
    let mut out = vec![start.clone()];
    let mut cur = start.clone();
    for m in mats {
        if cur.ncols() > 0 {
            cur = qr_positive(&(m * &cur)).0;
        } else {
            cur = DMatrix::zeros(start.nrows(), 0);
        }
        out.push(cur.clone());
    }
    out
}

fn complement(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let proj = DMatrix::identity(n, n) - b * b.transpose();
    column_basis(&proj, 1e-8)
}

impl ProjectionFamily {
    /// Builds the family on `op`'s mesh with `P(t0) = p0`; `t0` must be a node.
    pub fn build(op: &FundamentalOperator, t0: f64, p0: &DMatrix<f64>) -> Result<Self> {
        let n = op.spec().dim();
        let anchor = op.at_index(t0).ok_or_else(|| {
            Error::MeshMismatch(format!("projection anchor {t0} is not a mesh node"))
        })?;
        let residual = projection_residual(p0);
        if residual > PROJECTION_TOL * (1.0 + op_norm(p0)) {
            return Err(Error::NotProjection { residual });
        }
        let rank = projection_rank(p0);
        let id = DMatrix::identity(n, n);
        let s0 = column_basis(p0, 1e-8);
        let u0 = column_basis(&(&id - p0), 1e-8);
        if s0.ncols() != rank || u0.ncols() != n - rank {
            return Err(Error::NotProjection { residual });
        }
        let cells = op.cells();
        let m = op.nodes().len();

        // Unstable forward and stable backward from the anchor.
        let u_fwd = sweep(&u0, cells[anchor..].iter().map(|c| c.forward.clone()));
        let s_bwd = sweep(&s0, cells[..anchor].iter().rev().map(|c| c.inverse.clone()));

        // Stable fibres right of the anchor: backward from the mesh end.
        let s_end = complement(u_fwd.last().expect("non-empty"));
        let s_right = sweep(
            &s_end,
            cells[anchor..].iter().rev().map(|c| c.inverse.clone()),
        );
        // Unstable fibres left of the anchor: forward from the mesh start.
        let u_start = complement(s_bwd.last().expect("non-empty"));
        let u_left = sweep(&u_start, cells[..anchor].iter().map(|c| c.forward.clone()));

        let mut stable = Vec::with_capacity(m);
        let mut unstable = Vec::with_capacity(m);
        for j in 0..m {
            if j < anchor {
                stable.push(s_bwd[anchor - j].clone());
                unstable.push(u_left[j].clone());
            } else if j == anchor {
                stable.push(s0.clone());
                unstable.push(u0.clone());
            } else {
                stable.push(s_right[m - 1 - j].clone());
                unstable.push(u_fwd[j - anchor].clone());
            }
        }
        let mut projections = Vec::with_capacity(m);
        let mut splitters = Vec::with_capacity(m);
        for j in 0..m {
            let mut b = DMatrix::zeros(n, n);
            b.view_mut((0, 0), (n, rank)).copy_from(&stable[j]);
            b.view_mut((0, rank), (n, n - rank)).copy_from(&unstable[j]);
            let binv = inverse(&b).ok_or_else(|| {
                Error::NotHyperbolic(format!("fibres collapse near t = {}", op.nodes()[j].time))
            })?;
            let p = if j == anchor {
                p0.clone()
            } else {
                &stable[j] * binv.rows(0, rank)
            };
            projections.push(p);
            splitters.push(binv);
        }
        Ok(Self {
            rank,
            anchor,
            projections,
            stable,
            unstable,
            splitters,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn projection(&self, j: usize) -> &DMatrix<f64> {
        &self.projections[j]
    }

    pub fn complement_projection(&self, j: usize) -> DMatrix<f64> {
        let n = self.projections[j].nrows();
        DMatrix::identity(n, n) - &self.projections[j]
    }

    pub fn stable_basis(&self, j: usize) -> &DMatrix<f64> {
        &self.stable[j]
    }

    pub fn unstable_basis(&self, j: usize) -> &DMatrix<f64> {
        &self.unstable[j]
    }

    /// Coordinates of `P(t_j) x` in the stable basis.
    pub fn stable_coords(&self, j: usize) -> DMatrix<f64> {
        self.splitters[j].rows(0, self.rank).into_owned()
    }

    /// Coordinates of `(I - P(t_j)) x` in the unstable basis.
    pub fn unstable_coords(&self, j: usize) -> DMatrix<f64> {
        let n = self.projections[j].nrows();
        self.splitters[j]
            .rows(self.rank, n - self.rank)
            .into_owned()
    }

    /// `|V(t_i, t_j) P(t_j)|` for `i >= j` via restricted transitions.
    pub fn stable_decay_from(
        &self,
        op: &FundamentalOperator,
        j: usize,
        targets: &[usize],
    ) -> Vec<f64> {
        let k = self.rank;
        if k == 0 {
            return vec![0.0; targets.len()];
        }
        let mut r = self.stable_coords(j);
        let mut out = Vec::with_capacity(targets.len());
        let mut cur = j;
        for &i in targets {
            while cur < i {
                let step =
                    self.stable[cur + 1].transpose() * &op.cells()[cur].forward * &self.stable[cur];
                r = step * r;
                cur += 1;
            }
            out.push(op_norm(&r));
        }
        out
    }

    /// `|V(t_i, t_j) (I - P(t_j))|` for `i <= j` via restricted transitions;
    /// `targets` must be decreasing.
    pub fn unstable_decay_from(
        &self,
        op: &FundamentalOperator,
        j: usize,
        targets: &[usize],
    ) -> Vec<f64> {
        let n = self.projections[j].nrows();
        if self.rank == n {
            return vec![0.0; targets.len()];
        }
        let mut r = self.unstable_coords(j);
        let mut out = Vec::with_capacity(targets.len());
        let mut cur = j;
        for &i in targets {
            while cur > i {
                let step = self.unstable[cur - 1].transpose()
                    * &op.cells()[cur - 1].inverse
                    * &self.unstable[cur];
                r = step * r;
                cur -= 1;
            }
            out.push(op_norm(&r));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    Stable,
    Unstable,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySample {
    pub t: f64,
    pub s: f64,
    pub norm: f64,
    pub family: Family,
}

#[derive(Clone, Debug, Serialize)]
pub struct DichotomyReport {
    pub k: f64,
    pub alpha: f64,
    pub stable_rank: usize,
    pub samples: usize,
    /// Pair binding the fitted `K`.
    pub witness: Option<DecaySample>,
    /// Worst violation of the required constants, if any were given.
    pub violation: Option<DecaySample>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct DichotomyOptions {
    pub max_step: f64,
    /// Extra mesh on both sides of the grid for the boundary sweeps to settle.
    pub margin: f64,
    pub required: Option<(f64, f64)>,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        Self {
            max_step: 0.05,
            margin: 10.0,
            required: None,
        }
    }
}

/// Constants of the tightest envelope `K e^{-alpha d}` over `(d, ln N)` samples.
///
/// With `(d_max, l_m)` the largest log-norm at the largest separation, the
/// smallest admissible rate is `max_j (l_j - l_m) / (d_max - d_j)`, and `K`
/// follows from the binding sample.
pub fn fit_envelope(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let finite: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(_, l)| l.is_finite())
        .collect();
    let d_max = finite.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !d_max.is_finite() {
        return Err(invalid("no finite decay samples"));
    }
    let tie = 1e-12 * d_max.abs().max(1.0);
    let l_m = finite
        .iter()
        .filter(|s| s.0 >= d_max - tie)
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha = finite
        .iter()
        .filter(|s| s.0 < d_max - tie)
        .map(|s| (s.1 - l_m) / (d_max - s.0))
        .fold(f64::NEG_INFINITY, f64::max);
    if !alpha.is_finite() {
        return Err(invalid("decay samples need at least two separations"));
    }
    let log_k = finite
        .iter()
        .map(|s| s.1 + alpha * s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((log_k.exp(), alpha))
}

/// `N_+(t, s)` for `t >= s` and `N_-(t, s)` for `t < s` over pairs of `grid`.
pub fn dichotomy_samples(
    spec: &LinearSystemSpec,
    p0: &DMatrix<f64>,
    t0: f64,
    grid: &[f64],
    opts: &DichotomyOptions,
) -> Result<(Vec<DecaySample>, usize)> {
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.len() < 2 {
        return Err(invalid("dichotomy grid needs at least two points"));
    }
    let lo = grid[0].min(t0) - opts.margin;
    let hi = grid[grid.len() - 1].max(t0) + opts.margin;
    let mut times = grid.clone();
    times.push(t0);
    let op = FundamentalOperator::new(
        spec,
        &MeshRequest {
            times,
            ..MeshRequest::new(lo, hi, opts.max_step)
        },
    )?;
    let family = ProjectionFamily::build(&op, t0, p0)?;
    let idx: Vec<usize> = grid
        .iter()
        .map(|&t| op.at_index(t).expect("grid times are nodes"))
        .collect();

    let mut samples: Vec<DecaySample> = Vec::new();
    for (a, &j) in idx.iter().enumerate() {
        let later: Vec<usize> = idx[a..].to_vec();
        for (b, norm) in family
            .stable_decay_from(&op, j, &later)
            .into_iter()
            .enumerate()
        {
            samples.push(DecaySample {
                t: grid[a + b],
                s: grid[a],
                norm,
                family: Family::Stable,
            });
        }
        let earlier: Vec<usize> = idx[..a].iter().rev().copied().collect();
        for (b, norm) in family
            .unstable_decay_from(&op, j, &earlier)
            .into_iter()
            .enumerate()
        {
            samples.push(DecaySample {
                t: grid[a - 1 - b],
                s: grid[a],
                norm,
                family: Family::Unstable,
            });
        }
    }
    Ok((samples, family.rank()))
}

/// Samples both dichotomy families on `grid` and fits `(K, alpha)`.
pub fn verify_dichotomy(
    spec: &LinearSystemSpec,
    p0: &DMatrix<f64>,
    t0: f64,
    grid: &[f64],
    opts: &DichotomyOptions,
) -> Result<DichotomyReport> {
    let (samples, stable_rank) = dichotomy_samples(spec, p0, t0, grid, opts)?;
    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| ((s.t - s.s).abs(), s.norm.ln()))
        .collect();
    let (k, alpha) = fit_envelope(&pairs)?;
    let witness = samples
        .iter()
        .zip(&pairs)
        .filter(|(_, p)| p.1.is_finite())
        .max_by(|a, b| (a.1 .1 + alpha * a.1 .0).total_cmp(&(b.1 .1 + alpha * b.1 .0)))
        .map(|(s, _)| s.clone());
    let mut violation = None;
    let pass = match opts.required {
        Some((rk, ra)) => {
            let mut worst = 0.0_f64;
            for (s, p) in samples.iter().zip(&pairs) {
                let excess = p.1 - (rk.ln() - ra * p.0);
                if excess > 1e-9 && excess > worst {
                    worst = excess;
                    violation = Some(s.clone());
                }
            }
            violation.is_none()
        }
        None => alpha > 0.0,
    };
    Ok(DichotomyReport {
        k,
        alpha,
        stable_rank,
        samples: samples.len(),
        witness,
        violation,
        pass,
    })
}

/// Projection and constants carried into the fixed-point problem.
#[derive(Clone, Debug)]
pub struct DichotomyData {
    pub t0: f64,
    pub p0: DMatrix<f64>,
    pub k: f64,
    pub alpha: f64,
    pub heuristic: bool,
}
