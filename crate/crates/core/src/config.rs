//! JSON run configuration shared by the CLI and the tests.
//!
//! A configuration has three blocks: `system`, `solver` and `output`.
//! Matrices are row-major arrays (a bare number means that multiple of the
//! identity). Time-dependent entries are `{"poly": [c0, c1, ...]}` or
//! `{"preset": name, "params": {...}}` with presets `exp`, `sin`, `cos` and
//! `weierstrass`.
//!
//! ```json
//! {
//!   "system": {
//!     "kind": "ide", "dim": 2,
//!     "drift": [[-1, 0], [0, 1]],
//!     "nonlinearity": { "law": "quadratic", "matrices": [0, [[1, 0], [0, 0]]], "cutoff": 0.5 }
//!   },
//!   "solver": { "horizon": 40, "grid": [[0.05], [0.1]] }
//! }
//! ```

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::apps::{
    ide_to_context, linear_app_context, mde_to_context, AppContext, ContextOptions, IdeSpec,
    MdeSpec,
};
use crate::dichotomy::{DichotomyOptions, ProjectionMode};
use crate::error::{invalid, Error, Result};
use crate::funcspace::{weierstrass_segment, Basis, PiecewisePath, Segment, StieltjesMeasure};
use crate::kurzweil::ReferenceOptions;
use crate::linsys::{Impulse, LinearSystemSpec, MeasureCoupling};
use crate::lp_manifold::{LpMode, LpOptions};
use crate::nonlinear::{NonlinearLaw, NonlinearityKind, NonlinearitySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Sanity ranges that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol <= 1e-2) {
            return Err(invalid(format!(
                "solver.tol = {} is outside (0, 1e-2]",
                s.tol
            )));
        }
        if let Some(h) = s.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("solver.horizon must be positive, so that T > s"));
            }
        }
        if !(s.mesh_step > 0.0 && s.mesh_step <= 1.0) {
            return Err(invalid("solver.mesh_step must lie in (0, 1]"));
        }
        if s.max_iter == 0 || s.max_rounds == 0 {
            return Err(invalid(
                "solver.max_iter and solver.max_rounds must be positive",
            ));
        }
        if !(s.escape_radius > 0.0) {
            return Err(invalid("solver.escape_radius must be positive"));
        }
        if let SystemConfig::Integrand(i) = &self.system {
            if !(i.window[0] <= i.window[1]) {
                return Err(invalid("integrand window must satisfy c <= d"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemConfig {
    Ide(IdeConfig),
    Mde(MdeConfig),
    Linear(LinearConfig),
    Integrand(IntegrandConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdeConfig {
    pub dim: usize,
    #[serde(default)]
    pub t0: f64,
    pub drift: PathSpec,
    #[serde(default)]
    pub impulses: ImpulseSpec,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearityConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdeConfig {
    pub dim: usize,
    #[serde(default)]
    pub t0: f64,
    pub drift: PathSpec,
    pub coupling: PathSpec,
    pub u: MeasureSpec,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearityConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub dim: usize,
    #[serde(default)]
    pub t0: f64,
    pub drift: PathSpec,
    #[serde(default)]
    pub impulses: ImpulseSpec,
    #[serde(default)]
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearityConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub coefficient: PathSpec,
    pub measure: MeasureSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandMode {
    /// `int f dmu`.
    #[default]
    Stieltjes,
    /// `int Df`, the gauge limit of the increments of `f`.
    Increment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandConfig {
    pub f: PathSpec,
    #[serde(default = "MeasureSpec::lebesgue")]
    pub mu: MeasureSpec,
    pub window: [f64; 2],
    #[serde(default)]
    pub mode: IntegrandMode,
    /// Matrix shape of `f`; scalar by default.
    #[serde(default = "scalar_shape")]
    pub shape: [usize; 2],
}

fn scalar_shape() -> [usize; 2] {
    [1, 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityConfig {
    pub law: String,
    #[serde(default)]
    pub matrices: Vec<MatrixSpec>,
    pub cutoff: f64,
    /// Modulus measure `h` for a generic class-F forcing on a linear system.
    #[serde(default)]
    pub modulus: Option<MeasureSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn matrix(&self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(c) if rows == cols => Ok(DMatrix::identity(rows, cols) * *c),
            MatrixSpec::Scalar(_) => Err(invalid("a bare number needs a square shape")),
            MatrixSpec::Rows(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    let got = (r.len(), r.first().map_or(0, |x| x.len()));
                    return Err(Error::ShapeMismatch {
                        expected: (rows, cols),
                        got,
                    });
                }
                Ok(DMatrix::from_fn(rows, cols, |i, j| r[i][j]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarFn {
    Const(f64),
    Poly {
        poly: Vec<f64>,
    },
    Preset {
        preset: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl ScalarFn {
    pub fn segment(&self) -> Result<Segment> {
        match self {
            ScalarFn::Const(c) => Ok(Segment::scalar(*c)),
            ScalarFn::Poly { poly } => Ok(Segment::polynomial(poly)),
            ScalarFn::Preset { preset, params } => preset_segment(preset, params),
        }
    }
}

fn preset_segment(name: &str, params: &BTreeMap<String, f64>) -> Result<Segment> {
    let p = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let scale = DMatrix::from_element(1, 1, p("scale", 1.0));
    match name {
        "exp" => Ok(Segment::term(
            Basis::Exp {
                rate: p("rate", 1.0),
                shift: p("shift", 0.0),
            },
            scale,
        )),
        "sin" => Ok(Segment::term(
            Basis::Sin {
                freq: p("freq", 1.0),
                phase: p("phase", 0.0),
            },
            scale,
        )),
        "cos" => Ok(Segment::term(
            Basis::Cos {
                freq: p("freq", 1.0),
                phase: p("phase", 0.0),
            },
            scale,
        )),
        "weierstrass" => {
            let terms = p("terms", 12.0);
            if !(terms >= 1.0 && terms.fract() == 0.0) {
                return Err(invalid(
                    "weierstrass preset needs a positive integer `terms`",
                ));
            }
            Ok(weierstrass_segment(terms as usize, p("a", 0.5), p("b", 3.0)).scale(scale[(0, 0)]))
        }
        other => Err(Error::UnknownRegistry(other.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentSpec {
    Matrix(MatrixSpec),
    Entries { entries: Vec<Vec<ScalarFn>> },
    Function(ScalarFn),
}

impl SegmentSpec {
    pub fn segment(&self, rows: usize, cols: usize) -> Result<Segment> {
        match self {
            SegmentSpec::Matrix(m) => Ok(Segment::constant(m.matrix(rows, cols)?)),
            SegmentSpec::Function(f) if (rows, cols) == (1, 1) => f.segment(),
            SegmentSpec::Function(f) if rows == cols => {
                Ok(Segment::constant(DMatrix::identity(rows, cols)).times_scalar(&f.segment()?))
            }
            SegmentSpec::Function(_) => Err(invalid("a scalar function needs a square shape")),
            SegmentSpec::Entries { entries } => {
                if entries.len() != rows || entries.iter().any(|r| r.len() != cols) {
                    let got = (entries.len(), entries.first().map_or(0, |x| x.len()));
                    return Err(Error::ShapeMismatch {
                        expected: (rows, cols),
                        got,
                    });
                }
                let mut seg = Segment::zeros(rows, cols);
                for (i, row) in entries.iter().enumerate() {
                    for (j, f) in row.iter().enumerate() {
                        if let ScalarFn::Const(c) = f {
                            if *c == 0.0 {
                                continue;
                            }
                        }
                        let mut unit = DMatrix::zeros(rows, cols);
                        unit[(i, j)] = 1.0;
                        seg = seg.add(&Segment::constant(unit).times_scalar(&f.segment()?));
                    }
                }
                Ok(seg)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointValue {
    pub time: f64,
    pub value: MatrixSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    /// Pieces separated by `breaks`; the path is left-continuous unless `values_at` says otherwise.
    Pieces {
        breaks: Vec<f64>,
        pieces: Vec<SegmentSpec>,
        #[serde(default)]
        values_at: Vec<PointValue>,
    },
    Single(SegmentSpec),
}

impl PathSpec {
    pub fn path(&self, rows: usize, cols: usize) -> Result<PiecewisePath> {
        match self {
            PathSpec::Single(s) => Ok(PiecewisePath::from_segment(s.segment(rows, cols)?)),
            PathSpec::Pieces {
                breaks,
                pieces,
                values_at,
            } => {
                let segs = pieces
                    .iter()
                    .map(|s| s.segment(rows, cols))
                    .collect::<Result<Vec<_>>>()?;
                let mut path = PiecewisePath::from_pieces(breaks.clone(), segs)?;
                for pv in values_at {
                    path = path.with_value_at(pv.time, pv.value.matrix(rows, cols)?)?;
                }
                Ok(path)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    /// `"lebesgue"` or `"zero"`.
    Named(String),
    Parts {
        #[serde(default)]
        density: Option<PathSpec>,
        #[serde(default)]
        atoms: Vec<[f64; 2]>,
    },
}

impl MeasureSpec {
    pub fn lebesgue() -> Self {
        MeasureSpec::Named("lebesgue".into())
    }

    pub fn measure(&self) -> Result<StieltjesMeasure> {
        match self {
            MeasureSpec::Named(n) if n == "lebesgue" => Ok(StieltjesMeasure::lebesgue()),
            MeasureSpec::Named(n) if n == "zero" => Ok(StieltjesMeasure::zero()),
            MeasureSpec::Named(n) => Err(Error::UnknownRegistry(n.clone())),
            MeasureSpec::Parts { density, atoms } => {
                let d = match density {
                    Some(p) => p.path(1, 1)?,
                    None => PiecewisePath::scalar(0.0),
                };
                StieltjesMeasure::new(d, atoms.iter().map(|a| (a[0], a[1])).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEntry {
    pub time: f64,
    pub jump: MatrixSpec,
    #[serde(default)]
    pub left_jump: Option<MatrixSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImpulseSpec {
    List(Vec<ImpulseEntry>),
    /// The same jump at `from, from + every, ...` up to `to`.
    Periodic {
        every: f64,
        from: f64,
        to: f64,
        jump: MatrixSpec,
        #[serde(default)]
        left_jump: Option<MatrixSpec>,
    },
}

impl Default for ImpulseSpec {
    fn default() -> Self {
        ImpulseSpec::List(Vec::new())
    }
}

impl ImpulseSpec {
    pub fn impulses(&self, n: usize) -> Result<Vec<Impulse>> {
        let entry = |time: f64, jump: &MatrixSpec, left: &Option<MatrixSpec>| -> Result<Impulse> {
            Ok(Impulse {
                time,
                jump: jump.matrix(n, n)?,
                left_jump: left.as_ref().map(|d| d.matrix(n, n)).transpose()?,
            })
        };
        match self {
            ImpulseSpec::List(list) => list
                .iter()
                .map(|e| entry(e.time, &e.jump, &e.left_jump))
                .collect(),
            ImpulseSpec::Periodic {
                every,
                from,
                to,
                jump,
                left_jump,
            } => {
                if !(*every > 0.0) || to < from {
                    return Err(invalid("periodic impulses need every > 0 and from <= to"));
                }
                let count = ((to - from) / every + 1e-9).floor() as usize;
                (0..=count)
                    .map(|k| entry(from + *every * k as f64, jump, left_jump))
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ProjectionConfig {
    Autonomous {
        #[serde(default)]
        period: Option<f64>,
    },
    Svd {
        horizon: f64,
    },
    Explicit {
        matrix: MatrixSpec,
    },
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig::Autonomous { period: None }
    }
}

impl ProjectionConfig {
    pub fn mode(&self, n: usize) -> Result<ProjectionMode> {
        Ok(match self {
            ProjectionConfig::Autonomous { period } => {
                ProjectionMode::Autonomous { period: *period }
            }
            ProjectionConfig::Svd { horizon } => ProjectionMode::Svd { horizon: *horizon },
            ProjectionConfig::Explicit { matrix } => ProjectionMode::Explicit(matrix.matrix(n, n)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || self.to < self.from {
            return Err(invalid("grid needs step > 0 and from <= to"));
        }
        let count = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        Ok((0..=count)
            .map(|k| self.from + self.step * k as f64)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    /// `T - s` for the fixed-point window.
    pub horizon: Option<f64>,
    pub mesh_step: f64,
    pub max_iter: usize,
    pub mode: LpMode,
    pub force: bool,
    pub reference_tol: f64,
    /// Initial time `s` of the manifold.
    pub s: f64,
    /// Stable-fibre coordinates at which to sample the graph.
    pub grid: Vec<Vec<f64>>,
    pub projection: ProjectionConfig,
    pub dichotomy_grid: Option<GridSpec>,
    pub dichotomy_step: f64,
    pub dichotomy_margin: f64,
    /// Target `(K, alpha)` to certify against.
    pub required: Option<[f64; 2]>,
    /// Window for hypothesis constants.
    pub window: Option<[f64; 2]>,
    pub escape_radius: f64,
    /// Initial states to classify.
    pub classify_points: Vec<Vec<f64>>,
    pub oracle_bracket: [f64; 2],
    pub oracle_width: f64,
    pub invariance_times: Vec<f64>,
    /// Times at which to tabulate `V(t, s)`.
    pub fundamental_times: Option<GridSpec>,
    /// Gauge rounds for the reference integral.
    pub max_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let lp = LpOptions::default();
        let d = DichotomyOptions::default();
        Self {
            tol: lp.tol,
            horizon: None,
            mesh_step: lp.mesh_step,
            max_iter: lp.max_iter,
            mode: lp.mode,
            force: false,
            reference_tol: lp.reference_tol,
            s: 0.0,
            grid: Vec::new(),
            projection: ProjectionConfig::default(),
            dichotomy_grid: None,
            dichotomy_step: d.max_step,
            dichotomy_margin: d.margin,
            required: None,
            window: None,
            escape_radius: 1e3,
            classify_points: Vec::new(),
            oracle_bracket: [-0.1, 0.1],
            oracle_width: 1e-6,
            invariance_times: Vec::new(),
            fundamental_times: None,
            max_rounds: ReferenceOptions::default().max_rounds,
        }
    }
}

impl SolverConfig {
    pub fn lp_options(&self) -> LpOptions {
        LpOptions {
            tol: self.tol,
            horizon: self.horizon,
            mesh_step: self.mesh_step,
            max_iter: self.max_iter,
            mode: self.mode,
            force: self.force,
            reference_tol: self.reference_tol,
            ..LpOptions::default()
        }
    }

    pub fn context_options(&self, n: usize) -> Result<ContextOptions> {
        Ok(ContextOptions {
            projection: self.projection.mode(n)?,
            dichotomy_grid: self
                .dichotomy_grid
                .map(|g| g.points())
                .transpose()?
                .unwrap_or_default(),
            dichotomy: DichotomyOptions {
                max_step: self.dichotomy_step,
                margin: self.dichotomy_margin,
                required: self.required.map(|r| (r[0], r[1])),
            },
            lp: self.lp_options(),
            window: self.window.map(|w| (w[0], w[1])),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for CSV and JSON artifacts.
    pub dir: Option<String>,
    /// File-name prefix; defaults to the subcommand name.
    pub prefix: Option<String>,
}

/// A configuration resolved into library types.
#[derive(Clone, Debug)]
pub enum BuiltSystem {
    Ide(IdeSpec),
    Mde(MdeSpec),
    Linear {
        spec: LinearSystemSpec,
        nonlinearity: NonlinearitySpec,
    },
    Integrand {
        f: PiecewisePath,
        mu: StieltjesMeasure,
        window: (f64, f64),
        mode: IntegrandMode,
    },
}

fn law(cfg: &Option<NonlinearityConfig>, n: usize) -> Result<(NonlinearLaw, f64)> {
    match cfg {
        None => Ok((NonlinearLaw::Zero { dim: n }, 1.0)),
        Some(c) => {
            let mats = c
                .matrices
                .iter()
                .map(|m| m.matrix(n, n))
                .collect::<Result<Vec<_>>>()?;
            Ok((NonlinearLaw::from_registry(&c.law, n, mats)?, c.cutoff))
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<BuiltSystem> {
        match self {
            SystemConfig::Ide(c) => {
                let n = c.dim;
                let (law, cutoff_radius) = law(&c.nonlinearity, n)?;
                let impulses = c.impulses.impulses(n)?;
                if impulses.iter().any(|i| i.left_jump.is_some()) {
                    return Err(invalid("impulsive equations take right jumps only; use kind `linear` for left jumps"));
                }
                Ok(BuiltSystem::Ide(IdeSpec {
                    dim: n,
                    t0: c.t0,
                    drift: c.drift.path(n, n)?,
                    impulses: impulses.into_iter().map(|i| (i.time, i.jump)).collect(),
                    law,
                    cutoff_radius,
                }))
            }
            SystemConfig::Mde(c) => {
                let n = c.dim;
                let (law, cutoff_radius) = law(&c.nonlinearity, n)?;
                Ok(BuiltSystem::Mde(MdeSpec {
                    dim: n,
                    t0: c.t0,
                    drift: c.drift.path(n, n)?,
                    coupling: c.coupling.path(n, n)?,
                    u: c.u.measure()?,
                    law,
                    cutoff_radius,
                }))
            }
            SystemConfig::Linear(c) => {
                let n = c.dim;
                let coupling = c
                    .coupling
                    .as_ref()
                    .map(|k| -> Result<MeasureCoupling> {
                        Ok(MeasureCoupling {
                            coefficient: k.coefficient.path(n, n)?,
                            measure: k.measure.measure()?,
                        })
                    })
                    .transpose()?;
                let spec = LinearSystemSpec::new(
                    n,
                    c.drift.path(n, n)?,
                    c.impulses.impulses(n)?,
                    coupling,
                    c.t0,
                )?;
                let (law, cutoff) = law(&c.nonlinearity, n)?;
                let kind = match c.nonlinearity.as_ref().and_then(|x| x.modulus.as_ref()) {
                    Some(m) => NonlinearityKind::GenericClassF {
                        modulus: m.measure()?,
                    },
                    None => NonlinearityKind::IdePointwise,
                };
                Ok(BuiltSystem::Linear {
                    spec,
                    nonlinearity: NonlinearitySpec::new(kind, law, cutoff)?,
                })
            }
            SystemConfig::Integrand(c) => Ok(BuiltSystem::Integrand {
                f: c.f.path(c.shape[0], c.shape[1])?,
                mu: c.mu.measure()?,
                window: (c.window[0], c.window[1]),
                mode: c.mode,
            }),
        }
    }
}

/// Builds the fixed-point context for a manifold-capable configuration.
pub fn build_app_context(cfg: &RunConfig) -> Result<AppContext> {
    cfg.validate()?;
    match cfg.system.build()? {
        BuiltSystem::Ide(spec) => ide_to_context(&spec, &cfg.solver.context_options(spec.dim)?),
        BuiltSystem::Mde(spec) => mde_to_context(&spec, &cfg.solver.context_options(spec.dim)?),
        BuiltSystem::Linear { spec, nonlinearity } => linear_app_context(
            &spec,
            &nonlinearity,
            &cfg.solver.context_options(spec.dim())?,
        ),
        BuiltSystem::Integrand { .. } => Err(invalid("an integrand configuration has no dynamics")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANAR: &str = r#"{
      "system": {
        "kind": "ide", "dim": 2,
        "drift": [[-1, 0], [0, 1]],
        "nonlinearity": { "law": "quadratic", "matrices": [0, [[1, 0], [0, 0]]], "cutoff": 0.5 }
      },
      "solver": { "horizon": 40, "grid": [[0.05], [0.1]] }
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::from_json(PLANAR).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert!(matches!(cfg.system.build().unwrap(), BuiltSystem::Ide(_)));
    }

    #[test]
    fn presets_and_pieces() {
        let p: PathSpec = serde_json::from_str(
            r#"{"breaks": [1.0], "pieces": [{"poly": [0, 1]}, {"preset": "exp", "params": {"rate": 2}}]}"#,
        )
        .unwrap();
        let path = p.path(1, 1).unwrap();
        assert!((path.eval(0.5)[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((path.eval(1.5)[(0, 0)] - 3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_and_bad_tolerances_are_rejected() {
        assert!(RunConfig::from_json(
            r#"{"system": {"kind": "ide", "dim": 1, "drift": -1}, "bogus": 1}"#
        )
        .is_err());
        let mut cfg = RunConfig::from_json(PLANAR).unwrap();
        cfg.solver.tol = 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_law_is_a_registry_error() {
        let text = PLANAR.replace("quadratic", "sextic");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.system.build(), Err(Error::UnknownRegistry(_))));
    }
}
