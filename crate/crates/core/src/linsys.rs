//! Linear generalized ODEs `dz = D[Lambda(t) z]` and their fundamental operator.
//!
//! The driving path is assembled from a smooth drift `A` (integrated), impulses
//! with a right jump `B` and an optional left jump `D`, and optionally a measure
//! coupling `C(t) du(t)`. The state obeys
//!
//! * `z' = (A + C rho) z` between event times,
//! * `z(t) = (I - D)^-1 z(t-)` at a left jump,
//! * `z(t+) = (I + B + C(t) w) z(t)` at a right jump or an atom of weight `w`.
//!
//! Jumps at `s` act on `V(t, s)` for `t > s`; jumps at `t` do not.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::funcspace::{total_variation, PiecewisePath, Segment, Side, StieltjesMeasure};
use crate::linalg::{inverse, op_norm};
use crate::ode::{self, OdeOptions};

#[derive(Clone, Debug)]
pub struct Impulse {
    pub time: f64,
    /// Right jump `Lambda(t+) - Lambda(t)`.
    pub jump: DMatrix<f64>,
    /// Left jump `Lambda(t) - Lambda(t-)`, if any.
    pub left_jump: Option<DMatrix<f64>>,
}

impl Impulse {
    pub fn right(time: f64, jump: DMatrix<f64>) -> Self {
        Self {
            time,
            jump,
            left_jump: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasureCoupling {
    pub coefficient: PiecewisePath,
    pub measure: StieltjesMeasure,
}

#[derive(Clone, Debug)]
pub struct LinearSystemSpec {
    dim: usize,
    t0: f64,
    drift: PiecewisePath,
    impulses: Vec<Impulse>,
    coupling: Option<MeasureCoupling>,
    generator: PiecewisePath,
}

impl LinearSystemSpec {
    /// Validated construction: shapes, ordering, and invertibility of every jump factor.
    pub fn new(
        dim: usize,
        drift: PiecewisePath,
        impulses: Vec<Impulse>,
        coupling: Option<MeasureCoupling>,
        t0: f64,
    ) -> Result<Self> {
        let spec = Self::unchecked(dim, drift, impulses, coupling, t0)?;
        for t in spec.event_times() {
            if let Some(d) = spec.left_jump(t) {
                let m = DMatrix::identity(dim, dim) - d;
                if inverse(&m).is_none() {
                    return Err(Error::SingularJump {
                        time: t,
                        detail: "I - left jump is singular".into(),
                    });
                }
            }
            let r = spec.right_jump(t);
            if inverse(&(DMatrix::identity(dim, dim) + r)).is_none() {
                return Err(Error::SingularJump {
                    time: t,
                    detail: "I + right jump is singular".into(),
                });
            }
        }
        Ok(spec)
    }

    /// Structural validation only, so that hypothesis reports can inspect
    /// systems with singular jumps.
    pub fn unchecked(
        dim: usize,
        drift: PiecewisePath,
        mut impulses: Vec<Impulse>,
        coupling: Option<MeasureCoupling>,
        t0: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        if !t0.is_finite() {
            return Err(invalid("initial time must be finite"));
        }
        let sq = (dim, dim);
        if drift.shape() != sq {
            return Err(Error::ShapeMismatch {
                expected: sq,
                got: drift.shape(),
            });
        }
        impulses.sort_by(|a, b| a.time.total_cmp(&b.time));
        for w in impulses.windows(2) {
            if w[0].time == w[1].time {
                return Err(invalid(format!("duplicate impulse time {}", w[0].time)));
            }
        }
        for imp in &impulses {
            if !imp.time.is_finite() {
                return Err(invalid("impulse times must be finite"));
            }
            if imp.time == t0 {
                return Err(invalid(format!(
                    "impulse at the reference time {t0}; move t0 off the impulse times"
                )));
            }
            if imp.jump.shape() != sq {
                return Err(Error::ShapeMismatch {
                    expected: sq,
                    got: imp.jump.shape(),
                });
            }
            if let Some(d) = &imp.left_jump {
                if d.shape() != sq {
                    return Err(Error::ShapeMismatch {
                        expected: sq,
                        got: d.shape(),
                    });
                }
            }
        }
        let mut generator = drift.clone();
        if let Some(c) = &coupling {
            if c.coefficient.shape() != sq {
                return Err(Error::ShapeMismatch {
                    expected: sq,
                    got: c.coefficient.shape(),
                });
            }
            generator = generator.add(&c.coefficient.times_scalar(c.measure.density())?)?;
        }
        Ok(Self {
            dim,
            t0,
            drift,
            impulses,
            coupling,
            generator,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn drift(&self) -> &PiecewisePath {
        &self.drift
    }

    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }

    pub fn coupling(&self) -> Option<&MeasureCoupling> {
        self.coupling.as_ref()
    }

    /// Smooth generator `A + C rho`.
    pub fn generator(&self) -> &PiecewisePath {
        &self.generator
    }

    /// Sorted impulse and atom times.
    pub fn event_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.impulses.iter().map(|i| i.time).collect();
        if let Some(c) = &self.coupling {
            t.extend(c.measure.atoms().iter().map(|a| a.0));
        }
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Times where the generator may be discontinuous.
    pub fn generator_breaks(&self) -> Vec<f64> {
        self.generator.breakpoint_times()
    }

    pub fn left_jump(&self, t: f64) -> Option<&DMatrix<f64>> {
        self.impulses
            .iter()
            .find(|i| i.time == t)
            .and_then(|i| i.left_jump.as_ref())
    }

    /// Total right jump of the driving path at `t`.
    pub fn right_jump(&self, t: f64) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dim, self.dim);
        if let Some(i) = self.impulses.iter().find(|i| i.time == t) {
            j += &i.jump;
        }
        if let Some(c) = &self.coupling {
            let w = c.measure.atom_weight(t);
            if w != 0.0 {
                j += c.coefficient.eval(t) * w;
            }
        }
        j
    }

    /// The full driving path normalised to vanish at `t0`.
    pub fn driving_path(&self) -> Result<PiecewisePath> {
        let n = self.dim;
        let mut path = self.generator.antiderivative(self.t0);
        for t in self.event_times() {
            let b = self.right_jump(t);
            let mut step = PiecewisePath::step(t, b.clone())?;
            if t < self.t0 {
                step = step.add(&PiecewisePath::constant(-b))?;
            }
            path = path.add(&step)?;
            if let Some(d) = self.left_jump(t) {
                let left = PiecewisePath::from_pieces(
                    vec![t],
                    vec![Segment::zeros(n, n), Segment::constant(d.clone())],
                )?
                .with_value_at(t, d.clone())?;
                let left = if t <= self.t0 {
                    left.add(&PiecewisePath::constant(-d.clone()))?
                } else {
                    left
                };
                path = path.add(&left)?;
            }
        }
        Ok(path)
    }

    pub fn variation(&self, c: f64, d: f64, tol: f64) -> Result<f64> {
        total_variation(&self.driving_path()?, c, d, tol)
    }

    /// Regularity data on `[c, d]`.
    pub fn check_regularity(&self, c: f64, d: f64) -> Result<RegularityReport> {
        let n = self.dim;
        let id = DMatrix::identity(n, n);
        let v_lambda = self.variation(c, d, 1e-10)?;
        let mut c_a = 1.0_f64;
        let mut singular = Vec::new();
        for t in self.event_times().into_iter().filter(|&t| t >= c && t <= d) {
            if t < d {
                match inverse(&(&id + self.right_jump(t))) {
                    Some(inv) => c_a = c_a.max(op_norm(&inv)),
                    None => singular.push(SingularWitness {
                        time: t,
                        side: Side::Plus,
                    }),
                }
            }
            if t > c {
                if let Some(dj) = self.left_jump(t) {
                    match inverse(&(&id - dj)) {
                        Some(inv) => c_a = c_a.max(op_norm(&inv)),
                        None => singular.push(SingularWitness {
                            time: t,
                            side: Side::Minus,
                        }),
                    }
                }
            }
        }
        Ok(RegularityReport {
            window: (c, d),
            variation: v_lambda,
            c_a: if singular.is_empty() {
                c_a
            } else {
                f64::INFINITY
            },
            bounded_variation: v_lambda.is_finite(),
            singular_jumps: singular,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularWitness {
    pub time: f64,
    pub side: Side,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub window: (f64, f64),
    pub variation: f64,
    /// `max(1, |(I + right jump)^-1|, |(I - left jump)^-1|)` over the window.
    pub c_a: f64,
    pub bounded_variation: bool,
    pub singular_jumps: Vec<SingularWitness>,
}

impl RegularityReport {
    pub fn ok(&self) -> bool {
        self.bounded_variation && self.singular_jumps.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CellKind {
    Smooth,
    Jump,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub kind: CellKind,
    pub forward: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeshNode {
    pub time: f64,
    pub side: Side,
}

#[derive(Clone, Debug)]
pub struct MeshRequest {
    pub window: (f64, f64),
    pub max_step: f64,
    /// Times that must appear as nodes.
    pub times: Vec<f64>,
    /// Times that need a right-sided node even without a linear jump.
    pub atom_times: Vec<f64>,
}

impl MeshRequest {
    pub fn new(a: f64, b: f64, max_step: f64) -> Self {
        Self {
            window: (a, b),
            max_step,
            times: Vec::new(),
            atom_times: Vec::new(),
        }
    }
}

const PROPAGATOR_TOL: f64 = 1e-12;

/// Tabulated fundamental operator on a window.
#[derive(Clone, Debug)]
pub struct FundamentalOperator {
    spec: LinearSystemSpec,
    window: (f64, f64),
    nodes: Vec<MeshNode>,
    cells: Vec<Cell>,
}

enum Pos {
    Node(usize),
    /// Strictly between `nodes[k]` and `nodes[k + 1]`.
    Between(usize),
}

impl FundamentalOperator {
    pub fn new(spec: &LinearSystemSpec, request: &MeshRequest) -> Result<Self> {
        let (a, b) = request.window;
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(invalid(format!(
                "operator window [{a}, {b}] is not a finite interval"
            )));
        }
        if !(request.max_step > 0.0) {
            return Err(invalid("mesh step must be positive"));
        }
        let mut special: Vec<f64> = vec![a, b];
        special.extend(request.times.iter().copied());
        special.extend(spec.event_times());
        special.extend(spec.generator_breaks());
        special.extend(request.atom_times.iter().copied());
        special.retain(|&t| t >= a && t <= b);
        special.sort_by(f64::total_cmp);
        special.dedup();
        let mut times = special.clone();
        for w in special.windows(2) {
            let m = ((w[1] - w[0]) / request.max_step).ceil() as usize;
            for k in 1..m {
                times.push(w[0] + (w[1] - w[0]) * k as f64 / m as f64);
            }
        }
        times.sort_by(f64::total_cmp);
        times.dedup();

        let events = spec.event_times();
        let mut nodes = Vec::with_capacity(times.len() * 2);
        for &t in &times {
            let is_event = events.binary_search_by(|x| x.total_cmp(&t)).is_ok();
            if t > a && spec.left_jump(t).is_some() {
                nodes.push(MeshNode {
                    time: t,
                    side: Side::Minus,
                });
            }
            nodes.push(MeshNode {
                time: t,
                side: Side::At,
            });
            let extra_atom = request.atom_times.iter().any(|&x| x == t);
            if t < b && (is_event || extra_atom) {
                nodes.push(MeshNode {
                    time: t,
                    side: Side::Plus,
                });
            }
        }

        let n = spec.dim();
        let id = DMatrix::identity(n, n);
        let mut cells = Vec::with_capacity(nodes.len().saturating_sub(1));
        for w in nodes.windows(2) {
            let (p, q) = (w[0], w[1]);
            if p.time == q.time {
                let cell = match (p.side, q.side) {
                    (Side::Minus, Side::At) => {
                        let d = spec.left_jump(p.time).expect("left node implies left jump");
                        let inv = &id - d;
                        let fwd = inverse(&inv).ok_or_else(|| Error::SingularJump {
                            time: p.time,
                            detail: "I - left jump is singular".into(),
                        })?;
                        Cell {
                            kind: CellKind::Jump,
                            forward: fwd,
                            inverse: inv,
                        }
                    }
                    _ => {
                        let fwd = &id + spec.right_jump(p.time);
                        let inv = inverse(&fwd).ok_or_else(|| Error::SingularJump {
                            time: p.time,
                            detail: "I + right jump is singular".into(),
                        })?;
                        Cell {
                            kind: CellKind::Jump,
                            forward: fwd,
                            inverse: inv,
                        }
                    }
                };
                cells.push(cell);
            } else {
                let seg = spec.generator().segment_right_of(p.time);
                let fwd = smooth_propagator(seg, q.time, p.time, n)?;
                let inv = inverse(&fwd).ok_or_else(|| Error::Integrator {
                    t: p.time,
                    reason: "singular smooth propagator".into(),
                })?;
                cells.push(Cell {
                    kind: CellKind::Smooth,
                    forward: fwd,
                    inverse: inv,
                });
            }
        }
        Ok(Self {
            spec: spec.clone(),
            window: (a, b),
            nodes,
            cells,
        })
    }

    pub fn spec(&self) -> &LinearSystemSpec {
        &self.spec
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Index of the node with the given time and side.
    pub fn node_index(&self, time: f64, side: Side) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.time == time && n.side == side)
    }

    /// Index of the `At` node at `time`, i.e. where the state equals `z(time)`.
    pub fn at_index(&self, time: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|n| n.time < time);
        (i..self.nodes.len())
            .take_while(|&j| self.nodes[j].time == time)
            .find(|&j| self.nodes[j].side == Side::At)
    }

    fn position(&self, t: f64) -> Result<Pos> {
        let (a, b) = self.window;
        if !(t >= a && t <= b) {
            return Err(invalid(format!(
                "time {t} lies outside the operator window [{a}, {b}]"
            )));
        }
        if let Some(i) = self.at_index(t) {
            return Ok(Pos::Node(i));
        }
        let k = self.nodes.partition_point(|n| n.time < t);
        Ok(Pos::Between(k - 1))
    }

    fn partial(&self, k: usize, to: f64, from: f64) -> Result<DMatrix<f64>> {
        let seg = self.spec.generator().segment_right_of(self.nodes[k].time);
        smooth_propagator(seg, to, from, self.spec.dim())
    }

    /// Product of cell matrices from node `from` to node `to` (either direction).
    pub fn transition(&self, to: usize, from: usize) -> DMatrix<f64> {
        let n = self.spec.dim();
        let mut m = DMatrix::identity(n, n);
        if to >= from {
            for cell in &self.cells[from..to] {
                m = &cell.forward * m;
            }
        } else {
            for cell in self.cells[to..from].iter().rev() {
                m = &cell.inverse * m;
            }
        }
        m
    }

    /// `V(t, s)`.
    pub fn eval(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        let ps = self.position(s)?;
        let pt = self.position(t)?;
        if let (Pos::Between(i), Pos::Between(j)) = (&ps, &pt) {
            if i == j {
                return self.partial(*i, t, s);
            }
        }
        if t >= s {
            let (start, pre) = match ps {
                Pos::Node(i) => (i, None),
                Pos::Between(k) => (k + 1, Some(self.partial(k, self.nodes[k + 1].time, s)?)),
            };
            let (stop, post) = match pt {
                Pos::Node(j) => (j, None),
                Pos::Between(k) => (k, Some(self.partial(k, t, self.nodes[k].time)?)),
            };
            let mut m = self.transition(stop, start);
            if let Some(p) = pre {
                m *= p;
            }
            if let Some(p) = post {
                m = p * m;
            }
            Ok(m)
        } else {
            let (start, pre) = match ps {
                Pos::Node(i) => (i, None),
                Pos::Between(k) => (k, Some(self.partial(k, self.nodes[k].time, s)?)),
            };
            let (stop, post) = match pt {
                Pos::Node(j) => (j, None),
                Pos::Between(k) => (k + 1, Some(self.partial(k, t, self.nodes[k + 1].time)?)),
            };
            let mut m = self.transition(stop, start);
            if let Some(p) = pre {
                m *= p;
            }
            if let Some(p) = post {
                m = p * m;
            }
            Ok(m)
        }
    }

    pub fn apply(&self, t: f64, s: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.eval(t, s)? * z)
    }
}

/// `Phi(to, from)` for `Y' = G(t) Y` on a piece where `G` is smooth.
pub fn smooth_propagator(seg: &Segment, to: f64, from: f64, n: usize) -> Result<DMatrix<f64>> {
    if to == from {
        return Ok(DMatrix::identity(n, n));
    }
    if let Some(g) = seg.as_constant() {
        return Ok((g * (to - from)).exp());
    }
    let y0 = DVector::from_column_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let rhs = |t: f64, y: &DVector<f64>, dy: &mut DVector<f64>| {
        let g = seg.eval(t);
        let ym = DMatrix::from_column_slice(n, n, y.as_slice());
        dy.copy_from_slice((g * ym).as_slice());
    };
    let y = ode::solve(rhs, from, &y0, to, &OdeOptions::with_tol(PROPAGATOR_TOL))?;
    Ok(DMatrix::from_column_slice(n, n, y.as_slice()))
}

/// `V(t, s)` on a one-off mesh spanning both times.
pub fn fundamental(spec: &LinearSystemSpec, t: f64, s: f64) -> Result<DMatrix<f64>> {
    let req = MeshRequest::new(t.min(s), t.max(s), 0.25);
    FundamentalOperator::new(
        spec,
        &MeshRequest {
            times: vec![t, s],
            ..req
        },
    )?
    .eval(t, s)
}
