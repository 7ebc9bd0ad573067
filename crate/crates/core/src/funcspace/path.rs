use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::segment::Segment;
use crate::error::{invalid, Error, Result};
use crate::linalg::op_norm;
use crate::quad;

/// Which one-sided value to read at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Minus,
    At,
    Plus,
}

#[derive(Clone, Debug)]
pub struct Breakpoint {
    pub time: f64,
    pub left_limit: DMatrix<f64>,
    pub value_at: DMatrix<f64>,
    pub right_limit: DMatrix<f64>,
}

/// A regulated path: smooth segments glued at breakpoints with explicit
/// one-sided limits and point values.
///
/// `segments[j]` governs the open piece between breakpoints `j - 1` and `j`.
#[derive(Clone, Debug)]
pub struct PiecewisePath {
    shape: (usize, usize),
    breakpoints: Vec<Breakpoint>,
    segments: Vec<Segment>,
}

enum Location {
    Break(usize),
    Piece(usize),
}

const LIMIT_TOL: f64 = 1e-9;

impl PiecewisePath {
    pub fn from_segment(segment: Segment) -> Self {
        Self {
            shape: segment.shape(),
            breakpoints: Vec::new(),
            segments: vec![segment],
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self::from_segment(Segment::constant(m))
    }

    pub fn scalar(c: f64) -> Self {
        Self::constant(DMatrix::from_element(1, 1, c))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_segment(Segment::zeros(rows, cols))
    }

    /// Left-continuous path from segments split at `times`.
    pub fn from_pieces(times: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        if segments.len() != times.len() + 1 {
            return Err(invalid(format!(
                "{} breakpoints need {} segments, got {}",
                times.len(),
                times.len() + 1,
                segments.len()
            )));
        }
        check_increasing(&times)?;
        let shape = segments[0].shape();
        if let Some(bad) = segments.iter().find(|s| s.shape() != shape) {
            return Err(Error::ShapeMismatch {
                expected: shape,
                got: bad.shape(),
            });
        }
        let breakpoints = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let left = segments[i].eval(t);
                let right = segments[i + 1].eval(t);
                Breakpoint {
                    time: t,
                    value_at: left.clone(),
                    left_limit: left,
                    right_limit: right,
                }
            })
            .collect();
        Ok(Self {
            shape,
            breakpoints,
            segments,
        })
    }

    /// Explicit construction; one-sided limits must agree with the adjacent segments.
    pub fn new(breakpoints: Vec<Breakpoint>, segments: Vec<Segment>) -> Result<Self> {
        let times: Vec<f64> = breakpoints.iter().map(|b| b.time).collect();
        let mut path = Self::from_pieces(times, segments)?;
        for (i, bp) in breakpoints.into_iter().enumerate() {
            let expect = &path.breakpoints[i];
            for (name, given, want) in [
                ("left", &bp.left_limit, &expect.left_limit),
                ("right", &bp.right_limit, &expect.right_limit),
            ] {
                if given.shape() != path.shape {
                    return Err(Error::ShapeMismatch {
                        expected: path.shape,
                        got: given.shape(),
                    });
                }
                let scale = 1.0 + op_norm(want);
                if op_norm(&(given - want)) > LIMIT_TOL * scale {
                    return Err(invalid(format!(
                        "{name} limit at t = {} disagrees with the adjacent segment",
                        bp.time
                    )));
                }
            }
            if bp.value_at.shape() != path.shape {
                return Err(Error::ShapeMismatch {
                    expected: path.shape,
                    got: bp.value_at.shape(),
                });
            }
            path.breakpoints[i].value_at = bp.value_at;
        }
        Ok(path)
    }

    /// `jump * H(t - time)` with `H` zero on `t <= 0`.
    pub fn step(time: f64, jump: DMatrix<f64>) -> Result<Self> {
        let (r, c) = jump.shape();
        Self::from_pieces(
            vec![time],
            vec![Segment::zeros(r, c), Segment::constant(jump)],
        )
    }

    /// Overrides the point value at `time`, inserting a breakpoint if needed.
    pub fn with_value_at(mut self, time: f64, value: DMatrix<f64>) -> Result<Self> {
        if value.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                got: value.shape(),
            });
        }
        if !time.is_finite() {
            return Err(invalid("breakpoint time must be finite"));
        }
        match self.locate(time) {
            Location::Break(i) => self.breakpoints[i].value_at = value,
            Location::Piece(j) => {
                let seg = self.segments[j].clone();
                let lim = seg.eval(time);
                self.segments.insert(j, seg);
                self.breakpoints.insert(
                    j,
                    Breakpoint {
                        time,
                        left_limit: lim.clone(),
                        value_at: value,
                        right_limit: lim,
                    },
                );
            }
        }
        Ok(self)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoint_times(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|b| b.time).collect()
    }

    fn locate(&self, t: f64) -> Location {
        match self.breakpoints.binary_search_by(|b| b.time.total_cmp(&t)) {
            Ok(i) => Location::Break(i),
            Err(j) => Location::Piece(j),
        }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self.locate(t) {
            Location::Break(i) => self.breakpoints[i].value_at.clone(),
            Location::Piece(j) => self.segments[j].eval(t),
        }
    }

    pub fn left_limit(&self, t: f64) -> DMatrix<f64> {
        match self.locate(t) {
            Location::Break(i) => self.breakpoints[i].left_limit.clone(),
            Location::Piece(j) => self.segments[j].eval(t),
        }
    }

    pub fn right_limit(&self, t: f64) -> DMatrix<f64> {
        match self.locate(t) {
            Location::Break(i) => self.breakpoints[i].right_limit.clone(),
            Location::Piece(j) => self.segments[j].eval(t),
        }
    }

    pub fn sample(&self, t: f64, side: Side) -> DMatrix<f64> {
        match side {
            Side::Minus => self.left_limit(t),
            Side::At => self.eval(t),
            Side::Plus => self.right_limit(t),
        }
    }

    /// Segment governing the open piece just right of `t`.
    pub fn segment_right_of(&self, t: f64) -> &Segment {
        match self.locate(t) {
            Location::Break(i) => &self.segments[i + 1],
            Location::Piece(j) => &self.segments[j],
        }
    }

    /// Segment governing the open piece just left of `t`.
    pub fn segment_left_of(&self, t: f64) -> &Segment {
        match self.locate(t) {
            Location::Break(i) => &self.segments[i],
            Location::Piece(j) => &self.segments[j],
        }
    }

    /// Open pieces `(a, b, segment)` covering `(c, d)`.
    pub fn pieces_in(&self, c: f64, d: f64) -> Vec<(f64, f64, &Segment)> {
        let mut out = Vec::new();
        if d <= c {
            return out;
        }
        let mut a = c;
        for bp in self.breakpoints.iter().filter(|b| b.time > c && b.time < d) {
            out.push((a, bp.time, self.segment_left_of(bp.time)));
            a = bp.time;
        }
        out.push((a, d, self.segment_left_of(d)));
        out
    }

    fn map_segments(
        &self,
        f: impl Fn(&Segment) -> Segment,
        g: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    ) -> Self {
        let segments: Vec<Segment> = self.segments.iter().map(f).collect();
        let shape = segments[0].shape();
        let breakpoints = self
            .breakpoints
            .iter()
            .map(|b| Breakpoint {
                time: b.time,
                left_limit: g(&b.left_limit),
                value_at: g(&b.value_at),
                right_limit: g(&b.right_limit),
            })
            .collect();
        Self {
            shape,
            breakpoints,
            segments,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_segments(|s| s.scale(c), |m| m * c)
    }

    pub fn left_mul(&self, m: &DMatrix<f64>) -> Self {
        self.map_segments(|s| s.left_mul(m), |v| m * v)
    }

    fn zip_with(
        &self,
        other: &Self,
        seg: impl Fn(&Segment, &Segment) -> Segment,
        val: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> Self {
        let mut times: Vec<f64> = self.breakpoint_times();
        times.extend(other.breakpoint_times());
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut segments = Vec::with_capacity(times.len() + 1);
        let mut prev = f64::NEG_INFINITY;
        for &t in times.iter().chain(std::iter::once(&f64::INFINITY)) {
            let probe = if prev.is_infinite() && t.is_infinite() {
                0.0
            } else if prev.is_infinite() {
                t - 1.0
            } else if t.is_infinite() {
                prev + 1.0
            } else {
                0.5 * (prev + t)
            };
            segments.push(seg(
                self.segment_left_of(probe),
                other.segment_left_of(probe),
            ));
            prev = t;
        }
        let breakpoints: Vec<Breakpoint> = times
            .iter()
            .map(|&t| Breakpoint {
                time: t,
                left_limit: val(&self.left_limit(t), &other.left_limit(t)),
                value_at: val(&self.eval(t), &other.eval(t)),
                right_limit: val(&self.right_limit(t), &other.right_limit(t)),
            })
            .collect();
        let shape = segments[0].shape();
        Self {
            shape,
            breakpoints,
            segments,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                got: other.shape,
            });
        }
        Ok(self.zip_with(other, |a, b| a.add(b), |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Pointwise product with a scalar path.
    pub fn times_scalar(&self, scalar: &Self) -> Result<Self> {
        if scalar.shape != (1, 1) {
            return Err(Error::ShapeMismatch {
                expected: (1, 1),
                got: scalar.shape,
            });
        }
        Ok(self.zip_with(scalar, |a, b| a.times_scalar(b), |a, b| a * b[(0, 0)]))
    }

    /// Continuous running integral `t -> int_base^t path`.
    pub fn antiderivative(&self, base: f64) -> Self {
        let zero = DMatrix::zeros(self.shape.0, self.shape.1);
        let n = self.segments.len();
        let mut out: Vec<Option<Segment>> = vec![None; n];
        let j0 = match self.locate(base) {
            Location::Break(i) => i + 1,
            Location::Piece(j) => j,
        };
        let first = self.segments[j0].antiderivative(base, &zero);
        out[j0] = Some(first);
        for j in j0 + 1..n {
            let t = self.breakpoints[j - 1].time;
            let off = out[j - 1].as_ref().expect("filled").eval(t);
            out[j] = Some(self.segments[j].antiderivative(t, &off));
        }
        for j in (0..j0).rev() {
            let t = self.breakpoints[j].time;
            let off = out[j + 1].as_ref().expect("filled").eval(t);
            out[j] = Some(self.segments[j].antiderivative(t, &off));
        }
        let segments: Vec<Segment> = out.into_iter().map(|s| s.expect("filled")).collect();
        let breakpoints = self
            .breakpoints
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let v = segments[i].eval(b.time);
                Breakpoint {
                    time: b.time,
                    left_limit: v.clone(),
                    value_at: v.clone(),
                    right_limit: v,
                }
            })
            .collect();
        Self {
            shape: self.shape,
            breakpoints,
            segments,
        }
    }

    /// Largest norm among segment samples and breakpoint values in `[c, d]`.
    pub fn sup_norm_sampled(&self, c: f64, d: f64, samples_per_piece: usize) -> f64 {
        let mut m = 0.0_f64;
        for (a, b, seg) in self.pieces_in(c, d) {
            for k in 0..=samples_per_piece {
                let t = a + (b - a) * k as f64 / samples_per_piece as f64;
                m = m.max(op_norm(&seg.eval(t)));
            }
        }
        for bp in self
            .breakpoints
            .iter()
            .filter(|b| b.time >= c && b.time <= d)
        {
            m = m.max(op_norm(&bp.value_at));
        }
        m.max(op_norm(&self.eval(c))).max(op_norm(&self.eval(d)))
    }
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(invalid("breakpoint times must be finite"));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(invalid(format!(
            "breakpoints must increase strictly; got {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Exact variation of a piecewise path over `[c, d]`.
///
/// Smooth pieces contribute `int |f'|`. At an interior breakpoint both
/// one-sided jumps count; at `c` only the jump to the right limit and at `d`
/// only the jump from the left limit, which keeps the variation additive over
/// adjacent windows.
pub fn total_variation(path: &PiecewisePath, c: f64, d: f64, tol: f64) -> Result<f64> {
    if !(c.is_finite() && d.is_finite()) || c > d {
        return Err(invalid(format!(
            "variation window [{c}, {d}] is not a finite interval"
        )));
    }
    if c == d {
        return Ok(0.0);
    }
    let pieces = path.pieces_in(c, d);
    let per_piece = tol / pieces.len() as f64;
    let mut total = 0.0;
    for (a, b, seg) in pieces {
        if seg.as_constant().is_some() {
            continue;
        }
        let r = quad::integrate(|t| op_norm(&seg.derivative(t)), a, b, per_piece)?;
        total += r.value;
    }
    for bp in path.breakpoints() {
        let left = op_norm(&(&bp.value_at - &bp.left_limit));
        let right = op_norm(&(&bp.right_limit - &bp.value_at));
        if bp.time > c && bp.time < d {
            total += left + right;
        } else if bp.time == c {
            total += right;
        } else if bp.time == d {
            total += left;
        }
    }
    Ok(total)
}
