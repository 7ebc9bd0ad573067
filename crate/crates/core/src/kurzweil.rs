//! Kurzweil gauge integrals and Perron-Stieltjes integrals.
//!
//! The reference evaluator forms Riemann-type sums
//! `sum_j [V(tau_j, t_j) - V(tau_j, t_{j-1})]` over divisions that are fine
//! for a shrinking sequence of gauges and stops when consecutive sums agree.
//! The fast path integrates densities by Gauss-Kronrod and adds atoms.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::funcspace::{
    cousin_division_with_splits, Gauge, PiecewisePath, StieltjesMeasure, TaggedDivision,
};
use crate::quad;

/// A function of a tag and a node, `V(tau, t)`.
pub trait PointIntervalFn: Sync {
    fn shape(&self) -> (usize, usize);
    fn eval(&self, tag: f64, node: f64) -> DMatrix<f64>;
    /// Points that must be tags of the intervals containing them.
    fn pins(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Points that should be division nodes.
    fn splits(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// `V(tau, t) = f(t)`, whose integral telescopes to `f(d) - f(c)`.
pub struct NodeFn<'a>(pub &'a PiecewisePath);

impl PointIntervalFn for NodeFn<'_> {
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
    fn eval(&self, _tag: f64, node: f64) -> DMatrix<f64> {
        self.0.eval(node)
    }
}

/// `V(tau, t) = f(tau) u(t)` with `u` the distribution of a measure.
pub struct StieltjesPair<'a> {
    f: &'a PiecewisePath,
    distribution: PiecewisePath,
    atoms: Vec<f64>,
    splits: Vec<f64>,
}

impl<'a> StieltjesPair<'a> {
    pub fn new(f: &'a PiecewisePath, mu: &StieltjesMeasure, base: f64) -> Self {
        let mut splits = f.breakpoint_times();
        splits.extend(mu.density().breakpoint_times());
        Self {
            f,
            distribution: mu.distribution(base),
            atoms: mu.atoms().iter().map(|a| a.0).collect(),
            splits,
        }
    }
}

impl PointIntervalFn for StieltjesPair<'_> {
    fn shape(&self) -> (usize, usize) {
        self.f.shape()
    }
    fn eval(&self, tag: f64, node: f64) -> DMatrix<f64> {
        self.f.eval(tag) * self.distribution.eval(node)[(0, 0)]
    }
    fn pins(&self) -> Vec<f64> {
        self.atoms.clone()
    }
    fn splits(&self) -> Vec<f64> {
        self.splits.clone()
    }
}

/// Adapter for closures.
pub struct ClosureFn<F> {
    pub shape: (usize, usize),
    pub f: F,
    pub pins: Vec<f64>,
    pub splits: Vec<f64>,
}

impl<F: Fn(f64, f64) -> DMatrix<f64> + Sync> PointIntervalFn for ClosureFn<F> {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }
    fn eval(&self, tag: f64, node: f64) -> DMatrix<f64> {
        (self.f)(tag, node)
    }
    fn pins(&self) -> Vec<f64> {
        self.pins.clone()
    }
    fn splits(&self) -> Vec<f64> {
        self.splits.clone()
    }
}

pub fn riemann_sum(v: &dyn PointIntervalFn, division: &TaggedDivision) -> DMatrix<f64> {
    let (r, c) = v.shape();
    let mut acc = DMatrix::zeros(r, c);
    for (tau, a, b) in division.cells() {
        acc += v.eval(tau, b) - v.eval(tau, a);
    }
    acc
}

#[derive(Clone, Copy, Debug)]
pub struct ReferenceOptions {
    pub tol: f64,
    pub min_rounds: usize,
    pub max_rounds: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            min_rounds: 4,
            max_rounds: 20,
        }
    }
}

impl ReferenceOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceResult {
    pub value: DMatrix<f64>,
    pub rounds: usize,
    /// Difference between the last two sums.
    pub achieved: f64,
    pub intervals: usize,
}

/// Gauge-limit evaluation of the Kurzweil integral over `[c, d]`.
///
/// Round `k` uses the uniform radius `r_k = (d - c) 2^-k` with the integrand's
/// pins forced as tags. Pins get the smaller radius `r_k 2^-k`, so an interval
/// tagged at a pin that is also a jump of the integrand shrinks fast enough to
/// keep the sums second order.
pub fn ks_integral_ref(
    v: &dyn PointIntervalFn,
    c: f64,
    d: f64,
    opts: &ReferenceOptions,
) -> Result<ReferenceResult> {
    if !(c.is_finite() && d.is_finite()) || c > d {
        return Err(invalid(format!(
            "integration window [{c}, {d}] is not a finite interval"
        )));
    }
    let (r, cols) = v.shape();
    if c == d {
        return Ok(ReferenceResult {
            value: DMatrix::zeros(r, cols),
            rounds: 0,
            achieved: 0.0,
            intervals: 0,
        });
    }
    let pins = v.pins();
    let splits = v.splits();
    let mut prev: Option<DMatrix<f64>> = None;
    let mut last_diff = f64::INFINITY;
    for k in 0..=opts.max_rounds {
        let radius = (d - c) * 0.5f64.powi(k as i32);
        let gauge = Gauge::uniform(c, d, radius)?
            .with_pins(pins.clone())
            .with_pin_radius(radius * 0.5f64.powi(k as i32));
        let div = cousin_division_with_splits(&gauge, &splits)?;
        let sum = riemann_sum(v, &div);
        if let Some(p) = &prev {
            last_diff = (&sum - p).norm();
            if k >= opts.min_rounds && last_diff < opts.tol {
                log::debug!(
                    "gauge sums settled after {k} rounds ({} intervals)",
                    div.len()
                );
                return Ok(ReferenceResult {
                    value: sum,
                    rounds: k,
                    achieved: last_diff,
                    intervals: div.len(),
                });
            }
        }
        if k == opts.max_rounds {
            return Err(Error::ReferenceNotConverged {
                rounds: k,
                previous: prev
                    .map(|p| p.iter().copied().collect())
                    .unwrap_or_default(),
                last: sum.iter().copied().collect(),
                difference: last_diff,
            });
        }
        prev = Some(sum);
    }
    unreachable!("loop returns on the final round")
}

#[derive(Clone, Debug)]
pub struct IntegralResult {
    pub value: DMatrix<f64>,
    pub error: f64,
}

/// `int_[c,d] f dmu` with atoms counted on `[c, d)`.
pub fn stieltjes_integral(
    f: &PiecewisePath,
    mu: &StieltjesMeasure,
    c: f64,
    d: f64,
    tol: f64,
) -> Result<IntegralResult> {
    if !(c.is_finite() && d.is_finite()) || c > d {
        return Err(invalid(format!(
            "integration window [{c}, {d}] is not a finite interval"
        )));
    }
    let (r, cols) = f.shape();
    let mut value = DMatrix::zeros(r, cols);
    let mut error = 0.0;
    if c < d {
        let mut cuts: Vec<f64> = f.breakpoint_times();
        cuts.extend(mu.density().breakpoint_times());
        cuts.retain(|&t| t > c && t < d);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let per = tol / (cuts.len() + 1) as f64;
        let mut a = c;
        for b in cuts.into_iter().chain(std::iter::once(d)) {
            let fs = f.segment_left_of(b);
            let rho = mu.density().segment_left_of(b);
            if rho.as_constant().is_some_and(|x| x[(0, 0)] == 0.0) {
                a = b;
                continue;
            }
            let piece = quad::integrate(|t| fs.eval(t) * rho.eval(t)[(0, 0)], a, b, per)?;
            value += piece.value;
            error += piece.error;
            a = b;
        }
    }
    for &(t, w) in mu.atoms_in(c, d) {
        value += f.eval(t) * w;
    }
    Ok(IntegralResult { value, error })
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheckReport {
    pub fast: Vec<f64>,
    pub reference: Vec<f64>,
    pub difference: f64,
    pub achieved: f64,
    /// Gauge rounds used by the reference.
    pub rounds: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Compares [`stieltjes_integral`] with [`ks_integral_ref`] on the pair `f(tau) u(t)`.
pub fn cross_check(
    f: &PiecewisePath,
    mu: &StieltjesMeasure,
    c: f64,
    d: f64,
    tol: f64,
) -> Result<CrossCheckReport> {
    cross_check_with(f, mu, c, d, tol, &ReferenceOptions::with_tol(tol * 1e-1))
}

/// [`cross_check`] with explicit options for the gauge reference.
pub fn cross_check_with(
    f: &PiecewisePath,
    mu: &StieltjesMeasure,
    c: f64,
    d: f64,
    tol: f64,
    reference: &ReferenceOptions,
) -> Result<CrossCheckReport> {
    let pair = StieltjesPair::new(f, mu, c);
    let reference = ks_integral_ref(&pair, c, d, reference)?;
    let fast = stieltjes_integral(f, mu, c, d, tol * 1e-2)?;
    let difference = (&fast.value - &reference.value).norm();
    let achieved = fast.error.max(reference.achieved);
    Ok(CrossCheckReport {
        fast: fast.value.iter().copied().collect(),
        reference: reference.value.iter().copied().collect(),
        difference,
        achieved,
        rounds: reference.rounds,
        tol,
        pass: difference <= tol.max(10.0 * achieved),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{weierstrass_segment, Segment};

    fn scalar(c: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, c)
    }

    #[test]
    fn product_kernel_integrates_to_one_half() {
        let v = ClosureFn {
            shape: (1, 1),
            f: |tau: f64, t: f64| scalar(tau * t),
            pins: vec![],
            splits: vec![],
        };
        let r = ks_integral_ref(&v, 0.0, 1.0, &ReferenceOptions::with_tol(1e-12)).unwrap();
        assert!((r.value[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn node_function_telescopes() {
        let w = PiecewisePath::from_segment(weierstrass_segment(12, 0.5, 3.0));
        let r = ks_integral_ref(&NodeFn(&w), 0.0, 1.0, &ReferenceOptions::default()).unwrap();
        let exact = w.eval(1.0)[(0, 0)] - w.eval(0.0)[(0, 0)];
        assert!((r.value[(0, 0)] - exact).abs() < 1e-9);
    }

    #[test]
    fn atoms_follow_half_open_window() {
        let f = PiecewisePath::from_segment(Segment::polynomial(&[1.0, 1.0]));
        let mu = StieltjesMeasure::atomic(vec![(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)]).unwrap();
        let fast = stieltjes_integral(&f, &mu, 0.0, 1.0, 1e-12).unwrap();
        assert!((fast.value[(0, 0)] - 4.0).abs() < 1e-14);
        let rep = cross_check(&f, &mu, 0.0, 1.0, 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn jump_of_integrand_at_an_atom_uses_point_value() {
        let f =
            PiecewisePath::from_pieces(vec![0.5], vec![Segment::scalar(1.0), Segment::scalar(3.0)])
                .unwrap()
                .with_value_at(0.5, scalar(10.0))
                .unwrap();
        let mu = StieltjesMeasure::new(PiecewisePath::scalar(1.0), vec![(0.5, 1.0)]).unwrap();
        let rep = cross_check(&f, &mu, 0.0, 1.0, 1e-9).unwrap();
        assert!((rep.fast[0] - 12.0).abs() < 1e-12);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn non_settling_sums_report_last_two() {
        let v = ClosureFn {
            shape: (1, 1),
            f: |tau: f64, t: f64| scalar(if tau == 0.0 { 0.0 } else { t / tau }),
            pins: vec![],
            splits: vec![],
        };
        let opts = ReferenceOptions {
            tol: 1e-12,
            min_rounds: 1,
            max_rounds: 6,
        };
        match ks_integral_ref(&v, 0.0, 1.0, &opts) {
            Err(Error::ReferenceNotConverged { previous, last, .. }) => {
                assert_eq!(previous.len(), 1);
                assert_eq!(last.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
