//! Adaptive Gauss-Kronrod (7/15) quadrature over scalar and matrix values.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values that can be accumulated by the quadrature rule.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, w: f64, x: &Self);
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += w * x;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for DMatrix<f64> {
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += x * w;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.zero_like();
    let mut gauss = fc.zero_like();
    kron.axpy(WGK[7], &fc);
    gauss.axpy(WG[3], &fc);
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron.axpy(WGK[i], &f1);
        kron.axpy(WGK[i], &f2);
        if i % 2 == 1 {
            gauss.axpy(WG[i / 2], &f1);
            gauss.axpy(WG[i / 2], &f2);
        }
    }
    let mut diff = kron.clone();
    diff.axpy(-1.0, &gauss);
    let mut value = kron.zero_like();
    value.axpy(h, &kron);
    (value, (h * diff.magnitude()).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Reversed limits flip the sign. Fails with [`Error::Quadrature`] carrying the
/// achieved error when subdivision is exhausted.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(crate::error::invalid("quadrature limits must be finite"));
    }
    let r = integrate_best_effort(f, a, b, tol);
    if r.error > tol {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        return Err(Error::Quadrature {
            a: lo,
            b: hi,
            achieved: r.error,
            requested: tol,
        });
    }
    Ok(r)
}

/// Same rule as [`integrate`], returning whatever accuracy was reached.
pub fn integrate_best_effort<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> QuadResult<T> {
    if a == b {
        let probe = f(a);
        return QuadResult {
            value: probe.zero_like(),
            error: 0.0,
            evaluations: 1,
        };
    }
    if b < a {
        let mut r = integrate_best_effort(f, b, a, tol);
        let z = r.value.zero_like();
        let mut neg = z;
        neg.axpy(-1.0, &r.value);
        r.value = neg;
        return r;
    }
    let (v0, e0) = gk15(&f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: v0,
        error: e0,
    });
    let mut total_err = e0;
    while total_err > tol && heap.len() < MAX_INTERVALS {
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (vl, el) = gk15(&f, worst.a, m);
        let (vr, er) = gk15(&f, m, worst.b);
        evaluations += 30;
        total_err += el + er - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: m,
            value: vl,
            error: el,
        });
        heap.push(Piece {
            a: m,
            b: worst.b,
            value: vr,
            error: er,
        });
    }
    // Re-sum to avoid drift in the running error total.
    let pieces = heap.into_vec();
    let mut value = pieces[0].value.zero_like();
    let mut err = 0.0;
    for p in &pieces {
        value.axpy(1.0, &p.value);
        err += p.error;
    }
    QuadResult {
        value,
        error: err,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|t: f64| t.powi(5) - 2.0 * t, 0.0, 2.0, 1e-12).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_converges() {
        let r = integrate(|t: f64| (50.0 * t).cos(), 0.0, 1.0, 1e-11).unwrap();
        assert!((r.value - (50.0f64).sin() / 50.0).abs() < 1e-11);
    }

    #[test]
    fn matrix_valued_and_reversed() {
        let f = |t: f64| DMatrix::from_row_slice(1, 2, &[t, t.exp()]);
        let r = integrate(f, 1.0, 0.0, 1e-12).unwrap();
        assert!((r.value[(0, 0)] + 0.5).abs() < 1e-12);
        assert!((r.value[(0, 1)] + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_integrand_reports_achieved_error() {
        let err = integrate(|t: f64| 1.0 / t.abs().max(1e-300), -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
