//! Dormand-Prince 5(4) with step-size control and continuous output.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; 0 picks one from the problem scale.
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h_init: 0.0,
            h_max: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step together with its interpolant.
pub struct DenseStep {
    pub t_start: f64,
    pub t_end: f64,
    rcont: [DVector<f64>; 5],
}

impl DenseStep {
    pub fn start(&self) -> &DVector<f64> {
        &self.rcont[0]
    }

    pub fn end(&self) -> DVector<f64> {
        &self.rcont[0] + &self.rcont[1]
    }

    /// Continuous output at `t` inside the step.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let h = self.t_end - self.t_start;
        let th = if h == 0.0 {
            0.0
        } else {
            (t - self.t_start) / h
        };
        let th1 = 1.0 - th;
        let r = &self.rcont;
        &r[0] + (&r[1] + (&r[2] + (&r[3] + &r[4] * th1) * th) * th1) * th
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub t: f64,
    pub y: DVector<f64>,
    pub stopped: bool,
    pub steps: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn solve<F>(
    f: F,
    t0: f64,
    y0: &DVector<f64>,
    t1: f64,
    opts: &OdeOptions,
) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
{
    solve_observed(f, t0, y0, t1, opts, |_| Control::Continue).map(|o| o.y)
}

/// Like [`solve`] but hands each accepted step to `observer`, which may stop
/// the integration early. On stop the outcome holds the step's end point.
pub fn solve_observed<F, O>(
    mut f: F,
    t0: f64,
    y0: &DVector<f64>,
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<Outcome>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
    O: FnMut(&DenseStep) -> Control,
{
    let n = y0.len();
    let mut y = y0.clone();
    if t0 == t1 {
        return Ok(Outcome {
            t: t0,
            y,
            stopped: false,
            steps: 0,
        });
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut k5 = DVector::zeros(n);
    let mut k6 = DVector::zeros(n);
    let mut k7 = DVector::zeros(n);
    f(t, &y, &mut k1);

    let scale = |y: &DVector<f64>, i: usize| opts.atol + opts.rtol * y[i].abs();
    let mut h = if opts.h_init > 0.0 {
        opts.h_init
    } else {
        let d0 = (0..n)
            .map(|i| (y[i] / scale(&y, i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (n.max(1) as f64).sqrt();
        let d1 = (0..n)
            .map(|i| (k1[i] / scale(&y, i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (n.max(1) as f64).sqrt();
        let guess = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        guess.min(span)
    };
    h = h.min(opts.h_max).min(span);
    let h_min = 1e-14 * (t0.abs().max(t1.abs()).max(1.0));

    let mut steps = 0usize;
    let mut last_err = f64::NAN;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if steps >= opts.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!(
                    "step limit {} reached (last local error {last_err:e})",
                    opts.max_steps
                ),
            });
        }
        let last = h >= remaining * (1.0 - 1e-12);
        let hs = if last { remaining } else { h };
        let hd = hs * dir;

        let y2 = &y + &k1 * (hd * A21);
        f(t + C2 * hd, &y2, &mut k2);
        let y3 = &y + (&k1 * A31 + &k2 * A32) * hd;
        f(t + C3 * hd, &y3, &mut k3);
        let y4 = &y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * hd;
        f(t + C4 * hd, &y4, &mut k4);
        let y5 = &y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * hd;
        f(t + C5 * hd, &y5, &mut k5);
        let y6 = &y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * hd;
        let t_new = if last { t1 } else { t + hd };
        f(t_new, &y6, &mut k6);
        let y_new = &y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * hd;
        f(t_new, &y_new, &mut k7);

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * hd;
        let err = if n == 0 {
            0.0
        } else {
            ((0..n)
                .map(|i| {
                    let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                    (err_vec[i] / sc).powi(2)
                })
                .sum::<f64>()
                / n as f64)
                .sqrt()
        };
        last_err = err;
        steps += 1;
        if !err.is_finite() {
            return Err(Error::Integrator {
                t,
                reason: "non-finite state".into(),
            });
        }
        let fac = if err == 0.0 {
            10.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
        };
        if err <= 1.0 {
            let r1 = y.clone();
            let r2 = &y_new - &y;
            let r3 = &k1 * hd - &r2;
            let r4 = &r2 - &k7 * hd - &r3;
            let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * hd;
            let step = DenseStep {
                t_start: t,
                t_end: t_new,
                rcont: [r1, r2, r3, r4, r5],
            };
            t = t_new;
            y = y_new;
            std::mem::swap(&mut k1, &mut k7);
            if observer(&step) == Control::Stop {
                return Ok(Outcome {
                    t,
                    y,
                    stopped: true,
                    steps,
                });
            }
            if last {
                break;
            }
            h = (hs * fac).min(opts.h_max);
        } else {
            h = hs * fac.min(1.0);
            if h < h_min {
                return Err(Error::Integrator {
                    t,
                    reason: format!("step size underflow with local error {err:e}"),
                });
            }
        }
    }
    Ok(Outcome {
        t,
        y,
        stopped: false,
        steps,
    })
}
