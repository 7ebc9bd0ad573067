use nalgebra::DMatrix;

use crate::quad;

/// Elementary scalar functions with closed-form calculus.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    Power(u32),
    /// `exp(rate * t + shift)`
    Exp {
        rate: f64,
        shift: f64,
    },
    /// `sin(freq * t + phase)`
    Sin {
        freq: f64,
        phase: f64,
    },
    /// `cos(freq * t + phase)`
    Cos {
        freq: f64,
        phase: f64,
    },
}

impl Basis {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Basis::Power(0) => 1.0,
            Basis::Power(k) => t.powi(k as i32),
            Basis::Exp { rate, shift } => (rate * t + shift).exp(),
            Basis::Sin { freq, phase } => (freq * t + phase).sin(),
            Basis::Cos { freq, phase } => (freq * t + phase).cos(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Basis::Power(0) => 0.0,
            Basis::Power(k) => k as f64 * t.powi(k as i32 - 1),
            Basis::Exp { rate, shift } => rate * (rate * t + shift).exp(),
            Basis::Sin { freq, phase } => freq * (freq * t + phase).cos(),
            Basis::Cos { freq, phase } => -freq * (freq * t + phase).sin(),
        }
    }

    /// An antiderivative as `factor * basis`.
    fn antiderivative(&self) -> (f64, Basis) {
        match *self {
            Basis::Power(k) => (1.0 / (k as f64 + 1.0), Basis::Power(k + 1)),
            Basis::Exp { rate, shift } if rate == 0.0 => (shift.exp(), Basis::Power(1)),
            Basis::Exp { rate, shift } => (1.0 / rate, Basis::Exp { rate, shift }),
            Basis::Sin { freq, phase } if freq == 0.0 => (phase.sin(), Basis::Power(1)),
            Basis::Sin { freq, phase } => (-1.0 / freq, Basis::Cos { freq, phase }),
            Basis::Cos { freq, phase } if freq == 0.0 => (phase.cos(), Basis::Power(1)),
            Basis::Cos { freq, phase } => (1.0 / freq, Basis::Sin { freq, phase }),
        }
    }

    fn product(&self, other: &Basis) -> Option<(f64, Basis)> {
        match (self, other) {
            (Basis::Power(0), b) | (b, Basis::Power(0)) => Some((1.0, b.clone())),
            (Basis::Power(j), Basis::Power(k)) => Some((1.0, Basis::Power(j + k))),
            (
                Basis::Exp {
                    rate: r1,
                    shift: s1,
                },
                Basis::Exp {
                    rate: r2,
                    shift: s2,
                },
            ) => Some((
                1.0,
                Basis::Exp {
                    rate: r1 + r2,
                    shift: s1 + s2,
                },
            )),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub basis: Basis,
    pub coeff: DMatrix<f64>,
}

/// A smooth matrix-valued function on one piece of a path.
#[derive(Clone, Debug)]
pub enum Segment {
    /// Finite sum of coefficient matrices times elementary functions.
    Terms {
        shape: (usize, usize),
        terms: Vec<Term>,
    },
    Sum(Box<Segment>, Box<Segment>),
    /// Matrix-valued segment times a scalar (1x1) segment.
    Scaled {
        matrix: Box<Segment>,
        scalar: Box<Segment>,
    },
    /// `offset + integral from base to t` of the integrand, evaluated by quadrature.
    Antiderivative {
        integrand: Box<Segment>,
        base: f64,
        offset: DMatrix<f64>,
    },
}

const ANTIDERIVATIVE_TOL: f64 = 1e-13;

impl Segment {
    pub fn constant(m: DMatrix<f64>) -> Self {
        let shape = m.shape();
        Segment::Terms {
            shape,
            terms: vec![Term {
                basis: Basis::Power(0),
                coeff: m,
            }],
        }
    }

    pub fn scalar(c: f64) -> Self {
        Self::constant(DMatrix::from_element(1, 1, c))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Segment::Terms {
            shape: (rows, cols),
            terms: Vec::new(),
        }
    }

    pub fn term(basis: Basis, coeff: DMatrix<f64>) -> Self {
        let shape = coeff.shape();
        Segment::Terms {
            shape,
            terms: vec![Term { basis, coeff }],
        }
    }

    /// Scalar polynomial with coefficients in increasing degree.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, &c)| Term {
                basis: Basis::Power(k as u32),
                coeff: DMatrix::from_element(1, 1, c),
            })
            .collect();
        Segment::Terms {
            shape: (1, 1),
            terms,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Segment::Terms { shape, .. } => *shape,
            Segment::Sum(a, _) => a.shape(),
            Segment::Scaled { matrix, .. } => matrix.shape(),
            Segment::Antiderivative { offset, .. } => offset.shape(),
        }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self {
            Segment::Terms { shape, terms } => {
                let mut out = DMatrix::zeros(shape.0, shape.1);
                for term in terms {
                    out += &term.coeff * term.basis.eval(t);
                }
                out
            }
            Segment::Sum(a, b) => a.eval(t) + b.eval(t),
            Segment::Scaled { matrix, scalar } => matrix.eval(t) * scalar.eval(t)[(0, 0)],
            Segment::Antiderivative {
                integrand,
                base,
                offset,
            } => {
                let r = quad::integrate_best_effort(
                    |x| integrand.eval(x),
                    *base,
                    t,
                    ANTIDERIVATIVE_TOL,
                );
                offset + r.value
            }
        }
    }

    pub fn derivative(&self, t: f64) -> DMatrix<f64> {
        match self {
            Segment::Terms { shape, terms } => {
                let mut out = DMatrix::zeros(shape.0, shape.1);
                for term in terms {
                    out += &term.coeff * term.basis.derivative(t);
                }
                out
            }
            Segment::Sum(a, b) => a.derivative(t) + b.derivative(t),
            Segment::Scaled { matrix, scalar } => {
                matrix.derivative(t) * scalar.eval(t)[(0, 0)]
                    + matrix.eval(t) * scalar.derivative(t)[(0, 0)]
            }
            Segment::Antiderivative { integrand, .. } => integrand.eval(t),
        }
    }

    /// Constant value if the segment is constant in closed form.
    pub fn as_constant(&self) -> Option<DMatrix<f64>> {
        match self {
            Segment::Terms { shape, terms } => {
                let mut out = DMatrix::zeros(shape.0, shape.1);
                for term in terms {
                    match term.basis {
                        Basis::Power(0) => out += &term.coeff,
                        Basis::Exp { rate, shift } if rate == 0.0 => {
                            out += &term.coeff * shift.exp()
                        }
                        _ if term.coeff.iter().all(|c| *c == 0.0) => {}
                        _ => return None,
                    }
                }
                Some(out)
            }
            Segment::Sum(a, b) => Some(a.as_constant()? + b.as_constant()?),
            Segment::Scaled { matrix, scalar } => {
                Some(matrix.as_constant()? * scalar.as_constant()?[(0, 0)])
            }
            Segment::Antiderivative { .. } => None,
        }
    }

    pub fn scale(&self, c: f64) -> Segment {
        match self {
            Segment::Terms { shape, terms } => Segment::Terms {
                shape: *shape,
                terms: terms
                    .iter()
                    .map(|t| Term {
                        basis: t.basis.clone(),
                        coeff: &t.coeff * c,
                    })
                    .collect(),
            },
            Segment::Sum(a, b) => Segment::Sum(Box::new(a.scale(c)), Box::new(b.scale(c))),
            Segment::Scaled { matrix, scalar } => Segment::Scaled {
                matrix: Box::new(matrix.scale(c)),
                scalar: scalar.clone(),
            },
            Segment::Antiderivative {
                integrand,
                base,
                offset,
            } => Segment::Antiderivative {
                integrand: Box::new(integrand.scale(c)),
                base: *base,
                offset: offset * c,
            },
        }
    }

    /// Left multiplication by a constant matrix.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Segment {
        match self {
            Segment::Terms { terms, .. } => Segment::Terms {
                shape: (m.nrows(), self.shape().1),
                terms: terms
                    .iter()
                    .map(|t| Term {
                        basis: t.basis.clone(),
                        coeff: m * &t.coeff,
                    })
                    .collect(),
            },
            Segment::Sum(a, b) => Segment::Sum(Box::new(a.left_mul(m)), Box::new(b.left_mul(m))),
            Segment::Scaled { matrix, scalar } => Segment::Scaled {
                matrix: Box::new(matrix.left_mul(m)),
                scalar: scalar.clone(),
            },
            Segment::Antiderivative {
                integrand,
                base,
                offset,
            } => Segment::Antiderivative {
                integrand: Box::new(integrand.left_mul(m)),
                base: *base,
                offset: m * offset,
            },
        }
    }

    pub fn add(&self, other: &Segment) -> Segment {
        match (self, other) {
            (Segment::Terms { shape, terms: a }, Segment::Terms { terms: b, .. }) => {
                let mut terms = a.clone();
                for t in b {
                    if let Some(existing) = terms.iter_mut().find(|x| x.basis == t.basis) {
                        existing.coeff += &t.coeff;
                    } else {
                        terms.push(t.clone());
                    }
                }
                Segment::Terms {
                    shape: *shape,
                    terms,
                }
            }
            _ => Segment::Sum(Box::new(self.clone()), Box::new(other.clone())),
        }
    }

    /// Product with a scalar segment; closed form where the basis allows it.
    pub fn times_scalar(&self, scalar: &Segment) -> Segment {
        if let Some(c) = scalar.as_constant() {
            return self.scale(c[(0, 0)]);
        }
        if let (Segment::Terms { shape, terms: a }, Segment::Terms { terms: b, .. }) =
            (self, scalar)
        {
            let mut out = Segment::Terms {
                shape: *shape,
                terms: Vec::new(),
            };
            let mut closed = true;
            'outer: for ta in a {
                for tb in b {
                    match ta.basis.product(&tb.basis) {
                        Some((f, basis)) => {
                            out =
                                out.add(&Segment::term(basis, &ta.coeff * (f * tb.coeff[(0, 0)])));
                        }
                        None => {
                            closed = false;
                            break 'outer;
                        }
                    }
                }
            }
            if closed {
                return out;
            }
        }
        Segment::Scaled {
            matrix: Box::new(self.clone()),
            scalar: Box::new(scalar.clone()),
        }
    }

    /// The antiderivative `G` with `G(base) = offset`.
    pub fn antiderivative(&self, base: f64, offset: &DMatrix<f64>) -> Segment {
        match self {
            Segment::Terms { shape, terms } => {
                let mut out: Vec<Term> = Vec::with_capacity(terms.len() + 1);
                for t in terms {
                    let (f, basis) = t.basis.antiderivative();
                    out.push(Term {
                        basis,
                        coeff: &t.coeff * f,
                    });
                }
                let raw = Segment::Terms {
                    shape: *shape,
                    terms: out,
                };
                let shift = offset - raw.eval(base);
                raw.add(&Segment::constant(shift))
            }
            Segment::Sum(a, b) => {
                let zero = DMatrix::zeros(offset.nrows(), offset.ncols());
                a.antiderivative(base, offset)
                    .add(&b.antiderivative(base, &zero))
            }
            _ => Segment::Antiderivative {
                integrand: Box::new(self.clone()),
                base,
                offset: offset.clone(),
            },
        }
    }
}

/// `sum_{k < terms} a^k cos(b^k pi t)`.
pub fn weierstrass_segment(terms: usize, a: f64, b: f64) -> Segment {
    let list = (0..terms)
        .map(|k| Term {
            basis: Basis::Cos {
                freq: b.powi(k as i32) * std::f64::consts::PI,
                phase: 0.0,
            },
            coeff: DMatrix::from_element(1, 1, a.powi(k as i32)),
        })
        .collect();
    Segment::Terms {
        shape: (1, 1),
        terms: list,
    }
}
