//! Registry of nonlinear laws vanishing at the origin, with a smooth cutoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::funcspace::StieltjesMeasure;
use crate::linalg::op_norm;

/// Largest slope of the cutoff profile in units of `|z| / rho`.
pub const CUTOFF_SLOPE: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub enum NonlinearLaw {
    Zero {
        dim: usize,
    },
    /// `f_i(z) = z^T Q_i z`.
    Quadratic {
        forms: Vec<DMatrix<f64>>,
    },
    /// `f_i(z) = sum_j c_ij z_j^3`.
    Cubic {
        coeffs: DMatrix<f64>,
    },
    /// `f(z) = G tanh(z)` componentwise.
    SaturatedTanh {
        gain: DMatrix<f64>,
    },
}

impl NonlinearLaw {
    pub fn from_registry(name: &str, dim: usize, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let law = match name {
            "zero" => NonlinearLaw::Zero { dim },
            "quadratic" => NonlinearLaw::Quadratic { forms: matrices },
            "cubic" => NonlinearLaw::Cubic {
                coeffs: single(matrices, name)?,
            },
            "saturated_tanh" | "saturated-tanh" => NonlinearLaw::SaturatedTanh {
                gain: single(matrices, name)?,
            },
            other => return Err(Error::UnknownRegistry(other.to_string())),
        };
        law.validate(dim)?;
        Ok(law)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let sq = (dim, dim);
        match self {
            NonlinearLaw::Zero { dim: d } if *d != dim => {
                Err(invalid("zero law has the wrong dimension"))
            }
            NonlinearLaw::Quadratic { forms } => {
                if forms.len() != dim {
                    return Err(invalid(format!(
                        "quadratic law needs {dim} forms, got {}",
                        forms.len()
                    )));
                }
                match forms.iter().find(|q| q.shape() != sq) {
                    Some(q) => Err(Error::ShapeMismatch {
                        expected: sq,
                        got: q.shape(),
                    }),
                    None => Ok(()),
                }
            }
            NonlinearLaw::Cubic { coeffs: m } | NonlinearLaw::SaturatedTanh { gain: m }
                if m.shape() != sq =>
            {
                Err(Error::ShapeMismatch {
                    expected: sq,
                    got: m.shape(),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NonlinearLaw::Zero { dim } => *dim,
            NonlinearLaw::Quadratic { forms } => forms.len(),
            NonlinearLaw::Cubic { coeffs } => coeffs.nrows(),
            NonlinearLaw::SaturatedTanh { gain } => gain.nrows(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NonlinearLaw::Zero { .. } => true,
            NonlinearLaw::Quadratic { forms } => forms.iter().all(|q| q.iter().all(|x| *x == 0.0)),
            NonlinearLaw::Cubic { coeffs: m } | NonlinearLaw::SaturatedTanh { gain: m } => {
                m.iter().all(|x| *x == 0.0)
            }
        }
    }

    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            NonlinearLaw::Zero { dim } => DVector::zeros(*dim),
            NonlinearLaw::Quadratic { forms } => {
                DVector::from_iterator(forms.len(), forms.iter().map(|q| z.dot(&(q * z))))
            }
            NonlinearLaw::Cubic { coeffs } => coeffs * z.map(|x| x * x * x),
            NonlinearLaw::SaturatedTanh { gain } => gain * z.map(f64::tanh),
        }
    }

    /// Bound on `|f(z)|` over the ball of radius `r`.
    pub fn growth_bound(&self, r: f64) -> f64 {
        match self {
            NonlinearLaw::Zero { .. } => 0.0,
            NonlinearLaw::Quadratic { forms } => {
                forms.iter().map(|q| op_norm(q).powi(2)).sum::<f64>().sqrt() * r * r
            }
            NonlinearLaw::Cubic { coeffs } => op_norm(coeffs) * r.powi(3),
            NonlinearLaw::SaturatedTanh { gain } => {
                op_norm(gain) * r.min((gain.ncols() as f64).sqrt())
            }
        }
    }

    /// Bound on the Jacobian norm over the ball of radius `r`.
    pub fn lipschitz_bound(&self, r: f64) -> f64 {
        match self {
            NonlinearLaw::Zero { .. } => 0.0,
            NonlinearLaw::Quadratic { forms } => {
                forms
                    .iter()
                    .map(|q| op_norm(&(q + q.transpose())).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    * r
            }
            NonlinearLaw::Cubic { coeffs } => 3.0 * op_norm(coeffs) * r * r,
            NonlinearLaw::SaturatedTanh { gain } => op_norm(gain),
        }
    }
}

fn single(mut matrices: Vec<DMatrix<f64>>, name: &str) -> Result<DMatrix<f64>> {
    if matrices.len() != 1 {
        return Err(invalid(format!(
            "law `{name}` takes exactly one coefficient matrix"
        )));
    }
    Ok(matrices.pop().expect("length checked"))
}

/// `1` on `[0, 1]`, `0` on `[2, inf)`, and the cubic smoothstep in between.
pub fn cutoff_profile(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let x = r - 1.0;
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

/// How the nonlinearity enters the generalized equation.
#[derive(Clone, Debug)]
pub enum NonlinearityKind {
    /// `f(t, z) dt` from an impulsive equation.
    IdePointwise,
    /// `H(t, z) du(t)` from a measure differential equation.
    MdeKernel,
    /// `F(z, t)` driven by a modulus measure `dh`.
    GenericClassF { modulus: StieltjesMeasure },
}

impl NonlinearityKind {
    pub fn label(&self) -> &'static str {
        match self {
            NonlinearityKind::IdePointwise => "ide_pointwise",
            NonlinearityKind::MdeKernel => "mde_kernel",
            NonlinearityKind::GenericClassF { .. } => "generic_class_f",
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub law: NonlinearLaw,
    pub cutoff_radius: f64,
}

/// Global constants of the truncated law.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CutoffBounds {
    /// `sup |f~|`.
    pub bound: f64,
    /// Global Lipschitz constant of `f~`.
    pub lipschitz: f64,
}

impl CutoffBounds {
    /// Single modulus dominating both the bound and the Lipschitz constant.
    pub fn modulus(&self) -> f64 {
        self.bound.max(self.lipschitz)
    }
}

impl NonlinearitySpec {
    pub fn new(kind: NonlinearityKind, law: NonlinearLaw, cutoff_radius: f64) -> Result<Self> {
        if !(cutoff_radius.is_finite() && cutoff_radius > 0.0) {
            return Err(invalid("cutoff radius must be positive"));
        }
        Ok(Self {
            kind,
            law,
            cutoff_radius,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: NonlinearityKind::IdePointwise,
            law: NonlinearLaw::Zero { dim },
            cutoff_radius: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    /// The law itself, without the cutoff.
    pub fn eval_raw(&self, z: &DVector<f64>) -> DVector<f64> {
        self.law.eval(z)
    }

    /// The truncated law `f(z) chi(|z| / rho)`.
    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        let chi = cutoff_profile(z.norm() / self.cutoff_radius);
        if chi == 0.0 {
            DVector::zeros(z.len())
        } else {
            self.law.eval(z) * chi
        }
    }

    pub fn bounds(&self) -> CutoffBounds {
        let rho = self.cutoff_radius;
        let bound = self.law.growth_bound(2.0 * rho);
        let lipschitz = self.law.lipschitz_bound(2.0 * rho) + CUTOFF_SLOPE * bound / rho;
        CutoffBounds { bound, lipschitz }
    }
}
