use nalgebra::DMatrix;

use super::path::PiecewisePath;
use super::segment::Segment;
use crate::error::{invalid, Result};
use crate::quad;

/// A scalar measure with a piecewise density and finitely many point masses.
///
/// The distribution function is left-continuous, so an atom at `t_a`
/// belongs to every window `[c, d)` with `c <= t_a < d`.
#[derive(Clone, Debug)]
pub struct StieltjesMeasure {
    density: PiecewisePath,
    atoms: Vec<(f64, f64)>,
}

impl StieltjesMeasure {
    pub fn new(density: PiecewisePath, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if density.shape() != (1, 1) {
            return Err(invalid("measure density must be scalar"));
        }
        if atoms.iter().any(|(t, w)| !t.is_finite() || !w.is_finite()) {
            return Err(invalid("atom times and weights must be finite"));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (t, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += w,
                _ => merged.push((t, w)),
            }
        }
        Ok(Self {
            density,
            atoms: merged,
        })
    }

    pub fn lebesgue() -> Self {
        Self {
            density: PiecewisePath::scalar(1.0),
            atoms: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self {
            density: PiecewisePath::scalar(0.0),
            atoms: Vec::new(),
        }
    }

    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(PiecewisePath::scalar(0.0), atoms)
    }

    pub fn density(&self) -> &PiecewisePath {
        &self.density
    }

    pub fn density_at(&self, t: f64) -> f64 {
        self.density.eval(t)[(0, 0)]
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Atoms with `c <= t < d`.
    pub fn atoms_in(&self, c: f64, d: f64) -> impl Iterator<Item = &(f64, f64)> {
        self.atoms.iter().filter(move |(t, _)| *t >= c && *t < d)
    }

    pub fn atom_weight(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .find(|(ta, _)| *ta == t)
            .map(|a| a.1)
            .unwrap_or(0.0)
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.density.segments(), [s] if s.as_constant().is_some_and(|c| c[(0, 0)] == 0.0))
            || !self.density.breakpoints().is_empty()
    }

    /// Distribution `u(t) - u(base)`, left-continuous.
    pub fn distribution(&self, base: f64) -> PiecewisePath {
        let mut out = self.density.antiderivative(base);
        for &(t, w) in &self.atoms {
            let step = PiecewisePath::step(t, DMatrix::from_element(1, 1, w)).expect("valid step");
            out = out.add(&step).expect("scalar paths");
            if t < base {
                out = out.add(&PiecewisePath::scalar(-w)).expect("scalar paths");
            }
        }
        out
    }

    /// `mu([c, d))` including atoms at `c` but not at `d`.
    pub fn mass(&self, c: f64, d: f64, tol: f64) -> Result<f64> {
        let cont = self.density_integral(c, d, tol, |x| x)?;
        Ok(cont + self.atoms_in(c, d).map(|a| a.1).sum::<f64>())
    }

    /// Total variation of the distribution on `[c, d]`.
    pub fn variation(&self, c: f64, d: f64, tol: f64) -> Result<f64> {
        let cont = self.density_integral(c, d, tol, f64::abs)?;
        Ok(cont + self.atoms_in(c, d).map(|a| a.1.abs()).sum::<f64>())
    }

    fn density_integral(&self, c: f64, d: f64, tol: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        let pieces = self.density.pieces_in(c, d);
        let per = tol / pieces.len().max(1) as f64;
        let mut total = 0.0;
        for (a, b, seg) in pieces {
            total += integrate_segment(seg, a, b, per, &g)?;
        }
        Ok(total)
    }

    /// Checks non-negativity of atoms and of the density at sample points;
    /// returns the first violating time.
    pub fn first_negative(&self, c: f64, d: f64, samples_per_piece: usize) -> Option<f64> {
        if let Some(&(t, _)) = self.atoms_in(c, d).find(|a| a.1 < 0.0) {
            return Some(t);
        }
        for (a, b, seg) in self.density.pieces_in(c, d) {
            for k in 0..=samples_per_piece {
                let t = a + (b - a) * k as f64 / samples_per_piece as f64;
                let t = t.clamp(a + 1e-12 * (b - a), b - 1e-12 * (b - a));
                if seg.eval(t)[(0, 0)] < -1e-14 {
                    return Some(t);
                }
            }
        }
        None
    }
}

fn integrate_segment(
    seg: &Segment,
    a: f64,
    b: f64,
    tol: f64,
    g: &impl Fn(f64) -> f64,
) -> Result<f64> {
    if let Some(c) = seg.as_constant() {
        return Ok(g(c[(0, 0)]) * (b - a));
    }
    Ok(quad::integrate(|t| g(seg.eval(t)[(0, 0)]), a, b, tol)?.value)
}
