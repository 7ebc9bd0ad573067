use crate::error::{invalid, Error, Result};

/// A positive gauge on `[c, d]`, piecewise constant between cut points.
///
/// At a cut point the radius of the piece on its left applies. Pinned points
/// force themselves to be tags of every interval containing them: away from a
/// pin `p` the radius is capped at `|t - p| / 2`.
#[derive(Clone, Debug)]
pub struct Gauge {
    c: f64,
    d: f64,
    cuts: Vec<f64>,
    radii: Vec<f64>,
    pins: Vec<f64>,
    pin_radius: Option<f64>,
}

impl Gauge {
    pub fn uniform(c: f64, d: f64, radius: f64) -> Result<Self> {
        Self::piecewise(c, d, Vec::new(), vec![radius])
    }

    pub fn piecewise(c: f64, d: f64, cuts: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if !(c.is_finite() && d.is_finite()) || c >= d {
            return Err(invalid(format!(
                "gauge window [{c}, {d}] must be a proper interval"
            )));
        }
        if radii.len() != cuts.len() + 1 {
            return Err(invalid("gauge needs one radius per piece"));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(invalid("gauge radii must be positive and finite"));
        }
        if cuts.windows(2).any(|w| w[1] <= w[0]) || cuts.iter().any(|&t| t <= c || t >= d) {
            return Err(invalid(
                "gauge cuts must increase strictly inside the window",
            ));
        }
        Ok(Self {
            c,
            d,
            cuts,
            radii,
            pins: Vec::new(),
            pin_radius: None,
        })
    }

    pub fn with_pins(mut self, mut pins: Vec<f64>) -> Self {
        pins.retain(|p| *p >= self.c && *p <= self.d);
        pins.sort_by(f64::total_cmp);
        pins.dedup();
        self.pins = pins;
        self
    }

    /// Radius used at the pinned points themselves, capped by the piece radius.
    pub fn with_pin_radius(mut self, radius: f64) -> Self {
        self.pin_radius = Some(radius);
        self
    }

    pub fn window(&self) -> (f64, f64) {
        (self.c, self.d)
    }

    pub fn pins(&self) -> &[f64] {
        &self.pins
    }

    fn piece_radius(&self, t: f64) -> f64 {
        let idx = self.cuts.partition_point(|&x| x < t);
        self.radii[idx]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let r = self.piece_radius(t);
        if self.pins.is_empty() {
            return r;
        }
        let i = self.pins.partition_point(|&p| p < t);
        let mut dist = f64::INFINITY;
        if i < self.pins.len() {
            if self.pins[i] == t {
                return self.pin_radius.map_or(r, |p| p.min(r));
            }
            dist = dist.min(self.pins[i] - t);
        }
        if i > 0 {
            dist = dist.min(t - self.pins[i - 1]);
        }
        r.min(0.5 * dist)
    }

    fn admits(&self, a: f64, b: f64, tag: f64) -> bool {
        let r = self.eval(tag);
        a > tag - r && b < tag + r
    }
}

/// Nodes `c = t_0 < ... < t_m = d` with tags `tau_j` in `[t_{j-1}, t_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedDivision {
    nodes: Vec<f64>,
    tags: Vec<f64>,
}

impl TaggedDivision {
    pub fn new(nodes: Vec<f64>, tags: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || tags.len() != nodes.len() - 1 {
            return Err(invalid("a division needs m + 1 nodes and m tags"));
        }
        for j in 0..tags.len() {
            if nodes[j + 1] <= nodes[j] {
                return Err(invalid(format!(
                    "division nodes must increase at index {j}"
                )));
            }
            if tags[j] < nodes[j] || tags[j] > nodes[j + 1] {
                return Err(invalid(format!(
                    "tag {} lies outside [{}, {}]",
                    tags[j],
                    nodes[j],
                    nodes[j + 1]
                )));
            }
        }
        Ok(Self { nodes, tags })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn tags(&self) -> &[f64] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("non-empty"))
    }

    /// Iterator over `(tag, left node, right node)`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.tags
            .iter()
            .enumerate()
            .map(|(j, &tau)| (tau, self.nodes[j], self.nodes[j + 1]))
    }
}

pub fn is_delta_fine(division: &TaggedDivision, gauge: &Gauge) -> Result<bool> {
    if division.window() != gauge.window() {
        return Err(invalid(format!(
            "division window {:?} differs from gauge window {:?}",
            division.window(),
            gauge.window()
        )));
    }
    Ok(division.cells().all(|(tau, a, b)| gauge.admits(a, b, tau)))
}

const MAX_DEPTH: usize = 60;

/// Builds a delta-fine division by bisection.
pub fn cousin_division(gauge: &Gauge) -> Result<TaggedDivision> {
    cousin_division_with_splits(gauge, &[])
}

/// Like [`cousin_division`], with `splits` forced to be nodes.
pub fn cousin_division_with_splits(gauge: &Gauge, splits: &[f64]) -> Result<TaggedDivision> {
    let (c, d) = gauge.window();
    let mut cuts: Vec<f64> = splits.iter().copied().filter(|&t| t > c && t < d).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = vec![c];
    let mut tags = Vec::new();
    let mut a = c;
    for b in cuts.into_iter().chain(std::iter::once(d)) {
        refine(gauge, a, b, 0, &mut nodes, &mut tags)?;
        a = b;
    }
    Ok(TaggedDivision { nodes, tags })
}

fn refine(
    gauge: &Gauge,
    a: f64,
    b: f64,
    depth: usize,
    nodes: &mut Vec<f64>,
    tags: &mut Vec<f64>,
) -> Result<()> {
    let mut inside = gauge.pins.iter().copied().filter(|&p| p >= a && p <= b);
    let first_pin = inside.next();
    let several_pins = inside.next().is_some();
    if !several_pins {
        let mid = 0.5 * (a + b);
        let candidates: &[f64] = match first_pin {
            Some(ref p) => std::slice::from_ref(p),
            None => &[mid, a, b],
        };
        if let Some(&tag) = candidates.iter().find(|&&tau| gauge.admits(a, b, tau)) {
            nodes.push(b);
            tags.push(tag);
            return Ok(());
        }
    }
    let m = 0.5 * (a + b);
    if depth >= MAX_DEPTH || m <= a || m >= b {
        return Err(Error::GaugeTooFine { a, b, depth });
    }
    refine(gauge, a, m, depth + 1, nodes, tags)?;
    refine(gauge, m, b, depth + 1, nodes, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_is_fine_and_pins_are_tags() {
        let g = Gauge::piecewise(0.0, 1.0, vec![0.5], vec![0.1, 0.01])
            .unwrap()
            .with_pins(vec![0.3, 0.77]);
        let div = cousin_division(&g).unwrap();
        assert!(is_delta_fine(&div, &g).unwrap());
        for p in [0.3, 0.77] {
            let covering: Vec<_> = div.cells().filter(|(_, a, b)| *a <= p && p <= *b).collect();
            assert!(!covering.is_empty());
            assert!(covering.iter().all(|(tau, _, _)| *tau == p));
        }
    }

    #[test]
    fn splits_become_nodes() {
        let g = Gauge::uniform(0.0, 1.0, 0.3).unwrap();
        let div = cousin_division_with_splits(&g, &[0.123]).unwrap();
        assert!(div.nodes().contains(&0.123));
        assert!(is_delta_fine(&div, &g).unwrap());
    }

    #[test]
    fn window_mismatch_is_an_error() {
        let g = Gauge::uniform(0.0, 1.0, 0.3).unwrap();
        let div = TaggedDivision::new(vec![0.0, 2.0], vec![1.0]).unwrap();
        assert!(is_delta_fine(&div, &g).is_err());
    }

    #[test]
    fn vanishing_gauge_reports_interval() {
        let g = Gauge::uniform(0.0, 1.0, 1e-30).unwrap();
        match cousin_division(&g) {
            Err(Error::GaugeTooFine { depth, .. }) => assert_eq!(depth, MAX_DEPTH),
            other => panic!("unexpected {other:?}"),
        }
    }
}
