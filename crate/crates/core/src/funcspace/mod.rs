//! Regulated and bounded-variation paths, Stieltjes measures and gauges.

mod gauge;
mod measure;
mod path;
mod segment;

pub use gauge::{
    cousin_division, cousin_division_with_splits, is_delta_fine, Gauge, TaggedDivision,
};
pub use measure::StieltjesMeasure;
pub use path::{total_variation, Breakpoint, PiecewisePath, Side};
pub use segment::{weierstrass_segment, Basis, Segment, Term};

/// Matrix-valued samples; vectors are single-column matrices.
pub type Value = nalgebra::DMatrix<f64>;
