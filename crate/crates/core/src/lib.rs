//! Directional entropy toolkit for Z² symbolic systems.

pub mod algebraic;
pub mod chaos;
pub mod entropy;
pub mod error;
pub mod gf;
pub mod lattice;
pub mod measures;
pub mod skewprod;
pub mod systems;

pub use chaos::{TupleObservation, TupleVerdict, VerdictKind};
pub use error::{Error, Result};
pub use lattice::{DirectionSpec, Rational, Rect, ShapeSet, Site, StripParams};
pub use systems::{ConfigWindow, PatternWindow, SystemSpec};
