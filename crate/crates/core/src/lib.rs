pub mod error;
pub mod fields;
pub mod fracop;
pub mod gauge;
pub mod group;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sobolev;

pub use error::{Error, Result};
pub use fields::{Field, ScalarField};
pub use gauge::{Gauge, GaugeKind};
pub use group::{CoordBox, GroupSpec, Point};
pub use quadrature::{Estimate, QuadratureConfig};
