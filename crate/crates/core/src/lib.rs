pub mod error;
pub mod field;
pub mod form;
pub mod functionals;
pub mod geodesics;
pub mod slope;
pub mod geometry;
pub mod grid;
pub mod model;
pub mod stability;
pub mod stencil;
pub mod sum;

pub use error::{Axis, Error, Result};
pub use field::{ScalarField, Slopes};
pub use form::Form11;
pub use grid::{Closure, LogGrid};
pub use model::{Bump, CalabiAnsatz, FibrationModel};
