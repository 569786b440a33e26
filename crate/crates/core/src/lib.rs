pub mod bilinear;
pub mod boxspline;
pub mod certify;
pub mod error;
pub mod fixtures;
pub mod laurent;
pub mod linalg;
mod par;
pub mod realize;
pub mod symmetry;
pub mod synth;
pub mod univariate;

pub use error::{Error, Result};
pub use laurent::{LaurentPoly, MultiIndex, PolyMatrix};
pub use symmetry::DilationSetup;
