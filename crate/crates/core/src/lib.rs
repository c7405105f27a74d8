pub mod affine;
pub mod construction;
pub mod epsilon;
pub mod error;
pub mod modp;
pub mod spectral;
pub mod resistance;
pub mod experiments;

pub use affine::{AffineMap, GeneratorSet, IrrepId};
pub use construction::{ConstructionParams, ConstructionResult, SizeBound};
pub use epsilon::Epsilon;
pub use error::{Error, Result};
pub use modp::{FpElem, FpSubset, PrimeField};
pub use resistance::{DefectReport, ExpansionProfile, ResistanceReport};
pub use spectral::{LinOp, NormEstimate, NormOptions};
