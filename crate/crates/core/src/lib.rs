//! Forward and inverse nodal problems for a diffusion pencil with conformable
//! fractional derivatives.

pub mod asymptotics;
pub mod calculus;
pub mod error;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod model;
pub mod nodal;
pub mod roots;
pub mod spectral;

pub use calculus::{AlphaOrder, TransformedCoord};
pub use error::{Error, Result};
pub use grid::{GridFunction, TGrid};
pub use model::{AnalyticPreset, Potential, PotentialPair, TrigSeries};
