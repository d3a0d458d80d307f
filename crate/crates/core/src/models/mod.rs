//! Built-in benchmark models.

mod gaussian;
mod spec;
pub mod two_piece;

pub use gaussian::{GaussianLocation, GaussianLocationScale, GaussianScale};
pub use spec::{Family, ModelSpec};
pub use two_piece::{TwoPiece, TwoPieceGamma, TwoPieceParams};
