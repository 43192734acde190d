//! Random tensor model sample covariance spectra: subset indexing, sampling,
//! eigenvalues, the Marchenko–Pastur law, elementary symmetric polynomials,
//! quadratic-form concentration and truncated-moment conditions.

pub mod concentration;
pub mod conditions;
pub mod error;
pub mod esp;
pub mod index_space;
pub mod matrix;
pub mod mp_law;
pub mod quadrature;
pub mod spectra;
pub mod tensor_model;

pub use error::{Error, Result};
pub use index_space::{BigCount, SubsetIndex};
pub use matrix::SymMatrix;
pub use mp_law::MpParams;
pub use spectra::Esd;
pub use tensor_model::{EntryDistribution, RngStream, TensorModelSpec};
