//! Matrix product states: canonical forms, transfer spectra, entanglement
//! of fractionally magnetized states, bond truncation bounds, injectivity
//! and boundary constructions.

pub mod canonical;
pub mod config;
pub mod entanglement;
pub mod error;
pub mod expander;
pub mod linalg;
pub mod mps;
pub mod par;
pub mod region;
pub mod suite;
pub mod sweep;
pub mod symmetry;
pub mod transfer;
pub mod truncation;

pub use canonical::{canonicalize, CanonicalBlock, CanonicalForm};
pub use config::{Caps, Config, Tolerances};
pub use error::{Error, Result};
pub use mps::{Mps, SiteTensor};
pub use transfer::{TransferOperator, TransferSpectrum};
