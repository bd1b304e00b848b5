//! Linear eigenvalue statistics of non-Hermitian random band matrices with a
//! variance profile.

pub mod error;
pub mod experiment;
pub mod les;
pub mod matgen;
pub mod profiles;
pub mod theory;

pub use error::{Error, Result};
pub use les::{LesSample, TestFunction};
pub use matgen::{BandMatrix, BandSpec, EntryLaw, Topology};
pub use profiles::{sinc, PeriodizedProfile, ProfileKind, VarianceProfile};
pub use experiment::{ExperimentConfig, ExperimentReport};
