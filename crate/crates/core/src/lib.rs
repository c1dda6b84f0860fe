#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod constraints;
pub mod data;
pub mod error;
pub mod gaussian;
pub mod image;
pub mod influence;
pub mod mdpde;
pub mod quadrature;
pub mod simulation;

pub use clustering::{fit, AlgoConfig, AssignmentRule, ClusteringResult, MixtureParams};
pub use constraints::ConstraintConfig;
pub use data::ObservationSet;
pub use error::{Error, Result};
pub use gaussian::{CovMatrix, GaussianComponent};
pub use mdpde::{fit_component, ComponentFit, IrlsConfig};
