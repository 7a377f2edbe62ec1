//! Eisenstein-Kronecker forms on elliptic curves, their residues and
//! regularized integrals, and closed-form Gromov-Witten generating series of
//! elliptic curves checked against numerical oracles.

pub mod combinatorics;
pub mod error;
pub mod gw;
pub mod integrals;
pub mod kronecker;
pub mod modular;
pub mod numerics;
pub mod qseries;
pub mod symbolic;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use gw::GwPoint;
pub use integrals::{AveragedIntegral, IteratedContourPlan};
pub use kronecker::{EkRoute, EkVariant, Kronecker};
pub use modular::{EisensteinMethod, EisensteinValue, ModularPoint};
pub use numerics::{ContourSpec, ExcisionSpec, Jet};
pub use qseries::{QSeries, QSeriesRow, QTarget};
pub use symbolic::{EKExpr, EKMonomial, LinearForm};
pub use theta::{ThetaEvaluator, ThetaRepresentation};
pub use verify::{Profile, Suite, VerificationReport, VerifyConfig};

pub use num_complex::Complex64;
