//! Mittag-Leffler decay certificates and simulation for linear Caputo
//! delay systems with time-varying coefficients and delays.

pub mod expr;
pub mod fdde;
pub mod halanay;
pub mod lmi;
pub mod mlf;
pub mod positivity;
pub mod system;

pub use expr::{ExprError, TimeExpr};
pub use fdde::{solve, EnvelopeCheck, FddeError, NormKind, SolverConfig, Trajectory};
pub use halanay::{
    certify, lambda_at, CaseTag, ConditionVerdict, HalanayCertificate, HalanayError, HalanayInput, SampledInput,
    ScanGrid,
};
pub use lmi::{certify_lmi, LmiError, LmiInput, LmiReport};
pub use mlf::{mittag_leffler, FractionalOrder, MlError, MlQuery};
pub use positivity::{certify_positive, PositivityError, PositivityOptions, PositivityVerdict};
pub use system::{DelaySystem, DelayTerm, SystemError};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Halanay(#[from] HalanayError),
    #[error(transparent)]
    Positivity(#[from] PositivityError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Fdde(#[from] FddeError),
}
