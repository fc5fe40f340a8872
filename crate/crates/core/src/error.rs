use thiserror::Error;

use crate::dual::DualError;
use crate::engine::EngineError;
use crate::estimate::EstimateError;
use crate::killedwalk::KilledWalkError;
use crate::lattice::LatticeError;
use crate::spectral::SpectralError;

/// A strategy name that is not in its registry.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} `{name}` (known: {})", known.join(", "))]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub known: Vec<&'static str>,
}

/// Exit statuses of the command-line front-end.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("property violated: {0}")]
    Violation(String),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    KilledWalk(#[from] KilledWalkError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Rejected inputs map to 1, failed computations to 2, failed
    /// property checks to 3.
    pub fn exit_code(&self) -> i32 {
        if self.is_usage() {
            EXIT_USAGE
        } else if matches!(self, Error::Violation(_)) {
            EXIT_VIOLATION
        } else {
            EXIT_NUMERICAL
        }
    }

    fn is_usage(&self) -> bool {
        match self {
            Error::Usage(_) | Error::Strategy(_) | Error::Lattice(_) => true,
            Error::Engine(e) => engine_usage(e),
            Error::Dual(e) => dual_usage(e),
            Error::Estimate(e) => matches!(e, EstimateError::Malformed(_)),
            Error::KilledWalk(e) => walk_usage(e),
            Error::Spectral(e) => match e {
                SpectralError::OutsideSubcritical { .. }
                | SpectralError::BadLambda(_)
                | SpectralError::ZeroDimension
                | SpectralError::BadRadius(_)
                | SpectralError::SizeMismatch { .. }
                | SpectralError::Lattice(_) => true,
                SpectralError::Hitting(w) => walk_usage(w),
                SpectralError::Engine(g) => engine_usage(g),
                _ => false,
            },
            _ => false,
        }
    }
}

fn engine_usage(e: &EngineError) -> bool {
    !matches!(e, EngineError::InvalidWeight { .. })
}

fn dual_usage(e: &DualError) -> bool {
    !matches!(e, DualError::FrontOverflow { .. } | DualError::Estimate(_))
}

fn walk_usage(e: &KilledWalkError) -> bool {
    !matches!(e, KilledWalkError::NonConvergence { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(Error::Violation("x".into()).exit_code(), EXIT_VIOLATION);
        assert_eq!(Error::from(DualError::NoReplicates).exit_code(), EXIT_USAGE);
        assert_eq!(
            Error::from(DualError::FrontOverflow { limit: 1, time: 0.0 }).exit_code(),
            EXIT_NUMERICAL
        );
        let unresolved = SpectralError::Unresolved {
            lo: 0.1,
            hi: 0.2,
            tol: 1e-6,
            method: "m".into(),
        };
        assert_eq!(Error::from(unresolved).exit_code(), EXIT_NUMERICAL);
        assert_eq!(
            Error::from(SpectralError::OutsideSubcritical { lambda: 0.4, dim: 2 }).exit_code(),
            EXIT_USAGE
        );
    }
}
