use thiserror::Error;

/// Failure modes shared by every numeric operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("argument outside the domain of {0}")]
    Domain(&'static str),
    #[error("no crest crossing on the NHIM line through I={i}, theta={theta}")]
    NoCrossing { i: f64, theta: f64 },
    #[error("crest is singular at I={0} (|mu alpha(I)| = 1)")]
    SingularCrest(f64),
    #[error("point (I={i}, theta={theta}) is on or too close to the tangency locus")]
    TangencyPoint { i: f64, theta: f64 },
    #[error("branch {branch} is not available at I={i}, theta={theta}")]
    BranchUnavailable {
        branch: &'static str,
        i: f64,
        theta: f64,
    },
    #[error("action I={0} is outside the highway domain")]
    NotInDomain(f64),
    #[error("pseudo-orbit stalled at I={i} (leg gain {gain:e})")]
    StalledProgress { i: f64, gain: f64 },
    #[error("action |I|={0} is too small for an inner ergodization leg")]
    DegenerateAction(f64),
    #[error("constant C undefined: mu * max alpha = {0} >= 1")]
    ConstantUndefined(f64),
    #[error("integrator step size collapsed at t={0}")]
    StepFailure(f64),
    #[error("reduced flow left the branch domain at t={t}: {reason}")]
    DomainExit { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
