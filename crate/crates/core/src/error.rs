use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mixed degrees")]
    MixedDegrees,
    #[error("degree {0} exceeds the supported jet order 6")]
    DegreeTooHigh(u32),
    #[error("outside normal-form domain")]
    OutsideDomain,
    #[error("stiff or singular trajectory")]
    StepUnderflow,
    #[error("domain exit at s = {0}")]
    DomainExit(f64),
    #[error("no conjugate point in range")]
    NoConjugatePoint,
    #[error("section level out of reach")]
    LevelOutOfReach,
    #[error("f7 formula valid only on C")]
    F7OffC,
    #[error("no Isoself off C")]
    NoIsoselfOffC,
    #[error("stratum B0, out of generic scope")]
    StratumB0,
    #[error("identically zero")]
    IdenticallyZero,
    #[error("smooth curve, no cusps")]
    NoCusps,
    #[error("degenerate arc boundary")]
    DegenerateArcBoundary,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
