use thiserror::Error;

/// Errors produced by the reduction toolkit.
///
/// Every variant belongs to one [`ErrorClass`], which the command line front
/// end turns into a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries ({0})")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid conformal map: {0}")]
    InvalidMap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("method not applicable: {0}")]
    MethodUnsupported(String),

    #[error("Lyapunov operator is singular: eigenvalues {0} and {1} of F and -F* (nearly) coincide")]
    SpectrumCollision(String, String),

    #[error("right-hand side is not Hermitian (relative asymmetry {0:.3e})")]
    NonHermitianRhs(f64),

    #[error("matrix is indefinite: min eigenvalue {min:.3e} vs max eigenvalue {max:.3e}")]
    IndefiniteMatrix { min: f64, max: f64 },

    #[error("evaluation at (or next to) a pole of the map: z = {0}")]
    PoleEvaluation(String),

    #[error("shifted matrix gamma*A - alpha*I is singular")]
    SingularShift,

    #[error("resolvent zI - A is numerically singular at z = {0}")]
    ResolventSingular(String),

    #[error("mapped spectrum is not strictly stable: eigenvalue {0} of m^-1(A)")]
    UnstableMappedSpectrum(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureDivergence(String),

    #[error(
        "singular values tie at the truncation index r = {r}: sigma_r = {sigma_r:.6e}, sigma_r+1 = {sigma_next:.6e}"
    )]
    SingularValueTie { r: usize, sigma_r: f64, sigma_next: f64 },

    #[error("rank deficient: numerical rank {rank} < required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("decomposition failed to converge: {0}")]
    DecompositionFailed(&'static str),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure categories with stable exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Dimension,
    Numerical,
    Convergence,
    Io,
    Format,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Dimension => 3,
            ErrorClass::Numerical => 4,
            ErrorClass::Convergence => 5,
            ErrorClass::Io => 6,
            ErrorClass::Format => 7,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidSystem(_) | InvalidMap(_) | InvalidArgument(_) | MethodUnsupported(_) => ErrorClass::Validation,
            DimensionMismatch(_) => ErrorClass::Dimension,
            NonFinite(_)
            | SpectrumCollision(..)
            | NonHermitianRhs(_)
            | IndefiniteMatrix { .. }
            | PoleEvaluation(_)
            | SingularShift
            | ResolventSingular(_)
            | UnstableMappedSpectrum(_)
            | SingularValueTie { .. }
            | RankDeficient { .. }
            | EmptyTrajectory => ErrorClass::Numerical,
            QuadratureDivergence(_) | DecompositionFailed(_) | StepSizeUnderflow { .. } => ErrorClass::Convergence,
            Io { .. } => ErrorClass::Io,
            Parse { .. } => ErrorClass::Format,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}
