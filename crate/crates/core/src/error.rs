use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),

    #[error("resonator cascade is empty")]
    EmptyCascade,

    #[error("resonator index 0 is not allowed")]
    ZeroIndex,

    #[error("duplicate resonator index {0}")]
    DuplicateIndex(i32),

    #[error("resonator index {0} has no mirror partner")]
    UnpairedIndex(i32),

    #[error("resonator {index} does not mirror resonator {partner} (field `{field}`)")]
    AsymmetricPair {
        index: i32,
        partner: i32,
        field: &'static str,
    },

    #[error("vanishing cavity denominator for resonator {index} at omega = {omega}")]
    Singular { index: i32, omega: f64 },

    #[error("frequency grid is empty")]
    EmptyGrid,

    #[error("frequency grid is not strictly ascending at position {0}")]
    UnsortedGrid(usize),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("optimization problem: {0}")]
    Problem(String),

    #[error("parameter `{name}` = {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("integration unstable at t = {time}: stored energy {stored} exceeds injected energy {injected}")]
    Unstable {
        time: f64,
        stored: f64,
        injected: f64,
    },

    #[error("step size dt = {dt} too coarse: dt * {scale} = {product} > {limit}")]
    StepTooLarge {
        dt: f64,
        scale: f64,
        product: f64,
        limit: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub(crate) fn check_finite(value: f64, name: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
