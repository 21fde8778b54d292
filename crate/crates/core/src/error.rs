use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular matrix in {context}")]
    SingularMatrix { context: &'static str },

    #[error("eigenvector matrix is ill-conditioned (cond ≈ {cond:.3e})")]
    DefectiveMatrix { cond: f64 },

    #[error("quadrature order {n} outside 1..=256")]
    QuadratureOrder { n: usize },

    #[error("angle {phi} rad is outside the beam-passing range [0, {max}]")]
    AngleOutOfRange { phi: f64, max: f64 },

    #[error(
        "dark-regime mean time {tau_bar_dark:.6e} s does not exceed the minimum {tau0:.6e} s; \
         the shifted-exponential dark-time model is undefined for these parameters"
    )]
    InvalidGeometry { tau_bar_dark: f64, tau0: f64 },

    #[error("geometric series diverges: spectral radius of αM is {radius:.6}")]
    Divergent { radius: f64 },

    #[error("computed population {value:e} lies outside [0, 1] beyond round-off")]
    PopulationOutOfRange { value: f64 },

    #[error("detuning grid must be strictly increasing")]
    GridNotIncreasing,

    #[error("at Ω = {omega} rad/s: {source}")]
    AtDetuning {
        omega: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
