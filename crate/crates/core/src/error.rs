use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A wavelength fell outside the validity interval of a dispersion model.
    #[error("wavelength {wavelength_nm} nm is outside the valid range [{min_nm}, {max_nm}] nm of model `{model}`")]
    WavelengthOutOfRange {
        model: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("no channels in the requested band")]
    EmptyChannelSet,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
