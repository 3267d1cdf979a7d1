use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{quantity} = {value} is outside its domain ({expected})")]
    Domain {
        quantity: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A load current outside the tabulated motor characteristic.
    #[error("load current {current} A is outside the table range [{min}, {max}] A")]
    OutOfTable { current: f64, min: f64, max: f64 },

    /// Rejected configuration; `path` names the offending field, e.g. `controller.debounce_scans`.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Digital input voltage beyond the module's rated window.
    #[error("input voltage {0} V is beyond the rated input range")]
    InputOverRange(f64),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors raised while running, as opposed to while validating configuration.
    pub fn is_runtime(&self) -> bool {
        !matches!(self, Error::Validation { .. })
    }
}
