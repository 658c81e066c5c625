//! Shared error type for the library.
//!
//! Every fallible operation returns [`Result`]. Variants are coarse enough
//! to map onto CLI exit classes (validation vs runtime) and carry enough
//! context to be actionable without a debugger.

/// Library-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied scalar or shape argument is out of range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Total sensitivity is zero although some weight entry is nonzero and
    /// the activation is not identically zero on a reachable interval.
    #[error("total sensitivity is zero for a set with nonzero weights")]
    ZeroSensitivity,

    /// A pruning budget exceeds the width of the layer it targets.
    #[error("budget {budget} exceeds layer width {width}")]
    BudgetExceedsWidth { budget: usize, width: usize },

    /// A layer does not have the type an operation requires.
    #[error("layer {index} is not a {expected} layer")]
    LayerTypeMismatch {
        index: usize,
        expected: &'static str,
    },

    /// Tensor or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A layer or point index is outside the valid range.
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// A model, query, or config file failed to parse; `context` names the
    /// offending field or location.
    #[error("parse error at {context}: {reason}")]
    Parse { context: String, reason: String },

    /// The counterexample point set is degenerate (coincident points).
    #[error("degenerate point set: coincident points at indices {0} and {1}")]
    DegenerateSet(usize, usize),

    /// The activation does not satisfy the hypothesis an operation needs.
    #[error("activation `{activation}` rejected: {reason}")]
    InvalidActivation { activation: String, reason: String },

    /// A subset argument is not a proper, in-range, duplicate-free subset.
    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    /// An iterative search exhausted its budget without converging.
    #[error("search did not converge: {0}")]
    NonConvergent(String),

    /// The operation is defined but intentionally not supported for this
    /// input (e.g. strided or padded conv pruning pairs).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Error at a specific layer while processing a whole network.
    #[error("layer {layer}: {source}")]
    AtLayer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the index of the layer being processed.
    pub fn at_layer(self, layer: usize) -> Self {
        Error::AtLayer {
            layer,
            source: Box::new(self),
        }
    }

    /// Stable machine-readable kind tag, used by the CLI's JSON error mode.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::ZeroSensitivity => "ZeroSensitivity",
            Error::BudgetExceedsWidth { .. } => "BudgetExceedsWidth",
            Error::LayerTypeMismatch { .. } => "LayerTypeMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::Parse { .. } => "ParseError",
            Error::DegenerateSet(_, _) => "DegenerateSet",
            Error::InvalidActivation { .. } => "InvalidActivation",
            Error::InvalidSubset(_) => "InvalidSubset",
            Error::NonConvergent(_) => "NonConvergent",
            Error::Unsupported(_) => "Unsupported",
            Error::AtLayer { source, .. } => source.kind(),
            Error::Io(_) => "Io",
        }
    }

    /// True when the error reflects bad caller input rather than a failure
    /// encountered while executing (the CLI maps this to exit code 1 vs 2).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter { .. }
            | Error::BudgetExceedsWidth { .. }
            | Error::LayerTypeMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::Parse { .. }
            | Error::DegenerateSet(_, _)
            | Error::InvalidActivation { .. }
            | Error::InvalidSubset(_)
            | Error::Unsupported(_) => true,
            Error::ZeroSensitivity | Error::NonConvergent(_) | Error::Io(_) => false,
            Error::AtLayer { source, .. } => source.is_validation(),
        }
    }
}

/// Convenience constructor for [`Error::InvalidParameter`].
pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_is_stable_through_layer_wrapping() {
        let e = Error::ZeroSensitivity.at_layer(3);
        assert_eq!(e.kind(), "ZeroSensitivity");
        assert!(!e.is_validation());
        assert_eq!(
            e.to_string(),
            "layer 3: total sensitivity is zero for a set with nonzero weights"
        );
    }

    #[test]
    fn validation_classification_covers_budget_errors() {
        let e = Error::BudgetExceedsWidth {
            budget: 10,
            width: 4,
        };
        assert!(e.is_validation());
        assert_eq!(e.kind(), "BudgetExceedsWidth");
    }
}
