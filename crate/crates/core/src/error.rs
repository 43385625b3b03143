use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("rule head has no function term")]
    NoFunction,
    #[error("rule head has more than one function term")]
    MultipleFunctions,
    #[error("nested term `{0}` (function arguments and body atoms must be flat)")]
    NestedTerm(String),
    #[error("constant `{0}` is not allowed in a rule")]
    ConstantInRule(String),
    #[error("head variable `{0}` does not occur in the body")]
    UnsafeVariable(String),
    #[error("head predicate `{0}` also occurs in the body")]
    HeadPredicateInBody(String),
    #[error("rule body is empty")]
    EmptyBody,
    #[error("`{name}` used with arity {found}, previously {expected}")]
    ArityClash {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("function position {position} is out of range for a head of arity {arity}")]
    FunctionPosition { position: usize, arity: usize },
    #[error("reserved name `{0}`")]
    ReservedName(String),
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("at {line}:{col}: {source}")]
    Located {
        line: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("queries have different heads: `{0}` vs `{1}`")]
    HeadMismatch(String, String),
    #[error("head arity mismatch: {0} vs {1}")]
    HeadArityMismatch(usize, usize),
    #[error("fact `{fact}` does not match head arity {expected}")]
    ArityMismatch { fact: String, expected: usize },
    #[error("key index {index} out of range for {arity} body variables")]
    InvalidKeyIndex { index: usize, arity: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("`{0}` cannot be a multiset variable (must be a non-head body variable)")]
    MultisetVariable(String),
    #[error("expected exactly one rule, found {0}")]
    RuleCount(usize),
}

impl Error {
    pub(crate) fn at(self, line: usize, col: usize) -> Self {
        match self {
            e @ (Error::Syntax { .. } | Error::Located { .. }) => e,
            e => Error::Located {
                line,
                col,
                source: Box::new(e),
            },
        }
    }

    /// Strips location wrappers.
    pub fn kind(&self) -> &Error {
        match self {
            Error::Located { source, .. } => source.kind(),
            e => e,
        }
    }
}
