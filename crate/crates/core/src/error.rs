use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown elementwise op `{0}`")]
    UnknownOp(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("SMILES parse error at byte {offset}: {message}")]
    Smiles { offset: usize, message: String },
    #[error("unregistered ontology code `{0}`")]
    UnknownCode(String),
    #[error("ontology parent chain of `{0}` contains a cycle")]
    OntologyCycle(String),
    #[error("no precomputed vector for sentence hash {0:016x}")]
    MissingSentenceVector(u64),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("metric undefined: {0}")]
    Metric(&'static str),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
