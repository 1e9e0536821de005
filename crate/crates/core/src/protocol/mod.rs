//! Eligibility-criteria encoding: sentence vectors and the convolution-bank
//! protocol embedding.

mod embed;
mod encoder;

pub use embed::{ProtocolEncoder, DEFAULT_CHANNELS, DEFAULT_KERNELS};
pub use encoder::{
    encode_sentences, segment_criteria, sentence_hash, tokenize, CriteriaSet, HashingEncoder, PrecomputedEncoder,
    SentenceEncoder, SentenceEncoderSpec, SentenceMatrix, HASH_BUCKETS, PROJECTION_NONZEROS, SENTENCE_DIM,
};
