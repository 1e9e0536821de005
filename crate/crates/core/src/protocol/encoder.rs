use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{fnv1a, sqrt};
use crate::rng::splitmix64;
use crate::tensor::Tensor;

pub const SENTENCE_DIM: usize = 768;
pub const HASH_BUCKETS: u64 = 20_000;
/// Non-zero coordinates per bucket in the hashing projection.
pub const PROJECTION_NONZEROS: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CriteriaSet {
    pub inclusion: Vec<String>,
    pub exclusion: Vec<String>,
}

impl CriteriaSet {
    /// Trims every sentence and rejects empty ones.
    pub fn new(inclusion: Vec<String>, exclusion: Vec<String>) -> Result<Self> {
        let clean = |v: Vec<String>| -> Result<Vec<String>> {
            v.into_iter()
                .map(|s| {
                    let t = s.trim();
                    if t.is_empty() {
                        Err(Error::InvalidArgument("criteria sentence is empty".into()))
                    } else {
                        Ok(t.to_string())
                    }
                })
                .collect()
        };
        Ok(CriteriaSet {
            inclusion: clean(inclusion)?,
            exclusion: clean(exclusion)?,
        })
    }
}

/// One 768-dim row per sentence; an empty list is a single zero row.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceMatrix(Tensor);

impl SentenceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Ok(Self::padding());
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * SENTENCE_DIM);
        for r in rows {
            if r.len() != SENTENCE_DIM {
                return Err(Error::shape("sentence matrix", &[1, r.len()], &[1, SENTENCE_DIM]));
            }
            data.extend(r);
        }
        Ok(SentenceMatrix(Tensor::matrix(n, SENTENCE_DIM, data)?))
    }

    /// Wraps a matrix of any width, for encoders of other dimensions.
    pub fn from_tensor(t: Tensor) -> Result<Self> {
        if t.shape().len() != 2 {
            return Err(Error::shape("sentence matrix", t.shape(), &[t.rows(), SENTENCE_DIM]));
        }
        Ok(SentenceMatrix(t))
    }

    pub fn padding() -> Self {
        SentenceMatrix(Tensor::zeros([1, SENTENCE_DIM]))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }
}

/// 64-bit FNV-1a of the sentence's UTF-8 bytes.
pub fn sentence_hash(sentence: &str) -> u64 {
    fnv1a(sentence.as_bytes())
}

/// Lowercased alphanumeric runs.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Splits free-text criteria into sentences: on newlines, and on `.`, `!`,
/// `?`, `;` followed by whitespace or end of text. Pieces are trimmed and
/// empty pieces dropped; a leading bullet (`-`, `*`, `•`) is removed.
pub fn segment_criteria(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut push = |piece: &str| {
        let p = piece.trim();
        let p = p.trim_start_matches(['-', '*', '•']).trim();
        if !p.is_empty() {
            out.push(p.to_string());
        }
    };
    for line in text.lines() {
        let mut start = 0;
        let mut chars = line.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if matches!(c, '.' | '!' | '?' | ';') {
                let boundary = match chars.peek() {
                    None => true,
                    Some(&(_, n)) => n.is_whitespace(),
                };
                if boundary {
                    push(&line[start..i + c.len_utf8()]);
                    start = i + c.len_utf8();
                }
            }
        }
        push(&line[start..]);
    }
    out
}

pub trait SentenceEncoder {
    fn encode(&self, sentence: &str) -> Result<Vec<f64>>;
}

/// Token-hashed bag of words through a fixed sparse random projection.
///
/// A token lands in bucket `fnv1a(token) mod 20000`. Each bucket owns
/// [`PROJECTION_NONZEROS`] signed unit entries whose positions and signs are
/// drawn from a SplitMix64 stream keyed by `(seed, bucket)`, so the
/// 20000 × 768 matrix is never stored. The token sum is L2-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashingEncoder {
    pub seed: u64,
}

impl HashingEncoder {
    pub fn new(seed: u64) -> Self {
        HashingEncoder { seed }
    }

    fn add_bucket(&self, bucket: u64, out: &mut [f64]) {
        let mut state = self.seed ^ bucket.wrapping_mul(0xA076_1D64_78BD_642F);
        for _ in 0..PROJECTION_NONZEROS {
            let r = splitmix64(&mut state);
            let pos = ((r >> 1) % SENTENCE_DIM as u64) as usize;
            out[pos] += if r & 1 == 0 { 1.0 } else { -1.0 };
        }
    }
}

impl SentenceEncoder for HashingEncoder {
    fn encode(&self, sentence: &str) -> Result<Vec<f64>> {
        let trimmed = sentence.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty sentence".into()));
        }
        let mut v = vec![0.0; SENTENCE_DIM];
        let tokens = tokenize(trimmed);
        if tokens.is_empty() {
            self.add_bucket(fnv1a(trimmed.as_bytes()) % HASH_BUCKETS, &mut v);
        }
        for t in &tokens {
            self.add_bucket(fnv1a(t.as_bytes()) % HASH_BUCKETS, &mut v);
        }
        let mut norm = sqrt(v.iter().map(|x| x * x).sum());
        if norm == 0.0 {
            // Signed entries cancelled exactly; fall back to a deterministic basis vector.
            v[(fnv1a(trimmed.as_bytes()) % SENTENCE_DIM as u64) as usize] = 1.0;
            norm = 1.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Vectors looked up by sentence hash.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrecomputedEncoder {
    vectors: BTreeMap<u64, Vec<f64>>,
}

impl PrecomputedEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, hash: u64, vector: Vec<f64>) -> Result<()> {
        if vector.len() != SENTENCE_DIM {
            return Err(Error::shape("precomputed vector", &[1, vector.len()], &[1, SENTENCE_DIM]));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("precomputed vector"));
        }
        self.vectors.insert(hash, vector);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.vectors.iter().map(|(&h, v)| (h, v.as_slice()))
    }
}

impl SentenceEncoder for PrecomputedEncoder {
    fn encode(&self, sentence: &str) -> Result<Vec<f64>> {
        let h = sentence_hash(sentence.trim());
        self.vectors
            .get(&h)
            .cloned()
            .ok_or(Error::MissingSentenceVector(h))
    }
}

/// How sentences are turned into vectors; recorded in model manifests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SentenceEncoderSpec {
    Precomputed { path: String },
    Hashing { seed: u64 },
}

impl Default for SentenceEncoderSpec {
    fn default() -> Self {
        SentenceEncoderSpec::Hashing { seed: 0 }
    }
}

impl core::fmt::Display for SentenceEncoderSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SentenceEncoderSpec::Precomputed { path } => write!(f, "precomputed:{path}"),
            SentenceEncoderSpec::Hashing { seed } => write!(f, "hashing:{seed}"),
        }
    }
}

impl core::str::FromStr for SentenceEncoderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("hashing", seed)) => seed
                .parse()
                .map(|seed| SentenceEncoderSpec::Hashing { seed })
                .map_err(|_| Error::InvalidArgument(alloc::format!("bad hashing seed `{seed}`"))),
            Some(("precomputed", path)) if !path.is_empty() => Ok(SentenceEncoderSpec::Precomputed {
                path: path.to_string(),
            }),
            _ => Err(Error::InvalidArgument(alloc::format!(
                "encoder spec must be `hashing:<seed>` or `precomputed:<path>`, got `{s}`"
            ))),
        }
    }
}

/// `(S_I, S_E)` for a criteria set.
pub fn encode_sentences(criteria: &CriteriaSet, encoder: &dyn SentenceEncoder) -> Result<(SentenceMatrix, SentenceMatrix)> {
    let enc = |list: &[String]| -> Result<SentenceMatrix> {
        let rows = list.iter().map(|s| encoder.encode(s)).collect::<Result<Vec<_>>>()?;
        SentenceMatrix::from_rows(rows)
    };
    Ok((enc(&criteria.inclusion)?, enc(&criteria.exclusion)?))
}
