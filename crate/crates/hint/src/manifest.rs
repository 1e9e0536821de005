//! Text manifest stored next to a model checkpoint: node order, edges,
//! encoder spec, architecture, pretraining tag and the code vocabulary.
//!
//! ```text
//! format: hint-model 1
//! node_order: d m p A D M E T R PK I V pred
//! edges: m-A m-D ... V-pred
//! encoder: hashing:0
//! pretrain: pretrained | none
//! use_gnn: true
//! dim: 100
//! ...
//! vocabulary:
//! <one vocabulary line per code, as in vocab.tsv>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use hint_core::graph::{HintConfig, NodeKind, EDGES, NODE_ORDER};
use hint_core::ontology::Ontology;
use hint_core::protocol::SentenceEncoderSpec;

use crate::error::{Error, Result};
use crate::formats::{format_vocabulary, parse_vocabulary};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
const FORMAT: &str = "hint-model 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub encoder: SentenceEncoderSpec,
    pub pretrained: bool,
    pub model: HintConfig,
    pub vocabulary: Ontology,
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn node_line() -> String {
    join(NODE_ORDER.iter().map(|n| n.name()))
}

fn edge_line() -> String {
    join(EDGES.iter().map(|(a, b)| format!("{}-{}", a.name(), b.name())))
}

impl Manifest {
    pub fn render(&self) -> String {
        let m = &self.model;
        let mut s = String::new();
        let _ = writeln!(s, "format: {FORMAT}");
        let _ = writeln!(s, "node_order: {}", node_line());
        let _ = writeln!(s, "edges: {}", edge_line());
        let _ = writeln!(s, "encoder: {}", self.encoder);
        let _ = writeln!(s, "pretrain: {}", if self.pretrained { "pretrained" } else { "none" });
        let _ = writeln!(s, "use_gnn: {}", m.use_gnn);
        let _ = writeln!(s, "dim: {}", m.dim);
        let _ = writeln!(s, "mpnn_depth: {}", m.mpnn_depth);
        let _ = writeln!(s, "gram_hidden: {}", m.gram_hidden);
        let _ = writeln!(s, "sentence_dim: {}", m.sentence_dim);
        let _ = writeln!(s, "kernels: {}", join(&m.kernels));
        let _ = writeln!(s, "channels: {}", m.channels);
        let _ = writeln!(s, "highway_layers: {}", m.highway_layers);
        let _ = writeln!(s, "gcn_layers: {}", m.gcn_layers);
        let _ = writeln!(s, "attention_hidden: {}", m.attention_hidden);
        let _ = writeln!(s, "dropout: {}", m.dropout);
        let _ = writeln!(s, "checkpoint: {CHECKPOINT_FILE}");
        s.push_str("vocabulary:\n");
        s.push_str(&format_vocabulary(&self.vocabulary));
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let (head, vocab) = text
            .split_once("\nvocabulary:\n")
            .ok_or_else(|| Error::parse(path, 0, "missing `vocabulary:` section"))?;
        let mut fields = BTreeMap::new();
        for (i, line) in head.lines().enumerate() {
            let (k, v) = line
                .split_once(": ")
                .ok_or_else(|| Error::parse(path, i + 1, "expected `key: value`"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::parse(path, 0, format!("missing `{k}`")));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::parse(path, 0, format!("bad `{k}`"))) };
        if get("format")? != FORMAT {
            return Err(Error::Manifest(format!("unsupported manifest format `{}`", get("format")?)));
        }
        if get("node_order")? != node_line() || get("edges")? != edge_line() {
            return Err(Error::Manifest("node order or edge list differs from this build".into()));
        }
        let model = HintConfig {
            dim: num("dim")?,
            mpnn_depth: num("mpnn_depth")?,
            gram_hidden: num("gram_hidden")?,
            sentence_dim: num("sentence_dim")?,
            kernels: get("kernels")?
                .split(' ')
                .map(|k| k.parse().map_err(|_| Error::parse(path, 0, "bad `kernels`")))
                .collect::<Result<_>>()?,
            channels: num("channels")?,
            highway_layers: num("highway_layers")?,
            gcn_layers: num("gcn_layers")?,
            attention_hidden: num("attention_hidden")?,
            dropout: get("dropout")?.parse().map_err(|_| Error::parse(path, 0, "bad `dropout`"))?,
            use_gnn: get("use_gnn")?.parse().map_err(|_| Error::parse(path, 0, "bad `use_gnn`"))?,
        };
        let pretrained = match get("pretrain")? {
            "pretrained" => true,
            "none" => false,
            other => return Err(Error::parse(path, 0, format!("bad `pretrain` value `{other}`"))),
        };
        Ok(Manifest {
            encoder: get("encoder")?.parse().map_err(|e: hint_core::Error| Error::parse(path, 0, e.to_string()))?,
            pretrained,
            model,
            vocabulary: parse_vocabulary(path, vocab)?,
        })
    }

    /// Errors when `requested` is set and differs from the recorded encoder.
    pub fn check_encoder(&self, requested: Option<&SentenceEncoderSpec>) -> Result<()> {
        match requested {
            Some(r) if *r != self.encoder => Err(Error::Manifest(format!(
                "model was trained with encoder `{}` but `{r}` was requested",
                self.encoder
            ))),
            _ => Ok(()),
        }
    }
}

/// Node names as written in the manifest, for documentation and tests.
pub fn node_names() -> Vec<&'static str> {
    NODE_ORDER.iter().map(|n: &NodeKind| n.name()).collect()
}
