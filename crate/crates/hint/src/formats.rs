//! Line-oriented text formats: ontology parent maps, vocabularies, ADMET
//! (PK) datasets, disease-risk datasets and precomputed sentence vectors.
//! All are UTF-8 with LF line endings; blank lines and lines starting with
//! `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hint_core::ontology::Ontology;
use hint_core::protocol::{PrecomputedEncoder, SENTENCE_DIM};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `(line number, content)` of every non-blank, non-comment line.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// `child<TAB>parent` pairs.
pub fn parse_parent_map(path: &Path, text: &str) -> Result<Vec<(String, String)>> {
    content_lines(text)
        .map(|(n, line)| match line.split('\t').collect::<Vec<_>>()[..] {
            [child, parent] if !child.is_empty() && !parent.is_empty() => Ok((child.to_string(), parent.to_string())),
            _ => Err(Error::parse(path, n, "expected `child<TAB>parent`")),
        })
        .collect()
}

pub fn load_ontology(path: &Path) -> Result<Ontology> {
    let pairs = parse_parent_map(path, &read_text(path)?)?;
    Ontology::from_parent_map(pairs).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn format_parent_map(pairs: &[(String, String)]) -> String {
    let mut s = String::from("# child\tparent\n");
    for (c, p) in pairs {
        let _ = writeln!(s, "{c}\t{p}");
    }
    s
}

/// Vocabulary: one code per line in embedding-row order, `code<TAB>parent`
/// or `code` for roots.
pub fn format_vocabulary(o: &Ontology) -> String {
    let mut s = String::new();
    for (code, parent) in o.entries() {
        match parent {
            Some(p) => {
                let _ = writeln!(s, "{code}\t{p}");
            }
            None => {
                let _ = writeln!(s, "{code}");
            }
        }
    }
    s
}

pub fn parse_vocabulary(path: &Path, text: &str) -> Result<Ontology> {
    let mut entries: Vec<(String, Option<String>)> = Vec::new();
    for (n, line) in content_lines(text) {
        match line.split('\t').collect::<Vec<_>>()[..] {
            [code] => entries.push((code.to_string(), None)),
            [code, parent] => entries.push((code.to_string(), Some(parent.to_string()))),
            _ => return Err(Error::parse(path, n, "expected `code` or `code<TAB>parent`")),
        }
    }
    Ontology::from_entries(&entries).map_err(|e| Error::parse(path, 0, e.to_string()))
}

fn parse_label(path: &Path, n: usize, s: &str) -> Result<f64> {
    match s.trim() {
        "0" => Ok(0.0),
        "1" => Ok(1.0),
        other => Err(Error::parse(path, n, format!("label must be 0 or 1, got `{other}`"))),
    }
}

/// `smiles<TAB>label` lines.
pub fn parse_pk(path: &Path, text: &str) -> Result<Vec<(String, f64)>> {
    content_lines(text)
        .map(|(n, line)| match line.split('\t').collect::<Vec<_>>()[..] {
            [smiles, label] if !smiles.is_empty() => Ok((smiles.to_string(), parse_label(path, n, label)?)),
            _ => Err(Error::parse(path, n, "expected `smiles<TAB>label`")),
        })
        .collect()
}

pub fn format_pk(records: &[(String, f64)]) -> String {
    let mut s = String::new();
    for (smiles, y) in records {
        let _ = writeln!(s, "{smiles}\t{}", *y as u8);
    }
    s
}

/// `code1,code2,...<TAB>label_or_rate` lines; rates are thresholded at 0.5.
pub fn parse_risk(path: &Path, text: &str) -> Result<Vec<(Vec<String>, f64)>> {
    content_lines(text)
        .map(|(n, line)| {
            let [codes, value] = line.split('\t').collect::<Vec<_>>()[..] else {
                return Err(Error::parse(path, n, "expected `codes<TAB>label_or_rate`"));
            };
            let codes: Vec<String> = codes.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect();
            if codes.is_empty() {
                return Err(Error::parse(path, n, "no disease codes"));
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, n, format!("bad label or rate `{value}`")))?;
            let y = hint_core::pretrain::risk_label(v).map_err(|e| Error::parse(path, n, e.to_string()))?;
            Ok((codes, y))
        })
        .collect()
}

pub fn format_risk(records: &[(Vec<String>, f64)]) -> String {
    let mut s = String::new();
    for (codes, y) in records {
        let _ = writeln!(s, "{}\t{}", codes.join(","), y);
    }
    s
}

/// `hash_hex<SPACE>v1 … v768` lines.
pub fn parse_vectors(path: &Path, text: &str) -> Result<PrecomputedEncoder> {
    let mut enc = PrecomputedEncoder::new();
    for (n, line) in content_lines(text) {
        let mut fields = line.split_ascii_whitespace();
        let hash = fields.next().unwrap_or_default();
        let hash = u64::from_str_radix(hash, 16).map_err(|_| Error::parse(path, n, format!("bad sentence hash `{hash}`")))?;
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(path, n, format!("bad value `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != SENTENCE_DIM {
            return Err(Error::parse(path, n, format!("expected {SENTENCE_DIM} values, got {}", values.len())));
        }
        enc.insert(hash, values).map_err(|e| Error::parse(path, n, e.to_string()))?;
    }
    Ok(enc)
}

pub fn format_vectors(enc: &PrecomputedEncoder) -> String {
    let mut s = String::new();
    for (h, v) in enc.iter() {
        let _ = write!(s, "{h:016x}");
        for x in v {
            let _ = write!(s, " {x:e}");
        }
        s.push('\n');
    }
    s
}
