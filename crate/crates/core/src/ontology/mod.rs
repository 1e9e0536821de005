//! Disease-code hierarchy and the ancestor-attention (GRAM) embedding.
//!
//! Codes come from a child→parent map. A code missing from the map gets a
//! parent by dotted-prefix fallback: drop the last character, then a
//! trailing dot (`D41.20 → D41.2 → D41`). Codes without a dot are roots.
//! A reserved [`UNK_CODE`] (index 0) stands in for codes never registered.

mod gram;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use gram::{disease_embedding, Gram, GRAM_HIDDEN};

pub const UNK_CODE: &str = "<UNK>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodeId(usize);

impl CodeId {
    /// Row of this code in the basic-embedding table.
    pub fn embedding_index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OntologyCode {
    pub code: String,
    pub parent: Option<CodeId>,
    pub embedding_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ontology {
    codes: Vec<OntologyCode>,
    index: BTreeMap<String, CodeId>,
    parents: BTreeMap<String, String>,
}

/// Parent by dotted-prefix truncation, `None` for roots.
pub fn fallback_parent(code: &str) -> Option<&str> {
    if !code.contains('.') {
        return None;
    }
    let mut p = &code[..code.len() - code.chars().last().map_or(0, char::len_utf8)];
    if let Some(stripped) = p.strip_suffix('.') {
        p = stripped;
    }
    (!p.is_empty()).then_some(p)
}

impl Default for Ontology {
    fn default() -> Self {
        Self::new()
    }
}

impl Ontology {
    /// An ontology holding only the UNK code.
    pub fn new() -> Self {
        let mut o = Ontology {
            codes: Vec::new(),
            index: BTreeMap::new(),
            parents: BTreeMap::new(),
        };
        o.push(UNK_CODE, None);
        o
    }

    /// Builds from `(child, parent)` pairs. Every child and parent is
    /// registered, in order of first appearance.
    pub fn from_parent_map<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut o = Ontology::new();
        let mut order = Vec::new();
        for (child, parent) in pairs {
            let (child, parent) = (child.as_ref(), parent.as_ref());
            if child == parent {
                return Err(Error::OntologyCycle(child.to_string()));
            }
            match o.parents.get(child) {
                Some(p) if p != parent => {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "code `{child}` has two parents (`{p}`, `{parent}`)"
                    )))
                }
                Some(_) => {}
                None => {
                    o.parents.insert(child.to_string(), parent.to_string());
                }
            }
            order.push(child.to_string());
            order.push(parent.to_string());
        }
        o.check_acyclic()?;
        for code in order {
            o.register(&code)?;
        }
        Ok(o)
    }

    /// Rebuilds an ontology from `(code, parent)` entries in index order
    /// (UNK excluded), as produced by [`Ontology::entries`]. Each parent must
    /// appear before its children.
    pub fn from_entries<S: AsRef<str>>(entries: &[(S, Option<S>)]) -> Result<Self> {
        let mut o = Ontology::new();
        for (code, parent) in entries {
            let code = code.as_ref();
            if code.trim().is_empty() || code == UNK_CODE || o.index.contains_key(code) {
                return Err(Error::InvalidArgument(alloc::format!("invalid or repeated vocabulary code `{code}`")));
            }
            let parent = match parent {
                Some(p) => {
                    let p = p.as_ref();
                    let id = o.get(p).ok_or_else(|| Error::UnknownCode(p.to_string()))?;
                    o.parents.insert(code.to_string(), p.to_string());
                    Some(id)
                }
                None => None,
            };
            o.push(code, parent);
        }
        Ok(o)
    }

    /// `(code, parent)` for every code except UNK, in index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, Option<&str>)> {
        self.codes[1..]
            .iter()
            .map(move |c| (c.code.as_str(), c.parent.map(|p| self.codes[p.0].code.as_str())))
    }

    fn check_acyclic(&self) -> Result<()> {
        for start in self.parents.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start.as_str();
            while let Some(p) = self.parent_name(cur) {
                if !seen.insert(cur) {
                    return Err(Error::OntologyCycle(start.clone()));
                }
                cur = p;
            }
        }
        Ok(())
    }

    fn parent_name<'a>(&'a self, code: &'a str) -> Option<&'a str> {
        match self.parents.get(code) {
            Some(p) => Some(p.as_str()),
            None => fallback_parent(code),
        }
    }

    fn push(&mut self, code: &str, parent: Option<CodeId>) -> CodeId {
        let id = CodeId(self.codes.len());
        self.codes.push(OntologyCode {
            code: code.to_string(),
            parent,
            embedding_index: id.0,
        });
        self.index.insert(code.to_string(), id);
        id
    }

    /// Registers `code` and its ancestor chain if they are not yet known.
    pub fn register(&mut self, code: &str) -> Result<CodeId> {
        if let Some(&id) = self.index.get(code) {
            return Ok(id);
        }
        if code.trim().is_empty() || code == UNK_CODE {
            return Err(Error::InvalidArgument(alloc::format!("invalid ontology code `{code}`")));
        }
        // Walk up to the first registered ancestor (or a root), then register downward.
        let mut chain: Vec<String> = Vec::new();
        let mut cur = code.to_string();
        let top = loop {
            if let Some(&id) = self.index.get(&cur) {
                break Some(id);
            }
            if chain.len() > self.parents.len() + 64 {
                return Err(Error::OntologyCycle(code.to_string()));
            }
            let parent = self.parent_name(&cur).map(ToString::to_string);
            chain.push(cur);
            match parent {
                Some(p) => cur = p,
                None => break None,
            }
        };
        let mut parent = top;
        for c in chain.iter().rev() {
            parent = Some(self.push(c, parent));
        }
        Ok(parent.expect("chain is non-empty"))
    }

    pub fn get(&self, code: &str) -> Option<CodeId> {
        self.index.get(code).copied()
    }

    pub fn unk(&self) -> CodeId {
        CodeId(0)
    }

    /// Registered id, or UNK for codes never seen.
    pub fn resolve(&self, code: &str) -> CodeId {
        self.get(code).unwrap_or(CodeId(0))
    }

    pub fn code(&self, id: CodeId) -> &OntologyCode {
        &self.codes[id.0]
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CodeId, &OntologyCode)> {
        self.codes.iter().enumerate().map(|(i, c)| (CodeId(i), c))
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, id: CodeId) -> Vec<CodeId> {
        let mut out = Vec::new();
        let mut cur = self.codes[id.0].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.codes[p.0].parent;
        }
        out
    }

    pub fn ancestors_of(&self, code: &str) -> Result<Vec<&str>> {
        let id = self.get(code).ok_or_else(|| Error::UnknownCode(code.to_string()))?;
        Ok(self
            .ancestors(id)
            .into_iter()
            .map(|a| self.codes[a.0].code.as_str())
            .collect())
    }

    /// `(child, parent)` for every registered non-root code, in index order.
    pub fn parent_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.codes.iter().filter_map(move |c| {
            c.parent
                .map(|p| (c.code.as_str(), self.codes[p.0].code.as_str()))
        })
    }

    /// Every registered code except UNK, in index order.
    pub fn code_names(&self) -> impl Iterator<Item = &str> {
        self.codes[1..].iter().map(|c| c.code.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icd_ancestors_by_fallback() {
        let mut o = Ontology::new();
        o.register("D41.20").unwrap();
        o.register("C34.91").unwrap();
        assert_eq!(o.ancestors_of("D41.20").unwrap(), ["D41.2", "D41"]);
        assert_eq!(o.ancestors_of("C34.91").unwrap(), ["C34.9", "C34"]);
        assert!(o.ancestors_of("D41").unwrap().is_empty());
    }

    #[test]
    fn parent_map_overrides_fallback() {
        let o = Ontology::from_parent_map([("C34", "C00-D49"), ("C34.9", "C34")]).unwrap();
        assert_eq!(o.ancestors_of("C34.9").unwrap(), ["C34", "C00-D49"]);
        let mut o = o;
        o.register("C34.91").unwrap();
        assert_eq!(o.ancestors_of("C34.91").unwrap(), ["C34.9", "C34", "C00-D49"]);
    }

    #[test]
    fn unknown_code_errors_and_resolves_to_unk() {
        let o = Ontology::new();
        assert_eq!(o.ancestors_of("Z99"), Err(Error::UnknownCode("Z99".into())));
        assert_eq!(o.resolve("Z99"), o.unk());
    }

    #[test]
    fn cycles_rejected() {
        let r = Ontology::from_parent_map([("A", "B"), ("B", "C"), ("C", "A")]);
        assert!(matches!(r, Err(Error::OntologyCycle(_))));
    }

    #[test]
    fn fallback_rules() {
        assert_eq!(fallback_parent("D41.20"), Some("D41.2"));
        assert_eq!(fallback_parent("D41.2"), Some("D41"));
        assert_eq!(fallback_parent("D41"), None);
    }
}
