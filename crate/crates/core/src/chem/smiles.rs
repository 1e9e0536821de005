//! Parser for the supported SMILES subset: organic-subset and bracket atoms,
//! `- = # :` bonds, branches, ring closures (`1`, `%12`) and `.` separated
//! components. Stereo bonds, isotopes and wildcards are rejected.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Atom, BondType, Chirality, MolecularGraph};
use crate::error::{Error, Result};

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca", "Sc",
    "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt",
    "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv",
    "Ts", "Og",
];

/// Aromatic symbols accepted inside brackets.
const AROMATIC_BRACKET: [&str; 8] = ["se", "as", "te", "b", "c", "n", "o", "p"];

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Smiles {
        offset,
        message: message.into(),
    }
}

struct RingOpen {
    atom: usize,
    bond: Option<BondType>,
    offset: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<(usize, usize, BondType)>,
    prev: Option<usize>,
    branches: Vec<(usize, usize)>,
    pending: Option<(BondType, usize)>,
    rings: BTreeMap<u32, RingOpen>,
}

/// Parses a SMILES string into a hydrogen-suppressed molecular graph.
///
/// Errors carry the byte offset of the offending token.
pub fn parse_smiles(s: &str) -> Result<MolecularGraph> {
    if s.trim().is_empty() {
        return Err(err(0, "empty SMILES"));
    }
    let mut p = Parser {
        s: s.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: BTreeMap::new(),
    };
    p.run()?;
    MolecularGraph::new(p.atoms, p.bonds)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<()> {
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'(' => {
                    let prev = self.prev.ok_or_else(|| err(at, "branch opened before any atom"))?;
                    if self.pending.is_some() {
                        return Err(err(at, "bond symbol before '('"));
                    }
                    self.branches.push((prev, at));
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(err(at, "dangling bond before ')'"));
                    }
                    let (atom, _) = self.branches.pop().ok_or_else(|| err(at, "unmatched ')'"))?;
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if self.pending.is_some() {
                        return Err(err(at, "two consecutive bond symbols"));
                    }
                    if self.prev.is_none() {
                        return Err(err(at, "bond symbol before any atom"));
                    }
                    let kind = match c {
                        b'-' => BondType::Single,
                        b'=' => BondType::Double,
                        b'#' => BondType::Triple,
                        _ => BondType::Aromatic,
                    };
                    self.pending = Some((kind, at));
                    self.pos += 1;
                }
                b'/' | b'\\' => return Err(err(at, "stereo bonds ('/' and '\\') are not supported")),
                b'$' => return Err(err(at, "quadruple bonds are not supported")),
                b'*' => return Err(err(at, "wildcard atom '*' is not supported")),
                b'.' => {
                    if self.pending.is_some() {
                        return Err(err(at, "bond symbol before '.'"));
                    }
                    if !self.branches.is_empty() {
                        return Err(err(at, "'.' inside a branch"));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_closure((c - b'0') as u32, at)?;
                }
                b'%' => {
                    let d = self.s.get(at + 1..at + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                    let d = d.ok_or_else(|| err(at, "'%' must be followed by two digits"))?;
                    let n = ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32;
                    self.pos += 3;
                    self.ring_closure(n, at)?;
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
            }
        }
        if let Some((_, at)) = self.pending {
            return Err(err(at, "SMILES ends with a bond symbol"));
        }
        if let Some(&(_, at)) = self.branches.last() {
            return Err(err(at, "unmatched '('"));
        }
        if let Some(open) = self.rings.values().next() {
            return Err(err(open.offset, "unclosed ring bond"));
        }
        Ok(())
    }

    fn implicit_bond(&self, a: usize, b: usize) -> BondType {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondType::Aromatic
        } else {
            BondType::Single
        }
    }

    fn add_atom(&mut self, atom: Atom) {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let kind = match self.pending.take() {
                Some((k, _)) => k,
                None => self.implicit_bond(prev, idx),
            };
            self.bonds.push((prev, idx, kind));
        }
        self.pending = None;
        self.prev = Some(idx);
    }

    fn ring_closure(&mut self, n: u32, at: usize) -> Result<()> {
        let cur = self.prev.ok_or_else(|| err(at, "ring closure before any atom"))?;
        let bond = self.pending.take().map(|(k, _)| k);
        match self.rings.remove(&n) {
            None => {
                self.rings.insert(n, RingOpen { atom: cur, bond, offset: at });
            }
            Some(open) => {
                if open.atom == cur {
                    return Err(err(at, "ring closure bonds an atom to itself"));
                }
                let kind = match (open.bond, bond) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(err(at, "conflicting bond symbols on ring closure"))
                    }
                    (Some(k), _) | (None, Some(k)) => k,
                    (None, None) => self.implicit_bond(open.atom, cur),
                };
                if self
                    .bonds
                    .iter()
                    .any(|&(a, b, _)| (a == open.atom && b == cur) || (a == cur && b == open.atom))
                {
                    return Err(err(at, "ring closure duplicates an existing bond"));
                }
                self.bonds.push((open.atom, cur, kind));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom> {
        let at = self.pos;
        let c = self.s[at];
        let next = self.s.get(at + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            _ => {
                let ch = core::str::from_utf8(&self.s[at..])
                    .ok()
                    .and_then(|r| r.chars().next())
                    .unwrap_or('?');
                return Err(err(at, alloc::format!("unsupported token '{ch}'")));
            }
        };
        self.pos += len;
        Ok(Atom {
            element: element.to_string(),
            aromatic,
            charge: 0,
            chirality: Chirality::Unspecified,
            hydrogens: None,
            bracket: false,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        self.pos += 1;
        if matches!(self.peek(), Some(b'0'..=b'9')) {
            return Err(err(self.pos, "isotopes are not supported"));
        }
        let sym_at = self.pos;
        let (element, aromatic) = self.bracket_symbol()?;

        let mut chirality = Chirality::Unspecified;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chirality = Chirality::AntiClockwise;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Chirality::Clockwise;
            } else if matches!(self.peek(), Some(b'A'..=b'Z')) {
                let tag = self.s.get(self.pos..self.pos + 2).unwrap_or(&[]);
                if !matches!(tag, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    return Err(err(self.pos, "unknown chirality class"));
                }
                self.pos += 2;
                self.digits();
                chirality = Chirality::Other;
            }
        }

        let mut hydrogens = None;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = Some(self.digits().map_or(1, |d| d.min(255) as u8));
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.digits() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits().is_none() {
                return Err(err(self.pos, "atom class needs digits"));
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(_) => return Err(err(self.pos, "unexpected character in bracket atom")),
            None => return Err(err(open, "unterminated bracket atom")),
        }
        if !(-15..=15).contains(&charge) {
            return Err(err(sym_at, "formal charge out of range"));
        }
        Ok(Atom {
            element,
            aromatic,
            charge: charge as i8,
            chirality,
            hydrogens,
            bracket: true,
        })
    }

    fn bracket_symbol(&mut self) -> Result<(String, bool)> {
        let at = self.pos;
        match self.peek() {
            Some(b'*') => Err(err(at, "wildcard atom '*' is not supported")),
            Some(c) if c.is_ascii_uppercase() => {
                if let Some(l @ b'a'..=b'z') = self.s.get(at + 1).copied() {
                    let two = [c, l];
                    let two = core::str::from_utf8(&two).unwrap_or("");
                    if let Some(e) = ELEMENTS.iter().find(|&&e| e == two) {
                        self.pos += 2;
                        return Ok((e.to_string(), false));
                    }
                }
                let one = [c];
                let one = core::str::from_utf8(&one).unwrap_or("");
                match ELEMENTS.iter().find(|&&e| e == one) {
                    Some(e) => {
                        self.pos += 1;
                        Ok((e.to_string(), false))
                    }
                    None => Err(err(at, "unknown element")),
                }
            }
            Some(c) if c.is_ascii_lowercase() => {
                for sym in AROMATIC_BRACKET {
                    if self.s[at..].starts_with(sym.as_bytes()) {
                        self.pos += sym.len();
                        let mut e = String::from(sym);
                        e[..1].make_ascii_uppercase();
                        return Ok((e, true));
                    }
                }
                Err(err(at, "unknown aromatic element"))
            }
            _ => Err(err(at, "bracket atom needs an element symbol")),
        }
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        core::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }
}
