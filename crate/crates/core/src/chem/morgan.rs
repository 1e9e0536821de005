//! Morgan (circular) fingerprints.
//!
//! Invariants are 64-bit FNV-1a hashes:
//!
//! * radius 0: hash of the 38 atom-feature bytes (each 0 or 1);
//! * round `t ≥ 1`: hash of `[t] ++ inv(a) ++ (bond_type ++ inv(n))*` where
//!   the `(bond_type, inv(n))` pairs over neighbors are sorted ascending and
//!   invariants are written little-endian.
//!
//! Every invariant sets bit `inv mod nbits`. Atoms without neighbors keep
//! their radius-0 invariant and set no further bits.

use alloc::vec;
use alloc::vec::Vec;

use super::{AtomFeature, MolecularGraph};
use crate::math::fnv1a;

pub const FINGERPRINT_BITS: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
}

impl Fingerprint {
    pub fn new(nbits: usize) -> Self {
        Fingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
        }
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.nbits == 0
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.get(b))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.nbits).map(|b| self.get(b)).collect()
    }
}

pub fn initial_invariant(feature: &AtomFeature) -> u64 {
    fnv1a(feature.bits())
}

pub fn morgan_fingerprint(g: &MolecularGraph, radius: usize, nbits: usize) -> Fingerprint {
    assert!(nbits > 0, "fingerprint needs at least one bit");
    let mut fp = Fingerprint::new(nbits);
    let n = g.num_atoms();
    let mut inv: Vec<u64> = (0..n).map(|i| initial_invariant(&g.atom_feature(i))).collect();
    for &v in &inv {
        fp.set((v % nbits as u64) as usize);
    }
    let mut buf = Vec::new();
    let mut pairs: Vec<(u8, u64)> = Vec::new();
    for round in 1..=radius {
        let mut next = inv.clone();
        for a in 0..n {
            if g.degree(a) == 0 {
                continue;
            }
            pairs.clear();
            pairs.extend(
                g.neighbors(a)
                    .iter()
                    .map(|&(nb, b)| (g.bonds()[b].kind.index() as u8, inv[nb])),
            );
            pairs.sort_unstable();
            buf.clear();
            buf.push(round as u8);
            buf.extend_from_slice(&inv[a].to_le_bytes());
            for &(bt, h) in &pairs {
                buf.push(bt);
                buf.extend_from_slice(&h.to_le_bytes());
            }
            let h = fnv1a(&buf);
            next[a] = h;
            fp.set((h % nbits as u64) as usize);
        }
        inv = next;
    }
    fp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn fp(s: &str) -> Fingerprint {
        morgan_fingerprint(&parse_smiles(s).unwrap(), 2, FINGERPRINT_BITS)
    }

    #[test]
    fn methane_sets_one_bit() {
        assert_eq!(fp("C").count_ones(), 1);
        assert_eq!(fp("C").len(), 1024);
    }

    #[test]
    fn deterministic_and_grows_with_structure() {
        assert_eq!(fp("CCO"), fp("CCO"));
        assert!(fp("CCO").count_ones() > fp("C").count_ones());
    }

    #[test]
    fn invariant_to_atom_order() {
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let n = g.num_atoms();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let h = g.permuted(&perm).unwrap();
        assert_eq!(morgan_fingerprint(&g, 2, 1024), morgan_fingerprint(&h, 2, 1024));
    }
}
