//! Molecules: SMILES parsing, atom/bond featurization, Morgan fingerprints
//! and the message-passing molecule encoder.

mod features;
mod morgan;
mod mpnn;
mod smiles;
mod writer;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Tensor;

pub use features::{AtomFeature, BondFeature, ATOM_FEATURE_DIM, BOND_FEATURE_DIM, FREQUENT_ELEMENTS};
pub use morgan::{initial_invariant, morgan_fingerprint, Fingerprint, FINGERPRINT_BITS};
pub use mpnn::{drug_embedding, Mpnn, MPNN_DEPTH};
pub use smiles::parse_smiles;
pub use writer::to_smiles;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Chirality {
    Unspecified,
    /// `@`
    AntiClockwise,
    /// `@@`
    Clockwise,
    /// Any other tag (`@TH1`, `@SP2`, ...).
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondType {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondType {
    pub fn index(self) -> usize {
        match self {
            BondType::Single => 0,
            BondType::Double => 1,
            BondType::Triple => 2,
            BondType::Aromatic => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    /// Element symbol in canonical case, e.g. `C`, `Cl`, `Se`.
    pub element: String,
    pub aromatic: bool,
    pub charge: i8,
    pub chirality: Chirality,
    /// Explicit hydrogen count from a bracket atom; kept only for re-emission.
    pub hydrogens: Option<u8>,
    /// Whether the atom was written in brackets.
    pub bracket: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondType,
    pub in_ring: bool,
    /// Cis/trans class in {0..5}; always 0 since `/` and `\` are rejected.
    pub stereo: u8,
}

/// Hydrogen-suppressed molecular graph.
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: `(neighbor, bond index)`.
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    /// Builds a graph, computing ring membership by cycle detection.
    pub fn new(atoms: Vec<Atom>, mut bonds: Vec<(usize, usize, BondType)>) -> crate::Result<Self> {
        let n = atoms.len();
        let mut neighbors = vec![Vec::new(); n];
        for (k, &(a, b, _)) in bonds.iter().enumerate() {
            if a >= n || b >= n || a == b {
                return Err(crate::Error::InvalidArgument(alloc::format!(
                    "bond {k} has invalid endpoints ({a}, {b})"
                )));
            }
            if neighbors[a].iter().any(|&(m, _)| m == b) {
                return Err(crate::Error::InvalidArgument(alloc::format!(
                    "duplicate bond between atoms {a} and {b}"
                )));
            }
            neighbors[a].push((b, k));
            neighbors[b].push((a, k));
        }
        let bridges = find_bridges(n, &neighbors, bonds.len());
        let bonds = bonds
            .drain(..)
            .enumerate()
            .map(|(k, (a, b, kind))| Bond {
                a,
                b,
                kind,
                in_ring: !bridges[k],
                stereo: 0,
            })
            .collect();
        Ok(MolecularGraph {
            atoms,
            bonds,
            neighbors,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.neighbors[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.neighbors[atom].len()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].iter().any(|&(m, _)| m == b)
    }

    /// Symmetric boolean adjacency, row-major `n × n`.
    pub fn adjacency(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut adj = vec![false; n * n];
        for b in &self.bonds {
            adj[b.a * n + b.b] = true;
            adj[b.b * n + b.a] = true;
        }
        adj
    }

    pub fn atom_feature(&self, atom: usize) -> AtomFeature {
        AtomFeature::of(&self.atoms[atom], self.degree(atom))
    }

    pub fn bond_feature(&self, bond: usize) -> BondFeature {
        BondFeature::of(&self.bonds[bond])
    }

    /// `num_atoms × 38` feature matrix.
    pub fn atom_feature_matrix(&self) -> Tensor {
        if self.atoms.is_empty() {
            return Tensor::zeros(vec![1, ATOM_FEATURE_DIM]);
        }
        let mut data = Vec::with_capacity(self.atoms.len() * ATOM_FEATURE_DIM);
        for i in 0..self.atoms.len() {
            data.extend(self.atom_feature(i).bits().iter().map(|&b| b as f64));
        }
        Tensor::from_parts(vec![self.atoms.len(), ATOM_FEATURE_DIM], data)
    }

    /// The same molecule with atom `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> crate::Result<Self> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || core::mem::replace(&mut seen[p], true)) {
            return Err(crate::Error::InvalidArgument("not a permutation".into()));
        }
        let mut atoms = vec![None; n];
        for (i, a) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = Some(a.clone());
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| (perm[b.a], perm[b.b], b.kind))
            .collect();
        MolecularGraph::new(atoms.into_iter().map(Option::unwrap).collect(), bonds)
    }
}

/// Marks bonds that are bridges (lie on no cycle), via iterative Tarjan lowlink.
fn find_bridges(n: usize, neighbors: &[Vec<(usize, usize)>], num_bonds: usize) -> Vec<bool> {
    let mut bridge = vec![false; num_bonds];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, bond used to enter, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, in_bond, ref mut pos)) = stack.last_mut() {
            if *pos < neighbors[u].len() {
                let (v, bond) = neighbors[u][*pos];
                *pos += 1;
                if bond == in_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, bond, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridge[in_bond] = true;
                    }
                }
            }
        }
    }
    bridge
}
