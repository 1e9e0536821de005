use super::{Atom, Bond, Chirality};

/// 23 atom types + 6 degrees + 5 formal charges + 4 chirality classes.
pub const ATOM_FEATURE_DIM: usize = 38;
/// 4 bond types + ring bit + 6 cis/trans classes.
pub const BOND_FEATURE_DIM: usize = 11;

/// Elements with a dedicated atom-type slot; everything else is "unknown".
pub const FREQUENT_ELEMENTS: [&str; 22] = [
    "C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se", "Na", "K", "Li", "Ca", "Mg", "Zn", "Fe", "Mn",
    "Cu", "Al",
];

const TYPE_SLOTS: usize = 23;
const DEGREE_SLOTS: usize = 6;
/// Formal-charge slot order.
const CHARGES: [i8; 5] = [-1, -2, 1, 2, 0];

/// One-hot atom encoding; each block has exactly one bit set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AtomFeature([u8; ATOM_FEATURE_DIM]);

impl AtomFeature {
    pub fn of(atom: &Atom, degree: usize) -> Self {
        let mut bits = [0u8; ATOM_FEATURE_DIM];
        let ty = FREQUENT_ELEMENTS
            .iter()
            .position(|&e| e == atom.element)
            .unwrap_or(TYPE_SLOTS - 1);
        bits[ty] = 1;
        bits[TYPE_SLOTS + degree.min(DEGREE_SLOTS - 1)] = 1;
        let charge = atom.charge.clamp(-2, 2);
        let c = CHARGES.iter().position(|&q| q == charge).expect("clamped charge has a slot");
        bits[TYPE_SLOTS + DEGREE_SLOTS + c] = 1;
        let chi = match atom.chirality {
            Chirality::Unspecified => 0,
            Chirality::AntiClockwise => 1,
            Chirality::Clockwise => 2,
            Chirality::Other => 3,
        };
        bits[TYPE_SLOTS + DEGREE_SLOTS + CHARGES.len() + chi] = 1;
        AtomFeature(bits)
    }

    pub fn bits(&self) -> &[u8; ATOM_FEATURE_DIM] {
        &self.0
    }

    /// `(start, len)` of the four one-hot blocks.
    pub fn blocks() -> [(usize, usize); 4] {
        [(0, 23), (23, 6), (29, 5), (34, 4)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BondFeature([u8; BOND_FEATURE_DIM]);

impl BondFeature {
    pub fn of(bond: &Bond) -> Self {
        let mut bits = [0u8; BOND_FEATURE_DIM];
        bits[bond.kind.index()] = 1;
        bits[4] = bond.in_ring as u8;
        bits[5 + (bond.stereo as usize).min(5)] = 1;
        BondFeature(bits)
    }

    pub fn bits(&self) -> &[u8; BOND_FEATURE_DIM] {
        &self.0
    }
}
