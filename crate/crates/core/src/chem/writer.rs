//! Depth-first SMILES emission. The output is deterministic for a given atom
//! order and re-parses to an isomorphic graph; it is not a canonical form
//! across atom orderings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{BondType, Chirality, MolecularGraph};

const ORGANIC: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];
const AROMATIC_ORGANIC: [&str; 6] = ["B", "C", "N", "O", "P", "S"];

pub fn to_smiles(g: &MolecularGraph) -> String {
    let n = g.num_atoms();
    let mut visited = vec![false; n];
    let mut order = vec![usize::MAX; n];
    let mut tree_parent_bond = vec![usize::MAX; n];
    // First pass: DFS numbering to tell tree edges from ring-closure edges.
    let mut counter = 0;
    for root in 0..n {
        if visited[root] {
            continue;
        }
        let mut stack = vec![(root, usize::MAX)];
        while let Some((u, via)) = stack.pop() {
            if visited[u] {
                continue;
            }
            visited[u] = true;
            order[u] = counter;
            counter += 1;
            tree_parent_bond[u] = via;
            for &(v, b) in g.neighbors(u).iter().rev() {
                if !visited[v] {
                    stack.push((v, b));
                }
            }
        }
    }
    let is_tree = |b: usize| {
        let bond = &g.bonds()[b];
        tree_parent_bond[bond.a] == b || tree_parent_bond[bond.b] == b
    };

    // Ring labels per atom: (label, bond) in the order they are written.
    let mut ring_labels: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closures: Vec<usize> = (0..g.bonds().len()).filter(|&b| !is_tree(b)).collect();
    closures.sort_by_key(|&b| {
        let bond = &g.bonds()[b];
        (order[bond.a].min(order[bond.b]), order[bond.a].max(order[bond.b]))
    });
    // Labels are reused once closed.
    let mut open_until: Vec<usize> = Vec::new();
    for &b in &closures {
        let bond = &g.bonds()[b];
        let (first, second) = if order[bond.a] < order[bond.b] {
            (bond.a, bond.b)
        } else {
            (bond.b, bond.a)
        };
        let start = order[first];
        let label = match open_until.iter().position(|&end| end < start) {
            Some(l) => l,
            None => {
                open_until.push(0);
                open_until.len() - 1
            }
        };
        open_until[label] = order[second];
        ring_labels[first].push((label + 1, b));
        ring_labels[second].push((label + 1, b));
    }

    let mut out = String::new();
    let mut emitted = vec![false; n];
    for root in 0..n {
        if emitted[root] {
            continue;
        }
        if !out.is_empty() {
            out.push('.');
        }
        emit(g, root, &tree_parent_bond, &ring_labels, &mut emitted, &mut out);
    }
    out
}

fn emit(
    g: &MolecularGraph,
    atom: usize,
    tree_parent_bond: &[usize],
    ring_labels: &[Vec<(usize, usize)>],
    emitted: &mut [bool],
    out: &mut String,
) {
    emitted[atom] = true;
    write_atom(g, atom, out);
    for &(label, b) in &ring_labels[atom] {
        let bond = &g.bonds()[b];
        out.push_str(bond_symbol(g, bond.a, bond.b, bond.kind));
        if label < 10 {
            let _ = write!(out, "{label}");
        } else {
            let _ = write!(out, "%{label:02}");
        }
    }
    let children: Vec<(usize, usize)> = g
        .neighbors(atom)
        .iter()
        .copied()
        .filter(|&(v, b)| tree_parent_bond[v] == b && !emitted[v])
        .collect();
    for (k, &(v, b)) in children.iter().enumerate() {
        let last = k + 1 == children.len();
        if !last {
            out.push('(');
        }
        let bond = &g.bonds()[b];
        out.push_str(bond_symbol(g, bond.a, bond.b, bond.kind));
        emit(g, v, tree_parent_bond, ring_labels, emitted, out);
        if !last {
            out.push(')');
        }
    }
}

fn bond_symbol(g: &MolecularGraph, a: usize, b: usize, kind: BondType) -> &'static str {
    let both_aromatic = g.atoms()[a].aromatic && g.atoms()[b].aromatic;
    match kind {
        BondType::Single if both_aromatic => "-",
        BondType::Single => "",
        BondType::Double => "=",
        BondType::Triple => "#",
        BondType::Aromatic if both_aromatic => "",
        BondType::Aromatic => ":",
    }
}

fn write_atom(g: &MolecularGraph, i: usize, out: &mut String) {
    let a = &g.atoms()[i];
    let organic = if a.aromatic {
        AROMATIC_ORGANIC.contains(&a.element.as_str())
    } else {
        ORGANIC.contains(&a.element.as_str())
    };
    let symbol = if a.aromatic {
        a.element.to_ascii_lowercase()
    } else {
        a.element.clone()
    };
    if organic && a.charge == 0 && a.chirality == Chirality::Unspecified && a.hydrogens.is_none() {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    out.push_str(&symbol);
    match a.chirality {
        Chirality::Unspecified => {}
        Chirality::AntiClockwise => out.push('@'),
        Chirality::Clockwise => out.push_str("@@"),
        Chirality::Other => out.push_str("@TH1"),
    }
    match a.hydrogens {
        None | Some(0) => {}
        Some(1) => out.push('H'),
        Some(h) => {
            let _ = write!(out, "H{h}");
        }
    }
    match a.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}
