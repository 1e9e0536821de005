//! Independent reference implementations for the metric and fingerprint
//! tests. Shared with the acceptance suite in the `hint` crate.

#![allow(dead_code)]

use hint_core::chem::MolecularGraph;

/// `(Σ_{pos,neg} [s⁺ > s⁻] + ½ [s⁺ = s⁻]) / (P·N)` by visiting every pair.
pub fn roc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1;
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Average precision by re-counting the confusion matrix at every distinct
/// threshold, highest first: `Σ_k (R_k − R_{k−1}) · P_k`.
pub fn pr_by_thresholds(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let (mut area, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l).count() as f64;
        let predicted = scores.iter().filter(|s| **s >= t).count() as f64;
        let recall = tp / pos;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    area
}

fn fnv(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x100000001b3))
}

/// `(bond type index, neighbor)` pairs found by scanning the bond list.
fn neighborhood(g: &MolecularGraph, a: usize) -> Vec<(u8, usize)> {
    g.bonds()
        .iter()
        .filter_map(|b| {
            if b.a == a {
                Some((b.kind.index() as u8, b.b))
            } else if b.b == a {
                Some((b.kind.index() as u8, b.a))
            } else {
                None
            }
        })
        .collect()
}

/// Invariant of atom `a` after `round` refinements, recomputed from scratch
/// by recursion over the neighborhood tree.
fn invariant(g: &MolecularGraph, a: usize, round: usize) -> u64 {
    if round == 0 {
        return fnv(g.atom_feature(a).bits());
    }
    let nbrs = neighborhood(g, a);
    if nbrs.is_empty() {
        return invariant(g, a, round - 1);
    }
    let mut pairs: Vec<(u8, u64)> = nbrs.iter().map(|&(bt, n)| (bt, invariant(g, n, round - 1))).collect();
    pairs.sort();
    let mut bytes = vec![round as u8];
    bytes.extend(invariant(g, a, round - 1).to_le_bytes());
    for (bt, h) in pairs {
        bytes.push(bt);
        bytes.extend(h.to_le_bytes());
    }
    fnv(&bytes)
}

/// Set bit positions of the radius-`radius` fingerprint.
pub fn morgan_bits(g: &MolecularGraph, radius: usize, nbits: usize) -> Vec<bool> {
    let mut bits = vec![false; nbits];
    for a in 0..g.num_atoms() {
        bits[(invariant(g, a, 0) % nbits as u64) as usize] = true;
        if neighborhood(g, a).is_empty() {
            continue;
        }
        for r in 1..=radius {
            bits[(invariant(g, a, r) % nbits as u64) as usize] = true;
        }
    }
    bits
}

/// Twenty small molecules: name and SMILES.
pub const MOLECULES: [(&str, &str); 20] = [
    ("methane", "C"),
    ("ethanol", "CCO"),
    ("acetic acid", "CC(=O)O"),
    ("cyclopropane", "C1CC1"),
    ("benzene", "c1ccccc1"),
    ("toluene", "Cc1ccccc1"),
    ("phenol", "Oc1ccccc1"),
    ("pyridine", "c1ccncc1"),
    ("chlorobenzene", "Clc1ccccc1"),
    ("acetone", "CC(=O)C"),
    ("acetonitrile", "CC#N"),
    ("glycine", "NCC(=O)O"),
    ("urea", "NC(=O)N"),
    ("dichloromethane", "ClCCl"),
    ("aspirin", "CC(=O)Oc1ccccc1C(=O)O"),
    ("paracetamol", "CC(=O)Nc1ccc(O)cc1"),
    ("ibuprofen", "CC(C)Cc1ccc(cc1)C(C)C(=O)O"),
    ("caffeine", "Cn1cnc2c1c(=O)n(C)c(=O)n2C"),
    ("L-alanine", "C[C@@H](N)C(=O)O"),
    ("sodium acetate", "CC(=O)[O-].[Na+]"),
];
