#![allow(dead_code)]

use std::collections::BTreeSet;

use cadec::{ConstraintSet, DurationBound, DurationBounds, FrameProbMatrix, TransitionTable};
use rand::Rng;

/// Rows of normalized uniform draws; continuous values make exact score
/// ties between distinct sequences vanishingly unlikely.
pub fn random_probs<R: Rng>(rng: &mut R, frames: usize, classes: usize) -> FrameProbMatrix {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total).collect()
        })
        .collect();
    FrameProbMatrix::from_rows(&rows).unwrap()
}

fn subset<R: Rng>(rng: &mut R, classes: usize, p: f64) -> BTreeSet<usize> {
    (0..classes).filter(|_| rng.random_bool(p)).collect()
}

pub fn random_table<R: Rng>(rng: &mut R, classes: usize, density: f64) -> TransitionTable {
    let mut entries = Vec::new();
    for a in 0..classes {
        let succ: Vec<usize> = (0..classes).filter(|&b| b != a && rng.random_bool(density)).collect();
        let weights: Vec<f64> = succ.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        entries.extend(succ.iter().zip(&weights).map(|(&b, w)| (a, b, w / total)));
    }
    TransitionTable::new(classes, entries).unwrap()
}

/// Duration bounds that often sit exactly on small fractions, so length
/// boundaries are exercised.
pub fn random_durations<R: Rng>(rng: &mut R, classes: usize) -> DurationBounds {
    const GRID: [f64; 7] = [0.0, 0.125, 0.2, 0.25, 1.0 / 3.0, 0.5, 0.75];
    let bounds = (0..classes)
        .map(|_| {
            if rng.random_bool(0.15) {
                return DurationBound::UNOBSERVED;
            }
            let d_min = if rng.random_bool(0.5) {
                GRID[rng.random_range(0..GRID.len())]
            } else {
                rng.random_range(0.0..0.6)
            };
            let d_max = if rng.random_bool(0.3) {
                1.0
            } else if rng.random_bool(0.5) {
                let above: Vec<f64> = GRID.iter().copied().filter(|&g| g >= d_min).collect();
                if above.is_empty() {
                    1.0
                } else {
                    above[rng.random_range(0..above.len())]
                }
            } else {
                rng.random_range(d_min..=1.0)
            };
            DurationBound {
                d_min,
                d_max,
                observed: true,
            }
        })
        .collect();
    DurationBounds::new(bounds).unwrap()
}

/// Random constraints; empty start or end sets and tight bounds make some
/// instances infeasible.
pub fn random_constraints<R: Rng>(rng: &mut R, classes: usize) -> ConstraintSet {
    let start = subset(rng, classes, 0.6);
    let end = subset(rng, classes, 0.6);
    let table = random_table(rng, classes, 0.5);
    let durations = random_durations(rng, classes);
    ConstraintSet::new(classes, start, end, table, durations).unwrap()
}

pub fn random_labels<R: Rng>(rng: &mut R, frames: usize, classes: usize) -> Vec<usize> {
    // runs of random length so sequences have realistic segments
    let mut out = Vec::with_capacity(frames);
    while out.len() < frames {
        let c = rng.random_range(0..classes);
        let len = rng.random_range(1..=frames.div_ceil(2)).min(frames - out.len());
        out.extend(std::iter::repeat_n(c, len));
    }
    out
}
