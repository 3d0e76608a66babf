//! Maximum-weight one-to-one assignment between two label sets.
//!
//! Small instances go through exhaustive search; larger ones through the
//! potentials form of the augmenting-path (Kuhn-Munkres) algorithm. Both are
//! exact; the pair cross-checks each other in tests.

use crate::error::{Error, Result};

const EXHAUSTIVE_LIMIT: usize = 8;

/// Best total weight over all one-to-one matchings of rows to columns
/// (leaving the excess side partly unmatched when dimensions differ).
pub fn max_weight_matching(w: &[Vec<f64>]) -> Result<f64> {
    if w.is_empty() || w[0].is_empty() {
        return Err(Error::InvalidArg("assignment needs a nonempty matrix".into()));
    }
    let cols = w[0].len();
    if w.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArg("assignment matrix rows have unequal lengths".into()));
    }
    if w.len().min(cols) <= EXHAUSTIVE_LIMIT {
        Ok(exhaustive(w))
    } else {
        Ok(hungarian(w))
    }
}

fn exhaustive(w: &[Vec<f64>]) -> f64 {
    // recurse over the smaller side so the branching factor stays sane
    let (rows, cols) = (w.len(), w[0].len());
    if rows <= cols {
        let mut used = vec![false; cols];
        best_row(w, 0, &mut used)
    } else {
        let flipped: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| w[i][j]).collect()).collect();
        let mut used = vec![false; rows];
        best_row(&flipped, 0, &mut used)
    }
}

fn best_row(w: &[Vec<f64>], row: usize, used: &mut [bool]) -> f64 {
    if row == w.len() {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        best = best.max(w[row][j] + best_row(w, row + 1, used));
        used[j] = false;
    }
    best
}

/// Potentials algorithm on a square min-cost matrix; rectangular inputs are
/// padded with zero weight, which leaves the optimum unchanged.
fn hungarian(w: &[Vec<f64>]) -> f64 {
    let n = w.len().max(w[0].len());
    // min-cost form: cost = -weight, padding 0
    let cost = |i: usize, j: usize| -> f64 {
        if i < w.len() && j < w[0].len() {
            -w[i][j]
        } else {
            0.0
        }
    };
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 {
            total += -cost(i - 1, j - 1);
        }
    }
    total
}

/// Fraction of samples explained by the best one-to-one mapping of predicted
/// labels to true classes, via the contingency matrix.
pub fn alignment_accuracy(
    predicted: &[usize],
    truth: &[usize],
    predicted_classes: usize,
    true_classes: usize,
) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArg(format!(
            "{} predictions vs {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArg("alignment needs at least one sample".into()));
    }
    let mut contingency = vec![vec![0.0; true_classes]; predicted_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= predicted_classes {
            return Err(Error::LabelOutOfRange { label: p, classes: predicted_classes });
        }
        if t >= true_classes {
            return Err(Error::LabelOutOfRange { label: t, classes: true_classes });
        }
        contingency[p][t] += 1.0;
    }
    Ok(max_weight_matching(&contingency)? / predicted.len() as f64)
}
