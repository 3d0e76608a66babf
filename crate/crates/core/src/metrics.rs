//! Evaluation metrics: closed-form Fréchet distance between Gaussian moment
//! summaries, dominant-class purity curves over reliability thresholds,
//! per-threshold class distributions, and mode coverage.
//!
//! The Fréchet distance runs on raw sample coordinates rather than learned
//! features; at this scale there is no pretrained feature extractor, and the
//! Gaussian-moment formula is unchanged.

use crate::assignment;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Eigenvalues this far below zero still count as rounding noise on a PSD
/// matrix; anything lower is a genuine domain error.
const PSD_TOLERANCE: f64 = 1e-10;

/// Mean and covariance of a sample cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl GaussianSummary {
    /// `cov` must be dim×dim and symmetric within 1e-12.
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::InvalidArg("summary dimension must be positive".into()));
        }
        if cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("gaussian_summary", format!("covariance must be {dim}x{dim}")));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 {
                    return Err(Error::domain(
                        "gaussian_summary",
                        format!("covariance asymmetric at ({i},{j})"),
                    ));
                }
            }
        }
        Ok(Self { mean, cov })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased sample covariance of `samples` ([n×dim], n ≥ 2).
pub fn summarize(samples: &Tensor) -> Result<GaussianSummary> {
    let n = samples.rows();
    let dim = samples.cols();
    if n < 2 {
        return Err(Error::InvalidArg(format!("summary needs at least 2 samples, got {n}")));
    }
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += samples.at(i, j);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for i in 0..n {
        for a in 0..dim {
            let da = samples.at(i, a) - mean[a];
            for b in a..dim {
                cov[a][b] += da * (samples.at(i, b) - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..dim {
        for b in a..dim {
            cov[a][b] /= denom;
            cov[b][a] = cov[a][b];
        }
    }
    GaussianSummary::new(mean, cov)
}

/// ‖μ_a−μ_b‖² + Tr(Σ_a+Σ_b−2(Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2}).
///
/// Matrix square roots go through a symmetric eigendecomposition; eigenvalues
/// in [-1e-10, 0) are clamped to 0, anything lower is rejected as non-PSD.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(
            "frechet_distance",
            format!("dimension mismatch: {} vs {}", a.dim(), b.dim()),
        ));
    }
    let dim = a.dim();
    let mean_gap: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let root_a = sqrt_psd(&a.cov)?;
    let inner = symmetrize(&mat_mul(&mat_mul(&root_a, &b.cov), &root_a));
    let cross = sqrt_psd(&inner)?;
    let mut trace_term = 0.0;
    for i in 0..dim {
        trace_term += a.cov[i][i] + b.cov[i][i] - 2.0 * cross[i][i];
    }
    // rounding can leave a tiny negative residue on coinciding summaries
    Ok((mean_gap + trace_term).max(0.0))
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let v = a[i][k];
            if v == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += v * b[k][j];
            }
        }
    }
    out
}

fn symmetrize(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    out
}

/// Symmetric square root of a PSD matrix via eigendecomposition.
fn sqrt_psd(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (mut eigvals, eigvecs) = jacobi_eigen(m);
    for v in &mut eigvals {
        if *v < -PSD_TOLERANCE {
            return Err(Error::domain("frechet_distance", format!("eigenvalue {v} below PSD tolerance")));
        }
        *v = v.max(0.0).sqrt();
    }
    // Q diag(sqrt λ) Qᵀ
    let n = m.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for (k, ev) in eigvals.iter().enumerate() {
                s += eigvecs[i][k] * ev * eigvecs[j][k];
            }
            out[i][j] = s;
            out[j][i] = s;
        }
    }
    Ok(out)
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns (eigenvalues,
/// eigenvectors as columns). Convergence is quadratic; 100 sweeps is far more
/// than the handful these small matrices need.
fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q].abs();
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let eigvals = (0..n).map(|i| a[i][i]).collect();
    (eigvals, v)
}

/// Purity statistics over a reliability-threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    /// Strictly increasing grid in [0,1].
    pub thresholds: Vec<f64>,
    /// Dominant-class ratio per threshold; `None` where nothing was selected.
    pub values: Vec<Option<f64>>,
    /// Selected-sample count per threshold; non-increasing.
    pub counts: Vec<usize>,
}

impl ThresholdCurve {
    /// CSV rows `threshold,value,count` with `NA` marking empty selections.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,dominant_class_ratio,selected\n");
        for ((th, value), count) in self.thresholds.iter().zip(&self.values).zip(&self.counts) {
            match value {
                Some(v) => out.push_str(&format!("{th},{v},{count}\n")),
                None => out.push_str(&format!("{th},NA,{count}\n")),
            }
        }
        out
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidArg("threshold grid is empty".into()));
    }
    for pair in thresholds.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidArg("thresholds must be strictly increasing".into()));
        }
    }
    if thresholds[0] < 0.0 || thresholds[thresholds.len() - 1] > 1.0 {
        return Err(Error::InvalidArg("thresholds must lie in [0,1]".into()));
    }
    Ok(())
}

/// For each threshold: keep samples with reliability ≥ threshold, group them
/// by artificial label, take each group's most-frequent-true-class fraction,
/// and average unweighted over nonempty groups. Group sizes are recoverable
/// from `counts` for anyone wanting a weighted average instead.
pub fn dominant_class_ratio_curve(
    true_labels: &[usize],
    artificial_labels: &[usize],
    reliabilities: &[f64],
    thresholds: &[f64],
) -> Result<ThresholdCurve> {
    let n = true_labels.len();
    if artificial_labels.len() != n || reliabilities.len() != n {
        return Err(Error::InvalidArg(format!(
            "label/reliability lengths differ: {n}, {}, {}",
            artificial_labels.len(),
            reliabilities.len()
        )));
    }
    check_thresholds(thresholds)?;
    let groups = artificial_labels.iter().max().map_or(0, |&m| m + 1);
    let classes = true_labels.iter().max().map_or(0, |&m| m + 1);
    let mut values = Vec::with_capacity(thresholds.len());
    let mut counts = Vec::with_capacity(thresholds.len());
    for &th in thresholds {
        let mut table = vec![vec![0usize; classes]; groups];
        let mut selected = 0usize;
        for i in 0..n {
            if reliabilities[i] >= th {
                table[artificial_labels[i]][true_labels[i]] += 1;
                selected += 1;
            }
        }
        counts.push(selected);
        let mut ratio_sum = 0.0;
        let mut nonempty = 0usize;
        for row in &table {
            let total: usize = row.iter().sum();
            if total == 0 {
                continue;
            }
            let top = *row.iter().max().expect("row has entries");
            ratio_sum += top as f64 / total as f64;
            nonempty += 1;
        }
        values.push(if nonempty == 0 { None } else { Some(ratio_sum / nonempty as f64) });
    }
    Ok(ThresholdCurve { thresholds: thresholds.to_vec(), values, counts })
}

/// Normalized true-class histogram of the selected samples at each threshold.
/// Callers pass only the samples carrying one chosen artificial label.
/// `None` marks thresholds where nothing was selected.
pub fn class_distribution_vs_threshold(
    true_labels: &[usize],
    reliabilities: &[f64],
    thresholds: &[f64],
    true_class_count: usize,
) -> Result<Vec<Option<Vec<f64>>>> {
    if true_labels.len() != reliabilities.len() {
        return Err(Error::InvalidArg(format!(
            "label/reliability lengths differ: {} vs {}",
            true_labels.len(),
            reliabilities.len()
        )));
    }
    check_thresholds(thresholds)?;
    for &t in true_labels {
        if t >= true_class_count {
            return Err(Error::LabelOutOfRange { label: t, classes: true_class_count });
        }
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    for &th in thresholds {
        let mut hist = vec![0.0; true_class_count];
        let mut total = 0.0;
        for (&t, &p) in true_labels.iter().zip(reliabilities) {
            if p >= th {
                hist[t] += 1.0;
                total += 1.0;
            }
        }
        if total == 0.0 {
            rows.push(None);
        } else {
            for h in &mut hist {
                *h /= total;
            }
            rows.push(Some(hist));
        }
    }
    Ok(rows)
}

/// Number of centers with at least one fake within `radius`.
pub fn mode_coverage(fakes: &Tensor, centers: &[Vec<f64>], radius: f64) -> Result<usize> {
    if radius <= 0.0 {
        return Err(Error::InvalidArg(format!("coverage radius must be positive, got {radius}")));
    }
    let dim = fakes.cols();
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::shape("mode_coverage", format!("centers must have dimension {dim}")));
    }
    let r2 = radius * radius;
    let mut covered = 0usize;
    for center in centers {
        let hit = (0..fakes.rows()).any(|i| {
            let d2: f64 =
                center.iter().enumerate().map(|(j, c)| (fakes.at(i, j) - c) * (fakes.at(i, j) - c)).sum();
            d2 <= r2
        });
        if hit {
            covered += 1;
        }
    }
    Ok(covered)
}

/// Re-export so metric consumers get purity and alignment from one place.
pub use assignment::alignment_accuracy;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_mixture_dataset, MixtureSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn summary(mean: &[f64], cov: &[&[f64]]) -> GaussianSummary {
        GaussianSummary::new(mean.to_vec(), cov.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn identical_summaries_have_zero_distance() {
        let s = summary(&[0.3, -1.2], &[&[1.0, 0.2], &[0.2, 0.7]]);
        assert!(frechet_distance(&s, &s).unwrap() < 1e-9);
    }

    #[test]
    fn unit_mean_gap_in_one_dimension() {
        let a = summary(&[0.0], &[&[1.0]]);
        let b = summary(&[1.0], &[&[1.0]]);
        assert!((frechet_distance(&a, &b).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isotropic_scale_gap_in_two_dimensions() {
        let a = summary(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = summary(&[0.0, 0.0], &[&[4.0, 0.0], &[0.0, 4.0]]);
        assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn distance_is_symmetric_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut mk = || {
                let dim = 3;
                let mean: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a: Vec<Vec<f64>> =
                    (0..dim).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                // A·Aᵀ is PSD by construction
                let mut cov = vec![vec![0.0; dim]; dim];
                for i in 0..dim {
                    for j in 0..dim {
                        for k in 0..dim {
                            cov[i][j] += a[i][k] * a[j][k];
                        }
                    }
                }
                GaussianSummary::new(mean, cov).unwrap()
            };
            let x = mk();
            let y = mk();
            let fwd = frechet_distance(&x, &y).unwrap();
            let back = frechet_distance(&y, &x).unwrap();
            assert!((fwd - back).abs() < 1e-9);
            assert!(fwd >= 0.0);
            assert!(frechet_distance(&x, &x).unwrap() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_and_non_psd_are_rejected() {
        let a = summary(&[0.0], &[&[1.0]]);
        let b = summary(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(frechet_distance(&a, &b).is_err());
        let bad = summary(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(frechet_distance(&bad, &bad).is_err());
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let r = GaussianSummary::new(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.2, 1.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 4;
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = rng.gen_range(-3.0..3.0);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let (vals, vecs) = jacobi_eigen(&m);
            for i in 0..n {
                for j in 0..n {
                    let mut rebuilt = 0.0;
                    let mut ortho = 0.0;
                    for k in 0..n {
                        rebuilt += vecs[i][k] * vals[k] * vecs[j][k];
                        ortho += vecs[k][i] * vecs[k][j];
                    }
                    assert!((rebuilt - m[i][j]).abs() < 1e-9, "reconstruction failed at ({i},{j})");
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ortho - want).abs() < 1e-9, "columns not orthonormal at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn sqrt_squares_back_to_input() {
        let m = vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.3], vec![0.0, 0.3, 0.8]];
        let s = sqrt_psd(&m).unwrap();
        let sq = mat_mul(&s, &s);
        for i in 0..3 {
            for j in 0..3 {
                assert!((sq[i][j] - m[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_point_summary_matches_hand_formula() {
        let x = Tensor::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let s = summarize(&x).unwrap();
        assert_eq!(s.mean(), &[1.0, 0.0]);
        assert_eq!(s.cov(), &[vec![2.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn summary_is_a_pure_function_of_the_samples() {
        let x = Tensor::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25], vec![-3.0, 4.0]]).unwrap();
        assert_eq!(summarize(&x).unwrap(), summarize(&x.clone()).unwrap());
        assert!(summarize(&Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap()).is_err());
    }

    #[test]
    fn large_sample_summary_approaches_the_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        // x = L·z + mu with L = [[1,0],[0.3,l22]] gives cov [[1,0.3],[0.3,0.5]]
        let l22 = (0.5f64 - 0.09).sqrt();
        let mut rows = Vec::new();
        for _ in 0..20000 {
            let z0: f64 = rng.sample(rand_distr::StandardNormal);
            let z1: f64 = rng.sample(rand_distr::StandardNormal);
            rows.push(vec![1.0 + z0, 2.0 + 0.3 * z0 + l22 * z1]);
        }
        let s = summarize(&Tensor::from_rows(&rows).unwrap()).unwrap();
        assert!((s.mean()[0] - 1.0).abs() < 0.05);
        assert!((s.mean()[1] - 2.0).abs() < 0.05);
        assert!((s.cov()[0][0] - 1.0).abs() < 0.05);
        assert!((s.cov()[0][1] - 0.3).abs() < 0.05);
        assert!((s.cov()[1][1] - 0.5).abs() < 0.05);
    }

    #[test]
    fn perfect_labels_give_unit_ratio_everywhere() {
        let truth = [0, 1, 2, 0, 1, 2, 1, 0];
        let rel = [0.99, 0.5, 0.7, 0.96, 0.99, 0.2, 0.8, 0.97];
        let curve =
            dominant_class_ratio_curve(&truth, &truth, &rel, &[0.0, 0.5, 0.95]).unwrap();
        for v in &curve.values {
            assert_eq!(*v, Some(1.0));
        }
    }

    #[test]
    fn independent_labels_give_half_ratio_with_two_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 20000;
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let art: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let rel = vec![0.5; n];
        let curve = dominant_class_ratio_curve(&truth, &art, &rel, &[0.0]).unwrap();
        let v = curve.values[0].unwrap();
        assert!((v - 0.5).abs() < 0.03, "expected ≈0.5, got {v}");
    }

    #[test]
    fn hand_counted_six_sample_ratio() {
        // group 0 holds true classes [0,0,1] (2/3 pure), group 1 holds [1,1,1]
        let truth = [0, 0, 1, 1, 1, 1];
        let art = [0, 0, 0, 1, 1, 1];
        let rel = [0.9; 6];
        let curve = dominant_class_ratio_curve(&truth, &art, &rel, &[0.0]).unwrap();
        assert!((curve.values[0].unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(curve.counts[0], 6);
    }

    #[test]
    fn counts_shrink_and_empty_selection_is_undefined() {
        let truth = [0, 1, 0, 1];
        let art = [0, 1, 1, 0];
        let rel = [0.1, 0.6, 0.8, 0.3];
        let curve =
            dominant_class_ratio_curve(&truth, &art, &rel, &[0.0, 0.5, 0.7, 0.95]).unwrap();
        assert_eq!(curve.counts, vec![4, 2, 1, 0]);
        for pair in curve.counts.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        assert_eq!(curve.values[3], None);
        assert_eq!(curve.values[2], Some(1.0));
        let csv = curve.to_csv();
        assert!(csv.lines().last().unwrap().contains("NA"));
    }

    #[test]
    fn threshold_grid_must_increase_within_unit_interval() {
        let r = dominant_class_ratio_curve(&[0], &[0], &[0.5], &[0.5, 0.5]);
        assert!(r.is_err());
        let r = dominant_class_ratio_curve(&[0], &[0], &[0.5], &[0.5, 1.5]);
        assert!(r.is_err());
        let r = dominant_class_ratio_curve(&[0, 1], &[0], &[0.5], &[0.5]);
        assert!(r.is_err());
    }

    #[test]
    fn single_class_distribution_is_a_point_mass() {
        let rows =
            class_distribution_vs_threshold(&[2, 2, 2, 2], &[0.3, 0.6, 0.9, 0.99], &[0.0, 0.5], 4)
                .unwrap();
        for row in rows {
            assert_eq!(row.unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn class_distribution_rows_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let truth: Vec<usize> = (0..200).map(|_| rng.gen_range(0..5)).collect();
        let rel: Vec<f64> = (0..200).map(|_| rng.gen()).collect();
        let rows =
            class_distribution_vs_threshold(&truth, &rel, &[0.0, 0.25, 0.5, 0.75, 0.999], 5).unwrap();
        for row in rows.into_iter().flatten() {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_share_grows_when_purity_rises_with_reliability() {
        // low-reliability tail is mixed, high-reliability head is pure class 1
        let truth = [0, 1, 0, 1, 1, 1];
        let rel = [0.2, 0.3, 0.4, 0.9, 0.92, 0.95];
        let rows = class_distribution_vs_threshold(&truth, &rel, &[0.0, 0.85], 2).unwrap();
        let low = rows[0].as_ref().unwrap()[1];
        let high = rows[1].as_ref().unwrap()[1];
        assert!(high >= low);
        assert_eq!(high, 1.0);
    }

    #[test]
    fn one_fake_per_center_covers_all_modes() {
        let spec = MixtureSpec::ring(8, 2, 4.0, 0.2, 1).unwrap();
        let fakes = Tensor::from_rows(&spec.centers).unwrap();
        assert_eq!(mode_coverage(&fakes, &spec.centers, 0.6).unwrap(), 8);
    }

    #[test]
    fn collapsed_fakes_cover_one_mode() {
        let spec = MixtureSpec::ring(8, 2, 4.0, 0.2, 1).unwrap();
        let fakes = Tensor::from_rows(&vec![spec.centers[3].clone(); 50]).unwrap();
        assert_eq!(mode_coverage(&fakes, &spec.centers, 0.6).unwrap(), 1);
    }

    #[test]
    fn real_samples_cover_every_mode_at_three_sigma() {
        let spec = MixtureSpec::ring(8, 2, 4.0, 0.2, 77).unwrap();
        let data = make_mixture_dataset(&spec, 2000).unwrap();
        assert_eq!(mode_coverage(&data.x, &spec.centers, 0.6).unwrap(), 8);
    }

    #[test]
    fn coverage_rejects_bad_radius_and_dimensions() {
        let fakes = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(mode_coverage(&fakes, &[vec![0.0, 0.0]], 0.0).is_err());
        assert!(mode_coverage(&fakes, &[vec![0.0]], 1.0).is_err());
    }
}
