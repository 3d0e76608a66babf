//! Synthetic Gaussian-mixture datasets with controllable label visibility.
//!
//! The default benchmark is 8 equal-weight Gaussians on a ring in 2D. True
//! labels exist for every sample but training only sees them where the
//! visibility flag is set; evaluation keeps the full truth.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub sigma: f64,
    pub seed: u64,
}

impl MixtureSpec {
    /// Equally spaced component means on a circle of `radius` in the first
    /// two coordinates (any further coordinates are 0).
    pub fn ring(components: usize, dim: usize, radius: f64, sigma: f64, seed: u64) -> Result<Self> {
        if components < 2 || dim < 2 {
            return Err(Error::Config(format!("ring needs >= 2 components and dim >= 2, got {components}, {dim}")));
        }
        let mut centers = Vec::with_capacity(components);
        for i in 0..components {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / components as f64;
            let mut c = vec![0.0; dim];
            c[0] = radius * angle.cos();
            c[1] = radius * angle.sin();
            centers.push(c);
        }
        let spec = MixtureSpec { dim, centers, sigma, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn components(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() || self.dim == 0 {
            return Err(Error::Config("mixture needs at least one center and dim >= 1".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::Config(format!("sigma {} must be nonnegative", self.sigma)));
        }
        for c in &self.centers {
            if c.len() != self.dim {
                return Err(Error::Config(format!("center of length {} vs dim {}", c.len(), self.dim)));
            }
        }
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                if self.centers[i] == self.centers[j] {
                    return Err(Error::Config(format!("centers {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: MixtureSpec,
    pub x: Tensor,
    pub y: Vec<usize>,
    pub has_label: Vec<bool>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// First `n` samples and the rest, as two datasets over the same spec.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        if n == 0 || n >= self.len() {
            return Err(Error::InvalidArg(format!("cannot split {} samples at {n}", self.len())));
        }
        let head = Dataset {
            spec: self.spec.clone(),
            x: self.x.take_rows(n)?,
            y: self.y[..n].to_vec(),
            has_label: self.has_label[..n].to_vec(),
        };
        let tail_rows: Vec<Vec<f64>> = (n..self.len()).map(|i| self.x.row(i).to_vec()).collect();
        let tail = Dataset {
            spec: self.spec.clone(),
            x: Tensor::from_rows(&tail_rows)?,
            y: self.y[n..].to_vec(),
            has_label: self.has_label[n..].to_vec(),
        };
        Ok((head, tail))
    }

    /// One sample per line: coordinates, true label, visibility flag.
    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.len() {
            for v in self.x.row(i) {
                write!(f, "{v:?}\t")?;
            }
            writeln!(f, "{}\t{}", self.y[i], u8::from(self.has_label[i]))?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load_tsv(path: &Path, spec: MixtureSpec) -> Result<Dataset> {
        spec.validate()?;
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut has_label = Vec::new();
        for (lineno, line) in f.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').filter(|s| !s.is_empty()).collect();
            if fields.len() != spec.dim + 2 {
                return Err(Error::InvalidArg(format!(
                    "line {}: {} fields, expected {}",
                    lineno + 1,
                    fields.len(),
                    spec.dim + 2
                )));
            }
            let coords: Vec<f64> = fields[..spec.dim]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidArg(format!("line {}: {e}", lineno + 1))))
                .collect::<Result<_>>()?;
            rows.push(coords);
            y.push(
                fields[spec.dim]
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidArg(format!("line {}: {e}", lineno + 1)))?,
            );
            has_label.push(fields[spec.dim + 1] == "1");
        }
        if rows.is_empty() {
            return Err(Error::InvalidArg("empty dataset file".into()));
        }
        Ok(Dataset { spec, x: Tensor::from_rows(&rows)?, y, has_label })
    }
}

/// Draws `n` samples, component chosen uniformly, sample = center + noise.
/// All labels start hidden; apply [`mask_labels`] to reveal a fraction.
pub fn make_mixture_dataset(spec: &MixtureSpec, n: usize) -> Result<Dataset> {
    spec.validate()?;
    if n < spec.components() {
        return Err(Error::InvalidArg(format!(
            "need at least {} samples for {} components, got {n}",
            spec.components(),
            spec.components()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = Tensor::zeros(vec![n, spec.dim]);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.gen_range(0..spec.components());
        y.push(c);
        for d in 0..spec.dim {
            let noise = if spec.sigma > 0.0 { spec.sigma * normal.sample(&mut rng) } else { 0.0 };
            x.data_mut()[i * spec.dim + d] = spec.centers[c][d] + noise;
        }
    }
    Ok(Dataset { spec: spec.clone(), x, y, has_label: vec![false; n] })
}

/// Reveals exactly round(rate*n) labels, chosen uniformly by `seed`.
pub fn mask_labels(dataset: &mut Dataset, rate: f64, seed: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("label rate {rate} outside [0,1]")));
    }
    let n = dataset.len();
    let k = (rate * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    dataset.has_label = vec![false; n];
    for &i in &idx[..k] {
        dataset.has_label[i] = true;
    }
    Ok(())
}

/// A training view of some rows of a dataset: coordinates, labels visible to
/// training (None when hidden), and the full truth for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub x: Tensor,
    pub visible: Vec<Option<usize>>,
    pub truth: Vec<usize>,
}

impl LabeledBatch {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.visible.iter().map(|v| v.is_some()).collect()
    }

    /// Visible label where present, `fill` otherwise (the flag decides
    /// whether the value is ever consumed).
    pub fn labels_or(&self, fill: usize) -> Vec<usize> {
        self.visible.iter().map(|v| v.unwrap_or(fill)).collect()
    }
}

/// Uniform sample of `batch_size` distinct rows.
pub fn sample_batch<R: Rng>(dataset: &Dataset, batch_size: usize, rng: &mut R) -> Result<LabeledBatch> {
    let n = dataset.len();
    if batch_size == 0 || batch_size > n {
        return Err(Error::InvalidArg(format!("batch size {batch_size} for dataset of {n}")));
    }
    // partial Fisher-Yates: first batch_size entries are the draw
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..batch_size {
        let j = i + rng.gen_range(0..n - i);
        idx.swap(i, j);
    }
    let rows: Vec<Vec<f64>> = idx[..batch_size].iter().map(|&i| dataset.x.row(i).to_vec()).collect();
    let visible = idx[..batch_size]
        .iter()
        .map(|&i| if dataset.has_label[i] { Some(dataset.y[i]) } else { None })
        .collect();
    let truth = idx[..batch_size].iter().map(|&i| dataset.y[i]).collect();
    Ok(LabeledBatch { x: Tensor::from_rows(&rows)?, visible, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring8(sigma: f64, seed: u64) -> MixtureSpec {
        MixtureSpec::ring(8, 2, 4.0, sigma, seed).unwrap()
    }

    #[test]
    fn ring_centers_on_circle() {
        let spec = ring8(0.2, 1);
        assert_eq!(spec.components(), 8);
        for c in &spec.centers {
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            assert!((r - 4.0).abs() < 1e-12);
        }
        spec.validate().unwrap();
    }

    #[test]
    fn zero_sigma_samples_sit_on_centers() {
        let spec = ring8(0.0, 2);
        let ds = make_mixture_dataset(&spec, 64).unwrap();
        for i in 0..ds.len() {
            assert_eq!(ds.x.row(i), spec.centers[ds.y[i]].as_slice());
        }
    }

    #[test]
    fn class_counts_concentrate() {
        let spec = ring8(0.2, 3);
        let ds = make_mixture_dataset(&spec, 8000).unwrap();
        let mut counts = [0usize; 8];
        for &c in &ds.y {
            counts[c] += 1;
        }
        for (c, &n) in counts.iter().enumerate() {
            assert!(
                (n as i64 - 1000).abs() <= 150,
                "class {c} count {n} outside 1000 +/- 150"
            );
        }
    }

    #[test]
    fn dataset_regeneration_is_bit_identical() {
        let spec = ring8(0.2, 17);
        let a = make_mixture_dataset(&spec, 500).unwrap();
        let b = make_mixture_dataset(&spec, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_rate_counts_exact() {
        let spec = ring8(0.2, 5);
        let mut ds = make_mixture_dataset(&spec, 1000).unwrap();
        mask_labels(&mut ds, 0.0, 7).unwrap();
        assert_eq!(ds.has_label.iter().filter(|&&f| f).count(), 0);
        mask_labels(&mut ds, 0.25, 7).unwrap();
        assert_eq!(ds.has_label.iter().filter(|&&f| f).count(), 250);
        mask_labels(&mut ds, 1.0, 7).unwrap();
        assert_eq!(ds.has_label.iter().filter(|&&f| f).count(), 1000);
    }

    #[test]
    fn full_batch_is_a_permutation() {
        let spec = ring8(0.2, 11);
        let ds = make_mixture_dataset(&spec, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = sample_batch(&ds, 40, &mut rng).unwrap();
        let mut seen: Vec<Vec<u64>> = (0..40).map(|i| batch.x.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        let mut expected: Vec<Vec<u64>> = (0..40).map(|i| ds.x.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        seen.sort();
        expected.sort();
        assert_eq!(seen, expected);
    }

    #[test]
    fn batches_reproducible_and_bounded() {
        let spec = ring8(0.2, 13);
        let ds = make_mixture_dataset(&spec, 100).unwrap();
        let a = sample_batch(&ds, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_batch(&ds, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(sample_batch(&ds, 101, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn batch_class_frequencies_match_the_dataset() {
        // uniform row sampling reproduces the dataset's own class proportions
        let spec = ring8(0.2, 19);
        let ds = make_mixture_dataset(&spec, 800).unwrap();
        let mut base = [0.0f64; 8];
        for &c in &ds.y {
            base[c] += 1.0 / ds.len() as f64;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0usize; 8];
        let batches = 10_000;
        for _ in 0..batches {
            let b = sample_batch(&ds, 4, &mut rng).unwrap();
            for &c in &b.truth {
                counts[c] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        for (c, &n) in counts.iter().enumerate() {
            let freq = n as f64 / total as f64;
            assert!(
                (freq - base[c]).abs() < 0.01,
                "class {c} frequency {freq} vs dataset share {}",
                base[c]
            );
        }
    }

    #[test]
    fn hidden_labels_absent_from_training_view() {
        let spec = ring8(0.2, 23);
        let mut ds = make_mixture_dataset(&spec, 50).unwrap();
        mask_labels(&mut ds, 0.5, 9).unwrap();
        let batch = sample_batch(&ds, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for i in 0..batch.len() {
            match batch.visible[i] {
                Some(y) => assert_eq!(y, batch.truth[i]),
                None => {}
            }
        }
        let visible_count = batch.visible.iter().filter(|v| v.is_some()).count();
        assert_eq!(visible_count, 25);
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        let spec = ring8(0.2, 29);
        let mut ds = make_mixture_dataset(&spec, 30).unwrap();
        mask_labels(&mut ds, 0.3, 1).unwrap();
        ds.save_tsv(&path).unwrap();
        let loaded = Dataset::load_tsv(&path, spec).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn split_preserves_rows() {
        let spec = ring8(0.2, 31);
        let ds = make_mixture_dataset(&spec, 100).unwrap();
        let (a, b) = ds.split_at(70).unwrap();
        assert_eq!(a.len(), 70);
        assert_eq!(b.len(), 30);
        assert_eq!(a.x.row(0), ds.x.row(0));
        assert_eq!(b.x.row(0), ds.x.row(70));
        assert!(ds.split_at(0).is_err());
        assert!(ds.split_at(100).is_err());
    }
}
