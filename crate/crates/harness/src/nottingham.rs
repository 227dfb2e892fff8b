//! Loader for the 240-month Nottingham Castle temperature series.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reupload_core::training::Dataset;

use crate::error::{HarnessError, HarnessResult};
use crate::seed::{derive_seed, experiment_tag};

pub const SERIES_LEN: usize = 240;
pub const TRAIN_LEN: usize = 200;

/// The series on `x_i = 2πi/240` with values mapped affinely onto `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealWorldDataset {
    pub raw: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    min: f64,
    max: f64,
}

impl RealWorldDataset {
    /// Builds the dataset from raw values; the split is the first 200 entries
    /// of a shuffle seeded from `split_seed`.
    pub fn from_values(raw: Vec<f64>, split_seed: u64) -> Result<Self, String> {
        if raw.len() != SERIES_LEN {
            return Err(format!("expected {SERIES_LEN} values, found {}", raw.len()));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(format!("value {i} is not finite"));
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err("series is constant; scaling is not invertible".into());
        }
        let y = raw.iter().map(|&v| 2.0 * (v - min) / (max - min) - 1.0).collect();
        let x = (0..SERIES_LEN).map(|i| 2.0 * PI * i as f64 / SERIES_LEN as f64).collect();
        let mut order: Vec<usize> = (0..SERIES_LEN).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(split_seed, experiment_tag("nottingham-split"), 0, 0));
        order.shuffle(&mut rng);
        let test_idx = order.split_off(TRAIN_LEN);
        Ok(Self {
            raw,
            x,
            y,
            train_idx: order,
            test_idx,
            min,
            max,
        })
    }

    /// Maps a scaled value back to the original units.
    pub fn unscale(&self, y: f64) -> f64 {
        self.min + (y + 1.0) * (self.max - self.min) / 2.0
    }

    pub fn to_dataset(&self) -> Dataset {
        let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Dataset::new(
            pick(&self.train_idx, &self.x),
            pick(&self.train_idx, &self.y),
            pick(&self.test_idx, &self.x),
            pick(&self.test_idx, &self.y),
        )
        .expect("split sizes are consistent")
    }
}

/// Reads a single numeric column (first field of each row); a non-numeric
/// first row is treated as a header.
pub fn load_nottingham(path: &Path, split_seed: u64) -> HarnessResult<RealWorldDataset> {
    let data_err = |message: String| HarnessError::Data {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::with_capacity(SERIES_LEN);
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let field = rec.get(0).unwrap_or("");
        if field.is_empty() && rec.len() <= 1 {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if row == 0 => {}
            Err(_) => return Err(data_err(format!("row {} is not numeric: {field:?}", row + 1))),
        }
    }
    RealWorldDataset::from_values(values, split_seed).map_err(data_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<f64> {
        (0..SERIES_LEN)
            .map(|i| 49.0 + 12.0 * (2.0 * PI * i as f64 / 12.0).sin() + 0.01 * i as f64)
            .collect()
    }

    #[test]
    fn split_and_scaling() {
        let d = RealWorldDataset::from_values(series(), 0).unwrap();
        assert_eq!((d.train_idx.len(), d.test_idx.len()), (200, 40));
        let mut all: Vec<usize> = d.train_idx.iter().chain(&d.test_idx).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..SERIES_LEN).collect::<Vec<_>>());
        let lo = d.y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (-1.0, 1.0));
        for (r, y) in d.raw.iter().zip(&d.y) {
            assert!((d.unscale(*y) - r).abs() < 1e-12);
        }
        assert!((d.x[120] - PI).abs() < 1e-15);
    }

    #[test]
    fn split_is_pinned_by_seed() {
        let a = RealWorldDataset::from_values(series(), 0).unwrap();
        let b = RealWorldDataset::from_values(series(), 0).unwrap();
        let c = RealWorldDataset::from_values(series(), 1).unwrap();
        assert_eq!(a.train_idx, b.train_idx);
        assert_ne!(a.train_idx, c.train_idx);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(RealWorldDataset::from_values(vec![1.0; 239], 0).is_err());
        assert!(RealWorldDataset::from_values(vec![1.0; 240], 0).is_err());
        let mut s = series();
        s[3] = f64::NAN;
        assert!(RealWorldDataset::from_values(s, 0).is_err());
    }
}
