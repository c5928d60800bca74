//! Epoch-aligned metric series with explicit missing values.

use serde::{Deserialize, Serialize};

/// An epoch-aligned sequence where each entry is either a value or missing.
///
/// Serializes as a JSON array with `null` for missing entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricSeries(Vec<Option<f64>>);

impl MetricSeries {
    pub fn new(values: Vec<Option<f64>>) -> Self {
        Self(values)
    }

    /// A series of `len` missing entries.
    pub fn missing(len: usize) -> Self {
        Self(vec![None; len])
    }

    /// A fully populated series.
    pub fn from_values(values: &[f64]) -> Self {
        Self(values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<f64> {
        self.0.get(idx).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.0.iter().copied()
    }

    /// Present values with their positions.
    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    pub fn count_present(&self) -> usize {
        self.0.iter().filter(|v| v.is_some()).count()
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.count_present();
        if n == 0 {
            return None;
        }
        Some(self.present().map(|(_, v)| v).sum::<f64>() / n as f64)
    }

    /// Population standard deviation over present values.
    pub fn std(&self) -> Option<f64> {
        let mean = self.mean()?;
        let n = self.count_present() as f64;
        let ss: f64 = self.present().map(|(_, v)| (v - mean).powi(2)).sum();
        Some((ss / n).sqrt())
    }

    /// Applies `f` to every present value.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self(self.0.iter().map(|v| v.map(&mut f)).collect())
    }

    pub fn into_inner(self) -> Vec<Option<f64>> {
        self.0
    }
}

impl From<Vec<Option<f64>>> for MetricSeries {
    fn from(values: Vec<Option<f64>>) -> Self {
        Self(values)
    }
}

impl FromIterator<Option<f64>> for MetricSeries {
    fn from_iter<I: IntoIterator<Item = Option<f64>>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
