//! Named residual summaries.

use serde::{Deserialize, Serialize};

use crate::grid::Index;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    /// Node achieving the maximum, if any sample was recorded.
    pub argmax: Option<Index>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub scheme: Option<String>,
    pub step: Option<f64>,
    pub stencil: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub metadata: ReportMetadata,
}

impl ResidualReport {
    pub fn entry(&self, name: &str) -> Option<&ResidualEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Maximum over all entries (0 for an empty report).
    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.max).fold(0.0, f64::max)
    }

    pub fn push(&mut self, e: ResidualEntry) {
        self.entries.push(e);
    }
}

/// Running max/mean of absolute values.
#[derive(Debug, Clone)]
pub struct Accumulator {
    name: String,
    max: f64,
    sum: f64,
    count: usize,
    argmax: Option<Index>,
}

impl Accumulator {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), max: 0.0, sum: 0.0, count: 0, argmax: None }
    }

    /// Records |r|; NaN samples are skipped.
    pub fn add(&mut self, r: f64, at: Index) {
        if r.is_nan() {
            return;
        }
        let a = r.abs();
        if self.argmax.is_none() || a > self.max {
            self.max = a;
            self.argmax = Some(at);
        }
        self.sum += a;
        self.count += 1;
    }

    pub fn merge(mut self, other: Accumulator) -> Self {
        if let Some(at) = other.argmax {
            if self.argmax.is_none() || other.max > self.max {
                self.max = other.max;
                self.argmax = Some(at);
            }
        }
        self.sum += other.sum;
        self.count += other.count;
        self
    }

    pub fn finish(self) -> ResidualEntry {
        let mean = if self.count > 0 { self.sum / self.count as f64 } else { 0.0 };
        ResidualEntry { name: self.name, max: self.max, mean, argmax: self.argmax, count: self.count }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulates() {
        let mut a = Accumulator::new("x");
        a.add(-3.0, [1, 0, 0]);
        a.add(1.0, [2, 0, 0]);
        a.add(f64::NAN, [3, 0, 0]);
        let e = a.finish();
        assert_eq!(e.max, 3.0);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.argmax, Some([1, 0, 0]));
        assert_eq!(e.count, 2);
        assert!(e.max >= e.mean);
        let empty = Accumulator::new("y").finish();
        assert_eq!((empty.max, empty.mean, empty.argmax), (0.0, 0.0, None));
    }
}
