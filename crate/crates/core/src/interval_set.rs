//! Finite unions of half-open intervals.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    parts: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    pub fn single(a: f64, b: f64) -> Self {
        let mut s = Self::empty();
        s.insert(a, b);
        s
    }

    pub fn from_parts(parts: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut s = Self::empty();
        for (a, b) in parts {
            s.insert(a, b);
        }
        s
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Adds [a, b) and merges overlapping or touching pieces.
    pub fn insert(&mut self, a: f64, b: f64) {
        if !(b > a) {
            return;
        }
        self.parts.push((a, b));
        self.parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.parts.len());
        for &(lo, hi) in &self.parts {
            if let Some(last) = merged.last_mut() {
                if lo <= last.1 {
                    last.1 = last.1.max(hi);
                    continue;
                }
            }
            merged.push((lo, hi));
        }
        self.parts = merged;
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut s = self.clone();
        for &(a, b) in &other.parts {
            s.insert(a, b);
        }
        s
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.parts.partition_point(|p| p.0 <= x);
        i > 0 && x < self.parts[i - 1].1
    }

    /// Length of the intersection with [a, b).
    pub fn overlap(&self, a: f64, b: f64) -> f64 {
        self.parts.iter().map(|&(lo, hi)| (hi.min(b) - lo.max(a)).max(0.0)).sum()
    }

    pub fn measure(&self) -> f64 {
        self.parts.iter().map(|p| p.1 - p.0).sum()
    }

    /// Complement inside [lo, hi) as a list of pieces.
    pub fn complement_in(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cur = lo;
        for &(a, b) in &self.parts {
            if b <= lo || a >= hi {
                continue;
            }
            if a > cur {
                out.push((cur, a.min(hi)));
            }
            cur = cur.max(b);
        }
        if cur < hi {
            out.push((cur, hi));
        }
        out
    }

    pub fn endpoints(&self) -> Vec<f64> {
        self.parts.iter().flat_map(|&(a, b)| [a, b]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_contains() {
        let mut s = IntervalSet::empty();
        s.insert(0.6, 0.7);
        s.insert(0.5, 0.6);
        s.insert(0.8, 0.9);
        assert_eq!(s.parts(), &[(0.5, 0.7), (0.8, 0.9)]);
        assert!(s.contains(0.5) && !s.contains(0.7) && s.contains(0.85));
        assert!((s.measure() - 0.3).abs() < 1e-15);
        let c = s.complement_in(0.5, 1.0);
        assert_eq!(c, vec![(0.7, 0.8), (0.9, 1.0)]);
    }
}
