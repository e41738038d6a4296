//! Piecewise-linear grids on Y = [1/2, 1], cut at breakpoints.
//!
//! Nodes follow the graded map y = 1/2 + (u + u^2)/4, which is finer near 1/2.
//! A breakpoint ends one segment and starts the next, so it appears twice and
//! functions may jump there.

use crate::error::{invalid, Result};

#[derive(Clone, Debug)]
pub struct YGrid {
    pub nodes: Vec<f64>,
    /// Segment index of every node.
    pub seg: Vec<usize>,
    /// First and last node index of every segment.
    pub segs: Vec<(usize, usize)>,
    /// Segment ends, breaks[s]..breaks[s+1].
    pub breaks: Vec<f64>,
}

fn graded(u: f64) -> f64 {
    0.5 + 0.25 * (u + u * u)
}

impl YGrid {
    /// About `m` graded nodes plus two nodes per interior breakpoint.
    pub fn new(breaks: &[f64], m: usize) -> Result<Self> {
        if m < 8 {
            return Err(invalid!("grid needs at least 8 nodes, got {m}"));
        }
        let mut b: Vec<f64> = breaks.iter().copied().filter(|x| *x > 0.5 && *x < 1.0).collect();
        b.push(0.5);
        b.push(1.0);
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, c| (*a - *c).abs() < 1e-13);
        let global: Vec<f64> = (0..m).map(|j| graded(j as f64 / (m - 1) as f64)).collect();
        let h_min = 0.25 / (m - 1) as f64;
        let mut nodes = Vec::new();
        let mut seg = Vec::new();
        let mut segs = Vec::new();
        for s in 0..b.len() - 1 {
            let (lo, hi) = (b[s], b[s + 1]);
            let start = nodes.len();
            nodes.push(lo);
            let gap = 0.2 * h_min.min(hi - lo);
            for &g in &global {
                if g > lo + gap && g < hi - gap {
                    nodes.push(g);
                }
            }
            nodes.push(hi);
            let end = nodes.len() - 1;
            seg.extend(std::iter::repeat(s).take(end + 1 - start));
            segs.push((start, end));
        }
        Ok(YGrid { nodes, seg, segs, breaks: b })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn segment_of(&self, x: f64) -> usize {
        let s = self.breaks.partition_point(|b| *b <= x);
        s.clamp(1, self.segs.len()) - 1
    }

    pub fn seg_mid(&self, s: usize) -> f64 {
        0.5 * (self.breaks[s] + self.breaks[s + 1])
    }

    /// (i, w) with value = (1 - w) v[i] + w v[i + 1].
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = self.segment_of(x);
        let (a, b) = self.segs[s];
        let x = x.clamp(self.nodes[a], self.nodes[b]);
        let k = a + self.nodes[a..=b].partition_point(|n| *n <= x);
        let i = k.clamp(a + 1, b) - 1;
        let h = self.nodes[i + 1] - self.nodes[i];
        let w = if h > 0.0 { (x - self.nodes[i]) / h } else { 0.0 };
        (i, w.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn interp(&self, v: &[f64], x: f64) -> f64 {
        let (i, w) = self.locate(x);
        (1.0 - w) * v[i] + w * v[i + 1]
    }

    /// Lebesgue integrals of the hat functions.
    pub fn hat_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for &(a, b) in &self.segs {
            for i in a..b {
                let h = 0.5 * (self.nodes[i + 1] - self.nodes[i]);
                w[i] += h;
                w[i + 1] += h;
            }
        }
        w
    }

    /// Cells between consecutive nodes of one segment.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.segs.iter().flat_map(|&(a, b)| (a..b).map(|i| (i, i + 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakpoints_are_doubled() {
        let g = YGrid::new(&[0.75, 0.6], 32).unwrap();
        assert_eq!(g.segs.len(), 3);
        assert_eq!(g.nodes.iter().filter(|x| **x == 0.75).count(), 2);
        let w: f64 = g.hat_weights().iter().sum();
        assert!((w - 0.5).abs() < 1e-14);
    }

    #[test]
    fn interpolation_of_linear_is_exact() {
        let g = YGrid::new(&[0.7], 20).unwrap();
        let v: Vec<f64> = g.nodes.iter().map(|y| 3.0 * y - 1.0).collect();
        for x in [0.5, 0.61, 0.7, 0.83, 1.0] {
            assert!((g.interp(&v, x) - (3.0 * x - 1.0)).abs() < 1e-14);
        }
    }
}
