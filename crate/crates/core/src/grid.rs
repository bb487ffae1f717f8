//! Regular Cartesian grids.
//!
//! Points are indexed row-major with the first axis varying slowest, so the
//! linear index of `(i_0, ..., i_{N-1})` is `((i_0 * n_1 + i_1) * n_2 + ...)`.
//! Kronecker-factored kernels rely on this ordering: a kernel over a grid with
//! axes `(a, b)` factors as `K_a ⊗ K_b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a grid: `count` evenly spaced points from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidGrid("axis count must be at least 1".into()));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidGrid("axis bounds must be finite".into()));
        }
        if count > 1 && min >= max {
            return Err(Error::InvalidGrid(format!(
                "axis with {count} points needs min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, count })
    }

    /// Axis holding a single coordinate.
    pub fn point(value: f64) -> Self {
        Self {
            min: value,
            max: value,
            count: 1,
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.min
        } else if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for a in &axes {
            Axis::new(a.min, a.max, a.count)?;
        }
        Ok(Self { axes })
    }

    /// Convenience constructor from `(min, max, count)` triples.
    pub fn from_ranges(ranges: &[(f64, f64, usize)]) -> Result<Self> {
        let axes = ranges
            .iter()
            .map(|&(min, max, count)| Axis::new(min, max, count))
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = linear % a.count;
            linear /= a.count;
        }
        idx
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.axes.len());
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.count + i)
    }

    pub fn point(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Grid over the Cartesian product of this grid's axes followed by `other`'s.
    pub fn product(&self, other: &Grid) -> Grid {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        Grid { axes }
    }

    /// Grid restricted to the listed axes, in the listed order.
    pub fn select_axes(&self, which: &[usize]) -> Result<Grid> {
        let axes = which
            .iter()
            .map(|&k| {
                self.axes.get(k).copied().ok_or_else(|| {
                    Error::InvalidGrid(format!("axis {k} out of range for {}-d grid", self.dim()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::new(axes)
    }

    /// Linear index of the grid point closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = self
            .axes
            .iter()
            .zip(x)
            .map(|(a, &v)| {
                if a.count == 1 {
                    0
                } else {
                    let f = ((v - a.min) / a.spacing()).round();
                    f.clamp(0.0, (a.count - 1) as f64) as usize
                }
            })
            .collect();
        self.linear_index(&multi)
    }

    /// Multilinear (cloud-in-cell) weights of `x` onto the enclosing cells.
    ///
    /// Returns `None` when `x` lies outside the grid's bounding box by more
    /// than `slack` grid spacings along some axis. Weights sum to one.
    pub fn splat_weights(&self, x: &[f64], slack: f64) -> Option<Vec<(usize, f64)>> {
        let mut per_axis: Vec<[(usize, f64); 2]> = Vec::with_capacity(self.dim());
        for (a, &v) in self.axes.iter().zip(x) {
            if a.count == 1 {
                let tol = slack.max(1e-12) * (1.0 + a.min.abs());
                if (v - a.min).abs() > tol {
                    return None;
                }
                per_axis.push([(0, 1.0), (0, 0.0)]);
                continue;
            }
            let h = a.spacing();
            let f = (v - a.min) / h;
            let last = (a.count - 1) as f64;
            if f < -slack || f > last + slack {
                return None;
            }
            let f = f.clamp(0.0, last);
            let lo = (f.floor() as usize).min(a.count - 2);
            let w = f - lo as f64;
            per_axis.push([(lo, 1.0 - w), (lo + 1, w)]);
        }
        let mut out = Vec::with_capacity(1 << self.dim());
        let mut multi = vec![0usize; self.dim()];
        for corner in 0..(1usize << self.dim()) {
            let mut w = 1.0;
            for (k, pa) in per_axis.iter().enumerate() {
                let (i, wk) = pa[(corner >> k) & 1];
                multi[k] = i;
                w *= wk;
            }
            if w != 0.0 {
                out.push((self.linear_index(&multi), w));
            }
        }
        Some(out)
    }
}
