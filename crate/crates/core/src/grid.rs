//! Uniform rectangular grids used to discretize map domains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis: `count` uniformly spaced nodes from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.min + k as f64 * self.spacing()
    }
}

/// Uniform grid over a rectangular box in `R^n`. Node indices are linearized
/// lexicographically with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if !a.min.is_finite() || !a.max.is_finite() || a.min >= a.max {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: need finite min < max, got [{}, {}]",
                    a.min, a.max
                )));
            }
            if a.count < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: need at least 3 nodes, got {}",
                    a.count
                )));
            }
        }
        Ok(Self { axes })
    }

    /// Square 2D grid over `[min, max]^2`.
    pub fn square(min: f64, max: f64, count: usize) -> Result<Self> {
        Self::new(vec![Axis { min, max, count }; 2])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = linear % self.axes[d].count;
            linear /= self.axes[d].count;
        }
        idx
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut linear = 0;
        for (d, &k) in multi.iter().enumerate() {
            debug_assert!(k < self.axes[d].count);
            linear = linear * self.axes[d].count + k;
        }
        linear
    }

    pub fn coords(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .iter()
            .enumerate()
            .map(|(d, &k)| self.axes[d].coord(k))
            .collect()
    }

    /// Linear indices of the up-to-`2n` axis neighbors.
    pub fn axis_neighbors(&self, linear: usize) -> Vec<usize> {
        let multi = self.multi_index(linear);
        let mut out = Vec::with_capacity(2 * self.dim());
        for d in 0..self.dim() {
            if multi[d] > 0 {
                let mut m = multi.clone();
                m[d] -= 1;
                out.push(self.linear_index(&m));
            }
            if multi[d] + 1 < self.axes[d].count {
                let mut m = multi.clone();
                m[d] += 1;
                out.push(self.linear_index(&m));
            }
        }
        out
    }

    /// Whether the node lies on the boundary of the grid box.
    pub fn is_boundary(&self, linear: usize) -> bool {
        self.multi_index(linear)
            .iter()
            .zip(&self.axes)
            .any(|(&k, a)| k == 0 || k + 1 == a.count)
    }

    /// Whether a point lies inside the grid's bounding box (inclusive).
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.axes)
                .all(|(&x, a)| x >= a.min && x <= a.max)
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.min, a.max)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![
            Axis {
                min: 0.0,
                max: 1.0,
                count: 4,
            },
            Axis {
                min: -1.0,
                max: 1.0,
                count: 5,
            },
        ])
        .unwrap();
        assert_eq!(g.node_count(), 20);
        for linear in 0..g.node_count() {
            assert_eq!(g.linear_index(&g.multi_index(linear)), linear);
        }
    }

    #[test]
    fn neighbors_on_corner_and_interior() {
        let g = Grid::square(0.0, 1.0, 3).unwrap();
        assert_eq!(g.axis_neighbors(0).len(), 2); // corner
        let center = g.linear_index(&[1, 1]);
        assert_eq!(g.axis_neighbors(center).len(), 4);
        assert!(!g.is_boundary(center));
        assert!(g.is_boundary(0));
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(Grid::square(1.0, 1.0, 8).is_err());
        assert!(Grid::square(0.0, 1.0, 2).is_err());
        assert!(Grid::new(vec![]).is_err());
    }

    #[test]
    fn coords_hit_endpoints() {
        let g = Grid::square(-3.2, 3.2, 256).unwrap();
        assert_eq!(g.coords(0), vec![-3.2, -3.2]);
        let last = g.node_count() - 1;
        let c = g.coords(last);
        assert!((c[0] - 3.2).abs() <= 1e-15 && (c[1] - 3.2).abs() <= 1e-15);
    }
}
