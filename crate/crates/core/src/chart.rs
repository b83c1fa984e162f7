//! Structured coordinate charts: uniform grids, node indexing, quadrature
//! weights, and distance to the box boundary.

use crate::error::FieldError;
use serde::{Deserialize, Serialize};

/// One grid axis: `nodes` samples spaced `spacing` apart starting at
/// `origin`. A periodic axis covers `nodes * spacing`; a non-periodic axis
/// spans `[origin, origin + (nodes-1) * spacing]` including both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub nodes: usize,
    pub spacing: f64,
    pub periodic: bool,
    pub origin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Periodic,
    BoxWithBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    axes: Vec<AxisSpec>,
    boundary_kind: BoundaryKind,
}

impl ChartSpec {
    /// Minimum nodes per axis; one-sided 4th-order stencils for 4th
    /// derivatives need 8 points.
    pub const MIN_NODES: usize = 8;

    pub fn new(axes: Vec<AxisSpec>) -> Result<Self, FieldError> {
        if axes.len() < 2 {
            return Err(FieldError::InvalidChart {
                reason: format!("chart dimension {} < 2", axes.len()),
            });
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.nodes < Self::MIN_NODES {
                return Err(FieldError::InvalidChart {
                    reason: format!("axis {a} has {} nodes; at least {} required", ax.nodes, Self::MIN_NODES),
                });
            }
            if !(ax.spacing > 0.0) || !ax.spacing.is_finite() || !ax.origin.is_finite() {
                return Err(FieldError::InvalidChart {
                    reason: format!("axis {a} has invalid spacing/origin"),
                });
            }
        }
        let boundary_kind = if axes.iter().all(|a| a.periodic) {
            BoundaryKind::Periodic
        } else {
            BoundaryKind::BoxWithBoundary
        };
        Ok(ChartSpec { axes, boundary_kind })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &AxisSpec {
        &self.axes[a]
    }

    #[inline]
    pub fn boundary_kind(&self) -> BoundaryKind {
        self.boundary_kind
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.boundary_kind == BoundaryKind::Periodic
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Row-major strides: the last axis varies fastest.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.axes[a + 1].nodes;
        }
        s
    }

    #[inline]
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (a, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.axes[a].nodes);
            idx = idx * self.axes[a].nodes + i;
        }
        idx
    }

    /// Decompose a flat index into per-axis indices (row-major).
    #[inline]
    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        let mut rem = flat;
        for a in (0..self.dim()).rev() {
            out[a] = rem % self.axes[a].nodes;
            rem /= self.axes[a].nodes;
        }
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let ax = &self.axes[axis];
        ax.origin + i as f64 * ax.spacing
    }

    pub fn coords(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for a in (0..self.dim()).rev() {
            let i = rem % self.axes[a].nodes;
            rem /= self.axes[a].nodes;
            out[a] = self.coord(a, i);
        }
    }

    /// Quadrature weight of a node: product of spacings, halved at the ends
    /// of non-periodic axes (trapezoid closure).
    pub fn cell_weight(&self, multi: &[usize]) -> f64 {
        let mut w = 1.0;
        for (a, &i) in multi.iter().enumerate() {
            let ax = &self.axes[a];
            let mut wa = ax.spacing;
            if !ax.periodic && (i == 0 || i + 1 == ax.nodes) {
                wa *= 0.5;
            }
            w *= wa;
        }
        w
    }

    /// All cell weights in flat order.
    pub fn cell_weights(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let dim = self.dim();
        crate::exec::map_collect(n, |flat| {
            let mut multi = vec![0usize; dim];
            self.multi_index(flat, &mut multi);
            self.cell_weight(&multi)
        })
    }

    /// Coordinate distance to the nearest non-periodic boundary face.
    /// Zero on the boundary itself; `None` for periodic charts.
    pub fn boundary_distance(&self, multi: &[usize]) -> Option<f64> {
        if self.is_periodic() {
            return None;
        }
        let mut d = f64::INFINITY;
        for (a, &i) in multi.iter().enumerate() {
            let ax = &self.axes[a];
            if ax.periodic {
                continue;
            }
            let lo = i as f64 * ax.spacing;
            let hi = (ax.nodes - 1 - i) as f64 * ax.spacing;
            d = d.min(lo).min(hi);
        }
        Some(d)
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).fold(f64::INFINITY, f64::min)
    }

    /// Half of the shortest non-periodic extent (used for the default weight
    /// transition distance).
    pub fn min_half_width(&self) -> Option<f64> {
        self.axes
            .iter()
            .filter(|a| !a.periodic)
            .map(|a| 0.5 * (a.nodes - 1) as f64 * a.spacing)
            .fold(None, |acc, w| Some(acc.map_or(w, |m: f64| m.min(w))))
    }
}

/// Convenience constructor for a chart with identical axes.
pub fn uniform_chart(
    dim: usize,
    nodes: usize,
    lo: f64,
    hi: f64,
    periodic: bool,
) -> Result<ChartSpec, FieldError> {
    let spacing = if periodic {
        (hi - lo) / nodes as f64
    } else {
        (hi - lo) / (nodes - 1) as f64
    };
    ChartSpec::new(vec![
        AxisSpec { nodes, spacing, periodic, origin: lo };
        dim
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let chart = ChartSpec::new(vec![
            AxisSpec { nodes: 8, spacing: 0.1, periodic: false, origin: 0.0 },
            AxisSpec { nodes: 9, spacing: 0.2, periodic: true, origin: -1.0 },
            AxisSpec { nodes: 10, spacing: 0.3, periodic: false, origin: 2.0 },
        ])
        .unwrap();
        assert_eq!(chart.boundary_kind(), BoundaryKind::BoxWithBoundary);
        let mut multi = [0usize; 3];
        for flat in 0..chart.n_nodes() {
            chart.multi_index(flat, &mut multi);
            assert_eq!(chart.flat_index(&multi), flat);
        }
        // last axis fastest
        chart.multi_index(1, &mut multi);
        assert_eq!(multi, [0, 0, 1]);
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let chart = uniform_chart(2, 11, 0.0, 1.0, false).unwrap();
        let total: f64 = chart.cell_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let periodic = uniform_chart(2, 16, 0.0, 1.0, true).unwrap();
        let total: f64 = periodic.cell_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_distance_ignores_periodic_axes() {
        let chart = ChartSpec::new(vec![
            AxisSpec { nodes: 11, spacing: 0.1, periodic: false, origin: 0.0 },
            AxisSpec { nodes: 8, spacing: 0.5, periodic: true, origin: 0.0 },
        ])
        .unwrap();
        let d = chart.boundary_distance(&[3, 0]).unwrap();
        assert!((d - 0.3).abs() < 1e-14);
        assert_eq!(chart.boundary_distance(&[0, 5]).unwrap(), 0.0);
    }

    #[test]
    fn short_axis_rejected() {
        let res = uniform_chart(2, 5, 0.0, 1.0, false);
        assert!(res.is_err());
    }
}
