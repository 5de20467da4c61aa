//! Rectangular grids, sampled value surfaces and their CSV export.
//!
//! A [`ValueSurface`] is a function sampled on a tensor-product grid at one or
//! more time slices: option values V(s, t) in log-price coordinates on the
//! pricing side, Hamilton-Jacobi values U(x, t) on the verification side.
//! Storage is row-major with the last axis fastest.

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("slice {slice} has {got} values, grid has {expected} nodes")]
    ShapeMismatch {
        slice: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at slice {slice}, node {node}")]
    NonFiniteValue { slice: usize, node: usize },
    #[error("times must be ascending and match the slice count")]
    BadTimes,
    #[error("axis {axis} is degenerate or unordered")]
    BadAxis { axis: usize },
    #[error("point leaves the grid hull on axis {axis}")]
    OutOfHull { axis: usize },
}

/// One uniform grid axis: `nodes` points from `x_min` to `x_max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nodes: usize,
}

impl AxisSpec {
    pub fn new(x_min: f64, x_max: f64, nodes: usize) -> Self {
        Self { x_min, x_max, nodes }
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nodes - 1) as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.x_min + self.step() * j as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.coord(j)).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.nodes >= 2 && self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max
    }

    /// Cell index and fractional offset for `x`, clamped to the hull boundary
    /// only within one floating-point ulp; genuine exits report `OutOfHull`.
    fn locate(&self, x: f64, axis: usize) -> Result<(usize, f64), SurfaceError> {
        let h = self.step();
        let u = (x - self.x_min) / h;
        if !(u >= -1e-9) || !(u <= (self.nodes - 1) as f64 + 1e-9) {
            return Err(SurfaceError::OutOfHull { axis });
        }
        let mut cell = u.floor() as isize;
        if cell < 0 {
            cell = 0;
        }
        if cell as usize >= self.nodes - 1 {
            cell = (self.nodes - 2) as isize;
        }
        let frac = (u - cell as f64).clamp(0.0, 1.0);
        Ok((cell as usize, frac))
    }
}

/// Total node count of a tensor-product grid.
pub fn node_count(axes: &[AxisSpec]) -> usize {
    axes.iter().map(|a| a.nodes).product()
}

/// Flat row-major index of a multi-index (last axis fastest).
pub fn flat_index(axes: &[AxisSpec], idx: &[usize]) -> usize {
    let mut flat = 0;
    for (a, &i) in axes.iter().zip(idx) {
        flat = flat * a.nodes + i;
    }
    flat
}

/// Visits every node: callback gets the multi-index and the flat index.
pub fn for_each_node(axes: &[AxisSpec], mut f: impl FnMut(&[usize], usize)) {
    let dim = axes.len();
    let mut idx = vec![0usize; dim];
    let total = node_count(axes);
    for flat in 0..total {
        f(&idx, flat);
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].nodes {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Multilinear interpolation of `values` (row-major on `axes`) at `point`.
pub fn interpolate(axes: &[AxisSpec], values: &[f64], point: &[f64]) -> Result<f64, SurfaceError> {
    debug_assert_eq!(point.len(), axes.len());
    let dim = axes.len();
    let mut cells = Vec::with_capacity(dim);
    for (d, (a, &x)) in axes.iter().zip(point).enumerate() {
        cells.push(a.locate(x, d)?);
    }
    // Accumulate over the 2^dim cell corners.
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut weight = 1.0;
        let mut flat = 0;
        for (d, a) in axes.iter().enumerate() {
            let (cell, frac) = cells[d];
            let hi = (corner >> d) & 1 == 1;
            weight *= if hi { frac } else { 1.0 - frac };
            flat = flat * a.nodes + cell + hi as usize;
        }
        if weight != 0.0 {
            acc += weight * values[flat];
        }
    }
    Ok(acc)
}

/// Values sampled on a rectangular grid at ascending time slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    axes: Vec<AxisSpec>,
    times: Vec<f64>,
    slices: Vec<Vec<f64>>,
}

impl ValueSurface {
    /// Validates shape, ascending times and finiteness of every node value.
    pub fn new(
        axes: Vec<AxisSpec>,
        times: Vec<f64>,
        slices: Vec<Vec<f64>>,
    ) -> Result<Self, SurfaceError> {
        for (d, a) in axes.iter().enumerate() {
            if !a.is_valid() {
                return Err(SurfaceError::BadAxis { axis: d });
            }
        }
        if times.is_empty() || times.len() != slices.len() {
            return Err(SurfaceError::BadTimes);
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SurfaceError::BadTimes);
        }
        let expected = node_count(&axes);
        for (k, s) in slices.iter().enumerate() {
            if s.len() != expected {
                return Err(SurfaceError::ShapeMismatch {
                    slice: k,
                    expected,
                    got: s.len(),
                });
            }
            if let Some(node) = s.iter().position(|v| !v.is_finite()) {
                return Err(SurfaceError::NonFiniteValue { slice: k, node });
            }
        }
        Ok(Self { axes, times, slices })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.slices[k]
    }

    pub fn node_count(&self) -> usize {
        node_count(&self.axes)
    }

    pub fn value(&self, k: usize, idx: &[usize]) -> f64 {
        self.slices[k][flat_index(&self.axes, idx)]
    }

    /// Multilinear interpolation of slice `k` at `point` (grid coordinates).
    pub fn interpolate(&self, k: usize, point: &[f64]) -> Result<f64, SurfaceError> {
        interpolate(&self.axes, &self.slices[k], point)
    }
}

/// CSV export: one header row, one row per grid node.
///
/// The first columns are the node coordinates under `axis_names`; each entry
/// of `columns` adds one labeled value column (time slices for surfaces, `L`
/// for Lagrangian tables). Numbers print in shortest round-trip form.
pub fn write_grid_csv<W: Write>(
    w: &mut W,
    axis_names: &[String],
    axes: &[AxisSpec],
    columns: &[(String, &[f64])],
) -> io::Result<()> {
    debug_assert_eq!(axis_names.len(), axes.len());
    let mut header = axis_names.join(",");
    for (label, _) in columns {
        header.push(',');
        header.push_str(label);
    }
    writeln!(w, "{header}")?;
    let mut row = String::new();
    let mut result = Ok(());
    for_each_node(axes, |idx, flat| {
        if result.is_err() {
            return;
        }
        row.clear();
        for (d, &i) in idx.iter().enumerate() {
            if d > 0 {
                row.push(',');
            }
            row.push_str(&format!("{}", axes[d].coord(i)));
        }
        for (_, vals) in columns {
            row.push_str(&format!(",{}", vals[flat]));
        }
        result = writeln!(w, "{row}");
    });
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize) -> AxisSpec {
        AxisSpec::new(0.0, 1.0, n)
    }

    #[test]
    fn axis_coordinates_are_uniform() {
        let a = AxisSpec::new(-1.0, 1.0, 5);
        assert_eq!(a.step(), 0.5);
        assert_eq!(a.coords(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn flat_index_is_row_major_last_axis_fastest() {
        let axes = [axis(3), axis(4)];
        assert_eq!(flat_index(&axes, &[0, 0]), 0);
        assert_eq!(flat_index(&axes, &[0, 3]), 3);
        assert_eq!(flat_index(&axes, &[1, 0]), 4);
        assert_eq!(flat_index(&axes, &[2, 3]), 11);
    }

    #[test]
    fn for_each_node_visits_in_flat_order() {
        let axes = [axis(2), axis(3)];
        let mut seen = Vec::new();
        for_each_node(&axes, |idx, flat| seen.push((idx.to_vec(), flat)));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], (vec![0, 0], 0));
        assert_eq!(seen[1], (vec![0, 1], 1));
        assert_eq!(seen[3], (vec![1, 0], 3));
        assert_eq!(seen[5], (vec![1, 2], 5));
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let axes = [AxisSpec::new(0.0, 2.0, 3), AxisSpec::new(0.0, 1.0, 2)];
        // f(x, y) = 2x + 3y + xy.
        let f = |x: f64, y: f64| 2.0 * x + 3.0 * y + x * y;
        let mut vals = vec![0.0; node_count(&axes)];
        for_each_node(&axes, |idx, flat| {
            vals[flat] = f(axes[0].coord(idx[0]), axes[1].coord(idx[1]));
        });
        let got = interpolate(&axes, &vals, &[0.7, 0.4]).unwrap();
        assert!((got - f(0.7, 0.4)).abs() < 1e-14);
        // Node values are exact.
        let got = interpolate(&axes, &vals, &[1.0, 1.0]).unwrap();
        assert_eq!(got, f(1.0, 1.0));
    }

    #[test]
    fn interpolation_rejects_points_outside_hull() {
        let axes = [axis(3)];
        let vals = vec![0.0, 1.0, 2.0];
        assert_eq!(
            interpolate(&axes, &vals, &[1.5]),
            Err(SurfaceError::OutOfHull { axis: 0 })
        );
    }

    #[test]
    fn surface_validation_catches_shape_and_nan() {
        let axes = vec![axis(3)];
        let bad_shape = ValueSurface::new(axes.clone(), vec![0.0], vec![vec![1.0, 2.0]]);
        assert!(matches!(bad_shape, Err(SurfaceError::ShapeMismatch { .. })));
        let bad_val = ValueSurface::new(axes.clone(), vec![0.0], vec![vec![1.0, f64::NAN, 2.0]]);
        assert_eq!(
            bad_val,
            Err(SurfaceError::NonFiniteValue { slice: 0, node: 1 })
        );
        let bad_times =
            ValueSurface::new(axes, vec![1.0, 0.5], vec![vec![0.0; 3], vec![0.0; 3]]);
        assert_eq!(bad_times, Err(SurfaceError::BadTimes));
    }

    #[test]
    fn csv_uses_shortest_round_trip_format() {
        let axes = [AxisSpec::new(0.0, 1.0, 2)];
        let vals_a = [0.1, 2.0];
        let vals_b = [1.5, 0.25];
        let mut out = Vec::new();
        write_grid_csv(
            &mut out,
            &["x1".to_string()],
            &axes,
            &[("t=0".to_string(), &vals_a[..]), ("t=1".to_string(), &vals_b[..])],
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "x1,t=0,t=1\n0,0.1,1.5\n1,2,0.25\n");
    }
}
