//! Structured parameter meshes, finite-difference stencils and quadrature.
//!
//! Nodes are ordered row-major with axis 0 varying slowest. A periodic axis
//! of length `L` with `N` nodes places nodes at `start + iL/N`; a bounded
//! axis places them at `start + iL/(N-1)`, both ends included.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub nodes: usize,
    pub length: f64,
    pub periodic: bool,
    #[serde(default)]
    pub start: f64,
}

impl Axis {
    pub fn periodic(nodes: usize, length: f64) -> Self {
        Axis {
            nodes,
            length,
            periodic: true,
            start: 0.0,
        }
    }

    pub fn bounded(nodes: usize, start: f64, end: f64) -> Self {
        Axis {
            nodes,
            length: end - start,
            periodic: false,
            start,
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.length / self.nodes as f64
        } else {
            self.length / (self.nodes - 1) as f64
        }
    }
}

/// One term of a finite-difference stencil: neighbor node, number of
/// periodic wraps crossed (signed) and coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilTerm {
    pub node: usize,
    pub wraps: i32,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamMesh {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl ParamMesh {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(GeomError::Invalid("mesh needs at least one axis".into()));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.nodes < 8 || a.nodes % 2 != 0 {
                return Err(GeomError::Invalid(format!(
                    "axis {k}: node count must be even and >= 8 (got {})",
                    a.nodes
                )));
            }
            if !(a.length > 0.0) || !a.length.is_finite() || !a.start.is_finite() {
                return Err(GeomError::Invalid(format!(
                    "axis {k}: length must be positive and finite"
                )));
            }
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].nodes;
        }
        let len = axes.iter().map(|a| a.nodes).product();
        Ok(ParamMesh { axes, strides, len })
    }

    pub fn periodic_box(nodes: &[usize], lengths: &[f64]) -> Result<Self> {
        ParamMesh::new(
            nodes
                .iter()
                .zip(lengths)
                .map(|(&n, &l)| Axis::periodic(n, l))
                .collect(),
        )
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(0.0, f64::max)
    }

    pub fn is_closed(&self) -> bool {
        self.axes.iter().all(|a| a.periodic)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| (node / s) % a.nodes)
            .collect()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coord(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.start + i as f64 * a.spacing())
            .collect()
    }

    pub fn coords(&self) -> Vec<Vec<f64>> {
        (0..self.len).map(|i| self.coord(i)).collect()
    }

    /// Neighbor `offset` steps along `axis`; `None` past a bounded edge.
    pub fn neighbor(&self, node: usize, axis: usize, offset: i64) -> Option<(usize, i32)> {
        let a = &self.axes[axis];
        let n = a.nodes as i64;
        let i = ((node / self.strides[axis]) % a.nodes) as i64;
        let j = i + offset;
        let (jj, wraps) = if a.periodic {
            (j.rem_euclid(n), j.div_euclid(n) as i32)
        } else if (0..n).contains(&j) {
            (j, 0)
        } else {
            return None;
        };
        Some(((node as i64 + (jj - i) * self.strides[axis] as i64) as usize, wraps))
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let mi = self.multi_index(node);
        self.axes
            .iter()
            .zip(&mi)
            .any(|(a, &i)| !a.periodic && (i == 0 || i + 1 == a.nodes))
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.is_boundary(i)).collect()
    }

    fn terms(&self, node: usize, axis: usize, offsets: &[(i64, f64)]) -> Vec<StencilTerm> {
        offsets
            .iter()
            .map(|&(o, c)| {
                let (nb, wraps) = self
                    .neighbor(node, axis, o)
                    .expect("stencil offsets stay inside the mesh");
                StencilTerm {
                    node: nb,
                    wraps,
                    coeff: c,
                }
            })
            .collect()
    }

    /// Second-order first-derivative stencil (one-sided at bounded edges).
    pub fn first_stencil(&self, node: usize, axis: usize) -> Vec<StencilTerm> {
        let a = &self.axes[axis];
        let h = a.spacing();
        let i = (node / self.strides[axis]) % a.nodes;
        let c = 0.5 / h;
        if a.periodic || (i > 0 && i + 1 < a.nodes) {
            self.terms(node, axis, &[(-1, -c), (1, c)])
        } else if i == 0 {
            self.terms(node, axis, &[(0, -3.0 * c), (1, 4.0 * c), (2, -c)])
        } else {
            self.terms(node, axis, &[(0, 3.0 * c), (-1, -4.0 * c), (-2, c)])
        }
    }

    /// Second-order second-derivative stencil (one-sided at bounded edges).
    pub fn second_stencil(&self, node: usize, axis: usize) -> Vec<StencilTerm> {
        let a = &self.axes[axis];
        let h = a.spacing();
        let i = (node / self.strides[axis]) % a.nodes;
        let c = 1.0 / (h * h);
        if a.periodic || (i > 0 && i + 1 < a.nodes) {
            self.terms(node, axis, &[(-1, c), (0, -2.0 * c), (1, c)])
        } else {
            let s = if i == 0 { 1 } else { -1 };
            self.terms(
                node,
                axis,
                &[(0, 2.0 * c), (s, -5.0 * c), (2 * s, 4.0 * c), (3 * s, -c)],
            )
        }
    }

    /// `∂_axis` of nodal values.
    pub fn fd_partial(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.fd_partial_jump(values, axis, 0.0)
    }

    /// `∂_axis` of values that increase by `jump` across one period.
    pub fn fd_partial_jump(&self, values: &[f64], axis: usize, jump: f64) -> Vec<f64> {
        assert_eq!(values.len(), self.len, "value array does not match mesh");
        (0..self.len)
            .into_par_iter()
            .map(|i| {
                self.first_stencil(i, axis)
                    .iter()
                    .map(|t| t.coeff * (values[t.node] + t.wraps as f64 * jump))
                    .sum()
            })
            .collect()
    }

    /// `∂²_axis` of nodal values.
    pub fn fd_second(&self, values: &[f64], axis: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.len, "value array does not match mesh");
        (0..self.len)
            .into_par_iter()
            .map(|i| {
                self.second_stencil(i, axis)
                    .iter()
                    .map(|t| t.coeff * values[t.node])
                    .sum()
            })
            .collect()
    }

    /// Quadrature weights: rectangle rule on periodic axes, trapezoid on
    /// bounded ones.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len)
            .map(|node| {
                self.multi_index(node)
                    .iter()
                    .zip(&self.axes)
                    .map(|(&i, a)| {
                        let h = a.spacing();
                        if !a.periodic && (i == 0 || i + 1 == a.nodes) {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect()
    }

    /// `Σ w_i f_i`, compensated.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len, "value array does not match mesh");
        kahan_sum(self.weights().iter().zip(values).map(|(w, f)| w * f))
    }

    /// `Σ w_i ρ_i f_i`, compensated.
    pub fn integrate_density(&self, values: &[f64], density: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len, "value array does not match mesh");
        assert_eq!(density.len(), self.len, "density array does not match mesh");
        kahan_sum(
            self.weights()
                .iter()
                .zip(values.iter().zip(density))
                .map(|(w, (f, r))| w * r * f),
        )
    }

    /// Evaluate `f` at every node coordinate, in parallel, in node order.
    pub fn sample<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        (0..self.len)
            .into_par_iter()
            .map(|i| f(&self.coord(i)))
            .collect()
    }

    /// CSV text: node index, parameter coordinates, then the given columns.
    pub fn csv(&self, columns: &[(&str, &[f64])]) -> String {
        let mut out = String::from("node");
        for k in 0..self.dim() {
            out.push_str(&format!(",u{k}"));
        }
        for (name, col) in columns {
            assert_eq!(col.len(), self.len, "column {name} does not match mesh");
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.len {
            out.push_str(&i.to_string());
            for c in self.coord(i) {
                out.push_str(&format!(",{c:e}"));
            }
            for (_, col) in columns {
                out.push_str(&format!(",{:e}", col[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Compensated summation in iteration order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in items {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_axes() {
        assert!(ParamMesh::new(vec![Axis::periodic(7, 1.0)]).is_err());
        assert!(ParamMesh::new(vec![Axis::periodic(6, 1.0)]).is_err());
        assert!(ParamMesh::new(vec![Axis::periodic(8, 0.0)]).is_err());
        assert!(ParamMesh::new(vec![]).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let m = ParamMesh::new(vec![Axis::periodic(8, 1.0), Axis::bounded(10, -1.0, 1.0), Axis::periodic(12, 2.0)]).unwrap();
        assert_eq!(m.len(), 960);
        for i in 0..m.len() {
            assert_eq!(m.index(&m.multi_index(i)), i);
        }
        assert_eq!(m.coord(0), vec![0.0, -1.0, 0.0]);
        let last = m.coord(m.len() - 1);
        assert!((last[1] - 1.0).abs() < 1e-15);
        assert!((last[2] - 2.0 * 11.0 / 12.0).abs() < 1e-15);
        assert_eq!(m.neighbor(0, 0, -1), Some((7 * 120, -1)));
        assert_eq!(m.neighbor(0, 1, -1), None);
        assert!(m.is_boundary(0));
        assert!(!m.is_closed());
    }

    #[test]
    fn periodic_quadrature_is_spectral_for_trig() {
        let m = ParamMesh::periodic_box(&[32, 32], &[2.0 * PI, 2.0 * PI]).unwrap();
        let f = m.sample(|p| Ok(1.0 + (p[0]).cos().powi(2) * (p[1]).sin())).unwrap();
        let exact = 4.0 * PI * PI;
        assert!((m.integrate(&f) - exact).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_on_bounded_axis() {
        let m = ParamMesh::new(vec![Axis::bounded(64, 0.0, 1.0)]).unwrap();
        let f = m.sample(|p| Ok(p[0] * p[0])).unwrap();
        let h = m.spacing(0);
        assert!((m.integrate(&f) - (1.0 / 3.0 + h * h / 6.0)).abs() < 1e-13);
    }

    #[test]
    fn derivative_errors_are_second_order() {
        let err = |n: usize| {
            let m = ParamMesh::new(vec![Axis::bounded(n, 0.0, 1.0), Axis::periodic(n, 1.0)]).unwrap();
            let f = m.sample(|p| Ok((2.0 * p[0]).exp() * (2.0 * PI * p[1]).sin())).unwrap();
            let d0 = m.fd_partial(&f, 0);
            let d00 = m.fd_second(&f, 0);
            let d1 = m.fd_partial(&f, 1);
            let mut e = [0.0f64; 3];
            for i in 0..m.len() {
                let p = m.coord(i);
                let g = (2.0 * p[0]).exp();
                e[0] = e[0].max((d0[i] - 2.0 * g * (2.0 * PI * p[1]).sin()).abs());
                e[1] = e[1].max((d00[i] - 4.0 * g * (2.0 * PI * p[1]).sin()).abs());
                e[2] = e[2].max((d1[i] - 2.0 * PI * g * (2.0 * PI * p[1]).cos()).abs());
            }
            e
        };
        let a = err(32);
        let b = err(64);
        for k in 0..3 {
            let ratio = a[k] / b[k];
            assert!((3.0..5.5).contains(&ratio), "component {k}: ratio {ratio}");
        }
    }

    #[test]
    fn jump_derivative_of_linear_coordinate() {
        let m = ParamMesh::periodic_box(&[16], &[3.0]).unwrap();
        let f: Vec<f64> = m.coords().iter().map(|p| 2.0 * p[0]).collect();
        let d = m.fd_partial_jump(&f, 0, 6.0);
        assert!(d.iter().all(|v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn csv_layout() {
        let m = ParamMesh::periodic_box(&[8], &[1.0]).unwrap();
        let v = vec![1.0; 8];
        let text = m.csv(&[("h", &v)]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("node,u0,h"));
        assert_eq!(text.lines().count(), 9);
    }

    proptest! {
        #[test]
        fn kahan_matches_exact_integer_sums(xs in proptest::collection::vec(-1000i32..1000, 0..200)) {
            let exact: i64 = xs.iter().map(|&x| x as i64).sum();
            prop_assert_eq!(kahan_sum(xs.iter().map(|&x| x as f64)), exact as f64);
        }

        #[test]
        fn weights_sum_to_volume(n0 in 4usize..10, n1 in 4usize..10, l0 in 0.5f64..3.0, l1 in 0.5f64..3.0, p0: bool, p1: bool) {
            let axes = vec![
                Axis { nodes: 2 * n0, length: l0, periodic: p0, start: 0.0 },
                Axis { nodes: 2 * n1, length: l1, periodic: p1, start: 0.0 },
            ];
            let m = ParamMesh::new(axes).unwrap();
            let total = kahan_sum(m.weights());
            prop_assert!((total - l0 * l1).abs() < 1e-12);
        }
    }
}
