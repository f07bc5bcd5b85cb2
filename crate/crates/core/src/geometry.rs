//! Discrete closed manifolds: periodic structured grids on the torus carrying a
//! Riemannian metric, its inverse, the volume density and Christoffel symbols.
//!
//! Node data is stored in row-major order (last axis fastest) and all index
//! arithmetic wraps periodically. Derivatives of node data are second-order
//! central differences.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fiber::{Mat3, IDENTITY, MAT_ZERO};
use crate::par;

/// Dimension and node counts of a periodic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    dim: usize,
    sizes: [usize; 3],
}

impl GridShape {
    /// Smallest admissible node count per axis (width of the nested stencils).
    pub const MIN_SIZE: usize = 8;

    pub fn new(sizes: &[usize]) -> Result<Self> {
        let dim = sizes.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < Self::MIN_SIZE) {
            return Err(Error::InvalidGrid(format!(
                "every axis needs at least {} nodes, got {n}",
                Self::MIN_SIZE
            )));
        }
        let mut s = [1; 3];
        s[..dim].copy_from_slice(sizes);
        Ok(Self { dim, sizes: s })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim]
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.sizes().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_size(&self) -> usize {
        *self.sizes().iter().min().unwrap()
    }

    pub fn max_size(&self) -> usize {
        *self.sizes().iter().max().unwrap()
    }

    /// Number of tensor components per node for a rank-`rank` covariant tensor.
    pub fn components(&self, rank: usize) -> usize {
        self.dim.pow(rank as u32)
    }

    pub fn strides(&self) -> [usize; 3] {
        let mut strides = [0; 3];
        let mut s = 1;
        for axis in (0..self.dim).rev() {
            strides[axis] = s;
            s *= self.sizes[axis];
        }
        strides
    }

    pub fn coords(&self, node: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = node;
        for axis in (0..self.dim).rev() {
            c[axis] = rest % self.sizes[axis];
            rest /= self.sizes[axis];
        }
        c
    }

    pub fn node(&self, coords: &[usize; 3]) -> usize {
        let strides = self.strides();
        (0..self.dim).map(|a| coords[a] * strides[a]).sum()
    }
}

/// Concrete metric families standing in for an abstract closed manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricFamily {
    Flat,
    /// `g = exp(2 phi) delta` with `phi = a * prod_i cos(2 pi kappa_i x_i / L_i)`.
    Conformal,
}

impl MetricFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MetricFamily::Flat => "flat",
            MetricFamily::Conformal => "conformal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSpec {
    pub family: MetricFamily,
    pub amplitude: f64,
    pub kappa: [i64; 3],
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::flat()
    }
}

impl MetricSpec {
    pub fn flat() -> Self {
        Self {
            family: MetricFamily::Flat,
            amplitude: 0.0,
            kappa: [0; 3],
        }
    }

    pub fn conformal(amplitude: f64, kappa: [i64; 3]) -> Self {
        Self {
            family: MetricFamily::Conformal,
            amplitude,
            kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || self.amplitude.abs() >= 1.0 {
            return Err(Error::InvalidMetricSpec(format!(
                "conformal amplitude must satisfy |a| < 1, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Conformal exponent `phi(x)`; zero for the flat family.
    pub fn phi(&self, x: &[f64; 3], lengths: &[f64], dim: usize) -> f64 {
        match self.family {
            MetricFamily::Flat => 0.0,
            MetricFamily::Conformal => {
                let mut prod = self.amplitude;
                for axis in 0..dim {
                    prod *= (2.0 * PI * self.kappa[axis] as f64 * x[axis] / lengths[axis]).cos();
                }
                prod
            }
        }
    }
}

/// A periodic grid with its metric data.
#[derive(Clone, Debug)]
pub struct ManifoldGrid {
    shape: GridShape,
    lengths: [f64; 3],
    spacing: [f64; 3],
    metric: Vec<Mat3>,
    inverse_metric: Vec<Mat3>,
    vol_density: Vec<f64>,
    /// `christoffel[node][k][i][j] = Gamma^k_ij`
    christoffel: Vec<[Mat3; 3]>,
    plus: Vec<[usize; 3]>,
    minus: Vec<[usize; 3]>,
    flat: bool,
    diagonal: bool,
    spec: Option<MetricSpec>,
}

/// Builds the grid for a metric family.
pub fn build_grid(spec: &MetricSpec, sizes: &[usize], lengths: &[f64]) -> Result<ManifoldGrid> {
    spec.validate()?;
    let dim = sizes.len();
    let mut l = [1.0; 3];
    l[..lengths.len().min(3)].copy_from_slice(&lengths[..lengths.len().min(3)]);
    let spec_copy = *spec;
    let mut grid = ManifoldGrid::with_metric(sizes, lengths, move |x| {
        let phi = spec_copy.phi(x, &l, dim);
        if phi == 0.0 {
            return IDENTITY;
        }
        let c = (2.0 * phi).exp();
        let mut g = MAT_ZERO;
        for (a, row) in g.iter_mut().enumerate().take(dim) {
            row[a] = c;
        }
        g
    })?;
    grid.spec = Some(*spec);
    Ok(grid)
}

impl ManifoldGrid {
    /// Builds a grid from an arbitrary metric field `x -> g(x)`; only the
    /// leading `dim x dim` block of the returned matrix is used.
    pub fn with_metric<F>(sizes: &[usize], lengths: &[f64], metric_at: F) -> Result<Self>
    where
        F: Fn(&[f64; 3]) -> Mat3 + Sync,
    {
        let shape = GridShape::new(sizes)?;
        let dim = shape.dim();
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} period lengths, got {}",
                lengths.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("period lengths must be positive, got {l}")));
        }
        let mut len3 = [1.0; 3];
        len3[..dim].copy_from_slice(lengths);
        let mut spacing = [1.0; 3];
        for a in 0..dim {
            spacing[a] = len3[a] / shape.sizes[a] as f64;
        }

        let n = shape.len();
        let strides = shape.strides();
        let mut plus = vec![[0usize; 3]; n];
        let mut minus = vec![[0usize; 3]; n];
        for node in 0..n {
            let c = shape.coords(node);
            for a in 0..dim {
                let size = shape.sizes[a];
                let base = node - c[a] * strides[a];
                plus[node][a] = base + ((c[a] + 1) % size) * strides[a];
                minus[node][a] = base + ((c[a] + size - 1) % size) * strides[a];
            }
        }

        let coordinate = |node: usize| {
            let c = shape.coords(node);
            let mut x = [0.0; 3];
            for a in 0..dim {
                x[a] = c[a] as f64 * spacing[a];
            }
            x
        };

        let metric: Vec<Mat3> = par::map_nodes(n, |node| {
            let g = metric_at(&coordinate(node));
            let mut out = MAT_ZERO;
            for i in 0..dim {
                out[i][..dim].copy_from_slice(&g[i][..dim]);
            }
            out
        });

        let mut inverse_metric = Vec::with_capacity(n);
        let mut vol_density = Vec::with_capacity(n);
        for (node, g) in metric.iter().enumerate() {
            let (inv, det) = invert_spd(g, dim).ok_or(Error::NonSpdMetric { node })?;
            inverse_metric.push(inv);
            vol_density.push(det.sqrt());
        }

        let flat = metric.iter().all(|g| *g == identity_block(dim));
        let diagonal = metric
            .iter()
            .all(|g| (0..dim).all(|i| (0..dim).all(|j| i == j || g[i][j] == 0.0)));

        let mut grid = Self {
            shape,
            lengths: len3,
            spacing,
            metric,
            inverse_metric,
            vol_density,
            christoffel: vec![[MAT_ZERO; 3]; n],
            plus,
            minus,
            flat,
            diagonal,
            spec: None,
        };
        if flat {
            // Exact identity metric: unit density and vanishing symbols.
            grid.vol_density.iter_mut().for_each(|v| *v = 1.0);
        } else {
            grid.christoffel = grid.compute_christoffel();
        }
        Ok(grid)
    }

    fn compute_christoffel(&self) -> Vec<[Mat3; 3]> {
        let dim = self.dim();
        par::map_nodes(self.len(), |node| {
            // dg[i][j][l] = d_i g_jl
            let mut dg = [MAT_ZERO; 3];
            for (i, dgi) in dg.iter_mut().enumerate().take(dim) {
                let gp = &self.metric[self.plus[node][i]];
                let gm = &self.metric[self.minus[node][i]];
                let inv2h = 0.5 / self.spacing[i];
                for j in 0..dim {
                    for l in 0..dim {
                        dgi[j][l] = (gp[j][l] - gm[j][l]) * inv2h;
                    }
                }
            }
            let ginv = &self.inverse_metric[node];
            let mut gamma = [MAT_ZERO; 3];
            for i in 0..dim {
                for j in i..dim {
                    let mut lowered = [0.0; 3];
                    for (l, low) in lowered.iter_mut().enumerate().take(dim) {
                        *low = dg[i][j][l] + dg[j][i][l] - dg[l][i][j];
                    }
                    for (k, gk) in gamma.iter_mut().enumerate().take(dim) {
                        let mut s = 0.0;
                        for l in 0..dim {
                            s += ginv[k][l] * lowered[l];
                        }
                        gk[i][j] = 0.5 * s;
                        gk[j][i] = 0.5 * s;
                    }
                }
            }
            gamma
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim()]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim()]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Coordinates of a node in `[0, L_1) x ... x [0, L_m)`.
    pub fn coordinate(&self, node: usize) -> [f64; 3] {
        let c = self.shape.coords(node);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = c[a] as f64 * self.spacing[a];
        }
        x
    }

    pub fn metric(&self, node: usize) -> &Mat3 {
        &self.metric[node]
    }

    pub fn inverse_metric(&self, node: usize) -> &Mat3 {
        &self.inverse_metric[node]
    }

    /// `sqrt(det g)` at a node.
    pub fn vol_density(&self, node: usize) -> f64 {
        self.vol_density[node]
    }

    /// `Gamma^k_ij` at a node.
    pub fn christoffel(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        self.christoffel[node][k][i][j]
    }

    pub(crate) fn christoffel_at(&self, node: usize) -> &[Mat3; 3] {
        &self.christoffel[node]
    }

    /// Neighbouring node one step along `axis` (`forward` or backward), wrapping.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> usize {
        if forward {
            self.plus[node][axis]
        } else {
            self.minus[node][axis]
        }
    }

    /// True when the metric is exactly the identity everywhere.
    pub fn is_flat(&self) -> bool {
        self.flat
    }

    /// True when every off-diagonal metric entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn spec(&self) -> Option<&MetricSpec> {
        self.spec.as_ref()
    }

    /// Riemann-sum weight of a node: `sqrt(det g) * prod h_i`.
    #[inline]
    pub fn quadrature_weight(&self, node: usize) -> f64 {
        self.vol_density[node] * self.cell_volume()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn volume(&self) -> f64 {
        par::sum_by(self.len(), |node| self.quadrature_weight(node))
    }

    /// Largest diagonal entry of the inverse metric over all nodes and axes.
    pub fn max_inverse_metric_diag(&self) -> f64 {
        let dim = self.dim();
        par::max_by(self.len(), |node| {
            let ginv = &self.inverse_metric[node];
            (0..dim).map(|i| ginv[i][i]).fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// Second-order central difference of scalar node data along `axis`.
    #[inline]
    pub fn central_diff<F: Fn(usize) -> f64>(&self, node: usize, axis: usize, f: F) -> f64 {
        (f(self.plus[node][axis]) - f(self.minus[node][axis])) * (0.5 / self.spacing[axis])
    }
}

fn identity_block(dim: usize) -> Mat3 {
    let mut m = MAT_ZERO;
    for (a, row) in m.iter_mut().enumerate().take(dim) {
        row[a] = 1.0;
    }
    m
}

/// Inverse and determinant of a symmetric positive definite `dim x dim` block.
/// Returns `None` if the block is not symmetric or not positive definite.
fn invert_spd(g: &Mat3, dim: usize) -> Option<(Mat3, f64)> {
    let scale = g.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if !(scale.is_finite() && scale > 0.0) {
        return None;
    }
    for i in 0..dim {
        for j in 0..i {
            if (g[i][j] - g[j][i]).abs() > 1e-14 * scale {
                return None;
            }
        }
    }
    // Sylvester's criterion on the leading principal minors.
    let m1 = g[0][0];
    let m2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let mut inv = MAT_ZERO;
    match dim {
        2 => {
            if m1 <= 0.0 || m2 <= 0.0 {
                return None;
            }
            inv[0][0] = g[1][1] / m2;
            inv[1][1] = g[0][0] / m2;
            inv[0][1] = -g[0][1] / m2;
            inv[1][0] = -g[1][0] / m2;
            Some((inv, m2))
        }
        3 => {
            let c00 = g[1][1] * g[2][2] - g[1][2] * g[2][1];
            let c01 = g[1][2] * g[2][0] - g[1][0] * g[2][2];
            let c02 = g[1][0] * g[2][1] - g[1][1] * g[2][0];
            let det = g[0][0] * c00 + g[0][1] * c01 + g[0][2] * c02;
            if m1 <= 0.0 || m2 <= 0.0 || det <= 0.0 {
                return None;
            }
            inv[0][0] = c00 / det;
            inv[1][0] = c01 / det;
            inv[2][0] = c02 / det;
            inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
            inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
            inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
            inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
            inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
            inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
            Some((inv, det))
        }
        _ => None,
    }
}

/// Riemann curvature of the grid's metric.
///
/// Sign convention: `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`
/// with `R(d_i, d_j) d_r = R^h_ijr d_h`, lowered as `R_ijkl = R^h_ijk g_hl`.
/// In two dimensions the Gauss curvature is `K = -R_1212 / det g`.
#[derive(Clone, Debug)]
pub struct RiemannTensor {
    dim: usize,
    /// `R^h_ijk` at `node * m^4 + ((h*m + i)*m + j)*m + k`
    mixed: Vec<f64>,
    /// `R_ijkl` at `node * m^4 + ((i*m + j)*m + k)*m + l`
    lowered: Vec<f64>,
}

impl RiemannTensor {
    #[inline]
    fn offset(&self, node: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
        let m = self.dim;
        node * m.pow(4) + ((a * m + b) * m + c) * m + d
    }

    /// Lowered component `R_ijkl`.
    pub fn get(&self, node: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.lowered[self.offset(node, i, j, k, l)]
    }

    /// Mixed component `R^h_ijk`.
    pub fn mixed(&self, node: usize, h: usize, i: usize, j: usize, k: usize) -> f64 {
        self.mixed[self.offset(node, h, i, j, k)]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gauss curvature of a 2-manifold at a node.
    pub fn gauss_curvature(&self, grid: &ManifoldGrid, node: usize) -> f64 {
        let g = grid.metric(node);
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        -self.get(node, 0, 1, 0, 1) / det
    }

    /// Largest absolute component over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.lowered.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }
}

/// Computes `R^M` from the grid's Christoffel symbols by central differences.
pub fn manifold_curvature(grid: &ManifoldGrid) -> RiemannTensor {
    let m = grid.dim();
    let m4 = m.pow(4);
    let n = grid.len();
    if grid.is_flat() {
        return RiemannTensor {
            dim: m,
            mixed: vec![0.0; n * m4],
            lowered: vec![0.0; n * m4],
        };
    }
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = par::map_nodes(n, |node| {
        let gamma = grid.christoffel_at(node);
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * m + b) * m + c) * m + d;
        let d_gamma =
            |p: usize, h: usize, j: usize, r: usize| grid.central_diff(node, p, |nb| grid.christoffel(nb, h, j, r));
        let mut mixed = vec![0.0; m4];
        for i in 0..m {
            for j in (i + 1)..m {
                for h in 0..m {
                    for r in 0..m {
                        let mut v = d_gamma(i, h, j, r) - d_gamma(j, h, i, r);
                        for l in 0..m {
                            v += gamma[h][i][l] * gamma[l][j][r] - gamma[h][j][l] * gamma[l][i][r];
                        }
                        mixed[idx(h, i, j, r)] = v;
                        mixed[idx(h, j, i, r)] = -v;
                    }
                }
            }
        }
        let g = grid.metric(node);
        let mut lowered = vec![0.0; m4];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut s = 0.0;
                        for h in 0..m {
                            s += mixed[idx(h, i, j, k)] * g[h][l];
                        }
                        lowered[idx(i, j, k, l)] = s;
                    }
                }
            }
        }
        (mixed, lowered)
    });
    let mut mixed = Vec::with_capacity(n * m4);
    let mut lowered = Vec::with_capacity(n * m4);
    for (a, b) in per_node {
        mixed.extend(a);
        lowered.extend(b);
    }
    RiemannTensor { dim: m, mixed, lowered }
}
