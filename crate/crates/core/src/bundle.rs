//! The rank-3 oriented metric bundle `E = M x R^3` in its global oriented
//! orthonormal frame: sections, tensor-valued fields, metric-compatible
//! connections with their curvature, the cross product and `*`-contractions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fiber::{self, Mat3, Vec3, MAT_ZERO, ZERO};
use crate::geometry::{GridShape, ManifoldGrid};
use crate::par;

/// Common read access to bundle-valued fields of any covariant rank.
pub trait Field: Sync {
    fn shape(&self) -> GridShape;
    fn rank(&self) -> usize;
    /// Fiber values, `components()` consecutive entries per node.
    fn values(&self) -> &[Vec3];

    fn components(&self) -> usize {
        self.shape().components(self.rank())
    }

    fn node_values(&self, node: usize) -> &[Vec3] {
        let c = self.components();
        &self.values()[node * c..(node + 1) * c]
    }
}

/// A section `V: M -> R^3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    shape: GridShape,
    values: Vec<Vec3>,
}

impl Section {
    pub fn zeros(shape: GridShape) -> Self {
        Self {
            shape,
            values: vec![ZERO; shape.len()],
        }
    }

    pub fn constant(shape: GridShape, v: Vec3) -> Self {
        Self {
            shape,
            values: vec![v; shape.len()],
        }
    }

    pub fn from_values(shape: GridShape, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self { shape, values })
    }

    /// Samples `f` at every node coordinate.
    pub fn from_fn<F: Fn(&[f64; 3]) -> Vec3 + Sync>(grid: &ManifoldGrid, f: F) -> Self {
        Self {
            shape: grid.shape(),
            values: par::map_nodes(grid.len(), |node| f(&grid.coordinate(node))),
        }
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest fiber length over all nodes.
    pub fn max_fiber_norm(&self) -> f64 {
        par::max_by(self.values.len(), |i| fiber::norm(&self.values[i])).max(0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|v| fiber::scale(c, v)).collect(),
        }
    }

    /// Applies a constant frame rotation to every fiber value.
    pub fn rotated(&self, r: &Mat3) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|v| fiber::mat_vec(r, v)).collect(),
        }
    }
}

impl Field for Section {
    fn shape(&self) -> GridShape {
        self.shape
    }
    fn rank(&self) -> usize {
        0
    }
    fn values(&self) -> &[Vec3] {
        &self.values
    }
}

/// A section of `T*M^{(x)k} (x) E`: an `R^3` value per node per multi-index
/// `(i_1, .., i_k)`, flattened with `i_1` most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    shape: GridShape,
    rank: usize,
    values: Vec<Vec3>,
}

impl TensorField {
    pub fn zeros(shape: GridShape, rank: usize) -> Self {
        Self {
            shape,
            rank,
            values: vec![ZERO; shape.len() * shape.components(rank)],
        }
    }

    pub fn from_values(shape: GridShape, rank: usize, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != shape.len() * shape.components(rank) {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self { shape, rank, values })
    }

    pub fn from_section(v: &Section) -> Self {
        Self {
            shape: v.shape,
            rank: 0,
            values: v.values.clone(),
        }
    }

    pub fn into_section(self) -> Result<Section> {
        if self.rank != 0 {
            return Err(Error::RankMismatch {
                expected: 0,
                actual: self.rank,
            });
        }
        Ok(Section {
            shape: self.shape,
            values: self.values,
        })
    }

    /// Flat component offset of a multi-index within one node.
    pub fn multi_index(&self, index: &[usize]) -> usize {
        let m = self.shape.dim();
        index.iter().fold(0, |acc, &i| acc * m + i)
    }

    pub fn get(&self, node: usize, index: &[usize]) -> Vec3 {
        debug_assert_eq!(index.len(), self.rank);
        self.values[node * self.components() + self.multi_index(index)]
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|x| x.is_finite())
    }
}

impl Field for TensorField {
    fn shape(&self) -> GridShape {
        self.shape
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn values(&self) -> &[Vec3] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionFamily {
    Trivial,
    /// `A_i = theta_i J_i`, constant in space.
    ConstantSkew,
    /// `A_i(x) = theta_i sin(2 pi sum_j kappa_j x_j / L_j) J_i`.
    Curved,
}

impl ConnectionFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ConnectionFamily::Trivial => "trivial",
            ConnectionFamily::ConstantSkew => "constant_skew",
            ConnectionFamily::Curved => "curved",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionSpec {
    pub family: ConnectionFamily,
    /// Generator amplitude per manifold axis.
    pub theta: [f64; 3],
    /// Skew generator `J_i` per manifold axis.
    pub generators: [Mat3; 3],
    /// Profile frequency of the curved family.
    pub kappa: [i64; 3],
}

impl Default for ConnectionSpec {
    fn default() -> Self {
        Self::trivial()
    }
}

impl ConnectionSpec {
    pub fn trivial() -> Self {
        Self {
            family: ConnectionFamily::Trivial,
            theta: [0.0; 3],
            generators: [fiber::generator(2); 3],
            kappa: [0; 3],
        }
    }

    pub fn constant_skew(theta: [f64; 3], generators: [Mat3; 3]) -> Self {
        Self {
            family: ConnectionFamily::ConstantSkew,
            theta,
            generators,
            kappa: [0; 3],
        }
    }

    pub fn curved(theta: [f64; 3], generators: [Mat3; 3], kappa: [i64; 3]) -> Self {
        Self {
            family: ConnectionFamily::Curved,
            theta,
            generators,
            kappa,
        }
    }

    /// Scalar profile multiplying `theta_i J_i` at a point.
    pub fn profile(&self, x: &[f64; 3], lengths: &[f64]) -> f64 {
        match self.family {
            ConnectionFamily::Trivial => 0.0,
            ConnectionFamily::ConstantSkew => 1.0,
            ConnectionFamily::Curved => {
                let arg: f64 = lengths
                    .iter()
                    .enumerate()
                    .map(|(a, l)| self.kappa[a] as f64 * x[a] / l)
                    .sum();
                (2.0 * PI * arg).sin()
            }
        }
    }
}

/// Metric-compatible connection `D_i = d_i + A_i` with skew `A_i(x)`, and its
/// curvature `F_ij = d_i A_j - d_j A_i + [A_i, A_j]`.
#[derive(Clone, Debug)]
pub struct BundleConnection {
    shape: GridShape,
    coeffs: Vec<[Mat3; 3]>,
    /// `F_01, F_02, F_12` per node.
    curvature: Vec<[Mat3; 3]>,
    trivial: bool,
    spec: Option<ConnectionSpec>,
}

const SKEW_TOL: f64 = 1e-14;

pub fn build_connection(spec: &ConnectionSpec, grid: &ManifoldGrid) -> Result<BundleConnection> {
    let dim = grid.dim();
    for axis in 0..dim {
        let j = &spec.generators[axis];
        let scale = fiber::mat_norm(j).max(1.0);
        if !fiber::is_skew(j, SKEW_TOL * scale) || j.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonSkewGenerator { axis });
        }
        if !spec.theta[axis].is_finite() {
            return Err(Error::InvalidConnectionSpec(format!(
                "theta for axis {axis} is not finite"
            )));
        }
    }
    if spec.family == ConnectionFamily::Trivial {
        let mut conn = BundleConnection::trivial(grid);
        conn.spec = Some(*spec);
        return Ok(conn);
    }
    let lengths = grid.lengths().to_vec();
    let mut conn = BundleConnection::from_fn(grid, |x| {
        let f = spec.profile(x, &lengths);
        let mut a = [MAT_ZERO; 3];
        for axis in 0..dim {
            a[axis] = fiber::mat_scale(spec.theta[axis] * f, &spec.generators[axis]);
        }
        a
    })?;
    conn.spec = Some(*spec);
    Ok(conn)
}

#[inline]
fn pair_slot(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i + j - 1
}

impl BundleConnection {
    /// `A = 0`, `F = 0`.
    pub fn trivial(grid: &ManifoldGrid) -> Self {
        let n = grid.len();
        Self {
            shape: grid.shape(),
            coeffs: vec![[MAT_ZERO; 3]; n],
            curvature: vec![[MAT_ZERO; 3]; n],
            trivial: true,
            spec: Some(ConnectionSpec::trivial()),
        }
    }

    /// Builds a connection from coefficient matrices `x -> [A_1, .., A_m]`.
    pub fn from_fn<F>(grid: &ManifoldGrid, coeffs_at: F) -> Result<Self>
    where
        F: Fn(&[f64; 3]) -> [Mat3; 3] + Sync,
    {
        let dim = grid.dim();
        let coeffs: Vec<[Mat3; 3]> = par::map_nodes(grid.len(), |node| {
            let mut a = coeffs_at(&grid.coordinate(node));
            for m in a.iter_mut().skip(dim) {
                *m = MAT_ZERO;
            }
            a
        });
        for a in &coeffs {
            for (axis, m) in a.iter().enumerate().take(dim) {
                let scale = fiber::mat_norm(m).max(1.0);
                if !fiber::is_skew(m, SKEW_TOL * scale) {
                    return Err(Error::NonSkewGenerator { axis });
                }
            }
        }
        let trivial = coeffs.iter().all(|a| *a == [MAT_ZERO; 3]);
        let mut conn = Self {
            shape: grid.shape(),
            coeffs,
            curvature: vec![[MAT_ZERO; 3]; grid.len()],
            trivial,
            spec: None,
        };
        if !trivial {
            conn.curvature = conn.compute_curvature(grid);
        }
        Ok(conn)
    }

    fn compute_curvature(&self, grid: &ManifoldGrid) -> Vec<[Mat3; 3]> {
        let dim = grid.dim();
        par::map_nodes(grid.len(), |node| {
            let mut f = [MAT_ZERO; 3];
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let di_aj = diff_mat(grid, node, i, |nb| &self.coeffs[nb][j]);
                    let dj_ai = diff_mat(grid, node, j, |nb| &self.coeffs[nb][i]);
                    let bracket = fiber::commutator(&self.coeffs[node][i], &self.coeffs[node][j]);
                    f[pair_slot(i, j)] = fiber::mat_add(&fiber::mat_sub(&di_aj, &dj_ai), &bracket);
                }
            }
            f
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn spec(&self) -> Option<&ConnectionSpec> {
        self.spec.as_ref()
    }

    /// `A_i` at a node.
    #[inline]
    pub fn coeff(&self, node: usize, axis: usize) -> &Mat3 {
        &self.coeffs[node][axis]
    }

    /// `F_ij` at a node (`F_ji = -F_ij`, `F_ii = 0`).
    pub fn curvature(&self, node: usize, i: usize, j: usize) -> Mat3 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.curvature[node][pair_slot(i, j)],
            Ordering::Greater => fiber::mat_scale(-1.0, &self.curvature[node][pair_slot(j, i)]),
            Ordering::Equal => MAT_ZERO,
        }
    }

    /// Gauge-rotated connection `A_i -> R A_i R^T` for a constant rotation `R`.
    pub fn conjugated(&self, r: &Mat3) -> Self {
        let rt = fiber::transpose(r);
        let conj = |m: &Mat3| fiber::mat_mul(&fiber::mat_mul(r, m), &rt);
        Self {
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|a| a.map(|m| conj(&m))).collect(),
            curvature: self.curvature.iter().map(|f| f.map(|m| conj(&m))).collect(),
            trivial: self.trivial,
            spec: None,
        }
    }
}

pub(crate) fn diff_mat<'a, F>(grid: &ManifoldGrid, node: usize, axis: usize, f: F) -> Mat3
where
    F: Fn(usize) -> &'a Mat3,
{
    let p = f(grid.neighbor(node, axis, true));
    let m = f(grid.neighbor(node, axis, false));
    let inv2h = 0.5 / grid.spacing()[axis];
    let mut out = MAT_ZERO;
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (p[r][c] - m[r][c]) * inv2h;
        }
    }
    out
}

/// Tensor cross product `(S x T)_{I J} = S_I x T_J`; ranks add.
pub fn cross(s: &impl Field, t: &impl Field) -> Result<TensorField> {
    let shape = s.shape();
    if shape != t.shape() {
        return Err(Error::ShapeMismatch);
    }
    let (cs, ct) = (s.components(), t.components());
    let rank = s.rank() + t.rank();
    let mut values = vec![ZERO; shape.len() * cs * ct];
    par::fill_nodes(&mut values, cs * ct, |node, out| {
        let sv = s.node_values(node);
        let tv = t.node_values(node);
        for (a, sa) in sv.iter().enumerate() {
            for (b, tb) in tv.iter().enumerate() {
                out[a * ct + b] = fiber::cross(sa, tb);
            }
        }
    });
    TensorField::from_values(shape, rank, values)
}

/// Nodewise cross product of two sections.
pub fn cross_sections(a: &Section, b: &Section) -> Result<Section> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch);
    }
    let mut values = vec![ZERO; a.values.len()];
    par::fill_nodes(&mut values, 1, |node, out| {
        out[0] = fiber::cross(&a.values[node], &b.values[node]);
    });
    Ok(Section { shape: a.shape, values })
}

/// One contraction in a `*`-product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pairing {
    /// Contract manifold slot `.0` of `S` with slot `.1` of `T` through `g^{ij}`.
    Manifold(usize, usize),
    /// Contract the two fiber slots through `h` (the Euclidean dot in the frame).
    Fiber,
}

/// Result of a `*`-contraction: free manifold slots of `S` then of `T`, and a
/// fiber that is scalar (`fiber_dim = 1`) when the fibers were contracted or
/// `E (x) E` (`fiber_dim = 9`) otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct StarField {
    shape: GridShape,
    rank: usize,
    fiber_dim: usize,
    values: Vec<f64>,
}

impl StarField {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_values(&self, node: usize) -> &[f64] {
        let c = self.shape.components(self.rank) * self.fiber_dim;
        &self.values[node * c..(node + 1) * c]
    }

    /// Pointwise norm using `g^{ij}` on manifold slots and `h` on fibers.
    pub fn pointwise_norm(&self, grid: &ManifoldGrid) -> Result<Vec<f64>> {
        if grid.shape() != self.shape {
            return Err(Error::ShapeMismatch);
        }
        let m = self.shape.dim();
        Ok(par::map_nodes(grid.len(), |node| {
            components_norm_sq(self.node_values(node), self.rank, m, self.fiber_dim, grid, node).sqrt()
        }))
    }
}

/// `S * T` with the listed contractions.
pub fn star_contract(s: &impl Field, t: &impl Field, pairings: &[Pairing], grid: &ManifoldGrid) -> Result<StarField> {
    let shape = s.shape();
    if shape != t.shape() || shape != grid.shape() {
        return Err(Error::ShapeMismatch);
    }
    let (ks, kt) = (s.rank(), t.rank());
    let mut used_s = vec![false; ks];
    let mut used_t = vec![false; kt];
    let mut fiber_pairs = 0;
    for p in pairings {
        match *p {
            Pairing::Manifold(a, b) => {
                if a >= ks || b >= kt {
                    return Err(Error::InvalidPairing(format!(
                        "slot pair ({a}, {b}) out of range for ranks ({ks}, {kt})"
                    )));
                }
                if used_s[a] || used_t[b] {
                    return Err(Error::InvalidPairing(format!("slot pair ({a}, {b}) reuses a slot")));
                }
                used_s[a] = true;
                used_t[b] = true;
            }
            Pairing::Fiber => fiber_pairs += 1,
        }
    }
    if fiber_pairs > 1 {
        return Err(Error::InvalidPairing("fiber slots can be contracted once".into()));
    }
    let manifold: Vec<(usize, usize)> = pairings
        .iter()
        .filter_map(|p| match *p {
            Pairing::Manifold(a, b) => Some((a, b)),
            Pairing::Fiber => None,
        })
        .collect();
    let fiber_dim = if fiber_pairs == 1 { 1 } else { 9 };
    let free_s: Vec<usize> = (0..ks).filter(|a| !used_s[*a]).collect();
    let free_t: Vec<usize> = (0..kt).filter(|b| !used_t[*b]).collect();
    let rank = free_s.len() + free_t.len();
    let m = shape.dim();
    let per_node = shape.components(rank) * fiber_dim;

    let digits = |mut flat: usize, k: usize| {
        let mut d = [0usize; 8];
        for slot in (0..k).rev() {
            d[slot] = flat % m;
            flat /= m;
        }
        d
    };

    let mut values = vec![0.0; shape.len() * per_node];
    par::fill_nodes(&mut values, per_node, |node, out| {
        let ginv = grid.inverse_metric(node);
        let sv = s.node_values(node);
        let tv = t.node_values(node);
        for (ia, sa) in sv.iter().enumerate() {
            let di = digits(ia, ks);
            for (jb, tb) in tv.iter().enumerate() {
                let dj = digits(jb, kt);
                let mut w = 1.0;
                for &(a, b) in &manifold {
                    w *= ginv[di[a]][dj[b]];
                }
                if w == 0.0 {
                    continue;
                }
                let free = free_s
                    .iter()
                    .map(|&a| di[a])
                    .chain(free_t.iter().map(|&b| dj[b]))
                    .fold(0, |acc, i| acc * m + i);
                if fiber_dim == 1 {
                    out[free] += w * fiber::dot(sa, tb);
                } else {
                    for al in 0..3 {
                        for be in 0..3 {
                            out[free * 9 + al * 3 + be] += w * sa[al] * tb[be];
                        }
                    }
                }
            }
        }
    });
    Ok(StarField {
        shape,
        rank,
        fiber_dim,
        values,
    })
}

/// Squared pointwise norm of one node's components (`m^rank * fiber_dim`
/// reals, fiber index fastest): manifold slots contracted with `g^{ij}`.
pub(crate) fn components_norm_sq(
    comps: &[f64],
    rank: usize,
    m: usize,
    fiber_dim: usize,
    grid: &ManifoldGrid,
    node: usize,
) -> f64 {
    let ginv = grid.inverse_metric(node);
    if rank == 0 {
        return comps.iter().map(|x| x * x).sum();
    }
    if grid.is_diagonal() {
        let count = m.pow(rank as u32);
        let mut total = 0.0;
        for idx in 0..count {
            let mut w = 1.0;
            let mut rest = idx;
            for _ in 0..rank {
                let i = rest % m;
                rest /= m;
                w *= ginv[i][i];
            }
            let f = &comps[idx * fiber_dim..(idx + 1) * fiber_dim];
            total += w * f.iter().map(|x| x * x).sum::<f64>();
        }
        return total;
    }
    // Raise one slot at a time, then pair with the original components.
    let mut raised = comps.to_vec();
    let mut scratch = vec![0.0; comps.len()];
    let count = m.pow(rank as u32);
    for slot in 0..rank {
        let stride = m.pow((rank - 1 - slot) as u32);
        scratch.iter_mut().for_each(|x| *x = 0.0);
        for idx in 0..count {
            let i = (idx / stride) % m;
            let base = idx - i * stride;
            for j in 0..m {
                let w = ginv[i][j];
                if w == 0.0 {
                    continue;
                }
                let src = (base + j * stride) * fiber_dim;
                let dst = idx * fiber_dim;
                for f in 0..fiber_dim {
                    scratch[dst + f] += w * raised[src + f];
                }
            }
        }
        std::mem::swap(&mut raised, &mut scratch);
    }
    comps.iter().zip(&raised).map(|(a, b)| a * b).sum()
}

/// Squared pointwise norm of a tensor field at a node.
#[inline]
pub(crate) fn tensor_norm_sq(t: &impl Field, grid: &ManifoldGrid, node: usize) -> f64 {
    let vals = t.node_values(node);
    components_norm_sq(vals.as_flattened(), t.rank(), t.shape().dim(), 3, grid, node)
}

/// Pointwise norm `|T|(x)`.
pub fn fiber_norm(t: &impl Field, grid: &ManifoldGrid) -> Result<Vec<f64>> {
    if t.shape() != grid.shape() {
        return Err(Error::ShapeMismatch);
    }
    Ok(par::map_nodes(grid.len(), |node| tensor_norm_sq(t, grid, node).sqrt()))
}
