//! Covariant differential operators and defect measurements for the
//! identities they satisfy in the continuum.
//!
//! Index convention: the slot added by a covariant derivative is appended
//! last, so `(D^2 V)_{ij} = D_j D_i V - Gamma^r_{ji} (DV)_r`.

use crate::bundle::{self, BundleConnection, Field, Section, TensorField};
use crate::error::{Error, Result};
use crate::fiber::{self, Mat3, Vec3, MAT_ZERO, ZERO};
use crate::geometry::{manifold_curvature, ManifoldGrid};
use crate::par;

fn check_shapes(t: &impl Field, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<()> {
    if t.shape() != grid.shape() || conn.shape() != grid.shape() {
        return Err(Error::ShapeMismatch);
    }
    Ok(())
}

/// `(DT)_{i_1..i_k,p} = d_p T_I + A_p T_I - sum_l Gamma^q_{p i_l} T_{..q..}`.
pub fn covariant_derivative(t: &impl Field, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<TensorField> {
    check_shapes(t, grid, conn)?;
    let m = grid.dim();
    let k = t.rank();
    let c = t.components();
    let src = t.values();
    let flat = grid.is_flat();
    let trivial = conn.is_trivial();
    let strides: Vec<usize> = (0..k).map(|l| m.pow((k - 1 - l) as u32)).collect();
    let inv2h: Vec<f64> = grid.spacing().iter().map(|h| 0.5 / h).collect();

    let mut values = vec![ZERO; src.len() * m];
    par::fill_nodes(&mut values, c * m, |node, out| {
        let here = &src[node * c..(node + 1) * c];
        for p in 0..m {
            let fwd = grid.neighbor(node, p, true) * c;
            let bwd = grid.neighbor(node, p, false) * c;
            let a = conn.coeff(node, p);
            for idx in 0..c {
                let mut d = fiber::scale(inv2h[p], &fiber::sub(&src[fwd + idx], &src[bwd + idx]));
                if !trivial {
                    d = fiber::add(&d, &fiber::mat_vec(a, &here[idx]));
                }
                if !flat {
                    for (slot, &stride) in strides.iter().enumerate() {
                        let _ = slot;
                        let il = (idx / stride) % m;
                        let base = idx - il * stride;
                        for q in 0..m {
                            let gamma = grid.christoffel(node, q, p, il);
                            if gamma != 0.0 {
                                d = fiber::axpy(-gamma, &here[base + q * stride], &d);
                            }
                        }
                    }
                }
                out[idx * m + p] = d;
            }
        }
    });
    TensorField::from_values(t.shape(), k + 1, values)
}

/// `D^k V` by `k`-fold application of [`covariant_derivative`].
pub fn iterated_derivative(v: &Section, k: usize, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<TensorField> {
    check_shapes(v, grid, conn)?;
    let required = 2 * k + 4;
    let actual = grid.shape().min_size();
    if actual < required {
        return Err(Error::ResolutionTooSmall { k, required, actual });
    }
    let mut out = TensorField::from_section(v);
    for _ in 0..k {
        out = covariant_derivative(&out, grid, conn)?;
    }
    Ok(out)
}

/// Trace `g^{ij} (D^2 T)_{.. ij}` of a rank-`k+2` field over its last two slots.
fn trace_last_two(d2: &TensorField, grid: &ManifoldGrid) -> TensorField {
    let m = grid.dim();
    let rank = d2.rank() - 2;
    let c = grid.shape().components(rank);
    let diagonal = grid.is_diagonal();
    let mut values = vec![ZERO; grid.len() * c];
    par::fill_nodes(&mut values, c, |node, out| {
        let ginv = grid.inverse_metric(node);
        let vals = d2.node_values(node);
        for (idx, o) in out.iter_mut().enumerate() {
            let block = &vals[idx * m * m..(idx + 1) * m * m];
            let mut acc = ZERO;
            for i in 0..m {
                for j in 0..m {
                    if diagonal && i != j {
                        continue;
                    }
                    acc = fiber::axpy(ginv[i][j], &block[i * m + j], &acc);
                }
            }
            *o = acc;
        }
    });
    TensorField::from_values(grid.shape(), rank, values).expect("trace shape")
}

/// Bundle Laplacian `Delta T = g^{ij} (D^2 T)_{ij}` of a field of any rank.
pub fn laplacian(t: &impl Field, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<TensorField> {
    let d1 = covariant_derivative(t, grid, conn)?;
    let d2 = covariant_derivative(&d1, grid, conn)?;
    Ok(trace_last_two(&d2, grid))
}

/// Laplacian of a section. Evaluates the trace of the nested second
/// derivative without materialising `D^2 V`.
pub fn laplacian_section(v: &Section, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<Section> {
    let dv = covariant_derivative(v, grid, conn)?;
    Ok(trace_of_derivative(&dv, grid, conn))
}

/// `g^{ij} (D(DV))_{ij}` from a precomputed `DV`.
fn trace_of_derivative(dv: &TensorField, grid: &ManifoldGrid, conn: &BundleConnection) -> Section {
    let m = grid.dim();
    let flat = grid.is_flat();
    let diagonal = grid.is_diagonal();
    let trivial = conn.is_trivial();
    let inv2h: Vec<f64> = grid.spacing().iter().map(|h| 0.5 / h).collect();
    let src = dv.values();
    let mut values = vec![ZERO; grid.len()];
    par::fill_nodes(&mut values, 1, |node, out| {
        let ginv = grid.inverse_metric(node);
        let here = &src[node * m..(node + 1) * m];
        let mut acc = ZERO;
        for i in 0..m {
            for j in 0..m {
                if diagonal && i != j {
                    continue;
                }
                // (D(DV))_{ij} = d_j (DV)_i + A_j (DV)_i - Gamma^q_{ji} (DV)_q
                let fwd = grid.neighbor(node, j, true) * m;
                let bwd = grid.neighbor(node, j, false) * m;
                let mut d = fiber::scale(inv2h[j], &fiber::sub(&src[fwd + i], &src[bwd + i]));
                if !trivial {
                    d = fiber::add(&d, &fiber::mat_vec(conn.coeff(node, j), &here[i]));
                }
                if !flat {
                    for (q, hq) in here.iter().enumerate() {
                        let gamma = grid.christoffel(node, q, j, i);
                        if gamma != 0.0 {
                            d = fiber::axpy(-gamma, hq, &d);
                        }
                    }
                }
                acc = fiber::axpy(ginv[i][j], &d, &acc);
            }
        }
        out[0] = acc;
    });
    Section::from_values(grid.shape(), values).expect("laplacian shape")
}

/// First and second covariant derivatives of a section together with its Laplacian.
#[derive(Clone, Debug)]
pub struct SectionDerivatives {
    pub dv: TensorField,
    pub d2v: TensorField,
    pub laplacian: Section,
}

impl SectionDerivatives {
    pub fn compute(v: &Section, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<Self> {
        let dv = covariant_derivative(v, grid, conn)?;
        let d2v = covariant_derivative(&dv, grid, conn)?;
        let laplacian = trace_last_two(&d2v, grid).into_section()?;
        Ok(Self { dv, d2v, laplacian })
    }
}

/// Max-node norm of `D(f1 x f2) - (Df1) x f2 - f1 x (Df2)`.
pub fn leibniz_defect(f1: &Section, f2: &Section, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<f64> {
    check_shapes(f1, grid, conn)?;
    check_shapes(f2, grid, conn)?;
    let prod = bundle::cross_sections(f1, f2)?;
    let d_prod = covariant_derivative(&prod, grid, conn)?;
    let d1 = covariant_derivative(f1, grid, conn)?;
    let d2 = covariant_derivative(f2, grid, conn)?;
    let m = grid.dim();
    let mut defect = vec![ZERO; grid.len() * m];
    par::fill_nodes(&mut defect, m, |node, out| {
        for (p, o) in out.iter_mut().enumerate() {
            let lhs = d_prod.get(node, &[p]);
            let a = fiber::cross(&d1.get(node, &[p]), &f2.values()[node]);
            let b = fiber::cross(&f1.values()[node], &d2.get(node, &[p]));
            *o = fiber::sub(&fiber::sub(&lhs, &a), &b);
        }
    });
    let defect = TensorField::from_values(grid.shape(), 1, defect)?;
    Ok(par::max_by(grid.len(), |node| bundle::tensor_norm_sq(&defect, grid, node).sqrt()).max(0.0))
}

/// Max-node norm over `i < j` of `D_i D_j V - D_j D_i V - F_ij V`.
///
/// With the slot convention of this module `D_i D_j V - D_j D_i V` is
/// `(D^2 V)_{ji} - (D^2 V)_{ij}`; the symmetric Christoffel part cancels.
pub fn ricci_defect(v: &Section, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<f64> {
    check_shapes(v, grid, conn)?;
    let dv = covariant_derivative(v, grid, conn)?;
    let d2v = covariant_derivative(&dv, grid, conn)?;
    let m = grid.dim();
    Ok(par::max_by(grid.len(), |node| {
        let mut worst: f64 = 0.0;
        let vn = &v.values()[node];
        for i in 0..m {
            for j in (i + 1)..m {
                let commutator = fiber::sub(&d2v.get(node, &[j, i]), &d2v.get(node, &[i, j]));
                let fv = fiber::mat_vec(&conn.curvature(node, i, j), vn);
                worst = worst.max(fiber::norm(&fiber::sub(&commutator, &fv)));
            }
        }
        worst
    })
    .max(0.0))
}

/// Max-node value of `|d_p <u,v> - <(Du)_p, v> - <u, (Dv)_p>|` over `p`.
pub fn metric_compatibility_defect(
    u: &Section,
    v: &Section,
    grid: &ManifoldGrid,
    conn: &BundleConnection,
) -> Result<f64> {
    check_shapes(u, grid, conn)?;
    check_shapes(v, grid, conn)?;
    let du = covariant_derivative(u, grid, conn)?;
    let dv = covariant_derivative(v, grid, conn)?;
    let inner: Vec<f64> = par::map_nodes(grid.len(), |node| fiber::dot(&u.values()[node], &v.values()[node]));
    Ok(par::max_by(grid.len(), |node| {
        (0..grid.dim())
            .map(|p| {
                let d = grid.central_diff(node, p, |nb| inner[nb]);
                (d - fiber::dot(&du.get(node, &[p]), &v.values()[node])
                    - fiber::dot(&u.values()[node], &dv.get(node, &[p])))
                .abs()
            })
            .fold(0.0, f64::max)
    })
    .max(0.0))
}

/// `int <Delta V, W> + int g^{ij} <(DV)_i, (DW)_j>`, which vanishes for the
/// continuum operators on a closed manifold.
pub fn integration_by_parts_defect(
    v: &Section,
    w: &Section,
    grid: &ManifoldGrid,
    conn: &BundleConnection,
) -> Result<f64> {
    let lap = laplacian_section(v, grid, conn)?;
    let dv = covariant_derivative(v, grid, conn)?;
    let dw = covariant_derivative(w, grid, conn)?;
    let m = grid.dim();
    Ok(par::sum_by(grid.len(), |node| {
        let ginv = grid.inverse_metric(node);
        let mut s = fiber::dot(&lap.values()[node], &w.values()[node]);
        for i in 0..m {
            for j in 0..m {
                if ginv[i][j] != 0.0 {
                    s += ginv[i][j] * fiber::dot(&dv.get(node, &[i]), &dw.get(node, &[j]));
                }
            }
        }
        s * grid.quadrature_weight(node)
    }))
}

/// Both sides of the integrated Bochner identity
///
/// `||Delta V||^2 = ||D^2 V||^2 + 2 int g^{ii'} g^{kk'} <V_{;i'}, F_{ki} V_{;k'}>
///  + int g^{ii'} g^{kk'} <V_{;i'}, (DF)_{ki,k'} V>
///  - int g^{ii'} g^{kk'} R^h_{k'ik} <V_{;i'}, V_{;h}>`,
///
/// obtained by two integrations by parts and one exchange of covariant
/// derivatives. The last term is `+int Ric(DV, DV)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BochnerTerms {
    /// `||Delta V||_2^2`
    pub laplacian_sq: f64,
    /// `||D^2 V||_2^2`
    pub hessian_sq: f64,
    /// `DV * DV * R^E` term (including its factor 2).
    pub bundle_curvature: f64,
    /// `DV * V * D R^E` term.
    pub bundle_curvature_derivative: f64,
    /// `DV * DV * R^M` term.
    pub manifold_curvature: f64,
}

impl BochnerTerms {
    pub fn lhs(&self) -> f64 {
        self.laplacian_sq
    }

    pub fn rhs(&self) -> f64 {
        self.hessian_sq + self.bundle_curvature + self.bundle_curvature_derivative + self.manifold_curvature
    }

    /// `|LHS - RHS| / max(LHS, 1)`
    pub fn residual(&self) -> f64 {
        (self.lhs() - self.rhs()).abs() / self.lhs().max(1.0)
    }
}

/// `(DF)_{ki,p} = d_p F_ki + [A_p, F_ki] - Gamma^q_{pk} F_qi - Gamma^q_{pi} F_kq`.
fn curvature_derivative(
    grid: &ManifoldGrid,
    conn: &BundleConnection,
    node: usize,
    k: usize,
    i: usize,
    p: usize,
) -> Mat3 {
    if k == i {
        return MAT_ZERO;
    }
    let fp = conn.curvature(grid.neighbor(node, p, true), k, i);
    let fm = conn.curvature(grid.neighbor(node, p, false), k, i);
    let mut d = fiber::mat_scale(0.5 / grid.spacing()[p], &fiber::mat_sub(&fp, &fm));
    d = fiber::mat_add(&d, &fiber::commutator(conn.coeff(node, p), &conn.curvature(node, k, i)));
    if !grid.is_flat() {
        for q in 0..grid.dim() {
            let g1 = grid.christoffel(node, q, p, k);
            if g1 != 0.0 {
                d = fiber::mat_sub(&d, &fiber::mat_scale(g1, &conn.curvature(node, q, i)));
            }
            let g2 = grid.christoffel(node, q, p, i);
            if g2 != 0.0 {
                d = fiber::mat_sub(&d, &fiber::mat_scale(g2, &conn.curvature(node, k, q)));
            }
        }
    }
    d
}

pub fn bochner_terms(v: &Section, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<BochnerTerms> {
    check_shapes(v, grid, conn)?;
    let ders = SectionDerivatives::compute(v, grid, conn)?;
    let m = grid.dim();
    let riemann = manifold_curvature(grid);
    let flat = grid.is_flat();
    let trivial = conn.is_trivial();

    let laplacian_sq = par::sum_by(grid.len(), |node| {
        fiber::norm_sq(&ders.laplacian.values()[node]) * grid.quadrature_weight(node)
    });
    let hessian_sq = par::sum_by(grid.len(), |node| {
        bundle::tensor_norm_sq(&ders.d2v, grid, node) * grid.quadrature_weight(node)
    });

    let dv = &ders.dv;
    let (bundle_curvature, bundle_curvature_derivative) = if trivial {
        (0.0, 0.0)
    } else {
        let first = par::sum_by(grid.len(), |node| {
            let ginv = grid.inverse_metric(node);
            let mut s = 0.0;
            for i in 0..m {
                for ip in 0..m {
                    if ginv[i][ip] == 0.0 {
                        continue;
                    }
                    let dvi = dv.get(node, &[ip]);
                    for k in 0..m {
                        for kp in 0..m {
                            if ginv[k][kp] == 0.0 || k == i {
                                continue;
                            }
                            let fdv = fiber::mat_vec(&conn.curvature(node, k, i), &dv.get(node, &[kp]));
                            s += ginv[i][ip] * ginv[k][kp] * fiber::dot(&dvi, &fdv);
                        }
                    }
                }
            }
            2.0 * s * grid.quadrature_weight(node)
        });
        let second = par::sum_by(grid.len(), |node| {
            let ginv = grid.inverse_metric(node);
            let vn = &v.values()[node];
            let mut s = 0.0;
            for i in 0..m {
                for ip in 0..m {
                    if ginv[i][ip] == 0.0 {
                        continue;
                    }
                    let dvi = dv.get(node, &[ip]);
                    for k in 0..m {
                        for kp in 0..m {
                            if ginv[k][kp] == 0.0 || k == i {
                                continue;
                            }
                            let dfv = fiber::mat_vec(&curvature_derivative(grid, conn, node, k, i, kp), vn);
                            s += ginv[i][ip] * ginv[k][kp] * fiber::dot(&dvi, &dfv);
                        }
                    }
                }
            }
            s * grid.quadrature_weight(node)
        });
        (first, second)
    };

    let manifold_term = if flat {
        0.0
    } else {
        par::sum_by(grid.len(), |node| {
            let ginv = grid.inverse_metric(node);
            // trace_h_i = g^{kk'} R^h_{k'ik}
            let mut trace = [[0.0; 3]; 3];
            for (h, row) in trace.iter_mut().enumerate().take(m) {
                for (i, x) in row.iter_mut().enumerate().take(m) {
                    let mut acc = 0.0;
                    for k in 0..m {
                        for kp in 0..m {
                            if ginv[k][kp] != 0.0 {
                                acc += ginv[k][kp] * riemann.mixed(node, h, kp, i, k);
                            }
                        }
                    }
                    *x = acc;
                }
            }
            let mut s = 0.0;
            for i in 0..m {
                for ip in 0..m {
                    if ginv[i][ip] == 0.0 {
                        continue;
                    }
                    let dvi: Vec3 = dv.get(node, &[ip]);
                    for (h, row) in trace.iter().enumerate().take(m) {
                        if row[i] != 0.0 {
                            s -= ginv[i][ip] * row[i] * fiber::dot(&dvi, &dv.get(node, &[h]));
                        }
                    }
                }
            }
            s * grid.quadrature_weight(node)
        })
    };

    Ok(BochnerTerms {
        laplacian_sq,
        hessian_sq,
        bundle_curvature,
        bundle_curvature_derivative,
        manifold_curvature: manifold_term,
    })
}

/// `|LHS - RHS| / max(LHS, 1)` for the integrated Bochner identity.
pub fn bochner_residual(v: &Section, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<f64> {
    Ok(bochner_terms(v, grid, conn)?.residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{build_connection, ConnectionSpec};
    use crate::fiber::{generator, unit};
    use crate::geometry::{build_grid, MetricSpec};
    use std::f64::consts::PI;

    fn flat(n: usize) -> ManifoldGrid {
        build_grid(&MetricSpec::flat(), &[n, n], &[1.0, 1.0]).unwrap()
    }

    fn sine_mode(grid: &ManifoldGrid) -> Section {
        Section::from_fn(grid, |x| [(2.0 * PI * x[0]).sin(), 0.0, 0.0])
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let grid = flat(16);
        let conn = BundleConnection::trivial(&grid);
        let v = Section::constant(grid.shape(), [0.3, -2.0, 1.0]);
        let dv = covariant_derivative(&v, &grid, &conn).unwrap();
        assert_eq!(dv.rank(), 1);
        assert!(dv.values().iter().all(|x| *x == ZERO));
    }

    #[test]
    fn derivative_matches_discrete_symbol() {
        let grid = flat(32);
        let conn = BundleConnection::trivial(&grid);
        let h = grid.spacing()[0];
        let dv = covariant_derivative(&sine_mode(&grid), &grid, &conn).unwrap();
        let symbol = (2.0 * PI * h).sin() / h;
        for node in 0..grid.len() {
            let x = grid.coordinate(node);
            let exact = symbol * (2.0 * PI * x[0]).cos();
            assert!((dv.get(node, &[0])[0] - exact).abs() < 1e-12);
            assert_eq!(dv.get(node, &[1]), ZERO);
        }
    }

    #[test]
    fn constant_skew_connection_acts_on_constants() {
        let grid = flat(16);
        let theta = 0.9;
        let conn = build_connection(
            &ConnectionSpec::constant_skew([theta, 0.0, 0.0], [generator(2); 3]),
            &grid,
        )
        .unwrap();
        let v = Section::constant(grid.shape(), unit(0));
        let dv = covariant_derivative(&v, &grid, &conn).unwrap();
        let lap = laplacian_section(&v, &grid, &conn).unwrap();
        for node in 0..grid.len() {
            assert_eq!(dv.get(node, &[0]), fiber::scale(theta, &unit(1)));
            assert_eq!(dv.get(node, &[1]), ZERO);
            assert_eq!(lap.values()[node], fiber::scale(-theta * theta, &unit(0)));
        }
    }

    #[test]
    fn iterated_derivative_basics() {
        let grid = flat(16);
        let conn = BundleConnection::trivial(&grid);
        let v = sine_mode(&grid);
        let d0 = iterated_derivative(&v, 0, &grid, &conn).unwrap();
        assert_eq!(d0, TensorField::from_section(&v));
        let d1 = iterated_derivative(&v, 1, &grid, &conn).unwrap();
        assert_eq!(d1, covariant_derivative(&v, &grid, &conn).unwrap());
        assert!(matches!(
            iterated_derivative(&v, 7, &grid, &conn),
            Err(Error::ResolutionTooSmall {
                k: 7,
                required: 18,
                actual: 16
            })
        ));
    }

    #[test]
    fn second_derivative_is_product_of_symbols() {
        let grid = flat(32);
        let conn = BundleConnection::trivial(&grid);
        // V = sin(2 pi x) cos(4 pi y) e_2
        let v = Section::from_fn(&grid, |x| [0.0, (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos(), 0.0]);
        let d2 = iterated_derivative(&v, 2, &grid, &conn).unwrap();
        let h = grid.spacing()[0];
        let s1 = (2.0 * PI * h).sin() / h;
        let s2 = (4.0 * PI * h).sin() / h;
        for node in 0..grid.len() {
            let x = grid.coordinate(node);
            let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
            let (sy, cy) = (4.0 * PI * x[1]).sin_cos();
            let expected = [
                [-s1 * s1 * sx * cy, -s1 * s2 * cx * sy],
                [-s1 * s2 * cx * sy, -s2 * s2 * sx * cy],
            ];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((d2.get(node, &[i, j])[1] - expected[i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn laplacian_of_sine_is_discrete_eigenvalue() {
        let grid = flat(32);
        let conn = BundleConnection::trivial(&grid);
        let v = sine_mode(&grid);
        let lap = laplacian_section(&v, &grid, &conn).unwrap();
        let h = grid.spacing()[0];
        // Nested central differences: symbol (sin(2 pi h) / h)^2.
        let s = ((2.0 * PI * h).sin() / h).powi(2);
        for node in 0..grid.len() {
            let expected = -s * v.values()[node][0];
            assert!((lap.values()[node][0] - expected).abs() < 1e-10);
        }
        assert!((s - 4.0 * PI * PI).abs() < 4.0 * PI * PI * 0.02);
        let zero = laplacian_section(&Section::constant(grid.shape(), [1.0, 2.0, 3.0]), &grid, &conn).unwrap();
        assert!(zero.values().iter().all(|x| *x == ZERO));
    }

    #[test]
    fn fast_and_general_laplacian_agree() {
        let spec = MetricSpec::conformal(0.3, [1, 2, 1]);
        let grid = build_grid(&spec, &[10, 12, 8], &[1.0, 1.2, 0.8]).unwrap();
        let conn = build_connection(
            &ConnectionSpec::curved([0.4, -0.3, 0.5], [generator(0), generator(1), generator(2)], [1, 1, 0]),
            &grid,
        )
        .unwrap();
        let v = Section::from_fn(&grid, |x| [x[0].sin(), (2.0 * PI * x[1]).cos(), (x[2] * 7.0).sin()]);
        let fast = laplacian_section(&v, &grid, &conn).unwrap();
        let general = laplacian(&v, &grid, &conn).unwrap();
        let traced = SectionDerivatives::compute(&v, &grid, &conn).unwrap().laplacian;
        for node in 0..grid.len() {
            let a = fast.values()[node];
            assert!(fiber::norm(&fiber::sub(&a, &general.values()[node])) < 1e-10);
            assert!(fiber::norm(&fiber::sub(&a, &traced.values()[node])) < 1e-10);
        }
    }

    #[test]
    fn trivial_leibniz_and_ricci_defects() {
        let grid = flat(16);
        let conn = BundleConnection::trivial(&grid);
        let c1 = Section::constant(grid.shape(), [1.0, 0.5, -0.2]);
        let c2 = Section::constant(grid.shape(), [0.0, 2.0, 1.0]);
        assert_eq!(leibniz_defect(&c1, &c2, &grid, &conn).unwrap(), 0.0);
        let f = Section::from_fn(&grid, |x| [(2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).cos(), 0.3]);
        assert!(leibniz_defect(&f, &f, &grid, &conn).unwrap() < 1e-12);
        assert!(ricci_defect(&f, &grid, &conn).unwrap() <= 1e-12);
    }

    #[test]
    fn constant_skew_ricci_defect_vanishes() {
        let grid = flat(16);
        let conn = build_connection(
            &ConnectionSpec::constant_skew([0.7, -0.4, 0.0], [generator(2); 3]),
            &grid,
        )
        .unwrap();
        let f = Section::from_fn(&grid, |x| [(2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).cos(), 0.3]);
        assert!(ricci_defect(&f, &grid, &conn).unwrap() <= 1e-12);
    }

    #[test]
    fn metric_compatibility_of_constants_is_exact() {
        let grid = flat(16);
        let conn = build_connection(
            &ConnectionSpec::curved([0.5, 0.9, 0.0], [generator(0), generator(2), generator(2)], [1, 1, 0]),
            &grid,
        )
        .unwrap();
        let u = Section::constant(grid.shape(), [1.0, 2.0, 3.0]);
        let v = Section::constant(grid.shape(), [-1.0, 0.5, 2.0]);
        assert!(metric_compatibility_defect(&u, &v, &grid, &conn).unwrap() < 1e-13);
    }

    #[test]
    fn bochner_vanishes_for_zero_section() {
        let grid = flat(16);
        let conn = BundleConnection::trivial(&grid);
        let terms = bochner_terms(&Section::zeros(grid.shape()), &grid, &conn).unwrap();
        assert_eq!(terms.lhs(), 0.0);
        assert_eq!(terms.rhs(), 0.0);
        assert_eq!(terms.residual(), 0.0);
    }

    fn curved_setup(n: usize) -> (ManifoldGrid, BundleConnection) {
        let grid = build_grid(&MetricSpec::conformal(0.2, [1, 1, 0]), &[n, n], &[1.0, 1.0]).unwrap();
        let conn = build_connection(
            &ConnectionSpec::curved([0.8, -0.6, 0.0], [generator(0), generator(2), generator(2)], [1, 0, 0]),
            &grid,
        )
        .unwrap();
        (grid, conn)
    }

    fn smooth_pair(grid: &ManifoldGrid) -> (Section, Section) {
        let t = 2.0 * PI;
        let a = Section::from_fn(grid, |x| {
            [
                (t * x[0]).sin() + 0.3 * (t * x[1]).cos(),
                (t * (x[0] + x[1])).cos(),
                0.5 * (2.0 * t * x[1]).sin(),
            ]
        });
        let b = Section::from_fn(grid, |x| {
            [
                (t * x[1]).cos(),
                0.2 + (t * x[0]).sin() * (t * x[1]).sin(),
                (t * x[0]).cos(),
            ]
        });
        (a, b)
    }

    fn order(coarse: f64, fine: f64) -> f64 {
        (coarse / fine).log2()
    }

    #[test]
    fn leibniz_and_ricci_converge_at_second_order() {
        let mut leibniz = Vec::new();
        let mut ricci = Vec::new();
        for n in [32, 64] {
            let (grid, conn) = curved_setup(n);
            let (a, b) = smooth_pair(&grid);
            leibniz.push(leibniz_defect(&a, &b, &grid, &conn).unwrap());
            ricci.push(ricci_defect(&a, &grid, &conn).unwrap());
        }
        assert!(order(leibniz[0], leibniz[1]) >= 1.9, "{leibniz:?}");
        assert!(order(ricci[0], ricci[1]) >= 1.9, "{ricci:?}");
    }

    #[test]
    fn flat_trivial_bochner_and_integration_by_parts_are_exact() {
        let grid = flat(32);
        let conn = BundleConnection::trivial(&grid);
        let (a, b) = smooth_pair(&grid);
        let terms = bochner_terms(&a, &grid, &conn).unwrap();
        assert!(terms.residual() < 1e-12, "{terms:?}");
        assert!(integration_by_parts_defect(&a, &b, &grid, &conn).unwrap().abs() < 1e-10);
    }

    #[test]
    fn curved_bochner_residual_shrinks_under_refinement() {
        let mut residuals = Vec::new();
        for n in [32, 64] {
            let (grid, conn) = curved_setup(n);
            let (a, _) = smooth_pair(&grid);
            residuals.push(bochner_residual(&a, &grid, &conn).unwrap());
        }
        assert!(residuals[0] / residuals[1] >= 3.5, "{residuals:?}");
    }

    #[test]
    fn curved_metric_compatibility_is_second_order() {
        let mut d = Vec::new();
        for n in [32, 64] {
            let (grid, conn) = curved_setup(n);
            let (a, b) = smooth_pair(&grid);
            d.push(metric_compatibility_defect(&a, &b, &grid, &conn).unwrap());
        }
        assert!(order(d[0], d[1]) >= 1.9, "{d:?}");
    }
}
