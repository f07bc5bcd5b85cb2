//! Lebesgue and Sobolev norms of bundle-valued fields and the
//! Gagliardo-Nirenberg ratio lab.

use crate::bundle::{self, BundleConnection, Field, Section, TensorField};
use crate::calculus::covariant_derivative;
use crate::error::{Error, Result};
use crate::geometry::ManifoldGrid;
use crate::init::random_bandlimited;
use crate::par;

/// Tolerance on the exponent balance `k/p = j/r + (k-j)/q`.
pub const BALANCE_TOL: f64 = 1e-12;

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} must satisfy p >= 1")));
    }
    Ok(())
}

fn check_shape(t: &impl Field, grid: &ManifoldGrid) -> Result<()> {
    if t.shape() != grid.shape() {
        return Err(Error::ShapeMismatch);
    }
    Ok(())
}

/// `(sum_x |T|^p sqrt(det g) prod h)^{1/p}`, or `max_x |T|` for `p = inf`.
pub fn lp_norm(t: &impl Field, p: f64, grid: &ManifoldGrid) -> Result<f64> {
    check_exponent(p)?;
    check_shape(t, grid)?;
    Ok(lp_norm_unchecked(t, p, grid))
}

fn lp_norm_unchecked(t: &impl Field, p: f64, grid: &ManifoldGrid) -> f64 {
    if p.is_infinite() {
        return par::max_by(grid.len(), |node| bundle::tensor_norm_sq(t, grid, node).sqrt()).max(0.0);
    }
    let integral = lp_integral(t, p, grid);
    if p == 2.0 {
        integral.sqrt()
    } else {
        integral.powf(1.0 / p)
    }
}

/// `int |T|^p` for finite `p`.
pub(crate) fn lp_integral(t: &impl Field, p: f64, grid: &ManifoldGrid) -> f64 {
    par::sum_by(grid.len(), |node| {
        let sq = bundle::tensor_norm_sq(t, grid, node);
        let v = if p == 2.0 {
            sq
        } else if p == 4.0 {
            sq * sq
        } else {
            sq.powf(0.5 * p)
        };
        v * grid.quadrature_weight(node)
    })
}

/// `D^0 V, .., D^k V`.
fn derivative_tower(v: &Section, k: usize, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<Vec<TensorField>> {
    if v.shape() != grid.shape() || conn.shape() != grid.shape() {
        return Err(Error::ShapeMismatch);
    }
    let required = 2 * k + 4;
    let actual = grid.shape().min_size();
    if actual < required {
        return Err(Error::ResolutionTooSmall { k, required, actual });
    }
    let mut tower = vec![TensorField::from_section(v)];
    for i in 0..k {
        let next = covariant_derivative(&tower[i], grid, conn)?;
        tower.push(next);
    }
    Ok(tower)
}

/// `(sum_{i<=k} ||D^i V||_p^p)^{1/p}`; for `p = inf` the maximum over `i`.
pub fn sobolev_norm(v: &Section, k: usize, p: f64, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<f64> {
    check_exponent(p)?;
    let tower = derivative_tower(v, k, grid, conn)?;
    if p.is_infinite() {
        return Ok(tower.iter().map(|t| lp_norm_unchecked(t, p, grid)).fold(0.0, f64::max));
    }
    let total: f64 = tower.iter().map(|t| lp_integral(t, p, grid)).sum();
    Ok(if p == 2.0 { total.sqrt() } else { total.powf(1.0 / p) })
}

/// Exponents of the interpolation inequality
/// `||D^j T||_p <= C ||D^k T||_r^{j/k} ||T||_q^{1-j/k}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnParams {
    pub j: usize,
    pub k: usize,
    pub p: f64,
    pub r: f64,
    pub q: f64,
}

impl GnParams {
    pub fn new(j: usize, k: usize, p: f64, r: f64, q: f64) -> Result<Self> {
        let params = Self { j, k, p, r, q };
        params.validate()?;
        Ok(params)
    }

    /// `(k/p, j/r + (k-j)/q)`
    pub fn balance(&self) -> (f64, f64) {
        let (j, k) = (self.j as f64, self.k as f64);
        (k / self.p, j / self.r + (k - j) / self.q)
    }

    /// Human-readable balance equation with both sides evaluated.
    pub fn balance_equation(&self) -> String {
        let (lhs, rhs) = self.balance();
        format!(
            "k/p = j/r + (k-j)/q: {}/{} = {}/{} + {}/{}  ({lhs} vs {rhs})",
            self.k,
            self.p,
            self.j,
            self.r,
            self.k - self.j.min(self.k),
            self.q
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 1 || self.j > self.k {
            return Err(Error::InvalidExponent(format!(
                "need 1 <= j <= k, got j = {}, k = {}",
                self.j, self.k
            )));
        }
        check_exponent(self.p)?;
        for (name, v) in [("r", self.r), ("q", self.q)] {
            if v.is_nan() || v < 2.0 {
                return Err(Error::InvalidExponent(format!("{name} = {v} must satisfy {name} >= 2")));
            }
        }
        let (lhs, rhs) = self.balance();
        if (lhs - rhs).abs() > BALANCE_TOL {
            return Err(Error::ExponentBalance { lhs, rhs });
        }
        Ok(())
    }
}

/// `||D^j T||_p / (||D^k T||_r^{j/k} ||T||_q^{1-j/k})`.
pub fn gn_ratio(t: &Section, params: &GnParams, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<f64> {
    params.validate()?;
    let tower = derivative_tower(t, params.k, grid, conn)?;
    let base = lp_norm_unchecked(&tower[0], params.q, grid);
    if base == 0.0 {
        return Err(Error::ZeroField);
    }
    let theta = params.j as f64 / params.k as f64;
    let numerator = lp_norm_unchecked(&tower[params.j], params.p, grid);
    let top = lp_norm_unchecked(&tower[params.k], params.r, grid);
    let denominator = top.powf(theta) * base.powf(1.0 - theta);
    if denominator == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(numerator / denominator)
}

/// Admissibility of `(s, l, j, k)` for the interpolation inequality of
/// sections: `k >= j` and `l in [1, s] ∩ [j, s + j + 1 - k]`.
pub fn gn_exponent_check(s: i64, l: i64, j: i64, k: i64) -> bool {
    k >= j && l >= 1 && l <= s && l >= j && l <= s + j + 1 - k
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnSample {
    pub sample_id: usize,
    pub seed: u64,
    pub ratio: f64,
}

/// Ratios for `samples` random band-limited sections with seeds
/// `base_seed + id` and modes `|kappa| <= kmax`.
pub fn gn_ensemble(
    params: &GnParams,
    samples: usize,
    base_seed: u64,
    kmax: usize,
    grid: &ManifoldGrid,
    conn: &BundleConnection,
) -> Result<Vec<GnSample>> {
    params.validate()?;
    (0..samples)
        .map(|id| {
            let seed = base_seed.wrapping_add(id as u64);
            let t = random_bandlimited(grid, seed, kmax);
            Ok(GnSample {
                sample_id: id,
                seed,
                ratio: gn_ratio(&t, params, grid, conn)?,
            })
        })
        .collect()
}

pub fn ensemble_max(samples: &[GnSample]) -> f64 {
    samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max)
}
