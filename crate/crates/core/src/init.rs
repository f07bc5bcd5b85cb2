//! Initial data families.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bundle::Section;
use crate::error::{Error, Result};
use crate::fiber::Vec3;
use crate::geometry::ManifoldGrid;
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Zero,
    Constant(Vec3),
    /// `amplitude * cos(2 pi mode.x / L + phase) e_component`
    FourierMode {
        mode: [i64; 3],
        component: usize,
        amplitude: f64,
        phase: f64,
    },
    /// Gaussian coefficients on all modes with `|kappa|_2 <= kmax`, optionally
    /// rescaled to a prescribed sup norm.
    RandomBandlimited {
        seed: u64,
        kmax: usize,
        linf: Option<f64>,
    },
}

impl InitialData {
    pub fn name(&self) -> &'static str {
        match self {
            InitialData::Zero => "zero",
            InitialData::Constant(_) => "constant",
            InitialData::FourierMode { .. } => "fourier_mode",
            InitialData::RandomBandlimited { .. } => "random_bandlimited",
        }
    }

    pub fn validate(&self, grid: &ManifoldGrid) -> Result<()> {
        match self {
            InitialData::Zero => Ok(()),
            InitialData::Constant(v) if v.iter().all(|x| x.is_finite()) => Ok(()),
            InitialData::Constant(_) => Err(Error::InvalidInitialData("non-finite constant".into())),
            InitialData::FourierMode {
                component,
                amplitude,
                phase,
                ..
            } => {
                if *component > 2 {
                    return Err(Error::InvalidInitialData(format!("component {component} outside 0..3")));
                }
                if !amplitude.is_finite() || !phase.is_finite() {
                    return Err(Error::InvalidInitialData("non-finite amplitude or phase".into()));
                }
                Ok(())
            }
            InitialData::RandomBandlimited { kmax, linf, .. } => {
                let nyquist = grid.shape().min_size() / 2;
                if *kmax >= nyquist {
                    return Err(Error::InvalidInitialData(format!(
                        "kmax = {kmax} must be below the Nyquist index {nyquist}"
                    )));
                }
                if let Some(l) = linf {
                    if !(l.is_finite() && *l >= 0.0) {
                        return Err(Error::InvalidInitialData(format!("linf = {l} must be finite and >= 0")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, grid: &ManifoldGrid) -> Result<Section> {
        self.validate(grid)?;
        Ok(match self {
            InitialData::Zero => Section::zeros(grid.shape()),
            InitialData::Constant(v) => Section::constant(grid.shape(), *v),
            InitialData::FourierMode {
                mode,
                component,
                amplitude,
                phase,
            } => {
                let lengths = grid.lengths().to_vec();
                let dim = grid.dim();
                Section::from_fn(grid, |x| {
                    let arg: f64 = (0..dim).map(|a| 2.0 * PI * mode[a] as f64 * x[a] / lengths[a]).sum();
                    let mut v = [0.0; 3];
                    v[*component] = amplitude * (arg + phase).cos();
                    v
                })
            }
            InitialData::RandomBandlimited { seed, kmax, linf } => {
                let v = random_bandlimited(grid, *seed, *kmax);
                match linf {
                    Some(target) => {
                        let current = v.max_fiber_norm();
                        if current == 0.0 {
                            v
                        } else {
                            v.scaled(target / current)
                        }
                    }
                    None => v,
                }
            }
        })
    }
}

/// Integer wave vectors with `|kappa|_2 <= kmax`, one representative per
/// `+-kappa` pair, in a fixed order.
pub fn half_space_modes(dim: usize, kmax: usize) -> Vec<[i64; 3]> {
    let k = kmax as i64;
    let range = |axis: usize| if axis < dim { -k..=k } else { 0..=0 };
    let mut modes = Vec::new();
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                let kappa = [a, b, c];
                let positive = kappa.iter().find(|&&x| x != 0).map_or(true, |&x| x > 0);
                if positive && a * a + b * b + c * c <= k * k {
                    modes.push(kappa);
                }
            }
        }
    }
    modes
}

/// `sum_kappa a_kappa cos(2 pi kappa.x/L) + b_kappa sin(2 pi kappa.x/L)` per fiber
/// component, with independent standard normal `a`, `b` drawn from a seeded
/// ChaCha8 stream.
pub fn random_bandlimited(grid: &ManifoldGrid, seed: u64, kmax: usize) -> Section {
    let dim = grid.dim();
    let modes = half_space_modes(dim, kmax);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<[f64; 6]> = modes
        .iter()
        .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
        .collect();

    // e^{i 2 pi k x_d / L_d} for k in -kmax..=kmax on each axis
    let sizes = grid.shape().sizes().to_vec();
    let span = 2 * kmax + 1;
    let tables: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|a| {
            let n = sizes[a];
            let mut t = vec![(1.0, 0.0); span * n];
            for k in 0..span {
                let kk = k as f64 - kmax as f64;
                for i in 0..n {
                    let (s, c) = (2.0 * PI * kk * i as f64 / n as f64).sin_cos();
                    t[k * n + i] = (c, s);
                }
            }
            t
        })
        .collect();

    let shape = grid.shape();
    let values = par::map_nodes(grid.len(), |node| {
        let idx = shape.coords(node);
        let mut v = [0.0; 3];
        for (kappa, c) in modes.iter().zip(&coeffs) {
            let (mut re, mut im) = (1.0, 0.0);
            for a in 0..dim {
                let k = (kappa[a] + kmax as i64) as usize;
                let (cr, ci) = tables[a][k * sizes[a] + idx[a]];
                (re, im) = (re * cr - im * ci, re * ci + im * cr);
            }
            for (comp, out) in v.iter_mut().enumerate() {
                *out += c[2 * comp] * re + c[2 * comp + 1] * im;
            }
        }
        v
    });
    Section::from_values(shape, values).expect("band-limited field shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Field;
    use crate::geometry::{build_grid, MetricSpec};

    fn grid(n: usize) -> ManifoldGrid {
        build_grid(&MetricSpec::flat(), &[n, n], &[1.0, 2.0]).unwrap()
    }

    #[test]
    fn mode_enumeration() {
        let m = half_space_modes(2, 1);
        assert_eq!(m, vec![[0, 0, 0], [0, 1, 0], [1, 0, 0]]);
        // kappa and -kappa never both appear
        let m = half_space_modes(3, 3);
        for k in &m {
            let neg = [-k[0], -k[1], -k[2]];
            assert!(*k == [0, 0, 0] || !m.contains(&neg));
        }
    }

    #[test]
    fn bandlimited_is_seeded_and_normalised() {
        let g = grid(16);
        let spec = InitialData::RandomBandlimited {
            seed: 7,
            kmax: 2,
            linf: Some(1.0),
        };
        let a = spec.build(&g).unwrap();
        let b = spec.build(&g).unwrap();
        assert_eq!(a, b);
        assert!((a.max_fiber_norm() - 1.0).abs() < 1e-14);
        let c = InitialData::RandomBandlimited {
            seed: 8,
            kmax: 2,
            linf: Some(1.0),
        }
        .build(&g)
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bandlimited_matches_direct_evaluation() {
        let g = grid(12);
        let v = random_bandlimited(&g, 3, 2);
        let modes = half_space_modes(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<[f64; 6]> = modes
            .iter()
            .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
            .collect();
        for node in [0, 5, 77, 143] {
            let x = g.coordinate(node);
            let mut expected = [0.0; 3];
            for (k, c) in modes.iter().zip(&coeffs) {
                let arg = 2.0 * PI * (k[0] as f64 * x[0] / 1.0 + k[1] as f64 * x[1] / 2.0);
                for comp in 0..3 {
                    expected[comp] += c[2 * comp] * arg.cos() + c[2 * comp + 1] * arg.sin();
                }
            }
            for comp in 0..3 {
                assert!((v.values()[node][comp] - expected[comp]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_mode_and_constants() {
        let g = grid(8);
        let v = InitialData::FourierMode {
            mode: [1, 0, 0],
            component: 2,
            amplitude: 0.5,
            phase: 0.0,
        }
        .build(&g)
        .unwrap();
        assert_eq!(v.values()[0], [0.0, 0.0, 0.5]);
        assert_eq!(v.node_values(0).len(), 1);
        let c = InitialData::Constant([1.0, 2.0, 3.0]).build(&g).unwrap();
        assert!(c.values().iter().all(|x| *x == [1.0, 2.0, 3.0]));
        assert!(InitialData::Zero
            .build(&g)
            .unwrap()
            .values()
            .iter()
            .all(|x| *x == [0.0; 3]));
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = grid(8);
        let bad = InitialData::RandomBandlimited {
            seed: 0,
            kmax: 4,
            linf: None,
        };
        assert!(matches!(bad.build(&g), Err(Error::InvalidInitialData(_))));
        let bad = InitialData::FourierMode {
            mode: [1, 0, 0],
            component: 3,
            amplitude: 1.0,
            phase: 0.0,
        };
        assert!(bad.build(&g).is_err());
    }
}
