//! Numerical Landau-Lifshitz-Bloch dynamics for sections of the trivial
//! rank-3 bundle over a periodic Riemannian torus.
//!
//! ```
//! use llb_core::{build_grid, run, BundleConnection, InitialData, MetricSpec, Scheme, SolverConfig};
//!
//! let grid = build_grid(&MetricSpec::flat(), &[16, 16], &[1.0, 1.0]).unwrap();
//! let conn = BundleConnection::trivial(&grid);
//! let v0 = InitialData::Constant([0.5, 0.0, 0.0]).build(&grid).unwrap();
//! let cfg = SolverConfig::new(1.0, 1.0, 1e-4, 0.01, Scheme::Rk4);
//! let traj = run(&v0, &grid, &conn, &cfg).unwrap();
//! assert!(traj.completed());
//! assert!(traj.records.last().unwrap().linf < 0.5);
//! ```

pub mod bundle;
pub mod calculus;
pub mod diagnostics;
pub mod error;
pub mod fiber;
pub mod geometry;
pub mod init;
pub mod io;
pub mod norms;
pub mod par;
pub mod solver;
pub mod verify;

pub use bundle::{
    build_connection, cross, cross_sections, fiber_norm, star_contract, BundleConnection, ConnectionFamily,
    ConnectionSpec, Field, Pairing, Section, StarField, TensorField,
};
pub use calculus::{
    bochner_residual, bochner_terms, covariant_derivative, iterated_derivative, laplacian, laplacian_section,
    leibniz_defect, ricci_defect, BochnerTerms, SectionDerivatives,
};
pub use diagnostics::{
    check_dv_bound, check_energy_identity, check_lp_monotone, check_max_principle, compute_record, smallness_sweep,
    CheckReport, DiagnosticsRecord, SweepReport,
};
pub use error::{Error, Result};
pub use fiber::{Mat3, Vec3};
pub use geometry::{build_grid, manifold_curvature, GridShape, ManifoldGrid, MetricFamily, MetricSpec, RiemannTensor};
pub use init::InitialData;
pub use io::{parse_config, read_snapshot, write_snapshot, RunConfig};
pub use norms::{gn_ensemble, gn_exponent_check, gn_ratio, lp_norm, sobolev_norm, GnParams};
pub use solver::{cfl_limit, rhs, run, step_imex, step_rk4, Scheme, SolverConfig, Termination, Trajectory};
