//! Verification suites and grid-refinement studies.

use std::f64::consts::PI;
use std::fmt;

use crate::bundle::{build_connection, BundleConnection, ConnectionSpec, Field, Section};
use crate::calculus::{
    bochner_residual, covariant_derivative, integration_by_parts_defect, laplacian_section, leibniz_defect,
    metric_compatibility_defect, ricci_defect,
};
use crate::diagnostics::{self, CheckReport};
use crate::error::{Error, Result};
use crate::fiber::{self, generator, Mat3, Vec3};
use crate::geometry::{build_grid, ManifoldGrid, MetricSpec};
use crate::init::random_bandlimited;
use crate::io::config::RunConfig;
use crate::norms::lp_norm;
use crate::solver::{run, Scheme, SolverConfig, Trajectory};

/// Order demanded of second-order stencils.
pub const REQUIRED_ORDER: f64 = 1.9;
/// Defects at or below this are treated as exact for unit-scale fields.
pub const EXACT_TOL: f64 = 1e-12;
/// Required shrink of the Bochner residual per halving of `h`.
pub const BOCHNER_SHRINK: f64 = 3.5;
/// Required shrink of the energy residual when `h` and `dt` are halved.
pub const ENERGY_SHRINK: f64 = 3.0;

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteLine {
    pub name: String,
    pub passed: bool,
    pub flagged: bool,
    pub detail: String,
}

impl SuiteLine {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            flagged: false,
            detail: detail.into(),
        }
    }
}

impl From<&CheckReport> for SuiteLine {
    fn from(r: &CheckReport) -> Self {
        Self {
            name: r.name.clone(),
            passed: r.passed(),
            flagged: r.flagged(),
            detail: format!(
                "worst {:.3e} (tol {:.1e}), {} violation(s)",
                r.worst,
                r.tolerance,
                r.violations.len()
            ),
        }
    }
}

impl fmt::Display for SuiteLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.flagged) {
            (_, true) => "FLAG",
            (true, false) => "PASS",
            (false, false) => "FAIL",
        };
        write!(f, "[{status}] {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub lines: Vec<SuiteLine>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Calculus,
    Energy,
    MaxPrinciple,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "calculus" => Ok(Suite::Calculus),
            "energy" => Ok(Suite::Energy),
            "maxprinciple" => Ok(Suite::MaxPrinciple),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}` (calculus|energy|maxprinciple|all)")),
        }
    }
}

/// `log2(coarse / fine)`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Passes when both defects are at rounding level or the observed order is
/// at least `required`.
fn refinement_line(name: &str, coarse: f64, fine: f64, required: f64) -> SuiteLine {
    let exact = coarse <= EXACT_TOL && fine <= EXACT_TOL;
    let order = observed_order(coarse, fine);
    let passed = exact || order >= required;
    let detail = if exact {
        format!("{coarse:.3e} -> {fine:.3e} (exact to rounding)")
    } else {
        format!("{coarse:.3e} -> {fine:.3e}, order {order:.3} (need {required})")
    };
    SuiteLine::new(name, passed, detail)
}

/// A pair of unit-sup-norm smooth test sections on `grid`.
pub fn test_pair(grid: &ManifoldGrid) -> (Section, Section) {
    let a = random_bandlimited(grid, 101, 2);
    let b = random_bandlimited(grid, 202, 2);
    (a.scaled(1.0 / a.max_fiber_norm()), b.scaled(1.0 / b.max_fiber_norm()))
}

struct CalculusDefects {
    leibniz: f64,
    ricci: f64,
    compatibility: f64,
    parts: f64,
    bochner: f64,
}

fn calculus_defects(grid: &ManifoldGrid, conn: &BundleConnection) -> Result<CalculusDefects> {
    let (a, b) = test_pair(grid);
    let dv = lp_norm(&covariant_derivative(&a, grid, conn)?, 2.0, grid)?;
    let dw = lp_norm(&covariant_derivative(&b, grid, conn)?, 2.0, grid)?;
    let scale = (dv * dw).max(f64::MIN_POSITIVE);
    Ok(CalculusDefects {
        leibniz: leibniz_defect(&a, &b, grid, conn)?,
        ricci: ricci_defect(&a, grid, conn)?,
        compatibility: metric_compatibility_defect(&a, &b, grid, conn)?,
        parts: integration_by_parts_defect(&a, &b, grid, conn)?.abs() / scale,
        bochner: bochner_residual(&a, grid, conn)?,
    })
}

/// Calculus identities on the configured metric and connection at the
/// configured resolution and at twice that resolution.
pub fn calculus_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let fine_sizes: Vec<usize> = cfg.grid.sizes.iter().map(|n| 2 * n).collect();
    let mut defects = Vec::new();
    for sizes in [&cfg.grid.sizes, &fine_sizes] {
        let grid = build_grid(&cfg.metric, sizes, &cfg.grid.lengths)?;
        let conn = cfg.build_connection(&grid)?;
        defects.push(calculus_defects(&grid, &conn)?);
    }
    let (c, f) = (&defects[0], &defects[1]);
    Ok(SuiteReport {
        lines: vec![
            refinement_line("leibniz defect", c.leibniz, f.leibniz, REQUIRED_ORDER),
            refinement_line("ricci defect", c.ricci, f.ricci, REQUIRED_ORDER),
            refinement_line("metric compatibility", c.compatibility, f.compatibility, REQUIRED_ORDER),
            refinement_line("integration by parts", c.parts, f.parts, REQUIRED_ORDER),
            refinement_line("bochner residual", c.bochner, f.bochner, BOCHNER_SHRINK.log2()),
        ],
    })
}

/// Runs the configured simulation.
pub fn simulate(cfg: &RunConfig) -> Result<Trajectory> {
    let grid = cfg.build_grid()?;
    let conn = cfg.build_connection(&grid)?;
    let v0 = cfg.initial_section(&grid)?;
    run(&v0, &grid, &conn, &cfg.solver)
}

fn termination_line(traj: &Trajectory) -> SuiteLine {
    SuiteLine::new("run", traj.completed(), traj.termination.to_string())
}

pub fn energy_lines(traj: &Trajectory, curved_metric: bool) -> Vec<SuiteLine> {
    vec![
        termination_line(traj),
        (&diagnostics::check_energy_identity(traj, diagnostics::ENERGY_TOL)).into(),
        (&diagnostics::check_l2_decrement(traj, diagnostics::DECREMENT_TOL)).into(),
        (&diagnostics::check_dv_bound(traj, diagnostics::DV_BOUND_TOL, curved_metric)).into(),
    ]
}

pub fn max_principle_lines(traj: &Trajectory) -> Vec<SuiteLine> {
    let mut lines = vec![
        termination_line(traj),
        (&diagnostics::check_max_principle(traj, diagnostics::MAX_PRINCIPLE_TOL)).into(),
    ];
    for p in [2, 4, 8] {
        lines.push((&diagnostics::check_lp_monotone(traj, p, diagnostics::LP_MONOTONE_TOL)).into());
    }
    lines
}

pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    if matches!(suite, Suite::Calculus | Suite::All) {
        report.lines.extend(calculus_suite(cfg)?.lines);
    }
    if suite == Suite::Calculus {
        return Ok(report);
    }
    let traj = simulate(cfg)?;
    let curved = cfg.curved_metric();
    match suite {
        Suite::Energy => report.lines.extend(energy_lines(&traj, curved)),
        Suite::MaxPrinciple => report.lines.extend(max_principle_lines(&traj)),
        _ => {
            report.lines.extend(energy_lines(&traj, curved));
            report.lines.extend(max_principle_lines(&traj).into_iter().skip(1));
        }
    }
    Ok(report)
}

/// The smooth reference run: flat 2-torus of side `2 pi`, trivial connection,
/// `lambda = mu = 1`, band-limited data with `|kappa| <= 2` and unit sup norm.
#[derive(Clone, Debug)]
pub struct StandardRun {
    pub grid: ManifoldGrid,
    pub conn: BundleConnection,
    pub v0: Section,
    pub cfg: SolverConfig,
}

impl StandardRun {
    pub const SEED: u64 = 20_240_601;
    pub const KMAX: usize = 2;

    pub fn new(n: usize, dt: f64, t_end: f64) -> Result<Self> {
        let grid = build_grid(&MetricSpec::flat(), &[n, n], &[2.0 * PI, 2.0 * PI])?;
        let conn = BundleConnection::trivial(&grid);
        Self::on(grid, conn, dt, t_end)
    }

    /// Same data on a given grid and connection.
    pub fn on(grid: ManifoldGrid, conn: BundleConnection, dt: f64, t_end: f64) -> Result<Self> {
        let raw = random_bandlimited(&grid, Self::SEED, Self::KMAX);
        let v0 = raw.scaled(1.0 / raw.max_fiber_norm());
        let cfg = SolverConfig::new(1.0, 1.0, dt, t_end, Scheme::Rk4);
        Ok(Self { grid, conn, v0, cfg })
    }

    pub fn run(&self) -> Result<Trajectory> {
        run(&self.v0, &self.grid, &self.conn, &self.cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceOp {
    Laplacian,
    Ricci,
    Leibniz,
    Energy,
}

impl std::str::FromStr for ConvergenceOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "laplacian" => Ok(ConvergenceOp::Laplacian),
            "ricci" => Ok(ConvergenceOp::Ricci),
            "leibniz" => Ok(ConvergenceOp::Leibniz),
            "energy" => Ok(ConvergenceOp::Energy),
            other => Err(format!("unknown operator `{other}` (laplacian|ricci|leibniz|energy)")),
        }
    }
}

impl ConvergenceOp {
    pub fn name(&self) -> &'static str {
        match self {
            ConvergenceOp::Laplacian => "laplacian",
            ConvergenceOp::Ricci => "ricci",
            ConvergenceOp::Leibniz => "leibniz",
            ConvergenceOp::Energy => "energy",
        }
    }
}

/// Errors or defects on a sequence of refined grids.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub op: ConvergenceOp,
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    /// Minimum shrink factor per refinement.
    pub required_ratio: f64,
}

impl ConvergenceStudy {
    pub fn ratios(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn orders(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| observed_order(w[0], w[1])).collect()
    }

    /// Judged on the finest refinement.
    pub fn passed(&self) -> bool {
        let n = self.values.len();
        if n < 2 {
            return false;
        }
        let (c, f) = (self.values[n - 2], self.values[n - 1]);
        (c <= EXACT_TOL && f <= EXACT_TOL) || c / f >= self.required_ratio
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("n,value,ratio,order\n");
        for (i, (n, v)) in self.sizes.iter().zip(&self.values).enumerate() {
            if i == 0 {
                s.push_str(&format!("{n},{v:e},,\n"));
            } else {
                let ratio = self.values[i - 1] / v;
                s.push_str(&format!("{n},{v:e},{ratio:e},{:e}\n", ratio.log2()));
            }
        }
        s
    }
}

impl fmt::Display for ConvergenceStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} convergence", self.op.name())?;
        for (i, (n, v)) in self.sizes.iter().zip(&self.values).enumerate() {
            if i == 0 {
                writeln!(f, "  n = {n:4}  value {v:.4e}")?;
            } else {
                let ratio = self.values[i - 1] / v;
                writeln!(
                    f,
                    "  n = {n:4}  value {v:.4e}  ratio {ratio:.3}  order {:.3}",
                    ratio.log2()
                )?;
            }
        }
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{status}] required ratio {:.3} on the finest refinement",
            self.required_ratio
        )
    }
}

/// Conformal metric and curved connection used by the refinement studies.
pub fn curved_setup(n: usize) -> Result<(ManifoldGrid, BundleConnection)> {
    let grid = build_grid(&MetricSpec::conformal(0.2, [1, 1, 0]), &[n, n], &[1.0, 1.0])?;
    let conn = build_connection(
        &ConnectionSpec::curved([0.8, -0.6, 0.0], [generator(0), generator(2), generator(2)], [1, 0, 0]),
        &grid,
    )?;
    Ok((grid, conn))
}

const LAPLACIAN_AMPLITUDE: f64 = 0.2;
const LAPLACIAN_THETA: [f64; 2] = [0.8, -0.6];

/// `V`, `d_x V`, `d_y V`, `d_xx V`, `d_yy V` for the analytic test section on
/// the unit torus.
fn analytic_section(x: &[f64; 3]) -> [Vec3; 5] {
    let t = 2.0 * PI;
    let (sx, cx) = (t * x[0]).sin_cos();
    let (sy, cy) = (t * x[1]).sin_cos();
    let v = [sx * cy, cx, sy];
    let vx = [t * cx * cy, -t * sx, 0.0];
    let vy = [-t * sx * sy, 0.0, t * cy];
    let vxx = [-t * t * sx * cy, -t * t * cx, 0.0];
    let vyy = [-t * t * sx * cy, 0.0, -t * t * sy];
    [v, vx, vy, vxx, vyy]
}

/// `e^{-2 phi} sum_i (d_i + A_i)^2 V` for constant `A_i`: the exact Laplacian
/// on a conformal 2-torus, where `sqrt(g) g^{ij} = delta^{ij}` and the
/// Christoffel trace vanishes.
fn analytic_laplacian(x: &[f64; 3], a: &[Mat3; 2]) -> Vec3 {
    let t = 2.0 * PI;
    let phi = LAPLACIAN_AMPLITUDE * (t * x[0]).cos() * (t * x[1]).cos();
    let [v, vx, vy, vxx, vyy] = analytic_section(x);
    let mut out = [0.0; 3];
    for (i, (d1, d2)) in [(vx, vxx), (vy, vyy)].iter().enumerate() {
        let term = fiber::add(
            &fiber::add(d2, &fiber::scale(2.0, &fiber::mat_vec(&a[i], d1))),
            &fiber::mat_vec(&a[i], &fiber::mat_vec(&a[i], &v)),
        );
        out = fiber::add(&out, &term);
    }
    fiber::scale((-2.0 * phi).exp(), &out)
}

/// Max-node error of the discrete Laplacian against the analytic one.
pub fn laplacian_error(n: usize) -> Result<f64> {
    let grid = build_grid(
        &MetricSpec::conformal(LAPLACIAN_AMPLITUDE, [1, 1, 0]),
        &[n, n],
        &[1.0, 1.0],
    )?;
    let gens = [generator(0), generator(2), generator(2)];
    let theta = [LAPLACIAN_THETA[0], LAPLACIAN_THETA[1], 0.0];
    let conn = build_connection(&ConnectionSpec::constant_skew(theta, gens), &grid)?;
    let a = [
        fiber::mat_scale(theta[0], &gens[0]),
        fiber::mat_scale(theta[1], &gens[1]),
    ];
    let v = Section::from_fn(&grid, |x| analytic_section(x)[0]);
    let lap = laplacian_section(&v, &grid, &conn)?;
    Ok((0..grid.len())
        .map(|node| {
            let exact = analytic_laplacian(&grid.coordinate(node), &a);
            fiber::norm(&fiber::sub(&lap.values()[node], &exact))
        })
        .fold(0.0, f64::max))
}

/// Final energy residual of the standard run at `n` with step `dt`.
pub fn energy_residual(n: usize, dt: f64) -> Result<f64> {
    let traj = StandardRun::new(n, dt, 0.1)?.run()?;
    if !traj.completed() {
        return Err(Error::BlowUp {
            t: traj.records.last().map_or(0.0, |r| r.t),
            reason: traj.termination.to_string(),
        });
    }
    Ok(traj.records.last().map_or(0.0, |r| r.energy_residual))
}

pub fn convergence_study(op: ConvergenceOp) -> Result<ConvergenceStudy> {
    let (sizes, required_ratio): (Vec<usize>, f64) = match op {
        ConvergenceOp::Energy => (vec![64, 128], ENERGY_SHRINK),
        _ => (vec![16, 32, 64, 128], 2f64.powf(REQUIRED_ORDER)),
    };
    let values = sizes
        .iter()
        .map(|&n| match op {
            ConvergenceOp::Laplacian => laplacian_error(n),
            ConvergenceOp::Ricci => {
                let (grid, conn) = curved_setup(n)?;
                ricci_defect(&test_pair(&grid).0, &grid, &conn)
            }
            ConvergenceOp::Leibniz => {
                let (grid, conn) = curved_setup(n)?;
                let (a, b) = test_pair(&grid);
                leibniz_defect(&a, &b, &grid, &conn)
            }
            ConvergenceOp::Energy => energy_residual(n, 1e-4 * 64.0 / n as f64),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy {
        op,
        sizes,
        values,
        required_ratio,
    })
}
