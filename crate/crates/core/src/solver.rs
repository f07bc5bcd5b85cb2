//! Time integration of `d_t V = Delta V + V x Delta V - lambda (1 + mu |V|^2) V`.

use std::fmt;

use crate::bundle::{BundleConnection, Field, Section};
use crate::calculus::laplacian_section;
use crate::diagnostics::{compute_record, DiagnosticsRecord, RecordAccumulator};
use crate::error::{Error, Result};
use crate::fiber::{self, Vec3};
use crate::geometry::ManifoldGrid;
use crate::par;

/// Sup norm above which a run is declared blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Imex,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::Imex => "imex",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rk4" => Ok(Scheme::Rk4),
            "imex" => Ok(Scheme::Imex),
            other => Err(format!("unknown scheme `{other}` (expected rk4 or imex)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub cg_tol: f64,
    /// `None` means ten times the largest grid size.
    pub cg_max_iter: Option<usize>,
    pub cfl_safety: f64,
    /// Store the state every this many steps; 0 keeps only the initial and
    /// final states.
    pub snapshot_every: usize,
}

impl SolverConfig {
    pub const DEFAULT_CG_TOL: f64 = 1e-10;
    pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

    pub fn new(lambda: f64, mu: f64, dt: f64, t_end: f64, scheme: Scheme) -> Self {
        Self {
            lambda,
            mu,
            dt,
            t_end,
            scheme,
            cg_tol: Self::DEFAULT_CG_TOL,
            cg_max_iter: None,
            cfl_safety: Self::DEFAULT_CFL_SAFETY,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSolverConfig(msg.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("λ > 0 required");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("μ > 0 required");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt > 0 required");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end > 0 required");
        }
        if !(self.cg_tol > 0.0 && self.cg_tol.is_finite()) {
            return bad("cg_tol > 0 required");
        }
        if self.cg_max_iter == Some(0) {
            return bad("cg_max_iter >= 1 required");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl_safety in (0, 1] required");
        }
        Ok(())
    }

    pub fn cg_max_iter_for(&self, grid: &ManifoldGrid) -> usize {
        self.cg_max_iter.unwrap_or(10 * grid.shape().max_size())
    }
}

/// `cfl_safety * h_min^2 / (2 m max g^{ii})`.
pub fn cfl_limit(grid: &ManifoldGrid, cfl_safety: f64) -> f64 {
    let h = grid.min_spacing();
    cfl_safety * h * h / (2.0 * grid.dim() as f64 * grid.max_inverse_metric_diag())
}

/// Default step: the CFL limit for RK4, the smallest grid spacing for IMEX.
pub fn default_dt(grid: &ManifoldGrid, scheme: Scheme, cfl_safety: f64) -> f64 {
    match scheme {
        Scheme::Rk4 => cfl_limit(grid, cfl_safety),
        Scheme::Imex => grid.min_spacing(),
    }
}

fn reaction(v: &Vec3, lambda: f64, mu: f64) -> Vec3 {
    fiber::scale(-lambda * (1.0 + mu * fiber::norm_sq(v)), v)
}

/// `V x Delta V - lambda (1 + mu |V|^2) V`, plus `Delta V` when `with_diffusion`.
fn assemble(v: &Section, lap: &Section, lambda: f64, mu: f64, with_diffusion: bool) -> Section {
    let vv = v.values();
    let lv = lap.values();
    let mut out = vec![[0.0; 3]; vv.len()];
    par::fill_nodes(&mut out, 1, |node, o| {
        let (x, l) = (&vv[node], &lv[node]);
        let mut r = fiber::add(&fiber::cross(x, l), &reaction(x, lambda, mu));
        if with_diffusion {
            r = fiber::add(&r, l);
        }
        o[0] = r;
    });
    Section::from_values(v.shape(), out).expect("rhs shape")
}

/// `Delta V + V x Delta V - lambda (1 + mu |V|^2) V`.
pub fn rhs(v: &Section, grid: &ManifoldGrid, conn: &BundleConnection, lambda: f64, mu: f64) -> Result<Section> {
    if !v.is_finite() {
        return Err(Error::NonFinite);
    }
    let lap = laplacian_section(v, grid, conn)?;
    Ok(assemble(v, &lap, lambda, mu, true))
}

/// `a + s b`
fn axpy(s: f64, b: &Section, a: &Section) -> Section {
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![[0.0; 3]; av.len()];
    par::fill_nodes(&mut out, 1, |node, o| o[0] = fiber::axpy(s, &bv[node], &av[node]));
    Section::from_values(a.shape(), out).expect("axpy shape")
}

fn blow_up_reason(v: &Section) -> Option<String> {
    if !v.is_finite() {
        return Some("non-finite value".to_string());
    }
    let sup = v.max_fiber_norm();
    (sup > BLOW_UP_THRESHOLD).then(|| format!("sup norm {sup:e} exceeds {BLOW_UP_THRESHOLD:e}"))
}

/// One classical four-stage Runge-Kutta step.
pub fn step_rk4(
    v: &Section,
    dt: f64,
    grid: &ManifoldGrid,
    conn: &BundleConnection,
    cfg: &SolverConfig,
) -> Result<Section> {
    let limit = cfl_limit(grid, cfg.cfl_safety);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let f = |x: &Section| rhs(x, grid, conn, cfg.lambda, cfg.mu);
    let k1 = f(v)?;
    let k2 = f(&axpy(0.5 * dt, &k1, v))?;
    let k3 = f(&axpy(0.5 * dt, &k2, v))?;
    let k4 = f(&axpy(dt, &k3, v))?;
    let (v0, a, b, c, d) = (v.values(), k1.values(), k2.values(), k3.values(), k4.values());
    let mut out = vec![[0.0; 3]; v0.len()];
    par::fill_nodes(&mut out, 1, |node, o| {
        let mut incr = fiber::add(&a[node], &d[node]);
        incr = fiber::axpy(2.0, &fiber::add(&b[node], &c[node]), &incr);
        o[0] = fiber::axpy(dt / 6.0, &incr, &v0[node]);
    });
    let next = Section::from_values(v.shape(), out)?;
    if !next.is_finite() {
        return Err(Error::BlowUp {
            t: f64::NAN,
            reason: "non-finite value".into(),
        });
    }
    Ok(next)
}

/// `sum_x w(x) <a(x), b(x)>` with quadrature weights `w`.
fn weighted_dot(a: &Section, b: &Section, grid: &ManifoldGrid) -> f64 {
    let (av, bv) = (a.values(), b.values());
    par::sum_by(av.len(), |node| {
        fiber::dot(&av[node], &bv[node]) * grid.quadrature_weight(node)
    })
}

/// Solves `(I - dt Delta) x = b` by conjugate gradients in the
/// `sqrt(det g)`-weighted inner product, starting from `x0`.
/// Returns the solution and the iteration count.
pub fn solve_implicit(
    b: &Section,
    x0: &Section,
    dt: f64,
    grid: &ManifoldGrid,
    conn: &BundleConnection,
    tol: f64,
    max_iter: usize,
) -> Result<(Section, usize)> {
    let apply = |x: &Section| -> Result<Section> { Ok(axpy(-dt, &laplacian_section(x, grid, conn)?, x)) };
    let b_norm = weighted_dot(b, b, grid).sqrt();
    if b_norm == 0.0 {
        return Ok((Section::zeros(b.shape()), 0));
    }
    let mut x = x0.clone();
    let mut r = axpy(-1.0, &apply(&x)?, b);
    let mut rr = weighted_dot(&r, &r, grid);
    let mut p = r.clone();
    for it in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok((x, it));
        }
        let ap = apply(&p)?;
        let alpha = rr / weighted_dot(&p, &ap, grid);
        x = axpy(alpha, &p, &x);
        r = axpy(-alpha, &ap, &r);
        let rr_next = weighted_dot(&r, &r, grid);
        p = axpy(rr_next / rr, &p, &r);
        rr = rr_next;
    }
    let residual = rr.sqrt() / b_norm;
    if residual <= tol {
        return Ok((x, max_iter));
    }
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual,
    })
}

/// `(I - dt Delta) V^{n+1} = V^n + dt (V^n x Delta V^n - lambda (1 + mu |V^n|^2) V^n)`.
pub fn step_imex(
    v: &Section,
    dt: f64,
    grid: &ManifoldGrid,
    conn: &BundleConnection,
    cfg: &SolverConfig,
) -> Result<Section> {
    if !v.is_finite() {
        return Err(Error::NonFinite);
    }
    let lap = laplacian_section(v, grid, conn)?;
    let explicit = assemble(v, &lap, cfg.lambda, cfg.mu, false);
    let b = axpy(dt, &explicit, v);
    if !b.is_finite() {
        return Err(Error::BlowUp {
            t: f64::NAN,
            reason: "non-finite value".into(),
        });
    }
    let (next, _) = solve_implicit(&b, v, dt, grid, conn, cfg.cg_tol, cfg.cg_max_iter_for(grid))?;
    Ok(next)
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Completed,
    BlowUp { t: f64, reason: String },
    CgFailure { t: f64, iterations: usize, residual: f64 },
    Failed(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Completed => write!(f, "completed"),
            Termination::BlowUp { t, reason } => write!(f, "blow-up at t = {t}: {reason}"),
            Termination::CgFailure {
                t,
                iterations,
                residual,
            } => write!(
                f,
                "CG failure at t = {t} after {iterations} iterations (residual {residual:e})"
            ),
            Termination::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Times of the stored states.
    pub times: Vec<f64>,
    pub states: Vec<Section>,
    /// One record per step, including `t = 0`.
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub lambda: f64,
    pub mu: f64,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn final_state(&self) -> Option<&Section> {
        self.states.last()
    }
}

/// Steps `V0` to `t_end`, recording diagnostics after every step. Blow-up and
/// CG failure end the run early and are reported through
/// [`Trajectory::termination`].
pub fn run(v0: &Section, grid: &ManifoldGrid, conn: &BundleConnection, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if v0.shape() != grid.shape() || conn.shape() != grid.shape() {
        return Err(Error::ShapeMismatch);
    }
    if cfg.scheme == Scheme::Rk4 {
        let limit = cfl_limit(grid, cfg.cfl_safety);
        if cfg.dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt: cfg.dt, limit });
        }
    }
    let mut acc = RecordAccumulator::new(cfg.lambda, cfg.mu);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![v0.clone()],
        records: Vec::new(),
        termination: Termination::Completed,
        lambda: cfg.lambda,
        mu: cfg.mu,
    };
    if let Some(reason) = blow_up_reason(v0) {
        traj.termination = Termination::BlowUp { t: 0.0, reason };
        return Ok(traj);
    }
    traj.records.push(acc.push(compute_record(v0, 0.0, grid, conn)?));

    let steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut v = v0.clone();
    let mut t_prev = 0.0;
    for n in 1..=steps {
        let t = if n == steps { cfg.t_end } else { n as f64 * cfg.dt };
        let dt = t - t_prev;
        let step = match cfg.scheme {
            Scheme::Rk4 => step_rk4(&v, dt, grid, conn, cfg),
            Scheme::Imex => step_imex(&v, dt, grid, conn, cfg),
        };
        v = match step {
            Ok(next) => next,
            Err(Error::BlowUp { reason, .. }) => {
                traj.termination = Termination::BlowUp { t, reason };
                break;
            }
            Err(Error::CgNotConverged { iterations, residual }) => {
                traj.termination = Termination::CgFailure {
                    t,
                    iterations,
                    residual,
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(reason) = blow_up_reason(&v) {
            traj.termination = Termination::BlowUp { t, reason };
            traj.times.push(t);
            traj.states.push(v);
            return Ok(traj);
        }
        traj.records.push(acc.push(compute_record(&v, t, grid, conn)?));
        let snapshot = cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0;
        if snapshot || n == steps {
            traj.times.push(t);
            traj.states.push(v.clone());
        }
        t_prev = t;
    }
    if !traj.completed() && traj.times.last() != Some(&t_prev) {
        traj.times.push(t_prev);
        traj.states.push(v);
    }
    Ok(traj)
}
