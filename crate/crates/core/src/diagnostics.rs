//! Per-step diagnostics and post-hoc checks of the a-priori laws of the LLB
//! flow: maximum principle, L^p decay, the L^2 energy identity and the
//! `||DV||_2` bound.

use std::fmt;

use crate::bundle::{BundleConnection, Section};
use crate::calculus::SectionDerivatives;
use crate::error::Result;
use crate::geometry::ManifoldGrid;
use crate::norms::{lp_integral, lp_norm};
use crate::solver::{run, SolverConfig, Termination, Trajectory};

/// Default relative tolerance of the sup-norm bound.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-6;
/// Default per-step relative tolerance of L^p monotonicity.
pub const LP_MONOTONE_TOL: f64 = 1e-8;
/// Default tolerance on the energy residual.
pub const ENERGY_TOL: f64 = 1e-3;
/// Default relative tolerance of the `||DV||_2` bound.
pub const DV_BOUND_TOL: f64 = 1e-3;
/// Default relative tolerance of the per-step L^2 decrement cross-check.
pub const DECREMENT_TOL: f64 = 1e-6;

/// Quantities recorded after every time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    pub l4: f64,
    pub l8: f64,
    pub dv_l2: f64,
    pub lap_l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub energy_residual: f64,
    pub dv_bound_slack: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,linf,l2,l4,l8,dv_l2,lap_l2,h1,h2,energy_residual,dv_bound_slack";

    pub fn lp(&self, p: u32) -> Option<f64> {
        match p {
            2 => Some(self.l2),
            4 => Some(self.l4),
            8 => Some(self.l8),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.linf,
            self.l2,
            self.l4,
            self.l8,
            self.dv_l2,
            self.lap_l2,
            self.h1,
            self.h2,
            self.energy_residual,
            self.dv_bound_slack,
        ]
        .iter()
        .all(|x| x.is_finite())
    }

    /// `int (1 + mu |V|^2) |V|^2`
    fn reaction(&self, mu: f64) -> f64 {
        self.l2 * self.l2 + mu * self.l4.powi(4)
    }
}

/// Norms of `V` at time `t`; the two cumulative columns are left at zero.
pub fn compute_record(v: &Section, t: f64, grid: &ManifoldGrid, conn: &BundleConnection) -> Result<DiagnosticsRecord> {
    let ders = SectionDerivatives::compute(v, grid, conn)?;
    let l2_sq = lp_integral(v, 2.0, grid);
    let dv_sq = lp_integral(&ders.dv, 2.0, grid);
    let d2v_sq = lp_integral(&ders.d2v, 2.0, grid);
    Ok(DiagnosticsRecord {
        t,
        linf: lp_norm(v, f64::INFINITY, grid)?,
        l2: l2_sq.sqrt(),
        l4: lp_norm(v, 4.0, grid)?,
        l8: lp_norm(v, 8.0, grid)?,
        dv_l2: dv_sq.sqrt(),
        lap_l2: lp_norm(&ders.laplacian, 2.0, grid)?,
        h1: (l2_sq + dv_sq).sqrt(),
        h2: (l2_sq + dv_sq + d2v_sq).sqrt(),
        energy_residual: 0.0,
        dv_bound_slack: 0.0,
    })
}

/// Fills in the energy residual and the `||DV||_2` bound slack of successive
/// records using trapezoid time quadrature.
#[derive(Clone, Debug)]
pub struct RecordAccumulator {
    lambda: f64,
    mu: f64,
    first: Option<DiagnosticsRecord>,
    last: Option<DiagnosticsRecord>,
    dissipation: f64,
    laplacian: f64,
}

impl RecordAccumulator {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            first: None,
            last: None,
            dissipation: 0.0,
            laplacian: 0.0,
        }
    }

    fn dissipation_rate(&self, r: &DiagnosticsRecord) -> f64 {
        2.0 * r.dv_l2 * r.dv_l2 + 2.0 * self.lambda * r.reaction(self.mu)
    }

    pub fn push(&mut self, mut rec: DiagnosticsRecord) -> DiagnosticsRecord {
        if let Some(prev) = self.last {
            let dt = rec.t - prev.t;
            self.dissipation += 0.5 * dt * (self.dissipation_rate(&prev) + self.dissipation_rate(&rec));
            self.laplacian += 0.5 * dt * (prev.lap_l2 * prev.lap_l2 + rec.lap_l2 * rec.lap_l2);
        }
        let first = *self.first.get_or_insert(rec);
        let e0 = first.l2 * first.l2;
        let energy = rec.l2 * rec.l2 + self.dissipation;
        rec.energy_residual = if e0 > 0.0 {
            (energy - e0).abs() / e0
        } else {
            energy.abs()
        };
        rec.dv_bound_slack =
            dv_bound_rhs(&first, rec.t - first.t, self.lambda, self.mu) - (rec.dv_l2 * rec.dv_l2 + self.laplacian);
        self.last = Some(rec);
        rec
    }
}

/// `lambda^2 (1 + mu ||V0||_inf^2)^2 ||V0||_2^2 t + ||DV0||_2^2`
fn dv_bound_rhs(first: &DiagnosticsRecord, t: f64, lambda: f64, mu: f64) -> f64 {
    let a = lambda * (1.0 + mu * first.linf * first.linf);
    a * a * first.l2 * first.l2 * t + first.dv_l2 * first.dv_l2
}

/// Recomputes both cumulative columns of `records` from scratch.
pub fn annotate(records: &mut [DiagnosticsRecord], lambda: f64, mu: f64) {
    let mut acc = RecordAccumulator::new(lambda, mu);
    for r in records.iter_mut() {
        *r = acc.push(*r);
    }
}

/// A single entry of a check that exceeded its tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub t: f64,
    pub value: f64,
}

/// Outcome of one post-hoc check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub tolerance: f64,
    /// Largest value of the checked quantity; the check passes when it is at
    /// most `tolerance`.
    pub worst: f64,
    pub violations: Vec<Violation>,
    /// Violations are reported but do not fail the check.
    pub advisory: bool,
}

impl CheckReport {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            tolerance,
            worst: 0.0,
            violations: Vec::new(),
            advisory: false,
        }
    }

    fn observe(&mut self, step: usize, t: f64, value: f64) {
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
        if value > self.tolerance || value.is_nan() {
            self.violations.push(Violation { step, t, value });
        }
    }

    pub fn passed(&self) -> bool {
        self.advisory || self.violations.is_empty()
    }

    pub fn flagged(&self) -> bool {
        self.advisory && !self.violations.is_empty()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.flagged() {
            "FLAG"
        } else if self.passed() {
            "PASS"
        } else {
            "FAIL"
        };
        write!(
            f,
            "[{status}] {}: worst {:.3e} (tol {:.1e}), {} violation(s)",
            self.name,
            self.worst,
            self.tolerance,
            self.violations.len()
        )
    }
}

/// `max_t (||V(t)||_inf - ||V0||_inf) / ||V0||_inf <= tol`.
pub fn check_max_principle(traj: &Trajectory, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("max principle", tol);
    let Some(first) = traj.records.first() else {
        return report;
    };
    let scale = if first.linf > 0.0 { first.linf } else { 1.0 };
    for (step, r) in traj.records.iter().enumerate() {
        report.observe(step, r.t, (r.linf - first.linf) / scale);
    }
    report
}

/// Per-step relative increase of `||V||_p`, `p in {2, 4, 8}`.
pub fn check_lp_monotone(traj: &Trajectory, p: u32, tol: f64) -> CheckReport {
    let mut report = CheckReport::new(format!("L^{p} monotone"), tol);
    for (step, pair) in traj.records.windows(2).enumerate() {
        let (Some(a), Some(b)) = (pair[0].lp(p), pair[1].lp(p)) else {
            report.observe(step + 1, pair[1].t, f64::NAN);
            continue;
        };
        let increase = if a > 0.0 { (b - a) / a } else { b };
        report.observe(step + 1, pair[1].t, increase);
    }
    report
}

/// Energy residual of every record.
pub fn check_energy_identity(traj: &Trajectory, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("energy identity", tol);
    for (step, r) in traj.records.iter().enumerate() {
        report.observe(step, r.t, r.energy_residual);
    }
    report
}

/// `-slack / RHS` of the `||DV||_2` bound per record. On curved metrics the
/// bound is not established, so violations are only flagged there.
pub fn check_dv_bound(traj: &Trajectory, tol: f64, curved_metric: bool) -> CheckReport {
    let mut report = CheckReport::new("DV bound", tol);
    report.advisory = curved_metric;
    let Some(first) = traj.records.first() else {
        return report;
    };
    for (step, r) in traj.records.iter().enumerate() {
        let rhs = dv_bound_rhs(first, r.t - first.t, traj.lambda, traj.mu);
        let value = if rhs > 0.0 {
            -r.dv_bound_slack / rhs
        } else {
            -r.dv_bound_slack
        };
        report.observe(step, r.t, value);
    }
    report
}

/// Compares the recorded per-step drop of `||V||_2^2` with the trapezoid
/// integral of `2||DV||^2 + 2 lambda int (1 + mu|V|^2)|V|^2` over the step.
pub fn check_l2_decrement(traj: &Trajectory, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("L^2 decrement", tol);
    let acc = RecordAccumulator::new(traj.lambda, traj.mu);
    for (step, pair) in traj.records.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let recorded = a.l2 * a.l2 - b.l2 * b.l2;
        let predicted = 0.5 * (b.t - a.t) * (acc.dissipation_rate(a) + acc.dissipation_rate(b));
        let scale = recorded.abs().max(predicted.abs());
        let rel = if scale > 0.0 {
            (recorded - predicted).abs() / scale
        } else {
            0.0
        };
        report.observe(step + 1, b.t, rel);
    }
    report
}

/// Runs every trajectory check with its default tolerance.
pub fn check_all(traj: &Trajectory, curved_metric: bool) -> Vec<CheckReport> {
    vec![
        check_max_principle(traj, MAX_PRINCIPLE_TOL),
        check_lp_monotone(traj, 2, LP_MONOTONE_TOL),
        check_lp_monotone(traj, 4, LP_MONOTONE_TOL),
        check_lp_monotone(traj, 8, LP_MONOTONE_TOL),
        check_energy_identity(traj, ENERGY_TOL),
        check_dv_bound(traj, DV_BOUND_TOL, curved_metric),
        check_l2_decrement(traj, DECREMENT_TOL),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub scale: f64,
    pub max_linf: f64,
    pub max_h1: f64,
    pub max_h2: f64,
    pub t_final: f64,
    pub termination: Termination,
}

impl SweepEntry {
    pub fn bounded(&self) -> bool {
        self.termination == Termination::Completed && self.max_h2.is_finite()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn all_bounded(&self) -> bool {
        self.entries.iter().all(SweepEntry::bounded)
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scale,max_linf,max_h1,max_h2,t_final,termination")?;
        for e in &self.entries {
            writeln!(
                f,
                "{},{:e},{:e},{:e},{},{}",
                e.scale, e.max_linf, e.max_h1, e.max_h2, e.t_final, e.termination
            )?;
        }
        Ok(())
    }
}

/// Runs `c V0` for every `c` in `scales`. Failed runs are recorded and the
/// sweep continues.
pub fn smallness_sweep(
    base: &Section,
    scales: &[f64],
    grid: &ManifoldGrid,
    conn: &BundleConnection,
    cfg: &SolverConfig,
) -> SweepReport {
    let entries = scales
        .iter()
        .map(|&scale| {
            let v0 = base.scaled(scale);
            match run(&v0, grid, conn, cfg) {
                Ok(traj) => {
                    let max = |f: fn(&DiagnosticsRecord) -> f64| traj.records.iter().map(f).fold(0.0, f64::max);
                    SweepEntry {
                        scale,
                        max_linf: max(|r| r.linf),
                        max_h1: max(|r| r.h1),
                        max_h2: max(|r| r.h2),
                        t_final: traj.records.last().map_or(0.0, |r| r.t),
                        termination: traj.termination.clone(),
                    }
                }
                Err(e) => SweepEntry {
                    scale,
                    max_linf: f64::NAN,
                    max_h1: f64::NAN,
                    max_h2: f64::NAN,
                    t_final: 0.0,
                    termination: Termination::Failed(e.to_string()),
                },
            }
        })
        .collect();
    SweepReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, MetricSpec};

    fn record(t: f64, l2: f64, dv: f64, lap: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            linf: l2,
            l2,
            l4: l2,
            l8: l2,
            dv_l2: dv,
            lap_l2: lap,
            h1: 0.0,
            h2: 0.0,
            energy_residual: 0.0,
            dv_bound_slack: 0.0,
        }
    }

    #[test]
    fn record_of_constant_section() {
        let g = build_grid(&MetricSpec::flat(), &[16, 16], &[2.0, 0.5]).unwrap();
        let conn = BundleConnection::trivial(&g);
        let v = Section::constant(g.shape(), [0.0, 3.0, 4.0]);
        let r = compute_record(&v, 0.25, &g, &conn).unwrap();
        assert_eq!(r.t, 0.25);
        assert!((r.linf - 5.0).abs() < 1e-15);
        for p in [2u32, 4, 8] {
            assert!((r.lp(p).unwrap() - 5.0).abs() < 1e-13);
        }
        assert_eq!(r.dv_l2, 0.0);
        assert_eq!(r.lap_l2, 0.0);
        assert!((r.h2 - 5.0).abs() < 1e-13);
    }

    #[test]
    fn accumulator_uses_trapezoid_rule() {
        // Synthetic records: dissipation rate 2 dv^2 + 2 lambda (l2^2 + mu l4^4)
        let (lambda, mu) = (0.5, 2.0);
        let a = record(0.0, 1.0, 1.0, 2.0);
        let b = record(0.1, 0.9, 0.5, 1.0);
        let mut acc = RecordAccumulator::new(lambda, mu);
        let a = acc.push(a);
        assert_eq!(a.energy_residual, 0.0);
        assert_eq!(a.dv_bound_slack, 0.0);
        let b = acc.push(b);
        let rate = |l2: f64, dv: f64| 2.0 * dv * dv + 2.0 * lambda * (l2 * l2 + mu * l2.powi(4));
        let energy = 0.81 + 0.05 * (rate(1.0, 1.0) + rate(0.9, 0.5));
        assert!((b.energy_residual - (energy - 1.0).abs()).abs() < 1e-15);
        let rhs = (lambda * (1.0 + mu)).powi(2) * 0.1 + 1.0;
        let lhs = 0.25 + 0.05 * (4.0 + 1.0);
        assert!((b.dv_bound_slack - (rhs - lhs)).abs() < 1e-15);
    }

    #[test]
    fn report_formatting() {
        let mut r = CheckReport::new("x", 1e-3);
        r.observe(0, 0.0, -1.0);
        assert!(r.passed());
        assert!(r.to_string().starts_with("[PASS] x"));
        r.observe(1, 0.1, 1.0);
        assert!(!r.passed());
        assert_eq!(
            r.violations,
            vec![Violation {
                step: 1,
                t: 0.1,
                value: 1.0
            }]
        );
        r.advisory = true;
        assert!(r.passed() && r.flagged());
        assert!(r.to_string().starts_with("[FLAG]"));
    }
}
