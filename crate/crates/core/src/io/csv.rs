//! CSV renderings of diagnostics, check slacks and GN ensembles.

use std::fmt::Write as _;

use crate::diagnostics::DiagnosticsRecord;
use crate::norms::{GnParams, GnSample};
use crate::solver::Trajectory;

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::new();
    s.push_str(DiagnosticsRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.linf, r.l2, r.l4, r.l8, r.dv_l2, r.lap_l2, r.h1, r.h2, r.energy_residual, r.dv_bound_slack
        );
    }
    s
}

pub const SLACK_HEADER: &str = "t,linf_excess,l2_increase,l4_increase,l8_increase,energy_residual,dv_bound_slack";

/// Per-step slack columns of the trajectory checks. Excess and increase
/// columns are relative to the initial and previous record respectively.
pub fn slack_csv(traj: &Trajectory) -> String {
    let mut s = String::new();
    s.push_str(SLACK_HEADER);
    s.push('\n');
    let Some(first) = traj.records.first() else {
        return s;
    };
    let rel = |new: f64, old: f64| if old > 0.0 { (new - old) / old } else { new };
    let mut prev = first;
    for r in &traj.records {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t,
            rel(r.linf, first.linf),
            rel(r.l2, prev.l2),
            rel(r.l4, prev.l4),
            rel(r.l8, prev.l8),
            r.energy_residual,
            r.dv_bound_slack
        );
        prev = r;
    }
    s
}

pub const GN_HEADER: &str = "sample_id,seed,j,k,p,r,q,ratio";

pub fn gn_csv(params: &GnParams, samples: &[GnSample]) -> String {
    let mut s = String::new();
    s.push_str(GN_HEADER);
    s.push('\n');
    for x in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:e}",
            x.sample_id, x.seed, params.j, params.k, params.p, params.r, params.q, x.ratio
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_and_rows() {
        let r = DiagnosticsRecord {
            t: 0.5,
            linf: 1.0,
            l2: 2.0,
            l4: 3.0,
            l8: 4.0,
            dv_l2: 5.0,
            lap_l2: 6.0,
            h1: 7.0,
            h2: 8.0,
            energy_residual: 1e-9,
            dv_bound_slack: -0.25,
        };
        let csv = diagnostics_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("t,linf,l2,l4,l8,dv_l2,lap_l2,h1,h2,energy_residual,dv_bound_slack")
        );
        assert_eq!(lines.next(), Some("5e-1,1e0,2e0,3e0,4e0,5e0,6e0,7e0,8e0,1e-9,-2.5e-1"));

        let params = GnParams::new(1, 2, 4.0, 2.0, f64::INFINITY).unwrap();
        let csv = gn_csv(
            &params,
            &[GnSample {
                sample_id: 3,
                seed: 45,
                ratio: 0.5,
            }],
        );
        assert_eq!(csv, "sample_id,seed,j,k,p,r,q,ratio\n3,45,1,2,4,2,inf,5e-1\n");
    }
}
