//! Acceptance criteria. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use llb_core::bundle::{cross, fiber_norm, star_contract, Field, Pairing, TensorField};
use llb_core::diagnostics::{
    check_dv_bound, check_energy_identity, check_l2_decrement, check_lp_monotone, check_max_principle, smallness_sweep,
    DV_BOUND_TOL, ENERGY_TOL, LP_MONOTONE_TOL, MAX_PRINCIPLE_TOL,
};
use llb_core::fiber::{self, generator};
use llb_core::init::random_bandlimited;
use llb_core::io::diagnostics_csv;
use llb_core::norms::{ensemble_max, gn_ensemble, gn_ratio, GnParams};
use llb_core::par;
use llb_core::verify::{curved_setup, observed_order, test_pair, StandardRun};
use llb_core::{
    build_connection, build_grid, cfl_limit, leibniz_defect, ricci_defect, run, BundleConnection, ConnectionSpec,
    MetricSpec, Scheme, Section, SolverConfig, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

/// 1. Calculus identities converge at second order on a curved metric and
///    connection; trivial-connection Ricci defect is at rounding level.
fn calculus_identities() -> Outcome {
    let start = Instant::now();
    let mut leibniz = Vec::new();
    let mut ricci = Vec::new();
    for n in [32, 64] {
        let (grid, conn) = curved_setup(n).unwrap();
        let (a, b) = test_pair(&grid);
        leibniz.push(leibniz_defect(&a, &b, &grid, &conn).unwrap());
        ricci.push(ricci_defect(&a, &grid, &conn).unwrap());
    }
    let (ol, or) = (
        observed_order(leibniz[0], leibniz[1]),
        observed_order(ricci[0], ricci[1]),
    );
    let mut trivial: f64 = 0.0;
    for (spec, n) in [(MetricSpec::flat(), 32), (MetricSpec::conformal(0.3, [1, 2, 0]), 48)] {
        let grid = build_grid(&spec, &[n, n], &[1.0, 1.3]).unwrap();
        let conn = BundleConnection::trivial(&grid);
        trivial = trivial.max(ricci_defect(&test_pair(&grid).0, &grid, &conn).unwrap());
    }
    let elapsed = start.elapsed();
    outcome(
        ol >= 1.9 && or >= 1.9 && trivial <= 1e-12 && within(elapsed, 30),
        format!(
            "leibniz order {ol:.3}, ricci order {or:.3} (32^2 -> 64^2), trivial ricci {trivial:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_tensor(shape: llb_core::GridShape, rank: usize, rng: &mut ChaCha8Rng) -> TensorField {
    let n = shape.len() * shape.components(rank);
    let values = (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    TensorField::from_values(shape, rank, values).unwrap()
}

/// 2. Pointwise bounds of the cross product and `*`-contractions.
fn cross_and_star_bounds() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = build_grid(&MetricSpec::conformal(0.4, [1, 1, 0]), &[8, 8], &[1.0, 1.5]).unwrap();
    let shape = grid.shape();
    let (mut cross_violations, mut star_violations) = (0usize, 0usize);
    let mut worst_orth: f64 = 0.0;
    for _ in 0..100 {
        let (ks, kt) = (rng.random_range(0..3), rng.random_range(0..3));
        let s = random_tensor(shape, ks, &mut rng);
        let t = random_tensor(shape, kt, &mut rng);
        let ns = fiber_norm(&s, &grid).unwrap();
        let nt = fiber_norm(&t, &grid).unwrap();
        let nc = fiber_norm(&cross(&s, &t).unwrap(), &grid).unwrap();
        let mut pairings = vec![Pairing::Fiber];
        if ks > 0 && kt > 0 {
            pairings.push(Pairing::Manifold(rng.random_range(0..ks), rng.random_range(0..kt)));
        }
        let full = star_contract(&s, &t, &pairings, &grid)
            .unwrap()
            .pointwise_norm(&grid)
            .unwrap();
        let open = star_contract(&s, &t, &pairings[1..], &grid)
            .unwrap()
            .pointwise_norm(&grid)
            .unwrap();
        for node in 0..grid.len() {
            let bound = ns[node] * nt[node] * (1.0 + 1e-12);
            cross_violations += usize::from(nc[node] > bound);
            star_violations += usize::from(full[node] > bound) + usize::from(open[node] > bound);
        }
        let u = random_tensor(shape, 0, &mut rng);
        let w = random_tensor(shape, 0, &mut rng);
        for (a, b) in u.values().iter().zip(w.values()) {
            let scale = fiber::norm(a) * fiber::norm(a) * fiber::norm(b);
            worst_orth = worst_orth.max(fiber::dot(a, &fiber::cross(a, b)).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        cross_violations == 0 && star_violations == 0 && worst_orth <= 1e-12 && within(elapsed, 10),
        format!(
            "100 pairs: {cross_violations} cross / {star_violations} star violations, max |<u,u x w>| {worst_orth:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// 3. Constant data follows `y/(1+mu y) = y0/(1+mu y0) e^{-2 lambda t}`.
fn ode_oracle() -> Outcome {
    let start = Instant::now();
    let grid = build_grid(&MetricSpec::flat(), &[16, 16], &[1.0, 1.0]).unwrap();
    let conn = BundleConnection::trivial(&grid);
    let mut worst: f64 = 0.0;
    for (lambda, mu, v) in [(1.0, 1.0, [1.0, 0.0, 0.0]), (0.5, 3.0, [0.3, -0.4, 1.2])] {
        let y0: f64 = fiber::norm_sq(&v);
        let cfg = SolverConfig::new(lambda, mu, 1e-4, 1.0, Scheme::Rk4);
        let traj = run(&Section::constant(grid.shape(), v), &grid, &conn, &cfg).unwrap();
        for r in &traj.records {
            let z = y0 / (1.0 + mu * y0) * (-2.0 * lambda * r.t).exp();
            let exact = (z / (1.0 - mu * z)).sqrt();
            worst = worst.max((r.linf - exact).abs() / exact);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && within(elapsed, 10),
        format!(
            "max relative modulus error {worst:.2e} over t in [0, 1], {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Standard smooth run at 64^2, shared by criteria 4-6.
fn standard_run() -> Trajectory {
    StandardRun::new(64, 1e-4, 0.1).unwrap().run().unwrap()
}

/// 4. Energy identity residual and its shrink under `h, dt` halving.
fn energy_identity(coarse: &Trajectory, elapsed_coarse: Duration) -> Outcome {
    let start = Instant::now();
    let fine = StandardRun::new(128, 5e-5, 0.1).unwrap().run().unwrap();
    let elapsed = elapsed_coarse + start.elapsed();
    let rc = check_energy_identity(coarse, ENERGY_TOL);
    let rf = check_energy_identity(&fine, ENERGY_TOL);
    let decrement = check_l2_decrement(coarse, 1e-6);
    let shrink = rc.worst / rf.worst;
    outcome(
        coarse.completed() && rc.passed() && shrink >= 3.0 && decrement.passed() && within(elapsed, 300),
        format!(
            "residual {:.3e} (64^2) -> {:.3e} (128^2), shrink {shrink:.2}; L2 decrement cross-check {:.1e}; {:.1}s",
            rc.worst,
            rf.worst,
            decrement.worst,
            elapsed.as_secs_f64()
        ),
    )
}

fn max_principle_and_lp(traj: &Trajectory) -> (bool, String) {
    let mp = check_max_principle(traj, MAX_PRINCIPLE_TOL);
    let lps: Vec<_> = [2, 4, 8]
        .iter()
        .map(|&p| check_lp_monotone(traj, p, LP_MONOTONE_TOL))
        .collect();
    let passed = traj.completed() && mp.passed() && lps.iter().all(|r| r.passed());
    let detail = format!(
        "sup excess {:.1e}, L2/L4/L8 step increase {:.1e}/{:.1e}/{:.1e}",
        mp.worst, lps[0].worst, lps[1].worst, lps[2].worst
    );
    (passed, detail)
}

/// 5. Maximum principle and L^p monotonicity on the standard run and on a
///    curved-connection run.
fn maximum_principle(standard: &Trajectory) -> Outcome {
    let start = Instant::now();
    let grid = build_grid(&MetricSpec::flat(), &[64, 64], &[2.0 * PI, 2.0 * PI]).unwrap();
    let conn = build_connection(
        &ConnectionSpec::curved([0.8, -0.6, 0.0], [generator(0), generator(2), generator(2)], [1, 1, 0]),
        &grid,
    )
    .unwrap();
    let curved = StandardRun::on(grid, conn, 1e-4, 0.1).unwrap().run().unwrap();
    let (pa, da) = max_principle_and_lp(standard);
    let (pb, db) = max_principle_and_lp(&curved);
    outcome(
        pa && pb && within(start.elapsed(), 300),
        format!("standard: {da}; curved connection: {db}"),
    )
}

/// 6. `||DV||_2` bound along the standard run.
fn dv_bound(traj: &Trajectory) -> Outcome {
    let r = check_dv_bound(traj, DV_BOUND_TOL, false);
    let min_slack = traj.records[1..]
        .iter()
        .map(|r| r.dv_bound_slack)
        .fold(f64::INFINITY, f64::min);
    outcome(
        r.passed() && min_slack.is_finite(),
        format!(
            "{} violation(s) of slack >= -1e-3 RHS; min slack for t > 0 is {min_slack:.3e}",
            r.violations.len()
        ),
    )
}

/// 7. GN ratio: homogeneity, ensemble stability, resolution stability.
fn gn_lab() -> Outcome {
    let start = Instant::now();
    let params = GnParams::new(1, 2, 4.0, 2.0, f64::INFINITY).unwrap();
    let grid = build_grid(&MetricSpec::flat(), &[64, 64], &[1.0, 1.0]).unwrap();
    let conn = BundleConnection::trivial(&grid);

    let t = random_bandlimited(&grid, 77, 4);
    let r = gn_ratio(&t, &params, &grid, &conn).unwrap();
    let scale_err = [-2.5, 1e-3, 1e4]
        .iter()
        .map(|&c| (gn_ratio(&t.scaled(c), &params, &grid, &conn).unwrap() - r).abs() / r)
        .fold(0.0, f64::max);

    let a = ensemble_max(&gn_ensemble(&params, 200, 1_000, 8, &grid, &conn).unwrap());
    let b = ensemble_max(&gn_ensemble(&params, 200, 9_000, 8, &grid, &conn).unwrap());
    let spread = (a - b).abs() / a.min(b);

    let fine = build_grid(&MetricSpec::flat(), &[128, 128], &[1.0, 1.0]).unwrap();
    let r_fine = gn_ratio(
        &random_bandlimited(&fine, 77, 4),
        &params,
        &fine,
        &BundleConnection::trivial(&fine),
    )
    .unwrap();
    let drift = (r_fine - r).abs() / r;
    let elapsed = start.elapsed();
    outcome(
        scale_err <= 1e-12 && spread <= 0.25 && drift <= 0.02 && within(elapsed, 120),
        format!(
            "scale error {scale_err:.1e}; ensemble max {a:.4} vs {b:.4} ({:.1}%); 64^2 {r:.5} vs 128^2 {r_fine:.5} ({:.2}%); {:.1}s",
            100.0 * spread,
            100.0 * drift,
            elapsed.as_secs_f64()
        ),
    )
}

/// 8. m = 2 sweep over scales and an m = 3 small-data run stay bounded.
fn globality() -> Outcome {
    let start = Instant::now();
    let base = StandardRun::new(64, 1e-3, 1.0).unwrap();
    let dt = cfl_limit(&base.grid, 0.5);
    let cfg = SolverConfig::new(1.0, 1.0, dt, 1.0, Scheme::Rk4);
    let sweep = smallness_sweep(&base.v0, &[0.5, 1.0, 2.0, 4.0], &base.grid, &base.conn, &cfg);

    let grid3 = build_grid(&MetricSpec::flat(), &[24, 24, 24], &[2.0 * PI; 3]).unwrap();
    let conn3 = BundleConnection::trivial(&grid3);
    let raw = random_bandlimited(&grid3, StandardRun::SEED, 2);
    let v3 = raw.scaled(0.05 / raw.max_fiber_norm());
    let cfg3 = SolverConfig::new(1.0, 1.0, cfl_limit(&grid3, 0.5), 1.0, Scheme::Rk4);
    let small = smallness_sweep(&v3, &[1.0], &grid3, &conn3, &cfg3);
    let elapsed = start.elapsed();
    let h2: Vec<String> = sweep
        .entries
        .iter()
        .map(|e| format!("{}:{:.3}", e.scale, e.max_h2))
        .collect();
    outcome(
        sweep.all_bounded() && small.all_bounded() && within(elapsed, 600),
        format!(
            "m=2 max H2 by scale [{}]; m=3 24^3 max sup {:.3e}, max H2 {:.3e}; {:.1}s",
            h2.join(", "),
            small.entries[0].max_linf,
            small.entries[0].max_h2,
            elapsed.as_secs_f64()
        ),
    )
}

/// 9. Diagnostics are byte-identical across worker counts.
fn determinism() -> Outcome {
    let csvs: Vec<String> = [1, 2, 8]
        .iter()
        .map(|&threads| par::install(Some(threads), || diagnostics_csv(&standard_run().records)))
        .collect();
    let same = csvs[1] == csvs[0] && csvs[2] == csvs[0];
    outcome(
        same,
        format!("1/2/8 threads: {} bytes each, identical = {same}", csvs[0].len()),
    )
}

type Criterion<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

fn main() -> ExitCode {
    let start = Instant::now();
    let standard = standard_run();
    let standard_time = start.elapsed();

    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        ("calculus identities", Box::new(calculus_identities)),
        ("cross and star bounds", Box::new(cross_and_star_bounds)),
        ("constant-data ODE", Box::new(ode_oracle)),
        (
            "energy identity",
            Box::new(|| energy_identity(&standard, standard_time)),
        ),
        (
            "maximum principle and L^p decay",
            Box::new(|| maximum_principle(&standard)),
        ),
        ("DV bound", Box::new(|| dv_bound(&standard))),
        ("Gagliardo-Nirenberg lab", Box::new(gn_lab)),
        ("globality probes", Box::new(globality)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let o = check();
        let status = if o.passed { "PASS" } else { "FAIL" };
        failures += usize::from(!o.passed);
        println!("[{status}] {}. {name}: {}", i + 1, o.detail);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
