//! Exit criteria. Runs without the libtest harness so that every criterion
//! prints its PASS/FAIL line: `cargo test -p underlay-core --test acceptance`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use underlay_core::analytic::{
    connection_probability, laplace_exponent, laplace_exponent_quadrature, spatial_density,
    LaplaceArgs, LinkQuery,
};
use underlay_core::experiment::{
    run_experiment, write_pairs_csv, write_success_csv, write_summary_csv, PairCounts,
};
use underlay_core::model::{ChannelParams, Scenario, Strategy, Tier};
use underlay_core::montecarlo::{
    estimate_connection_probability, RngSpec, SimWindow, DEFAULT_BIAS_TOL,
};
use underlay_core::optimizer::{feasible, primary_constraint, solve};
use underlay_core::Error;

const QUADRATURE_AGREEMENT: f64 = 1e-9;
const QUADRATURE_TOL: f64 = 1e-12;
const CLASSICAL_LIMIT_AGREEMENT: f64 = 1e-12;
const MC_ABS_FLOOR: f64 = 0.01;
const MC_CI_MULTIPLE: f64 = 3.0;
const CURVE_TRIALS: u64 = 100_000;
const CURVE_ETAS: [f64; 4] = [3.5, 4.0, 5.0, 6.0];
const CURVE_STEPS: usize = 16;
const CURVE_D_MAX: f64 = 0.8;
const UNIMODAL_GRID: usize = 10_000;
const OPT_GRID: usize = 200;
const OPT_GRID_SLACK: f64 = 1e-6;
const CONSTRAINT_SLACK: f64 = 1e-9;
const ACTIVE_BAND: f64 = 1e-6;
const EXPERIMENT_BLOCKS: u64 = 100_000;
const THINNING_TRIALS: u64 = 40_000;
const THINNING_SIGMAS: f64 = 3.0;

static FAILED: AtomicBool = AtomicBool::new(false);

fn verdict(name: &str, ok: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        FAILED.store(true, Ordering::SeqCst);
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn closed_form_matches_quadrature_oracle() {
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut cases = 0;
    for eta in [2.1, 2.5, 3.0, 4.0, 6.0] {
        for epsilon in [0.0, 1e-3, 1.0] {
            for u in [1e-2, 1e-1, 1.0, 10.0, 100.0] {
                for density in [0.2, 1.0] {
                    let ch = ChannelParams {
                        eta,
                        epsilon,
                        noise: 1.0,
                    };
                    let args = LaplaceArgs {
                        s: u,
                        gamma: 1.0,
                        thinned_density: density,
                        power_ratio: 1.0,
                    };
                    let closed = laplace_exponent(&args, &ch).unwrap();
                    let oracle = laplace_exponent_quadrature(&args, &ch, QUADRATURE_TOL).unwrap();
                    let rel = (closed - oracle).abs() / oracle.max(1e-300);
                    if rel > worst {
                        worst = rel;
                        worst_at = format!("eta={eta} eps={epsilon} u={u} density={density}");
                    }
                    cases += 1;
                }
            }
        }
    }
    verdict(
        "laplace exponent vs PGF quadrature",
        worst <= QUADRATURE_AGREEMENT,
        &format!("{cases} cases, worst relative error {worst:.2e} at {worst_at}"),
    );
}

fn classical_limit() {
    let ch = ChannelParams {
        eta: 4.0,
        epsilon: 0.0,
        noise: 1.0,
    };
    let args = LaplaceArgs {
        s: 1.0,
        gamma: 1.0,
        thinned_density: 1.0,
        power_ratio: 1.0,
    };
    let expected = PI * PI / 2.0;
    let closed = laplace_exponent(&args, &ch).unwrap();
    let oracle = laplace_exponent_quadrature(&args, &ch, QUADRATURE_TOL).unwrap();
    let rel_closed = (closed - expected).abs() / expected;
    let rel_oracle = (oracle - expected).abs() / expected;
    verdict(
        "epsilon = 0 classical limit",
        rel_closed <= CLASSICAL_LIMIT_AGREEMENT && rel_oracle <= QUADRATURE_AGREEMENT,
        &format!("closed form rel err {rel_closed:.2e}, quadrature rel err {rel_oracle:.2e}"),
    );
}

fn monte_carlo_reproduces_connection_curves() {
    let mut failures = Vec::new();
    let mut points = 0;
    let mut worst_ratio: f64 = 0.0;
    let start = Instant::now();
    for (ei, &eta) in CURVE_ETAS.iter().enumerate() {
        let sc = Scenario::all_unity(eta);
        let t0 = Instant::now();
        for (di, d) in linspace(0.0, CURVE_D_MAX, CURVE_STEPS)
            .into_iter()
            .enumerate()
        {
            let link = LinkQuery::primary(d);
            let exact = connection_probability(&link, &sc).unwrap();
            let window = SimWindow::for_link(&link, &sc, DEFAULT_BIAS_TOL).unwrap();
            let rng = RngSpec::new(2024).with_stream((ei * CURVE_STEPS + di) as u64);
            let est =
                estimate_connection_probability(&link, &sc, CURVE_TRIALS, &window, &rng).unwrap();
            let tol = MC_ABS_FLOOR.max(MC_CI_MULTIPLE * est.ci95_halfwidth);
            let err = (est.mean - exact).abs();
            worst_ratio = worst_ratio.max(err / tol);
            if err > tol {
                failures.push(format!(
                    "eta={eta} d={d:.4}: mc {:.5} vs {exact:.5}",
                    est.mean
                ));
            }
            points += 1;
        }
        println!("  eta = {eta}: {:.1?}", t0.elapsed());
    }
    verdict(
        "Monte Carlo vs closed form (all-unity, epsilon = 1e-3)",
        failures.is_empty(),
        &format!(
            "{points} points, worst |error|/tolerance {worst_ratio:.3}, {:.1?}{}",
            start.elapsed(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {failures:?}")
            }
        ),
    );
}

fn interior_sign_changes(values: &[f64]) -> usize {
    let mut changes = 0;
    let mut last = 0.0f64;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && d.signum() != last.signum() {
            changes += 1;
        }
        last = d;
    }
    changes
}

fn access_times_connection_is_unimodal() {
    let mut combos = 0;
    let mut bad = Vec::new();
    for eta in [2.5, 3.0, 4.0, 6.0] {
        for tier in [Tier::Primary, Tier::Secondary] {
            for (density, d) in [(3.0, 0.5), (5.0, 0.8), (8.0, 0.35)] {
                let mut sc = Scenario::all_unity(eta);
                sc.tier_mut(tier).density = density;
                let grid = linspace(0.0, 1.0, UNIMODAL_GRID);
                let values: Vec<f64> = grid
                    .iter()
                    .map(|&p| {
                        let mut s = sc;
                        s.tier_mut(tier).access_prob = p;
                        p * connection_probability(&LinkQuery::new(tier, d), &s).unwrap()
                    })
                    .collect();
                let changes = interior_sign_changes(&values);
                if changes != 1 {
                    bad.push(format!(
                        "eta={eta} {tier} density={density} d={d}: {changes} sign changes"
                    ));
                }
                combos += 1;
            }
        }
    }
    verdict(
        "p * H(p) has a unique interior maximum",
        bad.is_empty() && combos >= 20,
        &format!(
            "{combos} combinations{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {bad:?}")
            }
        ),
    );
}

fn optimizer_scenarios() -> Vec<(String, Scenario, f64)> {
    let base = Scenario::sensor_network();
    let mut out = Vec::new();
    for d in [0.05, 0.5, 0.95] {
        out.push((format!("sensor network d={d}"), base, d));
    }
    let mut s = base;
    s.qos.min_connection_prob = 0.7;
    out.push(("Q=0.7".into(), s, 0.4));
    let mut s = base;
    s.qos.min_connection_prob = 0.2;
    out.push(("Q=0.2, power bound binds".into(), s, 0.4));
    let mut s = base;
    s.channel.eta = 3.0;
    out.push(("eta=3".into(), s, 0.6));
    let mut s = base;
    s.secondary.density = 2.0;
    out.push(("dense secondaries".into(), s, 0.7));
    let mut s = base;
    s.secondary.density = 3.0;
    s.weights.ba = 0.3;
    out.push(("dense secondaries, gamma_ba=0.3".into(), s, 0.9));
    let mut s = base;
    s.bounds = underlay_core::model::PowerBounds { lo: 0.5, hi: 3.0 };
    s.qos.min_connection_prob = 0.6;
    out.push(("bounds [0.5, 3], Q=0.6".into(), s, 0.3));
    let mut s = Scenario::all_unity(4.0);
    s.qos.min_connection_prob = 0.05;
    s.channel.noise = 0.1;
    out.push(("all-unity, low noise".into(), s, 0.5));
    let mut s = base;
    s.secondary.sinr_threshold = 4.0;
    s.weights.ab = 0.5;
    out.push(("q_s=4, gamma_ab=0.5".into(), s, 0.25));
    out
}

fn optimizer_dominates_grid_and_respects_constraint() {
    let mut lines = Vec::new();
    let mut ok = true;
    let scenarios = optimizer_scenarios();
    for (name, sc, d) in &scenarios {
        let sol = solve(*d, sc).unwrap();
        let q = sc.qos.min_connection_prob;
        let mut grid_best = 0.0f64;
        for i in 0..OPT_GRID {
            let power =
                sc.bounds.lo + (sc.bounds.hi - sc.bounds.lo) * i as f64 / (OPT_GRID - 1) as f64;
            for j in 0..OPT_GRID {
                let st = Strategy::new(power, j as f64 / (OPT_GRID - 1) as f64);
                if primary_constraint(&st, sc).unwrap() >= q {
                    grid_best = grid_best.max(spatial_density(&st, *d, sc).unwrap());
                }
            }
        }
        let dominates = sol.objective >= grid_best - OPT_GRID_SLACK;
        let meets =
            sol.constraint_value >= q - CONSTRAINT_SLACK && feasible(&sol.strategy, sc).unwrap();
        let active_ok = !sol.boundary_active || (sol.constraint_value - q).abs() <= ACTIVE_BAND;
        ok &= dominates && meets && active_ok;
        lines.push(format!(
            "{name}: ({:.4}, {:.4}) obj {:.6} grid {:.6} H_p {:.7} active {}",
            sol.strategy.power,
            sol.strategy.access_prob,
            sol.objective,
            grid_best,
            sol.constraint_value,
            sol.boundary_active
        ));
    }
    for l in &lines {
        println!("  {l}");
    }

    let mut strict = Scenario::sensor_network();
    strict.qos.min_connection_prob = 1.0;
    let infeasible = matches!(solve(0.5, &strict), Err(Error::Infeasible { .. }));
    verdict(
        "optimizer vs 200x200 feasible grid",
        ok && scenarios.len() >= 10 && infeasible,
        &format!(
            "{} scenarios, Q=1 infeasible: {infeasible}",
            scenarios.len()
        ),
    );
}

fn network_experiment_properties() {
    let sc = Scenario::sensor_network();
    let window = SimWindow::square(10.0);
    let counts = PairCounts::Fixed {
        primary: 20,
        secondary: 20,
    };
    let rng = RngSpec::new(7);
    let start = Instant::now();
    let run = run_experiment(&sc, &window, counts, EXPERIMENT_BLOCKS, &rng).unwrap();
    let elapsed = start.elapsed();

    let dominance = run
        .stats
        .on
        .primary
        .iter()
        .chain(&run.stats.on.secondary)
        .zip(run.stats.off.primary.iter().chain(&run.stats.off.secondary))
        .all(|(on, off)| off.attempts == on.attempts && off.success_rate() >= on.success_rate());
    verdict(
        "(a) rate_off >= rate_on for every pair",
        dominance,
        "40 pairs",
    );

    let s = run.summary;
    verdict(
        "(b) primary degradation < 0",
        s.primary_degradation < 0.0,
        &format!(
            "{:.4} (primary {:.4} with vs {:.4} without cross-tier)",
            s.primary_degradation, s.primary_rate_on, s.primary_rate_off
        ),
    );
    verdict(
        "(c) mean secondary per-attempt success > 0",
        s.secondary_rate_on > 0.0,
        &format!(
            "{:.4} per attempt, {:.4} per block",
            s.secondary_rate_on, s.secondary_raw_on
        ),
    );
    let all_feasible = run.strategies.iter().all(|st| feasible(st, &sc).unwrap());
    verdict(
        "(d) every adopted strategy is feasible",
        all_feasible,
        &format!("{} strategies", run.strategies.len()),
    );

    let render = |r: &underlay_core::experiment::ExperimentRun| {
        let mut buf = Vec::new();
        write_pairs_csv(&mut buf, &r.deployment, &r.plans, &sc).unwrap();
        write_success_csv(&mut buf, &r.stats).unwrap();
        write_summary_csv(&mut buf, &r.summary).unwrap();
        buf
    };
    let replay = run_experiment(&sc, &window, counts, EXPERIMENT_BLOCKS, &rng).unwrap();
    verdict(
        "(e) bit-identical replay",
        replay == run && render(&replay) == render(&run),
        &format!("first run {elapsed:.1?}"),
    );
}

fn thinning_equivalence() {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    let cases = [
        (4.0, 0.2, 0.3),
        (4.0, 0.5, 0.3),
        (4.0, 0.8, 0.5),
        (3.5, 0.3, 0.2),
        (4.0, 0.6, 0.4),
        (5.0, 0.4, 0.6),
        (5.0, 0.9, 0.2),
        (6.0, 0.5, 0.7),
        (3.5, 0.25, 0.5),
        (4.5, 0.7, 0.1),
    ];
    for (i, &(eta, p, d)) in cases.iter().enumerate() {
        let mut aloha = Scenario::all_unity(eta);
        aloha.primary.access_prob = p;
        aloha.secondary.access_prob = p;
        let mut thinned = Scenario::all_unity(eta);
        thinned.primary.density = p;
        thinned.secondary.density = p;
        let link = LinkQuery::primary(d);
        let window = SimWindow::for_link(&link, &aloha, DEFAULT_BIAS_TOL).unwrap();
        let a = estimate_connection_probability(
            &link,
            &aloha,
            THINNING_TRIALS,
            &window,
            &RngSpec::new(31).with_stream(2 * i as u64),
        )
        .unwrap();
        let b = estimate_connection_probability(
            &link,
            &thinned,
            THINNING_TRIALS,
            &window,
            &RngSpec::new(31).with_stream(2 * i as u64 + 1),
        )
        .unwrap();
        let joint = (a.sigma().powi(2) + b.sigma().powi(2)).sqrt();
        let z = (a.mean - b.mean).abs() / joint;
        worst = worst.max(z);
        if z > THINNING_SIGMAS {
            bad.push(format!(
                "eta={eta} p={p} d={d}: {:.4} vs {:.4}",
                a.mean, b.mean
            ));
        }
    }
    verdict(
        "(lambda, p) vs (p lambda, 1) Monte Carlo",
        bad.is_empty(),
        &format!(
            "{} grid points, worst |z| {worst:.2}{}",
            cases.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {bad:?}")
            }
        ),
    );
}

fn main() {
    let checks: [(&str, fn()); 7] = [
        (
            "laplace exponent vs PGF quadrature",
            closed_form_matches_quadrature_oracle,
        ),
        ("epsilon = 0 classical limit", classical_limit),
        (
            "Monte Carlo vs closed form",
            monte_carlo_reproduces_connection_curves,
        ),
        (
            "unique interior maximum of p * H(p)",
            access_times_connection_is_unimodal,
        ),
        (
            "optimizer vs feasible grid",
            optimizer_dominates_grid_and_respects_constraint,
        ),
        ("network experiment", network_experiment_properties),
        ("thinning equivalence", thinning_equivalence),
    ];
    for (name, check) in checks {
        if std::panic::catch_unwind(check).is_err() {
            println!("[FAIL] {name}: panicked");
            FAILED.store(true, Ordering::SeqCst);
        }
    }
    if FAILED.load(Ordering::SeqCst) {
        std::process::exit(1);
    }
}
