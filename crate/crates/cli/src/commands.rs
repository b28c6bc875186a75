use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use underlay_core::analytic::{connection_probability, LinkQuery};
use underlay_core::experiment::{
    run_experiment, write_pairs_csv, write_success_csv, write_summary_csv, PairCounts,
};
use underlay_core::model::{validate, Usage};
use underlay_core::montecarlo::{
    estimate_connection_probability, RngSpec, SimWindow, DEFAULT_BIAS_TOL,
};
use underlay_core::optimizer::solve;
use underlay_core::{Error, Scenario};

use crate::args::{Cli, Command, CurveArgs, ExperimentArgs, Grid, Mode, OptimizeArgs, VerifyArgs};
use crate::manifest::{write_atomic, Manifest};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;
pub const EXIT_IO: u8 = 4;

pub const CURVE_COLUMNS: [&str; 2] = ["d", "h_analytic"];
pub const VERIFY_COLUMNS: [&str; 6] = ["eta", "d", "h_analytic", "h_mc", "ci95", "pass"];
pub const OPTIMIZE_COLUMNS: [&str; 7] = [
    "d",
    "q",
    "power",
    "access",
    "objective",
    "constraint_value",
    "boundary_active",
];

const MIN_VERIFY_TRIALS: u64 = 1_000;
const MC_ABS_FLOOR: f64 = 0.01;
const MC_CI_MULTIPLE: f64 = 3.0;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    /// Exit code only; the cause has already been printed.
    pub fn silent(code: u8) -> Self {
        Failure {
            code,
            message: String::new(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } => EXIT_INFEASIBLE,
            Error::Io(_) | Error::Csv(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e).into()
    }
}

/// The scenario after applying the global flags, plus a record of what the flags changed.
pub fn effective_scenario(cli: &Cli) -> Result<(Scenario, BTreeMap<String, String>), Failure> {
    let mut scenario = match &cli.config {
        Some(path) => Scenario::from_path(path).map_err(|e| match e {
            Error::Io(io) => Failure {
                code: EXIT_IO,
                message: format!("{}: {io}", path.display()),
            },
            other => Failure::validation(format!("{}: {other}", path.display())),
        })?,
        None => Scenario::sensor_network(),
    };
    let mut overrides = BTreeMap::new();
    if let Some(eta) = cli.eta {
        scenario.channel.eta = eta;
        overrides.insert("channel.eta".into(), eta.to_string());
    }
    if cli.no_cross_tier {
        scenario = scenario.without_cross_tier();
        overrides.insert("weights.ab".into(), "0".into());
        overrides.insert("weights.ba".into(), "0".into());
    }
    if let Command::Optimize(OptimizeArgs { q: Some(q), .. }) = &cli.command {
        scenario.qos.min_connection_prob = *q;
        overrides.insert("qos.min_connection_prob".into(), q.to_string());
    }
    Ok((scenario, overrides))
}

fn require_valid(scenario: &Scenario, usage: Usage) -> Result<(), Failure> {
    let report = validate(scenario, usage);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.into_result().map_err(Failure::from)
}

pub fn dispatch(cli: &Cli, argv: &[String]) -> Result<(), Failure> {
    let (scenario, overrides) = effective_scenario(cli)?;
    let manifest = |subcommand: &str,
                    out: &Path,
                    seed: Option<u64>,
                    trials: Option<u64>,
                    blocks: Option<u64>| Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        seed,
        trials,
        blocks,
        out_dir: out.display().to_string(),
        scenario_hash: crate::manifest::scenario_hash(&scenario),
        overrides: overrides.clone(),
        args: argv.to_vec(),
    };
    match &cli.command {
        Command::Validate(a) => cmd_validate(&scenario, a.mode),
        Command::Curve(a) => {
            let csv = cmd_curve(&scenario, a)?;
            emit(a.out.as_deref(), "curve.csv", &csv, || {
                manifest("curve", a.out.as_deref().unwrap(), None, None, None)
            })
        }
        Command::Verify(a) => {
            let (csv, all_pass) = cmd_verify(&scenario, a)?;
            emit(a.out.as_deref(), "verify.csv", &csv, || {
                manifest(
                    "verify",
                    a.out.as_deref().unwrap(),
                    Some(a.seed),
                    Some(a.trials),
                    None,
                )
            })?;
            if all_pass {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_VERIFY,
                    message: "Monte Carlo disagrees with the closed form on at least one row"
                        .into(),
                })
            }
        }
        Command::Optimize(a) => {
            let csv = cmd_optimize(&scenario, a)?;
            emit(a.out.as_deref(), "optimize.csv", &csv, || {
                manifest("optimize", a.out.as_deref().unwrap(), None, None, None)
            })
        }
        Command::Experiment(a) => {
            let files = cmd_experiment(&scenario, a)?;
            std::fs::create_dir_all(&a.out)?;
            for (name, bytes) in &files {
                write_atomic(&a.out.join(name), bytes)?;
            }
            manifest("experiment", &a.out, Some(a.seed), None, Some(a.blocks)).write(&a.out)?;
            eprintln!("wrote {} files to {}", files.len() + 1, a.out.display());
            Ok(())
        }
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

/// Writes `csv` and a manifest into `out`, or prints `csv` to stdout.
fn emit(
    out: Option<&Path>,
    name: &str,
    csv: &[u8],
    manifest: impl FnOnce() -> Manifest,
) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_atomic(&dir.join(name), csv)?;
            manifest().write(dir)?;
        }
        None => std::io::stdout().lock().write_all(csv)?,
    }
    Ok(())
}

fn cmd_validate(scenario: &Scenario, mode: Mode) -> Result<(), Failure> {
    let usage = match mode {
        Mode::Analytic => Usage::Analytic,
        Mode::MonteCarlo => Usage::MonteCarlo,
    };
    let report = validate(scenario, usage);
    if report.is_valid() {
        for w in &report.warnings {
            println!("warning: {w}");
        }
        println!("ok");
        Ok(())
    } else {
        Err(Error::InvalidScenario(report).into())
    }
}

fn grid_points(g: &Grid) -> Result<Vec<f64>, Failure> {
    if !(g.d_min.is_finite() && g.d_max.is_finite() && 0.0 <= g.d_min && g.d_min <= g.d_max) {
        return Err(Failure::validation(format!(
            "distance range [{}, {}] must satisfy 0 <= d-min <= d-max",
            g.d_min, g.d_max
        )));
    }
    match g.steps {
        0 => Err(Failure::validation("steps must be at least 1")),
        1 => Ok(vec![g.d_min]),
        n => Ok((0..n)
            .map(|i| {
                if i == n - 1 {
                    g.d_max
                } else {
                    g.d_min + (g.d_max - g.d_min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

fn csv_bytes<R: IntoIterator<Item = Vec<String>>>(
    header: &[&str],
    rows: R,
) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Failure::from(e.into_error()))
}

fn row(fields: &[&dyn Display]) -> Vec<String> {
    fields.iter().map(|f| f.to_string()).collect()
}

fn cmd_curve(scenario: &Scenario, a: &CurveArgs) -> Result<Vec<u8>, Failure> {
    require_valid(scenario, Usage::Analytic)?;
    let mut rows = Vec::new();
    for d in grid_points(&a.grid)? {
        let h = connection_probability(&LinkQuery::new(a.tier, d), scenario)
            .map_err(|e| Failure::from(e).context(format!("d = {d}")))?;
        rows.push(row(&[&d, &h]));
    }
    csv_bytes(&CURVE_COLUMNS, rows)
}

impl Failure {
    fn context(mut self, what: String) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

fn cmd_verify(scenario: &Scenario, a: &VerifyArgs) -> Result<(Vec<u8>, bool), Failure> {
    if a.trials < MIN_VERIFY_TRIALS {
        return Err(Failure::validation(format!(
            "trials must be at least {MIN_VERIFY_TRIALS}"
        )));
    }
    let etas = if a.etas.is_empty() {
        vec![scenario.channel.eta]
    } else {
        a.etas.clone()
    };
    let distances = grid_points(&a.grid)?;
    let root = RngSpec::new(a.seed);
    let mut rows = Vec::new();
    let mut all_pass = true;
    for (ei, &eta) in etas.iter().enumerate() {
        let mut sc = *scenario;
        sc.channel.eta = eta;
        require_valid(&sc, Usage::Analytic).map_err(|f| f.context(format!("eta = {eta}")))?;
        for (di, &d) in distances.iter().enumerate() {
            let link = LinkQuery::new(a.tier, d);
            let ctx = |f: Failure| f.context(format!("eta = {eta}, d = {d}"));
            let exact =
                connection_probability(&link, &sc).map_err(|e| ctx(e.into()))? + a.corrupt_analytic;
            let window =
                SimWindow::for_link(&link, &sc, DEFAULT_BIAS_TOL).map_err(|e| ctx(e.into()))?;
            let rng = root.with_stream((ei * distances.len() + di) as u64);
            let est = estimate_connection_probability(&link, &sc, a.trials, &window, &rng)
                .map_err(|e| ctx(e.into()))?;
            let pass =
                (est.mean - exact).abs() <= MC_ABS_FLOOR.max(MC_CI_MULTIPLE * est.ci95_halfwidth);
            all_pass &= pass;
            rows.push(row(&[
                &eta,
                &d,
                &exact,
                &est.mean,
                &est.ci95_halfwidth,
                &pass,
            ]));
        }
    }
    Ok((csv_bytes(&VERIFY_COLUMNS, rows)?, all_pass))
}

fn cmd_optimize(scenario: &Scenario, a: &OptimizeArgs) -> Result<Vec<u8>, Failure> {
    if !(a.distance.is_finite() && a.distance >= 0.0) {
        return Err(Failure::validation(format!(
            "distance must be a non-negative number, got {}",
            a.distance
        )));
    }
    let sol = solve(a.distance, scenario)?;
    let q = scenario.qos.min_connection_prob;
    let r = row(&[
        &a.distance,
        &q,
        &sol.strategy.power,
        &sol.strategy.access_prob,
        &sol.objective,
        &sol.constraint_value,
        &sol.boundary_active,
    ]);
    csv_bytes(&OPTIMIZE_COLUMNS, [r])
}

fn cmd_experiment(
    scenario: &Scenario,
    a: &ExperimentArgs,
) -> Result<Vec<(&'static str, Vec<u8>)>, Failure> {
    require_valid(scenario, Usage::Analytic)?;
    if !(a.window.is_finite() && a.window > 0.0) {
        return Err(Failure::validation(format!(
            "window must be positive, got {}",
            a.window
        )));
    }
    if a.blocks == 0 {
        return Err(Failure::validation("blocks must be at least 1"));
    }
    let counts = if a.ppp {
        PairCounts::Poisson
    } else if a.pairs.len() != 2 {
        return Err(Failure::validation(
            "pairs takes two counts, primary and secondary, e.g. --pairs 20,20",
        ));
    } else {
        PairCounts::Fixed {
            primary: a.pairs[0],
            secondary: a.pairs[1],
        }
    };
    let run = run_experiment(
        scenario,
        &SimWindow::square(a.window),
        counts,
        a.blocks,
        &RngSpec::new(a.seed),
    )?;
    let mut pairs = Vec::new();
    write_pairs_csv(&mut pairs, &run.deployment, &run.plans, scenario)?;
    let mut success = Vec::new();
    write_success_csv(&mut success, &run.stats)?;
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &run.summary)?;
    Ok(vec![
        ("pairs.csv", pairs),
        ("success.csv", success),
        ("summary.csv", summary),
    ])
}
