//! Finite two-tier network: deploy, plan every secondary transmitter
//! independently, then count successes over fading resource blocks with and
//! without cross-tier interference.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::analytic::attenuation;
use crate::error::{Error, Result};
use crate::model::{Scenario, Strategy, Tier};
use crate::montecarlo::{sample_ppp_with, uniform_point, RngSpec, SimWindow};
use crate::optimizer::{solve, OptimalStrategy};

pub const PAIRS_COLUMNS: [&str; 6] = [
    "pair_id",
    "tier",
    "distance",
    "power",
    "access",
    "objective",
];
pub const SUCCESS_COLUMNS: [&str; 7] = [
    "pair_id",
    "tier",
    "attempts",
    "successes",
    "rate_on",
    "rate_off",
    "raw_rate",
];
pub const SUMMARY_COLUMNS: [&str; 11] = [
    "blocks",
    "primary_rate_on",
    "primary_rate_off",
    "primary_raw_on",
    "primary_raw_off",
    "secondary_rate_on",
    "secondary_rate_off",
    "secondary_raw_on",
    "secondary_raw_off",
    "primary_degradation",
    "silent_secondaries",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub tx: [f64; 2],
    pub rx: [f64; 2],
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Pair {
    pub fn distance(&self) -> f64 {
        dist(self.tx, self.rx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCounts {
    Fixed {
        primary: usize,
        secondary: usize,
    },
    /// Poisson numbers of pairs with each tier's density over the window area.
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub window: SimWindow,
    pub primary_pairs: Vec<Pair>,
    pub secondary_pairs: Vec<Pair>,
}

impl Deployment {
    pub fn pairs(&self, tier: Tier) -> &[Pair] {
        match tier {
            Tier::Primary => &self.primary_pairs,
            Tier::Secondary => &self.secondary_pairs,
        }
    }

    /// Distance from transmitter `k` of tier `from` to receiver `i` of tier `to`.
    pub fn distance(&self, from: Tier, k: usize, to: Tier, i: usize) -> f64 {
        dist(self.pairs(from)[k].tx, self.pairs(to)[i].rx)
    }
}

/// Transmitters uniform in the window; each receiver uniform in the disk of
/// radius `R` around its transmitter.
pub fn deploy(
    scenario: &Scenario,
    window: &SimWindow,
    counts: PairCounts,
    rng: &RngSpec,
) -> Deployment {
    let radius = scenario.qos.pairing_range;
    let place = |tier: Tier, fixed: Option<usize>, stream: u64| -> Vec<Pair> {
        let mut g = rng.substream(stream).rng();
        let transmitters = match fixed {
            Some(n) => (0..n).map(|_| uniform_point(window, &mut g)).collect(),
            None => sample_ppp_with(scenario.tier(tier).density, window, &mut g),
        };
        transmitters
            .into_iter()
            .map(|tx| {
                let r = radius * g.random::<f64>().sqrt();
                let theta = 2.0 * std::f64::consts::PI * g.random::<f64>();
                Pair {
                    tx,
                    rx: [tx[0] + r * theta.cos(), tx[1] + r * theta.sin()],
                }
            })
            .collect()
    };
    let (np, ns) = match counts {
        PairCounts::Fixed { primary, secondary } => (Some(primary), Some(secondary)),
        PairCounts::Poisson => (None, None),
    };
    Deployment {
        window: *window,
        primary_pairs: place(Tier::Primary, np, 0),
        secondary_pairs: place(Tier::Secondary, ns, 1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Planned(OptimalStrategy),
    /// The transmitter found no feasible strategy and stays silent.
    Silent {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub pair: usize,
    pub distance: f64,
    pub outcome: PlanOutcome,
}

impl PlanEntry {
    /// The strategy the transmitter adopts; silent pairs never access the channel.
    pub fn strategy(&self, scenario: &Scenario) -> Strategy {
        match &self.outcome {
            PlanOutcome::Planned(o) => o.strategy,
            PlanOutcome::Silent { .. } => Strategy::new(scenario.bounds.lo, 0.0),
        }
    }

    pub fn objective(&self) -> f64 {
        match &self.outcome {
            PlanOutcome::Planned(o) => o.objective,
            PlanOutcome::Silent { .. } => 0.0,
        }
    }
}

/// Each secondary transmitter solves its own problem at its own distance.
pub fn optimize_all(deployment: &Deployment, scenario: &Scenario) -> Result<Vec<PlanEntry>> {
    deployment
        .secondary_pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let distance = pair.distance();
            let outcome = match solve(distance, scenario) {
                Ok(o) => PlanOutcome::Planned(o),
                Err(e @ Error::Infeasible { .. }) => PlanOutcome::Silent {
                    reason: e.to_string(),
                },
                Err(e) => return Err(e),
            };
            Ok(PlanEntry {
                pair: i,
                distance,
                outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossTier {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairStats {
    pub attempts: u64,
    pub successes: u64,
}

impl PairStats {
    /// Successes per attempted transmission; zero when the pair never transmitted.
    pub fn success_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }

    /// Successes per resource block.
    pub fn raw_rate(&self, blocks: u64) -> f64 {
        self.successes as f64 / blocks as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessStats {
    pub blocks: u64,
    pub cross_tier: CrossTier,
    pub primary: Vec<PairStats>,
    pub secondary: Vec<PairStats>,
}

impl SuccessStats {
    pub fn tier(&self, tier: Tier) -> &[PairStats] {
        match tier {
            Tier::Primary => &self.primary,
            Tier::Secondary => &self.secondary,
        }
    }

    /// Mean per-attempt success rate over pairs that attempted at least once.
    pub fn mean_success_rate(&self, tier: Tier) -> f64 {
        let active: Vec<_> = self.tier(tier).iter().filter(|p| p.attempts > 0).collect();
        if active.is_empty() {
            return 0.0;
        }
        active.iter().map(|p| p.success_rate()).sum::<f64>() / active.len() as f64
    }

    /// Mean per-block success rate over all pairs.
    pub fn mean_raw_rate(&self, tier: Tier) -> f64 {
        let pairs = self.tier(tier);
        if pairs.is_empty() {
            return 0.0;
        }
        pairs.iter().map(|p| p.raw_rate(self.blocks)).sum::<f64>() / pairs.len() as f64
    }
}

struct Node {
    tier: Tier,
    power: f64,
    access: f64,
    threshold: f64,
}

/// Simulates `blocks` resource blocks over the fixed deployment.
///
/// Block `b` draws from `rng.substream(b)`: one uniform per transmitter for
/// its access decision (primaries first), then one unit exponential fading
/// per (receiver, transmitter) link in row-major order. The draws do not
/// depend on `cross_tier`, so on and off runs with the same `rng` see
/// identical activity and fading.
pub fn run_resource_blocks(
    deployment: &Deployment,
    strategies: &[Strategy],
    scenario: &Scenario,
    blocks: u64,
    cross_tier: CrossTier,
    rng: &RngSpec,
) -> Result<SuccessStats> {
    if blocks == 0 {
        return Err(Error::Domain(
            "at least one resource block is required".into(),
        ));
    }
    if strategies.len() != deployment.secondary_pairs.len() {
        return Err(Error::Domain(format!(
            "{} strategies for {} secondary pairs",
            strategies.len(),
            deployment.secondary_pairs.len()
        )));
    }
    let sc = match cross_tier {
        CrossTier::On => *scenario,
        CrossTier::Off => scenario.without_cross_tier(),
    };
    let ch = sc.channel;

    let mut nodes = Vec::new();
    let mut pairs = Vec::new();
    for pair in &deployment.primary_pairs {
        nodes.push(Node {
            tier: Tier::Primary,
            power: sc.primary.power,
            access: sc.primary.access_prob,
            threshold: sc.primary.sinr_threshold,
        });
        pairs.push(*pair);
    }
    for (pair, st) in deployment.secondary_pairs.iter().zip(strategies) {
        nodes.push(Node {
            tier: Tier::Secondary,
            power: st.power,
            access: st.access_prob,
            threshold: sc.secondary.sinr_threshold,
        });
        pairs.push(*pair);
    }
    let n = nodes.len();

    // mean received power at receiver i from transmitter k, weighted for interference
    let mut received = vec![0.0; n * n];
    let mut signal_attenuation = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            let a = attenuation(dist(pairs[k].tx, pairs[i].rx), &ch);
            if k == i {
                signal_attenuation[i] = a;
            } else {
                received[i * n + k] = sc.weight(nodes[k].tier, nodes[i].tier) * nodes[k].power / a;
            }
        }
    }

    let counts = (0..blocks)
        .into_par_iter()
        .fold(
            || (vec![PairStats::default(); n], vec![false; n]),
            |(mut acc, mut active), b| {
                let mut g = rng.substream(b).rng();
                for (k, node) in nodes.iter().enumerate() {
                    active[k] = g.random::<f64>() < node.access;
                }
                for i in 0..n {
                    let mut interference = 0.0;
                    let mut signal_fading = 0.0;
                    for k in 0..n {
                        let h: f64 = Exp1.sample(&mut g);
                        if k == i {
                            signal_fading = h;
                        } else if active[k] {
                            interference += h * received[i * n + k];
                        }
                    }
                    if active[i] {
                        acc[i].attempts += 1;
                        // SINR >= q  <=>  P h >= q (N + I) (epsilon + d^eta)
                        if nodes[i].power * signal_fading
                            >= nodes[i].threshold
                                * (ch.noise + interference)
                                * signal_attenuation[i]
                        {
                            acc[i].successes += 1;
                        }
                    }
                }
                (acc, active)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || vec![PairStats::default(); n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.attempts += y.attempts;
                    x.successes += y.successes;
                }
                a
            },
        );

    let n_primary = deployment.primary_pairs.len();
    Ok(SuccessStats {
        blocks,
        cross_tier,
        primary: counts[..n_primary].to_vec(),
        secondary: counts[n_primary..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentStats {
    pub on: SuccessStats,
    pub off: SuccessStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub blocks: u64,
    pub primary_rate_on: f64,
    pub primary_rate_off: f64,
    pub primary_raw_on: f64,
    pub primary_raw_off: f64,
    pub secondary_rate_on: f64,
    pub secondary_rate_off: f64,
    pub secondary_raw_on: f64,
    pub secondary_raw_off: f64,
    /// Relative change of the mean primary success rate caused by cross-tier interference.
    pub primary_degradation: f64,
    pub silent_secondaries: usize,
}

pub fn summarize(stats: &ExperimentStats) -> Summary {
    let (on, off) = (&stats.on, &stats.off);
    let primary_rate_on = on.mean_success_rate(Tier::Primary);
    let primary_rate_off = off.mean_success_rate(Tier::Primary);
    let primary_degradation = if primary_rate_off > 0.0 {
        (primary_rate_on - primary_rate_off) / primary_rate_off
    } else {
        0.0
    };
    Summary {
        blocks: on.blocks,
        primary_rate_on,
        primary_rate_off,
        primary_raw_on: on.mean_raw_rate(Tier::Primary),
        primary_raw_off: off.mean_raw_rate(Tier::Primary),
        secondary_rate_on: on.mean_success_rate(Tier::Secondary),
        secondary_rate_off: off.mean_success_rate(Tier::Secondary),
        secondary_raw_on: on.mean_raw_rate(Tier::Secondary),
        secondary_raw_off: off.mean_raw_rate(Tier::Secondary),
        primary_degradation,
        silent_secondaries: on.secondary.iter().filter(|p| p.attempts == 0).count(),
    }
}

/// Everything produced by one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub deployment: Deployment,
    pub plans: Vec<PlanEntry>,
    pub strategies: Vec<Strategy>,
    pub stats: ExperimentStats,
    pub summary: Summary,
}

/// Deploy, plan, simulate with and without cross-tier interference, summarise.
/// The deployment uses `rng.substream(0)`, both block simulations share `rng.substream(1)`.
pub fn run_experiment(
    scenario: &Scenario,
    window: &SimWindow,
    counts: PairCounts,
    blocks: u64,
    rng: &RngSpec,
) -> Result<ExperimentRun> {
    let deployment = deploy(scenario, window, counts, &rng.substream(0));
    let plans = optimize_all(&deployment, scenario)?;
    let strategies: Vec<_> = plans.iter().map(|p| p.strategy(scenario)).collect();
    let block_rng = rng.substream(1);
    let on = run_resource_blocks(
        &deployment,
        &strategies,
        scenario,
        blocks,
        CrossTier::On,
        &block_rng,
    )?;
    let off = run_resource_blocks(
        &deployment,
        &strategies,
        scenario,
        blocks,
        CrossTier::Off,
        &block_rng,
    )?;
    let stats = ExperimentStats { on, off };
    let summary = summarize(&stats);
    Ok(ExperimentRun {
        deployment,
        plans,
        strategies,
        stats,
        summary,
    })
}

pub fn write_pairs_csv<W: Write>(
    out: W,
    deployment: &Deployment,
    plans: &[PlanEntry],
    scenario: &Scenario,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIRS_COLUMNS)?;
    for (i, pair) in deployment.primary_pairs.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            Tier::Primary.to_string(),
            pair.distance().to_string(),
            scenario.primary.power.to_string(),
            scenario.primary.access_prob.to_string(),
            String::new(),
        ])?;
    }
    for plan in plans {
        let st = plan.strategy(scenario);
        w.write_record([
            (plan.pair + 1).to_string(),
            Tier::Secondary.to_string(),
            plan.distance.to_string(),
            st.power.to_string(),
            st.access_prob.to_string(),
            plan.objective().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_success_csv<W: Write>(out: W, stats: &ExperimentStats) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUCCESS_COLUMNS)?;
    for tier in [Tier::Primary, Tier::Secondary] {
        for (i, (on, off)) in stats
            .on
            .tier(tier)
            .iter()
            .zip(stats.off.tier(tier))
            .enumerate()
        {
            w.write_record([
                (i + 1).to_string(),
                tier.to_string(),
                on.attempts.to_string(),
                on.successes.to_string(),
                on.success_rate().to_string(),
                off.success_rate().to_string(),
                on.raw_rate(stats.on.blocks).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, summary: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    w.write_record([
        summary.blocks.to_string(),
        summary.primary_rate_on.to_string(),
        summary.primary_rate_off.to_string(),
        summary.primary_raw_on.to_string(),
        summary.primary_raw_off.to_string(),
        summary.secondary_rate_on.to_string(),
        summary.secondary_rate_off.to_string(),
        summary.secondary_raw_on.to_string(),
        summary.secondary_raw_off.to_string(),
        summary.primary_degradation.to_string(),
        summary.silent_secondaries.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_run() -> (Scenario, Deployment, Vec<Strategy>) {
        let sc = Scenario::sensor_network();
        let dep = deploy(
            &sc,
            &SimWindow::square(10.0),
            PairCounts::Fixed {
                primary: 6,
                secondary: 6,
            },
            &RngSpec::new(21),
        );
        let plans = optimize_all(&dep, &sc).unwrap();
        let strategies = plans.iter().map(|p| p.strategy(&sc)).collect();
        (sc, dep, strategies)
    }

    #[test]
    fn deploy_fixed_counts_within_range() {
        let sc = Scenario::sensor_network();
        let w = SimWindow::square(10.0);
        let dep = deploy(
            &sc,
            &w,
            PairCounts::Fixed {
                primary: 20,
                secondary: 20,
            },
            &RngSpec::new(1),
        );
        assert_eq!(dep.primary_pairs.len() + dep.secondary_pairs.len(), 40);
        for p in dep.primary_pairs.iter().chain(&dep.secondary_pairs) {
            assert!(p.distance() <= sc.qos.pairing_range);
            assert!(w.contains(p.tx));
        }
        let again = deploy(
            &sc,
            &w,
            PairCounts::Fixed {
                primary: 20,
                secondary: 20,
            },
            &RngSpec::new(1),
        );
        assert_eq!(dep, again);
    }

    #[test]
    fn deploy_zero_range_collocates() {
        let mut sc = Scenario::sensor_network();
        sc.qos.pairing_range = 0.0;
        let dep = deploy(
            &sc,
            &SimWindow::square(10.0),
            PairCounts::Fixed {
                primary: 5,
                secondary: 5,
            },
            &RngSpec::new(2),
        );
        assert!(dep
            .primary_pairs
            .iter()
            .chain(&dep.secondary_pairs)
            .all(|p| p.distance() == 0.0));
    }

    #[test]
    fn deploy_poisson_counts() {
        let sc = Scenario::sensor_network();
        let dep = deploy(
            &sc,
            &SimWindow::square(10.0),
            PairCounts::Poisson,
            &RngSpec::new(3),
        );
        // Poisson(20) each; a generous sanity range
        assert!((5..=40).contains(&dep.primary_pairs.len()));
        assert!((5..=40).contains(&dep.secondary_pairs.len()));
    }

    #[test]
    fn silent_network_never_attempts() {
        let (mut sc, dep, _) = small_run();
        sc.primary.access_prob = 0.0;
        let silent = vec![Strategy::new(0.0, 0.0); dep.secondary_pairs.len()];
        let stats =
            run_resource_blocks(&dep, &silent, &sc, 200, CrossTier::On, &RngSpec::new(4)).unwrap();
        assert!(stats
            .primary
            .iter()
            .chain(&stats.secondary)
            .all(|p| p.attempts == 0 && p.successes == 0));
    }

    #[test]
    fn removing_cross_tier_never_hurts() {
        let (sc, dep, strategies) = small_run();
        let rng = RngSpec::new(5);
        let on = run_resource_blocks(&dep, &strategies, &sc, 2000, CrossTier::On, &rng).unwrap();
        let off = run_resource_blocks(&dep, &strategies, &sc, 2000, CrossTier::Off, &rng).unwrap();
        for (a, b) in on
            .primary
            .iter()
            .chain(&on.secondary)
            .zip(off.primary.iter().chain(&off.secondary))
        {
            assert_eq!(a.attempts, b.attempts);
            assert!(b.successes >= a.successes);
        }
    }

    #[test]
    fn receiver_on_top_of_primary_transmitter_fails() {
        let sc = Scenario::sensor_network();
        let dep = Deployment {
            window: SimWindow::square(10.0),
            primary_pairs: vec![Pair {
                tx: [0.0, 0.0],
                rx: [0.5, 0.0],
            }],
            secondary_pairs: vec![Pair {
                tx: [0.0, 0.9],
                rx: [0.0, 0.01],
            }],
        };
        let strategies = [Strategy::new(1.0, 1.0)];
        let stats = run_resource_blocks(
            &dep,
            &strategies,
            &sc,
            5000,
            CrossTier::On,
            &RngSpec::new(6),
        )
        .unwrap();
        assert!(
            stats.secondary[0].success_rate() < 0.05,
            "{:?}",
            stats.secondary[0]
        );
        let off = run_resource_blocks(
            &dep,
            &strategies,
            &sc,
            5000,
            CrossTier::Off,
            &RngSpec::new(6),
        )
        .unwrap();
        assert!(off.secondary[0].success_rate() > 0.2);
    }

    #[test]
    fn identical_stats_summarize_to_no_degradation() {
        let (sc, dep, strategies) = small_run();
        let on = run_resource_blocks(&dep, &strategies, &sc, 300, CrossTier::On, &RngSpec::new(7))
            .unwrap();
        let s = summarize(&ExperimentStats {
            on: on.clone(),
            off: on,
        });
        assert_eq!(s.primary_degradation, 0.0);
    }

    #[test]
    fn strategies_must_match_pairs() {
        let (sc, dep, _) = small_run();
        assert!(run_resource_blocks(&dep, &[], &sc, 10, CrossTier::On, &RngSpec::new(1)).is_err());
    }

    #[test]
    fn csv_headers() {
        let (sc, dep, _) = small_run();
        let plans = optimize_all(&dep, &sc).unwrap();
        let mut buf = Vec::new();
        write_pairs_csv(&mut buf, &dep, &plans, &sc).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("pair_id,tier,distance,power,access,objective\n"));
        assert_eq!(text.lines().count(), 13);
    }
}
