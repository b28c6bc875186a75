//! Per-transmitter choice of secondary power and access probability.
//!
//! Each secondary transmitter maximises `p * lambda_s * H_s(d)` over
//! `(power, p)` subject to the primary link at half the pairing range
//! keeping `H_p(R/2) >= Q`, assuming every other secondary transmitter
//! makes the same choice at the same distance.
//!
//! At fixed access the objective is nondecreasing in power and the
//! constraint nonincreasing, so the best power is the largest feasible one,
//! found by bisection on the constraint. The remaining one-dimensional
//! search over access runs on a coarse grid and is polished by golden
//! section around the best grid point.

use crate::analytic::{connection_probability, spatial_density, LinkQuery};
use crate::error::{Error, Result};
use crate::model::{validate, Scenario, Strategy, Usage};

/// Number of access probabilities on the coarse grid, endpoints included.
pub const ACCESS_GRID_POINTS: usize = 64;
/// Power resolution of the constraint-boundary bisection inside `solve`.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Access resolution of the golden-section polish.
pub const POLISH_TOL: f64 = 1e-10;
/// Objectives closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;
/// The QoS constraint counts as active within this distance of `Q`.
pub const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalStrategy {
    pub strategy: Strategy,
    /// Spatial density of successful secondary transmissions.
    pub objective: f64,
    /// Primary connection probability at `R/2` under the strategy.
    pub constraint_value: f64,
    /// The QoS constraint is met with equality (within [`ACTIVE_TOL`]).
    pub boundary_active: bool,
    /// No feasible strategy yields a positive objective; the transmitter stays silent.
    pub idle: bool,
}

/// `H_p(R/2)` when every secondary transmitter adopts `strategy`.
pub fn primary_constraint(strategy: &Strategy, scenario: &Scenario) -> Result<f64> {
    let sc = scenario.with_strategy(*strategy);
    connection_probability(&LinkQuery::primary(0.5 * sc.qos.pairing_range), &sc)
}

pub fn feasible(strategy: &Strategy, scenario: &Scenario) -> Result<bool> {
    if !strategy.within(&scenario.bounds) {
        return Ok(false);
    }
    Ok(primary_constraint(strategy, scenario)? >= scenario.qos.min_connection_prob)
}

/// Largest power in the bounds that keeps the QoS constraint at this access
/// probability, to within `tol`. `None` when even the lowest power violates it.
pub fn boundary_power(access_prob: f64, scenario: &Scenario, tol: f64) -> Result<Option<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    let q = scenario.qos.min_connection_prob;
    let ok = |power: f64| -> Result<bool> {
        Ok(primary_constraint(&Strategy::new(power, access_prob), scenario)? >= q)
    };
    let (mut lo, mut hi) = (scenario.bounds.lo, scenario.bounds.hi);
    if !ok(lo)? {
        return Ok(None);
    }
    if ok(hi)? {
        return Ok(Some(hi));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    strategy: Strategy,
    objective: f64,
}

impl Candidate {
    /// Higher objective wins; within [`TIE_TOL`] lower power, then lower access.
    fn beats(&self, other: &Candidate) -> bool {
        if self.objective > other.objective + TIE_TOL {
            return true;
        }
        if other.objective > self.objective + TIE_TOL {
            return false;
        }
        (self.strategy.power, self.strategy.access_prob)
            < (other.strategy.power, other.strategy.access_prob)
    }
}

fn pick(best: Option<Candidate>, c: Option<Candidate>) -> Option<Candidate> {
    match (best, c) {
        (None, c) => c,
        (b, None) => b,
        (Some(b), Some(c)) => Some(if c.beats(&b) { c } else { b }),
    }
}

/// Maximises the spatial density of successful secondary transmissions for a
/// secondary pair `d_secondary` apart.
pub fn solve(d_secondary: f64, scenario: &Scenario) -> Result<OptimalStrategy> {
    validate(scenario, Usage::Analytic).into_result()?;
    if d_secondary.is_nan() || d_secondary < 0.0 {
        return Err(Error::Domain(format!(
            "distance must be >= 0, got {d_secondary}"
        )));
    }
    let q = scenario.qos.min_connection_prob;
    let silent = Strategy::new(scenario.bounds.lo, 0.0);
    let primary_only = primary_constraint(&silent, scenario)?;
    if primary_only < q {
        return Err(Error::Infeasible {
            primary_only,
            required: q,
        });
    }

    let evaluate = |p: f64| -> Result<Option<Candidate>> {
        let Some(power) = boundary_power(p, scenario, BOUNDARY_TOL)? else {
            return Ok(None);
        };
        let strategy = Strategy::new(power, p);
        Ok(Some(Candidate {
            strategy,
            objective: spatial_density(&strategy, d_secondary, scenario)?,
        }))
    };

    let step = 1.0 / (ACCESS_GRID_POINTS - 1) as f64;
    let mut best: Option<Candidate> = None;
    let mut best_index = 0;
    for j in 0..ACCESS_GRID_POINTS {
        let c = evaluate(j as f64 * step)?;
        let next = pick(best, c);
        if let (Some(n), Some(c)) = (next, c) {
            if n.strategy == c.strategy {
                best_index = j;
            }
        }
        best = next;
    }

    let a = best_index.saturating_sub(1) as f64 * step;
    let b = ((best_index + 1).min(ACCESS_GRID_POINTS - 1) as f64 * step).min(1.0);
    let polished = golden_section_max(
        |p| Ok(evaluate(p)?.map_or(f64::NEG_INFINITY, |c| c.objective)),
        a,
        b,
        POLISH_TOL,
    )?;
    best = pick(best, evaluate(polished)?);

    let best = best.expect("access 0 is feasible once the primary-only check passes");
    if !(best.objective > 0.0) {
        return Ok(OptimalStrategy {
            strategy: silent,
            objective: 0.0,
            constraint_value: primary_only,
            boundary_active: (primary_only - q).abs() <= ACTIVE_TOL,
            idle: true,
        });
    }
    let constraint_value = primary_constraint(&best.strategy, scenario)?;
    Ok(OptimalStrategy {
        strategy: best.strategy,
        objective: best.objective,
        constraint_value,
        boundary_active: (constraint_value - q).abs() <= ACTIVE_TOL,
        idle: false,
    })
}

/// Golden-section search for a maximiser of `f` on `[a, b]`.
fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { x1 } else { x2 })
}

/// Largest objective gain available by moving one coordinate of the
/// solution by `±step` while staying inside the box and the QoS constraint.
/// Zero or negative at a local maximum.
pub fn local_improvement(
    solution: &OptimalStrategy,
    d_secondary: f64,
    scenario: &Scenario,
    step: f64,
) -> Result<f64> {
    let s = solution.strategy;
    let neighbours = [
        Strategy::new(s.power + step, s.access_prob),
        Strategy::new(s.power - step, s.access_prob),
        Strategy::new(s.power, s.access_prob + step),
        Strategy::new(s.power, s.access_prob - step),
    ];
    let mut gain = f64::NEG_INFINITY;
    for n in neighbours {
        if feasible(&n, scenario)? {
            gain = gain.max(spatial_density(&n, d_secondary, scenario)? - solution.objective);
        }
    }
    Ok(gain)
}

/// What a secondary transmitter senses or looks up before planning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerInputs {
    pub eta: f64,
    pub primary_power: f64,
    pub primary_access: f64,
    pub gamma_bb: f64,
    pub gamma_ab: f64,
    pub own_distance: f64,
}

impl PlannerInputs {
    /// Inputs that reproduce `scenario` for a pair `own_distance` apart.
    pub fn from_scenario(scenario: &Scenario, own_distance: f64) -> Self {
        PlannerInputs {
            eta: scenario.channel.eta,
            primary_power: scenario.primary.power,
            primary_access: scenario.primary.access_prob,
            gamma_bb: scenario.weights.bb,
            gamma_ab: scenario.weights.ab,
            own_distance,
        }
    }
}

/// Local planning step: sensed inputs override the stored configuration,
/// then the transmitter solves its own problem.
pub fn plan_transmission(
    inputs: &PlannerInputs,
    scenario_defaults: &Scenario,
) -> Result<OptimalStrategy> {
    let mut sc = *scenario_defaults;
    sc.channel.eta = inputs.eta;
    sc.primary.power = inputs.primary_power;
    sc.primary.access_prob = inputs.primary_access;
    sc.weights.bb = inputs.gamma_bb;
    sc.weights.ab = inputs.gamma_ab;
    solve(inputs.own_distance, &sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor() -> Scenario {
        Scenario::sensor_network()
    }

    #[test]
    fn silent_strategy_is_feasible_when_primary_alone_is() {
        let sc = sensor();
        assert!(feasible(&Strategy::new(sc.bounds.lo, 0.0), &sc).unwrap());
    }

    #[test]
    fn q_one_is_never_feasible_with_noise() {
        let mut sc = sensor();
        sc.qos.min_connection_prob = 1.0;
        for st in [
            Strategy::new(0.0, 0.0),
            Strategy::new(1.0, 0.5),
            Strategy::new(5.0, 1.0),
        ] {
            assert!(!feasible(&st, &sc).unwrap());
        }
        match solve(0.3, &sc) {
            Err(Error::Infeasible {
                primary_only,
                required,
            }) => {
                assert!(primary_only < 1.0);
                assert_eq!(required, 1.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn sensor_network_feasibility_examples() {
        let sc = sensor();
        assert!(!feasible(&Strategy::new(5.0, 1.0), &sc).unwrap());
        assert!(feasible(&Strategy::new(0.34, 1.0), &sc).unwrap());
        assert!(!feasible(&Strategy::new(6.0, 0.0), &sc).unwrap());
    }

    #[test]
    fn boundary_power_trivial_cases() {
        let sc = sensor();
        assert_eq!(boundary_power(0.0, &sc, 1e-9).unwrap(), Some(sc.bounds.hi));
        let mut orth = sc;
        orth.weights.ba = 0.0;
        for p in [0.1, 0.5, 1.0] {
            assert_eq!(
                boundary_power(p, &orth, 1e-9).unwrap(),
                Some(orth.bounds.hi)
            );
        }
    }

    #[test]
    fn boundary_power_hits_the_constraint() {
        let sc = sensor();
        let tol = 1e-9;
        let p = boundary_power(1.0, &sc, tol).unwrap().unwrap();
        assert!(p > 0.0 && p < 5.0);
        let h = primary_constraint(&Strategy::new(p, 1.0), &sc).unwrap();
        assert!(h >= 0.5);
        assert!((h - 0.5).abs() <= 10.0 * tol, "{h}");
    }

    #[test]
    fn boundary_power_none_when_lowest_power_fails() {
        let mut sc = sensor();
        sc.bounds.lo = 4.0;
        sc.bounds.hi = 5.0;
        assert_eq!(boundary_power(1.0, &sc, 1e-9).unwrap(), None);
    }

    #[test]
    fn short_links_transmit_every_block_at_moderate_power() {
        let sc = sensor();
        for d in [0.02, 0.05, 0.1] {
            let sol = solve(d, &sc).unwrap();
            assert_eq!(sol.strategy.access_prob, 1.0);
            assert!(sol.strategy.power < 0.75 * sc.bounds.hi, "{sol:?}");
            assert!(sol.boundary_active);
            assert!(!sol.idle);
        }
    }

    #[test]
    fn huge_secondary_threshold_idles() {
        let mut sc = sensor();
        sc.secondary.sinr_threshold = 1e9;
        let sol = solve(0.5, &sc).unwrap();
        assert!(sol.objective.abs() < 1e-12);
        assert!(feasible(&sol.strategy, &sc).unwrap());
    }

    #[test]
    fn planner_delegates_and_is_deterministic() {
        let sc = sensor();
        let inputs = PlannerInputs::from_scenario(&sc, 0.4);
        let a = plan_transmission(&inputs, &sc).unwrap();
        let b = plan_transmission(&inputs, &sc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, solve(0.4, &sc).unwrap());

        let far = plan_transmission(
            &PlannerInputs {
                own_distance: 0.8,
                ..inputs
            },
            &sc,
        )
        .unwrap();
        assert!(far.objective <= a.objective);
    }

    #[test]
    fn planner_rejects_invalid_inputs() {
        let sc = sensor();
        let inputs = PlannerInputs {
            eta: 2.0,
            ..PlannerInputs::from_scenario(&sc, 0.4)
        };
        assert!(matches!(
            plan_transmission(&inputs, &sc),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn golden_section_finds_interior_maximum() {
        let x = golden_section_max(|x| Ok(-(x - 0.3f64).powi(2)), 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
    }
}
