//! Scenario parameters for the two-tier network and their validation.
//!
//! Every quantity is a unit-free linear scale. A scenario is loaded from a
//! TOML file whose keys mirror the type tree:
//!
//! ```toml
//! [channel]
//! eta = 4.0          # path-loss exponent
//! epsilon = 1e-3     # path-loss buffer, gain = 1 / (epsilon + d^eta)
//! noise = 1.0        # background noise power
//!
//! [primary]          # same keys for [secondary]
//! density = 0.2
//! power = 1.0
//! access_prob = 1.0
//! sinr_threshold = 1.0
//!
//! [weights]          # interference weights, first letter = interfering tier
//! aa = 1.0
//! ab = 1.0
//! ba = 1.0
//! bb = 1.0
//!
//! [qos]
//! pairing_range = 1.0
//! min_connection_prob = 0.5
//!
//! [bounds]           # secondary transmit power range
//! lo = 0.0
//! hi = 5.0
//! ```
//!
//! Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the exponent range where `sin(2π/η)` is small enough to amplify roundoff.
pub const NEAR_DIVERGENT_ETA: f64 = 2.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub eta: f64,
    pub epsilon: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierParams {
    pub density: f64,
    pub power: f64,
    pub access_prob: f64,
    pub sinr_threshold: f64,
}

/// Spread-spectrum weights. `ab` is primary-transmitter to secondary-receiver,
/// `ba` is secondary-transmitter to primary-receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceWeights {
    pub aa: f64,
    pub ab: f64,
    pub ba: f64,
    pub bb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimaryQoS {
    pub pairing_range: f64,
    pub min_connection_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerBounds {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub channel: ChannelParams,
    pub primary: TierParams,
    pub secondary: TierParams,
    pub weights: InterferenceWeights,
    pub qos: PrimaryQoS,
    pub bounds: PowerBounds,
}

/// A secondary transmission decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub power: f64,
    pub access_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Primary,
    Secondary,
}

impl Tier {
    pub fn other(self) -> Tier {
        match self {
            Tier::Primary => Tier::Secondary,
            Tier::Secondary => Tier::Primary,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Primary => "primary",
            Tier::Secondary => "secondary",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" | "alpha" => Ok(Tier::Primary),
            "secondary" | "beta" => Ok(Tier::Secondary),
            other => Err(Error::Config(format!("unknown tier `{other}`"))),
        }
    }
}

/// What the scenario is going to be used for. The closed forms need `eta > 2`;
/// finite-window simulation tolerates `eta = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Usage {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts a report with violations into an error.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(self))
        }
    }

    fn reject(&mut self, field: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            field,
            message: message.into(),
        });
    }

    fn warn(&mut self, field: &'static str, message: impl Into<String>) {
        self.warnings.push(Violation {
            field,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

fn check_positive(report: &mut ValidationReport, field: &'static str, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        report.reject(field, format!("must be finite and > 0, got {value}"));
    }
}

fn check_nonnegative(report: &mut ValidationReport, field: &'static str, value: f64) {
    if !(value.is_finite() && value >= 0.0) {
        report.reject(field, format!("must be finite and >= 0, got {value}"));
    }
}

fn check_unit(report: &mut ValidationReport, field: &'static str, value: f64) {
    if !(0.0..=1.0).contains(&value) {
        report.reject(field, format!("must lie in [0, 1], got {value}"));
    }
}

fn check_tier(report: &mut ValidationReport, names: [&'static str; 4], tier: &TierParams) {
    check_positive(report, names[0], tier.density);
    check_positive(report, names[1], tier.power);
    check_unit(report, names[2], tier.access_prob);
    check_positive(report, names[3], tier.sinr_threshold);
}

/// Collects every violated invariant. An empty report means the scenario is
/// accepted by every other module for the given usage.
pub fn validate(scenario: &Scenario, usage: Usage) -> ValidationReport {
    let mut report = ValidationReport::default();
    let ch = &scenario.channel;

    if !ch.eta.is_finite() || ch.eta < 2.0 {
        report.reject("channel.eta", format!("must be >= 2, got {}", ch.eta));
    } else if ch.eta == 2.0 {
        match usage {
            Usage::Analytic => report.reject("channel.eta", "eta must exceed 2 for analytic mode"),
            Usage::MonteCarlo => report.warn(
                "channel.eta",
                "eta = 2: infinite-plane interference diverges, finite-window results depend on the window",
            ),
        }
    } else if ch.eta < NEAR_DIVERGENT_ETA {
        report.warn(
            "channel.eta",
            format!("eta = {} is close to 2; closed forms lose accuracy", ch.eta),
        );
    }
    check_nonnegative(&mut report, "channel.epsilon", ch.epsilon);
    check_nonnegative(&mut report, "channel.noise", ch.noise);

    check_tier(
        &mut report,
        [
            "primary.density",
            "primary.power",
            "primary.access_prob",
            "primary.sinr_threshold",
        ],
        &scenario.primary,
    );
    check_tier(
        &mut report,
        [
            "secondary.density",
            "secondary.power",
            "secondary.access_prob",
            "secondary.sinr_threshold",
        ],
        &scenario.secondary,
    );

    let w = &scenario.weights;
    check_unit(&mut report, "weights.aa", w.aa);
    check_unit(&mut report, "weights.ab", w.ab);
    check_unit(&mut report, "weights.ba", w.ba);
    check_unit(&mut report, "weights.bb", w.bb);

    check_positive(&mut report, "qos.pairing_range", scenario.qos.pairing_range);
    check_unit(
        &mut report,
        "qos.min_connection_prob",
        scenario.qos.min_connection_prob,
    );

    let b = &scenario.bounds;
    check_nonnegative(&mut report, "bounds.lo", b.lo);
    if !(b.hi.is_finite() && b.hi > b.lo) {
        report.reject(
            "bounds.hi",
            format!(
                "must be finite and exceed bounds.lo = {}, got {}",
                b.lo, b.hi
            ),
        );
    }

    report
}

impl Scenario {
    /// The two-tier sensor deployment: every weight, primary power, primary
    /// access, noise and threshold equal to one, densities 0.2, R = 1,
    /// secondary power in [0, 5], Q = 0.5, epsilon = 1e-3 and eta = 4.
    pub fn sensor_network() -> Self {
        let tier = TierParams {
            density: 0.2,
            power: 1.0,
            access_prob: 1.0,
            sinr_threshold: 1.0,
        };
        Scenario {
            channel: ChannelParams {
                eta: 4.0,
                epsilon: 1e-3,
                noise: 1.0,
            },
            primary: tier,
            secondary: tier,
            weights: InterferenceWeights {
                aa: 1.0,
                ab: 1.0,
                ba: 1.0,
                bb: 1.0,
            },
            qos: PrimaryQoS {
                pairing_range: 1.0,
                min_connection_prob: 0.5,
            },
            bounds: PowerBounds { lo: 0.0, hi: 5.0 },
        }
    }

    /// Powers, access probabilities, densities, weights, thresholds and noise
    /// all equal to one, with epsilon = 1e-3.
    pub fn all_unity(eta: f64) -> Self {
        let tier = TierParams {
            density: 1.0,
            power: 1.0,
            access_prob: 1.0,
            sinr_threshold: 1.0,
        };
        let mut s = Self::sensor_network();
        s.channel.eta = eta;
        s.primary = tier;
        s.secondary = tier;
        s
    }

    pub fn tier(&self, tier: Tier) -> &TierParams {
        match tier {
            Tier::Primary => &self.primary,
            Tier::Secondary => &self.secondary,
        }
    }

    pub fn tier_mut(&mut self, tier: Tier) -> &mut TierParams {
        match tier {
            Tier::Primary => &mut self.primary,
            Tier::Secondary => &mut self.secondary,
        }
    }

    /// Weight applied to interference from `from` transmitters at `to` receivers.
    pub fn weight(&self, from: Tier, to: Tier) -> f64 {
        match (from, to) {
            (Tier::Primary, Tier::Primary) => self.weights.aa,
            (Tier::Primary, Tier::Secondary) => self.weights.ab,
            (Tier::Secondary, Tier::Primary) => self.weights.ba,
            (Tier::Secondary, Tier::Secondary) => self.weights.bb,
        }
    }

    /// Copy with the secondary tier's power and access replaced by `strategy`.
    pub fn with_strategy(&self, strategy: Strategy) -> Scenario {
        let mut s = *self;
        s.secondary.power = strategy.power;
        s.secondary.access_prob = strategy.access_prob;
        s
    }

    /// Copy with both cross-tier weights zeroed.
    pub fn without_cross_tier(&self) -> Scenario {
        let mut s = *self;
        s.weights.ab = 0.0;
        s.weights.ba = 0.0;
        s
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

impl Strategy {
    pub fn new(power: f64, access_prob: f64) -> Self {
        Strategy { power, access_prob }
    }

    pub fn within(&self, bounds: &PowerBounds) -> bool {
        self.power >= bounds.lo
            && self.power <= bounds.hi
            && (0.0..=1.0).contains(&self.access_prob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensor_network_is_valid() {
        let report = validate(&Scenario::sensor_network(), Usage::Analytic);
        assert!(report.is_valid(), "{report}");
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn eta_two_rejected_for_analytic_only() {
        let mut s = Scenario::sensor_network();
        s.channel.eta = 2.0;
        let analytic = validate(&s, Usage::Analytic);
        assert_eq!(analytic.violations.len(), 1);
        assert_eq!(analytic.violations[0].field, "channel.eta");
        assert!(analytic.violations[0]
            .message
            .contains("eta must exceed 2 for analytic mode"));

        let mc = validate(&s, Usage::MonteCarlo);
        assert!(mc.is_valid());
        assert_eq!(mc.warnings.len(), 1);
    }

    #[test]
    fn near_two_is_flagged() {
        let mut s = Scenario::sensor_network();
        s.channel.eta = 2.01;
        let r = validate(&s, Usage::Analytic);
        assert!(r.is_valid());
        assert_eq!(r.warnings[0].field, "channel.eta");
    }

    #[test]
    fn access_prob_out_of_range() {
        let mut s = Scenario::sensor_network();
        s.secondary.access_prob = 1.3;
        let r = validate(&s, Usage::Analytic);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "secondary.access_prob");
    }

    #[test]
    fn reports_every_violation() {
        let mut s = Scenario::sensor_network();
        s.channel.epsilon = -1.0;
        s.primary.density = 0.0;
        s.weights.ba = 2.0;
        s.bounds.hi = s.bounds.lo;
        s.qos.min_connection_prob = f64::NAN;
        let fields: Vec<_> = validate(&s, Usage::Analytic)
            .violations
            .iter()
            .map(|v| v.field)
            .collect();
        assert_eq!(
            fields,
            [
                "channel.epsilon",
                "primary.density",
                "weights.ba",
                "qos.min_connection_prob",
                "bounds.hi"
            ]
        );
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let s = Scenario::sensor_network();
        let text = s.to_toml_string();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), s);

        let bad = format!("{text}\n[extra]\nfoo = 1\n");
        assert!(matches!(
            Scenario::from_toml_str(&bad),
            Err(Error::Config(_))
        ));

        let typo = text.replace("eta =", "etta =");
        assert!(Scenario::from_toml_str(&typo).is_err());
    }

    #[test]
    fn dotted_keys_are_accepted() {
        let text = r#"
channel.eta = 3.0
channel.epsilon = 0.0
channel.noise = 0.5
primary = { density = 1.0, power = 2.0, access_prob = 0.5, sinr_threshold = 1.0 }
secondary = { density = 1.0, power = 1.0, access_prob = 0.5, sinr_threshold = 1.0 }
weights = { aa = 1.0, ab = 0.5, ba = 0.5, bb = 1.0 }
qos.pairing_range = 1.0
qos.min_connection_prob = 0.4
bounds.lo = 0.0
bounds.hi = 3.0
"#;
        let s = Scenario::from_toml_str(text).unwrap();
        assert_eq!(s.channel.eta, 3.0);
        assert_eq!(s.weight(Tier::Secondary, Tier::Primary), 0.5);
    }
}
