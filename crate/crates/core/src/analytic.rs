//! Closed-form connection probabilities under Poisson interference.
//!
//! A link at distance `d` with Rayleigh fading succeeds with probability
//!
//! ```text
//! H = exp(-s N / P) * L_same(s) * L_cross(s),      s = q (epsilon + d^eta)
//! ```
//!
//! where each Laplace factor is `exp(-exponent)` and the exponent for an
//! interfering field thinned to density `lambda` with composite argument
//! `u = s * gamma * P_interferer / P_signal` is
//!
//! ```text
//! lambda * 2 pi^2 u (epsilon + u)^(2/eta - 1) / (eta sin(2 pi / eta))
//! ```
//!
//! [`laplace_exponent_quadrature`] evaluates the same exponent by integrating
//! the Poisson generating functional numerically and serves as the oracle
//! for the closed form.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ChannelParams, Scenario, Strategy, Tier};
use crate::quadrature;

pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-10;
const MAX_QUADRATURE_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuery {
    pub tier: Tier,
    pub distance: f64,
}

impl LinkQuery {
    pub fn new(tier: Tier, distance: f64) -> Self {
        LinkQuery { tier, distance }
    }

    pub fn primary(distance: f64) -> Self {
        Self::new(Tier::Primary, distance)
    }

    pub fn secondary(distance: f64) -> Self {
        Self::new(Tier::Secondary, distance)
    }
}

/// Arguments of one interference Laplace factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceArgs {
    pub s: f64,
    pub gamma: f64,
    pub thinned_density: f64,
    /// Interferer power over signal power; 1 for same-tier interference.
    pub power_ratio: f64,
}

impl LaplaceArgs {
    /// `u = s * gamma * power_ratio`, the argument seen by a single interferer.
    pub fn composite(&self) -> f64 {
        if self.gamma == 0.0 || self.s == 0.0 {
            0.0
        } else {
            self.s * self.gamma * self.power_ratio
        }
    }

    fn check(&self) -> Result<()> {
        let fields = [
            ("s", self.s),
            ("gamma", self.gamma),
            ("thinned_density", self.thinned_density),
            ("power_ratio", self.power_ratio),
        ];
        for (name, v) in fields {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.gamma > 1.0 {
            return Err(Error::Domain(format!(
                "gamma must be <= 1, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

fn require_eta_above_two(ch: &ChannelParams) -> Result<()> {
    if ch.eta > 2.0 && ch.eta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "closed-form interference needs eta > 2, got {}",
            ch.eta
        )))
    }
}

/// Non-singular path-loss gain `1 / (epsilon + d^eta)`.
pub fn path_loss(d: f64, ch: &ChannelParams) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::Domain(format!("distance must be >= 0, got {d}")));
    }
    let denom = ch.epsilon + d.powf(ch.eta);
    if denom == 0.0 {
        return Err(Error::Domain(
            "path loss is infinite at d = 0 with epsilon = 0".into(),
        ));
    }
    Ok(1.0 / denom)
}

/// `epsilon + d^eta`, the reciprocal gain, which stays finite at `d = 0`.
pub fn attenuation(d: f64, ch: &ChannelParams) -> f64 {
    ch.epsilon + d.powf(ch.eta)
}

/// `2 pi^2 / (eta sin(2 pi / eta))`
fn shape_constant(eta: f64) -> f64 {
    2.0 * PI * PI / (eta * (2.0 * PI / eta).sin())
}

pub fn laplace_exponent(args: &LaplaceArgs, ch: &ChannelParams) -> Result<f64> {
    require_eta_above_two(ch)?;
    args.check()?;
    let u = args.composite();
    if u == 0.0 || args.thinned_density == 0.0 {
        return Ok(0.0);
    }
    Ok(args.thinned_density
        * shape_constant(ch.eta)
        * u
        * (ch.epsilon + u).powf(2.0 / ch.eta - 1.0))
}

pub fn laplace_transform(args: &LaplaceArgs, ch: &ChannelParams) -> Result<f64> {
    laplace_exponent(args, ch).map(|e| (-e).exp())
}

/// Numerically integrates `density * 2 pi * int_0^inf [1 - 1/(1 + u g(r))] r dr`.
///
/// The range is split at `r0 = (epsilon + u)^(1/eta)`. Beyond it the
/// substitution `r = r0 * x^(-1/(eta - 2))` maps the algebraic tail onto a
/// bounded integrand on `(0, 1]`.
pub fn laplace_exponent_quadrature(
    args: &LaplaceArgs,
    ch: &ChannelParams,
    tol: f64,
) -> Result<f64> {
    require_eta_above_two(ch)?;
    args.check()?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    let u = args.composite();
    if u == 0.0 || args.thinned_density == 0.0 {
        return Ok(0.0);
    }
    let (eta, eps) = (ch.eta, ch.epsilon);

    // 1 - E[exp(-u h g(r))] for unit-mean exponential h
    let void = |r: f64| {
        let ug = u / (eps + r.powf(eta));
        if ug.is_infinite() {
            1.0
        } else {
            ug / (1.0 + ug)
        }
    };

    let r0 = (eps + u).powf(1.0 / eta);
    let near = quadrature::integrate(|r| void(r) * r, 0.0, r0, tol, 0.0, MAX_QUADRATURE_INTERVALS)?;

    let a = 1.0 / (eta - 2.0);
    let far = quadrature::integrate(
        |x: f64| {
            let r = r0 * x.powf(-a);
            let v = void(r) * r * (a * r / x);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
        0.0,
        MAX_QUADRATURE_INTERVALS,
    )?;

    Ok(args.thinned_density * 2.0 * PI * (near.value + far.value))
}

/// The pieces of a link's connection probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerms {
    /// `q (epsilon + d^eta)`
    pub s: f64,
    pub signal_power: f64,
    /// `s N / P`
    pub noise_exponent: f64,
    pub same_tier: LaplaceArgs,
    pub cross_tier: LaplaceArgs,
}

impl LinkTerms {
    pub fn new(link: &LinkQuery, scenario: &Scenario) -> Result<Self> {
        if link.distance.is_nan() || link.distance < 0.0 {
            return Err(Error::Domain(format!(
                "distance must be >= 0, got {}",
                link.distance
            )));
        }
        let ch = &scenario.channel;
        let own = scenario.tier(link.tier);
        let other = scenario.tier(link.tier.other());
        let s = own.sinr_threshold * attenuation(link.distance, ch);
        let noise_exponent = if own.power > 0.0 {
            s * ch.noise / own.power
        } else {
            f64::INFINITY
        };
        let power_ratio = if own.power > 0.0 {
            other.power / own.power
        } else {
            f64::INFINITY
        };
        Ok(LinkTerms {
            s,
            signal_power: own.power,
            noise_exponent,
            same_tier: LaplaceArgs {
                s,
                gamma: scenario.weight(link.tier, link.tier),
                thinned_density: own.access_prob * own.density,
                power_ratio: 1.0,
            },
            cross_tier: LaplaceArgs {
                s,
                gamma: scenario.weight(link.tier.other(), link.tier),
                thinned_density: other.access_prob * other.density,
                power_ratio,
            },
        })
    }
}

/// Probability that the link reaches its tier's SINR threshold.
pub fn connection_probability(link: &LinkQuery, scenario: &Scenario) -> Result<f64> {
    let ch = &scenario.channel;
    require_eta_above_two(ch)?;
    let terms = LinkTerms::new(link, scenario)?;
    if terms.signal_power <= 0.0 {
        // no signal never clears a positive threshold
        return Ok(0.0);
    }
    let noise = if terms.noise_exponent == 0.0 {
        1.0
    } else {
        (-terms.noise_exponent).exp()
    };
    Ok(
        noise
            * laplace_transform(&terms.same_tier, ch)?
            * laplace_transform(&terms.cross_tier, ch)?,
    )
}

/// Expected successful secondary transmissions per unit area when every
/// secondary transmitter adopts `strategy` and pairs are `d_secondary` apart.
pub fn spatial_density(strategy: &Strategy, d_secondary: f64, scenario: &Scenario) -> Result<f64> {
    if strategy.access_prob == 0.0 {
        require_eta_above_two(&scenario.channel)?;
        return Ok(0.0);
    }
    let sc = scenario.with_strategy(*strategy);
    let h = connection_probability(&LinkQuery::secondary(d_secondary), &sc)?;
    Ok(strategy.access_prob * sc.secondary.density * h)
}
