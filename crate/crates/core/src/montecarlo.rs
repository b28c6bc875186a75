//! Seeded Monte Carlo realisation of the Poisson interference model.
//!
//! Randomness is addressed by `(seed, stream)` pairs rather than drawn from
//! one sequential generator, so every trial owns an independent ChaCha
//! stream and the result of a run does not depend on how trials are
//! scheduled across threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::analytic::{attenuation, LaplaceArgs, LinkQuery, LinkTerms};
use crate::error::{Error, Result};
use crate::model::{ChannelParams, Scenario};

/// Exponent tolerance used to size the default simulation window.
pub const DEFAULT_BIAS_TOL: f64 = 1e-3;
/// The default window is never smaller than this many pairing ranges.
pub const MIN_WINDOW_RANGES: f64 = 5.0;

const Z95: f64 = 1.96;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec { seed, stream_id: 0 }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        RngSpec { stream_id, ..self }
    }

    /// A generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream `index` of this stream. Children of distinct parents
    /// use distinct keys.
    pub fn substream(&self, index: u64) -> RngSpec {
        RngSpec {
            seed: splitmix64(
                self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_F42D_4C95_7F2D)),
            ),
            stream_id: index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    Square,
    Disk,
}

/// Finite observation window centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimWindow {
    pub shape: WindowShape,
    /// Half the side length for a square, the radius for a disk.
    pub extent: f64,
    /// Upper bound on the interference exponent neglected outside the
    /// window, when the window was sized for a particular link.
    pub tail_bound: Option<f64>,
}

impl SimWindow {
    pub fn square(side: f64) -> Self {
        SimWindow {
            shape: WindowShape::Square,
            extent: 0.5 * side,
            tail_bound: None,
        }
    }

    pub fn disk(radius: f64) -> Self {
        SimWindow {
            shape: WindowShape::Disk,
            extent: radius,
            tail_bound: None,
        }
    }

    /// Disk large enough that each interfering field of `link` loses at most
    /// `bias_tol` of its exponent, and at least five pairing ranges wide.
    pub fn for_link(link: &LinkQuery, scenario: &Scenario, bias_tol: f64) -> Result<Self> {
        let terms = LinkTerms::new(link, scenario)?;
        let fields = [terms.same_tier, terms.cross_tier];
        let mut radius = MIN_WINDOW_RANGES * scenario.qos.pairing_range;
        for args in &fields {
            radius = radius.max(truncation_radius(scenario, args, bias_tol)?);
        }
        let mut bound = 0.0;
        for args in &fields {
            bound += tail_exponent_bound(args, &scenario.channel, radius)?;
        }
        Ok(SimWindow {
            shape: WindowShape::Disk,
            extent: radius,
            tail_bound: Some(bound),
        })
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            WindowShape::Square => 4.0 * self.extent * self.extent,
            WindowShape::Disk => PI * self.extent * self.extent,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self.shape {
            WindowShape::Square => p[0].abs() <= self.extent && p[1].abs() <= self.extent,
            WindowShape::Disk => p[0].hypot(p[1]) <= self.extent,
        }
    }

    fn check(&self) -> Result<()> {
        if self.extent.is_finite() && self.extent > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "window extent must be finite and > 0, got {}",
                self.extent
            )))
        }
    }
}

/// Bound on the exponent contributed by interferers beyond `radius`:
/// `density * 2 pi u radius^(2 - eta) / (eta - 2)`.
pub fn tail_exponent_bound(args: &LaplaceArgs, ch: &ChannelParams, radius: f64) -> Result<f64> {
    if !(ch.eta > 2.0) {
        return Err(Error::Domain(format!(
            "interference tail does not converge for eta = {}",
            ch.eta
        )));
    }
    let u = args.composite();
    if u == 0.0 || args.thinned_density == 0.0 {
        return Ok(0.0);
    }
    Ok(args.thinned_density * 2.0 * PI * u * radius.powf(2.0 - ch.eta) / (ch.eta - 2.0))
}

/// Smallest radius whose neglected tail exponent is at most `bias_tol`,
/// never below the pairing range.
pub fn truncation_radius(scenario: &Scenario, args: &LaplaceArgs, bias_tol: f64) -> Result<f64> {
    let eta = scenario.channel.eta;
    if !(eta > 2.0) {
        return Err(Error::Domain(format!(
            "interference tail does not converge for eta = {eta}"
        )));
    }
    if !(bias_tol > 0.0) {
        return Err(Error::Domain(format!(
            "bias tolerance must be > 0, got {bias_tol}"
        )));
    }
    let floor = scenario.qos.pairing_range;
    let u = args.composite();
    if u == 0.0 || args.thinned_density == 0.0 {
        return Ok(floor);
    }
    let rho =
        (args.thinned_density * 2.0 * PI * u / ((eta - 2.0) * bias_tol)).powf(1.0 / (eta - 2.0));
    Ok(rho.max(floor))
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let n: f64 = Poisson::new(mean)
        .expect("finite positive Poisson mean")
        .sample(rng);
    n as usize
}

pub(crate) fn uniform_point<R: Rng>(window: &SimWindow, rng: &mut R) -> [f64; 2] {
    match window.shape {
        WindowShape::Square => [
            window.extent * (2.0 * rng.random::<f64>() - 1.0),
            window.extent * (2.0 * rng.random::<f64>() - 1.0),
        ],
        WindowShape::Disk => {
            let r = window.extent * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            [r * theta.cos(), r * theta.sin()]
        }
    }
}

/// Homogeneous Poisson point process restricted to `window`.
pub fn sample_ppp(density: f64, window: &SimWindow, rng: &RngSpec) -> Vec<[f64; 2]> {
    let mut g = rng.rng();
    sample_ppp_with(density, window, &mut g)
}

pub(crate) fn sample_ppp_with<R: Rng>(
    density: f64,
    window: &SimWindow,
    rng: &mut R,
) -> Vec<[f64; 2]> {
    let n = poisson_count(density * window.area(), rng);
    (0..n).map(|_| uniform_point(window, rng)).collect()
}

/// One interference realisation at a receiver at the origin:
/// `gamma * sum_k chi_k * power * h_k * g(|t_k|)`.
///
/// Draw order per point: one uniform for the access decision (skipped when
/// `access_prob >= 1`), then one unit exponential fading if it transmits.
pub fn interference_realization(
    points: &[[f64; 2]],
    power: f64,
    gamma: f64,
    access_prob: f64,
    ch: &ChannelParams,
    rng: &RngSpec,
) -> f64 {
    if gamma == 0.0 || points.is_empty() {
        return 0.0;
    }
    let mut g = rng.rng();
    let mut sum = 0.0;
    for p in points {
        if !transmits(access_prob, &mut g) {
            continue;
        }
        let h: f64 = Exp1.sample(&mut g);
        sum += h / attenuation(p[0].hypot(p[1]), ch);
    }
    gamma * power * sum
}

fn transmits<R: Rng>(access_prob: f64, rng: &mut R) -> bool {
    if access_prob >= 1.0 {
        true
    } else if access_prob <= 0.0 {
        false
    } else {
        rng.random::<f64>() < access_prob
    }
}

/// Binomial success-rate estimate with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub successes: u64,
    pub trials: u64,
    pub ci95_halfwidth: f64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let mean = successes as f64 / trials as f64;
        Estimate {
            mean,
            successes,
            trials,
            ci95_halfwidth: Z95 * (mean * (1.0 - mean) / trials as f64).sqrt(),
        }
    }

    /// Standard error of the mean.
    pub fn sigma(&self) -> f64 {
        self.ci95_halfwidth / Z95
    }
}

/// One interfering field as seen from a receiver at the origin.
#[derive(Debug, Clone, Copy)]
struct Field {
    density: f64,
    access_prob: f64,
    /// gamma * transmit power
    weight: f64,
}

impl Field {
    fn silent(&self) -> bool {
        self.weight == 0.0 || self.density == 0.0 || self.access_prob == 0.0
    }

    /// Adds this field's interference to `acc`. Returns `None` as soon as the
    /// running total exceeds `budget`; later points can only add to it.
    fn accumulate(
        &self,
        window: &SimWindow,
        ch: &ChannelParams,
        rng: &RngSpec,
        mut acc: f64,
        budget: f64,
    ) -> Option<f64> {
        let mut g = rng.rng();
        match window.shape {
            WindowShape::Disk => {
                // Points in order of increasing distance: the areas pi r_k^2
                // are arrival times of a rate-`density` Poisson process.
                let rate = PI * self.density;
                let r2_max = window.extent * window.extent;
                let half_eta = 0.5 * ch.eta;
                let integer_exponent = half_eta.fract() == 0.0 && half_eta <= 16.0;
                let mut arrival = 0.0;
                loop {
                    arrival += <Exp1 as Distribution<f64>>::sample(&Exp1, &mut g);
                    let r2 = arrival / rate;
                    if r2 > r2_max {
                        break;
                    }
                    if !transmits(self.access_prob, &mut g) {
                        continue;
                    }
                    let h: f64 = Exp1.sample(&mut g);
                    let dist_pow = if integer_exponent {
                        r2.powi(half_eta as i32)
                    } else {
                        r2.powf(half_eta)
                    };
                    acc += self.weight * h / (ch.epsilon + dist_pow);
                    if acc > budget {
                        return None;
                    }
                }
            }
            WindowShape::Square => {
                let points = sample_ppp_with(self.density, window, &mut g);
                for p in &points {
                    if !transmits(self.access_prob, &mut g) {
                        continue;
                    }
                    let h: f64 = Exp1.sample(&mut g);
                    acc += self.weight * h / attenuation(p[0].hypot(p[1]), ch);
                    if acc > budget {
                        return None;
                    }
                }
            }
        }
        Some(acc)
    }
}

/// Fraction of trials in which a fresh signal fading clears the SINR
/// threshold against a fresh realisation of both interfering fields.
///
/// The receiver sits at the origin; its transmitter is at `link.distance`.
/// Trial `t` draws the signal fading from sub-stream 0 of
/// `rng.substream(t)` and the same-tier and cross-tier fields from
/// sub-streams 1 and 2.
pub fn estimate_connection_probability(
    link: &LinkQuery,
    scenario: &Scenario,
    trials: u64,
    window: &SimWindow,
    rng: &RngSpec,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    window.check()?;
    let ch = scenario.channel;
    if !(ch.eta >= 2.0) {
        return Err(Error::Domain(format!("eta must be >= 2, got {}", ch.eta)));
    }
    if link.distance.is_nan() || link.distance < 0.0 {
        return Err(Error::Domain(format!(
            "distance must be >= 0, got {}",
            link.distance
        )));
    }
    let own = *scenario.tier(link.tier);
    let other = *scenario.tier(link.tier.other());
    let s = own.sinr_threshold * attenuation(link.distance, &ch);
    let fields = [
        Field {
            density: own.density,
            access_prob: own.access_prob,
            weight: scenario.weight(link.tier, link.tier) * own.power,
        },
        Field {
            density: other.density,
            access_prob: other.access_prob,
            weight: scenario.weight(link.tier.other(), link.tier) * other.power,
        },
    ];
    let window = *window;

    let trial = |t: u64| -> bool {
        if s == 0.0 {
            return true;
        }
        let streams = rng.substream(t);
        let h: f64 = Exp1.sample(&mut streams.substream(0).rng());
        // success iff interference <= h P / s - N
        let budget = h * own.power / s - ch.noise;
        if budget < 0.0 {
            return false;
        }
        let mut acc = 0.0;
        for (i, field) in fields.iter().enumerate() {
            if field.silent() {
                continue;
            }
            match field.accumulate(&window, &ch, &streams.substream(i as u64 + 1), acc, budget) {
                Some(total) => acc = total,
                None => return false,
            }
        }
        true
    };

    let successes = (0..trials).into_par_iter().filter(|&t| trial(t)).count() as u64;
    Ok(Estimate::from_counts(successes, trials))
}
