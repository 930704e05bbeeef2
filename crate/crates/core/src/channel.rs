//! Additive sub-gaussian noise MAC and the repetition disjunction code.
//!
//! Channel model: `Y_t = Σ_r x_{r,t} + Z_t` with inputs in `[-√P, √P]` and
//! independent, centered noise whose sub-gaussian norm is at most `K`. The
//! noise law may change from step to step (a schedule).
//!
//! The code repeats `√P` (for `true`) or `0` (for `false`) over `m` channel
//! uses per slot. The decoder averages the slot and outputs `true` iff the
//! average exceeds `√P / 2`; it is correct whenever the averaged noise has
//! magnitude below `√P / 2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::bounds::repetition_length;
use crate::error::{Error, Result};
use crate::rng::{noise_stream, trial_seed};
use crate::scheme::{DisjunctionOracle, MessageBlock};

/// One step's noise law. All families are centered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    /// `N(0, σ²)`; `σ = 0` is the noiseless channel.
    Gaussian { sigma: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
    /// `±a` with probability 1/2 each.
    Rademacher { a: f64 },
}

impl NoiseFamily {
    fn scale(&self) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => sigma,
            NoiseFamily::Uniform { a } | NoiseFamily::Rademacher { a } => a,
        }
    }

    /// Norm bound this implementation certifies for the family: `σ` for
    /// Gaussians, `a` for the bounded families.
    pub fn admissible_norm(&self) -> f64 {
        self.scale()
    }

    /// `(E|Z|^n)^{1/n} / √n`, computed from closed-form absolute moments.
    pub fn moment_ratio(&self, n: u32) -> f64 {
        let nf = f64::from(n);
        let scale = self.scale();
        if scale == 0.0 {
            return 0.0;
        }
        let ln_moment = match *self {
            // E|Z|^n = σ^n 2^{n/2} Γ((n+1)/2) / √π
            NoiseFamily::Gaussian { sigma } => {
                nf * sigma.ln() + 0.5 * nf * std::f64::consts::LN_2 + ln_gamma((nf + 1.0) / 2.0)
                    - 0.5 * std::f64::consts::PI.ln()
            }
            NoiseFamily::Uniform { a } => nf * a.ln() - (nf + 1.0).ln(),
            NoiseFamily::Rademacher { a } => nf * a.ln(),
        };
        (ln_moment / nf).exp() / nf.sqrt()
    }

    /// `max_{1 ≤ n ≤ max_order} (E|Z|^n)^{1/n} / √n`.
    pub fn moment_norm(&self, max_order: u32) -> f64 {
        (1..=max_order).map(|n| self.moment_ratio(n)).fold(0.0, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    sigma * rng.sample::<f64, _>(StandardNormal)
                }
            }
            NoiseFamily::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::Rademacher { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseFamily::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            NoiseFamily::Uniform { a } => write!(f, "uniform:{a}"),
            NoiseFamily::Rademacher { a } => write!(f, "rademacher:{a}"),
        }
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    /// `gaussian:σ`, `uniform:a`, `rademacher:a` or `zero`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(NoiseFamily::Gaussian { sigma: 0.0 });
        }
        let (name, value) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("noise", format!("expected family:scale, got `{s}`")))?;
        let scale: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid("noise", format!("bad scale `{value}`")))?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::invalid("noise", format!("scale {scale} must be non-negative")));
        }
        match name.trim() {
            "gaussian" => Ok(NoiseFamily::Gaussian { sigma: scale }),
            "uniform" => Ok(NoiseFamily::Uniform { a: scale }),
            "rademacher" => Ok(NoiseFamily::Rademacher { a: scale }),
            other => Err(Error::invalid("noise", format!("unknown family `{other}`"))),
        }
    }
}

/// Per-step noise schedule with a declared norm bound `K`. Step `t` uses
/// `schedule[t % schedule.len()]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    schedule: Vec<NoiseFamily>,
    norm_bound: f64,
}

impl NoiseModel {
    /// I.i.d. noise with `K` set to the family's admissible norm.
    pub fn iid(family: NoiseFamily) -> Self {
        Self {
            schedule: vec![family],
            norm_bound: family.admissible_norm(),
        }
    }

    pub fn schedule(schedule: Vec<NoiseFamily>, norm_bound: f64) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::invalid("noise", "schedule is empty"));
        }
        if !(norm_bound.is_finite() && norm_bound >= 0.0) {
            return Err(Error::invalid("big-k", format!("{norm_bound} must be non-negative")));
        }
        if let Some(f) = schedule.iter().find(|f| f.admissible_norm() > norm_bound) {
            return Err(Error::invalid(
                "big-k",
                format!("{f} needs a norm bound of at least {}", f.admissible_norm()),
            ));
        }
        Ok(Self {
            schedule,
            norm_bound,
        })
    }

    /// Smallest `K` certified for every step of the schedule.
    pub fn required_norm(&self) -> f64 {
        self.schedule
            .iter()
            .map(NoiseFamily::admissible_norm)
            .fold(0.0, f64::max)
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn families(&self) -> &[NoiseFamily] {
        &self.schedule
    }

    pub fn family_at(&self, t: u64) -> NoiseFamily {
        self.schedule[(t % self.schedule.len() as u64) as usize]
    }

    /// `Some(σ)` when every step is `N(0, σ²)` with the same `σ`.
    pub fn iid_gaussian_sigma(&self) -> Option<f64> {
        match self.schedule.as_slice() {
            [NoiseFamily::Gaussian { sigma }] => Some(*sigma),
            _ => None,
        }
    }

    /// Comma-separated schedule, e.g. `gaussian:1,rademacher:1`.
    pub fn parse(spec: &str, norm_bound: Option<f64>) -> Result<Self> {
        let schedule = spec
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<NoiseFamily>>>()?;
        let required = schedule
            .iter()
            .map(NoiseFamily::admissible_norm)
            .fold(0.0, f64::max);
        Self::schedule(schedule, norm_bound.unwrap_or(required))
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.schedule.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// One draw of `Z_t`.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, t: u64, rng: &mut R) -> f64 {
    model.family_at(t).sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    power: f64,
    noise: NoiseModel,
    num_transmitters: usize,
}

impl ChannelSpec {
    pub fn new(power: f64, noise: NoiseModel, num_transmitters: usize) -> Result<Self> {
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::invalid("power", format!("{power} must be positive")));
        }
        if num_transmitters == 0 {
            return Err(Error::invalid("transmitters", "must be positive"));
        }
        Ok(Self {
            power,
            noise,
            num_transmitters,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn amplitude(&self) -> f64 {
        self.power.sqrt()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn num_transmitters(&self) -> usize {
        self.num_transmitters
    }

    fn check_input(&self, x: f64) -> Result<()> {
        let limit = self.amplitude();
        if x.abs() <= limit {
            Ok(())
        } else {
            Err(Error::PowerConstraint { value: x, limit })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepetitionCodeParams {
    repetitions: u64,
    slot_count: u64,
    target_slot_error: f64,
    threshold: f64,
}

impl RepetitionCodeParams {
    pub fn new(repetitions: u64, slot_count: u64, target_slot_error: f64, power: f64) -> Result<Self> {
        if repetitions == 0 {
            return Err(Error::invalid("m", "repetitions must be positive"));
        }
        if slot_count == 0 {
            return Err(Error::invalid("l", "slot count must be positive"));
        }
        if !(target_slot_error > 0.0 && target_slot_error < 1.0) {
            return Err(Error::invalid("delta", format!("{target_slot_error} must lie in (0, 1)")));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::invalid("power", format!("{power} must be positive")));
        }
        Ok(Self {
            repetitions,
            slot_count,
            target_slot_error,
            threshold: power.sqrt() / 2.0,
        })
    }

    /// Repetitions chosen by [`repetition_length`] from the channel's `K`
    /// and `P`.
    pub fn for_target(channel: &ChannelSpec, slot_count: u64, delta: f64, c_constant: f64) -> Result<Self> {
        let m = repetition_length(channel.noise().norm_bound().max(f64::MIN_POSITIVE), channel.power(), delta, c_constant)?;
        Self::new(m.max(1), slot_count, delta, channel.power())
    }

    pub fn repetitions(&self) -> u64 {
        self.repetitions
    }

    pub fn slot_count(&self) -> u64 {
        self.slot_count
    }

    pub fn target_slot_error(&self) -> f64 {
        self.target_slot_error
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `n = m ℓ`.
    pub fn block_length(&self) -> u64 {
        self.repetitions * self.slot_count
    }
}

/// Channel outputs of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTransmission {
    pub outputs: Vec<f64>,
    /// `Ỹ = (1/m) Σ Y_t`.
    pub average: f64,
    /// `Z̃ = (1/m) Σ Z_t`; only observable in simulation.
    pub averaged_noise: f64,
}

/// Codeword of one slot bit: `m` copies of `√P` or of `0`.
pub fn repetition_encode(message_bit: bool, m: u64, power: f64) -> Vec<f64> {
    let symbol = if message_bit { power.sqrt() } else { 0.0 };
    vec![symbol; m as usize]
}

/// `Y_t = Σ x_r + Z_t`, rejecting inputs outside `[-√P, √P]`.
pub fn channel_step(inputs: &[f64], noise_draw: f64, channel: &ChannelSpec) -> Result<f64> {
    for &x in inputs {
        channel.check_input(x)?;
    }
    Ok(inputs.iter().sum::<f64>() + noise_draw)
}

/// `true` iff `Ỹ > √P / 2`; ties decode as `false`.
pub fn threshold_decode(slot: &SlotTransmission, power: f64) -> bool {
    slot.average > power.sqrt() / 2.0
}

/// Sends one slot in which each sender holds the constant input `inputs[r]`
/// for `m` steps starting at time index `t0`.
pub fn transmit_slot<R: Rng + ?Sized>(
    inputs: &[f64],
    m: u64,
    channel: &ChannelSpec,
    t0: u64,
    rng: &mut R,
) -> Result<SlotTransmission> {
    // Inputs are constant over the slot, so the superposition is computed
    // once and only the noise varies per step.
    let superposed = channel_step(inputs, 0.0, channel)?;
    let mut outputs = Vec::with_capacity(m as usize);
    let mut noise_sum = 0.0;
    for t in t0..t0 + m {
        let z = sample_noise(channel.noise(), t, rng);
        noise_sum += z;
        outputs.push(superposed + z);
    }
    let mf = m as f64;
    Ok(SlotTransmission {
        average: outputs.iter().sum::<f64>() / mf,
        averaged_noise: noise_sum / mf,
        outputs,
    })
}

/// Encodes each sender's `ℓ` bits with the repetition code, passes the
/// block through the channel starting at time `t0` and decodes each slot.
pub fn transmit_block<R: Rng + ?Sized>(
    messages: &MessageBlock,
    params: &RepetitionCodeParams,
    channel: &ChannelSpec,
    t0: u64,
    rng: &mut R,
) -> Result<Vec<bool>> {
    if messages.senders() != channel.num_transmitters() {
        return Err(Error::DimensionMismatch(format!(
            "{} senders for a {}-transmitter channel",
            messages.senders(),
            channel.num_transmitters()
        )));
    }
    if messages.slots() as u64 != params.slot_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} slots for a code of {} slots",
            messages.slots(),
            params.slot_count()
        )));
    }
    let m = params.repetitions();
    let amplitude = channel.amplitude();
    let mut inputs = vec![0.0; messages.senders()];
    let mut decoded = Vec::with_capacity(messages.slots());
    for i in 0..messages.slots() {
        for (r, x) in inputs.iter_mut().enumerate() {
            *x = if messages.get(r, i) { amplitude } else { 0.0 };
        }
        let slot = transmit_slot(&inputs, m, channel, t0 + i as u64 * m, rng)?;
        decoded.push(threshold_decode(&slot, channel.power()));
    }
    Ok(decoded)
}

/// Standard normal upper tail `Q(x)`.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(|Z̃| ≥ √P/2) = 2 Q(√(P m) / (2σ))` for i.i.d. `N(0, σ²)` noise.
pub fn gaussian_slot_error_exact(sigma: f64, power: f64, m: u64) -> f64 {
    2.0 * normal_upper_tail(gaussian_margin(sigma, power, m))
}

/// `P(Z̃ > √P/2) = Q(√(P m) / (2σ))`: the decoding error of an all-false
/// slot under i.i.d. `N(0, σ²)` noise.
pub fn gaussian_false_positive_exact(sigma: f64, power: f64, m: u64) -> f64 {
    normal_upper_tail(gaussian_margin(sigma, power, m))
}

fn gaussian_margin(sigma: f64, power: f64, m: u64) -> f64 {
    (power * m as f64).sqrt() / (2.0 * sigma)
}

/// Counts from a batch of simulated slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotErrorCounts {
    pub slots: u64,
    /// Decoded bit differs from the true disjunction.
    pub decode_errors: u64,
    /// `|Z̃| ≥ √P/2`.
    pub noise_exceedances: u64,
}

impl SlotErrorCounts {
    pub fn error_rate(&self) -> f64 {
        self.decode_errors as f64 / self.slots as f64
    }

    pub fn exceedance_rate(&self) -> f64 {
        self.noise_exceedances as f64 / self.slots as f64
    }
}

const SLOTS_PER_CHUNK: u64 = 10_000;

/// Simulates `slots` independent slots of `m` repetitions in which
/// `true_senders` of the channel's transmitters send `true`.
///
/// Work is split into fixed chunks with their own noise streams so the
/// counts do not depend on the thread count.
pub fn simulate_slot_errors(
    channel: &ChannelSpec,
    m: u64,
    true_senders: usize,
    slots: u64,
    seed: u64,
) -> Result<SlotErrorCounts> {
    if true_senders > channel.num_transmitters() {
        return Err(Error::DimensionMismatch(format!(
            "{true_senders} true senders on a {}-transmitter channel",
            channel.num_transmitters()
        )));
    }
    if m == 0 {
        return Err(Error::invalid("m", "repetitions must be positive"));
    }
    let inputs: Vec<f64> = (0..channel.num_transmitters())
        .map(|r| if r < true_senders { channel.amplitude() } else { 0.0 })
        .collect();
    let truth = true_senders > 0;
    let half = channel.amplitude() / 2.0;
    let chunks = slots.div_ceil(SLOTS_PER_CHUNK);
    let per_chunk: Vec<Result<SlotErrorCounts>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng: ChaCha8Rng = noise_stream(trial_seed(seed, c));
            let n = SLOTS_PER_CHUNK.min(slots - c * SLOTS_PER_CHUNK);
            let mut counts = SlotErrorCounts {
                slots: n,
                ..Default::default()
            };
            for s in 0..n {
                let slot = transmit_slot(&inputs, m, channel, s * m, &mut rng)?;
                if threshold_decode(&slot, channel.power()) != truth {
                    counts.decode_errors += 1;
                }
                if slot.averaged_noise.abs() >= half {
                    counts.noise_exceedances += 1;
                }
            }
            Ok(counts)
        })
        .collect();
    per_chunk.into_iter().try_fold(SlotErrorCounts::default(), |acc, c| {
        let c = c?;
        Ok(SlotErrorCounts {
            slots: acc.slots + c.slots,
            decode_errors: acc.decode_errors + c.decode_errors,
            noise_exceedances: acc.noise_exceedances + c.noise_exceedances,
        })
    })
}

/// [`DisjunctionOracle`] realized by the repetition code over a noisy
/// channel. Successive calls continue the channel's time index.
#[derive(Debug, Clone)]
pub struct RepetitionOracle {
    channel: ChannelSpec,
    repetitions: u64,
    target_slot_error: f64,
    rng: ChaCha8Rng,
    time: u64,
}

impl RepetitionOracle {
    pub fn new(channel: ChannelSpec, repetitions: u64, target_slot_error: f64, rng: ChaCha8Rng) -> Self {
        Self {
            channel,
            repetitions,
            target_slot_error,
            rng,
            time: 0,
        }
    }

    pub fn channel_uses(&self) -> u64 {
        self.time
    }
}

impl DisjunctionOracle for RepetitionOracle {
    fn decode(&mut self, messages: &MessageBlock) -> Vec<bool> {
        let params = RepetitionCodeParams::new(
            self.repetitions,
            messages.slots() as u64,
            self.target_slot_error,
            self.channel.power(),
        )
        .expect("oracle parameters validated at construction");
        let out = transmit_block(messages, &params, &self.channel, self.time, &mut self.rng)
            .expect("message block must match the channel's transmitter count");
        self.time += params.block_length();
        out
    }

    fn slot_error_bound(&self) -> f64 {
        self.target_slot_error
    }
}
