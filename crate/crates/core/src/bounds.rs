//! Closed-form slot budgets, repetition lengths and expectation formulas.
//!
//! Logarithms are natural. Every count is returned as an integer ceiling of
//! the real-valued requirement; requirements within [`ZERO_TOLERANCE`] of
//! zero count as zero so that vanishing logarithms do not round up to one.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Default absolute constant `c` in the repetition length, calibrated for
/// Gaussian noise with `K = σ`.
pub const GAUSSIAN_C: f64 = 0.125;

pub const ZERO_TOLERANCE: f64 = 1e-9;

fn ceil_count(x: f64) -> u64 {
    if x <= ZERO_TOLERANCE {
        0
    } else {
        x.ceil() as u64
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("{v} must be positive and finite")))
    }
}

fn probability(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("{v} must lie in (0, 1)")))
    }
}

fn nonzero(name: &'static str, v: u64) -> Result<f64> {
    if v == 0 {
        Err(Error::invalid(name, "must be positive"))
    } else {
        Ok(v as f64)
    }
}

/// Validated parameter bundle for the channel-level bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n_inactive: u64,
    pub k: u64,
    pub eps: f64,
    pub big_c: f64,
    pub norm_bound: f64,
    pub power: f64,
    pub c_constant: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        nonzero("n-inactive", self.n_inactive)?;
        nonzero("k", self.k)?;
        probability("eps", self.eps)?;
        positive("C", self.big_c)?;
        positive("big-k", self.norm_bound)?;
        positive("power", self.power)?;
        positive("c", self.c_constant)?;
        probability("delta", self.delta)?;
        Ok(())
    }
}

/// `E M_i = N (1 - p q^k)^i`.
pub fn expected_remaining(n_inactive: u64, k: u64, p: f64, i: u64) -> f64 {
    let removal = p * (1.0 - p).powf(k as f64);
    n_inactive as f64 * (i as f64 * (-removal).ln_1p()).exp()
}

/// Slots guaranteeing `P(M_ℓ ≥ C k) ≤ ε` at `p = 1/(k+1)`:
/// `⌈e (k+1) (ln(N/k) + ln(1/ε) + ln(1/C))⌉`, or 0 when `N / (C k ε) ≤ 1`.
pub fn slots_theorem1(n_inactive: u64, k: u64, eps: f64, big_c: f64) -> Result<u64> {
    let n = nonzero("n-inactive", n_inactive)?;
    let kf = nonzero("k", k)?;
    let eps = positive("eps", eps)?;
    let big_c = positive("C", big_c)?;
    let log_term = (n / kf).ln() + (1.0 / eps).ln() + (1.0 / big_c).ln();
    Ok(ceil_count(E * (kf + 1.0) * log_term))
}

/// Slots guaranteeing `P(M_ℓ > 0) ≤ ε`: `⌈e (k+1) (ln N + ln(1/ε))⌉`.
pub fn slots_corollary1(n_inactive: u64, k: u64, eps: f64) -> Result<u64> {
    Ok(ceil_count(slots_corollary1_real(n_inactive, k, eps)?))
}

fn slots_corollary1_real(n_inactive: u64, k: u64, eps: f64) -> Result<f64> {
    let n = nonzero("n-inactive", n_inactive)?;
    let eps = probability("eps", eps)?;
    Ok(E * (k as f64 + 1.0) * (n.ln() + (1.0 / eps).ln()))
}

/// Error bound after `ℓ` slots: `min(1, N e^{-ℓ / (e (k+1))})`.
pub fn theoretical_error_curve(n_inactive: u64, k: u64, slots: u64) -> f64 {
    let bound = n_inactive as f64 * (-(slots as f64) / (E * (k as f64 + 1.0))).exp();
    bound.min(1.0)
}

/// Channel uses per slot for slot error `δ`:
/// `⌈(K²/P) (ln(1/δ) + 1) / c⌉`.
pub fn repetition_length(norm_bound: f64, power: f64, delta: f64, c_constant: f64) -> Result<u64> {
    Ok(ceil_count(repetition_length_real(norm_bound, power, delta, c_constant)?))
}

fn repetition_length_real(norm_bound: f64, power: f64, delta: f64, c_constant: f64) -> Result<f64> {
    let k = positive("big-k", norm_bound)?;
    let p = positive("power", power)?;
    let delta = probability("delta", delta)?;
    let c = positive("c", c_constant)?;
    Ok(k * k / p * ((1.0 / delta).ln() + 1.0) / c)
}

/// Channel-use budget of the scheme run over the repetition code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelUseBudget {
    /// Slots, from [`slots_corollary1`].
    pub slots: u64,
    /// Per-slot error target `ε / ℓ`.
    pub slot_error: f64,
    /// Repetitions per slot at that target.
    pub repetitions: u64,
    /// `ℓ · m`.
    pub total: u64,
    /// The loosened closed form, evaluated in reals.
    pub closed_form: f64,
}

/// `ℓ = slots_corollary1(N, k, ε)`, `m = repetition_length(K, P, ε/ℓ, c)`,
/// total `ℓ m`, plus the closed form
/// `(K²/P)(1/c) e(k+1)(ln N + ln 1/ε)(2 + ln(k+1) + ln ln(N/ε) + ln 1/ε)`.
pub fn total_channel_uses(
    n_inactive: u64,
    k: u64,
    eps: f64,
    norm_bound: f64,
    power: f64,
    c_constant: f64,
) -> Result<ChannelUseBudget> {
    let slots = slots_corollary1(n_inactive, k, eps)?;
    if slots == 0 {
        return Err(Error::invalid("eps", "slot budget is zero; no channel code needed"));
    }
    let slot_error = eps / slots as f64;
    let repetitions = repetition_length(norm_bound, power, slot_error, c_constant)?;
    Ok(ChannelUseBudget {
        slots,
        slot_error,
        repetitions,
        total: slots * repetitions,
        closed_form: closed_form_channel_uses(n_inactive, k, eps, norm_bound, power, c_constant)?,
    })
}

pub fn closed_form_channel_uses(
    n_inactive: u64,
    k: u64,
    eps: f64,
    norm_bound: f64,
    power: f64,
    c_constant: f64,
) -> Result<f64> {
    let n = nonzero("n-inactive", n_inactive)?;
    let eps = probability("eps", eps)?;
    let norm = positive("big-k", norm_bound)?;
    let power = positive("power", power)?;
    let c = positive("c", c_constant)?;
    let kf = k as f64;
    let slots = E * (kf + 1.0) * (n.ln() + (1.0 / eps).ln());
    let per_slot = 2.0 + (kf + 1.0).ln() + (n / eps).ln().ln() + (1.0 / eps).ln();
    Ok(norm * norm / power / c * slots * per_slot)
}

/// `ℓ m` with both factors left unrounded. Equal to the closed form up to
/// floating point.
pub fn real_channel_uses(
    n_inactive: u64,
    k: u64,
    eps: f64,
    norm_bound: f64,
    power: f64,
    c_constant: f64,
) -> Result<f64> {
    let slots = slots_corollary1_real(n_inactive, k, eps)?;
    let reps = repetition_length_real(norm_bound, power, eps / slots, c_constant)?;
    Ok(slots * reps)
}
