//! Monte Carlo experiments: run-until-exact error curves, expectation
//! traces, tail probabilities and end-to-end trials over the noisy channel.
//!
//! Trial `j` of a batch keyed by `seed_base` runs under
//! [`trial_seed(seed_base, j)`](crate::rng::trial_seed). Trials are executed
//! in parallel and all aggregates are built from integer counts, so outputs
//! depend only on the configuration and seed, not on scheduling.

use std::f64::consts::E;
use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::bounds::{repetition_length, slots_corollary1, theoretical_error_curve};
use crate::channel::{ChannelSpec, NoiseModel, RepetitionOracle};
use crate::error::{Error, Result};
use crate::rng::{noise_stream, trial_seed};
use crate::scheme::{
    optimal_choice_probability, IdealOracle, Population, SchemeConfig, SchemeRunner, SurplusChain,
};

pub const DEFAULT_TRIALS: u64 = 20_000;
/// Trial count for full-scale reference runs.
pub const FULL_SCALE_TRIALS: u64 = 120_000;
pub const DEFAULT_GRID_MAX: u64 = 2_500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    IdealOracleUntilExact,
    ExpectationTrace,
    EndToEndNoisy,
}

/// Channel side of an end-to-end experiment. `K` is the noise model's
/// declared norm bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub noise: NoiseModel,
    pub power: f64,
    pub eps: f64,
    pub c_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_inactive: u64,
    pub k: u64,
    pub trial_count: u64,
    pub seed_base: u64,
    pub mode: ExperimentMode,
    pub channel: Option<ChannelParams>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trial_count == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.mode == ExperimentMode::EndToEndNoisy && self.channel.is_none() {
            return Err(Error::invalid("noise", "end-to-end mode needs channel parameters"));
        }
        Ok(())
    }
}

/// First slot at which the potential set equals the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExactSlot {
    Reached(u64),
    /// Not reached within `budget` slots.
    Censored { budget: u64 },
}

impl ExactSlot {
    /// Failure at horizon `l`: not determined within `l` slots.
    pub fn exceeds(&self, l: u64) -> bool {
        match *self {
            ExactSlot::Reached(s) => s > l,
            ExactSlot::Censored { .. } => true,
        }
    }

    fn sort_key(&self) -> u64 {
        match *self {
            ExactSlot::Reached(s) => s,
            ExactSlot::Censored { .. } => u64::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub trial_seed: u64,
    pub slots_until_exact: ExactSlot,
    /// `M_0, M_1, ...` when requested.
    pub trace: Option<Vec<u64>>,
    /// End-to-end mode: whether `P_ℓ` equals the active set.
    pub success: Option<bool>,
}

/// Slot cap for run-until-exact: `⌈100 e (k+1) ln N⌉`, with `ln N` taken at
/// `N ≥ 2` so the cap is never zero.
pub fn default_slot_cap(n_inactive: u64, k: u64) -> u64 {
    let n = n_inactive.max(2) as f64;
    (100.0 * E * (k as f64 + 1.0) * n.ln()).ceil() as u64
}

pub fn simulate_until_exact(n_inactive: u64, k: u64, p: f64, seed: u64) -> Result<RunRecord> {
    simulate_until_exact_with(n_inactive, k, p, seed, default_slot_cap(n_inactive, k), false)
}

/// Runs the surplus chain until it reaches zero or `cap` slots have passed.
pub fn simulate_until_exact_with(
    n_inactive: u64,
    k: u64,
    p: f64,
    seed: u64,
    cap: u64,
    record_trace: bool,
) -> Result<RunRecord> {
    let mut chain = SurplusChain::new(n_inactive, k, p, seed)?;
    let mut trace = record_trace.then(|| vec![chain.surplus()]);
    while chain.surplus() > 0 && chain.slot() < cap {
        let m = chain.step();
        if let Some(t) = trace.as_mut() {
            t.push(m);
        }
    }
    let slots_until_exact = if chain.surplus() == 0 {
        ExactSlot::Reached(chain.slot())
    } else {
        ExactSlot::Censored { budget: cap }
    };
    Ok(RunRecord {
        trial_seed: seed,
        slots_until_exact,
        trace,
        success: None,
    })
}

/// `trials` independent run-until-exact records.
pub fn run_until_exact_batch(n_inactive: u64, k: u64, p: f64, trials: u64, seed_base: u64) -> Result<Vec<RunRecord>> {
    let cap = default_slot_cap(n_inactive, k);
    (0..trials)
        .into_par_iter()
        .map(|j| simulate_until_exact_with(n_inactive, k, p, trial_seed(seed_base, j), cap, false))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub l: u64,
    pub observed_frequency: f64,
    pub theoretical_bound: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub points: Vec<CurvePoint>,
}

/// Observed fraction of records with `ℓ* > ℓ` at each grid point, next to
/// `min(1, N e^{-ℓ/(e(k+1))})`. Censored records count as failures
/// everywhere.
pub fn build_error_curve(records: &[RunRecord], grid: &[u64], n_inactive: u64, k: u64) -> Result<ErrorCurve> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut keys: Vec<u64> = records.iter().map(|r| r.slots_until_exact.sort_key()).collect();
    keys.sort_unstable();
    let trials = keys.len() as u64;
    let points = grid
        .iter()
        .map(|&l| {
            let failures = (keys.len() - keys.partition_point(|&s| s <= l)) as u64;
            CurvePoint {
                l,
                observed_frequency: failures as f64 / trials as f64,
                theoretical_bound: theoretical_error_curve(n_inactive, k, l),
                trials,
            }
        })
        .collect();
    Ok(ErrorCurve { points })
}

/// `1, 1 + step, ...` up to and including `max`.
pub fn default_grid(max: u64, step: u64) -> Vec<u64> {
    (1..=max).step_by(step.max(1) as usize).collect()
}

/// Trial count, lower median and maximum of `ℓ*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UntilExactSummary {
    pub trials: u64,
    pub median: ExactSlot,
    pub max: ExactSlot,
    pub censored: u64,
}

pub fn summarize_until_exact(records: &[RunRecord]) -> Result<UntilExactSummary> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut slots: Vec<ExactSlot> = records.iter().map(|r| r.slots_until_exact).collect();
    slots.sort_unstable_by_key(ExactSlot::sort_key);
    Ok(UntilExactSummary {
        trials: slots.len() as u64,
        median: slots[(slots.len() - 1) / 2],
        max: slots[slots.len() - 1],
        censored: slots
            .iter()
            .filter(|s| matches!(s, ExactSlot::Censored { .. }))
            .count() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub lemma1_prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationTrace {
    pub rows: Vec<TraceRow>,
}

/// Per-slot sample mean of `M_i` with its standard error for
/// `i = 0..=horizon`, next to `N (1 - p q^k)^i`.
pub fn expectation_trace(
    n_inactive: u64,
    k: u64,
    p: f64,
    trials: u64,
    horizon: u64,
    seed_base: u64,
) -> Result<ExpectationTrace> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    SurplusChain::new(n_inactive, k, p, 0)?;
    let width = horizon as usize + 1;
    let zero = || (vec![0u128; width], vec![0u128; width]);
    let (sums, sums_sq) = (0..trials)
        .into_par_iter()
        .fold(zero, |(mut s, mut s2), j| {
            let mut chain = SurplusChain::new(n_inactive, k, p, trial_seed(seed_base, j)).expect("validated");
            let mut m = chain.surplus();
            for i in 0..width {
                if i > 0 {
                    m = chain.step();
                }
                s[i] += u128::from(m);
                s2[i] += u128::from(m) * u128::from(m);
            }
            (s, s2)
        })
        .reduce(zero, |(mut a, mut a2), (b, b2)| {
            for i in 0..width {
                a[i] += b[i];
                a2[i] += b2[i];
            }
            (a, a2)
        });

    let n = trials as f64;
    let rows = (0..width)
        .map(|i| {
            let mean = sums[i] as f64 / n;
            // Σ(x - x̄)² = (n Σx² - (Σx)²) / n, exact in integers.
            let centered = (u128::from(trials) * sums_sq[i]).saturating_sub(sums[i] * sums[i]) as f64 / n;
            let var = if trials > 1 { centered / (n - 1.0) } else { 0.0 };
            TraceRow {
                slot: i as u64,
                empirical_mean: mean,
                std_error: (var / n).sqrt(),
                lemma1_prediction: crate::bounds::expected_remaining(n_inactive, k, p, i as u64),
            }
        })
        .collect();
    Ok(ExpectationTrace { rows })
}

/// `M_ℓ` of each of `trials` runs with a fixed slot budget.
pub fn final_surplus_batch(n_inactive: u64, k: u64, p: f64, slots: u64, trials: u64, seed_base: u64) -> Result<Vec<u64>> {
    SurplusChain::new(n_inactive, k, p, 0)?;
    Ok((0..trials)
        .into_par_iter()
        .map(|j| {
            let mut chain = SurplusChain::new(n_inactive, k, p, trial_seed(seed_base, j)).expect("validated");
            for _ in 0..slots {
                if chain.step() == 0 {
                    break;
                }
            }
            chain.surplus()
        })
        .collect())
}

/// Code dimensions chosen for an end-to-end run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEndPlan {
    /// `ℓ = slots_corollary1(N, k, ε)`.
    pub slots: u64,
    /// `δ = ε / ℓ`.
    pub slot_error: f64,
    /// `m = repetition_length(K, P, δ, c)`.
    pub repetitions: u64,
}

impl EndToEndPlan {
    pub fn new(n_inactive: u64, k: u64, channel: &ChannelParams) -> Result<Self> {
        let slots = slots_corollary1(n_inactive, k, channel.eps)?.max(1);
        let slot_error = channel.eps / slots as f64;
        let norm = channel.noise.norm_bound();
        let repetitions = if norm == 0.0 {
            1
        } else {
            repetition_length(norm, channel.power, slot_error, channel.c_constant)?.max(1)
        };
        Ok(Self {
            slots,
            slot_error,
            repetitions,
        })
    }

    pub fn total_channel_uses(&self) -> u64 {
        self.slots * self.repetitions
    }
}

/// Runs the node-level scheme over the repetition code and the noisy
/// channel. Success requires `P_ℓ` to equal the active set exactly, so a
/// trial that evicted an active node fails even if `|P_ℓ| = k`.
pub fn end_to_end_trial(n_inactive: u64, k: u64, channel: &ChannelParams, seed: u64) -> Result<RunRecord> {
    let plan = EndToEndPlan::new(n_inactive, k, channel)?;
    end_to_end_trial_planned(n_inactive, k, channel, &plan, seed)
}

fn end_to_end_trial_planned(
    n_inactive: u64,
    k: u64,
    channel: &ChannelParams,
    plan: &EndToEndPlan,
    seed: u64,
) -> Result<RunRecord> {
    let population = Population::leading_active(n_inactive as usize, k as usize)?;
    let spec = ChannelSpec::new(channel.power, channel.noise.clone(), population.total_nodes())?;
    let mut oracle = RepetitionOracle::new(spec, plan.repetitions, plan.slot_error, noise_stream(seed));
    let config = SchemeConfig::new(optimal_choice_probability(k), plan.slots, seed)?;
    let mut runner = SchemeRunner::new(&population, config);
    let mut first_exact = runner.state().is_exact(&population).then_some(0);
    for _ in 0..plan.slots {
        runner.step(&mut oracle);
        let state = runner.state();
        if first_exact.is_none() && state.surplus == 0 && state.potential_set.len() == population.k() {
            first_exact = Some(state.slot_index);
        }
    }
    let success = runner.state().is_exact(&population);
    Ok(RunRecord {
        trial_seed: seed,
        slots_until_exact: first_exact.map_or(ExactSlot::Censored { budget: plan.slots }, ExactSlot::Reached),
        trace: None,
        success: Some(success),
    })
}

/// Same scheme with the ideal oracle; the baseline the noisy channel is
/// compared against.
pub fn ideal_trial(n_inactive: u64, k: u64, slots: u64, seed: u64) -> Result<bool> {
    let population = Population::leading_active(n_inactive as usize, k as usize)?;
    let config = SchemeConfig::new(optimal_choice_probability(k), slots, seed)?;
    let mut runner = SchemeRunner::new(&population, config);
    for _ in 0..slots {
        runner.step(&mut IdealOracle);
    }
    Ok(runner.state().is_exact(&population))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndToEndSummary {
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    pub two_epsilon: f64,
    pub l: u64,
    pub m: u64,
    pub total_channel_uses: u64,
}

impl EndToEndSummary {
    /// Binomial standard error of the failure rate.
    pub fn std_error(&self) -> f64 {
        let f = self.failure_rate;
        (f * (1.0 - f) / self.trials as f64).sqrt()
    }
}

pub fn run_end_to_end(n_inactive: u64, k: u64, channel: &ChannelParams, trials: u64, seed_base: u64) -> Result<EndToEndSummary> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let plan = EndToEndPlan::new(n_inactive, k, channel)?;
    let outcomes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|j| {
            end_to_end_trial_planned(n_inactive, k, channel, &plan, trial_seed(seed_base, j))
                .map(|r| r.success == Some(true))
        })
        .collect::<Result<_>>()?;
    let failures = outcomes.iter().filter(|ok| !**ok).count() as u64;
    Ok(EndToEndSummary {
        trials,
        failures,
        failure_rate: failures as f64 / trials as f64,
        two_epsilon: 2.0 * channel.eps,
        l: plan.slots,
        m: plan.repetitions,
        total_channel_uses: plan.total_channel_uses(),
    })
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

/// `l,observed_frequency,theoretical_bound,trials`
pub fn export_error_curve(curve: &ErrorCurve, path: &Path) -> Result<()> {
    write_rows(&curve.points, path)
}

pub fn read_error_curve(path: &Path) -> Result<ErrorCurve> {
    Ok(ErrorCurve { points: read_rows(path)? })
}

/// `slot,empirical_mean,std_error,lemma1_prediction`
pub fn export_expectation_trace(trace: &ExpectationTrace, path: &Path) -> Result<()> {
    write_rows(&trace.rows, path)
}

pub fn read_expectation_trace(path: &Path) -> Result<ExpectationTrace> {
    Ok(ExpectationTrace { rows: read_rows(path)? })
}

/// `trials,failures,failure_rate,two_epsilon,l,m,total_channel_uses`
pub fn export_end_to_end(summary: &EndToEndSummary, path: &Path) -> Result<()> {
    write_rows([summary], path)
}

pub fn read_end_to_end(path: &Path) -> Result<EndToEndSummary> {
    read_rows(path)?.into_iter().next().ok_or(Error::EmptyRecords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseFamily;
    use proptest::prelude::*;

    fn record(slots: ExactSlot) -> RunRecord {
        RunRecord {
            trial_seed: 0,
            slots_until_exact: slots,
            trace: None,
            success: None,
        }
    }

    #[test]
    fn until_exact_trivial_cases() {
        let r = simulate_until_exact(0, 5, 0.3, 1).unwrap();
        assert_eq!(r.slots_until_exact, ExactSlot::Reached(0));
        let r = simulate_until_exact(1, 0, 1.0, 1).unwrap();
        assert_eq!(r.slots_until_exact, ExactSlot::Reached(1));
    }

    #[test]
    fn until_exact_censors_at_cap() {
        let r = simulate_until_exact_with(10, 2, 0.0, 1, 30, true).unwrap();
        assert_eq!(r.slots_until_exact, ExactSlot::Censored { budget: 30 });
        assert_eq!(r.trace.unwrap(), vec![10; 31]);
        assert!(default_slot_cap(1, 0) >= 1);
    }

    #[test]
    fn median_below_half_error_budget() {
        let records = run_until_exact_batch(10_000, 20, 1.0 / 21.0, 1_000, 3).unwrap();
        let summary = summarize_until_exact(&records).unwrap();
        let bound = slots_corollary1(10_000, 20, 0.5).unwrap();
        assert_eq!(bound, 566);
        match summary.median {
            ExactSlot::Reached(m) => assert!(m < bound, "median {m}"),
            ExactSlot::Censored { .. } => panic!("median censored"),
        }
    }

    #[test]
    fn curve_uses_strict_exceedance() {
        let records = vec![record(ExactSlot::Reached(5)); 4];
        let curve = build_error_curve(&records, &[4, 5, 6], 10, 1).unwrap();
        let freqs: Vec<f64> = curve.points.iter().map(|p| p.observed_frequency).collect();
        assert_eq!(freqs, vec![1.0, 0.0, 0.0]);
        assert!(build_error_curve(&[], &[1], 10, 1).is_err());
    }

    #[test]
    fn censored_records_fail_everywhere() {
        let records = vec![record(ExactSlot::Censored { budget: 3 }), record(ExactSlot::Reached(2))];
        let curve = build_error_curve(&records, &[1, 2, 100], 10, 1).unwrap();
        let freqs: Vec<f64> = curve.points.iter().map(|p| p.observed_frequency).collect();
        assert_eq!(freqs, vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn trace_first_row_is_exact() {
        let t = expectation_trace(250, 3, 0.25, 500, 5, 1).unwrap();
        assert_eq!(t.rows[0].empirical_mean, 250.0);
        assert_eq!(t.rows[0].std_error, 0.0);
        assert_eq!(t.rows.len(), 6);
        assert!(expectation_trace(250, 3, 0.25, 500, 0, 1).is_err());
    }

    #[test]
    fn trace_without_active_nodes_is_thinning() {
        let t = expectation_trace(1000, 0, 0.2, 20_000, 10, 8).unwrap();
        for row in &t.rows[1..] {
            let expected = 1000.0 * 0.8f64.powi(row.slot as i32);
            assert!((row.lemma1_prediction - expected).abs() < 1e-9);
            assert!((row.empirical_mean - expected).abs() <= 3.0 * row.std_error, "{row:?}");
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let a = run_until_exact_batch(500, 4, 0.2, 200, 9).unwrap();
        let b = run_until_exact_batch(500, 4, 0.2, 200, 9).unwrap();
        assert_eq!(a, b);
        let c = run_until_exact_batch(500, 4, 0.2, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trial_order_does_not_matter() {
        let records = run_until_exact_batch(300, 3, 0.25, 400, 4).unwrap();
        let grid = default_grid(200, 1);
        let forward = build_error_curve(&records, &grid, 300, 3).unwrap();
        let mut reversed = records.clone();
        reversed.reverse();
        reversed.rotate_left(17);
        assert_eq!(forward, build_error_curve(&reversed, &grid, 300, 3).unwrap());
    }

    #[test]
    fn end_to_end_without_noise_matches_ideal() {
        let channel = ChannelParams {
            noise: NoiseModel::iid(NoiseFamily::Gaussian { sigma: 0.0 }),
            power: 1.0,
            eps: 0.1,
            c_constant: 0.125,
        };
        let plan = EndToEndPlan::new(60, 3, &channel).unwrap();
        for j in 0..40 {
            let seed = trial_seed(77, j);
            let noisy = end_to_end_trial(60, 3, &channel, seed).unwrap();
            assert_eq!(noisy.success, Some(ideal_trial(60, 3, plan.slots, seed).unwrap()));
        }
    }

    #[test]
    fn end_to_end_success_matches_exact_slot() {
        let channel = ChannelParams {
            noise: NoiseModel::iid(NoiseFamily::Gaussian { sigma: 1.0 }),
            power: 1.0,
            eps: 0.2,
            c_constant: 0.125,
        };
        for j in 0..20 {
            let r = end_to_end_trial(40, 2, &channel, trial_seed(5, j)).unwrap();
            if r.success == Some(true) {
                assert!(matches!(r.slots_until_exact, ExactSlot::Reached(_)));
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig {
            n_inactive: 10,
            k: 1,
            trial_count: 0,
            seed_base: 0,
            mode: ExperimentMode::IdealOracleUntilExact,
            channel: None,
        };
        assert!(cfg.validate().is_err());
        cfg.trial_count = 1;
        assert!(cfg.validate().is_ok());
        cfg.mode = ExperimentMode::EndToEndNoisy;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let curve = ErrorCurve {
            points: (1..=3)
                .map(|l| CurvePoint {
                    l,
                    observed_frequency: 1.0 / l as f64,
                    theoretical_bound: 0.5,
                    trials: 7,
                })
                .collect(),
        };
        let path = dir.path().join("curve.csv");
        export_error_curve(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "l,observed_frequency,theoretical_bound,trials");
        assert!(!text.contains('\r'));

        let trace_path = dir.path().join("trace.csv");
        export_expectation_trace(&expectation_trace(20, 1, 0.5, 10, 2, 0).unwrap(), &trace_path).unwrap();
        let header = std::fs::read_to_string(&trace_path).unwrap();
        assert!(header.starts_with("slot,empirical_mean,std_error,lemma1_prediction\n"));

        let summary = EndToEndSummary {
            trials: 10,
            failures: 1,
            failure_rate: 0.1,
            two_epsilon: 0.1,
            l: 151,
            m: 73,
            total_channel_uses: 151 * 73,
        };
        let e2e_path = dir.path().join("e2e.csv");
        export_end_to_end(&summary, &e2e_path).unwrap();
        let text = std::fs::read_to_string(&e2e_path).unwrap();
        assert!(text.starts_with("trials,failures,failure_rate,two_epsilon,l,m,total_channel_uses\n"));
        assert_eq!(read_end_to_end(&e2e_path).unwrap(), summary);
    }

    #[test]
    fn export_reports_path_on_failure() {
        let curve = ErrorCurve { points: vec![] };
        let err = export_error_curve(&curve, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    proptest! {
        #[test]
        fn curve_round_trips_and_is_monotone(
            slots in proptest::collection::vec(0u64..400, 1..60),
            freq in proptest::collection::vec(0.0f64..1.0, 1..20),
        ) {
            let records: Vec<RunRecord> = slots.iter().map(|&s| record(ExactSlot::Reached(s))).collect();
            let curve = build_error_curve(&records, &default_grid(400, 7), 1000, 5).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[1].observed_frequency <= w[0].observed_frequency);
            }

            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.csv");
            let arbitrary = ErrorCurve {
                points: freq.iter().enumerate().map(|(i, &f)| CurvePoint {
                    l: i as u64,
                    observed_frequency: f,
                    theoretical_bound: f / 3.0,
                    trials: 99,
                }).collect(),
            };
            export_error_curve(&arbitrary, &path).unwrap();
            prop_assert_eq!(read_error_curve(&path).unwrap(), arbitrary);
        }

        #[test]
        fn trace_round_trips(means in proptest::collection::vec(0.0f64..1e6, 1..20)) {
            let trace = ExpectationTrace {
                rows: means.iter().enumerate().map(|(i, &m)| TraceRow {
                    slot: i as u64,
                    empirical_mean: m,
                    std_error: m.sqrt() / 7.0,
                    lemma1_prediction: m * 0.99,
                }).collect(),
            };
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            export_expectation_trace(&trace, &path).unwrap();
            prop_assert_eq!(read_expectation_trace(&path).unwrap(), trace);
        }
    }
}
