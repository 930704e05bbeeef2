//! Randomized elimination scheme for activity detection.
//!
//! The receiver starts with every node marked potentially active. In each
//! slot a random chosen set is drawn from common randomness, every node sends
//! `true` iff it is active and chosen, and the receiver learns the disjunction
//! of those bits through a [`DisjunctionOracle`]. A decoded `false` clears the
//! whole chosen set from the potential set; a decoded `true` is discarded.
//!
//! Two simulators are provided. [`run_scheme`] plays every node explicitly and
//! works with any oracle. [`run_scheme_fast`] tracks only the surplus count
//! `M_i` (inactive nodes still marked potentially active) and is exact in law
//! for the ideal oracle.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::rng::slot_stream;

pub type NodeSet = BTreeSet<usize>;

/// Node universe of `N + k` transmitters and its hidden active subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    active_mask: Vec<bool>,
    active: NodeSet,
}

impl Population {
    pub fn new(total_nodes: usize, active: impl IntoIterator<Item = usize>) -> Result<Self> {
        if total_nodes == 0 {
            return Err(Error::invalid("total_nodes", "must be positive"));
        }
        let mut active_mask = vec![false; total_nodes];
        let mut set = NodeSet::new();
        for node in active {
            if node >= total_nodes {
                return Err(Error::invalid(
                    "active_set",
                    format!("node {node} out of range for {total_nodes} nodes"),
                ));
            }
            active_mask[node] = true;
            set.insert(node);
        }
        Ok(Self {
            active_mask,
            active: set,
        })
    }

    /// `n_inactive + k` nodes where nodes `0..k` are the active ones.
    ///
    /// Every quantity of interest is invariant under relabeling, so the
    /// simulators use this layout.
    pub fn leading_active(n_inactive: usize, k: usize) -> Result<Self> {
        Self::new(n_inactive + k, 0..k)
    }

    pub fn total_nodes(&self) -> usize {
        self.active_mask.len()
    }

    /// Number of active nodes, `k`.
    pub fn k(&self) -> usize {
        self.active.len()
    }

    /// Number of inactive nodes, `N`.
    pub fn n_inactive(&self) -> usize {
        self.total_nodes() - self.k()
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.active_mask.get(node).copied().unwrap_or(false)
    }

    pub fn active_set(&self) -> &NodeSet {
        &self.active
    }
}

/// Knobs of the scheme: choice probability `p`, slot budget `ℓ` and the
/// master seed of the common-randomness stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    choice_probability: f64,
    slot_budget: u64,
    master_seed: u64,
}

impl SchemeConfig {
    /// `p` may be any value in `[0, 1]`; the endpoints are degenerate but
    /// well defined (nobody or everybody chosen).
    pub fn new(choice_probability: f64, slot_budget: u64, master_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&choice_probability) {
            return Err(Error::invalid(
                "p",
                format!("choice probability {choice_probability} not in [0, 1]"),
            ));
        }
        if slot_budget == 0 {
            return Err(Error::invalid("l", "slot budget must be positive"));
        }
        Ok(Self {
            choice_probability,
            slot_budget,
            master_seed,
        })
    }

    pub fn choice_probability(&self) -> f64 {
        self.choice_probability
    }

    /// `q = 1 - p`, the probability that a node is not chosen.
    pub fn not_chosen_probability(&self) -> f64 {
        1.0 - self.choice_probability
    }

    pub fn slot_budget(&self) -> u64 {
        self.slot_budget
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }
}

/// Receiver state after slot `slot_index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialSetState {
    pub slot_index: u64,
    pub potential_set: NodeSet,
    /// Inactive nodes still in the potential set. Equals `|P_i| - k` as long
    /// as no active node has been evicted.
    pub surplus: usize,
}

impl PotentialSetState {
    /// `P_0`: every node is potentially active.
    pub fn initial(population: &Population) -> Self {
        Self {
            slot_index: 0,
            potential_set: (0..population.total_nodes()).collect(),
            surplus: population.n_inactive(),
        }
    }

    /// True iff the potential set is exactly the active set.
    pub fn is_exact(&self, population: &Population) -> bool {
        self.potential_set == *population.active_set()
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    pub chosen_set: NodeSet,
    /// Whether any active node was chosen (the true disjunction).
    pub any_active_chosen: bool,
    /// The disjunction as delivered by the oracle.
    pub decoded_disjunction: bool,
    pub removed_count: usize,
}

/// Boolean messages of `senders` transmitters over `slots` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageBlock {
    senders: usize,
    slots: usize,
    bits: Vec<bool>,
}

impl MessageBlock {
    pub fn new(senders: usize, slots: usize) -> Self {
        Self {
            senders,
            slots,
            bits: vec![false; senders * slots],
        }
    }

    /// One row per sender; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let slots = rows.first().map_or(0, Vec::len);
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != slots) {
            return Err(Error::DimensionMismatch(format!(
                "sender {r} has {} slots, expected {slots}",
                row.len()
            )));
        }
        Ok(Self {
            senders: rows.len(),
            slots,
            bits: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn senders(&self) -> usize {
        self.senders
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn get(&self, sender: usize, slot: usize) -> bool {
        self.bits[sender * self.slots + slot]
    }

    pub fn set(&mut self, sender: usize, slot: usize, bit: bool) {
        self.bits[sender * self.slots + slot] = bit;
    }

    pub fn sender(&self, sender: usize) -> &[bool] {
        &self.bits[sender * self.slots..(sender + 1) * self.slots]
    }

    /// Component-wise disjunction over senders.
    pub fn disjunction(&self) -> Vec<bool> {
        (0..self.slots)
            .map(|i| (0..self.senders).any(|r| self.get(r, i)))
            .collect()
    }
}

/// A channel code that delivers component-wise disjunctions of the senders'
/// messages, wrong in any given slot with probability at most
/// [`slot_error_bound`](DisjunctionOracle::slot_error_bound).
pub trait DisjunctionOracle {
    fn decode(&mut self, messages: &MessageBlock) -> Vec<bool>;

    fn slot_error_bound(&self) -> f64;
}

/// Error-free oracle.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealOracle;

impl DisjunctionOracle for IdealOracle {
    fn decode(&mut self, messages: &MessageBlock) -> Vec<bool> {
        messages.disjunction()
    }

    fn slot_error_bound(&self) -> f64 {
        0.0
    }
}

/// `1 / (k + 1)`, the maximizer of `p (1 - p)^k`.
pub fn optimal_choice_probability(k: u64) -> f64 {
    1.0 / (k as f64 + 1.0)
}

/// Each node joins independently with probability `p`, using one uniform
/// draw per node in index order.
pub fn draw_chosen_set<R: Rng + ?Sized>(population: &Population, p: f64, slot_rng: &mut R) -> NodeSet {
    (0..population.total_nodes())
        .filter(|_| slot_rng.random::<f64>() < p)
        .collect()
}

/// A node sends `true` iff it is both active and chosen.
pub fn node_transmit_bit(node: usize, population: &Population, chosen_set: &NodeSet) -> bool {
    population.is_active(node) && chosen_set.contains(&node)
}

/// Applies one slot's decoded disjunction to the receiver state.
///
/// On `true` the information is discarded; on `false` every chosen node is
/// removed. `population` is only consulted to keep the surplus count.
pub fn receiver_update(
    state: &PotentialSetState,
    population: &Population,
    chosen_set: &NodeSet,
    decoded: bool,
) -> (PotentialSetState, usize) {
    let mut next = state.clone();
    next.slot_index += 1;
    let mut removed = 0;
    if !decoded {
        for node in chosen_set {
            if next.potential_set.remove(node) {
                removed += 1;
                if !population.is_active(*node) {
                    next.surplus -= 1;
                }
            }
        }
    }
    (next, removed)
}

/// Slot-by-slot driver of the node-level scheme.
#[derive(Debug, Clone)]
pub struct SchemeRunner<'a> {
    population: &'a Population,
    config: SchemeConfig,
    state: PotentialSetState,
    messages: MessageBlock,
}

impl<'a> SchemeRunner<'a> {
    pub fn new(population: &'a Population, config: SchemeConfig) -> Self {
        Self {
            population,
            config,
            state: PotentialSetState::initial(population),
            messages: MessageBlock::new(population.total_nodes(), 1),
        }
    }

    pub fn state(&self) -> &PotentialSetState {
        &self.state
    }

    pub fn into_state(self) -> PotentialSetState {
        self.state
    }

    /// Runs the next slot. Every node follows the transmit rule, including
    /// nodes the receiver has already eliminated.
    pub fn step<O: DisjunctionOracle + ?Sized>(&mut self, oracle: &mut O) -> SlotOutcome {
        let pop = self.population;
        let slot = self.state.slot_index + 1;
        let mut rng = slot_stream(self.config.master_seed(), slot);
        let chosen = draw_chosen_set(pop, self.config.choice_probability(), &mut rng);
        for node in 0..pop.total_nodes() {
            self.messages.set(node, 0, node_transmit_bit(node, pop, &chosen));
        }
        let any_active_chosen = chosen.iter().any(|&n| pop.is_active(n));
        let decoded = oracle.decode(&self.messages)[0];
        let (next, removed_count) = receiver_update(&self.state, pop, &chosen, decoded);
        self.state = next;
        SlotOutcome {
            chosen_set: chosen,
            any_active_chosen,
            decoded_disjunction: decoded,
            removed_count,
        }
    }
}

/// Node-level simulation of `ℓ` slots over `oracle`.
pub fn run_scheme<O: DisjunctionOracle + ?Sized>(
    population: &Population,
    config: &SchemeConfig,
    oracle: &mut O,
) -> (PotentialSetState, Vec<SlotOutcome>) {
    let mut runner = SchemeRunner::new(population, *config);
    let trace = (0..config.slot_budget()).map(|_| runner.step(oracle)).collect();
    (runner.into_state(), trace)
}

/// Surplus-only Markov chain equivalent in law to [`run_scheme`] with the
/// ideal oracle.
///
/// Per slot: with probability `q^k` no active node is chosen, in which case
/// `Binomial(M, p)` surplus nodes are removed; otherwise nothing changes.
#[derive(Debug, Clone)]
pub struct SurplusChain {
    seed: u64,
    p: f64,
    none_active_probability: f64,
    slot: u64,
    surplus: u64,
}

impl SurplusChain {
    pub fn new(n_inactive: u64, k: u64, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", format!("choice probability {p} not in [0, 1]")));
        }
        let k = i32::try_from(k).map_err(|_| Error::invalid("k", "too large"))?;
        Ok(Self {
            seed,
            p,
            none_active_probability: (1.0 - p).powi(k),
            slot: 0,
            surplus: n_inactive,
        })
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn surplus(&self) -> u64 {
        self.surplus
    }

    /// Advances one slot and returns the new surplus.
    pub fn step(&mut self) -> u64 {
        self.slot += 1;
        let mut rng = slot_stream(self.seed, self.slot);
        let none_active = rng.random::<f64>() < self.none_active_probability;
        if none_active && self.surplus > 0 {
            let removed = Binomial::new(self.surplus, self.p)
                .expect("p validated at construction")
                .sample(&mut rng);
            self.surplus -= removed;
        }
        self.surplus
    }
}

/// Result of [`run_scheme_fast`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastRun {
    pub final_surplus: u64,
    /// `M_0, ..., M_ℓ`.
    pub trace: Vec<u64>,
    /// First slot at which the surplus hit zero, if it did within the budget.
    pub slots_until_exact: Option<u64>,
}

pub fn run_scheme_fast(population: &Population, config: &SchemeConfig) -> FastRun {
    let mut chain = SurplusChain::new(
        population.n_inactive() as u64,
        population.k() as u64,
        config.choice_probability(),
        config.master_seed(),
    )
    .expect("config validated at construction");

    let mut trace = Vec::with_capacity(config.slot_budget() as usize + 1);
    trace.push(chain.surplus());
    let mut slots_until_exact = (chain.surplus() == 0).then_some(0);
    for _ in 0..config.slot_budget() {
        let m = chain.step();
        trace.push(m);
        if m == 0 && slots_until_exact.is_none() {
            slots_until_exact = Some(chain.slot());
        }
    }
    FastRun {
        final_surplus: chain.surplus(),
        trace,
        slots_until_exact,
    }
}
