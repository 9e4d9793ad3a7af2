//! Slot-level schedule generation.
//!
//! Every slot, links draw a random decision schedule `D(t)` (an independent
//! set of links allowed to change state) and then apply an update kernel to a
//! base schedule. The standard Glauber chain uses the previous slot as base;
//! delayed CSMA of order `T` uses the schedule from `T` slots back, so the
//! process runs as `T` interleaved copies of the standard chain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};
use crate::graph::{bits_feasible, is_feasible, ConflictGraph, Schedule};

/// Per-link channel access probabilities `a_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessParams {
    a: Vec<f64>,
}

impl AccessParams {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if let Some((v, &x)) = a.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(CsmaError::param(
                format!("access_prob[{v}]"),
                format!("{x} is outside [0, 1]"),
            ));
        }
        Ok(Self { a })
    }

    pub fn uniform(n_links: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; n_links])
    }

    pub fn probs(&self) -> &[f64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `m_v = a_v · ∏_{j ∈ N_v} (1 − a_j)`: probability that `v` lands in the decision schedule.
    pub fn selection_probabilities(&self, g: &ConflictGraph) -> Result<Vec<f64>> {
        self.check_len(g)?;
        Ok((0..g.n_links())
            .map(|v| {
                self.a[v]
                    * g.neighbors(v)
                        .iter()
                        .map(|&j| 1.0 - self.a[j])
                        .product::<f64>()
            })
            .collect())
    }

    fn check_len(&self, g: &ConflictGraph) -> Result<()> {
        if self.a.len() != g.n_links() {
            return Err(CsmaError::DimensionMismatch {
                expected: g.n_links(),
                got: self.a.len(),
            });
        }
        Ok(())
    }
}

/// Weight function `h` applied to queue lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    /// `h(x) = log log(x + e)`
    LogLog,
    /// `h(x) = log(x + 1)`
    Log1p,
    /// `h(x) = x`
    Linear,
}

impl WeightKind {
    pub fn h(self, x: f64) -> f64 {
        match self {
            WeightKind::LogLog => (x + std::f64::consts::E).ln().ln(),
            WeightKind::Log1p => x.ln_1p(),
            WeightKind::Linear => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FugacityPolicy {
    Static(Vec<f64>),
    /// `λ_v = exp(max{h(Q_v), ε/(2N)·h(Q_max)})`, recomputed every slot from current queues.
    QueueDriven { weight: WeightKind, epsilon: f64 },
}

impl FugacityPolicy {
    pub fn validate(&self, n_links: usize) -> Result<()> {
        match self {
            FugacityPolicy::Static(l) => {
                if l.len() != n_links {
                    return Err(CsmaError::DimensionMismatch {
                        expected: n_links,
                        got: l.len(),
                    });
                }
                if let Some((v, &x)) = l.iter().enumerate().find(|(_, x)| !(**x > 0.0 && x.is_finite())) {
                    return Err(CsmaError::param(format!("fugacity[{v}]"), format!("{x} must be positive")));
                }
            }
            FugacityPolicy::QueueDriven { epsilon, .. } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(CsmaError::param("epsilon", "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        matches!(self, FugacityPolicy::Static(_))
    }

    pub fn resolve_into(&self, queues: &[usize], q_max: usize, out: &mut [f64]) {
        match self {
            FugacityPolicy::Static(l) => out.copy_from_slice(l),
            FugacityPolicy::QueueDriven { weight, epsilon } => {
                let floor = epsilon / (2.0 * out.len() as f64) * weight.h(q_max as f64);
                for (o, &q) in out.iter_mut().zip(queues) {
                    *o = weight.h(q as f64).max(floor).exp();
                }
            }
        }
    }
}

pub fn resolve_fugacity(policy: &FugacityPolicy, queues: &[usize], q_max: usize, n_links: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_links];
    policy.resolve_into(queues, q_max, &mut out);
    out
}

/// Base-chain update rule applied to the decision-schedule links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKernel {
    #[default]
    Glauber,
    /// Single-site Metropolis–Hastings toggle on one uniformly chosen decision link.
    MetropolisHastings,
}

/// The last `T` schedules, oldest first in ring order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleHistory {
    ring: Vec<Schedule>,
    order: usize,
    head: usize,
    slot: u64,
}

impl ScheduleHistory {
    /// All-zero schedules for slots `0..T`; the next slot to generate is `T`.
    pub fn zeros(n_links: usize, order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            ring: vec![Schedule::empty(n_links); order],
            order,
            head: 0,
            slot: order as u64,
        })
    }

    /// An unfilled history; `push` schedules until `order` are stored.
    pub fn empty(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            ring: Vec::with_capacity(order),
            order,
            head: 0,
            slot: 0,
        })
    }

    /// History from explicit schedules (oldest first) for slots `next_slot − T .. next_slot`.
    pub fn from_schedules(schedules: Vec<Schedule>, next_slot: u64) -> Result<Self> {
        let order = schedules.len();
        check_order(order)?;
        if next_slot < order as u64 {
            return Err(CsmaError::State(format!(
                "next slot {next_slot} precedes the {order} stored schedules"
            )));
        }
        Ok(Self {
            ring: schedules,
            order,
            head: 0,
            slot: next_slot,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The slot the next generated schedule belongs to.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_initialized(&self) -> bool {
        self.ring.len() == self.order
    }

    pub fn push(&mut self, s: Schedule) {
        if self.ring.len() < self.order {
            self.ring.push(s);
        } else {
            self.ring[self.head] = s;
            self.head = (self.head + 1) % self.order;
        }
        self.slot += 1;
    }

    /// Schedule at slot `t − lag`, for `1 ≤ lag ≤ T`.
    pub fn lagged(&self, lag: usize) -> Option<&Schedule> {
        if !self.is_initialized() || lag == 0 || lag > self.order {
            return None;
        }
        Some(&self.ring[(self.head + self.order - lag) % self.order])
    }

    /// Schedule at slot `t − T`, the base of the next update.
    pub fn base(&self) -> Option<&Schedule> {
        self.lagged(self.order)
    }

    pub fn latest(&self) -> Option<&Schedule> {
        self.lagged(1)
    }

    /// Stored schedules, oldest first.
    pub fn schedules(&self) -> impl Iterator<Item = &Schedule> {
        (0..self.ring.len()).map(move |k| &self.ring[(self.head + k) % self.ring.len()])
    }

    /// Hands out the base slot for in-place overwrite with the new schedule.
    fn advance_in_place(&mut self) -> &mut Schedule {
        let idx = self.head;
        self.head = (self.head + 1) % self.order;
        self.slot += 1;
        &mut self.ring[idx]
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(CsmaError::param("T", "order must be at least 1"));
    }
    Ok(())
}

/// Attempt coins with conflict cancellation: `v ∈ D` iff `v` attempts and none of its neighbors does.
fn sample_decision_into<R: Rng + ?Sized>(
    g: &ConflictGraph,
    access: &[f64],
    attempts: &mut [bool],
    decision: &mut [bool],
    rng: &mut R,
) {
    for (att, &a) in attempts.iter_mut().zip(access) {
        *att = rng.gen::<f64>() < a;
    }
    for v in 0..g.n_links() {
        decision[v] = attempts[v] && g.neighbors(v).iter().all(|&j| !attempts[j]);
    }
}

fn glauber_in_place<R: Rng + ?Sized>(
    g: &ConflictGraph,
    bits: &mut [bool],
    decision: &[bool],
    lambda: &[f64],
    rng: &mut R,
) {
    // Decision links are pairwise non-adjacent, so every neighbor read below is
    // a non-decision link whose base value is never overwritten.
    for v in 0..bits.len() {
        if decision[v] {
            let free = g.neighbors(v).iter().all(|&w| !bits[w]);
            bits[v] = free && rng.gen::<f64>() < lambda[v] / (1.0 + lambda[v]);
        }
    }
}

fn mh_in_place<R: Rng + ?Sized>(
    g: &ConflictGraph,
    bits: &mut [bool],
    decision: &[bool],
    lambda: &[f64],
    rng: &mut R,
) {
    let size = decision.iter().filter(|&&d| d).count();
    if size == 0 {
        return;
    }
    let pick = rng.gen_range(0..size);
    let v = decision
        .iter()
        .enumerate()
        .filter(|(_, &d)| d)
        .nth(pick)
        .map(|(v, _)| v)
        .expect("pick < size");
    if bits[v] {
        if rng.gen::<f64>() < (1.0 / lambda[v]).min(1.0) {
            bits[v] = false;
        }
    } else if g.neighbors(v).iter().all(|&w| !bits[w]) && rng.gen::<f64>() < lambda[v].min(1.0) {
        bits[v] = true;
    }
}

pub fn sample_decision_schedule<R: Rng + ?Sized>(
    g: &ConflictGraph,
    p: &AccessParams,
    rng: &mut R,
) -> Result<Schedule> {
    p.check_len(g)?;
    let n = g.n_links();
    let mut attempts = vec![false; n];
    let mut decision = vec![false; n];
    sample_decision_into(g, p.probs(), &mut attempts, &mut decision, rng);
    Ok(Schedule::from_bits(decision))
}

fn check_update_inputs(g: &ConflictGraph, base: &Schedule, decision: &Schedule, lambda: &[f64]) -> Result<()> {
    for len in [decision.len(), lambda.len()] {
        if len != g.n_links() {
            return Err(CsmaError::DimensionMismatch {
                expected: g.n_links(),
                got: len,
            });
        }
    }
    if !is_feasible(g, base)? {
        return Err(CsmaError::ContractViolation(format!("base schedule {base} is infeasible")));
    }
    if !bits_feasible(g, decision.bits()) {
        return Err(CsmaError::ContractViolation(format!(
            "decision schedule {decision} is not an independent set"
        )));
    }
    Ok(())
}

/// One Glauber update of `base` restricted to the links in `decision`.
pub fn glauber_update<R: Rng + ?Sized>(
    g: &ConflictGraph,
    base: &Schedule,
    decision: &Schedule,
    lambda: &[f64],
    rng: &mut R,
) -> Result<Schedule> {
    check_update_inputs(g, base, decision, lambda)?;
    let mut out = base.clone();
    glauber_in_place(g, out.bits_mut(), decision.bits(), lambda, rng);
    Ok(out)
}

/// Metropolis–Hastings variant: one uniformly chosen decision link proposes a
/// toggle; activation is accepted with `min(1, λ_v)` when no neighbor is
/// active, deactivation with `min(1, 1/λ_v)`.
pub fn mh_update<R: Rng + ?Sized>(
    g: &ConflictGraph,
    base: &Schedule,
    decision: &Schedule,
    lambda: &[f64],
    rng: &mut R,
) -> Result<Schedule> {
    check_update_inputs(g, base, decision, lambda)?;
    let mut out = base.clone();
    mh_in_place(g, out.bits_mut(), decision.bits(), lambda, rng);
    Ok(out)
}

/// One slot of delayed CSMA with the Glauber kernel: the new schedule is a
/// Glauber update of the schedule `T` slots back. The history advances.
pub fn delayed_csma_step<R: Rng + ?Sized>(
    g: &ConflictGraph,
    hist: &mut ScheduleHistory,
    p: &AccessParams,
    lambda: &[f64],
    rng: &mut R,
) -> Result<Schedule> {
    if !hist.is_initialized() {
        return Err(CsmaError::State(format!(
            "history holds {} of {} schedules",
            hist.ring.len(),
            hist.order
        )));
    }
    p.check_len(g)?;
    let base = hist.base().expect("initialized").clone();
    let decision = sample_decision_schedule(g, p, rng)?;
    let next = glauber_update(g, &base, &decision, lambda, rng)?;
    hist.push(next.clone());
    Ok(next)
}

/// A delayed-CSMA chain of fixed order that updates its history in place.
#[derive(Debug, Clone)]
pub struct DelayedCsma<'g> {
    graph: &'g ConflictGraph,
    access: AccessParams,
    kernel: UpdateKernel,
    lazy: bool,
    history: ScheduleHistory,
    attempts: Vec<bool>,
    decision: Vec<bool>,
}

impl<'g> DelayedCsma<'g> {
    /// Chain of order `T` started from the all-zero history.
    pub fn new(graph: &'g ConflictGraph, access: AccessParams, order: usize) -> Result<Self> {
        let history = ScheduleHistory::zeros(graph.n_links(), order)?;
        Self::with_history(graph, access, history)
    }

    pub fn with_history(graph: &'g ConflictGraph, access: AccessParams, history: ScheduleHistory) -> Result<Self> {
        access.check_len(graph)?;
        if !history.is_initialized() {
            return Err(CsmaError::State("history is not fully initialized".into()));
        }
        for s in history.schedules() {
            if !is_feasible(graph, s)? {
                return Err(CsmaError::ContractViolation(format!("history schedule {s} is infeasible")));
            }
        }
        let n = graph.n_links();
        Ok(Self {
            graph,
            access,
            kernel: UpdateKernel::Glauber,
            lazy: false,
            history,
            attempts: vec![false; n],
            decision: vec![false; n],
        })
    }

    pub fn with_kernel(mut self, kernel: UpdateKernel) -> Self {
        self.kernel = kernel;
        self
    }

    /// Lazy chains hold the base schedule with probability 1/2 each slot.
    pub fn with_lazy(mut self, lazy: bool) -> Self {
        self.lazy = lazy;
        self
    }

    pub fn order(&self) -> usize {
        self.history.order()
    }

    pub fn history(&self) -> &ScheduleHistory {
        &self.history
    }

    pub fn into_history(self) -> ScheduleHistory {
        self.history
    }

    pub fn current(&self) -> &Schedule {
        self.history.latest().expect("initialized")
    }

    pub fn access(&self) -> &AccessParams {
        &self.access
    }

    /// Generates the schedule for the next slot. `lambda` must have one entry per link.
    pub fn step<R: Rng + ?Sized>(&mut self, lambda: &[f64], rng: &mut R) -> &Schedule {
        debug_assert_eq!(lambda.len(), self.graph.n_links());
        let hold = self.lazy && rng.gen::<bool>();
        if !hold {
            sample_decision_into(self.graph, self.access.probs(), &mut self.attempts, &mut self.decision, rng);
        }
        let g = self.graph;
        let kernel = self.kernel;
        let decision = &self.decision;
        let slot = self.history.advance_in_place();
        if !hold {
            match kernel {
                UpdateKernel::Glauber => glauber_in_place(g, slot.bits_mut(), decision, lambda, rng),
                UpdateKernel::MetropolisHastings => mh_in_place(g, slot.bits_mut(), decision, lambda, rng),
            }
        }
        debug_assert!(bits_feasible(g, slot.bits()));
        self.current()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GentlerStartParams {
    pub warmup_slots: u64,
    /// Spacing `M` between consecutive samples.
    pub spacing: u64,
    pub order: usize,
}

impl GentlerStartParams {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        if self.spacing == 0 {
            return Err(CsmaError::param("M", "spacing must be at least 1"));
        }
        if self.warmup_slots < self.spacing * self.order as u64 {
            return Err(CsmaError::param("warmup_slots", "must be at least M·T"));
        }
        Ok(())
    }

    /// Slots between the start of sampling and the first delayed update (`t₀ = M·T`).
    pub fn start_offset(&self) -> u64 {
        self.spacing * self.order as u64
    }
}

/// Warm-starts a delayed chain: runs the standard chain for `warmup_slots`,
/// then keeps its state every `M` slots until `T` samples exist. The samples
/// become the history for slots `t₀ − T .. t₀`, with `t₀` counted from the
/// start of sampling.
pub fn gentler_start_init<R: Rng + ?Sized>(
    g: &ConflictGraph,
    p: &AccessParams,
    lambda: &[f64],
    gp: &GentlerStartParams,
    rng: &mut R,
) -> Result<ScheduleHistory> {
    gp.validate()?;
    let mut chain = DelayedCsma::new(g, p.clone(), 1)?;
    for _ in 0..gp.warmup_slots {
        chain.step(lambda, rng);
    }
    let mut samples = vec![chain.current().clone()];
    while samples.len() < gp.order {
        for _ in 0..gp.spacing {
            chain.step(lambda, rng);
        }
        samples.push(chain.current().clone());
    }
    ScheduleHistory::from_schedules(samples, gp.warmup_slots + gp.start_offset())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Algorithm start: all-zero history.
    Cold,
    /// Warm standard chain, then `T` samples spaced `M` apart.
    Gentle { warmup_slots: u64, spacing: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerSpec {
    pub kernel: UpdateKernel,
    pub order: usize,
    pub lazy: bool,
    pub start: StartMode,
}

impl SchedulerSpec {
    pub fn glauber() -> Self {
        Self::delayed(1)
    }

    pub fn delayed(order: usize) -> Self {
        Self {
            kernel: UpdateKernel::Glauber,
            order,
            lazy: false,
            start: StartMode::Cold,
        }
    }
}

enum Phase {
    Standard { steps: u64, samples: Vec<Schedule> },
    Switching(ScheduleHistory),
    Delayed,
}

/// Slot scheduler covering cold and gentler starts. Feed it the fugacity of
/// each slot and it returns that slot's schedule.
pub struct SlotScheduler<'g> {
    graph: &'g ConflictGraph,
    spec: SchedulerSpec,
    chain: DelayedCsma<'g>,
    phase: Phase,
    slots: u64,
    delayed_from: Option<u64>,
}

impl<'g> SlotScheduler<'g> {
    pub fn new(graph: &'g ConflictGraph, access: AccessParams, spec: SchedulerSpec) -> Result<Self> {
        check_order(spec.order)?;
        let (order, phase, delayed_from) = match spec.start {
            StartMode::Cold => (spec.order, Phase::Delayed, Some(1)),
            StartMode::Gentle { warmup_slots, spacing } => {
                GentlerStartParams {
                    warmup_slots,
                    spacing,
                    order: spec.order,
                }
                .validate()?;
                (
                    1,
                    Phase::Standard {
                        steps: 0,
                        samples: Vec::with_capacity(spec.order),
                    },
                    Some(warmup_slots + spacing * spec.order as u64 + 1),
                )
            }
        };
        let chain = DelayedCsma::new(graph, access, order)?
            .with_kernel(spec.kernel)
            .with_lazy(spec.lazy);
        Ok(Self {
            graph,
            spec,
            chain,
            phase,
            slots: 0,
            delayed_from,
        })
    }

    pub fn spec(&self) -> &SchedulerSpec {
        &self.spec
    }

    /// First slot (1-based) generated by the delayed chain.
    pub fn delayed_start_slot(&self) -> Option<u64> {
        self.delayed_from
    }

    pub fn slots_elapsed(&self) -> u64 {
        self.slots
    }

    pub fn step<R: Rng + ?Sized>(&mut self, lambda: &[f64], rng: &mut R) -> &Schedule {
        self.slots += 1;
        if let Phase::Switching(_) = self.phase {
            let Phase::Switching(history) = std::mem::replace(&mut self.phase, Phase::Delayed) else {
                unreachable!()
            };
            self.chain = DelayedCsma::with_history(self.graph, self.chain.access().clone(), history)
                .expect("samples come from a feasible chain")
                .with_kernel(self.spec.kernel)
                .with_lazy(self.spec.lazy);
        }
        match &mut self.phase {
            Phase::Delayed => self.chain.step(lambda, rng),
            Phase::Standard { steps, samples } => {
                self.chain.step(lambda, rng);
                *steps += 1;
                let StartMode::Gentle { warmup_slots, spacing } = self.spec.start else {
                    unreachable!("standard phase only exists for gentle starts")
                };
                if *steps >= warmup_slots {
                    let k = *steps - warmup_slots;
                    if k % spacing == 0 && k / spacing < self.spec.order as u64 {
                        samples.push(self.chain.current().clone());
                    }
                    if k + 1 == spacing * self.spec.order as u64 {
                        let taken = std::mem::take(samples);
                        let next_slot = self.slots + 1;
                        let history = ScheduleHistory::from_schedules(taken, next_slot)
                            .expect("warmup covers the sampled window");
                        self.phase = Phase::Switching(history);
                    }
                }
                self.chain.current()
            }
            Phase::Switching(_) => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn within_3se(count: usize, n: usize, p: f64) -> bool {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        (count as f64 / n as f64 - p).abs() < 3.0 * se
    }

    #[test]
    fn decision_schedule_pair_graph() {
        let g = ConflictGraph::pair();
        let p = AccessParams::uniform(2, 0.25).unwrap();
        let mut r = rng(1);
        let n = 400_000;
        let (mut only0, mut none) = (0, 0);
        for _ in 0..n {
            let d = sample_decision_schedule(&g, &p, &mut r).unwrap();
            assert!(is_feasible(&g, &d).unwrap());
            match d.to_mask() {
                0 => none += 1,
                1 => only0 += 1,
                _ => {}
            }
        }
        assert!(within_3se(only0, n, 0.1875));
        assert!(within_3se(none, n, 0.625));
        assert_eq!(p.selection_probabilities(&g).unwrap(), vec![0.1875, 0.1875]);
    }

    #[test]
    fn decision_schedule_edge_cases() {
        let single = ConflictGraph::isolated(1);
        let p = AccessParams::uniform(1, 0.25).unwrap();
        let mut r = rng(2);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| sample_decision_schedule(&single, &p, &mut r).unwrap().is_active(0))
            .count();
        assert!(within_3se(hits, n, 0.25));

        let g = ConflictGraph::random(8, 0.4, 3);
        let zero = AccessParams::uniform(8, 0.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_decision_schedule(&g, &zero, &mut r).unwrap().count_active(), 0);
        }
        assert!(AccessParams::new(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn decision_inclusion_matches_selection_probability() {
        let g = ConflictGraph::random(7, 0.4, 11);
        let p = AccessParams::new(vec![0.1, 0.2, 0.3, 0.4, 0.25, 0.15, 0.35]).unwrap();
        let m = p.selection_probabilities(&g).unwrap();
        let mut r = rng(5);
        let n = 200_000;
        let mut counts = [0usize; 7];
        for _ in 0..n {
            let d = sample_decision_schedule(&g, &p, &mut r).unwrap();
            assert!(is_feasible(&g, &d).unwrap());
            for v in d.active_links() {
                counts[v] += 1;
            }
        }
        for v in 0..7 {
            assert!(within_3se(counts[v], n, m[v]), "link {v}");
        }
    }

    #[test]
    fn glauber_update_rules() {
        let single = ConflictGraph::isolated(1);
        let on = Schedule::from_bits(vec![true]);
        let d = Schedule::from_bits(vec![true]);
        let mut r = rng(9);
        let n = 100_000;
        let stays = (0..n)
            .filter(|_| glauber_update(&single, &on, &d, &[1.0], &mut r).unwrap().is_active(0))
            .count();
        assert!(within_3se(stays, n, 0.5));

        let g = ConflictGraph::pair();
        let base = Schedule::from_bits(vec![true, false]);
        let d1 = Schedule::from_bits(vec![false, true]);
        for _ in 0..1000 {
            assert_eq!(glauber_update(&g, &base, &d1, &[1.0, 1.0], &mut r).unwrap(), base);
        }
        let none = Schedule::empty(2);
        assert_eq!(glauber_update(&g, &base, &none, &[5.0, 5.0], &mut r).unwrap(), base);

        let bad = Schedule::from_bits(vec![true, true]);
        assert!(matches!(
            glauber_update(&g, &bad, &none, &[1.0, 1.0], &mut r),
            Err(CsmaError::ContractViolation(_))
        ));
    }

    #[test]
    fn delayed_step_uses_schedule_t_minus_order() {
        // T = 2, history [σ_a, σ_b]. With λ huge and access 1 on an isolated
        // pair of links, free links activate; a blocked link stays off.
        let g = ConflictGraph::pair();
        let p = AccessParams::new(vec![0.0, 1.0]).unwrap();
        let sigma_a = Schedule::from_bits(vec![true, false]);
        let sigma_b = Schedule::from_bits(vec![false, false]);
        let mut hist = ScheduleHistory::from_schedules(vec![sigma_a.clone(), sigma_b.clone()], 2).unwrap();
        let mut r = rng(4);
        // Link 1 is in D every slot; neighbor 0 is active in σ_a, so it must stay off.
        let next = delayed_csma_step(&g, &mut hist, &p, &[1e9, 1e9], &mut r).unwrap();
        assert_eq!(next, sigma_a);
        assert_eq!(hist.slot(), 3);
        assert_eq!(hist.base(), Some(&sigma_b));
        // Now base is σ_b (all off): link 1 activates.
        let next = delayed_csma_step(&g, &mut hist, &p, &[1e9, 1e9], &mut r).unwrap();
        assert_eq!(next, Schedule::from_bits(vec![false, true]));
    }

    #[test]
    fn delayed_step_zero_history_and_errors() {
        let g = ConflictGraph::path(3);
        let p = AccessParams::uniform(3, 0.0).unwrap();
        let mut hist = ScheduleHistory::zeros(3, 4).unwrap();
        let mut r = rng(0);
        for _ in 0..10 {
            let s = delayed_csma_step(&g, &mut hist, &p, &[1.0; 3], &mut r).unwrap();
            assert_eq!(s.count_active(), 0);
        }
        let mut partial = ScheduleHistory::empty(2).unwrap();
        partial.push(Schedule::empty(3));
        assert!(matches!(
            delayed_csma_step(&g, &mut partial, &p, &[1.0; 3], &mut r),
            Err(CsmaError::State(_))
        ));
        assert!(ScheduleHistory::zeros(3, 0).is_err());
    }

    #[test]
    fn chain_stays_feasible_for_every_variant() {
        let g = ConflictGraph::random(10, 0.3, 21);
        let p = AccessParams::uniform(10, 0.3).unwrap();
        let lambda = vec![2.0; 10];
        for kernel in [UpdateKernel::Glauber, UpdateKernel::MetropolisHastings] {
            for lazy in [false, true] {
                for order in [1, 3] {
                    let mut c = DelayedCsma::new(&g, p.clone(), order)
                        .unwrap()
                        .with_kernel(kernel)
                        .with_lazy(lazy);
                    let mut r = rng(order as u64);
                    for _ in 0..5_000 {
                        let s = c.step(&lambda, &mut r);
                        assert!(is_feasible(&g, s).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn fugacity_resolution() {
        let ll = FugacityPolicy::QueueDriven {
            weight: WeightKind::LogLog,
            epsilon: 0.5,
        };
        assert_eq!(resolve_fugacity(&ll, &[0], 0, 1), vec![1.0]);

        // log log(x + e) = 1  ⇔  x = e^e − e.
        let e = std::f64::consts::E;
        let q = (e.powf(e) - e).ceil() as usize;
        let w = resolve_fugacity(&ll, &[q], q, 1)[0].ln();
        assert!(w >= 1.0);
        assert!((WeightKind::LogLog.h(e.powf(e) - e) - 1.0).abs() < 1e-12);

        // ε = 0.5, N = 5, Q_v = 0, h(Q_max) = 2 ⇒ W_v = 0.05 · 2 = 0.1.
        let lin = FugacityPolicy::QueueDriven {
            weight: WeightKind::Linear,
            epsilon: 0.5,
        };
        let l = resolve_fugacity(&lin, &[0, 0, 0, 0, 2], 2, 5);
        assert!((l[0].ln() - 0.1).abs() < 1e-12);
        assert!((l[4].ln() - 2.0).abs() < 1e-12);

        let st = FugacityPolicy::Static(vec![2.0, 3.0]);
        assert_eq!(resolve_fugacity(&st, &[10, 10], 10, 2), vec![2.0, 3.0]);
        assert!(FugacityPolicy::Static(vec![0.0]).validate(1).is_err());
        assert!(FugacityPolicy::QueueDriven {
            weight: WeightKind::Log1p,
            epsilon: 1.0
        }
        .validate(1)
        .is_err());
    }

    #[test]
    fn gentle_start_history() {
        let g = ConflictGraph::path(3);
        let p = AccessParams::uniform(3, 0.25).unwrap();
        let gp = GentlerStartParams {
            warmup_slots: 100,
            spacing: 10,
            order: 5,
        };
        let h = gentler_start_init(&g, &p, &[1.0; 3], &gp, &mut rng(3)).unwrap();
        assert_eq!(h.order(), 5);
        assert_eq!(h.slot(), 150);
        assert_eq!(gp.start_offset(), 50);
        assert!(h.schedules().all(|s| is_feasible(&g, s).unwrap()));

        // M = 1 gives consecutive states of the warm chain.
        let gp1 = GentlerStartParams {
            warmup_slots: 50,
            spacing: 1,
            order: 4,
        };
        let h1 = gentler_start_init(&g, &p, &[1.0; 3], &gp1, &mut rng(8)).unwrap();
        let mut chain = DelayedCsma::new(&g, p.clone(), 1).unwrap();
        let mut r = rng(8);
        for _ in 0..50 {
            chain.step(&[1.0; 3], &mut r);
        }
        let mut expect = vec![chain.current().clone()];
        for _ in 0..3 {
            expect.push(chain.step(&[1.0; 3], &mut r).clone());
        }
        assert_eq!(h1.schedules().cloned().collect::<Vec<_>>(), expect);

        let bad = GentlerStartParams {
            warmup_slots: 5,
            spacing: 10,
            order: 5,
        };
        assert!(gentler_start_init(&g, &p, &[1.0; 3], &bad, &mut rng(0)).is_err());
    }

    #[test]
    fn slot_scheduler_gentle_switches_at_t0() {
        let g = ConflictGraph::path(3);
        let p = AccessParams::uniform(3, 0.25).unwrap();
        let spec = SchedulerSpec {
            kernel: UpdateKernel::Glauber,
            order: 5,
            lazy: false,
            start: StartMode::Gentle {
                warmup_slots: 100,
                spacing: 10,
            },
        };
        let mut s = SlotScheduler::new(&g, p, spec).unwrap();
        assert_eq!(s.delayed_start_slot(), Some(151));
        let mut r = rng(1);
        for _ in 0..400 {
            let sched = s.step(&[1.0; 3], &mut r);
            assert!(is_feasible(&g, sched).unwrap());
        }
        assert!(matches!(s.phase, Phase::Delayed));
        assert_eq!(s.chain.order(), 5);
    }

    #[test]
    fn mh_rules() {
        let g = ConflictGraph::pair();
        let mut r = rng(6);
        // λ = 1: feasible toggles always accepted.
        let off = Schedule::empty(2);
        let d0 = Schedule::from_bits(vec![true, false]);
        for _ in 0..100 {
            assert!(mh_update(&g, &off, &d0, &[1.0, 1.0], &mut r).unwrap().is_active(0));
            let on = Schedule::from_bits(vec![true, false]);
            assert!(!mh_update(&g, &on, &d0, &[1.0, 1.0], &mut r).unwrap().is_active(0));
        }
        // Blocked neighbor: proposal rejected.
        let base = Schedule::from_bits(vec![true, false]);
        let d1 = Schedule::from_bits(vec![false, true]);
        assert_eq!(mh_update(&g, &base, &d1, &[1.0, 1.0], &mut r).unwrap(), base);
    }
}
