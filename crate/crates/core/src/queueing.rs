//! Per-link FIFO queues fed by Bernoulli arrivals.
//!
//! Each slot a link's queue gains its arrival first and is then served once if
//! the link is active, so `Q_v(t) = [Q_v(t−1) + A_v(t) − σ_v(t)]^+` holds
//! exactly and a packet can leave in the slot it arrived (delay 0).

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use crate::error::{CsmaError, Result};
use crate::graph::Schedule;
use crate::scheduler::WeightKind;

/// Per-link Bernoulli arrival rates `η_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalParams {
    rates: Vec<f64>,
}

impl ArrivalParams {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some((v, &x)) = rates.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(CsmaError::param(format!("rates[{v}]"), format!("{x} is outside [0, 1]")));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

pub fn step_arrivals<R: Rng + ?Sized>(params: &ArrivalParams, rng: &mut R) -> Vec<bool> {
    let mut out = vec![false; params.len()];
    step_arrivals_into(params, rng, &mut out);
    out
}

pub fn step_arrivals_into<R: Rng + ?Sized>(params: &ArrivalParams, rng: &mut R, out: &mut [bool]) {
    for (a, &eta) in out.iter_mut().zip(&params.rates) {
        *a = rng.gen::<f64>() < eta;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServedPacket {
    pub link: usize,
    pub arrival_slot: u64,
    pub delay: u64,
}

/// Queues for every link with arrival timestamps and cumulative counters.
#[derive(Debug, Clone, Default)]
pub struct LinkQueueSet {
    fifo: Vec<VecDeque<u64>>,
    arrivals: Vec<u64>,
    departures: Vec<u64>,
    // Σ σ_v(k), counted whether or not the queue had a packet.
    potential_service: Vec<u64>,
}

impl LinkQueueSet {
    pub fn new(n_links: usize) -> Self {
        Self {
            fifo: vec![VecDeque::new(); n_links],
            arrivals: vec![0; n_links],
            departures: vec![0; n_links],
            potential_service: vec![0; n_links],
        }
    }

    pub fn n_links(&self) -> usize {
        self.fifo.len()
    }

    pub fn len(&self, v: usize) -> usize {
        self.fifo[v].len()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.fifo.iter().map(VecDeque::len).collect()
    }

    pub fn lengths_into(&self, out: &mut [usize]) {
        for (o, q) in out.iter_mut().zip(&self.fifo) {
            *o = q.len();
        }
    }

    pub fn max_len(&self) -> usize {
        self.fifo.iter().map(VecDeque::len).max().unwrap_or(0)
    }

    pub fn total_len(&self) -> usize {
        self.fifo.iter().map(VecDeque::len).sum()
    }

    pub fn cumulative_arrivals(&self, v: usize) -> u64 {
        self.arrivals[v]
    }

    pub fn cumulative_departures(&self, v: usize) -> u64 {
        self.departures[v]
    }

    pub fn cumulative_potential_service(&self, v: usize) -> u64 {
        self.potential_service[v]
    }

    /// `A_t − S_t` with `S_t` the cumulative schedule activity of the link.
    pub fn net_input(&self, v: usize) -> i64 {
        self.arrivals[v] as i64 - self.potential_service[v] as i64
    }

    /// Enqueues slot-`t` arrivals.
    pub fn arrive(&mut self, arrivals: &[bool], slot: u64) {
        for (v, &a) in arrivals.iter().enumerate() {
            if a {
                self.fifo[v].push_back(slot);
                self.arrivals[v] += 1;
            }
        }
    }

    /// Serves every active link with a nonempty queue, reporting each departure.
    pub fn serve(&mut self, schedule: &Schedule, slot: u64, mut on_served: impl FnMut(ServedPacket)) {
        for (v, &active) in schedule.bits().iter().enumerate() {
            if !active {
                continue;
            }
            self.potential_service[v] += 1;
            if let Some(arrival_slot) = self.fifo[v].pop_front() {
                self.departures[v] += 1;
                on_served(ServedPacket {
                    link: v,
                    arrival_slot,
                    delay: slot - arrival_slot,
                });
            }
        }
    }

    /// Arrivals then service for one slot; returns the served packets.
    pub fn update(&mut self, arrivals: &[bool], schedule: &Schedule, slot: u64) -> Vec<ServedPacket> {
        self.arrive(arrivals, slot);
        let mut served = Vec::new();
        self.serve(schedule, slot, |p| served.push(p));
        served
    }

    /// Arrivals equal departures plus backlog on every link.
    pub fn is_conserved(&self) -> bool {
        (0..self.n_links()).all(|v| self.arrivals[v] == self.departures[v] + self.fifo[v].len() as u64)
    }
}

pub fn update_queue(q: &mut LinkQueueSet, arrivals: &[bool], schedule: &Schedule, slot: u64) -> Vec<ServedPacket> {
    q.update(arrivals, schedule, slot)
}

/// `(Σ_v h(Q_v)²)^{1/2}`.
pub fn stability_metric(queues: &[usize], weight: WeightKind) -> f64 {
    queues
        .iter()
        .map(|&q| {
            let h = weight.h(q as f64);
            h * h
        })
        .sum::<f64>()
        .sqrt()
}

/// Cumulative net input `A_t − S_t` of one link from per-slot arrival and activity traces.
pub fn net_input_accumulate(arrivals: &[bool], activity: &[bool]) -> Result<Vec<i64>> {
    if arrivals.len() != activity.len() {
        return Err(CsmaError::DimensionMismatch {
            expected: arrivals.len(),
            got: activity.len(),
        });
    }
    let mut acc = 0i64;
    Ok(arrivals
        .iter()
        .zip(activity)
        .map(|(&a, &s)| {
            acc += a as i64 - s as i64;
            acc
        })
        .collect())
}

/// One row of the optional per-slot log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotLogRecord {
    pub slot: u64,
    pub link: usize,
    pub queue: usize,
    pub arrival: bool,
    pub sigma: bool,
    pub served_delay: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arrivals_extremes_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ArrivalParams::new(vec![0.0, 1.0, 0.1]).unwrap();
        let n = 1_000_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let a = step_arrivals(&p, &mut rng);
            assert!(!a[0]);
            assert!(a[1]);
            hits += a[2] as usize;
        }
        let mean = hits as f64 / n as f64;
        assert!((mean - 0.1).abs() < 3.0 * (0.09f64 / n as f64).sqrt());
        assert!(ArrivalParams::new(vec![1.2]).is_err());
    }

    #[test]
    fn queue_update_examples() {
        let on = Schedule::from_bits(vec![true]);
        let off = Schedule::from_bits(vec![false]);

        let mut q = LinkQueueSet::new(1);
        assert!(q.update(&[false], &on, 1).is_empty());
        assert_eq!(q.len(0), 0);

        let served = q.update(&[true], &on, 2);
        assert_eq!(served.len(), 1);
        assert_eq!(served[0].delay, 0);
        assert_eq!(q.len(0), 0);

        for t in 3..6 {
            q.update(&[true], &off, t);
        }
        assert_eq!(q.len(0), 3);
        q.update(&[true], &off, 6);
        assert_eq!(q.len(0), 4);
    }

    #[test]
    fn delay_is_departure_minus_arrival() {
        let mut q = LinkQueueSet::new(1);
        q.arrive(&[true], 5);
        let mut delays = Vec::new();
        q.serve(&Schedule::from_bits(vec![true]), 9, |p| delays.push(p.delay));
        assert_eq!(delays, vec![4]);
    }

    #[test]
    fn stability_metric_examples() {
        assert_eq!(stability_metric(&[0, 0, 0], WeightKind::LogLog), 0.0);
        assert_eq!(stability_metric(&[2, 0], WeightKind::Linear), 2.0);
        assert_eq!(stability_metric(&[3, 4], WeightKind::Linear), 5.0);
    }

    #[test]
    fn net_input_series() {
        assert_eq!(net_input_accumulate(&[false; 4], &[false; 4]).unwrap(), vec![0; 4]);
        assert_eq!(
            net_input_accumulate(&[false; 4], &[true; 4]).unwrap(),
            vec![-1, -2, -3, -4]
        );
        let mut q = LinkQueueSet::new(1);
        for t in 1..=4 {
            q.update(&[false], &Schedule::from_bits(vec![true]), t);
        }
        assert_eq!(q.net_input(0), -4);
    }

    proptest! {
        #[test]
        fn recursion_and_conservation(
            steps in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()), 1..300)
        ) {
            let mut q = LinkQueueSet::new(2);
            let mut expected = [0i64; 2];
            let mut last_arrival = [0u64; 2];
            for (t, &(a0, a1, s0, s1)) in steps.iter().enumerate() {
                let t = t as u64 + 1;
                let sched = Schedule::from_bits(vec![s0, s1]);
                let served = q.update(&[a0, a1], &sched, t);
                for (v, (a, s)) in [(a0, s0), (a1, s1)].into_iter().enumerate() {
                    expected[v] = (expected[v] + a as i64 - s as i64).max(0);
                    prop_assert_eq!(q.len(v) as i64, expected[v]);
                }
                for p in served {
                    prop_assert!(p.arrival_slot <= t);
                    // FIFO: departures leave in arrival order.
                    prop_assert!(p.arrival_slot >= last_arrival[p.link]);
                    last_arrival[p.link] = p.arrival_slot;
                }
                prop_assert!(q.is_conserved());
            }
        }
    }
}
