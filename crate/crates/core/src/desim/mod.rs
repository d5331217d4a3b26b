//! Event-driven simulation of the multi-class M/M/N/{K_j}+M queue.
//!
//! Arrivals form one Poisson stream; each arrival is assigned a class, a
//! service requirement and a patience at arrival time. A waiting class-`j`
//! customer may start service only while more than `K_j` servers are idle.
//! After every event the dispatcher repeatedly admits the longest-waiting
//! customer of the highest-priority eligible class.
//!
//! Every replication draws from four independent ChaCha streams (interarrival,
//! class, service, patience) keyed by `(base seed, replication)`, so runs that
//! differ only in rates reuse the same underlying uniforms.

mod trace;

pub use trace::{verify_threshold_trace, EventKind, Trace, TraceHeader, TraceRecord};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::erlang::SystemParams;
use crate::error::{Error, Result};
use crate::population::{sample_profile_with_mode, AttributeModel, ClassMix, Group, GroupingMode};
use crate::thresholds::ThresholdPolicy;

/// How arrivals are split into classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalMix {
    /// Class drawn from fixed proportions.
    Classes(ClassMix),
    /// Class derived from a sampled attribute profile (six groups).
    Attributes { model: AttributeModel, mode: GroupingMode },
}

impl ArrivalMix {
    pub fn classes(&self) -> usize {
        match self {
            ArrivalMix::Classes(m) => m.len(),
            ArrivalMix::Attributes { .. } => Group::ALL.len(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            ArrivalMix::Classes(m) => m.labels.clone(),
            ArrivalMix::Attributes { .. } => Group::ALL.iter().map(|g| g.label().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Aggregate rates; `params.lambda` drives the arrival stream.
    pub params: SystemParams,
    pub mix: ArrivalMix,
    pub beds: u32,
    pub policy: ThresholdPolicy,
    pub horizon_days: f64,
    pub warmup_days: f64,
    /// Customers already in service at time 0.
    pub initial_occupancy: u32,
    /// Per-class `T_j` used for the long-wait counts; empty means 1 day for all.
    pub wait_horizons: Vec<f64>,
}

impl ScenarioConfig {
    /// 360 days from empty, no warmup, attribute-sampled classes, all `K = 0`.
    pub fn shelter(params: SystemParams, beds: u32) -> ScenarioConfig {
        ScenarioConfig {
            params,
            mix: ArrivalMix::Attributes { model: AttributeModel::default(), mode: GroupingMode::default() },
            beds,
            policy: ThresholdPolicy::zeros(Group::ALL.len()),
            horizon_days: 360.0,
            warmup_days: 0.0,
            initial_occupancy: 0,
            wait_horizons: Vec::new(),
        }
    }

    pub fn with_policy(mut self, policy: ThresholdPolicy) -> ScenarioConfig {
        self.policy = policy;
        self
    }

    pub fn classes(&self) -> usize {
        self.mix.classes()
    }

    pub fn wait_horizon(&self, class: usize) -> f64 {
        self.wait_horizons.get(class).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.beds == 0 {
            return Err(Error::config("beds must be >= 1"));
        }
        if !(self.horizon_days.is_finite() && self.warmup_days >= 0.0 && self.horizon_days > self.warmup_days) {
            return Err(Error::config(format!(
                "need horizon_days > warmup_days >= 0, got {} and {}",
                self.horizon_days, self.warmup_days
            )));
        }
        if self.initial_occupancy > self.beds {
            return Err(Error::config(format!(
                "initial occupancy {} exceeds {} beds",
                self.initial_occupancy, self.beds
            )));
        }
        if self.policy.classes() != self.classes() {
            return Err(Error::config(format!(
                "policy lists {} thresholds for {} classes",
                self.policy.classes(),
                self.classes()
            )));
        }
        if let ArrivalMix::Attributes { model, .. } = &self.mix {
            model.validate()?;
        }
        if !self.wait_horizons.is_empty() && self.wait_horizons.len() != self.classes() {
            return Err(Error::config("wait_horizons must list one horizon per class"));
        }
        if self.wait_horizons.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("wait horizons must be > 0"));
        }
        Ok(())
    }
}

/// Replication key: the same `base` with different `replication` gives independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub base: u64,
    pub replication: u64,
}

impl StreamSeed {
    pub fn new(base: u64, replication: u64) -> StreamSeed {
        StreamSeed { base, replication }
    }

    fn stream(&self, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.replication.wrapping_mul(4).wrapping_add(purpose));
        rng
    }
}

impl From<u64> for StreamSeed {
    fn from(base: u64) -> Self {
        StreamSeed { base, replication: 0 }
    }
}

/// Counts for one class (or the aggregate) over arrivals in `(warmup, horizon]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub arrivals: u64,
    /// Customers that started service.
    pub served: u64,
    pub abandoned: u64,
    /// Still queued when the horizon was reached.
    pub waiting_at_horizon: u64,
    /// Queue time summed over all arrivals; abandoners count their time to
    /// abandonment and the censored customers their time up to the horizon.
    pub total_wait: f64,
    /// Arrivals whose wait reached the class horizon `T_j`.
    pub long_waits: u64,
}

impl ClassMetrics {
    pub fn abandonment_proportion(&self) -> f64 {
        ratio(self.abandoned as f64, self.arrivals)
    }

    pub fn mean_wait(&self) -> f64 {
        ratio(self.total_wait, self.arrivals)
    }

    pub fn long_wait_fraction(&self) -> f64 {
        ratio(self.long_waits as f64, self.arrivals)
    }

    fn absorb(&mut self, other: &ClassMetrics) {
        self.arrivals += other.arrivals;
        self.served += other.served;
        self.abandoned += other.abandoned;
        self.waiting_at_horizon += other.waiting_at_horizon;
        self.total_wait += other.total_wait;
        self.long_waits += other.long_waits;
    }
}

fn ratio(num: f64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReplicationMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub aggregate: ClassMetrics,
    /// Time-average of `busy / N` over `(warmup, horizon]`.
    pub mean_utilization: f64,
    /// Abandonments from every class except the lowest-priority one.
    pub high_risk_abandoned: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Completion = 0,
    Patience = 1,
    Arrival = 2,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    kind: Kind,
    subject: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then((other.kind as u8).cmp(&(self.kind as u8)))
            .then(other.subject.cmp(&self.subject))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum State {
    Waiting,
    InService,
    Done,
}

#[derive(Clone, Debug)]
struct Customer {
    class: usize,
    arrival: f64,
    service: f64,
    counted: bool,
    state: State,
}

struct Streams {
    interarrival: ChaCha8Rng,
    class: ChaCha8Rng,
    service: ChaCha8Rng,
    patience: ChaCha8Rng,
}

impl Streams {
    fn new(seed: StreamSeed) -> Streams {
        Streams {
            interarrival: seed.stream(0),
            class: seed.stream(1),
            service: seed.stream(2),
            patience: seed.stream(3),
        }
    }
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(Exp1)
}

fn pick_class<R: Rng>(mix: &ArrivalMix, rng: &mut R) -> usize {
    match mix {
        ArrivalMix::Classes(m) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (j, p) in m.proportions.iter().enumerate() {
                acc += p;
                if u < acc {
                    return j;
                }
            }
            // rounding left u above the last partial sum
            m.proportions.iter().rposition(|p| *p > 0.0).unwrap_or(0)
        }
        ArrivalMix::Attributes { model, mode } => sample_profile_with_mode(model, *mode, rng).group.index(),
    }
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    thresholds: &'a [u32],
    streams: Streams,
    events: BinaryHeap<Event>,
    customers: Vec<Customer>,
    queues: Vec<VecDeque<usize>>,
    waiting: Vec<u64>,
    busy: u32,
    now: f64,
    busy_area: f64,
    metrics: Vec<ClassMetrics>,
    trace: Option<Vec<TraceRecord>>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, seed: StreamSeed, tracing: bool) -> Sim<'a> {
        let classes = cfg.classes();
        Sim {
            cfg,
            thresholds: cfg.policy.thresholds(),
            streams: Streams::new(seed),
            events: BinaryHeap::new(),
            customers: Vec::new(),
            queues: vec![VecDeque::new(); classes],
            waiting: vec![0; classes],
            busy: 0,
            now: 0.0,
            busy_area: 0.0,
            metrics: vec![ClassMetrics::default(); classes],
            trace: tracing.then(Vec::new),
        }
    }

    fn idle(&self) -> u32 {
        self.cfg.beds - self.busy
    }

    fn record(&mut self, kind: EventKind, class: Option<usize>) {
        if self.trace.is_none() {
            return;
        }
        let rec = TraceRecord {
            time: self.now,
            kind,
            class,
            idle_before: self.idle(),
            queue_lengths: self.waiting.clone(),
        };
        self.trace.as_mut().unwrap().push(rec);
    }

    /// Advance the clock, accumulating busy-server time inside the window.
    fn advance(&mut self, t: f64) {
        let lo = self.now.max(self.cfg.warmup_days);
        let hi = t.min(self.cfg.horizon_days);
        if hi > lo {
            self.busy_area += self.busy as f64 * (hi - lo);
        }
        self.now = t;
    }

    fn start_service(&mut self, id: usize) {
        self.busy += 1;
        let c = &mut self.customers[id];
        c.state = State::InService;
        let done = self.now + c.service;
        self.events.push(Event { time: done, kind: Kind::Completion, subject: id });
    }

    fn schedule_arrival(&mut self) {
        let gap = exp1(&mut self.streams.interarrival) / self.cfg.params.lambda;
        let id = self.customers.len();
        let class = pick_class(&self.cfg.mix, &mut self.streams.class);
        let service = exp1(&mut self.streams.service) / self.cfg.params.mu;
        let patience_draw = exp1(&mut self.streams.patience);
        let arrival = self.now + gap;
        self.customers.push(Customer {
            class,
            arrival,
            service,
            counted: arrival > self.cfg.warmup_days,
            state: State::Waiting,
        });
        self.events.push(Event { time: arrival, kind: Kind::Arrival, subject: id });
        if self.cfg.params.theta > 0.0 {
            let deadline = arrival + patience_draw / self.cfg.params.theta;
            self.events.push(Event { time: deadline, kind: Kind::Patience, subject: id });
        }
    }

    fn finish_wait(&mut self, id: usize) {
        let c = &self.customers[id];
        if !c.counted {
            return;
        }
        let wait = self.now - c.arrival;
        let horizon = self.cfg.wait_horizon(c.class);
        let m = &mut self.metrics[c.class];
        m.total_wait += wait;
        if wait >= horizon {
            m.long_waits += 1;
        }
    }

    fn dispatch(&mut self) {
        loop {
            let idle = self.idle();
            let Some(j) = (0..self.queues.len()).find(|&j| self.waiting[j] > 0 && idle > self.thresholds[j]) else {
                return;
            };
            let id = loop {
                let id = self.queues[j].pop_front().expect("waiting count out of sync with queue");
                if self.customers[id].state == State::Waiting {
                    break id;
                }
            };
            self.record(EventKind::Admit, Some(j));
            self.waiting[j] -= 1;
            self.finish_wait(id);
            if self.customers[id].counted {
                self.metrics[j].served += 1;
            }
            self.start_service(id);
        }
    }

    fn run(mut self) -> (RawReplicationMetrics, Option<Vec<TraceRecord>>) {
        for _ in 0..self.cfg.initial_occupancy {
            let service = exp1(&mut self.streams.service) / self.cfg.params.mu;
            let id = self.customers.len();
            self.customers.push(Customer { class: 0, arrival: 0.0, service, counted: false, state: State::Waiting });
            self.start_service(id);
        }
        self.schedule_arrival();

        while let Some(ev) = self.events.peek().copied() {
            if ev.time > self.cfg.horizon_days {
                break;
            }
            self.events.pop();
            self.advance(ev.time);
            match ev.kind {
                Kind::Arrival => {
                    let class = self.customers[ev.subject].class;
                    self.record(EventKind::Arrival, Some(class));
                    if self.customers[ev.subject].counted {
                        self.metrics[class].arrivals += 1;
                    }
                    self.queues[class].push_back(ev.subject);
                    self.waiting[class] += 1;
                    self.schedule_arrival();
                }
                Kind::Completion => {
                    let class = self.customers[ev.subject].class;
                    let shown = self.customers[ev.subject].counted.then_some(class);
                    self.record(EventKind::Complete, shown);
                    self.customers[ev.subject].state = State::Done;
                    self.busy -= 1;
                }
                Kind::Patience => {
                    if self.customers[ev.subject].state != State::Waiting {
                        continue;
                    }
                    let class = self.customers[ev.subject].class;
                    self.record(EventKind::Abandon, Some(class));
                    self.customers[ev.subject].state = State::Done;
                    self.waiting[class] -= 1;
                    self.finish_wait(ev.subject);
                    if self.customers[ev.subject].counted {
                        self.metrics[class].abandoned += 1;
                    }
                }
            }
            self.dispatch();
        }

        let horizon = self.cfg.horizon_days;
        self.advance(horizon);
        self.record(EventKind::End, None);
        let still_waiting: Vec<usize> = self
            .queues
            .iter()
            .flatten()
            .copied()
            .filter(|&id| self.customers[id].state == State::Waiting)
            .collect();
        for id in still_waiting {
            self.finish_wait(id);
            let c = &self.customers[id];
            if c.counted {
                self.metrics[c.class].waiting_at_horizon += 1;
            }
        }

        let mut aggregate = ClassMetrics::default();
        for m in &self.metrics {
            aggregate.absorb(m);
        }
        let classes = self.metrics.len();
        let high_risk_abandoned = self.metrics[..classes - 1].iter().map(|m| m.abandoned).sum();
        let window = horizon - self.cfg.warmup_days;
        let metrics = RawReplicationMetrics {
            per_class: self.metrics,
            aggregate,
            mean_utilization: self.busy_area / (window * self.cfg.beds as f64),
            high_risk_abandoned,
        };
        (metrics, self.trace)
    }
}

/// Run one replication.
pub fn run_replication(config: &ScenarioConfig, seed: impl Into<StreamSeed>) -> Result<RawReplicationMetrics> {
    config.validate()?;
    Ok(Sim::new(config, seed.into(), false).run().0)
}

/// Run one replication and keep the full event trace.
pub fn run_replication_traced(
    config: &ScenarioConfig,
    seed: impl Into<StreamSeed>,
) -> Result<(RawReplicationMetrics, Trace)> {
    config.validate()?;
    let (metrics, records) = Sim::new(config, seed.into(), true).run();
    let trace = Trace {
        header: TraceHeader {
            beds: config.beds,
            initial_busy: config.initial_occupancy,
            thresholds: config.policy.thresholds().to_vec(),
        },
        records: records.unwrap_or_default(),
    };
    Ok((metrics, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(lambda: f64, mu: f64, theta: f64, beds: u32, horizon: f64) -> ScenarioConfig {
        ScenarioConfig {
            params: SystemParams { lambda, mu, theta },
            mix: ArrivalMix::Classes(ClassMix::single(lambda)),
            beds,
            policy: ThresholdPolicy::zeros(1),
            horizon_days: horizon,
            warmup_days: 0.0,
            initial_occupancy: 0,
            wait_horizons: Vec::new(),
        }
    }

    #[test]
    fn event_order_breaks_ties_by_kind() {
        let mut heap = BinaryHeap::new();
        heap.push(Event { time: 1.0, kind: Kind::Arrival, subject: 0 });
        heap.push(Event { time: 1.0, kind: Kind::Patience, subject: 5 });
        heap.push(Event { time: 1.0, kind: Kind::Completion, subject: 9 });
        heap.push(Event { time: 0.5, kind: Kind::Arrival, subject: 7 });
        let order: Vec<Kind> = std::iter::from_fn(|| heap.pop()).map(|e| e.kind).collect();
        assert_eq!(order, vec![Kind::Arrival, Kind::Completion, Kind::Patience, Kind::Arrival]);
    }

    #[test]
    fn conservation_holds() {
        let cfg = single(3.0, 1.0, 0.7, 2, 500.0);
        let m = run_replication(&cfg, 11).unwrap();
        let a = &m.aggregate;
        assert!(a.arrivals > 1000);
        assert_eq!(a.arrivals, a.served + a.abandoned + a.waiting_at_horizon);
        assert!(m.mean_utilization > 0.0 && m.mean_utilization <= 1.0);
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = ScenarioConfig::shelter(SystemParams { lambda: 4.44, mu: 0.016, theta: 0.5 }, 200);
        assert_eq!(run_replication(&cfg, 5).unwrap(), run_replication(&cfg, 5).unwrap());
        assert_ne!(run_replication(&cfg, 5).unwrap(), run_replication(&cfg, StreamSeed::new(5, 1)).unwrap());
    }

    #[test]
    fn initial_occupancy_fills_beds() {
        let mut cfg = single(1e-6, 0.01, 1.0, 10, 1.0);
        cfg.initial_occupancy = 10;
        let m = run_replication(&cfg, 1).unwrap();
        assert!(m.mean_utilization > 0.95);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = single(1.0, 1.0, 1.0, 2, 10.0);
        cfg.warmup_days = 10.0;
        assert!(run_replication(&cfg, 0).is_err());
        let mut cfg = single(1.0, 1.0, 1.0, 2, 10.0);
        cfg.policy = ThresholdPolicy::zeros(2);
        assert!(run_replication(&cfg, 0).is_err());
    }
}
