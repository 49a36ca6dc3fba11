//! Deterministic discrete-event MANET simulator.
//!
//! Time is an integer microsecond clock. Events are totally ordered by
//! (time, kind order, sequence number), so a run is a pure function of its
//! configuration and seed. Connectivity is a unit-disk graph recomputed on
//! every move tick. Messages travel over shortest paths of at most `ttl`
//! hops, and a unicast is delivered only if such a path still exists when it
//! arrives.

pub mod deploy;
pub mod mobility;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baselines::PlanMsg;
use crate::catalog::{have, Catalog};
use crate::error::{Error, Result};
use crate::perception::{CompositionRequest, RequestFactory, RequestId};
use crate::service::{NodeId, ServiceId};

pub use deploy::{deploy_services, Deployment};
pub use mobility::{move_random_waypoint, Arena, Mover, SpeedBand};

pub type Micros = u64;

pub fn micros(seconds: f64) -> Micros {
    (seconds.max(0.0) * 1e6).round() as Micros
}

pub fn seconds(t: Micros) -> f64 {
    t as f64 / 1e6
}

/// The requester is always node 0; providers are 1..=providers.
pub const REQUESTER: NodeId = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub arena: Arena,
    /// Provider node count; defaults to the service density.
    pub providers: Option<usize>,
    pub radio_range: f64,
    pub mobility: SpeedBand,
    pub density: usize,
    pub seed: u64,
    /// Simulated seconds.
    pub horizon: f64,
    pub requests: usize,
    /// Seconds before the first request.
    pub warmup: f64,
    /// Per-request deadline, seconds after issue.
    pub deadline: f64,
    pub chain_length: usize,
    pub stages: usize,
    pub members_per_stage: usize,
    pub advert_period: f64,
    pub move_tick: f64,
    pub context_period: f64,
    pub sample_period: f64,
    pub ttl: u32,
    /// Hops a service advertisement travels.
    pub advert_ttl: u32,
    pub hop_latency: f64,
    pub bandwidth_bps: f64,
    pub event_log: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            arena: Arena { width: 350.0, height: 350.0 },
            providers: None,
            radio_range: 100.0,
            mobility: SpeedBand::SLOW,
            density: 20,
            seed: 1,
            horizon: 300.0,
            requests: 20,
            warmup: 5.0,
            deadline: 14.0,
            chain_length: 5,
            stages: 10,
            members_per_stage: 6,
            advert_period: 2.0,
            move_tick: 0.5,
            context_period: 5.0,
            sample_period: 0.1,
            ttl: 3,
            advert_ttl: 3,
            hop_latency: 0.010,
            bandwidth_bps: 1e6,
            event_log: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::InvalidConfig { key: key.into(), reason: reason.into() });
        if !(self.arena.width > 0.0 && self.arena.height > 0.0) {
            return bad("arena", "dimensions must be positive");
        }
        if self.radio_range <= 0.0 {
            return bad("radio_range", "must be positive");
        }
        if self.mobility.min < 0.0 || self.mobility.max < self.mobility.min {
            return bad("mobility", "speed band must satisfy 0 <= min <= max");
        }
        if self.density == 0 {
            return bad("density", "must be positive");
        }
        if self.providers == Some(0) {
            return bad("providers", "must be positive");
        }
        if self.chain_length == 0 || self.chain_length > self.stages {
            return bad("length", "chain length must lie in 1..=stages");
        }
        if self.requests == 0 {
            return bad("requests", "must be positive");
        }
        if self.deadline <= 0.0 {
            return bad("deadline", "must be positive");
        }
        if self.ttl == 0 || self.advert_ttl == 0 {
            return bad("ttl", "hop limits must be at least 1");
        }
        if self.horizon <= self.warmup {
            return bad("horizon", "must exceed the warmup");
        }
        for (key, v) in [
            ("advert_period", self.advert_period),
            ("move_tick", self.move_tick),
            ("context_period", self.context_period),
            ("sample_period", self.sample_period),
            ("bandwidth_bps", self.bandwidth_bps),
        ] {
            if v <= 0.0 {
                return bad(key, "must be positive");
            }
        }
        Ok(())
    }

    pub fn provider_count(&self) -> usize {
        self.providers.unwrap_or(self.density)
    }

    /// Seconds between request issues.
    pub fn request_interval(&self) -> f64 {
        (self.horizon - self.warmup) / self.requests as f64
    }
}

/// Independent random streams per purpose, so runs of different composers
/// with the same seed see the same deployment, mobility and requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Catalog = 1,
    Deployment = 2,
    Placement = 3,
    Mobility = 4,
    Requests = 5,
    Adverts = 6,
    Agent = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgKind {
    Advert,
    Discovery,
    Invoke,
    Response,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Advert { services: Vec<ServiceId> },
    Invoke { invocation: u64, service: ServiceId },
    Response { invocation: u64, service: ServiceId },
    Plan(PlanMsg),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetMessage {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MsgKind,
    pub size: usize,
    pub sent_at: Micros,
    pub hops: u32,
    /// Copy of a flooded message; floods get no drop notices.
    pub flooded: bool,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
enum EventPayload {
    MoveTick,
    Deliver(NetMessage),
    Dropped(NetMessage),
    Timer { node: NodeId, token: u64 },
    Deadline(RequestId),
    AdvertTick(NodeId),
    ContextTick,
    RequestIssue(usize),
    CycleTick,
    Sample,
}

impl EventPayload {
    /// Tie-break order among events at the same instant.
    fn order(&self) -> u8 {
        match self {
            EventPayload::MoveTick => 0,
            EventPayload::Deliver(_) | EventPayload::Dropped(_) => 1,
            EventPayload::Timer { .. } => 2,
            EventPayload::Deadline(_) => 3,
            EventPayload::AdvertTick(_) => 4,
            EventPayload::ContextTick => 5,
            EventPayload::RequestIssue(_) => 6,
            EventPayload::CycleTick => 7,
            EventPayload::Sample => 8,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            EventPayload::MoveTick => "move-tick",
            EventPayload::Deliver(_) => "message-delivery",
            EventPayload::Dropped(_) => "message-drop",
            EventPayload::Timer { .. } => "timer",
            EventPayload::Deadline(_) => "deadline",
            EventPayload::AdvertTick(_) => "advert-tick",
            EventPayload::ContextTick => "context-tick",
            EventPayload::RequestIssue(_) => "request-issue",
            EventPayload::CycleTick => "cycle-tick",
            EventPayload::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone)]
struct Event {
    time: Micros,
    order: u8,
    seq: u64,
    payload: EventPayload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl Event {
    fn key(&self) -> (Micros, u8, u64) {
        (self.time, self.order, self.seq)
    }
}

#[derive(Debug, Clone)]
pub struct SimNode {
    pub id: NodeId,
    pub mover: Mover,
    pub active: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NetStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub issued_at: f64,
    pub deadline: f64,
    /// (time, success) once finished.
    pub finished: Option<(f64, bool)>,
    /// Peak live-state bytes sampled while the request was open.
    pub mu_peak: usize,
}

impl RequestRecord {
    pub fn succeeded(&self) -> bool {
        matches!(self.finished, Some((_, true)))
    }

    pub fn composition_time(&self) -> Option<f64> {
        match self.finished {
            Some((t, true)) => Some(t - self.issued_at),
            _ => None,
        }
    }
}

/// Behavior plugged into the simulator: one composer drives every node's
/// composition logic (requester side and provider side).
pub trait Composer {
    fn name(&self) -> &'static str;

    fn wants_adverts(&self) -> bool {
        false
    }

    fn on_request(&mut self, world: &mut World, request: &CompositionRequest);

    fn on_message(&mut self, world: &mut World, msg: NetMessage);

    /// A unicast this composer sent could not be delivered.
    fn on_drop(&mut self, _world: &mut World, _msg: NetMessage) {}

    fn on_timer(&mut self, _world: &mut World, _node: NodeId, _token: u64) {}

    fn on_cycle(&mut self, _world: &mut World) {}

    fn on_context(&mut self, _world: &mut World, _key: &str, _value: f64) {}

    /// The deadline passed; the request is already recorded as failed.
    fn on_expire(&mut self, _world: &mut World, _request: RequestId) {}

    /// Structural bytes of live composition state.
    fn footprint(&self) -> usize;
}

pub struct World {
    cfg: SimConfig,
    now: Micros,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    nodes: Vec<SimNode>,
    adjacency: Vec<Vec<usize>>,
    catalog: Arc<Catalog>,
    deployment: Deployment,
    mobility_rng: ChaCha8Rng,
    schedule: Vec<CompositionRequest>,
    records: BTreeMap<RequestId, RequestRecord>,
    open: BTreeSet<RequestId>,
    next_msg: u64,
    pub stats: NetStats,
    log: Option<Vec<String>>,
}

impl World {
    pub fn new(cfg: SimConfig, catalog: Arc<Catalog>) -> Result<Self> {
        cfg.validate()?;
        let mut placement = stream_rng(cfg.seed, Stream::Placement);
        let providers: Vec<NodeId> = (1..=cfg.provider_count() as NodeId).collect();
        let mut deploy_rng = stream_rng(cfg.seed, Stream::Deployment);
        let deployment = deploy_services(&catalog, &providers, cfg.density, &mut deploy_rng)?;
        let nodes: Vec<SimNode> = (0..=providers.len() as NodeId)
            .map(|id| SimNode { id, mover: Mover::new(&cfg.arena, &cfg.mobility, &mut placement), active: true })
            .collect();

        let mut req_rng = stream_rng(cfg.seed, Stream::Requests);
        let mut factory = RequestFactory::new();
        let interval = cfg.request_interval();
        let schedule = (0..cfg.requests)
            .map(|i| {
                let start = req_rng.gen_range(0..=cfg.stages - cfg.chain_length);
                let issued = cfg.warmup + i as f64 * interval;
                factory
                    .encode([have(start + cfg.chain_length)].into(), [have(start)].into(), issued, cfg.deadline)
                    .expect("goal set is non-empty")
            })
            .collect();

        let mut world = World {
            now: 0,
            queue: BinaryHeap::new(),
            seq: 0,
            adjacency: Vec::new(),
            nodes,
            catalog,
            deployment,
            mobility_rng: stream_rng(cfg.seed, Stream::Mobility),
            schedule,
            records: BTreeMap::new(),
            open: BTreeSet::new(),
            next_msg: 0,
            stats: NetStats::default(),
            log: cfg.event_log.then(Vec::new),
            cfg,
        };
        world.recompute_topology();
        Ok(world)
    }

    fn push(&mut self, time: Micros, payload: EventPayload) {
        let ev = Event { time, order: payload.order(), seq: self.seq, payload };
        self.seq += 1;
        self.queue.push(Reverse(ev));
    }

    fn bootstrap(&mut self, wants_adverts: bool) {
        if self.cfg.mobility.max > 0.0 {
            self.push(micros(self.cfg.move_tick), EventPayload::MoveTick);
        }
        if wants_adverts {
            let mut rng = stream_rng(self.cfg.seed, Stream::Adverts);
            for node in 1..self.nodes.len() as NodeId {
                let phase = rng.gen_range(0.0..self.cfg.advert_period);
                if !self.deployment.hosted(node).is_empty() {
                    self.push(micros(phase), EventPayload::AdvertTick(node));
                }
            }
        }
        self.push(0, EventPayload::ContextTick);
        for i in 0..self.schedule.len() {
            let t = micros(self.schedule[i].issued_at);
            self.push(t, EventPayload::RequestIssue(i));
        }
        self.push(0, EventPayload::Sample);
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn now_secs(&self) -> f64 {
        seconds(self.now)
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn nodes(&self) -> &[SimNode] {
        &self.nodes
    }

    pub fn schedule(&self) -> &[CompositionRequest] {
        &self.schedule
    }

    pub fn records(&self) -> impl Iterator<Item = &RequestRecord> {
        self.records.values()
    }

    pub fn is_open(&self, request: RequestId) -> bool {
        self.open.contains(&request)
    }

    pub fn open_requests(&self) -> usize {
        self.open.len()
    }

    pub fn event_log(&self) -> Option<&[String]> {
        self.log.as_deref()
    }

    /// Takes a node (and every service it hosts) out of the network.
    pub fn depart(&mut self, node: NodeId) {
        if let Some(n) = self.nodes.get_mut(node as usize) {
            n.active = false;
        }
        self.recompute_topology();
    }

    pub fn host_active(&self, node: NodeId) -> bool {
        self.nodes.get(node as usize).is_some_and(|n| n.active)
    }

    fn recompute_topology(&mut self) {
        let n = self.nodes.len();
        let range = self.cfg.radio_range;
        let mut adj = vec![Vec::new(); n];
        for a in 0..n {
            if !self.nodes[a].active {
                continue;
            }
            for b in (a + 1)..n {
                if self.nodes[b].active && mobility::distance(self.nodes[a].mover.position, self.nodes[b].mover.position) <= range {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        self.adjacency = adj;
    }

    /// Hop counts from `src` to every node within `ttl` hops.
    pub fn hops_from(&self, src: NodeId, ttl: u32) -> Vec<Option<u32>> {
        let n = self.nodes.len();
        let mut dist = vec![None; n];
        if !self.host_active(src) {
            return dist;
        }
        dist[src as usize] = Some(0);
        let mut queue = VecDeque::from([src as usize]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes have a distance");
            if d == ttl {
                continue;
            }
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn route_hops(&self, src: NodeId, dst: NodeId) -> Option<u32> {
        if src == dst {
            return self.host_active(src).then_some(0);
        }
        self.hops_from(src, self.cfg.ttl)[dst as usize]
    }

    fn hop_latency(&self, size: usize) -> Micros {
        micros(self.cfg.hop_latency + size as f64 * 8.0 / self.cfg.bandwidth_bps)
    }

    fn message(&mut self, src: NodeId, dst: NodeId, kind: MsgKind, size: usize, payload: Payload) -> NetMessage {
        let id = self.next_msg;
        self.next_msg += 1;
        NetMessage { id, src, dst, kind, size, sent_at: self.now, hops: 0, flooded: false, payload }
    }

    /// Sends a unicast over the current shortest path. Returns false (and
    /// counts a drop) when `dst` is not within `ttl` hops.
    pub fn send(&mut self, src: NodeId, dst: NodeId, kind: MsgKind, size: usize, payload: Payload) -> bool {
        self.stats.sent += 1;
        let mut msg = self.message(src, dst, kind, size, payload);
        match self.route_hops(src, dst) {
            Some(h) => {
                msg.hops = h;
                let at = self.now + h as Micros * self.hop_latency(size);
                self.push(at, EventPayload::Deliver(msg));
                true
            }
            None => {
                self.stats.dropped += 1;
                false
            }
        }
    }

    /// Flooded message of which only the copy reaching `dst` matters.
    /// Returns whether `dst` lies within `ttl` hops.
    pub fn broadcast_to(&mut self, src: NodeId, dst: NodeId, ttl: u32, kind: MsgKind, size: usize, payload: Payload) -> bool {
        self.stats.sent += 1;
        let mut msg = self.message(src, dst, kind, size, payload);
        msg.flooded = true;
        match self.hops_from(src, ttl.min(self.cfg.ttl))[dst as usize] {
            Some(h) => {
                msg.hops = h;
                let at = self.now + h as Micros * self.hop_latency(size);
                self.push(at, EventPayload::Deliver(msg));
                true
            }
            None => false,
        }
    }

    /// Floods to every node within `ttl` hops; returns how many copies were sent.
    pub fn flood(&mut self, src: NodeId, ttl: u32, kind: MsgKind, size: usize, payload: Payload) -> usize {
        let reach = self.hops_from(src, ttl.min(self.cfg.ttl));
        let lat = self.hop_latency(size);
        let mut copies = 0;
        for (v, h) in reach.into_iter().enumerate() {
            let Some(h) = h else { continue };
            if v as NodeId == src {
                continue;
            }
            self.stats.sent += 1;
            let mut msg = self.message(src, v as NodeId, kind, size, payload.clone());
            msg.hops = h;
            msg.flooded = true;
            self.push(self.now + h as Micros * lat, EventPayload::Deliver(msg));
            copies += 1;
        }
        copies
    }

    pub fn set_timer(&mut self, node: NodeId, delay: f64, token: u64) {
        let at = self.now + micros(delay);
        self.push(at, EventPayload::Timer { node, token });
    }

    pub fn schedule_cycle(&mut self, delay: f64) {
        let at = self.now + micros(delay);
        self.push(at, EventPayload::CycleTick);
    }

    /// Marks a request finished. Later calls for the same request are ignored.
    pub fn finish_request(&mut self, request: RequestId, success: bool) {
        if self.open.remove(&request) {
            let t = self.now_secs();
            if let Some(r) = self.records.get_mut(&request) {
                r.finished = Some((t, success));
            }
        }
    }

    fn log_event(&mut self, ev: &Event) {
        let Some(log) = self.log.as_mut() else { return };
        let detail = match &ev.payload {
            EventPayload::Deliver(m) | EventPayload::Dropped(m) => {
                json!({"msg": m.id, "src": m.src, "dst": m.dst, "kind": m.kind, "hops": m.hops})
            }
            EventPayload::Timer { node, token } => json!({"node": node, "token": token}),
            EventPayload::Deadline(r) => json!({"request": r.0}),
            EventPayload::AdvertTick(n) => json!({"node": n}),
            EventPayload::RequestIssue(i) => json!({"request": i}),
            _ => json!({}),
        };
        let line = json!({"t": ev.time, "seq": ev.seq, "kind": ev.payload.label(), "detail": detail});
        log.push(line.to_string());
    }
}

/// Per-run results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub composer: String,
    pub seed: u64,
    pub requests: Vec<RequestRecord>,
    pub net: NetStats,
}

impl RunSummary {
    pub fn issued(&self) -> usize {
        self.requests.len()
    }

    pub fn failed(&self) -> usize {
        self.requests.iter().filter(|r| !r.succeeded()).count()
    }
}

pub struct Simulator<C: Composer> {
    pub world: World,
    pub composer: C,
    started: bool,
}

impl<C: Composer> Simulator<C> {
    pub fn new(cfg: SimConfig, catalog: Arc<Catalog>, composer: C) -> Result<Self> {
        let mut world = World::new(cfg, catalog)?;
        world.bootstrap(composer.wants_adverts());
        Ok(Simulator { world, composer, started: true })
    }

    /// Applies the next event. Returns false once the queue is exhausted or
    /// the next event lies beyond the horizon.
    pub fn step(&mut self) -> bool {
        debug_assert!(self.started);
        let horizon = micros(self.world.cfg.horizon);
        let Some(Reverse(ev)) = self.world.queue.pop() else { return false };
        if ev.time > horizon {
            self.world.queue.push(Reverse(ev));
            return false;
        }
        debug_assert!(ev.time >= self.world.now, "clock went backwards");
        self.world.now = ev.time;
        self.world.stats.events += 1;
        self.world.log_event(&ev);
        let w = &mut self.world;
        match ev.payload {
            EventPayload::MoveTick => {
                let dt = w.cfg.move_tick;
                let (arena, band) = (w.cfg.arena, w.cfg.mobility);
                for node in w.nodes.iter_mut() {
                    move_random_waypoint(&mut node.mover, dt, &arena, &band, &mut w.mobility_rng);
                }
                w.recompute_topology();
                w.push(w.now + micros(dt), EventPayload::MoveTick);
            }
            EventPayload::Deliver(msg) => {
                let ok = w.host_active(msg.dst)
                    && match w.route_hops(msg.src, msg.dst) {
                        Some(h) => !msg.flooded || h <= msg.hops.max(w.cfg.ttl),
                        None => false,
                    };
                if ok {
                    w.stats.delivered += 1;
                    self.composer.on_message(w, msg);
                } else {
                    w.stats.dropped += 1;
                    if !msg.flooded {
                        w.push(w.now, EventPayload::Dropped(msg));
                    }
                }
            }
            EventPayload::Dropped(msg) => self.composer.on_drop(w, msg),
            EventPayload::Timer { node, token } => self.composer.on_timer(w, node, token),
            EventPayload::Deadline(r) => {
                if w.open.contains(&r) {
                    w.finish_request(r, false);
                    self.composer.on_expire(w, r);
                }
            }
            EventPayload::AdvertTick(node) => {
                let services = w.deployment.hosted(node).to_vec();
                if w.host_active(node) && !services.is_empty() {
                    let size = 32 + services.iter().map(|s| s.as_str().len()).sum::<usize>();
                    w.broadcast_to(node, REQUESTER, w.cfg.advert_ttl, MsgKind::Advert, size, Payload::Advert { services });
                }
                w.push(w.now + micros(w.cfg.advert_period), EventPayload::AdvertTick(node));
            }
            EventPayload::ContextTick => {
                let (x, y) = w.nodes[REQUESTER as usize].mover.position;
                let (fx, fy) = (x / w.cfg.arena.width, y / w.cfg.arena.height);
                self.composer.on_context(w, "x", fx);
                self.composer.on_context(w, "y", fy);
                w.push(w.now + micros(w.cfg.context_period), EventPayload::ContextTick);
            }
            EventPayload::RequestIssue(i) => {
                let req = w.schedule[i].clone();
                w.records.insert(
                    req.id,
                    RequestRecord { id: req.id, issued_at: req.issued_at, deadline: req.deadline, finished: None, mu_peak: 0 },
                );
                w.open.insert(req.id);
                w.push(micros(req.deadline), EventPayload::Deadline(req.id));
                self.composer.on_request(w, &req);
            }
            EventPayload::CycleTick => self.composer.on_cycle(w),
            EventPayload::Sample => {
                if !w.open.is_empty() {
                    let bytes = self.composer.footprint();
                    for id in w.open.iter() {
                        if let Some(r) = w.records.get_mut(id) {
                            r.mu_peak = r.mu_peak.max(bytes);
                        }
                    }
                }
                w.push(w.now + micros(w.cfg.sample_period), EventPayload::Sample);
            }
        }
        true
    }

    pub fn run(mut self) -> (RunSummary, World, C) {
        while self.step() {}
        let now = self.world.now_secs();
        for id in std::mem::take(&mut self.world.open) {
            if let Some(r) = self.world.records.get_mut(&id) {
                r.finished = Some((now, false));
            }
        }
        let summary = RunSummary {
            composer: self.composer.name().to_string(),
            seed: self.world.cfg.seed,
            requests: self.world.records.values().cloned().collect(),
            net: self.world.stats.clone(),
        };
        (summary, self.world, self.composer)
    }
}
