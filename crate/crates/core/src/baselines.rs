//! Reference composers: decentralized backward-chaining planners.
//!
//! Planning starts at the requester, which floods a discovery query for the
//! unresolved goal premises. Providers whose postconditions cover one answer
//! with a plan fragment; after a collection window the origin picks the best
//! fragment and delegates to its host, which becomes the next origin. An
//! origin that finds nothing hands control back to the previous one, which
//! tries its next offer or discovers again. When nothing remains unresolved
//! the plan is executed forward, host to host.
//!
//! The GoCoMo-like variant repairs a broken execution hop by re-discovering
//! the failed fragment from the current holder. The CoopC-like variant adds a
//! commit round per fragment and freezes the plan: any execution failure
//! fails the request.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::footprint;
use crate::perception::{CompositionRequest, RequestId};
use crate::service::{NodeId, Premise, PremiseSet, ServiceId};
use crate::sim::{Composer, MsgKind, NetMessage, Payload, World, REQUESTER};

pub const QUERY_BYTES: usize = 96;
pub const OFFER_BYTES: usize = 128;
pub const CONTROL_BYTES: usize = 64;
pub const EXECUTE_BYTES: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackwardPlanFragment {
    pub goal: Premise,
    pub resolver: ServiceId,
    pub host: NodeId,
    pub remaining: PremiseSet,
    pub hops: u32,
}

impl BackwardPlanFragment {
    pub fn bytes(&self) -> usize {
        footprint::FRAGMENT_OVERHEAD
            + footprint::premise_bytes(&self.goal)
            + self.resolver.as_str().len()
            + footprint::premise_set_bytes(&self.remaining)
    }

    /// Preference order: fewer remaining preconditions, then fewer hops,
    /// then resolver id.
    fn rank(&self) -> (usize, u32, &str) {
        (self.remaining.len(), self.hops, self.resolver.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanMsg {
    Query { request: RequestId, round: u64, unresolved: PremiseSet, known: PremiseSet },
    Offer { request: RequestId, round: u64, fragment: BackwardPlanFragment },
    Commit { request: RequestId, round: u64 },
    CommitAck { request: RequestId, round: u64 },
    Delegate { request: RequestId, round: u64 },
    Backtrack { request: RequestId, round: u64 },
    PlanReady { request: RequestId },
    Execute { request: RequestId, step: usize, epoch: u64 },
    Result { request: RequestId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    GoCoMo,
    CoopC,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    /// Seconds an origin collects offers before choosing.
    pub window: f64,
    /// Confirm each chosen fragment with its host before delegating.
    pub commit: bool,
    /// Re-discover failed execution hops instead of failing.
    pub adapt: bool,
    /// Seconds before a round with no usable offer is retried.
    pub fragment_timeout: f64,
    /// Seconds between re-sends of an undeliverable plan or result.
    pub resend: f64,
    pub ttl: u32,
}

impl BaselineParams {
    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::GoCoMo => BaselineParams { window: 0.6, commit: false, adapt: true, fragment_timeout: 2.0, resend: 0.5, ttl: 3 },
            Variant::CoopC => BaselineParams { window: 1.0, commit: true, adapt: false, fragment_timeout: 2.0, resend: 0.5, ttl: 3 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Planning,
    Committing,
    Delegating,
    AwaitPlan,
    Executing,
    Repairing { holder: NodeId, step: usize },
}

/// Planning state before a fragment was accepted.
#[derive(Debug, Clone)]
struct ChoicePoint {
    origin: NodeId,
    unresolved: PremiseSet,
    alternatives: Vec<BackwardPlanFragment>,
}

#[derive(Debug, Clone)]
struct Session {
    request: CompositionRequest,
    stage: Stage,
    origin: NodeId,
    unresolved: PremiseSet,
    round: u64,
    offers: Vec<BackwardPlanFragment>,
    /// Every fragment received so far.
    table: Vec<BackwardPlanFragment>,
    /// Goal-first while planning; reversed into execution order once ready.
    plan: Vec<BackwardPlanFragment>,
    choices: Vec<ChoicePoint>,
    /// Resolvers whose branch found nothing in the current search.
    dead_ends: BTreeSet<ServiceId>,
    seen: usize,
    excluded: BTreeSet<ServiceId>,
    epoch: u64,
    /// Node holding the partial result during execution.
    holder: NodeId,
}

impl Session {
    fn bytes(&self) -> usize {
        footprint::REQUEST_OVERHEAD
            + footprint::premise_set_bytes(&self.request.goals)
            + footprint::premise_set_bytes(&self.request.inputs)
            + footprint::premise_set_bytes(&self.unresolved)
            + self.seen * footprint::SEEN_ENTRY_BYTES
            + self.table.iter().map(BackwardPlanFragment::bytes).sum::<usize>()
            + self.plan.iter().map(BackwardPlanFragment::bytes).sum::<usize>()
            + self
                .choices
                .iter()
                .map(|c| {
                    footprint::premise_set_bytes(&c.unresolved)
                        + c.alternatives.iter().map(BackwardPlanFragment::bytes).sum::<usize>()
                })
                .sum::<usize>()
    }

    /// Premises available at execution step `step`.
    fn known_before(&self, step: usize) -> PremiseSet {
        let mut known = self.request.inputs.clone();
        for f in &self.plan[..step] {
            known.insert(f.goal.clone());
        }
        known
    }
}

#[derive(Debug, Clone, Copy)]
enum Timer {
    Window { round: u64 },
    Retry { round: u64 },
    ResendPlan,
    Executed { step: usize, epoch: u64 },
    ResendResult { epoch: u64 },
}

pub struct BackwardChainer {
    variant: Variant,
    params: BaselineParams,
    catalog: Arc<Catalog>,
    sessions: BTreeMap<RequestId, Session>,
    timers: BTreeMap<u64, (RequestId, Timer)>,
    next_token: u64,
}

impl BackwardChainer {
    pub fn new(variant: Variant, catalog: Arc<Catalog>) -> Self {
        Self::with_params(variant, BaselineParams::for_variant(variant), catalog)
    }

    pub fn with_params(variant: Variant, params: BaselineParams, catalog: Arc<Catalog>) -> Self {
        BackwardChainer { variant, params, catalog, sessions: BTreeMap::new(), timers: BTreeMap::new(), next_token: 0 }
    }

    pub fn gocomo(catalog: Arc<Catalog>) -> Self {
        Self::new(Variant::GoCoMo, catalog)
    }

    pub fn coopc(catalog: Arc<Catalog>) -> Self {
        Self::new(Variant::CoopC, catalog)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &BaselineParams {
        &self.params
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions.len()
    }

    fn timer(&mut self, world: &mut World, node: NodeId, delay: f64, request: RequestId, timer: Timer) {
        let token = self.next_token;
        self.next_token += 1;
        self.timers.insert(token, (request, timer));
        world.set_timer(node, delay, token);
    }

    fn finish(&mut self, world: &mut World, request: RequestId, success: bool) {
        self.sessions.remove(&request);
        world.finish_request(request, success);
    }

    /// Fragments a node can offer for the unresolved premises.
    fn fragments_at(
        &self,
        world: &World,
        node: NodeId,
        hops: u32,
        unresolved: &PremiseSet,
        known: &PremiseSet,
        excluded: &BTreeSet<ServiceId>,
    ) -> Vec<BackwardPlanFragment> {
        if !world.host_active(node) {
            return Vec::new();
        }
        let mut out = Vec::new();
        for sid in world.deployment().hosted(node) {
            if excluded.contains(sid) {
                continue;
            }
            let Some(cs) = self.catalog.service(sid) else { continue };
            let Some(goal) = unresolved.iter().find(|p| cs.postc.contains(*p)) else { continue };
            let mut remaining: PremiseSet = unresolved.difference(&cs.postc).cloned().collect();
            remaining.extend(cs.prec.difference(known).cloned());
            out.push(BackwardPlanFragment { goal: goal.clone(), resolver: sid.clone(), host: node, remaining, hops });
        }
        out
    }

    fn start_round(&mut self, world: &mut World, id: RequestId) {
        let ttl = self.params.ttl;
        let window = self.params.window;
        let Some(s) = self.sessions.get_mut(&id) else { return };
        s.round += 1;
        s.offers.clear();
        let (origin, round) = (s.origin, s.round);
        let (unresolved, known, excluded) = match s.stage {
            Stage::Repairing { step, .. } => {
                let known = s.known_before(step);
                let goal: PremiseSet = [s.plan[step].goal.clone()].into();
                (goal, known, s.excluded.clone())
            }
            _ => (s.unresolved.clone(), s.request.inputs.clone(), s.excluded.clone()),
        };
        let size = QUERY_BYTES + footprint::premise_set_bytes(&unresolved) + footprint::premise_set_bytes(&known);
        let payload = Payload::Plan(PlanMsg::Query { request: id, round, unresolved: unresolved.clone(), known: known.clone() });
        let copies = world.flood(origin, ttl, MsgKind::Discovery, size, payload);
        let local = self.fragments_at(world, origin, 0, &unresolved, &known, &excluded);
        let s = self.sessions.get_mut(&id).expect("session checked above");
        s.seen += copies;
        s.table.extend(local.iter().cloned());
        s.offers.extend(local);
        self.timer(world, origin, window, id, Timer::Window { round });
    }

    fn retry_later(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get(&id) else { return };
        let (origin, round) = (s.origin, s.round);
        self.timer(world, origin, self.params.fragment_timeout, id, Timer::Retry { round });
    }

    /// Picks the best pending offer, or schedules a retry when none is left.
    fn choose(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        if matches!(s.stage, Stage::Repairing { .. }) {
            s.offers.retain(|f| f.remaining.is_empty());
        } else {
            let dead = &s.dead_ends;
            s.offers.retain(|f| !dead.contains(&f.resolver));
        }
        s.offers.sort_by(|a, b| a.rank().cmp(&b.rank()));
        if s.offers.is_empty() {
            if s.stage == Stage::Planning {
                if !s.choices.is_empty() {
                    return self.backtrack(world, id);
                }
                s.dead_ends.clear();
            }
            return self.retry_later(world, id);
        }
        let best = s.offers[0].clone();
        let (origin, round) = (s.origin, s.round);
        if let Stage::Repairing { holder, step } = s.stage {
            s.plan[step] = best;
            s.stage = Stage::Executing;
            s.epoch += 1;
            let epoch = s.epoch;
            debug_assert_eq!(holder, origin);
            return self.forward(world, id, holder, step, epoch);
        }
        if best.host == origin {
            return self.accept(world, id);
        }
        let (stage, msg) = if self.params.commit {
            (Stage::Committing, PlanMsg::Commit { request: id, round })
        } else {
            (Stage::Delegating, PlanMsg::Delegate { request: id, round })
        };
        s.stage = stage;
        if !world.send(origin, best.host, MsgKind::Discovery, CONTROL_BYTES, Payload::Plan(msg)) {
            self.reject_best(world, id);
        }
    }

    /// The best offer's host could not be reached; fall back to the next.
    fn reject_best(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        if !s.offers.is_empty() {
            s.offers.remove(0);
        }
        s.stage = Stage::Planning;
        self.choose(world, id);
    }

    /// Drops the newest fragment and returns control to the origin that
    /// chose it. Stays put when that origin is out of reach.
    fn backtrack(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        let Some(point) = s.choices.last() else { return };
        let (from, to, round) = (s.origin, point.origin, s.round + 1);
        let msg = Payload::Plan(PlanMsg::Backtrack { request: id, round });
        if from != to && !world.send(from, to, MsgKind::Discovery, CONTROL_BYTES, msg) {
            return self.retry_later(world, id);
        }
        let point = s.choices.pop().expect("checked above");
        if let Some(f) = s.plan.pop() {
            s.dead_ends.insert(f.resolver);
        }
        s.round = round;
        s.origin = point.origin;
        s.unresolved = point.unresolved;
        s.offers = point.alternatives;
        if from == to {
            self.resume(world, id);
        }
    }

    /// Continues at a choice point: the next stored offer, or a fresh round.
    fn resume(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get(&id) else { return };
        if s.offers.is_empty() {
            self.start_round(world, id);
        } else {
            self.choose(world, id);
        }
    }

    /// Takes the best offer into the plan and moves the origin to its host.
    fn accept(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        let best = s.offers.remove(0);
        let alternatives = std::mem::take(&mut s.offers);
        s.choices.push(ChoicePoint { origin: s.origin, unresolved: s.unresolved.clone(), alternatives });
        s.unresolved = best.remaining.clone();
        s.origin = best.host;
        s.plan.push(best);
        s.offers.clear();
        if s.unresolved.is_empty() {
            s.stage = Stage::AwaitPlan;
            self.send_plan(world, id);
        } else {
            s.stage = Stage::Planning;
            self.start_round(world, id);
        }
    }

    fn send_plan(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get(&id) else { return };
        let origin = s.origin;
        let size = CONTROL_BYTES + s.plan.iter().map(BackwardPlanFragment::bytes).sum::<usize>();
        if origin == REQUESTER {
            return self.execute(world, id);
        }
        if !world.send(origin, REQUESTER, MsgKind::Discovery, size, Payload::Plan(PlanMsg::PlanReady { request: id })) {
            self.timer(world, origin, self.params.resend, id, Timer::ResendPlan);
        }
    }

    fn execute(&mut self, world: &mut World, id: RequestId) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        if s.stage != Stage::AwaitPlan {
            return;
        }
        s.plan.reverse();
        s.stage = Stage::Executing;
        s.epoch += 1;
        let epoch = s.epoch;
        self.forward(world, id, REQUESTER, 0, epoch);
    }

    /// Hands execution from `holder` to the host of `step`, or returns the
    /// result once every step has run.
    fn forward(&mut self, world: &mut World, id: RequestId, holder: NodeId, step: usize, epoch: u64) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        s.holder = holder;
        if step == s.plan.len() {
            if holder == REQUESTER {
                return self.finish(world, id, true);
            }
            if !world.send(holder, REQUESTER, MsgKind::Response, EXECUTE_BYTES, Payload::Plan(PlanMsg::Result { request: id })) {
                self.result_lost(world, id, holder, epoch);
            }
            return;
        }
        let host = s.plan[step].host;
        let sent = world.send(holder, host, MsgKind::Invoke, EXECUTE_BYTES, Payload::Plan(PlanMsg::Execute { request: id, step, epoch }));
        if !sent {
            self.hop_failed(world, id, holder, step);
        }
    }

    fn hop_failed(&mut self, world: &mut World, id: RequestId, holder: NodeId, step: usize) {
        if !self.params.adapt {
            return self.finish(world, id, false);
        }
        let Some(s) = self.sessions.get_mut(&id) else { return };
        s.excluded.insert(s.plan[step].resolver.clone());
        s.stage = Stage::Repairing { holder, step };
        s.origin = holder;
        self.start_round(world, id);
    }

    fn result_lost(&mut self, world: &mut World, id: RequestId, holder: NodeId, epoch: u64) {
        if !self.params.adapt {
            return self.finish(world, id, false);
        }
        self.timer(world, holder, self.params.resend, id, Timer::ResendResult { epoch });
    }

    fn on_plan_msg(&mut self, world: &mut World, msg: &NetMessage, plan: PlanMsg) {
        match plan {
            PlanMsg::Query { request, round, unresolved, known } => {
                let Some(s) = self.sessions.get(&request) else { return };
                let excluded = s.excluded.clone();
                for fragment in self.fragments_at(world, msg.dst, msg.hops, &unresolved, &known, &excluded) {
                    let size = OFFER_BYTES + fragment.bytes();
                    world.send(msg.dst, msg.src, MsgKind::Discovery, size, Payload::Plan(PlanMsg::Offer { request, round, fragment }));
                }
            }
            PlanMsg::Offer { request, round, fragment } => {
                let Some(s) = self.sessions.get_mut(&request) else { return };
                if s.round == round && matches!(s.stage, Stage::Planning | Stage::Repairing { .. }) {
                    s.table.push(fragment.clone());
                    s.offers.push(fragment);
                }
            }
            PlanMsg::Commit { request, round } => {
                world.send(
                    msg.dst,
                    msg.src,
                    MsgKind::Discovery,
                    CONTROL_BYTES,
                    Payload::Plan(PlanMsg::CommitAck { request, round }),
                );
            }
            PlanMsg::CommitAck { request, round } => {
                let Some(s) = self.sessions.get_mut(&request) else { return };
                if s.round != round || s.stage != Stage::Committing {
                    return;
                }
                s.stage = Stage::Delegating;
                let (origin, host) = (s.origin, s.offers[0].host);
                let sent = world.send(
                    origin,
                    host,
                    MsgKind::Discovery,
                    CONTROL_BYTES,
                    Payload::Plan(PlanMsg::Delegate { request, round }),
                );
                if !sent {
                    self.reject_best(world, request);
                }
            }
            PlanMsg::Delegate { request, round } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.round == round && s.stage == Stage::Delegating {
                    self.accept(world, request);
                }
            }
            PlanMsg::Backtrack { request, round } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.round == round && s.stage == Stage::Planning {
                    self.resume(world, request);
                }
            }
            PlanMsg::PlanReady { request } => self.execute(world, request),
            PlanMsg::Execute { request, step, epoch } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.epoch != epoch || s.stage != Stage::Executing {
                    return;
                }
                let latency = self.catalog.service(&s.plan[step].resolver).map_or(0.0, |c| c.qos.latency_ms / 1000.0);
                self.timer(world, msg.dst, latency, request, Timer::Executed { step, epoch });
            }
            PlanMsg::Result { request } => self.finish(world, request, true),
        }
    }
}

impl Composer for BackwardChainer {
    fn name(&self) -> &'static str {
        match self.variant {
            Variant::GoCoMo => "gocomo",
            Variant::CoopC => "coopc",
        }
    }

    fn on_request(&mut self, world: &mut World, request: &CompositionRequest) {
        let unresolved: PremiseSet = request.goals.difference(&request.inputs).cloned().collect();
        let session = Session {
            request: request.clone(),
            stage: Stage::Planning,
            origin: REQUESTER,
            unresolved,
            round: 0,
            offers: Vec::new(),
            table: Vec::new(),
            plan: Vec::new(),
            choices: Vec::new(),
            dead_ends: BTreeSet::new(),
            seen: 0,
            excluded: BTreeSet::new(),
            epoch: 0,
            holder: REQUESTER,
        };
        let empty = session.unresolved.is_empty();
        self.sessions.insert(request.id, session);
        if empty {
            self.finish(world, request.id, true);
        } else {
            self.start_round(world, request.id);
        }
    }

    fn on_message(&mut self, world: &mut World, msg: NetMessage) {
        if let Payload::Plan(plan) = msg.payload.clone() {
            self.on_plan_msg(world, &msg, plan);
        }
    }

    fn on_drop(&mut self, world: &mut World, msg: NetMessage) {
        let Payload::Plan(plan) = msg.payload else { return };
        match plan {
            PlanMsg::Commit { request, round } | PlanMsg::Delegate { request, round } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.round == round && matches!(s.stage, Stage::Committing | Stage::Delegating) {
                    self.reject_best(world, request);
                }
            }
            PlanMsg::CommitAck { request, round } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.round == round && s.stage == Stage::Committing {
                    self.reject_best(world, request);
                }
            }
            PlanMsg::PlanReady { request } => {
                if self.sessions.contains_key(&request) {
                    self.timer(world, msg.src, self.params.resend, request, Timer::ResendPlan);
                }
            }
            PlanMsg::Execute { request, step, epoch } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.epoch == epoch && s.stage == Stage::Executing {
                    self.hop_failed(world, request, msg.src, step);
                }
            }
            PlanMsg::Result { request } => {
                let Some(s) = self.sessions.get(&request) else { return };
                let epoch = s.epoch;
                self.result_lost(world, request, msg.src, epoch);
            }
            PlanMsg::Backtrack { request, round } => {
                let Some(s) = self.sessions.get(&request) else { return };
                if s.round == round && s.stage == Stage::Planning {
                    self.retry_later(world, request);
                }
            }
            PlanMsg::Query { .. } | PlanMsg::Offer { .. } => {}
        }
    }

    fn on_timer(&mut self, world: &mut World, node: NodeId, token: u64) {
        let Some((id, timer)) = self.timers.remove(&token) else { return };
        let Some(s) = self.sessions.get(&id) else { return };
        match timer {
            Timer::Window { round } => {
                if s.round == round && matches!(s.stage, Stage::Planning | Stage::Repairing { .. }) {
                    self.choose(world, id);
                }
            }
            Timer::Retry { round } => {
                if s.round == round {
                    self.start_round(world, id);
                }
            }
            Timer::ResendPlan => {
                if s.stage == Stage::AwaitPlan {
                    self.send_plan(world, id);
                }
            }
            Timer::Executed { step, epoch } => {
                if s.epoch == epoch && s.stage == Stage::Executing && world.host_active(node) {
                    self.forward(world, id, node, step + 1, epoch);
                }
            }
            Timer::ResendResult { epoch } => {
                if s.epoch == epoch {
                    let len = s.plan.len();
                    self.forward(world, id, node, len, epoch);
                }
            }
        }
    }

    fn on_expire(&mut self, _world: &mut World, request: RequestId) {
        self.sessions.remove(&request);
    }

    fn footprint(&self) -> usize {
        self.sessions.values().map(Session::bytes).sum()
    }
}
