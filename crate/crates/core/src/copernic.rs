//! The cognitive agent wired into the simulator. The requester node runs the
//! agent's cycle; providers execute invocations and answer.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::agent::{Action, Agent, AgentConfig, CycleRecord, InvocationResult};
use crate::catalog::Catalog;
use crate::error::Result;
use crate::perception::{CompositionRequest, RequestId, SensoryEvent, Stimulus};
use crate::sdm::Outcome;
use crate::service::{NodeId, QoSVector, ServiceId};
use crate::sim::{Composer, MsgKind, NetMessage, Payload, World, REQUESTER};

pub const INVOKE_BYTES: usize = 256;
pub const RESPONSE_BYTES: usize = 256;

#[derive(Debug, Clone)]
enum Timer {
    /// Requester gives up on an invocation.
    Timeout(u64),
    /// Host finished executing and answers.
    Reply { invocation: u64, service: ServiceId, to: NodeId },
}

pub struct CopernicComposer {
    agent: Agent,
    inbox: Vec<SensoryEvent>,
    /// Invocation id to send time.
    calls: BTreeMap<u64, f64>,
    timers: BTreeMap<u64, Timer>,
    next_token: u64,
    cycle_pending: bool,
    /// Seconds between cognitive cycles while a request is open.
    pub cycle_period: f64,
    /// Seconds before an unanswered invocation counts as timed out.
    pub invoke_timeout: f64,
    trace: Option<Vec<CycleRecord>>,
}

impl CopernicComposer {
    pub fn new(catalog: Arc<Catalog>, config: AgentConfig) -> Result<Self> {
        Ok(CopernicComposer {
            agent: Agent::new(catalog, config)?,
            inbox: Vec::new(),
            calls: BTreeMap::new(),
            timers: BTreeMap::new(),
            next_token: 0,
            cycle_pending: false,
            cycle_period: 0.1,
            invoke_timeout: 1.0,
            trace: None,
        })
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn trace(&self) -> Option<&[CycleRecord]> {
        self.trace.as_deref()
    }

    fn timer(&mut self, world: &mut World, node: NodeId, delay: f64, timer: Timer) {
        let token = self.next_token;
        self.next_token += 1;
        self.timers.insert(token, timer);
        world.set_timer(node, delay, token);
    }

    fn wake(&mut self, world: &mut World, delay: f64) {
        if !self.cycle_pending {
            self.cycle_pending = true;
            world.schedule_cycle(delay);
        }
    }

    fn settle(&mut self, world: &mut World, invocation: u64, outcome: Outcome, observed: Option<QoSVector>) {
        if self.calls.remove(&invocation).is_none() {
            return;
        }
        let t = world.now_secs();
        // the agent may already have dropped the request; the episode is still recorded
        let _ = self.agent.apply_outcome(&InvocationResult { invocation, outcome, observed }, t);
        self.flush(world);
    }

    fn flush(&mut self, world: &mut World) {
        for f in self.agent.take_finished() {
            world.finish_request(f.request, f.success);
        }
    }

    fn invoke(&mut self, world: &mut World, invocation: u64, service: ServiceId) {
        let t = world.now_secs();
        let host = world.deployment().host_of(&service);
        self.calls.insert(invocation, t);
        let sent = host.is_some_and(|h| {
            world.send(REQUESTER, h, MsgKind::Invoke, INVOKE_BYTES, Payload::Invoke { invocation, service: service.clone() })
        });
        if sent {
            self.timer(world, REQUESTER, self.invoke_timeout, Timer::Timeout(invocation));
        } else {
            self.settle(world, invocation, Outcome::Failure, None);
        }
    }

    fn prune_inbox(&mut self, now: f64) {
        let horizon = self.agent.config().advert_staleness;
        self.inbox
            .retain(|e| !matches!(e.stimulus, Stimulus::ServiceAdvert { .. }) || now - e.timestamp <= horizon);
    }
}

impl Composer for CopernicComposer {
    fn name(&self) -> &'static str {
        "copernic"
    }

    fn wants_adverts(&self) -> bool {
        true
    }

    fn on_request(&mut self, world: &mut World, request: &CompositionRequest) {
        self.inbox.push(SensoryEvent::new(world.now_secs(), Stimulus::UserRequest(request.clone())));
        self.wake(world, 0.0);
    }

    fn on_message(&mut self, world: &mut World, msg: NetMessage) {
        let now = world.now_secs();
        match msg.payload {
            Payload::Advert { services } => {
                for service in services {
                    self.inbox.push(SensoryEvent::new(now, Stimulus::ServiceAdvert { service }));
                }
                if !self.agent.has_open_requests() {
                    self.prune_inbox(now);
                }
            }
            Payload::Invoke { invocation, service } => {
                let latency = world.catalog().service(&service).map_or(0.0, |s| s.qos.latency_ms / 1000.0);
                self.timer(world, msg.dst, latency, Timer::Reply { invocation, service, to: msg.src });
            }
            Payload::Response { invocation, service } => {
                let Some(&sent_at) = self.calls.get(&invocation) else { return };
                let observed = world.catalog().service(&service).map(|s| QoSVector {
                    latency_ms: (now - sent_at) * 1000.0,
                    ..s.qos
                });
                if let Some(q) = observed {
                    self.inbox.push(SensoryEvent::new(now, Stimulus::QosReading { service, observed: q }));
                }
                self.settle(world, invocation, Outcome::Success, observed);
            }
            Payload::Plan(_) => {}
        }
    }

    fn on_drop(&mut self, world: &mut World, msg: NetMessage) {
        match msg.payload {
            Payload::Invoke { invocation, .. } | Payload::Response { invocation, .. } => {
                self.settle(world, invocation, Outcome::Failure, None);
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, world: &mut World, node: NodeId, token: u64) {
        match self.timers.remove(&token) {
            Some(Timer::Timeout(invocation)) => self.settle(world, invocation, Outcome::Timeout, None),
            Some(Timer::Reply { invocation, service, to }) => {
                if world.host_active(node) {
                    world.send(node, to, MsgKind::Response, RESPONSE_BYTES, Payload::Response { invocation, service });
                }
            }
            None => {}
        }
    }

    fn on_cycle(&mut self, world: &mut World) {
        self.cycle_pending = false;
        let now = world.now_secs();
        self.prune_inbox(now);
        let events = std::mem::take(&mut self.inbox);
        let record = self.agent.run_cycle_traced(&events, now);
        for action in &record.actions {
            if let Action::InvokeConcrete { invocation, service, .. } = action {
                self.invoke(world, *invocation, service.clone());
            }
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.push(record);
        }
        self.flush(world);
        if self.agent.has_open_requests() {
            self.wake(world, self.cycle_period);
        }
    }

    fn on_context(&mut self, world: &mut World, key: &str, value: f64) {
        self.inbox.push(SensoryEvent::new(world.now_secs(), Stimulus::ContextReading { key: key.to_string(), value }));
    }

    fn on_expire(&mut self, world: &mut World, request: RequestId) {
        self.agent.abandon(request, world.now_secs());
        self.agent.take_finished();
    }

    fn footprint(&self) -> usize {
        self.agent.footprint()
    }
}
