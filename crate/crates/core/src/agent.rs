//! The cognitive agent. Each cycle runs perception, working-memory
//! injection, declarative cueing, a behavior-network step, behavior
//! selection and concrete-service discovery, and returns the resulting
//! actions. No plan is ever stored: the executed sequence exists only in the
//! action log.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorNetwork, BnParams};
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::footprint;
use crate::perception::{available, departed, perceive, CompositionRequest, EventKind, RequestId, SensoryEvent};
use crate::procedural::{default_regime_specs, discover_concrete, select_regime, update_utility, Regime, RegimeSpec};
use crate::sdm::{EpisodicMemory, EpisodicRecord, Outcome, SdmConfig};
use crate::service::{qos_score, ConcreteService, Premise, PremiseSet, QoSVector, QosCaps, QosWeights, ServiceId};
use crate::slipnet::{Slipnet, SlipnetParams};
use crate::wm::{ItemSource, WmConfig, WorkingMemory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub wm: WmConfig,
    pub sdm: SdmConfig,
    pub slipnet: SlipnetParams,
    pub epsilon: f64,
    pub utility_rate: f64,
    /// Cycles a failed candidate stays excluded for its request.
    pub blacklist_cycles: u64,
    pub weights: QosWeights,
    pub caps: QosCaps,
    /// Seconds after which an advertised service is no longer trusted to be
    /// reachable unless re-advertised.
    pub advert_staleness: f64,
    /// Successor links ahead of the executable behaviors whose adverts are
    /// attended while composing.
    pub attention_depth: usize,
    /// Behavior-network parameter regimes; utility ties go to the earlier one.
    pub regimes: Vec<RegimeSpec>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            wm: WmConfig::default(),
            sdm: SdmConfig::default(),
            slipnet: SlipnetParams::default(),
            epsilon: 0.1,
            utility_rate: 0.1,
            blacklist_cycles: 5,
            weights: QosWeights::default(),
            caps: QosCaps::default(),
            advert_staleness: 3.0,
            attention_depth: 3,
            regimes: default_regime_specs(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    SetGoal { request: RequestId, goals: PremiseSet },
    InvokeConcrete { invocation: u64, service: ServiceId, request: RequestId },
    NoOp { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvocationResult {
    pub invocation: u64,
    pub outcome: Outcome,
    pub observed: Option<QoSVector>,
}

/// A request the agent stopped working on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finished {
    pub request: RequestId,
    pub success: bool,
    pub at: f64,
}

/// One line of the decision trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: u64,
    pub time: f64,
    pub wm_size: usize,
    pub regime: Option<String>,
    pub selected: Option<String>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone)]
struct OpenRequest {
    request: CompositionRequest,
    achieved: PremiseSet,
    /// Postconditions realized by this request's successful invocations.
    produced: PremiseSet,
    /// Premises this request put into working memory.
    owned: PremiseSet,
    blacklist: BTreeMap<ServiceId, u64>,
    in_flight: BTreeSet<String>,
}

#[derive(Debug, Clone)]
struct Invocation {
    request: RequestId,
    service: ServiceId,
    behavior: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub unknown_service_warnings: u64,
    pub rejected_adverts: u64,
    pub replans: u64,
    pub expired: u64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    catalog: Arc<Catalog>,
    config: AgentConfig,
    wm: WorkingMemory,
    em: EpisodicMemory,
    sm: Slipnet,
    bn: BehaviorNetwork,
    regimes: Vec<Regime>,
    active_regime: Option<usize>,
    open: Vec<OpenRequest>,
    pending: BTreeMap<u64, Invocation>,
    next_invocation: u64,
    observed_qos: BTreeMap<ServiceId, QoSVector>,
    context: BTreeMap<String, String>,
    cycle_count: u64,
    last_cycle: f64,
    rng: ChaCha8Rng,
    finished: Vec<Finished>,
    pub diagnostics: Diagnostics,
}

impl Agent {
    pub fn new(catalog: Arc<Catalog>, config: AgentConfig) -> Result<Self> {
        let sm = Slipnet::new(catalog.concepts(), config.slipnet)?;
        sm.check_dissipative()?;
        if config.regimes.is_empty() {
            return Err(Error::InvalidParams("at least one regime is required".into()));
        }
        let regimes = config.regimes.iter().map(RegimeSpec::build).collect::<Result<Vec<Regime>>>()?;
        let bn = BehaviorNetwork::from_abstracts(catalog.abstracts(), *regimes[0].params())?;
        Ok(Agent {
            wm: WorkingMemory::new(config.wm),
            em: EpisodicMemory::new(&config.sdm),
            sm,
            bn,
            regimes,
            active_regime: None,
            open: Vec::new(),
            pending: BTreeMap::new(),
            next_invocation: 0,
            observed_qos: BTreeMap::new(),
            context: BTreeMap::new(),
            cycle_count: 0,
            last_cycle: f64::NEG_INFINITY,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            finished: Vec::new(),
            diagnostics: Diagnostics::default(),
            catalog,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn wm(&self) -> &WorkingMemory {
        &self.wm
    }

    pub fn bn(&self) -> &BehaviorNetwork {
        &self.bn
    }

    pub fn em(&self) -> &EpisodicMemory {
        &self.em
    }

    pub fn slipnet(&self) -> &Slipnet {
        &self.sm
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn cycle_count(&self) -> u64 {
        self.cycle_count
    }

    pub fn has_open_requests(&self) -> bool {
        !self.open.is_empty()
    }

    pub fn open_requests(&self) -> impl Iterator<Item = &CompositionRequest> {
        self.open.iter().map(|o| &o.request)
    }

    /// Protected premises of an open request.
    pub fn protected(&self, request: RequestId) -> Option<&PremiseSet> {
        self.open.iter().find(|o| o.request.id == request).map(|o| &o.request.protected)
    }

    pub fn pending_invocations(&self) -> usize {
        self.pending.len()
    }

    /// Requests completed or failed since the last call.
    pub fn take_finished(&mut self) -> Vec<Finished> {
        std::mem::take(&mut self.finished)
    }

    /// Current context attributes as premises (kept outside working memory).
    pub fn context_premises(&self) -> PremiseSet {
        self.context.iter().map(|(k, v)| Premise::new("ctx", [k.as_str(), v.as_str()])).collect()
    }

    fn state(&self, t: f64) -> PremiseSet {
        self.wm.content_set(t)
    }

    fn effective(&self, cs: &ConcreteService) -> ConcreteService {
        let mut c = cs.clone();
        if let Some(q) = self.observed_qos.get(&cs.id) {
            c.qos = *q;
        }
        c
    }

    fn score(&self, cs: &ConcreteService) -> f64 {
        let qos = self.observed_qos.get(&cs.id).unwrap_or(&cs.qos);
        qos_score(qos, &self.config.weights, &self.config.caps).unwrap_or(0.0)
    }

    /// What open requests know to hold: WM state plus everything they produced.
    fn realized(&self, state: &PremiseSet) -> PremiseSet {
        let mut out = state.clone();
        for o in &self.open {
            out.extend(o.produced.iter().cloned());
        }
        out
    }

    fn behavior_satisfied(&self, abstract_id: &str, state: &PremiseSet) -> bool {
        let realized = self.realized(state);
        self.catalog.abstract_service(abstract_id).map(|a| a.post.is_subset(&realized)).unwrap_or(true)
    }

    /// Premises open requests still build on: held preconditions of
    /// unsatisfied behaviors, goal percepts and protected goals.
    fn anchored(&self, state: &PremiseSet) -> PremiseSet {
        if self.open.is_empty() {
            return PremiseSet::new();
        }
        let realized = self.realized(state);
        let mut out: PremiseSet = self
            .bn
            .behaviors()
            .iter()
            .filter(|b| !b.add.is_subset(&realized))
            .flat_map(|b| b.pre.iter().filter(|p| state.contains(*p)).cloned())
            .collect();
        for o in &self.open {
            out.extend(o.request.protected.iter().cloned());
            out.extend(o.request.goals.iter().map(crate::perception::goal_premise));
        }
        out
    }

    /// Abstract services within `attention_depth` successor links of a
    /// behavior that is executable now and not yet satisfied.
    fn attention_window(&self, state: &PremiseSet) -> BTreeSet<String> {
        let realized = self.realized(state);
        let behaviors = self.bn.behaviors();
        let mut frontier: Vec<usize> =
            (0..behaviors.len()).filter(|&i| behaviors[i].executable(state) && !behaviors[i].add.is_subset(&realized)).collect();
        let mut seen: BTreeSet<usize> = frontier.iter().copied().collect();
        for _ in 0..self.config.attention_depth {
            let next: Vec<usize> = frontier
                .iter()
                .flat_map(|&i| self.bn.successors(i).iter().copied())
                .filter(|j| seen.insert(*j))
                .collect();
            frontier = next;
        }
        seen.into_iter().map(|i| behaviors[i].id.clone()).collect()
    }

    /// Adverts and recalled premises never displace anchored items.
    fn has_room(&self, premise: &Premise, anchored: &PremiseSet, t: f64) -> bool {
        self.wm.get(premise).is_some() || self.wm.would_evict(t).map_or(true, |victim| !anchored.contains(victim))
    }

    /// Selective attention over adverts: while composing, only services of
    /// not-yet-satisfied abstract services get in, one per abstract service,
    /// preferring fresher and better-scored ones.
    fn blacklisted(&self, service: &ServiceId) -> bool {
        self.open.iter().any(|o| o.blacklist.get(service).is_some_and(|&until| until > self.cycle_count))
    }

    fn attend_advert(&mut self, service: &ServiceId, state: &PremiseSet, t: f64) -> bool {
        if self.open.is_empty() {
            return true;
        }
        let Some(abs) = self.catalog.abstract_of(service).map(str::to_string) else {
            return false;
        };
        if self.behavior_satisfied(&abs, state) || !self.attention_window(state).contains(&abs) {
            return false;
        }
        if self.blacklisted(service) {
            return false;
        }
        let premise = available(service);
        if self.wm.get(&premise).is_some() {
            return true;
        }
        let held: Vec<(ServiceId, f64, f64)> = self
            .wm
            .items()
            .iter()
            .filter(|i| i.premise.predicate() == "available")
            .filter_map(|i| {
                let id = ServiceId(i.premise.args().first()?.clone());
                (self.catalog.abstract_of(&id) == Some(abs.as_str())).then_some((id, i.last_access()))
            })
            .map(|(id, last)| {
                let s = self.catalog.service(&id).map(|c| self.score(c)).unwrap_or(0.0);
                (id, s, last)
            })
            .collect();
        if held.is_empty() {
            return true;
        }
        let mine = self.catalog.service(service).map(|c| self.score(c)).unwrap_or(0.0);
        let displaced: Vec<ServiceId> = held
            .iter()
            .filter(|(id, s, last)| t - last > self.config.advert_staleness || mine > *s || self.blacklisted(id))
            .map(|(id, _, _)| id.clone())
            .collect();
        if displaced.len() < held.len() {
            return false;
        }
        for id in displaced {
            self.wm.remove(&available(&id));
        }
        true
    }

    fn start_request(&mut self, request: CompositionRequest, t: f64) -> Action {
        if self.open.is_empty() {
            let idx = select_regime(&self.regimes, self.config.epsilon, &mut self.rng);
            self.active_regime = Some(idx);
            let params = *self.regimes[idx].params();
            self.bn.set_params(params).expect("regime params are valid");
            self.em.reset_touched();
        }
        let mut owned = PremiseSet::new();
        for p in &request.inputs {
            self.wm.inject(p.clone(), t, 1.0, ItemSource::Percept);
            owned.insert(p.clone());
        }
        for g in &request.goals {
            owned.insert(crate::perception::goal_premise(g));
        }
        let action = Action::SetGoal { request: request.id, goals: request.goals.clone() };
        self.open.push(OpenRequest {
            request,
            achieved: PremiseSet::new(),
            produced: PremiseSet::new(),
            owned,
            blacklist: BTreeMap::new(),
            in_flight: BTreeSet::new(),
        });
        action
    }

    fn close_request(&mut self, idx: usize, success: bool, t: f64) {
        let open = self.open.remove(idx);
        for p in &open.owned {
            self.wm.remove(p);
        }
        self.pending.retain(|_, inv| inv.request != open.request.id);
        if let Some(r) = self.active_regime {
            update_utility(&mut self.regimes[r], if success { 1.0 } else { 0.0 }, self.config.utility_rate);
        }
        if self.open.is_empty() {
            self.active_regime = None;
        }
        self.finished.push(Finished { request: open.request.id, success, at: t });
    }

    /// Drops requests whose deadline has passed.
    pub fn expire(&mut self, t: f64) {
        while let Some(idx) = self.open.iter().position(|o| o.request.deadline <= t) {
            self.diagnostics.expired += 1;
            self.close_request(idx, false, t);
        }
    }

    /// Abandons one request (deadline enforced from outside).
    pub fn abandon(&mut self, request: RequestId, t: f64) {
        if let Some(idx) = self.open.iter().position(|o| o.request.id == request) {
            self.diagnostics.expired += 1;
            self.close_request(idx, false, t);
        }
    }

    pub fn run_cycle(&mut self, events: &[SensoryEvent], t: f64) -> Vec<Action> {
        self.run_cycle_traced(events, t).actions
    }

    pub fn run_cycle_traced(&mut self, events: &[SensoryEvent], t: f64) -> CycleRecord {
        debug_assert!(t >= self.last_cycle, "cycle time went backwards");
        self.last_cycle = t;
        self.cycle_count += 1;
        self.expire(t);
        let mut actions = Vec::new();

        // perception
        let perception = perceive(events, &self.catalog);
        self.diagnostics.unknown_service_warnings += perception.unknown_service_warnings as u64;
        for req in perception.requests {
            if req.deadline > t {
                actions.push(self.start_request(req, t));
            }
        }
        for (service, observed, _) in &perception.qos_observations {
            self.observed_qos.insert(service.clone(), *observed);
        }

        // working-memory injection
        let mut state = self.state(t);
        let mut anchored = self.anchored(&state);
        for percept in &perception.percepts {
            let p = &percept.premise;
            match percept.source {
                EventKind::ServiceAdvert => {
                    if p.predicate() != "available" {
                        continue;
                    }
                    let service = percept.about.clone().expect("advert percepts name their service");
                    if self.has_room(p, &anchored, t) && self.attend_advert(&service, &state, t) {
                        self.wm.inject(p.clone(), t, percept.salience, ItemSource::Percept);
                        self.wm.remove(&departed(&service));
                    } else {
                        self.diagnostics.rejected_adverts += 1;
                    }
                }
                EventKind::ServiceDeparture => {
                    if let Some(s) = &percept.about {
                        self.wm.remove(&available(s));
                    }
                    self.wm.inject(p.clone(), t, percept.salience, ItemSource::Percept);
                }
                EventKind::ContextReading => {
                    if let [key, band] = p.args() {
                        self.context.insert(key.clone(), band.clone());
                    }
                }
                EventKind::QosReading => {}
                EventKind::UserRequest => {
                    self.wm.inject(p.clone(), t, percept.salience, ItemSource::Percept);
                }
            }
            state = self.state(t);
            anchored = self.anchored(&state);
        }

        // rehearse what open requests still build on
        for p in anchored.iter().filter(|p| state.contains(*p)) {
            self.wm.inject(p.clone(), t, 1.0, ItemSource::Rehearsal);
        }

        // declarative cueing
        let wm_now = self.state(t);
        let mut cue = wm_now.clone();
        cue.extend(self.context_premises());
        let mut declarative = self.em.cue(&cue);
        let steps = self.config.slipnet.steps;
        declarative.extend(self.sm.cue(&wm_now, steps));
        // recall fills gaps: it neither refreshes held items nor displaces
        // request state or attended adverts
        let mut guarded = anchored.clone();
        if !self.open.is_empty() {
            let window = self.attention_window(&wm_now);
            guarded.extend(
                self.wm
                    .items()
                    .iter()
                    .filter(|i| i.premise.predicate() == "available")
                    .filter(|i| {
                        i.premise
                            .args()
                            .first()
                            .and_then(|id| self.catalog.abstract_of(&ServiceId(id.clone())))
                            .is_some_and(|a| window.contains(a))
                    })
                    .map(|i| i.premise.clone()),
            );
        }
        for p in declarative {
            if self.wm.get(&p).is_none() && self.has_room(&p, &guarded, t) {
                self.wm.inject(p, t, 1.0, ItemSource::Declarative);
            }
        }

        // attention: the network sees only what open requests still build on
        let state = self.state(t);
        let attended: PremiseSet = state.intersection(&self.anchored(&state)).cloned().collect();
        let mut goals = PremiseSet::new();
        let mut protected = PremiseSet::new();
        for o in &self.open {
            goals.extend(o.request.goals.difference(&o.achieved).cloned());
            protected.extend(o.request.protected.iter().cloned());
        }
        self.bn.activation_step(&attended, &goals, &protected);

        let mut selected = None;
        if !self.open.is_empty() {
            let in_flight: BTreeSet<String> = self.open.iter().flat_map(|o| o.in_flight.iter().cloned()).collect();
            let realized = self.realized(&state);
            let grounded = self.grounded(&state);
            selected = self.bn.select_behavior_where(&attended, |b| {
                !in_flight.contains(&b.id) && !b.add.is_subset(&realized) && grounded.contains(&b.id)
            });
            if let Some(behavior) = &selected {
                actions.push(self.discover_and_invoke(behavior, &state));
            }
        }
        if actions.is_empty() {
            actions.push(Action::NoOp { reason: if self.open.is_empty() { "idle" } else { "waiting" }.into() });
        }
        CycleRecord {
            cycle: self.cycle_count,
            time: t,
            wm_size: self.wm.len(),
            regime: self.active_regime.map(|r| self.regimes[r].kind().name().to_string()),
            selected,
            actions,
        }
    }

    /// Behaviors with at least one usable member in working memory for the
    /// request being served.
    fn grounded(&self, state: &PremiseSet) -> BTreeSet<String> {
        let Some(open) = self.open.iter().find(|o| !o.request.goals.is_subset(&o.achieved)) else {
            return BTreeSet::new();
        };
        let cycle = self.cycle_count;
        self.catalog
            .abstracts()
            .iter()
            .filter(|a| {
                a.members.iter().any(|id| {
                    state.contains(&available(id))
                        && !state.contains(&departed(id))
                        && open.blacklist.get(id).map_or(true, |&until| until <= cycle)
                })
            })
            .map(|a| a.id.clone())
            .collect()
    }

    fn discover_and_invoke(&mut self, behavior: &str, state: &PremiseSet) -> Action {
        let Some(req_idx) = self.open.iter().position(|o| !o.request.goals.is_subset(&o.achieved)) else {
            return Action::NoOp { reason: "no request to serve".into() };
        };
        let abs = self.catalog.abstract_service(behavior).expect("behaviors mirror abstract services").clone();
        let cycle = self.cycle_count;
        let open = &self.open[req_idx];
        let live: Vec<ConcreteService> = abs
            .members
            .iter()
            .filter(|id| state.contains(&available(id)) && !state.contains(&departed(id)))
            .filter(|id| open.blacklist.get(*id).map_or(true, |&until| until <= cycle))
            .filter_map(|id| self.catalog.service(id))
            .map(|cs| self.effective(cs))
            .collect();
        let refs: Vec<&ConcreteService> = live.iter().collect();
        let ranked = discover_concrete(&abs, &refs, &self.config.weights, &self.config.caps, state);
        let Some(best) = ranked.first() else {
            self.diagnostics.replans += 1;
            return Action::NoOp { reason: format!("replan {behavior}") };
        };
        let invocation = self.next_invocation;
        self.next_invocation += 1;
        let request = self.open[req_idx].request.id;
        self.open[req_idx].in_flight.insert(behavior.to_string());
        self.pending.insert(
            invocation,
            Invocation { request, service: best.id.clone(), behavior: behavior.to_string() },
        );
        Action::InvokeConcrete { invocation, service: best.id.clone(), request }
    }

    pub fn apply_outcome(&mut self, result: &InvocationResult, t: f64) -> Result<()> {
        let inv = self.pending.remove(&result.invocation).ok_or(Error::UnknownInvocation(result.invocation))?;
        let cs = self.catalog.service(&inv.service).cloned();
        let observed = result.observed.or(cs.as_ref().map(|c| c.qos)).unwrap_or(QoSVector { latency_ms: 0.0, reliability: 0.0, cost: 0.0, energy: 0.0 });
        self.em.store(&EpisodicRecord {
            service: inv.service.clone(),
            context: self.context.clone(),
            outcome: result.outcome,
            observed_qos: observed,
            time: t,
        });
        let Some(idx) = self.open.iter().position(|o| o.request.id == inv.request) else {
            return Ok(());
        };
        self.open[idx].in_flight.remove(&inv.behavior);
        match result.outcome {
            Outcome::Success => {
                let add = self
                    .catalog
                    .abstract_service(&inv.behavior)
                    .map(|a| a.post.clone())
                    .unwrap_or_default();
                let open = &mut self.open[idx];
                for p in &add {
                    self.wm.inject(p.clone(), t, 1.0, ItemSource::Percept);
                    open.owned.insert(p.clone());
                    open.produced.insert(p.clone());
                    if open.request.goals.contains(p) {
                        open.achieved.insert(p.clone());
                        open.request.protected.insert(p.clone());
                    }
                }
                if open.request.goals.is_subset(&open.achieved) {
                    self.close_request(idx, true, t);
                }
            }
            Outcome::Failure | Outcome::Timeout => {
                let failed = Premise::new("failed", [inv.service.as_str()]);
                self.wm.inject(failed.clone(), t, 1.0, ItemSource::Percept);
                let open = &mut self.open[idx];
                open.owned.insert(failed);
                open.blacklist.insert(inv.service.clone(), self.cycle_count + self.config.blacklist_cycles);
            }
        }
        Ok(())
    }

    /// Structural bytes of live composition state.
    pub fn footprint(&self) -> usize {
        let wm: usize = self.wm.items().iter().map(|i| footprint::wm_item_bytes(&i.premise, i.access_times.len())).sum();
        let bn = self.bn.len() * footprint::ACTIVATION_BYTES;
        let sm = self.sm.nodes().len() * footprint::ACTIVATION_BYTES;
        let em = self.em.touched() * footprint::sdm_location_bytes(self.em.sdm().word_bits());
        let requests: usize = self
            .open
            .iter()
            .map(|o| {
                footprint::REQUEST_OVERHEAD
                    + footprint::premise_set_bytes(&o.request.goals)
                    + footprint::premise_set_bytes(&o.request.inputs)
                    + footprint::premise_set_bytes(&o.achieved)
                    + footprint::premise_set_bytes(&o.produced)
                    + o.blacklist.keys().map(|s| s.as_str().len() + footprint::BLACKLIST_OVERHEAD).sum::<usize>()
            })
            .sum();
        let invocations = self.pending.len() * footprint::INVOCATION_BYTES;
        wm + bn + sm + em + requests + invocations
    }

    /// Current behavior-network parameters.
    pub fn bn_params(&self) -> BnParams {
        *self.bn.params()
    }
}
