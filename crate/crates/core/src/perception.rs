//! Perception: turns sensory events into percepts (premises with salience).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::service::{Premise, PremiseSet, QoSVector, ServiceId};

/// Salience per event kind. Only the ordering matters downstream.
pub const SALIENCE_REQUEST: f64 = 1.0;
pub const SALIENCE_ADVERT: f64 = 0.6;
pub const SALIENCE_CONTEXT: f64 = 0.4;
pub const SALIENCE_DEPARTURE: f64 = 0.8;

/// Number of bands continuous context readings are quantized into.
pub const CONTEXT_BANDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    UserRequest,
    ServiceAdvert,
    ServiceDeparture,
    ContextReading,
    QosReading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A user composition request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRequest {
    pub id: RequestId,
    /// Simulated seconds.
    pub issued_at: f64,
    /// Absolute deadline in simulated seconds.
    pub deadline: f64,
    pub goals: PremiseSet,
    /// Premises the requester already holds (initial data).
    pub inputs: PremiseSet,
    /// Achieved goals, filled lazily as the composition progresses.
    pub protected: PremiseSet,
}

/// Hands out request ids; one per scenario.
#[derive(Debug, Default, Clone)]
pub struct RequestFactory {
    next: u64,
}

impl RequestFactory {
    pub fn new() -> Self {
        Self::default()
    }

    /// `deadline` is relative to `issued_at`.
    pub fn encode(&mut self, goals: PremiseSet, inputs: PremiseSet, issued_at: f64, deadline: f64) -> Result<CompositionRequest> {
        if goals.is_empty() {
            return Err(Error::EmptyGoals);
        }
        let id = RequestId(self.next);
        self.next += 1;
        Ok(CompositionRequest {
            id,
            issued_at,
            deadline: issued_at + deadline,
            goals,
            inputs,
            protected: PremiseSet::new(),
        })
    }
}

/// Typed payloads; the variant fixes which fields are present.
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    UserRequest(CompositionRequest),
    ServiceAdvert { service: ServiceId },
    ServiceDeparture { service: ServiceId },
    /// `value` is a normalized reading in [0,1].
    ContextReading { key: String, value: f64 },
    QosReading { service: ServiceId, observed: QoSVector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensoryEvent {
    pub timestamp: f64,
    pub stimulus: Stimulus,
}

impl SensoryEvent {
    pub fn new(timestamp: f64, stimulus: Stimulus) -> Self {
        SensoryEvent { timestamp, stimulus }
    }

    pub fn kind(&self) -> EventKind {
        match self.stimulus {
            Stimulus::UserRequest(_) => EventKind::UserRequest,
            Stimulus::ServiceAdvert { .. } => EventKind::ServiceAdvert,
            Stimulus::ServiceDeparture { .. } => EventKind::ServiceDeparture,
            Stimulus::ContextReading { .. } => EventKind::ContextReading,
            Stimulus::QosReading { .. } => EventKind::QosReading,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    pub premise: Premise,
    pub salience: f64,
    pub source: EventKind,
    pub timestamp: f64,
    /// Service the percept is about, when there is one.
    pub about: Option<ServiceId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Perception {
    pub percepts: Vec<Percept>,
    pub requests: Vec<CompositionRequest>,
    pub qos_observations: Vec<(ServiceId, QoSVector, f64)>,
    /// Events naming services absent from the catalog.
    pub unknown_service_warnings: u32,
}

pub fn available(service: &ServiceId) -> Premise {
    Premise::new("available", [service.as_str()])
}

pub fn departed(service: &ServiceId) -> Premise {
    Premise::new("departed", [service.as_str()])
}

pub fn goal_premise(goal: &Premise) -> Premise {
    Premise::new("goal", goal.mentions().map(str::to_string).collect::<Vec<_>>())
}

pub fn context_band(value: f64) -> String {
    let band = ((value.clamp(0.0, 1.0) * CONTEXT_BANDS as f64) as usize).min(CONTEXT_BANDS - 1);
    format!("b{band}")
}

pub fn context_premise(key: &str, value: f64) -> Premise {
    Premise::new("ctx", [key.to_string(), context_band(value)])
}

/// Converts events (timestamp-ordered) into percepts.
pub fn perceive(events: &[SensoryEvent], catalog: &Catalog) -> Perception {
    let mut out = Perception::default();
    for ev in events {
        let t = ev.timestamp;
        let mut push = |premise: Premise, salience: f64, about: Option<ServiceId>| {
            out.percepts.push(Percept { premise, salience, source: ev.kind(), timestamp: t, about });
        };
        match &ev.stimulus {
            Stimulus::UserRequest(req) => {
                for g in &req.goals {
                    push(goal_premise(g), SALIENCE_REQUEST, None);
                }
                for p in &req.inputs {
                    push(p.clone(), SALIENCE_REQUEST, None);
                }
                out.requests.push(req.clone());
            }
            Stimulus::ServiceAdvert { service } => match catalog.service(service) {
                Some(cs) => {
                    push(available(service), SALIENCE_ADVERT, Some(service.clone()));
                    for post in &cs.postc {
                        let mut args = vec![service.0.clone(), post.predicate().to_string()];
                        args.extend(post.args().iter().cloned());
                        push(Premise::new("provides", args), SALIENCE_ADVERT, Some(service.clone()));
                    }
                }
                None => out.unknown_service_warnings += 1,
            },
            Stimulus::ServiceDeparture { service } => {
                if catalog.service(service).is_some() {
                    push(departed(service), SALIENCE_DEPARTURE, Some(service.clone()));
                } else {
                    out.unknown_service_warnings += 1;
                }
            }
            Stimulus::ContextReading { key, value } => {
                push(context_premise(key, *value), SALIENCE_CONTEXT, None);
            }
            Stimulus::QosReading { service, observed } => {
                if catalog.service(service).is_some() {
                    push(
                        Premise::new("qos", [service.as_str()]),
                        observed.reliability.clamp(0.0, 1.0),
                        Some(service.clone()),
                    );
                    out.qos_observations.push((service.clone(), *observed, t));
                } else {
                    out.unknown_service_warnings += 1;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::have;
    use crate::service::ConcreteService;

    fn fixture() -> Catalog {
        let q = QoSVector::new(100.0, 0.9, 1.0, 1.0).unwrap();
        let cs1 = ConcreteService::new("cs1", [have(0)].into_iter().collect(), ["x".parse().unwrap()].into_iter().collect(), q);
        Catalog::from_groups(vec![("A".into(), cs1)], None).unwrap()
    }

    #[test]
    fn advert_yields_availability_and_capabilities() {
        let cat = fixture();
        let ev = SensoryEvent::new(1.0, Stimulus::ServiceAdvert { service: "cs1".into() });
        let out = perceive(&[ev], &cat);
        let premises: Vec<String> = out.percepts.iter().map(|p| p.premise.to_string()).collect();
        assert_eq!(premises, vec!["available(cs1)", "provides(cs1,x)"]);
        assert!(out.percepts.iter().all(|p| p.salience == SALIENCE_ADVERT));
    }

    #[test]
    fn empty_events_empty_percepts() {
        assert_eq!(perceive(&[], &fixture()), Perception::default());
    }

    #[test]
    fn request_yields_goal_percept_with_full_salience() {
        let mut f = RequestFactory::new();
        let g: Premise = "g".parse().unwrap();
        let req = f.encode([g.clone()].into_iter().collect(), PremiseSet::new(), 0.0, 30.0).unwrap();
        let out = perceive(&[SensoryEvent::new(0.0, Stimulus::UserRequest(req.clone()))], &fixture());
        assert_eq!(out.percepts.len(), 1);
        assert_eq!(out.percepts[0].premise, goal_premise(&g));
        assert_eq!(out.percepts[0].premise.to_string(), "goal(g)");
        assert_eq!(out.percepts[0].salience, 1.0);
        assert_eq!(out.requests, vec![req]);
    }

    #[test]
    fn unknown_service_dropped_with_warning() {
        let ev = SensoryEvent::new(1.0, Stimulus::ServiceAdvert { service: "ghost".into() });
        let out = perceive(&[ev], &fixture());
        assert!(out.percepts.is_empty());
        assert_eq!(out.unknown_service_warnings, 1);
    }

    #[test]
    fn qos_salience_is_observed_reliability() {
        let observed = QoSVector::new(80.0, 0.72, 1.0, 1.0).unwrap();
        let ev = SensoryEvent::new(2.0, Stimulus::QosReading { service: "cs1".into(), observed });
        let out = perceive(&[ev], &fixture());
        assert_eq!(out.percepts[0].salience, 0.72);
        assert_eq!(out.qos_observations.len(), 1);
    }

    #[test]
    fn context_readings_are_banded() {
        assert_eq!(context_band(0.0), "b0");
        assert_eq!(context_band(0.26), "b1");
        assert_eq!(context_band(1.0), "b3");
        let ev = SensoryEvent::new(0.0, Stimulus::ContextReading { key: "x".into(), value: 0.6 });
        let out = perceive(&[ev], &fixture());
        assert_eq!(out.percepts[0].premise.to_string(), "ctx(x,b2)");
    }

    #[test]
    fn encode_request_rules() {
        let mut f = RequestFactory::new();
        assert_eq!(f.encode(PremiseSet::new(), PremiseSet::new(), 0.0, 30.0), Err(Error::EmptyGoals));
        let g1: Premise = "g1".parse().unwrap();
        let g2: Premise = "g2".parse().unwrap();
        let a = f.encode([g1.clone()].into_iter().collect(), PremiseSet::new(), 5.0, 30.0).unwrap();
        let b = f.encode([g1, g2].into_iter().collect(), PremiseSet::new(), 5.0, 30.0).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a.deadline, 35.0);
        assert_eq!(b.goals.len(), 2);
        assert!(b.protected.is_empty());
    }
}
