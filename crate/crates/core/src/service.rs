//! Service model: premises, QoS, concrete and abstract services.
//!
//! Premises are ground atoms (`have(d3)`, `available(cs12)`); matching is
//! plain set inclusion. An abstract service groups functionally equivalent
//! concretes and carries the intersection of their pre/postconditions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Node identifier inside the simulator.
pub type NodeId = u32;

/// A ground symbolic proposition, compared structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Premise {
    predicate: String,
    args: Vec<String>,
}

pub type PremiseSet = BTreeSet<Premise>;

impl Premise {
    pub fn new<P: Into<String>, A: Into<String>>(predicate: P, args: impl IntoIterator<Item = A>) -> Self {
        Premise {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// A zero-arity premise.
    pub fn atom(predicate: impl Into<String>) -> Self {
        Premise { predicate: predicate.into(), args: Vec::new() }
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    /// Every identifier mentioned by the premise (predicate first).
    pub fn mentions(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.predicate.as_str()).chain(self.args.iter().map(String::as_str))
    }

    /// Bytes of identifier text held by the premise.
    pub fn text_len(&self) -> usize {
        self.predicate.len() + self.args.iter().map(String::len).sum::<usize>()
    }
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.predicate)
        } else {
            write!(f, "{}({})", self.predicate, self.args.join(","))
        }
    }
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '+' | '='))
}

impl FromStr for Premise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::MalformedPremise(s.to_string());
        match s.find('(') {
            None => {
                if valid_ident(s) {
                    Ok(Premise::atom(s))
                } else {
                    Err(bad())
                }
            }
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(bad());
                }
                let predicate = s[..open].trim();
                let inner = &s[open + 1..s.len() - 1];
                if !valid_ident(predicate) {
                    return Err(bad());
                }
                let args: Vec<String> = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|a| a.trim().to_string()).collect()
                };
                if args.iter().any(|a| !valid_ident(a)) {
                    return Err(bad());
                }
                Ok(Premise { predicate: predicate.to_string(), args })
            }
        }
    }
}

impl Serialize for Premise {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Premise {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a list of premise strings into a set.
pub fn premise_set<I, S>(items: I) -> Result<PremiseSet>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items.into_iter().map(|s| s.as_ref().parse()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoSVector {
    pub latency_ms: f64,
    pub reliability: f64,
    pub cost: f64,
    pub energy: f64,
}

impl QoSVector {
    pub fn new(latency_ms: f64, reliability: f64, cost: f64, energy: f64) -> Result<Self> {
        let q = QoSVector { latency_ms, reliability, cost, energy };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.latency_ms, self.reliability, self.cost, self.energy];
        if parts.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidQos("non-finite component".into()));
        }
        if self.latency_ms < 0.0 || self.cost < 0.0 || self.energy < 0.0 {
            return Err(Error::InvalidQos("negative component".into()));
        }
        if !(0.0..=1.0).contains(&self.reliability) {
            return Err(Error::InvalidQos(format!("reliability {} outside [0,1]", self.reliability)));
        }
        Ok(())
    }
}

/// Normalization caps for the "lower is better" QoS components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosCaps {
    pub latency_ms: f64,
    pub cost: f64,
    pub energy: f64,
}

impl Default for QosCaps {
    fn default() -> Self {
        QosCaps { latency_ms: 2000.0, cost: 100.0, energy: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosWeights {
    pub latency: f64,
    pub reliability: f64,
    pub cost: f64,
    pub energy: f64,
}

impl QosWeights {
    pub fn new(latency: f64, reliability: f64, cost: f64, energy: f64) -> Result<Self> {
        let w = QosWeights { latency, reliability, cost, energy };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.latency, self.reliability, self.cost, self.energy];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

impl Default for QosWeights {
    fn default() -> Self {
        QosWeights { latency: 0.25, reliability: 0.25, cost: 0.25, energy: 0.25 }
    }
}

/// Weighted QoS utility in [0,1]. Reliability counts positively; latency,
/// cost and energy count as `1 - min(x / cap, 1)`.
pub fn qos_score(q: &QoSVector, weights: &QosWeights, caps: &QosCaps) -> Result<f64> {
    weights.validate()?;
    let inv = |x: f64, cap: f64| 1.0 - (x / cap).min(1.0);
    let score = weights.reliability * q.reliability.clamp(0.0, 1.0)
        + weights.latency * inv(q.latency_ms.max(0.0), caps.latency_ms)
        + weights.cost * inv(q.cost.max(0.0), caps.cost)
        + weights.energy * inv(q.energy.max(0.0), caps.energy);
    Ok(score.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceId(pub String);

impl ServiceId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ServiceId {
    fn from(s: &str) -> Self {
        ServiceId(s.to_string())
    }
}

/// An invocable service instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteService {
    pub id: ServiceId,
    /// Hosting node; `None` until deployed.
    #[serde(default)]
    pub host: Option<NodeId>,
    #[serde(default)]
    pub inputs: PremiseSet,
    #[serde(default)]
    pub outputs: PremiseSet,
    #[serde(default)]
    pub prec: PremiseSet,
    /// Expected (positive) postconditions.
    #[serde(default)]
    pub postc: PremiseSet,
    /// Negative postconditions: premises the service makes false.
    #[serde(default)]
    pub postc_negative: PremiseSet,
    pub qos: QoSVector,
    #[serde(default)]
    pub ctx: BTreeMap<String, String>,
}

impl ConcreteService {
    pub fn new(id: impl Into<String>, prec: PremiseSet, postc: PremiseSet, qos: QoSVector) -> Self {
        ConcreteService {
            id: ServiceId(id.into()),
            host: None,
            inputs: PremiseSet::new(),
            outputs: PremiseSet::new(),
            prec,
            postc,
            postc_negative: PremiseSet::new(),
            qos,
            ctx: BTreeMap::new(),
        }
    }
}

/// A functional equivalence class of concrete services.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractService {
    pub id: String,
    pub pre: PremiseSet,
    pub post: PremiseSet,
    #[serde(default)]
    pub post_negative: PremiseSet,
    pub members: Vec<ServiceId>,
}

/// Anything with a precondition set.
pub trait HasPreconditions {
    fn preconditions(&self) -> &PremiseSet;
}

impl HasPreconditions for ConcreteService {
    fn preconditions(&self) -> &PremiseSet {
        &self.prec
    }
}

impl HasPreconditions for AbstractService {
    fn preconditions(&self) -> &PremiseSet {
        &self.pre
    }
}

pub fn preconditions_satisfied<S: HasPreconditions + ?Sized>(state: &PremiseSet, service: &S) -> bool {
    service.preconditions().is_subset(state)
}

fn intersect_all<'a>(mut sets: impl Iterator<Item = &'a PremiseSet>) -> PremiseSet {
    let Some(first) = sets.next() else {
        return PremiseSet::new();
    };
    let mut acc = first.clone();
    for s in sets {
        acc.retain(|p| s.contains(p));
    }
    acc
}

/// Builds an abstract service whose pre/post are the intersections of the
/// members' prec/postc.
pub fn abstract_from_concretes(id: impl Into<String>, members: &[ConcreteService]) -> Result<AbstractService> {
    let id = id.into();
    if members.is_empty() {
        return Err(Error::NoConcretes);
    }
    let pre = intersect_all(members.iter().map(|m| &m.prec));
    let post = intersect_all(members.iter().map(|m| &m.postc));
    let post_negative = intersect_all(members.iter().map(|m| &m.postc_negative));
    if pre.is_empty() && post.is_empty() {
        return Err(Error::IncoherentGroup(id));
    }
    let mut ids: Vec<ServiceId> = members.iter().map(|m| m.id.clone()).collect();
    ids.sort();
    Ok(AbstractService { id, pre, post, post_negative, members: ids })
}
