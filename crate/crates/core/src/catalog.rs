//! Scenario service catalog: the concrete services of a scenario, their
//! grouping into abstract services, and the optional concept graph.
//!
//! On disk the catalog is JSON:
//!
//! ```text
//! {
//!   "services": [
//!     { "id": "cs01_1", "abstract": "A01", "host": null,
//!       "inputs": ["data(d00)"], "outputs": ["data(d01)"],
//!       "prec": ["have(d00)"], "postc": ["have(d01)"], "postc_negative": [],
//!       "qos": { "latency_ms": 120.0, "reliability": 0.9, "cost": 10.0, "energy": 5.0 },
//!       "ctx": { "tier": "edge" } }
//!   ],
//!   "concepts": { "nodes": [...], "links": [...] }
//! }
//! ```
//!
//! `concepts` is optional; when absent a graph is generated from the
//! abstract services (see [`crate::slipnet::ConceptGraph::generate`]).

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::service::{
    abstract_from_concretes, AbstractService, ConcreteService, Premise, PremiseSet, QoSVector, ServiceId,
};
use crate::slipnet::ConceptGraph;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ServiceRecord {
    #[serde(rename = "abstract")]
    abstract_id: String,
    #[serde(flatten)]
    service: ConcreteService,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CatalogFile {
    services: Vec<ServiceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    concepts: Option<ConceptGraph>,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    services: BTreeMap<ServiceId, ConcreteService>,
    membership: BTreeMap<ServiceId, String>,
    abstracts: Vec<AbstractService>,
    concepts: ConceptGraph,
}

impl Catalog {
    /// Builds a catalog from `(abstract id, concrete)` pairs.
    pub fn from_groups(entries: Vec<(String, ConcreteService)>, concepts: Option<ConceptGraph>) -> Result<Self> {
        let mut services = BTreeMap::new();
        let mut membership = BTreeMap::new();
        let mut groups: BTreeMap<String, Vec<ConcreteService>> = BTreeMap::new();
        for (abs, cs) in entries {
            cs.qos.validate()?;
            if services.contains_key(&cs.id) {
                return Err(Error::DuplicateId(cs.id.0.clone()));
            }
            membership.insert(cs.id.clone(), abs.clone());
            groups.entry(abs).or_default().push(cs.clone());
            services.insert(cs.id.clone(), cs);
        }
        let abstracts = groups
            .iter()
            .map(|(id, members)| abstract_from_concretes(id.clone(), members))
            .collect::<Result<Vec<_>>>()?;
        let concepts = match concepts {
            Some(g) => g,
            None => ConceptGraph::generate(&abstracts),
        };
        Ok(Catalog { services, membership, abstracts, concepts })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let entries = file.services.into_iter().map(|r| (r.abstract_id, r.service)).collect();
        Catalog::from_groups(entries, file.concepts)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Catalog::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CatalogFile {
            services: self
                .services
                .values()
                .map(|s| ServiceRecord { abstract_id: self.membership[&s.id].clone(), service: s.clone() })
                .collect(),
            concepts: Some(self.concepts.clone()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// A linear data-transformation domain: stage `i` turns `have(d{i-1})`
    /// into `have(d{i})`, with `members_per_stage` interchangeable concretes.
    pub fn chain_domain<R: Rng>(stages: usize, members_per_stage: usize, rng: &mut R) -> Self {
        let mut entries = Vec::with_capacity(stages * members_per_stage);
        for stage in 1..=stages {
            let abs = abstract_name(stage);
            for m in 1..=members_per_stage {
                let qos = QoSVector {
                    latency_ms: rng.gen_range(50.0..250.0),
                    reliability: rng.gen_range(0.6..1.0),
                    cost: rng.gen_range(0.0..100.0),
                    energy: rng.gen_range(0.0..100.0),
                };
                let mut cs = ConcreteService::new(
                    format!("cs{stage:02}_{m}"),
                    [have(stage - 1)].into_iter().collect(),
                    [have(stage)].into_iter().collect(),
                    qos,
                );
                cs.inputs.insert(Premise::new("data", [data_name(stage - 1)]));
                cs.outputs.insert(Premise::new("data", [data_name(stage)]));
                // Some members also leave a cache entry; the abstract post drops it.
                if rng.gen_bool(0.3) {
                    cs.postc.insert(Premise::new("cached", [data_name(stage)]));
                }
                let tier = if rng.gen_bool(0.5) { "edge" } else { "mobile" };
                cs.ctx.insert("tier".into(), tier.into());
                entries.push((abs.clone(), cs));
            }
        }
        Catalog::from_groups(entries, None).expect("chain domain is well-formed")
    }

    pub fn services(&self) -> impl Iterator<Item = &ConcreteService> {
        self.services.values()
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn service(&self, id: &ServiceId) -> Option<&ConcreteService> {
        self.services.get(id)
    }

    pub fn service_mut(&mut self, id: &ServiceId) -> Option<&mut ConcreteService> {
        self.services.get_mut(id)
    }

    pub fn abstracts(&self) -> &[AbstractService] {
        &self.abstracts
    }

    pub fn abstract_service(&self, id: &str) -> Option<&AbstractService> {
        self.abstracts.iter().find(|a| a.id == id)
    }

    /// Abstract service a concrete belongs to.
    pub fn abstract_of(&self, id: &ServiceId) -> Option<&str> {
        self.membership.get(id).map(String::as_str)
    }

    pub fn concepts(&self) -> &ConceptGraph {
        &self.concepts
    }

    /// All premises mentioned by the catalog (part of the premise universe).
    pub fn premise_universe(&self) -> PremiseSet {
        let mut all = PremiseSet::new();
        for s in self.services.values() {
            all.extend(s.prec.iter().cloned());
            all.extend(s.postc.iter().cloned());
            all.extend(s.postc_negative.iter().cloned());
        }
        all
    }
}

pub fn data_name(i: usize) -> String {
    format!("d{i:02}")
}

pub fn abstract_name(stage: usize) -> String {
    format!("A{stage:02}")
}

pub fn have(i: usize) -> Premise {
    Premise::new("have", [data_name(i)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_domain_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cat = Catalog::chain_domain(10, 6, &mut rng);
        assert_eq!(cat.len(), 60);
        assert_eq!(cat.abstracts().len(), 10);
        let a3 = cat.abstract_service("A03").unwrap();
        assert_eq!(a3.pre, [have(2)].into_iter().collect());
        assert_eq!(a3.post, [have(3)].into_iter().collect());
        assert_eq!(a3.members.len(), 6);
        assert_eq!(cat.abstract_of(&ServiceId::from("cs03_2")), Some("A03"));
    }

    #[test]
    fn json_roundtrip_preserves_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cat = Catalog::chain_domain(3, 2, &mut rng);
        let text = cat.to_json().unwrap();
        let back = Catalog::from_json(&text).unwrap();
        assert_eq!(back.abstracts(), cat.abstracts());
        assert_eq!(back.len(), cat.len());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let q = QoSVector::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let cs = ConcreteService::new("x", [have(0)].into_iter().collect(), [have(1)].into_iter().collect(), q);
        let err = Catalog::from_groups(vec![("A".into(), cs.clone()), ("A".into(), cs)], None).unwrap_err();
        assert_eq!(err, Error::DuplicateId("x".into()));
    }
}
