//! Placement of concrete services onto provider nodes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::service::{NodeId, ServiceId};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Deployment {
    host_of: BTreeMap<ServiceId, NodeId>,
    hosted: BTreeMap<NodeId, Vec<ServiceId>>,
}

impl Deployment {
    pub fn place(&mut self, service: ServiceId, node: NodeId) {
        self.hosted.entry(node).or_default().push(service.clone());
        self.host_of.insert(service, node);
    }

    pub fn host_of(&self, service: &ServiceId) -> Option<NodeId> {
        self.host_of.get(service).copied()
    }

    pub fn hosted(&self, node: NodeId) -> &[ServiceId] {
        self.hosted.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.host_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.host_of.is_empty()
    }

    pub fn services(&self) -> impl Iterator<Item = (&ServiceId, NodeId)> {
        self.host_of.iter().map(|(s, n)| (s, *n))
    }
}

/// Places exactly `density` services on `providers`, uniformly at random.
/// One member of every abstract service is drawn first so each abstract
/// service is deployed at least once; the rest are drawn from the remaining
/// concretes.
pub fn deploy_services<R: Rng>(catalog: &Catalog, providers: &[NodeId], density: usize, rng: &mut R) -> Result<Deployment> {
    if density == 0 {
        return Err(Error::InvalidConfig { key: "density".into(), reason: "must be positive".into() });
    }
    if providers.is_empty() {
        return Err(Error::InvalidConfig { key: "providers".into(), reason: "no provider nodes".into() });
    }
    if catalog.len() < density {
        return Err(Error::CatalogTooSmall { available: catalog.len(), density });
    }
    let abstracts = catalog.abstracts();
    if density < abstracts.len() {
        return Err(Error::InvalidConfig {
            key: "density".into(),
            reason: format!("{density} cannot cover {} abstract services", abstracts.len()),
        });
    }
    let mut chosen: Vec<ServiceId> = Vec::with_capacity(density);
    for a in abstracts {
        chosen.push(a.members.choose(rng).expect("abstract services have members").clone());
    }
    let mut rest: Vec<ServiceId> = catalog.services().map(|s| s.id.clone()).filter(|id| !chosen.contains(id)).collect();
    rest.shuffle(rng);
    chosen.extend(rest.into_iter().take(density - abstracts.len()));
    let mut deployment = Deployment::default();
    for service in chosen {
        let node = *providers.choose(rng).expect("providers non-empty");
        deployment.place(service, node);
    }
    Ok(deployment)
}
