//! Semantic memory as a slipnet: concept nodes with activation and
//! conceptual depth, passing activation along links whose length encodes
//! relatedness (shorter is closer).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::service::{AbstractService, Premise, PremiseSet};

pub const MAX_ACTIVATION: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub concept: String,
    pub depth: f64,
    #[serde(default)]
    pub emitted_premises: PremiseSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptLink {
    pub from: String,
    pub to: String,
    pub length: f64,
}

/// Concept-graph file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptGraph {
    pub nodes: Vec<ConceptNode>,
    pub links: Vec<ConceptLink>,
}

pub fn relevant(abstract_id: &str) -> Premise {
    Premise::new("relevant", [abstract_id])
}

impl ConceptGraph {
    /// One concept per abstract service, one per data argument of its
    /// pre/postconditions, and a category concept per postcondition
    /// predicate. Data feeds the services that consume it; services link to
    /// their category. Link lengths are stretched where needed so the graph
    /// stays dissipative under the default parameters.
    pub fn generate(abstracts: &[AbstractService]) -> Self {
        const DATA_DEPTH: f64 = 10.0;
        const SERVICE_DEPTH: f64 = 20.0;
        const CATEGORY_DEPTH: f64 = 50.0;
        let mut depth: BTreeMap<String, f64> = BTreeMap::new();
        let mut emits: BTreeMap<String, PremiseSet> = BTreeMap::new();
        let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
        for a in abstracts {
            let svc = format!("svc.{}", a.id);
            depth.insert(svc.clone(), SERVICE_DEPTH);
            emits.entry(svc.clone()).or_default().insert(relevant(&a.id));
            for p in &a.pre {
                for arg in p.args() {
                    depth.entry(arg.clone()).or_insert(DATA_DEPTH);
                    edges.insert((arg.clone(), svc.clone()));
                }
            }
            for p in &a.post {
                for arg in p.args() {
                    depth.entry(arg.clone()).or_insert(DATA_DEPTH);
                }
                let cat = format!("cat.{}", p.predicate());
                depth.insert(cat.clone(), CATEGORY_DEPTH);
                edges.insert((svc.clone(), cat));
            }
        }
        let params = SlipnetParams::default();
        let mut out_degree: BTreeMap<&str, usize> = BTreeMap::new();
        for (from, _) in &edges {
            *out_degree.entry(from.as_str()).or_default() += 1;
        }
        let links = edges
            .iter()
            .map(|(from, to)| {
                let lambda = params.decay * (100.0 - depth[from]) / 100.0;
                // ρ·Σw ≤ λ with 10% slack
                let budget = 0.9 * lambda / params.spread_rate / out_degree[from.as_str()] as f64;
                let w = budget.min(0.45);
                ConceptLink { from: from.clone(), to: to.clone(), length: 100.0 * (1.0 - w) }
            })
            .collect();
        let nodes = depth
            .into_iter()
            .map(|(concept, depth)| {
                let emitted_premises = emits.remove(&concept).unwrap_or_default();
                ConceptNode { concept, depth, emitted_premises }
            })
            .collect();
        ConceptGraph { nodes, links }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipnetParams {
    pub spread_rate: f64,
    pub decay: f64,
    pub injection: f64,
    pub threshold: f64,
    pub steps: usize,
}

impl Default for SlipnetParams {
    fn default() -> Self {
        SlipnetParams { spread_rate: 0.2, decay: 0.1, injection: 50.0, threshold: 50.0, steps: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlipnetNode {
    pub concept: String,
    pub activation: f64,
    pub depth: f64,
    pub emitted_premises: PremiseSet,
}

#[derive(Debug, Clone)]
pub struct Slipnet {
    nodes: Vec<SlipnetNode>,
    /// (from, to, weight = (100 - length) / 100)
    edges: Vec<(usize, usize, f64)>,
    index: BTreeMap<String, usize>,
    params: SlipnetParams,
}

impl Slipnet {
    pub fn new(graph: &ConceptGraph, params: SlipnetParams) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut nodes = Vec::with_capacity(graph.nodes.len());
        for n in &graph.nodes {
            if index.insert(n.concept.clone(), nodes.len()).is_some() {
                return Err(Error::DuplicateId(n.concept.clone()));
            }
            nodes.push(SlipnetNode {
                concept: n.concept.clone(),
                activation: 0.0,
                depth: n.depth.clamp(0.0, 100.0),
                emitted_premises: n.emitted_premises.clone(),
            });
        }
        let mut edges = Vec::with_capacity(graph.links.len());
        for l in &graph.links {
            let from = *index.get(&l.from).ok_or_else(|| Error::UnmappedConcept(l.from.clone()))?;
            let to = *index.get(&l.to).ok_or_else(|| Error::UnmappedConcept(l.to.clone()))?;
            if from == to {
                return Err(Error::InvalidConfig { key: "concepts.links".into(), reason: format!("self-link on {}", l.from) });
            }
            if !(0.0..=100.0).contains(&l.length) {
                return Err(Error::InvalidConfig { key: "concepts.links".into(), reason: format!("length {} outside [0,100]", l.length) });
            }
            edges.push((from, to, (100.0 - l.length) / 100.0));
        }
        Ok(Slipnet { nodes, edges, index, params })
    }

    pub fn params(&self) -> &SlipnetParams {
        &self.params
    }

    pub fn nodes(&self) -> &[SlipnetNode] {
        &self.nodes
    }

    pub fn activation(&self, concept: &str) -> Option<f64> {
        self.index.get(concept).map(|&i| self.nodes[i].activation)
    }

    pub fn total_activation(&self) -> f64 {
        self.nodes.iter().map(|n| n.activation).sum()
    }

    fn decay_factor(&self, node: &SlipnetNode) -> f64 {
        1.0 - (100.0 - node.depth) / 100.0 * self.params.decay
    }

    /// Checks that, without cueing, one spread step never increases total
    /// activation: for every node, ρ · Σ_out w · (1 - λ_target) ≤ λ_self.
    pub fn check_dissipative(&self) -> Result<()> {
        let mut outflow = vec![0.0f64; self.nodes.len()];
        for &(from, to, w) in &self.edges {
            outflow[from] += self.params.spread_rate * w * self.decay_factor(&self.nodes[to]);
        }
        for (node, out) in self.nodes.iter().zip(outflow) {
            let lambda = 1.0 - self.decay_factor(node);
            if out > lambda + 1e-12 {
                return Err(Error::NotDissipative(node.concept.clone()));
            }
        }
        Ok(())
    }

    pub fn activate(&mut self, concept: &str, amount: f64) -> Result<()> {
        let idx = *self.index.get(concept).ok_or_else(|| Error::UnmappedConcept(concept.to_string()))?;
        let node = &mut self.nodes[idx];
        node.activation = (node.activation + amount.max(0.0)).clamp(0.0, MAX_ACTIVATION);
        Ok(())
    }

    /// One synchronous spread-then-decay step computed from a snapshot.
    pub fn spread_step(&mut self) {
        let snapshot: Vec<f64> = self.nodes.iter().map(|n| n.activation).collect();
        let mut incoming = vec![0.0f64; self.nodes.len()];
        for &(from, to, w) in &self.edges {
            incoming[to] += snapshot[from] * self.params.spread_rate * w;
        }
        for i in 0..self.nodes.len() {
            let factor = self.decay_factor(&self.nodes[i]);
            self.nodes[i].activation = ((snapshot[i] + incoming[i]) * factor).clamp(0.0, MAX_ACTIVATION);
        }
    }

    /// Activates concepts mentioned by working memory, spreads, and returns
    /// the premises of every node at or above threshold.
    pub fn cue(&mut self, wm_contents: &PremiseSet, steps: usize) -> PremiseSet {
        let mentioned: BTreeSet<usize> = wm_contents
            .iter()
            .flat_map(|p| p.mentions())
            .filter_map(|m| self.index.get(m).copied())
            .collect();
        for idx in mentioned {
            let node = &mut self.nodes[idx];
            node.activation = (node.activation + self.params.injection).min(MAX_ACTIVATION);
        }
        for _ in 0..steps {
            self.spread_step();
        }
        self.nodes
            .iter()
            .filter(|n| n.activation >= self.params.threshold)
            .flat_map(|n| n.emitted_premises.iter().cloned())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(concept: &str, depth: f64, emits: &[&str]) -> ConceptNode {
        ConceptNode {
            concept: concept.into(),
            depth,
            emitted_premises: emits.iter().map(|s| s.parse().unwrap()).collect(),
        }
    }

    fn link(from: &str, to: &str, length: f64) -> ConceptLink {
        ConceptLink { from: from.into(), to: to.into(), length }
    }

    #[test]
    fn activate_clamps_and_rejects_unknown() {
        let g = ConceptGraph { nodes: vec![node("c", 0.0, &[])], links: vec![] };
        let mut net = Slipnet::new(&g, SlipnetParams::default()).unwrap();
        net.activate("c", 100.0).unwrap();
        assert_eq!(net.activation("c"), Some(100.0));
        let mut net = Slipnet::new(&g, SlipnetParams::default()).unwrap();
        net.activate("c", 90.0).unwrap();
        net.activate("c", 50.0).unwrap();
        assert_eq!(net.activation("c"), Some(100.0));
        net.activate("c", 0.0).unwrap();
        assert_eq!(net.activation("c"), Some(100.0));
        assert_eq!(net.activate("nope", 1.0), Err(Error::UnmappedConcept("nope".into())));
    }

    #[test]
    fn isolated_node_decays_by_ten_percent() {
        let g = ConceptGraph { nodes: vec![node("c", 0.0, &[])], links: vec![] };
        let mut net = Slipnet::new(&g, SlipnetParams::default()).unwrap();
        net.activate("c", 100.0).unwrap();
        net.spread_step();
        assert!((net.activation("c").unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn zero_length_link_passes_twenty_percent() {
        // target at depth 100 does not decay, so the gain is visible directly
        let g = ConceptGraph {
            nodes: vec![node("a", 100.0, &[]), node("b", 100.0, &[])],
            links: vec![link("a", "b", 0.0)],
        };
        let mut net = Slipnet::new(&g, SlipnetParams::default()).unwrap();
        net.activate("a", 100.0).unwrap();
        net.spread_step();
        assert!((net.activation("b").unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(net.activation("a"), Some(100.0));
    }

    #[test]
    fn full_length_link_passes_nothing() {
        let g = ConceptGraph {
            nodes: vec![node("a", 100.0, &[]), node("b", 100.0, &[])],
            links: vec![link("a", "b", 100.0)],
        };
        let mut net = Slipnet::new(&g, SlipnetParams::default()).unwrap();
        net.activate("a", 100.0).unwrap();
        net.spread_step();
        assert_eq!(net.activation("b"), Some(0.0));
    }

    #[test]
    fn cue_semantics() {
        let g = ConceptGraph {
            nodes: vec![node("c1", 100.0, &["p1"]), node("c2", 0.0, &["p2"])],
            links: vec![link("c1", "c2", 0.0)],
        };
        let params = SlipnetParams::default();
        let mut net = Slipnet::new(&g, params).unwrap();
        assert!(net.cue(&PremiseSet::new(), 3).is_empty());

        let wm: PremiseSet = ["see(c1)".parse().unwrap()].into_iter().collect();
        let mut net = Slipnet::new(&g, params).unwrap();
        assert_eq!(net.cue(&wm, 0), ["p1".parse().unwrap()].into_iter().collect());

        let mut net = Slipnet::new(&g, params).unwrap();
        let out = net.cue(&wm, 1);
        assert!(net.activation("c2").unwrap() < 50.0);
        assert_eq!(out, ["p1".parse().unwrap()].into_iter().collect());
    }

    #[test]
    fn rejects_self_links_and_bad_lengths() {
        let g = ConceptGraph { nodes: vec![node("a", 0.0, &[])], links: vec![link("a", "a", 10.0)] };
        assert!(Slipnet::new(&g, SlipnetParams::default()).is_err());
        let g = ConceptGraph {
            nodes: vec![node("a", 0.0, &[]), node("b", 0.0, &[])],
            links: vec![link("a", "b", 120.0)],
        };
        assert!(Slipnet::new(&g, SlipnetParams::default()).is_err());
    }

    #[test]
    fn generated_graph_is_dissipative() {
        use crate::catalog::Catalog;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cat = Catalog::chain_domain(10, 3, &mut rng);
        let net = Slipnet::new(cat.concepts(), SlipnetParams::default()).unwrap();
        net.check_dissipative().unwrap();
        assert!(net.activation("svc.A03").is_some());
        assert!(net.activation("d02").is_some());

        let dense = ConceptGraph {
            nodes: vec![node("a", 0.0, &[]), node("b", 0.0, &[]), node("c", 0.0, &[])],
            links: vec![link("a", "b", 0.0), link("a", "c", 0.0)],
        };
        let net = Slipnet::new(&dense, SlipnetParams::default()).unwrap();
        assert_eq!(net.check_dissipative(), Err(Error::NotDissipative("a".into())));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn activations_stay_bounded(
                lengths in prop::collection::vec(0.0f64..100.0, 6),
                depths in prop::collection::vec(0.0f64..100.0, 4),
                kicks in prop::collection::vec((0usize..4, 0.0f64..200.0), 0..20),
            ) {
                let names = ["a", "b", "c", "d"];
                let nodes = names.iter().zip(&depths).map(|(n, d)| node(n, *d, &[])).collect();
                let pairs = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)];
                let links = pairs.iter().zip(&lengths).map(|((f, t), l)| link(names[*f], names[*t], *l)).collect();
                let mut net = Slipnet::new(&ConceptGraph { nodes, links }, SlipnetParams::default()).unwrap();
                for (i, amount) in kicks {
                    net.activate(names[i], amount).unwrap();
                    net.spread_step();
                    for n in net.nodes() {
                        prop_assert!((0.0..=100.0).contains(&n.activation));
                    }
                }
            }

            #[test]
            fn dissipative_graphs_do_not_gain(start in prop::collection::vec(0.0f64..100.0, 3)) {
                use crate::catalog::Catalog;
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
                let cat = Catalog::chain_domain(3, 1, &mut rng);
                let mut net = Slipnet::new(cat.concepts(), SlipnetParams::default()).unwrap();
                let concepts: Vec<String> = net.nodes().iter().map(|n| n.concept.clone()).collect();
                for (c, a) in concepts.iter().zip(&start) {
                    net.activate(c, *a).unwrap();
                }
                for _ in 0..10 {
                    let before = net.total_activation();
                    net.spread_step();
                    prop_assert!(net.total_activation() <= before + 1e-9);
                }
            }
        }
    }
}
