//! Behavior network for selective attention. One behavior per abstract
//! service; activation flows in from working-memory state and goals, is taken
//! away by protected goals, and spreads along successor, predecessor and
//! conflicter links. Selection picks the strongest executable behavior above
//! a threshold that decays while nothing qualifies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::service::{AbstractService, PremiseSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnParams {
    /// Mean activation level.
    pub pi: f64,
    /// Selection threshold.
    pub theta: f64,
    /// Injection per working-memory premise.
    pub phi: f64,
    /// Injection per goal premise.
    pub gamma: f64,
    /// Takeaway per protected goal.
    pub delta: f64,
    pub sigma_forward: f64,
    pub sigma_backward: f64,
    pub sigma_conflict: f64,
}

impl Default for BnParams {
    fn default() -> Self {
        BnParams {
            pi: 20.0,
            theta: 45.0,
            phi: 20.0,
            gamma: 70.0,
            delta: 50.0,
            sigma_forward: 1.0,
            sigma_backward: 0.7,
            sigma_conflict: 0.5,
        }
    }
}

impl BnParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.pi,
            self.theta,
            self.phi,
            self.gamma,
            self.delta,
            self.sigma_forward,
            self.sigma_backward,
            self.sigma_conflict,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.pi <= 0.0 || self.theta <= 0.0 {
            return Err(Error::InvalidParams("pi and theta must be positive".into()));
        }
        if all[2..].iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParams("injection and spread parameters must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    pub id: String,
    pub pre: PremiseSet,
    pub add: PremiseSet,
    pub delete: PremiseSet,
    pub activation: f64,
}

impl Behavior {
    pub fn new(id: impl Into<String>, pre: PremiseSet, add: PremiseSet, delete: PremiseSet) -> Result<Self> {
        let id = id.into();
        if !add.is_disjoint(&delete) {
            return Err(Error::AddDeleteOverlap(id));
        }
        Ok(Behavior { id, pre, add, delete, activation: 0.0 })
    }

    pub fn executable(&self, state: &PremiseSet) -> bool {
        self.pre.is_subset(state)
    }
}

/// Activations before floor and normalization, kept for traces and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub raw: Vec<f64>,
}

/// One row of the per-cycle activation dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationRow {
    pub cycle: u64,
    pub behavior: String,
    pub activation: f64,
    pub executable: bool,
    pub selected: bool,
}

#[derive(Debug, Clone)]
pub struct BehaviorNetwork {
    behaviors: Vec<Behavior>,
    params: BnParams,
    theta_current: f64,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
    conflicters: Vec<Vec<usize>>,
}

impl BehaviorNetwork {
    pub fn from_abstracts(abstracts: &[AbstractService], params: BnParams) -> Result<Self> {
        let behaviors = abstracts
            .iter()
            .map(|a| Behavior::new(a.id.clone(), a.pre.clone(), a.post.clone(), a.post_negative.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(behaviors, params)
    }

    pub fn new(mut behaviors: Vec<Behavior>, params: BnParams) -> Result<Self> {
        params.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for b in &behaviors {
            if !seen.insert(b.id.clone()) {
                return Err(Error::DuplicateId(b.id.clone()));
            }
            if !b.add.is_disjoint(&b.delete) {
                return Err(Error::AddDeleteOverlap(b.id.clone()));
            }
        }
        let n = behaviors.len();
        let mut successors = vec![Vec::new(); n];
        let mut predecessors = vec![Vec::new(); n];
        let mut conflicters = vec![Vec::new(); n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                if !behaviors[a].add.is_disjoint(&behaviors[b].pre) {
                    successors[a].push(b);
                }
                if !behaviors[a].pre.is_disjoint(&behaviors[b].add) {
                    predecessors[a].push(b);
                }
                if !behaviors[a].pre.is_disjoint(&behaviors[b].delete) {
                    conflicters[a].push(b);
                }
            }
        }
        for b in &mut behaviors {
            b.activation = params.pi;
        }
        Ok(BehaviorNetwork { behaviors, params, theta_current: params.theta, successors, predecessors, conflicters })
    }

    pub fn behaviors(&self) -> &[Behavior] {
        &self.behaviors
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }

    pub fn params(&self) -> &BnParams {
        &self.params
    }

    /// Swaps parameters (regime change); resets the runtime threshold.
    pub fn set_params(&mut self, params: BnParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        self.theta_current = params.theta;
        Ok(())
    }

    pub fn theta_current(&self) -> f64 {
        self.theta_current
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.behaviors.iter().position(|b| b.id == id)
    }

    pub fn activation(&self, id: &str) -> Option<f64> {
        self.index_of(id).map(|i| self.behaviors[i].activation)
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.successors[idx]
    }

    pub fn predecessors(&self, idx: usize) -> &[usize] {
        &self.predecessors[idx]
    }

    pub fn conflicters(&self, idx: usize) -> &[usize] {
        &self.conflicters[idx]
    }

    /// Sets all activations back to the mean level.
    pub fn reset(&mut self) {
        for b in &mut self.behaviors {
            b.activation = self.params.pi;
        }
        self.theta_current = self.params.theta;
    }

    /// One synchronous update computed from the current activations.
    pub fn activation_step(&mut self, state: &PremiseSet, goals: &PremiseSet, protected: &PremiseSet) -> StepReport {
        let n = self.behaviors.len();
        if n == 0 {
            return StepReport { raw: Vec::new() };
        }
        let p = self.params;
        let snapshot: Vec<f64> = self.behaviors.iter().map(|b| b.activation).collect();
        let mut delta = vec![0.0f64; n];

        for premise in state {
            let matching: Vec<usize> = (0..n).filter(|&i| self.behaviors[i].pre.contains(premise)).collect();
            for &i in &matching {
                delta[i] += p.phi / matching.len() as f64;
            }
        }
        for goal in goals {
            let achievers: Vec<usize> = (0..n).filter(|&i| self.behaviors[i].add.contains(goal)).collect();
            for &i in &achievers {
                delta[i] += p.gamma / achievers.len() as f64;
            }
        }
        for q in protected {
            let threats: Vec<usize> = (0..n).filter(|&i| self.behaviors[i].delete.contains(q)).collect();
            for &i in &threats {
                delta[i] -= p.delta / threats.len() as f64;
            }
        }

        for i in 0..n {
            let b = &self.behaviors[i];
            let alpha = snapshot[i];
            if b.executable(state) {
                // (successor, premise) pairs where this behavior would satisfy an open precondition
                let behaviors = &self.behaviors;
                let pairs: Vec<usize> = self.successors[i]
                    .iter()
                    .flat_map(|&s| {
                        b.add
                            .iter()
                            .filter(move |q| !state.contains(*q) && behaviors[s].pre.contains(*q))
                            .map(move |_| s)
                    })
                    .collect();
                if !pairs.is_empty() {
                    let share = p.sigma_forward * alpha / pairs.len() as f64;
                    for s in pairs {
                        delta[s] += share;
                    }
                }
            } else {
                let unsatisfied: Vec<_> = b.pre.iter().filter(|q| !state.contains(*q)).collect();
                let per_premise = p.sigma_backward * alpha / unsatisfied.len() as f64;
                for q in unsatisfied {
                    let achievers: Vec<usize> =
                        self.predecessors[i].iter().copied().filter(|&j| self.behaviors[j].add.contains(q)).collect();
                    for &j in &achievers {
                        delta[j] += per_premise / achievers.len() as f64;
                    }
                }
            }
            if !self.conflicters[i].is_empty() {
                let share = p.sigma_conflict * alpha / self.conflicters[i].len() as f64;
                for &c in &self.conflicters[i] {
                    delta[c] -= share;
                }
            }
        }

        let raw: Vec<f64> = snapshot.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let floored: Vec<f64> = raw.iter().map(|a| a.max(0.0)).collect();
        let sum: f64 = floored.iter().sum();
        for (b, a) in self.behaviors.iter_mut().zip(&floored) {
            b.activation = if sum > 0.0 { a * p.pi * n as f64 / sum } else { p.pi };
        }
        StepReport { raw }
    }

    pub fn select_behavior(&mut self, state: &PremiseSet) -> Option<String> {
        self.select_behavior_where(state, |_| true)
    }

    /// Like [`BehaviorNetwork::select_behavior`], restricted to behaviors
    /// accepted by `eligible`.
    pub fn select_behavior_where(&mut self, state: &PremiseSet, eligible: impl Fn(&Behavior) -> bool) -> Option<String> {
        let mut best: Option<usize> = None;
        for (i, b) in self.behaviors.iter().enumerate() {
            if !b.executable(state) || b.activation < self.theta_current || !eligible(b) {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(j) => {
                    let cur = &self.behaviors[j];
                    if b.activation > cur.activation || (b.activation == cur.activation && b.id < cur.id) {
                        Some(i)
                    } else {
                        Some(j)
                    }
                }
            };
        }
        match best {
            Some(i) => {
                self.behaviors[i].activation = 0.0;
                self.theta_current = self.params.theta;
                Some(self.behaviors[i].id.clone())
            }
            None => {
                self.theta_current *= 0.9;
                None
            }
        }
    }

    pub fn dump(&self, cycle: u64, state: &PremiseSet, selected: Option<&str>) -> Vec<ActivationRow> {
        self.behaviors
            .iter()
            .map(|b| ActivationRow {
                cycle,
                behavior: b.id.clone(),
                activation: b.activation,
                executable: b.executable(state),
                selected: selected == Some(b.id.as_str()),
            })
            .collect()
    }

    /// Bytes of live activation state.
    pub fn footprint(&self) -> usize {
        self.behaviors.len() * std::mem::size_of::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::Premise;

    fn set(items: &[&str]) -> PremiseSet {
        items.iter().map(|s| s.parse::<Premise>().unwrap()).collect()
    }

    fn beh(id: &str, pre: &[&str], add: &[&str], del: &[&str]) -> Behavior {
        Behavior::new(id, set(pre), set(add), set(del)).unwrap()
    }

    fn mean(net: &BehaviorNetwork) -> f64 {
        net.behaviors().iter().map(|b| b.activation).sum::<f64>() / net.len() as f64
    }

    #[test]
    fn link_derivation() {
        let net = BehaviorNetwork::new(vec![beh("A", &[], &["x"], &[]), beh("B", &["x"], &[], &[])], BnParams::default())
            .unwrap();
        assert_eq!(net.successors(0), &[1]);
        assert_eq!(net.predecessors(1), &[0]);
        assert!(net.successors(1).is_empty());

        let net = BehaviorNetwork::new(vec![beh("A", &[], &[], &["x"]), beh("B", &["x"], &[], &[])], BnParams::default())
            .unwrap();
        assert_eq!(net.conflicters(1), &[0]);
        assert!(net.conflicters(0).is_empty());

        let single = BehaviorNetwork::new(vec![beh("A", &["x"], &["x2"], &[])], BnParams::default()).unwrap();
        assert!(single.successors(0).is_empty() && single.predecessors(0).is_empty());
    }

    #[test]
    fn construction_errors() {
        let dup = BehaviorNetwork::new(vec![beh("A", &[], &[], &[]), beh("A", &[], &[], &[])], BnParams::default());
        assert_eq!(dup.unwrap_err(), Error::DuplicateId("A".into()));
        assert_eq!(Behavior::new("A", set(&[]), set(&["x"]), set(&["x"])).unwrap_err(), Error::AddDeleteOverlap("A".into()));
        let bad = BnParams { pi: 0.0, ..BnParams::default() };
        assert!(BehaviorNetwork::new(vec![], bad).is_err());
    }

    #[test]
    fn fresh_net_keeps_mean() {
        let mut net = BehaviorNetwork::new(
            vec![beh("A", &["a"], &["b"], &[]), beh("B", &["b"], &["c"], &[])],
            BnParams::default(),
        )
        .unwrap();
        net.activation_step(&PremiseSet::new(), &PremiseSet::new(), &PremiseSet::new());
        assert!((mean(&net) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn single_goal_closed_form() {
        let params = BnParams { phi: 0.0, ..BnParams::default() };
        let mut net = BehaviorNetwork::new(vec![beh("A", &[], &["g"], &[])], params).unwrap();
        let report = net.activation_step(&PremiseSet::new(), &set(&["g"]), &PremiseSet::new());
        assert_eq!(report.raw, vec![20.0 + 70.0]);
        assert!((net.behaviors()[0].activation - 20.0).abs() < 1e-12);
    }

    #[test]
    fn protected_goal_takes_away() {
        let mut net = BehaviorNetwork::new(vec![beh("A", &[], &[], &["g"]), beh("B", &[], &[], &[])], BnParams::default())
            .unwrap();
        let report = net.activation_step(&PremiseSet::new(), &PremiseSet::new(), &set(&["g"]));
        assert_eq!(report.raw, vec![20.0 - 50.0, 20.0]);
        assert_eq!(net.behaviors()[0].activation, 0.0);
        assert!((net.behaviors()[1].activation - 40.0).abs() < 1e-12);
    }

    #[test]
    fn selection_rules() {
        let mut empty = BehaviorNetwork::new(vec![], BnParams::default()).unwrap();
        assert_eq!(empty.select_behavior(&PremiseSet::new()), None);
        assert!((empty.theta_current() - 40.5).abs() < 1e-12);

        let mut net = BehaviorNetwork::new(vec![beh("A", &[], &["x"], &[])], BnParams::default()).unwrap();
        net.behaviors[0].activation = 45.0;
        assert_eq!(net.select_behavior(&PremiseSet::new()).as_deref(), Some("A"));
        assert_eq!(net.behaviors()[0].activation, 0.0);

        let mut net =
            BehaviorNetwork::new(vec![beh("b", &[], &[], &[]), beh("a", &[], &[], &[])], BnParams::default()).unwrap();
        net.behaviors[0].activation = 50.0;
        net.behaviors[1].activation = 50.0;
        assert_eq!(net.select_behavior(&PremiseSet::new()).as_deref(), Some("a"));
        assert_eq!(net.theta_current(), 45.0);
    }

    #[test]
    fn non_executable_never_selected() {
        let mut net = BehaviorNetwork::new(vec![beh("A", &["x"], &["y"], &[])], BnParams::default()).unwrap();
        net.behaviors[0].activation = 100.0;
        assert_eq!(net.select_behavior(&PremiseSet::new()), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_net() -> impl Strategy<Value = Vec<(Vec<u8>, Vec<u8>, Vec<u8>)>> {
            prop::collection::vec(
                (
                    prop::collection::vec(0u8..8, 0..3),
                    prop::collection::vec(0u8..8, 0..3),
                    prop::collection::vec(8u8..12, 0..2),
                ),
                0..20,
            )
        }

        fn build(spec: &[(Vec<u8>, Vec<u8>, Vec<u8>)]) -> Vec<Behavior> {
            let s = |v: &Vec<u8>| -> PremiseSet { v.iter().map(|i| Premise::atom(format!("p{i}"))).collect() };
            spec.iter().enumerate().map(|(i, (p, a, d))| Behavior::new(format!("b{i:02}"), s(p), s(a), s(d)).unwrap()).collect()
        }

        proptest! {
            #[test]
            fn links_match_pairwise_oracle(spec in random_net()) {
                let behaviors = build(&spec);
                let net = BehaviorNetwork::new(behaviors.clone(), BnParams::default()).unwrap();
                for a in 0..behaviors.len() {
                    let succ: Vec<usize> = (0..behaviors.len())
                        .filter(|&b| b != a && behaviors[a].add.intersection(&behaviors[b].pre).next().is_some())
                        .collect();
                    let pred: Vec<usize> = (0..behaviors.len())
                        .filter(|&b| b != a && behaviors[a].pre.intersection(&behaviors[b].add).next().is_some())
                        .collect();
                    let conf: Vec<usize> = (0..behaviors.len())
                        .filter(|&b| b != a && behaviors[a].pre.intersection(&behaviors[b].delete).next().is_some())
                        .collect();
                    prop_assert_eq!(net.successors(a), &succ[..]);
                    prop_assert_eq!(net.predecessors(a), &pred[..]);
                    prop_assert_eq!(net.conflicters(a), &conf[..]);
                }
            }

            #[test]
            fn mean_is_pi_and_selection_is_executable(
                spec in random_net(),
                states in prop::collection::vec(prop::collection::btree_set(0u8..12, 0..6), 1..15),
                goal in prop::collection::btree_set(0u8..12, 0..3),
            ) {
                let mut net = BehaviorNetwork::new(build(&spec), BnParams::default()).unwrap();
                let s = |v: &std::collections::BTreeSet<u8>| -> PremiseSet { v.iter().map(|i| Premise::atom(format!("p{i}"))).collect() };
                let goals = s(&goal);
                for st in &states {
                    let state = s(st);
                    net.activation_step(&state, &goals, &goals.intersection(&state).cloned().collect());
                    if !net.is_empty() {
                        prop_assert!((mean(&net) - 20.0).abs() < 1e-9);
                    }
                    prop_assert!(net.behaviors().iter().all(|b| b.activation >= 0.0));
                    if let Some(id) = net.select_behavior(&state) {
                        let b = &net.behaviors()[net.index_of(&id).unwrap()];
                        prop_assert!(b.pre.is_subset(&state));
                    }
                }
            }

            #[test]
            fn threshold_decay_is_live(act in 0.01f64..100.0) {
                let mut net = BehaviorNetwork::new(vec![beh("A", &[], &[], &[])], BnParams::default()).unwrap();
                net.behaviors[0].activation = act;
                let mut last = net.theta_current();
                let mut rounds = 0;
                loop {
                    match net.select_behavior(&PremiseSet::new()) {
                        Some(_) => break,
                        None => {
                            prop_assert!(net.theta_current() < last);
                            last = net.theta_current();
                        }
                    }
                    rounds += 1;
                    prop_assert!(rounds < 200);
                }
                prop_assert_eq!(net.theta_current(), 45.0);
            }
        }
    }
}
