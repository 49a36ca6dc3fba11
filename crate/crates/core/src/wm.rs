//! Working memory: a capacity-bounded premise store whose retention is
//! governed by base-level activation `B = ln Σ_j (t_now - t_j)^(-d)`.

use serde::{Deserialize, Serialize};

use crate::service::{Premise, PremiseSet};

/// Age floor; removes the singularity of a zero-age access.
pub const AGE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemSource {
    Percept,
    Declarative,
    Rehearsal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmItem {
    pub premise: Premise,
    /// Ascending; never empty.
    pub access_times: Vec<f64>,
    pub injection_strength: f64,
    pub source: ItemSource,
}

impl WmItem {
    pub fn last_access(&self) -> f64 {
        *self.access_times.last().expect("access_times is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmConfig {
    pub capacity: usize,
    pub decay: f64,
    pub threshold: f64,
    /// Access times kept per item; older ones are dropped.
    pub history: usize,
}

impl Default for WmConfig {
    fn default() -> Self {
        WmConfig { capacity: 12, decay: 0.5, threshold: -2.0, history: 16 }
    }
}

pub fn base_level_activation(item: &WmItem, t_now: f64, decay: f64) -> f64 {
    let sum: f64 = item
        .access_times
        .iter()
        .map(|&t| (t_now - t).max(AGE_EPSILON).powf(-decay))
        .sum();
    sum.ln()
}

#[derive(Debug, Clone)]
pub struct WorkingMemory {
    items: Vec<WmItem>,
    config: WmConfig,
}

impl WorkingMemory {
    pub fn new(config: WmConfig) -> Self {
        assert!(config.capacity > 0, "working memory capacity must be positive");
        assert!(config.decay > 0.0 && config.decay < 1.0, "decay must lie in (0,1)");
        assert!(config.history > 0);
        WorkingMemory { items: Vec::with_capacity(config.capacity + 1), config }
    }

    pub fn config(&self) -> &WmConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[WmItem] {
        &self.items
    }

    pub fn get(&self, premise: &Premise) -> Option<&WmItem> {
        self.items.iter().find(|i| &i.premise == premise)
    }

    pub fn activation(&self, premise: &Premise, t_now: f64) -> Option<f64> {
        self.get(premise).map(|i| base_level_activation(i, t_now, self.config.decay))
    }

    /// Adds or refreshes `premise`; returns the evicted premise if capacity
    /// was exceeded.
    pub fn inject(&mut self, premise: Premise, t_now: f64, strength: f64, source: ItemSource) -> Option<Premise> {
        let strength = strength.clamp(0.0, 1.0);
        if let Some(item) = self.items.iter_mut().find(|i| i.premise == premise) {
            let last = item.last_access();
            item.access_times.push(t_now.max(last));
            if item.access_times.len() > self.config.history {
                item.access_times.remove(0);
            }
            item.injection_strength = item.injection_strength.max(strength);
            return None;
        }
        self.items.push(WmItem { premise, access_times: vec![t_now], injection_strength: strength, source });
        if self.items.len() > self.config.capacity {
            let victim = self.eviction_candidate(t_now);
            return Some(self.items.swap_remove(victim).premise);
        }
        None
    }

    /// The item a new premise would displace at `t_now`, if memory is full.
    pub fn would_evict(&self, t_now: f64) -> Option<&Premise> {
        (self.items.len() >= self.config.capacity && !self.items.is_empty())
            .then(|| &self.items[self.eviction_candidate(t_now)].premise)
    }

    // Lowest activation; then older latest access; then lexicographically smallest premise.
    fn eviction_candidate(&self, t_now: f64) -> usize {
        let decay = self.config.decay;
        let mut best = 0;
        let mut best_key = (f64::INFINITY, f64::INFINITY);
        for (idx, item) in self.items.iter().enumerate() {
            let key = (base_level_activation(item, t_now, decay), item.last_access());
            let better = key.0 < best_key.0
                || (key.0 == best_key.0 && key.1 < best_key.1)
                || (key == best_key && item.premise < self.items[best].premise);
            if better {
                best = idx;
                best_key = key;
            }
        }
        best
    }

    pub fn remove(&mut self, premise: &Premise) -> bool {
        match self.items.iter().position(|i| &i.premise == premise) {
            Some(idx) => {
                self.items.swap_remove(idx);
                true
            }
            None => false,
        }
    }

    /// Active premises (activation ≥ threshold), strongest first.
    pub fn contents(&self, t_now: f64) -> Vec<Premise> {
        let decay = self.config.decay;
        let mut ranked: Vec<(f64, &Premise)> = self
            .items
            .iter()
            .map(|i| (base_level_activation(i, t_now, decay), &i.premise))
            .filter(|(a, _)| *a >= self.config.threshold)
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        ranked.into_iter().map(|(_, p)| p.clone()).collect()
    }

    pub fn content_set(&self, t_now: f64) -> PremiseSet {
        self.contents(t_now).into_iter().collect()
    }
}
