//! Procedural memory: QoS-ranked discovery of concrete services for a
//! selected abstract service, and epsilon-greedy choice among behavior-network
//! parameter regimes with utility learning.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::BnParams;
use crate::error::{Error, Result};
use crate::service::{qos_score, AbstractService, ConcreteService, PremiseSet, QosCaps, QosWeights};

/// Score bonus for services with a performed-well premise in working memory.
pub const EPISODIC_BOOST: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    GoalOriented,
    ReactiveDeliberative,
    PlanBiased,
}

impl RegimeKind {
    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::GoalOriented => "goal-oriented",
            RegimeKind::ReactiveDeliberative => "reactive-deliberative",
            RegimeKind::PlanBiased => "plan-biased",
        }
    }

    pub fn admits(self, p: &BnParams) -> bool {
        match self {
            RegimeKind::GoalOriented => p.gamma > p.phi,
            RegimeKind::ReactiveDeliberative => p.phi > p.gamma && p.phi > p.theta,
            RegimeKind::PlanBiased => p.phi > p.pi && p.pi > p.gamma,
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime {
    kind: RegimeKind,
    params: BnParams,
    pub utility: f64,
    pub plays: u64,
}

impl Regime {
    pub fn new(kind: RegimeKind, params: BnParams) -> Result<Self> {
        params.validate()?;
        if !kind.admits(&params) {
            return Err(Error::RegimeConstraint(kind.name().into()));
        }
        Ok(Regime { kind, params, utility: 0.0, plays: 0 })
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    pub fn params(&self) -> &BnParams {
        &self.params
    }

    pub fn set_params(&mut self, params: BnParams) -> Result<()> {
        params.validate()?;
        if !self.kind.admits(&params) {
            return Err(Error::RegimeConstraint(self.kind.name().into()));
        }
        self.params = params;
        Ok(())
    }
}

/// Kind and behavior-network parameters of a configured regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    pub params: BnParams,
}

impl RegimeSpec {
    pub fn build(&self) -> Result<Regime> {
        Regime::new(self.kind, self.params)
    }
}

pub fn default_regime_specs() -> Vec<RegimeSpec> {
    let base = BnParams::default();
    vec![
        RegimeSpec { kind: RegimeKind::GoalOriented, params: base },
        RegimeSpec {
            kind: RegimeKind::ReactiveDeliberative,
            params: BnParams { pi: 20.0, theta: 30.0, phi: 60.0, gamma: 35.0, delta: 50.0, ..base },
        },
        RegimeSpec {
            kind: RegimeKind::PlanBiased,
            params: BnParams { pi: 40.0, theta: 45.0, phi: 60.0, gamma: 25.0, delta: 50.0, ..base },
        },
    ]
}

pub fn default_regimes() -> Vec<Regime> {
    default_regime_specs().iter().map(|s| s.build().expect("default satisfies constraint")).collect()
}

/// Index of the regime to play. Greedy with probability `1 - epsilon`
/// (ties go to declaration order), otherwise uniform over the others.
pub fn select_regime<R: Rng>(regimes: &[Regime], epsilon: f64, rng: &mut R) -> usize {
    assert!(!regimes.is_empty(), "no regimes to choose from");
    let mut best = 0;
    for (i, r) in regimes.iter().enumerate() {
        if r.utility > regimes[best].utility {
            best = i;
        }
    }
    if regimes.len() == 1 || !rng.gen_bool(epsilon.clamp(0.0, 1.0)) {
        return best;
    }
    let pick = rng.gen_range(0..regimes.len() - 1);
    if pick >= best {
        pick + 1
    } else {
        pick
    }
}

pub fn update_utility(regime: &mut Regime, reward: f64, rate: f64) {
    regime.utility += rate * (reward - regime.utility);
    regime.plays += 1;
}

/// Live members of `abs`, best first. `wm` supplies the episodic bias.
pub fn discover_concrete<'a>(
    abs: &AbstractService,
    live: &[&'a ConcreteService],
    weights: &QosWeights,
    caps: &QosCaps,
    wm: &PremiseSet,
) -> Vec<&'a ConcreteService> {
    let mut ranked: Vec<(f64, &ConcreteService)> = live
        .iter()
        .filter(|cs| abs.members.contains(&cs.id))
        .map(|cs| {
            let mut score = qos_score(&cs.qos, weights, caps).unwrap_or(0.0);
            let boosted = wm.iter().any(|p| {
                p.predicate() == "performed_well" && p.args().first().map(String::as_str) == Some(cs.id.as_str())
            });
            if boosted {
                score = (score + EPISODIC_BOOST).min(1.0);
            }
            (score, *cs)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    ranked.into_iter().map(|(_, cs)| cs).collect()
}
