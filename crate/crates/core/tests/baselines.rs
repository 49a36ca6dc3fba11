use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cogcomp::baselines::{BackwardChainer, BaselineParams, Variant};
use cogcomp::catalog::{abstract_name, Catalog};
use cogcomp::harness::scenario_catalog;
use cogcomp::perception::RequestId;
use cogcomp::service::{NodeId, ServiceId};
use cogcomp::sim::{Composer, MsgKind, NetMessage, RunSummary, SimConfig, Simulator, SpeedBand, World};

/// Forwards to `inner`; takes the hosts of `victims` down when the first
/// execution hop arrives.
struct Saboteur<C> {
    inner: C,
    victims: Vec<ServiceId>,
    fired: bool,
}

impl<C: Composer> Composer for Saboteur<C> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }
    fn wants_adverts(&self) -> bool {
        self.inner.wants_adverts()
    }
    fn on_request(&mut self, world: &mut World, request: &cogcomp::perception::CompositionRequest) {
        self.inner.on_request(world, request)
    }
    fn on_message(&mut self, world: &mut World, msg: NetMessage) {
        if msg.kind == MsgKind::Invoke && !self.fired {
            self.fired = true;
            for v in &self.victims {
                let host = world.deployment().host_of(v).expect("victim is deployed");
                world.depart(host);
            }
        }
        self.inner.on_message(world, msg)
    }
    fn on_drop(&mut self, world: &mut World, msg: NetMessage) {
        self.inner.on_drop(world, msg)
    }
    fn on_timer(&mut self, world: &mut World, node: NodeId, token: u64) {
        self.inner.on_timer(world, node, token)
    }
    fn on_expire(&mut self, world: &mut World, request: RequestId) {
        self.inner.on_expire(world, request)
    }
    fn footprint(&self) -> usize {
        self.inner.footprint()
    }
}

fn static_connected(stages: usize, members: usize, chain: usize, seed: u64) -> SimConfig {
    SimConfig {
        mobility: SpeedBand::STATIC,
        radio_range: 1000.0,
        stages,
        members_per_stage: members,
        density: stages * members,
        providers: Some(stages * members * 2),
        chain_length: chain,
        requests: 1,
        horizon: 30.0,
        seed,
        ..SimConfig::default()
    }
}

fn run(cfg: &SimConfig, variant: Variant, victims: &[ServiceId]) -> RunSummary {
    let catalog = scenario_catalog(cfg);
    let inner = BackwardChainer::new(variant, catalog.clone());
    let composer = Saboteur { inner, victims: victims.to_vec(), fired: false };
    Simulator::new(cfg.clone(), catalog, composer).unwrap().run().0
}

fn members(catalog: &Catalog, stage: usize) -> Vec<ServiceId> {
    catalog.abstract_service(&abstract_name(stage)).unwrap().members.clone()
}

/// A seed whose deployment puts every deployed service on its own node.
fn spread_seed(stages: usize, members_per_stage: usize) -> SimConfig {
    (1..200)
        .map(|seed| static_connected(stages, members_per_stage, stages, seed))
        .find(|cfg| {
            let world = World::new(cfg.clone(), scenario_catalog(cfg)).unwrap();
            let mut hosts: Vec<NodeId> = world.deployment().services().map(|(_, n)| n).collect();
            hosts.sort();
            hosts.dedup();
            hosts.len() == cfg.density
        })
        .expect("some seed spreads services out")
}

#[test]
fn static_chains_succeed() {
    for variant in [Variant::GoCoMo, Variant::CoopC] {
        for chain in [1, 5] {
            let cfg = SimConfig { requests: 5, horizon: 80.0, ..static_connected(5, 2, chain, 3) };
            let s = run(&cfg, variant, &[]);
            assert_eq!((s.issued(), s.failed()), (5, 0), "{variant:?} CL-{chain}");
        }
    }
}

#[test]
fn zero_reachable_providers_fail_at_planning() {
    let cfg = static_connected(5, 1, 5, 1);
    let catalog = scenario_catalog(&cfg);
    for variant in [Variant::GoCoMo, Variant::CoopC] {
        let mut sim = Simulator::new(cfg.clone(), catalog.clone(), BackwardChainer::new(variant, catalog.clone())).unwrap();
        for node in 1..sim.world.nodes().len() as NodeId {
            sim.world.depart(node);
        }
        let (s, world, _) = sim.run();
        assert_eq!(s.failed(), 1);
        assert_eq!(world.records().next().unwrap().finished.unwrap().0, cfg.warmup + cfg.deadline);
    }
}

#[test]
fn sole_mid_chain_provider_loss_fails_both() {
    let cfg = spread_seed(5, 1);
    let victim = members(&scenario_catalog(&cfg), 3);
    let deadline = cfg.warmup + cfg.deadline;

    let adaptive = run(&cfg, Variant::GoCoMo, &victim);
    let done = adaptive.requests[0].finished.unwrap();
    // re-discovery keeps trying until the deadline
    assert_eq!(done, (deadline, false));

    let frozen = run(&cfg, Variant::CoopC, &victim);
    let done = frozen.requests[0].finished.unwrap();
    assert!(!done.1);
    assert!(done.0 < deadline, "frozen plan should fail on the broken hop, not the deadline");
}

#[test]
fn rediscovery_rescues_what_a_frozen_plan_loses() {
    let cfg = spread_seed(5, 2);
    // ties between equivalent members go to the smaller id
    let victim = vec![members(&scenario_catalog(&cfg), 3).into_iter().min().unwrap()];
    assert_eq!(run(&cfg, Variant::GoCoMo, &victim).failed(), 0);
    assert_eq!(run(&cfg, Variant::CoopC, &victim).failed(), 1);
    assert_eq!(run(&cfg, Variant::CoopC, &[]).failed(), 0);
}

#[test]
fn adaptation_only_adds_successes() {
    let frozen = BaselineParams::for_variant(Variant::CoopC);
    let adaptive = BaselineParams { adapt: true, ..frozen };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut rescued, mut scenarios) = (0, 0);
    for _ in 0..120 {
        let cfg = SimConfig {
            seed: rng.gen(),
            density: [20, 40, 60][rng.gen_range(0..3)],
            chain_length: [5, 10][rng.gen_range(0..2)],
            mobility: [SpeedBand::SLOW, SpeedBand::MEDIUM, SpeedBand::FAST][rng.gen_range(0..3)],
            requests: 4,
            horizon: 65.0,
            ..SimConfig::default()
        };
        let catalog: Arc<Catalog> = scenario_catalog(&cfg);
        let outcome = |params| {
            let c = BackwardChainer::with_params(Variant::CoopC, params, catalog.clone());
            let (s, _, _) = Simulator::new(cfg.clone(), catalog.clone(), c).unwrap().run();
            s.requests.iter().map(|r| r.succeeded()).collect::<Vec<_>>()
        };
        let (a, b) = (outcome(frozen), outcome(adaptive));
        for (i, (&f, &ad)) in a.iter().zip(&b).enumerate() {
            assert!(!f || ad, "seed {} request {i}: frozen plan succeeded, adaptive one failed", cfg.seed);
            rescued += usize::from(ad && !f);
        }
        scenarios += 1;
    }
    assert!(scenarios >= 100);
    assert!(rescued > 0, "no scenario exercised adaptation");
}
