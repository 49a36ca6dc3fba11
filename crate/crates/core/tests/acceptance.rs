//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cogcomp::behavior::{Behavior, BehaviorNetwork, BnParams};
use cogcomp::harness::{self, Cell, ChainLength, ComposerKind, Density, ExperimentConfig, Mobility, RunMetrics};
use cogcomp::procedural::{default_regime_specs, RegimeKind};
use cogcomp::sdm::{BitVector, Sdm};
use cogcomp::service::{Premise, PremiseSet};
use cogcomp::wm::{base_level_activation, ItemSource, WorkingMemory};

type Verdict = Result<String, String>;

const LENGTHS: [usize; 2] = [5, 10];
const DENSITIES: [usize; 3] = [20, 40, 60];
const MOBILITIES: [Mobility; 3] = [Mobility::Slow, Mobility::Medium, Mobility::Fast];

struct Grid {
    cfg: ExperimentConfig,
    cells: BTreeMap<(ComposerKind, usize, usize, Mobility), RunMetrics>,
}

impl Grid {
    fn run() -> Grid {
        let cfg = ExperimentConfig::default();
        let results = harness::run_experiment(&cfg).expect("grid runs");
        let cells = results
            .into_iter()
            .map(|r| ((r.cell.composer, r.cell.density.0, r.cell.length.0, r.cell.mobility), r.pooled))
            .collect();
        Grid { cfg, cells }
    }

    fn get(&self, c: ComposerKind, d: usize, l: usize, m: Mobility) -> &RunMetrics {
        &self.cells[&(c, d, l, m)]
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Verdict {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

fn memory_scaling(g: &Grid) -> Verdict {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for c in ComposerKind::ALL {
        let ratios: Vec<f64> = DENSITIES
            .iter()
            .flat_map(|&d| MOBILITIES.map(move |m| (d, m)))
            .map(|(d, m)| g.get(c, d, 10, m).mu_mean / g.get(c, d, 5, m).mu_mean)
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        summary.push(format!("{c} {mean:.3}"));
        let ok = match c {
            ComposerKind::Copernic => mean <= 1.20,
            _ => mean >= 1.5,
        };
        if !ok {
            failures.push(format!("{c} ratio {mean:.3} out of bound"));
        }
    }
    verdict(failures, format!("MU(CL-10)/MU(CL-5): {}", summary.join(", ")))
}

fn composition_time(g: &Grid) -> Verdict {
    let mut failures = Vec::new();
    let mut best = 0.0f64;
    for d in DENSITIES {
        for m in MOBILITIES {
            let [a, b, c] = ComposerKind::ALL.map(|k| g.get(k, d, 10, m).ct_mean);
            if !(a < b && b < c) {
                failures.push(format!("SD-{d} {m}: {a:.2} / {b:.2} / {c:.2}"));
            }
            best = best.max(1.0 - a / b);
        }
    }
    if best < 0.20 {
        failures.push(format!("best speedup over gocomo {:.0}%", best * 100.0));
    }
    verdict(failures, format!("CL-10 ordering, best speedup over gocomo {:.0}%", best * 100.0))
}

fn mobility_sensitivity(g: &Grid) -> Verdict {
    use ComposerKind::*;
    let mut failures = Vec::new();
    let mut gaps = Vec::new();
    for l in LENGTHS {
        let gap = |d, m| g.get(Copernic, d, l, m).pfr - g.get(Gocomo, d, l, m).pfr;
        let (fast_dense, slow_sparse) = (gap(60, Mobility::Fast), gap(20, Mobility::Slow));
        gaps.push(format!("CL-{l} gap M-F/SD-D {fast_dense:+.3} vs M-S/SD-S {slow_sparse:+.3}"));
        if fast_dense > slow_sparse {
            failures.push(format!("CL-{l} gap under M-F/SD-D exceeds the gap under M-S/SD-S"));
        }
    }
    for d in DENSITIES {
        for l in LENGTHS {
            for m in [Mobility::Medium, Mobility::Fast] {
                let (a, c) = (g.get(Copernic, d, l, m).pfr, g.get(Coopc, d, l, m).pfr);
                if a >= c {
                    failures.push(format!("SD-{d} CL-{l} {m}: copernic {a:.3} >= coopc {c:.3}"));
                }
            }
        }
    }
    verdict(failures, gaps.join(", "))
}

fn density_trend(g: &Grid) -> Verdict {
    let mut failures = Vec::new();
    let mut lows = Vec::new();
    for c in ComposerKind::ALL {
        for m in MOBILITIES {
            let mean = |d| LENGTHS.iter().map(|&l| g.get(c, d, l, m).pfr).sum::<f64>() / LENGTHS.len() as f64;
            let (sparse, dense) = (mean(20), mean(60));
            if sparse <= dense {
                failures.push(format!("{c} {m}: SD-S {sparse:.3} <= SD-D {dense:.3}"));
            }
            lows.push(sparse - dense);
        }
    }
    let min = lows.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(failures, format!("smallest SD-S minus SD-D PFR {min:.3}"))
}

fn atoms(names: &[&str]) -> PremiseSet {
    names.iter().map(|s| s.parse::<Premise>().unwrap()).collect()
}

/// Step oracle over plain vectors. Contributions are pulled per target.
struct OracleNode {
    pre: Vec<String>,
    add: Vec<String>,
    del: Vec<String>,
}

fn oracle_step(nodes: &[OracleNode], alpha: &[f64], state: &[String], goals: &[String], p: &BnParams) -> Vec<f64> {
    let n = nodes.len();
    let has = |v: &Vec<String>, x: &String| v.contains(x);
    let mut next = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = 0.0;
        for q in state {
            if has(&nodes[j].pre, q) {
                d += p.phi / nodes.iter().filter(|k| has(&k.pre, q)).count() as f64;
            }
        }
        for q in goals {
            if has(&nodes[j].add, q) {
                d += p.gamma / nodes.iter().filter(|k| has(&k.add, q)).count() as f64;
            }
        }
        for i in 0..n {
            if i == j {
                continue;
            }
            let src = &nodes[i];
            if src.pre.iter().all(|q| state.contains(q)) {
                let open: Vec<&String> = src.add.iter().filter(|q| !state.contains(q)).collect();
                let pairs = |t: &OracleNode| open.iter().filter(|q| t.pre.contains(q)).count();
                let total: usize = (0..n).filter(|&k| k != i).map(|k| pairs(&nodes[k])).sum();
                for _ in 0..pairs(&nodes[j]) {
                    d += p.sigma_forward * alpha[i] / total as f64;
                }
            } else {
                let missing: Vec<&String> = src.pre.iter().filter(|q| !state.contains(q)).collect();
                for q in &missing {
                    let achievers = (0..n).filter(|&k| k != i && nodes[k].add.contains(q)).count();
                    if nodes[j].add.contains(q) {
                        d += p.sigma_backward * alpha[i] / missing.len() as f64 / achievers as f64;
                    }
                }
            }
            let conflicters = (0..n).filter(|&k| k != i && src.pre.iter().any(|q| nodes[k].del.contains(q))).count();
            if src.pre.iter().any(|q| nodes[j].del.contains(q)) {
                d -= p.sigma_conflict * alpha[i] / conflicters as f64;
            }
        }
        next.push(alpha[j] + d);
    }
    let floored: Vec<f64> = next.iter().map(|a| a.max(0.0)).collect();
    let total: f64 = floored.iter().sum();
    floored.iter().map(|a| if total > 0.0 { a * p.pi * n as f64 / total } else { p.pi }).collect()
}

fn behavior_network() -> Verdict {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let universe: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
    let pick = |rng: &mut ChaCha8Rng, k: usize| -> PremiseSet {
        (0..k).map(|_| universe[rng.gen_range(0..universe.len())].parse().unwrap()).collect()
    };
    let regimes: Vec<BnParams> = default_regime_specs().iter().map(|s| s.params).collect();
    let (mut steps, mut selections) = (0usize, 0usize);
    for net in 0..500 {
        let n = rng.gen_range(1..8);
        let behaviors: Vec<Behavior> = (0..n)
            .map(|i| {
                let (pre, add) = (pick(&mut rng, 2), pick(&mut rng, 2));
                let del: PremiseSet = pick(&mut rng, 1).difference(&add).cloned().collect();
                Behavior::new(format!("b{i}"), pre, add, del).unwrap()
            })
            .collect();
        let params = regimes[net % regimes.len()];
        let mut bn = BehaviorNetwork::new(behaviors, params).unwrap();
        for _ in 0..20 {
            let state = pick(&mut rng, 4);
            let (goals, protected) = (pick(&mut rng, 2), pick(&mut rng, 1));
            bn.activation_step(&state, &goals, &protected);
            steps += 1;
            let acts: Vec<f64> = bn.behaviors().iter().map(|b| b.activation).collect();
            let mean = acts.iter().sum::<f64>() / acts.len() as f64;
            let min = acts.iter().copied().fold(f64::INFINITY, f64::min);
            if (mean - params.pi).abs() > 1e-9 || min < 0.0 {
                failures.push(format!("net {net}: mean {mean} min {min}"));
            }
            if let Some(id) = bn.select_behavior(&state) {
                selections += 1;
                let b = &bn.behaviors()[bn.index_of(&id).unwrap()];
                if !b.pre.is_subset(&state) {
                    failures.push(format!("net {net}: selected {id} without its preconditions"));
                }
            }
        }
    }

    // chain A -> B -> C, goal on C's add, state satisfies A only
    let chain = [("A", "a", "b"), ("B", "b", "c"), ("C", "c", "g")];
    let oracle_nodes: Vec<OracleNode> = chain
        .iter()
        .map(|(_, pre, add)| OracleNode { pre: vec![pre.to_string()], add: vec![add.to_string()], del: Vec::new() })
        .collect();
    let (state, goals) = (vec!["a".to_string()], vec!["g".to_string()]);
    let mut traced = 0;
    let mut ranking = String::new();
    for spec in default_regime_specs() {
        let p = spec.params;
        let behaviors = chain
            .iter()
            .map(|(id, pre, add)| Behavior::new(*id, atoms(&[pre]), atoms(&[add]), PremiseSet::new()).unwrap())
            .collect();
        let mut bn = BehaviorNetwork::new(behaviors, p).unwrap();
        let mut alpha = vec![p.pi; 3];
        for step in 1..=50 {
            bn.activation_step(&atoms(&["a"]), &atoms(&["g"]), &PremiseSet::new());
            alpha = oracle_step(&oracle_nodes, &alpha, &state, &goals, &p);
            let got: Vec<f64> = bn.behaviors().iter().map(|b| b.activation).collect();
            if got != alpha {
                failures.push(format!("{} step {step}: {got:?} vs oracle {alpha:?}", spec.kind));
                break;
            }
            traced += 1;
            if step == 2 && spec.kind == RegimeKind::PlanBiased {
                ranking = format!("{:.2} > {:.2} > {:.2}", got[0], got[1], got[2]);
                if !(got[0] > got[1] && got[1] > got[2]) {
                    failures.push(format!("plan-biased ranking after 2 steps is {got:?}"));
                }
            }
        }
    }
    failures.truncate(5);
    verdict(
        failures,
        format!("{steps} random steps, {selections} selections, chain matches oracle on {traced}/150 steps, plan-biased step 2 {ranking}"),
    )
}

fn working_memory() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    let (mut injections, mut refreshes) = (0usize, 0usize);
    for seq in 0..100_000 {
        let mut wm = WorkingMemory::new(Default::default());
        let decay = wm.config().decay;
        let capacity = wm.config().capacity;
        let mut t = 0.0;
        for _ in 0..rng.gen_range(1..30) {
            let gap = rng.gen_range(0.0..0.5);
            // between accesses the activation of every held item falls
            for item in wm.items() {
                let t1 = t + gap * 0.25 + 1e-3;
                let t2 = t + gap + 2e-3;
                if base_level_activation(item, t1, decay) <= base_level_activation(item, t2, decay) {
                    failures.push(format!("seq {seq}: {} did not decay between {t1} and {t2}", item.premise));
                }
            }
            t += gap;
            let p: Premise = format!("p{}", rng.gen_range(0..30)).parse().unwrap();
            let before = wm.activation(&p, t);
            wm.inject(p.clone(), t, rng.gen_range(0.0..1.0), ItemSource::Percept);
            injections += 1;
            if let Some(b) = before {
                refreshes += 1;
                let after = wm.activation(&p, t).unwrap();
                if after < b {
                    failures.push(format!("seq {seq}: refresh lowered {p} from {b} to {after}"));
                }
            }
            if wm.len() > capacity {
                failures.push(format!("seq {seq}: {} items over capacity {capacity}", wm.len()));
            }
        }
        if failures.len() > 5 {
            break;
        }
    }
    failures.truncate(5);
    verdict(failures, format!("100000 sequences, {injections} injections, {refreshes} refreshes"))
}

fn sdm_oracle() -> Verdict {
    let (n, m) = (64usize, 50usize);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let addresses: Vec<BitVector> = (0..m).map(|_| BitVector::random(n, &mut rng)).collect();

    let radius = 28;
    let max = 127i64;
    let mut sdm = Sdm::with_addresses(n, radius, max as i16, addresses.clone());
    let mut counters = vec![vec![0i64; n]; m];
    let (mut writes, mut reads) = (0, 0);
    for op in 0..1000 {
        let address = BitVector::random(n, &mut rng);
        let inside: Vec<usize> = (0..m).filter(|&k| addresses[k].hamming(&address) <= radius).collect();
        if rng.gen_bool(0.5) {
            let word = BitVector::random(n, &mut rng);
            sdm.write(&address, &word);
            for &k in &inside {
                for (bit, c) in counters[k].iter_mut().enumerate() {
                    *c = (*c + if word.get(bit) { 1 } else { -1 }).clamp(-max, max);
                }
            }
            writes += 1;
        } else {
            let got = sdm.read(&address);
            let want: Vec<bool> = (0..n).map(|bit| inside.iter().map(|&k| counters[k][bit]).sum::<i64>() > 0).collect();
            if (0..n).any(|bit| got.get(bit) != want[bit]) {
                failures.push(format!("op {op}: read differs from counter sums"));
            }
            reads += 1;
        }
        let stored: Vec<Vec<i64>> = sdm.locations().iter().map(|l| l.counters.iter().map(|&c| c as i64).collect()).collect();
        if stored != counters {
            failures.push(format!("op {op}: counters diverge"));
            break;
        }
    }

    // well-separated writes read back exactly
    let radius = 10;
    let mut round_trips = 0;
    for trial in 0..20 {
        let mut sdm = Sdm::with_addresses(n, radius, 127, addresses.clone());
        let mut chosen: Vec<&BitVector> = Vec::new();
        let k = 1 + trial % 5;
        for a in &addresses {
            if chosen.len() < k && chosen.iter().all(|c| c.hamming(a) > 2 * radius + 1) {
                chosen.push(a);
            }
        }
        let words: Vec<BitVector> = chosen.iter().map(|_| BitVector::random(n, &mut rng)).collect();
        for (a, w) in chosen.iter().zip(&words) {
            sdm.write(a, w);
        }
        for (a, w) in chosen.iter().zip(&words) {
            if &sdm.read(a) == w {
                round_trips += 1;
            } else {
                failures.push(format!("trial {trial}: separated write did not round-trip"));
            }
        }
    }
    failures.truncate(5);
    verdict(failures, format!("{writes} writes and {reads} reads match the oracle, {round_trips} separated round-trips"))
}

fn csv_row(rows: &[harness::ReportRow]) -> Vec<u8> {
    let mut out = Vec::new();
    harness::write_csv(rows, &mut out).unwrap();
    out
}

fn determinism(g: &Grid) -> Verdict {
    let mut failures = Vec::new();
    let picks = [
        (ComposerKind::Copernic, 20, 10, Mobility::Fast),
        (ComposerKind::Gocomo, 40, 5, Mobility::Medium),
        (ComposerKind::Coopc, 60, 10, Mobility::Slow),
    ];
    for (composer, d, l, m) in picks {
        let cell = Cell { composer, density: Density(d), length: ChainLength(l), mobility: m };
        let recorded = harness::ReportRow::new(&cell, g.cfg.seed, g.get(composer, d, l, m));
        let rerun = harness::run_cell(&g.cfg, &cell).unwrap().row(g.cfg.seed);
        if csv_row(&[recorded]) != csv_row(&[rerun]) {
            failures.push(format!("{composer} SD-{d} CL-{l} {m}: CSV row changed on rerun"));
        }
    }
    let mut lines = 0;
    for composer in ComposerKind::ALL {
        let cell = Cell { composer, density: Density(20), length: ChainLength(5), mobility: Mobility::Fast };
        let a = harness::run_once(&g.cfg, &cell, 11, true).unwrap();
        let b = harness::run_once(&g.cfg, &cell, 11, true).unwrap();
        if a.events.is_empty() || a.events != b.events || a.summary != b.summary {
            failures.push(format!("{composer}: event log differs on replay"));
        }
        lines += a.events.len();
    }
    verdict(failures, format!("3 cells reproduced, {lines} logged events replayed"))
}

fn no_churn() -> Verdict {
    let mut cfg = ExperimentConfig {
        densities: vec![Density::DENSE],
        mobilities: vec![Mobility::Static],
        ..Default::default()
    };
    // one range covers the arena diagonal; every service of the catalog is deployed
    cfg.sim.radio_range = 2.0 * cfg.sim.arena.width.max(cfg.sim.arena.height);
    assert_eq!(cfg.sim.stages * cfg.sim.members_per_stage, Density::DENSE.0);
    let results = harness::run_experiment(&cfg).unwrap();
    let failures: Vec<String> = results
        .iter()
        .filter(|r| r.pooled.failed > 0)
        .map(|r| format!("{} {}: {} failed", r.cell.composer, r.cell.length.label(), r.pooled.failed))
        .collect();
    let issued: usize = results.iter().map(|r| r.pooled.issued).sum();
    verdict(failures, format!("{issued} requests over {} seeds, none failed", cfg.replications))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let grid = Grid::run();
    eprintln!("grid: {} cells in {:.0?}", grid.cells.len(), start.elapsed());
    let criteria: [(&str, &dyn Fn() -> Verdict); 9] = [
        ("memory scaling", &|| memory_scaling(&grid)),
        ("composition-time ordering", &|| composition_time(&grid)),
        ("mobility sensitivity of PFR", &|| mobility_sensitivity(&grid)),
        ("density trend", &|| density_trend(&grid)),
        ("behavior network", &behavior_network),
        ("working memory", &working_memory),
        ("SDM oracle", &sdm_oracle),
        ("determinism", &|| determinism(&grid)),
        ("no-churn equivalence", &no_churn),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    eprintln!("acceptance finished in {:.0?}", start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
