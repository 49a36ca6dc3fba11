//! Experiment runner: scenario grid, replications, metrics and reports.

pub mod config;
pub mod metrics;

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, CycleRecord};
use crate::baselines::{BackwardChainer, Variant};
use crate::catalog::Catalog;
use crate::copernic::CopernicComposer;
use crate::error::{Error, Result};
use crate::sim::{stream_rng, Composer, RunSummary, SimConfig, Simulator, Stream};

pub use config::{Cell, ChainLength, ComposerKind, Density, ExperimentConfig, Mobility};
pub use metrics::{compute_pfr, RunMetrics};

pub const CSV_HEADER: [&str; 11] =
    ["composer", "density", "length", "mobility", "seed", "issued", "failed", "pfr", "ct_mean", "mu_mean", "mu_peak"];

/// The catalog a run uses; shared by every composer for the same seed.
pub fn scenario_catalog(sim: &SimConfig) -> Arc<Catalog> {
    let mut rng = stream_rng(sim.seed, Stream::Catalog);
    Arc::new(Catalog::chain_domain(sim.stages, sim.members_per_stage, &mut rng))
}

pub fn agent_config(base: &AgentConfig, seed: u64) -> AgentConfig {
    AgentConfig { seed: stream_rng(seed, Stream::Agent).gen(), ..base.clone() }
}

/// Artifacts of a single traced run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub events: Vec<String>,
    pub cycles: Vec<CycleRecord>,
}

fn drive<C: Composer>(sim: SimConfig, catalog: Arc<Catalog>, composer: C) -> Result<(RunSummary, Vec<String>, C)> {
    let (summary, world, composer) = Simulator::new(sim, catalog, composer)?.run();
    let events = world.event_log().map(<[String]>::to_vec).unwrap_or_default();
    Ok((summary, events, composer))
}

/// Runs one replication of `cell` with `seed`.
pub fn run_once(cfg: &ExperimentConfig, cell: &Cell, seed: u64, trace: bool) -> Result<RunOutput> {
    let sim = SimConfig { event_log: trace, ..cfg.sim_config(cell, seed) };
    let catalog = scenario_catalog(&sim);
    match cell.composer {
        ComposerKind::Copernic => {
            let mut composer = CopernicComposer::new(catalog.clone(), agent_config(&cfg.agent, seed))?;
            if trace {
                composer = composer.with_trace();
            }
            let (summary, events, composer) = drive(sim, catalog, composer)?;
            let cycles = composer.trace().map(<[CycleRecord]>::to_vec).unwrap_or_default();
            Ok(RunOutput { summary, events, cycles })
        }
        ComposerKind::Gocomo | ComposerKind::Coopc => {
            let (variant, params) = match cell.composer {
                ComposerKind::Gocomo => (Variant::GoCoMo, cfg.gocomo),
                _ => (Variant::CoopC, cfg.coopc),
            };
            let composer = BackwardChainer::with_params(variant, params, catalog.clone());
            let (summary, events, _) = drive(sim, catalog, composer)?;
            Ok(RunOutput { summary, events, cycles: Vec::new() })
        }
    }
}

/// One report row: a grid cell pooled over its replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub composer: String,
    pub density: usize,
    pub length: String,
    pub mobility: String,
    /// Base seed; replication `r` ran with `seed + r`.
    pub seed: u64,
    pub issued: usize,
    pub failed: usize,
    pub pfr: f64,
    pub ct_mean: f64,
    pub mu_mean: f64,
    pub mu_peak: f64,
}

impl ReportRow {
    pub fn new(cell: &Cell, seed: u64, m: &RunMetrics) -> Self {
        ReportRow {
            composer: cell.composer.to_string(),
            density: cell.density.0,
            length: cell.length.label(),
            mobility: cell.mobility.label().to_string(),
            seed,
            issued: m.issued,
            failed: m.failed,
            pfr: m.pfr,
            ct_mean: m.ct_mean,
            mu_mean: m.mu_mean,
            mu_peak: m.mu_peak,
        }
    }

    fn record(&self) -> [String; 11] {
        [
            self.composer.clone(),
            self.density.to_string(),
            self.length.clone(),
            self.mobility.clone(),
            self.seed.to_string(),
            self.issued.to_string(),
            self.failed.to_string(),
            format!("{:.6}", self.pfr),
            format!("{:.6}", self.ct_mean),
            format!("{:.6}", self.mu_mean),
            format!("{:.6}", self.mu_peak),
        ]
    }

    fn key(&self) -> (String, usize, String, String) {
        (self.composer.clone(), self.density, self.length.clone(), self.mobility.clone())
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub runs: Vec<RunMetrics>,
    pub pooled: RunMetrics,
}

impl CellResult {
    pub fn row(&self, seed: u64) -> ReportRow {
        ReportRow::new(&self.cell, seed, &self.pooled)
    }
}

/// Runs every replication of one cell, in parallel.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellResult> {
    let seeds: Vec<u64> = cfg.seeds().collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| run_once(cfg, cell, seed, false).and_then(|o| RunMetrics::from_run(&o.summary)))
        .collect::<Result<Vec<_>>>()?;
    let pooled = RunMetrics::pool(&runs)?;
    Ok(CellResult { cell: *cell, runs, pooled })
}

/// Runs the whole grid. Results are ordered by cell, independent of
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| cfg.seeds().map(move |s| (c, s))).collect();
    let metrics = jobs
        .par_iter()
        .map(|&(c, seed)| run_once(cfg, &cells[c], seed, false).and_then(|o| RunMetrics::from_run(&o.summary)))
        .collect::<Result<Vec<_>>>()?;
    let per_cell = cfg.replications;
    cells
        .iter()
        .zip(metrics.chunks(per_cell))
        .map(|(cell, runs)| {
            Ok(CellResult { cell: *cell, runs: runs.to_vec(), pooled: RunMetrics::pool(runs)? })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        w.write_record(row.record()).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    r.deserialize().map(|row| row.map_err(|e| Error::Parse(e.to_string()))).collect()
}

/// Merges rows of the same cell (e.g. from runs with different base seeds).
/// Times are weighted by successes and memory by requests.
pub fn merge_rows(rows: &[ReportRow]) -> Result<Vec<ReportRow>> {
    let mut out: Vec<ReportRow> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|r| r.key() == row.key()) {
            None => out.push(row.clone()),
            Some(acc) => {
                let (sa, sb) = ((acc.issued - acc.failed) as f64, (row.issued - row.failed) as f64);
                let issued = acc.issued + row.issued;
                acc.ct_mean = if sa + sb > 0.0 { (acc.ct_mean * sa + row.ct_mean * sb) / (sa + sb) } else { 0.0 };
                acc.mu_mean = (acc.mu_mean * acc.issued as f64 + row.mu_mean * row.issued as f64) / issued as f64;
                acc.mu_peak = acc.mu_peak.max(row.mu_peak);
                acc.failed += row.failed;
                acc.issued = issued;
                acc.seed = acc.seed.min(row.seed);
                acc.pfr = compute_pfr(acc.failed, acc.issued)?;
            }
        }
    }
    Ok(out)
}

/// Structured summary written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub replications: usize,
    pub seed: u64,
    pub rows: &'a [ReportRow],
}

/// Plain-text table of report rows.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut s = format!(
        "{:<9} {:>7} {:>6} {:>5} {:>7} {:>7} {:>8} {:>9} {:>9}\n",
        "composer", "density", "length", "mob", "issued", "pfr", "ct_s", "mu_kb", "mu_peak"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<9} {:>7} {:>6} {:>5} {:>7} {:>7.3} {:>8.3} {:>9.3} {:>9.3}\n",
            r.composer, r.density, r.length, r.mobility, r.issued, r.pfr, r.ct_mean, r.mu_mean, r.mu_peak
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            composers: vec![ComposerKind::Gocomo],
            densities: vec![Density::DENSE],
            lengths: vec![ChainLength(5)],
            mobilities: vec![Mobility::Slow],
            replications: 2,
            sim: SimConfig { requests: 4, horizon: 70.0, ..SimConfig::default() },
            ..Default::default()
        }
    }

    #[test]
    fn csv_roundtrip_keeps_column_order() {
        let cfg = small();
        let results = run_experiment(&cfg).unwrap();
        let rows: Vec<ReportRow> = results.iter().map(|r| r.row(cfg.seed)).collect();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("composer,density,length,mobility,seed,issued,failed,pfr,ct_mean,mu_mean,mu_peak\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].issued, 8);
    }

    #[test]
    fn merge_pools_counts() {
        let a = ReportRow {
            composer: "gocomo".into(),
            density: 20,
            length: "CL-5".into(),
            mobility: "M-S".into(),
            seed: 5,
            issued: 10,
            failed: 2,
            pfr: 0.2,
            ct_mean: 4.0,
            mu_mean: 1.0,
            mu_peak: 2.0,
        };
        let b = ReportRow { seed: 1, failed: 6, pfr: 0.6, ct_mean: 2.0, mu_mean: 3.0, mu_peak: 1.5, ..a.clone() };
        let m = merge_rows(&[a, b]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].issued, m[0].failed, m[0].seed), (20, 8, 1));
        assert!((m[0].pfr - 0.4).abs() < 1e-12);
        assert!((m[0].ct_mean - (4.0 * 8.0 + 2.0 * 4.0) / 12.0).abs() < 1e-12);
        assert!((m[0].mu_mean - 2.0).abs() < 1e-12);
        assert_eq!(m[0].mu_peak, 2.0);
    }
}
