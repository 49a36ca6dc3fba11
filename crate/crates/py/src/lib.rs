//! Python bindings: catalogs, the cognitive memories, the behavior network
//! and the experiment harness.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cogcomp::behavior::{Behavior, BehaviorNetwork as CoreNetwork, BnParams};
use cogcomp::catalog::Catalog as CoreCatalog;
use cogcomp::harness::{self, Cell, ExperimentConfig, ReportRow};
use cogcomp::sdm::{BitVector, Sdm as CoreSdm};
use cogcomp::service::{Premise, PremiseSet};
use cogcomp::wm::{ItemSource, WmConfig, WorkingMemory as CoreWm};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn premise(s: &str) -> PyResult<Premise> {
    s.parse().map_err(err)
}

fn premises(items: Vec<String>) -> PyResult<PremiseSet> {
    items.iter().map(|s| premise(s)).collect()
}

fn strings(set: &PremiseSet) -> Vec<String> {
    set.iter().map(ToString::to_string).collect()
}

/// Service catalog grouped into abstract services.
#[pyclass(frozen)]
struct Catalog {
    inner: Arc<CoreCatalog>,
}

#[pymethods]
impl Catalog {
    /// Linear domain of `stages` abstract services with `members` concretes each.
    #[staticmethod]
    #[pyo3(signature = (stages, members, seed = 1))]
    fn chain_domain(stages: usize, members: usize, seed: u64) -> PyResult<Self> {
        if stages == 0 || members == 0 {
            return Err(err("stages and members must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Catalog { inner: Arc::new(CoreCatalog::chain_domain(stages, members, &mut rng)) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Catalog { inner: Arc::new(CoreCatalog::from_json(text).map_err(err)?) })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Abstract service ids in declaration order.
    fn abstracts(&self) -> Vec<String> {
        self.inner.abstracts().iter().map(|a| a.id.clone()).collect()
    }

    fn members(&self, abstract_id: &str) -> PyResult<Vec<String>> {
        let a = self.inner.abstract_service(abstract_id).ok_or_else(|| err(format!("unknown abstract {abstract_id}")))?;
        Ok(a.members.iter().map(|m| m.as_str().to_string()).collect())
    }
}

#[pyclass]
struct WorkingMemory {
    inner: CoreWm,
}

#[pymethods]
impl WorkingMemory {
    #[new]
    #[pyo3(signature = (capacity = 12, decay = 0.5, threshold = -2.0))]
    fn new(capacity: usize, decay: f64, threshold: f64) -> PyResult<Self> {
        if capacity == 0 || !(decay > 0.0 && decay < 1.0) {
            return Err(err("capacity must be positive and decay in (0, 1)"));
        }
        Ok(WorkingMemory { inner: CoreWm::new(WmConfig { capacity, decay, threshold, ..WmConfig::default() }) })
    }

    /// Adds or refreshes a premise; returns the evicted premise, if any.
    #[pyo3(signature = (premise, t, strength = 1.0))]
    fn inject(&mut self, premise: &str, t: f64, strength: f64) -> PyResult<Option<String>> {
        let p = self::premise(premise)?;
        Ok(self.inner.inject(p, t, strength, ItemSource::Percept).map(|e| e.to_string()))
    }

    fn activation(&self, premise: &str, t: f64) -> PyResult<Option<f64>> {
        Ok(self.inner.activation(&self::premise(premise)?, t))
    }

    /// Premises above threshold at `t`, strongest first.
    fn contents(&self, t: f64) -> Vec<String> {
        self.inner.contents(t).iter().map(ToString::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Sparse distributed memory over bit vectors given as lists of 0/1.
#[pyclass]
struct Sdm {
    inner: CoreSdm,
}

impl Sdm {
    fn bits(&self, v: &[u8]) -> PyResult<BitVector> {
        if v.len() != self.inner.word_bits() {
            return Err(err(format!("expected {} bits, got {}", self.inner.word_bits(), v.len())));
        }
        let mut out = BitVector::zeros(v.len());
        for (i, &b) in v.iter().enumerate() {
            out.set(i, b != 0);
        }
        Ok(out)
    }
}

#[pymethods]
impl Sdm {
    #[new]
    #[pyo3(signature = (word_bits = 256, locations = 1000, radius = None, seed = 0x5D11))]
    fn new(word_bits: usize, locations: usize, radius: Option<u32>, seed: u64) -> PyResult<Self> {
        if word_bits == 0 || locations == 0 {
            return Err(err("word_bits and locations must be positive"));
        }
        let config = cogcomp::sdm::SdmConfig { word_bits, locations, radius, seed, ..Default::default() };
        Ok(Sdm { inner: CoreSdm::new(&config) })
    }

    #[getter]
    fn radius(&self) -> u32 {
        self.inner.radius()
    }

    /// Returns how many hard locations were written.
    fn write(&mut self, address: Vec<u8>, word: Vec<u8>) -> PyResult<usize> {
        let (a, w) = (self.bits(&address)?, self.bits(&word)?);
        Ok(self.inner.write(&a, &w).len())
    }

    fn read(&self, address: Vec<u8>) -> PyResult<Vec<u32>> {
        let out = self.inner.read(&self.bits(&address)?);
        Ok((0..out.len()).map(|i| u32::from(out.get(i))).collect())
    }
}

/// Behavior network. Behaviors are `(id, pre, add, delete)` tuples of
/// premise strings.
#[pyclass]
struct BehaviorNetwork {
    inner: CoreNetwork,
}

#[pymethods]
impl BehaviorNetwork {
    #[new]
    #[pyo3(signature = (behaviors, params = None))]
    fn new(behaviors: Vec<(String, Vec<String>, Vec<String>, Vec<String>)>, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let mut p = BnParams::default();
        for (k, v) in params.unwrap_or_default() {
            let slot = match k.as_str() {
                "pi" => &mut p.pi,
                "theta" => &mut p.theta,
                "phi" => &mut p.phi,
                "gamma" => &mut p.gamma,
                "delta" => &mut p.delta,
                "sigma_forward" => &mut p.sigma_forward,
                "sigma_backward" => &mut p.sigma_backward,
                "sigma_conflict" => &mut p.sigma_conflict,
                other => return Err(err(format!("unknown parameter {other}"))),
            };
            *slot = v;
        }
        let behaviors = behaviors
            .into_iter()
            .map(|(id, pre, add, del)| Behavior::new(id, premises(pre)?, premises(add)?, premises(del)?).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(BehaviorNetwork { inner: CoreNetwork::new(behaviors, p).map_err(err)? })
    }

    #[pyo3(signature = (state, goals, protected = Vec::new()))]
    fn step(&mut self, state: Vec<String>, goals: Vec<String>, protected: Vec<String>) -> PyResult<()> {
        self.inner.activation_step(&premises(state)?, &premises(goals)?, &premises(protected)?);
        Ok(())
    }

    /// Selects the strongest executable behavior above threshold, if any.
    fn select(&mut self, state: Vec<String>) -> PyResult<Option<String>> {
        Ok(self.inner.select_behavior(&premises(state)?))
    }

    fn activations(&self) -> BTreeMap<String, f64> {
        self.inner.behaviors().iter().map(|b| (b.id.clone(), b.activation)).collect()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta_current()
    }

    fn preconditions(&self, id: &str) -> PyResult<Vec<String>> {
        let i = self.inner.index_of(id).ok_or_else(|| err(format!("unknown behavior {id}")))?;
        Ok(strings(&self.inner.behaviors()[i].pre))
    }
}

fn experiment(config: Option<&str>) -> PyResult<ExperimentConfig> {
    let cfg = match config {
        Some(text) => ExperimentConfig::from_json(text).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn row_dict<'py>(py: Python<'py>, row: &ReportRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("composer", &row.composer)?;
    d.set_item("density", row.density)?;
    d.set_item("length", &row.length)?;
    d.set_item("mobility", &row.mobility)?;
    d.set_item("seed", row.seed)?;
    d.set_item("issued", row.issued)?;
    d.set_item("failed", row.failed)?;
    d.set_item("pfr", row.pfr)?;
    d.set_item("ct_mean", row.ct_mean)?;
    d.set_item("mu_mean", row.mu_mean)?;
    d.set_item("mu_peak", row.mu_peak)?;
    Ok(d)
}

/// Planning failure rate.
#[pyfunction]
fn compute_pfr(failed: usize, issued: usize) -> PyResult<f64> {
    harness::compute_pfr(failed, issued).map_err(err)
}

/// Default experiment configuration as JSON.
#[pyfunction]
fn default_config() -> PyResult<String> {
    serde_json::to_string_pretty(&ExperimentConfig::default()).map_err(err)
}

/// Runs one grid cell over its replications and returns the report row.
#[pyfunction]
#[pyo3(signature = (composer, density, length, mobility, replications = None, seed = None, config = None))]
#[allow(clippy::too_many_arguments)]
fn run_cell<'py>(
    py: Python<'py>,
    composer: &str,
    density: &str,
    length: &str,
    mobility: &str,
    replications: Option<usize>,
    seed: Option<u64>,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = experiment(config)?;
    let cell = Cell {
        composer: composer.parse().map_err(err)?,
        density: density.parse().map_err(err)?,
        length: length.parse().map_err(err)?,
        mobility: mobility.parse().map_err(err)?,
    };
    cfg.replications = replications.unwrap_or(cfg.replications);
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(err)?;
    let result = py.detach(|| harness::run_cell(&cfg, &cell)).map_err(err)?;
    row_dict(py, &result.row(cfg.seed))
}

/// Runs the grid described by `config` (JSON, defaults to the full grid).
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_grid<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = experiment(config)?;
    let results = py.detach(|| harness::run_experiment(&cfg)).map_err(err)?;
    results.iter().map(|r| row_dict(py, &r.row(cfg.seed))).collect()
}

#[pymodule]
#[pyo3(name = "cogcomp")]
fn cogcomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Catalog>()?;
    m.add_class::<WorkingMemory>()?;
    m.add_class::<Sdm>()?;
    m.add_class::<BehaviorNetwork>()?;
    m.add_function(wrap_pyfunction!(compute_pfr, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_cell, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    Ok(())
}
