//! Python bindings. Paths cross the boundary as lists of node names.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pathlet_core::baselines;
use pathlet_core::concat::{self, Concatenation};
use pathlet_core::harness::{self, ExperimentConfig};
use pathlet_core::lagrangian::{self, SolverConfig};
use pathlet_core::selection::{self, ExactLimits, SelectionInstance};
use pathlet_core::workload;
use pathlet_core::{Path, Pathlet, PathletSet};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Topology", module = "pathlet", frozen, from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: pathlet_core::Topology,
}

impl PyTopology {
    fn path(&self, nodes: &[String]) -> PyResult<Path> {
        Path::from_names(&self.inner, nodes).map_err(err)
    }

    fn names(&self, p: &Path) -> Vec<String> {
        self.inner.names_of(p.nodes()).into_iter().map(str::to_string).collect()
    }
}

#[pymethods]
impl PyTopology {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyTopology {
            inner: pathlet_core::Topology::parse(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(err)?;
        PyTopology::new(&text)
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn link_count(&self) -> usize {
        self.inner.link_count()
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.nodes().map(|v| self.inner.name(v).to_string()).collect()
    }

    fn has_link(&self, tail: &str, head: &str) -> PyResult<bool> {
        let (t, h) = (self.inner.id(tail).map_err(err)?, self.inner.id(head).map_err(err)?);
        Ok(self.inner.has_link(t, h))
    }

    fn with_uniform_capacity(&self, capacity: u32) -> Self {
        PyTopology {
            inner: self.inner.with_uniform_capacity(capacity),
        }
    }

    /// Breadth-first subgraph of `n` nodes around `start`.
    fn subset(&self, start: &str, n: usize) -> PyResult<Self> {
        Ok(PyTopology {
            inner: harness::topo_subset(&self.inner, start, n).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(nodes={}, links={})",
            self.inner.node_count(),
            self.inner.link_count()
        )
    }
}

/// Checks `nodes` is a simple path of `topology` and returns it unchanged.
#[pyfunction]
fn make_path(topology: &PyTopology, nodes: Vec<String>) -> PyResult<Vec<String>> {
    let p = topology.path(&nodes)?;
    Ok(topology.names(&p))
}

/// Paths from path-file text: one path per line, `#` comments.
#[pyfunction]
fn parse_paths(topology: &PyTopology, text: &str) -> PyResult<Vec<Vec<String>>> {
    let paths = pathlet_core::path::parse_path_file(&topology.inner, text).map_err(err)?;
    Ok(paths.iter().map(|p| topology.names(p)).collect())
}

#[pyfunction]
#[pyo3(signature = (topology, k = 3, max_len = 4, seed = 0))]
fn enumerate_candidates(topology: &PyTopology, k: usize, max_len: usize, seed: u64) -> Vec<Vec<String>> {
    let set = pathlet_core::enumerate_candidates(&topology.inner, k, max_len, seed);
    set.pathlets.iter().map(|s| topology.names(s.route())).collect()
}

/// Flows as `(fid, src, dst, kind, waypoint)` tuples.
#[pyfunction]
#[pyo3(signature = (topology, m, seed = 0))]
fn gen_flows(topology: &PyTopology, m: usize, seed: u64) -> Vec<(String, String, String, String, Option<String>)> {
    let t = &topology.inner;
    workload::gen_flows(t, m, seed)
        .into_iter()
        .map(|f| {
            (
                f.fid,
                t.name(f.src).to_string(),
                t.name(f.dst).to_string(),
                f.kind.as_str().to_string(),
                f.waypoint.map(|w| t.name(w).to_string()),
            )
        })
        .collect()
}

/// Desired paths for `m` generated flows per node pair, as `(tag, nodes)`.
#[pyfunction]
#[pyo3(signature = (topology, m, seed = 0))]
fn desired_paths(topology: &PyTopology, m: usize, seed: u64) -> Vec<(String, Vec<String>)> {
    let set = workload::build_desired_set(&topology.inner, &workload::gen_flows(&topology.inner, m, seed));
    set.entries
        .iter()
        .map(|e| (e.tag.clone(), topology.names(&e.path)))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (topology, path, max_segments = 3))]
fn middlepoint_concat(topology: &PyTopology, path: Vec<String>, max_segments: usize) -> PyResult<(bool, usize)> {
    let r = baselines::middlepoint_concat(&topology.inner, &topology.path(&path)?, max_segments);
    Ok((r.success, r.segments))
}

/// Selected pathlets; `construct_path` may mint representatives into it.
#[pyclass(name = "PathletSet", module = "pathlet")]
struct PyPathletSet {
    topology: PyTopology,
    inner: PathletSet,
}

fn conc_dict<'py>(py: Python<'py>, set: &PathletSet, c: &Concatenation) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("parts", c.parts.clone())?;
    d.set_item("flat", c.flat.clone())?;
    d.set_item("labels", c.label_count())?;
    d.set_item("labels_pre", c.flat_count())?;
    d.set_item("nested", c.is_nested())?;
    d.set_item(
        "pids",
        c.label_list(set)
            .map(|l| l.into_iter().map(|p| p.0).collect::<Vec<_>>()),
    )?;
    Ok(d)
}

#[pymethods]
impl PyPathletSet {
    #[new]
    fn new(topology: PyTopology, routes: Vec<Vec<String>>) -> PyResult<Self> {
        let paths = routes.iter().map(|r| topology.path(r)).collect::<PyResult<Vec<_>>>()?;
        Ok(PyPathletSet {
            inner: PathletSet::from_routes(paths),
            topology,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Node sequence of pathlet `idx`.
    fn nodes(&self, idx: usize) -> PyResult<Vec<String>> {
        if idx >= self.inner.len() {
            return Err(PyKeyError::new_err(idx));
        }
        Ok(self.topology.names(self.inner.get(idx).route()))
    }

    fn is_representative(&self, idx: usize) -> PyResult<bool> {
        if idx >= self.inner.len() {
            return Err(PyKeyError::new_err(idx));
        }
        Ok(self.inner.get(idx).is_representative())
    }

    /// Assigns pids by greedy colouring; returns them per pathlet.
    #[pyo3(signature = (pid_space = 256))]
    fn assign_pids(&mut self, pid_space: u32) -> PyResult<Vec<u32>> {
        let pids = pathlet_core::ruleplane::assign_pids(&self.inner, pid_space).map_err(err)?;
        self.inner.apply_pids(&pids);
        Ok(pids.into_iter().map(|p| p.0).collect())
    }

    /// Minimum concatenation, nested to at most `m_max` labels; `None` when
    /// the path cannot be concatenated.
    #[pyo3(signature = (path, m_max = 3))]
    fn construct_path<'py>(
        &mut self,
        py: Python<'py>,
        path: Vec<String>,
        m_max: usize,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let p = self.topology.path(&path)?;
        match concat::construct_path(&mut self.inner, &p, m_max) {
            Ok(c) => Ok(Some(conc_dict(py, &self.inner, &c)?)),
            Err(concat::ConcatError::NotConcatenable(_)) => Ok(None),
            Err(e) => Err(err(e)),
        }
    }

    /// Exhaustive minimum part count, for cross-checking.
    fn brute_force_concat(&self, path: Vec<String>) -> PyResult<Option<usize>> {
        let p = self.topology.path(&path)?;
        Ok(concat::brute_force_concat(&self.inner, &p)
            .map_err(err)?
            .map(|c| c.flat_count()))
    }
}

/// A selection problem over explicit paths and candidates.
#[pyclass(name = "SelectionInstance", module = "pathlet", frozen)]
struct PySelectionInstance {
    inner: SelectionInstance,
}

#[pymethods]
impl PySelectionInstance {
    /// `capacities` defaults to each node's free capacity in `topology`.
    #[new]
    #[pyo3(signature = (topology, paths, candidates, m_max = 4, capacities = None))]
    fn new(
        topology: &PyTopology,
        paths: Vec<Vec<String>>,
        candidates: Vec<Vec<String>>,
        m_max: usize,
        capacities: Option<Vec<u32>>,
    ) -> PyResult<Self> {
        let paths = paths.iter().map(|p| topology.path(p)).collect::<PyResult<Vec<_>>>()?;
        let cands = candidates
            .iter()
            .map(|c| topology.path(c).map(Pathlet::concrete))
            .collect::<PyResult<Vec<_>>>()?;
        let caps = capacities.unwrap_or_else(|| topology.inner.capacities().to_vec());
        Ok(PySelectionInstance {
            inner: SelectionInstance::new(paths, cands, caps, m_max).map_err(err)?,
        })
    }

    /// One subgradient run. Returns the bounds, the objective of the best
    /// feasible solution, the selected candidate indices and the trace.
    #[pyo3(signature = (seed = 0))]
    fn one_round_selection<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let cfg = SolverConfig {
            seed,
            ..SolverConfig::default()
        };
        let r = lagrangian::one_round_selection(&self.inner, &cfg);
        let violations = selection::check_feasible(&self.inner, &r.best)
            .map_err(err)?
            .violations
            .len();
        let d = PyDict::new(py);
        d.set_item("z_up", r.z_up)?;
        d.set_item("z_lb", r.z_lb)?;
        d.set_item("objective", selection::objective(&r.best))?;
        d.set_item("selected", r.best.selected())?;
        d.set_item("violations", violations)?;
        let trace: Vec<(usize, f64, f64, f64, f64, f64, usize)> = r
            .trace
            .iter()
            .map(|t| (t.k, t.z_lr, t.z_fe, t.z_up, t.z_lb, t.beta, t.stall))
            .collect();
        d.set_item("trace", trace)?;
        Ok(d)
    }

    /// Exact optimum objective (small instances only).
    fn exact_objective(&self) -> PyResult<usize> {
        let sol = selection::exact_solve(&self.inner, ExactLimits::default()).map_err(err)?;
        Ok(selection::objective(&sol))
    }
}

/// Outcome of [`run_experiment`].
#[pyclass(name = "Experiment", module = "pathlet", frozen)]
struct PyExperiment {
    inner: harness::Experiment,
}

#[pymethods]
impl PyExperiment {
    /// Scalar metrics as strings, in report order.
    fn metrics(&self) -> Vec<(String, String)> {
        self.inner
            .report
            .summary()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[getter]
    fn success(&self) -> f64 {
        self.inner.report.success
    }

    #[getter]
    fn labels_pre(&self) -> Vec<Option<usize>> {
        self.inner.report.labels_pre.clone()
    }

    #[getter]
    fn labels_post(&self) -> Vec<Option<usize>> {
        self.inner.report.labels_post.clone()
    }

    #[getter]
    fn avg_core(&self) -> f64 {
        self.inner.report.avg_core
    }

    #[getter]
    fn avg_hbh(&self) -> f64 {
        self.inner.report.avg_hbh
    }

    /// Every concatenated path replayed to its desired node sequence.
    fn replays_ok(&self) -> bool {
        self.inner.sims.iter().all(|s| s.ok)
    }

    fn compare_text(&self) -> String {
        harness::compare_schemes(&self.inner.report).1
    }

    fn concat_dump(&self) -> String {
        harness::io::concat_dump(&self.inner.topology, &self.inner.pathlets, &self.inner.records)
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&dir).map_err(err)?;
        harness::write_artifacts(&self.inner, &dir).map_err(err)
    }
}

/// Runs the full pipeline. Either `config` (a `key = value` file) or
/// `topology` (a topology file) must be given; keyword `options` override
/// config keys, e.g. `m=2, seed=7`.
#[pyfunction]
#[pyo3(signature = (config = None, topology = None, **options))]
fn run_experiment(
    config: Option<PathBuf>,
    topology: Option<PathBuf>,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyExperiment> {
    let cwd = std::env::current_dir().map_err(err)?;
    let mut cfg = match (config, topology) {
        (Some(c), _) => {
            let text = std::fs::read_to_string(&c).map_err(err)?;
            let base = c.parent().map(|p| p.to_path_buf()).unwrap_or_else(|| cwd.clone());
            ExperimentConfig::from_kv(&text, &base).map_err(err)?
        }
        (None, Some(t)) => ExperimentConfig::new(t),
        (None, None) => return Err(PyValueError::new_err("config or topology is required")),
    };
    if let Some(opts) = options {
        for (k, v) in opts.iter() {
            let key: String = k.extract()?;
            cfg.set(&key, &v.str()?.to_string(), &cwd).map_err(err)?;
        }
    }
    cfg.validate().map_err(err)?;
    Ok(PyExperiment {
        inner: harness::run_experiment(&cfg).map_err(err)?,
    })
}

#[pymodule]
fn pathlet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<PyPathletSet>()?;
    m.add_class::<PySelectionInstance>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(make_path, m)?)?;
    m.add_function(wrap_pyfunction!(parse_paths, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(gen_flows, m)?)?;
    m.add_function(wrap_pyfunction!(desired_paths, m)?)?;
    m.add_function(wrap_pyfunction!(middlepoint_concat, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
