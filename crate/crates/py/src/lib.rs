//! Python bindings for somnet.
//!
//! Exposes the main types and operations — topologies, datasets, SOM
//! training and evaluation, the mutation schedule, evolution runs and the
//! t-test — as a `somnet_py` extension module. Everything takes explicit
//! seeds, mirroring the Rust API.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use somnet::evolution::{self, EvoConfig};
use somnet::seeds;
use somnet::som::{self, NoiseModel, Schedule, SomState, TrainOptions};
use somnet::{all_pairs_distances, graph_stats, grid_moore, ttest, UNREACHABLE};

fn py_err(err: somnet::Error) -> PyErr {
    match &err {
        somnet::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Undirected simple neighbourhood graph.
#[pyclass(name = "Topology")]
#[derive(Clone)]
struct PyTopology {
    inner: somnet::Topology,
}

#[pymethods]
impl PyTopology {
    /// Non-periodic Moore lattice of `rows x cols` neurons.
    #[staticmethod]
    fn moore(rows: usize, cols: usize) -> PyResult<Self> {
        Ok(PyTopology {
            inner: grid_moore(rows, cols).map_err(py_err)?,
        })
    }

    /// Load from the edge-list text format.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTopology {
            inner: somnet::Topology::load(path).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn grid_dims(&self) -> Option<(usize, usize)> {
        self.inner.grid_dims()
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.inner.sorted_edges()
    }

    /// Independently rewire each edge with probability `p`.
    fn rewire(&self, p: f64, seed: u64) -> PyResult<Self> {
        Ok(PyTopology {
            inner: self
                .inner
                .rewire(p, &mut seeds::stream(seed, 0))
                .map_err(py_err)?,
        })
    }

    /// Rewire exactly `m` uniformly chosen edges.
    fn rewire_edges(&self, m: usize, seed: u64) -> PyResult<Self> {
        Ok(PyTopology {
            inner: self
                .inner
                .rewire_edges(m, &mut seeds::stream(seed, 0))
                .map_err(py_err)?,
        })
    }

    /// All-pairs hop counts; `None` marks unreachable pairs.
    fn distances(&self) -> Vec<Vec<Option<u32>>> {
        let df = all_pairs_distances(&self.inner);
        let n = self.inner.n_nodes();
        (0..n)
            .map(|i| {
                df.row(i)
                    .iter()
                    .map(|&d| if d == UNREACHABLE { None } else { Some(d) })
                    .collect()
            })
            .collect()
    }

    /// Structural statistics as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let stats = graph_stats(&self.inner, &all_pairs_distances(&self.inner));
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("mean_shortest_path", stats.mean_shortest_path)?;
        dict.set_item("unreachable_pair_fraction", stats.unreachable_pair_fraction)?;
        dict.set_item("clustering_index", stats.clustering_index)?;
        dict.set_item("degree_mean", stats.degree_mean)?;
        dict.set_item("degree_std", stats.degree_std)?;
        dict.set_item(
            "degree_histogram",
            stats.degree_histogram.into_iter().collect::<Vec<_>>(),
        )?;
        Ok(dict.into_any())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(n_nodes={}, edges={})",
            self.inner.n_nodes(),
            self.inner.edge_count()
        )
    }
}

/// Labelled sample set with values in [0, 1].
#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: somnet::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Load an IDX image/label pair (plain or gzipped).
    #[staticmethod]
    fn load_idx(images_path: &str, labels_path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: somnet::data::load_idx(images_path, labels_path).map_err(py_err)?,
        })
    }

    /// Gaussian blobs on separated hypercube corners.
    #[staticmethod]
    fn synthetic(k: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: somnet::data::synthetic_clusters(
                k,
                dim,
                per_class,
                spread,
                &mut seeds::stream(seed, 0),
            )
            .map_err(py_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn shape(&self) -> Option<(usize, usize)> {
        self.inner.shape()
    }

    fn vector(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.inner.vector(i).to_vec())
    }

    fn label(&self, i: usize) -> PyResult<u8> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.inner.label(i))
    }

    /// Uniform subset without replacement.
    fn subset(&self, n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self
                .inner
                .subset(n, &mut seeds::stream(seed, 0))
                .map_err(py_err)?,
        })
    }

    /// Block-average pooling by `factor`.
    fn downsample(&self, factor: usize) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.downsample(factor).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(len={}, dim={})",
            self.inner.len(),
            self.inner.dim()
        )
    }
}

/// A self-organizing map.
#[pyclass(name = "Som")]
struct PySom {
    inner: SomState,
}

#[pymethods]
impl PySom {
    /// Fresh map with uniform random weights.
    #[new]
    fn new(n: usize, dim: usize, seed: u64) -> PyResult<Self> {
        Ok(PySom {
            inner: SomState::init(n, dim, &mut seeds::stream(seed, 0)).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PySom {
            inner: SomState::load_checkpoint(path).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_neurons(&self) -> usize {
        self.inner.n_neurons()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn step(&self) -> u64 {
        self.inner.step()
    }

    fn weight(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n_neurons() {
            return Err(PyValueError::new_err(format!("neuron {i} out of range")));
        }
        Ok(self.inner.weight(i).to_vec())
    }

    fn labels(&self) -> Vec<Option<u8>> {
        (0..self.inner.n_neurons())
            .map(|i| self.inner.label(i))
            .collect()
    }

    fn find_bmu(&self, input: Vec<f64>) -> PyResult<usize> {
        self.inner
            .find_bmu(&input, 0..self.inner.n_neurons())
            .map_err(py_err)
    }

    /// Train on `topology` with the exponential decay schedule.
    ///
    /// Returns the fitness trace as `[(step, fitness), ...]`, one entry per
    /// evaluation hook (hooks need `test_set`).
    #[pyo3(signature = (topology, train_set, steps, eta0, sigma0, seed,
                        eta_final=0.01, sigma_final=0.0, nu=0.0,
                        test_set=None, hooks=None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        topology: &PyTopology,
        train_set: &PyDataset,
        steps: u64,
        eta0: f64,
        sigma0: f64,
        seed: u64,
        eta_final: f64,
        sigma_final: f64,
        nu: f64,
        test_set: Option<&PyDataset>,
        hooks: Option<Vec<u64>>,
    ) -> PyResult<Vec<(u64, f64)>> {
        let schedule =
            Schedule::new(eta0, eta_final, sigma0, sigma_final, steps).map_err(py_err)?;
        let opts = TrainOptions::new(schedule).with_noise(NoiseModel::new(nu).map_err(py_err)?);
        let df = all_pairs_distances(&topology.inner);
        let trace = som::train(
            &mut self.inner,
            &df,
            &train_set.inner,
            test_set.map(|d| &d.inner),
            &opts,
            &hooks.unwrap_or_default(),
            &mut seeds::stream(seed, 0),
        )
        .map_err(py_err)?;
        Ok(trace.into_iter().map(|s| (s.step, s.fitness)).collect())
    }

    /// Label every neuron from a labelled training set.
    fn label_neurons(&mut self, train_set: &PyDataset) -> PyResult<()> {
        self.inner.label_neurons(&train_set.inner).map_err(py_err)
    }

    /// Misclassification rate over a test set.
    fn evaluate(&self, test_set: &PyDataset) -> PyResult<f64> {
        self.inner.evaluate(&test_set.inner).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_checkpoint(path).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Som(n_neurons={}, dim={}, step={})",
            self.inner.n_neurons(),
            self.inner.dim(),
            self.inner.step()
        )
    }
}

/// Mutation strength (percent of links) at generation `g` of `g_max`.
#[pyfunction]
fn mutation_percent(g: u64, g_max: u64) -> f64 {
    evolution::mutation_percent(g, g_max)
}

/// Links rewired for mutation strength `c` on a graph with `edge_count` edges.
#[pyfunction]
fn links_to_rewire(c: f64, edge_count: usize) -> usize {
    evolution::links_to_rewire(c, edge_count)
}

/// Unpaired two-sample Student t-test; returns `(t, p)`.
#[pyfunction]
fn unpaired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = ttest::unpaired_t_test(&a, &b).map_err(py_err)?;
    Ok((r.t, r.p))
}

/// Best-so-far events: `(generation, fitness, msp, clustering, degree_std)`.
type EvolveLog = Vec<(u64, f64, f64, f64, f64)>;

/// Run one steady-state evolution of the neighbourhood topology.
///
/// Returns `(log, best_topology)` where `log` is a list of best-so-far
/// events `(generation, fitness, msp, clustering, degree_std)`.
#[pyfunction]
#[pyo3(signature = (train_set, test_set, pop_size, g_max, steps_per_phase, seed,
                    rows=10, cols=10, init_p=0.05, phases=5,
                    eta0=0.35, eta_final=0.01, sigma0=2.0, sigma_final=0.0))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    train_set: &PyDataset,
    test_set: &PyDataset,
    pop_size: usize,
    g_max: u64,
    steps_per_phase: u64,
    seed: u64,
    rows: usize,
    cols: usize,
    init_p: f64,
    phases: usize,
    eta0: f64,
    eta_final: f64,
    sigma0: f64,
    sigma_final: f64,
) -> PyResult<(EvolveLog, PyTopology)> {
    let cfg = EvoConfig {
        pop_size,
        g_max,
        init_p,
        select_k: 2,
        replace_k: 6,
        phases,
        steps_per_phase,
        train_n: train_set.inner.len(),
        test_n: test_set.inner.len(),
        eta0,
        eta_final,
        sigma0,
        sigma_final,
        rows,
        cols,
        seed,
    };
    let result =
        evolution::evolve(&cfg, &train_set.inner, &test_set.inner, |_, _| {}).map_err(py_err)?;
    let log = result
        .log
        .into_iter()
        .map(|e| {
            (
                e.generation,
                e.fitness,
                e.mean_shortest_path,
                e.clustering_index,
                e.degree_std,
            )
        })
        .collect();
    Ok((
        log,
        PyTopology {
            inner: result.best.topo,
        },
    ))
}

#[pymodule]
fn somnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PySom>()?;
    m.add_function(wrap_pyfunction!(mutation_percent, m)?)?;
    m.add_function(wrap_pyfunction!(links_to_rewire, m)?)?;
    m.add_function(wrap_pyfunction!(unpaired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    Ok(())
}
