//! Python bindings: system and modulation types, the closed-form metrics,
//! the interference mixture, the feedback planner and the Monte Carlo sweep.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use iacsi::analysis::{self, BudgetPolicy, PairAnalysis};
use iacsi::simulator::{self, QuantMode, SimOptions, SweepRequest};
use iacsi::{special_fn, Bits, Error, FeedbackConfig, ModulationFamily};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Domain { .. } | Error::Quadrature { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn bits_of(obj: &Bound<'_, PyAny>) -> PyResult<Bits> {
    if obj.is_none() {
        return Ok(Bits::Infinite);
    }
    if let Ok(s) = obj.extract::<String>() {
        return s.parse().map_err(to_py);
    }
    if let Ok(b) = obj.extract::<u32>() {
        return Ok(Bits::Finite(b));
    }
    match obj.extract::<f64>() {
        Ok(x) if x == f64::INFINITY => Ok(Bits::Infinite),
        _ => Err(PyValueError::new_err("bits must be a nonnegative int, 'inf' or None")),
    }
}

/// A scalar applies to every link; a K x K nested list sets each one.
fn feedback_of(sys: &SystemConfig, obj: &Bound<'_, PyAny>) -> PyResult<FeedbackConfig> {
    let fb = match obj.cast::<PyList>() {
        Ok(rows) => {
            let bits = rows
                .iter()
                .map(|row| row.try_iter()?.map(|b| bits_of(&b?)).collect::<PyResult<Vec<_>>>())
                .collect::<PyResult<Vec<_>>>()?;
            FeedbackConfig { bits }
        }
        Err(_) => FeedbackConfig::uniform(sys.inner.k, bits_of(obj)?),
    };
    fb.validate(&sys.inner).map_err(to_py)?;
    Ok(fb)
}

#[pyclass(module = "pyiacsi", from_py_object)]
#[derive(Clone)]
struct SystemConfig {
    inner: analysis::SystemConfig,
}

#[pymethods]
impl SystemConfig {
    #[new]
    #[pyo3(signature = (nt, nr, d, alpha, p = 1.0, sigma2 = 1.0))]
    fn new(nt: usize, nr: usize, d: Vec<u32>, alpha: Vec<Vec<f64>>, p: f64, sigma2: f64) -> PyResult<Self> {
        Ok(SystemConfig {
            inner: analysis::SystemConfig::new(nt, nr, d, alpha, p, sigma2).map_err(to_py)?,
        })
    }

    /// Three pairs, 4x2 antennas, one stream each, standard path losses.
    #[staticmethod]
    #[pyo3(signature = (snr_db = 10.0))]
    fn table1(snr_db: f64) -> Self {
        SystemConfig {
            inner: analysis::SystemConfig::table1(snr_db),
        }
    }

    fn with_snr_db(&self, snr_db: f64) -> Self {
        SystemConfig {
            inner: self.inner.with_snr_db(snr_db),
        }
    }

    fn with_streams(&self, d: Vec<u32>) -> PyResult<Self> {
        let inner = self.inner.with_streams(d);
        inner.validate().map_err(to_py)?;
        Ok(SystemConfig { inner })
    }

    fn kappa(&self, k: usize, i: usize) -> PyResult<f64> {
        if k >= self.inner.k || i >= self.inner.k {
            return Err(PyValueError::new_err("pair index out of range"));
        }
        Ok(self.inner.kappa(k, i))
    }

    fn feasible(&self) -> bool {
        simulator::feasibility_check(&self.inner).feasible
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn nt(&self) -> usize {
        self.inner.nt
    }

    #[getter]
    fn nr(&self) -> usize {
        self.inner.nr
    }

    #[getter]
    fn d(&self) -> Vec<u32> {
        self.inner.d.clone()
    }

    #[getter]
    fn alpha(&self) -> Vec<Vec<f64>> {
        self.inner.alpha.clone()
    }

    #[getter]
    fn snr_db(&self) -> f64 {
        self.inner.snr_db()
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(K={}, nt={}, nr={}, d={:?}, snr_db={:.3})",
            self.inner.k,
            self.inner.nt,
            self.inner.nr,
            self.inner.d,
            self.inner.snr_db()
        )
    }
}

#[pyclass(module = "pyiacsi", from_py_object)]
#[derive(Clone)]
struct Modulation {
    inner: analysis::Modulation,
}

#[pymethods]
impl Modulation {
    /// `family` is "psk", "pam" or "qam" (any case).
    #[new]
    fn new(family: &str, order: u32) -> PyResult<Self> {
        let family = match family.to_ascii_lowercase().as_str() {
            "psk" => ModulationFamily::Psk,
            "pam" => ModulationFamily::Pam,
            "qam" => ModulationFamily::Qam,
            other => return Err(PyValueError::new_err(format!("unknown modulation family {other:?}"))),
        };
        Ok(Modulation {
            inner: analysis::Modulation::new(family, order).map_err(to_py)?,
        })
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order
    }

    fn conditional_ser(&self, gamma: f64) -> f64 {
        analysis::conditional_ser(&self.inner, gamma)
    }

    fn __repr__(&self) -> String {
        format!("Modulation({})", self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (sys, bits, gamma_th = 1.0, k = 0))]
fn outage_probability(sys: &SystemConfig, bits: &Bound<'_, PyAny>, gamma_th: f64, k: usize) -> PyResult<f64> {
    analysis::outage_probability(&sys.inner, &feedback_of(sys, bits)?, k, gamma_th).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, bits, gamma_th = 1.0, k = 0))]
fn outage_floor(sys: &SystemConfig, bits: &Bound<'_, PyAny>, gamma_th: f64, k: usize) -> PyResult<f64> {
    analysis::outage_floor(&sys.inner, &feedback_of(sys, bits)?, k, gamma_th).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, gamma_th = 1.0, k = 0))]
fn outage_perfect(sys: &SystemConfig, gamma_th: f64, k: usize) -> PyResult<f64> {
    analysis::outage_perfect(&sys.inner, k, gamma_th).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, bits, k = 0))]
fn ergodic_rate(sys: &SystemConfig, bits: &Bound<'_, PyAny>, k: usize) -> PyResult<f64> {
    analysis::ergodic_rate(&sys.inner, &feedback_of(sys, bits)?, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, k = 0))]
fn ergodic_rate_perfect(sys: &SystemConfig, k: usize) -> PyResult<f64> {
    analysis::ergodic_rate_perfect(&sys.inner, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, bits, k = 0))]
fn rate_ceiling(sys: &SystemConfig, bits: &Bound<'_, PyAny>, k: usize) -> PyResult<f64> {
    analysis::rate_ceiling(&sys.inner, &feedback_of(sys, bits)?, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, bits, k = 0))]
fn rate_high_largeb(sys: &SystemConfig, bits: &Bound<'_, PyAny>, k: usize) -> PyResult<f64> {
    analysis::rate_high_largeb(&sys.inner, &feedback_of(sys, bits)?, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, bits, modulation, k = 0))]
fn ser_average(sys: &SystemConfig, bits: &Bound<'_, PyAny>, modulation: &Modulation, k: usize) -> PyResult<f64> {
    analysis::ser_average(&sys.inner, &feedback_of(sys, bits)?, k, &modulation.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, modulation, k = 0))]
fn ser_perfect(sys: &SystemConfig, modulation: &Modulation, k: usize) -> PyResult<f64> {
    analysis::ser_perfect(&sys.inner, k, &modulation.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sys, bits, modulation, k = 0))]
fn ser_floor(sys: &SystemConfig, bits: &Bound<'_, PyAny>, modulation: &Modulation, k: usize) -> PyResult<f64> {
    analysis::ser_floor(&sys.inner, &feedback_of(sys, bits)?, k, &modulation.inner).map_err(to_py)
}

#[pyfunction]
fn z_term(t: u32, theta: f64) -> PyResult<f64> {
    analysis::z_term(t, theta).map_err(to_py)
}

/// `(shape, scale, weight)` components of the residual interference law.
#[pyfunction]
#[pyo3(signature = (sys, bits, k = 0))]
fn interference_mixture(sys: &SystemConfig, bits: &Bound<'_, PyAny>, k: usize) -> PyResult<Vec<(u32, f64, f64)>> {
    let pa = PairAnalysis::new(&sys.inner, &feedback_of(sys, bits)?, k).map_err(to_py)?;
    Ok(pa.interference.components().iter().map(|c| (c.shape, c.scale, c.weight)).collect())
}

/// Bits per link and in total at each SNR for a constant-gap policy.
#[pyfunction]
#[pyo3(signature = (sys, snr_db, b0, snr0_db, policy = "constant-outage-gap", k = 0))]
fn feedback_budget(
    sys: &SystemConfig,
    snr_db: Vec<f64>,
    b0: u32,
    snr0_db: f64,
    policy: &str,
    k: usize,
) -> PyResult<Vec<(u32, u32)>> {
    let policy = match policy {
        "constant-outage-gap" => BudgetPolicy::ConstantOutageGap { b0, snr0_db },
        "constant-rate-gap" => BudgetPolicy::ConstantRateGap { b0, snr0_db },
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    };
    let grid: Vec<f64> = snr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let sched = analysis::feedback_budget(&sys.inner, k, &grid, policy).map_err(to_py)?;
    Ok(sched.iter().map(|s| (s.per_link, s.total)).collect())
}

#[pyfunction]
#[pyo3(signature = (sys, target, gamma_th = 1.0, b_max = 256, k = 0))]
fn min_bits_for_outage_floor(sys: &SystemConfig, target: f64, gamma_th: f64, b_max: u32, k: usize) -> PyResult<u32> {
    analysis::min_bits_for_outage_floor(&sys.inner, k, gamma_th, target, b_max).map_err(to_py)
}

/// Monte Carlo sweep over feedback budgets and SNRs. Returns a dict of
/// flat lists in (bits, snr) order plus the per-budget interference means.
#[pyfunction]
#[pyo3(signature = (sys, bits, snr_db, gamma_th = 1.0, modulations = vec![], trials = 100_000, seed = 1, mode = "error-model", k = 0, j = 0, threads = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    sys: &SystemConfig,
    bits: Vec<Bound<'py, PyAny>>,
    snr_db: Vec<f64>,
    gamma_th: f64,
    modulations: Vec<Modulation>,
    trials: u64,
    seed: u64,
    mode: &str,
    k: usize,
    j: usize,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = match mode {
        "error-model" => QuantMode::ErrorModel,
        "rvq" => QuantMode::Rvq,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let fbs = bits.iter().map(|b| feedback_of(sys, b)).collect::<PyResult<Vec<_>>>()?;
    let labels: Vec<String> = fbs.iter().map(|f| f.bits[0][0].to_string()).collect();
    let req = SweepRequest {
        gamma_th,
        modulations: modulations.iter().map(|m| m.inner).collect(),
    };
    let opts = SimOptions {
        trials,
        seed,
        mode,
        threads,
        ..SimOptions::default()
    };
    let inner = sys.inner.clone();
    let result = py
        .detach(move || simulator::sweep(&inner, &fbs, k, j, &snr_db, &req, opts))
        .map_err(to_py)?;

    let out = PyDict::new(py);
    let (mut b, mut s, mut om, mut os, mut rm, mut rs) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    let mut ser: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![], vec![]); modulations.len()];
    for c in &result.cells {
        b.push(labels[c.config].clone());
        s.push(c.snr_db);
        om.push(c.outage.mean);
        os.push(c.outage.stderr);
        rm.push(c.rate.mean);
        rs.push(c.rate.stderr);
        for (acc, e) in ser.iter_mut().zip(&c.ser) {
            acc.0.push(e.mean);
            acc.1.push(e.stderr);
        }
    }
    out.set_item("bits", b)?;
    out.set_item("snr_db", s)?;
    out.set_item("outage", om)?;
    out.set_item("outage_se", os)?;
    out.set_item("rate", rm)?;
    out.set_item("rate_se", rs)?;
    for (m, (mean, se)) in modulations.iter().zip(ser) {
        let tag = m.inner.to_string().to_lowercase();
        out.set_item(format!("ser_{tag}"), mean)?;
        out.set_item(format!("ser_{tag}_se"), se)?;
    }
    out.set_item("interference", result.interference.iter().map(|e| e.mean).collect::<Vec<_>>())?;
    out.set_item("interference_se", result.interference.iter().map(|e| e.stderr).collect::<Vec<_>>())?;
    out.set_item("nonconverged_fraction", result.nonconverged_fraction())?;
    out.set_item("trials", result.trials)?;
    Ok(out)
}

#[pyfunction]
fn exp_integral_e1(x: f64) -> PyResult<f64> {
    special_fn::exp_integral_e1(x).map_err(to_py)
}

#[pyfunction]
fn exp_integral_e1_scaled(x: f64) -> PyResult<f64> {
    special_fn::exp_integral_e1_scaled(x).map_err(to_py)
}

#[pyfunction]
fn upper_incomplete_gamma_int(a: i32, x: f64) -> PyResult<f64> {
    special_fn::upper_incomplete_gamma_int(a, x).map_err(to_py)
}

#[pyfunction]
fn digamma_int(n: u32) -> PyResult<f64> {
    special_fn::digamma_int(n).map_err(to_py)
}

#[pymodule]
fn pyiacsi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<SystemConfig>()?;
    m.add_class::<Modulation>()?;
    m.add_function(wrap_pyfunction!(outage_probability, m)?)?;
    m.add_function(wrap_pyfunction!(outage_floor, m)?)?;
    m.add_function(wrap_pyfunction!(outage_perfect, m)?)?;
    m.add_function(wrap_pyfunction!(ergodic_rate, m)?)?;
    m.add_function(wrap_pyfunction!(ergodic_rate_perfect, m)?)?;
    m.add_function(wrap_pyfunction!(rate_ceiling, m)?)?;
    m.add_function(wrap_pyfunction!(rate_high_largeb, m)?)?;
    m.add_function(wrap_pyfunction!(ser_average, m)?)?;
    m.add_function(wrap_pyfunction!(ser_perfect, m)?)?;
    m.add_function(wrap_pyfunction!(ser_floor, m)?)?;
    m.add_function(wrap_pyfunction!(z_term, m)?)?;
    m.add_function(wrap_pyfunction!(interference_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(feedback_budget, m)?)?;
    m.add_function(wrap_pyfunction!(min_bits_for_outage_floor, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(exp_integral_e1, m)?)?;
    m.add_function(wrap_pyfunction!(exp_integral_e1_scaled, m)?)?;
    m.add_function(wrap_pyfunction!(upper_incomplete_gamma_int, m)?)?;
    m.add_function(wrap_pyfunction!(digamma_int, m)?)?;
    Ok(())
}
