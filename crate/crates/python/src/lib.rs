//! Python bindings for the `uwqkd` library.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uwqkd::channel::ChannelParams;
use uwqkd::decoy::KeyRateResult;
use uwqkd::montecarlo::SessionStats;
use uwqkd::optimize::{self, OptimizerConfig, SecureDistance};
use uwqkd::qstate::{self, PolLabel, VectorMode};
use uwqkd::tomography::{
    self, AberrationSpec, GridSpec, Projections, StokesField, ZernikeCoefficients,
};
use uwqkd::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::UndefinedQber
        | Error::VacuousSinglePhoton
        | Error::NoSiftedEvents
        | Error::DeadChannel => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn label(s: &str) -> PyResult<PolLabel> {
    s.parse().map_err(to_py)
}

/// Channel description; every field is a keyword argument with the library default.
#[pyclass(
    name = "ChannelParams",
    module = "uwqkd_py",
    get_all,
    set_all,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyChannel {
    alpha_db_per_m: f64,
    length_m: f64,
    eta_detector: f64,
    eta_bob: f64,
    dark_rate_hz: f64,
    pulse_rate_hz: f64,
    detection_window_s: Option<f64>,
    e_det: f64,
    e0: f64,
    f_ec: f64,
    bob_includes_detector: bool,
}

impl From<&ChannelParams> for PyChannel {
    fn from(p: &ChannelParams) -> Self {
        Self {
            alpha_db_per_m: p.alpha_db_per_m,
            length_m: p.length_m,
            eta_detector: p.eta_detector,
            eta_bob: p.eta_bob,
            dark_rate_hz: p.dark_rate_hz,
            pulse_rate_hz: p.pulse_rate_hz,
            detection_window_s: p.detection_window_s,
            e_det: p.e_det,
            e0: p.e0,
            f_ec: p.f_ec,
            bob_includes_detector: p.bob_includes_detector,
        }
    }
}

impl PyChannel {
    fn params(&self) -> PyResult<ChannelParams> {
        let p = ChannelParams {
            alpha_db_per_m: self.alpha_db_per_m,
            length_m: self.length_m,
            eta_detector: self.eta_detector,
            eta_bob: self.eta_bob,
            dark_rate_hz: self.dark_rate_hz,
            pulse_rate_hz: self.pulse_rate_hz,
            detection_window_s: self.detection_window_s,
            e_det: self.e_det,
            e0: self.e0,
            f_ec: self.f_ec,
            bob_includes_detector: self.bob_includes_detector,
        };
        p.validate().map_err(to_py)?;
        Ok(p)
    }
}

#[pymethods]
impl PyChannel {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut c = PyChannel::from(&ChannelParams::default());
        let Some(kwargs) = kwargs else {
            return Ok(c);
        };
        for (key, value) in kwargs.iter() {
            let key: String = key.extract()?;
            match key.as_str() {
                "alpha_db_per_m" => c.alpha_db_per_m = value.extract()?,
                "length_m" => c.length_m = value.extract()?,
                "eta_detector" => c.eta_detector = value.extract()?,
                "eta_bob" => c.eta_bob = value.extract()?,
                "dark_rate_hz" => c.dark_rate_hz = value.extract()?,
                "pulse_rate_hz" => c.pulse_rate_hz = value.extract()?,
                "detection_window_s" => c.detection_window_s = value.extract()?,
                "e_det" => c.e_det = value.extract()?,
                "e0" => c.e0 = value.extract()?,
                "f_ec" => c.f_ec = value.extract()?,
                "bob_includes_detector" => c.bob_includes_detector = value.extract()?,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown channel field {other:?}"
                    )))
                }
            }
        }
        c.params()?;
        Ok(c)
    }

    fn transmittance(&self) -> PyResult<f64> {
        Ok(uwqkd::channel::transmittance(&self.params()?))
    }

    fn background_yield(&self) -> PyResult<f64> {
        Ok(uwqkd::channel::background_yield(&self.params()?))
    }

    fn __repr__(&self) -> String {
        format!(
            "ChannelParams(alpha_db_per_m={}, length_m={}, eta_detector={}, eta_bob={}, dark_rate_hz={}, e_det={})",
            self.alpha_db_per_m, self.length_m, self.eta_detector, self.eta_bob, self.dark_rate_hz, self.e_det
        )
    }
}

fn rate_dict<'py>(py: Python<'py>, r: &KeyRateResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k_per_pulse", r.k_per_pulse)?;
    d.set_item("mu", r.mu)?;
    d.set_item("nu", r.nu)?;
    d.set_item("q_mu", r.components.q_mu)?;
    d.set_item("e_mu", r.components.e_mu)?;
    d.set_item("q1", r.components.q1)?;
    d.set_item("e1", r.components.e1)?;
    d.set_item("flags", r.flags.to_string())?;
    Ok(d)
}

fn session_dict<'py>(py: Python<'py>, s: &SessionStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pulses_sent", s.pulses_sent)?;
    d.set_item("detections", s.detections)?;
    d.set_item("sifted", s.sifted)?;
    d.set_item("errors", s.errors)?;
    d.set_item("q_hat", s.q_hat)?;
    d.set_item("e_hat", s.e_hat)?;
    d.set_item("q_se", s.q_se)?;
    d.set_item("e_se", s.e_se)?;
    d.set_item("seed", s.seed)?;
    Ok(d)
}

/// Key bits per sifted photon, `1 − 2H(e)` floored at zero.
#[pyfunction]
fn sifted_key_fraction(qber: f64) -> PyResult<f64> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(PyValueError::new_err("qber must lie in [0, 0.5]"));
    }
    Ok(uwqkd::decoy::sifted_key_fraction(qber))
}

#[pyfunction]
fn binary_entropy(e: f64) -> PyResult<f64> {
    uwqkd::decoy::binary_entropy(e).map_err(to_py)
}

/// Decoy key rate at fixed intensities; `qber` replaces the modeled signal QBER.
#[pyfunction]
#[pyo3(signature = (channel, mu, nu, qber=None))]
fn key_rate<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    mu: f64,
    nu: f64,
    qber: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = optimize::key_rate_at(&channel.params()?, mu, nu, qber).map_err(to_py)?;
    rate_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (channel, qber=None))]
fn optimize_intensities<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    qber: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = channel.params()?;
    let r =
        optimize::optimize_mu_nu_with_qber(&p, &OptimizerConfig::default(), qber).map_err(to_py)?;
    rate_dict(py, &r)
}

/// Cutoff length in metres, or `None` when the key survives the search limit.
#[pyfunction]
fn max_secure_distance(channel: &PyChannel) -> PyResult<Option<f64>> {
    let d = optimize::max_secure_distance(&channel.params()?, &OptimizerConfig::default())
        .map_err(to_py)?;
    Ok(match d {
        SecureDistance::Cutoff(l) => Some(l),
        SecureDistance::BeyondLimit(_) => None,
    })
}

#[pyfunction]
#[pyo3(signature = (channel, mu, pulses, seed=0))]
fn simulate_session<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    mu: f64,
    pulses: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = channel.params()?;
    let s = py
        .detach(|| uwqkd::montecarlo::simulate_session(&p, mu, pulses, seed))
        .map_err(to_py)?;
    session_dict(py, &s)
}

/// `|⟨a|b⟩|²` for two polarization labels such as `"H"` and `"D"`.
#[pyfunction]
fn overlap(a: &str, b: &str) -> PyResult<f64> {
    Ok(qstate::overlap_prob(
        &qstate::make_pol_state(label(a)?),
        &qstate::make_pol_state(label(b)?),
    ))
}

/// QBER of a detection matrix with rows and columns ordered `{0₀, 1₀, 0₁, 1₁}`.
#[pyfunction]
fn qber_from_matrix(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let m = qstate::ProbMatrix::from_rows(rows).map_err(to_py)?;
    qstate::qber_from_matrix(&m, &qstate::BasisAssignment::bb84()).map_err(to_py)
}

fn run_tomography(
    mode: &str,
    grid: GridSpec,
    aberration: &AberrationSpec,
    threshold: f64,
) -> uwqkd::Result<StokesField> {
    let kind: VectorMode = mode.parse()?;
    let field = tomography::make_vector_mode(kind, grid)?;
    let field = tomography::apply_aberration(&field, aberration)?;
    tomography::reconstruct_stokes(&Projections::measure(&field), threshold)
}

/// Six-analyzer Stokes tomography of a vector vortex mode. Returns a dict of
/// flat row-major lists (`x`, `y`, `intensity`, `s1`, `s2`, `s3`, `valid`).
#[pyfunction]
#[pyo3(signature = (mode, size=128, extent=8.0, seed=None, rms_per_meter=0.0, length_m=0.0, threshold=tomography::DEFAULT_VALID_THRESHOLD))]
#[allow(clippy::too_many_arguments)]
fn stokes_tomography<'py>(
    py: Python<'py>,
    mode: &str,
    size: usize,
    extent: f64,
    seed: Option<u64>,
    rms_per_meter: f64,
    length_m: f64,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = GridSpec {
        size,
        extent,
        waist: 1.0,
    };
    let aberration = AberrationSpec {
        fixed: ZernikeCoefficients::default(),
        seed,
        rms_per_meter,
        length_m,
    };
    let s = py
        .detach(|| run_tomography(mode, grid, &aberration, threshold))
        .map_err(to_py)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..grid.len()).map(|i| grid.coords(i)).unzip();
    let d = PyDict::new(py);
    d.set_item("size", size)?;
    d.set_item("x", xs)?;
    d.set_item("y", ys)?;
    d.set_item("intensity", &s.intensity)?;
    for (k, name) in ["s1", "s2", "s3"].iter().enumerate() {
        let col: Vec<f64> = s.stokes.iter().map(|v| v[k]).collect();
        d.set_item(*name, col)?;
    }
    d.set_item("valid", &s.valid)?;
    Ok(d)
}

#[pymodule]
fn uwqkd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(sifted_key_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_intensities, m)?)?;
    m.add_function(wrap_pyfunction!(max_secure_distance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_session, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(qber_from_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_tomography, m)?)?;
    Ok(())
}
