//! Pulse-by-pulse BB84 session simulator.
//!
//! Used as a stochastic oracle for the analytic gain and QBER model. Pulses
//! are split into fixed-size blocks; block `b` draws from the ChaCha stream
//! `b` of the master seed, so the result does not depend on how blocks are
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{background_yield, gain_model, qber_model, transmittance, ChannelParams};
use crate::error::{Error, Result};

pub const BLOCK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    pulses: u64,
    detections: u64,
    sifted: u64,
    errors: u64,
}

impl std::ops::Add for Counts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            pulses: self.pulses + o.pulses,
            detections: self.detections + o.detections,
            sifted: self.sifted + o.sifted,
            errors: self.errors + o.errors,
        }
    }
}

/// Counts and estimates from one simulated session. Field names match the
/// JSON record emitted by the `montecarlo` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub pulses_sent: u64,
    pub detections: u64,
    pub sifted: u64,
    pub errors: u64,
    pub q_hat: f64,
    /// `None` when nothing was sifted.
    pub e_hat: Option<f64>,
    pub q_se: f64,
    pub e_se: Option<f64>,
    pub seed: u64,
}

impl SessionStats {
    pub fn from_counts(
        pulses_sent: u64,
        detections: u64,
        sifted: u64,
        errors: u64,
        seed: u64,
    ) -> Self {
        let q_hat = ratio(detections, pulses_sent);
        let q_se = binomial_se(q_hat, pulses_sent);
        let e_hat = (sifted > 0).then(|| ratio(errors, sifted));
        let e_se = e_hat.map(|e| binomial_se(e, sifted));
        Self {
            pulses_sent,
            detections,
            sifted,
            errors,
            q_hat,
            e_hat,
            q_se,
            e_se,
            seed,
        }
    }
}

fn ratio(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

struct PulseModel {
    eta: f64,
    y0: f64,
    e_det: f64,
    photons: Option<Poisson<f64>>,
}

impl PulseModel {
    fn run_block(&self, seed: u64, block: u64, pulses: u64) -> Counts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let mut c = Counts {
            pulses,
            ..Counts::default()
        };
        for _ in 0..pulses {
            let n = match &self.photons {
                Some(d) => d.sample(&mut rng) as u64,
                None => 0,
            };
            // per-photon survival; one surviving photon is enough to click
            let mut signal = false;
            for _ in 0..n {
                if rng.random::<f64>() < self.eta {
                    signal = true;
                    break;
                }
            }
            let dark = self.y0 > 0.0 && rng.random::<f64>() < self.y0;
            if !(signal || dark) {
                continue;
            }
            c.detections += 1;
            let alice_basis: bool = rng.random();
            let bob_basis: bool = rng.random();
            if alice_basis != bob_basis {
                continue;
            }
            c.sifted += 1;
            // signal wins a double click; a dark-only click is a coin flip
            let flip_p = if signal { self.e_det } else { 0.5 };
            if rng.random::<f64>() < flip_p {
                c.errors += 1;
            }
        }
        c
    }
}

pub fn simulate_session(
    p: &ChannelParams,
    mu: f64,
    n_pulses: u64,
    seed: u64,
) -> Result<SessionStats> {
    if n_pulses == 0 {
        return Err(Error::EmptyInput("n_pulses must be at least 1"));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            range: "[0, inf)",
        });
    }
    p.validate()?;
    let photons = if mu > 0.0 {
        Some(Poisson::new(mu).map_err(|_| Error::OutOfRange {
            name: "mu",
            value: mu,
            range: "Poisson-compatible mean",
        })?)
    } else {
        None
    };
    let model = PulseModel {
        eta: transmittance(p),
        y0: background_yield(p),
        e_det: p.e_det,
        photons,
    };
    let blocks = n_pulses.div_ceil(BLOCK_SIZE);
    let total = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let pulses = BLOCK_SIZE.min(n_pulses - b * BLOCK_SIZE);
            model.run_block(seed, b, pulses)
        })
        .reduce(Counts::default, |a, b| a + b);
    Ok(SessionStats::from_counts(
        total.pulses,
        total.detections,
        total.sifted,
        total.errors,
        seed,
    ))
}

/// `(q_hat, e_hat)`; the QBER estimate fails when nothing was sifted.
pub fn estimate_gain_qber(stats: &SessionStats) -> (f64, Result<f64>) {
    let q = ratio(stats.detections, stats.pulses_sent);
    let e = if stats.sifted == 0 {
        Err(Error::NoSiftedEvents)
    } else {
        Ok(ratio(stats.errors, stats.sifted))
    };
    (q, e)
}

/// Comparison of a simulated session against the analytic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCheck {
    pub q_model: f64,
    pub e_model: f64,
    /// `|q_hat − q_model| / q_se`
    pub q_sigma: f64,
    pub e_sigma: f64,
    pub within_band: bool,
}

fn sigma_distance(estimate: f64, model: f64, se: f64) -> f64 {
    let diff = (estimate - model).abs();
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY
    }
}

/// Whether the analytic `Q_μ` and `E_μ` fall within `band` standard errors of
/// the simulated estimates.
pub fn check_against_model(
    stats: &SessionStats,
    p: &ChannelParams,
    mu: f64,
    band: f64,
) -> Result<ModelCheck> {
    let eta = transmittance(p);
    let y0 = background_yield(p);
    let q_model = gain_model(mu, eta, y0);
    let e_model = qber_model(mu, eta, y0, p.e_det, p.e0)?;
    let (e_hat, e_se) = match (stats.e_hat, stats.e_se) {
        (Some(e), Some(se)) => (e, se),
        _ => return Err(Error::NoSiftedEvents),
    };
    let q_sigma = sigma_distance(stats.q_hat, q_model, stats.q_se);
    let e_sigma = sigma_distance(e_hat, e_model, e_se);
    Ok(ModelCheck {
        q_model,
        e_model,
        q_sigma,
        e_sigma,
        within_band: q_sigma <= band && e_sigma <= band,
    })
}
