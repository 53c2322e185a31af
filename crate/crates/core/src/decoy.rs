//! Key-rate mathematics for BB84 with weak coherent pulses and one decoy intensity.
//!
//! Every clamp in the bounds and in the final rate is reported through
//! [`RateFlags`] rather than failing, so parameter sweeps can cross regions
//! where the single-photon estimate is vacuous.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::GainStats;
use crate::error::{check_range, Error, Result};

/// Clamp and outcome markers attached to decoy estimates and key rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RateFlags(u8);

impl RateFlags {
    pub const NONE: Self = Self(0);
    /// Single-photon gain bound was negative and clamped to zero.
    pub const VACUOUS_Q1: Self = Self(1);
    /// Single-photon error bound was negative and clamped to zero.
    pub const E1_CLAMPED_LOW: Self = Self(1 << 1);
    /// Single-photon error bound exceeded 1/2 (or was undefined) and was clamped.
    pub const E1_CLAMPED_HIGH: Self = Self(1 << 2);
    /// Analytic key rate was not positive and is reported as zero.
    pub const NO_POSITIVE_KEY: Self = Self(1 << 3);

    const NAMES: [(RateFlags, &'static str); 4] = [
        (Self::VACUOUS_Q1, "vacuous_q1"),
        (Self::E1_CLAMPED_LOW, "e1_clamped_low"),
        (Self::E1_CLAMPED_HIGH, "e1_clamped_high"),
        (Self::NO_POSITIVE_KEY, "no_positive_key"),
    ];

    pub fn contains(self, other: Self) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Self) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::ops::BitOr for RateFlags {
    type Output = Self;
    fn bitor(self, rhs: Self) -> Self {
        Self(self.0 | rhs.0)
    }
}

impl fmt::Display for RateFlags {
    /// `|`-separated flag names; empty when no flag is set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (flag, name) in Self::NAMES {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Bounds on the single-photon gain and error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    pub q1_lower: f64,
    pub e1_upper: f64,
    pub flags: RateFlags,
}

impl DecoyEstimate {
    pub fn is_vacuous(&self) -> bool {
        self.flags.contains(RateFlags::VACUOUS_Q1)
    }
}

/// Quantities that entered a key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateComponents {
    pub q_mu: f64,
    pub e_mu: f64,
    pub q1: f64,
    pub e1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    /// Secret key fraction per sent pulse (never negative).
    pub k_per_pulse: f64,
    pub mu: f64,
    pub nu: f64,
    pub bits_per_second: Option<f64>,
    pub components: RateComponents,
    pub flags: RateFlags,
}

impl KeyRateResult {
    pub fn has_positive_key(&self) -> bool {
        !self.flags.contains(RateFlags::NO_POSITIVE_KEY)
    }

    pub fn with_modulation_rate(mut self, rate_hz: f64) -> Self {
        self.bits_per_second = Some(self.k_per_pulse * rate_hz);
        self
    }
}

/// `H(e)`, with `H(0) = H(1) = 0` by continuity.
pub fn binary_entropy(e: f64) -> Result<f64> {
    check_range("error rate", e, 0.0, 1.0, "[0, 1]")?;
    Ok(entropy(e))
}

pub(crate) fn entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        0.0
    } else {
        -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
    }
}

/// Bits per pulse for ideal single-photon BB84, `½·Q·(1 − 2H(e))`, floored at zero.
pub fn ideal_bb84_rate(gain: f64, e: f64) -> f64 {
    (0.5 * gain * (1.0 - 2.0 * entropy(e.clamp(0.0, 1.0)))).max(0.0)
}

/// Secret bits per sifted photon, `max(0, 1 − 2H(e))`.
pub fn sifted_key_fraction(e: f64) -> f64 {
    (1.0 - 2.0 * entropy(e.clamp(0.0, 1.0))).max(0.0)
}

/// Poisson photon-number probability `μⁿ e^{−μ} / n!`, evaluated in log space.
pub fn poisson_pn(mu: f64, n: u32) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n_f = f64::from(n);
    let log_fact: f64 = (2..=n).map(|k| f64::from(k).ln()).sum();
    (n_f * mu.ln() - mu - log_fact).exp()
}

fn check_ordering(mu: f64, nu: f64) -> Result<()> {
    if nu > 0.0 && nu < mu && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDecoyOrdering { mu, nu })
    }
}

/// Lower bound on the single-photon gain `Q₁`. Returns the clamped bound and
/// whether the clamp fired.
pub fn q1_lower_bound(q_mu: f64, q_nu: f64, mu: f64, nu: f64, y0: f64) -> Result<(f64, bool)> {
    check_ordering(mu, nu)?;
    let mu2 = mu * mu;
    let prefactor = mu2 * (-mu).exp() / (mu * nu - nu * nu);
    let bracket = q_nu * nu.exp() - q_mu * mu.exp() * (nu * nu) / mu2 - (mu2 - nu * nu) / mu2 * y0;
    let bound = prefactor * bracket;
    if bound > 0.0 {
        Ok((bound, false))
    } else {
        Ok((0.0, true))
    }
}

/// Upper bound on the single-photon error rate `e₁`, clamped into `[0, ½]`.
pub fn e1_upper_bound(
    e_nu: f64,
    q_nu: f64,
    nu: f64,
    y0: f64,
    q1_lower: f64,
    mu: f64,
) -> Result<(f64, RateFlags)> {
    if nu.is_nan() || nu <= 0.0 {
        return Err(Error::InvalidDecoyOrdering { mu, nu });
    }
    if q1_lower.is_nan() || q1_lower <= 0.0 {
        return Err(Error::VacuousSinglePhoton);
    }
    let numerator = e_nu * q_nu * nu.exp() - y0 / 2.0;
    let denominator = q1_lower * nu / (mu * (-mu).exp());
    let e1 = numerator / denominator;
    if e1 < 0.0 {
        Ok((0.0, RateFlags::E1_CLAMPED_LOW))
    } else if e1 > 0.5 {
        Ok((0.5, RateFlags::E1_CLAMPED_HIGH))
    } else {
        Ok((e1, RateFlags::NONE))
    }
}

/// Both decoy bounds from one set of gain statistics. A vacuous `Q₁` forces
/// `e₁ = ½`.
pub fn decoy_estimate(stats: &GainStats) -> Result<DecoyEstimate> {
    let (q1, vacuous) = q1_lower_bound(stats.q_mu, stats.q_nu, stats.mu, stats.nu, stats.y0)?;
    if vacuous {
        return Ok(DecoyEstimate {
            q1_lower: 0.0,
            e1_upper: 0.5,
            flags: RateFlags::VACUOUS_Q1 | RateFlags::E1_CLAMPED_HIGH,
        });
    }
    let (e1, flags) = e1_upper_bound(stats.e_nu, stats.q_nu, stats.nu, stats.y0, q1, stats.mu)?;
    Ok(DecoyEstimate {
        q1_lower: q1,
        e1_upper: e1,
        flags,
    })
}

/// `K = ½{−Q_μ f H(E_μ) + Q₁(1 − H(e₁))}` with a constant error-correction
/// inefficiency `f_ec`.
pub fn decoy_key_rate(stats: &GainStats, est: &DecoyEstimate, f_ec: f64) -> KeyRateResult {
    let e_mu = stats.e_mu.clamp(0.0, 1.0);
    let raw =
        0.5 * (-stats.q_mu * f_ec * entropy(e_mu) + est.q1_lower * (1.0 - entropy(est.e1_upper)));
    let mut flags = est.flags;
    let k = if raw > 0.0 {
        raw
    } else {
        flags.insert(RateFlags::NO_POSITIVE_KEY);
        0.0
    };
    KeyRateResult {
        k_per_pulse: k,
        mu: stats.mu,
        nu: stats.nu,
        bits_per_second: None,
        components: RateComponents {
            q_mu: stats.q_mu,
            e_mu: stats.e_mu,
            q1: est.q1_lower,
            e1: est.e1_upper,
        },
        flags,
    }
}
