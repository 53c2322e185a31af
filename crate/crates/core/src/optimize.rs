//! Signal/decoy intensity optimization and rate-versus-distance sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{gain_stats, ChannelParams};
use crate::decoy::{decoy_estimate, decoy_key_rate, KeyRateResult, RateFlags};
use crate::error::{check_range, Error, Result};

/// Smallest relative separation kept between `nu` and `mu`. The bound's
/// `μν − ν²` denominator turns into rounding noise as `ν → μ`.
const MIN_RELATIVE_GAP: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Upper end of the signal intensity search interval `(0, mu_max]`.
    pub mu_max: f64,
    pub nu_min: f64,
    /// Points per axis of the log-uniform coarse grid.
    pub coarse_grid: usize,
    /// Coordinate-wise golden-section passes after the grid search.
    pub refine_iterations: usize,
    /// Stop refining when a pass improves K by less than this relative amount.
    pub tolerance: f64,
    /// Longest channel considered by [`max_secure_distance`].
    pub length_limit_m: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mu_max: 1.0,
            nu_min: 1e-4,
            coarse_grid: 64,
            refine_iterations: 3,
            tolerance: 1e-6,
            length_limit_m: 1000.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu_min > 0.0 && self.nu_min < self.mu_max && self.mu_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < nu_min < mu_max (got nu_min={}, mu_max={})",
                self.nu_min, self.mu_max
            )));
        }
        if self.coarse_grid < 8 {
            return Err(Error::InvalidConfig(format!(
                "coarse_grid must be at least 8 (got {})",
                self.coarse_grid
            )));
        }
        check_range("tolerance", self.tolerance, 0.0, f64::MAX, "[0, inf)")?;
        check_range(
            "length_limit_m",
            self.length_limit_m,
            0.0,
            f64::MAX,
            "[0, inf)",
        )?;
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let n = self.coarse_grid;
        let ratio = (self.mu_max / self.nu_min).ln();
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.mu_max
                } else {
                    self.nu_min * (ratio * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    }
}

/// Decoy key rate for fixed intensities. `measured_qber`, when given,
/// replaces the modeled signal QBER `E_μ`.
pub fn key_rate_at(
    p: &ChannelParams,
    mu: f64,
    nu: f64,
    measured_qber: Option<f64>,
) -> Result<KeyRateResult> {
    let mut stats = gain_stats(p, mu, nu)?;
    if nu <= 0.0 {
        return Err(Error::InvalidDecoyOrdering { mu, nu });
    }
    if let Some(e) = measured_qber {
        stats.e_mu = check_range("measured QBER", e, 0.0, 0.5, "[0, 0.5]")?;
    }
    let est = decoy_estimate(&stats)?;
    Ok(decoy_key_rate(&stats, &est, p.f_ec))
}

/// Maximizes the decoy key rate over `nu_min ≤ ν < μ ≤ mu_max`.
pub fn optimize_mu_nu(p: &ChannelParams, cfg: &OptimizerConfig) -> Result<KeyRateResult> {
    optimize_mu_nu_with_qber(p, cfg, None)
}

/// As [`optimize_mu_nu`], with an optional measured QBER in place of `E_μ`.
pub fn optimize_mu_nu_with_qber(
    p: &ChannelParams,
    cfg: &OptimizerConfig,
    measured_qber: Option<f64>,
) -> Result<KeyRateResult> {
    cfg.validate()?;
    p.validate()?;
    if let Some(e) = measured_qber {
        check_range("measured QBER", e, 0.0, 0.5, "[0, 0.5]")?;
    }
    let eval = |mu: f64, nu: f64| -> f64 {
        key_rate_at(p, mu, nu, measured_qber)
            .map(|r| r.k_per_pulse)
            .unwrap_or(0.0)
    };

    let grid = cfg.grid();
    let mut best: Option<(f64, f64, f64)> = None;
    for &mu in &grid {
        for &nu in grid
            .iter()
            .take_while(|&&nu| nu < mu * (1.0 - MIN_RELATIVE_GAP))
        {
            let k = eval(mu, nu);
            // strict comparison keeps the smallest mu among ties
            if best.is_none_or(|(bk, _, _)| k > bk) {
                best = Some((k, mu, nu));
            }
        }
    }
    let Some((mut k_best, mut mu_best, mut nu_best)) = best.filter(|b| b.0 > 0.0) else {
        let mut r = key_rate_at(p, cfg.mu_max, cfg.nu_min, measured_qber)?;
        r.flags.insert(RateFlags::NO_POSITIVE_KEY);
        r.k_per_pulse = 0.0;
        return Ok(r);
    };

    for _ in 0..cfg.refine_iterations {
        let start = k_best;

        let mu_lo = (nu_best / (1.0 - MIN_RELATIVE_GAP)).min(cfg.mu_max);
        let (mu, k) = golden_max(|mu| eval(mu, nu_best), mu_lo, cfg.mu_max);
        if k > k_best {
            (k_best, mu_best) = (k, mu);
        }

        let nu_hi = (mu_best * (1.0 - MIN_RELATIVE_GAP)).max(cfg.nu_min);
        let (nu, k) = golden_max(|nu| eval(mu_best, nu), cfg.nu_min, nu_hi);
        if k > k_best {
            (k_best, nu_best) = (k, nu);
        }

        if k_best - start <= cfg.tolerance * k_best.abs() {
            break;
        }
    }
    key_rate_at(p, mu_best, nu_best, measured_qber)
}

/// Golden-section search for the maximum of `f` on `[a, b]`. Returns the best
/// point actually evaluated, so a non-unimodal `f` can only cost accuracy.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    if b <= a {
        return (a, f(a));
    }
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a) <= 1e-12 * b.abs().max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx > best.1 {
                best = (x, fx);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub length_m: f64,
    pub k_per_pulse: f64,
    pub mu_opt: f64,
    pub nu_opt: f64,
    pub flags: RateFlags,
}

/// Optimized key rate sampled at increasing channel lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    /// Non-increasing K along the curve, allowing `rel_tol` relative slack for
    /// optimizer resolution.
    pub fn is_monotone_non_increasing(&self, rel_tol: f64) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].k_per_pulse <= w[0].k_per_pulse * (1.0 + rel_tol))
    }
}

pub fn distance_sweep(
    template: &ChannelParams,
    lengths: &[f64],
    cfg: &OptimizerConfig,
) -> Result<RateCurve> {
    if lengths.is_empty() {
        return Err(Error::EmptyInput("length sequence"));
    }
    if lengths
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidConfig(
            "lengths must be strictly increasing".into(),
        ));
    }
    let points = lengths
        .par_iter()
        .map(|&length_m| {
            let r = optimize_mu_nu(&template.with_length(length_m), cfg)?;
            Ok(RatePoint {
                length_m,
                k_per_pulse: r.k_per_pulse,
                mu_opt: r.mu,
                nu_opt: r.nu,
                flags: r.flags,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SecureDistance {
    /// Largest length (m) with a positive optimized key, to within 0.1 m.
    Cutoff(f64),
    /// Key is still positive at the configured search limit (m).
    BeyondLimit(f64),
}

impl SecureDistance {
    pub fn cutoff(self) -> Option<f64> {
        match self {
            SecureDistance::Cutoff(l) => Some(l),
            SecureDistance::BeyondLimit(_) => None,
        }
    }
}

pub fn max_secure_distance(
    template: &ChannelParams,
    cfg: &OptimizerConfig,
) -> Result<SecureDistance> {
    let positive = |l: f64| -> Result<bool> {
        Ok(optimize_mu_nu(&template.with_length(l), cfg)?.k_per_pulse > 0.0)
    };
    if !positive(0.0)? {
        return Err(Error::DeadChannel);
    }
    let limit = cfg.length_limit_m;
    if positive(limit)? {
        return Ok(SecureDistance::BeyondLimit(limit));
    }
    let (mut lo, mut hi) = (0.0, limit);
    while hi - lo > 0.05 {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SecureDistance::Cutoff(lo))
}
