//! Underwater link and detector model for weak coherent pulses.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Channel, detector and post-processing parameters.
///
/// Defaults are the measured flume values: 0.57 dB/m attenuation, 300 Hz dark
/// counts, a 10⁹ Hz source, detector efficiency 0.6 and receiver efficiency
/// 0.188.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub alpha_db_per_m: f64,
    pub length_m: f64,
    pub eta_detector: f64,
    pub eta_bob: f64,
    pub dark_rate_hz: f64,
    pub pulse_rate_hz: f64,
    /// Detection gate. `None` means one pulse period, `1 / pulse_rate_hz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_window_s: Option<f64>,
    pub e_det: f64,
    pub e0: f64,
    pub f_ec: f64,
    /// Treat `eta_bob` as already including the detector efficiency.
    pub bob_includes_detector: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha_db_per_m: 0.57,
            length_m: 10.5,
            eta_detector: 0.6,
            eta_bob: 0.188,
            dark_rate_hz: 300.0,
            pulse_rate_hz: 1e9,
            detection_window_s: None,
            e_det: 0.0027,
            e0: 0.5,
            f_ec: 1.22,
            bob_includes_detector: false,
        }
    }
}

impl ChannelParams {
    pub fn with_length(&self, length_m: f64) -> Self {
        Self {
            length_m,
            ..self.clone()
        }
    }

    pub fn detection_window(&self) -> f64 {
        self.detection_window_s.unwrap_or(1.0 / self.pulse_rate_hz)
    }

    /// Efficiency factor applied on top of the path loss.
    pub fn receiver_efficiency(&self) -> f64 {
        if self.bob_includes_detector {
            self.eta_bob
        } else {
            self.eta_detector * self.eta_bob
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range(
            "alpha_db_per_m",
            self.alpha_db_per_m,
            0.0,
            f64::MAX,
            "[0, inf)",
        )?;
        check_range("length_m", self.length_m, 0.0, f64::MAX, "[0, inf)")?;
        for (name, v) in [
            ("eta_detector", self.eta_detector),
            ("eta_bob", self.eta_bob),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "(0, 1]",
                });
            }
        }
        check_range("dark_rate_hz", self.dark_rate_hz, 0.0, f64::MAX, "[0, inf)")?;
        if !(self.pulse_rate_hz > 0.0 && self.pulse_rate_hz.is_finite()) {
            return Err(Error::OutOfRange {
                name: "pulse_rate_hz",
                value: self.pulse_rate_hz,
                range: "(0, inf)",
            });
        }
        check_range(
            "detection_window_s",
            self.detection_window(),
            0.0,
            f64::MAX,
            "[0, inf)",
        )?;
        if !(0.0..0.5).contains(&self.e_det) {
            return Err(Error::OutOfRange {
                name: "e_det",
                value: self.e_det,
                range: "[0, 0.5)",
            });
        }
        if self.e0 != 0.5 {
            return Err(Error::OutOfRange {
                name: "e0",
                value: self.e0,
                range: "{0.5}",
            });
        }
        check_range("f_ec", self.f_ec, 1.0, f64::MAX, "[1, inf)")?;
        let y0 = background_yield(self);
        check_range("background yield", y0, 0.0, 1.0, "[0, 1]")?;
        Ok(())
    }
}

/// Per-pulse gains and QBERs for the signal (`mu`) and decoy (`nu`) intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub mu: f64,
    pub nu: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    pub y0: f64,
}

/// End-to-end single-photon transmittance: receiver efficiency times path loss.
pub fn transmittance(p: &ChannelParams) -> f64 {
    let path = 10f64.powf(-p.alpha_db_per_m * p.length_m / 10.0);
    (p.receiver_efficiency() * path).clamp(0.0, 1.0)
}

/// Dark-count probability per detection window.
pub fn background_yield(p: &ChannelParams) -> f64 {
    p.dark_rate_hz * p.detection_window()
}

/// Click probability for an `n`-photon pulse: `Y₀ + 1 − (1 − η)ⁿ`, clamped.
pub fn yield_n(eta: f64, y0: f64, n: u32) -> f64 {
    if n == 0 {
        return y0.clamp(0.0, 1.0);
    }
    // 1 − (1 − η)ⁿ without cancellation for tiny η
    let signal = if eta >= 1.0 {
        1.0
    } else {
        -(f64::from(n) * (-eta).ln_1p()).exp_m1()
    };
    (y0 + signal).clamp(0.0, 1.0)
}

/// Click probability for a Poissonian pulse of mean `mu`: `Y₀ + 1 − e^{−ημ}`.
pub fn gain_model(mu: f64, eta: f64, y0: f64) -> f64 {
    (y0 - (-eta * mu).exp_m1()).clamp(0.0, 1.0)
}

/// Modeled QBER of a Poissonian pulse of mean `mu`.
pub fn qber_model(mu: f64, eta: f64, y0: f64, e_det: f64, e0: f64) -> Result<f64> {
    let q = gain_model(mu, eta, y0);
    if q <= 0.0 {
        return Err(Error::UndefinedQber);
    }
    let signal = -(-eta * mu).exp_m1();
    Ok((e0 * y0 + e_det * signal) / q)
}

pub fn gain_stats(p: &ChannelParams, mu: f64, nu: f64) -> Result<GainStats> {
    if !(nu >= 0.0 && nu < mu && mu.is_finite()) {
        return Err(Error::InvalidDecoyOrdering { mu, nu });
    }
    let eta = transmittance(p);
    let y0 = background_yield(p);
    let e_nu = if nu == 0.0 && y0 == 0.0 {
        // Vacuum decoy on a noiseless channel never clicks; its QBER is irrelevant.
        p.e0
    } else {
        qber_model(nu, eta, y0, p.e_det, p.e0)?
    };
    Ok(GainStats {
        mu,
        nu,
        q_mu: gain_model(mu, eta, y0),
        e_mu: qber_model(mu, eta, y0, p.e_det, p.e0)?,
        q_nu: gain_model(nu, eta, y0),
        e_nu,
        y0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(alpha: f64, length: f64) -> ChannelParams {
        ChannelParams {
            alpha_db_per_m: alpha,
            length_m: length,
            eta_detector: 1.0,
            eta_bob: 1.0,
            ..ChannelParams::default()
        }
    }

    // Poisson-weighted sum of yields, built independently of gain_model.
    fn gain_by_series(mu: f64, eta: f64, y0: f64) -> f64 {
        let mut term = (-mu).exp();
        let mut total = 0.0;
        for n in 0..=50u32 {
            if n > 0 {
                term *= mu / f64::from(n);
            }
            let yn = y0 + 1.0 - (1.0 - eta).powi(n as i32);
            total += yn * term;
        }
        total
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(transmittance(&lossless(0.57, 0.0)), 1.0);
        assert!((transmittance(&lossless(0.57, 10.0)) - 0.2692).abs() < 1e-4);
        let t3 = ChannelParams::default().with_length(30.5);
        let expected = 0.6 * 0.188 * 10f64.powf(-1.7385);
        assert!((transmittance(&t3) - expected).abs() < 1e-15);
        let inclusive = ChannelParams {
            bob_includes_detector: true,
            ..t3
        };
        assert!((transmittance(&inclusive) - 0.188 * 10f64.powf(-1.7385)).abs() < 1e-15);
    }

    #[test]
    fn transmittance_composes_over_length() {
        let p = ChannelParams::default();
        let e = p.receiver_efficiency();
        for (l1, l2) in [(1.0, 2.0), (10.5, 20.0), (0.0, 33.3)] {
            let lhs = transmittance(&p.with_length(l1 + l2));
            let rhs = transmittance(&p.with_length(l1)) * transmittance(&p.with_length(l2)) / e;
            assert!((lhs - rhs).abs() <= 1e-14 * lhs.max(1e-300));
        }
        let mut prev = f64::INFINITY;
        for l in 0..50 {
            let t = transmittance(&p.with_length(f64::from(l)));
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn background_yield_examples() {
        let p = ChannelParams::default();
        assert!((background_yield(&p) - 3e-7).abs() < 1e-20);
        let dark = ChannelParams {
            dark_rate_hz: 0.0,
            ..p.clone()
        };
        assert_eq!(background_yield(&dark), 0.0);
        let wide = ChannelParams {
            dark_rate_hz: 1000.0,
            detection_window_s: Some(1e-6),
            ..p
        };
        assert!((background_yield(&wide) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn yield_examples() {
        assert_eq!(yield_n(0.3, 1e-5, 0), 1e-5);
        for n in 1..10 {
            assert_eq!(yield_n(1.0, 0.0, n), 1.0);
        }
        assert!((yield_n(0.1, 1e-5, 1) - 0.10001).abs() < 1e-15);
        assert_eq!(yield_n(1.0, 1e-3, 3), 1.0);
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain_model(0.0, 0.1, 1e-5), 1e-5);
        let q = gain_model(0.5, 0.1, 1e-5);
        assert!((q - 0.048780).abs() < 1e-6);
        assert!((q - gain_by_series(0.5, 0.1, 1e-5)).abs() < 1e-10);
        assert_eq!(gain_model(0.5, 0.0, 1e-5), 1e-5);
    }

    #[test]
    fn gain_matches_series_and_is_monotone() {
        for &eta in &[1e-4, 0.01, 0.1, 0.5, 1.0] {
            for &y0 in &[0.0, 1e-6, 1e-3] {
                let mut prev = -1.0;
                for k in 0..=40 {
                    let mu = 0.05 * f64::from(k);
                    let q = gain_model(mu, eta, y0);
                    assert!((q - gain_by_series(mu, eta, y0)).abs() < 1e-10);
                    if k > 0 {
                        assert!(q > prev);
                    }
                    prev = q;
                }
            }
        }
        assert!(gain_model(0.5, 0.2, 1e-6) > gain_model(0.5, 0.1, 1e-6));
    }

    #[test]
    fn qber_examples() {
        assert!((qber_model(0.5, 0.1, 0.0, 0.013, 0.5).unwrap() - 0.013).abs() < 1e-15);
        let e = qber_model(1e-9, 1e-9, 1e-6, 0.01, 0.5).unwrap();
        assert!((e - 0.5).abs() < 1e-9);
        let e = qber_model(0.5, 0.1, 1e-5, 0.01, 0.5).unwrap();
        let signal = 1.0 - (-0.05f64).exp();
        let expected = (0.5e-5 + 0.01 * signal) / (1e-5 + signal);
        assert!((e - expected).abs() < 1e-15);
        assert_eq!(
            qber_model(0.0, 0.1, 0.0, 0.01, 0.5),
            Err(Error::UndefinedQber)
        );
    }

    #[test]
    fn qber_stays_between_edet_and_half() {
        for &eta in &[1e-5, 1e-3, 0.1, 1.0] {
            for &y0 in &[0.0, 1e-7, 1e-4, 1e-2] {
                for &e_det in &[0.0, 0.01, 0.2, 0.49] {
                    for &mu in &[1e-3, 0.1, 1.0, 5.0] {
                        let e = qber_model(mu, eta, y0, e_det, 0.5).unwrap();
                        assert!(e >= e_det.min(0.5) - 1e-15 && e <= 0.5 + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn gain_stats_examples() {
        let p = ChannelParams::default().with_length(10.5);
        assert_eq!(
            gain_stats(&p, 0.5, 0.5),
            Err(Error::InvalidDecoyOrdering { mu: 0.5, nu: 0.5 })
        );
        let s = gain_stats(&p, 0.5, 0.1).unwrap();
        assert!(s.y0 <= s.q_nu && s.q_nu <= s.q_mu);
        assert!(s.e_nu >= s.e_mu);
        assert!((s.y0 - 3e-7).abs() < 1e-20);

        let ideal = ChannelParams {
            dark_rate_hz: 0.0,
            ..lossless(0.0, 0.0)
        };
        let s = gain_stats(&ideal, 40.0, 0.1).unwrap();
        assert!((s.q_mu - 1.0).abs() < 1e-12);
        assert!(gain_stats(&ideal, 1.0, 0.0).is_ok());
    }

    #[test]
    fn validation() {
        assert!(ChannelParams::default().validate().is_ok());
        let bad = [
            ChannelParams {
                eta_bob: 0.0,
                ..Default::default()
            },
            ChannelParams {
                eta_detector: 1.5,
                ..Default::default()
            },
            ChannelParams {
                alpha_db_per_m: -1.0,
                ..Default::default()
            },
            ChannelParams {
                e_det: 0.5,
                ..Default::default()
            },
            ChannelParams {
                e0: 0.3,
                ..Default::default()
            },
            ChannelParams {
                f_ec: 0.9,
                ..Default::default()
            },
            ChannelParams {
                pulse_rate_hz: 0.0,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
