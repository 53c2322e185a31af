//! Decoy-state BB84 analysis for underwater optical channels, with a
//! pulse-level simulator and Stokes tomography of vector vortex modes.

pub mod channel;
pub mod cli;
pub mod decoy;
pub mod error;
pub mod montecarlo;
pub mod optimize;
pub mod output;
pub mod qstate;
pub mod tomography;

pub use channel::{gain_stats, ChannelParams, GainStats};
pub use decoy::{
    binary_entropy, decoy_estimate, decoy_key_rate, sifted_key_fraction, DecoyEstimate,
    KeyRateResult, RateFlags,
};
pub use error::{Error, Result};
pub use montecarlo::{simulate_session, SessionStats};
pub use optimize::{
    distance_sweep, key_rate_at, max_secure_distance, optimize_mu_nu, OptimizerConfig, RateCurve,
    SecureDistance,
};
pub use qstate::{PolLabel, SpinOrbitState, VectorMode};
pub use tomography::{GridSpec, StokesField, VectorField};
