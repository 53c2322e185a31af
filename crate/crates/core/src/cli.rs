//! Command-line front end: configuration loading, subcommands and exit codes.
//!
//! Exit status is 0 on success, 1 for usage or validation errors and 2 when a
//! computation fails (including I/O on the output path and a failed
//! `montecarlo --check`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::decoy::{sifted_key_fraction, KeyRateResult};
use crate::error::Error;
use crate::montecarlo::{check_against_model, simulate_session};
use crate::optimize::{
    distance_sweep, key_rate_at, max_secure_distance, optimize_mu_nu_with_qber, OptimizerConfig,
    SecureDistance,
};
use crate::output::{fmt_float, rate_curve_csv, stokes_csv, stokes_json, write_pgm};
use crate::qstate::{PolLabel, VectorMode};
use crate::tomography::{
    apply_aberration, make_vector_mode, reconstruct_stokes, AberrationSpec, GridSpec, Projections,
    ZernikeCoefficients,
};

/// Standard-error band used by `montecarlo --check`.
pub const CHECK_BAND_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// On-disk configuration: a flat JSON object. Missing keys take the defaults
/// of [`ChannelParams`] and a 100 MHz modulation rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha_db_per_m: f64,
    pub length_m: f64,
    pub eta_detector: f64,
    pub eta_bob: f64,
    pub dark_rate_hz: f64,
    pub pulse_rate_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_window_s: Option<f64>,
    pub e_det: f64,
    pub e0: f64,
    pub f_ec: f64,
    pub bob_includes_detector: bool,
    pub modulation_rate_hz: f64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self::from_parts(&ChannelParams::default(), 1e8)
    }
}

impl ConfigFile {
    pub fn from_parts(p: &ChannelParams, modulation_rate_hz: f64) -> Self {
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
            modulation_rate_hz,
        }
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
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
        }
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Everything a command needs besides its own arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub optimizer: OptimizerConfig,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub modulation_rate_hz: f64,
}

impl RunConfig {
    pub fn load(
        path: Option<&Path>,
        output: Option<PathBuf>,
        format: Format,
    ) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                ConfigFile::parse(&text)?
            }
            None => ConfigFile::default(),
        };
        let channel = file.channel();
        channel.validate()?;
        if !(file.modulation_rate_hz > 0.0 && file.modulation_rate_hz.is_finite()) {
            return Err(CliError::Usage(
                "modulation_rate_hz must be positive".into(),
            ));
        }
        Ok(Self {
            channel,
            optimizer: OptimizerConfig::default(),
            output,
            format,
            modulation_rate_hz: file.modulation_rate_hz,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UndefinedQber
            | Error::VacuousSinglePhoton
            | Error::NoSiftedEvents
            | Error::DeadChannel => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "uwqkd",
    version,
    about = "Underwater decoy-state BB84 analysis"
)]
pub struct Cli {
    /// Flat JSON channel configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted, except for `tomography`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decoy key rate for fixed signal and decoy intensities.
    Keyrate {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        nu: f64,
        /// Channel length in metres (defaults to the config value).
        #[arg(long)]
        length: Option<f64>,
        /// Measured QBER replacing the modeled signal QBER.
        #[arg(long)]
        qber: Option<f64>,
    },
    /// Optimal intensities at one length, optionally with the maximum secure distance.
    Optimize {
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        qber: Option<f64>,
        #[arg(long)]
        max_distance: bool,
    },
    /// Optimized rate over a range of lengths.
    Sweep {
        #[arg(long)]
        l_min: f64,
        #[arg(long)]
        l_max: f64,
        #[arg(long)]
        step: f64,
    },
    /// Secret key per sifted photon, 1 − 2H(e).
    Sifted { qber: f64 },
    /// Pulse-level session simulation.
    Montecarlo {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        pulses: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        length: Option<f64>,
        /// Fail (exit 2) unless the analytic gain and QBER lie within 4 standard errors.
        #[arg(long)]
        check: bool,
    },
    /// Six-analyzer Stokes tomography of a vector vortex mode.
    Tomography {
        #[arg(long, default_value = "radial")]
        mode: String,
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Grid side length in beam waists.
        #[arg(long, default_value_t = 8.0)]
        extent: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Turbulence RMS phase per metre of channel (radians).
        #[arg(long, default_value_t = 0.0)]
        rms_per_meter: f64,
        #[arg(long, default_value_t = 0.0)]
        length: f64,
        #[arg(long, default_value_t = 0.0)]
        tip: f64,
        #[arg(long, default_value_t = 0.0)]
        tilt: f64,
        #[arg(long, default_value_t = 0.0)]
        astig_oblique: f64,
        #[arg(long, default_value_t = 0.0)]
        astig_vertical: f64,
        #[arg(long, default_value_t = 0.0)]
        defocus: f64,
        #[arg(long, default_value_t = crate::tomography::DEFAULT_VALID_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub length_m: f64,
    pub mu: f64,
    pub nu: f64,
    pub k_per_pulse: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub q1: f64,
    pub e1: f64,
    /// `k_per_pulse × pulse_rate_hz`
    pub bps_pulse_rate: f64,
    /// `k_per_pulse × modulation_rate_hz`
    pub bps_modulation_rate: f64,
    pub flags: String,
}

impl KeyRateReport {
    const CSV_HEADER: &'static str =
        "length_m,mu,nu,k_per_pulse,q_mu,e_mu,q1,e1,bps_pulse_rate,bps_modulation_rate,flags";

    fn new(cfg: &RunConfig, length_m: f64, r: &KeyRateResult) -> Self {
        Self {
            length_m,
            mu: r.mu,
            nu: r.nu,
            k_per_pulse: r.k_per_pulse,
            q_mu: r.components.q_mu,
            e_mu: r.components.e_mu,
            q1: r.components.q1,
            e1: r.components.e1,
            bps_pulse_rate: r.k_per_pulse * cfg.channel.pulse_rate_hz,
            bps_modulation_rate: r.k_per_pulse * cfg.modulation_rate_hz,
            flags: r.flags.to_string(),
        }
    }

    fn csv_row(&self) -> String {
        [
            self.length_m,
            self.mu,
            self.nu,
            self.k_per_pulse,
            self.q_mu,
            self.e_mu,
            self.q1,
            self.e1,
            self.bps_pulse_rate,
            self.bps_modulation_rate,
        ]
        .iter()
        .map(|&x| fmt_float(x))
        .chain(std::iter::once(self.flags.clone()))
        .collect::<Vec<_>>()
        .join(",")
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row()),
            Format::Json => to_json_line(self),
        }
    }
}

fn to_json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("report serializes");
    s.push('\n');
    s
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))
        }
    }
}

fn length_or_config(cfg: &RunConfig, length: Option<f64>) -> Result<ChannelParams, CliError> {
    let p = match length {
        Some(l) => cfg.channel.with_length(l),
        None => cfg.channel.clone(),
    };
    p.validate()?;
    Ok(p)
}

pub fn cmd_keyrate(
    cfg: &RunConfig,
    mu: f64,
    nu: f64,
    length: Option<f64>,
    qber: Option<f64>,
) -> Result<KeyRateReport, CliError> {
    let p = length_or_config(cfg, length)?;
    if !(nu > 0.0 && nu < mu) {
        return Err(CliError::Usage(format!(
            "need 0 < nu < mu (got mu={mu}, nu={nu})"
        )));
    }
    let r = key_rate_at(&p, mu, nu, qber)?.with_modulation_rate(cfg.modulation_rate_hz);
    Ok(KeyRateReport::new(cfg, p.length_m, &r))
}

pub fn cmd_optimize(
    cfg: &RunConfig,
    length: Option<f64>,
    qber: Option<f64>,
) -> Result<KeyRateReport, CliError> {
    let p = length_or_config(cfg, length)?;
    let r = optimize_mu_nu_with_qber(&p, &cfg.optimizer, qber)?;
    Ok(KeyRateReport::new(cfg, p.length_m, &r))
}

/// `l_min, l_min + step, …` up to and including `l_max`.
pub fn sweep_lengths(l_min: f64, l_max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(l_min.is_finite() && l_max.is_finite() && l_min >= 0.0 && l_min < l_max) {
        return Err(CliError::Usage(format!(
            "need 0 <= l_min < l_max (got {l_min}, {l_max})"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Usage(format!(
            "step must be positive (got {step})"
        )));
    }
    let count = ((l_max - l_min) / step * (1.0 + 1e-12)).floor() as usize + 1;
    Ok((0..count).map(|k| l_min + k as f64 * step).collect())
}

pub fn cmd_sweep(cfg: &RunConfig, l_min: f64, l_max: f64, step: f64) -> Result<String, CliError> {
    let lengths = sweep_lengths(l_min, l_max, step)?;
    let curve = distance_sweep(&cfg.channel, &lengths, &cfg.optimizer)?;
    Ok(match cfg.format {
        Format::Csv => rate_curve_csv(&curve),
        Format::Json => to_json_line(&curve),
    })
}

pub fn cmd_sifted(qber: f64) -> Result<String, CliError> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(CliError::Usage(format!(
            "qber must lie in [0, 0.5] (got {qber})"
        )));
    }
    Ok(format!("{:.4}\n", sifted_key_fraction(qber)))
}

pub fn cmd_montecarlo(
    cfg: &RunConfig,
    mu: f64,
    pulses: u64,
    seed: u64,
    length: Option<f64>,
    check: bool,
) -> Result<String, CliError> {
    if pulses == 0 {
        return Err(CliError::Usage("--pulses must be at least 1".into()));
    }
    let p = length_or_config(cfg, length)?;
    let stats = simulate_session(&p, mu, pulses, seed)?;
    let text = to_json_line(&stats);
    if check {
        let c = check_against_model(&stats, &p, mu, CHECK_BAND_SIGMAS)?;
        eprintln!(
            "model check: Q={} ({:.2} se), E={} ({:.2} se)",
            fmt_float(c.q_model),
            c.q_sigma,
            fmt_float(c.e_model),
            c.e_sigma
        );
        if !c.within_band {
            emit(cfg, &text)?;
            return Err(CliError::Runtime(format!(
                "analytic model outside the {CHECK_BAND_SIGMAS}-standard-error band"
            )));
        }
    }
    Ok(text)
}

pub struct TomographyArgs {
    pub mode: String,
    pub grid: GridSpec,
    pub aberration: AberrationSpec,
    pub threshold: f64,
}

/// Writes the Stokes field to `out` and the six analyzer images as
/// `<stem>_<label>.pgm` beside it. Returns the paths written.
pub fn cmd_tomography(
    args: &TomographyArgs,
    out: &Path,
    format: Format,
) -> Result<Vec<PathBuf>, CliError> {
    let kind: VectorMode = args.mode.parse()?;
    if !(0.0..1.0).contains(&args.threshold) {
        return Err(CliError::Usage("threshold must lie in [0, 1)".into()));
    }
    let field = make_vector_mode(kind, args.grid)?;
    let field = apply_aberration(&field, &args.aberration)?;
    let proj = Projections::measure(&field);
    let stokes = reconstruct_stokes(&proj, args.threshold)?;
    let text = match format {
        Format::Csv => stokes_csv(&stokes),
        Format::Json => stokes_json(&stokes),
    };
    let write_err = |p: &Path, e: std::io::Error| {
        CliError::Runtime(format!("cannot write {}: {e}", p.display()))
    };
    fs::write(out, text).map_err(|e| write_err(out, e))?;
    let mut written = vec![out.to_path_buf()];
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stokes".into());
    let dir = out.parent().unwrap_or(Path::new(""));
    for label in PolLabel::ALL {
        let path = dir.join(format!("{stem}_{label}.pgm"));
        let file = fs::File::create(&path).map_err(|e| write_err(&path, e))?;
        write_pgm(std::io::BufWriter::new(file), proj.get(label))
            .map_err(|e| write_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.out.clone(), cli.format)?;
    match cli.command {
        Command::Keyrate {
            mu,
            nu,
            length,
            qber,
        } => {
            let r = cmd_keyrate(&cfg, mu, nu, length, qber)?;
            emit(&cfg, &r.render(cfg.format))
        }
        Command::Optimize {
            length,
            qber,
            max_distance,
        } => {
            let r = cmd_optimize(&cfg, length, qber)?;
            emit(&cfg, &r.render(cfg.format))?;
            if max_distance {
                let p = length_or_config(&cfg, length)?;
                match max_secure_distance(&p, &cfg.optimizer)? {
                    SecureDistance::Cutoff(l) => {
                        eprintln!("max secure distance: {} m", fmt_float(l))
                    }
                    SecureDistance::BeyondLimit(l) => {
                        eprintln!("no cutoff below the {} m search limit", fmt_float(l))
                    }
                }
            }
            Ok(())
        }
        Command::Sweep { l_min, l_max, step } => emit(&cfg, &cmd_sweep(&cfg, l_min, l_max, step)?),
        Command::Sifted { qber } => emit(&cfg, &cmd_sifted(qber)?),
        Command::Montecarlo {
            mu,
            pulses,
            seed,
            length,
            check,
        } => emit(
            &cfg,
            &cmd_montecarlo(&cfg, mu, pulses, seed, length, check)?,
        ),
        Command::Tomography {
            mode,
            size,
            extent,
            seed,
            rms_per_meter,
            length,
            tip,
            tilt,
            astig_oblique,
            astig_vertical,
            defocus,
            threshold,
        } => {
            let args = TomographyArgs {
                mode,
                grid: GridSpec {
                    size,
                    extent,
                    waist: 1.0,
                },
                aberration: AberrationSpec {
                    fixed: ZernikeCoefficients {
                        tip,
                        tilt,
                        oblique_astigmatism: astig_oblique,
                        vertical_astigmatism: astig_vertical,
                        defocus,
                    },
                    seed,
                    rms_per_meter,
                    length_m: length,
                },
                threshold,
            };
            let ext = match cfg.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let out = cfg
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("stokes.{ext}")));
            for p in cmd_tomography(&args, &out, cfg.format)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs the selected command, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::load(None, None, Format::Csv).unwrap()
    }

    #[test]
    fn sweep_length_rules() {
        assert_eq!(sweep_lengths(0.0, 1.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(sweep_lengths(2.0, 3.0, 5.0).unwrap(), vec![2.0]);
        assert_eq!(sweep_lengths(0.0, 100.0, 1.0).unwrap().len(), 101);
        assert!(sweep_lengths(3.0, 3.0, 1.0).is_err());
        assert!(sweep_lengths(0.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn sifted_output() {
        assert_eq!(cmd_sifted(0.0074).unwrap(), "0.8740\n");
        assert_eq!(cmd_sifted(0.034).unwrap(), "0.5719\n");
        assert_eq!(cmd_sifted(0.0).unwrap(), "1.0000\n");
        assert_eq!(cmd_sifted(0.6).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn keyrate_override() {
        let c = cfg();
        let r = cmd_keyrate(&c, 0.5, 0.1, Some(0.5), Some(0.0027)).unwrap();
        assert!(r.k_per_pulse > 0.0);
        let r = cmd_keyrate(&c, 0.5, 0.1, Some(0.5), Some(0.5)).unwrap();
        assert_eq!(r.k_per_pulse, 0.0);
        assert!(r.flags.contains("no_positive_key"));
        assert_eq!(
            cmd_keyrate(&c, 0.1, 0.5, None, None)
                .unwrap_err()
                .exit_code(),
            1
        );
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"alpha_db_per_m":0.57,"length_m":20.5,"eta_detector":0.6,"eta_bob":0.188,
            "dark_rate_hz":300,"pulse_rate_hz":1e9,"detection_window_s":1e-9,"e_det":0.0027,
            "e0":0.5,"f_ec":1.22,"bob_includes_detector":true,"modulation_rate_hz":1e8}"#;
        let parsed = ConfigFile::parse(text).unwrap();
        let again = ConfigFile::parse(&parsed.to_json()).unwrap();
        assert_eq!(parsed, again);
        assert_eq!(parsed.length_m, 20.5);
        assert!(parsed.bob_includes_detector);
        assert!(ConfigFile::parse(r#"{"alpha":1}"#).is_err());
    }

    #[test]
    fn error_classification() {
        assert_eq!(CliError::from(Error::DeadChannel).exit_code(), 2);
        assert_eq!(
            CliError::from(Error::UnknownMode("x".into())).exit_code(),
            1
        );
    }
}
