//! Spatial vector vortex modes, phase-screen aberrations and pixelwise
//! reduced-Stokes tomography.
//!
//! Fields are sampled on an `N×N` grid with pixel `(ix, iy)` centred at
//! `((ix − N/2)·dx, (iy − N/2)·dx)`, so the optical axis falls on a pixel.
//! Rows are stored contiguously (`iy·N + ix`). Polarization analyzers and the
//! circular convention come from [`crate::qstate::PolLabel`], which makes
//! `s₃ = +1` for `L`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{PolLabel, VectorMode};

/// Pixels with `I_H + I_V` below this fraction of the peak are marked invalid.
pub const DEFAULT_VALID_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub size: usize,
    /// Full side length, in the same units as `waist`.
    pub extent: f64,
    pub waist: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            size: 256,
            extent: 8.0,
            waist: 1.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(Error::InvalidConfig(format!(
                "grid size must be at least 32 (got {})",
                self.size
            )));
        }
        if !(self.waist > 0.0 && self.extent >= 4.0 * self.waist && self.extent.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need waist > 0 and extent >= 4 waists (got extent={}, waist={})",
                self.extent, self.waist
            )));
        }
        Ok(())
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.extent / self.size as f64
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Physical coordinates of pixel `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let dx = self.pixel_pitch();
        let half = (self.size / 2) as f64;
        let ix = (idx % self.size) as f64;
        let iy = (idx / self.size) as f64;
        ((ix - half) * dx, (iy - half) * dx)
    }
}

/// Two-component (H, V) complex field on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    h: Vec<Complex64>,
    v: Vec<Complex64>,
}

impl VectorField {
    pub fn from_components(grid: GridSpec, h: Vec<Complex64>, v: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if h.len() != grid.len() || v.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples per component, got {} and {}",
                grid.len(),
                h.len(),
                v.len()
            )));
        }
        let f = Self { grid, h, v };
        let p = f.power();
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::OutOfRange {
                name: "field power",
                value: p,
                range: "(0, inf)",
            });
        }
        Ok(f)
    }

    /// Samples `jones(x, y)` at every pixel centre.
    pub fn from_fn(grid: GridSpec, jones: impl Fn(f64, f64) -> [Complex64; 2]) -> Result<Self> {
        let (h, v) = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.coords(i);
                let [a, b] = jones(x, y);
                (a, b)
            })
            .unzip();
        Self::from_components(grid, h, v)
    }

    /// Gaussian beam with the uniform polarization of `label`.
    pub fn uniform(label: PolLabel, grid: GridSpec) -> Result<Self> {
        let [jh, jv] = label.jones();
        let w = grid.waist;
        Self::from_fn(grid, |x, y| {
            let g = (-(x * x + y * y) / (w * w)).exp();
            [jh * g, jv * g]
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    pub fn v(&self) -> &[Complex64] {
        &self.v
    }

    pub fn power(&self) -> f64 {
        self.h
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum()
    }

    pub fn normalized(&self) -> Self {
        let s = self.power().sqrt().recip();
        Self {
            grid: self.grid,
            h: self.h.iter().map(|a| a * s).collect(),
            v: self.v.iter().map(|a| a * s).collect(),
        }
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.h
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let p = Complex64::from_polar(1.0, phase);
        Self {
            grid: self.grid,
            h: self.h.iter().map(|a| a * p).collect(),
            v: self.v.iter().map(|a| a * p).collect(),
        }
    }
}

/// Samples a vector vortex mode built from `ℓ = ±1`, `p = 0` Laguerre-Gauss
/// envelopes, normalized to unit total intensity.
pub fn make_vector_mode(kind: VectorMode, grid: GridSpec) -> Result<VectorField> {
    grid.validate()?;
    let w = grid.waist;
    let c = kind.r_coefficient();
    let [lh, lv] = PolLabel::L.jones();
    let [rh, rv] = PolLabel::R.jones();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let field = VectorField::from_fn(grid, |x, y| {
        let g = (-(x * x + y * y) / (w * w)).exp();
        // (r/w)·e^{±iφ} = (x ± iy)/w
        let minus = Complex64::new(x, -y) * (g / w);
        let plus = Complex64::new(x, y) * (g / w);
        [
            (lh * minus + c * rh * plus) * s,
            (lv * minus + c * rv * plus) * s,
        ]
    })?;
    Ok(field.normalized())
}

/// Low-order Zernike coefficients (radians RMS, Noll normalization over an
/// aperture of radius half the grid extent).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZernikeCoefficients {
    pub tip: f64,
    pub tilt: f64,
    pub oblique_astigmatism: f64,
    pub vertical_astigmatism: f64,
    pub defocus: f64,
}

impl ZernikeCoefficients {
    fn as_array(&self) -> [f64; 5] {
        [
            self.tip,
            self.tilt,
            self.oblique_astigmatism,
            self.vertical_astigmatism,
            self.defocus,
        ]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            tip: a[0],
            tilt: a[1],
            oblique_astigmatism: a[2],
            vertical_astigmatism: a[3],
            defocus: a[4],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|&c| c == 0.0)
    }

    /// Phase at normalized aperture coordinates `(u, v)`.
    pub fn phase(&self, u: f64, v: f64) -> f64 {
        let r2 = u * u + v * v;
        let s6 = 6f64.sqrt();
        self.tip * 2.0 * u
            + self.tilt * 2.0 * v
            + self.oblique_astigmatism * s6 * 2.0 * u * v
            + self.vertical_astigmatism * s6 * (u * u - v * v)
            + self.defocus * 3f64.sqrt() * (2.0 * r2 - 1.0)
    }
}

/// Receiver-plane phase screen.
///
/// With a `seed`, zero-mean Gaussian coefficients with standard deviation
/// `rms_per_meter · length_m` are drawn and added to `fixed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AberrationSpec {
    pub fixed: ZernikeCoefficients,
    pub seed: Option<u64>,
    pub rms_per_meter: f64,
    pub length_m: f64,
}

impl AberrationSpec {
    pub fn fixed(coefficients: ZernikeCoefficients) -> Self {
        Self {
            fixed: coefficients,
            ..Self::default()
        }
    }

    pub fn turbulent(rms_per_meter: f64, length_m: f64, seed: u64) -> Self {
        Self {
            fixed: ZernikeCoefficients::default(),
            seed: Some(seed),
            rms_per_meter,
            length_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.fixed.as_array();
        if all.iter().any(|c| !c.is_finite())
            || !(self.rms_per_meter >= 0.0 && self.rms_per_meter.is_finite())
            || !(self.length_m >= 0.0 && self.length_m.is_finite())
        {
            return Err(Error::InvalidConfig(
                "aberration coefficients must be finite and scales non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Fixed coefficients plus the seeded random draw, if any.
    pub fn coefficients(&self) -> ZernikeCoefficients {
        let mut c = self.fixed.as_array();
        if let Some(seed) = self.seed {
            let sigma = self.rms_per_meter * self.length_m;
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for ci in &mut c {
                    *ci += normal.sample(&mut rng);
                }
            }
        }
        ZernikeCoefficients::from_array(c)
    }
}

/// Multiplies both polarization components by the common phase screen.
pub fn apply_aberration(f: &VectorField, spec: &AberrationSpec) -> Result<VectorField> {
    spec.validate()?;
    let coeffs = spec.coefficients();
    if coeffs.is_zero() {
        return Ok(f.clone());
    }
    let radius = f.grid.extent / 2.0;
    let mut out = f.clone();
    for i in 0..f.grid.len() {
        let (x, y) = f.grid.coords(i);
        let screen = Complex64::from_polar(1.0, coeffs.phase(x / radius, y / radius));
        out.h[i] *= screen;
        out.v[i] *= screen;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl IntensityGrid {
    pub fn peak(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-pixel `|⟨analyzer|E(x, y)⟩|²`.
pub fn project_intensity(f: &VectorField, analyzer: PolLabel) -> IntensityGrid {
    let [ah, av] = analyzer.jones();
    let (ah, av) = (ah.conj(), av.conj());
    let data =
        f.h.iter()
            .zip(&f.v)
            .map(|(h, v)| (ah * h + av * v).norm_sqr())
            .collect();
    IntensityGrid { grid: f.grid, data }
}

/// The six analyzer images `{H, V, D, A, L, R}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    images: Vec<(PolLabel, IntensityGrid)>,
}

impl Projections {
    pub fn measure(f: &VectorField) -> Self {
        Self {
            images: PolLabel::ALL
                .into_iter()
                .map(|l| (l, project_intensity(f, l)))
                .collect(),
        }
    }

    /// Requires exactly one image per analyzer label.
    pub fn from_images(images: Vec<(PolLabel, IntensityGrid)>) -> Result<Self> {
        for label in PolLabel::ALL {
            let n = images.iter().filter(|(l, _)| *l == label).count();
            if n != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "expected one {label} image, found {n}"
                )));
            }
        }
        if images.len() != 6 {
            return Err(Error::ShapeMismatch("expected six analyzer images".into()));
        }
        let size = images[0].1.grid.size;
        if images
            .iter()
            .any(|(_, g)| g.grid.size != size || g.data.len() != size * size)
        {
            return Err(Error::ShapeMismatch(
                "analyzer images differ in size".into(),
            ));
        }
        Ok(Self { images })
    }

    pub fn get(&self, label: PolLabel) -> &IntensityGrid {
        &self
            .images
            .iter()
            .find(|(l, _)| *l == label)
            .expect("all six labels present")
            .1
    }

    pub fn iter(&self) -> impl Iterator<Item = &(PolLabel, IntensityGrid)> {
        self.images.iter()
    }
}

/// Reduced Stokes triples `(s₁, s₂, s₃)` with per-pixel intensity and validity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesField {
    pub grid: GridSpec,
    pub intensity: Vec<f64>,
    pub stokes: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl StokesField {
    pub fn valid_pixels(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        self.stokes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.valid[*i])
            .map(|(i, s)| (i, *s))
    }
}

/// Pixelwise reduced Stokes parameters. `rel_threshold` is the validity cut
/// on `I_H + I_V` relative to its peak.
pub fn reconstruct_stokes(p: &Projections, rel_threshold: f64) -> Result<StokesField> {
    let grid = p.get(PolLabel::H).grid;
    let img = |l| &p.get(l).data;
    let (ih, iv, id, ia, il, ir) = (
        img(PolLabel::H),
        img(PolLabel::V),
        img(PolLabel::D),
        img(PolLabel::A),
        img(PolLabel::L),
        img(PolLabel::R),
    );
    let intensity: Vec<f64> = ih.iter().zip(iv).map(|(a, b)| a + b).collect();
    let peak = intensity.iter().copied().fold(0.0, f64::max);
    let cut = rel_threshold * peak;
    let n = intensity.len();
    let mut stokes = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let (s12, s34, s56) = (intensity[i], id[i] + ia[i], il[i] + ir[i]);
        let ok = peak > 0.0 && s12 > cut && s34 > 0.0 && s56 > 0.0;
        valid.push(ok);
        stokes.push(if ok {
            [
                (ih[i] - iv[i]) / s12,
                (id[i] - ia[i]) / s34,
                (il[i] - ir[i]) / s56,
            ]
        } else {
            [0.0; 3]
        });
    }
    Ok(StokesField {
        grid,
        intensity,
        stokes,
        valid,
    })
}

/// `(orientation, ellipticity)` of the polarization ellipse, in radians.
pub fn polarization_ellipse(s: [f64; 3]) -> Result<(f64, f64)> {
    let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::UndefinedPolarization);
    }
    let orientation = 0.5 * s[1].atan2(s[0]);
    let ellipticity = 0.5 * (s[2] / norm).clamp(-1.0, 1.0).asin();
    Ok((orientation, ellipticity))
}

/// `|Σ ⟨a|b⟩|²` over all pixels after normalizing both fields.
pub fn mode_overlap(a: &VectorField, b: &VectorField) -> Result<f64> {
    if a.grid.size != b.grid.size {
        return Err(Error::ShapeMismatch(format!(
            "grid sizes {} and {}",
            a.grid.size, b.grid.size
        )));
    }
    let (a, b) = (a.normalized(), b.normalized());
    let ip: Complex64 = (0..a.h.len())
        .map(|i| a.h[i].conj() * b.h[i] + a.v[i].conj() * b.v[i])
        .sum();
    Ok(ip.norm_sqr().clamp(0.0, 1.0))
}
