//! Polarization and spin-orbit (vector vortex) qubit states.
//!
//! States are finite superpositions over `(circular polarization, OAM)` kets.
//! The circular basis is fixed as `L = (H + iV)/√2`, `R = (H − iV)/√2`, and the
//! diagonal pair as `D = (H + V)/√2`, `A = (H − V)/√2`. Only overlap
//! probabilities are meaningful; global phases are never compared.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// Analyzer / preparation settings for a uniformly polarized photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolLabel {
    H,
    V,
    D,
    A,
    L,
    R,
}

impl PolLabel {
    pub const ALL: [PolLabel; 6] = [
        PolLabel::H,
        PolLabel::V,
        PolLabel::D,
        PolLabel::A,
        PolLabel::L,
        PolLabel::R,
    ];

    /// Jones vector `(E_H, E_V)`.
    pub fn jones(self) -> [Complex64; 2] {
        let s = FRAC_1_SQRT_2;
        let re = |x: f64| Complex64::new(x, 0.0);
        match self {
            PolLabel::H => [re(1.0), re(0.0)],
            PolLabel::V => [re(0.0), re(1.0)],
            PolLabel::D => [re(s), re(s)],
            PolLabel::A => [re(s), re(-s)],
            PolLabel::L => [re(s), Complex64::new(0.0, s)],
            PolLabel::R => [re(s), Complex64::new(0.0, -s)],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolLabel::H => "H",
            PolLabel::V => "V",
            PolLabel::D => "D",
            PolLabel::A => "A",
            PolLabel::L => "L",
            PolLabel::R => "R",
        }
    }
}

impl fmt::Display for PolLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown polarization label `{s}`")))
    }
}

/// Circular polarization component of a spin-orbit ket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Circular {
    L,
    R,
}

/// The four two-dimensional vector vortex modes used as qubit encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VectorMode {
    /// `(|L,−1⟩ + |R,+1⟩)/√2`
    Radial,
    /// `(|L,−1⟩ − |R,+1⟩)/√2`
    Azimuthal,
    /// `(|L,−1⟩ + i|R,+1⟩)/√2`
    VortexCw,
    /// `(|L,−1⟩ − i|R,+1⟩)/√2`
    VortexCcw,
}

impl VectorMode {
    pub const ALL: [VectorMode; 4] = [
        VectorMode::Radial,
        VectorMode::Azimuthal,
        VectorMode::VortexCw,
        VectorMode::VortexCcw,
    ];

    /// Relative amplitude of `|R,+1⟩` with respect to `|L,−1⟩`.
    pub fn r_coefficient(self) -> Complex64 {
        match self {
            VectorMode::Radial => Complex64::new(1.0, 0.0),
            VectorMode::Azimuthal => Complex64::new(-1.0, 0.0),
            VectorMode::VortexCw => Complex64::new(0.0, 1.0),
            VectorMode::VortexCcw => Complex64::new(0.0, -1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VectorMode::Radial => "radial",
            VectorMode::Azimuthal => "azimuthal",
            VectorMode::VortexCw => "vortex_cw",
            VectorMode::VortexCcw => "vortex_ccw",
        }
    }
}

impl std::str::FromStr for VectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VectorMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

/// Normalized superposition over `(circular polarization, OAM ℓ)` kets.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOrbitState {
    amps: BTreeMap<(Circular, i32), Complex64>,
}

impl SpinOrbitState {
    /// Builds a state from raw amplitudes and normalizes it. Repeated kets add.
    pub fn from_amplitudes<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((Circular, i32), Complex64)>,
    {
        let mut amps: BTreeMap<(Circular, i32), Complex64> = BTreeMap::new();
        for (ket, a) in terms {
            *amps.entry(ket).or_default() += a;
        }
        amps.retain(|_, a| a.norm_sqr() > 0.0);
        let norm = amps.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::OutOfRange {
                name: "state norm",
                value: norm,
                range: "(0, inf)",
            });
        }
        amps.values_mut().for_each(|a| *a /= norm);
        Ok(Self { amps })
    }

    pub fn ket(pol: Circular, oam: i32) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert((pol, oam), Complex64::new(1.0, 0.0));
        Self { amps }
    }

    /// Uniformly polarized state with Jones vector `(h, v)` and OAM `oam`.
    pub fn from_jones(jones: [Complex64; 2], oam: i32) -> Result<Self> {
        let [h, v] = jones;
        let i = Complex64::i();
        let s = FRAC_1_SQRT_2;
        Self::from_amplitudes([
            ((Circular::L, oam), (h - i * v) * s),
            ((Circular::R, oam), (h + i * v) * s),
        ])
    }

    pub fn vector_mode(mode: VectorMode) -> Self {
        let s = FRAC_1_SQRT_2;
        let mut amps = BTreeMap::new();
        amps.insert((Circular::L, -1), Complex64::new(s, 0.0));
        amps.insert((Circular::R, 1), mode.r_coefficient() * s);
        Self { amps }
    }

    pub fn amplitude(&self, pol: Circular, oam: i32) -> Complex64 {
        self.amps.get(&(pol, oam)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Circular, i32), &Complex64)> {
        self.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b))
            .sum()
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let p = Complex64::from_polar(1.0, phase);
        Self {
            amps: self.amps.iter().map(|(k, a)| (*k, a * p)).collect(),
        }
    }
}

/// Uniformly polarized Gaussian (`ℓ = 0`) state for an analyzer label.
pub fn make_pol_state(label: PolLabel) -> SpinOrbitState {
    SpinOrbitState::from_jones(label.jones(), 0).expect("analyzer Jones vectors are normalized")
}

/// Perfectly tuned q-plate.
///
/// `(L, ℓ) → e^{+2iα₀} (R, ℓ + 2q)` and `(R, ℓ) → e^{−2iα₀} (L, ℓ − 2q)`,
/// where `α₀` is the optic-axis orientation at zero azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPlate {
    twice_charge: i32,
    axis_offset: f64,
}

impl QPlate {
    /// Axis orientation that sends a V-polarized Gaussian to the radial mode.
    pub const DEFAULT_AXIS_OFFSET: f64 = FRAC_PI_4;

    /// `charge` must be a half-integer (`2q ∈ ℤ`).
    pub fn new(charge: f64) -> Result<Self> {
        let twice = 2.0 * charge;
        if !twice.is_finite() || twice.fract() != 0.0 || twice.abs() > f64::from(i32::MAX / 4) {
            return Err(Error::OutOfRange {
                name: "q-plate charge",
                value: charge,
                range: "half-integers",
            });
        }
        Ok(Self {
            twice_charge: twice as i32,
            axis_offset: Self::DEFAULT_AXIS_OFFSET,
        })
    }

    pub fn with_axis_offset(mut self, axis_offset: f64) -> Self {
        self.axis_offset = axis_offset;
        self
    }

    pub fn charge(&self) -> f64 {
        f64::from(self.twice_charge) / 2.0
    }

    pub fn apply(&self, state: &SpinOrbitState) -> SpinOrbitState {
        let gain = Complex64::from_polar(1.0, 2.0 * self.axis_offset);
        let amps = state
            .amps
            .iter()
            .map(|(&(pol, oam), &a)| match pol {
                Circular::L => ((Circular::R, oam + self.twice_charge), a * gain),
                Circular::R => ((Circular::L, oam - self.twice_charge), a * gain.conj()),
            })
            .collect();
        SpinOrbitState { amps }
    }
}

/// Applies a q-plate of charge `q` with the default axis orientation.
pub fn qplate_apply(state: &SpinOrbitState, q: f64) -> Result<SpinOrbitState> {
    Ok(QPlate::new(q)?.apply(state))
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]` against rounding.
pub fn overlap_prob(a: &SpinOrbitState, b: &SpinOrbitState) -> f64 {
    a.inner(b).norm_sqr().clamp(0.0, 1.0)
}

/// Detection probabilities: rows are sent states, columns are projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    entries: Vec<Vec<f64>>,
}

impl ProbMatrix {
    pub fn from_rows(entries: Vec<Vec<f64>>) -> Result<Self> {
        let cols = entries.first().map(Vec::len).unwrap_or(0);
        if entries.is_empty() || cols == 0 {
            return Err(Error::EmptyInput("probability matrix"));
        }
        if entries.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged probability matrix".into()));
        }
        for &p in entries.iter().flatten() {
            crate::error::check_range("detection probability", p, 0.0, 1.0, "[0, 1]")?;
        }
        Ok(Self { entries })
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row][col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row]
    }
}

pub fn detection_matrix(
    sent: &[SpinOrbitState],
    projections: &[SpinOrbitState],
) -> Result<ProbMatrix> {
    if sent.is_empty() {
        return Err(Error::EmptyInput("sent states"));
    }
    if projections.is_empty() {
        return Err(Error::EmptyInput("projection states"));
    }
    let entries = sent
        .iter()
        .map(|s| projections.iter().map(|p| overlap_prob(p, s)).collect())
        .collect();
    Ok(ProbMatrix { entries })
}

/// Basis index (0 or 1) and bit value for one row or column of a [`ProbMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisBit {
    pub basis: u8,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisAssignment {
    pub sent: Vec<BasisBit>,
    pub measured: Vec<BasisBit>,
}

impl BasisAssignment {
    /// Rows and columns both ordered as `{0₀, 1₀, 0₁, 1₁}`, e.g. `H, V, D, A`
    /// or `Ψ₁, Ψ₂, Φ₁, Φ₂`.
    pub fn bb84() -> Self {
        let order = vec![
            BasisBit { basis: 0, bit: 0 },
            BasisBit { basis: 0, bit: 1 },
            BasisBit { basis: 1, bit: 0 },
            BasisBit { basis: 1, bit: 1 },
        ];
        Self {
            sent: order.clone(),
            measured: order,
        }
    }
}

/// Within-basis error fraction, averaged over sent states with equal weight.
pub fn qber_from_matrix(m: &ProbMatrix, assignment: &BasisAssignment) -> Result<f64> {
    if assignment.sent.len() != m.rows() || assignment.measured.len() != m.cols() {
        return Err(Error::BasisAssignment(format!(
            "assignment is {}x{}, matrix is {}x{}",
            assignment.sent.len(),
            assignment.measured.len(),
            m.rows(),
            m.cols()
        )));
    }
    let mut total = 0.0;
    for (i, sent) in assignment.sent.iter().enumerate() {
        let mut within = 0.0;
        let mut wrong = 0.0;
        let mut seen = false;
        for (j, meas) in assignment.measured.iter().enumerate() {
            if meas.basis != sent.basis {
                continue;
            }
            seen = true;
            let p = m.get(i, j);
            within += p;
            if meas.bit != sent.bit {
                wrong += p;
            }
        }
        if !seen {
            return Err(Error::BasisAssignment(format!(
                "no projection in basis {} for sent row {i}",
                sent.basis
            )));
        }
        if within <= 0.0 {
            return Err(Error::BasisAssignment(format!(
                "sent row {i} has no within-basis detections"
            )));
        }
        total += wrong / within;
    }
    Ok(total / assignment.sent.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polarization_mubs() -> Vec<SpinOrbitState> {
        [PolLabel::H, PolLabel::V, PolLabel::D, PolLabel::A]
            .into_iter()
            .map(make_pol_state)
            .collect()
    }

    fn vortex_mubs() -> Vec<SpinOrbitState> {
        VectorMode::ALL
            .into_iter()
            .map(SpinOrbitState::vector_mode)
            .collect()
    }

    #[test]
    fn pol_states_basic_overlaps() {
        let h = make_pol_state(PolLabel::H);
        assert!((overlap_prob(&h, &h) - 1.0).abs() < 1e-15);
        let a = make_pol_state(PolLabel::A);
        assert!((overlap_prob(&a, &h) - 0.5).abs() < 1e-15);
        let l = make_pol_state(PolLabel::L);
        let r = make_pol_state(PolLabel::R);
        assert!(overlap_prob(&l, &r) < 1e-30);
        assert_eq!(l.amplitude(Circular::L, 0), Complex64::new(1.0, 0.0));
        for label in PolLabel::ALL {
            let s = make_pol_state(label);
            assert!(s.is_normalized());
            assert!(s.iter().all(|((_, oam), _)| *oam == 0));
        }
    }

    #[test]
    fn qplate_circular_inputs() {
        let out = qplate_apply(&SpinOrbitState::ket(Circular::L, 0), 0.5).unwrap();
        assert!((overlap_prob(&out, &SpinOrbitState::ket(Circular::R, 1)) - 1.0).abs() < 1e-15);
        let out = qplate_apply(&SpinOrbitState::ket(Circular::R, 0), 0.5).unwrap();
        assert!((overlap_prob(&out, &SpinOrbitState::ket(Circular::L, -1)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qplate_linear_inputs_give_vector_modes() {
        let radial = SpinOrbitState::vector_mode(VectorMode::Radial);
        let out = qplate_apply(&make_pol_state(PolLabel::V), 0.5).unwrap();
        assert!((overlap_prob(&out, &radial) - 1.0).abs() < 1e-12);
        let cases = [
            (PolLabel::H, VectorMode::Azimuthal),
            (PolLabel::D, VectorMode::VortexCw),
            (PolLabel::A, VectorMode::VortexCcw),
        ];
        for (label, mode) in cases {
            let out = qplate_apply(&make_pol_state(label), 0.5).unwrap();
            let target = SpinOrbitState::vector_mode(mode);
            assert!(
                (overlap_prob(&out, &target) - 1.0).abs() < 1e-12,
                "{label:?}"
            );
        }
    }

    #[test]
    fn qplate_rejects_non_half_integer() {
        assert!(QPlate::new(0.3).is_err());
        assert!(QPlate::new(f64::NAN).is_err());
        assert_eq!(QPlate::new(1.5).unwrap().charge(), 1.5);
        let out = qplate_apply(&SpinOrbitState::ket(Circular::L, 2), 1.5).unwrap();
        assert!((out.amplitude(Circular::R, 5).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mub_overlaps() {
        for set in [polarization_mubs(), vortex_mubs()] {
            for (i, a) in set.iter().enumerate() {
                for (j, b) in set.iter().enumerate() {
                    let expected = if i == j {
                        1.0
                    } else if i / 2 == j / 2 {
                        0.0
                    } else {
                        0.5
                    };
                    assert!((overlap_prob(a, b) - expected).abs() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn psi1_phi1_overlap_is_half() {
        // ⟨Ψ₁|Φ₁⟩ = (1 + i)/2 from the amplitudes directly.
        let psi1 = SpinOrbitState::vector_mode(VectorMode::Radial);
        let phi1 = SpinOrbitState::vector_mode(VectorMode::VortexCw);
        let ip = psi1.inner(&phi1);
        assert!((ip - Complex64::new(0.5, 0.5)).norm() < 1e-15);
        assert!((overlap_prob(&psi1, &phi1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn detection_matrix_shapes_and_errors() {
        let h = make_pol_state(PolLabel::H);
        let m = detection_matrix(std::slice::from_ref(&h), std::slice::from_ref(&h)).unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 1));
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
        assert_eq!(
            detection_matrix(&[], std::slice::from_ref(&h)),
            Err(Error::EmptyInput("sent states"))
        );
        assert!(detection_matrix(&[h], &[]).is_err());
    }

    #[test]
    fn detection_matrix_rows_per_basis_sum_to_one() {
        for set in [polarization_mubs(), vortex_mubs()] {
            let m = detection_matrix(&set, &set).unwrap();
            for i in 0..4 {
                let r = m.row(i);
                assert!((r[0] + r[1] - 1.0).abs() < 1e-9);
                assert!((r[2] + r[3] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qber_examples() {
        let set = polarization_mubs();
        let ideal = detection_matrix(&set, &set).unwrap();
        let bb84 = BasisAssignment::bb84();
        assert!(qber_from_matrix(&ideal, &bb84).unwrap().abs() < 1e-15);

        let uniform = ProbMatrix::from_rows(vec![vec![0.5; 4]; 4]).unwrap();
        assert!((qber_from_matrix(&uniform, &bb84).unwrap() - 0.5).abs() < 1e-15);

        let e = 0.037;
        let rows = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        if i / 2 != j / 2 {
                            0.5
                        } else if i == j {
                            1.0 - e
                        } else {
                            e
                        }
                    })
                    .collect()
            })
            .collect();
        let noisy = ProbMatrix::from_rows(rows).unwrap();
        assert!((qber_from_matrix(&noisy, &bb84).unwrap() - 0.037).abs() < 1e-15);
    }

    #[test]
    fn qber_rejects_bad_assignment() {
        let set = polarization_mubs();
        let m = detection_matrix(&set, &set).unwrap();
        let mut bad = BasisAssignment::bb84();
        bad.sent.pop();
        assert!(matches!(
            qber_from_matrix(&m, &bad),
            Err(Error::BasisAssignment(_))
        ));
        let mut orphan = BasisAssignment::bb84();
        orphan.sent[0].basis = 7;
        assert!(matches!(
            qber_from_matrix(&m, &orphan),
            Err(Error::BasisAssignment(_))
        ));
    }

    #[test]
    fn prob_matrix_validates_entries() {
        assert!(ProbMatrix::from_rows(vec![vec![1.2]]).is_err());
        assert!(ProbMatrix::from_rows(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        assert!(ProbMatrix::from_rows(vec![]).is_err());
    }

    #[test]
    fn labels_parse() {
        assert_eq!("d".parse::<PolLabel>().unwrap(), PolLabel::D);
        assert!("X".parse::<PolLabel>().is_err());
        assert_eq!(
            "vortex_ccw".parse::<VectorMode>().unwrap(),
            VectorMode::VortexCcw
        );
        assert_eq!(
            "spiral".parse::<VectorMode>(),
            Err(Error::UnknownMode("spiral".into()))
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_state() -> impl Strategy<Value = SpinOrbitState> {
            prop::collection::vec((any::<bool>(), -4i32..=4, -1.0f64..1.0, -1.0f64..1.0), 1..6)
                .prop_filter_map("nonzero", |terms| {
                    SpinOrbitState::from_amplitudes(terms.into_iter().map(|(l, oam, re, im)| {
                        let pol = if l { Circular::L } else { Circular::R };
                        ((pol, oam), Complex64::new(re, im))
                    }))
                    .ok()
                })
        }

        proptest! {
            #[test]
            fn qplate_is_unitary_involution(s in arb_state(), twice_q in -3i32..=3) {
                let plate = QPlate::new(f64::from(twice_q) / 2.0).unwrap();
                let once = plate.apply(&s);
                prop_assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
                let twice = plate.apply(&once);
                prop_assert!((overlap_prob(&twice, &s) - 1.0).abs() < 1e-12);
            }

            #[test]
            fn global_phase_invariance(a in arb_state(), b in arb_state(), pa in -3.2f64..3.2, pb in -3.2f64..3.2) {
                let m1 = detection_matrix(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap();
                let m2 = detection_matrix(&[a.with_global_phase(pa)], &[b.with_global_phase(pb)]).unwrap();
                prop_assert!((m1.get(0, 0) - m2.get(0, 0)).abs() < 1e-12);
            }

            #[test]
            fn depolarized_mixture_qber(lambda in 0.0f64..=1.0) {
                let set = polarization_mubs();
                let ideal = detection_matrix(&set, &set).unwrap();
                let rows = (0..4)
                    .map(|i| (0..4).map(|j| lambda * ideal.get(i, j) + (1.0 - lambda) * 0.5).collect())
                    .collect();
                let m = ProbMatrix::from_rows(rows).unwrap();
                let q = qber_from_matrix(&m, &BasisAssignment::bb84()).unwrap();
                prop_assert!((q - (1.0 - lambda) / 2.0).abs() < 1e-12);
            }
        }
    }
}
