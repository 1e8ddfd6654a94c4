//! Conditional Hamiltonian of the atom–cavity system, the cavity
//! decoherence-free subspace and the three-level effective model.
//!
//! Units: `ħ = 1` and every rate is expressed in units of the atom–cavity
//! coupling `g`, so `g = 1` unless a caller explicitly rescales it.
//!
//! The conditional (no-jump) Hamiltonian is
//!
//! ```text
//! H = g Σᵢ (|2⟩ᵢ⟨1| b + h.c.)
//!   + ½ (Ω₁ |σ⟩₁⟨2| + Ω₁′ |σ⟩₂⟨2| + Ω₂ |1⟩₁⟨2| + Ω₂′ |1⟩₂⟨2| + h.c.)
//!   − iκ/2 b†b + (Δ − iΓ)/2 Σᵢ |2⟩ᵢ⟨2|
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, BasisLabel, Level, StateSpace, StateVector};
use crate::pulses::PulseSchedule;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Physical rates, all in units of `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta: f64,
    pub n_max: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g: 1.0,
            kappa: 0.1,
            gamma: 0.1,
            delta: 0.02,
            n_max: 2,
        }
    }
}

impl SystemParams {
    pub fn lossless(self) -> Self {
        Self {
            kappa: 0.0,
            gamma: 0.0,
            ..self
        }
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.n_max)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.g, self.kappa, self.gamma, self.delta].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("system parameters must be finite".into()));
        }
        if self.g < 0.0 {
            return Err(Error::Domain(format!("g must be non-negative, got {}", self.g)));
        }
        if self.kappa < 0.0 || self.gamma < 0.0 {
            return Err(Error::Domain(format!(
                "loss rates must be non-negative (kappa = {}, gamma = {})",
                self.kappa, self.gamma
            )));
        }
        Ok(())
    }
}

/// Rabi amplitudes of the four laser couplings: `omega1`/`omega1p` drive
/// σ↔2 on atoms 1/2, `omega2`/`omega2p` drive 1↔2 on atoms 1/2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LaserAmplitudes {
    pub omega1: Complex64,
    pub omega1p: Complex64,
    pub omega2: Complex64,
    pub omega2p: Complex64,
}

impl LaserAmplitudes {
    pub fn as_array(&self) -> [Complex64; 4] {
        [self.omega1, self.omega1p, self.omega2, self.omega2p]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

/// The pair of control amplitudes `(Ω, Ω̄)` from which all four lasers are
/// derived: `Ω` steers |A⟩ and `Ω̄` steers |11⟩.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveAmplitudes {
    pub omega: Complex64,
    pub omegabar: Complex64,
}

impl DriveAmplitudes {
    pub fn new(omega: Complex64, omegabar: Complex64) -> Self {
        Self { omega, omegabar }
    }

    pub fn real(omega: f64, omegabar: f64) -> Self {
        Self::new(omega.into(), omegabar.into())
    }
}

/// Maps `(Ω, Ω̄)` onto the four physical lasers.
///
/// Magnitudes follow `|Ω₁| = |Ω₁′| = √2|Ω|` and `|Ω₂| + |Ω₂′| = 2|Ω̄|`.
/// Phases are chosen so that the projected drive couples
/// `|α⟩⟨A|` with `Ω/√2` and `|α⟩⟨11|` with `Ω̄/√2`:
///
/// ```text
/// Ω₁ = Ω₁′ = −√2 Ω*,   Ω₂ = −(1 + s) Ω̄*,   Ω₂′ = (1 − s) Ω̄*
/// ```
///
/// `s = symmetric_fraction` splits Ω̄ between the atoms; `s = 0` is the purely
/// antisymmetric drive, which never couples |11⟩ to the cavity-coupled
/// symmetric state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TuningRule {
    pub symmetric_fraction: f64,
}

impl TuningRule {
    pub fn antisymmetric() -> Self {
        Self::default()
    }

    pub fn lasers(&self, drive: DriveAmplitudes) -> LaserAmplitudes {
        let w1 = -SQRT_2 * drive.omega.conj();
        let wb = drive.omegabar.conj();
        let s = self.symmetric_fraction;
        LaserAmplitudes {
            omega1: w1,
            omega1p: w1,
            omega2: -(1.0 + s) * wb,
            omega2p: (1.0 - s) * wb,
        }
    }
}

/// Three-level effective model on the ordered basis `(|A⟩, |11⟩, |α⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub omega: Complex64,
    pub omegabar: Complex64,
    pub delta: f64,
}

impl EffectiveModel {
    pub fn new(omega: Complex64, omegabar: Complex64, delta: f64) -> Self {
        Self { omega, omegabar, delta }
    }

    /// Effective couplings produced by [`TuningRule`] from `(Ω, Ω̄)`.
    pub fn from_drive(drive: DriveAmplitudes, delta: f64) -> Self {
        Self::new(drive.omega * FRAC_1_SQRT_2, drive.omegabar * FRAC_1_SQRT_2, delta)
    }

    /// Closed-form effective couplings of arbitrary (tuned) lasers:
    /// `⟨α|H|A⟩ = −(Ω₁* + Ω₁′*)/4` and `⟨α|H|11⟩ = (Ω₂′* − Ω₂*)/(2√2)`.
    pub fn from_lasers(laser: &LaserAmplitudes, delta: f64) -> Self {
        let omega = -(laser.omega1.conj() + laser.omega1p.conj()) / 4.0;
        let omegabar = (laser.omega2p.conj() - laser.omega2.conj()) / (2.0 * SQRT_2);
        Self::new(omega, omegabar, delta)
    }

    /// Normalised zero-energy eigenvector `(−Ω̄, Ω, 0)/√(|Ω|²+|Ω̄|²)`, or
    /// `None` when both couplings vanish.
    pub fn dark_vector(&self) -> Option<nalgebra::Vector3<Complex64>> {
        let n = (self.omega.norm_sqr() + self.omegabar.norm_sqr()).sqrt();
        (n > 0.0).then(|| nalgebra::Vector3::new(-self.omegabar / n, self.omega / n, ZERO))
    }
}

/// `[[0, 0, Ω*], [0, 0, Ω̄*], [Ω, Ω̄, Δ/2]]`.
pub fn effective_hamiltonian(em: &EffectiveModel) -> Matrix3<Complex64> {
    Matrix3::new(
        ZERO,
        ZERO,
        em.omega.conj(),
        ZERO,
        ZERO,
        em.omegabar.conj(),
        em.omega,
        em.omegabar,
        Complex64::new(em.delta / 2.0, 0.0),
    )
}

/// `(E₁, E₂, E₃) = (Δ/4 + r, Δ/4 − r, 0)` with `r = √(|Ω|² + |Ω̄|² + (Δ/4)²)`.
pub fn analytic_spectrum(em: &EffectiveModel) -> [f64; 3] {
    let q = em.delta / 4.0;
    let r = (em.omega.norm_sqr() + em.omegabar.norm_sqr() + q * q).sqrt();
    [q + r, q - r, 0.0]
}

/// Eigenvalues of [`effective_hamiltonian`] by dense Hermitian
/// diagonalisation, sorted ascending.
pub fn numeric_spectrum(em: &EffectiveModel) -> [f64; 3] {
    let eig = SymmetricEigen::new(effective_hamiltonian(em));
    let mut e = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    e.sort_by(f64::total_cmp);
    e
}

/// Which basis index pairs `(row, col)` the single-atom operator
/// `|to⟩⟨from|` on `atom` (0 or 1) connects.
fn atom_transition(space: StateSpace, atom: usize, to: Level, from: Level) -> Vec<(usize, usize)> {
    space
        .labels()
        .filter(|l| if atom == 0 { l.atom1 == from } else { l.atom2 == from })
        .map(|l| {
            let target = if atom == 0 {
                BasisLabel { atom1: to, ..l }
            } else {
                BasisLabel { atom2: to, ..l }
            };
            (space.index(target), space.index(l))
        })
        .collect()
}

/// Lowering part of each laser coupling, ordered as
/// [`LaserAmplitudes::as_array`]: `|σ⟩₁⟨2|, |σ⟩₂⟨2|, |1⟩₁⟨2|, |1⟩₂⟨2|`.
pub(crate) fn laser_lowering_pairs(space: StateSpace) -> [Vec<(usize, usize)>; 4] {
    [
        atom_transition(space, 0, Level::Sigma, Level::Excited),
        atom_transition(space, 1, Level::Sigma, Level::Excited),
        atom_transition(space, 0, Level::One, Level::Excited),
        atom_transition(space, 1, Level::One, Level::Excited),
    ]
}

/// Laser-independent part of the conditional Hamiltonian: cavity coupling,
/// cavity loss and the detuned, decaying excited level.
pub fn static_hamiltonian(params: &SystemParams) -> DMatrix<Complex64> {
    let space = params.space();
    let mut h = DMatrix::zeros(space.dim(), space.dim());
    for atom in 0..2 {
        // |2⟩ᵢ⟨1| b : (atom=1, n) -> (atom=2, n-1) with amplitude g√n
        for (row, col) in atom_transition(space, atom, Level::Excited, Level::One) {
            let n = space.label(col).photons;
            if n == 0 {
                continue;
            }
            let amp = Complex64::new(params.g * (n as f64).sqrt(), 0.0);
            let row = row - 1;
            h[(row, col)] += amp;
            h[(col, row)] += amp;
        }
    }
    for (i, l) in space.labels().enumerate() {
        let excited = l.excited_count() as f64;
        h[(i, i)] += -I * (params.kappa / 2.0) * l.photons as f64
            + Complex64::new(params.delta, -params.gamma) * (excited / 2.0);
    }
    h
}

fn laser_hamiltonian(space: StateSpace, laser: &LaserAmplitudes) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(space.dim(), space.dim());
    for (pairs, amp) in laser_lowering_pairs(space).iter().zip(laser.as_array()) {
        for &(row, col) in pairs {
            h[(row, col)] += amp / 2.0;
            h[(col, row)] += amp.conj() / 2.0;
        }
    }
    h
}

/// Full non-Hermitian conditional Hamiltonian for one set of laser
/// amplitudes.
pub fn conditional_hamiltonian(params: &SystemParams, laser: &LaserAmplitudes) -> DMatrix<Complex64> {
    static_hamiltonian(params) + laser_hamiltonian(params.space(), laser)
}

/// The laser couplings plus the Hermitian detuning `Δ/2 Σᵢ|2⟩ᵢ⟨2|`; this is
/// what the decoherence-free projection acts on.
pub fn drive_hamiltonian(params: &SystemParams, laser: &LaserAmplitudes) -> DMatrix<Complex64> {
    let space = params.space();
    let mut h = laser_hamiltonian(space, laser);
    for (i, l) in space.labels().enumerate() {
        h[(i, i)] += Complex64::new(params.delta * l.excited_count() as f64 / 2.0, 0.0);
    }
    h
}

/// Orthogonal projector onto the cavity decoherence-free subspace: the
/// kernel, inside the cavity-vacuum sector, of `Σᵢ |1⟩ᵢ⟨2|`.
pub fn dfs_projector(space: StateSpace) -> DMatrix<Complex64> {
    // Vacuum sector is spanned by the 16 atomic product states.
    let vac: Vec<usize> = space.labels().enumerate().filter(|(_, l)| l.photons == 0).map(|(i, _)| i).collect();
    let pos = |full: usize| vac.iter().position(|&v| v == full).expect("vacuum index");
    let mut emit = DMatrix::<Complex64>::zeros(vac.len(), vac.len());
    for atom in 0..2 {
        for (row, col) in atom_transition(space, atom, Level::One, Level::Excited) {
            if space.label(col).photons == 0 {
                emit[(pos(row), pos(col))] += Complex64::new(1.0, 0.0);
            }
        }
    }
    let svd = emit.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let scale = svd.singular_values.max().max(1.0);
    let mut p = DMatrix::zeros(space.dim(), space.dim());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-10 * scale {
            continue;
        }
        let row = v_t.row(k);
        for (a, &ia) in vac.iter().enumerate() {
            for (b, &ib) in vac.iter().enumerate() {
                p[(ia, ib)] += row[a].conj() * row[b];
            }
        }
    }
    p
}

/// The ordered effective basis `(|A⟩, |11⟩, |α⟩)` as full-space vectors.
pub fn effective_basis(space: StateSpace) -> [StateVector; 3] {
    [
        hilbert::a_state(space),
        hilbert::basis_state(space, Level::One, Level::One, 0).expect("vacuum in range"),
        hilbert::alpha_state(space),
    ]
}

/// Projects [`drive_hamiltonian`] onto the decoherence-free subspace and
/// restricts it to `(|A⟩, |11⟩, |α⟩)`.
///
/// Fails with [`Error::TuningViolated`] when the projected drive couples the
/// three effective states to anything else (e.g. `Ω₁ ≠ Ω₁′`).
pub fn effective_from_projection(params: &SystemParams, laser: &LaserAmplitudes) -> Result<Matrix3<Complex64>> {
    let space = params.space();
    let p = dfs_projector(space);
    let php = &p * drive_hamiltonian(params, laser) * &p;
    let basis = effective_basis(space);
    let mut u = DMatrix::<Complex64>::zeros(space.dim(), 3);
    for (j, v) in basis.iter().enumerate() {
        u.set_column(j, v.amplitudes());
    }
    let image = &php * &u;
    let h3 = u.adjoint() * &image;
    let outside = &image - &u * &h3;
    let residual = outside.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * (1.0 + laser.max_abs() + params.delta.abs());
    if residual > tol {
        return Err(Error::TuningViolated { residual });
    }
    Ok(Matrix3::from_fn(|r, c| h3[(r, c)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
}

/// How far a schedule is from the weak-drive regime in which the cavity
/// decoherence-free projection holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Peak of `max(|Ω(t)|, |Ω̄(t)|)` over the schedule.
    pub r_est: f64,
    pub ratio_g2_over_kappa: f64,
    pub ratio_kappa: f64,
    pub verdict: Verdict,
}

pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 0.3;

const VALIDITY_SAMPLES: usize = 10_000;

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Estimates the transition rate out of the decoherence-free subspace as the
/// peak control amplitude and compares it with `g²/κ` and `κ`.
pub fn validity_check(params: &SystemParams, schedule: &PulseSchedule, threshold: f64) -> ValidityReport {
    let t_end = schedule.duration();
    let r_est = (0..=VALIDITY_SAMPLES)
        .map(|k| {
            let d = schedule.drive(t_end * k as f64 / VALIDITY_SAMPLES as f64);
            d.omega.norm().max(d.omegabar.norm())
        })
        .fold(0.0, f64::max);
    let ratio_g2_over_kappa = ratio(r_est * params.kappa, params.g * params.g);
    let ratio_kappa = ratio(r_est, params.kappa);
    let verdict = if ratio_g2_over_kappa <= threshold && ratio_kappa <= threshold {
        Verdict::Pass
    } else {
        Verdict::Warn
    };
    ValidityReport {
        r_est,
        ratio_g2_over_kappa,
        ratio_kappa,
        verdict,
    }
}
