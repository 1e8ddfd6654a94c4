//! Tensor-product state space of two four-level atoms and one truncated
//! cavity mode.
//!
//! Basis ordering is fixed: atom 1 is the slowest index, atom 2 the middle one
//! and the cavity Fock number the fastest, i.e.
//!
//! ```text
//! index(a1, a2, n) = (4 * a1 + a2) * (n_max + 1) + n
//! ```
//!
//! with the atomic levels enumerated `0 < 1 < σ < 2`. CSV headers and
//! diagnostics label basis states as `"a1,a2;n"`, e.g. `"σ,1;0"`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Internal atomic level.
///
/// `Zero` and `One` encode the qubit, `Sigma` is the auxiliary ground state
/// and `Excited` is the decaying level coupled to the cavity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Zero,
    One,
    Sigma,
    Excited,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Zero, Level::One, Level::Sigma, Level::Excited];

    pub fn index(self) -> usize {
        match self {
            Level::Zero => 0,
            Level::One => 1,
            Level::Sigma => 2,
            Level::Excited => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Level::Zero => "0",
            Level::One => "1",
            Level::Sigma => "σ",
            Level::Excited => "2",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(Level::Zero),
            "1" => Ok(Level::One),
            "σ" | "s" | "sigma" => Ok(Level::Sigma),
            "2" | "e" => Ok(Level::Excited),
            other => Err(Error::Parse(format!("unknown atomic level '{other}'"))),
        }
    }
}

/// One product basis state `|a1 a2⟩ ⊗ |n⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub atom1: Level,
    pub atom2: Level,
    pub photons: usize,
}

impl BasisLabel {
    pub fn new(atom1: Level, atom2: Level, photons: usize) -> Self {
        Self { atom1, atom2, photons }
    }

    /// Number of atoms sitting in the excited level.
    pub fn excited_count(&self) -> usize {
        usize::from(self.atom1 == Level::Excited) + usize::from(self.atom2 == Level::Excited)
    }

    pub fn sigma_count(&self) -> usize {
        usize::from(self.atom1 == Level::Sigma) + usize::from(self.atom2 == Level::Sigma)
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{};{}", self.atom1, self.atom2, self.photons)
    }
}

impl FromStr for BasisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("basis label '{s}' is not of the form \"a1,a2;n\""));
        let (atoms, n) = s.split_once(';').ok_or_else(bad)?;
        let (a1, a2) = atoms.split_once(',').ok_or_else(bad)?;
        let photons = n.trim().parse::<usize>().map_err(|_| bad())?;
        Ok(BasisLabel::new(a1.parse()?, a2.parse()?, photons))
    }
}

/// Handle describing the truncated two-atom ⊗ cavity space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSpace {
    n_max: usize,
}

impl StateSpace {
    /// Space with cavity Fock states `0..=n_max`.
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        16 * (self.n_max + 1)
    }

    fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    /// Flat index of a basis label. Panics if the Fock number is out of range;
    /// use [`StateSpace::checked_index`] for untrusted input.
    pub fn index(&self, label: BasisLabel) -> usize {
        self.checked_index(label).expect("Fock number exceeds truncation")
    }

    pub fn checked_index(&self, label: BasisLabel) -> Result<usize> {
        if label.photons > self.n_max {
            return Err(Error::Domain(format!(
                "Fock number {} exceeds truncation n_max = {}",
                label.photons, self.n_max
            )));
        }
        Ok((label.atom1.index() * 4 + label.atom2.index()) * self.fock_dim() + label.photons)
    }

    pub fn label(&self, index: usize) -> BasisLabel {
        assert!(index < self.dim(), "basis index {index} out of range");
        let photons = index % self.fock_dim();
        let atoms = index / self.fock_dim();
        BasisLabel {
            atom1: Level::ALL[atoms / 4],
            atom2: Level::ALL[atoms % 4],
            photons,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = BasisLabel> + '_ {
        (0..self.dim()).map(move |i| self.label(i))
    }
}

/// Amplitude vector over a [`StateSpace`].
///
/// Conditioned (no-jump) states are not renormalised, so the squared norm is
/// the probability that no photon has been emitted so far.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: StateSpace,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn zeros(space: StateSpace) -> Self {
        Self {
            space,
            amplitudes: DVector::zeros(space.dim()),
        }
    }

    pub fn from_amplitudes(space: StateSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Domain(format!(
                "amplitude vector has length {}, space dimension is {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, label: BasisLabel) -> Complex64 {
        self.amplitudes[self.space.index(label)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        debug_assert_eq!(self.space, other.space);
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Copy scaled to unit norm. Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<StateVector> {
        let n = self.norm_sqr().sqrt();
        (n > 0.0).then(|| StateVector {
            space: self.space,
            amplitudes: self.amplitudes.unscale(n),
        })
    }

    /// Total squared amplitude on basis states matching `pred`.
    pub fn population_where(&self, pred: impl Fn(&BasisLabel) -> bool) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(&self.space.label(*i)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `|⟨state|self⟩|²` for a reference state.
    pub fn population_of(&self, state: &StateVector) -> f64 {
        state.inner(self).norm_sqr()
    }

    fn set(&mut self, label: BasisLabel, value: Complex64) {
        let i = self.space.index(label);
        self.amplitudes[i] = value;
    }
}

/// Unit vector on a single product state.
pub fn basis_state(space: StateSpace, atom1: Level, atom2: Level, photons: usize) -> Result<StateVector> {
    let i = space.checked_index(BasisLabel::new(atom1, atom2, photons))?;
    let mut psi = StateVector::zeros(space);
    psi.amplitudes[i] = Complex64::new(1.0, 0.0);
    Ok(psi)
}

/// Computational state `|q1 q2⟩ ⊗ |0⟩` for qubit values `q1, q2 ∈ {0, 1}`.
pub fn computational_state(space: StateSpace, q1: bool, q2: bool) -> StateVector {
    let lvl = |q: bool| if q { Level::One } else { Level::Zero };
    basis_state(space, lvl(q1), lvl(q2), 0).expect("vacuum is always in range")
}

/// `|α⟩ = (|12⟩ − |21⟩)/√2` with the cavity empty.
pub fn alpha_state(space: StateSpace) -> StateVector {
    let mut psi = StateVector::zeros(space);
    psi.set(BasisLabel::new(Level::One, Level::Excited, 0), FRAC_1_SQRT_2.into());
    psi.set(BasisLabel::new(Level::Excited, Level::One, 0), (-FRAC_1_SQRT_2).into());
    psi
}

/// `|A⟩ = (|σ1⟩ − |1σ⟩)/√2` with the cavity empty.
pub fn a_state(space: StateSpace) -> StateVector {
    let mut psi = StateVector::zeros(space);
    psi.set(BasisLabel::new(Level::Sigma, Level::One, 0), FRAC_1_SQRT_2.into());
    psi.set(BasisLabel::new(Level::One, Level::Sigma, 0), (-FRAC_1_SQRT_2).into());
    psi
}

/// Dark state `cos(θ/2)|11⟩ − sin(θ/2) e^{iφ} |A⟩` (cavity empty).
pub fn dark_state(space: StateSpace, theta: f64, phi: f64) -> StateVector {
    let (s, c) = (theta / 2.0).sin_cos();
    let mut psi = a_state(space);
    let coeff = -Complex64::from_polar(s, phi);
    psi.amplitudes *= coeff;
    psi.set(BasisLabel::new(Level::One, Level::One, 0), c.into());
    psi
}

/// Coefficients of the dark state on the ordered effective basis
/// `(|A⟩, |11⟩, |α⟩)`.
pub fn dark_coefficients(theta: f64, phi: f64) -> nalgebra::Vector3<Complex64> {
    let (s, c) = (theta / 2.0).sin_cos();
    nalgebra::Vector3::new(-Complex64::from_polar(s, phi), c.into(), Complex64::new(0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn dimensions() {
        assert_eq!(StateSpace::new(0).dim(), 16);
        assert_eq!(StateSpace::new(2).dim(), 48);
    }

    #[test]
    fn index_label_bijection() {
        for n_max in 0..4 {
            let space = StateSpace::new(n_max);
            for i in 0..space.dim() {
                assert_eq!(space.index(space.label(i)), i);
            }
        }
        let space = StateSpace::new(2);
        let l = BasisLabel::new(Level::Sigma, Level::Excited, 1);
        assert_eq!(space.label(space.index(l)), l);
    }

    #[test]
    fn ordering_has_cavity_fastest() {
        let space = StateSpace::new(2);
        let i = space.index(BasisLabel::new(Level::One, Level::Sigma, 0));
        assert_eq!(space.label(i + 1), BasisLabel::new(Level::One, Level::Sigma, 1));
        assert_eq!(space.label(i + 3), BasisLabel::new(Level::One, Level::Excited, 0));
    }

    #[test]
    fn label_strings_roundtrip() {
        let space = StateSpace::new(2);
        for l in space.labels() {
            let s = l.to_string();
            assert_eq!(s.parse::<BasisLabel>().unwrap(), l);
        }
        assert_eq!(
            "σ,1;0".parse::<BasisLabel>().unwrap(),
            BasisLabel::new(Level::Sigma, Level::One, 0)
        );
        assert!("σ1;0".parse::<BasisLabel>().is_err());
        assert!("x,1;0".parse::<BasisLabel>().is_err());
    }

    #[test]
    fn basis_states() {
        let space = StateSpace::new(2);
        let v00 = basis_state(space, Level::Zero, Level::Zero, 0).unwrap();
        assert_eq!(v00.norm_sqr(), 1.0);
        assert_eq!(v00.amplitudes()[0], Complex64::new(1.0, 0.0));
        let v11 = basis_state(space, Level::One, Level::One, 0).unwrap();
        assert_eq!(v00.inner(&v11), Complex64::new(0.0, 0.0));
        let top = basis_state(space, Level::Excited, Level::Excited, 2).unwrap();
        assert_eq!(space.index(BasisLabel::new(Level::Excited, Level::Excited, 2)), space.dim() - 1);
        assert_eq!(top.amplitudes()[space.dim() - 1], Complex64::new(1.0, 0.0));
        assert!(matches!(
            basis_state(space, Level::Zero, Level::Zero, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn alpha_and_a_states() {
        let space = StateSpace::new(1);
        let alpha = alpha_state(space);
        assert_eq!(alpha.amplitude(BasisLabel::new(Level::One, Level::Excited, 0)).re, FRAC_1_SQRT_2);
        assert_eq!(alpha.amplitude(BasisLabel::new(Level::Excited, Level::One, 0)).re, -FRAC_1_SQRT_2);
        let a = a_state(space);
        assert_eq!(a.amplitude(BasisLabel::new(Level::Sigma, Level::One, 0)).re, FRAC_1_SQRT_2);
        assert_eq!(a.amplitude(BasisLabel::new(Level::One, Level::Sigma, 0)).re, -FRAC_1_SQRT_2);
        assert!((alpha.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(alpha.inner(&a).norm(), 0.0);
    }

    #[test]
    fn dark_state_special_angles() {
        let space = StateSpace::new(1);
        let d0 = dark_state(space, 0.0, 0.3);
        assert_eq!(d0, basis_state(space, Level::One, Level::One, 0).unwrap());

        let dpi = dark_state(space, PI, 0.0);
        let a = a_state(space);
        assert!((dpi.inner(&a) + 1.0).norm() < 1e-15);

        let dh = dark_state(space, PI / 2.0, 0.0);
        let one1 = BasisLabel::new(Level::One, Level::One, 0);
        assert!((dh.amplitude(one1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((dh.inner(&a).re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn dark_state_is_unit_and_never_excited(theta in -10.0f64..10.0, phi in -10.0f64..10.0) {
            let space = StateSpace::new(2);
            let d = dark_state(space, theta, phi);
            prop_assert!((d.norm_sqr() - 1.0).abs() < 1e-12);
            let leak = d.population_where(|l| l.excited_count() > 0 || l.photons > 0);
            prop_assert_eq!(leak, 0.0);
        }
    }
}
