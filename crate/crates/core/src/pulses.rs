//! Time-dependent control schedules.
//!
//! A schedule produces the control pair `(Ω(t), Ω̄(t))`; the attached
//! [`TuningRule`] turns that pair into the four physical laser amplitudes.
//! The dark state of the effective model along any schedule is
//! `dark_state(θ(t), φ(t))` with `tan(θ/2) = |Ω̄|/|Ω|` and `φ = arg Ω̄ − arg Ω`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{StateSpace, StateVector};
use crate::model::{DriveAmplitudes, LaserAmplitudes, TuningRule};

/// `(Ω, Ω̄) = (Ω₀ cos(θ/2), Ω₀ sin(θ/2) e^{iφ})`.
pub fn theta_phi_to_amplitudes(theta: f64, phi: f64, peak: f64) -> DriveAmplitudes {
    let (s, c) = (theta / 2.0).sin_cos();
    DriveAmplitudes::new(Complex64::new(peak * c, 0.0), Complex64::from_polar(peak * s, phi))
}

/// Mixing angle `2·atan2(|Ω̄|, |Ω|)`.
pub fn mixing_angle(drive: DriveAmplitudes) -> f64 {
    2.0 * drive.omegabar.norm().atan2(drive.omega.norm())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    #[default]
    Linear,
    SinSquared,
}

impl RampShape {
    fn profile(self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            RampShape::Linear => x,
            RampShape::SinSquared => (FRAC_PI_2 * x).sin().powi(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RampShape::Linear => "linear",
            RampShape::SinSquared => "sin2",
        }
    }
}

/// Segment layout of a counterintuitive trapezoid pair, as fractions of the
/// total duration `T`.
///
/// With `r = rise` and `o = overlap` the transfer ramps have length
/// `L = (1 − 2r + o)/2`:
///
/// ```text
/// Ω : up [0, r]      plateau   down [1 − r − L, 1 − r]
/// Ω̄ : up [r, r + L]  plateau   down [1 − r, 1]
/// ```
///
/// so `o` is the time during which Ω is falling while Ω̄ is still rising.
/// The default `(0.2, 0.2)` gives Ω up on `[0, 0.2T]`, down on `[0.4T, 0.8T]`
/// and Ω̄ up on `[0.2T, 0.6T]`, down on `[0.8T, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampLayout {
    pub rise: f64,
    pub overlap: f64,
}

impl Default for RampLayout {
    fn default() -> Self {
        Self { rise: 0.2, overlap: 0.2 }
    }
}

impl RampLayout {
    pub fn new(rise: f64, overlap: f64) -> Result<Self> {
        let layout = Self { rise, overlap };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        let (r, o) = (self.rise, self.overlap);
        if !(r > 0.0 && r < 0.5) {
            return Err(Error::Config(format!("ramp layout needs 0 < rise < 0.5 (rise = {r})")));
        }
        if o.is_nan() || o <= 0.0 {
            return Err(Error::Config(format!("ramp layout needs 0 < overlap (overlap = {o})")));
        }
        if o > 1.0 - 2.0 * r {
            return Err(Error::Config(format!(
                "ramp layout needs overlap <= 1 - 2*rise ({o} > {})",
                1.0 - 2.0 * r
            )));
        }
        Ok(())
    }

    fn transfer_ramp(&self) -> f64 {
        (1.0 - 2.0 * self.rise + self.overlap) / 2.0
    }

    /// Envelopes `(e_Ω, e_Ω̄) ∈ [0, 1]²` at fractional time `x`.
    fn envelopes(&self, x: f64, shape: RampShape) -> (f64, f64) {
        let (r, l) = (self.rise, self.transfer_ramp());
        let omega = if x <= 0.0 || x >= 1.0 - r {
            0.0
        } else if x < r {
            shape.profile(x / r)
        } else if x <= 1.0 - r - l {
            1.0
        } else {
            shape.profile((1.0 - r - x) / l)
        };
        let omegabar = if x <= r || x >= 1.0 {
            0.0
        } else if x < r + l {
            shape.profile((x - r) / l)
        } else if x <= 1.0 - r {
            1.0
        } else {
            shape.profile((1.0 - x) / r)
        };
        (omega, omegabar)
    }
}

/// Closed polyline in the `(θ, φ)` plane, traversed at constant speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    waypoints: Vec<(f64, f64)>,
}

const LOOP_CLOSURE_TOL: f64 = 1e-12;

impl LoopPath {
    pub fn new(waypoints: Vec<(f64, f64)>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Config("a loop needs at least two waypoints".into()));
        }
        if waypoints.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
            return Err(Error::Config("loop waypoints must be finite".into()));
        }
        let (first, last) = (waypoints[0], waypoints[waypoints.len() - 1]);
        if (first.0 - last.0).abs() > LOOP_CLOSURE_TOL || (first.1 - last.1).abs() > LOOP_CLOSURE_TOL {
            return Err(Error::Config(format!(
                "loop is open: starts at ({}, {}) but ends at ({}, {})",
                first.0, first.1, last.0, last.1
            )));
        }
        if first.0.abs() > LOOP_CLOSURE_TOL {
            return Err(Error::Config(format!("loop must start at theta = 0 (starts at {})", first.0)));
        }
        Ok(Self { waypoints })
    }

    /// `(0,0) → (θ₀,0) → (θ₀,φ₀) → (0,φ₀) → (0,0)`.
    pub fn rectangle(theta0: f64, phi0: f64) -> Self {
        Self::new(vec![(0.0, 0.0), (theta0, 0.0), (theta0, phi0), (0.0, phi0), (0.0, 0.0)])
            .expect("rectangle loop is closed and starts at theta = 0")
    }

    /// Zero-area loop sitting at the origin.
    pub fn degenerate() -> Self {
        Self::new(vec![(0.0, 0.0), (0.0, 0.0)]).expect("trivially closed")
    }

    pub fn waypoints(&self) -> &[(f64, f64)] {
        &self.waypoints
    }

    fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b.0 - a.0).hypot(b.1 - a.1)).sum()
    }

    /// Point reached after fraction `s ∈ [0, 1]` of the total path length.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let total = self.length();
        if total == 0.0 {
            return self.waypoints[0];
        }
        let mut remaining = s.clamp(0.0, 1.0) * total;
        for (a, b) in self.segments() {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if remaining <= len && len > 0.0 {
                let f = remaining / len;
                return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            }
            remaining -= len;
        }
        self.waypoints[self.waypoints.len() - 1]
    }

    /// Signed `∮ (1 − cos θ) dφ`, which by Green's theorem equals the surface
    /// integral `∬ sin θ dθ dφ` over the enclosed region (positive for loops
    /// running counter-clockwise with θ on the horizontal axis).
    pub fn enclosed_solid_angle(&self) -> f64 {
        self.segments()
            .map(|((ta, pa), (tb, pb))| {
                let dphi = pb - pa;
                if dphi == 0.0 {
                    0.0
                } else if (tb - ta).abs() < 1e-14 {
                    (1.0 - ta.cos()) * dphi
                } else {
                    dphi * (1.0 - (tb.sin() - ta.sin()) / (tb - ta))
                }
            })
            .sum()
    }

    /// True if two non-adjacent edges cross.
    pub fn is_self_intersecting(&self) -> bool {
        let segs: Vec<_> = self.segments().filter(|(a, b)| a != b).collect();
        let n = segs.len();
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(segs[i], segs[j]) {
                    return true;
                }
            }
        }
        false
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) - 1e-12 && p.0 <= a.0.max(b.0) + 1e-12 && p.1 >= a.1.min(b.1) - 1e-12 && p.1 <= a.1.max(b.1) + 1e-12
}

fn segments_cross(s: ((f64, f64), (f64, f64)), t: ((f64, f64), (f64, f64))) -> bool {
    let (d1, d2) = (orient(t.0, t.1, s.0), orient(t.0, t.1, s.1));
    let (d3, d4) = (orient(s.0, s.1, t.0), orient(s.0, s.1, t.1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(t.0, t.1, s.0))
        || (d2 == 0.0 && on_segment(t.0, t.1, s.1))
        || (d3 == 0.0 && on_segment(s.0, s.1, t.0))
        || (d4 == 0.0 && on_segment(s.0, s.1, t.1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
enum Shape {
    Stirap {
        omega_max: f64,
        omegabar_max: f64,
        duration: f64,
        layout: RampLayout,
        ramp: RampShape,
    },
    Loop {
        path: LoopPath,
        peak: f64,
        duration: f64,
    },
    Constant {
        drive: DriveAmplitudes,
        duration: f64,
    },
    Reversed(Box<Shape>),
}

impl Shape {
    fn duration(&self) -> f64 {
        match self {
            Shape::Stirap { duration, .. } | Shape::Loop { duration, .. } | Shape::Constant { duration, .. } => {
                *duration
            }
            Shape::Reversed(inner) => inner.duration(),
        }
    }

    fn drive(&self, t: f64) -> DriveAmplitudes {
        match self {
            Shape::Stirap {
                omega_max,
                omegabar_max,
                duration,
                layout,
                ramp,
            } => {
                let (eo, eb) = layout.envelopes(t / duration, *ramp);
                DriveAmplitudes::real(omega_max * eo, omegabar_max * eb)
            }
            Shape::Loop { path, peak, duration } => {
                let (theta, phi) = path.point_at(t / duration);
                theta_phi_to_amplitudes(theta, phi, *peak)
            }
            Shape::Constant { drive, .. } => *drive,
            Shape::Reversed(inner) => inner.drive(inner.duration() - t),
        }
    }

    fn theta(&self, t: f64) -> f64 {
        match self {
            Shape::Loop { path, duration, .. } => path.point_at(t / duration).0,
            Shape::Reversed(inner) => inner.theta(inner.duration() - t),
            Shape::Stirap { duration, .. } => {
                let d = self.drive(t);
                if d.omega.norm() == 0.0 && d.omegabar.norm() == 0.0 {
                    // Both off: take the limit from inside the pulse.
                    if t <= duration / 2.0 {
                        0.0
                    } else {
                        PI
                    }
                } else {
                    mixing_angle(d)
                }
            }
            Shape::Constant { drive, .. } => mixing_angle(*drive),
        }
    }

    fn describe(&self, prefix: &str, out: &mut Vec<(String, String)>) {
        let mut put = |k: &str, v: String| out.push((format!("{prefix}{k}"), v));
        match self {
            Shape::Stirap {
                omega_max,
                omegabar_max,
                duration,
                layout,
                ramp,
            } => {
                put("shape", format!("stirap_{}", ramp.name()));
                put("omega_max", omega_max.to_string());
                put("omegabar_max", omegabar_max.to_string());
                put("duration", duration.to_string());
                put("rise", layout.rise.to_string());
                put("overlap", layout.overlap.to_string());
            }
            Shape::Loop { path, peak, duration } => {
                put("shape", "loop".into());
                let pts: Vec<String> = path.waypoints().iter().map(|(t, p)| format!("{t},{p}")).collect();
                put("waypoints", pts.join(";"));
                put("peak", peak.to_string());
                put("duration", duration.to_string());
            }
            Shape::Constant { drive, duration } => {
                put("shape", "constant".into());
                put("omega_re", drive.omega.re.to_string());
                put("omega_im", drive.omega.im.to_string());
                put("omegabar_re", drive.omegabar.re.to_string());
                put("omegabar_im", drive.omegabar.im.to_string());
                put("duration", duration.to_string());
            }
            Shape::Reversed(inner) => {
                put("reversed", "true".into());
                inner.describe(prefix, out);
            }
        }
    }
}

/// Immutable control schedule on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    shape: Shape,
    tuning: TuningRule,
}

fn check_duration(duration: f64) -> Result<()> {
    if duration.is_finite() && duration > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("schedule duration must be positive and finite (got {duration})")))
    }
}

impl PulseSchedule {
    /// Counterintuitive trapezoid pair: Ω (coupling the initially empty |A⟩)
    /// switches on first and off first.
    pub fn stirap(omega_max: f64, omegabar_max: f64, duration: f64, layout: RampLayout, ramp: RampShape) -> Result<Self> {
        check_duration(duration)?;
        layout.validate()?;
        if !(omega_max >= 0.0 && omegabar_max >= 0.0 && omega_max.is_finite() && omegabar_max.is_finite()) {
            return Err(Error::Config("peak amplitudes must be finite and non-negative".into()));
        }
        Ok(Self {
            shape: Shape::Stirap {
                omega_max,
                omegabar_max,
                duration,
                layout,
                ramp,
            },
            tuning: TuningRule::default(),
        })
    }

    /// Linear-ramp STIRAP pair with the given rise and overlap fractions.
    pub fn stirap_linear(omega_max: f64, omegabar_max: f64, duration: f64, rise: f64, overlap: f64) -> Result<Self> {
        Self::stirap(omega_max, omegabar_max, duration, RampLayout::new(rise, overlap)?, RampShape::Linear)
    }

    /// Traces `path` at constant speed with amplitudes from
    /// [`theta_phi_to_amplitudes`].
    pub fn loop_path(path: LoopPath, peak: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Config(format!("loop peak amplitude must be positive (got {peak})")));
        }
        Ok(Self {
            shape: Shape::Loop { path, peak, duration },
            tuning: TuningRule::default(),
        })
    }

    pub fn constant(drive: DriveAmplitudes, duration: f64) -> Self {
        Self {
            shape: Shape::Constant { drive, duration },
            tuning: TuningRule::default(),
        }
    }

    pub fn with_tuning(mut self, tuning: TuningRule) -> Self {
        self.tuning = tuning;
        self
    }

    /// Same schedule played backwards, `t ↦ T − t`.
    pub fn reversed(&self) -> Self {
        let shape = match &self.shape {
            Shape::Reversed(inner) => (**inner).clone(),
            other => Shape::Reversed(Box::new(other.clone())),
        };
        Self {
            shape,
            tuning: self.tuning,
        }
    }

    pub fn tuning(&self) -> TuningRule {
        self.tuning
    }

    pub fn duration(&self) -> f64 {
        self.shape.duration()
    }

    pub fn drive(&self, t: f64) -> DriveAmplitudes {
        self.shape.drive(t)
    }

    pub fn lasers(&self, t: f64) -> LaserAmplitudes {
        self.tuning.lasers(self.drive(t))
    }

    /// Mixing angle θ(t); for loops this is the path coordinate itself.
    pub fn theta(&self, t: f64) -> f64 {
        self.shape.theta(t)
    }

    /// Largest laser amplitude over the schedule (sampled).
    pub fn peak_laser(&self) -> f64 {
        const N: usize = 2000;
        (0..=N)
            .map(|k| self.lasers(self.duration() * k as f64 / N as f64).max_abs())
            .fold(0.0, f64::max)
    }

    /// Key/value description (`pulse.*` keys) sufficient to rebuild the
    /// schedule.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        self.shape.describe("pulse.", &mut out);
        out.push(("pulse.split".into(), self.tuning.symmetric_fraction.to_string()));
        out
    }
}

/// Ideal 2π pulse on σ↔2 for both atoms: multiplies every basis state by
/// `(−1)^(number of atoms in σ)`.
pub fn sigma_flip(space: StateSpace) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        space.dim(),
        space.labels().map(|l| Complex64::new(if l.sigma_count() % 2 == 1 { -1.0 } else { 1.0 }, 0.0)),
    ))
}

/// In-place version of [`sigma_flip`].
pub fn apply_sigma_flip(psi: &mut StateVector) {
    let space = psi.space();
    for (i, a) in psi.amplitudes_mut().iter_mut().enumerate() {
        if space.label(i).sigma_count() % 2 == 1 {
            *a = -*a;
        }
    }
}

/// Control pair realising a resonant σ↔2 pulse of Rabi frequency `rabi` on
/// both atoms (`Ω₁ = Ω₁′ = rabi`, all other lasers off).
pub fn sigma_pulse_drive(rabi: f64) -> DriveAmplitudes {
    DriveAmplitudes::real(-rabi / std::f64::consts::SQRT_2, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{a_state, basis_state, dark_coefficients, Level};
    use crate::model::{effective_hamiltonian, EffectiveModel};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn reference() -> PulseSchedule {
        PulseSchedule::stirap_linear(SQRT_2 * 0.018, 0.018, 5e4, 0.2, 0.2).unwrap()
    }

    #[test]
    fn theta_phi_examples() {
        let d = theta_phi_to_amplitudes(0.0, 1.0, 0.5);
        assert_eq!((d.omega.re, d.omegabar.norm()), (0.5, 0.0));
        let d = theta_phi_to_amplitudes(PI, 0.7, 0.5);
        assert!(d.omega.norm() < 1e-16 && (d.omegabar - Complex64::from_polar(0.5, 0.7)).norm() < 1e-16);
        let d = theta_phi_to_amplitudes(PI / 2.0, PI, 1.0);
        assert!((d.omega.re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((d.omegabar - Complex64::new(-FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn stirap_endpoints_and_ordering() {
        let s = reference();
        let d0 = s.drive(0.0);
        assert_eq!((d0.omega.norm(), d0.omegabar.norm()), (0.0, 0.0));
        assert_eq!(s.theta(0.0), 0.0);
        // Ω alone has ramped up.
        let d = s.drive(0.15 * 5e4);
        assert!(d.omega.norm() > 0.0 && d.omegabar.norm() == 0.0);
        assert_eq!(s.theta(0.15 * 5e4), 0.0);
        // Only Ω̄ remains before the final ramp down.
        let d = s.drive(0.85 * 5e4);
        assert!(d.omega.norm() == 0.0 && d.omegabar.norm() > 0.0);
        assert_eq!(s.theta(0.85 * 5e4), PI);
        assert_eq!(s.theta(5e4), PI);
        let d = s.drive(0.5 * 5e4);
        assert!((d.omega.re - 0.75 * SQRT_2 * 0.018).abs() < 1e-15);
        assert!((d.omegabar.re - 0.75 * 0.018).abs() < 1e-15);
    }

    #[test]
    fn infeasible_layouts_name_the_inequality() {
        let err = PulseSchedule::stirap_linear(0.01, 0.01, 100.0, 0.6, 0.1).unwrap_err().to_string();
        assert!(err.contains("rise < 0.5"), "{err}");
        let err = PulseSchedule::stirap_linear(0.01, 0.01, 100.0, 0.3, 0.5).unwrap_err().to_string();
        assert!(err.contains("overlap <= 1 - 2*rise"), "{err}");
        let err = PulseSchedule::stirap_linear(0.01, 0.01, 100.0, 0.2, 0.0).unwrap_err().to_string();
        assert!(err.contains("0 < overlap"), "{err}");
    }

    #[test]
    fn loop_examples() {
        let rect = LoopPath::rectangle(PI / 2.0, PI);
        assert!((rect.enclosed_solid_angle() - PI).abs() < 1e-14);
        assert!(PulseSchedule::loop_path(rect, 0.05, 1000.0).is_ok());
        assert_eq!(LoopPath::degenerate().enclosed_solid_angle(), 0.0);
        let rect = LoopPath::rectangle(PI / 3.0, PI / 2.0);
        assert!((rect.enclosed_solid_angle() - PI / 4.0).abs() < 1e-14);

        assert!(matches!(LoopPath::new(vec![(0.0, 0.0), (1.0, 0.0)]), Err(Error::Config(_))));
        assert!(matches!(LoopPath::new(vec![(0.5, 0.0), (1.0, 0.0), (0.5, 0.0)]), Err(Error::Config(_))));
    }

    #[test]
    fn slanted_edges_integrate_exactly() {
        // Triangle with a slanted edge, checked against midpoint quadrature of
        // the surface integral ∬ sinθ dθ dφ.
        let tri = LoopPath::new(vec![(0.0, 0.0), (1.2, 0.0), (1.2, 0.9), (0.0, 0.0)]).unwrap();
        let n = 2000;
        let mut area = 0.0;
        for i in 0..n {
            let theta = (i as f64 + 0.5) * 1.2 / n as f64;
            area += theta.sin() * (0.9 * theta / 1.2) * (1.2 / n as f64);
        }
        assert!((tri.enclosed_solid_angle() - area).abs() < 1e-6);
    }

    #[test]
    fn self_intersection() {
        assert!(!LoopPath::rectangle(1.0, 1.0).is_self_intersecting());
        let bowtie = LoopPath::new(vec![(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]).unwrap();
        assert!(bowtie.is_self_intersecting());
        assert!(!LoopPath::degenerate().is_self_intersecting());
    }

    #[test]
    fn loop_schedule_follows_waypoints() {
        let s = PulseSchedule::loop_path(LoopPath::rectangle(1.0, 1.0), 0.1, 400.0).unwrap();
        assert_eq!(s.theta(0.0), 0.0);
        assert!((s.theta(100.0) - 1.0).abs() < 1e-12);
        let d = s.drive(200.0);
        assert!((d.omegabar.arg() - 1.0).abs() < 1e-12);
        assert!((s.theta(400.0)).abs() < 1e-12);
    }

    #[test]
    fn reversal() {
        let s = reference();
        let r = s.reversed();
        for t in [0.0, 1234.5, 2.5e4, 4.9e4] {
            assert_eq!(r.drive(t), s.drive(5e4 - t));
        }
        assert_eq!(r.reversed(), s);
        assert_eq!(r.theta(0.0), PI);
    }

    #[test]
    fn sigma_flip_examples() {
        let space = StateSpace::new(1);
        let f = sigma_flip(space);
        let apply = |v: &StateVector| StateVector::from_amplitudes(space, &f * v.amplitudes()).unwrap();
        let a = a_state(space);
        assert_eq!(apply(&a).amplitudes(), &(-a.amplitudes()));
        let g11 = basis_state(space, Level::One, Level::One, 0).unwrap();
        assert_eq!(apply(&g11), g11);
        let ss = basis_state(space, Level::Sigma, Level::Sigma, 0).unwrap();
        assert_eq!(apply(&ss), ss);
        assert_eq!(&f * &f, DMatrix::identity(space.dim(), space.dim()));
        assert_eq!(f.adjoint(), f);
        let mut b = a.clone();
        apply_sigma_flip(&mut b);
        assert_eq!(b, apply(&a));
    }

    #[test]
    fn describe_lists_parameters() {
        let kv = reference().describe();
        let get = |k: &str| kv.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        assert_eq!(get("pulse.shape").as_deref(), Some("stirap_linear"));
        assert_eq!(get("pulse.duration").as_deref(), Some("50000"));
        assert_eq!(get("pulse.split").as_deref(), Some("0"));
    }

    proptest! {
        #[test]
        fn schedule_stays_dark(frac in 0.0f64..1.0, delta in -0.1f64..0.1) {
            let sched = [
                reference(),
                PulseSchedule::stirap(0.03, 0.02, 1e4, RampLayout::new(0.1, 0.3).unwrap(), RampShape::SinSquared).unwrap(),
                PulseSchedule::loop_path(LoopPath::rectangle(2.0, 2.5), 0.05, 1e3).unwrap(),
            ];
            for s in &sched {
                let t = frac * s.duration();
                let em = EffectiveModel::from_drive(s.drive(t), delta);
                let d = s.drive(t);
                let phi = d.omegabar.arg() - d.omega.arg();
                let v = dark_coefficients(s.theta(t), phi);
                prop_assert!((effective_hamiltonian(&em) * v).norm() < 1e-12);
            }
        }

        #[test]
        fn stirap_theta_is_monotone(rise in 0.05f64..0.45, ofrac in 0.01f64..1.0) {
            let overlap = ofrac * (1.0 - 2.0 * rise);
            let s = PulseSchedule::stirap_linear(0.02, 0.015, 1.0, rise, overlap).unwrap();
            let mut prev = 0.0;
            for k in 0..=500 {
                let t = k as f64 / 500.0;
                let th = s.theta(t);
                let d = s.drive(t);
                prop_assert!(d.omega.norm() <= 0.02 + 1e-15 && d.omegabar.norm() <= 0.015 + 1e-15);
                prop_assert!(th >= prev - 1e-12);
                prev = th;
            }
            prop_assert_eq!(prev, PI);
        }
    }
}
