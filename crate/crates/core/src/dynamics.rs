//! Fixed-step RK4 integration of `i ψ̇ = H(t) ψ` for the conditional
//! Hamiltonian, plus the conditioned observables derived from it.
//!
//! Conditioned states are never renormalised during the run: `‖ψ(t)‖²` is
//! the probability that neither the cavity nor an atom has emitted up to `t`.
//! Fidelities are reported conditioned on that event, i.e. renormalised.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{a_state, alpha_state, basis_state, Level, StateSpace, StateVector};
use crate::model::{laser_lowering_pairs, static_hamiltonian, LaserAmplitudes, SystemParams};
use crate::pulses::PulseSchedule;

pub const DEFAULT_DT: f64 = 0.05;

/// Target number of stored samples when `sample_every` is not given.
pub const DEFAULT_SAMPLE_COUNT: usize = 2000;

/// Largest accepted `dt · (fastest rate in the problem)`.
pub const STABILITY_LIMIT: f64 = 0.1;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Store every `sample_every`-th step; `None` picks a stride giving about
    /// [`DEFAULT_SAMPLE_COUNT`] samples.
    pub sample_every: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            sample_every: None,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    /// Only the initial and final states are kept.
    pub fn endpoints(dt: f64) -> Self {
        Self {
            dt,
            sample_every: Some(usize::MAX),
        }
    }
}

/// `H(t)` in a sparse form: fixed nonzeros plus the four laser transition
/// lists whose amplitudes change with time.
struct Generator {
    diag: Vec<Complex64>,
    offdiag: Vec<(usize, usize, Complex64)>,
    lasers: [Vec<(usize, usize)>; 4],
}

impl Generator {
    fn new(params: &SystemParams) -> Self {
        let h = static_hamiltonian(params);
        let dim = h.nrows();
        let diag = (0..dim).map(|i| h[(i, i)]).collect();
        let mut offdiag = Vec::new();
        for c in 0..dim {
            for r in 0..dim {
                if r != c && h[(r, c)] != Complex64::new(0.0, 0.0) {
                    offdiag.push((r, c, h[(r, c)]));
                }
            }
        }
        Self {
            diag,
            offdiag,
            lasers: laser_lowering_pairs(params.space()),
        }
    }

    /// `out = −i H ψ`.
    fn derivative(&self, laser: &LaserAmplitudes, psi: &[Complex64], out: &mut [Complex64]) {
        for ((o, d), p) in out.iter_mut().zip(&self.diag).zip(psi) {
            *o = d * p;
        }
        for &(r, c, v) in &self.offdiag {
            out[r] += v * psi[c];
        }
        for (pairs, amp) in self.lasers.iter().zip(laser.as_array()) {
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (down, up) = (amp * 0.5, amp.conj() * 0.5);
            for &(r, c) in pairs {
                out[r] += down * psi[c];
                out[c] += up * psi[r];
            }
        }
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    }
}

/// Per-step probes: fixed reference states and the label classes needed for
/// populations.
struct Probes {
    idx_11: usize,
    a: Vec<(usize, Complex64)>,
    alpha: Vec<(usize, Complex64)>,
    excited: Vec<f64>,
    photons: Vec<f64>,
}

fn sparse(psi: &StateVector) -> Vec<(usize, Complex64)> {
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(i, a)| (i, *a))
        .collect()
}

impl Probes {
    fn new(space: StateSpace) -> Self {
        let idx_11 = space.index(crate::hilbert::BasisLabel::new(Level::One, Level::One, 0));
        Self {
            idx_11,
            a: sparse(&a_state(space)),
            alpha: sparse(&alpha_state(space)),
            excited: space.labels().map(|l| l.excited_count() as f64).collect(),
            photons: space.labels().map(|l| l.photons as f64).collect(),
        }
    }

    fn overlap(reference: &[(usize, Complex64)], psi: &[Complex64]) -> f64 {
        reference.iter().map(|(i, a)| a.conj() * psi[*i]).sum::<Complex64>().norm_sqr()
    }

    fn row(&self, time: f64, psi: &[Complex64]) -> ObservableRow {
        let mut norm2 = 0.0;
        let mut level2 = 0.0;
        let mut cavity = 0.0;
        for ((a, e), n) in psi.iter().zip(&self.excited).zip(&self.photons) {
            let p = a.norm_sqr();
            norm2 += p;
            level2 += e * p;
            if *n > 0.0 {
                cavity += p;
            }
        }
        ObservableRow {
            time,
            norm2,
            pop_11: psi[self.idx_11].norm_sqr(),
            pop_a: Self::overlap(&self.a, psi),
            pop_alpha: Self::overlap(&self.alpha, psi),
            pop_level2: level2,
            pop_cavity: cavity,
        }
    }

    /// `(⟨b†b⟩, ⟨Σ|2⟩⟨2|⟩)` of the unnormalised state.
    fn loss_rates(&self, psi: &[Complex64]) -> (f64, f64) {
        psi.iter()
            .zip(&self.photons)
            .zip(&self.excited)
            .fold((0.0, 0.0), |(c, e), ((a, n), x)| (c + n * a.norm_sqr(), e + x * a.norm_sqr()))
    }
}

/// One sampled point of the observable table. Populations are raw
/// (unnormalised); the `_cond` variants divide by `norm2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObservableRow {
    pub time: f64,
    pub norm2: f64,
    pub pop_11: f64,
    pub pop_a: f64,
    pub pop_alpha: f64,
    /// Expected number of atoms in level 2.
    pub pop_level2: f64,
    /// Probability of at least one cavity photon.
    pub pop_cavity: f64,
}

impl ObservableRow {
    fn cond(&self, x: f64) -> f64 {
        if self.norm2 > 0.0 {
            x / self.norm2
        } else {
            0.0
        }
    }

    pub fn pop_a_cond(&self) -> f64 {
        self.cond(self.pop_a)
    }

    pub fn pop_11_cond(&self) -> f64 {
        self.cond(self.pop_11)
    }

    pub fn pop_alpha_cond(&self) -> f64 {
        self.cond(self.pop_alpha)
    }

    pub fn pop_level2_cond(&self) -> f64 {
        self.cond(self.pop_level2)
    }

    pub fn pop_cavity_cond(&self) -> f64 {
        self.cond(self.pop_cavity)
    }
}

pub const OBSERVABLE_COLUMNS: [&str; 12] = [
    "time",
    "norm2",
    "pop_11",
    "pop_A",
    "pop_alpha",
    "pop_level2",
    "pop_cavity",
    "pop_11_cond",
    "pop_A_cond",
    "pop_alpha_cond",
    "pop_level2_cond",
    "pop_cavity_cond",
];

/// Observable table as CSV with a header row.
pub fn observables_csv(rows: &[ObservableRow]) -> String {
    let mut out = OBSERVABLE_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let vals = [
            r.time,
            r.norm2,
            r.pop_11,
            r.pop_a,
            r.pop_alpha,
            r.pop_level2,
            r.pop_cavity,
            r.pop_11_cond(),
            r.pop_a_cond(),
            r.pop_alpha_cond(),
            r.pop_level2_cond(),
            r.pop_cavity_cond(),
        ];
        let line: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Running extrema and loss integrals gathered at every integration step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub peak_alpha_pop: f64,
    pub peak_level2_pop: f64,
    pub peak_cavity_pop: f64,
    /// `κ ∫ ⟨b†b⟩ dt`.
    pub cavity_loss: f64,
    /// `Γ ∫ ⟨Σᵢ |2⟩ᵢ⟨2|⟩ dt`.
    pub atomic_loss: f64,
}

impl RunStats {
    fn observe(&mut self, row: &ObservableRow) {
        self.peak_alpha_pop = self.peak_alpha_pop.max(row.pop_alpha_cond());
        self.peak_level2_pop = self.peak_level2_pop.max(row.pop_level2_cond());
        self.peak_cavity_pop = self.peak_cavity_pop.max(row.pop_cavity_cond());
    }

    /// Combines two consecutive segments of one protocol.
    pub fn merge(&self, other: &RunStats) -> RunStats {
        RunStats {
            steps: self.steps + other.steps,
            peak_alpha_pop: self.peak_alpha_pop.max(other.peak_alpha_pop),
            peak_level2_pop: self.peak_level2_pop.max(other.peak_level2_pop),
            peak_cavity_pop: self.peak_cavity_pop.max(other.peak_cavity_pop),
            cavity_loss: self.cavity_loss + other.cavity_loss,
            atomic_loss: self.atomic_loss + other.atomic_loss,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub params: SystemParams,
    pub schedule: PulseSchedule,
    /// Step actually used (`T / ceil(T / dt)`).
    pub dt: f64,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("a trajectory always holds its initial state")
    }
}

/// Fastest rate that the integrator has to resolve.
pub fn fastest_rate(params: &SystemParams, schedule: &PulseSchedule) -> f64 {
    let cavity = params.g.abs() * (params.n_max.max(1) as f64).sqrt();
    [cavity, params.kappa, params.gamma, params.delta.abs(), schedule.peak_laser()]
        .into_iter()
        .fold(0.0, f64::max)
}

fn check_step(params: &SystemParams, schedule: &PulseSchedule, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive (dt = {dt})")));
    }
    let rate = fastest_rate(params, schedule);
    if dt * rate > STABILITY_LIMIT {
        return Err(Error::Config(format!(
            "dt = {dt} too large: dt * {rate} = {} exceeds the stability limit {STABILITY_LIMIT}",
            dt * rate
        )));
    }
    Ok(())
}

/// Integrates `ψ0` over the whole schedule. `ψ0` must be normalised.
pub fn evolve(params: &SystemParams, schedule: &PulseSchedule, psi0: &StateVector, opts: &EvolveOptions) -> Result<Trajectory> {
    let n2 = psi0.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::Domain(format!("initial state must be normalised (norm² = {n2})")));
    }
    propagate(params, schedule, psi0, opts)
}

/// Like [`evolve`] but accepts any start vector, e.g. the conditioned output
/// of a previous protocol stage.
pub fn propagate(params: &SystemParams, schedule: &PulseSchedule, psi0: &StateVector, opts: &EvolveOptions) -> Result<Trajectory> {
    params.validate()?;
    if psi0.space() != params.space() {
        return Err(Error::Domain(format!(
            "state has n_max = {}, parameters have n_max = {}",
            psi0.space().n_max(),
            params.n_max
        )));
    }
    check_step(params, schedule, opts.dt)?;

    let duration = schedule.duration();
    let steps = ((duration / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let stride = opts.sample_every.unwrap_or((steps / DEFAULT_SAMPLE_COUNT).max(1)).max(1);

    let generator = Generator::new(params);
    let probes = Probes::new(params.space());
    let dim = psi0.space().dim();
    let zero = Complex64::new(0.0, 0.0);
    let mut y: Vec<Complex64> = psi0.amplitudes().iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![zero; dim],
        vec![zero; dim],
        vec![zero; dim],
        vec![zero; dim],
        vec![zero; dim],
    );

    let mut stats = RunStats::default();
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let row = probes.row(0.0, &y);
    stats.observe(&row);
    let mut rates = probes.loss_rates(&y);

    let mut laser_now = schedule.lasers(0.0);
    for step in 1..=steps {
        let t0 = (step - 1) as f64 * dt;
        let t1 = step as f64 * dt;
        let laser_mid = schedule.lasers(t0 + 0.5 * dt);
        let laser_end = schedule.lasers(t1);

        generator.derivative(&laser_now, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + k1[i] * (0.5 * dt);
        }
        generator.derivative(&laser_mid, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + k2[i] * (0.5 * dt);
        }
        generator.derivative(&laser_mid, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + k3[i] * dt;
        }
        generator.derivative(&laser_end, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        laser_now = laser_end;

        let row = probes.row(t1, &y);
        if !row.norm2.is_finite() {
            return Err(Error::Diverged {
                step,
                time: t1,
                reason: "non-finite amplitude".into(),
            });
        }
        if row.norm2 > 1e6 {
            return Err(Error::Diverged {
                step,
                time: t1,
                reason: format!("norm² grew to {:e}", row.norm2),
            });
        }
        stats.observe(&row);
        let next = probes.loss_rates(&y);
        stats.cavity_loss += params.kappa * 0.5 * (rates.0 + next.0) * dt;
        stats.atomic_loss += params.gamma * 0.5 * (rates.1 + next.1) * dt;
        rates = next;

        if step % stride == 0 || step == steps {
            times.push(t1);
            states.push(StateVector::from_amplitudes(psi0.space(), DVector::from_vec(y.clone()))?);
        }
    }
    stats.steps = steps;

    Ok(Trajectory {
        times,
        states,
        params: *params,
        schedule: schedule.clone(),
        dt,
        stats,
    })
}

/// `‖ψ(T)‖²`, the probability of no emission through either loss channel.
pub fn success_probability(traj: &Trajectory) -> f64 {
    traj.final_state().norm_sqr()
}

/// `|⟨target|ψ⟩|² / ‖ψ‖²`.
pub fn state_fidelity(psi: &StateVector, target: &StateVector) -> Result<f64> {
    let n2 = psi.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::Undefined("fidelity of a zero-norm state".into()));
    }
    Ok(psi.population_of(target) / n2)
}

/// Fidelity of the final state with `target`, conditioned on no emission.
pub fn conditional_fidelity(traj: &Trajectory, target: &StateVector) -> Result<f64> {
    state_fidelity(traj.final_state(), target)
}

pub fn observables(traj: &Trajectory) -> Vec<ObservableRow> {
    let probes = Probes::new(traj.params.space());
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| probes.row(*t, s.amplitudes().as_slice()))
        .collect()
}

/// Result of a single |11⟩ → |A⟩ transfer run.
#[derive(Clone, Debug)]
pub struct TransferResult {
    pub p0: f64,
    pub fidelity: f64,
    pub final_state: StateVector,
    pub stats: RunStats,
}

impl TransferResult {
    pub fn from_trajectory(traj: &Trajectory, target: &StateVector) -> Result<Self> {
        Ok(Self {
            p0: success_probability(traj),
            fidelity: conditional_fidelity(traj, target)?,
            final_state: traj.final_state().clone(),
            stats: traj.stats,
        })
    }
}

/// `[re, im]` pairs keyed by basis label.
pub(crate) fn state_json(psi: &StateVector) -> Vec<(String, [f64; 2])> {
    let space = psi.space();
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(i, a)| (space.label(i).to_string(), [a.re, a.im]))
        .collect()
}

impl Serialize for TransferResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TransferResult", 10)?;
        st.serialize_field("p0", &self.p0)?;
        st.serialize_field("fidelity", &self.fidelity)?;
        st.serialize_field("peak_alpha_pop", &self.stats.peak_alpha_pop)?;
        st.serialize_field("peak_level2_pop", &self.stats.peak_level2_pop)?;
        st.serialize_field("peak_cavity_pop", &self.stats.peak_cavity_pop)?;
        st.serialize_field("cavity_loss", &self.stats.cavity_loss)?;
        st.serialize_field("atomic_loss", &self.stats.atomic_loss)?;
        st.serialize_field("steps", &self.stats.steps)?;
        st.serialize_field("n_max", &self.final_state.space().n_max())?;
        let amps: std::collections::BTreeMap<_, _> = state_json(&self.final_state).into_iter().collect();
        st.serialize_field("final_state", &amps)?;
        st.end()
    }
}

/// Start state of the transfer protocol, `|11⟩ ⊗ |0⟩`.
pub fn transfer_initial_state(space: StateSpace) -> StateVector {
    basis_state(space, Level::One, Level::One, 0).expect("vacuum is always in range")
}
