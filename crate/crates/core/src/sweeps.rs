//! Grids of transfer runs over detuning and peak drive amplitude.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::EvolveOptions;
use crate::error::{Error, Result};
use crate::gates::run_transfer;
use crate::model::{validity_check, SystemParams, DEFAULT_VALIDITY_THRESHOLD};
use crate::pulses::{PulseSchedule, RampLayout, RampShape};

pub const FULL_MODE_DURATION: f64 = 5e4;
pub const FAST_MODE_DURATION: f64 = 5e3;

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub deltas: Vec<f64>,
    pub omega_maxes: Vec<f64>,
    /// Rates and truncation; `delta` is overwritten per cell.
    pub params: SystemParams,
    pub duration: f64,
    pub layout: RampLayout,
    pub ramp: RampShape,
    /// `Ω̄_max = omegabar_ratio · Ω_max`.
    pub omegabar_ratio: f64,
    pub dt: f64,
}

impl SweepGrid {
    pub fn new(deltas: Vec<f64>, omega_maxes: Vec<f64>, params: SystemParams, duration: f64) -> Self {
        Self {
            deltas,
            omega_maxes,
            params,
            duration,
            layout: RampLayout::default(),
            ramp: RampShape::Linear,
            omegabar_ratio: FRAC_1_SQRT_2,
            dt: crate::dynamics::DEFAULT_DT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("delta", &self.deltas), ("omega_max", &self.omega_maxes)] {
            if axis.is_empty() {
                return Err(Error::Config(format!("sweep axis {name} is empty")));
            }
            if axis.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("sweep axis {name} has non-finite values")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("sweep axis {name} must be strictly increasing")));
            }
        }
        if !(self.omegabar_ratio >= 0.0 && self.omegabar_ratio.is_finite()) {
            return Err(Error::Config(format!("omegabar ratio must be non-negative (got {})", self.omegabar_ratio)));
        }
        self.layout.validate()?;
        self.params.validate()
    }

    pub fn len(&self) -> usize {
        self.deltas.len() * self.omega_maxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(Δ, Ω_max)` of cell `index` in row-major order (Δ outer).
    pub fn coordinates(&self, index: usize) -> (f64, f64) {
        let n = self.omega_maxes.len();
        (self.deltas[index / n], self.omega_maxes[index % n])
    }

    pub fn schedule(&self, omega_max: f64) -> Result<PulseSchedule> {
        PulseSchedule::stirap(omega_max, self.omegabar_ratio * omega_max, self.duration, self.layout, self.ramp)
    }

    pub fn cell_params(&self, delta: f64) -> SystemParams {
        SystemParams { delta, ..self.params }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellValues {
    pub fidelity: f64,
    pub p0: f64,
    pub peak_alpha_pop: f64,
    /// Larger of the two validity ratios.
    pub r_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub delta: f64,
    pub omega_max: f64,
    pub outcome: std::result::Result<CellValues, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub cells: Vec<SweepCell>,
}

fn run_cell(grid: &SweepGrid, index: usize) -> SweepCell {
    let (delta, omega_max) = grid.coordinates(index);
    let outcome = (|| {
        let params = grid.cell_params(delta);
        let schedule = grid.schedule(omega_max)?;
        let r = run_transfer(&params, &schedule, &EvolveOptions::endpoints(grid.dt))?;
        let v = validity_check(&params, &schedule, DEFAULT_VALIDITY_THRESHOLD);
        Ok::<_, Error>(CellValues {
            fidelity: r.fidelity,
            p0: r.p0,
            peak_alpha_pop: r.stats.peak_alpha_pop,
            r_ratio: v.ratio_g2_over_kappa.max(v.ratio_kappa),
        })
    })()
    .map_err(|e| e.to_string());
    SweepCell { delta, omega_max, outcome }
}

/// One transfer per cell on a pool of `workers` threads. Cells are placed by
/// index, so the result does not depend on the worker count.
pub fn run_sweep(grid: &SweepGrid, workers: usize) -> Result<SweepResult> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let cells = pool.install(|| (0..grid.len()).into_par_iter().map(|i| run_cell(grid, i)).collect());
    Ok(SweepResult { grid: grid.clone(), cells })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Fidelity,
    SuccessProbability,
    /// `w · F + (1 − w) · P0`.
    Weighted { fidelity_weight: f64 },
}

impl Objective {
    fn score(&self, v: &CellValues) -> f64 {
        match self {
            Objective::Fidelity => v.fidelity,
            Objective::SuccessProbability => v.p0,
            Objective::Weighted { fidelity_weight: w } => w * v.fidelity + (1.0 - w) * v.p0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub index: usize,
    pub delta: f64,
    pub omega_max: f64,
    pub fidelity: f64,
    pub p0: f64,
    pub score: f64,
}

/// Best successful cell. Ties go to the smaller Δ, then the smaller Ω_max.
pub fn find_optimum(result: &SweepResult, objective: Objective) -> Result<CellReport> {
    let mut best: Option<CellReport> = None;
    // Row-major order is Δ ascending, then Ω ascending; a strict comparison
    // keeps the first of equal scores.
    for (index, cell) in result.cells.iter().enumerate() {
        let Ok(v) = &cell.outcome else { continue };
        let score = objective.score(v);
        if best.is_none_or(|b| score > b.score) {
            best = Some(CellReport {
                index,
                delta: cell.delta,
                omega_max: cell.omega_max,
                fidelity: v.fidelity,
                p0: v.p0,
                score,
            });
        }
    }
    best.ok_or(Error::EmptySweep)
}

pub const SWEEP_COLUMNS: [&str; 7] = ["delta", "omega_max", "fidelity", "p0", "peak_alpha_pop", "r_ratio", "status"];

/// One row per cell in row-major order. Failed cells leave the numeric
/// columns empty and carry the reason in `status`.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for cell in &result.cells {
        let line = match &cell.outcome {
            Ok(v) => format!(
                "{},{},{},{},{},{},ok",
                cell.delta, cell.omega_max, v.fidelity, v.p0, v.peak_alpha_pop, v.r_ratio
            ),
            Err(reason) => format!(
                "{},{},,,,,failed: {}",
                cell.delta,
                cell.omega_max,
                reason.replace([',', '\n', '\r'], ";")
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(delta: f64, omega_max: f64, fidelity: f64, p0: f64) -> SweepCell {
        SweepCell {
            delta,
            omega_max,
            outcome: Ok(CellValues {
                fidelity,
                p0,
                peak_alpha_pop: 0.0,
                r_ratio: 0.0,
            }),
        }
    }

    fn result(cells: Vec<SweepCell>) -> SweepResult {
        let mut deltas: Vec<f64> = cells.iter().map(|c| c.delta).collect();
        deltas.dedup();
        let mut omegas: Vec<f64> = cells.iter().map(|c| c.omega_max).collect();
        omegas.sort_by(f64::total_cmp);
        omegas.dedup();
        SweepResult {
            grid: SweepGrid::new(deltas, omegas, SystemParams::default(), 10.0),
            cells,
        }
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.005, 0.03, 16);
        assert_eq!(v.len(), 16);
        assert_eq!(v[0], 0.005);
        assert!((v[15] - 0.03).abs() < 1e-17);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn ties_prefer_smaller_delta_then_omega() {
        let r = result(vec![cell(0.0, 0.01, 0.9, 0.5), cell(0.0, 0.02, 0.95, 0.5), cell(0.1, 0.01, 0.95, 0.6), cell(0.1, 0.02, 0.95, 0.6)]);
        let best = find_optimum(&r, Objective::Fidelity).unwrap();
        assert_eq!((best.delta, best.omega_max), (0.0, 0.02));
        let best = find_optimum(&r, Objective::SuccessProbability).unwrap();
        assert_eq!((best.delta, best.omega_max), (0.1, 0.01));
        let best = find_optimum(&r, Objective::Weighted { fidelity_weight: 0.5 }).unwrap();
        assert_eq!(best.index, 2);
    }

    #[test]
    fn single_cell_and_failures() {
        let r = result(vec![cell(0.02, 0.01, 0.5, 0.5)]);
        assert_eq!(find_optimum(&r, Objective::Fidelity).unwrap().index, 0);
        let failed = result(vec![SweepCell {
            delta: 0.0,
            omega_max: 0.01,
            outcome: Err("diverged, badly".into()),
        }]);
        assert!(matches!(find_optimum(&failed, Objective::Fidelity), Err(Error::EmptySweep)));
        let csv = sweep_csv(&failed);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,0.01,,,,,failed: diverged; badly");
    }

    #[test]
    fn grid_validation() {
        let p = SystemParams::default();
        assert!(SweepGrid::new(vec![], vec![0.01], p, 10.0).validate().is_err());
        assert!(SweepGrid::new(vec![0.1, 0.0], vec![0.01], p, 10.0).validate().is_err());
        assert!(SweepGrid::new(vec![0.0], vec![0.01, 0.01], p, 10.0).validate().is_err());
        assert!(SweepGrid::new(vec![0.0], vec![0.01], p, 10.0).validate().is_ok());
        let g = SweepGrid::new(vec![0.0, 0.1], vec![0.01, 0.02, 0.03], p, 10.0);
        assert_eq!(g.coordinates(4), (0.1, 0.02));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = SystemParams { n_max: 1, ..SystemParams::default() };
        let g = SweepGrid::new(vec![0.0, 0.05], vec![0.05, 0.1, 0.2], p, 300.0);
        let one = run_sweep(&g, 1).unwrap();
        let three = run_sweep(&g, 3).unwrap();
        assert_eq!(sweep_csv(&one), sweep_csv(&three));
        assert_eq!(one.cells.len(), 6);
        // A cell that violates the step guard is recorded, not fatal.
        let mut bad = g.clone();
        bad.dt = 0.2;
        let r = run_sweep(&bad, 2).unwrap();
        assert!(r.cells.iter().all(|c| c.outcome.is_err()));
    }
}
