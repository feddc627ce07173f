//! Time-step and grid refinement studies.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_with, step_rk4, Formulation, InitialData, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{Field, VectorField};
use crate::fixtures::{exp_cosine_pair, ExpCosine};
use crate::grid::GridSpec;

/// A smooth, non-band-limited default initial velocity.
pub fn default_exp_cosine(dim: usize) -> Vec<ExpCosine> {
    (0..dim)
        .map(|i| ExpCosine {
            amplitude: 0.2 + 0.05 * i as f64,
            beta: 1.0,
            wavenumbers: (0..dim).map(|a| 1 + ((a + i) % 2) as i64).collect(),
            phases: (0..dim).map(|a| 0.4 * (a as f64 + 1.0) - 0.7 * i as f64).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Base grid; the formulation-gap study doubles `points` per level.
    pub grid: GridSpec,
    pub t_end: f64,
    /// Base step; halved per level.
    pub dt: f64,
    /// Number of refinements.
    pub levels: usize,
    /// Exp-cosine components of the initial velocity.
    pub initial: Vec<ExpCosine>,
    /// Wall-clock budget; exceeding it is flagged in the report.
    pub budget_seconds: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(2, 32, 2.0 * PI).expect("valid default grid"),
            t_end: 0.1,
            dt: 0.025,
            levels: 2,
            initial: default_exp_cosine(2),
            budget_seconds: 600.0,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.levels == 0 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.budget_seconds > 0.0) {
            return Err(Error::Config("dt, t_end and budget_seconds must be positive".into()));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return Err(Error::Config(format!("t_end = {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// RK4 on `y' = -y` over `[0, 1]` against `e^{-1}`.
    Ode,
    /// Velocity form, fixed grid: `‖u_{dt} - u_{dt/2}‖ / ‖u‖`.
    VelocityDt,
    /// Momentum vs velocity form at `N 2^k`, `dt / 2^k`.
    FormulationGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: Study,
    pub level: usize,
    pub points: usize,
    pub dt: f64,
    pub error: f64,
    /// `log_2(previous error / error)`.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub rows: Vec<StudyRow>,
    pub wall_time_s: f64,
    pub budget_exceeded: bool,
}

impl ConvergenceReport {
    pub const CSV_HEADER: &'static str = "study,level,points,dt,error,order";

    pub fn csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let study = serde_json::to_value(r.study).expect("unit enum");
            out.push_str(&format!(
                "{},{},{},{:.17e},{:.17e},{}\n",
                study.as_str().unwrap_or_default(),
                r.level,
                r.points,
                r.dt,
                r.error,
                r.order.map(|o| format!("{o:.6}")).unwrap_or_default()
            ));
        }
        out
    }

    pub fn orders(&self, study: Study) -> Vec<f64> {
        self.rows.iter().filter(|r| r.study == study).filter_map(|r| r.order).collect()
    }

    pub fn errors(&self, study: Study) -> Vec<f64> {
        self.rows.iter().filter(|r| r.study == study).map(|r| r.error).collect()
    }
}

fn with_orders(study: Study, raw: Vec<(usize, f64, f64)>) -> Vec<StudyRow> {
    let mut rows: Vec<StudyRow> = Vec::with_capacity(raw.len());
    for (level, (points, dt, error)) in raw.into_iter().enumerate() {
        let order = rows.last().map(|p| (p.error / error).log2());
        rows.push(StudyRow { study, level, points, dt, error, order });
    }
    rows
}

/// RK4 on `y' = -y`, `y(0) = 1`, up to `t = 1` with `dt = dt0 / 2^k`.
pub fn ode_study(dt0: f64, levels: usize) -> Result<Vec<StudyRow>> {
    let mut raw = Vec::new();
    for k in 0..=levels {
        let steps = (1.0 / dt0).round() as usize * (1 << k);
        let dt = 1.0 / steps as f64;
        let mut y = 1.0f64;
        for i in 0..steps {
            y = step_rk4(&y, i as f64 * dt, dt, |y| Ok(-y))?;
        }
        raw.push((0, dt, (y - (-1.0f64).exp()).abs()));
    }
    Ok(with_orders(Study::Ode, raw))
}

fn relative_gap(a: &VectorField, b: &VectorField) -> Result<f64> {
    Ok(a.minus(b)?.l2_norm_spectral() / b.l2_norm_spectral())
}

fn final_velocity(initial: InitialData, config: &SolverConfig) -> Result<VectorField> {
    let mut last = None;
    integrate_with(initial, config, |_, u| {
        last = Some(u.clone());
        Ok(())
    })?;
    Ok(last.expect("one sample"))
}

/// Relative L² distance at `t_end` between the velocity form started from
/// sampled `u_0` and the momentum form started from sampled `(1-Δ)u_0`.
pub fn formulation_gap(grid: &GridSpec, initial: &[ExpCosine], t_end: f64, dt: f64) -> Result<f64> {
    let (u0, m0) = exp_cosine_pair(grid, initial)?;
    let velocity = final_velocity(InitialData::Velocity(u0), &SolverConfig::fixed(dt, t_end))?;
    let momentum = final_velocity(
        InitialData::Momentum(m0),
        &SolverConfig::fixed(dt, t_end).with_formulation(Formulation::Momentum),
    )?;
    relative_gap(&momentum, &velocity)
}

/// Velocity-form self-convergence in `dt` on a fixed grid.
pub fn velocity_dt_study(
    grid: &GridSpec,
    initial: &[ExpCosine],
    t_end: f64,
    dt0: f64,
    levels: usize,
) -> Result<Vec<StudyRow>> {
    let (u0, _) = exp_cosine_pair(grid, initial)?;
    let mut finals = Vec::with_capacity(levels + 2);
    for k in 0..=levels + 1 {
        let dt = dt0 / (1u64 << k) as f64;
        finals.push((dt, final_velocity(InitialData::Velocity(u0.clone()), &SolverConfig::fixed(dt, t_end))?));
    }
    let mut raw = Vec::new();
    for w in finals.windows(2) {
        raw.push((grid.points, w[0].0, relative_gap(&w[0].1, &w[1].1)?));
    }
    Ok(with_orders(Study::VelocityDt, raw))
}

pub fn formulation_gap_study(config: &ConvergenceConfig) -> Result<Vec<StudyRow>> {
    let mut raw = Vec::new();
    for k in 0..=config.levels {
        let grid = GridSpec { points: config.grid.points << k, ..config.grid };
        let dt = config.dt / (1u64 << k) as f64;
        raw.push((grid.points, dt, formulation_gap(&grid, &config.initial, config.t_end, dt)?));
    }
    Ok(with_orders(Study::FormulationGap, raw))
}

/// Runs all three studies.
pub fn run_convergence(config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let started = Instant::now();
    let mut rows = ode_study(0.1, config.levels)?;
    rows.extend(velocity_dt_study(&config.grid, &config.initial, config.t_end, config.dt, config.levels)?);
    rows.extend(formulation_gap_study(config)?);
    let wall_time_s = started.elapsed().as_secs_f64();
    Ok(ConvergenceReport {
        config: config.clone(),
        rows,
        wall_time_s,
        budget_exceeded: wall_time_s > config.budget_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_is_fourth_order() {
        let rows = ode_study(0.1, 3).unwrap();
        for r in rows.iter().skip(1) {
            assert!((r.order.unwrap() - 4.0).abs() < 0.1, "{r:?}");
        }
    }

    #[test]
    fn config_checks() {
        assert!(ConvergenceConfig::default().validate().is_ok());
        let bad = ConvergenceConfig { dt: 0.03, ..Default::default() };
        assert!(bad.validate().is_err());
        let back: ConvergenceConfig =
            serde_json::from_str(&serde_json::to_string(&ConvergenceConfig::default()).unwrap()).unwrap();
        assert_eq!(back, ConvergenceConfig::default());
    }
}
