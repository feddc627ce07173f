//! The non-uniform-dependence experiment: evolve the pairs `(u^n, v^n)`,
//! measure distances in `B^s_{p,r}` along the way and fit rates in `n` and `t`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_with, rhs_momentum, rhs_velocity, Formulation, InitialData, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{Field, VectorField};
use crate::grid::GridSpec;
use crate::littlewood_paley::{BesovParams, DyadicPartition};
use crate::sequences::{self, build_profile, BumpProfile, SequenceParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `ε_s = ½ min{s - 1 - d/p, s - 3/2, 1}`; requires `s > max{1 + d/p, 3/2}`.
pub fn eps_s(s: f64, p: f64, d: usize) -> Result<f64> {
    check_hypothesis(s, p, d)?;
    Ok(0.5 * (s - 1.0 - d as f64 / p).min(s - 1.5).min(1.0))
}

fn check_hypothesis(s: f64, p: f64, d: usize) -> Result<()> {
    let bound = (1.0 + d as f64 / p).max(1.5);
    if s > bound {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!(
            "the construction needs s > max(1 + d/p, 3/2) = {bound} (d = {d}, p = {p}), got s = {s}"
        )))
    }
}

fn default_dim() -> usize {
    2
}
fn default_s() -> f64 {
    3.0
}
fn default_two() -> f64 {
    2.0
}
fn default_n_list() -> Vec<u32> {
    vec![4, 5, 6]
}
fn default_side() -> f64 {
    16.0 * PI
}
fn default_points() -> usize {
    2048
}
fn default_dealias() -> f64 {
    crate::grid::DEFAULT_DEALIAS_FRACTION
}
fn default_overrides() -> BTreeMap<u32, f64> {
    BTreeMap::from([(6, 0.75)])
}
fn default_cfl() -> f64 {
    0.3
}
fn default_t0() -> f64 {
    0.25
}
fn default_window() -> [f64; 2] {
    [0.05, 0.25]
}
fn default_true() -> bool {
    true
}
fn default_workers() -> usize {
    1
}

/// Experiment parameters. Everything has a default; the defaults are the
/// two-dimensional run with `s = 3`, `p = r = 2`, `n ∈ {4, 5, 6}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_two", with = "crate::serde_ext::extended_f64")]
    pub p: f64,
    #[serde(default = "default_two", with = "crate::serde_ext::extended_f64")]
    pub r: f64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u32>,
    /// Bump support radius; `2^{-d}` when unset.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Bump plateau radius; `4^{-d}` when unset.
    #[serde(default)]
    pub plateau: Option<f64>,
    #[serde(default = "default_side")]
    pub side: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
    /// Per-`n` dealias fractions replacing `dealias_fraction`.
    #[serde(default = "default_overrides")]
    pub dealias_overrides: BTreeMap<u32, f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Fixed step; adaptive when unset.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Sample times; ten equal intervals of `[0, t0]` when unset.
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default = "default_window")]
    pub fit_window: [f64; 2],
    /// Compare both right-hand-side formulations on `v^n(t0)`.
    #[serde(default = "default_true")]
    pub cross_check: bool,
    /// Use `v_0^n = u_0^n` (drops `g_n`).
    #[serde(default)]
    pub identical_pair: bool,
    /// Fail when `|φ(S/2)|` exceeds this.
    #[serde(default)]
    pub box_tail_tolerance: Option<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    /// The one-dimensional smoke configuration used for regression tests.
    pub fn tiny_d1() -> Self {
        Self {
            dim: 1,
            s: 2.0,
            n_list: vec![3, 4],
            side: 6.0 * PI,
            points: 256,
            dealias_overrides: BTreeMap::new(),
            ..Self::default()
        }
    }

    pub fn besov(&self) -> BesovParams {
        BesovParams { s: self.s, p: self.p, r: self.r }
    }

    pub fn radii(&self) -> (f64, f64) {
        let (rho, plateau) = BumpProfile::default_radii(self.dim);
        (self.rho.unwrap_or(rho), self.plateau.unwrap_or(plateau))
    }

    pub fn samples(&self) -> Vec<f64> {
        self.sample_times.clone().unwrap_or_else(|| (0..=10).map(|k| k as f64 * self.t0 / 10.0).collect())
    }

    pub fn dealias_for(&self, n: u32) -> f64 {
        self.dealias_overrides.get(&n).copied().unwrap_or(self.dealias_fraction)
    }

    pub fn grid_for(&self, n: u32) -> Result<GridSpec> {
        GridSpec::with_dealias(self.dim, self.points, self.side, self.dealias_for(n))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            formulation: Formulation::Velocity,
            dt: self.dt,
            cfl: self.cfl,
            t_end: self.t0,
            sample_times: self.samples(),
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n_list.is_empty() {
            return cfg("n_list is empty".into());
        }
        if self.workers == 0 {
            return cfg("workers must be at least 1".into());
        }
        self.besov().validate()?;
        check_hypothesis(self.s, self.p, self.dim)?;
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return cfg(format!("t0 must be positive, got {}", self.t0));
        }
        let [lo, hi] = self.fit_window;
        if !(lo > 0.0 && lo < hi && hi <= self.t0) {
            return cfg(format!("fit window [{lo}, {hi}] must satisfy 0 < lo < hi <= t0 = {}", self.t0));
        }
        self.solver().validate()?;
        if self.samples().first() != Some(&0.0) {
            return cfg("sample times must start at 0".into());
        }
        let mut sorted = self.n_list.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n_list.len() {
            return cfg("n_list has duplicates".into());
        }
        let (rho, plateau) = self.radii();
        for &n in &self.n_list {
            let grid = self.grid_for(n)?;
            let profile = build_profile(rho, plateau, &grid, None)?;
            SequenceParams::new(n, self.s, grid, profile)?;
        }
        Ok(())
    }
}

/// Measurements at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSample {
    pub t: f64,
    /// `‖u^n(t) - u_0^n‖`
    pub residual32: f64,
    /// `‖v^n(t) - v_0^n + t v_0^n·∇v_0^n‖`
    pub residual33: f64,
    /// `‖u^n(t) - v^n(t)‖`
    pub separation: f64,
    pub energy_u: f64,
    pub energy_v: f64,
}

/// Per-run numerical diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDiagnostics {
    pub grid: GridSpec,
    pub steps_u: usize,
    pub steps_v: usize,
    pub energy_drift_u: f64,
    pub energy_drift_v: f64,
    pub max_truncation_u: f64,
    pub max_truncation_v: f64,
    /// Dealias cutoff minus the frequency reach of `f_n`.
    pub resolution_margin: f64,
    /// Whether twice the reach of `f_n` stays below the cutoff, so the
    /// first quadratic harmonic is kept rather than truncated.
    pub quadratic_harmonic_resolved: bool,
    /// `|φ(S/2)|`.
    pub box_tail: f64,
    /// Relative `L^2` gap between the velocity-form right-hand side at
    /// `v^n(t0)` and the momentum-form one lifted back to velocity.
    pub cross_check_gap: Option<f64>,
}

/// Everything measured for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub n: u32,
    /// `‖u_0^n - v_0^n‖`
    pub delta0: f64,
    /// `‖g_n ∂_1 f_n‖`
    pub gn_gradfn_norm: f64,
    /// `‖φ^2(x_1) cos(ω_n x_1)‖_{L^p}·‖φ‖_{L^p}^{2(d-1)}`
    pub gn_gradfn_anchor: f64,
    pub samples: Vec<PairSample>,
    pub diagnostics: RunDiagnostics,
}

/// `‖F_u(v) - (1-Δ)^{-1} F_m((1-Δ)v)‖ / ‖F_u(v)‖`.
fn formulation_gap_at(v: &VectorField) -> Result<f64> {
    let by_velocity = rhs_velocity(v)?;
    let by_momentum = rhs_momentum(&v.apply_helmholtz())?.helmholtz_inverse();
    Ok(by_momentum.minus(&by_velocity)?.l2_norm_spectral() / by_velocity.l2_norm_spectral().max(f64::MIN_POSITIVE))
}

/// Evolves `u^n` and `v^n` and measures all distances.
pub fn run_pair(n: u32, config: &ExperimentConfig) -> Result<PairRecord> {
    let grid = config.grid_for(n)?;
    let (rho, plateau) = config.radii();
    let profile = build_profile(rho, plateau, &grid, config.box_tail_tolerance)?;
    let params = SequenceParams::new(n, config.s, grid, profile)?;
    let besov = config.besov();
    let partition = DyadicPartition::new(&grid);
    let norm = |f: &VectorField| partition.besov_norm(f, &besov);

    let u0 = sequences::make_u0n(&params);
    let v0 = if config.identical_pair { u0.clone() } else { sequences::make_v0n(&params) };
    let delta0 = norm(&u0.minus(&v0)?)?;
    let transport = sequences::transport_term(&params)?;
    let gn_gradfn_norm = partition.besov_norm(&transport.g_grad_f, &besov)?;
    let transport =
        if config.identical_pair { VectorField::first_component(transport.f_grad_f) } else { transport.total };

    let solver = config.solver();
    let mut u_samples: Vec<(f64, VectorField, f64)> = Vec::new();
    let meta_u = integrate_with(InitialData::Velocity(u0.clone()), &solver, |t, u| {
        let residual = norm(&u.minus(&u0)?)?;
        u_samples.push((t, u.clone(), residual));
        Ok(())
    })?;
    drop(u0);

    let mut samples = Vec::with_capacity(u_samples.len());
    let mut v_final = None;
    let mut k = 0;
    let meta_v = integrate_with(InitialData::Velocity(v0.clone()), &solver, |t, v| {
        let (tu, u, residual32) = &u_samples[k];
        debug_assert_eq!(*tu, t);
        let linearized = v.minus(&v0)?.plus(&transport.scaled(t))?;
        samples.push(PairSample {
            t,
            residual32: *residual32,
            residual33: norm(&linearized)?,
            separation: norm(&u.minus(v)?)?,
            energy_u: meta_u.energy[k].1,
            energy_v: 0.0,
        });
        k += 1;
        if k == u_samples.len() {
            v_final = Some(v.clone());
        }
        Ok(())
    })?;
    drop(u_samples);
    for (s, &(_, e)) in samples.iter_mut().zip(&meta_v.energy) {
        s.energy_v = e;
    }

    let cross_check_gap = match (config.cross_check, v_final) {
        (true, Some(v)) => Some(formulation_gap_at(&v)?),
        _ => None,
    };

    let reach = params.annulus().1;
    Ok(PairRecord {
        n,
        delta0,
        gn_gradfn_norm,
        gn_gradfn_anchor: sequences::gn_gradfn_anchor(&params, config.p),
        samples,
        diagnostics: RunDiagnostics {
            grid,
            steps_u: meta_u.steps,
            steps_v: meta_v.steps,
            energy_drift_u: meta_u.energy_drift(),
            energy_drift_v: meta_v.energy_drift(),
            max_truncation_u: meta_u.max_truncation,
            max_truncation_v: meta_v.max_truncation,
            resolution_margin: grid.dealias_cutoff() - reach,
            quadratic_harmonic_resolved: 2.0 * reach <= grid.dealias_cutoff(),
            box_tail: profile.box_tail,
            cross_check_gap,
        },
    })
}

/// Least-squares line through `(x, log_2 y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log_2`.
    pub residual: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// Fits `log_2 value = slope·n + intercept`.
pub fn fit_decay_exponent(ns: &[f64], values: &[f64]) -> Result<DecayFit> {
    if ns.len() != values.len() {
        return Err(Error::Fit("abscissa and values differ in length".into()));
    }
    if values.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("values must be positive, got {v}")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    let (slope, intercept) = least_squares(ns, &logs);
    let sse: f64 = ns.iter().zip(&logs).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    Ok(DecayFit { slope, intercept, residual: (sse / ns.len() as f64).sqrt() })
}

/// Linear fit of the separation over the fit window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationFit {
    pub c_est: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `min separation(t)/t` over the window.
    pub min_ratio: f64,
    /// `(t, t·‖g_n ∂_1 f_n‖)` at each window time.
    pub anchor: Vec<(f64, f64)>,
}

fn window_points(samples: &[PairSample], window: [f64; 2]) -> impl Iterator<Item = &PairSample> {
    let tol = 1e-12 * window[1].abs().max(1.0);
    samples.iter().filter(move |s| s.t >= window[0] - tol && s.t <= window[1] + tol)
}

pub fn fit_separation(record: &PairRecord, window: [f64; 2]) -> Result<SeparationFit> {
    let pts: Vec<&PairSample> = window_points(&record.samples, window).collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!("fit window [{}, {}] holds {} samples", window[0], window[1], pts.len())));
    }
    let t: Vec<f64> = pts.iter().map(|s| s.t).collect();
    let y: Vec<f64> = pts.iter().map(|s| s.separation).collect();
    let (c_est, intercept) = least_squares(&t, &y);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = t.iter().zip(&y).map(|(a, b)| (b - c_est * a - intercept).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let min_ratio = t.iter().zip(&y).map(|(a, b)| b / a).fold(f64::INFINITY, f64::min);
    let anchor = t.iter().map(|&a| (a, a * record.gn_gradfn_norm)).collect();
    Ok(SeparationFit { c_est, intercept, r_squared, min_ratio, anchor })
}

/// `y ≈ a + b·t^γ` with `a ≥ 0`, best `γ` on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthFit {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub rms: f64,
}

pub fn fit_growth(t: &[f64], y: &[f64]) -> Result<GrowthFit> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(Error::Fit("growth fit needs at least 3 points".into()));
    }
    if t.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("growth fit needs positive times".into()));
    }
    let mut best: Option<GrowthFit> = None;
    for step in 0..=3750 {
        let gamma = 0.25 + step as f64 * 1e-3;
        let x: Vec<f64> = t.iter().map(|v| v.powf(gamma)).collect();
        let (mut b, mut a) = least_squares(&x, y);
        if a < 0.0 {
            a = 0.0;
            b = x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / x.iter().map(|p| p * p).sum::<f64>();
        }
        let sse: f64 = x.iter().zip(y).map(|(p, q)| (q - a - b * p).powi(2)).sum();
        let rms = (sse / t.len() as f64).sqrt();
        if best.is_none_or(|f| rms < f.rms) {
            best = Some(GrowthFit { gamma, a, b, rms });
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Fits for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerNFits {
    pub n: u32,
    pub separation: SeparationFit,
    pub residual33_growth: GrowthFit,
    pub sup_residual32: f64,
    /// `min separation/t` divided by its value at the smallest `n`.
    pub floor_ratio: f64,
}

/// Rates across `n`; a fit is absent when fewer than three `n` are usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFits {
    pub delta0: Option<DecayFit>,
    pub residual32_sup: Option<DecayFit>,
    pub residual33_intercept: Option<DecayFit>,
    pub per_n: Vec<PerNFits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub eps_s: f64,
    pub records: Vec<PairRecord>,
    pub fits: ReportFits,
}

impl ExperimentReport {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.records.is_empty() {
            return Err(Error::Format("report has no records".into()));
        }
        let ns: Vec<u32> = self.records.iter().map(|r| r.n).collect();
        if ns != self.config.n_list {
            return Err(Error::Format(format!("records cover n = {ns:?}, config lists {:?}", self.config.n_list)));
        }
        if self.fits.per_n.len() != self.records.len() {
            return Err(Error::Format("per-n fits do not match records".into()));
        }
        for r in &self.records {
            if r.samples.windows(2).any(|w| w[0].t >= w[1].t) {
                return Err(Error::Format(format!("sample times for n = {} are not increasing", r.n)));
            }
        }
        Ok(())
    }
}

/// Computes all fits from the per-`n` records.
pub fn assemble_report(config: &ExperimentConfig, records: Vec<PairRecord>) -> Result<ExperimentReport> {
    if records.is_empty() {
        return Err(Error::Config("no records to report".into()));
    }
    let window = config.fit_window;
    let mut per_n = Vec::with_capacity(records.len());
    for r in &records {
        let pts: Vec<&PairSample> = window_points(&r.samples, window).collect();
        let t: Vec<f64> = pts.iter().map(|s| s.t).collect();
        let y: Vec<f64> = pts.iter().map(|s| s.residual33).collect();
        per_n.push(PerNFits {
            n: r.n,
            separation: fit_separation(r, window)?,
            residual33_growth: fit_growth(&t, &y)?,
            sup_residual32: r.samples.iter().map(|s| s.residual32).fold(0.0, f64::max),
            floor_ratio: 0.0,
        });
    }
    let base = per_n[0].separation.min_ratio;
    for f in &mut per_n {
        f.floor_ratio = if base > 0.0 { f.separation.min_ratio / base } else { 0.0 };
    }
    let ns: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let delta0: Vec<f64> = records.iter().map(|r| r.delta0).collect();
    let sup32: Vec<f64> = per_n.iter().map(|f| f.sup_residual32).collect();
    let a33: Vec<f64> = per_n.iter().map(|f| f.residual33_growth.a).collect();
    Ok(ExperimentReport {
        version: VERSION.to_string(),
        config: config.clone(),
        eps_s: eps_s(config.s, config.p, config.dim)?,
        fits: ReportFits {
            delta0: fit_decay_exponent(&ns, &delta0).ok(),
            residual32_sup: fit_decay_exponent(&ns, &sup32).ok(),
            residual33_intercept: fit_decay_exponent(&ns, &a33).ok(),
            per_n,
        },
        records,
    })
}

/// Runs every `n` of the configuration on a pool of `config.workers`
/// threads and assembles the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<Result<PairRecord>> = pool.install(|| {
        use rayon::prelude::*;
        config.n_list.par_iter().map(|&n| run_pair(n, config)).collect()
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    assemble_report(config, records)
}

pub const CSV_HEADER: &str = "n,t,delta0,residual32,residual33,separation,gn_gradfn_norm,energy_u,energy_v";

/// The per-sample table.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        for s in &r.samples {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.n, s.t, r.delta0, s.residual32, s.residual33, s.separation, r.gn_gradfn_norm, s.energy_u, s.energy_v
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Whitespace-separated columns, one gnuplot data block per `n`.
pub fn report_gnuplot(report: &ExperimentReport) -> String {
    let mut out = String::from("# t residual32 residual33 separation separation_over_t anchor\n");
    for (i, r) in report.records.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        writeln!(out, "# n = {}", r.n).expect("writing to a String");
        for s in &r.samples {
            let ratio = if s.t > 0.0 { s.separation / s.t } else { 0.0 };
            writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                s.t,
                s.residual32,
                s.residual33,
                s.separation,
                ratio,
                s.t * r.gn_gradfn_norm
            )
            .expect("writing to a String");
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub gnuplot: PathBuf,
}

/// Writes `experiment.csv`, `summary.json` and `experiment.dat` into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<ReportPaths> {
    report.validate()?;
    fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        csv: dir.join("experiment.csv"),
        summary: dir.join("summary.json"),
        gnuplot: dir.join("experiment.dat"),
    };
    fs::write(&paths.csv, report_csv(report))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&paths.summary, json)?;
    fs::write(&paths.gnuplot, report_gnuplot(report))?;
    Ok(paths)
}

/// Reads a summary back and checks it.
pub fn read_summary(path: &Path) -> Result<ExperimentReport> {
    let report: ExperimentReport = serde_json::from_str(&fs::read_to_string(path)?)?;
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_values() {
        assert_eq!(eps_s(3.0, 2.0, 2).unwrap(), 0.5);
        assert_eq!(eps_s(2.0, 2.0, 1).unwrap(), 0.25);
        assert!(eps_s(2.0, 2.0, 2).is_err());
        assert!((eps_s(1.6, f64::INFINITY, 2).unwrap() - 0.05).abs() < 1e-15);
        assert!(matches!(eps_s(2.0, 1.0, 2), Err(Error::Hypothesis(_))));
        assert!(eps_s(1.5, f64::INFINITY, 3).is_err());
    }

    #[test]
    fn decay_fits() {
        let ns = [4.0, 5.0, 6.0];
        let f = fit_decay_exponent(&ns, &[2f64.powi(-4), 2f64.powi(-5), 2f64.powi(-6)]).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-14 && f.residual < 1e-14);
        let v: Vec<f64> = ns.iter().map(|n| 3.0 * 2f64.powf(-n / 2.0)).collect();
        assert!((fit_decay_exponent(&ns, &v).unwrap().slope + 0.5).abs() < 1e-14);
        assert!(fit_decay_exponent(&ns[..2], &v[..2]).is_err());
        assert!(fit_decay_exponent(&ns, &[1.0, 0.0, 1.0]).is_err());
    }

    fn record(sep: impl Fn(f64) -> f64) -> PairRecord {
        let samples = (0..=10)
            .map(|k| {
                let t = k as f64 * 0.025;
                PairSample { t, residual32: 0.0, residual33: t * t, separation: sep(t), energy_u: 0.0, energy_v: 0.0 }
            })
            .collect();
        PairRecord {
            n: 4,
            delta0: 0.0,
            gn_gradfn_norm: 1.0,
            gn_gradfn_anchor: 1.0,
            samples,
            diagnostics: RunDiagnostics {
                grid: GridSpec::new(1, 8, 1.0).unwrap(),
                steps_u: 0,
                steps_v: 0,
                energy_drift_u: 0.0,
                energy_drift_v: 0.0,
                max_truncation_u: 0.0,
                max_truncation_v: 0.0,
                resolution_margin: 0.0,
                quadratic_harmonic_resolved: true,
                box_tail: 0.0,
                cross_check_gap: None,
            },
        }
    }

    #[test]
    fn separation_fits() {
        let f = fit_separation(&record(|t| 0.7 * t), [0.05, 0.25]).unwrap();
        assert!((f.c_est - 0.7).abs() < 1e-13);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.min_ratio - 0.7).abs() < 1e-13);
        assert_eq!(f.anchor.len(), 9);
        let z = fit_separation(&record(|_| 0.0), [0.05, 0.25]).unwrap();
        assert_eq!(z.c_est, 0.0);
        assert!(fit_separation(&record(|t| t), [0.3, 0.4]).is_err());
    }

    #[test]
    fn growth_fit_recovers_exponent() {
        let t: Vec<f64> = (2..=10).map(|k| k as f64 * 0.025).collect();
        let y: Vec<f64> = t.iter().map(|t| 1e-3 + 2.0 * t * t).collect();
        let g = fit_growth(&t, &y).unwrap();
        assert!((g.gamma - 2.0).abs() < 2e-3, "{g:?}");
        assert!((g.a - 1e-3).abs() < 1e-5);
        let lin: Vec<f64> = t.iter().map(|t| 3.0 * t).collect();
        assert!((fit_growth(&t, &lin).unwrap().gamma - 1.0).abs() < 2e-3);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_list, vec![4, 5, 6]);
        assert_eq!(c.points, 2048);
        assert_eq!(c.dealias_for(6), 0.75);
        assert_eq!(c.dealias_for(5), 2.0 / 3.0);
        assert_eq!(c.radii(), (0.25, 0.0625));
        assert_eq!(c.samples().len(), 11);
        c.validate().unwrap();
        let bad = ExperimentConfig { s: 1.8, ..c.clone() };
        assert!(matches!(bad.validate(), Err(Error::Hypothesis(_))));
        let empty = ExperimentConfig { n_list: vec![], ..c.clone() };
        assert!(matches!(empty.validate(), Err(Error::Config(_))));
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"n_lst": [4]}"#).is_err());
    }

    #[test]
    fn empty_report_is_refused() {
        assert!(assemble_report(&ExperimentConfig::default(), vec![]).is_err());
    }
}
