//! Right-hand sides of the Euler–Poincaré system in momentum and velocity
//! form, built on the nonlocal operators `Q` and `R`, with RK4 stepping.
//!
//! Conventions: `G[i][j] = ∂_j u_i` is the Jacobian and `H = (1-Δ)^{-1}`.
//!
//! * momentum form, `m = (1-Δ)u`:
//!   `m_t = -(u·∇m + (∇u)^T m + (div u) m)` with `((∇u)^T m)_i = Σ_j ∂_i u_j m_j`
//! * velocity form: `u_t = -u·∇u + Q(u,u) + R(u,u)` where
//!   `Q(u,v) = -H div(G_u G_v + G_u G_v^T - G_u^T G_v - (div u) G_v + ½ I (G_u:G_v))`,
//!   `(div M)_i = Σ_j ∂_j M_ij`, and
//!   `R(u,v) = -H((div u) v + Σ_k u_k ∇v_k)`.
//!
//! With a dealias fraction of at most 2/3 both forms produce the same
//! discrete dynamics up to round-off: every term is quadratic and computed
//! without aliasing, so the product-rule identities relating them hold
//! exactly on the retained modes. Larger fractions alias and the forms drift
//! apart slightly.

use std::cell::RefCell;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    dealias_table, derivative_table, helmholtz_inverse_table, helmholtz_table, Field, ScalarField, VectorField,
};
use crate::grid::GridSpec;
use crate::transform;

/// Initial-data tail fraction above which `integrate` refuses to start.
pub const INITIAL_TAIL_THRESHOLD: f64 = 1e-6;
/// Per-step truncated-update threshold, see [`TrajectoryMeta::max_truncation`].
pub const STEP_TRUNCATION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    #[default]
    Velocity,
    Momentum,
}

fn default_cfl() -> f64 {
    0.3
}

fn default_true() -> bool {
    true
}

/// Time-stepping parameters. With `dt` unset the step is adaptive,
/// `dt = cfl·h / max(1, ‖u‖_∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    /// Output times; empty means `[t_end]`.
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::Velocity,
            dt: None,
            cfl: default_cfl(),
            t_end: 0.1,
            sample_times: Vec::new(),
            dealias: true,
        }
    }
}

impl SolverConfig {
    pub fn adaptive(t_end: f64) -> Self {
        Self { t_end, ..Self::default() }
    }

    pub fn fixed(dt: f64, t_end: f64) -> Self {
        Self { dt: Some(dt), t_end, ..Self::default() }
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn with_samples(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.cfl.is_finite() && self.cfl > 0.0) {
            return Err(Error::InvalidArgument(format!("cfl must be positive, got {}", self.cfl)));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.sample_times {
            if !(t >= 0.0 && t <= self.t_end) {
                return Err(Error::InvalidArgument(format!("sample time {t} outside [0, {}]", self.t_end)));
            }
            if t <= prev {
                return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
            }
            prev = t;
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<f64> {
        if self.sample_times.is_empty() {
            vec![self.t_end]
        } else {
            self.sample_times.clone()
        }
    }
}

/// `G[i][j] = ∂_j u_i`.
pub fn gradient_tensor(u: &VectorField) -> Vec<Vec<ScalarField>> {
    let d = u.grid().dim;
    u.components().iter().map(|c| (0..d).map(|j| c.partial_derivative(j).expect("axis < dim")).collect()).collect()
}

fn divergence_of_jacobian(g: &[Vec<ScalarField>]) -> Vec<f64> {
    let n = g[0][0].values().len();
    let mut div = vec![0.0; n];
    for (i, row) in g.iter().enumerate() {
        for (a, b) in div.iter_mut().zip(row[i].values()) {
            *a += b;
        }
    }
    div
}

fn field_from(grid: GridSpec, values: Vec<f64>) -> ScalarField {
    ScalarField::from_values(grid, values).expect("products of finite fields are finite")
}

/// `Q(u, v)`; products are dealiased with the grid's cutoff.
pub fn q_bilinear(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    u.grid().ensure_same(v.grid())?;
    let grid = *u.grid();
    let d = grid.dim;
    let gu = gradient_tensor(u);
    let gv = gradient_tensor(v);
    let gu_v: Vec<Vec<&[f64]>> = gu.iter().map(|r| r.iter().map(|c| c.values()).collect()).collect();
    let gv_v: Vec<Vec<&[f64]>> = gv.iter().map(|r| r.iter().map(|c| c.values()).collect()).collect();
    let div_u = divergence_of_jacobian(&gu);
    let len = grid.len();
    let mut contraction = vec![0.0; len];
    for a in 0..d {
        for b in 0..d {
            for x in 0..len {
                contraction[x] += gu_v[a][b][x] * gv_v[a][b][x];
            }
        }
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut acc = ScalarField::zeros(grid);
        for j in 0..d {
            let mut m = vec![0.0; len];
            for x in 0..len {
                let mut s = -div_u[x] * gv_v[i][j][x];
                for k in 0..d {
                    s += gu_v[i][k][x] * gv_v[k][j][x] + gu_v[i][k][x] * gv_v[j][k][x] - gu_v[k][i][x] * gv_v[k][j][x];
                }
                if i == j {
                    s += 0.5 * contraction[x];
                }
                m[x] = s;
            }
            let m = field_from(grid, m).dealias();
            acc = acc.add(&m.partial_derivative(j)?)?;
        }
        out.push(acc.helmholtz_inverse().scaled(-1.0));
    }
    VectorField::new(out)
}

/// `R(u, v)`; products are dealiased with the grid's cutoff.
pub fn r_bilinear(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    u.grid().ensure_same(v.grid())?;
    let grid = *u.grid();
    let d = grid.dim;
    let gu = gradient_tensor(u);
    let gv = gradient_tensor(v);
    let div_u = divergence_of_jacobian(&gu);
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let vi = v.component(i).values();
        let mut r: Vec<f64> = div_u.iter().zip(vi).map(|(a, b)| a * b).collect();
        for k in 0..d {
            let uk = u.component(k).values();
            let dvk = gv[k][i].values();
            for x in 0..r.len() {
                r[x] += uk[x] * dvk[x];
            }
        }
        out.push(field_from(grid, r).dealias().helmholtz_inverse().scaled(-1.0));
    }
    VectorField::new(out)
}

/// `(u·∇)v` with `((u·∇)v)_i = Σ_k u_k ∂_k v_i`, dealiased.
pub fn advection(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    u.grid().ensure_same(v.grid())?;
    let grid = *u.grid();
    let gv = gradient_tensor(v);
    let out = (0..grid.dim)
        .map(|i| {
            let mut a = vec![0.0; grid.len()];
            for (k, uk) in u.components().iter().enumerate() {
                for ((a, x), y) in a.iter_mut().zip(uk.values()).zip(gv[i][k].values()) {
                    *a += x * y;
                }
            }
            field_from(grid, a).dealias()
        })
        .collect();
    VectorField::new(out)
}

/// Velocity-form right-hand side `-u·∇u + Q(u,u) + R(u,u)`, dealiased.
pub fn rhs_velocity(u: &VectorField) -> Result<VectorField> {
    let engine = RhsEngine::new(u.grid(), true);
    let (out, _) = engine.velocity(&u.spectra());
    VectorField::from_spectral(*u.grid(), out)
}

/// Momentum-form right-hand side `-(u·∇m + (∇u)^T m + (div u) m)`,
/// `u = (1-Δ)^{-1} m`, dealiased.
pub fn rhs_momentum(m: &VectorField) -> Result<VectorField> {
    let engine = RhsEngine::new(m.grid(), true);
    let (out, _) = engine.momentum(&m.spectra());
    VectorField::from_spectral(*m.grid(), out)
}

/// `∫ (|u|^2 + |∇u|^2) dx`, evaluated by Parseval.
pub fn h1_energy(u: &VectorField) -> f64 {
    let table = helmholtz_table(u.grid());
    spectra_h1(u.grid(), u.components().iter().map(|c| c.spectral()), &table)
}

fn spectra_h1<'a>(grid: &GridSpec, spectra: impl Iterator<Item = &'a [Complex64]>, table: &[f64]) -> f64 {
    let h = grid.half_points();
    let mut sum = 0.0;
    for s in spectra {
        for (i, (c, w)) in s.iter().zip(table).enumerate() {
            sum += grid.pair_weight(i % h) * w * c.norm_sqr();
        }
    }
    sum * grid.parseval_factor()
}

/// Diagnostics from one right-hand-side evaluation.
#[derive(Debug, Clone, Copy, Default)]
struct EvalInfo {
    max_speed: f64,
    truncated_energy: f64,
}

/// Physical-space buffers reused across evaluations.
struct Workspace {
    /// Velocity components.
    u: Vec<Vec<f64>>,
    /// `G[i][j]` at index `i·d + j`; the momentum form also keeps `m` here.
    g: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    div: Vec<f64>,
    /// Velocity form: `M_ij` at `i·d + j`, then `r_i` and `(u·∇u)_i` at
    /// `d² + i` and `d² + d + i`.
    products: Vec<Vec<f64>>,
    buf: Vec<f64>,
    spec: Vec<Complex64>,
}

impl Workspace {
    fn new(grid: &GridSpec, momentum: bool) -> Self {
        let d = grid.dim;
        let len = grid.len();
        let field = || vec![0.0; len];
        Self {
            u: (0..d).map(|_| field()).collect(),
            g: (0..d * d).map(|_| field()).collect(),
            m: if momentum { (0..d).map(|_| field()).collect() } else { Vec::new() },
            div: field(),
            products: (0..if momentum { 1 } else { d * d + 2 * d }).map(|_| field()).collect(),
            buf: field(),
            spec: vec![Complex64::default(); grid.spectral_len()],
        }
    }
}

/// Spectral right-hand-side evaluator with precomputed multiplier tables.
struct RhsEngine {
    grid: GridSpec,
    xi: Vec<Vec<f64>>,
    helmholtz_inv: Vec<f64>,
    mask: Option<Vec<f64>>,
    work: RefCell<Option<(Formulation, Workspace)>>,
}

fn times_i_xi_into(s: &[Complex64], xi: &[f64], out: &mut [Complex64]) {
    for ((o, c), k) in out.iter_mut().zip(s).zip(xi) {
        *o = Complex64::new(-c.im * k, c.re * k);
    }
}

/// Fills the velocity-form products in one pass over the grid, reading the
/// Jacobian once per point.
fn velocity_products<const D: usize>(u: &[Vec<f64>], g: &[Vec<f64>], products: &mut [Vec<f64>]) {
    let len = u[0].len();
    let u: [&[f64]; D] = std::array::from_fn(|i| &u[i][..len]);
    let g: [[&[f64]; D]; D] = std::array::from_fn(|i| std::array::from_fn(|j| &g[i * D + j][..len]));
    let (m, rest) = products.split_at_mut(D * D);
    let (r, adv) = rest.split_at_mut(D);
    for x in 0..len {
        let gx: [[f64; D]; D] = std::array::from_fn(|i| std::array::from_fn(|j| g[i][j][x]));
        let ux: [f64; D] = std::array::from_fn(|i| u[i][x]);
        let mut div = 0.0;
        let mut contraction = 0.0;
        for i in 0..D {
            div += gx[i][i];
            for j in 0..D {
                contraction += gx[i][j] * gx[i][j];
            }
        }
        for i in 0..D {
            for j in 0..D {
                let mut s = -div * gx[i][j];
                for k in 0..D {
                    s += gx[i][k] * (gx[k][j] + gx[j][k]) - gx[k][i] * gx[k][j];
                }
                if i == j {
                    s += 0.5 * contraction;
                }
                m[i * D + j][x] = s;
            }
            let mut ri = div * ux[i];
            let mut ai = 0.0;
            for k in 0..D {
                ri += ux[k] * gx[k][i];
                ai += ux[k] * gx[i][k];
            }
            r[i][x] = ri;
            adv[i][x] = ai;
        }
    }
}

impl RhsEngine {
    fn new(grid: &GridSpec, dealias: bool) -> Self {
        Self {
            grid: *grid,
            xi: (0..grid.dim).map(|a| derivative_table(grid, a)).collect(),
            helmholtz_inv: helmholtz_inverse_table(grid),
            mask: dealias.then(|| dealias_table(grid)),
            work: RefCell::new(None),
        }
    }

    /// `out ← physical(s)`, using `spec` as transform workspace.
    fn physical_into(&self, s: &[Complex64], spec: &mut [Complex64], out: &mut [f64]) {
        spec.copy_from_slice(s);
        transform::inverse_into(&self.grid, spec, out);
    }

    /// `out ← physical(∂_axis s)`.
    fn derivative_into(&self, s: &[Complex64], axis: usize, spec: &mut [Complex64], out: &mut [f64]) {
        times_i_xi_into(s, &self.xi[axis], spec);
        transform::inverse_into(&self.grid, spec, out);
    }

    /// Per-mode factor taking a `formulation` state to velocity, if any.
    fn to_velocity(&self, formulation: Formulation) -> Option<&[f64]> {
        (formulation == Formulation::Momentum).then_some(&self.helmholtz_inv[..])
    }

    /// Velocity-variable energy of `state`.
    fn energy(&self, state: &[Vec<Complex64>], weight: Option<&[f64]>) -> f64 {
        self.weighted_energy(state, weight, |_| true)
    }

    fn weighted_energy(&self, state: &[Vec<Complex64>], weight: Option<&[f64]>, keep: impl Fn(usize) -> bool) -> f64 {
        let h = self.grid.half_points();
        let mut sum = 0.0;
        for s in state {
            for (i, c) in s.iter().enumerate().filter(|(i, _)| keep(*i)) {
                let w = weight.map_or(1.0, |w| w[i] * w[i]);
                sum += self.grid.pair_weight(i % h) * c.norm_sqr() * w;
            }
        }
        sum * self.grid.parseval_factor()
    }

    /// Velocity-variable energy of `state` outside the mask.
    fn tail_energy(&self, state: &[Vec<Complex64>], weight: Option<&[f64]>) -> f64 {
        match &self.mask {
            Some(mask) => self.weighted_energy(state, weight, |i| mask[i] == 0.0),
            None => 0.0,
        }
    }

    /// Applies the mask to `out`.
    fn project(&self, out: &mut [Vec<Complex64>]) {
        let Some(mask) = &self.mask else {
            return;
        };
        for s in out.iter_mut() {
            for (c, m) in s.iter_mut().zip(mask) {
                if *m == 0.0 {
                    *c = Complex64::default();
                }
            }
        }
    }

    /// Projects a right-hand side, returning the velocity-variable energy
    /// it removed.
    fn project_rhs(&self, out: &mut [Vec<Complex64>], formulation: Formulation) -> f64 {
        let removed = self.tail_energy(out, self.to_velocity(formulation));
        self.project(out);
        removed
    }

    fn max_speed(u: &[Vec<f64>]) -> f64 {
        (0..u[0].len()).map(|x| u.iter().map(|c| c[x] * c[x]).sum::<f64>()).fold(0.0, f64::max).sqrt()
    }

    fn with_work<T>(&self, formulation: Formulation, f: impl FnOnce(&mut Workspace) -> T) -> T {
        let mut slot = self.work.borrow_mut();
        if !matches!(&*slot, Some((form, _)) if *form == formulation) {
            *slot = None;
            *slot = Some((formulation, Workspace::new(&self.grid, formulation == Formulation::Momentum)));
        }
        f(&mut slot.as_mut().expect("workspace was just created").1)
    }

    fn velocity(&self, u_hat: &[Vec<Complex64>]) -> (Vec<Vec<Complex64>>, EvalInfo) {
        self.eval(Formulation::Velocity, u_hat)
    }

    fn momentum(&self, m_hat: &[Vec<Complex64>]) -> (Vec<Vec<Complex64>>, EvalInfo) {
        self.eval(Formulation::Momentum, m_hat)
    }

    fn velocity_with(&self, u_hat: &[Vec<Complex64>], w: &mut Workspace, out: &mut [Vec<Complex64>]) -> EvalInfo {
        let grid = &self.grid;
        let d = grid.dim;
        for i in 0..d {
            self.physical_into(&u_hat[i], &mut w.spec, &mut w.u[i]);
            for j in 0..d {
                self.derivative_into(&u_hat[i], j, &mut w.spec, &mut w.g[i * d + j]);
            }
        }
        match d {
            1 => velocity_products::<1>(&w.u, &w.g, &mut w.products),
            2 => velocity_products::<2>(&w.u, &w.g, &mut w.products),
            3 => velocity_products::<3>(&w.u, &w.g, &mut w.products),
            _ => unreachable!("grids have 1 to 3 dimensions"),
        }
        for (i, acc) in out.iter_mut().enumerate() {
            // -H(Σ_j iξ_j F(M_ij) + F(r_i)) - F((u·∇u)_i)
            acc.fill(Complex64::default());
            for j in 0..d {
                transform::forward_into(grid, &w.products[i * d + j], &mut w.spec);
                for ((a, c), k) in acc.iter_mut().zip(&w.spec).zip(&self.xi[j]) {
                    *a += Complex64::new(-c.im * k, c.re * k);
                }
            }
            transform::forward_into(grid, &w.products[d * d + i], &mut w.spec);
            for ((a, c), h) in acc.iter_mut().zip(&w.spec).zip(&self.helmholtz_inv) {
                *a = -(*a + c) * h;
            }
            transform::forward_into(grid, &w.products[d * d + d + i], &mut w.spec);
            for (a, c) in acc.iter_mut().zip(&w.spec) {
                *a -= c;
            }
        }
        let truncated_energy = self.project_rhs(out, Formulation::Velocity);
        EvalInfo { max_speed: Self::max_speed(&w.u), truncated_energy }
    }

    fn momentum_with(&self, m_hat: &[Vec<Complex64>], w: &mut Workspace, out: &mut [Vec<Complex64>]) -> EvalInfo {
        let grid = &self.grid;
        let d = grid.dim;
        // `out[i]` holds û_i until the products are formed.
        for i in 0..d {
            for ((o, c), h) in out[i].iter_mut().zip(&m_hat[i]).zip(&self.helmholtz_inv) {
                *o = c * h;
            }
            self.physical_into(&out[i], &mut w.spec, &mut w.u[i]);
            for j in 0..d {
                self.derivative_into(&out[i], j, &mut w.spec, &mut w.g[i * d + j]);
            }
            self.physical_into(&m_hat[i], &mut w.spec, &mut w.m[i]);
        }
        w.div.fill(0.0);
        for i in 0..d {
            for (a, b) in w.div.iter_mut().zip(&w.g[i * d + i]) {
                *a += b;
            }
        }
        let total = &mut w.products[0];
        for i in 0..d {
            for (x, t) in total.iter_mut().enumerate() {
                let mut s = w.div[x] * w.m[i][x];
                for j in 0..d {
                    s += w.g[j * d + i][x] * w.m[j][x];
                }
                *t = -s;
            }
            for j in 0..d {
                self.derivative_into(&m_hat[i], j, &mut w.spec, &mut w.buf);
                for ((t, b), uj) in total.iter_mut().zip(&w.buf).zip(&w.u[j]) {
                    *t -= uj * b;
                }
            }
            transform::forward_into(grid, total, &mut out[i]);
        }
        let truncated_energy = self.project_rhs(out, Formulation::Momentum);
        EvalInfo { max_speed: Self::max_speed(&w.u), truncated_energy }
    }

    /// Writes the right-hand side of `state` into `out`.
    fn eval_into(&self, formulation: Formulation, state: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) -> EvalInfo {
        self.with_work(formulation, |w| match formulation {
            Formulation::Velocity => self.velocity_with(state, w, out),
            Formulation::Momentum => self.momentum_with(state, w, out),
        })
    }

    fn eval(&self, formulation: Formulation, state: &[Vec<Complex64>]) -> (Vec<Vec<Complex64>>, EvalInfo) {
        let mut out = vec![vec![Complex64::default(); self.grid.spectral_len()]; self.grid.dim];
        let info = self.eval_into(formulation, state, &mut out);
        (out, info)
    }
}

/// A state that RK4 can advance.
pub trait OdeState: Clone {
    /// `self += a·other`.
    fn add_scaled(&mut self, a: f64, other: &Self);
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl OdeState for Vec<f64> {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        for (x, y) in self.iter_mut().zip(other) {
            *x += a * y;
        }
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// Spectral coefficients of every component of a vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState(pub Vec<Vec<Complex64>>);

impl OdeState for SpectralState {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            for (p, q) in x.iter_mut().zip(y) {
                *p += q * a;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl OdeState for VectorField {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self = self.axpy(1.0, other, a).expect("states share a grid");
    }

    fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.spectral().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// One classical RK4 step of size `dt` from time `t`.
pub fn step_rk4<S: OdeState>(y: &S, t: f64, dt: f64, mut rhs: impl FnMut(&S) -> Result<S>) -> Result<S> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let k1 = rhs(y)?;
    rk4_from_k1(y, k1, t, dt, rhs)
}

fn rk4_from_k1<S: OdeState>(y: &S, k1: S, t: f64, dt: f64, mut rhs: impl FnMut(&S) -> Result<S>) -> Result<S> {
    let mut acc = y.clone();
    acc.add_scaled(dt / 6.0, &k1);
    let mut stage = y.clone();
    stage.add_scaled(dt / 2.0, &k1);
    drop(k1);
    let k2 = rhs(&stage)?;
    acc.add_scaled(dt / 3.0, &k2);
    stage = y.clone();
    stage.add_scaled(dt / 2.0, &k2);
    drop(k2);
    let k3 = rhs(&stage)?;
    acc.add_scaled(dt / 3.0, &k3);
    stage = y.clone();
    stage.add_scaled(dt, &k3);
    drop(k3);
    let k4 = rhs(&stage)?;
    acc.add_scaled(dt / 6.0, &k4);
    if !acc.is_finite() {
        return Err(Error::BlowUp { time: t + dt });
    }
    Ok(acc)
}

fn copy_state(dst: &mut SpectralState, src: &SpectralState) {
    for (d, s) in dst.0.iter_mut().zip(&src.0) {
        d.copy_from_slice(s);
    }
}

/// RK4 step of a velocity field; the result is dealiased.
pub fn step_velocity_rk4(u: &VectorField, t: f64, dt: f64, formulation: Formulation) -> Result<VectorField> {
    let grid = *u.grid();
    let engine = RhsEngine::new(&grid, true);
    let state = match formulation {
        Formulation::Velocity => SpectralState(u.spectra()),
        Formulation::Momentum => SpectralState(u.apply_helmholtz().spectra()),
    };
    let mut next = step_rk4(&state, t, dt, |s| Ok(SpectralState(engine.eval(formulation, &s.0).0)))?;
    engine.project(&mut next.0);
    let out = VectorField::from_spectral(grid, next.0)?;
    Ok(match formulation {
        Formulation::Velocity => out,
        Formulation::Momentum => out.helmholtz_inverse(),
    })
}

/// Initial data given in either variable.
#[derive(Debug, Clone)]
pub enum InitialData {
    Velocity(VectorField),
    Momentum(VectorField),
}

impl InitialData {
    pub fn grid(&self) -> &GridSpec {
        match self {
            InitialData::Velocity(u) | InitialData::Momentum(u) => u.grid(),
        }
    }

    fn state(&self, formulation: Formulation) -> Vec<Vec<Complex64>> {
        match (self, formulation) {
            (InitialData::Velocity(u), Formulation::Velocity) => u.spectra(),
            (InitialData::Velocity(u), Formulation::Momentum) => u.apply_helmholtz().spectra(),
            (InitialData::Momentum(m), Formulation::Velocity) => m.helmholtz_inverse().spectra(),
            (InitialData::Momentum(m), Formulation::Momentum) => m.spectra(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub time: f64,
    pub velocity: VectorField,
}

/// Run metadata; serialized next to trajectory snapshots.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta {
    pub config: SolverConfig,
    pub grid: GridSpec,
    pub steps: usize,
    /// `(t, h1_energy(u(t)))` at every sample time.
    pub energy: Vec<(f64, f64)>,
    /// Largest per-step ratio `dt^2·E_removed / E_state`, where `E_removed`
    /// is the energy of the stage-one update discarded by dealiasing.
    pub max_truncation: f64,
    pub wall_time_s: f64,
}

impl TrajectoryMeta {
    /// Relative H¹-energy change between the first and last samples.
    pub fn energy_drift(&self) -> f64 {
        match (self.energy.first(), self.energy.last()) {
            (Some(&(_, e0)), Some(&(_, e1))) if e0 != 0.0 => (e1 - e0).abs() / e0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl SolutionTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &VectorField {
        &self.samples.last().expect("trajectories have at least one sample").velocity
    }
}

/// Integrates from velocity data and keeps every sample.
pub fn integrate(u0: &VectorField, config: &SolverConfig) -> Result<SolutionTrajectory> {
    let mut samples = Vec::new();
    let meta = integrate_with(InitialData::Velocity(u0.clone()), config, |time, u| {
        samples.push(Sample { time, velocity: u.clone() });
        Ok(())
    })?;
    Ok(SolutionTrajectory { samples, meta })
}

/// Integrates and hands the velocity at each sample time to `observer`
/// instead of storing it.
pub fn integrate_with(
    initial: InitialData,
    config: &SolverConfig,
    mut observer: impl FnMut(f64, &VectorField) -> Result<()>,
) -> Result<TrajectoryMeta> {
    config.validate()?;
    let started = Instant::now();
    let grid = *initial.grid();
    let formulation = config.formulation;
    let engine = RhsEngine::new(&grid, config.dealias);
    let mut state = SpectralState(initial.state(formulation));
    drop(initial);
    if config.dealias {
        let weight = engine.to_velocity(formulation);
        let tail = engine.tail_energy(&state.0, weight) / engine.energy(&state.0, weight).max(f64::MIN_POSITIVE);
        if tail > INITIAL_TAIL_THRESHOLD {
            return Err(Error::Unresolved { tail, threshold: INITIAL_TAIL_THRESHOLD });
        }
        engine.project(&mut state.0);
    }
    if !state.is_finite() {
        return Err(Error::NonFinite);
    }
    let h1 = helmholtz_table(&grid);
    let velocity_of = |s: &SpectralState| -> Result<VectorField> {
        let spectra = match formulation {
            Formulation::Velocity => s.0.clone(),
            Formulation::Momentum => {
                s.0.iter().map(|c| c.iter().zip(&engine.helmholtz_inv).map(|(z, w)| z * w).collect()).collect()
            }
        };
        VectorField::from_spectral(grid, spectra)
    };

    let mut meta = TrajectoryMeta {
        config: config.clone(),
        grid,
        steps: 0,
        energy: Vec::new(),
        max_truncation: 0.0,
        wall_time_s: 0.0,
    };
    let mut k = state.clone();
    let mut acc = state.clone();
    let mut stage = state.clone();
    let mut t = 0.0;
    for target in config.samples() {
        while t < target {
            let info = engine.eval_into(formulation, &state.0, &mut k.0);
            let mut dt = config.dt.unwrap_or_else(|| config.cfl * grid.spacing() / info.max_speed.max(1.0));
            let remaining = target - t;
            if dt >= remaining * (1.0 - 1e-9) {
                dt = remaining;
            }
            let energy = engine.energy(&state.0, engine.to_velocity(formulation));
            if energy > 0.0 {
                let ratio = dt * dt * info.truncated_energy / energy;
                meta.max_truncation = meta.max_truncation.max(ratio);
                if ratio > STEP_TRUNCATION_THRESHOLD {
                    return Err(Error::UnderResolved { time: t, tail: ratio, threshold: STEP_TRUNCATION_THRESHOLD });
                }
            }
            // Same operation order as `rk4_from_k1`, without reallocating.
            copy_state(&mut acc, &state);
            acc.add_scaled(dt / 6.0, &k);
            for (weight, step) in [(dt / 3.0, dt / 2.0), (dt / 3.0, dt / 2.0), (dt / 6.0, dt)] {
                copy_state(&mut stage, &state);
                stage.add_scaled(step, &k);
                engine.eval_into(formulation, &stage.0, &mut k.0);
                acc.add_scaled(weight, &k);
            }
            if !acc.is_finite() {
                return Err(Error::BlowUp { time: t + dt });
            }
            engine.project(&mut acc.0);
            std::mem::swap(&mut state, &mut acc);
            t = if dt == remaining { target } else { t + dt };
            meta.steps += 1;
        }
        let u = velocity_of(&state).map_err(|_| Error::BlowUp { time: t })?;
        meta.energy.push((t, spectra_h1(&grid, u.components().iter().map(|c| c.spectral()), &h1)));
        observer(t, &u)?;
    }
    meta.wall_time_s = started.elapsed().as_secs_f64();
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_fixture(n: usize) -> VectorField {
        let g = GridSpec::new(2, n, 2.0 * PI).unwrap();
        VectorField::first_component(ScalarField::from_fn(g, |x| x[0].sin()).unwrap())
    }

    fn assert_close(f: &ScalarField, expect: impl Fn(&[f64]) -> f64, tol: f64) {
        let mut worst = 0.0f64;
        f.grid().visit_points(|i, x| worst = worst.max((f.values()[i] - expect(x)).abs()));
        assert!(worst < tol, "max deviation {worst}");
    }

    #[test]
    fn hand_fixtures() {
        let u = sine_fixture(16);
        let q = q_bilinear(&u, &u).unwrap();
        assert_close(q.component(0), |x| (2.0 * x[0]).sin() / 10.0, 1e-13);
        assert_close(q.component(1), |_| 0.0, 1e-13);
        let r = r_bilinear(&u, &u).unwrap();
        assert_close(r.component(0), |x| -(2.0 * x[0]).sin() / 5.0, 1e-13);
        let rhs = rhs_velocity(&u).unwrap();
        assert_close(rhs.component(0), |x| -0.6 * (2.0 * x[0]).sin(), 1e-13);
        assert_close(rhs.component(1), |_| 0.0, 1e-13);
        let m = u.apply_helmholtz();
        let rm = rhs_momentum(&m).unwrap();
        assert_close(rm.component(0), |x| -3.0 * (2.0 * x[0]).sin(), 1e-12);
    }

    #[test]
    fn gradient_of_sine() {
        let u = sine_fixture(16);
        let g = gradient_tensor(&u);
        assert_close(&g[0][0], |x| x[0].cos(), 1e-13);
        for (i, j) in [(0, 1), (1, 0), (1, 1)] {
            assert_close(&g[i][j], |_| 0.0, 1e-13);
        }
    }

    #[test]
    fn engine_matches_operator_sum() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let u = VectorField::new(vec![
            ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() + 0.3 * x[1].cos()).unwrap(),
            ScalarField::from_fn(g, |x| (2.0 * x[0] - x[1]).cos() * 0.7).unwrap(),
        ])
        .unwrap();
        let q = q_bilinear(&u, &u).unwrap();
        let r = r_bilinear(&u, &u).unwrap();
        let adv = advection(&u, &u).unwrap();
        let expect = q.plus(&r).unwrap().minus(&adv).unwrap();
        let got = rhs_velocity(&u).unwrap();
        let diff = got.minus(&expect).unwrap().l2_norm_spectral();
        assert!(diff < 1e-12 * expect.l2_norm_spectral(), "{diff}");
    }

    #[test]
    fn formulations_agree_on_retained_modes() {
        let g = GridSpec::new(3, 16, 2.0 * PI).unwrap();
        let comp = |a: f64, b: f64| {
            ScalarField::from_fn(g, move |x| (x[0] + a * x[1]).sin() * (b * x[2] - x[0]).cos() + a * x[2].sin())
                .unwrap()
        };
        let u = VectorField::new(vec![comp(1.0, 2.0), comp(-2.0, 1.0), comp(0.5, -1.0)]).unwrap().dealias();
        let lifted = rhs_momentum(&u.apply_helmholtz()).unwrap().helmholtz_inverse();
        let direct = rhs_velocity(&u).unwrap();
        let diff = lifted.minus(&direct).unwrap().l2_norm_spectral();
        assert!(diff < 1e-13 * direct.l2_norm_spectral(), "{diff}");
    }

    #[test]
    fn h1_of_sine() {
        let u = sine_fixture(16);
        let s = 2.0 * PI;
        assert!((h1_energy(&u) - s * s).abs() < 1e-12);
        assert!((h1_energy(&u.scaled(3.0)) - 9.0 * s * s).abs() < 1e-11);
    }

    #[test]
    fn rk4_scalar_decay() {
        let mut y = 1.0;
        let n = 64;
        let dt = 1.0 / n as f64;
        for k in 0..n {
            y = step_rk4(&y, k as f64 * dt, dt, |y| Ok(-y)).unwrap();
        }
        let err = (y - (-1.0f64).exp()).abs();
        assert!(err < 1e-9 && err > 0.0);
    }

    #[test]
    fn rk4_reports_blow_up_time() {
        let err = step_rk4(&1.0, 2.0, 0.5, |_| Ok(f64::INFINITY)).unwrap_err();
        assert!(matches!(err, Error::BlowUp { time } if time == 2.5));
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = GridSpec::new(2, 8, 2.0 * PI).unwrap();
        let cfg = SolverConfig::adaptive(0.2).with_samples(vec![0.0, 0.1, 0.2]);
        let traj = integrate(&VectorField::zeros(g), &cfg).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.1, 0.2]);
        for s in &traj.samples {
            assert_eq!(s.velocity.l2_norm_spectral(), 0.0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::fixed(-1.0, 1.0).validate().is_err());
        assert!(SolverConfig::adaptive(1.0).with_samples(vec![0.5, 0.2]).validate().is_err());
        assert!(SolverConfig::adaptive(1.0).with_samples(vec![1.5]).validate().is_err());
        let json = r#"{"t_end": 0.5, "formulation": "momentum"}"#;
        let cfg: SolverConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.formulation, Formulation::Momentum);
        assert_eq!(cfg.cfl, 0.3);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"t_end": 1, "cfll": 1}"#).is_err());
    }

    #[test]
    fn unresolved_initial_data_is_refused() {
        let g = GridSpec::new(1, 16, 2.0 * PI).unwrap();
        let u = VectorField::first_component(ScalarField::from_fn(g, |x| (7.0 * x[0]).sin()).unwrap());
        let err = integrate(&u, &SolverConfig::adaptive(0.1)).unwrap_err();
        assert!(matches!(err, Error::Unresolved { .. }));
    }
}
