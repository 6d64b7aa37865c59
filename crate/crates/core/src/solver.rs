//! Minimization of the ε-regularized energy
//!
//! ```text
//! J_ε(u) = ∫ ½|∇u|² − G_ε(u)      (+ ∫ arctan((u − ū)²) when penalized)
//! ```
//!
//! on a masked grid, ε-continuation producing approximating sequences, and
//! the arctan-penalized variant whose Euler-Lagrange equation carries the
//! bounded forcing `f = 2(u − ū)/(1 + (u − ū)⁴)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::{atan, sqrt};

use crate::math::pow;

use crate::error::{Error, Result};
use crate::grid::{DiscGrid, NodeKind, ScalarField};
use crate::linalg::Stencil;
use crate::nonlinearity::ProblemParams;

/// Upper bound of `|2t/(1 + t⁴)|` over the real line, attained at `t = 3^{-1/4}`.
pub fn forcing_bound() -> f64 {
    let t = pow(3.0, -0.25);
    2.0 * t / (1.0 + t * t * t * t)
}

/// `2d/(1 + d⁴)`, the derivative of `arctan(d²)`.
pub fn forcing(d: f64) -> f64 {
    let d2 = d * d;
    2.0 * d / (1.0 + d2 * d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Laplacian-preconditioned gradient descent with Barzilai-Borwein steps.
    Descent,
    /// Damped Newton with a convexified Hessian, solved by CG.
    Newton,
    /// Descent until the residual is moderate, then Newton.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm target for `-Δ_h u - g_ε(u) + f` on interior nodes.
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 50_000, method: Method::Hybrid }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimized {
    pub field: ScalarField,
    pub energy: f64,
    pub residual_inf: f64,
    pub iterations: usize,
}

/// A failed minimization together with its last iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveFailure {
    pub error: Error,
    pub last: Option<Minimized>,
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl From<Error> for SolveFailure {
    fn from(error: Error) -> Self {
        SolveFailure { error, last: None }
    }
}

impl From<SolveFailure> for Error {
    fn from(f: SolveFailure) -> Self {
        f.error
    }
}

/// Discrete energy: edge differences for the Dirichlet part and a nodal
/// sum of `G_ε` over interior and boundary-band nodes.
pub fn energy(u: &ScalarField, p: &ProblemParams) -> f64 {
    let grid = u.grid();
    let n = grid.n();
    let v = u.values();
    let mut dirichlet = 0.0;
    for j in 0..n {
        for i in 0..n {
            let a = j * n + i;
            if i + 1 < n {
                let d = v[a + 1] - v[a];
                dirichlet += d * d;
            }
            if j + 1 < n {
                let d = v[a + n] - v[a];
                dirichlet += d * d;
            }
        }
    }
    let h2 = grid.h() * grid.h();
    let mut pot = 0.0;
    for (idx, k) in grid.kinds().iter().enumerate() {
        if *k != NodeKind::Exterior {
            pot += p.primitive(v[idx]);
        }
    }
    0.5 * dirichlet - h2 * pot
}

/// `∫ arctan((u − ū)²)` by the nodal rule.
pub fn penalty(u: &ScalarField, u_bar: &ScalarField) -> f64 {
    let h2 = u.grid().h() * u.grid().h();
    u.values().iter().zip(u_bar.values()).map(|(a, b)| atan((a - b) * (a - b))).sum::<f64>() * h2
}

/// Nodal field `-Δ_h u - g_ε(u) + f` (zero off the interior).
pub fn residual(u: &ScalarField, p: &ProblemParams, f: Option<&ScalarField>) -> Result<ScalarField> {
    if let Some(f) = f {
        if !u.same_grid(f) {
            return Err(Error::GridMismatch);
        }
    }
    let lap = u.laplacian();
    let grid = u.grid().clone();
    let mut out = vec![0.0; grid.len()];
    for &idx in grid.interior() {
        let fv = f.map_or(0.0, |f| f.values()[idx]);
        out[idx] = -lap.values()[idx] - p.source(u.values()[idx]) + fv;
    }
    ScalarField::from_values(grid, out)
}

pub fn residual_inf(u: &ScalarField, p: &ProblemParams, f: Option<&ScalarField>) -> Result<f64> {
    Ok(residual(u, p, f)?.sup_norm())
}

/// The seed `0.1 (1 − ρ²)` used for one-signed problems.
pub fn one_phase_seed(grid: Arc<DiscGrid>) -> ScalarField {
    ScalarField::from_fn(grid, |p| 0.1 * (1.0 - p.x * p.x - p.y * p.y))
}

/// Geometric schedule `eps0 · 2^{-i}`, `i = 0..=halvings`.
pub fn schedule(eps0: f64, halvings: usize) -> Vec<f64> {
    (0..=halvings).map(|i| eps0 * pow(2.0, -(i as f64))).collect()
}

pub fn default_schedule() -> Vec<f64> {
    schedule(0.1, 14)
}

struct Work {
    st: Stencil,
    p: ProblemParams,
    target: Option<Vec<f64>>,
    band_g0: f64,
    h2: f64,
}

impl Work {
    fn new(grid: &DiscGrid, p: ProblemParams, target: Option<&ScalarField>) -> Self {
        let st = Stencil::new(grid);
        let band = grid.kinds().iter().filter(|k| **k == NodeKind::Boundary).count();
        let h2 = grid.h() * grid.h();
        let target = target.map(|t| st.gather(t.values()));
        Work { band_g0: h2 * band as f64 * p.primitive(0.0), st, p, target, h2 }
    }

    fn diff(&self, x: &[f64], k: usize) -> f64 {
        self.target.as_ref().map_or(0.0, |t| x[k] - t[k])
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; x.len()];
        self.st.apply(x, &mut r);
        for k in 0..x.len() {
            r[k] -= self.p.source(x[k]);
            if self.target.is_some() {
                r[k] += forcing(self.diff(x, k));
            }
        }
        r
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let mut lx = vec![0.0; x.len()];
        self.st.apply_scaled(x, &mut lx);
        let mut e = 0.5 * Stencil::dot(x, &lx);
        let mut pot = 0.0;
        for k in 0..x.len() {
            pot += self.p.primitive(x[k]);
            if self.target.is_some() {
                let d = self.diff(x, k);
                pot -= atan(d * d);
            }
        }
        e -= self.h2 * pot;
        e - self.band_g0
    }

    /// Diagonal of the Hessian beyond `-Δ_h`, clipped at zero so the
    /// linearized operator stays an M-matrix.
    fn shift(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let mut s = (-self.p.source_derivative(x[k])).max(0.0);
                if self.target.is_some() {
                    let d = self.diff(x, k);
                    let d4 = d * d * d * d;
                    s += ((2.0 - 6.0 * d4) / ((1.0 + d4) * (1.0 + d4))).max(0.0);
                }
                if s.is_finite() {
                    s
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual level below which the hybrid method hands over to Newton.
const HYBRID_SWITCH: f64 = 1e-2;
const HYBRID_DESCENT_BUDGET: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;

fn run(work: &Work, grid: &Arc<DiscGrid>, x0: Vec<f64>, opts: &SolverOptions) -> core::result::Result<Minimized, SolveFailure> {
    let mut x = x0;
    let mut r = work.residual(&x);
    let mut rinf = sup(&r);
    let mut e = work.energy(&x);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iter = 0;
    let pack = |x: &[f64], e: f64, rinf: f64, iter: usize| Minimized {
        field: ScalarField::from_values(grid.clone(), work.st.scatter(x, grid.len())).expect("finite iterate"),
        energy: e,
        residual_inf: rinf,
        iterations: iter,
    };
    while rinf > opts.tol {
        if iter >= opts.max_iter || !rinf.is_finite() {
            return Err(SolveFailure {
                error: Error::NonConvergence { iterations: iter, residual: rinf },
                last: Some(pack(&x, e, rinf, iter)),
            });
        }
        iter += 1;
        let newton = match opts.method {
            Method::Newton => true,
            Method::Descent => false,
            Method::Hybrid => rinf < HYBRID_SWITCH || iter > HYBRID_DESCENT_BUDGET,
        };
        let mut accepted = None;
        if newton {
            let shift = work.shift(&x);
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let (dir, _) = work.st.solve(&shift, &rhs, 1e-11, 4 * work.st.len().max(100));
            accepted = line_search(work, &x, e, &r, rinf, &dir, 1.0);
        }
        if accepted.is_none() {
            let zero = vec![0.0; x.len()];
            let (pg, _) = work.st.solve(&zero, &r, 1e-10, 4 * work.st.len().max(100));
            let mut alpha = 1.0;
            if let Some((xp, rp)) = &prev {
                let s: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = r.iter().zip(rp).map(|(a, b)| a - b).collect();
                let mut ls = vec![0.0; s.len()];
                work.st.apply(&s, &mut ls);
                let sy = Stencil::dot(&s, &y);
                if sy > 0.0 {
                    alpha = (Stencil::dot(&s, &ls) / sy).clamp(1e-3, 1e3);
                }
            }
            let dir: Vec<f64> = pg.iter().map(|v| -v).collect();
            accepted = line_search(work, &x, e, &r, rinf, &dir, alpha);
        }
        match accepted {
            Some((xn, en, rn, rninf)) => {
                prev = Some((core::mem::replace(&mut x, xn), core::mem::replace(&mut r, rn)));
                e = en;
                rinf = rninf;
            }
            None => {
                return Err(SolveFailure {
                    error: Error::NonConvergence { iterations: iter, residual: rinf },
                    last: Some(pack(&x, e, rinf, iter)),
                });
            }
        }
    }
    Ok(pack(&x, e, rinf, iter))
}

type Step = (Vec<f64>, f64, Vec<f64>, f64);

/// Backtracking on the energy. A step is also accepted when the energy change
/// is at rounding level and the residual drops, which is the regime of the
/// last digits.
fn line_search(work: &Work, x: &[f64], e: f64, r: &[f64], rinf: f64, dir: &[f64], alpha0: f64) -> Option<Step> {
    let slope = work.h2 * Stencil::dot(r, dir);
    if !(slope < 0.0) {
        return None;
    }
    let scale = e.abs().max(work.h2);
    let mut alpha = alpha0;
    for _ in 0..MAX_HALVINGS {
        let xt: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
        let et = work.energy(&xt);
        if et.is_finite() {
            let armijo = et <= e + ARMIJO * alpha * slope;
            let flat = (et - e).abs() <= 1e-13 * scale;
            if armijo || flat {
                let rt = work.residual(&xt);
                let rtinf = sup(&rt);
                if armijo || rtinf < rinf {
                    return Some((xt, et, rt, rtinf));
                }
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Minimizes `J_ε` at the params' ε, starting from `u0`.
pub fn minimize_fixed_eps(u0: &ScalarField, p: &ProblemParams, opts: &SolverOptions) -> core::result::Result<Minimized, SolveFailure> {
    if p.epsilon() <= 0.0 && !p.is_harmonic() {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "fixed-ε minimization needs ε > 0".into() }.into());
    }
    let work = Work::new(u0.grid(), *p, None);
    let x0 = work.st.gather(u0.values());
    run(&work, u0.grid(), x0, opts)
}

/// Minimizes `J_ε + ∫ arctan((u − ū)²)`.
pub fn minimize_penalized(
    u0: &ScalarField,
    u_bar: &ScalarField,
    p: &ProblemParams,
    opts: &SolverOptions,
) -> core::result::Result<Minimized, SolveFailure> {
    if !u0.same_grid(u_bar) {
        return Err(Error::GridMismatch.into());
    }
    if p.epsilon() <= 0.0 && !p.is_harmonic() {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "fixed-ε minimization needs ε > 0".into() }.into());
    }
    let work = Work::new(u0.grid(), *p, Some(u_bar));
    let x0 = work.st.gather(u0.values());
    run(&work, u0.grid(), x0, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub epsilon: f64,
    pub u: ScalarField,
    pub f: ScalarField,
    /// `J_ε(u)`, without the penalty term.
    pub energy: f64,
    pub residual_inf: f64,
    pub iterations: usize,
    /// `‖u_n − u_{n−1}‖_∞`, absent for the first entry.
    pub sup_increment: Option<f64>,
    /// `‖u_n − u_{n−1}‖_{H¹(K)}` with `K` the ball of radius [`COMPACT_RADIUS`].
    pub h1_increment: Option<f64>,
    /// `∫ arctan((u − ū)²)` for penalized sequences.
    pub penalty: Option<f64>,
}

/// Radius of the interior compact set used for H¹ increments.
pub const COMPACT_RADIUS: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationSequence {
    pub params: ProblemParams,
    pub entries: Vec<Entry>,
    /// Set when the schedule was cut short.
    pub failure: Option<Error>,
}

impl ApproximationSequence {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> Option<&Entry> {
        self.entries.last()
    }

    pub fn h1_increments(&self) -> Vec<f64> {
        self.entries.iter().filter_map(|e| e.h1_increment).collect()
    }

    /// Ratios of successive H¹ increments.
    pub fn increment_ratios(&self) -> Vec<f64> {
        let inc = self.h1_increments();
        inc.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect()
    }

    /// Geometric mean of the increment ratios over the last `tail` ratios.
    pub fn tail_ratio(&self, tail: usize) -> Option<f64> {
        let inc = self.h1_increments();
        if inc.len() < 2 || tail == 0 {
            return None;
        }
        let tail = tail.min(inc.len() - 1);
        let last = inc[inc.len() - 1];
        let first = inc[inc.len() - 1 - tail];
        if first <= 0.0 {
            return Some(0.0);
        }
        Some(pow(last / first, 1.0 / tail as f64))
    }

    pub fn max_forcing(&self) -> f64 {
        self.entries.iter().map(|e| e.f.sup_norm()).fold(0.0, f64::max)
    }
}

/// Discrete `H¹(K ∩ Ω)` distance with `K = B_radius(0)`.
pub fn h1_distance(a: &ScalarField, b: &ScalarField, radius: f64) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid();
    let n = grid.n();
    let h2 = grid.h() * grid.h();
    let inside = |idx: usize| grid.point(idx).norm() <= radius;
    let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let idx = j * n + i;
            if !inside(idx) {
                continue;
            }
            acc += h2 * d[idx] * d[idx];
            if i + 1 < n && inside(idx + 1) {
                acc += (d[idx + 1] - d[idx]) * (d[idx + 1] - d[idx]);
            }
            if j + 1 < n && inside(idx + n) {
                acc += (d[idx + n] - d[idx]) * (d[idx + n] - d[idx]);
            }
        }
    }
    Ok(sqrt(acc))
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter { name: "schedule", reason: "empty".into() });
    }
    if schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidParameter { name: "schedule", reason: "entries must be positive".into() });
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter { name: "schedule", reason: "must be strictly decreasing".into() });
    }
    Ok(())
}

fn push_entry(seq: &mut ApproximationSequence, eps: f64, m: Minimized, f: ScalarField, penalty: Option<f64>) -> Result<()> {
    let (sup_inc, h1_inc) = match seq.entries.last() {
        Some(prev) => {
            let d = m.field.values().iter().zip(prev.u.values()).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
            (Some(d), Some(h1_distance(&m.field, &prev.u, COMPACT_RADIUS)?))
        }
        None => (None, None),
    };
    let p = seq.params.with_epsilon(eps)?;
    seq.entries.push(Entry {
        epsilon: eps,
        energy: energy(&m.field, &p),
        u: m.field,
        f,
        residual_inf: m.residual_inf,
        iterations: m.iterations,
        sup_increment: sup_inc,
        h1_increment: h1_inc,
        penalty,
    });
    Ok(())
}

/// ε-continuation with `f_n ≡ 0`, each entry warm-started from the previous one.
pub fn continuation(p: &ProblemParams, schedule: &[f64], u0: &ScalarField, opts: &SolverOptions) -> Result<ApproximationSequence> {
    check_schedule(schedule)?;
    let mut seq = ApproximationSequence { params: *p, entries: Vec::new(), failure: None };
    let mut current = u0.clone();
    for &eps in schedule {
        let pe = p.with_epsilon(eps)?;
        match minimize_fixed_eps(&current, &pe, opts) {
            Ok(m) => {
                current = m.field.clone();
                let zero = ScalarField::zeros(current.grid().clone());
                push_entry(&mut seq, eps, m, zero, None)?;
            }
            Err(fail) => {
                seq.failure = Some(fail.error);
                break;
            }
        }
    }
    Ok(seq)
}

/// Penalized continuation around the reference field `u_bar`; each entry stores
/// `f_n = 2(u_n − ū)/(1 + (u_n − ū)⁴)`.
pub fn penalized_minimize(
    u_bar: &ScalarField,
    p: &ProblemParams,
    schedule: &[f64],
    opts: &SolverOptions,
) -> Result<ApproximationSequence> {
    check_schedule(schedule)?;
    let mut seq = ApproximationSequence { params: *p, entries: Vec::new(), failure: None };
    let mut current = u_bar.clone();
    for &eps in schedule {
        let pe = p.with_epsilon(eps)?;
        match minimize_penalized(&current, u_bar, &pe, opts) {
            Ok(m) => {
                current = m.field.clone();
                let f: Vec<f64> = current.values().iter().zip(u_bar.values()).map(|(a, b)| forcing(a - b)).collect();
                let f = ScalarField::from_values(current.grid().clone(), f)?;
                let pen = penalty(&current, u_bar);
                push_entry(&mut seq, eps, m, f, Some(pen))?;
            }
            Err(fail) => {
                seq.failure = Some(fail.error);
                break;
            }
        }
    }
    Ok(seq)
}
