//! One-dimensional and angular reductions: the Hamiltonian system obeyed by
//! one-dimensional profiles and the periodic angular equation of homogeneous
//! solutions `ρ^γ φ(θ)`.
//!
//! Both are instances of `w'' = −c w − a₊(w⁺)^{q−1} + a₋(w⁻)^{q−1}`, whose
//! force is unbounded at `w = 0`. Away from zero the flow is advanced by
//! classical RK4 in time. Inside a small window around each zero the
//! independent variable is switched to `σ` with `w = sign(σ)|σ|^{2/q}`, which
//! turns the force into a smooth function of `σ` on each side of zero.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{ceil, log, sqrt};

use crate::math::pow;

use crate::error::{Error, Result};
use crate::grid::{DiscGrid, ScalarField};
use crate::nonlinearity::{gamma_q, ProblemParams};

/// Window half-width around zero, relative to the smallest turning amplitude.
const WINDOW: f64 = 0.5;
/// RK4 steps in `σ` across a full window side.
const WINDOW_STEPS: usize = 256;
/// Step halvings allowed before a step is rejected.
const MAX_HALVINGS: u32 = 10;
/// Single-step Hamiltonian jump, relative to the initial value, beyond which
/// a step is rejected once halving is exhausted.
const JUMP_TOL: f64 = 1e-6;
/// Floor of the per-step accuracy budget `JUMP_TOL · h / t_end`.
const BUDGET_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Oscillator {
    c: f64,
    a_plus: f64,
    a_minus: f64,
    q: f64,
}

impl Oscillator {
    /// `m` in `w = sign(σ)|σ|^m`.
    fn m(&self) -> f64 {
        2.0 / self.q
    }

    fn accel(&self, w: f64) -> f64 {
        if w > 0.0 {
            -self.c * w - self.a_plus * pow(w, self.q - 1.0)
        } else if w < 0.0 {
            -self.c * w + self.a_minus * pow(-w, self.q - 1.0)
        } else {
            0.0
        }
    }

    fn potential(&self, w: f64) -> f64 {
        let quad = 0.5 * self.c * w * w;
        if w > 0.0 {
            quad + self.a_plus * pow(w, self.q) / self.q
        } else if w < 0.0 {
            quad + self.a_minus * pow(-w, self.q) / self.q
        } else {
            0.0
        }
    }

    /// `(accel(w), potential(w))` from a single power evaluation.
    fn forces(&self, w: f64) -> (f64, f64) {
        let (a, r) = if w > 0.0 {
            (self.a_plus, w)
        } else if w < 0.0 {
            (self.a_minus, -w)
        } else {
            return (0.0, 0.0);
        };
        let pq = pow(r, self.q);
        let sign = if w > 0.0 { 1.0 } else { -1.0 };
        (-self.c * w - sign * a * pq / r, 0.5 * self.c * w * w + a * pq / self.q)
    }

    fn energy(&self, w: f64, wp: f64) -> f64 {
        0.5 * wp * wp + self.potential(w)
    }

    /// RK4 step given the acceleration at the starting point.
    fn rk4_from(&self, w: f64, wp: f64, acc: f64, h: f64) -> (f64, f64) {
        let (k1w, k1v) = (wp, acc);
        let (k2w, k2v) = (wp + 0.5 * h * k1v, self.accel(w + 0.5 * h * k1w));
        let (k3w, k3v) = (wp + 0.5 * h * k2v, self.accel(w + 0.5 * h * k2w));
        let (k4w, k4v) = (wp + h * k3v, self.accel(w + h * k3w));
        (w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w), wp + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))
    }

    /// Turning amplitude on one side for energy `e`, or infinity if the
    /// potential on that side is flat.
    fn amplitude(&self, e: f64, side: f64) -> f64 {
        let a = if side > 0.0 { self.a_plus } else { self.a_minus };
        if a == 0.0 && self.c == 0.0 {
            return f64::INFINITY;
        }
        let v = |x: f64| self.potential(side * x);
        if !(e > 0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (1.0, 1.0);
        if v(1.0) >= e {
            while v(lo) >= e {
                lo *= 0.5;
            }
            hi = 2.0 * lo;
        } else {
            while v(hi) < e {
                hi *= 2.0;
            }
            lo = 0.5 * hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if v(mid) < e {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `d(t, w')/dσ` on one side of zero.
    fn sigma_rhs(&self, s: f64, wp: f64, side: f64) -> (f64, f64) {
        let m = self.m();
        let a = if side > 0.0 { self.a_plus } else { self.a_minus };
        let r = s.abs();
        let dt = m * pow(r, m - 1.0) / wp;
        let force = -m * side * (self.c * pow(r, 2.0 * m - 1.0) + a * pow(r, m * self.q - 1.0));
        (dt, force / wp)
    }
}

/// A node of the `σ`-integration, used for dense output.
#[derive(Debug, Clone, Copy)]
struct SigmaNode {
    s: f64,
    t: f64,
    wp: f64,
    dt: f64,
    dwp: f64,
}

struct Crossing {
    nodes: Vec<(f64, Vec<SigmaNode>)>,
    zero_time: f64,
    t: f64,
    w: f64,
    wp: f64,
}

impl Oscillator {
    /// Passes through zero from `(t, w, wp)` with `|w| < delta` moving toward
    /// zero (or sitting on it) to `|w| = delta` on the other side.
    fn cross(&self, t: f64, w: f64, wp: f64, delta: f64) -> Crossing {
        let m = self.m();
        let s_delta = pow(delta, 1.0 / m);
        let side_out = if wp > 0.0 { 1.0 } else { -1.0 };
        let mut nodes = Vec::new();
        let (mut t, mut wp) = (t, wp);
        let segment = |from: f64, to: f64, side: f64, t: &mut f64, wp: &mut f64| {
            let steps = (ceil(WINDOW_STEPS as f64 * (to - from).abs() / s_delta) as usize).max(2);
            let ds = (to - from) / steps as f64;
            let mut list = Vec::with_capacity(steps + 1);
            let mut s = from;
            let node = |s: f64, t: f64, wp: f64| {
                let (dt, dwp) = self.sigma_rhs(s, wp, side);
                SigmaNode { s, t, wp, dt, dwp }
            };
            list.push(node(s, *t, *wp));
            for i in 0..steps {
                let f = |s: f64, wp: f64| self.sigma_rhs(s, wp, side);
                let (a1, b1) = f(s, *wp);
                let (a2, b2) = f(s + 0.5 * ds, *wp + 0.5 * ds * b1);
                let (a3, b3) = f(s + 0.5 * ds, *wp + 0.5 * ds * b2);
                let (a4, b4) = f(s + ds, *wp + ds * b3);
                *t += ds / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
                *wp += ds / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
                s = if i + 1 == steps { to } else { from + (i + 1) as f64 * ds };
                list.push(node(s, *t, *wp));
            }
            list
        };
        if w != 0.0 {
            let side_in = if w > 0.0 { 1.0 } else { -1.0 };
            let s0 = side_in * pow(w.abs(), 1.0 / m);
            let list = segment(s0, 0.0, side_in, &mut t, &mut wp);
            nodes.push((side_in, list));
        }
        let zero_time = t;
        let list = segment(0.0, side_out * s_delta, side_out, &mut t, &mut wp);
        nodes.push((side_out, list));
        Crossing { nodes, zero_time, t, w: side_out * delta, wp }
    }

    /// State at time `t*` inside a crossing, by Hermite interpolation in `σ`.
    /// `cursor` remembers the last interval found, so increasing `t*`
    /// sweeps the nodes once.
    fn dense(&self, crossing: &Crossing, t_star: f64, cursor: &mut (usize, usize)) -> Option<(f64, f64)> {
        let m = self.m();
        while cursor.0 < crossing.nodes.len() {
            let (side, list) = (&crossing.nodes[cursor.0].0, &crossing.nodes[cursor.0].1);
            while cursor.1 + 1 < list.len() {
                let (a, b) = (list[cursor.1], list[cursor.1 + 1]);
                if t_star > b.t {
                    cursor.1 += 1;
                    continue;
                }
                if t_star < a.t {
                    return None;
                }
                let ds = b.s - a.s;
                let herm = |y0: f64, d0: f64, y1: f64, d1: f64, x: f64| {
                    let (x2, x3) = (x * x, x * x * x);
                    (2.0 * x3 - 3.0 * x2 + 1.0) * y0
                        + (x3 - 2.0 * x2 + x) * ds * d0
                        + (-2.0 * x3 + 3.0 * x2) * y1
                        + (x3 - x2) * ds * d1
                };
                let dherm = |y0: f64, d0: f64, y1: f64, d1: f64, x: f64| {
                    (6.0 * x * x - 6.0 * x) * y0
                        + (3.0 * x * x - 4.0 * x + 1.0) * ds * d0
                        + (-6.0 * x * x + 6.0 * x) * y1
                        + (3.0 * x * x - 2.0 * x) * ds * d1
                };
                let span = b.t - a.t;
                let mut x = if span > 0.0 { (t_star - a.t) / span } else { 0.0 };
                let mut converged = false;
                for _ in 0..8 {
                    let f = herm(a.t, a.dt, b.t, b.dt, x) - t_star;
                    let d = dherm(a.t, a.dt, b.t, b.dt, x);
                    if !(d > 0.0) {
                        break;
                    }
                    let next = (x - f / d).clamp(0.0, 1.0);
                    let step = (next - x).abs();
                    x = next;
                    if step <= 1e-15 {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    let (mut lo, mut hi) = (0.0, 1.0);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if herm(a.t, a.dt, b.t, b.dt, mid) < t_star {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    x = 0.5 * (lo + hi);
                }
                let s = a.s + x * ds;
                let wp = herm(a.wp, a.dwp, b.wp, b.dwp, x);
                let w = if s == 0.0 { 0.0 } else { side * pow(s.abs(), m) };
                return Some((w, wp));
            }
            cursor.0 += 1;
            cursor.1 = 0;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    Time,
    /// First zero reached after the start.
    FirstZero,
}

#[derive(Debug, Clone, Default)]
struct Run {
    t: Vec<f64>,
    w: Vec<f64>,
    wp: Vec<f64>,
    zeros: Vec<f64>,
    turning: Vec<f64>,
    halvings: u32,
    end: (f64, f64, f64),
}

/// Advances the oscillator from `(w0, wp0)` at `t = 0`; samples are taken
/// at multiples of `out_dt` (if finite) up to `t_end`.
fn flow(osc: &Oscillator, w0: f64, wp0: f64, t_end: f64, dt: f64, out_dt: f64, stop: Stop) -> Result<Run> {
    let e0 = osc.energy(w0, wp0);
    let amp = osc.amplitude(e0, 1.0).min(osc.amplitude(e0, -1.0));
    let flat = osc.a_plus == 0.0 && osc.a_minus == 0.0;
    let delta = if flat { 0.0 } else { WINDOW * amp };
    let mut run = Run::default();
    let (mut t, mut w, mut wp) = (0.0, w0, wp0);
    let sampling = out_dt.is_finite();
    let mut next_index: usize = 0;
    let sample_time = |i: usize| i as f64 * out_dt;
    let record = |run: &mut Run, t: f64, w: f64, wp: f64| {
        run.t.push(t);
        run.w.push(w);
        run.wp.push(wp);
    };
    if sampling {
        record(&mut run, 0.0, w, wp);
        next_index = 1;
    }
    let mut level: u32 = 0;
    let (mut acc, mut pot) = osc.forces(w);
    let done = |t: f64| t >= t_end * (1.0 - 1e-15);
    while !done(t) {
        let target = if sampling { sample_time(next_index).min(t_end) } else { t_end };
        let in_window = delta > 0.0 && w.abs() < delta && (w == 0.0 || w * wp < 0.0);
        if in_window {
            let cr = osc.cross(t, w, wp, delta);
            if !(t == 0.0 && w == 0.0) {
                run.zeros.push(cr.zero_time);
            }
            if stop == Stop::FirstZero && !(t == 0.0 && w == 0.0) {
                run.end = (cr.zero_time, 0.0, -cr.wp.signum() * sqrt(2.0 * osc.energy(cr.w, cr.wp)).max(0.0));
                return Ok(run);
            }
            let mut cursor = (0, 0);
            if sampling {
                while next_index as f64 * out_dt <= cr.t.min(t_end) * (1.0 + 1e-15) {
                    let ts = sample_time(next_index);
                    let (sw, swp) = osc.dense(&cr, ts, &mut cursor).unwrap_or((cr.w, cr.wp));
                    record(&mut run, ts, sw, swp);
                    next_index += 1;
                }
            }
            if cr.t > t_end {
                let (ew, ewp) = osc.dense(&cr, t_end, &mut cursor).unwrap_or((cr.w, cr.wp));
                run.end = (t_end, ew, ewp);
                return Ok(run);
            }
            t = cr.t;
            w = cr.w;
            wp = cr.wp;
            (acc, pot) = osc.forces(w);
            continue;
        }
        let h = (dt / (1u64 << level) as f64).min(target - t);
        let (nw, nwp) = osc.rk4_from(w, wp, acc, h);
        let (nacc, npot) = osc.forces(nw);
        let jump = (0.5 * nwp * nwp + npot - 0.5 * wp * wp - pot).abs();
        let jumped = delta > 0.0 && nw * w < 0.0;
        let scale = e0.max(1e-300);
        let budget = (JUMP_TOL * h / t_end).max(BUDGET_FLOOR) * scale;
        if jump > JUMP_TOL * scale || jumped {
            if level == MAX_HALVINGS {
                return Err(Error::StepRejected { t, jump });
            }
            level += 1;
            run.halvings = run.halvings.max(level);
            continue;
        }
        // halve while the step would spend more than its share of the total drift
        if jump > budget && level < MAX_HALVINGS {
            level += 1;
            run.halvings = run.halvings.max(level);
            continue;
        }
        if wp > 0.0 && nwp <= 0.0 || wp < 0.0 && nwp >= 0.0 {
            run.turning.push(hermite_extremum(w, wp, nw, nwp, h));
        }
        t += h;
        w = nw;
        wp = nwp;
        acc = nacc;
        pot = npot;
        if sampling && t >= target * (1.0 - 1e-15) && target == sample_time(next_index).min(t_end) {
            t = target;
            record(&mut run, t, w, wp);
            next_index += 1;
            level = 0;
        }
    }
    run.end = (t, w, wp);
    Ok(run)
}

/// Extremum of the cubic Hermite interpolant on a step where `w'` changes sign.
fn hermite_extremum(w0: f64, d0: f64, w1: f64, d1: f64, h: f64) -> f64 {
    let p = |x: f64| {
        let (x2, x3) = (x * x, x * x * x);
        (2.0 * x3 - 3.0 * x2 + 1.0) * w0 + (x3 - 2.0 * x2 + x) * h * d0 + (-2.0 * x3 + 3.0 * x2) * w1 + (x3 - x2) * h * d1
    };
    let dp = |x: f64| {
        (6.0 * x * x - 6.0 * x) * w0 + (3.0 * x * x - 4.0 * x + 1.0) * h * d0 + (-6.0 * x * x + 6.0 * x) * w1 + (3.0 * x * x - 2.0 * x) * h * d1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let rising = dp(0.0) > 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (dp(mid) > 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    p(0.5 * (lo + hi))
}

fn one_dim(p: &ProblemParams) -> Oscillator {
    Oscillator { c: 0.0, a_plus: p.mu() * p.lambda_plus(), a_minus: p.mu() * p.lambda_minus(), q: p.q() }
}

/// `ℋ(w, w') = ½|w'|² + (μλ₊/q)(w⁺)^q + (μλ₋/q)(w⁻)^q`.
pub fn hamiltonian(w: f64, wp: f64, p: &ProblemParams) -> f64 {
    one_dim(p).energy(w, wp)
}

/// `|(q − 1)γ_q − (γ_q − 2)|`, the exponent bookkeeping behind the angular
/// reduction `Δ(ρ^γ φ) = ρ^{γ−2}(φ'' + γ²φ)`.
pub fn exponent_identity_defect(q: f64) -> Result<f64> {
    let g = gamma_q(q)?;
    Ok(((q - 1.0) * g - (g - 2.0)).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory1D {
    pub q: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub dt: f64,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub wp: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    /// `w` at the turning points (`w' = 0`) met along the run.
    pub turning_points: Vec<f64>,
    /// Times at which `w` crossed zero.
    pub zeros: Vec<f64>,
    /// Deepest step halving used.
    pub halvings: u32,
    /// Started at the rest point `(0, 0)`.
    pub trivial: bool,
}

impl Trajectory1D {
    /// `max_t |ℋ(t) − ℋ(0)| / max(ℋ(0), 1e−30)`.
    pub fn max_relative_drift(&self) -> f64 {
        let h0 = self.hamiltonian.first().copied().unwrap_or(0.0);
        let scale = h0.max(1e-30);
        self.hamiltonian.iter().fold(0.0, |m, h| m.max((h - h0).abs() / scale))
    }

    pub fn min_hamiltonian(&self) -> f64 {
        self.hamiltonian.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_hamiltonian(&self) -> f64 {
        self.hamiltonian.last().copied().unwrap_or(0.0)
    }
}

/// Integrates `−w'' = μ(λ₊(w⁺)^{q−1} − λ₋(w⁻)^{q−1})` from `(w0, w0p)` over
/// `[0, t_end]`, sampling every `dt`.
pub fn integrate_1d(w0: f64, w0p: f64, p: &ProblemParams, t_end: f64, dt: f64) -> Result<Trajectory1D> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter { name: "t_end", reason: format!("must be nonnegative, got {t_end}") });
    }
    if !(w0.is_finite() && w0p.is_finite()) {
        return Err(Error::InvalidParameter { name: "initial state", reason: "must be finite".into() });
    }
    let osc = one_dim(p);
    let base = Trajectory1D {
        q: p.q(),
        a_plus: osc.a_plus,
        a_minus: osc.a_minus,
        dt,
        t: Vec::new(),
        w: Vec::new(),
        wp: Vec::new(),
        hamiltonian: Vec::new(),
        turning_points: Vec::new(),
        zeros: Vec::new(),
        halvings: 0,
        trivial: w0 == 0.0 && w0p == 0.0,
    };
    let steps = round_steps(t_end, dt);
    if base.trivial {
        let t: Vec<f64> = (0..=steps).map(|i| (i as f64 * dt).min(t_end)).collect();
        let len = t.len();
        return Ok(Trajectory1D { t, w: vec![0.0; len], wp: vec![0.0; len], hamiltonian: vec![0.0; len], ..base });
    }
    let run = flow(&osc, w0, w0p, t_end, dt, dt, Stop::Time)?;
    let hamiltonian = run.w.iter().zip(&run.wp).map(|(w, v)| osc.energy(*w, *v)).collect();
    Ok(Trajectory1D {
        t: run.t,
        w: run.w,
        wp: run.wp,
        hamiltonian,
        turning_points: run.turning,
        zeros: run.zeros,
        halvings: run.halvings,
        ..base
    })
}

fn round_steps(t_end: f64, dt: f64) -> usize {
    let s = ceil(t_end / dt - 1e-9);
    if s < 0.0 {
        0
    } else {
        s as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCheck {
    pub slope: f64,
    /// `½ s²`
    pub initial: f64,
    pub min_hamiltonian: f64,
    /// `|min ℋ − ½s²| / ½s²`
    pub relative_gap: f64,
    /// Integrated as a rescaled unit-slope trajectory.
    pub rescaled: bool,
    /// Horizon actually integrated, in the time of the integrated trajectory.
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoSingularProfile {
    pub checks: Vec<SlopeCheck>,
    /// Zero slopes, excluded as the trivial trajectory.
    pub excluded: usize,
    pub tolerance: f64,
}

impl NoSingularProfile {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.min_hamiltonian > 0.0 && c.relative_gap <= self.tolerance)
    }

    pub fn max_gap(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| m.max(c.relative_gap))
    }
}

/// Launches `(0, s)` for every slope and records the smallest Hamiltonian
/// along the run. Slopes too small for `dt` to resolve are integrated through
/// the scaling `w(t) = c W(t/τ)`, `c = |s|^{2/q}`, `τ = c^{(2−q)/2}`, which
/// maps them to the unit-slope trajectory and multiplies `ℋ` by `c^q`; the
/// unit trajectory is run over the same horizon.
pub fn verify_no_1d_singular_profile(p: &ProblemParams, slopes: &[f64], horizon: f64, dt: f64) -> Result<NoSingularProfile> {
    if !(p.mu() * p.lambda_plus() > 0.0 && p.mu() * p.lambda_minus() > 0.0) {
        return Err(Error::InvalidParameter { name: "lambda", reason: "μλ± must both be positive".into() });
    }
    let osc = one_dim(p);
    let q = p.q();
    let mut checks = Vec::new();
    let mut excluded = 0;
    for &s in slopes {
        if s == 0.0 {
            excluded += 1;
            continue;
        }
        let e = 0.5 * s * s;
        let amp = osc.amplitude(e, 1.0).min(osc.amplitude(e, -1.0));
        let resolvable = amp >= 0.1 * s.abs() * dt * 64.0;
        let (min_h, rescaled) = if resolvable {
            (integrate_1d(0.0, s, p, horizon, dt)?.min_hamiltonian(), false)
        } else {
            let c = pow(s.abs(), 2.0 / q);
            let unit = integrate_1d(0.0, s.signum(), p, horizon, dt)?;
            (pow(c, q) * unit.min_hamiltonian(), true)
        };
        checks.push(SlopeCheck { slope: s, initial: e, min_hamiltonian: min_h, relative_gap: (min_h - e).abs() / e, rescaled, horizon });
    }
    Ok(NoSingularProfile { checks, excluded, tolerance: 1e-6 })
}

/// Samples per period of an angular profile.
pub const ANGULAR_SAMPLES: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct AngularProfile {
    pub k: u32,
    pub q: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub phip: Vec<f64>,
    /// Collocation defect, see [`AngularProfile::collocation_defect`].
    pub residual: f64,
    /// `|φ(θ₁ + 2π) − φ(θ₁)| + |φ'(θ₁ + 2π) − φ'(θ₁)|` at the first
    /// extremum `θ₁ = π/(2k)`.
    pub periodicity: f64,
    pub sign_changes: usize,
    /// Every bracket of the shooting mismatch found in the scan.
    pub brackets: Vec<(f64, f64)>,
}

impl AngularProfile {
    fn oscillator(&self) -> Oscillator {
        Oscillator { c: self.gamma * self.gamma, a_plus: self.mu * self.lambda, a_minus: self.mu * self.lambda, q: self.q }
    }

    /// `max_i |E_i − E_*| / E_*` with `E = ½φ'² + ½γ²φ² + (μλ/q)|φ|^q` the
    /// first integral of the angular equation, evaluated at every sample,
    /// and `E_*` its value at the normalized maximum `φ = max φ`, `φ' = 0`.
    pub fn collocation_defect(&self) -> f64 {
        let osc = self.oscillator();
        let amp = self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let e_star = osc.potential(amp);
        let mut defect: f64 = 0.0;
        for (f, d) in self.phi.iter().zip(&self.phip) {
            defect = defect.max((osc.energy(*f, *d) - e_star).abs() / e_star);
        }
        defect
    }

    /// `(cφ, μ c^{2−q})`, again a solution.
    pub fn rescaled(&self, c: f64) -> AngularProfile {
        let mut out = self.clone();
        out.phi.iter_mut().for_each(|v| *v *= c);
        out.phip.iter_mut().for_each(|v| *v *= c);
        out.mu = self.mu * pow(c, 2.0 - self.q);
        out.residual = out.collocation_defect();
        out.periodicity = self.periodicity * c;
        out
    }

    /// `(φ, φ')` at any angle, by periodic cubic Hermite interpolation.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let n = self.phi.len();
        let h = 2.0 * PI / n as f64;
        let period = 2.0 * PI;
        let mut x = (theta - period * libm::floor(theta / period)) / h;
        if x >= n as f64 {
            x -= n as f64;
        }
        let i = (x as usize).min(n - 1);
        let s = x - i as f64;
        let j = (i + 1) % n;
        let osc = self.oscillator();
        let (y0, d0, y1, d1) = (self.phi[i], self.phip[i], self.phi[j], self.phip[j]);
        let (s2, s3) = (s * s, s * s * s);
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1;
        // derivative from the first integral, sign from the chord
        let e = osc.potential(self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let speed = sqrt((2.0 * (e - osc.potential(y))).max(0.0));
        let dir = (1.0 - s) * d0 + s * d1;
        (y, if dir >= 0.0 { speed } else { -speed })
    }

    /// Largest violation of `φ(θ + π/k) = −φ(θ)` and `φ(π/k − θ) = φ(θ)`
    /// over the samples; `NaN` if the samples do not align with `π/k`.
    pub fn dihedral_asymmetry(&self) -> f64 {
        let n = self.phi.len();
        let k = self.k as usize;
        if n % (2 * k) != 0 {
            return f64::NAN;
        }
        let shift = n / (2 * k);
        let mut m: f64 = 0.0;
        for i in 0..n {
            m = m.max((self.phi[(i + shift) % n] + self.phi[i]).abs());
            m = m.max((self.phi[(shift + n - i) % n] - self.phi[i]).abs());
        }
        m
    }
}

fn count_sign_changes(values: &[f64], floor: f64) -> usize {
    let signs: Vec<i8> = values.iter().filter(|v| v.abs() > floor).map(|v| if *v > 0.0 { 1 } else { -1 }).collect();
    if signs.is_empty() {
        return 0;
    }
    let mut changes = 0;
    for i in 0..signs.len() {
        if signs[i] != signs[(i + 1) % signs.len()] {
            changes += 1;
        }
    }
    changes
}

fn angular_oscillator(q: f64, gamma: f64, lambda: f64, mu: f64) -> Oscillator {
    Oscillator { c: gamma * gamma, a_plus: mu * lambda, a_minus: mu * lambda, q }
}

/// Initial slope of the profile with `max φ = 1`.
fn launch_slope(osc: &Oscillator) -> f64 {
    sqrt(2.0 * osc.potential(1.0))
}

/// Length of the first arc from `φ(0) = 0` to the next zero, minus `π/k`.
fn arc_mismatch(q: f64, gamma: f64, lambda: f64, mu: f64, k: u32) -> Result<f64> {
    let osc = angular_oscillator(q, gamma, lambda, mu);
    let p = launch_slope(&osc);
    let dt = (2.0 * PI / ANGULAR_SAMPLES as f64 / 8.0).min(WINDOW / (4.0 * p));
    let target = PI / k as f64;
    let run = flow(&osc, 0.0, p, 4.0 * PI, dt, f64::INFINITY, Stop::FirstZero)?;
    match run.zeros.first() {
        Some(z) => Ok(z - target),
        // no return within two periods of the linear problem
        None => Ok(4.0 * PI - target),
    }
}

/// Shoots for `μ` in `φ'' + γ²φ + μλ(|φ|^{q−2}φ) = 0` with `φ(0) = 0`,
/// `max φ = 1`, and `2k` arcs per period.
pub fn angular_shoot(k: u32, p: &ProblemParams, tol: f64) -> Result<AngularProfile> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "must be at least 1".into() });
    }
    if !p.is_symmetric() {
        return Err(Error::InvalidParameter { name: "lambda", reason: "the angular search needs λ₊ = λ₋".into() });
    }
    let (q, lambda) = (p.q(), p.lambda_plus());
    let gamma = gamma_q(q)?;
    let scan: Vec<f64> = (0..=80).map(|i| pow(10.0, -4.0 + 0.1 * i as f64)).collect();
    let mut values = Vec::with_capacity(scan.len());
    let mut trace = String::new();
    for &mu in &scan {
        let m = arc_mismatch(q, gamma, lambda, mu, k)?;
        trace.push_str(&format!("{mu:.3e}:{m:.3e} "));
        values.push(m);
    }
    let mut brackets = Vec::new();
    for i in 0..scan.len() - 1 {
        if values[i] == 0.0 || values[i] * values[i + 1] < 0.0 {
            brackets.push((scan[i], scan[i + 1]));
        }
    }
    let Some(&(mut lo, mut hi)) = brackets.first() else {
        return Err(Error::BracketNotFound { trace: String::from(trace.trim_end()) });
    };
    let mut f_lo = arc_mismatch(q, gamma, lambda, lo, k)?;
    for _ in 0..200 {
        let mid = sqrt(lo * hi);
        let f = arc_mismatch(q, gamma, lambda, mid, k)?;
        if f == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let osc = angular_oscillator(q, gamma, lambda, mu);
    let slope = launch_slope(&osc);
    let h = 2.0 * PI / ANGULAR_SAMPLES as f64;
    let dt = (h / 32.0).min(WINDOW / (4.0 * slope));
    let run = flow(&osc, 0.0, slope, 2.0 * PI, dt, h, Stop::Time)?;
    // φ' has a square-root cusp at the zeros, so the period map is compared
    // at the first extremum θ = π/(2k), a regular point of the orbit
    let quarter = PI / (2.0 * k as f64);
    let period_run = flow(&osc, 0.0, slope, (4 * k + 1) as f64 * quarter, dt, quarter, Stop::Time)?;
    let last = period_run.w.len() - 1;
    let periodicity = (period_run.w[last] - period_run.w[1]).abs() + (period_run.wp[last] - period_run.wp[1]).abs();
    let n = ANGULAR_SAMPLES;
    let mut profile = AngularProfile {
        k,
        q,
        gamma,
        lambda,
        mu,
        theta: run.t[..n].to_vec(),
        phi: run.w[..n].to_vec(),
        phip: run.wp[..n].to_vec(),
        residual: 0.0,
        periodicity,
        sign_changes: 0,
        brackets,
    };
    profile.residual = profile.collocation_defect();
    profile.sign_changes = count_sign_changes(&profile.phi, 1e-12);
    if profile.periodicity > tol {
        return Err(Error::NonConvergence { iterations: 200, residual: profile.periodicity });
    }
    Ok(profile)
}

/// Independent check of [`angular_shoot`]: Newton relaxation of the
/// three-point discretization on the quarter arc `[0, π/(2k)]` (odd at the
/// zero, even at the maximum, `φ = 1` there, `μ` unknown) on grids of `n`
/// and `2n` points per period, Richardson-extrapolated with exponent `3/2`,
/// the order set by `φ ~ θ − cθ^{3/2}` at the zeros. Returns `(μ, φ)` at the
/// `n` uniform angles.
pub fn relax_angular_profile(k: u32, p: &ProblemParams, n: usize) -> Result<(f64, Vec<f64>)> {
    if k == 0 || n % (4 * k as usize) != 0 {
        return Err(Error::InvalidParameter { name: "k", reason: format!("{n} samples do not split into {} quarter arcs", 4 * k) });
    }
    if !p.is_symmetric() || p.lambda_plus() <= 0.0 {
        return Err(Error::InvalidParameter { name: "lambda", reason: "needs λ₊ = λ₋ > 0".into() });
    }
    let (mu1, q1) = relax_quarter(k, p, n)?;
    let (mu2, q2) = relax_quarter(k, p, 2 * n)?;
    let w = pow(2.0, 1.5);
    let quarter: Vec<f64> = (0..q1.len()).map(|i| (w * q2[2 * i] - q1[i]) / (w - 1.0)).collect();
    let mu = (w * mu2 - mu1) / (w - 1.0);
    let m = q1.len() - 1;
    let arc = 2 * m;
    let mut phi = vec![0.0; n];
    for (i, v) in phi.iter_mut().enumerate() {
        let j = i % arc;
        let sign = if (i / arc) % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * if j <= m { quarter[j] } else { quarter[arc - j] };
    }
    Ok((mu, phi))
}

fn relax_quarter(k: u32, p: &ProblemParams, n: usize) -> Result<(f64, Vec<f64>)> {
    let q = p.q();
    let lambda = p.lambda_plus();
    let gamma = gamma_q(q)?;
    let m = n / (4 * k as usize);
    let h = 2.0 * PI / n as f64;
    let g = |v: f64| if v > 0.0 { lambda * pow(v, q - 1.0) } else if v < 0.0 { -lambda * pow(-v, q - 1.0) } else { 0.0 };
    let dg = |v: f64| if v != 0.0 { lambda * (q - 1.0) * pow(v.abs(), q - 2.0) } else { 0.0 };
    let mut phi: Vec<f64> = (0..=m).map(|j| libm::sin(k as f64 * j as f64 * h)).collect();
    phi[m] = 1.0;
    let mut mu = 1.0;
    let inv = 1.0 / (h * h);
    let residual = |phi: &[f64], mu: f64| -> Vec<f64> {
        (1..=m)
            .map(|r| {
                let right = if r < m { phi[r + 1] } else { phi[m - 1] };
                (right - 2.0 * phi[r] + phi[r - 1]) * inv + gamma * gamma * phi[r] + mu * g(phi[r])
            })
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut f = residual(&phi, mu);
    for it in 0..100 {
        let fnorm = norm(&f);
        if fnorm < 1e-14 * inv {
            return Ok((mu, phi));
        }
        // bordered tridiagonal: rows 1..m-1 in φ_1..φ_{m-1}, last row the even condition at the maximum
        let size = m - 1;
        let mut diag = vec![0.0; size];
        let mut lower = vec![0.0; size];
        let mut upper = vec![0.0; size];
        let mut border = vec![0.0; size];
        for r in 1..m {
            let i = r - 1;
            diag[i] = -2.0 * inv + gamma * gamma + mu * dg(phi[r]);
            lower[i] = if r > 1 { inv } else { 0.0 };
            upper[i] = if r + 1 < m { inv } else { 0.0 };
            border[i] = g(phi[r]);
        }
        let rhs: Vec<f64> = f[..size].iter().map(|v| -v).collect();
        let y = thomas(&lower, &diag, &upper, &rhs);
        let z = thomas(&lower, &diag, &upper, &border);
        // last equation: 2 inv · δφ_{m-1} + g(1) δμ = −f_m
        let c = 2.0 * inv;
        let d = g(phi[m]);
        let dmu = (-f[m - 1] - c * y[size - 1]) / (d - c * z[size - 1]);
        let dphi: Vec<f64> = (0..size).map(|i| y[i] - dmu * z[i]).collect();
        let mut step = 1.0;
        loop {
            let mut trial = phi.clone();
            for i in 0..size {
                trial[i + 1] += step * dphi[i];
            }
            let trial_mu = mu + step * dmu;
            let ok = trial[1..m].iter().all(|v| *v > 0.0) && trial_mu > 0.0;
            if ok {
                let tf = residual(&trial, trial_mu);
                if norm(&tf) < fnorm || step < 1e-3 {
                    phi = trial;
                    mu = trial_mu;
                    f = tf;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-6 {
                return Err(Error::NonConvergence { iterations: it, residual: fnorm });
            }
        }
    }
    Err(Error::NonConvergence { iterations: 100, residual: norm(&f) })
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / den;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `u(x) = ρ^γ φ(θ)` on a grid.
pub fn homogeneous_field(profile: &AngularProfile, grid: Arc<DiscGrid>) -> ScalarField {
    let g = profile.gamma;
    ScalarField::from_fn(grid, |pt| {
        let r = pt.norm();
        if r == 0.0 {
            0.0
        } else {
            pow(r, g) * profile.eval(pt.angle()).0
        }
    })
}

/// Log-spaced slopes `s_i`, `i = 0..count`, from `lo` to `hi`.
pub fn log_slopes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (log(lo), log(hi));
    (0..count).map(|i| libm::exp(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}
