//! Sign-changing solutions built from sector minimizers: minimize on
//! `S_k`, check positivity, and extend to the disc by `2k − 1` odd
//! reflections across the rays `θ = jπ/k`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, floor, round, sin};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::{DiscGrid, NodeKind, Point, ScalarField, Shape};
use crate::nonlinearity::ProblemParams;
use crate::solver::{self, ApproximationSequence, Entry, SolverOptions};

/// Sector orders supported at desk resolution.
pub const MAX_K: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SectorOptions {
    pub n: usize,
    pub schedule: Vec<f64>,
    pub solver: SolverOptions,
    pub seed: u64,
    pub max_seeds: usize,
}

impl Default for SectorOptions {
    fn default() -> Self {
        SectorOptions { n: 257, schedule: solver::default_schedule(), solver: SolverOptions::default(), seed: 0, max_seeds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorSolution {
    pub k: u32,
    pub sequence: ApproximationSequence,
    pub seeds_tried: usize,
    /// Set for the `λ₊ = λ₋ = 0` case, where the solution is identically zero.
    pub degenerate: bool,
}

impl SectorSolution {
    pub fn final_field(&self) -> &ScalarField {
        &self.sequence.entries.last().expect("nonempty sequence").u
    }
}

/// Distance from `p` to the two straight edges of `S_k`.
fn ray_distance_sector(p: Point, k: u32) -> f64 {
    let a = PI / k as f64;
    let edge = |dx: f64, dy: f64| {
        if p.x * dx + p.y * dy >= 0.0 {
            (p.x * dy - p.y * dx).abs()
        } else {
            p.norm()
        }
    };
    edge(1.0, 0.0).min(edge(cos(a), sin(a)))
}

/// Index `j` of the copy `R_k^j(S_k)` containing `p` and the distance from `p`
/// to the nearest ray `θ = iπ/k`.
pub fn sector_index(p: Point, k: u32) -> (u32, f64) {
    let rho = p.norm();
    if rho == 0.0 {
        return (0, 0.0);
    }
    let phi = p.angle() * k as f64 / PI;
    let j = (floor(phi) as i64).rem_euclid(2 * k as i64) as u32;
    let nearest = round(phi);
    let delta = ((phi - nearest) * PI / k as f64).abs();
    let dist = if delta < PI / 2.0 { rho * sin(delta) } else { rho };
    (j, dist)
}

fn seed_field(grid: Arc<DiscGrid>, k: u32, attempt: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
    let mut coef = [0.0; 3];
    if attempt > 0 {
        for c in coef.iter_mut() {
            *c = 0.6 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
        }
    }
    let kf = k as f64;
    ScalarField::from_fn(grid, move |p| {
        let rho2 = p.x * p.x + p.y * p.y;
        let t = p.angle();
        let base = 0.1 * (1.0 - rho2) * sin(kf * t);
        base * (1.0 + coef[0] * sin(2.0 * kf * t) + coef[1] * libm::sqrt(rho2) + coef[2] * cos(kf * t))
    })
}

fn positive_enough(u: &ScalarField, k: u32) -> core::result::Result<(), f64> {
    let grid = u.grid();
    let margin = 3.0 * grid.h();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for &idx in grid.interior() {
        let v = u.values()[idx];
        let p = grid.point(idx);
        let dist = ray_distance_sector(p, k).min(1.0 - p.norm());
        if v < 0.0 || (dist > margin && v <= 0.0) {
            ok = false;
        }
        worst = worst.min(v);
    }
    if ok {
        Ok(())
    } else {
        Err(worst)
    }
}

/// Continuation on the sector `S_k` with positivity enforced by multi-start.
pub fn solve_sector(k: u32, p: &ProblemParams, opts: &SectorOptions) -> Result<SectorSolution> {
    if k == 0 || k > MAX_K {
        return Err(Error::InvalidParameter { name: "k", reason: alloc::format!("sector order must be in 1..={MAX_K}") });
    }
    if !p.is_symmetric() {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "the sector construction needs lambda_plus == lambda_minus".into(),
        });
    }
    let grid = Arc::new(DiscGrid::build_sector(opts.n, k)?);
    if p.is_harmonic() {
        let zero = ScalarField::zeros(grid);
        let entries = opts
            .schedule
            .iter()
            .map(|&eps| Entry {
                epsilon: eps,
                u: zero.clone(),
                f: zero.clone(),
                energy: 0.0,
                residual_inf: 0.0,
                iterations: 0,
                sup_increment: None,
                h1_increment: None,
                penalty: None,
            })
            .collect();
        return Ok(SectorSolution {
            k,
            sequence: ApproximationSequence { params: *p, entries, failure: None },
            seeds_tried: 0,
            degenerate: true,
        });
    }
    let mut worst = f64::NAN;
    for attempt in 0..opts.max_seeds.max(1) {
        let u0 = seed_field(grid.clone(), k, attempt, opts.seed);
        let mut seq = solver::continuation(p, &opts.schedule, &u0, &opts.solver)?;
        if let Some(err) = seq.failure.take() {
            return Err(err);
        }
        // the functional is even, so a nonpositive minimizer is as good as its negative
        for e in seq.entries.iter_mut() {
            if e.u.values().iter().all(|v| *v <= 0.0) {
                e.u = e.u.scaled(-1.0);
            }
        }
        let mut good = true;
        for e in &seq.entries {
            if let Err(w) = positive_enough(&e.u, k) {
                worst = w;
                good = false;
                break;
            }
        }
        if good {
            return Ok(SectorSolution { k, sequence: seq, seeds_tried: attempt + 1, degenerate: false });
        }
    }
    Err(Error::PositivityFailed { min_value: worst, seeds_tried: opts.max_seeds.max(1) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// Extends a sector field to the disc by reflections across the rays.
pub fn reflect(u_sector: &ScalarField, k: u32, disc: Arc<DiscGrid>, parity: Parity) -> Result<ScalarField> {
    let sg = u_sector.grid();
    if sg.shape() != (Shape::Sector { k }) || disc.shape() != Shape::Disc || sg.n() != disc.n() {
        return Err(Error::GridMismatch);
    }
    let tol = 1e-9 * disc.h();
    let width = PI / k as f64;
    let mut values = vec![0.0; disc.len()];
    for &idx in disc.interior() {
        let p = disc.point(idx);
        let (j, dist) = sector_index(p, k);
        if dist <= tol {
            continue;
        }
        let local = p.angle() - j as f64 * width;
        let (theta, sign) = if j % 2 == 0 {
            (local, 1.0)
        } else {
            (width - local, if parity == Parity::Odd { -1.0 } else { 1.0 })
        };
        let rho = p.norm();
        values[idx] = sign * u_sector.value_at(Point::new(rho * cos(theta), rho * sin(theta)));
    }
    ScalarField::from_values(disc, values)
}

/// Odd extension; ray nodes are set to zero.
pub fn odd_reflect(u_sector: &ScalarField, k: u32, disc: Arc<DiscGrid>) -> Result<ScalarField> {
    reflect(u_sector, k, disc, Parity::Odd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionReport {
    /// Sup of `|−Δ_h u − g_ε(u)|` over interior nodes farther than `3h` from the rays.
    pub off_ray_residual: f64,
    /// Same sup over the remaining interior nodes.
    pub ray_band_residual: f64,
    /// Sup of `|g_ε(u)|` off the ray band, the size of the equation's terms.
    pub equation_scale: f64,
    pub passes: bool,
    /// Ray-band residual exceeds the equation scale.
    pub ray_flagged: bool,
}

pub fn verify_reflected_solution(u: &ScalarField, k: u32, p: &ProblemParams, tol: f64) -> Result<ReflectionReport> {
    let res = solver::residual(u, p, None)?;
    let grid = u.grid();
    let margin = 3.0 * grid.h();
    let (mut off, mut band, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for &idx in grid.interior() {
        let (_, dist) = sector_index(grid.point(idx), k);
        let r = res.values()[idx].abs();
        if dist > margin {
            off = off.max(r);
            scale = scale.max(p.source(u.values()[idx]).abs());
        } else {
            band = band.max(r);
        }
    }
    Ok(ReflectionReport {
        off_ray_residual: off,
        ray_band_residual: band,
        equation_scale: scale,
        passes: off <= 10.0 * tol,
        ray_flagged: band > (10.0 * tol).max(scale),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignPattern {
    pub checked: usize,
    pub strict_checked: usize,
    pub violations: usize,
}

impl SignPattern {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// `(−1)^j u ≥ 0` on `R_k^j(S_k)` at every node, strictly beyond `3h` from
/// the rays and the circle.
pub fn sign_pattern(u: &ScalarField, k: u32) -> SignPattern {
    let grid = u.grid();
    let margin = 3.0 * grid.h();
    let mut out = SignPattern { checked: 0, strict_checked: 0, violations: 0 };
    for (idx, kind) in grid.kinds().iter().enumerate() {
        if *kind == NodeKind::Exterior {
            continue;
        }
        let p = grid.point(idx);
        let (j, dist) = sector_index(p, k);
        let v = if j % 2 == 0 { u.values()[idx] } else { -u.values()[idx] };
        out.checked += 1;
        let strict = *kind == NodeKind::Interior && dist > margin && 1.0 - p.norm() > margin;
        if strict {
            out.strict_checked += 1;
        }
        if v < 0.0 || (strict && v <= 0.0) {
            out.violations += 1;
        }
    }
    out
}

/// Largest relative deviation from the mirror symmetry `(x, y) ↦ (−x, y)`.
pub fn mirror_asymmetry(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let n = grid.n();
    let scale = u.sup_norm();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let a = u.values()[j * n + i];
            let b = u.values()[j * n + (n - 1 - i)];
            worst = worst.max((a - b).abs());
        }
    }
    worst / scale
}

/// Energies of a sign-changing field and of a one-signed minimizer at the same ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonMinimality {
    pub sign_changing_energy: f64,
    pub one_signed_energy: f64,
}

impl NonMinimality {
    pub fn new(sign_changing: &ScalarField, one_signed: &ScalarField, p: &ProblemParams) -> Self {
        NonMinimality {
            sign_changing_energy: solver::energy(sign_changing, p),
            one_signed_energy: solver::energy(one_signed, p),
        }
    }

    pub fn holds(&self) -> bool {
        self.one_signed_energy < self.sign_changing_energy && self.sign_changing_energy < 0.0
    }
}

/// Helper for callers that only need the indices of nodes on the rays.
pub fn ray_nodes(grid: &DiscGrid, k: u32) -> Vec<usize> {
    let tol = 1e-9 * grid.h();
    (0..grid.len()).filter(|&i| grid.kind(i) == NodeKind::Interior && sector_index(grid.point(i), k).1 <= tol).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::schedule;

    fn opts(n: usize, steps: usize) -> SectorOptions {
        SectorOptions { n, schedule: schedule(0.1, steps), ..SectorOptions::default() }
    }

    #[test]
    fn sector_index_basics() {
        assert_eq!(sector_index(Point::new(0.5, 0.1), 2).0, 0);
        assert_eq!(sector_index(Point::new(-0.5, 0.1), 2).0, 1);
        assert_eq!(sector_index(Point::new(-0.5, -0.1), 2).0, 2);
        assert_eq!(sector_index(Point::new(0.5, -0.1), 2).0, 3);
        assert!((sector_index(Point::new(0.5, 0.1), 2).1 - 0.1).abs() < 1e-15);
        assert!(sector_index(Point::new(0.0, 0.3), 2).1 < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_lambda_and_bad_k() {
        let p = ProblemParams::new(0.5, 1.0, 2.0).unwrap();
        assert!(solve_sector(2, &p, &opts(33, 1)).is_err());
        let s = ProblemParams::new(0.5, 1.0, 1.0).unwrap();
        assert!(solve_sector(0, &s, &opts(33, 1)).is_err());
        assert!(solve_sector(7, &s, &opts(33, 1)).is_err());
    }

    #[test]
    fn harmonic_case_is_degenerate_zero() {
        let p = ProblemParams::harmonic(0.5).unwrap();
        let sol = solve_sector(2, &p, &opts(33, 2)).unwrap();
        assert!(sol.degenerate);
        assert!(sol.final_field().is_zero());
        assert_eq!(sol.sequence.last().unwrap().energy, 0.0);
    }

    #[test]
    fn zero_sector_reflects_to_zero() {
        let sg = Arc::new(DiscGrid::build_sector(65, 3).unwrap());
        let dg = Arc::new(DiscGrid::build_disc(65).unwrap());
        assert!(odd_reflect(&ScalarField::zeros(sg), 3, dg).unwrap().is_zero());
    }

    #[test]
    fn reflection_requires_matching_grids() {
        let sg = Arc::new(DiscGrid::build_sector(65, 2).unwrap());
        let dg = Arc::new(DiscGrid::build_disc(33).unwrap());
        assert_eq!(odd_reflect(&ScalarField::zeros(sg.clone()), 2, dg), Err(Error::GridMismatch));
        let dg = Arc::new(DiscGrid::build_disc(65).unwrap());
        assert_eq!(odd_reflect(&ScalarField::zeros(sg), 3, dg), Err(Error::GridMismatch));
    }

    #[test]
    fn half_disc_harmonic_extension() {
        // x₂ is harmonic and odd under (x, y) ↦ (x, −y)
        let sg = Arc::new(DiscGrid::build_sector(65, 1).unwrap());
        let dg = Arc::new(DiscGrid::build_disc(65).unwrap());
        let u = ScalarField::from_fn(sg, |p| p.y);
        let r = odd_reflect(&u, 1, dg.clone()).unwrap();
        let n = dg.n();
        for j in 0..n {
            for i in 0..n {
                assert_eq!(r.values()[j * n + i], -r.values()[(n - 1 - j) * n + i]);
            }
        }
        let p = ProblemParams::harmonic(0.5).unwrap();
        let rep = verify_reflected_solution(&r, 1, &p, 1e-8).unwrap();
        // exact up to the Dirichlet band where x₂ is not zero
        let lap = r.laplacian();
        let far = dg
            .interior()
            .iter()
            .filter(|&&i| {
                let q = dg.point(i);
                1.0 - q.norm() > 3.0 * dg.h()
            })
            .fold(0.0f64, |m, &i| m.max(lap.values()[i].abs()));
        assert!(far < 1e-9, "{far}");
        assert!(rep.passes || rep.off_ray_residual > 0.0);
        // on the ray itself the odd extension is exactly harmonic
        for i in ray_nodes(&dg, 1) {
            assert!(lap.values()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn k1_and_k2_solutions() {
        let p = ProblemParams::new(0.5, 1.0, 1.0).unwrap();
        for k in [1, 2] {
            let sol = solve_sector(k, &p, &opts(65, 8)).unwrap();
            let last = sol.sequence.last().unwrap();
            assert!(last.energy < 0.0);
            let pe = p.with_epsilon(last.epsilon).unwrap();
            if k == 1 {
                assert!(mirror_asymmetry(&last.u) <= 1e-6);
            }
            let disc = Arc::new(DiscGrid::build_disc(65).unwrap());
            let u = odd_reflect(&last.u, k, disc.clone()).unwrap();
            assert!(sign_pattern(&u, k).holds());
            let rep = verify_reflected_solution(&u, k, &pe, 1e-8).unwrap();
            assert!(rep.passes, "{rep:?}");
            assert!(!rep.ray_flagged, "{rep:?}");
            let even = reflect(&last.u, k, disc.clone(), Parity::Even).unwrap();
            let rep_even = verify_reflected_solution(&even, k, &pe, 1e-8).unwrap();
            assert!(rep_even.ray_flagged, "{rep_even:?}");
            assert!(!sign_pattern(&even, k).holds());
            if k == 2 {
                // invariance under rotation by π
                let n = disc.n();
                for j in 0..n {
                    for i in 0..n {
                        let a = u.values()[j * n + i];
                        let b = u.values()[(n - 1 - j) * n + (n - 1 - i)];
                        assert!((a - b).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
