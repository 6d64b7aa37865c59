//! The acceptance fleet: solutions, trajectories and profiles, computed
//! lazily and shared, and the raw measurements taken on them. Thresholds
//! are applied elsewhere.

use std::sync::{Arc, OnceLock};

use anyhow::{anyhow, bail, Result};
use cpu_time::ThreadTime;
use lelab_core::monotonicity::{dh_residual, geometric_radii, pohozaev_residual};
use lelab_core::nodal::{
    blowup, dead_core_check, default_deltas, extract_nodal, nondegeneracy, vanishing_order, BlowupOptions, DeadCore, NodalOptions,
    NodalSet, Nondegeneracy, OrderClass, OrderFit,
};
use lelab_core::profiles::{
    angular_shoot, exponent_identity_defect, homogeneous_field, integrate_1d, log_slopes, relax_angular_profile, AngularProfile,
    ANGULAR_SAMPLES,
};
use lelab_core::solver::{continuation, one_phase_seed, penalized_minimize, schedule, ApproximationSequence, SolverOptions};
use lelab_core::symmetric::{odd_reflect, sign_pattern, solve_sector, NonMinimality, SectorOptions, SectorSolution, SignPattern};
use lelab_core::{gamma_q, DiscGrid, FieldSampler, Point, ProblemParams, ScalarField};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::config::Config;

/// Exponent of the fleet's disc solutions.
pub const FLEET_Q: f64 = 0.5;
/// Sector order of the sign-changing fleet solution.
pub const FLEET_K: u32 = 2;
pub const ODE_T: f64 = 100.0;
pub const ODE_DT: f64 = 1e-4;
/// Radii at which the spherical identities are evaluated.
pub const IDENTITY_RADII: [f64; 3] = [0.2, 0.4, 0.6];
/// Grid sizes of the closed-form derivative controls.
pub const CONTROL_NS: [usize; 3] = [65, 129, 257];
pub const REGULAR_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub n: usize,
    /// Grid of the refinement comparison.
    pub coarse_n: usize,
    pub eps0: f64,
    pub eps_steps: usize,
    pub tol: f64,
    pub seed: u64,
    pub scales: Vec<f64>,
}

impl FleetSpec {
    pub fn standard() -> Self {
        FleetSpec { n: 257, coarse_n: 129, eps0: 0.1, eps_steps: 14, tol: 1e-8, seed: 0, scales: vec![0.8, 0.4, 0.2, 0.1] }
    }

    /// `n = 129` against `65`.
    pub fn fast() -> Self {
        FleetSpec { n: 129, coarse_n: 65, ..Self::standard() }
    }

    pub fn from_config(cfg: &Config) -> Self {
        FleetSpec {
            n: cfg.n,
            coarse_n: (cfg.n - 1) / 2 + 1,
            eps0: cfg.eps0,
            eps_steps: cfg.eps_steps,
            tol: cfg.tol,
            seed: cfg.seed,
            scales: cfg.scales.clone(),
        }
    }

    pub fn params(&self) -> ProblemParams {
        ProblemParams::new(FLEET_Q, 1.0, 1.0).expect("fleet parameters")
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, ..SolverOptions::default() }
    }

    fn schedule(&self) -> Vec<f64> {
        schedule(self.eps0, self.eps_steps)
    }
}

/// The one-signed minimizer and the reflected `k = 2` solution on one grid.
#[derive(Debug, Clone)]
pub struct DiscSolutions {
    pub n: usize,
    /// Limit parameters (`ε = 0`).
    pub params: ProblemParams,
    pub one_signed: ApproximationSequence,
    pub sector: SectorSolution,
    pub k2: ScalarField,
    /// Thread CPU time spent solving.
    pub cpu_seconds: f64,
}

impl DiscSolutions {
    pub fn one_signed_field(&self) -> &ScalarField {
        &self.one_signed.last().expect("nonempty sequence").u
    }

    pub fn h(&self) -> f64 {
        self.k2.grid().h()
    }
}

pub fn solve_disc(spec: &FleetSpec, n: usize) -> Result<DiscSolutions> {
    let clock = ThreadTime::now();
    let p = spec.params();
    let disc = Arc::new(DiscGrid::build_disc(n)?);
    let one_signed = continuation(&p, &spec.schedule(), &one_phase_seed(disc.clone()), &spec.solver())?;
    if let Some(err) = &one_signed.failure {
        bail!(err.clone());
    }
    let opts = SectorOptions { n, schedule: spec.schedule(), solver: spec.solver(), seed: spec.seed, ..SectorOptions::default() };
    let sector = solve_sector(FLEET_K, &p, &opts)?;
    let k2 = odd_reflect(sector.final_field(), FLEET_K, disc)?;
    Ok(DiscSolutions { n, params: p, one_signed, sector, k2, cpu_seconds: clock.elapsed().as_secs_f64() })
}

type Slot<T> = OnceLock<std::result::Result<T, String>>;

fn get<'a, T>(slot: &'a Slot<T>, f: impl FnOnce() -> Result<T>) -> Result<&'a T> {
    slot.get_or_init(|| f().map_err(|e| format!("{e:#}"))).as_ref().map_err(|e| anyhow!(e.clone()))
}

/// Lazily computed fleet members; each is built at most once.
#[derive(Debug)]
pub struct Fleet {
    pub spec: FleetSpec,
    fine: Slot<DiscSolutions>,
    coarse: Slot<DiscSolutions>,
    penalized: Slot<ApproximationSequence>,
    ode: Slot<OdeFleet>,
    angular: Slot<AngularProfile>,
}

impl Fleet {
    pub fn new(spec: FleetSpec) -> Self {
        Fleet {
            spec,
            fine: OnceLock::new(),
            coarse: OnceLock::new(),
            penalized: OnceLock::new(),
            ode: OnceLock::new(),
            angular: OnceLock::new(),
        }
    }

    pub fn fine(&self) -> Result<&DiscSolutions> {
        get(&self.fine, || solve_disc(&self.spec, self.spec.n))
    }

    pub fn coarse(&self) -> Result<&DiscSolutions> {
        get(&self.coarse, || solve_disc(&self.spec, self.spec.coarse_n))
    }

    /// Penalized continuation around the fine one-signed limit.
    pub fn penalized(&self) -> Result<&ApproximationSequence> {
        get(&self.penalized, || {
            let fine = self.fine()?;
            let seq = penalized_minimize(fine.one_signed_field(), &fine.params, &self.spec.schedule(), &self.spec.solver())?;
            if let Some(err) = &seq.failure {
                bail!(err.clone());
            }
            Ok(seq)
        })
    }

    pub fn ode(&self) -> Result<&OdeFleet> {
        get(&self.ode, || ode_fleet(true))
    }

    pub fn angular(&self) -> Result<&AngularProfile> {
        get(&self.angular, || Ok(angular_shoot(FLEET_K, &self.spec.params(), 1e-10)?))
    }
}

// ---------------------------------------------------------------- ODE runs

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRun {
    pub q: f64,
    pub slope: f64,
    pub initial: f64,
    /// `max |ℋ(t) − ℋ(0)| / ℋ(0)`.
    pub drift: f64,
    /// `max |ℋ(t) − ℋ_ref(t)| / ℋ(0)` against the run at half the step.
    pub reference_gap: f64,
    pub reference_drift: f64,
    pub min_hamiltonian: f64,
    pub halvings: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeFleet {
    pub runs: Vec<TrajectoryRun>,
    /// Thread CPU time of the fleet runs, references excluded.
    pub cpu_seconds: f64,
}

/// Twenty initial slopes, log-spaced, split over `q ∈ {0.3, 0.5, 0.7}`.
pub fn ode_cases() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (q, count) in [(0.3, 7), (0.5, 7), (0.7, 6)] {
        for s in log_slopes(1.5, 15.0, count) {
            out.push((q, s));
        }
    }
    out
}

pub fn ode_fleet(with_reference: bool) -> Result<OdeFleet> {
    let mut runs = Vec::new();
    let mut cpu = 0.0;
    for (q, s) in ode_cases() {
        let p = ProblemParams::new(q, 1.0, 1.0)?;
        let clock = ThreadTime::now();
        let tr = integrate_1d(0.0, s, &p, ODE_T, ODE_DT)?;
        cpu += clock.elapsed().as_secs_f64();
        let h0 = tr.hamiltonian[0];
        let mut run = TrajectoryRun {
            q,
            slope: s,
            initial: h0,
            drift: tr.max_relative_drift(),
            reference_gap: f64::NAN,
            reference_drift: f64::NAN,
            min_hamiltonian: tr.min_hamiltonian(),
            halvings: tr.halvings,
        };
        if with_reference {
            let fine = integrate_1d(0.0, s, &p, ODE_T, 0.5 * ODE_DT)?;
            let gap = tr.hamiltonian.iter().enumerate().fold(0.0f64, |m, (i, h)| match fine.hamiltonian.get(2 * i) {
                Some(hr) => m.max((h - hr).abs() / h0),
                None => f64::INFINITY,
            });
            run.reference_gap = gap;
            run.reference_drift = fine.max_relative_drift();
        }
        runs.push(run);
    }
    Ok(OdeFleet { runs, cpu_seconds: cpu })
}

/// `w` at the first turning point from `(0, 1)` with `q = ½`, `μλ± = 1`.
pub fn first_turning_point() -> Result<f64> {
    let p = ProblemParams::new(0.5, 1.0, 1.0)?;
    let tr = integrate_1d(0.0, 1.0, &p, 1.0, ODE_DT)?;
    tr.turning_points.first().copied().ok_or_else(|| anyhow!("no turning point before t = 1"))
}

/// Largest exponent-identity defect over `count` random `q ∈ (0, 1)`.
pub fn exponent_identity_max(seed: u64, count: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut drawn = 0;
    while drawn < count {
        let q = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        if q == 0.0 {
            continue;
        }
        worst = worst.max(exponent_identity_defect(q)?);
        drawn += 1;
    }
    Ok(worst)
}

// ------------------------------------------------------ spherical identities

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRow {
    pub field: &'static str,
    pub r: f64,
    pub fine: f64,
    pub coarse: f64,
}

fn named_fields(sol: &DiscSolutions) -> [(&'static str, &ScalarField); 2] {
    [("one_signed", sol.one_signed_field()), ("k2", &sol.k2)]
}

/// Pohozaev residuals at the origin on both grids.
pub fn pohozaev_table(fleet: &Fleet) -> Result<Vec<IdentityRow>> {
    let (fine, coarse) = (fleet.fine()?, fleet.coarse()?);
    let mut rows = Vec::new();
    for ((name, uf), (_, uc)) in named_fields(fine).into_iter().zip(named_fields(coarse)) {
        let (sf, sc) = (FieldSampler::new(uf), FieldSampler::new(uc));
        for r in IDENTITY_RADII {
            rows.push(IdentityRow {
                field: name,
                r,
                fine: pohozaev_residual(&sf, &fine.params, Point::ORIGIN, r)?,
                coarse: pohozaev_residual(&sc, &coarse.params, Point::ORIGIN, r)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhControls {
    pub ns: Vec<usize>,
    /// Largest residual over [`IDENTITY_RADII`] per grid, `u = x₁`.
    pub linear: Vec<f64>,
    /// Same for `u ≡ 0.7`.
    pub constant: Vec<f64>,
}

impl DhControls {
    /// Observed order of `residual ~ h^p` by a least-squares fit.
    pub fn order(values: &[f64], ns: &[usize]) -> f64 {
        let xs: Vec<f64> = ns.iter().map(|n| (1.0 / (*n as f64 - 1.0)).ln()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let m = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    pub fn linear_order(&self) -> f64 {
        Self::order(&self.linear, &self.ns)
    }
}

fn max_dh(u: &ScalarField) -> Result<f64> {
    let s = FieldSampler::new(u);
    let h = u.grid().h();
    let mut worst = 0.0f64;
    for r in IDENTITY_RADII {
        worst = worst.max(dh_residual(&s, Point::ORIGIN, r, h)?);
    }
    Ok(worst)
}

pub fn dh_controls() -> Result<DhControls> {
    let (mut linear, mut constant) = (Vec::new(), Vec::new());
    for n in CONTROL_NS {
        let grid = Arc::new(DiscGrid::build_disc(n)?);
        linear.push(max_dh(&ScalarField::from_fn(grid.clone(), |p| p.x))?);
        constant.push(max_dh(&ScalarField::from_fn(grid, |_| 0.7))?);
    }
    Ok(DhControls { ns: CONTROL_NS.to_vec(), linear, constant })
}

/// `H'` identity residuals of the fine solutions.
pub fn dh_solutions(fleet: &Fleet) -> Result<Vec<(&'static str, f64)>> {
    let fine = fleet.fine()?;
    named_fields(fine).into_iter().map(|(name, u)| Ok((name, max_dh(u)?))).collect()
}

// ------------------------------------------------------------ vanishing order

/// Radii of the order fit at the sector vertex.
pub fn origin_radii(h: f64) -> Result<Vec<f64>> {
    Ok(geometric_radii(4.0 * h, 0.2, 10)?)
}

/// Radii of the order fit at a regular nodal point.
pub fn regular_radii(h: f64) -> Result<Vec<f64>> {
    Ok(geometric_radii(4.0 * h, 16.0 * h, 8)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOrder {
    pub position: Point,
    pub grad_norm: f64,
    pub fit: OrderFit,
    pub nondeg_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub n: usize,
    pub nodal: NodalSet,
    pub origin: PointOrder,
    pub origin_nondeg: Nondegeneracy,
    pub regular: Vec<PointOrder>,
    pub clusters: Vec<PointOrder>,
}

impl OrderReport {
    /// Points whose order class contradicts their gradient: order one with
    /// a gradient at most `τ`, or order `γ_q` with a gradient above it.
    pub fn misclassified(&self) -> usize {
        self.points().filter(|p| misclassified(p, self.nodal.tau_grad)).count()
    }

    /// Points classified as order one or `γ_q`.
    pub fn classified(&self) -> usize {
        self.points().filter(|p| matches!(p.fit.class, OrderClass::One | OrderClass::GammaQ)).count()
    }

    pub fn points(&self) -> impl Iterator<Item = &PointOrder> {
        core::iter::once(&self.origin).chain(&self.regular).chain(&self.clusters)
    }
}

fn misclassified(p: &PointOrder, tau: f64) -> bool {
    match p.fit.class {
        OrderClass::One => p.grad_norm <= tau,
        OrderClass::GammaQ => p.grad_norm > tau,
        _ => false,
    }
}

fn point_order(s: &FieldSampler, x0: Point, radii: &[f64], gamma: f64) -> Result<PointOrder> {
    let fit = vanishing_order(s, x0, radii, gamma)?;
    let nd = if fit.beta.is_finite() { nondegeneracy(s, x0, fit.beta, radii)?.ratio } else { 0.0 };
    let (gx, gy) = s.grad(x0);
    Ok(PointOrder { position: x0, grad_norm: gx.hypot(gy), fit, nondeg_ratio: nd })
}

/// Regular contour points away from the vertex and the boundary, evenly
/// picked along the contour.
pub fn sample_regular(nodal: &NodalSet, h: f64, count: usize) -> Vec<Point> {
    let reach = 16.0 * h;
    let cands: Vec<Point> = nodal
        .regular_points
        .iter()
        .map(|p| p.position)
        .filter(|p| p.norm() >= 0.15 && p.norm() + reach <= 0.9)
        .collect();
    if cands.len() <= count {
        return cands;
    }
    (0..count).map(|i| cands[i * cands.len() / count]).collect()
}

pub fn order_report(sol: &DiscSolutions) -> Result<OrderReport> {
    let s = FieldSampler::new(&sol.k2);
    let h = sol.h();
    let g = sol.params.gamma_q();
    let nodal = extract_nodal(&s, sol.params.alpha_max(), &NodalOptions::default());
    let o_radii = origin_radii(h)?;
    let origin = point_order(&s, Point::ORIGIN, &o_radii, g)?;
    let origin_nondeg = nondegeneracy(&s, Point::ORIGIN, origin.fit.beta, &o_radii)?;
    let r_radii = regular_radii(h)?;
    let regular = sample_regular(&nodal, h, REGULAR_SAMPLES)
        .into_iter()
        .map(|p| point_order(&s, p, &r_radii, g))
        .collect::<Result<Vec<_>>>()?;
    let clusters = nodal
        .clusters
        .iter()
        .filter(|c| c.center.norm() > 4.0 * h)
        .filter(|c| s.grid().covers(c.center, o_radii[o_radii.len() - 1]))
        .map(|c| point_order(&s, c.center, &o_radii, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderReport { n: sol.n, nodal, origin, origin_nondeg, regular, clusters })
}

// ------------------------------------------------------------------ blow-ups

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub h: f64,
    pub scales: Vec<f64>,
    pub deviations: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_spread: f64,
    /// Deviations of `ρ^γ cos 2θ` at the same scales.
    pub control_deviations: Vec<f64>,
}

pub fn blowup_report(sol: &DiscSolutions, scales: &[f64]) -> Result<BlowupReport> {
    let g = sol.params.gamma_q();
    let opts = BlowupOptions::new(g);
    let seq = blowup(&FieldSampler::new(&sol.k2), Point::ORIGIN, scales, &opts)?;
    let control = ScalarField::from_fn(sol.k2.grid().clone(), |p| p.norm().powf(g) * (2.0 * p.angle()).cos());
    let cseq = blowup(&FieldSampler::new(&control), Point::ORIGIN, scales, &opts)?;
    Ok(BlowupReport {
        h: sol.h(),
        scales: scales.to_vec(),
        deviations: seq.deviations(),
        alphas: seq.alphas(),
        alpha_spread: seq.alpha_spread(),
        control_deviations: cseq.deviations(),
    })
}

// ---------------------------------------------------------- sector solution

#[derive(Debug, Clone, PartialEq)]
pub struct SectorReport {
    pub sign: SignPattern,
    pub energies: NonMinimality,
}

pub fn sector_report(sol: &DiscSolutions) -> SectorReport {
    SectorReport {
        sign: sign_pattern(&sol.k2, FLEET_K),
        energies: NonMinimality::new(&sol.k2, sol.one_signed_field(), &sol.params),
    }
}

// ---------------------------------------------------------- good solutions

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub entries: usize,
    pub max_residual: f64,
    pub increment_ratios: Vec<f64>,
    /// Geometric mean of the last five increment ratios.
    pub tail_ratio: f64,
    pub max_forcing: f64,
    pub final_penalty: f64,
}

pub const TAIL: usize = 5;

pub fn witness_report(fleet: &Fleet) -> Result<WitnessReport> {
    let seq = &fleet.fine()?.one_signed;
    let pen = fleet.penalized()?;
    Ok(WitnessReport {
        entries: seq.entries.len(),
        max_residual: seq.entries.iter().map(|e| e.residual_inf).fold(0.0, f64::max),
        increment_ratios: seq.increment_ratios(),
        tail_ratio: seq.tail_ratio(TAIL).unwrap_or(f64::NAN),
        max_forcing: pen.max_forcing(),
        final_penalty: pen.last().and_then(|e| e.penalty).unwrap_or(f64::NAN),
    })
}

// ---------------------------------------------------------- angular profile

#[derive(Debug, Clone, PartialEq)]
pub struct AngularReport {
    pub mu: f64,
    pub defect: f64,
    pub oracle_mu: f64,
    /// Sup-norm gap to the relaxation profile.
    pub oracle_gap: f64,
    /// Order fit of `ρ^γ φ(θ)` at the origin.
    pub synthetic: OrderFit,
}

pub fn angular_report(fleet: &Fleet) -> Result<AngularReport> {
    let prof = fleet.angular()?;
    let p = fleet.spec.params();
    let (oracle_mu, phi) = relax_angular_profile(FLEET_K, &p, ANGULAR_SAMPLES)?;
    let oracle_gap = phi.iter().zip(&prof.phi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let grid = Arc::new(DiscGrid::build_disc(fleet.spec.n)?);
    let h = grid.h();
    let field = homogeneous_field(prof, grid);
    let radii = geometric_radii(4.0 * h, 0.5, 10)?;
    let synthetic = vanishing_order(&FieldSampler::new(&field), Point::ORIGIN, &radii, gamma_q(p.q())?)?;
    Ok(AngularReport { mu: prof.mu, defect: prof.collocation_defect(), oracle_mu, oracle_gap, synthetic })
}

// ---------------------------------------------------------------- dead core

pub fn dead_core_table(fleet: &Fleet) -> Result<Vec<(String, DeadCore)>> {
    let mut out = Vec::new();
    for sol in [fleet.fine()?, fleet.coarse()?] {
        for (name, u) in named_fields(sol) {
            out.push((format!("{name}_n{}", sol.n), dead_core_check(u, &default_deltas(u))));
        }
    }
    let pen = fleet.penalized()?.last().expect("nonempty sequence");
    out.push((format!("penalized_n{}", fleet.spec.n), dead_core_check(&pen.u, &default_deltas(&pen.u))));
    Ok(out)
}
