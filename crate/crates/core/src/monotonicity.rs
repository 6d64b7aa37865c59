//! Spherical functionals around a centre `x₀` (with `N = 2`):
//!
//! ```text
//! H(r)      = ∫_{S_r} v²
//! D_t(r)    = ∫_{B_r} |∇v|² − (t/q) F(v)
//! N_t(r)    = r D_t / H
//! W_{γ,t}(r) = D_t / r^{2γ} − γ H / r^{1+2γ}
//! ```
//!
//! and residuals of the identities they satisfy on solutions: the
//! H-derivative formula, the spherical Pohozaev identity and the
//! D-derivative formula.

use alloc::vec::Vec;

use libm::{exp, log};

use crate::math::pow;

use crate::error::{Error, Result};
use crate::grid::{FieldSampler, Integrand, Point};
use crate::nonlinearity::ProblemParams;

/// Below this value of `H` the frequency is undefined.
pub const H_DEGENERATE: f64 = 1e-28;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub t_list: Vec<f64>,
    pub gt_pairs: Vec<(f64, f64)>,
    /// Step for radial centred differences; `None` uses the grid spacing.
    pub dr: Option<f64>,
}

impl ScanConfig {
    /// `t ∈ {0, q, 2}` and `(γ, t) ∈ {(1, q), (γ_q, q), (γ_q, 2)}`.
    pub fn defaults(p: &ProblemParams) -> Self {
        let q = p.q();
        let g = p.gamma_q();
        ScanConfig { t_list: alloc::vec![0.0, q, 2.0], gt_pairs: alloc::vec![(1.0, q), (g, q), (g, 2.0)], dr: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusRecord {
    pub r: f64,
    pub h: f64,
    /// `D_t` for each configured `t`.
    pub d: Vec<f64>,
    /// `N_t` for each `t`; `None` at degenerate radii.
    pub n: Vec<Option<f64>>,
    /// `W_{γ,t}` for each configured pair.
    pub w: Vec<f64>,
    /// Largest relative residual of `W = H/r^{1+2γ} (N_t − γ)` over the pairs.
    pub w_identity_residual: Option<f64>,
    pub pohozaev_residual: f64,
    pub dh_residual: f64,
    /// D-derivative residual at `t = q`.
    pub dd_residual: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyScan {
    pub center: Point,
    pub t_list: Vec<f64>,
    pub gt_pairs: Vec<(f64, f64)>,
    pub records: Vec<RadiusRecord>,
}

impl FrequencyScan {
    pub fn max_w_identity_residual(&self) -> f64 {
        self.records.iter().filter_map(|r| r.w_identity_residual).fold(0.0, f64::max)
    }

    /// Whether `N_t` (column `t_index`) is nondecreasing up to `slack`.
    pub fn frequency_nondecreasing(&self, t_index: usize, slack: f64) -> bool {
        let vals: Vec<f64> = self.records.iter().filter_map(|r| r.n[t_index]).collect();
        vals.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// `count` radii geometrically spaced in `[r_min, r_max]`.
pub fn geometric_radii(r_min: f64, r_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) || count < 2 {
        return Err(Error::InvalidParameter { name: "radii", reason: "need 0 < r_min < r_max and count >= 2".into() });
    }
    let (a, b) = (log(r_min), log(r_max));
    Ok((0..count).map(|i| exp(a + (b - a) * i as f64 / (count - 1) as f64)).collect())
}

fn check_radius(s: &FieldSampler, r: f64) -> Result<()> {
    if r < 4.0 * s.grid().h() * (1.0 - 1e-12) {
        return Err(Error::RadiusOutOfDomain { r });
    }
    Ok(())
}

pub fn h_functional(s: &FieldSampler, x0: Point, r: f64) -> Result<f64> {
    check_radius(s, r)?;
    s.circle_integral(x0, r, Integrand::ValueSq)
}

pub fn d_functional(s: &FieldSampler, p: &ProblemParams, x0: Point, r: f64, t: f64) -> Result<f64> {
    check_radius(s, r)?;
    let grad = s.ball_integral(x0, r, Integrand::GradSq)?;
    if t == 0.0 {
        return Ok(grad);
    }
    let pot = s.ball_integral(x0, r, Integrand::Potential(*p))?;
    Ok(grad - t / p.q() * pot)
}

/// `N_t = r D_t / H`, `None` when `H` is degenerate.
pub fn frequency(r: f64, h: f64, d: f64) -> Option<f64> {
    if h < H_DEGENERATE {
        None
    } else {
        Some(r * d / h)
    }
}

/// `W_{γ,t} = D_t / r^{2γ} − γ H / r^{1+2γ}`.
pub fn weiss(r: f64, h: f64, d: f64, gamma: f64) -> f64 {
    d / pow(r, 2.0 * gamma) - gamma * h / pow(r, 1.0 + 2.0 * gamma)
}

fn relative(a: f64, b: f64, scale: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        diff / scale
    }
}

/// `|H'(r) − H/r − 2∫_{S_r} v ∂_ν v|` normalized by `max(H/r, 1e−30)`,
/// with `H'` from a centred difference.
pub fn dh_residual(s: &FieldSampler, x0: Point, r: f64, dr: f64) -> Result<f64> {
    check_radius(s, r - dr)?;
    let hp = s.circle_integral(x0, r + dr, Integrand::ValueSq)?;
    let hm = s.circle_integral(x0, r - dr, Integrand::ValueSq)?;
    let h = s.circle_integral(x0, r, Integrand::ValueSq)?;
    let flux = s.circle_integral(x0, r, Integrand::ValueNormalDeriv)?;
    let lhs = (hp - hm) / (2.0 * dr);
    Ok((lhs - h / r - 2.0 * flux).abs() / (h / r).max(1e-30))
}

/// The solution form `H' = H/r + 2 D_q`, same normalization as [`dh_residual`].
pub fn dh_residual_equation(s: &FieldSampler, p: &ProblemParams, x0: Point, r: f64, dr: f64) -> Result<f64> {
    check_radius(s, r - dr)?;
    let hp = s.circle_integral(x0, r + dr, Integrand::ValueSq)?;
    let hm = s.circle_integral(x0, r - dr, Integrand::ValueSq)?;
    let h = s.circle_integral(x0, r, Integrand::ValueSq)?;
    let dq = d_functional(s, p, x0, r, p.q())?;
    let lhs = (hp - hm) / (2.0 * dr);
    Ok((lhs - h / r - 2.0 * dq).abs() / (h / r).max(1e-30))
}

/// Relative residual of
/// `∫_{S_r}|∇v|² = −(4/(qr))∫_{B_r} F + ∫_{S_r}(2 v_ν² + (2/q) F)`,
/// normalized by the left-hand side.
pub fn pohozaev_residual(s: &FieldSampler, p: &ProblemParams, x0: Point, r: f64) -> Result<f64> {
    check_radius(s, r)?;
    let q = p.q();
    let lhs = s.circle_integral(x0, r, Integrand::GradSq)?;
    let bulk = s.ball_integral(x0, r, Integrand::Potential(*p))?;
    let normal = s.circle_integral(x0, r, Integrand::NormalDerivSq)?;
    let surf = s.circle_integral(x0, r, Integrand::Potential(*p))?;
    let rhs = -4.0 / (q * r) * bulk + 2.0 * normal + 2.0 / q * surf;
    Ok(relative(lhs, rhs, lhs.abs()))
}

/// Relative residual between the centred difference of `D_t` and
/// `−(4/(qr))∫_{B_r} F + ∫_{S_r}(2 v_ν² + ((2−t)/q) F)`.
pub fn dd_residual(s: &FieldSampler, p: &ProblemParams, x0: Point, r: f64, t: f64, dr: f64) -> Result<f64> {
    check_radius(s, r - dr)?;
    let q = p.q();
    let lhs = (d_functional(s, p, x0, r + dr, t)? - d_functional(s, p, x0, r - dr, t)?) / (2.0 * dr);
    let bulk = s.ball_integral(x0, r, Integrand::Potential(*p))?;
    let normal = s.circle_integral(x0, r, Integrand::NormalDerivSq)?;
    let surf = s.circle_integral(x0, r, Integrand::Potential(*p))?;
    let rhs = -4.0 / (q * r) * bulk + 2.0 * normal + (2.0 - t) / q * surf;
    Ok(relative(lhs, rhs, lhs.abs().max(rhs.abs())))
}

/// Relative residual of `D_t = ∫_{S_r} v ∂_ν v − ((t−q)/q) ∫_{B_r} F`.
pub fn divergence_residual(s: &FieldSampler, p: &ProblemParams, x0: Point, r: f64, t: f64) -> Result<f64> {
    let d = d_functional(s, p, x0, r, t)?;
    let flux = s.circle_integral(x0, r, Integrand::ValueNormalDeriv)?;
    let bulk = s.ball_integral(x0, r, Integrand::Potential(*p))?;
    let rhs = flux - (t - p.q()) / p.q() * bulk;
    Ok(relative(d, rhs, d.abs().max(rhs.abs())))
}

/// Evaluates every functional and residual at each radius.
pub fn scan(s: &FieldSampler, p: &ProblemParams, center: Point, radii: &[f64], config: &ScanConfig) -> Result<FrequencyScan> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "radii", reason: "must be increasing".into() });
    }
    let dr = config.dr.unwrap_or(s.grid().h());
    let mut records = Vec::with_capacity(radii.len());
    for &r in radii {
        let h = h_functional(s, center, r)?;
        let d: Vec<f64> = config.t_list.iter().map(|&t| d_functional(s, p, center, r, t)).collect::<Result<_>>()?;
        let degenerate = h < H_DEGENERATE;
        let n: Vec<Option<f64>> = d.iter().map(|&dv| frequency(r, h, dv)).collect();
        let mut w = Vec::with_capacity(config.gt_pairs.len());
        let mut identity: Option<f64> = None;
        for &(gamma, t) in &config.gt_pairs {
            let dt = d_functional(s, p, center, r, t)?;
            let wv = weiss(r, h, dt, gamma);
            w.push(wv);
            if let Some(nt) = frequency(r, h, dt) {
                let recombined = h / pow(r, 1.0 + 2.0 * gamma) * (nt - gamma);
                let scale = (dt / pow(r, 2.0 * gamma)).abs().max((gamma * h / pow(r, 1.0 + 2.0 * gamma)).abs());
                let res = relative(wv, recombined, scale);
                identity = Some(identity.map_or(res, |m: f64| m.max(res)));
            }
        }
        records.push(RadiusRecord {
            r,
            h,
            d,
            n,
            w,
            w_identity_residual: identity,
            pohozaev_residual: pohozaev_residual(s, p, center, r)?,
            dh_residual: dh_residual(s, center, r, dr)?,
            dd_residual: dd_residual(s, p, center, r, p.q(), dr)?,
            degenerate,
        });
    }
    Ok(FrequencyScan { center, t_list: config.t_list.clone(), gt_pairs: config.gt_pairs.clone(), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiscGrid, ScalarField};
    use alloc::sync::Arc;
    use core::f64::consts::PI;

    fn sampler(n: usize, f: impl Fn(Point) -> f64) -> FieldSampler {
        FieldSampler::new(&ScalarField::from_fn(Arc::new(DiscGrid::build_disc(n).unwrap()), f))
    }

    fn harmonic() -> ProblemParams {
        ProblemParams::harmonic(0.5).unwrap()
    }

    #[test]
    fn linear_field_closed_forms() {
        let s = sampler(129, |p| p.x);
        let p = harmonic();
        let radii = geometric_radii(0.1, 0.6, 6).unwrap();
        let sc = scan(&s, &p, Point::ORIGIN, &radii, &ScanConfig { t_list: alloc::vec![0.0], gt_pairs: alloc::vec![(1.0, 0.0)], dr: None }).unwrap();
        let h = s.grid().h();
        for rec in &sc.records {
            assert!((rec.h - PI * rec.r.powi(3)).abs() < 10.0 * h * h * rec.r);
            let n0 = rec.n[0].unwrap();
            assert!((n0 - 1.0).abs() < 2.0 * h, "{n0}");
            assert!(rec.w[0].abs() < 2.0 * h, "{}", rec.w[0]);
            assert!(rec.w_identity_residual.unwrap() < 1e-10);
            assert!(rec.pohozaev_residual < 1e-3, "{}", rec.pohozaev_residual);
            assert!(rec.dh_residual <= 1.01 * h * h / (rec.r * rec.r), "{}", rec.dh_residual);
            assert!(rec.dd_residual < 2.0 * h, "{}", rec.dd_residual);
        }
    }

    #[test]
    fn zero_field_is_degenerate() {
        let s = sampler(65, |_| 0.0);
        let p = ProblemParams::new(0.5, 1.0, 1.0).unwrap();
        let sc = scan(&s, &p, Point::ORIGIN, &[0.2, 0.4], &ScanConfig::defaults(&p)).unwrap();
        for rec in &sc.records {
            assert!(rec.degenerate);
            assert_eq!(rec.h, 0.0);
            assert!(rec.d.iter().all(|d| *d == 0.0));
            assert!(rec.n.iter().all(|n| n.is_none()));
            assert_eq!(rec.pohozaev_residual, 0.0);
            assert_eq!(rec.dd_residual, 0.0);
        }
    }

    #[test]
    fn constant_field_dh() {
        let s = sampler(129, |_| 0.7);
        let r = dh_residual(&s, Point::ORIGIN, 0.4, s.grid().h()).unwrap();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn radius_below_floor_rejected() {
        let s = sampler(65, |p| p.x);
        assert!(h_functional(&s, Point::ORIGIN, 2.0 * s.grid().h()).is_err());
        assert!(h_functional(&s, Point::ORIGIN, 0.99).is_err());
    }

    #[test]
    fn harmonic_frequency_is_monotone() {
        let p = harmonic();
        let cfg = ScanConfig { t_list: alloc::vec![0.0], gt_pairs: alloc::vec![], dr: None };
        let radii = geometric_radii(0.1, 0.7, 12).unwrap();
        let fields: [(fn(Point) -> f64, f64); 3] = [
            (|p| p.x, 1.0),
            (|p| p.x * p.y, 2.0),
            (|p| p.x * p.x * p.x - 3.0 * p.x * p.y * p.y, 3.0),
        ];
        for (f, order) in fields {
            let s = sampler(257, f);
            let sc = scan(&s, &p, Point::new(0.05, -0.02), &radii, &cfg).unwrap();
            let h = s.grid().h();
            assert!(sc.frequency_nondecreasing(0, 10.0 * h * h * order));
            let sc0 = scan(&s, &p, Point::ORIGIN, &radii, &cfg).unwrap();
            for rec in &sc0.records {
                assert!((rec.n[0].unwrap() - order).abs() < 0.05 * order);
            }
        }
    }

    #[test]
    fn divergence_relation_on_harmonic_field() {
        let s = sampler(257, |p| p.x * p.y + p.x);
        let r = divergence_residual(&s, &harmonic(), Point::ORIGIN, 0.5, 0.0).unwrap();
        assert!(r < 1e-2, "{r}");
    }
}
