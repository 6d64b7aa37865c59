//! Nodal geometry and local growth: zero-level contours, vanishing orders
//! from spherical averages, non-degeneracy, blow-up rescalings and the
//! small-value area test.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use libm::{log, round, sqrt};

use crate::math::pow;

use crate::error::{Error, Result};
use crate::grid::{DiscGrid, FieldSampler, Integrand, NodeKind, Point, ScalarField};
use crate::linalg::linear_fit;
use crate::monotonicity::H_DEGENERATE;

/// `‖u‖_{x₀,r} = ( ∫_{B_r}|∇u|² + (1/r)∫_{S_r} u² )^{1/2}` in two dimensions.
pub fn scaled_norm(s: &FieldSampler, x0: Point, r: f64) -> Result<f64> {
    let grad = s.ball_integral(x0, r, Integrand::GradSq)?;
    let surf = s.circle_integral(x0, r, Integrand::ValueSq)?;
    Ok(sqrt((grad + surf / r).max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalPoint {
    pub position: Point,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularCluster {
    pub center: Point,
    pub members: usize,
    pub min_grad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalSet {
    pub segments: Vec<Vec<Point>>,
    pub regular_points: Vec<NodalPoint>,
    pub singular_points: Vec<NodalPoint>,
    /// Singular points grouped by proximity (within `3h`).
    pub clusters: Vec<SingularCluster>,
    pub tau_grad: f64,
    /// Largest `|u|` at a polyline vertex.
    pub max_vertex_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalOptions {
    /// Gradient threshold; `None` selects [`default_tau`].
    pub tau_grad: Option<f64>,
    /// Only cells within this distance of the origin are contoured;
    /// `None` keeps all cells at least `8h` inside the unit circle.
    pub max_radius: Option<f64>,
}

impl Default for NodalOptions {
    fn default() -> Self {
        NodalOptions { tau_grad: None, max_radius: None }
    }
}

/// `5 h^{α_max}` relative to the gradient scale: `0.05 · 5 h^{α_max} · g_max`,
/// where `g_max` is the largest gradient on the contour.
pub fn default_tau(h: f64, alpha_max: f64, g_max: f64) -> f64 {
    0.05 * 5.0 * pow(h, alpha_max) * g_max
}

type Key = (i64, i64);

fn key(p: Point, h: f64) -> Key {
    let s = (1u64 << 20) as f64 / h;
    (round(p.x * s) as i64, round(p.y * s) as i64)
}

/// Marching-squares contour of `u = 0` on cells whose corners are interior.
/// Nodes with value exactly zero lie on the contour; an edge with two zero
/// ends is part of it.
pub fn extract_nodal(s: &FieldSampler, alpha_max: f64, opts: &NodalOptions) -> NodalSet {
    let grid = s.grid();
    let n = grid.n();
    let h = grid.h();
    let u = s.field().values();
    let max_radius = opts.max_radius.unwrap_or(1.0 - 8.0 * h);
    let valid: Vec<bool> =
        (0..grid.len()).map(|i| grid.kind(i) == NodeKind::Interior && grid.point(i).norm() <= max_radius).collect();
    let sign = |i: usize| {
        let v = u[i];
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut points: BTreeMap<Key, Point> = BTreeMap::new();
    let mut edges: BTreeSet<(Key, Key)> = BTreeSet::new();
    let mut add = |a: Point, b: Point, points: &mut BTreeMap<Key, Point>| {
        let (ka, kb) = (key(a, h), key(b, h));
        if ka == kb {
            return;
        }
        points.insert(ka, a);
        points.insert(kb, b);
        edges.insert(if ka < kb { (ka, kb) } else { (kb, ka) });
    };
    let crossing = |a: usize, b: usize| -> Option<Point> {
        let (sa, sb) = (sign(a), sign(b));
        let (pa, pb) = (grid.point(a), grid.point(b));
        if sa * sb < 0 {
            let t = u[a] / (u[a] - u[b]);
            Some(Point::new(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)))
        } else if sa == 0 && sb != 0 {
            Some(pa)
        } else if sb == 0 && sa != 0 {
            Some(pb)
        } else {
            None
        }
    };
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let c = [j * n + i, j * n + i + 1, (j + 1) * n + i + 1, (j + 1) * n + i];
            if !c.iter().all(|&k| valid[k]) {
                continue;
            }
            let mut on_zero_edge = [false; 4];
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if u[a] == 0.0 && u[b] == 0.0 {
                    add(grid.point(a), grid.point(b), &mut points);
                    on_zero_edge[e] = true;
                    on_zero_edge[(e + 1) % 4] = true;
                }
            }
            let mut pts: Vec<(usize, Point)> = Vec::new();
            for e in 0..4 {
                if let Some(p) = crossing(c[e], c[(e + 1) % 4]) {
                    let covered = (0..4).any(|k| on_zero_edge[k] && key(grid.point(c[k]), h) == key(p, h));
                    if !covered && !pts.iter().any(|(_, q)| key(*q, h) == key(p, h)) {
                        pts.push((e, p));
                    }
                }
            }
            match pts.len() {
                2 => add(pts[0].1, pts[1].1, &mut points),
                4 => {
                    let centre = 0.25 * c.iter().map(|&k| u[k]).sum::<f64>();
                    let same_as_c0 = (centre >= 0.0) == (u[c[0]] >= 0.0);
                    if same_as_c0 {
                        add(pts[0].1, pts[1].1, &mut points);
                        add(pts[2].1, pts[3].1, &mut points);
                    } else {
                        add(pts[3].1, pts[0].1, &mut points);
                        add(pts[1].1, pts[2].1, &mut points);
                    }
                }
                3 => {
                    // a zero corner touching a sign change: join the two strict crossings
                    let strict: Vec<Point> = pts
                        .iter()
                        .filter(|(_, p)| !c.iter().any(|&k| key(grid.point(k), h) == key(*p, h)))
                        .map(|(_, p)| *p)
                        .collect();
                    if strict.len() == 2 {
                        add(strict[0], strict[1], &mut points);
                    }
                }
                _ => {}
            }
        }
    }
    let segments = assemble(&points, &edges);
    let mut g_max = 0.0f64;
    let mut vertices = Vec::with_capacity(points.len());
    let mut max_vertex_value = 0.0f64;
    for p in points.values() {
        let (gx, gy) = s.grad(*p);
        let g = sqrt(gx * gx + gy * gy);
        g_max = g_max.max(g);
        max_vertex_value = max_vertex_value.max(s.value(*p).abs());
        vertices.push(NodalPoint { position: *p, grad_norm: g });
    }
    let tau = opts.tau_grad.unwrap_or_else(|| default_tau(h, alpha_max, g_max));
    let (singular, regular): (Vec<NodalPoint>, Vec<NodalPoint>) = vertices.into_iter().partition(|v| v.grad_norm <= tau);
    let clusters = cluster(&singular, 3.0 * h);
    NodalSet { segments, regular_points: regular, singular_points: singular, clusters, tau_grad: tau, max_vertex_value }
}

fn assemble(points: &BTreeMap<Key, Point>, edges: &BTreeSet<(Key, Key)>) -> Vec<Vec<Point>> {
    let mut adj: BTreeMap<Key, Vec<Key>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut used: BTreeSet<(Key, Key)> = BTreeSet::new();
    let ord = |a: Key, b: Key| if a < b { (a, b) } else { (b, a) };
    let mut lines = Vec::new();
    let walk = |start: Key, next: Key, used: &mut BTreeSet<(Key, Key)>| {
        let mut line = vec![points[&start]];
        let (mut prev, mut cur) = (start, next);
        used.insert(ord(prev, cur));
        loop {
            line.push(points[&cur]);
            let nb = &adj[&cur];
            if nb.len() != 2 || cur == start {
                break;
            }
            let nxt = if nb[0] == prev { nb[1] } else { nb[0] };
            if used.contains(&ord(cur, nxt)) {
                break;
            }
            used.insert(ord(cur, nxt));
            prev = cur;
            cur = nxt;
        }
        line
    };
    let keys: Vec<Key> = adj.keys().copied().collect();
    for pass in 0..2 {
        for &k in &keys {
            let nb = adj[&k].clone();
            if pass == 0 && nb.len() == 2 {
                continue;
            }
            for m in nb {
                if !used.contains(&ord(k, m)) {
                    lines.push(walk(k, m, &mut used));
                }
            }
        }
    }
    lines
}

fn cluster(points: &[NodalPoint], radius: f64) -> Vec<SingularCluster> {
    let m = points.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..m {
        for b in a + 1..m {
            if points[a].position.dist(points[b].position) <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups
        .values()
        .map(|members| {
            let c = members.len() as f64;
            let x = members.iter().map(|&i| points[i].position.x).sum::<f64>() / c;
            let y = members.iter().map(|&i| points[i].position.y).sum::<f64>() / c;
            let g = members.iter().map(|&i| points[i].grad_norm).fold(f64::INFINITY, f64::min);
            SingularCluster { center: Point::new(x, y), members: members.len(), min_grad: g }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderClass {
    One,
    GammaQ,
    /// Well fitted but farther than the window from both spectrum values.
    OutsideSpectrum,
    /// Fit quality below the threshold.
    Unresolved,
    /// `H` vanished at some radius.
    Degenerate,
}

pub const ORDER_WINDOW: f64 = 0.1;
pub const MIN_FIT_R2: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub beta: f64,
    pub fit_r2: f64,
    pub class: OrderClass,
    pub radii: Vec<f64>,
}

/// Nearest spectrum value within `window`, given a fit of sufficient quality.
pub fn classify(beta: f64, fit_r2: f64, gamma: f64, window: f64) -> OrderClass {
    if !beta.is_finite() {
        return OrderClass::Degenerate;
    }
    if fit_r2 < MIN_FIT_R2 {
        return OrderClass::Unresolved;
    }
    let (d1, dg) = ((beta - 1.0).abs(), (beta - gamma).abs());
    if d1 <= dg && d1 <= window {
        OrderClass::One
    } else if dg < d1 && dg <= window {
        OrderClass::GammaQ
    } else {
        OrderClass::OutsideSpectrum
    }
}

fn check_radii(s: &FieldSampler, radii: &[f64]) -> Result<()> {
    if radii.len() < 8 {
        return Err(Error::InvalidParameter { name: "radii", reason: "at least 8 radii are needed".into() });
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "radii", reason: "must be increasing".into() });
    }
    if radii[0] < 4.0 * s.grid().h() * (1.0 - 1e-12) {
        return Err(Error::RadiusOutOfDomain { r: radii[0] });
    }
    Ok(())
}

/// Slope of `½ log(H/r)` against `log r`.
pub fn vanishing_order(s: &FieldSampler, x0: Point, radii: &[f64], gamma: f64) -> Result<OrderFit> {
    check_radii(s, radii)?;
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    for &r in radii {
        let h = s.circle_integral(x0, r, Integrand::ValueSq)?;
        if h < H_DEGENERATE {
            return Ok(OrderFit { beta: f64::INFINITY, fit_r2: 0.0, class: OrderClass::Degenerate, radii: radii.to_vec() });
        }
        xs.push(log(r));
        ys.push(0.5 * log(h / r));
    }
    let (beta, _, r2) = linear_fit(&xs, &ys);
    Ok(OrderFit { beta, fit_r2: r2, class: classify(beta, r2, gamma, ORDER_WINDOW), radii: radii.to_vec() })
}

/// Slope of `log ‖u‖_{x₀,r}` against `log r`, the H¹ variant of the order.
pub fn h1_order(s: &FieldSampler, x0: Point, radii: &[f64], gamma: f64) -> Result<OrderFit> {
    check_radii(s, radii)?;
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    for &r in radii {
        let norm = scaled_norm(s, x0, r)?;
        if norm * norm < H_DEGENERATE {
            return Ok(OrderFit { beta: f64::INFINITY, fit_r2: 0.0, class: OrderClass::Degenerate, radii: radii.to_vec() });
        }
        xs.push(log(r));
        ys.push(log(norm));
    }
    let (beta, _, r2) = linear_fit(&xs, &ys);
    Ok(OrderFit { beta, fit_r2: r2, class: classify(beta, r2, gamma, ORDER_WINDOW), radii: radii.to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nondegeneracy {
    /// `H(r) / r^{1+2β}` per radius.
    pub values: Vec<f64>,
    pub min: f64,
    pub at_r_max: f64,
    /// `min / max` over the radii.
    pub ratio: f64,
    /// `min ≥ 1e−6 · value at r_max`.
    pub passes: bool,
}

pub fn nondegeneracy(s: &FieldSampler, x0: Point, beta: f64, radii: &[f64]) -> Result<Nondegeneracy> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter { name: "radii", reason: "empty".into() });
    }
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| Ok(s.circle_integral(x0, r, Integrand::ValueSq)? / pow(r, 1.0 + 2.0 * beta)))
        .collect::<Result<_>>()?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(0.0, f64::max);
    let at_r_max = *values.last().unwrap();
    Ok(Nondegeneracy {
        ratio: if max > 0.0 { min / max } else { 0.0 },
        passes: at_r_max > 0.0 && min >= 1e-6 * at_r_max,
        min,
        at_r_max,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupOptions {
    pub gamma: f64,
    /// Nodes of the square reference grid.
    pub reference_n: usize,
    /// Half-width of the reference square; slightly above 1 so that the unit
    /// circle and its quadrature stencils stay inside.
    pub half_width: f64,
    /// Inner radius of the annulus used for the homogeneity deviation.
    pub inner_radius: f64,
    /// Smallest admissible scale in units of the source grid spacing.
    pub floor_cells: f64,
}

impl BlowupOptions {
    pub fn new(gamma: f64) -> Self {
        BlowupOptions { gamma, reference_n: 129, half_width: 1.125, inner_radius: 0.25, floor_cells: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupFrame {
    pub scale: f64,
    /// `‖u‖_{x₀,r}`
    pub norm: f64,
    /// `(r^γ / ‖u‖_{x₀,r})^{2/γ}`
    pub alpha: f64,
    /// `‖v‖_{0,1}` recomputed on the reference grid.
    pub normalization: f64,
    /// `‖x·∇v − γ v‖ / ‖v‖` in `L²` of the annulus.
    pub deviation: f64,
    pub field: FieldSampler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupSequence {
    pub center: Point,
    pub gamma: f64,
    pub frames: Vec<BlowupFrame>,
}

impl BlowupSequence {
    pub fn alphas(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.alpha).collect()
    }

    pub fn deviations(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.deviation).collect()
    }

    /// `max α / median α`.
    pub fn alpha_spread(&self) -> f64 {
        let mut a = self.alphas();
        if a.is_empty() {
            return f64::NAN;
        }
        a.sort_by(|x, y| x.total_cmp(y));
        let m = a.len();
        let median = if m % 2 == 1 { a[m / 2] } else { 0.5 * (a[m / 2 - 1] + a[m / 2]) };
        a[m - 1] / median
    }

    /// Deviations do not increase as the scale shrinks, up to `slack`.
    pub fn deviations_nonincreasing(&self, slack: f64) -> bool {
        self.deviations().windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Rescales `u` around `x0` at each scale onto a reference grid:
/// `v(x) = u(x₀ + r x) / ‖u‖_{x₀,r}` with `∇v(x) = r ∇u(x₀ + r x) / ‖u‖_{x₀,r}`.
pub fn blowup(s: &FieldSampler, x0: Point, scales: &[f64], opts: &BlowupOptions) -> Result<BlowupSequence> {
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter { name: "scales", reason: "must be decreasing".into() });
    }
    let floor = opts.floor_cells * s.grid().h();
    let reference = Arc::new(DiscGrid::build_square(opts.reference_n, opts.half_width)?);
    let mut frames = Vec::with_capacity(scales.len());
    for &r in scales {
        if r < floor * (1.0 - 1e-12) {
            return Err(Error::ScaleBelowResolution { scale: r, floor });
        }
        let norm = scaled_norm(s, x0, r)?;
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter { name: "scales", reason: alloc::format!("field vanishes near the centre at scale {r}") });
        }
        let len = reference.len();
        let (mut v, mut gx, mut gy) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for idx in 0..len {
            let y = reference.point(idx);
            let at = Point::new(x0.x + r * y.x, x0.y + r * y.y);
            v[idx] = s.value(at) / norm;
            let (a, b) = s.grad(at);
            gx[idx] = r * a / norm;
            gy[idx] = r * b / norm;
        }
        let field = FieldSampler::with_gradient(ScalarField::from_values(reference.clone(), v)?, gx, gy)?;
        let normalization = scaled_norm(&field, Point::ORIGIN, 1.0)?;
        let (mut num, mut den) = (0.0, 0.0);
        for &idx in reference.interior() {
            let y = reference.point(idx);
            let rho = y.norm();
            if rho < opts.inner_radius || rho > 1.0 {
                continue;
            }
            let val = field.field().values()[idx];
            let radial = y.x * field.grad_x()[idx] + y.y * field.grad_y()[idx];
            let d = radial - opts.gamma * val;
            num += d * d;
            den += val * val;
        }
        let deviation = if den > 0.0 { sqrt(num / den) } else { f64::INFINITY };
        frames.push(BlowupFrame {
            scale: r,
            norm,
            alpha: pow(pow(r, opts.gamma) / norm, 2.0 / opts.gamma),
            normalization,
            deviation,
            field,
        });
    }
    Ok(BlowupSequence { center: x0, gamma: opts.gamma, frames })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadCore {
    pub deltas: Vec<f64>,
    /// Area fraction of `{|u| < δ}` in the discrete domain.
    pub fractions: Vec<f64>,
    /// Log-log slope of the fractions against δ.
    pub slope: f64,
    pub fit_r2: f64,
    /// `u ≡ 0`.
    pub trivial: bool,
    pub passes: bool,
}

/// Minimum log-log slope accepted by [`dead_core_check`].
pub const DEAD_CORE_SLOPE: f64 = 0.9;

/// Sub-samples per cell axis for the level-set area.
const AREA_SAMPLES: usize = 8;

/// Default thresholds: `sup|u| · 2^{-i}` for `i = 4..=9`.
pub fn default_deltas(u: &ScalarField) -> Vec<f64> {
    let m = u.sup_norm();
    (4..=9).map(|i| m * pow(2.0, -(i as f64))).collect()
}

/// Area of `{|u| < δ}` over cells with no exterior corner, from the bilinear
/// interpolant sampled on a regular sub-lattice of each cell.
pub fn dead_core_check(u: &ScalarField, deltas: &[f64]) -> DeadCore {
    let grid = u.grid();
    let n = grid.n();
    let v = u.values();
    let mut samples: Vec<f64> = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let c = [j * n + i, j * n + i + 1, (j + 1) * n + i, (j + 1) * n + i + 1];
            if c.iter().any(|&k| grid.kind(k) == NodeKind::Exterior) {
                continue;
            }
            for b in 0..AREA_SAMPLES {
                let ty = (b as f64 + 0.5) / AREA_SAMPLES as f64;
                for a in 0..AREA_SAMPLES {
                    let tx = (a as f64 + 0.5) / AREA_SAMPLES as f64;
                    let w = (1.0 - tx) * (1.0 - ty) * v[c[0]]
                        + tx * (1.0 - ty) * v[c[1]]
                        + (1.0 - tx) * ty * v[c[2]]
                        + tx * ty * v[c[3]];
                    samples.push(w.abs());
                }
            }
        }
    }
    let total = samples.len().max(1) as f64;
    let fractions: Vec<f64> =
        deltas.iter().map(|&d| samples.iter().filter(|&&w| w < d).count() as f64 / total).collect();
    let trivial = u.is_zero();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        deltas.iter().zip(&fractions).filter(|(d, f)| **d > 0.0 && **f > 0.0).map(|(d, f)| (log(*d), log(*f))).unzip();
    let (slope, r2) = if xs.len() >= 2 && !trivial {
        let (a, _, r2) = linear_fit(&xs, &ys);
        (a, r2)
    } else {
        (f64::NAN, 0.0)
    };
    DeadCore {
        deltas: deltas.to_vec(),
        passes: !trivial && slope >= DEAD_CORE_SLOPE,
        fractions,
        slope,
        fit_r2: r2,
        trivial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotonicity::geometric_radii;
    use core::f64::consts::PI;

    fn sampler(n: usize, f: impl Fn(Point) -> f64) -> FieldSampler {
        FieldSampler::new(&ScalarField::from_fn(Arc::new(DiscGrid::build_disc(n).unwrap()), f))
    }

    const ALPHA: f64 = 1.0 / 3.0;

    #[test]
    fn scaled_norm_closed_forms() {
        let z = sampler(65, |_| 0.0);
        assert_eq!(scaled_norm(&z, Point::ORIGIN, 0.3).unwrap(), 0.0);
        let s = sampler(257, |p| p.x);
        let r = 0.4;
        let v = scaled_norm(&s, Point::ORIGIN, r).unwrap();
        assert!((v - sqrt(2.0 * PI) * r).abs() < 5.0 * s.grid().h() * r, "{v}");
        // u(c·) at radius r equals u at radius c r for a homogeneous harmonic
        let c = 1.5;
        let sc = sampler(257, move |p| c * c * p.x * p.y);
        let base = sampler(257, |p| p.x * p.y);
        let a = scaled_norm(&sc, Point::ORIGIN, 0.3).unwrap();
        let b = scaled_norm(&base, Point::ORIGIN, 0.45).unwrap();
        assert!((a - b).abs() < 0.02 * b, "{a} {b}");
    }

    #[test]
    fn linear_nodal_line() {
        let s = sampler(65, |p| p.x);
        let ns = extract_nodal(&s, ALPHA, &NodalOptions::default());
        assert_eq!(ns.segments.len(), 1);
        assert!(ns.singular_points.is_empty());
        assert!(ns.max_vertex_value < 1e-14);
        for p in &ns.segments[0] {
            assert!(p.x.abs() < 1e-14);
        }
    }

    #[test]
    fn product_nodal_cross() {
        let s = sampler(65, |p| p.x * p.y);
        let ns = extract_nodal(&s, ALPHA, &NodalOptions::default());
        assert_eq!(ns.segments.len(), 4);
        assert_eq!(ns.clusters.len(), 1);
        assert!(ns.clusters[0].center.norm() < 1e-12);
        for seg in &ns.segments {
            for p in seg {
                assert!(p.x.abs() < 1e-14 || p.y.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tilted_line_vertices_on_contour() {
        let s = sampler(129, |p| p.x + 0.37 * p.y - 0.05);
        let ns = extract_nodal(&s, ALPHA, &NodalOptions::default());
        assert_eq!(ns.segments.len(), 1);
        assert!(ns.max_vertex_value < 1e-12);
        assert!(ns.singular_points.is_empty());
    }

    #[test]
    fn orders_of_harmonic_controls() {
        let radii = geometric_radii(0.05, 0.5, 10).unwrap();
        let g = 4.0 / 3.0;
        let s = sampler(257, |p| p.x);
        let f = vanishing_order(&s, Point::ORIGIN, &radii, g).unwrap();
        assert!((f.beta - 1.0).abs() < 0.05 && f.fit_r2 > 0.99);
        assert_eq!(f.class, OrderClass::One);
        let o = h1_order(&s, Point::ORIGIN, &radii, g).unwrap();
        assert!((o.beta - 1.0).abs() < 0.05);
        let s2 = sampler(257, |p| p.x * p.y);
        let f2 = vanishing_order(&s2, Point::ORIGIN, &radii, g).unwrap();
        assert!((f2.beta - 2.0).abs() < 0.05);
        assert_eq!(f2.class, OrderClass::OutsideSpectrum);
        let z = sampler(65, |_| 0.0);
        let rz = geometric_radii(0.2, 0.5, 8).unwrap();
        assert_eq!(vanishing_order(&z, Point::ORIGIN, &rz, g).unwrap().class, OrderClass::Degenerate);
        assert!(vanishing_order(&s, Point::ORIGIN, &radii[..5], g).is_err());
    }

    #[test]
    fn classification_rules() {
        let g = 4.0 / 3.0;
        assert_eq!(classify(1.02, 0.999, g, 0.1), OrderClass::One);
        assert_eq!(classify(1.30, 0.999, g, 0.1), OrderClass::GammaQ);
        assert_eq!(classify(1.30, 0.9, g, 0.1), OrderClass::Unresolved);
        assert_eq!(classify(1.6, 0.999, g, 0.1), OrderClass::OutsideSpectrum);
        assert_eq!(classify(f64::INFINITY, 0.0, g, 0.1), OrderClass::Degenerate);
    }

    #[test]
    fn nondegeneracy_of_linear_field() {
        let s = sampler(257, |p| p.x);
        let radii = geometric_radii(0.05, 0.5, 10).unwrap();
        let nd = nondegeneracy(&s, Point::ORIGIN, 1.0, &radii).unwrap();
        for v in &nd.values {
            assert!((v - PI).abs() < 1e-3);
        }
        assert!(nd.ratio > 0.999 && nd.passes);
        let z = sampler(65, |_| 0.0);
        let nz = nondegeneracy(&z, Point::ORIGIN, 1.0, &[0.2, 0.3]).unwrap();
        assert!(!nz.passes);
    }

    #[test]
    fn blowup_of_homogeneous_fields() {
        let g = 4.0 / 3.0;
        let s = sampler(257, move |p| pow(p.norm(), g) * libm::cos(2.0 * p.angle()));
        let h = s.grid().h();
        let bs = blowup(&s, Point::ORIGIN, &[0.5, 0.25, 0.125, 0.0625], &BlowupOptions::new(g)).unwrap();
        for f in &bs.frames {
            assert!(f.deviation <= 3.0 * h, "{} {}", f.scale, f.deviation);
            assert!((f.normalization - 1.0).abs() <= 5e-3, "{}", f.normalization);
        }
        assert!(bs.alpha_spread() <= 1.0 + 1e-6 + 3.0 * h);
        let lin = sampler(257, |p| p.x);
        let bl = blowup(&lin, Point::new(0.0, 0.1), &[0.4, 0.2, 0.1], &BlowupOptions::new(1.0)).unwrap();
        for f in &bl.frames {
            assert!(f.deviation <= 3.0 * h, "{}", f.deviation);
        }
        assert!(matches!(
            blowup(&s, Point::ORIGIN, &[4.0 * h], &BlowupOptions::new(g)),
            Err(Error::ScaleBelowResolution { .. })
        ));
    }

    #[test]
    fn dead_core_controls() {
        let s = sampler(257, |p| p.x);
        let deltas = [0.02, 0.04, 0.08, 0.16];
        let dc = dead_core_check(s.field(), &deltas);
        assert!((dc.slope - 1.0).abs() < 0.1, "{}", dc.slope);
        assert!(dc.passes);
        for (d, f) in deltas.iter().zip(&dc.fractions) {
            assert!((f - 4.0 * d / PI).abs() < 0.1 * f + 0.01, "{f}");
        }
        let z = sampler(65, |_| 0.0);
        let dz = dead_core_check(z.field(), &deltas);
        assert!(dz.trivial && !dz.passes);
        assert!(dz.fractions.iter().all(|f| *f == 1.0));
    }
}
