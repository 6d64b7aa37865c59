//! Masked Cartesian discretization of the unit disc, of the sectors
//! `S_k = {0 < ρ < 1, 0 < θ < π/k}` and of squares, together with the
//! stencils and quadratures the rest of the crate is built on.
//!
//! Node classification: a node is *interior* when it lies in the open domain
//! and all four stencil neighbours lie in its closure; the remaining nodes of
//! the closure, plus open nodes next to the outside, form the *boundary band*
//! carrying homogeneous Dirichlet data. Everything else is *exterior*.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{ceil, cos, floor, sin, sqrt};

use crate::error::{Error, Result};
use crate::nonlinearity::ProblemParams;

/// Smallest admissible node count for disc and sector grids.
pub const MIN_NODES: usize = 33;

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.x * self.x + self.y * self.y)
    }

    pub fn dist(&self, other: Point) -> f64 {
        Point::new(self.x - other.x, self.y - other.y).norm()
    }

    pub fn angle(&self) -> f64 {
        let t = libm::atan2(self.y, self.x);
        if t < 0.0 {
            t + 2.0 * PI
        } else {
            t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disc,
    Sector { k: u32 },
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrid {
    n: usize,
    h: f64,
    half_width: f64,
    shape: Shape,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
}

impl DiscGrid {
    /// Unit disc on an `n × n` lattice over `[-1, 1]²`.
    pub fn build_disc(n: usize) -> Result<Self> {
        check_node_count(n)?;
        Ok(Self::classify(n, 1.0, Shape::Disc))
    }

    /// Sector `S_k` of the unit disc.
    pub fn build_sector(n: usize, k: u32) -> Result<Self> {
        check_node_count(n)?;
        if k == 0 {
            return Err(Error::InvalidParameter { name: "k", reason: "sector order must be >= 1".into() });
        }
        Ok(Self::classify(n, 1.0, Shape::Sector { k }))
    }

    /// Square `[-half_width, half_width]²`; used for rescaled reference fields.
    pub fn build_square(n: usize, half_width: f64) -> Result<Self> {
        if n < 5 || n % 2 == 0 {
            return Err(Error::InvalidGrid(alloc::format!("square grid needs odd n >= 5, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter { name: "half_width", reason: "must be positive".into() });
        }
        Ok(Self::classify(n, half_width, Shape::Square))
    }

    fn classify(n: usize, half_width: f64, shape: Shape) -> Self {
        let h = 2.0 * half_width / (n - 1) as f64;
        let tol = SNAP * h;
        let region = Region::new(shape, half_width, tol);
        let mut open = vec![false; n * n];
        let mut closed = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let p = Point::new(-half_width + i as f64 * h, -half_width + j as f64 * h);
                open[j * n + i] = region.open(p);
                closed[j * n + i] = region.closed(p);
            }
        }
        let mut kinds = vec![NodeKind::Exterior; n * n];
        let mut interior = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                if open[idx] {
                    let inner = i > 0
                        && j > 0
                        && i + 1 < n
                        && j + 1 < n
                        && closed[idx - 1]
                        && closed[idx + 1]
                        && closed[idx - n]
                        && closed[idx + n];
                    if inner {
                        kinds[idx] = NodeKind::Interior;
                        interior.push(idx);
                    } else {
                        kinds[idx] = NodeKind::Boundary;
                    }
                } else if closed[idx] {
                    kinds[idx] = NodeKind::Boundary;
                }
            }
        }
        DiscGrid { n, h, half_width, shape, kinds, interior }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        Point::new(-self.half_width + i as f64 * self.h, -self.half_width + j as f64 * self.h)
    }

    /// Index of the centre node `(0, 0)`.
    pub fn origin_index(&self) -> usize {
        let c = (self.n - 1) / 2;
        self.index(c, c)
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// Interior node indices in row-major order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Boundary).count()
    }

    /// Interior plus boundary-band nodes.
    pub fn mask_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k != NodeKind::Exterior).count()
    }

    /// Lower-left lattice cell containing `p` and the local coordinates in it.
    fn locate(&self, p: Point) -> Option<(usize, usize, f64, f64)> {
        let fx = (p.x + self.half_width) / self.h;
        let fy = (p.y + self.half_width) / self.h;
        let (mut i, mut tx) = split(fx);
        let (mut j, mut ty) = split(fy);
        if i < 0 || j < 0 {
            return None;
        }
        // A point on the last lattice line belongs to the last cell.
        if i as usize == self.n - 1 && tx == 0.0 {
            i -= 1;
            tx = 1.0;
        }
        if j as usize == self.n - 1 && ty == 0.0 {
            j -= 1;
            ty = 1.0;
        }
        if i as usize + 1 >= self.n || j as usize + 1 >= self.n {
            return None;
        }
        Some((i as usize, j as usize, tx, ty))
    }

    /// Bilinear interpolation of nodal `values` at `p`; zero outside the lattice.
    pub fn bilinear(&self, values: &[f64], p: Point) -> f64 {
        match self.locate(p) {
            None => 0.0,
            Some((i, j, tx, ty)) => {
                let a = self.index(i, j);
                let v00 = values[a];
                let v10 = values[a + 1];
                let v01 = values[a + self.n];
                let v11 = values[a + self.n + 1];
                let lo = if tx == 0.0 { v00 } else if tx == 1.0 { v10 } else { v00 + tx * (v10 - v00) };
                if ty == 0.0 {
                    return lo;
                }
                let hi = if tx == 0.0 { v01 } else if tx == 1.0 { v11 } else { v01 + tx * (v11 - v01) };
                if ty == 1.0 {
                    hi
                } else {
                    lo + ty * (hi - lo)
                }
            }
        }
    }

    /// Every node within `radius` of `center` is interior.
    pub fn covers(&self, center: Point, radius: f64) -> bool {
        let r2 = radius * radius;
        let (lo_i, hi_i) = self.span(center.x, radius);
        let (lo_j, hi_j) = self.span(center.y, radius);
        if lo_i < 0 || lo_j < 0 || hi_i >= self.n as i64 || hi_j >= self.n as i64 {
            return false;
        }
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                let idx = self.index(i as usize, j as usize);
                let p = self.point(idx);
                let dx = p.x - center.x;
                let dy = p.y - center.y;
                if dx * dx + dy * dy <= r2 && self.kinds[idx] != NodeKind::Interior {
                    return false;
                }
            }
        }
        true
    }

    fn span(&self, c: f64, radius: f64) -> (i64, i64) {
        let lo = floor((c - radius + self.half_width) / self.h) as i64;
        let hi = ceil((c + radius + self.half_width) / self.h) as i64;
        (lo, hi)
    }

    fn check_disc(&self, center: Point, r: f64) -> Result<()> {
        if !(r.is_finite() && r > 0.0) || !self.covers(center, r + 3.0 * self.h) {
            return Err(Error::RadiusOutOfDomain { r });
        }
        Ok(())
    }
}

fn split(f: f64) -> (i64, f64) {
    let base = floor(f);
    let mut t = f - base;
    let mut i = base as i64;
    if t < SNAP {
        t = 0.0;
    } else if t > 1.0 - SNAP {
        t = 0.0;
        i += 1;
    }
    (i, t)
}

fn check_node_count(n: usize) -> Result<()> {
    if n % 2 == 0 {
        return Err(Error::InvalidGrid(alloc::format!("node count must be odd, got {n}")));
    }
    if n < MIN_NODES {
        return Err(Error::InvalidGrid(alloc::format!("node count must be >= {MIN_NODES}, got {n}")));
    }
    Ok(())
}

struct Region {
    shape: Shape,
    half_width: f64,
    tol: f64,
    ray: Point,
}

impl Region {
    fn new(shape: Shape, half_width: f64, tol: f64) -> Self {
        let ray = match shape {
            Shape::Sector { k } => {
                let a = PI / k as f64;
                Point::new(cos(a), sin(a))
            }
            _ => Point::new(1.0, 0.0),
        };
        Region { shape, half_width, tol, ray }
    }

    fn open(&self, p: Point) -> bool {
        match self.shape {
            Shape::Disc => p.x * p.x + p.y * p.y < 1.0 - self.tol,
            Shape::Square => p.x.abs() < self.half_width - self.tol && p.y.abs() < self.half_width - self.tol,
            Shape::Sector { k } => {
                if p.x * p.x + p.y * p.y >= 1.0 - self.tol || p.y <= self.tol {
                    return false;
                }
                k == 1 || p.x * self.ray.y - p.y * self.ray.x > self.tol
            }
        }
    }

    fn closed(&self, p: Point) -> bool {
        match self.shape {
            Shape::Disc => p.x * p.x + p.y * p.y <= 1.0 + self.tol,
            Shape::Square => p.x.abs() <= self.half_width + self.tol && p.y.abs() <= self.half_width + self.tol,
            Shape::Sector { k } => {
                if p.x * p.x + p.y * p.y > 1.0 + self.tol || p.y < -self.tol {
                    return false;
                }
                k == 1 || p.x * self.ray.y - p.y * self.ray.x >= -self.tol
            }
        }
    }
}

/// Nodal data on a grid; exactly zero off the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<DiscGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<DiscGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        ScalarField { grid, values }
    }

    /// Samples `f` at interior nodes.
    pub fn from_fn(grid: Arc<DiscGrid>, f: impl Fn(Point) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for &idx in grid.interior() {
            values[idx] = f(grid.point(idx));
        }
        ScalarField { grid, values }
    }

    /// Wraps raw nodal values; entries off the interior are reset to zero.
    pub fn from_values(grid: Arc<DiscGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "values", reason: "non-finite entry".into() });
        }
        for (v, k) in values.iter_mut().zip(grid.kinds()) {
            if *k != NodeKind::Interior {
                *v = 0.0;
            }
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn value_at(&self, p: Point) -> f64 {
        self.grid.bilinear(&self.values, p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Five-point Laplacian at interior nodes, zero elsewhere.
    pub fn laplacian(&self) -> ScalarField {
        let n = self.grid.n;
        let inv_h2 = 1.0 / (self.grid.h * self.grid.h);
        let u = &self.values;
        let mut out = vec![0.0; u.len()];
        for &idx in self.grid.interior() {
            out[idx] = (u[idx - 1] + u[idx + 1] + u[idx - n] + u[idx + n] - 4.0 * u[idx]) * inv_h2;
        }
        ScalarField { grid: self.grid.clone(), values: out }
    }

    /// Centred-difference gradient on the whole lattice (one-sided on its edge).
    pub fn gradient(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        let h = self.grid.h;
        let u = &self.values;
        let mut gx = vec![0.0; u.len()];
        let mut gy = vec![0.0; u.len()];
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                gx[idx] = if i == 0 {
                    (u[idx + 1] - u[idx]) / h
                } else if i == n - 1 {
                    (u[idx] - u[idx - 1]) / h
                } else {
                    (u[idx + 1] - u[idx - 1]) / (2.0 * h)
                };
                gy[idx] = if j == 0 {
                    (u[idx + n] - u[idx]) / h
                } else if j == n - 1 {
                    (u[idx] - u[idx - n]) / h
                } else {
                    (u[idx + n] - u[idx - n]) / (2.0 * h)
                };
            }
        }
        (gx, gy)
    }

    /// `u ∘ R⁻¹` where `R` is the rotation by `π/k`.
    pub fn rotated(&self, k: u32) -> ScalarField {
        let a = PI / k as f64;
        let (c, s) = (cos(a), sin(a));
        let grid = self.grid.clone();
        let mut values = vec![0.0; grid.len()];
        for &idx in grid.interior() {
            let p = grid.point(idx);
            let back = Point::new(c * p.x + s * p.y, -s * p.x + c * p.y);
            values[idx] = grid.bilinear(&self.values, back);
        }
        ScalarField { grid, values }
    }
}

/// Quantities that can be integrated over circles and balls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    /// `u²`
    ValueSq,
    /// `|∇u|²`
    GradSq,
    /// `(∂_ν u)²` with ν the outer normal of the circle (radial direction in balls)
    NormalDerivSq,
    /// `u ∂_ν u`
    ValueNormalDeriv,
    /// `F(u)`
    Potential(ProblemParams),
    /// `u g(u)` with the params' ε
    ValueSource(ProblemParams),
}

impl Integrand {
    fn eval(&self, u: f64, gx: f64, gy: f64, nx: f64, ny: f64) -> f64 {
        match self {
            Integrand::ValueSq => u * u,
            Integrand::GradSq => gx * gx + gy * gy,
            Integrand::NormalDerivSq => {
                let d = gx * nx + gy * ny;
                d * d
            }
            Integrand::ValueNormalDeriv => u * (gx * nx + gy * ny),
            Integrand::Potential(p) => p.potential(u),
            Integrand::ValueSource(p) => u * p.source(u),
        }
    }
}

/// A field together with nodal gradients, sampled bilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSampler {
    field: ScalarField,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

/// Sub-samples per axis used for cells cut by a ball's boundary.
const CUT_CELL_SAMPLES: usize = 16;

impl FieldSampler {
    pub fn new(field: &ScalarField) -> Self {
        let (gx, gy) = field.gradient();
        FieldSampler { field: field.clone(), gx, gy }
    }

    /// Uses externally supplied nodal gradients.
    pub fn with_gradient(field: ScalarField, gx: Vec<f64>, gy: Vec<f64>) -> Result<Self> {
        if gx.len() != field.values.len() || gy.len() != field.values.len() {
            return Err(Error::GridMismatch);
        }
        Ok(FieldSampler { field, gx, gy })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn grid(&self) -> &DiscGrid {
        &self.field.grid
    }

    pub fn grad_x(&self) -> &[f64] {
        &self.gx
    }

    pub fn grad_y(&self) -> &[f64] {
        &self.gy
    }

    pub fn value(&self, p: Point) -> f64 {
        self.field.grid.bilinear(&self.field.values, p)
    }

    pub fn grad(&self, p: Point) -> (f64, f64) {
        (self.field.grid.bilinear(&self.gx, p), self.field.grid.bilinear(&self.gy, p))
    }

    /// Trapezoidal rule on `S_r(x0)` with `max(64, ⌈2πr/h⌉)` nodes.
    pub fn circle_integral(&self, x0: Point, r: f64, integrand: Integrand) -> Result<f64> {
        let grid = &*self.field.grid;
        grid.check_disc(x0, r)?;
        let m = circle_nodes(r, grid.h);
        let mut acc = 0.0;
        for j in 0..m {
            let t = 2.0 * PI * j as f64 / m as f64;
            let (nx, ny) = (cos(t), sin(t));
            let p = Point::new(x0.x + r * nx, x0.y + r * ny);
            let u = self.value(p);
            let (gx, gy) = self.grad(p);
            acc += integrand.eval(u, gx, gy, nx, ny);
        }
        Ok(acc * 2.0 * PI * r / m as f64)
    }

    /// Dual-cell midpoint rule on `B_r(x0)`; cells cut by the circle are
    /// weighted by sub-sampling the bilinear interpolant of the nodal integrand.
    pub fn ball_integral(&self, x0: Point, r: f64, integrand: Integrand) -> Result<f64> {
        let grid = &*self.field.grid;
        grid.check_disc(x0, r)?;
        let n = grid.n;
        let h = grid.h;
        let (lo_i, hi_i) = grid.span(x0.x, r + h);
        let (lo_j, hi_j) = grid.span(x0.y, r + h);
        let (lo_i, lo_j) = (lo_i as usize, lo_j as usize);
        let (hi_i, hi_j) = (hi_i as usize, hi_j as usize);
        let w = hi_i - lo_i + 1;
        let node_value = |idx: usize| {
            let p = grid.point(idx);
            let d = p.dist(x0);
            let (nx, ny) = if d > 0.0 { ((p.x - x0.x) / d, (p.y - x0.y) / d) } else { (0.0, 0.0) };
            integrand.eval(self.field.values[idx], self.gx[idx], self.gy[idx], nx, ny)
        };
        let mut local = vec![0.0; w * (hi_j - lo_j + 1)];
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                local[(j - lo_j) * w + (i - lo_i)] = node_value(j * n + i);
            }
        }
        let at = |i: usize, j: usize| local[(j - lo_j) * w + (i - lo_i)];
        let half = 0.5 * h;
        let sub = h / CUT_CELL_SAMPLES as f64;
        let mut acc = 0.0;
        for j in lo_j + 1..hi_j {
            for i in lo_i + 1..hi_i {
                let p = grid.point(j * n + i);
                let dx = (p.x - x0.x).abs();
                let dy = (p.y - x0.y).abs();
                let far = sqrt((dx + half) * (dx + half) + (dy + half) * (dy + half));
                if far <= r {
                    acc += h * h * at(i, j);
                    continue;
                }
                let nx = (dx - half).max(0.0);
                let ny = (dy - half).max(0.0);
                if nx * nx + ny * ny >= r * r {
                    continue;
                }
                for b in 0..CUT_CELL_SAMPLES {
                    let sy = p.y - half + (b as f64 + 0.5) * sub;
                    for a in 0..CUT_CELL_SAMPLES {
                        let sx = p.x - half + (a as f64 + 0.5) * sub;
                        let ex = sx - x0.x;
                        let ey = sy - x0.y;
                        if ex * ex + ey * ey >= r * r {
                            continue;
                        }
                        // bilinear interpolation of nodal integrand values
                        let ox = sx - p.x;
                        let oy = sy - p.y;
                        let (i0, tx) = if ox >= 0.0 { (i, ox / h) } else { (i - 1, 1.0 + ox / h) };
                        let (j0, ty) = if oy >= 0.0 { (j, oy / h) } else { (j - 1, 1.0 + oy / h) };
                        let v = (1.0 - tx) * (1.0 - ty) * at(i0, j0)
                            + tx * (1.0 - ty) * at(i0 + 1, j0)
                            + (1.0 - tx) * ty * at(i0, j0 + 1)
                            + tx * ty * at(i0 + 1, j0 + 1);
                        acc += sub * sub * v;
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// Number of trapezoidal nodes on a circle of radius `r` at spacing `h`.
pub fn circle_nodes(r: f64, h: f64) -> usize {
    (ceil(2.0 * PI * r / h) as usize).max(64)
}
