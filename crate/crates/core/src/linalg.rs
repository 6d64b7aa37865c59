//! Sparse five-point operators on the interior unknowns of a grid and a
//! preconditioned conjugate-gradient solver for them.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::DiscGrid;

pub(crate) const NONE: usize = usize::MAX;

/// Interior unknowns of a grid with their stencil neighbours
/// (west, east, south, north); `NONE` marks a Dirichlet neighbour.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub nodes: Vec<usize>,
    pub nbr: Vec<[usize; 4]>,
    pub h: f64,
}

impl Stencil {
    pub fn new(grid: &DiscGrid) -> Self {
        let nodes = grid.interior().to_vec();
        let mut slot = vec![NONE; grid.len()];
        for (k, &idx) in nodes.iter().enumerate() {
            slot[idx] = k;
        }
        let n = grid.n();
        let nbr = nodes.iter().map(|&idx| [slot[idx - 1], slot[idx + 1], slot[idx - n], slot[idx + n]]).collect();
        Stencil { nodes, nbr, h: grid.h() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| values[i]).collect()
    }

    pub fn scatter(&self, x: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (k, &i) in self.nodes.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    /// `h² · (-Δ_h x)`.
    pub fn apply_scaled(&self, x: &[f64], out: &mut [f64]) {
        for (k, nb) in self.nbr.iter().enumerate() {
            let mut s = 4.0 * x[k];
            for &j in nb {
                if j != NONE {
                    s -= x[j];
                }
            }
            out[k] = s;
        }
    }

    /// `-Δ_h x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.apply_scaled(x, out);
        let inv = 1.0 / (self.h * self.h);
        for v in out.iter_mut() {
            *v *= inv;
        }
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Solves `(-Δ_h + diag(shift)) x = b` by conjugate gradients with an
    /// incomplete-Cholesky preconditioner. `shift` must be nonnegative.
    /// Returns the solution and the number of iterations.
    pub fn solve(&self, shift: &[f64], b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
        let m = self.len();
        let h2 = self.h * self.h;
        let diag: Vec<f64> = shift.iter().map(|s| 4.0 + h2 * s).collect();
        let rhs: Vec<f64> = b.iter().map(|v| v * h2).collect();
        let pre = Ic0::new(self, &diag);
        let apply = |x: &[f64], out: &mut [f64]| {
            for (k, nb) in self.nbr.iter().enumerate() {
                let mut s = diag[k] * x[k];
                for &j in nb {
                    if j != NONE {
                        s -= x[j];
                    }
                }
                out[k] = s;
            }
        };
        let mut x = vec![0.0; m];
        let mut r = rhs.clone();
        let bnorm = libm::sqrt(Self::dot(&rhs, &rhs));
        if bnorm == 0.0 {
            return (x, 0);
        }
        let mut z = pre.apply(&r);
        let mut p = z.clone();
        let mut rz = Self::dot(&r, &z);
        let mut ap = vec![0.0; m];
        let mut it = 0;
        while it < max_iter {
            it += 1;
            apply(&p, &mut ap);
            let pap = Self::dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for k in 0..m {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if libm::sqrt(Self::dot(&r, &r)) <= rel_tol * bnorm {
                break;
            }
            z = pre.apply(&r);
            let rz_new = Self::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..m {
                p[k] = z[k] + beta * p[k];
            }
        }
        (x, it)
    }
}

/// Zero fill-in incomplete Cholesky factor of a five-point matrix with unit
/// off-diagonal magnitude, in row-major unknown order.
struct Ic0<'a> {
    st: &'a Stencil,
    d: Vec<f64>,
}

impl<'a> Ic0<'a> {
    fn new(st: &'a Stencil, diag: &[f64]) -> Self {
        let mut d = vec![0.0; st.len()];
        for k in 0..st.len() {
            let mut v = diag[k];
            for &j in &st.nbr[k][..] {
                if j != NONE && j < k {
                    v -= 1.0 / d[j];
                }
            }
            // guards against breakdown; the matrices used here are M-matrices
            d[k] = if v > 1e-12 { v } else { diag[k] };
        }
        Ic0 { st, d }
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let m = self.st.len();
        let mut w = vec![0.0; m];
        for k in 0..m {
            let mut s = r[k];
            for &j in &self.st.nbr[k][..] {
                if j != NONE && j < k {
                    s += w[j];
                }
            }
            w[k] = s / self.d[k];
        }
        let mut z = w;
        for k in (0..m).rev() {
            let mut s = 0.0;
            for &j in &self.st.nbr[k][..] {
                if j != NONE && j > k {
                    s += z[j];
                }
            }
            z[k] += s / self.d[k];
        }
        z
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r²)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}
