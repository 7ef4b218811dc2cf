//! Finite-difference operators and quadrature on periodic grids.
//!
//! Every reduction over nodes goes through [`pairwise_sum`], whose summation
//! tree depends only on the slice length, so reruns are bit-identical.

use crate::field::{component_sum, VectorField, MAX_AMBIENT_DIM};
use crate::grid::Grid;

impl AsRef<VectorField> for VectorField {
    fn as_ref(&self) -> &VectorField {
        self
    }
}

const PAIRWISE_BLOCK: usize = 32;

/// Deterministic pairwise (tree) summation in row-major order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `h² · Σ_nodes value`.
pub fn integrate(grid: Grid, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.len());
    let h = grid.h();
    h * h * pairwise_sum(values)
}

/// Periodic neighbor indices of each row/column position.
#[derive(Clone, Debug)]
pub(crate) struct Neighbors {
    pub next: Vec<usize>,
    pub prev: Vec<usize>,
}

impl Neighbors {
    pub fn new(n: usize) -> Self {
        Self {
            next: (0..n).map(|i| (i + 1) % n).collect(),
            prev: (0..n).map(|i| (i + n - 1) % n).collect(),
        }
    }
}

/// Five-point Laplacian with periodic wrap.
///
/// Written as a sum of neighbor differences so constant fields map to exact zeros.
pub fn laplacian(f: &impl AsRef<VectorField>) -> VectorField {
    let f = f.as_ref();
    let grid = f.grid();
    let (n, l) = (grid.n(), f.dim());
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let nb = Neighbors::new(n);
    let src = f.as_slice();
    let mut out = VectorField::zeros(grid, l);
    let dst = out.as_mut_slice();
    for i in 0..n {
        let (ip, im) = (nb.next[i], nb.prev[i]);
        for j in 0..n {
            let (jp, jm) = (nb.next[j], nb.prev[j]);
            let c = (i * n + j) * l;
            let e = (ip * n + j) * l;
            let w = (im * n + j) * l;
            let no = (i * n + jp) * l;
            let s = (i * n + jm) * l;
            for k in 0..l {
                let fc = src[c + k];
                let sum = ((src[e + k] - fc) + (src[w + k] - fc))
                    + ((src[no + k] - fc) + (src[s + k] - fc));
                dst[c + k] = sum * inv_h2;
            }
        }
    }
    out
}

/// Central-difference gradient: one vector per axis per node.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub dx: VectorField,
    pub dy: VectorField,
}

impl GradientField {
    pub fn grid(&self) -> Grid {
        self.dx.grid()
    }

    /// Energy density `|df|² = |∂ₓf|² + |∂ᵧf|²` per node.
    pub fn density(&self) -> Vec<f64> {
        pair_density(&self.dx, &self.dy)
    }
}

/// Per-node `Σ_k (a_k² + b_k²)`, summed over components in a permutation-invariant order.
fn pair_density(a: &VectorField, b: &VectorField) -> Vec<f64> {
    let l = a.dim();
    let mut buf = [0.0; MAX_AMBIENT_DIM];
    a.nodes()
        .zip(b.nodes())
        .map(|(x, y)| {
            let terms = &mut buf[..l];
            for k in 0..l {
                terms[k] = x[k] * x[k] + y[k] * y[k];
            }
            component_sum(terms)
        })
        .collect()
}

pub fn gradient(f: &impl AsRef<VectorField>) -> GradientField {
    let f = f.as_ref();
    let grid = f.grid();
    let (n, l) = (grid.n(), f.dim());
    let inv_2h = 1.0 / (2.0 * grid.h());
    let nb = Neighbors::new(n);
    let src = f.as_slice();
    let mut dx = VectorField::zeros(grid, l);
    let mut dy = VectorField::zeros(grid, l);
    {
        let (gx, gy) = (dx.as_mut_slice(), dy.as_mut_slice());
        for i in 0..n {
            let (ip, im) = (nb.next[i], nb.prev[i]);
            for j in 0..n {
                let (jp, jm) = (nb.next[j], nb.prev[j]);
                let c = (i * n + j) * l;
                let e = (ip * n + j) * l;
                let w = (im * n + j) * l;
                let no = (i * n + jp) * l;
                let s = (i * n + jm) * l;
                for k in 0..l {
                    gx[c + k] = (src[e + k] - src[w + k]) * inv_2h;
                    gy[c + k] = (src[no + k] - src[s + k]) * inv_2h;
                }
            }
        }
    }
    GradientField { dx, dy }
}

/// Forward differences `((f_{i+1,j} − f_{i,j})/h, (f_{i,j+1} − f_{i,j})/h)`.
///
/// This is the gradient that pairs with [`laplacian`] under exact summation by parts.
pub fn forward_gradient(f: &impl AsRef<VectorField>) -> GradientField {
    let f = f.as_ref();
    let grid = f.grid();
    let (n, l) = (grid.n(), f.dim());
    let inv_h = 1.0 / grid.h();
    let nb = Neighbors::new(n);
    let src = f.as_slice();
    let mut dx = VectorField::zeros(grid, l);
    let mut dy = VectorField::zeros(grid, l);
    {
        let (gx, gy) = (dx.as_mut_slice(), dy.as_mut_slice());
        for i in 0..n {
            let ip = nb.next[i];
            for j in 0..n {
                let jp = nb.next[j];
                let c = (i * n + j) * l;
                let e = (ip * n + j) * l;
                let no = (i * n + jp) * l;
                for k in 0..l {
                    gx[c + k] = (src[e + k] - src[c + k]) * inv_h;
                    gy[c + k] = (src[no + k] - src[c + k]) * inv_h;
                }
            }
        }
    }
    GradientField { dx, dy }
}

/// Reported Dirichlet energy `½ h² Σ |df|²` with central differences.
pub fn energy(f: &impl AsRef<VectorField>) -> f64 {
    let f = f.as_ref();
    0.5 * integrate(f.grid(), &gradient(f).density())
}

/// Dirichlet energy with the forward-difference density; its discrete
/// variation is exactly `−h² Δf`.
pub fn energy_fd(f: &impl AsRef<VectorField>) -> f64 {
    let f = f.as_ref();
    0.5 * integrate(f.grid(), &forward_gradient(f).density())
}

/// Per-node `|∇df|² = |f_xx|² + |f_yy|² + 2|f_xy|²` from second differences.
pub fn second_derivative_density(f: &impl AsRef<VectorField>) -> Vec<f64> {
    let f = f.as_ref();
    let grid = f.grid();
    let (n, l) = (grid.n(), f.dim());
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let inv_4h2 = 0.25 * inv_h2;
    let nb = Neighbors::new(n);
    let src = f.as_slice();
    let at = |i: usize, j: usize, k: usize| src[(i * n + j) * l + k];
    let mut out = vec![0.0; grid.len()];
    for i in 0..n {
        let (ip, im) = (nb.next[i], nb.prev[i]);
        for j in 0..n {
            let (jp, jm) = (nb.next[j], nb.prev[j]);
            let mut acc = 0.0;
            for k in 0..l {
                let c = at(i, j, k);
                let fxx = ((at(ip, j, k) - c) + (at(im, j, k) - c)) * inv_h2;
                let fyy = ((at(i, jp, k) - c) + (at(i, jm, k) - c)) * inv_h2;
                let fxy =
                    ((at(ip, jp, k) - at(ip, jm, k)) - (at(im, jp, k) - at(im, jm, k))) * inv_4h2;
                acc += fxx * fxx + fyy * fyy + 2.0 * fxy * fxy;
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// Node-wise inner product of two fields.
pub fn dot(a: &VectorField, b: &VectorField) -> Vec<f64> {
    a.nodes()
        .zip(b.nodes())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect()
}
