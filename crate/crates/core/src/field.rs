//! Node-sampled fields on a periodic grid.

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// Largest supported ambient dimension of the target embedding.
pub const MAX_AMBIENT_DIM: usize = 16;

/// Minimum node norm accepted by [`project_to_sphere`].
pub const PROJECTION_FLOOR: f64 = 1e-8;

/// Sum of a handful of per-component terms in an order that does not depend on
/// which component each term came from.
///
/// Sorting first makes the result invariant under permutations of the ambient
/// axes, so signed-permutation rotations of the target commute bit-exactly with
/// every per-node reduction.
#[inline]
pub(crate) fn component_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Per-node vectors in `R^L`, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    dim: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            data: vec![0.0; grid.len() * dim],
        }
    }

    pub fn from_vec(grid: Grid, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_AMBIENT_DIM {
            return Err(invalid(format!(
                "ambient dimension must be in 1..={MAX_AMBIENT_DIM}, got {dim}"
            )));
        }
        if data.len() != grid.len() * dim {
            return Err(invalid(format!(
                "expected {} values for a {}x{} grid in R^{dim}, got {}",
                grid.len() * dim,
                grid.n(),
                grid.n(),
                data.len()
            )));
        }
        Ok(Self { grid, dim, data })
    }

    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, dim);
        for (idx, node) in out.data.chunks_exact_mut(dim).enumerate() {
            f(idx, node);
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn node(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Reads node `(i, j)` with periodic wrap.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> &[f64] {
        self.node(self.grid.index(i, j))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn nodes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Per-node squared Euclidean norm.
    pub fn norm_sq(&self) -> Vec<f64> {
        let mut buf = [0.0; MAX_AMBIENT_DIM];
        self.nodes()
            .map(|v| {
                let terms = &mut buf[..self.dim];
                for (t, x) in terms.iter_mut().zip(v) {
                    *t = x * x;
                }
                component_sum(terms)
            })
            .collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_sq().into_iter().fold(0.0, f64::max).sqrt()
    }

    /// Applies a linear map of the ambient space node-wise: `out = R·v`.
    pub fn rotated(&self, rot: &[f64]) -> Self {
        let l = self.dim;
        assert_eq!(rot.len(), l * l, "rotation must be {l}x{l}");
        Self::from_fn(self.grid, l, |idx, out| {
            let v = self.node(idx);
            for (a, o) in out.iter_mut().enumerate() {
                *o = (0..l).map(|b| rot[a * l + b] * v[b]).sum();
            }
        })
    }

    /// Cyclic shift of the grid: the value at node `(i, j)` moves to `(i + di, j + dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        let g = self.grid;
        let n = g.n() as isize;
        Self::from_fn(g, self.dim, |idx, out| {
            let (i, j) = g.coords(idx);
            out.copy_from_slice(
                self.at(i as isize - di.rem_euclid(n), j as isize - dj.rem_euclid(n)),
            );
        })
    }

    /// Maximum node-wise Euclidean distance to another field on the same grid.
    pub fn max_distance(&self, other: &Self) -> f64 {
        self.nodes()
            .zip(other.nodes())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// A sphere-valued map: every node has unit Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct MapField(VectorField);

/// Normalizes every node to unit length, preserving direction.
///
/// Fails when a node's norm is below [`PROJECTION_FLOOR`].
pub fn project_to_sphere(mut raw: VectorField) -> Result<MapField> {
    let norms = raw.norm_sq();
    for (idx, ns) in norms.iter().enumerate() {
        let norm = ns.sqrt();
        if !(norm >= PROJECTION_FLOOR) {
            return Err(Error::ProjectionFailure { node: idx, norm });
        }
        for x in raw.node_mut(idx) {
            *x /= norm;
        }
    }
    Ok(MapField(raw))
}

impl MapField {
    pub fn grid(&self) -> Grid {
        self.0.grid()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn values(&self) -> &VectorField {
        &self.0
    }

    pub fn into_inner(self) -> VectorField {
        self.0
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        self.0.node(idx)
    }

    /// Largest deviation of any node norm from one.
    pub fn sphere_defect(&self) -> f64 {
        self.0
            .norm_sq()
            .into_iter()
            .map(|ns| (ns.sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Applies an orthogonal map node-wise without renormalizing, so signed
    /// permutations act bit-exactly.
    pub fn rotated(&self, rot: &[f64]) -> Result<Self> {
        let out = MapField(self.0.rotated(rot));
        let defect = out.sphere_defect();
        if defect > 1e-12 {
            return Err(invalid(format!(
                "map is not orthogonal: sphere defect {defect:e}"
            )));
        }
        Ok(out)
    }

    /// Wraps values that are already unit length within `tol`.
    pub fn from_unit_vectors(values: VectorField, tol: f64) -> Result<Self> {
        let out = MapField(values);
        let defect = out.sphere_defect();
        if defect > tol {
            return Err(invalid(format!("values are off the sphere by {defect:e}")));
        }
        Ok(out)
    }

    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        MapField(self.0.shifted(di, dj))
    }
}

impl AsRef<VectorField> for MapField {
    fn as_ref(&self) -> &VectorField {
        &self.0
    }
}

/// Conformal factor `v = e^{2u} > 0`, one value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalField {
    grid: Grid,
    values: Vec<f64>,
}

impl ConformalField {
    /// The initial factor `v ≡ 1` (that is, `u(0) = 0`).
    pub fn ones(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![1.0; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(invalid(format!(
                "conformal factor must be positive and finite, found {bad}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `u = ½ log v`, for output only.
    pub fn log_factor(&self) -> Vec<f64> {
        self.values.iter().map(|v| 0.5 * v.ln()).collect()
    }

    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        let g = self.grid;
        let n = g.n() as isize;
        let values = (0..g.len())
            .map(|idx| {
                let (i, j) = g.coords(idx);
                self.values[g.index(i as isize - di.rem_euclid(n), j as isize - dj.rem_euclid(n))]
            })
            .collect();
        Self { grid: g, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(8, 1.0).unwrap()
    }

    fn single(dim: usize, v: &[f64]) -> VectorField {
        VectorField::from_fn(grid(), dim, |_, out| out.copy_from_slice(v))
    }

    #[test]
    fn projection_normalizes() {
        let f = project_to_sphere(single(3, &[0.0, 0.0, 2.0])).unwrap();
        assert_eq!(f.node(5), &[0.0, 0.0, 1.0]);
        let f = project_to_sphere(single(3, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(f.node(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_rejects_near_zero_nodes() {
        let err = project_to_sphere(single(3, &[1e-12, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::ProjectionFailure { .. }));
        let err = project_to_sphere(single(3, &[f64::NAN, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::ProjectionFailure { .. }));
    }

    #[test]
    fn conformal_field_rejects_nonpositive() {
        assert!(ConformalField::from_vec(grid(), vec![0.0; 64]).is_err());
        assert!(ConformalField::from_vec(grid(), vec![1.0; 63]).is_err());
        let v = ConformalField::ones(grid());
        assert_eq!(v.min(), 1.0);
        assert_eq!(v.log_factor()[3], 0.0);
    }

    #[test]
    fn shift_moves_values() {
        let g = grid();
        let f = VectorField::from_fn(g, 1, |idx, out| out[0] = idx as f64);
        let s = f.shifted(1, -2);
        assert_eq!(s.at(1, 6)[0], f.at(0, 0)[0]);
        assert_eq!(s.shifted(-1, 2), f);
    }

    #[test]
    fn component_sum_is_permutation_invariant() {
        let mut a = [0.1, 1e-17, 0.7, 3.3e-9];
        let mut b = [3.3e-9, 0.7, 1e-17, 0.1];
        assert_eq!(
            component_sum(&mut a).to_bits(),
            component_sum(&mut b).to_bits()
        );
    }

    proptest! {
        #[test]
        fn projected_nodes_have_unit_norm(
            x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0
        ) {
            prop_assume!((x * x + y * y + z * z).sqrt() > 1e-3);
            let f = project_to_sphere(single(3, &[x, y, z])).unwrap();
            prop_assert!(f.sphere_defect() <= 1e-12);
            let n = f.node(0);
            // direction preserved
            let s = (x * x + y * y + z * z).sqrt();
            prop_assert!((n[0] - x / s).abs() < 1e-14 && (n[2] - z / s).abs() < 1e-14);
        }
    }
}
