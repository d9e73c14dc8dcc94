//! Uniform 2D grid geometry and central finite-difference operators.
//!
//! Fields are stored flattened in row-major order, `i = iy * nx + ix`; this
//! convention is shared by every module in the crate. First-difference
//! operators are exactly skew-symmetric under both boundary closures, and the
//! 5-point Laplacian has zero row and column sums, which is what makes the
//! diffusion-cancellation argument in [`crate::density::min_norm_control`]
//! exact.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Boundary closure for the finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Neumann,
}

/// Uniform 2D grid: `nx * ny` sample points with spacing `spacing_l`,
/// `origin` at grid point (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing_l: f64,
    pub origin: (f64, f64),
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        spacing_l: f64,
        origin: (f64, f64),
        boundary: Boundary,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need nx >= 3 and ny >= 3, got {nx}x{ny}"
            )));
        }
        if !(spacing_l > 0.0) || !spacing_l.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be > 0, got {spacing_l}")));
        }
        Ok(GridSpec {
            nx,
            ny,
            spacing_l,
            origin,
            boundary,
        })
    }

    /// Square grid centered on the origin, the usual simulation setup.
    pub fn centered_square(n: usize, spacing_l: f64, boundary: Boundary) -> Result<Self> {
        let half = 0.5 * spacing_l * (n - 1) as f64;
        GridSpec::new(n, n, spacing_l, (-half, -half), boundary)
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Physical coordinates of grid point `(ix, iy)`.
    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.0 + ix as f64 * self.spacing_l,
            self.origin.1 + iy as f64 * self.spacing_l,
        )
    }

    /// Physical coordinates of flattened cell `i`.
    #[inline]
    pub fn coords(&self, i: usize) -> (f64, f64) {
        self.point(i % self.nx, i / self.nx)
    }

    /// `[x_min, x_max]` of the sampled domain.
    pub fn x_extent(&self) -> (f64, f64) {
        (
            self.origin.0,
            self.origin.0 + self.spacing_l * (self.nx - 1) as f64,
        )
    }

    pub fn y_extent(&self) -> (f64, f64) {
        (
            self.origin.1,
            self.origin.1 + self.spacing_l * (self.ny - 1) as f64,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, x1) = self.x_extent();
        let (y0, y1) = self.y_extent();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Odd sample counts keep the stride-2 index cycles of the central
    /// difference connected, which the minimum-norm control relies on.
    pub fn is_odd(&self) -> bool {
        self.nx % 2 == 1 && self.ny % 2 == 1
    }

    /// Quadrature weight of the rectangle rule used for every integral.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.spacing_l * self.spacing_l
    }

    fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(what.to_string()))
        }
    }
}

/// Flattened scalar samples (densities) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::FieldLength {
                expected: grid.n_cells(),
                got: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.n_cells()],
        }
    }

    /// Copy with every entry raised to at least `min`.
    pub fn floored(&self, min: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| v.max(min)).collect(),
        }
    }

    /// Rectangle-rule mass `sum(values) * l^2`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Bilinear interpolation at a physical position inside the domain.
    pub fn sample(&self, x: f64, y: f64) -> Result<f64> {
        let (w, idx) = bilinear_weights(&self.grid, x, y)?;
        Ok(w.iter()
            .zip(idx.iter())
            .map(|(wk, &ik)| wk * self.values[ik])
            .sum())
    }
}

/// Flattened 2D vector samples, layout `[all x-components | all y-components]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * grid.n_cells() {
            return Err(Error::FieldLength {
                expected: 2 * grid.n_cells(),
                got: values.len(),
            });
        }
        Ok(VectorField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            grid,
            values: vec![0.0; 2 * grid.n_cells()],
        }
    }

    #[inline]
    pub fn x_component(&self) -> &[f64] {
        &self.values[..self.grid.n_cells()]
    }

    #[inline]
    pub fn y_component(&self) -> &[f64] {
        &self.values[self.grid.n_cells()..]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Bilinear interpolation of both components at a physical position.
    pub fn sample(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (w, idx) = bilinear_weights(&self.grid, x, y)?;
        let n = self.grid.n_cells();
        let mut ux = 0.0;
        let mut uy = 0.0;
        for (wk, &ik) in w.iter().zip(idx.iter()) {
            ux += wk * self.values[ik];
            uy += wk * self.values[n + ik];
        }
        Ok((ux, uy))
    }
}

fn bilinear_weights(grid: &GridSpec, x: f64, y: f64) -> Result<([f64; 4], [usize; 4])> {
    if !grid.contains(x, y) {
        return Err(Error::OutsideDomain { x, y });
    }
    let l = grid.spacing_l;
    let fx = (x - grid.origin.0) / l;
    let fy = (y - grid.origin.1) / l;
    let ix = (fx.floor() as usize).min(grid.nx - 2);
    let iy = (fy.floor() as usize).min(grid.ny - 2);
    let tx = (fx - ix as f64).clamp(0.0, 1.0);
    let ty = (fy - iy as f64).clamp(0.0, 1.0);
    let i00 = grid.index(ix, iy);
    let i10 = grid.index(ix + 1, iy);
    let i01 = grid.index(ix, iy + 1);
    let i11 = grid.index(ix + 1, iy + 1);
    Ok((
        [
            (1.0 - tx) * (1.0 - ty),
            tx * (1.0 - ty),
            (1.0 - tx) * ty,
            tx * ty,
        ],
        [i00, i10, i01, i11],
    ))
}

/// Sparse matrix in CSR form, assembled from coordinate triplets.
///
/// Entries are stored as `scale * data[k]`. The finite-difference builders
/// keep `data` as small integers and move the `1/l` factors into `scale`, so
/// structural identities (zero row sums, skew-symmetry) cancel exactly in
/// integer arithmetic instead of leaving round-off dust.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    scale: f64,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseOperator {
    /// Assemble from coordinate triplets; duplicate `(row, col)` pairs are
    /// summed so the stored form has unique entries.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        debug_assert!(triplets.iter().all(|&(r, c, _)| r < rows && c < cols));
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut cur_row = 0usize;
        for (r, c, v) in triplets {
            while cur_row < r {
                cur_row += 1;
                indptr[cur_row] = indices.len();
            }
            if indices.len() > indptr[cur_row] && *indices.last().unwrap() == c {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
            }
        }
        while cur_row < rows {
            cur_row += 1;
            indptr[cur_row] = indices.len();
        }
        SparseOperator {
            rows,
            cols,
            scale: 1.0,
            indptr,
            indices,
            data,
        }
    }

    /// As [`Self::from_triplets`], with every stored entry multiplied by
    /// `scale` at application time.
    pub fn from_scaled_triplets(
        rows: usize,
        cols: usize,
        scale: f64,
        triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        let mut op = Self::from_triplets(rows, cols, triplets);
        op.scale = scale;
        op
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Iterate stored entries as `(row, col, value)` with the scale applied.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1])
                .map(move |k| (r, self.indices[k], self.scale * self.data[k]))
        })
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "operator/input size mismatch");
        assert_eq!(y.len(), self.rows, "operator/output size mismatch");
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = self.scale * acc;
        }
    }

    /// Explicit transpose, used where repeated `M^T x` products are needed.
    pub fn transpose(&self) -> SparseOperator {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut indptr = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let slot = indptr[c];
                indices[slot] = r;
                data[slot] = self.data[k];
                indptr[c] += 1;
            }
        }
        SparseOperator {
            rows: self.cols,
            cols: self.rows,
            scale: self.scale,
            indptr: counts,
            indices,
            data,
        }
    }

    /// Dense copy, for test oracles and the small verification suites.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// `max |M + M^T|` over all entries; zero for an exactly skew-symmetric
    /// operator.
    pub fn skew_symmetry_residual(&self) -> f64 {
        use std::collections::HashMap;
        let mut map: HashMap<(usize, usize), f64> = HashMap::with_capacity(2 * self.nnz());
        for (r, c, v) in self.triplets() {
            *map.entry((r, c)).or_insert(0.0) += v;
            *map.entry((c, r)).or_insert(0.0) += v;
        }
        map.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `(max |1^T M|, max |M 1|)`: column and row sum residuals, computed by
    /// applying the operator and its transpose to the ones vector so the
    /// integer-stencil cancellation stays exact.
    pub fn one_vector_residuals(&self) -> (f64, f64) {
        let ones_c = vec![1.0; self.cols];
        let row_sums = self.apply(&ones_c);
        let max_row = row_sums.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ones_r = vec![1.0; self.rows];
        let col_sums = self.transpose().apply(&ones_r);
        let max_col = col_sums.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (max_col, max_row)
    }
}

/// Neighbor index along one axis under the grid's closure, `None` when the
/// truncated Neumann stencil drops the entry.
#[inline]
fn neighbor(i: usize, n: usize, step: isize, boundary: Boundary) -> Option<usize> {
    let j = i as isize + step;
    match boundary {
        Boundary::Periodic => Some(j.rem_euclid(n as isize) as usize),
        Boundary::Neumann => {
            if j < 0 || j >= n as isize {
                None
            } else {
                Some(j as usize)
            }
        }
    }
}

/// Central difference along x, `(f(ix+1) - f(ix-1)) / (2 l)`.
///
/// Periodic closure wraps the stencil; Neumann closure truncates it (the
/// out-of-range sample is dropped). Both yield an exactly skew-symmetric
/// matrix, `D^T = -D`, entry for entry.
pub fn build_diff_x(grid: &GridSpec) -> SparseOperator {
    build_diff(grid, Axis::X)
}

/// Central difference along y; see [`build_diff_x`].
pub fn build_diff_y(grid: &GridSpec) -> SparseOperator {
    build_diff(grid, Axis::Y)
}

enum Axis {
    X,
    Y,
}

fn build_diff(grid: &GridSpec, axis: Axis) -> SparseOperator {
    let n = grid.n_cells();
    let mut triplets = Vec::with_capacity(2 * n);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let row = grid.index(ix, iy);
            let (idx, count) = match axis {
                Axis::X => (ix, grid.nx),
                Axis::Y => (iy, grid.ny),
            };
            for (step, sign) in [(1isize, 1.0), (-1isize, -1.0)] {
                if let Some(j) = neighbor(idx, count, step, grid.boundary) {
                    let col = match axis {
                        Axis::X => grid.index(j, iy),
                        Axis::Y => grid.index(ix, j),
                    };
                    triplets.push((row, col, sign));
                }
            }
        }
    }
    SparseOperator::from_scaled_triplets(n, n, 1.0 / (2.0 * grid.spacing_l), triplets)
}

/// Standard 5-point Laplacian with `1/l^2` scaling.
///
/// Periodic closure wraps; Neumann closure uses the symmetric one-sided form
/// (boundary diagonal entries of -1 per axis). Every row and column sums to
/// zero exactly under both closures, and the matrix is symmetric.
pub fn build_laplacian(grid: &GridSpec) -> SparseOperator {
    let n = grid.n_cells();
    let mut triplets = Vec::with_capacity(5 * n);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let row = grid.index(ix, iy);
            let mut diag = 0.0;
            for (idx, count, along_x) in [(ix, grid.nx, true), (iy, grid.ny, false)] {
                for step in [1isize, -1] {
                    if let Some(j) = neighbor(idx, count, step, grid.boundary) {
                        let col = if along_x {
                            grid.index(j, iy)
                        } else {
                            grid.index(ix, j)
                        };
                        triplets.push((row, col, 1.0));
                        diag -= 1.0;
                    }
                }
            }
            triplets.push((row, row, diag));
        }
    }
    SparseOperator::from_scaled_triplets(n, n, 1.0 / (grid.spacing_l * grid.spacing_l), triplets)
}

/// The operator bundle for one grid: built once, shared read-only afterwards.
/// The density-dependent advection operator is rebuilt every step instead
/// (see [`crate::density::build_advection`]).
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: GridSpec,
    pub dx: SparseOperator,
    pub dy: SparseOperator,
    pub laplacian: SparseOperator,
}

impl Operators {
    pub fn new(grid: GridSpec) -> Self {
        Operators {
            grid,
            dx: build_diff_x(&grid),
            dy: build_diff_y(&grid),
            laplacian: build_laplacian(&grid),
        }
    }

    pub fn check_grid(&self, other: &GridSpec, what: &str) -> Result<()> {
        self.grid.check_same(other, what)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, boundary: Boundary) -> GridSpec {
        GridSpec::centered_square(n, 0.1, boundary).unwrap()
    }

    /// Independent stencil evaluation of the central x-difference, written
    /// directly from the definition rather than through the sparse assembly.
    fn stencil_diff_x(g: &GridSpec, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.n_cells()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let plus = match g.boundary {
                    Boundary::Periodic => f[g.index((ix + 1) % g.nx, iy)],
                    Boundary::Neumann => {
                        if ix + 1 < g.nx {
                            f[g.index(ix + 1, iy)]
                        } else {
                            0.0
                        }
                    }
                };
                let minus = match g.boundary {
                    Boundary::Periodic => f[g.index((ix + g.nx - 1) % g.nx, iy)],
                    Boundary::Neumann => {
                        if ix >= 1 {
                            f[g.index(ix - 1, iy)]
                        } else {
                            0.0
                        }
                    }
                };
                out[g.index(ix, iy)] = (plus - minus) / (2.0 * g.spacing_l);
            }
        }
        out
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(2, 5, 0.1, (0.0, 0.0), Boundary::Periodic).is_err());
        assert!(GridSpec::new(5, 5, 0.0, (0.0, 0.0), Boundary::Periodic).is_err());
        assert!(GridSpec::new(5, 5, -1.0, (0.0, 0.0), Boundary::Periodic).is_err());
    }

    #[test]
    fn diff_of_constant_is_zero_periodic() {
        let g = grid(7, Boundary::Periodic);
        let f = vec![3.25; g.n_cells()];
        for op in [build_diff_x(&g), build_diff_y(&g)] {
            let out = op.apply(&f);
            assert!(out.iter().all(|v| *v == 0.0), "non-zero derivative of constant");
        }
    }

    #[test]
    fn skew_symmetry_exact_both_closures() {
        for boundary in [Boundary::Periodic, Boundary::Neumann] {
            let g = grid(9, boundary);
            assert_eq!(build_diff_x(&g).skew_symmetry_residual(), 0.0);
            assert_eq!(build_diff_y(&g).skew_symmetry_residual(), 0.0);
        }
    }

    #[test]
    fn diff_x_matches_stencil_oracle_with_seam() {
        // f(ix, iy) = ix * l has derivative 1 in the interior and a periodic
        // jump across the seam columns.
        let g = grid(5, Boundary::Periodic);
        let mut f = vec![0.0; g.n_cells()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                f[g.index(ix, iy)] = ix as f64 * g.spacing_l;
            }
        }
        let got = build_diff_x(&g).apply(&f);
        let want = stencil_diff_x(&g, &f);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-14, "got {a}, stencil oracle {b}");
        }
        // interior columns see slope one, seam columns the wraparound jump
        for iy in 0..g.ny {
            for ix in 1..g.nx - 1 {
                assert!((got[g.index(ix, iy)] - 1.0).abs() <= 1e-12);
            }
            assert!(got[g.index(0, iy)] < 0.0);
            assert!(got[g.index(g.nx - 1, iy)] < 0.0);
        }
    }

    #[test]
    fn diff_y_matches_stencil_oracle() {
        let g = grid(5, Boundary::Periodic);
        let mut f = vec![0.0; g.n_cells()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                f[g.index(ix, iy)] = iy as f64 * g.spacing_l;
            }
        }
        let got = build_diff_y(&g).apply(&f);
        for iy in 1..g.ny - 1 {
            for ix in 0..g.nx {
                assert!((got[g.index(ix, iy)] - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_rows_and_columns_sum_to_zero() {
        for boundary in [Boundary::Periodic, Boundary::Neumann] {
            let g = grid(9, boundary);
            let b = build_laplacian(&g);
            let (col, row) = b.one_vector_residuals();
            assert_eq!(row, 0.0, "B 1 != 0 under {boundary:?}");
            assert_eq!(col, 0.0, "1^T B != 0 under {boundary:?}");
            // harmonic constant, up to round-off of the non-dyadic constant
            let f = vec![1.7; g.n_cells()];
            assert!(b.apply(&f).iter().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn laplacian_periodic_mode_eigenvalue() {
        // Single-frequency mode on a 21x21 periodic grid; per-axis eigenvalue
        // -(2 - 2 cos(2 pi / 21)) / l^2, cross-checked against a dense
        // eigendecomposition of the full 441x441 matrix.
        let g = grid(21, Boundary::Periodic);
        let b = build_laplacian(&g);
        let l2 = g.spacing_l * g.spacing_l;
        let expected = -(2.0 - 2.0 * (2.0 * std::f64::consts::PI / 21.0).cos()) / l2;

        let mut mode = vec![0.0; g.n_cells()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                mode[g.index(ix, iy)] =
                    (2.0 * std::f64::consts::PI * ix as f64 / g.nx as f64).cos();
            }
        }
        let out = b.apply(&mode);
        for (o, m) in out.iter().zip(mode.iter()) {
            assert!(
                (o - expected * m).abs() <= 1e-12 * expected.abs(),
                "mode application residual too large"
            );
        }

        let dense = b.to_dense();
        let eig = dense.symmetric_eigen();
        let closest = eig
            .eigenvalues
            .iter()
            .cloned()
            .min_by(|a, b| {
                (a - expected)
                    .abs()
                    .partial_cmp(&(b - expected).abs())
                    .unwrap()
            })
            .unwrap();
        assert!(
            (closest - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "dense eigendecomposition disagrees: {closest} vs {expected}"
        );
    }

    #[test]
    fn diff_operators_commute_on_periodic_grids() {
        let g = grid(9, Boundary::Periodic);
        let dx = build_diff_x(&g);
        let dy = build_diff_y(&g);
        let mut f = Vec::with_capacity(g.n_cells());
        for i in 0..g.n_cells() {
            let (x, y) = g.coords(i);
            f.push((1.3 * x).sin() * (0.7 * y).cos() + 0.1 * x * y);
        }
        let a = dx.apply(&dy.apply(&f));
        let b = dy.apply(&dx.apply(&f));
        let resid = a
            .iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(resid <= 1e-12, "commutation residual {resid}");
    }

    #[test]
    fn apply_preserves_length_and_finiteness() {
        let g = grid(7, Boundary::Neumann);
        let ops = Operators::new(g);
        let f: Vec<f64> = (0..g.n_cells()).map(|i| (i as f64 * 0.37).sin()).collect();
        for op in [&ops.dx, &ops.dy, &ops.laplacian] {
            let out = op.apply(&f);
            assert_eq!(out.len(), f.len());
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn bilinear_sampling() {
        let g = grid(5, Boundary::Periodic);
        let mut f = ScalarField::zeros(g);
        for i in 0..g.n_cells() {
            let (x, y) = g.coords(i);
            f.values[i] = 2.0 * x + 3.0 * y + 1.0; // bilinear ramp
        }
        // exact at grid points
        let (px, py) = g.point(2, 3);
        assert!((f.sample(px, py).unwrap() - f.values[g.index(2, 3)]).abs() < 1e-14);
        // cell-center value is the average of the four corners of the ramp
        let (cx, cy) = (px + 0.05, py - 0.05);
        assert!((f.sample(cx, cy).unwrap() - (2.0 * cx + 3.0 * cy + 1.0)).abs() < 1e-13);
        assert!(f.sample(10.0, 0.0).is_err());
    }

    #[test]
    fn transpose_roundtrip() {
        let g = grid(5, Boundary::Neumann);
        let d = build_diff_x(&g);
        let dt = d.transpose();
        let f: Vec<f64> = (0..g.n_cells()).map(|i| (i as f64).cos()).collect();
        let a = d.apply(&f);
        let dense = d.to_dense();
        let fa = nalgebra::DVector::from_column_slice(&f);
        let b = &dense * &fa;
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
        let at = dt.to_dense();
        assert_eq!(dense.transpose(), at);
    }
}
