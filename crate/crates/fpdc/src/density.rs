//! Gaussian belief densities, the semi-discrete Fokker-Planck right-hand
//! side, and the minimum-norm diffusion-cancelling control.
//!
//! The swarm density is a sum of unnormalized isotropic Gaussian kernels
//! `exp(-lambda ||r - x_i||^2 / 2)` centered at the (measured) robot
//! positions. Its grid dynamics are
//!
//! ```text
//! rho_t = A(rho) u + T B rho
//! ```
//!
//! with `A(rho) = -[Dx Diag(rho) | Dy Diag(rho)]` the advection operator and
//! `B` the 5-point Laplacian. On odd periodic grids the diffusion term lies
//! in the image of `A`, so a control exists that freezes the density exactly;
//! [`min_norm_control`] computes the minimum-norm such control iteratively.

use crate::error::Error;
use crate::grid::{GridSpec, Operators, ScalarField, SparseOperator, VectorField};
use crate::Result;

/// Density entries are raised to this floor before `Diag(rho)` is inverted
/// or the advection operator assembled; Gaussian tails underflow far from
/// the robots.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Per-robot state as seen by the simulation: ground-truth positions, the
/// noisy measurements the controller works from, and the shared isotropic
/// precision `lambda` (`Sigma = lambda I`).
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub true_pos: Vec<(f64, f64)>,
    pub meas_pos: Vec<(f64, f64)>,
    pub precision_lambda: f64,
}

impl SwarmState {
    pub fn new(
        true_pos: Vec<(f64, f64)>,
        meas_pos: Vec<(f64, f64)>,
        precision_lambda: f64,
        grid: &GridSpec,
    ) -> Result<Self> {
        if true_pos.len() != meas_pos.len() {
            return Err(Error::invalid_parameter(
                "meas_pos",
                format!(
                    "length {} does not match true_pos length {}",
                    meas_pos.len(),
                    true_pos.len()
                ),
            ));
        }
        if !(precision_lambda > 0.0) {
            return Err(Error::invalid_parameter(
                "precision_lambda",
                "must be > 0",
            ));
        }
        for &(x, y) in true_pos.iter().chain(meas_pos.iter()) {
            if !grid.contains(x, y) {
                return Err(Error::OutsideDomain { x, y });
            }
        }
        Ok(SwarmState {
            true_pos,
            meas_pos,
            precision_lambda,
        })
    }

    pub fn n_robots(&self) -> usize {
        self.true_pos.len()
    }
}

/// Constant-diffusion motion-noise model: `T = 0.045 c u_max`, the diffusion
/// coefficient of a zero-mean Gaussian whose mass is conservatively bounded
/// by the scaled maximum command.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionModel {
    c: f64,
    u_max: f64,
    t_diff: f64,
}

impl DiffusionModel {
    pub fn new(c: f64, u_max: f64) -> Result<Self> {
        if c < 0.0 || !c.is_finite() {
            return Err(Error::invalid_parameter("c", "must be >= 0"));
        }
        if !(u_max > 0.0) {
            return Err(Error::invalid_parameter("u_max", "must be > 0"));
        }
        Ok(DiffusionModel {
            c,
            u_max,
            t_diff: 0.045 * c * u_max,
        })
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Diffusion coefficient `T` in m^2/s.
    #[inline]
    pub fn t_diff(&self) -> f64 {
        self.t_diff
    }
}

/// Unnormalized Gaussian kernel value at squared distance `d2`.
#[inline]
pub fn kernel(d2: f64, lambda: f64) -> f64 {
    (-0.5 * lambda * d2).exp()
}

/// Sum of unnormalized Gaussian kernels sampled at every grid point.
pub fn gaussian_density(
    positions: &[(f64, f64)],
    lambda: f64,
    grid: &GridSpec,
) -> Result<ScalarField> {
    if !(lambda > 0.0) {
        return Err(Error::invalid_parameter("lambda", "must be > 0"));
    }
    for &(x, y) in positions {
        if !grid.contains(x, y) {
            return Err(Error::OutsideDomain { x, y });
        }
    }
    let mut values = vec![0.0; grid.n_cells()];
    for &(px, py) in positions {
        let mut i = 0;
        for iy in 0..grid.ny {
            let y = grid.origin.1 + iy as f64 * grid.spacing_l;
            let dy2 = (y - py) * (y - py);
            for ix in 0..grid.nx {
                let x = grid.origin.0 + ix as f64 * grid.spacing_l;
                let dx = x - px;
                values[i + ix] += kernel(dx * dx + dy2, lambda);
            }
            i += grid.nx;
        }
    }
    ScalarField::new(*grid, values)
}

/// Advection operator `A(rho)`, the `N_d x 2N_d` map taking a flattened
/// control field to `-div(u rho)` so that `rho_t = A(rho) u + T B rho`.
///
/// Construction is total; even grid sizes only void the consistency
/// guarantee of [`min_norm_control`], which is reported here as a warning.
pub fn build_advection(
    rho: &ScalarField,
    dx: &SparseOperator,
    dy: &SparseOperator,
) -> SparseOperator {
    let n = rho.grid.n_cells();
    assert_eq!(dx.rows(), n, "diff-x operator built on a different grid");
    assert_eq!(dy.rows(), n, "diff-y operator built on a different grid");
    if !rho.grid.is_odd() {
        log::warn!(
            "advection operator on even grid {}x{}: diffusion cancellation is not exact, \
             adjust the grid to odd sample counts",
            rho.grid.nx,
            rho.grid.ny
        );
    }
    let mut triplets = Vec::with_capacity(dx.nnz() + dy.nnz());
    for (r, c, v) in dx.triplets() {
        triplets.push((r, c, -v * rho.values[c]));
    }
    for (r, c, v) in dy.triplets() {
        triplets.push((r, n + c, -v * rho.values[c]));
    }
    SparseOperator::from_triplets(n, 2 * n, triplets)
}

/// Semi-discrete density time derivative `rho_t = A(rho) u + T B rho`,
/// evaluated without assembling `A`.
pub fn fp_rhs(rho: &ScalarField, u: &VectorField, t_diff: f64, ops: &Operators) -> Result<ScalarField> {
    ops.check_grid(&rho.grid, "fp_rhs density")?;
    ops.check_grid(&u.grid, "fp_rhs control")?;
    let n = rho.grid.n_cells();
    let mut flux_x = vec![0.0; n];
    let mut flux_y = vec![0.0; n];
    for i in 0..n {
        flux_x[i] = rho.values[i] * u.values[i];
        flux_y[i] = rho.values[i] * u.values[n + i];
    }
    let div_x = ops.dx.apply(&flux_x);
    let div_y = ops.dy.apply(&flux_y);
    let diff = ops.laplacian.apply(&rho.values);
    let values = (0..n)
        .map(|i| -div_x[i] - div_y[i] + t_diff * diff[i])
        .collect();
    ScalarField::new(rho.grid, values)
}

/// Tolerances of the minimum-norm solve: relative to the right-hand side,
/// with an absolute fallback when the right-hand side is essentially zero.
pub const MIN_NORM_RTOL: f64 = 1e-8;
pub const MIN_NORM_ATOL: f64 = 1e-12;

/// Minimum-norm control cancelling the diffusion term: solves
/// `A(rho) u = -T B rho` for the smallest `||u||_2`.
///
/// Requires strictly positive density samples and odd grid dimensions under
/// a periodic or Neumann closure. The solve runs a Jacobi-preconditioned
/// conjugate-gradient iteration on the normal equations `A A^T y = b`
/// restricted to the mean-zero subspace, then recovers `u = A^T y`; the
/// dense pseudoinverse is reserved for test oracles.
pub fn min_norm_control(rho: &ScalarField, t_diff: f64, ops: &Operators) -> Result<VectorField> {
    ops.check_grid(&rho.grid, "min_norm_control density")?;
    let grid = rho.grid;
    if !grid.is_odd() {
        return Err(Error::EvenGrid {
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    for (i, &v) in rho.values.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveDensity { index: i, value: v });
        }
    }
    let n = grid.n_cells();

    // b = -T B rho
    let lap = ops.laplacian.apply(&rho.values);
    let mut b: Vec<f64> = lap.iter().map(|v| -t_diff * v).collect();
    let b_norm = norm2(&b);
    let target = (MIN_NORM_RTOL * b_norm).max(MIN_NORM_ATOL);
    if b_norm == 0.0 {
        return Ok(VectorField::zeros(grid));
    }
    // the consistency argument places b in the orthogonal complement of the
    // constant vector; remove floating-point dust
    project_mean_zero(&mut b);

    let a = build_advection(rho, &ops.dx, &ops.dy);
    let at = a.transpose();

    // Jacobi preconditioner of M = A A^T
    let mut diag = vec![0.0; n];
    for (r, _, v) in a.triplets() {
        diag[r] += v * v;
    }
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let apply_m = |y: &[f64], scratch: &mut Vec<f64>, out: &mut Vec<f64>| {
        scratch.resize(2 * n, 0.0);
        at.apply_into(y, scratch);
        out.resize(n, 0.0);
        a.apply_into(scratch, out);
    };

    // fast phase: preconditioned CG on the squared system; the CGLS polish
    // below uses the remaining 3n of the 5n iteration budget
    let max_iter = 2 * n;
    let mut y = vec![0.0; n];
    let mut r = b.clone(); // residual b - M y with y = 0
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    project_mean_zero(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut scratch = vec![0.0; 2 * n];
    let mut mp = vec![0.0; n];
    let mut achieved = norm2(&r);
    let mut iterations = 0;
    let mut since_restart = 0usize;

    let refresh = |y: &[f64], r: &mut Vec<f64>, scratch: &mut Vec<f64>, mp: &mut Vec<f64>| {
        apply_m(y, scratch, mp);
        for i in 0..n {
            r[i] = b[i] - mp[i];
        }
        project_mean_zero(r);
    };

    for _ in 0..max_iter {
        if achieved <= target {
            break;
        }
        iterations += 1;
        since_restart += 1;
        apply_m(&p, &mut scratch, &mut mp);
        let pmp = dot(&p, &mp);
        if !(pmp > 0.0) {
            // search direction collapsed into round-off; restart from the
            // true residual with a steepest-descent direction
            refresh(&y, &mut r, &mut scratch, &mut mp);
            achieved = norm2(&r);
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            project_mean_zero(&mut z);
            rz = dot(&r, &z);
            if !(rz > 0.0) || since_restart == 0 {
                // two collapses in a row: the preconditioned residual has no
                // descent component left at this precision
                break;
            }
            p.copy_from_slice(&z);
            since_restart = 0;
            continue;
        }
        let alpha = rz / pmp;
        for i in 0..n {
            y[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        if since_restart % 50 == 0 {
            refresh(&y, &mut r, &mut scratch, &mut mp);
        }
        achieved = norm2(&r);
        if achieved <= target {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project_mean_zero(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let mut u = at.apply(&y);
    let true_residual = |u: &[f64]| -> f64 {
        let au = a.apply(u);
        let mut s = 0.0;
        for i in 0..n {
            let d = au[i] - b[i];
            s += d * d;
        }
        s.sqrt()
    };
    let mut final_res = true_residual(&u);

    if final_res > target {
        // The squared system loses half the digits; polish with CGLS on the
        // rectangular system itself. Starting from the current iterate keeps
        // u in the row space of A, so the minimum-norm property survives.
        let extra = cgls_polish(&a, &at, &b, &mut u, target, 3 * n);
        iterations += extra;
        final_res = true_residual(&u);
    }
    if final_res > target * 1.0001 {
        return Err(Error::ResidualNotMet {
            achieved: final_res,
            target,
            iterations,
        });
    }
    VectorField::new(grid, u)
}

/// Conjugate-gradient least squares on the rectangular system `A u = b`,
/// refining `u` in place until `||A u - b|| <= target`. Returns the number
/// of iterations spent.
fn cgls_polish(
    a: &SparseOperator,
    at: &SparseOperator,
    b: &[f64],
    u: &mut [f64],
    target: f64,
    max_iter: usize,
) -> usize {
    let n = a.rows();
    let m = a.cols();
    let mut r = vec![0.0; n];
    a.apply_into(u, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut s = vec![0.0; m];
    at.apply_into(&r, &mut s);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        if norm2(&r) <= target || !(gamma > 0.0) {
            break;
        }
        iterations += 1;
        a.apply_into(&p, &mut q);
        let qq = dot(&q, &q);
        if !(qq > 0.0) {
            break;
        }
        let alpha = gamma / qq;
        for i in 0..m {
            u[i] += alpha * p[i];
        }
        for i in 0..n {
            r[i] -= alpha * q[i];
        }
        at.apply_into(&r, &mut s);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for i in 0..m {
            p[i] = s[i] + beta * p[i];
        }
    }
    iterations
}

/// Component-wise bounds of a control field padded by ten percent of the
/// range, the box handed to the QP. Degenerate (near-zero range) fields fall
/// back to `±fallback`.
pub fn padded_bounds(u: &VectorField, fallback: f64) -> (f64, f64) {
    let lo = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12) {
        return (-fallback.abs(), fallback.abs());
    }
    let pad = 0.1 * range;
    (lo - pad, hi + pad)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, GridSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::centered_square(n, 0.1, Boundary::Periodic).unwrap()
    }

    #[test]
    fn diffusion_model_ties_t_to_c_and_umax() {
        let m = DiffusionModel::new(0.5, 2.0).unwrap();
        assert_eq!(m.t_diff(), 0.045 * 0.5 * 2.0);
        assert!(DiffusionModel::new(-0.1, 1.0).is_err());
        assert!(DiffusionModel::new(0.1, 0.0).is_err());
    }

    #[test]
    fn gaussian_at_grid_point_is_one() {
        let g = grid(9);
        let (px, py) = g.point(4, 4);
        let f = gaussian_density(&[(px, py)], 3.0, &g).unwrap();
        assert_eq!(f.values[g.index(4, 4)], 1.0);
    }

    #[test]
    fn coincident_robots_double_the_field() {
        let g = grid(9);
        let p = g.point(2, 6);
        let single = gaussian_density(&[p], 2.0, &g).unwrap();
        let double = gaussian_density(&[p, p], 2.0, &g).unwrap();
        for (s, d) in single.values.iter().zip(double.values.iter()) {
            assert_eq!(*d, 2.0 * s);
        }
    }

    #[test]
    fn gaussian_matches_scalar_formula() {
        // neighbor grid point at distance 0.1 m, lambda = 4
        let g = grid(9);
        let (px, py) = g.point(4, 4);
        let f = gaussian_density(&[(px, py)], 4.0, &g).unwrap();
        let neighbor = f.values[g.index(5, 4)];
        assert!((neighbor - (-0.02f64).exp()).abs() < 1e-15);
        // full-field check against a direct per-point evaluation
        for i in 0..g.n_cells() {
            let (x, y) = g.coords(i);
            let d2 = (x - px) * (x - px) + (y - py) * (y - py);
            assert!((f.values[i] - (-2.0 * d2).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_rejects_outside_positions() {
        let g = grid(9);
        assert!(matches!(
            gaussian_density(&[(5.0, 0.0)], 1.0, &g),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn gaussian_permutation_invariant() {
        let g = grid(11);
        let a = g.point(1, 2);
        let b = g.point(7, 8);
        let c = g.point(4, 3);
        let f1 = gaussian_density(&[a, b, c], 5.0, &g).unwrap();
        let f2 = gaussian_density(&[c, a, b], 5.0, &g).unwrap();
        for (x, y) in f1.values.iter().zip(f2.values.iter()) {
            // summation order differs, so only up to round-off
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn advection_of_zero_density_is_zero_operator() {
        let g = grid(7);
        let ops = Operators::new(g);
        let rho = ScalarField::zeros(g);
        let a = build_advection(&rho, &ops.dx, &ops.dy);
        assert!(a.triplets().all(|(_, _, v)| v == 0.0));
    }

    #[test]
    fn advection_conserves_mass() {
        // 1^T (A u) = 0 under the periodic closure, for any u and rho > 0
        let g = grid(9);
        let ops = Operators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = ScalarField::new(
            g,
            (0..g.n_cells()).map(|_| rng.gen_range(0.1..2.0)).collect(),
        )
        .unwrap();
        let u: Vec<f64> = (0..2 * g.n_cells())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let a = build_advection(&rho, &ops.dx, &ops.dy);
        let au = a.apply(&u);
        let total: f64 = au.iter().sum();
        assert!(total.abs() < 1e-12, "mass derivative {total}");
        // and matches the dense matrix product
        let dense = a.to_dense();
        let au_dense = &dense * nalgebra::DVector::from_column_slice(&u);
        for (s, d) in au.iter().zip(au_dense.iter()) {
            assert!((s - d).abs() < 1e-12);
        }
    }

    #[test]
    fn advection_transpose_nullspace_is_constant_span() {
        let g = grid(9);
        let ops = Operators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = ScalarField::new(
            g,
            (0..g.n_cells()).map(|_| rng.gen_range(0.2..1.5)).collect(),
        )
        .unwrap();
        let a = build_advection(&rho, &ops.dx, &ops.dy);
        let dense_at = a.transpose().to_dense();
        let svd = dense_at.svd(true, true);
        let n = g.n_cells();
        let tol = 1e-10 * svd.singular_values[0];
        let null_dims: Vec<usize> = (0..n)
            .filter(|&k| svd.singular_values.get(k).map_or(true, |&s| s < tol))
            .collect();
        assert_eq!(null_dims.len(), 1, "kernel of A^T must be one-dimensional");
        // the null vector is the constant direction
        let vt = svd.v_t.unwrap();
        let k = null_dims[0];
        let row = vt.row(k);
        let unit = 1.0 / (n as f64).sqrt();
        let alignment: f64 = row.iter().map(|v| v * unit).sum::<f64>().abs();
        assert!(alignment > 1.0 - 1e-8, "null vector not constant: {alignment}");
    }

    #[test]
    fn fp_rhs_zero_for_constant_density_without_control() {
        let g = grid(9);
        let ops = Operators::new(g);
        let rho = ScalarField::constant(g, 0.7);
        let u = VectorField::zeros(g);
        let rhs = fp_rhs(&rho, &u, 0.02, &ops).unwrap();
        assert!(rhs.values.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn fp_rhs_matches_dense_evaluation() {
        let g = GridSpec::centered_square(11, 0.1, Boundary::Periodic).unwrap();
        let ops = Operators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = ScalarField::new(
            g,
            (0..g.n_cells()).map(|_| rng.gen_range(0.1..1.2)).collect(),
        )
        .unwrap();
        let u = VectorField::new(
            g,
            (0..2 * g.n_cells())
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect(),
        )
        .unwrap();
        let t_diff = 0.015;
        let rhs = fp_rhs(&rho, &u, t_diff, &ops).unwrap();

        let a = build_advection(&rho, &ops.dx, &ops.dy).to_dense();
        let b = ops.laplacian.to_dense();
        let dense = &a * nalgebra::DVector::from_column_slice(&u.values)
            + t_diff * (&b * nalgebra::DVector::from_column_slice(&rho.values));
        for (s, d) in rhs.values.iter().zip(dense.iter()) {
            assert!((s - d).abs() < 1e-12);
        }
        // mass conservation under the periodic closure
        assert!(rhs.mass().abs() < 1e-10);
    }

    #[test]
    fn min_norm_zero_rhs_gives_zero_control() {
        let g = grid(9);
        let ops = Operators::new(g);
        let rho = ScalarField::constant(g, 0.4);
        let u = min_norm_control(&rho, 0.0, &ops).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn min_norm_matches_dense_pseudoinverse() {
        let g = grid(9);
        let ops = Operators::new(g);
        let (px, py) = g.point(4, 4);
        let rho = gaussian_density(&[(px, py)], 4.0, &g)
            .unwrap()
            .floored(1e-6);
        let t_diff = 0.01;
        let u = min_norm_control(&rho, t_diff, &ops).unwrap();

        // residual bound
        let a = build_advection(&rho, &ops.dx, &ops.dy);
        let lap = ops.laplacian.apply(&rho.values);
        let b: Vec<f64> = lap.iter().map(|v| -t_diff * v).collect();
        let au = a.apply(&u.values);
        let res: f64 = au
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-8 * b_norm, "residual {res} vs rhs norm {b_norm}");

        // dense Moore-Penrose oracle
        let dense = a.to_dense();
        let svd = dense.svd(true, true);
        let u_pinv = svd
            .solve(&nalgebra::DVector::from_column_slice(&b), 1e-12)
            .unwrap();
        let mut max_dev = 0.0f64;
        for (x, y) in u.values.iter().zip(u_pinv.iter()) {
            max_dev = max_dev.max((x - y).abs());
        }
        assert!(max_dev < 1e-6, "deviation from pseudoinverse {max_dev}");
        // minimality: no shorter than the pseudoinverse solution
        assert!(u.norm() <= u_pinv.norm() + 1e-8);
        // fp_rhs at the cancellation control is numerically zero
        let rhs = fp_rhs(&rho, &u, t_diff, &ops).unwrap();
        let max_abs = rhs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs <= 1e-8, "dynamics not cancelled: {max_abs}");
    }

    #[test]
    fn min_norm_rejects_even_grids_and_nonpositive_density() {
        let g_even = GridSpec::centered_square(10, 0.1, Boundary::Periodic).unwrap();
        let ops_even = Operators::new(g_even);
        let rho = ScalarField::constant(g_even, 0.5);
        assert!(matches!(
            min_norm_control(&rho, 0.01, &ops_even),
            Err(Error::EvenGrid { .. })
        ));

        let g = grid(9);
        let ops = Operators::new(g);
        let mut rho = ScalarField::constant(g, 0.5);
        rho.values[3] = 0.0;
        assert!(matches!(
            min_norm_control(&rho, 0.01, &ops),
            Err(Error::NonPositiveDensity { .. })
        ));
    }

    #[test]
    fn padded_bounds_contain_field_range() {
        let g = grid(9);
        let mut u = VectorField::zeros(g);
        u.values[0] = -0.3;
        u.values[5] = 0.7;
        let (lo, hi) = padded_bounds(&u, 1.0);
        assert!(lo < -0.3 && hi > 0.7);
        let (lo0, hi0) = padded_bounds(&VectorField::zeros(g), 1.0);
        assert_eq!((lo0, hi0), (-1.0, 1.0));
    }
}
