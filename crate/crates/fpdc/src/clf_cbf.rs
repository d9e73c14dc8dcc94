//! Lyapunov and barrier functionals, their time derivatives as linear forms
//! in the control, the Voronoi-restricted variants, and the analytic safety
//! bounds as executable monitors.
//!
//! Every integral is a rectangle-rule quadrature with weight `l^2` on the
//! same grid the densities live on; sup-terms are maxima over the sampled
//! grid points. Keeping one quadrature convention everywhere is what makes
//! the Voronoi gap bounds hold exactly (up to round-off) in the discrete
//! setting, not just in the continuum limit.

use crate::density::{build_advection, kernel, SwarmState};
use crate::error::Error;
use crate::grid::{GridSpec, Operators, ScalarField, SparseOperator};
use crate::voronoi::Partition;
use crate::Result;

/// Restricted area the swarm density must stay out of.
#[derive(Debug, Clone)]
pub enum RegionShape {
    Circle { center: (f64, f64), radius: f64 },
}

/// A safety region together with its precomputed cell mask on a grid.
#[derive(Debug, Clone)]
pub struct SafetyRegion {
    pub shape: RegionShape,
    pub grid: GridSpec,
    pub mask: Vec<bool>,
    cells: Vec<u32>,
}

impl SafetyRegion {
    /// Circular region; must lie strictly inside the grid domain.
    pub fn circle(center: (f64, f64), radius: f64, grid: &GridSpec) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidRegion("radius must be > 0".into()));
        }
        let (x0, x1) = grid.x_extent();
        let (y0, y1) = grid.y_extent();
        if center.0 - radius <= x0
            || center.0 + radius >= x1
            || center.1 - radius <= y0
            || center.1 + radius >= y1
        {
            return Err(Error::InvalidRegion(format!(
                "circle at ({}, {}) with radius {} is not strictly inside the domain",
                center.0, center.1, radius
            )));
        }
        let mut mask = vec![false; grid.n_cells()];
        let mut cells = Vec::new();
        let r2 = radius * radius;
        for i in 0..grid.n_cells() {
            let (x, y) = grid.coords(i);
            let d2 = (x - center.0).powi(2) + (y - center.1).powi(2);
            if d2 <= r2 {
                mask[i] = true;
                cells.push(i as u32);
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidRegion(
                "region does not cover any grid cell".into(),
            ));
        }
        Ok(SafetyRegion {
            shape: RegionShape::Circle { center, radius },
            grid: *grid,
            mask,
            cells,
        })
    }

    /// Indices of the grid cells inside the region.
    #[inline]
    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn center(&self) -> (f64, f64) {
        match self.shape {
            RegionShape::Circle { center, .. } => center,
        }
    }

    pub fn radius(&self) -> f64 {
        match self.shape {
            RegionShape::Circle { radius, .. } => radius,
        }
    }
}

/// Controller gains and the density-mass safety threshold.
#[derive(Debug, Clone, Copy)]
pub struct GainSet {
    /// Convergence rate of the CLF constraint, 1/s.
    pub alpha_v: f64,
    /// Convergence rate of the CBF constraint, 1/s.
    pub alpha_h: f64,
    /// Weight of the CLF slack in the objective.
    pub gamma: f64,
    /// Admissible squared-density mass inside the restricted area.
    pub epsilon: f64,
}

impl GainSet {
    pub fn new(alpha_v: f64, alpha_h: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        for (name, v) in [
            ("alpha_v", alpha_v),
            ("alpha_h", alpha_h),
            ("gamma", gamma),
            ("epsilon", epsilon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid_parameter(name, "must be > 0"));
            }
        }
        Ok(GainSet {
            alpha_v,
            alpha_h,
            gamma,
            epsilon,
        })
    }
}

/// Threshold calibration: the squared-density mass a single robot
/// contributes to the region when standing `d_safe` outside its boundary.
/// This ties `epsilon` to the localization precision instead of leaving it a
/// free magic number.
pub fn epsilon_for_standoff(
    lambda: f64,
    region: &SafetyRegion,
    grid: &GridSpec,
    d_safe: f64,
) -> Result<f64> {
    if !(d_safe >= 0.0) {
        return Err(Error::invalid_parameter("d_safe", "must be >= 0"));
    }
    let center = region.center();
    let standoff = region.radius() + d_safe;
    // direction from the region center toward the domain center keeps the
    // probe point inside the grid
    let (x0, x1) = grid.x_extent();
    let (y0, y1) = grid.y_extent();
    let mid = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mut dir = (mid.0 - center.0, mid.1 - center.1);
    let norm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
    dir = if norm > 1e-12 {
        (dir.0 / norm, dir.1 / norm)
    } else {
        (1.0, 0.0)
    };
    let probe = (center.0 + standoff * dir.0, center.1 + standoff * dir.1);
    if !grid.contains(probe.0, probe.1) {
        return Err(Error::invalid_parameter(
            "d_safe",
            "probe position falls outside the domain",
        ));
    }
    let l2 = grid.cell_area();
    let mut eps = 0.0;
    for &cell in region.cells() {
        let (x, y) = grid.coords(cell as usize);
        let d2 = (x - probe.0).powi(2) + (y - probe.1).powi(2);
        let k = kernel(d2, lambda);
        eps += k * k * l2;
    }
    Ok(eps)
}

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `g . u + k <= s` (relaxed by the slack variable)
    LessEq,
    /// `g . u + k >= 0`
    GreaterEq,
}

/// Affine form of a functional's decrease condition, linear in the control.
#[derive(Debug, Clone)]
pub struct ConstraintForm {
    pub gradient: Vec<f64>,
    pub constant: f64,
    pub sense: Sense,
}

impl ConstraintForm {
    /// `g . u + k`.
    pub fn evaluate(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.gradient.len(), "control dimension mismatch");
        self.gradient
            .iter()
            .zip(u.iter())
            .map(|(g, ui)| g * ui)
            .sum::<f64>()
            + self.constant
    }
}

/// `V(rho) = 1/2 ||rho_d - rho||^2` over the grid.
pub fn lyapunov_v(rho: &ScalarField, rho_d: &ScalarField) -> f64 {
    debug_assert_eq!(rho.grid, rho_d.grid);
    let l2 = rho.grid.cell_area();
    0.5 * rho
        .values
        .iter()
        .zip(rho_d.values.iter())
        .map(|(r, d)| (d - r) * (d - r))
        .sum::<f64>()
        * l2
}

/// `h(rho) = epsilon - integral over the region of rho^2`; positive is safe.
pub fn barrier_h(rho: &ScalarField, region: &SafetyRegion, epsilon: f64) -> f64 {
    debug_assert_eq!(rho.grid, region.grid);
    let l2 = rho.grid.cell_area();
    let mass: f64 = region
        .cells()
        .iter()
        .map(|&i| {
            let v = rho.values[i as usize];
            v * v
        })
        .sum();
    epsilon - mass * l2
}

/// CLF decrease condition for the spatial-field controller, as a linear form
/// over the flattened field: `g . u + k <= s` with
/// `g = -l^2 A(rho)^T (rho_d - rho)` and
/// `k = alpha_v V - l^2 (rho_d - rho)^T (T B rho)`.
pub fn clf_form_sv(
    rho: &ScalarField,
    rho_d: &ScalarField,
    ops: &Operators,
    t_diff: f64,
    gains: &GainSet,
) -> Result<ConstraintForm> {
    ops.check_grid(&rho.grid, "clf_form_sv density")?;
    ops.check_grid(&rho_d.grid, "clf_form_sv target")?;
    let l2 = rho.grid.cell_area();
    let diff: Vec<f64> = rho_d
        .values
        .iter()
        .zip(rho.values.iter())
        .map(|(d, r)| d - r)
        .collect();

    let a = build_advection(rho, &ops.dx, &ops.dy);
    let mut gradient = vec![0.0; 2 * rho.grid.n_cells()];
    for (r, c, v) in a.triplets() {
        gradient[c] -= l2 * v * diff[r];
    }
    let b_rho = ops.laplacian.apply(&rho.values);
    let diffusion_term: f64 = diff
        .iter()
        .zip(b_rho.iter())
        .map(|(d, b)| d * b)
        .sum::<f64>()
        * t_diff
        * l2;
    let constant = gains.alpha_v * lyapunov_v(rho, rho_d) - diffusion_term;
    Ok(ConstraintForm {
        gradient,
        constant,
        sense: Sense::LessEq,
    })
}

/// CBF condition for the spatial-field controller: `g . u + k >= 0` with
/// `g = -2 l^2 A(rho)^T (mask . rho)` and
/// `k = alpha_h h - 2 l^2 (mask . rho)^T (T B rho)`.
pub fn cbf_form_sv(
    rho: &ScalarField,
    region: &SafetyRegion,
    ops: &Operators,
    t_diff: f64,
    gains: &GainSet,
) -> Result<ConstraintForm> {
    ops.check_grid(&rho.grid, "cbf_form_sv density")?;
    ops.check_grid(&region.grid, "cbf_form_sv region")?;
    let l2 = rho.grid.cell_area();
    let n = rho.grid.n_cells();
    let mut masked = vec![0.0; n];
    for &i in region.cells() {
        masked[i as usize] = rho.values[i as usize];
    }
    let a = build_advection(rho, &ops.dx, &ops.dy);
    let mut gradient = vec![0.0; 2 * n];
    for (r, c, v) in a.triplets() {
        if masked[r] != 0.0 {
            gradient[c] -= 2.0 * l2 * v * masked[r];
        }
    }
    let b_rho = ops.laplacian.apply(&rho.values);
    let diffusion_term: f64 = masked
        .iter()
        .zip(b_rho.iter())
        .map(|(m, b)| m * b)
        .sum::<f64>()
        * 2.0
        * t_diff
        * l2;
    let constant = gains.alpha_h * barrier_h(rho, region, gains.epsilon) - diffusion_term;
    Ok(ConstraintForm {
        gradient,
        constant,
        sense: Sense::GreaterEq,
    })
}

/// Per-robot Gaussian kernel samples with the geometry needed for the
/// closed-form gradient and Laplacian identities.
struct KernelEval {
    /// kernel value rho_i(r)
    rho: f64,
    /// r - x_i
    ex: f64,
    ey: f64,
}

#[inline]
fn eval_kernel(pos: (f64, f64), x: f64, y: f64, lambda: f64) -> KernelEval {
    let ex = x - pos.0;
    let ey = y - pos.1;
    KernelEval {
        rho: kernel(ex * ex + ey * ey, lambda),
        ex,
        ey,
    }
}

/// grad rho_i = -lambda rho_i (r - x_i)
#[inline]
fn kernel_grad(k: &KernelEval, lambda: f64) -> (f64, f64) {
    (-lambda * k.rho * k.ex, -lambda * k.rho * k.ey)
}

/// lap rho_i = rho_i (lambda^2 ||r - x_i||^2 - 2 lambda)
#[inline]
fn kernel_lap(k: &KernelEval, lambda: f64) -> f64 {
    k.rho * (lambda * lambda * (k.ex * k.ex + k.ey * k.ey) - 2.0 * lambda)
}

fn check_partition(partition: &Partition, swarm: &SwarmState, grid: &GridSpec) -> Result<()> {
    if partition.n_robots() != swarm.n_robots() {
        return Err(Error::GridMismatch(
            "partition robot count does not match swarm".into(),
        ));
    }
    if partition.owner.len() != grid.n_cells() {
        return Err(Error::GridMismatch(
            "partition built on a different grid".into(),
        ));
    }
    Ok(())
}

/// CLF decrease condition for the per-robot controllers, linear in the
/// stacked control `[u1x, u1y, u2x, u2y, ...]`.
///
/// Without a partition each robot integrates `(rho_d - rho)` over the whole
/// domain (RV-OBC); with one, `(rho_d - rho_i)` over its own cell (RV-OBC-V).
pub fn clf_form_rv(
    swarm: &SwarmState,
    rho_d: &ScalarField,
    grid: &GridSpec,
    t_diff: f64,
    gains: &GainSet,
    partition: Option<&Partition>,
) -> Result<ConstraintForm> {
    rho_d
        .grid
        .eq(grid)
        .then_some(())
        .ok_or_else(|| Error::GridMismatch("clf_form_rv target".into()))?;
    let n = swarm.n_robots();
    let lambda = swarm.precision_lambda;
    let l2 = grid.cell_area();
    let mut gradient = vec![0.0; 2 * n];
    let mut diffusion = 0.0;
    let mut value = 0.0; // V or V_c

    match partition {
        None => {
            // dense per-robot kernel table, one exp per (robot, cell)
            let nc = grid.n_cells();
            let mut kernels = vec![0.0f64; n * nc];
            let mut rho = vec![0.0f64; nc];
            for (k, &pos) in swarm.meas_pos.iter().enumerate() {
                let row = &mut kernels[k * nc..(k + 1) * nc];
                for (i, slot) in row.iter_mut().enumerate() {
                    let (x, y) = grid.coords(i);
                    let ke = eval_kernel(pos, x, y, lambda);
                    *slot = ke.rho;
                    rho[i] += ke.rho;
                }
            }
            for i in 0..nc {
                let w = rho_d.values[i] - rho[i];
                value += 0.5 * w * w;
            }
            for (k, &pos) in swarm.meas_pos.iter().enumerate() {
                let row = &kernels[k * nc..(k + 1) * nc];
                let mut gx = 0.0;
                let mut gy = 0.0;
                let mut lap = 0.0;
                for i in 0..nc {
                    let (x, y) = grid.coords(i);
                    let ex = x - pos.0;
                    let ey = y - pos.1;
                    let rho_i = row[i];
                    let w = rho_d.values[i] - rho[i];
                    gx += w * (-lambda * rho_i * ex);
                    gy += w * (-lambda * rho_i * ey);
                    lap += w * rho_i * (lambda * lambda * (ex * ex + ey * ey) - 2.0 * lambda);
                }
                gradient[2 * k] = gx * l2;
                gradient[2 * k + 1] = gy * l2;
                diffusion += lap;
            }
        }
        Some(part) => {
            check_partition(part, swarm, grid)?;
            // one pass over the cells: only the owner's kernel matters
            let mut gx = vec![0.0f64; n];
            let mut gy = vec![0.0f64; n];
            for i in 0..grid.n_cells() {
                let k = part.owner[i] as usize;
                let (x, y) = grid.coords(i);
                let ke = eval_kernel(swarm.meas_pos[k], x, y, lambda);
                let w = rho_d.values[i] - ke.rho;
                value += 0.5 * w * w;
                let (dx, dy) = kernel_grad(&ke, lambda);
                gx[k] += w * dx;
                gy[k] += w * dy;
                diffusion += w * kernel_lap(&ke, lambda);
            }
            for k in 0..n {
                gradient[2 * k] = gx[k] * l2;
                gradient[2 * k + 1] = gy[k] * l2;
            }
        }
    }

    let constant = gains.alpha_v * value * l2 - t_diff * diffusion * l2;
    Ok(ConstraintForm {
        gradient,
        constant,
        sense: Sense::LessEq,
    })
}

/// CBF condition for the per-robot controllers over the restricted area (or
/// each cell's intersection with it, when a partition is given).
pub fn cbf_form_rv(
    swarm: &SwarmState,
    region: &SafetyRegion,
    grid: &GridSpec,
    t_diff: f64,
    gains: &GainSet,
    partition: Option<&Partition>,
) -> Result<ConstraintForm> {
    region
        .grid
        .eq(grid)
        .then_some(())
        .ok_or_else(|| Error::GridMismatch("cbf_form_rv region".into()))?;
    let n = swarm.n_robots();
    let lambda = swarm.precision_lambda;
    let l2 = grid.cell_area();
    let mut gradient = vec![0.0; 2 * n];
    let mut diffusion = 0.0;
    let mut sq_mass = 0.0; // integral of rho^2 (or the cell-restricted sum)

    match partition {
        None => {
            for &cell in region.cells() {
                let i = cell as usize;
                let (x, y) = grid.coords(i);
                let evals: Vec<KernelEval> = swarm
                    .meas_pos
                    .iter()
                    .map(|&p| eval_kernel(p, x, y, lambda))
                    .collect();
                let rho: f64 = evals.iter().map(|e| e.rho).sum();
                sq_mass += rho * rho;
                for (k, ke) in evals.iter().enumerate() {
                    let (dx, dy) = kernel_grad(ke, lambda);
                    gradient[2 * k] += 2.0 * rho * dx;
                    gradient[2 * k + 1] += 2.0 * rho * dy;
                    diffusion += 2.0 * rho * kernel_lap(ke, lambda);
                }
            }
        }
        Some(part) => {
            check_partition(part, swarm, grid)?;
            for &cell in region.cells() {
                let i = cell as usize;
                let k = part.owner[i] as usize;
                let (x, y) = grid.coords(i);
                let ke = eval_kernel(swarm.meas_pos[k], x, y, lambda);
                sq_mass += ke.rho * ke.rho;
                let (dx, dy) = kernel_grad(&ke, lambda);
                gradient[2 * k] += 2.0 * ke.rho * dx;
                gradient[2 * k + 1] += 2.0 * ke.rho * dy;
                diffusion += 2.0 * ke.rho * kernel_lap(&ke, lambda);
            }
        }
    }

    for g in gradient.iter_mut() {
        *g *= l2;
    }
    let h = gains.epsilon - sq_mass * l2;
    let constant = gains.alpha_h * h - t_diff * diffusion * l2;
    Ok(ConstraintForm {
        gradient,
        constant,
        sense: Sense::GreaterEq,
    })
}

/// Voronoi Lyapunov value `V_c = sum_i 1/2 integral over C_i (rho_d - rho_i)^2`.
pub fn voronoi_lyapunov(
    swarm: &SwarmState,
    rho_d: &ScalarField,
    partition: &Partition,
    grid: &GridSpec,
) -> Result<f64> {
    check_partition(partition, swarm, grid)?;
    let lambda = swarm.precision_lambda;
    let mut acc = 0.0;
    for i in 0..grid.n_cells() {
        let k = partition.owner[i] as usize;
        let (x, y) = grid.coords(i);
        let ke = eval_kernel(swarm.meas_pos[k], x, y, lambda);
        let w = rho_d.values[i] - ke.rho;
        acc += 0.5 * w * w;
    }
    Ok(acc * grid.cell_area())
}

/// Voronoi barrier value `h_c = epsilon - sum_i integral over (C_i and A) rho_i^2`.
pub fn voronoi_barrier(
    swarm: &SwarmState,
    region: &SafetyRegion,
    partition: &Partition,
    grid: &GridSpec,
    epsilon: f64,
) -> Result<f64> {
    check_partition(partition, swarm, grid)?;
    let lambda = swarm.precision_lambda;
    let mut acc = 0.0;
    for &cell in region.cells() {
        let i = cell as usize;
        let k = partition.owner[i] as usize;
        let (x, y) = grid.coords(i);
        let ke = eval_kernel(swarm.meas_pos[k], x, y, lambda);
        acc += ke.rho * ke.rho;
    }
    Ok(epsilon - acc * grid.cell_area())
}

/// Voronoi approximation gap of the Lyapunov function and its analytic
/// bound: returns `(bound, actual)` with `actual = V_c - V` and
/// `bound = sum_i (sum_{k != i} s_k) E_i`, where `s_k` is the supremum of
/// robot `k`'s density outside its own cell and `E_i` the target-matching
/// error inside cell `i`.
pub fn vc_minus_v_bound(
    swarm: &SwarmState,
    rho_d: &ScalarField,
    partition: &Partition,
    grid: &GridSpec,
) -> Result<(f64, f64)> {
    check_partition(partition, swarm, grid)?;
    let n = swarm.n_robots();
    let lambda = swarm.precision_lambda;
    let l2 = grid.cell_area();

    let mut sup_outside = vec![0.0f64; n]; // s_k
    let mut err_inside = vec![0.0f64; n]; // E_i
    let mut v_c = 0.0;
    let mut v = 0.0;

    for i in 0..grid.n_cells() {
        let owner = partition.owner[i] as usize;
        let (x, y) = grid.coords(i);
        let mut rho = 0.0;
        let mut rho_own = 0.0;
        for (k, &pos) in swarm.meas_pos.iter().enumerate() {
            let ke = eval_kernel(pos, x, y, lambda);
            rho += ke.rho;
            if k == owner {
                rho_own = ke.rho;
            } else if ke.rho > sup_outside[k] {
                sup_outside[k] = ke.rho;
            }
        }
        let w_own = rho_d.values[i] - rho_own;
        let w_full = rho_d.values[i] - rho;
        v_c += 0.5 * w_own * w_own;
        v += 0.5 * w_full * w_full;
        err_inside[owner] += w_own.abs();
    }

    let sup_total: f64 = sup_outside.iter().sum();
    let mut bound = 0.0;
    for i in 0..n {
        bound += (sup_total - sup_outside[i]) * err_inside[i] * l2;
    }
    Ok((bound, (v_c - v) * l2))
}

/// Voronoi approximation gap of the barrier function and its bound:
/// `(bound, actual)` with `actual = h_c - h` and the bound from the mass and
/// sup of each robot's density outside its own cell.
pub fn hc_minus_h_bound(
    swarm: &SwarmState,
    region: &SafetyRegion,
    partition: &Partition,
    grid: &GridSpec,
) -> Result<(f64, f64)> {
    check_partition(partition, swarm, grid)?;
    let n = swarm.n_robots();
    let lambda = swarm.precision_lambda;
    let l2 = grid.cell_area();

    let mut sup_outside = vec![0.0f64; n]; // s_k over the cell complement
    let mut mass_outside = vec![0.0f64; n]; // S_k
    let mut own_mass_in_region = vec![0.0f64; n]; // integral over C_i and A of rho_i
    let mut sq_full = 0.0;
    let mut sq_own = 0.0;

    for i in 0..grid.n_cells() {
        let owner = partition.owner[i] as usize;
        let (x, y) = grid.coords(i);
        let in_region = region.mask[i];
        let mut rho = 0.0;
        let mut rho_own = 0.0;
        for (k, &pos) in swarm.meas_pos.iter().enumerate() {
            let ke = eval_kernel(pos, x, y, lambda);
            rho += ke.rho;
            if k == owner {
                rho_own = ke.rho;
            } else {
                mass_outside[k] += ke.rho;
                if ke.rho > sup_outside[k] {
                    sup_outside[k] = ke.rho;
                }
            }
        }
        if in_region {
            sq_full += rho * rho;
            sq_own += rho_own * rho_own;
            own_mass_in_region[owner] += rho_own;
        }
    }

    let sup_total: f64 = sup_outside.iter().sum();
    let mass_total: f64 = mass_outside.iter().sum();
    let mut bound = 0.0;
    for i in 0..n {
        let sup_others = sup_total - sup_outside[i];
        let mass_others = (mass_total - mass_outside[i]) * l2;
        bound += sup_others * mass_others + 2.0 * sup_others * own_mass_in_region[i] * l2;
    }
    // h_c - h = integral of rho^2 - sum of cell-restricted rho_i^2
    let actual = (sq_full - sq_own) * l2;
    Ok((bound, actual))
}

/// Worst-case approach directions: the negated, normalized CBF gradient
/// coefficient of each robot; ties fall back to the unit vector toward the
/// region center.
pub fn worst_case_directions(
    swarm: &SwarmState,
    region: &SafetyRegion,
    grid: &GridSpec,
    gains: &GainSet,
) -> Result<Vec<(f64, f64)>> {
    let form = cbf_form_rv(swarm, region, grid, 0.0, gains, None)?;
    let center = region.center();
    Ok((0..swarm.n_robots())
        .map(|k| {
            let gx = form.gradient[2 * k];
            let gy = form.gradient[2 * k + 1];
            let norm = (gx * gx + gy * gy).sqrt();
            if norm > 1e-14 {
                (-gx / norm, -gy / norm)
            } else {
                let dx = center.0 - swarm.meas_pos[k].0;
                let dy = center.1 - swarm.meas_pos[k].1;
                let d = (dx * dx + dy * dy).sqrt();
                if d > 1e-12 {
                    (dx / d, dy / d)
                } else {
                    (1.0, 0.0)
                }
            }
        })
        .collect())
}

/// Result of the one-step worst-case safety monitor.
#[derive(Debug, Clone)]
pub struct BackstepCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Worst-case commanded-plus-noise displacement over one step.
    pub kappa: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// Weighted averages of the kernel-shift factor; 1 in the massless limit.
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub directions: Vec<(f64, f64)>,
}

/// One-step sufficient condition for the CBF constraint to remain feasible
/// after every robot applies the maximum command along its worst-case
/// direction and suffers worst-case motion noise.
///
/// Both sides of the inequality are evaluated from region-restricted moments
/// of the current swarm density; the shifted-kernel averages are computed as
/// ratio-free numerator integrals so robots with no mass in the region
/// contribute nothing to either side.
pub fn backstep_bound_check(
    swarm_prev: &SwarmState,
    region: &SafetyRegion,
    grid: &GridSpec,
    model: &crate::density::DiffusionModel,
    gains: &GainSet,
    dt: f64,
) -> Result<BackstepCheck> {
    if !(dt > 0.0) {
        return Err(Error::invalid_parameter("dt", "must be > 0"));
    }
    let n = swarm_prev.n_robots();
    let lambda = swarm_prev.precision_lambda;
    let l2 = grid.cell_area();
    let u_max = model.u_max();
    let t_diff = model.t_diff();
    let kappa = (1.0 + model.c()) * dt * u_max;

    let directions = worst_case_directions(swarm_prev, region, grid, gains)?;
    let half_shift = 0.5 * lambda * kappa * kappa;

    let mut m = [0.0f64; 3]; // M0, M1, M2
    let mut shifted = [0.0f64; 3]; // beta-weighted counterparts
    let cells = region.cells();
    let mut kern = vec![0.0f64; n];
    let mut beta = vec![0.0f64; n];
    let mut ndote = vec![0.0f64; n];
    let mut e2 = vec![0.0f64; n];

    for &cell in cells {
        let i = cell as usize;
        let (x, y) = grid.coords(i);
        let mut rho = 0.0;
        let mut rho_new = 0.0;
        for k in 0..n {
            let pos = swarm_prev.meas_pos[k];
            let ex = x - pos.0;
            let ey = y - pos.1;
            let d2 = ex * ex + ey * ey;
            let rk = kernel(d2, lambda);
            let (nx, ny) = directions[k];
            let dot = nx * ex + ny * ey;
            let bk = (lambda * kappa * dot - half_shift).exp();
            kern[k] = rk;
            beta[k] = bk;
            ndote[k] = dot;
            e2[k] = d2;
            rho += rk;
            rho_new += rk * bk;
        }
        for k in 0..n {
            let w_old = rho * kern[k];
            let w_new = rho_new * kern[k] * beta[k];
            m[0] += w_old;
            m[1] += w_old * ndote[k];
            m[2] += w_old * e2[k];
            shifted[0] += w_new;
            shifted[1] += w_new * ndote[k];
            shifted[2] += w_new * e2[k];
        }
    }
    for v in m.iter_mut().chain(shifted.iter_mut()) {
        *v *= l2;
    }

    let ah_2l = gains.alpha_h / (2.0 * lambda);
    let lhs = u_max * (shifted[1] + m[1]);
    let rhs = t_diff * lambda * (shifted[2] - m[2]) - 2.0 * t_diff * lambda * kappa * shifted[1]
        + shifted[0] * (t_diff * lambda * kappa * kappa + u_max * kappa - 2.0 * t_diff + ah_2l)
        + (2.0 * t_diff - ah_2l) * m[0];
    let tol = 1e-12 * lhs.abs().max(rhs.abs()).max(1.0);
    let ratio = |num: f64, den: f64| if den.abs() > 1e-30 { num / den } else { 1.0 };

    Ok(BackstepCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - tol,
        kappa,
        m0: m[0],
        m1: m[1],
        m2: m[2],
        beta0: ratio(shifted[0], m[0]),
        beta1: ratio(shifted[1], m[1]),
        beta2: ratio(shifted[2], m[2]),
        directions,
    })
}

/// Evaluate a spatial-field constraint expression directly from the density
/// time-derivative, used to cross-check the linear forms and by the
/// controllers' post-hoc safety assertions.
pub fn sv_constraint_direct(
    rho: &ScalarField,
    rho_d: &ScalarField,
    region: &SafetyRegion,
    rho_t: &ScalarField,
    gains: &GainSet,
) -> (f64, f64) {
    let l2 = rho.grid.cell_area();
    let mut clf = 0.0;
    for i in 0..rho.grid.n_cells() {
        let d = rho_d.values[i] - rho.values[i];
        clf += 0.5 * gains.alpha_v * d * d - d * rho_t.values[i];
    }
    let mut cbf = gains.alpha_h * gains.epsilon;
    for &cell in region.cells() {
        let i = cell as usize;
        cbf += (-gains.alpha_h * rho.values[i] * rho.values[i]
            - 2.0 * rho.values[i] * rho_t.values[i])
            * l2;
    }
    (clf * l2, cbf)
}

// Re-export used by controllers building the SV forms.
pub(crate) fn advection_for(rho: &ScalarField, ops: &Operators) -> SparseOperator {
    build_advection(rho, &ops.dx, &ops.dy)
}

/// Evaluate the RV Lyapunov functional for given positions, used by the FD
/// oracles in tests and the simulation metrics.
pub fn swarm_lyapunov(
    positions: &[(f64, f64)],
    lambda: f64,
    rho_d: &ScalarField,
    grid: &GridSpec,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.n_cells() {
        let (x, y) = grid.coords(i);
        let mut rho = 0.0;
        for &p in positions {
            rho += eval_kernel(p, x, y, lambda).rho;
        }
        let w = rho_d.values[i] - rho;
        acc += 0.5 * w * w;
    }
    acc * grid.cell_area()
}

/// Evaluate the barrier for given positions.
pub fn swarm_barrier(
    positions: &[(f64, f64)],
    lambda: f64,
    region: &SafetyRegion,
    grid: &GridSpec,
    epsilon: f64,
) -> f64 {
    let mut acc = 0.0;
    for &cell in region.cells() {
        let (x, y) = grid.coords(cell as usize);
        let mut rho = 0.0;
        for &p in positions {
            rho += eval_kernel(p, x, y, lambda).rho;
        }
        acc += rho * rho;
    }
    epsilon - acc * grid.cell_area()
}
