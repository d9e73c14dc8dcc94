//! Grid-cell Voronoi partition of the domain by measured robot positions.

use crate::error::Error;
use crate::grid::GridSpec;
use crate::Result;

/// Ownership of every grid cell by its nearest robot. Exhaustive and
/// disjoint: each cell has exactly one owner.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Owning robot index per flattened grid cell.
    pub owner: Vec<u32>,
    /// Number of cells owned by each robot; sums to `nx * ny`.
    pub counts: Vec<usize>,
}

impl Partition {
    pub fn n_robots(&self) -> usize {
        self.counts.len()
    }
}

/// Assign each grid-cell center to the nearest measured position in
/// Euclidean distance; ties go to the lowest robot index.
///
/// Distances are taken in physical coordinates: robots do not wrap around a
/// periodic domain boundary.
pub fn partition_grid(meas_pos: &[(f64, f64)], grid: &GridSpec) -> Result<Partition> {
    if meas_pos.is_empty() {
        return Err(Error::EmptySwarm);
    }
    let n = meas_pos.len();
    let mut owner = vec![0u32; grid.n_cells()];
    let mut counts = vec![0usize; n];
    let l = grid.spacing_l;
    // hoist the per-row y-distance out of the cell loop
    let mut dy2 = vec![0.0f64; n];
    let mut i = 0;
    for iy in 0..grid.ny {
        let y = grid.origin.1 + iy as f64 * l;
        for (k, &(_, py)) in meas_pos.iter().enumerate() {
            let d = y - py;
            dy2[k] = d * d;
        }
        for ix in 0..grid.nx {
            let x = grid.origin.0 + ix as f64 * l;
            let mut best = 0u32;
            let mut best_d2 = {
                let d = x - meas_pos[0].0;
                d * d + dy2[0]
            };
            for k in 1..n {
                let d = x - meas_pos[k].0;
                let d2 = d * d + dy2[k];
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = k as u32;
                }
            }
            owner[i + ix] = best;
            counts[best as usize] += 1;
        }
        i += grid.nx;
    }
    Ok(Partition { owner, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::centered_square(n, 0.1, Boundary::Periodic).unwrap()
    }

    #[test]
    fn single_robot_owns_everything() {
        let g = grid(9);
        let p = partition_grid(&[(0.3, -0.2)], &g).unwrap();
        assert!(p.owner.iter().all(|&o| o == 0));
        assert_eq!(p.counts, vec![g.n_cells()]);
    }

    #[test]
    fn empty_swarm_is_an_error() {
        let g = grid(9);
        assert!(matches!(partition_grid(&[], &g), Err(Error::EmptySwarm)));
    }

    #[test]
    fn symmetric_pair_splits_on_bisector_with_tie_break() {
        let g = grid(9);
        // symmetric about the x = 0 column; the equidistant column goes to
        // the lower index
        let p = partition_grid(&[(-0.2, 0.0), (0.2, 0.0)], &g).unwrap();
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (x, _) = g.point(ix, iy);
                let expect = if x <= 0.0 { 0 } else { 1 };
                assert_eq!(p.owner[g.index(ix, iy)], expect, "cell ({ix},{iy})");
            }
        }
    }

    #[test]
    fn matches_brute_force_scan() {
        let g = grid(41);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let robots: Vec<(f64, f64)> = (0..6)
            .map(|_| (rng.gen_range(-1.9..1.9), rng.gen_range(-1.9..1.9)))
            .collect();
        let p = partition_grid(&robots, &g).unwrap();
        for i in 0..g.n_cells() {
            let (x, y) = g.coords(i);
            // straightforward per-cell argmin, written independently
            let mut best = 0usize;
            let mut best_d2 = f64::INFINITY;
            for (k, &(px, py)) in robots.iter().enumerate() {
                let d2 = (x - px).powi(2) + (y - py).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = k;
                }
            }
            assert_eq!(p.owner[i] as usize, best, "cell {i}");
        }
        assert_eq!(p.counts.iter().sum::<usize>(), g.n_cells());
    }

    #[test]
    fn label_permutation_permutes_ownership() {
        let g = grid(21);
        let robots = vec![(-1.0, -1.0), (0.5, 0.3), (1.2, -0.7)];
        let swapped = vec![robots[2], robots[0], robots[1]];
        let p1 = partition_grid(&robots, &g).unwrap();
        let p2 = partition_grid(&swapped, &g).unwrap();
        // robots are in general position here, so no tie-break cells
        let relabel = [1u32, 2, 0]; // old index -> new index
        for i in 0..g.n_cells() {
            assert_eq!(relabel[p1.owner[i] as usize], p2.owner[i]);
        }
    }
}
