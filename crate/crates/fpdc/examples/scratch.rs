use fpdc::clf_cbf::{backstep_bound_check, GainSet, SafetyRegion};
use fpdc::density::{gaussian_density, min_norm_control, DiffusionModel};
use fpdc::grid::{Boundary, GridSpec, Operators};
use fpdc::SwarmState;

fn main() {
    // min-norm convergence across floors and grids
    for n in [21usize, 41] {
        let g = GridSpec::centered_square(n, 0.1, Boundary::Periodic).unwrap();
        let ops = Operators::new(g);
        for floor in [1e-6, 1e-9, 1e-12] {
            for lambda in [9.0, 25.0, 100.0] {
                let rho = gaussian_density(&[(0.5, -0.4), (-0.6, 0.3)], lambda, &g)
                    .unwrap()
                    .floored(floor);
                let t = std::time::Instant::now();
                match min_norm_control(&rho, 0.01, &ops) {
                    Ok(u) => println!(
                        "n={n} floor={floor:.0e} lambda={lambda}: ok, |u|={:.3e}, {:?}",
                        u.norm(),
                        t.elapsed()
                    ),
                    Err(e) => println!("n={n} floor={floor:.0e} lambda={lambda}: FAIL {e}"),
                }
            }
        }
    }

    // adversarial backstep scan
    let g = GridSpec::centered_square(41, 0.1, Boundary::Periodic).unwrap();
    let region = SafetyRegion::circle((-0.5, 0.5), 0.6, &g).unwrap();
    let gains = GainSet::new(2.0, 1.0, 50.0, 1e-2).unwrap();
    let c0 = region.center();
    for lambda in [25.0, 100.0] {
        for c in [0.3, 0.5, 1.0, 2.0, 4.0] {
            for standoff in [0.02, 0.1, 0.3] {
                let rr = region.radius() + standoff;
                let positions: Vec<(f64, f64)> = (0..6)
                    .map(|k| {
                        let ang = k as f64 * std::f64::consts::TAU / 6.0;
                        (c0.0 + rr * ang.cos(), c0.1 + rr * ang.sin())
                    })
                    .collect();
                let s = SwarmState::new(positions.clone(), positions, lambda, &g).unwrap();
                let model = DiffusionModel::new(c, 1.0).unwrap();
                let chk = backstep_bound_check(&s, &region, &g, &model, &gains, 1.0).unwrap();
                println!(
                    "lambda={lambda} c={c} standoff={standoff}: holds={} lhs={:.4e} rhs={:.4e} kappa={:.2}",
                    chk.holds, chk.lhs, chk.rhs, chk.kappa
                );
            }
        }
    }
}
