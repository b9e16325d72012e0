//! Probe: oracle-predictor closed-loop error vs the grid-resolution bound,
//! and the local slope structure of angle(w) near the goals.
use swingup::catalog::{build_catalog, unseen_object_ids};
use swingup::control::{closed_loop_eval, Predictor};
use swingup::simdyn::{calibrate_impulse, simulate_swing, SwingConfig};
use swingup::tactile::TactileConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cat = build_catalog();
    let mut sim = SwingConfig::default().noise_free();
    sim.l_imp = calibrate_impulse(&cat, &sim).unwrap();
    println!("calibrated l_imp = {:.6e}", sim.l_imp);
    let tact = TactileConfig::default().noise_free();

    let unseen: Vec<_> = unseen_object_ids(&cat)
        .into_iter()
        .map(|id| cat.spec(id).unwrap().clone())
        .collect();

    // Curve snapshot for each unseen object.
    for spec in &unseen {
        let angle = |w: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            simulate_swing(spec, w, &sim, &mut rng).unwrap().final_angle_deg
        };
        let lo = angle(0.0);
        let hi = angle(1.0);
        // max slope over the 201-grid
        let mut max_gap: f64 = 0.0;
        let mut prev = lo;
        for i in 1..=200 {
            let a = angle(i as f64 / 200.0);
            max_gap = max_gap.max(a - prev);
            prev = a;
        }
        println!(
            "object {:>2} ({:?}): angle range [{:6.2}, {:6.2}]  max grid gap {:6.2} deg",
            spec.id, spec.friction, lo, hi, max_gap
        );
    }

    for n in [201usize, 401] {
        let report = closed_loop_eval(
            &Predictor::SimulatorOracle,
            &unseen,
            &sim,
            &tact,
            &[45.0, 90.0, 135.0, 180.0],
            5,
            n,
            12,
        )
        .unwrap();
        let bound = 200.0 / (n as f64 - 1.0);
        println!(
            "oracle n={n}: grand mean {:.4} deg, max {:.4} deg, bound {:.4} deg -> mean {} / max {}",
            report.grand_mean,
            report.max_error(),
            bound,
            if report.grand_mean < bound { "PASS" } else { "FAIL" },
            if report.max_error() < bound { "PASS" } else { "FAIL" },
        );
        for (id, mean) in &report.per_object_mean {
            print!("  obj {id}: {mean:.3}");
        }
        println!();
    }
}
