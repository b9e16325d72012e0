//! Scan t_stop for the steepness of angle(w) and oracle closed-loop margins.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swingup::catalog::{build_catalog, unseen_object_ids};
use swingup::control::{closed_loop_eval, Predictor};
use swingup::simdyn::{calibrate_impulse, simulate_swing, SwingConfig};
use swingup::tactile::TactileConfig;

fn main() {
    let cat = build_catalog();
    let tact = TactileConfig::default().noise_free();
    let unseen: Vec<_> = unseen_object_ids(&cat)
        .into_iter()
        .map(|id| cat.spec(id).unwrap().clone())
        .collect();

    for t_stop in [0.40, 0.35, 0.30, 0.25] {
        let mut sim = SwingConfig::default().noise_free();
        sim.t_stop = t_stop;
        sim.l_imp = match calibrate_impulse(&cat, &sim) {
            Ok(l) => l,
            Err(e) => {
                println!("t_stop={t_stop}: calibration failed: {e}");
                continue;
            }
        };
        let mut max_gap: f64 = 0.0;
        let mut min_floor = f64::INFINITY;
        for spec in &unseen {
            let angle = |w: f64| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                simulate_swing(spec, w, &sim, &mut rng).unwrap().final_angle_deg
            };
            let mut prev = angle(0.0);
            min_floor = min_floor.min(prev);
            for i in 1..=400 {
                let a = angle(i as f64 / 400.0);
                max_gap = max_gap.max(a - prev);
                prev = a;
            }
        }
        // Heaviest catalog object floor (spans-5-degrees check).
        let heaviest = cat.specs.iter().max_by(|a, b| a.moi_gm2.partial_cmp(&b.moi_gm2).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let floor_heavy = simulate_swing(heaviest, 0.0, &sim, &mut rng).unwrap().final_angle_deg;

        for n in [201usize, 401] {
            let report = closed_loop_eval(
                &Predictor::SimulatorOracle, &unseen, &sim, &tact,
                &[45.0, 90.0, 135.0, 180.0], 5, n, 12,
            ).unwrap();
            let bound = 200.0 / (n as f64 - 1.0);
            println!(
                "t_stop={t_stop:.2} n={n:>3}: L={:.4e} gap400={max_gap:6.2} floor_min={min_floor:5.1} heavy_floor={floor_heavy:4.2} | oracle mean {:.4} (x{:.2} of bound) max {:.4} (x{:.2})",
                sim.l_imp, report.grand_mean, report.grand_mean / bound,
                report.max_error(), report.max_error() / bound
            );
        }
    }
}
