//! Short training sanity run: a few epochs of each variant on the unseen
//! split, plus frozen probes, to check the expected orderings emerge.
use swingup::catalog::{build_catalog, make_split, SplitMode};
use swingup::dataset::generate_dataset;
use swingup::models::Variant;
use swingup::pipeline::{train, train_disentangle, Hyper, ProbeMode};
use swingup::simdyn::{calibrate_impulse, SwingConfig};
use swingup::tactile::TactileConfig;

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let cat = build_catalog();
    let mut sim = SwingConfig::default();
    sim.l_imp = calibrate_impulse(&cat, &sim).unwrap();
    let tact = TactileConfig::default();
    eprintln!("generating dataset...");
    let ds = generate_dataset(&cat, &sim, &tact, 42, 0).unwrap();
    let split = make_split(&cat, SplitMode::Unseen, 0);

    let hyper = Hyper { epochs, verbose: true, ..Hyper::default() };
    let mut results = Vec::new();
    for variant in [Variant::None, Variant::Pp, Variant::Tilting, Variant::Shaking, Variant::Combined] {
        let t0 = std::time::Instant::now();
        let (model, report) = train(&ds, &split, variant, &hyper).unwrap();
        eprintln!(
            "{variant}: test mae {:.2} deg (best epoch {}) in {:.1}s",
            report.eval.mae_deg, report.best_epoch, t0.elapsed().as_secs_f64()
        );
        results.push((variant, report.eval.mae_deg));
        if matches!(variant, Variant::Tilting | Variant::Shaking) {
            let (_, probe) = train_disentangle(&model, &ds, &split, &hyper, ProbeMode::Frozen).unwrap();
            eprintln!(
                "  probe[{variant}]: friction {:.1}%  mass {:.3}  com {:.3}  moi {:.3}",
                100.0 * probe.friction_acc, probe.mass_mae, probe.com_mae, probe.moi_mae
            );
        }
    }
    for (v, mae) in &results {
        println!("{v},{mae:.3}");
    }
}
