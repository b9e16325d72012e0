//! Train the two single-action encoders once, then sweep probe training
//! settings on the frozen embeddings.
use swingup::catalog::{build_catalog, make_split, SplitMode};
use swingup::dataset::generate_dataset;
use swingup::models::Variant;
use swingup::pipeline::{train, train_disentangle, Hyper, ProbeMode};
use swingup::simdyn::{calibrate_impulse, SwingConfig};
use swingup::tactile::TactileConfig;

fn main() {
    let enc_epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let cat = build_catalog();
    let mut sim = SwingConfig::default();
    sim.l_imp = calibrate_impulse(&cat, &sim).unwrap();
    let tact = TactileConfig::default();
    eprintln!("dataset...");
    let ds = generate_dataset(&cat, &sim, &tact, 42, 0).unwrap();
    let split = make_split(&cat, SplitMode::Unseen, 0);

    let hyper = Hyper { epochs: enc_epochs, verbose: false, ..Hyper::default() };
    let mut models = Vec::new();
    for variant in [Variant::Tilting, Variant::Shaking] {
        let t0 = std::time::Instant::now();
        let (model, report) = train(&ds, &split, variant, &hyper).unwrap();
        eprintln!(
            "{variant}: test mae {:.2} (best ep {}) in {:.0}s",
            report.eval.mae_deg, report.best_epoch, t0.elapsed().as_secs_f64()
        );
        models.push(model);
    }

    for (epochs, lr) in [(30usize, 1e-3), (100, 1e-3), (100, 3e-3), (300, 3e-3)] {
        for model in &models {
            let h = Hyper { epochs, lr, verbose: false, ..Hyper::default() };
            let t0 = std::time::Instant::now();
            let (_, p) = train_disentangle(model, &ds, &split, &h, ProbeMode::Frozen).unwrap();
            println!(
                "probe[{}] epochs={epochs} lr={lr}: friction {:5.1}%  mass {:.3}  com {:.3}  moi {:.3}  ({:.0}s)",
                model.variant, 100.0 * p.friction_acc, p.mass_mae, p.com_mae, p.moi_mae,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
