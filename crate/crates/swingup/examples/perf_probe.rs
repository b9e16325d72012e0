//! One-off timing probe for hot kernels and per-episode gradient cost.
use std::time::Instant;
use swingup::catalog::build_catalog;
use swingup::dataset::generate_episode;
use swingup::models::{EncoderConfig, Normalization, SampleInput, TrainedModel, Variant};
use swingup::simdyn::SwingConfig;
use swingup::tactile::TactileConfig;
use swingup::tensor::{matmul_abt_acc, matmul_acc, Tape, Tensor};

fn bench<F: FnMut()>(name: &str, iters: usize, mut f: F) {
    let t0 = Instant::now();
    for _ in 0..iters {
        f();
    }
    let ms = t0.elapsed().as_secs_f64() * 1000.0 / iters as f64;
    println!("{name:>40}: {ms:8.3} ms");
}

fn main() {
    // conv2-shaped matmul: [32,144] @ [144,3120]
    let a = vec![0.5f64; 32 * 144];
    let b = vec![0.25f64; 144 * 3120];
    let mut c = vec![0.0f64; 32 * 3120];
    bench("matmul 32x144x3120 (14.4M MAC)", 20, || {
        c.iter_mut().for_each(|v| *v = 0.0);
        matmul_acc(&a, &b, &mut c, 32, 144, 3120);
    });
    let mut gw = vec![0.0f64; 32 * 144];
    bench("matmul_abt 32x3120x144 (14.4M MAC)", 20, || {
        gw.iter_mut().for_each(|v| *v = 0.0);
        matmul_abt_acc(&c, &b, &mut gw, 32, 3120, 144);
    });

    // Full conv stack fwd on a [65,2,12,14] batch through a tape.
    let enc = EncoderConfig::default();
    let cat = build_catalog();
    let norm = Normalization::from_catalog(&cat);
    let model = TrainedModel::init(Variant::Shaking, enc, norm.clone(), 1);
    let sim = SwingConfig::default();
    let tact = TactileConfig::default();
    let ep = generate_episode(&cat.specs[5], 3, 0, &sim, &tact).unwrap();
    let input = SampleInput::for_episode(&model, &ep, &cat).unwrap();

    bench("tape leaves only (param copy)", 50, || {
        let mut tape = Tape::new();
        let _ = swingup::models::VarMap::new(&model.params, &mut tape);
    });
    bench("shake embed fwd", 10, || {
        let _ = model.embedding(&input).unwrap();
    });
    bench("shake fwd+bwd", 10, || {
        let _ = model.episode_loss_and_grads(&input).unwrap();
    });

    // LSTM-only cost: 65 steps on random 40-d features.
    let feats = Tensor::new(vec![65 * 40], vec![0.1; 65 * 40]).unwrap();
    bench("lstm 65 steps fwd+bwd", 20, || {
        let mut tape = Tape::new();
        let (vars, leaves) = swingup::models::VarMap::new(&model.params, &mut tape);
        let f = tape.leaf(feats.clone(), false);
        let hidden = 40;
        let (w_ih, w_hh, bb) = (
            vars.get("shake.lstm.w_ih"),
            vars.get("shake.lstm.w_hh"),
            vars.get("shake.lstm.b"),
        );
        let mut h = tape.leaf(Tensor::zeros(vec![hidden]), false);
        let mut cc = tape.leaf(Tensor::zeros(vec![hidden]), false);
        let mut last = None;
        for t in 0..65 {
            let x = tape.slice(f, t * 40, 40).unwrap();
            let hc = tape.lstm_cell(x, h, cc, w_ih, w_hh, bb).unwrap();
            h = tape.slice(hc, 0, hidden).unwrap();
            cc = tape.slice(hc, hidden, hidden).unwrap();
            last = Some(hc);
        }
        let y = tape.mean(last.unwrap());
        tape.backward(y).unwrap();
        let _ = model.params.collect_grads(&tape, &leaves);
    });

    for variant in [Variant::Tilting, Variant::Shaking, Variant::Combined] {
        let model = TrainedModel::init(variant, EncoderConfig::default(), norm.clone(), 1);
        let input = SampleInput::for_episode(&model, &ep, &cat).unwrap();
        let t0 = Instant::now();
        for _ in 0..8 {
            let _ = model.episode_loss_and_grads(&input).unwrap();
        }
        println!(
            "{variant:>9} fwd+bwd: {:7.2} ms/episode",
            t0.elapsed().as_secs_f64() * 1000.0 / 8.0
        );
    }
}
