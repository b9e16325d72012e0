//! Property tests over the binary containers and core invariants that are
//! cheap enough to randomize.

use proptest::prelude::*;
use swingup::catalog::build_catalog;
use swingup::dataset::{read_dataset, write_dataset, Dataset, Episode};
use swingup::models::checkpoint::{read_checkpoint, write_checkpoint};
use swingup::models::{EncoderConfig, Normalization, TrainedModel, Variant};
use swingup::simdyn::{grip_force, SwingConfig};
use swingup::tactile::{TactileFrame, FRAME_LEN, SHAKE_FRAMES_MAX, SHAKE_FRAMES_MIN};
use swingup::tensor::check::{finite_diff_grad, max_rel_err, FD_STEP};
use swingup::tensor::{Tape, Tensor};

fn frame_strategy() -> impl Strategy<Value = TactileFrame> {
    proptest::collection::vec(-1.0f32..1.0, FRAME_LEN)
        .prop_map(|v| TactileFrame::from_vec(v.into_iter().map(f64::from).collect()).unwrap())
}

fn episode_strategy() -> impl Strategy<Value = Episode> {
    (
        0u32..33,
        frame_strategy(),
        frame_strategy(),
        proptest::collection::vec(frame_strategy(), SHAKE_FRAMES_MIN..=SHAKE_FRAMES_MAX),
        0u32..u32::MAX,
        0f32..=200.0,
        any::<u64>(),
    )
        .prop_map(|(object_id, t0, t1, shake, wq, angle, seed)| Episode {
            object_id,
            tilt_frames: [t0, t1],
            shake_frames: shake,
            control_w: f64::from(wq as f32 / u32::MAX as f32),
            final_angle_deg: f64::from(angle),
            seed,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dataset_roundtrip_preserves_bytes(episodes in proptest::collection::vec(episode_strategy(), 1..4)) {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset {
            episodes,
            catalog: build_catalog(),
            seed: 1,
            config_fingerprint: 2,
        };
        let p1 = dir.path().join("a.swng");
        let p2 = dir.path().join("b.swng");
        write_dataset(&p1, &ds).unwrap();
        let loaded = read_dataset(&p1).unwrap();
        write_dataset(&p2, &loaded).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        prop_assert_eq!(ds.episodes.len(), loaded.episodes.len());
        for (a, b) in ds.episodes.iter().zip(&loaded.episodes) {
            prop_assert_eq!(a.object_id, b.object_id);
            prop_assert_eq!(a.seed, b.seed);
            prop_assert_eq!(a.control_w.to_bits(), b.control_w.to_bits());
        }
    }

    #[test]
    fn checkpoint_roundtrip_any_variant(vi in 0usize..5, seed in any::<u64>()) {
        let variant = Variant::ALL[vi];
        let cat = build_catalog();
        let model = TrainedModel::init(
            variant,
            EncoderConfig::downsized(),
            Normalization::from_catalog(&cat),
            seed,
        );
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("m.sbnt");
        let p2 = dir.path().join("n.sbnt");
        write_checkpoint(&p1, &model, seed).unwrap();
        let (loaded, fp) = read_checkpoint(&p1).unwrap();
        prop_assert_eq!(fp, seed);
        prop_assert_eq!(loaded.variant, variant);
        write_checkpoint(&p2, &loaded, fp).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn grip_force_monotone_in_w(w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0) {
        let cfg = SwingConfig::default();
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        prop_assert!(grip_force(lo, &cfg).unwrap() >= grip_force(hi, &cfg).unwrap());
    }

    #[test]
    fn random_shape_matmul_gradcheck(m in 1usize..4, k in 1usize..5, n in 1usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a0: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b0: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let build = |t: &mut Tape, data: &[f64]| {
            let a = t.leaf(Tensor::new(vec![m, k], data.to_vec()).unwrap(), true);
            let b = t.leaf(Tensor::new(vec![k, n], b0.clone()).unwrap(), false);
            let y = t.matmul(a, b).unwrap();
            let y = t.tanh(y);
            (a, t.mean(y))
        };
        let mut tape = Tape::new();
        let (a, loss) = build(&mut tape, &a0);
        tape.backward(loss).unwrap();
        let analytic = tape.grad(a).unwrap().to_vec();
        let numeric = finite_diff_grad(
            |v| {
                let mut t = Tape::new();
                let (_, loss) = build(&mut t, v);
                t.value(loss).item()
            },
            &a0,
            FD_STEP,
        );
        prop_assert!(max_rel_err(&analytic, &numeric) < 1e-4);
    }
}
