//! Dataset splits, self-supervised training, evaluation, and the
//! disentanglement probes.
//!
//! Training minimizes mean squared error on the angle normalized by 200°,
//! with minibatch adaptive-moment descent. Shake sequences differ in length,
//! so batches fan out per sample (in parallel) and average the returned
//! flat gradients at a barrier; the reduction order is the batch order,
//! which keeps runs bit-deterministic for a fixed seed regardless of the
//! worker count.

use crate::catalog::SplitSpec;
use crate::dataset::{derive_seed, Dataset};
use crate::error::{Error, Result};
use crate::exec::par_map_slice;
use crate::models::{
    EncoderConfig, Normalization, ProbeModel, SampleInput, TrainedModel, VarMap, Variant,
    ANGLE_SCALE_DEG,
};
use crate::tensor::optim::{adam_step, AdamConfig, AdamState};
use crate::tensor::Tape;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            lr: 1e-3,
            batch_size: 16,
            epochs: 30,
            seed: 0,
            verbose: false,
        }
    }
}

/// Evaluation summary: overall and per-object mean absolute error, degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mae_deg: f64,
    pub per_object: Vec<(u32, f64)>,
    pub n_episodes: usize,
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub variant: Variant,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub eval: EvalReport,
}

/// Resolve a split into (train, test) episode indices within `dataset`,
/// validating the per-object trial counts.
pub fn split_indices(dataset: &Dataset, split: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let per_object = crate::catalog::TRIALS_PER_OBJECT;
    let expected = dataset.catalog.specs.len() * per_object;
    if dataset.episodes.len() != expected {
        return Err(Error::InvalidArg(format!(
            "dataset has {} episodes, expected {expected} (50 per object)",
            dataset.episodes.len()
        )));
    }
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, ep) in dataset.episodes.iter().enumerate() {
        let trial = {
            let c = counts.entry(ep.object_id).or_insert(0);
            let t = *c;
            *c += 1;
            t
        };
        if split.is_train(ep.object_id, trial) {
            train.push(idx);
        } else if split.is_test(ep.object_id, trial) {
            test.push(idx);
        }
    }
    if counts.values().any(|&c| c != per_object) || counts.len() != dataset.catalog.specs.len() {
        return Err(Error::InvalidArg(
            "dataset episode counts per object do not match the catalog".into(),
        ));
    }
    Ok((train, test))
}

/// Mean absolute error of `model` over the episodes at `indices`.
fn mae_over(model: &TrainedModel, dataset: &Dataset, indices: &[usize]) -> Result<EvalReport> {
    let errs: Result<Vec<(u32, f64)>> = par_map_slice(indices, |&i| {
        let ep = &dataset.episodes[i];
        let input = SampleInput::for_episode(model, ep, &dataset.catalog)?;
        let pred = model.predict_deg(&input)?;
        Ok((ep.object_id, (pred - ep.final_angle_deg).abs()))
    })
    .into_iter()
    .collect();
    let errs = errs?;
    let mae = errs.iter().map(|(_, e)| e).sum::<f64>() / errs.len().max(1) as f64;
    let mut by_object: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (id, e) in &errs {
        let slot = by_object.entry(*id).or_insert((0.0, 0));
        slot.0 += e;
        slot.1 += 1;
    }
    Ok(EvalReport {
        mae_deg: mae,
        per_object: by_object
            .into_iter()
            .map(|(id, (sum, n))| (id, sum / n as f64))
            .collect(),
        n_episodes: errs.len(),
    })
}

/// Evaluate a trained model on the split's test episodes.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset, split: &SplitSpec) -> Result<EvalReport> {
    let (_, test) = split_indices(dataset, split)?;
    mae_over(model, dataset, &test)
}

/// Train one variant on the split's training episodes and return the
/// checkpoint with the best test error.
pub fn train(
    dataset: &Dataset,
    split: &SplitSpec,
    variant: Variant,
    hyper: &Hyper,
) -> Result<(TrainedModel, TrainReport)> {
    let (train_idx, test_idx) = split_indices(dataset, split)?;
    let norm = Normalization::from_catalog(&dataset.catalog);
    let mut model = TrainedModel::init(
        variant,
        EncoderConfig::default(),
        norm,
        derive_seed(hyper.seed, &[0x1717]),
    );

    let mut flat = model.params.flatten();
    let mut state = AdamState::new(flat.len());
    let adam = AdamConfig::with_lr(hyper.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, &[0x5467]));

    let mut order = train_idx.clone();
    let mut loss_curve = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            let results: Result<Vec<(f64, Vec<f64>)>> = par_map_slice(chunk, |&i| {
                let ep = &dataset.episodes[i];
                let input = SampleInput::for_episode(&model, ep, &dataset.catalog)?;
                model.episode_loss_and_grads(&input)
            })
            .into_iter()
            .collect();
            let results = results?;

            let scale = 1.0 / results.len() as f64;
            let mut grad = vec![0.0; flat.len()];
            for (loss, g) in &results {
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "training loss diverged at epoch {epoch}"
                    )));
                }
                epoch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v * scale;
                }
            }
            adam_step(&mut flat, &grad, &mut state, &adam);
            model.params.load_flat(&flat)?;
        }
        let mean_loss = epoch_loss / train_idx.len() as f64;
        loss_curve.push(mean_loss);

        let eval = mae_over(&model, dataset, &test_idx)?;
        if hyper.verbose {
            eprintln!(
                "[{variant}] epoch {epoch:>3}  loss {mean_loss:.6}  test mae {:.2} deg",
                eval.mae_deg
            );
        }
        if best.as_ref().map_or(true, |(m, _, _)| eval.mae_deg < *m) {
            best = Some((eval.mae_deg, epoch, flat.clone()));
        }
    }

    let (_, best_epoch, best_flat) = best.ok_or_else(|| Error::InvalidArg("zero epochs".into()))?;
    model.params.load_flat(&best_flat)?;
    let eval = mae_over(&model, dataset, &test_idx)?;
    let report = TrainReport {
        variant,
        epochs_run: hyper.epochs,
        best_epoch,
        train_loss: loss_curve,
        eval,
    };
    Ok((model, report))
}

/// Piecewise-constant conditional mean of the final angle given w, fit on
/// training episodes. The independent baseline the `None` variant should
/// approach.
pub struct BinnedMeanOracle {
    bins: Vec<f64>,
}

impl BinnedMeanOracle {
    pub fn fit(pairs: &[(f64, f64)], n_bins: usize) -> Self {
        let mut sums = vec![0.0; n_bins];
        let mut counts = vec![0usize; n_bins];
        for &(w, angle) in pairs {
            let b = ((w * n_bins as f64) as usize).min(n_bins - 1);
            sums[b] += angle;
            counts[b] += 1;
        }
        let global = {
            let n: usize = counts.iter().sum();
            if n == 0 {
                0.0
            } else {
                sums.iter().sum::<f64>() / n as f64
            }
        };
        let bins = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { global } else { s / c as f64 })
            .collect();
        BinnedMeanOracle { bins }
    }

    pub fn predict(&self, w: f64) -> f64 {
        let n = self.bins.len();
        let b = ((w * n as f64) as usize).min(n - 1);
        self.bins[b]
    }

    /// MAE of the oracle over (w, angle) pairs.
    pub fn mae(&self, pairs: &[(f64, f64)]) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        pairs
            .iter()
            .map(|&(w, a)| (self.predict(w) - a).abs())
            .sum::<f64>()
            / pairs.len() as f64
    }
}

/// (w, final angle) pairs of the episodes at `indices`.
pub fn control_angle_pairs(dataset: &Dataset, indices: &[usize]) -> Vec<(f64, f64)> {
    indices
        .iter()
        .map(|&i| {
            let ep = &dataset.episodes[i];
            (ep.control_w, ep.final_angle_deg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    /// Encoders stay fixed; only the probe trains on the embeddings.
    Frozen,
    /// Encoders and probe train jointly on the property targets.
    EndToEnd,
}

impl ProbeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(ProbeMode::Frozen),
            "end2end" => Ok(ProbeMode::EndToEnd),
            _ => Err(Error::InvalidArg(format!(
                "unknown probe mode {s:?} (expected frozen|end2end)"
            ))),
        }
    }
}

/// Disentanglement metrics on the test split: friction classification
/// accuracy and mean absolute error of each normalized property.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub friction_acc: f64,
    pub mass_mae: f64,
    pub com_mae: f64,
    pub moi_mae: f64,
    pub n_episodes: usize,
}

/// Embeddings of the episodes at `indices` under a frozen model.
pub fn embeddings_for(
    model: &TrainedModel,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    par_map_slice(indices, |&i| {
        let ep = &dataset.episodes[i];
        let input = SampleInput::for_episode(model, ep, &dataset.catalog)?;
        model.embedding(&input)
    })
    .into_iter()
    .collect()
}

fn probe_metrics(
    probe: &ProbeModel,
    embeddings: &[Vec<f64>],
    targets: &[([f64; 3], usize)],
) -> Result<ProbeReport> {
    let mut correct = 0usize;
    let mut err = [0.0f64; 3];
    for (emb, (tgt, class)) in embeddings.iter().zip(targets) {
        let (reg, logits) = probe.predict(emb)?;
        let pred_class = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if pred_class == *class {
            correct += 1;
        }
        for k in 0..3 {
            err[k] += (reg[k] - tgt[k]).abs();
        }
    }
    let n = embeddings.len().max(1) as f64;
    Ok(ProbeReport {
        friction_acc: correct as f64 / n,
        mass_mae: err[0] / n,
        com_mae: err[1] / n,
        moi_mae: err[2] / n,
        n_episodes: embeddings.len(),
    })
}

/// Train the disentanglement probe for a model. In `Frozen` mode the
/// encoder weights are fixed and embeddings are computed once; in
/// `EndToEnd` mode a fresh copy of the architecture trains jointly with the
/// probe on the property targets.
pub fn train_disentangle(
    model: &TrainedModel,
    dataset: &Dataset,
    split: &SplitSpec,
    hyper: &Hyper,
    mode: ProbeMode,
) -> Result<(ProbeModel, ProbeReport)> {
    if !model.variant.has_learned_embedding() {
        return Err(Error::InvalidArg(format!(
            "variant {} has no learned embedding to disentangle",
            model.variant
        )));
    }
    let (train_idx, test_idx) = split_indices(dataset, split)?;
    let targets_of = |indices: &[usize]| -> Result<Vec<([f64; 3], usize)>> {
        indices
            .iter()
            .map(|&i| {
                let spec = dataset.catalog.spec(dataset.episodes[i].object_id)?;
                Ok(model.norm.property_targets(spec))
            })
            .collect()
    };
    let train_targets = targets_of(&train_idx)?;
    let test_targets = targets_of(&test_idx)?;

    match mode {
        ProbeMode::Frozen => {
            let train_emb = embeddings_for(model, dataset, &train_idx)?;
            let test_emb = embeddings_for(model, dataset, &test_idx)?;
            let mut probe = ProbeModel::init(
                model.embedding_dim(),
                model.enc.probe_hidden,
                derive_seed(hyper.seed, &[0x9200]),
            );
            probe.fit_standardizer(&train_emb);
            let mut flat = probe.params.flatten();
            let mut state = AdamState::new(flat.len());
            let adam = AdamConfig::with_lr(hyper.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, &[0x9201]));
            let mut order: Vec<usize> = (0..train_emb.len()).collect();

            for epoch in 0..hyper.epochs {
                order.shuffle(&mut rng);
                let mut epoch_loss = 0.0;
                for chunk in order.chunks(hyper.batch_size.max(1)) {
                    let results: Result<Vec<(f64, Vec<f64>)>> = par_map_slice(chunk, |&i| {
                        probe.loss_and_grads(&train_emb[i], &train_targets[i].0, train_targets[i].1)
                    })
                    .into_iter()
                    .collect();
                    let results = results?;
                    let scale = 1.0 / results.len() as f64;
                    let mut grad = vec![0.0; flat.len()];
                    for (loss, g) in &results {
                        epoch_loss += loss;
                        for (acc, v) in grad.iter_mut().zip(g) {
                            *acc += v * scale;
                        }
                    }
                    adam_step(&mut flat, &grad, &mut state, &adam);
                    probe.params.load_flat(&flat)?;
                }
                if hyper.verbose {
                    eprintln!(
                        "[probe {}] epoch {epoch:>3}  loss {:.6}",
                        model.variant,
                        epoch_loss / train_emb.len() as f64
                    );
                }
            }
            let report = probe_metrics(&probe, &test_emb, &test_targets)?;
            Ok((probe, report))
        }
        ProbeMode::EndToEnd => {
            let mut enc_model = TrainedModel::init(
                model.variant,
                model.enc.clone(),
                model.norm.clone(),
                derive_seed(hyper.seed, &[0x9202]),
            );
            let mut probe = ProbeModel::init(
                model.embedding_dim(),
                model.enc.probe_hidden,
                derive_seed(hyper.seed, &[0x9203]),
            );
            let model_len = enc_model.params.flat_len();
            let mut flat = enc_model.params.flatten();
            flat.extend(probe.params.flatten());
            let mut state = AdamState::new(flat.len());
            let adam = AdamConfig::with_lr(hyper.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, &[0x9204]));
            let mut order: Vec<usize> = (0..train_idx.len()).collect();

            for epoch in 0..hyper.epochs {
                order.shuffle(&mut rng);
                for chunk in order.chunks(hyper.batch_size.max(1)) {
                    let results: Result<Vec<(f64, Vec<f64>)>> = par_map_slice(chunk, |&pos| {
                        let ep = &dataset.episodes[train_idx[pos]];
                        let input = SampleInput::for_episode(&enc_model, ep, &dataset.catalog)?;
                        joint_loss_and_grads(
                            &enc_model,
                            &probe,
                            &input,
                            &train_targets[pos].0,
                            train_targets[pos].1,
                        )
                    })
                    .into_iter()
                    .collect();
                    let results = results?;
                    let scale = 1.0 / results.len() as f64;
                    let mut grad = vec![0.0; flat.len()];
                    for (loss, g) in &results {
                        if !loss.is_finite() {
                            return Err(Error::Numeric(format!(
                                "probe training diverged at epoch {epoch}"
                            )));
                        }
                        for (acc, v) in grad.iter_mut().zip(g) {
                            *acc += v * scale;
                        }
                    }
                    adam_step(&mut flat, &grad, &mut state, &adam);
                    enc_model.params.load_flat(&flat[..model_len])?;
                    probe.params.load_flat(&flat[model_len..])?;
                }
                if hyper.verbose {
                    eprintln!("[probe e2e {}] epoch {epoch:>3}", model.variant);
                }
            }
            let test_emb = embeddings_for(&enc_model, dataset, &test_idx)?;
            let report = probe_metrics(&probe, &test_emb, &test_targets)?;
            Ok((probe, report))
        }
    }
}

/// Loss and concatenated gradients [encoder params | probe params] for one
/// episode in end-to-end property training.
fn joint_loss_and_grads(
    model: &TrainedModel,
    probe: &ProbeModel,
    input: &SampleInput,
    targets: &[f64; 3],
    class: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let (mvars, mleaves) = VarMap::new(&model.params, &mut tape);
    let (pvars, pleaves) = VarMap::new(&probe.params, &mut tape);
    let emb = model
        .embed_graph(&mut tape, &mvars, input)?
        .ok_or_else(|| Error::InvalidArg("variant has no embedding".into()))?;
    let loss = probe.loss_graph(&mut tape, &pvars, emb, targets, class)?;
    tape.backward(loss)?;
    let mut grads = model.params.collect_grads(&tape, &mleaves);
    grads.extend(probe.params.collect_grads(&tape, &pleaves));
    Ok((tape.value(loss).item(), grads))
}

/// Expected error of uniform random predictions against uniform targets on
/// [0, scale]: E|X−Y| = scale/3. Estimated by simulation for the analytic
/// baseline checks.
pub fn random_prediction_baseline(scale: f64, draws: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..draws {
        let x: f64 = rng.gen::<f64>() * scale;
        let y: f64 = rng.gen::<f64>() * scale;
        total += (x - y).abs();
    }
    total / draws as f64
}

pub const ANGLE_SCALE: f64 = ANGLE_SCALE_DEG;
