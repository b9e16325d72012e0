//! The five architecture variants assembled from tensor primitives.
//!
//! Every variant shares the same prediction head (gripper width in, final
//! angle out, squashed to [0, 200]° by a sigmoid); they differ in the
//! physical-feature embedding fed next to the control input:
//!
//! * `None` — no embedding, the head sees the control parameter alone.
//! * `Pp` — the four ground-truth physical properties, normalized.
//! * `Tilting` — a CNN over the two stacked tilt frames (40-d).
//! * `Shaking` — a per-frame CNN plus LSTM over the shake sequence (80-d).
//! * `Combined` — both encoders fused into a 40-d joint embedding.

pub mod checkpoint;
pub mod params;

use crate::catalog::{ObjectSpec, TemplateCatalog};
use crate::dataset::Episode;
use crate::error::{Error, Result};
use crate::tactile::{TactileFrame, GRID_H, GRID_W};
use crate::tensor::{Tape, Tensor, Var};
use params::{xavier, xavier_conv, ParamSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;

/// Final angles are normalized by this scale inside every loss.
pub const ANGLE_SCALE_DEG: f64 = 200.0;

/// Fixed gain applied to marker displacements at the model boundary.
/// Raw fields live around 1e-2 in sensor units; rescaling them to order one
/// keeps the first conv layer and the probes well conditioned.
pub const INPUT_GAIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    None,
    Pp,
    Tilting,
    Shaking,
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::None,
        Variant::Pp,
        Variant::Tilting,
        Variant::Shaking,
        Variant::Combined,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Variant::None),
            "pp" => Ok(Variant::Pp),
            "tilting" => Ok(Variant::Tilting),
            "shaking" => Ok(Variant::Shaking),
            "combined" => Ok(Variant::Combined),
            _ => Err(Error::InvalidArg(format!(
                "unknown variant {s:?} (expected none|pp|tilting|shaking|combined)"
            ))),
        }
    }

    pub fn uses_tilt(self) -> bool {
        matches!(self, Variant::Tilting | Variant::Combined)
    }

    pub fn uses_shake(self) -> bool {
        matches!(self, Variant::Shaking | Variant::Combined)
    }

    /// Variants whose embedding is learned from tactile observations.
    pub fn has_learned_embedding(self) -> bool {
        self.uses_tilt() || self.uses_shake()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::None => "none",
            Variant::Pp => "pp",
            Variant::Tilting => "tilting",
            Variant::Shaking => "shaking",
            Variant::Combined => "combined",
        })
    }
}

/// Architecture dimensions shared by the encoders and heads.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub conv_kernels: [usize; 3],
    pub conv_channels: [usize; 3],
    pub tilt_in_channels: usize,
    pub shake_in_channels: usize,
    pub tilt_embed_dim: usize,
    pub shake_frame_dim: usize,
    pub lstm_hidden: usize,
    pub fused_dim: usize,
    pub pred_hidden: usize,
    pub probe_hidden: usize,
    /// Input spatial size (rows, cols); the sensor grid by default.
    pub grid: (usize, usize),
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            conv_kernels: [5, 3, 2],
            conv_channels: [16, 32, 32],
            tilt_in_channels: 4,
            shake_in_channels: 2,
            tilt_embed_dim: 40,
            shake_frame_dim: 40,
            lstm_hidden: 40,
            fused_dim: 40,
            pred_hidden: 64,
            probe_hidden: 64,
            grid: (GRID_H, GRID_W),
        }
    }
}

impl EncoderConfig {
    /// The h and c states concatenate into the shake embedding.
    pub fn shake_embed_dim(&self) -> usize {
        2 * self.lstm_hidden
    }

    /// Spatial size left after the valid, stride-1 conv stack.
    pub fn conv_out_spatial(&self) -> (usize, usize) {
        let (mut h, mut w) = self.grid;
        for k in self.conv_kernels {
            h = h - k + 1;
            w = w - k + 1;
        }
        (h, w)
    }

    /// Flattened length of the last conv activation.
    pub fn conv_flat_dim(&self) -> usize {
        let (h, w) = self.conv_out_spatial();
        self.conv_channels[2] * h * w
    }

    /// Embedding width fed to the prediction head for `variant`.
    pub fn embedding_dim(&self, variant: Variant) -> usize {
        match variant {
            Variant::None => 0,
            Variant::Pp => 4,
            Variant::Tilting => self.tilt_embed_dim,
            Variant::Shaking => self.shake_embed_dim(),
            Variant::Combined => self.fused_dim,
        }
    }

    /// Tiny configuration for end-to-end finite-difference checks.
    pub fn downsized() -> Self {
        EncoderConfig {
            conv_kernels: [3, 2, 2],
            conv_channels: [2, 3, 3],
            tilt_in_channels: 4,
            shake_in_channels: 2,
            tilt_embed_dim: 5,
            shake_frame_dim: 5,
            lstm_hidden: 4,
            fused_dim: 5,
            pred_hidden: 6,
            probe_hidden: 6,
            grid: (6, 7),
        }
    }
}

/// Min/max property ranges used for 0-1 normalization, plus helpers for the
/// property-prediction inputs and the disentanglement targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mass_g: (f64, f64),
    pub com_mm: (f64, f64),
    pub moi_gm2: (f64, f64),
}

fn minmax(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

impl Normalization {
    pub fn from_catalog(catalog: &TemplateCatalog) -> Self {
        Normalization {
            mass_g: minmax(catalog.specs.iter().map(|s| s.mass_g)),
            com_mm: minmax(catalog.specs.iter().map(|s| s.com_mm)),
            moi_gm2: minmax(catalog.specs.iter().map(|s| s.moi_gm2)),
        }
    }

    fn unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
        (v - lo) / (hi - lo)
    }

    /// Ground-truth feature vector for the property-prediction variant:
    /// friction class index / 2 plus min-max normalized mass, com, moi.
    pub fn pp_features(&self, spec: &ObjectSpec) -> [f64; 4] {
        [
            spec.friction.index() as f64 / 2.0,
            Self::unit(spec.mass_g, self.mass_g),
            Self::unit(spec.com_mm, self.com_mm),
            Self::unit(spec.moi_gm2, self.moi_gm2),
        ]
    }

    /// Regression targets (normalized mass, com, moi) and the friction class
    /// for the disentanglement probe.
    pub fn property_targets(&self, spec: &ObjectSpec) -> ([f64; 3], usize) {
        (
            [
                Self::unit(spec.mass_g, self.mass_g),
                Self::unit(spec.com_mm, self.com_mm),
                Self::unit(spec.moi_gm2, self.moi_gm2),
            ],
            spec.friction.index(),
        )
    }
}

/// Stack the two tilt frames into a channels-first `[4, H, W]` input
/// (20° dx, 20° dy, 45° dx, 45° dy).
pub fn tilt_input(frames: &[TactileFrame; 2]) -> Tensor {
    let mut data = vec![0.0; 4 * GRID_H * GRID_W];
    for (f, frame) in frames.iter().enumerate() {
        for comp in 0..2 {
            let ch = f * 2 + comp;
            for row in 0..GRID_H {
                for col in 0..GRID_W {
                    data[(ch * GRID_H + row) * GRID_W + col] =
                        INPUT_GAIN * frame.get(row, col, comp);
                }
            }
        }
    }
    Tensor::new(vec![4, GRID_H, GRID_W], data).unwrap()
}

/// A full shake sequence as a batched channels-first `[T, 2, H, W]` input.
pub fn shake_input(frames: &[TactileFrame]) -> Tensor {
    let plane = GRID_H * GRID_W;
    let mut data = vec![0.0; frames.len() * 2 * plane];
    for (t, frame) in frames.iter().enumerate() {
        for comp in 0..2 {
            for row in 0..GRID_H {
                for col in 0..GRID_W {
                    data[((t * 2 + comp) * GRID_H + row) * GRID_W + col] =
                        INPUT_GAIN * frame.get(row, col, comp);
                }
            }
        }
    }
    Tensor::new(vec![frames.len(), 2, GRID_H, GRID_W], data).unwrap()
}

/// Name-addressable view of a [`ParamSet`] registered on a tape.
pub struct VarMap {
    map: HashMap<String, Var>,
}

impl VarMap {
    pub fn new(params: &ParamSet, tape: &mut Tape) -> (Self, Vec<Var>) {
        let leaves = params.leaves(tape);
        let map = params
            .iter()
            .zip(&leaves)
            .map(|(p, &v)| (p.name.clone(), v))
            .collect();
        (VarMap { map }, leaves)
    }

    pub fn get(&self, name: &str) -> Var {
        *self
            .map
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} not registered"))
    }
}

fn init_conv_stack(
    rng: &mut ChaCha8Rng,
    ps: &mut ParamSet,
    prefix: &str,
    cfg: &EncoderConfig,
    in_ch: usize,
    embed: usize,
) {
    let mut ci = in_ch;
    for (i, (co, k)) in cfg.conv_channels.iter().zip(cfg.conv_kernels).enumerate() {
        ps.add(&format!("{prefix}.conv{i}.w"), xavier_conv(rng, *co, ci, k));
        ps.add(&format!("{prefix}.conv{i}.b"), Tensor::zeros(vec![*co]));
        ci = *co;
    }
    ps.add(&format!("{prefix}.fc.w"), xavier(rng, embed, cfg.conv_flat_dim()));
    ps.add(&format!("{prefix}.fc.b"), Tensor::zeros(vec![embed]));
}

fn init_lstm(rng: &mut ChaCha8Rng, ps: &mut ParamSet, prefix: &str, in_dim: usize, hidden: usize) {
    ps.add(&format!("{prefix}.w_ih"), xavier(rng, 4 * hidden, in_dim));
    ps.add(&format!("{prefix}.w_hh"), xavier(rng, 4 * hidden, hidden));
    // Forget-gate bias starts at one, the usual stabilizer for short sequences.
    let mut b = vec![0.0; 4 * hidden];
    for v in &mut b[hidden..2 * hidden] {
        *v = 1.0;
    }
    ps.add(&format!("{prefix}.b"), Tensor::vector(b));
}

fn init_mlp(rng: &mut ChaCha8Rng, ps: &mut ParamSet, prefix: &str, dims: &[usize]) {
    for (i, pair) in dims.windows(2).enumerate() {
        ps.add(&format!("{prefix}.fc{i}.w"), xavier(rng, pair[1], pair[0]));
        ps.add(&format!("{prefix}.fc{i}.b"), Tensor::zeros(vec![pair[1]]));
    }
}

/// A variant's parameters plus the context needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub variant: Variant,
    pub enc: EncoderConfig,
    pub norm: Normalization,
    pub params: ParamSet,
}

impl TrainedModel {
    /// Fresh model with seeded initialization.
    pub fn init(variant: Variant, enc: EncoderConfig, norm: Normalization, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        if variant.uses_tilt() {
            init_conv_stack(&mut rng, &mut ps, "tilt", &enc, enc.tilt_in_channels, enc.tilt_embed_dim);
        }
        if variant.uses_shake() {
            init_conv_stack(&mut rng, &mut ps, "shake", &enc, enc.shake_in_channels, enc.shake_frame_dim);
            init_lstm(&mut rng, &mut ps, "shake.lstm", enc.shake_frame_dim, enc.lstm_hidden);
        }
        if variant == Variant::Combined {
            init_mlp(
                &mut rng,
                &mut ps,
                "fuse",
                &[
                    enc.tilt_embed_dim + enc.shake_embed_dim(),
                    2 * enc.fused_dim,
                    enc.fused_dim,
                ],
            );
        }
        let in_dim = enc.embedding_dim(variant) + 1;
        init_mlp(&mut rng, &mut ps, "pred", &[in_dim, enc.pred_hidden, enc.pred_hidden, 1]);
        TrainedModel {
            variant,
            enc,
            norm,
            params: ps,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.enc.embedding_dim(self.variant)
    }

    /// Conv stack shared by both encoders: three conv+bias+relu blocks, a
    /// flatten, and a linear projection.
    fn conv_stack(&self, tape: &mut Tape, vars: &VarMap, prefix: &str, input: Var) -> Result<Var> {
        let mut x = input;
        for i in 0..3 {
            let w = vars.get(&format!("{prefix}.conv{i}.w"));
            let b = vars.get(&format!("{prefix}.conv{i}.b"));
            x = tape.conv2d(x, w)?;
            x = tape.add_bias(x, b)?;
            x = tape.relu(x);
        }
        let flat = tape.value(x).numel();
        let x = tape.reshape(x, vec![flat])?;
        let w = vars.get(&format!("{prefix}.fc.w"));
        let b = vars.get(&format!("{prefix}.fc.b"));
        let x = tape.matmul(w, x)?;
        tape.add_bias(x, b)
    }

    fn tilt_encode(&self, tape: &mut Tape, vars: &VarMap, tilt: Var) -> Result<Var> {
        self.conv_stack(tape, vars, "tilt", tilt)
    }

    /// Per-frame CNN over the whole sequence at once (batched conv), then an
    /// LSTM over the per-frame features; returns the final [h; c] pair,
    /// which is already the 2H-dim shake embedding.
    fn shake_encode(&self, tape: &mut Tape, vars: &VarMap, batch: Var) -> Result<Var> {
        let frames = tape.value(batch).shape()[0];
        let mut x = batch;
        for i in 0..3 {
            let w = vars.get(&format!("shake.conv{i}.w"));
            let b = vars.get(&format!("shake.conv{i}.b"));
            x = tape.conv2d(x, w)?;
            x = tape.add_bias(x, b)?;
            x = tape.relu(x);
        }
        let flat = tape.value(x).numel() / frames;
        let x = tape.reshape(x, vec![frames, flat])?;
        let w_fc = vars.get("shake.fc.w");
        let w_fc_t = tape.transpose(w_fc)?;
        let feats = tape.matmul(x, w_fc_t)?;
        let feats = tape.add_bias(feats, vars.get("shake.fc.b"))?;
        let dim = self.enc.shake_frame_dim;
        let feats = tape.reshape(feats, vec![frames * dim])?;

        let hidden = self.enc.lstm_hidden;
        let w_ih = vars.get("shake.lstm.w_ih");
        let w_hh = vars.get("shake.lstm.w_hh");
        let b = vars.get("shake.lstm.b");
        let mut h = tape.leaf(Tensor::zeros(vec![hidden]), false);
        let mut c = tape.leaf(Tensor::zeros(vec![hidden]), false);
        let mut out = None;
        for t in 0..frames {
            let x_t = tape.slice(feats, t * dim, dim)?;
            let hc = tape.lstm_cell(x_t, h, c, w_ih, w_hh, b)?;
            h = tape.slice(hc, 0, hidden)?;
            c = tape.slice(hc, hidden, hidden)?;
            out = Some(hc);
        }
        Ok(out.unwrap())
    }

    fn fuse(&self, tape: &mut Tape, vars: &VarMap, tilt_vec: Var, shake_vec: Var) -> Result<Var> {
        let cat = tape.concat(&[tilt_vec, shake_vec])?;
        let w0 = vars.get("fuse.fc0.w");
        let b0 = vars.get("fuse.fc0.b");
        let x = tape.matmul(w0, cat)?;
        let x = tape.add_bias(x, b0)?;
        let x = tape.relu(x);
        let w1 = vars.get("fuse.fc1.w");
        let b1 = vars.get("fuse.fc1.b");
        let x = tape.matmul(w1, x)?;
        tape.add_bias(x, b1)
    }

    /// Embedding sub-graph for this variant; `None` for variants without one.
    /// Public so joint training setups can hang extra heads off it.
    pub fn embed_graph(
        &self,
        tape: &mut Tape,
        vars: &VarMap,
        input: &SampleInput,
    ) -> Result<Option<Var>> {
        match self.variant {
            Variant::None => Ok(None),
            Variant::Pp => {
                let pp = input
                    .pp
                    .ok_or_else(|| Error::InvalidArg("pp features missing".into()))?;
                Ok(Some(tape.vec_leaf(&pp)))
            }
            Variant::Tilting => {
                let t = input.tilt(tape)?;
                Ok(Some(self.tilt_encode(tape, vars, t)?))
            }
            Variant::Shaking => {
                let frames = input.shake(tape)?;
                Ok(Some(self.shake_encode(tape, vars, frames)?))
            }
            Variant::Combined => {
                let t = input.tilt(tape)?;
                let tilt_vec = self.tilt_encode(tape, vars, t)?;
                let frames = input.shake(tape)?;
                let shake_vec = self.shake_encode(tape, vars, frames)?;
                Ok(Some(self.fuse(tape, vars, tilt_vec, shake_vec)?))
            }
        }
    }

    /// Prediction head: concat(embedding, w) through two hidden layers to a
    /// sigmoid; the output lives in (0, 1) and scales to degrees by 200.
    fn predict_graph(
        &self,
        tape: &mut Tape,
        vars: &VarMap,
        embedding: Option<Var>,
        w: f64,
    ) -> Result<Var> {
        let wv = tape.vec_leaf(&[w]);
        let mut x = match embedding {
            Some(e) => tape.concat(&[e, wv])?,
            None => wv,
        };
        for i in 0..2 {
            let wm = vars.get(&format!("pred.fc{i}.w"));
            let bm = vars.get(&format!("pred.fc{i}.b"));
            x = tape.matmul(wm, x)?;
            x = tape.add_bias(x, bm)?;
            x = tape.relu(x);
        }
        let wm = vars.get("pred.fc2.w");
        let bm = vars.get("pred.fc2.b");
        let x = tape.matmul(wm, x)?;
        let x = tape.add_bias(x, bm)?;
        Ok(tape.sigmoid(x))
    }

    /// Normalized-angle prediction in (0, 1) for a prepared input.
    pub fn predict_norm(&self, input: &SampleInput) -> Result<f64> {
        if !(0.0..=1.0).contains(&input.w) {
            return Err(Error::InvalidArg(format!(
                "control width {} outside [0, 1]",
                input.w
            )));
        }
        let mut tape = Tape::new();
        let (vars, _) = VarMap::new(&self.params, &mut tape);
        let emb = self.embed_graph(&mut tape, &vars, input)?;
        let out = self.predict_graph(&mut tape, &vars, emb, input.w)?;
        Ok(tape.value(out).item())
    }

    /// Final-angle prediction in degrees.
    pub fn predict_deg(&self, input: &SampleInput) -> Result<f64> {
        Ok(self.predict_norm(input)? * ANGLE_SCALE_DEG)
    }

    /// The embedding vector for an episode (pp features for `Pp`, empty for
    /// `None`). Computed without gradients.
    pub fn embedding(&self, input: &SampleInput) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (vars, _) = VarMap::new(&self.params, &mut tape);
        match self.embed_graph(&mut tape, &vars, input)? {
            Some(v) => Ok(tape.value(v).data().to_vec()),
            None => Ok(vec![]),
        }
    }

    /// Degrees prediction from a precomputed embedding, reusing it across
    /// many control samples.
    pub fn predict_deg_from_embedding(&self, embedding: &[f64], w: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArg(format!("control width {w} outside [0, 1]")));
        }
        let expect = self.embedding_dim();
        if embedding.len() != expect {
            return Err(Error::shape(
                "predict",
                format!("embedding length {} != {}", embedding.len(), expect),
            ));
        }
        let mut tape = Tape::new();
        let (vars, _) = VarMap::new(&self.params, &mut tape);
        let emb = (!embedding.is_empty()).then(|| tape.vec_leaf(embedding));
        let out = self.predict_graph(&mut tape, &vars, emb, w)?;
        Ok(tape.value(out).item() * ANGLE_SCALE_DEG)
    }

    /// Squared error on the normalized angle for one episode, with gradients
    /// for every parameter. Returns (loss, flat gradient).
    pub fn episode_loss_and_grads(&self, input: &SampleInput) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let (vars, leaves) = VarMap::new(&self.params, &mut tape);
        let emb = self.embed_graph(&mut tape, &vars, input)?;
        let pred = self.predict_graph(&mut tape, &vars, emb, input.w)?;
        let target = tape.vec_leaf(&[input.target_norm]);
        let loss = tape.mse_loss(pred, target)?;
        tape.backward(loss)?;
        Ok((
            tape.value(loss).item(),
            self.params.collect_grads(&tape, &leaves),
        ))
    }
}

/// Everything a forward pass needs for one episode, precomputed as tensors.
pub struct SampleInput {
    pub tilt: Option<Tensor>,
    /// Whole shake sequence as one `[T, 2, H, W]` tensor.
    pub shake: Option<Tensor>,
    pub pp: Option<[f64; 4]>,
    pub w: f64,
    pub target_norm: f64,
}

impl SampleInput {
    /// Build the input a `model` needs for `episode`.
    pub fn for_episode(
        model: &TrainedModel,
        episode: &Episode,
        catalog: &TemplateCatalog,
    ) -> Result<Self> {
        let pp = if model.variant == Variant::Pp {
            Some(model.norm.pp_features(catalog.spec(episode.object_id)?))
        } else {
            None
        };
        Ok(SampleInput {
            tilt: model.variant.uses_tilt().then(|| tilt_input(&episode.tilt_frames)),
            shake: model
                .variant
                .uses_shake()
                .then(|| shake_input(&episode.shake_frames)),
            pp,
            w: episode.control_w,
            target_norm: episode.final_angle_deg / ANGLE_SCALE_DEG,
        })
    }

    /// Observation-only input (no target) for inference-time queries.
    pub fn from_observation(
        model: &TrainedModel,
        tilt_frames: &[TactileFrame; 2],
        shake_frames: &[TactileFrame],
        w: f64,
    ) -> Self {
        SampleInput {
            tilt: model.variant.uses_tilt().then(|| tilt_input(tilt_frames)),
            shake: model
                .variant
                .uses_shake()
                .then(|| shake_input(shake_frames)),
            pp: None,
            w,
            target_norm: f64::NAN,
        }
    }

    fn tilt(&self, tape: &mut Tape) -> Result<Var> {
        let t = self
            .tilt
            .as_ref()
            .ok_or_else(|| Error::InvalidArg("tilt frames missing".into()))?;
        Ok(tape.leaf(t.clone(), false))
    }

    fn shake(&self, tape: &mut Tape) -> Result<Var> {
        let frames = self
            .shake
            .as_ref()
            .ok_or_else(|| Error::InvalidArg("shake frames missing".into()))?;
        if frames.shape()[0] == 0 {
            return Err(Error::InvalidArg("empty shake sequence".into()));
        }
        Ok(tape.leaf(frames.clone(), false))
    }
}

/// Three-layer disentanglement probe: a shared trunk and two heads, one
/// regressing the normalized properties through sigmoids and one emitting
/// friction class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub in_dim: usize,
    pub hidden: usize,
    pub params: ParamSet,
    /// Per-dimension (mean, 1/sd) standardization of the frozen embeddings,
    /// fit on the training split. Absent in end-to-end mode.
    pub standardizer: Option<(Vec<f64>, Vec<f64>)>,
}

impl ProbeModel {
    pub fn init(in_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        init_mlp(&mut rng, &mut ps, "probe", &[in_dim, hidden, hidden]);
        ps.add("probe.reg.w", xavier(&mut rng, 3, hidden));
        ps.add("probe.reg.b", Tensor::zeros(vec![3]));
        ps.add("probe.cls.w", xavier(&mut rng, 3, hidden));
        ps.add("probe.cls.b", Tensor::zeros(vec![3]));
        ProbeModel {
            in_dim,
            hidden,
            params: ps,
            standardizer: None,
        }
    }

    /// Fit the input standardizer on training embeddings.
    pub fn fit_standardizer(&mut self, embeddings: &[Vec<f64>]) {
        let n = embeddings.len().max(1) as f64;
        let mut mean = vec![0.0; self.in_dim];
        for e in embeddings {
            for (m, v) in mean.iter_mut().zip(e) {
                *m += v / n;
            }
        }
        let mut inv_sd = vec![0.0; self.in_dim];
        for e in embeddings {
            for (s, (v, m)) in inv_sd.iter_mut().zip(e.iter().zip(&mean)) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut inv_sd {
            *s = 1.0 / s.sqrt().max(1e-8);
        }
        self.standardizer = Some((mean, inv_sd));
    }

    fn standardize(&self, embedding: &[f64]) -> Vec<f64> {
        match &self.standardizer {
            Some((mean, inv_sd)) => embedding
                .iter()
                .zip(mean.iter().zip(inv_sd))
                .map(|(v, (m, s))| (v - m) * s)
                .collect(),
            None => embedding.to_vec(),
        }
    }

    /// Trunk + heads; returns (regression [3] after sigmoid, logits [3]).
    pub fn forward_graph(&self, tape: &mut Tape, vars: &VarMap, emb: Var) -> Result<(Var, Var)> {
        let mut x = emb;
        for i in 0..2 {
            let w = vars.get(&format!("probe.fc{i}.w"));
            let b = vars.get(&format!("probe.fc{i}.b"));
            x = tape.matmul(w, x)?;
            x = tape.add_bias(x, b)?;
            x = tape.relu(x);
        }
        let rw = vars.get("probe.reg.w");
        let rb = vars.get("probe.reg.b");
        let reg = tape.matmul(rw, x)?;
        let reg = tape.add_bias(reg, rb)?;
        let reg = tape.sigmoid(reg);
        let cw = vars.get("probe.cls.w");
        let cb = vars.get("probe.cls.b");
        let cls = tape.matmul(cw, x)?;
        let cls = tape.add_bias(cls, cb)?;
        Ok((reg, cls))
    }

    /// Inference: (normalized property estimates, class logits).
    pub fn predict(&self, embedding: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if embedding.len() != self.in_dim {
            return Err(Error::shape(
                "probe",
                format!("embedding length {} != {}", embedding.len(), self.in_dim),
            ));
        }
        let mut tape = Tape::new();
        let (vars, _) = VarMap::new(&self.params, &mut tape);
        let emb = tape.vec_leaf(&self.standardize(embedding));
        let (reg, cls) = self.forward_graph(&mut tape, &vars, emb)?;
        Ok((
            tape.value(reg).data().to_vec(),
            tape.value(cls).data().to_vec(),
        ))
    }

    pub fn loss_graph(
        &self,
        tape: &mut Tape,
        vars: &VarMap,
        emb: Var,
        targets: &[f64; 3],
        class: usize,
    ) -> Result<Var> {
        let (reg, cls) = self.forward_graph(tape, vars, emb)?;
        let tgt = tape.vec_leaf(targets);
        let reg_loss = tape.mse_loss(reg, tgt)?;
        let cls_loss = tape.cross_entropy_loss(cls, class)?;
        tape.add(reg_loss, cls_loss)
    }

    /// Loss = mse(regression, targets) + cross_entropy(logits, class),
    /// with gradients over the probe parameters.
    pub fn loss_and_grads(
        &self,
        embedding: &[f64],
        targets: &[f64; 3],
        class: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let (vars, leaves) = VarMap::new(&self.params, &mut tape);
        let emb = tape.vec_leaf(&self.standardize(embedding));
        let loss = self.loss_graph(&mut tape, &vars, emb, targets, class)?;
        tape.backward(loss)?;
        Ok((
            tape.value(loss).item(),
            self.params.collect_grads(&tape, &leaves),
        ))
    }
}
