//! Inference-time control selection and the closed-loop evaluation protocol.
//!
//! The policy is sampling-based: evaluate the angle predictor on a uniform
//! grid of gripper widths and take the one whose prediction lands closest to
//! the goal, breaking ties toward the tighter grip.

use crate::catalog::ObjectSpec;
use crate::error::{Error, Result};
use crate::exec::par_map_slice;
use crate::models::{SampleInput, TrainedModel};
use crate::simdyn::{simulate_swing, SwingConfig};
use crate::tactile::{synth_shake_sequence, synth_tilt_frame, TactileConfig, TactileFrame, TILT_ANGLES_DEG};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default number of uniformly sampled control widths.
pub const DEFAULT_N_SAMPLES: usize = 201;

/// Argmin of |predict(w) − goal| over the uniform grid {0, 1/(n−1), …, 1}.
/// Ties break toward smaller w. Returns (w*, predicted angle at w*).
pub fn select_control_grid(
    predict: impl Fn(f64) -> Result<f64>,
    goal_deg: f64,
    n_samples: usize,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::InvalidArg(format!(
            "need at least 2 control samples, got {n_samples}"
        )));
    }
    if !(0.0..=200.0).contains(&goal_deg) {
        return Err(Error::InvalidArg(format!(
            "goal {goal_deg}° outside [0, 200]"
        )));
    }
    let mut best = (0.0, f64::INFINITY, 0.0);
    for i in 0..n_samples {
        let w = i as f64 / (n_samples - 1) as f64;
        let pred = predict(w)?;
        let err = (pred - goal_deg).abs();
        if err < best.1 {
            best = (w, err, pred);
        }
    }
    Ok((best.0, best.2))
}

/// A control query: observations of the held object, the goal, and the grid
/// resolution.
pub struct ControlQuery<'a> {
    pub model: &'a TrainedModel,
    pub tilt_frames: &'a [TactileFrame; 2],
    pub shake_frames: &'a [TactileFrame],
    pub goal_deg: f64,
    pub n_samples: usize,
}

/// Select the control width for a query. The embedding is computed once from
/// the observations and reused across all grid samples.
pub fn select_control(q: &ControlQuery) -> Result<(f64, f64)> {
    let obs = SampleInput::from_observation(q.model, q.tilt_frames, q.shake_frames, 0.0);
    let embedding = q.model.embedding(&obs)?;
    select_control_grid(
        |w| q.model.predict_deg_from_embedding(&embedding, w),
        q.goal_deg,
        q.n_samples,
    )
}

/// What predicts the angle during closed-loop evaluation: the trained model,
/// or the simulator itself (the oracle that bounds achievable accuracy).
pub enum Predictor<'a> {
    Model(&'a TrainedModel),
    /// Noise-free simulation of the actual object.
    SimulatorOracle,
}

/// One closed-loop trial row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub object_id: u32,
    pub goal_deg: f64,
    pub w_star: f64,
    pub predicted_deg: f64,
    pub achieved_deg: f64,
    pub error_deg: f64,
}

/// Closed-loop evaluation report over objects × goals × trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopReport {
    pub rows: Vec<TrialRow>,
    pub per_object_mean: Vec<(u32, f64)>,
    pub grand_mean: f64,
}

impl ClosedLoopReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("object_id,goal_deg,w_star,predicted_deg,achieved_deg,error_deg\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.6},{:.4},{:.4},{:.4}\n",
                r.object_id, r.goal_deg, r.w_star, r.predicted_deg, r.achieved_deg, r.error_deg
            ));
        }
        s
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.error_deg).fold(0.0, f64::max)
    }
}

/// Run the closed-loop protocol: for every object × goal × trial, take fresh
/// noisy observations, pick w* through the predictor, execute the swing with
/// actuation noise, and record |achieved − goal|. Pass noise-free configs
/// (and the oracle predictor) for the grid-resolution bound check.
pub fn closed_loop_eval(
    predictor: &Predictor,
    specs: &[ObjectSpec],
    sim: &SwingConfig,
    tact: &TactileConfig,
    goals_deg: &[f64],
    trials_per_goal: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ClosedLoopReport> {
    let mut cases = Vec::new();
    for spec in specs {
        for &goal in goals_deg {
            for trial in 0..trials_per_goal {
                cases.push((spec, goal, trial));
            }
        }
    }

    let rows: Result<Vec<TrialRow>> = par_map_slice(&cases, |&(spec, goal, trial)| {
        let case_seed = crate::dataset::derive_seed(
            seed,
            &[spec.id as u64, goal.to_bits(), trial as u64],
        );
        let mut obs_rng = ChaCha8Rng::seed_from_u64(case_seed);

        let (w_star, predicted) = match predictor {
            Predictor::Model(model) => {
                let tilt = [
                    synth_tilt_frame(spec, TILT_ANGLES_DEG[0], tact, &mut obs_rng)?,
                    synth_tilt_frame(spec, TILT_ANGLES_DEG[1], tact, &mut obs_rng)?,
                ];
                let shake = synth_shake_sequence(spec, tact, &mut obs_rng)?;
                select_control(&ControlQuery {
                    model,
                    tilt_frames: &tilt,
                    shake_frames: &shake,
                    goal_deg: goal,
                    n_samples,
                })?
            }
            Predictor::SimulatorOracle => {
                let noise_free = sim.noise_free();
                select_control_grid(
                    |w| {
                        let mut rng = ChaCha8Rng::seed_from_u64(0);
                        Ok(simulate_swing(spec, w, &noise_free, &mut rng)?.final_angle_deg)
                    },
                    goal,
                    n_samples,
                )?
            }
        };

        let mut swing_rng =
            ChaCha8Rng::seed_from_u64(crate::dataset::derive_seed(case_seed, &[7]));
        let achieved = simulate_swing(spec, w_star, sim, &mut swing_rng)?.final_angle_deg;
        Ok(TrialRow {
            object_id: spec.id,
            goal_deg: goal,
            w_star,
            predicted_deg: predicted,
            achieved_deg: achieved,
            error_deg: (achieved - goal).abs(),
        })
    })
    .into_iter()
    .collect();
    let rows = rows?;

    let mut by_object: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
    for r in &rows {
        let slot = by_object.entry(r.object_id).or_insert((0.0, 0));
        slot.0 += r.error_deg;
        slot.1 += 1;
    }
    let grand_mean = rows.iter().map(|r| r.error_deg).sum::<f64>() / rows.len().max(1) as f64;
    Ok(ClosedLoopReport {
        rows,
        per_object_mean: by_object
            .into_iter()
            .map(|(id, (sum, n))| (id, sum / n as f64))
            .collect(),
        grand_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Monotone stand-in predictor: 200·w.
    fn linear(w: f64) -> Result<f64> {
        Ok(200.0 * w)
    }

    #[test]
    fn goal_below_range_selects_tightest_grip() {
        // Predictor floor is 50°, so any goal below it saturates at w = 0.
        let pred = |w: f64| Ok(50.0 + 150.0 * w);
        let (w, _) = select_control_grid(pred, 10.0, 201).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn goal_above_range_selects_loosest_grip() {
        let pred = |w: f64| Ok(150.0 * w);
        let (w, _) = select_control_grid(pred, 200.0, 201).unwrap();
        assert_eq!(w, 1.0);
    }

    #[test]
    fn interior_goal_brackets_the_root() {
        // Bisection oracle on the same strictly monotone predictor.
        let goal = 137.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if linear(mid).unwrap() < goal {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let n = 201;
        let (w, _) = select_control_grid(linear, goal, n).unwrap();
        assert!((w - root).abs() <= 1.0 / (n as f64 - 1.0) + 1e-12);
    }

    #[test]
    fn ties_break_toward_tighter_grip() {
        // Symmetric tent: w = 0.2 and 0.8 predict equally close to the goal.
        let pred = |w: f64| Ok(200.0 * (w - 0.5).abs());
        let (w, _) = select_control_grid(pred, 60.0, 11).unwrap();
        assert_eq!(w, 0.2);
    }

    #[test]
    fn argmin_invariant_to_common_rescaling() {
        // Scales chosen so the rescaled goal stays inside the pose range.
        for scale in [0.25, 0.5, 1.3, 3.7] {
            let (w1, _) = select_control_grid(linear, 53.0, 201).unwrap();
            let scaled = |w: f64| Ok(scale * 200.0 * w);
            let (w2, _) = select_control_grid(scaled, scale * 53.0, 201).unwrap();
            assert_eq!(w1, w2);
        }
    }

    #[test]
    fn zero_goal_under_monotone_predictor_is_w_zero() {
        let (w, _) = select_control_grid(linear, 0.0, 201).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn rejects_degenerate_grids_and_goals() {
        assert!(select_control_grid(linear, 90.0, 1).is_err());
        assert!(select_control_grid(linear, 300.0, 11).is_err());
    }
}
