//! Synthetic marker displacement fields for the two exploration actions.
//!
//! The sensing surface carries a 14 × 12 grid of markers whose in-plane
//! displacements encode the shear forces and torques at the grip contact.
//!
//! Tilting the held object to angle φ loads the gel with the in-plane weight
//! component and the gravity torque about the grip axis:
//!
//! ```text
//! u(p) = α_t · m g sin φ · ĝ  +  α_r · m g r sin φ · rot90(p − p_c)
//! ```
//!
//! with the total displacement clipped at the slip limit
//! `s_max = μ F_hold / k_shear`, so the clip level itself leaks the handle
//! friction into the tilt frames.
//!
//! Shaking oscillates the wrist by ±5° with a loosened grip. The gel twist
//! follows the commanded angle elastically until the contact torque exceeds
//! the slip limit, after which it clamps:
//!
//! ```text
//! γ(t)  = clamp(β(t), ±γ_slip)      γ_slip = μ F_explore r_grip / k_θ
//! u(p,t) = (α_r k_θ γ(t) + ε_I I β̈(t)) · rot90(p − p_c)
//! ```
//!
//! Mass and center of mass deliberately do not enter the shake field; the
//! loosened grip gives no stable weight signal, so shaking informs about
//! friction (strongly, via γ_slip) and inertia (via the β̈ lag term) only.

use crate::catalog::ObjectSpec;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Marker rows on the sensing surface.
pub const GRID_H: usize = 12;
/// Marker columns on the sensing surface.
pub const GRID_W: usize = 14;
/// Scalars per marker (x and y displacement).
pub const GRID_C: usize = 2;
/// Flat length of one frame.
pub const FRAME_LEN: usize = GRID_H * GRID_W * GRID_C;

/// Tilt poses used by the exploration routine, degrees.
pub const TILT_ANGLES_DEG: [f64; 2] = [20.0, 45.0];

/// Shake sequence length bounds, frames.
pub const SHAKE_FRAMES_MIN: usize = 60;
pub const SHAKE_FRAMES_MAX: usize = 70;

/// One 12 × 14 grid of 2-vector marker displacements, row-major
/// `[row][col][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    data: Vec<f64>,
}

impl TactileFrame {
    pub fn zeros() -> Self {
        TactileFrame {
            data: vec![0.0; FRAME_LEN],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if data.len() != FRAME_LEN {
            return Err(Error::shape(
                "tactile_frame",
                format!("expected {} values, got {}", FRAME_LEN, data.len()),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite marker displacement".into()));
        }
        Ok(TactileFrame { data })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, comp: usize) -> f64 {
        self.data[(row * GRID_W + col) * GRID_C + comp]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, comp: usize, v: f64) {
        self.data[(row * GRID_W + col) * GRID_C + comp] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest marker displacement magnitude in the frame.
    pub fn peak_magnitude(&self) -> f64 {
        let mut peak = 0.0f64;
        for i in 0..GRID_H * GRID_W {
            let dx = self.data[2 * i];
            let dy = self.data[2 * i + 1];
            peak = peak.max((dx * dx + dy * dy).sqrt());
        }
        peak
    }

    /// Least-squares coefficient of the frame onto the unit torsion pattern
    /// rot90(p − p_c): `Σ u·rot90(p) / Σ |p|²`.
    pub fn torsion_coefficient(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for row in 0..GRID_H {
            for col in 0..GRID_W {
                let (px, py) = marker_position(row, col);
                let (tx, ty) = (-py, px);
                num += self.get(row, col, 0) * tx + self.get(row, col, 1) * ty;
                den += tx * tx + ty * ty;
            }
        }
        num / den
    }

    /// Mean displacement vector over all markers.
    pub fn mean_vector(&self) -> (f64, f64) {
        let n = (GRID_H * GRID_W) as f64;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for i in 0..GRID_H * GRID_W {
            sx += self.data[2 * i];
            sy += self.data[2 * i + 1];
        }
        (sx / n, sy / n)
    }

    /// CSV dump: `row,col,dx,dy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,dx,dy\n");
        for row in 0..GRID_H {
            for col in 0..GRID_W {
                s.push_str(&format!(
                    "{},{},{:.8},{:.8}\n",
                    row,
                    col,
                    self.get(row, col, 0),
                    self.get(row, col, 1)
                ));
            }
        }
        s
    }

    /// Quiver rendering of the frame as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        let cell = 32.0;
        let pad = 24.0;
        let width = pad * 2.0 + cell * (GRID_W - 1) as f64;
        let height = pad * 2.0 + cell * (GRID_H - 1) as f64;
        let scale = {
            let peak = self.peak_magnitude();
            if peak > 0.0 {
                cell * 0.9 / peak
            } else {
                1.0
            }
        };
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
             viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        );
        for row in 0..GRID_H {
            for col in 0..GRID_W {
                let x0 = pad + col as f64 * cell;
                let y0 = pad + row as f64 * cell;
                let dx = self.get(row, col, 0) * scale;
                let dy = -self.get(row, col, 1) * scale; // svg y grows downward
                s.push_str(&format!(
                    "<circle cx=\"{x0:.1}\" cy=\"{y0:.1}\" r=\"1.5\" fill=\"#444\"/>\n\
                     <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
                     stroke=\"#c0392b\" stroke-width=\"1.2\"/>\n",
                    x0 + dx,
                    y0 + dy
                ));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Marker position relative to the grid center, in marker-pitch units.
#[inline]
pub fn marker_position(row: usize, col: usize) -> (f64, f64) {
    (
        col as f64 - (GRID_W - 1) as f64 / 2.0,
        row as f64 - (GRID_H - 1) as f64 / 2.0,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TactileConfig {
    /// Translational shear compliance, displacement per newton.
    pub alpha_t: f64,
    /// Torsional compliance, displacement per N·m per marker-pitch radius.
    pub alpha_r: f64,
    /// Gel shear stiffness used by the slip saturation limit.
    pub k_shear: f64,
    /// Grip force while tilting (held firmly), newtons.
    pub f_hold: f64,
    /// Loosened grip force while shaking, newtons.
    pub f_explore: f64,
    /// Torsional contact stiffness, N·m/rad.
    pub k_theta: f64,
    /// Coupling of the inertial lag term, displacement per N·m.
    pub eps_inertia: f64,
    /// Contact radius for the shake slip torque, meters.
    pub r_grip: f64,
    /// Shake amplitude, degrees.
    pub shake_amplitude_deg: f64,
    /// Shake frequency, Hz.
    pub shake_freq_hz: f64,
    /// Marker sampling rate, Hz.
    pub frame_rate_hz: f64,
    /// Per-component Gaussian marker noise.
    pub noise_sd: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
}

impl Default for TactileConfig {
    fn default() -> Self {
        TactileConfig {
            alpha_t: 0.02,
            alpha_r: 0.375,
            k_shear: 140.0,
            f_hold: 15.0,
            f_explore: 5.0,
            k_theta: 1.0,
            eps_inertia: 0.8,
            r_grip: 0.01,
            shake_amplitude_deg: 5.0,
            shake_freq_hz: 2.0,
            frame_rate_hz: 30.0,
            noise_sd: 0.002,
            g: 9.81,
        }
    }
}

impl TactileConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_t > 0.0
            && self.alpha_r > 0.0
            && self.k_shear > 0.0
            && self.f_hold > 0.0
            && self.f_explore > 0.0
            && self.k_theta > 0.0
            && self.eps_inertia >= 0.0
            && self.r_grip > 0.0
            && self.shake_amplitude_deg > 0.0
            && self.shake_freq_hz > 0.0
            && self.frame_rate_hz > 0.0
            && self.noise_sd >= 0.0;
        if !ok {
            return Err(Error::InvalidArg("tactile config fields must be positive".into()));
        }
        if self.f_explore >= self.f_hold {
            return Err(Error::InvalidArg(
                "shaking-phase grip must be looser than the tilting-phase grip".into(),
            ));
        }
        Ok(())
    }

    pub fn noise_free(&self) -> TactileConfig {
        TactileConfig {
            noise_sd: 0.0,
            ..self.clone()
        }
    }

    /// Slip saturation limit of the tilt field for a friction coefficient.
    pub fn saturation_limit(&self, mu: f64) -> f64 {
        mu * self.f_hold / self.k_shear
    }

    /// Slip twist limit of the shake motion for a friction coefficient.
    pub fn slip_twist(&self, mu: f64) -> f64 {
        mu * self.f_explore * self.r_grip / self.k_theta
    }
}

/// Synthesize the marker field for a tilt to `phi_deg` (20° or 45°).
pub fn synth_tilt_frame<R: Rng>(
    spec: &ObjectSpec,
    phi_deg: f64,
    cfg: &TactileConfig,
    rng: &mut R,
) -> Result<TactileFrame> {
    cfg.validate()?;
    if !TILT_ANGLES_DEG.iter().any(|a| (a - phi_deg).abs() < 1e-9) {
        return Err(Error::InvalidArg(format!(
            "unsupported tilt angle {phi_deg}°, expected one of {TILT_ANGLES_DEG:?}"
        )));
    }
    let sin_phi = phi_deg.to_radians().sin();
    let weight = spec.mass_kg() * cfg.g; // N
    let trans = cfg.alpha_t * weight * sin_phi;
    let (gx, gy) = (0.0, -1.0); // gravity direction projected into the plane
    let torsion = cfg.alpha_r * weight * spec.com_m() * sin_phi;
    let s_max = cfg.saturation_limit(spec.friction.mu_kinetic());

    let mut frame = TactileFrame::zeros();
    for row in 0..GRID_H {
        for col in 0..GRID_W {
            let (px, py) = marker_position(row, col);
            let mut ux = trans * gx + torsion * -py;
            let mut uy = trans * gy + torsion * px;
            let mag = (ux * ux + uy * uy).sqrt();
            if mag > s_max {
                let scale = s_max / mag;
                ux *= scale;
                uy *= scale;
            }
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            frame.set(row, col, 0, ux + cfg.noise_sd * nx);
            frame.set(row, col, 1, uy + cfg.noise_sd * ny);
        }
    }
    Ok(frame)
}

/// Commanded wrist angle and the resulting gel twist at time `t`.
fn shake_twist(t: f64, gamma_slip: f64, cfg: &TactileConfig) -> (f64, f64, f64) {
    let amp = cfg.shake_amplitude_deg.to_radians();
    let omega = 2.0 * std::f64::consts::PI * cfg.shake_freq_hz;
    let beta = amp * (omega * t).sin();
    let beta_ddot = -amp * omega * omega * (omega * t).sin();
    let gamma = beta.clamp(-gamma_slip, gamma_slip);
    (beta, beta_ddot, gamma)
}

/// Synthesize one shake observation: a sequence of 60–70 torsion-pattern
/// frames driven by the stick-slip twist and the inertial lag.
pub fn synth_shake_sequence<R: Rng>(
    spec: &ObjectSpec,
    cfg: &TactileConfig,
    rng: &mut R,
) -> Result<Vec<TactileFrame>> {
    cfg.validate()?;
    let frames = rng.gen_range(SHAKE_FRAMES_MIN..=SHAKE_FRAMES_MAX);
    let gamma_slip = cfg.slip_twist(spec.friction.mu_kinetic());
    let inertia = spec.moi_kgm2();

    let mut out = Vec::with_capacity(frames);
    for k in 0..frames {
        let t = k as f64 / cfg.frame_rate_hz;
        let (_, beta_ddot, gamma) = shake_twist(t, gamma_slip, cfg);
        let coeff = cfg.alpha_r * cfg.k_theta * gamma + cfg.eps_inertia * inertia * beta_ddot;
        let mut frame = TactileFrame::zeros();
        for row in 0..GRID_H {
            for col in 0..GRID_W {
                let (px, py) = marker_position(row, col);
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                frame.set(row, col, 0, coeff * -py + cfg.noise_sd * nx);
                frame.set(row, col, 1, coeff * px + cfg.noise_sd * ny);
            }
        }
        out.push(frame);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog, FrictionClass};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng0() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    /// Config with saturation pushed out of reach, for linear-regime checks.
    fn linear_cfg() -> TactileConfig {
        TactileConfig {
            k_shear: 1.0,
            noise_sd: 0.0,
            ..TactileConfig::default()
        }
    }

    fn test_spec(mass_g: f64, com_mm: f64, friction: FrictionClass) -> ObjectSpec {
        ObjectSpec {
            id: 999,
            mass_g,
            com_mm,
            moi_gm2: 0.2,
            friction,
        }
    }

    #[test]
    fn frame_shape_is_fixed() {
        let cat = build_catalog();
        let cfg = TactileConfig::default();
        let f = synth_tilt_frame(&cat.specs[0], 45.0, &cfg, &mut rng0()).unwrap();
        assert_eq!(f.as_slice().len(), 12 * 14 * 2);
        let seq = synth_shake_sequence(&cat.specs[0], &cfg, &mut rng0()).unwrap();
        assert!((SHAKE_FRAMES_MIN..=SHAKE_FRAMES_MAX).contains(&seq.len()));
        for fr in &seq {
            assert_eq!(fr.as_slice().len(), FRAME_LEN);
            assert!(fr.as_slice().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn unsupported_tilt_angle_rejected() {
        let cat = build_catalog();
        let cfg = TactileConfig::default();
        assert!(synth_tilt_frame(&cat.specs[0], 30.0, &cfg, &mut rng0()).is_err());
        assert!(synth_tilt_frame(&cat.specs[0], 0.0, &cfg, &mut rng0()).is_err());
    }

    #[test]
    fn tilt_field_scales_with_mass_and_sin_phi() {
        // Both terms are proportional to m·sin φ, so the m → 0 limit vanishes
        // and the two tilt angles differ by sin 20°/sin 45° elementwise.
        let cfg = linear_cfg();
        let light = test_spec(1e-9, 100.0, FrictionClass::Foam);
        let f = synth_tilt_frame(&light, 45.0, &cfg, &mut rng0()).unwrap();
        assert!(f.peak_magnitude() < 1e-9);

        let spec = test_spec(30.0, 100.0, FrictionClass::Foam);
        let f20 = synth_tilt_frame(&spec, 20.0, &cfg, &mut rng0()).unwrap();
        let f45 = synth_tilt_frame(&spec, 45.0, &cfg, &mut rng0()).unwrap();
        let ratio = 20f64.to_radians().sin() / 45f64.to_radians().sin();
        for i in 0..FRAME_LEN {
            assert!((f20.as_slice()[i] - ratio * f45.as_slice()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_com_doubles_torsion_only() {
        let cfg = linear_cfg();
        let a = test_spec(30.0, 60.0, FrictionClass::Foam);
        let b = test_spec(30.0, 120.0, FrictionClass::Foam);
        let fa = synth_tilt_frame(&a, 45.0, &cfg, &mut rng0()).unwrap();
        let fb = synth_tilt_frame(&b, 45.0, &cfg, &mut rng0()).unwrap();
        // Identical translation terms cancel in the difference; the residual
        // torsion coefficient doubles.
        assert!((fa.mean_vector().0 - fb.mean_vector().0).abs() < 1e-12);
        assert!((fa.mean_vector().1 - fb.mean_vector().1).abs() < 1e-12);
        let ca = fa.torsion_coefficient();
        let cb = fb.torsion_coefficient();
        assert!((cb / ca - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tilt_field_matches_per_marker_oracle() {
        let cfg = linear_cfg();
        let spec = test_spec(31.4, 100.0, FrictionClass::Plastic);
        let f = synth_tilt_frame(&spec, 45.0, &cfg, &mut rng0()).unwrap();
        let sin_phi = 45f64.to_radians().sin();
        let w = 0.0314 * cfg.g;
        for row in 0..GRID_H {
            for col in 0..GRID_W {
                let px = col as f64 - 6.5;
                let py = row as f64 - 5.5;
                let ux = cfg.alpha_r * w * 0.1 * sin_phi * -py;
                let uy = cfg.alpha_t * w * sin_phi * -1.0 + cfg.alpha_r * w * 0.1 * sin_phi * px;
                assert!((f.get(row, col, 0) - ux).abs() < 1e-12);
                assert!((f.get(row, col, 1) - uy).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturated_fraction_grows_with_tilt_angle() {
        let cat = build_catalog();
        let cfg = TactileConfig::default().noise_free();
        for spec in &cat.specs {
            let s_max = cfg.saturation_limit(spec.friction.mu_kinetic());
            let frac = |f: &TactileFrame| {
                let mut n = 0;
                for i in 0..GRID_H * GRID_W {
                    let (dx, dy) = (f.as_slice()[2 * i], f.as_slice()[2 * i + 1]);
                    if (dx * dx + dy * dy).sqrt() >= s_max - 1e-12 {
                        n += 1;
                    }
                }
                n
            };
            let f20 = synth_tilt_frame(spec, 20.0, &cfg, &mut rng0()).unwrap();
            let f45 = synth_tilt_frame(spec, 45.0, &cfg, &mut rng0()).unwrap();
            assert!(frac(&f45) >= frac(&f20), "object {}", spec.id);
        }
    }

    #[test]
    fn mass_and_com_recoverable_below_saturation() {
        // In the linear regime the mean vector gives m and the torsion
        // coefficient gives m·r; least squares over both frames must
        // reproduce the spec almost exactly.
        let cfg = linear_cfg();
        let cat = build_catalog();
        for spec in [&cat.specs[0], &cat.specs[9], &cat.specs[32]] {
            let mut est_m = Vec::new();
            let mut est_mr = Vec::new();
            for phi in TILT_ANGLES_DEG {
                let f = synth_tilt_frame(spec, phi, &cfg, &mut rng0()).unwrap();
                let s = phi.to_radians().sin();
                let (_, my) = f.mean_vector();
                est_m.push(-my / (cfg.alpha_t * cfg.g * s));
                est_mr.push(f.torsion_coefficient() / (cfg.alpha_r * cfg.g * s));
            }
            let m = (est_m[0] + est_m[1]) / 2.0;
            let mr = (est_mr[0] + est_mr[1]) / 2.0;
            let r = mr / m;
            assert!(((m - spec.mass_kg()) / spec.mass_kg()).abs() < 1e-6);
            assert!(((r - spec.com_m()) / spec.com_m()).abs() < 1e-6);
        }
    }

    #[test]
    fn stick_regime_tracks_commanded_angle() {
        // Tiny torsional stiffness keeps the contact far from slipping, so
        // the twist equals β(t) and the recovered twist peaks at the 5°
        // amplitude.
        let mut cfg = TactileConfig::default().noise_free();
        cfg.k_theta = 1e-6;
        cfg.eps_inertia = 0.0;
        let cat = build_catalog();
        let seq = synth_shake_sequence(&cat.specs[0], &cfg, &mut rng0()).unwrap();
        let amp = cfg.shake_amplitude_deg.to_radians();
        let omega = 2.0 * std::f64::consts::PI * cfg.shake_freq_hz;
        let mut peak = 0.0f64;
        for (k, f) in seq.iter().enumerate() {
            let beta = amp * (omega * k as f64 / cfg.frame_rate_hz).sin();
            let twist = f.torsion_coefficient() / (cfg.alpha_r * cfg.k_theta);
            assert!((twist - beta).abs() < 1e-9);
            peak = peak.max(twist.abs());
        }
        assert!((peak / amp - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_slip_threshold_leaves_only_inertial_lag() {
        // A vanishing explore force zeroes the twist term; the field reduces
        // to the β̈ lag pattern.
        let mut cfg = TactileConfig::default().noise_free();
        cfg.f_explore = 1e-12;
        let cat = build_catalog();
        let spec = &cat.specs[4];
        let seq = synth_shake_sequence(spec, &cfg, &mut rng0()).unwrap();
        let amp = cfg.shake_amplitude_deg.to_radians();
        let omega = 2.0 * std::f64::consts::PI * cfg.shake_freq_hz;
        for (k, f) in seq.iter().enumerate() {
            let t = k as f64 / cfg.frame_rate_hz;
            let beta_ddot = -amp * omega * omega * (omega * t).sin();
            let expect = cfg.eps_inertia * spec.moi_kgm2() * beta_ddot;
            assert!((f.torsion_coefficient() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn slip_limits_scale_with_friction() {
        // Identical assemblies under foam vs slick tape slip at twists in
        // the 0.9 : 0.3 ratio, so the peak twist differs by exactly 3×.
        // Replays the stick-slip law frame by frame as an oracle.
        let mut cfg = TactileConfig::default().noise_free();
        cfg.eps_inertia = 0.0;
        let foam = test_spec(30.0, 100.0, FrictionClass::Foam);
        let slick = test_spec(30.0, 100.0, FrictionClass::SlickTape);
        let sf = synth_shake_sequence(&foam, &cfg, &mut rng0()).unwrap();
        let ss = synth_shake_sequence(&slick, &cfg, &mut rng0()).unwrap();
        assert_eq!(sf.len(), ss.len());

        let amp = cfg.shake_amplitude_deg.to_radians();
        let omega = 2.0 * std::f64::consts::PI * cfg.shake_freq_hz;
        let replay = |mu: f64, k: usize| {
            let beta = amp * (omega * k as f64 / cfg.frame_rate_hz).sin();
            let slip = cfg.slip_twist(mu);
            beta.clamp(-slip, slip)
        };
        let mut peak_f = 0.0f64;
        let mut peak_s = 0.0f64;
        for k in 0..sf.len() {
            let tf = sf[k].torsion_coefficient() / (cfg.alpha_r * cfg.k_theta);
            let ts = ss[k].torsion_coefficient() / (cfg.alpha_r * cfg.k_theta);
            assert!((tf - replay(0.9, k)).abs() < 1e-9);
            assert!((ts - replay(0.3, k)).abs() < 1e-9);
            peak_f = peak_f.max(tf.abs());
            peak_s = peak_s.max(ts.abs());
        }
        assert!((peak_f / peak_s - 3.0).abs() < 1e-6);
    }

    #[test]
    fn friction_classes_separate_in_peak_twist() {
        // With default noise, per-class peak-twist distributions across the
        // catalog stay > 2 pooled standard deviations apart.
        let cat = build_catalog();
        let cfg = TactileConfig::default();
        let mut by_class: [Vec<f64>; 3] = [vec![], vec![], vec![]];
        let mut rng = rng0();
        for spec in &cat.specs {
            let seq = synth_shake_sequence(spec, &cfg, &mut rng).unwrap();
            let peak = seq
                .iter()
                .map(|f| f.torsion_coefficient().abs())
                .fold(0.0f64, f64::max);
            by_class[spec.friction.index()].push(peak / (cfg.alpha_r * cfg.k_theta));
        }
        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        };
        // Order by μ: slick tape (0.3) < plastic (0.6) < foam (0.9).
        let order = [FrictionClass::SlickTape, FrictionClass::Plastic, FrictionClass::Foam];
        for pair in order.windows(2) {
            let (m0, s0) = stats(&by_class[pair[0].index()]);
            let (m1, s1) = stats(&by_class[pair[1].index()]);
            let pooled = ((s0 * s0 + s1 * s1) / 2.0).sqrt();
            assert!(
                m1 - m0 > 2.0 * pooled,
                "{:?} vs {:?}: gap {} pooled sd {}",
                pair[0],
                pair[1],
                m1 - m0,
                pooled
            );
        }
    }

    #[test]
    fn svg_and_csv_dumps_render() {
        let cat = build_catalog();
        let cfg = TactileConfig::default();
        let f = synth_tilt_frame(&cat.specs[0], 45.0, &cfg, &mut rng0()).unwrap();
        let csv = f.to_csv();
        assert_eq!(csv.lines().count(), GRID_H * GRID_W + 1);
        let svg = f.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("</svg>"));
    }
}
