//! Synthetic side-view walkers used in place of recorded gait data.
//!
//! A walker is a head disc, a torso capsule and two-segment capsule limbs.
//! Joint angles are sinusoids of the gait phase `k / T + phase`, legs in
//! antiphase and each arm opposite its leg, so frame `k` and frame `k + T`
//! are identical. Far-side limbs are thinner and swing differently from
//! near-side ones, so the silhouette is not already periodic after `T / 2`.

use std::f64::consts::PI;

use super::image::BinaryImage;
use super::sequence::{Role, SilhouetteSequence};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const FRAME_HEIGHT: usize = 128;
pub const FRAME_WIDTH: usize = 88;

/// Body proportions (pixels) and swing amplitudes (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct WalkerParams {
    pub head_radius: f64,
    pub torso_length: f64,
    pub torso_radius: f64,
    pub thigh: f64,
    pub shin: f64,
    pub leg_radius: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub arm_radius: f64,
    pub hip_swing: f64,
    pub knee_flex: f64,
    pub knee_phase: f64,
    pub arm_swing: f64,
    pub elbow_bend: f64,
    pub lean: f64,
    pub bounce: f64,
    /// Far-side limb thickness relative to the near side.
    pub far_radius: f64,
    /// Far-side swing amplitude relative to the near side.
    pub far_swing: f64,
    /// Gait-cycle length in frames.
    pub cycle: usize,
    /// Cycle fraction at frame 0.
    pub phase: f64,
}

impl WalkerParams {
    /// A random subject. Ranges are wide enough that subjects stay
    /// separable after height normalisation.
    pub fn sample(cycle: usize, rng: &mut RngStream) -> Self {
        let mut u = |lo: f64, hi: f64| rng.uniform_range(lo, hi);
        WalkerParams {
            head_radius: u(6.0, 10.0),
            torso_length: u(26.0, 36.0),
            torso_radius: u(4.0, 9.0),
            thigh: u(20.0, 28.0),
            shin: u(20.0, 28.0),
            leg_radius: u(2.5, 5.0),
            upper_arm: u(13.0, 20.0),
            forearm: u(11.0, 18.0),
            arm_radius: u(2.0, 3.5),
            hip_swing: u(0.25, 0.55),
            knee_flex: u(0.2, 0.9),
            knee_phase: u(0.0, 1.0),
            arm_swing: u(0.15, 0.6),
            elbow_bend: u(0.1, 0.6),
            lean: u(-0.05, 0.15),
            bounce: u(0.0, 3.0),
            far_radius: u(0.5, 0.8),
            far_swing: u(0.5, 0.85),
            cycle,
            phase: u(0.0, 1.0),
        }
    }

    /// The same subject on another walk: a new starting phase and
    /// proportions perturbed by at most `amount` (relative).
    pub fn jittered(&self, amount: f64, rng: &mut RngStream) -> Self {
        let mut j = |v: f64| v * (1.0 + rng.uniform_range(-amount, amount));
        WalkerParams {
            head_radius: j(self.head_radius),
            torso_length: j(self.torso_length),
            torso_radius: j(self.torso_radius),
            thigh: j(self.thigh),
            shin: j(self.shin),
            leg_radius: j(self.leg_radius),
            upper_arm: j(self.upper_arm),
            forearm: j(self.forearm),
            arm_radius: j(self.arm_radius),
            hip_swing: j(self.hip_swing),
            knee_flex: j(self.knee_flex),
            knee_phase: self.knee_phase,
            arm_swing: j(self.arm_swing),
            elbow_bend: j(self.elbow_bend),
            lean: self.lean,
            bounce: j(self.bounce),
            far_radius: self.far_radius,
            far_swing: self.far_swing,
            cycle: self.cycle,
            phase: rng.uniform(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            self.head_radius,
            self.torso_length,
            self.torso_radius,
            self.thigh,
            self.shin,
            self.leg_radius,
            self.upper_arm,
            self.forearm,
            self.arm_radius,
            self.far_radius,
            self.far_swing,
        ];
        if lengths.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::param("walker proportions must be positive"));
        }
        if self.cycle == 0 {
            return Err(Error::param("walker cycle must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Capsule {
    a: (f64, f64),
    b: (f64, f64),
    radius: f64,
}

impl Capsule {
    fn contains(&self, p: (f64, f64)) -> bool {
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p.0 - self.a.0) * dx + (p.1 - self.a.1) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (qx, qy) = (self.a.0 + t * dx - p.0, self.a.1 + t * dy - p.1);
        qx * qx + qy * qy <= self.radius * self.radius
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.a.0.min(self.b.0) - self.radius,
            self.a.1.min(self.b.1) - self.radius,
            self.a.0.max(self.b.0) + self.radius,
            self.a.1.max(self.b.1) + self.radius,
        )
    }
}

fn at(origin: (f64, f64), length: f64, angle: f64) -> (f64, f64) {
    // angle 0 points down, positive swings forward (+x)
    (origin.0 + length * angle.sin(), origin.1 + length * angle.cos())
}

fn body(p: &WalkerParams, k: usize) -> Vec<Capsule> {
    let theta = 2.0 * PI * ((k % p.cycle) as f64 / p.cycle as f64 + p.phase);
    let hip_y = 4.0 + 2.0 * p.head_radius + 1.0 + p.torso_length + p.bounce * (1.0 + (2.0 * theta).cos()) / 2.0;
    let hip = (FRAME_WIDTH as f64 / 2.0, hip_y);
    let shoulder = at(hip, -p.torso_length, -p.lean);
    let head = at(shoulder, -(p.head_radius + 1.0), -p.lean);

    let mut parts = vec![
        Capsule { a: hip, b: shoulder, radius: p.torso_radius },
        Capsule { a: head, b: head, radius: p.head_radius },
    ];
    // near side first, then the far side half a cycle later
    for (side, thick, amp) in [(0.0, 1.0, 1.0), (PI, p.far_radius, p.far_swing)] {
        let swing = amp * p.hip_swing * (theta + side).sin();
        let flex = amp * p.knee_flex * (1.0 - (theta + side + 2.0 * PI * p.knee_phase).cos()) / 2.0;
        let knee = at(hip, p.thigh, swing);
        let foot = at(knee, p.shin, swing - flex);
        parts.push(Capsule { a: hip, b: knee, radius: thick * p.leg_radius });
        parts.push(Capsule { a: knee, b: foot, radius: thick * p.leg_radius });

        let arm = -amp * p.arm_swing * (theta + side).sin();
        let elbow = at(shoulder, p.upper_arm, arm);
        let hand = at(elbow, p.forearm, arm + p.elbow_bend);
        parts.push(Capsule { a: shoulder, b: elbow, radius: thick * p.arm_radius });
        parts.push(Capsule { a: elbow, b: hand, radius: thick * p.arm_radius });
    }
    parts
}

pub fn render_walker_frame(p: &WalkerParams, k: usize) -> Result<BinaryImage> {
    p.validate()?;
    let parts = body(p, k);
    for c in &parts {
        let (x0, y0, x1, y1) = c.bounds();
        if x0 < 0.0 || y0 < 0.0 || x1 >= FRAME_WIDTH as f64 || y1 >= FRAME_HEIGHT as f64 {
            return Err(Error::param(format!("walker exceeds the {FRAME_WIDTH}x{FRAME_HEIGHT} frame at frame {k}")));
        }
    }
    // a pixel is on when its centre lies in any part; only each part's
    // bounding box can contain such centres
    let mut img = BinaryImage::empty(FRAME_WIDTH, FRAME_HEIGHT);
    for c in &parts {
        let (x0, y0, x1, y1) = c.bounds();
        for y in y0.floor() as usize..=(y1.ceil() as usize).min(FRAME_HEIGHT - 1) {
            for x in x0.floor() as usize..=(x1.ceil() as usize).min(FRAME_WIDTH - 1) {
                if c.contains((x as f64 + 0.5, y as f64 + 0.5)) {
                    img.set(x, y, true);
                }
            }
        }
    }
    Ok(img)
}

/// Renders `frames` consecutive frames of one walk.
pub fn synth_walker(
    params: &WalkerParams,
    frames: usize,
    subject: &str,
    sequence: &str,
    role: Role,
) -> Result<SilhouetteSequence> {
    if frames < params.cycle {
        return Err(Error::param(format!("{frames} frames is less than the cycle length {}", params.cycle)));
    }
    // one rendered cycle, repeated
    let cycle = (0..params.cycle)
        .map(|k| render_walker_frame(params, k))
        .collect::<Result<Vec<_>>>()?;
    let seq = (0..frames).map(|k| cycle[k % params.cycle].clone()).collect();
    SilhouetteSequence::new(subject, sequence, role, params.cycle, seq)
}
