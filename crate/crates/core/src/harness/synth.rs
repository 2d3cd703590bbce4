//! Procedural multi-modal action sequences.
//!
//! Bodies are 25-joint stick figures in sensor space (meters, y up, z depth).
//! Face landmarks and hand joints are image-plane pixels obtained by a
//! pinhole projection of the head and wrists.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::skeleton::{Joint2, Joint3, JointFrame, SkeletonSequence, BODY_JOINTS, FACE_LANDMARKS, HAND_JOINTS};

use super::HarnessError;

pub const FOCAL_PX: f64 = 1000.0;
pub const CENTER_PX: (f64, f64) = (960.0, 540.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Sine,
    Triangle,
}

impl Waveform {
    /// Periodic signal in [−1, 1] of phase `x` (radians).
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Waveform::Sine => x.sin(),
            Waveform::Triangle => {
                let u = (x / (2.0 * PI)).rem_euclid(1.0);
                if u < 0.25 {
                    4.0 * u
                } else if u < 0.75 {
                    2.0 - 4.0 * u
                } else {
                    4.0 * u - 4.0
                }
            }
        }
    }
}

/// Body part a motion drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPart {
    /// Right arm raised sideways, forearm swinging about the elbow.
    RightArmWave,
    /// Both forearms forward, hands meeting at the midline.
    Clap,
    /// Right leg swinging forward about the hip.
    RightLegKick,
    /// Head pitch, visible only in the face landmarks.
    HeadNod,
    /// Finger flexion of both hands, visible only in the hand joints.
    FingerCurl,
}

impl MotionPart {
    /// Whether the part moves body joints (as opposed to face or hand channels only).
    pub fn drives_body(self) -> bool {
        !matches!(self, MotionPart::HeadNod | MotionPart::FingerCurl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub part: MotionPart,
    pub waveform: Waveform,
    /// Radians for rotations; fraction of full flexion for finger curl.
    pub amplitude: f64,
    /// Cycles per sequence.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassProgram {
    pub name: String,
    pub motions: Vec<Motion>,
}

impl ClassProgram {
    fn body_program(&self) -> Vec<Motion> {
        self.motions.iter().copied().filter(|m| m.part.drives_body()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTaskSpec {
    pub classes: Vec<ClassProgram>,
    /// Standard deviation in meters; image-plane keypoints get the projected equivalent.
    pub noise_sigma: f64,
    pub subjects: u32,
    pub frames: usize,
    pub sequences_per_class: usize,
    pub seed: u64,
}

fn motion(part: MotionPart, amplitude: f64, frequency: f64) -> Motion {
    Motion {
        part,
        waveform: Waveform::Sine,
        amplitude,
        frequency,
    }
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        let wave = motion(MotionPart::RightArmWave, 0.6, 3.0);
        SyntheticTaskSpec {
            classes: vec![
                ClassProgram { name: "still".into(), motions: vec![] },
                ClassProgram { name: "wave".into(), motions: vec![wave] },
                ClassProgram {
                    name: "clap".into(),
                    motions: vec![motion(MotionPart::Clap, 1.0, 3.0)],
                },
                ClassProgram {
                    name: "nod".into(),
                    motions: vec![motion(MotionPart::HeadNod, 0.45, 2.0)],
                },
                ClassProgram {
                    name: "finger-wiggle".into(),
                    motions: vec![wave, motion(MotionPart::FingerCurl, 1.0, 4.0)],
                },
                ClassProgram {
                    name: "kick".into(),
                    motions: vec![motion(MotionPart::RightLegKick, 0.7, 2.0)],
                },
            ],
            noise_sigma: 0.005,
            subjects: 10,
            frames: 60,
            sequences_per_class: 90,
            seed: 42,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.classes.len() < 2 {
            return Err(HarnessError::Argument(format!("need at least 2 classes, got {}", self.classes.len())));
        }
        if self.sequences_per_class == 0 || self.frames == 0 || self.subjects == 0 {
            return Err(HarnessError::Argument(
                "sequences per class, frames and subjects must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(HarnessError::Argument(format!("invalid noise sigma {}", self.noise_sigma)));
        }
        for (i, a) in self.classes.iter().enumerate() {
            if self.classes[..i].iter().any(|b| b.name == a.name) {
                return Err(HarnessError::Argument(format!("duplicate class `{}`", a.name)));
            }
        }
        if self.body_identical_pairs().is_empty() {
            return Err(HarnessError::Argument(
                "no class pair shares a body program; one must differ only in face or hand motion".into(),
            ));
        }
        Ok(())
    }

    /// Class index pairs with identical body programs but different programs overall.
    pub fn body_identical_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.classes.len() {
            for j in i + 1..self.classes.len() {
                let (a, b) = (&self.classes[i], &self.classes[j]);
                if a.body_program() == b.body_program() && a.motions != b.motions {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }
}

/// Appearance and timing of one recording.
#[derive(Debug, Clone, Copy)]
struct Recording {
    scale: f64,
    offset: [f64; 3],
    phase: f64,
    freq_jitter: f64,
    amp_jitter: f64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    x ^= x >> 31;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^ (x >> 29)
}

fn subject_scale(seed: u64, subject: u32) -> f64 {
    ChaCha8Rng::seed_from_u64(mix(seed, 1, subject as u64)).gen_range(0.9..1.1)
}

fn recording(spec: &SyntheticTaskSpec, index: usize) -> Recording {
    let subject = (index as u32) % spec.subjects;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, 2, index as u64));
    Recording {
        scale: subject_scale(spec.seed, subject),
        offset: [rng.gen_range(-0.25..0.25), rng.gen_range(-0.05..0.05), rng.gen_range(2.6..3.4)],
        phase: rng.gen_range(0.0..2.0 * PI),
        freq_jitter: rng.gen_range(0.85..1.15),
        amp_jitter: rng.gen_range(0.85..1.15),
    }
}

/// Rest pose relative to the spine base, person facing the sensor.
const REST_POSE: [[f64; 3]; BODY_JOINTS] = [
    [0.0, 0.0, 0.0],      // 0 spine base
    [0.0, 0.25, 0.0],     // 1 spine mid
    [0.0, 0.58, 0.0],     // 2 neck
    [0.0, 0.70, 0.0],     // 3 head
    [0.18, 0.48, 0.0],    // 4 left shoulder
    [0.22, 0.22, 0.0],    // 5 left elbow
    [0.24, -0.02, 0.0],   // 6 left wrist
    [0.245, -0.08, 0.0],  // 7 left hand
    [-0.18, 0.48, 0.0],   // 8 right shoulder
    [-0.22, 0.22, 0.0],   // 9 right elbow
    [-0.24, -0.02, 0.0],  // 10 right wrist
    [-0.245, -0.08, 0.0], // 11 right hand
    [0.09, -0.02, 0.0],   // 12 left hip
    [0.10, -0.45, 0.0],   // 13 left knee
    [0.10, -0.85, 0.0],   // 14 left ankle
    [0.10, -0.90, -0.10], // 15 left foot
    [-0.09, -0.02, 0.0],  // 16 right hip
    [-0.10, -0.45, 0.0],  // 17 right knee
    [-0.10, -0.85, 0.0],  // 18 right ankle
    [-0.10, -0.90, -0.10], // 19 right foot
    [0.0, 0.50, 0.0],     // 20 spine shoulder
    [0.25, -0.14, 0.0],   // 21 left hand tip
    [0.21, -0.07, 0.0],   // 22 left thumb
    [-0.25, -0.14, 0.0],  // 23 right hand tip
    [-0.21, -0.07, 0.0],  // 24 right thumb
];

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Rotation by `angle` in the plane of axes `i`, `j`.
fn rotate(v: [f64; 3], i: usize, j: usize, angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let mut out = v;
    out[i] = c * v[i] - s * v[j];
    out[j] = s * v[i] + c * v[j];
    out
}

/// Joints `chain` rotated rigidly about `pivot`.
fn rotate_about(pose: &mut [[f64; 3]; BODY_JOINTS], pivot: usize, chain: &[usize], i: usize, j: usize, angle: f64) {
    let p = pose[pivot];
    for &k in chain {
        pose[k] = add(p, rotate(sub(pose[k], p), i, j, angle));
    }
}

const RIGHT_FOREARM: [usize; 5] = [10, 11, 23, 24, 9];
const LEFT_FOREARM: [usize; 5] = [6, 7, 21, 22, 5];

/// Per-frame drive values in [−1, 1] of each body motion.
fn pose_at(body_motions: &[(Motion, f64)]) -> [[f64; 3]; BODY_JOINTS] {
    let mut pose = REST_POSE;
    for &(m, s) in body_motions {
        match m.part {
            MotionPart::RightArmWave => {
                // raise the whole arm sideways to horizontal, then the forearm up
                rotate_about(&mut pose, 8, &RIGHT_FOREARM, 0, 1, -PI / 2.0 + 0.1);
                rotate_about(&mut pose, 9, &RIGHT_FOREARM[..4], 0, 1, -PI / 2.0);
                rotate_about(&mut pose, 9, &RIGHT_FOREARM[..4], 0, 1, m.amplitude * s);
            }
            MotionPart::Clap => {
                // forearms forward at chest height; opening angle follows the drive
                for (elbow, forearm, sign) in [(9, &RIGHT_FOREARM[..4], 1.0), (5, &LEFT_FOREARM[..4], -1.0)] {
                    rotate_about(&mut pose, elbow, forearm, 1, 2, PI / 2.0);
                    let open = 0.15 + 0.55 * m.amplitude * (1.0 + s) / 2.0;
                    rotate_about(&mut pose, elbow, forearm, 0, 2, sign * (PI / 2.0 - open) * -1.0);
                }
            }
            MotionPart::RightLegKick => {
                let angle = m.amplitude * (1.0 + s) / 2.0;
                rotate_about(&mut pose, 16, &[17, 18, 19], 1, 2, -angle);
            }
            MotionPart::HeadNod | MotionPart::FingerCurl => {}
        }
    }
    pose
}

fn project(p: [f64; 3]) -> (f64, f64) {
    (CENTER_PX.0 + FOCAL_PX * p[0] / p[2], CENTER_PX.1 - FOCAL_PX * p[1] / p[2])
}

/// Landmark template in face units: x right, y down, centered on the nose tip region.
fn face_template() -> [(f64, f64); FACE_LANDMARKS] {
    let mut f = [(0.0, 0.0); FACE_LANDMARKS];
    for (i, p) in f.iter_mut().enumerate().take(17) {
        let a = PI * i as f64 / 16.0;
        *p = (-0.45 * a.cos(), 0.5 * a.sin());
    }
    for i in 0..5 {
        let u = i as f64 / 4.0;
        let arch = -0.28 - 0.04 * (PI * u).sin();
        f[17 + i] = (-0.38 + 0.30 * u, arch);
        f[22 + i] = (0.08 + 0.30 * u, -0.28 - 0.04 * (PI * u).sin());
    }
    for i in 0..4 {
        f[27 + i] = (0.0, -0.2 + 0.083 * i as f64);
    }
    for i in 0..5 {
        f[31 + i] = (-0.09 + 0.045 * i as f64, 0.12);
    }
    for (start, cx) in [(36, -0.2), (42, 0.2)] {
        for i in 0..6 {
            let a = PI + 2.0 * PI * i as f64 / 6.0;
            f[start + i] = (cx + 0.08 * a.cos(), -0.12 + 0.03 * a.sin());
        }
    }
    for i in 0..12 {
        let a = PI + 2.0 * PI * i as f64 / 12.0;
        f[48 + i] = (0.2 * a.cos(), 0.3 + 0.07 * a.sin());
    }
    for i in 0..8 {
        let a = PI + 2.0 * PI * i as f64 / 8.0;
        f[60 + i] = (0.12 * a.cos(), 0.3 + 0.03 * a.sin());
    }
    f
}

/// Flexion the wiggling fingers never open beyond, as a fraction of the amplitude.
const CURL_REST: f64 = 0.6;

/// (base offset along axis, base offset across axis, splay, segment lengths) per finger.
const FINGERS: [(f64, f64, f64, [f64; 3]); 5] = [
    (0.10, 0.25, 0.8, [0.20, 0.16, 0.12]),
    (0.30, 0.12, 0.15, [0.25, 0.20, 0.15]),
    (0.32, 0.04, 0.0, [0.27, 0.21, 0.16]),
    (0.31, -0.04, -0.12, [0.25, 0.20, 0.15]),
    (0.28, -0.12, -0.25, [0.20, 0.15, 0.12]),
];

/// 21 image-plane joints of a hand at `wrist` with `axis` its unit direction.
fn hand_joints(wrist: (f64, f64), axis: (f64, f64), across_sign: f64, size: f64, curl: [f64; 5]) -> [(f64, f64); HAND_JOINTS] {
    let perp = (-axis.1 * across_sign, axis.0 * across_sign);
    let at = |a: f64, p: f64| (wrist.0 + size * (a * axis.0 + p * perp.0), wrist.1 + size * (a * axis.1 + p * perp.1));
    let mut out = [wrist; HAND_JOINTS];
    for (f, &(ba, bp, splay, segs)) in FINGERS.iter().enumerate() {
        let (mut a, mut p) = (ba, bp);
        out[1 + 4 * f] = at(a, p);
        let (ds, dc) = splay.sin_cos();
        for (s, len) in segs.iter().enumerate() {
            // flexion foreshortens each segment in the image plane
            let fold = (curl[f] * (s as f64 + 1.0) * PI / 4.0).cos();
            a += len * dc * fold;
            p += len * ds * fold;
            out[2 + 4 * f + s] = at(a, p);
        }
    }
    out
}

/// Class `class` performed in recording `index`; `noise_stream` selects an
/// independent noise draw. Equal `index` means equal subject, placement,
/// amplitude and timing whatever the class.
pub fn generate_sequence(
    spec: &SyntheticTaskSpec,
    class: usize,
    index: usize,
    noise_stream: u64,
) -> Result<SkeletonSequence, HarnessError> {
    let program = spec
        .classes
        .get(class)
        .ok_or_else(|| HarnessError::Argument(format!("class index {class} out of range")))?;
    let rec = recording(spec, index);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, 3 + noise_stream, (class * 1_000_003 + index) as u64));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let sigma = spec.noise_sigma;
    let face = face_template();
    let t_len = spec.frames;
    let mut frames = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let tau = if t_len > 1 { t as f64 / (t_len - 1) as f64 } else { 0.0 };
        let drive = |m: &Motion, extra: f64| {
            m.waveform
                .eval(2.0 * PI * m.frequency * rec.freq_jitter * tau + rec.phase + extra)
        };
        let body_motions: Vec<(Motion, f64)> = program
            .motions
            .iter()
            .filter(|m| m.part.drives_body())
            .map(|m| {
                let mut m = *m;
                m.amplitude *= rec.amp_jitter;
                (m, drive(&m, 0.0))
            })
            .collect();
        let pose = pose_at(&body_motions);
        let world: Vec<[f64; 3]> = pose
            .iter()
            .map(|p| add(rec.offset, [p[0] * rec.scale, p[1] * rec.scale, p[2] * rec.scale]))
            .collect();

        let mut frame = JointFrame::empty(t);
        for (j, w) in frame.body.iter_mut().zip(&world) {
            *j = Joint3::new(
                w[0] + sigma * unit.sample(&mut noise_rng),
                w[1] + sigma * unit.sample(&mut noise_rng),
                w[2] + sigma * unit.sample(&mut noise_rng),
                1.0,
            );
        }

        let px_sigma = |depth: f64| sigma * FOCAL_PX / depth;

        let head = world[3];
        let face_size = FOCAL_PX * 0.2 * rec.scale / head[2];
        let (hx, hy) = project(head);
        let pitch = program
            .motions
            .iter()
            .find(|m| m.part == MotionPart::HeadNod)
            .map(|m| m.amplitude * rec.amp_jitter * drive(m, 0.0))
            .unwrap_or(0.0);
        let fs = px_sigma(head[2]);
        for (j, &(u, v)) in frame.face.iter_mut().zip(face.iter()) {
            let y = v * pitch.cos() + 0.6 * pitch.sin();
            *j = Joint2::new(
                hx + face_size * u + fs * unit.sample(&mut noise_rng),
                hy + face_size * (y + 0.1) + fs * unit.sample(&mut noise_rng),
                1.0,
            );
        }

        let curl_motion = program.motions.iter().find(|m| m.part == MotionPart::FingerCurl);
        for (hand, wrist_idx, elbow_idx, across) in [(0usize, 6usize, 5usize, -1.0), (1, 10, 9, 1.0)] {
            let wrist_w = world[wrist_idx];
            let w = project(wrist_w);
            let e = project(world[elbow_idx]);
            let (dx, dy) = (w.0 - e.0, w.1 - e.1);
            let norm = (dx * dx + dy * dy).sqrt().max(1e-9);
            let size = FOCAL_PX * 0.19 * rec.scale / wrist_w[2];
            let mut curl = [0.0; 5];
            if let Some(m) = curl_motion {
                for (f, c) in curl.iter_mut().enumerate() {
                    *c = m.amplitude * rec.amp_jitter * (CURL_REST + (1.0 - CURL_REST) * (1.0 + drive(m, 0.8 * f as f64)) / 2.0);
                }
            }
            let joints = hand_joints(w, (dx / norm, dy / norm), across, size, curl);
            let hs = px_sigma(wrist_w[2]);
            let target = if hand == 0 { &mut frame.hand_left } else { &mut frame.hand_right };
            for (j, &(x, y)) in target.iter_mut().zip(joints.iter()) {
                *j = Joint2::new(
                    x + hs * unit.sample(&mut noise_rng),
                    y + hs * unit.sample(&mut noise_rng),
                    1.0,
                );
            }
        }
        frames.push(frame);
    }
    let subject = (index as u32) % spec.subjects;
    Ok(SkeletonSequence::new(program.name.clone(), subject, 1, frames))
}

/// All sequences, class-major; every sequence has its own recording, and
/// subject ids run round-robin over recordings.
pub fn generate_synthetic(spec: &SyntheticTaskSpec) -> Result<Vec<SkeletonSequence>, HarnessError> {
    spec.validate()?;
    let n = spec.sequences_per_class;
    let mut out = Vec::with_capacity(spec.classes.len() * n);
    for c in 0..spec.classes.len() {
        for i in 0..n {
            out.push(generate_sequence(spec, c, c * n + i, 0)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{parse_sequence, serialize_sequence};

    #[test]
    fn default_spec_has_a_body_identical_pair() {
        let spec = SyntheticTaskSpec::default();
        spec.validate().unwrap();
        let wave = spec.class_index("wave").unwrap();
        let fw = spec.class_index("finger-wiggle").unwrap();
        let still = spec.class_index("still").unwrap();
        let nod = spec.class_index("nod").unwrap();
        let pairs = spec.body_identical_pairs();
        assert!(pairs.contains(&(wave, fw)));
        assert!(pairs.contains(&(still, nod)));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = SyntheticTaskSpec::default();
        s.classes.truncate(1);
        assert!(s.validate().is_err());
        let mut s = SyntheticTaskSpec::default();
        s.sequences_per_class = 0;
        assert!(generate_synthetic(&s).is_err());
        let mut s = SyntheticTaskSpec::default();
        s.classes.retain(|c| c.name != "nod" && c.name != "finger-wiggle");
        assert!(s.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = SyntheticTaskSpec::default();
        spec.sequences_per_class = 3;
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        let ta: Vec<String> = a.iter().map(serialize_sequence).collect();
        let tb: Vec<String> = b.iter().map(serialize_sequence).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn noiseless_still_frames_are_identical() {
        let mut spec = SyntheticTaskSpec::default();
        spec.noise_sigma = 0.0;
        let s = generate_sequence(&spec, spec.class_index("still").unwrap(), 4, 0).unwrap();
        for f in &s.frames[1..] {
            assert_eq!(f.body, s.frames[0].body);
            assert_eq!(f.face, s.frames[0].face);
            assert_eq!(f.hand_left, s.frames[0].hand_left);
            assert_eq!(f.hand_right, s.frames[0].hand_right);
        }
    }

    #[test]
    fn noiseless_wave_and_finger_wiggle_share_body_and_differ_in_hand() {
        let mut spec = SyntheticTaskSpec::default();
        spec.noise_sigma = 0.0;
        let w = generate_sequence(&spec, spec.class_index("wave").unwrap(), 2, 0).unwrap();
        let f = generate_sequence(&spec, spec.class_index("finger-wiggle").unwrap(), 2, 0).unwrap();
        let still = generate_sequence(&spec, spec.class_index("still").unwrap(), 2, 0).unwrap();
        let nod = generate_sequence(&spec, spec.class_index("nod").unwrap(), 2, 0).unwrap();
        for t in 0..spec.frames {
            assert_eq!(w.frames[t].body, f.frames[t].body);
            assert_eq!(still.frames[t].body, nod.frames[t].body);
            assert_eq!(still.frames[t].hand_right, nod.frames[t].hand_right);
        }
        assert!(w.frames.iter().zip(&f.frames).any(|(a, b)| a.hand_right != b.hand_right));
        assert!(w.frames.iter().zip(&f.frames).any(|(a, b)| a.hand_left != b.hand_left));
        assert!(still.frames.iter().zip(&nod.frames).any(|(a, b)| a.face != b.face));
    }

    #[test]
    fn sequences_are_valid_and_round_trip() {
        let mut spec = SyntheticTaskSpec::default();
        spec.sequences_per_class = 2;
        for s in generate_synthetic(&spec).unwrap() {
            s.validate().unwrap();
            assert_eq!(s.len(), 60);
            assert_eq!(parse_sequence(&serialize_sequence(&s)).unwrap(), s);
        }
    }

    #[test]
    fn subjects_are_round_robin() {
        let mut spec = SyntheticTaskSpec::default();
        spec.sequences_per_class = 12;
        let d = generate_synthetic(&spec).unwrap();
        let ids: Vec<u32> = d[..12].iter().map(|s| s.subject_id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1]);
    }

    #[test]
    fn triangle_wave_shape() {
        let w = Waveform::Triangle;
        assert!((w.eval(0.0)).abs() < 1e-12);
        assert!((w.eval(PI / 2.0) - 1.0).abs() < 1e-12);
        assert!((w.eval(3.0 * PI / 2.0) + 1.0).abs() < 1e-12);
    }
}
