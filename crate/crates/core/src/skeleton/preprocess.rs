use super::{Joint2, Joint3, JointFrame, SkeletonError, SkeletonSequence, BODY_JOINTS};

/// Candidates shorter than this are dropped as false detections.
pub const MIN_FRAMES: usize = 11;
/// A candidate is dropped when its x-spread exceeds this fraction of its y-spread.
pub const SPREAD_RATIO: f64 = 0.8;

/// (x-spread, y-spread): max − min over every frame and body joint.
pub fn body_spread(seq: &SkeletonSequence) -> (f64, f64) {
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for j in seq.frames.iter().flat_map(|f| f.body.iter()) {
        xr = (xr.0.min(j.x), xr.1.max(j.x));
        yr = (yr.0.min(j.y), yr.1.max(j.y));
    }
    if seq.frames.is_empty() {
        return (0.0, 0.0);
    }
    (xr.1 - xr.0, yr.1 - yr.0)
}

/// Keeps the candidates that look like real bodies, in input order.
pub fn denoise_bodies(candidates: &[SkeletonSequence]) -> Vec<SkeletonSequence> {
    candidates
        .iter()
        .filter(|c| {
            if c.len() < MIN_FRAMES {
                return false;
            }
            let (xs, ys) = body_spread(c);
            // ys == 0 with xs > 0 falls out of this comparison as "infinite ratio".
            xs <= SPREAD_RATIO * ys
        })
        .cloned()
        .collect()
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + (b - a) * f
}

fn lerp3(a: &Joint3, b: &Joint3, f: f64) -> Joint3 {
    let c = a.confidence.min(b.confidence);
    if c == 0.0 {
        return Joint3::default();
    }
    Joint3::new(lerp(a.x, b.x, f), lerp(a.y, b.y, f), lerp(a.z, b.z, f), c)
}

fn lerp2(a: &Joint2, b: &Joint2, f: f64) -> Joint2 {
    let c = a.confidence.min(b.confidence);
    if c == 0.0 {
        return Joint2::default();
    }
    Joint2::new(lerp(a.x, b.x, f), lerp(a.y, b.y, f), c)
}

fn lerp_frame(a: &JointFrame, b: &JointFrame, f: f64, index: usize) -> JointFrame {
    let list2 = |x: &[Joint2], y: &[Joint2]| -> Vec<Joint2> {
        x.iter().zip(y).map(|(p, q)| lerp2(p, q, f)).collect()
    };
    JointFrame {
        timestamp_index: index,
        body: a.body.iter().zip(&b.body).map(|(p, q)| lerp3(p, q, f)).collect(),
        face: list2(&a.face, &b.face),
        hand_left: list2(&a.hand_left, &b.hand_left),
        hand_right: list2(&a.hand_right, &b.hand_right),
        flow: match (&a.flow, &b.flow) {
            (Some(p), Some(q)) => Some(
                p.iter()
                    .zip(q)
                    .map(|(u, v)| [lerp(u[0], v[0], f), lerp(u[1], v[1], f)])
                    .collect(),
            ),
            _ => None,
        },
    }
}

/// Linearly resamples `seq` onto `t` uniformly spaced instants of normalized time.
pub fn resample_temporal(seq: &SkeletonSequence, t: usize) -> Result<SkeletonSequence, SkeletonError> {
    if t == 0 {
        return Err(SkeletonError::Argument("target length T must be positive".into()));
    }
    if seq.is_empty() {
        return Err(SkeletonError::Argument("cannot resample an empty sequence".into()));
    }
    let len = seq.len();
    let frames = (0..t)
        .map(|i| {
            let pos = if t == 1 || len == 1 {
                0.0
            } else {
                (i * (len - 1)) as f64 / (t - 1) as f64
            };
            let lo = (pos.floor() as usize).min(len - 1);
            let frac = pos - lo as f64;
            if frac == 0.0 {
                let mut f = seq.frames[lo].clone();
                f.timestamp_index = i;
                f
            } else {
                lerp_frame(&seq.frames[lo], &seq.frames[lo + 1], frac, i)
            }
        })
        .collect();
    Ok(SkeletonSequence {
        frames,
        label: seq.label.clone(),
        subject_id: seq.subject_id,
        camera_id: seq.camera_id,
        source_length: seq.source_length,
    })
}

/// Per-frame bone vectors, one per directed (source → target) edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BoneSet {
    pub edges: Vec<(usize, usize)>,
    pub bones: Vec<Vec<[f64; 3]>>,
}

pub fn compute_bones(seq: &SkeletonSequence, edges: &[(usize, usize)]) -> Result<BoneSet, SkeletonError> {
    if let Some(&(s, t)) = edges.iter().find(|(s, t)| *s >= BODY_JOINTS || *t >= BODY_JOINTS) {
        return Err(SkeletonError::Topology(format!(
            "edge ({s},{t}) references a joint index >= {BODY_JOINTS}"
        )));
    }
    let bones = seq
        .frames
        .iter()
        .map(|f| {
            edges
                .iter()
                .map(|&(s, t)| {
                    let (a, b) = (&f.body[s], &f.body[t]);
                    [b.x - a.x, b.y - a.y, b.z - a.z]
                })
                .collect()
        })
        .collect();
    Ok(BoneSet {
        edges: edges.to_vec(),
        bones,
    })
}

/// Per-frame, per-body-joint (fx, fy).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub frames: Vec<Vec<[f64; 2]>>,
    /// Set when the field could not be estimated (fewer than two frames).
    pub degenerate: bool,
}

/// Finite-difference joint displacement in the (x, y) plane.
pub fn proxy_flow(seq: &SkeletonSequence) -> FlowField {
    let n = seq.len();
    if n < 2 {
        return FlowField {
            frames: vec![vec![[0.0; 2]; BODY_JOINTS]; n],
            degenerate: true,
        };
    }
    let mut frames: Vec<Vec<[f64; 2]>> = seq
        .frames
        .windows(2)
        .map(|w| {
            w[0].body
                .iter()
                .zip(&w[1].body)
                .map(|(a, b)| [b.x - a.x, b.y - a.y])
                .collect()
        })
        .collect();
    frames.push(frames[n - 2].clone());
    FlowField {
        frames,
        degenerate: false,
    }
}

/// Precomputed flow when every frame carries it, otherwise [`proxy_flow`].
pub fn flow_or_proxy(seq: &SkeletonSequence) -> FlowField {
    if seq.has_flow() {
        FlowField {
            frames: seq.frames.iter().map(|f| f.flow.clone().unwrap()).collect(),
            degenerate: false,
        }
    } else {
        proxy_flow(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq_from_body(frames: Vec<Vec<Joint3>>) -> SkeletonSequence {
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(t, body)| {
                let mut f = JointFrame::empty(t);
                f.body = body;
                f
            })
            .collect();
        SkeletonSequence::new("a", 1, 1, frames)
    }

    /// Body joints spanning exactly `xs` in x and `ys` in y.
    fn spread_candidate(frames: usize, xs: f64, ys: f64) -> SkeletonSequence {
        let body = (0..BODY_JOINTS)
            .map(|k| {
                let x = if k == 1 { xs } else { 0.0 };
                let y = if k == 2 { ys } else { 0.0 };
                Joint3::new(x, y, 3.0, 1.0)
            })
            .collect::<Vec<_>>();
        seq_from_body(vec![body; frames])
    }

    fn random_seq(rng: &mut impl Rng, frames: usize) -> SkeletonSequence {
        let mut s = seq_from_body(
            (0..frames)
                .map(|_| {
                    (0..BODY_JOINTS)
                        .map(|_| {
                            Joint3::new(
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(2.0..4.0),
                                rng.gen_range(0.1..1.0),
                            )
                        })
                        .collect()
                })
                .collect(),
        );
        for f in &mut s.frames {
            for j in f.face.iter_mut().chain(f.hand_left.iter_mut()) {
                *j = Joint2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 1.0);
            }
        }
        s
    }

    #[test]
    fn denoise_frame_length_rule() {
        let c10 = spread_candidate(10, 0.5, 1.0);
        let c11 = spread_candidate(11, 0.5, 1.0);
        assert!(denoise_bodies(&[c10]).is_empty());
        assert_eq!(denoise_bodies(&[c11.clone()]), vec![c11]);
    }

    #[test]
    fn denoise_spread_ratio_rule() {
        assert_eq!(body_spread(&spread_candidate(12, 0.81, 1.0)), (0.81, 1.0));
        assert!(denoise_bodies(&[spread_candidate(12, 0.81, 1.0)]).is_empty());
        assert_eq!(denoise_bodies(&[spread_candidate(12, 0.79, 1.0)]).len(), 1);
        assert_eq!(denoise_bodies(&[spread_candidate(12, 0.8, 1.0)]).len(), 1);
        // zero y-spread with any x-spread: infinite ratio
        assert!(denoise_bodies(&[spread_candidate(12, 0.1, 0.0)]).is_empty());
    }

    #[test]
    fn denoise_preserves_order() {
        let a = spread_candidate(20, 0.1, 1.0);
        let b = spread_candidate(5, 0.1, 1.0);
        let mut c = spread_candidate(30, 0.2, 1.0);
        c.label = "c".into();
        let out = denoise_bodies(&[a.clone(), b, c.clone()]);
        assert_eq!(out, vec![a, c]);
    }

    #[test]
    fn resample_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_seq(&mut rng, 60);
        assert_eq!(resample_temporal(&s, 60).unwrap(), s);
    }

    #[test]
    fn resample_linear_midpoint() {
        let mk = |x: f64| {
            let mut b = vec![Joint3::new(0.0, 0.0, 0.0, 1.0); BODY_JOINTS];
            b[0].x = x;
            b
        };
        let s = seq_from_body(vec![mk(0.0), mk(10.0)]);
        let r = resample_temporal(&s, 3).unwrap();
        let xs: Vec<f64> = r.frames.iter().map(|f| f.body[0].x).collect();
        assert_eq!(xs, vec![0.0, 5.0, 10.0]);
        let ts: Vec<usize> = r.frames.iter().map(|f| f.timestamp_index).collect();
        assert_eq!(ts, vec![0, 1, 2]);
    }

    #[test]
    fn resample_sinusoid_tracks_closed_form() {
        let amp = 0.7;
        let src = 100;
        let signal = |u: f64| amp * (2.0 * std::f64::consts::PI * 1.5 * u).sin();
        let frames = (0..src)
            .map(|i| {
                let u = i as f64 / (src - 1) as f64;
                (0..BODY_JOINTS)
                    .map(|k| Joint3::new(signal(u) + k as f64, signal(u) * 0.5, 3.0, 1.0))
                    .collect()
            })
            .collect();
        let r = resample_temporal(&seq_from_body(frames), 60).unwrap();
        let mut worst: f64 = 0.0;
        for (i, f) in r.frames.iter().enumerate() {
            let u = i as f64 / 59.0;
            for (k, j) in f.body.iter().enumerate() {
                worst = worst.max((j.x - k as f64 - signal(u)).abs());
                worst = worst.max((j.y - 0.5 * signal(u)).abs());
            }
        }
        assert!(worst < 0.01 * amp, "max deviation {worst}");
    }

    #[test]
    fn resample_confidence_is_min_and_missing_stays_missing() {
        let mut a = vec![Joint3::new(1.0, 1.0, 1.0, 0.9); BODY_JOINTS];
        let mut b = vec![Joint3::new(3.0, 3.0, 3.0, 0.4); BODY_JOINTS];
        a[5] = Joint3::default();
        b[6] = Joint3::default();
        let r = resample_temporal(&seq_from_body(vec![a, b]), 3).unwrap();
        assert_eq!(r.frames[1].body[0], Joint3::new(2.0, 2.0, 2.0, 0.4));
        assert_eq!(r.frames[1].body[5], Joint3::default());
        assert_eq!(r.frames[1].body[6], Joint3::default());
        assert_eq!(r.frames[0].body[0].confidence, 0.9);
    }

    #[test]
    fn resample_errors_and_single_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_seq(&mut rng, 1);
        assert!(resample_temporal(&s, 0).is_err());
        let r = resample_temporal(&s, 4).unwrap();
        assert_eq!(r.len(), 4);
        for (i, f) in r.frames.iter().enumerate() {
            assert_eq!(f.body, s.frames[0].body);
            assert_eq!(f.timestamp_index, i);
        }
        let empty = SkeletonSequence::new("a", 0, 0, vec![]);
        assert!(resample_temporal(&empty, 3).is_err());
    }

    #[test]
    fn bones_zero_and_direct() {
        let s = seq_from_body(vec![vec![Joint3::default(); BODY_JOINTS]]);
        let b = compute_bones(&s, &[(0, 1), (1, 2)]).unwrap();
        assert!(b.bones[0].iter().all(|v| *v == [0.0; 3]));

        let mut body = vec![Joint3::default(); BODY_JOINTS];
        body[0] = Joint3::new(1.0, 1.0, 1.0, 1.0);
        body[1] = Joint3::new(2.0, 3.0, 4.0, 1.0);
        let b = compute_bones(&seq_from_body(vec![body]), &[(0, 1)]).unwrap();
        assert_eq!(b.bones[0][0], [1.0, 2.0, 3.0]);
        assert!(matches!(
            compute_bones(&s, &[(0, 25)]),
            Err(SkeletonError::Topology(_))
        ));
    }

    #[test]
    fn flow_static_and_constant_velocity() {
        let still = seq_from_body(vec![vec![Joint3::new(0.5, 0.5, 3.0, 1.0); BODY_JOINTS]; 5]);
        let f = proxy_flow(&still);
        assert!(!f.degenerate);
        assert!(f.frames.iter().flatten().all(|v| *v == [0.0, 0.0]));

        let moving = seq_from_body(
            (0..6)
                .map(|t| vec![Joint3::new(2.0 * t as f64, 1.0, 3.0, 1.0); BODY_JOINTS])
                .collect(),
        );
        let f = proxy_flow(&moving);
        assert_eq!(f.frames.len(), 6);
        assert!(f.frames.iter().flatten().all(|v| *v == [2.0, 0.0]));
    }

    #[test]
    fn flow_single_frame_is_flagged() {
        let s = seq_from_body(vec![vec![Joint3::new(1.0, 1.0, 1.0, 1.0); BODY_JOINTS]]);
        let f = proxy_flow(&s);
        assert!(f.degenerate);
        assert_eq!(f.frames, vec![vec![[0.0, 0.0]; BODY_JOINTS]]);
    }

    #[test]
    fn flow_prefers_precomputed() {
        let mut s = seq_from_body(vec![vec![Joint3::new(1.0, 1.0, 1.0, 1.0); BODY_JOINTS]; 2]);
        for f in &mut s.frames {
            f.flow = Some(vec![[7.0, -1.0]; BODY_JOINTS]);
        }
        assert_eq!(flow_or_proxy(&s).frames[1][3], [7.0, -1.0]);
        s.frames[1].flow = None;
        assert_eq!(flow_or_proxy(&s).frames[1][3], [0.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn resample_is_idempotent(seed in any::<u64>(), len in 1usize..40, t in 1usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_seq(&mut rng, len);
            let once = resample_temporal(&s, t).unwrap();
            prop_assert_eq!(once.len(), t);
            let twice = resample_temporal(&once, t).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn bones_translation_invariant(seed in any::<u64>(), dx in -5.0f64..5.0, dy in -5.0f64..5.0, dz in -5.0f64..5.0) {
            // exact invariance needs translations that do not perturb the low bits;
            // use dyadic offsets and dyadic coordinates
            let q = |v: f64| (v * 64.0).round() / 64.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_seq(&mut rng, 4);
            for f in &mut s.frames {
                for j in &mut f.body {
                    j.x = q(j.x); j.y = q(j.y); j.z = q(j.z);
                }
            }
            let edges = crate::graph::Topology::body().directed_edges();
            let base = compute_bones(&s, &edges).unwrap();
            let mut moved = s.clone();
            for f in &mut moved.frames {
                for j in &mut f.body {
                    j.x += q(dx); j.y += q(dy); j.z += q(dz);
                }
            }
            prop_assert_eq!(compute_bones(&moved, &edges).unwrap(), base);
        }

        #[test]
        fn reversed_flow_is_negated(seed in any::<u64>(), len in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_seq(&mut rng, len);
            let mut r = s.clone();
            r.frames.reverse();
            let f = proxy_flow(&s);
            let fr = proxy_flow(&r);
            for t in 0..len - 1 {
                for k in 0..BODY_JOINTS {
                    let a = fr.frames[t][k];
                    let b = f.frames[len - 2 - t][k];
                    prop_assert_eq!(a, [-b[0], -b[1]]);
                }
            }
        }

        #[test]
        fn denoise_output_is_subsequence(seed in any::<u64>(), n in 0usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cands: Vec<_> = (0..n)
                .map(|i| {
                    let mut c = spread_candidate(rng.gen_range(5..20), rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5));
                    c.label = format!("c{i}");
                    c
                })
                .collect();
            let out = denoise_bodies(&cands);
            let mut it = cands.iter();
            for o in &out {
                prop_assert!(it.any(|c| c == o));
            }
        }
    }
}
