//! Properties of the constructed task that the ablation trend relies on.

use deepacts::harness::{generate_sequence, SyntheticTaskSpec};
use deepacts::skeleton::SkeletonSequence;
use deepacts::stamp::{joints_to_map, raw_channels, NormScope};
use deepacts::Modality;

/// Mean absolute pixel difference between the stamps of `a` and `b`.
fn distance(a: &SkeletonSequence, b: &SkeletonSequence, m: Modality) -> f64 {
    let x = joints_to_map(a, m, NormScope::PerSequence).unwrap();
    let y = joints_to_map(b, m, NormScope::PerSequence).unwrap();
    let total: f64 = x.pixels.iter().zip(&y.pixels).map(|(p, q)| (*p as f64 - *q as f64).abs()).sum();
    total / x.pixels.len() as f64
}

/// Mean stamp distance between wave and finger-wiggle from the same recording,
/// and between two noise draws of the same wave recording.
fn pair_and_noise(m: Modality) -> (f64, f64) {
    let spec = SyntheticTaskSpec::default();
    let wave = spec.class_index("wave").unwrap();
    let finger = spec.class_index("finger-wiggle").unwrap();
    let (mut pair, mut noise) = (0.0, 0.0);
    let recordings = 12;
    for i in 0..recordings {
        let w0 = generate_sequence(&spec, wave, i, 0).unwrap();
        let w1 = generate_sequence(&spec, wave, i, 1).unwrap();
        let f0 = generate_sequence(&spec, finger, i, 0).unwrap();
        pair += distance(&w0, &f0, m);
        noise += distance(&w0, &w1, m);
    }
    (pair / recordings as f64, noise / recordings as f64)
}

#[test]
fn body_cannot_tell_wave_from_finger_wiggle() {
    let (pair, noise) = pair_and_noise(Modality::Body);
    assert!(noise > 0.0);
    // Distances between independent noise draws: the pair differs by noise alone.
    assert!(pair < 3.0 * noise, "body pair distance {pair} vs noise baseline {noise}");
}

#[test]
fn hands_separate_wave_from_finger_wiggle() {
    let (pair, noise) = pair_and_noise(Modality::Hands);
    assert!(pair > 3.0 * noise, "hands pair distance {pair} vs noise baseline {noise}");
}

#[test]
fn noiseless_pair_has_identical_body_channels() {
    let spec = SyntheticTaskSpec { noise_sigma: 0.0, ..SyntheticTaskSpec::default() };
    let w = generate_sequence(&spec, spec.class_index("wave").unwrap(), 3, 0).unwrap();
    let f = generate_sequence(&spec, spec.class_index("finger-wiggle").unwrap(), 3, 0).unwrap();
    assert_eq!(raw_channels(&w, Modality::Body).unwrap(), raw_channels(&f, Modality::Body).unwrap());
    assert_ne!(raw_channels(&w, Modality::Hands).unwrap(), raw_channels(&f, Modality::Hands).unwrap());
}
