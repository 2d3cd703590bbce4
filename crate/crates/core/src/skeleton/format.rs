//! Line-oriented sequence files.
//!
//! ```text
//! #header label=<id> subject=<int> camera=<int> [source_length=<int>] [actors=1]
//! <body 25×(x y z c)> | <face 68×(x y c)> | <hand_left 21×(x y c)> | <hand_right 21×(x y c)> [| <flow 25×(fx fy)>]
//! ```
//!
//! Frame lines are numbered by order of appearance. Fields are written with
//! the shortest decimal representation that parses back to the same `f64`,
//! so serialization is an exact inverse of parsing.

use std::fmt::Write as _;

use super::{
    Joint2, Joint3, JointFrame, SkeletonError, SkeletonSequence, BODY_JOINTS, FACE_LANDMARKS,
    HAND_JOINTS,
};

const SEPARATOR: &str = "|";

fn parse_err(line: usize, message: impl Into<String>) -> SkeletonError {
    SkeletonError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_sequence(text: &str) -> Result<SkeletonSequence, SkeletonError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header) = lines.next().ok_or(SkeletonError::EmptyInput)?;
    let (label, subject_id, camera_id, source_length) = parse_header(header_line, header)?;

    let mut frames = Vec::new();
    for (line_no, line) in lines {
        let frame = parse_frame(line_no, line, frames.len())?;
        frames.push(frame);
    }
    let source_length = source_length.unwrap_or(frames.len());
    let has_flow = frames.first().map(|f: &JointFrame| f.flow.is_some());
    if let Some(expect) = has_flow {
        if let Some(i) = frames.iter().position(|f| f.flow.is_some() != expect) {
            return Err(parse_err(
                header_line + 1 + i,
                "flow must be present on every frame or on none",
            ));
        }
    }
    Ok(SkeletonSequence {
        frames,
        label,
        subject_id,
        camera_id,
        source_length,
    })
}

fn parse_header(
    line_no: usize,
    line: &str,
) -> Result<(String, u32, u32, Option<usize>), SkeletonError> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("#header") {
        return Err(parse_err(line_no, "expected `#header` record"));
    }
    let mut label = None;
    let mut subject = None;
    let mut camera = None;
    let mut source_length = None;
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("malformed header field `{tok}`")))?;
        let int = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| parse_err(line_no, format!("{key}: not an integer: `{v}`")))
        };
        match key {
            "label" if !value.is_empty() => label = Some(value.to_string()),
            "subject" => subject = Some(int(value)? as u32),
            "camera" => camera = Some(int(value)? as u32),
            "source_length" => source_length = Some(int(value)? as usize),
            "actors" => {
                let n = int(value)? as usize;
                if n != 1 {
                    return Err(SkeletonError::MultiActor(n));
                }
            }
            _ => return Err(parse_err(line_no, format!("unknown header field `{tok}`"))),
        }
    }
    match (label, subject, camera) {
        (Some(l), Some(s), Some(c)) => Ok((l, s, c, source_length)),
        _ => Err(parse_err(line_no, "header requires label, subject and camera")),
    }
}

fn parse_group(line_no: usize, name: &str, group: &[&str]) -> Result<Vec<f64>, SkeletonError> {
    group
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("{name}: malformed number `{t}`")))
        })
        .collect()
}

fn chunked(
    line_no: usize,
    modality: &'static str,
    values: &[f64],
    width: usize,
    expected: usize,
) -> Result<(), SkeletonError> {
    if values.len() % width != 0 {
        return Err(parse_err(
            line_no,
            format!("{modality}: {} values is not a multiple of {width}", values.len()),
        ));
    }
    let got = values.len() / width;
    if got != expected {
        return Err(SkeletonError::Format {
            line: line_no,
            modality,
            expected,
            got,
        });
    }
    Ok(())
}

fn parse_frame(line_no: usize, line: &str, index: usize) -> Result<JointFrame, SkeletonError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let groups: Vec<&[&str]> = tokens.split(|t| *t == SEPARATOR).collect();
    if groups.len() != 4 && groups.len() != 5 {
        return Err(parse_err(
            line_no,
            format!("expected 4 or 5 `|`-separated modality groups, got {}", groups.len()),
        ));
    }

    let body = parse_group(line_no, "body", groups[0])?;
    chunked(line_no, "body", &body, 4, BODY_JOINTS)?;
    let face = parse_group(line_no, "face", groups[1])?;
    chunked(line_no, "face", &face, 3, FACE_LANDMARKS)?;
    let left = parse_group(line_no, "hand_left", groups[2])?;
    chunked(line_no, "hand_left", &left, 3, HAND_JOINTS)?;
    let right = parse_group(line_no, "hand_right", groups[3])?;
    chunked(line_no, "hand_right", &right, 3, HAND_JOINTS)?;
    let flow = match groups.get(4) {
        Some(g) => {
            let v = parse_group(line_no, "flow", g)?;
            chunked(line_no, "flow", &v, 2, BODY_JOINTS)?;
            Some(v.chunks(2).map(|c| [c[0], c[1]]).collect())
        }
        None => None,
    };

    let to2 = |v: &[f64]| -> Vec<Joint2> {
        v.chunks(3).map(|c| Joint2::new(c[0], c[1], c[2])).collect()
    };
    let frame = JointFrame {
        timestamp_index: index,
        body: body
            .chunks(4)
            .map(|c| Joint3::new(c[0], c[1], c[2], c[3]))
            .collect(),
        face: to2(&face),
        hand_left: to2(&left),
        hand_right: to2(&right),
        flow,
    };
    frame.validate(line_no)?;
    Ok(frame)
}

/// Writes a sequence in the canonical text form accepted by [`parse_sequence`].
pub fn serialize_sequence(seq: &SkeletonSequence) -> String {
    let mut out = String::new();
    write!(
        out,
        "#header label={} subject={} camera={}",
        seq.label, seq.subject_id, seq.camera_id
    )
    .unwrap();
    if seq.source_length != seq.frames.len() {
        write!(out, " source_length={}", seq.source_length).unwrap();
    }
    out.push('\n');

    for frame in &seq.frames {
        let mut fields: Vec<String> = Vec::with_capacity(540);
        for j in &frame.body {
            fields.extend([j.x, j.y, j.z, j.confidence].iter().map(|v| v.to_string()));
        }
        for list in [&frame.face, &frame.hand_left, &frame.hand_right] {
            fields.push(SEPARATOR.to_string());
            for j in list {
                fields.extend([j.x, j.y, j.confidence].iter().map(|v| v.to_string()));
            }
        }
        if let Some(flow) = &frame.flow {
            fields.push(SEPARATOR.to_string());
            for v in flow {
                fields.push(v[0].to_string());
                fields.push(v[1].to_string());
            }
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sequence(rng: &mut impl Rng, frames: usize, with_flow: bool) -> SkeletonSequence {
        let mut out = Vec::new();
        for t in 0..frames {
            let mut f = JointFrame::empty(t);
            for j in f.body.iter_mut() {
                if rng.gen_bool(0.9) {
                    *j = Joint3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(1.0..5.0),
                        rng.gen_range(0.01..=1.0),
                    );
                }
            }
            for list in [&mut f.face, &mut f.hand_left, &mut f.hand_right] {
                for j in list.iter_mut() {
                    *j = Joint2::new(rng.gen_range(0.0..1920.0), rng.gen_range(0.0..1080.0), 1.0);
                }
            }
            if with_flow {
                f.flow = Some((0..25).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect());
            }
            out.push(f);
        }
        SkeletonSequence::new("wave", rng.gen_range(0..40), rng.gen_range(1..4), out)
    }

    #[test]
    fn reads_back_sixty_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_sequence(&mut rng, 60, false);
        let parsed = parse_sequence(&serialize_sequence(&s)).unwrap();
        assert_eq!(parsed.len(), 60);
        assert_eq!(parsed, s);
        assert!(parsed.frames.iter().all(|f| f.flow.is_none()));
    }

    #[test]
    fn round_trip_is_byte_identical_seed_42() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for i in 0..20 {
            let s = random_sequence(&mut rng, 1 + i * 3, i % 2 == 0);
            let text = serialize_sequence(&s);
            let back = parse_sequence(&text).unwrap();
            assert_eq!(serialize_sequence(&back), text);
        }
    }

    #[test]
    fn short_body_is_a_format_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sequence(&mut rng, 2, false);
        let text = serialize_sequence(&s);
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let toks: Vec<&str> = lines[1].split_whitespace().collect();
        lines[1] = toks[4..].join(" ");
        let err = parse_sequence(&lines.join("\n")).unwrap_err();
        assert!(err.to_string().ends_with("body: expected 25, got 24"), "{err}");
        assert!(matches!(err, SkeletonError::Format { line: 2, .. }));
    }

    #[test]
    fn malformed_number_reports_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_sequence(&mut rng, 3, false);
        let text = serialize_sequence(&s).replacen("| ", "| abc ", 3);
        match parse_sequence(&text).unwrap_err() {
            SkeletonError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn empty_stream() {
        assert_eq!(parse_sequence("").unwrap_err(), SkeletonError::EmptyInput);
        assert_eq!(parse_sequence("\n  \n").unwrap_err(), SkeletonError::EmptyInput);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_sequence("label=x subject=1 camera=1\n"),
            Err(SkeletonError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_sequence("#header label=x subject=1\n"),
            Err(SkeletonError::Parse { line: 1, .. })
        ));
        assert_eq!(
            parse_sequence("#header label=x subject=1 camera=1 actors=2\n").unwrap_err(),
            SkeletonError::MultiActor(2)
        );
        let ok = parse_sequence("#header label=x subject=1 camera=1 actors=1\n").unwrap();
        assert!(ok.is_empty());
    }

    #[test]
    fn mixed_flow_presence_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sequence(&mut rng, 2, true);
        let text = serialize_sequence(&a);
        let mut lines: Vec<&str> = text.lines().collect();
        let second = lines[2].rsplit_once(" | ").unwrap().0.to_string();
        lines[2] = &second;
        assert!(parse_sequence(&lines.join("\n")).is_err());
    }

    #[test]
    fn missing_joint_with_coordinates_rejected() {
        let mut s = SkeletonSequence::new("a", 0, 0, vec![JointFrame::empty(0)]);
        s.frames[0].body[3] = Joint3::new(1.0, 0.0, 0.0, 0.0);
        assert!(parse_sequence(&serialize_sequence(&s)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn serialize_parse_serialize_fixed_point(seed in any::<u64>(), frames in 1usize..6, flow in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sequence(&mut rng, frames, flow);
            let text = serialize_sequence(&s);
            let back = parse_sequence(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(serialize_sequence(&back), text);
        }
    }
}
