use super::{ActionStamp, StampError, CHANNELS};

/// Source coordinate for output index `i` with corner-aligned sampling.
fn source_coord(i: usize, out: usize, src: usize) -> f64 {
    if out == 1 || src == 1 {
        0.0
    } else {
        (i * (src - 1)) as f64 / (out - 1) as f64
    }
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + (b - a) * f
}

/// Bilinear resize with corner alignment and no anti-aliasing.
pub fn resize_bilinear(stamp: &ActionStamp, out_w: usize, out_h: usize) -> Result<ActionStamp, StampError> {
    if out_w == 0 || out_h == 0 {
        return Err(StampError::Argument(format!("target size {out_w}×{out_h} must be positive")));
    }
    let (w, h) = (stamp.width, stamp.height);
    if (w, h) == (out_w, out_h) {
        return Ok(stamp.clone());
    }
    // (low index, high index, fraction) per output column / row
    let taps = |out: usize, src: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|i| {
                let s = source_coord(i, out, src);
                let lo = (s.floor() as usize).min(src - 1);
                let hi = (lo + 1).min(src - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let xs = taps(out_w, w);
    let ys = taps(out_h, h);
    let mut values = Vec::with_capacity(CHANNELS * out_w * out_h);
    for c in 0..CHANNELS {
        let plane = &stamp.values[c * w * h..(c + 1) * w * h];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = lerp(plane[y0 * w + x0], plane[y0 * w + x1], fx);
                let bottom = lerp(plane[y1 * w + x0], plane[y1 * w + x1], fx);
                values.push(lerp(top, bottom, fy).clamp(0.0, 255.0));
            }
        }
    }
    let mut out = ActionStamp::from_values(stamp.modality, out_w, out_h, values)?;
    out.diagnostics = stamp.diagnostics;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modality::Modality;

    fn constant(w: usize, h: usize, v: f64) -> ActionStamp {
        ActionStamp::from_values(Modality::Body, w, h, vec![v; 3 * w * h]).unwrap()
    }

    #[test]
    fn constant_is_preserved() {
        let s = constant(7, 5, 127.0);
        for (w, h) in [(1, 1), (3, 9), (32, 32), (224, 224)] {
            let r = resize_bilinear(&s, w, h).unwrap();
            assert!(r.values.iter().all(|v| *v == 127.0));
        }
    }

    #[test]
    fn identity_at_same_size() {
        let vals: Vec<f64> = (0..3 * 4 * 6).map(|i| (i * 3 % 256) as f64).collect();
        let s = ActionStamp::from_values(Modality::Face, 4, 6, vals).unwrap();
        assert_eq!(resize_bilinear(&s, 4, 6).unwrap(), s);
    }

    #[test]
    fn two_by_two_to_three_columns() {
        let plane = [0.0, 255.0, 0.0, 255.0];
        let vals: Vec<f64> = plane.iter().cycle().take(12).copied().collect();
        let s = ActionStamp::from_values(Modality::Body, 2, 2, vals).unwrap();
        let r = resize_bilinear(&s, 3, 2).unwrap();
        for c in 0..3 {
            for k in 0..2 {
                assert_eq!(r.value(c, 0, k), 0.0);
                assert_eq!(r.value(c, 1, k), 127.5);
                assert_eq!(r.value(c, 2, k), 255.0);
            }
        }
        assert_eq!(r.pixel(0, 1, 0), 128);
    }

    #[test]
    fn zero_target_rejected() {
        let s = constant(2, 2, 1.0);
        assert!(resize_bilinear(&s, 0, 3).is_err());
        assert!(resize_bilinear(&s, 3, 0).is_err());
    }

    #[test]
    fn matches_closed_form_on_a_ramp() {
        // f(x, y) = a x + b y + c is reproduced exactly (up to rounding) by bilinear sampling
        let (w, h) = (5, 4);
        let f = |x: f64, y: f64| 10.0 * x + 7.0 * y + 3.0;
        let mut vals = Vec::new();
        for _ in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    vals.push(f(x as f64, y as f64));
                }
            }
        }
        let s = ActionStamp::from_values(Modality::Body, w, h, vals).unwrap();
        let r = resize_bilinear(&s, 9, 7).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let sx = x as f64 * 4.0 / 8.0;
                let sy = y as f64 * 3.0 / 6.0;
                assert!((r.value(1, x, y) - f(sx, sy)).abs() < 1e-12);
            }
        }
    }
}
