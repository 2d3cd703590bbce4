//! 8-bit RGB PNG export and the lossless `DAS1` float dump.
//!
//! `DAS1` layout (little-endian): magic `DAS1`, u32 modality code, u32
//! width, u32 height, then 3·width·height f32 values in
//! `[channel][row][col]` order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ActionStamp, StampError, CHANNELS};
use crate::modality::Modality;

pub const RAW_MAGIC: &[u8; 4] = b"DAS1";

fn png_err(e: impl std::fmt::Display) -> StampError {
    StampError::Format(format!("png: {e}"))
}

/// Writes the quantized pixels as an 8-bit RGB image (channel c → R, G, B).
pub fn export_png(stamp: &ActionStamp, path: &Path) -> Result<(), StampError> {
    let (w, h) = (stamp.width, stamp.height);
    let mut rgb = Vec::with_capacity(CHANNELS * w * h);
    for k in 0..h {
        for t in 0..w {
            for c in 0..CHANNELS {
                rgb.push(stamp.pixel(c, t, k));
            }
        }
    }
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&rgb).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(())
}

/// Reads an RGB image back into `[channel][row][col]` bytes, returning
/// `(width, height, pixels)`. With `expect` set, other sizes are rejected.
pub fn import_png(path: &Path, expect: Option<(usize, usize)>) -> Result<(usize, usize, Vec<u8>), StampError> {
    let file = File::open(path)?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(StampError::Format(format!(
            "expected 8-bit RGB, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    if let Some((ew, eh)) = expect {
        if (w, h) != (ew, eh) {
            return Err(StampError::Format(format!("expected {ew}×{eh} image, got {w}×{h}")));
        }
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| StampError::Format("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let mut pixels = vec![0u8; CHANNELS * w * h];
    for k in 0..h {
        let row = &buf[k * frame.line_size..];
        for t in 0..w {
            for c in 0..CHANNELS {
                pixels[(c * h + k) * w + t] = row[t * CHANNELS + c];
            }
        }
    }
    Ok((w, h, pixels))
}

pub fn write_raw(stamp: &ActionStamp, out: &mut impl Write) -> Result<(), StampError> {
    out.write_all(RAW_MAGIC)?;
    for v in [stamp.modality.code(), stamp.width as u32, stamp.height as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in &stamp.values {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raw(input: &mut impl Read) -> Result<ActionStamp, StampError> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != RAW_MAGIC {
        return Err(StampError::Format("bad magic, expected DAS1".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let modality = Modality::from_code(word(4))
        .ok_or_else(|| StampError::Format(format!("unknown modality code {}", word(4))))?;
    let (w, h) = (word(8) as usize, word(12) as usize);
    let mut payload = vec![0u8; CHANNELS * w * h * 4];
    input.read_exact(&mut payload)?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(StampError::Format("trailing bytes after stamp payload".into()));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    ActionStamp::from_values(modality, w, h, values)
}

pub fn write_raw_file(stamp: &ActionStamp, path: &Path) -> Result<(), StampError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_raw(stamp, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_raw_file(path: &Path) -> Result<ActionStamp, StampError> {
    read_raw(&mut BufReader::new(File::open(path)?))
}
