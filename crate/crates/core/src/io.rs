//! Raster and file formats: images in, scribble masks as palette indices,
//! 16-bit probability maps, label maps and raw float dumps.

use std::io::Cursor;

use crate::features::{Image, ScribbleSet};
use crate::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
pub const RAW_MAGIC: &[u8; 8] = b"OTSGPROB";

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

/// Decodes any supported raster into an RGB image with values in `0..=255`.
/// Alpha is dropped and grey images are expanded to three channels.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.len() >= 24 && bytes[..8] == PNG_SIGNATURE && &bytes[12..16] == b"IHDR" {
        let w = u32::from_be_bytes(bytes[16..20].try_into().expect("4 bytes"));
        let h = u32::from_be_bytes(bytes[20..24].try_into().expect("4 bytes"));
        if w == 0 || h == 0 {
            return Err(Error::InvalidParameter(format!("empty {w}x{h} image")));
        }
    }
    let img = image::load_from_memory(bytes).map_err(format_err)?.to_rgb8();
    let (w, h) = img.dimensions();
    Image::new(w as usize, h as usize, 3, img.into_raw().into_iter().map(f64::from).collect())
}

pub fn read_image(path: &std::path::Path) -> Result<Image> {
    decode_image(&std::fs::read(path)?)
}

/// 8-bit RGB PNG of an image whose values are rounded and clamped to bytes.
pub fn encode_rgb(image: &Image) -> Result<Vec<u8>> {
    if image.channels != 3 {
        return Err(Error::InvalidParameter(format!("expected 3 channels, got {}", image.channels)));
    }
    let data: Vec<u8> = image.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    encode_png(image.width, image.height, png::ColorType::Rgb, png::BitDepth::Eight, None, &data)
}

fn encode_png(
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut w = enc.write_header().map_err(format_err)?;
        w.write_image_data(data).map_err(format_err)?;
        w.finish().map_err(format_err)?;
    }
    Ok(out)
}

/// Raw samples of a PNG without any transformation.
struct RawPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    line: usize,
    data: Vec<u8>,
}

fn decode_raw(bytes: &[u8]) -> Result<RawPng> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(format_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Format("image too large".into()))?;
    let mut data = vec![0; size];
    let info = reader.next_frame(&mut data).map_err(format_err)?;
    data.truncate(info.buffer_size());
    Ok(RawPng {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        line: info.line_size,
        data,
    })
}

/// Sample values of a single-channel (grey or indexed) PNG at 1–8 bits.
fn unpack_indices(raw: &RawPng) -> Result<Vec<u8>> {
    let bits = match raw.depth {
        png::BitDepth::One => 1,
        png::BitDepth::Two => 2,
        png::BitDepth::Four => 4,
        png::BitDepth::Eight => 8,
        png::BitDepth::Sixteen => {
            return Err(Error::Format("expected at most 8 bits per sample".into()));
        }
    };
    let mask = ((1u16 << bits) - 1) as u8;
    let mut out = Vec::with_capacity(raw.width * raw.height);
    for row in raw.data.chunks(raw.line).take(raw.height) {
        for x in 0..raw.width {
            let bit = x * bits;
            let byte = row[bit / 8];
            out.push((byte >> (8 - bits - bit % 8)) & mask);
        }
    }
    Ok(out)
}

/// Scribble mask from an indexed (or 8-bit grey) PNG: 0 = unlabeled,
/// `k` = label `k`. Palette colours are ignored.
pub fn decode_scribbles(bytes: &[u8]) -> Result<ScribbleSet> {
    let raw = decode_raw(bytes)?;
    if !matches!(raw.color, png::ColorType::Indexed | png::ColorType::Grayscale) {
        return Err(Error::Format(format!("scribbles must be an indexed or grey PNG, got {:?}", raw.color)));
    }
    ScribbleSet::from_indexed(raw.width, raw.height, &unpack_indices(&raw)?)
}

/// Distinct colours for labels, index 0 black.
fn label_palette(n: usize) -> Vec<u8> {
    const COLOURS: [[u8; 3]; 8] = [
        [0, 0, 0],
        [230, 25, 75],
        [60, 180, 75],
        [0, 130, 200],
        [255, 225, 25],
        [145, 30, 180],
        [70, 240, 240],
        [245, 130, 48],
    ];
    (0..n).flat_map(|i| if i < COLOURS.len() { COLOURS[i] } else { [i as u8; 3] }).collect()
}

pub fn encode_scribbles(scribbles: &ScribbleSet) -> Result<Vec<u8>> {
    let indices = scribbles.to_indexed();
    encode_png(
        scribbles.width,
        scribbles.height,
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(label_palette(256)),
        &indices,
    )
}

/// `round(u·65535)` for `u` clamped to `[0, 1]`.
pub fn quantize16(u: f64) -> u16 {
    (u.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Labels of the maps as stored in 16-bit PNGs: every consumer of a
/// probability PNG thresholds `q/65535`, so label files are computed the
/// same way.
pub fn quantized_labels(maps: &[Vec<f64>], t: f64) -> Vec<u8> {
    let q: Vec<Vec<f64>> =
        maps.iter().map(|m| m.iter().map(|&u| f64::from(quantize16(u)) / 65535.0).collect()).collect();
    crate::models::threshold_labels(&q, t)
}

/// 16-bit grey PNG storing [`quantize16`] of each value.
pub fn encode_prob16(width: usize, height: usize, map: &[f64]) -> Result<Vec<u8>> {
    if map.len() != width * height {
        return Err(Error::DimensionMismatch(format!("{} values for a {width}x{height} map", map.len())));
    }
    let data: Vec<u8> = map.iter().flat_map(|&u| quantize16(u).to_be_bytes()).collect();
    encode_png(width, height, png::ColorType::Grayscale, png::BitDepth::Sixteen, None, &data)
}

/// Inverse of [`encode_prob16`] up to quantization: `(width, height, u)`.
pub fn decode_prob16(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let raw = decode_raw(bytes)?;
    if raw.color != png::ColorType::Grayscale || raw.depth != png::BitDepth::Sixteen {
        return Err(Error::Format("expected a 16-bit grey PNG".into()));
    }
    let mut out = Vec::with_capacity(raw.width * raw.height);
    for row in raw.data.chunks(raw.line).take(raw.height) {
        out.extend(row[..2 * raw.width].chunks(2).map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) / 65535.0));
    }
    Ok((raw.width, raw.height, out))
}

/// 8-bit grey PNG whose values are the labels.
pub fn encode_labels(width: usize, height: usize, labels: &[u8]) -> Result<Vec<u8>> {
    if labels.len() != width * height {
        return Err(Error::DimensionMismatch(format!("{} labels for a {width}x{height} map", labels.len())));
    }
    encode_png(width, height, png::ColorType::Grayscale, png::BitDepth::Eight, None, labels)
}

/// Labels of an 8-bit grey or indexed PNG: `(width, height, labels)`.
pub fn decode_labels(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let raw = decode_raw(bytes)?;
    if !matches!(raw.color, png::ColorType::Indexed | png::ColorType::Grayscale) {
        return Err(Error::Format(format!("labels must be an indexed or grey PNG, got {:?}", raw.color)));
    }
    Ok((raw.width, raw.height, unpack_indices(&raw)?))
}

/// `OTSGPROB`, u32 width, u32 height, then `f64` values, all little-endian
/// and row-major.
pub fn encode_raw(width: usize, height: usize, map: &[f64]) -> Result<Vec<u8>> {
    if map.len() != width * height {
        return Err(Error::DimensionMismatch(format!("{} values for a {width}x{height} map", map.len())));
    }
    let w = u32::try_from(width).map_err(|_| Error::TooLarge("width exceeds u32".into()))?;
    let h = u32::try_from(height).map_err(|_| Error::TooLarge("height exceeds u32".into()))?;
    let mut out = Vec::with_capacity(16 + 8 * map.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for v in map {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw_map(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..8] != RAW_MAGIC {
        return Err(Error::Format("missing OTSGPROB header".into()));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() != 8 * w * h {
        return Err(Error::Format(format!("expected {} payload bytes for {w}x{h}, got {}", 8 * w * h, body.len())));
    }
    let values = body.chunks(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((w, h, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prob16_round_trip_quantizes() {
        let map = vec![0.0, 0.25, 0.5, 1.0, 1.2, -0.1];
        let png = encode_prob16(3, 2, &map).unwrap();
        let (w, h, back) = decode_prob16(&png).unwrap();
        assert_eq!((w, h), (3, 2));
        let expect = [0.0, 16384.0 / 65535.0, 32768.0 / 65535.0, 1.0, 1.0, 0.0];
        for (a, b) in back.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scribbles_round_trip() {
        let idx = vec![0, 1, 2, 0, 0, 1, 3, 0, 2];
        let s = ScribbleSet::from_indexed(3, 3, &idx).unwrap();
        let back = decode_scribbles(&encode_scribbles(&s).unwrap()).unwrap();
        assert_eq!(back.to_indexed(), idx);
    }

    #[test]
    fn packed_indices_are_unpacked() {
        let data = [0b0001_1011u8, 0b1100_0000];
        let png = encode_png(5, 1, png::ColorType::Indexed, png::BitDepth::Two, Some(label_palette(4)), &data).unwrap();
        assert_eq!(decode_labels(&png).unwrap().2, vec![0, 1, 2, 3, 3]);
    }

    #[test]
    fn raw_round_trip_and_header() {
        let map = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let bytes = encode_raw(2, 3, &map).unwrap();
        assert_eq!(&bytes[..8], b"OTSGPROB");
        assert_eq!(bytes.len(), 16 + 48);
        assert_eq!(decode_raw_map(&bytes).unwrap(), (2, 3, map));
        assert!(decode_raw_map(&bytes[..20]).is_err());
    }

    #[test]
    fn rgb_round_trip_and_rejects() {
        let img = Image::new(2, 1, 3, vec![1.0, 2.0, 3.0, 250.0, 128.0, 0.0]).unwrap();
        let back = decode_image(&encode_rgb(&img).unwrap()).unwrap();
        assert_eq!(back, img);
        assert!(matches!(decode_image(b"not an image"), Err(Error::Format(_))));
        let mut empty = encode_rgb(&img).unwrap();
        empty[16..20].copy_from_slice(&0u32.to_be_bytes());
        assert!(matches!(decode_image(&empty), Err(Error::InvalidParameter(_))));
    }
}
