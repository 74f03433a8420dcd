//! 8-bit single-channel PNG reading and writing for masks, label masks and
//! distance maps.

use std::fs;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};
use serde::{Deserialize, Serialize};

use scribsim_core::distmap::{DistanceKind, DistanceMap};
use scribsim_core::{BinaryMask, LabelMask};

use crate::error::{Error, Result};

/// A decoded single-channel 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Decodes grayscale or palette PNGs at bit depth 8. Palette images yield
/// their raw indices, which is how indexed label masks store class ids.
pub fn decode_gray8(bytes: &[u8]) -> std::result::Result<Gray8, String> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.bit_depth != BitDepth::Eight {
        return Err(format!("expected bit depth 8, found {:?}", info.bit_depth));
    }
    if !matches!(info.color_type, ColorType::Grayscale | ColorType::Indexed) {
        return Err(format!("expected a single-channel image, found {:?}", info.color_type));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if info.line_size != width {
        return Err("unexpected row stride".into());
    }
    buf.truncate(width * height);
    Ok(Gray8 { width, height, pixels: buf })
}

pub fn encode_gray8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(ColorType::Grayscale);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().expect("writing to a Vec cannot fail");
        writer.write_image_data(pixels).expect("writing to a Vec cannot fail");
    }
    out
}

pub fn read_gray8(path: &Path) -> Result<Gray8> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray8(&bytes).map_err(|reason| Error::malformed(path, reason))
}

pub fn write_gray8(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    fs::write(path, encode_gray8(width, height, pixels)).map_err(|e| Error::io(path, e))
}

/// Nonzero pixels are foreground.
pub fn read_binary_mask(path: &Path) -> Result<BinaryMask> {
    let img = read_gray8(path)?;
    let bits = img.pixels.iter().map(|&v| v != 0).collect();
    BinaryMask::from_bits(img.width, img.height, bits).map_err(|e| Error::malformed(path, e))
}

/// Writes foreground as 255 and background as 0.
pub fn write_binary_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let pixels: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_gray8(path, mask.width(), mask.height(), &pixels)
}

pub fn read_label_mask(path: &Path) -> Result<LabelMask> {
    let img = read_gray8(path)?;
    LabelMask::from_values(img.width, img.height, img.pixels).map_err(|e| Error::malformed(path, e))
}

pub fn write_label_mask(path: &Path, labels: &LabelMask) -> Result<()> {
    write_gray8(path, labels.width(), labels.height(), labels.values())
}

/// Raw `t` values as an 8-bit PNG.
pub fn encode_distance_map(map: &DistanceMap) -> Vec<u8> {
    encode_gray8(map.width(), map.height(), map.raw())
}

pub fn decode_distance_map(bytes: &[u8], kind: DistanceKind) -> std::result::Result<DistanceMap, String> {
    let img = decode_gray8(bytes)?;
    DistanceMap::from_raw(img.width, img.height, img.pixels, kind).map_err(|e| e.to_string())
}

/// JSON written next to every distance-map PNG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSidecar {
    pub kind: DistanceKind,
    pub lambda: f64,
    pub width: usize,
    pub height: usize,
}

/// Path of the sidecar belonging to `<id>.dist.png`.
pub fn sidecar_path(png_path: &Path) -> std::path::PathBuf {
    let name = png_path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name.strip_suffix(".png").unwrap_or(name);
    png_path.with_file_name(format!("{stem}.json"))
}

/// Writes `<id>.dist.png` and `<id>.dist.json` into `dir`.
pub fn write_distance_map(dir: &Path, image_id: &str, map: &DistanceMap, lambda: f64) -> Result<()> {
    let png_path = dir.join(format!("{image_id}.dist.png"));
    fs::write(&png_path, encode_distance_map(map)).map_err(|e| Error::io(&png_path, e))?;
    let sidecar = DistanceSidecar { kind: map.kind(), lambda, width: map.width(), height: map.height() };
    let json_path = sidecar_path(&png_path);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
}

/// Reads a distance-map PNG, taking its kind from the sidecar.
pub fn read_distance_map(png_path: &Path) -> Result<(DistanceMap, DistanceSidecar)> {
    let json_path = sidecar_path(png_path);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: DistanceSidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: json_path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let bytes = fs::read(png_path).map_err(|e| Error::io(png_path, e))?;
    let map = decode_distance_map(&bytes, sidecar.kind).map_err(|r| Error::malformed(png_path, r))?;
    if (map.width(), map.height()) != (sidecar.width, sidecar.height) {
        return Err(Error::malformed(png_path, "dimensions disagree with sidecar"));
    }
    Ok((map, sidecar))
}
