//! Sprite rasterizer: deterministic, anti-aliased via 4x4 supersampling.

use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;

use super::{SpriteShape, SpriteSpec, CHANNELS};

/// Subsamples per pixel axis.
const SS: usize = 4;

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor() as i64 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn rotate(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x + s * y, -s * x + c * y)
}

/// Even-odd ray-casting point-in-polygon test.
fn in_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = verts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if ((yi > py) != (yj > py)) && (px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn shape_vertices(shape: SpriteShape, radius: f64, rot: f64) -> Vec<(f64, f64)> {
    use std::f64::consts::TAU;
    match shape {
        SpriteShape::Circle => Vec::new(),
        SpriteShape::Square => {
            let h = radius / std::f64::consts::SQRT_2;
            [(-h, -h), (h, -h), (h, h), (-h, h)]
                .iter()
                .map(|&(x, y)| rotate(x, y, rot))
                .collect()
        }
        SpriteShape::Triangle => (0..3)
            .map(|k| {
                let a = TAU * (0.25 + k as f64 / 3.0);
                rotate(radius * a.cos(), radius * a.sin(), rot)
            })
            .collect(),
        SpriteShape::Star => (0..10)
            .map(|k| {
                let r = if k % 2 == 0 { radius } else { radius * 0.42 };
                let a = TAU * (0.25 + k as f64 / 10.0);
                rotate(r * a.cos(), r * a.sin(), rot)
            })
            .collect(),
    }
}

fn inside_sprite(
    shape: SpriteShape,
    verts: &[(f64, f64)],
    radius: f64,
    dx: f64,
    dy: f64,
) -> bool {
    match shape {
        SpriteShape::Circle => dx * dx + dy * dy <= radius * radius,
        _ => in_polygon(dx, dy, verts),
    }
}

/// Rasterize frame t of a sprite program as quantized RGB bytes (C-major
/// planes, H×W each). Quantizing at render time makes the in-memory pixels
/// identical to a PNG round trip.
pub fn render_frame_bytes(spec: &SpriteSpec, t: usize, size_px: usize) -> Vec<u8> {
    let (cx, cy, radius, rot) = spec.pose_at(t);
    let verts = shape_vertices(spec.shape, radius, rot);
    let sprite_rgb = hsv_to_rgb(spec.hue, 0.85, 0.95);
    let bg_rgb = hsv_to_rgb(spec.background_hue, 0.45, 0.30);
    let mut out = vec![0u8; CHANNELS * size_px * size_px];
    let inv = 1.0 / size_px as f64;
    let sub = 1.0 / (SS as f64);
    let plane = size_px * size_px;
    for row in 0..size_px {
        for col in 0..size_px {
            let mut cover = 0usize;
            for sy in 0..SS {
                for sx in 0..SS {
                    // Pixel grid row 0 is the top of the frame; sprite y axis points up.
                    let px = (col as f64 + (sx as f64 + 0.5) * sub) * inv;
                    let py = 1.0 - (row as f64 + (sy as f64 + 0.5) * sub) * inv;
                    if inside_sprite(spec.shape, &verts, radius, px - cx, py - cy) {
                        cover += 1;
                    }
                }
            }
            let alpha = cover as f64 / (SS * SS) as f64;
            for c in 0..CHANNELS {
                let v = alpha * sprite_rgb[c] + (1.0 - alpha) * bg_rgb[c];
                out[c * plane + row * size_px + col] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

pub fn bytes_to_pixels(bytes: &[u8]) -> Vec<f32> {
    bytes
        .iter()
        .map(|&b| (b as f32 / 255.0) * 2.0 - 1.0)
        .collect()
}

pub fn pixels_to_bytes(pixels: &[f32]) -> Vec<u8> {
    pixels
        .iter()
        .map(|&v| (((v + 1.0) / 2.0) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Rasterize frame t as C×H×W floats in [-1, 1].
pub fn render_frame(spec: &SpriteSpec, t: usize, size_px: usize) -> Vec<f32> {
    bytes_to_pixels(&render_frame_bytes(spec, t, size_px))
}

/// Write one C×H×W byte plane stack as an 8-bit RGB PNG.
pub fn write_frame_png(path: &Path, bytes: &[u8], h: usize, w: usize) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    // Interleave planes to RGBRGB...
    let plane = h * w;
    let mut row_major = vec![0u8; plane * CHANNELS];
    for p in 0..plane {
        for c in 0..CHANNELS {
            row_major[p * CHANNELS + c] = bytes[c * plane + p];
        }
    }
    writer.write_image_data(&row_major)?;
    Ok(())
}

/// Read an 8-bit RGB PNG back into C×H×W bytes.
pub fn read_frame_png(path: &Path) -> Result<(Vec<u8>, usize, usize)> {
    let file = std::fs::File::open(path)?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(crate::error::Error::Png(format!(
            "expected 8-bit RGB frame, got {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let plane = h * w;
    let mut planes = vec![0u8; plane * CHANNELS];
    for p in 0..plane {
        for c in 0..CHANNELS {
            planes[c * plane + p] = buf[p * CHANNELS + c];
        }
    }
    Ok((planes, h, w))
}
