//! File formats: PNG frame directories and raw `VGT1` tensor files.
//!
//! A frame directory holds `frame_000000.png`, `frame_000001.png`, ... as
//! 8-bit RGB. Pixel value `p` maps to `p / 127.5 - 1`; writing clamps to
//! `[-1, 1]` and rounds half away from zero.
//!
//! A `VGT1` file is the 4-byte magic `VGT1`, then `t`, `h`, `w`, `c` as
//! little-endian `u32`, then `t*h*w*c` little-endian `f32` values in
//! T×H×W×C order. Flow fields use `c = 2`, dynamic fields and masks `c = 1`.
//!
//! Every file is written to a temporary name in the target directory and
//! then renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ExtendedColorType, ImageFormat};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::video::{Shape3, VideoTensor, VoxelMask};

pub const MAGIC: &[u8; 4] = b"VGT1";
const HEADER_LEN: usize = 20;

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.png")
}

fn frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.len() == 6 && digits.bytes().all(|b| b.is_ascii_digit()) {
        digits.parse().ok()
    } else {
        None
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn frame_indices(dir: &Path) -> Result<Vec<usize>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if let Some(i) = entry.file_name().to_str().and_then(frame_index) {
            found.push(i);
        }
    }
    found.sort_unstable();
    Ok(found)
}

pub fn pixel_to_value(p: u8) -> f32 {
    p as f32 / 127.5 - 1.0
}

pub fn value_to_pixel(v: f32) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

/// Read a frame directory into a `T×H×W×3` tensor.
pub fn read_video(dir: &Path) -> Result<VideoTensor> {
    let indices = frame_indices(dir)?;
    if indices.is_empty() {
        return Err(format_err(dir, "no frame_NNNNNN.png files"));
    }
    if let Some(missing) = (0..indices.len()).find(|&i| indices[i] != i) {
        return Err(format_err(dir, format!("missing {}", frame_name(missing))));
    }
    let frames = indices
        .par_iter()
        .map(|&i| {
            let path = dir.join(frame_name(i));
            let img = image::open(&path).map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?;
            match img {
                image::DynamicImage::ImageRgb8(rgb) => {
                    Ok((rgb.width(), rgb.height(), rgb.into_raw()))
                }
                other => Err(format_err(
                    &path,
                    format!("expected 8-bit RGB, found {:?}", other.color()),
                )),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, h, _) = frames[0];
    if let Some(i) = frames.iter().position(|f| (f.0, f.1) != (w, h)) {
        return Err(format_err(
            &dir.join(frame_name(i)),
            format!(
                "frame is {}x{}, frame 0 is {w}x{h}",
                frames[i].0, frames[i].1
            ),
        ));
    }
    let shape = Shape3::new(frames.len(), h as usize, w as usize)?;
    let data = frames
        .into_iter()
        .flat_map(|(_, _, px)| px.into_iter().map(pixel_to_value))
        .collect();
    VideoTensor::new(shape, 3, data)
}

fn temp_path(target: &Path) -> PathBuf {
    let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    target.with_file_name(format!(".{name}.tmp"))
}

fn write_atomic(target: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = temp_path(target);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, target).map_err(io_err(target))
}

/// Write a 3-channel tensor as PNG frames into `dir` (created if needed).
/// Frames left over from an earlier, longer video are removed.
pub fn write_video(v: &VideoTensor, dir: &Path) -> Result<()> {
    if v.channels() != 3 {
        return Err(Error::InvalidShape(format!(
            "frames need 3 channels, got {}",
            v.channels()
        )));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let s = v.shape();
    (0..s.t).into_par_iter().try_for_each(|t| {
        let pixels: Vec<u8> = v.frame(t).iter().map(|&x| value_to_pixel(x)).collect();
        let path = dir.join(frame_name(t));
        write_atomic(&path, |tmp| {
            image::save_buffer_with_format(
                tmp,
                &pixels,
                s.w as u32,
                s.h as u32,
                ExtendedColorType::Rgb8,
                ImageFormat::Png,
            )
            .map_err(|source| Error::Image {
                path: tmp.to_path_buf(),
                source,
            })
        })
    })?;
    for i in frame_indices(dir)?.into_iter().filter(|&i| i >= s.t) {
        let path = dir.join(frame_name(i));
        fs::remove_file(&path).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn encode_tensor(v: &VideoTensor) -> Vec<u8> {
    let s = v.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * v.len());
    out.extend_from_slice(MAGIC);
    for d in [s.t, s.h, s.w, v.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for x in v.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Parse `VGT1` bytes; `path` is only used in error messages.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<VideoTensor> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(format_err(path, "missing VGT1 header"));
    }
    let dim = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize
    };
    let (t, h, w, c) = (dim(0), dim(1), dim(2), dim(3));
    let count = t
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    if bytes.len() != HEADER_LEN + 4 * count {
        return Err(format_err(
            path,
            format!(
                "{t}x{h}x{w}x{c} needs {} bytes, file has {}",
                HEADER_LEN + 4 * count,
                bytes.len()
            ),
        ));
    }
    if c == 0 {
        return Err(format_err(path, "zero channels"));
    }
    let shape = Shape3::new(t, h, w).map_err(|e| format_err(path, e.to_string()))?;
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    VideoTensor::new(shape, c, data).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_tensor(path: &Path) -> Result<VideoTensor> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_tensor(&bytes, path)
}

pub fn write_tensor(v: &VideoTensor, path: &Path) -> Result<()> {
    let bytes = encode_tensor(v);
    write_atomic(path, |tmp| fs::write(tmp, &bytes).map_err(io_err(tmp)))
}

/// Read a one-channel `VGT1` mask; values above 0.5 are set.
pub fn read_mask(path: &Path) -> Result<VoxelMask> {
    VoxelMask::from_tensor(&read_tensor(path)?)
}

pub fn write_mask(mask: &VoxelMask, path: &Path) -> Result<()> {
    let data = mask
        .data()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    write_tensor(&VideoTensor::new(mask.shape(), 1, data)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_mapping_endpoints() {
        assert_eq!(pixel_to_value(0), -1.0);
        assert_eq!(pixel_to_value(255), 1.0);
        assert_eq!(value_to_pixel(-3.0), 0);
        assert_eq!(value_to_pixel(2.0), 255);
        for p in 0..=255u8 {
            assert_eq!(value_to_pixel(pixel_to_value(p)), p);
        }
    }

    #[test]
    fn frame_names_parse() {
        assert_eq!(frame_index("frame_000012.png"), Some(12));
        assert_eq!(frame_index("frame_12.png"), None);
        assert_eq!(frame_index(".frame_000001.png.tmp"), None);
    }

    #[test]
    fn tensor_header_rejects_truncation() {
        let v = VideoTensor::filled(Shape3::new(1, 2, 2).unwrap(), 1, 0.5).unwrap();
        let bytes = encode_tensor(&v);
        assert_eq!(bytes.len(), 20 + 16);
        let p = Path::new("x.vgt");
        assert_eq!(decode_tensor(&bytes, p).unwrap(), v);
        assert!(decode_tensor(&bytes[..30], p).is_err());
        assert!(decode_tensor(b"VGT2", p).is_err());
    }
}
