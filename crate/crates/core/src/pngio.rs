//! 16-bit RGB PNG files. Stills are one file; videos are a directory of
//! `frame_NNNN.png`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::colorimetry::{EncodeManifest, EncodedStimulus};

#[derive(Debug, Error)]
pub enum PngError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PngError + '_ {
    move |source| PngError::Io { path: path.to_path_buf(), source }
}

fn fmt_err(path: &Path, msg: impl ToString) -> PngError {
    PngError::Format { path: path.to_path_buf(), msg: msg.to_string() }
}

pub fn frame_path(dir: &Path, f: usize) -> PathBuf {
    dir.join(format!("frame_{f:04}.png"))
}

/// Writes one frame of `[y][x][rgb]` samples.
pub fn write_frame(path: &Path, width: usize, height: usize, bit_depth: u32, samples: &[u16]) -> Result<(), PngError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    let bytes: Vec<u8> = if bit_depth == 16 {
        enc.set_depth(png::BitDepth::Sixteen);
        samples.iter().flat_map(|v| v.to_be_bytes()).collect()
    } else {
        enc.set_depth(png::BitDepth::Eight);
        samples.iter().map(|&v| v as u8).collect()
    };
    enc.set_compression(png::Compression::Fast);
    let mut w = enc.write_header().map_err(|e| fmt_err(path, e))?;
    w.write_image_data(&bytes).map_err(|e| fmt_err(path, e))?;
    w.finish().map_err(|e| fmt_err(path, e))
}

/// Reads one RGB frame; returns (width, height, bit depth, samples).
pub fn read_frame(path: &Path) -> Result<(usize, usize, u32, Vec<u16>), PngError> {
    let file = File::open(path).map_err(io_err(path))?;
    let dec = png::Decoder::new(BufReader::new(file));
    let mut reader = dec.read_info().map_err(|e| fmt_err(path, e))?;
    let size = reader.output_buffer_size().ok_or_else(|| fmt_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| fmt_err(path, e))?;
    if info.color_type != png::ColorType::Rgb {
        return Err(fmt_err(path, format!("expected RGB, found {:?}", info.color_type)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let (depth, samples) = match info.bit_depth {
        png::BitDepth::Sixteen => (16, buf.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()),
        png::BitDepth::Eight => (8, buf.iter().map(|&b| b as u16).collect()),
        d => return Err(fmt_err(path, format!("unsupported bit depth {d:?}"))),
    };
    Ok((w, h, depth, samples))
}

/// Writes a still as `path` or a video as the directory `path`.
pub fn write_stimulus(path: &Path, s: &EncodedStimulus) -> Result<(), PngError> {
    if s.frames == 1 {
        return write_frame(path, s.width, s.height, s.bit_depth, s.frame(0));
    }
    fs::create_dir_all(path).map_err(io_err(path))?;
    for f in 0..s.frames {
        write_frame(&frame_path(path, f), s.width, s.height, s.bit_depth, s.frame(f))?;
    }
    Ok(())
}

/// Reads a still file or a frame directory.
pub fn read_stimulus(path: &Path, ppd: f64, fps: f64) -> Result<EncodedStimulus, PngError> {
    let mut frames = Vec::new();
    if path.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(fmt_err(path, "no frames"));
        }
        for n in names {
            frames.push(read_frame(&n)?);
        }
    } else {
        frames.push(read_frame(path)?);
    }
    let (w, h, depth, _) = frames[0];
    let mut data = Vec::with_capacity(w * h * 3 * frames.len());
    for (fw, fh, fd, d) in &frames {
        if (*fw, *fh, *fd) != (w, h, depth) {
            return Err(fmt_err(path, "frames differ in size or depth"));
        }
        data.extend_from_slice(d);
    }
    Ok(EncodedStimulus {
        width: w,
        height: h,
        frames: frames.len(),
        bit_depth: depth,
        data,
        manifest: EncodeManifest { ppd, fps, peak_luminance: 100.0, clamp_count: 0, seed: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(frames: usize) -> EncodedStimulus {
        let (w, h) = (5, 3);
        EncodedStimulus {
            width: w,
            height: h,
            frames,
            bit_depth: 16,
            data: (0..w * h * 3 * frames).map(|i| (i * 977 % 65536) as u16).collect(),
            manifest: EncodeManifest { ppd: 60.0, fps: 0.0, peak_luminance: 100.0, clamp_count: 0, seed: None },
        }
    }

    #[test]
    fn still_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let s = sample(1);
        write_stimulus(&p, &s).unwrap();
        let r = read_stimulus(&p, 60.0, 0.0).unwrap();
        assert_eq!(r.data, s.data);
        assert_eq!((r.width, r.height, r.frames), (5, 3, 1));
    }

    #[test]
    fn video_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v");
        let s = sample(4);
        write_stimulus(&p, &s).unwrap();
        assert!(frame_path(&p, 3).exists());
        let r = read_stimulus(&p, 60.0, 120.0).unwrap();
        assert_eq!(r.data, s.data);
        assert_eq!(r.frames, 4);
    }

    #[test]
    fn missing_file_is_error() {
        assert!(read_stimulus(Path::new("/nonexistent/x.png"), 60.0, 0.0).is_err());
    }
}
