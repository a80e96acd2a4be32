//! Frame import/export: PNG files, numbered PNG sequences, animated GIF.
//! Exported frames are upscaled to 72x72; imported images are mapped to
//! [-1, 1] and resized to the 32x32 training resolution by the caller.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use image::codecs::gif::{GifEncoder, Repeat};
use image::{Delay, ImageBuffer, Rgb, Rgba};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::vision::{upscale_for_export, Frame, EXPORT_SIZE, FRAME_CHANNELS};

/// Load a PNG (or any RGB-decodable image) as a [-1, 1] pixel tensor
/// [3, H, W].
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Input(format!(
            "{}: zero-extent image",
            path.display()
        )));
    }
    let (w, h) = (w as usize, h as usize);
    let mut data = vec![0.0; FRAME_CHANNELS * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for ch in 0..FRAME_CHANNELS {
            data[ch * h * w + y as usize * w + x as usize] = px.0[ch] as f64 / 127.5 - 1.0;
        }
    }
    Tensor::from_vec(vec![FRAME_CHANNELS, h, w], data)
}

fn export_rgb(frame: &Frame) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let rgb = upscale_for_export(frame);
    ImageBuffer::from_raw(EXPORT_SIZE as u32, EXPORT_SIZE as u32, rgb)
        .expect("export buffer has exactly 72*72*3 bytes")
}

/// Write one frame as a 72x72 PNG.
pub fn save_frame_png(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    export_rgb(frame).save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Write frames as `frame_0001.png`, `frame_0002.png`, ... under `dir`.
pub fn save_frames_png(dir: impl AsRef<Path>, frames: &[Frame]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{:04}.png", i + 1));
        save_frame_png(&path, frame)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Write frames as a looping animated GIF with the given per-frame delay.
pub fn save_gif(path: impl AsRef<Path>, frames: &[Frame], delay_ms: u32) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = GifEncoder::new(BufWriter::new(file));
    encoder
        .set_repeat(Repeat::Infinite)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?;
    for frame in frames {
        let rgb = export_rgb(frame);
        let rgba = ImageBuffer::<Rgba<u8>, Vec<u8>>::from_fn(
            EXPORT_SIZE as u32,
            EXPORT_SIZE as u32,
            |x, y| {
                let p = rgb.get_pixel(x, y);
                Rgba([p.0[0], p.0[1], p.0[2], 255])
            },
        );
        let gif_frame = image::Frame::from_parts(
            rgba,
            0,
            0,
            Delay::from_saturating_duration(Duration::from_millis(delay_ms as u64)),
        );
        encoder.encode_frame(gif_frame).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    Ok(())
}
