//! Synthetic (caption, video) datasets: colored sprites moving on a black
//! canvas, with captions generated from a closed template so that every
//! caption parses back to the sprite spec that produced it. Also ingests
//! user-provided frame directories.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image_io::load_image;
use crate::rng::{derive_seed, Rng};
use crate::tensor::Tensor;
use crate::text::tokenize;
use crate::vision::{resize_frame, Frame, FRAME_CHANNELS, FRAME_SIZE};

const CANVAS: usize = FRAME_SIZE;
const SPRITE: usize = 8;
const MARGIN: usize = 2;
/// Highest speed the caption template has a word for.
pub const MAX_SPEED: u32 = 2;
pub const MAX_FRAMES: usize = 32;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SpriteShape {
    Square,
    Circle,
    Triangle,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SpriteColor {
    Red,
    Green,
    Blue,
    White,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Motion {
    LeftToRight,
    RightToLeft,
    TopToBottom,
    Bouncing,
}

pub const ALL_SHAPES: [SpriteShape; 3] = [
    SpriteShape::Square,
    SpriteShape::Circle,
    SpriteShape::Triangle,
];
pub const ALL_COLORS: [SpriteColor; 4] = [
    SpriteColor::Red,
    SpriteColor::Green,
    SpriteColor::Blue,
    SpriteColor::White,
];
pub const ALL_MOTIONS: [Motion; 4] = [
    Motion::LeftToRight,
    Motion::RightToLeft,
    Motion::TopToBottom,
    Motion::Bouncing,
];

/// What to draw and how it moves. Speed is integer pixels per frame so
/// centroid displacement per frame is exact.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SpriteSpec {
    pub shape: SpriteShape,
    pub color: SpriteColor,
    pub motion: Motion,
    pub speed: u32,
}

impl SpriteSpec {
    /// Speed 0 canonicalizes the motion so that captions stay injective over
    /// constructible specs (a static sprite has no observable direction).
    pub fn new(shape: SpriteShape, color: SpriteColor, motion: Motion, speed: u32) -> Result<Self> {
        if speed > MAX_SPEED {
            return Err(Error::Config(format!(
                "sprite speed {speed} exceeds the caption template maximum {MAX_SPEED}"
            )));
        }
        let motion = if speed == 0 { Motion::LeftToRight } else { motion };
        Ok(SpriteSpec {
            shape,
            color,
            motion,
            speed,
        })
    }
}

// Sprite and background levels sit inside (-1, 1) rather than at the rim:
// a tanh decoder can only reach +/-1 at infinite pre-activation, so
// boundary-valued targets drive the head into exact f64 saturation where
// its gradient vanishes.
const INK: f64 = 0.9;

fn color_rgb(c: SpriteColor) -> [f64; 3] {
    match c {
        SpriteColor::Red => [INK, -INK, -INK],
        SpriteColor::Green => [-INK, INK, -INK],
        SpriteColor::Blue => [-INK, -INK, INK],
        SpriteColor::White => [INK, INK, INK],
    }
}

fn color_word(c: SpriteColor) -> &'static str {
    match c {
        SpriteColor::Red => "red",
        SpriteColor::Green => "green",
        SpriteColor::Blue => "blue",
        SpriteColor::White => "white",
    }
}

fn shape_word(s: SpriteShape) -> &'static str {
    match s {
        SpriteShape::Square => "square",
        SpriteShape::Circle => "circle",
        SpriteShape::Triangle => "triangle",
    }
}

fn motion_phrase(m: Motion) -> &'static str {
    match m {
        Motion::LeftToRight => "from left to right",
        Motion::RightToLeft => "from right to left",
        Motion::TopToBottom => "from top to bottom",
        Motion::Bouncing => "up and down",
    }
}

/// Caption for a spec, e.g. "a red square moving quickly from left to right"
/// or "a blue circle staying still".
pub fn caption_for(spec: &SpriteSpec) -> String {
    let color = color_word(spec.color);
    let shape = shape_word(spec.shape);
    match spec.speed {
        0 => format!("a {color} {shape} staying still"),
        1 => format!("a {color} {shape} moving slowly {}", motion_phrase(spec.motion)),
        _ => format!(
            "a {color} {shape} moving quickly {}",
            motion_phrase(spec.motion)
        ),
    }
}

/// Invert [`caption_for`]. Returns None for captions outside the template.
pub fn parse_caption(caption: &str) -> Option<SpriteSpec> {
    let words = tokenize(caption);
    if words.len() < 4 || words[0] != "a" {
        return None;
    }
    let color = ALL_COLORS.iter().find(|c| color_word(**c) == words[1])?;
    let shape = ALL_SHAPES.iter().find(|s| shape_word(**s) == words[2])?;
    if words[3] == "staying" {
        if words.get(4).map(String::as_str) != Some("still") || words.len() != 5 {
            return None;
        }
        return SpriteSpec::new(*shape, *color, Motion::LeftToRight, 0).ok();
    }
    if words[3] != "moving" || words.len() < 6 {
        return None;
    }
    let speed = match words[4].as_str() {
        "slowly" => 1,
        "quickly" => 2,
        _ => return None,
    };
    let tail = words[5..].join(" ");
    let motion = ALL_MOTIONS.iter().find(|m| motion_phrase(**m) == tail)?;
    SpriteSpec::new(*shape, *color, *motion, speed).ok()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SampleSource {
    Synthetic,
    Ingested,
}

/// One (caption, video) training pair.
#[derive(Clone, Debug)]
pub struct VideoSample {
    pub caption: String,
    pub frames: Vec<Frame>,
    pub source: SampleSource,
}

impl VideoSample {
    pub fn new(caption: String, frames: Vec<Frame>, source: SampleSource) -> Result<Self> {
        if caption.trim().is_empty() {
            return Err(Error::Input("sample caption is empty".into()));
        }
        if frames.is_empty() || frames.len() > MAX_FRAMES {
            return Err(Error::Input(format!(
                "sample must have 1..={MAX_FRAMES} frames, got {}",
                frames.len()
            )));
        }
        let shape = frames[0].pixels().shape().to_vec();
        if frames.iter().any(|f| f.pixels().shape() != shape) {
            return Err(Error::Input("sample frames have mixed shapes".into()));
        }
        Ok(VideoSample {
            caption,
            frames,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Sprite top-left position at frame t, plus a containment check.
fn position_at(spec: &SpriteSpec, origin: (usize, usize), t: usize) -> Option<(usize, usize)> {
    let (x0, y0) = (origin.0 as i64, origin.1 as i64);
    let step = (spec.speed as i64) * t as i64;
    let (x, y) = match spec.motion {
        Motion::LeftToRight => (x0 + step, y0),
        Motion::RightToLeft => (x0 - step, y0),
        Motion::TopToBottom => (x0, y0 + step),
        Motion::Bouncing => {
            let span = (CANVAS - 2 * MARGIN - SPRITE) as i64;
            if span == 0 {
                (x0, y0)
            } else {
                let phase = step % (2 * span);
                let offset = if phase <= span { phase } else { 2 * span - phase };
                (x0, MARGIN as i64 + offset)
            }
        }
    };
    let max = (CANVAS - SPRITE) as i64;
    if (0..=max).contains(&x) && (0..=max).contains(&y) {
        Some((x as usize, y as usize))
    } else {
        None
    }
}

fn start_origin(spec: &SpriteSpec, rng: &mut Rng) -> (usize, usize) {
    // jitter the coordinate orthogonal to the motion for variety
    let free = CANVAS - SPRITE - 2 * MARGIN + 1;
    let jitter = MARGIN + rng.below(free);
    match spec.motion {
        Motion::LeftToRight => (MARGIN, jitter),
        Motion::RightToLeft => (CANVAS - MARGIN - SPRITE, jitter),
        Motion::TopToBottom | Motion::Bouncing => (jitter, MARGIN),
    }
}

fn sprite_mask(shape: SpriteShape) -> Vec<(usize, usize)> {
    let mut mask = Vec::new();
    let center = (SPRITE as f64 - 1.0) / 2.0;
    for i in 0..SPRITE {
        for j in 0..SPRITE {
            let inside = match shape {
                SpriteShape::Square => true,
                SpriteShape::Circle => {
                    let (dy, dx) = (i as f64 - center, j as f64 - center);
                    dy * dy + dx * dx <= (SPRITE as f64 / 2.0).powi(2)
                }
                SpriteShape::Triangle => (j as f64 - center).abs() <= 0.5 + 0.5 * i as f64,
            };
            if inside {
                mask.push((i, j));
            }
        }
    }
    mask
}

fn render_frame(spec: &SpriteSpec, pos: (usize, usize), mask: &[(usize, usize)]) -> Frame {
    let mut data = vec![-INK; FRAME_CHANNELS * CANVAS * CANVAS];
    let rgb = color_rgb(spec.color);
    for &(dy, dx) in mask {
        let (y, x) = (pos.1 + dy, pos.0 + dx);
        for ch in 0..FRAME_CHANNELS {
            data[ch * CANVAS * CANVAS + y * CANVAS + x] = rgb[ch];
        }
    }
    Frame::new(Tensor::from_vec(vec![FRAME_CHANNELS, CANVAS, CANVAS], data).unwrap())
        .expect("rendered pixels are in range")
}

/// Render a deterministic sample: `m` frames of the sprite moving per spec.
pub fn generate_sample(spec: &SpriteSpec, m: usize, seed: u64) -> Result<VideoSample> {
    if m == 0 || m > MAX_FRAMES {
        return Err(Error::Input(format!(
            "sample length must be 1..={MAX_FRAMES}, got {m}"
        )));
    }
    let mut rng = Rng::seed_from(seed);
    let origin = start_origin(spec, &mut rng);
    let mask = sprite_mask(spec.shape);
    let mut frames = Vec::with_capacity(m);
    for t in 0..m {
        let pos = position_at(spec, origin, t).ok_or_else(|| {
            Error::Config(format!(
                "sprite exits the canvas at frame {t} (motion {:?}, speed {})",
                spec.motion, spec.speed
            ))
        })?;
        frames.push(render_frame(spec, pos, &mask));
    }
    VideoSample::new(caption_for(spec), frames, SampleSource::Synthetic)
}

/// Fastest template speed that keeps the sprite on canvas for `m` frames.
fn fitting_speed(shape: SpriteShape, color: SpriteColor, motion: Motion, m: usize) -> SpriteSpec {
    for speed in (1..=MAX_SPEED).rev() {
        let spec = SpriteSpec::new(shape, color, motion, speed).expect("speed within template");
        let origin = match motion {
            Motion::LeftToRight => (MARGIN, MARGIN),
            Motion::RightToLeft => (CANVAS - MARGIN - SPRITE, MARGIN),
            Motion::TopToBottom | Motion::Bouncing => (MARGIN, MARGIN),
        };
        if (0..m).all(|t| position_at(&spec, origin, t).is_some()) {
            return spec;
        }
    }
    SpriteSpec::new(shape, color, motion, 1).expect("speed 1 is within template")
}

/// Deterministic dataset stratified over shape x color x motion, with
/// lengths cycling 4, 8, 12, 16.
pub fn generate_dataset(n: usize, seed: u64) -> Result<Vec<VideoSample>> {
    if n == 0 {
        return Err(Error::Input("dataset size must be at least 1".into()));
    }
    let lengths = [4usize, 8, 12, 16];
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let combo = i % (ALL_SHAPES.len() * ALL_COLORS.len() * ALL_MOTIONS.len());
        // motion on the slowest axis so each motion meets every length in
        // the cycle (lengths advance fastest)
        let shape = ALL_SHAPES[combo % ALL_SHAPES.len()];
        let color = ALL_COLORS[(combo / ALL_SHAPES.len()) % ALL_COLORS.len()];
        let motion = ALL_MOTIONS[combo / (ALL_SHAPES.len() * ALL_COLORS.len())];
        let m = lengths[i % lengths.len()];
        let spec = fitting_speed(shape, color, motion, m);
        samples.push(generate_sample(&spec, m, derive_seed(seed, &[i as u64]))?);
    }
    Ok(samples)
}

/// Every word the caption template can emit.
pub fn template_vocabulary() -> Vec<&'static str> {
    let mut words = vec![
        "a", "moving", "slowly", "quickly", "staying", "still", "from", "left", "to", "right",
        "top", "bottom", "up", "and", "down",
    ];
    words.extend(ALL_COLORS.iter().map(|c| color_word(*c)));
    words.extend(ALL_SHAPES.iter().map(|s| shape_word(*s)));
    words.sort_unstable();
    words.dedup();
    words
}

// ---- on-disk dataset layout --------------------------------------------------

/// Write samples as `<root>/<name>/caption.txt` + numbered PNGs, plus a
/// `manifest.csv` of (sample_name, n_frames, split).
pub fn write_dataset(root: impl AsRef<Path>, samples: &[VideoSample]) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = String::from("sample_name,n_frames,split\n");
    for (i, sample) in samples.iter().enumerate() {
        let name = format!("sample_{i:04}");
        let dir = root.join(&name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let caption_path = dir.join("caption.txt");
        fs::write(&caption_path, format!("{}\n", sample.caption))
            .map_err(|e| Error::io(&caption_path, e))?;
        crate::image_io::save_frames_png(&dir, &sample.frames)?;
        manifest.push_str(&format!("{name},{},train\n", sample.len()));
    }
    let manifest_path = root.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))
}

fn ingest_sample_dir(dir: &Path) -> Result<VideoSample> {
    let caption_path = dir.join("caption.txt");
    if !caption_path.exists() {
        return Err(Error::Input(format!(
            "{}: missing caption.txt",
            dir.display()
        )));
    }
    let caption = fs::read_to_string(&caption_path)
        .map_err(|e| Error::io(&caption_path, e))?
        .trim()
        .to_string();

    let mut frame_paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "png")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("frame_"))
        })
        .collect();
    frame_paths.sort();
    if frame_paths.is_empty() {
        return Err(Error::Input(format!(
            "{}: no frame_*.png files",
            dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(frame_paths.len());
    for path in &frame_paths {
        let pixels = load_image(path)?;
        frames.push(resize_frame(&pixels)?);
    }
    VideoSample::new(caption, frames, SampleSource::Ingested)
}

/// Ingest a dataset root (subdirectories of samples) or a single sample
/// directory (caption.txt directly inside `path`).
pub fn ingest_directory(path: impl AsRef<Path>) -> Result<Vec<VideoSample>> {
    let path = path.as_ref();
    if !path.is_dir() {
        return Err(Error::Input(format!(
            "{}: not a directory",
            path.display()
        )));
    }
    if path.join("caption.txt").exists() {
        return Ok(vec![ingest_sample_dir(path)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Input(format!(
            "{}: no sample directories found",
            path.display()
        )));
    }
    dirs.iter().map(|d| ingest_sample_dir(d)).collect()
}

/// Mean absolute difference between consecutive frames, averaged over the
/// video; zero iff nothing moves.
pub fn mean_interframe_difference(frames: &[Frame]) -> f64 {
    if frames.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for pair in frames.windows(2) {
        let (a, b) = (pair[0].pixels().data(), pair[1].pixels().data());
        total += a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / a.len() as f64;
    }
    total / (frames.len() - 1) as f64
}
