//! Frame noising, U-Net encoding/reconstruction, and the linear+tanh frame
//! decoder.
//!
//! Training follows a noised-reconstruction scheme: each frame is blended
//! with Gaussian noise, the U-Net down path encodes the noised frame into
//! the transformer's hidden space, and the up path (with skip connections)
//! must reconstruct the clean frame. The frame decoder is a single linear
//! map with a tanh head and deliberately no layer normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv2dLayer, Linear, ResBlock};
use crate::rng::Rng;
use crate::tensor::{Graph, NodeId, ParamStore, Tensor};

pub const FRAME_CHANNELS: usize = 3;
pub const FRAME_SIZE: usize = 32;
pub const EXPORT_SIZE: usize = 72;

/// One clean video frame: [3, H, W] with values in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pixels: Tensor,
}

impl Frame {
    pub fn new(pixels: Tensor) -> Result<Self> {
        let shape = pixels.shape();
        if shape.len() != 3 || shape[0] != FRAME_CHANNELS {
            return Err(Error::BadShape {
                op: "Frame::new",
                shape: shape.to_vec(),
                reason: format!("expected [{FRAME_CHANNELS}, H, W]"),
            });
        }
        if let Some(&bad) = pixels.data().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!(
                "frame pixel {bad} outside [-1, 1]"
            )));
        }
        Ok(Frame { pixels })
    }

    pub fn pixels(&self) -> &Tensor {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[2]
    }
}

/// A frame blended with Gaussian noise. Values may leave [-1, 1]; the blend
/// is never clamped so gradients stay unbiased.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisedFrame {
    pub pixels: Tensor,
    pub beta: f64,
    pub noise_seed: u64,
}

/// ȳ = (1 - β)·y + β·ε with ε i.i.d. standard normal from `seed`.
///
/// The exact expression is `(1.0 - beta) * y + beta * eps` per element, in
/// that order; tests replay it bitwise.
pub fn apply_noise(y: &Frame, beta: f64, seed: u64) -> Result<NoisedFrame> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!(
            "noise level beta must lie in [0, 1], got {beta}"
        )));
    }
    let mut rng = Rng::seed_from(seed);
    let data: Vec<f64> = y
        .pixels()
        .data()
        .iter()
        .map(|&v| (1.0 - beta) * v + beta * rng.normal())
        .collect();
    Ok(NoisedFrame {
        pixels: Tensor::from_vec(y.pixels().shape().to_vec(), data)?,
        beta,
        noise_seed: seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleShape {
    Linear,
}

/// Per-frame-position noise levels: β nondecreasing along the video.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSchedule {
    #[serde(default)]
    pub beta_min: f64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_shape")]
    pub shape: ScheduleShape,
}

fn default_beta_max() -> f64 {
    0.3
}

fn default_horizon() -> usize {
    32
}

fn default_shape() -> ScheduleShape {
    ScheduleShape::Linear
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule {
            beta_min: 0.0,
            beta_max: default_beta_max(),
            horizon: default_horizon(),
            shape: ScheduleShape::Linear,
        }
    }
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.beta_min && self.beta_min <= self.beta_max && self.beta_max < 1.0) {
            return Err(Error::Config(format!(
                "noise schedule requires 0 <= beta_min <= beta_max < 1, got [{}, {}]",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    /// β for frame `i` of an `m`-frame video: linear from beta_min to
    /// beta_max over the video.
    pub fn beta(&self, i: usize, m: usize) -> Result<f64> {
        if i >= m {
            return Err(Error::Contract(format!(
                "frame index {i} out of range for video length {m}"
            )));
        }
        let span = (m - 1).max(1) as f64;
        Ok(self.beta_min + (self.beta_max - self.beta_min) * i as f64 / span)
    }
}

/// U-Net width/depth settings. Defaults: base 16, multipliers (1,2,4,8),
/// two residual blocks per level.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UNetConfig {
    #[serde(default = "default_base")]
    pub base: usize,
    #[serde(default = "default_mults")]
    pub mults: Vec<usize>,
    #[serde(default = "default_resblocks")]
    pub resblocks: usize,
}

fn default_base() -> usize {
    16
}

fn default_mults() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

fn default_resblocks() -> usize {
    2
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            base: default_base(),
            mults: default_mults(),
            resblocks: default_resblocks(),
        }
    }
}

impl UNetConfig {
    pub fn widths(&self) -> Vec<usize> {
        self.mults.iter().map(|m| self.base * m).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.base == 0 || self.mults.is_empty() || self.resblocks == 0 {
            return Err(Error::Config(
                "unet requires base > 0, at least one multiplier, resblocks > 0".into(),
            ));
        }
        Ok(())
    }

    /// Channel count at the bottleneck.
    pub fn bottleneck_channels(&self) -> usize {
        self.base * self.mults.last().copied().unwrap_or(1)
    }

    /// Spatial downscale factor from input to bottleneck.
    pub fn downscale(&self) -> usize {
        1 << (self.mults.len() - 1)
    }
}

struct Level {
    blocks: Vec<ResBlock>,
}

impl Level {
    fn forward(&self, g: &mut Graph, store: &ParamStore, mut h: NodeId) -> Result<NodeId> {
        for block in &self.blocks {
            h = block.forward(g, store, h)?;
        }
        Ok(h)
    }
}

/// U-Net with a contracting `down` path (the frame encoder), an expanding
/// `up` path with skip connections, a conv+tanh head, and a linear
/// projection from the flattened bottleneck into the transformer width.
pub struct UNet {
    cfg: UNetConfig,
    stem: Conv2dLayer,
    down: Vec<Level>,
    up: Vec<Level>,
    head: Conv2dLayer,
    latent_proj: Linear,
    d_model: usize,
}

impl UNet {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        cfg: UNetConfig,
        d_model: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let widths = cfg.widths();
        let stem = Conv2dLayer::new(
            store,
            rng,
            "unet.stem",
            FRAME_CHANNELS,
            widths[0],
            3,
            1,
            1.0,
        );

        let mut down = Vec::new();
        let mut c_in = widths[0];
        for (lvl, &w) in widths.iter().enumerate() {
            let mut blocks = Vec::new();
            for b in 0..cfg.resblocks {
                let block_in = if b == 0 { c_in } else { w };
                blocks.push(ResBlock::new(
                    store,
                    rng,
                    &format!("unet.down.l{lvl}.rb{b}"),
                    block_in,
                    w,
                ));
            }
            down.push(Level { blocks });
            c_in = w;
        }

        // mirrored path: upsample, concat the matching down skip, refine
        let mut up = Vec::new();
        let mut c_prev = *widths.last().unwrap();
        for lvl in (0..widths.len() - 1).rev() {
            let w = widths[lvl];
            let concat_in = c_prev + w;
            let mut blocks = Vec::new();
            for b in 0..cfg.resblocks {
                let block_in = if b == 0 { concat_in } else { w };
                blocks.push(ResBlock::new(
                    store,
                    rng,
                    &format!("unet.up.l{lvl}.rb{b}"),
                    block_in,
                    w,
                ));
            }
            up.push(Level { blocks });
            c_prev = w;
        }

        // small head scale keeps the tanh output in its linear region at init
        let head = Conv2dLayer::new(store, rng, "unet.head", widths[0], FRAME_CHANNELS, 3, 1, 0.5);

        let bottleneck_spatial = FRAME_SIZE / cfg.downscale();
        let latent_in = cfg.bottleneck_channels() * bottleneck_spatial * bottleneck_spatial;
        let latent_proj = Linear::new(store, rng, "unet.latent_proj", latent_in, d_model, 1.0);

        Ok(UNet {
            cfg,
            stem,
            down,
            up,
            head,
            latent_proj,
            d_model,
        })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.cfg
    }

    fn check_input(&self, g: &Graph, x: NodeId, require_train_size: bool) -> Result<()> {
        let shape = g.shape(x);
        let ok = shape.len() == 4
            && shape[1] == FRAME_CHANNELS
            && shape[2] == shape[3]
            && shape[2].is_multiple_of(self.cfg.downscale())
            && if require_train_size {
                shape[2] == FRAME_SIZE
            } else {
                shape[2] >= FRAME_SIZE
            };
        if !ok {
            return Err(Error::BadShape {
                op: "unet",
                shape: shape.to_vec(),
                reason: format!(
                    "expected [m, {FRAME_CHANNELS}, s, s] with s {} {}",
                    if require_train_size { "=" } else { ">=" },
                    FRAME_SIZE
                ),
            });
        }
        Ok(())
    }

    /// Down path only: activations after each level plus the bottleneck.
    fn down_pass(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<(Vec<NodeId>, NodeId)> {
        let mut h = self.stem.forward(g, store, x)?;
        let mut skips = Vec::new();
        let last = self.down.len() - 1;
        for (lvl, level) in self.down.iter().enumerate() {
            h = level.forward(g, store, h)?;
            if lvl < last {
                skips.push(h);
                h = g.avgpool2x(h)?;
            }
        }
        Ok((skips, h))
    }

    fn project_latents(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        bottleneck: NodeId,
        m: usize,
    ) -> Result<NodeId> {
        let c = self.cfg.bottleneck_channels();
        let s = FRAME_SIZE / self.cfg.downscale();
        let normed = crate::nn::instance_norm(g, bottleneck)?;
        let flat = g.reshape(normed, &[m, c * s * s])?;
        self.latent_proj.forward(g, store, flat)
    }

    fn up_pass(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        skips: &[NodeId],
        bottleneck: NodeId,
    ) -> Result<NodeId> {
        let mut h = bottleneck;
        for (level, &skip) in self.up.iter().zip(skips.iter().rev()) {
            h = g.upsample_nearest2x(h)?;
            h = g.concat_channels(h, skip)?;
            h = level.forward(g, store, h)?;
        }
        let h = crate::nn::instance_norm(g, h)?;
        let out = self.head.forward(g, store, h)?;
        g.tanh(out)
    }

    /// Encode a batch of (noised) frames [m, 3, 32, 32] into latents [m, d].
    pub fn encode_frames(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        self.check_input(g, x, true)?;
        let m = g.shape(x)[0];
        let (_, bottleneck) = self.down_pass(g, store, x)?;
        self.project_latents(g, store, bottleneck, m)
    }

    /// Full U-Net pass: up(down(x)) with skip connections and tanh head.
    /// Accepts any square input whose side is a multiple of the downscale.
    pub fn reconstruct_frames(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        self.check_input(g, x, false)?;
        let (skips, bottleneck) = self.down_pass(g, store, x)?;
        self.up_pass(g, store, &skips, bottleneck)
    }

    /// Latents and reconstruction from one shared down pass; same values as
    /// calling [`UNet::encode_frames`] and [`UNet::reconstruct_frames`]
    /// separately, at roughly two thirds of the work.
    pub fn encode_and_reconstruct(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        self.check_input(g, x, true)?;
        let m = g.shape(x)[0];
        let (skips, bottleneck) = self.down_pass(g, store, x)?;
        let latents = self.project_latents(g, store, bottleneck, m)?;
        let recon = self.up_pass(g, store, &skips, bottleneck)?;
        Ok((latents, recon))
    }

    /// Bottleneck shape [channels, side] for a 32x32 input.
    pub fn bottleneck_geometry(&self) -> (usize, usize) {
        (
            self.cfg.bottleneck_channels(),
            FRAME_SIZE / self.cfg.downscale(),
        )
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }
}

/// Encode one noised frame into a latent vector node of shape [1, d].
pub fn encode_frame(
    unet: &UNet,
    g: &mut Graph,
    store: &ParamStore,
    frame: &NoisedFrame,
) -> Result<NodeId> {
    let x = noised_to_batch(g, std::slice::from_ref(frame))?;
    unet.encode_frames(g, store, x)
}

/// Reconstruct one noised frame: up(down(ȳ)), shape [1, 3, H, W].
pub fn reconstruct(
    unet: &UNet,
    g: &mut Graph,
    store: &ParamStore,
    frame: &NoisedFrame,
) -> Result<NodeId> {
    let x = noised_to_batch(g, std::slice::from_ref(frame))?;
    unet.reconstruct_frames(g, store, x)
}

/// The frame decoder d: one linear layer plus tanh, reshaped to [m, 3, s, s].
/// No layer normalization anywhere in this path.
pub struct FrameDecoder {
    linear: Linear,
}

impl FrameDecoder {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, d_model: usize) -> Self {
        let out = FRAME_CHANNELS * FRAME_SIZE * FRAME_SIZE;
        FrameDecoder {
            linear: Linear::new(store, rng, "decoder", d_model, out, 1.0),
        }
    }

    /// Decode latents [m, d] into frames [m, 3, 32, 32] in (-1, 1).
    pub fn decode(&self, g: &mut Graph, store: &ParamStore, latents: NodeId) -> Result<NodeId> {
        let m = g.shape(latents)[0];
        let flat = self.linear.forward(g, store, latents)?;
        let act = g.tanh(flat)?;
        g.reshape(act, &[m, FRAME_CHANNELS, FRAME_SIZE, FRAME_SIZE])
    }
}

/// Stack clean frames into a [m, 3, H, W] constant node.
pub fn frames_to_batch(g: &mut Graph, frames: &[Frame]) -> Result<NodeId> {
    batch_tensor(g, frames.iter().map(|f| f.pixels()))
}

/// Stack noised frames into a [m, 3, H, W] constant node.
pub fn noised_to_batch(g: &mut Graph, frames: &[NoisedFrame]) -> Result<NodeId> {
    batch_tensor(g, frames.iter().map(|f| &f.pixels))
}

fn batch_tensor<'a>(
    g: &mut Graph,
    frames: impl Iterator<Item = &'a Tensor> + Clone,
) -> Result<NodeId> {
    let mut iter = frames.clone();
    let first = iter
        .next()
        .ok_or_else(|| Error::Contract("cannot batch zero frames".into()))?;
    let shape = first.shape().to_vec();
    let mut data = Vec::new();
    let mut count = 0;
    for t in frames {
        if t.shape() != shape {
            return Err(Error::ShapeMismatch {
                op: "batch_frames",
                lhs: shape,
                rhs: t.shape().to_vec(),
            });
        }
        data.extend_from_slice(t.data());
        count += 1;
    }
    let batched = Tensor::from_vec(vec![count, shape[0], shape[1], shape[2]], data)?;
    g.constant(&batched)
}

/// Extract frame `i` of a [m, 3, H, W] node value into a `Frame`.
pub fn frame_from_batch(g: &Graph, node: NodeId, index: usize) -> Result<Frame> {
    let shape = g.shape(node);
    if shape.len() != 4 || index >= shape[0] {
        return Err(Error::Contract(format!(
            "frame index {index} out of range for node shape {shape:?}"
        )));
    }
    let plane = shape[1] * shape[2] * shape[3];
    let data = g.value(node)[index * plane..(index + 1) * plane].to_vec();
    Frame::new(Tensor::from_vec(vec![shape[1], shape[2], shape[3]], data)?)
}

// ---- resizing and 8-bit conversion ------------------------------------------

/// Bilinear resample one channel-major [c, h, w] grid to [c, oh, ow].
/// Half-pixel sample centers (corner alignment disabled), edge clamped.
pub fn resize_bilinear(src: &[f64], c: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    assert!(h > 0 && w > 0 && oh > 0 && ow > 0);
    let mut out = vec![0.0; c * oh * ow];
    let sy = h as f64 / oh as f64;
    let sx = w as f64 / ow as f64;
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for oy in 0..oh {
            let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            let wy = fy - y0 as f64;
            for ox in 0..ow {
                let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(w - 1);
                let wx = fx - x0 as f64;
                let top = plane[y0 * w + x0] * (1.0 - wx) + plane[y0 * w + x1] * wx;
                let bot = plane[y1 * w + x0] * (1.0 - wx) + plane[y1 * w + x1] * wx;
                dst[oy * ow + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    out
}

/// Resize an arbitrary [-1, 1] image to a 32x32 training frame.
pub fn resize_frame(pixels: &Tensor) -> Result<Frame> {
    let shape = pixels.shape();
    if shape.len() != 3 || shape[0] != FRAME_CHANNELS {
        return Err(Error::BadShape {
            op: "resize_frame",
            shape: shape.to_vec(),
            reason: "expected [3, H, W]".into(),
        });
    }
    if shape[1] == 0 || shape[2] == 0 {
        return Err(Error::Input("cannot resize a zero-extent image".into()));
    }
    let data = resize_bilinear(
        pixels.data(),
        FRAME_CHANNELS,
        shape[1],
        shape[2],
        FRAME_SIZE,
        FRAME_SIZE,
    );
    // bilinear interpolation of in-range values stays in range
    Frame::new(Tensor::from_vec(
        vec![FRAME_CHANNELS, FRAME_SIZE, FRAME_SIZE],
        data,
    )?)
}

/// Map [-1, 1] to 8-bit [0, 255]: affine, rounding half away from zero.
pub fn to_u8(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Upscale a frame to the 72x72 export resolution as interleaved RGB bytes.
pub fn upscale_for_export(frame: &Frame) -> Vec<u8> {
    let resized = resize_bilinear(
        frame.pixels().data(),
        FRAME_CHANNELS,
        frame.height(),
        frame.width(),
        EXPORT_SIZE,
        EXPORT_SIZE,
    );
    let plane = EXPORT_SIZE * EXPORT_SIZE;
    let mut rgb = Vec::with_capacity(plane * FRAME_CHANNELS);
    for px in 0..plane {
        for ch in 0..FRAME_CHANNELS {
            rgb.push(to_u8(resized[ch * plane + px]));
        }
    }
    rgb
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_frame(fill: f64) -> Frame {
        Frame::new(Tensor::full(&[3, FRAME_SIZE, FRAME_SIZE], fill)).unwrap()
    }

    #[test]
    fn apply_noise_beta_zero_is_identity() {
        let f = toy_frame(0.5);
        let n = apply_noise(&f, 0.0, 7).unwrap();
        assert_eq!(n.pixels.data(), f.pixels().data());
    }

    #[test]
    fn apply_noise_beta_one_is_pure_noise() {
        let f = toy_frame(0.5);
        let n = apply_noise(&f, 1.0, 7).unwrap();
        let mut rng = Rng::seed_from(7);
        for &v in n.pixels.data() {
            // (1-1)*y + 1*eps leaves exactly eps, up to the fixed expression
            let eps = rng.normal();
            assert_eq!(v, 0.0 * 0.5 + 1.0 * eps);
        }
    }

    #[test]
    fn apply_noise_hand_blend() {
        // y = 0.8, eps = 0.2, beta = 0.25 -> 0.65
        let blended: f64 = (1.0 - 0.25) * 0.8 + 0.25 * 0.2;
        assert!((blended - 0.65).abs() < 1e-12);
    }

    #[test]
    fn apply_noise_rejects_bad_beta() {
        let f = toy_frame(0.0);
        assert!(matches!(
            apply_noise(&f, 1.5, 0).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn apply_noise_is_reproducible() {
        let f = toy_frame(-0.3);
        let a = apply_noise(&f, 0.4, 99).unwrap();
        let b = apply_noise(&f, 0.4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_endpoints_and_monotonicity() {
        let s = NoiseSchedule {
            beta_min: 0.0,
            beta_max: 0.3,
            horizon: 32,
            shape: ScheduleShape::Linear,
        };
        s.validate().unwrap();
        // m=1 degenerate
        assert_eq!(s.beta(0, 1).unwrap(), 0.0);
        // m=4 linear: 0, 0.1, 0.2, 0.3
        let betas: Vec<f64> = (0..4).map(|i| s.beta(i, 4).unwrap()).collect();
        for (b, want) in betas.iter().zip([0.0, 0.1, 0.2, 0.3]) {
            assert!((b - want).abs() < 1e-12);
        }
        assert!(betas.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.beta(4, 4).is_err());
    }

    #[test]
    fn unet_bottleneck_is_128ch_4x4_for_default_config() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(1);
        let unet = UNet::new(&mut store, &mut rng, UNetConfig::default(), 64).unwrap();
        assert_eq!(unet.bottleneck_geometry(), (128, 4));
    }

    #[test]
    fn frame_rejects_out_of_range_pixels() {
        let t = Tensor::full(&[3, 2, 2], 1.5);
        assert!(Frame::new(t).is_err());
    }

    #[test]
    fn decoder_zero_params_give_zero_frame() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(2);
        let dec = FrameDecoder::new(&mut store, &mut rng, 8);
        // zero out the weights
        for id in store.ids().collect::<Vec<_>>() {
            let t = store.get_mut(id);
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut g = Graph::new();
        let h = g.constant(&Tensor::full(&[1, 8], 0.7)).unwrap();
        let out = dec.decode(&mut g, &store, h).unwrap();
        assert!(g.value(out).iter().all(|&v| v == 0.0));
        assert_eq!(g.shape(out), &[1, 3, 32, 32]);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let src = Tensor::full(&[3, 7, 9], 0.25);
        let f = resize_frame(&src).unwrap();
        assert!(f.pixels().data().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn export_quantization_endpoints() {
        assert_eq!(to_u8(-1.0), 0);
        assert_eq!(to_u8(0.0), 128); // 127.5 rounds half away from zero
        assert_eq!(to_u8(1.0), 255);
    }

    #[test]
    fn export_is_72x72() {
        let f = toy_frame(0.0);
        let rgb = upscale_for_export(&f);
        assert_eq!(rgb.len(), 72 * 72 * 3);
        assert!(rgb.iter().all(|&b| b == 128));
    }

    #[test]
    fn resize_72_to_32_shape_contract() {
        let src = Tensor::zeros(&[3, 72, 72]);
        let f = resize_frame(&src).unwrap();
        assert_eq!(f.pixels().shape(), &[3, 32, 32]);
    }
}
