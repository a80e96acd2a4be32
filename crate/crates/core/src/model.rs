//! Causal decoder-only transformer over the joint [text; video] sequence,
//! plus the full model bundle (transformer + U-Net + frame decoder) and
//! autoregressive generation.
//!
//! Sequence layout: `[BOS, tokens..., EOS_TEXT, frame latents...]`. Every
//! element is content embedding + learned absolute position embedding +
//! learned modality embedding. Hidden state at position t predicts the
//! element at t+1: token logits at text positions, the next frame's latent
//! at the EOS_TEXT position and at video positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{embedding_table, LayerNorm, Linear};
use crate::rng::{derive_seed, Rng};
use crate::tensor::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::text::{TokenSeq, Vocab, BOS, EOS_TEXT};
use crate::vision::{
    apply_noise, frame_from_batch, noised_to_batch, Frame, FrameDecoder, UNet, UNetConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_n_layers")]
    pub n_layers: usize,
    #[serde(default = "default_n_heads")]
    pub n_heads: usize,
    #[serde(default = "default_d_ff")]
    pub d_ff: usize,
    #[serde(default = "default_max_seq_len")]
    pub max_seq_len: usize,
    /// Filled from the vocabulary at build time when left at 0.
    #[serde(default)]
    pub vocab_size: usize,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_d_model() -> usize {
    128
}
fn default_n_layers() -> usize {
    4
}
fn default_n_heads() -> usize {
    4
}
fn default_d_ff() -> usize {
    512
}
fn default_max_seq_len() -> usize {
    96
}
fn default_activation() -> Activation {
    Activation::Relu
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: default_d_model(),
            n_layers: default_n_layers(),
            n_heads: default_n_heads(),
            d_ff: default_d_ff(),
            max_seq_len: default_max_seq_len(),
            vocab_size: 0,
            dropout: 0.0,
            activation: default_activation(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model ({}) must be a positive multiple of n_heads ({})",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be set before building".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    Text,
    Video,
}

/// Joint sequence bound into a graph: embedded content plus bookkeeping for
/// loss computation.
#[derive(Debug)]
pub struct JointSequence {
    /// [L, d_model] content + position + modality embeddings.
    pub embedded: NodeId,
    /// Per-position modality tag; all TEXT positions precede all VIDEO ones.
    pub tags: Vec<Modality>,
    /// BOS + caption ids + EOS_TEXT.
    pub token_ids: Vec<usize>,
    pub n_frames: usize,
}

impl JointSequence {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn text_len(&self) -> usize {
        self.token_ids.len()
    }

    /// Positions whose hidden state predicts the next token; position i
    /// predicts token_ids[i + 1].
    pub fn text_pred_positions(&self) -> Vec<usize> {
        (0..self.text_len() - 1).collect()
    }

    pub fn text_targets(&self) -> Vec<usize> {
        self.token_ids[1..].to_vec()
    }

    /// Positions whose hidden state predicts a frame latent: EOS_TEXT plus
    /// the first m-1 video positions.
    pub fn video_pred_positions(&self) -> Vec<usize> {
        let eos = self.text_len() - 1;
        (eos..eos + self.n_frames).collect()
    }
}

struct Block {
    ln1: LayerNorm,
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    ln2: LayerNorm,
    ff1: Linear,
    ff2: Linear,
}

/// Decoder-only transformer parameters.
pub struct Transformer {
    cfg: ModelConfig,
    pub tok_emb: ParamId,
    pub pos_emb: ParamId,
    pub modality_emb: ParamId,
    blocks: Vec<Block>,
    final_ln: LayerNorm,
    text_head: Linear,
}

/// Rewraps non-finite errors with the transformer layer that produced them.
fn at_layer(layer: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { context } => Error::NonFinite {
            context: format!("transformer layer {layer}: {context}"),
        },
        other => other,
    }
}

impl Transformer {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let tok_emb = embedding_table(store, rng, "tf.tok_emb", cfg.vocab_size, d);
        let pos_emb = embedding_table(store, rng, "tf.pos_emb", cfg.max_seq_len, d);
        let modality_emb = embedding_table(store, rng, "tf.modality_emb", 2, d);

        // residual branches scaled down so deep stacks start stable
        let resid_scale = 1.0 / (2.0 * cfg.n_layers as f64).sqrt();
        let mut blocks = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let p = |s: &str| format!("tf.block{l}.{s}");
            blocks.push(Block {
                ln1: LayerNorm::new(store, &p("ln1"), d),
                wq: Linear::new(store, rng, &p("wq"), d, d, 1.0),
                wk: Linear::new(store, rng, &p("wk"), d, d, 1.0),
                wv: Linear::new(store, rng, &p("wv"), d, d, 1.0),
                wo: Linear::new(store, rng, &p("wo"), d, d, resid_scale),
                ln2: LayerNorm::new(store, &p("ln2"), d),
                ff1: Linear::new(store, rng, &p("ff1"), d, cfg.d_ff, 1.0),
                ff2: Linear::new(store, rng, &p("ff2"), cfg.d_ff, d, resid_scale),
            });
        }
        let final_ln = LayerNorm::new(store, "tf.final_ln", d);
        let text_head = Linear::new(store, rng, "tf.text_head", d, cfg.vocab_size, 1.0);
        Ok(Transformer {
            cfg,
            tok_emb,
            pos_emb,
            modality_emb,
            blocks,
            final_ln,
            text_head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Assemble `[BOS, tokens, EOS_TEXT, frame latents...]` with position and
    /// modality embeddings added. `frame_latents`, when present, is [m, d].
    pub fn build_joint_sequence(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        tokens: &TokenSeq,
        frame_latents: Option<NodeId>,
    ) -> Result<JointSequence> {
        let mut token_ids = Vec::with_capacity(tokens.len() + 2);
        token_ids.push(BOS);
        token_ids.extend_from_slice(&tokens.ids);
        token_ids.push(EOS_TEXT);

        let n_frames = match frame_latents {
            Some(fl) => {
                let shape = g.shape(fl);
                if shape.len() != 2 || shape[1] != self.cfg.d_model {
                    return Err(Error::BadShape {
                        op: "build_joint_sequence",
                        shape: shape.to_vec(),
                        reason: format!("frame latents must be [m, {}]", self.cfg.d_model),
                    });
                }
                shape[0]
            }
            None => 0,
        };

        let total = token_ids.len() + n_frames;
        if total > self.cfg.max_seq_len {
            return Err(Error::Input(format!(
                "joint sequence of {} text + {} video elements = {} exceeds max_seq_len {}",
                token_ids.len(),
                n_frames,
                total,
                self.cfg.max_seq_len
            )));
        }

        let tok_table = g.param(store, self.tok_emb)?;
        let text_part = g.gather_rows(tok_table, &token_ids)?;
        let content = match frame_latents {
            Some(fl) => g.concat_rows(&[text_part, fl])?,
            None => text_part,
        };

        let positions: Vec<usize> = (0..total).collect();
        let pos_table = g.param(store, self.pos_emb)?;
        let pos = g.gather_rows(pos_table, &positions)?;

        let mut tags = vec![Modality::Text; token_ids.len()];
        tags.extend(std::iter::repeat_n(Modality::Video, n_frames));
        let tag_ids: Vec<usize> = tags
            .iter()
            .map(|t| match t {
                Modality::Text => 0,
                Modality::Video => 1,
            })
            .collect();
        let mod_table = g.param(store, self.modality_emb)?;
        let modality = g.gather_rows(mod_table, &tag_ids)?;

        let x = g.add(content, pos)?;
        let embedded = g.add(x, modality)?;
        Ok(JointSequence {
            embedded,
            tags,
            token_ids,
            n_frames,
        })
    }

    /// Pre-norm causal self-attention stack. Pass a dropout RNG only during
    /// training; `None` disables dropout for exact determinism.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        seq: &JointSequence,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<NodeId> {
        if seq.is_empty() {
            return Err(Error::Contract("transformer_forward on empty sequence".into()));
        }
        let len = seq.len();
        let d = self.cfg.d_model;
        let n_heads = self.cfg.n_heads;
        let d_head = d / n_heads;
        let scale = 1.0 / (d_head as f64).sqrt();

        let mask = causal_mask(len);
        let mask_node = g.constant(&mask)?;

        let mut drop_rng = dropout_rng;
        let mut x = seq.embedded;
        for (layer, block) in self.blocks.iter().enumerate() {
            let wrap = at_layer(layer);
            let h = block.ln1.forward(g, store, x).map_err(&wrap)?;
            let q = block.wq.forward(g, store, h).map_err(&wrap)?;
            let k = block.wk.forward(g, store, h).map_err(&wrap)?;
            let v = block.wv.forward(g, store, h).map_err(&wrap)?;

            let mut head_outputs = Vec::with_capacity(n_heads);
            for head in 0..n_heads {
                let qh = g.slice_cols(q, head * d_head, d_head).map_err(&wrap)?;
                let kh = g.slice_cols(k, head * d_head, d_head).map_err(&wrap)?;
                let vh = g.slice_cols(v, head * d_head, d_head).map_err(&wrap)?;
                let scores = g.matmul_nt(qh, kh).map_err(&wrap)?;
                let scores = g.scale(scores, scale).map_err(&wrap)?;
                let masked = g.add(scores, mask_node).map_err(&wrap)?;
                let attn = g.softmax_lastdim(masked).map_err(&wrap)?;
                head_outputs.push(g.matmul(attn, vh).map_err(&wrap)?);
            }
            let ctx = g.concat_cols(&head_outputs).map_err(&wrap)?;
            let mut attn_out = block.wo.forward(g, store, ctx).map_err(&wrap)?;
            attn_out = self.maybe_dropout(g, attn_out, &mut drop_rng)?;
            x = g.add(x, attn_out).map_err(&wrap)?;

            let h2 = block.ln2.forward(g, store, x).map_err(&wrap)?;
            let ff = block.ff1.forward(g, store, h2).map_err(&wrap)?;
            let ff = match self.cfg.activation {
                Activation::Relu => g.relu(ff).map_err(&wrap)?,
                Activation::Gelu => g.gelu(ff).map_err(&wrap)?,
            };
            let mut ff = block.ff2.forward(g, store, ff).map_err(&wrap)?;
            ff = self.maybe_dropout(g, ff, &mut drop_rng)?;
            x = g.add(x, ff).map_err(&wrap)?;
        }
        self.final_ln.forward(g, store, x)
    }

    fn maybe_dropout(
        &self,
        g: &mut Graph,
        x: NodeId,
        rng: &mut Option<&mut Rng>,
    ) -> Result<NodeId> {
        let p = self.cfg.dropout;
        let Some(rng) = rng.as_deref_mut() else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - p;
        let shape = g.shape(x).to_vec();
        let numel: usize = shape.iter().product();
        let mask_data: Vec<f64> = (0..numel)
            .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mask = g.constant(&Tensor::from_vec(shape, mask_data)?)?;
        g.mul(x, mask)
    }

    /// Next-token logits at the given positions: [k, vocab_size].
    pub fn text_head(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        hidden: NodeId,
        positions: &[usize],
    ) -> Result<NodeId> {
        let rows = g.gather_rows(hidden, positions)?;
        self.text_head.forward(g, store, rows)
    }

    /// Predicted next-frame latents at the given positions, as an identity
    /// pass-through of the hidden states: [k, d_model].
    pub fn video_head(&self, g: &mut Graph, hidden: NodeId, positions: &[usize]) -> Result<NodeId> {
        g.gather_rows(hidden, positions)
    }
}

/// Additive causal mask: 0 on and below the diagonal, -1e30 above. The
/// -1e30 entries underflow to exactly zero attention weight, which is what
/// makes prefix hidden states bitwise independent of suffix content.
fn causal_mask(len: usize) -> Tensor {
    let mut data = vec![0.0; len * len];
    for i in 0..len {
        for j in (i + 1)..len {
            data[i * len + j] = -1e30;
        }
    }
    Tensor::from_vec(vec![len, len], data).expect("mask shape")
}

/// The full text-to-video model: shared-space transformer, U-Net frame
/// codec, and linear+tanh frame decoder over one parameter store.
pub struct VideoTextModel {
    pub transformer: Transformer,
    pub unet: UNet,
    pub decoder: FrameDecoder,
}

impl VideoTextModel {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        cfg: ModelConfig,
        unet_cfg: UNetConfig,
    ) -> Result<Self> {
        let d_model = cfg.d_model;
        let transformer = Transformer::new(store, rng, cfg)?;
        let unet = UNet::new(store, rng, unet_cfg, d_model)?;
        let decoder = FrameDecoder::new(store, rng, d_model);
        Ok(VideoTextModel {
            transformer,
            unet,
            decoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        self.transformer.config()
    }

    /// Closed-form parameter count for a given configuration; guards
    /// against silent architecture drift.
    pub fn expected_param_count(cfg: &ModelConfig, unet_cfg: &UNetConfig) -> usize {
        let d = cfg.d_model;
        let v = cfg.vocab_size;
        let dff = cfg.d_ff;

        let lin = |i: usize, o: usize| i * o + o;
        let ln = 2 * d;

        let mut total = v * d + cfg.max_seq_len * d + 2 * d; // embeddings
        total += cfg.n_layers * (2 * ln + 4 * lin(d, d) + lin(d, dff) + lin(dff, d));
        total += ln; // final layer norm
        total += lin(d, v); // text head

        // U-Net
        let widths = unet_cfg.widths();
        let conv = |ci: usize, co: usize, k: usize| ci * co * k * k + co;
        let resblock = |ci: usize, co: usize| {
            let mut n = conv(ci, co, 3) + conv(co, co, 3);
            if ci != co {
                n += conv(ci, co, 1);
            }
            n
        };
        total += conv(3, widths[0], 3); // stem
        let mut c_in = widths[0];
        for &w in &widths {
            for b in 0..unet_cfg.resblocks {
                total += resblock(if b == 0 { c_in } else { w }, w);
            }
            c_in = w;
        }
        let mut c_prev = *widths.last().unwrap();
        for lvl in (0..widths.len() - 1).rev() {
            let w = widths[lvl];
            for b in 0..unet_cfg.resblocks {
                total += resblock(if b == 0 { c_prev + w } else { w }, w);
            }
            c_prev = w;
        }
        total += conv(widths[0], 3, 3); // head
        let s = crate::vision::FRAME_SIZE / unet_cfg.downscale();
        total += lin(unet_cfg.bottleneck_channels() * s * s, d); // latent projection

        // frame decoder
        total += lin(d, 3 * crate::vision::FRAME_SIZE * crate::vision::FRAME_SIZE);
        total
    }

    /// Autoregressive video generation: encode the prompt, then repeatedly
    /// decode the last hidden state into a frame, re-encode it un-noised
    /// (β = 0), and extend the sequence. Deterministic given `seed`.
    pub fn generate(
        &self,
        store: &ParamStore,
        vocab: &Vocab,
        prompt: &str,
        n_frames: usize,
        seed: u64,
    ) -> Result<Vec<Frame>> {
        let tokens = vocab.encode(prompt);
        let total = tokens.len() + 2 + n_frames;
        if total > self.config().max_seq_len {
            return Err(Error::Input(format!(
                "prompt of {} tokens plus {} frames needs sequence length {}, max is {}",
                tokens.len(),
                n_frames,
                total,
                self.config().max_seq_len
            )));
        }

        let d = self.config().d_model;
        let mut frames: Vec<Frame> = Vec::with_capacity(n_frames);
        let mut latents: Vec<f64> = Vec::new(); // m * d, row-major

        for step in 0..n_frames {
            let mut g = Graph::new().with_finite_checks(true);
            let latent_node = if frames.is_empty() {
                None
            } else {
                let t = Tensor::from_vec(vec![frames.len(), d], latents.clone())?;
                Some(g.constant(&t)?)
            };
            let seq = self
                .transformer
                .build_joint_sequence(&mut g, store, &tokens, latent_node)?;
            let hidden = self.transformer.forward(&mut g, store, &seq, None)?;
            let last = g.gather_rows(hidden, &[seq.len() - 1])?;
            let decoded = self.decoder.decode(&mut g, store, last)?;
            let frame = frame_from_batch(&g, decoded, 0)?;

            // inference-time re-encoding is un-noised
            let noised = apply_noise(&frame, 0.0, derive_seed(seed, &[step as u64]))?;
            let batch = noised_to_batch(&mut g, std::slice::from_ref(&noised))?;
            let latent = self.unet.encode_frames(&mut g, store, batch)?;
            latents.extend_from_slice(g.value(latent));
            frames.push(frame);
        }
        Ok(frames)
    }

    /// Free-running greedy text decode from BOS until EOS_TEXT (or length
    /// cap). Returns caption token ids without BOS/EOS.
    pub fn generate_text(&self, store: &ParamStore, max_tokens: usize) -> Result<TokenSeq> {
        let mut ids: Vec<usize> = Vec::new();
        for _ in 0..max_tokens {
            let mut g = Graph::new();
            let seq = self.transformer.build_joint_sequence(
                &mut g,
                store,
                &TokenSeq { ids: ids.clone() },
                None,
            )?;
            // hidden at the last *token* position (before EOS_TEXT) predicts
            // the next token; with k tokens so far that position is k.
            let hidden = self.transformer.forward(&mut g, store, &seq, None)?;
            let logits = self.transformer.text_head(&mut g, store, hidden, &[ids.len()])?;
            let row = g.value(logits);
            let next = argmax(row);
            if next == EOS_TEXT {
                break;
            }
            ids.push(next);
        }
        Ok(TokenSeq { ids })
    }

    /// Teacher-forced greedy decode: argmax of each text-position logit row
    /// given the true prefix. Reproduces the caption exactly iff every
    /// position is predicted correctly.
    pub fn teacher_forced_argmax(
        &self,
        store: &ParamStore,
        tokens: &TokenSeq,
        frame_latents: Option<&Tensor>,
    ) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let latent_node = match frame_latents {
            Some(t) => Some(g.constant(t)?),
            None => None,
        };
        let seq = self
            .transformer
            .build_joint_sequence(&mut g, store, tokens, latent_node)?;
        let hidden = self.transformer.forward(&mut g, store, &seq, None)?;
        let positions = seq.text_pred_positions();
        let logits = self.transformer.text_head(&mut g, store, hidden, &positions)?;
        let v = self.config().vocab_size;
        Ok(g.value(logits).chunks(v).map(argmax).collect())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(vocab: usize) -> ModelConfig {
        ModelConfig {
            d_model: 16,
            n_layers: 2,
            n_heads: 2,
            d_ff: 32,
            max_seq_len: 24,
            vocab_size: vocab,
            dropout: 0.0,
            activation: Activation::Relu,
        }
    }

    #[test]
    fn joint_sequence_counting_and_tags() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(1);
        let tf = Transformer::new(&mut store, &mut rng, tiny_cfg(10)).unwrap();
        let mut g = Graph::new();
        let latents = g.constant(&Tensor::zeros(&[8, 16])).unwrap();
        let tokens = TokenSeq {
            ids: vec![4, 5, 6, 7, 8],
        };
        let seq = tf
            .build_joint_sequence(&mut g, &store, &tokens, Some(latents))
            .unwrap();
        assert_eq!(seq.len(), 15); // BOS + 5 + EOS_TEXT + 8
        assert!(seq.tags[..7].iter().all(|&t| t == Modality::Text));
        assert!(seq.tags[7..].iter().all(|&t| t == Modality::Video));
        assert_eq!(seq.video_pred_positions(), (6..14).collect::<Vec<_>>());
        assert_eq!(seq.text_targets(), vec![4, 5, 6, 7, 8, EOS_TEXT]);
    }

    #[test]
    fn text_only_sequence_is_valid() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(2);
        let tf = Transformer::new(&mut store, &mut rng, tiny_cfg(10)).unwrap();
        let mut g = Graph::new();
        let tokens = TokenSeq {
            ids: vec![4, 5, 6, 7, 8],
        };
        let seq = tf.build_joint_sequence(&mut g, &store, &tokens, None).unwrap();
        assert_eq!(seq.len(), 7);
        assert_eq!(seq.n_frames, 0);
    }

    #[test]
    fn sequence_overflow_names_lengths() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(3);
        let tf = Transformer::new(&mut store, &mut rng, tiny_cfg(10)).unwrap();
        let mut g = Graph::new();
        let latents = g.constant(&Tensor::zeros(&[23, 16])).unwrap();
        let tokens = TokenSeq { ids: vec![4, 5] };
        let err = tf
            .build_joint_sequence(&mut g, &store, &tokens, Some(latents))
            .unwrap_err()
            .to_string();
        assert!(err.contains("4 text") && err.contains("23 video"), "{err}");
    }

    #[test]
    fn forward_shapes_and_single_element() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(4);
        let tf = Transformer::new(&mut store, &mut rng, tiny_cfg(10)).unwrap();
        let mut g = Graph::new();
        let tokens = TokenSeq { ids: vec![] };
        let seq = tf.build_joint_sequence(&mut g, &store, &tokens, None).unwrap();
        let h = tf.forward(&mut g, &store, &seq, None).unwrap();
        assert_eq!(g.shape(h), &[2, 16]); // BOS + EOS_TEXT

        let logits = tf.text_head(&mut g, &store, h, &[0]).unwrap();
        assert_eq!(g.shape(logits), &[1, 10]);
        let latents = tf.video_head(&mut g, h, &[1]).unwrap();
        assert_eq!(g.shape(latents), &[1, 16]);
    }

    #[test]
    fn causality_prefix_is_bitwise_invariant() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(5);
        let tf = Transformer::new(&mut store, &mut rng, tiny_cfg(12)).unwrap();

        let run = |ids: Vec<usize>| -> Vec<f64> {
            let mut g = Graph::new();
            let tokens = TokenSeq { ids };
            let seq = tf.build_joint_sequence(&mut g, &store, &tokens, None).unwrap();
            let h = tf.forward(&mut g, &store, &seq, None).unwrap();
            g.value(h).to_vec()
        };
        let base = run(vec![4, 5, 6, 7]);
        let perturbed = run(vec![4, 5, 6, 11]); // change last token only
        let d = 16;
        // positions 0..=3 (BOS + first three tokens) must match bitwise
        for pos in 0..4 {
            for j in 0..d {
                assert_eq!(
                    base[pos * d + j].to_bits(),
                    perturbed[pos * d + j].to_bits(),
                    "prefix hidden state changed at position {pos}"
                );
            }
        }
        // the perturbed position must actually change
        assert!(base[4 * d..5 * d]
            .iter()
            .zip(&perturbed[4 * d..5 * d])
            .any(|(a, b)| a != b));
    }

    #[test]
    fn param_count_matches_closed_form() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(6);
        let cfg = tiny_cfg(10);
        let unet_cfg = UNetConfig {
            base: 4,
            mults: vec![1, 2, 4, 8],
            resblocks: 2,
        };
        let _model =
            VideoTextModel::new(&mut store, &mut rng, cfg.clone(), unet_cfg.clone()).unwrap();
        assert_eq!(
            store.param_count(),
            VideoTextModel::expected_param_count(&cfg, &unet_cfg)
        );
    }

    #[test]
    fn default_desk_config_param_count_closed_form() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(7);
        let cfg = ModelConfig {
            vocab_size: 32,
            ..Default::default()
        };
        let unet_cfg = UNetConfig::default();
        let _model =
            VideoTextModel::new(&mut store, &mut rng, cfg.clone(), unet_cfg.clone()).unwrap();
        assert_eq!(
            store.param_count(),
            VideoTextModel::expected_param_count(&cfg, &unet_cfg)
        );
    }

    #[test]
    fn invalid_head_split_is_config_error() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(8);
        let mut cfg = tiny_cfg(10);
        cfg.n_heads = 3;
        assert!(Transformer::new(&mut store, &mut rng, cfg).is_err());
    }
}
