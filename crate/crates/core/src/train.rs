//! Optimization loop: per-sample forward through the full model, composite
//! loss, backward, global-norm clipping, Adam updates, CSV logging, periodic
//! checkpoints.
//!
//! Every random choice (batch composition, per-frame noise, motion frame
//! pair, dropout) is derived statelessly from `(config.seed, step, ...)`,
//! so identical runs are bitwise identical and a resumed run continues the
//! exact stream of an uninterrupted one.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{OptimizerConfig, RunConfig};
use crate::data::VideoSample;
use crate::error::{Error, Result};
use crate::loss::{
    composite_loss, motion_penalty, recon_decoder, recon_unet, text_ce, LossBreakdown, LossTerms,
};
use crate::model::VideoTextModel;
use crate::rng::{derive_seed, Rng};
use crate::tensor::{Graph, ParamStore};
use crate::text::Vocab;
use crate::vision::{apply_noise, frames_to_batch, noised_to_batch, NoisedFrame};

// seed-derivation stream tags
const TAG_INIT: u64 = 1;
const TAG_BATCH: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_MOTION: u64 = 4;
const TAG_DROPOUT: u64 = 5;
const TAG_EVAL: u64 = 6;

/// Adam first/second moment accumulators, aligned with the parameter store.
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let m = store
            .iter()
            .map(|(_, _, t)| vec![0.0; t.numel()])
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState { m, v, step: 0 }
    }

    /// One bias-corrected Adam update over every parameter that holds a
    /// gradient. `step` must have been incremented by the caller first.
    pub fn apply(&mut self, store: &mut ParamStore, lr: f64, cfg: &OptimizerConfig) {
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (idx, pid) in store.ids().enumerate().collect::<Vec<_>>() {
            let param = store.get_mut(pid);
            let Some(grad) = param.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let data = param.data_mut();
            for i in 0..grad.len() {
                let g = grad[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>, step: u64) {
        self.m = m;
        self.v = v;
        self.step = step;
    }
}

/// Scale all gradients so the global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for (_, _, t) in store.iter() {
        if let Some(g) = t.grad() {
            sq += g.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for pid in store.ids().collect::<Vec<_>>() {
            let t = store.get_mut(pid);
            if t.grad().is_some() {
                let delta: Vec<f64> = t
                    .grad()
                    .unwrap()
                    .iter()
                    .map(|g| g * scale - g)
                    .collect();
                t.accumulate_grad(&delta);
            }
        }
    }
    norm
}

/// Post-clip global gradient norm.
pub fn global_grad_norm(store: &ParamStore) -> f64 {
    let mut sq = 0.0;
    for (_, _, t) in store.iter() {
        if let Some(g) = t.grad() {
            sq += g.iter().map(|v| v * v).sum::<f64>();
        }
    }
    sq.sqrt()
}

/// Groups samples by frame count so every batch has a uniform video length.
pub struct Batcher {
    buckets: Vec<Vec<usize>>,
    total: usize,
}

impl Batcher {
    pub fn new(dataset: &[VideoSample]) -> Self {
        let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, s) in dataset.iter().enumerate() {
            by_len.entry(s.len()).or_default().push(i);
        }
        Batcher {
            buckets: by_len.into_values().collect(),
            total: dataset.len(),
        }
    }

    /// Deterministic batch for a step: pick a bucket with probability
    /// proportional to its size, then sample without replacement within it.
    pub fn batch_for_step(&self, seed: u64, step: u64, batch_size: usize) -> Vec<usize> {
        let mut rng = Rng::seed_from(derive_seed(seed, &[TAG_BATCH, step]));
        let mut r = rng.below(self.total);
        let bucket = self
            .buckets
            .iter()
            .find(|b| {
                if r < b.len() {
                    true
                } else {
                    r -= b.len();
                    false
                }
            })
            .expect("cumulative bucket sizes cover total");
        let mut indices = bucket.clone();
        rng.shuffle(&mut indices);
        indices.truncate(batch_size.min(bucket.len()));
        indices
    }
}

/// Per-sample evaluation metrics under deterministic eval noise.
#[derive(Clone, Copy, Debug)]
pub struct EvalMetrics {
    pub text_ce: f64,
    pub decoder_mse: f64,
    pub unet_mse: f64,
    pub caption_exact: bool,
}

/// Full training state: model, parameters, vocabulary, optimizer.
pub struct Trainer {
    pub config: RunConfig,
    pub model: VideoTextModel,
    pub store: ParamStore,
    pub vocab: Vocab,
    pub opt: AdamState,
    pub step: u64,
    pub history: VecDeque<LossBreakdown>,
}

pub const HISTORY_TAIL: usize = 100;

impl Trainer {
    /// Initialize a fresh model from a config and vocabulary. Parameter
    /// initialization draws from a stream derived from `config.seed`.
    pub fn new(mut config: RunConfig, vocab: Vocab) -> Result<Self> {
        if config.model.vocab_size == 0 {
            config.model.vocab_size = vocab.len();
        } else if config.model.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "config vocab_size {} does not match vocabulary of {} entries",
                config.model.vocab_size,
                vocab.len()
            )));
        }
        config.validate()?;
        config.model.validate()?;
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from(derive_seed(config.seed, &[TAG_INIT]));
        let model = VideoTextModel::new(
            &mut store,
            &mut rng,
            config.model.clone(),
            config.unet.clone(),
        )?;
        let opt = AdamState::new(&store);
        Ok(Trainer {
            config,
            model,
            store,
            vocab,
            opt,
            step: 0,
            history: VecDeque::new(),
        })
    }

    fn noised_frames(&self, sample: &VideoSample, seed_tag: u64, step: u64, sample_idx: u64) -> Result<Vec<NoisedFrame>> {
        let m = sample.len();
        sample
            .frames
            .iter()
            .enumerate()
            .map(|(i, frame)| {
                let beta = self.config.noise.beta(i, m)?;
                let seed = derive_seed(
                    self.config.seed,
                    &[seed_tag, step, sample_idx, i as u64],
                );
                apply_noise(frame, beta, seed)
            })
            .collect()
    }

    /// Forward one sample and return (graph, total-loss node, breakdown).
    fn sample_forward(
        &self,
        sample: &VideoSample,
        step: u64,
        sample_idx: u64,
        noise_tag: u64,
        train_mode: bool,
    ) -> Result<(Graph, crate::tensor::NodeId, LossBreakdown)> {
        let mut g = Graph::new().with_finite_checks(false);
        let tokens = self.vocab.encode(&sample.caption);
        let noised = self.noised_frames(sample, noise_tag, step, sample_idx)?;

        let noised_node = noised_to_batch(&mut g, &noised)?;
        let clean_node = frames_to_batch(&mut g, &sample.frames)?;

        // one shared down pass feeds both the transformer latents and the
        // up-path reconstruction
        let (latents, reconstructed) =
            self.model
                .unet
                .encode_and_reconstruct(&mut g, &self.store, noised_node)?;
        let seq = self
            .model
            .transformer
            .build_joint_sequence(&mut g, &self.store, &tokens, Some(latents))?;

        let mut dropout_rng = if train_mode && self.config.model.dropout > 0.0 {
            Some(Rng::seed_from(derive_seed(
                self.config.seed,
                &[TAG_DROPOUT, step, sample_idx],
            )))
        } else {
            None
        };
        let hidden = self
            .model
            .transformer
            .forward(&mut g, &self.store, &seq, dropout_rng.as_mut())?;

        let logits = self.model.transformer.text_head(
            &mut g,
            &self.store,
            hidden,
            &seq.text_pred_positions(),
        )?;
        let ce = text_ce(&mut g, logits, &seq.text_targets())?;

        let pred_latents = self
            .model
            .transformer
            .video_head(&mut g, hidden, &seq.video_pred_positions())?;
        let decoded = self.model.decoder.decode(&mut g, &self.store, pred_latents)?;
        let rd = recon_decoder(&mut g, decoded, clean_node)?;
        let ru = recon_unet(&mut g, reconstructed, clean_node)?;

        let mut motion_rng = Rng::seed_from(derive_seed(
            self.config.seed,
            &[TAG_MOTION, step, sample_idx],
        ));
        let (motion, _pair) =
            motion_penalty(&mut g, decoded, self.config.loss.margin_tau, &mut motion_rng)?;

        let terms = LossTerms {
            text_ce: Some(ce),
            recon_decoder: Some(rd),
            recon_unet: Some(ru),
            motion: Some(motion),
        };
        let (total, breakdown) = composite_loss(&mut g, &terms, &self.config.loss)?;
        Ok((g, total, breakdown))
    }

    /// One optimization step over a batch: forward, backward, clip, Adam.
    /// Gradients are zeroed at entry and consumed by the update.
    pub fn train_step(&mut self, batch: &[&VideoSample]) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::Contract("train_step on an empty batch".into()));
        }
        self.store.zero_grads();
        let inv_b = 1.0 / batch.len() as f64;
        let mut mean = LossBreakdown::default();
        for (idx, sample) in batch.iter().enumerate() {
            let (mut g, total, breakdown) =
                self.sample_forward(sample, self.step, idx as u64, TAG_NOISE, true)?;
            if let Some(term) = breakdown.non_finite_term() {
                return Err(Error::NonFinite {
                    context: format!("training step {}: loss term {term}", self.step),
                });
            }
            let scaled = g.scale(total, inv_b)?;
            g.backward(scaled)?;
            g.harvest_into(&mut self.store);
            mean.text_ce += breakdown.text_ce * inv_b;
            mean.recon_decoder += breakdown.recon_decoder * inv_b;
            mean.recon_unet += breakdown.recon_unet * inv_b;
            mean.motion += breakdown.motion * inv_b;
            mean.total += breakdown.total * inv_b;
        }

        clip_global_norm(&mut self.store, self.config.optimizer.clip_norm);
        self.opt.step += 1;
        let lr = self.config.optimizer.effective_lr(self.step);
        self.opt.apply(&mut self.store, lr, &self.config.optimizer);
        self.step += 1;

        for (_, name, t) in self.store.iter() {
            if !t.data().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("parameter {name} after step {}", self.step),
                });
            }
        }

        self.history.push_back(mean);
        while self.history.len() > HISTORY_TAIL {
            self.history.pop_front();
        }
        Ok(mean)
    }

    /// Run `n_steps` optimization steps over seeded mini-batches. Appends one
    /// CSV row per step to `log`, checkpoints every `checkpoint_every` steps
    /// into `checkpoint_dir`, and writes a final checkpoint. Returns the path
    /// of the final checkpoint when a directory was given.
    pub fn train_loop(
        &mut self,
        dataset: &[VideoSample],
        n_steps: u64,
        log: Option<&mut CsvLog>,
        checkpoint_dir: Option<&Path>,
    ) -> Result<Option<PathBuf>> {
        if dataset.is_empty() {
            return Err(Error::Input("training dataset is empty".into()));
        }
        for sample in dataset {
            let need = self.vocab.encode(&sample.caption).len() + 2 + sample.len();
            if need > self.config.model.max_seq_len {
                return Err(Error::Input(format!(
                    "sample needs sequence length {need}, max_seq_len is {}",
                    self.config.model.max_seq_len
                )));
            }
        }
        let batcher = Batcher::new(dataset);
        let mut log = log;
        for _ in 0..n_steps {
            let t0 = Instant::now();
            let indices = batcher.batch_for_step(
                self.config.seed,
                self.step,
                self.config.optimizer.batch_size,
            );
            let batch: Vec<&VideoSample> = indices.iter().map(|&i| &dataset[i]).collect();
            let breakdown = self.train_step(&batch)?;
            if let Some(log) = log.as_deref_mut() {
                let lr = self.config.optimizer.effective_lr(self.step - 1);
                log.append(&breakdown, self.step - 1, lr, t0.elapsed().as_millis() as u64)?;
            }
            if let Some(dir) = checkpoint_dir {
                let every = self.config.optimizer.checkpoint_every;
                if every > 0 && self.step.is_multiple_of(every) {
                    self.save_checkpoint(&dir.join(format!("ckpt_{:06}.s2vc", self.step)))?;
                }
            }
        }
        if let Some(dir) = checkpoint_dir {
            let path = dir.join("final.s2vc");
            self.save_checkpoint(&path)?;
            return Ok(Some(path));
        }
        Ok(None)
    }

    /// The full loss graph for one sample under deterministic eval seeds
    /// (dropout off, fixed noise stream). The returned graph is ready for
    /// `backward` on the total-loss node; used by gradient verification.
    pub fn loss_graph(
        &self,
        sample: &VideoSample,
    ) -> Result<(Graph, crate::tensor::NodeId, LossBreakdown)> {
        self.sample_forward(sample, 0, 0, TAG_EVAL, false)
    }

    /// Deterministic evaluation of one sample: loss components under eval
    /// noise plus whether teacher-forced greedy decoding reproduces the
    /// caption exactly.
    pub fn evaluate(&self, sample: &VideoSample) -> Result<EvalMetrics> {
        let (_, _, breakdown) = self.sample_forward(sample, 0, 0, TAG_EVAL, false)?;
        let tokens = self.vocab.encode(&sample.caption);
        let argmax = self.model.teacher_forced_argmax(&self.store, &tokens, None)?;
        let mut want = tokens.ids.clone();
        want.push(crate::text::EOS_TEXT);
        Ok(EvalMetrics {
            text_ce: breakdown.text_ce,
            decoder_mse: breakdown.recon_decoder,
            unet_mse: breakdown.recon_unet,
            caption_exact: argmax == want,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        crate::checkpoint::save(self, path)
    }

    pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
        crate::checkpoint::load(path)
    }
}

/// Append-only CSV training log.
pub struct CsvLog {
    file: File,
}

impl CsvLog {
    /// Create (with header) or append to an existing log.
    pub fn open(path: &Path) -> Result<Self> {
        let exists = path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if !exists {
            writeln!(file, "{}", LossBreakdown::CSV_HEADER).map_err(|e| Error::io(path, e))?;
        }
        Ok(CsvLog { file })
    }

    pub fn append(
        &mut self,
        breakdown: &LossBreakdown,
        step: u64,
        lr: f64,
        wallclock_ms: u64,
    ) -> Result<()> {
        writeln!(self.file, "{}", breakdown.csv_row(step, lr, wallclock_ms)).map_err(|e| {
            Error::Io {
                path: "<training log>".into(),
                source: e,
            }
        })
    }
}
