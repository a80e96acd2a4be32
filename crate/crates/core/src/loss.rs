//! Composite training objective: text cross-entropy, decoder reconstruction,
//! U-Net reconstruction, and a bounded motion-promotion term.
//!
//! total = text_ce + λ₁·recon_decoder + λ₂·recon_unet + α·motion
//!
//! The motion term is a hinge max(0, τ - D) on the mean absolute difference D
//! between two randomly sampled predicted frames: minimizing it pushes D up
//! to the margin τ. A raw -α·D objective is unbounded below; the hinge keeps
//! the total nonnegative while preserving the incentive to move. Setting
//! τ = ∞ recovers the raw -D term for ablation. All reductions are means so
//! the weights are invariant to resolution and video length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Graph, NodeId, Tensor};
use crate::text::PAD;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_margin_tau")]
    pub margin_tau: f64,
}

fn default_lambda1() -> f64 {
    1.0
}
fn default_lambda2() -> f64 {
    5.0
}
fn default_alpha() -> f64 {
    10.0
}
fn default_margin_tau() -> f64 {
    0.5
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: default_lambda1(),
            lambda2: default_lambda2(),
            alpha: default_alpha(),
            margin_tau: default_margin_tau(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.alpha < 0.0 {
            return Err(Error::Config(
                "loss weights lambda1, lambda2, alpha must be nonnegative".into(),
            ));
        }
        if self.margin_tau.is_nan() || self.margin_tau <= 0.0 {
            return Err(Error::Config(format!(
                "margin_tau must be positive, got {}",
                self.margin_tau
            )));
        }
        Ok(())
    }
}

/// Per-step loss decomposition. `motion` is stored post-hinge.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub text_ce: f64,
    pub recon_decoder: f64,
    pub recon_unet: f64,
    pub motion: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const CSV_HEADER: &'static str =
        "step,text_ce,recon_decoder,recon_unet,motion,total,lr,wallclock_ms";

    pub fn csv_row(&self, step: u64, lr: f64, wallclock_ms: u64) -> String {
        format!(
            "{step},{},{},{},{},{},{lr},{wallclock_ms}",
            self.text_ce, self.recon_decoder, self.recon_unet, self.motion, self.total
        )
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            (self.text_ce, "text_ce"),
            (self.recon_decoder, "recon_decoder"),
            (self.recon_unet, "recon_unet"),
            (self.motion, "motion"),
            (self.total, "total"),
        ]
        .into_iter()
        .find(|(v, _)| !v.is_finite())
        .map(|(_, name)| name)
    }
}

/// Mean of -log softmax(logits)[target] over non-PAD positions.
pub fn text_ce(g: &mut Graph, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
    g.cross_entropy(logits, targets, Some(PAD))
}

/// Mean squared error per pixel, averaged over frames: the decoder
/// reconstruction term of the objective.
pub fn recon_decoder(g: &mut Graph, predicted: NodeId, clean: NodeId) -> Result<NodeId> {
    mse(g, predicted, clean)
}

/// Identical contract with the U-Net reconstruction as first argument.
pub fn recon_unet(g: &mut Graph, reconstructed: NodeId, clean: NodeId) -> Result<NodeId> {
    mse(g, reconstructed, clean)
}

fn mse(g: &mut Graph, a: NodeId, b: NodeId) -> Result<NodeId> {
    let diff = g.sub(a, b)?;
    let sq = g.square(diff)?;
    g.mean_all(sq)
}

/// Hinge motion penalty over predicted frames [m, ...]: sample s ≠ t, let
/// D = mean |frame_s - frame_t|, return max(0, τ - D). Returns a constant 0
/// for fewer than two frames. With τ = ∞ the raw -D term is used instead.
/// Returns the sampled pair for logging.
pub fn motion_penalty(
    g: &mut Graph,
    predicted: NodeId,
    margin_tau: f64,
    rng: &mut Rng,
) -> Result<(NodeId, Option<(usize, usize)>)> {
    let shape = g.shape(predicted).to_vec();
    let m = shape[0];
    if m < 2 {
        let zero = g.constant(&Tensor::scalar(0.0))?;
        return Ok((zero, None));
    }
    let s = rng.below(m);
    let mut t = rng.below(m - 1);
    if t >= s {
        t += 1;
    }
    let per_frame: usize = shape[1..].iter().product();
    let flat = g.reshape(predicted, &[m, per_frame])?;
    let fs = g.gather_rows(flat, &[s])?;
    let ft = g.gather_rows(flat, &[t])?;
    let diff = g.sub(fs, ft)?;
    let abs = g.abs(diff)?;
    let d = g.mean_all(abs)?;
    let penalty = if margin_tau.is_infinite() {
        // ablation: the raw unbounded objective, gradient-equivalent to τ - D
        g.scale(d, -1.0)?
    } else {
        let neg = g.scale(d, -1.0)?;
        let shifted = g.add_scalar(neg, margin_tau)?;
        g.relu(shifted)?
    };
    Ok((penalty, Some((s, t))))
}

/// Component nodes of one sample's loss; absent components contribute zero.
#[derive(Default)]
pub struct LossTerms {
    pub text_ce: Option<NodeId>,
    pub recon_decoder: Option<NodeId>,
    pub recon_unet: Option<NodeId>,
    pub motion: Option<NodeId>,
}

/// Assemble the weighted total. Terms with a zero weight are excluded from
/// the graph entirely, so they contribute neither value nor gradient; their
/// raw values still appear in the returned breakdown.
pub fn composite_loss(
    g: &mut Graph,
    terms: &LossTerms,
    weights: &LossWeights,
) -> Result<(NodeId, LossBreakdown)> {
    let mut breakdown = LossBreakdown::default();
    let mut total: Option<NodeId> = None;

    let mut accumulate = |g: &mut Graph, node: Option<NodeId>, weight: f64| -> Result<f64> {
        let Some(node) = node else { return Ok(0.0) };
        let raw = g.scalar_value(node);
        if weight != 0.0 {
            let scaled = if weight == 1.0 { node } else { g.scale(node, weight)? };
            total = Some(match total {
                Some(t) => g.add(t, scaled)?,
                None => scaled,
            });
        }
        Ok(raw)
    };

    breakdown.text_ce = accumulate(g, terms.text_ce, 1.0)?;
    breakdown.recon_decoder = accumulate(g, terms.recon_decoder, weights.lambda1)?;
    breakdown.recon_unet = accumulate(g, terms.recon_unet, weights.lambda2)?;
    breakdown.motion = accumulate(g, terms.motion, weights.alpha)?;

    let total = match total {
        Some(t) => t,
        None => g.constant(&Tensor::scalar(0.0))?,
    };
    breakdown.total = g.scalar_value(total);
    Ok((total, breakdown))
}
