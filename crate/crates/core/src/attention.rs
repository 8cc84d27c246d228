//! Cross-attention and the masked scaling of its output,
//! `(1 - alpha * M_resized) * Attn_2D`, with one learnable `alpha` per layer.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;
use crate::scalar::{Real, Scalar};
use crate::tensor::{FeatureMap, Tensor3, Tokens};

pub const DEFAULT_ALPHA_INIT: f64 = 0.5;

/// Ablation switch for the attention scaling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AttentionMode {
    /// Learnable alpha.
    #[default]
    Full,
    /// Attention output passes through untouched.
    NoAdjustment,
    /// Alpha pinned to 1: the warped region receives no cross-attention.
    AlphaFixedOne,
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionMode::Full => "full",
            AttentionMode::NoAdjustment => "no_adjustment",
            AttentionMode::AlphaFixedOne => "alpha_fixed_one",
        })
    }
}

impl FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AttentionMode::Full),
            "no_adjustment" => Ok(AttentionMode::NoAdjustment),
            "alpha_fixed_one" => Ok(AttentionMode::AlphaFixedOne),
            other => Err(Error::param(
                "attention_mode",
                format!("`{other}` is not full|no_adjustment|alpha_fixed_one"),
            )),
        }
    }
}

/// Per-layer scaling state. Alpha is deliberately unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionLayerState<T> {
    alpha: T,
    channels: usize,
    height: usize,
    width: usize,
    mode: AttentionMode,
}

impl<T: Scalar> AttentionLayerState<T> {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        mode: AttentionMode,
        alpha_init: T,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::param("layer shape", "dimensions must be positive"));
        }
        if !alpha_init.is_finite_value() {
            return Err(Error::param("alpha", "must be finite"));
        }
        let alpha = if mode == AttentionMode::AlphaFixedOne {
            T::one()
        } else {
            alpha_init
        };
        Ok(Self {
            alpha,
            channels,
            height,
            width,
            mode,
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn mode(&self) -> AttentionMode {
        self.mode
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn is_trainable(&self) -> bool {
        self.mode == AttentionMode::Full
    }

    /// Sets alpha; ignored (returns `false`) unless the mode is trainable.
    pub fn set_alpha(&mut self, alpha: T) -> bool {
        if self.is_trainable() && alpha.is_finite_value() {
            self.alpha = alpha;
            true
        } else {
            false
        }
    }

    /// Plain gradient step `alpha -= lr * grad`.
    pub fn descend(&mut self, grad: T, lr: T) -> bool {
        let next = self.alpha - lr * grad;
        self.set_alpha(next)
    }
}

fn check_mask(attn: &FeatureMap<impl Scalar>, mask: &BinaryMask) -> Result<()> {
    if (attn.height(), attn.width()) != mask.dims() {
        return Err(Error::dims(
            "resized warped mask vs feature map",
            format!("{}x{}", attn.height(), attn.width()),
            format!("{}x{}", mask.height(), mask.width()),
        ));
    }
    Ok(())
}

/// `softmax(Q K^T / sqrt(dim)) V` with queries taken from the spatial
/// positions of `queries`; the result is reshaped to `values.width() x h x w`.
pub fn cross_attention<T: Real>(
    queries: &FeatureMap<T>,
    keys: &Tokens<T>,
    values: &Tokens<T>,
    dim: usize,
) -> Result<FeatureMap<T>> {
    let (c, h, w) = queries.shape();
    if c != dim || keys.width() != dim {
        return Err(Error::dims(
            "query/key width",
            dim,
            format!("queries {c}, keys {}", keys.width()),
        ));
    }
    if keys.count() != values.count() {
        return Err(Error::dims("key/value count", keys.count(), values.count()));
    }
    if keys.count() == 0 {
        return Err(Error::param("keys", "need at least one key"));
    }
    let out_c = values.width();
    let plane = h * w;
    let q = Tokens::from_feature_map(queries);
    let scale = T::one() / T::from_count(dim).sqrt();
    let mut out = vec![T::zero(); out_c * plane];
    let mut logits = vec![T::zero(); keys.count()];

    for p in 0..plane {
        let qp = q.token(p);
        for (k, logit) in logits.iter_mut().enumerate() {
            *logit = qp
                .iter()
                .zip(keys.token(k))
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
                * scale;
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total = total + *l;
        }
        for (k, &e) in logits.iter().enumerate() {
            let prob = e / total;
            for (ch, &v) in values.token(k).iter().enumerate() {
                out[ch * plane + p] = out[ch * plane + p] + prob * v;
            }
        }
    }
    Tensor3::new(out_c, h, w, out)
}

/// `(1 - alpha * m) * attn`, broadcasting the one-channel mask over channels.
/// Identity in [`AttentionMode::NoAdjustment`].
pub fn adjust_attention<T: Scalar>(
    attn: &FeatureMap<T>,
    warped_mask_resized: &BinaryMask,
    state: &AttentionLayerState<T>,
) -> Result<FeatureMap<T>> {
    check_mask(attn, warped_mask_resized)?;
    if state.mode == AttentionMode::NoAdjustment {
        return Ok(attn.clone());
    }
    let plane = attn.height() * attn.width();
    let mask = warped_mask_resized.data();
    let factor_on = T::one() - state.alpha;
    let data = attn
        .data()
        .iter()
        .enumerate()
        .map(
            |(idx, &v)| {
                if mask[idx % plane] {
                    factor_on * v
                } else {
                    v
                }
            },
        )
        .collect();
    Tensor3::new(attn.channels(), attn.height(), attn.width(), data)
}

/// Derivative of `<upstream, adjust_attention(attn)>` with respect to alpha:
/// `-sum(upstream * m * attn)`.
pub fn alpha_gradient<T: Scalar>(
    attn: &FeatureMap<T>,
    warped_mask_resized: &BinaryMask,
    upstream: &FeatureMap<T>,
) -> Result<T> {
    check_mask(attn, warped_mask_resized)?;
    upstream.ensure_shape("upstream gradient", attn.shape())?;
    let plane = attn.height() * attn.width();
    let mask = warped_mask_resized.data();
    let acc = attn
        .data()
        .iter()
        .zip(upstream.data())
        .enumerate()
        .filter(|(idx, _)| mask[idx % plane])
        .fold(T::zero(), |acc, (_, (&a, &g))| acc + g * a);
    Ok(T::zero() - acc)
}
