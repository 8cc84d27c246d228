//! Channel-first 3-D tensors used for latents and attention feature maps.

use std::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `C x H x W`, channel-first, all values finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::dims(
                "tensor data length",
                channels * height * width,
                data.len(),
            ));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::OutOfRange {
                value: format!("{:?}", data[idx]),
                location: format!("flat index {idx}"),
                range: "finite values",
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(c, i, j));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub(crate) fn from_raw(channels: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> T {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite_value())
    }

    pub fn ensure_shape(&self, what: &'static str, shape: (usize, usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::dims(
                what,
                format!("{:?}", shape),
                format!("{:?}", self.shape()),
            ));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    /// `a * self + b * other`, shapes must agree.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        other.ensure_shape("tensor combination", self.shape())?;
        Ok(Self::from_raw(
            self.channels,
            self.height,
            self.width,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        ))
    }

    /// Sum of elementwise products.
    pub fn dot(&self, other: &Self) -> Result<T> {
        other.ensure_shape("tensor dot", self.shape())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y))
    }

    /// Stacks tensors with equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::param("parts", "nothing to concatenate"));
        };
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if (p.height, p.width) != (h, w) {
                return Err(Error::dims(
                    "channel concatenation",
                    format!("{h}x{w}"),
                    format!("{}x{}", p.height, p.width),
                ));
            }
            channels += p.channels;
            data.extend_from_slice(&p.data);
        }
        Ok(Self::from_raw(channels, h, w, data))
    }
}

impl<T: Scalar> Add for &Tensor3<T> {
    type Output = Tensor3<T>;

    /// Panics on shape mismatch; use [`Tensor3::axpby`] for a checked sum.
    fn add(self, rhs: Self) -> Tensor3<T> {
        self.axpby(T::one(), rhs, T::one())
            .expect("shape mismatch in tensor add")
    }
}

impl<T: Scalar> Sub for &Tensor3<T> {
    type Output = Tensor3<T>;

    fn sub(self, rhs: Self) -> Tensor3<T> {
        self.axpby(T::one(), rhs, T::zero() - T::one())
            .expect("shape mismatch in tensor sub")
    }
}

/// Attention feature map `Attn_2D` of shape `c x h x w`.
pub type FeatureMap<T> = Tensor3<T>;

/// Diffusion latent.
pub type Latent<T> = Tensor3<T>;

/// `count` tokens of `width` values each, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tokens<T> {
    count: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tokens<T> {
    pub fn new(count: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != count * width {
            return Err(Error::dims("token data length", count * width, data.len()));
        }
        if data.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::param("tokens", "non-finite value"));
        }
        Ok(Self { count, width, data })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn token(&self, k: usize) -> &[T] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    /// Reads a feature map as `h*w` tokens of width `c` (spatial positions become tokens).
    pub fn from_feature_map(map: &FeatureMap<T>) -> Self {
        let (c, h, w) = map.shape();
        let mut data = Vec::with_capacity(c * h * w);
        for p in 0..h * w {
            for ch in 0..c {
                data.push(map.data()[ch * h * w + p]);
            }
        }
        Self {
            count: h * w,
            width: c,
            data,
        }
    }
}
