//! Raster carriers: RGB images in `[0,1]`, binary masks and label maps.
//!
//! All layouts are row-major. RGB images interleave channels (`HxWx3`).

mod io;

pub use io::{
    image_bytes, load_image, load_mask, load_segmentation, mask_bytes, requantize, save_image,
    save_mask, save_segmentation,
};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

pub const CHANNELS: usize = 3;

/// Set of segmentation labels, e.g. the torso parts.
pub type LabelSet = BTreeSet<u8>;

fn check_dims(what: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::dims(
            what,
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", actual.0, actual.1),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(
    what: &'static str,
    a: (usize, usize),
    b: (usize, usize),
) -> Result<()> {
    check_dims(what, a, b)
}

/// `H x W x 3` image with every sample in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> RasterImage<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::dims(
                "image data length",
                height * width * CHANNELS,
                data.len(),
            ));
        }
        if let Some(idx) = data
            .iter()
            .position(|&v| !(v >= T::zero() && v <= T::one()))
        {
            let px = idx / CHANNELS;
            return Err(Error::OutOfRange {
                value: format!("{:?}", data[idx]),
                location: format!(
                    "row {}, col {}, channel {}",
                    px / width,
                    px % width,
                    idx % CHANNELS
                ),
                range: "[0, 1]",
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![T::zero(); height * width * CHANNELS],
        }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * CHANNELS])
    }

    /// Builds an image from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for i in 0..height {
            for j in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(i, j, c));
                }
            }
        }
        Self::new(height, width, data)
    }

    /// Wraps data already known to satisfy the range invariant.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), height * width * CHANNELS);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[(row * self.width + col) * CHANNELS + channel]
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [T; CHANNELS] {
        let base = (row * self.width + col) * CHANNELS;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    /// Pointwise product with a binary mask broadcast over channels.
    pub fn masked(&self, mask: &BinaryMask) -> Result<Self> {
        check_dims("mask vs image", self.dims(), mask.dims())?;
        let data = self
            .data
            .chunks_exact(CHANNELS)
            .zip(mask.data())
            .flat_map(|(px, &m)| px.iter().map(move |&v| v * T::indicator(m)))
            .collect();
        Ok(Self::from_raw(self.height, self.width, data))
    }

    /// First pixel (row, col) inside `!mask` holding a nonzero sample.
    pub fn first_nonzero_outside(&self, mask: &BinaryMask) -> Result<Option<(usize, usize)>> {
        check_dims("mask vs image", self.dims(), mask.dims())?;
        Ok(self
            .data
            .chunks_exact(CHANNELS)
            .zip(mask.data())
            .position(|(px, &m)| !m && px.iter().any(|v| !v.is_zero()))
            .map(|idx| (idx / self.width, idx % self.width)))
    }

    /// Channel-first copy (`3 x H x W`).
    pub fn to_planar(&self) -> Tensor3<T> {
        let plane = self.height * self.width;
        let mut data = vec![T::zero(); plane * CHANNELS];
        for (idx, px) in self.data.chunks_exact(CHANNELS).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * plane + idx] = v;
            }
        }
        Tensor3::from_raw(CHANNELS, self.height, self.width, data)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Result<RasterImage<U>> {
        RasterImage::new(
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// `H x W` mask over `{0,1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dims("mask data length", height * width, data.len()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Accepts numeric samples; anything other than exactly 0 or 1 is rejected.
    pub fn from_values<T: Scalar>(height: usize, width: usize, values: &[T]) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::dims(
                "mask data length",
                height * width,
                values.len(),
            ));
        }
        let mut data = Vec::with_capacity(values.len());
        for (idx, &v) in values.iter().enumerate() {
            if v.is_zero() {
                data.push(false);
            } else if v.is_one() {
                data.push(true);
            } else {
                return Err(Error::OutOfRange {
                    value: format!("{v:?}"),
                    location: format!("row {}, col {}", idx / width, idx % width),
                    range: "{0, 1}",
                });
            }
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, false)
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self::filled(height, width, true)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn value<T: Scalar>(&self, row: usize, col: usize) -> T {
        T::indicator(self.get(row, col))
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<Self> {
        check_dims("mask vs mask", self.dims(), other.dims())?;
        Ok(self.zip_with(other, |a, b| a && b))
    }

    pub fn or(&self, other: &BinaryMask) -> Result<Self> {
        check_dims("mask vs mask", self.dims(), other.dims())?;
        Ok(self.zip_with(other, |a, b| a || b))
    }

    pub fn not(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }

    /// Pointwise `self <= other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Single-channel tensor of 0/1 samples.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor3<T> {
        Tensor3::from_raw(
            1,
            self.height,
            self.width,
            self.data.iter().map(|&b| T::indicator(b)).collect(),
        )
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Integer label map. Every label is below `num_labels`; label 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationMap {
    height: usize,
    width: usize,
    num_labels: usize,
    data: Vec<u8>,
}

/// Background plus the 24 DensePose body parts.
pub const DEFAULT_NUM_LABELS: usize = 25;

impl SegmentationMap {
    pub fn new(height: usize, width: usize, num_labels: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dims(
                "segmentation data length",
                height * width,
                data.len(),
            ));
        }
        if num_labels == 0 || num_labels > 256 {
            return Err(Error::param("num_labels", "must be in 1..=256"));
        }
        if let Some(idx) = data.iter().position(|&l| l as usize >= num_labels) {
            return Err(Error::OutOfRange {
                value: data[idx].to_string(),
                location: format!("row {}, col {}", idx / width, idx % width),
                range: "declared label set",
            });
        }
        Ok(Self {
            height,
            width,
            num_labels,
            data,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        num_labels: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self::new(height, width, num_labels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    /// Pixels whose label belongs to `labels`.
    pub fn region(&self, labels: &LabelSet) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|l| labels.contains(l)).collect(),
        }
    }

    /// One channel per declared label (`num_labels x H x W`).
    pub fn one_hot<T: Scalar>(&self) -> Tensor3<T> {
        let plane = self.height * self.width;
        let mut data = vec![T::zero(); self.num_labels * plane];
        for (idx, &l) in self.data.iter().enumerate() {
            data[l as usize * plane + idx] = T::one();
        }
        Tensor3::from_raw(self.num_labels, self.height, self.width, data)
    }
}
