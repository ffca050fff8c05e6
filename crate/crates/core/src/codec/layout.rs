use serde::{Deserialize, Serialize};

use super::CodecError;

/// Output strides of the three prediction scales, finest first.
pub const STRIDES: [u32; 3] = [8, 16, 32];

/// Anchor `(width, height)` sizes in pixels, one list per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet(pub Vec<Vec<[f64; 2]>>);

impl Default for AnchorSet {
    fn default() -> Self {
        Self(vec![
            vec![[10.0, 13.0], [16.0, 30.0], [33.0, 23.0]],
            vec![[30.0, 61.0], [62.0, 45.0], [59.0, 119.0]],
            vec![[116.0, 90.0], [156.0, 198.0], [373.0, 326.0]],
        ])
    }
}

impl AnchorSet {
    /// `count` square anchors of side 1 px per scale; handy when only the
    /// layout arithmetic matters.
    pub fn uniform(count: usize) -> Self {
        Self(vec![vec![[1.0, 1.0]; count]; STRIDES.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLayout {
    pub stride: u32,
    pub width: u32,
    pub height: u32,
    pub anchors: Vec<[f64; 2]>,
}

impl ScaleLayout {
    pub fn cells(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn predictions(&self) -> usize {
        self.cells() * self.anchors.len()
    }
}

/// Slot address. The derived ordering (scale, i, j, anchor) is also the
/// flat storage order and the tie-break order of [`select_best`](super::select_best).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub scale: usize,
    /// Column.
    pub i: u32,
    /// Row.
    pub j: u32,
    pub anchor: usize,
}

/// Grid geometry of all scales for one input size.
///
/// Inputs that are not multiples of 32 are zero-extended on the right and
/// bottom; `pad_origin` is the pixel position of the original image's top
/// left corner inside the padded input and is subtracted when decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub input_size: [u32; 2],
    pub padded_size: [u32; 2],
    pub pad_origin: [f64; 2],
    pub scales: Vec<ScaleLayout>,
}

impl GridLayout {
    pub fn new(image_size: [u32; 2], anchors: &AnchorSet) -> Result<Self, CodecError> {
        let [w, h] = image_size;
        if w == 0 || h == 0 {
            return Err(CodecError::InvalidSize(format!("image size {w}x{h}")));
        }
        if anchors.0.len() != STRIDES.len() {
            return Err(CodecError::InvalidSize(format!(
                "expected anchors for {} scales, got {}",
                STRIDES.len(),
                anchors.0.len()
            )));
        }
        if anchors.0.iter().flatten().flatten().any(|v| !(*v > 0.0)) {
            return Err(CodecError::InvalidSize("anchor sizes must be positive".into()));
        }
        if anchors.0.iter().any(|a| a.is_empty()) {
            return Err(CodecError::InvalidSize("each scale needs an anchor".into()));
        }
        let coarsest = *STRIDES.last().unwrap();
        let pad = |v: u32| v.div_ceil(coarsest) * coarsest;
        let padded_size = [pad(w), pad(h)];
        let scales = STRIDES
            .iter()
            .zip(&anchors.0)
            .map(|(&stride, anchors)| ScaleLayout {
                stride,
                width: padded_size[0] / stride,
                height: padded_size[1] / stride,
                anchors: anchors.clone(),
            })
            .collect();
        Ok(Self {
            input_size: image_size,
            padded_size,
            pad_origin: [0.0, 0.0],
            scales,
        })
    }

    pub fn total_predictions(&self) -> usize {
        self.scales.iter().map(ScaleLayout::predictions).sum()
    }

    fn scale_offset(&self, scale: usize) -> usize {
        self.scales[..scale].iter().map(ScaleLayout::predictions).sum()
    }

    /// Position of `index` in flat storage, or `None` when out of range.
    pub fn flat_index(&self, index: &CellIndex) -> Option<usize> {
        let s = self.scales.get(index.scale)?;
        if index.i >= s.width || index.j >= s.height || index.anchor >= s.anchors.len() {
            return None;
        }
        let cell = index.i as usize * s.height as usize + index.j as usize;
        Some(self.scale_offset(index.scale) + cell * s.anchors.len() + index.anchor)
    }

    pub fn cell_index(&self, mut flat: usize) -> Option<CellIndex> {
        for (scale, s) in self.scales.iter().enumerate() {
            if flat < s.predictions() {
                let n_a = s.anchors.len();
                let cell = flat / n_a;
                return Some(CellIndex {
                    scale,
                    i: (cell / s.height as usize) as u32,
                    j: (cell % s.height as usize) as u32,
                    anchor: flat % n_a,
                });
            }
            flat -= s.predictions();
        }
        None
    }

    /// Grid coordinates → pixel coordinates of the original image.
    pub fn grid_to_pixel(&self, scale: usize, g: [f64; 2]) -> [f64; 2] {
        let stride = f64::from(self.scales[scale].stride);
        [g[0] * stride - self.pad_origin[0], g[1] * stride - self.pad_origin[1]]
    }

    pub fn pixel_to_grid(&self, scale: usize, p: [f64; 2]) -> [f64; 2] {
        let stride = f64::from(self.scales[scale].stride);
        [(p[0] + self.pad_origin[0]) / stride, (p[1] + self.pad_origin[1]) / stride]
    }
}
