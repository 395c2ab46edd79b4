//! Tile discretization of image observations: the image is divided into a
//! grid of tiles and each tile's mean pixel intensity (over all pixels and
//! channels) becomes one quantized feature value.

use super::{Image, SimulatorError};
use crate::novelty::{FeatureSchema, FeatureVector};

/// Shape and quantization of the tile feature grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileFeatureMap {
    rows: usize,
    cols: usize,
    quantization_levels: u32,
    schema: FeatureSchema,
}

impl TileFeatureMap {
    pub fn new(rows: usize, cols: usize, quantization_levels: u32) -> Self {
        assert!(rows >= 1 && cols >= 1, "tile grid must be nonempty");
        assert!(
            (1..=256).contains(&quantization_levels),
            "quantization levels must be in 1..=256"
        );
        let schema = FeatureSchema::uniform("tile", rows * cols, quantization_levels);
        Self {
            rows,
            cols,
            quantization_levels,
            schema,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn quantization_levels(&self) -> u32 {
        self.quantization_levels
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    /// Pixel-row boundaries of each tile row: tile r spans
    /// [start(r), start(r+1)), with remainder pixels folded into the last
    /// tile.
    pub fn row_bounds(&self, height: usize) -> Vec<usize> {
        Self::bounds(height, self.rows)
    }

    pub fn col_bounds(&self, width: usize) -> Vec<usize> {
        Self::bounds(width, self.cols)
    }

    fn bounds(extent: usize, tiles: usize) -> Vec<usize> {
        let size = (extent / tiles).max(1);
        let mut out: Vec<usize> = (0..tiles).map(|t| (t * size).min(extent)).collect();
        out.push(extent);
        out
    }

    pub fn quantize(&self, mean: f64) -> u32 {
        let q = self.quantization_levels;
        (((mean * q as f64) / 256.0).floor() as u32).min(q - 1)
    }
}

/// Per tile, the mean intensity over all covered pixels and channels,
/// quantized to floor(mean·q/256) and clamped to [0, q−1]. Features are
/// emitted in row-major tile order.
pub fn tile_discretize(
    image: &Image,
    map: &TileFeatureMap,
) -> Result<FeatureVector, SimulatorError> {
    if image.height == 0 || image.width == 0 {
        return Err(SimulatorError::EmptyImage);
    }
    let row_bounds = map.row_bounds(image.height);
    let col_bounds = map.col_bounds(image.width);
    let mut values = Vec::with_capacity(map.rows() * map.cols());
    for tr in 0..map.rows() {
        for tc in 0..map.cols() {
            let (r0, r1) = (row_bounds[tr], row_bounds[tr + 1]);
            let (c0, c1) = (col_bounds[tc], col_bounds[tc + 1]);
            let mut total: u64 = 0;
            let mut count: u64 = 0;
            for r in r0..r1 {
                for c in c0..c1 {
                    for ch in 0..image.channels {
                        total += image.get(r, c, ch) as u64;
                        count += 1;
                    }
                }
            }
            let mean = if count == 0 {
                0.0
            } else {
                total as f64 / count as f64
            };
            values.push(map.quantize(mean));
        }
    }
    Ok(FeatureVector(values))
}
