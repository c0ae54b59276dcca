//! Basic block truncation coding over 4x4 blocks: a moment-preserving
//! two-level quantizer. Each block is reduced to a 16-bit plane plus a low
//! and a high reconstruction level chosen so that the restored block keeps
//! the source block's mean and second moment.

use std::fmt;

use crate::image::{self, GrayImage, ImageError};

/// Pels per block side.
pub const BLOCK_DIM: u32 = 4;
/// Pels per block.
pub const BLOCK_PELS: u32 = 16;
/// BTC pipelines pad rasters so quadtree root regions tile them evenly.
pub const PAD_MULTIPLE: u32 = 32;
/// Fixed payload cost of a coded block: 16 plane bits + two 8-bit levels.
pub const BITS_PER_BLOCK: u32 = 32;

/// First and second order statistics of one 4x4 block, plus the bit plane
/// they induce. Sums are taken in exact integer arithmetic before the
/// division so results are bit-reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    pub mean: f64,
    pub second_moment: f64,
    pub sigma: f64,
    /// Plane bits set to 1 (pels strictly above the mean). Always < 16.
    pub q: u32,
    /// Plane size; 16 for 4x4 blocks.
    pub n: u32,
    /// MSB = pel (0,0), row-major.
    pub plane: u16,
}

/// One coded block: bit plane plus the two reconstruction levels.
/// `a` is the high level, `b` the low one; plane bit 1 decodes to `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BtcBlock {
    pub plane: u16,
    pub a: u8,
    pub b: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BtcError {
    BlockCountMismatch { expected: usize, got: usize },
    Image(ImageError),
}

impl fmt::Display for BtcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BlockCountMismatch { expected, got } => {
                write!(
                    f,
                    "expected {expected} coded blocks for these dimensions, got {got}"
                )
            }
            Self::Image(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for BtcError {}

impl From<ImageError> for BtcError {
    fn from(e: ImageError) -> Self {
        Self::Image(e)
    }
}

/// Computes mean, second moment, sigma and the bit plane of a 16-pel block.
/// A plane bit is 1 when its pel is strictly greater than the block mean;
/// ties code as 0.
pub fn block_stats(block: &[u8]) -> BlockStats {
    assert_eq!(block.len(), BLOCK_PELS as usize, "BTC blocks are 4x4");
    let mut sum: u32 = 0;
    let mut sum_sq: u32 = 0;
    for &p in block {
        sum += p as u32;
        sum_sq += (p as u32) * (p as u32);
    }
    let mut plane: u16 = 0;
    for (i, &p) in block.iter().enumerate() {
        // pel > mean, compared exactly: 16*pel > sum.
        if 16 * p as u32 > sum {
            plane |= 1 << (15 - i);
        }
    }
    let mean = sum as f64 / 16.0;
    let second_moment = sum_sq as f64 / 16.0;
    let sigma = (second_moment - mean * mean).max(0.0).sqrt();
    BlockStats {
        mean,
        second_moment,
        sigma,
        q: plane.count_ones(),
        n: BLOCK_PELS,
        plane,
    }
}

/// Unrounded moment-preserving levels `(b, a)` for the given statistics:
/// `b = mean - sigma * sqrt(q / (n - q))`, `a = mean + sigma * sqrt((n - q) / q)`.
/// The degenerate plane counts `q = 0` and `q = n` collapse both levels to
/// the mean, since the corresponding formula divides by zero.
pub fn reconstruction_levels(mean: f64, sigma: f64, q: u32, n: u32) -> (f64, f64) {
    if q == 0 || q == n {
        return (mean, mean);
    }
    let q = q as f64;
    let n = n as f64;
    let b = mean - sigma * (q / (n - q)).sqrt();
    let a = mean + sigma * ((n - q) / q).sqrt();
    (b, a)
}

/// Rounds half-up, then clamps into the 8-bit grey range.
pub(crate) fn round_grey(x: f64) -> u8 {
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_block(block: &[u8]) -> BtcBlock {
    let stats = block_stats(block);
    encode_from_stats(&stats)
}

pub fn encode_from_stats(stats: &BlockStats) -> BtcBlock {
    let (b, a) = reconstruction_levels(stats.mean, stats.sigma, stats.q, stats.n);
    BtcBlock {
        plane: stats.plane,
        a: round_grey(a),
        b: round_grey(b),
    }
}

pub fn decode_block(coded: &BtcBlock) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, pel) in out.iter_mut().enumerate() {
        *pel = if (coded.plane >> (15 - i)) & 1 == 1 {
            coded.a
        } else {
            coded.b
        };
    }
    out
}

/// Codes every 4x4 block of the padded raster, raster order.
pub fn encode_image(img: &GrayImage) -> Vec<BtcBlock> {
    let grid = image::partition(img, BLOCK_DIM, PAD_MULTIPLE)
        .expect("4/32 are always a valid block size and pad multiple");
    grid.blocks().map(encode_block).collect()
}

/// Number of coded blocks a raster of the given true dimensions produces.
pub fn block_grid_dims(true_width: u32, true_height: u32) -> (u32, u32) {
    let pw = true_width.div_ceil(PAD_MULTIPLE) * PAD_MULTIPLE;
    let ph = true_height.div_ceil(PAD_MULTIPLE) * PAD_MULTIPLE;
    (pw / BLOCK_DIM, ph / BLOCK_DIM)
}

pub fn decode_image(
    blocks: &[BtcBlock],
    true_width: u32,
    true_height: u32,
) -> Result<GrayImage, BtcError> {
    let (across, down) = block_grid_dims(true_width, true_height);
    let expected = (across * down) as usize;
    if blocks.len() != expected {
        return Err(BtcError::BlockCountMismatch {
            expected,
            got: blocks.len(),
        });
    }
    let tiles = blocks.iter().map(|b| decode_block(b).to_vec()).collect();
    let grid =
        image::BlockGrid::from_blocks(BLOCK_DIM, across, down, true_width, true_height, tiles);
    Ok(image::assemble(&grid))
}
