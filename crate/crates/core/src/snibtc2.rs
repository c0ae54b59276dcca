//! SNIBTC2: BTC with a decimated bit plane and joint coding of the block
//! statistics. Each 4x4 block costs 14 bits — a 4-bit plane sampled at
//! every other position per axis plus a 10-bit code for (mean, sigma) —
//! for a constant 128:14 compression ratio. The decoder recovers the
//! reconstruction levels from the restored statistics and the plane
//! population, so no grey levels travel in the stream.

use std::fmt;

use crate::btc;
use crate::image::{self, GrayImage};
use crate::quadtree::majority_bits;

/// Fixed payload cost of a coded block: 4 plane bits + 10 code bits.
pub const BITS_PER_BLOCK: u32 = 14;

/// One coded block. `plane4` holds the retained plane bits in MSB-first
/// order of positions (0,0), (0,2), (2,0), (2,2); `joint_code` is
/// `(mean_index << 4) | sigma_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Snibtc2Block {
    pub plane4: u8,
    pub joint_code: u16,
}

/// Reconstruction levels for the 10-bit joint quantizer: 6 bits index a
/// uniform mean lattice, 4 bits index a quadratically companded sigma
/// lattice (sigma mass concentrates near zero in natural images).
pub struct JointCodebook {
    pub mean_levels: [u8; 64],
    pub sigma_levels: [u8; 16],
}

pub const CODEBOOK: JointCodebook = JointCodebook {
    mean_levels: build_mean_levels(),
    sigma_levels: build_sigma_levels(),
};

// mean_levels[j] = round(j * 255 / 63), half-up, in integer arithmetic.
const fn build_mean_levels() -> [u8; 64] {
    let mut out = [0u8; 64];
    let mut j = 0usize;
    while j < 64 {
        out[j] = ((j * 510 + 63) / 126) as u8;
        j += 1;
    }
    out
}

// sigma_levels[i] = round(127.5 * (i/15)^2), half-up, in integer arithmetic.
const fn build_sigma_levels() -> [u8; 16] {
    let mut out = [0u8; 16];
    let mut i = 0usize;
    while i < 16 {
        out[i] = ((i * i * 34 + 30) / 60) as u8;
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sn2Error {
    StatsOutOfRange { mean: f64, sigma: f64 },
    BlockCountMismatch { expected: usize, got: usize },
}

impl fmt::Display for Sn2Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StatsOutOfRange { mean, sigma } => {
                write!(f, "stats out of range: mean {mean}, sigma {sigma}")
            }
            Self::BlockCountMismatch { expected, got } => {
                write!(
                    f,
                    "expected {expected} coded blocks for these dimensions, got {got}"
                )
            }
        }
    }
}

impl std::error::Error for Sn2Error {}

fn nearest_level(levels: &[u8], value: f64) -> usize {
    let mut best = 0usize;
    let mut best_dist = (value - levels[0] as f64).abs();
    for (i, &level) in levels.iter().enumerate().skip(1) {
        let dist = (value - level as f64).abs();
        // Strict improvement only: ties keep the lower index.
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

/// Quantizes block statistics to the 10-bit joint code, nearest level per
/// component, ties to the lower index.
pub fn quantize_joint(mean: f64, sigma: f64) -> Result<u16, Sn2Error> {
    if !(0.0..=255.0).contains(&mean) || !(0.0..=127.5).contains(&sigma) {
        return Err(Sn2Error::StatsOutOfRange { mean, sigma });
    }
    let j = nearest_level(&CODEBOOK.mean_levels, mean) as u16;
    let i = nearest_level(&CODEBOOK.sigma_levels, sigma) as u16;
    Ok((j << 4) | i)
}

pub fn dequantize_joint(code: u16) -> (u8, u8) {
    assert!(code < 1024, "joint codes are 10 bits");
    (
        CODEBOOK.mean_levels[(code >> 4) as usize],
        CODEBOOK.sigma_levels[(code & 15) as usize],
    )
}

/// Keeps the plane bits at (0,0), (0,2), (2,0), (2,2).
pub fn decimate_plane(plane: u16) -> u8 {
    (((plane >> 15) & 1) << 3
        | ((plane >> 13) & 1) << 2
        | ((plane >> 7) & 1) << 1
        | ((plane >> 5) & 1)) as u8
}

/// Replicates each retained bit over its 2x2 cell:
/// bit(r,c) = plane4(r/2, c/2). Replication is a section of decimation,
/// so `decimate_plane(interpolate_plane(p)) == p` for all 16 values.
pub fn interpolate_plane(plane4: u8) -> u16 {
    let mut plane = 0u16;
    for r in 0..4usize {
        for c in 0..4usize {
            let cell = 3 - (2 * (r / 2) + c / 2);
            if (plane4 >> cell) & 1 == 1 {
                plane |= 1 << (15 - (4 * r + c));
            }
        }
    }
    plane
}

pub fn encode_block(block: &[u8]) -> Snibtc2Block {
    let stats = btc::block_stats(block);
    let joint_code = quantize_joint(stats.mean, stats.sigma)
        .expect("stats of an 8-bit block are always in quantizer range");
    Snibtc2Block {
        plane4: decimate_plane(stats.plane),
        joint_code,
    }
}

/// Decodes purely from the 14 coded bits: the plane is re-expanded first
/// so its population q' is known, then the reconstruction levels follow
/// from the restored statistics. q' of 0 or 16 collapses both levels to
/// the restored mean.
pub fn decode_block(coded: &Snibtc2Block) -> [u8; 16] {
    let plane = interpolate_plane(coded.plane4);
    let q = plane.count_ones();
    let (mean, sigma) = dequantize_joint(coded.joint_code);
    let (b, a) = btc::reconstruction_levels(mean as f64, sigma as f64, q, 16);
    let restored = btc::BtcBlock {
        plane,
        a: btc::round_grey(a),
        b: btc::round_grey(b),
    };
    btc::decode_block(&restored)
}

pub fn encode_image(img: &GrayImage) -> Vec<Snibtc2Block> {
    let grid = image::partition(img, btc::BLOCK_DIM, btc::PAD_MULTIPLE)
        .expect("4/32 are always a valid block size and pad multiple");
    grid.blocks().map(encode_block).collect()
}

pub fn decode_image(
    blocks: &[Snibtc2Block],
    true_width: u32,
    true_height: u32,
) -> Result<GrayImage, Sn2Error> {
    let (across, down) = btc::block_grid_dims(true_width, true_height);
    let expected = (across * down) as usize;
    if blocks.len() != expected {
        return Err(Sn2Error::BlockCountMismatch {
            expected,
            got: blocks.len(),
        });
    }
    let tiles = blocks.iter().map(|b| decode_block(b).to_vec()).collect();
    let grid =
        image::BlockGrid::from_blocks(btc::BLOCK_DIM, across, down, true_width, true_height, tiles);
    Ok(image::assemble(&grid))
}

// ---------------------------------------------------------------------------
// Quadtree criteria for the two SNIBTC2 forests

/// Majority vote over the 4 retained bits, exact tie to the top-left leaf.
pub fn plane4_reduce(planes: &[u8]) -> u8 {
    majority_bits(
        planes.iter().map(|&p| p as u32),
        planes.len(),
        planes[0] as u32,
        4,
    ) as u8
}

pub fn plane4_distance(p: u8, q: u8) -> f64 {
    (p ^ q).count_ones() as f64
}

/// Region representative for joint codes: the code nearest the average of
/// the dequantized statistics. Staying on the code lattice keeps every
/// terminal decodable.
pub fn code_reduce(codes: &[u16]) -> u16 {
    let mut mean_sum = 0.0;
    let mut sigma_sum = 0.0;
    for &code in codes {
        let (m, s) = dequantize_joint(code);
        mean_sum += m as f64;
        sigma_sum += s as f64;
    }
    let n = codes.len() as f64;
    quantize_joint(mean_sum / n, (sigma_sum / n).min(127.5))
        .expect("averaged statistics stay in range")
}

/// The clustering criterion compares the restored sigma and mean
/// separately; both must fall within the threshold, so the distance is
/// the larger of the two component gaps.
pub fn code_distance(x: u16, y: u16) -> f64 {
    let (mx, sx) = dequantize_joint(x);
    let (my, sy) = dequantize_joint(y);
    let dm = (mx as f64 - my as f64).abs();
    let ds = (sx as f64 - sy as f64).abs();
    dm.max(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Enumerated oracle: recompute both lattices in floating point.
    #[test]
    fn codebook_matches_direct_evaluation() {
        for j in 0..64usize {
            let expected = (j as f64 * 255.0 / 63.0 + 0.5).floor() as u8;
            assert_eq!(CODEBOOK.mean_levels[j], expected, "mean level {j}");
            if j > 0 {
                assert!(CODEBOOK.mean_levels[j] > CODEBOOK.mean_levels[j - 1]);
            }
        }
        for i in 0..16usize {
            let x = i as f64 / 15.0;
            let expected = (127.5 * x * x + 0.5).floor() as u8;
            assert_eq!(CODEBOOK.sigma_levels[i], expected, "sigma level {i}");
            if i > 0 {
                assert!(CODEBOOK.sigma_levels[i] >= CODEBOOK.sigma_levels[i - 1]);
            }
        }
        assert_eq!(CODEBOOK.sigma_levels[0], 0);
        assert_eq!(CODEBOOK.sigma_levels[15], 128);
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_joint(0.0, 0.0).unwrap(), 0);
        // 128 sits between levels 125 (j=31) and 130 (j=32); 130 is nearer.
        assert_eq!(quantize_joint(128.0, 0.0).unwrap(), 32 << 4);
        assert!(quantize_joint(-1.0, 0.0).is_err());
        assert!(quantize_joint(0.0, 130.0).is_err());
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize_joint(0), (0, 0));
        assert_eq!(dequantize_joint(512), (130, 0));
        assert_eq!(dequantize_joint(1023), (255, 128));
    }

    #[test]
    fn decimate_keeps_the_four_lattice_positions() {
        assert_eq!(decimate_plane(0xffff), 0b1111);
        assert_eq!(decimate_plane(0x8000), 0b1000); // only pel (0,0)
        let only_1_1 = 1u16 << (15 - 5); // pel (1,1): a discarded position
        assert_eq!(decimate_plane(only_1_1), 0b0000);
    }

    #[test]
    fn interpolate_replicates_cells() {
        assert_eq!(interpolate_plane(0b1111), 0xffff);
        // 1001 -> rows 1100, 1100, 0011, 0011
        assert_eq!(interpolate_plane(0b1001), 0b1100_1100_0011_0011);
    }

    #[test]
    fn interpolation_is_a_section_of_decimation() {
        for p4 in 0u8..16 {
            assert_eq!(decimate_plane(interpolate_plane(p4)), p4);
        }
    }

    #[test]
    fn flat_block_decodes_near_its_value() {
        let coded = encode_block(&[100u8; 16]);
        assert_eq!(coded.plane4, 0);
        // nearest mean level to 100 is 101 (j=25), sigma index 0
        assert_eq!(coded.joint_code, 25 << 4);
        let decoded = decode_block(&coded);
        assert_eq!(decoded, [101u8; 16]);
    }

    #[test]
    fn payload_budget_is_14_bits_per_block() {
        let img = GrayImage::flat(512, 512, 7);
        let blocks = encode_image(&img);
        assert_eq!(blocks.len(), 16384);
        let coded_bits = blocks.len() as u64 * BITS_PER_BLOCK as u64;
        assert_eq!(coded_bits, 229376);
        let ratio = (512.0 * 512.0 * 8.0) / coded_bits as f64;
        assert!((ratio - 128.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_plane_populations_collapse_to_the_mean() {
        // q' = 16 is reachable after decimation; both extremes decode flat.
        let full = Snibtc2Block {
            plane4: 0b1111,
            joint_code: (40 << 4) | 7,
        };
        let (mean, _) = dequantize_joint(full.joint_code);
        assert_eq!(decode_block(&full), [mean; 16]);
        let empty = Snibtc2Block {
            plane4: 0b0000,
            joint_code: (40 << 4) | 7,
        };
        assert_eq!(decode_block(&empty), [mean; 16]);
    }

    #[test]
    fn code_distance_compares_components_separately() {
        let x = quantize_joint(100.0, 0.0).unwrap();
        let y = quantize_joint(100.0, 20.0).unwrap();
        // means equal (same level), sigmas 0 vs 20
        assert_eq!(code_distance(x, y), 20.0);
        assert_eq!(code_distance(x, x), 0.0);
    }

    proptest! {
        // Argmin property: the chosen level is at least as close as every
        // other level, and ties resolve to the lower index.
        #[test]
        fn quantizer_picks_the_nearest_level(mean in 0.0f64..=255.0, sigma in 0.0f64..=127.5) {
            let code = quantize_joint(mean, sigma).unwrap();
            let (j, i) = ((code >> 4) as usize, (code & 15) as usize);
            for (k, &level) in CODEBOOK.mean_levels.iter().enumerate() {
                let (d_j, d_k) = ((mean - CODEBOOK.mean_levels[j] as f64).abs(), (mean - level as f64).abs());
                prop_assert!(d_j < d_k || (d_j == d_k && j <= k));
            }
            for (k, &level) in CODEBOOK.sigma_levels.iter().enumerate() {
                let (d_i, d_k) = ((sigma - CODEBOOK.sigma_levels[i] as f64).abs(), (sigma - level as f64).abs());
                prop_assert!(d_i < d_k || (d_i == d_k && i <= k));
            }
        }

        // Re-encoding a decoded block reproduces its 14 bits whenever the
        // code is self-consistent: a non-degenerate plane with a nonzero
        // sigma level and reconstruction levels that did not clamp. The
        // degenerate populations (q' of 0 or 16) erase the plane, and
        // clamping moves the restored statistics off their lattice point.
        #[test]
        fn re_encoding_reconstructions_is_idempotent(block in any::<[u8; 16]>()) {
            let coded = encode_block(&block);
            let plane = interpolate_plane(coded.plane4);
            let q = plane.count_ones();
            let (mean, sigma) = dequantize_joint(coded.joint_code);
            let (raw_b, raw_a) =
                btc::reconstruction_levels(mean as f64, sigma as f64, q, 16);
            let no_clamp = raw_b >= -0.5 && raw_a < 255.5;
            let decoded = decode_block(&coded);
            if (1..=15).contains(&q) && (coded.joint_code & 15) >= 1 && no_clamp {
                prop_assert_eq!(encode_block(&decoded), coded);
            }
            if q == 0 && coded.joint_code & 15 == 0 {
                prop_assert_eq!(encode_block(&decoded), coded);
            }
        }

        #[test]
        fn decoding_is_pure_in_the_14_bits(plane4 in 0u8..16, code in 0u16..1024) {
            let coded = Snibtc2Block { plane4, joint_code: code };
            prop_assert_eq!(decode_block(&coded), decode_block(&coded));
            let decoded = decode_block(&coded);
            let distinct: std::collections::BTreeSet<u8> = decoded.iter().copied().collect();
            prop_assert!(distinct.len() <= 2);
        }
    }
}
