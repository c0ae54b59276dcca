//! Shared fixtures for the integration suites: deterministic synthetic
//! test images and an independent brute-force quadtree oracle.

#![allow(dead_code)]

use qtr_core::image::GrayImage;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn clamp_grey(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// Natural-image stand-in: a smooth gradient background, elliptic and
/// rectangular objects, low-amplitude sensor-like noise everywhere and one
/// strongly textured band. Large homogeneous zones cluster well while the
/// detail regions force splits, which is the mix the codec targets.
pub fn natural_image(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = StdRng::seed_from_u64(seed);
    let (w, h) = (width as i32, height as i32);
    let base: i32 = rng.random_range(60..160);
    let gx: i32 = rng.random_range(-40..=40);
    let gy: i32 = rng.random_range(-40..=40);
    // The integer gradient quantizes into flat plateaus, like the smooth
    // regions of a real 8-bit photograph.
    let mut pixels: Vec<i32> = (0..h)
        .flat_map(|y| (0..w).map(move |x| base + (x * gx) / w + (y * gy) / h))
        .collect();
    let mut textured = vec![false; (w * h) as usize];

    for _ in 0..8 {
        let cx = rng.random_range(0..w);
        let cy = rng.random_range(0..h);
        let rx = rng.random_range(w / 16..w / 3).max(2);
        let ry = rng.random_range(h / 16..h / 3).max(2);
        let value: i32 = rng.random_range(20..235);
        for y in (cy - ry).max(0)..(cy + ry).min(h) {
            for x in (cx - rx).max(0)..(cx + rx).min(w) {
                let nx = (x - cx) as f64 / rx as f64;
                let ny = (y - cy) as f64 / ry as f64;
                if nx * nx + ny * ny <= 1.0 {
                    let i = (y * w + x) as usize;
                    pixels[i] = value + x / 32 + y / 32;
                    textured[i] = true;
                }
            }
        }
    }
    for _ in 0..3 {
        let bw = rng.random_range(w / 12..w / 4);
        let bh = rng.random_range(h / 12..h / 4);
        let x0 = rng.random_range(0..w - bw);
        let y0 = rng.random_range(0..h - bh);
        let value: i32 = rng.random_range(10..245);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                let i = (y * w + x) as usize;
                pixels[i] = value;
                textured[i] = false;
            }
        }
    }

    // Mild grain over the objects and one strongly detailed band; the
    // plateau background stays clean so exact interblock matches exist.
    let band_y0 = rng.random_range(0..h / 2);
    let band_y1 = (band_y0 + h / 8).min(h);
    let out: Vec<u8> = pixels
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let y = i as i32 / w;
            let noise = if (band_y0..band_y1).contains(&y) {
                rng.random_range(-25..=25)
            } else if textured[i] {
                rng.random_range(-2..=2)
            } else {
                0
            };
            clamp_grey(v + noise)
        })
        .collect();
    GrayImage::new(width, height, out).unwrap()
}

/// Lenna-class stand-in: the same composition as `natural_image` plus
/// film-like grain and block-scale shading variation, so per-block
/// statistics sit in the range published for the standard portraits and
/// neighbouring blocks differ enough that only genuinely smooth zones
/// cluster.
pub fn textured_natural_image(
    width: u32,
    height: u32,
    seed: u64,
    grain: i32,
    shading: i32,
) -> GrayImage {
    let base = natural_image(width, height, seed);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let cells_across = (width as usize).div_ceil(4);
    let cells_down = (height as usize).div_ceil(4);
    let cell_offsets: Vec<i32> = (0..cells_across * cells_down)
        .map(|_| rng.random_range(-shading..=shading))
        .collect();
    let pixels = base
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (x, y) = (i % width as usize, i / width as usize);
            let cell = cell_offsets[(y / 4) * cells_across + x / 4];
            clamp_grey(v as i32 + cell + rng.random_range(-grain..=grain))
        })
        .collect();
    GrayImage::new(width, height, pixels).unwrap()
}

/// Random mosaic: flat and gently graded patches of random size over a
/// flat background, plus one small noisy rectangle.
pub fn random_mosaic(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = StdRng::seed_from_u64(seed);
    let (w, h) = (width as i32, height as i32);
    let mut pixels = vec![rng.random_range(0..=255i32); (w * h) as usize];
    for _ in 0..rng.random_range(4..14) {
        let bw = rng.random_range(4..w.max(5));
        let bh = rng.random_range(4..h.max(5));
        let x0 = rng.random_range(0..(w - bw).max(1));
        let y0 = rng.random_range(0..(h - bh).max(1));
        let value: i32 = rng.random_range(0..=255);
        let graded = rng.random_bool(0.3);
        for y in y0..(y0 + bh).min(h) {
            for x in x0..(x0 + bw).min(w) {
                let v = if graded { value + (x - x0) / 4 } else { value };
                pixels[(y * w + x) as usize] = v.clamp(0, 255);
            }
        }
    }
    let bw = (w / 8).max(4);
    let bh = (h / 8).max(4);
    let x0 = rng.random_range(0..(w - bw).max(1));
    let y0 = rng.random_range(0..(h - bh).max(1));
    for y in y0..y0 + bh {
        for x in x0..x0 + bw {
            pixels[(y * w + x) as usize] = rng.random_range(0..=255);
        }
    }
    let out = pixels.into_iter().map(clamp_grey).collect();
    GrayImage::new(width, height, out).unwrap()
}

pub fn noise_image(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = StdRng::seed_from_u64(seed);
    let pixels = (0..width as usize * height as usize)
        .map(|_| rng.random())
        .collect();
    GrayImage::new(width, height, pixels).unwrap()
}

// ---------------------------------------------------------------------------
// Independent quadtree oracle

pub struct OracleResult {
    /// (level, x0, y0) of every terminal, sorted.
    pub terminals: Vec<(u32, usize, usize)>,
    /// Total serialized bits: one structure bit per present node above the
    /// last level plus the payload bits of every terminal.
    pub bits: u64,
}

/// Answers "which regions become terminals and what does the tree cost"
/// by testing every region's merge condition directly against the leaves.
/// No recursion, no sharing with the implementation under test.
pub fn quadtree_oracle<P: Clone>(
    leaves: &[P],
    side: usize,
    reduce: &dyn Fn(&[P]) -> P,
    distance: &dyn Fn(&P, &P) -> f64,
    threshold: f64,
    payload_bits: u64,
) -> OracleResult {
    let levels = side.trailing_zeros() + 1;
    let mergeable = |x0: usize, y0: usize, s: usize| -> bool {
        let mut region = Vec::with_capacity(s * s);
        for y in y0..y0 + s {
            for x in x0..x0 + s {
                region.push(leaves[y * side + x].clone());
            }
        }
        let rep = reduce(&region);
        region.iter().all(|leaf| distance(leaf, &rep) <= threshold)
    };
    let ancestor_merged = |level: u32, x0: usize, y0: usize| -> bool {
        (0..level).any(|al| {
            let s = side >> al;
            mergeable(x0 / s * s, y0 / s * s, s)
        })
    };

    let mut terminals = Vec::new();
    let mut structure_bits = 0u64;
    for level in 0..levels {
        let s = side >> level;
        for y0 in (0..side).step_by(s) {
            for x0 in (0..side).step_by(s) {
                if ancestor_merged(level, x0, y0) {
                    continue; // node does not exist
                }
                if level < levels - 1 {
                    structure_bits += 1;
                }
                if level == levels - 1 || mergeable(x0, y0, s) {
                    terminals.push((level, x0, y0));
                }
            }
        }
    }
    terminals.sort_unstable();
    let bits = structure_bits + terminals.len() as u64 * payload_bits;
    OracleResult { terminals, bits }
}

/// Oracle cost of a whole forest: the grid is tiled into root regions and
/// each region is priced independently.
#[allow(clippy::too_many_arguments)]
pub fn forest_oracle_bits<P: Clone>(
    grid: &[P],
    across: usize,
    down: usize,
    root_side: usize,
    reduce: &dyn Fn(&[P]) -> P,
    distance: &dyn Fn(&P, &P) -> f64,
    threshold: f64,
    payload_bits: u64,
) -> u64 {
    let mut total = 0u64;
    for ry in 0..down / root_side {
        for rx in 0..across / root_side {
            let mut region = Vec::with_capacity(root_side * root_side);
            for y in 0..root_side {
                let base = (ry * root_side + y) * across + rx * root_side;
                region.extend_from_slice(&grid[base..base + root_side]);
            }
            total += quadtree_oracle(
                &region,
                root_side,
                reduce,
                distance,
                threshold,
                payload_bits,
            )
            .bits;
        }
    }
    total
}
