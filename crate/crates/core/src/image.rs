//! 8-bit grayscale rasters, binary PGM (P5) input/output, and block grid
//! partitioning with edge-replicated padding.

use std::fmt;

/// An 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

/// A raster cut into square tiles, padded out to a multiple of the
/// requested alignment. The pre-padding dimensions are kept so the
/// padding can be discarded on reassembly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_size: u32,
    pub blocks_across: u32,
    pub blocks_down: u32,
    pub true_width: u32,
    pub true_height: u32,
    blocks: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageError {
    /// Input did not start with the "P5" magic.
    BadMagic,
    /// Header token missing or unparsable.
    BadHeader(&'static str),
    /// Only maxval 255 is supported.
    UnsupportedMaxval(u32),
    /// Pixel payload shorter than width * height.
    Truncated { expected: usize, got: usize },
    /// Pixel vector length does not match the declared dimensions.
    PixelCountMismatch { expected: usize, got: usize },
    /// Block size outside the supported set {4, 8, 16}.
    BadBlockSize(u32),
    /// Padding alignment must be a positive multiple of the block size.
    BadPadMultiple { block_size: u32, pad_multiple: u32 },
    /// Zero-sized images are rejected.
    EmptyImage,
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadMagic => write!(f, "not a binary PGM: missing P5 magic"),
            Self::BadHeader(what) => write!(f, "malformed PGM header: {what}"),
            Self::UnsupportedMaxval(v) => write!(f, "unsupported maxval {v} (only 255)"),
            Self::Truncated { expected, got } => {
                write!(
                    f,
                    "truncated pixel data: expected {expected} bytes, got {got}"
                )
            }
            Self::PixelCountMismatch { expected, got } => {
                write!(f, "pixel count mismatch: expected {expected}, got {got}")
            }
            Self::BadBlockSize(s) => write!(f, "block size {s} not in {{4, 8, 16}}"),
            Self::BadPadMultiple {
                block_size,
                pad_multiple,
            } => write!(
                f,
                "pad multiple {pad_multiple} is not a positive multiple of block size {block_size}"
            ),
            Self::EmptyImage => write!(f, "image has zero width or height"),
        }
    }
}

impl std::error::Error for ImageError {}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage);
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(ImageError::PixelCountMismatch {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn flat(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
            .expect("flat image dimensions must be nonzero")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.pixels[start..start + w]
    }

    /// Grows the raster so both dimensions are multiples of `m`, replicating
    /// the nearest true edge pel into the padded region. A raster already
    /// aligned is returned unchanged.
    pub fn pad_to_multiple(&self, m: u32) -> GrayImage {
        assert!(m > 0, "pad multiple must be positive");
        let pw = self.width.div_ceil(m) * m;
        let ph = self.height.div_ceil(m) * m;
        if pw == self.width && ph == self.height {
            return self.clone();
        }
        let mut pixels = Vec::with_capacity(pw as usize * ph as usize);
        for y in 0..ph {
            let sy = y.min(self.height - 1);
            let row = self.row(sy);
            pixels.extend_from_slice(row);
            let edge = row[self.width as usize - 1];
            pixels.extend(std::iter::repeat_n(edge, (pw - self.width) as usize));
        }
        GrayImage {
            width: pw,
            height: ph,
            pixels,
        }
    }
}

/// Parses a binary PGM (magic "P5", maxval 255). Header tokens may be
/// separated by any whitespace and `#` comments, as produced by common
/// tooling; the pixel payload must hold exactly width * height bytes.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(ImageError::BadMagic);
    }
    let mut pos = 2;
    let width = read_header_int(bytes, &mut pos).ok_or(ImageError::BadHeader("width"))?;
    let height = read_header_int(bytes, &mut pos).ok_or(ImageError::BadHeader("height"))?;
    let maxval = read_header_int(bytes, &mut pos).ok_or(ImageError::BadHeader("maxval"))?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyImage);
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ImageError::BadHeader("missing separator before pixel data"));
    }
    pos += 1;
    let expected = width as usize * height as usize;
    let got = bytes.len() - pos;
    if got < expected {
        return Err(ImageError::Truncated { expected, got });
    }
    GrayImage::new(width, height, bytes[pos..pos + expected].to_vec())
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Option<u32> {
    // Skip whitespace and # comments running to end of line.
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Writes the canonical binary PGM layout: `P5\n<w> <h>\n255\n` followed by
/// the raw pixel rows. One fixed header shape keeps golden files byte-exact.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

/// Cuts `img` into `block_size` x `block_size` tiles after padding both
/// dimensions up to a multiple of `pad_multiple` by edge replication.
/// Tiles are produced in raster order over the padded raster.
pub fn partition(
    img: &GrayImage,
    block_size: u32,
    pad_multiple: u32,
) -> Result<BlockGrid, ImageError> {
    if !matches!(block_size, 4 | 8 | 16) {
        return Err(ImageError::BadBlockSize(block_size));
    }
    if pad_multiple == 0 || !pad_multiple.is_multiple_of(block_size) {
        return Err(ImageError::BadPadMultiple {
            block_size,
            pad_multiple,
        });
    }
    let padded = img.pad_to_multiple(pad_multiple);
    let bs = block_size as usize;
    let blocks_across = padded.width / block_size;
    let blocks_down = padded.height / block_size;
    let mut blocks = Vec::with_capacity((blocks_across * blocks_down) as usize);
    for by in 0..blocks_down {
        for bx in 0..blocks_across {
            let mut tile = Vec::with_capacity(bs * bs);
            for dy in 0..block_size {
                let row = padded.row(by * block_size + dy);
                let x0 = (bx * block_size) as usize;
                tile.extend_from_slice(&row[x0..x0 + bs]);
            }
            blocks.push(tile);
        }
    }
    Ok(BlockGrid {
        block_size,
        blocks_across,
        blocks_down,
        true_width: img.width,
        true_height: img.height,
        blocks,
    })
}

/// Reassembles the tiles and crops the padded region away.
pub fn assemble(grid: &BlockGrid) -> GrayImage {
    let bs = grid.block_size as usize;
    let tw = grid.true_width as usize;
    let th = grid.true_height as usize;
    let mut pixels = vec![0u8; tw * th];
    for by in 0..grid.blocks_down {
        for bx in 0..grid.blocks_across {
            let tile = grid.block(bx, by);
            for dy in 0..bs {
                let y = by as usize * bs + dy;
                if y >= th {
                    break;
                }
                let x0 = bx as usize * bs;
                let run = bs.min(tw.saturating_sub(x0));
                if run == 0 {
                    break;
                }
                pixels[y * tw + x0..y * tw + x0 + run]
                    .copy_from_slice(&tile[dy * bs..dy * bs + run]);
            }
        }
    }
    GrayImage {
        width: grid.true_width,
        height: grid.true_height,
        pixels,
    }
}

impl BlockGrid {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, bx: u32, by: u32) -> &[u8] {
        &self.blocks[(by * self.blocks_across + bx) as usize]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[u8]> {
        self.blocks.iter().map(|b| b.as_slice())
    }

    /// Rebuilds a grid from per-tile payloads produced by a decoder.
    pub fn from_blocks(
        block_size: u32,
        blocks_across: u32,
        blocks_down: u32,
        true_width: u32,
        true_height: u32,
        blocks: Vec<Vec<u8>>,
    ) -> Self {
        assert_eq!(blocks.len(), (blocks_across * blocks_down) as usize);
        Self {
            block_size,
            blocks_across,
            blocks_down,
            true_width,
            true_height,
            blocks,
        }
    }
}
