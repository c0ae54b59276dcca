//! Block motion estimation and lossless quadtree coding of motion-vector
//! fields. Contiguous blocks of a field frequently share one displacement,
//! so fields cluster well under an equality-only merge; the tree also
//! carries the inter/intra decision in its terminal nodes, and a two-frame
//! variant merges vectors across time at the last level.

use std::fmt;

use crate::format::{BitReader, BitWriter, FormatError};
use crate::image::GrayImage;
use crate::quadtree::{self, Forest, QuadTree};

/// Quadtree root regions span 64x64 pels for every motion block size.
pub const ROOT_REGION_PELS: u32 = 64;
pub const MAX_SEARCH_RANGE: u32 = 15;
/// Placeholder grey for intra blocks in residual-free reconstructions.
pub const INTRA_FILL: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };
}

/// Frame and grid geometry shared by every field coder. The raster is
/// padded to a multiple of the 64-pel root region, so the block grid
/// always tiles into whole root regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldGeometry {
    pub width: u32,
    pub height: u32,
    pub block_size: u32,
    pub search_range: u32,
}

impl FieldGeometry {
    pub fn new(
        width: u32,
        height: u32,
        block_size: u32,
        search_range: u32,
    ) -> Result<Self, MotionError> {
        if !matches!(block_size, 8 | 16) {
            return Err(MotionError::BadBlockSize(block_size));
        }
        if search_range > MAX_SEARCH_RANGE {
            return Err(MotionError::BadSearchRange(search_range));
        }
        Ok(Self {
            width,
            height,
            block_size,
            search_range,
        })
    }

    pub fn padded_width(&self) -> u32 {
        self.width.div_ceil(ROOT_REGION_PELS) * ROOT_REGION_PELS
    }

    pub fn padded_height(&self) -> u32 {
        self.height.div_ceil(ROOT_REGION_PELS) * ROOT_REGION_PELS
    }

    pub fn cols(&self) -> usize {
        (self.padded_width() / self.block_size) as usize
    }

    pub fn rows(&self) -> usize {
        (self.padded_height() / self.block_size) as usize
    }

    pub fn block_count(&self) -> usize {
        self.cols() * self.rows()
    }

    /// Tree depth: 3 levels for 16-pel blocks (16..64), 4 for 8-pel (8..64).
    pub fn levels(&self) -> u32 {
        (ROOT_REGION_PELS / self.block_size).trailing_zeros() + 1
    }

    /// Bits per stored vector component: ceil(log2(2R+1)).
    pub fn component_bits(&self) -> u32 {
        let n = 2 * self.search_range + 1;
        if n <= 1 {
            0
        } else {
            32 - (n - 1).leading_zeros()
        }
    }

    pub fn raw_field_bits(&self) -> u64 {
        self.block_count() as u64 * 2 * self.component_bits() as u64
    }
}

/// Per-block displacement vectors over a frame pair, raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionField {
    pub geometry: FieldGeometry,
    pub vectors: Vec<MotionVector>,
}

impl MotionField {
    pub fn new(geometry: FieldGeometry, vectors: Vec<MotionVector>) -> Result<Self, MotionError> {
        if vectors.len() != geometry.block_count() {
            return Err(MotionError::GeometryMismatch {
                expected: geometry.block_count(),
                got: vectors.len(),
            });
        }
        let r = geometry.search_range as i32;
        for v in &vectors {
            if v.dx.abs() > r || v.dy.abs() > r {
                return Err(MotionError::ComponentOutOfRange {
                    dx: v.dx,
                    dy: v.dy,
                    range: r,
                });
            }
        }
        Ok(Self { geometry, vectors })
    }

    pub fn vector(&self, bx: usize, by: usize) -> MotionVector {
        self.vectors[by * self.geometry.cols() + bx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMode {
    Inter,
    Intra,
}

/// Per-block inter/intra decisions with the same geometry as the field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeMap {
    pub modes: Vec<BlockMode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MotionError {
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    BadBlockSize(u32),
    BadSearchRange(u32),
    ComponentOutOfRange { dx: i32, dy: i32, range: i32 },
    GeometryMismatch { expected: usize, got: usize },
}

impl fmt::Display for MotionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { a, b } => {
                write!(
                    f,
                    "frame dimensions differ: {}x{} vs {}x{}",
                    a.0, a.1, b.0, b.1
                )
            }
            Self::BadBlockSize(s) => write!(f, "motion block size {s} not in {{8, 16}}"),
            Self::BadSearchRange(r) => write!(f, "search range {r} exceeds {MAX_SEARCH_RANGE}"),
            Self::ComponentOutOfRange { dx, dy, range } => {
                write!(f, "vector ({dx},{dy}) outside search range {range}")
            }
            Self::GeometryMismatch { expected, got } => {
                write!(f, "expected {expected} blocks for this geometry, got {got}")
            }
        }
    }
}

impl std::error::Error for MotionError {}

// ---------------------------------------------------------------------------
// Estimation

/// Sum of absolute differences between two same-sized square blocks.
pub fn sad(a: &GrayImage, ax: u32, ay: u32, b: &GrayImage, bx: u32, by: u32, size: u32) -> u32 {
    let mut total = 0u32;
    for row in 0..size {
        let ra = &a.row(ay + row)[ax as usize..(ax + size) as usize];
        let rb = &b.row(by + row)[bx as usize..(bx + size) as usize];
        for (pa, pb) in ra.iter().zip(rb) {
            total += (*pa as i32 - *pb as i32).unsigned_abs();
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn sad_bounded(
    cur: &GrayImage,
    reference: &GrayImage,
    x0: u32,
    y0: u32,
    dx: i32,
    dy: i32,
    size: u32,
    cutoff: u32,
) -> u32 {
    let rx = (x0 as i32 + dx) as u32;
    let ry = (y0 as i32 + dy) as u32;
    let mut total = 0u32;
    for row in 0..size {
        let rc = &cur.row(y0 + row)[x0 as usize..(x0 + size) as usize];
        let rr = &reference.row(ry + row)[rx as usize..(rx + size) as usize];
        for (pc, pr) in rc.iter().zip(rr) {
            total += (*pc as i32 - *pr as i32).unsigned_abs();
        }
        if total > cutoff {
            return total;
        }
    }
    total
}

/// Exhaustive block matching: per block, the in-bounds candidate within
/// +-R minimizing SAD wins; ties go to the smaller |dx|+|dy|, then to
/// scan order (dy outer, dx inner). The prediction convention is
/// predicted(x, y) = ref(x + dx, y + dy).
pub fn full_search(
    reference: &GrayImage,
    current: &GrayImage,
    block_size: u32,
    search_range: u32,
) -> Result<MotionField, MotionError> {
    if reference.width() != current.width() || reference.height() != current.height() {
        return Err(MotionError::DimensionMismatch {
            a: (reference.width(), reference.height()),
            b: (current.width(), current.height()),
        });
    }
    let geometry = FieldGeometry::new(current.width(), current.height(), block_size, search_range)?;
    let reference = reference.pad_to_multiple(ROOT_REGION_PELS);
    let current = current.pad_to_multiple(ROOT_REGION_PELS);
    let (pw, ph) = (current.width() as i32, current.height() as i32);
    let r = search_range as i32;
    let bs = block_size as i32;

    let mut vectors = Vec::with_capacity(geometry.block_count());
    for by in 0..geometry.rows() {
        for bx in 0..geometry.cols() {
            let x0 = bx as u32 * block_size;
            let y0 = by as u32 * block_size;
            let mut best = MotionVector::ZERO;
            let mut best_sad = u32::MAX;
            let mut best_cost = i32::MAX;
            for dy in -r..=r {
                let ry = y0 as i32 + dy;
                if ry < 0 || ry + bs > ph {
                    continue;
                }
                for dx in -r..=r {
                    let rx = x0 as i32 + dx;
                    if rx < 0 || rx + bs > pw {
                        continue;
                    }
                    let s = sad_bounded(&current, &reference, x0, y0, dx, dy, block_size, best_sad);
                    let cost = dx.abs() + dy.abs();
                    if s < best_sad || (s == best_sad && cost < best_cost) {
                        best = MotionVector { dx, dy };
                        best_sad = s;
                        best_cost = cost;
                    }
                }
            }
            vectors.push(best);
        }
    }
    Ok(MotionField { geometry, vectors })
}

/// Marks a block intra when the motion-compensated prediction misses by
/// more than `threshold` SAD per pel.
pub fn decide_modes(
    current: &GrayImage,
    reference: &GrayImage,
    field: &MotionField,
    threshold: f64,
) -> ModeMap {
    let reference = reference.pad_to_multiple(ROOT_REGION_PELS);
    let current = current.pad_to_multiple(ROOT_REGION_PELS);
    let geom = &field.geometry;
    let bs = geom.block_size;
    let pels = (bs * bs) as f64;
    let mut modes = Vec::with_capacity(field.vectors.len());
    for by in 0..geom.rows() {
        for bx in 0..geom.cols() {
            let v = field.vector(bx, by);
            let x0 = bx as u32 * bs;
            let y0 = by as u32 * bs;
            let rx = (x0 as i32 + v.dx) as u32;
            let ry = (y0 as i32 + v.dy) as u32;
            let s = sad(&current, x0, y0, &reference, rx, ry, bs);
            modes.push(if s as f64 / pels > threshold {
                BlockMode::Intra
            } else {
                BlockMode::Inter
            });
        }
    }
    ModeMap { modes }
}

/// Residual-free reconstruction: inter blocks are copied from the
/// reference at their displacement; intra blocks (when a mode map is
/// given) take the mid-grey placeholder, since their content is coded
/// elsewhere.
pub fn motion_compensate(
    reference: &GrayImage,
    field: &MotionField,
    modes: Option<&ModeMap>,
) -> GrayImage {
    let geom = &field.geometry;
    let padded = reference.pad_to_multiple(ROOT_REGION_PELS);
    let (pw, ph) = (padded.width(), padded.height());
    let bs = geom.block_size;
    let mut pixels = vec![0u8; pw as usize * ph as usize];
    for by in 0..geom.rows() {
        for bx in 0..geom.cols() {
            let intra = modes
                .map(|m| m.modes[by * geom.cols() + bx] == BlockMode::Intra)
                .unwrap_or(false);
            let v = field.vector(bx, by);
            for y in 0..bs {
                for x in 0..bs {
                    let ox = bx as u32 * bs + x;
                    let oy = by as u32 * bs + y;
                    let pel = if intra {
                        INTRA_FILL
                    } else {
                        let sx = (ox as i32 + v.dx).clamp(0, pw as i32 - 1) as u32;
                        let sy = (oy as i32 + v.dy).clamp(0, ph as i32 - 1) as u32;
                        padded.get(sx, sy)
                    };
                    pixels[oy as usize * pw as usize + ox as usize] = pel;
                }
            }
        }
    }
    let full = GrayImage::new(pw, ph, pixels).unwrap();
    crop(&full, geom.width, geom.height)
}

fn crop(img: &GrayImage, width: u32, height: u32) -> GrayImage {
    if img.width() == width && img.height() == height {
        return img.clone();
    }
    let mut pixels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        pixels.extend_from_slice(&img.row(y)[..width as usize]);
    }
    GrayImage::new(width, height, pixels).unwrap()
}

// ---------------------------------------------------------------------------
// Vector serialization helpers

fn write_vector(w: &mut BitWriter, v: MotionVector, range: u32, bits: u32) {
    w.append_bits((v.dx + range as i32) as u32, bits);
    w.append_bits((v.dy + range as i32) as u32, bits);
}

fn read_vector(r: &mut BitReader<'_>, range: u32, bits: u32) -> Result<MotionVector, FormatError> {
    let dx = r.read_bits(bits)? as i32 - range as i32;
    let dy = r.read_bits(bits)? as i32 - range as i32;
    Ok(MotionVector { dx, dy })
}

// ---------------------------------------------------------------------------
// Raw field coding (the no-quadtree baseline)

/// Raster order, each component offset by R into ceil(log2(2R+1)) bits.
pub fn encode_field_raw(field: &MotionField, w: &mut BitWriter) {
    let bits = field.geometry.component_bits();
    for &v in &field.vectors {
        write_vector(w, v, field.geometry.search_range, bits);
    }
}

pub fn decode_field_raw(
    r: &mut BitReader<'_>,
    geometry: FieldGeometry,
) -> Result<MotionField, FormatError> {
    let bits = geometry.component_bits();
    let mut vectors = Vec::with_capacity(geometry.block_count());
    for _ in 0..geometry.block_count() {
        vectors.push(read_vector(r, geometry.search_range, bits)?);
    }
    Ok(MotionField { geometry, vectors })
}

// ---------------------------------------------------------------------------
// Lossless field quadtree (mode 17)

fn equality_forest<P: Clone + PartialEq>(grid: &[P], geometry: &FieldGeometry) -> Forest<P> {
    quadtree::build_forest(
        grid,
        geometry.cols(),
        geometry.rows(),
        geometry.levels(),
        geometry.block_size,
        &mut |leaves: &[P]| leaves[0].clone(),
        &mut |a: &P, b: &P| if a == b { 0.0 } else { 1.0 },
        0.0,
    )
}

/// Merges a region only when every vector in it is identical, so decoding
/// is exact for every field.
pub fn encode_field_qt(field: &MotionField, w: &mut BitWriter) -> Forest<MotionVector> {
    let forest = equality_forest(&field.vectors, &field.geometry);
    let (range, bits) = (field.geometry.search_range, field.geometry.component_bits());
    quadtree::serialize_forest(&forest, w, &mut |w, &v| write_vector(w, v, range, bits));
    forest
}

pub fn decode_field_qt(
    r: &mut BitReader<'_>,
    geometry: FieldGeometry,
) -> Result<MotionField, FormatError> {
    let (range, bits) = (geometry.search_range, geometry.component_bits());
    let forest = quadtree::deserialize_forest(
        r,
        geometry.cols() / root_side(&geometry),
        geometry.rows() / root_side(&geometry),
        geometry.levels(),
        geometry.block_size,
        &mut |r| read_vector(r, range, bits),
    )?;
    Ok(MotionField {
        geometry,
        vectors: forest.expand(),
    })
}

fn root_side(geometry: &FieldGeometry) -> usize {
    1 << (geometry.levels() - 1)
}

// ---------------------------------------------------------------------------
// Joint shape + inter/intra coding (mode 18)

/// Terminal payload of the joint tree: the decision bit plus the vector
/// inter blocks carry. Intra terminals carry no vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodedBlock {
    Inter(MotionVector),
    Intra,
}

/// One tree codes block shape and predictor choice together: a region
/// merges when all blocks share the same mode and, for inter, the same
/// vector. Terminal payload is one mode bit (0 inter, 1 intra) and, for
/// inter, the vector.
pub fn encode_modes_qt(
    field: &MotionField,
    modes: &ModeMap,
    w: &mut BitWriter,
) -> Result<Forest<CodedBlock>, MotionError> {
    if modes.modes.len() != field.vectors.len() {
        return Err(MotionError::GeometryMismatch {
            expected: field.vectors.len(),
            got: modes.modes.len(),
        });
    }
    let grid: Vec<CodedBlock> = field
        .vectors
        .iter()
        .zip(&modes.modes)
        .map(|(&v, &m)| match m {
            BlockMode::Inter => CodedBlock::Inter(v),
            BlockMode::Intra => CodedBlock::Intra,
        })
        .collect();
    let forest = equality_forest(&grid, &field.geometry);
    let (range, bits) = (field.geometry.search_range, field.geometry.component_bits());
    quadtree::serialize_forest(&forest, w, &mut |w, payload| match payload {
        CodedBlock::Inter(v) => {
            w.append_bit(false);
            write_vector(w, *v, range, bits);
        }
        CodedBlock::Intra => w.append_bit(true),
    });
    Ok(forest)
}

/// Recovers the mode map and the vectors of inter blocks; intra blocks
/// decode with the zero vector.
pub fn decode_modes_qt(
    r: &mut BitReader<'_>,
    geometry: FieldGeometry,
) -> Result<(MotionField, ModeMap), FormatError> {
    let (range, bits) = (geometry.search_range, geometry.component_bits());
    let forest = quadtree::deserialize_forest(
        r,
        geometry.cols() / root_side(&geometry),
        geometry.rows() / root_side(&geometry),
        geometry.levels(),
        geometry.block_size,
        &mut |r| {
            if r.read_bit()? {
                Ok(CodedBlock::Intra)
            } else {
                Ok(CodedBlock::Inter(read_vector(r, range, bits)?))
            }
        },
    )?;
    let grid = forest.expand();
    let mut vectors = Vec::with_capacity(grid.len());
    let mut modes = Vec::with_capacity(grid.len());
    for block in grid {
        match block {
            CodedBlock::Inter(v) => {
                vectors.push(v);
                modes.push(BlockMode::Inter);
            }
            CodedBlock::Intra => {
                vectors.push(MotionVector::ZERO);
                modes.push(BlockMode::Intra);
            }
        }
    }
    Ok((MotionField { geometry, vectors }, ModeMap { modes }))
}

// ---------------------------------------------------------------------------
// Two-frame 3D clustering (mode 19)

pub type VectorPair = (MotionVector, MotionVector);

/// One spatial tree spans the fields of frames k-1 and k. An internal
/// terminal requires every vector of the region in both frames to be
/// identical and carries a single payload. Last-level nodes carry a flag:
/// 1 means the two frames agree at that block (one payload), 0 means two
/// payloads, frame k-1 first.
pub fn encode_pair_3d(
    prev: &MotionField,
    cur: &MotionField,
    w: &mut BitWriter,
) -> Result<Forest<VectorPair>, MotionError> {
    if prev.geometry != cur.geometry {
        return Err(MotionError::GeometryMismatch {
            expected: prev.geometry.block_count(),
            got: cur.geometry.block_count(),
        });
    }
    let grid: Vec<VectorPair> = prev
        .vectors
        .iter()
        .zip(&cur.vectors)
        .map(|(&p, &c)| (p, c))
        .collect();
    let geometry = &prev.geometry;
    let forest = quadtree::build_forest(
        &grid,
        geometry.cols(),
        geometry.rows(),
        geometry.levels(),
        geometry.block_size,
        &mut |leaves: &[VectorPair]| leaves[0],
        // Merged regions must be constant across space and time.
        &mut |a: &VectorPair, b: &VectorPair| {
            if a == b && a.0 == a.1 {
                0.0
            } else {
                1.0
            }
        },
        0.0,
    );
    let (range, bits) = (geometry.search_range, geometry.component_bits());
    for tree in &forest.trees {
        serialize_pair_node(&tree.root, 0, tree.levels(), w, range, bits);
    }
    Ok(forest)
}

fn serialize_pair_node(
    node: &crate::quadtree::Node<VectorPair>,
    level: u32,
    levels: u32,
    w: &mut BitWriter,
    range: u32,
    bits: u32,
) {
    use crate::quadtree::Node;
    if level < levels - 1 {
        match node {
            Node::Split(children) => {
                w.append_bit(true);
                for child in children.iter() {
                    serialize_pair_node(child, level + 1, levels, w, range, bits);
                }
            }
            Node::Terminal(pair) => {
                debug_assert_eq!(pair.0, pair.1, "internal terminals are temporally merged");
                w.append_bit(false);
                write_vector(w, pair.0, range, bits);
            }
        }
    } else {
        let Node::Terminal(pair) = node else {
            unreachable!("last-level nodes are always terminal")
        };
        if pair.0 == pair.1 {
            w.append_bit(true);
            write_vector(w, pair.0, range, bits);
        } else {
            w.append_bit(false);
            write_vector(w, pair.0, range, bits);
            write_vector(w, pair.1, range, bits);
        }
    }
}

pub fn decode_pair_3d(
    r: &mut BitReader<'_>,
    geometry: FieldGeometry,
) -> Result<(MotionField, MotionField), FormatError> {
    use crate::quadtree::Node;
    fn read_node(
        r: &mut BitReader<'_>,
        level: u32,
        levels: u32,
        range: u32,
        bits: u32,
    ) -> Result<Node<VectorPair>, FormatError> {
        if level < levels - 1 {
            if r.read_bit()? {
                let tl = read_node(r, level + 1, levels, range, bits)?;
                let tr = read_node(r, level + 1, levels, range, bits)?;
                let bl = read_node(r, level + 1, levels, range, bits)?;
                let br = read_node(r, level + 1, levels, range, bits)?;
                Ok(Node::Split(Box::new([tl, tr, bl, br])))
            } else {
                let v = read_vector(r, range, bits)?;
                Ok(Node::Terminal((v, v)))
            }
        } else if r.read_bit()? {
            let v = read_vector(r, range, bits)?;
            Ok(Node::Terminal((v, v)))
        } else {
            let prev = read_vector(r, range, bits)?;
            let cur = read_vector(r, range, bits)?;
            Ok(Node::Terminal((prev, cur)))
        }
    }

    let (range, bits) = (geometry.search_range, geometry.component_bits());
    let levels = geometry.levels();
    let side = root_side(&geometry);
    let roots = (geometry.cols() / side) * (geometry.rows() / side);
    let mut trees = Vec::with_capacity(roots);
    for _ in 0..roots {
        trees.push(QuadTree::from_parts(
            levels,
            read_node(r, 0, levels, range, bits)?,
        ));
    }
    let forest = Forest::from_trees(
        trees,
        geometry.cols() / side,
        geometry.rows() / side,
        levels,
        geometry.block_size,
    );
    let grid = forest.expand();
    let prev = grid.iter().map(|p| p.0).collect();
    let cur = grid.iter().map(|p| p.1).collect();
    Ok((
        MotionField {
            geometry,
            vectors: prev,
        },
        MotionField {
            geometry,
            vectors: cur,
        },
    ))
}
