//! End-to-end pipelines: raster or frame pair in, container out, and back.
//! Every mode's section layout is fixed here; decoders check that each
//! section's declared bit count is consumed exactly.

use std::fmt;

use crate::btc::{self, BtcBlock, BtcError};
use crate::format::{BitReader, BitWriter, Container, FormatError, Mode, Params, Section};
use crate::image::{GrayImage, ImageError};
use crate::metrics;
use crate::motion::{self, FieldGeometry, ModeMap, MotionError, MotionField};
use crate::quadtree::{self, Forest};
use crate::snibtc2::{self, Sn2Error, Snibtc2Block};

/// BTC forests are four levels deep: one root region covers 8x8 blocks,
/// i.e. 32x32 pels.
pub const BTC_TREE_LEVELS: u32 = 4;
const BTC_ROOT_SIDE: usize = 1 << (BTC_TREE_LEVELS - 1);

#[derive(Debug, Clone, PartialEq)]
pub enum CodecError {
    Format(FormatError),
    Image(ImageError),
    Motion(MotionError),
    Btc(BtcError),
    Sn2(Sn2Error),
    /// Container headers store 16-bit dimensions.
    ImageTooLarge {
        width: u32,
        height: u32,
    },
    NotAnImageMode(Mode),
    NotAMotionMode(Mode),
    WrongFrameCount {
        mode: Mode,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Format(e) => e.fmt(f),
            Self::Image(e) => e.fmt(f),
            Self::Motion(e) => e.fmt(f),
            Self::Btc(e) => e.fmt(f),
            Self::Sn2(e) => e.fmt(f),
            Self::ImageTooLarge { width, height } => {
                write!(
                    f,
                    "image {width}x{height} exceeds the 65535-pel container limit"
                )
            }
            Self::NotAnImageMode(m) => write!(f, "mode {m} does not code a still image"),
            Self::NotAMotionMode(m) => write!(f, "mode {m} does not code motion fields"),
            Self::WrongFrameCount {
                mode,
                expected,
                got,
            } => {
                write!(f, "mode {mode} expects {expected} frames, got {got}")
            }
        }
    }
}

impl std::error::Error for CodecError {}

impl From<FormatError> for CodecError {
    fn from(e: FormatError) -> Self {
        Self::Format(e)
    }
}

impl From<ImageError> for CodecError {
    fn from(e: ImageError) -> Self {
        Self::Image(e)
    }
}

impl From<MotionError> for CodecError {
    fn from(e: MotionError) -> Self {
        Self::Motion(e)
    }
}

impl From<BtcError> for CodecError {
    fn from(e: BtcError) -> Self {
        Self::Btc(e)
    }
}

impl From<Sn2Error> for CodecError {
    fn from(e: Sn2Error) -> Self {
        Self::Sn2(e)
    }
}

fn header_dims(img: &GrayImage) -> Result<(u16, u16), CodecError> {
    let width = u16::try_from(img.width()).map_err(|_| CodecError::ImageTooLarge {
        width: img.width(),
        height: img.height(),
    })?;
    let height = u16::try_from(img.height()).map_err(|_| CodecError::ImageTooLarge {
        width: img.width(),
        height: img.height(),
    })?;
    Ok((width, height))
}

fn finish_section(r: &BitReader<'_>, section: &Section) -> Result<(), FormatError> {
    if r.remaining() != 0 {
        return Err(FormatError::SectionBitMismatch {
            declared: section.bit_len(),
            consumed: r.position(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Mode 0: basic BTC, 32 bits per block (plane, a, b)

pub fn encode_btc(img: &GrayImage) -> Result<Container, CodecError> {
    let (width, height) = header_dims(img)?;
    let mut w = BitWriter::new();
    for block in btc::encode_image(img) {
        w.append_bits(block.plane as u32, 16);
        w.append_bits(block.a as u32, 8);
        w.append_bits(block.b as u32, 8);
    }
    Ok(Container {
        mode: Mode::Btc,
        width,
        height,
        params: Params::None,
        sections: vec![w.into_section()],
    })
}

fn decode_btc_payload(c: &Container) -> Result<GrayImage, CodecError> {
    let (across, down) = btc::block_grid_dims(c.width as u32, c.height as u32);
    let section = &c.sections[0];
    let mut r = BitReader::from_section(section);
    let mut blocks = Vec::with_capacity((across * down) as usize);
    for _ in 0..across * down {
        let plane = r.read_bits(16)? as u16;
        let a = r.read_bits(8)? as u8;
        let b = r.read_bits(8)? as u8;
        blocks.push(BtcBlock { plane, a, b });
    }
    finish_section(&r, section)?;
    Ok(btc::decode_image(&blocks, c.width as u32, c.height as u32)?)
}

// ---------------------------------------------------------------------------
// Mode 1: BTC + three independent quadtrees (plane, a, b)

pub fn encode_btc_qt(img: &GrayImage, mad: u8, mbd: u8) -> Result<Container, CodecError> {
    let (width, height) = header_dims(img)?;
    let blocks = btc::encode_image(img);
    let (across, down) = btc::block_grid_dims(img.width(), img.height());
    let sections = btc_qt_sections(&blocks, across as usize, down as usize, mad, mbd);
    Ok(Container {
        mode: Mode::BtcQt,
        width,
        height,
        params: Params::Thresholds { mad, mbd },
        sections: sections.to_vec(),
    })
}

/// Builds the three forests over already-coded blocks; the sweep driver
/// reuses this to avoid recomputing block statistics per grid point.
pub fn btc_qt_sections(
    blocks: &[BtcBlock],
    across: usize,
    down: usize,
    mad: u8,
    mbd: u8,
) -> [Section; 3] {
    let planes: Vec<u16> = blocks.iter().map(|b| b.plane).collect();
    let highs: Vec<u8> = blocks.iter().map(|b| b.a).collect();
    let lows: Vec<u8> = blocks.iter().map(|b| b.b).collect();

    let plane_forest = quadtree::build_forest(
        &planes,
        across,
        down,
        BTC_TREE_LEVELS,
        btc::BLOCK_DIM,
        &mut |ps: &[u16]| quadtree::plane_reduce(ps),
        &mut |&a, &b| quadtree::plane_distance(a, b),
        mbd as f64,
    );
    let mut w = BitWriter::new();
    quadtree::serialize_forest(&plane_forest, &mut w, &mut |w, &p| {
        w.append_bits(p as u32, 16)
    });
    let plane_section = w.into_section();

    [
        plane_section,
        grey_forest_section(&highs, across, down, mad),
        grey_forest_section(&lows, across, down, mad),
    ]
}

fn grey_forest_section(values: &[u8], across: usize, down: usize, mad: u8) -> Section {
    let forest = quadtree::build_forest(
        values,
        across,
        down,
        BTC_TREE_LEVELS,
        btc::BLOCK_DIM,
        &mut |vs: &[u8]| quadtree::grey_reduce(vs),
        &mut |&a, &b| quadtree::grey_distance(a, b),
        mad as f64,
    );
    let mut w = BitWriter::new();
    quadtree::serialize_forest(&forest, &mut w, &mut |w, &v| w.append_bits(v as u32, 8));
    w.into_section()
}

/// Expanded per-block payload grids of a BTC_QT container, in raster
/// order: planes, high levels, low levels.
pub type BtcPayloadGrids = (Vec<u16>, Vec<u8>, Vec<u8>);

pub fn btc_qt_grids(c: &Container) -> Result<BtcPayloadGrids, CodecError> {
    if c.mode != Mode::BtcQt {
        return Err(CodecError::NotAnImageMode(c.mode));
    }
    let (across, down) = btc::block_grid_dims(c.width as u32, c.height as u32);
    let (ra, rd) = (
        across as usize / BTC_ROOT_SIDE,
        down as usize / BTC_ROOT_SIDE,
    );

    let planes = {
        let section = &c.sections[0];
        let mut r = BitReader::from_section(section);
        let forest = quadtree::deserialize_forest(
            &mut r,
            ra,
            rd,
            BTC_TREE_LEVELS,
            btc::BLOCK_DIM,
            &mut |r| Ok(r.read_bits(16)? as u16),
        )?;
        finish_section(&r, section)?;
        forest.expand()
    };
    let mut greys = [Vec::new(), Vec::new()];
    for (i, grey) in greys.iter_mut().enumerate() {
        let section = &c.sections[1 + i];
        let mut r = BitReader::from_section(section);
        let forest = quadtree::deserialize_forest(
            &mut r,
            ra,
            rd,
            BTC_TREE_LEVELS,
            btc::BLOCK_DIM,
            &mut |r| Ok(r.read_bits(8)? as u8),
        )?;
        finish_section(&r, section)?;
        *grey = forest.expand();
    }
    let [highs, lows] = greys;
    Ok((planes, highs, lows))
}

fn decode_btc_qt_payload(c: &Container) -> Result<GrayImage, CodecError> {
    let (planes, highs, lows) = btc_qt_grids(c)?;
    let blocks: Vec<BtcBlock> = planes
        .iter()
        .zip(&highs)
        .zip(&lows)
        .map(|((&plane, &a), &b)| BtcBlock { plane, a, b })
        .collect();
    Ok(btc::decode_image(&blocks, c.width as u32, c.height as u32)?)
}

// ---------------------------------------------------------------------------
// Mode 2: SNIBTC2, 14 bits per block (plane4, joint code)

pub fn encode_sn2(img: &GrayImage) -> Result<Container, CodecError> {
    let (width, height) = header_dims(img)?;
    let mut w = BitWriter::new();
    for block in snibtc2::encode_image(img) {
        w.append_bits(block.plane4 as u32, 4);
        w.append_bits(block.joint_code as u32, 10);
    }
    Ok(Container {
        mode: Mode::Sn2,
        width,
        height,
        params: Params::None,
        sections: vec![w.into_section()],
    })
}

fn decode_sn2_payload(c: &Container) -> Result<GrayImage, CodecError> {
    let (across, down) = btc::block_grid_dims(c.width as u32, c.height as u32);
    let section = &c.sections[0];
    let mut r = BitReader::from_section(section);
    let mut blocks = Vec::with_capacity((across * down) as usize);
    for _ in 0..across * down {
        let plane4 = r.read_bits(4)? as u8;
        let joint_code = r.read_bits(10)? as u16;
        blocks.push(Snibtc2Block { plane4, joint_code });
    }
    finish_section(&r, section)?;
    Ok(snibtc2::decode_image(
        &blocks,
        c.width as u32,
        c.height as u32,
    )?)
}

// ---------------------------------------------------------------------------
// Mode 3: SNIBTC2 + two quadtrees (plane4, joint code)

pub fn encode_sn2_qt(img: &GrayImage, mad: u8, mbd: u8) -> Result<Container, CodecError> {
    let (width, height) = header_dims(img)?;
    let blocks = snibtc2::encode_image(img);
    let (across, down) = btc::block_grid_dims(img.width(), img.height());
    let sections = sn2_qt_sections(&blocks, across as usize, down as usize, mad, mbd);
    Ok(Container {
        mode: Mode::Sn2Qt,
        width,
        height,
        params: Params::Thresholds { mad, mbd },
        sections: sections.to_vec(),
    })
}

pub fn sn2_qt_sections(
    blocks: &[Snibtc2Block],
    across: usize,
    down: usize,
    mad: u8,
    mbd: u8,
) -> [Section; 2] {
    let planes: Vec<u8> = blocks.iter().map(|b| b.plane4).collect();
    let codes: Vec<u16> = blocks.iter().map(|b| b.joint_code).collect();

    let plane_forest = quadtree::build_forest(
        &planes,
        across,
        down,
        BTC_TREE_LEVELS,
        btc::BLOCK_DIM,
        &mut |ps: &[u8]| snibtc2::plane4_reduce(ps),
        &mut |&a, &b| snibtc2::plane4_distance(a, b),
        mbd as f64,
    );
    let mut w = BitWriter::new();
    quadtree::serialize_forest(&plane_forest, &mut w, &mut |w, &p| {
        w.append_bits(p as u32, 4)
    });
    let plane_section = w.into_section();

    let code_forest = quadtree::build_forest(
        &codes,
        across,
        down,
        BTC_TREE_LEVELS,
        btc::BLOCK_DIM,
        &mut |cs: &[u16]| snibtc2::code_reduce(cs),
        &mut |&a, &b| snibtc2::code_distance(a, b),
        mad as f64,
    );
    let mut w = BitWriter::new();
    quadtree::serialize_forest(&code_forest, &mut w, &mut |w, &c| {
        w.append_bits(c as u32, 10)
    });
    [plane_section, w.into_section()]
}

fn decode_sn2_qt_payload(c: &Container) -> Result<GrayImage, CodecError> {
    let (across, down) = btc::block_grid_dims(c.width as u32, c.height as u32);
    let (ra, rd) = (
        across as usize / BTC_ROOT_SIDE,
        down as usize / BTC_ROOT_SIDE,
    );

    let section = &c.sections[0];
    let mut r = BitReader::from_section(section);
    let plane_forest =
        quadtree::deserialize_forest(&mut r, ra, rd, BTC_TREE_LEVELS, btc::BLOCK_DIM, &mut |r| {
            Ok(r.read_bits(4)? as u8)
        })?;
    finish_section(&r, section)?;

    let section = &c.sections[1];
    let mut r = BitReader::from_section(section);
    let code_forest =
        quadtree::deserialize_forest(&mut r, ra, rd, BTC_TREE_LEVELS, btc::BLOCK_DIM, &mut |r| {
            Ok(r.read_bits(10)? as u16)
        })?;
    finish_section(&r, section)?;

    let blocks: Vec<Snibtc2Block> = plane_forest
        .expand()
        .into_iter()
        .zip(code_forest.expand())
        .map(|(plane4, joint_code)| Snibtc2Block { plane4, joint_code })
        .collect();
    Ok(snibtc2::decode_image(
        &blocks,
        c.width as u32,
        c.height as u32,
    )?)
}

// ---------------------------------------------------------------------------
// Image dispatch

pub fn encode_image_mode(
    img: &GrayImage,
    mode: Mode,
    mad: u8,
    mbd: u8,
) -> Result<Container, CodecError> {
    match mode {
        Mode::Btc => encode_btc(img),
        Mode::BtcQt => encode_btc_qt(img, mad, mbd),
        Mode::Sn2 => encode_sn2(img),
        Mode::Sn2Qt => encode_sn2_qt(img, mad, mbd),
        other => Err(CodecError::NotAnImageMode(other)),
    }
}

pub fn decode_image_mode(c: &Container) -> Result<GrayImage, CodecError> {
    match c.mode {
        Mode::Btc => decode_btc_payload(c),
        Mode::BtcQt => decode_btc_qt_payload(c),
        Mode::Sn2 => decode_sn2_payload(c),
        Mode::Sn2Qt => decode_sn2_qt_payload(c),
        other => Err(CodecError::NotAnImageMode(other)),
    }
}

/// Compression accounting for a container against its mode's fixed-rate
/// baseline (4:1 for the BTC family, 128:14 for SNIBTC2).
pub fn compression_report(c: &Container) -> metrics::CompressionReport {
    let baseline = match c.mode {
        Mode::BtcQt => Some(metrics::BTC_BASELINE_RATIO),
        Mode::Sn2Qt => Some(metrics::SN2_BASELINE_RATIO),
        _ => None,
    };
    metrics::compression_report(c.width as u32, c.height as u32, c.coded_bits(), baseline)
}

// ---------------------------------------------------------------------------
// Motion pipelines (modes 16..19)

#[derive(Debug, Clone, PartialEq)]
pub enum MotionDecoded {
    Field(MotionField),
    FieldWithModes(MotionField, ModeMap),
    FieldPair(MotionField, MotionField),
}

/// Frames required on the encoder side: a reference and a current frame,
/// plus one more for the two-field 3D mode.
pub fn frames_required(mode: Mode) -> usize {
    if mode == Mode::Mvf3dQt {
        3
    } else {
        2
    }
}

pub fn encode_motion_mode(
    frames: &[GrayImage],
    mode: Mode,
    block_size: u32,
    search_range: u32,
    intra_threshold: f64,
) -> Result<Container, CodecError> {
    if !mode.is_motion() {
        return Err(CodecError::NotAMotionMode(mode));
    }
    let expected = frames_required(mode);
    if frames.len() != expected {
        return Err(CodecError::WrongFrameCount {
            mode,
            expected,
            got: frames.len(),
        });
    }
    let (width, height) = header_dims(&frames[0])?;
    let field = motion::full_search(&frames[0], &frames[1], block_size, search_range)?;
    let mut w = BitWriter::new();
    let params = match mode {
        Mode::MvfRaw => {
            motion::encode_field_raw(&field, &mut w);
            Params::Motion {
                block_size: block_size as u8,
                search_range: search_range as u8,
            }
        }
        Mode::MvfQt => {
            motion::encode_field_qt(&field, &mut w);
            Params::Motion {
                block_size: block_size as u8,
                search_range: search_range as u8,
            }
        }
        Mode::MvfModeQt => {
            let modes = motion::decide_modes(&frames[1], &frames[0], &field, intra_threshold);
            motion::encode_modes_qt(&field, &modes, &mut w)?;
            Params::MotionMode {
                block_size: block_size as u8,
                search_range: search_range as u8,
                intra_threshold_q8: (intra_threshold * 256.0).round().clamp(0.0, 65535.0) as u16,
            }
        }
        Mode::Mvf3dQt => {
            let next = motion::full_search(&frames[1], &frames[2], block_size, search_range)?;
            motion::encode_pair_3d(&field, &next, &mut w)?;
            Params::Motion {
                block_size: block_size as u8,
                search_range: search_range as u8,
            }
        }
        _ => unreachable!(),
    };
    Ok(Container {
        mode,
        width,
        height,
        params,
        sections: vec![w.into_section()],
    })
}

pub fn decode_motion_mode(c: &Container) -> Result<MotionDecoded, CodecError> {
    let (block_size, search_range) = match c.params {
        Params::Motion {
            block_size,
            search_range,
        } => (block_size, search_range),
        Params::MotionMode {
            block_size,
            search_range,
            ..
        } => (block_size, search_range),
        _ => return Err(CodecError::NotAMotionMode(c.mode)),
    };
    let geometry = FieldGeometry::new(
        c.width as u32,
        c.height as u32,
        block_size as u32,
        search_range as u32,
    )?;
    let section = &c.sections[0];
    let mut r = BitReader::from_section(section);
    let decoded = match c.mode {
        Mode::MvfRaw => MotionDecoded::Field(motion::decode_field_raw(&mut r, geometry)?),
        Mode::MvfQt => MotionDecoded::Field(motion::decode_field_qt(&mut r, geometry)?),
        Mode::MvfModeQt => {
            let (field, modes) = motion::decode_modes_qt(&mut r, geometry)?;
            MotionDecoded::FieldWithModes(field, modes)
        }
        Mode::Mvf3dQt => {
            let (prev, cur) = motion::decode_pair_3d(&mut r, geometry)?;
            MotionDecoded::FieldPair(prev, cur)
        }
        other => return Err(CodecError::NotAMotionMode(other)),
    };
    finish_section(&r, section)?;
    Ok(decoded)
}

/// The quadtree a mode-17 container encodes, for histogram reporting.
pub fn motion_qt_forest(field: &MotionField) -> Forest<motion::MotionVector> {
    let mut w = BitWriter::new();
    motion::encode_field_qt(field, &mut w)
}
