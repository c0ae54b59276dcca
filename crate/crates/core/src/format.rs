//! Bit-exact container layout and MSB-first bit I/O.
//!
//! A coded file is a fixed header followed by length-prefixed bit sections:
//!
//! ```text
//! "QTR1"  version:u8  mode:u8  width:u16be  height:u16be  params...
//! then per section: bit_count:u32be  ceil(bit_count/8) payload bytes
//! ```
//!
//! Bits are packed MSB-first and sections are zero-padded to a byte
//! boundary. Compression accounting sums the declared section bit counts
//! only; header and length prefixes are excluded.

use std::fmt;

pub const MAGIC: [u8; 4] = *b"QTR1";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Btc = 0,
    BtcQt = 1,
    Sn2 = 2,
    Sn2Qt = 3,
    MvfRaw = 16,
    MvfQt = 17,
    MvfModeQt = 18,
    Mvf3dQt = 19,
}

impl Mode {
    pub fn from_byte(b: u8) -> Option<Mode> {
        Some(match b {
            0 => Mode::Btc,
            1 => Mode::BtcQt,
            2 => Mode::Sn2,
            3 => Mode::Sn2Qt,
            16 => Mode::MvfRaw,
            17 => Mode::MvfQt,
            18 => Mode::MvfModeQt,
            19 => Mode::Mvf3dQt,
            _ => return None,
        })
    }

    /// Fixed number of bit sections each mode carries.
    pub fn section_count(self) -> usize {
        match self {
            Mode::BtcQt => 3,
            Mode::Sn2Qt => 2,
            _ => 1,
        }
    }

    pub fn is_motion(self) -> bool {
        matches!(
            self,
            Mode::MvfRaw | Mode::MvfQt | Mode::MvfModeQt | Mode::Mvf3dQt
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Btc => "btc",
            Mode::BtcQt => "btcq",
            Mode::Sn2 => "sn2",
            Mode::Sn2Qt => "sn2q",
            Mode::MvfRaw => "mvf-raw",
            Mode::MvfQt => "mvf-qt",
            Mode::MvfModeQt => "mvf-modeqt",
            Mode::Mvf3dQt => "mvf-3d",
        };
        f.write_str(name)
    }
}

/// Mode-specific header bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Params {
    None,
    /// Grey-level and bit-plane merge thresholds (modes 1 and 3).
    Thresholds {
        mad: u8,
        mbd: u8,
    },
    /// Motion geometry (modes 16, 17, 19).
    Motion {
        block_size: u8,
        search_range: u8,
    },
    /// Motion geometry plus the inter/intra decision threshold in
    /// per-pel SAD units, fixed point with 8 fraction bits (mode 18).
    MotionMode {
        block_size: u8,
        search_range: u8,
        intra_threshold_q8: u16,
    },
}

impl Params {
    fn matches(self, mode: Mode) -> bool {
        matches!(
            (mode, self),
            (Mode::Btc | Mode::Sn2, Params::None)
                | (Mode::BtcQt | Mode::Sn2Qt, Params::Thresholds { .. })
                | (
                    Mode::MvfRaw | Mode::MvfQt | Mode::Mvf3dQt,
                    Params::Motion { .. }
                )
                | (Mode::MvfModeQt, Params::MotionMode { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    BadMagic,
    BadVersion(u8),
    UnknownMode(u8),
    /// Ran out of bytes while parsing the named element.
    Truncated(&'static str),
    /// Wrong number of sections handed to the writer for the mode.
    SectionCount {
        expected: usize,
        got: usize,
    },
    /// Params variant does not belong to the mode.
    ParamsMismatch,
    /// Bytes left over after the last section.
    TrailingData(usize),
    /// A bit read ran past the end of the stream.
    BitOverrun,
    /// A decoder finished at the wrong bit offset for the declared count.
    SectionBitMismatch {
        declared: u32,
        consumed: usize,
    },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadMagic => write!(f, "bad magic (expected QTR1)"),
            Self::BadVersion(v) => write!(f, "unsupported container version {v}"),
            Self::UnknownMode(m) => write!(f, "unknown mode byte {m}"),
            Self::Truncated(what) => write!(f, "container truncated while reading {what}"),
            Self::SectionCount { expected, got } => {
                write!(f, "mode expects {expected} sections, got {got}")
            }
            Self::ParamsMismatch => write!(f, "params do not match the container mode"),
            Self::TrailingData(n) => write!(f, "{n} trailing bytes after the last section"),
            Self::BitOverrun => write!(f, "bit read past end of section"),
            Self::SectionBitMismatch { declared, consumed } => {
                write!(
                    f,
                    "section declared {declared} bits but decoder consumed {consumed}"
                )
            }
        }
    }
}

impl std::error::Error for FormatError {}

/// One length-prefixed payload: a bit count plus its zero-padded bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    bit_len: u32,
    bytes: Vec<u8>,
}

impl Section {
    pub fn bit_len(&self) -> u32 {
        self.bit_len
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub mode: Mode,
    pub width: u16,
    pub height: u16,
    pub params: Params,
    pub sections: Vec<Section>,
}

impl Container {
    /// Total coded payload in bits; this is the figure compression ratios
    /// are computed from.
    pub fn coded_bits(&self) -> u64 {
        self.sections.iter().map(|s| s.bit_len as u64).sum()
    }
}

// ---------------------------------------------------------------------------
// Bit cursors

/// MSB-first bit packer.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append_bit(&mut self, bit: bool) {
        let offset = self.bit_len % 8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 1 << (7 - offset);
        }
        self.bit_len += 1;
    }

    /// Appends the low `count` bits of `value`, most significant first.
    pub fn append_bits(&mut self, value: u32, count: u32) {
        assert!(count <= 32);
        debug_assert!(
            count == 32 || value < (1u32 << count),
            "value wider than count"
        );
        for i in (0..count).rev() {
            self.append_bit((value >> i) & 1 == 1);
        }
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn into_section(self) -> Section {
        Section {
            bit_len: self.bit_len as u32,
            bytes: self.bytes,
        }
    }
}

/// MSB-first bit cursor over a section payload.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: usize,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bit_len: usize) -> Self {
        debug_assert!(bit_len <= bytes.len() * 8);
        Self {
            bytes,
            bit_len,
            pos: 0,
        }
    }

    pub fn from_section(section: &'a Section) -> Self {
        Self::new(&section.bytes, section.bit_len as usize)
    }

    pub fn read_bit(&mut self) -> Result<bool, FormatError> {
        if self.pos >= self.bit_len {
            return Err(FormatError::BitOverrun);
        }
        let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, count: u32) -> Result<u32, FormatError> {
        assert!(count <= 32);
        let mut value = 0u32;
        for _ in 0..count {
            value = (value << 1) | self.read_bit()? as u32;
        }
        Ok(value)
    }

    /// Bits consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bit_len - self.pos
    }
}

// ---------------------------------------------------------------------------
// Container serialization

pub fn write_container(c: &Container) -> Result<Vec<u8>, FormatError> {
    if !c.params.matches(c.mode) {
        return Err(FormatError::ParamsMismatch);
    }
    let expected = c.mode.section_count();
    if c.sections.len() != expected {
        return Err(FormatError::SectionCount {
            expected,
            got: c.sections.len(),
        });
    }
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(c.mode as u8);
    out.extend_from_slice(&c.width.to_be_bytes());
    out.extend_from_slice(&c.height.to_be_bytes());
    match c.params {
        Params::None => {}
        Params::Thresholds { mad, mbd } => out.extend_from_slice(&[mad, mbd]),
        Params::Motion {
            block_size,
            search_range,
        } => {
            out.extend_from_slice(&[block_size, search_range]);
        }
        Params::MotionMode {
            block_size,
            search_range,
            intra_threshold_q8,
        } => {
            out.extend_from_slice(&[block_size, search_range]);
            out.extend_from_slice(&intra_threshold_q8.to_be_bytes());
        }
    }
    for section in &c.sections {
        debug_assert_eq!(section.bytes.len(), (section.bit_len as usize).div_ceil(8));
        out.extend_from_slice(&section.bit_len.to_be_bytes());
        out.extend_from_slice(&section.bytes);
    }
    Ok(out)
}

pub fn parse_container(bytes: &[u8]) -> Result<Container, FormatError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize, what: &'static str| -> Result<&[u8], FormatError> {
        if *pos + n > bytes.len() {
            return Err(FormatError::Truncated(what));
        }
        let slice = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(slice)
    };

    if take(&mut pos, 4, "magic")? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = take(&mut pos, 1, "version")?[0];
    if version != VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let mode_byte = take(&mut pos, 1, "mode")?[0];
    let mode = Mode::from_byte(mode_byte).ok_or(FormatError::UnknownMode(mode_byte))?;
    let width = u16::from_be_bytes(take(&mut pos, 2, "width")?.try_into().unwrap());
    let height = u16::from_be_bytes(take(&mut pos, 2, "height")?.try_into().unwrap());

    let params = match mode {
        Mode::Btc | Mode::Sn2 => Params::None,
        Mode::BtcQt | Mode::Sn2Qt => {
            let p = take(&mut pos, 2, "thresholds")?;
            Params::Thresholds {
                mad: p[0],
                mbd: p[1],
            }
        }
        Mode::MvfRaw | Mode::MvfQt | Mode::Mvf3dQt => {
            let p = take(&mut pos, 2, "motion params")?;
            Params::Motion {
                block_size: p[0],
                search_range: p[1],
            }
        }
        Mode::MvfModeQt => {
            let p = take(&mut pos, 4, "motion params")?;
            Params::MotionMode {
                block_size: p[0],
                search_range: p[1],
                intra_threshold_q8: u16::from_be_bytes([p[2], p[3]]),
            }
        }
    };

    let mut sections = Vec::with_capacity(mode.section_count());
    for _ in 0..mode.section_count() {
        let bit_len = u32::from_be_bytes(take(&mut pos, 4, "section length")?.try_into().unwrap());
        let byte_len = (bit_len as usize).div_ceil(8);
        let payload = take(&mut pos, byte_len, "section payload")?.to_vec();
        sections.push(Section {
            bit_len,
            bytes: payload,
        });
    }
    if pos != bytes.len() {
        return Err(FormatError::TrailingData(bytes.len() - pos));
    }
    Ok(Container {
        mode,
        width,
        height,
        params,
        sections,
    })
}
