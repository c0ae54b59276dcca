//! Grayscale image and motion-field compression built on block truncation
//! coding, with region quadtrees clustering the redundancy between
//! neighbouring blocks. Small blocks keep detail; homogeneous zones merge
//! into terminals covering up to 64 blocks, raising compression without a
//! new basic coder.
//!
//! The pipelines:
//! - `btc`: moment-preserving two-level coding, 32 bits per 4x4 block.
//! - `snibtc2`: decimated plane + 10-bit joint (mean, sigma) code, 14 bits.
//! - `quadtree`: bounded-error clustering of per-block payloads.
//! - `motion`: full-search estimation and lossless field trees, with
//!   joint inter/intra signaling and a two-frame temporal variant.
//! - `format`: the QTR1 container, bit-exact.
//! - `codec`: mode dispatch gluing the above into files.

pub mod btc;
pub mod codec;
pub mod format;
pub mod image;
pub mod metrics;
pub mod motion;
pub mod quadtree;
pub mod snibtc2;
