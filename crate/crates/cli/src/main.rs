//! qtr: block truncation coding with quadtree interblock redundancy
//! reduction, plus quadtree motion-vector field coding.
//!
//! Data goes to files or stdout; diagnostics go to stderr. Identical
//! inputs and flags produce byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qtr_core::codec::{self, MotionDecoded};
use qtr_core::format::{self, Mode};
use qtr_core::image::{self, GrayImage};
use qtr_core::metrics;
use qtr_core::motion::{BlockMode, MotionField};
use qtr_core::quadtree::LevelHistogram;

#[derive(Parser)]
#[command(
    name = "qtr",
    version,
    about = "Grayscale image and motion-field compression with quadtree block clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a binary PGM into a .qtr container.
    Encode {
        /// Input image (binary PGM, maxval 255).
        input: PathBuf,
        /// Output container path.
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        mode: EncodeMode,
        /// Grey-level clustering threshold (quadtree modes).
        #[arg(long, default_value_t = 5)]
        mad: u8,
        /// Bit-plane clustering threshold (quadtree modes).
        #[arg(long, default_value_t = 6)]
        mbd: u8,
    },
    /// Decode a .qtr container to a PGM, or dump motion fields as text.
    Decode {
        input: PathBuf,
        /// Output path; image modes require it, motion dumps default to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Threshold sweep: one encode+decode per grid point, rows as CSV.
    Sweep {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SweepMode::Btcq)]
        mode: SweepMode,
        #[arg(long, default_value_t = 10)]
        mad_max: u8,
        #[arg(long, default_value_t = 8)]
        mbd_max: u8,
        /// Which threshold to sweep; the other is held at 0. `grid` sweeps both.
        #[arg(long, value_enum, default_value_t = Axis::Mad)]
        axis: Axis,
        /// CSV output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate and code the motion field between frames.
    Motion {
        /// Reference frame (k-1).
        reference: PathBuf,
        /// Current frame (k).
        current: PathBuf,
        /// Following frame (k+1), required by --mode 3d.
        next: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MvMode::Qt)]
        mode: MvMode,
        /// Motion block size in pels (8 or 16).
        #[arg(long, default_value_t = 16)]
        block: u32,
        /// Search range R; vectors span [-R, R] per component.
        #[arg(long, default_value_t = 7)]
        range: u32,
        /// Inter/intra decision threshold in SAD per pel (modeqt only).
        #[arg(long, default_value_t = 8.0)]
        threshold: f64,
        /// Container output path; report only when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Error measures between two PGMs of equal size.
    Metrics { original: PathBuf, decoded: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EncodeMode {
    /// Basic BTC, 32 bits per 4x4 block.
    Btc,
    /// BTC plus three clustering quadtrees.
    Btcq,
    /// SNIBTC2, 14 bits per block.
    Sn2,
    /// SNIBTC2 plus two clustering quadtrees.
    Sn2q,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum SweepMode {
    Btcq,
    Sn2q,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Axis {
    Mad,
    Mbd,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum MvMode {
    /// Fixed-length vectors, no tree.
    Raw,
    /// Lossless field quadtree.
    Qt,
    /// Joint block shape + inter/intra tree.
    Modeqt,
    /// One tree over two consecutive fields.
    #[value(name = "3d")]
    ThreeD,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Encode {
            input,
            output,
            mode,
            mad,
            mbd,
        } => encode(&input, &output, mode, mad, mbd),
        Command::Decode { input, output } => decode(&input, output.as_deref()),
        Command::Sweep {
            input,
            mode,
            mad_max,
            mbd_max,
            axis,
            output,
        } => sweep(&input, mode, mad_max, mbd_max, axis, output.as_deref()),
        Command::Motion {
            reference,
            current,
            next,
            mode,
            block,
            range,
            threshold,
            output,
        } => motion_cmd(
            &reference,
            &current,
            next.as_deref(),
            mode,
            block,
            range,
            threshold,
            output.as_deref(),
        ),
        Command::Metrics { original, decoded } => metrics_cmd(&original, &decoded),
    }
}

fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    image::read_pgm(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn read_container(path: &Path) -> Result<format::Container> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    format::parse_container(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn encode(input: &Path, output: &Path, mode: EncodeMode, mad: u8, mbd: u8) -> Result<()> {
    let img = read_image(input)?;
    let container = match mode {
        EncodeMode::Btc => codec::encode_btc(&img),
        EncodeMode::Btcq => codec::encode_btc_qt(&img, mad, mbd),
        EncodeMode::Sn2 => codec::encode_sn2(&img),
        EncodeMode::Sn2q => codec::encode_sn2_qt(&img, mad, mbd),
    }?;
    let bytes = format::write_container(&container)?;
    fs::write(output, &bytes).with_context(|| format!("writing {}", output.display()))?;
    let report = codec::compression_report(&container);
    println!(
        "mode {} {}x{}: {report}",
        container.mode,
        img.width(),
        img.height()
    );
    Ok(())
}

fn decode(input: &Path, output: Option<&Path>) -> Result<()> {
    let container = read_container(input)?;
    if container.mode.is_motion() {
        let dump = render_motion_dump(&container)?;
        match output {
            Some(path) => {
                fs::write(path, dump).with_context(|| format!("writing {}", path.display()))?
            }
            None => print!("{dump}"),
        }
        return Ok(());
    }
    let Some(path) = output else {
        bail!("image decode needs --output <file.pgm>");
    };
    let img = codec::decode_image_mode(&container)?;
    fs::write(path, image::write_pgm(&img))
        .with_context(|| format!("writing {}", path.display()))?;
    eprintln!(
        "decoded {} {}x{} -> {}",
        container.mode,
        img.width(),
        img.height(),
        path.display()
    );
    Ok(())
}

fn render_field_grid(field: &MotionField) -> String {
    let mut out = String::new();
    for by in 0..field.geometry.rows() {
        let row: Vec<String> = (0..field.geometry.cols())
            .map(|bx| {
                let v = field.vector(bx, by);
                format!("{},{}", v.dx, v.dy)
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn render_motion_dump(container: &format::Container) -> Result<String> {
    let decoded = codec::decode_motion_mode(container)?;
    let mut out = String::new();
    match decoded {
        MotionDecoded::Field(field) => {
            out.push_str(&header_line(container, &field));
            out.push_str("vectors:\n");
            out.push_str(&render_field_grid(&field));
        }
        MotionDecoded::FieldWithModes(field, modes) => {
            out.push_str(&header_line(container, &field));
            out.push_str("vectors:\n");
            out.push_str(&render_field_grid(&field));
            out.push_str("modes:\n");
            for by in 0..field.geometry.rows() {
                let row: String = (0..field.geometry.cols())
                    .map(|bx| match modes.modes[by * field.geometry.cols() + bx] {
                        BlockMode::Inter => 'P',
                        BlockMode::Intra => 'I',
                    })
                    .collect();
                out.push_str(&row);
                out.push('\n');
            }
        }
        MotionDecoded::FieldPair(prev, cur) => {
            out.push_str(&header_line(container, &prev));
            out.push_str("vectors k-1:\n");
            out.push_str(&render_field_grid(&prev));
            out.push_str("vectors k:\n");
            out.push_str(&render_field_grid(&cur));
        }
    }
    Ok(out)
}

fn header_line(container: &format::Container, field: &MotionField) -> String {
    format!(
        "mode {} frame {}x{} block {} range {}\n",
        container.mode,
        container.width,
        container.height,
        field.geometry.block_size,
        field.geometry.search_range
    )
}

fn sweep(
    input: &Path,
    mode: SweepMode,
    mad_max: u8,
    mbd_max: u8,
    axis: Axis,
    output: Option<&Path>,
) -> Result<()> {
    let img = read_image(input)?;
    let points: Vec<(u8, u8)> = match axis {
        Axis::Mad => (0..=mad_max).map(|mad| (mad, 0)).collect(),
        Axis::Mbd => (0..=mbd_max).map(|mbd| (0, mbd)).collect(),
        Axis::Grid => (0..=mad_max)
            .flat_map(|mad| (0..=mbd_max).map(move |mbd| (mad, mbd)))
            .collect(),
    };
    let mode_name = match mode {
        SweepMode::Btcq => "btcq",
        SweepMode::Sn2q => "sn2q",
    };
    let mut rows = vec![metrics::CSV_HEADER.to_string()];
    for (mad, mbd) in points {
        let container = match mode {
            SweepMode::Btcq => codec::encode_btc_qt(&img, mad, mbd),
            SweepMode::Sn2q => codec::encode_sn2_qt(&img, mad, mbd),
        }?;
        let decoded = codec::decode_image_mode(&container)?;
        let comp = codec::compression_report(&container);
        let quality = metrics::quality_report(&img, &decoded)?;
        rows.push(metrics::csv_row(mode_name, mad, mbd, &comp, &quality));
    }
    let csv = rows.join("\n") + "\n";
    match output {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn render_histogram(hist: &LevelHistogram, root_pels: u32, block_size: u32) -> String {
    let mut out = String::new();
    for (level, (&count, &coverage)) in hist.counts.iter().zip(&hist.coverage).enumerate() {
        let side = root_pels >> level;
        out.push_str(&format!(
            "  level {level} ({side}x{side} pels): {count} terminals -> {coverage} blocks of {block_size}x{block_size}\n"
        ));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn motion_cmd(
    reference: &Path,
    current: &Path,
    next: Option<&Path>,
    mode: MvMode,
    block: u32,
    range: u32,
    threshold: f64,
    output: Option<&Path>,
) -> Result<()> {
    let mut frames = vec![read_image(reference)?, read_image(current)?];
    let container_mode = match mode {
        MvMode::Raw => Mode::MvfRaw,
        MvMode::Qt => Mode::MvfQt,
        MvMode::Modeqt => Mode::MvfModeQt,
        MvMode::ThreeD => Mode::Mvf3dQt,
    };
    if mode == MvMode::ThreeD {
        let Some(next) = next else {
            bail!("--mode 3d needs a third frame");
        };
        frames.push(read_image(next)?);
    }

    let container = codec::encode_motion_mode(&frames, container_mode, block, range, threshold)?;

    // Estimate once more for the report: raw baseline vs coded size, and
    // the clustering histogram of the k-1 -> k field.
    let field = qtr_core::motion::full_search(&frames[0], &frames[1], block, range)?;
    let raw_bits = field.geometry.raw_field_bits();
    let coded_bits = container.coded_bits();
    let forest = codec::motion_qt_forest(&field);
    println!(
        "mode {} {}x{} block {block} range {range}: {} vectors",
        container.mode,
        container.width,
        container.height,
        field.geometry.block_count()
    );
    // The 3d mode codes two fields, so its raw baseline is two raw fields.
    let (raw_total, raw_label) = if mode == MvMode::ThreeD {
        (2 * raw_bits, "raw fields (x2):")
    } else {
        (raw_bits, "raw field:")
    };
    println!("{raw_label} {raw_total} bits");
    println!(
        "coded:     {coded_bits} bits (factor {:.2}:1 over raw)",
        raw_total as f64 / coded_bits as f64
    );
    print!(
        "{}",
        render_histogram(&forest.level_histogram(), forest.root_region_size(), block)
    );

    if let Some(path) = output {
        let bytes = format::write_container(&container)?;
        fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn metrics_cmd(original: &Path, decoded: &Path) -> Result<()> {
    let a = read_image(original)?;
    let b = read_image(decoded)?;
    let report = metrics::quality_report(&a, &b)?;
    println!("{report}");
    Ok(())
}
