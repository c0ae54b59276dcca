//! End-to-end tests of the qtr binary: every subcommand through the real
//! process boundary, plus bit-exact golden files for the container format.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtr_core::image::{write_pgm, GrayImage};

fn qtr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtr"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = qtr().args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "qtr {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Gradient, flat square, textured strip; deterministic without an RNG.
fn test_image(w: u32, h: u32) -> GrayImage {
    let pixels = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                if y >= h - 8 {
                    ((x * 37 + y * 11) % 256) as u8
                } else if x >= w / 4 && x < 3 * w / 4 && y >= h / 4 && y < 3 * h / 4 {
                    90
                } else {
                    ((x * 3 + y * 5) % 251) as u8
                }
            })
        })
        .collect();
    GrayImage::new(w, h, pixels).unwrap()
}

fn write_image(dir: &Path, name: &str, img: &GrayImage) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, write_pgm(img)).unwrap();
    path
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

#[test]
fn encode_decode_metrics_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_image(dir.path(), "in.pgm", &test_image(96, 96));
    let container = dir.path().join("out.qtr");
    let decoded = dir.path().join("out.pgm");

    let out = run_ok(&[
        "encode",
        input.to_str().unwrap(),
        "-o",
        container.to_str().unwrap(),
        "--mode",
        "btc",
    ]);
    assert!(
        stdout(&out).contains("ratio   4.0000:1"),
        "got: {}",
        stdout(&out)
    );

    run_ok(&[
        "decode",
        container.to_str().unwrap(),
        "-o",
        decoded.to_str().unwrap(),
    ]);
    let out = run_ok(&[
        "metrics",
        input.to_str().unwrap(),
        decoded.to_str().unwrap(),
    ]);
    assert!(stdout(&out).contains("mse"), "got: {}", stdout(&out));

    let sn2 = dir.path().join("out.sn2.qtr");
    let out = run_ok(&[
        "encode",
        input.to_str().unwrap(),
        "-o",
        sn2.to_str().unwrap(),
        "--mode",
        "sn2",
    ]);
    assert!(
        stdout(&out).contains("ratio   9.1429:1"),
        "got: {}",
        stdout(&out)
    );
}

#[test]
fn zero_thresholds_decode_identically_to_btc() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_image(dir.path(), "in.pgm", &test_image(96, 64));
    let plain_qtr = dir.path().join("plain.qtr");
    let clustered_qtr = dir.path().join("clustered.qtr");
    let plain_pgm = dir.path().join("plain.pgm");
    let clustered_pgm = dir.path().join("clustered.pgm");

    run_ok(&[
        "encode",
        input.to_str().unwrap(),
        "-o",
        plain_qtr.to_str().unwrap(),
        "--mode",
        "btc",
    ]);
    run_ok(&[
        "encode",
        input.to_str().unwrap(),
        "-o",
        clustered_qtr.to_str().unwrap(),
        "--mode",
        "btcq",
        "--mad",
        "0",
        "--mbd",
        "0",
    ]);
    run_ok(&[
        "decode",
        plain_qtr.to_str().unwrap(),
        "-o",
        plain_pgm.to_str().unwrap(),
    ]);
    run_ok(&[
        "decode",
        clustered_qtr.to_str().unwrap(),
        "-o",
        clustered_pgm.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(&plain_pgm).unwrap(),
        fs::read(&clustered_pgm).unwrap()
    );
}

// The container layout is pinned by files generated once and committed;
// any bit drift in the format or the coders fails here.
#[test]
fn golden_fixture_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let container = dir.path().join("golden.qtr");
    let decoded = dir.path().join("golden.pgm");

    run_ok(&[
        "encode",
        data_file("golden_input.pgm").to_str().unwrap(),
        "-o",
        container.to_str().unwrap(),
        "--mode",
        "btcq",
        "--mad",
        "3",
        "--mbd",
        "2",
    ]);
    assert_eq!(
        fs::read(&container).unwrap(),
        fs::read(data_file("golden_btcq_m3_b2.qtr")).unwrap(),
        "encoded container drifted from the golden file"
    );

    run_ok(&[
        "decode",
        data_file("golden_btcq_m3_b2.qtr").to_str().unwrap(),
        "-o",
        decoded.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(&decoded).unwrap(),
        fs::read(data_file("golden_btcq_m3_b2.pgm")).unwrap(),
        "decoded image drifted from the golden file"
    );
}

#[test]
fn sweep_rows_are_monotone_and_anchored_to_btc() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_image(dir.path(), "in.pgm", &test_image(128, 96));

    // Plain BTC error for the anchor row.
    let container = dir.path().join("btc.qtr");
    let decoded = dir.path().join("btc.pgm");
    run_ok(&[
        "encode",
        input.to_str().unwrap(),
        "-o",
        container.to_str().unwrap(),
        "--mode",
        "btc",
    ]);
    run_ok(&[
        "decode",
        container.to_str().unwrap(),
        "-o",
        decoded.to_str().unwrap(),
    ]);
    let metrics_out = stdout(&run_ok(&[
        "metrics",
        input.to_str().unwrap(),
        decoded.to_str().unwrap(),
    ]));
    let btc_mse: f64 = metrics_out
        .split_whitespace()
        .nth(1)
        .expect("mse value")
        .parse()
        .expect("mse parses");

    let out = stdout(&run_ok(&[
        "sweep",
        input.to_str().unwrap(),
        "--mad-max",
        "6",
        "--axis",
        "mad",
    ]));
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode,mad,mbd,ratio,increment_pct,bpp,mse,mae,snr_db"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 7);

    // MAD=MBD=0 reproduces the plain BTC error.
    let first_mse: f64 = rows[0][6].parse().unwrap();
    assert!(
        (first_mse - btc_mse).abs() < 1e-3,
        "{first_mse} vs btc {btc_mse}"
    );

    // The increment column never decreases along the axis.
    let increments: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    for pair in increments.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-9, "increment fell: {pair:?}");
    }
}

#[test]
fn identical_inputs_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_image(dir.path(), "in.pgm", &test_image(96, 96));
    let a = dir.path().join("a.qtr");
    let b = dir.path().join("b.qtr");
    for (path, _) in [(&a, 0), (&b, 1)] {
        run_ok(&[
            "encode",
            input.to_str().unwrap(),
            "-o",
            path.to_str().unwrap(),
            "--mode",
            "sn2q",
            "--mad",
            "4",
            "--mbd",
            "3",
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn corrupt_container_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.qtr");
    fs::write(&bad, b"XXXXnot a container").unwrap();
    let output = qtr()
        .args([
            "decode",
            bad.to_str().unwrap(),
            "-o",
            dir.path().join("x.pgm").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bad magic"), "stderr: {stderr}");
}

#[test]
fn motion_subcommand_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let reference = test_image(128, 128);
    // Current frame: the flat square's content shifts by (2, 1).
    let mut pixels = reference.pixels().to_vec();
    for y in (32..96).rev() {
        for x in (32..96).rev() {
            pixels[y * 128 + x] = pixels[(y - 1) * 128 + (x - 2)];
        }
    }
    let current = GrayImage::new(128, 128, pixels).unwrap();
    let ref_path = write_image(dir.path(), "ref.pgm", &reference);
    let cur_path = write_image(dir.path(), "cur.pgm", &current);
    let container = dir.path().join("field.qtr");

    let out = stdout(&run_ok(&[
        "motion",
        ref_path.to_str().unwrap(),
        cur_path.to_str().unwrap(),
        "--mode",
        "qt",
        "-o",
        container.to_str().unwrap(),
    ]));
    assert!(out.contains("raw field: 512 bits"), "got: {out}");
    assert!(out.contains("factor"), "got: {out}");
    assert!(out.contains("level 0 (64x64 pels)"), "got: {out}");

    let dump = stdout(&run_ok(&["decode", container.to_str().unwrap()]));
    assert!(
        dump.starts_with("mode mvf-qt frame 128x128 block 16 range 7"),
        "got: {dump}"
    );
    assert_eq!(
        dump.lines().filter(|l| l.contains(',')).count(),
        8,
        "8 vector rows"
    );
}

#[test]
fn motion_3d_needs_three_frames() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_image(dir.path(), "a.pgm", &test_image(64, 64));
    let b = write_image(dir.path(), "b.pgm", &test_image(64, 64));
    let output = qtr()
        .args([
            "motion",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--mode",
            "3d",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("third frame"));
}
