//! Error measures and compression accounting. Quality is measured over
//! the true raster only, and coded size is the sum of the container's
//! declared section bit counts, so the reported ratios match block-level
//! bit budgets exactly (32 bits/block -> 4:1).

use std::fmt;

use crate::image::GrayImage;

/// Bits per source pel.
pub const SOURCE_DEPTH: u32 = 8;

/// Fixed-rate baseline ratios the increment column is referred to.
pub const BTC_BASELINE_RATIO: f64 = 4.0;
pub const SN2_BASELINE_RATIO: f64 = 128.0 / 14.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    pub mae: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionReport {
    pub original_bits: u64,
    pub coded_bits: u64,
    pub ratio: f64,
    pub bpp: f64,
    /// Compression increase in percent over a fixed-rate baseline ratio.
    pub increment_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { a, b } => {
                write!(
                    f,
                    "image dimensions differ: {}x{} vs {}x{}",
                    a.0, a.1, b.0, b.1
                )
            }
        }
    }
}

impl std::error::Error for MetricsError {}

fn check_dims(x: &GrayImage, y: &GrayImage) -> Result<(), MetricsError> {
    if x.width() != y.width() || x.height() != y.height() {
        return Err(MetricsError::DimensionMismatch {
            a: (x.width(), x.height()),
            b: (y.width(), y.height()),
        });
    }
    Ok(())
}

pub fn mse(x: &GrayImage, y: &GrayImage) -> Result<f64, MetricsError> {
    check_dims(x, y)?;
    let sum: u64 = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / x.pixels().len() as f64)
}

pub fn mae(x: &GrayImage, y: &GrayImage) -> Result<f64, MetricsError> {
    check_dims(x, y)?;
    let sum: u64 = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(&a, &b)| (a as i64 - b as i64).unsigned_abs())
        .sum();
    Ok(sum as f64 / x.pixels().len() as f64)
}

/// `20 log10((2^8 - 1) / sqrt(mse))`; zero error maps to +infinity.
pub fn snr_db(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        20.0 * (255.0 / mse.sqrt()).log10()
    }
}

pub fn quality_report(
    original: &GrayImage,
    decoded: &GrayImage,
) -> Result<QualityReport, MetricsError> {
    let mse = mse(original, decoded)?;
    let mae = mae(original, decoded)?;
    Ok(QualityReport {
        mse,
        mae,
        snr_db: snr_db(mse),
    })
}

/// Compression accounting over the true (unpadded) raster. When a
/// baseline ratio is given the increment is `(ratio/baseline - 1) * 100`.
pub fn compression_report(
    true_width: u32,
    true_height: u32,
    coded_bits: u64,
    baseline_ratio: Option<f64>,
) -> CompressionReport {
    let original_bits = true_width as u64 * true_height as u64 * SOURCE_DEPTH as u64;
    let ratio = original_bits as f64 / coded_bits as f64;
    CompressionReport {
        original_bits,
        coded_bits,
        ratio,
        bpp: SOURCE_DEPTH as f64 / ratio,
        increment_pct: baseline_ratio.map(|base| (ratio / base - 1.0) * 100.0),
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mse {:>9.4}  mae {:>8.4}  snr {} dB",
            self.mse,
            self.mae,
            fmt_snr(self.snr_db)
        )
    }
}

impl fmt::Display for CompressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "coded {:>9} bits  ratio {:>8.4}:1  bpp {:.4}",
            self.coded_bits, self.ratio, self.bpp
        )?;
        if let Some(pct) = self.increment_pct {
            write!(f, "  increment {pct:+.2}%")?;
        }
        Ok(())
    }
}

fn fmt_snr(snr: f64) -> String {
    if snr.is_infinite() {
        "inf".to_string()
    } else {
        format!("{snr:.2}")
    }
}

pub const CSV_HEADER: &str = "mode,mad,mbd,ratio,increment_pct,bpp,mse,mae,snr_db";

/// One fixed-format CSV row in the header's column order.
pub fn csv_row(
    mode: &str,
    mad: u8,
    mbd: u8,
    comp: &CompressionReport,
    quality: &QualityReport,
) -> String {
    format!(
        "{mode},{mad},{mbd},{ratio:.4},{inc:.2},{bpp:.4},{mse:.4},{mae:.4},{snr}",
        ratio = comp.ratio,
        inc = comp.increment_pct.unwrap_or(0.0),
        bpp = comp.bpp,
        mse = quality.mse,
        mae = quality.mae,
        snr = fmt_snr(quality.snr_db),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: u32, h: u32, px: Vec<u8>) -> GrayImage {
        GrayImage::new(w, h, px).unwrap()
    }

    #[test]
    fn identical_images_have_zero_error() {
        let x = GrayImage::flat(8, 8, 77);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        assert_eq!(mae(&x, &x).unwrap(), 0.0);
        assert!(snr_db(0.0).is_infinite());
    }

    #[test]
    fn unit_difference_everywhere() {
        let x = GrayImage::flat(4, 4, 0);
        let y = GrayImage::flat(4, 4, 1);
        assert_eq!(mse(&x, &y).unwrap(), 1.0);
        assert_eq!(mae(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = GrayImage::flat(4, 4, 0);
        let y = GrayImage::flat(4, 8, 0);
        assert!(mse(&x, &y).is_err());
    }

    // The published SNR figures follow from snr = 20 log10(255/sqrt(mse)).
    #[test]
    fn snr_reproduces_published_values() {
        for (mse, expected) in [
            (48.9, "31.2"),
            (36.7, "32.5"),
            (26.4, "33.9"),
            (77.1, "29.3"),
            (67.0, "29.9"),
            (43.2, "31.8"),
        ] {
            assert_eq!(format!("{:.1}", snr_db(mse)), expected, "mse {mse}");
        }
    }

    #[test]
    fn compression_report_examples() {
        let r = compression_report(512, 512, 524288, Some(BTC_BASELINE_RATIO));
        assert_eq!(r.ratio, 4.0);
        assert_eq!(r.bpp, 2.0);
        assert_eq!(r.increment_pct, Some(0.0));

        let r = compression_report(512, 512, 229376, None);
        assert!((r.ratio - 128.0 / 14.0).abs() < 1e-12);

        // ratio 4.444:1 against the 4:1 baseline is an 11.1% increment
        let r = compression_report(512, 512, (512.0 * 512.0 * 8.0 / 4.444f64) as u64, Some(4.0));
        assert!((r.increment_pct.unwrap() - 11.1).abs() < 0.01);
    }

    #[test]
    fn csv_row_layout_is_fixed() {
        let comp = compression_report(512, 512, 524288, Some(4.0));
        let q = QualityReport {
            mse: 48.9,
            mae: 4.2,
            snr_db: snr_db(48.9),
        };
        assert_eq!(
            CSV_HEADER,
            "mode,mad,mbd,ratio,increment_pct,bpp,mse,mae,snr_db"
        );
        assert_eq!(
            csv_row("btcq", 5, 6, &comp, &q),
            "btcq,5,6,4.0000,0.00,2.0000,48.9000,4.2000,31.24"
        );
    }

    proptest! {
        // Independent re-summation oracle in exact integer arithmetic.
        #[test]
        fn definitional_sums_match_oracle(px in prop::collection::vec(any::<(u8, u8)>(), 64)) {
            let xs: Vec<u8> = px.iter().map(|p| p.0).collect();
            let ys: Vec<u8> = px.iter().map(|p| p.1).collect();
            let x = img(8, 8, xs.clone());
            let y = img(8, 8, ys.clone());
            let mut sq: u128 = 0;
            let mut ab: u128 = 0;
            for (a, b) in xs.iter().zip(&ys) {
                let d = (*a as i128 - *b as i128).unsigned_abs();
                sq += d * d;
                ab += d;
            }
            prop_assert!((mse(&x, &y).unwrap() - sq as f64 / 64.0).abs() < 1e-9);
            prop_assert!((mae(&x, &y).unwrap() - ab as f64 / 64.0).abs() < 1e-9);

            // symmetry and the Cauchy-Schwarz relation mae^2 <= mse
            prop_assert_eq!(mse(&x, &y).unwrap(), mse(&y, &x).unwrap());
            prop_assert_eq!(mae(&x, &y).unwrap(), mae(&y, &x).unwrap());
            let (m, a) = (mse(&x, &y).unwrap(), mae(&x, &y).unwrap());
            prop_assert!(a * a <= m + 1e-9);
        }

        #[test]
        fn snr_is_strictly_decreasing_in_mse(m1 in 0.01f64..1e4, m2 in 0.01f64..1e4) {
            prop_assume!(m1 < m2);
            prop_assert!(snr_db(m1) > snr_db(m2));
        }
    }
}
