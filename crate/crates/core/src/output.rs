//! Stable text and image encodings for results.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::optimize::RateCurve;
use crate::tomography::{IntensityGrid, StokesField};

/// Shortest round-trip decimal of `x`. Very small or large magnitudes switch
/// to exponent notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// `x` rounded to `digits` significant digits, then printed with [`fmt_float`].
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return fmt_float(x);
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses");
    fmt_float(rounded)
}

pub const RATE_CURVE_HEADER: &str = "length_m,k_per_pulse,mu_opt,nu_opt,flags";

pub fn rate_curve_csv(curve: &RateCurve) -> String {
    let mut s = String::from(RATE_CURVE_HEADER);
    s.push('\n');
    for p in &curve.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_sig(p.length_m, 9),
            fmt_sig(p.k_per_pulse, 9),
            fmt_sig(p.mu_opt, 9),
            fmt_sig(p.nu_opt, 9),
            p.flags
        );
    }
    s
}

pub const STOKES_HEADER: &str = "x,y,intensity,s1,s2,s3,valid";

pub fn stokes_csv(field: &StokesField) -> String {
    let mut s = String::from(STOKES_HEADER);
    s.push('\n');
    for (i, st) in field.stokes.iter().enumerate() {
        let (x, y) = field.grid.coords(i);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_float(x),
            fmt_float(y),
            fmt_float(field.intensity[i]),
            fmt_float(st[0]),
            fmt_float(st[1]),
            fmt_float(st[2]),
            u8::from(field.valid[i])
        );
    }
    s
}

#[derive(Serialize)]
struct StokesPixel {
    x: f64,
    y: f64,
    intensity: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    valid: bool,
}

#[derive(Serialize)]
struct StokesDocument {
    size: usize,
    extent: f64,
    waist: f64,
    pixels: Vec<StokesPixel>,
}

pub fn stokes_json(field: &StokesField) -> String {
    let pixels = field
        .stokes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (x, y) = field.grid.coords(i);
            StokesPixel {
                x,
                y,
                intensity: field.intensity[i],
                s1: s[0],
                s2: s[1],
                s3: s[2],
                valid: field.valid[i],
            }
        })
        .collect();
    let doc = StokesDocument {
        size: field.grid.size,
        extent: field.grid.extent,
        waist: field.grid.waist,
        pixels,
    };
    serde_json::to_string(&doc).expect("finite Stokes data serializes")
}

/// Binary 8-bit portable graymap, scaled so the brightest pixel is 255.
pub fn write_pgm<W: Write>(mut w: W, img: &IntensityGrid) -> io::Result<()> {
    let n = img.grid.size;
    write!(w, "P5\n{n} {n}\n255\n")?;
    let peak = img.peak();
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| {
            if peak > 0.0 {
                (255.0 * v / peak).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    w.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::GridSpec;

    #[test]
    fn float_formats() {
        assert_eq!(fmt_sig(0.005581903544530952, 9), "0.00558190354");
        assert_eq!(fmt_sig(5.192064250984082e-7, 9), "5.19206425e-7");
        assert_eq!(fmt_sig(10.5, 9), "10.5");
        assert_eq!(fmt_sig(0.0, 9), "0.0");
        assert_eq!(fmt_float(0.1), "0.1");
    }

    #[test]
    fn pgm_header_and_scaling() {
        let grid = GridSpec {
            size: 32,
            ..GridSpec::default()
        };
        let mut data = vec![0.0; 32 * 32];
        data[0] = 2.0;
        data[1] = 1.0;
        let mut buf = Vec::new();
        write_pgm(&mut buf, &IntensityGrid { grid, data }).unwrap();
        let header = b"P5\n32 32\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 1024);
        assert_eq!(buf[header.len()], 255);
        assert_eq!(buf[header.len() + 1], 128);
    }
}
