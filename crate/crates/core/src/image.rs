//! Grey and colour images on the physical domain `D = [0, W/H] × [0, 1]`.
//!
//! Pixel `(col, row)` has its centre at `((col + ½)/H, (row + ½)/H)`. Values
//! between centres are bilinear; outside `D` the image is extended by zero.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ImageData {
    pub width: usize,
    pub height: usize,
    /// 1 (grey) or 3 (colour).
    pub channels: usize,
    /// Row-major, channels interleaved, in `[0, 1]`.
    pub samples: Vec<f64>,
}

impl ImageData {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("empty image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels; expected 1 or 3")));
        }
        if samples.len() != width * height * channels {
            return Err(Error::InvalidImage(format!("{} samples for {width}×{height}×{channels}", samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite sample".into()));
        }
        Ok(Self { width, height, channels, samples })
    }

    /// Samples `f(x, y)` at pixel centres.
    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(f64, f64, usize) -> f64) -> Result<Self> {
        let h = height as f64;
        let mut s = Vec::with_capacity(width * height * channels);
        for row in 0..height {
            for col in 0..width {
                for c in 0..channels {
                    s.push(f((col as f64 + 0.5) / h, (row as f64 + 0.5) / h, c));
                }
            }
        }
        Self::new(width, height, channels, s)
    }

    pub fn pixel(&self, col: usize, row: usize, c: usize) -> f64 {
        self.samples[(row * self.width + col) * self.channels + c]
    }

    /// Width of `D` (its height is 1).
    pub fn domain_width(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    pub fn pixel_pitch(&self) -> f64 {
        1.0 / self.height as f64
    }

    pub fn in_domain(&self, x: f64, y: f64) -> bool {
        (0.0..self.domain_width()).contains(&x) && (0.0..1.0).contains(&y)
    }

    /// Bilinear value of channel `c` at `(x, y)`; zero outside `D`.
    pub fn sample(&self, x: f64, y: f64, c: usize) -> f64 {
        if !self.in_domain(x, y) {
            return 0.0;
        }
        let h = self.height as f64;
        let fx = (x * h - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y * h - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let a = self.pixel(x0, y0, c) * (1.0 - tx) + self.pixel(x1, y0, c) * tx;
        let b = self.pixel(x0, y1, c) * (1.0 - tx) + self.pixel(x1, y1, c) * tx;
        a * (1.0 - ty) + b * ty
    }
}

fn pnm_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let ch = byte[0] as char;
        if ch == '#' && tok.is_empty() {
            let mut skip = String::new();
            r.read_line(&mut skip)?;
            continue;
        }
        if ch.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(ch);
    }
    if tok.is_empty() {
        return Err(Error::InvalidImage("truncated PNM header".into()));
    }
    Ok(tok)
}

/// Reads PGM (`P2`, `P5`) or PPM (`P3`, `P6`), 8- or 16-bit.
pub fn read_pnm<R: BufRead>(mut r: R) -> Result<ImageData> {
    let magic = pnm_token(&mut r)?;
    let (channels, ascii) = match magic.as_str() {
        "P2" => (1, true),
        "P3" => (3, true),
        "P5" => (1, false),
        "P6" => (3, false),
        m => return Err(Error::InvalidImage(format!("unsupported PNM magic {m}"))),
    };
    let num = |t: String| t.parse::<usize>().map_err(|_| Error::InvalidImage(format!("bad header field `{t}`")));
    let width = num(pnm_token(&mut r)?)?;
    let height = num(pnm_token(&mut r)?)?;
    let maxval = num(pnm_token(&mut r)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::InvalidImage(format!("maxval {maxval} out of range")));
    }
    let m = maxval as f64;
    let n = width * height * channels;
    if ascii {
        let samples = (0..n).map(|_| Ok(num(pnm_token(&mut r)?)? as f64 / m)).collect::<Result<Vec<_>>>()?;
        return ImageData::new(width, height, channels, samples);
    }
    let bytes = if maxval < 256 { 1 } else { 2 };
    let mut raw = vec![0u8; n * bytes];
    r.read_exact(&mut raw).map_err(|_| Error::InvalidImage("truncated pixel data".into()))?;
    let samples = if bytes == 1 {
        raw.iter().map(|&b| b as f64 / m).collect()
    } else {
        raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / m).collect()
    };
    ImageData::new(width, height, channels, samples)
}

/// Writes binary PGM/PPM with the given bit depth (8 or 16), clamping to `[0, 1]`.
pub fn write_pnm<W: Write>(img: &ImageData, bits: u8, mut w: W) -> Result<()> {
    let maxval: u32 = match bits {
        8 => 255,
        16 => 65535,
        b => return Err(Error::InvalidImage(format!("unsupported bit depth {b}"))),
    };
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    write!(w, "{magic}\n{} {}\n{maxval}\n", img.width, img.height)?;
    let mut out = Vec::with_capacity(img.samples.len() * (bits as usize / 8));
    for &v in &img.samples {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if bits == 8 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    w.write_all(&out)?;
    Ok(())
}

/// Decodes a PNG; alpha is dropped, grey stays one channel.
pub fn read_png(bytes: &[u8]) -> Result<ImageData> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::InvalidImage(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::InvalidImage("PNG too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::InvalidImage(e.to_string()))?;
    let (src_ch, channels) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(Error::InvalidImage("unexpanded palette".into())),
    };
    let bytes = match info.bit_depth {
        png::BitDepth::Sixteen => 2,
        _ => 1,
    };
    let data = &buf[..info.buffer_size()];
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let maxv = if bytes == 2 { 65535.0 } else { 255.0 };
    let mut samples = Vec::with_capacity(w * h * channels);
    for row in 0..h {
        let line = &data[row * stride..(row + 1) * stride];
        for col in 0..w {
            for c in 0..channels {
                let k = (col * src_ch + c) * bytes;
                let v = if bytes == 2 { u16::from_be_bytes([line[k], line[k + 1]]) as f64 } else { line[k] as f64 };
                samples.push(v / maxv);
            }
        }
    }
    ImageData::new(w, h, channels, samples)
}

/// Reads PGM/PPM or PNG by content.
pub fn read_image(path: &Path) -> Result<ImageData> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"\x89PNG") {
        read_png(&bytes)
    } else if [b"P2", b"P3", b"P5", b"P6"].iter().any(|m| bytes.starts_with(*m)) {
        read_pnm(&bytes[..])
    } else {
        Err(Error::InvalidImage(format!("{}: not a PNM or PNG file", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_roundtrip_16_bit() {
        let img = ImageData::from_fn(5, 3, 1, |x, y, _| (x + y) / 3.0).unwrap();
        let mut buf = Vec::new();
        write_pnm(&img, 16, &mut buf).unwrap();
        let back = read_pnm(&buf[..]).unwrap();
        for (a, b) in img.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
    }

    #[test]
    fn pgm_with_comment_8_bit() {
        let mut data = b"P5\n# comment\n2 1\n255\n".to_vec();
        data.extend([0u8, 255]);
        let img = read_pnm(&data[..]).unwrap();
        assert_eq!(img.samples, vec![0.0, 1.0]);
    }

    #[test]
    fn ascii_pgm_and_ppm() {
        let img = read_pnm(&b"P2 # grey\n3 1\n4\n0 2 4\n"[..]).unwrap();
        assert_eq!(img.samples, vec![0.0, 0.5, 1.0]);
        let img = read_pnm(&b"P3\n1 1\n255\n255 0 51\n"[..]).unwrap();
        assert_eq!((img.channels, img.samples[2]), (3, 0.2));
        assert!(read_pnm(&b"P2\n2 1\n255\n7\n"[..]).is_err());
    }

    #[test]
    fn png_grey_roundtrip() {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, 3, 2);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0, 51, 102, 153, 204, 255]).unwrap();
        }
        let img = read_png(&buf).unwrap();
        assert_eq!((img.width, img.height, img.channels), (3, 2, 1));
        assert!((img.samples[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bilinear_and_zero_extension() {
        let img = ImageData::from_fn(4, 4, 1, |x, _, _| x).unwrap();
        assert!((img.sample(0.5, 0.5, 0) - 0.5).abs() < 1e-12);
        assert_eq!(img.sample(1.2, 0.5, 0), 0.0);
        assert_eq!(img.sample(-0.01, 0.5, 0), 0.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_pnm(&b"P1\n1 1\n0"[..]).is_err());
        assert!(read_pnm(&b"P5\n2 2\n255\n\x00"[..]).is_err());
        assert!(ImageData::new(1, 1, 2, vec![0.0, 0.0]).is_err());
    }
}
