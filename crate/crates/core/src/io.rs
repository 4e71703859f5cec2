//! Netpbm (P5/P6) images, sampling masks and trace CSV export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::admm::IterationTrace;
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Generator used for masks and noise: `rand_chacha` ChaCha8 seeded with
/// `seed_from_u64`, positions drawn by `rand::seq::index::sample` (rand 0.9).
pub const RNG_NAME: &str = "chacha8-rand0.9";

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Decodes a binary PGM (one band) or PPM (three bands) into `[0, 1]` grids.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Vec<ImageGrid>> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(unsupported(path, "expected P5 or P6 magic")),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(unsupported(path, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| unsupported(path, "malformed header field"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(unsupported(path, "missing separator after header"));
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if maxval == 0 {
        return Err(unsupported(path, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedDepth {
            path: path.to_path_buf(),
            maxval,
        });
    }
    let (cols, rows) = (width as usize, height as usize);
    if rows == 0 || cols == 0 {
        return Err(unsupported(path, "zero image dimension"));
    }
    let needed = rows * cols * channels;
    let pixels = bytes
        .get(pos..pos + needed)
        .ok_or_else(|| unsupported(path, "truncated pixel data"))?;
    let scale = maxval as f64;
    Ok((0..channels)
        .map(|c| {
            ImageGrid::from_fn(rows, cols, |i, j| {
                pixels[(i * cols + j) * channels + c] as f64 / scale
            })
        })
        .collect())
}

fn quantize(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// Encodes one band as P5 or three bands as P6, `round(255 clip(v, 0, 1))`.
pub fn encode_pnm(bands: &[ImageGrid]) -> Result<Vec<u8>> {
    let first = bands.first().ok_or(Error::EmptyStack)?;
    for b in &bands[1..] {
        first.ensure_same_shape(b)?;
    }
    let magic = match bands.len() {
        1 => "P5",
        3 => "P6",
        n => {
            return Err(Error::ParameterDomain(format!(
                "netpbm output needs 1 or 3 bands, got {n}"
            )))
        }
    };
    let (rows, cols) = first.shape();
    let mut out = format!("{magic}\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(rows * cols * bands.len());
    for k in 0..rows * cols {
        for b in bands {
            out.push(quantize(b.as_slice()[k]));
        }
    }
    Ok(out)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Vec<ImageGrid>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, path)
}

pub fn save_image(path: impl AsRef<Path>, bands: &[ImageGrid]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pnm(bands)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Observed-pixel pattern with `round(sr * rows * cols)` observed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub observed: Vec<bool>,
    pub sr: f64,
    pub seed: u64,
}

impl Mask {
    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Uniformly random observed set of exactly `round(sr n)` pixels, drawn
/// without replacement.
pub fn make_mask(rows: usize, cols: usize, sr: f64, seed: u64) -> Result<Mask> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyGrid { rows, cols });
    }
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "sampling rate must lie in (0, 1], got {sr}"
        )));
    }
    let n = rows * cols;
    let count = ((sr * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![false; n];
    for idx in index::sample(&mut rng, n, count) {
        observed[idx] = true;
    }
    Ok(Mask {
        rows,
        cols,
        observed,
        sr,
        seed,
    })
}

/// Copies observed pixels and zero-fills the rest.
pub fn apply_mask(im: &ImageGrid, mask: &Mask) -> Result<ImageGrid> {
    if im.shape() != mask.shape() {
        return Err(Error::shape(mask.shape(), im.shape()));
    }
    let data = im
        .as_slice()
        .iter()
        .zip(&mask.observed)
        .map(|(&v, &seen)| if seen { v } else { 0.0 })
        .collect();
    ImageGrid::from_vec(im.rows(), im.cols(), data)
}

/// Text header `rows cols sr seed\n` followed by `rows * cols` raw bytes
/// (1 observed, 0 missing) in row-major order.
pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let mut out = format!("{} {} {} {}\n", mask.rows, mask.cols, mask.sr, mask.seed).into_bytes();
    out.extend(mask.observed.iter().map(|&o| o as u8));
    out
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<Mask> {
    let malformed = |reason: &str| Error::MalformedMask {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| malformed("missing header line"))?;
    let header =
        std::str::from_utf8(&bytes[..newline]).map_err(|_| malformed("header not UTF-8"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(malformed("header must be `rows cols sr seed`"));
    }
    let rows: usize = parts[0].parse().map_err(|_| malformed("bad rows"))?;
    let cols: usize = parts[1].parse().map_err(|_| malformed("bad cols"))?;
    let sr: f64 = parts[2].parse().map_err(|_| malformed("bad sr"))?;
    let seed: u64 = parts[3].parse().map_err(|_| malformed("bad seed"))?;
    let body = &bytes[newline + 1..];
    if body.len() != rows * cols {
        return Err(malformed("body length does not match rows * cols"));
    }
    let observed = body
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(malformed("body bytes must be 0 or 1")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mask {
        rows,
        cols,
        observed,
        sr,
        seed,
    })
}

pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes, path)
}

pub const TRACE_HEADER: &str = "iter,rel_change,primal_gap,coupling_gap,psnr";

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// One header line plus one row per iteration; reals carry 17 significant
/// digits and a missing PSNR is an empty field.
pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            sci(r.rel_change),
            sci(r.primal_gap),
            sci(r.coupling_gap),
            r.psnr.map(sci).unwrap_or_default()
        );
    }
    out
}

pub fn export_trace(trace: &IterationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}
