use super::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::fields::ScalarField2D;
use std::path::Path;

pub const PGM_MAXVAL: u16 = u16::MAX;

/// Binary 16-bit PGM. Samples must lie in `[0, 1]`.
pub fn encode_image(f: &ScalarField2D) -> Result<Vec<u8>> {
    if let Some(i) = f.data().iter().position(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidParameter(format!(
            "image sample {} at index {i} outside [0, 1]",
            f.data()[i]
        )));
    }
    let (h, w) = f.dims();
    let mut out = format!("P5\n{w} {h}\n{PGM_MAXVAL}\n").into_bytes();
    out.reserve(2 * h * w);
    for a in f.data() {
        let q = (a * PGM_MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

fn header_token(r: &mut Reader) -> Result<(usize, u64)> {
    // Skip whitespace and comments.
    loop {
        match r.rest().first() {
            Some(b) if b.is_ascii_whitespace() => r.advance(1),
            Some(b'#') => {
                let n = r.rest().iter().position(|&b| b == b'\n').unwrap_or(r.rest().len());
                r.advance(n);
            }
            _ => break,
        }
    }
    let start = r.pos();
    let n = r.rest().iter().take_while(|b| b.is_ascii_digit()).count();
    if n == 0 {
        if r.rest().is_empty() {
            r.require(start + 1)?;
        }
        return Err(r.format_error(start, "expected a decimal number in the header"));
    }
    let text = std::str::from_utf8(&r.rest()[..n]).expect("ascii digits");
    let value = text
        .parse::<u64>()
        .map_err(|_| r.format_error(start, format!("header number {text} out of range")))?;
    r.advance(n);
    Ok((start, value))
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<ScalarField2D> {
    let mut r = Reader::new(bytes, path);
    let magic: [u8; 2] = r.take()?;
    if &magic != b"P5" {
        return Err(r.format_error(0, "not a binary PGM (expected \"P5\")"));
    }
    let (ow, w) = header_token(&mut r)?;
    let (oh, h) = header_token(&mut r)?;
    let (om, maxval) = header_token(&mut r)?;
    if w == 0 {
        return Err(r.format_error(ow, "zero width"));
    }
    if h == 0 {
        return Err(r.format_error(oh, "zero height"));
    }
    if maxval != PGM_MAXVAL as u64 {
        return Err(r.format_error(om, format!("maxval {maxval}, only {PGM_MAXVAL} is supported")));
    }
    r.require(r.pos() + 1)?;
    if !r.rest()[0].is_ascii_whitespace() {
        return Err(r.format_error(r.pos(), "expected whitespace after maxval"));
    }
    r.advance(1);
    let (w, h) = (w as usize, h as usize);
    let total = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(2))
        .and_then(|n| n.checked_add(r.pos()))
        .ok_or_else(|| r.format_error(ow, format!("dimensions {w}x{h} overflow")))?;
    r.expect_len(total)?;
    let data = r
        .rest()
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / PGM_MAXVAL as f64)
        .collect();
    ScalarField2D::from_vec(h, w, data)
}

pub fn write_image(path: impl AsRef<Path>, f: &ScalarField2D) -> Result<()> {
    write_file(path.as_ref(), &encode_image(f)?)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ScalarField2D> {
    let path = path.as_ref();
    decode_image(&read_file(path)?, path)
}
