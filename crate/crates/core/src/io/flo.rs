use super::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::fields::VectorField2D;
use std::path::Path;

/// Tag at the start of every flow file; reads as 202021.25 as an f32.
pub const FLO_MAGIC: [u8; 4] = *b"PIEH";
const HEADER_LEN: usize = 12;

/// Serializes a flow field. Components are stored as f32, so values that
/// are not f32-representable are rounded.
pub fn encode_flow(u: &VectorField2D) -> Result<Vec<u8>> {
    let (h, w) = u.dims();
    let (wi, hi) = match (i32::try_from(w), i32::try_from(h)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Err(Error::InvalidParameter(format!("flow {h}x{w} too large for the .flo header"))),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * h * w);
    out.extend_from_slice(&FLO_MAGIC);
    out.extend_from_slice(&wi.to_le_bytes());
    out.extend_from_slice(&hi.to_le_bytes());
    for (a, b) in u.u().iter().zip(u.v()) {
        out.extend_from_slice(&(*a as f32).to_le_bytes());
        out.extend_from_slice(&(*b as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a flow file image. `path` only labels errors. Non-finite
/// components are accepted; see [`validate_flow`].
pub fn decode_flow(bytes: &[u8], path: &Path) -> Result<VectorField2D> {
    let mut r = Reader::new(bytes, path);
    let magic: [u8; 4] = r.take()?;
    if magic != FLO_MAGIC {
        return Err(r.format_error(0, format!("bad magic {magic:02x?}, expected \"PIEH\"")));
    }
    let w = r.i32_le()?;
    let h = r.i32_le()?;
    if w <= 0 {
        return Err(r.format_error(4, format!("non-positive width {w}")));
    }
    if h <= 0 {
        return Err(r.format_error(8, format!("non-positive height {h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let total = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| r.format_error(4, format!("dimensions {w}x{h} overflow")))?;
    r.expect_len(total)?;
    let n = w * h;
    let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        u.push(r.f32_le()? as f64);
        v.push(r.f32_le()? as f64);
    }
    VectorField2D::from_vecs(h, w, u, v)
}

pub fn write_flow(path: impl AsRef<Path>, u: &VectorField2D) -> Result<()> {
    write_file(path.as_ref(), &encode_flow(u)?)
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<VectorField2D> {
    let path = path.as_ref();
    decode_flow(&read_file(path)?, path)
}

/// Rejects flows with non-finite components, naming the first offender.
pub fn validate_flow(u: &VectorField2D) -> Result<()> {
    let w = u.width();
    for (c, data) in [u.u(), u.v()].into_iter().enumerate() {
        if let Some(i) = data.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!(
                "flow component {} at ({}, {})",
                ["u", "v"][c],
                i % w,
                i / w
            )));
        }
    }
    Ok(())
}
