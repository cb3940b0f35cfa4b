//! Corrector parameter record, little-endian:
//!
//! ```text
//! magic "FCPR" | version u32 | q u32 | k u32 | n_gamma u32 | n_gate u32
//! nu f64 | dt f64 | cx[n_gamma] | cy[n_gamma] | we[n_gate] | wp[n_gate] | bias[2]
//! ```
//!
//! `n_gamma = q (q + 1) / 2` and `n_gate = 4 k^2`.

use super::{read_file, write_file, Reader};
use crate::correct::{CorrectorParams, GammaParams, GateParams};
use crate::error::{Error, Result};
use std::path::Path;

pub const PARAMS_MAGIC: [u8; 4] = *b"FCPR";
pub const PARAMS_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

pub fn encode_params(p: &CorrectorParams) -> Result<Vec<u8>> {
    p.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(&PARAMS_MAGIC);
    for n in [
        PARAMS_VERSION as usize,
        p.gamma.order,
        p.gate.size,
        p.gamma.cx.len(),
        p.gate.we.len(),
    ] {
        let n = u32::try_from(n).map_err(|_| Error::InvalidParameter(format!("count {n} exceeds u32")))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    let body = [&[p.nu, p.dt][..], &p.gamma.cx, &p.gamma.cy, &p.gate.we, &p.gate.wp, &p.gate.bias];
    for x in body.into_iter().flatten() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_params(bytes: &[u8], path: &Path) -> Result<CorrectorParams> {
    let mut r = Reader::new(bytes, path);
    if r.take::<4>()? != PARAMS_MAGIC {
        return Err(r.format_error(0, "bad magic, expected \"FCPR\""));
    }
    let version = r.u32_le()?;
    if version != PARAMS_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            supported: PARAMS_VERSION,
        });
    }
    let q = r.u32_le()? as usize;
    let k = r.u32_le()? as usize;
    let n_gamma = r.u32_le()? as usize;
    let n_gate = r.u32_le()? as usize;
    if q == 0 || q > crate::fields::MAX_DERIVATIVE_ORDER + 1 {
        return Err(r.format_error(8, format!("unsupported operator order {q}")));
    }
    if k % 2 == 0 || k > 255 {
        return Err(r.format_error(12, format!("gate stencil size {k} must be odd and at most 255")));
    }
    if n_gamma != GammaParams::count(q) {
        return Err(r.format_error(
            16,
            format!("{n_gamma} coefficients per component, order {q} needs {}", GammaParams::count(q)),
        ));
    }
    if n_gate != 4 * k * k {
        return Err(r.format_error(20, format!("{n_gate} gate weights, size {k} needs {}", 4 * k * k)));
    }
    r.expect_len(HEADER_LEN + 8 * (2 * n_gamma + 2 * n_gate + 2))?;
    let nu = r.f64_le()?;
    let dt = r.f64_le()?;
    let mut read = |n: usize| (0..n).map(|_| r.f64_le()).collect::<Result<Vec<f64>>>();
    let cx = read(n_gamma)?;
    let cy = read(n_gamma)?;
    let we = read(n_gate)?;
    let wp = read(n_gate)?;
    let bias = read(2)?;
    let p = CorrectorParams {
        gate: GateParams {
            size: k,
            we,
            wp,
            bias: [bias[0], bias[1]],
        },
        gamma: GammaParams { order: q, cx, cy },
        nu,
        dt,
    };
    p.validate()?;
    Ok(p)
}

pub fn write_params(path: impl AsRef<Path>, p: &CorrectorParams) -> Result<()> {
    write_file(path.as_ref(), &encode_params(p)?)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<CorrectorParams> {
    let path = path.as_ref();
    decode_params(&read_file(path)?, path)
}
