//! Binary field dump.
//!
//! One ASCII header line terminated by `\n`:
//!
//! ```text
//! slotqed-fields v1 nx=<cells> ny=<cells> dx_nm=<f> dy_nm=<f> x0_nm=<f> y0_nm=<f> lambda_nm=<f> n_eff=<f> components=Ex,Ey,Ez,Hx,Hy,Hz
//! ```
//!
//! followed, for each listed component in order, by `cols × rows` pairs of
//! little-endian `f64` `(re, im)` in row-major order (`x` fastest). The
//! array shapes and sample offsets from `(x0_nm, y0_nm)` are
//!
//! | component | shape                 | sample `(i, j)` at                 |
//! |-----------|-----------------------|------------------------------------|
//! | Ex, Hy    | `nx × (ny + 1)`       | `((i + ½)·dx, j·dy)`               |
//! | Ey, Hx    | `(nx + 1) × ny`       | `(i·dx, (j + ½)·dy)`               |
//! | Ez        | `(nx + 1) × (ny + 1)` | `(i·dx, j·dy)`                     |
//! | Hz        | `nx × ny`             | `((i + ½)·dx, (j + ½)·dy)`         |

use std::io::{BufRead, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::modesolver::{Component, Mode};
use crate::scalar::Real;

pub const MAGIC: &str = "slotqed-fields v1";

/// Parsed dump, always in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub origin_nm: (f64, f64),
    pub lambda_nm: f64,
    pub n_eff: f64,
    pub components: Vec<(Component, Vec<Complex<f64>>)>,
}

impl FieldDump {
    pub fn component(&self, c: Component) -> Option<&[Complex<f64>]> {
        self.components.iter().find(|(k, _)| *k == c).map(|(_, v)| v.as_slice())
    }
}

pub fn write_mode<T: Real, W: Write>(mode: &Mode<T>, mut out: W) -> Result<()> {
    let g = mode.grid();
    let names: Vec<&str> = Component::ALL.iter().map(|c| c.name()).collect();
    writeln!(
        out,
        "{MAGIC} nx={} ny={} dx_nm={} dy_nm={} x0_nm={} y0_nm={} lambda_nm={} n_eff={} components={}",
        g.nx,
        g.ny,
        g.dx.to_f64_lossy(),
        g.dy.to_f64_lossy(),
        g.origin.0.to_f64_lossy(),
        g.origin.1.to_f64_lossy(),
        mode.lambda_nm.to_f64_lossy(),
        mode.n_eff.to_f64_lossy(),
        names.join(",")
    )?;
    let mut buf = Vec::new();
    for c in Component::ALL {
        buf.clear();
        for z in mode.fields.component(c) {
            buf.extend_from_slice(&z.re.to_f64_lossy().to_le_bytes());
            buf.extend_from_slice(&z.im.to_f64_lossy().to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into()))
}

pub fn read_dump<R: BufRead>(mut input: R) -> Result<FieldDump> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let rest = header
        .trim_end()
        .strip_prefix(MAGIC)
        .ok_or_else(|| parse_err("not a slotqed field dump"))?;
    let mut kv = std::collections::HashMap::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(format!("malformed header token `{tok}`")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| parse_err(format!("header lacks `{k}`")));
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| parse_err(format!("bad value for `{k}`")))
    };
    let int = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| parse_err(format!("bad value for `{k}`")))
    };
    let (nx, ny) = (int("nx")?, int("ny")?);
    let mut components = Vec::new();
    for name in get("components")?.split(',') {
        let c = Component::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| parse_err(format!("unknown component `{name}`")))?;
        let (cols, rows) = c.dims(nx, ny);
        let mut raw = vec![0u8; cols * rows * 16];
        input.read_exact(&mut raw)?;
        let vals = raw
            .chunks_exact(16)
            .map(|b| {
                let re = f64::from_le_bytes(b[..8].try_into().unwrap());
                let im = f64::from_le_bytes(b[8..].try_into().unwrap());
                Complex::new(re, im)
            })
            .collect();
        components.push((c, vals));
    }
    Ok(FieldDump {
        nx,
        ny,
        dx_nm: num("dx_nm")?,
        dy_nm: num("dy_nm")?,
        origin_nm: (num("x0_nm")?, num("y0_nm")?),
        lambda_nm: num("lambda_nm")?,
        n_eff: num("n_eff")?,
        components,
    })
}
