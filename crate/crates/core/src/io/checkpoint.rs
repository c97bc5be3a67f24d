//! Encoder checkpoints as text with exact float round-trips.
//!
//! ```text
//! # grv checkpoint v1
//! seed 42
//! config_hash 3f0c...
//! theta 2 3
//! 0.1,-0.2,0.3
//! ...
//! phi 3 3
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::text::{content_lines, parse_error, read_file, write_file};
use crate::encoder::EncoderParams;
use crate::error::Result;

const MAGIC: &str = "# grv checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub seed: u64,
    pub config_hash: String,
}

fn write_matrix(out: &mut String, name: &str, m: &Array2<f64>) {
    let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
}

pub fn format_checkpoint(ckpt: &Checkpoint) -> String {
    let mut out = format!("{MAGIC}\nseed {}\nconfig_hash {}\n", ckpt.seed, ckpt.config_hash);
    write_matrix(&mut out, "theta", &ckpt.params.theta);
    write_matrix(&mut out, "phi", &ckpt.params.phi);
    out
}

pub fn parse_checkpoint(origin: &str, text: &str) -> Result<Checkpoint> {
    if text.lines().next() != Some(MAGIC) {
        return Err(parse_error(origin, 1, format!("expected {MAGIC:?}")));
    }
    let mut lines = content_lines(text);
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_error(origin, text.lines().count() + 1, format!("missing {what}")))
    };
    let keyed = |(line, t): (usize, &str), key: &str| -> Result<String> {
        match t.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(parse_error(origin, line, format!("expected \"{key} ...\""))),
        }
    };
    let seed_line = next("seed")?;
    let seed = keyed(seed_line, "seed")?
        .parse()
        .map_err(|_| parse_error(origin, seed_line.0, "bad seed"))?;
    let config_hash = keyed(next("config_hash")?, "config_hash")?;

    let mut matrices = Vec::new();
    for name in ["theta", "phi"] {
        let header = next(name)?;
        let dims = keyed(header, name)?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|d| d.parse().map_err(|_| parse_error(origin, header.0, "bad dimension")))
            .collect::<Result<_>>()?;
        if dims.len() != 2 {
            return Err(parse_error(origin, header.0, "expected two dimensions"));
        }
        let mut values = Vec::with_capacity(dims[0] * dims[1]);
        for _ in 0..dims[0] {
            let (line, row) = next("matrix row")?;
            let parsed: Vec<f64> = row
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_error(origin, line, format!("bad value {v:?}")))
                })
                .collect::<Result<_>>()?;
            if parsed.len() != dims[1] {
                return Err(parse_error(origin, line, format!("expected {} values", dims[1])));
            }
            values.extend(parsed);
        }
        matrices.push(Array2::from_shape_vec((dims[0], dims[1]), values).expect("sizes checked"));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_error(origin, line, "trailing content"));
    }
    let phi = matrices.pop().expect("two matrices");
    let theta = matrices.pop().expect("two matrices");
    Ok(Checkpoint {
        params: EncoderParams::new(theta, phi)?,
        seed,
        config_hash,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, &format_checkpoint(ckpt))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    parse_checkpoint(&path.display().to_string(), &read_file(path)?)
}
