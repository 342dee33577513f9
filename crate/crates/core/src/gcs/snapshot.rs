//! Plain-text checkpoint format for [`GcsState`], version 1:
//!
//! ```text
//! spinfilter-gcs-snapshot 1
//! n_spins <N>
//! block <2J>
//! <re> <im> <re> <im> ...      one line per row, M descending
//! ...
//! end
//! ```
//!
//! Blocks appear in layout order (`J` descending), every block present, rows
//! written as `2J+1` complex entries in row-major order. Numbers use Rust's
//! shortest round-trip exponent form so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::GcsState;
use crate::error::{Error, Result};
use crate::spinrep::BlockLayout;

pub const SNAPSHOT_VERSION: u32 = 1;
const MAGIC: &str = "spinfilter-gcs-snapshot";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Snapshot {
        line,
        msg: msg.into(),
    }
}

impl GcsState {
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC} {SNAPSHOT_VERSION}").unwrap();
        writeln!(out, "n_spins {}", self.n_spins()).unwrap();
        for k in 0..self.layout.len() {
            let irrep = *self.irrep(k);
            let dim = irrep.dim();
            writeln!(out, "block {}", irrep.two_j).unwrap();
            for row in self.block(k).chunks(dim) {
                let line: Vec<String> = row
                    .iter()
                    .map(|z| format!("{:e} {:e}", z.re, z.im))
                    .collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "empty snapshot"))?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| parse_err(ln, "missing snapshot header"))?;
        if version != SNAPSHOT_VERSION.to_string() {
            return Err(parse_err(ln, format!("unsupported snapshot version {version}")));
        }

        let (ln, n_line) = lines.next().ok_or_else(|| parse_err(ln, "missing n_spins"))?;
        let n_spins: u32 = n_line
            .strip_prefix("n_spins")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(ln, "expected `n_spins <N>`"))?;
        let layout = Arc::new(BlockLayout::new(n_spins)?);
        let mut state = GcsState::zeros(layout);

        for k in 0..state.layout.len() {
            let irrep = *state.irrep(k);
            let dim = irrep.dim();
            let (ln, block_line) = lines.next().ok_or_else(|| parse_err(0, "truncated snapshot"))?;
            let two_j: u32 = block_line
                .strip_prefix("block")
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err(ln, "expected `block <2J>`"))?;
            if two_j != irrep.two_j {
                return Err(parse_err(
                    ln,
                    format!("expected block 2J = {}, found {two_j}", irrep.two_j),
                ));
            }
            for a in 0..dim {
                let (ln, row) = lines.next().ok_or_else(|| parse_err(0, "truncated block"))?;
                let nums: Vec<f64> = row
                    .split_whitespace()
                    .map(|tok| tok.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(ln, e.to_string()))?;
                if nums.len() != 2 * dim {
                    return Err(parse_err(
                        ln,
                        format!("expected {} numbers, found {}", 2 * dim, nums.len()),
                    ));
                }
                let block = state.block_mut(k);
                for b in 0..dim {
                    block[a * dim + b] = C64::new(nums[2 * b], nums[2 * b + 1]);
                }
            }
        }
        match lines.next() {
            Some((_, "end")) => {}
            Some((ln, other)) => return Err(parse_err(ln, format!("expected `end`, found `{other}`"))),
            None => return Err(parse_err(0, "missing `end`")),
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing content after `end`"));
        }
        Ok(state)
    }
}
