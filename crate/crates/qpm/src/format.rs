//! On-disk formats.
//!
//! Grids come in two encodings, told apart by their first bytes:
//!
//! * binary: `QPMGRID\0`, then little-endian `u16` version, `u8` d, `u8`
//!   symbol width in bytes, `u64` side, `u32` q, `u32` metadata length, the
//!   metadata (JSON, possibly empty), and `side^d` symbols row-major;
//! * text: optional `#` comment lines (`# meta {json}` carries metadata),
//!   a line `d side q`, then whitespace-separated symbols row-major.
//!
//! Hidden-shift instances are text files with a `[sealed]` section holding
//! the shift and the corrupted cells. [`read_shift_instance`] stops before
//! it; only [`read_sealed`] looks inside.

use std::fs;
use std::io::Write;
use std::path::Path;

use qpm_core::sieve::{HiddenShiftInstance, PhaseLabel};
use qpm_core::GridString;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const GRID_MAGIC: &[u8; 8] = b"QPMGRID\0";
pub const GRID_VERSION: u16 = 1;
const TEXT_TAG: &str = "# qpm grid 1";
const SHIFT_TAG: &str = "# qpm shift 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GridEncoding {
    #[default]
    Binary,
    Text,
}

impl GridEncoding {
    pub fn extension(self) -> &'static str {
        match self {
            GridEncoding::Binary => "qpg",
            GridEncoding::Text => "txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub grid: GridString,
    pub meta: Option<Value>,
}

pub fn encode_grid(grid: &GridString, meta: Option<&Value>, encoding: GridEncoding) -> Vec<u8> {
    match encoding {
        GridEncoding::Binary => encode_binary(grid, meta),
        GridEncoding::Text => encode_text(grid, meta).into_bytes(),
    }
}

fn encode_binary(grid: &GridString, meta: Option<&Value>) -> Vec<u8> {
    let meta = meta
        .map(|m| serde_json::to_vec(m).expect("JSON values serialize"))
        .unwrap_or_default();
    let width = grid.symbol_width();
    let mut out = Vec::with_capacity(28 + meta.len() + grid.len() * width);
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.push(grid.dims() as u8);
    out.push(width as u8);
    out.extend_from_slice(&(grid.side() as u64).to_le_bytes());
    out.extend_from_slice(&grid.alphabet().to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for s in grid.symbols() {
        out.extend_from_slice(&s.to_le_bytes()[..width]);
    }
    out
}

fn encode_text(grid: &GridString, meta: Option<&Value>) -> String {
    let mut out = String::new();
    out.push_str(TEXT_TAG);
    out.push('\n');
    if let Some(m) = meta {
        out.push_str("# meta ");
        out.push_str(&serde_json::to_string(m).expect("JSON values serialize"));
        out.push('\n');
    }
    out.push_str(&text_body(grid));
    out
}

// `d side q` and one line per run along the last axis.
fn text_body(grid: &GridString) -> String {
    let mut out = format!("{} {} {}\n", grid.dims(), grid.side(), grid.alphabet());
    let syms = grid.to_vec();
    for row in syms.chunks(grid.side()) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<GridFile> {
    if bytes.starts_with(GRID_MAGIC) {
        decode_binary(bytes, path)
    } else {
        let text =
            std::str::from_utf8(bytes).map_err(|_| CliError::format(path, "neither a binary grid nor UTF-8 text"))?;
        decode_text(text, path)
    }
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<GridFile> {
    let bad = |m: &str| CliError::format(path, m.to_string());
    let mut cur = &bytes[GRID_MAGIC.len()..];
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(bad("truncated grid file"));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    let version = u16::from_le_bytes(take(2)?.try_into().expect("two bytes"));
    if version != GRID_VERSION {
        return Err(bad(&format!("unsupported grid version {version}")));
    }
    let dims = take(1)?[0] as usize;
    let width = take(1)?[0] as usize;
    if ![1, 2, 4].contains(&width) {
        return Err(bad(&format!("symbol width {width} is not 1, 2 or 4")));
    }
    let side = u64::from_le_bytes(take(8)?.try_into().expect("eight bytes"));
    let alphabet = u32::from_le_bytes(take(4)?.try_into().expect("four bytes"));
    let meta_len = u32::from_le_bytes(take(4)?.try_into().expect("four bytes")) as usize;
    let meta_bytes = take(meta_len)?;
    let meta = if meta_len == 0 {
        None
    } else {
        Some(serde_json::from_slice(meta_bytes).map_err(|e| bad(&format!("metadata: {e}")))?)
    };
    let side = usize::try_from(side).map_err(|_| bad("side does not fit in memory"))?;
    let len = qpm_core::grid::volume(dims, side).ok_or_else(|| bad("side^d overflows"))?;
    let body = take(len.checked_mul(width).ok_or_else(|| bad("grid too large"))?)?;
    if !cur.is_empty() {
        return Err(bad("trailing bytes after the symbols"));
    }
    let symbols = body
        .chunks_exact(width)
        .map(|c| {
            let mut b = [0u8; 4];
            b[..width].copy_from_slice(c);
            u32::from_le_bytes(b)
        })
        .collect();
    let grid = GridString::new(dims, side, alphabet, symbols).map_err(|e| bad(&e.to_string()))?;
    Ok(GridFile { grid, meta })
}

fn decode_text(text: &str, path: &Path) -> Result<GridFile> {
    let mut meta = None;
    let mut body = String::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('#') {
            if let Some(json) = rest.trim_start().strip_prefix("meta ") {
                meta = Some(serde_json::from_str(json).map_err(|e| CliError::format(path, format!("metadata: {e}")))?);
            }
            continue;
        }
        body.push_str(t);
        body.push('\n');
    }
    let grid = parse_text_body(&mut body.split_whitespace(), path)?;
    Ok(GridFile { grid, meta })
}

fn next_num<'a, T: std::str::FromStr>(words: &mut impl Iterator<Item = &'a str>, what: &str, path: &Path) -> Result<T> {
    let w = words
        .next()
        .ok_or_else(|| CliError::format(path, format!("missing {what}")))?;
    w.parse()
        .map_err(|_| CliError::format(path, format!("bad {what} {w:?}")))
}

// Reads `d side q` and exactly side^d symbols.
fn parse_text_body<'a>(words: &mut impl Iterator<Item = &'a str>, path: &Path) -> Result<GridString> {
    let dims: usize = next_num(words, "dimension", path)?;
    let side: usize = next_num(words, "side", path)?;
    let alphabet: u32 = next_num(words, "alphabet size", path)?;
    let len = qpm_core::grid::volume(dims, side).ok_or_else(|| CliError::format(path, "side^d overflows"))?;
    let symbols = (0..len)
        .map(|_| next_num(words, "symbol", path))
        .collect::<Result<Vec<u32>>>()?;
    GridString::new(dims, side, alphabet, symbols).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    decode_grid(&read_bytes(path)?, path)
}

pub fn write_grid(path: &Path, grid: &GridString, meta: Option<&Value>, encoding: GridEncoding) -> Result<()> {
    write_bytes(path, &encode_grid(grid, meta, encoding))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json_bytes(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e.to_string()))
}

/// Answers kept out of the algorithm's reach.
#[derive(Debug, Clone, PartialEq)]
pub struct SealedShift {
    pub shift: Option<PhaseLabel>,
    pub corrupted: Vec<usize>,
}

pub fn encode_shift_instance(inst: &HiddenShiftInstance, meta: Option<&Value>) -> String {
    let mut out = String::new();
    out.push_str(SHIFT_TAG);
    out.push('\n');
    if let Some(m) = meta {
        out.push_str("# meta ");
        out.push_str(&serde_json::to_string(m).expect("JSON values serialize"));
        out.push('\n');
    }
    out.push_str(&format!(
        "{} {} {} {}\n",
        inst.n_bits(),
        inst.dims(),
        inst.f().alphabet(),
        inst.noise()
    ));
    out.push_str("[f]\n");
    out.push_str(&text_body(inst.f()));
    out.push_str("[g]\n");
    out.push_str(&text_body(inst.g()));
    out.push_str("[sealed]\n");
    if let Some(s) = inst.sealed_shift() {
        let comps: Vec<String> = s.unseal().components().iter().map(u32::to_string).collect();
        out.push_str(&format!("shift {}\n", comps.join(" ")));
    }
    let corrupted: Vec<String> = inst.corrupted().unseal().iter().map(usize::to_string).collect();
    out.push_str(&format!("corrupted {}\n", corrupted.join(" ")).replace(" \n", "\n"));
    out
}

pub fn write_shift_instance(path: &Path, inst: &HiddenShiftInstance, meta: Option<&Value>) -> Result<()> {
    write_bytes(path, encode_shift_instance(inst, meta).as_bytes())
}

// Sections in order; the sealed one is returned separately and untouched.
fn split_shift_file<'a>(text: &'a str, path: &Path) -> Result<(&'a str, &'a str, &'a str, Option<&'a str>)> {
    let bad = |m: &str| CliError::format(path, m.to_string());
    let rest = text
        .trim_start()
        .strip_prefix(SHIFT_TAG)
        .ok_or_else(|| bad("not a shift instance file"))?;
    let (header, rest) = rest.split_once("[f]").ok_or_else(|| bad("missing [f] section"))?;
    // The header is the last non-comment line before [f].
    let header = header
        .lines()
        .rfind(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| bad("missing header line"))?;
    let (f, rest) = rest.split_once("[g]").ok_or_else(|| bad("missing [g] section"))?;
    let (g, sealed) = match rest.split_once("[sealed]") {
        Some((g, s)) => (g, Some(s)),
        None => (rest, None),
    };
    Ok((header, f, g, sealed))
}

/// The public part of a shift instance file: tables and noise level.
pub fn read_shift_instance(path: &Path) -> Result<HiddenShiftInstance> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::format(path, "shift instance must be text"))?;
    let (header, f, g, _) = split_shift_file(text, path)?;
    let mut h = header.split_whitespace();
    let n_bits: u32 = next_num(&mut h, "n", path)?;
    let dims: usize = next_num(&mut h, "d", path)?;
    let alphabet: u32 = next_num(&mut h, "q", path)?;
    let noise: f64 = next_num(&mut h, "noise", path)?;
    let f = parse_text_body(&mut f.split_whitespace(), path)?;
    let g = parse_text_body(&mut g.split_whitespace(), path)?;
    if f.dims() != dims || f.alphabet() != alphabet {
        return Err(CliError::format(path, "header disagrees with the f table"));
    }
    Ok(HiddenShiftInstance::new(n_bits, f, g, noise)?)
}

/// Test tooling only: the sealed section of a shift instance file.
pub fn read_sealed(path: &Path) -> Result<SealedShift> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::format(path, "shift instance must be text"))?;
    let (header, _, _, sealed) = split_shift_file(text, path)?;
    let n_bits: u32 = next_num(&mut header.split_whitespace(), "n", path)?;
    let mut out = SealedShift {
        shift: None,
        corrupted: Vec::new(),
    };
    for line in sealed.unwrap_or("").lines() {
        let mut w = line.split_whitespace();
        match w.next() {
            Some("shift") => {
                let comps = w.map(|c| c.parse()).collect::<Result<Vec<u32>, _>>();
                let comps = comps.map_err(|_| CliError::format(path, "bad sealed shift"))?;
                out.shift = Some(PhaseLabel::new(n_bits, &comps)?);
            }
            Some("corrupted") => {
                let cells = w.map(|c| c.parse()).collect::<Result<Vec<usize>, _>>();
                out.corrupted = cells.map_err(|_| CliError::format(path, "bad corrupted list"))?;
            }
            Some(other) => return Err(CliError::format(path, format!("unknown sealed entry {other:?}"))),
            None => {}
        }
    }
    Ok(out)
}

/// Test tooling only: the instance with its sealed answers restored.
pub fn read_shift_instance_unsealed(path: &Path) -> Result<HiddenShiftInstance> {
    let inst = read_shift_instance(path)?;
    let sealed = read_sealed(path)?;
    let noise = inst.noise();
    let mut inst = inst.with_corrupted(noise, sealed.corrupted)?;
    if let Some(s) = sealed.shift {
        inst = inst.with_sealed_shift(s)?;
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpm_core::instances::{gen_shift_instance, inject_noise};

    fn grid() -> GridString {
        GridString::from_fn(2, 5, 300, |x| (x[0] * 61 + x[1] * 7) as u32 % 300).unwrap()
    }

    #[test]
    fn binary_round_trip_with_metadata() {
        let g = grid();
        let meta = serde_json::json!({"seed": 4});
        let bytes = encode_grid(&g, Some(&meta), GridEncoding::Binary);
        assert_eq!(&bytes[..8], GRID_MAGIC);
        assert_eq!(bytes[11], 2);
        let back = decode_grid(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.meta, Some(meta));
    }

    #[test]
    fn text_round_trip_and_plain_input() {
        let g = grid();
        let text = encode_grid(&g, None, GridEncoding::Text);
        assert_eq!(decode_grid(&text, Path::new("x")).unwrap().grid, g);
        let plain = decode_grid(b"1 4 3\n0 1 2 0\n", Path::new("x")).unwrap();
        assert_eq!(plain.grid.to_vec(), vec![0, 1, 2, 0]);
        assert!(plain.meta.is_none());
    }

    #[test]
    fn malformed_grids_are_rejected() {
        assert!(decode_grid(b"1 4 3\n0 1 2\n", Path::new("x")).is_err());
        assert!(decode_grid(b"1 2 2\n0 5\n", Path::new("x")).is_err());
        let mut bytes = encode_grid(&grid(), None, GridEncoding::Binary);
        bytes.pop();
        assert!(decode_grid(&bytes, Path::new("x")).is_err());
        bytes[8] = 9;
        assert!(decode_grid(&bytes, Path::new("x")).is_err());
    }

    #[test]
    fn shift_file_keeps_the_sealed_section_apart() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.shift");
        let inst = inject_noise(&gen_shift_instance(3, 2, None, 1).unwrap(), 0.1, 2).unwrap();
        write_shift_instance(&path, &inst, Some(&serde_json::json!({"seed": 1}))).unwrap();
        let public = read_shift_instance(&path).unwrap();
        assert!(public.sealed_shift().is_none());
        assert!(public.corrupted().unseal().is_empty());
        assert_eq!(public.g(), inst.g());
        assert_eq!(public.noise(), inst.noise());
        assert_eq!(read_shift_instance_unsealed(&path).unwrap(), inst);
    }
}
