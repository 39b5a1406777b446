//! On-disk table format.
//!
//! A file is a text header padded with spaces to a multiple of 4096 bytes,
//! followed by the values as little-endian `f32` in g-major order. The header
//! is a list of `key = value` lines:
//!
//! ```text
//! LANEWISE-QTABLE
//! version = 1
//! header_bytes = 00004096
//! axes = 3
//! shape = 101 121 41
//! g = 0.0 0.01 0.02 ...
//! mu = -5.0 -4.95 ...
//! sigma = 0.0 0.05 ...
//! trials_per_cell = 100000
//! seed = 7
//! layout = g-major f32le
//! checksum = crc32:1a2b3c4d
//! ```
//!
//! Axis values are written in shortest round-trip form. The checksum is a
//! CRC-32 of the whole file with the checksum digits replaced by `00000000`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{GridAxes, QTable};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const MAGIC: &str = "LANEWISE-QTABLE\n";
const BLOCK: usize = 4096;
const LAYOUT: &str = "g-major f32le";
const CHECKSUM_PREFIX: &str = "checksum = crc32:";

fn join(axis: &[f64]) -> String {
    axis.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn header_text(table: &QTable, header_bytes: usize, checksum: u32) -> String {
    let axes = table.axes();
    let (ng, nmu, nsig) = axes.shape();
    format!(
        "{MAGIC}version = {FORMAT_VERSION}\nheader_bytes = {header_bytes:08}\naxes = 3\n\
         shape = {ng} {nmu} {nsig}\ng = {}\nmu = {}\nsigma = {}\n\
         trials_per_cell = {}\nseed = {}\nlayout = {LAYOUT}\n{CHECKSUM_PREFIX}{checksum:08x}\n",
        join(axes.g()),
        join(axes.mu()),
        join(axes.sigma()),
        table.trials_per_cell(),
        table.seed(),
    )
}

fn pad(mut text: String, header_bytes: usize) -> Vec<u8> {
    let fill = header_bytes - text.len() - 1;
    text.extend(std::iter::repeat_n(' ', fill));
    text.push('\n');
    text.into_bytes()
}

fn checksum_field(header: &[u8]) -> Option<std::ops::Range<usize>> {
    let at = header
        .windows(CHECKSUM_PREFIX.len())
        .position(|w| w == CHECKSUM_PREFIX.as_bytes())?
        + CHECKSUM_PREFIX.len();
    (at + 8 <= header.len()).then_some(at..at + 8)
}

fn crc_with_blank_field(header: &[u8], field: std::ops::Range<usize>, payload: &[u8]) -> u32 {
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&header[..field.start]);
    hasher.update(b"00000000");
    hasher.update(&header[field.end..]);
    hasher.update(payload);
    hasher.finalize()
}

/// Serializes `table` in the format described at module level.
pub fn write_table<W: Write>(table: &QTable, mut out: W) -> io::Result<()> {
    let unpadded = header_text(table, 0, 0).len() + 1;
    let header_bytes = unpadded.div_ceil(BLOCK) * BLOCK;
    let mut header = pad(header_text(table, header_bytes, 0), header_bytes);
    let payload: Vec<u8> = table.values().iter().flat_map(|v| v.to_le_bytes()).collect();

    let field = checksum_field(&header).expect("header always carries a checksum field");
    let crc = crc_with_blank_field(&header, field.clone(), &payload);
    header[field].copy_from_slice(format!("{crc:08x}").as_bytes());

    out.write_all(&header)?;
    out.write_all(&payload)?;
    out.flush()
}

pub fn save_table(table: &QTable, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    write_table(table, io::BufWriter::new(file))?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<QTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_table(&bytes)
}

struct Header<'a> {
    lines: Vec<(&'a str, &'a str)>,
}

impl<'a> Header<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let mut lines = Vec::new();
        for line in text.lines().skip(1) {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Integrity(format!("malformed header line {line:?}")))?;
            lines.push((k, v));
        }
        Ok(Header { lines })
    }

    fn get(&self, key: &str) -> Result<&'a str> {
        self.lines
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Integrity(format!("header has no {key:?} entry")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::Integrity(format!("bad {key} value {raw:?}")))
    }

    fn axis(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Integrity(format!("bad {key} axis value {s:?}"))))
            .collect()
    }
}

/// Parses a table from the bytes of a file written by [`write_table`].
pub fn read_table(bytes: &[u8]) -> Result<QTable> {
    if !bytes.starts_with(MAGIC.as_bytes()) {
        return Err(Error::Integrity("missing LANEWISE-QTABLE header".into()));
    }
    // header_bytes sits on a fixed line inside the first block
    let first = &bytes[..bytes.len().min(BLOCK)];
    let first = std::str::from_utf8(first).unwrap_or_else(|e| {
        std::str::from_utf8(&first[..e.valid_up_to()]).unwrap_or_default()
    });
    let header_bytes: usize = first
        .lines()
        .find_map(|l| l.strip_prefix("header_bytes = "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Integrity("header_bytes entry missing or malformed".into()))?;
    if header_bytes == 0 || !header_bytes.is_multiple_of(BLOCK) {
        return Err(Error::Integrity(format!("header_bytes {header_bytes} is not a multiple of {BLOCK}")));
    }
    if bytes.len() < header_bytes {
        return Err(Error::Truncated { expected: header_bytes, found: bytes.len() });
    }
    let (head, payload) = bytes.split_at(header_bytes);
    let text = std::str::from_utf8(head).map_err(|_| Error::Integrity("header is not UTF-8".into()))?;
    let header = Header::parse(text)?;

    let version: u32 = header.number("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let n_axes: usize = header.number("axes")?;
    if n_axes != 3 {
        return Err(Error::Shape(format!("expected 3 axes, header declares {n_axes}")));
    }
    let shape: Vec<usize> = header
        .get("shape")?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Integrity(format!("bad shape entry {s:?}"))))
        .collect::<Result<_>>()?;
    if shape.len() != 3 {
        return Err(Error::Shape(format!("shape lists {} axis lengths, expected 3", shape.len())));
    }
    let (g, mu, sigma) = (header.axis("g")?, header.axis("mu")?, header.axis("sigma")?);
    for (name, axis, n) in [("g", &g, shape[0]), ("mu", &mu, shape[1]), ("sigma", &sigma, shape[2])] {
        if axis.len() != n {
            return Err(Error::Shape(format!("{name} axis has {} values, shape says {n}", axis.len())));
        }
    }
    if header.get("layout")? != LAYOUT {
        return Err(Error::Integrity(format!("unknown layout {:?}", header.get("layout")?)));
    }
    let cells = shape.iter().product::<usize>();
    let expected = header_bytes + cells * 4;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::Integrity(format!("{} trailing bytes after values", bytes.len() - expected)));
    }

    let stored = header
        .get("checksum")?
        .strip_prefix("crc32:")
        .and_then(|h| u32::from_str_radix(h, 16).ok())
        .ok_or_else(|| Error::Integrity("malformed checksum entry".into()))?;
    let field = checksum_field(head).ok_or_else(|| Error::Integrity("checksum field missing".into()))?;
    let computed = crc_with_blank_field(head, field, payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let axes = GridAxes::new(g, mu, sigma).map_err(|e| Error::Integrity(e.to_string()))?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    QTable::from_parts(axes, values, header.number("trials_per_cell")?, header.number("seed")?)
}
