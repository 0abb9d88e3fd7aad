//! Feature-file formats.
//!
//! Binary layout (all little-endian): magic "NCFB", version u16, kind u8
//! (0 train / 1 test), K u32, d u32, N u64, then N records of
//! (label u32, d f64 values). Round-trips are bit-exact.
//!
//! CSV layout: header `label,f0,...,f{d-1}`, one sample per row, decimal
//! floats. Parse errors carry the 1-based line number.

use crate::adjust::ClassStats;
use crate::error::{Error, Result};
use crate::sim::{FeatureSet, SetKind};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"NCFB";
const VERSION: u16 = 1;

pub fn write_binary(set: &FeatureSet, path: &Path) -> Result<()> {
    set.validate()?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match set.kind {
        SetKind::Train => 0u8,
        SetKind::Test => 1u8,
    }])?;
    w.write_all(&(set.num_classes as u32).to_le_bytes())?;
    w.write_all(&(set.feature_dim as u32).to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    for i in 0..set.len() {
        w.write_all(&set.labels[i].to_le_bytes())?;
        for v in set.row(i) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<FeatureSet> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("file too short for header"))?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic (expected NCFB)"));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let mut kind_byte = [0u8; 1];
    r.read_exact(&mut kind_byte)?;
    let kind = match kind_byte[0] {
        0 => SetKind::Train,
        1 => SetKind::Test,
        other => return Err(Error::format(format!("bad kind byte {other}"))),
    };
    let num_classes = read_u32(&mut r)? as usize;
    let feature_dim = read_u32(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    if num_classes == 0 || feature_dim == 0 {
        return Err(Error::format("empty class or feature dimension"));
    }
    let mut labels = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * feature_dim);
    let mut buf = vec![0u8; 4 + 8 * feature_dim];
    for rec in 0..n {
        r.read_exact(&mut buf)
            .map_err(|_| Error::format_at("truncated record", rec as u64 + 1))?;
        let label = u32::from_le_bytes(buf[0..4].try_into().unwrap());
        if label as usize >= num_classes {
            return Err(Error::format_at(
                format!("label {label} out of range [0, {num_classes})"),
                rec as u64 + 1,
            ));
        }
        labels.push(label);
        for j in 0..feature_dim {
            let off = 4 + 8 * j;
            let v = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format_at("non-finite feature value", rec as u64 + 1));
            }
            features.push(v);
        }
    }
    // trailing garbage means a corrupt writer
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::format("trailing bytes after final record"));
    }
    Ok(FeatureSet { kind, num_classes, feature_dim, features, labels })
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn write_csv(set: &FeatureSet, path: &Path) -> Result<()> {
    set.validate()?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "label")?;
    for j in 0..set.feature_dim {
        write!(w, ",f{j}")?;
    }
    writeln!(w)?;
    for i in 0..set.len() {
        write!(w, "{}", set.labels[i])?;
        for v in set.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV feature file; `kind` is not stored in the format, so the
/// caller names the split.
pub fn read_csv(path: &Path, kind: SetKind) -> Result<FeatureSet> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format_at("missing header", 1))??;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.first() != Some(&"label") || cols.len() < 2 {
        return Err(Error::format_at(
            "header must be label,f0,...,f{d-1}",
            1,
        ));
    }
    for (j, c) in cols[1..].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(Error::format_at(format!("unexpected header column '{c}'"), 1));
        }
    }
    let feature_dim = cols.len() - 1;
    let mut labels = Vec::new();
    let mut features = Vec::new();
    let mut max_label = 0u32;
    for (idx, line) in lines.enumerate() {
        let lineno = idx as u64 + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.trim_end().split(',');
        let label: u32 = parts
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::format_at("bad label", lineno))?;
        max_label = max_label.max(label);
        labels.push(label);
        let mut count = 0;
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| Error::format_at(format!("bad float '{p}'"), lineno))?;
            if !v.is_finite() {
                return Err(Error::format_at("non-finite feature value", lineno));
            }
            features.push(v);
            count += 1;
        }
        if count != feature_dim {
            return Err(Error::format_at(
                format!("expected {feature_dim} values, got {count}"),
                lineno,
            ));
        }
    }
    if labels.is_empty() {
        return Err(Error::format("no data rows"));
    }
    Ok(FeatureSet {
        kind,
        num_classes: max_label as usize + 1,
        feature_dim,
        features,
        labels,
    })
}

/// Reads a feature file, sniffing the binary magic and falling back to CSV
/// (CSV files are assumed to be test-style splits unless re-tagged).
pub fn read_feature_file(path: &Path) -> Result<FeatureSet> {
    let mut head = [0u8; 4];
    let n = std::fs::File::open(path)?.read(&mut head)?;
    if n == 4 && &head == MAGIC {
        read_binary(path)
    } else {
        read_csv(path, SetKind::Test)
    }
}

/// Like [`read_feature_file`] but checks every label against a known class
/// count, reporting the offending row.
pub fn read_feature_file_expecting(path: &Path, num_classes: usize) -> Result<FeatureSet> {
    let mut set = read_feature_file(path)?;
    if set.num_classes > num_classes {
        let row = set
            .labels
            .iter()
            .position(|&l| l as usize >= num_classes)
            .unwrap_or(0);
        return Err(Error::format_at(
            format!(
                "label {} out of range [0, {num_classes})",
                set.labels[row]
            ),
            row as u64 + 2, // header line + 1-based data row
        ));
    }
    set.num_classes = num_classes;
    Ok(set)
}

/// Serialized class statistics (integral counts).
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct StatsFile {
    pub num_classes: usize,
    pub counts: Vec<u64>,
    pub mean_norms: Vec<f64>,
}

pub fn write_stats(stats: &ClassStats, path: &Path) -> Result<()> {
    let file = StatsFile {
        num_classes: stats.num_classes(),
        counts: stats.counts().iter().map(|&c| c.round() as u64).collect(),
        mean_norms: stats.mean_norms().to_vec(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::format(format!("stats serialization: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_stats(path: &Path) -> Result<ClassStats> {
    let text = std::fs::read_to_string(path)?;
    let file: StatsFile = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("stats parse: {e}")))?;
    if file.counts.len() != file.num_classes || file.mean_norms.len() != file.num_classes {
        return Err(Error::format("stats file length mismatch"));
    }
    ClassStats::from_integer_counts(&file.counts, file.mean_norms)
}
