use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::FeatureDataset;
use crate::error::{Error, Result};

/// On-disk encodings for one modality block.
///
/// * `Cmgf` — binary: magic `CMGF`, u16 version, u32 n, u32 d, u32 C,
///   n u32 labels, then n×d IEEE-754 32-bit little-endian values row-major.
/// * `Csv` — header `label,f0..f{d-1}`, one row per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Cmgf,
    Csv,
}

impl FileFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            FileFormat::Cmgf => "cmgf",
            FileFormat::Csv => "csv",
        }
    }
}

const CMGF_MAGIC: &[u8; 4] = b"CMGF";
const CMGF_VERSION: u16 = 1;
/// magic + version + n + d + C
const CMGF_HEADER_LEN: u64 = 4 + 2 + 4 + 4 + 4;

/// Writes one modality block. Features are truncated to f32 storage.
pub fn write_cmgf(path: &Path, features: &Array2<f64>, labels: &[usize], classes: usize) -> Result<()> {
    if features.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    w.write_all(CMGF_MAGIC).map_err(io_err)?;
    w.write_u16::<LittleEndian>(CMGF_VERSION).map_err(io_err)?;
    w.write_u32::<LittleEndian>(features.nrows() as u32).map_err(io_err)?;
    w.write_u32::<LittleEndian>(features.ncols() as u32).map_err(io_err)?;
    w.write_u32::<LittleEndian>(classes as u32).map_err(io_err)?;
    for &label in labels {
        w.write_u32::<LittleEndian>(label as u32).map_err(io_err)?;
    }
    for &v in features.iter() {
        w.write_f32::<LittleEndian>(v as f32).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads one modality block: (features widened to f64, labels, class count).
pub fn read_cmgf(path: &Path) -> Result<(Array2<f64>, Vec<usize>, usize)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let p = path.display().to_string();

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(&p, "truncated header at byte offset 0"))?;
    if &magic != CMGF_MAGIC {
        return Err(Error::format(
            &p,
            format!("bad magic {magic:?} at byte offset 0, expected \"CMGF\""),
        ));
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|_| Error::format(&p, "truncated header at byte offset 4"))?;
    if version != CMGF_VERSION {
        return Err(Error::format(&p, format!("unsupported version {version}")));
    }
    let header_err = |_e: std::io::Error| Error::format(&p, "truncated header at byte offset 6");
    let n = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let classes = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }

    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let offset = CMGF_HEADER_LEN + 4 * i as u64;
        let label = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::format(&p, format!("truncated label block at byte offset {offset}")))?
            as usize;
        if label >= classes {
            return Err(Error::format(
                &p,
                format!("label {label} at row {i} exceeds class count {classes}"),
            ));
        }
        labels.push(label);
    }

    let payload_start = CMGF_HEADER_LEN + 4 * n as u64;
    let mut data = Vec::with_capacity(n * d);
    for k in 0..n * d {
        let offset = payload_start + 4 * k as u64;
        let v = r.read_f32::<LittleEndian>().map_err(|_| {
            Error::format(
                &p,
                format!(
                    "truncated payload at byte offset {offset}: row {} of {n} declared rows",
                    k / d
                ),
            )
        })?;
        data.push(v as f64);
    }
    let features = Array2::from_shape_vec((n, d), data).expect("sized above");
    Ok((features, labels, classes))
}

/// Writes one modality block as CSV with header `label,f0..f{d-1}`.
pub fn write_csv_modality(path: &Path, features: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if features.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    write!(w, "label").map_err(io_err)?;
    for k in 0..features.ncols() {
        write!(w, ",f{k}").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;
    for (row, &label) in features.rows().into_iter().zip(labels) {
        write!(w, "{label}").map_err(io_err)?;
        for &v in row.iter() {
            // f32 storage precision, matching the binary format
            write!(w, ",{}", v as f32).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads one CSV modality block: (features, labels). Errors name line numbers.
pub fn load_csv_modality(path: &Path) -> Result<(Array2<f64>, Vec<usize>)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let r = BufReader::new(file);
    let p = path.display().to_string();
    let mut lines = r.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(&p, "missing header at line 1"))?;
    let header = header.map_err(|e| Error::io(&p, e))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"label") {
        return Err(Error::format(&p, "line 1: header must start with \"label\""));
    }
    let d = cols.len() - 1;
    for (k, col) in cols.iter().skip(1).enumerate() {
        if *col != format!("f{k}") {
            return Err(Error::format(
                &p,
                format!("line 1: expected header column f{k}, got {col:?}"),
            ));
        }
    }

    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&p, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::format(&p, format!("line {line_no}: invalid label")))?;
        labels.push(label);
        let mut count = 0;
        for field in fields {
            // Parse at the declared f32 storage precision so values agree
            // bit-for-bit with the binary encoding of the same dataset.
            let v: f32 = field.parse().map_err(|_| {
                Error::format(&p, format!("line {line_no}: invalid value {field:?}"))
            })?;
            data.push(v as f64);
            count += 1;
        }
        if count != d {
            return Err(Error::format(
                &p,
                format!("line {line_no}: expected {d} values, got {count}"),
            ));
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), data).expect("validated per line");
    Ok((features, labels))
}

/// Manifest pairing the two modality files of one dataset.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: FileFormat,
    image: String,
    text: String,
    categories: Vec<String>,
}

/// Writes both modality blocks plus a manifest; returns the manifest path.
pub fn save_dataset(
    ds: &FeatureDataset,
    dir: &Path,
    name: &str,
    format: FileFormat,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let ext = format.extension();
    let image_file = format!("{name}.img.{ext}");
    let text_file = format!("{name}.txt.{ext}");
    match format {
        FileFormat::Cmgf => {
            write_cmgf(&dir.join(&image_file), ds.image(), ds.labels(), ds.classes())?;
            write_cmgf(&dir.join(&text_file), ds.text(), ds.labels(), ds.classes())?;
        }
        FileFormat::Csv => {
            write_csv_modality(&dir.join(&image_file), ds.image(), ds.labels())?;
            write_csv_modality(&dir.join(&text_file), ds.text(), ds.labels())?;
        }
    }
    let manifest = Manifest {
        format,
        image: image_file,
        text: text_file,
        categories: ds.category_names().to_vec(),
    };
    let manifest_path = dir.join(format!("{name}.manifest.toml"));
    let body = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    std::fs::write(&manifest_path, body)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    Ok(manifest_path)
}

/// Loads a dataset from its manifest, validating pairing and label agreement.
pub fn load_dataset(manifest_path: &Path) -> Result<FeatureDataset> {
    let p = manifest_path.display().to_string();
    let body = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(&p, e))?;
    let manifest: Manifest =
        toml::from_str(&body).map_err(|e| Error::format(&p, format!("invalid manifest: {e}")))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let (image, img_labels) = match manifest.format {
        FileFormat::Cmgf => {
            let (f, l, c) = read_cmgf(&dir.join(&manifest.image))?;
            if c != manifest.categories.len() {
                return Err(Error::format(
                    &p,
                    format!(
                        "image block declares {c} classes, manifest lists {}",
                        manifest.categories.len()
                    ),
                ));
            }
            (f, l)
        }
        FileFormat::Csv => load_csv_modality(&dir.join(&manifest.image))?,
    };
    let (text, txt_labels) = match manifest.format {
        FileFormat::Cmgf => {
            let (f, l, _) = read_cmgf(&dir.join(&manifest.text))?;
            (f, l)
        }
        FileFormat::Csv => load_csv_modality(&dir.join(&manifest.text))?,
    };

    if image.nrows() != text.nrows() {
        return Err(Error::format(
            &p,
            format!(
                "row-count mismatch between modalities: image {} rows, text {} rows",
                image.nrows(),
                text.nrows()
            ),
        ));
    }
    if img_labels != txt_labels {
        return Err(Error::format(&p, "modality label blocks disagree"));
    }
    FeatureDataset::new(image, text, img_labels, manifest.categories)
}
