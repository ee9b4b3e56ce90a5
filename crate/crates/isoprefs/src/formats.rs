//! On-disk formats: dataset and score CSVs, the `RIMG` range-image binary and
//! preference-matrix dumps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use isoprefs_core::geometry::{Label, LabeledDataset};
use isoprefs_core::preference::PreferenceMatrix;
use isoprefs_core::sliding::RangeImage;

/// Noise scale assigned to datasets read from CSV, which carry none.
pub const DEFAULT_CSV_SIGMA: f64 = 0.02;

const MAGIC: &[u8; 4] = b"RIMG";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: isoprefs_core::Error },
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FormatError + '_ {
    move |source| FormatError::Csv { path: path.to_path_buf(), source }
}

fn malformed(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Malformed { path: path.to_path_buf(), message: message.into() }
}

/// `x` with 9 significant digits, in plain notation when the exponent lies in
/// `[-5, 9)` and scientific notation otherwise.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer(path)?))
}

/// Writes `x1,…,xd,label[,structure]`.
pub fn write_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    if data.structure().is_some() {
        header.push("structure".into());
    }
    w.write_record(&header).map_err(csv_err(path))?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..data.len() {
        record.clear();
        record.extend(data.point(i).iter().map(|v| v.to_string()));
        record.push(data.labels()[i].as_u8().to_string());
        if let Some(s) = data.structure() {
            record.push(s[i].to_string());
        }
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a dataset CSV. The noise scale is `sigma`.
pub fn read_dataset(path: &Path, sigma: f64) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r.headers().map_err(csv_err(path))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let label_col = names.iter().position(|h| *h == "label").ok_or_else(|| malformed(path, "missing label column"))?;
    let dim = label_col;
    if dim < 2 || names[..dim].iter().enumerate().any(|(j, h)| *h != format!("x{}", j + 1)) {
        return Err(malformed(path, "header must start with x1,...,xd (d >= 2) followed by label"));
    }
    let structure_col = match &names[label_col + 1..] {
        [] => None,
        ["structure"] => Some(label_col + 1),
        _ => return Err(malformed(path, "unexpected columns after label")),
    };
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut structure = structure_col.map(|_| Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = line + 2;
        for j in 0..dim {
            let v: f64 = rec[j].trim().parse().map_err(|_| malformed(path, format!("line {row}: bad coordinate {:?}", &rec[j])))?;
            coords.push(v);
        }
        labels.push(match rec[label_col].trim() {
            "0" => Label::Genuine,
            "1" => Label::Anomaly,
            other => return Err(malformed(path, format!("line {row}: label must be 0 or 1, got {other:?}"))),
        });
        if let (Some(col), Some(ids)) = (structure_col, structure.as_mut()) {
            let id: i32 = rec[col].trim().parse().map_err(|_| malformed(path, format!("line {row}: bad structure id")))?;
            ids.push(id);
        }
    }
    LabeledDataset::new(dim, coords, labels, structure, sigma).map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}

/// Labels column of a dataset CSV.
pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    read_dataset(path, DEFAULT_CSV_SIGMA).map(|d| d.labels().to_vec())
}

/// Writes `index,score`.
pub fn write_scores(path: &Path, scores: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let mut body = String::with_capacity(16 * scores.len() + 12);
    body.push_str("index,score\n");
    for (i, s) in scores.iter().enumerate() {
        body.push_str(&format!("{i},{}\n", sig9(*s)));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Writes `index,score,label`.
pub fn write_stream_scores(path: &Path, scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(malformed(path, "scores and labels differ in length"));
    }
    let mut w = writer(path)?;
    writeln!(w, "index,score,label").map_err(io_err(path))?;
    for (i, (s, l)) in scores.iter().zip(labels).enumerate() {
        writeln!(w, "{i},{},{}", sig9(*s), l.as_u8()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `row,col,score` for every pixel, NaN where nothing was scored.
pub fn write_score_map(path: &Path, width: usize, scores: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "row,col,score").map_err(io_err(path))?;
    for (p, s) in scores.iter().enumerate() {
        writeln!(w, "{},{},{}", p / width, p % width, sig9(*s)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads the score column of an `index,score[,…]` or `row,col,score` file.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r.headers().map_err(csv_err(path))?.clone();
    let col = header.iter().position(|h| h.trim() == "score").ok_or_else(|| malformed(path, "missing score column"))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let field = rec.get(col).ok_or_else(|| malformed(path, format!("line {}: missing score", line + 2)))?;
        out.push(field.trim().parse().map_err(|_| malformed(path, format!("line {}: bad score {field:?}", line + 2)))?);
    }
    Ok(out)
}

/// One row per point, 9 significant digits.
pub fn write_preferences(path: &Path, matrix: &PreferenceMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let m = matrix.cols();
    for row in matrix.values().chunks(m.max(1)) {
        let line: Vec<String> = row.iter().map(|v| sig9(*v as f64)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_rimg(path: &Path, image: &RangeImage) -> Result<()> {
    let mut w = writer(path)?;
    let (h, wd) = (image.height(), image.width());
    let mut buf = Vec::with_capacity(12 + h * wd * 14);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(wd as u32).to_le_bytes());
    for v in image.xyz() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(image.valid().iter().map(|&v| v as u8));
    if let Some(gt) = image.gt_mask() {
        buf.extend(gt.iter().map(|&v| v as u8));
    }
    w.write_all(&buf).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_rimg(path: &Path) -> Result<RangeImage> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(malformed(path, "not a RIMG file"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (h, w) = (word(4), word(8));
    let pixels = h.checked_mul(w).ok_or_else(|| malformed(path, "image size overflows"))?;
    let xyz_end = 12 + 12 * pixels;
    let valid_end = xyz_end + pixels;
    let gt = match bytes.len() {
        n if n == valid_end => None,
        n if n == valid_end + pixels => Some(bytes[valid_end..].iter().map(|&b| b != 0).collect()),
        n => return Err(malformed(path, format!("expected {valid_end} or {} bytes for a {h}x{w} image, found {n}", valid_end + pixels))),
    };
    let xyz = bytes[12..xyz_end].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let valid = bytes[xyz_end..valid_end].iter().map(|&b| b != 0).collect();
    RangeImage::new(h, w, xyz, valid, gt).map_err(|source| FormatError::Core { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use isoprefs_core::datasets::{generate_primitive_2d, generate_surface_grid, Defect, PrimitiveKind, SurfaceShape};

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.5), "0.500000000");
        assert_eq!(sig9(0.123456789123), "0.123456789");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.99999999999), "1.00000000");
        assert_eq!(sig9(123.0), "123.000000");
        assert_eq!(sig9(-2.5e-7), "-2.50000000e-7");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(f64::NAN), "NaN");
        let x = 0.734_562_191_7;
        assert!((sig9(x).parse::<f64>().unwrap() - x).abs() < 1e-9);
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = generate_primitive_2d(PrimitiveKind::Circle3, 2);
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path, data.noise_sigma()).unwrap();
        assert_eq!(back, data);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,label,structure\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn rejects_bad_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        for body in ["a,b,label\n1,2,0\n", "x1,x2,label\n1,2,3\n", "x1,x2,label\n1,nope,0\n", "x1,label\n1,0\n"] {
            std::fs::write(&path, body).unwrap();
            assert!(read_dataset(&path, 0.1).is_err(), "{body}");
        }
    }

    #[test]
    fn rimg_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.rimg");
        let defect = Defect { center: (8.0, 8.0), radius_px: 3.0, depth_sigmas: 5.0 };
        let img = generate_surface_grid(SurfaceShape::SphereCap, 16, 0.01, Some(defect), 1).unwrap();
        write_rimg(&path, &img).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 12 + 16 * 16 * 14);
        assert_eq!(read_rimg(&path).unwrap(), img);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_rimg(&path).is_err());
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let scores = [0.25, 0.612345678912, 1.0];
        write_scores(&path, &scores).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "index,score\n0,0.250000000\n1,0.612345679\n2,1.00000000\n");
        let back = read_scores(&path).unwrap();
        assert!(back.iter().zip(&scores).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
