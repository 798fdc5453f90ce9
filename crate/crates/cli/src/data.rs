//! Dataset ingestion and export.
//!
//! CSV: one header row, a `label` column holding class ids, every other
//! column a numeric feature. IDX: the big-endian MNIST layout, an unsigned
//! byte image file (magic `0x00000803`) paired with a label file (magic
//! `0x00000801`).

use std::path::Path;

use selcert::ensemble::Dataset;
use selcert::ClassId;

use crate::error::{CliError, CliResult};
use crate::fsio;

/// Features and labels before the class count is known.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<ClassId>,
}

impl RawTable {
    pub fn max_label(&self) -> Option<ClassId> {
        self.labels.iter().copied().max()
    }

    pub fn into_dataset(self, num_classes: u32, id_prefix: &str) -> CliResult<Dataset> {
        let ids = (0..self.labels.len())
            .map(|i| format!("{id_prefix}{i}"))
            .collect();
        Ok(Dataset::new(
            self.features,
            self.dim,
            self.labels,
            ids,
            num_classes,
        )?)
    }
}

pub fn read_csv(path: &Path) -> CliResult<RawTable> {
    let bytes = fsio::read(path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| CliError::format(path, e.to_string()))?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| CliError::format(path, "no `label` column in header"))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(CliError::format(path, "no feature columns"));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::format(path, e.to_string()))?;
        let line = row + 2;
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if j == label_col {
                let label = field.parse::<ClassId>().map_err(|_| {
                    CliError::format(path, format!("line {line}: bad label {field:?}"))
                })?;
                labels.push(label);
            } else {
                let x = field
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        CliError::format(path, format!("line {line}: bad feature {field:?}"))
                    })?;
                features.push(x);
            }
        }
    }
    if labels.is_empty() {
        return Err(CliError::format(path, "no data rows"));
    }
    Ok(RawTable {
        features,
        dim,
        labels,
    })
}

/// Writes `x0..x{d-1},label` rows.
pub fn write_csv(path: &Path, data: &Dataset) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    let csv_err = |e: csv::Error| CliError::format(path, e.to_string());
    out.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut fields: Vec<String> = data.row(i).iter().map(|x| x.to_string()).collect();
        fields.push(data.label(i).to_string());
        out.write_record(&fields).map_err(csv_err)?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| CliError::format(path, e.to_string()))?;
    fsio::write_atomic(path, &bytes)
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> CliResult<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| CliError::format(path, "truncated IDX header"))
}

fn idx_body<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> CliResult<&'a [u8]> {
    match bytes.len().checked_sub(header) {
        Some(rest) if rest == len => Ok(&bytes[header..]),
        _ => Err(CliError::format(
            path,
            format!(
                "expected {len} data bytes after the header, found {}",
                bytes.len().saturating_sub(header)
            ),
        )),
    }
}

/// Returns `(count, rows * cols, pixels)`.
pub fn read_idx_images(path: &Path) -> CliResult<(usize, usize, Vec<u8>)> {
    let bytes = fsio::read(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGES {
        return Err(CliError::format(
            path,
            format!("bad IDX image magic {magic:#010x}"),
        ));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    if rows * cols == 0 {
        return Err(CliError::format(path, "zero-sized images"));
    }
    let body = idx_body(&bytes, 16, count * rows * cols, path)?;
    Ok((count, rows * cols, body.to_vec()))
}

pub fn read_idx_labels(path: &Path) -> CliResult<Vec<u8>> {
    let bytes = fsio::read(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABELS {
        return Err(CliError::format(
            path,
            format!("bad IDX label magic {magic:#010x}"),
        ));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    Ok(idx_body(&bytes, 8, count, path)?.to_vec())
}

/// Loads an IDX image/label pair. With `keep` set, only those digits are
/// kept and relabelled to their position in `keep`.
pub fn read_idx(images: &Path, labels: &Path, keep: Option<&[u8]>) -> CliResult<RawTable> {
    let (count, dim, pixels) = read_idx_images(images)?;
    let raw_labels = read_idx_labels(labels)?;
    if raw_labels.len() != count {
        return Err(CliError::format(
            labels,
            format!("{} labels for {count} images", raw_labels.len()),
        ));
    }
    let mut features = Vec::new();
    let mut out_labels = Vec::new();
    for (i, &l) in raw_labels.iter().enumerate() {
        let label = match keep {
            Some(keep) => match keep.iter().position(|&k| k == l) {
                Some(j) => j as ClassId,
                None => continue,
            },
            None => l as ClassId,
        };
        features.extend(pixels[i * dim..(i + 1) * dim].iter().map(|&p| p as f64));
        out_labels.push(label);
    }
    if out_labels.is_empty() {
        return Err(CliError::format(
            images,
            "no samples left after class filtering",
        ));
    }
    Ok(RawTable {
        features,
        dim,
        labels: out_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_pair(dir: &Path, labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = vec![0, 0, 8, 3];
        img.extend((labels.len() as u32).to_be_bytes());
        img.extend(2u32.to_be_bytes());
        img.extend(2u32.to_be_bytes());
        for (i, _) in labels.iter().enumerate() {
            img.extend([i as u8; 4]);
        }
        let mut lab = vec![0, 0, 8, 1];
        lab.extend((labels.len() as u32).to_be_bytes());
        lab.extend(labels);
        let (ip, lp) = (dir.join("img.idx"), dir.join("lab.idx"));
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_round_trip_with_filter() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = idx_pair(dir.path(), &[1, 7, 3, 7]);
        let all = read_idx(&ip, &lp, None).unwrap();
        assert_eq!(all.labels, vec![1, 7, 3, 7]);
        assert_eq!(all.dim, 4);
        let ones_sevens = read_idx(&ip, &lp, Some(&[1, 7])).unwrap();
        assert_eq!(ones_sevens.labels, vec![0, 1, 1]);
        assert_eq!(&ones_sevens.features[4..8], &[1.0; 4]);
    }

    #[test]
    fn idx_magic_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = idx_pair(dir.path(), &[0]);
        assert!(read_idx(&lp, &ip, None).is_err());
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes.pop();
        std::fs::write(&ip, bytes).unwrap();
        assert!(read_idx_images(&ip).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data =
            Dataset::from_rows(&[vec![0.25, -1.5], vec![3.0, 1e-9]], vec![1, 0], 2, "r").unwrap();
        write_csv(&path, &data).unwrap();
        let back = read_csv(&path).unwrap().into_dataset(2, "r").unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn csv_requires_label_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_csv(&path).is_err());
        std::fs::write(&path, "a,label\nx,0\n").unwrap();
        assert!(read_csv(&path).is_err());
    }
}
