use std::collections::BTreeSet;
use std::fmt;
use std::io::{Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::descriptor::FeatureDescriptor;
use crate::error::{Error, Result};
use crate::util::write_atomic;

const MAGIC: &[u8; 4] = b"VXFM";
const VERSION: u32 = 1;
/// Metadata columns appended after the features in the CSV form.
const META_COLUMNS: [&str; 4] = ["object_id", "label", "rotation", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("split must be train or test, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowMeta {
    pub object_id: String,
    /// Index into [`FeatureMatrix::labels`].
    pub label: usize,
    pub rotation: u32,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` is CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

/// Dense row-major feature values with per-row object metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<FeatureDescriptor>,
    labels: Vec<String>,
    rows: Vec<RowMeta>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<FeatureDescriptor>, labels: Vec<String>) -> Self {
        Self {
            columns,
            labels,
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, meta: RowMeta, values: &[f64]) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::ColumnMismatch {
                expected: self.columns.len(),
                actual: values.len(),
            });
        }
        if meta.label >= self.labels.len() {
            return Err(Error::Manifest(format!("label index {} out of range", meta.label)));
        }
        self.rows.push(meta);
        self.values.extend_from_slice(values);
        Ok(())
    }

    pub fn columns(&self) -> &[FeatureDescriptor] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.to_string()).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[RowMeta] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let n = self.columns.len();
        &self.values[index * n..(index + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows matching `keep`, with the same columns and labels.
    pub fn filter_rows(&self, mut keep: impl FnMut(&RowMeta) -> bool) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.columns.clone(), self.labels.clone());
        for (i, meta) in self.rows.iter().enumerate() {
            if keep(meta) {
                out.rows.push(meta.clone());
                out.values.extend_from_slice(self.row(i));
            }
        }
        out
    }

    pub fn split(&self, split: Split) -> FeatureMatrix {
        self.filter_rows(|m| m.split == split)
    }

    /// Columns matching `keep`, in their existing order.
    pub fn select_columns(&self, mut keep: impl FnMut(&FeatureDescriptor) -> bool) -> FeatureMatrix {
        let picked: Vec<usize> = (0..self.columns.len()).filter(|&c| keep(&self.columns[c])).collect();
        let mut out = FeatureMatrix::new(picked.iter().map(|&c| self.columns[c]).collect(), self.labels.clone());
        out.rows = self.rows.clone();
        for i in 0..self.rows.len() {
            let row = self.row(i);
            out.values.extend(picked.iter().map(|&c| row[c]));
        }
        out
    }

    /// Row indices grouped by object, in first-appearance order.
    pub fn object_groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: std::collections::HashMap<&str, Vec<usize>> = Default::default();
        for (i, meta) in self.rows.iter().enumerate() {
            groups
                .entry(&meta.object_id)
                .or_insert_with(|| {
                    order.push(&meta.object_id);
                    Vec::new()
                })
                .push(i);
        }
        order.into_iter().map(|id| groups.remove(id).unwrap()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
        write_atomic(path.as_ref(), |w| match format {
            MatrixFormat::Csv => self.write_csv(w),
            MatrixFormat::Binary => self.write_binary(w),
        })
    }

    pub fn load(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        match format {
            MatrixFormat::Csv => Self::read_csv(&bytes[..]),
            MatrixFormat::Binary => Self::read_binary(&bytes),
        }
    }

    /// Header of canonical column names followed by the metadata columns;
    /// values written with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.column_names();
        header.extend(META_COLUMNS.iter().map(|s| s.to_string()));
        out.write_record(&header)?;
        for (i, meta) in self.rows.iter().enumerate() {
            let mut record: Vec<String> = self.row(i).iter().map(|x| format!("{x:.16e}")).collect();
            record.push(meta.object_id.clone());
            record.push(self.labels[meta.label].clone());
            record.push(meta.rotation.to_string());
            record.push(meta.split.to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Labels are recovered as the sorted set of label names present.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let header = input.headers()?.clone();
        let n = header.len();
        if n < META_COLUMNS.len() || header.iter().skip(n - META_COLUMNS.len()).ne(META_COLUMNS) {
            return Err(Error::VersionMismatch("CSV matrix lacks the metadata columns".into()));
        }
        let columns: Vec<FeatureDescriptor> = header
            .iter()
            .take(n - META_COLUMNS.len())
            .map(str::parse)
            .collect::<Result<_>>()?;
        let records: Vec<csv::StringRecord> = input.records().collect::<std::result::Result<_, _>>()?;
        let labels: Vec<String> = records
            .iter()
            .map(|r| r[n - 3].to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut m = FeatureMatrix::new(columns, labels);
        for (line, r) in records.iter().enumerate() {
            let bad = |what: &str| Error::parse("matrix CSV", line + 2, what.to_string());
            let values: Vec<f64> = r
                .iter()
                .take(n - META_COLUMNS.len())
                .map(|x| x.trim().parse().map_err(|_| bad("invalid number")))
                .collect::<Result<_>>()?;
            let meta = RowMeta {
                object_id: r[n - 4].to_string(),
                label: m
                    .labels
                    .binary_search_by(|l| l.as_str().cmp(&r[n - 3]))
                    .expect("label collected"),
                rotation: r[n - 2].parse().map_err(|_| bad("invalid rotation index"))?,
                split: r[n - 1].parse()?,
            };
            m.push_row(meta, &values)?;
        }
        Ok(m)
    }

    /// Magic, version, descriptor table, labels, row metadata, then
    /// row-major values; all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.columns.len() as u32)?;
        for c in &self.columns {
            write_string(&mut w, &c.to_string())?;
        }
        w.write_u32::<LittleEndian>(self.labels.len() as u32)?;
        for l in &self.labels {
            write_string(&mut w, l)?;
        }
        w.write_u64::<LittleEndian>(self.rows.len() as u64)?;
        for meta in &self.rows {
            write_string(&mut w, &meta.object_id)?;
            w.write_u32::<LittleEndian>(meta.label as u32)?;
            w.write_u32::<LittleEndian>(meta.rotation)?;
            w.write_u8(match meta.split {
                Split::Train => 0,
                Split::Test => 1,
            })?;
        }
        for &x in &self.values {
            w.write_f64::<LittleEndian>(x)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::VersionMismatch("not a feature matrix file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != VERSION {
            return Err(Error::VersionMismatch(format!(
                "feature matrix version {version}, expected {VERSION}"
            )));
        }
        let n_cols = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let columns: Vec<FeatureDescriptor> = (0..n_cols)
            .map(|_| read_string(&mut r)?.parse())
            .collect::<Result<_>>()?;
        let n_labels = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let labels: Vec<String> = (0..n_labels).map(|_| read_string(&mut r)).collect::<Result<_>>()?;
        let n_rows = r.read_u64::<LittleEndian>().map_err(truncated)? as usize;
        let mut m = FeatureMatrix::new(columns, labels);
        let mut rows = Vec::new();
        for _ in 0..n_rows {
            let object_id = read_string(&mut r)?;
            let label = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
            let rotation = r.read_u32::<LittleEndian>().map_err(truncated)?;
            let split = match r.read_u8().map_err(truncated)? {
                0 => Split::Train,
                1 => Split::Test,
                s => return Err(Error::VersionMismatch(format!("invalid split code {s}"))),
            };
            if label >= m.labels.len() {
                return Err(Error::VersionMismatch(format!("label index {label} out of range")));
            }
            rows.push(RowMeta {
                object_id,
                label,
                rotation,
                split,
            });
        }
        let remaining = bytes.len() - r.position() as usize;
        let expected = n_rows
            .checked_mul(n_cols)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| Error::VersionMismatch("matrix size overflows".into()))?;
        if remaining != expected {
            return Err(Error::VersionMismatch(format!(
                "expected {expected} bytes of values, found {remaining}"
            )));
        }
        m.values = (0..n_rows * n_cols)
            .map(|_| r.read_f64::<LittleEndian>())
            .collect::<std::io::Result<_>>()?;
        m.rows = rows;
        Ok(m)
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::VersionMismatch("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_string(r: &mut Cursor<&[u8]>) -> Result<String> {
    let len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let available = r.get_ref().len() - r.position() as usize;
    if len > available {
        return Err(Error::VersionMismatch("file is truncated".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| Error::VersionMismatch("invalid UTF-8 string".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn sample() -> FeatureMatrix {
        let columns = vec![
            FeatureDescriptor::raw(1, FeatureKind::EV, 0, [0, 0, 0]),
            FeatureDescriptor::raw(1, FeatureKind::EV, 1, [0, 0, 0]),
            FeatureDescriptor::percentile(4, FeatureKind::SA, 50, 0),
        ];
        let mut m = FeatureMatrix::new(columns, vec!["a".into(), "b".into()]);
        for (i, split) in [Split::Train, Split::Train, Split::Test].into_iter().enumerate() {
            let meta = RowMeta {
                object_id: format!("obj{}", i / 2),
                label: i % 2,
                rotation: i as u32,
                split,
            };
            m.push_row(meta, &[0.1 * i as f64, 1.0 / 3.0, -(i as f64).exp()])
                .unwrap();
        }
        m
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(FeatureMatrix::read_binary(&buf).unwrap(), m);
    }

    #[test]
    fn csv_round_trip_is_exact_at_17_digits() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("[1][EV][0],[1][EV][1],[4][SA][hist50],object_id"));
        assert_eq!(FeatureMatrix::read_csv(&buf[..]).unwrap(), m);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        for cut in [0, 3, 8, 20, buf.len() / 2, buf.len() - 1] {
            assert!(FeatureMatrix::read_binary(&buf[..cut]).is_err(), "cut at {cut}");
        }
        buf[4] = 9;
        assert!(matches!(
            FeatureMatrix::read_binary(&buf),
            Err(Error::VersionMismatch(_))
        ));
    }

    #[test]
    fn row_width_is_checked() {
        let mut m = sample();
        let meta = m.rows()[0].clone();
        assert!(matches!(m.push_row(meta, &[1.0]), Err(Error::ColumnMismatch { .. })));
    }

    #[test]
    fn selections() {
        let m = sample();
        assert_eq!(m.split(Split::Test).n_rows(), 1);
        let ev = m.select_columns(|d| d.kind == FeatureKind::EV);
        assert_eq!(ev.n_cols(), 2);
        assert_eq!(ev.row(2), &m.row(2)[..2]);
        assert_eq!(m.object_groups(), vec![vec![0, 1], vec![2]]);
    }
}
