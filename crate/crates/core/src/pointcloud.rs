//! Point clouds: the n×d output of an embedding, one row per node.
//!
//! Two on-disk variants share one header (`graph_id`, `n`, `d`, provenance):
//!
//! * text: a magic line `#n2vlab-pointcloud text v1`, the header as one line
//!   of JSON, then `n` lines of `d` space-separated decimals;
//! * binary: the 8-byte magic `N2VLPC\0\0`, a little-endian `u32` version,
//!   a `u32` header length, the header JSON, then `n * d` little-endian `f64`
//!   values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skipgram::EmbedParams;
use crate::walks::WalkParams;

const TEXT_MAGIC: &str = "#n2vlab-pointcloud text v1";
const BINARY_MAGIC: &[u8; 8] = b"N2VLPC\0\0";
const BINARY_VERSION: u32 = 1;

/// Where a cloud came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(default)]
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub graph_id: String,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Header {
    graph_id: String,
    n: usize,
    d: usize,
    provenance: Provenance,
}

impl PointCloud {
    /// Wraps row-major `data` of shape `n × d`. All entries must be finite.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<PointCloud> {
        if data.len() != n * d {
            return Err(Error::ShapeMismatch(format!("{} values for a {n}×{d} cloud", data.len())));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate at row {}, column {}",
                pos / d.max(1),
                pos % d.max(1)
            )));
        }
        Ok(PointCloud { n, d, data, graph_id: String::new(), provenance: Provenance::default() })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<PointCloud> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        PointCloud::new(rows.len(), d, data)
    }

    pub fn with_graph_id(mut self, id: impl Into<String>) -> Self {
        self.graph_id = id.into();
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> PointCloud {
        PointCloud {
            data: self.data.iter().map(|&x| f(x)).collect(),
            ..self.clone()
        }
    }

    /// Returns a copy whose rows are zero-padded (or kept) to dimension `d`.
    pub fn padded_to(&self, d: usize) -> Result<PointCloud> {
        if d < self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: d });
        }
        let mut data = Vec::with_capacity(self.n * d);
        for row in self.rows() {
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(0.0, d - self.d));
        }
        Ok(PointCloud { n: self.n, d, data, ..self.clone() })
    }

    /// Largest pairwise Euclidean distance, by exhaustive scan.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.max(squared_distance(self.row(i), self.row(j)));
            }
        }
        best.sqrt()
    }

    fn header(&self) -> Header {
        Header {
            graph_id: self.graph_id.clone(),
            n: self.n,
            d: self.d,
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(TEXT_MAGIC);
        out.push('\n');
        out.push_str(&serde_json::to_string(&self.header())?);
        out.push('\n');
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<PointCloud> {
        let bad = |msg: String| Error::Format { path: "<text>".into(), msg };
        let mut lines = text.lines();
        if lines.next() != Some(TEXT_MAGIC) {
            return Err(bad("missing point-cloud magic line".into()));
        }
        let header: Header = serde_json::from_str(lines.next().ok_or_else(|| bad("missing header".into()))?)?;
        let mut data = Vec::with_capacity(header.n * header.d);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| bad(format!("row {i}: bad value {tok:?}")))?);
            }
            if data.len() - before != header.d {
                return Err(bad(format!("row {i} has {} values, expected {}", data.len() - before, header.d)));
            }
        }
        let cloud = PointCloud::new(header.n, header.d, data)?;
        Ok(cloud.with_graph_id(header.graph_id).with_provenance(header.provenance))
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.data.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<PointCloud> {
        let bad = |msg: &str| Error::Format { path: "<binary>".into(), msg: msg.to_string() };
        if bytes.len() < 16 || &bytes[..8] != BINARY_MAGIC {
            return Err(bad("missing point-cloud magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != BINARY_VERSION {
            return Err(bad("unsupported point-cloud version"));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body_start = 16 + header_len;
        if bytes.len() < body_start {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[16..body_start])?;
        let body = &bytes[body_start..];
        if body.len() != 8 * header.n * header.d {
            return Err(bad("payload size does not match header"));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let cloud = PointCloud::new(header.n, header.d, data)?;
        Ok(cloud.with_graph_id(header.graph_id).with_provenance(header.provenance))
    }

    /// Writes the binary variant, or the text variant when the extension is
    /// `.txt`. The file is written to a temporary name and renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if path.extension().is_some_and(|e| e == "txt") {
            self.to_text()?.into_bytes()
        } else {
            self.to_binary()?
        };
        write_atomic(path, &bytes)
    }

    /// Reads either variant, detected from the leading magic bytes.
    pub fn load(path: &Path) -> Result<PointCloud> {
        let bytes = fs::read(path)?;
        let tag = |e: Error| match e {
            Error::Format { msg, .. } => Error::Format { path: path.to_path_buf(), msg },
            other => other,
        };
        if bytes.starts_with(BINARY_MAGIC) {
            PointCloud::from_binary(&bytes).map_err(tag)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Format { path: path.to_path_buf(), msg: "not UTF-8".into() })?;
            PointCloud::from_text(&text).map_err(tag)
        }
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
