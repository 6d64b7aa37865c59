//! On-disk formats: raw field dumps with JSON sidecars, numeric CSV tables,
//! nodal polylines and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use lelab_core::nodal::NodalSet;
use lelab_core::{DiscGrid, ProblemParams, ScalarField, Shape};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub q: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub epsilon: f64,
    pub mu: f64,
}

impl From<&ProblemParams> for ParamsRecord {
    fn from(p: &ProblemParams) -> Self {
        ParamsRecord { q: p.q(), lambda_plus: p.lambda_plus(), lambda_minus: p.lambda_minus(), epsilon: p.epsilon(), mu: p.mu() }
    }
}

/// JSON companion of a `.f64` dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub h: f64,
    /// `disc`, `sector` or `square`.
    pub shape: String,
    pub k: Option<u32>,
    /// Half-width of the lattice square (1 for disc and sector grids).
    pub half_width: f64,
    pub params: Option<ParamsRecord>,
    /// CRC32 of the raw little-endian byte stream.
    pub checksum: u32,
}

fn shape_fields(shape: Shape) -> (&'static str, Option<u32>) {
    match shape {
        Shape::Disc => ("disc", None),
        Shape::Sector { k } => ("sector", Some(k)),
        Shape::Square => ("square", None),
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn field_bytes(u: &ScalarField) -> Vec<u8> {
    u.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `path` (raw `f64` little endian, row-major over the full lattice)
/// and its sidecar next to it with extension `.json`.
pub fn write_field(path: &Path, u: &ScalarField, params: Option<&ProblemParams>) -> Result<Sidecar> {
    let bytes = field_bytes(u);
    let grid = u.grid();
    let (shape, k) = shape_fields(grid.shape());
    let sidecar = Sidecar {
        n: grid.n(),
        h: grid.h(),
        shape: shape.to_string(),
        k,
        half_width: grid.half_width(),
        params: params.map(ParamsRecord::from),
        checksum: crc32fast::hash(&bytes),
    };
    fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    write_json(&sidecar_path(path), &serde_json::to_value(&sidecar)?)?;
    Ok(sidecar)
}

/// Reads a dump given either the `.f64` file or its sidecar, checking the
/// checksum and rebuilding the grid it was written on.
pub fn read_field(path: &Path) -> Result<(ScalarField, Sidecar)> {
    let data_path = path.with_extension("f64");
    let text = fs::read_to_string(sidecar_path(&data_path)).with_context(|| format!("reading sidecar of {}", data_path.display()))?;
    let sidecar: Sidecar = serde_json::from_str(&text).context("parsing sidecar")?;
    let bytes = fs::read(&data_path).with_context(|| format!("reading {}", data_path.display()))?;
    let crc = crc32fast::hash(&bytes);
    if crc != sidecar.checksum {
        bail!("checksum mismatch for {}: expected {:08x}, found {crc:08x}", data_path.display(), sidecar.checksum);
    }
    if bytes.len() != 8 * sidecar.n * sidecar.n {
        bail!("{} holds {} bytes, expected {}", data_path.display(), bytes.len(), 8 * sidecar.n * sidecar.n);
    }
    let grid = match (sidecar.shape.as_str(), sidecar.k) {
        ("disc", _) => DiscGrid::build_disc(sidecar.n)?,
        ("sector", Some(k)) => DiscGrid::build_sector(sidecar.n, k)?,
        ("square", _) => DiscGrid::build_square(sidecar.n, sidecar.half_width)?,
        (other, _) => bail!("unknown grid shape {other:?}"),
    };
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((ScalarField::from_values(Arc::new(grid), values)?, sidecar))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A CSV cell: either a number or free text.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            bail!("row of {} cells under a header of {}", row.len(), header.len());
        }
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Nodal set as a GeoJSON feature collection: one `LineString` per polyline
/// and one `Point` per singular cluster.
pub fn nodal_geojson(set: &NodalSet) -> Value {
    let mut features: Vec<Value> = set
        .segments
        .iter()
        .map(|seg| {
            let coords: Vec<[f64; 2]> = seg.iter().map(|p| [p.x, p.y]).collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {"kind": "nodal_line"}
            })
        })
        .collect();
    for c in &set.clusters {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [c.center.x, c.center.y]},
            "properties": {"kind": "singular", "members": c.members, "min_grad": c.min_grad}
        }));
    }
    json!({
        "type": "FeatureCollection",
        "features": features,
        "properties": {
            "tau_grad": set.tau_grad,
            "regular_points": set.regular_points.len(),
            "singular_points": set.singular_points.len(),
            "max_vertex_value": set.max_vertex_value
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub crc32: u32,
}

/// Every artifact of a run, in the order written.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Artifacts { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn field(&mut self, name: &str, u: &ScalarField, params: Option<&ProblemParams>) -> Result<()> {
        let path = self.path(name);
        write_field(&path, u, params)?;
        self.files.push(path.clone());
        self.files.push(sidecar_path(&path));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        self.csv_owned(name, &header, rows)
    }

    pub fn csv_owned(&mut self, name: &str, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
        let path = self.path(name);
        write_csv(&path, header, rows)?;
        self.files.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let path = self.path(name);
        write_json(&path, value)?;
        self.files.push(path);
        Ok(())
    }

    pub fn entries(&self) -> Result<Vec<ManifestEntry>> {
        self.files
            .iter()
            .map(|p| {
                let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                let rel = p.strip_prefix(&self.root).unwrap_or(p);
                Ok(ManifestEntry { path: rel.to_string_lossy().into_owned(), bytes: bytes.len() as u64, crc32: crc32fast::hash(&bytes) })
            })
            .collect()
    }

    /// Writes `manifest.json` listing every artifact with its checksum.
    pub fn finish(&self, pipeline: &str, config: &Value) -> Result<PathBuf> {
        let manifest = json!({
            "pipeline": pipeline,
            "config": config,
            "files": self.entries()?,
        });
        let path = self.path("manifest.json");
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("lelab-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0, f64::MAX] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn field_dump_round_trips() {
        let dir = tmp("dump");
        let grid = Arc::new(DiscGrid::build_sector(33, 3).unwrap());
        let u = ScalarField::from_fn(grid, |p| p.x * p.y + 0.25);
        let p = ProblemParams::new(0.5, 1.0, 2.0).unwrap();
        let path = dir.join("u.f64");
        let side = write_field(&path, &u, Some(&p)).unwrap();
        assert_eq!(side.shape, "sector");
        assert_eq!(side.k, Some(3));
        let (back, side2) = read_field(&dir.join("u.json")).unwrap();
        assert_eq!(side, side2);
        assert_eq!(back.values(), u.values());
        assert_eq!(back.grid().shape(), Shape::Sector { k: 3 });
    }

    #[test]
    fn corrupted_dump_is_rejected() {
        let dir = tmp("corrupt");
        let grid = Arc::new(DiscGrid::build_disc(33).unwrap());
        let u = ScalarField::from_fn(grid, |p| 1.0 - p.norm());
        let path = dir.join("u.f64");
        write_field(&path, &u, None).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8 * 33 * 16 + 3] ^= 1;
        fs::write(&path, bytes).unwrap();
        let err = read_field(&path).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
    }

    #[test]
    fn csv_layout() {
        let dir = tmp("csv");
        let path = dir.join("t.csv");
        write_csv(&path, &["a".into(), "b".into()], &[vec![Cell::Num(0.5), "x".into()], vec![Cell::Int(3), Cell::Num(-2.0)]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n5.0000000000000000e-1,x\n3,-2.0000000000000000e0\n");
        assert!(write_csv(&path, &["a".into()], &[vec![Cell::Int(1), Cell::Int(2)]]).is_err());
    }

    #[test]
    fn manifest_lists_checksums() {
        let dir = tmp("manifest");
        let mut a = Artifacts::new(&dir).unwrap();
        a.json("x.json", &json!({"v": 1})).unwrap();
        let m = a.finish("test", &json!({})).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        let entry = &v["files"][0];
        assert_eq!(entry["path"], "x.json");
        let bytes = fs::read(dir.join("x.json")).unwrap();
        assert_eq!(entry["crc32"].as_u64().unwrap() as u32, crc32fast::hash(&bytes));
    }
}
