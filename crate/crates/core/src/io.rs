//! Binary container for grid functions and datasets.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 8 bytes   magic "OPLCNT01"
//! 8 bytes   u64 header length H
//! H bytes   UTF-8 JSON {"kind": .., "meta": {..}, "arrays": [{"name": .., "len": ..}, ..]}
//! ...       each array in header order as raw f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

pub const MAGIC: &[u8; 8] = b"OPLCNT01";

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub arrays: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    arrays: Vec<ArrayEntry>,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: u64,
}

impl Container {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Container {
            kind: kind.to_string(),
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn with_array(mut self, name: &str, data: Vec<f64>) -> Self {
        self.arrays.push((name.to_string(), data));
        self
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| Error::Format(format!("missing array `{name}`")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "expected a `{kind}` container, found `{}`",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn meta_field<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing metadata `{key}`")))?;
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, d)| ArrayEntry {
                    name: name.clone(),
                    len: d.len() as u64,
                })
                .collect(),
        };
        let text = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(text.len() as u64).to_le_bytes())?;
        w.write_all(&text)?;
        for (_, data) in &self.arrays {
            let mut buf = Vec::with_capacity(8 * data.len());
            for x in data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        if len > 1 << 32 {
            return Err(Error::Format("header too large".into()));
        }
        let mut text = vec![0u8; len as usize];
        r.read_exact(&mut text)?;
        let header: Header = serde_json::from_slice(&text)?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for entry in header.arrays {
            let mut bytes = vec![0u8; 8 * entry.len as usize];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((entry.name, data));
        }
        Ok(Container {
            kind: header.kind,
            meta: header.meta,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Container::read_from(std::io::BufReader::new(file))
    }
}

pub fn grid_function_container(f: &GridFunction) -> Container {
    Container::new("grid_function", serde_json::json!({ "grid": f.grid() }))
        .with_array("values", f.values().to_vec())
}

pub fn grid_function_from_container(c: &Container) -> Result<GridFunction> {
    c.expect_kind("grid_function")?;
    let grid: Grid = c.meta_field("grid")?;
    GridFunction::new(grid, c.array("values")?.to_vec())
}
