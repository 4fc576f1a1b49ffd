use super::dataset::{Example, LabeledDataset, Split};
use super::render::RendererSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const FORMAT_VERSION: u32 = 1;

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub renderer: RendererSpec,
    pub spurious_attribute: String,
    pub kappa_realized: f64,
    pub split: Split,
    pub count: usize,
}

/// Writes a header line followed by one JSON record per example.
pub fn write_dataset<W: Write>(mut w: W, data: &LabeledDataset, renderer: &RendererSpec) -> Result<()> {
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        renderer: renderer.clone(),
        spurious_attribute: data.spurious_attribute.clone(),
        kappa_realized: data.kappa_realized,
        split: data.split,
        count: data.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for e in &data.examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<(DatasetHeader, LabeledDataset)> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Dataset("empty dataset file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported dataset format version {}",
            header.format_version
        )));
    }
    let mut examples = Vec::with_capacity(header.count);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        examples.push(serde_json::from_str::<Example>(&line)?);
    }
    if examples.len() != header.count {
        return Err(Error::Dataset(format!(
            "header announces {} examples, file has {}",
            header.count,
            examples.len()
        )));
    }
    let data = LabeledDataset::new(examples, &header.spurious_attribute, header.split);
    Ok((header, data))
}
