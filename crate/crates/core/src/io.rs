//! File formats: datasets, model files, JSON and CSV helpers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, GridSpec, OracleDataset, OracleRow, DATASET_HEADER};
use crate::error::{Error, Result};
use crate::fit::{ModelFile, SCHEMA_VERSION};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes a CSV file with the given header.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a CSV file, checking the header.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(String::from)
        .collect();
    if found != header {
        return Err(Error::usage(format!(
            "{}: expected header {}, found {}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    r.records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(String::from).collect())
                .map_err(csv_err(path))
        })
        .collect()
}

pub fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::usage(format!("{}: '{s}' is not a number", path.display())))
}

/// Dataset metadata stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub grid: GridSpec,
    pub seed: u64,
    pub mc_samples: usize,
    pub params: DeviceParams,
    pub rows: usize,
}

/// `dataset.csv` → `dataset.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

pub fn write_dataset(path: &Path, data: &OracleDataset) -> Result<()> {
    write_csv(
        path,
        &DATASET_HEADER,
        data.rows.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.v_wl),
                fmt_f64(r.v_dd),
                fmt_f64(r.temp),
                fmt_f64(r.dv),
                r.sigma_dv.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.e_wr),
                fmt_f64(r.e_dc),
            ]
        }),
    )?;
    write_json(
        &sidecar_path(path),
        &DatasetSidecar {
            grid: data.grid.clone(),
            seed: data.seed,
            mc_samples: data.mc_samples,
            params: data.params.clone(),
            rows: data.rows.len(),
        },
    )
}

pub fn read_dataset(path: &Path) -> Result<OracleDataset> {
    let meta: DatasetSidecar = read_json(&sidecar_path(path))?;
    let records = read_csv(path, &DATASET_HEADER)?;
    let rows = records
        .iter()
        .map(|rec| {
            let f = |i: usize| parse_f64(path, &rec[i]);
            Ok(OracleRow {
                t: f(0)?,
                v_wl: f(1)?,
                v_dd: f(2)?,
                temp: f(3)?,
                dv: f(4)?,
                sigma_dv: if rec[5].is_empty() { None } else { Some(f(5)?) },
                e_wr: f(6)?,
                e_dc: f(7)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != meta.rows {
        return Err(Error::usage(format!(
            "{}: {} rows but the sidecar records {}",
            path.display(),
            rows.len(),
            meta.rows
        )));
    }
    Ok(OracleDataset {
        rows,
        grid: meta.grid,
        seed: meta.seed,
        mc_samples: meta.mc_samples,
        params: meta.params,
    })
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_json(path, model)
}

/// Loads a model file, rejecting other schema versions before parsing the
/// rest.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: u32,
    }
    let v: Version = read_json(path)?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found: v.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    read_json(path)
}
