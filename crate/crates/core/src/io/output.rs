//! Sample and summary files. Every file is written to a temporary sibling
//! first and renamed into place.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::chain::ChainSample;
use crate::error::{Error, Result};
use crate::signed_log::Sign;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn samples_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["iter", "K", "sign", "cum_cost"].map(String::from).into();
    h.extend((0..dim).map(|i| format!("theta_{i}")));
    h
}

/// CSV with columns `iter,K,sign,cum_cost,theta_0..theta_{dim-1}`.
pub fn samples_to_csv(samples: &[ChainSample], dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(samples_header(dim))?;
    for s in samples {
        if s.theta.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.theta.len(),
            });
        }
        let mut row = vec![
            s.iter.to_string(),
            s.k.to_string(),
            s.sign.as_i8().to_string(),
            s.cum_cost.to_string(),
        ];
        row.extend(s.theta.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn write_samples(path: &Path, samples: &[ChainSample], dim: usize) -> Result<()> {
    write_atomic(path, &samples_to_csv(samples, dim)?)
}

pub fn parse_samples(text: &str, path: &Path) -> Result<Vec<ChainSample>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let dim = header.len().saturating_sub(4);
    if header.iter().collect::<Vec<_>>() != samples_header(dim) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected samples header".into(),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |m: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: m.to_string(),
        };
        let iter = record[0].parse().map_err(|_| err("bad iter"))?;
        let k = record[1].parse().map_err(|_| err("bad K"))?;
        let sign = record[2]
            .parse::<i8>()
            .ok()
            .and_then(Sign::from_i8)
            .ok_or_else(|| err("bad sign"))?;
        let cum_cost = record[3].parse().map_err(|_| err("bad cum_cost"))?;
        let theta = (4..4 + dim)
            .map(|j| record[j].parse::<f64>().map_err(|_| err("bad theta")))
            .collect::<Result<Vec<_>>>()?;
        out.push(ChainSample {
            iter,
            k,
            sign,
            cum_cost,
            theta,
        });
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<Vec<ChainSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples(&text, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
