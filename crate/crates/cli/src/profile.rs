//! `r,value` profile files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dualmp::RadialFunction;

/// Nodes and values as read from a profile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn write(path: &Path, u: &RadialFunction) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    u.write_csv(&mut out).with_context(|| format!("cannot write {}", path.display()))?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}

/// Read a profile. Rows are numbered from 1 for the header, so the first
/// data row is row 2 as in a spreadsheet.
pub fn read(path: &Path) -> Result<Profile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).with_context(|| format!("corrupted profile {}", path.display()))
}

pub fn parse(text: &str) -> Result<Profile> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().context("row 1: unreadable header")?;
    if headers.len() != 2 || &headers[0] != "r" || &headers[1] != "value" {
        bail!("row 1: expected header `r,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","));
    }
    let mut profile = Profile { r: Vec::new(), values: Vec::new() };
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.with_context(|| format!("row {row}: malformed record"))?;
        if record.len() != 2 {
            bail!("row {row}: expected 2 fields, found {}", record.len());
        }
        let field = |j: usize, name: &str| -> Result<f64> {
            let x: f64 = record[j].parse().with_context(|| format!("row {row}: {name} {:?} is not a number", &record[j]))?;
            if !x.is_finite() {
                bail!("row {row}: {name} is not finite");
            }
            Ok(x)
        };
        let r = field(0, "r")?;
        let value = field(1, "value")?;
        if let Some(&prev) = profile.r.last() {
            if r <= prev {
                bail!("row {row}: radii must increase ({r:e} after {prev:e})");
            }
        } else if r <= 0.0 {
            bail!("row {row}: radius must be positive");
        }
        profile.r.push(r);
        profile.values.push(value);
    }
    if profile.r.len() < 3 {
        bail!("profile has {} rows, at least 3 are needed", profile.r.len());
    }
    Ok(profile)
}
