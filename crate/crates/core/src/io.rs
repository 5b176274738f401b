//! Dataset CSV files and model JSON documents.
//!
//! Datasets have one sample per row and one decimal column per coordinate,
//! with an optional header row. Models use the JSON schema of
//! [`Distribution`].

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::data::Dataset;
use crate::distributions::Distribution;
use crate::error::{Error, Result};

fn parse_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

/// Reads a dataset; a first row that does not parse as numbers is taken to
/// be a header.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut data: Option<Dataset> = None;
    for (i, record) in csv.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| parse_error(format!("line {line}"), e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => {
                let column = record.iter().position(|f| f.parse::<f64>().is_err()).unwrap_or(0) + 1;
                return Err(parse_error(format!("line {line}, column {column}"), e.to_string()));
            }
        };
        if let Some(column) = row.iter().position(|x| !x.is_finite()) {
            return Err(parse_error(format!("line {line}, column {}", column + 1), "value is not finite"));
        }
        match data.as_mut() {
            None => data = Some(Dataset::new(row.len(), row)?),
            Some(d) => d
                .push_row(&row)
                .map_err(|_| parse_error(format!("line {line}"), format!("expected {} columns, found {}", d.dim(), row.len())))?,
        }
    }
    data.ok_or_else(|| Error::InvalidInput("dataset has no rows".into()))
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}

/// One row per sample in shortest round-trip form, no header.
pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let mut line = String::new();
    for row in data.rows() {
        line.clear();
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{x:?}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Parses a model document; errors name the offending field as a path
/// such as `$.target.sigmas[0]`.
pub fn parse_model(text: &str) -> Result<Distribution> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| parse_error(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    model_from_value(&value, "$")
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| parse_error(path, format!("missing field `{name}`")))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| parse_error(path, format!("expected a number, found {v}")))
}

fn vector(v: &Value, path: &str) -> Result<Vec<f64>> {
    let items = v
        .as_array()
        .ok_or_else(|| parse_error(path, format!("expected an array, found {v}")))?;
    items
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix(v: &Value, path: &str) -> Result<Vec<Vec<f64>>> {
    let rows = v
        .as_array()
        .ok_or_else(|| parse_error(path, format!("expected an array of arrays, found {v}")))?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| vector(row, &format!("{path}[{i}]")))
        .collect()
}

fn model_from_value(v: &Value, path: &str) -> Result<Distribution> {
    let obj = v
        .as_object()
        .ok_or_else(|| parse_error(path, format!("expected a model object, found {v}")))?;
    let kind = field(obj, "type", path)?;
    let kind = kind
        .as_str()
        .ok_or_else(|| parse_error(format!("{path}.type"), "expected a string"))?;
    let at = |name: &str| format!("{path}.{name}");
    let mut fields = Map::new();
    fields.insert("type".into(), Value::from(kind));
    match kind {
        "gaussian" => {
            for name in ["mus", "sigmas"] {
                fields.insert(name.into(), Value::from(vector(field(obj, name, path)?, &at(name))?));
            }
        }
        "mixture" => {
            fields.insert("weights".into(), Value::from(vector(field(obj, "weights", path)?, &at("weights"))?));
            for name in ["mus", "sigmas"] {
                fields.insert(name.into(), Value::from(matrix(field(obj, name, path)?, &at(name))?));
            }
        }
        "point_mass" => {
            fields.insert(
                "location".into(),
                Value::from(vector(field(obj, "location", path)?, &at("location"))?),
            );
        }
        "corrupted" => {
            fields.insert("gamma".into(), Value::from(number(field(obj, "gamma", path)?, &at("gamma"))?));
            for name in ["target", "contaminant"] {
                let inner = model_from_value(field(obj, name, path)?, &at(name))?;
                fields.insert(name.into(), serde_json::to_value(inner).expect("models always serialize"));
            }
        }
        other => {
            return Err(parse_error(
                format!("{path}.type"),
                format!("unknown model type `{other}` (expected gaussian, mixture, point_mass or corrupted)"),
            ))
        }
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| parse_error(path, e.to_string()))
}

pub fn read_model_file(path: &Path) -> Result<Distribution> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_model(&text).map_err(|e| match e {
        Error::Parse { path: field, message } => parse_error(format!("{}: {field}", path.display()), message),
        other => other,
    })
}

pub fn model_to_json(model: &Distribution) -> String {
    serde_json::to_string_pretty(model).expect("models always serialize")
}
