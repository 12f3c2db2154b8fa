//! CSV encoding of a [`DataMatrix`].
//!
//! ```text
//! # level-screen matrix format_version=1 registry_version=1 schema=<hex>
//! level_id,player_character.count,...,label
//! lvl-001,1,1,...,1
//! ```
//! Missing cells are empty. The mask sidecar has the same shape with `0`/`1`.

use super::{DataMatrix, FeatureSchema, FeatureVector};
use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

const MAGIC: &str = "# level-screen matrix";

fn meta_line(schema: &FeatureSchema) -> String {
    format!(
        "{MAGIC} format_version={FORMAT_VERSION} registry_version={} schema={}\n",
        schema.registry_version,
        schema.fingerprint()
    )
}

fn header(matrix: &DataMatrix) -> Vec<String> {
    let mut h = vec!["level_id".to_string()];
    h.extend(matrix.schema.names().map(str::to_string));
    if matrix.labels.is_some() {
        h.push("label".into());
    }
    h
}

fn finish(meta: String, wtr: csv::Writer<Vec<u8>>) -> String {
    let body = wtr.into_inner().expect("in-memory writer");
    meta + &String::from_utf8(body).expect("csv output is utf-8")
}

pub fn write_matrix_csv(matrix: &DataMatrix) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(header(matrix)).expect("in-memory write");
    for (i, row) in matrix.rows.iter().enumerate() {
        let mut rec = vec![row.level_id.clone()];
        rec.extend(row.values.iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        }));
        if let Some(l) = &matrix.labels {
            rec.push(if l[i] { "1" } else { "0" }.into());
        }
        wtr.write_record(rec).expect("in-memory write");
    }
    finish(meta_line(&matrix.schema), wtr)
}

pub fn write_mask_csv(matrix: &DataMatrix) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut h = header(matrix);
    if matrix.labels.is_some() {
        h.pop();
    }
    wtr.write_record(h).expect("in-memory write");
    for row in &matrix.rows {
        let mut rec = vec![row.level_id.clone()];
        rec.extend(row.missing.iter().map(|&m| if m { "1" } else { "0" }.to_string()));
        wtr.write_record(rec).expect("in-memory write");
    }
    finish(meta_line(&matrix.schema), wtr)
}

fn parse_meta(line: &str) -> Result<(u32, u32, String)> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Parse {
            offset: 0,
            message: "missing matrix metadata line".into(),
        })?;
    let mut fv = None;
    let mut rv = None;
    let mut fp = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("format_version", v)) => fv = v.parse().ok(),
            Some(("registry_version", v)) => rv = v.parse().ok(),
            Some(("schema", v)) => fp = Some(v.to_string()),
            _ => {}
        }
    }
    match (fv, rv, fp) {
        (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
        _ => Err(Error::Parse {
            offset: 0,
            message: "incomplete matrix metadata line".into(),
        }),
    }
}

/// Reads a matrix file. The file must have been written for `schema`;
/// anything else fails with a version error.
pub fn parse_matrix_csv(text: &str, schema: &FeatureSchema) -> Result<DataMatrix> {
    let (meta, body) = text.split_once('\n').unwrap_or((text, ""));
    let (format_version, registry_version, fingerprint) = parse_meta(meta)?;
    if format_version != FORMAT_VERSION {
        return Err(Error::version("matrix format", FORMAT_VERSION, format_version));
    }
    schema.check_registry(registry_version)?;
    if fingerprint != schema.fingerprint() {
        return Err(Error::version("schema", schema.fingerprint(), fingerprint));
    }

    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_label = head.last().is_some_and(|h| h == "label");
    let names: Vec<&str> = schema.names().collect();
    let cols = &head[1..head.len() - usize::from(has_label)];
    if head.first().map(String::as_str) != Some("level_id") || cols != names.as_slice() {
        return Err(Error::version(
            "matrix columns",
            "registry-derived column list",
            "different column list",
        ));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let offset = meta.len() + 1 + rec.position().map_or(0, |p| p.byte() as usize);
        let bad = |message: String| Error::Parse { offset, message };
        let mut values = Vec::with_capacity(names.len());
        let mut missing = Vec::with_capacity(names.len());
        for cell in rec.iter().skip(1).take(names.len()) {
            if cell.is_empty() {
                values.push(f64::NAN);
                missing.push(true);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| bad(format!("bad numeric cell `{cell}`")))?;
                values.push(v);
                missing.push(false);
            }
        }
        if values.len() != names.len() {
            return Err(bad("short row".into()));
        }
        if has_label {
            match rec.get(names.len() + 1) {
                Some("1") => labels.push(true),
                Some("0") => labels.push(false),
                other => return Err(bad(format!("bad label {other:?}"))),
            }
        }
        rows.push(FeatureVector {
            level_id: rec[0].to_string(),
            values,
            missing,
        });
    }
    DataMatrix::new(schema.clone(), rows, has_label.then_some(labels))
}
